//! Constitutive laws, the logarithmic potential, forces and energies.
//!
//! Nonlinear terms are evaluated on grid samples and returned as dealiased
//! coefficient fields. No value of `φ` is ever clamped: a sample with
//! `|φ| >= 1` is reported as an error.

use ndarray::{Array2, Zip};

use crate::error::{Error, Result};
use crate::spectral::{Grid, SpectralField, SpectralVectorField};

/// Physical constants of the two-fluid mixture and of the potential.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluidParams {
    pub rho1: f64,
    pub rho2: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub theta: f64,
    pub theta0: f64,
}

impl FluidParams {
    pub fn new(rho1: f64, rho2: f64, nu1: f64, nu2: f64, theta: f64, theta0: f64) -> Result<Self> {
        let p = Self {
            rho1,
            rho2,
            nu1,
            nu2,
            theta,
            theta0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rho1", self.rho1),
            ("rho2", self.rho2),
            ("nu1", self.nu1),
            ("nu2", self.nu2),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.theta > 0.0 && self.theta < self.theta0 && self.theta0.is_finite()) {
            return Err(Error::Config(format!(
                "potential temperatures must satisfy 0 < theta < theta0, got theta = {}, theta0 = {}",
                self.theta, self.theta0
            )));
        }
        Ok(())
    }

    pub fn rho_min(&self) -> f64 {
        self.rho1.min(self.rho2)
    }

    pub fn rho_max(&self) -> f64 {
        self.rho1.max(self.rho2)
    }

    pub fn nu_min(&self) -> f64 {
        self.nu1.min(self.nu2)
    }

    pub fn nu_max(&self) -> f64 {
        self.nu1.max(self.nu2)
    }

    /// ρ'(φ) = (ρ₁ − ρ₂)/2, constant.
    #[inline]
    pub fn density_slope(&self) -> f64 {
        0.5 * (self.rho1 - self.rho2)
    }

    #[inline]
    pub fn density_at(&self, s: f64) -> f64 {
        0.5 * self.rho1 * (1.0 + s) + 0.5 * self.rho2 * (1.0 - s)
    }

    #[inline]
    pub fn viscosity_at(&self, s: f64) -> f64 {
        0.5 * self.nu1 * (1.0 + s) + 0.5 * self.nu2 * (1.0 - s)
    }

    /// Ψ'(s) without the domain check.
    #[inline]
    pub(crate) fn dpsi(&self, s: f64) -> f64 {
        convex_derivative(s, self.theta) - self.theta0 * s
    }

    #[inline]
    pub(crate) fn psi(&self, s: f64) -> f64 {
        convex_part(s, self.theta) - 0.5 * self.theta0 * s * s
    }
}

/// F(s) = (θ/2)[(1+s)log(1+s) + (1−s)log(1−s)].
#[inline]
pub fn convex_part(s: f64, theta: f64) -> f64 {
    if s.abs() == 1.0 {
        return theta * std::f64::consts::LN_2;
    }
    // same value as 2s·artanh(s) + log(1−s²), which keeps full relative
    // accuracy for small s instead of cancelling two O(s) terms
    0.5 * theta * (2.0 * s * s.atanh() + (-s * s).ln_1p())
}

/// F'(s) = θ artanh(s).
#[inline]
pub fn convex_derivative(s: f64, theta: f64) -> f64 {
    // artanh(s) = ½ log((1+s)/(1−s)), with better cancellation near 0
    theta * s.atanh()
}

/// F''(s) = θ / (1 − s²).
#[inline]
pub fn convex_second_derivative(s: f64, theta: f64) -> f64 {
    theta / ((1.0 - s) * (1.0 + s))
}

/// Potential and its pieces at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialValues {
    pub psi: f64,
    pub dpsi: f64,
    pub f: f64,
    pub df: f64,
    pub d2f: f64,
}

pub fn potential_values(s: f64, p: &FluidParams) -> Result<PotentialValues> {
    if !(s > -1.0 && s < 1.0) {
        return Err(Error::Domain(s));
    }
    let f = convex_part(s, p.theta);
    let df = convex_derivative(s, p.theta);
    Ok(PotentialValues {
        psi: f - 0.5 * p.theta0 * s * s,
        dpsi: df - p.theta0 * s,
        f,
        df,
        d2f: convex_second_derivative(s, p.theta),
    })
}

/// Samples of `phi`, failing on the first sample with `|φ| > limit`.
pub(crate) fn checked_samples(phi: &SpectralField, limit: f64, strict: bool) -> Result<Array2<f64>> {
    let samples = phi.backward_transform();
    for ((i, j), v) in samples.indexed_iter() {
        let a = v.abs();
        let bad = if strict { a >= limit } else { a > limit };
        if bad || !v.is_finite() {
            return Err(Error::PhaseBound { value: a, i, j });
        }
    }
    Ok(samples)
}

/// ρ(φ) = ρ₁(1+φ)/2 + ρ₂(1−φ)/2; affine, so applied to coefficients directly.
pub fn density(phi: &SpectralField, p: &FluidParams) -> Result<SpectralField> {
    checked_samples(phi, 1.0, false)?;
    Ok(affine(phi, 0.5 * (p.rho1 + p.rho2), p.density_slope()))
}

pub fn viscosity(phi: &SpectralField, p: &FluidParams) -> Result<SpectralField> {
    checked_samples(phi, 1.0, false)?;
    Ok(affine(phi, 0.5 * (p.nu1 + p.nu2), 0.5 * (p.nu1 - p.nu2)))
}

fn affine(phi: &SpectralField, offset: f64, slope: f64) -> SpectralField {
    let mut out = phi.scale(slope);
    out.coeffs_mut()[[0, 0]] += offset;
    out
}

/// μ = −Δφ + Ψ'(φ), with Ψ'(φ) evaluated on samples and dealiased.
pub fn chemical_potential(phi: &SpectralField, p: &FluidParams) -> Result<SpectralField> {
    let samples = checked_samples(phi, 1.0, true)?;
    let dpsi = samples.mapv(|s| p.dpsi(s));
    let nonlinear = SpectralField::from_samples_dealiased(&dpsi, phi.grid());
    Ok(&nonlinear - &phi.laplacian())
}

/// J̃ = −((ρ₁ − ρ₂)/2) ∇μ; exactly zero for matched densities.
pub fn diffusive_flux(mu: &SpectralField, p: &FluidParams) -> SpectralVectorField {
    let slope = p.density_slope();
    if slope == 0.0 {
        return SpectralVectorField::zeros(mu.grid());
    }
    mu.gradient().scale(-slope)
}

/// Capillary force μ∇φ; differs from −div(∇φ⊗∇φ) by the gradient
/// ∇(½|∇φ|² + Ψ(φ)), which the pressure absorbs.
pub fn capillary_force(phi: &SpectralField, mu: &SpectralField) -> Result<SpectralVectorField> {
    phi.check_grid(mu)?;
    let grid = phi.grid();
    let m = mu.backward_transform();
    let [gx, gy] = phi.gradient().backward_transform();
    Ok(SpectralVectorField {
        x: SpectralField::from_samples_dealiased(&(&m * &gx), grid),
        y: SpectralField::from_samples_dealiased(&(&m * &gy), grid),
    })
}

/// Simulation state at one time instant.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub time: f64,
    pub u: SpectralVectorField,
    pub phi: SpectralField,
    /// Chemical potential of `phi`, kept in sync by [`FlowState::new`].
    pub mu: SpectralField,
    /// Pressure from the most recent momentum step (zero initially).
    pub pressure: SpectralField,
}

impl FlowState {
    /// Builds a state at `time`, computing μ from φ.
    pub fn new(time: f64, u: SpectralVectorField, phi: SpectralField, p: &FluidParams) -> Result<Self> {
        u.x.check_grid(&phi)?;
        u.y.check_grid(&phi)?;
        let mu = chemical_potential(&phi, p)?;
        let pressure = SpectralField::zeros(phi.grid());
        Ok(Self {
            time,
            u,
            phi,
            mu,
            pressure,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.phi.grid()
    }

    pub fn max_abs_phi(&self) -> f64 {
        self.phi.max_abs_sample()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyParts {
    pub total: f64,
    pub kinetic: f64,
    pub free: f64,
}

/// E = ∫½ρ(φ)|u|² + ∫½|∇φ|² + Ψ(φ), by grid quadrature.
pub fn total_energy(state: &FlowState, p: &FluidParams) -> Result<EnergyParts> {
    let grid = state.grid();
    let phi = checked_samples(&state.phi, 1.0, true)?;
    let [ux, uy] = state.u.backward_transform();
    let [gx, gy] = state.phi.gradient().backward_transform();
    let mut kinetic = 0.0;
    let mut free = 0.0;
    Zip::from(&phi)
        .and(&ux)
        .and(&uy)
        .and(&gx)
        .and(&gy)
        .for_each(|&s, &a, &b, &dx, &dy| {
            kinetic += 0.5 * p.density_at(s) * (a * a + b * b);
            free += 0.5 * (dx * dx + dy * dy) + p.psi(s);
        });
    let w = grid.cell_area();
    let (kinetic, free) = (kinetic * w, free * w);
    Ok(EnergyParts {
        total: kinetic + free,
        kinetic,
        free,
    })
}

/// Dissipation rates (∫ν(φ)|Du|², ∫|∇μ|²) using the state's μ.
pub fn dissipation(state: &FlowState, p: &FluidParams) -> Result<(f64, f64)> {
    let phi = checked_samples(&state.phi, 1.0, false)?;
    let d = state.u.symmetric_gradient();
    let [[dxx, dxy], [_, dyy]] = &d;
    let (dxx, dxy, dyy) = (
        dxx.backward_transform(),
        dxy.backward_transform(),
        dyy.backward_transform(),
    );
    let mut acc = 0.0;
    Zip::from(&phi)
        .and(&dxx)
        .and(&dxy)
        .and(&dyy)
        .for_each(|&s, &a, &b, &c| acc += p.viscosity_at(s) * (a * a + 2.0 * b * b + c * c));
    let d_visc = acc * state.grid().cell_area();
    Ok((d_visc, state.mu.gradient_norm_sq()))
}
