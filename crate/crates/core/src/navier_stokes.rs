//! Momentum step for the non-conservative variable-density form
//!
//! ```text
//! ρ(φ)(∂ₜu + (u·∇)u) − ρ'(∇μ·∇)u − div(ν(φ)Du) + ∇P = μ∇φ
//! ```
//!
//! advanced by a pressure-correction (projection) method. The elliptic
//! problem `div((1/ρ)∇P) = f` is solved by PCG with the constant-coefficient
//! spectral inverse as preconditioner.

use std::str::FromStr;

use ndarray::{Array2, Zip};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::krylov::pcg;
use crate::model::{checked_samples, FluidParams};
use crate::spectral::{Grid, SpectralField, SpectralVectorField};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViscousMode {
    Explicit,
    /// Constant-coefficient implicit part, variable remainder explicit.
    SemiImplicit,
}

impl FromStr for ViscousMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "explicit" => Ok(Self::Explicit),
            "semi_implicit" => Ok(Self::SemiImplicit),
            other => Err(Error::Config(format!(
                "unknown viscous mode '{other}' (expected explicit or semi_implicit)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NSStepConfig {
    pub dt: f64,
    pub viscous_mode: ViscousMode,
    /// Absolute L² tolerance of the projection solve; bounds the
    /// divergence of the returned velocity.
    pub pressure_tol: f64,
    pub pressure_max_iter: usize,
    /// Keep only velocity modes with `|k|²` up to the m-th distinct Stokes
    /// eigenvalue (plus the mean).
    pub galerkin_m: Option<usize>,
    /// Include the `ρ'(∇μ·∇)u` term. It vanishes for matched densities.
    pub flux_correction: bool,
}

impl NSStepConfig {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            viscous_mode: ViscousMode::SemiImplicit,
            pressure_tol: 1e-11,
            pressure_max_iter: 500,
            galerkin_m: None,
            flux_correction: true,
        }
    }

    pub fn with_dt(self, dt: f64) -> Self {
        Self { dt, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("ns.dt must be positive, got {}", self.dt)));
        }
        if !(self.pressure_tol > 0.0) {
            return Err(Error::Config("ns.pressure_tol must be positive".into()));
        }
        if self.pressure_max_iter == 0 {
            return Err(Error::Config("ns.pressure_max_iter must be at least 1".into()));
        }
        if self.galerkin_m == Some(0) {
            return Err(Error::Config("ns.galerkin_m must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PressureReport {
    pub iterations: usize,
    pub residual: f64,
}

/// The operator `p ↦ div(P_M[(1/ρ)∇p])` on dealiased zero-mean fields, with
/// `P_M` the 2/3-rule projection. Symmetric negative definite there.
pub struct VariableDensityLaplacian {
    grid: Grid,
    inv_rho: Array2<f64>,
    rho_mean: f64,
}

impl VariableDensityLaplacian {
    pub fn new(rho: &SpectralField) -> Result<Self> {
        Self::from_samples(rho.grid(), &rho.backward_transform())
    }

    pub fn from_samples(grid: &Grid, rho: &Array2<f64>) -> Result<Self> {
        if let Some(bad) = rho.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::Precondition(format!("density sample {bad} is not positive")));
        }
        Ok(Self {
            grid: grid.clone(),
            inv_rho: rho.mapv(|r| 1.0 / r),
            rho_mean: rho.mean().unwrap_or(1.0),
        })
    }

    /// `P_M[(1/ρ)∇p]`.
    pub fn weighted_gradient(&self, p: &SpectralField) -> SpectralVectorField {
        let [gx, gy] = p.gradient().backward_transform();
        SpectralVectorField {
            x: SpectralField::from_samples_dealiased(&(&self.inv_rho * &gx), &self.grid),
            y: SpectralField::from_samples_dealiased(&(&self.inv_rho * &gy), &self.grid),
        }
    }

    pub fn apply(&self, p: &SpectralField) -> SpectralField {
        self.weighted_gradient(p).divergence()
    }

    /// Solve `apply(p) = rhs` with `mean(p) = 0`.
    pub fn solve(&self, rhs: &SpectralField, tol: f64, max_iter: usize) -> Result<(SpectralField, PressureReport)> {
        if rhs.mean().abs() > 1e-13 {
            return Err(Error::Precondition(format!(
                "pressure right-hand side has mean {:e}; the operator's range excludes constants",
                rhs.mean()
            )));
        }
        let mut target = rhs.dealias().scale(-1.0);
        target.coeffs_mut()[[0, 0]] = Complex64::default();
        let rho_mean = self.rho_mean;
        let negated = |v: &SpectralField| {
            let mut out = self.apply(v).scale(-1.0);
            out.coeffs_mut()[[0, 0]] = Complex64::default();
            out
        };
        let precondition = |v: &SpectralField| {
            v.map_real_multiplier(|kx, ky| {
                let k2 = (kx * kx + ky * ky) as f64;
                if k2 == 0.0 {
                    0.0
                } else {
                    rho_mean / k2
                }
            })
        };
        let (mut p, outcome) = pcg(negated, precondition, &target, SpectralField::zeros(&self.grid), tol, max_iter);
        p.coeffs_mut()[[0, 0]] = Complex64::default();
        let residual = (&self.apply(&p) - rhs).l2_norm();
        let report = PressureReport {
            iterations: outcome.iterations,
            residual,
        };
        if residual > tol {
            return Err(Error::PressureSolve {
                residual,
                iterations: outcome.iterations,
            });
        }
        Ok((p, report))
    }
}

/// Solve `div((1/ρ)∇P) = rhs_div` for zero-mean `P`.
pub fn pressure_solve(
    rhs_div: &SpectralField,
    rho: &SpectralField,
    cfg: &NSStepConfig,
) -> Result<(SpectralField, PressureReport)> {
    rhs_div.check_grid(rho)?;
    VariableDensityLaplacian::new(rho)?.solve(rhs_div, cfg.pressure_tol, cfg.pressure_max_iter)
}

/// m-th distinct positive value of `kx² + ky²` over the integer lattice.
pub fn stokes_eigenvalue(m: usize) -> u64 {
    assert!(m >= 1);
    let mut limit = 2 * m as u64 + 8;
    loop {
        let r = (limit as f64).sqrt() as u64 + 1;
        let mut values: Vec<u64> = (0..=r)
            .flat_map(|a| (0..=r).map(move |b| a * a + b * b))
            .filter(|&v| v > 0 && v <= limit)
            .collect();
        values.sort_unstable();
        values.dedup();
        if values.len() >= m {
            return values[m - 1];
        }
        limit *= 2;
    }
}

/// Projection onto the span of the constant and the Stokes eigenmodes with
/// eigenvalue at most the m-th distinct one.
pub fn galerkin_truncate(u: &SpectralVectorField, m: usize) -> SpectralVectorField {
    let cutoff = stokes_eigenvalue(m) as i64;
    u.map(|c| {
        c.map_real_multiplier(|kx, ky| if kx * kx + ky * ky <= cutoff { 1.0 } else { 0.0 })
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct NSStepOutput {
    pub u: SpectralVectorField,
    pub pressure: SpectralField,
    pub pcg_iters: usize,
}

fn check_cfl(u_samples: &[Array2<f64>; 2], grid: &Grid, p: &FluidParams, cfg: &NSStepConfig) -> Result<()> {
    let h = grid.spacing();
    let umax = Zip::from(&u_samples[0])
        .and(&u_samples[1])
        .fold(0.0f64, |m, a, b| m.max((a * a + b * b).sqrt()));
    if umax > 0.0 && cfg.dt > 0.5 * h / umax {
        return Err(Error::Cfl(format!(
            "dt = {} exceeds 0.5 h / max|u| = {}",
            cfg.dt,
            0.5 * h / umax
        )));
    }
    if cfg.viscous_mode == ViscousMode::Explicit {
        let limit = 0.25 * h * h * p.rho_min() / p.nu_max();
        if cfg.dt > limit {
            return Err(Error::Cfl(format!(
                "dt = {} exceeds the explicit viscous limit {limit}",
                cfg.dt
            )));
        }
    }
    Ok(())
}

/// One momentum step: explicit convection, capillary and flux terms, explicit
/// or semi-implicit viscosity, then variable-density projection. `phi_next`
/// and `mu_next` come from the preceding Cahn–Hilliard step.
pub fn ns_step(
    u_n: &SpectralVectorField,
    phi_next: &SpectralField,
    mu_next: &SpectralField,
    p: &FluidParams,
    cfg: &NSStepConfig,
) -> Result<NSStepOutput> {
    cfg.validate()?;
    u_n.x.check_grid(phi_next)?;
    mu_next.check_grid(phi_next)?;
    let grid = phi_next.grid().clone();
    let dt = cfg.dt;

    let phi = checked_samples(phi_next, 1.0, true)?;
    let u = u_n.backward_transform();
    check_cfl(&u, &grid, p, cfg)?;
    let rho = phi.mapv(|s| p.density_at(s));
    let nu = phi.mapv(|s| p.viscosity_at(s));
    let inv_rho = rho.mapv(|r| 1.0 / r);

    let grad_u = u_n.gradient().map(|row| row.map(|c| c.backward_transform()));
    let [phi_x, phi_y] = phi_next.gradient().backward_transform();
    let mu = mu_next.backward_transform();

    // div(ν D uⁿ), row by row of the stress
    let d = u_n.symmetric_gradient();
    let stress = |i: usize, j: usize| SpectralField::from_samples_dealiased(&(&nu * &d[i][j].backward_transform()), &grid);
    let (sxx, sxy, syy) = (stress(0, 0), stress(0, 1), stress(1, 1));
    let visc = [
        (&sxx.partial(0) + &sxy.partial(1)).backward_transform(),
        (&sxy.partial(0) + &syy.partial(1)).backward_transform(),
    ];

    let slope = p.density_slope();
    let grad_mu = if cfg.flux_correction && slope != 0.0 {
        Some(mu_next.gradient().backward_transform())
    } else {
        None
    };

    let force = [&mu * &phi_x, &mu * &phi_y];
    let mut star = Vec::with_capacity(2);
    for i in 0..2 {
        let g = &grad_u[i];
        // (uⁿ·∇)uⁿ_i
        let mut rate = Zip::from(&u[0])
            .and(&u[1])
            .and(&g[0])
            .and(&g[1])
            .map_collect(|&a, &b, &gx, &gy| -(a * gx + b * gy));
        let mut body = &visc[i] + &force[i];
        if let Some([mx, my]) = &grad_mu {
            Zip::from(&mut body)
                .and(mx)
                .and(my)
                .and(&g[0])
                .and(&g[1])
                .for_each(|f, &a, &b, &gx, &gy| *f += slope * (a * gx + b * gy));
        }
        Zip::from(&mut rate)
            .and(&body)
            .and(&inv_rho)
            .for_each(|r, &f, &w| *r += f * w);
        let increment = SpectralField::from_samples_dealiased(&rate, &grid);
        let mut ui = u_n.component(i).dealias();
        ui.axpy(dt, &increment);
        star.push(ui);
    }
    let mut u_star = SpectralVectorField {
        y: star.pop().expect("two components"),
        x: star.pop().expect("two components"),
    };

    if cfg.viscous_mode == ViscousMode::SemiImplicit {
        // κ bounds ν(φ)/(2ρ(φ)) from above, so the explicit remainder is dominated
        let kappa = 0.5 * p.nu_max() / p.rho_min();
        let u_old = u_n.dealias();
        u_star = SpectralVectorField {
            x: implicit_viscous_solve(&u_star.x, &u_old.x, kappa, dt),
            y: implicit_viscous_solve(&u_star.y, &u_old.y, kappa, dt),
        };
    }

    let operator = VariableDensityLaplacian::from_samples(&grid, &rho)?;
    let (phi_p, report) = operator.solve(&u_star.divergence(), cfg.pressure_tol, cfg.pressure_max_iter)?;
    let mut u_next = &u_star - &operator.weighted_gradient(&phi_p);
    if let Some(m) = cfg.galerkin_m {
        u_next = galerkin_truncate(&u_next, m);
    }
    Ok(NSStepOutput {
        u: u_next,
        pressure: phi_p.scale(1.0 / dt),
        pcg_iters: report.iterations,
    })
}

/// `(1 − dt κ Δ) u = u_explicit − dt κ Δ u_old`, diagonal in Fourier space.
fn implicit_viscous_solve(explicit: &SpectralField, old: &SpectralField, kappa: f64, dt: f64) -> SpectralField {
    let ks = explicit.grid().wavenumbers();
    let mut out = explicit.clone();
    Zip::indexed(out.coeffs_mut())
        .and(old.coeffs())
        .for_each(|(a, b), c, o| {
            let k2 = (ks[a] * ks[a] + ks[b] * ks[b]) as f64;
            *c = (*c + o * (dt * kappa * k2)) / (1.0 + dt * kappa * k2);
        });
    out
}
