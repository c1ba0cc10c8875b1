//! Monitored functionals and identity residuals, one record per output step.

use ndarray::Zip;

use crate::error::Result;
use crate::model::{checked_samples, dissipation, total_energy, FlowState, FluidParams};
use crate::spectral::{SpectralField, SpectralVectorField};

/// CSV column order of [`DiagnosticsRecord::csv_row`].
pub const CSV_HEADER: &str = "step,t,E_total,E_kin,E_free,D_visc,D_mu,mass_phi,mom_x,mom_y,max_abs_phi,\
H1_u,H1_mu,H2_phi,H3_phi,H3_mu,L2_P,H_func,X_func,energy_residual,ratio_phiH2,ratio_muH1,newton_iters,pcg_iters";

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolverCounters {
    pub newton_iters: usize,
    pub pcg_iters: usize,
    /// Largest `|φ|` over all Newton iterates of the step (not written to CSV).
    pub newton_max_abs_phi: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    pub step: u64,
    pub t: f64,
    pub e_total: f64,
    pub e_kin: f64,
    pub e_free: f64,
    pub d_visc: f64,
    pub d_mu: f64,
    pub mass_phi: f64,
    /// ∫ρ(φ)u
    pub momentum: [f64; 2],
    pub max_abs_phi: f64,
    pub h1_u: f64,
    pub h1_mu: f64,
    pub h2_phi: f64,
    pub h3_phi: f64,
    pub h3_mu: f64,
    pub l2_p: f64,
    pub h_func: f64,
    pub x_func: f64,
    /// `E − E_prev + Δt (D_visc + D_mu)`; absent on the first record.
    pub energy_residual: Option<f64>,
    pub ratio_phi_h2: f64,
    pub ratio_mu_h1: f64,
    pub counters: SolverCounters,
}

impl DiagnosticsRecord {
    pub fn csv_row(&self) -> String {
        let floats = [
            self.e_total,
            self.e_kin,
            self.e_free,
            self.d_visc,
            self.d_mu,
            self.mass_phi,
            self.momentum[0],
            self.momentum[1],
            self.max_abs_phi,
            self.h1_u,
            self.h1_mu,
            self.h2_phi,
            self.h3_phi,
            self.h3_mu,
            self.l2_p,
            self.h_func,
            self.x_func,
        ];
        let mut row = format!("{},{:.16e}", self.step, self.t);
        for v in floats {
            row.push_str(&format!(",{v:.16e}"));
        }
        match self.energy_residual {
            Some(r) => row.push_str(&format!(",{r:.16e}")),
            None => row.push(','),
        }
        row.push_str(&format!(
            ",{:.16e},{:.16e},{},{}",
            self.ratio_phi_h2, self.ratio_mu_h1, self.counters.newton_iters, self.counters.pcg_iters
        ));
        row
    }
}

/// Evaluate every monitored quantity at `state`. `prev` supplies the energy
/// of the previous record for the energy-law residual.
pub fn record(
    step: u64,
    state: &FlowState,
    prev: Option<&DiagnosticsRecord>,
    p: &FluidParams,
    counters: SolverCounters,
) -> Result<DiagnosticsRecord> {
    let energy = total_energy(state, p)?;
    let (d_visc, d_mu) = dissipation(state, p)?;
    let parts = functional_parts(state, p)?;
    let (ratio_phi_h2, ratio_mu_h1) = estimate_ratios(state);
    let energy_residual = prev.map(|r| energy.total - r.e_total + (state.time - r.t) * (d_visc + d_mu));
    Ok(DiagnosticsRecord {
        step,
        t: state.time,
        e_total: energy.total,
        e_kin: energy.kinetic,
        e_free: energy.free,
        d_visc,
        d_mu,
        mass_phi: state.phi.mean(),
        momentum: momentum(state, p)?,
        max_abs_phi: state.max_abs_phi(),
        h1_u: state.u.sobolev_norm(1),
        h1_mu: state.mu.sobolev_norm(1),
        h2_phi: state.phi.sobolev_norm(2),
        h3_phi: state.phi.sobolev_norm(3),
        h3_mu: state.mu.sobolev_norm(3),
        l2_p: state.pressure.l2_norm(),
        h_func: parts.viscous / 2.0 + parts.x(),
        x_func: parts.x(),
        energy_residual,
        ratio_phi_h2,
        ratio_mu_h1,
        counters,
    })
}

/// ∫ρ(φ)u by grid quadrature.
pub fn momentum(state: &FlowState, p: &FluidParams) -> Result<[f64; 2]> {
    let phi = checked_samples(&state.phi, 1.0, false)?;
    let [ux, uy] = state.u.backward_transform();
    let mut m = [0.0; 2];
    Zip::from(&phi).and(&ux).and(&uy).for_each(|&s, &a, &b| {
        let r = p.density_at(s);
        m[0] += r * a;
        m[1] += r * b;
    });
    let w = state.grid().cell_area();
    Ok([m[0] * w, m[1] * w])
}

/// ∫f(u·∇g) by grid quadrature; exact for band-limited factors below the
/// dealiasing cutoff.
pub fn transport_pairing(f: &SpectralField, u: &SpectralVectorField, g: &SpectralField) -> f64 {
    let fs = f.backward_transform();
    let [ux, uy] = u.backward_transform();
    let [gx, gy] = g.gradient().backward_transform();
    let mut acc = 0.0;
    Zip::from(&fs)
        .and(&ux)
        .and(&uy)
        .and(&gx)
        .and(&gy)
        .for_each(|&v, &a, &b, &dx, &dy| acc += v * (a * dx + b * dy));
    acc * f.grid().cell_area()
}

struct FunctionalParts {
    viscous: f64,
    grad_mu: f64,
    coupling: f64,
}

impl FunctionalParts {
    fn x(&self) -> f64 {
        self.grad_mu / 2.0 + self.coupling
    }
}

fn functional_parts(state: &FlowState, p: &FluidParams) -> Result<FunctionalParts> {
    let (viscous, grad_mu) = dissipation(state, p)?;
    Ok(FunctionalParts {
        viscous,
        grad_mu,
        coupling: transport_pairing(&state.mu, &state.u, &state.phi),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HFunctional {
    /// ½∫ν|Du|² + ½∫|∇μ|² + ∫μ(u·∇φ)
    pub value: f64,
    /// ¼∫|∇μ|² + ¼∫ν|Du|²
    pub lower_surrogate: f64,
}

pub fn h_functional(state: &FlowState, p: &FluidParams) -> Result<HFunctional> {
    let parts = functional_parts(state, p)?;
    Ok(HFunctional {
        value: parts.viscous / 2.0 + parts.x(),
        lower_surrogate: (parts.grad_mu + parts.viscous) / 4.0,
    })
}

/// ½∫|∇μ|² + ∫μ(u·∇φ). Reported beside ¼‖∇μ‖²; the offset between the two
/// is left to inspection.
pub fn x_functional(state: &FlowState, p: &FluidParams) -> Result<f64> {
    Ok(functional_parts(state, p)?.x())
}

/// (‖φ‖_{H²}/(1+‖∇μ‖^{1/2}), ‖μ‖_{H¹}/(1+‖∇μ‖)).
pub fn estimate_ratios(state: &FlowState) -> (f64, f64) {
    let g = state.mu.gradient_norm_sq().sqrt();
    (
        state.phi.sobolev_norm(2) / (1.0 + g.sqrt()),
        state.mu.sobolev_norm(1) / (1.0 + g),
    )
}

/// ‖u_a − u_b‖²_{L²} + ‖φ_a − φ_b‖²_{H¹}.
pub fn continuous_dependence_metric(a: &FlowState, b: &FlowState) -> Result<f64> {
    a.phi.check_grid(&b.phi)?;
    let du = &a.u - &b.u;
    let dphi = &a.phi - &b.phi;
    Ok(du.l2_norm().powi(2) + dphi.sobolev_norm_sq(1))
}
