//! Convex-splitting time step for the convective Cahn–Hilliard equation.
//!
//! One step solves, for `φ = φⁿ⁺¹`,
//!
//! ```text
//! (φ − φⁿ)/dt + div(uⁿφⁿ) = Δμ,    μ = −Δφ + F'(φ) − θ₀φⁿ
//! ```
//!
//! The singular convex part `F'` and the interface term are implicit; the
//! concave term and transport are explicit. The nonlinear system is solved
//! by damped Newton, with each linearized system reduced to a symmetric
//! positive definite problem on zero-mean fields and handed to PCG.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::krylov::pcg;
use crate::model::{checked_samples, convex_derivative, convex_second_derivative, FluidParams};
use crate::spectral::{SpectralField, SpectralVectorField};

/// Newton iterates must keep every sample inside `(−1 + margin, 1 − margin)`.
pub const INTERIOR_MARGIN: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CHStepConfig {
    pub dt: f64,
    /// Absolute L² tolerance on the Newton residual.
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Halvings allowed per Newton iteration.
    pub max_backtrack: usize,
    /// Relative tolerance of the inner PCG solve.
    pub linsolve_tol: f64,
    pub max_linear_iter: usize,
}

impl CHStepConfig {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            newton_tol: 1e-10,
            max_newton: 50,
            max_backtrack: 40,
            linsolve_tol: 1e-12,
            max_linear_iter: 1000,
        }
    }

    pub fn with_dt(self, dt: f64) -> Self {
        Self { dt, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("ch.{name} must be positive, got {v}")))
            }
        };
        positive("dt", self.dt)?;
        positive("newton_tol", self.newton_tol)?;
        positive("linsolve_tol", self.linsolve_tol)?;
        if self.max_newton == 0 || self.max_linear_iter == 0 {
            return Err(Error::Config("ch iteration caps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CHStepReport {
    pub newton_iters: usize,
    pub final_residual: f64,
    pub backtracks: usize,
    pub linear_iters: usize,
    /// Residual norm before each Newton update, plus the final one.
    pub residual_history: Vec<f64>,
    /// Largest `|φ|` over all accepted iterates.
    pub max_abs_phi: f64,
}

/// `div(uφ)`, dealiased; its mean is exactly zero.
pub fn transport_term(phi: &SpectralField, u: &SpectralVectorField) -> SpectralField {
    let grid = phi.grid();
    let s = phi.backward_transform();
    let [ux, uy] = u.backward_transform();
    let fx = SpectralField::from_samples_dealiased(&(&ux * &s), grid);
    let fy = SpectralField::from_samples_dealiased(&(&uy * &s), grid);
    SpectralVectorField { x: fx, y: fy }.divergence()
}

/// Nonlinear system of one step, with the explicit data frozen.
pub struct CahnHilliardSystem<'a> {
    phi_n: &'a SpectralField,
    transport: &'a SpectralField,
    p: &'a FluidParams,
    dt: f64,
}

impl<'a> CahnHilliardSystem<'a> {
    pub fn new(
        phi_n: &'a SpectralField,
        transport: &'a SpectralField,
        p: &'a FluidParams,
        dt: f64,
    ) -> Self {
        Self {
            phi_n,
            transport,
            p,
            dt,
        }
    }

    /// μ = −Δφ + P[F'(φ)] − θ₀φⁿ from samples of φ.
    fn chemical_potential_from(&self, phi: &SpectralField, samples: &Array2<f64>) -> SpectralField {
        let theta = self.p.theta;
        let df = samples.mapv(|s| convex_derivative(s, theta));
        let mut mu = SpectralField::from_samples_dealiased(&df, phi.grid());
        mu.axpy(-1.0, &phi.laplacian());
        mu.axpy(-self.p.theta0, self.phi_n);
        mu
    }

    pub fn chemical_potential(&self, phi: &SpectralField) -> SpectralField {
        self.chemical_potential_from(phi, &phi.backward_transform())
    }

    fn residual_from(&self, phi: &SpectralField, samples: &Array2<f64>) -> SpectralField {
        let mu = self.chemical_potential_from(phi, samples);
        let mut r = phi - self.phi_n;
        r.axpy(self.dt, self.transport);
        r.axpy(-self.dt, &mu.laplacian());
        r
    }

    /// `R(φ) = φ − φⁿ + dt·div(uⁿφⁿ) − dt·Δμ(φ)`.
    pub fn residual(&self, phi: &SpectralField) -> SpectralField {
        self.residual_from(phi, &phi.backward_transform())
    }

    /// `J v = v + dt Δ²v − dt Δ P[F''(φ) v]`.
    pub fn jacobian_action(&self, phi: &SpectralField, v: &SpectralField) -> SpectralField {
        let theta = self.p.theta;
        let d2f = phi.backward_transform().mapv(|s| convex_second_derivative(s, theta));
        let weighted = SpectralField::from_samples_dealiased(&(&d2f * &v.backward_transform()), v.grid());
        let mut out = v.clone();
        out.axpy(self.dt, &v.bilaplacian());
        out.axpy(-self.dt, &weighted.laplacian());
        out
    }

    /// Solve `J δ = −r`. The mean of δ is fixed exactly by the k = 0 row; the
    /// rest is the SPD problem `(−Δ)⁻¹J` on zero-mean fields.
    fn newton_direction(
        &self,
        r: &SpectralField,
        d2f: &Array2<f64>,
        rel_tol: f64,
        max_iter: usize,
    ) -> (SpectralField, usize, bool) {
        let grid = r.grid().clone();
        let dt = self.dt;
        let gamma = d2f.iter().fold(0.0f64, |m, v| m.max(*v));
        let mean_shift = -r.mean();

        let inv_k2 = |kx: i64, ky: i64| {
            let k2 = (kx * kx + ky * ky) as f64;
            if k2 == 0.0 {
                0.0
            } else {
                1.0 / k2
            }
        };
        let weight_hat = SpectralField::from_samples_dealiased(d2f, &grid);
        let mut rhs = r.map_real_multiplier(|kx, ky| -inv_k2(kx, ky));
        rhs.axpy(-dt * mean_shift, &weight_hat);
        rhs.coeffs_mut()[[0, 0]] = Complex64::default();

        let apply = |v: &SpectralField| {
            let weighted = SpectralField::from_samples_dealiased(&(d2f * &v.backward_transform()), &grid);
            let mut out = v.map_real_multiplier(|kx, ky| inv_k2(kx, ky) + dt * (kx * kx + ky * ky) as f64);
            out.axpy(dt, &weighted);
            out.coeffs_mut()[[0, 0]] = Complex64::default();
            out
        };
        let precondition = |v: &SpectralField| {
            v.map_real_multiplier(|kx, ky| {
                let k2 = (kx * kx + ky * ky) as f64;
                if k2 == 0.0 {
                    0.0
                } else {
                    1.0 / (1.0 / k2 + dt * k2 + dt * gamma)
                }
            })
        };
        let tol = rel_tol * rhs.l2_norm();
        let (mut delta, outcome) = pcg(apply, precondition, &rhs, SpectralField::zeros(&grid), tol, max_iter);
        delta.coeffs_mut()[[0, 0]] = Complex64::new(mean_shift, 0.0);
        (delta, outcome.iterations, outcome.converged)
    }
}

fn within_interior(samples: &Array2<f64>) -> bool {
    samples.iter().all(|s| s.abs() < 1.0 - INTERIOR_MARGIN)
}

/// Damped Newton iteration for one step starting from `phi_guess`.
pub fn newton_solve(
    phi_guess: &SpectralField,
    phi_n: &SpectralField,
    transport: &SpectralField,
    p: &FluidParams,
    cfg: &CHStepConfig,
) -> Result<(SpectralField, CHStepReport)> {
    cfg.validate()?;
    phi_guess.check_grid(phi_n)?;
    phi_guess.check_grid(transport)?;
    let system = CahnHilliardSystem::new(phi_n, transport, p, cfg.dt);

    let mut phi = phi_guess.clone();
    let mut samples = checked_samples(&phi, 1.0 - INTERIOR_MARGIN, true)?;
    let mut r = system.residual_from(&phi, &samples);
    let mut res = r.l2_norm();
    let mut report = CHStepReport {
        residual_history: vec![res],
        max_abs_phi: samples.iter().fold(0.0, |m: f64, v| m.max(v.abs())),
        ..Default::default()
    };

    loop {
        if res <= cfg.newton_tol {
            report.final_residual = res;
            return Ok((phi, report));
        }
        if !res.is_finite() || report.newton_iters >= cfg.max_newton {
            report.final_residual = res;
            return Err(Error::CahnHilliard {
                reason: format!(
                    "Newton did not converge in {} iterations (residual {res:e})",
                    report.newton_iters
                ),
                report: Box::new(report),
            });
        }
        let d2f = samples.mapv(|s| convex_second_derivative(s, p.theta));
        let (delta, lin_iters, _) =
            system.newton_direction(&r, &d2f, cfg.linsolve_tol, cfg.max_linear_iter);
        report.linear_iters += lin_iters;
        report.newton_iters += 1;

        let mut step = 1.0;
        let mut halvings = 0;
        loop {
            let mut trial = phi.clone();
            trial.axpy(step, &delta);
            let trial_samples = trial.backward_transform();
            if within_interior(&trial_samples) {
                let trial_r = system.residual_from(&trial, &trial_samples);
                let trial_res = trial_r.l2_norm();
                if trial_res < res || trial_res <= cfg.newton_tol {
                    phi = trial;
                    samples = trial_samples;
                    r = trial_r;
                    res = trial_res;
                    break;
                }
            }
            if halvings >= cfg.max_backtrack {
                report.final_residual = res;
                return Err(Error::CahnHilliard {
                    reason: format!(
                        "damping exhausted after {halvings} halvings at Newton iteration {}",
                        report.newton_iters
                    ),
                    report: Box::new(report),
                });
            }
            step *= 0.5;
            halvings += 1;
            report.backtracks += 1;
        }
        report.residual_history.push(res);
        report.max_abs_phi = samples
            .iter()
            .fold(report.max_abs_phi, |m, v| m.max(v.abs()));
    }
}

/// One convex-splitting step. Returns `(φⁿ⁺¹, μⁿ⁺¹, report)`, where μ is the
/// scheme's chemical potential `−Δφⁿ⁺¹ + F'(φⁿ⁺¹) − θ₀φⁿ`.
pub fn ch_step(
    phi_n: &SpectralField,
    u_n: &SpectralVectorField,
    p: &FluidParams,
    cfg: &CHStepConfig,
) -> Result<(SpectralField, SpectralField, CHStepReport)> {
    phi_n.check_grid(&u_n.x)?;
    checked_samples(phi_n, 1.0, true)?;
    let transport = transport_term(phi_n, u_n);
    let (phi, report) = newton_solve(phi_n, phi_n, &transport, p, cfg)?;
    let mu = CahnHilliardSystem::new(phi_n, &transport, p, cfg.dt).chemical_potential(&phi);
    Ok((phi, mu, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{total_energy, FlowState};
    use crate::spectral::{random_band_limited, Grid};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(theta: f64, theta0: f64) -> FluidParams {
        FluidParams::new(1.0, 2.0, 1.0, 1.0, theta, theta0).unwrap()
    }

    fn spinodal(g: &Grid, mean: f64, amp: f64, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = random_band_limited(g, g.dealias_cutoff(), &mut rng);
        f.coeffs_mut()[[0, 0]] = Complex64::default();
        let mut f = f.scale(amp / f.max_abs_sample());
        f.coeffs_mut()[[0, 0]] = Complex64::new(mean, 0.0);
        f
    }

    fn free_energy(phi: &SpectralField, p: &FluidParams) -> f64 {
        let s = FlowState::new(0.0, SpectralVectorField::zeros(phi.grid()), phi.clone(), p).unwrap();
        total_energy(&s, p).unwrap().free
    }

    #[test]
    fn constant_state_is_an_equilibrium() {
        let g = Grid::new(16).unwrap();
        let p = params(1.0, 2.0);
        let c = 0.3;
        let phi = SpectralField::constant(&g, c);
        let (next, mu, report) =
            ch_step(&phi, &SpectralVectorField::zeros(&g), &p, &CHStepConfig::new(0.01)).unwrap();
        assert_eq!(report.newton_iters, 0);
        assert_eq!(next, phi);
        assert!((mu.mean() - p.dpsi(c)).abs() < 1e-15);
    }

    #[test]
    fn zero_residual_guess_returns_immediately() {
        let g = Grid::new(16).unwrap();
        let p = params(1.0, 2.0);
        let phi = SpectralField::constant(&g, -0.2);
        let t = SpectralField::zeros(&g);
        let (out, report) = newton_solve(&phi, &phi, &t, &p, &CHStepConfig::new(0.1)).unwrap();
        assert_eq!(out, phi);
        assert_eq!(report.newton_iters, 0);
    }

    #[test]
    fn single_mode_amplification_matches_linearized_factor() {
        let g = Grid::new(16).unwrap();
        let p = params(1.0, 3.0);
        let dt = 0.05;
        let eps = 1e-8;
        let cfg = CHStepConfig {
            newton_tol: 1e-20,
            ..CHStepConfig::new(dt)
        };
        let phi = SpectralField::from_fn(&g, |x, _| eps * x.cos());
        let (next, _, _) = ch_step(&phi, &SpectralVectorField::zeros(&g), &p, &cfg).unwrap();
        let measured = next.coeff(1, 0).re / phi.coeff(1, 0).re;
        // implicit |k|⁴ and θ|k|², explicit θ₀|k|², with |k|² = 1
        let factor = (1.0 + dt * p.theta0) / (1.0 + dt + dt * p.theta);
        assert!(((measured - factor) / factor).abs() <= 1e-4, "{measured} vs {factor}");
        assert!(measured > 1.0);
    }

    #[test]
    fn jacobian_matches_finite_difference_of_residual() {
        let g = Grid::new(32).unwrap();
        let p = params(1.0, 2.0);
        let phi_n = spinodal(&g, 0.1, 0.6, 3);
        let transport = SpectralField::zeros(&g);
        let system = CahnHilliardSystem::new(&phi_n, &transport, &p, 0.01);
        let phi = spinodal(&g, 0.1, 0.5, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..3 {
            let mut v = random_band_limited(&g, 6, &mut rng);
            v = v.scale(1.0 / v.l2_norm());
            let h = 1e-6;
            let mut plus = phi.clone();
            plus.axpy(h, &v);
            let mut minus = phi.clone();
            minus.axpy(-h, &v);
            let fd = (&system.residual(&plus) - &system.residual(&minus)).scale(0.5 / h);
            let jv = system.jacobian_action(&phi, &v);
            let rel = (&fd - &jv).l2_norm() / jv.l2_norm();
            assert!(rel <= 1e-5, "relative mismatch {rel}");
        }
    }

    #[test]
    fn newton_converges_quadratically_on_a_spinodal_state() {
        let g = Grid::new(32).unwrap();
        let p = params(1.0, 3.0);
        let phi = spinodal(&g, 0.0, 0.9, 6);
        let cfg = CHStepConfig {
            newton_tol: 1e-13,
            ..CHStepConfig::new(0.05)
        };
        let (_, _, report) = ch_step(&phi, &SpectralVectorField::zeros(&g), &p, &cfg).unwrap();
        let r = &report.residual_history;
        let mut slopes = Vec::new();
        for w in r.windows(3) {
            if w[1] < 1e-3 && w[2] > 1e-14 {
                slopes.push((w[2].ln() - w[1].ln()) / (w[1].ln() - w[0].ln()));
            }
        }
        assert!(!slopes.is_empty(), "history {r:?}");
        for s in slopes {
            assert!(s >= 1.8, "slope {s}, history {r:?}");
        }
    }

    #[test]
    fn mass_is_conserved_exactly_with_transport() {
        let g = Grid::new(32).unwrap();
        let p = params(1.0, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = SpectralVectorField::new(random_band_limited(&g, 3, &mut rng), random_band_limited(&g, 3, &mut rng))
            .unwrap()
            .leray_project()
            .scale(0.2);
        let mut phi = spinodal(&g, 0.2, 0.3, 8);
        let m0 = phi.mean();
        let cfg = CHStepConfig::new(1e-3);
        for _ in 0..100 {
            phi = ch_step(&phi, &u, &p, &cfg).unwrap().0;
            assert!((phi.mean() - m0).abs() <= 1e-12);
        }
    }

    #[test]
    fn free_energy_decreases_for_large_steps() {
        let g = Grid::new(32).unwrap();
        let p = params(1.0, 3.0);
        let mut phi = spinodal(&g, 0.0, 0.05, 9);
        let zero = SpectralVectorField::zeros(&g);
        let cfg = CHStepConfig::new(0.1);
        let mut e = free_energy(&phi, &p);
        for _ in 0..150 {
            let (next, _, report) = ch_step(&phi, &zero, &p, &cfg).unwrap();
            assert!(report.max_abs_phi <= 1.0 - INTERIOR_MARGIN);
            let e_next = free_energy(&next, &p);
            assert!(e_next <= e + 1e-12 * e.abs().max(1.0), "{e_next} > {e}");
            e = e_next;
            phi = next;
        }
        assert!(phi.max_abs_sample() > 0.5, "phase separation should have started");
    }

    #[test]
    fn rejects_states_on_the_barrier() {
        let g = Grid::new(16).unwrap();
        let p = params(1.0, 2.0);
        let phi = SpectralField::constant(&g, 1.0);
        assert!(matches!(
            ch_step(&phi, &SpectralVectorField::zeros(&g), &p, &CHStepConfig::new(0.1)),
            Err(Error::PhaseBound { .. })
        ));
        assert!(CHStepConfig::new(0.0).validate().is_err());
    }
}
