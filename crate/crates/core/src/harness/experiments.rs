//! Experiment suites built on [`Simulation`]. Independent trajectories are
//! advanced side by side on the rayon pool; they share only the read-only
//! configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use super::config::RunConfig;
use super::ic::state_from_fields;
use super::runner::Simulation;
use crate::diagnostics::continuous_dependence_metric;
use crate::error::{Error, Result};
use crate::model::{dissipation, total_energy};
use crate::navier_stokes::stokes_eigenvalue;
use crate::spectral::SpectralField;

/// Default configuration of each experiment on an n-grid.
pub mod presets {
    use super::super::config::{IcSpec, RunConfig};

    /// Unit density, ν = 0.1, to t = 1 with dt = 1e-3.
    pub fn taylor_green(n: usize) -> RunConfig {
        RunConfig::taylor_green(n, 1.0, 0.1, 1.0, 1e-3)
    }

    /// Bubble of density ratio 3 stirred by a Taylor–Green field of
    /// amplitude 0.5, to t = 0.2.
    pub fn galerkin(n: usize) -> RunConfig {
        let mut cfg = RunConfig::bubble(n, 0.2, 1e-3);
        if let IcSpec::Bubble { velocity, .. } = &mut cfg.ic {
            *velocity = 0.5;
        }
        cfg
    }

    /// Resting bubble of density ratio 3 to t = 0.5.
    pub fn perturb(n: usize) -> RunConfig {
        let mut cfg = RunConfig::bubble(n, 0.5, 1e-3);
        cfg.output.diagnostics_every = 10;
        cfg
    }

    /// Spinodal noise limited to |k|∞ ≤ 4, to t = 0.04 from dt = 4e-4.
    pub fn convergence_dt(n: usize, seed: u64) -> RunConfig {
        let mut cfg = RunConfig::spinodal(n, seed, 0.04, 4e-4);
        if let IcSpec::Spinodal { band, .. } = &mut cfg.ic {
            *band = Some(4);
        }
        cfg
    }
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn write_csv(path: &Path, header: &str, rows: impl IntoIterator<Item = String>) -> Result<()> {
    let mut text = String::new();
    writeln!(text, "{header}").expect("string write");
    for r in rows {
        writeln!(text, "{r}").expect("string write");
    }
    fs::write(path, text)?;
    Ok(())
}

fn step_all(sims: &mut [Simulation]) -> Result<()> {
    sims.par_iter_mut().map(|s| s.step_once().map(|_| ())).collect()
}

#[derive(Clone, Debug)]
pub struct TaylorGreenReport {
    pub expected_rate: f64,
    pub fitted_rate: f64,
    pub relative_error: f64,
    /// (t, E_kin)
    pub series: Vec<(f64, f64)>,
}

impl TaylorGreenReport {
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_csv(
            &dir.join("taylor_green.csv"),
            "expected_rate,fitted_rate,relative_error",
            [format!(
                "{:.16e},{:.16e},{:.16e}",
                self.expected_rate, self.fitted_rate, self.relative_error
            )],
        )?;
        write_csv(
            &dir.join("taylor_green_series.csv"),
            "t,E_kin",
            self.series.iter().map(|(t, e)| format!("{t:.16e},{e:.16e}")),
        )
    }
}

/// Decay of the Taylor–Green vortex in a matched, uniform fluid. The kinetic
/// energy of the (1,1) vortex decays like `exp(−2νt/ρ)`.
pub fn taylor_green(cfg: &RunConfig) -> Result<TaylorGreenReport> {
    let f = &cfg.fluid;
    if f.rho1 != f.rho2 || f.nu1 != f.nu2 {
        return Err(Error::Config("taylor_green needs matched densities and viscosities".into()));
    }
    let mut sim = Simulation::new(cfg)?;
    let mut series = vec![(0.0, total_energy(&sim.state, &sim.params)?.kinetic)];
    for _ in 0..cfg.steps() {
        sim.step_once()?;
        series.push((sim.state.time, total_energy(&sim.state, &sim.params)?.kinetic));
    }
    let t: Vec<f64> = series.iter().map(|s| s.0).collect();
    let log_e: Vec<f64> = series.iter().map(|s| s.1.ln()).collect();
    let fitted_rate = -linear_fit(&t, &log_e).0;
    let expected_rate = 2.0 * f.nu1 / f.rho1;
    Ok(TaylorGreenReport {
        expected_rate,
        fitted_rate,
        relative_error: (fitted_rate - expected_rate).abs() / expected_rate,
        series,
    })
}

#[derive(Clone, Debug)]
pub struct GalerkinReport {
    /// (m, λ_m, max over time of ‖u_m − u_full‖_{L²})
    pub rows: Vec<(usize, u64, f64)>,
}

impl GalerkinReport {
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_csv(
            &dir.join("galerkin.csv"),
            "m,lambda_m,max_l2_error",
            self.rows.iter().map(|(m, l, e)| format!("{m},{l},{e:.16e}")),
        )
    }

    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.2).collect()
    }
}

/// Compare velocity trajectories truncated to the first `m` Stokes
/// eigenvalues against the untruncated run.
pub fn galerkin(cfg: &RunConfig, cutoffs: &[usize]) -> Result<GalerkinReport> {
    if cutoffs.is_empty() {
        return Err(Error::Config("galerkin study needs at least one cutoff".into()));
    }
    let mut configs = vec![{
        let mut c = cfg.clone();
        c.ns.galerkin_m = None;
        c
    }];
    for &m in cutoffs {
        let mut c = cfg.clone();
        c.ns.galerkin_m = Some(m);
        configs.push(c);
    }
    let mut sims = configs.iter().map(Simulation::new).collect::<Result<Vec<_>>>()?;
    let mut worst = vec![0.0f64; cutoffs.len()];
    let mut measure = |sims: &[Simulation]| {
        for (w, s) in worst.iter_mut().zip(&sims[1..]) {
            *w = w.max((&s.state.u - &sims[0].state.u).l2_norm());
        }
    };
    measure(&sims);
    for _ in 0..cfg.steps() {
        step_all(&mut sims)?;
        measure(&sims);
    }
    Ok(GalerkinReport {
        rows: cutoffs
            .iter()
            .zip(worst)
            .map(|(&m, e)| (m, stokes_eigenvalue(m), e))
            .collect(),
    })
}

#[derive(Clone, Debug)]
pub struct PerturbReport {
    pub epsilons: Vec<f64>,
    pub times: Vec<f64>,
    /// `metrics[i][j]`: metric of the ε_i run against the base run at `times[j]`.
    pub metrics: Vec<Vec<f64>>,
    /// Envelope `C e^{Λt} ε²` bounding every trajectory.
    pub envelope_c: f64,
    pub envelope_lambda: f64,
}

impl PerturbReport {
    pub fn final_metrics(&self) -> Vec<f64> {
        self.metrics.iter().map(|m| *m.last().expect("nonempty")).collect()
    }

    pub fn envelope(&self, t: f64, eps: f64) -> f64 {
        self.envelope_c * (self.envelope_lambda * t).exp() * eps * eps
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_csv(
            &dir.join("perturb.csv"),
            "epsilon,final_metric,final_metric_over_eps2,envelope_C,envelope_Lambda",
            self.epsilons.iter().zip(self.final_metrics()).map(|(e, m)| {
                format!(
                    "{e:.16e},{m:.16e},{:.16e},{:.16e},{:.16e}",
                    m / (e * e),
                    self.envelope_c,
                    self.envelope_lambda
                )
            }),
        )?;
        let mut rows = Vec::new();
        for (i, e) in self.epsilons.iter().enumerate() {
            for (j, t) in self.times.iter().enumerate() {
                rows.push(format!("{e:.16e},{t:.16e},{:.16e}", self.metrics[i][j]));
            }
        }
        write_csv(&dir.join("perturb_series.csv"), "epsilon,t,metric", rows)
    }
}

/// Continuous dependence on the initial phase field: each run starts from
/// `φ₀ + ε cos x` and is compared with the unperturbed run.
pub fn perturb(cfg: &RunConfig, epsilons: &[f64]) -> Result<PerturbReport> {
    if epsilons.is_empty() || epsilons.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Config("perturb needs a nonempty list of positive epsilons".into()));
    }
    let base = Simulation::new(cfg)?;
    let mut sims = vec![base.clone()];
    for &eps in epsilons {
        let mut phi = base.state.phi.clone();
        let c = phi.coeff(1, 0);
        phi.set_mode(1, 0, c + Complex64::new(eps / 2.0, 0.0));
        let state = state_from_fields(base.state.u.clone(), phi, &base.params)?;
        sims.push(Simulation::from_state(cfg, state, 0)?);
    }
    let every = cfg.output.diagnostics_every;
    let mut times = Vec::new();
    let mut metrics = vec![Vec::new(); epsilons.len()];
    let mut measure = |sims: &[Simulation]| -> Result<()> {
        times.push(sims[0].state.time);
        for (m, s) in metrics.iter_mut().zip(&sims[1..]) {
            m.push(continuous_dependence_metric(&s.state, &sims[0].state)?);
        }
        Ok(())
    };
    measure(&sims)?;
    for step in 1..=cfg.steps() {
        step_all(&mut sims)?;
        if step % every == 0 || step == cfg.steps() {
            measure(&sims)?;
        }
    }
    // growth rate from the worst normalized trajectory, prefactor from the
    // tightest constant that bounds all of them
    let scaled: Vec<f64> = (0..times.len())
        .map(|j| {
            epsilons
                .iter()
                .zip(&metrics)
                .map(|(e, m)| m[j] / (e * e))
                .fold(0.0, f64::max)
        })
        .collect();
    let envelope_lambda = if times.len() > 1 {
        linear_fit(&times, &scaled.iter().map(|v| v.ln()).collect::<Vec<_>>()).0
    } else {
        0.0
    };
    let envelope_c = times
        .iter()
        .zip(&scaled)
        .map(|(t, v)| v / (envelope_lambda * t).exp())
        .fold(0.0, f64::max);
    Ok(PerturbReport {
        epsilons: epsilons.to_vec(),
        times,
        metrics,
        envelope_c,
        envelope_lambda,
    })
}

#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub dts: Vec<f64>,
    /// `E(T) − E(0) + Σ dt D(tₙ₊₁)` per level.
    pub energy_residuals: Vec<f64>,
    /// ‖φ_l(T) − φ_{l+1}(T)‖_{L²} for consecutive levels.
    pub phi_differences: Vec<f64>,
    pub phi_orders: Vec<f64>,
    pub residual_orders: Vec<f64>,
}

impl ConvergenceReport {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let rows = (0..self.dts.len()).map(|l| {
            let opt = |v: Option<&f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
            format!(
                "{:.16e},{:.16e},{},{},{}",
                self.dts[l],
                self.energy_residuals[l],
                opt(self.phi_differences.get(l)),
                opt(self.phi_orders.get(l)),
                opt(self.residual_orders.get(l)),
            )
        });
        write_csv(
            &dir.join("convergence_dt.csv"),
            "dt,energy_residual,phi_difference,phi_order,residual_order",
            rows,
        )
    }
}

/// Time-step refinement: `levels` runs with `dt, dt/2, …` to the same final
/// time.
pub fn convergence_dt(cfg: &RunConfig, levels: usize) -> Result<ConvergenceReport> {
    if levels < 3 {
        return Err(Error::Config(format!("convergence study needs at least 3 levels, got {levels}")));
    }
    let configs: Vec<RunConfig> = (0..levels)
        .map(|l| {
            let mut c = cfg.clone();
            c.time.dt = cfg.time.dt / (1u64 << l) as f64;
            c
        })
        .collect();
    let results = configs
        .par_iter()
        .map(|c| -> Result<(SpectralField, f64)> {
            let mut sim = Simulation::new(c)?;
            let e0 = total_energy(&sim.state, &sim.params)?.total;
            let mut dissipated = 0.0;
            for _ in 0..c.steps() {
                sim.step_once()?;
                let (dv, dm) = dissipation(&sim.state, &sim.params)?;
                dissipated += c.time.dt * (dv + dm);
            }
            let e1 = total_energy(&sim.state, &sim.params)?.total;
            Ok((sim.state.phi, e1 - e0 + dissipated))
        })
        .collect::<Result<Vec<_>>>()?;
    let phi_differences: Vec<f64> = results.windows(2).map(|w| (&w[0].0 - &w[1].0).l2_norm()).collect();
    let energy_residuals: Vec<f64> = results.iter().map(|r| r.1).collect();
    let order = |v: &[f64]| -> Vec<f64> { v.windows(2).map(|w| (w[0].abs() / w[1].abs()).log2()).collect() };
    Ok(ConvergenceReport {
        dts: configs.iter().map(|c| c.time.dt).collect(),
        phi_orders: order(&phi_differences),
        residual_orders: order(&energy_residuals),
        energy_residuals,
        phi_differences,
    })
}
