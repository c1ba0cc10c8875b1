//! Acceptance criteria A1–A12. Each test prints exactly one `PASS`/`FAIL`
//! line with the measured quantities. The criteria run one after another in
//! a plain `main` so the wall-clock budgets are measured without contention
//! and the verdicts show up in a normal `cargo test` run.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use agg_core::cahn_hilliard::ch_step;
use agg_core::diagnostics::{transport_pairing, DiagnosticsRecord};
use agg_core::harness::experiments::{self, presets};
use agg_core::harness::{RunConfig, Simulation};
use agg_core::model::total_energy;
use agg_core::navier_stokes::{pressure_solve, VariableDensityLaplacian};
use agg_core::spectral::random_band_limited;
use agg_core::{CHStepConfig, FlowState, FluidParams, Grid, NSStepConfig, SpectralField, SpectralVectorField};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn verdict(id: &str, ok: bool, detail: String) -> bool {
    println!("{id} {} {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

struct SpinodalRun {
    records: Vec<DiagnosticsRecord>,
    newton_max_abs_phi: f64,
    elapsed: Duration,
}

/// The shared 2000-step spinodal run at n = 64 behind A1–A3.
fn spinodal_run() -> &'static SpinodalRun {
    static RUN: OnceLock<SpinodalRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let cfg = RunConfig::spinodal(64, 42, 2.0, 1e-3);
        let start = Instant::now();
        let mut sim = Simulation::new(&cfg).unwrap();
        let mut records = vec![sim.record(None, Default::default()).unwrap()];
        let mut newton_max_abs_phi: f64 = 0.0;
        for _ in 0..cfg.steps() {
            let c = sim.step_once().unwrap();
            newton_max_abs_phi = newton_max_abs_phi.max(c.newton_max_abs_phi);
            let r = sim.record(records.last(), c).unwrap();
            records.push(r);
        }
        SpinodalRun {
            records,
            newton_max_abs_phi,
            elapsed: start.elapsed(),
        }
    })
}

fn a01_mass_conservation() -> bool {
    let run = spinodal_run();
    let m0 = run.records[0].mass_phi;
    let drift = run.records.iter().map(|r| (r.mass_phi - m0).abs()).fold(0.0, f64::max);
    let ok = run.records.len() == 2001 && drift <= 1e-12 && run.elapsed <= Duration::from_secs(60);
    verdict(
        "A1",
        ok,
        format!(
            "records={} max|mean(phi)-mean(phi0)|={drift:.3e} (tol 1e-12) runtime={:.1}s (limit 60s)",
            run.records.len(),
            run.elapsed.as_secs_f64()
        ),
    )
}

fn a02_phase_bound() -> bool {
    let run = spinodal_run();
    let max_rec = run.records.iter().map(|r| r.max_abs_phi).fold(0.0, f64::max);
    let ok = max_rec < 1.0 && run.newton_max_abs_phi < 1.0;
    verdict(
        "A2",
        ok,
        format!(
            "max_abs_phi over records={max_rec:.6} over Newton iterates={:.6}",
            run.newton_max_abs_phi
        ),
    )
}

fn a03_energy_law() -> bool {
    let run = spinodal_run();
    let increases = run.records.windows(2).filter(|w| w[1].e_total > w[0].e_total).count();
    let cfg = presets::convergence_dt(64, 42);
    let report = experiments::convergence_dt(&cfg, 3).unwrap();
    let min_order = report.residual_orders.iter().cloned().fold(f64::INFINITY, f64::min);
    let ok = increases == 0 && min_order >= 0.8;
    verdict(
        "A3",
        ok,
        format!(
            "E_total increases={increases} over {} records; dt={:?} residuals={:?} orders={:?} (min 0.8)",
            run.records.len(),
            report.dts,
            report.energy_residuals,
            report.residual_orders
        ),
    )
}

fn a04_gradient_stability() -> bool {
    let cfg = RunConfig::spinodal(64, 42, 1.0, 1e-3);
    let p = cfg.params().unwrap();
    let start = Simulation::new(&cfg).unwrap().state;
    let zero = SpectralVectorField::zeros(start.grid());
    let free = |phi: &SpectralField| {
        let s = FlowState::new(0.0, zero.clone(), phi.clone(), &p).unwrap();
        total_energy(&s, &p).unwrap().free
    };
    let mut detail = Vec::new();
    let mut ok = true;
    for dt in [1e-3, 1e-2, 1e-1] {
        let ch = CHStepConfig::new(dt);
        let mut phi = start.phi.clone();
        let mut e = free(&phi);
        let mut increases = 0;
        for _ in 0..100 {
            phi = ch_step(&phi, &zero, &p, &ch).unwrap().0;
            let e_next = free(&phi);
            if e_next > e {
                increases += 1;
            }
            e = e_next;
        }
        ok &= increases == 0;
        detail.push(format!("dt={dt:e}: increases={increases} E_free(end)={e:.6e}"));
    }
    verdict("A4", ok, detail.join("; "))
}

fn a05_taylor_green() -> bool {
    let start = Instant::now();
    let r = experiments::taylor_green(&presets::taylor_green(64)).unwrap();
    let elapsed = start.elapsed();
    let ok = r.relative_error <= 0.01 && elapsed <= Duration::from_secs(30);
    verdict(
        "A5",
        ok,
        format!(
            "fitted={:.8} expected={:.8} rel_err={:.3e} (tol 1e-2) runtime={:.1}s (limit 30s)",
            r.fitted_rate,
            r.expected_rate,
            r.relative_error,
            elapsed.as_secs_f64()
        ),
    )
}

fn a06_matched_density_reduction() -> bool {
    let mut cfg = presets::galerkin(64);
    cfg.fluid.rho2 = cfg.fluid.rho1;
    cfg.time.t_end = 0.05;
    let mut with = Simulation::new(&cfg).unwrap();
    cfg.ns.flux_correction = false;
    let mut without = Simulation::new(&cfg).unwrap();
    let mut identical = true;
    for _ in 0..cfg.steps() {
        with.step_once().unwrap();
        without.step_once().unwrap();
        identical &= with.state == without.state;
    }
    verdict(
        "A6",
        identical,
        format!("{} steps, nu1={} nu2={}, bit-identical={identical}", cfg.steps(), cfg.fluid.nu1, cfg.fluid.nu2),
    )
}

fn a07_linearized_dispersion() -> bool {
    let (theta, theta0, dt, eps) = (1.0, 3.0, 0.05, 1e-8);
    let p = FluidParams::new(1.0, 1.0, 0.1, 0.1, theta, theta0).unwrap();
    let g = Grid::new(32).unwrap();
    let zero = SpectralVectorField::zeros(&g);
    let cfg = CHStepConfig {
        newton_tol: 1e-20,
        ..CHStepConfig::new(dt)
    };
    let mut ok = true;
    let mut detail = Vec::new();
    for (kx, ky) in [(1i64, 0i64), (1, 1), (2, 0)] {
        let mut phi = SpectralField::zeros(&g);
        phi.set_mode(kx, ky, Complex64::new(eps / 2.0, 0.0));
        let next = ch_step(&phi, &zero, &p, &cfg).unwrap().0;
        let measured = next.coeff(kx, ky).re / phi.coeff(kx, ky).re;
        let k2 = (kx * kx + ky * ky) as f64;
        let predicted = (1.0 + dt * theta0 * k2) / (1.0 + dt * k2 * k2 + dt * theta * k2);
        let rel = (measured - predicted).abs() / predicted;
        let grows = measured > 1.0 + 1e-8;
        let should_grow = k2 < theta0 - theta;
        ok &= rel <= 1e-4 && grows == should_grow;
        detail.push(format!("k=({kx},{ky}) g={measured:.10} analytic={predicted:.10} rel={rel:.1e} grows={grows}"));
    }
    verdict("A7", ok, detail.join("; "))
}

fn a08_pressure_solver() -> bool {
    let (g64, g128) = (Grid::new(64).unwrap(), Grid::new(128).unwrap());
    let cfg = NSStepConfig::new(1e-3);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut worst_res, mut worst_ratio, mut max_iter) = (0.0f64, 1.0f64, 0);
    for k in 0..50 {
        let ratio = 100f64.powf(k as f64 / 49.0);
        let s = random_band_limited(&g64, 4, &mut rng);
        let mut rhs = random_band_limited(&g64, 8, &mut rng);
        rhs.coeffs_mut()[[0, 0]] = Complex64::default();
        let rhs = rhs.scale(1.0 / rhs.l2_norm());
        let samples = s.backward_transform();
        let (lo, hi) = samples.iter().fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(*v), b.max(*v)));
        let mut iters = Vec::new();
        for g in [&g64, &g128] {
            let rho_samples = s.resample(g).backward_transform().mapv(|v| ratio.powf((v - lo) / (hi - lo)));
            let rho = SpectralField::forward_transform(&rho_samples, g).unwrap();
            let rhs = rhs.resample(g);
            let (p, report) = pressure_solve(&rhs, &rho, &cfg).unwrap();
            let residual = (&VariableDensityLaplacian::new(&rho).unwrap().apply(&p) - &rhs).l2_norm();
            worst_res = worst_res.max(residual);
            iters.push(report.iterations.max(1) as f64);
            max_iter = max_iter.max(report.iterations);
        }
        worst_ratio = worst_ratio.max(iters[1] / iters[0]).max(iters[0] / iters[1]);
    }
    let ok = worst_res <= 1e-10 && worst_ratio <= 2.0;
    verdict(
        "A8",
        ok,
        format!(
            "50 pairs, rho ratio up to 100: max residual={worst_res:.3e} (tol 1e-10) max iteration ratio 128/64={worst_ratio:.3} (limit 2) max iterations={max_iter}"
        ),
    )
}

fn a09_continuous_dependence() -> bool {
    let eps = [1e-6, 2e-6, 4e-6];
    let r = experiments::perturb(&presets::perturb(64), &eps).unwrap();
    let f = r.final_metrics();
    let scaling: Vec<f64> = (1..eps.len())
        .map(|i| (f[i] / f[0]) / (eps[i] / eps[0]).powi(2))
        .collect();
    let scales = scaling.iter().all(|s| (s - 1.0).abs() <= 0.2);
    let bounded = r.epsilons.iter().zip(&r.metrics).all(|(e, m)| {
        r.times
            .iter()
            .zip(m)
            .all(|(t, v)| *v <= r.envelope(*t, *e) * (1.0 + 1e-12))
    });
    let ok = scales && bounded && r.times.last().is_some_and(|t| (t - 0.5).abs() < 1e-12);
    verdict(
        "A9",
        ok,
        format!(
            "final metrics={f:?} normalized ratios={scaling:?} (tol 0.2) envelope C={:.4e} Lambda={:.4e} bounded={bounded}",
            r.envelope_c, r.envelope_lambda
        ),
    )
}

fn a10_galerkin_convergence() -> bool {
    let r = experiments::galerkin(&presets::galerkin(64), &[2, 8, 18, 32]).unwrap();
    let e = r.errors();
    let monotone = e.windows(2).all(|w| w[1] <= w[0]);
    let ok = monotone && e[3] <= 1e-6;
    verdict(
        "A10",
        ok,
        format!("max_t L2 errors for m=2,8,18,32: {e:?} nonincreasing={monotone} (final tol 1e-6)"),
    )
}

fn a11_projector_algebra() -> bool {
    let g = Grid::new(32).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut idem, mut orth, mut korn) = (0.0f64, 0.0f64, f64::NEG_INFINITY);
    for _ in 0..100 {
        let raw = SpectralVectorField::new(
            random_band_limited(&g, 12, &mut rng),
            random_band_limited(&g, 12, &mut rng),
        )
        .unwrap();
        let u = raw.leray_project();
        let u = u.scale(1.0 / u.l2_norm());
        idem = idem.max((&u.leray_project() - &u).l2_norm());
        let q = random_band_limited(&g, 12, &mut rng);
        let q = q.scale(1.0 / q.gradient().l2_norm());
        orth = orth.max(raw.leray_project().scale(1.0 / raw.l2_norm()).inner(&q.gradient()).abs());
        let grad = agg_core::spectral::tensor_norm_sq(&u.gradient()).sqrt();
        let sym = agg_core::spectral::tensor_norm_sq(&u.symmetric_gradient()).sqrt();
        korn = korn.max(grad - 2f64.sqrt() * sym);
    }
    let ok = idem <= 1e-10 && orth <= 1e-10 && korn <= 1e-10;
    verdict(
        "A11",
        ok,
        format!("100 fields: |PPu-Pu|={idem:.3e} |<Pu,grad q>|={orth:.3e} max(|grad u|-sqrt2|Du|)={korn:.3e} (tol 1e-10)"),
    )
}

fn a12_integration_by_parts() -> bool {
    let g = Grid::new(32).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let u = SpectralVectorField::new(
            random_band_limited(&g, 10, &mut rng),
            random_band_limited(&g, 10, &mut rng),
        )
        .unwrap()
        .leray_project();
        let u = u.scale(1.0 / u.l2_norm());
        let unit = |f: SpectralField| f.scale(1.0 / f.l2_norm());
        let mu = unit(random_band_limited(&g, 10, &mut rng));
        let phi = unit(random_band_limited(&g, 10, &mut rng));
        let sum = transport_pairing(&mu, &u, &phi) + transport_pairing(&phi, &u, &mu);
        worst = worst.max(sum.abs());
    }
    verdict("A12", worst <= 1e-10, format!("100 unit-L2 triples: max |int mu u.grad phi + int phi u.grad mu|={worst:.3e} (tol 1e-10)"))
}

const CRITERIA: [(&str, fn() -> bool); 12] = [
    ("A1", a01_mass_conservation),
    ("A2", a02_phase_bound),
    ("A3", a03_energy_law),
    ("A4", a04_gradient_stability),
    ("A5", a05_taylor_green),
    ("A6", a06_matched_density_reduction),
    ("A7", a07_linearized_dispersion),
    ("A8", a08_pressure_solver),
    ("A9", a09_continuous_dependence),
    ("A10", a10_galerkin_convergence),
    ("A11", a11_projector_algebra),
    ("A12", a12_integration_by_parts),
];

fn main() -> ExitCode {
    // `cargo test -p agg-core --test acceptance -- A8 A9` runs a subset
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = Vec::new();
    for (id, check) in CRITERIA {
        if !filters.is_empty() && !filters.iter().any(|f| f == id) {
            continue;
        }
        let ok = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .map(String::as_str)
                .or_else(|| e.downcast_ref::<&str>().copied())
                .unwrap_or("panic");
            verdict(id, false, format!("panicked: {msg}"))
        });
        if !ok {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("acceptance failures: {}", failed.join(", "));
        ExitCode::FAILURE
    }
}
