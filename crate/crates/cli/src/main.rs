use std::path::{Path, PathBuf};
use std::process::ExitCode;

use agg_core::harness::experiments::{self, presets};
use agg_core::harness::{resume, run, RunConfig};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "agg", version, about = "Two-phase Navier-Stokes-Cahn-Hilliard simulations on the torus")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Run configuration (TOML)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides [output] dir
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed of the spinodal noise; overrides [ic] seed
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Only report warnings and errors
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the simulation described by --config
    Run,
    /// Continue a run from a checkpoint
    Resume {
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
    },
    /// Viscous decay of the Taylor-Green vortex against its exact rate
    TaylorGreen {
        #[arg(long, default_value_t = 64)]
        n: usize,
    },
    /// Spinodal decomposition from seeded noise
    Spinodal {
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long, default_value_t = 2.0)]
        t_end: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
    },
    /// Galerkin-truncated velocity against the full run
    GalerkinStudy {
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_value = "2,8,18,32")]
        cutoffs: Vec<usize>,
    },
    /// Continuous dependence on perturbations of the initial phase field
    Perturb {
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_value = "1e-6,2e-6,4e-6")]
        eps: Vec<f64>,
    },
    /// Time-step refinement study
    ConvergenceDt {
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
}

impl Global {
    fn config_or(&self, fallback: impl FnOnce() -> RunConfig) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_path(path)?,
            None => fallback(),
        };
        if let Some(dir) = &self.out {
            cfg.output.dir = dir.clone();
        }
        if let Some(seed) = self.seed {
            cfg.ic = cfg.ic.with_seed(seed);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn required_config(&self) -> Result<RunConfig> {
        if self.config.is_none() {
            bail!("this command needs --config PATH");
        }
        self.config_or(|| unreachable!())
    }
}

fn report_dir(cfg: &RunConfig) -> Result<&Path> {
    std::fs::create_dir_all(&cfg.output.dir)
        .with_context(|| format!("creating {}", cfg.output.dir.display()))?;
    Ok(&cfg.output.dir)
}

fn execute(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::Run => {
            let s = run(&g.required_config()?)?;
            log::info!("{} steps, {} rows in {}", s.steps, s.rows, s.csv_path.display());
        }
        Command::Resume { checkpoint } => {
            let s = resume(&g.required_config()?, &checkpoint)?;
            log::info!("resumed to step {}, {} new rows", s.steps, s.rows);
        }
        Command::TaylorGreen { n } => {
            let cfg = g.config_or(|| presets::taylor_green(n))?;
            let r = experiments::taylor_green(&cfg)?;
            r.write(report_dir(&cfg)?)?;
            println!(
                "fitted rate {:.8} expected {:.8} relative error {:.3e}",
                r.fitted_rate, r.expected_rate, r.relative_error
            );
        }
        Command::Spinodal { n, t_end, dt } => {
            let cfg = g.config_or(|| RunConfig::spinodal(n, 42, t_end, dt))?;
            let s = run(&cfg)?;
            println!("{} steps, diagnostics in {}", s.steps, s.csv_path.display());
        }
        Command::GalerkinStudy { n, cutoffs } => {
            let cfg = g.config_or(|| presets::galerkin(n))?;
            let r = experiments::galerkin(&cfg, &cutoffs)?;
            r.write(report_dir(&cfg)?)?;
            for (m, lambda, e) in &r.rows {
                println!("m = {m:3} (|k|^2 <= {lambda:4}): max L2 error {e:.3e}");
            }
        }
        Command::Perturb { n, eps } => {
            let cfg = g.config_or(|| presets::perturb(n))?;
            let r = experiments::perturb(&cfg, &eps)?;
            r.write(report_dir(&cfg)?)?;
            for (e, m) in r.epsilons.iter().zip(r.final_metrics()) {
                println!("eps = {e:.3e}: final metric {m:.6e} ({:.6} eps^2)", m / (e * e));
            }
            println!("envelope C = {:.6e}, Lambda = {:.6e}", r.envelope_c, r.envelope_lambda);
        }
        Command::ConvergenceDt { n, levels } => {
            let cfg = g.config_or(|| presets::convergence_dt(n, g.seed.unwrap_or(42)))?;
            let r = experiments::convergence_dt(&cfg, levels)?;
            r.write(report_dir(&cfg)?)?;
            println!("phi orders {:?}", r.phi_orders);
            println!("energy residual orders {:?}", r.residual_orders);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.global.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
