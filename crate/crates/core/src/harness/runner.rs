//! The coupled time loop, CSV output and checkpoint/resume.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::checkpoint::Checkpoint;
use super::config::RunConfig;
use super::ic::initial_state;
use crate::cahn_hilliard::{ch_step, CHStepConfig};
use crate::diagnostics::{record, DiagnosticsRecord, SolverCounters, CSV_HEADER};
use crate::error::{Error, Result};
use crate::model::{FlowState, FluidParams};
use crate::navier_stokes::{ns_step, NSStepConfig};

/// How often a failed step may be halved.
pub const MAX_SUBSTEP_DEPTH: u32 = 5;

pub const CSV_NAME: &str = "diagnostics.csv";
pub const FINAL_CHECKPOINT: &str = "final.agg2";

pub fn checkpoint_name(step: u64) -> String {
    format!("checkpoint_{step:08}.agg2")
}

fn single_step(
    state: &FlowState,
    p: &FluidParams,
    ns_cfg: &NSStepConfig,
    ch_cfg: &CHStepConfig,
    dt: f64,
) -> Result<(FlowState, SolverCounters)> {
    let (phi, mu, report) = ch_step(&state.phi, &state.u, p, &ch_cfg.with_dt(dt))?;
    let out = ns_step(&state.u, &phi, &mu, p, &ns_cfg.with_dt(dt))?;
    let mut next = FlowState::new(state.time + dt, out.u, phi, p)?;
    next.pressure = out.pressure;
    Ok((
        next,
        SolverCounters {
            newton_iters: report.newton_iters,
            pcg_iters: out.pcg_iters,
            newton_max_abs_phi: report.max_abs_phi,
        },
    ))
}

fn step_with_retry(
    state: &FlowState,
    p: &FluidParams,
    ns_cfg: &NSStepConfig,
    ch_cfg: &CHStepConfig,
    dt: f64,
    depth: u32,
) -> Result<(FlowState, SolverCounters)> {
    match single_step(state, p, ns_cfg, ch_cfg, dt) {
        Err(e) if e.is_recoverable() && depth < MAX_SUBSTEP_DEPTH => {
            log::warn!("step at t = {} with dt = {dt:e} failed ({e}); halving", state.time);
            let (mid, a) = step_with_retry(state, p, ns_cfg, ch_cfg, dt / 2.0, depth + 1)?;
            let (end, b) = step_with_retry(&mid, p, ns_cfg, ch_cfg, dt / 2.0, depth + 1)?;
            Ok((
                end,
                SolverCounters {
                    newton_iters: a.newton_iters + b.newton_iters,
                    pcg_iters: a.pcg_iters + b.pcg_iters,
                    newton_max_abs_phi: a.newton_max_abs_phi.max(b.newton_max_abs_phi),
                },
            ))
        }
        other => other,
    }
}

/// One Lie step of length `ns_cfg.dt`: Cahn–Hilliard with `uⁿ`, then
/// Navier–Stokes with `φⁿ⁺¹` and the scheme's `μⁿ⁺¹`. A recoverable failure
/// is retried as two half steps, recursively up to [`MAX_SUBSTEP_DEPTH`]
/// halvings.
pub fn advance(
    state: &FlowState,
    p: &FluidParams,
    ns_cfg: &NSStepConfig,
    ch_cfg: &CHStepConfig,
) -> Result<(FlowState, SolverCounters)> {
    step_with_retry(state, p, ns_cfg, ch_cfg, ns_cfg.dt, 0)
}

/// A configured simulation positioned at some step.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub params: FluidParams,
    pub ns_cfg: NSStepConfig,
    pub ch_cfg: CHStepConfig,
    pub dt: f64,
    pub state: FlowState,
    pub step: u64,
}

impl Simulation {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let mut state = initial_state(cfg)?;
        if let Some(m) = cfg.ns.galerkin_m {
            state.u = crate::navier_stokes::galerkin_truncate(&state.u, m);
        }
        Self::from_state(cfg, state, 0)
    }

    pub fn from_state(cfg: &RunConfig, state: FlowState, step: u64) -> Result<Self> {
        Ok(Self {
            params: cfg.params()?,
            ns_cfg: cfg.ns_config()?,
            ch_cfg: cfg.ch_config(),
            dt: cfg.time.dt,
            state,
            step,
        })
    }

    pub fn time_of(&self, step: u64) -> f64 {
        step as f64 * self.dt
    }

    pub fn step_once(&mut self) -> Result<SolverCounters> {
        let (mut next, counters) = advance(&self.state, &self.params, &self.ns_cfg, &self.ch_cfg)?;
        self.step += 1;
        next.time = self.time_of(self.step);
        self.state = next;
        Ok(counters)
    }

    /// Replace the state by its checkpoint image, so that a run restored
    /// from that checkpoint continues bit-identically.
    pub fn canonicalize(&mut self) -> Result<Checkpoint> {
        let c = Checkpoint::from_state(&self.state, &self.params);
        let pressure = self.state.pressure.clone();
        self.state = c.to_state()?;
        self.state.pressure = pressure;
        Ok(c)
    }

    pub fn record(&self, prev: Option<&DiagnosticsRecord>, counters: SolverCounters) -> Result<DiagnosticsRecord> {
        record(self.step, &self.state, prev, &self.params, counters)
    }
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub steps: u64,
    pub rows: u64,
    pub final_state: FlowState,
    pub last_record: Option<DiagnosticsRecord>,
    pub csv_path: PathBuf,
}

struct Output {
    dir: PathBuf,
    csv: BufWriter<File>,
    rows: u64,
}

impl Output {
    fn write_row(&mut self, r: &DiagnosticsRecord) -> Result<()> {
        writeln!(self.csv, "{}", r.csv_row())?;
        self.rows += 1;
        Ok(())
    }
}

fn drive(cfg: &RunConfig, mut sim: Simulation, mut out: Output, mut prev: Option<DiagnosticsRecord>) -> Result<RunSummary> {
    let total = cfg.steps();
    let every = cfg.output.diagnostics_every;
    let ckpt_every = cfg.output.checkpoint_every;
    while sim.step < total {
        let counters = match sim.step_once() {
            Ok(c) => c,
            Err(e) => {
                out.csv.flush()?;
                return Err(Error::Aborted {
                    step: sim.step + 1,
                    time: sim.time_of(sim.step),
                    source: Box::new(e),
                });
            }
        };
        let step = sim.step;
        let checkpoint_due = ckpt_every.is_some_and(|c| step % c == 0) || step == total;
        let checkpoint = if checkpoint_due {
            Some(sim.canonicalize()?)
        } else {
            None
        };
        if step % every == 0 {
            let r = sim.record(prev.as_ref(), counters)?;
            out.write_row(&r)?;
            log::info!(
                "step {step} t = {:.6} E = {:.10e} max|phi| = {:.6}",
                r.t,
                r.e_total,
                r.max_abs_phi
            );
            prev = Some(r);
        }
        if let Some(c) = checkpoint {
            out.csv.flush()?;
            if ckpt_every.is_some_and(|k| step % k == 0) {
                c.write(&out.dir.join(checkpoint_name(step)))?;
            }
            if step == total {
                c.write(&out.dir.join(FINAL_CHECKPOINT))?;
            }
        }
    }
    out.csv.flush()?;
    Ok(RunSummary {
        steps: sim.step,
        rows: out.rows,
        final_state: sim.state,
        last_record: prev,
        csv_path: out.dir.join(CSV_NAME),
    })
}

/// Run from the initial condition, writing the diagnostics CSV and
/// checkpoints into the configured output directory.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    let sim = Simulation::new(cfg)?;
    let dir = cfg.output.dir.clone();
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.toml"), cfg.to_toml_string())?;
    let mut out = Output {
        csv: BufWriter::new(File::create(dir.join(CSV_NAME))?),
        dir,
        rows: 0,
    };
    writeln!(out.csv, "{CSV_HEADER}")?;
    let first = sim.record(None, SolverCounters::default())?;
    out.write_row(&first)?;
    drive(cfg, sim, out, Some(first))
}

/// Continue a run from `checkpoint`. Rows of an existing CSV after the
/// checkpoint's step are discarded, so the file ends up identical to that of
/// an uninterrupted run.
pub fn resume(cfg: &RunConfig, checkpoint: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    let c = Checkpoint::read(checkpoint)?;
    if c.n() != cfg.grid.n {
        return Err(Error::Checkpoint(format!("checkpoint has n = {}, config has n = {}", c.n(), cfg.grid.n)));
    }
    if c.params != cfg.params()? {
        return Err(Error::Checkpoint("checkpoint parameters differ from the configuration".into()));
    }
    let step = (c.time / cfg.time.dt).round() as u64;
    if step as f64 * cfg.time.dt != c.time || step > cfg.steps() {
        return Err(Error::Checkpoint(format!(
            "checkpoint time {} is not a step of this run (dt = {})",
            c.time, cfg.time.dt
        )));
    }
    let sim = Simulation::from_state(cfg, c.to_state()?, step)?;
    let dir = cfg.output.dir.clone();
    fs::create_dir_all(&dir)?;
    let csv_path = dir.join(CSV_NAME);
    let mut kept = vec![CSV_HEADER.to_string()];
    if csv_path.exists() {
        for line in BufReader::new(File::open(&csv_path)?).lines().skip(1) {
            let line = line?;
            let row_step: u64 = line
                .split(',')
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Checkpoint(format!("malformed CSV row: {line}")))?;
            if row_step <= step {
                kept.push(line);
            }
        }
    }
    let mut out = Output {
        csv: BufWriter::new(File::create(&csv_path)?),
        dir,
        rows: 0,
    };
    for line in &kept {
        writeln!(out.csv, "{line}")?;
    }
    let prev = if step % cfg.output.diagnostics_every == 0 {
        Some(sim.record(None, SolverCounters::default())?)
    } else {
        None
    };
    drive(cfg, sim, out, prev)
}
