//! Run configuration: a TOML document with the sections `[grid]`, `[time]`,
//! `[fluid]`, `[potential]`, `[ic]`, `[ns]`, `[ch]` and `[output]`.
//!
//! ```toml
//! [grid]
//! n = 64
//!
//! [time]
//! t_end = 0.5
//! dt = 1e-3
//!
//! [ic]
//! preset = "spinodal"
//! mean = 0.0
//! amplitude = 0.05
//! seed = 42
//! ```
//!
//! Every key outside the schema is rejected.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cahn_hilliard::CHStepConfig;
use crate::error::{Error, Result};
use crate::model::FluidParams;
use crate::navier_stokes::{NSStepConfig, ViscousMode};
use crate::spectral::Grid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub t_end: f64,
    pub dt: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FluidSection {
    pub rho1: f64,
    pub rho2: f64,
    pub nu1: f64,
    pub nu2: f64,
}

impl Default for FluidSection {
    fn default() -> Self {
        Self {
            rho1: 1.0,
            rho2: 1.0,
            nu1: 0.1,
            nu2: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialSection {
    pub theta: f64,
    pub theta0: f64,
}

impl Default for PotentialSection {
    fn default() -> Self {
        Self { theta: 1.0, theta0: 2.0 }
    }
}

fn default_noise() -> f64 {
    0.05
}
fn default_seed() -> u64 {
    42
}
fn one() -> f64 {
    1.0
}
fn default_band_amplitude() -> f64 {
    0.9
}
fn default_radius() -> f64 {
    2.0
}
// comparable to the intrinsic interface width 1/sqrt(θ₀ − θ)
fn default_width() -> f64 {
    1.0
}
fn default_center() -> [f64; 2] {
    [PI, PI]
}

/// Initial-condition presets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum IcSpec {
    /// `φ₀ = mean + noise`, `u₀ = 0`. The noise is drawn from ChaCha8 seeded
    /// with `seed`: one uniform value in [−1, 1) per grid sample, row-major,
    /// then dealiased and rescaled to peak `amplitude`. With `band` set,
    /// only modes with `max(|kx|, |ky|) <= band` are kept before rescaling.
    Spinodal {
        #[serde(default)]
        mean: f64,
        #[serde(default = "default_noise")]
        amplitude: f64,
        #[serde(default = "default_seed")]
        seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        band: Option<i64>,
    },
    /// `u₀ = velocity·(sin x cos y, −cos x sin y)`; `φ₀ = phi_mean`, or with
    /// `band_width` set, the periodic band `A tanh(cos y / w)/tanh(1/w)`.
    TaylorGreen {
        #[serde(default = "one")]
        velocity: f64,
        #[serde(default)]
        phi_mean: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        band_width: Option<f64>,
        #[serde(default = "default_band_amplitude")]
        band_amplitude: f64,
    },
    /// Smoothed disc `0.95 tanh((R² − r²)/(2Rw))` with a periodic distance `r`,
    /// optionally stirred by a Taylor–Green field of amplitude `velocity`.
    Bubble {
        #[serde(default = "default_radius")]
        radius: f64,
        #[serde(default = "default_width")]
        width: f64,
        #[serde(default = "default_center")]
        center: [f64; 2],
        #[serde(default)]
        velocity: f64,
    },
}

impl Default for IcSpec {
    fn default() -> Self {
        Self::Spinodal {
            mean: 0.0,
            amplitude: default_noise(),
            seed: default_seed(),
            band: None,
        }
    }
}

impl IcSpec {
    pub fn with_seed(self, new_seed: u64) -> Self {
        match self {
            Self::Spinodal { mean, amplitude, band, .. } => Self::Spinodal {
                mean,
                amplitude,
                seed: new_seed,
                band,
            },
            other => other,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NsSection {
    pub viscous_mode: String,
    pub pressure_tol: f64,
    pub pressure_max_iter: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub galerkin_m: Option<usize>,
    pub flux_correction: bool,
}

impl Default for NsSection {
    fn default() -> Self {
        let d = NSStepConfig::new(1.0);
        Self {
            viscous_mode: "semi_implicit".into(),
            pressure_tol: d.pressure_tol,
            pressure_max_iter: d.pressure_max_iter,
            galerkin_m: None,
            flux_correction: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChSection {
    pub newton_tol: f64,
    pub max_newton: usize,
    pub max_backtrack: usize,
    pub linsolve_tol: f64,
    pub max_linear_iter: usize,
}

impl Default for ChSection {
    fn default() -> Self {
        let d = CHStepConfig::new(1.0);
        Self {
            newton_tol: d.newton_tol,
            max_newton: d.max_newton,
            max_backtrack: d.max_backtrack,
            linsolve_tol: d.linsolve_tol,
            max_linear_iter: d.max_linear_iter,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Write a diagnostics row every this many steps.
    pub diagnostics_every: u64,
    /// Write a checkpoint every this many steps; the final state is always
    /// checkpointed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint_every: Option<u64>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            diagnostics_every: 1,
            checkpoint_every: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    pub time: TimeSection,
    #[serde(default)]
    pub fluid: FluidSection,
    #[serde(default)]
    pub potential: PotentialSection,
    #[serde(default)]
    pub ic: IcSpec,
    #[serde(default)]
    pub ns: NsSection,
    #[serde(default)]
    pub ch: ChSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    /// Parse and validate.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        Grid::new(self.grid.n)?;
        let TimeSection { t_end, dt } = self.time;
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::Config(format!("time.t_end must be positive, got {t_end}")));
        }
        if !(dt > 0.0 && dt <= t_end) {
            return Err(Error::Config(format!("time.dt must lie in (0, t_end], got {dt}")));
        }
        let steps = (t_end / dt).round();
        if (steps * dt - t_end).abs() > 1e-9 * t_end {
            return Err(Error::Config(format!(
                "time.t_end = {t_end} is not a whole number of steps of dt = {dt}"
            )));
        }
        self.params()?;
        self.ns_config()?.validate()?;
        self.ch_config().validate()?;
        let every = self.output.diagnostics_every;
        if every == 0 {
            return Err(Error::Config("output.diagnostics_every must be at least 1".into()));
        }
        if let Some(c) = self.output.checkpoint_every {
            if c == 0 || c % every != 0 {
                return Err(Error::Config(format!(
                    "output.checkpoint_every = {c} must be a positive multiple of output.diagnostics_every = {every}"
                )));
            }
        }
        match self.ic {
            IcSpec::Spinodal { mean, amplitude, .. } if !(amplitude >= 0.0 && mean.abs() + amplitude < 1.0) => {
                Err(Error::Config(format!(
                    "ic: spinodal mean {mean} and amplitude {amplitude} leave (-1, 1)"
                )))
            }
            IcSpec::Spinodal { band: Some(b), .. } if b < 1 => {
                Err(Error::Config(format!("ic: spinodal band must be at least 1, got {b}")))
            }
            IcSpec::TaylorGreen {
                phi_mean,
                band_width,
                band_amplitude,
                ..
            } if phi_mean.abs() >= 1.0 || band_width.is_some_and(|w| !(w > 0.0)) || band_amplitude.abs() >= 1.0 => {
                Err(Error::Config("ic: taylor_green needs |phi_mean| < 1, |band_amplitude| < 1 and band_width > 0".into()))
            }
            IcSpec::Bubble { radius, width, .. } if !(radius > 0.0 && width > 0.0) => {
                Err(Error::Config("ic: bubble radius and width must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.n)
    }

    pub fn params(&self) -> Result<FluidParams> {
        let f = &self.fluid;
        FluidParams::new(f.rho1, f.rho2, f.nu1, f.nu2, self.potential.theta, self.potential.theta0)
    }

    pub fn steps(&self) -> u64 {
        (self.time.t_end / self.time.dt).round() as u64
    }

    pub fn ns_config(&self) -> Result<NSStepConfig> {
        Ok(NSStepConfig {
            dt: self.time.dt,
            viscous_mode: self.ns.viscous_mode.parse::<ViscousMode>()?,
            pressure_tol: self.ns.pressure_tol,
            pressure_max_iter: self.ns.pressure_max_iter,
            galerkin_m: self.ns.galerkin_m,
            flux_correction: self.ns.flux_correction,
        })
    }

    pub fn ch_config(&self) -> CHStepConfig {
        CHStepConfig {
            dt: self.time.dt,
            newton_tol: self.ch.newton_tol,
            max_newton: self.ch.max_newton,
            max_backtrack: self.ch.max_backtrack,
            linsolve_tol: self.ch.linsolve_tol,
            max_linear_iter: self.ch.max_linear_iter,
        }
    }

    /// Spinodal decomposition on an n-grid: θ = 1, θ₀ = 2, matched unit
    /// density and viscosity 0.1, noise of amplitude 0.05 around 0.
    pub fn spinodal(n: usize, seed: u64, t_end: f64, dt: f64) -> Self {
        Self {
            grid: GridSection { n },
            time: TimeSection { t_end, dt },
            fluid: FluidSection::default(),
            potential: PotentialSection::default(),
            ic: IcSpec::default().with_seed(seed),
            ns: NsSection::default(),
            ch: ChSection::default(),
            output: OutputSection::default(),
        }
    }

    /// Matched-density Taylor–Green vortex with a uniform phase field.
    pub fn taylor_green(n: usize, rho: f64, nu: f64, t_end: f64, dt: f64) -> Self {
        Self {
            fluid: FluidSection {
                rho1: rho,
                rho2: rho,
                nu1: nu,
                nu2: nu,
            },
            ic: IcSpec::TaylorGreen {
                velocity: 1.0,
                phi_mean: 0.0,
                band_width: None,
                band_amplitude: default_band_amplitude(),
            },
            ..Self::spinodal(n, default_seed(), t_end, dt)
        }
    }

    /// Stationary disc of fluid 1 in fluid 2 with density ratio 3.
    pub fn bubble(n: usize, t_end: f64, dt: f64) -> Self {
        Self {
            fluid: FluidSection {
                rho1: 1.0,
                rho2: 3.0,
                nu1: 0.1,
                nu2: 0.2,
            },
            ic: IcSpec::Bubble {
                radius: default_radius(),
                width: default_width(),
                center: default_center(),
                velocity: 0.0,
            },
            ..Self::spinodal(n, default_seed(), t_end, dt)
        }
    }
}
