//! Initial conditions for the presets of [`IcSpec`].

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{IcSpec, RunConfig};
use crate::error::{Error, Result};
use crate::model::{FlowState, FluidParams};
use crate::spectral::{Grid, SpectralField, SpectralVectorField};

/// Largest admissible initial `|φ₀|`.
pub const PHASE_MARGIN: f64 = 1.0 - 1e-6;

/// Dealiased noise with peak sample `amplitude`; see [`IcSpec::Spinodal`].
pub fn seeded_noise(grid: &Grid, amplitude: f64, seed: u64, band: Option<i64>) -> SpectralField {
    let n = grid.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = Array2::from_shape_simple_fn((n, n), || rng.gen_range(-1.0..1.0));
    let mut noise = SpectralField::from_samples_dealiased(&samples, grid);
    if let Some(b) = band {
        noise = noise.map_real_multiplier(|kx, ky| if kx.abs().max(ky.abs()) <= b { 1.0 } else { 0.0 });
    }
    let peak = noise.max_abs_sample();
    if peak == 0.0 {
        noise
    } else {
        noise.scale(amplitude / peak)
    }
}

pub fn taylor_green_velocity(grid: &Grid, amplitude: f64) -> SpectralVectorField {
    SpectralVectorField::from_fn(
        grid,
        |x, y| amplitude * x.sin() * y.cos(),
        |x, y| -amplitude * x.cos() * y.sin(),
    )
    .dealias()
}

fn fields(grid: &Grid, spec: &IcSpec) -> (SpectralVectorField, SpectralField) {
    match *spec {
        IcSpec::Spinodal {
            mean,
            amplitude,
            seed,
            band,
        } => {
            let mut phi = seeded_noise(grid, amplitude, seed, band);
            phi.coeffs_mut()[[0, 0]] += mean;
            (SpectralVectorField::zeros(grid), phi)
        }
        IcSpec::TaylorGreen {
            velocity,
            phi_mean,
            band_width,
            band_amplitude,
        } => {
            let phi = match band_width {
                None => SpectralField::constant(grid, phi_mean),
                Some(w) => {
                    let norm = (1.0 / w).tanh();
                    SpectralField::from_fn(grid, |_, y| band_amplitude * (y.cos() / w).tanh() / norm).dealias()
                }
            };
            (taylor_green_velocity(grid, velocity), phi)
        }
        IcSpec::Bubble {
            radius,
            width,
            center,
            velocity,
        } => {
            // 2 − 2cos is a smooth periodic stand-in for the squared distance;
            // (R² − r²)/2R avoids the kink of r itself at the centre
            let phi = SpectralField::from_fn(grid, |x, y| {
                let r2 = 2.0 * (1.0 - (x - center[0]).cos()) + 2.0 * (1.0 - (y - center[1]).cos());
                0.95 * ((radius * radius - r2) / (2.0 * radius * width)).tanh()
            })
            .dealias();
            (taylor_green_velocity(grid, velocity), phi)
        }
    }
}

/// Build and check the initial state at `t = 0`.
pub fn initial_state(cfg: &RunConfig) -> Result<FlowState> {
    let grid = cfg.grid()?;
    let (u, phi) = fields(&grid, &cfg.ic);
    state_from_fields(u, phi, &cfg.params()?)
}

/// Check the admissibility of `(u₀, φ₀)` and wrap them as a state.
pub fn state_from_fields(u: SpectralVectorField, phi: SpectralField, p: &FluidParams) -> Result<FlowState> {
    let peak = phi.max_abs_sample();
    if peak > PHASE_MARGIN {
        return Err(Error::Config(format!(
            "initial phase field reaches |phi| = {peak}, above {PHASE_MARGIN}"
        )));
    }
    if phi.mean().abs() >= 1.0 {
        return Err(Error::Config(format!("initial phase mean {} is not inside (-1, 1)", phi.mean())));
    }
    FlowState::new(0.0, u, phi, p)
}
