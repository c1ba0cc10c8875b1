//! Binary checkpoints.
//!
//! Little-endian layout: magic `AGG2`, `u32` version (1), `u32` n, `f64`
//! time, six `f64` parameters (ρ₁, ρ₂, ν₁, ν₂, θ, θ₀), then the n×n
//! row-major real samples of φ, u_x and u_y.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::{FlowState, FluidParams};
use crate::spectral::{Grid, SpectralField, SpectralVectorField};

pub const MAGIC: &[u8; 4] = b"AGG2";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 6 * 8;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub time: f64,
    pub params: FluidParams,
    pub phi: Array2<f64>,
    pub ux: Array2<f64>,
    pub uy: Array2<f64>,
}

impl Checkpoint {
    pub fn from_state(state: &FlowState, params: &FluidParams) -> Self {
        let [ux, uy] = state.u.backward_transform();
        Self {
            time: state.time,
            params: *params,
            phi: state.phi.backward_transform(),
            ux,
            uy,
        }
    }

    pub fn n(&self) -> usize {
        self.phi.nrows()
    }

    /// Rebuild the state; μ is recomputed from φ and the pressure starts at
    /// zero.
    pub fn to_state(&self) -> Result<FlowState> {
        let grid = Grid::new(self.n())?;
        let phi = SpectralField::forward_transform(&self.phi, &grid)?;
        let u = SpectralVectorField::new(
            SpectralField::forward_transform(&self.ux, &grid)?,
            SpectralField::forward_transform(&self.uy, &grid)?,
        )?;
        FlowState::new(self.time, u, phi, &self.params)
    }

    pub fn encode(&self) -> Vec<u8> {
        let n = self.n();
        let mut out = Vec::with_capacity(HEADER_LEN + 3 * n * n * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(n as u32).to_le_bytes());
        out.extend_from_slice(&self.time.to_le_bytes());
        let p = &self.params;
        for v in [p.rho1, p.rho2, p.nu1, p.nu2, p.theta, p.theta0] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for block in [&self.phi, &self.ux, &self.uy] {
            for v in block.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Checkpoint(format!("truncated header ({} bytes)", bytes.len())));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::Checkpoint("bad magic bytes".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
        let version = u32_at(4);
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let n = u32_at(8) as usize;
        Grid::new(n).map_err(|e| Error::Checkpoint(format!("grid size: {e}")))?;
        let expected = HEADER_LEN + 3 * n * n * 8;
        if bytes.len() != expected {
            return Err(Error::Checkpoint(format!(
                "expected {expected} bytes for n = {n}, found {}",
                bytes.len()
            )));
        }
        let time = f64_at(12);
        let v: Vec<f64> = (0..6).map(|k| f64_at(20 + 8 * k)).collect();
        let params = FluidParams::new(v[0], v[1], v[2], v[3], v[4], v[5])
            .map_err(|e| Error::Checkpoint(format!("parameters: {e}")))?;
        let block = |b: usize| {
            let start = HEADER_LEN + b * n * n * 8;
            Array2::from_shape_fn((n, n), |(i, j)| f64_at(start + 8 * (i * n + j)))
        };
        Ok(Self {
            time,
            params,
            phi: block(0),
            ux: block(1),
            uy: block(2),
        })
    }

    /// Write via a temporary file and rename, so a crash never leaves a
    /// partial checkpoint under the final name.
    pub fn write(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("partial");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&self.encode())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::decode(&fs::read(path)?)
    }
}
