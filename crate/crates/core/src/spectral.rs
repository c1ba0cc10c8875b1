//! Fourier representation of real periodic fields on the torus (R / 2πZ)².
//!
//! A [`SpectralField`] stores the full complex coefficient array of an
//! `n × n` grid function. Index `[a, b]` holds the coefficient of
//! `exp(i (kx x + ky y))` with `kx = wavenumber(a)`, `ky = wavenumber(b)`.
//! Sample arrays follow the same layout: `samples[[i, j]] = f(x_i, y_j)`
//! with `x_i = 2πi/n`, so axis 0 is the x direction.
//!
//! Normalization: `f̂_k = n⁻² Σ_j f(x_j) exp(−i k·x_j)`, which makes `f̂_0`
//! the arithmetic mean of the samples.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub const TWO_PI: f64 = 2.0 * PI;
/// Measure of the torus, (2π)².
pub const DOMAIN_AREA: f64 = TWO_PI * TWO_PI;

const I: Complex64 = Complex64::new(0.0, 1.0);

struct GridInner {
    n: usize,
    wavenumbers: Vec<i64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Uniform `n × n` grid on the 2π-periodic square, with cached FFT plans.
///
/// Plans are immutable and shared; every transform allocates its own scratch,
/// so a `Grid` can be used from several threads at once.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 8 || n % 2 != 0 {
            return Err(Error::Config(format!(
                "grid size must be an even integer >= 8, got {n}"
            )));
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let half = n as i64 / 2;
        let wavenumbers = (0..n as i64)
            .map(|a| if a <= half { a } else { a - n as i64 })
            .collect();
        Ok(Self {
            inner: Arc::new(GridInner {
                n,
                wavenumbers,
                forward,
                inverse,
            }),
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.inner.n
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        TWO_PI / self.inner.n as f64
    }

    /// Quadrature weight of one grid cell, h².
    #[inline]
    pub fn cell_area(&self) -> f64 {
        let h = self.spacing();
        h * h
    }

    #[inline]
    pub fn point(&self, i: usize) -> f64 {
        TWO_PI * i as f64 / self.inner.n as f64
    }

    /// Signed wavenumber of array index `a`, in `{−n/2+1, …, n/2}`.
    #[inline]
    pub fn wavenumber(&self, a: usize) -> i64 {
        self.inner.wavenumbers[a]
    }

    pub fn wavenumbers(&self) -> &[i64] {
        &self.inner.wavenumbers
    }

    #[inline]
    pub fn is_nyquist(&self, a: usize) -> bool {
        2 * a == self.inner.n
    }

    /// Array index holding wavenumber `k`, if representable.
    pub fn index_of(&self, k: i64) -> Option<usize> {
        let n = self.inner.n as i64;
        if k > n / 2 || k <= -n / 2 {
            return None;
        }
        Some(k.rem_euclid(n) as usize)
    }

    /// Index of the mode `-k` for array index `a`.
    #[inline]
    pub fn reflect(&self, a: usize) -> usize {
        (self.inner.n - a) % self.inner.n
    }

    /// Two-thirds rule: a mode survives iff `max(|kx|, |ky|) <= n/3`.
    #[inline]
    pub fn retained(&self, kx: i64, ky: i64) -> bool {
        let n = self.inner.n as i64;
        3 * kx.abs() <= n && 3 * ky.abs() <= n
    }

    /// Largest retained wavenumber magnitude per direction.
    pub fn dealias_cutoff(&self) -> i64 {
        self.inner.n as i64 / 3
    }

    fn fft2(&self, data: &mut Array2<Complex64>, inverse: bool) {
        let n = self.inner.n;
        let plan = if inverse {
            &self.inner.inverse
        } else {
            &self.inner.forward
        };
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        // axis 1 is contiguous in standard layout
        plan.process_with_scratch(
            data.as_slice_mut().expect("standard layout"),
            &mut scratch,
        );
        let mut transposed = data.t().as_standard_layout().into_owned();
        plan.process_with_scratch(
            transposed.as_slice_mut().expect("standard layout"),
            &mut scratch,
        );
        data.assign(&transposed.t());
        debug_assert_eq!(data.dim(), (n, n));
    }

    fn check_same(&self, other: &Grid) -> Result<()> {
        if self.n() == other.n() {
            Ok(())
        } else {
            Err(Error::GridMismatch(self.n(), other.n()))
        }
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n() == other.n()
    }
}

impl Eq for Grid {}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("n", &self.n()).finish()
    }
}

/// Truncated Fourier coefficients of a real scalar field.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    coeffs: Array2<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: &Grid) -> Self {
        let n = grid.n();
        Self {
            grid: grid.clone(),
            coeffs: Array2::zeros((n, n)),
        }
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        let mut f = Self::zeros(grid);
        f.coeffs[[0, 0]] = Complex64::new(value, 0.0);
        f
    }

    pub fn from_coeffs(grid: &Grid, coeffs: Array2<Complex64>) -> Result<Self> {
        let n = grid.n();
        if coeffs.dim() != (n, n) {
            return Err(Error::Config(format!(
                "coefficient array has shape {:?}, expected ({n}, {n})",
                coeffs.dim()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            coeffs: coeffs.as_standard_layout().into_owned(),
        })
    }

    /// Forward transform of real grid samples.
    pub fn forward_transform(samples: &Array2<f64>, grid: &Grid) -> Result<Self> {
        let n = grid.n();
        if samples.dim() != (n, n) {
            return Err(Error::Config(format!(
                "sample array has shape {:?}, expected ({n}, {n})",
                samples.dim()
            )));
        }
        if let Some(bad) = samples.iter().find(|v| !v.is_finite()) {
            return Err(Error::Config(format!("non-finite sample {bad}")));
        }
        Ok(Self::transform_unchecked(samples, grid))
    }

    fn transform_unchecked(samples: &Array2<f64>, grid: &Grid) -> Self {
        let mut coeffs = samples.mapv(|v| Complex64::new(v, 0.0));
        grid.fft2(&mut coeffs, false);
        let scale = 1.0 / (grid.n() * grid.n()) as f64;
        coeffs.mapv_inplace(|c| c * scale);
        Self {
            grid: grid.clone(),
            coeffs,
        }
    }

    /// Pseudo-spectral evaluation: transform samples and apply the 2/3 rule.
    pub fn from_samples_dealiased(samples: &Array2<f64>, grid: &Grid) -> Self {
        let mut f = Self::transform_unchecked(samples, grid);
        f.dealias_in_place();
        f
    }

    /// Samples `f(x_i, y_j)` on the grid.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.n();
        let samples = Array2::from_shape_fn((n, n), |(i, j)| f(grid.point(i), grid.point(j)));
        Self::transform_unchecked(&samples, grid)
    }

    /// Inverse transform to real grid samples.
    pub fn backward_transform(&self) -> Array2<f64> {
        let mut data = self.coeffs.clone();
        self.grid.fft2(&mut data, true);
        data.mapv(|c| c.re)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &Array2<Complex64> {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.coeffs
    }

    /// Coefficient of mode `(kx, ky)`; zero when not representable.
    pub fn coeff(&self, kx: i64, ky: i64) -> Complex64 {
        match (self.grid.index_of(kx), self.grid.index_of(ky)) {
            (Some(a), Some(b)) => self.coeffs[[a, b]],
            _ => Complex64::default(),
        }
    }

    /// Set mode `k` to `value` and `-k` to its conjugate.
    pub fn set_mode(&mut self, kx: i64, ky: i64, value: Complex64) {
        let (a, b) = match (self.grid.index_of(kx), self.grid.index_of(ky)) {
            (Some(a), Some(b)) => (a, b),
            _ => return,
        };
        self.coeffs[[a, b]] = value;
        let (ra, rb) = (self.grid.reflect(a), self.grid.reflect(b));
        self.coeffs[[ra, rb]] = value.conj();
        if (ra, rb) == (a, b) {
            self.coeffs[[a, b]] = Complex64::new(value.re, 0.0);
        }
    }

    /// Spatial mean; exactly the zero coefficient.
    #[inline]
    pub fn mean(&self) -> f64 {
        self.coeffs[[0, 0]].re
    }

    /// Apply a Fourier multiplier `m(kx, ky)` mode by mode.
    pub fn map_multiplier(&self, m: impl Fn(i64, i64) -> Complex64) -> Self {
        let ks = self.grid.wavenumbers();
        let mut out = self.clone();
        for ((a, b), c) in out.coeffs.indexed_iter_mut() {
            *c *= m(ks[a], ks[b]);
        }
        out
    }

    /// Same as [`map_multiplier`](Self::map_multiplier) for real multipliers.
    pub fn map_real_multiplier(&self, m: impl Fn(i64, i64) -> f64) -> Self {
        let ks = self.grid.wavenumbers();
        let mut out = self.clone();
        for ((a, b), c) in out.coeffs.indexed_iter_mut() {
            *c *= m(ks[a], ks[b]);
        }
        out
    }

    pub fn laplacian(&self) -> Self {
        self.map_real_multiplier(|kx, ky| -((kx * kx + ky * ky) as f64))
    }

    pub fn bilaplacian(&self) -> Self {
        self.map_real_multiplier(|kx, ky| {
            let k2 = (kx * kx + ky * ky) as f64;
            k2 * k2
        })
    }

    /// Partial derivative along axis 0 (x) or 1 (y). Nyquist modes are zeroed.
    pub fn partial(&self, axis: usize) -> Self {
        let g = &self.grid;
        let mut out = self.clone();
        for ((a, b), c) in out.coeffs.indexed_iter_mut() {
            let idx = if axis == 0 { a } else { b };
            if g.is_nyquist(idx) {
                *c = Complex64::default();
            } else {
                *c *= I * g.wavenumber(idx) as f64;
            }
        }
        out
    }

    pub fn gradient(&self) -> SpectralVectorField {
        SpectralVectorField {
            x: self.partial(0),
            y: self.partial(1),
        }
    }

    pub fn dealias(&self) -> Self {
        let mut out = self.clone();
        out.dealias_in_place();
        out
    }

    pub fn dealias_in_place(&mut self) {
        let n = self.grid.n() as i64;
        let ks = self.grid.wavenumbers();
        for ((a, b), c) in self.coeffs.indexed_iter_mut() {
            if 3 * ks[a].abs() > n || 3 * ks[b].abs() > n {
                *c = Complex64::default();
            }
        }
    }

    /// True when every mode outside the 2/3 cutoff is exactly zero.
    pub fn is_dealiased(&self) -> bool {
        let ks = self.grid.wavenumbers();
        self.coeffs
            .indexed_iter()
            .all(|((a, b), c)| self.grid.retained(ks[a], ks[b]) || *c == Complex64::default())
    }

    /// `(2π)² Σ_k w_s(k) |f̂_k|²`, square-rooted, with `w_0 = 1` and
    /// `w_s(k) = 1 + |k|^{2s}` for `s ≥ 1`.
    pub fn sobolev_norm(&self, s: u32) -> f64 {
        self.sobolev_norm_sq(s).sqrt()
    }

    pub fn sobolev_norm_sq(&self, s: u32) -> f64 {
        let ks = self.grid.wavenumbers();
        let sum: f64 = self
            .coeffs
            .indexed_iter()
            .map(|((a, b), c)| {
                let w = if s == 0 {
                    1.0
                } else {
                    let k2 = (ks[a] * ks[a] + ks[b] * ks[b]) as f64;
                    1.0 + k2.powi(s as i32)
                };
                w * c.norm_sqr()
            })
            .sum();
        DOMAIN_AREA * sum
    }

    pub fn l2_norm(&self) -> f64 {
        self.sobolev_norm(0)
    }

    /// `‖∇f‖²_{L²}` from coefficients.
    pub fn gradient_norm_sq(&self) -> f64 {
        let ks = self.grid.wavenumbers();
        let sum: f64 = self
            .coeffs
            .indexed_iter()
            .map(|((a, b), c)| {
                if self.grid.is_nyquist(a) || self.grid.is_nyquist(b) {
                    // derivative operators drop Nyquist modes
                    let kx = if self.grid.is_nyquist(a) { 0 } else { ks[a] };
                    let ky = if self.grid.is_nyquist(b) { 0 } else { ks[b] };
                    return ((kx * kx + ky * ky) as f64) * c.norm_sqr();
                }
                ((ks[a] * ks[a] + ks[b] * ks[b]) as f64) * c.norm_sqr()
            })
            .sum();
        DOMAIN_AREA * sum
    }

    /// L² inner product `∫ f g`.
    pub fn inner(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        let sum: f64 = Zip::from(&self.coeffs)
            .and(&other.coeffs)
            .fold(0.0, |acc, a, b| acc + (a.conj() * b).re);
        DOMAIN_AREA * sum
    }

    /// Dealiased pseudo-spectral product.
    pub fn product(&self, other: &Self) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        let a = self.backward_transform();
        let b = other.backward_transform();
        Self::from_samples_dealiased(&(a * b), &self.grid)
    }

    /// Zero-pad or truncate onto another grid. Modes on the Nyquist line of
    /// either grid are dropped.
    pub fn resample(&self, grid: &Grid) -> Self {
        let mut out = Self::zeros(grid);
        let src = &self.grid;
        let ks = src.wavenumbers();
        for ((a, b), c) in self.coeffs.indexed_iter() {
            if src.is_nyquist(a) || src.is_nyquist(b) {
                continue;
            }
            if let (Some(ta), Some(tb)) = (grid.index_of(ks[a]), grid.index_of(ks[b])) {
                if grid.is_nyquist(ta) || grid.is_nyquist(tb) {
                    continue;
                }
                out.coeffs[[ta, tb]] = *c;
            }
        }
        out
    }

    /// `max_k |f̂_{−k} − conj(f̂_k)|`; zero for the transform of a real field.
    pub fn reality_defect(&self) -> f64 {
        let g = &self.grid;
        self.coeffs
            .indexed_iter()
            .map(|((a, b), c)| (self.coeffs[[g.reflect(a), g.reflect(b)]] - c.conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_sample(&self) -> f64 {
        self.backward_transform()
            .iter()
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            coeffs: &self.coeffs * factor,
        }
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        debug_assert_eq!(self.grid, other.grid);
        self.coeffs.scaled_add(Complex64::new(alpha, 0.0), &other.coeffs);
    }

    pub fn check_grid(&self, other: &Self) -> Result<()> {
        self.grid.check_same(&other.grid)
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: Self) -> SpectralField {
        debug_assert_eq!(self.grid, rhs.grid);
        SpectralField {
            grid: self.grid.clone(),
            coeffs: &self.coeffs + &rhs.coeffs,
        }
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: Self) -> SpectralField {
        debug_assert_eq!(self.grid, rhs.grid);
        SpectralField {
            grid: self.grid.clone(),
            coeffs: &self.coeffs - &rhs.coeffs,
        }
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, rhs: f64) -> SpectralField {
        self.scale(rhs)
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;
    fn neg(self) -> SpectralField {
        self.scale(-1.0)
    }
}

/// Symmetric 2×2 tensor of scalar fields, `t[i][j]`.
pub type TensorField = [[SpectralField; 2]; 2];

/// Pair of scalar fields on a shared grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralVectorField {
    pub x: SpectralField,
    pub y: SpectralField,
}

impl SpectralVectorField {
    pub fn new(x: SpectralField, y: SpectralField) -> Result<Self> {
        x.check_grid(&y)?;
        Ok(Self { x, y })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            x: SpectralField::zeros(grid),
            y: SpectralField::zeros(grid),
        }
    }

    pub fn constant(grid: &Grid, cx: f64, cy: f64) -> Self {
        Self {
            x: SpectralField::constant(grid, cx),
            y: SpectralField::constant(grid, cy),
        }
    }

    pub fn from_fn(
        grid: &Grid,
        fx: impl Fn(f64, f64) -> f64,
        fy: impl Fn(f64, f64) -> f64,
    ) -> Self {
        Self {
            x: SpectralField::from_fn(grid, fx),
            y: SpectralField::from_fn(grid, fy),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.x.grid()
    }

    pub fn component(&self, axis: usize) -> &SpectralField {
        if axis == 0 {
            &self.x
        } else {
            &self.y
        }
    }

    pub fn map(&self, f: impl Fn(&SpectralField) -> SpectralField) -> Self {
        Self {
            x: f(&self.x),
            y: f(&self.y),
        }
    }

    /// `i k·v̂_k`, Nyquist modes dropped.
    pub fn divergence(&self) -> SpectralField {
        &self.x.partial(0) + &self.y.partial(1)
    }

    pub fn laplacian(&self) -> Self {
        self.map(SpectralField::laplacian)
    }

    pub fn dealias(&self) -> Self {
        self.map(SpectralField::dealias)
    }

    /// Helmholtz–Leray projection onto `{k·v̂_k = 0, k ≠ 0}`.
    ///
    /// The mean (k = 0) is kept. Modes on a Nyquist line are dropped, since
    /// the projector is not reality-preserving there.
    pub fn leray_project(&self) -> Self {
        let g = self.grid();
        let ks = g.wavenumbers();
        let mut out = self.clone();
        let n = g.n();
        for a in 0..n {
            for b in 0..n {
                if a == 0 && b == 0 {
                    continue;
                }
                if g.is_nyquist(a) || g.is_nyquist(b) {
                    out.x.coeffs[[a, b]] = Complex64::default();
                    out.y.coeffs[[a, b]] = Complex64::default();
                    continue;
                }
                let (kx, ky) = (ks[a] as f64, ks[b] as f64);
                let k2 = kx * kx + ky * ky;
                let vx = self.x.coeffs[[a, b]];
                let vy = self.y.coeffs[[a, b]];
                let kv = (vx * kx + vy * ky) / k2;
                out.x.coeffs[[a, b]] = vx - kv * kx;
                out.y.coeffs[[a, b]] = vy - kv * ky;
            }
        }
        out
    }

    /// `D = ½(∇v + ∇vᵀ)`.
    pub fn symmetric_gradient(&self) -> TensorField {
        let dxx = self.x.partial(0);
        let dyy = self.y.partial(1);
        let off = (&self.x.partial(1) + &self.y.partial(0)).scale(0.5);
        [[dxx, off.clone()], [off, dyy]]
    }

    /// Full gradient tensor `g[i][j] = ∂_j v_i`.
    pub fn gradient(&self) -> TensorField {
        [
            [self.x.partial(0), self.x.partial(1)],
            [self.y.partial(0), self.y.partial(1)],
        ]
    }

    pub fn sobolev_norm(&self, s: u32) -> f64 {
        (self.x.sobolev_norm_sq(s) + self.y.sobolev_norm_sq(s)).sqrt()
    }

    pub fn l2_norm(&self) -> f64 {
        self.sobolev_norm(0)
    }

    pub fn inner(&self, other: &Self) -> f64 {
        self.x.inner(&other.x) + self.y.inner(&other.y)
    }

    pub fn mean(&self) -> [f64; 2] {
        [self.x.mean(), self.y.mean()]
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map(|c| c.scale(factor))
    }

    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        self.x.axpy(alpha, &other.x);
        self.y.axpy(alpha, &other.y);
    }

    pub fn resample(&self, grid: &Grid) -> Self {
        self.map(|c| c.resample(grid))
    }

    pub fn backward_transform(&self) -> [Array2<f64>; 2] {
        [self.x.backward_transform(), self.y.backward_transform()]
    }

    /// Largest `|k·v̂_k| / |k|` over nonzero modes.
    pub fn solenoidal_defect(&self) -> f64 {
        let g = self.grid();
        let ks = g.wavenumbers();
        let mut worst: f64 = 0.0;
        for ((a, b), vx) in self.x.coeffs.indexed_iter() {
            if a == 0 && b == 0 {
                continue;
            }
            let (kx, ky) = (ks[a] as f64, ks[b] as f64);
            let vy = self.y.coeffs[[a, b]];
            let dot = *vx * kx + vy * ky;
            worst = worst.max(dot.norm() / (kx * kx + ky * ky).sqrt());
        }
        worst
    }

    pub fn max_abs_sample(&self) -> f64 {
        let [ux, uy] = self.backward_transform();
        Zip::from(&ux)
            .and(&uy)
            .fold(0.0, |m: f64, a, b| m.max((a * a + b * b).sqrt()))
    }
}

impl Add for &SpectralVectorField {
    type Output = SpectralVectorField;
    fn add(self, rhs: Self) -> SpectralVectorField {
        SpectralVectorField {
            x: &self.x + &rhs.x,
            y: &self.y + &rhs.y,
        }
    }
}

impl Sub for &SpectralVectorField {
    type Output = SpectralVectorField;
    fn sub(self, rhs: Self) -> SpectralVectorField {
        SpectralVectorField {
            x: &self.x - &rhs.x,
            y: &self.y - &rhs.y,
        }
    }
}

/// `(2π)² Σ|f̂|²` of a tensor, i.e. `Σ_ij ‖t_ij‖²_{L²}`.
pub fn tensor_norm_sq(t: &TensorField) -> f64 {
    t.iter()
        .flat_map(|row| row.iter())
        .map(|c| c.sobolev_norm_sq(0))
        .sum()
}

/// Random real field with uniform coefficients on `max(|kx|,|ky|) <= kmax`.
///
/// Coefficients are drawn in a fixed order (kx ascending, then ky ascending,
/// real part before imaginary part) so a seeded generator reproduces the field.
pub fn random_band_limited(grid: &Grid, kmax: i64, rng: &mut impl rand::Rng) -> SpectralField {
    let mut f = SpectralField::zeros(grid);
    for kx in -kmax..=kmax {
        for ky in 0..=kmax {
            if ky == 0 && kx < 0 {
                continue;
            }
            let v = if kx == 0 && ky == 0 {
                Complex64::new(rng.gen_range(-1.0..1.0), 0.0)
            } else {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            };
            f.set_mode(kx, ky, v);
        }
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> Grid {
        Grid::new(n).unwrap()
    }

    /// Naive `n⁻² Σ_j f(x_j) e^{−ik·x_j}`.
    fn direct_coefficient(samples: &Array2<f64>, g: &Grid, kx: i64, ky: i64) -> Complex64 {
        let n = g.n();
        let mut acc = Complex64::default();
        for i in 0..n {
            for j in 0..n {
                let phase = -(kx as f64 * g.point(i) + ky as f64 * g.point(j));
                acc += Complex64::from_polar(samples[[i, j]], phase);
            }
        }
        acc / (n * n) as f64
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(6).is_err());
        assert!(Grid::new(9).is_err());
        assert!(Grid::new(8).is_ok());
        let g = grid(8);
        assert_eq!(g.wavenumbers(), &[0, 1, 2, 3, 4, -3, -2, -1]);
        assert_eq!(g.index_of(-3), Some(5));
        assert_eq!(g.index_of(-4), None);
    }

    #[test]
    fn forward_of_constant() {
        let g = grid(8);
        let f = SpectralField::forward_transform(&Array2::from_elem((8, 8), 2.5), &g).unwrap();
        assert_relative_eq!(f.coeffs[[0, 0]].re, 2.5, epsilon = 1e-15);
        let rest: f64 = f.coeffs.iter().skip(1).map(|c| c.norm()).sum();
        assert!(rest < 1e-14);
    }

    #[test]
    fn forward_of_cosine_matches_direct_summation() {
        let g = grid(8);
        let samples = Array2::from_shape_fn((8, 8), |(i, _)| g.point(i).cos());
        let f = SpectralField::forward_transform(&samples, &g).unwrap();
        for &kx in g.wavenumbers() {
            for &ky in g.wavenumbers() {
                let direct = direct_coefficient(&samples, &g, kx, ky);
                assert!((f.coeff(kx, ky) - direct).norm() < 1e-14);
            }
        }
        assert!((f.coeff(1, 0) - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert!((f.coeff(-1, 0) - Complex64::new(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn forward_rejects_bad_input() {
        let g = grid(8);
        assert!(SpectralField::forward_transform(&Array2::zeros((8, 6)), &g).is_err());
        let mut s = Array2::zeros((8, 8));
        s[[1, 1]] = f64::NAN;
        assert!(SpectralField::forward_transform(&s, &g).is_err());
    }

    #[test]
    fn round_trip_random() {
        let g = grid(32);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let samples = Array2::from_shape_fn((32, 32), |_| rng.gen_range(-1.0..1.0));
        let back = SpectralField::forward_transform(&samples, &g)
            .unwrap()
            .backward_transform();
        let num: f64 = (&back - &samples).iter().map(|v| v * v).sum::<f64>().sqrt();
        let den: f64 = samples.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(num / den <= 1e-13, "relative error {}", num / den);
        let mean = samples.mean().unwrap();
        let f = SpectralField::forward_transform(&samples, &g).unwrap();
        assert_relative_eq!(f.mean(), mean, epsilon = 1e-15);
    }

    #[test]
    fn differential_operators_on_cosine() {
        let g = grid(16);
        let mut c = SpectralField::zeros(&g);
        c.set_mode(1, 0, Complex64::new(0.5, 0.0));
        let grad = c.gradient();
        let expected = SpectralField::from_fn(&g, |x, _| -x.sin());
        assert!((&grad.x - &expected).l2_norm() < 1e-13);
        assert!(grad.y.l2_norm() < 1e-13);
        assert!((&c.laplacian() + &c).l2_norm() < 1e-13);
        assert!((&c.bilaplacian() - &c).l2_norm() < 1e-13);
        let k = SpectralField::constant(&g, 3.0);
        assert!(k.gradient().l2_norm() == 0.0);
        let v = SpectralVectorField::from_fn(&g, |_, y| y.cos(), |_, _| 0.0);
        assert!(v.divergence().l2_norm() < 1e-14);
    }

    #[test]
    fn divergence_of_gradient_is_laplacian() {
        let g = grid(16);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_band_limited(&g, 7, &mut rng);
        let lhs = f.gradient().divergence();
        assert!((&lhs - &f.laplacian()).l2_norm() < 1e-12);
    }

    #[test]
    fn dealias_examples() {
        let g = grid(12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_band_limited(&g, 4, &mut rng);
        assert_eq!(f.dealias(), f);
        let mut hi = SpectralField::zeros(&g);
        hi.set_mode(5, 0, Complex64::new(1.0, 0.0));
        assert_eq!(hi.dealias().l2_norm(), 0.0);
        let full = random_band_limited(&g, 5, &mut rng);
        assert_eq!(full.dealias().dealias(), full.dealias());
        assert!(full.dealias().is_dealiased());
        assert!(!full.is_dealiased());
    }

    #[test]
    fn sobolev_norm_of_cosine_by_direct_summation() {
        // oracle: sum the weights over the two nonzero modes by hand
        let oracle = |s: u32| {
            let w = if s == 0 { 1.0 } else { 1.0 + 1f64.powi(2 * s as i32) };
            (DOMAIN_AREA * 2.0 * w * 0.25).sqrt()
        };
        let g = grid(16);
        let c = SpectralField::from_fn(&g, |x, _| x.cos());
        for s in 0..4 {
            assert_relative_eq!(c.sobolev_norm(s), oracle(s), max_relative = 1e-14);
        }
        assert_relative_eq!(c.sobolev_norm(1).powi(2), 4.0 * PI * PI, max_relative = 1e-14);
        assert_relative_eq!(c.sobolev_norm(0).powi(2), 2.0 * PI * PI, max_relative = 1e-14);
        let k = SpectralField::constant(&g, -1.5);
        assert_relative_eq!(k.l2_norm(), TWO_PI * 1.5, max_relative = 1e-15);
        assert_relative_eq!(k.sobolev_norm(3), TWO_PI * 1.5, max_relative = 1e-15);
    }

    #[test]
    fn mean_examples() {
        let g = grid(8);
        assert_eq!(SpectralField::constant(&g, 0.7).mean(), 0.7);
        let c = SpectralField::from_fn(&g, |x, _| x.cos());
        assert!(c.mean().abs() < 1e-16);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_band_limited(&g, 2, &mut rng);
        let b = random_band_limited(&g, 2, &mut rng);
        assert_relative_eq!((&a + &b).mean(), a.mean() + b.mean(), epsilon = 1e-15);
    }

    #[test]
    fn leray_examples() {
        let g = grid(16);
        let grad = SpectralField::from_fn(&g, |x, _| x.sin()).gradient();
        assert!(grad.leray_project().l2_norm() < 1e-14);
        let tg = SpectralVectorField::from_fn(
            &g,
            |x, y| x.sin() * y.cos(),
            |x, y| -x.cos() * y.sin(),
        );
        assert!((&tg.leray_project() - &tg).l2_norm() < 1e-14);
        let c = SpectralVectorField::constant(&g, 0.3, -1.2);
        assert_eq!(c.leray_project(), c);
    }

    #[test]
    fn symmetric_gradient_examples() {
        let g = grid(16);
        let c = SpectralVectorField::constant(&g, 1.0, 2.0);
        assert!(tensor_norm_sq(&c.symmetric_gradient()) == 0.0);
        let v = SpectralVectorField::from_fn(&g, |_, y| y.sin(), |_, _| 0.0);
        let d = v.symmetric_gradient();
        let half_cos = SpectralField::from_fn(&g, |_, y| 0.5 * y.cos());
        assert!(d[0][0].l2_norm() < 1e-14 && d[1][1].l2_norm() < 1e-14);
        assert!((&d[0][1] - &half_cos).l2_norm() < 1e-14);
        assert_eq!(d[0][1], d[1][0]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = SpectralVectorField::new(random_band_limited(&g, 5, &mut rng), random_band_limited(&g, 5, &mut rng)).unwrap();
        let d = w.symmetric_gradient();
        assert!((&(&d[0][0] + &d[1][1]) - &w.divergence()).l2_norm() < 1e-13);
    }

    #[test]
    fn operators_preserve_reality() {
        let g = grid(16);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let samples = Array2::from_shape_fn((16, 16), |_| rng.gen_range(-1.0..1.0));
        let f = SpectralField::forward_transform(&samples, &g).unwrap();
        assert!(f.reality_defect() < 1e-15);
        let v = SpectralVectorField::new(f.clone(), f.laplacian()).unwrap();
        for h in [f.laplacian(), f.bilaplacian(), f.dealias(), v.divergence()] {
            assert!(h.reality_defect() < 1e-12);
        }
        let p = v.leray_project();
        assert!(p.x.reality_defect() < 1e-12 && p.y.reality_defect() < 1e-12);
        let gr = f.gradient();
        assert!(gr.x.reality_defect() < 1e-12 && gr.y.reality_defect() < 1e-12);
    }

    #[test]
    fn resample_preserves_band_limited_fields() {
        let g8 = grid(16);
        let g16 = grid(32);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = random_band_limited(&g8, 5, &mut rng);
        let up = f.resample(&g16);
        assert_relative_eq!(up.l2_norm(), f.l2_norm(), max_relative = 1e-14);
        assert_eq!(up.resample(&g8), f);
    }

    fn solenoidal_strategy() -> impl Strategy<Value = u64> {
        any::<u64>()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn leray_idempotent_and_orthogonal(seed in solenoidal_strategy()) {
            let g = grid(16);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = SpectralVectorField::new(random_band_limited(&g, 7, &mut rng), random_band_limited(&g, 7, &mut rng)).unwrap();
            let q = random_band_limited(&g, 7, &mut rng);
            let p = v.leray_project();
            let pp = p.leray_project();
            prop_assert!((&pp - &p).l2_norm() <= 1e-13 * p.l2_norm().max(1.0));
            prop_assert!(p.inner(&q.gradient()).abs() <= 1e-12 * v.l2_norm() * q.sobolev_norm(1));
            prop_assert!(p.solenoidal_defect() < 1e-13);
        }

        #[test]
        fn parseval_matches_quadrature(seed in any::<u64>()) {
            let g = grid(24);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_band_limited(&g, 8, &mut rng);
            let quad: f64 = f.backward_transform().iter().map(|v| v * v).sum::<f64>() * g.cell_area();
            let spectral = f.sobolev_norm_sq(0);
            prop_assert!((quad - spectral).abs() <= 1e-12 * spectral);
        }

        #[test]
        fn korn_bound_on_solenoidal_fields(seed in any::<u64>()) {
            let g = grid(16);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = SpectralVectorField::new(random_band_limited(&g, 5, &mut rng), random_band_limited(&g, 5, &mut rng))
                .unwrap()
                .leray_project();
            let grad = tensor_norm_sq(&u.gradient()).sqrt();
            let sym = tensor_norm_sq(&u.symmetric_gradient()).sqrt();
            prop_assert!(grad <= 2f64.sqrt() * sym + 1e-10);
        }

        #[test]
        fn operators_commute_with_dealias(seed in any::<u64>()) {
            let g = grid(24);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_band_limited(&g, 8, &mut rng);
            prop_assert_eq!(f.laplacian().dealias(), f.dealias().laplacian());
            prop_assert_eq!(f.gradient().dealias(), f.dealias().gradient());
            prop_assert_eq!(f.bilaplacian().dealias(), f.dealias().bilaplacian());
        }
    }
}
