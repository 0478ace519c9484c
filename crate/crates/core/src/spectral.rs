//! Periodic grids, discrete Fourier transforms and band-limited field arithmetic.
//!
//! # Conventions
//!
//! * Samples are stored row-major with axis 0 slowest. The coordinate of sample
//!   `j` along axis `i` is `j * spacing(i)`, so every box starts at the origin.
//! * Mode storage follows the FFT order on every axis: index `j < N/2` holds the
//!   signed mode `m = j`, index `j >= N/2` holds `m = j - N`. The wavenumber of
//!   mode `m` on axis `i` is `2π m / L_i`, so the lattice is `m = -N/2 .. N/2-1`.
//! * [`forward_transform`] approximates the symmetric continuous transform
//!   `f̃(k) = (2π)^{-d/2} ∫ f(x) e^{-ikx} dx` by a Riemann sum:
//!   `f̃(k) = ΔV (2π)^{-d/2} Σ_x f(x) e^{-ikx}` with `ΔV` the cell volume.
//!   [`inverse_transform`] is the exact discrete inverse,
//!   `f(x) = Δk (2π)^{-d/2} Σ_k f̃(k) e^{ikx}` with `Δk = Π 2π/L_i`.
//! * With these factors Parseval reads `ΔV Σ_x |f|² = Δk Σ_k |f̃|²`, i.e.
//!   [`l2_inner`]`(f, f)` equals [`Spectrum::norm_squared`].
//!
//! Internally the kernels work with the raw DFT `F(m) = Σ_x f(x) e^{-ikx}`
//! (no scale factor) and its inverse `f(x) = M⁻¹ Σ_m F(m) e^{ikx}`.

use std::fmt;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 4;

/// Uniform periodic sampling of a box `[0, L_0) × … × [0, L_{d-1})`.
pub struct Grid {
    points: Vec<usize>,
    lengths: Vec<f64>,
    plans: OnceLock<Plans>,
}

struct Plans {
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl Grid {
    pub fn new(points: Vec<usize>, lengths: Vec<f64>) -> Result<Arc<Grid>> {
        if points.is_empty() || points.len() > MAX_DIM {
            return Err(Error::InvalidGrid(format!(
                "dimension must be between 1 and {MAX_DIM}, got {}",
                points.len()
            )));
        }
        if points.len() != lengths.len() {
            return Err(Error::InvalidGrid(format!(
                "{} point counts but {} box lengths",
                points.len(),
                lengths.len()
            )));
        }
        for (axis, &n) in points.iter().enumerate() {
            if n < 4 || n % 2 != 0 {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis}: point count {n} must be even and at least 4"
                )));
            }
        }
        for (axis, &l) in lengths.iter().enumerate() {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis}: box length {l} must be positive and finite"
                )));
            }
        }
        Ok(Arc::new(Grid {
            points,
            lengths,
            plans: OnceLock::new(),
        }))
    }

    /// One-dimensional convenience constructor.
    pub fn line(points: usize, length: f64) -> Result<Arc<Grid>> {
        Grid::new(vec![points], vec![length])
    }

    pub fn dim(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.points[axis] as f64
    }

    /// Total number of samples.
    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    /// Volume of one cell of the wavenumber lattice, `Π 2π/L_i`.
    pub fn mode_volume(&self) -> f64 {
        self.lengths
            .iter()
            .map(|l| 2.0 * std::f64::consts::PI / l)
            .product()
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dim()];
        for axis in (0..self.dim().saturating_sub(1)).rev() {
            strides[axis] = strides[axis + 1] * self.points[axis + 1];
        }
        strides
    }

    /// Multi-index of a flat sample (or mode) index.
    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for axis in (0..self.dim()).rev() {
            idx[axis] = flat % self.points[axis];
            flat /= self.points[axis];
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.points)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn coordinate(&self, axis: usize, index: usize) -> f64 {
        index as f64 * self.spacing(axis)
    }

    /// Position of a flat sample index.
    pub fn position(&self, flat: usize) -> Vec<f64> {
        self.unravel(flat)
            .iter()
            .enumerate()
            .map(|(axis, &i)| self.coordinate(axis, i))
            .collect()
    }

    /// Signed mode number stored at storage index `index` of `axis`.
    pub fn signed_mode(&self, axis: usize, index: usize) -> i64 {
        let n = self.points[axis];
        if index < n / 2 {
            index as i64
        } else {
            index as i64 - n as i64
        }
    }

    /// Storage index of signed mode `m`, if it lies on the lattice.
    pub fn mode_index(&self, axis: usize, m: i64) -> Option<usize> {
        let half = (self.points[axis] / 2) as i64;
        if m < -half || m >= half {
            None
        } else if m >= 0 {
            Some(m as usize)
        } else {
            Some((m + self.points[axis] as i64) as usize)
        }
    }

    pub fn wavenumber(&self, axis: usize, index: usize) -> f64 {
        self.mode_wavenumber(axis, self.signed_mode(axis, index))
    }

    pub fn mode_wavenumber(&self, axis: usize, m: i64) -> f64 {
        2.0 * std::f64::consts::PI * m as f64 / self.lengths[axis]
    }

    /// Wavevector of a flat mode index.
    pub fn wavevector(&self, flat: usize) -> Vec<f64> {
        self.unravel(flat)
            .iter()
            .enumerate()
            .map(|(axis, &i)| self.wavenumber(axis, i))
            .collect()
    }

    /// `|k|²` for every mode in storage order.
    pub fn wavenumber_squared(&self) -> Vec<f64> {
        (0..self.len())
            .map(|flat| self.wavevector(flat).iter().map(|k| k * k).sum())
            .collect()
    }

    /// Largest retained |m| per axis under the 2/3 rule: `3K < N`, so the
    /// aliases of any pairwise product of band-K fields fall outside the band.
    pub fn dealias_band(&self) -> Vec<usize> {
        self.points.iter().map(|&n| (n - 1) / 3).collect()
    }

    /// The lattice without its Nyquist modes, `|m| ≤ N/2 - 1`.
    pub fn symmetric_band(&self) -> Vec<usize> {
        self.points.iter().map(|&n| n / 2 - 1).collect()
    }

    /// Storage-order mask of modes with `|m_i| ≤ band[i]` on every axis.
    pub fn band_mask(&self, band: &[usize]) -> Vec<bool> {
        let mut mask = vec![false; self.len()];
        for (flat, slot) in mask.iter_mut().enumerate() {
            let idx = self.unravel(flat);
            *slot = idx
                .iter()
                .enumerate()
                .all(|(axis, &i)| self.signed_mode(axis, i).unsigned_abs() as usize <= band[axis]);
        }
        mask
    }

    fn plans(&self) -> &Plans {
        self.plans.get_or_init(|| {
            let mut planner = FftPlanner::new();
            Plans {
                forward: self
                    .points
                    .iter()
                    .map(|&n| planner.plan_fft_forward(n))
                    .collect(),
                inverse: self
                    .points
                    .iter()
                    .map(|&n| planner.plan_fft_inverse(n))
                    .collect(),
            }
        })
    }

    /// Raw forward DFT in place: `F(m) = Σ_x f(x) e^{-ikx}`.
    pub(crate) fn dft_forward(&self, data: &mut [Complex64]) {
        let plans = &self.plans().forward;
        for axis in 0..self.dim() {
            transform_axis(data, &self.points, axis, plans[axis].as_ref());
        }
    }

    /// Raw inverse DFT in place, normalized: `f(x) = M⁻¹ Σ_m F(m) e^{ikx}`.
    pub(crate) fn dft_inverse(&self, data: &mut [Complex64]) {
        let plans = &self.plans().inverse;
        for axis in 0..self.dim() {
            transform_axis(data, &self.points, axis, plans[axis].as_ref());
        }
        let scale = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }
}

fn transform_axis(data: &mut [Complex64], points: &[usize], axis: usize, fft: &dyn Fft<f64>) {
    let n = points[axis];
    let inner: usize = points[axis + 1..].iter().product();
    if inner == 1 {
        fft.process(data);
        return;
    }
    let outer: usize = points[..axis].iter().product();
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for o in 0..outer {
        for i in 0..inner {
            let base = o * n * inner + i;
            for (j, v) in line.iter_mut().enumerate() {
                *v = data[base + j * inner];
            }
            fft.process_with_scratch(&mut line, &mut scratch);
            for (j, v) in line.iter().enumerate() {
                data[base + j * inner] = *v;
            }
        }
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.points == other.points && self.lengths == other.lengths
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("points", &self.points)
            .field("lengths", &self.lengths)
            .finish()
    }
}

fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

fn check_finite(values: &[Complex64], what: &'static str) -> Result<()> {
    match values
        .iter()
        .position(|v| !(v.re.is_finite() && v.im.is_finite()))
    {
        Some(index) => Err(Error::NonFinite { what, index }),
        None => Ok(()),
    }
}

/// Complex samples on a [`Grid`].
#[derive(Clone, Debug)]
pub struct ComplexField {
    grid: Arc<Grid>,
    values: Vec<Complex64>,
}

impl PartialEq for ComplexField {
    fn eq(&self, other: &Self) -> bool {
        same_grid(&self.grid, &other.grid) && self.values == other.values
    }
}

impl ComplexField {
    pub fn new(grid: &Arc<Grid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        check_finite(&values, "field")?;
        Ok(ComplexField {
            grid: Arc::clone(grid),
            values,
        })
    }

    pub(crate) fn from_raw(grid: &Arc<Grid>, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        ComplexField {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self::from_raw(grid, vec![Complex64::new(0.0, 0.0); grid.len()])
    }

    /// Samples `f` at every grid position.
    pub fn from_fn(grid: &Arc<Grid>, mut f: impl FnMut(&[f64]) -> Complex64) -> Result<Self> {
        let values = (0..grid.len())
            .map(|flat| f(&grid.position(flat)))
            .collect();
        Self::new(grid, values)
    }

    pub fn from_real_fn(grid: &Arc<Grid>, mut f: impl FnMut(&[f64]) -> f64) -> Result<Self> {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn same_grid(&self, other: &ComplexField) -> bool {
        same_grid(&self.grid, &other.grid)
    }

    pub fn is_finite(&self) -> bool {
        check_finite(&self.values, "field").is_ok()
    }

    pub fn conj(&self) -> Self {
        Self::from_raw(&self.grid, self.values.iter().map(|v| v.conj()).collect())
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self::from_raw(&self.grid, self.values.iter().map(|v| v * factor).collect())
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self::from_raw(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(
        &self,
        other: &ComplexField,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<Self> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        Ok(Self::from_raw(
            &self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn add(&self, other: &ComplexField) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ComplexField) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Pointwise (commutative) product.
    pub fn mul(&self, other: &ComplexField) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    /// `sqrt(∫|f|²)`.
    pub fn norm(&self) -> f64 {
        let sum: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        (sum * self.grid.cell_volume()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Raw DFT of the samples (see module docs).
    pub(crate) fn raw_spectrum(&self) -> Vec<Complex64> {
        let mut data = self.values.clone();
        self.grid.dft_forward(&mut data);
        data
    }

    pub(crate) fn from_raw_spectrum(grid: &Arc<Grid>, mut data: Vec<Complex64>) -> Self {
        grid.dft_inverse(&mut data);
        Self::from_raw(grid, data)
    }
}

/// Fourier coefficients `f̃(k)` in storage order, scaled per the module docs.
#[derive(Clone, Debug)]
pub struct Spectrum {
    grid: Arc<Grid>,
    modes: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(grid: &Arc<Grid>, modes: Vec<Complex64>) -> Result<Self> {
        if modes.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                found: modes.len(),
            });
        }
        check_finite(&modes, "spectrum")?;
        Ok(Spectrum {
            grid: Arc::clone(grid),
            modes,
        })
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Spectrum {
            grid: Arc::clone(grid),
            modes: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn modes(&self) -> &[Complex64] {
        &self.modes
    }

    pub fn modes_mut(&mut self) -> &mut [Complex64] {
        &mut self.modes
    }

    /// Amplitude of the signed mode multi-index `m`, if on the lattice.
    pub fn mode(&self, m: &[i64]) -> Option<Complex64> {
        self.flat_index(m).map(|flat| self.modes[flat])
    }

    pub fn flat_index(&self, m: &[i64]) -> Option<usize> {
        if m.len() != self.grid.dim() {
            return None;
        }
        let idx: Option<Vec<usize>> = m
            .iter()
            .enumerate()
            .map(|(axis, &mi)| self.grid.mode_index(axis, mi))
            .collect();
        idx.map(|idx| self.grid.ravel(&idx))
    }

    /// `Δk Σ_k |f̃(k)|²`, equal to `∫|f|²` by Parseval.
    pub fn norm_squared(&self) -> f64 {
        self.modes.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.mode_volume()
    }

    fn forward_scale(grid: &Grid) -> f64 {
        grid.cell_volume() / (2.0 * std::f64::consts::PI).powf(grid.dim() as f64 / 2.0)
    }
}

pub fn forward_transform(f: &ComplexField) -> Result<Spectrum> {
    check_finite(&f.values, "field")?;
    let scale = Spectrum::forward_scale(&f.grid);
    let mut modes = f.raw_spectrum();
    modes.iter_mut().for_each(|v| *v *= scale);
    Ok(Spectrum {
        grid: Arc::clone(&f.grid),
        modes,
    })
}

pub fn inverse_transform(s: &Spectrum) -> Result<ComplexField> {
    check_finite(&s.modes, "spectrum")?;
    let scale = 1.0 / Spectrum::forward_scale(&s.grid);
    let data = s.modes.iter().map(|v| v * scale).collect();
    Ok(ComplexField::from_raw_spectrum(&s.grid, data))
}

/// Riemann sum of `∫ f*(x) g(x) dx`.
pub fn l2_inner(f: &ComplexField, g: &ComplexField) -> Result<Complex64> {
    if !f.same_grid(g) {
        return Err(Error::GridMismatch);
    }
    let sum: Complex64 = f
        .values
        .iter()
        .zip(&g.values)
        .map(|(a, b)| a.conj() * b)
        .sum();
    Ok(sum * f.grid.cell_volume())
}

/// Spectral derivative along `axis`.
pub fn gradient(f: &ComplexField, axis: usize) -> Result<ComplexField> {
    let grid = &f.grid;
    if axis >= grid.dim() {
        return Err(Error::AxisOutOfRange {
            axis,
            dim: grid.dim(),
        });
    }
    let mut data = f.raw_spectrum();
    let stride = grid.strides()[axis];
    let n = grid.points()[axis];
    for (flat, v) in data.iter_mut().enumerate() {
        let k = grid.wavenumber(axis, (flat / stride) % n);
        *v *= Complex64::new(0.0, k);
    }
    Ok(ComplexField::from_raw_spectrum(grid, data))
}

/// Spectral Laplacian.
pub fn laplacian(f: &ComplexField) -> ComplexField {
    let grid = &f.grid;
    let k2 = grid.wavenumber_squared();
    let mut data = f.raw_spectrum();
    data.iter_mut().zip(&k2).for_each(|(v, k)| *v *= -k);
    ComplexField::from_raw_spectrum(grid, data)
}

/// Zeroes every mode outside `|m_i| ≤ band[i]`.
pub fn band_limit(f: &ComplexField, band: &[usize]) -> ComplexField {
    let mask = f.grid.band_mask(band);
    let mut data = f.raw_spectrum();
    apply_mask(&mut data, &mask);
    ComplexField::from_raw_spectrum(&f.grid, data)
}

/// 2/3-rule truncation.
pub fn dealias(f: &ComplexField) -> ComplexField {
    band_limit(f, &f.grid.dealias_band())
}

pub(crate) fn apply_mask(data: &mut [Complex64], mask: &[bool]) {
    data.iter_mut()
        .zip(mask)
        .filter(|(_, &keep)| !keep)
        .for_each(|(v, _)| *v = Complex64::new(0.0, 0.0));
}

/// Field with independent uniform random amplitudes in `[-1, 1]²` on the
/// modes `|m_i| ≤ band[i]` and zero elsewhere.
pub fn random_band_limited<R: Rng + ?Sized>(
    grid: &Arc<Grid>,
    band: &[usize],
    rng: &mut R,
) -> ComplexField {
    let mask = grid.band_mask(band);
    let data = mask
        .iter()
        .map(|&keep| {
            if keep {
                Complex64::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0))
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    ComplexField::from_raw_spectrum(grid, data)
}

/// Real-valued variant of [`random_band_limited`].
pub fn random_real_band_limited<R: Rng + ?Sized>(
    grid: &Arc<Grid>,
    band: &[usize],
    rng: &mut R,
) -> ComplexField {
    random_band_limited(grid, band, rng).map(|v| Complex64::new(v.re, 0.0))
}
