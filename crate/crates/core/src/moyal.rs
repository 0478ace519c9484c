//! The Moyal ⋆-product on periodic grids and the nonlinearities built from it.
//!
//! For plane waves the product is exact: `e^{ikx} ⋆ e^{iqx} = e^{-(i/2) k×q} e^{i(k+q)x}`
//! with `k×q = k_I θ^{IJ} q_J`. On a grid this becomes a twisted convolution of
//! the mode amplitudes. Because `k×(p-k) = k×p`, the twist for a fixed output
//! mode `p` factorizes over the axes of `k`, which keeps the direct O(M²) sum
//! cheap. A vanishing θ takes an FFT convolution path instead.
//!
//! Products are exact and then projected onto the symmetric lattice
//! `|m_i| ≤ N_i/2 - 1`; nothing is wrapped around, so there is no aliasing.
//! θ is dimensionless: coordinates are measured in units of `L`, which is
//! carried on [`ThetaTensor`] as metadata only.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectral::{self, ComplexField, Grid, MAX_DIM};

/// Constant antisymmetric noncommutativity tensor θ^{IJ}.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaTensor {
    n: usize,
    entries: Vec<f64>,
    length_scale: f64,
}

impl ThetaTensor {
    /// Builds a tensor from its rows. Antisymmetry is checked exactly.
    pub fn new(rows: Vec<Vec<f64>>, length_scale: f64) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidParameter {
                name: "theta",
                reason: "empty tensor".into(),
            });
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.len(),
            });
        }
        if !(length_scale.is_finite() && length_scale > 0.0) {
            return Err(Error::InvalidParameter {
                name: "length_scale",
                reason: format!("must be positive, got {length_scale}"),
            });
        }
        for i in 0..n {
            for j in 0..n {
                let v = rows[i][j];
                if !v.is_finite() || v != -rows[j][i] || (i == j && v != 0.0) {
                    return Err(Error::NotAntisymmetric { row: i, col: j });
                }
            }
        }
        Ok(ThetaTensor {
            n,
            entries: rows.into_iter().flatten().collect(),
            length_scale,
        })
    }

    pub fn zero(n: usize) -> Self {
        ThetaTensor {
            n,
            entries: vec![0.0; n * n],
            length_scale: 1.0,
        }
    }

    /// `[[0, θ₀], [-θ₀, 0]]`.
    pub fn planar(theta0: f64) -> Result<Self> {
        Self::new(vec![vec![0.0, theta0], vec![-theta0, 0.0]], 1.0)
    }

    /// Tensor whose only nonzero entries are the given upper-triangle pairs
    /// `(I, J, θ^{IJ})` with `I < J`, plus their antisymmetric partners.
    pub fn from_pairs(n: usize, pairs: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows = vec![vec![0.0; n]; n];
        for &(i, j, v) in pairs {
            if i >= n || j >= n || i == j {
                return Err(Error::InvalidParameter {
                    name: "theta",
                    reason: format!("pair ({i}, {j}) invalid for n = {n}"),
                });
            }
            rows[i][j] = v;
            rows[j][i] = -v;
        }
        Self::new(rows, 1.0)
    }

    pub fn with_length_scale(mut self, length_scale: f64) -> Result<Self> {
        if !(length_scale.is_finite() && length_scale > 0.0) {
            return Err(Error::InvalidParameter {
                name: "length_scale",
                reason: format!("must be positive, got {length_scale}"),
            });
        }
        self.length_scale = length_scale;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&v| v == 0.0)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    /// Largest |θ^{IJ}|.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        ThetaTensor {
            n: self.n,
            entries: self.entries.iter().map(|v| v * factor).collect(),
            length_scale: self.length_scale,
        }
    }
}

/// `k × q = k_I θ^{IJ} q_J`.
pub fn cross(k: &[f64], q: &[f64], theta: &ThetaTensor) -> Result<f64> {
    for v in [k, q] {
        if v.len() != theta.n {
            return Err(Error::DimensionMismatch {
                expected: theta.n,
                found: v.len(),
            });
        }
    }
    // Pairing (i, j) with (j, i) makes k×k vanish exactly.
    let mut acc = 0.0;
    for i in 0..theta.n {
        for j in i + 1..theta.n {
            acc += theta.get(i, j) * (k[i] * q[j] - k[j] * q[i]);
        }
    }
    Ok(acc)
}

/// `amplitude · e^{i k·x}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PlaneWave {
    pub wavevector: Vec<f64>,
    pub amplitude: Complex64,
}

impl PlaneWave {
    pub fn new(wavevector: Vec<f64>, amplitude: Complex64) -> Self {
        PlaneWave {
            wavevector,
            amplitude,
        }
    }

    pub fn dim(&self) -> usize {
        self.wavevector.len()
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        let phase: f64 = self.wavevector.iter().zip(x).map(|(k, x)| k * x).sum();
        self.amplitude * Complex64::from_polar(1.0, phase)
    }
}

/// Exact ⋆-product of two plane waves.
pub fn star_plane_waves(a: &PlaneWave, b: &PlaneWave, theta: &ThetaTensor) -> Result<PlaneWave> {
    let twist = cross(&a.wavevector, &b.wavevector, theta)?;
    Ok(PlaneWave {
        wavevector: a
            .wavevector
            .iter()
            .zip(&b.wavevector)
            .map(|(x, y)| x + y)
            .collect(),
        amplitude: a.amplitude * b.amplitude * Complex64::from_polar(1.0, -0.5 * twist),
    })
}

/// Dense block of mode amplitudes indexed by signed mode numbers
/// `lo[i] ..= hi[i]`, row-major.
#[derive(Clone, Debug)]
pub(crate) struct ModeBox {
    pub(crate) dim: usize,
    pub(crate) lo: [i64; MAX_DIM],
    pub(crate) hi: [i64; MAX_DIM],
    pub(crate) strides: [usize; MAX_DIM],
    pub(crate) values: Vec<Complex64>,
}

impl ModeBox {
    pub(crate) fn zeros(dim: usize, lo: [i64; MAX_DIM], hi: [i64; MAX_DIM]) -> Self {
        let mut strides = [0usize; MAX_DIM];
        let mut len = 1usize;
        for axis in (0..dim).rev() {
            strides[axis] = len;
            len *= (hi[axis] - lo[axis] + 1).max(0) as usize;
        }
        ModeBox {
            dim,
            lo,
            hi,
            strides,
            values: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    fn extent(&self, axis: usize) -> usize {
        (self.hi[axis] - self.lo[axis] + 1).max(0) as usize
    }

    fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn unravel(&self, mut flat: usize) -> [i64; MAX_DIM] {
        let mut m = [0i64; MAX_DIM];
        for axis in (0..self.dim).rev() {
            let e = self.extent(axis);
            m[axis] = self.lo[axis] + (flat % e) as i64;
            flat /= e;
        }
        m
    }

    /// Modes of a raw grid spectrum with `|m_i| ≤ band[i]`.
    pub(crate) fn from_raw(grid: &Grid, raw: &[Complex64], band: &[usize]) -> Self {
        let dim = grid.dim();
        let mut lo = [0i64; MAX_DIM];
        let mut hi = [0i64; MAX_DIM];
        for axis in 0..dim {
            let half = (grid.points()[axis] / 2) as i64;
            let b = band[axis] as i64;
            lo[axis] = (-b).max(-half);
            hi[axis] = b.min(half - 1);
        }
        let mut out = ModeBox::zeros(dim, lo, hi);
        let strides = grid.strides();
        for (flat, v) in out.values.iter_mut().enumerate() {
            let m = {
                let mut m = [0i64; MAX_DIM];
                let mut rem = flat;
                for axis in (0..dim).rev() {
                    let e = (hi[axis] - lo[axis] + 1) as usize;
                    m[axis] = lo[axis] + (rem % e) as i64;
                    rem /= e;
                }
                m
            };
            let idx: usize = (0..dim)
                .map(|axis| {
                    strides[axis]
                        * grid
                            .mode_index(axis, m[axis])
                            .expect("box lies inside the lattice")
                })
                .sum();
            *v = raw[idx];
        }
        out
    }

    /// Scatters the modes with `|m_i| ≤ band[i]` that lie on the grid lattice
    /// into a raw spectrum, multiplied by `scale`.
    pub(crate) fn to_raw(&self, grid: &Grid, band: &[usize], scale: f64) -> Vec<Complex64> {
        let mut raw = vec![Complex64::new(0.0, 0.0); grid.len()];
        let strides = grid.strides();
        'modes: for (flat, v) in self.values.iter().enumerate() {
            let m = self.unravel(flat);
            let mut idx = 0;
            for axis in 0..self.dim {
                if m[axis].unsigned_abs() as usize > band[axis] {
                    continue 'modes;
                }
                match grid.mode_index(axis, m[axis]) {
                    Some(i) => idx += strides[axis] * i,
                    None => continue 'modes,
                }
            }
            raw[idx] = v * scale;
        }
        raw
    }

    /// Elementwise complex conjugate with `m → -m`, i.e. the modes of `f*`.
    pub(crate) fn conj_reflect(&self) -> Self {
        let mut lo = [0i64; MAX_DIM];
        let mut hi = [0i64; MAX_DIM];
        for axis in 0..self.dim {
            lo[axis] = -self.hi[axis];
            hi[axis] = -self.lo[axis];
        }
        let mut out = ModeBox::zeros(self.dim, lo, hi);
        let len = self.values.len();
        // Reversing the row-major order reflects every axis at once.
        for (i, v) in self.values.iter().enumerate() {
            out.values[len - 1 - i] = v.conj();
        }
        out
    }
}

/// θ in lattice units: `θ̂^{IJ} = s_I θ^{IJ} s_J` with `s_I = 2π/L_I`, so that
/// `k×q = m_I θ̂^{IJ} n_J` for integer modes `m`, `n`.
fn lattice_theta(grid: &Grid, theta: &ThetaTensor) -> [[f64; MAX_DIM]; MAX_DIM] {
    let mut out = [[0.0; MAX_DIM]; MAX_DIM];
    let s: Vec<f64> = grid
        .lengths()
        .iter()
        .map(|l| 2.0 * std::f64::consts::PI / l)
        .collect();
    for i in 0..grid.dim() {
        for j in 0..grid.dim() {
            out[i][j] = s[i] * theta.get(i, j) * s[j];
        }
    }
    out
}

/// `c(p) = Σ_k a(k) b(p-k) e^{-(i/2) k×p}` for every `p` in the output box.
fn twisted_convolution(
    a: &ModeBox,
    b: &ModeBox,
    theta_hat: &[[f64; MAX_DIM]; MAX_DIM],
    out_lo: [i64; MAX_DIM],
    out_hi: [i64; MAX_DIM],
) -> ModeBox {
    let dim = a.dim;
    let mut out = ModeBox::zeros(dim, out_lo, out_hi);
    if out.is_empty() || a.is_empty() || b.is_empty() {
        return out;
    }
    let last = dim - 1;
    out.values = (0..out.values.len())
        .into_par_iter()
        .map_init(
            || vec![Vec::<Complex64>::new(); dim],
            |tables, flat| {
                let p = out.unravel(flat);
                // k ranges such that p - k stays inside b.
                let mut lo = [0i64; MAX_DIM];
                let mut hi = [0i64; MAX_DIM];
                for axis in 0..dim {
                    lo[axis] = a.lo[axis].max(p[axis] - b.hi[axis]);
                    hi[axis] = a.hi[axis].min(p[axis] - b.lo[axis]);
                    if lo[axis] > hi[axis] {
                        return Complex64::new(0.0, 0.0);
                    }
                }
                for axis in 0..dim {
                    let u: f64 = (0..dim).map(|j| theta_hat[axis][j] * p[j] as f64).sum();
                    let table = &mut tables[axis];
                    table.clear();
                    table.extend(
                        (lo[axis]..=hi[axis])
                            .map(|k| Complex64::from_polar(1.0, -0.5 * k as f64 * u)),
                    );
                }
                let mut acc = Complex64::new(0.0, 0.0);
                let mut k = lo;
                loop {
                    let mut phase = Complex64::new(1.0, 0.0);
                    let mut ia = 0usize;
                    let mut ib = 0usize;
                    for axis in 0..last {
                        phase *= tables[axis][(k[axis] - lo[axis]) as usize];
                        ia += a.strides[axis] * (k[axis] - a.lo[axis]) as usize;
                        ib += b.strides[axis] * (p[axis] - k[axis] - b.lo[axis]) as usize;
                    }
                    let ia0 = ia + (lo[last] - a.lo[last]) as usize;
                    let ib0 = ib + (p[last] - lo[last] - b.lo[last]) as usize;
                    let count = (hi[last] - lo[last] + 1) as usize;
                    let mut inner = Complex64::new(0.0, 0.0);
                    for t in 0..count {
                        inner += a.values[ia0 + t] * b.values[ib0 - t] * tables[last][t];
                    }
                    acc += phase * inner;
                    // Odometer over the outer axes.
                    let mut axis = last;
                    loop {
                        if axis == 0 {
                            return acc;
                        }
                        axis -= 1;
                        if k[axis] < hi[axis] {
                            k[axis] += 1;
                            break;
                        }
                        k[axis] = lo[axis];
                    }
                }
            },
        )
        .collect();
    out
}

fn convolution_grid(points: Vec<usize>) -> Arc<Grid> {
    static CACHE: OnceLock<Mutex<HashMap<Vec<usize>, Arc<Grid>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("convolution grid cache poisoned");
    Arc::clone(guard.entry(points.clone()).or_insert_with(|| {
        let lengths = vec![1.0; points.len()];
        Grid::new(points, lengths).expect("convolution sizes are even and ≥ 4")
    }))
}

/// Untwisted convolution via FFT on a lattice large enough to avoid wrap-around.
fn plain_convolution(
    a: &ModeBox,
    b: &ModeBox,
    out_lo: [i64; MAX_DIM],
    out_hi: [i64; MAX_DIM],
) -> ModeBox {
    let dim = a.dim;
    let mut out = ModeBox::zeros(dim, out_lo, out_hi);
    if out.is_empty() || a.is_empty() || b.is_empty() {
        return out;
    }
    let sizes: Vec<usize> = (0..dim)
        .map(|axis| {
            let n = (a.extent(axis) + b.extent(axis)).max(4);
            n + n % 2
        })
        .collect();
    let conv = convolution_grid(sizes.clone());
    let embed = |m: &ModeBox| {
        let mut data = vec![Complex64::new(0.0, 0.0); conv.len()];
        let strides = conv.strides();
        for (flat, v) in m.values.iter().enumerate() {
            let k = m.unravel(flat);
            let idx: usize = (0..dim)
                .map(|axis| strides[axis] * k[axis].rem_euclid(sizes[axis] as i64) as usize)
                .sum();
            data[idx] = *v;
        }
        conv.dft_forward(&mut data);
        data
    };
    let fa = embed(a);
    let mut fb = embed(b);
    fb.iter_mut().zip(&fa).for_each(|(x, y)| *x *= y);
    conv.dft_inverse(&mut fb);
    let strides = conv.strides();
    let (sum_lo, sum_hi): (Vec<i64>, Vec<i64>) = (0..dim)
        .map(|axis| (a.lo[axis] + b.lo[axis], a.hi[axis] + b.hi[axis]))
        .unzip();
    for flat in 0..out.values.len() {
        let p = out.unravel(flat);
        if (0..dim).any(|axis| p[axis] < sum_lo[axis] || p[axis] > sum_hi[axis]) {
            continue;
        }
        let idx: usize = (0..dim)
            .map(|axis| strides[axis] * p[axis].rem_euclid(sizes[axis] as i64) as usize)
            .sum();
        out.values[flat] = fb[idx];
    }
    out
}

/// Exact ⋆-product of two mode boxes, restricted to `|p_i| ≤ out_band[i]`.
pub(crate) fn star_boxes(
    grid: &Grid,
    theta: &ThetaTensor,
    a: &ModeBox,
    b: &ModeBox,
    out_band: &[usize],
) -> ModeBox {
    let dim = grid.dim();
    let mut lo = [0i64; MAX_DIM];
    let mut hi = [0i64; MAX_DIM];
    for axis in 0..dim {
        let band = out_band[axis] as i64;
        lo[axis] = (a.lo[axis] + b.lo[axis]).max(-band);
        hi[axis] = (a.hi[axis] + b.hi[axis]).min(band);
    }
    if theta.is_zero() {
        plain_convolution(a, b, lo, hi)
    } else {
        twisted_convolution(a, b, &lattice_theta(grid, theta), lo, hi)
    }
}

fn check_operands(f: &ComplexField, g: Option<&ComplexField>, theta: &ThetaTensor) -> Result<()> {
    if let Some(g) = g {
        if !f.same_grid(g) {
            return Err(Error::GridMismatch);
        }
    }
    if f.grid().dim() != theta.n() {
        return Err(Error::DimensionMismatch {
            expected: f.grid().dim(),
            found: theta.n(),
        });
    }
    Ok(())
}

pub(crate) fn full_band(grid: &Grid) -> Vec<usize> {
    grid.points().iter().map(|n| n / 2).collect()
}

/// Grid ⋆-product `f ⋆ g`, projected onto the symmetric lattice.
pub fn star_product(
    f: &ComplexField,
    g: &ComplexField,
    theta: &ThetaTensor,
) -> Result<ComplexField> {
    check_operands(f, Some(g), theta)?;
    let grid = f.grid();
    let full = full_band(grid);
    let a = ModeBox::from_raw(grid, &f.raw_spectrum(), &full);
    let b = ModeBox::from_raw(grid, &g.raw_spectrum(), &full);
    let out_band = grid.symmetric_band();
    let c = star_boxes(grid, theta, &a, &b, &out_band);
    let raw = c.to_raw(grid, &out_band, 1.0 / grid.len() as f64);
    Ok(ComplexField::from_raw_spectrum(grid, raw))
}

/// Modes of `ψ* ⋆ ψ ⋆ ψ` with `|p_i| ≤ out_band[i]`, from the modes of ψ.
/// The intermediate `ψ* ⋆ ψ` is kept in full, so the result is the exact
/// triple product restricted to the output band.
pub(crate) fn star_cubic_boxes(
    grid: &Grid,
    theta: &ThetaTensor,
    psi: &ModeBox,
    out_band: &[usize],
) -> ModeBox {
    let conj = psi.conj_reflect();
    let unbounded: Vec<usize> = (0..grid.dim())
        .map(|axis| (conj.hi[axis] + psi.hi[axis]).max(-(conj.lo[axis] + psi.lo[axis])) as usize)
        .collect();
    let inner = star_boxes(grid, theta, &conj, psi, &unbounded);
    let result = star_boxes(grid, theta, &inner, psi, out_band);
    #[cfg(feature = "verify-association")]
    {
        let right = star_boxes(grid, theta, psi, psi, &unbounded);
        let other = star_boxes(grid, theta, &conj, &right, out_band);
        let scale = result.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (x, y) in result.values.iter().zip(&other.values) {
            assert!(
                (x - y).norm() <= 1e-8 * scale.max(1e-300),
                "ψ*⋆ψ⋆ψ groupings disagree"
            );
        }
    }
    result
}

/// `ψ* ⋆ ψ ⋆ ψ`, projected onto the symmetric lattice.
pub fn star_cubic(psi: &ComplexField, theta: &ThetaTensor) -> Result<ComplexField> {
    check_operands(psi, None, theta)?;
    let grid = psi.grid();
    let full = full_band(grid);
    let modes = ModeBox::from_raw(grid, &psi.raw_spectrum(), &full);
    let out_band = grid.symmetric_band();
    let c = star_cubic_boxes(grid, theta, &modes, &out_band);
    let m = grid.len() as f64;
    let raw = c.to_raw(grid, &out_band, 1.0 / (m * m));
    Ok(ComplexField::from_raw_spectrum(grid, raw))
}

/// `∂_I f θ^{IJ} ∂_J g` evaluated pointwise with spectral derivatives.
pub fn gradient_cross(
    f: &ComplexField,
    g: &ComplexField,
    theta: &ThetaTensor,
) -> Result<ComplexField> {
    check_operands(f, Some(g), theta)?;
    let dim = f.grid().dim();
    let df: Vec<ComplexField> = (0..dim)
        .map(|axis| spectral::gradient(f, axis))
        .collect::<Result<_>>()?;
    let dg: Vec<ComplexField> = (0..dim)
        .map(|axis| spectral::gradient(g, axis))
        .collect::<Result<_>>()?;
    let mut acc = vec![Complex64::new(0.0, 0.0); f.grid().len()];
    for i in 0..dim {
        for j in 0..dim {
            let t = theta.get(i, j);
            if t == 0.0 {
                continue;
            }
            for ((slot, a), b) in acc.iter_mut().zip(df[i].values()).zip(dg[j].values()) {
                *slot += a * t * b;
            }
        }
    }
    ComplexField::new(f.grid(), acc)
}

/// First-order expansion `|ψ|²ψ + i (∇ψ* × ∇ψ) ψ`, evaluated pointwise.
pub fn star_cubic_first_order(psi: &ComplexField, theta: &ThetaTensor) -> Result<ComplexField> {
    check_operands(psi, None, theta)?;
    let twist = gradient_cross(&psi.conj(), psi, theta)?;
    psi.zip_with(&twist, |p, t| (p.norm_sqr() + Complex64::i() * t) * p)
}

/// The n-fold ⋆-power of the linear function `z = c_I X^I`, as a polynomial
/// in `z`.
///
/// Uses `z ⋆ P(z) = z P(z) + (i/2) κ P'(z)` with `κ = c×c`, which follows from
/// `∂_J z = c_J`. Antisymmetry forces `κ = 0`, so the power is commutative.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearStarPower {
    pub degree: usize,
    /// Coefficient of `z^j` at index `j`.
    pub coefficients: Vec<Complex64>,
    pub kappa: f64,
}

impl LinearStarPower {
    /// True when the result is exactly `z^n`.
    pub fn is_commutative_power(&self) -> bool {
        self.coefficients.iter().enumerate().all(|(j, &c)| {
            if j == self.degree {
                c == Complex64::new(1.0, 0.0)
            } else {
                c == Complex64::new(0.0, 0.0)
            }
        })
    }
}

pub fn star_power_linear(c: &[f64], n: usize, theta: &ThetaTensor) -> Result<LinearStarPower> {
    if n < 1 {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: "star power needs n ≥ 1".into(),
        });
    }
    let kappa = cross(c, c, theta)?;
    let half_i_kappa = Complex64::new(0.0, 0.5 * kappa);
    let mut poly = vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
    for _ in 1..n {
        let mut next = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
        for (j, &coef) in poly.iter().enumerate() {
            next[j + 1] += coef;
            if j > 0 {
                next[j - 1] += half_i_kappa * coef * j as f64;
            }
        }
        poly = next;
    }
    Ok(LinearStarPower {
        degree: n,
        coefficients: poly,
        kappa,
    })
}

/// Taylor coefficients (in `z`) of `sin_⋆(c_I X^I)` truncated after `terms`
/// odd powers.
pub fn star_sine_linear(c: &[f64], terms: usize, theta: &ThetaTensor) -> Result<Vec<Complex64>> {
    let degree = 2 * terms.max(1) - 1;
    let mut out = vec![Complex64::new(0.0, 0.0); degree + 1];
    let mut factorial = 1.0;
    for j in 1..=terms.max(1) {
        let power = 2 * j - 1;
        if power > 1 {
            factorial *= ((power - 1) * power) as f64;
        }
        let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
        let p = star_power_linear(c, power, theta)?;
        for (slot, coef) in out.iter_mut().zip(&p.coefficients) {
            *slot += coef * (sign / factorial);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{dealias, random_band_limited, random_real_band_limited};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn rel(a: &ComplexField, b: &ComplexField) -> f64 {
        a.sub(b).unwrap().norm() / b.norm()
    }

    #[test]
    fn theta_validation() {
        assert!(ThetaTensor::new(vec![vec![0.0, 1.0], vec![-1.0, 0.0]], 1.0).is_ok());
        assert_eq!(
            ThetaTensor::new(vec![vec![0.0, 1.0], vec![-0.5, 0.0]], 1.0),
            Err(Error::NotAntisymmetric { row: 0, col: 1 })
        );
        assert_eq!(
            ThetaTensor::new(vec![vec![1e-300, 0.0], vec![0.0, 0.0]], 1.0),
            Err(Error::NotAntisymmetric { row: 0, col: 0 })
        );
        assert!(ThetaTensor::new(vec![vec![0.0, 1.0]], 1.0).is_err());
        assert!(ThetaTensor::planar(0.3)
            .unwrap()
            .with_length_scale(0.0)
            .is_err());
        let t = ThetaTensor::from_pairs(3, &[(0, 2, 0.7)]).unwrap();
        assert_eq!(t.get(2, 0), -0.7);
        assert!(ThetaTensor::from_pairs(3, &[(1, 1, 0.7)]).is_err());
    }

    #[test]
    fn cross_unit_and_antisymmetry() {
        let theta = ThetaTensor::planar(1.0).unwrap();
        assert_eq!(cross(&[1.0, 0.0], &[0.0, 1.0], &theta).unwrap(), 1.0);
        assert_eq!(cross(&[0.3, -2.0], &[0.3, -2.0], &theta).unwrap(), 0.0);
        assert!(cross(&[1.0], &[0.0, 1.0], &theta).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        use rand::Rng;
        let theta3 = ThetaTensor::from_pairs(3, &[(0, 1, 0.4), (0, 2, -1.3), (1, 2, 2.2)]).unwrap();
        for _ in 0..50 {
            let k: Vec<f64> = (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let q: Vec<f64> = (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let a = cross(&k, &q, &theta3).unwrap();
            let b = cross(&q, &k, &theta3).unwrap();
            assert!((a + b).abs() <= 1e-14 * a.abs().max(1.0));
            assert_eq!(cross(&k, &k, &theta3).unwrap(), 0.0);
        }
    }

    #[test]
    fn plane_wave_products() {
        let zero = ThetaTensor::zero(2);
        let a = PlaneWave::new(vec![1.0, 0.0], Complex64::new(2.0, 1.0));
        let b = PlaneWave::new(vec![0.0, 1.0], Complex64::new(0.5, -1.0));
        let ab = star_plane_waves(&a, &b, &zero).unwrap();
        assert_eq!(ab.wavevector, vec![1.0, 1.0]);
        assert_eq!(ab.amplitude, a.amplitude * b.amplitude);

        let theta0 = 0.37;
        let theta = ThetaTensor::planar(theta0).unwrap();
        let ex = PlaneWave::new(vec![1.0, 0.0], Complex64::new(1.0, 0.0));
        let ey = PlaneWave::new(vec![0.0, 1.0], Complex64::new(1.0, 0.0));
        let p = star_plane_waves(&ex, &ey, &theta).unwrap();
        assert!((p.amplitude - Complex64::from_polar(1.0, -theta0 / 2.0)).norm() < 1e-15);
        let q = star_plane_waves(&ey, &ex, &theta).unwrap();
        assert!((q.amplitude - Complex64::from_polar(1.0, theta0 / 2.0)).norm() < 1e-15);
    }

    #[test]
    fn plane_wave_associativity_matches_phase_bookkeeping() {
        // (a⋆b)⋆c and a⋆(b⋆c) both carry e^{-(i/2)(a×b + a×c + b×c)}.
        let theta = ThetaTensor::from_pairs(3, &[(0, 1, 0.9), (0, 2, -0.4), (1, 2, 1.7)]).unwrap();
        let a = PlaneWave::new(vec![1.0, -2.0, 0.5], Complex64::new(0.3, 0.2));
        let b = PlaneWave::new(vec![0.0, 3.0, -1.0], Complex64::new(-1.1, 0.7));
        let c = PlaneWave::new(vec![2.0, 1.0, 1.0], Complex64::new(0.4, -0.9));
        let left =
            star_plane_waves(&star_plane_waves(&a, &b, &theta).unwrap(), &c, &theta).unwrap();
        let right =
            star_plane_waves(&a, &star_plane_waves(&b, &c, &theta).unwrap(), &theta).unwrap();
        let total = cross(&a.wavevector, &b.wavevector, &theta).unwrap()
            + cross(&a.wavevector, &c.wavevector, &theta).unwrap()
            + cross(&b.wavevector, &c.wavevector, &theta).unwrap();
        let expected =
            a.amplitude * b.amplitude * c.amplitude * Complex64::from_polar(1.0, -0.5 * total);
        assert_eq!(left.wavevector, right.wavevector);
        assert!((left.amplitude - expected).norm() < 1e-14);
        assert!((right.amplitude - expected).norm() < 1e-14);
    }

    #[test]
    fn grid_product_of_lattice_modes_matches_plane_waves() {
        let grid = Grid::new(vec![16, 16], vec![2.0 * PI, 4.0 * PI]).unwrap();
        let theta = ThetaTensor::planar(0.8).unwrap();
        let a = PlaneWave::new(
            vec![grid.mode_wavenumber(0, 3), grid.mode_wavenumber(1, -2)],
            Complex64::new(1.0, 0.5),
        );
        let b = PlaneWave::new(
            vec![grid.mode_wavenumber(0, -1), grid.mode_wavenumber(1, 5)],
            Complex64::new(-0.3, 0.8),
        );
        let fa = ComplexField::from_fn(&grid, |x| a.eval(x)).unwrap();
        let fb = ComplexField::from_fn(&grid, |x| b.eval(x)).unwrap();
        let prod = star_product(&fa, &fb, &theta).unwrap();
        let exact = star_plane_waves(&a, &b, &theta).unwrap();
        let expected = ComplexField::from_fn(&grid, |x| exact.eval(x)).unwrap();
        assert!(prod.sub(&expected).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn zero_theta_reduces_to_pointwise_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let grid = Grid::new(vec![32, 32], vec![2.0 * PI, 2.0 * PI]).unwrap();
        let band = grid.dealias_band();
        let f = random_band_limited(&grid, &band, &mut rng);
        let g = random_band_limited(&grid, &band, &mut rng);
        let star = dealias(&star_product(&f, &g, &ThetaTensor::zero(2)).unwrap());
        let point = dealias(&f.mul(&g).unwrap());
        assert!(rel(&star, &point) < 1e-10);
    }

    #[test]
    fn fft_path_agrees_with_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let grid = Grid::new(vec![8, 12], vec![1.0, 2.0]).unwrap();
        let full = full_band(&grid);
        let f = random_band_limited(&grid, &full, &mut rng);
        let g = random_band_limited(&grid, &full, &mut rng);
        let a = ModeBox::from_raw(&grid, &f.raw_spectrum(), &full);
        let b = ModeBox::from_raw(&grid, &g.raw_spectrum(), &full);
        let lo = [-9, -11, 0, 0];
        let hi = [7, 10, 0, 0];
        let fast = plain_convolution(&a, &b, lo, hi);
        let direct = twisted_convolution(&a, &b, &[[0.0; MAX_DIM]; MAX_DIM], lo, hi);
        let scale = direct.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (x, y) in fast.values.iter().zip(&direct.values) {
            assert!((x - y).norm() < 1e-12 * scale);
        }
    }

    #[test]
    fn cubic_of_plane_wave_is_itself() {
        let grid = Grid::new(vec![16, 16], vec![2.0 * PI, 2.0 * PI]).unwrap();
        let theta = ThetaTensor::planar(1.3).unwrap();
        let psi = ComplexField::from_fn(&grid, |x| {
            Complex64::from_polar(1.0, 2.0 * x[0] - 3.0 * x[1])
        })
        .unwrap();
        let out = star_cubic(&psi, &theta).unwrap();
        assert!(out.sub(&psi).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn cubic_at_zero_theta_is_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let grid = Grid::new(vec![32, 16], vec![2.0 * PI, 3.0]).unwrap();
        // 3K ≤ N/2 - 1 keeps |ψ|²ψ alias-free on the grid.
        let psi = random_band_limited(&grid, &[5, 2], &mut rng);
        let star = star_cubic(&psi, &ThetaTensor::zero(2)).unwrap();
        let point = psi.map(|v| v.norm_sqr() * v);
        assert!(rel(&star, &point) < 1e-10);
    }

    #[test]
    fn first_order_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let grid = Grid::new(vec![16, 16], vec![2.0 * PI, 2.0 * PI]).unwrap();
        let psi = random_band_limited(&grid, &[3, 3], &mut rng);
        let cubic = psi.map(|v| v.norm_sqr() * v);
        let at_zero = star_cubic_first_order(&psi, &ThetaTensor::zero(2)).unwrap();
        assert_eq!(at_zero, cubic);

        let real = random_real_band_limited(&grid, &[3, 3], &mut rng);
        let theta = ThetaTensor::planar(0.6).unwrap();
        let out = star_cubic_first_order(&real, &theta).unwrap();
        let cube = real.map(|v| v * v * v);
        assert!(out.sub(&cube).unwrap().max_abs() < 1e-12 * cube.max_abs());
    }

    #[test]
    fn operand_checks() {
        let g2 = Grid::new(vec![8, 8], vec![1.0, 1.0]).unwrap();
        let g1 = Grid::line(8, 1.0).unwrap();
        let f2 = ComplexField::zeros(&g2);
        let f1 = ComplexField::zeros(&g1);
        assert_eq!(
            star_product(&f2, &f2, &ThetaTensor::zero(3)).unwrap_err(),
            Error::DimensionMismatch {
                expected: 2,
                found: 3
            }
        );
        assert_eq!(
            star_product(&f1, &f2, &ThetaTensor::zero(1)).unwrap_err(),
            Error::GridMismatch
        );
        assert!(star_cubic(&f1, &ThetaTensor::zero(2)).is_err());
    }

    #[test]
    fn linear_star_powers_are_commutative() {
        let theta =
            ThetaTensor::from_pairs(4, &[(0, 2, 1.618), (1, 3, 0.7), (0, 1, -0.2)]).unwrap();
        assert!(star_power_linear(&[1.0, 0.0, 0.0, 0.0], 0, &theta).is_err());
        let one = star_power_linear(&[0.3, -1.0, 2.0, 0.5], 1, &theta).unwrap();
        assert!(one.is_commutative_power());
        for n in 2..12 {
            let p = star_power_linear(&[0.3, -1.0, 2.0, 0.5], n, &theta).unwrap();
            assert_eq!(p.kappa, 0.0);
            assert!(p.is_commutative_power(), "n = {n}");
        }
    }

    #[test]
    fn star_sine_of_coordinate_is_commutative_sine() {
        let theta = ThetaTensor::planar(1.618).unwrap();
        let coeffs = star_sine_linear(&[0.0, 1.0], 5, &theta).unwrap();
        let expected = [
            0.0,
            1.0,
            0.0,
            -1.0 / 6.0,
            0.0,
            1.0 / 120.0,
            0.0,
            -1.0 / 5040.0,
            0.0,
            1.0 / 362880.0,
        ];
        assert_eq!(coeffs.len(), expected.len());
        for (c, e) in coeffs.iter().zip(expected) {
            assert!((c.re - e).abs() < 1e-15 && c.im == 0.0);
        }
    }

    #[test]
    fn kappa_recurrence_generates_moyal_lower_terms() {
        // Exercise the recurrence with a hand-made κ ≠ 0 through its algebra:
        // z⋆z = z² + (i/2)κ and z⋆z⋆z = z³ + (3i/2)κ z.
        let kappa: f64 = 0.8;
        let half = Complex64::new(0.0, 0.5 * kappa);
        let mut poly = vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        for _ in 1..3 {
            let mut next = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
            for (j, &coef) in poly.iter().enumerate() {
                next[j + 1] += coef;
                if j > 0 {
                    next[j - 1] += half * coef * j as f64;
                }
            }
            poly = next;
        }
        assert!((poly[1] - 3.0 * half).norm() < 1e-15);
        assert_eq!(poly[3], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn trace_identity_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let grid = Grid::new(vec![16, 16], vec![2.0 * PI, 2.0 * PI]).unwrap();
        let band = grid.dealias_band();
        let f = random_band_limited(&grid, &band, &mut rng);
        let g = random_band_limited(&grid, &band, &mut rng);
        let theta = ThetaTensor::planar(1.0).unwrap();
        let fg = star_product(&f, &g, &theta).unwrap();
        let one = ComplexField::from_real_fn(&grid, |_| 1.0).unwrap();
        let lhs = spectral::l2_inner(&one, &fg).unwrap();
        let rhs = spectral::l2_inner(&f.conj(), &g).unwrap();
        assert!((lhs - rhs).norm() < 1e-10 * f.norm() * g.norm());
    }
}
