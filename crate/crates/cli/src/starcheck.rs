//! ⋆-product property table on random band-limited fields.

use std::f64::consts::PI;
use std::sync::Arc;

use anyhow::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use starlattice::moyal::cross;
use starlattice::spectral::{l2_inner, random_band_limited};
use starlattice::{star_cubic, star_product, Complex64, ComplexField, Grid, ThetaTensor};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckRow {
    pub theta0: f64,
    pub property: &'static str,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub const POINTS: usize = 32;
pub const TRIALS: usize = 3;

fn rel(a: &ComplexField, b: &ComplexField) -> f64 {
    a.sub(b).expect("same grid").norm() / b.norm()
}

fn row(theta0: f64, property: &'static str, residual: f64, tolerance: f64) -> CheckRow {
    CheckRow {
        theta0,
        property,
        residual,
        tolerance,
        pass: residual < tolerance,
    }
}

fn plane_wave(grid: &Arc<Grid>, modes: [i64; 2], amplitude: Complex64) -> (Vec<f64>, ComplexField) {
    let k: Vec<f64> = (0..2).map(|a| grid.mode_wavenumber(a, modes[a])).collect();
    let field = ComplexField::from_fn(grid, |x| {
        amplitude * Complex64::from_polar(1.0, k[0] * x[0] + k[1] * x[1])
    })
    .expect("finite");
    (k, field)
}

/// Rows for one planar θ on a `POINTS²` grid. The associativity inputs use
/// half the symmetric band so the intermediate products are exact; at θ = 0
/// two extra rows compare against the pointwise products.
pub fn check_theta(theta0: f64, seed: u64) -> Result<Vec<CheckRow>> {
    let grid = Grid::new(vec![POINTS, POINTS], vec![2.0 * PI, 2.0 * PI])?;
    let theta = ThetaTensor::planar(theta0)?;
    let dealias = grid.dealias_band();
    let half: Vec<usize> = grid.symmetric_band().iter().map(|b| b / 2).collect();
    let third: Vec<usize> = grid.symmetric_band().iter().map(|b| b / 3).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let one = ComplexField::from_fn(&grid, |_| Complex64::new(1.0, 0.0))?;

    let (mut trace, mut assoc, mut herm, mut pointwise, mut cubic) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..TRIALS {
        let f = random_band_limited(&grid, &dealias, &mut rng);
        let g = random_band_limited(&grid, &dealias, &mut rng);
        let fg = star_product(&f, &g, &theta)?;
        let star = l2_inner(&one, &fg)?;
        let plain = l2_inner(&one, &f.mul(&g)?)?;
        trace = trace.max((star - plain).norm() / (f.norm() * g.norm()));
        let gf = star_product(&g.conj(), &f.conj(), &theta)?;
        herm = herm.max(rel(&fg.conj(), &gf));

        let a = random_band_limited(&grid, &half, &mut rng);
        let b = random_band_limited(&grid, &half, &mut rng);
        let c = random_band_limited(&grid, &half, &mut rng);
        let left = star_product(&star_product(&a, &b, &theta)?, &c, &theta)?;
        let right = star_product(&a, &star_product(&b, &c, &theta)?, &theta)?;
        assoc = assoc.max(rel(&left, &right));

        if theta0 == 0.0 {
            pointwise = pointwise.max(rel(&star_product(&a, &b, &theta)?, &a.mul(&b)?));
            let psi = random_band_limited(&grid, &third, &mut rng);
            let direct = psi.map(|z| z * z.norm_sqr());
            cubic = cubic.max(rel(&star_cubic(&psi, &theta)?, &direct));
        }
    }

    let mut twist: f64 = 0.0;
    for (m, n) in [
        ([1, 0], [0, 1]),
        ([2, -3], [-1, 4]),
        ([5, 2], [3, -7]),
        ([-6, 1], [2, 6]),
    ] {
        let (k, wk) = plane_wave(&grid, m, Complex64::new(1.0, 0.0));
        let (q, wq) = plane_wave(&grid, n, Complex64::new(0.0, 1.0));
        let phase = Complex64::from_polar(1.0, -0.5 * cross(&k, &q, &theta)?);
        let sum = [m[0] + n[0], m[1] + n[1]];
        let (_, expected) = plane_wave(&grid, sum, Complex64::i() * phase);
        twist = twist.max(star_product(&wk, &wq, &theta)?.sub(&expected)?.max_abs());
    }

    let mut rows = vec![
        row(theta0, "trace", trace, 1e-10),
        row(theta0, "associativity", assoc, 1e-8),
        row(theta0, "hermiticity", herm, 1e-10),
        row(theta0, "plane-wave-twist", twist, 1e-12),
    ];
    if theta0 == 0.0 {
        rows.push(row(theta0, "pointwise-equivalence", pointwise, 1e-12));
        rows.push(row(theta0, "cubic-equivalence", cubic, 1e-12));
    }
    Ok(rows)
}

pub fn star_check(thetas: &[f64], seed: u64) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    for (i, &t) in thetas.iter().enumerate() {
        rows.extend(check_theta(t, seed.wrapping_add(i as u64))?);
    }
    Ok(rows)
}

pub fn format_table(rows: &[CheckRow]) -> String {
    let mut out = format!(
        "{:>8}  {:<22} {:>12} {:>10}  result\n",
        "theta0", "property", "residual", "tolerance"
    );
    for r in rows {
        out.push_str(&format!(
            "{:>8}  {:<22} {:>12.3e} {:>10.0e}  {}\n",
            r.theta0,
            r.property,
            r.residual,
            r.tolerance,
            if r.pass { "pass" } else { "FAIL" }
        ));
    }
    out
}
