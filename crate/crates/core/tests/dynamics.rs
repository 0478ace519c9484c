use std::f64::consts::PI;
use std::sync::Arc;

use starlattice::moyal::star_cubic_first_order;
use starlattice::spectral::dealias;
use starlattice::{
    energy, evolve, mass, star_cubic, step, Complex64, ComplexField, EquationSpec, Grid,
    ThetaTensor, Variant,
};

fn sech_setup() -> (Arc<Grid>, ComplexField, f64) {
    let grid = Grid::line(512, 16.0 * PI).unwrap();
    let c = 8.0 * PI;
    let psi = ComplexField::from_real_fn(&grid, |x| 1.0 / (x[0] - c).cosh()).unwrap();
    (grid, psi, c)
}

/// Residual of `i∂_tψ + ½ψ'' + |ψ|²ψ` for `ψ = sech(x) e^{it/2}`, computed
/// from closed-form derivatives: `sech'' = sech - 2 sech³`.
#[test]
fn closed_form_soliton_solves_the_equation() {
    for &x in &[-3.0, -0.7, 0.0, 0.4, 2.5] {
        for &t in &[0.0, 1.3] {
            let s = 1.0 / f64::cosh(x);
            let phase = Complex64::from_polar(1.0, 0.5 * t);
            let dt = Complex64::i() * 0.5 * s * phase;
            let dxx = (s - 2.0 * s * s * s) * phase;
            let residual = Complex64::i() * dt + 0.5 * dxx + s * s * s * phase;
            assert!(residual.norm() < 1e-15);
        }
    }
}

#[test]
fn bright_soliton_profile() {
    let (grid, psi0, c) = sech_setup();
    let eq = EquationSpec::potential_free(&grid, 1.0).unwrap();
    let run = evolve(&psi0, &eq, 1e-3, 5.0, 1000).unwrap();
    let exact = ComplexField::from_fn(&grid, |x| {
        Complex64::from_polar(1.0 / (x[0] - c).cosh(), 2.5)
    })
    .unwrap();
    let err = run.final_state().sub(&exact).unwrap().norm() / exact.norm();
    assert!(err < 1e-4, "{err}");
    let m0 = run.mass_series[0].1;
    let e0 = run.energy_series[0].1;
    for (&(_, m), &(_, e)) in run.mass_series.iter().zip(&run.energy_series) {
        assert!(((m - m0) / m0).abs() < 1e-10);
        assert!(((e - e0) / e0).abs() < 1e-6);
    }
}

#[test]
fn second_order_in_dt() {
    let (grid, psi0, _) = sech_setup();
    let eq = EquationSpec::potential_free(&grid, 1.0).unwrap();
    let end = |dt: f64| {
        evolve(&psi0, &eq, dt, 1.0, 100_000)
            .unwrap()
            .final_state()
            .clone()
    };
    let (a, b, c) = (end(4e-3), end(2e-3), end(1e-3));
    let ratio = a.sub(&b).unwrap().norm() / b.sub(&c).unwrap().norm();
    assert!((ratio - 4.0).abs() < 0.5, "{ratio}");
}

#[test]
fn commutative_mass_drift_over_ten_thousand_steps() {
    let grid = Grid::line(128, 8.0 * PI).unwrap();
    let v = ComplexField::from_real_fn(&grid, |x| 0.5 * x[0].sin()).unwrap();
    let psi0 =
        ComplexField::from_real_fn(&grid, |x| (-(x[0] - 4.0 * PI).powi(2) / 8.0).exp()).unwrap();
    for variant in [Variant::PotentialFree, Variant::CommutativePotential(v)] {
        let eq = EquationSpec::new(&grid, variant, 0.5).unwrap();
        let run = evolve(&psi0, &eq, 1e-3, 10.0, 10_000).unwrap();
        let (m0, m1) = (run.mass_series[0].1, run.mass_series[1].1);
        assert!(((m1 - m0) / m0).abs() < 1e-10);
    }
}

fn smooth_2d(grid: &Arc<Grid>) -> ComplexField {
    dealias(
        &ComplexField::from_fn(grid, |x| {
            Complex64::new(
                0.8 + 0.3 * x[0].cos(),
                0.2 * (x[1] + x[0]).sin() + 0.1 * (2.0 * x[1]).cos(),
            )
        })
        .unwrap(),
    )
}

#[test]
fn noncommutative_mass_drift() {
    let grid = Grid::new(vec![12, 12], vec![2.0 * PI, 2.0 * PI]).unwrap();
    let psi0 = smooth_2d(&grid);
    let eq = EquationSpec::new(
        &grid,
        Variant::Noncommutative(ThetaTensor::planar(0.5).unwrap()),
        1.0,
    )
    .unwrap();
    let run = evolve(&psi0, &eq, 1e-3, 10.0, 10_000).unwrap();
    let (m0, m1) = (run.mass_series[0].1, run.mass_series[1].1);
    assert!(((m1 - m0) / m0).abs() < 1e-6);
}

#[test]
fn zero_theta_noncommutative_tracks_commutative() {
    let (grid, psi0, _) = sech_setup();
    let free = EquationSpec::potential_free(&grid, 1.0).unwrap();
    let nc = EquationSpec::new(&grid, Variant::Noncommutative(ThetaTensor::zero(1)), 1.0).unwrap();
    let weak = EquationSpec::new(
        &grid,
        Variant::WeakNoncommutative(ThetaTensor::zero(1)),
        1.0,
    )
    .unwrap();
    let (mut a, mut b, mut c) = (psi0.clone(), psi0.clone(), psi0);
    for _ in 0..200 {
        a = step(&a, &free, 1e-3).unwrap();
        b = step(&b, &nc, 1e-3).unwrap();
        c = step(&c, &weak, 1e-3).unwrap();
        assert!(a.sub(&b).unwrap().max_abs() < 1e-12);
        assert!(a.sub(&c).unwrap().max_abs() < 1e-12);
    }
    assert_eq!(energy(&a, &free).unwrap(), energy(&a, &nc).unwrap());
}

#[test]
fn noncommutative_and_weak_limit_differ_at_second_order() {
    let grid = Grid::new(vec![16, 16], vec![2.0 * PI, 2.0 * PI]).unwrap();
    let psi0 = smooth_2d(&grid);
    let thetas = [0.02, 0.04, 0.08, 0.16];
    let gaps: Vec<f64> = thetas
        .iter()
        .map(|&t| {
            let theta = ThetaTensor::planar(t).unwrap();
            let nc = EquationSpec::new(&grid, Variant::Noncommutative(theta.clone()), 1.0).unwrap();
            let weak = EquationSpec::new(&grid, Variant::WeakNoncommutative(theta), 1.0).unwrap();
            let a = evolve(&psi0, &nc, 0.01, 1.0, 100).unwrap();
            let b = evolve(&psi0, &weak, 0.01, 1.0, 100).unwrap();
            a.final_state().sub(b.final_state()).unwrap().norm()
        })
        .collect();
    let slope = fit_slope(&thetas, &gaps);
    assert!((slope - 2.0).abs() < 0.2, "{slope} {gaps:?}");
}

fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn first_order_expansion_error_is_quadratic() {
    let grid = Grid::new(vec![32, 32], vec![4.0 * PI, 4.0 * PI]).unwrap();
    let psi = ComplexField::from_fn(&grid, |x| {
        Complex64::new(
            (0.5 * x[0]).cos() + 0.4 * (x[1]).sin(),
            0.3 * (0.5 * x[0] + x[1]).cos(),
        )
    })
    .unwrap();
    let thetas = [1e-3, 3e-3, 1e-2, 3e-2, 1e-1];
    let errs: Vec<f64> = thetas
        .iter()
        .map(|&t| {
            let theta = ThetaTensor::planar(t).unwrap();
            let exact = star_cubic(&psi, &theta).unwrap();
            let approx = star_cubic_first_order(&psi, &theta).unwrap();
            exact.sub(&approx).unwrap().norm()
        })
        .collect();
    let slope = fit_slope(&thetas, &errs);
    assert!((slope - 2.0).abs() < 0.1, "{slope} {errs:?}");
}

#[test]
fn mass_scales_quadratically() {
    let (_, psi, _) = sech_setup();
    assert!((mass(&psi) - 2.0).abs() < 1e-6);
    assert!((mass(&psi.scale(Complex64::new(0.0, 2.0))) / mass(&psi) - 4.0).abs() < 1e-12);
}

#[test]
fn evolution_is_deterministic() {
    let grid = Grid::new(vec![16, 16], vec![2.0 * PI, 2.0 * PI]).unwrap();
    let psi0 = smooth_2d(&grid);
    let eq = EquationSpec::new(
        &grid,
        Variant::Noncommutative(ThetaTensor::planar(0.3).unwrap()),
        1.0,
    )
    .unwrap();
    let a = evolve(&psi0, &eq, 0.01, 0.1, 5).unwrap();
    let b = evolve(&psi0, &eq, 0.01, 0.1, 5).unwrap();
    assert_eq!(a.final_state(), b.final_state());
    assert_eq!(a.energy_series, b.energy_series);
}
