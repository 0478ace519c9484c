//! Envelope extraction and the two envelope experiments: the rational
//! approximant limit and the commuting diagram between the 1D potential
//! problem and the potential-free noncommutative lift.
//!
//! The envelope of `Ψ` is a spectral low-pass below a fraction of the
//! potential's smallest wavenumber, rescaled to the mass of `Ψ`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::dynamics::{evolve, EquationSpec, SimResult, Variant};
use crate::error::{Error, Result};
use crate::moyal::ThetaTensor;
use crate::quasilattice::{
    approximant_potential, build_theta, project_line_samples, quasiperiodic_potential,
    rational_approximants, ExactFrequency, QuasiPotentialSpec, Rational,
};
use crate::spectral::{l2_inner, laplacian, ComplexField, Grid};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Window {
    Hard,
    /// Flat up to half the cutoff, cosine taper to zero at the cutoff.
    RaisedCosine,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvelopeSpec {
    cutoff_fraction: f64,
    window: Window,
}

impl EnvelopeSpec {
    pub fn new(cutoff_fraction: f64, window: Window) -> Result<Self> {
        if !(cutoff_fraction > 0.0 && cutoff_fraction < 1.0) {
            return Err(Error::InvalidParameter {
                name: "cutoff_fraction",
                reason: format!("must lie in (0, 1), got {cutoff_fraction}"),
            });
        }
        Ok(EnvelopeSpec {
            cutoff_fraction,
            window,
        })
    }

    pub fn cutoff_fraction(&self) -> f64 {
        self.cutoff_fraction
    }

    pub fn window(&self) -> Window {
        self.window
    }

    fn weight(&self, k: f64, cutoff: f64) -> f64 {
        match self.window {
            Window::Hard => {
                if k <= cutoff {
                    1.0
                } else {
                    0.0
                }
            }
            Window::RaisedCosine => {
                let flat = 0.5 * cutoff;
                if k <= flat {
                    1.0
                } else if k <= cutoff {
                    0.5 * (1.0 + (PI * (k - flat) / (cutoff - flat)).cos())
                } else {
                    0.0
                }
            }
        }
    }
}

impl Default for EnvelopeSpec {
    fn default() -> Self {
        EnvelopeSpec {
            cutoff_fraction: 0.5,
            window: Window::Hard,
        }
    }
}

/// Low-pass `Ψ` below `cutoff_fraction × bragg` and restore its mass.
pub fn extract_envelope(
    psi: &ComplexField,
    spec: &EnvelopeSpec,
    potential: &QuasiPotentialSpec,
) -> Result<ComplexField> {
    let bragg = potential.bragg_wavenumber();
    let cutoff = spec.cutoff_fraction * bragg;
    if cutoff >= bragg {
        return Err(Error::ScalesNotSeparated { cutoff, bragg });
    }
    let grid = psi.grid();
    let k2 = grid.wavenumber_squared();
    let mut raw = psi.raw_spectrum();
    raw.iter_mut()
        .zip(&k2)
        .for_each(|(v, k2)| *v *= spec.weight(k2.sqrt(), cutoff));
    let filtered = ComplexField::from_raw_spectrum(grid, raw);
    let target = l2_inner(psi, psi)?.re;
    if target == 0.0 {
        return Ok(ComplexField::zeros(grid));
    }
    let have = l2_inner(&filtered, &filtered)?.re;
    if have == 0.0 {
        return Err(Error::InvalidParameter {
            name: "cutoff_fraction",
            reason: "no spectral weight below the envelope cutoff".into(),
        });
    }
    Ok(filtered.scale(Complex64::new((target / have).sqrt(), 0.0)))
}

/// Separable periodic cubic Lagrange interpolation at an arbitrary point.
pub fn interpolate_cubic(field: &ComplexField, point: &[f64]) -> Complex64 {
    let grid = field.grid();
    let dim = grid.dim();
    let strides = grid.strides();
    let mut base = [0i64; 4];
    let mut weights = [[0.0f64; 4]; 4];
    for axis in 0..dim {
        let f = point[axis] / grid.spacing(axis);
        let i0 = f.floor();
        let t = f - i0;
        base[axis] = i0 as i64 - 1;
        weights[axis] = [
            -t * (t - 1.0) * (t - 2.0) / 6.0,
            (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
            -(t + 1.0) * t * (t - 2.0) / 2.0,
            (t + 1.0) * t * (t - 1.0) / 6.0,
        ];
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for corner in 0..4usize.pow(dim as u32) {
        let mut rem = corner;
        let mut w = 1.0;
        let mut idx = 0usize;
        for axis in (0..dim).rev() {
            let s = rem % 4;
            rem /= 4;
            w *= weights[axis][s];
            let n = grid.points()[axis] as i64;
            idx += strides[axis] * (base[axis] + s as i64).rem_euclid(n) as usize;
        }
        acc += field.values()[idx] * w;
    }
    acc
}

/// Discrepancy series between a subject envelope and a reference envelope.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    pub times: Vec<f64>,
    /// `‖subject - reference‖ / ‖reference‖`.
    pub relative_l2: Vec<f64>,
    /// As `relative_l2` after removing the best global phase.
    pub phase_aligned_l2: Vec<f64>,
    /// `max_x |subject - reference|`.
    pub max_pointwise: Vec<f64>,
    /// `‖i∂_tψ + ½∇²ψ + g|ψ|²ψ‖` of the subject envelope.
    pub inferred_forcing_norm: Vec<f64>,
}

impl ComparisonReport {
    pub fn is_finite(&self) -> bool {
        [
            &self.relative_l2,
            &self.phase_aligned_l2,
            &self.max_pointwise,
            &self.inferred_forcing_norm,
        ]
        .iter()
        .all(|s| s.iter().all(|v| v.is_finite()))
    }

    pub fn final_forcing(&self) -> f64 {
        *self.inferred_forcing_norm.last().unwrap_or(&f64::NAN)
    }

    /// Largest `relative_l2` over the second half of the run divided by the
    /// largest over the first half.
    pub fn growth_factor(&self) -> f64 {
        let n = self.relative_l2.len();
        let half = n.div_ceil(2);
        let first = self.relative_l2[..half].iter().copied().fold(0.0, f64::max);
        let second = self.relative_l2[half..].iter().copied().fold(0.0, f64::max);
        if first == 0.0 {
            if second == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            second / first
        }
    }
}

/// `d/dt` at every sample, centered inside, second-order one-sided at the ends.
fn time_derivative(times: &[f64], series: &[ComplexField]) -> Result<Vec<ComplexField>> {
    let n = times.len();
    if n < 3 {
        return Err(Error::InvalidParameter {
            name: "snapshot_every",
            reason: format!("need at least 3 snapshots for a time derivative, got {n}"),
        });
    }
    let combine = |c: [f64; 3], i: [usize; 3]| -> ComplexField {
        let vals = (0..series[0].values().len())
            .map(|j| {
                series[i[0]].values()[j] * c[0]
                    + series[i[1]].values()[j] * c[1]
                    + series[i[2]].values()[j] * c[2]
            })
            .collect();
        ComplexField::new(series[0].grid(), vals).expect("finite inputs")
    };
    Ok((0..n)
        .map(|i| {
            if i == 0 {
                let (h1, h2) = (times[1] - times[0], times[2] - times[1]);
                combine(
                    [
                        -(2.0 * h1 + h2) / (h1 * (h1 + h2)),
                        (h1 + h2) / (h1 * h2),
                        -h1 / (h2 * (h1 + h2)),
                    ],
                    [0, 1, 2],
                )
            } else if i == n - 1 {
                let (h1, h2) = (times[n - 2] - times[n - 3], times[n - 1] - times[n - 2]);
                combine(
                    [
                        h2 / (h1 * (h1 + h2)),
                        -(h1 + h2) / (h1 * h2),
                        (h1 + 2.0 * h2) / (h2 * (h1 + h2)),
                    ],
                    [n - 3, n - 2, n - 1],
                )
            } else {
                let (h1, h2) = (times[i] - times[i - 1], times[i + 1] - times[i]);
                combine(
                    [
                        -h2 / (h1 * (h1 + h2)),
                        (h2 - h1) / (h1 * h2),
                        h1 / (h2 * (h1 + h2)),
                    ],
                    [i - 1, i, i + 1],
                )
            }
        })
        .collect())
}

fn compare(
    times: &[f64],
    subject: &[ComplexField],
    reference: &[ComplexField],
    g: f64,
) -> Result<ComparisonReport> {
    let dpsi = time_derivative(times, subject)?;
    let mut report = ComparisonReport {
        times: times.to_vec(),
        relative_l2: Vec::with_capacity(times.len()),
        phase_aligned_l2: Vec::with_capacity(times.len()),
        max_pointwise: Vec::with_capacity(times.len()),
        inferred_forcing_norm: Vec::with_capacity(times.len()),
    };
    for ((s, r), dt) in subject.iter().zip(reference).zip(&dpsi) {
        let rnorm = r.norm().max(f64::MIN_POSITIVE);
        let diff = s.sub(r)?;
        report.relative_l2.push(diff.norm() / rnorm);
        report.max_pointwise.push(diff.max_abs());
        let overlap = l2_inner(r, s)?;
        let phase = if overlap.norm() > 0.0 {
            overlap / overlap.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        report
            .phase_aligned_l2
            .push(s.sub(&r.scale(phase))?.norm() / rnorm);
        let lap = laplacian(s);
        let forcing: Vec<Complex64> = (0..s.values().len())
            .map(|j| {
                let z = s.values()[j];
                Complex64::i() * dt.values()[j] + 0.5 * lap.values()[j] + g * z.norm_sqr() * z
            })
            .collect();
        report
            .inferred_forcing_norm
            .push(ComplexField::new(s.grid(), forcing)?.norm());
    }
    Ok(report)
}

fn envelopes(
    run: &SimResult,
    spec: &EnvelopeSpec,
    potential: &QuasiPotentialSpec,
) -> Result<Vec<ComplexField>> {
    run.snapshots
        .iter()
        .map(|(_, f)| extract_envelope(f, spec, potential))
        .collect()
}

fn mass_mismatch(run: &SimResult, env: &[ComplexField]) -> f64 {
    run.snapshots
        .iter()
        .zip(env)
        .map(|((_, f), e)| (l2_inner(f, f).unwrap().re - l2_inner(e, e).unwrap().re).abs())
        .fold(0.0, f64::max)
}

/// Gaussian `exp(-(x - L/2)² / (2σ²))` centred in a 1D box.
pub fn gaussian_envelope(grid: &Arc<Grid>, sigma: f64) -> Result<ComplexField> {
    let c = 0.5 * grid.lengths()[0];
    ComplexField::from_real_fn(grid, |x| {
        (-(x[0] - c).powi(2) / (2.0 * sigma * sigma)).exp()
    })
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be positive and finite, got {v}"),
        })
    }
}

/// Run parameters shared by the limit experiment's per-approximant runs.
#[derive(Clone, Debug, PartialEq)]
pub struct LimitConfig {
    pub points: usize,
    pub box_length: f64,
    pub g: f64,
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_every: usize,
    pub sigma: f64,
    /// Multiplies the approximant potential; 0 gives free evolution.
    pub potential_scale: f64,
    pub envelope: EnvelopeSpec,
}

impl Default for LimitConfig {
    fn default() -> Self {
        LimitConfig {
            points: 512,
            box_length: 60.0 * PI,
            g: 0.5,
            dt: 1e-3,
            t_end: 2.0,
            snapshot_every: 10,
            sigma: 8.0,
            potential_scale: 1.0,
            envelope: EnvelopeSpec::default(),
        }
    }
}

impl LimitConfig {
    pub fn validate(&self) -> Result<()> {
        check_positive("box_length", self.box_length)?;
        check_positive("sigma", self.sigma)?;
        check_positive("dt", self.dt)?;
        if !self.g.is_finite() || !self.potential_scale.is_finite() {
            return Err(Error::InvalidParameter {
                name: "g",
                reason: "coupling and potential scale must be finite".into(),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct LimitRun {
    pub approximant: Rational,
    pub report: ComparisonReport,
    /// `max_t |mass(envelope) - mass(Ψ)|` over the potential run.
    pub envelope_mass_error: f64,
}

/// One approximant of the limit experiment: the envelope of the run under
/// `W(x) = sin x + sin w x` against the envelope of the potential-free run.
pub fn limit_run_for(w: Rational, config: &LimitConfig) -> Result<LimitRun> {
    config.validate()?;
    let grid = Grid::line(config.points, config.box_length)?;
    let periodic = QuasiPotentialSpec::single(ExactFrequency::Rational(w));
    let potential = approximant_potential(&periodic, &[w], &grid)?
        .field
        .scale(Complex64::new(config.potential_scale, 0.0));
    let psi0 = gaussian_envelope(&grid, config.sigma)?;
    let with_potential =
        EquationSpec::new(&grid, Variant::CommutativePotential(potential), config.g)?;
    let free = EquationSpec::potential_free(&grid, config.g)?;
    let run = evolve(
        &psi0,
        &with_potential,
        config.dt,
        config.t_end,
        config.snapshot_every,
    )?;
    let reference = evolve(&psi0, &free, config.dt, config.t_end, config.snapshot_every)?;
    let env = envelopes(&run, &config.envelope, &periodic)?;
    let env_ref = envelopes(&reference, &config.envelope, &periodic)?;
    let report = compare(&run.times(), &env, &env_ref, config.g)?;
    Ok(LimitRun {
        approximant: w,
        envelope_mass_error: mass_mismatch(&run, &env),
        report,
    })
}

/// Limit experiment over the first `depth` convergents of ω.
pub fn effective_limit_experiment(
    omega: &ExactFrequency,
    depth: usize,
    config: &LimitConfig,
) -> Result<Vec<LimitRun>> {
    rational_approximants(omega, depth)?
        .into_iter()
        .map(|w| limit_run_for(w, config))
        .collect()
}

/// `(max over depth of the end-time forcing, depth-1 value, max ≤ 2 × depth-1)`.
pub fn forcing_non_growth(runs: &[LimitRun]) -> (f64, f64, bool) {
    let first = runs
        .first()
        .map(|r| r.report.final_forcing())
        .unwrap_or(f64::NAN);
    let max = runs
        .iter()
        .map(|r| r.report.final_forcing())
        .fold(f64::NEG_INFINITY, f64::max);
    (max, first, max <= 2.0 * first)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagramConfig {
    pub points: [usize; 2],
    pub box_x: f64,
    pub box_y: f64,
    pub g: f64,
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_every: usize,
    pub sigma: f64,
    pub potential_scale: f64,
    /// Amplitude `ε` of the `cos(m y)` modulation in the lifted initial state.
    pub lift_epsilon: f64,
    pub lift_mode: u32,
    /// Replaces θ⁰¹ of the lift when set.
    pub theta_override: Option<f64>,
    pub envelope: EnvelopeSpec,
}

impl Default for DiagramConfig {
    fn default() -> Self {
        DiagramConfig {
            points: [64, 64],
            box_x: 16.0 * PI,
            box_y: 2.0 * PI,
            g: 0.5,
            dt: 0.005,
            t_end: 1.0,
            snapshot_every: 10,
            sigma: 6.0,
            potential_scale: 1.0,
            lift_epsilon: 0.1,
            lift_mode: 1,
            theta_override: None,
            envelope: EnvelopeSpec::default(),
        }
    }
}

impl DiagramConfig {
    /// The 1D run of Path A with the same x grid and time stepping.
    pub fn path_a_config(&self) -> LimitConfig {
        LimitConfig {
            points: self.points[0],
            box_length: self.box_x,
            g: self.g,
            dt: self.dt,
            t_end: self.t_end,
            snapshot_every: self.snapshot_every,
            sigma: self.sigma,
            potential_scale: self.potential_scale,
            envelope: self.envelope,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DiagramOutcome {
    /// Path A envelope measured against the restricted Path B envelope.
    pub report: ComparisonReport,
    pub theta: ThetaTensor,
    /// Largest interpolation offset along the line, in cells.
    pub max_offset: f64,
    /// Set when an offset exceeds half a cell.
    pub interpolation_degraded: bool,
}

/// Restricts a 2D field to `y = ω x` at the x grid points by cubic interpolation.
pub fn restrict_to_line(
    field: &ComplexField,
    omega: &ExactFrequency,
    line: &Arc<Grid>,
) -> Result<(ComplexField, f64)> {
    let grid = field.grid();
    if line.dim() != 1
        || line.points()[0] != grid.points()[0]
        || line.lengths()[0] != grid.lengths()[0]
    {
        return Err(Error::GridMismatch);
    }
    let proj = project_line_samples(grid, omega, line.points()[0])?;
    let max_offset = proj
        .samples
        .iter()
        .flat_map(|s| s.offset)
        .map(f64::abs)
        .fold(0.0, f64::max);
    let values = proj
        .samples
        .iter()
        .map(|s| interpolate_cubic(field, &s.point))
        .collect();
    Ok((ComplexField::new(line, values)?, max_offset))
}

/// Path A: 1D evolution under `V_1` followed by envelope extraction. Path B:
/// potential-free noncommutative evolution of the lifted envelope in 2D,
/// restricted to the projection line, followed by envelope extraction.
pub fn diagram_commutation_experiment(
    spec: &QuasiPotentialSpec,
    config: &DiagramConfig,
) -> Result<DiagramOutcome> {
    if spec.n() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: spec.n(),
        });
    }
    let omega = spec.frequencies()[0];
    let a_cfg = config.path_a_config();
    a_cfg.validate()?;
    check_positive("box_y", config.box_y)?;

    let line = Grid::line(config.points[0], config.box_x)?;
    let psi0 = gaussian_envelope(&line, config.sigma)?;
    let potential =
        quasiperiodic_potential(spec, &line)?.scale(Complex64::new(config.potential_scale, 0.0));
    let eq_a = EquationSpec::new(&line, Variant::CommutativePotential(potential), config.g)?;
    let run_a = evolve(&psi0, &eq_a, config.dt, config.t_end, config.snapshot_every)?;
    let env_a = envelopes(&run_a, &config.envelope, spec)?;

    let plane = Grid::new(config.points.to_vec(), vec![config.box_x, config.box_y])?;
    let theta = match config.theta_override {
        Some(t) => ThetaTensor::planar(t)?,
        None => build_theta(spec),
    };
    let m = config.lift_mode as f64 * 2.0 * PI / config.box_y;
    let eps = config.lift_epsilon;
    let lifted = ComplexField::from_fn(&plane, |xy| {
        let j = (xy[0] / line.spacing(0)).round() as usize % config.points[0];
        psi0.values()[j] * (1.0 + eps * (m * xy[1]).cos())
    })?;
    let eq_b = EquationSpec::new(&plane, Variant::Noncommutative(theta.clone()), config.g)?;
    let run_b = evolve(
        &lifted,
        &eq_b,
        config.dt,
        config.t_end,
        config.snapshot_every,
    )?;
    let mut max_offset: f64 = 0.0;
    let env_b = run_b
        .snapshots
        .iter()
        .map(|(_, f)| {
            let (restricted, off) = restrict_to_line(f, &omega, &line)?;
            max_offset = max_offset.max(off);
            extract_envelope(&restricted, &config.envelope, spec)
        })
        .collect::<Result<Vec<_>>>()?;

    let report = compare(&run_a.times(), &env_a, &env_b, config.g)?;
    Ok(DiagramOutcome {
        report,
        theta,
        max_offset,
        interpolation_degraded: max_offset > 0.5,
    })
}
