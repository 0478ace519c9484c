//! Split-step integration of the commutative, potential-free, noncommutative
//! and weakly noncommutative NLS, with mass and energy diagnostics.
//!
//! All variants integrate
//!
//! ```text
//! i ∂_t ψ = -½ ∇²ψ + V ψ - g N(ψ)
//! ```
//!
//! with `N(ψ)` equal to `|ψ|²ψ`, `ψ* ⋆ ψ ⋆ ψ`, or its first-order expansion in
//! θ. One step is Strang splitting: a half kinetic step in mode space, a full
//! nonlinear step, a second half kinetic step. The nonlinear step is an exact
//! phase rotation for commutative variants and classical RK4 for the ⋆
//! variants. Every nonlinear step ends with the 2/3-rule truncation.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::moyal::{self, star_boxes, star_cubic_boxes, ModeBox, ThetaTensor};
use crate::spectral::{apply_mask, l2_inner, ComplexField, Grid};

#[derive(Clone, Debug, PartialEq)]
pub enum Variant {
    /// Static real potential `V(x)`.
    CommutativePotential(ComplexField),
    PotentialFree,
    Noncommutative(ThetaTensor),
    WeakNoncommutative(ThetaTensor),
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::CommutativePotential(_) => "commutative-potential",
            Variant::PotentialFree => "potential-free",
            Variant::Noncommutative(_) => "noncommutative",
            Variant::WeakNoncommutative(_) => "weak-noncommutative",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquationSpec {
    variant: Variant,
    g: f64,
    grid: Arc<Grid>,
    potential: Option<Vec<f64>>,
}

impl EquationSpec {
    pub fn new(grid: &Arc<Grid>, variant: Variant, g: f64) -> Result<Self> {
        if !g.is_finite() {
            return Err(Error::InvalidParameter {
                name: "g",
                reason: format!("coupling must be finite, got {g}"),
            });
        }
        let potential = match &variant {
            Variant::CommutativePotential(v) => {
                if !Arc::ptr_eq(v.grid(), grid) && v.grid().as_ref() != grid.as_ref() {
                    return Err(Error::GridMismatch);
                }
                let scale = v.max_abs().max(1.0);
                if let Some(index) = v.values().iter().position(|z| z.im.abs() > 1e-12 * scale) {
                    return Err(Error::InvalidParameter {
                        name: "potential",
                        reason: format!("potential must be real; imaginary part at index {index}"),
                    });
                }
                Some(v.values().iter().map(|z| z.re).collect())
            }
            Variant::Noncommutative(theta) | Variant::WeakNoncommutative(theta) => {
                if theta.n() != grid.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: grid.dim(),
                        found: theta.n(),
                    });
                }
                None
            }
            Variant::PotentialFree => None,
        };
        Ok(EquationSpec {
            variant,
            g,
            grid: Arc::clone(grid),
            potential,
        })
    }

    pub fn potential_free(grid: &Arc<Grid>, g: f64) -> Result<Self> {
        Self::new(grid, Variant::PotentialFree, g)
    }

    pub fn variant(&self) -> &Variant {
        &self.variant
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// θ entering the quartic energy term; zero for commutative variants.
    fn energy_theta(&self) -> ThetaTensor {
        match &self.variant {
            Variant::Noncommutative(t) | Variant::WeakNoncommutative(t) => t.clone(),
            _ => ThetaTensor::zero(self.grid.dim()),
        }
    }
}

fn check_field(psi: &ComplexField, eq: &EquationSpec) -> Result<()> {
    let g = psi.grid();
    if !Arc::ptr_eq(g, &eq.grid) && g.as_ref() != eq.grid.as_ref() {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

struct Stepper<'a> {
    eq: &'a EquationSpec,
    dt: f64,
    half_kinetic: Vec<Complex64>,
    band: Vec<usize>,
    mask: Vec<bool>,
}

impl<'a> Stepper<'a> {
    fn new(eq: &'a EquationSpec, dt: f64) -> Self {
        let grid = &eq.grid;
        let half_kinetic = grid
            .wavenumber_squared()
            .iter()
            .map(|k2| Complex64::from_polar(1.0, -0.25 * k2 * dt))
            .collect();
        let band = grid.dealias_band();
        let mask = grid.band_mask(&band);
        Stepper {
            eq,
            dt,
            half_kinetic,
            band,
            mask,
        }
    }

    fn kinetic(&self, raw: &mut [Complex64]) {
        raw.iter_mut()
            .zip(&self.half_kinetic)
            .for_each(|(v, p)| *v *= p);
    }

    fn advance(&self, psi: &ComplexField) -> ComplexField {
        let grid = &self.eq.grid;
        let g = self.eq.g;
        let dt = self.dt;
        let mut raw = psi.raw_spectrum();
        self.kinetic(&mut raw);
        match &self.eq.variant {
            Variant::CommutativePotential(_) | Variant::PotentialFree => {
                let field = ComplexField::from_raw_spectrum(grid, raw);
                let rotated: Vec<Complex64> = match &self.eq.potential {
                    Some(v) => field
                        .values()
                        .iter()
                        .zip(v)
                        .map(|(z, vx)| {
                            z * Complex64::from_polar(1.0, -(vx - g * z.norm_sqr()) * dt)
                        })
                        .collect(),
                    None => field
                        .values()
                        .iter()
                        .map(|z| z * Complex64::from_polar(1.0, g * z.norm_sqr() * dt))
                        .collect(),
                };
                raw = ComplexField::from_raw(grid, rotated).raw_spectrum();
                apply_mask(&mut raw, &self.mask);
            }
            Variant::Noncommutative(theta) => {
                let m = grid.len() as f64;
                let factor = Complex64::new(0.0, g / (m * m));
                let start = ModeBox::from_raw(grid, &raw, &self.band);
                let rhs = |b: &ModeBox| -> Vec<Complex64> {
                    star_cubic_boxes(grid, theta, b, &self.band)
                        .values
                        .into_iter()
                        .map(|v| v * factor)
                        .collect()
                };
                let end = rk4(&start.values, dt, |values| {
                    let mut b = start.clone();
                    b.values.copy_from_slice(values);
                    rhs(&b)
                });
                let mut b = start;
                b.values = end;
                raw = b.to_raw(grid, &self.band, 1.0);
            }
            Variant::WeakNoncommutative(theta) => {
                let field = ComplexField::from_raw_spectrum(grid, raw);
                let factor = Complex64::new(0.0, g);
                let end = rk4(field.values(), dt, |values| {
                    let psi = ComplexField::from_raw(grid, values.to_vec());
                    let n = moyal::star_cubic_first_order(&psi, theta).expect("operands validated");
                    let mut r = n.raw_spectrum();
                    apply_mask(&mut r, &self.mask);
                    ComplexField::from_raw_spectrum(grid, r)
                        .into_values()
                        .into_iter()
                        .map(|v| v * factor)
                        .collect()
                });
                raw = ComplexField::from_raw(grid, end).raw_spectrum();
                apply_mask(&mut raw, &self.mask);
            }
        }
        self.kinetic(&mut raw);
        ComplexField::from_raw_spectrum(grid, raw)
    }
}

fn rk4(y: &[Complex64], dt: f64, f: impl Fn(&[Complex64]) -> Vec<Complex64>) -> Vec<Complex64> {
    let axpy = |h: f64, k: &[Complex64]| -> Vec<Complex64> {
        y.iter().zip(k).map(|(a, b)| a + b * h).collect()
    };
    let k1 = f(y);
    let k2 = f(&axpy(0.5 * dt, &k1));
    let k3 = f(&axpy(0.5 * dt, &k2));
    let k4 = f(&axpy(dt, &k3));
    (0..y.len())
        .map(|i| y[i] + (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (dt / 6.0))
        .collect()
}

/// One Strang step of length `dt`; negative `dt` runs backwards in time.
pub fn step(psi: &ComplexField, eq: &EquationSpec, dt: f64) -> Result<ComplexField> {
    check_field(psi, eq)?;
    if !dt.is_finite() || dt == 0.0 {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: format!("time step must be finite and nonzero, got {dt}"),
        });
    }
    let out = Stepper::new(eq, dt).advance(psi);
    if !out.is_finite() {
        return Err(Error::Diverged {
            last_good_time: 0.0,
        });
    }
    Ok(out)
}

/// `∫ |ψ|² dx`.
pub fn mass(psi: &ComplexField) -> f64 {
    l2_inner(psi, psi).map(|z| z.re).unwrap_or(f64::NAN)
}

/// `∫ [½|∇ψ|² + V|ψ|²] - (g/2) ∫ ψ*⋆ψ⋆ψ*⋆ψ`, with θ = 0 for the commutative
/// variants. The quartic term is evaluated exactly from the modes of ψ.
pub fn energy(psi: &ComplexField, eq: &EquationSpec) -> Result<f64> {
    check_field(psi, eq)?;
    let grid = &eq.grid;
    let m = grid.len() as f64;
    let volume = grid.volume();
    let raw = psi.raw_spectrum();
    let kinetic: f64 = raw
        .iter()
        .zip(grid.wavenumber_squared())
        .map(|(v, k2)| k2 * v.norm_sqr())
        .sum::<f64>()
        * 0.5
        * volume
        / (m * m);
    let potential: f64 = match &eq.potential {
        Some(v) => {
            psi.values()
                .iter()
                .zip(v)
                .map(|(z, vx)| vx * z.norm_sqr())
                .sum::<f64>()
                * grid.cell_volume()
        }
        None => 0.0,
    };
    let quartic = if eq.g == 0.0 {
        0.0
    } else {
        let modes = ModeBox::from_raw(grid, &raw, &moyal::full_band(grid));
        let conj = modes.conj_reflect();
        let unbounded: Vec<usize> = grid.points().to_vec();
        let rho = star_boxes(grid, &eq.energy_theta(), &conj, &modes, &unbounded);
        // ψ*⋆ψ is real, so ∫ρ⋆ρ = ∫|ρ|².
        rho.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * volume / (m * m * m * m)
    };
    Ok(kinetic + potential - 0.5 * eq.g * quartic)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolveSettings {
    pub variant: &'static str,
    pub g: f64,
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_every: usize,
    pub steps: usize,
}

#[derive(Clone, Debug)]
pub struct SimResult {
    pub snapshots: Vec<(f64, ComplexField)>,
    pub mass_series: Vec<(f64, f64)>,
    pub energy_series: Vec<(f64, f64)>,
    pub settings: EvolveSettings,
}

impl SimResult {
    pub fn final_state(&self) -> &ComplexField {
        &self
            .snapshots
            .last()
            .expect("at least the initial snapshot")
            .1
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|(t, _)| *t).collect()
    }
}

/// Number of steps of size `dt` that make up `t_end`.
pub fn step_count(dt: f64, t_end: f64) -> Result<usize> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: format!("time step must be positive, got {dt}"),
        });
    }
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "t_end",
            reason: format!("end time must be non-negative, got {t_end}"),
        });
    }
    let n = (t_end / dt).round();
    if (n * dt - t_end).abs() > 1e-9 * t_end.max(dt) {
        return Err(Error::InvalidParameter {
            name: "t_end",
            reason: format!("end time {t_end} is not a whole number of steps of {dt}"),
        });
    }
    Ok(n as usize)
}

/// Steps from `t = 0` to `t_end`, recording a snapshot with mass and energy
/// every `snapshot_every` steps and at the end.
pub fn evolve(
    psi0: &ComplexField,
    eq: &EquationSpec,
    dt: f64,
    t_end: f64,
    snapshot_every: usize,
) -> Result<SimResult> {
    check_field(psi0, eq)?;
    if snapshot_every == 0 {
        return Err(Error::InvalidParameter {
            name: "snapshot_every",
            reason: "must be at least 1".into(),
        });
    }
    let steps = step_count(dt, t_end)?;
    let stepper = Stepper::new(eq, dt);
    let mut result = SimResult {
        snapshots: Vec::new(),
        mass_series: Vec::new(),
        energy_series: Vec::new(),
        settings: EvolveSettings {
            variant: eq.variant.name(),
            g: eq.g,
            dt,
            t_end,
            snapshot_every,
            steps,
        },
    };
    let mut record = |t: f64, psi: &ComplexField| -> Result<()> {
        result.mass_series.push((t, mass(psi)));
        result.energy_series.push((t, energy(psi, eq)?));
        result.snapshots.push((t, psi.clone()));
        Ok(())
    };
    record(0.0, psi0)?;
    let mut psi = psi0.clone();
    for n in 1..=steps {
        let next = stepper.advance(&psi);
        if !next.is_finite() {
            return Err(Error::Diverged {
                last_good_time: (n - 1) as f64 * dt,
            });
        }
        psi = next;
        if n % snapshot_every == 0 || n == steps {
            record(n as f64 * dt, &psi)?;
        }
    }
    Ok(result)
}
