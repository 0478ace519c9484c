//! Exact frequencies, quasiperiodic potentials and their periodic lifts, the
//! Dirichlet-function θ-tensor, and continued-fraction approximants.
//!
//! Frequencies are rationals or quadratic irrationals `(a + b√d)/c`, so
//! rationality is decided exactly and never by a floating-point test.
//! Lifted coordinates are ordered `(x¹ … xⁿ, y¹ … yⁿ)`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use num_integer::{Integer, Roots};

use crate::error::{Error, Result};
use crate::moyal::ThetaTensor;
use crate::spectral::{ComplexField, Grid};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Reduced fraction `p/q` with `q > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Rational {
    p: i128,
    q: i128,
}

impl Rational {
    pub fn new(p: i128, q: i128) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidFrequency("zero denominator".into()));
        }
        let g = p.gcd(&q);
        let sign = if q < 0 { -1 } else { 1 };
        Ok(Rational {
            p: sign * p / g,
            q: sign * q / g,
        })
    }

    pub fn integer(p: i128) -> Self {
        Rational { p, q: 1 }
    }

    pub fn numer(&self) -> i128 {
        self.p
    }

    pub fn denom(&self) -> i128 {
        self.q
    }

    pub fn to_f64(&self) -> f64 {
        self.p as f64 / self.q as f64
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.q == 1 {
            write!(f, "{}", self.p)
        } else {
            write!(f, "{}/{}", self.p, self.q)
        }
    }
}

/// A frequency with decidable rationality.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExactFrequency {
    Rational(Rational),
    /// `(a + b√d)/c` with `b ≠ 0`, `c > 0`, `d ≥ 2` square-free and
    /// `gcd(a, b, c) = 1`.
    QuadraticIrrational {
        a: i128,
        b: i128,
        c: i128,
        d: i128,
    },
}

fn square_free_part(d: i128) -> (i128, i128) {
    // d = s² · r with r square-free
    let mut s = 1;
    let mut r = d;
    let mut f = 2;
    while f * f <= r {
        while r % (f * f) == 0 {
            r /= f * f;
            s *= f;
        }
        f += 1;
    }
    (s, r)
}

fn checked(v: Option<i128>, what: &'static str) -> Result<i128> {
    v.ok_or(Error::Overflow(what))
}

impl ExactFrequency {
    pub fn rational(p: i128, q: i128) -> Result<Self> {
        Ok(ExactFrequency::Rational(Rational::new(p, q)?))
    }

    pub fn integer(p: i128) -> Self {
        ExactFrequency::Rational(Rational::integer(p))
    }

    /// `(a + b√d)/c`, normalized; collapses to a rational when `b√d` is one.
    pub fn quadratic(a: i128, b: i128, c: i128, d: i128) -> Result<Self> {
        if c == 0 {
            return Err(Error::InvalidFrequency("zero denominator".into()));
        }
        if d < 0 {
            return Err(Error::InvalidFrequency(format!(
                "negative radicand {d} is not real"
            )));
        }
        if b == 0 || d == 0 {
            return Self::rational(a, c);
        }
        let (s, r) = square_free_part(d);
        let b = checked(b.checked_mul(s), "radicand reduction")?;
        if r == 1 {
            let num = checked(a.checked_add(b), "radicand reduction")?;
            return Self::rational(num, c);
        }
        let g = a.gcd(&b).gcd(&c);
        let sign = if c < 0 { -1 } else { 1 };
        Ok(ExactFrequency::QuadraticIrrational {
            a: sign * a / g,
            b: sign * b / g,
            c: sign * c / g,
            d: r,
        })
    }

    /// The golden ratio `(1 + √5)/2`.
    pub fn golden() -> Self {
        Self::quadratic(1, 1, 2, 5).expect("golden ratio is well-formed")
    }

    pub fn is_rational(&self) -> bool {
        matches!(self, ExactFrequency::Rational(_))
    }

    pub fn as_rational(&self) -> Option<Rational> {
        match self {
            ExactFrequency::Rational(r) => Some(*r),
            _ => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match *self {
            ExactFrequency::Rational(r) => r.to_f64(),
            ExactFrequency::QuadraticIrrational { a, b, c, d } => {
                (a as f64 + b as f64 * (d as f64).sqrt()) / c as f64
            }
        }
    }

    /// Components `(a, b, c, d)` of `(a + b√d)/c`, with `b = 0` for rationals.
    fn parts(&self) -> (i128, i128, i128, i128) {
        match *self {
            ExactFrequency::Rational(r) => (r.p, 0, r.q, 0),
            ExactFrequency::QuadraticIrrational { a, b, c, d } => (a, b, c, d),
        }
    }

    /// Exact quotient `self / other`, provided both live in the same
    /// quadratic field.
    pub fn checked_div(&self, other: &ExactFrequency) -> Result<ExactFrequency> {
        let (a1, b1, c1, d1) = self.parts();
        let (a2, b2, c2, d2) = other.parts();
        if a2 == 0 && b2 == 0 {
            return Err(Error::InvalidFrequency("division by zero frequency".into()));
        }
        if d1 != 0 && d2 != 0 && d1 != d2 {
            return Err(Error::Undecidable(self.to_string(), other.to_string()));
        }
        let d = d1.max(d2);
        let mul = |x: i128, y: i128| checked(x.checked_mul(y), "frequency ratio");
        // (a1 + b1√d)/c1 · c2/(a2 + b2√d)
        //   = c2 (a1 + b1√d)(a2 - b2√d) / (c1 (a2² - b2² d))
        let norm = checked(
            mul(a2, a2)?.checked_sub(mul(mul(b2, b2)?, d)?),
            "frequency ratio",
        )?;
        let ra = checked(
            mul(a1, a2)?.checked_sub(mul(mul(b1, b2)?, d)?),
            "frequency ratio",
        )?;
        let rb = checked(mul(b1, a2)?.checked_sub(mul(a1, b2)?), "frequency ratio")?;
        let den = mul(c1, norm)?;
        ExactFrequency::quadratic(mul(c2, ra)?, mul(c2, rb)?, den, if rb == 0 { 0 } else { d })
    }
}

impl fmt::Display for ExactFrequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ExactFrequency::Rational(r) => write!(f, "{r}"),
            ExactFrequency::QuadraticIrrational { a, b, c, d } => {
                let sign = if b < 0 { '-' } else { '+' };
                write!(f, "({a}{sign}{}*sqrt({d}))/{c}", b.abs())
            }
        }
    }
}

impl FromStr for ExactFrequency {
    type Err = Error;

    /// Accepts `p`, `p/q`, `sqrt(d)`, `b*sqrt(d)`, `(a+b*sqrt(d))`,
    /// `(a+b*sqrt(d))/c` and sign variants. Decimal literals are rejected.
    fn from_str(s: &str) -> Result<Self> {
        FrequencyParser::new(s).parse()
    }
}

struct FrequencyParser<'a> {
    literal: &'a str,
    chars: Vec<char>,
    pos: usize,
}

impl<'a> FrequencyParser<'a> {
    fn new(literal: &'a str) -> Self {
        FrequencyParser {
            literal,
            chars: literal.chars().filter(|c| !c.is_whitespace()).collect(),
            pos: 0,
        }
    }

    fn fail<T>(&self, reason: impl Into<String>) -> Result<T> {
        Err(Error::FrequencyParse {
            literal: self.literal.to_string(),
            reason: reason.into(),
        })
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            self.fail(format!("expected '{c}' at position {}", self.pos))
        }
    }

    fn integer(&mut self) -> Result<i128> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return self.fail(format!("expected an integer at position {start}"));
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse()
            .or_else(|_| self.fail(format!("integer {text} out of range")))
    }

    /// One term: `n`, `sqrt(d)`, `n*sqrt(d)`. Returns `(integer, coefficient, radicand)`.
    fn term(&mut self) -> Result<(i128, i128, i128)> {
        if self.starts_with_sqrt() {
            let d = self.sqrt()?;
            return Ok((0, 1, d));
        }
        let n = self.integer()?;
        if self.eat('*') {
            if !self.starts_with_sqrt() {
                return self.fail("expected sqrt(...) after '*'");
            }
            let d = self.sqrt()?;
            return Ok((0, n, d));
        }
        Ok((n, 0, 0))
    }

    fn starts_with_sqrt(&self) -> bool {
        self.chars[self.pos..].starts_with(&['s', 'q', 'r', 't'])
    }

    fn sqrt(&mut self) -> Result<i128> {
        self.pos += 4;
        self.expect('(')?;
        let d = self.integer()?;
        self.expect(')')?;
        Ok(d)
    }

    /// Signed sum of terms; at most one distinct radicand.
    fn sum(&mut self) -> Result<(i128, i128, i128, usize)> {
        let (mut a, mut b, mut d) = (0i128, 0i128, 0i128);
        let mut count = 0;
        loop {
            let negative = if self.eat('-') {
                true
            } else {
                self.eat('+') && false
            };
            let (n, coef, rad) = self.term()?;
            let sign = if negative { -1 } else { 1 };
            a += sign * n;
            if coef != 0 {
                if d != 0 && rad != d {
                    return self.fail("mixed radicands are not supported");
                }
                d = rad;
                b += sign * coef;
            }
            count += 1;
            if !matches!(self.peek(), Some('+') | Some('-')) {
                break;
            }
        }
        Ok((a, b, d, count))
    }

    fn parse(mut self) -> Result<ExactFrequency> {
        if let Some(c) = self
            .chars
            .iter()
            .find(|c| matches!(c, '.' | 'e' | 'E' | 'i' | 'n' | 'f'))
        {
            if *c == '.' || !self.literal.contains("sqrt") || *c != 'e' {
                return self.fail(
                    "floating-point literals are not accepted; write p/q or (a+b*sqrt(d))/c",
                );
            }
        }
        if self.chars.is_empty() {
            return self.fail("empty literal");
        }
        let outer_negative = self.peek() == Some('-') && self.chars.get(1) == Some(&'(');
        if outer_negative {
            self.pos += 1;
        }
        let (a, b, d, count) = if self.eat('(') {
            let parts = self.sum()?;
            self.expect(')')?;
            parts
        } else {
            self.sum()?
        };
        let c = if self.eat('/') {
            if count > 1 && self.chars[0] != '(' && !outer_negative {
                return self.fail("parenthesize a compound numerator before '/'");
            }
            self.integer()?
        } else {
            1
        };
        if self.pos != self.chars.len() {
            return self.fail(format!(
                "unexpected trailing input at position {}",
                self.pos
            ));
        }
        let sign = if outer_negative { -1 } else { 1 };
        ExactFrequency::quadratic(sign * a, sign * b, c, d).map_err(|e| Error::FrequencyParse {
            literal: self.literal.to_string(),
            reason: e.to_string(),
        })
    }
}

/// Dirichlet function: 0 on rationals, 1 on irrationals.
pub fn dirichlet(omega: &ExactFrequency) -> u8 {
    if omega.is_rational() {
        0
    } else {
        1
    }
}

/// `θ^{x y}(ω) = ω · D(ω)`.
pub fn theta_entry(omega: &ExactFrequency) -> f64 {
    match dirichlet(omega) {
        0 => 0.0,
        _ => omega.to_f64(),
    }
}

/// `V_n(x) = Σ_i (sin x^i + sin ω_i x^i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuasiPotentialSpec {
    frequencies: Vec<ExactFrequency>,
}

impl QuasiPotentialSpec {
    pub fn new(frequencies: Vec<ExactFrequency>) -> Result<Self> {
        if frequencies.is_empty() {
            return Err(Error::InvalidParameter {
                name: "frequencies",
                reason: "need at least one frequency".into(),
            });
        }
        if 2 * frequencies.len() > crate::spectral::MAX_DIM {
            return Err(Error::InvalidParameter {
                name: "frequencies",
                reason: format!(
                    "{} dimensions lift to {} > {}",
                    frequencies.len(),
                    2 * frequencies.len(),
                    crate::spectral::MAX_DIM
                ),
            });
        }
        Ok(QuasiPotentialSpec { frequencies })
    }

    pub fn single(omega: ExactFrequency) -> Self {
        QuasiPotentialSpec {
            frequencies: vec![omega],
        }
    }

    pub fn n(&self) -> usize {
        self.frequencies.len()
    }

    pub fn frequencies(&self) -> &[ExactFrequency] {
        &self.frequencies
    }

    /// The same potential with every ω_i replaced by a rational.
    pub fn with_rationals(&self, ws: &[Rational]) -> Result<Self> {
        if ws.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: ws.len(),
            });
        }
        Self::new(ws.iter().map(|&w| ExactFrequency::Rational(w)).collect())
    }

    /// Smallest nonzero wavenumber among `{1, |ω_i|}`.
    pub fn bragg_wavenumber(&self) -> f64 {
        self.frequencies
            .iter()
            .map(|w| w.to_f64().abs())
            .filter(|&w| w > 0.0)
            .fold(1.0, f64::min)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.frequencies
            .iter()
            .zip(x)
            .map(|(w, &xi)| xi.sin() + (w.to_f64() * xi).sin())
            .sum()
    }

    /// `V_{2n}(x, y) = Σ_i (sin x^i + sin y^i)` at a lifted point.
    pub fn eval_lift(&self, xy: &[f64]) -> f64 {
        let n = self.n();
        (0..n).map(|i| xy[i].sin() + xy[n + i].sin()).sum()
    }

    /// The lifted point `(x, ω x)` on the projection subspace.
    pub fn project_point(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        out.extend(
            self.frequencies
                .iter()
                .zip(x)
                .map(|(w, &xi)| w.to_f64() * xi),
        );
        out
    }
}

/// 2n×2n tensor with `θ^{x^i y^i} = ω_i D(ω_i)` and antisymmetric partners.
pub fn build_theta(spec: &QuasiPotentialSpec) -> ThetaTensor {
    let n = spec.n();
    let pairs: Vec<(usize, usize, f64)> = spec
        .frequencies
        .iter()
        .enumerate()
        .map(|(i, w)| (i, n + i, theta_entry(w)))
        .collect();
    ThetaTensor::from_pairs(2 * n, &pairs).expect("pairs are in range and finite")
}

/// Tensor over `(x, y_1, …, y_m)` for `V = sin x + Σ_j sin ω_j x`:
/// `θ^{x y_j} = θ(ω_j)` and `θ^{y_i y_j} = θ(ω_j / ω_i)`.
pub fn build_theta_multifrequency(freqs: &[ExactFrequency]) -> Result<ThetaTensor> {
    if freqs.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "frequencies",
            reason: "need at least two frequencies besides the unit base".into(),
        });
    }
    let m = freqs.len();
    let mut pairs = Vec::new();
    for (j, w) in freqs.iter().enumerate() {
        pairs.push((0, j + 1, theta_entry(w)));
    }
    for i in 0..m {
        for j in i + 1..m {
            let ratio = freqs[j].checked_div(&freqs[i])?;
            pairs.push((i + 1, j + 1, theta_entry(&ratio)));
        }
    }
    ThetaTensor::from_pairs(m + 1, &pairs)
}

fn check_dim(grid: &Grid, expected: usize) -> Result<()> {
    if grid.dim() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: grid.dim(),
        });
    }
    Ok(())
}

fn is_multiple(length: f64, period: f64) -> bool {
    let ratio = length / period;
    let k = ratio.round();
    k >= 1.0 && (ratio - k).abs() <= 1e-9 * ratio.max(1.0)
}

pub fn quasiperiodic_potential(
    spec: &QuasiPotentialSpec,
    grid: &Arc<Grid>,
) -> Result<ComplexField> {
    check_dim(grid, spec.n())?;
    ComplexField::from_real_fn(grid, |x| spec.eval(x))
}

/// Samples `V_{2n}` on a 2n-dimensional grid whose boxes are multiples of 2π.
pub fn periodic_lift(spec: &QuasiPotentialSpec, grid2n: &Arc<Grid>) -> Result<ComplexField> {
    check_dim(grid2n, 2 * spec.n())?;
    for (axis, &length) in grid2n.lengths().iter().enumerate() {
        if !is_multiple(length, TWO_PI) {
            return Err(Error::IncommensurateBox {
                axis,
                length,
                period: TWO_PI,
            });
        }
    }
    ComplexField::from_real_fn(grid2n, |xy| spec.eval_lift(xy))
}

/// One sample of the line `y = ω x` on a 2D torus.
#[derive(Clone, Debug, PartialEq)]
pub struct LineSample {
    /// Unwrapped coordinate along the line's x axis.
    pub x: f64,
    /// Point on the torus `[0, L_x) × [0, L_y)`.
    pub point: [f64; 2],
    /// Nearest grid point.
    pub nearest: [usize; 2],
    /// Offset from the nearest grid point, in cells.
    pub offset: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct LineProjection {
    pub samples: Vec<LineSample>,
    /// Number of x traversals after which the line closes on the torus, when
    /// that is decidable and finite.
    pub closure_traversals: Option<u64>,
}

fn small_ratio(r: f64) -> Option<(i128, i128)> {
    (1..=1000i128).find_map(|v| {
        let u = (r * v as f64).round();
        ((r * v as f64 - u).abs() <= 1e-12 * r.max(1.0) * v as f64 && u >= 1.0)
            .then_some((u as i128, v))
    })
}

/// Samples the line `y = ω x` at the grid's x spacing, `count` points from
/// the origin, wrapped onto the 2D torus.
pub fn project_line_samples(
    grid2n: &Arc<Grid>,
    omega: &ExactFrequency,
    count: usize,
) -> Result<LineProjection> {
    check_dim(grid2n, 2)?;
    if count == 0 {
        return Err(Error::InvalidParameter {
            name: "count",
            reason: "need at least one sample".into(),
        });
    }
    let (nx, ny) = (grid2n.points()[0], grid2n.points()[1]);
    let (lx, ly) = (grid2n.lengths()[0], grid2n.lengths()[1]);
    let (hx, hy) = (grid2n.spacing(0), grid2n.spacing(1));
    let w = omega.to_f64();
    let samples = (0..count)
        .map(|j| {
            let traversal = j / nx;
            let r = j % nx;
            let x_wrapped = grid2n.coordinate(0, r);
            let x = x_wrapped + traversal as f64 * lx;
            let y = if traversal == 0 { w * x_wrapped } else { w * x }.rem_euclid(ly);
            let fy = y / hy;
            let iy = fy.round();
            LineSample {
                x,
                point: [x_wrapped, y],
                nearest: [r, (iy as usize) % ny],
                offset: [0.0, fy - iy],
            }
        })
        .collect();
    let _ = hx;
    let closure_traversals = match (omega.as_rational(), small_ratio(lx / ly)) {
        (Some(rat), Some((u, v))) => {
            // smallest m with ω m (u/v) ∈ ℤ
            let num = (rat.numer() * u).abs();
            let den = rat.denom() * v;
            Some((den / num.gcd(&den).max(1)) as u64)
        }
        _ => None,
    };
    Ok(LineProjection {
        samples,
        closure_traversals,
    })
}

/// Continued-fraction convergents `w_1 … w_depth` of an irrational ω.
pub fn rational_approximants(omega: &ExactFrequency, depth: usize) -> Result<Vec<Rational>> {
    let (a, b, c, d) = match *omega {
        ExactFrequency::Rational(_) => return Err(Error::RationalFrequency(omega.to_string())),
        ExactFrequency::QuadraticIrrational { a, b, c, d } => (a, b, c, d),
    };
    if depth == 0 {
        return Err(Error::InvalidParameter {
            name: "depth",
            reason: "need depth ≥ 1".into(),
        });
    }
    // ω = (P + √D)/Q with Q | D - P².
    let big_d = checked(
        b.checked_mul(b).and_then(|b2| b2.checked_mul(d)),
        "continued fraction",
    )?;
    let (mut p, mut q, mut dd) = if b > 0 {
        (a, c, big_d)
    } else {
        (-a, -c, big_d)
    };
    if (dd - p * p) % q != 0 {
        let aq = q.abs();
        p = checked(p.checked_mul(aq), "continued fraction")?;
        dd = checked(dd.checked_mul(q * q), "continued fraction")?;
        q = checked(q.checked_mul(aq), "continued fraction")?;
    }
    let s = dd.sqrt();
    let (mut h_prev, mut h) = (0i128, 1i128);
    let (mut k_prev, mut k) = (1i128, 0i128);
    let mut out = Vec::with_capacity(depth);
    for _ in 0..depth {
        // floor((P + √D)/Q); √D is irrational and lies in (s, s + 1).
        let term = if q > 0 {
            Integer::div_floor(&(p + s), &q)
        } else {
            Integer::div_floor(&(p + s + 1), &q)
        };
        let h_next = checked(
            term.checked_mul(h).and_then(|t| t.checked_add(h_prev)),
            "convergent",
        )?;
        let k_next = checked(
            term.checked_mul(k).and_then(|t| t.checked_add(k_prev)),
            "convergent",
        )?;
        h_prev = h;
        k_prev = k;
        h = h_next;
        k = k_next;
        out.push(Rational::new(h, k)?);
        let p_next = checked(
            term.checked_mul(q).and_then(|t| t.checked_sub(p)),
            "continued fraction",
        )?;
        let q_next = (dd - p_next * p_next) / q;
        p = p_next;
        q = q_next;
    }
    Ok(out)
}

/// A periodic approximant `W_{l,n}` of a quasiperiodic potential.
#[derive(Clone, Debug)]
pub struct ApproximantPotential {
    pub field: ComplexField,
    /// Common period `2π q_i` on each axis.
    pub periods: Vec<f64>,
    /// `max_x |W(x) - V(x)|` over the grid.
    pub sup_distance: f64,
}

pub fn approximant_potential(
    spec: &QuasiPotentialSpec,
    approximants: &[Rational],
    grid: &Arc<Grid>,
) -> Result<ApproximantPotential> {
    let periodic = spec.with_rationals(approximants)?;
    check_dim(grid, spec.n())?;
    let periods: Vec<f64> = approximants
        .iter()
        .map(|w| TWO_PI * w.denom() as f64)
        .collect();
    for (axis, (&length, &period)) in grid.lengths().iter().zip(&periods).enumerate() {
        if !is_multiple(length, period) {
            return Err(Error::IncommensurateBox {
                axis,
                length,
                period,
            });
        }
    }
    let field = quasiperiodic_potential(&periodic, grid)?;
    let sup_distance = (0..grid.len())
        .map(|flat| {
            let x = grid.position(flat);
            (field.values()[flat].re - spec.eval(&x)).abs()
        })
        .fold(0.0, f64::max);
    Ok(ApproximantPotential {
        field,
        periods,
        sup_distance,
    })
}

/// Real samples of `V_n` in the form used by the solvers.
pub fn potential_values(field: &ComplexField) -> Vec<f64> {
    field.values().iter().map(|v: &Complex64| v.re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn q(p: i128, q: i128) -> Rational {
        Rational::new(p, q).unwrap()
    }

    #[test]
    fn normalization() {
        assert_eq!(q(6, -4), q(-3, 2));
        assert_eq!(
            ExactFrequency::quadratic(2, 2, 4, 5).unwrap(),
            ExactFrequency::quadratic(1, 1, 2, 5).unwrap()
        );
        // √8 = 2√2
        assert_eq!(
            ExactFrequency::quadratic(0, 1, 1, 8).unwrap(),
            ExactFrequency::QuadraticIrrational {
                a: 0,
                b: 2,
                c: 1,
                d: 2
            }
        );
        // (1 + √9)/2 = 2
        assert_eq!(
            ExactFrequency::quadratic(1, 1, 2, 9).unwrap(),
            ExactFrequency::integer(2)
        );
        assert_eq!(
            ExactFrequency::quadratic(1, 1, -2, 5).unwrap(),
            ExactFrequency::QuadraticIrrational {
                a: -1,
                b: -1,
                c: 2,
                d: 5
            }
        );
        assert!(ExactFrequency::quadratic(1, 1, 2, -5).is_err());
        assert!(ExactFrequency::rational(1, 0).is_err());
    }

    #[test]
    fn parsing() {
        let golden: ExactFrequency = "(1+1*sqrt(5))/2".parse().unwrap();
        assert_eq!(golden, ExactFrequency::golden());
        assert_eq!(
            "3/4".parse::<ExactFrequency>().unwrap(),
            ExactFrequency::rational(3, 4).unwrap()
        );
        assert_eq!(
            "-7".parse::<ExactFrequency>().unwrap(),
            ExactFrequency::integer(-7)
        );
        assert_eq!(
            "sqrt(2)".parse::<ExactFrequency>().unwrap(),
            ExactFrequency::quadratic(0, 1, 1, 2).unwrap()
        );
        assert_eq!(
            "3*sqrt(2)/7".parse::<ExactFrequency>().unwrap(),
            ExactFrequency::quadratic(0, 3, 7, 2).unwrap()
        );
        assert_eq!(
            "( 1 - 2*sqrt(3) ) / 5".parse::<ExactFrequency>().unwrap(),
            ExactFrequency::quadratic(1, -2, 5, 3).unwrap()
        );
        assert_eq!(
            "-(1+sqrt(5))/2".parse::<ExactFrequency>().unwrap(),
            ExactFrequency::quadratic(-1, -1, 2, 5).unwrap()
        );
        for bad in [
            "1.618",
            "",
            "1+sqrt(5)/2",
            "sqrt(2)+sqrt(3)",
            "(1+sqrt(5)",
            "2/0",
            "1e3",
            "abc",
            "3/",
        ] {
            assert!(
                bad.parse::<ExactFrequency>().is_err(),
                "{bad:?} should not parse"
            );
        }
    }

    #[test]
    fn display_round_trips() {
        for s in ["(1+1*sqrt(5))/2", "(0-3*sqrt(2))/7", "5/3", "-4"] {
            let f: ExactFrequency = s.parse().unwrap();
            assert_eq!(f.to_string().parse::<ExactFrequency>().unwrap(), f);
        }
    }

    #[test]
    fn dirichlet_values() {
        assert_eq!(dirichlet(&ExactFrequency::rational(1, 2).unwrap()), 0);
        assert_eq!(
            dirichlet(&ExactFrequency::quadratic(0, 1, 1, 2).unwrap()),
            1
        );
        assert_eq!(dirichlet(&ExactFrequency::integer(7)), 0);
    }

    #[test]
    fn theta_entries() {
        assert_eq!(theta_entry(&ExactFrequency::rational(3, 4).unwrap()), 0.0);
        let phi = theta_entry(&ExactFrequency::golden());
        assert!((phi - 1.618_033_988_749_895).abs() < 1e-15);
        // continuity at the origin along irrationals √2 / 10^m
        let mut last = f64::INFINITY;
        for m in 0..12 {
            let w = ExactFrequency::quadratic(0, 1, 10i128.pow(m), 2).unwrap();
            let t = theta_entry(&w);
            assert!(t > 0.0 && t < last);
            assert!((t - 2f64.sqrt() / 10f64.powi(m as i32)).abs() < 1e-15);
            last = t;
        }
        assert!(last < 1e-10);
    }

    #[test]
    fn theta_tensors() {
        let phi = ExactFrequency::golden();
        let t = build_theta(&QuasiPotentialSpec::single(phi));
        assert_eq!(
            t.rows(),
            vec![vec![0.0, phi.to_f64()], vec![-phi.to_f64(), 0.0]]
        );
        let t = build_theta(&QuasiPotentialSpec::single(
            ExactFrequency::rational(2, 3).unwrap(),
        ));
        assert!(t.is_zero());
        let spec = QuasiPotentialSpec::new(vec![
            ExactFrequency::quadratic(0, 1, 1, 2).unwrap(),
            ExactFrequency::rational(5, 3).unwrap(),
        ])
        .unwrap();
        let t = build_theta(&spec);
        let s2 = 2f64.sqrt();
        assert_eq!(
            t.rows(),
            vec![
                vec![0.0, 0.0, s2, 0.0],
                vec![0.0, 0.0, 0.0, 0.0],
                vec![-s2, 0.0, 0.0, 0.0],
                vec![0.0, 0.0, 0.0, 0.0],
            ]
        );
    }

    #[test]
    fn multifrequency_commensurability() {
        let r2 = ExactFrequency::quadratic(0, 1, 1, 2).unwrap();
        for xi in ["2*sqrt(2)", "sqrt(2)/3", "3*sqrt(2)/7"] {
            let t = build_theta_multifrequency(&[r2, xi.parse().unwrap()]).unwrap();
            assert_eq!(t.get(1, 2), 0.0, "{xi}");
            assert_eq!(t.get(0, 1), r2.to_f64());
            assert!(t.get(0, 2) > 0.0);
        }
        let t = build_theta_multifrequency(&[r2, "(1+sqrt(2))".parse().unwrap()]).unwrap();
        let expected = 1.0 + 2f64.sqrt() / 2.0;
        assert!((t.get(1, 2) - expected).abs() < 1e-15);
        assert_eq!(
            build_theta_multifrequency(&[r2, ExactFrequency::golden()]),
            Err(Error::Undecidable(
                ExactFrequency::golden().to_string(),
                r2.to_string()
            ))
        );
        assert!(build_theta_multifrequency(&[r2]).is_err());
    }

    #[test]
    fn exact_division() {
        let a: ExactFrequency = "(1+sqrt(5))/2".parse().unwrap();
        let b: ExactFrequency = "(1-sqrt(5))/2".parse().unwrap();
        // φ / (1-φ)... (1+√5)/(1-√5) = -(3+√5)/2
        assert_eq!(
            a.checked_div(&b).unwrap(),
            "(-3-sqrt(5))/2".parse().unwrap()
        );
        assert_eq!(a.checked_div(&a).unwrap(), ExactFrequency::integer(1));
        let r = ExactFrequency::rational(3, 4).unwrap();
        assert!((r.checked_div(&a).unwrap().to_f64() - 0.75 / a.to_f64()).abs() < 1e-15);
        assert!(a.checked_div(&ExactFrequency::integer(0)).is_err());
    }

    #[test]
    fn potentials_and_lift() {
        let grid = Grid::line(64, 2.0 * PI).unwrap();
        let v = quasiperiodic_potential(
            &QuasiPotentialSpec::single(ExactFrequency::integer(1)),
            &grid,
        )
        .unwrap();
        let expected = ComplexField::from_real_fn(&grid, |x| 2.0 * x[0].sin()).unwrap();
        assert!(v.sub(&expected).unwrap().max_abs() < 1e-15);

        let spec = QuasiPotentialSpec::single(ExactFrequency::golden());
        assert_eq!(spec.eval(&[0.0]), 0.0);

        let g2 = Grid::new(vec![16, 16], vec![2.0 * PI, 4.0 * PI]).unwrap();
        let lift = periodic_lift(&spec, &g2).unwrap();
        let sep = ComplexField::from_real_fn(&g2, |x| x[0].sin() + x[1].sin()).unwrap();
        assert_eq!(lift, sep);
        assert!((spec.eval_lift(&[PI / 2.0, PI / 2.0]) - 2.0).abs() < 1e-15);

        let bad = Grid::new(vec![16, 16], vec![2.0 * PI, 7.0]).unwrap();
        assert!(matches!(
            periodic_lift(&spec, &bad),
            Err(Error::IncommensurateBox { axis: 1, .. })
        ));
        assert!(quasiperiodic_potential(&spec, &g2).is_err());
    }

    #[test]
    fn projection_reproduces_quasiperiodic_potential() {
        let spec = QuasiPotentialSpec::single(ExactFrequency::quadratic(0, 1, 1, 2).unwrap());
        for j in 0..200 {
            let x = [j as f64 * 0.173 - 5.0];
            let lifted = spec.eval_lift(&spec.project_point(&x));
            assert!((lifted - spec.eval(&x)).abs() <= 1e-14);
        }
    }

    #[test]
    fn line_samples_on_diagonal_hit_lattice() {
        let g = Grid::new(vec![32, 32], vec![2.0 * PI, 2.0 * PI]).unwrap();
        let proj = project_line_samples(&g, &ExactFrequency::integer(1), 32).unwrap();
        for (j, s) in proj.samples.iter().enumerate() {
            assert_eq!(s.nearest, [j, j]);
            assert!(s.offset[1].abs() < 1e-12);
        }
        assert_eq!(proj.closure_traversals, Some(1));
    }

    #[test]
    fn half_slope_closes_after_two_traversals() {
        let g = Grid::new(vec![16, 16], vec![2.0 * PI, 2.0 * PI]).unwrap();
        let half = ExactFrequency::rational(1, 2).unwrap();
        let proj = project_line_samples(&g, &half, 33).unwrap();
        assert_eq!(proj.closure_traversals, Some(2));
        // after 32 samples (two x traversals) the line is back at the origin
        let last = &proj.samples[32];
        assert_eq!(last.nearest, [0, 0]);
        assert!(last.offset[1].abs() < 1e-12);
        // and no earlier sample revisits it
        assert!(proj.samples[1..32]
            .iter()
            .all(|s| s.nearest != [0, 0] || s.offset[1].abs() > 1e-9));
    }

    #[test]
    fn golden_line_never_repeats() {
        let g = Grid::new(vec![16, 16], vec![2.0 * PI, 2.0 * PI]).unwrap();
        let proj = project_line_samples(&g, &ExactFrequency::golden(), 100).unwrap();
        assert_eq!(proj.closure_traversals, None);
        for (i, a) in proj.samples.iter().enumerate() {
            for b in &proj.samples[i + 1..] {
                let same = (a.point[0] - b.point[0]).abs() < 1e-9
                    && (a.point[1] - b.point[1]).abs() < 1e-9;
                assert!(!same);
            }
        }
    }

    #[test]
    fn convergents() {
        let golden = rational_approximants(&ExactFrequency::golden(), 5).unwrap();
        assert_eq!(golden, vec![q(1, 1), q(2, 1), q(3, 2), q(5, 3), q(8, 5)]);
        let root2 = rational_approximants(&"sqrt(2)".parse().unwrap(), 4).unwrap();
        assert_eq!(root2, vec![q(1, 1), q(3, 2), q(7, 5), q(17, 12)]);
        // negative and non-reduced forms: (1 - √5)/2 = [-1; 2, 1, 1, ...]
        let conj = rational_approximants(&"(1-sqrt(5))/2".parse().unwrap(), 4).unwrap();
        assert_eq!(conj, vec![q(-1, 1), q(-1, 2), q(-2, 3), q(-3, 5)]);
        // √3/3: Q does not divide D - P² initially
        let r = rational_approximants(&"sqrt(3)/3".parse().unwrap(), 4).unwrap();
        assert_eq!(r, vec![q(0, 1), q(1, 1), q(1, 2), q(3, 5)]);
        assert!(matches!(
            rational_approximants(&ExactFrequency::rational(3, 2).unwrap(), 3),
            Err(Error::RationalFrequency(_))
        ));
        assert!(rational_approximants(&ExactFrequency::golden(), 0).is_err());
    }

    #[test]
    fn convergent_quality() {
        let cases = [
            "(1+sqrt(5))/2",
            "sqrt(2)",
            "(3-2*sqrt(7))/5",
            "sqrt(13)",
            "(2+sqrt(3))/11",
        ];
        for s in cases {
            let w: ExactFrequency = s.parse().unwrap();
            let x = w.to_f64();
            let mut approx = rational_approximants(&w, 12).unwrap();
            // beyond q ~ 1e6 the f64 reference cannot resolve the error
            approx.retain(|r| r.denom() < 1_000_000);
            for pair in approx.windows(2) {
                assert!(
                    (x - pair[1].to_f64()).abs() < (x - pair[0].to_f64()).abs(),
                    "{s}"
                );
            }
            for r in &approx {
                let q = r.denom() as f64;
                assert!((x - r.to_f64()).abs() < 1.0 / (q * q), "{s} {r}");
            }
        }
    }

    #[test]
    fn approximant_potentials() {
        let spec = QuasiPotentialSpec::single(ExactFrequency::golden());
        let g = Grid::line(64, 2.0 * PI).unwrap();
        let w1 = approximant_potential(&spec, &[q(1, 1)], &g).unwrap();
        let two_sin = ComplexField::from_real_fn(&g, |x| 2.0 * x[0].sin()).unwrap();
        assert!(w1.field.sub(&two_sin).unwrap().max_abs() < 1e-15);
        assert_eq!(w1.periods, vec![2.0 * PI]);

        assert!(matches!(
            approximant_potential(&spec, &[q(3, 2)], &g),
            Err(Error::IncommensurateBox { .. })
        ));
        let g4 = Grid::line(128, 4.0 * PI).unwrap();
        let w = approximant_potential(&spec, &[q(3, 2)], &g4).unwrap();
        assert_eq!(w.periods, vec![4.0 * PI]);
        let expected =
            ComplexField::from_real_fn(&g4, |x| x[0].sin() + (1.5 * x[0]).sin()).unwrap();
        assert!(w.field.sub(&expected).unwrap().max_abs() < 1e-15);
        assert!(w.sup_distance > 0.0);
    }

    #[test]
    fn approximants_converge_on_a_window() {
        let phi = ExactFrequency::golden();
        let spec = QuasiPotentialSpec::single(phi);
        let ws = rational_approximants(&phi, 10).unwrap();
        let window: Vec<f64> = (0..=400).map(|j| j as f64 * 0.05).collect();
        let dist: Vec<f64> = ws
            .iter()
            .map(|w| {
                let wl = spec.with_rationals(&[*w]).unwrap();
                window
                    .iter()
                    .map(|&x| (wl.eval(&[x]) - spec.eval(&[x])).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        for (w, d) in ws.iter().zip(&dist) {
            // |sin wx - sin φx| ≤ |w - φ| x
            assert!(*d <= (w.to_f64() - phi.to_f64()).abs() * 20.0 + 1e-14);
        }
        assert!(dist[9] < 1e-2 * dist[0], "{dist:?}");
    }

    #[test]
    fn bragg_wavenumber() {
        assert_eq!(
            QuasiPotentialSpec::single(ExactFrequency::golden()).bragg_wavenumber(),
            1.0
        );
        let s = QuasiPotentialSpec::single("sqrt(2)/3".parse().unwrap());
        assert!((s.bragg_wavenumber() - 2f64.sqrt() / 3.0).abs() < 1e-15);
    }
}
