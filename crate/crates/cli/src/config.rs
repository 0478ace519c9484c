//! TOML run configuration.
//!
//! Every section is optional. Fields left out take the defaults of the
//! subcommand being run; [`RunConfig::resolved_for`] fills them in so the
//! echoed configuration is complete.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use starlattice::{ExactFrequency, QuasiPotentialSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    StarCheck,
    LimitExperiment,
    DiagramExperiment,
    Approximants,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::StarCheck => "star-check",
            Command::LimitExperiment => "limit-experiment",
            Command::DiagramExperiment => "diagram-experiment",
            Command::Approximants => "approximants",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// Dotted path of the offending field, when known.
    pub field: Option<String>,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.field, self.line) {
            (Some(field), Some(line)) => write!(f, "line {line}: {field}: {}", self.message),
            (Some(field), None) => write!(f, "{field}: {}", self.message),
            (None, Some(line)) => write!(f, "line {line}: {}", self.message),
            (None, None) => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError {
        field: Some(field.into()),
        line: None,
        message: message.into(),
    }
}

/// Box length written as a number or as `"k*pi"` / `"pi"`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxLength {
    pub value: f64,
    pub text: Option<String>,
}

impl BoxLength {
    pub fn pi_multiple(k: f64) -> Self {
        let text = if k == 1.0 {
            "pi".to_string()
        } else {
            format!("{k}*pi")
        };
        BoxLength {
            value: k * PI,
            text: Some(text),
        }
    }
}

impl FromStr for BoxLength {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let value = if compact == "pi" {
            PI
        } else if let Some(k) = compact.strip_suffix("*pi") {
            k.parse::<f64>()
                .map_err(|_| format!("cannot read {s:?} as k*pi"))?
                * PI
        } else {
            compact
                .parse::<f64>()
                .map_err(|_| format!("cannot read {s:?} as a length"))?
        };
        Ok(BoxLength {
            value,
            text: Some(s.to_string()),
        })
    }
}

impl Serialize for BoxLength {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match &self.text {
            Some(t) => s.serialize_str(t),
            None => s.serialize_f64(self.value),
        }
    }
}

impl<'de> Deserialize<'de> for BoxLength {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Float(f64),
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Float(value) => Ok(BoxLength { value, text: None }),
            Raw::Int(v) => Ok(BoxLength {
                value: v as f64,
                text: None,
            }),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantKind {
    PotentialFree,
    CommutativePotential,
    Noncommutative,
    WeakNoncommutative,
}

/// θ given as a planar value, a full matrix, or `"lift"` for the tensor
/// built from the potential's frequencies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThetaSource {
    Planar(f64),
    Matrix(Vec<Vec<f64>>),
    Keyword(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquationSection {
    pub variant: VariantKind,
    pub g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<ThetaSource>,
}

impl Default for EquationSection {
    fn default() -> Self {
        EquationSection {
            variant: VariantKind::PotentialFree,
            g: None,
            theta: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialSection {
    pub frequencies: Vec<String>,
    pub scale: f64,
    pub time_dependent: bool,
}

impl Default for PotentialSection {
    fn default() -> Self {
        PotentialSection {
            frequencies: vec!["(1+sqrt(5))/2".into()],
            scale: 1.0,
            time_dependent: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<usize>>,
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub box_lengths: Option<Vec<BoxLength>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    Sech,
    Gaussian,
    PlaneWave,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    pub kind: InitialKind,
    pub amplitude: f64,
    /// Sech width or Gaussian σ.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    /// Defaults to the box centre.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    /// Integer mode numbers of a plane wave.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<Vec<i64>>,
}

impl Default for InitialSection {
    fn default() -> Self {
        InitialSection {
            kind: InitialKind::Sech,
            amplitude: 1.0,
            width: None,
            center: None,
            modes: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowKind {
    Hard,
    RaisedCosine,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvelopeSection {
    pub cutoff_fraction: f64,
    pub window: WindowKind,
}

impl Default for EnvelopeSection {
    fn default() -> Self {
        EnvelopeSection {
            cutoff_fraction: 0.5,
            window: WindowKind::Hard,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub depth: usize,
    pub lift_epsilon: f64,
    pub lift_mode: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_override: Option<f64>,
    /// θ values exercised by `star-check`.
    pub star_thetas: Vec<f64>,
    pub seed: u64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            depth: 5,
            lift_epsilon: 0.1,
            lift_mode: 1,
            theta_override: None,
            star_thetas: vec![0.0, 0.1, 1.0],
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
    pub snapshots: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: "out".into(),
            snapshots: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub equation: EquationSection,
    pub potential: PotentialSection,
    pub grid: GridSection,
    pub time: TimeSection,
    pub initial: InitialSection,
    pub envelope: EnvelopeSection,
    pub experiment: ExperimentSection,
    pub output: OutputSection,
}

/// Per-subcommand defaults for the fields left open in [`RunConfig`].
struct Defaults {
    points: Vec<usize>,
    box_lengths: Vec<BoxLength>,
    g: f64,
    dt: f64,
    t_end: f64,
    snapshot_every: usize,
    width: f64,
}

fn defaults_for(command: Command) -> Defaults {
    match command {
        Command::LimitExperiment => Defaults {
            points: vec![512],
            box_lengths: vec![BoxLength::pi_multiple(60.0)],
            g: 0.5,
            dt: 1e-3,
            t_end: 2.0,
            snapshot_every: 10,
            width: 8.0,
        },
        Command::DiagramExperiment => Defaults {
            points: vec![64, 64],
            box_lengths: vec![BoxLength::pi_multiple(16.0), BoxLength::pi_multiple(2.0)],
            g: 0.5,
            dt: 0.005,
            t_end: 1.0,
            snapshot_every: 10,
            width: 6.0,
        },
        _ => Defaults {
            points: vec![512],
            box_lengths: vec![BoxLength::pi_multiple(16.0)],
            g: 1.0,
            dt: 1e-3,
            t_end: 5.0,
            snapshot_every: 1000,
            width: 1.0,
        },
    }
}

/// Parses and validates a TOML configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let config: RunConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1);
        ConfigError {
            field: None,
            line,
            message: e.message().trim().to_string(),
        }
    })?;
    config.validate().map_err(|mut e| {
        if e.line.is_none() {
            e.line = e.field.as_deref().and_then(|f| locate(text, f));
        }
        e
    })?;
    Ok(config)
}

/// Line of the key named by the last component of a dotted field path.
fn locate(text: &str, field: &str) -> Option<usize> {
    let key = field.rsplit('.').next()?;
    let key = key.split('[').next()?;
    text.lines()
        .position(|l| {
            let l = l.trim_start();
            l.strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map(|i| i + 1)
}

fn finite(field: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be finite, got {v}")))
    }
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.potential.time_dependent {
            return Err(invalid(
                "potential.time_dependent",
                "only static potentials are supported",
            ));
        }
        self.frequencies()?;
        finite("potential.scale", self.potential.scale)?;
        if let Some(g) = self.equation.g {
            finite("equation.g", g)?;
        }
        match &self.equation.theta {
            Some(ThetaSource::Keyword(k)) if k != "lift" => {
                return Err(invalid(
                    "equation.theta",
                    format!("expected a number, a matrix or \"lift\", got {k:?}"),
                ));
            }
            Some(ThetaSource::Planar(t)) => finite("equation.theta", *t)?,
            Some(ThetaSource::Matrix(rows)) => {
                let n = rows.len();
                for (i, row) in rows.iter().enumerate() {
                    if row.len() != n {
                        return Err(invalid("equation.theta", "matrix must be square"));
                    }
                    for (j, v) in row.iter().enumerate() {
                        if !v.is_finite() || *v != -rows[j][i] {
                            return Err(invalid(
                                "equation.theta",
                                format!(
                                    "matrix must be finite and antisymmetric; fails at ({i}, {j})"
                                ),
                            ));
                        }
                    }
                }
            }
            _ => {}
        }
        let theta_needed = matches!(
            self.equation.variant,
            VariantKind::Noncommutative | VariantKind::WeakNoncommutative
        );
        if theta_needed && self.equation.theta.is_none() {
            return Err(invalid(
                "equation.theta",
                "required by noncommutative variants",
            ));
        }
        if let Some(points) = &self.grid.points {
            if points.is_empty() || points.iter().any(|&n| n < 4 || n % 2 != 0) {
                return Err(invalid(
                    "grid.points",
                    "each axis needs an even count of at least 4",
                ));
            }
            if let Some(b) = &self.grid.box_lengths {
                if b.len() != points.len() {
                    return Err(invalid(
                        "grid.box",
                        "needs one length per axis of grid.points",
                    ));
                }
            }
        }
        if let Some(b) = &self.grid.box_lengths {
            for (i, l) in b.iter().enumerate() {
                positive(&format!("grid.box[{i}]"), l.value)?;
            }
        }
        if let Some(dt) = self.time.dt {
            positive("time.dt", dt)?;
        }
        if let Some(t) = self.time.t_end {
            if !(t.is_finite() && t >= 0.0) {
                return Err(invalid(
                    "time.t_end",
                    format!("must be non-negative, got {t}"),
                ));
            }
        }
        if self.time.snapshot_every == Some(0) {
            return Err(invalid("time.snapshot_every", "must be at least 1"));
        }
        if let (Some(dt), Some(t)) = (self.time.dt, self.time.t_end) {
            starlattice::dynamics::step_count(dt, t)
                .map_err(|e| invalid("time.t_end", e.to_string()))?;
        }
        finite("initial.amplitude", self.initial.amplitude)?;
        if let Some(w) = self.initial.width {
            positive("initial.width", w)?;
        }
        if let Some(c) = &self.initial.center {
            for (i, v) in c.iter().enumerate() {
                finite(&format!("initial.center[{i}]"), *v)?;
            }
        }
        if self.initial.kind == InitialKind::PlaneWave && self.initial.modes.is_none() {
            return Err(invalid(
                "initial.modes",
                "required for a plane-wave initial state",
            ));
        }
        let e = &self.envelope;
        if !(e.cutoff_fraction > 0.0 && e.cutoff_fraction <= 1.0) {
            return Err(invalid("envelope.cutoff_fraction", "must lie in (0, 1]"));
        }
        if self.experiment.depth == 0 {
            return Err(invalid("experiment.depth", "must be at least 1"));
        }
        finite("experiment.lift_epsilon", self.experiment.lift_epsilon)?;
        if self.experiment.lift_mode == 0 {
            return Err(invalid("experiment.lift_mode", "must be at least 1"));
        }
        if let Some(t) = self.experiment.theta_override {
            finite("experiment.theta_override", t)?;
        }
        for (i, t) in self.experiment.star_thetas.iter().enumerate() {
            finite(&format!("experiment.star_thetas[{i}]"), *t)?;
        }
        if self.output.dir.is_empty() {
            return Err(invalid("output.dir", "must not be empty"));
        }
        Ok(())
    }

    pub fn frequencies(&self) -> Result<Vec<ExactFrequency>, ConfigError> {
        let list = &self.potential.frequencies;
        if list.is_empty() || list.len() > 2 {
            return Err(invalid(
                "potential.frequencies",
                "needs one or two frequencies",
            ));
        }
        list.iter()
            .enumerate()
            .map(|(i, s)| {
                s.parse::<ExactFrequency>()
                    .map_err(|e| invalid(format!("potential.frequencies[{i}]"), e.to_string()))
            })
            .collect()
    }

    pub fn potential_spec(&self) -> Result<QuasiPotentialSpec, ConfigError> {
        QuasiPotentialSpec::new(self.frequencies()?)
            .map_err(|e| invalid("potential.frequencies", e.to_string()))
    }

    /// Copy with every subcommand-dependent default filled in.
    pub fn resolved_for(&self, command: Command) -> RunConfig {
        let d = defaults_for(command);
        let mut out = self.clone();
        out.equation.g.get_or_insert(d.g);
        let points = out.grid.points.get_or_insert(d.points).clone();
        out.grid.box_lengths.get_or_insert_with(|| {
            let base = defaults_for(command).box_lengths;
            (0..points.len())
                .map(|i| base[i.min(base.len() - 1)].clone())
                .collect()
        });
        out.time.dt.get_or_insert(d.dt);
        out.time.t_end.get_or_insert(d.t_end);
        out.time.snapshot_every.get_or_insert(d.snapshot_every);
        out.initial.width.get_or_insert(d.width);
        out
    }

    pub fn g(&self) -> f64 {
        self.equation.g.unwrap_or(1.0)
    }

    pub fn points(&self) -> Vec<usize> {
        self.grid.points.clone().unwrap_or_default()
    }

    pub fn box_lengths(&self) -> Vec<f64> {
        self.grid
            .box_lengths
            .as_ref()
            .map(|b| b.iter().map(|l| l.value).collect())
            .unwrap_or_default()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}
