//! Subcommand dispatch and artifact writing.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use starlattice::envelope::forcing_non_growth;
use starlattice::quasilattice::quasiperiodic_potential;
use starlattice::{
    build_theta, diagram_commutation_experiment, evolve, limit_run_for, rational_approximants,
    ComparisonReport, Complex64, ComplexField, DiagramConfig, EnvelopeSpec, EquationSpec, Grid,
    LimitConfig, LimitRun, SimResult, ThetaTensor, Variant, Window,
};

use crate::config::{Command, InitialKind, RunConfig, ThetaSource, VariantKind, WindowKind};
use crate::output::{save_snapshot, write_csv, Precision};
use crate::starcheck::{format_table, star_check};

#[derive(Clone, Debug)]
pub struct RunOptions {
    /// Overrides `output.dir`.
    pub out: Option<PathBuf>,
    pub precision: Precision,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            out: None,
            precision: Precision::Complex128,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub out_dir: PathBuf,
    /// Human-readable summary printed by the binary.
    pub summary: String,
    /// False when a property the command checks does not hold.
    pub passed: bool,
}

#[derive(Serialize)]
struct Metadata<'a> {
    command: &'a str,
    version: &'a str,
    precision: u32,
    threads: usize,
    config: &'a RunConfig,
}

/// Runs one subcommand and writes its artifacts under the output directory.
pub fn run(command: Command, config: &RunConfig, options: &RunOptions) -> Result<Outcome> {
    config.validate()?;
    let config = config.resolved_for(command);
    let out_dir = options
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.output.dir));
    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let (summary, passed) = match command {
        Command::Simulate => simulate(&config, &out_dir, options.precision)?,
        Command::StarCheck => run_star_check(&config, &out_dir)?,
        Command::LimitExperiment => limit_experiment(&config, &out_dir)?,
        Command::DiagramExperiment => diagram_experiment(&config, &out_dir)?,
        Command::Approximants => approximants(&config, &out_dir)?,
    };
    let metadata = Metadata {
        command: command.name(),
        version: env!("CARGO_PKG_VERSION"),
        precision: options.precision.bits(),
        threads: rayon::current_num_threads(),
        config: &config,
    };
    fs::write(out_dir.join("metadata.toml"), toml::to_string(&metadata)?)?;
    Ok(Outcome {
        out_dir,
        summary,
        passed,
    })
}

pub fn envelope_spec(config: &RunConfig) -> Result<EnvelopeSpec> {
    let window = match config.envelope.window {
        WindowKind::Hard => Window::Hard,
        WindowKind::RaisedCosine => Window::RaisedCosine,
    };
    Ok(EnvelopeSpec::new(config.envelope.cutoff_fraction, window)?)
}

fn grid(config: &RunConfig) -> Result<Arc<Grid>> {
    Ok(Grid::new(config.points(), config.box_lengths())?)
}

fn theta(config: &RunConfig, dim: usize) -> Result<ThetaTensor> {
    let t = match config
        .equation
        .theta
        .as_ref()
        .context("equation.theta is required")?
    {
        ThetaSource::Planar(t) => ThetaTensor::planar(*t)?,
        ThetaSource::Matrix(rows) => ThetaTensor::new(rows.clone(), 1.0)?,
        ThetaSource::Keyword(_) => build_theta(&config.potential_spec()?),
    };
    if t.n() != dim {
        bail!(
            "equation.theta: tensor acts on {} coordinates but the grid has {dim}",
            t.n()
        );
    }
    Ok(t)
}

pub fn initial_state(config: &RunConfig, grid: &Arc<Grid>) -> Result<ComplexField> {
    let init = &config.initial;
    let dim = grid.dim();
    let center = match &init.center {
        Some(c) if c.len() != dim => bail!("initial.center: needs {dim} coordinates"),
        Some(c) => c.clone(),
        None => grid.lengths().iter().map(|l| 0.5 * l).collect(),
    };
    let width = init.width.unwrap_or(1.0);
    let amp = init.amplitude;
    let field = match init.kind {
        InitialKind::Sech => ComplexField::from_real_fn(grid, |x| {
            amp * x
                .iter()
                .zip(&center)
                .map(|(x, c)| 1.0 / ((x - c) / width).cosh())
                .product::<f64>()
        })?,
        InitialKind::Gaussian => ComplexField::from_real_fn(grid, |x| {
            let r2: f64 = x.iter().zip(&center).map(|(x, c)| (x - c).powi(2)).sum();
            amp * (-r2 / (2.0 * width * width)).exp()
        })?,
        InitialKind::PlaneWave => {
            let modes = init.modes.as_ref().context("initial.modes is required")?;
            if modes.len() != dim {
                bail!("initial.modes: needs {dim} mode numbers");
            }
            let k: Vec<f64> = modes
                .iter()
                .enumerate()
                .map(|(a, &m)| grid.mode_wavenumber(a, m))
                .collect();
            ComplexField::from_fn(grid, |x| {
                let phase: f64 = k.iter().zip(x).map(|(k, x)| k * x).sum();
                Complex64::from_polar(amp, phase)
            })?
        }
    };
    Ok(field)
}

pub fn equation(config: &RunConfig, grid: &Arc<Grid>) -> Result<EquationSpec> {
    let variant = match config.equation.variant {
        VariantKind::PotentialFree => Variant::PotentialFree,
        VariantKind::CommutativePotential => {
            let spec = config.potential_spec()?;
            let v = quasiperiodic_potential(&spec, grid)?
                .scale(Complex64::new(config.potential.scale, 0.0));
            Variant::CommutativePotential(v)
        }
        VariantKind::Noncommutative => Variant::Noncommutative(theta(config, grid.dim())?),
        VariantKind::WeakNoncommutative => Variant::WeakNoncommutative(theta(config, grid.dim())?),
    };
    Ok(EquationSpec::new(grid, variant, config.g())?)
}

/// Runs the simulation described by a resolved configuration.
pub fn simulation(config: &RunConfig) -> Result<SimResult> {
    let grid = grid(config)?;
    let psi0 = initial_state(config, &grid)?;
    let eq = equation(config, &grid)?;
    Ok(evolve(
        &psi0,
        &eq,
        config.time.dt.unwrap_or_default(),
        config.time.t_end.unwrap_or_default(),
        config.time.snapshot_every.unwrap_or(1),
    )?)
}

pub fn snapshot_name(index: usize) -> String {
    format!("snapshot_{index:05}.bin")
}

fn simulate(config: &RunConfig, out: &Path, precision: Precision) -> Result<(String, bool)> {
    let result = simulation(config)?;
    if config.output.snapshots {
        let dir = out.join("snapshots");
        fs::create_dir_all(&dir)?;
        for (i, (t, field)) in result.snapshots.iter().enumerate() {
            save_snapshot(&dir.join(snapshot_name(i)), field, *t, precision)?;
        }
    }
    let rows = result
        .mass_series
        .iter()
        .zip(&result.energy_series)
        .map(|(&(t, m), &(_, e))| (t, m, e));
    write_csv(
        &out.join("diagnostics.csv"),
        &["time", "mass", "energy"],
        rows,
    )?;
    let drift = |s: &[(f64, f64)]| {
        let first = s[0].1;
        s.iter()
            .map(|(_, v)| ((v - first) / first).abs())
            .fold(0.0, f64::max)
    };
    let summary = format!(
        "{} steps of {} ({} snapshots)\nrelative mass drift   {:.3e}\nrelative energy drift {:.3e}\n",
        result.settings.steps,
        result.settings.variant,
        result.snapshots.len(),
        drift(&result.mass_series),
        drift(&result.energy_series),
    );
    Ok((summary, true))
}

fn run_star_check(config: &RunConfig, out: &Path) -> Result<(String, bool)> {
    let rows = star_check(&config.experiment.star_thetas, config.experiment.seed)?;
    write_csv(
        &out.join("star_check.csv"),
        &["theta0", "property", "residual", "tolerance", "pass"],
        &rows,
    )?;
    Ok((format_table(&rows), rows.iter().all(|r| r.pass)))
}

pub fn limit_config(config: &RunConfig) -> Result<LimitConfig> {
    let points = config.points();
    if points.len() != 1 {
        bail!("grid.points: the limit experiment runs on a 1D grid");
    }
    Ok(LimitConfig {
        points: points[0],
        box_length: config.box_lengths()[0],
        g: config.g(),
        dt: config.time.dt.unwrap_or_default(),
        t_end: config.time.t_end.unwrap_or_default(),
        snapshot_every: config.time.snapshot_every.unwrap_or(1),
        sigma: config.initial.width.unwrap_or(1.0),
        potential_scale: config.potential.scale,
        envelope: envelope_spec(config)?,
    })
}

/// One row of the limit-experiment report.
#[derive(Serialize)]
struct LimitRow {
    depth: usize,
    approximant: String,
    time: f64,
    relative_l2: f64,
    phase_aligned_l2: f64,
    max_pointwise: f64,
    inferred_forcing_norm: f64,
}

pub fn limit_runs(config: &RunConfig) -> Result<Vec<LimitRun>> {
    let spec = config.potential_spec()?;
    if spec.n() != 1 {
        bail!("potential.frequencies: the limit experiment takes one frequency");
    }
    let cfg = limit_config(config)?;
    let ws = rational_approximants(&spec.frequencies()[0], config.experiment.depth)?;
    Ok(ws
        .into_par_iter()
        .map(|w| limit_run_for(w, &cfg))
        .collect::<starlattice::Result<Vec<_>>>()?)
}

fn report_rows(report: &ComparisonReport) -> impl Iterator<Item = (f64, f64, f64, f64, f64)> + '_ {
    (0..report.times.len()).map(move |i| {
        (
            report.times[i],
            report.relative_l2[i],
            report.phase_aligned_l2[i],
            report.max_pointwise[i],
            report.inferred_forcing_norm[i],
        )
    })
}

fn limit_experiment(config: &RunConfig, out: &Path) -> Result<(String, bool)> {
    let runs = limit_runs(config)?;
    let rows = runs.iter().enumerate().flat_map(|(i, run)| {
        report_rows(&run.report).map(move |(time, rel, phase, max, forcing)| LimitRow {
            depth: i + 1,
            approximant: run.approximant.to_string(),
            time,
            relative_l2: rel,
            phase_aligned_l2: phase,
            max_pointwise: max,
            inferred_forcing_norm: forcing,
        })
    });
    write_csv(
        &out.join("report.csv"),
        &[
            "depth",
            "approximant",
            "time",
            "relative_l2",
            "phase_aligned_l2",
            "max_pointwise",
            "inferred_forcing_norm",
        ],
        rows,
    )?;
    let summary_rows: Vec<_> = runs
        .iter()
        .enumerate()
        .map(|(i, r)| {
            (
                i + 1,
                r.approximant.to_string(),
                r.report.final_forcing(),
                *r.report.relative_l2.last().unwrap_or(&f64::NAN),
                r.envelope_mass_error,
            )
        })
        .collect();
    write_csv(
        &out.join("summary.csv"),
        &[
            "depth",
            "approximant",
            "end_forcing",
            "end_relative_l2",
            "envelope_mass_error",
        ],
        &summary_rows,
    )?;
    let (max, first, pass) = forcing_non_growth(&runs);
    let mut text = format!(
        "{:>5}  {:<12} {:>12} {:>12}\n",
        "depth", "approximant", "end forcing", "end rel l2"
    );
    for (d, w, f, r, _) in &summary_rows {
        text.push_str(&format!("{d:>5}  {w:<12} {f:>12.4e} {r:>12.4e}\n"));
    }
    text.push_str(&format!(
        "forcing non-growth: max {max:.4e} vs depth-1 {first:.4e} ({})\n",
        if pass { "pass" } else { "FAIL" }
    ));
    Ok((text, pass))
}

pub fn diagram_config(config: &RunConfig) -> Result<DiagramConfig> {
    let points = config.points();
    if points.len() != 2 {
        bail!("grid.points: the diagram experiment runs on a 2D grid");
    }
    let lengths = config.box_lengths();
    Ok(DiagramConfig {
        points: [points[0], points[1]],
        box_x: lengths[0],
        box_y: lengths[1],
        g: config.g(),
        dt: config.time.dt.unwrap_or_default(),
        t_end: config.time.t_end.unwrap_or_default(),
        snapshot_every: config.time.snapshot_every.unwrap_or(1),
        sigma: config.initial.width.unwrap_or(1.0),
        potential_scale: config.potential.scale,
        lift_epsilon: config.experiment.lift_epsilon,
        lift_mode: config.experiment.lift_mode,
        theta_override: config.experiment.theta_override,
        envelope: envelope_spec(config)?,
    })
}

/// `relative_l2` at the end divided by its first nonzero value.
pub fn end_to_start_ratio(report: &ComparisonReport) -> f64 {
    let start = report.relative_l2.iter().copied().find(|v| *v > 0.0);
    match (start, report.relative_l2.last()) {
        (Some(s), Some(e)) => e / s,
        _ => 1.0,
    }
}

fn diagram_experiment(config: &RunConfig, out: &Path) -> Result<(String, bool)> {
    let spec = config.potential_spec()?;
    let outcome = diagram_commutation_experiment(&spec, &diagram_config(config)?)?;
    let report = &outcome.report;
    write_csv(
        &out.join("report.csv"),
        &[
            "time",
            "relative_l2",
            "phase_aligned_l2",
            "max_pointwise",
            "inferred_forcing_norm",
        ],
        report_rows(report),
    )?;
    let finite = report.is_finite();
    let growth = report.growth_factor();
    let text = format!(
        "theta01 {}\nmax interpolation offset {:.3} cells{}\nfinal relative l2 {:.4e}\ngrowth factor (second half / first half) {:.3}\nend / start ratio {:.3}\nfinite {}\n",
        outcome.theta.get(0, 1),
        outcome.max_offset,
        if outcome.interpolation_degraded { " (degraded)" } else { "" },
        report.relative_l2.last().copied().unwrap_or(f64::NAN),
        growth,
        end_to_start_ratio(report),
        finite,
    );
    Ok((text, finite && growth <= 10.0))
}

fn approximants(config: &RunConfig, out: &Path) -> Result<(String, bool)> {
    let omega = config.frequencies()?[0];
    let ws = rational_approximants(&omega, config.experiment.depth)?;
    let target = omega.to_f64();
    let rows: Vec<_> = ws
        .iter()
        .enumerate()
        .map(|(i, w)| {
            (
                i + 1,
                w.to_string(),
                w.numer(),
                w.denom(),
                w.to_f64(),
                (w.to_f64() - target).abs(),
            )
        })
        .collect();
    write_csv(
        &out.join("approximants.csv"),
        &[
            "depth",
            "approximant",
            "numerator",
            "denominator",
            "value",
            "abs_error",
        ],
        &rows,
    )?;
    let mut text = format!(
        "convergents of {omega}\n{:>5}  {:<14} {:>20} {:>12}\n",
        "depth", "w", "value", "|w - omega|"
    );
    for (d, w, _, _, v, e) in &rows {
        text.push_str(&format!("{d:>5}  {w:<14} {v:>20.15} {e:>12.3e}\n"));
    }
    Ok((text, true))
}
