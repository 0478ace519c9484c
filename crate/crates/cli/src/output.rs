//! Snapshot files, CSV tables and the metadata echo.

use std::fs;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use starlattice::{Complex64, ComplexField, Grid};

pub const SNAPSHOT_MAGIC: &str = "starlattice-snapshot 1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precision {
    /// Two little-endian `f32` per value.
    Complex64,
    /// Two little-endian `f64` per value.
    Complex128,
}

impl Precision {
    pub fn from_bits(bits: u32) -> Result<Self> {
        match bits {
            64 => Ok(Precision::Complex64),
            128 => Ok(Precision::Complex128),
            other => bail!("precision must be 64 or 128, got {other}"),
        }
    }

    pub fn dtype(self) -> &'static str {
        match self {
            Precision::Complex64 => "complex64",
            Precision::Complex128 => "complex128",
        }
    }

    pub fn bits(self) -> u32 {
        match self {
            Precision::Complex64 => 64,
            Precision::Complex128 => 128,
        }
    }

    /// The value a field entry takes after a write/read cycle.
    pub fn quantize(self, z: Complex64) -> Complex64 {
        match self {
            Precision::Complex64 => Complex64::new(z.re as f32 as f64, z.im as f32 as f64),
            Precision::Complex128 => z,
        }
    }
}

fn join(values: impl IntoIterator<Item = String>) -> String {
    values.into_iter().collect::<Vec<_>>().join(" ")
}

/// Plain-text header terminated by `end`, then the raw row-major payload.
pub fn write_snapshot(
    w: &mut impl Write,
    field: &ComplexField,
    time: f64,
    precision: Precision,
) -> io::Result<()> {
    let grid = field.grid();
    writeln!(w, "{SNAPSHOT_MAGIC}")?;
    writeln!(w, "dims {}", grid.dim())?;
    writeln!(
        w,
        "shape {}",
        join(grid.points().iter().map(|n| n.to_string()))
    )?;
    writeln!(
        w,
        "box {}",
        join(grid.lengths().iter().map(|l| format!("{l:?}")))
    )?;
    writeln!(w, "dtype {}", precision.dtype())?;
    writeln!(w, "endian little")?;
    writeln!(w, "order row-major")?;
    writeln!(w, "time {time:?}")?;
    writeln!(w, "end")?;
    let mut buf = Vec::with_capacity(field.values().len() * 16);
    for z in field.values() {
        match precision {
            Precision::Complex64 => {
                buf.extend_from_slice(&(z.re as f32).to_le_bytes());
                buf.extend_from_slice(&(z.im as f32).to_le_bytes());
            }
            Precision::Complex128 => {
                buf.extend_from_slice(&z.re.to_le_bytes());
                buf.extend_from_slice(&z.im.to_le_bytes());
            }
        }
    }
    w.write_all(&buf)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub precision: Precision,
    pub field: ComplexField,
}

pub fn read_snapshot(r: impl Read) -> Result<Snapshot> {
    let mut r = BufReader::new(r);
    let mut line = String::new();
    let mut next_line = |r: &mut BufReader<_>| -> Result<String> {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            bail!("snapshot header ended early");
        }
        Ok(line.trim_end_matches('\n').to_string())
    };
    if next_line(&mut r)? != SNAPSHOT_MAGIC {
        bail!("not a snapshot file");
    }
    let (mut shape, mut lengths, mut dtype, mut time) = (None, None, None, None);
    loop {
        let l = next_line(&mut r)?;
        if l == "end" {
            break;
        }
        let (key, value) = l
            .split_once(' ')
            .ok_or_else(|| anyhow!("malformed header line {l:?}"))?;
        match key {
            "dims" | "order" => {}
            "endian" if value == "little" => {}
            "shape" => {
                shape = Some(
                    value
                        .split(' ')
                        .map(str::parse)
                        .collect::<Result<Vec<usize>, _>>()?,
                )
            }
            "box" => {
                lengths = Some(
                    value
                        .split(' ')
                        .map(str::parse)
                        .collect::<Result<Vec<f64>, _>>()?,
                )
            }
            "dtype" => {
                dtype = Some(match value {
                    "complex64" => Precision::Complex64,
                    "complex128" => Precision::Complex128,
                    other => bail!("unknown dtype {other}"),
                })
            }
            "time" => time = Some(value.parse::<f64>()?),
            _ => bail!("unexpected header line {l:?}"),
        }
    }
    let shape = shape.context("header lacks shape")?;
    let precision = dtype.context("header lacks dtype")?;
    let grid: Arc<Grid> = Grid::new(shape, lengths.context("header lacks box")?)?;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    let width = precision.bits() as usize / 16;
    if payload.len() != grid.len() * 2 * width {
        bail!(
            "payload holds {} bytes, expected {}",
            payload.len(),
            grid.len() * 2 * width
        );
    }
    let values = payload
        .chunks_exact(2 * width)
        .map(|c| match precision {
            Precision::Complex64 => Complex64::new(
                f32::from_le_bytes(c[..4].try_into().unwrap()) as f64,
                f32::from_le_bytes(c[4..].try_into().unwrap()) as f64,
            ),
            Precision::Complex128 => Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            ),
        })
        .collect();
    Ok(Snapshot {
        time: time.context("header lacks time")?,
        precision,
        field: ComplexField::new(&grid, values)?,
    })
}

pub fn save_snapshot(
    path: &Path,
    field: &ComplexField,
    time: f64,
    precision: Precision,
) -> Result<()> {
    let mut f = io::BufWriter::new(
        fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    write_snapshot(&mut f, field, time, precision)?;
    f.flush()?;
    Ok(())
}

pub fn load_snapshot(path: &Path) -> Result<Snapshot> {
    read_snapshot(fs::File::open(path).with_context(|| format!("opening {}", path.display()))?)
}

/// Writes a header row and records; floats use the shortest round-trip form.
pub fn write_csv<R: serde::Serialize>(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = R>,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
