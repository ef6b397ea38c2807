//! Text outputs: JSON Lines and JSON documents with a fixed float format, CSV
//! tables, and the run manifest.
//!
//! Every float is written as `{:.16e}` (17 significant digits), so identical
//! runs produce byte-identical files and values round-trip exactly.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};

use crate::config::ConfigSummary;
use crate::error::{Error, Result};

/// A float in the fixed output format.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

macro_rules! fixed_floats {
    ($name:ident, $inner:ty) => {
        struct $name<'a>($inner, std::marker::PhantomData<&'a ()>);

        impl Formatter for $name<'_> {
            fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
                write!(w, "{value:.16e}")
            }
            fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
                write!(w, "{:.16e}", value as f64)
            }
            fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
                self.0.begin_array(w)
            }
            fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
                self.0.end_array(w)
            }
            fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
                self.0.begin_array_value(w, first)
            }
            fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
                self.0.end_array_value(w)
            }
            fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
                self.0.begin_object(w)
            }
            fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
                self.0.end_object(w)
            }
            fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
                self.0.begin_object_key(w, first)
            }
            fn end_object_key<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
                self.0.end_object_key(w)
            }
            fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
                self.0.begin_object_value(w)
            }
            fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
                self.0.end_object_value(w)
            }
        }
    };
}

fixed_floats!(Compact, CompactFormatter);
fixed_floats!(Pretty, PrettyFormatter<'a>);

fn json_err(e: serde_json::Error) -> Error {
    Error::Internal(format!("serialisation failed: {e}"))
}

/// One-line JSON.
pub fn to_json_line<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Compact(CompactFormatter, Default::default()));
    value.serialize(&mut ser).map_err(json_err)?;
    Ok(String::from_utf8(buf).expect("JSON is UTF-8"))
}

/// Indented JSON.
pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Pretty(PrettyFormatter::new(), Default::default()));
    value.serialize(&mut ser).map_err(json_err)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("JSON is UTF-8"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json_pretty(value)?)?;
    Ok(())
}

pub fn write_jsonl<'a, T: Serialize + 'a>(path: &Path, items: impl IntoIterator<Item = &'a T>) -> Result<usize> {
    let mut f = BufWriter::new(fs::File::create(path)?);
    let mut count = 0;
    for item in items {
        writeln!(f, "{}", to_json_line(item)?)?;
        count += 1;
    }
    f.flush()?;
    Ok(count)
}

/// Reads one JSON document per non-empty line; errors name the line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Input(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

/// CSV with a header and fixed-format floats.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<usize> {
    let mut f = BufWriter::new(fs::File::create(path)?);
    writeln!(f, "{}", header.join(","))?;
    let mut count = 0;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|x| fmt_f64(*x)).collect();
        writeln!(f, "{}", cells.join(","))?;
        count += 1;
    }
    f.flush()?;
    Ok(count)
}

/// Reads a numeric CSV with a header, returning the header and the rows.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Input(format!("{}: empty CSV", path.display())))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Input(format!("{}: row {}: {e}", path.display(), i + 1)))?;
        if row.len() != header.len() {
            return Err(Error::Input(format!("{}: row {} has {} cells", path.display(), i + 1, row.len())));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

/// One entry of the flat-energy log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub step: u64,
    pub t: f64,
    #[serde(rename = "E")]
    pub energy: f64,
    /// Largest `|v|, |w|` outside the light cone `|x| ≤ t − 1`.
    pub leakage: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: PathBuf,
    pub records: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub steps: u64,
    pub final_t: f64,
    /// `max |E(t) − E(t₀)| / E(t₀)` over the energy log.
    pub energy_drift: f64,
    pub max_leakage: f64,
    pub slices_completed: usize,
    pub slices_total: usize,
    pub sobolev_holds: bool,
    pub growth_exponent: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub code_version: String,
    pub config: ConfigSummary,
    /// Seconds since the Unix epoch; the only fields that differ between identical runs.
    pub started_at: f64,
    pub finished_at: f64,
    pub resumed_from_step: Option<u64>,
    pub artifacts: Vec<Artifact>,
    pub diagnostics: Diagnostics,
}

pub fn unix_time() -> f64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}
