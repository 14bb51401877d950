//! CSV and JSON-lines ingestion. Diagnostics carry 1-based line numbers.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use super::DiscreteMeasure;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureFormat {
    /// One atom per line: coordinates, then an optional weight column.
    Csv,
    /// One object per line: `{"x": [...], "w": 1.0}` with `w` optional.
    Jsonl,
}

impl FromStr for MeasureFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "jsonl" | "ndjson" => Ok(Self::Jsonl),
            other => Err(Error::Invalid(format!("unknown measure format {other:?}"))),
        }
    }
}

impl MeasureFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        path.extension().and_then(|e| e.to_str()).and_then(|e| e.parse().ok())
    }
}

/// Reads a measure. With `num_vars = Some(n)` a CSV row may carry `n` or
/// `n + 1` columns (the extra one is the weight); with `None` every column
/// is a coordinate. Missing weights default to 1.
pub fn load_measure<R: Read>(source: R, format: MeasureFormat, num_vars: Option<usize>) -> Result<DiscreteMeasure> {
    let mut acc = Accumulator { num_vars, atoms: Vec::new(), weights: Vec::new() };
    match format {
        MeasureFormat::Csv => read_csv(source, &mut acc)?,
        MeasureFormat::Jsonl => read_jsonl(source, &mut acc)?,
    }
    let n = acc.num_vars.ok_or(Error::NoAtoms)?;
    DiscreteMeasure::new(n, acc.atoms, acc.weights)
}

pub fn load_measure_path(path: &Path, format: Option<MeasureFormat>, num_vars: Option<usize>) -> Result<DiscreteMeasure> {
    let format = format
        .or_else(|| MeasureFormat::from_path(path))
        .ok_or_else(|| Error::Invalid(format!("cannot infer format of {}", path.display())))?;
    load_measure(BufReader::new(File::open(path)?), format, num_vars)
}

struct Accumulator {
    num_vars: Option<usize>,
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl Accumulator {
    fn push(&mut self, line: usize, coords: &[f64], weight: Option<f64>) -> Result<()> {
        match self.num_vars {
            Some(n) if n != coords.len() => {
                return Err(Error::Parse { row: line, msg: format!("expected {n} coordinates, got {}", coords.len()) })
            }
            Some(_) => {}
            None if coords.is_empty() => return Err(Error::Parse { row: line, msg: "no coordinates".into() }),
            None => self.num_vars = Some(coords.len()),
        }
        if let Some(i) = coords.iter().position(|x| !x.is_finite()) {
            return Err(Error::Parse { row: line, msg: format!("non-finite coordinate {}", coords[i]) });
        }
        let w = weight.unwrap_or(1.0);
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::Parse { row: line, msg: format!("non-positive weight {w}") });
        }
        self.atoms.extend_from_slice(coords);
        self.weights.push(w);
        Ok(())
    }
}

fn read_csv<R: Read>(source: R, acc: &mut Accumulator) -> Result<()> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let declared = acc.num_vars;
    let mut width: Option<usize> = None;
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(i + 1);
            Error::Parse { row: line, msg: e.to_string() }
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(i + 1);
        if record.iter().all(str::is_empty) {
            continue;
        }
        values.clear();
        let mut numeric = true;
        for field in record.iter() {
            match field.parse::<f64>() {
                Ok(v) => values.push(v),
                Err(_) => {
                    numeric = false;
                    break;
                }
            }
        }
        if !numeric {
            if i == 0 {
                continue; // header
            }
            return Err(Error::Parse { row: line, msg: format!("non-numeric field in {:?}", record.iter().collect::<Vec<_>>()) });
        }
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(Error::Parse { row: line, msg: format!("expected {w} columns, got {}", values.len()) })
            }
            Some(_) => {}
        }
        let (coords, weight) = match declared {
            Some(n) if values.len() == n + 1 => (&values[..n], Some(values[n])),
            Some(n) if values.len() == n => (&values[..], None),
            Some(n) => {
                return Err(Error::Parse {
                    row: line,
                    msg: format!("expected {n} or {} columns, got {}", n + 1, values.len()),
                })
            }
            None => (&values[..], None),
        };
        acc.push(line, coords, weight)?;
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonAtom {
    x: Vec<f64>,
    #[serde(default)]
    w: Option<f64>,
}

fn read_jsonl<R: Read>(source: R, acc: &mut Accumulator) -> Result<()> {
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let atom: JsonAtom =
            serde_json::from_str(text).map_err(|e| Error::Parse { row: line_no, msg: e.to_string() })?;
        acc.push(line_no, &atom.x, atom.w)?;
    }
    Ok(())
}
