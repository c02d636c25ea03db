//! CSV ingestion and export.
//!
//! Column names are fixed: `q`, `delta`, `t`, `z`, `g`, `period`, `x1`..`xk`.
//! Indicators are written as integer `0`/`1`. Unknown columns are ignored with
//! a warning. Floats are written in shortest round-trip form, so
//! `load_csv(write_csv(s)) == s`.

use std::collections::HashMap;
use std::path::Path;

use crate::data::{CensoredSample, Observation, Schema};
use crate::error::{Error, Result};

/// Optional columns the caller needs; absence is an error.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SchemaHint {
    pub require_treatment: bool,
    pub require_instrument: bool,
    pub require_did: bool,
}

pub fn load_csv(path: impl AsRef<Path>, hint: SchemaHint) -> Result<CensoredSample> {
    let file = std::fs::File::open(path)?;
    read_csv(file, hint)
}

struct Columns {
    q: usize,
    delta: usize,
    t: Option<usize>,
    z: Option<usize>,
    g: Option<usize>,
    period: Option<usize>,
    x: Vec<usize>,
}

fn locate_columns(headers: &csv::StringRecord, hint: SchemaHint) -> Result<Columns> {
    let mut index = HashMap::new();
    let mut covariates = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        let h = h.trim();
        match h {
            "q" | "delta" | "t" | "z" | "g" | "period" => {
                index.insert(h.to_string(), i);
            }
            _ => match h.strip_prefix('x').and_then(|s| s.parse::<usize>().ok()) {
                Some(j) if j >= 1 => covariates.push((j, i)),
                _ => log::warn!("ignoring unknown column {h:?}"),
            },
        }
    }
    covariates.sort_unstable();
    for (expected, &(j, _)) in (1..).zip(covariates.iter()) {
        if j != expected {
            return Err(Error::MissingColumn(format!("x{expected}")));
        }
    }
    let get = |name: &str| index.get(name).copied();
    let required = |name: &str| get(name).ok_or_else(|| Error::MissingColumn(name.into()));
    let cols = Columns {
        q: required("q")?,
        delta: required("delta")?,
        t: get("t"),
        z: get("z"),
        g: get("g"),
        period: get("period"),
        x: covariates.into_iter().map(|(_, i)| i).collect(),
    };
    if hint.require_treatment && cols.t.is_none() {
        return Err(Error::MissingColumn("t".into()));
    }
    if hint.require_instrument && cols.z.is_none() {
        return Err(Error::InstrumentRequired);
    }
    if hint.require_did && (cols.g.is_none() || cols.period.is_none()) {
        return Err(Error::DidColumnsRequired);
    }
    if cols.g.is_some() != cols.period.is_some() {
        let missing = if cols.g.is_none() { "g" } else { "period" };
        return Err(Error::MissingColumn(missing.into()));
    }
    Ok(cols)
}

fn field<'a>(rec: &'a csv::StringRecord, col: usize, name: &str, row: usize) -> Result<&'a str> {
    let raw = rec.get(col).unwrap_or("").trim();
    if raw.is_empty() {
        return Err(Error::MissingValue {
            column: name.into(),
            row,
        });
    }
    Ok(raw)
}

fn parse_real(rec: &csv::StringRecord, col: usize, name: &str, row: usize) -> Result<f64> {
    let raw = field(rec, col, name, row)?;
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::NonNumeric {
            column: name.into(),
            row,
            value: raw.into(),
        }),
    }
}

fn parse_bit(rec: &csv::StringRecord, col: usize, name: &str, row: usize) -> Result<bool> {
    let raw = field(rec, col, name, row)?;
    match raw.parse::<f64>() {
        Ok(0.0) => Ok(false),
        Ok(1.0) => Ok(true),
        _ => Err(Error::NonBinary {
            column: name.into(),
            row,
            value: raw.into(),
        }),
    }
}

/// Reads a sample from any CSV source; see [`load_csv`].
pub fn read_csv<R: std::io::Read>(reader: R, hint: SchemaHint) -> Result<CensoredSample> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let cols = locate_columns(rdr.headers()?, hint)?;
    let mut rows = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let q = parse_real(&rec, cols.q, "q", row)?;
        let delta = parse_bit(&rec, cols.delta, "delta", row)?;
        let z = cols.z.map(|c| parse_bit(&rec, c, "z", row)).transpose()?;
        let g = cols.g.map(|c| parse_bit(&rec, c, "g", row)).transpose()?;
        let period = cols
            .period
            .map(|c| parse_bit(&rec, c, "period", row))
            .transpose()?;
        // DID data without an explicit treatment column: T = G * I.
        let t = match cols.t {
            Some(c) => parse_bit(&rec, c, "t", row)?,
            None => g.unwrap_or(false) && period.unwrap_or(false),
        };
        let x = cols
            .x
            .iter()
            .enumerate()
            .map(|(j, &c)| parse_real(&rec, c, &format!("x{}", j + 1), row))
            .collect::<Result<Vec<_>>>()?;
        rows.push(Observation {
            q,
            delta,
            x,
            t,
            z,
            g,
            period,
        });
    }
    if rows.is_empty() {
        return Err(Error::EmptySample);
    }
    let schema = Schema {
        k: cols.x.len(),
        has_t: cols.t.is_some(),
        has_z: cols.z.is_some(),
        has_g: cols.g.is_some(),
        has_period: cols.period.is_some(),
    };
    CensoredSample::with_schema(rows, schema)
}

pub fn write_csv(sample: &CensoredSample, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv_to(sample, file)
}

pub fn write_csv_to<W: std::io::Write>(sample: &CensoredSample, writer: W) -> Result<()> {
    let schema = sample.schema();
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["q".to_string(), "delta".to_string()];
    for (present, name) in [
        (schema.has_t, "t"),
        (schema.has_z, "z"),
        (schema.has_g, "g"),
        (schema.has_period, "period"),
    ] {
        if present {
            header.push(name.into());
        }
    }
    header.extend((1..=schema.k).map(|j| format!("x{j}")));
    wtr.write_record(&header)?;
    let bit = |b: bool| if b { "1".to_string() } else { "0".to_string() };
    for o in sample.observations() {
        let mut rec = vec![o.q.to_string(), bit(o.delta)];
        if schema.has_t {
            rec.push(bit(o.t));
        }
        for v in [o.z, o.g, o.period].into_iter().flatten() {
            rec.push(bit(v));
        }
        rec.extend(o.x.iter().map(|v| v.to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}
