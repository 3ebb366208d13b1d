//! CSV and plain-text formats for tables, bundles, curves, pointer records and
//! density matrices. Writers are deterministic: floats use Rust's shortest
//! round-trip formatting, and rows follow a fixed canonical order.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::linalg::{Mat4, C64, ZERO4};
use crate::model::{Context, ContextDataset, CounterfactualRow, CounterfactualTable, ExperimentBundle, Outcome};
use crate::quantum::{AngleQuadruple, DensityMatrix};
use crate::stats::StudyRow;
use crate::weak::PerPairRecord;

pub const TABLE_HEADER: [&str; 5] = ["trial", "a1", "a2", "b1", "b2"];
pub const DATASET_HEADER: [&str; 3] = ["trial", "a", "b"];
pub const BUNDLE_HEADER: [&str; 5] = ["trial", "context_i", "context_j", "a", "b"];
pub const WEAK_HEADER: [&str; 6] = ["trial", "rA1", "rA2", "rB1", "rB2", "bvalue"];
pub const CURVE_HEADER: [&str; 8] = ["n", "trials", "frequency", "ci_lo", "ci_hi", "mean_s", "sd_s", "z"];

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::Parse { line, msg: format!("{kind:?}") },
    }
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn reader<R: Read>(r: R, header: &[&str]) -> Result<csv::Reader<R>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(r);
    let found = rdr.headers().map_err(csv_error)?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header `{}`, found `{}`", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
        });
    }
    Ok(rdr)
}

fn records<R: Read>(rdr: &mut csv::Reader<R>) -> impl Iterator<Item = Result<(usize, csv::StringRecord)>> + '_ {
    rdr.records().map(|r| {
        let rec = r.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        Ok((line, rec))
    })
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, line: usize, name: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = rec.get(idx).ok_or_else(|| Error::Parse { line, msg: format!("missing column `{name}`") })?;
    raw.parse().map_err(|e| Error::Parse { line, msg: format!("column `{name}`: {e} (`{raw}`)") })
}

fn outcome(rec: &csv::StringRecord, idx: usize, line: usize, name: &str) -> Result<Outcome> {
    let v: i64 = field(rec, idx, line, name)?;
    Outcome::new(v).map_err(|e| Error::Parse { line, msg: format!("column `{name}`: {e}") })
}

fn flush<W: Write>(w: csv::Writer<W>) -> Result<()> {
    w.into_inner().map_err(|e| Error::Io(e.into_error()))?.flush()?;
    Ok(())
}

pub fn write_table<W: Write>(table: &CounterfactualTable, out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record(TABLE_HEADER).map_err(csv_error)?;
    for (t, row) in table.rows.iter().enumerate() {
        let v = row.values();
        w.write_record([t.to_string(), v[0].to_string(), v[1].to_string(), v[2].to_string(), v[3].to_string()])
            .map_err(csv_error)?;
    }
    flush(w)
}

pub fn read_table<R: Read>(input: R) -> Result<CounterfactualTable> {
    let mut rdr = reader(input, &TABLE_HEADER)?;
    let mut rows = Vec::new();
    for r in records(&mut rdr) {
        let (line, rec) = r?;
        let o = |i: usize| outcome(&rec, i, line, TABLE_HEADER[i]);
        rows.push(CounterfactualRow::new(o(1)?, o(2)?, o(3)?, o(4)?));
    }
    Ok(CounterfactualTable::new(rows))
}

pub fn write_dataset<W: Write>(dataset: &ContextDataset, out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record(DATASET_HEADER).map_err(csv_error)?;
    for (t, (a, b)) in dataset.pairs.iter().enumerate() {
        w.write_record([t.to_string(), a.value().to_string(), b.value().to_string()]).map_err(csv_error)?;
    }
    flush(w)
}

pub fn read_dataset<R: Read>(context: Context, input: R) -> Result<ContextDataset> {
    let mut rdr = reader(input, &DATASET_HEADER)?;
    let mut pairs = Vec::new();
    for r in records(&mut rdr) {
        let (line, rec) = r?;
        pairs.push((outcome(&rec, 1, line, "a")?, outcome(&rec, 2, line, "b")?));
    }
    Ok(ContextDataset::new(context, pairs))
}

/// All four datasets in canonical context order, trial index restarting per context.
pub fn write_bundle<W: Write>(bundle: &ExperimentBundle, out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record(BUNDLE_HEADER).map_err(csv_error)?;
    for d in bundle.datasets() {
        let (i, j) = (d.context.alice.index().to_string(), d.context.bob.index().to_string());
        for (t, (a, b)) in d.pairs.iter().enumerate() {
            w.write_record([t.to_string(), i.clone(), j.clone(), a.value().to_string(), b.value().to_string()])
                .map_err(csv_error)?;
        }
    }
    flush(w)
}

pub fn read_bundle<R: Read>(input: R) -> Result<ExperimentBundle> {
    let mut rdr = reader(input, &BUNDLE_HEADER)?;
    let mut pairs: [Vec<(Outcome, Outcome)>; 4] = Default::default();
    for r in records(&mut rdr) {
        let (line, rec) = r?;
        let i: u8 = field(&rec, 1, line, "context_i")?;
        let j: u8 = field(&rec, 2, line, "context_j")?;
        let ctx = Context::from_indices(i, j).map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        pairs[ctx.slot()].push((outcome(&rec, 3, line, "a")?, outcome(&rec, 4, line, "b")?));
    }
    if let Some(c) = Context::ALL.iter().find(|c| pairs[c.slot()].is_empty()) {
        return Err(Error::config(format!("bundle has no rows for context {c}")));
    }
    let datasets = Context::ALL.iter().zip(pairs).map(|(&c, p)| ContextDataset::new(c, p)).collect();
    ExperimentBundle::new(datasets)
}

pub fn write_weak_records<W: Write>(records: &[PerPairRecord], out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record(WEAK_HEADER).map_err(csv_error)?;
    for (t, r) in records.iter().enumerate() {
        let [a1, a2, b1, b2] = r.readings;
        w.write_record([t.to_string(), a1.to_string(), a2.to_string(), b1.to_string(), b2.to_string(), r.b_value.to_string()])
            .map_err(csv_error)?;
    }
    flush(w)
}

pub fn write_curve<W: Write>(rows: &[StudyRow], out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record(CURVE_HEADER).map_err(csv_error)?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.trials.to_string(),
            r.frequency.to_string(),
            r.ci_lo.to_string(),
            r.ci_hi.to_string(),
            r.mean_s.to_string(),
            r.sd_s.to_string(),
            r.z.to_string(),
        ])
        .map_err(csv_error)?;
    }
    flush(w)
}

/// 16 lines of `re im`, row-major; blank lines and `#` comments are skipped.
pub fn parse_density_matrix(text: &str) -> Result<DensityMatrix> {
    let mut m: Mat4 = ZERO4;
    let mut k = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse { line: idx + 1, msg };
        if k == 16 {
            return Err(parse_err("more than 16 matrix entries".into()));
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 2 {
            return Err(parse_err(format!("expected `re im`, found `{line}`")));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| parse_err(format!("`{s}`: {e}")));
        m[k / 4][k % 4] = C64::new(num(parts[0])?, num(parts[1])?);
        k += 1;
    }
    if k != 16 {
        return Err(Error::Parse { line: text.lines().count(), msg: format!("expected 16 matrix entries, found {k}") });
    }
    DensityMatrix::new(m).map_err(|e| Error::config(e.to_string()))
}

pub fn format_density_matrix(rho: &DensityMatrix) -> String {
    rho.entries().iter().flatten().map(|z| format!("{} {}\n", z.re, z.im)).collect()
}

/// Four whitespace- or comma-separated angles `a1 a2 b1 b2`.
pub fn parse_angles(text: &str) -> Result<AngleQuadruple> {
    let values: Vec<f64> = text
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|e| Error::config(format!("angle `{s}`: {e}"))))
        .collect::<Result<_>>()?;
    let [a1, a2, b1, b2] = values[..] else {
        return Err(Error::config(format!("expected 4 angles, found {}", values.len())));
    };
    AngleQuadruple::new(a1, a2, b1, b2).map_err(|e| Error::config(e.to_string()))
}

pub fn format_angles(angles: &AngleQuadruple) -> String {
    format!("{} {} {} {}\n", angles.a1, angles.a2, angles.b1, angles.b2)
}
