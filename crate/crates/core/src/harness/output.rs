//! CSV outputs. Each file opens with a `#schema <name> <version>` line; the
//! readers skip it and check it.
//!
//! - `trials.csv`: one row per (algo, seed), sorted, no timing columns.
//! - `timings.csv`: wall-clock time per trial, kept apart so the trial file is
//!   reproducible byte for byte.
//! - `curves.csv`: success rate per edge after each burst and of the composed
//!   task; stamps are the run's interaction counter, so composed points sit
//!   at the interactions already spent.
//! - `events.csv`: bursts and discards.

use std::io::{Read, Write};
use std::path::Path;

use crate::graph::EdgeId;
use crate::teacher::RunResult;

pub const TRIALS_SCHEMA: &str = "#schema lsts-trials 1";
pub const CURVES_SCHEMA: &str = "#schema lsts-curves 1";
pub const TIMINGS_SCHEMA: &str = "#schema lsts-timings 1";
pub const EVENTS_SCHEMA: &str = "#schema lsts-events 1";

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("expected schema line `{expected}`, found `{found}`")]
    Schema { expected: &'static str, found: String },
    #[error("row {row}: {msg}")]
    Field { row: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub algo: String,
    pub seed: u64,
    pub total_interactions: u64,
    pub converged: bool,
    pub final_success_rate: f64,
    pub wall_time_ms: u64,
    pub learned_path: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub algo: String,
    pub seed: u64,
    pub stamp: u64,
    /// `None` for the composed task.
    pub edge: Option<usize>,
    pub success_rate: f64,
}

fn path_text(p: &[usize]) -> String {
    p.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("-")
}

fn with_schema<W: Write>(mut w: W, schema: &str) -> Result<csv::Writer<W>, OutputError> {
    writeln!(w, "{schema}")?;
    Ok(csv::Writer::from_writer(w))
}

fn strip_schema<R: Read>(mut r: R, schema: &'static str) -> Result<csv::Reader<std::io::Cursor<String>>, OutputError> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let (first, rest) = text.split_once('\n').unwrap_or((&text, ""));
    if first.trim_end() != schema {
        return Err(OutputError::Schema { expected: schema, found: first.to_string() });
    }
    Ok(csv::Reader::from_reader(std::io::Cursor::new(rest.to_string())))
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, row: usize) -> Result<T, OutputError>
where
    T::Err: std::fmt::Display,
{
    let raw = rec.get(i).ok_or_else(|| OutputError::Field { row, msg: format!("missing column {i}") })?;
    raw.parse().map_err(|e: T::Err| OutputError::Field { row, msg: format!("column {i} `{raw}`: {e}") })
}

pub fn write_trials<W: Write>(w: W, records: &[TrialRecord]) -> Result<(), OutputError> {
    let mut out = with_schema(w, TRIALS_SCHEMA)?;
    out.write_record(["algo", "seed", "total_interactions", "converged", "final_success_rate", "learned_path"])?;
    for r in records {
        out.write_record([
            r.algo.clone(),
            r.seed.to_string(),
            r.total_interactions.to_string(),
            r.converged.to_string(),
            r.final_success_rate.to_string(),
            path_text(&r.learned_path),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads `trials.csv`; `wall_time_ms` comes back as 0.
pub fn read_trials<R: Read>(r: R) -> Result<Vec<TrialRecord>, OutputError> {
    let mut rdr = strip_schema(r, TRIALS_SCHEMA)?;
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let path: &str = rec.get(5).unwrap_or("");
        let learned_path = if path.is_empty() {
            Vec::new()
        } else {
            path.split('-')
                .map(|n| n.parse().map_err(|e| OutputError::Field { row, msg: format!("learned_path `{path}`: {e}") }))
                .collect::<Result<_, _>>()?
        };
        let final_success_rate: f64 = field(&rec, 4, row)?;
        if !(0.0..=1.0).contains(&final_success_rate) {
            return Err(OutputError::Field { row, msg: format!("success rate {final_success_rate} outside [0, 1]") });
        }
        out.push(TrialRecord {
            algo: field(&rec, 0, row)?,
            seed: field(&rec, 1, row)?,
            total_interactions: field(&rec, 2, row)?,
            converged: field(&rec, 3, row)?,
            final_success_rate,
            wall_time_ms: 0,
            learned_path,
        });
    }
    Ok(out)
}

pub fn write_timings<W: Write>(w: W, records: &[TrialRecord]) -> Result<(), OutputError> {
    let mut out = with_schema(w, TIMINGS_SCHEMA)?;
    out.write_record(["algo", "seed", "wall_time_ms"])?;
    for r in records {
        out.write_record([r.algo.clone(), r.seed.to_string(), r.wall_time_ms.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Curve rows of one run, in recording order.
pub fn curve_rows(algo: &str, seed: u64, result: &RunResult) -> Vec<CurveRow> {
    result
        .curves
        .iter()
        .map(|c| CurveRow {
            algo: algo.to_string(),
            seed,
            stamp: c.stamp,
            edge: c.edge.map(|e| e.0),
            success_rate: c.success_rate,
        })
        .collect()
}

pub fn write_curves<W: Write>(w: W, rows: &[CurveRow]) -> Result<(), OutputError> {
    let mut out = with_schema(w, CURVES_SCHEMA)?;
    out.write_record(["algo", "seed", "interaction_stamp", "edge_or_composed", "success_rate"])?;
    for c in rows {
        let edge = c.edge.map_or_else(|| "composed".to_string(), |e| EdgeId(e).to_string());
        out.write_record([c.algo.clone(), c.seed.to_string(), c.stamp.to_string(), edge, c.success_rate.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_curves<R: Read>(r: R) -> Result<Vec<CurveRow>, OutputError> {
    let mut rdr = strip_schema(r, CURVES_SCHEMA)?;
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let edge_text = rec.get(3).unwrap_or("");
        let edge = match edge_text {
            "composed" => None,
            t => Some(
                t.strip_prefix('e')
                    .and_then(|n| n.parse().ok())
                    .ok_or_else(|| OutputError::Field { row, msg: format!("edge `{t}`") })?,
            ),
        };
        out.push(CurveRow {
            algo: field(&rec, 0, row)?,
            seed: field(&rec, 1, row)?,
            stamp: field(&rec, 2, row)?,
            edge,
            success_rate: field(&rec, 4, row)?,
        });
    }
    Ok(out)
}

pub fn write_events<W: Write>(w: W, runs: &[(&str, u64, &RunResult)]) -> Result<(), OutputError> {
    let mut out = with_schema(w, EVENTS_SCHEMA)?;
    out.write_record(["algo", "seed", "interaction_stamp", "kind", "edge", "g", "success_rate", "interactions", "converged"])?;
    for &(algo, seed, r) in runs {
        for b in &r.bursts {
            out.write_record([
                algo.to_string(),
                seed.to_string(),
                b.stamp.to_string(),
                "burst".into(),
                b.edge.to_string(),
                b.g.to_string(),
                b.success_rate.to_string(),
                b.interactions.to_string(),
                b.converged.to_string(),
            ])?;
        }
        for (stamp, e) in &r.discards {
            let cells = [algo.to_string(), seed.to_string(), stamp.to_string(), "discard".into(), e.to_string()];
            out.write_record(cells.into_iter().chain(std::iter::repeat_n(String::new(), 4)))?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Writes every output file into `dir`, creating it if needed.
pub fn write_all(dir: &Path, records: &[TrialRecord], runs: &[(&str, u64, &RunResult)]) -> Result<(), OutputError> {
    std::fs::create_dir_all(dir)?;
    let file = |name: &str| std::fs::File::create(dir.join(name)).map(std::io::BufWriter::new);
    write_trials(file("trials.csv")?, records)?;
    write_timings(file("timings.csv")?, records)?;
    let rows: Vec<CurveRow> = runs.iter().flat_map(|&(a, s, r)| curve_rows(a, s, r)).collect();
    write_curves(file("curves.csv")?, &rows)?;
    write_events(file("events.csv")?, runs)?;
    Ok(())
}
