//! Key-rate sweeps over a scenario grid and the CSV interchange format.
//!
//! Columns, in order: `Q, mask, p_accept, entropy_bound, leak_ec, rate_raw,
//! rate_clamped, baseline_rate`. Masks are bit strings with Bob 1 leftmost,
//! `0…0` being the plain protocol. Rows are sorted by `Q`, then by mask
//! value. Floats are rounded to 10 significant digits and printed as the
//! shortest decimal that reads back to the rounded value.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Result, ScadError};
use crate::keyrate::{best_mask_with, report_for, CadMask, KeyRateReport, OptimizerConfig};
use crate::noise::ErrorDistribution;
use crate::scenario::ScenarioSpec;

pub const HEADER: [&str; 8] = [
    "Q",
    "mask",
    "p_accept",
    "entropy_bound",
    "leak_ec",
    "rate_raw",
    "rate_clamped",
    "baseline_rate",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub q: f64,
    pub mask: CadMask,
    pub p_accept: f64,
    pub entropy_bound: f64,
    pub leak_ec: f64,
    pub rate_raw: f64,
    pub rate_clamped: f64,
    pub baseline_rate: f64,
}

impl SweepRow {
    pub fn from_report(q: f64, r: &KeyRateReport) -> Self {
        Self {
            q,
            mask: r.mask,
            p_accept: r.p_accept,
            entropy_bound: r.entropy_bound,
            leak_ec: r.leak_ec,
            rate_raw: r.rate,
            rate_clamped: r.rate_clamped(),
            baseline_rate: r.baseline_rate,
        }
    }

    fn record(&self) -> [String; 8] {
        [
            format_float(self.q),
            self.mask.to_string(),
            format_float(self.p_accept),
            format_float(self.entropy_bound),
            format_float(self.leak_ec),
            format_float(self.rate_raw),
            format_float(self.rate_clamped),
            format_float(self.baseline_rate),
        ]
    }
}

/// 10 significant digits, then the shortest round-trip form. `-0` prints
/// as `0`.
pub fn format_float(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.9e}").parse().expect("valid float");
    if rounded == 0.0 {
        return "0".to_string();
    }
    rounded.to_string()
}

fn distribution(spec: &ScenarioSpec, q: f64) -> Result<ErrorDistribution> {
    Ok(ErrorDistribution::from_scenario(&spec.scenario_at(q)?))
}

/// Every `(Q, mask)` row of the scenario. A `best` entry adds the optimal mask
/// at each `Q` unless it is already listed.
pub fn sweep_rows(spec: &ScenarioSpec, cfg: &OptimizerConfig) -> Result<Vec<SweepRow>> {
    let explicit = spec.explicit_masks();
    let points = spec.grid.points();
    let best: Vec<Option<SweepRow>> = if spec.wants_best() {
        points
            .par_iter()
            .map(|&q| {
                let (_, r) = best_mask_with(&distribution(spec, q)?, cfg)?;
                Ok(Some(SweepRow::from_report(q, &r)))
            })
            .collect::<Result<_>>()?
    } else {
        vec![None; points.len()]
    };
    let tasks: Vec<(f64, CadMask)> = points
        .iter()
        .flat_map(|&q| explicit.iter().map(move |&m| (q, m)))
        .collect();
    let rows = tasks
        .par_iter()
        .map(|&(q, m)| {
            let r = report_for(&distribution(spec, q)?, m, cfg)?;
            Ok(SweepRow::from_report(q, &r))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(rows.len() + points.len());
    for (chunk, b) in rows.chunks(explicit.len().max(1)).zip(best) {
        let mut here: Vec<SweepRow> = chunk.to_vec();
        if let Some(b) = b {
            if !here.iter().any(|r| r.mask == b.mask) {
                here.push(b);
            }
        }
        here.sort_by_key(|r| r.mask);
        out.extend(here);
    }
    Ok(out)
}

/// One row per `Q`: the best mask over all `2^p` choices.
pub fn search_rows(spec: &ScenarioSpec, cfg: &OptimizerConfig) -> Result<Vec<SweepRow>> {
    spec.grid
        .points()
        .par_iter()
        .map(|&q| {
            let (_, r) = best_mask_with(&distribution(spec, q)?, cfg)?;
            Ok(SweepRow::from_report(q, &r))
        })
        .collect()
}

pub fn write_rows<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|source| ScadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_rows(rows, file)
}

pub fn run_sweep(spec: &ScenarioSpec, out: &Path, cfg: &OptimizerConfig) -> Result<Vec<SweepRow>> {
    let rows = sweep_rows(spec, cfg)?;
    write_csv(&rows, out)?;
    Ok(rows)
}

pub fn run_search(spec: &ScenarioSpec, out: &Path, cfg: &OptimizerConfig) -> Result<Vec<SweepRow>> {
    let rows = search_rows(spec, cfg)?;
    write_csv(&rows, out)?;
    Ok(rows)
}

/// Reads a file written by [`write_csv`]. Errors name the offending line.
pub fn read_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let file = File::open(path).map_err(|source| ScadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let bad = |line: usize, msg: String| ScadError::Config {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut r = csv::Reader::from_reader(file);
    let header = r.headers()?.clone();
    if header.iter().ne(HEADER) {
        return Err(bad(1, format!("expected header {}", HEADER.join(","))));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let num = |i: usize| -> Result<f64> {
            rec[i].parse().map_err(|_| {
                bad(
                    line,
                    format!("column {}: not a number: {:?}", HEADER[i], &rec[i]),
                )
            })
        };
        let mask = CadMask::parse(&rec[1], rec[1].len())
            .map_err(|e| bad(line, format!("column mask: {e}")))?;
        rows.push(SweepRow {
            q: num(0)?,
            mask,
            p_accept: num(2)?,
            entropy_bound: num(3)?,
            leak_ec: num(4)?,
            rate_raw: num(5)?,
            rate_clamped: num(6)?,
            baseline_rate: num(7)?,
        });
    }
    Ok(rows)
}
