//! Per-step metrics as CSV and their per-run summary.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thermoporous::StepRecord;

use crate::error::{io_err, Result};

/// One attempted time step. Column order is part of the file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub case: String,
    pub precond: String,
    /// Schur approximation for the block preconditioner, decoupling for CPR.
    pub schur: String,
    pub n: usize,
    pub step: usize,
    pub dt: f64,
    pub newton_iters: usize,
    pub linear_iters: usize,
    pub converged: bool,
    pub t_assembly: f64,
    pub t_setup: f64,
    pub t_solve: f64,
}

impl MetricsRecord {
    pub fn from_step(case: &str, precond: &str, schur: &str, n: usize, r: &StepRecord) -> Self {
        MetricsRecord {
            case: case.to_string(),
            precond: precond.to_string(),
            schur: schur.to_string(),
            n,
            step: r.step,
            dt: r.dt,
            newton_iters: r.newton_iterations,
            linear_iters: r.linear_iterations,
            converged: r.converged,
            t_assembly: r.t_assembly,
            t_setup: r.t_setup,
            t_solve: r.t_solve,
        }
    }
}

pub const HEADER: [&str; 12] = [
    "case", "precond", "schur", "n", "step", "dt", "newton_iters", "linear_iters", "converged", "t_assembly", "t_setup",
    "t_solve",
];

pub fn write_metrics<W: Write>(out: W, records: &[MetricsRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(HEADER)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err("<metrics>"))?;
    Ok(())
}

pub fn write_metrics_file(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    write_metrics(std::io::BufWriter::new(file), records)
}

pub fn read_metrics<R: Read>(input: R) -> Result<Vec<MetricsRecord>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<std::result::Result<Vec<MetricsRecord>, _>>()?)
}

pub fn read_metrics_file(path: &Path) -> Result<Vec<MetricsRecord>> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    read_metrics(std::io::BufReader::new(file))
}

/// Totals for one `(case, precond, schur, n)` group.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub case: String,
    pub precond: String,
    pub schur: String,
    pub n: usize,
    pub steps: usize,
    pub failed_steps: usize,
    pub newton_iters: usize,
    pub linear_iters: usize,
}

impl Summary {
    /// Average linear iterations per nonlinear iteration, counting failed
    /// attempts as well.
    pub fn average(&self) -> Option<f64> {
        (self.newton_iters > 0).then(|| self.linear_iters as f64 / self.newton_iters as f64)
    }
}

/// Groups records in order of first appearance.
pub fn summarize(records: &[MetricsRecord]) -> Vec<Summary> {
    let mut out: Vec<Summary> = Vec::new();
    for r in records {
        let pos = out.iter().position(|s| s.case == r.case && s.precond == r.precond && s.schur == r.schur && s.n == r.n);
        let s = match pos {
            Some(i) => &mut out[i],
            None => {
                out.push(Summary {
                    case: r.case.clone(),
                    precond: r.precond.clone(),
                    schur: r.schur.clone(),
                    n: r.n,
                    steps: 0,
                    failed_steps: 0,
                    newton_iters: 0,
                    linear_iters: 0,
                });
                out.last_mut().unwrap()
            }
        };
        if r.converged {
            s.steps += 1;
        } else {
            s.failed_steps += 1;
        }
        s.newton_iters += r.newton_iters;
        s.linear_iters += r.linear_iters;
    }
    out
}

pub fn format_summary(summaries: &[Summary]) -> String {
    let mut s = format!(
        "{:<16} {:<8} {:<12} {:>6} {:>6} {:>6} {:>8} {:>8} {:>10}\n",
        "case", "precond", "schur", "n", "steps", "failed", "newton", "linear", "avg"
    );
    for g in summaries {
        let avg = g.average().map(|a| format!("{a:.4}")).unwrap_or_else(|| "-".into());
        s.push_str(&format!(
            "{:<16} {:<8} {:<12} {:>6} {:>6} {:>6} {:>8} {:>8} {:>10}\n",
            g.case, g.precond, g.schur, g.n, g.steps, g.failed_steps, g.newton_iters, g.linear_iters, avg
        ));
    }
    s
}
