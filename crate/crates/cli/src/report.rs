//! CSV emission.

use std::path::Path;

use iatf_core::{SteadyState, TransitionMatrix};

use crate::error::{CliError, Result};
use crate::sweep::SweepRow;

pub const SWEEP_HEADER: [&str; 7] = [
    "sweep_value",
    "analytic_outage",
    "mc_outage",
    "mc_stderr",
    "baseline_outage",
    "p_e",
    "optimal_level",
];

/// Ten significant digits in scientific notation.
pub fn real(v: f64) -> String {
    format!("{v:.9e}")
}

fn opt_real(v: Option<f64>) -> String {
    v.map(real).unwrap_or_default()
}

fn finish(w: csv::Writer<Vec<u8>>) -> Vec<u8> {
    // Writing into memory cannot fail.
    w.into_inner().expect("in-memory csv buffer")
}

/// Sweep rows as CSV text: header, one line per row, trailing newline.
pub fn sweep_csv(rows: &[SweepRow]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_HEADER).expect("in-memory csv");
    for r in rows {
        w.write_record([
            real(r.sweep_value),
            real(r.analytic_outage),
            opt_real(r.mc_outage),
            opt_real(r.mc_stderr),
            opt_real(r.baseline_outage),
            real(r.p_e),
            r.optimal_level.map(|k| k.to_string()).unwrap_or_default(),
        ])
        .expect("in-memory csv");
    }
    finish(w)
}

/// Transition matrix and steady state: one line per level `i` with `pi_i`
/// followed by row `i` of `Z`.
pub fn chain_csv(z: &TransitionMatrix, pi: &SteadyState) -> Vec<u8> {
    let n = z.size();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["level".to_string(), "pi".to_string()];
    header.extend((0..n).map(|j| format!("z_{j}")));
    w.write_record(&header).expect("in-memory csv");
    for i in 0..n {
        let mut rec = vec![i.to_string(), real(pi.pi[i])];
        rec.extend(z.row(i).iter().map(|&p| real(p)));
        w.write_record(&rec).expect("in-memory csv");
    }
    finish(w)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Writes sweep rows to `path`.
pub fn write_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(CliError::Validation("no rows to write".into()));
    }
    write_file(path, &sweep_csv(rows))
}
