//! Sweep execution: one analytic (and optionally simulated) row per grid point.

use iatf_core::outage::{analyze, direct_baseline, optimize_threshold};
use iatf_core::simulator::simulate_with;
use iatf_core::{BatteryConfig, SimOptions};
use rayon::prelude::*;

use crate::config::{Axis, Config, Point};
use crate::error::{CliError, Result};

/// What the grid runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepKind {
    /// Source power in dBm at fixed `e_t`.
    SourcePower,
    /// Energy threshold in joules at fixed `p_s_dbm`.
    EnergyThreshold,
    /// Source power in dBm, with `e_t` re-optimized over all levels at each point.
    OptimalThreshold,
}

/// A validated sweep: config plus the axis it runs over.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub grid: Vec<f64>,
    pub config: Config,
}

impl SweepSpec {
    /// Infers the kind from which grid key is present unless `kind` is given.
    pub fn new(config: Config, kind: Option<SweepKind>) -> Result<Self> {
        let kind = kind.unwrap_or(if config.e_t.is_grid() {
            SweepKind::EnergyThreshold
        } else {
            SweepKind::SourcePower
        });
        let grid = match kind {
            SweepKind::SourcePower | SweepKind::OptimalThreshold => {
                if config.e_t.is_grid() {
                    return Err(CliError::Validation(format!(
                        "`e_t_grid` does not apply to a {kind:?} sweep; use `e_t`"
                    )));
                }
                config.p_s_dbm.values().to_vec()
            }
            SweepKind::EnergyThreshold => {
                if config.p_s_dbm.is_grid() {
                    return Err(CliError::Validation(
                        "`p_s_dbm_grid` does not apply to an energy-threshold sweep; use `p_s_dbm`".into(),
                    ));
                }
                config.e_t.values().to_vec()
            }
        };
        Ok(SweepSpec { kind, grid, config })
    }
}

/// One output line of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sweep_value: f64,
    pub analytic_outage: f64,
    pub mc_outage: Option<f64>,
    pub mc_stderr: Option<f64>,
    pub baseline_outage: Option<f64>,
    pub p_e: f64,
    pub optimal_level: Option<usize>,
}

fn fixed(axis: &Axis) -> f64 {
    axis.values()[0]
}

fn run_point(spec: &SweepSpec, index: usize, value: f64) -> Result<SweepRow> {
    let cfg = &spec.config;
    let (point, optimal_level) = match spec.kind {
        SweepKind::SourcePower => (cfg.point_at(value, fixed(&cfg.e_t))?, None),
        SweepKind::EnergyThreshold => (cfg.point_at(fixed(&cfg.p_s_dbm), value)?, None),
        SweepKind::OptimalThreshold => {
            let base = cfg.point_at(value, fixed(&cfg.e_t))?;
            let search = optimize_threshold(&base.params, &base.links, &base.thr, cfg.capacity, cfg.levels)?;
            let battery = BatteryConfig::at_level(cfg.capacity, cfg.levels, search.best_level)?;
            (Point { battery, ..base }, Some(search.best_level))
        }
    };
    let Point {
        params,
        links,
        thr,
        battery,
    } = point;
    let (out, _) = analyze(&params, &links, &thr, &battery)?;
    let (mc_outage, mc_stderr) = if cfg.include_mc {
        let opts = SimOptions {
            warmup_blocks: cfg.warmup_blocks,
            continuous_battery: false,
            stream: index as u64,
        };
        let sim = simulate_with(&params, &links, &thr, &battery, cfg.mc_blocks, cfg.seed, &opts);
        (Some(sim.outage_estimate), Some(sim.stderr))
    } else {
        (None, None)
    };
    Ok(SweepRow {
        sweep_value: value,
        analytic_outage: out.p_out,
        mc_outage,
        mc_stderr,
        baseline_outage: cfg.include_baseline.then(|| direct_baseline(&params, &links, &thr)),
        p_e: out.p_e,
        optimal_level,
    })
}

/// Evaluates every grid point. Points run in parallel; each uses its own
/// random stream under the shared seed, so the rows depend only on the spec.
/// The first failing point aborts the run.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    let unit = match spec.kind {
        SweepKind::EnergyThreshold => "J",
        _ => "dBm",
    };
    spec.grid
        .par_iter()
        .enumerate()
        .map(|(i, &v)| run_point(spec, i, v).map_err(|e| e.context(&format!("sweep point {v} {unit}"))))
        .collect()
}
