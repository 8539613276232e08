//! Flat key-value experiment configuration.

use std::path::Path;

use iatf_core::{BatteryConfig, Error as CoreError, LinkStats, SystemParams, Thresholds};
use serde::Deserialize;

use crate::error::{CliError, Result};

/// Document as written; every key optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    p_s_dbm: Option<f64>,
    p_s_dbm_grid: Option<Vec<f64>>,
    n0_dbm: Option<f64>,
    eta: Option<f64>,
    rate: Option<f64>,
    n_antennas: Option<u32>,
    rician_k: Option<f64>,
    d_sd: Option<f64>,
    d_sr: Option<f64>,
    d_rd: Option<f64>,
    alpha: Option<f64>,
    capacity: Option<f64>,
    levels: Option<usize>,
    e_t: Option<f64>,
    e_t_grid: Option<Vec<f64>>,
    mc_blocks: Option<u64>,
    seed: Option<u64>,
    include_baseline: Option<bool>,
    include_mc: Option<bool>,
    warmup_blocks: Option<u64>,
}

/// A scalar setting or a sweep grid over it.
#[derive(Debug, Clone, PartialEq)]
pub enum Axis {
    Point(f64),
    Grid(Vec<f64>),
}

impl Axis {
    pub fn values(&self) -> &[f64] {
        match self {
            Axis::Point(v) => std::slice::from_ref(v),
            Axis::Grid(g) => g,
        }
    }

    pub fn is_grid(&self) -> bool {
        matches!(self, Axis::Grid(_))
    }
}

/// Validated configuration with defaults filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub p_s_dbm: Axis,
    pub n0_dbm: f64,
    pub eta: f64,
    pub rate: f64,
    pub n_antennas: u32,
    pub rician_k: f64,
    pub d_sd: f64,
    pub d_sr: f64,
    pub d_rd: f64,
    pub alpha: f64,
    pub capacity: f64,
    pub levels: usize,
    pub e_t: Axis,
    pub mc_blocks: u64,
    pub seed: u64,
    pub include_baseline: bool,
    pub include_mc: bool,
    pub warmup_blocks: u64,
}

impl Default for Config {
    /// The evaluation setup: 80/10/70 m, alpha 3, K 10, N0 -60 dBm,
    /// eta 0.5, rate 1, C 5 mJ, 20 levels, E_T 1 mJ, one antenna, 20 dBm.
    fn default() -> Self {
        Config {
            p_s_dbm: Axis::Point(20.0),
            n0_dbm: -60.0,
            eta: 0.5,
            rate: 1.0,
            n_antennas: 1,
            rician_k: 10.0,
            d_sd: 80.0,
            d_sr: 10.0,
            d_rd: 70.0,
            alpha: 3.0,
            capacity: 5e-3,
            levels: 20,
            e_t: Axis::Point(1e-3),
            mc_blocks: 1_000_000,
            seed: 1,
            include_baseline: true,
            include_mc: false,
            warmup_blocks: 10_000,
        }
    }
}

/// `10^((dbm - 30) / 10)`.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

fn invalid(key: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("`{key}` {reason}"))
}

fn axis(key: &str, grid_key: &str, point: Option<f64>, grid: Option<Vec<f64>>, default: f64) -> Result<Axis> {
    match (point, grid) {
        (Some(_), Some(_)) => Err(invalid(grid_key, format!("cannot be combined with `{key}`"))),
        (Some(v), None) => {
            if !v.is_finite() {
                return Err(invalid(key, format!("must be finite, got {v}")));
            }
            Ok(Axis::Point(v))
        }
        (None, Some(g)) => {
            if g.is_empty() {
                return Err(invalid(grid_key, "must not be empty"));
            }
            if let Some(v) = g.iter().find(|v| !v.is_finite()) {
                return Err(invalid(grid_key, format!("must be finite, got {v}")));
            }
            if g.windows(2).any(|w| w[1] <= w[0]) {
                return Err(invalid(grid_key, "must be strictly increasing"));
            }
            Ok(Axis::Grid(g))
        }
        (None, None) => Ok(Axis::Point(default)),
    }
}

impl Config {
    /// Parses a TOML document. Unknown keys are rejected.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Validation(e.message().to_string()))?;
        let d = Config::default();
        if raw.p_s_dbm_grid.is_some() && raw.e_t_grid.is_some() {
            return Err(invalid("e_t_grid", "cannot be combined with `p_s_dbm_grid`; sweep one axis at a time"));
        }
        let cfg = Config {
            p_s_dbm: axis("p_s_dbm", "p_s_dbm_grid", raw.p_s_dbm, raw.p_s_dbm_grid, 20.0)?,
            n0_dbm: raw.n0_dbm.unwrap_or(d.n0_dbm),
            eta: raw.eta.unwrap_or(d.eta),
            rate: raw.rate.unwrap_or(d.rate),
            n_antennas: raw.n_antennas.unwrap_or(d.n_antennas),
            rician_k: raw.rician_k.unwrap_or(d.rician_k),
            d_sd: raw.d_sd.unwrap_or(d.d_sd),
            d_sr: raw.d_sr.unwrap_or(d.d_sr),
            d_rd: raw.d_rd.unwrap_or(d.d_rd),
            alpha: raw.alpha.unwrap_or(d.alpha),
            capacity: raw.capacity.unwrap_or(d.capacity),
            levels: raw.levels.unwrap_or(d.levels),
            e_t: axis("e_t", "e_t_grid", raw.e_t, raw.e_t_grid, 1e-3)?,
            mc_blocks: raw.mc_blocks.unwrap_or(d.mc_blocks),
            seed: raw.seed.unwrap_or(d.seed),
            include_baseline: raw.include_baseline.unwrap_or(d.include_baseline),
            include_mc: raw.include_mc.unwrap_or(d.include_mc),
            warmup_blocks: raw.warmup_blocks.unwrap_or(d.warmup_blocks),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and parses a config file; a missing or unreadable file is an I/O error.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| e.context(&path.display().to_string()))
    }

    fn validate(&self) -> Result<()> {
        if !self.n0_dbm.is_finite() {
            return Err(invalid("n0_dbm", format!("must be finite, got {}", self.n0_dbm)));
        }
        if self.include_mc && self.mc_blocks < 10_000 {
            return Err(invalid("mc_blocks", format!("must be >= 10000 when include_mc is set, got {}", self.mc_blocks)));
        }
        if self.mc_blocks == 0 {
            return Err(invalid("mc_blocks", "must be >= 1"));
        }
        for &dbm in self.p_s_dbm.values() {
            self.params(dbm).validate().map_err(|e| self.rename(e))?;
        }
        for &e_t in self.e_t.values() {
            self.battery(e_t)?;
        }
        Ok(())
    }

    /// Maps core parameter names back to config keys.
    fn rename(&self, e: CoreError) -> CliError {
        match e {
            CoreError::Config { key, reason } => {
                let key = match key {
                    "p_s" if self.p_s_dbm.is_grid() => "p_s_dbm_grid",
                    "p_s" => "p_s_dbm",
                    "n0" => "n0_dbm",
                    "e_t" if self.e_t.is_grid() => "e_t_grid",
                    other => other,
                };
                invalid(key, reason)
            }
            other => other.into(),
        }
    }

    /// Physical parameters at source power `p_s_dbm`.
    pub fn params(&self, p_s_dbm: f64) -> SystemParams {
        SystemParams {
            p_s: dbm_to_watts(p_s_dbm),
            n0: dbm_to_watts(self.n0_dbm),
            eta: self.eta,
            rate: self.rate,
            n_antennas: self.n_antennas,
            rician_k: self.rician_k,
            d_sd: self.d_sd,
            d_sr: self.d_sr,
            d_rd: self.d_rd,
            alpha: self.alpha,
        }
    }

    pub fn battery(&self, e_t: f64) -> Result<BatteryConfig> {
        BatteryConfig::new(self.capacity, self.levels, e_t).map_err(|e| self.rename(e))
    }

    /// Everything needed to evaluate one `(P_S, E_T)` point.
    pub fn point_at(&self, p_s_dbm: f64, e_t: f64) -> Result<Point> {
        let params = self.params(p_s_dbm);
        Ok(Point {
            links: LinkStats::from_params(&params),
            thr: Thresholds::from_rate(params.rate).map_err(|e| self.rename(e))?,
            battery: self.battery(e_t)?,
            params,
        })
    }

    /// The single operating point of a non-sweep command.
    pub fn point(&self) -> Result<Point> {
        let single = |axis: &Axis, grid_key: &str| match axis {
            Axis::Point(v) => Ok(*v),
            Axis::Grid(_) => Err(invalid(grid_key, "is only accepted by the sweep command")),
        };
        let p = single(&self.p_s_dbm, "p_s_dbm_grid")?;
        let e = single(&self.e_t, "e_t_grid")?;
        self.point_at(p, e)
    }
}

/// One fully resolved operating point.
#[derive(Debug, Clone, Copy)]
pub struct Point {
    pub params: SystemParams,
    pub links: LinkStats,
    pub thr: Thresholds,
    pub battery: BatteryConfig,
}
