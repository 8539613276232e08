//! Discrete relay battery: level grid, transition matrix and steady state.

mod matrix;
mod stationary;

pub use matrix::{build_transition_matrix, build_transition_matrix_with, TransitionMatrix};
pub use stationary::{
    steady_state, steady_state_rank_correction, steady_state_state_reduction, SteadyState,
    StationarySolver,
};

use crate::error::{Error, Result};
use crate::num::Scalar;

/// Relative slack (in units of one level) used when comparing the energy
/// threshold against level energies. `E_T = 4 * C / L` must land on level 4
/// even if `4 * C / L` rounds one ulp below the literal threshold.
const LEVEL_SLACK: f64 = 1e-9;

/// An `L`-level battery of capacity `C` with cooperation threshold `E_T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryConfig<T> {
    capacity: T,
    levels: usize,
    e_t: T,
    eps_t_level: usize,
}

impl<T: Scalar> BatteryConfig<T> {
    pub fn new(capacity: T, levels: usize, e_t: T) -> Result<Self> {
        if !(capacity > T::zero()) || !capacity.is_finite() {
            return Err(Error::config("capacity", format!("must be finite and > 0, got {capacity}")));
        }
        if levels == 0 {
            return Err(Error::config("levels", "must be >= 1"));
        }
        if !(e_t > T::zero()) {
            return Err(Error::config("e_t", format!("must be > 0, got {e_t}")));
        }
        let mut cfg = BatteryConfig {
            capacity,
            levels,
            e_t,
            eps_t_level: 0,
        };
        if !cfg.covers(levels, e_t) {
            return Err(Error::config(
                "e_t",
                format!("exceeds capacity {capacity} (got {e_t}); relay could never discharge"),
            ));
        }
        cfg.eps_t_level = (1..=levels)
            .find(|&k| cfg.covers(k, e_t))
            .unwrap_or(levels);
        Ok(cfg)
    }

    /// Config whose threshold sits exactly on level `k`.
    pub fn at_level(capacity: T, levels: usize, k: usize) -> Result<Self> {
        if k == 0 || k > levels {
            return Err(Error::config("e_t", format!("level {k} outside 1..={levels}")));
        }
        let e_t = capacity * T::from_count(k) / T::from_count(levels);
        Self::new(capacity, levels, e_t)
    }

    pub fn capacity(&self) -> T {
        self.capacity
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn e_t(&self) -> T {
        self.e_t
    }

    /// Smallest level index whose energy is at least `E_T`.
    pub fn eps_t_level(&self) -> usize {
        self.eps_t_level
    }

    /// Energy actually spent per cooperative transmission.
    pub fn eps_t(&self) -> T {
        self.level_energy(self.eps_t_level)
    }

    /// `i * C / L`.
    pub fn level_energy(&self, i: usize) -> T {
        self.capacity * T::from_count(i) / T::from_count(self.levels)
    }

    /// Whether the relay holding level `i` meets the raw threshold `E_T`.
    pub fn can_cooperate(&self, level: usize) -> bool {
        self.covers(level, self.e_t)
    }

    fn covers(&self, level: usize, energy: T) -> bool {
        let step = self.capacity / T::from_count(self.levels);
        self.level_energy(level) + T::lit(LEVEL_SLACK) * step >= energy
    }
}

/// Level credited for harvesting `e_h` joules: the highest `j` with
/// `j * C / L < e_h` (strictly), or 0 when nothing qualifies.
pub fn discretize_harvest<T: Scalar>(e_h: T, cfg: &BatteryConfig<T>) -> usize {
    if !(e_h > T::zero()) {
        return 0;
    }
    let l = cfg.levels;
    let step = cfg.capacity / T::from_count(l);
    let guess = ((e_h / step).ceil() - T::one()).max(T::zero());
    let mut j = guess.to_usize().map_or(l, |g| g.min(l));
    while j < l && cfg.level_energy(j + 1) < e_h {
        j += 1;
    }
    while j > 0 && cfg.level_energy(j) >= e_h {
        j -= 1;
    }
    j
}
