//! Block-level Monte Carlo execution of the protocol.
//!
//! Each block draws fresh, independent fades that stay fixed over both
//! slots. The destination first checks the direct link; the relay's battery
//! level decides whether it decoded (and can forward) or harvested. The
//! battery is discretized exactly like the analytic chain unless
//! [`SimOptions::continuous_battery`] is set.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::battery_chain::{discretize_harvest, BatteryConfig};
use crate::channel::{FadeSample, FadeSampler, LinkStats, SystemParams, Thresholds};
use crate::num::Scalar;

/// Operating mode of one block, from the direct-link status X and the
/// battery status Y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Direct link fine, relay below threshold: relay harvests both slots.
    I,
    /// Direct link fine, relay charged: relay decodes, then harvests half a block.
    II,
    /// Direct link failed, relay below threshold: source repeats, relay harvests.
    III,
    /// Direct link failed, relay charged: relay forwards and spends `eps_T`.
    IV,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::I, Mode::II, Mode::III, Mode::IV];

    pub fn index(self) -> usize {
        match self {
            Mode::I => 0,
            Mode::II => 1,
            Mode::III => 2,
            Mode::IV => 3,
        }
    }

    fn select(direct_fails: bool, charged: bool) -> Self {
        match (direct_fails, charged) {
            (false, false) => Mode::I,
            (false, true) => Mode::II,
            (true, false) => Mode::III,
            (true, true) => Mode::IV,
        }
    }
}

/// What happened in one block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockOutcome {
    pub mode: Mode,
    pub outage: bool,
    pub battery_level_before: usize,
    pub battery_level_after: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOptions {
    /// Blocks run and discarded before counting starts (battery starts empty).
    pub warmup_blocks: u64,
    /// Track harvested energy exactly instead of rounding down to levels.
    pub continuous_battery: bool,
    /// ChaCha stream id, for independent replications under one seed.
    pub stream: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            warmup_blocks: 10_000,
            continuous_battery: false,
            stream: 0,
        }
    }
}

/// Aggregated counts of a simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub blocks: u64,
    pub outages: u64,
    /// Indexed by [`Mode::index`].
    pub mode_counts: [u64; 4],
    /// Outages per mode, indexed by [`Mode::index`].
    pub mode_outages: [u64; 4],
    /// Blocks that started at each battery level.
    pub level_occupancy: Vec<u64>,
    pub outage_estimate: f64,
    /// Binomial standard error `sqrt(p (1 - p) / n)`.
    pub stderr: f64,
    pub seed: u64,
}

impl SimulationResult {
    fn empty(levels: usize, seed: u64) -> Self {
        SimulationResult {
            blocks: 0,
            outages: 0,
            mode_counts: [0; 4],
            mode_outages: [0; 4],
            level_occupancy: vec![0; levels + 1],
            outage_estimate: 0.0,
            stderr: 0.0,
            seed,
        }
    }

    fn record(&mut self, outcome: &BlockOutcome) {
        self.blocks += 1;
        let m = outcome.mode.index();
        self.mode_counts[m] += 1;
        self.level_occupancy[outcome.battery_level_before] += 1;
        if outcome.outage {
            self.outages += 1;
            self.mode_outages[m] += 1;
        }
    }

    fn finish(mut self) -> Self {
        let n = self.blocks as f64;
        if self.blocks > 0 {
            let p = self.outages as f64 / n;
            self.outage_estimate = p;
            self.stderr = (p * (1.0 - p) / n).sqrt();
        }
        self
    }

    /// Pools two runs over the same battery grid.
    pub fn merge(&self, other: &SimulationResult) -> SimulationResult {
        assert_eq!(
            self.level_occupancy.len(),
            other.level_occupancy.len(),
            "merging runs over different battery grids"
        );
        let mut out = self.clone();
        out.blocks += other.blocks;
        out.outages += other.outages;
        for m in 0..4 {
            out.mode_counts[m] += other.mode_counts[m];
            out.mode_outages[m] += other.mode_outages[m];
        }
        for (a, b) in out.level_occupancy.iter_mut().zip(&other.level_occupancy) {
            *a += b;
        }
        out.finish()
    }

    pub fn mode_frequency(&self, mode: Mode) -> f64 {
        self.mode_counts[mode.index()] as f64 / self.blocks as f64
    }

    /// Conditional outage rate within `mode`, if it occurred at all.
    pub fn mode_outage_rate(&self, mode: Mode) -> Option<f64> {
        let n = self.mode_counts[mode.index()];
        (n > 0).then(|| self.mode_outages[mode.index()] as f64 / n as f64)
    }

    /// Empirical battery-level distribution.
    pub fn occupancy(&self) -> Vec<f64> {
        let n = self.blocks as f64;
        self.level_occupancy.iter().map(|&c| c as f64 / n).collect()
    }
}

/// Instantaneous SNRs and outage tests shared by both battery models.
struct BlockLink<T> {
    gamma_sd: T,
    gamma_sr: T,
    h_sr: T,
    h_rd: T,
}

impl<T: Scalar> BlockLink<T> {
    fn new(fades: &FadeSample<T>, params: &SystemParams<T>) -> Self {
        BlockLink {
            gamma_sd: params.p_s * fades.h_sd / params.n0,
            gamma_sr: params.p_s * fades.h_sr / params.n0,
            h_sr: fades.h_sr,
            h_rd: fades.h_rd,
        }
    }

    fn harvested(&self, mode: Mode, params: &SystemParams<T>) -> T {
        let full = params.eta * params.p_s * self.h_sr;
        match mode {
            Mode::I | Mode::III => full,
            Mode::II => full / T::lit(2.0),
            Mode::IV => T::zero(),
        }
    }

    fn outage(&self, mode: Mode, params: &SystemParams<T>, thr: &Thresholds<T>, eps_t: T) -> bool {
        match mode {
            Mode::I | Mode::II => false,
            // Both slots carry the same packet over the same fade.
            Mode::III => T::lit(2.0) * self.gamma_sd < thr.gamma2,
            Mode::IV => {
                let gamma_rd = T::lit(2.0) * eps_t * self.h_rd / params.n0;
                self.gamma_sr.min(self.gamma_sd + gamma_rd) < thr.gamma2
            }
        }
    }
}

/// Advances the discretized battery by one block.
pub fn step<T: Scalar>(
    level: usize,
    fades: &FadeSample<T>,
    params: &SystemParams<T>,
    thr: &Thresholds<T>,
    cfg: &BatteryConfig<T>,
) -> BlockOutcome {
    let l = cfg.levels();
    let k = cfg.eps_t_level();
    debug_assert!(level <= l);
    let link = BlockLink::new(fades, params);
    let mode = Mode::select(link.gamma_sd < thr.gamma1, level >= k);
    let after = match mode {
        Mode::IV => level - k,
        _ => (level + discretize_harvest(link.harvested(mode, params), cfg)).min(l),
    };
    BlockOutcome {
        mode,
        outage: link.outage(mode, params, thr, cfg.eps_t()),
        battery_level_before: level,
        battery_level_after: after,
    }
}

/// Continuous-battery variant: energy in joules, clipped at capacity.
fn step_continuous<T: Scalar>(
    energy: T,
    fades: &FadeSample<T>,
    params: &SystemParams<T>,
    thr: &Thresholds<T>,
    cfg: &BatteryConfig<T>,
) -> (Mode, bool, T) {
    let eps_t = cfg.eps_t();
    let link = BlockLink::new(fades, params);
    // Same slack as the level grid, so an exactly full threshold counts.
    let charged = energy >= eps_t * (T::one() - T::lit(1e-12));
    let mode = Mode::select(link.gamma_sd < thr.gamma1, charged);
    let after = match mode {
        Mode::IV => (energy - eps_t).max(T::zero()),
        _ => (energy + link.harvested(mode, params)).min(cfg.capacity()),
    };
    (mode, link.outage(mode, params, thr, eps_t), after)
}

/// Level bin reported for a continuous energy value.
fn energy_bin<T: Scalar>(energy: T, cfg: &BatteryConfig<T>) -> usize {
    let step = cfg.capacity() / T::from_count(cfg.levels());
    (energy / step)
        .floor()
        .to_usize()
        .unwrap_or(0)
        .min(cfg.levels())
}

/// Runs `blocks` measured blocks after the default warm-up.
pub fn simulate<T: Scalar>(
    params: &SystemParams<T>,
    links: &LinkStats<T>,
    thr: &Thresholds<T>,
    cfg: &BatteryConfig<T>,
    blocks: u64,
    seed: u64,
) -> SimulationResult {
    simulate_with(params, links, thr, cfg, blocks, seed, &SimOptions::default())
}

pub fn simulate_with<T: Scalar>(
    params: &SystemParams<T>,
    links: &LinkStats<T>,
    thr: &Thresholds<T>,
    cfg: &BatteryConfig<T>,
    blocks: u64,
    seed: u64,
    opts: &SimOptions,
) -> SimulationResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(opts.stream);
    let sampler = FadeSampler::new(params, links);
    let mut result = SimulationResult::empty(cfg.levels(), seed);
    let total = opts.warmup_blocks + blocks;

    if opts.continuous_battery {
        let mut energy = T::zero();
        for b in 0..total {
            let fades = sampler.sample::<T, _>(&mut rng);
            let before = energy_bin(energy, cfg);
            let (mode, outage, after) = step_continuous(energy, &fades, params, thr, cfg);
            energy = after;
            if b >= opts.warmup_blocks {
                result.record(&BlockOutcome {
                    mode,
                    outage,
                    battery_level_before: before,
                    battery_level_after: energy_bin(after, cfg),
                });
            }
        }
    } else {
        let k = cfg.eps_t_level();
        let mut level = 0usize;
        for b in 0..total {
            let fades = sampler.sample::<T, _>(&mut rng);
            let out = step(level, &fades, params, thr, cfg);
            debug_assert!(out.battery_level_after <= cfg.levels());
            debug_assert!(
                (out.mode == Mode::IV) == (out.battery_level_after < out.battery_level_before),
                "discharge outside mode IV"
            );
            debug_assert!(out.mode != Mode::IV || out.battery_level_after + k == out.battery_level_before);
            debug_assert!(!matches!(out.mode, Mode::II | Mode::IV) || level >= k);
            level = out.battery_level_after;
            if b >= opts.warmup_blocks {
                result.record(&out);
            }
        }
    }
    result.finish()
}
