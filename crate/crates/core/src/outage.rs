//! Closed-form system outage probability and the threshold search.
//!
//! Modes I and II never cause an outage. Mode III (direct failure, relay
//! below threshold) always does, because `2 gamma_SD < 2 gamma_1 < gamma_2`
//! for any positive rate. Mode IV fails when either the relay cannot decode
//! (`gamma_SR < gamma_2`) or the combined destination SNR stays below
//! `gamma_2`; the latter joint event with `gamma_SD < gamma_1` has the
//! closed form in [`mode4_joint_cdf`].

use crate::battery_chain::{build_transition_matrix, steady_state, BatteryConfig, SteadyState};
use crate::channel::{cdf_h_sd, cdf_h_sr, LinkStats, SystemParams, Thresholds};
use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::specfun::{ln_gamma, lower_incomplete_gamma, Tolerance};

/// Below this `|c * gamma_1|` the incomplete-gamma ratio is replaced by its
/// limit `gamma_1^(k+1) / (k+1)`.
const SINGULAR_ARG: f64 = 1e-12;

/// Average SNRs of the direct and relay-destination links.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSnrs<T> {
    /// `P_S Omega_SD / N_0`.
    pub gbar_sd: T,
    /// `2 eps_T Omega_RD / N_0`, per relay antenna.
    pub gbar_rd: T,
}

impl<T: Scalar> MeanSnrs<T> {
    pub fn new(gbar_sd: T, gbar_rd: T) -> Result<Self> {
        if !(gbar_sd > T::zero()) {
            return Err(Error::config("gbar_sd", format!("must be > 0, got {gbar_sd}")));
        }
        if !(gbar_rd > T::zero()) {
            return Err(Error::config("gbar_rd", format!("must be > 0, got {gbar_rd}")));
        }
        Ok(MeanSnrs { gbar_sd, gbar_rd })
    }

    /// Relay power is `2 eps_T` (the discretized threshold spent over half a
    /// block), matching what the simulator spends.
    pub fn from_config(params: &SystemParams<T>, links: &LinkStats<T>, cfg: &BatteryConfig<T>) -> Self {
        MeanSnrs {
            gbar_sd: params.p_s * links.omega_sd / params.n0,
            gbar_rd: T::lit(2.0) * cfg.eps_t() * links.omega_rd / params.n0,
        }
    }
}

/// Outage probability split by contributing mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageBreakdown<T> {
    /// Probability the relay holds at least the threshold energy.
    pub p_e: T,
    /// `Pr{III}`; every mode III block is an outage.
    pub p_mode3_joint: T,
    /// `Pr{IV} Pr{O | IV}`.
    pub p_mode4_joint: T,
    pub p_out: T,
}

/// `sum_{i >= eps_t_level} pi_i`.
pub fn energy_sufficiency<T: Scalar>(pi: &SteadyState<T>, cfg: &BatteryConfig<T>) -> T {
    pi.mass_from(cfg.eps_t_level())
}

/// `ln ∫_0^g1 u^k e^(-c u) du`.
fn ln_exp_moment<T: Scalar>(k: usize, c: T, g1: T, tol: &Tolerance<T>) -> Result<T> {
    let k1 = T::from_count(k + 1);
    let s = c * g1;
    if s.abs() <= T::lit(SINGULAR_ARG) {
        return Ok(k1 * g1.ln() - k1.ln());
    }
    if s > T::zero() {
        let upsilon = lower_incomplete_gamma(k1, s, tol)?;
        return Ok(upsilon.ln() - k1 * c.ln());
    }
    // c < 0: the integrand grows, J = g1^(k+1) ∫_0^1 t^k e^(a t) dt with a = |s|.
    let a = -s;
    let ln_scale = k1 * g1.ln() + a;
    if a > T::lit(30.0) {
        // e^a ∫_0^1 (1-v)^k e^(-a v) dv, expanded binomially; terms fall like j!/a^j.
        let mut acc = T::zero();
        let mut binom = T::one();
        for j in 0..=k {
            let j1 = T::from_count(j + 1);
            let term = binom * (lower_incomplete_gamma(j1, a, tol)?.ln() - j1 * a.ln()).exp();
            acc = if j % 2 == 0 { acc + term } else { acc - term };
            binom = binom * T::from_count(k - j) / j1;
        }
        return Ok(ln_scale + acc.ln());
    }
    // sum_m a^m / (m! (k+1+m)) e^-a, every term positive.
    let ln_a = a.ln();
    let eps = T::epsilon();
    let mut sum = T::zero();
    for m in 0..tol.max_terms {
        let fm = T::from_count(m);
        let term = (fm * ln_a - ln_gamma(fm + T::one()) - a).exp() / (k1 + fm);
        sum = sum + term;
        if fm > a && term <= sum * eps {
            return Ok(ln_scale + sum.ln());
        }
    }
    Err(Error::NoConvergence {
        routine: "mode4_joint_cdf moment series",
        terms: tol.max_terms,
    })
}

/// `Pr{(gamma_SD + gamma_RD < gamma_2) and (gamma_SD < gamma_1)}` with
/// exponential `gamma_SD` and Erlang-`N` `gamma_RD`.
pub fn mode4_joint_cdf<T: Scalar>(thr: &Thresholds<T>, snrs: &MeanSnrs<T>, n_antennas: u32) -> Result<T> {
    mode4_joint_cdf_with(thr, snrs, n_antennas, &Tolerance::default())
}

pub fn mode4_joint_cdf_with<T: Scalar>(
    thr: &Thresholds<T>,
    snrs: &MeanSnrs<T>,
    n_antennas: u32,
    tol: &Tolerance<T>,
) -> Result<T> {
    if n_antennas == 0 {
        return Err(Error::config("n_antennas", "must be >= 1"));
    }
    let (g1, g2) = (thr.gamma1, thr.gamma2);
    let (gsd, grd) = (snrs.gbar_sd, snrs.gbar_rd);
    if !(g1 > T::zero()) {
        return Ok(T::zero());
    }
    let direct_fail = -(-g1 / gsd).exp_m1();
    let c = (grd - gsd) / (gsd * grd);

    let ln_moments = (0..n_antennas as usize)
        .map(|k| ln_exp_moment(k, c, g1, tol))
        .collect::<Result<Vec<_>>>()?;
    let ln_g2 = g2.ln();
    let ln_gsd = gsd.ln();
    let ln_grd = grd.ln();
    let decay = g2 / grd;

    let mut total = T::zero();
    for p in 0..n_antennas as usize {
        let fp = T::from_count(p);
        let ln_outer = -decay - ln_gsd - fp * ln_grd - ln_gamma(fp + T::one());
        let mut binom = T::one();
        for (k, &ln_m) in ln_moments.iter().enumerate().take(p + 1) {
            let mag = binom * (ln_outer + T::from_count(p - k) * ln_g2 + ln_m).exp();
            total = if k % 2 == 0 { total + mag } else { total - mag };
            binom = binom * T::from_count(p - k) / T::from_count(k + 1);
        }
    }
    Ok((direct_fail - total).max(T::zero()).min(direct_fail))
}

/// Closed-form outage for a solved battery chain.
pub fn outage_probability<T: Scalar>(
    params: &SystemParams<T>,
    links: &LinkStats<T>,
    thr: &Thresholds<T>,
    cfg: &BatteryConfig<T>,
    pi: &SteadyState<T>,
) -> Result<OutageBreakdown<T>> {
    let fsd = direct_baseline(params, links, thr);
    let fsr = cdf_h_sr(thr.gamma2 * params.n0 / params.p_s, params, links.omega_sr)?;
    let p_e = energy_sufficiency(pi, cfg).min(T::one());
    let snrs = MeanSnrs::from_config(params, links, cfg);
    let joint = mode4_joint_cdf(thr, &snrs, params.n_antennas)?;

    let p_mode3_joint = (T::one() - p_e) * fsd;
    let p_mode4_joint = p_e * ((T::one() - fsr) * joint + fsd * fsr);
    Ok(OutageBreakdown {
        p_e,
        p_mode3_joint,
        p_mode4_joint,
        p_out: p_mode3_joint + p_mode4_joint,
    })
}

/// Builds the chain, solves it and evaluates the outage in one go.
pub fn analyze<T: Scalar>(
    params: &SystemParams<T>,
    links: &LinkStats<T>,
    thr: &Thresholds<T>,
    cfg: &BatteryConfig<T>,
) -> Result<(OutageBreakdown<T>, SteadyState<T>)> {
    let z = build_transition_matrix(params, links, thr, cfg)?;
    let pi = steady_state(&z)?;
    let out = outage_probability(params, links, thr, cfg, &pi)?;
    Ok((out, pi))
}

/// Outage of plain direct transmission: a fresh packet every slot at rate R.
pub fn direct_baseline<T: Scalar>(params: &SystemParams<T>, links: &LinkStats<T>, thr: &Thresholds<T>) -> T {
    cdf_h_sd(thr.gamma1 * params.n0 / params.p_s, links.omega_sd)
}

/// Result of the exhaustive threshold search.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSearch<T> {
    pub best_level: usize,
    pub best_outage: T,
    /// `p_out` per candidate level `1..=L`; `None` where evaluation failed.
    pub per_level: Vec<Option<T>>,
    pub warnings: Vec<String>,
}

/// Relative margin a later candidate must beat the incumbent by, so
/// rounding noise never overrides the smallest-level tie-break.
const TIE_MARGIN: f64 = 1e-12;

/// Tries every level `k = 1..=L` as the threshold `E_T = k C / L` and keeps
/// the one with the smallest outage (smallest `k` on ties).
pub fn optimize_threshold<T: Scalar>(
    params: &SystemParams<T>,
    links: &LinkStats<T>,
    thr: &Thresholds<T>,
    capacity: T,
    levels: usize,
) -> Result<ThresholdSearch<T>> {
    if levels == 0 {
        return Err(Error::config("levels", "must be >= 1"));
    }
    let mut best: Option<(usize, T)> = None;
    let mut per_level = Vec::with_capacity(levels);
    let mut warnings = Vec::new();
    let mut last_err = None;
    for k in 1..=levels {
        let cfg = BatteryConfig::at_level(capacity, levels, k)?;
        match analyze(params, links, thr, &cfg) {
            Ok((out, _)) => {
                let p = out.p_out;
                per_level.push(Some(p));
                let better = match best {
                    None => true,
                    Some((_, b)) => p < b * (T::one() - T::lit(TIE_MARGIN)),
                };
                if better {
                    best = Some((k, p));
                }
            }
            Err(e) if !e.is_validation() => {
                warnings.push(format!("level {k} skipped: {e}"));
                per_level.push(None);
                last_err = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    match best {
        Some((best_level, best_outage)) => Ok(ThresholdSearch {
            best_level,
            best_outage,
            per_level,
            warnings,
        }),
        None => Err(last_err.unwrap_or_else(|| Error::Solve("no candidate threshold evaluated".into()))),
    }
}
