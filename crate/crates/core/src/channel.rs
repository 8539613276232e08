//! Link statistics for the source-relay-destination triangle.
//!
//! Only channel power gains are modelled. Under MRC at the relay and MRT
//! from the relay, every SNR in the protocol is a function of
//! `H = ||h||^2`, so complex antenna coefficients are never materialized.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::specfun::{ln_marcum_q_pair, marcum_q_pair, Tolerance};

/// Physical constants of one network configuration. Powers in watts,
/// distances in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams<T> {
    /// Source transmit power `P_S`.
    pub p_s: T,
    /// Noise power `N_0`.
    pub n0: T,
    /// RF-to-DC conversion efficiency.
    pub eta: T,
    /// Transmission rate in bits/s/Hz.
    pub rate: T,
    /// Relay antenna count.
    pub n_antennas: u32,
    /// Rician K-factor of each S-R antenna branch.
    pub rician_k: T,
    pub d_sd: T,
    pub d_sr: T,
    pub d_rd: T,
    /// Path-loss exponent.
    pub alpha: T,
}

impl<T: Scalar> SystemParams<T> {
    /// The evaluation geometry: 80/10/70 m, alpha = 3, K = 10,
    /// N0 = -60 dBm, eta = 0.5, rate 1, single relay antenna.
    pub fn reference(p_s: T) -> Self {
        SystemParams {
            p_s,
            n0: T::lit(1e-9),
            eta: T::lit(0.5),
            rate: T::one(),
            n_antennas: 1,
            rician_k: T::lit(10.0),
            d_sd: T::lit(80.0),
            d_sr: T::lit(10.0),
            d_rd: T::lit(70.0),
            alpha: T::lit(3.0),
        }
    }

    pub fn with_antennas(mut self, n: u32) -> Self {
        self.n_antennas = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &'static str, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be finite and > 0, got {v}")))
            }
        };
        positive("p_s", self.p_s)?;
        positive("n0", self.n0)?;
        positive("rate", self.rate)?;
        positive("d_sd", self.d_sd)?;
        positive("d_sr", self.d_sr)?;
        positive("d_rd", self.d_rd)?;
        if !(self.eta > T::zero() && self.eta <= T::one()) {
            return Err(Error::config("eta", format!("must lie in (0, 1], got {}", self.eta)));
        }
        if self.n_antennas == 0 {
            return Err(Error::config("n_antennas", "must be >= 1"));
        }
        if !(self.rician_k >= T::zero()) || !self.rician_k.is_finite() {
            return Err(Error::config("rician_k", format!("must be finite and >= 0, got {}", self.rician_k)));
        }
        if !(self.alpha >= T::lit(2.0) && self.alpha <= T::lit(5.0)) {
            return Err(Error::config("alpha", format!("must lie in [2, 5], got {}", self.alpha)));
        }
        Ok(())
    }

    pub(crate) fn antennas(&self) -> T {
        T::from_u32(self.n_antennas).unwrap_or_else(T::one)
    }
}

/// Mean per-element channel power gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkStats<T> {
    pub omega_sd: T,
    pub omega_sr: T,
    pub omega_rd: T,
}

impl<T: Scalar> LinkStats<T> {
    pub fn new(omega_sd: T, omega_sr: T, omega_rd: T) -> Result<Self> {
        for (key, v) in [("omega_sd", omega_sd), ("omega_sr", omega_sr), ("omega_rd", omega_rd)] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::config(key, format!("must be finite and > 0, got {v}")));
            }
        }
        Ok(LinkStats {
            omega_sd,
            omega_sr,
            omega_rd,
        })
    }

    /// Path-loss means for the geometry in `params`.
    pub fn from_params(params: &SystemParams<T>) -> Self {
        LinkStats {
            omega_sd: mean_gain(params.d_sd, params.alpha),
            omega_sr: mean_gain(params.d_sr, params.alpha),
            omega_rd: mean_gain(params.d_rd, params.alpha),
        }
    }
}

/// Outage SNR thresholds for single-slot and two-slot delivery.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds<T> {
    /// `2^R - 1`.
    pub gamma1: T,
    /// `2^(2R) - 1`.
    pub gamma2: T,
}

impl<T: Scalar> Thresholds<T> {
    pub fn from_rate(rate: T) -> Result<Self> {
        if !(rate > T::zero()) || !rate.is_finite() {
            return Err(Error::config("rate", format!("must be finite and > 0, got {rate}")));
        }
        let two = T::lit(2.0);
        Ok(Thresholds {
            gamma1: two.powf(rate) - T::one(),
            gamma2: two.powf(two * rate) - T::one(),
        })
    }
}

/// One block's channel power gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadeSample<T> {
    pub h_sd: T,
    /// `||h_SR||^2` summed over relay antennas.
    pub h_sr: T,
    /// `||h_RD||^2` summed over relay antennas.
    pub h_rd: T,
}

/// Path-loss mean `(1 + d^alpha)^-1`.
pub fn mean_gain<T: Scalar>(d: T, alpha: T) -> T {
    T::one() / (T::one() + d.powf(alpha))
}

/// CDF of the exponential S-D gain.
pub fn cdf_h_sd<T: Scalar>(x: T, omega_sd: T) -> T {
    if x <= T::zero() {
        return T::zero();
    }
    -(-x / omega_sd).exp_m1()
}

/// CDF of the S-R gain `||h_SR||^2`: `1 - Q_N(sqrt(2NK), sqrt(2(K+1)x/Omega_SR))`.
pub fn cdf_h_sr<T: Scalar>(x: T, params: &SystemParams<T>, omega_sr: T) -> Result<T> {
    SrGainLaw::new(params, omega_sr).cdf(x)
}

/// Distribution of the N-branch Rician S-R power gain.
#[derive(Debug, Clone, Copy)]
pub struct SrGainLaw<T> {
    order: u32,
    noncentrality: T,
    scale: T,
    tol: Tolerance<T>,
}

impl<T: Scalar> SrGainLaw<T> {
    pub fn new(params: &SystemParams<T>, omega_sr: T) -> Self {
        let two = T::lit(2.0);
        let k = params.rician_k;
        SrGainLaw {
            order: params.n_antennas,
            noncentrality: (two * params.antennas() * k).sqrt(),
            scale: two * (k + T::one()) / omega_sr,
            tol: Tolerance::default(),
        }
    }

    pub fn with_tolerance(mut self, tol: Tolerance<T>) -> Self {
        self.tol = tol;
        self
    }

    /// `(Pr{H > x}, Pr{H <= x})`.
    pub fn tail_and_cdf(&self, x: T) -> Result<(T, T)> {
        if x <= T::zero() {
            return Ok((T::one(), T::zero()));
        }
        let b = (self.scale * x).sqrt();
        marcum_q_pair(self.order, self.noncentrality, b, &self.tol)
    }

    /// `(ln Pr{H > x}, ln Pr{H <= x})`; finite where the linear pair
    /// underflows.
    pub fn ln_tail_and_cdf(&self, x: T) -> Result<(T, T)> {
        if x <= T::zero() {
            return Ok((T::zero(), T::neg_infinity()));
        }
        let b = (self.scale * x).sqrt();
        ln_marcum_q_pair(self.order, self.noncentrality, b, &self.tol)
    }

    pub fn cdf(&self, x: T) -> Result<T> {
        self.tail_and_cdf(x).map(|(_, c)| c)
    }

    pub fn survival(&self, x: T) -> Result<T> {
        self.tail_and_cdf(x).map(|(s, _)| s)
    }
}

/// Per-link sampling constants, precomputed once per configuration.
#[derive(Debug, Clone, Copy)]
pub struct FadeSampler {
    antennas: u32,
    omega_sd: f64,
    omega_rd: f64,
    /// LoS amplitude per S-R branch.
    los: f64,
    /// Per-dimension standard deviation of the S-R scatter component.
    scatter_sd: f64,
}

impl FadeSampler {
    pub fn new<T: Scalar>(params: &SystemParams<T>, links: &LinkStats<T>) -> Self {
        let k = params.rician_k.as_f64();
        let omega_sr = links.omega_sr.as_f64();
        FadeSampler {
            antennas: params.n_antennas,
            omega_sd: links.omega_sd.as_f64(),
            omega_rd: links.omega_rd.as_f64(),
            los: (k * omega_sr / (k + 1.0)).sqrt(),
            scatter_sd: (omega_sr / (2.0 * (k + 1.0))).sqrt(),
        }
    }

    pub fn sample<T: Scalar, R: Rng + ?Sized>(&self, rng: &mut R) -> FadeSample<T> {
        let h_sd = self.omega_sd * rng.sample::<f64, _>(Exp1);
        let mut h_sr = 0.0;
        let mut h_rd = 0.0;
        for _ in 0..self.antennas {
            let re = self.los + self.scatter_sd * rng.sample::<f64, _>(StandardNormal);
            let im = self.scatter_sd * rng.sample::<f64, _>(StandardNormal);
            h_sr += re * re + im * im;
            h_rd += self.omega_rd * rng.sample::<f64, _>(Exp1);
        }
        FadeSample {
            h_sd: T::lit(h_sd),
            h_sr: T::lit(h_sr),
            h_rd: T::lit(h_rd),
        }
    }
}

/// Draws one block of independent fades.
pub fn sample_fades<T: Scalar, R: Rng + ?Sized>(
    params: &SystemParams<T>,
    links: &LinkStats<T>,
    rng: &mut R,
) -> FadeSample<T> {
    FadeSampler::new(params, links).sample(rng)
}
