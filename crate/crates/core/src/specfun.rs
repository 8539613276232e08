//! Special functions used by the closed-form analysis.
//!
//! The generalized Marcum Q-function is evaluated as a Poisson mixture of
//! regularized incomplete gamma functions (the noncentral chi-square tail),
//! summed outward from the Poisson mode with explicit geometric tail bounds.
//! All weights, gamma increments and partial sums are carried in log space,
//! so the evaluation neither overflows for large `a * b` the way a Bessel
//! series does nor underflows for deep tails.

use crate::error::{Error, Result};
use crate::num::{ln_1m_exp, ln_add_exp, Scalar};

/// Truncation control for series evaluations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance<T> {
    /// Stop once the bound on the neglected terms falls below this
    /// fraction of the sum accumulated so far.
    pub rel_tol: T,
    /// Upper limit on the number of series terms / continued-fraction steps.
    pub max_terms: usize,
}

impl<T: Scalar> Default for Tolerance<T> {
    fn default() -> Self {
        Tolerance {
            rel_tol: T::tol_floor(1e-12, 4.0),
            max_terms: 100_000,
        }
    }
}

impl<T: Scalar> Tolerance<T> {
    pub fn new(rel_tol: T, max_terms: usize) -> Result<Self> {
        if !(rel_tol > T::zero()) {
            return Err(Error::config("rel_tol", "must be > 0"));
        }
        if max_terms == 0 {
            return Err(Error::config("max_terms", "must be >= 1"));
        }
        Ok(Tolerance { rel_tol, max_terms })
    }
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma<T: Scalar>(x: T) -> T {
    if x < T::lit(0.5) {
        // Reflection keeps the approximation in its accurate half-plane.
        let pi = T::PI();
        return (pi / (pi * x).sin()).ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let mut acc = T::lit(LANCZOS_COEF[0]);
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc = acc + T::lit(c) / (x + T::from_count(i));
    }
    let t = x + T::lit(LANCZOS_G + 0.5);
    T::lit(0.5) * (T::lit(2.0) * T::PI()).ln() + (x + T::lit(0.5)) * t.ln() - t + acc.ln()
}

fn check_gamma_args<T: Scalar>(routine: &'static str, alpha: T, x: T) -> Result<()> {
    if !(alpha > T::zero()) || !alpha.is_finite() {
        return Err(Error::Domain {
            routine,
            arg: "alpha",
            value: alpha.as_f64(),
            expected: "alpha > 0",
        });
    }
    if !(x >= T::zero()) {
        return Err(Error::Domain {
            routine,
            arg: "x",
            value: x.as_f64(),
            expected: "x >= 0",
        });
    }
    Ok(())
}

/// Series `sum_n x^n / (alpha (alpha+1) ... (alpha+n))`, valid for x < alpha + 1.
fn gamma_series<T: Scalar>(alpha: T, x: T, max_terms: usize) -> Result<T> {
    let eps = T::epsilon();
    let mut ap = alpha;
    let mut del = T::one() / alpha;
    let mut sum = del;
    for _ in 0..max_terms {
        ap = ap + T::one();
        del = del * x / ap;
        sum = sum + del;
        if del.abs() <= sum.abs() * eps {
            return Ok(sum);
        }
    }
    Err(Error::NoConvergence {
        routine: "incomplete gamma series",
        terms: max_terms,
    })
}

/// Modified Lentz evaluation of the continued fraction for the upper tail,
/// valid for x >= alpha + 1. Returns `Gamma(alpha, x) * e^x * x^-alpha`.
fn gamma_continued_fraction<T: Scalar>(alpha: T, x: T, max_terms: usize) -> Result<T> {
    let eps = T::epsilon();
    let tiny = T::min_positive_value() / eps;
    let mut b = x + T::one() - alpha;
    let mut c = T::one() / tiny;
    let mut d = T::one() / b;
    let mut h = d;
    for i in 1..=max_terms {
        let fi = T::from_count(i);
        let an = -fi * (fi - alpha);
        b = b + T::lit(2.0);
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = T::one() / d;
        let del = d * c;
        h = h * del;
        if (del - T::one()).abs() <= eps {
            return Ok(h);
        }
    }
    Err(Error::NoConvergence {
        routine: "incomplete gamma continued fraction",
        terms: max_terms,
    })
}

/// Logs of the regularized incomplete gamma pair, `(ln P(alpha, x), ln Q(alpha, x))`.
///
/// The side matching the evaluation regime (series for `P`, continued
/// fraction for `Q`) is computed directly and keeps its relative accuracy
/// far below the underflow threshold; the other comes from the complement.
pub fn ln_regularized_gamma<T: Scalar>(alpha: T, x: T, tol: &Tolerance<T>) -> Result<(T, T)> {
    check_gamma_args("regularized_gamma", alpha, x)?;
    if x == T::zero() {
        return Ok((T::neg_infinity(), T::zero()));
    }
    if x.is_infinite() {
        return Ok((T::zero(), T::neg_infinity()));
    }
    let ln_prefactor = alpha * x.ln() - x - ln_gamma(alpha);
    if x < alpha + T::one() {
        let ln_p = (ln_prefactor + gamma_series(alpha, x, tol.max_terms)?.ln()).min(T::zero());
        Ok((ln_p, ln_1m_exp(ln_p)))
    } else {
        let ln_q = (ln_prefactor + gamma_continued_fraction(alpha, x, tol.max_terms)?.ln()).min(T::zero());
        Ok((ln_1m_exp(ln_q), ln_q))
    }
}

/// Regularized incomplete gamma pair `(P(alpha, x), Q(alpha, x))`.
///
/// The smaller of the two is computed directly and the other by complement,
/// so both are accurate in absolute terms and the directly computed one is
/// accurate in relative terms.
pub fn regularized_gamma<T: Scalar>(alpha: T, x: T, tol: &Tolerance<T>) -> Result<(T, T)> {
    let (ln_p, ln_q) = ln_regularized_gamma(alpha, x, tol)?;
    if ln_p <= ln_q {
        let p = ln_p.exp();
        Ok((p, T::one() - p))
    } else {
        let q = ln_q.exp();
        Ok((T::one() - q, q))
    }
}

/// Lower incomplete gamma function `Υ(alpha, x) = ∫_0^x e^-t t^(alpha-1) dt`.
pub fn lower_incomplete_gamma<T: Scalar>(alpha: T, x: T, tol: &Tolerance<T>) -> Result<T> {
    check_gamma_args("lower_incomplete_gamma", alpha, x)?;
    if x == T::zero() {
        return Ok(T::zero());
    }
    if x.is_infinite() {
        return Ok(ln_gamma(alpha).exp());
    }
    let ln_prefactor = alpha * x.ln() - x;
    if x < alpha + T::one() {
        Ok(gamma_series(alpha, x, tol.max_terms)? * ln_prefactor.exp())
    } else {
        let upper = gamma_continued_fraction(alpha, x, tol.max_terms)? * ln_prefactor.exp();
        Ok((ln_gamma(alpha).exp() - upper).max(T::zero()))
    }
}

/// Generalized Marcum Q-function `Q_N(a, b)`.
pub fn marcum_q<T: Scalar>(order: u32, a: T, b: T, tol: &Tolerance<T>) -> Result<T> {
    marcum_q_pair(order, a, b, tol).map(|(q, _)| q)
}

/// `(Q_N(a, b), 1 - Q_N(a, b))`, each clamped to `[0, 1]`.
///
/// Whichever side is expected to be smaller (CDF when `b^2/2` is below the
/// mean `N + a^2/2`, tail otherwise) is summed directly, so tiny CDF values
/// and tiny tail values both keep their relative accuracy.
pub fn marcum_q_pair<T: Scalar>(order: u32, a: T, b: T, tol: &Tolerance<T>) -> Result<(T, T)> {
    let side = marcum_core(order, a, b, tol)?;
    let small = side.ln_value.exp().min(T::one());
    Ok(if side.cdf {
        (T::one() - small, small)
    } else {
        (small, T::one() - small)
    })
}

/// `(ln Q_N(a, b), ln(1 - Q_N(a, b)))`. Stays finite where the linear-scale
/// pair underflows to 0.
pub fn ln_marcum_q_pair<T: Scalar>(order: u32, a: T, b: T, tol: &Tolerance<T>) -> Result<(T, T)> {
    let side = marcum_core(order, a, b, tol)?;
    let other = ln_1m_exp(side.ln_value);
    Ok(if side.cdf {
        (other, side.ln_value)
    } else {
        (side.ln_value, other)
    })
}

/// The side of the Marcum pair that was summed directly, as a logarithm.
struct MarcumSide<T> {
    cdf: bool,
    ln_value: T,
}

fn marcum_core<T: Scalar>(order: u32, a: T, b: T, tol: &Tolerance<T>) -> Result<MarcumSide<T>> {
    const ROUTINE: &str = "marcum_q";
    if order == 0 {
        return Err(Error::Domain {
            routine: ROUTINE,
            arg: "order",
            value: 0.0,
            expected: "order >= 1",
        });
    }
    if !(a >= T::zero()) || a.is_infinite() {
        return Err(Error::Domain {
            routine: ROUTINE,
            arg: "a",
            value: a.as_f64(),
            expected: "finite a >= 0",
        });
    }
    if !(b >= T::zero()) {
        return Err(Error::Domain {
            routine: ROUTINE,
            arg: "b",
            value: b.as_f64(),
            expected: "b >= 0",
        });
    }
    if b == T::zero() {
        return Ok(MarcumSide {
            cdf: true,
            ln_value: T::neg_infinity(),
        });
    }
    if b.is_infinite() {
        return Ok(MarcumSide {
            cdf: false,
            ln_value: T::neg_infinity(),
        });
    }

    let half = T::lit(0.5);
    let lam = half * a * a;
    let y = half * b * b;
    let n = T::from_u32(order).unwrap_or_else(T::infinity);
    let sum_cdf = y < n + lam;
    let pick = |(p, q): (T, T)| if sum_cdf { p } else { q };

    if lam == T::zero() {
        return Ok(MarcumSide {
            cdf: sum_cdf,
            ln_value: pick(ln_regularized_gamma(n, y, tol)?),
        });
    }

    // The CDF-side terms peak at or below the Poisson mode; the tail-side
    // terms w_j Q(N + j, y) keep growing while (j + 1)(N + j) < lam y.
    let mode = lam.floor();
    let start = if sum_cdf {
        mode
    } else {
        let np1 = n + T::one();
        let disc = (np1 * np1 - T::lit(4.0) * (n - lam * y)).sqrt();
        mode.max(((disc - np1) * half).floor())
    };
    let k0 = start.to_usize().unwrap_or(0);
    let s0 = n + T::from_count(k0);
    let ln_lam = lam.ln();
    let ln_y = y.ln();
    // Each term w_k F(s_k, y) is exp(base + ln_a + ln_c): `base` holds the
    // Poisson weight and gamma prefactor at the start index (possibly huge),
    // `ln_a` their change since then and `ln_c` the prefactor-free gamma
    // core, so the summation itself only handles moderate numbers.
    let mut ln_w = -lam + T::from_count(k0) * ln_lam - ln_gamma(T::from_count(k0) + T::one());
    let base = ln_w + s0 * ln_y - y - ln_gamma(s0);
    let ln_w0 = ln_w;
    let ln_c0 = ln_gamma_core(s0, y, !sum_cdf, tol)?;
    let mut ln_total = ln_c0;
    let mut terms = 1usize;
    let ln_tol = (half * tol.rel_tol).ln();
    let exhausted = || Error::NoConvergence {
        routine: ROUTINE,
        terms: tol.max_terms,
    };
    // Geometric bound on everything left given the current ratio bound `r`;
    // negligible once below a fraction of the sum so far (or exactly zero).
    // The fraction is floored at what a logarithm of the result's size can
    // resolve, which only matters for astronomically small sides.
    let eps4 = T::epsilon() * T::lit(4.0);
    let negligible = |ln_scale: T, r: T, ln_total: T| {
        if !(r < T::one()) {
            return false;
        }
        let ln_bound = ln_scale + (r / (T::one() - r)).ln();
        let ln_rel = ln_tol.max(((base + ln_total).abs() * eps4).ln());
        ln_bound == T::neg_infinity() || ln_bound < ln_rel + ln_total
    };

    // Upward. Q(s+1) = Q(s) + g_s, with g_s = y^s e^-y / s!, becomes
    // c(s+1) = (s c(s) + 1) / y on the cores. The matching P(s+1) = P(s) - g_s
    // loses a factor s/y of relative accuracy per step, so the P core is
    // evaluated afresh instead.
    let mut ln_a = T::zero();
    let mut ln_c = ln_c0;
    let mut s = s0;
    let mut k = k0;
    loop {
        k += 1;
        terms += 1;
        if terms > tol.max_terms {
            return Err(exhausted());
        }
        let fk = T::from_count(k);
        ln_a = ln_a + (lam * y / (fk * s)).ln();
        let s_prev = s;
        s = n + fk;
        ln_c = if sum_cdf {
            ln_gamma_core(s, y, false, tol)?
        } else {
            ln_add_exp(s_prev.ln() + ln_c, T::zero()) - ln_y
        };
        let ln_t = ln_a + ln_c;
        ln_total = ln_add_exp(ln_total, ln_t);
        let r = if sum_cdf {
            // P decreases in s and w_{j+1}/w_j <= lam/(k+1).
            lam / (fk + T::one())
        } else {
            // Q(s+1)/Q(s) <= 1 + y/s because Q(s) >= g_{s-1}.
            lam * (s + y) / (s * (fk + T::one()))
        };
        if negligible(ln_t, r, ln_total) {
            break;
        }
    }

    // Downward. P(s-1) = P(s) + g_{s-1} becomes c(s-1) = (y c(s) + 1)/(s-1);
    // the Q core is evaluated afresh for the same reason as P above.
    let mut ln_a = T::zero();
    let mut ln_c = ln_c0;
    ln_w = ln_w0;
    for k in (0..k0).rev() {
        terms += 1;
        if terms > tol.max_terms {
            return Err(exhausted());
        }
        let fk = T::from_count(k);
        let s = n + fk;
        ln_a = ln_a + ((fk + T::one()) * s / (lam * y)).ln();
        ln_w = ln_w + (fk + T::one()).ln() - ln_lam;
        ln_c = if sum_cdf {
            ln_add_exp(ln_y + ln_c, T::zero()) - s.ln()
        } else {
            ln_gamma_core(s, y, true, tol)?
        };
        let ln_t = ln_a + ln_c;
        ln_total = ln_add_exp(ln_total, ln_t);
        if k == 0 {
            break;
        }
        let done = if sum_cdf {
            // P <= 1 and w_{j-1}/w_j <= k/lam; or P(s-1)/P(s) <= 1 + s/y
            // because P(s) >= g_s.
            negligible(ln_w - base, fk / lam, ln_total)
                || negligible(ln_t, fk / lam * (T::one() + s / y), ln_total)
        } else if s - T::one() < y {
            // Q(s-1)/Q(s) <= (s-1)/y since Q(s) <= g_{s-1} y/(y-s+1).
            negligible(ln_t, fk * (s - T::one()) / (lam * y), ln_total)
        } else {
            // Q decreases as s goes down and w_{j-1}/w_j <= k/lam.
            negligible(ln_t, fk / lam, ln_total)
        };
        if done {
            break;
        }
    }

    Ok(MarcumSide {
        cdf: sum_cdf,
        ln_value: (base + ln_total).min(T::zero()),
    })
}

/// `ln F(alpha, x) - (alpha ln x - x - ln Γ(alpha))` with `F = Q` when
/// `upper`, else `F = P`: the regularized gamma without its dominant
/// power/exponential prefactor. Requires `0 < x < inf`.
fn ln_gamma_core<T: Scalar>(alpha: T, x: T, upper: bool, tol: &Tolerance<T>) -> Result<T> {
    let series_regime = x < alpha + T::one();
    let direct = if series_regime {
        gamma_series(alpha, x, tol.max_terms)?
    } else {
        gamma_continued_fraction(alpha, x, tol.max_terms)?
    };
    if series_regime != upper {
        Ok(direct.ln())
    } else {
        // The complement side is the large one here, so its prefactor is
        // moderate and the subtraction is benign.
        let ln_pref = alpha * x.ln() - x - ln_gamma(alpha);
        Ok(ln_1m_exp(ln_pref + direct.ln()) - ln_pref)
    }
}
