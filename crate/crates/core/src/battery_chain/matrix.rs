use std::fmt;

use super::BatteryConfig;
use crate::channel::{LinkStats, SrGainLaw, SystemParams, Thresholds};
use crate::error::{Error, Result};
use crate::num::{ln_1m_exp, ln_sub_exp, Scalar};
use crate::specfun::Tolerance;

/// Row-stochastic `(L+1) x (L+1)` battery transition matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct TransitionMatrix<T> {
    size: usize,
    data: Vec<T>,
    /// `ln P_ij`, kept alongside because built entries can be positive yet
    /// far below the smallest representable probability.
    ln_data: Vec<T>,
    /// Probability of leaving each state, summed directly from the
    /// off-diagonal entries. Used instead of `1 - P_ii` by the solvers.
    departure: Vec<T>,
}

impl<T: Scalar> fmt::Debug for TransitionMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.rows()).finish()
    }
}

impl<T: Scalar> TransitionMatrix<T> {
    /// Wraps explicit rows, checking shape, entry range and row sums.
    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let size = rows.len();
        if size == 0 {
            return Err(Error::config("z", "matrix must have at least one state"));
        }
        let mut data = Vec::with_capacity(size * size);
        for row in &rows {
            if row.len() != size {
                return Err(Error::config("z", format!("row of length {} in {size}-state matrix", row.len())));
            }
            if row.iter().any(|&p| !(p >= T::zero() && p <= T::one())) {
                return Err(Error::config("z", "entries must lie in [0, 1]"));
            }
            data.extend_from_slice(row);
        }
        let ln_data = data.iter().map(|p| p.ln()).collect();
        let z = Self::with_departures(size, data, ln_data);
        z.check_rows(row_sum_tolerance::<T>(size))?;
        Ok(z)
    }

    fn with_departures(size: usize, data: Vec<T>, ln_data: Vec<T>) -> Self {
        let departure = (0..size)
            .map(|i| {
                data[i * size..(i + 1) * size]
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &p)| p)
                    .sum()
            })
            .collect();
        TransitionMatrix {
            size,
            data,
            ln_data,
            departure,
        }
    }

    /// Number of states, `L + 1`.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.size + j]
    }

    /// `ln P_ij`; `-inf` only for structural zeros.
    pub fn ln_get(&self, i: usize, j: usize) -> T {
        self.ln_data[i * self.size + j]
    }

    /// Some positive off-diagonal entry is below the normal floating point
    /// range, so linear-scale solvers would see a different chain.
    pub fn has_underflow(&self) -> bool {
        let n = self.size;
        (0..n).any(|i| {
            (0..n).any(|j| {
                i != j && self.ln_get(i, j) > T::neg_infinity() && !(self.get(i, j) >= T::min_positive_value())
            })
        })
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.size..(i + 1) * self.size]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> + '_ {
        self.data.chunks(self.size)
    }

    /// `sum_{j != i} P_ij`.
    pub fn departure(&self, i: usize) -> T {
        self.departure[i]
    }

    pub fn row_sums(&self) -> Vec<T> {
        self.rows().map(|r| r.iter().copied().sum()).collect()
    }

    /// `Z^T v`, i.e. one step of the distribution `v`.
    pub fn step_distribution(&self, v: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.size];
        for (i, row) in self.rows().enumerate() {
            let vi = v[i];
            if vi == T::zero() {
                continue;
            }
            for (o, &p) in out.iter_mut().zip(row) {
                *o = *o + vi * p;
            }
        }
        out
    }

    fn check_rows(&self, tol: T) -> Result<()> {
        for (i, s) in self.row_sums().into_iter().enumerate() {
            if !((s - T::one()).abs() <= tol) {
                return Err(Error::RowSum { row: i, sum: s.as_f64() });
            }
        }
        Ok(())
    }

    fn reach(&self, start: usize, forward: bool) -> Vec<bool> {
        let n = self.size;
        let mut seen = vec![false; n];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                let ln_p = if forward { self.ln_get(u, v) } else { self.ln_get(v, u) };
                if ln_p > T::neg_infinity() && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }

    /// Every state reaches every other through positive entries (counting
    /// entries that underflowed).
    pub fn is_irreducible(&self) -> bool {
        self.reach(0, true).iter().all(|&r| r) && self.reach(0, false).iter().all(|&r| r)
    }

    /// Closed communicating classes of the nonzero pattern, each listed by
    /// its smallest state.
    pub fn closed_classes(&self) -> Vec<usize> {
        let reach: Vec<Vec<bool>> = (0..self.size).map(|i| self.reach(i, true)).collect();
        let mut reps = Vec::new();
        let mut claimed = vec![false; self.size];
        for i in 0..self.size {
            if claimed[i] {
                continue;
            }
            // i is recurrent iff everything it reaches reaches it back.
            let recurrent = (0..self.size).all(|j| !reach[i][j] || reach[j][i]);
            if recurrent {
                for j in 0..self.size {
                    if reach[i][j] {
                        claimed[j] = true;
                    }
                }
                reps.push(i);
            }
        }
        reps
    }
}

fn row_sum_tolerance<T: Scalar>(size: usize) -> T {
    T::tol_floor(1e-9, 16.0 * size as f64)
}

/// Transition matrix with the default series tolerance.
pub fn build_transition_matrix<T: Scalar>(
    params: &SystemParams<T>,
    links: &LinkStats<T>,
    thr: &Thresholds<T>,
    cfg: &BatteryConfig<T>,
) -> Result<TransitionMatrix<T>> {
    build_transition_matrix_with(params, links, thr, cfg, &Tolerance::default())
}

/// Log-probability that the gain falls in `[x_lo, x_hi)`, taken from
/// whichever side of the distribution keeps the subtraction well conditioned.
/// Arguments are `(ln survival, ln cdf)` pairs.
fn ln_band<T: Scalar>(lo: (T, T), hi: (T, T)) -> T {
    let (surv_lo, cdf_lo) = lo;
    let (surv_hi, cdf_hi) = hi;
    if cdf_hi <= surv_lo {
        ln_sub_exp(cdf_hi, cdf_lo)
    } else {
        ln_sub_exp(surv_lo, surv_hi)
    }
}

/// Fills `Z` from the eight charging/discharging cases.
///
/// Rows below the threshold harvest over the whole block (modes I and III)
/// at gains `j C / (eta P_S L)`; rows at or above it harvest only in mode II,
/// over half a block, at gains `2 j C / (eta P_S L)` weighted by the direct
/// link succeeding, and otherwise discharge `eps_t_level` levels (mode IV).
/// Clipping at capacity lands in the last column.
pub fn build_transition_matrix_with<T: Scalar>(
    params: &SystemParams<T>,
    links: &LinkStats<T>,
    thr: &Thresholds<T>,
    cfg: &BatteryConfig<T>,
    tol: &Tolerance<T>,
) -> Result<TransitionMatrix<T>> {
    params.validate()?;
    let l = cfg.levels();
    let k = cfg.eps_t_level();
    let n = l + 1;
    let law = SrGainLaw::new(params, links.omega_sr).with_tolerance(*tol);

    let unit = cfg.capacity() / (params.eta * params.p_s * T::from_count(l));
    let two = T::lit(2.0);
    let full = (0..=l)
        .map(|j| law.ln_tail_and_cdf(unit * T::from_count(j)))
        .collect::<Result<Vec<_>>>()?;
    let half = (0..=l)
        .map(|j| law.ln_tail_and_cdf(two * unit * T::from_count(j)))
        .collect::<Result<Vec<_>>>()?;

    // Entries are assembled as logarithms; the linear values follow.
    let x_direct = thr.gamma1 * params.n0 / params.p_s;
    let direct_ok = -x_direct / links.omega_sd;
    let direct_fail = ln_1m_exp(direct_ok);

    let mut ln_data = vec![T::neg_infinity(); n * n];
    for i in 0..n {
        let row = &mut ln_data[i * n..(i + 1) * n];
        if i == l {
            // Full battery: mode II keeps it full, mode IV discharges.
            row[l] = direct_ok;
            row[l - k] = direct_fail;
        } else if !cfg.can_cooperate(i) {
            row[i] = full[1].1;
            for j in i + 1..l {
                row[j] = ln_band(full[j - i], full[j - i + 1]);
            }
            row[l] = full[l - i].0;
        } else {
            debug_assert!(i >= k, "cooperating level {i} below threshold level {k}");
            row[i] = direct_ok + half[1].1;
            for j in i + 1..l {
                row[j] = direct_ok + ln_band(half[j - i], half[j - i + 1]);
            }
            row[l] = direct_ok + half[l - i].0;
            row[i - k] = direct_fail;
        }
    }

    let data = ln_data.iter().map(|p| p.exp()).collect();
    let z = TransitionMatrix::with_departures(n, data, ln_data);
    z.check_rows(row_sum_tolerance::<T>(n))?;
    Ok(z)
}
