use super::TransitionMatrix;
use crate::error::{Error, Result};
use crate::num::{ln_add_exp, ln_sum_exp, Scalar};

/// Largest 1-norm condition estimate accepted from the rank-correction solve;
/// keeps the forward error bound `cond * eps` near 1e-9.
const MAX_CONDITION: f64 = 1e7;

/// Which solver produced a steady state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StationarySolver {
    /// Direct solve of `(Z^T - I + B) pi = 1`.
    RankCorrection,
    /// Grassmann-Taksar-Heyman state reduction; used when the chain mixes
    /// so slowly that the rank-correction system is ill conditioned, and
    /// carried out on log-probabilities when some transitions underflow.
    StateReduction,
}

/// Stationary distribution of the battery level.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState<T> {
    pub pi: Vec<T>,
    pub solver: StationarySolver,
    /// 1-norm condition estimate of the rank-correction system (infinite
    /// when that system was not formed).
    pub condition: f64,
}

impl<T: Scalar> SteadyState<T> {
    pub fn levels(&self) -> usize {
        self.pi.len() - 1
    }

    /// Probability mass at levels `>= level`.
    pub fn mass_from(&self, level: usize) -> T {
        self.pi.iter().skip(level).copied().sum()
    }

    /// `||Z^T pi - pi||_inf`.
    pub fn residual(&self, z: &TransitionMatrix<T>) -> T {
        z.step_distribution(&self.pi)
            .iter()
            .zip(&self.pi)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }
}

/// Unique stationary distribution of `z`.
///
/// Solves the rank-corrected system first. If its condition estimate
/// exceeds 1e7 or the solution fails the fixed-point check, falls back to
/// state reduction, which involves no subtractions and stays accurate when
/// some transitions are many orders of magnitude rarer than others. Chains
/// with underflowed entries go straight to state reduction in log space.
/// Fails when the nonzero pattern has more than one closed class.
pub fn steady_state<T: Scalar>(z: &TransitionMatrix<T>) -> Result<SteadyState<T>> {
    let anchor = single_closed_class(z)?;
    if z.has_underflow() {
        return Ok(SteadyState {
            pi: reduce_from_ln(z, anchor)?,
            solver: StationarySolver::StateReduction,
            condition: f64::INFINITY,
        });
    }
    let fixed_point_tol = T::tol_floor(1e-12, 64.0 * z.size() as f64);
    let condition = match steady_state_rank_correction(z) {
        Ok((pi, condition)) => {
            let candidate = SteadyState {
                pi,
                solver: StationarySolver::RankCorrection,
                condition,
            };
            if condition <= MAX_CONDITION && candidate.residual(z) <= fixed_point_tol {
                return Ok(candidate);
            }
            condition
        }
        Err(_) => f64::INFINITY,
    };
    Ok(SteadyState {
        pi: reduce_from(z, anchor)?,
        solver: StationarySolver::StateReduction,
        condition,
    })
}

fn single_closed_class<T: Scalar>(z: &TransitionMatrix<T>) -> Result<usize> {
    let classes = z.closed_classes();
    if classes.len() != 1 {
        return Err(Error::Reducible {
            closed_classes: classes.len(),
        });
    }
    Ok(classes[0])
}

/// Solves `(Z^T - I + B) pi = b` with `B` all ones and `b` a ones vector.
/// Returns the distribution and the 1-norm condition estimate of the system.
pub fn steady_state_rank_correction<T: Scalar>(z: &TransitionMatrix<T>) -> Result<(Vec<T>, f64)> {
    let n = z.size();
    let mut a = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            // a[j][i] = Z[i][j] - delta_ij + 1
            a[j * n + i] = if i == j {
                T::one() - z.departure(i)
            } else {
                z.get(i, j) + T::one()
            };
        }
    }
    let norm1 = (0..n)
        .map(|j| (0..n).map(|i| a[i * n + j].abs()).sum::<T>())
        .fold(T::zero(), T::max);
    let lu = Lu::factor(a, n).ok_or_else(|| Error::Solve("rank-corrected system is singular".into()))?;
    let mut pi = lu.solve(&vec![T::one(); n]);
    let condition = norm1.as_f64() * lu.inverse_norm1_estimate().as_f64();

    let floor = -T::tol_floor(1e-12, 64.0);
    if pi.iter().any(|&p| !(p >= floor)) {
        return Err(Error::Solve("rank-corrected solution has negative mass".into()));
    }
    for p in &mut pi {
        *p = p.max(T::zero());
    }
    Ok((pi, condition))
}

/// Grassmann-Taksar-Heyman state reduction, in log space if any entry
/// underflowed.
pub fn steady_state_state_reduction<T: Scalar>(z: &TransitionMatrix<T>) -> Result<Vec<T>> {
    let anchor = single_closed_class(z)?;
    if z.has_underflow() {
        reduce_from_ln(z, anchor)
    } else {
        reduce_from(z, anchor)
    }
}

/// GTH with `anchor` (a recurrent state) moved to position 0, so every
/// censored state still has somewhere lower to go.
fn reduce_from<T: Scalar>(z: &TransitionMatrix<T>, anchor: usize) -> Result<Vec<T>> {
    let n = z.size();
    let mut order: Vec<usize> = (0..n).collect();
    order.swap(0, anchor);
    let mut p = vec![T::zero(); n * n];
    for (a, &i) in order.iter().enumerate() {
        for (b, &j) in order.iter().enumerate() {
            if a != b {
                p[a * n + b] = z.get(i, j);
            }
        }
    }
    for m in (1..n).rev() {
        let s: T = p[m * n..m * n + m].iter().copied().sum();
        if !(s > T::zero()) {
            return Err(Error::Solve(format!("state {} cannot return to the recurrent class", order[m])));
        }
        for i in 0..m {
            let pim = p[i * n + m] / s;
            p[i * n + m] = pim;
            if pim == T::zero() {
                continue;
            }
            for j in 0..m {
                if i != j {
                    p[i * n + j] = p[i * n + j] + pim * p[m * n + j];
                }
            }
        }
    }
    let mut x = vec![T::zero(); n];
    x[0] = T::one();
    for m in 1..n {
        x[m] = (0..m).map(|i| x[i] * p[i * n + m]).sum();
    }
    let total: T = x.iter().copied().sum();
    let mut pi = vec![T::zero(); n];
    for (a, &i) in order.iter().enumerate() {
        pi[i] = x[a] / total;
    }
    Ok(pi)
}

/// [`reduce_from`] on `ln P_ij`: sums become log-sum-exp and products
/// become sums, so transitions far below the floating point range still
/// carry their relative weight.
fn reduce_from_ln<T: Scalar>(z: &TransitionMatrix<T>, anchor: usize) -> Result<Vec<T>> {
    let n = z.size();
    let mut order: Vec<usize> = (0..n).collect();
    order.swap(0, anchor);
    let mut p = vec![T::neg_infinity(); n * n];
    for (a, &i) in order.iter().enumerate() {
        for (b, &j) in order.iter().enumerate() {
            if a != b {
                p[a * n + b] = z.ln_get(i, j);
            }
        }
    }
    for m in (1..n).rev() {
        let s = ln_sum_exp(p[m * n..m * n + m].iter().copied());
        if s == T::neg_infinity() {
            return Err(Error::Solve(format!("state {} cannot return to the recurrent class", order[m])));
        }
        for i in 0..m {
            let pim = p[i * n + m] - s;
            p[i * n + m] = pim;
            if pim == T::neg_infinity() {
                continue;
            }
            for j in 0..m {
                if i != j {
                    p[i * n + j] = ln_add_exp(p[i * n + j], pim + p[m * n + j]);
                }
            }
        }
    }
    let mut x = vec![T::neg_infinity(); n];
    x[0] = T::zero();
    for m in 1..n {
        x[m] = ln_sum_exp((0..m).map(|i| x[i] + p[i * n + m]));
    }
    let total = ln_sum_exp(x.iter().copied());
    let mut pi = vec![T::zero(); n];
    for (a, &i) in order.iter().enumerate() {
        pi[i] = (x[a] - total).exp();
    }
    Ok(pi)
}

/// LU factorization with partial pivoting, `P A = L U`, packed in place.
struct Lu<T> {
    n: usize,
    lu: Vec<T>,
    perm: Vec<usize>,
}

impl<T: Scalar> Lu<T> {
    fn factor(mut a: Vec<T>, n: usize) -> Option<Self> {
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&x, &y| a[x * n + col].abs().partial_cmp(&a[y * n + col].abs()).unwrap())
                .unwrap_or(col);
            if !(a[pivot * n + col].abs() > T::zero()) {
                return None;
            }
            if pivot != col {
                for j in 0..n {
                    a.swap(pivot * n + j, col * n + j);
                }
                perm.swap(pivot, col);
            }
            let d = a[col * n + col];
            for r in col + 1..n {
                let f = a[r * n + col] / d;
                a[r * n + col] = f;
                if f != T::zero() {
                    for j in col + 1..n {
                        a[r * n + j] = a[r * n + j] - f * a[col * n + j];
                    }
                }
            }
        }
        Some(Lu { n, lu: a, perm })
    }

    fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] = x[i] - self.lu[i * n + j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] = x[i] - self.lu[i * n + j] * x[j];
            }
            x[i] = x[i] / self.lu[i * n + i];
        }
        x
    }

    fn solve_transpose(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut w = b.to_vec();
        // U^T w = b
        for i in 0..n {
            for j in 0..i {
                w[i] = w[i] - self.lu[j * n + i] * w[j];
            }
            w[i] = w[i] / self.lu[i * n + i];
        }
        // L^T v = w
        for i in (0..n).rev() {
            for j in i + 1..n {
                w[i] = w[i] - self.lu[j * n + i] * w[j];
            }
        }
        let mut x = vec![T::zero(); n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = w[i];
        }
        x
    }

    /// Hager's estimate of `||A^-1||_1`.
    fn inverse_norm1_estimate(&self) -> T {
        let n = self.n;
        let mut x = vec![T::one() / T::from_count(n); n];
        let mut estimate = T::zero();
        for _ in 0..5 {
            let y = self.solve(&x);
            estimate = y.iter().map(|v| v.abs()).sum();
            let sign: Vec<T> = y.iter().map(|&v| if v >= T::zero() { T::one() } else { -T::one() }).collect();
            let zv = self.solve_transpose(&sign);
            let (jmax, zmax) = zv
                .iter()
                .enumerate()
                .map(|(j, v)| (j, v.abs()))
                .fold((0, T::zero()), |acc, c| if c.1 > acc.1 { c } else { acc });
            let ztx: T = zv.iter().zip(&x).map(|(&a, &b)| a * b).sum();
            if zmax <= ztx {
                break;
            }
            x = vec![T::zero(); n];
            x[jmax] = T::one();
        }
        if estimate.is_finite() {
            estimate
        } else {
            T::infinity()
        }
    }
}
