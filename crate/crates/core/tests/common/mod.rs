//! Independent numerical oracles for the integration tests. Nothing here
//! calls into the crate's special functions or solvers.
#![allow(dead_code)]

use iatf_core::TransitionMatrix;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (k, err) = kronrod15(f, a, b);
    // Below ~1e-17 per panel the estimate only sees rounding noise.
    if err <= tol.max(1e-15 * k.abs()).max(1e-17) || depth == 0 {
        return k;
    }
    let m = 0.5 * (a + b);
    adapt(f, a, m, 0.5 * tol, depth - 1) + adapt(f, m, b, 0.5 * tol, depth - 1)
}

/// Adaptive Gauss-Kronrod (7, 15) quadrature of `f` over `[a, b]` to
/// absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    adapt(&f, a, b, tol, 40)
}

/// Same, summing over the consecutive pieces of `breaks`.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: F, breaks: &[f64], tol: f64) -> f64 {
    let pieces = (breaks.len() - 1) as f64;
    breaks.windows(2).map(|w| adapt(&f, w[0], w[1], tol / pieces, 40)).sum()
}

fn ln_factorial(k: u32) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

/// `e^{-(x^2 + a^2)/2} I_n(a x)` from `I_n(z) = (1/pi) ∫_0^pi e^{z cos t} cos(n t) dt`.
/// The integrand is smooth and even-periodic, so the trapezoid rule is exact
/// up to aliasing terms `I_{2m±n}(z)`, which are below `1e-17 I_n(z)` once
/// `2m - n > 9 sqrt(z) + 40`. The Gaussian factor is folded into the exponent.
fn scaled_bessel(n: u32, a: f64, x: f64) -> f64 {
    let z = a * x;
    let m = 40 + n as usize + (6.0 * z.sqrt()) as usize;
    let h = std::f64::consts::PI / m as f64;
    let shift = -0.5 * (x * x + a * a);
    let term = |t: f64| (z * t.cos() + shift).exp() * (n as f64 * t).cos();
    let mut s = 0.5 * (term(0.0) + term(std::f64::consts::PI));
    for i in 1..m {
        s += term(i as f64 * h);
    }
    s * h / std::f64::consts::PI
}

/// Noncentral chi-square density behind `Q_N(a, .)`, in the radius `x`.
fn marcum_density(n: u32, a: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let ln_pow = n as f64 * x.ln() - (n as f64 - 1.0) * a.ln();
    ln_pow.exp() * scaled_bessel(n - 1, a, x)
}

/// `(Q_N(a, b), 1 - Q_N(a, b))`, each integrated directly from the density.
pub fn marcum_oracle(n: u32, a: f64, b: f64) -> (f64, f64) {
    if a == 0.0 {
        // Q_N(0, b) = e^{-b^2/2} sum_{k<N} (b^2/2)^k / k!
        let y = 0.5 * b * b;
        let q: f64 = (0..n).map(|k| (-y + k as f64 * y.ln() - ln_factorial(k)).exp()).sum();
        let q = if b == 0.0 { 1.0 } else { q };
        return (q, 1.0 - q);
    }
    let f = |x: f64| marcum_density(n, a, x);
    let peak = (a * a + 2.0 * n as f64).sqrt();
    let hi = peak.max(b) + 40.0;
    let mut lower = vec![0.0];
    if peak < b {
        lower.push(peak);
    }
    lower.push(b);
    let mut upper = vec![b];
    if peak > b {
        upper.push(peak);
    }
    upper.push(hi);
    let cdf = integrate_pieces(f, &lower, 1e-14);
    let tail = integrate_pieces(f, &upper, 1e-14);
    (tail, cdf)
}

/// `Υ(alpha, x)` by quadrature. For `alpha < 1` the substitution `u = t^alpha`
/// removes the endpoint singularity.
pub fn lower_gamma_oracle(alpha: f64, x: f64) -> f64 {
    if alpha < 1.0 {
        let f = |u: f64| (-u.powf(1.0 / alpha)).exp();
        integrate(f, 0.0, x.powf(alpha), 1e-15) / alpha
    } else {
        let f = |t: f64| if t == 0.0 { 0.0 } else { ((alpha - 1.0) * t.ln() - t).exp() };
        let mode = (alpha - 1.0).min(x);
        let mut breaks = vec![0.0];
        if mode > 0.0 && mode < x {
            breaks.push(mode);
        }
        breaks.push(x);
        let scale = if alpha > 2.0 { ((alpha - 1.0) * (alpha - 1.0).ln() - (alpha - 1.0)).exp() } else { 1.0 };
        integrate_pieces(f, &breaks, 1e-15 * scale.max(1.0))
    }
}

/// Regularized lower incomplete gamma `P(N, z)` for integer `N`, by the
/// Poisson identity: a positive series for small `z`, a short complement for
/// large `z`.
pub fn erlang_cdf(n: u32, z: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    if z > n as f64 + 30.0 {
        let head: f64 = (0..n).map(|k| (-z + k as f64 * z.ln() - ln_factorial(k)).exp()).sum();
        return 1.0 - head;
    }
    let mut t = (-z + n as f64 * z.ln() - ln_factorial(n)).exp();
    let mut sum = 0.0;
    let mut k = n;
    loop {
        sum += t;
        k += 1;
        t *= z / k as f64;
        if t < 1e-18 * sum && k as f64 > z {
            return sum;
        }
    }
}

/// `Pr{gamma_SD < g1, gamma_SD + gamma_RD < g2}` for exponential `gamma_SD`
/// (mean `gsd`) and Erlang-`N` `gamma_RD` (per-branch mean `grd`), by
/// quadrature over `gamma_SD`.
pub fn mode4_oracle(g1: f64, g2: f64, gsd: f64, grd: f64, n: u32) -> f64 {
    let upper = g1.min(g2);
    let f = |u: f64| (-u / gsd).exp() / gsd * erlang_cdf(n, (g2 - u) / grd);
    // Resolve the density's decay scale when it is much shorter than the range.
    let mut breaks = vec![0.0];
    let mut b = gsd;
    while b < upper {
        breaks.push(b);
        b *= 4.0;
    }
    breaks.push(upper);
    integrate_pieces(f, &breaks, 1e-14)
}

/// Stationary distribution by power iteration on the jump chain of `z`,
/// `J = (I + D^-1 (Z - diag Z)) / 2` with `D` the departure rates. `J` has
/// the same communicating structure but no near-unit diagonal, so it mixes
/// in a tractable number of steps even when `z` does not; `pi` follows from
/// `pi_i ∝ v_i / d_i`. The iterates are advanced by repeated squaring of `J`
/// and work with log-probabilities, so underflowed entries of `z` count.
///
/// Returns `None` if the iterates have not settled after `max_squarings`.
pub fn power_iteration_oracle(z: &TransitionMatrix, max_squarings: u32) -> Option<Vec<f64>> {
    let n = z.size();
    let ln_dep: Vec<f64> = (0..n)
        .map(|i| {
            let v: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| z.ln_get(i, j)).collect();
            let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
        })
        .collect();
    if ln_dep.iter().any(|d| !d.is_finite()) {
        return None;
    }
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = if i == j { 0.5 } else { 0.5 * (z.ln_get(i, j) - ln_dep[i]).exp() };
        }
    }
    let mut v = vec![1.0 / n as f64; n];
    for _ in 0..max_squarings {
        // v <- v J^(2^m), then J <- J^2.
        let mut w = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                w[j] += v[i] * p[i * n + j];
            }
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        // Relative change, so tiny entries must settle too. Products of
        // nonnegative matrices carry no cancellation, so this is attainable.
        let change = w.iter().zip(&v).map(|(a, b)| (a - b).abs() / a.max(1e-250)).fold(0.0, f64::max);
        v = w;
        if change < 1e-12 {
            let ln_pi: Vec<f64> = v.iter().zip(&ln_dep).map(|(a, d)| a.ln() - d).collect();
            let m = ln_pi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let norm: f64 = ln_pi.iter().map(|x| (x - m).exp()).sum();
            return Some(ln_pi.iter().map(|x| (x - m).exp() / norm).collect());
        }
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let pik = p[i * n + k];
                if pik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    q[i * n + j] += pik * p[k * n + j];
                }
            }
        }
        p = q;
    }
    None
}

/// Mean channel power gain `1 / (1 + d^alpha)`.
pub fn path_gain(d: f64, alpha: f64) -> f64 {
    1.0 / (1.0 + d.powf(alpha))
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}
