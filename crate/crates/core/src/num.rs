//! Scalar abstraction shared by the analytic modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type the analysis can be carried out in.
///
/// Implemented for `f32` and `f64`. Every numerical tolerance in the crate
/// is floored at a small multiple of [`Float::epsilon`], so `f32` runs are
/// usable for quick sweeps while `f64` is required for the tight
/// stochasticity checks.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(v: f64) -> Self {
        // f64 -> f32/f64 never fails; out-of-range values saturate to inf.
        Self::from_f64(v).unwrap_or_else(Self::nan)
    }

    /// Converts an index or count into `Self`.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).unwrap_or_else(Self::infinity)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `max(tol, factor * epsilon)`.
    #[inline]
    fn tol_floor(tol: f64, factor: f64) -> Self {
        Self::lit(tol).max(Self::epsilon() * Self::lit(factor))
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `ln(e^a + e^b)`.
pub fn ln_add_exp<T: Scalar>(a: T, b: T) -> T {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == T::neg_infinity() {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(1 - e^x)` for `x <= 0`, accurate at both ends.
pub fn ln_1m_exp<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::neg_infinity()
    } else if x > -T::LN_2() {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// `ln(e^a - e^b)`; `-inf` when `b >= a`.
pub fn ln_sub_exp<T: Scalar>(a: T, b: T) -> T {
    if b == T::neg_infinity() {
        return a;
    }
    a + ln_1m_exp(b - a)
}

/// `ln(sum e^x_i)` over a slice; `-inf` when empty.
pub fn ln_sum_exp<T: Scalar>(xs: impl IntoIterator<Item = T>) -> T {
    let xs: Vec<T> = xs.into_iter().collect();
    let hi = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if hi == T::neg_infinity() || hi.is_infinite() {
        return hi;
    }
    hi + xs.iter().map(|&x| (x - hi).exp()).sum::<T>().ln()
}
