//! Scalar abstraction for thresholds and densities.
//!
//! Everything that is a count in this crate stays an integer. The parameters
//! that multiply those counts (τ, φ, δ, ε) are generic over [`Scalar`], so the
//! same code runs with `f64` for quick experiments and with an exact rational
//! type when threshold comparisons must not flake.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{Num, ToPrimitive, Zero};

/// Numeric type usable as a threshold parameter.
pub trait Scalar: Num + Clone + PartialOrd + Debug + Display + Send + Sync + 'static {
    /// Lossless for every count this crate produces (≤ 2⁵³ for floats).
    fn from_count(count: u64) -> Self;

    /// `num / den`; exact for rational types.
    fn from_ratio(num: i64, den: i64) -> Self;

    /// `2^self`. Exact for rational types when `self` is an integer,
    /// otherwise the nearest representable value of the f64 result.
    fn exp2(&self) -> Self;

    fn to_f64(&self) -> f64;

    /// Exact power of two with an integer exponent.
    fn pow2(exp: i32) -> Self {
        let two = Self::from_count(2);
        let mut acc = Self::one();
        for _ in 0..exp.unsigned_abs() {
            acc = acc * two.clone();
        }
        if exp < 0 {
            Self::one() / acc
        } else {
            acc
        }
    }
}

macro_rules! float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            fn from_count(count: u64) -> Self {
                count as $t
            }
            fn from_ratio(num: i64, den: i64) -> Self {
                num as $t / den as $t
            }
            fn exp2(&self) -> Self {
                <$t>::exp2(*self)
            }
            fn to_f64(&self) -> f64 {
                *self as f64
            }
        }
    };
}

float_scalar!(f32);
float_scalar!(f64);

macro_rules! ratio_scalar {
    ($t:ty) => {
        impl Scalar for Ratio<$t> {
            fn from_count(count: u64) -> Self {
                Ratio::from_integer(count as $t)
            }
            fn from_ratio(num: i64, den: i64) -> Self {
                Ratio::new(num as $t, den as $t)
            }
            fn exp2(&self) -> Self {
                if self.is_integer() {
                    let e = self.to_integer() as i32;
                    return Self::pow2(e);
                }
                let approx = ToPrimitive::to_f64(self).unwrap_or(f64::NAN).exp2();
                Ratio::<$t>::approximate_float(approx).unwrap_or_else(Self::zero)
            }
            fn to_f64(&self) -> f64 {
                ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
            }
        }
    };
}

ratio_scalar!(i64);
ratio_scalar!(i128);

impl Scalar for BigRational {
    fn from_count(count: u64) -> Self {
        Ratio::from_integer(BigInt::from(count))
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        Ratio::new(BigInt::from(num), BigInt::from(den))
    }
    fn exp2(&self) -> Self {
        if self.is_integer() {
            if let Some(e) = self.to_integer().to_i32() {
                return Self::pow2(e);
            }
        }
        let approx = ToPrimitive::to_f64(self).unwrap_or(f64::NAN).exp2();
        BigRational::from_float(approx).unwrap_or_else(Self::zero)
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// Smallest integer `k ∈ [0, unit]` with `k ≥ factor · unit`, or `unit + 1`
/// when no such `k` exists. Turns a scalar degree threshold into an integer
/// cutoff so inner loops compare integers only.
pub fn count_cutoff<S: Scalar>(factor: &S, unit: u64) -> u64 {
    let target = factor.clone() * S::from_count(unit);
    if S::zero() >= target {
        return 0;
    }
    let (mut lo, mut hi) = (0u64, unit + 1);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if S::from_count(mid) >= target {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

/// Parse `"3/8"`, `"0.125"`, `"2"` or `"-1/4"` into a scalar, exactly for
/// rational types.
pub fn parse_scalar<S: Scalar>(text: &str) -> Option<S> {
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let num: i64 = num.trim().parse().ok()?;
        let den: i64 = den.trim().parse().ok()?;
        if den == 0 {
            return None;
        }
        return Some(S::from_ratio(num, den));
    }
    let (neg, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return None;
    }
    if frac_part.len() > 17 {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let num: i64 = if digits.is_empty() {
        0
    } else {
        digits.parse().ok()?
    };
    let den = 10i64.checked_pow(frac_part.len() as u32)?;
    Some(S::from_ratio(if neg { -num } else { num }, den))
}
