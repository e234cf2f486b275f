//! Scalar abstraction for kernel weights.
//!
//! Kernel algebra (sum-zero checks, polynomial coefficients, gradient
//! coefficients, drift evaluation) is written once over [`Scalar`] and
//! instantiated for `f64`, `f32` and exact rationals. The stepping loop and
//! everything transcendental works in `f64`.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

pub trait Scalar:
    Num + Signed + Clone + PartialOrd + Debug + Display + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Whether a kernel coefficient sum counts as zero, given the sum of
    /// absolute weights for scale. Exact for rationals.
    fn sums_to_zero(sum: &Self, scale: &Self) -> bool;

    /// Parses a weight from a literal such as `-1.5` or `3/2`.
    fn parse_weight(s: &str) -> Option<Self>;

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

fn parse_float_or_fraction<T: FromStr + std::ops::Div<Output = T>>(s: &str) -> Option<T> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => Some(n.trim().parse::<T>().ok()? / d.trim().parse::<T>().ok()?),
        None => s.parse().ok(),
    }
}

impl Scalar for f64 {
    fn sums_to_zero(sum: &Self, scale: &Self) -> bool {
        sum.abs() <= 1e-12 * scale.max(1.0)
    }

    fn parse_weight(s: &str) -> Option<Self> {
        parse_float_or_fraction::<f64>(s).filter(|w| w.is_finite())
    }
}

impl Scalar for f32 {
    fn sums_to_zero(sum: &Self, scale: &Self) -> bool {
        sum.abs() <= 8.0 * f32::EPSILON * scale.max(1.0)
    }

    fn parse_weight(s: &str) -> Option<Self> {
        parse_float_or_fraction::<f32>(s).filter(|w| w.is_finite())
    }
}

impl Scalar for Rational64 {
    fn sums_to_zero(sum: &Self, _scale: &Self) -> bool {
        num_traits::Zero::is_zero(sum)
    }

    fn parse_weight(s: &str) -> Option<Self> {
        let s = s.trim();
        if let Ok(r) = s.parse::<Rational64>() {
            return Some(r);
        }
        // Decimal literals such as "-1.25" are exact in base 10.
        let (neg, digits) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        let (int, frac) = digits.split_once('.')?;
        if frac.len() > 15 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let den = 10i64.checked_pow(frac.len() as u32)?;
        let int: i64 = if int.is_empty() { 0 } else { int.parse().ok()? };
        let frac: i64 = if frac.is_empty() { 0 } else { frac.parse().ok()? };
        let num = int.checked_mul(den)?.checked_add(frac)?;
        let r = Rational64::new(num, den);
        Some(if neg { -r } else { r })
    }
}
