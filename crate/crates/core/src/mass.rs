//! Probability masses in the two arithmetic modes.
//!
//! Exact laws carry [`BigRational`] masses and never lose mass; float laws
//! carry `f64`. The dynamic programs and the convolution engine are generic
//! over [`Mass`], so the same code path serves the oracle comparisons and the
//! large-horizon numerics.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::steps::StepLaw;

/// Float masses below this are dropped by the convolution engine.
pub const FLOAT_PRUNE: f64 = 1e-16;

pub trait Mass: Clone + Debug + Send + Sync + 'static {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    /// `self += weight * src`
    fn add_scaled(&mut self, weight: &Self, src: &Self);
    /// `dst[i] += weight * src[i]`
    fn axpy(dst: &mut [Self], weight: &Self, src: &[Self]) {
        for (d, s) in dst.iter_mut().zip(src) {
            if !s.is_zero() {
                d.add_scaled(weight, s);
            }
        }
    }
    fn add(&mut self, other: &Self);
    fn sub(&mut self, other: &Self);
    fn to_f64(&self) -> f64;
    /// Whether the engine may drop this entry. Exact masses are only
    /// dropped when they are exactly zero.
    fn negligible(&self) -> bool;
    /// Masses of `law` in this arithmetic, in atom order.
    fn law_masses(law: &StepLaw) -> Result<Vec<Self>>;
}

impl Mass for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    #[inline]
    fn add_scaled(&mut self, weight: &Self, src: &Self) {
        *self += weight * src;
    }
    #[inline]
    fn axpy(dst: &mut [Self], weight: &Self, src: &[Self]) {
        for (d, s) in dst.iter_mut().zip(src) {
            *d += weight * s;
        }
    }
    fn add(&mut self, other: &Self) {
        *self += other;
    }
    fn sub(&mut self, other: &Self) {
        *self -= other;
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn negligible(&self) -> bool {
        self.abs() < FLOAT_PRUNE
    }
    fn law_masses(law: &StepLaw) -> Result<Vec<Self>> {
        Ok(law.float_masses())
    }
}

impl Mass for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn add_scaled(&mut self, weight: &Self, src: &Self) {
        *self += weight * src;
    }
    fn add(&mut self, other: &Self) {
        *self += other;
    }
    fn sub(&mut self, other: &Self) {
        *self -= other;
    }
    fn to_f64(&self) -> f64 {
        rational_to_f64(self)
    }
    fn negligible(&self) -> bool {
        Zero::is_zero(self)
    }
    fn law_masses(law: &StepLaw) -> Result<Vec<Self>> {
        law.exact_masses().map(<[_]>::to_vec).ok_or(Error::FloatLawRejected)
    }
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    if let Some(v) = ToPrimitive::to_f64(r) {
        if v.is_finite() {
            return v;
        }
    }
    // Huge numerator and denominator: scale both down before dividing.
    let shift = r.numer().bits().max(r.denom().bits()).saturating_sub(1000);
    let n = (r.numer() >> shift).to_f64().unwrap_or(f64::NAN);
    let d = (r.denom() >> shift).to_f64().unwrap_or(f64::NAN);
    n / d
}

/// Parses `"a/b"`, an integer, or a decimal such as `"0.7"` or `"2.5e-3"`
/// into an exact rational.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let s = text.trim();
    let bad = || Error::BadParam(format!("cannot parse `{text}` as a rational"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let all: BigInt = format!("0{int_part}{frac_part}").parse().map_err(|_| bad())?;
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    let mut value = if scale >= 0 {
        BigRational::from_integer(all * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(all, num_traits::pow(ten, (-scale) as usize))
    };
    if neg {
        value = -value;
    }
    Ok(value)
}

/// The exact rational denoted by the shortest decimal rendering of `x`, so
/// that `0.7` becomes `7/10` rather than its binary expansion.
pub fn rational_from_f64(x: f64) -> Result<BigRational> {
    if !x.is_finite() {
        return Err(Error::BadParam(format!("non-finite value {x}")));
    }
    parse_rational(&format!("{x:e}"))
}

/// Renders as `"a/b"`, always with an explicit denominator.
pub fn format_rational(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn is_probability(r: &BigRational) -> bool {
    !r.is_negative() && *r <= <BigRational as One>::one()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse_rational("1/3").unwrap(), q(1, 3));
        assert_eq!(parse_rational(" -2/4 ").unwrap(), q(-1, 2));
        assert_eq!(parse_rational("0.7").unwrap(), q(7, 10));
        assert_eq!(parse_rational("7e-1").unwrap(), q(7, 10));
        assert_eq!(parse_rational("2.5E2").unwrap(), q(250, 1));
        assert_eq!(parse_rational(".25").unwrap(), q(1, 4));
        assert_eq!(parse_rational("3").unwrap(), q(3, 1));
        for bad in ["", "a/b", "1/0", "1.2.3", "e5", "0x10"] {
            assert!(parse_rational(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn shortest_decimal_round_trip() {
        assert_eq!(rational_from_f64(0.7).unwrap(), q(7, 10));
        assert_eq!(rational_from_f64(0.1).unwrap(), q(1, 10));
        assert_eq!(rational_from_f64(-1.5).unwrap(), q(-3, 2));
        assert!(rational_from_f64(f64::NAN).is_err());
    }

    #[test]
    fn huge_rationals_convert() {
        let big = num_traits::pow(BigInt::from(6u32), 2000);
        let r = BigRational::new(big.clone() * 2, big * 3);
        assert!((rational_to_f64(&r) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(format_rational(&q(3, 1)), "3/1");
    }
}
