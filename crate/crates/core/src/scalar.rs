//! Exact scalar abstraction.
//!
//! Every position, time and border estimate in the simulator is an exact
//! fraction. The core is written against [`Scalar`], which is implemented for
//! `num_rational::Ratio<I>` over any signed integer type. Floating point types
//! deliberately do not implement it: event ordering and the sharp bound checks
//! need exact comparisons.

use std::fmt::{Debug, Display};
use std::hash::Hash;
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseRationalError {
    #[error("empty rational literal")]
    Empty,
    #[error("malformed rational literal {0:?}")]
    Malformed(String),
    #[error("zero denominator in {0:?}")]
    ZeroDenominator(String),
    #[error("literal {0:?} does not fit the scalar type")]
    Overflow(String),
}

/// An exact ordered field element.
pub trait Scalar:
    Clone + Debug + Display + Ord + Hash + Num + Signed + Send + Sync + 'static
{
    fn from_int(v: i64) -> Self;

    /// Converts a drone count. Counts are small compared to the integer
    /// range of any supported scalar, so this never fails for `u64` inputs
    /// below `i64::MAX`.
    fn from_count(count: u64) -> Self;

    fn ratio(numer: i64, denom: i64) -> Self {
        Self::from_int(numer) / Self::from_int(denom)
    }

    /// Canonical `"p/q"` form with `q > 0` and `gcd(p, q) = 1`.
    fn to_exact_string(&self) -> String;

    /// Parses `"p/q"`, an integer, or a finite decimal such as `"13.94"`.
    fn parse_exact(s: &str) -> Result<Self, ParseRationalError>;

    /// Lossy conversion for display and rendering only.
    fn approx_f64(&self) -> f64;

    /// Smallest integer not below `self`.
    fn ceil_to_i64(&self) -> Option<i64>;
}

impl<I> Scalar for Ratio<I>
where
    I: Integer
        + Signed
        + Clone
        + Hash
        + Debug
        + Display
        + FromPrimitive
        + ToPrimitive
        + FromStr
        + Send
        + Sync
        + 'static,
{
    fn from_int(v: i64) -> Self {
        Ratio::from_integer(I::from_i64(v).expect("i64 fits every supported integer type"))
    }

    fn from_count(count: u64) -> Self {
        Ratio::from_integer(I::from_u64(count).expect("count fits the scalar integer type"))
    }

    fn to_exact_string(&self) -> String {
        format!("{}/{}", self.numer(), self.denom())
    }

    fn parse_exact(s: &str) -> Result<Self, ParseRationalError> {
        let s = s.trim();
        if s.is_empty() {
            return Err(ParseRationalError::Empty);
        }
        let malformed = || ParseRationalError::Malformed(s.to_string());
        let int = |t: &str| -> Result<I, ParseRationalError> {
            let digits = t.strip_prefix('+').unwrap_or(t);
            let body = digits.strip_prefix('-').unwrap_or(digits);
            if body.is_empty() || !body.bytes().all(|b| b.is_ascii_digit()) {
                return Err(malformed());
            }
            digits
                .parse::<I>()
                .map_err(|_| ParseRationalError::Overflow(s.to_string()))
        };

        if let Some((p, q)) = s.split_once('/') {
            let p = int(p.trim())?;
            let q = int(q.trim())?;
            if q.is_zero() {
                return Err(ParseRationalError::ZeroDenominator(s.to_string()));
            }
            return Ok(Ratio::new(p, q));
        }

        if let Some((whole, frac)) = s.split_once('.') {
            if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(malformed());
            }
            let negative = whole.trim_start().starts_with('-');
            let whole = match whole {
                "" | "-" | "+" => I::zero(),
                w => int(w)?,
            };
            let frac_value = int(frac)?;
            let ten = I::from_u8(10).expect("10 fits");
            let mut scale = I::one();
            for _ in 0..frac.len() {
                scale = scale * ten.clone();
            }
            let frac_part = Ratio::new(frac_value, scale);
            let whole = Ratio::from_integer(whole);
            return Ok(if negative { whole - frac_part } else { whole + frac_part });
        }

        Ok(Ratio::from_integer(int(s)?))
    }

    fn approx_f64(&self) -> f64 {
        let n = self.numer().to_f64().unwrap_or(f64::NAN);
        let d = self.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    }

    fn ceil_to_i64(&self) -> Option<i64> {
        self.ceil().to_integer().to_i64()
    }
}

/// Sign of `v` as `-1`, `0` or `1`.
pub fn sign<T: Scalar>(v: &T) -> i8 {
    if v.is_positive() {
        1
    } else if v.is_negative() {
        -1
    } else {
        0
    }
}
