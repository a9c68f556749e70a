//! Numeric backends.
//!
//! Every algorithm in the crate is generic over [`Scalar`]. Two backends are
//! provided: exact [`BigRational`] arithmetic for fixtures and certification
//! runs, and `f64` for large sweeps where a tolerance is acceptable.

use std::cmp::Ordering;
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};
use serde_json::Value;
use thiserror::Error;

pub use num_rational::BigRational as Rational;

/// Arithmetic backend used throughout the solver.
pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Zero
    + One
{
    /// True when arithmetic is exact.
    const EXACT: bool;
    /// Name used in run metadata.
    const NAME: &'static str;

    fn from_int(n: i64) -> Self;

    fn ratio(num: i64, den: i64) -> Self {
        Self::from_int(num) / Self::from_int(den)
    }

    fn from_literal(lit: &Literal) -> Self;

    /// Lossless for rationals (the exact binary value of `x`).
    fn from_f64(x: f64) -> Self;

    fn to_f64(&self) -> f64;

    fn abs(&self) -> Self;

    /// JSON rendering that parses back to the same value.
    fn to_json(&self) -> Value;

    /// `|self - other| <= tol`.
    fn approx_eq(&self, other: &Self, tol: f64) -> bool;

    fn half() -> Self {
        Self::ratio(1, 2)
    }

    fn is_negative(&self) -> bool {
        *self < Self::zero()
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    /// Total order for sorting; incomparable values (NaN) sort as equal.
    fn total_cmp(&self, other: &Self) -> Ordering {
        self.partial_cmp(other).unwrap_or(Ordering::Equal)
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;
    const NAME: &'static str = "float";

    fn from_int(n: i64) -> Self {
        n as f64
    }

    fn ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn from_literal(lit: &Literal) -> Self {
        match lit {
            // the literal grammar is a subset of Rust's float syntax
            Literal::Decimal(text) => text.parse().expect("validated decimal literal"),
            Literal::Fraction { num, den } => match (num.to_i64(), den.to_i64()) {
                (Some(n), Some(d)) if n.unsigned_abs() < (1 << 53) && d < (1 << 53) => {
                    n as f64 / d as f64
                }
                _ => ToPrimitive::to_f64(&BigRational::new(num.clone(), den.clone()))
                    .unwrap_or(f64::NAN),
            },
        }
    }

    fn from_f64(x: f64) -> Self {
        x
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn abs(&self) -> Self {
        f64::abs(*self)
    }

    fn to_json(&self) -> Value {
        serde_json::Number::from_f64(*self)
            .map(Value::Number)
            .unwrap_or(Value::Null)
    }

    fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        (self - other).abs() <= tol
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;
    const NAME: &'static str = "rational";

    fn from_int(n: i64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }

    fn ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn from_literal(lit: &Literal) -> Self {
        lit.to_rational()
    }

    fn from_f64(x: f64) -> Self {
        <BigRational as FromPrimitive>::from_f64(x).expect("finite float")
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn abs(&self) -> Self {
        Signed::abs(self)
    }

    fn to_json(&self) -> Value {
        if self.is_integer() {
            if let Some(n) = self.numer().to_i64() {
                return Value::from(n);
            }
            return Value::String(self.numer().to_string());
        }
        Value::String(format!("{}/{}", self.numer(), self.denom()))
    }

    fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        let diff = Signed::abs(&(self - other));
        if tol <= 0.0 {
            return diff.is_zero();
        }
        diff <= <BigRational as Scalar>::from_f64(tol)
    }
}

/// Human-readable rendering: `5/6` for rationals, shortest round-trip
/// decimal for floats.
pub fn render<S: Scalar>(x: &S) -> String {
    match x.to_json() {
        Value::String(s) => s,
        other => other.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid numeric literal `{0}` (expected a decimal like 0.25 or a fraction like 2/3)")]
pub struct LiteralError(pub String);

/// A number as written in an input document, kept verbatim so that the
/// exact backend sees `0.1` as 1/10 rather than its binary approximation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Literal {
    Decimal(String),
    Fraction { num: BigInt, den: BigInt },
}

impl Literal {
    pub fn to_rational(&self) -> BigRational {
        match self {
            Literal::Fraction { num, den } => BigRational::new(num.clone(), den.clone()),
            Literal::Decimal(text) => parse_decimal(text).expect("validated decimal literal"),
        }
    }
}

impl FromStr for Literal {
    type Err = LiteralError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some((num, den)) = s.split_once('/') {
            let num: BigInt = parse_integer(num.trim()).ok_or_else(|| LiteralError(s.into()))?;
            let den: BigInt = parse_integer(den.trim()).ok_or_else(|| LiteralError(s.into()))?;
            if den.is_zero() || den.is_negative() {
                return Err(LiteralError(s.into()));
            }
            return Ok(Literal::Fraction { num, den });
        }
        parse_decimal(s).ok_or_else(|| LiteralError(s.into()))?;
        Ok(Literal::Decimal(s.to_string()))
    }
}

fn parse_integer(s: &str) -> Option<BigInt> {
    let digits = s
        .strip_prefix('-')
        .or_else(|| s.strip_prefix('+'))
        .unwrap_or(s);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.trim_start_matches('+').parse().ok()
}

/// Exact value of a decimal literal `[-+]?digits[.digits][(e|E)[-+]?digits]`.
fn parse_decimal(s: &str) -> Option<BigRational> {
    let (negative, body) = match s.as_bytes().first()? {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(pos) => (&body[..pos], body[pos + 1..].parse::<i32>().ok()?),
        None => (body, 0),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part
        .bytes()
        .chain(frac_part.bytes())
        .all(|b| b.is_ascii_digit())
    {
        return None;
    }
    let digits: BigInt = format!("{int_part}{frac_part}").parse().ok()?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10u8);
    let mut value = BigRational::from_integer(digits);
    if scale >= 0 {
        value *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        value /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if negative { -value } else { value })
}
