//! Primitive attribute values.
//!
//! Numbers are exact rationals. Decimal literals such as `0.3` are read as
//! `3/10`, and floats are converted without rounding, so comparisons and
//! relative frequencies never pick up binary floating point error.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Number = BigRational;

/// The two primitive classes every value belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PrimitiveClass {
    Number,
    String,
}

impl fmt::Display for PrimitiveClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PrimitiveClass::Number => "number",
            PrimitiveClass::String => "string",
        })
    }
}

/// A primitive attribute value. Numbers order before strings.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Number(Number),
    Str(String),
}

impl Value {
    pub fn int(n: i64) -> Self {
        Value::Number(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn ratio(n: i64, d: i64) -> Self {
        Value::Number(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn str(s: impl Into<String>) -> Self {
        Value::Str(s.into())
    }

    /// Exact conversion; `None` for NaN and infinities.
    pub fn from_f64(x: f64) -> Option<Self> {
        BigRational::from_float(x).map(Value::Number)
    }

    pub fn class(&self) -> PrimitiveClass {
        match self {
            Value::Number(_) => PrimitiveClass::Number,
            Value::Str(_) => PrimitiveClass::String,
        }
    }

    pub fn as_number(&self) -> Option<&Number> {
        match self {
            Value::Number(n) => Some(n),
            Value::Str(_) => None,
        }
    }

    /// Ordering between values of the same primitive class; `None` across classes.
    pub fn compare(&self, other: &Value) -> Option<Ordering> {
        match (self, other) {
            (Value::Number(a), Value::Number(b)) => Some(a.cmp(b)),
            (Value::Str(a), Value::Str(b)) => Some(a.cmp(b)),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Number(n) => f.write_str(&format_number(n)),
            Value::Str(s) => write_quoted(f, s),
        }
    }
}

fn write_quoted(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("\"")?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("\"")
}

/// Canonical text for a rational: integers as `42`, terminating fractions as
/// decimals (`0.375`), everything else as `p/q`.
pub fn format_number(n: &Number) -> String {
    if n.is_integer() {
        return n.numer().to_string();
    }
    let mut den = n.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let (mut twos, mut fives) = (0u32, 0u32);
    while den.is_even() {
        den /= &two;
        twos += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        fives += 1;
    }
    if !den.is_one() {
        return format!("{}/{}", n.numer(), n.denom());
    }
    let digits = twos.max(fives);
    let scale = num_traits::pow(BigInt::from(10), digits as usize);
    let scaled = (n * BigRational::from_integer(scale)).to_integer();
    let neg = scaled.is_negative();
    let mut s = scaled.abs().to_string();
    while s.len() <= digits as usize {
        s.insert(0, '0');
    }
    let point = s.len() - digits as usize;
    s.insert(point, '.');
    if neg {
        s.insert(0, '-');
    }
    s
}

/// Parses the literal forms produced by [`format_number`]: `-12`, `3.25`, `1/3`.
pub fn parse_number(text: &str) -> Option<Number> {
    let (neg, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    if body.is_empty() {
        return None;
    }
    let value = if let Some((n, d)) = body.split_once('/') {
        let n: BigInt = digits(n)?;
        let d: BigInt = digits(d)?;
        if d.is_zero() {
            return None;
        }
        BigRational::new(n, d)
    } else if let Some((i, frac)) = body.split_once('.') {
        let whole: BigInt = digits(i)?;
        let f: BigInt = digits(frac)?;
        let scale = num_traits::pow(BigInt::from(10), frac.len());
        BigRational::new(whole * &scale + f, scale)
    } else {
        BigRational::from_integer(digits(body)?)
    };
    Some(if neg { -value } else { value })
}

fn digits(s: &str) -> Option<BigInt> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

pub fn number_to_f64(n: &Number) -> f64 {
    n.to_f64().unwrap_or(f64::NAN)
}
