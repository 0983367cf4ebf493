//! Numeric scalar abstraction.
//!
//! Analyses are generic over [`Scalar`]. The exact route uses
//! [`BigRational`]; `f64` and `f32` are approximate cross-check routes.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, Signed, ToPrimitive, Zero};

/// A totally ordered field-like number type usable by every analysis.
pub trait Scalar:
    Num + Signed + Clone + PartialOrd + Debug + Display + Send + Sync + 'static
{
    /// `true` when arithmetic is exact, so equality tests are meaningful.
    const EXACT: bool;

    fn from_rational(r: &BigRational) -> Self;

    fn to_f64(&self) -> f64;

    /// Equality for exact types, tolerance `1e-9` (relative) for floats.
    fn approx_eq(&self, other: &Self) -> bool {
        if Self::EXACT {
            self == other
        } else {
            let (a, b) = (self.to_f64(), other.to_f64());
            (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
        }
    }

    fn from_i64(v: i64) -> Self {
        Self::from_rational(&BigRational::from_integer(BigInt::from(v)))
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }

    fn to_f64(&self) -> f64 {
        ratio_to_f64(self)
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_rational(r: &BigRational) -> Self {
        ratio_to_f64(r)
    }

    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for f32 {
    const EXACT: bool = false;

    fn from_rational(r: &BigRational) -> Self {
        ratio_to_f64(r) as f32
    }

    fn to_f64(&self) -> f64 {
        f64::from(*self)
    }

    fn approx_eq(&self, other: &Self) -> bool {
        let (a, b) = (f64::from(*self), f64::from(*other));
        (a - b).abs() <= 1e-5 * (1.0 + a.abs().max(b.abs()))
    }
}

fn ratio_to_f64(r: &BigRational) -> f64 {
    if let (Some(n), Some(d)) = (r.numer().to_f64(), r.denom().to_f64()) {
        if n.is_finite() && d.is_finite() {
            return n / d;
        }
    }
    // Huge operands: shift both down so the quotient survives.
    let shift = r.numer().bits().max(r.denom().bits()).saturating_sub(1000);
    let n = (r.numer() >> shift).to_f64().unwrap_or(f64::NAN);
    let d = (r.denom() >> shift).to_f64().unwrap_or(f64::NAN);
    n / d
}

/// Convenience constructor `n/d` for exact rationals.
pub fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Exact conversion of a finite `f64`; used only by tests and diagnostics.
pub fn rational_from_f64(x: f64) -> Option<BigRational> {
    BigRational::from_f64(x)
}

/// Integer part test for exact rationals.
pub fn is_integral(r: &BigRational) -> bool {
    r.denom().is_one()
}

/// Renders `x` in scientific notation with `digits` digits after the point,
/// correctly rounded (ties away from zero) from the exact value.
pub fn render_scientific(x: &BigRational, digits: usize) -> String {
    if x.is_zero() {
        return format!("{:.*}E0", digits, 0.0);
    }
    let negative = x.is_negative();
    let ax = x.abs();
    let ten = BigInt::from(10);
    // Smallest e with 10^e <= ax < 10^(e+1).
    let mut e: i64 = (ax.numer().to_string().len() as i64) - (ax.denom().to_string().len() as i64);
    loop {
        let p = pow10(&ten, e);
        if ax < p {
            e -= 1;
            continue;
        }
        if ax >= p.clone() * BigRational::from_integer(ten.clone()) {
            e += 1;
            continue;
        }
        break;
    }
    let scale = pow10(&ten, digits as i64 - e);
    let scaled = ax * scale;
    let mut mantissa = round_half_away(&scaled);
    let limit = num_traits::pow(ten.clone(), digits + 1);
    if mantissa >= limit {
        mantissa /= &ten;
        e += 1;
    }
    let s = mantissa.to_string();
    let (head, tail) = s.split_at(1);
    let sign = if negative { "-" } else { "" };
    if digits == 0 {
        format!("{sign}{head}E{e}")
    } else {
        format!("{sign}{head}.{tail}E{e}")
    }
}

fn pow10(ten: &BigInt, e: i64) -> BigRational {
    let p = num_traits::pow(ten.clone(), e.unsigned_abs() as usize);
    if e >= 0 {
        BigRational::from_integer(p)
    } else {
        BigRational::new(BigInt::one(), p)
    }
}

fn round_half_away(x: &BigRational) -> BigInt {
    let floor = x.floor();
    let frac = x - &floor;
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    if frac >= half {
        floor.to_integer() + BigInt::one()
    } else {
        floor.to_integer()
    }
}

/// `n/d` when `d != 1`, otherwise `n`.
pub fn render_exact(x: &BigRational) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}
