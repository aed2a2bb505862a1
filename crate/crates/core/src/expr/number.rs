//! Numeric constants: exact rationals with a floating-point fallback.

use std::cmp::Ordering;
use std::fmt;

use num_integer::Roots;
use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedMul, Signed, ToPrimitive, Zero};

pub type Rational = Ratio<i64>;

/// A constant appearing in an expression.
///
/// Arithmetic stays exact while both operands are rational and no overflow
/// occurs; anything else degrades to `f64`.
#[derive(Clone, Copy, Debug)]
pub enum Number {
    Rational(Rational),
    Float(f64),
}

impl Number {
    pub const ZERO: Number = Number::Rational(Ratio::new_raw(0, 1));
    pub const ONE: Number = Number::Rational(Ratio::new_raw(1, 1));

    pub fn int(n: i64) -> Self {
        Number::Rational(Rational::from_integer(n))
    }

    /// Panics if `den == 0`.
    pub fn ratio(num: i64, den: i64) -> Self {
        Number::Rational(Rational::new(num, den))
    }

    pub fn to_f64(self) -> f64 {
        match self {
            Number::Rational(r) => *r.numer() as f64 / *r.denom() as f64,
            Number::Float(f) => f,
        }
    }

    pub fn is_zero(self) -> bool {
        match self {
            Number::Rational(r) => r.is_zero(),
            Number::Float(f) => f == 0.0,
        }
    }

    pub fn is_one(self) -> bool {
        match self {
            Number::Rational(r) => *r.numer() == 1 && *r.denom() == 1,
            Number::Float(f) => f == 1.0,
        }
    }

    pub fn is_exact(self) -> bool {
        matches!(self, Number::Rational(_))
    }

    pub fn is_negative(self) -> bool {
        match self {
            Number::Rational(r) => r.is_negative(),
            Number::Float(f) => f < 0.0,
        }
    }

    pub fn add(self, other: Number) -> Number {
        match (self, other) {
            (Number::Rational(a), Number::Rational(b)) => match a.checked_add(&b) {
                Some(r) => Number::Rational(r),
                None => Number::Float(self.to_f64() + other.to_f64()),
            },
            _ => Number::Float(self.to_f64() + other.to_f64()),
        }
    }

    pub fn mul(self, other: Number) -> Number {
        match (self, other) {
            (Number::Rational(a), Number::Rational(b)) => match a.checked_mul(&b) {
                Some(r) => Number::Rational(r),
                None => Number::Float(self.to_f64() * other.to_f64()),
            },
            _ => Number::Float(self.to_f64() * other.to_f64()),
        }
    }

    pub fn neg(self) -> Number {
        match self {
            Number::Rational(r) => match r.numer().checked_neg() {
                Some(n) => Number::Rational(Ratio::new_raw(n, *r.denom())),
                None => Number::Float(-self.to_f64()),
            },
            Number::Float(f) => Number::Float(-f),
        }
    }

    /// `None` for an exact zero.
    pub fn recip(self) -> Option<Number> {
        match self {
            Number::Rational(r) if r.is_zero() => None,
            Number::Rational(r) => Some(Number::Rational(r.recip())),
            Number::Float(f) => Some(Number::Float(1.0 / f)),
        }
    }

    /// Integer power; `None` when the result is undefined (0 to a negative power).
    pub fn powi(self, n: i64) -> Option<Number> {
        if n == 0 {
            return Some(Number::ONE);
        }
        let base = if n < 0 { self.recip()? } else { self };
        let mut exp = n.unsigned_abs();
        match base {
            Number::Rational(r) => {
                let mut acc = Rational::from_integer(1);
                let mut sq = r;
                let mut ok = true;
                while exp > 0 && ok {
                    if exp & 1 == 1 {
                        match acc.checked_mul(&sq) {
                            Some(v) => acc = v,
                            None => ok = false,
                        }
                    }
                    exp >>= 1;
                    if exp > 0 && ok {
                        match sq.checked_mul(&sq) {
                            Some(v) => sq = v,
                            None => ok = false,
                        }
                    }
                }
                if ok {
                    Some(Number::Rational(acc))
                } else {
                    Some(Number::Float(base.to_f64().powi(n.unsigned_abs() as i32)))
                }
            }
            Number::Float(f) => Some(Number::Float(f.powi(exp as i32))),
        }
    }

    /// Exact square root of a non-negative rational whose numerator and
    /// denominator are perfect squares.
    pub fn exact_sqrt(self) -> Option<Number> {
        match self {
            Number::Rational(r) if !r.is_negative() => {
                let n = r.numer().sqrt();
                let d = r.denom().sqrt();
                (n * n == *r.numer() && d * d == *r.denom()).then(|| Number::ratio(n, d))
            }
            _ => None,
        }
    }

    pub fn as_integer(self) -> Option<i64> {
        match self {
            Number::Rational(r) if r.is_integer() => r.to_integer().to_i64(),
            _ => None,
        }
    }

    /// Converts a finite float to an exact rational when it is a short decimal.
    pub fn from_decimal(mantissa: &str, exponent: i32) -> Number {
        let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
        let digits = format!("{int_part}{frac_part}");
        let scale = exponent - frac_part.len() as i32;
        let exact = digits.parse::<i64>().ok().and_then(|n| {
            let pow = 10i64.checked_pow(scale.unsigned_abs())?;
            if scale >= 0 {
                n.checked_mul(pow).map(Number::int)
            } else {
                Some(Number::ratio(n, pow))
            }
        });
        exact.unwrap_or_else(|| {
            let text = format!("{mantissa}e{exponent}");
            Number::Float(text.parse().unwrap_or(f64::NAN))
        })
    }
}

impl PartialEq for Number {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Number {}

impl PartialOrd for Number {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Canonical order used for sorting expression children: rationals before
/// floats, then by value.
impl Ord for Number {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Number::Rational(a), Number::Rational(b)) => a.cmp(b),
            (Number::Rational(_), Number::Float(_)) => Ordering::Less,
            (Number::Float(_), Number::Rational(_)) => Ordering::Greater,
            (Number::Float(a), Number::Float(b)) => a.total_cmp(b),
        }
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Number::Rational(r) if r.is_integer() => write!(f, "{}", r.numer()),
            Number::Rational(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Number::Float(x) => write!(f, "{x:?}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_literals_are_exact() {
        assert_eq!(Number::from_decimal("0.5", 0), Number::ratio(1, 2));
        assert_eq!(Number::from_decimal("1", -3), Number::ratio(1, 1000));
        assert_eq!(Number::from_decimal("2.5", 2), Number::int(250));
    }

    #[test]
    fn overflow_degrades_to_float() {
        let big = Number::int(i64::MAX / 2);
        let p = big.mul(Number::int(4));
        assert!(!p.is_exact());
        assert!((p.to_f64() - (i64::MAX / 2) as f64 * 4.0).abs() < 1e6);
    }

    #[test]
    fn powers() {
        assert_eq!(Number::ratio(2, 3).powi(-2), Some(Number::ratio(9, 4)));
        assert_eq!(Number::ZERO.powi(-1), None);
        assert_eq!(Number::ratio(9, 4).exact_sqrt(), Some(Number::ratio(3, 2)));
        assert_eq!(Number::int(2).exact_sqrt(), None);
    }
}
