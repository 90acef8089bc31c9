//! Exact rational arithmetic helpers. All clock values are `BigRational`;
//! no floating point is used anywhere.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Q = BigRational;

/// Rational from an integer.
pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// Rational `n/d`.
pub fn qr(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Floor as a `BigInt` (towards minus infinity).
pub fn floor_big(q: &Q) -> BigInt {
    q.floor().to_integer()
}

/// Floor as `i64`; panics on overflow (desk-scale values only).
pub fn floor_i64(q: &Q) -> i64 {
    let b = floor_big(q);
    i64::try_from(&b).expect("floor fits in i64")
}

/// Fractional part, in `[0, 1)`.
pub fn fract(q: &Q) -> Q {
    q - Q::from_integer(floor_big(q))
}

pub fn is_integer(q: &Q) -> bool {
    q.denom().is_one()
}

pub fn is_nonneg(q: &Q) -> bool {
    !q.is_negative()
}

pub fn zero() -> Q {
    Q::zero()
}

pub fn one() -> Q {
    Q::one()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floor_and_fract_views() {
        let v = qr(23, 10); // 2.3
        assert_eq!(floor_i64(&v), 2);
        assert_eq!(fract(&v), qr(3, 10));
        let w = qr(-1, 2);
        assert_eq!(floor_i64(&w), -1);
        assert_eq!(fract(&w), qr(1, 2));
    }

    #[test]
    fn value_splits_into_floor_plus_fract() {
        for n in -20..20 {
            for d in 1..6 {
                let v = qr(n, d);
                let back = Q::from_integer(floor_big(&v)) + fract(&v);
                assert_eq!(back, v);
                assert!(is_nonneg(&fract(&v)));
                assert!(fract(&v) < one());
            }
        }
    }
}
