//! Exact integer and rational arithmetic.
//!
//! Every score, weight, threshold and bound in the crate is an [`Int`] or a
//! [`Rat`]. Rationals are kept in lowest terms with a positive denominator
//! (the `num-rational` normal form) and are written as `"P/Q"` strings.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

pub type Int = BigInt;
pub type Rat = BigRational;

pub fn int(v: i64) -> Int {
    Int::from(v)
}

pub fn rat(p: i64, q: i64) -> Rat {
    Rat::new(Int::from(p), Int::from(q))
}

pub fn rat_from_int(v: Int) -> Rat {
    Rat::from_integer(v)
}

/// `2^e` as an exact integer.
pub fn pow2(e: u64) -> Int {
    Int::one() << e
}

/// `base^e` for any integer exponent; `base` must be nonzero when `e < 0`.
pub fn rat_pow(base: &Rat, e: i64) -> Rat {
    let mag = u32::try_from(e.unsigned_abs()).expect("exponent fits in u32");
    let num = base.numer().pow(mag);
    let den = base.denom().pow(mag);
    // powers of coprime integers stay coprime
    let r = Rat::new_raw(num, den);
    if e >= 0 {
        r
    } else {
        Rat::new(r.denom().clone(), r.numer().clone())
    }
}

/// Binomial coefficient `C(n, k)` by the multiplicative formula.
pub fn binomial(n: u64, k: u64) -> Int {
    if k > n {
        return Int::zero();
    }
    let k = k.min(n - k);
    let mut acc = Int::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// `sum_{l=lo}^{hi} C(n, l)`, empty when `lo > hi`.
pub fn binomial_sum(n: u64, lo: u64, hi: u64) -> Int {
    (lo..=hi).map(|l| binomial(n, l)).sum()
}

/// Smallest integer `e` with `alpha^e >= x`, by exact repeated squaring.
pub fn ceil_log(alpha: &Rat, x: &Rat) -> Result<i64> {
    if *alpha <= Rat::one() {
        return Err(Error::InvalidParameter(format!(
            "ceil_log base must exceed 1, got {}",
            fmt_rat(alpha)
        )));
    }
    if !x.is_positive() {
        return Err(Error::InvalidParameter(format!(
            "ceil_log argument must be positive, got {}",
            fmt_rat(x)
        )));
    }
    if *x > Rat::one() {
        return Ok(ceil_log_above_one(alpha, x));
    }
    // x <= 1: smallest e <= 0 with alpha^e >= x, i.e. the largest f with
    // alpha^f <= 1/x, negated.
    let inv = x.recip();
    if inv.is_one() {
        return Ok(0);
    }
    let up = ceil_log_above_one(alpha, &inv);
    let f = if rat_pow(alpha, up) == inv { up } else { up - 1 };
    Ok(-f)
}

fn ceil_log_above_one(alpha: &Rat, x: &Rat) -> i64 {
    // squares[k] = alpha^(2^k), grown until it reaches x
    let mut squares = vec![alpha.clone()];
    while squares.last().unwrap() < x {
        let s = squares.last().unwrap();
        let next = s * s;
        squares.push(next);
    }
    let mut acc = Rat::one();
    let mut e: i64 = 0;
    for k in (0..squares.len() - 1).rev() {
        let cand = &acc * &squares[k];
        if cand < *x {
            acc = cand;
            e += 1 << k;
        }
    }
    e + 1
}

/// Writes a rational as `P/Q`, always with an explicit denominator.
pub fn fmt_rat(r: &Rat) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parses `P/Q` or a bare integer `P`.
pub fn parse_rat(s: &str) -> Result<Rat> {
    let s = s.trim();
    let bad = || Error::InvalidParameter(format!("not a rational: {s:?}"));
    match s.split_once('/') {
        Some((p, q)) => {
            let p: Int = p.trim().parse().map_err(|_| bad())?;
            let q: Int = q.trim().parse().map_err(|_| bad())?;
            if q.is_zero() {
                return Err(bad());
            }
            Ok(Rat::new(p, q))
        }
        None => Ok(Rat::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

/// `numer/denom` compared against `r` without normalising; `denom > 0`.
pub fn cmp_fraction(numer: &Int, denom: &Int, r: &Rat) -> Ordering {
    (numer * r.denom()).cmp(&(r.numer() * denom))
}

/// Ceiling of a rational as an integer.
pub fn ceil_rat(r: &Rat) -> Int {
    r.numer().div_ceil(r.denom())
}

/// Serde adapter writing a [`Rat`] as a `"P/Q"` string.
pub mod serde_rat {
    use super::{fmt_rat, parse_rat, Rat};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rat, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_rat(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rat, D::Error> {
        let s = String::deserialize(d)?;
        parse_rat(&s).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter writing an [`Int`](super::Int) as a decimal string.
pub mod serde_int {
    use super::Int;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Int, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Int, D::Error> {
        let s = String::deserialize(d)?;
        s.trim().parse().map_err(serde::de::Error::custom)
    }
}
