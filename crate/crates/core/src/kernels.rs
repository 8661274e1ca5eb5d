//! Boolean conjunction kernels and the explicit feature expansion they stand
//! in for.
//!
//! Each kernel counts the conjunctions of its class that are true in both
//! arguments, the empty conjunction included:
//!
//! | kind                         | `K(x, y)`                          |
//! |------------------------------|------------------------------------|
//! | all conjunctions             | `2^same(x,y)`                      |
//! | monotone conjunctions        | `2^|x ∩ y|`                        |
//! | conjunctions of size `<= k`  | `sum_{l<=k} C(same(x,y), l)`       |
//! | monotone, size `<= k`        | `sum_{l<=k} C(|x ∩ y|, l)`         |
//!
//! [`FeatureSpace`] enumerates the same conjunctions explicitly, in a fixed
//! order, so small cases can be checked against a plain dot product.
//! Monotone monomials are ordered by size, then lexicographically by their
//! sorted variable indices. Signed conjunctions are ordered by a base-3
//! counter whose digit for `x_i` is 0 (absent), 1 (positive) or 2 (negated),
//! with `x_1` the least significant digit.

use std::fmt;
use std::str::FromStr;

use num_traits::Zero;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bits::BitVec;
use crate::error::{Error, Result};
use crate::exact::{binomial_sum, pow2, Int};

/// Largest `n` for which monotone spaces are expanded explicitly.
pub const MONOTONE_EXPAND_LIMIT: usize = 20;
/// Largest `n` for which signed spaces are expanded explicitly.
pub const SIGNED_EXPAND_LIMIT: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    AllConjunctions,
    MonotoneConjunctions,
    BoundedConjunctions(usize),
    BoundedMonotoneConjunctions(usize),
}

impl KernelKind {
    pub fn is_monotone(self) -> bool {
        matches!(
            self,
            KernelKind::MonotoneConjunctions | KernelKind::BoundedMonotoneConjunctions(_)
        )
    }

    /// Size cap on conjunctions, if any.
    pub fn bound(self) -> Option<usize> {
        match self {
            KernelKind::BoundedConjunctions(k) | KernelKind::BoundedMonotoneConjunctions(k) => {
                Some(k)
            }
            _ => None,
        }
    }

    /// Builds a kind from a CLI-style name plus optional size cap.
    pub fn from_parts(name: &str, k: Option<usize>) -> Result<Self> {
        let need_k = || {
            k.ok_or_else(|| Error::InvalidParameter(format!("kernel kind {name} needs --k")))
        };
        match name {
            "all" => Ok(KernelKind::AllConjunctions),
            "monotone" => Ok(KernelKind::MonotoneConjunctions),
            "bounded" => Ok(KernelKind::BoundedConjunctions(need_k()?)),
            "bounded-monotone" => Ok(KernelKind::BoundedMonotoneConjunctions(need_k()?)),
            _ => Err(Error::InvalidParameter(format!("unknown kernel kind {name:?}"))),
        }
    }

    fn check(self, n: usize) -> Result<()> {
        match self.bound() {
            Some(k) if k > n => Err(Error::InvalidParameter(format!(
                "conjunction size bound k={k} exceeds n={n}"
            ))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelKind::AllConjunctions => f.write_str("all"),
            KernelKind::MonotoneConjunctions => f.write_str("monotone"),
            KernelKind::BoundedConjunctions(k) => write!(f, "bounded:{k}"),
            KernelKind::BoundedMonotoneConjunctions(k) => write!(f, "bounded-monotone:{k}"),
        }
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    /// Accepts `all`, `monotone`, `bounded:K`, `bounded-monotone:K`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some((name, k)) => {
                let k = k
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("bad size bound in {s:?}")))?;
                Self::from_parts(name, Some(k))
            }
            None => Self::from_parts(s, None),
        }
    }
}

impl Serialize for KernelKind {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for KernelKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Number of conjunctions of `kind` true in both `x` and `y`.
pub fn kernel(kind: KernelKind, x: &BitVec, y: &BitVec) -> Result<Int> {
    Error::check_len(x.len(), y.len())?;
    kind.check(x.len())?;
    Ok(match kind {
        KernelKind::AllConjunctions => pow2(x.same(y)? as u64),
        KernelKind::MonotoneConjunctions => pow2(x.intersect_count(y)? as u64),
        KernelKind::BoundedConjunctions(k) => binomial_sum(x.same(y)? as u64, 0, k as u64),
        KernelKind::BoundedMonotoneConjunctions(k) => {
            binomial_sum(x.intersect_count(y)? as u64, 0, k as u64)
        }
    })
}

/// A conjunction over at most 32 variables: `pos` literals must be 1, `neg`
/// literals must be 0. Bit `i - 1` of each mask stands for `x_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Conjunction {
    pub pos: u32,
    pub neg: u32,
}

impl Conjunction {
    pub fn size(self) -> u32 {
        self.pos.count_ones() + self.neg.count_ones()
    }

    pub fn satisfied_by(self, mask: u32) -> bool {
        self.pos & !mask == 0 && self.neg & mask == 0
    }
}

/// Explicitly enumerated conjunction space for one kernel kind and `n`.
#[derive(Debug, Clone)]
pub struct FeatureSpace {
    kind: KernelKind,
    n: usize,
    features: Vec<Conjunction>,
}

impl FeatureSpace {
    pub fn new(kind: KernelKind, n: usize) -> Result<Self> {
        kind.check(n)?;
        let limit = if kind.is_monotone() {
            MONOTONE_EXPAND_LIMIT
        } else {
            SIGNED_EXPAND_LIMIT
        };
        if n > limit {
            return Err(Error::GuardExceeded {
                what: "expansion width n",
                actual: n,
                limit,
            });
        }
        let cap = kind.bound().unwrap_or(n) as u32;
        let features = if kind.is_monotone() {
            monotone_by_size(n, cap as usize)
                .into_iter()
                .map(|pos| Conjunction { pos, neg: 0 })
                .collect()
        } else {
            signed_ternary(n)
                .into_iter()
                .filter(|c| c.size() <= cap)
                .collect()
        };
        Ok(Self { kind, n, features })
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }

    pub fn features(&self) -> &[Conjunction] {
        &self.features
    }

    pub fn expand(&self, x: &BitVec) -> Result<ExplicitFeatureVector> {
        Error::check_len(self.n, x.len())?;
        let mask = x.to_mask() as u32;
        Ok(ExplicitFeatureVector {
            kind: self.kind,
            n: self.n,
            indicators: self
                .features
                .iter()
                .map(|c| u8::from(c.satisfied_by(mask)))
                .collect(),
        })
    }
}

/// All subsets of `{1..n}` of size `<= cap`, by size then lexicographically.
fn monotone_by_size(n: usize, cap: usize) -> Vec<u32> {
    let mut out = Vec::new();
    for size in 0..=cap.min(n) {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            out.push(idx.iter().fold(0u32, |m, &i| m | 1 << i));
            // advance to the next combination in lexicographic order
            let mut j = size;
            while j > 0 && idx[j - 1] == n - size + j - 1 {
                j -= 1;
            }
            if j == 0 {
                break;
            }
            idx[j - 1] += 1;
            for t in j..size {
                idx[t] = idx[t - 1] + 1;
            }
        }
    }
    out
}

fn signed_ternary(n: usize) -> Vec<Conjunction> {
    let total = 3usize.pow(n as u32);
    (0..total)
        .map(|mut code| {
            let mut c = Conjunction { pos: 0, neg: 0 };
            for i in 0..n {
                match code % 3 {
                    1 => c.pos |= 1 << i,
                    2 => c.neg |= 1 << i,
                    _ => {}
                }
                code /= 3;
            }
            c
        })
        .collect()
}

/// Indicator vector of an example over an enumerated conjunction space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplicitFeatureVector {
    pub kind: KernelKind,
    pub n: usize,
    pub indicators: Vec<u8>,
}

pub fn expand(kind: KernelKind, x: &BitVec) -> Result<ExplicitFeatureVector> {
    FeatureSpace::new(kind, x.len())?.expand(x)
}

pub fn dot(a: &ExplicitFeatureVector, b: &ExplicitFeatureVector) -> Result<Int> {
    if a.kind != b.kind || a.n != b.n || a.indicators.len() != b.indicators.len() {
        return Err(Error::KindMismatch(format!(
            "{} over n={} vs {} over n={}",
            a.kind, a.n, b.kind, b.n
        )));
    }
    let count = a
        .indicators
        .iter()
        .zip(&b.indicators)
        .filter(|(p, q)| **p == 1 && **q == 1)
        .count();
    let mut acc = Int::zero();
    acc += count;
    Ok(acc)
}
