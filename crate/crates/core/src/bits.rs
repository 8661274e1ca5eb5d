//! Boolean example vectors and labels.
//!
//! Bit positions are numbered `1..=n` to line up with the usual `x_1 .. x_n`
//! feature names. The text form is a string of `0`/`1` characters with `x_1`
//! leftmost; JSON arrays derived from it are 0-based (position `i` lives at
//! array offset `i - 1`).

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const WORD: usize = 64;

/// Fixed-length packed bit vector.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitVec {
    len: usize,
    words: Vec<u64>,
}

impl BitVec {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; len.div_ceil(WORD)],
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut v = Self::zeros(len);
        for w in &mut v.words {
            *w = u64::MAX;
        }
        v.clear_tail();
        v
    }

    /// Vector with exactly the given 1-based positions set.
    pub fn from_positions<I>(len: usize, positions: I) -> Result<Self>
    where
        I: IntoIterator<Item = usize>,
    {
        let mut v = Self::zeros(len);
        for i in positions {
            v.set(i, true)?;
        }
        Ok(v)
    }

    /// Low `len` bits of `mask`, bit 0 being `x_1`.
    pub fn from_mask(len: usize, mask: u64) -> Self {
        assert!(len <= WORD, "from_mask supports at most 64 bits");
        let mut v = Self::zeros(len);
        if len > 0 {
            v.words[0] = mask;
            v.clear_tail();
        }
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.len {
            Err(Error::IndexOutOfRange {
                index: i,
                len: self.len,
            })
        } else {
            Ok(())
        }
    }

    pub fn get(&self, i: usize) -> Result<bool> {
        self.check_index(i)?;
        let k = i - 1;
        Ok(self.words[k / WORD] >> (k % WORD) & 1 == 1)
    }

    pub fn set(&mut self, i: usize, value: bool) -> Result<()> {
        self.check_index(i)?;
        let k = i - 1;
        let bit = 1u64 << (k % WORD);
        if value {
            self.words[k / WORD] |= bit;
        } else {
            self.words[k / WORD] &= !bit;
        }
        Ok(())
    }

    /// Number of 1 bits, `|x|`.
    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Number of positions where the two vectors agree.
    pub fn same(&self, other: &Self) -> Result<usize> {
        Error::check_len(self.len, other.len)?;
        let diff: usize = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum();
        Ok(self.len - diff)
    }

    /// Number of positions set in both vectors, `|x ∩ y|`.
    pub fn intersect_count(&self, other: &Self) -> Result<usize> {
        Error::check_len(self.len, other.len)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum())
    }

    /// Pointwise `x_i <= y_i`.
    pub fn leq(&self, other: &Self) -> Result<bool> {
        Error::check_len(self.len, other.len)?;
        Ok(self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0))
    }

    /// Whether every set position of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.len == other.len && self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    /// Set positions in increasing order (1-based).
    pub fn support(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.weight());
        for (wi, &w) in self.words.iter().enumerate() {
            let mut w = w;
            while w != 0 {
                let b = w.trailing_zeros() as usize;
                out.push(wi * WORD + b + 1);
                w &= w - 1;
            }
        }
        out
    }

    /// The whole vector as a mask; only valid for `len <= 64`.
    pub fn to_mask(&self) -> u64 {
        assert!(self.len <= WORD, "to_mask supports at most 64 bits");
        self.words.first().copied().unwrap_or(0)
    }

    fn clear_tail(&mut self) {
        let r = self.len % WORD;
        if r != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << r) - 1;
            }
        }
    }
}

impl Ord for BitVec {
    /// Lexicographic on `(x_1, x_2, ...)` with `0 < 1`; shorter vectors first.
    fn cmp(&self, other: &Self) -> Ordering {
        self.len.cmp(&other.len).then_with(|| {
            for (a, b) in self.words.iter().zip(&other.words) {
                let d = a ^ b;
                if d != 0 {
                    let low = d & d.wrapping_neg();
                    return if a & low != 0 {
                        Ordering::Greater
                    } else {
                        Ordering::Less
                    };
                }
            }
            Ordering::Equal
        })
    }
}

impl PartialOrd for BitVec {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = (1..=self.len)
            .map(|i| if self.get(i).unwrap() { '1' } else { '0' })
            .collect();
        f.write_str(&s)
    }
}

impl fmt::Debug for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVec({self})")
    }
}

impl FromStr for BitVec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let mut v = Self::zeros(s.len());
        for (k, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => v.set(k + 1, true)?,
                _ => return Err(Error::InvalidBits(s.to_string())),
            }
        }
        Ok(v)
    }
}

impl Serialize for BitVec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BitVec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Class label, `-1` or `+1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn sign(self) -> i64 {
        match self {
            Label::Negative => -1,
            Label::Positive => 1,
        }
    }

    pub fn from_sign(v: i64) -> Result<Self> {
        match v {
            -1 => Ok(Label::Negative),
            1 => Ok(Label::Positive),
            _ => Err(Error::InvalidParameter(format!("label must be -1 or 1, got {v}"))),
        }
    }

    pub fn from_bool(positive: bool) -> Self {
        if positive {
            Label::Positive
        } else {
            Label::Negative
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.sign())
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_i64(self.sign())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = i64::deserialize(d)?;
        Label::from_sign(v).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledExample {
    pub x: BitVec,
    pub label: Label,
}

impl LabeledExample {
    pub fn new(x: BitVec, label: Label) -> Self {
        Self { x, label }
    }

    pub fn positive(x: BitVec) -> Self {
        Self::new(x, Label::Positive)
    }

    pub fn negative(x: BitVec) -> Self {
        Self::new(x, Label::Negative)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bv(s: &str) -> BitVec {
        s.parse().unwrap()
    }

    #[test]
    fn weight_examples() {
        assert_eq!(bv("0000").weight(), 0);
        assert_eq!(bv("1111").weight(), 4);
        assert_eq!(bv("1010").weight(), 2);
    }

    #[test]
    fn same_examples() {
        assert_eq!(bv("1010").same(&bv("1010")).unwrap(), 4);
        assert_eq!(bv("1010").same(&bv("0101")).unwrap(), 0);
        assert_eq!(bv("1010").same(&bv("1001")).unwrap(), 2);
        assert!(bv("101").same(&bv("1010")).is_err());
    }

    #[test]
    fn intersect_examples() {
        assert_eq!(bv("1100").intersect_count(&bv("1010")).unwrap(), 1);
        assert_eq!(bv("1111").intersect_count(&bv("1111")).unwrap(), 4);
        assert_eq!(bv("1100").intersect_count(&bv("0011")).unwrap(), 0);
        assert!(bv("1").intersect_count(&bv("11")).is_err());
    }

    #[test]
    fn leq_examples() {
        assert!(bv("0000").leq(&bv("1010")).unwrap());
        assert!(bv("1010").leq(&bv("1010")).unwrap());
        assert!(!bv("1100").leq(&bv("1010")).unwrap());
        assert!(bv("1").leq(&bv("10")).is_err());
    }

    #[test]
    fn indices_are_one_based() {
        let mut v = BitVec::zeros(70);
        assert!(v.get(0).is_err());
        assert!(v.get(71).is_err());
        v.set(70, true).unwrap();
        v.set(1, true).unwrap();
        assert_eq!(v.support(), vec![1, 70]);
        assert!(v.to_string().starts_with('1'));
        assert!(v.to_string().ends_with('1'));
        assert_eq!(BitVec::ones(70).weight(), 70);
        assert!(v.set(71, true).is_err());
    }

    #[test]
    fn text_round_trip_and_errors() {
        assert_eq!(bv("0110").to_string(), "0110");
        assert!("01a".parse::<BitVec>().is_err());
        assert_eq!(BitVec::from_mask(3, 0b001).to_string(), "100");
    }

    #[test]
    fn lexicographic_order() {
        assert!(bv("0111") < bv("1000"));
        assert!(bv("1000") < bv("1001"));
        assert!(bv("111") < bv("0000"));
    }

    #[test]
    fn label_serde() {
        let e = LabeledExample::negative(bv("01"));
        let s = serde_json::to_string(&e).unwrap();
        assert_eq!(s, r#"{"x":"01","label":-1}"#);
        let back: LabeledExample = serde_json::from_str(&s).unwrap();
        assert_eq!(back, e);
        assert!(serde_json::from_str::<Label>("0").is_err());
    }

    fn arb_triple() -> impl Strategy<Value = (BitVec, BitVec, BitVec)> {
        (1usize..130).prop_flat_map(|n| {
            let v = proptest::collection::vec(any::<bool>(), n);
            (v.clone(), v.clone(), v).prop_map(move |(a, b, c)| {
                let mk = |bits: Vec<bool>| {
                    BitVec::from_positions(
                        bits.len(),
                        bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i + 1),
                    )
                    .unwrap()
                };
                (mk(a), mk(b), mk(c))
            })
        })
    }

    proptest! {
        #[test]
        fn counts_are_consistent((x, y, _z) in arb_triple()) {
            let n = x.len();
            let hamming = (1..=n).filter(|&i| x.get(i).unwrap() != y.get(i).unwrap()).count();
            prop_assert_eq!(x.same(&y).unwrap(), n - hamming);
            prop_assert!(x.intersect_count(&y).unwrap() <= x.weight().min(y.weight()));
        }

        #[test]
        fn leq_is_partial_order((x, y, z) in arb_triple()) {
            prop_assert!(x.leq(&x).unwrap());
            if x.leq(&y).unwrap() && y.leq(&x).unwrap() {
                prop_assert_eq!(&x, &y);
            }
            // force a chain so transitivity is exercised
            let xy = BitVec::from_positions(x.len(), x.support().into_iter().filter(|i| y.get(*i).unwrap())).unwrap();
            let yz = BitVec::from_positions(x.len(), y.support().into_iter().chain(z.support())).unwrap();
            prop_assert!(xy.leq(&y).unwrap() && y.leq(&yz).unwrap() && xy.leq(&yz).unwrap());
            if x.leq(&y).unwrap() && y.leq(&z).unwrap() {
                prop_assert!(x.leq(&z).unwrap());
            }
        }

        #[test]
        fn text_round_trip((x, _y, _z) in arb_triple()) {
            prop_assert_eq!(x.to_string().parse::<BitVec>().unwrap(), x);
        }
    }
}
