//! Winnow(α, θ): explicit over a small feature vector, and lazily over all
//! `2^m - 1` nonempty monotone monomials of an `m`-bit example.
//!
//! Weights are kept as integer exponents `e` with weight `α^e`, so every
//! weight is exact and strictly positive. The lazy simulator stores an
//! exponent only for monomials that have been touched by an update. A
//! monomial `T` contributes to the score of `x` iff `T ⊆ support(x)`, and an
//! update on `x` only touches such monomials, so predicting and updating need
//! only the `2^|x| - 1` nonempty subsets of the example's support.

use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::bits::{BitVec, Label, LabeledExample};
use crate::error::{Error, Result};
use crate::exact::{ceil_log, cmp_fraction, rat_pow, serde_rat, Int, Rat};
use crate::trace::{Outcome, Trace};

/// Default cap on `|support(x)|` for lazy scoring (2^24 subsets).
pub const DEFAULT_SUPPORT_GUARD: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WinnowConfig {
    #[serde(with = "serde_rat")]
    pub alpha: Rat,
    #[serde(with = "serde_rat")]
    pub theta: Rat,
}

impl WinnowConfig {
    pub fn new(alpha: Rat, theta: Rat) -> Result<Self> {
        let c = Self { alpha, theta };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha <= Rat::one() {
            return Err(Error::InvalidParameter(format!(
                "promotion factor must exceed 1, got {}",
                self.alpha
            )));
        }
        if !self.theta.is_positive() {
            return Err(Error::InvalidParameter(format!(
                "threshold must be positive, got {}",
                self.theta
            )));
        }
        Ok(())
    }
}

/// Upper bound on Winnow's mistakes for a `k`-literal monotone disjunction
/// over `n` features: `α/(α-1) * n/θ + k(α+1)(1 + ⌈log_α θ⌉)`.
///
/// The log term is rounded up, so the value can exceed the real-valued
/// bound by less than `k(α+1)` but never undercuts it.
pub fn winnow_bound(alpha: &Rat, theta: &Rat, n: &Int, k: u64) -> Result<Rat> {
    if *alpha <= Rat::one() || *theta < Rat::one() {
        return Err(Error::InvalidParameter(format!(
            "winnow bound needs alpha > 1 and theta >= 1, got alpha={alpha} theta={theta}"
        )));
    }
    let first = alpha / (alpha - Rat::one()) * Rat::from_integer(n.clone()) / theta;
    let log = ceil_log(alpha, theta)?;
    let second = Rat::from_integer(Int::from(k))
        * (alpha + Rat::one())
        * Rat::from_integer(Int::from(1 + log));
    Ok(first + second)
}

/// Winnow over an explicit `N`-dimensional 0/1 feature vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplicitWinnow {
    config: WinnowConfig,
    exponents: Vec<i64>,
}

impl ExplicitWinnow {
    /// All weights start at 1.
    pub fn new(config: WinnowConfig, dim: usize) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            exponents: vec![0; dim],
        })
    }

    pub fn exponents(&self) -> &[i64] {
        &self.exponents
    }

    pub fn weight(&self, i: usize) -> Rat {
        rat_pow(&self.config.alpha, self.exponents[i])
    }

    pub fn score(&self, active: &[bool]) -> Result<Rat> {
        Error::check_len(self.exponents.len(), active.len())?;
        let mut s = Rat::zero();
        for (i, _) in active.iter().enumerate().filter(|(_, a)| **a) {
            s += self.weight(i);
        }
        Ok(s)
    }

    /// One online step on a raw feature vector.
    pub fn update_features(&mut self, active: &[bool], label: Label) -> Result<Outcome> {
        let score = self.score(active)?;
        let predicted = Label::from_bool(score >= self.config.theta);
        let mistake = predicted != label;
        if mistake {
            let d = label.sign();
            for (e, _) in self.exponents.iter_mut().zip(active).filter(|(_, a)| **a) {
                *e += d;
            }
        }
        Ok(Outcome {
            predicted,
            mistake,
            score,
        })
    }

    pub fn update(&mut self, e: &LabeledExample) -> Result<Outcome> {
        let active: Vec<bool> = (1..=e.x.len()).map(|i| e.x.get(i).unwrap()).collect();
        self.update_features(&active, e.label)
    }

    pub fn process(&self, e: &LabeledExample) -> Result<(Self, Outcome)> {
        let mut next = self.clone();
        let out = next.update(e)?;
        Ok((next, out))
    }
}

pub fn explicit_run(config: &WinnowConfig, dim: usize, stream: &[LabeledExample]) -> Result<(Trace, ExplicitWinnow)> {
    let mut state = ExplicitWinnow::new(config.clone(), dim)?;
    let mut trace = Trace::default();
    for e in stream {
        let out = state.update(e)?;
        trace.push(&e.x, e.label, &out);
    }
    Ok((trace, state))
}

/// Promotion (+1) or demotion (-1) applied to every nonempty monomial inside
/// `support`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub support: BitVec,
    pub direction: i8,
}

/// Lazily materialised Winnow weights over all nonempty monotone monomials
/// of `m` variables. A monomial is keyed by its sorted 1-based variable list.
#[derive(Debug, Clone)]
pub struct SparseMonomialWeights {
    config: WinnowConfig,
    m: usize,
    guard: usize,
    exponents: HashMap<Vec<u32>, i64>,
    log: Vec<AuditEntry>,
}

impl SparseMonomialWeights {
    pub fn new(config: WinnowConfig, m: usize) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            m,
            guard: DEFAULT_SUPPORT_GUARD,
            exponents: HashMap::new(),
            log: Vec::new(),
        })
    }

    pub fn with_guard(mut self, guard: usize) -> Self {
        self.guard = guard;
        self
    }

    pub fn config(&self) -> &WinnowConfig {
        &self.config
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn log(&self) -> &[AuditEntry] {
        &self.log
    }

    /// Number of monomials with a nonzero exponent.
    pub fn stored(&self) -> usize {
        self.exponents.len()
    }

    /// Exponent of the monomial over `vars` (sorted, 1-based); 0 if untouched.
    pub fn exponent(&self, vars: &[u32]) -> i64 {
        self.exponents.get(vars).copied().unwrap_or(0)
    }

    /// Stored `(monomial, exponent)` pairs in sorted order.
    pub fn entries(&self) -> Vec<(Vec<u32>, i64)> {
        let mut v: Vec<_> = self.exponents.iter().map(|(k, e)| (k.clone(), *e)).collect();
        v.sort();
        v
    }

    fn support_of(&self, x: &BitVec) -> Result<Vec<u32>> {
        Error::check_len(self.m, x.len())?;
        let s: Vec<u32> = x.support().into_iter().map(|i| i as u32).collect();
        if s.len() > self.guard {
            return Err(Error::GuardExceeded {
                what: "example support size",
                actual: s.len(),
                limit: self.guard,
            });
        }
        Ok(s)
    }

    /// Histogram of exponents over the nonempty subsets of `vars` that pass
    /// `keep`. `keep` sees the subset as a bitmask over positions of `vars`.
    fn exponent_histogram<F>(&self, vars: &[u32], keep: F) -> BTreeMap<i64, u64>
    where
        F: Fn(u64) -> bool,
    {
        let mut hist = BTreeMap::new();
        let mut key = Vec::with_capacity(vars.len());
        for mask in 1u64..(1u64 << vars.len()) {
            if !keep(mask) {
                continue;
            }
            subset_key(vars, mask, &mut key);
            *hist.entry(self.exponent(&key)).or_insert(0) += 1;
        }
        hist
    }

    /// `sum count * α^e` as an unreduced fraction `(num, den)`, `den > 0`.
    fn histogram_fraction(&self, hist: &BTreeMap<i64, u64>) -> (Int, Int) {
        let (Some(&emin), Some(&emax)) = (hist.keys().next(), hist.keys().next_back()) else {
            return (Int::zero(), Int::one());
        };
        let p = self.config.alpha.numer();
        let q = self.config.alpha.denom();
        let upow = |b: &Int, e: i64| b.pow(u32::try_from(e).expect("exponent range"));
        let mut sum = Int::zero();
        for (&e, &count) in hist {
            sum += upow(p, e - emin) * upow(q, emax - e) * count;
        }
        let num = sum * upow(p, emin.max(0)) * upow(q, (-emax).max(0));
        let den = upow(p, (-emin).max(0)) * upow(q, emax.max(0));
        (num, den)
    }

    /// Sum of weights of nonempty subsets of `vars` selected by `keep`.
    pub fn subset_weight_sum<F>(&self, vars: &[u32], keep: F) -> Rat
    where
        F: Fn(u64) -> bool,
    {
        let (num, den) = self.histogram_fraction(&self.exponent_histogram(vars, keep));
        Rat::new(num, den)
    }

    /// `w · φ(x)` over nonempty monomials.
    pub fn lazy_score(&self, x: &BitVec) -> Result<Rat> {
        let s = self.support_of(x)?;
        Ok(self.subset_weight_sum(&s, |_| true))
    }

    pub fn predict(&self, x: &BitVec) -> Result<Label> {
        let s = self.support_of(x)?;
        let (num, den) = self.histogram_fraction(&self.exponent_histogram(&s, |_| true));
        Ok(Label::from_bool(cmp_fraction(&num, &den, &self.config.theta).is_ge()))
    }

    pub fn update(&mut self, e: &LabeledExample) -> Result<Outcome> {
        let s = self.support_of(&e.x)?;
        let (num, den) = self.histogram_fraction(&self.exponent_histogram(&s, |_| true));
        let predicted = Label::from_bool(cmp_fraction(&num, &den, &self.config.theta).is_ge());
        let mistake = predicted != e.label;
        if mistake {
            let d = e.label.sign();
            let mut key = Vec::with_capacity(s.len());
            for mask in 1u64..(1u64 << s.len()) {
                subset_key(&s, mask, &mut key);
                match self.exponents.get_mut(key.as_slice()) {
                    Some(v) => {
                        *v += d;
                        if *v == 0 {
                            self.exponents.remove(key.as_slice());
                        }
                    }
                    None => {
                        self.exponents.insert(key.clone(), d);
                    }
                }
            }
            self.log.push(AuditEntry {
                support: e.x.clone(),
                direction: d as i8,
            });
        }
        Ok(Outcome {
            predicted,
            mistake,
            score: Rat::new(num, den),
        })
    }

    pub fn process(&self, e: &LabeledExample) -> Result<(Self, Outcome)> {
        let mut next = self.clone();
        let out = next.update(e)?;
        Ok((next, out))
    }

    /// Recomputes every stored exponent from the audit log. Returns the first
    /// monomial whose stored value disagrees, if any.
    pub fn audit(&self) -> Option<Vec<u32>> {
        let mut recomputed: HashMap<Vec<u32>, i64> = HashMap::new();
        for entry in &self.log {
            let s: Vec<u32> = entry.support.support().into_iter().map(|i| i as u32).collect();
            let mut key = Vec::new();
            for mask in 1u64..(1u64 << s.len()) {
                subset_key(&s, mask, &mut key);
                *recomputed.entry(key.clone()).or_insert(0) += i64::from(entry.direction);
            }
        }
        recomputed.retain(|_, v| *v != 0);
        let mut keys: Vec<&Vec<u32>> = self.exponents.keys().chain(recomputed.keys()).collect();
        keys.sort();
        keys.dedup();
        keys.into_iter()
            .find(|k| self.exponents.get(*k) != recomputed.get(*k))
            .cloned()
    }
}

fn subset_key(vars: &[u32], mask: u64, key: &mut Vec<u32>) {
    key.clear();
    let mut m = mask;
    while m != 0 {
        key.push(vars[m.trailing_zeros() as usize]);
        m &= m - 1;
    }
}

pub fn lazy_run(
    config: &WinnowConfig,
    m: usize,
    stream: &[LabeledExample],
) -> Result<(Trace, SparseMonomialWeights)> {
    let mut state = SparseMonomialWeights::new(config.clone(), m)?;
    let mut trace = Trace::default();
    for e in stream {
        let out = state.update(e)?;
        trace.push(&e.x, e.label, &out);
    }
    Ok((trace, state))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KwpAnswer {
    pub decision: bool,
    pub score: Rat,
    pub monotone_consistent: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct KwpOptions {
    pub guard: usize,
    /// Proceed even if the sequence is not monotone consistent.
    pub force: bool,
}

impl Default for KwpOptions {
    fn default() -> Self {
        Self {
            guard: DEFAULT_SUPPORT_GUARD,
            force: false,
        }
    }
}

/// Runs lazy Winnow over `stream`, then asks whether `w · φ(z) >= θ`.
pub fn kwp_decide(
    stream: &[LabeledExample],
    z: &BitVec,
    config: &WinnowConfig,
    opts: KwpOptions,
) -> Result<KwpAnswer> {
    let consistent = match crate::reduction::check_monotone_consistent(stream) {
        Ok(()) => true,
        Err(_) if opts.force => false,
        Err(e) => return Err(e),
    };
    let mut state = SparseMonomialWeights::new(config.clone(), z.len())?.with_guard(opts.guard);
    // reject an oversized query before paying for the run
    state.support_of(z)?;
    for e in stream {
        state.update(e)?;
    }
    let score = state.lazy_score(z)?;
    Ok(KwpAnswer {
        decision: score >= config.theta,
        score,
        monotone_consistent: consistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{int, pow2, rat};

    fn cfg(a: i64, t: i64) -> WinnowConfig {
        WinnowConfig::new(rat(a, 1), rat(t, 1)).unwrap()
    }

    fn bv(s: &str) -> BitVec {
        s.parse().unwrap()
    }

    #[test]
    fn bound_examples() {
        let two = rat(2, 1);
        assert_eq!(winnow_bound(&two, &rat(16, 1), &int(16), 1).unwrap(), rat(17, 1));
        assert_eq!(winnow_bound(&two, &rat(16, 1), &int(16), 0).unwrap(), rat(2, 1));
        let big = Rat::from_integer(pow2(20));
        assert_eq!(winnow_bound(&two, &big, &pow2(20), 3).unwrap(), rat(191, 1));
        assert!(winnow_bound(&rat(1, 1), &big, &pow2(20), 3).is_err());
        assert!(winnow_bound(&two, &rat(1, 2), &int(4), 3).is_err());
    }

    #[test]
    fn bound_rounds_log_up() {
        // log_2 10 is about 3.32, rounded to 4
        let b = winnow_bound(&rat(2, 1), &rat(10, 1), &int(10), 1).unwrap();
        assert_eq!(b, rat(2, 1) + rat(15, 1));
    }

    #[test]
    fn config_validation() {
        assert!(WinnowConfig::new(rat(1, 1), rat(4, 1)).is_err());
        assert!(WinnowConfig::new(rat(2, 1), rat(0, 1)).is_err());
    }

    #[test]
    fn explicit_examples() {
        let w = ExplicitWinnow::new(cfg(2, 4), 4).unwrap();
        let (_, o) = w.process(&LabeledExample::negative(bv("1111"))).unwrap();
        assert_eq!(o.predicted, Label::Positive);

        let (w1, o1) = w.process(&LabeledExample::positive(bv("1100"))).unwrap();
        assert!(o1.mistake);
        assert_eq!(o1.score, rat(2, 1));
        assert_eq!(w1.exponents(), &[1, 1, 0, 0]);

        let (w2, o2) = w1.process(&LabeledExample::negative(bv("1100"))).unwrap();
        assert!(o2.mistake);
        assert_eq!(o2.score, rat(4, 1));
        assert_eq!(w2.exponents(), &[0, 0, 0, 0]);

        assert!(w.process(&LabeledExample::negative(bv("111"))).is_err());
    }

    #[test]
    fn lazy_score_examples() {
        let s = SparseMonomialWeights::new(cfg(2, 4), 6).unwrap();
        assert_eq!(s.lazy_score(&bv("110000")).unwrap(), rat(3, 1));
        assert_eq!(s.lazy_score(&BitVec::zeros(6)).unwrap(), rat(0, 1));

        let mut s = SparseMonomialWeights::new(cfg(2, 1), 6).unwrap();
        let o = s.update(&LabeledExample::negative(bv("011000"))).unwrap();
        assert!(o.mistake);
        assert_eq!(s.lazy_score(&bv("011000")).unwrap(), rat(3, 2));
    }

    #[test]
    fn lazy_process_examples() {
        let s = SparseMonomialWeights::new(cfg(2, 4), 5).unwrap();
        let (s1, o) = s.process(&LabeledExample::positive(bv("10100"))).unwrap();
        assert!(o.mistake);
        assert_eq!(s1.stored(), 3);
        assert_eq!(s1.exponent(&[1]), 1);
        assert_eq!(s1.exponent(&[3]), 1);
        assert_eq!(s1.exponent(&[1, 3]), 1);
        assert_eq!(s1.exponent(&[2]), 0);

        let s = SparseMonomialWeights::new(cfg(2, 2), 5).unwrap();
        let (s1, o) = s.process(&LabeledExample::positive(bv("10100"))).unwrap();
        assert!(!o.mistake);
        assert_eq!(s1.stored(), 0);
        assert!(s1.log().is_empty());
    }

    #[test]
    fn fractional_alpha_scores_exactly() {
        let c = WinnowConfig::new(rat(3, 2), rat(4, 1)).unwrap();
        let mut s = SparseMonomialWeights::new(c, 3).unwrap();
        assert!(s.update(&LabeledExample::positive(bv("110"))).unwrap().mistake);
        // 3 * 3/2 + 4 * 1 >= 4
        let o = s.update(&LabeledExample::negative(bv("111"))).unwrap();
        assert!(o.mistake);
        assert_eq!(o.score, rat(17, 2));
        // subsets of {1,2} are back at 1, the other four sit at 2/3
        assert_eq!(s.lazy_score(&bv("111")).unwrap(), rat(17, 3));
        assert_eq!(s.lazy_score(&bv("001")).unwrap(), rat(2, 3));
        assert_eq!(s.audit(), None);
    }

    #[test]
    fn support_guard() {
        let s = SparseMonomialWeights::new(cfg(2, 4), 30).unwrap().with_guard(5);
        assert!(matches!(
            s.lazy_score(&BitVec::ones(30)),
            Err(Error::GuardExceeded { .. })
        ));
        assert!(s.lazy_score(&BitVec::from_positions(30, 1..=5).unwrap()).is_ok());
    }

    #[test]
    fn update_locality_and_audit() {
        let mut s = SparseMonomialWeights::new(cfg(2, 100), 8).unwrap();
        s.update(&LabeledExample::positive(bv("11010000"))).unwrap();
        let support = [1u32, 2, 4];
        for (k, _) in s.entries() {
            assert!(k.iter().all(|v| support.contains(v)));
        }
        s.update(&LabeledExample::positive(bv("01110000"))).unwrap();
        assert_eq!(s.exponent(&[2, 4]), 2);
        assert_eq!(s.audit(), None);
        // tamper and make sure the audit notices
        let mut t = s.clone();
        t.exponents.insert(vec![2, 4], 5);
        assert_eq!(t.audit(), Some(vec![2, 4]));
    }

    #[test]
    fn kwp_empty_stream() {
        let z = bv("111000");
        let ok = kwp_decide(&[], &z, &cfg(2, 7), KwpOptions::default()).unwrap();
        assert!(ok.decision);
        let no = kwp_decide(&[], &z, &cfg(2, 8), KwpOptions::default()).unwrap();
        assert!(!no.decision);
    }

    #[test]
    fn kwp_rejects_inconsistent_unless_forced() {
        let s = vec![
            LabeledExample::positive(bv("000")),
            LabeledExample::negative(bv("111")),
        ];
        let z = bv("100");
        assert!(matches!(
            kwp_decide(&s, &z, &cfg(2, 2), KwpOptions::default()),
            Err(Error::NotMonotoneConsistent(1, 2))
        ));
        let forced = kwp_decide(&s, &z, &cfg(2, 2), KwpOptions { force: true, ..Default::default() }).unwrap();
        assert!(!forced.monotone_consistent);
    }
}
