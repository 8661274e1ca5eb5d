//! Mistake-forcing constructions for the monotone-monomial kernel Perceptron.
//!
//! A hard set is a family of `t` vectors of weight `w` whose pairwise
//! intersections are at most `c`. After the prefix `⟨0^n,-1⟩, ⟨1^n,+1⟩` every
//! nonempty monomial has weight 1; a monomial with more than `c` variables
//! inside some `x^i` belongs to no other `x^j`, so it is never demoted before
//! `x^i` arrives. The `sum_{r>c} C(w,r)` such monomials outweigh everything
//! the earlier demotions can subtract, and the Perceptron misclassifies every
//! `x^i` even though the target is the single conjunction `x_1 ... x_n`.

use std::collections::BTreeSet;

use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::{BitVec, Label, LabeledExample};
use crate::error::{Error, Result};
use crate::exact::{binomial_sum, ceil_rat, Int, Rat};
use crate::kernels::KernelKind;
use crate::perceptron::{run, DualPerceptron, PerceptronConfig, PerceptronRun};
use crate::rng::{rng_for, Purpose};
use crate::winnow::DEFAULT_SUPPORT_GUARD;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardSetParams {
    pub n: usize,
    /// Exact weight of every vector.
    pub weight: usize,
    /// Largest allowed pairwise intersection.
    pub cap: usize,
    pub count: usize,
    pub seed: u64,
    pub max_attempts: usize,
}

impl HardSetParams {
    /// `n = 320, w = 16, c = 4, t = 25`: the smallest preset we use whose
    /// mistake-forcing margin is positive.
    pub fn desk(seed: u64) -> Self {
        Self {
            n: 320,
            weight: 16,
            cap: 4,
            count: 25,
            seed,
            max_attempts: 100_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.weight > self.n {
            return Err(Error::InvalidParameter(format!(
                "weight {} exceeds n {}",
                self.weight, self.n
            )));
        }
        if self.cap >= self.weight {
            return Err(Error::InvalidParameter(format!(
                "intersection cap {} must be below weight {}",
                self.cap, self.weight
            )));
        }
        if self.count == 0 {
            return Err(Error::InvalidParameter("hard set needs at least one vector".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardSet {
    pub params: HardSetParams,
    pub vectors: Vec<BitVec>,
}

impl HardSet {
    /// Wraps explicit vectors, checking the weight and intersection invariants.
    pub fn from_vectors(params: HardSetParams, vectors: Vec<BitVec>) -> Result<Self> {
        let hs = Self { params, vectors };
        hs.verify()?;
        Ok(hs)
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Exhaustive check of both invariants.
    pub fn verify(&self) -> Result<()> {
        let p = &self.params;
        for (i, v) in self.vectors.iter().enumerate() {
            if v.len() != p.n || v.weight() != p.weight {
                return Err(Error::InvalidParameter(format!(
                    "vector {i} has length {} and weight {}, expected {} and {}",
                    v.len(),
                    v.weight(),
                    p.n,
                    p.weight
                )));
            }
            for (j, u) in self.vectors.iter().enumerate().skip(i + 1) {
                let k = v.intersect_count(u)?;
                if k > p.cap {
                    return Err(Error::InvalidParameter(format!(
                        "vectors {i} and {j} share {k} bits, cap is {}",
                        p.cap
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Seeded generate-and-verify: each bit is 1 with probability `2w/n`,
/// candidates lighter than `w` are dropped, heavier ones lose their
/// highest-indexed 1 bits, and a candidate is kept only if it meets every
/// accepted vector in at most `c` positions.
pub fn gen_hard_set(params: &HardSetParams) -> Result<HardSet> {
    params.validate()?;
    let mut rng = rng_for(params.seed, Purpose::HardSet);
    let (num, den) = ((2 * params.weight).min(params.n) as u32, params.n as u32);
    let mut accepted: Vec<BitVec> = Vec::with_capacity(params.count);
    let mut attempts = 0;
    while accepted.len() < params.count {
        if attempts == params.max_attempts {
            return Err(Error::GenerationFailed {
                attempts,
                accepted: accepted.len(),
                wanted: params.count,
            });
        }
        attempts += 1;
        let ones: Vec<usize> = (1..=params.n).filter(|_| rng.gen_ratio(num, den)).collect();
        if ones.len() < params.weight {
            continue;
        }
        let cand = BitVec::from_positions(params.n, ones[..params.weight].iter().copied())?;
        let ok = accepted
            .iter()
            .all(|v| v.intersect_count(&cand).unwrap() <= params.cap);
        if ok {
            accepted.push(cand);
        }
    }
    HardSet::from_vectors(params.clone(), accepted)
}

/// Exact lower bound on the score of any `x^i` after the standard prefix:
/// `sum_{r>c} C(w,r) - t * sum_{r<=c} C(w,r)`.
pub fn forcing_margin(weight: usize, cap: usize, count: usize) -> Int {
    let (w, c) = (weight as u64, cap as u64);
    binomial_sum(w, c + 1, w) - binomial_sum(w, 0, c) * Int::from(count)
}

/// Whether the margin clears `t + 1`, which guarantees a mistake on every
/// hard-set vector.
pub fn mistake_forcing_condition(weight: usize, cap: usize, count: usize) -> bool {
    forcing_margin(weight, cap, count) > Int::from(count + 1)
}

/// `⟨0^n,-1⟩, ⟨1^n,+1⟩, ⟨x^1,-1⟩, ..., ⟨x^t,-1⟩`, labelled by `x_1 ... x_n`.
pub fn build_mistake_sequence(hs: &HardSet) -> Vec<LabeledExample> {
    let n = hs.n();
    let mut seq = vec![
        LabeledExample::negative(BitVec::zeros(n)),
        LabeledExample::positive(BitVec::ones(n)),
    ];
    seq.extend(hs.vectors.iter().cloned().map(|x| {
        let label = Label::from_bool(x.weight() == n);
        LabeledExample::new(x, label)
    }));
    seq
}

/// Exact split of the score on `x^i` into shared (`A_i`) and private (`B_i`)
/// monomials.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    /// Sum of `w_T` over nonempty `T ⊆ x^i` also contained in another `x^j`.
    pub sum_a: Rat,
    /// Sum of `w_T` over nonempty `T ⊆ x^i` contained in no other `x^j`.
    pub sum_b: Rat,
    pub w_empty: Rat,
    pub bias: Rat,
    /// `sum_a + sum_b + w_empty + bias`.
    pub score: Rat,
    pub a_count: usize,
    pub b_count: usize,
}

/// Enumerates every monomial inside `x^i` (0-based `i`) and computes its
/// primal weight from the mistake list of `state`.
pub fn certificate(state: &DualPerceptron, hs: &HardSet, i: usize) -> Result<Certificate> {
    if state.config().kind != KernelKind::MonotoneConjunctions {
        return Err(Error::KindMismatch(format!(
            "certificate needs the monotone kernel, state uses {}",
            state.config().kind
        )));
    }
    let xi = hs.vectors.get(i).ok_or(Error::IndexOutOfRange {
        index: i,
        len: hs.len(),
    })?;
    let support = xi.support();
    let w = support.len();
    if w > DEFAULT_SUPPORT_GUARD {
        return Err(Error::GuardExceeded {
            what: "hard-set vector weight",
            actual: w,
            limit: DEFAULT_SUPPORT_GUARD,
        });
    }
    let local = |v: &BitVec| -> Result<usize> {
        Error::check_len(v.len(), xi.len())?;
        Ok(support
            .iter()
            .enumerate()
            .filter(|(_, &pos)| v.get(pos).unwrap())
            .fold(0usize, |m, (b, _)| m | 1 << b))
    };
    let size = 1usize << w;

    // signed multiplicity of each mistake's trace on x^i, then superset sums:
    // net[T] = sum over mistakes v with T ⊆ v of L(v)
    let mut net = vec![0i64; size];
    for m in state.mistakes() {
        net[local(&m.x)?] += m.label.sign();
    }
    // shared[T]: T ⊆ x^j for some j != i
    let mut shared = vec![false; size];
    for (j, xj) in hs.vectors.iter().enumerate() {
        if j != i {
            shared[local(xj)?] = true;
        }
    }
    for b in 0..w {
        for mask in 0..size {
            if mask & (1 << b) == 0 {
                let up = mask | 1 << b;
                net[mask] += net[up];
                shared[mask] |= shared[up];
            }
        }
    }

    let (mut sum_a, mut sum_b) = (0i64, 0i64);
    let (mut a_count, mut b_count) = (0, 0);
    for t in 1..size {
        if shared[t] {
            sum_a += net[t];
            a_count += 1;
        } else {
            sum_b += net[t];
            b_count += 1;
        }
    }
    let rate = &state.config().learning_rate;
    let scale = |v: i64| Rat::from_integer(Int::from(v)) * rate;
    let (sum_a, sum_b, w_empty) = (scale(sum_a), scale(sum_b), scale(net[0]));
    let bias = state.bias().clone();
    let score = &sum_a + &sum_b + &w_empty + &bias;
    Ok(Certificate {
        sum_a,
        sum_b,
        w_empty,
        bias,
        score,
        a_count,
        b_count,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    /// `x_1 x_2 ... x_n`
    FullConjunction,
    /// `x_1 ∨ x_2 ∨ ... ∨ x_n`
    FullDisjunction,
}

impl Target {
    pub fn label(self, x: &BitVec) -> Label {
        match self {
            Target::FullConjunction => Label::from_bool(x.weight() == x.len()),
            Target::FullDisjunction => Label::from_bool(x.weight() > 0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdRegime {
    Negative,
    Standard,
    Large,
}

#[derive(Debug, Clone)]
pub struct ThresholdCase {
    pub regime: ThresholdRegime,
    pub target: Target,
    pub sequence: Vec<LabeledExample>,
    /// Copies of the leading repeated example (`0^n` or `e_1`).
    pub repetitions: usize,
}

/// Mistake-forcing sequence for a Perceptron with fixed threshold `theta`
/// (learning rate 1).
///
/// * `theta < 0`: `0^n` repeated until a correct prediction is possible,
///   i.e. `floor(-theta) + 1` times (score `-k` must drop below `theta`),
///   then `1^n` and the hard set.
/// * `0 <= theta <= forcing_margin`: the standard sequence.
/// * larger `theta`: target `x_1 ∨ ... ∨ x_n` and `⌈theta/2⌉ - 1` copies of
///   `e_1 = 10...0`, which satisfies exactly two monomials.
pub fn threshold_case_sequence(theta: &Rat, hs: &HardSet) -> ThresholdCase {
    let n = hs.n();
    let p = &hs.params;
    if theta.is_negative() {
        let reps = (-theta).floor().to_integer() + Int::one();
        let reps: usize = reps.try_into().expect("repetition count fits in usize");
        let mut sequence = vec![LabeledExample::negative(BitVec::zeros(n)); reps];
        sequence.extend(build_mistake_sequence(hs).into_iter().skip(1));
        return ThresholdCase {
            regime: ThresholdRegime::Negative,
            target: Target::FullConjunction,
            sequence,
            repetitions: reps,
        };
    }
    let margin = Rat::from_integer(forcing_margin(p.weight, p.cap, hs.len()));
    if *theta <= margin {
        return ThresholdCase {
            regime: ThresholdRegime::Standard,
            target: Target::FullConjunction,
            sequence: build_mistake_sequence(hs),
            repetitions: 1,
        };
    }
    let reps = ceil_rat(&(theta / Rat::from_integer(Int::from(2)))) - Int::one();
    let reps: usize = if reps.is_positive() {
        reps.try_into().expect("repetition count fits in usize")
    } else {
        0
    };
    let e1 = BitVec::from_positions(n, [1]).expect("n >= 1");
    ThresholdCase {
        regime: ThresholdRegime::Large,
        target: Target::FullDisjunction,
        sequence: vec![LabeledExample::positive(e1); reps],
        repetitions: reps,
    }
}

/// Distribution with mass 1/4 on `0^n`, 1/4 on `1^n` and `1/(2t)` on each
/// hard-set vector.
#[derive(Debug, Clone)]
pub struct PacDistribution {
    pub hard_set: HardSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Atom {
    Zeros,
    Ones,
    Hard(usize),
}

impl PacDistribution {
    pub fn new(hard_set: HardSet) -> Result<Self> {
        if hard_set.is_empty() {
            return Err(Error::InvalidParameter("distribution needs a nonempty hard set".into()));
        }
        Ok(Self { hard_set })
    }

    pub fn atoms(&self) -> Vec<Atom> {
        let mut v = vec![Atom::Zeros, Atom::Ones];
        v.extend((0..self.hard_set.len()).map(Atom::Hard));
        v
    }

    pub fn probability(&self, a: Atom) -> Rat {
        match a {
            Atom::Zeros | Atom::Ones => Rat::new(1.into(), 4.into()),
            Atom::Hard(_) => Rat::new(1.into(), Int::from(2 * self.hard_set.len())),
        }
    }

    /// Labelled by the target `x_1 ... x_n`.
    pub fn example(&self, a: Atom) -> LabeledExample {
        let n = self.hard_set.n();
        match a {
            Atom::Zeros => LabeledExample::negative(BitVec::zeros(n)),
            Atom::Ones => LabeledExample::positive(BitVec::ones(n)),
            Atom::Hard(i) => {
                let x = self.hard_set.vectors[i].clone();
                let label = Target::FullConjunction.label(&x);
                LabeledExample::new(x, label)
            }
        }
    }

    /// i.i.d. atoms: a uniform draw from `0..4t` maps `[0,t)` to `0^n`,
    /// `[t,2t)` to `1^n` and `2t + 2i + {0,1}` to `x^i`.
    pub fn sample_atoms(&self, count: usize, seed: u64) -> Vec<Atom> {
        let t = self.hard_set.len();
        let mut rng = rng_for(seed, Purpose::PacSample);
        (0..count)
            .map(|_| {
                let u = rng.gen_range(0..4 * t);
                if u < t {
                    Atom::Zeros
                } else if u < 2 * t {
                    Atom::Ones
                } else {
                    Atom::Hard((u - 2 * t) / 2)
                }
            })
            .collect()
    }
}

pub fn pac_sample(d: &PacDistribution, count: usize, seed: u64) -> Vec<LabeledExample> {
    d.sample_atoms(count, seed)
        .into_iter()
        .map(|a| d.example(a))
        .collect()
}

#[derive(Debug, Clone)]
pub struct PacOutcome {
    pub run: PerceptronRun,
    /// Exact probability mass of atoms the final hypothesis gets wrong.
    pub error: Rat,
    pub prefix_hit: bool,
    pub misclassified: Vec<Atom>,
    /// Hard-set indices that occurred in the training sample.
    pub seen: BTreeSet<usize>,
}

/// Trains the monotone kernel Perceptron (threshold 0) on `atoms` and
/// evaluates the exact error of the final hypothesis over the whole support.
pub fn train_and_evaluate(d: &PacDistribution, atoms: &[Atom]) -> Result<PacOutcome> {
    let stream: Vec<LabeledExample> = atoms.iter().map(|&a| d.example(a)).collect();
    let run = run(&PerceptronConfig::new(KernelKind::MonotoneConjunctions), &stream)?;
    let mut error = Rat::zero();
    let mut misclassified = Vec::new();
    for a in d.atoms() {
        let e = d.example(a);
        if run.state.predict(&e.x)? != e.label {
            error += d.probability(a);
            misclassified.push(a);
        }
    }
    let prefix_hit = matches!(atoms, [Atom::Zeros, Atom::Ones, ..]);
    let seen = atoms
        .iter()
        .filter_map(|a| match a {
            Atom::Hard(i) => Some(*i),
            _ => None,
        })
        .collect();
    Ok(PacOutcome {
        run,
        error,
        prefix_hit,
        misclassified,
        seen,
    })
}

pub fn pac_experiment(d: &PacDistribution, sample_size: usize, seed: u64) -> Result<PacOutcome> {
    train_and_evaluate(d, &d.sample_atoms(sample_size, seed))
}

/// Same as [`pac_experiment`] but with `0^n, 1^n` forced in front of the
/// `sample_size` random draws.
pub fn pac_experiment_with_prefix(
    d: &PacDistribution,
    sample_size: usize,
    seed: u64,
) -> Result<PacOutcome> {
    let mut atoms = vec![Atom::Zeros, Atom::Ones];
    atoms.extend(d.sample_atoms(sample_size, seed));
    train_and_evaluate(d, &atoms)
}
