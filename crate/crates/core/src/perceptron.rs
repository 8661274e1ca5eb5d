//! Kernel Perceptron in dual form, with the generalized threshold /
//! learning-rate / bias variant, an explicit primal oracle and the classical
//! mistake bound.
//!
//! The hypothesis is never materialised: it is the list of examples on which
//! a mistake was made, and the score of `x` is
//! `rate * sum_{(v, L)} L * K(v, x) + bias`. Prediction is `+1` iff the score
//! is `>= threshold` (ties go positive).

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::bits::{BitVec, Label, LabeledExample};
use crate::error::{Error, Result};
use crate::exact::{serde_rat, Int, Rat};
use crate::kernels::{kernel, FeatureSpace, KernelKind};
use crate::trace::{Outcome, Trace};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerceptronConfig {
    pub kind: KernelKind,
    #[serde(with = "serde_rat")]
    pub threshold: Rat,
    #[serde(with = "serde_rat")]
    pub learning_rate: Rat,
    pub use_bias: bool,
}

impl PerceptronConfig {
    /// Threshold 0, learning rate 1, no bias.
    pub fn new(kind: KernelKind) -> Self {
        Self {
            kind,
            threshold: Rat::zero(),
            learning_rate: Rat::one(),
            use_bias: false,
        }
    }

    pub fn with_threshold(mut self, threshold: Rat) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn with_learning_rate(mut self, rate: Rat) -> Self {
        self.learning_rate = rate;
        self
    }

    pub fn with_bias(mut self, use_bias: bool) -> Self {
        self.use_bias = use_bias;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_positive() {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mistake {
    pub x: BitVec,
    pub label: Label,
    pub step: usize,
}

/// Dual-form kernel Perceptron state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualPerceptron {
    config: PerceptronConfig,
    mistakes: Vec<Mistake>,
    bias: Rat,
    steps: usize,
}

impl DualPerceptron {
    pub fn new(config: PerceptronConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            mistakes: Vec::new(),
            bias: Rat::zero(),
            steps: 0,
        })
    }

    pub fn config(&self) -> &PerceptronConfig {
        &self.config
    }

    pub fn mistakes(&self) -> &[Mistake] {
        &self.mistakes
    }

    pub fn bias(&self) -> &Rat {
        &self.bias
    }

    /// Number of examples processed so far.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `sum_{(v, L)} L * K(v, x)` without the learning rate or bias.
    pub fn kernel_sum(&self, x: &BitVec) -> Result<Int> {
        let mut acc = Int::zero();
        for m in &self.mistakes {
            let k = kernel(self.config.kind, &m.x, x)?;
            match m.label {
                Label::Positive => acc += k,
                Label::Negative => acc -= k,
            }
        }
        Ok(acc)
    }

    pub fn score(&self, x: &BitVec) -> Result<Rat> {
        let sum = Rat::from_integer(self.kernel_sum(x)?);
        Ok(sum * &self.config.learning_rate + &self.bias)
    }

    pub fn predict(&self, x: &BitVec) -> Result<Label> {
        Ok(Label::from_bool(self.score(x)? >= self.config.threshold))
    }

    /// Predicts on `e.x` and updates in place on a mistake.
    pub fn update(&mut self, e: &LabeledExample) -> Result<Outcome> {
        if let Some(first) = self.mistakes.first() {
            Error::check_len(first.x.len(), e.x.len())?;
        }
        let score = self.score(&e.x)?;
        let predicted = Label::from_bool(score >= self.config.threshold);
        self.steps += 1;
        let mistake = predicted != e.label;
        if mistake {
            self.mistakes.push(Mistake {
                x: e.x.clone(),
                label: e.label,
                step: self.steps,
            });
            if self.config.use_bias {
                let delta = &self.config.learning_rate;
                match e.label {
                    Label::Positive => self.bias += delta,
                    Label::Negative => self.bias -= delta,
                }
            }
        }
        Ok(Outcome {
            predicted,
            mistake,
            score,
        })
    }

    /// Functional form of [`update`](Self::update).
    pub fn process(&self, e: &LabeledExample) -> Result<(Self, Outcome)> {
        let mut next = self.clone();
        let out = next.update(e)?;
        Ok((next, out))
    }

    /// Primal weights `w_T = rate * sum L * [T true in v]` over `space`.
    pub fn expanded_weights(&self, space: &FeatureSpace) -> Result<Vec<Rat>> {
        if space.kind() != self.config.kind {
            return Err(Error::KindMismatch(format!(
                "state uses {}, space is {}",
                self.config.kind,
                space.kind()
            )));
        }
        let mut acc = vec![Int::zero(); space.dim()];
        for m in &self.mistakes {
            let phi = space.expand(&m.x)?;
            for (w, &b) in acc.iter_mut().zip(&phi.indicators) {
                if b == 1 {
                    *w += m.label.sign();
                }
            }
        }
        Ok(acc
            .into_iter()
            .map(|w| Rat::from_integer(w) * &self.config.learning_rate)
            .collect())
    }
}

#[derive(Debug, Clone)]
pub struct PerceptronRun {
    pub trace: Trace,
    pub state: DualPerceptron,
}

impl PerceptronRun {
    pub fn mistakes(&self) -> usize {
        self.trace.mistakes()
    }
}

pub fn run(config: &PerceptronConfig, stream: &[LabeledExample]) -> Result<PerceptronRun> {
    let mut state = DualPerceptron::new(config.clone())?;
    let mut trace = Trace::default();
    for e in stream {
        let out = state.update(e)?;
        trace.push(&e.x, e.label, &out);
    }
    Ok(PerceptronRun { trace, state })
}

/// Perceptron over an explicitly enumerated feature space.
#[derive(Debug, Clone)]
pub struct ExplicitPerceptron {
    config: PerceptronConfig,
    space: FeatureSpace,
    weights: Vec<Rat>,
    bias: Rat,
}

impl ExplicitPerceptron {
    pub fn new(config: PerceptronConfig, n: usize) -> Result<Self> {
        config.validate()?;
        let space = FeatureSpace::new(config.kind, n)?;
        let weights = vec![Rat::zero(); space.dim()];
        Ok(Self {
            config,
            space,
            weights,
            bias: Rat::zero(),
        })
    }

    pub fn weights(&self) -> &[Rat] {
        &self.weights
    }

    pub fn space(&self) -> &FeatureSpace {
        &self.space
    }

    pub fn update(&mut self, e: &LabeledExample) -> Result<Outcome> {
        let phi = self.space.expand(&e.x)?;
        let mut score = self.bias.clone();
        for (w, &b) in self.weights.iter().zip(&phi.indicators) {
            if b == 1 {
                score += w;
            }
        }
        let predicted = Label::from_bool(score >= self.config.threshold);
        let mistake = predicted != e.label;
        if mistake {
            let delta = match e.label {
                Label::Positive => self.config.learning_rate.clone(),
                Label::Negative => -self.config.learning_rate.clone(),
            };
            for (w, &b) in self.weights.iter_mut().zip(&phi.indicators) {
                if b == 1 {
                    *w += &delta;
                }
            }
            if self.config.use_bias {
                self.bias += &delta;
            }
        }
        Ok(Outcome {
            predicted,
            mistake,
            score,
        })
    }
}

/// Runs the primal oracle; its trace must equal [`run`]'s.
pub fn explicit_run(
    config: &PerceptronConfig,
    stream: &[LabeledExample],
) -> Result<(Trace, Option<ExplicitPerceptron>)> {
    let Some(first) = stream.first() else {
        config.validate()?;
        return Ok((Trace::default(), None));
    };
    let mut state = ExplicitPerceptron::new(config.clone(), first.x.len())?;
    let mut trace = Trace::default();
    for e in stream {
        let out = state.update(e)?;
        trace.push(&e.x, e.label, &out);
    }
    Ok((trace, Some(state)))
}

/// Classical mistake bound `R^2 ||u||^2 / xi^2`.
pub fn perceptron_bound(radius: &Rat, u_norm: &Rat, margin: &Rat) -> Result<Rat> {
    for (name, v) in [("R", radius), ("||u||", u_norm), ("margin", margin)] {
        if !v.is_positive() {
            return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
        }
    }
    let num = radius * radius * u_norm * u_norm;
    Ok(num / (margin * margin))
}
