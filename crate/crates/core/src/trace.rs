//! Per-step records of an online run.

use serde::{Deserialize, Serialize};

use crate::bits::{BitVec, Label};
use crate::exact::{serde_rat, Rat};

/// What happened on one example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub predicted: Label,
    pub mistake: bool,
    pub score: Rat,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    /// 1-based position in the stream.
    pub step: usize,
    pub x: BitVec,
    pub label: Label,
    pub prediction: Label,
    pub mistake: bool,
    #[serde(with = "serde_rat")]
    pub score: Rat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub steps: Vec<TraceStep>,
}

impl Trace {
    pub fn push(&mut self, x: &BitVec, label: Label, outcome: &Outcome) {
        self.steps.push(TraceStep {
            step: self.steps.len() + 1,
            x: x.clone(),
            label,
            prediction: outcome.predicted,
            mistake: outcome.mistake,
            score: outcome.score.clone(),
            stage: None,
        });
    }

    pub fn mistakes(&self) -> usize {
        self.steps.iter().filter(|s| s.mistake).count()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Running mistake count after each step.
    pub fn cumulative_mistakes(&self) -> Vec<usize> {
        self.steps
            .iter()
            .scan(0, |acc, s| {
                *acc += usize::from(s.mistake);
                Some(*acc)
            })
            .collect()
    }
}
