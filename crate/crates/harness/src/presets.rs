//! Named, serialisable experiment configurations.

use boolkernel::adversarial::HardSetParams;
use boolkernel::exact::{rat, serde_int, serde_rat, Int, Rat};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Hard-set dimensions; the seed comes from the enclosing preset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardSetShape {
    pub n: usize,
    pub weight: usize,
    pub cap: usize,
    pub count: usize,
    pub max_attempts: usize,
}

impl HardSetShape {
    /// `n = 320, w = 16, c = 4, t = 25`.
    pub fn desk() -> Self {
        let p = HardSetParams::desk(0);
        Self {
            n: p.n,
            weight: p.weight,
            cap: p.cap,
            count: p.count,
            max_attempts: p.max_attempts,
        }
    }

    pub fn params(&self, seed: u64) -> HardSetParams {
        HardSetParams {
            n: self.n,
            weight: self.weight,
            cap: self.cap,
            count: self.count,
            seed,
            max_attempts: self.max_attempts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "module", rename_all = "kebab-case")]
pub enum Experiment {
    /// Standard mistake sequence with an exact certificate before every
    /// hard-set example.
    MistakeForcing {
        hard_set: HardSetShape,
        #[serde(with = "serde_rat")]
        theta: Rat,
    },
    /// The sequence chosen for a fixed Perceptron threshold.
    ThresholdCase {
        hard_set: HardSetShape,
        #[serde(with = "serde_rat")]
        theta: Rat,
    },
    /// Perceptron trained on i.i.d. draws from the hard-set distribution;
    /// run `r` uses seed `seed + r`.
    Pac {
        hard_set: HardSetShape,
        sample_size: usize,
        runs: usize,
        forced_prefix: bool,
    },
    /// Build, replay and verify a Winnow prediction instance.
    Reduction {
        n: usize,
        clauses: Vec<(usize, usize)>,
        #[serde(with = "serde_int")]
        k: Int,
        #[serde(with = "serde_rat")]
        alpha: Rat,
        /// `θ = 2^theta_exp`; `m - 6` when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta_exp: Option<u64>,
    },
}

impl Experiment {
    pub fn module(&self) -> &'static str {
        match self {
            Experiment::MistakeForcing { .. } => "mistake-forcing",
            Experiment::ThresholdCase { .. } => "threshold-case",
            Experiment::Pac { .. } => "pac",
            Experiment::Reduction { .. } => "reduction",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub seed: u64,
    #[serde(flatten)]
    pub experiment: Experiment,
}

impl Preset {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| HarnessError::Config(format!("preset: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("presets serialise")
    }
}

pub fn builtin() -> Vec<Preset> {
    let desk = HardSetShape::desk;
    vec![
        Preset {
            name: "mistake-forcing".into(),
            description: "monotone kernel Perceptron errs on all t + 2 examples (n=320, w=16, c=4, t=25)".into(),
            seed: 1,
            experiment: Experiment::MistakeForcing {
                hard_set: desk(),
                theta: rat(0, 1),
            },
        },
        Preset {
            name: "pac-sample".into(),
            description: "exact error after 100 i.i.d. draws behind a forced 0^n, 1^n prefix, 50 seeds".into(),
            seed: 1,
            experiment: Experiment::Pac {
                hard_set: desk(),
                sample_size: 100,
                runs: 50,
                forced_prefix: true,
            },
        },
        Preset {
            name: "threshold-negative".into(),
            description: "threshold -2: repeated 0^n, then 1^n, then the hard set".into(),
            seed: 1,
            experiment: Experiment::ThresholdCase {
                hard_set: desk(),
                theta: rat(-2, 1),
            },
        },
        Preset {
            name: "threshold-large".into(),
            description: "threshold 8 above the forcing margin: repeated e_1 under x_1 v ... v x_n".into(),
            seed: 1,
            experiment: Experiment::ThresholdCase {
                hard_set: HardSetShape {
                    n: 16,
                    weight: 4,
                    cap: 1,
                    count: 1,
                    max_attempts: 10_000,
                },
                theta: rat(8, 1),
            },
        },
        Preset {
            name: "reduction-n2".into(),
            description: "F = y1 v y2, K = 1, alpha = 2, theta = 2^425; full verification".into(),
            seed: 0,
            experiment: Experiment::Reduction {
                n: 2,
                clauses: vec![(1, 2)],
                k: Int::from(1),
                alpha: rat(2, 1),
                theta_exp: Some(425),
            },
        },
        Preset {
            name: "reduction-n3".into(),
            description: "F = (y1 v y2)(y2 v y3), K = 5, alpha = 2, theta = 2^(m-6); full verification".into(),
            seed: 0,
            experiment: Experiment::Reduction {
                n: 3,
                clauses: vec![(1, 2), (2, 3)],
                k: Int::from(5),
                alpha: rat(2, 1),
                theta_exp: None,
            },
        },
    ]
}

pub fn find(name: &str) -> Result<Preset> {
    builtin()
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| {
            let names: Vec<String> = builtin().into_iter().map(|p| p.name).collect();
            HarnessError::Config(format!("unknown preset {name:?}; known: {}", names.join(", ")))
        })
}
