//! Preset runners. Each returns the trace, a one-row summary and a
//! module-specific JSON report; nothing here touches the filesystem.

use std::collections::BTreeSet;

use boolkernel::adversarial::{
    build_mistake_sequence, certificate, forcing_margin, gen_hard_set, mistake_forcing_condition,
    threshold_case_sequence, Atom, PacDistribution, ThresholdRegime,
};
use boolkernel::exact::{binomial_sum, fmt_rat, pow2, rat, Int, Rat};
use boolkernel::kernels::KernelKind;
use boolkernel::perceptron::{run, DualPerceptron, PerceptronConfig};
use boolkernel::reduction::{
    build_kwp, check_monotone_consistent, default_theta_exp, verify_inequalities, verify_trace, M2SatInstance,
};
use boolkernel::{Error as CoreError, Trace};
use num_traits::ToPrimitive;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::Result;
use crate::presets::{Experiment, HardSetShape, Preset};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub preset: String,
    pub module: String,
    pub seed: u64,
    pub steps: usize,
    pub mistakes: usize,
    pub status: String,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: Summary,
    pub trace: Trace,
    pub report: Value,
}

pub fn run_preset(preset: &Preset) -> Result<RunOutput> {
    let (trace, report) = match &preset.experiment {
        Experiment::MistakeForcing { hard_set, theta } => mistake_forcing(hard_set, theta, preset.seed)?,
        Experiment::ThresholdCase { hard_set, theta } => threshold_case(hard_set, theta, preset.seed)?,
        Experiment::Pac {
            hard_set,
            sample_size,
            runs,
            forced_prefix,
        } => pac(hard_set, *sample_size, *runs, *forced_prefix, preset.seed)?,
        Experiment::Reduction {
            n,
            clauses,
            k,
            alpha,
            theta_exp,
        } => reduction(*n, clauses, k, alpha, *theta_exp)?,
    };
    Ok(RunOutput {
        summary: Summary {
            preset: preset.name.clone(),
            module: preset.experiment.module().into(),
            seed: preset.seed,
            steps: trace.len(),
            mistakes: trace.mistakes(),
            status: "ok".into(),
        },
        trace,
        report,
    })
}

fn assertion(step: usize, claim: String) -> CoreError {
    CoreError::AssertionFailure { step, claim }
}

fn monotone(theta: &Rat) -> PerceptronConfig {
    PerceptronConfig::new(KernelKind::MonotoneConjunctions).with_threshold(theta.clone())
}

fn mistake_forcing(shape: &HardSetShape, theta: &Rat, seed: u64) -> Result<(Trace, Value)> {
    let (w, c, t) = (shape.weight, shape.cap, shape.count);
    if !mistake_forcing_condition(w, c, t) {
        return Err(CoreError::ParameterViolation(format!(
            "forcing margin {} does not exceed t + 1 = {}",
            forcing_margin(w, c, t),
            t + 1
        ))
        .into());
    }
    let hs = gen_hard_set(&shape.params(seed))?;
    let private_floor = Rat::from_integer(binomial_sum(w as u64, c as u64 + 1, w as u64));
    let shared_floor = -Rat::from_integer(binomial_sum(w as u64, 0, c as u64) * Int::from(t));

    let mut state = DualPerceptron::new(monotone(theta))?;
    let mut trace = Trace::default();
    let mut certs = Vec::new();
    for (k, e) in build_mistake_sequence(&hs).iter().enumerate() {
        let step = k + 1;
        if k >= 2 {
            let cert = certificate(&state, &hs, k - 2)?;
            let shared = &cert.sum_a + &cert.w_empty + &cert.bias;
            if cert.sum_b < private_floor {
                return Err(assertion(step, format!("private sum {} below {}", cert.sum_b, private_floor)).into());
            }
            if shared < shared_floor {
                return Err(assertion(step, format!("shared sum {shared} below {shared_floor}")).into());
            }
            if cert.score < *theta {
                return Err(assertion(step, format!("score {} below threshold", fmt_rat(&cert.score))).into());
            }
            certs.push(json!({
                "step": step,
                "sum_a": fmt_rat(&cert.sum_a),
                "sum_b": fmt_rat(&cert.sum_b),
                "w_empty": fmt_rat(&cert.w_empty),
                "score": fmt_rat(&cert.score),
                "shared_monomials": cert.a_count,
                "private_monomials": cert.b_count,
            }));
        }
        let out = state.update(e)?;
        trace.push(&e.x, e.label, &out);
    }
    let report = json!({
        "hard_set": hs.vectors.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
        "forcing_margin": forcing_margin(w, c, t).to_string(),
        "private_floor": fmt_rat(&private_floor),
        "shared_floor": fmt_rat(&shared_floor),
        "certificates": certs,
    });
    Ok((trace, report))
}

fn threshold_case(shape: &HardSetShape, theta: &Rat, seed: u64) -> Result<(Trace, Value)> {
    let hs = gen_hard_set(&shape.params(seed))?;
    let case = threshold_case_sequence(theta, &hs);
    let r = run(&monotone(theta), &case.sequence)?;
    let flags: Vec<bool> = r.trace.steps.iter().map(|s| s.mistake).collect();
    let lead = case.repetitions.min(flags.len());
    let leading_mistakes = flags[..lead].iter().filter(|m| **m).count();
    let (ones_mistake, hard_mistakes) = match case.regime {
        ThresholdRegime::Negative => (Some(flags[lead]), flags[lead + 1..].iter().filter(|m| **m).count()),
        ThresholdRegime::Standard => (Some(flags[1]), flags[2..].iter().filter(|m| **m).count()),
        ThresholdRegime::Large => (None, 0),
    };
    let report = json!({
        "regime": case.regime,
        "target": case.target,
        "repetitions": case.repetitions,
        "leading_mistakes": leading_mistakes,
        "ones_mistake": ones_mistake,
        "hard_set_size": hs.len(),
        "hard_set_mistakes": hard_mistakes,
        "forcing_margin": forcing_margin(shape.weight, shape.cap, shape.count).to_string(),
    });
    Ok((r.trace, report))
}

/// Per-run facts of a PAC experiment.
#[derive(Debug, Clone, Serialize)]
pub struct PacRun {
    pub seed: u64,
    pub error: String,
    pub error_f64: f64,
    pub distinct_seen: usize,
    pub unseen_all_misclassified: bool,
    pub meets_unseen_bound: bool,
    pub prefix_hit: bool,
}

pub fn pac_runs(
    shape: &HardSetShape,
    sample_size: usize,
    runs: usize,
    forced_prefix: bool,
    seed: u64,
) -> Result<(Vec<PacRun>, Vec<Trace>)> {
    let d = PacDistribution::new(gen_hard_set(&shape.params(seed))?)?;
    let t = d.hard_set.len();
    let mut rows = Vec::with_capacity(runs);
    let mut traces = Vec::with_capacity(runs);
    for r in 0..runs as u64 {
        let s = seed + r;
        let out = if forced_prefix {
            boolkernel::adversarial::pac_experiment_with_prefix(&d, sample_size, s)?
        } else {
            boolkernel::adversarial::pac_experiment(&d, sample_size, s)?
        };
        let unseen: BTreeSet<usize> = (0..t).filter(|i| !out.seen.contains(i)).collect();
        let unseen_all_misclassified = unseen.iter().all(|&i| out.misclassified.contains(&Atom::Hard(i)));
        let bound = rat(1, 2) * Rat::new(Int::from(unseen.len()), Int::from(t));
        rows.push(PacRun {
            seed: s,
            error: fmt_rat(&out.error),
            error_f64: ratio_f64(&out.error),
            distinct_seen: out.seen.len(),
            unseen_all_misclassified,
            meets_unseen_bound: out.error >= bound,
            prefix_hit: out.prefix_hit,
        });
        traces.push(out.run.trace);
    }
    Ok((rows, traces))
}

/// Display-only conversion; exact values are kept alongside.
pub fn ratio_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

fn pac(shape: &HardSetShape, sample_size: usize, runs: usize, forced_prefix: bool, seed: u64) -> Result<(Trace, Value)> {
    let (rows, mut traces) = pac_runs(shape, sample_size, runs, forced_prefix, seed)?;
    let total: Rat = rows
        .iter()
        .map(|r| boolkernel::exact::parse_rat(&r.error).expect("own output"))
        .sum();
    let mean = if rows.is_empty() {
        Rat::from_integer(0.into())
    } else {
        total / Rat::from_integer(Int::from(rows.len()))
    };
    let report = json!({
        "sample_size": sample_size,
        "forced_prefix": forced_prefix,
        "mean_error": fmt_rat(&mean),
        "mean_error_f64": ratio_f64(&mean),
        "runs": rows,
    });
    let trace = if traces.is_empty() { Trace::default() } else { traces.swap_remove(0) };
    Ok((trace, report))
}

fn reduction(
    n: usize,
    clauses: &[(usize, usize)],
    k: &Int,
    alpha: &Rat,
    theta_exp: Option<u64>,
) -> Result<(Trace, Value)> {
    let theta_exp = match theta_exp {
        Some(e) => e,
        None => default_theta_exp(n, alpha)?,
    };
    let theta = Rat::from_integer(pow2(theta_exp));
    let f = M2SatInstance::new(n, clauses.to_vec(), k.clone())?;
    let (inst, params) = build_kwp(&f, alpha, &theta)?;
    check_monotone_consistent(&inst.stream())?;
    let ineq = verify_inequalities(&params, &f)?;
    if let Some(bad) = ineq.failures().next() {
        return Err(assertion(0, format!("inequality {} fails: {}", bad.name, bad.describe())).into());
    }
    let mut rep = verify_trace(&inst)?;
    let trace = std::mem::take(&mut rep.trace);
    let report = json!({
        "theta_exp": theta_exp,
        "inequalities": ineq,
        "trace": rep,
        "stage_lengths": (1..=4).map(|s| inst.stage_len(s)).collect::<Vec<_>>(),
    });
    Ok((trace, report))
}
