//! WebAssembly bindings for the static page in `www/`.
//!
//! Each export has a plain twin returning `Result<String, String>` so the
//! logic is testable off the browser.

use boolkernel::adversarial::{gen_hard_set, threshold_case_sequence, HardSetParams};
use boolkernel::exact::{parse_rat, pow2, rat, Int, Rat};
use boolkernel::kernels::{kernel, KernelKind};
use boolkernel::perceptron::{run, PerceptronConfig};
use boolkernel::reduction::{build_kwp, count_sat, default_theta_exp, parse_clauses, M2SatInstance};
use boolkernel::winnow::{kwp_decide, KwpOptions};
use boolkernel::BitVec;
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Largest `n` the page will reduce; `n = 3` already means ~64k updates.
pub const MAX_REDUCTION_N: usize = 3;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

pub fn kernel_value(kind: &str, x: &str, y: &str) -> Result<String, String> {
    let kind: KernelKind = kind.parse().map_err(err)?;
    let x: BitVec = x.trim().parse().map_err(err)?;
    let y: BitVec = y.trim().parse().map_err(err)?;
    Ok(kernel(kind, &x, &y).map_err(err)?.to_string())
}

/// Cumulative mistakes of the monotone kernel Perceptron on the sequence
/// chosen for `theta` against a fresh hard set.
pub fn mistake_curve_json(n: usize, w: usize, c: usize, t: usize, theta: &str, seed: u32) -> Result<String, String> {
    let theta: Rat = parse_rat(theta.trim()).map_err(err)?;
    let params = HardSetParams {
        n,
        weight: w,
        cap: c,
        count: t,
        seed: seed as u64,
        max_attempts: 20_000,
    };
    let hs = gen_hard_set(&params).map_err(err)?;
    let case = threshold_case_sequence(&theta, &hs);
    let cfg = PerceptronConfig::new(KernelKind::MonotoneConjunctions).with_threshold(theta);
    let r = run(&cfg, &case.sequence).map_err(err)?;
    Ok(json!({
        "regime": case.regime,
        "repetitions": case.repetitions,
        "steps": r.trace.len(),
        "mistakes": r.mistakes(),
        "cumulative": r.trace.cumulative_mistakes(),
    })
    .to_string())
}

/// Builds the Winnow instance for `F` and `K` (`α = 2`, `θ = 2^(m-6)`),
/// runs it and compares the prediction with a brute-force model count.
pub fn reduction_json(n: usize, clauses: &str, k: &str) -> Result<String, String> {
    if n > MAX_REDUCTION_N {
        return Err(format!("n = {n} is too large for the page (max {MAX_REDUCTION_N})"));
    }
    let k: Int = k.trim().parse().map_err(|_| format!("bad K {k:?}"))?;
    let f = M2SatInstance::new(n, parse_clauses(clauses).map_err(err)?, k).map_err(err)?;
    let alpha = rat(2, 1);
    let e = default_theta_exp(n, &alpha).map_err(err)?;
    let (inst, params) = build_kwp(&f, &alpha, &Rat::from_integer(pow2(e))).map_err(err)?;
    let stream = inst.stream();
    let answer = kwp_decide(&stream, &inst.z, &inst.config().map_err(err)?, KwpOptions::default()).map_err(err)?;
    let count = count_sat(&f.cnf()).map_err(err)?;
    Ok(json!({
        "m": params.m,
        "theta_exp": e,
        "examples": stream.len(),
        "count": count.to_string(),
        "k": f.k.to_string(),
        "decision": answer.decision,
        "expected": count >= f.k,
    })
    .to_string())
}

#[wasm_bindgen]
pub fn kernel_eval(kind: &str, x: &str, y: &str) -> Result<String, JsError> {
    kernel_value(kind, x, y).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn mistake_curve(n: usize, w: usize, c: usize, t: usize, theta: &str, seed: u32) -> Result<String, JsError> {
    mistake_curve_json(n, w, c, t, theta, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn reduction_decide(n: usize, clauses: &str, k: &str) -> Result<String, JsError> {
    reduction_json(n, clauses, k).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn kernel_value_counts_shared_monomials() {
        assert_eq!(kernel_value("monotone", "1101", "0111").unwrap(), "4");
        assert!(kernel_value("monotone", "1", "10").is_err());
        assert!(kernel_value("nope", "1", "1").is_err());
    }

    #[test]
    fn curve_is_cumulative() {
        let v: Value = serde_json::from_str(&mistake_curve_json(320, 16, 4, 25, "0", 1).unwrap()).unwrap();
        let cum = v["cumulative"].as_array().unwrap();
        assert_eq!(cum.len(), 27);
        assert_eq!(cum.last().unwrap(), 27);
    }

    #[test]
    fn reduction_matches_count() {
        let v: Value = serde_json::from_str(&reduction_json(2, "1,2", "4").unwrap()).unwrap();
        assert_eq!(v["count"], "3");
        assert_eq!(v["decision"], false);
        assert_eq!(v["decision"], v["expected"]);
        assert!(reduction_json(4, "1,2", "1").is_err());
    }
}
