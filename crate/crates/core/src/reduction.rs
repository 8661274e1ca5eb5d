//! Reduction from counting satisfying assignments of a monotone 2-CNF to
//! predicting with kernel Winnow over all monotone monomials.
//!
//! Variables `x_1..x_m` split into `A = x_1..x_n` (the formula variables),
//! `B = x_{n+1}..x_{n+U}` (used to dial in a correction term) and the slack
//! block `C`. The query is `z = 1^{n+U} 0^{m-n-U}`, so the final score is
//! `M_A + M_B + M_AB`, the weight sums over monomials inside `A`, inside `B`
//! and straddling both. The example stream is built in four stages:
//!
//! 1. per clause, `V` false-positive negatives that push every monomial of a
//!    falsifying assignment down to weight `<= α^-V`;
//! 2. `q` promotions on `A` plus one slack bit, scaling `M_A` by `α^q`;
//! 3. the same clause trick on `B` with a CNF that has exactly `p` models;
//! 4. promotions on `B` that scale `M_B` to just above `θ - α^q K` minus the
//!    fixed `M_AB`.
//!
//! Each false positive is forced by a gadget of six fresh slack bits whose
//! pairs are first promoted until their weight sum crosses `θ`.
//!
//! `log α` in the size formulas is base 2; every ceiling is taken exactly
//! via [`ceil_log`] against powers of two.

use std::collections::HashMap;

use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::bits::{BitVec, Label, LabeledExample};
use crate::error::{Error, Result};
use crate::exact::{ceil_rat, fmt_rat, pow2, rat, rat_pow, serde_int, serde_rat, Int, Rat};
use crate::trace::Trace;
use crate::winnow::{SparseMonomialWeights, WinnowConfig, DEFAULT_SUPPORT_GUARD};

pub use crate::exact::ceil_log;

/// Largest variable count [`count_sat`] enumerates.
pub const COUNT_GUARD: usize = 24;

/// Does the monotone 2-CNF `F` over `y_1..y_n` have at least `K` models?
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct M2SatInstance {
    pub n: usize,
    /// `(i1, i2)` is the clause `y_i1 ∨ y_i2`, 1-based; `i1 == i2` allowed.
    pub clauses: Vec<(usize, usize)>,
    #[serde(with = "serde_int")]
    pub k: Int,
}

impl M2SatInstance {
    pub fn new(n: usize, clauses: Vec<(usize, usize)>, k: Int) -> Result<Self> {
        let inst = Self { n, clauses, k };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("M2SAT needs at least one variable".into()));
        }
        for &(a, b) in &self.clauses {
            for i in [a, b] {
                if i == 0 || i > self.n {
                    return Err(Error::IndexOutOfRange { index: i, len: self.n });
                }
            }
        }
        if self.clauses.len() > self.n * self.n {
            return Err(Error::InvalidParameter(format!(
                "{} clauses exceed the n^2 = {} limit",
                self.clauses.len(),
                self.n * self.n
            )));
        }
        if self.k < Int::one() || self.k > pow2(self.n as u64) {
            return Err(Error::InvalidParameter(format!(
                "K = {} outside 1..=2^{}",
                self.k, self.n
            )));
        }
        Ok(())
    }

    pub fn cnf(&self) -> MonotoneCnf {
        MonotoneCnf {
            vars: self.n,
            clauses: self
                .clauses
                .iter()
                .map(|&(a, b)| {
                    let mut c = vec![a.min(b), a.max(b)];
                    c.dedup();
                    c
                })
                .collect(),
        }
    }
}

/// Parses `"1,2;1,3"` into clause pairs. A single index `"2"` means `y_2 ∨ y_2`.
pub fn parse_clauses(s: &str) -> Result<Vec<(usize, usize)>> {
    let bad = |c: &str| Error::InvalidParameter(format!("bad clause {c:?}"));
    s.split(';')
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .map(|c| {
            let idx: Vec<usize> = c
                .split(',')
                .map(|t| t.trim().parse().map_err(|_| bad(c)))
                .collect::<Result<_>>()?;
            match idx[..] {
                [a] => Ok((a, a)),
                [a, b] => Ok((a, b)),
                _ => Err(bad(c)),
            }
        })
        .collect()
}

/// Conjunction of disjunctions of positive literals over `x_1..x_vars`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonotoneCnf {
    pub vars: usize,
    /// Each clause is a sorted list of 1-based variable indices.
    pub clauses: Vec<Vec<usize>>,
}

impl MonotoneCnf {
    pub fn validate(&self) -> Result<()> {
        for c in &self.clauses {
            if c.is_empty() {
                return Err(Error::InvalidParameter("empty clause".into()));
            }
            if let Some(&i) = c.iter().find(|&&i| i == 0 || i > self.vars) {
                return Err(Error::IndexOutOfRange { index: i, len: self.vars });
            }
        }
        Ok(())
    }

    /// Clause masks with bit `i - 1` standing for variable `i`.
    fn masks(&self) -> Vec<u64> {
        self.clauses
            .iter()
            .map(|c| c.iter().fold(0u64, |m, &i| m | 1 << (i - 1)))
            .collect()
    }

    /// Truth value under the assignment whose bit `i - 1` is `y_i`.
    pub fn eval(&self, assignment: u64) -> bool {
        self.masks().iter().all(|m| m & assignment != 0)
    }
}

/// Number of satisfying assignments, by enumeration.
pub fn count_sat(f: &MonotoneCnf) -> Result<Int> {
    f.validate()?;
    if f.vars > COUNT_GUARD {
        return Err(Error::GuardExceeded {
            what: "model-count variables",
            actual: f.vars,
            limit: COUNT_GUARD,
        });
    }
    let masks = f.masks();
    let count = (0u64..1 << f.vars)
        .filter(|a| masks.iter().all(|m| m & a != 0))
        .count();
    Ok(Int::from(count))
}

/// Monotone CNF over `ℓ` variables with at most `ℓ` clauses and exactly `p`
/// models, `1 <= p <= 2^ℓ - 1`. With `h = 2^{ℓ-1}`:
/// `p < h` adds the unit clause `{x_ℓ}` to `F_{ℓ-1,p}`, `p == h` is `{x_ℓ}`
/// alone, and `p > h` adds `x_ℓ` to every clause of `F_{ℓ-1,p-h}`.
pub fn cnf_with_models(vars: usize, p: &Int) -> Result<MonotoneCnf> {
    if vars == 0 || *p < Int::one() || *p >= pow2(vars as u64) {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= p <= 2^{vars} - 1, got p = {p}"
        )));
    }
    Ok(MonotoneCnf {
        vars,
        clauses: cnf_with_models_clauses(vars, p),
    })
}

fn cnf_with_models_clauses(l: usize, p: &Int) -> Vec<Vec<usize>> {
    if l == 1 {
        return vec![vec![1]];
    }
    let half = pow2(l as u64 - 1);
    match p.cmp(&half) {
        std::cmp::Ordering::Less => {
            let mut c = cnf_with_models_clauses(l - 1, p);
            c.push(vec![l]);
            c
        }
        std::cmp::Ordering::Equal => vec![vec![l]],
        std::cmp::Ordering::Greater => cnf_with_models_clauses(l - 1, &(p - &half))
            .into_iter()
            .map(|mut c| {
                c.push(l);
                c
            })
            .collect(),
    }
}

fn pow2r(e: usize) -> Rat {
    Rat::from_integer(pow2(e as u64))
}

/// `ε` used for the `α >= 1 + 1/m^{1-ε}` check when none is given.
pub fn default_epsilon() -> Rat {
    rat(1, 2)
}

/// Sizes and exponents of the construction; everything here is independent
/// of `K`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionParams {
    pub n: usize,
    #[serde(with = "serde_rat")]
    pub alpha: Rat,
    #[serde(with = "serde_rat")]
    pub theta: Rat,
    #[serde(with = "serde_rat")]
    pub epsilon: Rat,
    pub u: usize,
    pub v: usize,
    pub w: usize,
    pub m: usize,
    pub q: u64,
    /// `⌈log_α 4⌉`
    pub c: u64,
    /// `⌈log_α(θ/3)⌉`, promotions per gadget pair.
    pub gadget_reps: u64,
    /// `⌈(U - n) / log₂ α⌉`
    pub split: u64,
}

impl ReductionParams {
    /// Length of the first Stage 4 run (`B` plus `x_{m-1}`).
    pub fn stage4_first(&self) -> u64 {
        self.q - self.split
    }

    /// Length of the second Stage 4 run (`B` plus `x_m`).
    pub fn stage4_second(&self) -> u64 {
        self.split - self.c
    }

    /// Index of the single Stage 2 slack bit.
    pub fn stage2_slack(&self) -> usize {
        self.n + self.u + 6 * self.v * self.n * self.n + 1
    }

    pub fn z(&self) -> BitVec {
        BitVec::from_positions(self.m, 1..=self.n + self.u).expect("n + U <= m")
    }

    fn alpha_pow(&self, e: i64) -> Rat {
        rat_pow(&self.alpha, e)
    }
}

/// The `K`-dependent part: `D = θ - (2^n-1)(2^U-1) - α^q K` and the smallest
/// integer `p > 1` with `D <= p α^{q-c} < D + α^q / 4`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Calibration {
    #[serde(with = "serde_int")]
    pub k: Int,
    #[serde(with = "serde_rat")]
    pub d: Rat,
    #[serde(with = "serde_int")]
    pub p: Int,
}

pub fn compute_params(n: usize, alpha: &Rat, theta: &Rat) -> Result<ReductionParams> {
    compute_params_with(n, alpha, theta, &default_epsilon())
}

/// `m - 6` for the parameters `n`, `α`; `m` does not depend on `θ`.
pub fn default_theta_exp(n: usize, alpha: &Rat) -> Result<u64> {
    // any θ large enough to pass validation yields the same m
    let mut e = 64u64;
    loop {
        match compute_params(n, alpha, &Rat::from_integer(pow2(e))) {
            Ok(p) => return Ok(p.m as u64 - 6),
            Err(Error::ParameterViolation(_)) if e < 1 << 16 => e *= 2,
            Err(err) => return Err(err),
        }
    }
}

/// Derives every size from `n`, `α`, `θ` and validates the construction for
/// both extreme values of `K`.
pub fn compute_params_with(
    n: usize,
    alpha: &Rat,
    theta: &Rat,
    epsilon: &Rat,
) -> Result<ReductionParams> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    if *alpha <= Rat::one() || *theta < Rat::one() {
        return Err(Error::InvalidParameter(format!(
            "need α > 1 and θ >= 1, got α = {}, θ = {}",
            fmt_rat(alpha),
            fmt_rat(theta)
        )));
    }
    if !epsilon.is_positive() || *epsilon > Rat::one() {
        return Err(Error::InvalidParameter(format!(
            "ε must lie in (0, 1], got {}",
            fmt_rat(epsilon)
        )));
    }
    let two = rat(2, 1);
    let to_usize = |v: i64| usize::try_from(v).expect("nonnegative size");
    let c = ceil_log(alpha, &rat(4, 1))?;
    let u = n + 1 + to_usize(ceil_log(&two, &rat_pow(alpha, c + 1))?);
    let v = to_usize(ceil_log(alpha, &pow2r(n + 1))? + 1);
    let w = to_usize(ceil_log(alpha, &pow2r(u + 2))? + 1);
    let m = n + u + 6 * v * n * n + 6 * u * w + 3;
    let q = ceil_log(alpha, &(theta / pow2r(n + 1)))? - 1;
    let split = ceil_log(alpha, &pow2r(u - n))?;
    let gadget = ceil_log(alpha, &(theta / rat(3, 1)))?;

    let violation = |msg: String| Err(Error::ParameterViolation(msg));
    if q - split <= 0 {
        return violation(format!(
            "stage 4 positivity: q - ⌈(U-n)/log α⌉ = {} - {} must be positive",
            q, split
        ));
    }
    if split < c {
        return violation(format!(
            "stage 4 positivity: ⌈(U-n)/log α⌉ - c = {} - {} is negative",
            split, c
        ));
    }
    if gadget < 1 {
        return violation(format!("gadget repetitions ⌈log_α(θ/3)⌉ = {gadget} must be positive"));
    }
    let params = ReductionParams {
        n,
        alpha: alpha.clone(),
        theta: theta.clone(),
        epsilon: epsilon.clone(),
        u,
        v,
        w,
        m,
        q: q as u64,
        c: c as u64,
        gadget_reps: gadget as u64,
        split: split as u64,
    };
    for k in [Int::one(), pow2(n as u64)] {
        let cal = calibrate(&params, &k)?;
        if let Some(bad) = inequality_checks(&params, &cal, None).into_iter().find(|c| !c.pass) {
            return violation(format!("{} (K = {}): {}", bad.name, k, bad.describe()));
        }
    }
    Ok(params)
}

pub fn calibrate(params: &ReductionParams, k: &Int) -> Result<Calibration> {
    if *k < Int::one() || *k > pow2(params.n as u64) {
        return Err(Error::InvalidParameter(format!(
            "K = {k} outside 1..=2^{}",
            params.n
        )));
    }
    let aq = params.alpha_pow(params.q as i64);
    let block = (pow2(params.n as u64) - 1) * (pow2(params.u as u64) - 1);
    let d = &params.theta - Rat::from_integer(block) - aq * Rat::from_integer(k.clone());
    let unit = params.alpha_pow(params.q as i64 - params.c as i64);
    let p = ceil_rat(&(&d / unit)).max(Int::from(2));
    Ok(Calibration {
        k: k.clone(),
        d,
        p,
    })
}

/// One exactly evaluated inequality.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    #[serde(with = "serde_rat")]
    pub lhs: Rat,
    pub relation: String,
    #[serde(with = "serde_rat")]
    pub rhs: Rat,
    pub pass: bool,
}

impl Check {
    fn new(name: &str, lhs: Rat, relation: &str, rhs: Rat) -> Self {
        let pass = match relation {
            "<" => lhs < rhs,
            "<=" => lhs <= rhs,
            "=" => lhs == rhs,
            _ => unreachable!("unknown relation"),
        };
        Self {
            name: name.to_string(),
            lhs,
            relation: relation.to_string(),
            rhs,
            pass,
        }
    }

    pub fn describe(&self) -> String {
        format!("{} {} {}", fmt_rat(&self.lhs), self.relation, fmt_rat(&self.rhs))
    }
}

fn inequality_checks(p: &ReductionParams, cal: &Calibration, count: Option<&Int>) -> Vec<Check> {
    let n = p.n;
    let q = p.q as i64;
    let c = p.c as i64;
    let aq = p.alpha_pow(q);
    let unit = p.alpha_pow(q - c);
    let theta = &p.theta;
    let d = &cal.d;
    let pr = Rat::from_integer(cal.p.clone());
    let quarter = rat(1, 4);
    let half = rat(1, 2);
    let one = Rat::one();
    let g1 = p.q as i64 - p.split as i64;
    let g2 = p.split as i64 - c;
    let gamma1 = pow2r(n) * p.alpha_pow(-(p.v as i64));
    let gamma2 = pow2r(p.u) * p.alpha_pow(-(p.w as i64));
    let top = p.alpha_pow(c + 1) * pow2r(n + 1) - rat(3, 1);

    // α - 1 >= m^{-(a/b)} with 1 - ε = a/b, raised to the b-th power
    let eps_frac = one.clone() - &p.epsilon;
    let a = eps_frac.numer().to_i64().expect("ε numerator fits in i64");
    let b = eps_frac.denom().to_i64().expect("ε denominator fits in i64");
    let eps_lhs = rat_pow(&(&p.alpha - &one), b) * rat_pow(&Rat::from_integer(Int::from(p.m)), a);

    let mut v = vec![
        Check::new("alpha-lower", one.clone(), "<=", eps_lhs),
        Check::new("q-window-lower", &aq * pow2r(n + 1), "<", theta.clone()),
        Check::new("q-window-upper", theta.clone(), "<=", p.alpha_pow(q + 1) * pow2r(n + 1)),
    ];
    if let Some(count) = count {
        let count = Rat::from_integer(count.clone());
        v.push(Check::new("ma-window-lower", aq.clone(), "<=", &aq * &count));
        v.push(Check::new("ma-window-upper", &aq * (&count + &gamma1), "<", &aq * pow2r(n)));
    }
    v.extend([
        Check::new("ma-below-half-theta", &aq * pow2r(n), "<", theta / rat(2, 1)),
        Check::new("mb-target-lower", d.clone(), "<=", &pr * &unit),
        Check::new("mb-target-upper", (&pr + &gamma2) * &unit, "<", d + &aq * &half),
        Check::new("unit-below-quarter", unit.clone(), "<=", &aq * &quarter),
        Check::new("d-above-quarter", &aq * &quarter, "<", d.clone()),
        Check::new("p-window", &pr * &unit, "<", d + &aq * &quarter),
        Check::new("d-below-theta", d + &aq * &quarter, "<=", theta - &aq * rat(3, 4)),
        Check::new(
            "theta-bound",
            theta - &aq * rat(3, 4),
            "<=",
            p.alpha_pow(q + 1) * pow2r(n + 1) - &unit * rat(3, 1),
        ),
        Check::new(
            "top-factor",
            p.alpha_pow(q + 1) * pow2r(n + 1) - &unit * rat(3, 1),
            "=",
            &unit * &top,
        ),
        Check::new("p-above-one", one.clone(), "<", pr.clone()),
        Check::new("p-below-top", pr.clone(), "<=", top.clone()),
        Check::new("top-below-2u", top, "<=", pow2r(p.u) - rat(3, 1)),
        Check::new(
            "stage4-total-step",
            &unit * (&pr + &quarter),
            "<=",
            theta - &aq * rat(3, 4) + &aq * rat(1, 16),
        ),
        Check::new("stage4-total", &unit * (&pr + &quarter), "<", theta - &aq * &half),
        Check::new("stage4-positive-first", Rat::zero(), "<", Rat::from_integer(g1.into())),
        Check::new("stage4-positive-second", Rat::zero(), "<=", Rat::from_integer(g2.into())),
        Check::new(
            "stage4-first-bound",
            p.alpha_pow(g1) * pow2r(p.u + 1),
            "<=",
            &aq * pow2r(n + 1),
        ),
        Check::new("stage4-final-bound", p.alpha_pow(g2) * pow2r(p.u), "<", &aq * &half),
        Check::new("stage2-start", pow2r(n + 1), "<", theta.clone()),
        Check::new("stage4-start", pow2r(p.u + 1), "<", theta.clone()),
        Check::new("gadget-start", rat(3, 1), "<", theta.clone()),
        Check::new("gamma1", gamma1, "<", half),
        Check::new("gamma2", gamma2, "<", quarter),
    ]);
    v
}

/// Every checked inequality with both sides, for one formula and `K`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub params: ReductionParams,
    pub calibration: Calibration,
    #[serde(with = "serde_int")]
    pub count: Int,
    pub checks: Vec<Check>,
    pub all_pass: bool,
}

impl InequalityReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

pub fn verify_inequalities(params: &ReductionParams, f: &M2SatInstance) -> Result<InequalityReport> {
    f.validate()?;
    if f.n != params.n {
        return Err(Error::InvalidParameter(format!(
            "formula has {} variables, parameters were derived for {}",
            f.n, params.n
        )));
    }
    let calibration = calibrate(params, &f.k)?;
    let count = count_sat(&f.cnf())?;
    let checks = inequality_checks(params, &calibration, Some(&count));
    let all_pass = checks.iter().all(|c| c.pass);
    Ok(InequalityReport {
        params: params.clone(),
        calibration,
        count,
        checks,
        all_pass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExampleRole {
    SlackPromotion,
    ClauseNegative,
    Stage2Promotion,
    Stage4Promotion,
}

impl ExampleRole {
    pub fn as_str(self) -> &'static str {
        match self {
            ExampleRole::SlackPromotion => "slack-promotion",
            ExampleRole::ClauseNegative => "clause-negative",
            ExampleRole::Stage2Promotion => "stage2-promotion",
            ExampleRole::Stage4Promotion => "stage4-promotion",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedExample {
    pub x: BitVec,
    pub label: Label,
    pub stage: u8,
    pub role: ExampleRole,
    /// Gadget number for slack promotions and the negative they serve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gadget: Option<usize>,
}

impl AnnotatedExample {
    pub fn example(&self) -> LabeledExample {
        LabeledExample::new(self.x.clone(), self.label)
    }

    pub fn tag(&self) -> String {
        format!("stage{}:{}", self.stage, self.role.as_str())
    }
}

/// An `m`-variable Winnow prediction instance built from an M2SAT instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KwpInstance {
    pub source: M2SatInstance,
    #[serde(with = "serde_rat")]
    pub alpha: Rat,
    #[serde(with = "serde_rat")]
    pub theta: Rat,
    pub m: usize,
    pub z: BitVec,
    pub examples: Vec<AnnotatedExample>,
}

impl KwpInstance {
    pub fn stream(&self) -> Vec<LabeledExample> {
        self.examples.iter().map(AnnotatedExample::example).collect()
    }

    pub fn config(&self) -> Result<WinnowConfig> {
        WinnowConfig::new(self.alpha.clone(), self.theta.clone())
    }

    pub fn stage_len(&self, stage: u8) -> usize {
        self.examples.iter().filter(|e| e.stage == stage).count()
    }
}

/// Hands out disjoint runs of six slack bits from a fixed index range.
struct SlackCursor {
    next: usize,
    end: usize,
}

impl SlackCursor {
    /// Returns `β`; the gadget owns `β+1 ..= β+6`.
    fn take(&mut self) -> Result<usize> {
        if self.next + 6 > self.end {
            return Err(Error::ParameterViolation(format!(
                "slack budget overflow: need bits up to {}, range ends at {}",
                self.next + 6,
                self.end
            )));
        }
        let beta = self.next;
        self.next += 6;
        Ok(beta)
    }
}

struct Builder {
    m: usize,
    reps: u64,
    gadgets: usize,
    out: Vec<AnnotatedExample>,
}

impl Builder {
    fn push(&mut self, x: BitVec, label: Label, stage: u8, role: ExampleRole, gadget: Option<usize>) {
        self.out.push(AnnotatedExample {
            x,
            label,
            stage,
            role,
            gadget,
        });
    }

    /// Three promotion groups on fresh slack pairs, then the negative on
    /// `base` plus the odd slack bits.
    fn clause_negative(&mut self, stage: u8, base: &[usize], beta: usize) -> Result<()> {
        let id = self.gadgets;
        self.gadgets += 1;
        for pair in [[1, 2], [3, 4], [5, 6]] {
            let x = BitVec::from_positions(self.m, pair.map(|o| beta + o))?;
            for _ in 0..self.reps {
                self.push(x.clone(), Label::Positive, stage, ExampleRole::SlackPromotion, Some(id));
            }
        }
        let x = BitVec::from_positions(
            self.m,
            base.iter().copied().chain([beta + 1, beta + 3, beta + 5]),
        )?;
        self.push(x, Label::Negative, stage, ExampleRole::ClauseNegative, Some(id));
        Ok(())
    }
}

/// Builds `(S, z)` such that Winnow's score on `z` after `S` reaches `θ`
/// exactly when `F` has at least `K` models.
pub fn build_kwp(f: &M2SatInstance, alpha: &Rat, theta: &Rat) -> Result<(KwpInstance, ReductionParams)> {
    f.validate()?;
    if f.clauses.is_empty() {
        return Err(Error::InvalidParameter("the formula needs at least one clause".into()));
    }
    let params = compute_params(f.n, alpha, theta)?;
    let cal = calibrate(&params, &f.k)?;
    let f_b = cnf_with_models(params.u, &cal.p)?;
    let (n, u, m) = (params.n, params.u, params.m);
    let mut b = Builder {
        m,
        reps: params.gadget_reps,
        gadgets: 0,
        out: Vec::new(),
    };

    let mut slack = SlackCursor {
        next: n + u,
        end: n + u + 6 * params.v * n * n,
    };
    for &(i1, i2) in &f.clauses {
        let base: Vec<usize> = (1..=n).filter(|&i| i != i1 && i != i2).collect();
        for _ in 0..params.v {
            let beta = slack.take()?;
            b.clause_negative(1, &base, beta)?;
        }
    }

    let s2 = params.stage2_slack();
    let x = BitVec::from_positions(m, (1..=n).chain([s2]))?;
    for _ in 0..params.q {
        b.push(x.clone(), Label::Positive, 2, ExampleRole::Stage2Promotion, None);
    }

    let mut slack = SlackCursor { next: s2, end: m - 2 };
    for clause in &f_b.clauses {
        let base: Vec<usize> = (1..=u)
            .filter(|j| !clause.contains(j))
            .map(|j| n + j)
            .collect();
        for _ in 0..params.w {
            let beta = slack.take()?;
            b.clause_negative(3, &base, beta)?;
        }
    }

    for (slack_bit, count) in [(m - 1, params.stage4_first()), (m, params.stage4_second())] {
        let x = BitVec::from_positions(m, (n + 1..=n + u).chain([slack_bit]))?;
        for _ in 0..count {
            b.push(x.clone(), Label::Positive, 4, ExampleRole::Stage4Promotion, None);
        }
    }

    let inst = KwpInstance {
        source: f.clone(),
        alpha: alpha.clone(),
        theta: theta.clone(),
        m,
        z: params.z(),
        examples: b.out,
    };
    Ok((inst, params))
}

/// First pair `(i, j)` of 1-based positions with `x_i <= x_j` pointwise,
/// `x_i` labelled positive and `x_j` negative. Repeated examples are
/// compared once, at their first occurrence.
pub fn monotone_violation(stream: &[LabeledExample]) -> Result<Option<(usize, usize)>> {
    let mut seen: HashMap<(&BitVec, Label), ()> = HashMap::new();
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (i, e) in stream.iter().enumerate() {
        if seen.insert((&e.x, e.label), ()).is_none() {
            match e.label {
                Label::Positive => pos.push((i + 1, &e.x)),
                Label::Negative => neg.push((i + 1, &e.x)),
            }
        }
    }
    for &(i, px) in &pos {
        for &(j, nx) in &neg {
            if px.leq(nx)? {
                return Ok(Some((i, j)));
            }
        }
    }
    Ok(None)
}

/// `Ok` when some monotone function labels `stream`; otherwise
/// [`Error::NotMonotoneConsistent`] with the pair from [`monotone_violation`].
pub fn check_monotone_consistent(stream: &[LabeledExample]) -> Result<()> {
    match monotone_violation(stream)? {
        None => Ok(()),
        Some((i, j)) => Err(Error::NotMonotoneConsistent(i, j)),
    }
}

/// Outcome of replaying an instance with every stage claim asserted.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceReport {
    pub steps: usize,
    pub mistakes: usize,
    pub claims_checked: usize,
    #[serde(with = "serde_int")]
    pub count: Int,
    #[serde(with = "serde_int")]
    pub k: Int,
    #[serde(with = "serde_rat")]
    pub m_a: Rat,
    #[serde(with = "serde_rat")]
    pub m_b: Rat,
    #[serde(with = "serde_rat")]
    pub m_ab: Rat,
    #[serde(with = "serde_rat")]
    pub score: Rat,
    pub decision: bool,
    pub expected: bool,
    #[serde(skip)]
    pub trace: Trace,
}

struct Replay<'a> {
    params: &'a ReductionParams,
    cal: Calibration,
    cnf: MonotoneCnf,
    state: SparseMonomialWeights,
    z_vars: Vec<u32>,
    claims: usize,
}

impl Replay<'_> {
    fn claim(&mut self, ok: bool, step: usize, claim: impl FnOnce() -> String) -> Result<()> {
        self.claims += 1;
        if ok {
            Ok(())
        } else {
            Err(Error::AssertionFailure { step, claim: claim() })
        }
    }

    /// `(M_A, M_B, M_AB)` over the monomials inside `support(z)`.
    fn block_sums(&self) -> (Rat, Rat, Rat) {
        let n = self.params.n;
        let a_mask = (1u64 << n) - 1;
        let b_mask = ((1u64 << self.params.u) - 1) << n;
        let s = |keep: &dyn Fn(u64) -> bool| self.state.subset_weight_sum(&self.z_vars, keep);
        (
            s(&|t| t & b_mask == 0),
            s(&|t| t & a_mask == 0),
            s(&|t| t & a_mask != 0 && t & b_mask != 0),
        )
    }

    fn end_of_stage(&mut self, stage: u8, step: usize) -> Result<()> {
        let p = self.params;
        let aq = p.alpha_pow(p.q as i64);
        match stage {
            1 => {
                let v = p.v as i64;
                for t in 1u64..1 << p.n {
                    let key: Vec<u32> = (0..p.n as u32).filter(|i| t >> i & 1 == 1).map(|i| i + 1).collect();
                    let e = self.state.exponent(&key);
                    let sat = self.cnf.eval(t);
                    self.claim(if sat { e == 0 } else { e <= -v }, step, || {
                        format!(
                            "after stage 1, monomial {key:?} has exponent {e}, expected {}",
                            if sat { "0".to_string() } else { format!("<= -{v}") }
                        )
                    })?;
                }
            }
            2 => {
                let (m_a, _, _) = self.block_sums();
                let ok = aq < m_a && m_a < &p.theta / rat(2, 1);
                self.claim(ok, step, || {
                    format!("after stage 2, M_A = {} is outside (α^q, θ/2)", fmt_rat(&m_a))
                })?;
            }
            3 => {
                let (_, m_b, _) = self.block_sums();
                let pr = Rat::from_integer(self.cal.p.clone());
                let ok = pr < m_b && m_b < &pr + rat(1, 4);
                self.claim(ok, step, || {
                    format!("after stage 3, M_B = {} is outside (p, p + 1/4)", fmt_rat(&m_b))
                })?;
            }
            4 => {
                let (_, m_b, m_ab) = self.block_sums();
                let d = &self.cal.d;
                let ok = *d <= m_b && m_b < d + &aq * rat(1, 2);
                self.claim(ok, step, || {
                    format!("after stage 4, M_B = {} is outside [D, D + α^q/2)", fmt_rat(&m_b))
                })?;
                let block = Rat::from_integer((pow2(p.n as u64) - 1) * (pow2(p.u as u64) - 1));
                self.claim(m_ab == block, step, || {
                    format!("after stage 4, M_AB = {} differs from (2^n-1)(2^U-1)", fmt_rat(&m_ab))
                })?;
            }
            _ => unreachable!("stages are 1..=4"),
        }
        Ok(())
    }
}

/// Replays `inst` through lazy kernel Winnow, asserting every per-stage claim
/// of the construction, and checks the final prediction on `z` against the
/// brute-force model count.
pub fn verify_trace(inst: &KwpInstance) -> Result<TraceReport> {
    let f = &inst.source;
    f.validate()?;
    let params = compute_params(f.n, &inst.alpha, &inst.theta)?;
    if params.m != inst.m || inst.z != params.z() {
        return Err(Error::InvalidParameter(format!(
            "instance has m = {}, parameters give m = {}",
            inst.m, params.m
        )));
    }
    let zn = params.n + params.u;
    if zn > DEFAULT_SUPPORT_GUARD {
        return Err(Error::GuardExceeded {
            what: "query support n + U",
            actual: zn,
            limit: DEFAULT_SUPPORT_GUARD,
        });
    }
    let cnf = f.cnf();
    let count = count_sat(&cnf)?;
    let mut r = Replay {
        params: &params,
        cal: calibrate(&params, &f.k)?,
        cnf,
        state: SparseMonomialWeights::new(inst.config()?, inst.m)?,
        z_vars: (1..=zn as u32).collect(),
        claims: 0,
    };
    let theta = &inst.theta;
    let alpha_theta = &inst.alpha * theta;
    let mut trace = Trace::default();
    let mut finished = Vec::new();

    for (i, a) in inst.examples.iter().enumerate() {
        let step = i + 1;
        if let Some(&last) = finished.last() {
            r.claim(a.stage > last, step, || format!("stage {} follows stage {last}", a.stage))?;
        }
        let e = a.example();
        let out = r.state.update(&e)?;
        trace.push(&e.x, e.label, &out);
        trace.steps.last_mut().unwrap().stage = Some(a.tag());
        match a.role {
            ExampleRole::ClauseNegative => r.claim(out.mistake, step, || {
                format!("clause negative scored {} < θ, no false positive", fmt_rat(&out.score))
            })?,
            role => r.claim(out.mistake, step, || {
                format!("{} scored {} >= θ, no promotion", role.as_str(), fmt_rat(&out.score))
            })?,
        }
        let next = inst.examples.get(i + 1);
        if a.role == ExampleRole::SlackPromotion && next.is_none_or(|b| b.x != a.x) {
            let s = r.state.lazy_score(&a.x)?;
            r.claim(*theta <= s && s < alpha_theta, step, || {
                format!("gadget pair weight {} is outside [θ, αθ)", fmt_rat(&s))
            })?;
        }
        if next.is_none_or(|b| b.stage != a.stage) {
            r.end_of_stage(a.stage, step)?;
            finished.push(a.stage);
        }
    }
    let steps = inst.examples.len();
    r.claim(finished == [1, 2, 3, 4], steps, || format!("stages present: {finished:?}"))?;

    let (m_a, m_b, m_ab) = r.block_sums();
    let score = r.state.lazy_score(&inst.z)?;
    r.claim(score == &m_a + &m_b + &m_ab, steps, || "score on z differs from M_A + M_B + M_AB".into())?;
    let decision = score >= *theta;
    let expected = count >= f.k;
    r.claim(decision == expected, steps, || {
        format!(
            "prediction on z is {decision} but the formula has {count} models against K = {}",
            f.k
        )
    })?;
    Ok(TraceReport {
        steps,
        mistakes: trace.mistakes(),
        claims_checked: r.claims,
        count,
        k: f.k.clone(),
        m_a,
        m_b,
        m_ab,
        score,
        decision,
        expected,
        trace,
    })
}
