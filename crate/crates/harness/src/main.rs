use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use boolkernel::adversarial::{gen_hard_set, threshold_case_sequence, HardSetParams};
use boolkernel::exact::{fmt_rat, parse_rat, pow2, Int, Rat};
use boolkernel::kernels::{kernel, KernelKind};
use boolkernel::perceptron::{self, PerceptronConfig};
use boolkernel::reduction::{
    build_kwp, compute_params, count_sat, default_theta_exp, parse_clauses, verify_inequalities, verify_trace,
    KwpInstance, M2SatInstance, MonotoneCnf,
};
use boolkernel::winnow::{self, kwp_decide, KwpOptions, SparseMonomialWeights, WinnowConfig, DEFAULT_SUPPORT_GUARD};
use boolkernel::{BitVec, LabeledExample, Trace};
use bklab::error::{exit, HarnessError, Result};
use bklab::output::{emit_plotdata, write_artifacts, write_summary};
use bklab::presets::{self, Preset};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

#[derive(Parser)]
#[command(name = "bklab", version, about = "Exact kernel Perceptron / Winnow laboratory")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Seed for every random draw; overrides a preset's own seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for multi-preset runs.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Support-size cap for lazy Winnow scoring.
    #[arg(long, global = true)]
    guard_override: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate K(x, y).
    KernelEval {
        /// all | monotone | bounded:K | bounded-monotone:K
        #[arg(long)]
        kind: KernelKind,
        #[arg(long)]
        x: BitVec,
        #[arg(long)]
        y: BitVec,
    },
    /// Run the dual kernel Perceptron over a JSON example stream.
    PerceptronRun {
        #[arg(long)]
        kind: KernelKind,
        /// JSON array of {"x": "0101", "label": 1}
        #[arg(long)]
        stream: PathBuf,
        #[arg(long, default_value = "0")]
        threshold: String,
        #[arg(long, default_value = "1")]
        rate: String,
        #[arg(long)]
        bias: bool,
        /// Use the explicit primal oracle instead.
        #[arg(long)]
        explicit: bool,
        /// Print step,mistake,cumulative_mistakes CSV instead of JSON.
        #[arg(long)]
        plot: bool,
    },
    /// Run Winnow over a JSON example stream.
    WinnowRun {
        #[arg(long)]
        stream: PathBuf,
        #[arg(long)]
        alpha: String,
        #[arg(long)]
        theta: String,
        /// Treat each x as raw features instead of expanding to all
        /// nonempty monotone monomials.
        #[arg(long)]
        explicit: bool,
    },
    /// Winnow over all monotone monomials: is w . phi(z) >= theta after the stream?
    KwpDecide {
        #[arg(long)]
        stream: PathBuf,
        #[arg(long)]
        z: BitVec,
        #[arg(long)]
        alpha: String,
        #[arg(long)]
        theta: String,
        /// Decide even when the stream is not monotone consistent.
        #[arg(long)]
        force: bool,
    },
    /// Generate a verified hard set.
    GenHardSet {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        w: usize,
        #[arg(long)]
        c: usize,
        #[arg(long)]
        t: usize,
        #[arg(long, default_value_t = 100_000)]
        max_attempts: usize,
    },
    /// Run the monotone kernel Perceptron on the sequence chosen for a threshold.
    AdversarialRun {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        w: usize,
        #[arg(long)]
        c: usize,
        #[arg(long)]
        t: usize,
        #[arg(long, default_value = "0")]
        theta: String,
        #[arg(long, default_value_t = 100_000)]
        max_attempts: usize,
    },
    /// Build a Winnow prediction instance from a monotone 2-CNF.
    BuildReduction {
        #[arg(long)]
        n: usize,
        /// Clauses as "1,2;1,3"
        #[arg(long)]
        clauses: String,
        #[arg(long = "K", alias = "k")]
        k: String,
        #[arg(long, default_value = "2")]
        alpha: String,
        /// theta = 2^E; defaults to m - 6
        #[arg(long)]
        theta_exp: Option<u64>,
        /// Write the instance here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay an instance and check every construction claim.
    VerifyReduction {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Count models of a monotone CNF given as JSON {"vars": n, "clauses": [[1,2], ...]}.
    CountSat {
        #[arg(long)]
        cnf: PathBuf,
    },
    /// Run named presets (or a preset JSON file) and write artifacts.
    RunPreset {
        names: Vec<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        all: bool,
    },
    /// List built-in presets.
    ListPresets {
        /// Print full JSON configurations.
        #[arg(long)]
        json: bool,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| HarnessError::io(path.display().to_string(), e))
}

fn read_stream(path: &Path) -> Result<Vec<LabeledExample>> {
    serde_json::from_str(&read(path)?).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
}

fn rat_arg(s: &str) -> Result<Rat> {
    Ok(parse_rat(s)?)
}

fn print_json(v: &serde_json::Value) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out).map_err(|e| HarnessError::io("stdout", e))
}

fn trace_json(trace: &Trace) -> serde_json::Value {
    json!({ "steps": trace.len(), "mistakes": trace.mistakes(), "trace": trace })
}

fn hard_set_params(g: &Global, n: usize, w: usize, c: usize, t: usize, max_attempts: usize) -> HardSetParams {
    HardSetParams {
        n,
        weight: w,
        cap: c,
        count: t,
        seed: g.seed.unwrap_or(1),
        max_attempts,
    }
}

fn execute(cli: Cli) -> Result<()> {
    let g = &cli.global;
    let guard = g.guard_override.unwrap_or(DEFAULT_SUPPORT_GUARD);
    match cli.command {
        Command::KernelEval { kind, x, y } => {
            println!("{}", kernel(kind, &x, &y)?);
        }
        Command::PerceptronRun {
            kind,
            stream,
            threshold,
            rate,
            bias,
            explicit,
            plot,
        } => {
            let cfg = PerceptronConfig::new(kind)
                .with_threshold(rat_arg(&threshold)?)
                .with_learning_rate(rat_arg(&rate)?)
                .with_bias(bias);
            let s = read_stream(&stream)?;
            let trace = if explicit {
                perceptron::explicit_run(&cfg, &s)?.0
            } else {
                perceptron::run(&cfg, &s)?.trace
            };
            if plot {
                emit_plotdata(&trace, io::stdout().lock())?;
            } else {
                print_json(&trace_json(&trace))?;
            }
        }
        Command::WinnowRun {
            stream,
            alpha,
            theta,
            explicit,
        } => {
            let cfg = WinnowConfig::new(rat_arg(&alpha)?, rat_arg(&theta)?)?;
            let s = read_stream(&stream)?;
            let dim = s.first().map_or(0, |e| e.x.len());
            let trace = if explicit {
                winnow::explicit_run(&cfg, dim, &s)?.0
            } else {
                let mut state = SparseMonomialWeights::new(cfg, dim)?.with_guard(guard);
                let mut trace = Trace::default();
                for e in &s {
                    let out = state.update(e)?;
                    trace.push(&e.x, e.label, &out);
                }
                trace
            };
            print_json(&trace_json(&trace))?;
        }
        Command::KwpDecide {
            stream,
            z,
            alpha,
            theta,
            force,
        } => {
            let cfg = WinnowConfig::new(rat_arg(&alpha)?, rat_arg(&theta)?)?;
            let s = read_stream(&stream)?;
            let a = kwp_decide(&s, &z, &cfg, KwpOptions { guard, force })?;
            print_json(&json!({
                "decision": a.decision,
                "score": fmt_rat(&a.score),
                "monotone_consistent": a.monotone_consistent,
            }))?;
        }
        Command::GenHardSet { n, w, c, t, max_attempts } => {
            let hs = gen_hard_set(&hard_set_params(g, n, w, c, t, max_attempts))?;
            print_json(&serde_json::to_value(&hs)?)?;
        }
        Command::AdversarialRun {
            n,
            w,
            c,
            t,
            theta,
            max_attempts,
        } => {
            let theta = rat_arg(&theta)?;
            let hs = gen_hard_set(&hard_set_params(g, n, w, c, t, max_attempts))?;
            let case = threshold_case_sequence(&theta, &hs);
            let cfg = PerceptronConfig::new(KernelKind::MonotoneConjunctions).with_threshold(theta);
            let r = perceptron::run(&cfg, &case.sequence)?;
            print_json(&json!({
                "regime": case.regime,
                "target": case.target,
                "repetitions": case.repetitions,
                "steps": r.trace.len(),
                "mistakes": r.mistakes(),
                "cumulative_mistakes": r.trace.cumulative_mistakes(),
            }))?;
        }
        Command::BuildReduction {
            n,
            clauses,
            k,
            alpha,
            theta_exp,
            out,
        } => {
            let alpha = rat_arg(&alpha)?;
            let k: Int = k.parse().map_err(|_| HarnessError::Config(format!("bad K {k:?}")))?;
            let f = M2SatInstance::new(n, parse_clauses(&clauses)?, k)?;
            let e = match theta_exp {
                Some(e) => e,
                None => default_theta_exp(n, &alpha)?,
            };
            let (inst, _) = build_kwp(&f, &alpha, &Rat::from_integer(pow2(e)))?;
            let text = serde_json::to_string(&inst)?;
            match out {
                Some(p) => fs::write(&p, text + "\n").map_err(|e| HarnessError::io(p.display().to_string(), e))?,
                None => println!("{text}"),
            }
        }
        Command::VerifyReduction { instance } => {
            let inst: KwpInstance = serde_json::from_str(&read(&instance)?)
                .map_err(|e| HarnessError::Config(format!("{}: {e}", instance.display())))?;
            let params = compute_params(inst.source.n, &inst.alpha, &inst.theta)?;
            let ineq = verify_inequalities(&params, &inst.source)?;
            let trace = verify_trace(&inst)?;
            let all_pass = ineq.all_pass && trace.decision == trace.expected;
            print_json(&json!({ "all_pass": all_pass, "inequalities": ineq, "trace": trace }))?;
            if !all_pass {
                let bad = ineq.failures().next().map(|c| c.name.clone()).unwrap_or_default();
                return Err(boolkernel::Error::AssertionFailure {
                    step: 0,
                    claim: format!("inequality {bad} fails"),
                }
                .into());
            }
        }
        Command::CountSat { cnf } => {
            let f: MonotoneCnf = serde_json::from_str(&read(&cnf)?)
                .map_err(|e| HarnessError::Config(format!("{}: {e}", cnf.display())))?;
            println!("{}", count_sat(&f)?);
        }
        Command::RunPreset { names, config, all } => {
            let mut list: Vec<Preset> = Vec::new();
            if all {
                list.extend(presets::builtin());
            }
            for name in &names {
                list.push(presets::find(name)?);
            }
            if let Some(path) = config {
                list.push(Preset::from_json(&read(&path)?)?);
            }
            if list.is_empty() {
                return Err(HarnessError::Config("no preset given".into()));
            }
            if let Some(seed) = g.seed {
                for p in &mut list {
                    p.seed = seed;
                }
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(g.jobs.max(1))
                .build()
                .map_err(|e| HarnessError::Config(e.to_string()))?;
            let results: Vec<Result<bklab::Summary>> = pool.install(|| {
                list.par_iter()
                    .map(|p| {
                        let run = bklab::run_preset(p)?;
                        write_artifacts(&run, &g.out_dir)?;
                        Ok(run.summary)
                    })
                    .collect()
            });
            let summaries = results.into_iter().collect::<Result<Vec<_>>>()?;
            write_summary(&summaries, io::stdout().lock())?;
        }
        Command::ListPresets { json } => {
            for p in presets::builtin() {
                if json {
                    println!("{}", p.to_json());
                } else {
                    println!("{:<20} {:<16} {}", p.name, p.experiment.module(), p.description);
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
