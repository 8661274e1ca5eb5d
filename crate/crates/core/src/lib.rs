//! Exact-arithmetic kernel Perceptron and kernel Winnow over Boolean
//! conjunction feature spaces.
//!
//! * [`kernels`]: the four conjunction kernels and their explicit expansions.
//! * [`perceptron`]: dual (kernel) and primal Perceptron.
//! * [`winnow`]: explicit Winnow and a lazy simulator for Winnow over all
//!   `2^m - 1` monotone monomials.
//! * [`adversarial`]: sequences that force the monotone-kernel Perceptron to
//!   err on every example, and the matching PAC distribution.
//! * [`reduction`]: a model-counting reduction to Winnow prediction, with
//!   builders and verifiers.
//!
//! All scores and weights are exact ([`exact::Int`], [`exact::Rat`]).

pub mod adversarial;
pub mod bits;
pub mod error;
pub mod exact;
pub mod kernels;
pub mod perceptron;
pub mod reduction;
pub mod rng;
pub mod trace;
pub mod winnow;

pub use bits::{BitVec, Label, LabeledExample};
pub use error::{Error, Result};
pub use exact::{Int, Rat};
pub use kernels::{kernel, KernelKind};
pub use trace::{Trace, TraceStep};
