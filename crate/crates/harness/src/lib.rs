//! Experiment presets, artifact writers and the command-line front end for
//! `boolkernel`.

pub mod error;
pub mod experiments;
pub mod output;
pub mod presets;

pub use error::{exit, HarnessError, Result};
pub use experiments::{run_preset, RunOutput, Summary};
pub use output::{emit_plotdata, write_artifacts};
pub use presets::{Experiment, Preset};
