//! Artifact files: `trace.json`, `summary.csv`, `plot.csv`, `report.json`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use boolkernel::Trace;
use serde::Serialize;

use crate::error::{HarnessError, Result};
use crate::experiments::{RunOutput, Summary};

#[derive(Serialize)]
struct PlotRow {
    step: usize,
    mistake: u8,
    cumulative_mistakes: usize,
}

/// Cumulative mistakes against step, one row per trace step.
pub fn emit_plotdata<W: Write>(trace: &Trace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if trace.is_empty() {
        w.write_record(["step", "mistake", "cumulative_mistakes"])?;
    }
    for (s, cum) in trace.steps.iter().zip(trace.cumulative_mistakes()) {
        w.serialize(PlotRow {
            step: s.step,
            mistake: u8::from(s.mistake),
            cumulative_mistakes: cum,
        })?;
    }
    w.flush().map_err(|e| HarnessError::io("plot data", e))?;
    Ok(())
}

pub fn write_summary<W: Write>(rows: &[Summary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| HarnessError::io("summary", e))?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| HarnessError::io(path.display().to_string(), e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")
        .and_then(|_| f.flush())
        .map_err(|e| HarnessError::io(path.display().to_string(), e))
}

/// Writes every artifact of `run` under `dir/<preset name>/` and returns
/// that directory.
pub fn write_artifacts(run: &RunOutput, dir: &Path) -> Result<PathBuf> {
    let dir = dir.join(&run.summary.preset);
    fs::create_dir_all(&dir).map_err(|e| HarnessError::io(dir.display().to_string(), e))?;
    write_json(&dir.join("trace.json"), &run.trace)?;
    write_json(&dir.join("report.json"), &run.report)?;
    write_summary(std::slice::from_ref(&run.summary), create(&dir.join("summary.csv"))?)?;
    emit_plotdata(&run.trace, create(&dir.join("plot.csv"))?)?;
    Ok(dir)
}
