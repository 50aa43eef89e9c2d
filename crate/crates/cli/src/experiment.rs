//! Experiment grids: one varying parameter, every other parameter fixed, a
//! number of seeded repetitions per grid value.

use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use nnsphere::io::{fmt_f64, GeneratorSpec};
use nnsphere::{Error, Result, SweepParams};

use crate::{score, solve_instance, Mode, RunConfig};

pub const CSV_HEADER: &str = "param_value,mean_f,std_f,mean_runtime";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vary {
    /// Name of a generator or sweep parameter.
    pub param: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub generator: GeneratorSpec,
    #[serde(default)]
    pub sweep: SweepParams,
    pub vary: Vary,
    pub repetitions: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Defaults to matching for partial-matching instances, clustering otherwise.
    #[serde(default)]
    pub mode: Option<Mode>,
    /// When false the runtime column is written as NaN so that output files
    /// are byte-identical across runs.
    #[serde(default = "default_timing")]
    pub timing: bool,
}

fn default_timing() -> bool {
    true
}

/// Aggregate of one grid value. All fields are NaN if any repetition failed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellResult {
    pub param_value: f64,
    pub mean_f: f64,
    pub std_f: f64,
    pub mean_runtime: f64,
}

impl CellResult {
    pub fn csv_record(&self) -> String {
        format!(
            "{},{},{},{}",
            fmt_f64(self.param_value),
            fmt_f64(self.mean_f),
            fmt_f64(self.std_f),
            fmt_f64(self.mean_runtime)
        )
    }
}

fn set_field(target: &mut Value, name: &str, value: f64) -> bool {
    let Some(slot) = target.as_object_mut().and_then(|o| o.get_mut(name)) else {
        return false;
    };
    *slot = if slot.is_u64() && value >= 0.0 && value.fract() == 0.0 {
        Value::from(value as u64)
    } else {
        Value::from(value)
    };
    true
}

impl GridSpec {
    /// Generator and sweep parameters for one grid value.
    pub fn cell(&self, value: f64) -> Result<(GeneratorSpec, SweepParams)> {
        if self.vary.param == "name" {
            return Err(Error::InvalidParameter(
                "cannot vary the generator name".into(),
            ));
        }
        let mut gen = serde_json::to_value(&self.generator)?;
        let mut sweep = serde_json::to_value(self.sweep)?;
        if !set_field(&mut gen, &self.vary.param, value)
            && !set_field(&mut sweep, &self.vary.param, value)
        {
            return Err(Error::InvalidParameter(format!(
                "unknown parameter {:?} for generator {}",
                self.vary.param,
                self.generator.name()
            )));
        }
        let gen: GeneratorSpec = serde_json::from_value(gen)
            .map_err(|e| Error::InvalidParameter(format!("{} = {value}: {e}", self.vary.param)))?;
        let sweep: SweepParams = serde_json::from_value(sweep)
            .map_err(|e| Error::InvalidParameter(format!("{} = {value}: {e}", self.vary.param)))?;
        Ok((gen, sweep))
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::InvalidParameter("repetitions must be >= 1".into()));
        }
        if self.vary.values.is_empty() {
            return Err(Error::InvalidParameter("vary.values is empty".into()));
        }
        for &v in &self.vary.values {
            self.cell(v)?;
        }
        if self.mode == Some(Mode::Match) && !self.generator.is_matching() {
            return Err(Error::InvalidParameter(format!(
                "match mode needs object blocks, {} has none",
                self.generator.name()
            )));
        }
        Ok(())
    }
}

/// F-score and runtime in seconds of one repetition.
fn run_one(
    gen: &GeneratorSpec,
    params: &SweepParams,
    mode: Option<Mode>,
    seed: u64,
) -> Result<(f64, f64)> {
    let inst = gen.generate(seed)?;
    let cfg = RunConfig {
        mode: mode.unwrap_or_else(|| Mode::for_instance(&inst)),
        params: *params,
    };
    let solved = solve_instance(&inst, &cfg)?;
    let report = score(&solved.assignment, &inst)?;
    Ok((report.f_score, solved.elapsed.as_secs_f64()))
}

/// F-score and runtime of one repetition, or the error message.
type RunOutcome = std::result::Result<(f64, f64), String>;

/// Runs every (grid value, repetition) pair on `jobs` worker threads. Results
/// come back in grid order regardless of completion order.
pub fn run(spec: &GridSpec, jobs: usize) -> Result<Vec<CellResult>> {
    spec.validate()?;
    let cells: Vec<(GeneratorSpec, SweepParams)> = spec
        .vary
        .values
        .iter()
        .map(|&v| spec.cell(v))
        .collect::<Result<_>>()?;
    let reps = spec.repetitions;
    let n_tasks = cells.len() * reps;
    let outcomes: Mutex<Vec<Option<RunOutcome>>> = Mutex::new(vec![None; n_tasks]);
    let next = AtomicUsize::new(0);
    let done = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, n_tasks.max(1)) {
            s.spawn(|| loop {
                let t = next.fetch_add(1, Ordering::Relaxed);
                if t >= n_tasks {
                    break;
                }
                let (cell, rep) = (t / reps, t % reps);
                let (gen, params) = &cells[cell];
                let seed = spec.base_seed + rep as u64;
                let out = run_one(gen, params, spec.mode, seed).map_err(|e| e.to_string());
                if let Err(e) = &out {
                    log::warn!(
                        "{} = {}, seed {seed}: {e}",
                        spec.vary.param,
                        spec.vary.values[cell]
                    );
                }
                outcomes.lock().expect("poisoned")[t] = Some(out);
                let finished = done.fetch_add(1, Ordering::Relaxed) + 1;
                log::info!("{finished}/{n_tasks} runs done");
            });
        }
    });
    let outcomes = outcomes.into_inner().expect("poisoned");
    Ok(spec
        .vary
        .values
        .iter()
        .enumerate()
        .map(|(c, &param_value)| {
            let runs: Option<Vec<(f64, f64)>> = outcomes[c * reps..(c + 1) * reps]
                .iter()
                .map(|o| o.clone().and_then(|r| r.ok()))
                .collect();
            match runs {
                Some(runs) => {
                    let n = runs.len() as f64;
                    let mean_f = runs.iter().map(|r| r.0).sum::<f64>() / n;
                    let var = runs.iter().map(|r| (r.0 - mean_f).powi(2)).sum::<f64>() / n;
                    let mean_runtime = if spec.timing {
                        runs.iter().map(|r| r.1).sum::<f64>() / n
                    } else {
                        f64::NAN
                    };
                    CellResult {
                        param_value,
                        mean_f,
                        std_f: var.sqrt(),
                        mean_runtime,
                    }
                }
                None => CellResult {
                    param_value,
                    mean_f: f64::NAN,
                    std_f: f64::NAN,
                    mean_runtime: f64::NAN,
                },
            }
        })
        .collect())
}

pub fn write_csv(path: &Path, results: &[CellResult]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{CSV_HEADER}")?;
    for r in results {
        writeln!(out, "{}", r.csv_record())?;
    }
    out.flush()?;
    Ok(())
}
