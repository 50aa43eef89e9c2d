//! Commands behind the `nnsphere` binary: solve and score instances stored on
//! disk, and run experiment grids.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use nnsphere::evaluation::{self, ScoreReport};
use nnsphere::io::{self, Assignment, Instance};
use nnsphere::rounding::{self, PartialPermutation};
use nnsphere::{Error, Result, Solution, SweepParams};

pub mod experiment;

/// Which rounding path turns the relaxed solution into an assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Cluster,
    Match,
}

impl Mode {
    /// Matching for instances with object blocks, clustering otherwise.
    pub fn for_instance(inst: &Instance) -> Self {
        if inst.is_matching() {
            Mode::Match
        } else {
            Mode::Cluster
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub params: SweepParams,
}

#[derive(Debug, Clone)]
pub struct Solved {
    pub solution: Solution,
    pub assignment: Assignment,
    /// Per-object assignments in match mode.
    pub matching: Option<Vec<PartialPermutation>>,
    pub elapsed: Duration,
}

/// Runs the sweep, the pick and the rounding for one instance.
pub fn solve_instance(inst: &Instance, cfg: &RunConfig) -> Result<Solved> {
    cfg.params.validate()?;
    if inst.m() == 0 {
        return Err(Error::EmptyInstance);
    }
    if cfg.mode == Mode::Match {
        let blocks = inst.blocks.as_ref().ok_or_else(|| {
            Error::InvalidParameter("match mode needs an instance with object blocks".into())
        })?;
        if let Some((block, &size)) = blocks
            .sizes()
            .iter()
            .enumerate()
            .find(|(_, &s)| s > cfg.params.k)
        {
            return Err(Error::Infeasible {
                block,
                size,
                k: cfg.params.k,
            });
        }
    }
    let start = Instant::now();
    let solution = nnsphere::solve(&inst.w, &cfg.params)?;
    let (assignment, matching) = match cfg.mode {
        Mode::Cluster => (
            Assignment::from_labels(&rounding::round_clustering(&solution.u)),
            None,
        ),
        Mode::Match => {
            let blocks = inst.blocks.as_ref().expect("checked above");
            let perms = rounding::round_matching(&solution.u, blocks)?;
            (Assignment::from_matching(&perms), Some(perms))
        }
    };
    Ok(Solved {
        solution,
        assignment,
        matching,
        elapsed: start.elapsed(),
    })
}

/// Scores an assignment against the ground truth stored in the instance.
pub fn score(pred: &Assignment, inst: &Instance) -> Result<ScoreReport> {
    match pred {
        Assignment::Clustering { .. } => {
            evaluation::score_clustering(&pred.to_labels()?, &inst.ground_truth)
        }
        Assignment::Matching { .. } => {
            let truth = inst.to_matching()?;
            let perms = pred.to_matching(truth.blocks.q())?;
            evaluation::score_matching(&perms, &truth)
        }
    }
}

/// Contents of `summary.json` written by `solve`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveSummary {
    pub mode: Mode,
    pub params: SweepParams,
    pub alpha: f64,
    pub pick_index: usize,
    pub degenerate_pick: bool,
    pub right_max: Option<usize>,
    pub left_max: Option<usize>,
    /// Distinct universe columns (or clusters) in the rounded solution.
    pub n_used_columns: usize,
}

impl SolveSummary {
    pub fn new(solved: &Solved, cfg: &RunConfig) -> Self {
        let pick = solved.solution.pick;
        let mut used: Vec<usize> = match &solved.assignment {
            Assignment::Clustering { labels } => labels.clone(),
            Assignment::Matching { blocks } => blocks
                .iter()
                .flat_map(|b| b.assignment.iter().flatten().copied())
                .collect(),
        };
        used.sort_unstable();
        used.dedup();
        Self {
            mode: cfg.mode,
            params: cfg.params,
            alpha: solved.solution.alpha,
            pick_index: pick.index,
            degenerate_pick: pick.degenerate,
            right_max: pick.right_max,
            left_max: pick.left_max,
            n_used_columns: used.len(),
        }
    }
}

/// Writes `assignment.json`, `trace.csv`, `summary.json`, `matches.csv` in
/// match mode, and optionally every snapshot under `snapshots/`.
pub fn write_solve_outputs(
    out: &Path,
    solved: &Solved,
    cfg: &RunConfig,
    snapshots: bool,
) -> Result<()> {
    fs::create_dir_all(out)?;
    io::write_json(&out.join("assignment.json"), &solved.assignment)?;
    io::write_trace_csv(&out.join("trace.csv"), &solved.solution.trace)?;
    io::write_json(&out.join("summary.json"), &SolveSummary::new(solved, cfg))?;
    if let Some(perms) = &solved.matching {
        io::write_matches_csv(&out.join("matches.csv"), perms)?;
    }
    if snapshots {
        io::write_snapshots(&out.join("snapshots"), &solved.solution.trace)?;
    }
    Ok(())
}

/// Exit status for a failed command: 1 for numerical failures, 2 otherwise.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_numerical() => 1,
        _ => 2,
    }
}
