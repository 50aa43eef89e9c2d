use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use nnsphere::io::{self, Assignment, GeneratorSpec};
use nnsphere::SweepParams;
use nnsphere_cli::experiment::{self, GridSpec};
use nnsphere_cli::{exit_code, score, solve_instance, write_solve_outputs, Mode, RunConfig};

/// Universe-free multi-matching and clustering on the non-negative sphere.
#[derive(Debug, Parser)]
#[command(name = "nnsphere", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic instance and write its JSON envelope.
    Generate {
        #[command(subcommand)]
        generator: Generator,
    },
    /// Run the alpha-sweep, pick alpha and round the solution.
    Solve(SolveArgs),
    /// Score an assignment file against an instance's ground truth.
    Score {
        pred: PathBuf,
        instance: PathBuf,
        /// Also write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print a CSV header and record instead of the plain summary.
        #[arg(long)]
        csv: bool,
    },
    /// Run an experiment grid and write the aggregated CSV.
    Experiment {
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads.
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
    },
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output JSON file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Generator {
    /// Multi-matching with partial observations and corrupted correspondences.
    PartialMatching {
        #[arg(long)]
        q: usize,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        rho: f64,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Noisy binary co-membership clustering.
    BinaryClustering {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        k_star: usize,
        #[arg(long, default_value_t = 0.0)]
        rho: f64,
        #[arg(long, default_value_t = 0.0)]
        nu: f64,
        #[command(flatten)]
        common: Common,
    },
    /// 2D Gaussian mixture with a local-scaling kernel similarity.
    Gmm {
        #[arg(long)]
        k_star: usize,
        #[arg(long)]
        n_samples: usize,
        #[arg(long)]
        mean_sep: f64,
        #[arg(long)]
        mean_var: f64,
        #[arg(long, default_value_t = nnsphere::problems::DEFAULT_NEIGHBOR_INDEX)]
        neighbor_index: usize,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
struct SolveArgs {
    instance: PathBuf,
    /// Rounding path; inferred from the instance when omitted.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long, default_value_t = SweepParams::default().k)]
    k: usize,
    #[arg(long, default_value_t = SweepParams::default().eps_alpha)]
    eps_alpha: f64,
    #[arg(long, default_value_t = SweepParams::default().n_inner)]
    n_inner: usize,
    #[arg(long, default_value_t = SweepParams::default().eps_eta)]
    eps_eta: f64,
    #[arg(long, default_value_t = SweepParams::default().kappa)]
    kappa: f64,
    /// Output directory for assignment.json, trace.csv and summary.json.
    #[arg(long)]
    out: PathBuf,
    /// Also write every sweep snapshot to <out>/snapshots/.
    #[arg(long)]
    snapshots: bool,
}

fn generate(generator: Generator) -> Result<()> {
    let (spec, common) = match generator {
        Generator::PartialMatching {
            q,
            d,
            rho,
            sigma,
            common,
        } => (GeneratorSpec::PartialMatching { q, d, rho, sigma }, common),
        Generator::BinaryClustering {
            m,
            k_star,
            rho,
            nu,
            common,
        } => (
            GeneratorSpec::BinaryClustering { m, k_star, rho, nu },
            common,
        ),
        Generator::Gmm {
            k_star,
            n_samples,
            mean_sep,
            mean_var,
            neighbor_index,
            common,
        } => (
            GeneratorSpec::Gmm {
                k_star,
                n_samples,
                mean_sep,
                mean_var,
                neighbor_index,
            },
            common,
        ),
    };
    let inst = spec.generate(common.seed)?;
    io::write_instance(&common.out, &inst)?;
    println!("{}", inst.summary());
    Ok(())
}

fn solve(args: SolveArgs) -> Result<()> {
    let inst = io::read_instance(&args.instance)
        .with_context(|| format!("reading {}", args.instance.display()))?;
    let cfg = RunConfig {
        mode: args.mode.unwrap_or_else(|| Mode::for_instance(&inst)),
        params: SweepParams {
            k: args.k,
            eps_alpha: args.eps_alpha,
            n_inner: args.n_inner,
            eps_eta: args.eps_eta,
            kappa: args.kappa,
            ..SweepParams::default()
        },
    };
    let solved = solve_instance(&inst, &cfg)?;
    write_solve_outputs(&args.out, &solved, &cfg, args.snapshots)?;
    let pick = solved.solution.pick;
    println!(
        "alpha = {} (index {}{}), time = {:.3} s",
        solved.solution.alpha,
        pick.index,
        if pick.degenerate {
            ", degenerate pick"
        } else {
            ""
        },
        solved.elapsed.as_secs_f64()
    );
    print_assignment(&solved.assignment, inst.m());
    Ok(())
}

/// Prints the rounded solution for small instances.
fn print_assignment(assignment: &Assignment, m: usize) {
    const PRINT_LIMIT: usize = 100;
    if m > PRINT_LIMIT {
        return;
    }
    let fmt = |c: &Option<usize>| c.map_or_else(|| "-".to_string(), |c| c.to_string());
    match assignment {
        Assignment::Clustering { labels } => println!("labels: {labels:?}"),
        Assignment::Matching { blocks } => {
            for b in blocks {
                let cols: Vec<String> = b.assignment.iter().map(fmt).collect();
                println!("object {}: [{}]", b.object, cols.join(", "));
            }
        }
    }
}

fn score_cmd(pred: &Path, instance: &Path, out: Option<&Path>, csv: bool) -> Result<()> {
    let inst =
        io::read_instance(instance).with_context(|| format!("reading {}", instance.display()))?;
    let assignment: Assignment =
        io::read_json(pred).with_context(|| format!("reading {}", pred.display()))?;
    let report = score(&assignment, &inst)?;
    if let Some(out) = out {
        io::write_json(out, &report)?;
    }
    if csv {
        println!("{}", nnsphere::evaluation::ScoreReport::CSV_HEADER);
        println!("{}", report.to_csv_record());
    } else {
        println!(
            "precision = {}, recall = {}, f_score = {}",
            report.precision, report.recall, report.f_score
        );
    }
    Ok(())
}

fn experiment_cmd(grid: &Path, out: &Path, jobs: usize) -> Result<()> {
    let spec: GridSpec =
        io::read_json(grid).with_context(|| format!("reading {}", grid.display()))?;
    let results = experiment::run(&spec, jobs)?;
    experiment::write_csv(out, &results)?;
    let failed = results.iter().filter(|r| r.mean_f.is_nan()).count();
    println!(
        "{} grid values written to {} ({failed} failed)",
        results.len(),
        out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let result = match cli.command {
        Command::Generate { generator } => generate(generator),
        Command::Solve(args) => solve(args),
        Command::Score {
            pred,
            instance,
            out,
            csv,
        } => score_cmd(&pred, &instance, out.as_deref(), csv),
        Command::Experiment { grid, out, jobs } => experiment_cmd(&grid, &out, jobs),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
