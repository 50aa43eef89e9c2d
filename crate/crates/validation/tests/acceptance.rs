//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit when any
//! criterion fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ndarray::Array2;
use nnsphere::evaluation::score_clustering;
use nnsphere::io::{self, GeneratorSpec};
use nnsphere::linalg::spectral_scale;
use nnsphere::problems::{gen_binary_clustering, gen_partial_matching};
use nnsphere::relaxation::{
    alpha_from_beta, objective_f, objective_g, power_step, project_row, quadratic_trace,
};
use nnsphere::rounding::{lap_solve, round_clustering};
use nnsphere::{QuadraticFormMatrix, SimilarityMatrix, SweepParams};
use nnsphere_validation::*;
use nnsphere_cli::experiment::{self, GridSpec, Vary};
use nnsphere_cli::{solve_instance, write_solve_outputs, Mode, RunConfig};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Settings shared by the end-to-end criteria.
fn default_params() -> SweepParams {
    SweepParams {
        k: 100,
        eps_alpha: 0.01,
        n_inner: 20,
        eps_eta: 0.0,
        kappa: 0.0,
        snapshot_every: 1,
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn random_similarity(r: &mut rand_chacha::ChaCha8Rng, m: usize) -> SimilarityMatrix {
    let mut a = Array2::zeros((m, m));
    for i in 0..m {
        for j in i..m {
            let v: f64 = r.random();
            a[[i, j]] = v;
            a[[j, i]] = v;
        }
    }
    SimilarityMatrix::new(a).unwrap()
}

fn power_iteration_properties() -> Outcome {
    const STEPS: usize = 500;
    let mut r = rng(1);
    let (mut non_monotone, mut unconverged, mut long_tail) = (0, 0, 0);
    let mut worst_tail: f64 = 0.0;
    for _ in 0..200 {
        let m = r.random_range(2..=40);
        let k = r.random_range(1..=10);
        let v = QuadraticFormMatrix::from_symmetric(wishart(&mut r, m)).unwrap();
        let scale = spectral_scale(v.view());
        let mut u = random_sphere(&mut r, m, k);
        let mut obj = vec![quadratic_trace(v.view(), u.view()).unwrap()];
        let mut moves = Vec::with_capacity(STEPS);
        for _ in 0..STEPS {
            let next = power_step(&u, &v).unwrap();
            moves.push((next.as_array() - u.as_array()).mapv(|x| x * x).sum());
            obj.push(quadratic_trace(v.view(), next.view()).unwrap());
            u = next;
        }
        let diffs: Vec<f64> = obj.windows(2).map(|w| w[1] - w[0]).collect();
        if diffs.iter().any(|&d| d < -1e-10 * scale) {
            non_monotone += 1;
        }
        if diffs[STEPS - 10..].iter().any(|d| d.abs() > 1e-8 * scale) {
            unconverged += 1;
            continue;
        }
        // First step from which every later difference is below tolerance.
        let settled = diffs
            .iter()
            .rposition(|d| d.abs() > 1e-8 * scale)
            .map_or(0, |t| t + 1);
        let tail: f64 = moves[settled..].iter().sum();
        worst_tail = worst_tail.max(tail);
        if tail > 1e-6 {
            long_tail += 1;
        }
    }
    outcome(
        non_monotone == 0 && unconverged == 0 && long_tail == 0,
        format!(
            "{non_monotone} non-monotone, {unconverged} not converged in {STEPS} steps, \
             {long_tail} tails > 1e-6 (largest {worst_tail:.2e}) of 200"
        ),
    )
}

fn trace_identity_and_equivalence() -> Outcome {
    let mut r = rng(2);
    let mut identity_failures = 0;
    for _ in 0..1000 {
        let m = r.random_range(1..=20);
        let k = r.random_range(1..=8);
        let cols = (0..m).map(|_| r.random_range(0..k)).collect();
        let u = nnsphere::relaxation::BinaryRowStochasticMatrix::new(cols, k)
            .unwrap()
            .to_dense();
        let uut = u.dot(&u.t());
        let lhs = uut.dot(&uut).diag().sum();
        let rhs = u.t().dot(&Array2::<f64>::ones((m, m))).dot(&u).diag().sum();
        if lhs != rhs {
            identity_failures += 1;
        }
    }
    let mut set_failures = 0;
    let mut cases = 0;
    for m in 1..=6 {
        for k in 1..=3 {
            let w = random_similarity(&mut r, m);
            let candidates = enumerate_binary(m, k);
            for beta in [0.5, 1.0, 2.0] {
                let alpha = alpha_from_beta(beta).unwrap();
                let mut fs = Vec::new();
                let mut gs = Vec::new();
                for c in &candidates {
                    let u = c.to_dense();
                    fs.push(objective_f(&w, u.view(), beta).unwrap());
                    gs.push(objective_g(&w, u.view(), alpha).unwrap());
                }
                cases += 1;
                if optimal_set(&fs, false) != optimal_set(&gs, true) {
                    set_failures += 1;
                }
            }
        }
    }
    outcome(
        identity_failures == 0 && set_failures == 0,
        format!("{identity_failures}/1000 identity mismatches, {set_failures}/{cases} optimizer-set mismatches"),
    )
}

fn projection_and_lap_oracles() -> Outcome {
    let mut r = rng(3);
    let mut worst_angle: f64 = 0.0;
    for _ in 0..50 {
        let mut x: Vec<f64> = (0..3).map(|_| r.random_range(-1.0..1.0)).collect();
        if x.iter().all(|&v| v <= 0.0) {
            x[r.random_range(0..3)] = r.random_range(0.1..1.0);
        }
        let p = project_row(&x).unwrap();
        worst_angle = worst_angle.max(angle(&p, &monte_carlo_argmax(&x, 100_000, &mut r)));
    }
    let mut lap_failures = 0;
    for _ in 0..200 {
        let k = r.random_range(1..=8);
        let rows = r.random_range(1..=k.min(6));
        let p = Array2::from_shape_fn((rows, k), |_| r.random_range(0..5) as f64);
        let sol = lap_solve(p.view()).unwrap();
        let maps = injective_maps(rows, k);
        let value = |a: &Vec<usize>| a.iter().enumerate().map(|(i, &c)| p[[i, c]]).sum::<f64>();
        let best = maps.iter().map(value).fold(f64::NEG_INFINITY, f64::max);
        let first = maps.iter().find(|a| value(a) == best).unwrap();
        if sol.total != best || &sol.assignment != first {
            lap_failures += 1;
        }
    }
    outcome(
        worst_angle <= 0.02 && lap_failures == 0,
        format!("largest angle {worst_angle:.4} rad, {lap_failures}/200 LAP mismatches"),
    )
}

fn noise_free_recovery() -> Outcome {
    let params = default_params();
    let seeds: Vec<u64> = (0..20).collect();
    let matching = par_map(&seeds, |&s| {
        solve_matching(&gen_partial_matching(10, 10, 0.7, 0.0, s).unwrap(), &params)
    });
    let clustering = par_map(&seeds, |&s| {
        solve_clustering(&gen_binary_clustering(60, 4, 0.0, 0.0, s).unwrap(), &params).0
    });
    let (fm, fc) = (mean(&matching), mean(&clustering));
    outcome(
        fm == 1.0 && fc == 1.0,
        format!("matching mean F {fm}, clustering mean F {fc}"),
    )
}

/// Checks the trend rule on a grid of mean F-scores.
fn trend(means: &[f64], second_min: f64) -> bool {
    means[1] >= second_min && means.windows(2).all(|w| w[1] <= w[0] + 0.05)
}

fn noise_robustness() -> Outcome {
    let params = default_params();
    let seeds: Vec<u64> = (0..20).collect();
    let grid = [0.0, 0.1, 0.2, 0.3];
    let matching: Vec<f64> = grid
        .iter()
        .map(|&sigma| {
            mean(&par_map(&seeds, |&s| {
                solve_matching(
                    &gen_partial_matching(10, 10, 0.7, sigma, s).unwrap(),
                    &params,
                )
            }))
        })
        .collect();
    let grid = [0.0, 0.05, 0.1, 0.2];
    let clustering: Vec<f64> = grid
        .iter()
        .map(|&rho| {
            mean(&par_map(&seeds, |&s| {
                solve_clustering(&gen_binary_clustering(60, 3, rho, 0.0, s).unwrap(), &params).0
            }))
        })
        .collect();
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.3}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    outcome(
        trend(&matching, 0.9) && trend(&clustering, 0.9),
        format!(
            "sigma grid F [{}], rho grid F [{}]",
            fmt(&matching),
            fmt(&clustering)
        ),
    )
}

fn eta_curve_shape() -> Outcome {
    let inst = gen_binary_clustering(60, 4, 0.0, 0.0, 0).unwrap();
    let params = SweepParams {
        eps_alpha: 0.001,
        n_inner: 100,
        kappa: 0.01,
        ..default_params()
    };
    let sol = nnsphere::solve(&inst.w, &params).unwrap();
    let trace = &sol.trace;
    let labels: Vec<Vec<usize>> = (0..trace.len())
        .map(|i| round_clustering(trace.snapshot(i).unwrap()).labels)
        .collect();
    let on_truth: Vec<bool> = (0..trace.len())
        .map(|i| trace.etas[i] <= 1e-6 && same_partition(&labels[i], &inst.ground_truth))
        .collect();
    let truth_run = on_truth.split(|g| !g).map(<[bool]>::len).max().unwrap_or(0);
    let terminal = labels
        .iter()
        .rev()
        .take_while(|l| l.iter().all(|&c| c == l[0]))
        .count();
    outcome(
        truth_run >= 5 && terminal >= 1,
        format!("ground-truth run of {truth_run} steps with eta <= 1e-6, terminal single-cluster run of {terminal}"),
    )
}

fn universe_size_insensitivity() -> Outcome {
    let seeds: Vec<u64> = (0..20).collect();
    let ks = [10, 50, 100, 200];
    let per_k: Vec<Vec<(f64, usize)>> = ks
        .iter()
        .map(|&k| {
            let params = SweepParams {
                k,
                ..default_params()
            };
            par_map(&seeds, |&s| {
                solve_clustering(&gen_binary_clustering(60, 4, 0.0, 0.0, s).unwrap(), &params)
            })
        })
        .collect();
    let mut details = Vec::new();
    let mut pass = true;
    for (k, results) in ks.iter().zip(&per_k) {
        let imperfect = results.iter().filter(|(f, _)| *f != 1.0).count();
        let mean_f = mean(&results.iter().map(|r| r.0).collect::<Vec<_>>());
        pass &= imperfect == 0;
        details.push(format!("k={k}: mean F {mean_f:.3}, {imperfect}/20 below 1"));
    }
    let count_mismatch = (0..seeds.len())
        .filter(|&s| per_k.iter().any(|r| r[s].1 != per_k[0][s].1))
        .count();
    pass &= count_mismatch == 0;
    details.push(format!(
        "{count_mismatch}/20 seeds with differing cluster counts"
    ));
    outcome(pass, details.join("; "))
}

fn performance() -> Outcome {
    let inst = gen_binary_clustering(200, 4, 0.1, 0.1, 0).unwrap();
    let start = Instant::now();
    let sol = nnsphere::solve(&inst.w, &default_params()).unwrap();
    let f = score_clustering(&round_clustering(&sol.u), &inst.ground_truth)
        .unwrap()
        .f_score;
    let secs = start.elapsed().as_secs_f64();
    outcome(
        secs < 60.0,
        format!("m=200, k=100 solve in {secs:.2} s (F {f:.3})"),
    )
}

/// Files under `dir`, relative to it, sorted.
fn files(dir: &Path) -> Vec<PathBuf> {
    walkdir::WalkDir::new(dir)
        .sort_by_file_name()
        .into_iter()
        .map(Result::unwrap)
        .filter(|e| e.file_type().is_file())
        .map(|e| e.path().strip_prefix(dir).unwrap().to_path_buf())
        .collect()
}

fn pipeline(dir: &Path) {
    let specs = [
        GeneratorSpec::BinaryClustering {
            m: 60,
            k_star: 3,
            rho: 0.1,
            nu: 0.1,
        },
        // Large enough for the matrix to go to a CSV sidecar.
        GeneratorSpec::PartialMatching {
            q: 12,
            d: 10,
            rho: 0.9,
            sigma: 0.1,
        },
    ];
    for (i, spec) in specs.iter().enumerate() {
        let path = dir.join(format!("instance{i}.json"));
        io::write_instance(&path, &spec.generate(7).unwrap()).unwrap();
        let inst = io::read_instance(&path).unwrap();
        let cfg = RunConfig {
            mode: Mode::for_instance(&inst),
            params: SweepParams {
                kappa: 0.01,
                ..default_params()
            },
        };
        let solved = solve_instance(&inst, &cfg).unwrap();
        write_solve_outputs(&dir.join(format!("run{i}")), &solved, &cfg, false).unwrap();
    }
    let grid = GridSpec {
        generator: specs[0].clone(),
        sweep: SweepParams {
            eps_alpha: 0.02,
            ..default_params()
        },
        vary: Vary {
            param: "rho".into(),
            values: vec![0.0, 0.1, 0.2],
        },
        repetitions: 4,
        base_seed: 0,
        mode: None,
        timing: false,
    };
    let results = experiment::run(&grid, 4).unwrap();
    experiment::write_csv(&dir.join("experiment.csv"), &results).unwrap();
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path());
    pipeline(b.path());
    let (fa, fb) = (files(a.path()), files(b.path()));
    let differing: Vec<String> = fa
        .iter()
        .filter(|f| {
            fs::read(a.path().join(f)).unwrap()
                != fs::read(b.path().join(f)).ok().unwrap_or_default()
        })
        .map(|f| f.display().to_string())
        .collect();
    outcome(
        fa == fb && differing.is_empty() && fa.len() >= 10,
        format!(
            "{} files compared, {} differ {:?}",
            fa.len(),
            differing.len(),
            differing
        ),
    )
}

type Criterion = (u8, &'static str, fn() -> Outcome, Option<Duration>);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (
            1,
            "power iteration properties",
            power_iteration_properties,
            Some(Duration::from_secs(30)),
        ),
        (
            2,
            "trace identity and f/g equivalence",
            trace_identity_and_equivalence,
            Some(Duration::from_secs(10)),
        ),
        (
            3,
            "projection and LAP oracles",
            projection_and_lap_oracles,
            Some(Duration::from_secs(20)),
        ),
        (
            4,
            "noise-free recovery",
            noise_free_recovery,
            Some(Duration::from_secs(300)),
        ),
        (5, "noise robustness trend", noise_robustness, None),
        (6, "eta curve shape", eta_curve_shape, None),
        (
            7,
            "universe size insensitivity",
            universe_size_insensitivity,
            None,
        ),
        (8, "performance", performance, Some(Duration::from_secs(60))),
        (9, "determinism", determinism, None),
    ];
    let filter: Vec<u8> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (n, name, run, limit) in criteria {
        if !filter.is_empty() && !filter.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let in_time = limit.is_none_or(|l| elapsed < l);
        let pass = out.pass && in_time;
        failed += !pass as usize;
        let limit = limit.map_or(String::new(), |l| format!(" (limit {} s)", l.as_secs()));
        println!(
            "criterion {n} {name}: {} | {} | {:.1} s{limit}",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
