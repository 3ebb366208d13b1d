//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use bellcontext_core::cbd::{behavior_s, no_signaling, pr_box, random_no_signaling};
use bellcontext_core::feasibility::{chsh_certificate, fine_feasible_lp, reshuffle_feasible, ReshuffleProblem};
use bellcontext_core::lhv::{sample_counterfactual_table, BuiltinModelSpec};
use bellcontext_core::model::{b_statistic, s_statistic, CounterfactualRow, CounterfactualTable, ExperimentBundle};
use bellcontext_core::quantum::{optimize_angles, s_quantum, AngleQuadruple, DensityMatrix, TSIRELSON_BOUND};
use bellcontext_core::rng;
use bellcontext_core::stats::{significance_curve, violation_frequency, Generator, Orientation, ViolationStudy};
use bellcontext_core::weak::{exceedance_fraction, per_pair_b_values_calibrated, per_pair_b_values_lhv, summarize, PointerConfig};
use bellcontext_core::linalg::C64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Table whose rows follow a random distribution over the 16 assignments.
fn random_table(seed: u64, max_rows: usize) -> CounterfactualTable {
    let mut r = rng::stream(seed, &[]);
    let n = r.random_range(1..=max_rows);
    let skew: f64 = r.random_range(0.0..4.0);
    let weights: Vec<f64> = (0..16).map(|_| r.random::<f64>().powf(1.0 + 4.0 * skew)).collect();
    let total: f64 = weights.iter().sum();
    let rows = (0..n)
        .map(|_| {
            let mut u = r.random::<f64>() * total;
            let k = weights.iter().position(|w| {
                u -= w;
                u < 0.0
            });
            CounterfactualRow::from_index(k.unwrap_or(15))
        })
        .collect();
    CounterfactualTable::new(rows)
}

fn b_bound() -> Check {
    let tables = 10_000u64;
    let bad: u64 = (0..tables)
        .into_par_iter()
        .map(|seed| {
            let t = random_table(seed, 10_000);
            let rows_ok = t.rows.iter().all(|r| r.c_value().abs() == 2);
            let b_ok = b_statistic(&t).unwrap().abs() <= 2.0;
            u64::from(!(rows_ok && b_ok))
        })
        .sum();
    ensure(bad == 0, format!("{tables} tables, {bad} exceptions"))
}

fn tsirelson_reach() -> Check {
    let (angles, s) = optimize_angles(&DensityMatrix::singlet(), 24, 200).map_err(|e| e.to_string())?;
    let err = (s - TSIRELSON_BOUND).abs();
    ensure(err <= 1e-6, format!("|S| = {s:.12} at {angles:?}, error {err:.2e}"))
}

fn tsirelson_ceiling() -> Check {
    let mut r = rng::stream(3, &[]);
    let (mut worst, mut worst_optimized) = (0.0f64, 0.0f64);
    for k in 0..1000 {
        let rho = DensityMatrix::random(&mut r);
        let a: [f64; 4] = std::array::from_fn(|_| r.random::<f64>() * std::f64::consts::TAU);
        let angles = AngleQuadruple::new(a[0], a[1], a[2], a[3]).unwrap();
        worst = worst.max(s_quantum(&rho, &angles).unwrap().abs());
        // Random angles rarely come near the bound; push every tenth state, and a random pure state, to the optimum.
        if k % 10 == 0 {
            let psi: [C64; 4] = std::array::from_fn(|_| C64::new(r.sample(StandardNormal), r.sample(StandardNormal)));
            let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let pure = DensityMatrix::from_pure(psi.map(|z| z / norm)).unwrap();
            for state in [&rho, &pure] {
                worst_optimized = worst_optimized.max(optimize_angles(state, 12, 50).unwrap().1);
            }
        }
    }
    ensure(
        worst.max(worst_optimized) <= TSIRELSON_BOUND + 1e-9,
        format!("max |S|: {worst:.6} at random angles, {worst_optimized:.6} at optimized angles"),
    )
}

fn boundary_half() -> Check {
    let study = ViolationStudy {
        generator: Generator::Lhv(BuiltinModelSpec::boundary().build().unwrap()),
        n_per_context: 10_000,
        trials: 10_000,
        threshold: 2.0,
        orientation: Orientation::Auto,
        seed: 2024,
    };
    let f = violation_frequency(&study).map_err(|e| e.to_string())?.violation_frequency();
    ensure((0.48..=0.52).contains(&f), format!("frequency {f:.4}"))
}

fn significance_decay() -> Check {
    let g = Generator::Lhv(BuiltinModelSpec::sign_cosine_with_s(1.8).unwrap().build().unwrap());
    let r = significance_curve(&g, &[100, 10_000], 1000, 2.0, Orientation::Auto, 7).map_err(|e| e.to_string())?;
    let (small, large) = (r.rows[0].frequency, r.rows[1].frequency);
    ensure(
        large < 0.01 && large < small,
        format!("exact S = {:.6}; frequency {small:.4} at n=100, {large:.4} at n=10^4", r.exact_s),
    )
}

fn fine_equivalence() -> Check {
    let mut r = rng::stream(11, &[]);
    let (mut disagree, mut bad_witness, mut infeasible) = (0, 0, 0);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let b = random_no_signaling(&mut r);
        let lp = fine_feasible_lp(&b).map_err(|e| e.to_string())?;
        if lp.is_feasible() != (chsh_certificate(&b) <= 2.0) {
            disagree += 1;
        }
        match &lp.witness {
            Some(w) => {
                let res = w.residual(&b);
                worst = worst.max(res);
                if res > 1e-8 {
                    bad_witness += 1;
                }
            }
            None => infeasible += 1,
        }
    }
    ensure(
        disagree == 0 && bad_witness == 0,
        format!("1000 behaviors ({infeasible} infeasible): {disagree} disagreements, worst residual {worst:.1e}"),
    )
}

fn pr_box_checks() -> Check {
    let p = pr_box();
    let s = behavior_s(&p);
    let deficit = no_signaling(&p).max_deficit;
    let feasible = fine_feasible_lp(&p).map_err(|e| e.to_string())?.is_feasible();
    ensure(s == 4.0 && deficit == 0.0 && !feasible, format!("S = {s}, deficit = {deficit}, LP feasible = {feasible}"))
}

fn reshuffling() -> Check {
    let model = BuiltinModelSpec::sign_cosine_with_s(1.2).unwrap().build().unwrap();
    let mut failures = 0;
    for seed in 0..20 {
        let t = sample_counterfactual_table(&model, 100 + 50 * seed as usize, seed).unwrap();
        let counts = ExperimentBundle::from_table(&t).datasets().each_ref().map(|d| d.outcome_counts());
        let r = reshuffle_feasible(&ReshuffleProblem::new(counts, 0.0).unwrap()).map_err(|e| e.to_string())?;
        if !r.is_feasible() {
            failures += 1;
        }
    }
    let pr = [[50, 0, 0, 50], [50, 0, 0, 50], [50, 0, 0, 50], [0, 50, 50, 0]];
    let pr_feasible = reshuffle_feasible(&ReshuffleProblem::new(pr, 0.0).unwrap()).map_err(|e| e.to_string())?.is_feasible();
    ensure(
        failures == 0 && !pr_feasible,
        format!("20 projected tables: {failures} not reshufflable; PR-box counts feasible = {pr_feasible}"),
    )
}

fn per_pair_b_values() -> Check {
    let cfg = PointerConfig::new(1.0, 1.0).unwrap();
    let recs = per_pair_b_values_calibrated(TSIRELSON_BOUND, &cfg, 10_000, 5).map_err(|e| e.to_string())?;
    let vals: Vec<f64> = recs.iter().map(|r| r.b_value).collect();
    let f = exceedance_fraction(&vals, TSIRELSON_BOUND).unwrap();

    let model = BuiltinModelSpec::sign_cosine_with_s(1.0).unwrap().build().unwrap();
    let table = sample_counterfactual_table(&model, 100_000, 6).unwrap();
    let noisy = PointerConfig::new(1.0, 1.5).unwrap();
    let s = summarize(&per_pair_b_values_lhv(&table, &noisy, 6).unwrap()).unwrap();
    let b = b_statistic(&table).unwrap();
    let dev = (s.mean - b).abs() / s.standard_error;
    ensure(
        (0.48..=0.52).contains(&f) && dev <= 4.0,
        format!("calibrated exceedance {f:.4}; LHV mean {:.4} vs B {b:.4} ({dev:.2} SE)", s.mean),
    )
}

fn identity_bridge() -> Check {
    let mut worst = 0.0f64;
    for seed in 0..100 {
        let t = random_table(10_000 + seed, 5000);
        let diff = (s_statistic(&ExperimentBundle::from_table(&t)).unwrap() - b_statistic(&t).unwrap()).abs();
        worst = worst.max(diff);
    }
    ensure(worst <= 1e-12, format!("max |S - B| over 100 tables = {worst:e}"))
}

fn run_cli(args: &[&str], dir: &Path, threads: usize) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_bellctx"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env("RAYON_NUM_THREADS", threads.to_string())
        .output()
        .map_err(|e| e.to_string())?
        .status;
    match status.code() {
        Some(0) | Some(3) => Ok(()),
        other => Err(format!("{args:?} exited with {other:?}")),
    }
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn reproducibility() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = tmp.path();
    std::fs::write(
        root.join("study.toml"),
        "n_values = [100, 1000]\ntrials = 200\n[generator]\nkind = \"lhv\"\nmodel = { variant = \"boundary_mixture\" }\n",
    )
    .unwrap();
    let study = root.join("study.toml").display().to_string();
    let table = root.join("source/table.csv").display().to_string();
    run_cli(&["simulate-lhv", "--preset", "boundary", "--n", "500", "--seed", "1"], &root.join("source"), 1)?;

    let commands: Vec<Vec<&str>> = vec![
        vec!["simulate-lhv", "--target-s", "1.5", "--n", "2000", "--seed", "4"],
        vec!["simulate-quantum", "--n", "2000", "--seed", "4"],
        vec!["feasibility", "--table", &table],
        vec!["violation-curve", "--study", &study, "--seed", "4"],
        vec!["weak-bvalues", "--source", "calibrated", "--n", "5000", "--seed", "4"],
        vec!["weak-bvalues", "--source", "lhv", "--preset", "boundary", "--n", "5000", "--seed", "4"],
    ];
    let mut checked = 0;
    for (k, args) in commands.iter().enumerate() {
        let a = root.join(format!("run{k}a"));
        let b = root.join(format!("run{k}b"));
        run_cli(args, &a, 1)?;
        run_cli(args, &b, 4)?;
        let (fa, fb) = (dir_contents(&a), dir_contents(&b));
        if fa.is_empty() || fa != fb {
            return Err(format!("{} outputs differ between runs", args[0]));
        }
        checked += fa.len();
    }
    Ok(format!("{} subcommand runs, {checked} files byte-identical across 1 and 4 threads", commands.len()))
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Check); 11] = [
        ("finite-sample B bound", Duration::from_secs(10), b_bound),
        ("Tsirelson reachability", Duration::from_secs(5), tsirelson_reach),
        ("Tsirelson ceiling", Duration::from_secs(60), tsirelson_ceiling),
        ("boundary 50% violation frequency", Duration::from_secs(120), boundary_half),
        ("significance decay", Duration::from_secs(120), significance_decay),
        ("Fine oracle equivalence", Duration::from_secs(30), fine_equivalence),
        ("CbD bound and PR box", Duration::from_secs(60), pr_box_checks),
        ("reshuffling", Duration::from_secs(60), reshuffling),
        ("per-pair B-values", Duration::from_secs(60), per_pair_b_values),
        ("identity bridge", Duration::from_secs(60), identity_bridge),
        ("CLI reproducibility", Duration::from_secs(120), reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let (pass, detail) = match outcome {
            Ok(d) if elapsed <= *budget => (true, d),
            Ok(d) => (false, format!("{d}; exceeded {budget:?} budget")),
            Err(d) => (false, d),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} {:>2}. {name}: {detail} [{:.2}s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
