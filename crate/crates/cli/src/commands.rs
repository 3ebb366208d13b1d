use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use bellcontext_core::cbd::{behavior_correlation, no_signaling, Behavior};
use bellcontext_core::feasibility::{chsh_certificate, fine_feasible_lp, reshuffle_feasible, ReshuffleProblem};
use bellcontext_core::io;
use bellcontext_core::lhv::{exact_lhv_correlation, exact_lhv_s, sample_bundle, sample_counterfactual_table, BuiltinModelSpec};
use bellcontext_core::model::{b_statistic, s_statistic, Context, ExperimentBundle};
use bellcontext_core::quantum::{
    optimize_angles, s_quantum, sample_bundle_quantum, AngleQuadruple, DensityMatrix, TSIRELSON_BOUND,
};
use bellcontext_core::stats::{run_study, standard_error_s, Orientation, StudySpec};
use bellcontext_core::weak::{
    exceedance_fraction, per_pair_b_values_calibrated, per_pair_b_values_lhv, summarize, PointerConfig,
};
use serde::Serialize;
use serde_json::json;

use crate::output::{hex_sha256, read_input, CliError, CliResult, Run, EXIT_INFEASIBLE};
use crate::{
    ConventionArg, FeasibilityArgs, ModelArgs, ModelPreset, SimulateLhvArgs, SimulateQuantumArgs, StatePreset,
    ViolationCurveArgs, WeakArgs, WeakSource,
};

const ANGLE_GRID: usize = 24;
const ANGLE_REFINE: usize = 200;

fn preset_model(p: ModelPreset) -> BuiltinModelSpec {
    match p {
        ModelPreset::Boundary => BuiltinModelSpec::boundary(),
        ModelPreset::AllPlus => BuiltinModelSpec::all_plus(),
    }
}

fn resolve_model(file: Option<&Path>, preset: Option<ModelPreset>, target_s: Option<f64>) -> CliResult<BuiltinModelSpec> {
    match (file, preset, target_s) {
        (Some(path), None, None) => Ok(BuiltinModelSpec::from_toml(&read_input(path)?)?),
        (None, Some(p), None) => Ok(preset_model(p)),
        (None, None, Some(s)) => Ok(BuiltinModelSpec::sign_cosine_with_s(s)?),
        (None, None, None) => Err(CliError::config("a model is required (--model, --preset or a target S)")),
        _ => Err(CliError::config("give exactly one model source")),
    }
}

fn require_positive(name: &str, v: usize) -> CliResult<()> {
    if v == 0 {
        return Err(CliError::config(format!("--{name} must be at least 1")));
    }
    Ok(())
}

fn correlations_hat(bundle: &ExperimentBundle) -> CliResult<[f64; 4]> {
    let t = bundle.tallies();
    let mut out = [0.0; 4];
    for (o, t) in out.iter_mut().zip(&t) {
        *o = t.correlation()?;
    }
    Ok(out)
}

fn optional_se(bundle: &ExperimentBundle, n: usize) -> CliResult<Option<f64>> {
    Ok(if n >= 2 { Some(standard_error_s(bundle)?) } else { None })
}

#[derive(Serialize)]
struct LhvSpec {
    model: BuiltinModelSpec,
    n: usize,
}

pub fn simulate_lhv(args: SimulateLhvArgs) -> CliResult<ExitCode> {
    let ModelArgs { model, preset, target_s } = &args.model;
    let spec = LhvSpec { model: resolve_model(model.as_deref(), *preset, *target_s)?, n: args.n };
    require_positive("n", args.n)?;
    let model = spec.model.build()?;

    let table = sample_counterfactual_table(&model, args.n, args.seed)?;
    let bundle = sample_bundle(&model, args.n, args.seed)?;
    let s_hat = s_statistic(&bundle)?;
    let se = optional_se(&bundle, args.n)?;
    let exact_s = exact_lhv_s(&model)?;
    let exact_e: Vec<f64> = Context::ALL.iter().map(|&c| exact_lhv_correlation(&model, c)).collect::<Result<_, _>>()?;

    let mut run = Run::new(&args.out, "simulate-lhv", &spec, Some(args.seed))?;
    run.write_with("table.csv", |w| io::write_table(&table, w))?;
    run.write_with("bundle.csv", |w| io::write_bundle(&bundle, w))?;
    let summary = json!({
        "run": run.header(),
        "model": model.name(),
        "n_per_context": args.n,
        "s_hat": s_hat,
        "standard_error": se,
        "exact_s": exact_s,
        "within_4se": se.map(|se| (s_hat - exact_s).abs() <= 4.0 * se),
        "correlations_hat": correlations_hat(&bundle)?,
        "exact_correlations": exact_e,
        "table_b": b_statistic(&table)?,
    });
    run.write_json("summary.json", &summary)?;
    run.finish()?;
    println!("S_hat = {s_hat}, exact S = {exact_s}, table B = {}", b_statistic(&table)?);
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
#[serde(rename_all = "snake_case")]
enum StateSource {
    Preset(StatePreset),
    Matrix(Vec<[f64; 2]>),
}

#[derive(Serialize)]
struct QuantumSpec {
    state: StateSource,
    angles: Option<[f64; 4]>,
    optimize: bool,
    convention: ConventionArg,
    n: usize,
}

fn convention_factor(c: ConventionArg) -> f64 {
    match c {
        ConventionArg::Spin => 1.0,
        ConventionArg::Polarization => 2.0,
    }
}

pub fn simulate_quantum(args: SimulateQuantumArgs) -> CliResult<ExitCode> {
    require_positive("n", args.n)?;
    let rho = match &args.state {
        Some(path) => io::parse_density_matrix(&read_input(path)?)?,
        None => match args.preset {
            StatePreset::Singlet => DensityMatrix::singlet(),
            StatePreset::MaximallyMixed => DensityMatrix::maximally_mixed(),
        },
    };
    let given = args.angles.as_deref().map(io::parse_angles).transpose()?;
    let state = match &args.state {
        Some(_) => StateSource::Matrix(rho.entries().iter().flatten().map(|z| [z.re, z.im]).collect()),
        None => StateSource::Preset(args.preset),
    };
    let spec = QuantumSpec {
        state,
        angles: given.map(|a| [a.a1, a.a2, a.b1, a.b2]),
        optimize: args.optimize,
        convention: args.convention,
        n: args.n,
    };

    let k = convention_factor(args.convention);
    let spin = if args.optimize {
        optimize_angles(&rho, ANGLE_GRID, ANGLE_REFINE)?.0
    } else {
        let a = given.unwrap_or_else(|| {
            let t = AngleQuadruple::tsirelson();
            AngleQuadruple { a1: t.a1 / k, a2: t.a2 / k, b1: t.b1 / k, b2: t.b2 / k }
        });
        AngleQuadruple::new(k * a.a1, k * a.a2, k * a.b1, k * a.b2)?
    };
    let reported = [spin.a1 / k, spin.a2 / k, spin.b1 / k, spin.b2 / k];

    let bundle = sample_bundle_quantum(&rho, &spin, args.n, args.seed)?;
    let behavior = Behavior::from_quantum(&rho, &spin)?;
    let exact_s = s_quantum(&rho, &spin)?;
    let s_hat = s_statistic(&bundle)?;
    let se = optional_se(&bundle, args.n)?;

    let mut run = Run::new(&args.out, "simulate-quantum", &spec, Some(args.seed))?;
    run.write_with("bundle.csv", |w| io::write_bundle(&bundle, w))?;
    let summary = json!({
        "run": run.header(),
        "angles": reported,
        "convention": args.convention,
        "n_per_context": args.n,
        "s_hat": s_hat,
        "standard_error": se,
        "exact_s": exact_s,
        "tsirelson_margin": TSIRELSON_BOUND - exact_s.abs(),
        "within_4se": se.map(|se| (s_hat - exact_s).abs() <= 4.0 * se),
        "correlations_hat": correlations_hat(&bundle)?,
        "exact_correlations": Context::ALL.map(|c| behavior_correlation(&behavior, c)),
        "born_probabilities": behavior.probabilities(),
    });
    run.write_json("summary.json", &summary)?;
    run.finish()?;
    println!("S_hat = {s_hat}, exact S = {exact_s}");
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct FeasibilitySpec {
    input_kind: &'static str,
    input_path: String,
    input_sha256: String,
    slack: Option<f64>,
}

pub fn feasibility(args: FeasibilityArgs) -> CliResult<ExitCode> {
    let (kind, path) = match (&args.input.behavior, &args.input.bundle, &args.input.table) {
        (Some(p), None, None) => ("behavior", p),
        (None, Some(p), None) => ("bundle", p),
        (None, None, Some(p)) => ("table", p),
        _ => return Err(CliError::config("give exactly one of --behavior, --bundle, --table")),
    };
    let text = read_input(path)?;
    let behavior = match kind {
        "behavior" => Behavior::from_toml(&text)?,
        "bundle" => Behavior::from_bundle(&io::read_bundle(text.as_bytes())?)?,
        _ => Behavior::from_bundle(&ExperimentBundle::from_table(&io::read_table(text.as_bytes())?))?,
    };
    let spec = FeasibilitySpec {
        input_kind: kind,
        input_path: path.display().to_string(),
        input_sha256: hex_sha256(text.as_bytes()),
        slack: args.slack,
    };

    let result = match behavior.counts() {
        Some(counts) => {
            let problem = ReshuffleProblem::new(*counts, args.slack.unwrap_or(0.0))
                .map_err(|e| CliError::config(e.to_string()))?;
            reshuffle_feasible(&problem)?
        }
        None if args.slack.is_some() => {
            return Err(CliError::config("--slack applies to count data only"));
        }
        None => fine_feasible_lp(&behavior)?,
    };
    let report = json!({
        "result": result,
        "chsh_max": chsh_certificate(&behavior),
        "no_signaling": no_signaling(&behavior),
    });
    if let Some(out) = &args.out {
        let mut run = Run::new(out, "feasibility", &spec, None)?;
        run.write_json("feasibility.json", &json!({ "run": run.header(), "report": report }))?;
        run.finish()?;
    }
    let line = serde_json::to_string(&report).map_err(|e| CliError::runtime(e.to_string()))?;
    writeln!(std::io::stdout(), "{line}").map_err(|e| CliError::runtime(e.to_string()))?;
    Ok(if result.is_feasible() { ExitCode::SUCCESS } else { ExitCode::from(EXIT_INFEASIBLE) })
}

pub fn violation_curve(args: ViolationCurveArgs) -> CliResult<ExitCode> {
    let mut spec = StudySpec::from_toml(&read_input(&args.study)?)?;
    if let Some(seed) = spec.seed {
        if seed != args.seed {
            return Err(CliError::config(format!("study file seed {seed} differs from --seed {}", args.seed)));
        }
    }
    spec.seed = Some(args.seed);
    if let Some(n) = &args.n {
        spec.n_values = n.clone();
    }
    if let Some(t) = args.trials {
        spec.trials = t;
    }
    if args.abs {
        spec.orientation = Orientation::Absolute;
    }
    spec.validate()?;
    let result = run_study(&spec, args.seed)?;

    let mut run = Run::new(&args.out, "violation-curve", &spec, Some(args.seed))?;
    run.write_with("curve.csv", |w| io::write_curve(&result.rows, w))?;
    run.write_json("summary.json", &json!({ "run": run.header(), "result": result }))?;
    run.finish()?;
    for r in &result.rows {
        println!("n={} frequency={} z={}", r.n, r.frequency, r.z);
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct WeakSpec {
    source: WeakSource,
    model: Option<BuiltinModelSpec>,
    target: Option<f64>,
    coupling: f64,
    noise: f64,
    n: usize,
}

pub fn weak_bvalues(args: WeakArgs) -> CliResult<ExitCode> {
    require_positive("n", args.n)?;
    let config = PointerConfig::new(args.coupling, args.noise)?;
    let (spec, records, extra) = match args.source {
        WeakSource::Lhv => {
            if args.target.is_some() {
                return Err(CliError::config("--target applies to the calibrated source only"));
            }
            let model_spec = resolve_model(args.model.as_deref(), args.preset, args.model_s)?;
            let model = model_spec.build()?;
            let table = sample_counterfactual_table(&model, args.n, args.seed)?;
            let records = per_pair_b_values_lhv(&table, &config, args.seed)?;
            let b = b_statistic(&table)?;
            let s = summarize(&records)?;
            let extra = json!({
                "model": model.name(),
                "table_b": b,
                "within_4se": (s.mean - b).abs() <= 4.0 * s.standard_error,
            });
            let spec = WeakSpec {
                source: args.source,
                model: Some(model_spec),
                target: None,
                coupling: args.coupling,
                noise: args.noise,
                n: args.n,
            };
            (spec, records, extra)
        }
        WeakSource::Calibrated => {
            if args.model.is_some() || args.preset.is_some() || args.model_s.is_some() {
                return Err(CliError::config("model options apply to the lhv source only"));
            }
            let target = args.target.unwrap_or(TSIRELSON_BOUND);
            let records = per_pair_b_values_calibrated(target, &config, args.n, args.seed)?;
            let values: Vec<f64> = records.iter().map(|r| r.b_value).collect();
            let extra = json!({
                "target": target,
                "exceed_target": exceedance_fraction(&values, target)?,
                "note": "calibrated source: B-values are drawn symmetric about the target; it stands in for a per-pair quantum model, which has no counterfactual quadruples to read",
            });
            let spec = WeakSpec {
                source: args.source,
                model: None,
                target: Some(target),
                coupling: args.coupling,
                noise: args.noise,
                n: args.n,
            };
            (spec, records, extra)
        }
    };
    let summary = summarize(&records)?;

    let mut run = Run::new(&args.out, "weak-bvalues", &spec, Some(args.seed))?;
    run.write_with("records.csv", |w| io::write_weak_records(&records, w))?;
    run.write_json("summary.json", &json!({ "run": run.header(), "summary": summary, "source": extra }))?;
    run.finish()?;
    println!(
        "mean = {}, sd = {}, exceed(2) = {}, exceed(2√2) = {}",
        summary.mean, summary.sd, summary.exceed_2, summary.exceed_tsirelson
    );
    Ok(ExitCode::SUCCESS)
}
