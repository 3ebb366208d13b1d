//! Finite-sample behavior of `Ŝ`: how often it exceeds a threshold, and how
//! that frequency and the z-score move with the per-context sample size.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cbd::{behavior_s, sample_tallies_from_probabilities, Behavior};
use crate::error::{Error, Result};
use crate::lhv::{exact_lhv_s, BuiltinModelSpec, LhvModel};
use crate::model::{s_from_tallies, ExperimentBundle, Tally};
use crate::quantum::{s_quantum, AngleQuadruple, Convention, DensityMatrix};
use crate::rng::{derive_seed, TAG_CURVE, TAG_TRIAL};
use crate::linalg::{Mat4, C64, ZERO4};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Which side of the threshold counts as a violation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Use `Ŝ` when the generator's exact `S` is ≥ 0, otherwise `−Ŝ`.
    #[default]
    Auto,
    /// Always `Ŝ`.
    Signed,
    /// `|Ŝ|`.
    Absolute,
}

/// A source of four-context data with a known exact `S`.
#[derive(Clone, Debug)]
pub enum Generator {
    Lhv(LhvModel),
    /// Angles are in the spin convention; the Born table is precomputed.
    Quantum {
        rho: DensityMatrix,
        angles: AngleQuadruple,
        behavior: Behavior,
    },
    Behavior(Behavior),
}

impl Generator {
    pub fn quantum(rho: DensityMatrix, angles: AngleQuadruple) -> Result<Self> {
        let behavior = Behavior::from_quantum(&rho, &angles)?;
        Ok(Generator::Quantum { rho, angles, behavior })
    }

    pub fn exact_s(&self) -> Result<f64> {
        match self {
            Generator::Lhv(m) => exact_lhv_s(m),
            Generator::Quantum { rho, angles, .. } => s_quantum(rho, angles),
            Generator::Behavior(b) => Ok(behavior_s(b)),
        }
    }

    /// Tallies of one four-context experiment with `n` trials per context.
    pub fn tallies(&self, n: usize, seed: u64) -> Result<[Tally; 4]> {
        match self {
            Generator::Lhv(m) => m.sample_tallies(n, seed),
            Generator::Quantum { behavior, .. } | Generator::Behavior(behavior) => {
                sample_tallies_from_probabilities(behavior.probabilities(), n, seed)
            }
        }
    }
}

/// Named two-qubit states usable in study files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedState {
    Singlet,
    MaximallyMixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateSpec {
    Named(NamedState),
    /// 16 `[re, im]` entries in row-major order.
    Matrix(Vec<[f64; 2]>),
}

impl StateSpec {
    pub fn build(&self) -> Result<DensityMatrix> {
        match self {
            StateSpec::Named(NamedState::Singlet) => Ok(DensityMatrix::singlet()),
            StateSpec::Named(NamedState::MaximallyMixed) => Ok(DensityMatrix::maximally_mixed()),
            StateSpec::Matrix(v) => {
                if v.len() != 16 {
                    return Err(Error::config(format!("density matrix needs 16 entries, got {}", v.len())));
                }
                let mut m: Mat4 = ZERO4;
                for (k, [re, im]) in v.iter().enumerate() {
                    m[k / 4][k % 4] = C64::new(*re, *im);
                }
                DensityMatrix::new(m).map_err(|e| Error::config(e.to_string()))
            }
        }
    }
}

/// Generator description as it appears in study files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    Lhv {
        model: BuiltinModelSpec,
    },
    Quantum {
        state: StateSpec,
        /// `[a1, a2, b1, b2]`; defaults to the angles maximizing the singlet.
        angles: Option<[f64; 4]>,
        #[serde(default)]
        convention: Convention,
    },
    Behavior {
        /// Per canonical context, probabilities of `(+,+), (+,−), (−,+), (−,−)`.
        probabilities: [[f64; 4]; 4],
    },
}

impl GeneratorSpec {
    pub fn build(&self) -> Result<Generator> {
        let config = |e: Error| if e.is_config() { e } else { Error::config(e.to_string()) };
        match self {
            GeneratorSpec::Lhv { model } => model.build().map(Generator::Lhv).map_err(config),
            GeneratorSpec::Quantum { state, angles, convention } => {
                let rho = state.build()?;
                let [a1, a2, b1, b2] = angles.unwrap_or_else(|| {
                    let t = AngleQuadruple::tsirelson();
                    [t.a1, t.a2, t.b1, t.b2]
                });
                let k = match convention {
                    Convention::Spin => 1.0,
                    Convention::Polarization => 2.0,
                };
                let angles = AngleQuadruple::new(k * a1, k * a2, k * b1, k * b2).map_err(config)?;
                Generator::quantum(rho, angles).map_err(config)
            }
            GeneratorSpec::Behavior { probabilities } => {
                Behavior::new(*probabilities).map(Generator::Behavior).map_err(config)
            }
        }
    }
}

fn default_threshold() -> f64 {
    2.0
}

/// Study file: generator, sample sizes, trials, threshold, orientation and seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    pub generator: GeneratorSpec,
    pub n_values: Vec<usize>,
    pub trials: usize,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub orientation: Orientation,
    pub seed: Option<u64>,
}

impl StudySpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: StudySpec = toml::from_str(text).map_err(|e| Error::config(format!("invalid study spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("study spec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() {
            return Err(Error::config("n_values must not be empty"));
        }
        if self.n_values.contains(&0) {
            return Err(Error::config("every n must be at least 1"));
        }
        if self.n_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("n_values must be strictly ascending"));
        }
        check_trials_threshold(self.trials, self.threshold)
    }
}

fn check_trials_threshold(trials: usize, threshold: f64) -> Result<()> {
    if trials == 0 {
        return Err(Error::config("trials must be at least 1"));
    }
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(Error::config(format!("threshold must be positive, got {threshold}")));
    }
    Ok(())
}

/// One violation-frequency experiment at a single per-context sample size.
#[derive(Clone, Debug)]
pub struct ViolationStudy {
    pub generator: Generator,
    pub n_per_context: usize,
    pub trials: usize,
    pub threshold: f64,
    pub orientation: Orientation,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StudyRow {
    pub n: usize,
    pub trials: usize,
    pub violations: usize,
    pub frequency: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Mean of the oriented `Ŝ`.
    pub mean_s: f64,
    pub sd_s: f64,
    /// `(mean_s − threshold) / mean analytic SE`.
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudyResult {
    pub exact_s: f64,
    pub threshold: f64,
    pub orientation: Orientation,
    pub rows: Vec<StudyRow>,
}

impl StudyResult {
    /// The last (largest-n) row.
    pub fn last(&self) -> &StudyRow {
        self.rows.last().expect("a study has at least one row")
    }

    pub fn violation_frequency(&self) -> f64 {
        self.last().frequency
    }

    pub fn frequency_ci95(&self) -> (f64, f64) {
        (self.last().ci_lo, self.last().ci_hi)
    }
}

/// Wilson score interval for `successes` out of `trials` at normal quantile `z`.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> Result<(f64, f64)> {
    if trials == 0 || successes > trials {
        return Err(Error::domain(format!("invalid binomial count {successes}/{trials}")));
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    Ok(((center - half).max(0.0), (center + half).min(1.0)))
}

/// `sqrt(Σ (1 − Ê²)/n)` over the four contexts.
pub fn standard_error_from_tallies(tallies: &[Tally; 4]) -> Result<f64> {
    let mut var = 0.0;
    for t in tallies {
        if t.n < 2 {
            return Err(Error::domain(format!("standard error needs at least 2 pairs per context, got {}", t.n)));
        }
        let e = t.correlation()?;
        var += (1.0 - e * e) / t.n as f64;
    }
    Ok(var.sqrt())
}

pub fn standard_error_s(bundle: &ExperimentBundle) -> Result<f64> {
    standard_error_from_tallies(&bundle.tallies())
}

fn orient(s: f64, exact_s: f64, orientation: Orientation) -> f64 {
    match orientation {
        Orientation::Signed => s,
        Orientation::Absolute => s.abs(),
        Orientation::Auto if exact_s >= 0.0 => s,
        Orientation::Auto => -s,
    }
}

fn run_row(
    generator: &Generator,
    exact_s: f64,
    n: usize,
    trials: usize,
    threshold: f64,
    orientation: Orientation,
    seed: u64,
) -> Result<StudyRow> {
    if n == 0 {
        return Err(Error::config("n_per_context must be at least 1"));
    }
    let samples: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let tallies = generator.tallies(n, derive_seed(seed, &[TAG_TRIAL, t as u64]))?;
            let s = orient(s_from_tallies(&tallies)?, exact_s, orientation);
            let se = if n >= 2 { standard_error_from_tallies(&tallies)? } else { f64::NAN };
            Ok((s, se))
        })
        .collect::<Result<_>>()?;

    let violations = samples.iter().filter(|(s, _)| *s > threshold).count();
    let k = trials as f64;
    let mean_s = samples.iter().map(|(s, _)| s).sum::<f64>() / k;
    let sd_s = if trials > 1 {
        (samples.iter().map(|(s, _)| (s - mean_s).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    let mean_se = samples.iter().map(|(_, se)| se).sum::<f64>() / k;
    let diff = mean_s - threshold;
    let z = if diff == 0.0 { 0.0 } else { diff / mean_se };
    let (ci_lo, ci_hi) = wilson_interval(violations, trials, Z95)?;
    Ok(StudyRow {
        n,
        trials,
        violations,
        frequency: violations as f64 / k,
        ci_lo,
        ci_hi,
        mean_s,
        sd_s,
        z,
    })
}

/// Runs `trials` independent four-context experiments and counts oriented `Ŝ > threshold`.
///
/// Trial `t` is seeded from `(seed, t)` alone, so the result does not depend on
/// how trials are scheduled across threads.
pub fn violation_frequency(study: &ViolationStudy) -> Result<StudyResult> {
    check_trials_threshold(study.trials, study.threshold)?;
    let exact_s = study.generator.exact_s()?;
    let row = run_row(
        &study.generator,
        exact_s,
        study.n_per_context,
        study.trials,
        study.threshold,
        study.orientation,
        study.seed,
    )?;
    Ok(StudyResult {
        exact_s,
        threshold: study.threshold,
        orientation: study.orientation,
        rows: vec![row],
    })
}

/// One row per `n`, each an independent study seeded from `(seed, row index)`.
pub fn significance_curve(
    generator: &Generator,
    n_values: &[usize],
    trials: usize,
    threshold: f64,
    orientation: Orientation,
    seed: u64,
) -> Result<StudyResult> {
    if n_values.is_empty() {
        return Err(Error::config("n_values must not be empty"));
    }
    if n_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("n_values must be strictly ascending"));
    }
    check_trials_threshold(trials, threshold)?;
    let exact_s = generator.exact_s()?;
    let rows = n_values
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let row_seed = derive_seed(seed, &[TAG_CURVE, i as u64]);
            run_row(generator, exact_s, n, trials, threshold, orientation, row_seed)
        })
        .collect::<Result<_>>()?;
    Ok(StudyResult { exact_s, threshold, orientation, rows })
}

/// Runs a parsed study file with the given master seed.
pub fn run_study(spec: &StudySpec, seed: u64) -> Result<StudyResult> {
    spec.validate()?;
    let generator = spec.generator.build()?;
    significance_curve(&generator, &spec.n_values, spec.trials, spec.threshold, spec.orientation, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lhv::sample_bundle;
    use crate::model::{ContextDataset, Outcome};
    use crate::model::Context;

    fn lhv(spec: BuiltinModelSpec) -> Generator {
        Generator::Lhv(spec.build().unwrap())
    }

    fn study(generator: Generator, n: usize, trials: usize, seed: u64) -> ViolationStudy {
        ViolationStudy { generator, n_per_context: n, trials, threshold: 2.0, orientation: Orientation::Auto, seed }
    }

    #[test]
    fn wilson_known_values() {
        let (lo, hi) = wilson_interval(50, 100, Z95).unwrap();
        assert!((lo - 0.403_831).abs() < 1e-6 && (hi - 0.596_169).abs() < 1e-6, "{lo} {hi}");
        let (lo, hi) = wilson_interval(0, 10, Z95).unwrap();
        assert_eq!(lo, 0.0);
        assert!((hi - 0.277_533).abs() < 1e-6);
        assert!(wilson_interval(3, 2, Z95).is_err());
    }

    fn dataset(context: Context, plus_products: usize, n: usize) -> ContextDataset {
        let pairs = (0..n)
            .map(|k| if k < plus_products { (Outcome::PLUS, Outcome::PLUS) } else { (Outcome::PLUS, Outcome::MINUS) })
            .collect();
        ContextDataset::new(context, pairs)
    }

    #[test]
    fn standard_error_examples() {
        let b = ExperimentBundle::new(Context::ALL.iter().map(|&c| dataset(c, 50, 100)).collect()).unwrap();
        assert!((standard_error_s(&b).unwrap() - 0.2).abs() < 1e-15);
        let b = ExperimentBundle::new(Context::ALL.iter().map(|&c| dataset(c, 10, 10)).collect()).unwrap();
        assert_eq!(standard_error_s(&b).unwrap(), 0.0);
        let b = ExperimentBundle::new(Context::ALL.iter().map(|&c| dataset(c, 1, 1)).collect()).unwrap();
        assert!(matches!(standard_error_s(&b), Err(Error::Domain(_))));
    }

    #[test]
    fn boundary_sd_matches_formula() {
        let model = BuiltinModelSpec::boundary().build().unwrap();
        let n = 2000;
        let s: Vec<f64> = (0..400)
            .map(|t| crate::model::s_statistic(&sample_bundle(&model, n, t).unwrap()).unwrap())
            .collect();
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        let sd = (s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (s.len() - 1) as f64).sqrt();
        // Correlations (1, 0, 1, 0): two contexts contribute 1/n each.
        let formula = (2.0 / n as f64).sqrt();
        assert!((sd / formula - 1.0).abs() < 0.1, "{sd} vs {formula}");
    }

    #[test]
    fn deterministic_model_never_exceeds() {
        let r = violation_frequency(&study(lhv(BuiltinModelSpec::all_plus()), 50, 20, 1)).unwrap();
        assert_eq!(r.exact_s, 2.0);
        let row = r.last();
        assert_eq!(row.frequency, 0.0);
        assert_eq!(row.mean_s, 2.0);
        assert_eq!(row.sd_s, 0.0);
        assert_eq!(row.z, 0.0);
    }

    #[test]
    fn boundary_is_near_half_at_small_n() {
        // Ŝ = 2 + (lattice noise); P(Ŝ > 2) = (1 − P(tie))/2 with an exactly computable tie mass.
        let n = 100;
        let r = violation_frequency(&study(lhv(BuiltinModelSpec::boundary()), n, 4000, 3)).unwrap();
        let tie = binomial_central(2 * n);
        let p = 0.5 * (1.0 - tie);
        let f = r.violation_frequency();
        assert!((f - p).abs() < 4.0 * (p * (1.0 - p) / 4000.0).sqrt(), "{f} vs {p}");
    }

    /// `C(m, m/2) / 2^m` computed in log space.
    fn binomial_central(m: usize) -> f64 {
        let ln: f64 = (1..=m).map(|k| (k as f64).ln()).sum::<f64>()
            - 2.0 * (1..=m / 2).map(|k| (k as f64).ln()).sum::<f64>()
            - m as f64 * 2f64.ln();
        ln.exp()
    }

    #[test]
    fn quantum_singlet_violates_and_z_grows() {
        let g = Generator::quantum(DensityMatrix::singlet(), AngleQuadruple::tsirelson()).unwrap();
        assert!(g.exact_s().unwrap() < 0.0);
        let r = significance_curve(&g, &[100, 400, 1600], 200, 2.0, Orientation::Auto, 9).unwrap();
        assert!(r.rows.windows(2).all(|w| w[1].z > w[0].z));
        assert!(r.last().frequency > 0.99);
        assert!((r.last().mean_s - 2.0 * 2f64.sqrt()).abs() < 0.02);
    }

    #[test]
    fn results_are_reproducible_and_schedule_independent() {
        let g = lhv(BuiltinModelSpec::sign_cosine_with_s(1.8).unwrap());
        let a = significance_curve(&g, &[10, 100], 64, 2.0, Orientation::Auto, 77).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| significance_curve(&g, &[10, 100], 64, 2.0, Orientation::Auto, 77).unwrap());
        assert_eq!(a, b);
        let c = significance_curve(&g, &[10, 100], 64, 2.0, Orientation::Auto, 78).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn orientation_modes() {
        assert_eq!(orient(-2.5, -2.0, Orientation::Auto), 2.5);
        assert_eq!(orient(-2.5, 1.0, Orientation::Auto), -2.5);
        assert_eq!(orient(-2.5, 1.0, Orientation::Signed), -2.5);
        assert_eq!(orient(-2.5, 1.0, Orientation::Absolute), 2.5);
        assert_eq!(orient(0.5, 0.0, Orientation::Auto), 0.5);
    }

    #[test]
    fn study_spec_parsing() {
        let text = r#"
            n_values = [100, 1000]
            trials = 10
            [generator]
            kind = "lhv"
            model = { variant = "boundary_mixture" }
        "#;
        let spec = StudySpec::from_toml(text).unwrap();
        assert_eq!(spec.threshold, 2.0);
        assert_eq!(spec.orientation, Orientation::Auto);
        assert_eq!(StudySpec::from_toml(&spec.to_toml()).unwrap(), spec);

        let quantum = r#"
            n_values = [10]
            trials = 2
            orientation = "absolute"
            [generator]
            kind = "quantum"
            state = "singlet"
            angles = [0.0, 0.7853981633974483, 0.39269908169744414, -0.39269908169744414]
            convention = "polarization"
        "#;
        let spec = StudySpec::from_toml(quantum).unwrap();
        let s = spec.generator.build().unwrap().exact_s().unwrap();
        assert!((s.abs() - 2.0 * 2f64.sqrt()).abs() < 1e-12);

        for bad in [
            "n_values = []\ntrials = 1\n[generator]\nkind = \"lhv\"\nmodel = { variant = \"boundary_mixture\" }",
            "n_values = [5, 5]\ntrials = 1\n[generator]\nkind = \"lhv\"\nmodel = { variant = \"boundary_mixture\" }",
            "n_values = [5]\ntrials = 0\n[generator]\nkind = \"lhv\"\nmodel = { variant = \"boundary_mixture\" }",
            "n_values = [5]\ntrials = 1\nbogus = 1\n[generator]\nkind = \"lhv\"\nmodel = { variant = \"boundary_mixture\" }",
            "n_values = [5]\ntrials = 1\n[generator]\nkind = \"quantum\"\nstate = [[1.0, 0.0]]",
        ] {
            let err = StudySpec::from_toml(bad).and_then(|s| s.generator.build().map(|_| ()));
            assert!(err.unwrap_err().is_config(), "{bad}");
        }
    }

    #[test]
    fn matrix_state_spec() {
        let mut v = vec![[0.0, 0.0]; 16];
        for k in 0..4 {
            v[5 * k] = [0.25, 0.0];
        }
        let rho = StateSpec::Matrix(v).build().unwrap();
        assert_eq!(rho, DensityMatrix::maximally_mixed());
    }
}
