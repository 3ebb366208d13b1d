//! Bell-local realistic couplings.
//!
//! A hidden variable λ is drawn from a density ρ on Λ and both parties answer
//! with deterministic ±1 response functions `A_i(λ)`, `B_j(λ)`. The exact
//! correlation of context `(i, j)` is `∫ A_i(λ) B_j(λ) ρ(λ) dλ`.
//!
//! Sampling a counterfactual table reuses one λ for all four columns of a row.
//! Sampling a bundle draws fresh λ per trial per context from four independent
//! streams.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    Context, ContextDataset, CounterfactualRow, CounterfactualTable, ExperimentBundle, Outcome,
    Provenance, Setting, Tally,
};
use crate::quadrature::{adaptive_simpson, MAX_SUBDIVISIONS};
use crate::rng::{self, StreamRng, TAG_CONTEXT, TAG_TABLE};

/// Absolute tolerance of [`exact_lhv_correlation`].
pub const QUADRATURE_TOL: f64 = 1e-8;
/// Allowed deviation of the total density mass from 1.
pub const DENSITY_TOL: f64 = 1e-9;

/// Deterministic response functions of the two parties.
///
/// For a finite Λ the hidden value passed in is the element index as `f64`.
pub trait ResponseFunctions: Send + Sync + fmt::Debug {
    fn alice(&self, setting: Setting, lambda: f64) -> Outcome;
    fn bob(&self, setting: Setting, lambda: f64) -> Outcome;

    /// Points of Λ where `A_i·B_j` may change sign, if known analytically.
    fn breakpoints(&self, _context: Context) -> Option<Vec<f64>> {
        None
    }
}

#[derive(Clone)]
pub enum Density {
    Uniform,
    /// `pdf` must be bounded above by `max` on the interval (used for rejection sampling).
    Custom {
        pdf: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        max: f64,
    },
}

impl fmt::Debug for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Density::Uniform => write!(f, "Uniform"),
            Density::Custom { max, .. } => write!(f, "Custom {{ max: {max} }}"),
        }
    }
}

#[derive(Clone, Debug)]
pub enum HiddenSpace {
    Interval { lo: f64, hi: f64, density: Density },
    Finite { weights: Vec<f64> },
}

#[derive(Clone, Debug)]
pub struct LhvModel {
    name: String,
    space: HiddenSpace,
    responses: Arc<dyn ResponseFunctions>,
    cumulative: Vec<f64>,
}

impl LhvModel {
    pub fn new(
        name: impl Into<String>,
        space: HiddenSpace,
        responses: Arc<dyn ResponseFunctions>,
    ) -> Result<Self> {
        let mut cumulative = Vec::new();
        match &space {
            HiddenSpace::Finite { weights } => {
                if weights.is_empty() {
                    return Err(Error::config("finite hidden space has no elements"));
                }
                if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
                    return Err(Error::config("hidden-variable weights must be finite and nonnegative"));
                }
                let mut acc = 0.0;
                for w in weights {
                    acc += w;
                    cumulative.push(acc);
                }
                if (acc - 1.0).abs() > DENSITY_TOL {
                    return Err(Error::config(format!("hidden-variable weights sum to {acc}, not 1")));
                }
            }
            HiddenSpace::Interval { lo, hi, density } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::config(format!("invalid hidden interval [{lo}, {hi})")));
                }
                if let Density::Custom { pdf, max } = density {
                    if !(max.is_finite() && *max > 0.0) {
                        return Err(Error::config("density bound must be positive and finite"));
                    }
                    let mut budget = MAX_SUBDIVISIONS;
                    let mass = adaptive_simpson(pdf.as_ref(), *lo, *hi, 1e-11, &mut budget)
                        .map_err(|e| Error::config(format!("cannot normalize density: {e}")))?;
                    if (mass - 1.0).abs() > DENSITY_TOL {
                        return Err(Error::config(format!("density integrates to {mass}, not 1")));
                    }
                }
            }
        }
        Ok(LhvModel {
            name: name.into(),
            space,
            responses,
            cumulative,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn space(&self) -> &HiddenSpace {
        &self.space
    }

    pub fn responses(&self) -> &dyn ResponseFunctions {
        self.responses.as_ref()
    }

    #[inline]
    fn draw_lambda(&self, rng: &mut StreamRng) -> f64 {
        match &self.space {
            HiddenSpace::Finite { .. } => {
                let u: f64 = rng.random();
                let k = self.cumulative.partition_point(|&c| c <= u);
                k.min(self.cumulative.len() - 1) as f64
            }
            HiddenSpace::Interval { lo, hi, density } => match density {
                Density::Uniform => lo + (hi - lo) * rng.random::<f64>(),
                Density::Custom { pdf, max } => loop {
                    let x = lo + (hi - lo) * rng.random::<f64>();
                    if max * rng.random::<f64>() < pdf(x) {
                        break x;
                    }
                },
            },
        }
    }

    fn row_at(&self, lambda: f64) -> CounterfactualRow {
        let r = &self.responses;
        CounterfactualRow::new(
            r.alice(Setting::One, lambda),
            r.alice(Setting::Two, lambda),
            r.bob(Setting::One, lambda),
            r.bob(Setting::Two, lambda),
        )
    }

    fn pair_at(&self, context: Context, lambda: f64) -> (Outcome, Outcome) {
        (
            self.responses.alice(context.alice, lambda),
            self.responses.bob(context.bob, lambda),
        )
    }

    fn context_stream(seed: u64, context: Context) -> StreamRng {
        rng::stream(seed, &[TAG_CONTEXT, context.slot() as u64])
    }

    /// Exact per-context tallies of the bundle [`sample_bundle`] would produce.
    pub fn sample_tallies(&self, n_per_context: usize, seed: u64) -> Result<[Tally; 4]> {
        if n_per_context == 0 {
            return Err(Error::domain("n_per_context must be at least 1"));
        }
        let mut out = [Tally::default(); 4];
        for context in Context::ALL {
            let mut rng = Self::context_stream(seed, context);
            let tally = &mut out[context.slot()];
            if let HiddenSpace::Finite { weights } = &self.space {
                // Same draws as the generic path, with the products looked up per element.
                let products: Vec<(Outcome, Outcome)> =
                    (0..weights.len()).map(|k| self.pair_at(context, k as f64)).collect();
                for _ in 0..n_per_context {
                    let k = self.draw_lambda(&mut rng) as usize;
                    let (a, b) = products[k];
                    tally.push(a, b);
                }
            } else {
                for _ in 0..n_per_context {
                    let lambda = self.draw_lambda(&mut rng);
                    let (a, b) = self.pair_at(context, lambda);
                    tally.push(a, b);
                }
            }
        }
        Ok(out)
    }
}

/// One row per λ draw; the four outcomes of a row share that λ.
pub fn sample_counterfactual_table(model: &LhvModel, n: usize, seed: u64) -> Result<CounterfactualTable> {
    if n == 0 {
        return Err(Error::domain("table size must be at least 1"));
    }
    let mut rng = rng::stream(seed, &[TAG_TABLE]);
    let rows = (0..n).map(|_| model.row_at(model.draw_lambda(&mut rng))).collect();
    Ok(CounterfactualTable::new(rows).with_provenance(Provenance::new(model.name(), Some(seed))))
}

/// Four independent experiments, fresh λ per trial per context.
pub fn sample_bundle(model: &LhvModel, n_per_context: usize, seed: u64) -> Result<ExperimentBundle> {
    if n_per_context == 0 {
        return Err(Error::domain("n_per_context must be at least 1"));
    }
    let datasets = Context::ALL
        .iter()
        .map(|&context| {
            let mut rng = LhvModel::context_stream(seed, context);
            let pairs = (0..n_per_context)
                .map(|_| model.pair_at(context, model.draw_lambda(&mut rng)))
                .collect();
            ContextDataset {
                context,
                pairs,
                seed: Some(seed),
            }
        })
        .collect();
    ExperimentBundle::new(datasets)
}

fn product_at(model: &LhvModel, context: Context, lambda: f64) -> i8 {
    let (a, b) = model.pair_at(context, lambda);
    (a * b).value()
}

/// Sign changes of `A_i·B_j` found by scanning a grid and bisecting each flip.
fn discover_breakpoints(model: &LhvModel, context: Context, lo: f64, hi: f64) -> Vec<f64> {
    const CELLS: usize = 1 << 12;
    let h = (hi - lo) / CELLS as f64;
    let mut out = Vec::new();
    let mut left = lo;
    let mut p_left = product_at(model, context, left);
    for k in 1..=CELLS {
        let right = if k == CELLS { hi } else { lo + k as f64 * h };
        let p_right = product_at(model, context, right);
        if p_right != p_left {
            let (mut a, mut b) = (left, right);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                if product_at(model, context, m) == p_left {
                    a = m;
                } else {
                    b = m;
                }
            }
            out.push(0.5 * (a + b));
        }
        left = right;
        p_left = p_right;
    }
    out
}

/// `∫ A_i(λ) B_j(λ) ρ(λ) dλ`, to absolute error [`QUADRATURE_TOL`].
pub fn exact_lhv_correlation(model: &LhvModel, context: Context) -> Result<f64> {
    match &model.space {
        HiddenSpace::Finite { weights } => Ok(weights
            .iter()
            .enumerate()
            .map(|(k, w)| w * f64::from(product_at(model, context, k as f64)))
            .sum()),
        HiddenSpace::Interval { lo, hi, density } => {
            let (lo, hi) = (*lo, *hi);
            let mut cuts = model
                .responses
                .breakpoints(context)
                .unwrap_or_else(|| discover_breakpoints(model, context, lo, hi));
            cuts.retain(|x| x.is_finite() && *x > lo && *x < hi);
            cuts.push(lo);
            cuts.push(hi);
            cuts.sort_by(f64::total_cmp);
            cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * (hi - lo));

            let pieces = cuts.len() - 1;
            let mut budget = MAX_SUBDIVISIONS;
            let mut total = 0.0;
            for w in cuts.windows(2) {
                let (a, b) = (w[0], w[1]);
                let sign = f64::from(product_at(model, context, 0.5 * (a + b)));
                let mass = match density {
                    Density::Uniform => (b - a) / (hi - lo),
                    Density::Custom { pdf, .. } => adaptive_simpson(
                        pdf.as_ref(),
                        a,
                        b,
                        QUADRATURE_TOL / pieces as f64,
                        &mut budget,
                    )
                    .map_err(|e| {
                        Error::Numeric(format!("{e} (model {}, context {context})", model.name))
                    })?,
                };
                total += sign * mass;
            }
            Ok(total)
        }
    }
}

pub fn exact_lhv_s(model: &LhvModel) -> Result<f64> {
    let mut s = 0.0;
    for context in Context::ALL {
        s += context.chsh_sign() as f64 * exact_lhv_correlation(model, context)?;
    }
    Ok(s)
}

/// λ uniform on [0, 2π); `A_i = sign(cos(λ − a_i))`, `B_j = bob_sign · sign(cos(λ − b_j))`.
#[derive(Clone, Debug, PartialEq)]
pub struct SignCosine {
    pub alice_angles: [f64; 2],
    pub bob_angles: [f64; 2],
    pub bob_sign: i8,
}

fn sign_cos(x: f64) -> Outcome {
    Outcome::from_sign(x.cos() >= 0.0)
}

impl ResponseFunctions for SignCosine {
    fn alice(&self, setting: Setting, lambda: f64) -> Outcome {
        sign_cos(lambda - self.alice_angles[usize::from(setting.index() - 1)])
    }

    fn bob(&self, setting: Setting, lambda: f64) -> Outcome {
        let o = sign_cos(lambda - self.bob_angles[usize::from(setting.index() - 1)]);
        if self.bob_sign < 0 {
            -o
        } else {
            o
        }
    }

    fn breakpoints(&self, context: Context) -> Option<Vec<f64>> {
        let a = self.alice_angles[usize::from(context.alice.index() - 1)];
        let b = self.bob_angles[usize::from(context.bob.index() - 1)];
        Some(
            [a - FRAC_PI_2, a + FRAC_PI_2, b - FRAC_PI_2, b + FRAC_PI_2]
                .iter()
                .map(|x| x.rem_euclid(TAU))
                .collect(),
        )
    }
}

/// Each λ is an index into a list of deterministic strategies.
#[derive(Clone, Debug, PartialEq)]
pub struct StrategyTable {
    pub strategies: Vec<CounterfactualRow>,
}

impl ResponseFunctions for StrategyTable {
    fn alice(&self, setting: Setting, lambda: f64) -> Outcome {
        self.strategies[lambda as usize].alice(setting)
    }

    fn bob(&self, setting: Setting, lambda: f64) -> Outcome {
        self.strategies[lambda as usize].bob(setting)
    }
}

/// Mixture component: a deterministic strategy `[a1, a2, b1, b2]` and its weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub row: [i64; 4],
}

/// Model specification file contents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum BuiltinModelSpec {
    SignCosine {
        a1: f64,
        a2: f64,
        b1: f64,
        b2: f64,
        #[serde(default = "default_bob_sign")]
        bob_sign: i8,
    },
    /// Mixture of deterministic strategies whose row value `C` is +2, so the exact `S` is 2.
    BoundaryMixture {
        #[serde(default = "default_boundary_components")]
        components: Vec<MixtureComponent>,
    },
    Deterministic { row: [i64; 4] },
}

fn default_bob_sign() -> i8 {
    -1
}

fn default_boundary_components() -> Vec<MixtureComponent> {
    vec![
        MixtureComponent { weight: 0.5, row: [1, 1, 1, 1] },
        MixtureComponent { weight: 0.5, row: [1, 1, 1, -1] },
    ]
}

impl BuiltinModelSpec {
    /// ½·(1,1,1,1) + ½·(1,1,1,−1): correlations (1, 0, 1, 0), exact `S = 2`.
    pub fn boundary() -> Self {
        BuiltinModelSpec::BoundaryMixture {
            components: default_boundary_components(),
        }
    }

    pub fn all_plus() -> Self {
        BuiltinModelSpec::Deterministic { row: [1, 1, 1, 1] }
    }

    /// Anticorrelated sign-cosine model with `a2 = b2 = 0`, `a1 = x`, `b1 = −x`,
    /// whose exact `S` is `8x/π − 2`; `x` is chosen to hit `target_s ∈ [−2, 2]`.
    pub fn sign_cosine_with_s(target_s: f64) -> Result<Self> {
        if !(-2.0..=2.0).contains(&target_s) {
            return Err(Error::config(format!("LHV target S must lie in [-2, 2], got {target_s}")));
        }
        let x = (target_s + 2.0) * PI / 8.0;
        Ok(BuiltinModelSpec::SignCosine {
            a1: x,
            a2: 0.0,
            b1: -x,
            b2: 0.0,
            bob_sign: -1,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("invalid model spec: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("model spec serializes")
    }

    pub fn build(&self) -> Result<LhvModel> {
        match self {
            BuiltinModelSpec::SignCosine { a1, a2, b1, b2, bob_sign } => {
                if ![a1, a2, b1, b2].iter().all(|x| x.is_finite()) {
                    return Err(Error::config("sign_cosine angles must be finite"));
                }
                if *bob_sign != 1 && *bob_sign != -1 {
                    return Err(Error::config("bob_sign must be 1 or -1"));
                }
                LhvModel::new(
                    format!("sign_cosine(a1={a1}, a2={a2}, b1={b1}, b2={b2}, bob_sign={bob_sign})"),
                    HiddenSpace::Interval { lo: 0.0, hi: TAU, density: Density::Uniform },
                    Arc::new(SignCosine {
                        alice_angles: [*a1, *a2],
                        bob_angles: [*b1, *b2],
                        bob_sign: *bob_sign,
                    }),
                )
            }
            BuiltinModelSpec::BoundaryMixture { components } => {
                let mut strategies = Vec::with_capacity(components.len());
                for c in components {
                    let row = CounterfactualRow::from_values(c.row)
                        .map_err(|e| Error::config(e.to_string()))?;
                    if row.c_value() != 2 {
                        return Err(Error::config(format!(
                            "boundary_mixture strategy {:?} has C = {}, expected +2",
                            c.row,
                            row.c_value()
                        )));
                    }
                    strategies.push(row);
                }
                LhvModel::new(
                    "boundary_mixture",
                    HiddenSpace::Finite {
                        weights: components.iter().map(|c| c.weight).collect(),
                    },
                    Arc::new(StrategyTable { strategies }),
                )
            }
            BuiltinModelSpec::Deterministic { row } => {
                let row = CounterfactualRow::from_values(*row).map_err(|e| Error::config(e.to_string()))?;
                LhvModel::new(
                    format!("deterministic{:?}", row.values()),
                    HiddenSpace::Finite { weights: vec![1.0] },
                    Arc::new(StrategyTable { strategies: vec![row] }),
                )
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{b_statistic, correlation, s_statistic};
    use std::f64::consts::FRAC_PI_4;

    /// Closed form for the anticorrelated sign-cosine model: `2d/π − 1`, `d` the angular distance.
    fn closed_form(a: f64, b: f64) -> f64 {
        let d = (a - b).rem_euclid(TAU);
        let d = d.min(TAU - d);
        2.0 * d / PI - 1.0
    }

    /// Midpoint-rule discretization of λ, independent of the breakpoint logic.
    fn brute_force(a: f64, b: f64, cells: usize) -> f64 {
        let h = TAU / cells as f64;
        let mut acc = 0i64;
        for k in 0..cells {
            let l = (k as f64 + 0.5) * h;
            let pa = if (l - a).cos() >= 0.0 { 1 } else { -1 };
            let pb = if (l - b).cos() >= 0.0 { -1 } else { 1 };
            acc += pa * pb;
        }
        acc as f64 / cells as f64
    }

    #[test]
    fn closed_form_agrees_with_brute_force() {
        for (a, b) in [(0.0, 0.0), (0.0, 1.0), (0.3, 2.9), (5.0, 1.0), (0.0, PI)] {
            assert!((closed_form(a, b) - brute_force(a, b, 1 << 20)).abs() < 1e-5, "{a} {b}");
        }
    }

    fn sign_cosine(a1: f64, a2: f64, b1: f64, b2: f64) -> LhvModel {
        BuiltinModelSpec::SignCosine { a1, a2, b1, b2, bob_sign: -1 }.build().unwrap()
    }

    #[test]
    fn quadrature_matches_closed_form_on_a_grid() {
        for i in 0..12 {
            for j in 0..12 {
                let (a, b) = (i as f64 * 0.53, j as f64 * 0.71 - 2.0);
                let m = sign_cosine(a, 0.0, b, 0.0);
                let e = exact_lhv_correlation(&m, Context::ALL[0]).unwrap();
                assert!((e - closed_form(a, b)).abs() < 1e-12, "{a} {b}: {e}");
            }
        }
    }

    #[derive(Debug)]
    struct NoHints(SignCosine);

    impl ResponseFunctions for NoHints {
        fn alice(&self, s: Setting, l: f64) -> Outcome {
            self.0.alice(s, l)
        }
        fn bob(&self, s: Setting, l: f64) -> Outcome {
            self.0.bob(s, l)
        }
    }

    #[test]
    fn discovered_breakpoints_match_analytic_ones() {
        let inner = SignCosine { alice_angles: [0.2, 1.4], bob_angles: [2.2, -0.9], bob_sign: -1 };
        let hinted = LhvModel::new(
            "hinted",
            HiddenSpace::Interval { lo: 0.0, hi: TAU, density: Density::Uniform },
            Arc::new(inner.clone()),
        )
        .unwrap();
        let blind = LhvModel::new(
            "blind",
            HiddenSpace::Interval { lo: 0.0, hi: TAU, density: Density::Uniform },
            Arc::new(NoHints(inner)),
        )
        .unwrap();
        for c in Context::ALL {
            let a = exact_lhv_correlation(&hinted, c).unwrap();
            let b = exact_lhv_correlation(&blind, c).unwrap();
            assert!((a - b).abs() < 1e-8, "{c}: {a} vs {b}");
        }
    }

    #[test]
    fn custom_density_is_integrated() {
        // ρ(λ) = (1 + sin 2λ)/2π. With a1 = 0, b1 = π/2 the raw product sign(cos λ)·sign(sin λ)
        // is +,−,+,− over the quadrants, whose masses are (π/2 ± 1)/2π alternating: E = −2/π.
        let pdf = Arc::new(|l: f64| (1.0 + (2.0 * l).sin()) / TAU);
        let model = LhvModel::new(
            "skewed",
            HiddenSpace::Interval { lo: 0.0, hi: TAU, density: Density::Custom { pdf, max: 2.0 / TAU } },
            Arc::new(SignCosine { alice_angles: [0.0, 0.0], bob_angles: [FRAC_PI_2, 0.0], bob_sign: -1 }),
        )
        .unwrap();
        let e = exact_lhv_correlation(&model, Context::ALL[0]).unwrap();
        assert!((e + 2.0 / PI).abs() < 1e-8, "{e}");
        // a = b: perfect anticorrelation whatever the density.
        let e = exact_lhv_correlation(&model, Context::ALL[1]).unwrap();
        assert!((e + 1.0).abs() < 1e-8, "{e}");
        let est = correlation(sample_bundle(&model, 40_000, 2).unwrap().dataset(Context::ALL[0])).unwrap();
        assert!((est + 2.0 / PI).abs() < 4.0 * (1.0 / 40_000f64).sqrt(), "{est}");
    }

    #[test]
    fn unnormalized_density_is_rejected() {
        let pdf = Arc::new(|_l: f64| 1.0);
        let r = LhvModel::new(
            "bad",
            HiddenSpace::Interval { lo: 0.0, hi: TAU, density: Density::Custom { pdf, max: 1.0 } },
            Arc::new(SignCosine { alice_angles: [0.0; 2], bob_angles: [0.0; 2], bob_sign: -1 }),
        );
        assert!(matches!(r, Err(Error::Config(_))));
        let r = BuiltinModelSpec::BoundaryMixture {
            components: vec![MixtureComponent { weight: 0.7, row: [1, 1, 1, 1] }],
        }
        .build();
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn boundary_mixture_rejects_c_minus_two_strategies() {
        let r = BuiltinModelSpec::BoundaryMixture {
            components: vec![MixtureComponent { weight: 1.0, row: [1, -1, 1, -1] }],
        }
        .build();
        assert!(r.is_err());
    }

    #[test]
    fn deterministic_examples() {
        let m = BuiltinModelSpec::all_plus().build().unwrap();
        let t = sample_counterfactual_table(&m, 5, 9).unwrap();
        assert_eq!(t.len(), 5);
        assert!(t.rows.iter().all(|r| r.values() == [1, 1, 1, 1]));
        for c in Context::ALL {
            assert_eq!(exact_lhv_correlation(&m, c).unwrap(), 1.0);
        }
        assert_eq!(exact_lhv_s(&m).unwrap(), 2.0);
        assert_eq!(s_statistic(&sample_bundle(&m, 10, 1).unwrap()).unwrap(), 2.0);
    }

    #[test]
    fn boundary_mixture_exact_values() {
        let m = BuiltinModelSpec::boundary().build().unwrap();
        let e: Vec<f64> = Context::ALL.iter().map(|&c| exact_lhv_correlation(&m, c).unwrap()).collect();
        assert_eq!(e, vec![1.0, 0.0, 1.0, 0.0]);
        assert_eq!(exact_lhv_s(&m).unwrap(), 2.0);
    }

    #[test]
    fn sign_cosine_example_angles() {
        let m = sign_cosine(0.0, FRAC_PI_2, FRAC_PI_4, 3.0 * FRAC_PI_4);
        let s = exact_lhv_s(&m).unwrap();
        assert!((-2.0..=2.0).contains(&s));
        // Distances π/4, 3π/4, π/4, π/4 → E = (−½, ½, −½, −½).
        assert!(s.abs() < 1e-12, "{s}");
    }

    #[test]
    fn sign_cosine_with_target_s() {
        for target in [-2.0, -0.5, 0.0, 1.6, 1.8, 2.0] {
            let m = BuiltinModelSpec::sign_cosine_with_s(target).unwrap().build().unwrap();
            assert!((exact_lhv_s(&m).unwrap() - target).abs() < 1e-12, "{target}");
        }
        assert!(BuiltinModelSpec::sign_cosine_with_s(2.5).is_err());
    }

    #[test]
    fn equal_angles_give_perfect_anticorrelation_per_row() {
        let m = sign_cosine(0.7, 0.1, 0.7, 2.0);
        let t = sample_counterfactual_table(&m, 500, 3).unwrap();
        assert!(t.rows.iter().all(|r| r.a1 == -r.b1));
        assert_eq!(exact_lhv_correlation(&m, Context::ALL[0]).unwrap(), -1.0);
    }

    #[test]
    fn sampled_table_obeys_b_bound() {
        let m = sign_cosine(0.0, FRAC_PI_2, FRAC_PI_4, -FRAC_PI_4);
        for seed in 0..20 {
            let b = b_statistic(&sample_counterfactual_table(&m, 257, seed).unwrap()).unwrap();
            assert!(b.abs() <= 2.0);
        }
    }

    #[test]
    fn sampled_correlations_are_consistent_with_quadrature() {
        let m = sign_cosine(0.0, FRAC_PI_2, FRAC_PI_4, 3.0 * FRAC_PI_4);
        let n = 20_000;
        let bundle = sample_bundle(&m, n, 77).unwrap();
        for c in Context::ALL {
            let e = exact_lhv_correlation(&m, c).unwrap();
            let se = ((1.0 - e * e) / n as f64).sqrt();
            let est = correlation(bundle.dataset(c)).unwrap();
            assert!((est - e).abs() <= 4.0 * se, "{c}: {est} vs {e}");
        }
    }

    #[test]
    fn tallies_match_materialized_bundle() {
        for spec in [BuiltinModelSpec::boundary(), BuiltinModelSpec::sign_cosine_with_s(1.8).unwrap()] {
            let m = spec.build().unwrap();
            let bundle = sample_bundle(&m, 333, 5).unwrap();
            assert_eq!(m.sample_tallies(333, 5).unwrap(), bundle.tallies());
        }
    }

    #[test]
    fn sampling_is_deterministic_and_seed_sensitive() {
        let m = BuiltinModelSpec::boundary().build().unwrap();
        assert_eq!(sample_bundle(&m, 100, 11).unwrap(), sample_bundle(&m, 100, 11).unwrap());
        assert_ne!(sample_bundle(&m, 100, 11).unwrap(), sample_bundle(&m, 100, 12).unwrap());
        assert!(sample_bundle(&m, 0, 1).is_err());
        assert!(sample_counterfactual_table(&m, 0, 1).is_err());
    }

    #[test]
    fn spec_toml_roundtrip_and_unknown_keys() {
        let spec = BuiltinModelSpec::from_toml("variant = \"sign_cosine\"\na1 = 0.0\na2 = 1.0\nb1 = 0.5\nb2 = -0.5\n").unwrap();
        assert!(matches!(spec, BuiltinModelSpec::SignCosine { bob_sign: -1, .. }));
        assert_eq!(BuiltinModelSpec::from_toml(&spec.to_toml()).unwrap(), spec);
        let spec = BuiltinModelSpec::from_toml("variant = \"boundary_mixture\"\n").unwrap();
        assert_eq!(spec, BuiltinModelSpec::boundary());
        assert!(BuiltinModelSpec::from_toml("variant = \"deterministic\"\nrow = [1,1,1,1]\ncolour = 3\n").is_err());
        assert!(BuiltinModelSpec::from_toml("variant = \"nonlocal\"\n").is_err());
    }
}
