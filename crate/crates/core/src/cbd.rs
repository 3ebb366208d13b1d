//! Context-labelled behaviors: one outcome-pair distribution per context.
//!
//! Nothing ties the four distributions together, so `|S| ≤ 4` is the only
//! a priori bound. Whether they come from a single joint distribution is the
//! question answered in [`crate::feasibility`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    s_from_tallies, slot_pair, Context, ContextDataset, ExperimentBundle, Tally,
};
use crate::quantum::{born_probabilities, AngleQuadruple, DensityMatrix};
use crate::rng::{self, StreamRng, TAG_CONTEXT};

/// Tolerance on each context's probability mass.
pub const PROBABILITY_TOL: f64 = 1e-12;

/// Per-context distributions over `(+,+), (+,−), (−,+), (−,−)` in canonical context order.
#[derive(Clone, Debug, PartialEq)]
pub struct Behavior {
    probs: [[f64; 4]; 4],
    counts: Option<[[u64; 4]; 4]>,
}

impl Behavior {
    pub fn new(probs: [[f64; 4]; 4]) -> Result<Self> {
        for (slot, p) in probs.iter().enumerate() {
            let ctx = Context::ALL[slot];
            if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::domain(format!("context {ctx}: probabilities must be nonnegative, got {p:?}")));
            }
            let total: f64 = p.iter().sum();
            if (total - 1.0).abs() > PROBABILITY_TOL {
                return Err(Error::domain(format!("context {ctx}: probabilities sum to {total}, not 1")));
            }
        }
        Ok(Behavior { probs, counts: None })
    }

    /// Empirical behavior; the raw counts are kept alongside the frequencies.
    pub fn from_counts(counts: [[u64; 4]; 4]) -> Result<Self> {
        let mut probs = [[0.0; 4]; 4];
        for (slot, c) in counts.iter().enumerate() {
            let n: u64 = c.iter().sum();
            if n == 0 {
                return Err(Error::domain(format!(
                    "context {}: statistic undefined for N=0",
                    Context::ALL[slot]
                )));
            }
            for k in 0..4 {
                probs[slot][k] = c[k] as f64 / n as f64;
            }
        }
        Ok(Behavior { probs, counts: Some(counts) })
    }

    pub fn probabilities(&self) -> &[[f64; 4]; 4] {
        &self.probs
    }

    pub fn context(&self, c: Context) -> &[f64; 4] {
        &self.probs[c.slot()]
    }

    pub fn counts(&self) -> Option<&[[u64; 4]; 4]> {
        self.counts.as_ref()
    }

    fn tallies(&self) -> Option<[Tally; 4]> {
        self.counts.map(|counts| {
            counts.map(|c| Tally {
                n: c.iter().sum(),
                product_sum: c[0] as i64 - c[1] as i64 - c[2] as i64 + c[3] as i64,
            })
        })
    }

    /// Probability that Alice's outcome is +1 in context `c`.
    pub fn alice_plus(&self, c: Context) -> f64 {
        let p = self.context(c);
        p[0] + p[1]
    }

    pub fn bob_plus(&self, c: Context) -> f64 {
        let p = self.context(c);
        p[0] + p[2]
    }

    pub fn from_quantum(rho: &DensityMatrix, angles: &AngleQuadruple) -> Result<Self> {
        let mut probs = [[0.0; 4]; 4];
        for c in Context::ALL {
            let (a, b) = angles.for_context(c);
            probs[c.slot()] = born_probabilities(rho, a, b)?;
        }
        Behavior::new(probs)
    }

    pub fn from_bundle(bundle: &ExperimentBundle) -> Result<Self> {
        Behavior::from_counts(bundle.datasets().each_ref().map(|d| d.outcome_counts()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: BehaviorFile =
            toml::from_str(text).map_err(|e| Error::config(format!("invalid behavior file: {e}")))?;
        file.into_behavior()
    }

    pub fn to_toml(&self) -> String {
        let file = BehaviorFile {
            p11: Some(self.probs[0]),
            p12: Some(self.probs[1]),
            p21: Some(self.probs[2]),
            p22: Some(self.probs[3]),
            counts11: self.counts.map(|c| c[0]),
            counts12: self.counts.map(|c| c[1]),
            counts21: self.counts.map(|c| c[2]),
            counts22: self.counts.map(|c| c[3]),
        };
        toml::to_string(&file).expect("behavior serializes")
    }
}

/// On-disk behavior: probabilities and/or integer counts per canonical context.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BehaviorFile {
    p11: Option<[f64; 4]>,
    p12: Option<[f64; 4]>,
    p21: Option<[f64; 4]>,
    p22: Option<[f64; 4]>,
    counts11: Option<[u64; 4]>,
    counts12: Option<[u64; 4]>,
    counts21: Option<[u64; 4]>,
    counts22: Option<[u64; 4]>,
}

impl BehaviorFile {
    fn into_behavior(self) -> Result<Behavior> {
        let probs = [self.p11, self.p12, self.p21, self.p22];
        let counts = [self.counts11, self.counts12, self.counts21, self.counts22];
        let all_or_none = |n: usize, what: &str| -> Result<bool> {
            match n {
                0 => Ok(false),
                4 => Ok(true),
                _ => Err(Error::config(format!("{what} must be given for all four contexts or none"))),
            }
        };
        let has_p = all_or_none(probs.iter().flatten().count(), "probabilities")?;
        let has_c = all_or_none(counts.iter().flatten().count(), "counts")?;
        let config = |e: Error| Error::config(e.to_string());
        match (has_p, has_c) {
            (false, false) => Err(Error::config("behavior file has neither probabilities nor counts")),
            (true, false) => Behavior::new(probs.map(|p| p.unwrap())).map_err(config),
            (false, true) => Behavior::from_counts(counts.map(|c| c.unwrap())).map_err(config),
            (true, true) => {
                let stated = Behavior::new(probs.map(|p| p.unwrap())).map_err(config)?;
                let counted = Behavior::from_counts(counts.map(|c| c.unwrap())).map_err(config)?;
                let max_diff = stated
                    .probs
                    .iter()
                    .flatten()
                    .zip(counted.probs.iter().flatten())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                if max_diff > 1e-9 {
                    return Err(Error::config(format!(
                        "probabilities disagree with counts by {max_diff:.3e}"
                    )));
                }
                Ok(counted)
            }
        }
    }
}

pub fn behavior_correlation(behavior: &Behavior, context: Context) -> f64 {
    if let Some(t) = behavior.tallies() {
        return t[context.slot()].product_sum as f64 / t[context.slot()].n as f64;
    }
    let p = behavior.context(context);
    p[0] + p[3] - p[1] - p[2]
}

/// `E11 + E12 + E21 − E22`; exact integer arithmetic when counts are present.
pub fn behavior_s(behavior: &Behavior) -> f64 {
    if let Some(t) = behavior.tallies() {
        return s_from_tallies(&t).expect("from_counts guarantees nonempty contexts");
    }
    Context::ALL
        .iter()
        .map(|&c| c.chsh_sign() as f64 * behavior_correlation(behavior, c))
        .sum()
}

/// Perfect correlation in (1,1), (1,2), (2,1) and perfect anticorrelation in (2,2).
pub fn pr_box() -> Behavior {
    let corr = [0.5, 0.0, 0.0, 0.5];
    let anti = [0.0, 0.5, 0.5, 0.0];
    Behavior::new([corr, corr, corr, anti]).expect("PR box is a valid behavior")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SignalingReport {
    /// Largest change of Alice's marginal when Bob switches settings.
    pub alice_deficit: f64,
    pub bob_deficit: f64,
    pub max_deficit: f64,
}

pub fn no_signaling(behavior: &Behavior) -> SignalingReport {
    let ctx = |i, j| Context::from_indices(i, j).expect("valid indices");
    let alice_deficit = (1..=2)
        .map(|i| (behavior.alice_plus(ctx(i, 1)) - behavior.alice_plus(ctx(i, 2))).abs())
        .fold(0.0, f64::max);
    let bob_deficit = (1..=2)
        .map(|j| (behavior.bob_plus(ctx(1, j)) - behavior.bob_plus(ctx(2, j))).abs())
        .fold(0.0, f64::max);
    SignalingReport {
        alice_deficit,
        bob_deficit,
        max_deficit: alice_deficit.max(bob_deficit),
    }
}

/// A no-signaling behavior from Alice's and Bob's mean outcomes `[mA1, mA2]`,
/// `[mB1, mB2]` and the four correlations; fails if any probability is negative.
pub fn no_signaling_behavior(alice_means: [f64; 2], bob_means: [f64; 2], correlations: [f64; 4]) -> Result<Behavior> {
    let probs = Context::ALL.map(|c| {
        let ma = alice_means[usize::from(c.alice.index()) - 1];
        let mb = bob_means[usize::from(c.bob.index()) - 1];
        let e = correlations[c.slot()];
        let p = [1.0 + ma + mb + e, 1.0 + ma - mb - e, 1.0 - ma + mb - e, 1.0 - ma - mb + e];
        p.map(|v| if v < 0.0 && v > -1e-14 { 0.0 } else { v / 4.0 })
    });
    Behavior::new(probs)
}

/// Random no-signaling behavior: means uniform in `[−r, r]` for a random `r ∈ [0, 1]`,
/// each correlation uniform over the range the means allow.
pub fn random_no_signaling<R: Rng + ?Sized>(rng: &mut R) -> Behavior {
    let r: f64 = rng.random();
    let mut mean = || r * (2.0 * rng.random::<f64>() - 1.0);
    let alice = [mean(), mean()];
    let bob = [mean(), mean()];
    let e = Context::ALL.map(|c| {
        let ma = alice[usize::from(c.alice.index()) - 1];
        let mb = bob[usize::from(c.bob.index()) - 1];
        let lo = (ma + mb).abs() - 1.0;
        let hi = 1.0 - (ma - mb).abs();
        lo + (hi - lo) * rng.random::<f64>()
    });
    no_signaling_behavior(alice, bob, e).expect("correlations lie in the allowed range")
}

pub fn behavior_from_quantum(rho: &DensityMatrix, angles: &AngleQuadruple) -> Result<Behavior> {
    Behavior::from_quantum(rho, angles)
}

pub fn behavior_from_bundle(bundle: &ExperimentBundle) -> Result<Behavior> {
    Behavior::from_bundle(bundle)
}

#[inline]
fn draw_slot(cumulative: &[f64; 4], rng: &mut StreamRng) -> usize {
    let u: f64 = rng.random();
    cumulative.iter().position(|&c| u < c).unwrap_or(3)
}

fn cumulative(p: &[f64; 4]) -> [f64; 4] {
    let mut acc = 0.0;
    p.map(|v| {
        acc += v;
        acc
    })
}

/// Per-context i.i.d. categorical draws, one independent stream per context.
pub fn sample_bundle_from_probabilities(
    probs: &[[f64; 4]; 4],
    n_per_context: usize,
    seed: u64,
) -> Result<ExperimentBundle> {
    if n_per_context == 0 {
        return Err(Error::domain("n_per_context must be at least 1"));
    }
    let datasets = Context::ALL
        .iter()
        .map(|&context| {
            let cum = cumulative(&probs[context.slot()]);
            let mut rng = rng::stream(seed, &[TAG_CONTEXT, context.slot() as u64]);
            let pairs = (0..n_per_context).map(|_| slot_pair(draw_slot(&cum, &mut rng))).collect();
            ContextDataset { context, pairs, seed: Some(seed) }
        })
        .collect();
    ExperimentBundle::new(datasets)
}

/// Tallies of the bundle [`sample_bundle_from_probabilities`] would produce.
pub fn sample_tallies_from_probabilities(
    probs: &[[f64; 4]; 4],
    n_per_context: usize,
    seed: u64,
) -> Result<[Tally; 4]> {
    if n_per_context == 0 {
        return Err(Error::domain("n_per_context must be at least 1"));
    }
    let mut out = [Tally::default(); 4];
    for context in Context::ALL {
        let cum = cumulative(&probs[context.slot()]);
        let mut rng = rng::stream(seed, &[TAG_CONTEXT, context.slot() as u64]);
        let t = &mut out[context.slot()];
        for _ in 0..n_per_context {
            let (a, b) = slot_pair(draw_slot(&cum, &mut rng));
            t.push(a, b);
        }
    }
    Ok(out)
}

pub fn sample_bundle_from_behavior(behavior: &Behavior, n_per_context: usize, seed: u64) -> Result<ExperimentBundle> {
    sample_bundle_from_probabilities(&behavior.probs, n_per_context, seed)
}
