//! Toy Gaussian-pointer readout producing one "B-value" per quadruple.
//!
//! Each reading is `g·v + σ·ε`. Products of readings with independent noise
//! are unbiased for `g²·uv`, so the mean B-value recovers the table statistic,
//! while single B-values spread well outside `[−2, 2]` and `[−2√2, 2√2]`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::CounterfactualTable;
use crate::quantum::TSIRELSON_BOUND;
use crate::rng::{self, TAG_POINTER};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PointerConfig {
    /// Readout gain `g > 0`.
    pub coupling: f64,
    /// Pointer spread `σ ≥ 0` per reading.
    pub noise_sd: f64,
}

impl PointerConfig {
    pub fn new(coupling: f64, noise_sd: f64) -> Result<Self> {
        if !(coupling.is_finite() && coupling > 0.0) {
            return Err(Error::config(format!("coupling must be positive, got {coupling}")));
        }
        if !(noise_sd.is_finite() && noise_sd >= 0.0) {
            return Err(Error::config(format!("noise_sd must be nonnegative, got {noise_sd}")));
        }
        Ok(PointerConfig { coupling, noise_sd })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PerPairRecord {
    /// `[rA1, rA2, rB1, rB2]`.
    pub readings: [f64; 4],
    pub b_value: f64,
}

impl PerPairRecord {
    fn from_readings(readings: [f64; 4], g: f64) -> Self {
        let [a1, a2, b1, b2] = readings;
        PerPairRecord {
            readings,
            b_value: (a1 * b1 + a1 * b2 + a2 * b1 - a2 * b2) / (g * g),
        }
    }
}

/// Reads every outcome of every row with an independent noisy pointer.
pub fn per_pair_b_values_lhv(
    table: &CounterfactualTable,
    config: &PointerConfig,
    seed: u64,
) -> Result<Vec<PerPairRecord>> {
    if table.is_empty() {
        return Err(Error::domain("table must have at least one row"));
    }
    let PointerConfig { coupling: g, noise_sd: sd } = *config;
    let mut rng = rng::stream(seed, &[TAG_POINTER]);
    Ok(table
        .rows
        .iter()
        .map(|row| {
            let readings = row.values().map(|v| {
                let eps: f64 = rng.sample(StandardNormal);
                g * f64::from(v) + sd * eps
            });
            PerPairRecord::from_readings(readings, g)
        })
        .collect())
}

/// Records whose B-values are Gaussian with mean and median `target_s`.
///
/// Alice's pointers read `g` exactly and Bob's read `N(g·target_s/2, σ²)`, so
/// `B = 2·rB1/g` is symmetric about `target_s`; `rB2` cancels between the
/// `a1·b2` and `a2·b2` terms.
pub fn per_pair_b_values_calibrated(
    target_s: f64,
    config: &PointerConfig,
    n: usize,
    seed: u64,
) -> Result<Vec<PerPairRecord>> {
    if n == 0 {
        return Err(Error::domain("n must be at least 1"));
    }
    if !target_s.is_finite() {
        return Err(Error::config("target_s must be finite"));
    }
    let PointerConfig { coupling: g, noise_sd: sd } = *config;
    let mean_b = g * target_s / 2.0;
    let mut rng = rng::stream(seed, &[TAG_POINTER]);
    Ok((0..n)
        .map(|_| {
            let e1: f64 = rng.sample(StandardNormal);
            let e2: f64 = rng.sample(StandardNormal);
            PerPairRecord::from_readings([g, g, mean_b + sd * e1, sd * e2], g)
        })
        .collect())
}

/// Fraction of `values` strictly above `threshold`.
pub fn exceedance_fraction(values: &[f64], threshold: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("exceedance of an empty list is undefined"));
    }
    Ok(values.iter().filter(|&&v| v > threshold).count() as f64 / values.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BValueSummary {
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    /// `sd / √count`.
    pub standard_error: f64,
    pub max: f64,
    pub exceed_2: f64,
    pub exceed_tsirelson: f64,
}

pub fn summarize(records: &[PerPairRecord]) -> Result<BValueSummary> {
    let values: Vec<f64> = records.iter().map(|r| r.b_value).collect();
    if values.is_empty() {
        return Err(Error::domain("no records to summarize"));
    }
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(BValueSummary {
        count: values.len(),
        mean,
        sd,
        standard_error: sd / k.sqrt(),
        max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        exceed_2: exceedance_fraction(&values, 2.0)?,
        exceed_tsirelson: exceedance_fraction(&values, TSIRELSON_BOUND)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lhv::{sample_counterfactual_table, BuiltinModelSpec};
    use crate::model::b_statistic;

    fn table(n: usize, seed: u64) -> CounterfactualTable {
        let model = BuiltinModelSpec::sign_cosine_with_s(1.0).unwrap().build().unwrap();
        sample_counterfactual_table(&model, n, seed).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(PointerConfig::new(0.0, 1.0).is_err());
        assert!(PointerConfig::new(1.0, -0.1).is_err());
        assert!(PointerConfig::new(1.0, f64::NAN).is_err());
        assert!(PointerConfig::new(0.3, 0.0).is_ok());
    }

    #[test]
    fn noiseless_reading_recovers_row_values() {
        let t = table(500, 1);
        let cfg = PointerConfig::new(0.7, 0.0).unwrap();
        let recs = per_pair_b_values_lhv(&t, &cfg, 2).unwrap();
        for (r, row) in recs.iter().zip(&t.rows) {
            assert!((r.b_value - f64::from(row.c_value())).abs() < 1e-12);
        }
        let mean = summarize(&recs).unwrap().mean;
        assert!((mean - b_statistic(&t).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn noisy_mean_is_unbiased() {
        let t = table(100_000, 3);
        let cfg = PointerConfig::new(1.0, 2.0).unwrap();
        let s = summarize(&per_pair_b_values_lhv(&t, &cfg, 4).unwrap()).unwrap();
        let b = b_statistic(&t).unwrap();
        assert!((s.mean - b).abs() <= 4.0 * s.standard_error, "{} vs {b} ± {}", s.mean, s.standard_error);
        assert!(s.max > TSIRELSON_BOUND);
    }

    #[test]
    fn noise_dominated_exceedance_matches_monte_carlo() {
        // Oracle: draw the same reading model directly, independent of the record pipeline.
        let t = table(20_000, 5);
        let cfg = PointerConfig::new(1.0, 5.0).unwrap();
        let f = exceedance_fraction(
            &per_pair_b_values_lhv(&t, &cfg, 6).unwrap().iter().map(|r| r.b_value).collect::<Vec<_>>(),
            TSIRELSON_BOUND,
        )
        .unwrap();
        let mut r = rng::stream(99, &[]);
        let m = 200_000;
        let mut hits = 0;
        for k in 0..m {
            let row = &t.rows[k % t.rows.len()];
            let v = row.values().map(|x| f64::from(x) + 5.0 * r.sample::<f64, _>(StandardNormal));
            if v[0] * v[2] + v[0] * v[3] + v[1] * v[2] - v[1] * v[3] > TSIRELSON_BOUND {
                hits += 1;
            }
        }
        let oracle = hits as f64 / m as f64;
        assert!((f - oracle).abs() < 0.02, "{f} vs {oracle}");
    }

    #[test]
    fn calibrated_source_is_centered() {
        let cfg = PointerConfig::new(1.0, 1.0).unwrap();
        for target in [TSIRELSON_BOUND, 0.0, -1.3] {
            let recs = per_pair_b_values_calibrated(target, &cfg, 10_000, 11).unwrap();
            let vals: Vec<f64> = recs.iter().map(|r| r.b_value).collect();
            let f = exceedance_fraction(&vals, target).unwrap();
            assert!((f - 0.5).abs() < 0.02, "{target}: {f}");
            let s = summarize(&recs).unwrap();
            assert!((s.mean - target).abs() < 4.0 * s.standard_error);
        }
    }

    #[test]
    fn calibrated_noiseless_limit() {
        let cfg = PointerConfig::new(2.0, 0.0).unwrap();
        let recs = per_pair_b_values_calibrated(TSIRELSON_BOUND, &cfg, 100, 1).unwrap();
        assert!(recs.iter().all(|r| (r.b_value - TSIRELSON_BOUND).abs() < 1e-12));
        assert!(summarize(&recs).unwrap().sd < 1e-12);
    }

    #[test]
    fn exceedance_examples() {
        assert_eq!(exceedance_fraction(&[1.0, 3.0], 2.0).unwrap(), 0.5);
        assert_eq!(exceedance_fraction(&[1.0, 2.0], 2.0).unwrap(), 0.0);
        assert!(matches!(exceedance_fraction(&[], 2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn reproducible() {
        let t = table(100, 8);
        let cfg = PointerConfig::new(1.0, 0.5).unwrap();
        assert_eq!(per_pair_b_values_lhv(&t, &cfg, 1).unwrap(), per_pair_b_values_lhv(&t, &cfg, 1).unwrap());
        assert_ne!(per_pair_b_values_lhv(&t, &cfg, 1).unwrap(), per_pair_b_values_lhv(&t, &cfg, 2).unwrap());
    }
}
