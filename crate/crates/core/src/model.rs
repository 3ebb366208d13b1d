//! The two data shapes of a Bell test.
//!
//! A [`CounterfactualTable`] holds N rows of four coexisting outcomes
//! `(a1, a2, b1, b2)`; its statistic `B` is the mean of the per-row value
//! `C = a1·b1 + a1·b2 + a2·b1 − a2·b2`, which is always ±2, so `|B| ≤ 2` for
//! every finite table.
//!
//! An [`ExperimentBundle`] holds four independent `(a, b)` datasets, one per
//! context `(i, j)`. Its statistic `S = E11 + E12 + E21 − E22` combines four
//! separately estimated correlations and is only bounded by 4.
//!
//! All sums are over ±1 products and are accumulated in `i64`, so every
//! statistic here is computed from exact integer tallies.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dichotomic measurement outcome, +1 or −1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Outcome(i8);

impl Outcome {
    pub const PLUS: Outcome = Outcome(1);
    pub const MINUS: Outcome = Outcome(-1);

    pub fn new(value: i64) -> Result<Self> {
        match value {
            1 => Ok(Self::PLUS),
            -1 => Ok(Self::MINUS),
            v => Err(Error::domain(format!("outcome must be +1 or -1, got {v}"))),
        }
    }

    /// `+1` for `true`.
    pub fn from_sign(positive: bool) -> Self {
        if positive {
            Self::PLUS
        } else {
            Self::MINUS
        }
    }

    #[inline]
    pub fn value(self) -> i8 {
        self.0
    }

    #[inline]
    pub fn is_plus(self) -> bool {
        self.0 > 0
    }
}

impl std::ops::Mul for Outcome {
    type Output = Outcome;

    #[inline]
    fn mul(self, rhs: Outcome) -> Outcome {
        Outcome(self.0 * rhs.0)
    }
}

impl std::ops::Neg for Outcome {
    type Output = Outcome;

    #[inline]
    fn neg(self) -> Outcome {
        Outcome(-self.0)
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Measurement setting index of one party.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Setting {
    One,
    Two,
}

impl Setting {
    pub const BOTH: [Setting; 2] = [Setting::One, Setting::Two];

    pub fn new(index: u8) -> Result<Self> {
        match index {
            1 => Ok(Setting::One),
            2 => Ok(Setting::Two),
            i => Err(Error::domain(format!("setting index must be 1 or 2, got {i}"))),
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Setting::One => 1,
            Setting::Two => 2,
        }
    }
}

/// A measurement context `(i, j)`: Alice uses setting `i`, Bob setting `j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Context {
    pub alice: Setting,
    pub bob: Setting,
}

impl Context {
    /// Canonical order (1,1), (1,2), (2,1), (2,2). The CHSH minus sign sits on the last slot.
    pub const ALL: [Context; 4] = [
        Context::new(Setting::One, Setting::One),
        Context::new(Setting::One, Setting::Two),
        Context::new(Setting::Two, Setting::One),
        Context::new(Setting::Two, Setting::Two),
    ];

    pub const fn new(alice: Setting, bob: Setting) -> Self {
        Context { alice, bob }
    }

    pub fn from_indices(i: u8, j: u8) -> Result<Self> {
        Ok(Context::new(Setting::new(i)?, Setting::new(j)?))
    }

    /// Position in the canonical order.
    pub fn slot(self) -> usize {
        match (self.alice, self.bob) {
            (Setting::One, Setting::One) => 0,
            (Setting::One, Setting::Two) => 1,
            (Setting::Two, Setting::One) => 2,
            (Setting::Two, Setting::Two) => 3,
        }
    }

    /// Sign of this context's correlation in `S`.
    pub fn chsh_sign(self) -> i64 {
        if self.slot() == 3 {
            -1
        } else {
            1
        }
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.alice.index(), self.bob.index())
    }
}

/// One trial of the counterfactual world: all four outcomes coexist.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CounterfactualRow {
    pub a1: Outcome,
    pub a2: Outcome,
    pub b1: Outcome,
    pub b2: Outcome,
}

impl CounterfactualRow {
    pub fn new(a1: Outcome, a2: Outcome, b1: Outcome, b2: Outcome) -> Self {
        CounterfactualRow { a1, a2, b1, b2 }
    }

    pub fn from_values(values: [i64; 4]) -> Result<Self> {
        Ok(CounterfactualRow::new(
            Outcome::new(values[0])?,
            Outcome::new(values[1])?,
            Outcome::new(values[2])?,
            Outcome::new(values[3])?,
        ))
    }

    pub fn values(&self) -> [i8; 4] {
        [self.a1.0, self.a2.0, self.b1.0, self.b2.0]
    }

    pub fn alice(&self, setting: Setting) -> Outcome {
        match setting {
            Setting::One => self.a1,
            Setting::Two => self.a2,
        }
    }

    pub fn bob(&self, setting: Setting) -> Outcome {
        match setting {
            Setting::One => self.b1,
            Setting::Two => self.b2,
        }
    }

    pub fn pair(&self, context: Context) -> (Outcome, Outcome) {
        (self.alice(context.alice), self.bob(context.bob))
    }

    /// `a1·b1 + a1·b2 + a2·b1 − a2·b2`, always ±2.
    pub fn c_value(&self) -> i32 {
        let (a1, a2, b1, b2) = (
            i32::from(self.a1.0),
            i32::from(self.a2.0),
            i32::from(self.b1.0),
            i32::from(self.b2.0),
        );
        a1 * b1 + a1 * b2 + a2 * b1 - a2 * b2
    }

    /// All 16 deterministic assignments, in [`crate::feasibility::JointDistribution`] index order.
    pub fn all() -> impl Iterator<Item = CounterfactualRow> {
        (0..16).map(Self::from_index)
    }

    /// Bit 3..0 of `k` select a1, a2, b1, b2; a set bit means −1.
    pub fn from_index(k: usize) -> Self {
        let o = |bit: usize| Outcome::from_sign(k & (1 << bit) == 0);
        CounterfactualRow::new(o(3), o(2), o(1), o(0))
    }

    pub fn index(&self) -> usize {
        let bit = |o: Outcome, b: usize| if o.is_plus() { 0 } else { 1 << b };
        bit(self.a1, 3) | bit(self.a2, 2) | bit(self.b1, 1) | bit(self.b2, 0)
    }
}

pub fn row_c_value(row: &CounterfactualRow) -> i32 {
    row.c_value()
}

/// Where a dataset came from.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub generator: String,
}

impl Provenance {
    pub fn new(generator: impl Into<String>, seed: Option<u64>) -> Self {
        Provenance {
            seed,
            generator: generator.into(),
        }
    }
}

/// The N×4 spreadsheet.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct CounterfactualTable {
    pub rows: Vec<CounterfactualRow>,
    pub provenance: Provenance,
}

impl CounterfactualTable {
    pub fn new(rows: Vec<CounterfactualRow>) -> Self {
        CounterfactualTable {
            rows,
            provenance: Provenance::default(),
        }
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Exact running sum of `a·b` products.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Tally {
    pub n: u64,
    pub product_sum: i64,
}

impl Tally {
    #[inline]
    pub fn push(&mut self, a: Outcome, b: Outcome) {
        self.n += 1;
        self.product_sum += i64::from((a * b).0);
    }

    pub fn correlation(&self) -> Result<f64> {
        if self.n == 0 {
            return Err(Error::domain("statistic undefined for N=0"));
        }
        Ok(self.product_sum as f64 / self.n as f64)
    }
}

/// `S` from the four canonical-order tallies.
///
/// With equal sample sizes the signed integer sum is divided once, which makes
/// `S` of a projected table bit-identical to `B` of that table.
pub fn s_from_tallies(tallies: &[Tally; 4]) -> Result<f64> {
    if tallies.iter().any(|t| t.n == 0) {
        return Err(Error::domain("statistic undefined for N=0"));
    }
    let n0 = tallies[0].n;
    if tallies.iter().all(|t| t.n == n0) {
        let total: i64 = Context::ALL
            .iter()
            .map(|c| c.chsh_sign() * tallies[c.slot()].product_sum)
            .sum();
        return Ok(total as f64 / n0 as f64);
    }
    let mut s = 0.0;
    for c in Context::ALL {
        s += c.chsh_sign() as f64 * tallies[c.slot()].correlation()?;
    }
    Ok(s)
}

/// One N×2 spreadsheet: outcome pairs recorded in a single context.
#[derive(Clone, Debug, PartialEq)]
pub struct ContextDataset {
    pub context: Context,
    pub pairs: Vec<(Outcome, Outcome)>,
    pub seed: Option<u64>,
}

impl ContextDataset {
    pub fn new(context: Context, pairs: Vec<(Outcome, Outcome)>) -> Self {
        ContextDataset {
            context,
            pairs,
            seed: None,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn tally(&self) -> Tally {
        let mut t = Tally::default();
        for &(a, b) in &self.pairs {
            t.push(a, b);
        }
        t
    }

    /// Counts over `(+,+), (+,−), (−,+), (−,−)`.
    pub fn outcome_counts(&self) -> [u64; 4] {
        let mut counts = [0u64; 4];
        for &(a, b) in &self.pairs {
            counts[pair_slot(a, b)] += 1;
        }
        counts
    }
}

/// Index of an outcome pair in `(+,+), (+,−), (−,+), (−,−)` order.
#[inline]
pub fn pair_slot(a: Outcome, b: Outcome) -> usize {
    (usize::from(!a.is_plus()) << 1) | usize::from(!b.is_plus())
}

/// Inverse of [`pair_slot`].
pub fn slot_pair(slot: usize) -> (Outcome, Outcome) {
    (
        Outcome::from_sign(slot & 2 == 0),
        Outcome::from_sign(slot & 1 == 0),
    )
}

/// Four independent experiments, one per context, stored in canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentBundle {
    datasets: [ContextDataset; 4],
}

impl ExperimentBundle {
    /// Accepts the datasets in any order; they must cover each context exactly once.
    pub fn new(datasets: Vec<ContextDataset>) -> Result<Self> {
        if datasets.len() != 4 {
            return Err(Error::domain(format!(
                "a bundle needs exactly 4 datasets, got {}",
                datasets.len()
            )));
        }
        let mut slots: [Option<ContextDataset>; 4] = Default::default();
        for d in datasets {
            let slot = d.context.slot();
            if slots[slot].is_some() {
                return Err(Error::domain(format!("duplicate context {}", d.context)));
            }
            slots[slot] = Some(d);
        }
        let datasets = slots.map(|d| d.expect("four distinct contexts fill every slot"));
        Ok(ExperimentBundle { datasets })
    }

    pub fn datasets(&self) -> &[ContextDataset; 4] {
        &self.datasets
    }

    pub fn dataset(&self, context: Context) -> &ContextDataset {
        &self.datasets[context.slot()]
    }

    pub fn tallies(&self) -> [Tally; 4] {
        [
            self.datasets[0].tally(),
            self.datasets[1].tally(),
            self.datasets[2].tally(),
            self.datasets[3].tally(),
        ]
    }

    /// Bundle whose four datasets are column projections of the same table.
    pub fn from_table(table: &CounterfactualTable) -> Self {
        let datasets = Context::ALL.map(|c| project_context(table, c));
        ExperimentBundle { datasets }
    }
}

/// Mean of `C` over the rows of `table`.
pub fn b_statistic(table: &CounterfactualTable) -> Result<f64> {
    if table.is_empty() {
        return Err(Error::domain("statistic undefined for N=0"));
    }
    let sum: i64 = table.rows.iter().map(|r| i64::from(r.c_value())).sum();
    Ok(sum as f64 / table.len() as f64)
}

pub fn project_context(table: &CounterfactualTable, context: Context) -> ContextDataset {
    ContextDataset {
        context,
        pairs: table.rows.iter().map(|r| r.pair(context)).collect(),
        seed: table.provenance.seed,
    }
}

/// Empirical `⟨a·b⟩`.
pub fn correlation(dataset: &ContextDataset) -> Result<f64> {
    dataset.tally().correlation()
}

pub fn s_statistic(bundle: &ExperimentBundle) -> Result<f64> {
    s_from_tallies(&bundle.tallies())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(v: [i64; 4]) -> CounterfactualRow {
        CounterfactualRow::from_values(v).unwrap()
    }

    fn pairs(v: &[(i64, i64)]) -> Vec<(Outcome, Outcome)> {
        v.iter()
            .map(|&(a, b)| (Outcome::new(a).unwrap(), Outcome::new(b).unwrap()))
            .collect()
    }

    #[test]
    fn outcome_rejects_other_values() {
        assert!(Outcome::new(0).is_err());
        assert!(Outcome::new(2).is_err());
        assert!(Setting::new(3).is_err());
    }

    #[test]
    fn c_value_examples() {
        assert_eq!(row_c_value(&row([1, 1, 1, 1])), 2);
        assert_eq!(row_c_value(&row([1, -1, 1, -1])), -2);
        assert_eq!(row_c_value(&row([-1, -1, -1, -1])), 2);
    }

    #[test]
    fn c_value_is_two_valued_over_all_rows() {
        let mut seen = 0;
        for r in CounterfactualRow::all() {
            assert!(r.c_value() == 2 || r.c_value() == -2, "{r:?}");
            seen += 1;
        }
        assert_eq!(seen, 16);
    }

    #[test]
    fn row_index_roundtrip() {
        for k in 0..16 {
            assert_eq!(CounterfactualRow::from_index(k).index(), k);
        }
        assert_eq!(CounterfactualRow::from_index(0), row([1, 1, 1, 1]));
        assert_eq!(CounterfactualRow::from_index(1), row([1, 1, 1, -1]));
    }

    #[test]
    fn b_statistic_examples() {
        let t = CounterfactualTable::new(vec![row([1, 1, 1, 1]); 7]);
        assert_eq!(b_statistic(&t).unwrap(), 2.0);
        let t = CounterfactualTable::new(vec![row([1, 1, 1, 1]), row([1, -1, 1, -1])]);
        assert_eq!(b_statistic(&t).unwrap(), 0.0);
        assert!(matches!(
            b_statistic(&CounterfactualTable::default()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn projection_selects_columns() {
        let t = CounterfactualTable::new(vec![row([1, -1, 1, -1])]);
        let d = project_context(&t, Context::from_indices(1, 1).unwrap());
        assert_eq!(d.pairs, pairs(&[(1, 1)]));
        let d = project_context(&t, Context::from_indices(2, 2).unwrap());
        assert_eq!(d.pairs, pairs(&[(-1, -1)]));
    }

    #[test]
    fn correlation_examples() {
        let c = Context::ALL[0];
        let d = ContextDataset::new(c, pairs(&[(1, 1); 5]));
        assert_eq!(correlation(&d).unwrap(), 1.0);
        let d = ContextDataset::new(c, pairs(&[(1, 1), (1, -1)]));
        assert_eq!(correlation(&d).unwrap(), 0.0);
        let d = ContextDataset::new(c, pairs(&[(1, 1), (1, 1), (-1, 1)]));
        assert!((correlation(&d).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(correlation(&ContextDataset::new(c, vec![])).is_err());
    }

    #[test]
    fn s_statistic_examples() {
        let all_pp = ExperimentBundle::new(
            Context::ALL
                .iter()
                .map(|&c| ContextDataset::new(c, pairs(&[(1, 1); 3])))
                .collect(),
        )
        .unwrap();
        assert_eq!(s_statistic(&all_pp).unwrap(), 2.0);

        // Perfect correlation in (1,1),(1,2),(2,1); perfect anticorrelation in (2,2).
        let pr = ExperimentBundle::new(
            Context::ALL
                .iter()
                .map(|&c| {
                    let p = if c.slot() == 3 {
                        pairs(&[(1, -1), (-1, 1)])
                    } else {
                        pairs(&[(1, 1), (-1, -1)])
                    };
                    ContextDataset::new(c, p)
                })
                .collect(),
        )
        .unwrap();
        assert_eq!(s_statistic(&pr).unwrap(), 4.0);
    }

    #[test]
    fn bundle_rejects_duplicate_or_missing_contexts() {
        let c = Context::ALL[0];
        let ds = vec![ContextDataset::new(c, vec![]); 4];
        assert!(ExperimentBundle::new(ds).is_err());
        assert!(ExperimentBundle::new(vec![ContextDataset::new(c, vec![])]).is_err());
    }

    #[test]
    fn bundle_reorders_into_canonical_slots() {
        let ds: Vec<_> = Context::ALL
            .iter()
            .rev()
            .map(|&c| ContextDataset::new(c, pairs(&[(1, 1)])))
            .collect();
        let b = ExperimentBundle::new(ds).unwrap();
        for (k, d) in b.datasets().iter().enumerate() {
            assert_eq!(d.context.slot(), k);
        }
    }

    #[test]
    fn empty_dataset_in_bundle_is_an_error() {
        let ds = Context::ALL
            .iter()
            .map(|&c| ContextDataset::new(c, if c.slot() == 2 { vec![] } else { pairs(&[(1, 1)]) }))
            .collect();
        let b = ExperimentBundle::new(ds).unwrap();
        assert!(s_statistic(&b).is_err());
    }

    #[test]
    fn unequal_sizes_fall_back_to_per_context_means() {
        let ds = Context::ALL
            .iter()
            .map(|&c| {
                let p = if c.slot() == 0 {
                    pairs(&[(1, 1), (1, -1), (1, 1)])
                } else {
                    pairs(&[(1, 1)])
                };
                ContextDataset::new(c, p)
            })
            .collect();
        let b = ExperimentBundle::new(ds).unwrap();
        assert!((s_statistic(&b).unwrap() - (1.0 / 3.0 + 1.0 + 1.0 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn pair_slot_order() {
        let p = Outcome::PLUS;
        let m = Outcome::MINUS;
        assert_eq!(pair_slot(p, p), 0);
        assert_eq!(pair_slot(p, m), 1);
        assert_eq!(pair_slot(m, p), 2);
        assert_eq!(pair_slot(m, m), 3);
        for s in 0..4 {
            let (a, b) = slot_pair(s);
            assert_eq!(pair_slot(a, b), s);
        }
    }
}
