//! Does a single joint distribution of `(a1, a2, b1, b2)` reproduce four
//! context distributions?
//!
//! [`fine_feasible_lp`] answers this with a small phase-one LP over the 16
//! deterministic assignments; [`chsh_certificate`] is the analytic answer for
//! no-signaling behaviors (all eight CHSH forms at most 2). The two routes are
//! independent and must agree. [`reshuffle_feasible`] asks the same question
//! for integer count tables, i.e. whether four N×2 spreadsheets could be
//! rearranged into N quadruples.

use serde::Serialize;

use crate::cbd::{behavior_correlation, Behavior};
use crate::error::{Error, Result};
use crate::model::{pair_slot, Context, CounterfactualRow};
use crate::simplex::{self, LpSolution, StandardForm};

/// Phase-one residual mass below which a behavior counts as feasible.
pub const LP_TOL: f64 = 1e-9;
/// Largest residual a feasible witness may have.
pub const WITNESS_TOL: f64 = 1e-8;
/// Largest total for which integer witnesses are attempted.
pub const INTEGER_CHECK_LIMIT: u64 = 10_000;

/// Weights over the 16 assignments, indexed by [`CounterfactualRow::index`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JointDistribution {
    pub weights: [f64; 16],
}

impl JointDistribution {
    pub fn new(weights: [f64; 16]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::domain("joint weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::domain(format!("joint weights sum to {total}, not 1")));
        }
        Ok(JointDistribution { weights })
    }

    /// Pairwise marginal over `(+,+), (+,−), (−,+), (−,−)` for a context.
    pub fn marginal(&self, context: Context) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (k, w) in self.weights.iter().enumerate() {
            let (a, b) = CounterfactualRow::from_index(k).pair(context);
            out[pair_slot(a, b)] += w;
        }
        out
    }

    /// Largest deviation of any marginal entry (or of the total mass) from `behavior`.
    pub fn residual(&self, behavior: &Behavior) -> f64 {
        let mass = (self.weights.iter().sum::<f64>() - 1.0).abs();
        Context::ALL
            .iter()
            .flat_map(|&c| {
                let m = self.marginal(c);
                let p = *behavior.context(c);
                (0..4).map(move |k| (m[k] - p[k]).abs())
            })
            .fold(mass, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasibilityStatus {
    Feasible,
    Infeasible,
}

/// One of the eight CHSH forms: `sign · (E11 + E12 + E21 + E22 − 2·E_minus)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ChshForm {
    /// Canonical slot (0..4) carrying the minus sign.
    pub minus_slot: usize,
    pub sign: i8,
}

impl ChshForm {
    pub fn all() -> impl Iterator<Item = ChshForm> {
        (0..4).flat_map(|minus_slot| [1, -1].map(|sign| ChshForm { minus_slot, sign }))
    }

    pub fn evaluate(&self, correlations: &[f64; 4]) -> f64 {
        let total: f64 = correlations.iter().sum();
        f64::from(self.sign) * (total - 2.0 * correlations[self.minus_slot])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CertificateKind {
    /// A CHSH form exceeds 2.
    Chsh { form: ChshForm },
    /// No CHSH form exceeds 2, yet the marginals cannot be matched (signaling data).
    MarginalInconsistency,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    #[serde(flatten)]
    pub kind: CertificateKind,
    /// CHSH value for [`CertificateKind::Chsh`]; otherwise the mismatch that cannot be removed.
    pub value: f64,
    /// Dual ray of the phase-one LP, one entry per equality row, when available.
    pub farkas: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionKind {
    /// An integer count table over the 16 assignments meets the slack.
    Integer,
    /// Only the real relaxation was established.
    Relaxation,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReshuffleDetails {
    pub total: f64,
    pub slack: f64,
    /// Smallest achievable max-over-contexts L1 deviation, in counts.
    pub min_l1_deviation: f64,
    pub per_context_l1: [f64; 4],
    pub solution_kind: SolutionKind,
    pub integer_witness: Option<[u64; 16]>,
    pub slack_semantics: &'static str,
}

const SLACK_SEMANTICS: &str =
    "slack is the allowed L1 distance, in counts, between each context's count table and the witness's projection onto that context";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeasibilityResult {
    pub status: FeasibilityStatus,
    pub witness: Option<JointDistribution>,
    pub certificate: Option<Certificate>,
    pub residual: f64,
    pub reshuffle: Option<ReshuffleDetails>,
}

impl FeasibilityResult {
    pub fn is_feasible(&self) -> bool {
        self.status == FeasibilityStatus::Feasible
    }
}

fn correlations(behavior: &Behavior) -> [f64; 4] {
    Context::ALL.map(|c| behavior_correlation(behavior, c))
}

/// The largest of the eight CHSH forms and the form attaining it.
pub fn best_chsh_form(behavior: &Behavior) -> (ChshForm, f64) {
    let e = correlations(behavior);
    ChshForm::all()
        .map(|f| (f, f.evaluate(&e)))
        .fold(None, |best: Option<(ChshForm, f64)>, cand| match best {
            Some(b) if b.1 >= cand.1 => Some(b),
            _ => Some(cand),
        })
        .expect("eight forms")
}

pub fn chsh_certificate(behavior: &Behavior) -> f64 {
    best_chsh_form(behavior).1
}

fn assignments_in_cell(context: Context, cell: usize) -> impl Iterator<Item = usize> {
    (0..16).filter(move |&k| {
        let (a, b) = CounterfactualRow::from_index(k).pair(context);
        pair_slot(a, b) == cell
    })
}

fn certificate_for(behavior: &Behavior, mismatch: f64, farkas: Option<Vec<f64>>) -> Certificate {
    let (form, value) = best_chsh_form(behavior);
    if value > 2.0 {
        Certificate { kind: CertificateKind::Chsh { form }, value, farkas }
    } else {
        Certificate { kind: CertificateKind::MarginalInconsistency, value: mismatch, farkas }
    }
}

/// Rows: three free cells per context (the fourth is implied) and the total mass.
fn fine_program(behavior: &Behavior) -> StandardForm {
    let mut a = Vec::with_capacity(13);
    let mut b = Vec::with_capacity(13);
    for c in Context::ALL {
        for cell in 0..3 {
            let mut row = vec![0.0; 16];
            for k in assignments_in_cell(c, cell) {
                row[k] = 1.0;
            }
            a.push(row);
            b.push(behavior.context(c)[cell]);
        }
    }
    a.push(vec![1.0; 16]);
    b.push(1.0);
    StandardForm { a, b, c: vec![0.0; 16] }
}

pub fn fine_feasible_lp(behavior: &Behavior) -> Result<FeasibilityResult> {
    let lp = fine_program(behavior);
    match simplex::solve(&lp, LP_TOL)? {
        LpSolution::Optimal { x, .. } => {
            let mut weights = [0.0; 16];
            for (w, v) in weights.iter_mut().zip(&x) {
                *w = v.max(0.0);
            }
            let witness = JointDistribution { weights };
            let residual = witness.residual(behavior);
            Ok(FeasibilityResult {
                status: FeasibilityStatus::Feasible,
                witness: Some(witness),
                certificate: None,
                residual,
                reshuffle: None,
            })
        }
        LpSolution::Infeasible { infeasibility, farkas } => Ok(FeasibilityResult {
            status: FeasibilityStatus::Infeasible,
            witness: None,
            certificate: Some(certificate_for(behavior, infeasibility, Some(farkas))),
            residual: infeasibility,
            reshuffle: None,
        }),
        LpSolution::Unbounded => Err(Error::Numeric("feasibility LP reported unbounded".into())),
    }
}

/// Four context count tables and an allowed per-context L1 slack (in counts).
#[derive(Clone, Debug, PartialEq)]
pub struct ReshuffleProblem {
    counts: [[u64; 4]; 4],
    slack: f64,
}

impl ReshuffleProblem {
    pub fn new(counts: [[u64; 4]; 4], slack: f64) -> Result<Self> {
        if !(slack.is_finite() && slack >= 0.0) {
            return Err(Error::domain(format!("slack must be finite and nonnegative, got {slack}")));
        }
        let totals = counts.map(|c| c.iter().sum::<u64>());
        if totals.contains(&0) {
            return Err(Error::domain("every context needs at least one trial"));
        }
        if slack == 0.0 && totals.iter().any(|&t| t != totals[0]) {
            return Err(Error::domain(format!(
                "context totals differ ({totals:?}); exact reshuffling needs equal N or a positive slack"
            )));
        }
        Ok(ReshuffleProblem { counts, slack })
    }

    pub fn from_behavior(behavior: &Behavior, slack: f64) -> Result<Self> {
        let counts = behavior
            .counts()
            .ok_or_else(|| Error::domain("reshuffling needs a behavior with integer counts"))?;
        ReshuffleProblem::new(*counts, slack)
    }

    pub fn counts(&self) -> &[[u64; 4]; 4] {
        &self.counts
    }

    pub fn slack(&self) -> f64 {
        self.slack
    }

    fn totals(&self) -> [u64; 4] {
        self.counts.map(|c| c.iter().sum())
    }

    fn equal_totals(&self) -> bool {
        let t = self.totals();
        t.iter().all(|&x| x == t[0])
    }

    /// Witness size: the common N, or the mean total when they differ.
    pub fn total(&self) -> f64 {
        self.totals().iter().sum::<u64>() as f64 / 4.0
    }
}

fn l1_per_context(counts: &[[u64; 4]; 4], witness_counts: &[f64; 16]) -> [f64; 4] {
    Context::ALL.map(|c| {
        let mut m = [0.0; 4];
        for (k, w) in witness_counts.iter().enumerate() {
            let (a, b) = CounterfactualRow::from_index(k).pair(c);
            m[pair_slot(a, b)] += w;
        }
        (0..4).map(|o| (m[o] - counts[c.slot()][o] as f64).abs()).sum()
    })
}

/// Largest-remainder rounding of `w·N`, then single-unit moves that reduce the excess over `slack`.
fn integer_witness(problem: &ReshuffleProblem, weights: &[f64; 16], n: u64) -> Option<[u64; 16]> {
    let scaled = weights.map(|w| w * n as f64);
    let mut counts = scaled.map(|v| v.floor().max(0.0) as u64);
    let assigned: u64 = counts.iter().sum();
    let mut order: Vec<usize> = (0..16).collect();
    order.sort_by(|&i, &j| {
        let ri = scaled[i] - scaled[i].floor();
        let rj = scaled[j] - scaled[j].floor();
        rj.total_cmp(&ri).then(i.cmp(&j))
    });
    if assigned > n {
        return None;
    }
    for &k in order.iter().cycle().take((n - assigned) as usize) {
        counts[k] += 1;
    }

    let score = |c: &[u64; 16]| {
        let l1 = l1_per_context(&problem.counts, &c.map(|v| v as f64));
        let excess: f64 = l1.iter().map(|d| (d - problem.slack).max(0.0)).sum();
        (excess, l1.iter().sum::<f64>())
    };
    let mut current = score(&counts);
    for _ in 0..(4 * n as usize + 64) {
        if current.0 <= 1e-9 {
            return Some(counts);
        }
        let mut best: Option<(usize, usize, (f64, f64))> = None;
        for from in 0..16 {
            if counts[from] == 0 {
                continue;
            }
            for to in 0..16 {
                if to == from {
                    continue;
                }
                let mut trial = counts;
                trial[from] -= 1;
                trial[to] += 1;
                let s = score(&trial);
                let improves = s.0 < current.0 - 1e-12 || (s.0 <= current.0 + 1e-12 && s.1 < current.1 - 1e-12);
                let better_than_best = best.is_none_or(|(_, _, b)| s.0 < b.0 || (s.0 == b.0 && s.1 < b.1));
                if improves && better_than_best {
                    best = Some((from, to, s));
                }
            }
        }
        match best {
            Some((from, to, s)) => {
                counts[from] -= 1;
                counts[to] += 1;
                current = s;
            }
            None => break,
        }
    }
    (current.0 <= 1e-9).then_some(counts)
}

/// Minimizes the largest per-context L1 deviation over real weights summing to N.
///
/// Variables: 16 weights, 16+16 deviation parts, the bound `t`, four slacks.
fn reshuffle_program(problem: &ReshuffleProblem) -> StandardForm {
    const W: usize = 0;
    const DP: usize = 16;
    const DM: usize = 32;
    const T: usize = 48;
    const S: usize = 49;
    const NV: usize = 53;
    let n = problem.total();
    let mut a = Vec::new();
    let mut b = Vec::new();

    let mut row = vec![0.0; NV];
    row[W..W + 16].fill(1.0);
    a.push(row);
    b.push(1.0);

    for c in Context::ALL {
        for cell in 0..4 {
            let idx = 4 * c.slot() + cell;
            let mut row = vec![0.0; NV];
            for k in assignments_in_cell(c, cell) {
                row[W + k] = 1.0;
            }
            row[DP + idx] = -1.0;
            row[DM + idx] = 1.0;
            a.push(row);
            b.push(problem.counts[c.slot()][cell] as f64 / n);
        }
    }
    for c in Context::ALL {
        let mut row = vec![0.0; NV];
        for cell in 0..4 {
            let idx = 4 * c.slot() + cell;
            row[DP + idx] = 1.0;
            row[DM + idx] = 1.0;
        }
        row[S + c.slot()] = 1.0;
        row[T] = -1.0;
        a.push(row);
        b.push(0.0);
    }
    let mut cost = vec![0.0; NV];
    cost[T] = 1.0;
    StandardForm { a, b, c: cost }
}

pub fn reshuffle_feasible(problem: &ReshuffleProblem) -> Result<FeasibilityResult> {
    let n = problem.total();
    let LpSolution::Optimal { x, objective } = simplex::solve(&reshuffle_program(problem), LP_TOL)? else {
        return Err(Error::Numeric("reshuffling LP has no optimum".into()));
    };
    let mut weights = [0.0; 16];
    for (w, v) in weights.iter_mut().zip(&x) {
        *w = v.max(0.0);
    }
    let witness_counts = weights.map(|w| w * n);
    let per_context_l1 = l1_per_context(&problem.counts, &witness_counts);
    let min_l1 = objective.max(0.0) * n;
    let feasible = min_l1 <= problem.slack + LP_TOL * n;

    let integer = if feasible && problem.equal_totals() && (n as u64) <= INTEGER_CHECK_LIMIT {
        integer_witness(problem, &weights, n as u64)
    } else {
        None
    };
    let details = ReshuffleDetails {
        total: n,
        slack: problem.slack,
        min_l1_deviation: min_l1,
        per_context_l1,
        solution_kind: if integer.is_some() { SolutionKind::Integer } else { SolutionKind::Relaxation },
        integer_witness: integer,
        slack_semantics: SLACK_SEMANTICS,
    };
    let max_l1 = per_context_l1.iter().cloned().fold(0.0, f64::max);
    let residual = (max_l1 - problem.slack).max(0.0) / n;

    if feasible {
        Ok(FeasibilityResult {
            status: FeasibilityStatus::Feasible,
            witness: Some(JointDistribution { weights }),
            certificate: None,
            residual,
            reshuffle: Some(details),
        })
    } else {
        let behavior = Behavior::from_counts(problem.counts)?;
        Ok(FeasibilityResult {
            status: FeasibilityStatus::Infeasible,
            witness: None,
            certificate: Some(certificate_for(&behavior, min_l1, None)),
            residual,
            reshuffle: Some(details),
        })
    }
}
