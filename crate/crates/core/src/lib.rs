//! Bell statistics in two data shapes, with the couplings that produce them.
//!
//! - [`model`]: counterfactual N×4 tables and their `B`, four-context bundles and their `S`.
//! - [`lhv`]: hidden-variable models sampled into either shape, with exact correlations.
//! - [`quantum`]: two-qubit states, Born-rule sampling and `S` optimization.
//! - [`cbd`]: context-indexed behaviors, no-signaling checks, the PR box.
//! - [`feasibility`]: whether four contexts admit one joint distribution or one reshuffled table.
//! - [`stats`]: violation frequencies and significance curves over many trials.
//! - [`weak`]: noisy per-quadruple pointer readouts and their B-values.

pub mod cbd;
pub mod error;
pub mod feasibility;
pub mod io;
pub mod lhv;
pub mod linalg;
pub mod model;
pub mod quadrature;
pub mod quantum;
pub mod rng;
pub mod simplex;
pub mod stats;
pub mod weak;

pub use cbd::{behavior_correlation, behavior_s, no_signaling, pr_box, Behavior, SignalingReport};
pub use error::{Error, Result};
pub use feasibility::{
    chsh_certificate, fine_feasible_lp, reshuffle_feasible, FeasibilityResult, FeasibilityStatus, JointDistribution,
    ReshuffleProblem,
};
pub use lhv::{exact_lhv_correlation, exact_lhv_s, sample_bundle, sample_counterfactual_table, BuiltinModelSpec, LhvModel};
pub use model::{
    b_statistic, correlation, project_context, s_statistic, Context, ContextDataset, CounterfactualRow,
    CounterfactualTable, ExperimentBundle, Outcome, Setting,
};
pub use quantum::{
    born_probabilities, expectation, optimize_angles, s_quantum, sample_bundle_quantum, AngleQuadruple, Convention,
    DensityMatrix, TSIRELSON_BOUND,
};
pub use stats::{
    significance_curve, standard_error_s, violation_frequency, wilson_interval, Generator, Orientation, StudyResult,
    StudyRow, StudySpec, ViolationStudy,
};
pub use weak::{
    exceedance_fraction, per_pair_b_values_calibrated, per_pair_b_values_lhv, PerPairRecord, PointerConfig,
};
