//! Risk-controlled routing between a cheap "nonthinking" model and an
//! expensive "thinking" model.
//!
//! The pipeline has three stages:
//!
//! 1. Score every cheap answer with an uncertainty `U ∈ [0, 1]`
//!    ([`uncertainty`]).
//! 2. On a calibration set, draw an importance-sampled set of expert labels,
//!    build an upper confidence bound on the cumulative error
//!    `L(u) = mean(loss · 1{U ≤ u})` for every candidate threshold ([`ucb`]),
//!    and keep the largest threshold whose bound stays below the tolerance
//!    ([`calibration`]).
//! 3. At test time, answer with the expert exactly when `U ≥ û`
//!    ([`routing`]) and report expert-call and token-saving metrics
//!    ([`metrics`]).
//!
//! With probability at least `1 − α` over the calibration draw, the routed
//! system's risk relative to the expert stays below `ε`. The [`simulation`]
//! module checks that claim against synthetic populations whose true risk is
//! known in closed form.

pub mod calibration;
pub mod error;
pub mod loss;
pub mod metrics;
pub mod quantile;
pub mod routing;
pub mod simulation;
pub mod types;
pub mod ucb;
pub mod uncertainty;

pub use calibration::{
    empirical_bound_check, empirical_coverage_floor, select_threshold, transductive_label,
    Label, ThresholdPolicy, TransductiveOutcome,
};
pub use error::{CoreError, OracleError, Result};
pub use loss::{binary_loss, canonicalize, extract_boxed, semantic_loss, AnswerExtractor};
pub use metrics::{efficiency_metrics, empirical_risk};
pub use simulation::{coverage_experiment, empirical_bound_experiment, CoverageReport, Scenario};
pub use routing::{route, RouteFailure, RouteOutcome, Router, TestItem};
pub use types::{
    BoundKind, CalibrationRecord, EfficiencyReport, ExpertAnswer, ExpertLabel, RiskBudget,
    RoutingDecision, ScoreKind,
};
pub use ucb::{
    build_curve, calibration_grid, clt_bound, draw_samples, hoeffding_bound, SampleSet,
    SamplingPlan, UcbCurve, WeightedLossSample,
};
pub use uncertainty::{logits_uncertainty, verbalized_uncertainty, TokenProbs, VerbalizedTrials};
