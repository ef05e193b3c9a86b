//! Synthetic populations with known risk, used to check the guarantees by
//! Monte Carlo.

mod experiment;
mod integrate;
mod scenario;

pub use experiment::{
    binomial_se, coverage_experiment, coverage_requirement, decile_grid, empirical_bound_experiment,
    fixed_threshold_experiment, nominal_coverage, rep_rng, run_rep, run_reps, score_test_set,
    transductive_experiment, BaselineReport, Check, CoverageReport, EmpiricalBoundSummary, RepOutcome,
    TransductiveReport, UcbCoveragePoint, CLT_ALLOWANCE, MIN_ENFORCED_REPS,
};
pub use integrate::adaptive_simpson;
pub use scenario::{LossLaw, PlanConfig, Scenario, SimItem, TokenLaw, UncertaintyLaw};
