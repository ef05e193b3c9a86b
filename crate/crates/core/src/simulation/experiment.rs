use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scenario::{Scenario, SimItem};
use crate::calibration::{empirical_coverage_floor, select_threshold, transductive_label};
use crate::error::{CoreError, Result};
use crate::metrics::{ecp_percent, stp_percent};
use crate::types::{BoundKind, CalibrationRecord, ExpertLabel};
use crate::ucb::{build_curve, calibration_grid, draw_samples_indexed};

/// Below this many reps the report is informational and no check is enforced.
pub const MIN_ENFORCED_REPS: usize = 100;

/// Extra allowance granted to the asymptotic CLT bound.
pub const CLT_ALLOWANCE: f64 = 0.02;

/// RNG for repetition `rep`; streams depend only on `base_seed` and `rep`.
pub fn rep_rng(base_seed: u64, rep: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(rep))
}

pub fn binomial_se(p: f64, reps: usize) -> f64 {
    (p * (1.0 - p) / reps as f64).sqrt()
}

/// Nominal coverage a bound should reach: `1 − α`, less the CLT allowance.
pub fn nominal_coverage(kind: BoundKind, alpha: f64) -> f64 {
    match kind {
        BoundKind::Hoeffding => 1.0 - alpha,
        BoundKind::Clt => 1.0 - alpha - CLT_ALLOWANCE,
    }
}

/// Pass threshold: nominal coverage minus two binomial standard errors.
pub fn coverage_requirement(nominal: f64, reps: usize) -> f64 {
    nominal - 2.0 * binomial_se(nominal, reps)
}

/// Grid at which UCB coverage is measured: the deciles of the uncertainty law.
pub fn decile_grid(s: &Scenario) -> Vec<f64> {
    let mut grid: Vec<f64> = (1..=10).map(|k| s.uncertainty_quantile(k as f64 / 10.0)).collect();
    grid.dedup();
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub required: f64,
    pub passed: bool,
}

impl Check {
    fn at_least(name: impl Into<String>, measured: f64, required: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            required,
            passed: measured >= required,
        }
    }
}

/// Everything measured in one repetition.
#[derive(Debug, Clone, PartialEq)]
pub struct RepOutcome {
    pub threshold: f64,
    pub feasible: bool,
    /// Population risk `R(û)`.
    pub true_risk: f64,
    /// Test-set risk `R̂(û)`.
    pub empirical_risk: f64,
    pub ecp: f64,
    pub stp: f64,
    pub expert_queries: usize,
    /// Per decile: does the UCB cover the calibration-set cumulative error?
    pub ucb_covers: Vec<bool>,
    /// Per decile: does the UCB cover the population cumulative error?
    pub ucb_covers_population: Vec<bool>,
}

fn cumulative_error(items: &[SimItem], u: f64) -> f64 {
    items
        .iter()
        .filter(|it| it.uncertainty <= u)
        .map(|it| it.loss)
        .sum::<f64>()
        / items.len() as f64
}

/// Test-set risk, ECP and STP of routing `test` at `threshold`.
pub fn score_test_set(test: &[SimItem], threshold: f64) -> (f64, f64, f64) {
    let risk = test
        .iter()
        .filter(|it| it.uncertainty < threshold)
        .map(|it| it.loss)
        .sum::<f64>()
        / test.len() as f64;
    let ecp = ecp_percent(test.iter().map(|it| it.uncertainty >= threshold));
    let stp = stp_percent(
        test.iter()
            .map(|it| (it.cheap_tokens, it.expert_tokens, it.uncertainty >= threshold)),
    );
    (risk, ecp, stp)
}

/// One calibrate-and-route repetition. `population_l` holds the population
/// cumulative error at each point of `deciles`.
pub fn run_rep(s: &Scenario, rep: u64, deciles: &[f64], population_l: &[f64]) -> Result<RepOutcome> {
    let mut rng = rep_rng(s.base_seed, rep);
    let cal = s.sample_items(&mut rng, s.n_cal);
    let test = s.sample_items(&mut rng, s.n_test);
    let plan_seed: u64 = rng.random();

    let us: Vec<f64> = cal.iter().map(|it| it.uncertainty).collect();
    let plan = s.plan.plan(s.n_cal, plan_seed)?;
    let set = draw_samples_indexed(&us, &plan, s.budget.loss_upper, |i| Ok(cal[i].loss))?;
    let curve = build_curve(&set, &calibration_grid(us.iter().copied()), s.budget.alpha, s.bound)?;
    let policy = select_threshold(&curve, &s.budget)?;

    let (empirical_risk, ecp, stp) = score_test_set(&test, policy.threshold);

    let at_deciles = build_curve(&set, deciles, s.budget.alpha, s.bound)?;
    let ucb_covers = deciles
        .iter()
        .zip(&at_deciles.bounds)
        .map(|(&u, &b)| cumulative_error(&cal, u) <= b)
        .collect();
    let ucb_covers_population = population_l
        .iter()
        .zip(&at_deciles.bounds)
        .map(|(l, b)| l <= b)
        .collect();

    Ok(RepOutcome {
        threshold: policy.threshold,
        feasible: policy.feasible,
        true_risk: s.true_risk(policy.threshold)?,
        empirical_risk,
        ecp,
        stp,
        expert_queries: set.unique_queries,
        ucb_covers,
        ucb_covers_population,
    })
}

/// Runs every repetition in parallel. Results are in rep order and do not
/// depend on the number of worker threads.
pub fn run_reps(s: &Scenario) -> Result<(Vec<f64>, Vec<f64>, Vec<RepOutcome>)> {
    s.validate()?;
    let deciles = decile_grid(s);
    let population_l = deciles
        .iter()
        .map(|&u| s.true_risk(u))
        .collect::<Result<Vec<_>>>()?;
    let outcomes = (0..s.reps as u64)
        .into_par_iter()
        .map(|rep| run_rep(s, rep, &deciles, &population_l))
        .collect::<Result<Vec<_>>>()?;
    Ok((deciles, population_l, outcomes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UcbCoveragePoint {
    pub u: f64,
    /// Population cumulative error `L(u)`.
    pub true_l: f64,
    /// Fraction of reps whose bound covers the calibration-set `L(u)`.
    pub coverage: f64,
    /// Fraction of reps whose bound covers the population `L(u)`.
    pub population_coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalBoundSummary {
    pub slack: f64,
    pub fraction: f64,
    /// `1 − α − exp(−2 N t² / (b − a)²)`.
    pub floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub scenario: String,
    pub bound_kind: BoundKind,
    pub reps: usize,
    pub n_cal: usize,
    pub n_test: usize,
    pub m: usize,
    pub pi: f64,
    pub alpha: f64,
    pub epsilon: f64,
    /// Fraction of reps with `R(û) ≤ ε`.
    pub pac_coverage: f64,
    pub ucb_coverage: Vec<UcbCoveragePoint>,
    pub mean_risk: f64,
    pub mean_empirical_risk: f64,
    pub sd_empirical_risk: f64,
    pub mean_ecp: f64,
    pub sd_ecp: f64,
    pub mean_stp: f64,
    pub sd_stp: f64,
    pub mean_threshold: f64,
    pub feasible_fraction: f64,
    pub mean_expert_queries: f64,
    pub empirical_bound: EmpiricalBoundSummary,
    pub checks: Vec<Check>,
    pub assertions_skipped: bool,
}

impl CoverageReport {
    /// True when every check passed or the run was too small to enforce them.
    pub fn passed(&self) -> bool {
        self.assertions_skipped || self.checks.iter().all(|c| c.passed)
    }

    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "scenario {}  bound {}  reps {}  n {}  N {}  m {}  pi {}  alpha {}  epsilon {}",
            self.scenario,
            self.bound_kind,
            self.reps,
            self.n_cal,
            self.n_test,
            self.m,
            self.pi,
            self.alpha,
            self.epsilon
        );
        let _ = writeln!(out, "{:>10} {:>10} {:>10} {:>12}", "u", "L(u)", "coverage", "population");
        for p in &self.ucb_coverage {
            let _ = writeln!(
                out,
                "{:>10.4} {:>10.5} {:>10.3} {:>12.3}",
                p.u, p.true_l, p.coverage, p.population_coverage
            );
        }
        let _ = writeln!(
            out,
            "pac_coverage {:.3}  feasible {:.3}  mean_threshold {:.4}",
            self.pac_coverage, self.feasible_fraction, self.mean_threshold
        );
        let _ = writeln!(
            out,
            "risk {:.4} (empirical {:.4} ± {:.4})  ECP {:.2} ± {:.2}  STP {:.2} ± {:.2}",
            self.mean_risk,
            self.mean_empirical_risk,
            self.sd_empirical_risk,
            self.mean_ecp,
            self.sd_ecp,
            self.mean_stp,
            self.sd_stp
        );
        let _ = writeln!(
            out,
            "empirical bound t={}: {:.3} (floor {:.3})",
            self.empirical_bound.slack, self.empirical_bound.fraction, self.empirical_bound.floor
        );
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{} {}: {:.4} >= {:.4}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.measured,
                c.required
            );
        }
        if self.assertions_skipped {
            let _ = writeln!(out, "checks not enforced below {MIN_ENFORCED_REPS} reps");
        }
        out
    }
}

pub(crate) fn mean_sd(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn fraction<T>(items: &[T], pred: impl Fn(&T) -> bool) -> f64 {
    items.iter().filter(|x| pred(x)).count() as f64 / items.len() as f64
}

/// End-to-end coverage of the calibrated router over `s.reps` repetitions.
pub fn coverage_experiment(s: &Scenario) -> Result<CoverageReport> {
    let (deciles, population_l, outcomes) = run_reps(s)?;
    let eps = s.budget.epsilon;
    let reps = outcomes.len();

    let ucb_coverage: Vec<UcbCoveragePoint> = deciles
        .iter()
        .enumerate()
        .map(|(k, &u)| UcbCoveragePoint {
            u,
            true_l: population_l[k],
            coverage: fraction(&outcomes, |o| o.ucb_covers[k]),
            population_coverage: fraction(&outcomes, |o| o.ucb_covers_population[k]),
        })
        .collect();
    let pac_coverage = fraction(&outcomes, |o| o.true_risk <= eps);

    let required = coverage_requirement(nominal_coverage(s.bound, s.budget.alpha), reps);
    let mut checks = vec![Check::at_least("pac_coverage", pac_coverage, required)];
    for p in &ucb_coverage {
        checks.push(Check::at_least(format!("ucb_coverage@{:.4}", p.u), p.coverage, required));
    }

    let floor = empirical_coverage_floor(&s.budget, s.n_test, s.slack);
    let emp_fraction = fraction(&outcomes, |o| o.empirical_risk <= eps + s.slack);
    if s.slack > 0.0 {
        checks.push(Check {
            name: format!("empirical_bound@t={}", s.slack),
            measured: emp_fraction,
            required: floor,
            passed: emp_fraction > floor,
        });
    }

    let (mean_empirical_risk, sd_empirical_risk) = mean_sd(outcomes.iter().map(|o| o.empirical_risk));
    let (mean_ecp, sd_ecp) = mean_sd(outcomes.iter().map(|o| o.ecp));
    let (mean_stp, sd_stp) = mean_sd(outcomes.iter().map(|o| o.stp));

    Ok(CoverageReport {
        scenario: s.name.clone(),
        bound_kind: s.bound,
        reps,
        n_cal: s.n_cal,
        n_test: s.n_test,
        m: s.plan.sample_size(s.n_cal),
        pi: s.plan.pi,
        alpha: s.budget.alpha,
        epsilon: eps,
        pac_coverage,
        ucb_coverage,
        mean_risk: mean_sd(outcomes.iter().map(|o| o.true_risk)).0,
        mean_empirical_risk,
        sd_empirical_risk,
        mean_ecp,
        sd_ecp,
        mean_stp,
        sd_stp,
        mean_threshold: mean_sd(outcomes.iter().map(|o| o.threshold)).0,
        feasible_fraction: fraction(&outcomes, |o| o.feasible),
        mean_expert_queries: mean_sd(outcomes.iter().map(|o| o.expert_queries as f64)).0,
        empirical_bound: EmpiricalBoundSummary {
            slack: s.slack,
            fraction: emp_fraction,
            floor,
        },
        checks,
        assertions_skipped: reps < MIN_ENFORCED_REPS,
    })
}

/// Fraction of reps whose test-set risk is at most `ε + slack`.
pub fn empirical_bound_experiment(s: &Scenario, slack: f64) -> Result<f64> {
    if slack.is_nan() || slack < 0.0 {
        return Err(CoreError::InvalidScenario(format!("slack {slack} must be >= 0")));
    }
    let (_, _, outcomes) = run_reps(s)?;
    let limit = s.budget.epsilon + slack;
    Ok(fraction(&outcomes, |o| o.empirical_risk <= limit))
}

/// Routing at a fixed threshold with no calibration, for comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub threshold: f64,
    pub reps: usize,
    pub true_risk: f64,
    pub mean_empirical_risk: f64,
    pub sd_empirical_risk: f64,
    pub mean_ecp: f64,
    pub sd_ecp: f64,
    pub mean_stp: f64,
    pub sd_stp: f64,
}

pub fn fixed_threshold_experiment(s: &Scenario, threshold: f64) -> Result<BaselineReport> {
    s.validate()?;
    if !(0.0..=1.0).contains(&threshold) {
        return Err(CoreError::InvalidPolicy(format!("threshold {threshold} outside [0, 1]")));
    }
    let rows: Vec<(f64, f64, f64)> = (0..s.reps as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rep_rng(s.base_seed, rep);
            score_test_set(&s.sample_items(&mut rng, s.n_test), threshold)
        })
        .collect();
    let (mean_empirical_risk, sd_empirical_risk) = mean_sd(rows.iter().map(|r| r.0));
    let (mean_ecp, sd_ecp) = mean_sd(rows.iter().map(|r| r.1));
    let (mean_stp, sd_stp) = mean_sd(rows.iter().map(|r| r.2));
    Ok(BaselineReport {
        threshold,
        reps: s.reps,
        true_risk: s.true_risk(threshold)?,
        mean_empirical_risk,
        sd_empirical_risk,
        mean_ecp,
        sd_ecp,
        mean_stp,
        sd_stp,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransductiveReport {
    pub n_items: usize,
    pub runs: usize,
    pub bound_kind: BoundKind,
    pub epsilon: f64,
    /// Fraction of runs with `L(û) ≤ ε` on the fixed dataset.
    pub coverage: f64,
    pub required: f64,
    pub passed: bool,
    pub mean_threshold: f64,
    pub feasible_fraction: f64,
    /// Mean loss actually carried by the final labels.
    pub mean_label_loss: f64,
    pub mean_expert_fraction: f64,
}

/// Repeats transductive labeling of one fixed dataset, drawn with
/// `dataset_seed`, under `s.reps` different algorithm seeds.
pub fn transductive_experiment(s: &Scenario, n_items: usize, dataset_seed: u64) -> Result<TransductiveReport> {
    s.validate()?;
    if n_items < 2 {
        return Err(CoreError::InvalidScenario("transductive dataset needs >= 2 items".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(dataset_seed);
    let items = s.sample_items(&mut rng, n_items);
    let records: Vec<CalibrationRecord> = items
        .iter()
        .enumerate()
        .map(|(i, it)| CalibrationRecord::unlabeled(format!("item-{i}"), it.uncertainty, "cheap", it.cheap_tokens))
        .collect();
    let eps = s.budget.epsilon;

    let runs: Vec<TransductiveRun> = (0..s.reps as u64)
        .into_par_iter()
        .map(|run| {
            let plan = s.plan.plan(n_items, s.base_seed.wrapping_add(run))?;
            let out = transductive_label(&records, &plan, &s.budget, s.bound, |r| {
                let i: usize = r.id["item-".len()..].parse().expect("generated id");
                Ok(ExpertLabel {
                    answer: "expert".into(),
                    loss: items[i].loss,
                    tokens: Some(items[i].expert_tokens),
                })
            })?;
            let threshold = out.policy.threshold;
            let label_loss = out
                .labels
                .iter()
                .zip(&items)
                .filter(|(label, _)| !label.from_expert)
                .map(|(_, it)| it.loss)
                .sum::<f64>()
                / n_items as f64;
            Ok(TransductiveRun {
                threshold,
                feasible: out.policy.feasible,
                l_hat: if out.policy.feasible { cumulative_error(&items, threshold) } else { 0.0 },
                label_loss,
                expert_fraction: out.expert_queries as f64 / n_items as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let coverage = fraction(&runs, |r| r.l_hat <= eps);
    let required = coverage_requirement(1.0 - s.budget.alpha, runs.len());
    Ok(TransductiveReport {
        n_items,
        runs: runs.len(),
        bound_kind: s.bound,
        epsilon: eps,
        coverage,
        required,
        passed: coverage >= required,
        mean_threshold: mean_sd(runs.iter().map(|r| r.threshold)).0,
        feasible_fraction: fraction(&runs, |r| r.feasible),
        mean_label_loss: mean_sd(runs.iter().map(|r| r.label_loss)).0,
        mean_expert_fraction: mean_sd(runs.iter().map(|r| r.expert_fraction)).0,
    })
}

struct TransductiveRun {
    threshold: f64,
    feasible: bool,
    l_hat: f64,
    label_loss: f64,
    expert_fraction: f64,
}
