//! Threshold selection from a UCB curve, and the transductive labeling
//! procedure in which the calibration set is also the set to be labeled.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, OracleError, Result};
use crate::types::{BoundKind, CalibrationRecord, ExpertLabel, RiskBudget, ScoreKind};
use crate::ucb::{build_curve, calibration_grid, draw_samples_indexed, SamplingPlan, UcbCurve};

/// The calibrated threshold `û` with the provenance needed to reproduce it.
///
/// Serialized as one flat JSON object; `calibrate` writes it and `route`
/// reads it back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdPolicy {
    pub threshold: f64,
    pub feasible: bool,
    pub bound_kind: BoundKind,
    pub alpha: f64,
    pub epsilon: f64,
    pub m: usize,
    pub seed: u64,
    pub curve_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score_kind: Option<ScoreKind>,
}

impl ThresholdPolicy {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CoreError::InvalidPolicy(msg));
        if !(self.threshold.is_finite() && (0.0..=1.0).contains(&self.threshold)) {
            return bad(format!("threshold {} outside [0, 1]", self.threshold));
        }
        if !self.feasible && self.threshold != 0.0 {
            return bad("an infeasible policy must carry threshold 0".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha {} outside (0, 1)", self.alpha));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return bad(format!("epsilon {} must be finite and non-negative", self.epsilon));
        }
        if self.m == 0 {
            return bad("sample size m must be positive".into());
        }
        if self.curve_digest.len() != 64
            || !self
                .curve_digest
                .bytes()
                .all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
        {
            return bad("curve_digest must be 64 lowercase hex characters".into());
        }
        Ok(())
    }

    /// Parses and validates a policy document.
    pub fn from_json(text: &str) -> Result<Self> {
        let policy: Self = serde_json::from_str(text)?;
        policy.validate()?;
        Ok(policy)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("policy serializes")
    }

    /// `true` when an item with this uncertainty goes to the expert.
    #[inline]
    pub fn routes_to_expert(&self, uncertainty: f64) -> bool {
        uncertainty >= self.threshold
    }
}

/// `û = max { u in grid : L̂_u(α) ≤ ε }`.
///
/// The whole grid is scanned because the bound itself need not be monotone.
/// When no grid point qualifies the policy is infeasible and `û = 0`, which
/// sends every item to the expert.
pub fn select_threshold(curve: &UcbCurve, budget: &RiskBudget) -> Result<ThresholdPolicy> {
    budget.validate()?;
    if curve.grid.is_empty() {
        return Err(CoreError::EmptyGrid);
    }
    if curve.grid.len() != curve.bounds.len() {
        return Err(CoreError::InvalidRange(format!(
            "curve has {} grid points but {} bounds",
            curve.grid.len(),
            curve.bounds.len()
        )));
    }
    if let Some(pos) = curve.grid.windows(2).position(|w| !(w[0] < w[1])) {
        return Err(CoreError::UnsortedGrid(pos + 1));
    }
    if curve.bounds.iter().any(|b| b.is_nan()) {
        return Err(CoreError::InvalidRange("curve contains NaN bounds".into()));
    }

    let chosen = curve
        .grid
        .iter()
        .zip(&curve.bounds)
        .rev()
        .find(|(_, b)| **b <= budget.epsilon)
        .map(|(u, _)| *u);

    Ok(ThresholdPolicy {
        threshold: chosen.unwrap_or(0.0),
        feasible: chosen.is_some(),
        bound_kind: curve.bound_kind,
        alpha: curve.alpha,
        epsilon: budget.epsilon,
        m: curve.sample_size,
        seed: curve.seed,
        curve_digest: curve.digest(),
        score_kind: None,
    })
}

/// `R̂(û) ≤ ε + t`.
pub fn empirical_bound_check(policy: &ThresholdPolicy, test_risk: f64, slack: f64) -> bool {
    test_risk <= policy.epsilon + slack
}

/// Lower bound `1 − α − exp(−2 N t² / (b − a)²)` on `P(R̂(û) ≤ ε + t)`.
pub fn empirical_coverage_floor(budget: &RiskBudget, n_test: usize, slack: f64) -> f64 {
    let width = budget.loss_width();
    1.0 - budget.alpha - (-2.0 * n_test as f64 * slack * slack / (width * width)).exp()
}

/// Final label of one item after transductive labeling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Label {
    pub id: String,
    pub text: String,
    pub from_expert: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransductiveOutcome {
    /// Labels in record order; unlabeled items are omitted.
    pub labels: Vec<Label>,
    pub unlabeled: Vec<String>,
    pub policy: ThresholdPolicy,
    pub curve: UcbCurve,
    /// Distinct expert queries across both phases.
    pub expert_queries: usize,
}

/// Labels a fixed dataset so that, over the algorithm's own randomness, the
/// loss of the accepted cheap answers stays below `ε` with probability at
/// least `1 − α`.
///
/// The sampling phase queries the expert for importance-sampled records. The
/// final phase returns the expert label for every record with `U ≥ û`,
/// reusing sampling-phase answers, and the cheap answer otherwise.
pub fn transductive_label<F>(
    records: &[CalibrationRecord],
    plan: &SamplingPlan,
    budget: &RiskBudget,
    kind: BoundKind,
    mut expert: F,
) -> Result<TransductiveOutcome>
where
    F: FnMut(&CalibrationRecord) -> Result<ExpertLabel, OracleError>,
{
    budget.validate()?;
    let mut ids = std::collections::HashSet::with_capacity(records.len());
    for r in records {
        if !(0.0..=1.0).contains(&r.uncertainty) {
            return Err(CoreError::InvalidRecord {
                id: r.id.clone(),
                reason: format!("uncertainty {} outside [0, 1]", r.uncertainty),
            });
        }
        if !ids.insert(r.id.as_str()) {
            return Err(CoreError::DuplicateId(r.id.clone()));
        }
    }

    let uncertainties: Vec<f64> = records.iter().map(|r| r.uncertainty).collect();
    let mut answers: HashMap<usize, ExpertLabel> = HashMap::new();
    let set = draw_samples_indexed(&uncertainties, plan, budget.loss_upper, |i| {
        let label = expert(&records[i])?;
        let loss = label.loss;
        answers.insert(i, label);
        Ok(loss)
    })
    .map_err(|err| match err {
        CoreError::Oracle { position, id, source } => CoreError::Oracle {
            position,
            id: id.parse::<usize>().map_or(id, |i| records[i].id.clone()),
            source,
        },
        other => other,
    })?;

    let grid = calibration_grid(uncertainties.iter().copied());
    let curve = build_curve(&set, &grid, budget.alpha, kind)?;
    let policy = select_threshold(&curve, budget)?;

    let mut labels = Vec::with_capacity(records.len());
    let mut unlabeled = Vec::new();
    for (i, rec) in records.iter().enumerate() {
        if !policy.routes_to_expert(rec.uncertainty) {
            labels.push(Label {
                id: rec.id.clone(),
                text: rec.cheap_answer.clone(),
                from_expert: false,
            });
            continue;
        }
        if !answers.contains_key(&i) {
            match expert(rec) {
                Ok(label) => {
                    answers.insert(i, label);
                }
                Err(_) => {
                    unlabeled.push(rec.id.clone());
                    continue;
                }
            }
        }
        labels.push(Label {
            id: rec.id.clone(),
            text: answers[&i].answer.clone(),
            from_expert: true,
        });
    }

    let outcome = TransductiveOutcome {
        labels,
        unlabeled,
        policy,
        curve,
        expert_queries: answers.len(),
    };
    if outcome.unlabeled.is_empty() {
        Ok(outcome)
    } else {
        Err(CoreError::PartialLabels(Box::new(outcome)))
    }
}
