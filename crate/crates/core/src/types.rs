//! Domain types shared by every stage of the pipeline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// The user's contract: tolerance `ε`, significance `α` and the loss range
/// `[loss_lower, loss_upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskBudget {
    pub epsilon: f64,
    pub alpha: f64,
    pub loss_lower: f64,
    pub loss_upper: f64,
}

impl RiskBudget {
    pub fn new(epsilon: f64, alpha: f64, loss_lower: f64, loss_upper: f64) -> Result<Self> {
        let budget = Self {
            epsilon,
            alpha,
            loss_lower,
            loss_upper,
        };
        budget.validate()?;
        Ok(budget)
    }

    /// Budget for the 0–1 loss, whose range is `[0, 1]`.
    pub fn binary(epsilon: f64, alpha: f64) -> Result<Self> {
        Self::new(epsilon, alpha, 0.0, 1.0)
    }

    /// Budget for the cosine-distance loss, whose range is `[0, 2]`.
    pub fn semantic(epsilon: f64, alpha: f64) -> Result<Self> {
        Self::new(epsilon, alpha, 0.0, 2.0)
    }

    /// Checks the budget invariants.
    ///
    /// `ε = 0` and `ε ≥ 1` are accepted: the former only admits thresholds with
    /// a zero bound, the latter accepts everything under a `[0, 1]` loss.
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(CoreError::InvalidBudget(format!(
                "epsilon must be finite and non-negative, got {}",
                self.epsilon
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CoreError::InvalidBudget(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.loss_lower.is_finite()
            && self.loss_upper.is_finite()
            && self.loss_lower < self.loss_upper)
        {
            return Err(CoreError::InvalidBudget(format!(
                "loss range [{}, {}] is empty or not finite",
                self.loss_lower, self.loss_upper
            )));
        }
        Ok(())
    }

    pub fn loss_width(&self) -> f64 {
        self.loss_upper - self.loss_lower
    }

    pub fn contains_loss(&self, loss: f64) -> bool {
        loss >= self.loss_lower && loss <= self.loss_upper
    }
}

/// Which family of uncertainty score produced `U`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    Logits,
    Verbalized,
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreKind::Logits => "logits",
            ScoreKind::Verbalized => "verbalized",
        })
    }
}

impl FromStr for ScoreKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "logits" => Ok(ScoreKind::Logits),
            "verbalized" => Ok(ScoreKind::Verbalized),
            other => Err(format!("unknown score kind `{other}`")),
        }
    }
}

/// Confidence bound used for the cumulative error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    /// Normal approximation; valid as the sample size grows.
    Clt,
    /// Hoeffding's inequality; valid for every sample size.
    Hoeffding,
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundKind::Clt => "clt",
            BoundKind::Hoeffding => "hoeffding",
        })
    }
}

impl FromStr for BoundKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "clt" => Ok(BoundKind::Clt),
            "hoeffding" => Ok(BoundKind::Hoeffding),
            other => Err(format!("unknown bound kind `{other}`")),
        }
    }
}

/// One prompt with its cheap answer, uncertainty and (once queried) the
/// expert answer and loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    pub uncertainty: f64,
    pub cheap_answer: String,
    pub cheap_tokens: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expert_answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expert_tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score_kind: Option<ScoreKind>,
    #[serde(default)]
    pub flags: Vec<String>,
}

impl CalibrationRecord {
    /// A record with only the cheap side filled in.
    pub fn unlabeled(id: impl Into<String>, uncertainty: f64, cheap_answer: impl Into<String>, cheap_tokens: u64) -> Self {
        Self {
            id: id.into(),
            prompt: None,
            uncertainty,
            cheap_answer: cheap_answer.into(),
            cheap_tokens,
            expert_answer: None,
            expert_tokens: None,
            gold: None,
            loss: None,
            score_kind: None,
            flags: Vec::new(),
        }
    }

    /// Attaches an expert answer and the loss it induces on the cheap answer.
    pub fn with_label(mut self, expert_answer: impl Into<String>, loss: f64) -> Self {
        self.expert_answer = Some(expert_answer.into());
        self.loss = Some(loss);
        self
    }

    pub fn with_expert_tokens(mut self, tokens: u64) -> Self {
        self.expert_tokens = Some(tokens);
        self
    }

    /// Checks the record invariants against the governing budget.
    pub fn validate(&self, budget: &RiskBudget) -> Result<()> {
        let fail = |reason: String| CoreError::InvalidRecord {
            id: self.id.clone(),
            reason,
        };
        if !(0.0..=1.0).contains(&self.uncertainty) {
            return Err(fail(format!("uncertainty {} outside [0, 1]", self.uncertainty)));
        }
        if self.loss.is_some() != self.expert_answer.is_some() {
            return Err(fail("loss must be present exactly when expert_answer is".into()));
        }
        if let Some(loss) = self.loss {
            if !budget.contains_loss(loss) {
                return Err(fail(format!(
                    "loss {loss} outside [{}, {}]",
                    budget.loss_lower, budget.loss_upper
                )));
            }
        }
        Ok(())
    }
}

/// The routed output for one item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingDecision {
    pub id: String,
    pub used_expert: bool,
    pub final_answer: String,
    pub uncertainty: f64,
    pub threshold: f64,
}

/// Expert-call and token-saving summary of a routed test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub ecp_percent: f64,
    pub stp_percent: f64,
    /// `None` when some cheap-routed item has no known loss.
    pub empirical_risk: Option<f64>,
    pub n_test: usize,
}

/// What the expert returned for one prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertAnswer {
    pub text: String,
    pub tokens: u64,
}

/// An expert answer together with the loss of the cheap answer against it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertLabel {
    pub answer: String,
    pub loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<u64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_rejects_bad_alpha_and_empty_range() {
        assert!(RiskBudget::new(0.1, 0.0, 0.0, 1.0).is_err());
        assert!(RiskBudget::new(0.1, 1.0, 0.0, 1.0).is_err());
        assert!(RiskBudget::new(0.1, 0.05, 1.0, 1.0).is_err());
        assert!(RiskBudget::new(-0.1, 0.05, 0.0, 1.0).is_err());
        assert!(RiskBudget::new(f64::NAN, 0.05, 0.0, 1.0).is_err());
        assert!(RiskBudget::binary(0.08, 0.05).is_ok());
    }

    #[test]
    fn record_loss_requires_expert_answer() {
        let budget = RiskBudget::binary(0.1, 0.05).unwrap();
        let mut rec = CalibrationRecord::unlabeled("a", 0.3, "x", 10);
        assert!(rec.validate(&budget).is_ok());
        rec.loss = Some(1.0);
        assert!(rec.validate(&budget).is_err());
        rec.expert_answer = Some("y".into());
        assert!(rec.validate(&budget).is_ok());
        rec.loss = Some(1.5);
        assert!(rec.validate(&budget).is_err());
        rec.loss = Some(0.0);
        rec.uncertainty = 1.2;
        assert!(rec.validate(&budget).is_err());
    }

    #[test]
    fn record_json_omits_absent_fields() {
        let rec = CalibrationRecord::unlabeled("q1", 0.25, "42", 7);
        let json = serde_json::to_string(&rec).unwrap();
        assert_eq!(
            json,
            r#"{"id":"q1","uncertainty":0.25,"cheap_answer":"42","cheap_tokens":7,"flags":[]}"#
        );
        let back: CalibrationRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn kinds_parse_from_cli_strings() {
        assert_eq!("clt".parse::<BoundKind>().unwrap(), BoundKind::Clt);
        assert_eq!("hoeffding".parse::<BoundKind>().unwrap(), BoundKind::Hoeffding);
        assert!("bentkus".parse::<BoundKind>().is_err());
        assert_eq!("verbalized".parse::<ScoreKind>().unwrap(), ScoreKind::Verbalized);
    }
}
