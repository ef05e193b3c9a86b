use rand::Rng;
use rand_distr::{Beta as BetaSampler, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, Continuous, ContinuousCDF};
use statrs::function::erf::erfc;

use super::integrate::adaptive_simpson;
use crate::error::{CoreError, Result};
use crate::types::{BoundKind, RiskBudget};
use crate::ucb::SamplingPlan;

/// Distribution of the uncertainty score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UncertaintyLaw {
    /// `Beta(a, b)`; both shapes must be at least 1 so the density is bounded.
    Beta { a: f64, b: f64 },
    Uniform,
}

/// Conditional law of the loss given the uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossLaw {
    /// Binary loss with `P(ℓ = 1 | U) = ceiling · σ(steepness · (U − center))`.
    LogisticBernoulli {
        steepness: f64,
        center: f64,
        #[serde(default = "one")]
        ceiling: f64,
    },
    /// `ℓ = clamp(U + N(0, noise_sd²), 0, 1)`.
    ClampedGaussian { noise_sd: f64 },
    Constant { value: f64 },
}

fn one() -> f64 {
    1.0
}

/// Inclusive token-count ranges, drawn uniformly per item.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenLaw {
    pub cheap: [u64; 2],
    pub expert: [u64; 2],
}

impl Default for TokenLaw {
    fn default() -> Self {
        Self {
            cheap: [200, 400],
            expert: [800, 1600],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConfig {
    pub pi: f64,
    /// Defaults to `⌈n_cal / pi⌉`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
}

impl PlanConfig {
    pub fn sample_size(&self, n: usize) -> usize {
        self.m.unwrap_or_else(|| (n as f64 / self.pi).ceil() as usize)
    }

    pub fn plan(&self, n: usize, seed: u64) -> Result<SamplingPlan> {
        SamplingPlan::constant_with_size(n, self.pi, self.sample_size(n), seed)
    }
}

/// A synthetic population with closed-form true risk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub n_cal: usize,
    pub n_test: usize,
    pub uncertainty: UncertaintyLaw,
    pub loss: LossLaw,
    pub budget: RiskBudget,
    pub plan: PlanConfig,
    #[serde(default = "default_bound")]
    pub bound: BoundKind,
    pub reps: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Slack `t` for the empirical-risk check.
    #[serde(default = "default_slack")]
    pub slack: f64,
    #[serde(default)]
    pub tokens: TokenLaw,
}

fn default_bound() -> BoundKind {
    BoundKind::Clt
}

fn default_slack() -> f64 {
    0.05
}

/// One synthetic item.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimItem {
    pub uncertainty: f64,
    pub loss: f64,
    pub cheap_tokens: u64,
    pub expert_tokens: u64,
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let s: Self = toml::from_str(text).map_err(|e| CoreError::InvalidScenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let s: Self =
            serde_json::from_str(text).map_err(|e| CoreError::InvalidScenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CoreError::InvalidScenario(msg));
        if self.n_cal < 2 {
            return bad(format!("n_cal must be at least 2, got {}", self.n_cal));
        }
        if self.n_test == 0 {
            return bad("n_test must be positive".into());
        }
        if self.reps == 0 {
            return bad("reps must be positive".into());
        }
        self.budget
            .validate()
            .map_err(|e| CoreError::InvalidScenario(e.to_string()))?;
        match self.uncertainty {
            UncertaintyLaw::Beta { a, b } => {
                if !(a.is_finite() && b.is_finite() && a >= 1.0 && b >= 1.0) {
                    return bad(format!("beta shapes ({a}, {b}) must be finite and >= 1"));
                }
            }
            UncertaintyLaw::Uniform => {}
        }
        let (lo, hi) = match self.loss {
            LossLaw::LogisticBernoulli {
                steepness,
                center,
                ceiling,
            } => {
                // a negative steepness would make loss fall as uncertainty rises
                if !(steepness.is_finite() && steepness >= 0.0) {
                    return bad(format!("steepness {steepness} must be finite and >= 0"));
                }
                if !center.is_finite() || !(0.0..=1.0).contains(&ceiling) {
                    return bad("center must be finite and ceiling in [0, 1]".into());
                }
                (0.0, 1.0)
            }
            LossLaw::ClampedGaussian { noise_sd } => {
                if !(noise_sd.is_finite() && noise_sd >= 0.0) {
                    return bad(format!("noise_sd {noise_sd} must be finite and >= 0"));
                }
                (0.0, 1.0)
            }
            LossLaw::Constant { value } => {
                if !(value.is_finite() && value >= 0.0) {
                    return bad(format!("constant loss {value} must be finite and >= 0"));
                }
                (value, value)
            }
        };
        if lo < self.budget.loss_lower || hi > self.budget.loss_upper {
            return bad(format!(
                "loss support [{lo}, {hi}] exceeds budget range [{}, {}]",
                self.budget.loss_lower, self.budget.loss_upper
            ));
        }
        if !(self.plan.pi > 0.0 && self.plan.pi <= 1.0) {
            return bad(format!("plan.pi {} outside (0, 1]", self.plan.pi));
        }
        if self.plan.sample_size(self.n_cal) < 2 {
            return bad("plan must draw at least 2 samples".into());
        }
        if !(self.slack.is_finite() && self.slack >= 0.0) {
            return bad(format!("slack {} must be finite and >= 0", self.slack));
        }
        let t = self.tokens;
        if t.cheap[0] > t.cheap[1] || t.expert[0] > t.expert[1] || t.expert[0] == 0 {
            return bad("token ranges must be ordered and expert tokens positive".into());
        }
        Ok(())
    }

    /// `E[ℓ | U = u]`, non-decreasing in `u` for every supported law.
    pub fn conditional_mean_loss(&self, u: f64) -> f64 {
        match self.loss {
            LossLaw::LogisticBernoulli {
                steepness,
                center,
                ceiling,
            } => ceiling / (1.0 + (-steepness * (u - center)).exp()),
            LossLaw::ClampedGaussian { noise_sd } => {
                if noise_sd == 0.0 {
                    return u.clamp(0.0, 1.0);
                }
                // E[max(X − a, 0)] for X ~ N(u, sd²)
                let excess = |a: f64| {
                    let d = u - a;
                    d * std_normal_cdf(d / noise_sd) + noise_sd * std_normal_pdf(d / noise_sd)
                };
                excess(0.0) - excess(1.0)
            }
            LossLaw::Constant { value } => value,
        }
    }

    pub fn uncertainty_density(&self, u: f64) -> f64 {
        if !(0.0..=1.0).contains(&u) {
            return 0.0;
        }
        match self.uncertainty {
            UncertaintyLaw::Beta { a, b } => Beta::new(a, b).map(|d| d.pdf(u)).unwrap_or(0.0),
            UncertaintyLaw::Uniform => 1.0,
        }
    }

    /// Quantile of the uncertainty law.
    pub fn uncertainty_quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        match self.uncertainty {
            UncertaintyLaw::Beta { a, b } => {
                if p >= 1.0 {
                    1.0
                } else {
                    Beta::new(a, b).map(|d| d.inverse_cdf(p)).unwrap_or(p)
                }
            }
            UncertaintyLaw::Uniform => p,
        }
    }

    /// Population risk `R(u) = E[ℓ · 1{U ≤ u}]` of accepting cheap answers
    /// below `u`.
    pub fn true_risk(&self, u: f64) -> Result<f64> {
        let upper = u.min(1.0);
        if upper <= 0.0 {
            return Ok(0.0);
        }
        adaptive_simpson(
            |x| self.conditional_mean_loss(x) * self.uncertainty_density(x),
            0.0,
            upper,
            1e-12,
        )
    }

    pub fn sample_item<R: Rng + ?Sized>(&self, rng: &mut R) -> SimItem {
        let uncertainty = match self.uncertainty {
            UncertaintyLaw::Beta { a, b } => BetaSampler::new(a, b)
                .expect("validated beta shapes")
                .sample(rng),
            UncertaintyLaw::Uniform => rng.random::<f64>(),
        };
        let loss = match self.loss {
            LossLaw::LogisticBernoulli { .. } => {
                let p = self.conditional_mean_loss(uncertainty);
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            }
            LossLaw::ClampedGaussian { noise_sd } => {
                let z: f64 = StandardNormal.sample(rng);
                (uncertainty + noise_sd * z).clamp(0.0, 1.0)
            }
            LossLaw::Constant { value } => value,
        };
        let t = self.tokens;
        SimItem {
            uncertainty,
            loss,
            cheap_tokens: rng.random_range(t.cheap[0]..=t.cheap[1]),
            expert_tokens: rng.random_range(t.expert[0]..=t.expert[1]),
        }
    }

    pub fn sample_items<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<SimItem> {
        (0..n).map(|_| self.sample_item(rng)).collect()
    }

    /// Binary loss, Beta(2, 5) uncertainty, logistic link centred at 0.55.
    pub fn logistic_beta() -> Self {
        Self {
            name: "logistic-beta".into(),
            n_cal: 500,
            n_test: 500,
            uncertainty: UncertaintyLaw::Beta { a: 2.0, b: 5.0 },
            loss: LossLaw::LogisticBernoulli {
                steepness: 8.0,
                center: 0.55,
                ceiling: 1.0,
            },
            budget: RiskBudget::binary(0.08, 0.05).expect("valid budget"),
            plan: PlanConfig { pi: 0.5, m: None },
            bound: BoundKind::Clt,
            reps: 1000,
            base_seed: 20_251_016,
            slack: 0.05,
            tokens: TokenLaw::default(),
        }
    }

    /// Continuous loss `clamp(U + noise)` with uniform uncertainty.
    pub fn clamped_gaussian() -> Self {
        Self {
            name: "clamped-gaussian".into(),
            uncertainty: UncertaintyLaw::Uniform,
            loss: LossLaw::ClampedGaussian { noise_sd: 0.1 },
            base_seed: 31_337,
            ..Self::logistic_beta()
        }
    }

    /// Binary loss, right-skewed Beta(1.5, 3) uncertainty, steep link with a
    /// 40% loss ceiling.
    pub fn steep_logistic() -> Self {
        Self {
            name: "steep-logistic".into(),
            uncertainty: UncertaintyLaw::Beta { a: 1.5, b: 3.0 },
            loss: LossLaw::LogisticBernoulli {
                steepness: 12.0,
                center: 0.5,
                ceiling: 0.4,
            },
            base_seed: 4_242,
            ..Self::logistic_beta()
        }
    }

    /// MATH-500-like regime: a strong cheap model (overall disagreement
    /// about 4.4%) calibrated at ε = 0.03 on a 300/200 split.
    pub fn math_like() -> Self {
        Self {
            name: "math-like".into(),
            n_cal: 300,
            n_test: 200,
            uncertainty: UncertaintyLaw::Beta { a: 1.0, b: 6.0 },
            loss: LossLaw::LogisticBernoulli {
                steepness: 14.0,
                center: 0.35,
                ceiling: 1.0,
            },
            budget: RiskBudget::binary(0.03, 0.05).expect("valid budget"),
            reps: 100,
            base_seed: 500,
            tokens: TokenLaw {
                cheap: [150, 650],
                expert: [1200, 2400],
            },
            ..Self::logistic_beta()
        }
    }

    /// ZebraLogic-like regime for the naive `U ≥ 0.05` baseline: most items
    /// clear the fixed cut-off and the cheap pass costs over half the
    /// expert's tokens.
    pub fn zebra_like() -> Self {
        Self {
            name: "zebra-like".into(),
            n_cal: 500,
            n_test: 500,
            uncertainty: UncertaintyLaw::Beta { a: 1.0, b: 5.0 },
            loss: LossLaw::LogisticBernoulli {
                steepness: 10.0,
                center: 0.45,
                ceiling: 1.0,
            },
            budget: RiskBudget::binary(0.08, 0.05).expect("valid budget"),
            reps: 100,
            base_seed: 1000,
            tokens: TokenLaw {
                cheap: [900, 1400],
                expert: [2000, 2000],
            },
            ..Self::logistic_beta()
        }
    }

    /// The three general-purpose scenarios used for coverage suites.
    pub fn presets() -> Vec<Self> {
        vec![Self::logistic_beta(), Self::clamped_gaussian(), Self::steep_logistic()]
    }
}
