use std::collections::HashMap;

use pacroute_core::metrics::{ecp_percent, stp_percent};
use pacroute_core::{empirical_risk, RoutingDecision};
use serde::{Deserialize, Serialize};

/// Expert-call and token-saving summary written by `route` and `evaluate`.
///
/// Token savings and risk are left out when some input they need is unknown
/// (an expert token count, or the loss of a cheap-routed item).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub n_test: usize,
    pub n_expert: usize,
    pub ecp_percent: f64,
    pub stp_percent: Option<f64>,
    pub empirical_risk: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feasible: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy_digest: Option<String>,
}

/// Per-item inputs to the report, keyed by decision id.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ItemCosts {
    pub cheap_tokens: u64,
    pub expert_tokens: Option<u64>,
    pub loss: Option<f64>,
}

impl RunReport {
    pub fn compute(decisions: &[RoutingDecision], costs: &HashMap<String, ItemCosts>) -> Self {
        let cost = |id: &str| costs.get(id).copied().unwrap_or_default();
        let tokens: Option<Vec<(u64, u64, bool)>> = decisions
            .iter()
            .map(|d| {
                let c = cost(&d.id);
                c.expert_tokens.filter(|t| *t > 0).map(|e| (c.cheap_tokens, e, d.used_expert))
            })
            .collect();
        let losses: HashMap<String, f64> = decisions
            .iter()
            .filter_map(|d| cost(&d.id).loss.map(|l| (d.id.clone(), l)))
            .collect();
        let thresholds = decisions.iter().map(|d| d.threshold);
        let threshold = decisions
            .first()
            .map(|d| d.threshold)
            .filter(|t| thresholds.clone().all(|x| x == *t));
        Self {
            n_test: decisions.len(),
            n_expert: decisions.iter().filter(|d| d.used_expert).count(),
            ecp_percent: ecp_percent(decisions.iter().map(|d| d.used_expert)),
            stp_percent: tokens.filter(|t| !t.is_empty()).map(stp_percent),
            empirical_risk: empirical_risk(decisions, &losses).ok(),
            threshold,
            feasible: None,
            policy_digest: None,
        }
    }
}
