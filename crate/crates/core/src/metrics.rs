//! Risk and efficiency metrics for a routed test set.

use std::collections::HashMap;

use crate::error::{CoreError, Result};
use crate::types::{CalibrationRecord, EfficiencyReport, RoutingDecision};

/// Mean loss of the routed outputs against the expert.
///
/// Expert-routed items contribute zero because their output is the expert
/// answer itself; cheap-routed items contribute `losses[id]`.
pub fn empirical_risk(decisions: &[RoutingDecision], losses: &HashMap<String, f64>) -> Result<f64> {
    if decisions.is_empty() {
        return Err(CoreError::UndefinedRisk);
    }
    let mut total = 0.0;
    for d in decisions {
        if d.used_expert {
            continue;
        }
        total += losses
            .get(&d.id)
            .copied()
            .ok_or_else(|| CoreError::MissingLoss(d.id.clone()))?;
    }
    Ok(total / decisions.len() as f64)
}

/// Percentage of items sent to the expert.
pub fn ecp_percent<I>(used_expert: I) -> f64
where
    I: IntoIterator<Item = bool>,
{
    let (mut n, mut calls) = (0usize, 0usize);
    for used in used_expert {
        n += 1;
        calls += used as usize;
    }
    if n == 0 {
        0.0
    } else {
        100.0 * calls as f64 / n as f64
    }
}

/// Saved token percentage, `100 · (1 − mean((l_cheap + 1{expert} · l_expert) / l_expert))`.
///
/// Each item is `(cheap_tokens, expert_tokens, used_expert)`. Negative when
/// the cheap pass plus expert calls cost more than always calling the expert.
pub fn stp_percent<I>(items: I) -> f64
where
    I: IntoIterator<Item = (u64, u64, bool)>,
{
    let (mut n, mut ratio_sum) = (0usize, 0.0f64);
    for (cheap, expert, used) in items {
        let cost = cheap as f64 + if used { expert as f64 } else { 0.0 };
        ratio_sum += cost / expert as f64;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        100.0 * (1.0 - ratio_sum / n as f64)
    }
}

/// ECP, STP and (when every cheap-routed record carries a loss) the
/// empirical risk of a routed test set.
pub fn efficiency_metrics(
    decisions: &[RoutingDecision],
    records: &[CalibrationRecord],
) -> Result<EfficiencyReport> {
    if decisions.is_empty() {
        return Err(CoreError::UndefinedRisk);
    }
    let by_id: HashMap<&str, &CalibrationRecord> =
        records.iter().map(|r| (r.id.as_str(), r)).collect();

    let mut token_rows = Vec::with_capacity(decisions.len());
    let mut losses = HashMap::new();
    let mut risk_known = true;
    for d in decisions {
        let rec = by_id
            .get(d.id.as_str())
            .ok_or_else(|| CoreError::IncompleteRecord(d.id.clone()))?;
        let expert_tokens = rec
            .expert_tokens
            .ok_or_else(|| CoreError::IncompleteRecord(d.id.clone()))?;
        if expert_tokens == 0 {
            return Err(CoreError::DegenerateTokens(d.id.clone()));
        }
        token_rows.push((rec.cheap_tokens, expert_tokens, d.used_expert));
        match rec.loss {
            Some(loss) => {
                losses.insert(d.id.clone(), loss);
            }
            None if !d.used_expert => risk_known = false,
            None => {}
        }
    }

    Ok(EfficiencyReport {
        ecp_percent: ecp_percent(decisions.iter().map(|d| d.used_expert)),
        stp_percent: stp_percent(token_rows),
        empirical_risk: if risk_known {
            Some(empirical_risk(decisions, &losses)?)
        } else {
            None
        },
        n_test: decisions.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn decision(id: &str, used_expert: bool) -> RoutingDecision {
        RoutingDecision {
            id: id.into(),
            used_expert,
            final_answer: String::new(),
            uncertainty: 0.0,
            threshold: 0.0,
        }
    }

    fn record(id: &str, cheap: u64, expert: u64, loss: Option<f64>) -> CalibrationRecord {
        let mut r = CalibrationRecord::unlabeled(id, 0.5, "c", cheap).with_expert_tokens(expert);
        if let Some(l) = loss {
            r = r.with_label("e", l);
        }
        r
    }

    #[test]
    fn risk_examples() {
        let all_expert = vec![decision("a", true), decision("b", true)];
        assert_eq!(empirical_risk(&all_expert, &HashMap::new()).unwrap(), 0.0);

        let cheap = vec![decision("a", false), decision("b", false)];
        let losses = HashMap::from([("a".to_string(), 0.0), ("b".to_string(), 1.0)]);
        assert_eq!(empirical_risk(&cheap, &losses).unwrap(), 0.5);

        assert!(matches!(empirical_risk(&[], &losses), Err(CoreError::UndefinedRisk)));
        assert!(matches!(
            empirical_risk(&[decision("z", false)], &losses),
            Err(CoreError::MissingLoss(_))
        ));
    }

    #[test]
    fn efficiency_examples() {
        let recs = vec![record("a", 100, 100, Some(0.0)), record("b", 50, 50, Some(1.0))];
        let none = vec![decision("a", false), decision("b", false)];
        let r = efficiency_metrics(&none, &recs).unwrap();
        assert_eq!(r.ecp_percent, 0.0);
        assert!(r.stp_percent.abs() < 1e-12);
        assert_eq!(r.empirical_risk, Some(0.5));

        // every item costs cheap + expert = 2x the expert alone
        let all = vec![decision("a", true), decision("b", true)];
        let r = efficiency_metrics(&all, &recs).unwrap();
        assert_eq!(r.ecp_percent, 100.0);
        assert!((r.stp_percent + 100.0).abs() < 1e-12);
        assert_eq!(r.empirical_risk, Some(0.0));
        assert_eq!(r.n_test, 2);
    }

    #[test]
    fn stp_matches_hand_computation() {
        // ratios: 30/120 = 0.25 (cheap), (30 + 120)/120 = 1.25 (expert) -> mean 0.75
        let stp = stp_percent([(30, 120, false), (30, 120, true)]);
        assert!((stp - 25.0).abs() < 1e-12);
    }

    #[test]
    fn efficiency_errors() {
        let mut recs = vec![record("a", 10, 10, None)];
        recs[0].expert_tokens = None;
        assert!(matches!(
            efficiency_metrics(&[decision("a", true)], &recs),
            Err(CoreError::IncompleteRecord(_))
        ));
        recs[0].expert_tokens = Some(0);
        assert!(matches!(
            efficiency_metrics(&[decision("a", true)], &recs),
            Err(CoreError::DegenerateTokens(_))
        ));
        assert!(matches!(
            efficiency_metrics(&[decision("missing", true)], &recs),
            Err(CoreError::IncompleteRecord(_))
        ));
    }

    #[test]
    fn unknown_cheap_loss_leaves_risk_unset() {
        let recs = vec![record("a", 10, 20, None)];
        let r = efficiency_metrics(&[decision("a", false)], &recs).unwrap();
        assert_eq!(r.empirical_risk, None);
        let r = efficiency_metrics(&[decision("a", true)], &recs).unwrap();
        assert_eq!(r.empirical_risk, Some(0.0));
    }

    proptest! {
        #[test]
        fn risk_is_permutation_invariant(
            items in prop::collection::vec((any::<bool>(), 0.0f64..=1.0), 1..40),
            seed in any::<u64>(),
        ) {
            let decisions: Vec<_> = items.iter().enumerate()
                .map(|(i, (e, _))| decision(&i.to_string(), *e)).collect();
            let losses: HashMap<_, _> = items.iter().enumerate()
                .map(|(i, (_, l))| (i.to_string(), *l)).collect();
            let mut shuffled = decisions.clone();
            let k = (seed as usize) % shuffled.len();
            shuffled.rotate_left(k);
            shuffled.reverse();
            let a = empirical_risk(&decisions, &losses).unwrap();
            let b = empirical_risk(&shuffled, &losses).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn ecp_non_increasing_in_threshold(
            us in prop::collection::vec(0.0f64..=1.0, 1..50),
            t1 in 0.0f64..=1.0,
            t2 in 0.0f64..=1.0,
        ) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let at = |t: f64| ecp_percent(us.iter().map(|u| *u >= t));
            prop_assert!(at(hi) <= at(lo));
            prop_assert!((0.0..=100.0).contains(&at(lo)));
        }
    }
}
