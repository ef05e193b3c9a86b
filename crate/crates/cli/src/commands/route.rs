use std::collections::HashMap;
use std::io::Write;

use pacroute_core::{ExpertAnswer, Router, TestItem, ThresholdPolicy};

use super::{common_score_kind, no_expert, read_records, write_json, Experts};
use crate::args::RouteArgs;
use crate::error::{CliError, FailureKind, Status};
use crate::manifest::{Artifact, RunManifest};
use crate::report::{ItemCosts, RunReport};

pub fn run(args: &RouteArgs, out: &mut dyn Write) -> Result<Status, CliError> {
    let policy_text = std::fs::read_to_string(&args.policy)
        .map_err(|e| CliError::config(anyhow::Error::new(e).context(format!("reading {}", args.policy.display()))))?;
    let policy = ThresholdPolicy::from_json(&policy_text)?;
    let records = read_records(&args.records)?;
    if let (Some(p), Some(r)) = (policy.score_kind, common_score_kind(&records)?) {
        if p != r {
            return Err(CliError::msg(format!(
                "policy was calibrated on {p} scores but the test records carry {r} scores"
            )));
        }
    }

    let experts = Experts::open(&args.expert)?;
    let labeler = experts.as_ref().map(|e| e.labeler(pacroute_gateway::LossKind::Binary, &args.expert));
    let by_id: HashMap<&str, _> = records.iter().map(|r| (r.id.as_str(), r)).collect();
    let expert = |item: &TestItem| -> Result<ExpertAnswer, pacroute_core::OracleError> {
        let rec = by_id[item.id.as_str()];
        if let Some(text) = &rec.expert_answer {
            return Ok(ExpertAnswer {
                text: text.clone(),
                tokens: rec.expert_tokens.unwrap_or(0),
            });
        }
        let labeler = labeler.as_ref().ok_or_else(|| no_expert(&rec.id))?;
        let prompt = rec.prompt.as_deref().ok_or_else(|| format!("record `{}` has no prompt", rec.id))?;
        Ok(labeler.expert_answer(prompt)?)
    };
    let items: Vec<TestItem> = records
        .iter()
        .map(|r| TestItem {
            id: r.id.clone(),
            prompt: r.prompt.clone().unwrap_or_default(),
            cheap_answer: r.cheap_answer.clone(),
            uncertainty: r.uncertainty,
            cheap_tokens: r.cheap_tokens,
        })
        .collect();
    let router = Router::new(expert, experts.as_ref().map_or(1, |e| e.max_parallel));
    let outcome = router.route(&items, &policy)?;
    if !outcome.is_complete() {
        let failures: Vec<_> = outcome.failures().collect();
        let kind = if experts.is_some() { FailureKind::Transport } else { FailureKind::Config };
        return Err(CliError {
            kind,
            error: anyhow::anyhow!(
                "{} item(s) could not be routed; first `{}`: {}",
                failures.len(),
                failures[0].id,
                failures[0].error
            ),
        });
    }
    let decisions: Vec<_> = outcome.decisions().cloned().collect();

    let costs: HashMap<String, ItemCosts> = records
        .iter()
        .map(|r| {
            let fetched = router.cached(&r.id).map(|a| a.tokens).filter(|t| *t > 0);
            let costs = ItemCosts {
                cheap_tokens: r.cheap_tokens,
                expert_tokens: fetched.or(r.expert_tokens),
                loss: r.loss,
            };
            (r.id.clone(), costs)
        })
        .collect();
    let mut report = RunReport::compute(&decisions, &costs);
    report.threshold = Some(policy.threshold);
    report.feasible = Some(policy.feasible);
    report.policy_digest = Some(Artifact::of(&args.policy)?.sha256);

    pacroute_gateway::write_jsonl(&args.decisions_out, &decisions)?;
    write_json(&args.report_out, &report)?;
    RunManifest::new("route", args)
        .config(args.expert.config.as_deref())
        .input(&args.records)?
        .input(&args.policy)?
        .output(&args.decisions_out)?
        .output(&args.report_out)?
        .policy(&args.policy)?
        .write(args.manifest.as_deref(), &args.report_out)?;
    writeln!(out, "{}", summary(&report))?;
    Ok(Status::Ok)
}

pub(crate) fn summary(r: &RunReport) -> String {
    let opt = |v: Option<f64>, prec: usize| v.map_or("n/a".to_string(), |x| format!("{x:.prec$}"));
    format!(
        "items {} expert {} ecp {:.2}% stp {}% risk {}",
        r.n_test,
        r.n_expert,
        r.ecp_percent,
        opt(r.stp_percent, 2),
        opt(r.empirical_risk, 4)
    )
}
