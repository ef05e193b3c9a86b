use std::collections::HashMap;
use std::io::Write;

use pacroute_core::{build_curve, calibration_grid, draw_samples, select_threshold, ExpertLabel, ThresholdPolicy, UcbCurve};

use super::{budget, common_score_kind, no_expert, plan, read_records, write_json, Experts};
use crate::args::CalibrateArgs;
use crate::error::{CliError, Status};
use crate::manifest::RunManifest;

pub fn run(args: &CalibrateArgs, out: &mut dyn Write) -> Result<Status, CliError> {
    let budget = budget(&args.budget)?;
    let mut records = read_records(&args.records)?;
    if records.is_empty() {
        return Err(CliError::msg(format!("{} holds no records", args.records.display())));
    }
    for r in &records {
        r.validate(&budget)?;
    }
    let score_kind = common_score_kind(&records)?;
    let plan = plan(&args.plan, records.len())?;
    let experts = Experts::open(&args.expert)?;
    let labeler = experts.as_ref().map(|e| e.labeler(args.budget.loss, &args.expert));

    let mut fetched: HashMap<String, ExpertLabel> = HashMap::new();
    let set = draw_samples(&records, &plan, budget.loss_upper, |rec| {
        if let Some(loss) = rec.loss {
            return Ok(loss);
        }
        let labeler = labeler.as_ref().ok_or_else(|| no_expert(&rec.id))?;
        let label = labeler.label(rec)?;
        let loss = label.loss;
        fetched.insert(rec.id.clone(), label);
        Ok(loss)
    })?;
    let grid = calibration_grid(records.iter().map(|r| r.uncertainty));
    let curve = build_curve(&set, &grid, budget.alpha, args.plan.bound)?;
    let mut policy = select_threshold(&curve, &budget)?;
    policy.score_kind = score_kind;

    write_json(&args.output, &policy)?;
    let mut manifest = RunManifest::new("calibrate", args)
        .config(args.expert.config.as_deref())
        .seed("plan", args.plan.seed)
        .input(&args.records)?
        .output(&args.output)?
        .policy(&args.output)?;
    if let Some(path) = &args.labels_out {
        for r in &mut records {
            if let Some(label) = fetched.remove(&r.id) {
                r.expert_answer = Some(label.answer);
                r.loss = Some(label.loss);
                r.expert_tokens = label.tokens.or(r.expert_tokens);
            }
        }
        pacroute_gateway::write_jsonl(path, &records)?;
        manifest = manifest.output(path)?;
    }
    manifest.write(args.manifest.as_deref(), &args.output)?;

    out.write_all(curve_table(&curve, &policy).as_bytes())?;
    writeln!(out, "expert queries {} of {} records", set.unique_queries, records.len())?;
    Ok(if policy.feasible { Status::Ok } else { Status::Infeasible })
}

/// The UCB curve as an aligned text table, marking the chosen threshold.
pub fn curve_table(curve: &UcbCurve, policy: &ThresholdPolicy) -> String {
    let mut s = format!("{:>10} {:>10} {:>10}\n", "u", "mean", "ucb");
    for ((u, mean), ucb) in curve.grid.iter().zip(&curve.means).zip(&curve.bounds) {
        let mark = if policy.feasible && *u == policy.threshold { "  <- threshold" } else { "" };
        s.push_str(&format!("{u:>10.6} {mean:>10.6} {ucb:>10.6}{mark}\n"));
    }
    s.push_str(&format!(
        "threshold {:.6} feasible {} bound {} alpha {} epsilon {} m {}\n",
        policy.threshold, policy.feasible, policy.bound_kind, policy.alpha, policy.epsilon, policy.m
    ));
    s
}
