use std::io::Write;

use pacroute_core::{transductive_label, CoreError, ExpertLabel};

use super::{budget, common_score_kind, no_expert, plan, read_records, write_json, Experts};
use crate::args::LabelArgs;
use crate::error::{CliError, FailureKind, Status};
use crate::manifest::RunManifest;

pub fn run(args: &LabelArgs, out: &mut dyn Write) -> Result<Status, CliError> {
    let budget = budget(&args.budget)?;
    let records = read_records(&args.records)?;
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

    let result = transductive_label(&records, &plan, &budget, args.plan.bound, |rec| {
        if let (Some(answer), Some(loss)) = (&rec.expert_answer, rec.loss) {
            return Ok(ExpertLabel {
                answer: answer.clone(),
                loss,
                tokens: rec.expert_tokens,
            });
        }
        let labeler = labeler.as_ref().ok_or_else(|| no_expert(&rec.id))?;
        Ok(labeler.label(rec)?)
    });
    let (outcome, incomplete) = match result {
        Ok(o) => (o, false),
        Err(CoreError::PartialLabels(o)) => (*o, true),
        Err(e) => return Err(e.into()),
    };
    let mut policy = outcome.policy.clone();
    policy.score_kind = score_kind;

    pacroute_gateway::write_jsonl(&args.output, &outcome.labels)?;
    let mut manifest = RunManifest::new("label", args)
        .config(args.expert.config.as_deref())
        .seed("plan", args.plan.seed)
        .input(&args.records)?
        .output(&args.output)?;
    if let Some(path) = &args.policy_out {
        write_json(path, &policy)?;
        manifest = manifest.output(path)?.policy(path)?;
    }
    manifest.write(args.manifest.as_deref(), &args.output)?;

    let from_expert = outcome.labels.iter().filter(|l| l.from_expert).count();
    writeln!(
        out,
        "threshold {:.6} feasible {} labels {} from expert {} expert queries {}",
        policy.threshold,
        policy.feasible,
        outcome.labels.len(),
        from_expert,
        outcome.expert_queries
    )?;
    if incomplete {
        let kind = if experts.is_some() { FailureKind::Transport } else { FailureKind::Config };
        return Err(CliError {
            kind,
            error: anyhow::anyhow!(
                "{} item(s) left unlabeled, first `{}`; partial labels were written",
                outcome.unlabeled.len(),
                outcome.unlabeled[0]
            ),
        });
    }
    Ok(if policy.feasible { Status::Ok } else { Status::Infeasible })
}
