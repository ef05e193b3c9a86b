use std::collections::HashMap;
use std::io::Write;

use super::{read_records, route::summary, write_json, Experts};
use crate::args::EvaluateArgs;
use crate::error::{CliError, Status};
use crate::manifest::RunManifest;
use crate::report::{ItemCosts, RunReport};

pub fn run(args: &EvaluateArgs, out: &mut dyn Write) -> Result<Status, CliError> {
    let decisions = pacroute_gateway::read_decisions(&args.decisions)?;
    if decisions.is_empty() {
        return Err(CliError::msg(format!("{} holds no decisions", args.decisions.display())));
    }
    let records = read_records(&args.records)?;
    let by_id: HashMap<&str, _> = records.iter().map(|r| (r.id.as_str(), r)).collect();
    let experts = Experts::open(&args.expert)?;
    let labeler = experts.as_ref().map(|e| e.labeler(args.loss, &args.expert));

    let mut costs = HashMap::with_capacity(decisions.len());
    for d in &decisions {
        let rec = by_id
            .get(d.id.as_str())
            .ok_or_else(|| CliError::msg(format!("decision `{}` has no matching record", d.id)))?;
        let mut c = ItemCosts {
            cheap_tokens: rec.cheap_tokens,
            expert_tokens: rec.expert_tokens,
            loss: rec.loss,
        };
        let missing = c.expert_tokens.is_none() || (!d.used_expert && c.loss.is_none());
        if let (true, Some(labeler)) = (missing, &labeler) {
            let label = labeler.label(rec).map_err(|e| CliError::from(e).context(format!("labeling `{}`", d.id)))?;
            c.expert_tokens = c.expert_tokens.or(label.tokens);
            c.loss = c.loss.or(Some(label.loss));
        }
        costs.insert(d.id.clone(), c);
    }
    let report = RunReport::compute(&decisions, &costs);
    write_json(&args.output, &report)?;
    RunManifest::new("evaluate", args)
        .config(args.expert.config.as_deref())
        .input(&args.decisions)?
        .input(&args.records)?
        .output(&args.output)?
        .write(args.manifest.as_deref(), &args.output)?;
    writeln!(out, "{}", summary(&report))?;
    Ok(Status::Ok)
}
