use pacroute_gateway::{score_all, Client, DiskCache};

use super::load_config;
use crate::args::ScoreArgs;
use crate::error::{CliError, Status};
use crate::manifest::RunManifest;

pub fn run(args: &ScoreArgs) -> Result<Status, CliError> {
    let inputs = pacroute_gateway::read_input(&args.input)?;
    let cfg = load_config(&args.config)?;
    let records = if inputs.is_empty() {
        Vec::new()
    } else {
        let client = Client::connect(cfg.nonthinking.clone(), Some(DiskCache::open(&cfg.cache_dir)?))?;
        let mut records = Vec::with_capacity(inputs.len());
        for (i, result) in score_all(&client, &inputs, args.score_kind, args.trials).into_iter().enumerate() {
            let record = result.map_err(|e| CliError::from(e).context(format!("item {} (`{}`)", i + 1, inputs[i].id)))?;
            records.push(record);
        }
        log::info!("scored {} items with {} network requests", records.len(), client.network_requests());
        records
    };
    pacroute_gateway::write_jsonl(&args.output, &records)?;
    RunManifest::new("score", args)
        .config(Some(&args.config))
        .input(&args.input)?
        .output(&args.output)?
        .write(args.manifest.as_deref(), &args.output)?;
    Ok(Status::Ok)
}
