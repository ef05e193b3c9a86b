use pacroute_gateway::{ingest_dataset, SplitSpec};

use crate::args::SplitArgs;
use crate::error::{CliError, Status};
use crate::manifest::RunManifest;

pub fn run(args: &SplitArgs) -> Result<Status, CliError> {
    let spec = match (args.preset, args.cal_size, args.test_size) {
        (Some(p), _, _) => p.spec(),
        (None, Some(c), Some(t)) => SplitSpec::new(c, t),
        _ => return Err(CliError::msg("give either --preset or both --cal-size and --test-size")),
    }
    .with_seed(args.seed);
    let (cal, test) = ingest_dataset(&args.input, spec)?;
    pacroute_gateway::write_jsonl(&args.cal_out, &cal)?;
    pacroute_gateway::write_jsonl(&args.test_out, &test)?;
    RunManifest::new("split", args)
        .seed("split", args.seed)
        .input(&args.input)?
        .output(&args.cal_out)?
        .output(&args.test_out)?
        .write(args.manifest.as_deref(), &args.cal_out)?;
    Ok(Status::Ok)
}
