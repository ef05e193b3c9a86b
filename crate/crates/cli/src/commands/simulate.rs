use std::io::Write;

use pacroute_core::simulation::{coverage_experiment, Scenario};
use pacroute_core::RiskBudget;

use super::write_json;
use crate::args::SimulateArgs;
use crate::error::{CliError, Status};
use crate::manifest::RunManifest;

/// Scenario used when `--scenario` is omitted.
pub const DEFAULT_SCENARIO: &str = include_str!("../../scenarios/default.toml");

pub fn default_scenario() -> Scenario {
    Scenario::from_toml_str(DEFAULT_SCENARIO).expect("bundled scenario is valid")
}

pub fn run(args: &SimulateArgs, out: &mut dyn Write) -> Result<Status, CliError> {
    let mut scenario = match &args.scenario {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::config(anyhow::Error::new(e).context(format!("reading {}", path.display()))))?;
            Scenario::from_toml_str(&text).map_err(|e| CliError::from(e).context(format!("in {}", path.display())))?
        }
        None => default_scenario(),
    };
    if let Some(b) = args.bound {
        scenario.bound = b;
    }
    if let Some(r) = args.reps {
        scenario.reps = r;
    }
    if let Some(s) = args.seed {
        scenario.base_seed = s;
    }
    if let Some(eps) = args.epsilon {
        let b = scenario.budget;
        scenario.budget = RiskBudget::new(eps, b.alpha, b.loss_lower, b.loss_upper)?;
    }
    scenario.validate()?;

    let report = coverage_experiment(&scenario)?;
    out.write_all(report.render_table().as_bytes())?;
    if let Some(path) = &args.output {
        write_json(path, &report)?;
        let mut manifest = RunManifest::new("simulate", args).seed("base", scenario.base_seed);
        if let Some(s) = &args.scenario {
            manifest = manifest.input(s)?;
        }
        manifest.output(path)?.write(args.manifest.as_deref(), path)?;
    }
    Ok(if report.passed() { Status::Ok } else { Status::AssertionFailed })
}
