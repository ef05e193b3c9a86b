use std::io::Write;
use std::path::Path;

use pacroute_core::{CalibrationRecord, RiskBudget, SamplingPlan, ScoreKind};
use pacroute_gateway::{Client, DiskCache, GatewayConfig, Labeler, LossKind};
use serde::Serialize;

use crate::args::{BudgetArgs, Command, ExpertArgs, PlanArgs};
use crate::error::{CliError, Status};

mod calibrate;
mod evaluate;
mod label;
mod route;
mod score;
mod simulate;
mod split;

pub use calibrate::{curve_table, run as calibrate};
pub use evaluate::run as evaluate;
pub use label::run as label;
pub use route::run as route;
pub use score::run as score;
pub use simulate::{default_scenario, run as simulate, DEFAULT_SCENARIO};
pub use split::run as split;

/// Runs one command, writing human-readable output to `out`.
pub fn dispatch(command: &Command, out: &mut dyn Write) -> Result<Status, CliError> {
    match command {
        Command::Score(a) => score(a),
        Command::Split(a) => split(a),
        Command::Calibrate(a) => calibrate(a, out),
        Command::Route(a) => route(a, out),
        Command::Evaluate(a) => evaluate(a, out),
        Command::Label(a) => label(a, out),
        Command::Simulate(a) => simulate(a, out),
    }
}

pub(crate) fn budget(args: &BudgetArgs) -> Result<RiskBudget, CliError> {
    Ok(match args.loss {
        LossKind::Binary => RiskBudget::binary(args.epsilon, args.alpha)?,
        LossKind::Semantic => RiskBudget::semantic(args.epsilon, args.alpha)?,
    })
}

pub(crate) fn sample_size(args: &PlanArgs, n: usize) -> usize {
    args.m.unwrap_or_else(|| (n as f64 / args.pi).ceil() as usize)
}

pub(crate) fn plan(args: &PlanArgs, n: usize) -> Result<SamplingPlan, CliError> {
    if !(args.pi > 0.0 && args.pi <= 1.0) {
        return Err(CliError::msg(format!("--pi {} must lie in (0, 1]", args.pi)));
    }
    Ok(SamplingPlan::constant_with_size(n, args.pi, sample_size(args, n), args.seed)?)
}

pub(crate) fn read_records(path: &Path) -> Result<Vec<CalibrationRecord>, CliError> {
    pacroute_gateway::read_records(path).map_err(|e| CliError::from(e).context(format!("reading {}", path.display())))
}

/// The one score kind shared by all records, if any record declares one.
pub(crate) fn common_score_kind(records: &[CalibrationRecord]) -> Result<Option<ScoreKind>, CliError> {
    let mut kind = None;
    for r in records {
        match (kind, r.score_kind) {
            (_, None) => {}
            (None, Some(k)) => kind = Some(k),
            (Some(a), Some(b)) if a != b => {
                return Err(CliError::msg(format!("record `{}` was scored with {b}, earlier records with {a}", r.id)));
            }
            _ => {}
        }
    }
    Ok(kind)
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    pacroute_gateway::write_atomic(path, text.as_bytes())?;
    Ok(())
}

pub(crate) fn load_config(path: &Path) -> Result<GatewayConfig, CliError> {
    GatewayConfig::load(path).map_err(|e| CliError::from(e).context(format!("loading {}", path.display())))
}

/// Clients for the expert side, opened only when a config is given.
pub(crate) struct Experts {
    thinking: Client,
    embedding: Option<Client>,
    pub max_parallel: usize,
}

impl Experts {
    pub fn open(args: &ExpertArgs) -> Result<Option<Self>, CliError> {
        let Some(path) = &args.config else { return Ok(None) };
        let cfg = load_config(path)?;
        let cache = DiskCache::open(&cfg.cache_dir)?;
        let embedding = match &cfg.embedding {
            Some(e) => Some(Client::connect(e.clone(), Some(cache.clone()))?),
            None => None,
        };
        Ok(Some(Self {
            max_parallel: cfg.thinking.max_parallel,
            thinking: Client::connect(cfg.thinking, Some(cache))?,
            embedding,
        }))
    }

    pub fn labeler(&self, kind: LossKind, args: &ExpertArgs) -> Labeler<'_, pacroute_gateway::HttpTransport> {
        Labeler {
            thinking: &self.thinking,
            embedding: self.embedding.as_ref(),
            kind,
            extractor: args.extractor,
        }
    }
}

pub(crate) fn no_expert(id: &str) -> pacroute_core::OracleError {
    format!("record `{id}` carries no expert label and no endpoint config was given (--config)").into()
}
