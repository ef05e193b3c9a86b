use pacroute_core::{logits_uncertainty, verbalized_uncertainty, CalibrationRecord, ScoreKind, TokenProbs};

use crate::client::{parallel_map, Client};
use crate::dataset::InputRecord;
use crate::error::{GatewayError, Result};
use crate::transport::Transport;
use crate::verbalized::verbalized_confidence;

/// Answers `input` with the nonthinking model and scores the answer.
pub fn score_input<T: Transport>(
    client: &Client<T>,
    input: &InputRecord,
    kind: ScoreKind,
    n_trials: u32,
) -> Result<CalibrationRecord> {
    let want_logprobs = kind == ScoreKind::Logits;
    let answer = client.complete(&input.prompt, want_logprobs)?;
    let mut flags = vec![answer.token_source.flag().to_string()];
    let uncertainty = match kind {
        ScoreKind::Logits => {
            let probs = answer
                .probabilities()
                .ok_or_else(|| GatewayError::Capability("no log-probabilities returned".into()))?;
            logits_uncertainty(&TokenProbs::new(probs)?)
        }
        ScoreKind::Verbalized => {
            let outcome = verbalized_confidence(client, &input.prompt, &answer.text, n_trials)?;
            flags.extend(outcome.flags);
            verbalized_uncertainty(&outcome.trials)
        }
    };
    let mut record = CalibrationRecord::unlabeled(input.id.clone(), uncertainty, answer.text, answer.token_count);
    record.prompt = Some(input.prompt.clone());
    record.gold = input.gold.clone();
    record.score_kind = Some(kind);
    record.flags = flags;
    Ok(record)
}

/// Scores every input with at most `max_parallel` items in flight.
pub fn score_all<T: Transport>(
    client: &Client<T>,
    inputs: &[InputRecord],
    kind: ScoreKind,
    n_trials: u32,
) -> Vec<Result<CalibrationRecord>> {
    parallel_map(inputs, client.config().max_parallel, |input| {
        score_input(client, input, kind, n_trials)
    })
}
