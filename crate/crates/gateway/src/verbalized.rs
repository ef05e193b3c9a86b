use pacroute_core::VerbalizedTrials;

use crate::client::Client;
use crate::error::{GatewayError, Result};
use crate::transport::Transport;
use crate::wire::ChatMessage;

/// Number of trials averaged per item in the reference protocol.
pub const DEFAULT_TRIALS: u32 = 10;

pub const VERBALIZED_SYSTEM_PROMPT: &str = "You are a reasoning assistant. For each question and proposed answer, you must estimate how likely the proposed answer is correct.";

pub fn verbalized_user_prompt(question: &str, answer: &str) -> String {
    format!(
        "Question: {question}\nAnswer: {answer}\nProvide a probability (between 0.0 and 1.0) that your answer is correct. Only output the probability."
    )
}

pub fn verbalized_messages(question: &str, answer: &str) -> Vec<ChatMessage> {
    vec![
        ChatMessage::system(VERBALIZED_SYSTEM_PROMPT),
        ChatMessage::user(verbalized_user_prompt(question, answer)),
    ]
}

/// Parses a reply that must consist of a bare decimal in `[0, 1]`.
///
/// The prompt asks for the probability only, so anything else (words,
/// percent signs, exponents, signs) is rejected rather than guessed at.
pub fn parse_confidence(reply: &str) -> Option<f64> {
    let s = reply.trim();
    let digits = s.bytes().filter(u8::is_ascii_digit).count();
    let dots = s.bytes().filter(|&b| b == b'.').count();
    if digits == 0 || dots > 1 || digits + dots != s.len() {
        return None;
    }
    let v: f64 = s.parse().ok()?;
    (0.0..=1.0).contains(&v).then_some(v)
}

/// Trial confidences plus flags for trials that did not yield a number.
#[derive(Debug, Clone, PartialEq)]
pub struct VerbalizedOutcome {
    pub trials: VerbalizedTrials,
    pub flags: Vec<String>,
}

/// Asks the model `n_trials` times how confident it is in `answer`.
///
/// Unparseable replies and failed trials count as confidence 0 and are
/// flagged. If every trial fails the last error is returned.
pub fn verbalized_confidence<T: Transport>(
    client: &Client<T>,
    question: &str,
    answer: &str,
    n_trials: u32,
) -> Result<VerbalizedOutcome> {
    if n_trials == 0 {
        return Err(GatewayError::Config("n_trials must be at least 1".into()));
    }
    let messages = verbalized_messages(question, answer);
    let mut confidences = Vec::with_capacity(n_trials as usize);
    let mut flags = Vec::new();
    let mut failed = 0;
    let mut last_err = None;
    for k in 0..n_trials {
        match client.complete_messages(&messages, false, k) {
            Ok(c) => match parse_confidence(&c.text) {
                Some(v) => confidences.push(v),
                None => {
                    confidences.push(0.0);
                    flags.push(format!("verbalized:unparseable:{k}"));
                }
            },
            Err(e) => {
                confidences.push(0.0);
                flags.push(format!("verbalized:failed:{k}"));
                failed += 1;
                last_err = Some(e);
            }
        }
    }
    if failed == n_trials {
        return Err(last_err.expect("a failed trial left its error"));
    }
    Ok(VerbalizedOutcome {
        trials: VerbalizedTrials::new(confidences)?,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_parser() {
        assert_eq!(parse_confidence("0.9"), Some(0.9));
        assert_eq!(parse_confidence("  1\n"), Some(1.0));
        assert_eq!(parse_confidence(".25"), Some(0.25));
        assert_eq!(parse_confidence("0"), Some(0.0));
        for bad in ["I think 0.8", "0.8.", "80%", "1e-1", "-0.1", "+0.5", "1.5", "", ".", "NaN", "inf", "0,8"] {
            assert_eq!(parse_confidence(bad), None, "{bad:?}");
        }
    }

    #[test]
    fn template_has_the_documented_shape() {
        let m = verbalized_messages("2+2?", "4");
        assert_eq!(m[0].role, "system");
        assert_eq!(m[1].content.lines().collect::<Vec<_>>()[..2], ["Question: 2+2?", "Answer: 4"]);
        assert!(m[1].content.ends_with("Only output the probability."));
    }
}
