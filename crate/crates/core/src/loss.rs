//! Loss functions comparing a candidate answer with the expert's reference.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// 0–1 loss on verifiable tasks.
///
/// The candidate is charged only when the reference (expert) answer is
/// correct and the candidate is not: `1{candidate ≠ gold} · 1{reference = gold}`.
/// All three strings must already be canonical (see [`canonicalize`]).
pub fn binary_loss(candidate: &str, reference: &str, gold: &str) -> f64 {
    if reference == gold && candidate != gold {
        1.0
    } else {
        0.0
    }
}

/// Cosine distance `1 − cos(candidate, reference)`, in `[0, 2]`.
pub fn semantic_loss(candidate: &[f64], reference: &[f64]) -> Result<f64> {
    if candidate.len() != reference.len() {
        return Err(CoreError::ShapeMismatch {
            left: candidate.len(),
            right: reference.len(),
        });
    }
    if candidate.iter().chain(reference).any(|v| !v.is_finite()) {
        return Err(CoreError::InvalidEmbedding("non-finite component"));
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (nc, nr) = (norm(candidate), norm(reference));
    if nc == 0.0 || nr == 0.0 {
        return Err(CoreError::InvalidEmbedding("zero-norm vector"));
    }
    let dot: f64 = candidate.iter().zip(reference).map(|(a, b)| a * b).sum();
    let cos = (dot / (nc * nr)).clamp(-1.0, 1.0);
    Ok(1.0 - cos)
}

/// Trims `text`, applies the task-specific extractor, and trims again.
pub fn canonicalize<F>(text: &str, extract: F) -> String
where
    F: Fn(&str) -> String,
{
    extract(text.trim()).trim().to_string()
}

/// Returns the content of the last `\boxed{...}` in `text`, honoring nested
/// braces. `None` if there is no complete boxed expression.
pub fn extract_boxed(text: &str) -> Option<&str> {
    const MARKER: &str = "\\boxed{";
    let start = text.rfind(MARKER)? + MARKER.len();
    let mut depth = 1usize;
    for (offset, ch) in text[start..].char_indices() {
        match ch {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..start + offset]);
                }
            }
            _ => {}
        }
    }
    None
}

/// Built-in answer extractors selectable from configuration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnswerExtractor {
    #[default]
    Identity,
    /// Last `\boxed{...}` expression; falls back to the whole text.
    Boxed,
}

impl AnswerExtractor {
    pub fn apply(self, text: &str) -> String {
        match self {
            AnswerExtractor::Identity => text.to_string(),
            AnswerExtractor::Boxed => extract_boxed(text).unwrap_or(text).to_string(),
        }
    }

    pub fn canonicalize(self, text: &str) -> String {
        canonicalize(text, |t| self.apply(t))
    }
}

impl std::str::FromStr for AnswerExtractor {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "identity" => Ok(AnswerExtractor::Identity),
            "boxed" => Ok(AnswerExtractor::Boxed),
            other => Err(format!("unknown extractor `{other}`")),
        }
    }
}
