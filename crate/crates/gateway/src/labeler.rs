use std::str::FromStr;

use pacroute_core::{binary_loss, semantic_loss, AnswerExtractor, CalibrationRecord, ExpertAnswer, ExpertLabel};
use serde::{Deserialize, Serialize};

use crate::client::Client;
use crate::error::{GatewayError, Result};
use crate::transport::Transport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Disagreement on a question with a gold answer.
    Binary,
    /// Cosine distance between answer embeddings.
    Semantic,
}

impl FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "binary" => Ok(Self::Binary),
            "semantic" => Ok(Self::Semantic),
            other => Err(format!("unknown loss kind {other:?} (expected binary or semantic)")),
        }
    }
}

/// Produces expert answers and the loss they assign to a cheap answer.
pub struct Labeler<'a, T> {
    pub thinking: &'a Client<T>,
    pub embedding: Option<&'a Client<T>>,
    pub kind: LossKind,
    pub extractor: AnswerExtractor,
}

impl<T: Transport> Labeler<'_, T> {
    /// The thinking model's final answer; `tokens` includes any reasoning.
    pub fn expert_answer(&self, prompt: &str) -> Result<ExpertAnswer> {
        let c = self.thinking.complete(prompt, false)?;
        Ok(ExpertAnswer {
            text: c.text,
            tokens: c.token_count,
        })
    }

    /// Fails before any expensive call if the loss cannot be computed.
    fn check_inputs(&self, gold: Option<&str>) -> Result<()> {
        match self.kind {
            LossKind::Binary if gold.is_none() => Err(GatewayError::Config("binary loss needs a gold answer".into())),
            LossKind::Semantic if self.embedding.is_none() => {
                Err(GatewayError::Config("semantic loss needs an embedding endpoint".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn loss(&self, cheap: &str, expert: &str, gold: Option<&str>) -> Result<f64> {
        self.check_inputs(gold)?;
        match self.kind {
            LossKind::Binary => {
                let gold = gold.ok_or_else(|| GatewayError::Config("binary loss needs a gold answer".into()))?;
                let c = |s: &str| self.extractor.canonicalize(s);
                Ok(binary_loss(&c(cheap), &c(expert), &c(gold)))
            }
            LossKind::Semantic => {
                let client = self
                    .embedding
                    .ok_or_else(|| GatewayError::Config("semantic loss needs an embedding endpoint".into()))?;
                Ok(semantic_loss(&client.embed(cheap)?, &client.embed(expert)?)?)
            }
        }
    }

    pub fn label(&self, record: &CalibrationRecord) -> Result<ExpertLabel> {
        let prompt = record
            .prompt
            .as_deref()
            .ok_or_else(|| GatewayError::Config(format!("record {} has no prompt", record.id)))?;
        self.check_inputs(record.gold.as_deref())?;
        let expert = self.expert_answer(prompt)?;
        let loss = self.loss(&record.cheap_answer, &expert.text, record.gold.as_deref())?;
        Ok(ExpertLabel {
            answer: expert.text,
            loss,
            tokens: Some(expert.tokens),
        })
    }
}
