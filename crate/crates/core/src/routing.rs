//! Applying a calibrated policy to test items.

use std::collections::{HashMap, HashSet};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::ThresholdPolicy;
use crate::error::{CoreError, OracleError, Result};
use crate::types::{ExpertAnswer, RoutingDecision};

/// A test prompt with its cheap answer already scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestItem {
    pub id: String,
    #[serde(default)]
    pub prompt: String,
    pub cheap_answer: String,
    pub uncertainty: f64,
    pub cheap_tokens: u64,
}

/// An item whose expert call failed. It gets no decision: falling back to
/// the cheap answer would void the risk guarantee.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteFailure {
    pub id: String,
    pub error: String,
}

#[derive(Debug)]
pub struct RouteOutcome {
    /// One entry per input item, in input order.
    pub results: Vec<std::result::Result<RoutingDecision, RouteFailure>>,
}

impl RouteOutcome {
    pub fn decisions(&self) -> impl Iterator<Item = &RoutingDecision> {
        self.results.iter().filter_map(|r| r.as_ref().ok())
    }

    pub fn failures(&self) -> impl Iterator<Item = &RouteFailure> {
        self.results.iter().filter_map(|r| r.as_ref().err())
    }

    pub fn is_complete(&self) -> bool {
        self.results.iter().all(|r| r.is_ok())
    }
}

/// Routes items with bounded expert parallelism, caching expert answers by
/// item id so repeated runs never call the expert twice for the same item.
pub struct Router<E> {
    expert: E,
    max_parallel: usize,
    cache: Mutex<HashMap<String, ExpertAnswer>>,
}

impl<E> Router<E>
where
    E: Fn(&TestItem) -> std::result::Result<ExpertAnswer, OracleError> + Sync,
{
    pub fn new(expert: E, max_parallel: usize) -> Self {
        Self {
            expert,
            max_parallel: max_parallel.max(1),
            cache: Mutex::new(HashMap::new()),
        }
    }

    /// Expert answers fetched so far.
    pub fn cached(&self, id: &str) -> Option<ExpertAnswer> {
        self.cache.lock().expect("cache lock").get(id).cloned()
    }

    pub fn cache_len(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }

    pub fn route(&self, items: &[TestItem], policy: &ThresholdPolicy) -> Result<RouteOutcome> {
        policy.validate()?;
        let mut seen = HashSet::with_capacity(items.len());
        for item in items {
            if !(0.0..=1.0).contains(&item.uncertainty) {
                return Err(CoreError::InvalidRecord {
                    id: item.id.clone(),
                    reason: format!("uncertainty {} outside [0, 1]", item.uncertainty),
                });
            }
            if !seen.insert(item.id.as_str()) {
                return Err(CoreError::DuplicateId(item.id.clone()));
            }
        }

        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.max_parallel)
            .build()
            .map_err(|e| CoreError::InvalidRange(format!("thread pool: {e}")))?;
        let results = pool.install(|| {
            items
                .par_iter()
                .map(|item| self.decide(item, policy))
                .collect()
        });
        Ok(RouteOutcome { results })
    }

    fn decide(
        &self,
        item: &TestItem,
        policy: &ThresholdPolicy,
    ) -> std::result::Result<RoutingDecision, RouteFailure> {
        let used_expert = policy.routes_to_expert(item.uncertainty);
        let final_answer = if used_expert {
            self.expert_answer(item)?.text
        } else {
            item.cheap_answer.clone()
        };
        Ok(RoutingDecision {
            id: item.id.clone(),
            used_expert,
            final_answer,
            uncertainty: item.uncertainty,
            threshold: policy.threshold,
        })
    }

    fn expert_answer(&self, item: &TestItem) -> std::result::Result<ExpertAnswer, RouteFailure> {
        if let Some(hit) = self.cached(&item.id) {
            return Ok(hit);
        }
        let answer = (self.expert)(item).map_err(|e| RouteFailure {
            id: item.id.clone(),
            error: e.to_string(),
        })?;
        self.cache
            .lock()
            .expect("cache lock")
            .insert(item.id.clone(), answer.clone());
        Ok(answer)
    }
}

/// Routes sequentially without keeping the expert cache.
pub fn route<E>(items: &[TestItem], policy: &ThresholdPolicy, expert: E) -> Result<RouteOutcome>
where
    E: Fn(&TestItem) -> std::result::Result<ExpertAnswer, OracleError> + Sync,
{
    Router::new(expert, 1).route(items, policy)
}
