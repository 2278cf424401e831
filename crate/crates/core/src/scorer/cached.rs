//! Memoizing scorer wrapper.

use std::collections::HashMap;
use std::sync::Arc;

use parking_lot::RwLock;

use super::{Scorer, ScorerError};

/// Exact-string memo over `(context, candidate)` pairs.
///
/// Scores are deterministic, so concurrent inserts of the same key are
/// harmless (last write wins). Errors are not cached.
pub struct CachedScorer {
    inner: Arc<dyn Scorer>,
    memo: RwLock<HashMap<String, HashMap<String, f64>>>,
}

impl CachedScorer {
    pub fn new(inner: Arc<dyn Scorer>) -> Self {
        Self { inner, memo: RwLock::new(HashMap::new()) }
    }

    pub fn len(&self) -> usize {
        self.memo.read().values().map(HashMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Scorer for CachedScorer {
    fn log_score(&self, context: &str, candidate: &str) -> Result<f64, ScorerError> {
        if let Some(&hit) = self.memo.read().get(context).and_then(|row| row.get(candidate)) {
            return Ok(hit);
        }
        let score = self.inner.log_score(context, candidate)?;
        self.memo.write().entry(context.to_string()).or_default().insert(candidate.to_string(), score);
        Ok(score)
    }
}
