//! Sequence-probability scorers and domain-restricted sampling.
//!
//! A [`Scorer`] assigns a log-score to a candidate phrase given a context
//! phrase. Scores only need to be comparable across candidates that share a
//! context: [`restricted_distribution`] normalizes them over a finite,
//! ordered candidate space with a max-shift softmax, so an unnormalized
//! backend (the tabular mock) and a true language model (the remote
//! backend) are interchangeable.
//!
//! Backends:
//!
//! - [`tabular::TabularScorer`]: exact-match lookup table, used as a test oracle.
//! - [`remote::RemoteScorer`]: HTTP client for a completions endpoint that
//!   echoes per-token log-probabilities.
//! - [`cached::CachedScorer`]: memoizing wrapper around any other backend.
//! - [`UniformTokenScorer`]: every whitespace token has probability `1/V`.

pub mod cached;
pub mod remote;
pub mod tabular;

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

pub use cached::CachedScorer;
pub use remote::{RemoteConfig, RemoteScorer};
pub use tabular::{TabularScoreTable, TabularScorer};

/// Joins a context and a candidate phrase into the scored sequence.
pub const SEPARATOR: &str = " ";

/// Errors raised by scorer backends and by restricted sampling.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScorerError {
    #[error("remote scorer unreachable after {attempts} attempt(s): {message}")]
    Unreachable { attempts: u32, message: String },
    #[error("remote scorer protocol error: {0}")]
    Protocol(String),
    #[error("cannot score an empty sequence")]
    EmptySequence,
    #[error("candidate space is empty")]
    EmptySpace,
    #[error("duplicate candidate {0:?} in space")]
    DuplicateCandidate(String),
    #[error("every candidate has zero weight under context {context:?}")]
    AllZeroWeight { context: String },
    #[error("scorer returned invalid log-score {score} for candidate {candidate:?}")]
    InvalidScore { candidate: String, score: f64 },
    #[error("scorer label must be nonempty")]
    EmptyLabel,
    #[error("invalid score table: {0}")]
    InvalidTable(String),
    #[error("invalid scorer configuration: {0}")]
    Config(String),
}

/// A conditional sequence scorer.
///
/// `log_score(context, candidate)` is the log-weight of `candidate`
/// continuing `context`. Implementations must be callable from many
/// sampling threads at once.
pub trait Scorer: Send + Sync {
    fn log_score(&self, context: &str, candidate: &str) -> Result<f64, ScorerError>;
}

impl<S: Scorer + ?Sized> Scorer for Arc<S> {
    fn log_score(&self, context: &str, candidate: &str) -> Result<f64, ScorerError> {
        (**self).log_score(context, candidate)
    }
}

/// Which family of backend a [`ScorerRef`] points at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    Tabular,
    Remote,
    CachedWrapper,
    /// In-process mocks such as [`UniformTokenScorer`] or closure scorers.
    Custom,
}

/// A labelled, shareable handle to a scorer backend.
#[derive(Clone)]
pub struct ScorerRef {
    label: String,
    kind: BackendKind,
    backend: Arc<dyn Scorer>,
}

impl ScorerRef {
    pub fn new(label: impl Into<String>, kind: BackendKind, backend: Arc<dyn Scorer>) -> Result<Self, ScorerError> {
        let label = label.into();
        if label.trim().is_empty() {
            return Err(ScorerError::EmptyLabel);
        }
        Ok(Self { label, kind, backend })
    }

    pub fn tabular(label: impl Into<String>, table: TabularScoreTable) -> Result<Self, ScorerError> {
        Self::new(label, BackendKind::Tabular, Arc::new(TabularScorer::new(table)))
    }

    pub fn custom(label: impl Into<String>, scorer: impl Scorer + 'static) -> Result<Self, ScorerError> {
        Self::new(label, BackendKind::Custom, Arc::new(scorer))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn kind(&self) -> BackendKind {
        self.kind
    }

    pub fn backend(&self) -> &Arc<dyn Scorer> {
        &self.backend
    }

    /// Log-probability of a whole sequence (scored with an empty context).
    pub fn score(&self, sequence: &str) -> Result<f64, ScorerError> {
        if sequence.is_empty() {
            return Err(ScorerError::EmptySequence);
        }
        self.backend.log_score("", sequence)
    }

    pub fn log_score(&self, context: &str, candidate: &str) -> Result<f64, ScorerError> {
        if context.is_empty() && candidate.is_empty() {
            return Err(ScorerError::EmptySequence);
        }
        self.backend.log_score(context, candidate)
    }

    /// Wraps this scorer in an exact-string memo. The label is kept.
    pub fn cached(&self) -> ScorerRef {
        ScorerRef {
            label: self.label.clone(),
            kind: BackendKind::CachedWrapper,
            backend: Arc::new(CachedScorer::new(self.backend.clone())),
        }
    }
}

impl fmt::Debug for ScorerRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScorerRef").field("label", &self.label).field("kind", &self.kind).finish_non_exhaustive()
    }
}

/// Concatenates phrases with [`SEPARATOR`], skipping empty ones.
pub fn join_phrases<'a>(phrases: impl IntoIterator<Item = &'a str>) -> String {
    let mut out = String::new();
    for phrase in phrases {
        if phrase.is_empty() {
            continue;
        }
        if !out.is_empty() {
            out.push_str(SEPARATOR);
        }
        out.push_str(phrase);
    }
    out
}

/// Every whitespace-delimited token has probability `1 / vocab_size`.
#[derive(Debug, Clone, Copy)]
pub struct UniformTokenScorer {
    vocab_size: usize,
}

impl UniformTokenScorer {
    pub fn new(vocab_size: usize) -> Self {
        assert!(vocab_size > 0, "vocabulary must be nonempty");
        Self { vocab_size }
    }
}

impl Scorer for UniformTokenScorer {
    fn log_score(&self, _context: &str, candidate: &str) -> Result<f64, ScorerError> {
        let tokens = candidate.split_whitespace().count();
        if tokens == 0 {
            return Err(ScorerError::EmptySequence);
        }
        Ok(tokens as f64 * (1.0 / self.vocab_size as f64).ln())
    }
}

/// Scorer backed by a closure; handy for mechanisms defined in code.
pub struct FnScorer<F>(pub F);

impl<F> Scorer for FnScorer<F>
where
    F: Fn(&str, &str) -> f64 + Send + Sync,
{
    fn log_score(&self, context: &str, candidate: &str) -> Result<f64, ScorerError> {
        Ok((self.0)(context, candidate))
    }
}

/// A scorer's distribution restricted to one variable's phrase space.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedDistribution {
    context: String,
    candidates: Arc<[String]>,
    probabilities: Vec<f64>,
}

impl RestrictedDistribution {
    /// Rebuilds a recorded distribution (e.g. one read back from disk).
    pub(crate) fn from_parts(context: String, candidates: Arc<[String]>, probabilities: Vec<f64>) -> Self {
        debug_assert_eq!(candidates.len(), probabilities.len());
        Self { context, candidates, probabilities }
    }

    pub fn context(&self) -> &str {
        &self.context
    }

    pub fn candidates(&self) -> &[String] {
        &self.candidates
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability(&self, index: usize) -> f64 {
        self.probabilities[index]
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn into_probabilities(self) -> Vec<f64> {
        self.probabilities
    }

    /// Draws an index from the distribution.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        draw_index(&self.probabilities, rng)
    }
}

/// Normalizes scorer weights over `space` given `context`.
///
/// `p[k] = exp(s_k - max_j s_j) / sum_j exp(s_j - max_j s_j)` where `s_k` is
/// the log-score of `space[k]` continuing `context`. Candidates scored `-inf`
/// get probability zero.
pub fn restricted_distribution(
    scorer: &ScorerRef,
    context: &str,
    space: &Arc<[String]>,
) -> Result<RestrictedDistribution, ScorerError> {
    if space.is_empty() {
        return Err(ScorerError::EmptySpace);
    }
    let mut seen = HashSet::with_capacity(space.len());
    for candidate in space.iter() {
        if !seen.insert(candidate.as_str()) {
            return Err(ScorerError::DuplicateCandidate(candidate.clone()));
        }
    }

    let mut logs = Vec::with_capacity(space.len());
    for candidate in space.iter() {
        let score = scorer.log_score(context, candidate)?;
        if score.is_nan() || score == f64::INFINITY {
            return Err(ScorerError::InvalidScore { candidate: candidate.clone(), score });
        }
        logs.push(score);
    }
    let probabilities =
        normalize_log_weights(&logs).ok_or_else(|| ScorerError::AllZeroWeight { context: context.to_string() })?;

    Ok(RestrictedDistribution { context: context.to_string(), candidates: space.clone(), probabilities })
}

/// Max-shift softmax. `None` when every entry is `-inf`.
pub fn normalize_log_weights(logs: &[f64]) -> Option<Vec<f64>> {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return None;
    }
    let weights: Vec<f64> = logs.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    Some(weights.into_iter().map(|w| w / total).collect())
}

/// Draws a phrase index from the restricted distribution.
pub fn sample_restricted<R: Rng + ?Sized>(
    scorer: &ScorerRef,
    context: &str,
    space: &Arc<[String]>,
    rng: &mut R,
) -> Result<(usize, RestrictedDistribution), ScorerError> {
    let dist = restricted_distribution(scorer, context, space)?;
    let index = dist.draw(rng);
    Ok((index, dist))
}

/// Inverse-CDF draw from a probability vector; zero-mass entries are never returned.
pub fn draw_index<R: Rng + ?Sized>(probabilities: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    let mut last_positive = 0;
    for (k, &p) in probabilities.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        cumulative += p;
        last_positive = k;
        if u < cumulative {
            return k;
        }
    }
    last_positive
}
