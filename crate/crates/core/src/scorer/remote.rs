//! Remote log-probability scorer.
//!
//! Talks to an OpenAI-style `/v1/completions` endpoint with echo scoring:
//! the prompt is `context + " " + candidate`, `max_tokens` is 0 and `echo`
//! is on, so the server returns the per-token log-probabilities of the
//! prompt itself. The candidate's score is the sum over tokens whose
//! `text_offset` falls inside the candidate (after the context).
//!
//! The first token of a prompt has no conditional log-probability (servers
//! report `null`); it contributes nothing to the sum.

use std::time::Duration;

use parking_lot::{Condvar, Mutex};
use serde::Deserialize;

use super::{join_phrases, Scorer, ScorerError};

pub const URL_ENV: &str = "SEQSCM_SCORER_URL";
pub const TOKEN_ENV: &str = "SEQSCM_SCORER_TOKEN";

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    pub url: String,
    pub model: String,
    pub token: Option<String>,
    pub timeout: Duration,
    /// Extra attempts after the first failed one.
    pub retries: u32,
    pub max_in_flight: usize,
}

impl RemoteConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            model: "default".to_string(),
            token: None,
            timeout: Duration::from_secs(60),
            retries: 3,
            max_in_flight: 8,
        }
    }

    /// Applies `SEQSCM_SCORER_URL` / `SEQSCM_SCORER_TOKEN` when set.
    pub fn with_env_overrides(mut self) -> Self {
        if let Ok(url) = std::env::var(URL_ENV) {
            if !url.is_empty() {
                self.url = url;
            }
        }
        if let Ok(token) = std::env::var(TOKEN_ENV) {
            if !token.is_empty() {
                self.token = Some(token);
            }
        }
        self
    }

    /// Config taken purely from the environment, if a URL is present.
    pub fn from_env() -> Option<Self> {
        let url = std::env::var(URL_ENV).ok().filter(|u| !u.is_empty())?;
        Some(Self::new(url).with_env_overrides())
    }
}

#[derive(Debug, Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    logprobs: Option<Logprobs>,
}

/// The `logprobs` object of a completions choice.
#[derive(Debug, Clone, Deserialize)]
pub struct Logprobs {
    #[serde(default)]
    pub tokens: Vec<String>,
    pub token_logprobs: Vec<Option<f64>>,
    pub text_offset: Option<Vec<usize>>,
}

/// Sums the log-probabilities of tokens starting in `[start, end)`.
///
/// Offsets are in characters of the prompt, as reported by the server.
pub fn continuation_logprob(logprobs: &Logprobs, start: usize, end: usize) -> Result<f64, ScorerError> {
    let n = logprobs.token_logprobs.len();
    let offsets = match &logprobs.text_offset {
        Some(offsets) => offsets.clone(),
        None if start == 0 => (0..n).collect(),
        None => {
            return Err(ScorerError::Protocol(
                "response lacks text_offset; cannot separate context from candidate".into(),
            ))
        }
    };
    if offsets.len() != n {
        return Err(ScorerError::Protocol(format!(
            "text_offset has {} entries but token_logprobs has {n}",
            offsets.len()
        )));
    }
    let mut total = 0.0;
    let mut counted = 0;
    for (offset, lp) in offsets.iter().zip(&logprobs.token_logprobs) {
        if *offset < start || *offset >= end {
            continue;
        }
        if let Some(lp) = lp {
            if !lp.is_finite() && *lp != f64::NEG_INFINITY {
                return Err(ScorerError::Protocol(format!("non-finite token logprob {lp}")));
            }
            total += lp;
            counted += 1;
        }
    }
    if counted == 0 && start > 0 {
        return Err(ScorerError::Protocol("no candidate tokens in response".into()));
    }
    Ok(total)
}

struct Gate {
    cap: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

impl Gate {
    fn acquire(&self) -> GateGuard<'_> {
        let mut n = self.in_flight.lock();
        while *n >= self.cap {
            self.freed.wait(&mut n);
        }
        *n += 1;
        GateGuard { gate: self }
    }
}

struct GateGuard<'a> {
    gate: &'a Gate,
}

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.gate.in_flight.lock() -= 1;
        self.gate.freed.notify_one();
    }
}

enum Attempt {
    Retry(String),
    Fatal(ScorerError),
}

pub struct RemoteScorer {
    config: RemoteConfig,
    agent: ureq::Agent,
    gate: Gate,
}

impl RemoteScorer {
    pub fn new(config: RemoteConfig) -> Result<Self, ScorerError> {
        if config.url.is_empty() {
            return Err(ScorerError::Config("remote scorer needs an endpoint URL".into()));
        }
        if config.max_in_flight == 0 {
            return Err(ScorerError::Config("in-flight cap must be at least 1".into()));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let gate = Gate { cap: config.max_in_flight, in_flight: Mutex::new(0), freed: Condvar::new() };
        Ok(Self { config, agent, gate })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn request_once(&self, prompt: &str) -> Result<Logprobs, Attempt> {
        let body = serde_json::json!({
            "model": self.config.model,
            "prompt": prompt,
            "max_tokens": 0,
            "echo": true,
            "logprobs": 0,
            "temperature": 0.0,
        });
        let mut request = self.agent.post(&self.config.url);
        if let Some(token) = &self.config.token {
            request = request.header("Authorization", &format!("Bearer {token}"));
        }
        let mut response = request.send_json(&body).map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = response.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(Attempt::Retry(format!("HTTP {status}")));
        }
        if status >= 400 {
            let detail = response.body_mut().read_to_string().unwrap_or_default();
            return Err(Attempt::Fatal(ScorerError::Protocol(format!("HTTP {status}: {detail}"))));
        }
        let parsed: CompletionResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| Attempt::Fatal(ScorerError::Protocol(format!("malformed response: {e}"))))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.logprobs)
            .ok_or_else(|| Attempt::Fatal(ScorerError::Protocol("response has no logprobs".into())))
    }
}

impl Scorer for RemoteScorer {
    fn log_score(&self, context: &str, candidate: &str) -> Result<f64, ScorerError> {
        if candidate.is_empty() {
            return Err(ScorerError::EmptySequence);
        }
        let prompt = join_phrases([context, candidate]);
        let start = context.chars().count();
        let end = prompt.chars().count();

        let _slot = self.gate.acquire();
        let attempts = self.config.retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                let backoff = 100u64.saturating_mul(1 << attempt.min(5)).min(2_000);
                std::thread::sleep(Duration::from_millis(backoff));
            }
            match self.request_once(&prompt) {
                Ok(logprobs) => return continuation_logprob(&logprobs, start, end),
                Err(Attempt::Fatal(err)) => return Err(err),
                Err(Attempt::Retry(msg)) => {
                    log::warn!("scorer request failed (attempt {}): {msg}", attempt + 1);
                    last = msg;
                }
            }
        }
        Err(ScorerError::Unreachable { attempts, message: last })
    }
}
