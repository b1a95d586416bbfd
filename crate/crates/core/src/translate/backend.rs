//! Text-completion backends.
//!
//! [`MockBackend`] covers every test need without a network: a fixture
//! table, a scripted schedule, seeded Bernoulli success, or an arbitrary pure
//! function of `(prompt, seed)`. [`RemoteBackend`] posts the prompt to a
//! single HTTP endpoint and is only ever constructed explicitly.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("backend timed out after {0:?}")]
    Timeout(Duration),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompletionParams {
    pub temperature: f64,
}

impl Default for CompletionParams {
    fn default() -> Self {
        Self { temperature: 0.0 }
    }
}

pub trait CompletionBackend: Send + Sync {
    fn name(&self) -> &str;

    fn complete(
        &self,
        prompt: &str,
        params: &CompletionParams,
        seed: u64,
    ) -> Result<String, BackendError>;
}

impl<T: CompletionBackend + ?Sized> CompletionBackend for Arc<T> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn complete(&self, prompt: &str, params: &CompletionParams, seed: u64) -> Result<String, BackendError> {
        (**self).complete(prompt, params, seed)
    }
}

/// One scripted response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Reply(String),
    Unavailable,
    Timeout,
}

type ResponderFn = dyn Fn(&str, u64) -> Result<String, BackendError> + Send + Sync;

enum Behavior {
    Table {
        table: BTreeMap<String, String>,
        default: Option<String>,
    },
    /// Steps are consumed in call order; the last one repeats once exhausted.
    Schedule(Vec<Step>),
    Bernoulli {
        probability: f64,
        success: String,
        failure: String,
    },
    Function(Box<ResponderFn>),
}

/// Deterministic stand-in for a model endpoint, with call accounting.
pub struct MockBackend {
    name: String,
    behavior: Behavior,
    cursor: AtomicUsize,
    calls: AtomicUsize,
}

impl fmt::Debug for MockBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MockBackend")
            .field("name", &self.name)
            .field("calls", &self.calls())
            .finish_non_exhaustive()
    }
}

impl MockBackend {
    fn with(name: impl Into<String>, behavior: Behavior) -> Self {
        Self {
            name: name.into(),
            behavior,
            cursor: AtomicUsize::new(0),
            calls: AtomicUsize::new(0),
        }
    }

    /// Exact prompt lookup; `default` answers unknown prompts when set.
    pub fn table(
        name: impl Into<String>,
        table: BTreeMap<String, String>,
        default: Option<String>,
    ) -> Self {
        Self::with(name, Behavior::Table { table, default })
    }

    /// Always answers `reply`.
    pub fn constant(name: impl Into<String>, reply: impl Into<String>) -> Self {
        Self::table(name, BTreeMap::new(), Some(reply.into()))
    }

    pub fn schedule(name: impl Into<String>, steps: Vec<Step>) -> Self {
        assert!(!steps.is_empty(), "a schedule needs at least one step");
        Self::with(name, Behavior::Schedule(steps))
    }

    /// Answers `success` with the given probability, else `failure`; the draw
    /// depends only on the prompt and the seed.
    pub fn bernoulli(
        name: impl Into<String>,
        probability: f64,
        success: impl Into<String>,
        failure: impl Into<String>,
    ) -> Self {
        assert!((0.0..=1.0).contains(&probability), "probability out of range");
        Self::with(
            name,
            Behavior::Bernoulli {
                probability,
                success: success.into(),
                failure: failure.into(),
            },
        )
    }

    pub fn from_fn(
        name: impl Into<String>,
        f: impl Fn(&str, u64) -> Result<String, BackendError> + Send + Sync + 'static,
    ) -> Self {
        Self::with(name, Behavior::Function(Box::new(f)))
    }

    /// Loads a replay table: one JSON object per line with `prompt` and
    /// `completion` string fields.
    pub fn from_replay_file(name: impl Into<String>, path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut table = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let value: serde_json::Value = serde_json::from_str(line)
                .map_err(|e| format!("{}:{}: {e}", path.display(), i + 1))?;
            let field = |k: &str| {
                value
                    .get(k)
                    .and_then(|v| v.as_str())
                    .map(str::to_string)
                    .ok_or_else(|| format!("{}:{}: missing string field {k:?}", path.display(), i + 1))
            };
            table.insert(field("prompt")?, field("completion")?);
        }
        Ok(Self::table(name, table, None))
    }

    /// Number of `complete` calls so far, including failed ones.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::SeqCst);
        self.cursor.store(0, Ordering::SeqCst);
    }
}

/// Uniform draw in `[0, 1)` keyed by prompt and seed.
pub fn seeded_unit(prompt: &str, seed: u64) -> f64 {
    seeded_rng(prompt, seed).random::<f64>()
}

pub fn seeded_rng(prompt: &str, seed: u64) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(prompt.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

impl CompletionBackend for MockBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, prompt: &str, _params: &CompletionParams, seed: u64) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        match &self.behavior {
            Behavior::Table { table, default } => table
                .get(prompt)
                .or(default.as_ref())
                .cloned()
                .ok_or_else(|| BackendError::Unavailable(format!("{}: no fixture for prompt", self.name))),
            Behavior::Schedule(steps) => {
                let i = self.cursor.fetch_add(1, Ordering::SeqCst).min(steps.len() - 1);
                match &steps[i] {
                    Step::Reply(text) => Ok(text.clone()),
                    Step::Unavailable => Err(BackendError::Unavailable(format!("{}: scripted failure", self.name))),
                    Step::Timeout => Err(BackendError::Timeout(Duration::ZERO)),
                }
            }
            Behavior::Bernoulli {
                probability,
                success,
                failure,
            } => Ok(if seeded_unit(prompt, seed) < *probability {
                success.clone()
            } else {
                failure.clone()
            }),
            Behavior::Function(f) => f(prompt, seed),
        }
    }
}

/// Plain-HTTP completion endpoint: the prompt is the request body and the
/// completion is the response body.
pub struct RemoteBackend {
    name: String,
    url: String,
    timeout: Duration,
}

impl RemoteBackend {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        let url = url.into();
        Self {
            name: format!("remote:{url}"),
            url,
            timeout,
        }
    }
}

impl CompletionBackend for RemoteBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, prompt: &str, params: &CompletionParams, seed: u64) -> Result<String, BackendError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .build()
            .into();
        let response = agent
            .post(&self.url)
            .header("x-temperature", params.temperature.to_string())
            .header("x-seed", seed.to_string())
            .send(prompt);
        let map_err = |e: ureq::Error| match e {
            ureq::Error::Timeout(_) => BackendError::Timeout(self.timeout),
            other => BackendError::Unavailable(other.to_string()),
        };
        response
            .map_err(map_err)?
            .body_mut()
            .read_to_string()
            .map_err(map_err)
    }
}
