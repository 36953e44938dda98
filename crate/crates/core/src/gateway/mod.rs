//! The only place that talks to a language model.
//!
//! A [`Gateway`] wraps a [`CompletionProvider`] and a [`Transcript`]. In
//! replay mode no provider exists at all, so a prompt that was never
//! recorded fails with [`GatewayError::ReplayMiss`] instead of reaching the
//! network.

pub mod provider;
pub mod template;
pub mod transcript;

use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

pub use provider::{CompletionProvider, HttpProvider, HttpProviderConfig, ProviderError};
pub use template::{render_prompt, PromptTemplate, TemplateId};
pub use transcript::{digest, Transcript, TranscriptEntry};

use transcript::ReplayIndex;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;
pub const MAX_RETRIES: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("no binding for placeholder [{0}]")]
    MissingBinding(String),
    #[error("provider timed out")]
    ProviderTimeout,
    #[error("provider error (status {status}): {body}")]
    ProviderError { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("prompt {0} is not in the transcript")]
    ReplayMiss(String),
}

impl From<ProviderError> for GatewayError {
    fn from(e: ProviderError) -> Self {
        match e {
            ProviderError::Timeout => GatewayError::ProviderTimeout,
            ProviderError::Transport(m) => GatewayError::Transport(m),
            ProviderError::Status { status, body } => GatewayError::ProviderError { status, body },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GatewayMode {
    Live,
    Record,
    Replay,
}

struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Semaphore);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

pub struct Gateway {
    mode: GatewayMode,
    provider: Option<Box<dyn CompletionProvider>>,
    transcript: Mutex<Transcript>,
    replay: Mutex<ReplayIndex>,
    record_path: Option<PathBuf>,
    in_flight: Semaphore,
    timeout: Duration,
    calls: Mutex<usize>,
}

impl Gateway {
    fn build(
        mode: GatewayMode,
        provider: Option<Box<dyn CompletionProvider>>,
        transcript: Transcript,
        record_path: Option<PathBuf>,
    ) -> Self {
        Self {
            mode,
            provider,
            replay: Mutex::new(ReplayIndex::build(&transcript)),
            transcript: Mutex::new(transcript),
            record_path,
            in_flight: Semaphore::new(DEFAULT_MAX_IN_FLIGHT),
            timeout: DEFAULT_TIMEOUT,
            calls: Mutex::new(0),
        }
    }

    pub fn live(provider: impl CompletionProvider + 'static) -> Self {
        Self::build(GatewayMode::Live, Some(Box::new(provider)), Transcript::new(), None)
    }

    /// Live calls whose exchanges are appended to a transcript. When `path`
    /// is given the transcript is written there by [`Gateway::save`].
    pub fn record(provider: impl CompletionProvider + 'static, path: Option<PathBuf>) -> Self {
        Self::build(GatewayMode::Record, Some(Box::new(provider)), Transcript::new(), path)
    }

    pub fn replay(transcript: Transcript) -> Self {
        Self::build(GatewayMode::Replay, None, transcript, None)
    }

    pub fn replay_file(path: &Path) -> std::io::Result<Self> {
        Ok(Self::replay(Transcript::load(path)?))
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.in_flight = Semaphore::new(n);
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn mode(&self) -> GatewayMode {
        self.mode
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    /// Number of `complete` calls answered so far (replayed or live).
    pub fn calls(&self) -> usize {
        *self.calls.lock().unwrap()
    }

    pub fn transcript(&self) -> Transcript {
        self.transcript.lock().unwrap().clone()
    }

    pub fn save(&self) -> std::io::Result<()> {
        match &self.record_path {
            Some(p) if self.mode == GatewayMode::Record => self.transcript().save(p),
            _ => Ok(()),
        }
    }

    pub fn complete(&self, prompt: &str) -> Result<String, GatewayError> {
        self.complete_with_timeout(prompt, self.timeout)
    }

    pub fn complete_with_timeout(&self, prompt: &str, timeout: Duration) -> Result<String, GatewayError> {
        let out = match self.mode {
            GatewayMode::Replay => self.replayed(prompt),
            GatewayMode::Live | GatewayMode::Record => self.live_call(prompt, timeout),
        };
        if out.is_ok() {
            *self.calls.lock().unwrap() += 1;
        }
        out
    }

    fn replayed(&self, prompt: &str) -> Result<String, GatewayError> {
        let d = digest(prompt);
        let idx = self
            .replay
            .lock()
            .unwrap()
            .next(&d)
            .ok_or_else(|| GatewayError::ReplayMiss(d.clone()))?;
        Ok(self.transcript.lock().unwrap().entries[idx].response.clone())
    }

    fn live_call(&self, prompt: &str, timeout: Duration) -> Result<String, GatewayError> {
        let provider = self
            .provider
            .as_ref()
            .ok_or_else(|| GatewayError::Transport("no provider configured".into()))?;
        let _permit = self.in_flight.acquire();
        let started = Instant::now();
        let mut attempt = 0;
        let response = loop {
            match provider.complete(prompt, timeout) {
                Ok(r) => break r,
                Err(e) if e.is_retryable() && attempt < MAX_RETRIES => {
                    attempt += 1;
                    log::warn!("provider transport error, retry {attempt}: {e}");
                }
                Err(e) => return Err(e.into()),
            }
        };
        if self.mode == GatewayMode::Record {
            let mut entry = TranscriptEntry::new(prompt, response.clone());
            entry.latency_ms = started.elapsed().as_millis() as u64;
            self.transcript.lock().unwrap().entries.push(entry);
        }
        Ok(response)
    }
}
