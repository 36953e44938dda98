use std::time::{Duration, Instant};

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("time budget of {limit:?} exhausted")]
pub struct DeadlineExceeded {
    pub limit: Duration,
}

/// Cooperative wall-clock budget. Long-running loops call [`Deadline::check`]
/// at coarse granularity (once per visited block or function).
#[derive(Debug, Clone, Copy)]
pub struct Deadline {
    start: Instant,
    limit: Duration,
}

impl Deadline {
    pub fn after(limit: Duration) -> Self {
        Self {
            start: Instant::now(),
            limit,
        }
    }

    pub fn unbounded() -> Self {
        Self::after(Duration::from_secs(u64::MAX / 4))
    }

    pub fn expired(&self) -> bool {
        self.start.elapsed() >= self.limit
    }

    pub fn check(&self) -> Result<(), DeadlineExceeded> {
        if self.expired() {
            Err(DeadlineExceeded { limit: self.limit })
        } else {
            Ok(())
        }
    }

    pub fn remaining(&self) -> Duration {
        self.limit.saturating_sub(self.start.elapsed())
    }

    pub fn limit(&self) -> Duration {
        self.limit
    }
}
