use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// Default spacing between notifications from one camera: three minutes.
pub const DEFAULT_NOTIFY_INTERVAL_MS: u64 = 180_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThrottleDecision {
    Dispatch,
    Suppress,
}

/// Per-camera rate limit. The first event from a camera always goes out;
/// later ones only once `interval_ms` has passed since the last dispatch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Throttle {
    interval_ms: u64,
    last_dispatch: HashMap<String, u64>,
}

impl Default for Throttle {
    fn default() -> Self {
        Self::new(DEFAULT_NOTIFY_INTERVAL_MS)
    }
}

impl Throttle {
    pub fn new(interval_ms: u64) -> Self {
        Self {
            interval_ms,
            last_dispatch: HashMap::new(),
        }
    }

    pub fn interval_ms(&self) -> u64 {
        self.interval_ms
    }

    pub fn last_dispatch(&self, camera: &str) -> Option<u64> {
        self.last_dispatch.get(camera).copied()
    }

    /// Decide for an event at `now_ms` and record dispatches.
    ///
    /// A clock that runs backwards for a camera suppresses until it catches
    /// up again.
    pub fn check(&mut self, camera: &str, now_ms: u64) -> ThrottleDecision {
        match self.last_dispatch.get(camera) {
            Some(&last) if now_ms < last.saturating_add(self.interval_ms) => ThrottleDecision::Suppress,
            _ => {
                self.last_dispatch.insert(camera.to_string(), now_ms);
                ThrottleDecision::Dispatch
            }
        }
    }
}
