use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use super::Clock;

/// Sliding-window limiter: no window of length `window` ever contains more
/// than `limit` permits.
pub struct RateLimiter {
    limit: usize,
    window: Duration,
    clock: Arc<dyn Clock>,
    granted: Mutex<VecDeque<Duration>>,
}

impl RateLimiter {
    pub fn new(limit: usize, window: Duration, clock: Arc<dyn Clock>) -> Self {
        RateLimiter {
            limit: limit.max(1),
            window,
            clock,
            granted: Mutex::new(VecDeque::new()),
        }
    }

    pub fn per_minute(limit: u32, clock: Arc<dyn Clock>) -> Self {
        Self::new(limit as usize, Duration::from_secs(60), clock)
    }

    /// Blocks until a permit is available and returns the time it was granted.
    pub fn acquire(&self) -> Duration {
        loop {
            let wait = {
                let mut granted = self.granted.lock().unwrap();
                let now = self.clock.now();
                while granted.front().is_some_and(|t| *t + self.window <= now) {
                    granted.pop_front();
                }
                if granted.len() < self.limit {
                    granted.push_back(now);
                    return now;
                }
                *granted.front().unwrap() + self.window - now
            };
            self.clock.sleep(wait);
        }
    }
}
