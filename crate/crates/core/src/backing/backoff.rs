use crate::time::SimDuration;

/// Binary exponential backoff: `base * 2^attempt`, capped, reset on success.
#[derive(Clone, Copy, Debug)]
pub struct Backoff {
    base: SimDuration,
    cap: SimDuration,
    attempt: u32,
}

impl Backoff {
    pub fn new(base: SimDuration, cap: SimDuration) -> Self {
        Backoff { base, cap, attempt: 0 }
    }

    /// Delay before the next retry; each call doubles the following one.
    pub fn next_delay(&mut self) -> SimDuration {
        let factor = 1u64.checked_shl(self.attempt).unwrap_or(u64::MAX);
        let delay = self.base.as_millis().saturating_mul(factor).min(self.cap.as_millis());
        self.attempt = self.attempt.saturating_add(1);
        SimDuration::from_millis(delay)
    }

    pub fn reset(&mut self) {
        self.attempt = 0;
    }

    pub fn attempt(&self) -> u32 {
        self.attempt
    }
}
