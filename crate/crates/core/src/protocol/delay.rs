//! Seeded network delay and approval loss.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayConfig {
    /// Constant latency in seconds.
    #[serde(default)]
    pub fixed: f64,
    /// Extra latency drawn uniformly from `[0, jitter]`.
    #[serde(default)]
    pub jitter: f64,
    /// Probability of dropping an approval frame.
    #[serde(default)]
    pub approval_drop: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for DelayConfig {
    fn default() -> Self {
        Self {
            fixed: 0.0,
            jitter: 0.0,
            approval_drop: 0.0,
            seed: 0,
        }
    }
}

/// One direction of a link. Delivery times never decrease, so order is
/// preserved even with jitter.
#[derive(Debug, Clone)]
pub struct DelayInjector<T> {
    config: DelayConfig,
    rng: ChaCha8Rng,
    queue: VecDeque<(f64, T)>,
    last_delivery: f64,
}

impl<T> DelayInjector<T> {
    pub fn new(config: DelayConfig) -> Self {
        Self {
            config,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            queue: VecDeque::new(),
            last_delivery: f64::NEG_INFINITY,
        }
    }

    pub fn config(&self) -> DelayConfig {
        self.config
    }

    /// Queues `item` sent at `now`. Returns false when it was dropped.
    pub fn send(&mut self, now: f64, item: T, is_approval: bool) -> bool {
        // draw in a fixed order so the schedule only depends on the seed
        let drop_draw: f64 = self.rng.random();
        let jitter_draw: f64 = self.rng.random();
        if is_approval && drop_draw < self.config.approval_drop {
            return false;
        }
        let at = (now + self.config.fixed + self.config.jitter * jitter_draw).max(self.last_delivery);
        self.last_delivery = at;
        self.queue.push_back((at, item));
        true
    }

    /// Items due at or before `now`, in send order.
    pub fn deliver(&mut self, now: f64) -> Vec<T> {
        let mut out = Vec::new();
        while let Some((at, _)) = self.queue.front() {
            if *at > now + 1e-9 {
                break;
            }
            out.push(self.queue.pop_front().unwrap().1);
        }
        out
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Drops everything in flight, as on a broken connection.
    pub fn clear(&mut self) {
        self.queue.clear();
    }
}
