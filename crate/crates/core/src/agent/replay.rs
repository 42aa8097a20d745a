use std::collections::VecDeque;

use crate::cartpole::STATE_DIM;
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: [f64; STATE_DIM],
    pub action: usize,
    pub reward: f64,
    pub next_state: [f64; STATE_DIM],
    /// Terminal for bootstrapping: the episode ended by failure. Hitting the
    /// step cap is a time limit, not a terminal state.
    pub done: bool,
    /// Outcome used for the causal-effect estimate; filled at batch time.
    pub outcome_y: Option<f64>,
}

impl Transition {
    pub fn new(
        state: [f64; STATE_DIM],
        action: usize,
        reward: f64,
        next_state: [f64; STATE_DIM],
        done: bool,
    ) -> Self {
        Self {
            state,
            action,
            reward,
            next_state,
            done,
            outcome_y: None,
        }
    }
}

/// Bounded FIFO of transitions sampled uniformly with replacement.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, idx: usize) -> Option<&Transition> {
        self.items.get(idx)
    }

    pub fn sample_indices(&self, rng: &mut Rng, batch_size: usize) -> Vec<usize> {
        assert!(!self.items.is_empty(), "sampling from an empty buffer");
        (0..batch_size)
            .map(|_| rng::below(rng, self.items.len()))
            .collect()
    }

    pub fn sample(&self, rng: &mut Rng, batch_size: usize) -> Vec<Transition> {
        self.sample_indices(rng, batch_size)
            .into_iter()
            .map(|i| self.items[i])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tr(i: usize) -> Transition {
        Transition::new([i as f64, 0.0, 0.0, 0.0], 0, 1.0, [0.0; 4], false)
    }

    #[test]
    fn evicts_oldest_first() {
        let mut buf = ReplayBuffer::new(3);
        for i in 0..5 {
            buf.push(tr(i));
        }
        assert_eq!(buf.len(), 3);
        assert_eq!(buf.get(0).unwrap().state[0], 2.0);
        assert_eq!(buf.get(2).unwrap().state[0], 4.0);
    }

    #[test]
    fn sample_has_requested_size() {
        let mut buf = ReplayBuffer::new(10);
        buf.push(tr(0));
        buf.push(tr(1));
        let mut rng = rng::seeded(0);
        assert_eq!(buf.sample(&mut rng, 64).len(), 64);
    }

    #[test]
    fn sampling_is_uniform() {
        let mut buf = ReplayBuffer::new(100);
        for i in 0..100 {
            buf.push(tr(i));
        }
        let mut rng = rng::seeded(17);
        let n = 100_000;
        let mut counts = [0usize; 100];
        for i in buf.sample_indices(&mut rng, n) {
            counts[i] += 1;
        }
        let expected = n as f64 / 100.0;
        let sd = (n as f64 * 0.01 * 0.99).sqrt();
        for c in counts {
            assert!((c as f64 - expected).abs() < 3.0 * sd + 1.0, "{c}");
        }
    }
}
