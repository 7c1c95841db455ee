use rand::Rng;

use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition<S, R = f64> {
    pub s: S,
    pub a: usize,
    pub r: R,
    pub s_next: S,
    /// Set only on the last step of an episode.
    pub terminal: bool,
}

/// Fixed-capacity ring of transitions, sampled uniformly with replacement.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<X> {
    capacity: usize,
    items: Vec<X>,
    next: usize,
    rng: SimRng,
}

impl<X> ReplayBuffer<X> {
    pub fn new(capacity: usize, rng: SimRng) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { capacity, items: Vec::new(), next: 0, rng }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Store `x`, overwriting the oldest item once full.
    pub fn push(&mut self, x: X) {
        if self.items.len() < self.capacity {
            self.items.push(x);
        } else {
            self.items[self.next] = x;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn clear(&mut self) {
        self.items.clear();
        self.next = 0;
    }

    pub fn sample_indices(&mut self, n: usize) -> Vec<usize> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..n).map(|_| self.rng.gen_range(0..self.items.len())).collect()
    }

    pub fn sample(&mut self, n: usize) -> Vec<&X> {
        let idx = self.sample_indices(n);
        idx.into_iter().map(|i| &self.items[i]).collect()
    }

    pub fn get(&self, i: usize) -> Option<&X> {
        self.items.get(i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn ring_overwrites_oldest() {
        let mut buf = ReplayBuffer::new(3, stream_rng(0, "r", 0));
        for i in 0..5 {
            buf.push(i);
        }
        assert_eq!(buf.len(), 3);
        let mut all: Vec<i32> = (0..3).map(|i| *buf.get(i).unwrap()).collect();
        all.sort();
        assert_eq!(all, vec![2, 3, 4]);
    }
}
