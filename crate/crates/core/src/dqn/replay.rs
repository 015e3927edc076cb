use rand::Rng;

use crate::env::LegalActions;
use crate::state::StateVector;

pub const DEFAULT_CAPACITY: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: StateVector,
    pub action: usize,
    pub reward: f64,
    /// Next state and its legal actions; `None` when the episode ended.
    pub next: Option<(StateVector, LegalActions)>,
}

impl Transition {
    pub fn is_terminal(&self) -> bool {
        self.next.is_none()
    }
}

/// Fixed-capacity ring buffer; once full, each push evicts the oldest entry.
#[derive(Debug, Clone)]
pub struct ReplayMemory {
    items: Vec<Transition>,
    capacity: usize,
    head: usize,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            items: Vec::with_capacity(capacity.min(1 << 16)),
            capacity,
            head: 0,
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
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

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let (newer, older) = self.items.split_at(self.head);
        older.iter().chain(newer)
    }

    /// `batch` draws, uniform with replacement.
    pub fn sample<'a, R: Rng + ?Sized>(&'a self, batch: usize, rng: &mut R) -> Vec<&'a Transition> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..batch)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect()
    }
}
