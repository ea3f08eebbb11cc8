use ndarray::Array2;
use rand::Rng;

use crate::critic::CriticBatch;
use crate::envs::Done;
use crate::error::{FpmdError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: Done,
}

/// Fixed-capacity ring buffer; once full, the oldest transition is
/// overwritten first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    slots: Vec<Transition>,
    capacity: usize,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(FpmdError::InvalidArgument("replay capacity must be >= 1".into()));
        }
        Ok(ReplayBuffer {
            slots: Vec::new(),
            capacity,
            cursor: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, transition: Transition) -> Result<()> {
        let finite = transition.state.iter().all(|x| x.is_finite())
            && transition.action.iter().all(|x| x.is_finite())
            && transition.next_state.iter().all(|x| x.is_finite())
            && transition.reward.is_finite();
        if !finite {
            return Err(FpmdError::NonFinite("transition".into()));
        }
        if self.slots.len() < self.capacity {
            self.slots.push(transition);
        } else {
            self.slots[self.cursor] = transition;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        Ok(())
    }

    pub fn get(&self, index: usize) -> Option<&Transition> {
        self.slots.get(index)
    }

    /// Uniform indices over the filled slots, with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.slots.is_empty() {
            return Err(FpmdError::InvalidArgument("sampling from an empty buffer".into()));
        }
        Ok((0..n).map(|_| rng.random_range(0..self.slots.len())).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<CriticBatch<f32>> {
        let idx = self.sample_indices(n, rng)?;
        let first = &self.slots[0];
        let (sd, ad) = (first.state.len(), first.action.len());
        let gather = |f: &dyn Fn(&Transition) -> &[f64], dim: usize| {
            Array2::from_shape_fn((n, dim), |(i, j)| f(&self.slots[idx[i]])[j] as f32)
        };
        Ok(CriticBatch {
            states: gather(&|t| &t.state, sd),
            actions: gather(&|t| &t.action, ad),
            rewards: idx.iter().map(|&i| self.slots[i].reward as f32).collect(),
            next_states: gather(&|t| &t.next_state, sd),
            terminated: idx
                .iter()
                .map(|&i| self.slots[i].done == Done::Terminated)
                .collect(),
        })
    }
}
