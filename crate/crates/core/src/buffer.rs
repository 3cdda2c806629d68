//! Fitness-bucketed least-recently-used solution buffer.
//!
//! The observed fitness range is split into `m` equal-width buckets, each a
//! FIFO of at most `c` solutions ordered by insertion stamp. Sampling picks a
//! non-empty bucket with weight `exp(coeff * i / (m - 1))` and then a member
//! uniformly, so the chance of running a solution depends on how well it
//! performs rather than on how many similar solutions are stored.

use std::collections::VecDeque;

use rand::Rng;

use crate::error::{Error, Result};
use crate::net::NetParams;

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub params: NetParams,
    /// Average reward per environment step over `lifetime` steps.
    pub fitness: f64,
    pub lifetime: u64,
    /// Insertion order; assigned by the buffer.
    pub stamp: u64,
}

impl Solution {
    pub fn new(params: NetParams, fitness: f64, lifetime: u64) -> Self {
        Self { params, fitness, lifetime, stamp: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMode {
    Exponential,
    /// Always run the best stored solution.
    Greedy,
}

#[derive(Debug, Clone)]
pub struct LruBuffer {
    buckets: Vec<VecDeque<Solution>>,
    capacity: usize,
    range: Option<(f64, f64)>,
    exp_coeff: f64,
    mode: SamplingMode,
    next_stamp: u64,
}

impl LruBuffer {
    pub fn new(num_buckets: usize, capacity: usize, exp_coeff: f64, mode: SamplingMode) -> Result<Self> {
        if num_buckets == 0 || capacity == 0 {
            return Err(Error::Config("bucket count and capacity must be positive".into()));
        }
        if !exp_coeff.is_finite() {
            return Err(Error::Config(format!("exponent coefficient must be finite, got {exp_coeff}")));
        }
        Ok(Self { buckets: vec![VecDeque::new(); num_buckets], capacity, range: None, exp_coeff, mode, next_stamp: 0 })
    }

    pub fn num_buckets(&self) -> usize {
        self.buckets.len()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn mode(&self) -> SamplingMode {
        self.mode
    }

    /// `(min, max)` of all fitness values ever inserted.
    pub fn range(&self) -> Option<(f64, f64)> {
        self.range
    }

    pub fn len(&self) -> usize {
        self.buckets.iter().map(VecDeque::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.iter().all(VecDeque::is_empty)
    }

    pub fn nonempty_buckets(&self) -> usize {
        self.buckets.iter().filter(|b| !b.is_empty()).count()
    }

    pub fn bucket(&self, index: usize) -> &VecDeque<Solution> {
        &self.buckets[index]
    }

    pub fn solutions(&self) -> impl Iterator<Item = &Solution> {
        self.buckets.iter().flatten()
    }

    pub fn bucket_index(&self, fitness: f64) -> usize {
        let (lo, hi) = self.range.unwrap_or((fitness, fitness));
        bucket_index(self.buckets.len(), lo, hi, fitness)
    }

    /// Adds a solution, widening the range (and re-bucketing) if needed and
    /// evicting the oldest member of a full bucket. Returns the stamp.
    pub fn insert(&mut self, mut solution: Solution) -> u64 {
        solution.stamp = self.next_stamp;
        self.next_stamp += 1;
        let f = solution.fitness;
        let widened = match self.range {
            None => {
                self.range = Some((f, f));
                false
            }
            Some((lo, hi)) if f < lo || f > hi => {
                self.range = Some((lo.min(f), hi.max(f)));
                true
            }
            Some(_) => false,
        };
        if widened {
            self.rebucket();
        }
        let stamp = solution.stamp;
        let idx = self.bucket_index(f);
        push_bounded(&mut self.buckets[idx], solution, self.capacity);
        stamp
    }

    /// Reassigns every stored solution to its bucket under the current range,
    /// keeping stamp order and the per-bucket capacity.
    pub fn rebucket(&mut self) {
        let mut all: Vec<Solution> = self.buckets.iter_mut().flat_map(std::mem::take).collect();
        all.sort_by_key(|s| s.stamp);
        for s in all {
            let idx = self.bucket_index(s.fitness);
            push_bounded(&mut self.buckets[idx], s, self.capacity);
        }
    }

    /// Unnormalized selection weight of every bucket; zero for empty ones.
    pub fn bucket_weights(&self) -> Vec<f64> {
        let m = self.buckets.len();
        self.buckets
            .iter()
            .enumerate()
            .map(|(i, b)| if b.is_empty() { 0.0 } else { (self.exp_coeff * bucket_position(i, m)).exp() })
            .collect()
    }

    /// Probability of each bucket being chosen by [`LruBuffer::sample`] in
    /// exponential mode.
    pub fn bucket_probabilities(&self) -> Vec<f64> {
        let m = self.buckets.len();
        let top = self.buckets.iter().rposition(|b| !b.is_empty());
        let Some(top) = top else {
            return vec![0.0; m];
        };
        // Shifted by the top bucket so large coefficients cannot overflow.
        let top_pos = bucket_position(top, m);
        let mut w: Vec<f64> = self
            .buckets
            .iter()
            .enumerate()
            .map(|(i, b)| if b.is_empty() { 0.0 } else { (self.exp_coeff * (bucket_position(i, m) - top_pos)).exp() })
            .collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        w
    }

    /// Highest fitness stored; ties go to the newest.
    pub fn best(&self) -> Option<&Solution> {
        self.solutions().max_by(|a, b| a.fitness.total_cmp(&b.fitness).then(a.stamp.cmp(&b.stamp)))
    }

    /// Picks a solution to run next and returns an independent copy.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Solution> {
        if self.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        match self.mode {
            SamplingMode::Greedy => Ok(self.best().expect("non-empty").clone()),
            SamplingMode::Exponential => {
                let probs = self.bucket_probabilities();
                let mut u: f64 = rng.random();
                let mut chosen = self.buckets.iter().rposition(|b| !b.is_empty()).expect("non-empty");
                for (i, p) in probs.iter().enumerate() {
                    if *p == 0.0 {
                        continue;
                    }
                    u -= p;
                    if u < 0.0 {
                        chosen = i;
                        break;
                    }
                }
                let bucket = &self.buckets[chosen];
                Ok(bucket[rng.random_range(0..bucket.len())].clone())
            }
        }
    }
}

/// Bucket of `fitness` when `m` buckets evenly cover `[lo, hi]`.
pub fn bucket_index(m: usize, lo: f64, hi: f64, fitness: f64) -> usize {
    if hi <= lo {
        return 0;
    }
    let raw = (m as f64 * (fitness - lo) / (hi - lo)).floor();
    if raw <= 0.0 {
        0
    } else {
        (raw as usize).min(m - 1)
    }
}

/// Position of bucket `i` in `[0, 1]`; the single bucket of a one-bucket
/// buffer sits at 0.
fn bucket_position(i: usize, m: usize) -> f64 {
    if m <= 1 {
        0.0
    } else {
        i as f64 / (m - 1) as f64
    }
}

fn push_bounded(bucket: &mut VecDeque<Solution>, solution: Solution, capacity: usize) {
    while bucket.len() >= capacity {
        bucket.pop_front();
    }
    bucket.push_back(solution);
}
