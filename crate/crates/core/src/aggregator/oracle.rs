//! Exhaustive posterior over active-expert sequences.
//!
//! This is the reference every fast-path update is checked against. It
//! makes no Markov assumption: any distribution over sequences that can
//! report the probability of a prefix works.

use crate::error::{Error, Result};
use crate::prior::ExpertPrior;

use super::weights::WeightVector;

/// Largest number of sequences the oracle will enumerate.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;

/// A distribution over sequences of active experts.
pub trait SequenceModel {
    fn num_experts(&self) -> usize;

    /// `ln p(n₁, …, n_t)`, the marginal probability of a prefix.
    fn prefix_log_prob(&self, prefix: &[usize]) -> f64;
}

impl SequenceModel for ExpertPrior {
    fn num_experts(&self) -> usize {
        ExpertPrior::num_experts(self)
    }

    fn prefix_log_prob(&self, prefix: &[usize]) -> f64 {
        self.sequence_log_prob(prefix)
            .expect("enumerated prefixes are nonempty and in range")
    }
}

/// Independent uniform-start, no-switch chains on each residue class of
/// time modulo `delay`: the model behind the replicated algorithm.
#[derive(Debug, Clone, Copy)]
pub struct ReplicatedPrior {
    pub experts: usize,
    pub delay: usize,
}

impl SequenceModel for ReplicatedPrior {
    fn num_experts(&self) -> usize {
        self.experts
    }

    fn prefix_log_prob(&self, prefix: &[usize]) -> f64 {
        if prefix.iter().enumerate().skip(self.delay).any(|(i, &n)| n != prefix[i - self.delay]) {
            return f64::NEG_INFINITY;
        }
        -(prefix.len().min(self.delay) as f64) * (self.experts as f64).ln()
    }
}

/// Wraps a closure returning prefix log-probabilities.
pub struct FnModel<F> {
    pub experts: usize,
    pub log_prob: F,
}

impl<F: Fn(&[usize]) -> f64> SequenceModel for FnModel<F> {
    fn num_experts(&self) -> usize {
        self.experts
    }

    fn prefix_log_prob(&self, prefix: &[usize]) -> f64 {
        (self.log_prob)(prefix)
    }
}

/// Running `ln Σ exp(xᵢ)`.
#[derive(Debug, Clone, Copy)]
pub struct LogAccumulator {
    max: f64,
    scaled: f64,
}

impl Default for LogAccumulator {
    fn default() -> Self {
        LogAccumulator {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }
}

impl LogAccumulator {
    pub fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max {
            self.scaled = self.scaled * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.scaled += (x - self.max).exp();
        }
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

/// Calls `f` on every sequence in `{0..n}^len`, in lexicographic order.
pub fn for_each_sequence(n: usize, len: usize, mut f: impl FnMut(&[usize])) -> Result<()> {
    let count = (n as u128).checked_pow(len as u32).unwrap_or(u128::MAX);
    if count > ENUMERATION_LIMIT {
        return Err(Error::Capacity {
            count,
            limit: ENUMERATION_LIMIT,
        });
    }
    if n == 0 {
        return Ok(());
    }
    let mut seq = vec![0usize; len];
    loop {
        f(&seq);
        let mut k = len;
        loop {
            if k == 0 {
                return Ok(());
            }
            k -= 1;
            seq[k] += 1;
            if seq[k] < n {
                break;
            }
            seq[k] = 0;
        }
    }
}

/// `p(n_t | Ξ_{t−D})` by enumeration of all prefixes `(n₁ … n_t)`.
///
/// Each prefix carries mass `p(n₁ … n_t) · Π_{τ ≤ t−D} e^{-η loss[τ][n_τ]}`;
/// the result is the normalized marginal of the last coordinate. `t` is
/// one-based and `losses[τ − 1]` is the loss vector of time `τ`.
pub fn brute_force_posterior(
    model: &dyn SequenceModel,
    losses: &[Vec<f64>],
    eta: f64,
    t: usize,
    delay: usize,
) -> Result<WeightVector> {
    let n = model.num_experts();
    if t == 0 || delay == 0 {
        return Err(Error::arg("time and delay are one-based"));
    }
    let conditioned = t.saturating_sub(delay);
    if losses.len() < conditioned {
        return Err(Error::arg(format!(
            "posterior at time {t} with delay {delay} needs {conditioned} loss rows, got {}",
            losses.len()
        )));
    }
    if let Some(row) = losses[..conditioned].iter().find(|r| r.len() != n) {
        return Err(Error::arg(format!("loss row of length {} for {n} experts", row.len())));
    }
    let mut acc = vec![LogAccumulator::default(); n];
    for_each_sequence(n, t, |seq| {
        let mut lw = model.prefix_log_prob(seq);
        if lw == f64::NEG_INFINITY {
            return;
        }
        for (tau, &e) in seq[..conditioned].iter().enumerate() {
            lw -= eta * losses[tau][e];
        }
        acc[seq[t - 1]].add(lw);
    })?;
    WeightVector::from_log_masses(acc.iter().map(LogAccumulator::value).collect())
}
