//! Reduction of a one-step game to a `D`-step game by repeating every
//! step `D` times, and the cumulative-loss identities that link a
//! `D`-step strategy on the repeated game to a one-step strategy on the
//! source.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{argmin, GameInput};

/// Repeats every step of `source` `delay` times; the result is played with
/// delay `delay`.
pub fn replicate_game(source: &GameInput, delay: usize) -> Result<GameInput> {
    if delay == 0 {
        return Err(Error::arg("delay must be at least 1"));
    }
    let repeat = |xs: &[f64]| -> Vec<f64> {
        xs.iter().flat_map(|&x| std::iter::repeat_n(x, delay)).collect()
    };
    let outcomes = repeat(source.outcomes());
    let forecasts = source
        .forecasts()
        .iter()
        .flat_map(|row| std::iter::repeat_n(row.clone(), delay))
        .collect();
    GameInput::new(outcomes, forecasts, delay, *source.loss())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationReport {
    pub delay: usize,
    /// Expected loss of the `D`-step strategy on the repeated game.
    pub repeated_loss: f64,
    /// Expected loss of the derived one-step strategy on the source game.
    pub source_loss: f64,
    /// `|repeated_loss − D · source_loss|`.
    pub loss_gap: f64,
    /// Per expert, `L_T^n(repeated) − D · L^n(source)` summed exactly.
    pub expert_loss_gaps: Vec<f64>,
    pub repeated_regret: f64,
    pub source_regret: f64,
    /// Weights of the derived one-step strategy, one row per source step.
    pub derived_weights: Vec<Vec<f64>>,
}

impl ReplicationReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.expert_loss_gaps.iter().all(|&g| g == 0.0)
            && self.loss_gap <= tol
            && self.repeated_regret >= self.delay as f64 * self.source_regret - tol
    }
}

/// Checks the loss identities between a `D`-step strategy on the repeated
/// game and the one-step strategy obtained by averaging its weights over
/// each block of `D` steps.
///
/// A strategy is given by the mixture weights it places on the experts at
/// every step of the repeated game; its expected loss at a step is
/// `Σₙ wₙ λ(ω, ξⁿ)`.
pub fn verify_replication_identity(
    source: &GameInput,
    weights: &[Vec<f64>],
    delay: usize,
) -> Result<ReplicationReport> {
    let n = source.num_experts();
    let t1 = source.len();
    if delay == 0 {
        return Err(Error::arg("delay must be at least 1"));
    }
    if weights.len() != t1 * delay {
        return Err(Error::arg(format!(
            "{} weight rows for a repeated game of length {}",
            weights.len(),
            t1 * delay
        )));
    }
    if let Some(w) = weights.iter().find(|w| w.len() != n) {
        return Err(Error::arg(format!("weight row of length {} for {n} experts", w.len())));
    }

    let repeated = replicate_game(source, delay)?;
    let rep_losses = repeated.expert_losses()?;
    let src_losses = source.expert_losses()?;

    let repeated_loss: f64 = weights
        .iter()
        .zip(&rep_losses)
        .map(|(w, l)| dot(w, l))
        .sum();

    let derived_weights: Vec<Vec<f64>> = weights
        .chunks(delay)
        .map(|block| {
            let mut avg = vec![0.0; n];
            for w in block {
                avg.iter_mut().zip(w).for_each(|(a, x)| *a += x);
            }
            avg.iter_mut().for_each(|a| *a /= delay as f64);
            avg
        })
        .collect();
    let source_loss: f64 = derived_weights
        .iter()
        .zip(&src_losses)
        .map(|(w, l)| dot(w, l))
        .sum();

    let mut expert_loss_gaps = Vec::with_capacity(n);
    let mut rep_cum = Vec::with_capacity(n);
    let mut src_cum = Vec::with_capacity(n);
    for k in 0..n {
        let rep: Vec<f64> = rep_losses.iter().map(|r| r[k]).collect();
        let src: Vec<f64> = src_losses.iter().map(|r| r[k]).collect();
        let mut terms = rep.clone();
        for &x in &src {
            terms.extend(std::iter::repeat_n(-x, delay));
        }
        expert_loss_gaps.push(exact_sum(&terms));
        rep_cum.push(exact_sum(&rep));
        src_cum.push(exact_sum(&src));
    }

    let d = delay as f64;
    Ok(ReplicationReport {
        delay,
        repeated_loss,
        source_loss,
        loss_gap: (repeated_loss - d * source_loss).abs(),
        expert_loss_gaps,
        repeated_regret: repeated_loss - argmin(&rep_cum).1,
        source_regret: source_loss - argmin(&src_cum).1,
        derived_weights,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Sum with no intermediate rounding (Shewchuk's non-overlapping
/// partials). Exactly zero whenever the true sum is zero.
fn exact_sum(xs: &[f64]) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for &x in xs {
        let mut x = x;
        let mut kept = 0;
        for i in 0..partials.len() {
            let mut y = partials[i];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        partials.truncate(kept);
        partials.push(x);
    }
    partials.iter().rev().fold(0.0, |acc, p| acc + p)
}
