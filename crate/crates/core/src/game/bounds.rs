use crate::aggregator::{for_each_sequence, LogAccumulator, SequenceModel};
use crate::error::{Error, Result};
use crate::prior::ExpertPrior;

use super::GameInput;

/// `−(1/η) ln E_{p(N_T)}[e^{-η L_T^{N_T}}]`, the loss bound of the
/// one-step posterior aggregator, by enumeration of all `N^T` sequences.
pub fn mixture_loss_bound(input: &GameInput, model: &dyn SequenceModel, eta: f64) -> Result<f64> {
    if input.delay() != 1 {
        return Err(Error::arg("the sequence-expectation bound is for delay 1"));
    }
    if model.num_experts() != input.num_experts() {
        return Err(Error::arg("model and game disagree on the number of experts"));
    }
    let losses = input.expert_losses()?;
    let mut acc = LogAccumulator::default();
    for_each_sequence(input.num_experts(), input.len(), |seq| {
        let lp = model.prefix_log_prob(seq);
        if lp == f64::NEG_INFINITY {
            return;
        }
        let l: f64 = seq.iter().zip(&losses).map(|(&n, row)| row[n]).sum();
        acc.add(lp - eta * l);
    })?;
    Ok(-acc.value() / eta)
}

/// Regret bound against a fixed comparator sequence: `−(1/η) ln p(N*_T)`.
/// Infinite when the prior gives the sequence no mass.
pub fn comparator_regret_bound(prior: &ExpertPrior, comparator: &[usize], eta: f64) -> Result<f64> {
    Ok(-prior.sequence_log_prob(comparator)? / eta)
}

/// `ln N / η`.
pub fn v1_regret_bound(experts: usize, eta: f64) -> f64 {
    (experts as f64).ln() / eta
}

/// `D ln N / η`.
pub fn vd_regret_bound(experts: usize, delay: usize, eta: f64) -> f64 {
    delay as f64 * v1_regret_bound(experts, eta)
}
