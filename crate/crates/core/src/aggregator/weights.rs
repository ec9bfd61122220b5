use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `ln Σ exp(xᵢ)` computed around the maximum. Returns `-inf` when every
/// entry is `-inf` (or the slice is empty).
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// Probability vector over experts, stored as log-weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector {
    log_weights: Vec<f64>,
}

impl WeightVector {
    pub fn uniform(n: usize) -> Self {
        WeightVector {
            log_weights: vec![-(n as f64).ln(); n],
        }
    }

    /// Normalizes arbitrary log-masses. Fails if all mass is zero.
    pub fn from_log_masses(mut log_weights: Vec<f64>) -> Result<Self> {
        let z = log_sum_exp(&log_weights);
        if !z.is_finite() {
            return Err(Error::arg("weight vector has no finite mass"));
        }
        log_weights.iter_mut().for_each(|w| *w -= z);
        Ok(WeightVector { log_weights })
    }

    pub fn from_probs(probs: &[f64]) -> Result<Self> {
        if probs.iter().any(|&p| p.is_nan() || p < 0.0) {
            return Err(Error::arg("weights must be nonnegative"));
        }
        Self::from_log_masses(probs.iter().map(|p| p.ln()).collect())
    }

    /// Takes already-normalized log-weights as-is.
    pub(crate) fn from_normalized(log_weights: Vec<f64>) -> Self {
        WeightVector { log_weights }
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_weights.iter().map(|w| w.exp()).collect()
    }

    pub fn prob(&self, n: usize) -> f64 {
        self.log_weights[n].exp()
    }

    /// Aggregated prediction `⟨w, ξ⟩`, clamped to the range of the
    /// forecasts so rounding cannot push it outside their hull.
    pub fn predict(&self, forecasts: &[f64]) -> Result<f64> {
        if forecasts.len() != self.len() {
            return Err(Error::arg(format!(
                "{} forecasts for {} weights",
                forecasts.len(),
                self.len()
            )));
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut acc = 0.0;
        for (w, &x) in self.log_weights.iter().zip(forecasts) {
            lo = lo.min(x);
            hi = hi.max(x);
            acc += w.exp() * x;
        }
        Ok(acc.clamp(lo, hi))
    }

    /// Exponential reweighing: `wₙ ← wₙ e^{-η lₙ}`, renormalized.
    pub fn reweigh(&self, losses: &[f64], eta: f64) -> Result<Self> {
        if losses.len() != self.len() {
            return Err(Error::arg(format!(
                "{} losses for {} weights",
                losses.len(),
                self.len()
            )));
        }
        if let Some(bad) = losses.iter().find(|l| !l.is_finite()) {
            return Err(Error::arg(format!("non-finite loss {bad}")));
        }
        let masses: Vec<f64> = self
            .log_weights
            .iter()
            .zip(losses)
            .map(|(w, l)| w - eta * l)
            .collect();
        Self::from_log_masses(masses)
    }

    /// Mixloss `−(1/η) ln Σ wₙ e^{-η lₙ}`.
    pub fn mixloss(&self, losses: &[f64], eta: f64) -> f64 {
        let terms: Vec<f64> = self
            .log_weights
            .iter()
            .zip(losses)
            .map(|(w, l)| w - eta * l)
            .collect();
        -log_sum_exp(&terms) / eta
    }

    pub fn max_abs_diff(&self, other: &WeightVector) -> f64 {
        self.log_weights
            .iter()
            .zip(&other.log_weights)
            .map(|(a, b)| (a.exp() - b.exp()).abs())
            .fold(0.0, f64::max)
    }
}

/// One step of the classic exponential-weights recursion.
pub fn v1_update(weights: &WeightVector, losses: &[f64], eta: f64) -> Result<WeightVector> {
    weights.reweigh(losses, eta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn log_sum_exp_edges() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[3.0, f64::NEG_INFINITY]), 3.0);
    }

    #[test]
    fn predict_examples() {
        let w = WeightVector::from_probs(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(w.predict(&[0.3, 0.9, 0.1]).unwrap(), 0.3);
        let u = WeightVector::uniform(3);
        assert!((u.predict(&[0.2, 0.4, 0.6]).unwrap() - 0.4).abs() < 1e-15);
        let w = WeightVector::from_probs(&[2.0 / 3.0, 1.0 / 3.0]).unwrap();
        assert!((w.predict(&[0.6, 0.3]).unwrap() - 0.5).abs() < 1e-15);
        assert!(w.predict(&[0.1]).is_err());
    }

    #[test]
    fn predict_stays_in_hull() {
        let w = WeightVector::uniform(7);
        assert_eq!(w.predict(&[1.0; 7]).unwrap(), 1.0);
    }

    #[test]
    fn v1_update_examples() {
        let u = WeightVector::uniform(4);
        let same = v1_update(&u, &[0.3; 4], 1.7).unwrap();
        assert!(close(&same.probs(), &u.probs(), 1e-15));

        let half = WeightVector::uniform(2);
        let w = v1_update(&half, &[0.0, std::f64::consts::LN_2], 1.0).unwrap();
        assert!(close(&w.probs(), &[2.0 / 3.0, 1.0 / 3.0], 1e-15));
    }

    #[test]
    fn repeated_updates_match_closed_form() {
        let eta = 0.7;
        let losses = [
            [0.1, 0.5, 0.9],
            [0.4, 0.2, 0.0],
            [1.0, 0.3, 0.3],
            [0.0, 0.0, 0.8],
        ];
        let mut w = WeightVector::uniform(3);
        let mut cum = [0.0; 3];
        for l in &losses {
            w = v1_update(&w, l, eta).unwrap();
            for n in 0..3 {
                cum[n] += l[n];
            }
        }
        let z: f64 = cum.iter().map(|c| (-eta * c).exp()).sum();
        let expect: Vec<f64> = cum.iter().map(|c| (-eta * c).exp() / z).collect();
        assert!(close(&w.probs(), &expect, 1e-15));
    }

    #[test]
    fn long_games_do_not_underflow() {
        let mut w = WeightVector::uniform(2);
        for _ in 0..100_000 {
            w = v1_update(&w, &[1.0, 1.01], 1.0).unwrap();
        }
        assert!(w.log_weights().iter().all(|x| x.is_finite()));
        assert!((w.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mixloss_of_equal_losses_is_that_loss() {
        let w = WeightVector::from_probs(&[0.2, 0.3, 0.5]).unwrap();
        assert!((w.mixloss(&[0.4; 3], 2.0) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        let u = WeightVector::uniform(2);
        assert!(u.reweigh(&[0.0], 1.0).is_err());
        assert!(u.reweigh(&[0.0, f64::NAN], 1.0).is_err());
        assert!(WeightVector::from_probs(&[0.0, 0.0]).is_err());
    }
}
