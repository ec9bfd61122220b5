//! How far `D − 1` unseen losses can move a single weight, and the
//! learning rate that balances that drift against the `ln N / η` term.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::LossSpec;

/// Upper bound on `|w¹ₜ − wᴰₜ|` for one coordinate:
/// `(1 − √q)² / (1 − q)` with `q = e^{-η(D−1)H}`.
///
/// Evaluated as `(1 − √q) / (1 + √q)`, the same quantity after cancelling
/// one factor of `1 − √q`, which has the limit 0 at `η = 0` or `D = 1`
/// built in.
pub fn drift_bound(eta: f64, delay: usize, range_bound: f64) -> f64 {
    let x = eta * delay.saturating_sub(1) as f64 * range_bound;
    let one_minus_root = -(-x / 2.0).exp_m1();
    one_minus_root / (2.0 - one_minus_root)
}

/// Share `a = q / ((N − 1) + q)` that the extremal loss configuration
/// leaves on the tracked expert.
pub fn boundary_share(eta: f64, delay: usize, range_bound: f64, experts: usize) -> f64 {
    let q = (-eta * delay.saturating_sub(1) as f64 * range_bound).exp();
    q / ((experts as f64 - 1.0) + q)
}

/// `x − xa / (xa + (1 − x)(1 − a)/(N − 1))`.
pub fn drift_objective(x: f64, a: f64, experts: usize) -> f64 {
    let rest = (1.0 - x) * (1.0 - a) / (experts as f64 - 1.0);
    x - x * a / (x * a + rest)
}

/// Maximizer of [`drift_objective`] over `x ∈ (0, 1)`.
pub fn drift_argmax_x(a: f64, experts: usize) -> Result<f64> {
    if experts < 2 {
        return Err(Error::arg("drift extremum needs at least two experts"));
    }
    let nf = experts as f64;
    if !(a > 0.0 && a < 1.0 / nf) {
        return Err(Error::arg(format!("share must lie in (0, 1/N) = (0, {}), got {a}", 1.0 / nf)));
    }
    Ok((1.0 - a - (a * (1.0 - a) * (nf - 1.0)).sqrt()) / (1.0 - a * nf))
}

/// Tuned learning rate for the fully-connected delayed algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaStar {
    /// Rate to use: the unclamped optimum capped at the loss's
    /// exp-concavity level.
    pub eta: f64,
    /// `√(ln N / (F N T))`; infinite when `F = 0`.
    pub unclamped: f64,
    /// `U(D, H) = (1 + ε)(D − 1)H / 4`.
    pub drift_slope: f64,
    /// `F = B · L · U`.
    pub drift_constant: f64,
    /// `ln N / η + F N T η` at the returned `eta`. Equals
    /// `2√(F N ln N)·√T` whenever the clamp is inactive.
    pub bound: f64,
}

pub fn eta_star(
    experts: usize,
    horizon: usize,
    loss: &LossSpec,
    delay: usize,
    epsilon_frac: f64,
) -> Result<EtaStar> {
    if experts < 2 {
        return Err(Error::arg("tuned learning rate needs at least two experts"));
    }
    if horizon == 0 || delay == 0 {
        return Err(Error::arg("horizon and delay must be at least 1"));
    }
    if epsilon_frac.is_nan() || epsilon_frac < 0.0 {
        return Err(Error::arg(format!("epsilon fraction must be nonnegative, got {epsilon_frac}")));
    }
    let ln_n = (experts as f64).ln();
    let nt = experts as f64 * horizon as f64;
    let drift_slope = (1.0 + epsilon_frac) * (delay - 1) as f64 * loss.range_bound / 4.0;
    let drift_constant = loss.prediction_bound() * loss.lipschitz * drift_slope;
    let unclamped = if drift_constant > 0.0 {
        (ln_n / (drift_constant * nt)).sqrt()
    } else {
        f64::INFINITY
    };
    let eta = unclamped.min(loss.default_eta);
    Ok(EtaStar {
        eta,
        unclamped,
        drift_slope,
        drift_constant,
        bound: ln_n / eta + drift_constant * nt * eta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The expression exactly as written, for comparison.
    fn drift_bound_direct(eta: f64, delay: usize, h: f64) -> f64 {
        let q = (-eta * (delay as f64 - 1.0) * h).exp();
        (1.0 - q.sqrt()).powi(2) / (1.0 - q)
    }

    #[test]
    fn drift_bound_examples() {
        assert_eq!(drift_bound(0.0, 5, 1.0), 0.0);
        assert_eq!(drift_bound(0.7, 1, 3.0), 0.0);
        assert!(drift_bound(1e-12, 5, 1.0) < 1e-11);
        // q = 1/4
        let eta = 4f64.ln() / 2.0;
        assert!((drift_bound(eta, 3, 1.0) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn drift_bound_matches_written_form() {
        for &(eta, d, h) in &[(0.1, 2, 1.0), (0.5, 7, 1.0), (0.01, 4, 13.8), (2.0, 3, 0.3)] {
            let a = drift_bound(eta, d, h);
            let b = drift_bound_direct(eta, d, h);
            assert!((a - b).abs() < 1e-13, "{a} vs {b}");
        }
    }

    #[test]
    fn argmax_examples() {
        let x = drift_argmax_x(0.2, 2).unwrap();
        assert!((x - 2.0 / 3.0).abs() < 1e-15);
        assert!((drift_objective(x, 0.2, 2) - 1.0 / 3.0).abs() < 1e-15);
        assert!(drift_argmax_x(0.5, 2).is_err());
        assert!(drift_argmax_x(0.0, 2).is_err());
        assert!(drift_argmax_x(0.1, 1).is_err());

        let near = 0.5 - 1e-9;
        let x = drift_argmax_x(near, 2).unwrap();
        assert!(drift_objective(x, near, 2) < 1e-8);
    }

    #[test]
    fn extremum_value_is_expert_count_free() {
        let q: f64 = 0.25;
        for n in 2..12 {
            let a = q / ((n as f64 - 1.0) + q);
            let x = drift_argmax_x(a, n).unwrap();
            assert!((drift_objective(x, a, n) - 1.0 / 3.0).abs() < 1e-12, "N = {n}");
        }
    }

    #[test]
    fn eta_star_examples() {
        let sq = LossSpec::square();
        let e = eta_star(5, 1000, &sq, 1, 0.1).unwrap();
        assert_eq!(e.eta, sq.default_eta);
        assert_eq!(e.drift_constant, 0.0);
        assert!((e.bound - 5f64.ln() / sq.default_eta).abs() < 1e-15);

        let a = eta_star(10, 10_000, &sq, 7, 0.1).unwrap();
        let b = eta_star(10, 20_000, &sq, 7, 0.1).unwrap();
        assert!((a.unclamped / b.unclamped - 2f64.sqrt()).abs() < 1e-12);

        let f = 1.0 * 2.0 * (1.1 * 6.0 / 4.0);
        let expect = (10f64.ln() / (f * 10.0 * 1e4)).sqrt();
        assert!((a.drift_constant - f).abs() < 1e-15);
        assert!((a.eta - expect).abs() < 1e-15);
        let bound = 2.0 * (f * 10.0 * 10f64.ln()).sqrt() * 100.0;
        assert!((a.bound - bound).abs() < 1e-9 * bound);
    }

    #[test]
    fn eta_star_clamps_to_loss_level() {
        let sq = LossSpec::square();
        let e = eta_star(2, 1, &sq, 2, 0.0).unwrap();
        assert!(e.unclamped > sq.default_eta);
        assert_eq!(e.eta, sq.default_eta);
        assert!(eta_star(1, 10, &sq, 2, 0.1).is_err());
        assert!(eta_star(3, 0, &sq, 2, 0.1).is_err());
    }
}
