//! Loss functions on the unit interval and a numerical checker for
//! η-exponential concavity.
//!
//! Outcomes and predictions live in `[0, 1]`. The log loss clips its
//! prediction into `[LOG_LOSS_CLIP, 1 - LOG_LOSS_CLIP]` so that its range
//! and Lipschitz constant stay finite.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Clipping margin applied to log-loss predictions.
pub const LOG_LOSS_CLIP: f64 = 1e-6;

/// Slack allowed when comparing the two sides of the exp-concavity inequality.
pub const CONCAVITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Square,
    Log,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Square => "square",
            LossKind::Log => "log",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(LossKind::Square),
            "log" => Ok(LossKind::Log),
            other => Err(Error::arg(format!(
                "unknown loss `{other}` (expected `square` or `log`)"
            ))),
        }
    }
}

/// Closed real interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const UNIT: Interval = Interval { lo: 0.0, hi: 1.0 };

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }
}

/// A loss function `λ(ω, γ)` together with the constants the regret bounds
/// need: the range bound `H`, the Lipschitz constant `L` in `γ`, the
/// prediction bound `B`, and the largest η at which it is exp-concave.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    pub omega_domain: Interval,
    /// Predictions at which the loss is evaluated without clipping.
    pub gamma_domain: Interval,
    pub range_bound: f64,
    pub lipschitz: f64,
    pub default_eta: f64,
}

impl LossSpec {
    pub fn square() -> Self {
        LossSpec {
            kind: LossKind::Square,
            omega_domain: Interval::UNIT,
            gamma_domain: Interval::UNIT,
            range_bound: 1.0,
            lipschitz: 2.0,
            default_eta: 0.5,
        }
    }

    pub fn log() -> Self {
        LossSpec {
            kind: LossKind::Log,
            omega_domain: Interval::UNIT,
            gamma_domain: Interval {
                lo: LOG_LOSS_CLIP,
                hi: 1.0 - LOG_LOSS_CLIP,
            },
            range_bound: -LOG_LOSS_CLIP.ln(),
            lipschitz: 1.0 / LOG_LOSS_CLIP,
            default_eta: 1.0,
        }
    }

    pub fn from_kind(kind: LossKind) -> Self {
        match kind {
            LossKind::Square => Self::square(),
            LossKind::Log => Self::log(),
        }
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    /// Bound `B` on the norm of a prediction. Predictions are scalars in
    /// `[0, 1]`, so this is the width of the unit interval.
    pub fn prediction_bound(&self) -> f64 {
        Interval::UNIT.width()
    }

    /// Whether outcomes must be exactly 0 or 1.
    pub fn binary_outcomes(&self) -> bool {
        self.kind == LossKind::Log
    }

    pub fn check_outcome(&self, omega: f64) -> Result<()> {
        let ok = match self.kind {
            LossKind::Square => Interval::UNIT.contains(omega),
            LossKind::Log => omega == 0.0 || omega == 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "outcome {omega} outside the domain of the {} loss",
                self.name()
            )))
        }
    }

    pub fn check_prediction(&self, gamma: f64) -> Result<()> {
        if Interval::UNIT.contains(gamma) {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "prediction {gamma} outside [0, 1]"
            )))
        }
    }

    /// Maps an admissible prediction into `gamma_domain`. Identity for the
    /// square loss; the clip for the log loss.
    pub fn project(&self, gamma: f64) -> f64 {
        self.gamma_domain.clamp(gamma)
    }

    pub fn eval(&self, omega: f64, gamma: f64) -> Result<f64> {
        match self.kind {
            LossKind::Square => square_loss(omega, gamma),
            LossKind::Log => log_loss(omega, gamma),
        }
    }
}

pub fn square_loss(omega: f64, gamma: f64) -> Result<f64> {
    if !Interval::UNIT.contains(omega) || !Interval::UNIT.contains(gamma) {
        return Err(Error::domain(format!(
            "square loss needs omega, gamma in [0, 1], got ({omega}, {gamma})"
        )));
    }
    let r = omega - gamma;
    Ok(r * r)
}

pub fn log_loss(omega: f64, gamma: f64) -> Result<f64> {
    if omega != 0.0 && omega != 1.0 {
        return Err(Error::domain(format!(
            "log loss needs omega in {{0, 1}}, got {omega}"
        )));
    }
    if !Interval::UNIT.contains(gamma) {
        return Err(Error::domain(format!(
            "log loss needs gamma in [0, 1], got {gamma}"
        )));
    }
    let g = gamma.clamp(LOG_LOSS_CLIP, 1.0 - LOG_LOSS_CLIP);
    if omega == 1.0 {
        Ok(-g.ln())
    } else {
        Ok(-(1.0 - g).ln())
    }
}

/// One instance of the exp-concavity inequality: an outcome and a finite
/// distribution over predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcavitySample {
    pub omega: f64,
    pub support: Vec<f64>,
    pub probs: Vec<f64>,
}

impl ConcavitySample {
    /// `Σ πᵢ e^{-ηλ(ω, γᵢ)} − e^{-ηλ(ω, Σ πᵢ γᵢ)}`. Positive means the
    /// inequality is violated.
    pub fn gap(&self, loss: &LossSpec, eta: f64) -> Result<f64> {
        let mean = loss
            .gamma_domain
            .clamp(self.support.iter().zip(&self.probs).map(|(g, p)| g * p).sum());
        let lhs = (-eta * loss.eval(self.omega, mean)?).exp();
        let mut rhs = 0.0;
        for (g, p) in self.support.iter().zip(&self.probs) {
            rhs += p * (-eta * loss.eval(self.omega, *g)?).exp();
        }
        Ok(rhs - lhs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcavityReport {
    pub passed: bool,
    pub trials: usize,
    /// Largest gap observed; at most `CONCAVITY_TOL` when `passed`.
    pub worst_gap: f64,
    pub counterexample: Option<ConcavitySample>,
}

/// Draws `trials` random instances of the inequality for `loss`.
/// Supports have between 2 and 8 points inside `gamma_domain`.
pub fn draw_concavity_samples(loss: &LossSpec, trials: usize, seed: u64) -> Vec<ConcavitySample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials).map(|_| random_sample(loss, &mut rng)).collect()
}

fn random_sample(loss: &LossSpec, rng: &mut impl Rng) -> ConcavitySample {
    let omega = if loss.binary_outcomes() {
        if rng.random_bool(0.5) { 1.0 } else { 0.0 }
    } else {
        rng.random_range(loss.omega_domain.lo..=loss.omega_domain.hi)
    };
    let k = rng.random_range(2..=8);
    let dom = loss.gamma_domain;
    let support: Vec<f64> = (0..k).map(|_| rng.random_range(dom.lo..=dom.hi)).collect();
    let mut probs: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    ConcavitySample {
        omega,
        support,
        probs,
    }
}

/// Evaluates `samples` at `eta` and reports the first violation.
pub fn check_concavity_samples(
    loss: &LossSpec,
    eta: f64,
    samples: &[ConcavitySample],
) -> Result<ConcavityReport> {
    let mut worst = f64::NEG_INFINITY;
    for s in samples {
        let gap = s.gap(loss, eta)?;
        worst = worst.max(gap);
        if gap > CONCAVITY_TOL {
            return Ok(ConcavityReport {
                passed: false,
                trials: samples.len(),
                worst_gap: gap,
                counterexample: Some(s.clone()),
            });
        }
    }
    Ok(ConcavityReport {
        passed: true,
        trials: samples.len(),
        worst_gap: worst,
        counterexample: None,
    })
}

/// Searches for a violation of η-exponential concavity.
///
/// Monte Carlo first; if nothing violates, the worst sample is refined by
/// coordinate perturbation (outcome, support points, and mixing weight
/// shifts) before declaring a pass.
pub fn check_exp_concavity(
    loss: &LossSpec,
    eta: f64,
    trials: usize,
    seed: u64,
) -> Result<ConcavityReport> {
    if trials == 0 {
        return Err(Error::arg("trials must be at least 1"));
    }
    if eta.is_nan() || eta <= 0.0 {
        return Err(Error::arg(format!("eta must be positive, got {eta}")));
    }
    let samples = draw_concavity_samples(loss, trials, seed);
    let mut report = check_concavity_samples(loss, eta, &samples)?;
    if !report.passed {
        return Ok(report);
    }

    let mut best = samples[0].clone();
    let mut best_gap = f64::NEG_INFINITY;
    for s in &samples {
        let g = s.gap(loss, eta)?;
        if g > best_gap {
            best_gap = g;
            best = s.clone();
        }
    }
    let (refined, gap) = refine(loss, eta, best, best_gap)?;
    report.worst_gap = report.worst_gap.max(gap);
    if gap > CONCAVITY_TOL {
        report.passed = false;
        report.counterexample = Some(refined);
    }
    Ok(report)
}

fn refine(
    loss: &LossSpec,
    eta: f64,
    mut sample: ConcavitySample,
    mut gap: f64,
) -> Result<(ConcavitySample, f64)> {
    let dom = loss.gamma_domain;
    let mut step = 0.25 * dom.width();
    while step > 1e-9 {
        let mut improved = false;
        let mut candidates = Vec::new();
        if !loss.binary_outcomes() {
            for d in [-step, step] {
                let mut c = sample.clone();
                c.omega = loss.omega_domain.clamp(c.omega + d);
                candidates.push(c);
            }
        }
        for i in 0..sample.support.len() {
            for d in [-step, step] {
                let mut c = sample.clone();
                c.support[i] = dom.clamp(c.support[i] + d);
                candidates.push(c);
            }
            for j in 0..sample.probs.len() {
                if i == j {
                    continue;
                }
                let shift = (step * sample.probs[i]).min(sample.probs[i]);
                let mut c = sample.clone();
                c.probs[i] -= shift;
                c.probs[j] += shift;
                candidates.push(c);
            }
        }
        for c in candidates {
            let g = c.gap(loss, eta)?;
            if g > gap {
                gap = g;
                sample = c;
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok((sample, gap))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_loss_examples() {
        assert_eq!(square_loss(0.5, 0.5).unwrap(), 0.0);
        assert_eq!(square_loss(1.0, 0.0).unwrap(), 1.0);
        assert!((square_loss(0.2, 0.7).unwrap() - 0.25).abs() < 1e-15);
        assert!(square_loss(1.5, 0.5).is_err());
        assert!(square_loss(0.5, -0.1).is_err());
    }

    #[test]
    fn log_loss_examples() {
        let ln2 = std::f64::consts::LN_2;
        assert!((log_loss(1.0, 0.5).unwrap() - ln2).abs() < 1e-15);
        assert!((log_loss(0.0, 0.5).unwrap() - ln2).abs() < 1e-15);
        let edge = 1.0 - LOG_LOSS_CLIP;
        assert_eq!(log_loss(1.0, edge).unwrap(), -edge.ln());
        assert_eq!(log_loss(1.0, 1.0).unwrap(), -edge.ln());
        assert_eq!(log_loss(1.0, 0.0).unwrap(), LossSpec::log().range_bound);
        assert!(log_loss(0.5, 0.5).is_err());
    }

    #[test]
    fn loss_names_round_trip() {
        for kind in [LossKind::Square, LossKind::Log] {
            assert_eq!(kind.name().parse::<LossKind>().unwrap(), kind);
        }
        assert!("hinge".parse::<LossKind>().is_err());
    }

    #[test]
    fn explicit_square_violation_at_eta_two() {
        let s = ConcavitySample {
            omega: 0.0,
            support: vec![0.6, 1.0],
            probs: vec![0.5, 0.5],
        };
        // e^{-2*0.64} vs (e^{-2*0.36} + e^{-2}) / 2
        let lhs = (-1.28f64).exp();
        let rhs = ((-0.72f64).exp() + (-2.0f64).exp()) / 2.0;
        assert!(rhs > lhs);
        let gap = s.gap(&LossSpec::square(), 2.0).unwrap();
        assert!((gap - (rhs - lhs)).abs() < 1e-15);
        assert!(s.gap(&LossSpec::square(), 0.5).unwrap() <= 0.0);
    }

    #[test]
    fn square_threshold() {
        let sq = LossSpec::square();
        assert!(check_exp_concavity(&sq, 0.5, 20_000, 7).unwrap().passed);
        let r = check_exp_concavity(&sq, 2.0, 1_000, 7).unwrap();
        assert!(!r.passed);
        let cx = r.counterexample.unwrap();
        assert!(cx.gap(&sq, 2.0).unwrap() > CONCAVITY_TOL);
    }

    #[test]
    fn log_loss_is_one_exp_concave() {
        assert!(check_exp_concavity(&LossSpec::log(), 1.0, 20_000, 3).unwrap().passed);
    }

    #[test]
    fn refinement_finds_narrow_violation() {
        for eta in [0.6, 0.75, 1.0, 1.5] {
            for seed in 0..5 {
                let r = check_exp_concavity(&LossSpec::square(), eta, 20, seed).unwrap();
                eprintln!("{eta} {seed} {} {}", r.passed, r.worst_gap);
            }
        }
    }

    #[test]
    fn zero_trials_rejected() {
        assert!(check_exp_concavity(&LossSpec::square(), 0.5, 0, 0).is_err());
    }

    #[test]
    fn monotone_eta_closure_on_recorded_samples() {
        for loss in [LossSpec::square(), LossSpec::log()] {
            let samples = draw_concavity_samples(&loss, 5_000, 99);
            let eta = loss.default_eta;
            assert!(check_concavity_samples(&loss, eta, &samples).unwrap().passed);
            assert!(check_concavity_samples(&loss, eta / 2.0, &samples).unwrap().passed);
        }
    }

    #[test]
    fn lipschitz_and_range_by_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for loss in [LossSpec::square(), LossSpec::log()] {
            for _ in 0..10_000 {
                let omega = if loss.binary_outcomes() {
                    f64::from(rng.random_bool(0.5) as u8)
                } else {
                    rng.random::<f64>()
                };
                let g1 = rng.random_range(loss.gamma_domain.lo..=loss.gamma_domain.hi);
                let g2 = rng.random_range(loss.gamma_domain.lo..=loss.gamma_domain.hi);
                let a = loss.eval(omega, g1).unwrap();
                let b = loss.eval(omega, g2).unwrap();
                assert!((0.0..=loss.range_bound + 1e-12).contains(&a));
                assert!((a - b).abs() <= loss.lipschitz * (g1 - g2).abs() + 1e-12);
            }
        }
    }

    #[test]
    fn convex_combinations_stay_in_domain() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for loss in [LossSpec::square(), LossSpec::log()] {
            for s in draw_concavity_samples(&loss, 1_000, rng.random()) {
                let mean: f64 = s.support.iter().zip(&s.probs).map(|(g, p)| g * p).sum();
                assert!(mean >= loss.gamma_domain.lo - 1e-15);
                assert!(mean <= loss.gamma_domain.hi + 1e-15);
            }
        }
    }
}
