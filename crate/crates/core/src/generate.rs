//! Seeded synthetic games.
//!
//! All models share a latent signal `s_t ∈ [0.05, 0.95]`: a slow sinusoid
//! plus AR(1) noise. Under the square loss the outcome is `s_t` itself;
//! under the log loss it is a Bernoulli draw with mean `s_t`.
//!
//! * `noisy-experts`: expert `n` (one-based) reports `s_t` plus Gaussian
//!   noise of standard deviation `noise · n / N`, so expert 1 is the most
//!   accurate.
//! * `drifting-best`: the game is cut into five segments. In each one a
//!   designated expert reports `s_t` with small noise (`0.1 · noise`)
//!   while the others are biased upward by `noise`. Expert 1 is
//!   designated in segments 1, 3 and 5; experts 2 and 3 take segments 2
//!   and 4.
//! * `adversarial-swap`: binary outcomes; experts 1 and 2 alternate being
//!   exactly right in blocks of length `D` and are exactly wrong otherwise.
//!   Any further experts report 1/2.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::GameInput;
use crate::loss::LossSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GameModel {
    #[serde(rename = "noisy-experts")]
    NoisyExperts,
    #[serde(rename = "drifting-best")]
    DriftingBest,
    #[serde(rename = "adversarial-swap")]
    AdversarialSwap,
}

impl GameModel {
    pub fn name(self) -> &'static str {
        match self {
            GameModel::NoisyExperts => "noisy-experts",
            GameModel::DriftingBest => "drifting-best",
            GameModel::AdversarialSwap => "adversarial-swap",
        }
    }
}

impl fmt::Display for GameModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GameModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            GameModel::NoisyExperts,
            GameModel::DriftingBest,
            GameModel::AdversarialSwap,
        ]
        .into_iter()
        .find(|m| m.name() == s)
        .ok_or_else(|| {
            Error::arg(format!(
                "unknown generator `{s}` (expected noisy-experts, drifting-best or adversarial-swap)"
            ))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub model: GameModel,
    pub experts: usize,
    pub steps: usize,
    pub noise: f64,
    pub seed: u64,
    /// Delay of the produced game; also the block length of
    /// `adversarial-swap`.
    pub delay: usize,
}

const SEGMENTS: usize = 5;

fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

fn latent_signal(rng: &mut impl Rng, steps: usize) -> Vec<f64> {
    let phase = rng.random::<f64>() * std::f64::consts::TAU;
    let mut ar = 0.0;
    (0..steps)
        .map(|t| {
            let z: f64 = StandardNormal.sample(rng);
            ar = 0.9 * ar + 0.05 * z;
            let wave = 0.3 * (std::f64::consts::TAU * t as f64 / 64.0 + phase).sin();
            (0.5 + wave + ar).clamp(0.05, 0.95)
        })
        .collect()
}

/// Designated accurate expert for segment `k` of `drifting-best`.
pub fn drifting_leader(segment: usize, experts: usize) -> usize {
    let leader = if segment.is_multiple_of(2) { 0 } else { segment.div_ceil(2) };
    leader % experts
}

pub fn generate_game(spec: &GeneratorSpec, loss: LossSpec) -> Result<GameInput> {
    let GeneratorSpec {
        model,
        experts: n,
        steps,
        noise,
        seed,
        delay,
    } = *spec;
    if n == 0 || steps == 0 || delay == 0 {
        return Err(Error::arg("experts, steps and delay must all be at least 1"));
    }
    if !noise.is_finite() || noise < 0.0 {
        return Err(Error::arg(format!("noise must be a nonnegative number, got {noise}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let (outcomes, forecasts): (Vec<f64>, Vec<Vec<f64>>) = match model {
        GameModel::AdversarialSwap => (0..steps)
            .map(|t| {
                let omega = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
                let first_right = (t / delay) % 2 == 0;
                let row = (0..n)
                    .map(|k| match k {
                        0 if first_right => omega,
                        1 if !first_right => omega,
                        0 | 1 => 1.0 - omega,
                        _ => 0.5,
                    })
                    .collect();
                (omega, row)
            })
            .unzip(),
        GameModel::NoisyExperts | GameModel::DriftingBest => {
            let signal = latent_signal(&mut rng, steps);
            let seg_len = steps.div_ceil(SEGMENTS);
            signal
                .iter()
                .enumerate()
                .map(|(t, &s)| {
                    let omega = if loss.binary_outcomes() {
                        if rng.random_bool(s) { 1.0 } else { 0.0 }
                    } else {
                        s
                    };
                    let leader = drifting_leader(t / seg_len, n);
                    let row = (0..n)
                        .map(|k| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            match model {
                                GameModel::NoisyExperts => {
                                    clamp01(s + noise * (k + 1) as f64 / n as f64 * z)
                                }
                                _ if k == leader => clamp01(s + 0.1 * noise * z),
                                _ => clamp01(s + noise * (1.0 + 0.1 * z)),
                            }
                        })
                        .collect();
                    (omega, row)
                })
                .unzip()
        }
    };
    GameInput::new(outcomes, forecasts, delay, loss)
}
