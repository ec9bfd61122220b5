//! Weight-update engines for D-step-ahead aggregation.
//!
//! Every engine answers the same question: given the loss vectors revealed
//! so far, which weight vector is used for the forecast of a time `t`?
//! With delay `D` the answer may only depend on losses up to `t − D`.
//!
//! * [`Algorithm::V1`]: classic exponential weights, `D = 1`.
//! * [`Algorithm::VdReplicated`]: `D` independent copies of V1, one per
//!   residue class of time modulo `D`.
//! * [`Algorithm::VdFc`]: a single exponential-weights learner fed the
//!   most recently revealed losses, so `w_t ∝ e^{-η L_{t−D}}`.
//! * [`Algorithm::GMarkov`]: the posterior `p(n_t | Ξ_{t−D})` under a
//!   first-order Markov prior, computed by a forward filter followed by
//!   `D` transition steps.

mod drift;
mod oracle;
mod weights;

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prior::ExpertPrior;

pub use drift::{boundary_share, drift_argmax_x, drift_bound, drift_objective, eta_star, EtaStar};
pub use oracle::{
    brute_force_posterior, for_each_sequence, FnModel, LogAccumulator, ReplicatedPrior,
    SequenceModel, ENUMERATION_LIMIT,
};
pub use weights::{log_sum_exp, v1_update, WeightVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "g-markov")]
    GMarkov,
    #[serde(rename = "v1")]
    V1,
    #[serde(rename = "vd")]
    VdReplicated,
    #[serde(rename = "vdfc")]
    VdFc,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::V1,
        Algorithm::VdReplicated,
        Algorithm::VdFc,
        Algorithm::GMarkov,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::GMarkov => "g-markov",
            Algorithm::V1 => "v1",
            Algorithm::VdReplicated => "vd",
            Algorithm::VdFc => "vdfc",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                Error::arg(format!(
                    "unknown algorithm `{s}` (expected v1, vd, vdfc or g-markov)"
                ))
            })
    }
}

#[derive(Debug, Clone)]
enum Engine {
    /// V1 and VdFc.
    Single(WeightVector),
    /// One learner per residue class of time modulo `D`.
    Grids(Vec<WeightVector>),
    /// Predictive distribution `p(n_s | Ξ_{s−1})` for the next loss time `s`.
    Markov(WeightVector),
}

/// Online state of one aggregating algorithm.
///
/// After `k` loss vectors have been consumed, the state holds the weight
/// vectors for times `k + 1 ..= k + D`; those forecasts have already been
/// committed and no later loss can change them.
#[derive(Debug, Clone)]
pub struct Aggregator {
    algo: Algorithm,
    delay: usize,
    eta: f64,
    prior: ExpertPrior,
    engine: Engine,
    pending: VecDeque<WeightVector>,
    step: usize,
}

impl Aggregator {
    pub fn new(algo: Algorithm, prior: ExpertPrior, delay: usize, eta: f64) -> Result<Self> {
        if delay == 0 {
            return Err(Error::arg("delay must be at least 1"));
        }
        if !eta.is_finite() || eta <= 0.0 {
            return Err(Error::arg(format!("eta must be positive and finite, got {eta}")));
        }
        if algo == Algorithm::V1 && delay != 1 {
            return Err(Error::arg(format!(
                "v1 is the one-step algorithm; use vd or vdfc for delay {delay}"
            )));
        }
        if algo != Algorithm::GMarkov && !prior.is_identity() {
            return Err(Error::arg(format!(
                "{algo} requires the identity prior; use g-markov for switching priors"
            )));
        }

        let start = WeightVector::from_probs(prior.initial())?;
        let (engine, pending) = match algo {
            Algorithm::V1 | Algorithm::VdFc => (
                Engine::Single(start.clone()),
                vec![start; delay].into(),
            ),
            Algorithm::VdReplicated => (
                Engine::Grids(vec![start.clone(); delay]),
                vec![start; delay].into(),
            ),
            Algorithm::GMarkov => {
                let mut pending = VecDeque::with_capacity(delay);
                let mut marginal = start.clone();
                pending.push_back(marginal.clone());
                for _ in 1..delay {
                    marginal = propagate(&prior, &marginal);
                    pending.push_back(marginal.clone());
                }
                (Engine::Markov(start), pending)
            }
        };
        Ok(Aggregator {
            algo,
            delay,
            eta,
            prior,
            engine,
            pending,
            step: 0,
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algo
    }

    pub fn delay(&self) -> usize {
        self.delay
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn prior(&self) -> &ExpertPrior {
        &self.prior
    }

    pub fn num_experts(&self) -> usize {
        self.prior.num_experts()
    }

    /// Number of loss vectors consumed so far.
    pub fn step(&self) -> usize {
        self.step
    }

    /// Weights for time `step() + 1 + offset`, for `offset < delay()`.
    pub fn pending_weights(&self, offset: usize) -> Option<&WeightVector> {
        self.pending.get(offset)
    }

    /// Weights for the next time whose outcome will be revealed.
    pub fn next_weights(&self) -> &WeightVector {
        &self.pending[0]
    }

    /// Weights most recently committed, for time `step() + delay()`.
    pub fn newest_weights(&self) -> &WeightVector {
        self.pending.back().expect("pending queue holds `delay` entries")
    }

    /// Consumes the loss vector for time `s = step() + 1`, commits the
    /// weights for time `s + D`, and returns the weights that were used
    /// for time `s`.
    pub fn observe(&mut self, losses: &[f64]) -> Result<WeightVector> {
        if losses.len() != self.num_experts() {
            return Err(Error::arg(format!(
                "{} losses for {} experts",
                losses.len(),
                self.num_experts()
            )));
        }
        let s = self.step + 1;
        let eta = self.eta;
        let next = match &mut self.engine {
            Engine::Single(w) => {
                *w = v1_update(w, losses, eta)?;
                w.clone()
            }
            Engine::Grids(grids) => {
                let g = &mut grids[(s - 1) % self.delay];
                *g = v1_update(g, losses, eta)?;
                g.clone()
            }
            Engine::Markov(pred) => {
                let filtered = pred.reweigh(losses, eta)?;
                let mut ahead = propagate(&self.prior, &filtered);
                *pred = ahead.clone();
                for _ in 1..self.delay {
                    ahead = propagate(&self.prior, &ahead);
                }
                ahead
            }
        };
        let used = self.pending.pop_front().expect("pending queue holds `delay` entries");
        self.pending.push_back(next);
        self.step = s;
        Ok(used)
    }

    /// Weights held by replicated grid `g` (zero-based residue of `t − 1`).
    pub fn grid_weights(&self, g: usize) -> Option<&WeightVector> {
        match &self.engine {
            Engine::Grids(grids) => grids.get(g),
            _ => None,
        }
    }
}

/// One transition step in log space:
/// `out[j] = ln Σᵢ exp(w[i] + ln P[i][j])`.
fn propagate(prior: &ExpertPrior, w: &WeightVector) -> WeightVector {
    let n = prior.num_experts();
    let lw = w.log_weights();
    let mut terms = vec![0.0; n];
    let out = (0..n)
        .map(|j| {
            for (i, t) in terms.iter_mut().enumerate() {
                *t = lw[i] + prior.log_transition(i, j);
            }
            log_sum_exp(&terms)
        })
        .collect();
    WeightVector::from_normalized(out)
}
