//! The delayed-feedback forecasting game and its accounting.
//!
//! At step `t` the outcome `ω_t` is revealed, the forecasts made for `t`
//! (committed at step `t − D`) are charged, the weights are updated, and a
//! forecast for `t + D` is committed. Forecasts for `1..=D` are made from
//! the prior before the game starts.

mod bounds;
mod replication;

use serde::{Deserialize, Serialize};

use crate::aggregator::{Aggregator, WeightVector};
use crate::error::{Error, Result};
use crate::loss::{LossKind, LossSpec};

pub use bounds::{comparator_regret_bound, mixture_loss_bound, v1_regret_bound, vd_regret_bound};
pub use replication::{replicate_game, verify_replication_identity, ReplicationReport};

/// Outcomes plus expert forecasts for a whole game.
#[derive(Debug, Clone, PartialEq)]
pub struct GameInput {
    outcomes: Vec<f64>,
    /// `forecasts[t][n]`, zero-based time.
    forecasts: Vec<Vec<f64>>,
    delay: usize,
    loss: LossSpec,
}

impl GameInput {
    pub fn new(
        outcomes: Vec<f64>,
        forecasts: Vec<Vec<f64>>,
        delay: usize,
        loss: LossSpec,
    ) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::arg("game needs at least one step"));
        }
        if forecasts.len() != outcomes.len() {
            return Err(Error::arg(format!(
                "{} forecast rows for {} outcomes",
                forecasts.len(),
                outcomes.len()
            )));
        }
        let n = forecasts[0].len();
        if n == 0 {
            return Err(Error::arg("game needs at least one expert"));
        }
        if delay == 0 {
            return Err(Error::arg("delay must be at least 1"));
        }
        for (t, (omega, row)) in outcomes.iter().zip(&forecasts).enumerate() {
            if row.len() != n {
                return Err(Error::arg(format!(
                    "step {}: {} forecasts, expected {n}",
                    t + 1,
                    row.len()
                )));
            }
            loss.check_outcome(*omega)
                .map_err(|e| Error::domain(format!("step {}: {e}", t + 1)))?;
            for (k, &x) in row.iter().enumerate() {
                loss.check_prediction(x).map_err(|e| {
                    Error::domain(format!("step {}, expert {}: {e}", t + 1, k + 1))
                })?;
            }
        }
        Ok(GameInput {
            outcomes,
            forecasts,
            delay,
            loss,
        })
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn num_experts(&self) -> usize {
        self.forecasts[0].len()
    }

    pub fn delay(&self) -> usize {
        self.delay
    }

    pub fn loss(&self) -> &LossSpec {
        &self.loss
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn forecasts(&self) -> &[Vec<f64>] {
        &self.forecasts
    }

    /// Same data played with a different delay.
    pub fn with_delay(mut self, delay: usize) -> Result<Self> {
        if delay == 0 {
            return Err(Error::arg("delay must be at least 1"));
        }
        self.delay = delay;
        Ok(self)
    }

    /// Forecasts of time `t` (zero-based) mapped into the loss's
    /// prediction domain.
    fn projected(&self, t: usize) -> Vec<f64> {
        self.forecasts[t].iter().map(|&x| self.loss.project(x)).collect()
    }

    /// Per-step, per-expert losses `l[t][n]`.
    pub fn expert_losses(&self) -> Result<Vec<Vec<f64>>> {
        (0..self.len())
            .map(|t| {
                self.projected(t)
                    .iter()
                    .map(|&x| self.loss.eval(self.outcomes[t], x))
                    .collect()
            })
            .collect()
    }

    /// `L_T^n` for every expert.
    pub fn cumulative_expert_losses(&self) -> Result<Vec<f64>> {
        let mut cum = vec![0.0; self.num_experts()];
        for row in self.expert_losses()? {
            cum.iter_mut().zip(&row).for_each(|(c, l)| *c += l);
        }
        Ok(cum)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub algo: String,
    pub experts: usize,
    pub steps: usize,
    pub delay: usize,
    pub eta: f64,
    pub loss: String,
    pub prior: String,
}

/// Everything that happened in one game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameTrace {
    pub meta: TraceMeta,
    /// Aggregated forecast `γ_t`.
    pub gamma: Vec<f64>,
    /// Algorithm loss `h_t`.
    pub h: Vec<f64>,
    /// Mixloss `m_t`.
    pub m: Vec<f64>,
    /// `l_t^n`.
    pub expert_losses: Vec<Vec<f64>>,
    /// `R_t = H_t − min_n L_t^n`.
    pub regret_curve: Vec<f64>,
    /// `L_T^n`.
    pub cumulative_expert_losses: Vec<f64>,
    pub total_loss: f64,
    pub total_mixloss: f64,
    /// Zero-based; ties go to the lowest index.
    pub best_expert: usize,
    pub best_loss: f64,
    pub regret: f64,
    /// Weights used for each step, if recorded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<Vec<f64>>>,
}

impl GameTrace {
    /// Largest `h_t − m_t` over the game.
    pub fn max_mix_excess(&self) -> f64 {
        self.h
            .iter()
            .zip(&self.m)
            .map(|(h, m)| h - m)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub(crate) fn argmin(xs: &[f64]) -> (usize, f64) {
    xs.iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, x)| if x < best.1 { (i, x) } else { best })
}

/// Loss of the forecast `gamma = Σ w ξ`. Under the log loss with `ω = 0`
/// the complement `1 − γ` is re-formed as `Σ w (1 − ξ)`; subtracting a
/// forecast close to 1 would otherwise lose most of its digits.
fn mixture_loss(loss: &LossSpec, omega: f64, gamma: f64, w: &WeightVector, xi: &[f64]) -> Result<f64> {
    if loss.kind == LossKind::Log && omega == 0.0 {
        let complement: Vec<f64> = xi.iter().map(|x| 1.0 - x).collect();
        return loss.eval(1.0, w.predict(&complement)?);
    }
    loss.eval(omega, gamma)
}

/// Plays `input` with `state`, which must be freshly constructed.
pub fn run_game(input: &GameInput, state: &mut Aggregator, record_weights: bool) -> Result<GameTrace> {
    let n = input.num_experts();
    let steps = input.len();
    let d = input.delay();
    if state.delay() != d {
        return Err(Error::arg(format!(
            "aggregator delay {} does not match game delay {d}",
            state.delay()
        )));
    }
    if state.num_experts() != n {
        return Err(Error::arg(format!(
            "aggregator has {} experts, game has {n}",
            state.num_experts()
        )));
    }
    if state.step() != 0 {
        return Err(Error::arg("aggregator has already been used"));
    }
    let loss = *input.loss();
    let eta = state.eta();

    let mut gamma = vec![f64::NAN; steps];
    for (t, g) in gamma.iter_mut().enumerate().take(d) {
        let w = state.pending_weights(t).expect("t < delay");
        *g = w.predict(&input.projected(t))?;
    }

    let mut h = Vec::with_capacity(steps);
    let mut m = Vec::with_capacity(steps);
    let mut expert_losses = Vec::with_capacity(steps);
    let mut regret_curve = Vec::with_capacity(steps);
    let mut weights = record_weights.then(|| Vec::with_capacity(steps));
    let mut cum = vec![0.0; n];
    let mut total = 0.0;
    let mut total_mix = 0.0;

    for t in 0..steps {
        let omega = input.outcomes[t];
        let xi = input.projected(t);
        let l: Vec<f64> = xi.iter().map(|&x| loss.eval(omega, x)).collect::<Result<_>>()?;
        let used = state.observe(&l)?;
        let ht = mixture_loss(&loss, omega, gamma[t], &used, &xi)?;
        let mt = used.mixloss(&l, eta);
        if let Some(ws) = weights.as_mut() {
            ws.push(used.probs());
        }
        if t + d < steps {
            gamma[t + d] = state.newest_weights().predict(&input.projected(t + d))?;
        }

        total += ht;
        total_mix += mt;
        cum.iter_mut().zip(&l).for_each(|(c, x)| *c += x);
        regret_curve.push(total - argmin(&cum).1);
        h.push(ht);
        m.push(mt);
        expert_losses.push(l);
    }

    let (best_expert, best_loss) = argmin(&cum);
    Ok(GameTrace {
        meta: TraceMeta {
            algo: state.algorithm().to_string(),
            experts: n,
            steps,
            delay: d,
            eta,
            loss: loss.name().to_string(),
            prior: state.prior().label(),
        },
        gamma,
        h,
        m,
        expert_losses,
        regret_curve,
        cumulative_expert_losses: cum,
        total_loss: total,
        total_mixloss: total_mix,
        best_expert,
        best_loss,
        regret: total - best_loss,
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregator::Algorithm;
    use crate::prior::ExpertPrior;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_game(rng: &mut impl Rng, t: usize, n: usize, d: usize) -> GameInput {
        let outcomes = (0..t).map(|_| rng.random::<f64>()).collect();
        let forecasts = (0..t)
            .map(|_| (0..n).map(|_| rng.random::<f64>()).collect())
            .collect();
        GameInput::new(outcomes, forecasts, d, LossSpec::square()).unwrap()
    }

    fn agg(algo: Algorithm, n: usize, d: usize, eta: f64) -> Aggregator {
        Aggregator::new(algo, ExpertPrior::identity(n).unwrap(), d, eta).unwrap()
    }

    #[test]
    fn single_expert_has_zero_regret() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for d in 1..4 {
            let g = random_game(&mut rng, 20, 1, d);
            let algo = if d == 1 { Algorithm::V1 } else { Algorithm::VdFc };
            let tr = run_game(&g, &mut agg(algo, 1, d, 0.5), false).unwrap();
            for t in 0..20 {
                assert_eq!(tr.gamma[t], g.forecasts()[t][0]);
            }
            assert_eq!(tr.regret, 0.0);
        }
    }

    #[test]
    fn identical_experts_have_zero_regret() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let base = random_game(&mut rng, 30, 1, 2);
        let forecasts = base.forecasts().iter().map(|r| vec![r[0]; 4]).collect();
        let g = GameInput::new(base.outcomes().to_vec(), forecasts, 2, LossSpec::square()).unwrap();
        let tr = run_game(&g, &mut agg(Algorithm::VdReplicated, 4, 2, 0.5), false).unwrap();
        for t in 0..30 {
            assert_eq!(tr.h[t], tr.expert_losses[t][0]);
        }
        assert_eq!(tr.regret, 0.0);
    }

    #[test]
    fn perfect_expert_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 6;
        let mut g = random_game(&mut rng, 200, n, 1);
        let outcomes = g.outcomes().to_vec();
        let forecasts = g
            .forecasts()
            .iter()
            .zip(&outcomes)
            .map(|(r, &o)| {
                let mut r = r.clone();
                r[3] = o;
                r
            })
            .collect();
        g = GameInput::new(outcomes, forecasts, 1, LossSpec::square()).unwrap();
        let tr = run_game(&g, &mut agg(Algorithm::V1, n, 1, 0.5), false).unwrap();
        assert_eq!(tr.best_expert, 3);
        assert!(tr.regret <= v1_regret_bound(n, 0.5) + 1e-9);
    }

    #[test]
    fn loss_is_dominated_by_mixloss() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for algo in Algorithm::ALL {
            for d in 1..4 {
                if algo == Algorithm::V1 && d > 1 {
                    continue;
                }
                let g = random_game(&mut rng, 100, 5, d);
                let tr = run_game(&g, &mut agg(algo, 5, d, 0.5), false).unwrap();
                assert!(tr.max_mix_excess() <= 1e-12);
            }
        }
    }

    #[test]
    fn trace_bookkeeping() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = random_game(&mut rng, 40, 3, 2);
        let tr = run_game(&g, &mut agg(Algorithm::VdFc, 3, 2, 0.5), true).unwrap();
        assert_eq!(tr.total_loss, tr.h.iter().sum::<f64>());
        let cum = g.cumulative_expert_losses().unwrap();
        assert_eq!(cum, tr.cumulative_expert_losses);
        let (_, best) = argmin(&cum);
        assert_eq!(tr.regret, tr.total_loss - best);
        assert_eq!(*tr.regret_curve.last().unwrap(), tr.regret);
        let ws = tr.weights.as_ref().unwrap();
        assert_eq!(ws.len(), 40);
        // first D steps use the prior
        assert_eq!(ws[0], vec![1.0 / 3.0; 3]);
        assert_eq!(ws[1], vec![1.0 / 3.0; 3]);
        for t in 0..40 {
            let p: f64 = ws[t].iter().zip(&g.forecasts()[t]).map(|(w, x)| w * x).sum();
            assert!((p - tr.gamma[t]).abs() < 1e-15);
        }
    }

    #[test]
    fn deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = random_game(&mut rng, 50, 4, 3);
        let a = run_game(&g, &mut agg(Algorithm::VdReplicated, 4, 3, 0.4), true).unwrap();
        let b = run_game(&g, &mut agg(Algorithm::VdReplicated, 4, 3, 0.4), true).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn game_shorter_than_delay() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = random_game(&mut rng, 2, 3, 5);
        let tr = run_game(&g, &mut agg(Algorithm::VdFc, 3, 5, 0.5), false).unwrap();
        assert_eq!(tr.h.len(), 2);
    }

    #[test]
    fn mismatched_state_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = random_game(&mut rng, 10, 3, 2);
        assert!(run_game(&g, &mut agg(Algorithm::VdFc, 3, 1, 0.5), false).is_err());
        assert!(run_game(&g, &mut agg(Algorithm::VdFc, 2, 2, 0.5), false).is_err());
        let mut used = agg(Algorithm::VdFc, 3, 2, 0.5);
        run_game(&g, &mut used, false).unwrap();
        assert!(run_game(&g, &mut used, false).is_err());
    }

    #[test]
    fn input_validation() {
        let sq = LossSpec::square();
        assert!(GameInput::new(vec![], vec![], 1, sq).is_err());
        assert!(GameInput::new(vec![1.5], vec![vec![0.5]], 1, sq).is_err());
        assert!(GameInput::new(vec![0.5], vec![vec![-0.5]], 1, sq).is_err());
        assert!(GameInput::new(vec![0.5, 0.5], vec![vec![0.5], vec![0.5, 0.1]], 1, sq).is_err());
        assert!(GameInput::new(vec![0.5], vec![vec![0.5]], 0, sq).is_err());
        assert!(GameInput::new(vec![0.5], vec![vec![0.5]], 1, LossSpec::log()).is_err());
        assert!(GameInput::new(vec![1.0], vec![vec![0.0]], 1, LossSpec::log()).is_ok());
    }

    #[test]
    fn log_loss_projects_forecasts() {
        let g = GameInput::new(vec![1.0, 0.0], vec![vec![0.0, 1.0], vec![0.0, 1.0]], 1, LossSpec::log())
            .unwrap();
        let tr = run_game(&g, &mut agg(Algorithm::V1, 2, 1, 1.0), false).unwrap();
        assert!(tr.h.iter().all(|h| h.is_finite()));
        assert!(tr.max_mix_excess() <= 1e-12);
    }
}
