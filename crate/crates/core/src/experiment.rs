//! Run configurations and parameter sweeps.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aggregator::{eta_star, Aggregator, Algorithm};
use crate::error::{Error, Result};
use crate::game::{run_game, v1_regret_bound, vd_regret_bound, GameInput, GameTrace};
use crate::generate::{generate_game, GameModel, GeneratorSpec};
use crate::io::parse_game_file;
use crate::loss::{LossKind, LossSpec};
use crate::prior::{ExpertPrior, PriorSpec};

/// Slack `ε` in the drift slope used by the automatic learning rate.
pub const DEFAULT_EPSILON_FRAC: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EtaPolicy {
    Fixed(f64),
    /// The tuned rate for `vdfc`; the loss's default rate for the others.
    Auto,
}

impl fmt::Display for EtaPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EtaPolicy::Fixed(x) => write!(f, "{x}"),
            EtaPolicy::Auto => f.write_str("auto"),
        }
    }
}

impl FromStr for EtaPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(EtaPolicy::Auto);
        }
        let x: f64 = s
            .parse()
            .map_err(|_| Error::arg(format!("learning rate must be a number or `auto`, got `{s}`")))?;
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::arg(format!("learning rate must be positive, got {x}")));
        }
        Ok(EtaPolicy::Fixed(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DataSource {
    File(PathBuf),
    /// The run's seed and delay override the ones in the spec.
    Generator(GeneratorSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub algo: Algorithm,
    pub loss: LossKind,
    pub prior: PriorSpec,
    pub delay: usize,
    pub eta: EtaPolicy,
    pub epsilon_frac: f64,
    pub seed: u64,
    pub source: DataSource,
    pub record_weights: bool,
}

impl RunConfig {
    pub fn load_game(&self) -> Result<GameInput> {
        let loss = LossSpec::from_kind(self.loss);
        match &self.source {
            DataSource::File(path) => parse_game_file(path, loss, self.delay),
            DataSource::Generator(spec) => generate_game(
                &GeneratorSpec {
                    seed: self.seed,
                    delay: self.delay,
                    ..*spec
                },
                loss,
            ),
        }
    }

    pub fn resolve_eta(&self, game: &GameInput) -> Result<f64> {
        resolve_eta(self.eta, self.algo, game, self.epsilon_frac)
    }

    pub fn build_aggregator(&self, game: &GameInput, eta: f64) -> Result<Aggregator> {
        let prior = self.prior.build(game.num_experts())?;
        Aggregator::new(self.algo, prior, self.delay, eta)
    }

    pub fn run(&self) -> Result<GameTrace> {
        let game = self.load_game()?;
        self.run_on(&game)
    }

    pub fn run_on(&self, game: &GameInput) -> Result<GameTrace> {
        let eta = self.resolve_eta(game)?;
        let mut agg = self.build_aggregator(game, eta)?;
        run_game(game, &mut agg, self.record_weights)
    }
}

pub fn resolve_eta(policy: EtaPolicy, algo: Algorithm, game: &GameInput, epsilon_frac: f64) -> Result<f64> {
    match policy {
        EtaPolicy::Fixed(x) => Ok(x),
        EtaPolicy::Auto if algo == Algorithm::VdFc && game.num_experts() >= 2 => {
            Ok(eta_star(game.num_experts(), game.len(), game.loss(), game.delay(), epsilon_frac)?.eta)
        }
        EtaPolicy::Auto => Ok(game.loss().default_eta),
    }
}

/// Regret bound guaranteed for `algo` on a game of this shape, if one is
/// available.
///
/// * `v1`: `ln N / η`.
/// * `vd`: `D ln N / η`.
/// * `vdfc`: `ln N / η + F N T η`.
/// * `g-markov` with `D = 1`: the largest `−(1/η) ln p(n, …, n)` over
///   constant comparator sequences. No bound is reported for `D > 1`.
#[allow(clippy::too_many_arguments)]
pub fn regret_bound(
    algo: Algorithm,
    prior: &ExpertPrior,
    loss: &LossSpec,
    experts: usize,
    steps: usize,
    delay: usize,
    eta: f64,
    epsilon_frac: f64,
) -> Option<f64> {
    match algo {
        Algorithm::V1 => Some(v1_regret_bound(experts, eta)),
        Algorithm::VdReplicated => Some(vd_regret_bound(experts, delay, eta)),
        Algorithm::VdFc => {
            let slope = (1.0 + epsilon_frac) * (delay - 1) as f64 * loss.range_bound / 4.0;
            let f = loss.prediction_bound() * loss.lipschitz * slope;
            Some(v1_regret_bound(experts, eta) + f * experts as f64 * steps as f64 * eta)
        }
        Algorithm::GMarkov if delay == 1 => (0..experts)
            .map(|n| prior.sequence_log_prob(&vec![n; steps]).map(|lp| -lp / eta))
            .collect::<Result<Vec<f64>>>()
            .ok()
            .map(|v| v.into_iter().fold(f64::NEG_INFINITY, f64::max)),
        Algorithm::GMarkov => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub base: RunConfig,
    pub etas: Vec<EtaPolicy>,
    pub delays: Vec<usize>,
    pub algos: Vec<Algorithm>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub algo: Algorithm,
    pub eta: f64,
    #[serde(rename = "D")]
    pub delay: usize,
    pub seed: u64,
    #[serde(rename = "HT")]
    pub total_loss: f64,
    #[serde(rename = "best_LT")]
    pub best_loss: f64,
    pub regret: f64,
    pub bound: Option<f64>,
}

impl SweepConfig {
    /// One run configuration per cell. `v1` is only paired with `D = 1`,
    /// and the prior is only used by `g-markov`.
    pub fn cells(&self) -> Vec<RunConfig> {
        let mut out = Vec::new();
        for &algo in &self.algos {
            for &delay in &self.delays {
                if algo == Algorithm::V1 && delay != 1 {
                    continue;
                }
                for &eta in &self.etas {
                    for &seed in &self.seeds {
                        out.push(RunConfig {
                            algo,
                            delay,
                            eta,
                            seed,
                            prior: if algo == Algorithm::GMarkov {
                                self.base.prior
                            } else {
                                PriorSpec::Identity
                            },
                            record_weights: false,
                            ..self.base.clone()
                        });
                    }
                }
            }
        }
        out
    }
}

pub fn sweep_row(cfg: &RunConfig) -> Result<SweepRow> {
    let game = cfg.load_game()?;
    let eta = cfg.resolve_eta(&game)?;
    let mut agg = cfg.build_aggregator(&game, eta)?;
    let trace = run_game(&game, &mut agg, false)?;
    Ok(SweepRow {
        algo: cfg.algo,
        eta,
        delay: cfg.delay,
        seed: cfg.seed,
        total_loss: trace.total_loss,
        best_loss: trace.best_loss,
        regret: trace.regret,
        bound: regret_bound(
            cfg.algo,
            agg.prior(),
            game.loss(),
            game.num_experts(),
            game.len(),
            cfg.delay,
            eta,
            cfg.epsilon_frac,
        ),
    })
}

pub fn sort_rows(rows: &mut [SweepRow]) {
    rows.sort_by(|a, b| {
        a.algo
            .name()
            .cmp(b.algo.name())
            .then(a.eta.total_cmp(&b.eta))
            .then(a.delay.cmp(&b.delay))
            .then(a.seed.cmp(&b.seed))
    });
}

/// Runs every cell sequentially and returns sorted rows.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    let mut rows = cfg.cells().iter().map(sweep_row).collect::<Result<Vec<_>>>()?;
    sort_rows(&mut rows);
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(writer: W, rows: &[SweepRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["algo", "eta", "D", "seed", "HT", "best_LT", "regret", "bound"])?;
    for r in rows {
        wtr.write_record([
            r.algo.name().to_string(),
            r.eta.to_string(),
            r.delay.to_string(),
            r.seed.to_string(),
            r.total_loss.to_string(),
            r.best_loss.to_string(),
            r.regret.to_string(),
            r.bound.map(|b| b.to_string()).unwrap_or_default(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn generator(model: GameModel, experts: usize, steps: usize, noise: f64) -> DataSource {
    DataSource::Generator(GeneratorSpec {
        model,
        experts,
        steps,
        noise,
        seed: 0,
        delay: 1,
    })
}
