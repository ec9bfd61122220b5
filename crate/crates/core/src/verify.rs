//! Self-check suite: every invariant of the library on small seeded
//! instances, with exhaustive oracles where they are affordable.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aggregator::{
    boundary_share, brute_force_posterior, drift_bound, drift_objective, Aggregator, Algorithm,
    ReplicatedPrior, SequenceModel,
};
use crate::error::Result;
use crate::game::{
    replicate_game, run_game, mixture_loss_bound, v1_regret_bound, vd_regret_bound,
    verify_replication_identity, GameInput,
};
use crate::generate::{generate_game, GameModel, GeneratorSpec};
use crate::io::{read_game, write_game};
use crate::loss::{check_exp_concavity, LossSpec};
use crate::prior::ExpertPrior;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

type Check = fn(u64) -> Result<(bool, String)>;

const CHECKS: &[(&str, Check)] = &[
    ("exp-concavity", check_concavity),
    ("v1-regret-bound", check_v1_bound),
    ("vd-regret-bound", check_vd_bound),
    ("mixloss-domination", check_mixloss),
    ("sequence-bound", check_sequence_bound),
    ("oracle-equivalence", check_oracle),
    ("prior-normalization", check_prior),
    ("replication-identity", check_replication),
    ("drift-extremum", check_drift),
    ("game-file-round-trip", check_round_trip),
    ("reduction-chain", check_reductions),
];

pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|(n, _)| *n).collect()
}

/// Runs every check. Errors inside a check count as failures.
pub fn run_verification(seed: u64) -> Vec<CheckResult> {
    CHECKS
        .iter()
        .map(|(name, f)| {
            let (passed, detail) = match f(seed) {
                Ok(r) => r,
                Err(e) => (false, format!("error: {e}")),
            };
            CheckResult {
                name: name.to_string(),
                passed,
                detail,
            }
        })
        .collect()
}

fn gen(model: GameModel, n: usize, t: usize, noise: f64, seed: u64, d: usize, loss: LossSpec) -> Result<GameInput> {
    generate_game(
        &GeneratorSpec {
            model,
            experts: n,
            steps: t,
            noise,
            seed,
            delay: d,
        },
        loss,
    )
}

fn play(g: &GameInput, algo: Algorithm, prior: ExpertPrior, eta: f64, weights: bool) -> Result<crate::game::GameTrace> {
    let mut agg = Aggregator::new(algo, prior, g.delay(), eta)?;
    run_game(g, &mut agg, weights)
}

fn random_losses(rng: &mut impl Rng, t: usize, n: usize) -> Vec<Vec<f64>> {
    (0..t).map(|_| (0..n).map(|_| rng.random::<f64>()).collect()).collect()
}

fn check_concavity(seed: u64) -> Result<(bool, String)> {
    let sq = LossSpec::square();
    let a = check_exp_concavity(&sq, 0.5, 20_000, seed)?;
    let b = check_exp_concavity(&sq, 2.0, 20_000, seed)?;
    let c = check_exp_concavity(&LossSpec::log(), 1.0, 20_000, seed)?;
    Ok((
        a.passed && !b.passed && c.passed,
        format!(
            "square@0.5 worst gap {:.3e}; square@2 worst gap {:.3e}; log@1 worst gap {:.3e}",
            a.worst_gap, b.worst_gap, c.worst_gap
        ),
    ))
}

fn check_v1_bound(seed: u64) -> Result<(bool, String)> {
    let (n, eta) = (10, 0.5);
    let bound = v1_regret_bound(n, eta);
    let mut worst = f64::NEG_INFINITY;
    for k in 0..20 {
        for model in [GameModel::NoisyExperts, GameModel::DriftingBest] {
            let g = gen(model, n, 500, 0.3, seed.wrapping_add(k), 1, LossSpec::square())?;
            let tr = play(&g, Algorithm::V1, ExpertPrior::identity(n)?, eta, false)?;
            worst = worst.max(tr.regret);
        }
    }
    Ok((worst <= bound + 1e-9, format!("max regret {worst:.6} vs bound {bound:.6}")))
}

fn check_vd_bound(seed: u64) -> Result<(bool, String)> {
    let (n, d, eta) = (5, 7, 0.5);
    let bound = vd_regret_bound(n, d, eta);
    let mut worst = f64::NEG_INFINITY;
    for k in 0..20 {
        // odd lengths leave the grids uneven
        for (model, t) in [(GameModel::NoisyExperts, 350), (GameModel::AdversarialSwap, 353)] {
            let g = gen(model, n, t, 0.3, seed.wrapping_add(k), d, LossSpec::square())?;
            let tr = play(&g, Algorithm::VdReplicated, ExpertPrior::identity(n)?, eta, false)?;
            worst = worst.max(tr.regret);
        }
    }
    Ok((worst <= bound + 1e-9, format!("max regret {worst:.6} vs bound {bound:.6}")))
}

fn check_mixloss(seed: u64) -> Result<(bool, String)> {
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_telescope: f64 = 0.0;
    for (loss, eta) in [(LossSpec::square(), 0.5), (LossSpec::log(), 1.0)] {
        for algo in Algorithm::ALL {
            let d = if algo == Algorithm::V1 { 1 } else { 3 };
            let prior = if algo == Algorithm::GMarkov {
                ExpertPrior::fixed_share(4, 0.1)?
            } else {
                ExpertPrior::identity(4)?
            };
            let g = gen(GameModel::DriftingBest, 4, 300, 0.4, seed, d, loss)?;
            let tr = play(&g, algo, prior, eta, false)?;
            worst_excess = worst_excess.max(tr.max_mix_excess());
            if d == 1 {
                let closed = -(tr
                    .cumulative_expert_losses
                    .iter()
                    .map(|l| (-eta * l).exp())
                    .sum::<f64>()
                    / 4.0)
                    .ln()
                    / eta;
                worst_telescope = worst_telescope.max((tr.total_mixloss - closed).abs());
            }
        }
    }
    Ok((
        worst_excess <= 1e-12 && worst_telescope <= 1e-9,
        format!("max h - m {worst_excess:.3e}; telescope error {worst_telescope:.3e}"),
    ))
}

fn check_sequence_bound(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eta = 0.5;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..5 {
        let outcomes: Vec<f64> = (0..5).map(|_| rng.random()).collect();
        let forecasts = (0..5).map(|_| (0..3).map(|_| rng.random()).collect()).collect();
        let g = GameInput::new(outcomes, forecasts, 1, LossSpec::square())?;
        for prior in [ExpertPrior::identity(3)?, ExpertPrior::fixed_share(3, 0.3)?] {
            let rhs = mixture_loss_bound(&g, &prior, eta)?;
            let tr = play(&g, Algorithm::GMarkov, prior, eta, false)?;
            worst = worst.max(tr.total_loss - rhs);
        }
    }
    Ok((worst <= 1e-9, format!("max H - bound {worst:.3e}")))
}

fn check_oracle(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eta = 0.7;
    let mut worst: f64 = 0.0;
    for n in [2, 3] {
        for d in [1, 2, 3] {
            let t = 6;
            let losses = random_losses(&mut rng, t, n);
            let fs = ExpertPrior::fixed_share(n, 0.25)?;
            let id = ExpertPrior::identity(n)?;
            let rep = ReplicatedPrior { experts: n, delay: d };
            let mut cases: Vec<(Algorithm, ExpertPrior, &dyn SequenceModel)> = vec![
                (Algorithm::VdReplicated, id.clone(), &rep),
                (Algorithm::VdFc, id.clone(), &id),
                (Algorithm::GMarkov, fs.clone(), &fs),
            ];
            if d == 1 {
                cases.push((Algorithm::V1, id.clone(), &id));
            }
            for (algo, prior, model) in cases {
                let mut agg = Aggregator::new(algo, prior, d, eta)?;
                for s in 1..=t {
                    let used = agg.observe(&losses[s - 1])?;
                    let exact = brute_force_posterior(model, &losses, eta, s, d)?;
                    worst = worst.max(used.max_abs_diff(&exact));
                }
            }
        }
    }
    Ok((worst <= 1e-10, format!("max weight difference {worst:.3e}")))
}

fn check_prior(_seed: u64) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for n in 1..=3 {
        for prior in [ExpertPrior::identity(n)?, ExpertPrior::fixed_share(n, 0.35)?] {
            for t in 1..=5 {
                let mut acc = 0.0;
                crate::aggregator::for_each_sequence(n, t, |seq| {
                    acc += prior.sequence_log_prob(seq).map(f64::exp).unwrap_or(f64::NAN);
                })?;
                worst = worst.max((acc - 1.0f64).abs());
            }
        }
    }
    Ok((worst <= 1e-12, format!("max |Σ p − 1| {worst:.3e}")))
}

fn check_replication(seed: u64) -> Result<(bool, String)> {
    let mut ok = true;
    let mut worst_gap: f64 = 0.0;
    for d in [2, 3, 5] {
        let src = gen(GameModel::NoisyExperts, 4, 50, 0.3, seed, 1, LossSpec::square())?;
        let rep = replicate_game(&src, d)?;
        let tr = play(&rep, Algorithm::VdFc, ExpertPrior::identity(4)?, 0.5, true)?;
        let report = verify_replication_identity(&src, tr.weights.as_deref().unwrap_or(&[]), d)?;
        ok &= report.holds(1e-12);
        worst_gap = worst_gap.max(report.loss_gap);
    }
    Ok((ok, format!("max loss gap {worst_gap:.3e}")))
}

fn check_drift(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_above: f64 = f64::NEG_INFINITY;
    let mut worst_miss: f64 = 0.0;
    for _ in 0..10 {
        let eta = rng.random_range(0.01..0.5);
        let d = rng.random_range(2..=8);
        let h = rng.random_range(0.1..1.0);
        let n = rng.random_range(2..=20);
        let a = boundary_share(eta, d, h, n);
        let bound = drift_bound(eta, d, h);
        let grid = (0..=10_000)
            .map(|i| drift_objective(i as f64 * 1e-4, a, n))
            .fold(f64::NEG_INFINITY, f64::max);
        worst_above = worst_above.max(grid - bound);
        worst_miss = worst_miss.max(bound - grid);
    }
    let quarter = drift_bound(4f64.ln(), 2, 1.0);
    Ok((
        worst_above <= 1e-12 && worst_miss <= 1e-6 && (quarter - 1.0 / 3.0).abs() <= 1e-9,
        format!("grid − bound ≤ {worst_above:.3e}; bound − grid ≤ {worst_miss:.3e}; q=1/4 gives {quarter}"),
    ))
}

fn check_round_trip(seed: u64) -> Result<(bool, String)> {
    let mut ok = true;
    for model in [GameModel::NoisyExperts, GameModel::DriftingBest, GameModel::AdversarialSwap] {
        for loss in [LossSpec::square(), LossSpec::log()] {
            let g = gen(model, 3, 40, 0.4, seed, 2, loss)?;
            let mut buf = Vec::new();
            write_game(&mut buf, &g)?;
            ok &= read_game(buf.as_slice(), loss, 2)? == g;
        }
    }
    Ok((ok, "generated games survive write and parse".into()))
}

fn check_reductions(seed: u64) -> Result<(bool, String)> {
    let g1 = gen(GameModel::DriftingBest, 5, 200, 0.4, seed, 1, LossSpec::square())?;
    let g3 = g1.clone().with_delay(3)?;
    let id = ExpertPrior::identity(5)?;
    let v1 = play(&g1, Algorithm::V1, id.clone(), 0.5, true)?;
    let fc1 = play(&g1, Algorithm::VdFc, id.clone(), 0.5, true)?;
    let vd1 = play(&g1, Algorithm::VdReplicated, id.clone(), 0.5, true)?;
    let fc3 = play(&g3, Algorithm::VdFc, id.clone(), 0.5, true)?;
    let gm3 = play(&g3, Algorithm::GMarkov, id, 0.5, true)?;
    let ok = v1.weights == fc1.weights && v1.weights == vd1.weights && fc3.weights == gm3.weights;
    Ok((ok, "v1 = vdfc = vd at D = 1; g-markov with identity prior = vdfc".into()))
}
