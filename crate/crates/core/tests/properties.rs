use longcast::aggregator::{drift_argmax_x, drift_objective};
use longcast::game::{v1_regret_bound, vd_regret_bound};
use longcast::{run_game, Aggregator, Algorithm, ExpertPrior, GameInput, LossSpec};
use proptest::prelude::*;

fn algo_strategy() -> impl Strategy<Value = Algorithm> {
    prop_oneof![
        Just(Algorithm::V1),
        Just(Algorithm::VdReplicated),
        Just(Algorithm::VdFc),
        Just(Algorithm::GMarkov),
    ]
}

fn build(algo: Algorithm, n: usize, d: usize, eta: f64) -> Aggregator {
    let d = if algo == Algorithm::V1 { 1 } else { d };
    let prior = if algo == Algorithm::GMarkov {
        ExpertPrior::fixed_share(n, 0.1).unwrap()
    } else {
        ExpertPrior::identity(n).unwrap()
    };
    Aggregator::new(algo, prior, d, eta).unwrap()
}

fn loss_table(n: usize, t: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0f64..1.0, n), t)
}

fn game(n: usize, t: usize) -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>)> {
    (
        prop::collection::vec(0.0f64..=1.0, t),
        prop::collection::vec(prop::collection::vec(0.0f64..=1.0, n), t),
    )
}

proptest! {
    #[test]
    fn weights_stay_on_simplex(
        algo in algo_strategy(),
        d in 1usize..5,
        eta in 0.01f64..5.0,
        losses in (1usize..6).prop_flat_map(|n| loss_table(n, 40)),
    ) {
        let n = losses[0].len();
        let mut agg = build(algo, n, d, eta);
        for l in &losses {
            let w = agg.observe(l).unwrap().probs();
            prop_assert!(w.iter().all(|&x| (0.0..=1.0).contains(&x)));
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn common_loss_shift_is_invisible(
        algo in algo_strategy(),
        d in 1usize..4,
        losses in loss_table(3, 25),
        shifts in prop::collection::vec(0.0f64..3.0, 25),
    ) {
        let mut a = build(algo, 3, d, 0.7);
        let mut b = build(algo, 3, d, 0.7);
        for (l, c) in losses.iter().zip(&shifts) {
            let shifted: Vec<f64> = l.iter().map(|x| x + c).collect();
            let wa = a.observe(l).unwrap();
            let wb = b.observe(&shifted).unwrap();
            prop_assert!(wa.max_abs_diff(&wb) < 1e-12);
        }
    }

    #[test]
    fn expert_relabeling_permutes_weights(
        algo in algo_strategy(),
        d in 1usize..4,
        losses in loss_table(4, 25),
        perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle(),
    ) {
        let mut a = build(algo, 4, d, 0.9);
        let mut b = build(algo, 4, d, 0.9);
        for l in &losses {
            let permuted: Vec<f64> = perm.iter().map(|&k| l[k]).collect();
            let wa = a.observe(l).unwrap().probs();
            let wb = b.observe(&permuted).unwrap().probs();
            for (i, &k) in perm.iter().enumerate() {
                prop_assert!((wb[i] - wa[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dominant_expert_gains_weight(
        d in 1usize..4,
        losses in loss_table(3, 30),
        gap in 0.05f64..0.5,
    ) {
        // expert 0 is strictly better than everyone at every step
        let mut agg = build(Algorithm::VdFc, 3, d, 1.0);
        let mut prev = agg.newest_weights().prob(0);
        for l in &losses {
            let mut row = l.clone();
            let best_other = row[1].min(row[2]);
            row[0] = (best_other - gap).max(0.0);
            if row[0] >= best_other {
                row[1] += gap;
                row[2] += gap;
            }
            agg.observe(&row).unwrap();
            let now = agg.newest_weights().prob(0);
            prop_assert!(now >= prev - 1e-15);
            prev = now;
        }
        prop_assert!(prev > 1.0 / 3.0);
    }

    #[test]
    fn one_step_regret_bound(
        (outcomes, forecasts) in (1usize..8).prop_flat_map(|n| game(n, 80)),
        eta in 0.01f64..=0.5,
    ) {
        let n = forecasts[0].len();
        let g = GameInput::new(outcomes, forecasts, 1, LossSpec::square()).unwrap();
        let tr = run_game(&g, &mut build(Algorithm::V1, n, 1, eta), false).unwrap();
        prop_assert!(tr.regret <= v1_regret_bound(n, eta) + 1e-9);
        prop_assert!(tr.max_mix_excess() <= 1e-12);
    }

    #[test]
    fn replicated_regret_bound(
        (outcomes, forecasts) in (1usize..6).prop_flat_map(|n| game(n, 77)),
        d in 1usize..8,
        eta in 0.01f64..=0.5,
    ) {
        let n = forecasts[0].len();
        let g = GameInput::new(outcomes, forecasts, d, LossSpec::square()).unwrap();
        let tr = run_game(&g, &mut build(Algorithm::VdReplicated, n, d, eta), false).unwrap();
        prop_assert!(tr.regret <= vd_regret_bound(n, d, eta) + 1e-9);
    }

    #[test]
    fn drift_extremum_beats_neighbours(
        n in 2usize..30,
        frac in 0.01f64..0.99,
        dx in 1e-4f64..0.1,
    ) {
        let a = frac / n as f64;
        let x = drift_argmax_x(a, n).unwrap();
        prop_assert!((0.0..=1.0).contains(&x));
        let f = drift_objective(x, a, n);
        prop_assert!(f >= drift_objective((x - dx).max(0.0), a, n) - 1e-12);
        prop_assert!(f >= drift_objective((x + dx).min(1.0), a, n) - 1e-12);
    }
}
