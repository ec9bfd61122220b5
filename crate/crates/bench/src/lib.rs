//! Benchmark fixtures.

use longcast::generate::{generate_game, GameModel, GeneratorSpec};
use longcast::{GameInput, LossSpec};

pub fn bench_game(experts: usize, steps: usize, delay: usize) -> GameInput {
    generate_game(
        &GeneratorSpec {
            model: GameModel::DriftingBest,
            experts,
            steps,
            noise: 0.3,
            seed: 7,
            delay,
        },
        LossSpec::square(),
    )
    .expect("valid generator spec")
}
