//! Aggregation of expert forecasts when each forecast is scored `D` steps
//! after it is made.
//!
//! The crate provides the exponential-weights family for delayed feedback
//! (one-step, replicated over residue grids, fully connected, and the
//! Markov-prior posterior), exhaustive oracles for small instances, bound
//! calculators, synthetic game generators and game-file I/O.

pub mod aggregator;
pub mod error;
pub mod experiment;
pub mod game;
pub mod generate;
pub mod io;
pub mod loss;
pub mod prior;
pub mod verify;

pub use aggregator::{Aggregator, Algorithm, WeightVector};
pub use error::{Error, Result};
pub use game::{run_game, GameInput, GameTrace};
pub use loss::{LossKind, LossSpec};
pub use prior::{ExpertPrior, PriorSpec};
