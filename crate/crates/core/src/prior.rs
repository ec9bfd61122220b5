//! First-order Markov distributions over the sequence of active experts.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const STOCHASTIC_TOL: f64 = 1e-12;

/// Initial distribution `p₀` plus a row-stochastic transition kernel
/// `p(n_{t+1} | n_t)`. Expert indices are zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertPrior {
    initial: Vec<f64>,
    /// Row-major `N × N`.
    transition: Vec<f64>,
    log_transition: Vec<f64>,
}

impl ExpertPrior {
    pub fn new(initial: Vec<f64>, transition: Vec<Vec<f64>>) -> Result<Self> {
        let n = initial.len();
        if n == 0 {
            return Err(Error::arg("prior needs at least one expert"));
        }
        if transition.len() != n || transition.iter().any(|r| r.len() != n) {
            return Err(Error::arg(format!("transition matrix must be {n}x{n}")));
        }
        check_distribution(&initial, "initial distribution")?;
        for (i, row) in transition.iter().enumerate() {
            check_distribution(row, &format!("transition row {i}"))?;
        }
        Ok(Self::from_parts(initial, transition.concat()))
    }

    fn from_parts(initial: Vec<f64>, transition: Vec<f64>) -> Self {
        let log_transition = transition.iter().map(|p| p.ln()).collect();
        ExpertPrior {
            initial,
            transition,
            log_transition,
        }
    }

    /// Uniform start, no switching. Yields the classic exponential weights.
    pub fn identity(n: usize) -> Result<Self> {
        Self::fixed_share(n, 0.0)
    }

    /// Uniform start; each step keeps the current expert with probability
    /// `1 − α` and otherwise redraws uniformly over all `N` experts.
    pub fn fixed_share(n: usize, alpha: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::arg("prior needs at least one expert"));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::arg(format!("share rate must lie in [0, 1], got {alpha}")));
        }
        let share = alpha / n as f64;
        let mut transition = vec![share; n * n];
        for i in 0..n {
            transition[i * n + i] += 1.0 - alpha;
        }
        Ok(Self::from_parts(vec![1.0 / n as f64; n], transition))
    }

    pub fn num_experts(&self) -> usize {
        self.initial.len()
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn transition(&self, from: usize, to: usize) -> f64 {
        self.transition[from * self.num_experts() + to]
    }

    pub fn transition_row(&self, from: usize) -> &[f64] {
        let n = self.num_experts();
        &self.transition[from * n..(from + 1) * n]
    }

    /// `ln p(to | from)`; `-inf` for forbidden moves.
    pub fn log_transition(&self, from: usize, to: usize) -> f64 {
        self.log_transition[from * self.num_experts() + to]
    }

    pub fn is_identity(&self) -> bool {
        let n = self.num_experts();
        (0..n).all(|i| (0..n).all(|j| self.transition(i, j) == if i == j { 1.0 } else { 0.0 }))
    }

    /// Short description: `identity`, `fixed-share:ALPHA`, or `markov`.
    pub fn label(&self) -> String {
        let n = self.num_experts();
        if self.is_identity() {
            return "identity".into();
        }
        let uniform = self.initial.iter().all(|&p| p == 1.0 / n as f64);
        let share = self.transition(0, n - 1);
        let off_equal = (0..n).all(|i| (0..n).all(|j| i == j || self.transition(i, j) == share));
        if uniform && off_equal {
            let alpha = share * n as f64;
            if let Ok(fs) = Self::fixed_share(n, alpha) {
                if fs.transition.iter().zip(&self.transition).all(|(a, b)| (a - b).abs() < 1e-12) {
                    return format!("fixed-share:{alpha}");
                }
            }
        }
        "markov".into()
    }

    /// Row vector times the transition matrix.
    pub fn propagate(&self, dist: &[f64]) -> Vec<f64> {
        let n = self.num_experts();
        let mut out = vec![0.0; n];
        for (i, &p) in dist.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (o, &k) in out.iter_mut().zip(self.transition_row(i)) {
                *o += p * k;
            }
        }
        out
    }

    /// Prior marginal `p(n_t)` for one-based time `t`.
    pub fn marginal(&self, t: usize) -> Vec<f64> {
        let mut dist = self.initial.clone();
        for _ in 1..t {
            dist = self.propagate(&dist);
        }
        dist
    }

    /// `ln p₀(n₁) + Σ ln p(n_t | n_{t−1})`.
    pub fn sequence_log_prob(&self, sequence: &[usize]) -> Result<f64> {
        let n = self.num_experts();
        let Some(&first) = sequence.first() else {
            return Err(Error::arg("sequence must be nonempty"));
        };
        if let Some(bad) = sequence.iter().find(|&&i| i >= n) {
            return Err(Error::arg(format!("expert index {bad} out of range for {n} experts")));
        }
        let mut lp = self.initial[first].ln();
        for w in sequence.windows(2) {
            lp += self.log_transition(w[0], w[1]);
        }
        Ok(lp)
    }
}

fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|&x| !x.is_finite() || x < 0.0) {
        return Err(Error::arg(format!("{what} has a negative or non-finite entry")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::arg(format!("{what} sums to {s}, not 1")));
    }
    Ok(())
}

/// Textual prior selector: `identity` or `fixed-share:ALPHA`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PriorSpec {
    Identity,
    FixedShare(f64),
}

impl PriorSpec {
    pub fn build(self, n: usize) -> Result<ExpertPrior> {
        match self {
            PriorSpec::Identity => ExpertPrior::identity(n),
            PriorSpec::FixedShare(alpha) => ExpertPrior::fixed_share(n, alpha),
        }
    }
}

impl fmt::Display for PriorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriorSpec::Identity => f.write_str("identity"),
            PriorSpec::FixedShare(a) => write!(f, "fixed-share:{a}"),
        }
    }
}

impl FromStr for PriorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "identity" {
            return Ok(PriorSpec::Identity);
        }
        if let Some(rest) = s.strip_prefix("fixed-share:") {
            let alpha: f64 = rest
                .parse()
                .map_err(|_| Error::arg(format!("bad share rate `{rest}`")))?;
            if !(0.0..=1.0).contains(&alpha) {
                return Err(Error::arg(format!("share rate must lie in [0, 1], got {alpha}")));
            }
            return Ok(PriorSpec::FixedShare(alpha));
        }
        Err(Error::arg(format!(
            "unknown prior `{s}` (expected `identity` or `fixed-share:ALPHA`)"
        )))
    }
}
