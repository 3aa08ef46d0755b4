//! The greedy selection loop, its randomized candidate search, and fitted
//! target models.

mod model;
mod sample;

pub use model::TargetModel;
pub use sample::sample_size;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{CandidateScorer, DesignMatrix, DualState};

/// Default candidate sample size of the randomized search: the smallest
/// sample whose maximum lands in the top 5% with probability 0.95.
pub const DEFAULT_SAMPLE_COUNT: usize = 59;
/// Default stopping threshold on the mean-scale objective improvement.
pub const DEFAULT_DELTA: f64 = 1e-4;
/// Default mean-scale regularizer.
pub const DEFAULT_LAMBDA: f64 = 1.0;
/// Slack allowed on `λ‖w‖² + R̂(T∘h) ≤ 1` before a fit is rejected.
pub const NORM_BOUND_SLACK: f64 = 1e-9;

/// How the candidate set is searched at each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SearchStrategy {
    /// Score every remaining candidate.
    Full,
    /// Score a uniform sample (without replacement) of the remaining
    /// candidates; falls back to a full scan when fewer remain.
    Randomized { sample_count: usize, seed: u64 },
}

impl SearchStrategy {
    pub fn randomized(seed: u64) -> Self {
        SearchStrategy::Randomized {
            sample_count: DEFAULT_SAMPLE_COUNT,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectConfig {
    /// Budget on the number of selected columns.
    pub k: usize,
    /// Mean-scale regularizer; the dual uses `m·lambda`.
    pub lambda: f64,
    /// Stop once the mean-scale improvement is `<= delta`; `0` disables.
    pub delta: f64,
    pub strategy: SearchStrategy,
}

impl Default for SelectConfig {
    fn default() -> Self {
        Self {
            k: usize::MAX,
            lambda: DEFAULT_LAMBDA,
            delta: DEFAULT_DELTA,
            strategy: SearchStrategy::Full,
        }
    }
}

impl SelectConfig {
    fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Parameter("k must be at least 1".into()));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Parameter(format!(
                "lambda must be positive and finite, got {}",
                self.lambda
            )));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::Parameter(format!(
                "delta must be non-negative, got {}",
                self.delta
            )));
        }
        if let SearchStrategy::Randomized {
            sample_count: 0, ..
        } = self.strategy
        {
            return Err(Error::Parameter("sample count must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    BudgetK,
    DeltaStop,
    Exhausted,
}

/// Weight vector over design columns that stores only the selected entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseWeights {
    len: usize,
    entries: Vec<(usize, f64)>,
}

impl SparseWeights {
    pub fn new(len: usize, entries: Vec<(usize, f64)>) -> Result<Self> {
        if let Some(&(i, _)) = entries.iter().find(|(i, _)| *i >= len) {
            return Err(Error::Dimension(format!(
                "weight index {i} >= length {len}"
            )));
        }
        Ok(Self { len, entries })
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            entries: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn get(&self, i: usize) -> f64 {
        self.entries
            .iter()
            .find(|(j, _)| *j == i)
            .map_or(0.0, |&(_, w)| w)
    }

    pub fn norm_squared(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w * w).sum()
    }

    pub fn to_dense(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.len);
        for &(i, w) in &self.entries {
            v[i] = w;
        }
        v
    }

    /// `Z·w` over the design's training rows.
    pub fn apply(&self, design: &DesignMatrix) -> DVector<f64> {
        let mut out = DVector::zeros(design.m());
        for &(i, w) in &self.entries {
            out.axpy(w, &design.column(i), 1.0);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Selected design columns in selection order.
    pub support: Vec<usize>,
    pub weights: SparseWeights,
    /// Dual score `yᵀKGy` after each selection (`m` times the regularized accuracy).
    pub score_trace: Vec<f64>,
    pub stop_reason: StopReason,
    /// Raw-score gain of the best rejected candidate when `stop_reason` is `DeltaStop`.
    pub forgone_gain: Option<f64>,
    pub lambda: f64,
    pub k: usize,
    /// `λ‖w‖² + (1/m)Σ(T(Zw)ᵢ − yᵢ)²` on the training set.
    pub truncated_objective: f64,
}

impl SelectionResult {
    /// Final regularized accuracy `1 − min regularized risk` on the training set.
    pub fn accuracy(&self, m: usize) -> f64 {
        self.score_trace.last().map_or(0.0, |s| s / m as f64)
    }
}

/// Remaining candidates with O(1) removal and uniform index access.
struct CandidatePool {
    items: Vec<usize>,
    pos: Vec<usize>,
}

impl CandidatePool {
    fn new(p: usize) -> Self {
        Self {
            items: (0..p).collect(),
            pos: (0..p).collect(),
        }
    }

    fn len(&self) -> usize {
        self.items.len()
    }

    fn remove(&mut self, col: usize) {
        let at = self.pos[col];
        let last = *self.items.last().expect("remove from empty pool");
        self.items.swap_remove(at);
        if last != col {
            self.pos[last] = at;
        }
    }
}

/// Lexicographic `(score, −index)` comparison; strict improvement only.
fn beats(score: f64, index: usize, best: Option<(f64, usize)>) -> bool {
    match best {
        None => true,
        Some((s, i)) => score > s || (score == s && index < i),
    }
}

/// `w_i = z_iᵀGy` for `i ∈ support`, zero elsewhere.
pub fn extract_weights(
    design: &DesignMatrix,
    support: &[usize],
    state: &DualState,
) -> Result<SparseWeights> {
    if state.m() != design.m() {
        return Err(Error::Dimension(format!(
            "dual state has m = {}, design has m = {}",
            state.m(),
            design.m()
        )));
    }
    SparseWeights::new(design.p(), state.weights(design, support))
}

/// `T(a) = min(max(a, −1), 1)`.
pub fn truncate(a: f64) -> f64 {
    a.clamp(-1.0, 1.0)
}

/// `λ‖w‖² + (1/m)Σ(T(Zw)ᵢ − yᵢ)²`.
pub fn truncated_objective(design: &DesignMatrix, weights: &SparseWeights, lambda: f64) -> f64 {
    let fitted = weights.apply(design);
    let risk = fitted
        .iter()
        .zip(design.y().iter())
        .map(|(f, y)| (truncate(*f) - y).powi(2))
        .sum::<f64>()
        / design.m() as f64;
    lambda * weights.norm_squared() + risk
}

/// Greedy forward selection on the regularized objective using rank-one
/// updates of the `m×m` dual inverse.
pub fn greedy_select(design: &DesignMatrix, config: &SelectConfig) -> Result<SelectionResult> {
    config.validate()?;
    let m = design.m();
    let p = design.p();
    let y = design.y();
    let threshold = config.delta * m as f64;

    let mut state = DualState::new(m, config.lambda)?;
    let mut pool = CandidatePool::new(p);
    let (sample_count, mut rng) = match config.strategy {
        SearchStrategy::Full => (usize::MAX, None),
        SearchStrategy::Randomized { sample_count, seed } => {
            (sample_count, Some(ChaCha8Rng::seed_from_u64(seed)))
        }
    };

    let mut support = Vec::new();
    let mut score_trace = Vec::new();
    let mut forgone_gain = None;
    let mut current = 0.0;

    let stop_reason = loop {
        if support.len() >= config.k {
            break StopReason::BudgetK;
        }
        if pool.len() == 0 {
            break StopReason::Exhausted;
        }
        let scorer = CandidateScorer::new(&state, y)?;
        let mut best: Option<(f64, usize)> = None;
        let mut consider = |col: usize| -> Result<()> {
            let s = scorer.score(design.column(col))?;
            if beats(s, col, best) {
                best = Some((s, col));
            }
            Ok(())
        };
        match rng.as_mut() {
            Some(rng) if pool.len() > sample_count => {
                for at in rand::seq::index::sample(rng, pool.len(), sample_count) {
                    consider(pool.items[at])?;
                }
            }
            _ => {
                for &col in &pool.items {
                    consider(col)?;
                }
            }
        }
        let (best_score, best_col) = best.expect("non-empty candidate pool");
        let gain = best_score - current;
        if config.delta > 0.0 && gain <= threshold {
            forgone_gain = Some(gain);
            break StopReason::DeltaStop;
        }
        state.sm_update(design.column(best_col))?;
        pool.remove(best_col);
        support.push(best_col);
        current = state.score(y);
        score_trace.push(current);
    };

    let weights = extract_weights(design, &support, &state)?;
    let objective = truncated_objective(design, &weights, config.lambda);
    if objective.is_nan() || objective > 1.0 + NORM_BOUND_SLACK {
        return Err(Error::NumericDegeneracy(format!(
            "fitted objective {objective} exceeds the zero-model bound 1"
        )));
    }
    Ok(SelectionResult {
        support,
        weights,
        score_trace,
        stop_reason,
        forgone_gain,
        lambda: config.lambda,
        k: config.k,
        truncated_objective: objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn design(rows: usize, cols: usize, data: &[f64], y: &[f64]) -> DesignMatrix {
        let x = DMatrix::from_row_slice(rows, cols, data);
        DesignMatrix::assemble(&x, &DMatrix::zeros(rows, 0), y).unwrap()
    }

    // Columns of a 4x4 Hadamard matrix minus the all-ones column.
    fn hadamard4() -> DesignMatrix {
        design(
            4,
            3,
            &[
                1.0, 1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0, -1.0, -1.0, -1.0, 1.0,
            ],
            &[1.0, -1.0, 1.0, 1.0],
        )
    }

    #[test]
    fn picks_best_single_correlate() {
        let z = design(
            4,
            2,
            &[1.0, 1.0, -1.0, 1.0, 1.0, -1.0, -1.0, -1.0],
            &[1.0, -1.0, 1.0, -1.0],
        );
        let cfg = SelectConfig {
            k: 1,
            ..Default::default()
        };
        let r = greedy_select(&z, &cfg).unwrap();
        assert_eq!(r.support, vec![0]);
        assert_eq!(r.stop_reason, StopReason::BudgetK);
    }

    #[test]
    fn scalar_weight() {
        // m=2, λ=1: w = zᵀy / (zᵀz + 2) = 2 / 4
        let z = design(2, 1, &[1.0, -1.0], &[1.0, -1.0]);
        let cfg = SelectConfig {
            k: 1,
            lambda: 1.0,
            delta: 0.0,
            ..Default::default()
        };
        let r = greedy_select(&z, &cfg).unwrap();
        assert!((r.weights.get(0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn empty_support_weights_are_zero() {
        let z = hadamard4();
        let state = DualState::new(4, 1.0).unwrap();
        let w = extract_weights(&z, &[], &state).unwrap();
        assert_eq!(w.to_dense(), DVector::zeros(3));
    }

    #[test]
    fn exhausts_candidates() {
        let z = hadamard4();
        let cfg = SelectConfig {
            delta: 0.0,
            ..Default::default()
        };
        let r = greedy_select(&z, &cfg).unwrap();
        assert_eq!(r.stop_reason, StopReason::Exhausted);
        let mut s = r.support.clone();
        s.sort();
        assert_eq!(s, vec![0, 1, 2]);
    }

    #[test]
    fn delta_stop_records_forgone_gain() {
        // y is uncorrelated with two of the three Hadamard columns.
        let z = design(
            4,
            3,
            &[
                1.0, 1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0, -1.0, -1.0, -1.0, 1.0,
            ],
            &[1.0, -1.0, 1.0, -1.0],
        );
        let r = greedy_select(&z, &SelectConfig::default()).unwrap();
        assert_eq!(r.stop_reason, StopReason::DeltaStop);
        assert_eq!(r.support.len(), 1);
        assert!(r.forgone_gain.unwrap() <= DEFAULT_DELTA * 4.0);
    }

    #[test]
    fn ties_break_to_lowest_index() {
        // Two identical columns.
        let z = design(
            4,
            2,
            &[1.0, 1.0, 2.0, 2.0, -1.0, -1.0, 0.5, 0.5],
            &[1.0, 1.0, -1.0, -1.0],
        );
        let r = greedy_select(
            &z,
            &SelectConfig {
                k: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(r.support, vec![0]);
    }

    #[test]
    fn parameter_errors() {
        let z = hadamard4();
        for cfg in [
            SelectConfig {
                k: 0,
                ..Default::default()
            },
            SelectConfig {
                lambda: 0.0,
                ..Default::default()
            },
            SelectConfig {
                lambda: -1.0,
                ..Default::default()
            },
            SelectConfig {
                delta: -1.0,
                ..Default::default()
            },
            SelectConfig {
                strategy: SearchStrategy::Randomized {
                    sample_count: 0,
                    seed: 1,
                },
                ..Default::default()
            },
        ] {
            assert!(matches!(greedy_select(&z, &cfg), Err(Error::Parameter(_))));
        }
    }

    #[test]
    fn pool_removal_keeps_positions() {
        let mut pool = CandidatePool::new(5);
        pool.remove(1);
        pool.remove(4);
        pool.remove(0);
        let mut left = pool.items.clone();
        left.sort();
        assert_eq!(left, vec![2, 3]);
        for (at, &c) in pool.items.iter().enumerate() {
            assert_eq!(pool.pos[c], at);
        }
    }

    #[test]
    fn truncation() {
        assert_eq!(truncate(3.7), 1.0);
        assert_eq!(truncate(-2.0), -1.0);
        assert_eq!(truncate(0.3), 0.3);
    }
}
