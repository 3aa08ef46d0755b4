//! Exact reference computations used to verify the greedy selector:
//! primal and dual regularized accuracy, brute-force subset selection, and
//! empirical checks of the approximation and norm bounds.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{ColumnOrigin, DesignMatrix};
use crate::selector::{
    greedy_select, truncate, SearchStrategy, SelectConfig, SelectionResult, SparseWeights,
};

/// Largest number of supports [`brute_force_rss`] will enumerate.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;
/// Slack on the bound comparisons.
pub const BOUND_SLACK: f64 = 1e-9;

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "lambda must be positive, got {lambda}"
        )))
    }
}

fn cholesky_solve(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let n = a.nrows();
    a.cholesky().map(|c| c.solve(b)).ok_or_else(|| {
        Error::NumericDegeneracy(format!("{n}x{n} ridge system is not positive definite"))
    })
}

/// Primal ridge solution `(Z_SᵀZ_S + mλI)⁻¹ Z_Sᵀy` on the columns in `support`.
pub fn ridge_fit_primal(
    design: &DesignMatrix,
    support: &[usize],
    lambda: f64,
) -> Result<SparseWeights> {
    check_lambda(lambda)?;
    if support.is_empty() {
        return Ok(SparseWeights::zeros(design.p()));
    }
    let zs = design.z().select_columns(support);
    let mut c = zs.tr_mul(&zs);
    let lambda_eff = design.m() as f64 * lambda;
    for i in 0..support.len() {
        c[(i, i)] += lambda_eff;
    }
    let w = cholesky_solve(c, &zs.tr_mul(design.y()))?;
    SparseWeights::new(
        design.p(),
        support.iter().copied().zip(w.iter().copied()).collect(),
    )
}

/// `(1/m)‖Zw − y‖² + λ‖w‖²`.
pub fn regularized_risk(design: &DesignMatrix, weights: &SparseWeights, lambda: f64) -> f64 {
    let r = weights.apply(design) - design.y();
    r.norm_squared() / design.m() as f64 + lambda * weights.norm_squared()
}

/// Primal form: `(1/m) b_Sᵀ(C_S + mλI)⁻¹b_S`, i.e. one minus the minimal
/// regularized risk over supports inside `S`.
pub fn regularized_accuracy(design: &DesignMatrix, support: &[usize], lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if support.is_empty() {
        return Ok(0.0);
    }
    let m = design.m() as f64;
    let zs = design.z().select_columns(support);
    let mut c = zs.tr_mul(&zs);
    for i in 0..support.len() {
        c[(i, i)] += m * lambda;
    }
    let b = zs.tr_mul(design.y());
    Ok(b.dot(&cholesky_solve(c, &b)?) / m)
}

/// Dual form: `(1/m) yᵀ(K_S + mλI)⁻¹K_S y` with the `m×m` Gram `K_S = Z_S Z_Sᵀ`.
pub fn dual_accuracy(design: &DesignMatrix, support: &[usize], lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if support.is_empty() {
        return Ok(0.0);
    }
    let m = design.m();
    let zs = design.z().select_columns(support);
    let k = &zs * zs.transpose();
    let mut a = k.clone();
    for i in 0..m {
        a[(i, i)] += m as f64 * lambda;
    }
    let ky = &k * design.y();
    let alpha = cholesky_solve(a, &ky)?;
    Ok(design.y().dot(&alpha) / m as f64)
}

/// Mean squared error, optionally after clamping predictions to `[-1, 1]`.
pub fn empirical_risk(predictions: &[f64], y: &[f64], truncated: bool) -> Result<f64> {
    if predictions.len() != y.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} labels",
            predictions.len(),
            y.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::Dimension("empirical risk of an empty sample".into()));
    }
    let sum: f64 = predictions
        .iter()
        .zip(y)
        .map(|(&p, &t)| {
            let p = if truncated { truncate(p) } else { p };
            (p - t) * (p - t)
        })
        .sum();
    Ok(sum / y.len() as f64)
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Number of supports of size `0..=k` out of `p` columns.
pub fn support_count(p: usize, k: usize) -> u128 {
    (0..=k.min(p)).map(|j| binomial(p, j)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForce {
    pub support: Vec<usize>,
    /// Minimal regularized risk `(1/m)‖Z_Sw − y‖² + λ‖w‖²`.
    pub risk: f64,
}

/// Advances `combo` to the next `r`-combination of `0..p` in lexicographic order.
fn next_combination(combo: &mut [usize], p: usize) -> bool {
    let r = combo.len();
    let Some(i) = (0..r).rev().find(|&i| combo[i] < p - r + i) else {
        return false;
    };
    combo[i] += 1;
    for j in i + 1..r {
        combo[j] = combo[j - 1] + 1;
    }
    true
}

/// Exact regularized subset selection by enumerating every support of size
/// at most `k`. Ties go to the lexicographically smallest support.
pub fn brute_force_rss(design: &DesignMatrix, k: usize, lambda: f64) -> Result<BruteForce> {
    check_lambda(lambda)?;
    let p = design.p();
    let count = support_count(p, k);
    if count > ENUMERATION_LIMIT {
        return Err(Error::Budget {
            subsets: count,
            limit: ENUMERATION_LIMIT,
        });
    }
    let mut best = BruteForce {
        support: Vec::new(),
        risk: 1.0 - regularized_accuracy(design, &[], lambda)?,
    };
    for r in 1..=k.min(p) {
        let mut combo: Vec<usize> = (0..r).collect();
        loop {
            let risk = 1.0 - regularized_accuracy(design, &combo, lambda)?;
            if risk < best.risk || (risk == best.risk && combo < best.support) {
                best = BruteForce {
                    support: combo.clone(),
                    risk,
                };
            }
            if !next_combination(&mut combo, p) {
                break;
            }
        }
    }
    Ok(best)
}

/// Greedy-vs-optimal comparison under the coherence condition
/// `γ < (1 + λ) / (6k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// Largest off-diagonal magnitude of `ZᵀZ / m`.
    pub gamma: f64,
    pub k: usize,
    pub lambda: f64,
    /// `16(k+1)²γ / (1+λ)`.
    pub epsilon: f64,
    pub opt_value: f64,
    pub opt_support: Vec<usize>,
    pub greedy_value: f64,
    pub greedy_support: Vec<usize>,
    /// `(1+ε)·opt − 16(k+1)²γλ/(1+λ)²`.
    pub bound_rhs: f64,
    pub condition_met: bool,
    pub holds: bool,
}

/// Runs full greedy selection (no early stop) and exact enumeration at
/// budget `k` and evaluates the approximation bound.
pub fn check_approximation_bound(
    design: &DesignMatrix,
    k: usize,
    lambda: f64,
) -> Result<BoundReport> {
    let opt = brute_force_rss(design, k, lambda)?;
    let sel = greedy_select(
        design,
        &SelectConfig {
            k,
            lambda,
            delta: 0.0,
            strategy: SearchStrategy::Full,
        },
    )?;
    let greedy_value = regularized_risk(design, &sel.weights, lambda);
    let gamma = design.coherence();
    let kk = (k + 1) as f64;
    let factor = 16.0 * kk * kk * gamma;
    let epsilon = factor / (1.0 + lambda);
    let bound_rhs =
        (1.0 + epsilon) * opt.risk - factor * lambda / ((1.0 + lambda) * (1.0 + lambda));
    Ok(BoundReport {
        gamma,
        k,
        lambda,
        epsilon,
        opt_value: opt.risk,
        opt_support: opt.support,
        greedy_value,
        greedy_support: sel.support,
        bound_rhs,
        condition_met: gamma < (1.0 + lambda) / (6.0 * k as f64),
        holds: greedy_value <= bound_rhs + BOUND_SLACK,
    })
}

/// Computable ingredients of the norm bound and generalization bounds for a
/// fitted selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormBoundDiagnostics {
    /// `λ‖w‖² + R̂(T∘h)` on the training set.
    pub objective: f64,
    /// `objective ≤ 1` (within slack).
    pub norm_bound_holds: bool,
    /// Truncated empirical risk of each source on the training set.
    pub source_risks: Vec<f64>,
    /// `min_j R̂(h_j) + λ` over single sources.
    pub singleton_bound: Option<f64>,
    /// `(1/|S|)Σ_{j∈S} R̂(h_j) + λ/|S|` over the selected sources.
    pub selected_bound: Option<f64>,
    /// Smaller of the two: an upper bound on the minimum over all source subsets.
    pub source_bound: Option<f64>,
    /// `max_j max_i h_j(xᵢ)²` on the training set.
    pub tau_inf: f64,
    /// Truncated risk of the source part of the fitted combination alone.
    pub r_src: f64,
    pub k: usize,
    pub lambda: f64,
    pub m: usize,
}

/// `source_preds` holds the raw source predictions used to build `design`
/// (column `j` is source `j`).
pub fn check_norm_bounds(
    selection: &SelectionResult,
    design: &DesignMatrix,
    source_preds: &DMatrix<f64>,
) -> Result<NormBoundDiagnostics> {
    let m = design.m();
    if source_preds.nrows() != m {
        return Err(Error::Dimension(format!(
            "{} prediction rows for m = {m}",
            source_preds.nrows()
        )));
    }
    let lambda = selection.lambda;
    let y: Vec<f64> = design.y().iter().copied().collect();
    let fitted: Vec<f64> = selection.weights.apply(design).iter().copied().collect();
    let objective = lambda * selection.weights.norm_squared() + empirical_risk(&fitted, &y, true)?;

    let source_risks = source_preds
        .column_iter()
        .map(|c| empirical_risk(c.as_slice(), &y, true))
        .collect::<Result<Vec<_>>>()?;
    let singleton_bound = source_risks
        .iter()
        .copied()
        .reduce(f64::min)
        .map(|r| r + lambda);

    let mut src_part = DVector::zeros(m);
    let mut selected_sources = Vec::new();
    for &(j, w) in selection.weights.entries() {
        if let ColumnOrigin::Source(s) = design.origin()[j] {
            if s >= source_preds.ncols() {
                return Err(Error::Dimension(format!(
                    "design column {j} refers to source {s}, only {} given",
                    source_preds.ncols()
                )));
            }
            selected_sources.push(s);
            src_part.axpy(w, &design.column(j), 1.0);
        }
    }
    let selected_bound = (!selected_sources.is_empty()).then(|| {
        let n = selected_sources.len() as f64;
        selected_sources
            .iter()
            .map(|&s| source_risks[s])
            .sum::<f64>()
            / n
            + lambda / n
    });
    let source_bound = match (singleton_bound, selected_bound) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    let tau_inf = source_preds.iter().fold(0.0f64, |acc, v| acc.max(v * v));
    let r_src = empirical_risk(src_part.as_slice(), &y, true)?;

    Ok(NormBoundDiagnostics {
        objective,
        norm_bound_holds: objective <= 1.0 + BOUND_SLACK,
        source_risks,
        singleton_bound,
        selected_bound,
        source_bound,
        tau_inf,
        r_src,
        k: selection.k,
        lambda,
        m,
    })
}
