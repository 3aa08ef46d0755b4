use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A black-box source hypothesis represented as an affine scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceHypothesis {
    pub name: String,
    pub bias: f64,
    pub weights: Vec<f64>,
}

impl SourceHypothesis {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}

/// Fixed pool of source hypotheses sharing one input width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceEnsemble {
    dim: usize,
    hypotheses: Vec<SourceHypothesis>,
}

impl SourceEnsemble {
    pub fn new(dim: usize, hypotheses: Vec<SourceHypothesis>) -> Result<Self> {
        for h in &hypotheses {
            if h.weights.len() != dim {
                return Err(Error::Dimension(format!(
                    "source '{}' has {} weights, expected {dim}",
                    h.name,
                    h.weights.len()
                )));
            }
            if !h.bias.is_finite() || h.weights.iter().any(|w| !w.is_finite()) {
                return Err(Error::Validation(format!(
                    "source '{}' has non-finite parameters",
                    h.name
                )));
            }
        }
        Ok(Self { dim, hypotheses })
    }

    /// Input width `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn hypotheses(&self) -> &[SourceHypothesis] {
        &self.hypotheses
    }

    /// Raw scores of every source on one input row of width `d`.
    pub fn predict_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::Dimension(format!(
                "sources expect {} inputs, got {}",
                self.dim,
                x.len()
            )));
        }
        Ok(self.hypotheses.iter().map(|h| h.predict(x)).collect())
    }

    /// `m×n` matrix with entry `(i, j) = w_jᵀxᵢ + b_j`.
    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.dim {
            return Err(Error::Dimension(format!(
                "sources expect {} feature columns, got {}",
                self.dim,
                x.ncols()
            )));
        }
        let mut w = DMatrix::zeros(self.dim, self.len());
        for (j, h) in self.hypotheses.iter().enumerate() {
            w.column_mut(j).copy_from_slice(&h.weights);
        }
        let mut out = x * w;
        for (j, h) in self.hypotheses.iter().enumerate() {
            out.column_mut(j).add_scalar_mut(h.bias);
        }
        Ok(out)
    }

    /// `τ∞ = max_j max_i h_j(xᵢ)²` over the rows of `x`.
    pub fn tau_inf(&self, x: &DMatrix<f64>) -> Result<f64> {
        Ok(self.apply(x)?.iter().fold(0.0f64, |acc, v| acc.max(v * v)))
    }
}
