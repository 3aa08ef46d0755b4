use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{truncate, SelectionResult};
use crate::data::SourceEnsemble;
use crate::error::{Error, Result};
use crate::math::{ColumnOrigin, DesignMatrix, StandardScaler};

/// Fitted target hypothesis `wᵀx + Σ βᵢ hᵢ(x)` over standardized inputs.
///
/// Sources read the leading `sources.dim()` raw feature columns, so a model
/// trained on features with appended columns still evaluates its sources on
/// the original inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetModel {
    pub selection: SelectionResult,
    scaler: StandardScaler,
    raw_index: Vec<usize>,
    origin: Vec<ColumnOrigin>,
    n_features: usize,
    sources: Option<SourceEnsemble>,
    pub truncate: bool,
}

impl TargetModel {
    pub fn new(
        design: &DesignMatrix,
        selection: SelectionResult,
        sources: Option<SourceEnsemble>,
        truncate: bool,
    ) -> Result<Self> {
        if selection.weights.len() != design.p() {
            return Err(Error::Dimension(format!(
                "weights over {} columns, design has {}",
                selection.weights.len(),
                design.p()
            )));
        }
        if let Some(s) = &sources {
            if s.dim() > design.n_features() {
                return Err(Error::Dimension(format!(
                    "sources read {} features, design has {}",
                    s.dim(),
                    design.n_features()
                )));
            }
            if design.n_features() + s.len() != design.scaler().width() {
                return Err(Error::Dimension(format!(
                    "design was built with {} source columns, ensemble has {}",
                    design.scaler().width() - design.n_features(),
                    s.len()
                )));
            }
        }
        Ok(Self {
            selection,
            scaler: design.scaler().clone(),
            raw_index: design.raw_index().to_vec(),
            origin: design.origin().to_vec(),
            n_features: design.n_features(),
            sources,
            truncate,
        })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Number of source columns the model expects alongside the features.
    pub fn n_sources(&self) -> usize {
        self.scaler.width() - self.n_features
    }

    pub fn sources(&self) -> Option<&SourceEnsemble> {
        self.sources.as_ref()
    }

    /// Origins and weights of the selected columns, in selection order.
    pub fn selected(&self) -> Vec<(ColumnOrigin, f64)> {
        self.selection
            .weights
            .entries()
            .iter()
            .map(|&(j, w)| (self.origin[j], w))
            .collect()
    }

    /// `wᵀz` for raw features `x` and raw source predictions `h`.
    pub fn predict_with_preds(&self, x: &[f64], h: &[f64]) -> Result<f64> {
        if x.len() != self.n_features || h.len() != self.n_sources() {
            return Err(Error::Dimension(format!(
                "model expects {} features and {} source predictions, got {} and {}",
                self.n_features,
                self.n_sources(),
                x.len(),
                h.len()
            )));
        }
        let means = self.scaler.means();
        let scales = self.scaler.scales();
        Ok(self
            .selection
            .weights
            .entries()
            .iter()
            .map(|&(j, w)| {
                let r = self.raw_index[j];
                let raw = if r < self.n_features {
                    x[r]
                } else {
                    h[r - self.n_features]
                };
                w * (raw - means[r]) / scales[r]
            })
            .sum())
    }

    /// Untruncated prediction on a raw feature row; sources are evaluated internally.
    pub fn predict_raw(&self, x: &[f64]) -> Result<f64> {
        let h =
            match &self.sources {
                Some(s) => {
                    if x.len() < s.dim() {
                        return Err(Error::Dimension(format!(
                            "sources read {} features, got {}",
                            s.dim(),
                            x.len()
                        )));
                    }
                    s.predict_row(&x[..s.dim()])?
                }
                None if self.n_sources() == 0 => Vec::new(),
                None => return Err(Error::Validation(
                    "model was fitted on precomputed source predictions; use predict_with_preds"
                        .into(),
                )),
            };
        self.predict_with_preds(x, &h)
    }

    /// `T(predict_raw(x))`.
    pub fn predict_truncated(&self, x: &[f64]) -> Result<f64> {
        self.predict_raw(x).map(truncate)
    }

    /// Row-wise predictions honoring the `truncate` flag. `preds` is the raw
    /// source prediction matrix (ignored and recomputed when the model owns
    /// its sources and `preds` is `None`).
    pub fn predict_matrix(
        &self,
        features: &DMatrix<f64>,
        preds: Option<&DMatrix<f64>>,
    ) -> Result<Vec<f64>> {
        let owned;
        let preds = match (preds, &self.sources) {
            (Some(p), _) => p,
            (None, Some(s)) => {
                let lead = features
                    .columns(0, s.dim().min(features.ncols()))
                    .into_owned();
                owned = s.apply(&lead)?;
                &owned
            }
            (None, None) => {
                owned = DMatrix::zeros(features.nrows(), 0);
                &owned
            }
        };
        if preds.nrows() != features.nrows() {
            return Err(Error::Dimension(format!(
                "{} feature rows but {} prediction rows",
                features.nrows(),
                preds.nrows()
            )));
        }
        (0..features.nrows())
            .map(|i| {
                let x: Vec<f64> = features.row(i).iter().copied().collect();
                let h: Vec<f64> = preds.row(i).iter().copied().collect();
                let v = self.predict_with_preds(&x, &h)?;
                Ok(if self.truncate { truncate(v) } else { v })
            })
            .collect()
    }
}
