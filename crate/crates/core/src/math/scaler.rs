use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Columns whose population standard deviation is at or below this value are
/// dropped instead of standardized.
pub const MIN_SCALE: f64 = 1e-12;

/// Per-column standardization fitted on training data.
///
/// Statistics are kept for every raw column (including dropped ones) so the
/// scaler can be re-applied to raw rows of the original width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardScaler {
    means: Vec<f64>,
    scales: Vec<f64>,
    dropped: Vec<usize>,
}

impl StandardScaler {
    /// Fits means and population (divide-by-m) standard deviations.
    pub fn fit(raw: &DMatrix<f64>) -> Result<Self> {
        let (m, p) = raw.shape();
        if m == 0 || p == 0 {
            return Err(Error::Dimension(format!(
                "cannot fit scaler on a {m}x{p} matrix"
            )));
        }
        if m < 2 {
            return Err(Error::Dimension(format!(
                "scaler needs at least 2 rows, got {m}"
            )));
        }
        let mut means = Vec::with_capacity(p);
        let mut scales = Vec::with_capacity(p);
        let mut dropped = Vec::new();
        for (j, col) in raw.column_iter().enumerate() {
            let mean = col.iter().sum::<f64>() / m as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m as f64;
            let scale = var.sqrt();
            if !scale.is_finite() || !mean.is_finite() {
                return Err(Error::Validation(format!(
                    "column {j} has non-finite values"
                )));
            }
            if scale <= MIN_SCALE {
                dropped.push(j);
            }
            means.push(mean);
            scales.push(scale);
        }
        Ok(Self {
            means,
            scales,
            dropped,
        })
    }

    /// Raw column count the scaler was fitted on.
    pub fn width(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    /// Raw column indices removed for near-zero variance, ascending.
    pub fn dropped(&self) -> &[usize] {
        &self.dropped
    }

    /// Raw column indices that survive standardization, ascending.
    pub fn retained(&self) -> Vec<usize> {
        let mut dropped = self.dropped.iter().peekable();
        (0..self.width())
            .filter(|j| {
                if dropped.peek() == Some(&j) {
                    dropped.next();
                    false
                } else {
                    true
                }
            })
            .collect()
    }

    /// Drops the zero-variance columns and maps the rest to `(x - mean) / scale`.
    pub fn transform(&self, raw: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if raw.ncols() != self.width() {
            return Err(Error::Dimension(format!(
                "scaler fitted on {} columns, got {}",
                self.width(),
                raw.ncols()
            )));
        }
        let retained = self.retained();
        let mut out = DMatrix::zeros(raw.nrows(), retained.len());
        for (dst, &j) in retained.iter().enumerate() {
            let (mean, scale) = (self.means[j], self.scales[j]);
            for (o, v) in out.column_mut(dst).iter_mut().zip(raw.column(j).iter()) {
                *o = (v - mean) / scale;
            }
        }
        Ok(out)
    }

    /// Row version of [`transform`](Self::transform).
    pub fn transform_row(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.width() {
            return Err(Error::Dimension(format!(
                "scaler fitted on {} columns, got a row of {}",
                self.width(),
                raw.len()
            )));
        }
        Ok(self
            .retained()
            .into_iter()
            .map(|j| (raw[j] - self.means[j]) / self.scales[j])
            .collect())
    }
}
