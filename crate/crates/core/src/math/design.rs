use nalgebra::{DMatrix, DVector, DVectorView};
use serde::{Deserialize, Serialize};

use super::scaler::StandardScaler;
use crate::error::{Error, Result};

/// Where a design column came from in the raw `[features | source predictions]` block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ColumnOrigin {
    Feature(usize),
    Source(usize),
}

impl ColumnOrigin {
    pub fn is_source(self) -> bool {
        matches!(self, ColumnOrigin::Source(_))
    }
}

/// Checks that every label is exactly `-1.0` or `+1.0`.
pub fn validate_labels(y: &[f64]) -> Result<()> {
    for (i, &v) in y.iter().enumerate() {
        if v != 1.0 && v != -1.0 {
            return Err(Error::Validation(format!(
                "label at row {i} is {v}, expected -1 or 1"
            )));
        }
    }
    Ok(())
}

/// Standardized augmented design `Z = [X | H]` with labels.
///
/// Columns are stored contiguously (column-major), which is the access
/// pattern of the greedy candidate scan.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    z: DMatrix<f64>,
    y: DVector<f64>,
    origin: Vec<ColumnOrigin>,
    raw_index: Vec<usize>,
    n_features: usize,
    scaler: StandardScaler,
}

impl DesignMatrix {
    /// Concatenates raw features and raw source predictions, then standardizes
    /// all columns jointly. Zero-variance columns are dropped.
    pub fn assemble(
        features: &DMatrix<f64>,
        source_preds: &DMatrix<f64>,
        y: &[f64],
    ) -> Result<Self> {
        let m = y.len();
        if features.nrows() != m || source_preds.nrows() != m {
            return Err(Error::Dimension(format!(
                "row counts disagree: features {}, source predictions {}, labels {m}",
                features.nrows(),
                source_preds.nrows()
            )));
        }
        validate_labels(y)?;
        let d = features.ncols();
        let n = source_preds.ncols();
        let mut raw = DMatrix::zeros(m, d + n);
        raw.columns_mut(0, d).copy_from(features);
        raw.columns_mut(d, n).copy_from(source_preds);

        let scaler = StandardScaler::fit(&raw)?;
        let z = scaler.transform(&raw)?;
        let raw_index = scaler.retained();
        let origin = raw_index
            .iter()
            .map(|&j| {
                if j < d {
                    ColumnOrigin::Feature(j)
                } else {
                    ColumnOrigin::Source(j - d)
                }
            })
            .collect();
        Ok(Self {
            z,
            y: DVector::from_column_slice(y),
            origin,
            raw_index,
            n_features: d,
            scaler,
        })
    }

    /// Example count.
    pub fn m(&self) -> usize {
        self.z.nrows()
    }

    /// Retained column count.
    pub fn p(&self) -> usize {
        self.z.ncols()
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn column(&self, j: usize) -> DVectorView<'_, f64> {
        self.z.column(j)
    }

    pub fn origin(&self) -> &[ColumnOrigin] {
        &self.origin
    }

    /// Index of each design column in the raw `[features | sources]` block.
    pub fn raw_index(&self) -> &[usize] {
        &self.raw_index
    }

    /// Raw feature width `d` (sources start at raw index `d`).
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn scaler(&self) -> &StandardScaler {
        &self.scaler
    }

    /// Design columns whose origin satisfies `keep`.
    pub fn columns_where(&self, keep: impl Fn(ColumnOrigin) -> bool) -> Vec<usize> {
        (0..self.p()).filter(|&j| keep(self.origin[j])).collect()
    }

    /// Keeps only the listed design columns (in the given order). The scaler
    /// is carried over unchanged so raw rows still map onto the subset.
    pub fn restrict(&self, cols: &[usize]) -> Result<Self> {
        if let Some(&bad) = cols.iter().find(|&&j| j >= self.p()) {
            return Err(Error::Dimension(format!(
                "column {bad} out of range for design with {} columns",
                self.p()
            )));
        }
        Ok(Self {
            z: self.z.select_columns(cols),
            y: self.y.clone(),
            origin: cols.iter().map(|&j| self.origin[j]).collect(),
            raw_index: cols.iter().map(|&j| self.raw_index[j]).collect(),
            n_features: self.n_features,
            scaler: self.scaler.clone(),
        })
    }

    /// Standardizes new raw rows with the training statistics and returns
    /// them in this design's column order.
    pub fn transform_raw(
        &self,
        features: &DMatrix<f64>,
        source_preds: &DMatrix<f64>,
    ) -> Result<DMatrix<f64>> {
        let m = features.nrows();
        if source_preds.nrows() != m {
            return Err(Error::Dimension(format!(
                "{m} feature rows but {} prediction rows",
                source_preds.nrows()
            )));
        }
        if features.ncols() != self.n_features
            || features.ncols() + source_preds.ncols() != self.scaler.width()
        {
            return Err(Error::Dimension(format!(
                "design expects {} features and {} source columns, got {} and {}",
                self.n_features,
                self.scaler.width() - self.n_features,
                features.ncols(),
                source_preds.ncols()
            )));
        }
        let means = self.scaler.means();
        let scales = self.scaler.scales();
        let mut out = DMatrix::zeros(m, self.p());
        for (dst, &r) in self.raw_index.iter().enumerate() {
            let src = if r < self.n_features {
                features.column(r)
            } else {
                source_preds.column(r - self.n_features)
            };
            for (o, v) in out.column_mut(dst).iter_mut().zip(src.iter()) {
                *o = (v - means[r]) / scales[r];
            }
        }
        Ok(out)
    }

    /// Sample correlation matrix `Ĉ = ZᵀZ / m` (unit diagonal).
    pub fn correlation(&self) -> DMatrix<f64> {
        self.z.tr_mul(&self.z) / self.m() as f64
    }

    /// Largest absolute off-diagonal entry of `Ĉ`.
    pub fn coherence(&self) -> f64 {
        let c = self.correlation();
        let p = self.p();
        let mut gamma = 0.0f64;
        for i in 0..p {
            for j in 0..p {
                if i != j {
                    gamma = gamma.max(c[(i, j)].abs());
                }
            }
        }
        gamma
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_contract() {
        let x = DMatrix::from_fn(6, 2, |i, j| (i * (j + 2)) as f64 + (i % 2) as f64);
        let h = DMatrix::from_fn(6, 3, |i, j| ((i + j) % 3) as f64 - (i as f64) * 0.1);
        let y = [1.0, -1.0, 1.0, -1.0, 1.0, 1.0];
        let z = DesignMatrix::assemble(&x, &h, &y).unwrap();
        assert!(z.p() <= 5);
        assert_eq!(z.m(), 6);
        for j in 0..z.p() {
            let c = z.column(j);
            assert!(c.mean().abs() < 1e-10);
            assert!((c.norm_squared() / 6.0 - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_source_is_dropped() {
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 4.0]);
        let h = DMatrix::from_row_slice(3, 2, &[0.3, 1.0, 0.3, 2.0, 0.3, 0.5]);
        let z = DesignMatrix::assemble(&x, &h, &[1.0, -1.0, 1.0]).unwrap();
        assert_eq!(z.p(), 2);
        assert_eq!(
            z.origin(),
            &[ColumnOrigin::Feature(0), ColumnOrigin::Source(1)]
        );
        assert_eq!(z.scaler().dropped(), &[1]);
        assert_eq!(z.raw_index(), &[0, 2]);
    }

    #[test]
    fn two_point_example() {
        let x = DMatrix::from_column_slice(2, 1, &[1.0, -1.0]);
        let h = x.clone();
        let z = DesignMatrix::assemble(&x, &h, &[1.0, -1.0]).unwrap();
        assert_eq!(
            z.z(),
            &DMatrix::from_row_slice(2, 2, &[1.0, 1.0, -1.0, -1.0])
        );
    }

    #[test]
    fn rejects_bad_labels_and_shapes() {
        let x = DMatrix::from_column_slice(2, 1, &[1.0, -1.0]);
        let h = DMatrix::zeros(2, 0);
        assert!(matches!(
            DesignMatrix::assemble(&x, &h, &[1.0, 0.0]),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            DesignMatrix::assemble(&x, &h, &[1.0, -1.0, 1.0]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn coherence_of_orthogonal_columns_is_zero() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, 1.0, -1.0, -1.0, 1.0, -1.0, -1.0]);
        let z = DesignMatrix::assemble(&x, &DMatrix::zeros(4, 0), &[1.0, 1.0, -1.0, -1.0]).unwrap();
        assert_eq!(z.coherence(), 0.0);
    }

    #[test]
    fn restrict_keeps_provenance() {
        let x = DMatrix::from_fn(5, 3, |i, j| {
            ((i + 1) * (j + 1)) as f64 + (i * i) as f64 * j as f64
        });
        let h = DMatrix::from_fn(5, 2, |i, j| {
            (i as f64 - 2.0) * (j as f64 + 1.0) + (i % 2) as f64
        });
        let z = DesignMatrix::assemble(&x, &h, &[1.0, -1.0, 1.0, -1.0, 1.0]).unwrap();
        let feats = z.columns_where(|o| !o.is_source());
        let r = z.restrict(&feats).unwrap();
        assert!(r.origin().iter().all(|o| !o.is_source()));
        assert_eq!(r.column(0), z.column(feats[0]));
        assert!(z.restrict(&[99]).is_err());
    }

    #[test]
    fn transform_raw_reproduces_training_rows() {
        let x = DMatrix::from_fn(5, 2, |i, j| {
            (i as f64 - 1.5) * (j as f64 + 0.5) + (i % 2) as f64
        });
        let h = DMatrix::from_fn(5, 2, |i, j| if j == 0 { 3.0 } else { i as f64 * i as f64 });
        let z = DesignMatrix::assemble(&x, &h, &[1.0, -1.0, 1.0, -1.0, 1.0]).unwrap();
        let again = z.transform_raw(&x, &h).unwrap();
        assert!((again - z.z()).norm() < 1e-14);
        let cols = z.columns_where(|o| o != ColumnOrigin::Feature(0));
        let r = z.restrict(&cols).unwrap();
        assert!((r.transform_raw(&x, &h).unwrap() - r.z()).norm() < 1e-14);
        assert!(z.transform_raw(&x, &DMatrix::zeros(5, 1)).is_err());
    }
}
