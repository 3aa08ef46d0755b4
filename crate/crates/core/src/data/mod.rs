//! Datasets, source hypotheses, CSV I/O and synthetic transfer tasks.

mod csv_io;
mod sources;
mod synth;

pub use csv_io::{
    load_dataset_csv, load_predictions_csv, load_sources_csv, read_dataset, read_sources,
    save_dataset_csv, save_sources_csv, write_dataset, write_sources,
};
pub use sources::{SourceEnsemble, SourceHypothesis};
pub use synth::{synth_transfer_task, SynthConfig};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::validate_labels;

/// Labeled examples: `m×d` raw features and ±1 labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: Vec<f64>, feature_names: Vec<String>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::Dimension(format!(
                "{} feature rows but {} labels",
                x.nrows(),
                y.len()
            )));
        }
        if feature_names.len() != x.ncols() {
            return Err(Error::Dimension(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                x.ncols()
            )));
        }
        if let Some((i, _)) = x.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite feature at row {}, column {}",
                i % x.nrows(),
                i / x.nrows()
            )));
        }
        validate_labels(&y)?;
        Ok(Self {
            x,
            y,
            feature_names,
        })
    }

    /// Dataset with generated feature names `x1..xd`.
    pub fn unnamed(x: DMatrix<f64>, y: Vec<f64>) -> Result<Self> {
        let names = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
        Self::new(x, y, names)
    }

    pub fn m(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn count(&self, label: f64) -> usize {
        self.y.iter().filter(|&&v| v == label).count()
    }

    /// Rows at `idx`, in that order.
    pub fn rows(&self, idx: &[usize]) -> Self {
        Self {
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }
}

/// Train/test pair sharing one pool of sources.
#[derive(Debug, Clone)]
pub struct TransferTask {
    pub train: Dataset,
    pub test: Dataset,
    pub sources: SourceEnsemble,
    /// Indices of sources built from the target concept (synthetic tasks only).
    pub ground_truth: Option<Vec<usize>>,
}

/// Appends `extra_dims` standard-normal columns named `noise1..`.
/// Existing columns are copied bit-for-bit.
pub fn inject_noise(data: &Dataset, extra_dims: usize, seed: u64) -> Dataset {
    if extra_dims == 0 {
        return data.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (m, d) = data.x.shape();
    let mut x = DMatrix::zeros(m, d + extra_dims);
    x.columns_mut(0, d).copy_from(&data.x);
    for v in x.columns_mut(d, extra_dims).iter_mut() {
        *v = StandardNormal.sample(&mut rng);
    }
    let mut feature_names = data.feature_names.clone();
    feature_names.extend((1..=extra_dims).map(|j| format!("noise{j}")));
    Dataset {
        x,
        y: data.y.clone(),
        feature_names,
    }
}

/// Counts for a stratified train/test draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train_pos: usize,
    pub train_neg: usize,
    pub test_pos: usize,
    pub test_neg: usize,
}

/// Row indices of a disjoint stratified train/test draw over `labels`.
pub fn split_indices(
    labels: &[f64],
    counts: SplitCounts,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] > 0.0).collect();
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] < 0.0).collect();
    let need_pos = counts.train_pos + counts.test_pos;
    let need_neg = counts.train_neg + counts.test_neg;
    if pos.len() < need_pos || neg.len() < need_neg {
        return Err(Error::Validation(format!(
            "pool has {} positives and {} negatives; split needs {need_pos} and {need_neg}",
            pos.len(),
            neg.len()
        )));
    }
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let train: Vec<usize> = pos[..counts.train_pos]
        .iter()
        .chain(&neg[..counts.train_neg])
        .copied()
        .collect();
    let test: Vec<usize> = pos[counts.train_pos..need_pos]
        .iter()
        .chain(&neg[counts.train_neg..need_neg])
        .copied()
        .collect();
    Ok((train, test))
}

/// Disjoint stratified draw of train and test rows from `pool`.
pub fn make_binary_split(
    pool: &Dataset,
    counts: SplitCounts,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(&pool.y, counts, seed)?;
    Ok((pool.rows(&train), pool.rows(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool() -> Dataset {
        let m = 40;
        let x = DMatrix::from_fn(m, 2, |i, j| (i * 3 + j) as f64);
        let y = (0..m)
            .map(|i| if i % 3 == 0 { 1.0 } else { -1.0 })
            .collect();
        Dataset::unnamed(x, y).unwrap()
    }

    #[test]
    fn zero_noise_is_identity() {
        let p = pool();
        assert_eq!(inject_noise(&p, 0, 3), p);
    }

    #[test]
    fn noise_appends_and_preserves_prefix() {
        let p = pool();
        let n = inject_noise(&p, 10, 3);
        assert_eq!(n.d(), p.d() + 10);
        assert_eq!(n.x.columns(0, p.d()), p.x);
        let block = n.x.columns(p.d(), 10);
        let mean = block.iter().sum::<f64>() / block.len() as f64;
        assert!(mean.abs() < 0.2, "{mean}");
        assert_eq!(inject_noise(&p, 10, 3), n);
        assert_ne!(inject_noise(&p, 10, 4), n);
    }

    #[test]
    fn split_counts_and_disjointness() {
        let p = pool();
        let counts = SplitCounts {
            train_pos: 2,
            train_neg: 10,
            test_pos: 5,
            test_neg: 5,
        };
        let (train, test) = make_binary_split(&p, counts, 7).unwrap();
        assert_eq!((train.count(1.0), train.count(-1.0)), (2, 10));
        assert_eq!((test.count(1.0), test.count(-1.0)), (5, 5));
        // Row i has first feature 3i, so features identify rows.
        let ids = |d: &Dataset| d.x.column(0).iter().map(|v| *v as i64).collect::<Vec<_>>();
        let a = ids(&train);
        assert!(ids(&test).iter().all(|v| !a.contains(v)));
        let (train2, _) = make_binary_split(&p, counts, 7).unwrap();
        assert_eq!(train, train2);
    }

    #[test]
    fn split_rejects_small_pool() {
        let counts = SplitCounts {
            train_pos: 10,
            train_neg: 10,
            test_pos: 10,
            test_neg: 0,
        };
        assert!(matches!(
            make_binary_split(&pool(), counts, 1),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::unnamed(DMatrix::zeros(2, 1), vec![1.0]).is_err());
        assert!(Dataset::unnamed(DMatrix::zeros(2, 1), vec![1.0, 2.0]).is_err());
        let mut x = DMatrix::zeros(2, 1);
        x[(1, 0)] = f64::NAN;
        assert!(Dataset::unnamed(x, vec![1.0, -1.0]).is_err());
    }
}
