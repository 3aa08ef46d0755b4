use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::sources::{SourceEnsemble, SourceHypothesis};
use super::{Dataset, TransferTask};
use crate::error::{Error, Result};

/// Parameters of a synthetic transfer task.
///
/// The target concept is a random unit direction `u` in feature space.
/// Relevant sources are `u` rotated by a random angle in `[0, max_angle]`
/// towards a random orthogonal direction; distractor sources are random
/// directions orthogonal to `u`, so they carry no target signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub d: usize,
    pub n: usize,
    pub n_relevant: usize,
    pub m_train_pos: usize,
    pub m_train_neg: usize,
    pub m_test: usize,
    /// Std of Gaussian noise added to the concept score before taking the sign.
    pub noise_std: f64,
    /// Largest rotation (radians) between a relevant source and the concept.
    pub max_angle: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            d: 50,
            n: 200,
            n_relevant: 5,
            m_train_pos: 2,
            m_train_neg: 10,
            m_test: 400,
            noise_std: 0.1,
            max_angle: 0.3,
            seed: 0,
        }
    }
}

fn normal_vec(rng: &mut ChaCha8Rng, d: usize) -> DVector<f64> {
    DVector::from_fn(d, |_, _| StandardNormal.sample(rng))
}

/// Random unit vector orthogonal to the unit vector `u`.
fn orthogonal_unit(rng: &mut ChaCha8Rng, u: &DVector<f64>) -> DVector<f64> {
    loop {
        let mut v = normal_vec(rng, u.len());
        let proj = v.dot(u);
        v.axpy(-proj, u, 1.0);
        let norm = v.norm();
        if norm > 1e-8 {
            return v / norm;
        }
    }
}

fn draw_examples(
    rng: &mut ChaCha8Rng,
    concept: &DVector<f64>,
    noise_std: f64,
    pos: usize,
    neg: usize,
) -> (DMatrix<f64>, Vec<f64>) {
    let d = concept.len();
    let mut rows = Vec::with_capacity((pos + neg) * d);
    let mut y = Vec::with_capacity(pos + neg);
    let (mut got_pos, mut got_neg) = (0, 0);
    while got_pos < pos || got_neg < neg {
        let x = normal_vec(rng, d);
        let noise: f64 = StandardNormal.sample(rng);
        let label = if concept.dot(&x) + noise_std * noise >= 0.0 {
            1.0
        } else {
            -1.0
        };
        let keep = if label > 0.0 {
            got_pos < pos
        } else {
            got_neg < neg
        };
        if keep {
            if label > 0.0 {
                got_pos += 1;
            } else {
                got_neg += 1;
            }
            rows.extend(x.iter());
            y.push(label);
        }
    }
    (DMatrix::from_row_slice(pos + neg, d, &rows), y)
}

/// Deterministic synthetic task for the given config (including its seed).
pub fn synth_transfer_task(config: &SynthConfig) -> Result<TransferTask> {
    let c = config;
    if c.d == 0 {
        return Err(Error::Parameter("synthetic task needs d >= 1".into()));
    }
    if c.n_relevant > c.n {
        return Err(Error::Parameter(format!(
            "n_relevant = {} exceeds n = {}",
            c.n_relevant, c.n
        )));
    }
    if c.m_train_pos == 0 || c.m_train_neg == 0 || c.m_test < 2 {
        return Err(Error::Parameter(
            "need at least one training example per class and two test examples".into(),
        ));
    }
    if !(c.noise_std >= 0.0 && c.max_angle >= 0.0) {
        return Err(Error::Parameter(
            "noise_std and max_angle must be non-negative".into(),
        ));
    }
    if c.d == 1 && c.n > c.n_relevant {
        return Err(Error::Parameter("distractor sources need d >= 2".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let concept = {
        let v = normal_vec(&mut rng, c.d);
        let norm = v.norm();
        v / norm
    };

    let mut relevant: Vec<usize> = rand::seq::index::sample(&mut rng, c.n, c.n_relevant).into_vec();
    relevant.sort_unstable();

    let mut hypotheses = Vec::with_capacity(c.n);
    for j in 0..c.n {
        let is_relevant = relevant.binary_search(&j).is_ok();
        let scale: f64 = rng.random_range(0.5..2.0);
        let w = if is_relevant {
            let theta: f64 = rng.random_range(0.0..=c.max_angle);
            if c.d == 1 {
                concept.clone()
            } else {
                let v = orthogonal_unit(&mut rng, &concept);
                &concept * theta.cos() + v * theta.sin()
            }
        } else {
            orthogonal_unit(&mut rng, &concept)
        };
        hypotheses.push(SourceHypothesis {
            name: format!("{}{j}", if is_relevant { "rel" } else { "src" }),
            bias: 0.0,
            weights: (w * scale).iter().copied().collect(),
        });
    }
    let sources = SourceEnsemble::new(c.d, hypotheses)?;

    let (x_train, y_train) = draw_examples(
        &mut rng,
        &concept,
        c.noise_std,
        c.m_train_pos,
        c.m_train_neg,
    );
    let test_pos = c.m_test / 2;
    let (x_test, y_test) = draw_examples(
        &mut rng,
        &concept,
        c.noise_std,
        test_pos,
        c.m_test - test_pos,
    );

    Ok(TransferTask {
        train: Dataset::unnamed(x_train, y_train)?,
        test: Dataset::unnamed(x_test, y_test)?,
        sources,
        ground_truth: Some(relevant),
    })
}
