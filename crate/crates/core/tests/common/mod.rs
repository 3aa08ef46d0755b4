#![allow(dead_code)]

use greedytl::math::DesignMatrix;
use greedytl::oracle::ridge_fit_primal;
use greedytl::selector::SparseWeights;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// ±1 labels with both classes present.
pub fn labels(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    loop {
        let y: Vec<f64> = (0..m)
            .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        if y.iter().any(|&v| v > 0.0) && y.iter().any(|&v| v < 0.0) {
            return y;
        }
    }
}

pub fn gaussian(rng: &mut ChaCha8Rng, m: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, p, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Gaussian features and source predictions with random labels.
pub fn random_design(seed: u64, m: usize, d: usize, n: usize) -> DesignMatrix {
    let mut r = rng(seed);
    let x = gaussian(&mut r, m, d);
    let h = gaussian(&mut r, m, n);
    let y = labels(&mut r, m);
    DesignMatrix::assemble(&x, &h, &y).unwrap()
}

/// Sylvester Hadamard matrix of order `m` (a power of two).
pub fn hadamard(m: usize) -> DMatrix<f64> {
    assert!(m.is_power_of_two());
    let mut h = DMatrix::from_element(1, 1, 1.0);
    while h.nrows() < m {
        let n = h.nrows();
        let mut next = DMatrix::zeros(2 * n, 2 * n);
        next.view_mut((0, 0), (n, n)).copy_from(&h);
        next.view_mut((0, n), (n, n)).copy_from(&h);
        next.view_mut((n, 0), (n, n)).copy_from(&h);
        next.view_mut((n, n), (n, n)).copy_from(&(-&h));
        h = next;
    }
    h
}

/// Greedy selection that re-solves the primal ridge problem for every
/// candidate. Returns the selection sequence and final weights.
pub fn naive_greedy(design: &DesignMatrix, k: usize, lambda: f64) -> (Vec<usize>, SparseWeights) {
    let mut support: Vec<usize> = Vec::new();
    while support.len() < k.min(design.p()) {
        let mut best: Option<(f64, usize)> = None;
        for c in (0..design.p()).filter(|c| !support.contains(c)) {
            let mut s = support.clone();
            s.push(c);
            let acc = greedytl::oracle::regularized_accuracy(design, &s, lambda).unwrap();
            if best.is_none_or(|(b, i)| acc > b || (acc == b && c < i)) {
                best = Some((acc, c));
            }
        }
        support.push(best.unwrap().1);
    }
    let w = ridge_fit_primal(design, &support, lambda).unwrap();
    (support, w)
}

pub fn max_abs_diff(a: &SparseWeights, b: &SparseWeights) -> f64 {
    (a.to_dense() - b.to_dense()).amax()
}
