use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::method::Method;
use crate::error::{Error, Result};
use crate::math::DesignMatrix;
use crate::selector::{
    greedy_select, SearchStrategy, SelectConfig, DEFAULT_LAMBDA, DEFAULT_SAMPLE_COUNT,
};

/// Sweep over the candidate count `p` at fixed `m` and `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimingConfig {
    pub m: usize,
    pub k: usize,
    pub ps: Vec<usize>,
    pub lambda: f64,
    pub samples: usize,
    /// Each point is the minimum over this many fits.
    pub repeats: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            m: 20,
            k: 10,
            ps: vec![500, 5000],
            lambda: DEFAULT_LAMBDA,
            samples: DEFAULT_SAMPLE_COUNT,
            repeats: 5,
            seed: 0,
            methods: vec![Method::Greedytl, Method::Greedytl59],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingPoint {
    pub method: Method,
    pub p: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingSlope {
    pub method: Method,
    /// Least-squares slope of seconds against `p`.
    pub seconds_per_candidate: f64,
    /// Time at the largest `p` over time at the smallest.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub config: TimingConfig,
    pub points: Vec<TimingPoint>,
    pub slopes: Vec<TimingSlope>,
}

impl TimingRecord {
    pub fn seconds(&self, method: Method, p: usize) -> Option<f64> {
        self.points
            .iter()
            .find(|t| t.method == method && t.p == p)
            .map(|t| t.seconds)
    }

    pub fn slope(&self, method: Method) -> Option<&TimingSlope> {
        self.slopes.iter().find(|s| s.method == method)
    }
}

/// Standard-normal `m×p` design with balanced ±1 labels.
pub fn random_timing_design(m: usize, p: usize, seed: u64) -> Result<DesignMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(m, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y: Vec<f64> = (0..m)
        .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    DesignMatrix::assemble(&x, &DMatrix::zeros(m, 0), &y)
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Times the selection call alone on pre-built designs, sequentially on
/// the calling thread. Early stopping is disabled so every fit makes `k`
/// selections.
pub fn timing_profile(config: &TimingConfig) -> Result<TimingRecord> {
    let mut ps = config.ps.clone();
    ps.sort_unstable();
    ps.dedup();
    if ps.len() < 2 {
        return Err(Error::Parameter(
            "timing needs at least two distinct values of p".into(),
        ));
    }
    if config.repeats == 0 {
        return Err(Error::Parameter("repeats must be at least 1".into()));
    }
    if ps[0] < config.k {
        return Err(Error::Parameter(format!(
            "every p must be at least k = {}",
            config.k
        )));
    }
    let mut runs = Vec::new();
    for &p in &ps {
        let design = random_timing_design(config.m, p, config.seed.wrapping_add(p as u64))?;
        for &method in &config.methods {
            let strategy = match method {
                Method::Greedytl => SearchStrategy::Full,
                Method::Greedytl59 => SearchStrategy::Randomized {
                    sample_count: config.samples,
                    seed: config.seed,
                },
                other => {
                    return Err(Error::Parameter(format!(
                        "timing supports greedytl and greedytl59, not {other}"
                    )))
                }
            };
            let cfg = SelectConfig {
                k: config.k,
                lambda: config.lambda,
                delta: 0.0,
                strategy,
            };
            // Warm-up fit, untimed.
            std::hint::black_box(greedy_select(&design, &cfg)?);
            runs.push((method, p, design.clone(), cfg, f64::INFINITY));
        }
    }
    // Repeats are interleaved across points so a transient slowdown
    // affects every point alike.
    for _ in 0..config.repeats {
        for (_, _, design, cfg, best) in runs.iter_mut() {
            let start = Instant::now();
            let sel = greedy_select(design, cfg)?;
            *best = best.min(start.elapsed().as_secs_f64());
            std::hint::black_box(sel);
        }
    }
    let points: Vec<TimingPoint> = runs
        .into_iter()
        .map(|(method, p, _, _, seconds)| TimingPoint { method, p, seconds })
        .collect();
    let slopes = config
        .methods
        .iter()
        .map(|&method| {
            let (xs, ys): (Vec<f64>, Vec<f64>) = points
                .iter()
                .filter(|t| t.method == method)
                .map(|t| (t.p as f64, t.seconds))
                .unzip();
            TimingSlope {
                method,
                seconds_per_candidate: least_squares_slope(&xs, &ys),
                ratio: ys[ys.len() - 1] / ys[0],
            }
        })
        .collect();
    Ok(TimingRecord {
        config: TimingConfig {
            ps,
            ..config.clone()
        },
        points,
        slopes,
    })
}
