use serde::Serialize;

use crate::engine::{InitialProfile, Walk, WalkState};
use crate::error::{Error, Result};
use crate::kernel::HalfOffset;
use crate::scalar::Scalar;
use crate::Kernel;

const BATCHES: usize = 32;

/// Sample moments of `eta(e + 1/2) - eta(e - 1/2)` at one edge offset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EdgeMoments {
    pub offset: HalfOffset,
    pub mean: f64,
    /// Batch-means standard error of `mean`.
    pub stderr: f64,
    pub variance: f64,
    pub excess_kurtosis: f64,
    /// Correlation with the next edge to the right.
    pub lag1_correlation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentTable {
    pub kernel: String,
    pub steps: u64,
    pub burn_in: u64,
    pub seed: u64,
    pub edges: Vec<EdgeMoments>,
    /// Time average of `eta(x)` seen from the walker.
    pub mean_eta: Vec<(i64, f64)>,
}

impl MomentTable {
    pub fn edge(&self, offset: HalfOffset) -> Option<&EdgeMoments> {
        self.edges.iter().find(|e| e.offset == offset)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentConfig {
    pub steps: u64,
    pub burn_in: u64,
    pub seed: u64,
    /// Edges `+-1/2, ..., +-(span - 1/2)` are tabulated.
    pub span: i64,
    pub antithetic: bool,
}

impl MomentConfig {
    pub fn new(steps: u64, burn_in: u64, seed: u64) -> Self {
        MomentConfig { steps, burn_in, seed, span: 3, antithetic: false }
    }
}

#[derive(Clone, Default)]
struct Accumulator {
    n: f64,
    s1: f64,
    s2: f64,
    s3: f64,
    s4: f64,
    cross: f64,
    batches: Vec<f64>,
}

/// Runs the walk and tabulates the second differences of the local time
/// around the walker. Only defined on the line `3a + b = 0`.
pub fn gradient_chain_moments(kernel: &Kernel, config: &MomentConfig) -> Result<MomentTable> {
    let on_line = kernel
        .symmetric_ab()
        .is_some_and(|(a, b)| f64::sums_to_zero(&(3.0 * a + b), &(3.0 * a.abs() + b.abs())));
    if !on_line {
        return Err(Error::NotApplicable(format!("kernel {kernel} is not on the line a = -b/3")));
    }
    if config.steps == 0 || config.span < 1 {
        return Err(Error::Config("moment table needs steps >= 1 and span >= 1".into()));
    }

    let span = config.span;
    // eta on sites -span..=span, gradients on the 2*span edges between them.
    let mut eta = vec![0.0; (2 * span + 1) as usize];
    let mut grad = vec![0.0; (2 * span) as usize];
    let mut acc = vec![Accumulator::default(); grad.len()];
    let mut eta_sum = vec![0.0; eta.len()];
    let batch_len = (config.steps / BATCHES as u64).max(1);
    let mut batch_sums = vec![0.0; grad.len()];

    let state = WalkState::new(0, InitialProfile::zero(), config.seed);
    let mut walk = Walk::new(kernel, state).with_antithetic(config.antithetic);
    for _ in 0..config.burn_in {
        walk.step()?;
    }
    for t in 0..config.steps {
        walk.step()?;
        let s = walk.state();
        for (i, x) in (-span..=span).enumerate() {
            let site = s.position + x;
            eta[i] = s.profile.value(site) - s.profile.value(site - 1);
            eta_sum[i] += eta[i];
        }
        for i in 0..grad.len() {
            grad[i] = eta[i + 1] - eta[i];
        }
        for (i, a) in acc.iter_mut().enumerate() {
            let g = grad[i];
            let g2 = g * g;
            a.n += 1.0;
            a.s1 += g;
            a.s2 += g2;
            a.s3 += g2 * g;
            a.s4 += g2 * g2;
            if i + 1 < grad.len() {
                a.cross += g * grad[i + 1];
            }
            batch_sums[i] += g;
        }
        if (t + 1) % batch_len == 0 {
            for (a, b) in acc.iter_mut().zip(batch_sums.iter_mut()) {
                a.batches.push(*b / batch_len as f64);
                *b = 0.0;
            }
        }
    }

    let moments: Vec<(f64, f64)> = acc.iter().map(|a| (a.s1 / a.n, a.s2 / a.n - (a.s1 / a.n).powi(2))).collect();
    let edges = acc
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let (mean, var) = moments[i];
            let m4 = a.s4 / a.n - 4.0 * mean * a.s3 / a.n + 6.0 * mean * mean * a.s2 / a.n - 3.0 * mean.powi(4);
            let kurt = if var > 0.0 { m4 / (var * var) - 3.0 } else { f64::NAN };
            let lag1 = match moments.get(i + 1) {
                Some(&(mean2, var2)) if var > 0.0 && var2 > 0.0 => {
                    (a.cross / a.n - mean * mean2) / (var * var2).sqrt()
                }
                _ => f64::NAN,
            };
            let k = a.batches.len() as f64;
            let stderr = if a.batches.len() > 1 {
                let bm = a.batches.iter().sum::<f64>() / k;
                (a.batches.iter().map(|b| (b - bm).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt()
            } else {
                f64::NAN
            };
            // Edge between sites x and x + 1 is at offset x + 1/2.
            let offset = HalfOffset::above((i as i64 - span) as i32);
            EdgeMoments { offset, mean, stderr, variance: var, excess_kurtosis: kurt, lag1_correlation: lag1 }
        })
        .collect();

    Ok(MomentTable {
        kernel: kernel.literal(),
        steps: config.steps,
        burn_in: config.burn_in,
        seed: config.seed,
        edges,
        mean_eta: (-span..=span).zip(eta_sum).map(|(x, s)| (x, s / config.steps as f64)).collect(),
    })
}
