//! Exact O(n^2) t-SNE.

use super::{check_points, sq_dist, ClusterError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding2D {
    pub points: Vec<[f64; 2]>,
    pub final_kl: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsneOptions {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    /// Iterations run with exaggeration and the initial momentum.
    pub exaggeration_iters: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub entropy_tol: f64,
}

impl Default for TsneOptions {
    fn default() -> Self {
        TsneOptions {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iters: 250,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            entropy_tol: 1e-5,
        }
    }
}

const MIN_GAIN: f64 = 0.01;
const P_FLOOR: f64 = 1e-12;
const MAX_BANDWIDTH_STEPS: usize = 200;

fn validate(points: &[Vec<f64>], perplexity: f64) -> Result<(), ClusterError> {
    if points.len() < 4 {
        return Err(ClusterError::TooFewPoints {
            needed: 4,
            found: points.len(),
        });
    }
    check_points(points)?;
    if !(perplexity > 0.0) || perplexity >= points.len() as f64 {
        return Err(ClusterError::PerplexityTooLarge {
            perplexity,
            n: points.len(),
        });
    }
    Ok(())
}

/// Row-conditional affinities `p(j|i)`, each row calibrated by binary search
/// on the Gaussian precision so its entropy equals `ln(perplexity)`.
pub fn conditional_affinities(
    points: &[Vec<f64>],
    perplexity: f64,
) -> Result<Vec<Vec<f64>>, ClusterError> {
    validate(points, perplexity)?;
    Ok(conditional_rows(points, perplexity, TsneOptions::default().entropy_tol))
}

fn conditional_rows(points: &[Vec<f64>], perplexity: f64, tol: f64) -> Vec<Vec<f64>> {
    let n = points.len();
    let target = perplexity.ln();
    let mut rows = vec![vec![0.0; n]; n];
    for i in 0..n {
        let d: Vec<f64> = (0..n).map(|j| sq_dist(&points[i], &points[j])).collect();
        // squared distances are shifted by the row minimum for stability;
        // the shift cancels on normalisation
        let dmin = (0..n)
            .filter(|&j| j != i)
            .map(|j| d[j])
            .fold(f64::INFINITY, f64::min);
        let mut beta = 1.0;
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        let row = &mut rows[i];
        for _ in 0..MAX_BANDWIDTH_STEPS {
            let mut sum = 0.0;
            let mut weighted = 0.0;
            for j in 0..n {
                if j == i {
                    row[j] = 0.0;
                    continue;
                }
                let shifted = d[j] - dmin;
                let w = (-beta * shifted).exp();
                row[j] = w;
                sum += w;
                weighted += w * shifted;
            }
            // entropy H = ln(sum) + beta * E[d]
            let entropy = sum.ln() + beta * weighted / sum;
            for v in row.iter_mut() {
                *v /= sum;
            }
            let diff = entropy - target;
            if diff.abs() < tol {
                break;
            }
            if diff > 0.0 {
                lo = beta;
                beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = if lo.is_finite() { (beta + lo) / 2.0 } else { beta / 2.0 };
            }
        }
    }
    rows
}

fn joint_affinities(cond: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = cond.len();
    let mut p = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[i][j] = ((cond[i][j] + cond[j][i]) / (2.0 * n as f64)).max(P_FLOOR);
            }
        }
    }
    p
}

/// Student-t kernel numerators and their sum.
fn low_dim_kernel(y: &[[f64; 2]]) -> (Vec<Vec<f64>>, f64) {
    let n = y.len();
    let mut num = vec![vec![0.0; n]; n];
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = y[i][0] - y[j][0];
            let dy = y[i][1] - y[j][1];
            let v = 1.0 / (1.0 + dx * dx + dy * dy);
            num[i][j] = v;
            num[j][i] = v;
            total += 2.0 * v;
        }
    }
    (num, total)
}

/// `KL(P || Q)` for joint affinities `p` and embedding `y`.
pub fn kl_divergence(p: &[Vec<f64>], y: &[[f64; 2]]) -> f64 {
    let (num, total) = low_dim_kernel(y);
    let mut kl = 0.0;
    for i in 0..p.len() {
        for j in 0..p.len() {
            if i != j && p[i][j] > 0.0 {
                let q = (num[i][j] / total).max(P_FLOOR);
                kl += p[i][j] * (p[i][j] / q).ln();
            }
        }
    }
    kl.max(0.0)
}

pub fn tsne_embed(
    points: &[Vec<f64>],
    perplexity: f64,
    seed: u64,
    iters: usize,
) -> Result<Embedding2D, ClusterError> {
    let opts = TsneOptions {
        perplexity,
        iterations: iters,
        ..TsneOptions::default()
    };
    tsne_embed_with(points, seed, &opts)
}

/// Gradient descent with momentum and per-coordinate adaptive gains.
/// `iterations = 0` returns the random initial layout and its KL.
pub fn tsne_embed_with(
    points: &[Vec<f64>],
    seed: u64,
    opts: &TsneOptions,
) -> Result<Embedding2D, ClusterError> {
    validate(points, opts.perplexity)?;
    let n = points.len();
    let cond = conditional_rows(points, opts.perplexity, opts.entropy_tol);
    let p = joint_affinities(&cond);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = Normal::new(0.0, 1e-4).expect("valid normal");
    let mut y: Vec<[f64; 2]> = (0..n)
        .map(|_| [init.sample(&mut rng), init.sample(&mut rng)])
        .collect();
    let mut velocity = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];

    for it in 0..opts.iterations {
        let exaggeration = if it < opts.exaggeration_iters {
            opts.early_exaggeration
        } else {
            1.0
        };
        let momentum = if it < opts.exaggeration_iters {
            opts.initial_momentum
        } else {
            opts.final_momentum
        };
        let (num, total) = low_dim_kernel(&y);
        for i in 0..n {
            let mut grad = [0.0; 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let q = num[i][j] / total;
                let coeff = 4.0 * (exaggeration * p[i][j] - q) * num[i][j];
                grad[0] += coeff * (y[i][0] - y[j][0]);
                grad[1] += coeff * (y[i][1] - y[j][1]);
            }
            for d in 0..2 {
                let same_sign = (grad[d] > 0.0) == (velocity[i][d] > 0.0);
                gains[i][d] = if same_sign {
                    (gains[i][d] * 0.8).max(MIN_GAIN)
                } else {
                    gains[i][d] + 0.2
                };
                velocity[i][d] =
                    momentum * velocity[i][d] - opts.learning_rate * gains[i][d] * grad[d];
            }
        }
        for (yi, vi) in y.iter_mut().zip(&velocity) {
            yi[0] += vi[0];
            yi[1] += vi[1];
        }
        let mean = y.iter().fold([0.0; 2], |acc, v| [acc[0] + v[0], acc[1] + v[1]]);
        for yi in y.iter_mut() {
            yi[0] -= mean[0] / n as f64;
            yi[1] -= mean[1] / n as f64;
        }
    }

    let final_kl = kl_divergence(&p, &y);
    Ok(Embedding2D {
        points: y,
        final_kl,
    })
}
