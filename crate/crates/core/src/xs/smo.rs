//! Sequential minimal optimisation for the soft-margin SVM dual
//!
//!   min_a  1/2 a'Qa - 1'a   s.t. 0 <= a_i <= C,  y'a = 0,   Q_ij = y_i y_j K_ij
//!
//! using second-order working-set selection without shrinking.

use super::kernel::KernelMatrix;
use super::XsError;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
}

impl SmoSolution {
    /// `f(x_i) = sum_j a_j y_j K_ij + b` for every training row.
    pub fn decision_values(&self, k: &KernelMatrix, labels: &[f64]) -> Vec<f64> {
        (0..k.len())
            .map(|i| {
                let row = k.row(i);
                self.alphas
                    .iter()
                    .zip(labels)
                    .zip(row)
                    .map(|((a, y), kij)| a * y * kij)
                    .sum::<f64>()
                    + self.bias
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoOptions {
    /// Stopping tolerance on the maximal KKT violation.
    pub tol: f64,
    /// `None` means `max(10_000_000, 100 n)`.
    pub max_iterations: Option<usize>,
}

impl Default for SmoOptions {
    fn default() -> Self {
        SmoOptions {
            tol: 1e-3,
            max_iterations: None,
        }
    }
}

pub fn smo_solve(
    k: &KernelMatrix,
    labels: &[f64],
    c: f64,
    tol: f64,
) -> Result<SmoSolution, XsError> {
    smo_solve_with(
        k,
        labels,
        c,
        &SmoOptions {
            tol,
            ..SmoOptions::default()
        },
    )
}

pub fn smo_solve_with(
    k: &KernelMatrix,
    labels: &[f64],
    c: f64,
    opts: &SmoOptions,
) -> Result<SmoSolution, XsError> {
    let n = k.len();
    if labels.len() != n {
        return Err(XsError::DimensionMismatch {
            expected: n,
            found: labels.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
        return Err(XsError::InvalidLabel(bad));
    }
    if !labels.contains(&1.0) || !labels.contains(&-1.0) {
        return Err(XsError::SingleClass);
    }
    if !(c > 0.0) {
        return Err(XsError::InvalidParameter(format!("C must be positive, got {c}")));
    }
    if !k.is_symmetric(1e-12) {
        return Err(XsError::NonSymmetricKernel);
    }

    let y = labels;
    let max_iter = opts.max_iterations.unwrap_or((100 * n).max(10_000_000));
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let q = |i: usize, j: usize| y[i] * y[j] * k.get(i, j);

    let mut iter = 0;
    loop {
        let Some((i, j)) = select_working_set(k, y, &alpha, &grad, c, opts.tol) else {
            break;
        };
        if iter >= max_iter {
            let best = SmoSolution {
                bias: bias(y, &alpha, &grad, c),
                alphas: alpha,
                iterations: iter,
            };
            return Err(XsError::MaxPassesExceeded {
                best: Box::new(best),
            });
        }
        iter += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (kii, kjj, kij) = (k.get(i, i), k.get(j, j), k.get(i, j));
        if y[i] != y[j] {
            let quad = (kii + kjj + 2.0 * q(i, j)).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (kii + kjj - 2.0 * kij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
    }

    Ok(SmoSolution {
        bias: bias(y, &alpha, &grad, c),
        alphas: alpha,
        iterations: iter,
    })
}

fn in_up(y: f64, a: f64, c: f64) -> bool {
    (y > 0.0 && a < c) || (y < 0.0 && a > 0.0)
}

fn in_low(y: f64, a: f64, c: f64) -> bool {
    (y > 0.0 && a > 0.0) || (y < 0.0 && a < c)
}

/// Most-violating `i`, then the `j` giving the largest second-order
/// decrease. `None` once `m(a) - M(a) < tol`.
fn select_working_set(
    k: &KernelMatrix,
    y: &[f64],
    alpha: &[f64],
    grad: &[f64],
    c: f64,
    tol: f64,
) -> Option<(usize, usize)> {
    let n = y.len();
    let mut gmax = f64::NEG_INFINITY;
    let mut i_sel = None;
    for t in 0..n {
        if in_up(y[t], alpha[t], c) {
            let v = -y[t] * grad[t];
            if v > gmax {
                gmax = v;
                i_sel = Some(t);
            }
        }
    }
    let i = i_sel?;

    let mut gmin = f64::INFINITY;
    let mut best_obj = f64::INFINITY;
    let mut j_sel = None;
    for t in 0..n {
        if !in_low(y[t], alpha[t], c) {
            continue;
        }
        let v = -y[t] * grad[t];
        gmin = gmin.min(v);
        let b = gmax - v;
        if b > 0.0 {
            let a = (k.get(i, i) + k.get(t, t) - 2.0 * k.get(i, t)).max(TAU);
            let obj = -(b * b) / a;
            if obj < best_obj {
                best_obj = obj;
                j_sel = Some(t);
            }
        }
    }
    if gmax - gmin < tol {
        return None;
    }
    j_sel.map(|j| (i, j))
}

/// Average of `-y_i G_i` over free vectors, else the midpoint of the
/// feasible interval.
fn bias(y: &[f64], alpha: &[f64], grad: &[f64], c: f64) -> f64 {
    let mut free_sum = 0.0;
    let mut free = 0usize;
    let mut m_up = f64::NEG_INFINITY;
    let mut m_low = f64::INFINITY;
    for t in 0..y.len() {
        let v = -y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            free_sum += v;
            free += 1;
        }
        if in_up(y[t], alpha[t], c) {
            m_up = m_up.max(v);
        }
        if in_low(y[t], alpha[t], c) {
            m_low = m_low.min(v);
        }
    }
    if free > 0 {
        free_sum / free as f64
    } else {
        (m_up + m_low) / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xs::kernel::Kernel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// KKT check at tolerance `tol` using the solution's own decision values.
    pub(crate) fn kkt_holds(k: &KernelMatrix, y: &[f64], sol: &SmoSolution, c: f64, tol: f64) -> bool {
        let f = sol.decision_values(k, y);
        sol.alphas.iter().zip(y).zip(&f).all(|((&a, &yi), &fi)| {
            let m = yi * fi;
            if a <= 0.0 {
                m >= 1.0 - tol
            } else if a >= c {
                m <= 1.0 + tol
            } else {
                (m - 1.0).abs() <= tol
            }
        })
    }

    #[test]
    fn two_point_dual_by_hand() {
        // alpha = 1/2 each, w = 1, b = 0
        let x = vec![vec![-1.0], vec![1.0]];
        let y = [-1.0, 1.0];
        let k = Kernel::Linear.matrix(&x);
        let sol = smo_solve(&k, &y, 1e6, 1e-3).unwrap();
        assert_eq!(sol.alphas, vec![0.5, 0.5]);
        assert_eq!(sol.bias, 0.0);
        assert_eq!(sol.decision_values(&k, &y), vec![-1.0, 1.0]);
    }

    #[test]
    fn xor_with_rbf_is_separable() {
        let x = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let y = [-1.0, -1.0, 1.0, 1.0];
        let k = Kernel::Rbf { gamma: 1.0 }.matrix(&x);
        let sol = smo_solve(&k, &y, 10.0, 1e-3).unwrap();
        for (fi, yi) in sol.decision_values(&k, &y).iter().zip(&y) {
            assert!(fi * yi > 0.0);
        }
    }

    #[test]
    fn kkt_on_random_problems() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..20 {
            let n = rng.random_range(10..=100);
            let d = rng.random_range(1..=5);
            let x: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect();
            let mut y: Vec<f64> = (0..n)
                .map(|i| if x[i][0] + rng.random_range(-1.0..1.0) > 0.0 { 1.0 } else { -1.0 })
                .collect();
            y[0] = 1.0;
            y[1] = -1.0;
            let kernel = if trial % 2 == 0 {
                Kernel::Rbf { gamma: 0.5 }
            } else {
                Kernel::Linear
            };
            let c = [0.1, 1.0, 10.0][trial % 3];
            let k = kernel.matrix(&x);
            let sol = smo_solve(&k, &y, c, 1e-3).unwrap();
            assert!(kkt_holds(&k, &y, &sol, c, 1e-3), "trial {trial}");
            let balance: f64 = sol.alphas.iter().zip(&y).map(|(a, yi)| a * yi).sum();
            assert!(balance.abs() < 1e-6);
            assert!(sol.alphas.iter().all(|&a| (0.0..=c).contains(&a)));
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let k = Kernel::Linear.matrix(&[vec![1.0], vec![2.0]]);
        assert_eq!(smo_solve(&k, &[1.0, 1.0], 1.0, 1e-3), Err(XsError::SingleClass));
        assert_eq!(smo_solve(&k, &[1.0, 0.0], 1.0, 1e-3), Err(XsError::InvalidLabel(0.0)));
        let skew = KernelMatrix::from_rows(&[vec![1.0, 0.5], vec![0.2, 1.0]]).unwrap();
        assert_eq!(
            smo_solve(&skew, &[1.0, -1.0], 1.0, 1e-3),
            Err(XsError::NonSymmetricKernel)
        );
    }

    #[test]
    fn iteration_cap_reports_best_so_far() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
        let y: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let k = Kernel::Rbf { gamma: 1.0 }.matrix(&x);
        let opts = SmoOptions {
            tol: 1e-3,
            max_iterations: Some(2),
        };
        match smo_solve_with(&k, &y, 10.0, &opts) {
            Err(XsError::MaxPassesExceeded { best }) => assert_eq!(best.iterations, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
