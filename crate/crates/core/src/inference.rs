//! Logistic regression by Newton-Raphson with Wald inference, and the
//! penalty feature-significance study built on it.

use crate::scaler::ZScaler;
use crate::split::stratified_split;
use crate::technique::{PenaltyFeature, PENALTY_TERM_NAMES};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use std::fmt::Write as _;
use thiserror::Error;

pub const MAX_NEWTON_ITERATIONS: usize = 100;
pub const GRADIENT_TOLERANCE: f64 = 1e-8;
/// Coefficients beyond this magnitude are taken as divergence.
pub const SEPARATION_BOUND: f64 = 30.0;
const MAX_HALVINGS: usize = 40;
const LL_ROUNDING: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InferenceError {
    #[error("need more than {needed} rows, got {found}")]
    TooFewRows { needed: usize, found: usize },
    #[error("row {row} has {found} features, expected {expected}")]
    DimensionMismatch {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value in design matrix")]
    NonFinite,
    #[error("column {column} has zero variance")]
    ZeroVariance { column: usize },
    #[error("coefficients diverged (perfect separation)")]
    PerfectSeparation,
    #[error("information matrix is singular")]
    SingularInformation,
    #[error("Newton iterations did not converge (gradient norm {0:e})")]
    NotConverged(f64),
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn linear(row: &[f64], beta: &[f64]) -> f64 {
    beta[0] + row.iter().zip(&beta[1..]).map(|(x, b)| x * b).sum::<f64>()
}

/// Log-likelihood with an implicit intercept: `beta = [b0, b1, ..., bp]`.
pub fn log_likelihood(x: &[Vec<f64>], y: &[bool], beta: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(row, &yi)| {
            let eta = linear(row, beta);
            if yi {
                -softplus(-eta)
            } else {
                -softplus(eta)
            }
        })
        .sum()
}

/// Gradient of [`log_likelihood`] with respect to `beta`.
pub fn gradient(x: &[Vec<f64>], y: &[bool], beta: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; beta.len()];
    for (row, &yi) in x.iter().zip(y) {
        let r = f64::from(u8::from(yi)) - sigmoid(linear(row, beta));
        g[0] += r;
        for (gj, xj) in g[1..].iter_mut().zip(row) {
            *gj += r * xj;
        }
    }
    g
}

/// Observed information `X' W X` including the intercept column.
fn information(x: &[Vec<f64>], beta: &[f64]) -> DMatrix<f64> {
    let q = beta.len();
    let mut h = DMatrix::zeros(q, q);
    let mut xi = vec![1.0; q];
    for row in x {
        xi[1..].copy_from_slice(row);
        let mu = sigmoid(linear(row, beta));
        let w = mu * (1.0 - mu);
        for a in 0..q {
            for b in 0..=a {
                h[(a, b)] += w * xi[a] * xi[b];
            }
        }
    }
    for a in 0..q {
        for b in 0..a {
            h[(b, a)] = h[(a, b)];
        }
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    /// Intercept first.
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub iterations: usize,
    pub log_likelihood: f64,
    /// Log-likelihood after each accepted Newton step, starting from zero.
    pub trace: Vec<f64>,
}

impl LogisticModel {
    pub fn predict(&self, row: &[f64]) -> f64 {
        sigmoid(linear(row, &self.coefficients))
    }

    pub fn z_values(&self) -> Vec<f64> {
        self.coefficients
            .iter()
            .zip(&self.std_errors)
            .map(|(c, s)| c / s)
            .collect()
    }

    /// Term summaries; `names` covers the non-intercept terms.
    pub fn terms(&self, names: &[&str]) -> Vec<TermSummary> {
        let labels = std::iter::once("(Intercept)").chain(names.iter().copied());
        labels
            .zip(self.coefficients.iter().zip(&self.std_errors))
            .map(|(name, (&c, &s))| {
                let z = c / s;
                TermSummary {
                    term: name.to_string(),
                    coefficient: c,
                    std_error: s,
                    z_value: z,
                    p_value: two_sided_p(z),
                }
            })
            .collect()
    }
}

/// `2 (1 - Phi(|z|))` in the numerically stable `erfc` form.
pub fn two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// Fits `P(y=1) = sigmoid(b0 + x.b)`.
pub fn logistic_fit(x: &[Vec<f64>], y: &[bool]) -> Result<LogisticModel, InferenceError> {
    let p = x.first().map_or(0, Vec::len);
    let n = x.len();
    if n != y.len() {
        return Err(InferenceError::DimensionMismatch {
            row: n.min(y.len()),
            expected: n,
            found: y.len(),
        });
    }
    if n <= p + 1 {
        return Err(InferenceError::TooFewRows {
            needed: p + 1,
            found: n,
        });
    }
    for (i, row) in x.iter().enumerate() {
        if row.len() != p {
            return Err(InferenceError::DimensionMismatch {
                row: i,
                expected: p,
                found: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(InferenceError::NonFinite);
        }
    }
    for c in 0..p {
        let first = x[0][c];
        if x.iter().all(|r| r[c] == first) {
            return Err(InferenceError::ZeroVariance { column: c });
        }
    }

    let mut beta = vec![0.0; p + 1];
    let mut ll = log_likelihood(x, y, &beta);
    let mut trace = vec![ll];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < MAX_NEWTON_ITERATIONS {
        let g = gradient(x, y, &beta);
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm < GRADIENT_TOLERANCE {
            converged = true;
            break;
        }
        let h = information(x, &beta);
        let step = h
            .clone()
            .cholesky()
            .map(|c| c.solve(&DVector::from_vec(g.clone())))
            .or_else(|| h.lu().solve(&DVector::from_vec(g.clone())))
            .ok_or(InferenceError::SingularInformation)?;

        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let cand: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, d)| b + t * d).collect();
            let cll = log_likelihood(x, y, &cand);
            // near the optimum the gain drops below summation rounding
            if cll >= ll - LL_ROUNDING * (1.0 + ll.abs()) {
                beta = cand;
                ll = cll;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        if beta.iter().any(|b| b.abs() > SEPARATION_BOUND) {
            return Err(InferenceError::PerfectSeparation);
        }
        trace.push(ll);
        if !accepted {
            break;
        }
    }
    if !converged {
        let g = gradient(x, y, &beta);
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm >= GRADIENT_TOLERANCE {
            return Err(InferenceError::NotConverged(gnorm));
        }
    }

    let cov = information(x, &beta)
        .try_inverse()
        .ok_or(InferenceError::SingularInformation)?;
    let std_errors: Vec<f64> = (0..=p).map(|i| cov[(i, i)].sqrt()).collect();
    if std_errors.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(InferenceError::SingularInformation);
    }
    Ok(LogisticModel {
        coefficients: beta,
        std_errors,
        iterations,
        log_likelihood: ll,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermSummary {
    pub term: String,
    pub coefficient: f64,
    pub std_error: f64,
    pub z_value: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evaluation {
    /// Fit on the training split, metrics on the held-out split.
    HeldOut,
    /// Fit and metrics on all rows.
    InSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionSummary {
    pub terms: Vec<TermSummary>,
    pub n_train: usize,
    pub n_test: usize,
    pub evaluation: Evaluation,
    pub test_accuracy: f64,
    pub prob_min: f64,
    pub prob_mean: f64,
    pub prob_max: f64,
    pub train_save_rate: f64,
    pub seed: u64,
    pub scaler: ZScaler,
}

impl RegressionSummary {
    /// Coefficient table in the usual `Coefficient | Std. Error | z value | Pr(z)` layout.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<14} {:>12} {:>11} {:>9} {:>10}",
            "", "Coefficient", "Std. Error", "z value", "Pr(z)"
        );
        for t in &self.terms {
            let _ = writeln!(
                s,
                "{:<14} {:>12.4} {:>11.3} {:>9.3} {:>10.3}",
                t.term, t.coefficient, t.std_error, t.z_value, t.p_value
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "n_train {}  n_test {}  ({})",
            self.n_train,
            self.n_test,
            match self.evaluation {
                Evaluation::HeldOut => "held-out",
                Evaluation::InSample => "in-sample",
            }
        );
        let _ = writeln!(s, "accuracy {:.3}", self.test_accuracy);
        let _ = writeln!(
            s,
            "save probability min {:.3}  mean {:.3}  max {:.3}",
            self.prob_min, self.prob_mean, self.prob_max
        );
        s
    }
}

/// One on-target penalty with its pose features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyRecord {
    pub shot_id: String,
    pub feature: PenaltyFeature,
    pub saved: bool,
}

/// Standardises the penalty features, fits on a stratified 70/30 split (or
/// all rows when `all_data`), and evaluates on the held-out rows.
pub fn penalty_study(
    records: &[PenaltyRecord],
    seed: u64,
    all_data: bool,
) -> Result<RegressionSummary, InferenceError> {
    let saved: Vec<bool> = records.iter().map(|r| r.saved).collect();
    let (train_idx, test_idx, evaluation) = if all_data {
        let all: Vec<usize> = (0..records.len()).collect();
        (all.clone(), all, Evaluation::InSample)
    } else {
        let s = stratified_split(&saved, 0.3, seed);
        (s.train, s.test, Evaluation::HeldOut)
    };
    let raw = |idx: &[usize]| -> Vec<Vec<f64>> {
        idx.iter().map(|&i| records[i].feature.to_vec()).collect()
    };
    let train_raw = raw(&train_idx);
    if train_raw.is_empty() {
        return Err(InferenceError::TooFewRows {
            needed: PENALTY_TERM_NAMES.len() + 1,
            found: 0,
        });
    }
    let scaler = ZScaler::fit(&train_raw);
    let x_train = scaler.transform_all(&train_raw);
    let y_train: Vec<bool> = train_idx.iter().map(|&i| saved[i]).collect();
    let model = logistic_fit(&x_train, &y_train)?;

    let x_test = scaler.transform_all(&raw(&test_idx));
    let probs: Vec<f64> = x_test.iter().map(|r| model.predict(r)).collect();
    let correct = probs
        .iter()
        .zip(&test_idx)
        .filter(|(&p, &i)| (p >= 0.5) == saved[i])
        .count();
    let m = probs.len().max(1) as f64;
    Ok(RegressionSummary {
        terms: model.terms(&PENALTY_TERM_NAMES),
        n_train: train_idx.len(),
        n_test: test_idx.len(),
        evaluation,
        test_accuracy: correct as f64 / m,
        prob_min: probs.iter().copied().fold(f64::INFINITY, f64::min),
        prob_mean: probs.iter().sum::<f64>() / m,
        prob_max: probs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        train_save_rate: y_train.iter().filter(|&&s| s).count() as f64 / y_train.len() as f64,
        seed,
        scaler,
    })
}
