use super::kernel::{Kernel, KernelMatrix};
use super::platt::{platt_fit, PlattParams, PROB_EPS};
use super::smo::{smo_solve, SmoSolution};
use super::XsError;
use crate::geometry::{PitchPoint, ShotContext};
use crate::scaler::ZScaler;
use crate::split::{stratified_folds, stratified_split};
use crate::technique::TechniqueName;
use serde::{Deserialize, Serialize};

/// distance, angle, pressure, four technique indicators.
pub const XS_FEATURES: usize = 7;

const FOLD_SEED_SALT: u64 = 0x5eed_f01d;
const SCORE_TIE: f64 = 1e-12;

/// Calibrated save probability, strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SaveProbability(f64);

impl SaveProbability {
    pub fn new(p: f64) -> Option<Self> {
        (p > 0.0 && p < 1.0).then_some(SaveProbability(p))
    }

    /// Clamps into `[PROB_EPS, 1 - PROB_EPS]`.
    pub fn clamped(p: f64) -> Self {
        SaveProbability(p.clamp(PROB_EPS, 1.0 - PROB_EPS))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XsInput {
    pub distance: f64,
    pub angle: f64,
    pub under_pressure: bool,
    pub technique: TechniqueName,
}

impl XsInput {
    pub fn new(ctx: &ShotContext, technique: TechniqueName) -> Self {
        XsInput {
            distance: ctx.distance,
            angle: ctx.angle,
            under_pressure: ctx.under_pressure,
            technique,
        }
    }

    /// Model-space vector; only distance and angle are standardised.
    fn encode(&self, scaler: &ZScaler) -> Vec<f64> {
        let cont = scaler.transform(&[self.distance, self.angle]);
        let mut v = Vec::with_capacity(XS_FEATURES);
        v.extend(cont);
        v.push(if self.under_pressure { 1.0 } else { 0.0 });
        for t in TechniqueName::ALL {
            v.push(if t == self.technique { 1.0 } else { 0.0 });
        }
        v
    }
}

/// Anything that scores a shot context under a given technique.
pub trait SaveModel {
    /// Uncalibrated score, increasing in save likelihood.
    fn decision_value(&self, ctx: &ShotContext, technique: TechniqueName) -> Result<f64, XsError>;

    fn save_probability(
        &self,
        ctx: &ShotContext,
        technique: TechniqueName,
    ) -> Result<SaveProbability, XsError>;

    /// Shot locations backing the model, for support counts on maps.
    fn support_locations(&self) -> &[PitchPoint] {
        &[]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XsModel {
    pub kernel: Kernel,
    pub c: f64,
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` per support vector, saves labelled +1.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub platt: PlattParams,
    /// Standardiser for (distance, angle).
    pub scaler: ZScaler,
    pub seed: u64,
    /// Striker locations of the training split.
    pub training_locations: Vec<PitchPoint>,
}

impl XsModel {
    fn decision_raw(&self, x: &[f64]) -> Result<f64, XsError> {
        if self.support_vectors.is_empty() {
            return Err(XsError::UnfittedModel);
        }
        Ok(self
            .support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, c)| c * self.kernel.eval(sv, x))
            .sum::<f64>()
            + self.bias)
    }

    pub fn decision(&self, input: &XsInput) -> Result<f64, XsError> {
        self.decision_raw(&input.encode(&self.scaler))
    }
}

impl SaveModel for XsModel {
    fn decision_value(&self, ctx: &ShotContext, technique: TechniqueName) -> Result<f64, XsError> {
        self.decision(&XsInput::new(ctx, technique))
    }

    fn save_probability(
        &self,
        ctx: &ShotContext,
        technique: TechniqueName,
    ) -> Result<SaveProbability, XsError> {
        let f = self.decision_value(ctx, technique)?;
        Ok(SaveProbability::clamped(self.platt.probability(f)))
    }

    fn support_locations(&self) -> &[PitchPoint] {
        &self.training_locations
    }
}

pub fn predict_xs(
    model: &XsModel,
    ctx: &ShotContext,
    technique: TechniqueName,
) -> Result<SaveProbability, XsError> {
    model.save_probability(ctx, technique)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XsTrainingShot {
    pub shot_id: String,
    pub location: PitchPoint,
    pub context: ShotContext,
    pub technique: TechniqueName,
    pub saved: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaChoice {
    /// `1 / (d * var(X))` over the standardised training matrix.
    Scale,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub rbf: bool,
    pub c: f64,
    /// `None` for the linear kernel.
    pub gamma: Option<GammaChoice>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub point: GridPoint,
    pub kernel: Kernel,
    pub mean_cv_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub test_fraction: f64,
    pub folds: usize,
    pub tol: f64,
    pub c_grid: Vec<f64>,
    pub gamma_grid: Vec<GammaChoice>,
    pub include_linear: bool,
    pub min_shots: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            test_fraction: 0.3,
            folds: 5,
            tol: 1e-3,
            c_grid: vec![0.1, 1.0, 10.0, 100.0],
            gamma_grid: vec![
                GammaChoice::Scale,
                GammaChoice::Fixed(0.01),
                GammaChoice::Fixed(0.1),
                GammaChoice::Fixed(1.0),
            ],
            include_linear: true,
            min_shots: 50,
        }
    }
}

impl TrainOptions {
    /// Grid in preference order: smaller C first, RBF before linear.
    pub fn grid(&self) -> Vec<GridPoint> {
        let mut cs = self.c_grid.clone();
        cs.sort_by(f64::total_cmp);
        let mut out = Vec::new();
        for c in cs {
            for &g in &self.gamma_grid {
                out.push(GridPoint {
                    rbf: true,
                    c,
                    gamma: Some(g),
                });
            }
            if self.include_linear {
                out.push(GridPoint {
                    rbf: false,
                    c,
                    gamma: None,
                });
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XsTraining {
    pub model: XsModel,
    pub selected: GridPoint,
    pub grid: Vec<GridScore>,
    pub test_accuracy: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub train_save_rate: f64,
}

pub fn train_xs(shots: &[XsTrainingShot], seed: u64) -> Result<XsTraining, XsError> {
    train_xs_with(shots, seed, &TrainOptions::default())
}

fn resolve_kernel(point: &GridPoint, gamma_scale: f64) -> Kernel {
    match point.gamma {
        None => Kernel::Linear,
        Some(GammaChoice::Scale) => Kernel::Rbf { gamma: gamma_scale },
        Some(GammaChoice::Fixed(g)) => Kernel::Rbf { gamma: g },
    }
}

/// Solution or, when the iteration cap is hit, the best iterate so far.
fn solve(k: &KernelMatrix, y: &[f64], c: f64, tol: f64) -> Result<SmoSolution, XsError> {
    match smo_solve(k, y, c, tol) {
        Err(XsError::MaxPassesExceeded { best }) => Ok(*best),
        other => other,
    }
}

fn decision_from_rows(
    full: &KernelMatrix,
    train_idx: &[usize],
    y_train: &[f64],
    sol: &SmoSolution,
    target: usize,
) -> f64 {
    train_idx
        .iter()
        .zip(y_train)
        .zip(&sol.alphas)
        .map(|((&j, &yj), &a)| a * yj * full.get(target, j))
        .sum::<f64>()
        + sol.bias
}

pub fn train_xs_with(
    shots: &[XsTrainingShot],
    seed: u64,
    opts: &TrainOptions,
) -> Result<XsTraining, XsError> {
    if shots.len() < opts.min_shots {
        return Err(XsError::TooFewShots {
            needed: opts.min_shots,
            found: shots.len(),
        });
    }
    let saved: Vec<bool> = shots.iter().map(|s| s.saved).collect();
    if saved.iter().all(|&s| s) || saved.iter().all(|&s| !s) {
        return Err(XsError::SingleClass);
    }
    let split = stratified_split(&saved, opts.test_fraction, seed);
    let train: Vec<&XsTrainingShot> = split.train.iter().map(|&i| &shots[i]).collect();
    let test: Vec<&XsTrainingShot> = split.test.iter().map(|&i| &shots[i]).collect();

    let cont: Vec<Vec<f64>> = train
        .iter()
        .map(|s| vec![s.context.distance, s.context.angle])
        .collect();
    let scaler = ZScaler::fit(&cont);
    let encode = |s: &XsTrainingShot| XsInput::new(&s.context, s.technique).encode(&scaler);
    let x_train: Vec<Vec<f64>> = train.iter().map(|s| encode(s)).collect();
    let y_train: Vec<f64> = train.iter().map(|s| if s.saved { 1.0 } else { -1.0 }).collect();
    let train_labels: Vec<bool> = train.iter().map(|s| s.saved).collect();
    let n = x_train.len();

    let flat: Vec<f64> = x_train.iter().flatten().copied().collect();
    let mean = flat.iter().sum::<f64>() / flat.len() as f64;
    let var = flat.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / flat.len() as f64;
    let gamma_scale = if var > 0.0 {
        1.0 / (XS_FEATURES as f64 * var)
    } else {
        1.0
    };

    let folds = stratified_folds(&train_labels, opts.folds, seed ^ FOLD_SEED_SALT);
    let fold_sets: Vec<(Vec<usize>, Vec<usize>)> = (0..opts.folds)
        .map(|f| {
            let fit: Vec<usize> = (0..n).filter(|&i| folds[i] != f).collect();
            let val: Vec<usize> = (0..n).filter(|&i| folds[i] == f).collect();
            (fit, val)
        })
        .collect();

    let grid = opts.grid();
    let mut scores = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, f64, Vec<f64>)> = None;
    let mut gram_cache: Vec<(Kernel, KernelMatrix)> = Vec::new();

    for (gi, point) in grid.iter().enumerate() {
        let kernel = resolve_kernel(point, gamma_scale);
        let cached = gram_cache.iter().position(|(k, _)| *k == kernel);
        let ci = match cached {
            Some(i) => i,
            None => {
                gram_cache.push((kernel, kernel.matrix(&x_train)));
                gram_cache.len() - 1
            }
        };
        let full = &gram_cache[ci].1;

        let mut oof = vec![0.0; n];
        let mut acc_sum = 0.0;
        let mut used_folds = 0;
        for (fit, val) in &fold_sets {
            if val.is_empty() {
                continue;
            }
            let y_fit: Vec<f64> = fit.iter().map(|&i| y_train[i]).collect();
            let sol = solve(&full.submatrix(fit), &y_fit, point.c, opts.tol)?;
            let mut correct = 0;
            for &v in val {
                let f = decision_from_rows(full, fit, &y_fit, &sol, v);
                oof[v] = f;
                if (f > 0.0) == train_labels[v] {
                    correct += 1;
                }
            }
            acc_sum += correct as f64 / val.len() as f64;
            used_folds += 1;
        }
        let mean_acc = acc_sum / used_folds.max(1) as f64;
        scores.push(GridScore {
            point: *point,
            kernel,
            mean_cv_accuracy: mean_acc,
        });
        if best.as_ref().is_none_or(|(_, s, _)| mean_acc > s + SCORE_TIE) {
            best = Some((gi, mean_acc, oof));
        }
    }

    let (bi, _, oof) = best.ok_or_else(|| XsError::InvalidParameter("empty grid".into()))?;
    let selected = grid[bi];
    let kernel = scores[bi].kernel;
    let full = &gram_cache
        .iter()
        .find(|(k, _)| *k == kernel)
        .expect("cached")
        .1;
    let sol = solve(full, &y_train, selected.c, opts.tol)?;
    let platt = platt_fit(&oof, &train_labels)?;

    let mut support_vectors = Vec::new();
    let mut dual_coef = Vec::new();
    for i in 0..n {
        if sol.alphas[i] > 0.0 {
            support_vectors.push(x_train[i].clone());
            dual_coef.push(sol.alphas[i] * y_train[i]);
        }
    }
    let model = XsModel {
        kernel,
        c: selected.c,
        support_vectors,
        dual_coef,
        bias: sol.bias,
        platt,
        scaler: scaler.clone(),
        seed,
        training_locations: train.iter().map(|s| s.location).collect(),
    };

    let mut correct = 0;
    for s in &test {
        let f = model.decision_raw(&encode(s))?;
        if (f > 0.0) == s.saved {
            correct += 1;
        }
    }
    let test_accuracy = if test.is_empty() {
        0.0
    } else {
        correct as f64 / test.len() as f64
    };
    let train_save_rate = train_labels.iter().filter(|&&s| s).count() as f64 / n as f64;

    Ok(XsTraining {
        model,
        selected,
        grid: scores,
        test_accuracy,
        n_train: n,
        n_test: test.len(),
        train_save_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shot_context;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn threshold_shots(n: usize, seed: u64) -> Vec<XsTrainingShot> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let loc = PitchPoint::new(rng.random_range(100.0..118.0), rng.random_range(25.0..55.0));
                let context = shot_context(loc, rng.random_bool(0.3)).unwrap();
                XsTrainingShot {
                    shot_id: format!("t{i}"),
                    location: loc,
                    context,
                    technique: TechniqueName::ALL[i % 4],
                    saved: context.distance > 10.0,
                }
            })
            .collect()
    }

    #[test]
    fn learns_a_distance_threshold() {
        let shots = threshold_shots(120, 1);
        let t = train_xs(&shots, 0).unwrap();
        // margin oracle: the rule is deterministic in distance
        let margin_ok = shots.iter().all(|s| (s.context.distance - 10.0).abs() > 1e-6);
        assert!(margin_ok);
        assert!(t.test_accuracy >= 0.97, "{}", t.test_accuracy);
        assert_eq!(t.n_train + t.n_test, 120);
        assert_eq!(t.n_test, 36);
        assert!(t.model.platt.a < 0.0);
    }

    #[test]
    fn dual_coefficients_are_balanced_and_bounded() {
        let shots = threshold_shots(80, 4);
        let t = train_xs(&shots, 2).unwrap();
        let sum: f64 = t.model.dual_coef.iter().sum();
        assert!(sum.abs() < 1e-6);
        assert!(t.model.dual_coef.iter().all(|c| c.abs() <= t.model.c + 1e-12));
    }

    #[test]
    fn training_is_deterministic() {
        let shots = threshold_shots(70, 9);
        let a = train_xs(&shots, 5).unwrap();
        let b = train_xs(&shots, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_small_or_one_sided_sets() {
        let shots = threshold_shots(30, 1);
        assert!(matches!(train_xs(&shots, 0), Err(XsError::TooFewShots { .. })));
        let mut one_sided = threshold_shots(60, 1);
        one_sided.iter_mut().for_each(|s| s.saved = true);
        assert_eq!(train_xs(&one_sided, 0), Err(XsError::SingleClass));
    }

    #[test]
    fn unfitted_model_is_reported() {
        let model = XsModel {
            kernel: Kernel::Linear,
            c: 1.0,
            support_vectors: vec![],
            dual_coef: vec![],
            bias: 0.0,
            platt: PlattParams { a: -1.0, b: 0.0 },
            scaler: ZScaler::identity(2),
            seed: 0,
            training_locations: vec![],
        };
        let ctx = shot_context(PitchPoint::new(110.0, 40.0), false).unwrap();
        assert_eq!(
            predict_xs(&model, &ctx, TechniqueName::Spread),
            Err(XsError::UnfittedModel)
        );
    }

    #[test]
    fn grid_order_prefers_small_c_then_rbf() {
        let g = TrainOptions::default().grid();
        assert_eq!(g.len(), 20);
        assert_eq!(g[0].c, 0.1);
        assert!(g[0].rbf);
        assert!(!g[4].rbf);
        assert_eq!(g[5].c, 1.0);
    }
}
