//! Expected-saves (xS) classifier: RBF/linear SVM trained by SMO, chosen by
//! cross-validated grid search and calibrated with Platt scaling.

mod kernel;
mod model;
mod platt;
mod smo;

pub use kernel::{Kernel, KernelMatrix};
pub use model::{
    predict_xs, train_xs, train_xs_with, GammaChoice, GridPoint, GridScore, SaveModel,
    SaveProbability, TrainOptions, XsInput, XsModel, XsTraining, XsTrainingShot, XS_FEATURES,
};
pub use platt::{platt_fit, PlattParams, PROB_EPS};
pub use smo::{smo_solve, smo_solve_with, SmoOptions, SmoSolution};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum XsError {
    #[error("kernel matrix is not symmetric")]
    NonSymmetricKernel,
    #[error("SMO hit the iteration cap after {} iterations", best.iterations)]
    MaxPassesExceeded { best: Box<SmoSolution> },
    #[error("both classes must be present")]
    SingleClass,
    #[error("labels must be +1 or -1, got {0}")]
    InvalidLabel(f64),
    #[error("expected length {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("need at least {needed} on-target shots, got {found}")]
    TooFewShots { needed: usize, found: usize },
    #[error("model has no support vectors")]
    UnfittedModel,
    #[error("{0}")]
    InvalidParameter(String),
}
