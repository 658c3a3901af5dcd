use super::TechniqueError;
use crate::cluster::{kmeans_fit, silhouette, KMeansModel};
use crate::pose::{BodyPose, JointId};
use crate::scaler::ZScaler;
use serde::{Deserialize, Serialize};

/// Candidate cluster counts for the penalty silhouette sweep.
pub const PENALTY_K_RANGE: [usize; 4] = [2, 3, 4, 5];

/// Column names, in [`PenaltyFeature::to_vec`] order.
pub const PENALTY_TERM_NAMES: [&str; 5] = [
    "Torso Angle",
    "Body Angle",
    "Body Height",
    "Forward Step",
    "Hand Height",
];

/// Direction-invariant penalty dive descriptors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyFeature {
    /// Lean of the pelvis-to-thorax line from vertical, degrees.
    pub torso_angle: f64,
    /// Lean of the planted-foot-to-thorax line from vertical, degrees.
    pub body_angle: f64,
    pub height: f64,
    /// Depth separation of the feet.
    pub forward_step: f64,
    /// Lowest hand above the lowest keypoint.
    pub hand_height: f64,
}

impl PenaltyFeature {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.torso_angle,
            self.body_angle,
            self.height,
            self.forward_step,
            self.hand_height,
        ]
    }
}

fn lean_deg(dx: f64, dy: f64) -> Result<f64, TechniqueError> {
    if dy == 0.0 {
        return Err(TechniqueError::VerticalDegenerate);
    }
    Ok((dx / dy).atan().abs().to_degrees())
}

/// Computes the five penalty features. Coordinates are taken relative to
/// the pelvis, so centred and uncentred inputs agree.
pub fn penalty_features(pose: &BodyPose) -> Result<PenaltyFeature, TechniqueError> {
    let p = pose.centered();
    let thorax = p.joint(JointId::THORAX);
    let torso_angle = lean_deg(thorax[0], thorax[1])?;

    let rf = p.joint(JointId::RIGHT_FOOT);
    let lf = p.joint(JointId::LEFT_FOOT);
    let (fx, fy) = if rf[1] < lf[1] {
        (rf[0], rf[1])
    } else if lf[1] < rf[1] {
        (lf[0], lf[1])
    } else {
        ((rf[0] + lf[0]) / 2.0, rf[1])
    };
    let body_angle = lean_deg(thorax[0] - fx, thorax[1] - fy)?;

    let floor = p.min_y();
    let lowest_hand = p.y(JointId::RIGHT_HAND).min(p.y(JointId::LEFT_HAND));
    Ok(PenaltyFeature {
        torso_angle,
        body_angle,
        height: p.max_y() - floor,
        forward_step: (rf[2] - lf[2]).abs(),
        hand_height: lowest_hand - floor,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyClustering {
    pub model: KMeansModel,
    pub chosen_k: usize,
    pub scaler: Option<ZScaler>,
    /// `(k, mean silhouette)` for every candidate k.
    pub silhouettes: Vec<(usize, f64)>,
}

impl PenaltyClustering {
    pub fn label(&self, f: &PenaltyFeature) -> Result<usize, TechniqueError> {
        let v = match &self.scaler {
            Some(s) => s.transform(&f.to_vec()),
            None => f.to_vec(),
        };
        Ok(self.model.assign(&v)?)
    }
}

/// Sweeps k over [`PENALTY_K_RANGE`] and keeps the best silhouette
/// (ties to the smaller k).
pub fn cluster_penalties(
    features: &[PenaltyFeature],
    seed: u64,
    scale: bool,
) -> Result<PenaltyClustering, TechniqueError> {
    if features.len() < 6 {
        return Err(TechniqueError::TooFewPoints {
            needed: 6,
            found: features.len(),
        });
    }
    let raw: Vec<Vec<f64>> = features.iter().map(PenaltyFeature::to_vec).collect();
    let scaler = scale.then(|| ZScaler::fit(&raw));
    let space = match &scaler {
        Some(s) => s.transform_all(&raw),
        None => raw,
    };

    let mut best: Option<(KMeansModel, f64)> = None;
    let mut silhouettes = Vec::new();
    for k in PENALTY_K_RANGE {
        let model = kmeans_fit(&space, k, seed)?;
        let labels = model.labels(&space)?;
        let score = silhouette(&space, &labels)?;
        silhouettes.push((k, score));
        if best.as_ref().is_none_or(|(_, s)| score > *s) {
            best = Some((model, score));
        }
    }
    let (model, _) = best.expect("non-empty k range");
    Ok(PenaltyClustering {
        chosen_k: model.k,
        model,
        scaler,
        silhouettes,
    })
}
