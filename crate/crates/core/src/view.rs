//! View normalisation: rotate a pose about the vertical axis so that its
//! projected width is maximal, then flip poses seen from behind.

use crate::pose::{extent, BodyPose, JointId, PoseError};
use serde::{Deserialize, Serialize};

/// Candidate rotations in search order. Ties resolve to the earliest entry.
pub const CANDIDATE_ANGLES: [u16; 19] = [
    0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 270, 280, 290, 300, 310, 320, 330, 340, 350,
];

/// Widths within this relative distance of the maximum count as tied.
const WIDTH_TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedPose {
    pub pose: BodyPose,
    pub theta_star: u16,
    pub flipped: bool,
}

/// `(cos, sin)` of an angle in degrees, exact on quarter turns.
fn cos_sin_deg(theta_deg: f64) -> (f64, f64) {
    let t = theta_deg.rem_euclid(360.0);
    match t {
        t if t == 0.0 => (1.0, 0.0),
        t if t == 90.0 => (0.0, 1.0),
        t if t == 180.0 => (-1.0, 0.0),
        t if t == 270.0 => (0.0, -1.0),
        t => {
            let r = t.to_radians();
            (r.cos(), r.sin())
        }
    }
}

/// Applies `R_y(theta)` to every joint:
/// `x' = x cos + z sin`, `y' = y`, `z' = -x sin + z cos`.
pub fn rotate_y(pose: &BodyPose, theta_deg: f64) -> BodyPose {
    let (c, s) = cos_sin_deg(theta_deg);
    let mut joints = *pose.joints();
    for p in joints.iter_mut() {
        let [x, y, z] = *p;
        *p = [c * x + s * z, y, -s * x + c * z];
    }
    BodyPose::from_trusted(joints)
}

/// Horizontal extent of the x-y projection over all joints.
pub fn pose_width(pose: &BodyPose) -> f64 {
    extent(pose.joints().iter().map(|p| p[0]))
}

/// Width of every candidate rotation, in [`CANDIDATE_ANGLES`] order.
pub fn candidate_widths(pose: &BodyPose) -> [f64; 19] {
    let mut out = [0.0; 19];
    for (w, &theta) in out.iter_mut().zip(&CANDIDATE_ANGLES) {
        *w = pose_width(&rotate_y(pose, theta as f64));
    }
    out
}

pub fn normalize_view(pose: &BodyPose) -> Result<NormalizedPose, PoseError> {
    let widths = candidate_widths(pose);
    let best = widths.iter().copied().fold(0.0, f64::max);
    if best <= 0.0 {
        return Err(PoseError::DegeneratePose);
    }
    let cutoff = best * (1.0 - WIDTH_TIE_TOLERANCE);
    let idx = widths.iter().position(|&w| w >= cutoff).unwrap_or(0);
    let theta_star = CANDIDATE_ANGLES[idx];
    let mut rotated = rotate_y(pose, theta_star as f64);

    // right hand to the viewer's right means the camera was behind the keeper
    let flipped = rotated.x(JointId::RIGHT_HAND) > rotated.x(JointId::LEFT_HAND);
    if flipped {
        rotated = rotate_y(&rotated, 180.0);
    }
    Ok(NormalizedPose {
        pose: rotated,
        theta_star,
        flipped,
    })
}
