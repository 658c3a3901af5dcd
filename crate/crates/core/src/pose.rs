//! Body-pose representation for the 16-keypoint skeleton.
//!
//! Coordinates are kept in the pose estimator's own (scale-constrained)
//! units. Internally +x is viewer-right, +y is up and +z points toward the
//! camera. Every [`BodyPose`] in circulation has passed [`BodyPose::validate`].

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Number of keypoints in the skeleton.
pub const NUM_JOINTS: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoseError {
    #[error("expected {NUM_JOINTS} joints, found {found}")]
    WrongJointCount { found: usize },
    #[error("joint {joint} has a non-finite {axis} coordinate")]
    NonFiniteCoordinate { joint: usize, axis: char },
    #[error("degenerate pose: zero extent")]
    DegeneratePose,
}

/// Index of one skeleton keypoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct JointId(u8);

impl JointId {
    pub const RIGHT_FOOT: JointId = JointId(0);
    pub const RIGHT_KNEE: JointId = JointId(1);
    pub const RIGHT_HIP: JointId = JointId(2);
    pub const LEFT_HIP: JointId = JointId(3);
    pub const LEFT_KNEE: JointId = JointId(4);
    pub const LEFT_FOOT: JointId = JointId(5);
    pub const PELVIS: JointId = JointId(6);
    pub const THORAX: JointId = JointId(7);
    pub const NECK: JointId = JointId(8);
    pub const HEAD_TOP: JointId = JointId(9);
    pub const RIGHT_HAND: JointId = JointId(10);
    pub const RIGHT_ELBOW: JointId = JointId(11);
    pub const RIGHT_SHOULDER: JointId = JointId(12);
    pub const LEFT_SHOULDER: JointId = JointId(13);
    pub const LEFT_ELBOW: JointId = JointId(14);
    pub const LEFT_HAND: JointId = JointId(15);

    const NAMES: [&'static str; NUM_JOINTS] = [
        "right_foot",
        "right_knee",
        "right_hip",
        "left_hip",
        "left_knee",
        "left_foot",
        "pelvis",
        "thorax",
        "neck",
        "head_top",
        "right_hand",
        "right_elbow",
        "right_shoulder",
        "left_shoulder",
        "left_elbow",
        "left_hand",
    ];

    pub fn new(index: usize) -> Option<Self> {
        (index < NUM_JOINTS).then_some(JointId(index as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn name(self) -> &'static str {
        Self::NAMES[self.index()]
    }

    pub fn all() -> impl Iterator<Item = JointId> {
        (0..NUM_JOINTS as u8).map(JointId)
    }
}

impl TryFrom<u8> for JointId {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        JointId::new(value as usize).ok_or_else(|| format!("joint index {value} out of range"))
    }
}

impl From<JointId> for u8 {
    fn from(j: JointId) -> u8 {
        j.0
    }
}

impl fmt::Display for JointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Vertical-axis convention of a pose source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerticalAxis {
    #[default]
    YUp,
    /// Image convention, flipped to y-up at ingestion.
    YDown,
}

/// A validated 3D pose: 16 finite keypoints with positive height span.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyPose {
    joints: [[f64; 3]; NUM_JOINTS],
}

impl BodyPose {
    /// Validates raw keypoints given in the internal y-up convention.
    pub fn validate(raw: &[[f64; 3]]) -> Result<Self, PoseError> {
        Self::validate_with(raw, VerticalAxis::YUp)
    }

    pub fn validate_with(raw: &[[f64; 3]], axis: VerticalAxis) -> Result<Self, PoseError> {
        if raw.len() != NUM_JOINTS {
            return Err(PoseError::WrongJointCount { found: raw.len() });
        }
        let mut joints = [[0.0; 3]; NUM_JOINTS];
        for (j, (dst, src)) in joints.iter_mut().zip(raw).enumerate() {
            for (a, &v) in src.iter().enumerate() {
                if !v.is_finite() {
                    return Err(PoseError::NonFiniteCoordinate {
                        joint: j,
                        axis: ['x', 'y', 'z'][a],
                    });
                }
            }
            *dst = *src;
            if axis == VerticalAxis::YDown {
                dst[1] = -dst[1];
            }
        }
        let pose = BodyPose { joints };
        if pose.height_span() <= 0.0 {
            return Err(PoseError::DegeneratePose);
        }
        Ok(pose)
    }

    /// Builds a pose from coordinates already known to be valid (rigid
    /// motions of a validated pose).
    pub(crate) fn from_trusted(joints: [[f64; 3]; NUM_JOINTS]) -> Self {
        debug_assert!(joints.iter().flatten().all(|v| v.is_finite()));
        BodyPose { joints }
    }

    pub fn joints(&self) -> &[[f64; 3]; NUM_JOINTS] {
        &self.joints
    }

    pub fn joint(&self, j: JointId) -> [f64; 3] {
        self.joints[j.index()]
    }

    pub fn x(&self, j: JointId) -> f64 {
        self.joints[j.index()][0]
    }

    pub fn y(&self, j: JointId) -> f64 {
        self.joints[j.index()][1]
    }

    pub fn z(&self, j: JointId) -> f64 {
        self.joints[j.index()][2]
    }

    pub fn min_y(&self) -> f64 {
        self.joints.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min)
    }

    pub fn max_y(&self) -> f64 {
        self.joints.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max(y) - min(y)` over all joints.
    pub fn height_span(&self) -> f64 {
        self.max_y() - self.min_y()
    }

    /// Translates the pose so the pelvis sits at the origin.
    pub fn centered(&self) -> BodyPose {
        let origin = self.joint(JointId::PELVIS);
        let mut joints = self.joints;
        for p in joints.iter_mut() {
            for a in 0..3 {
                p[a] -= origin[a];
            }
        }
        // exact zero, not `p - p` rounding
        joints[JointId::PELVIS.index()] = [0.0; 3];
        BodyPose { joints }
    }

    /// Orthographic projection onto the x-y plane.
    pub fn project_xy(&self) -> Pose2D {
        let mut joints = [[0.0; 2]; NUM_JOINTS];
        for (dst, p) in joints.iter_mut().zip(&self.joints) {
            *dst = [p[0], p[1]];
        }
        Pose2D { joints }
    }

    /// Reflection `x -> -x`.
    pub fn mirrored_x(&self) -> BodyPose {
        let mut joints = self.joints;
        for p in joints.iter_mut() {
            p[0] = -p[0];
        }
        BodyPose { joints }
    }
}

/// Free-function form of [`BodyPose::validate`].
pub fn validate_pose(raw: &[[f64; 3]]) -> Result<BodyPose, PoseError> {
    BodyPose::validate(raw)
}

pub fn center_pose(pose: &BodyPose) -> BodyPose {
    pose.centered()
}

pub fn project_xy(pose: &BodyPose) -> Pose2D {
    pose.project_xy()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    joints: [[f64; 2]; NUM_JOINTS],
}

impl Pose2D {
    pub fn joints(&self) -> &[[f64; 2]; NUM_JOINTS] {
        &self.joints
    }

    pub fn joint(&self, j: JointId) -> [f64; 2] {
        self.joints[j.index()]
    }

    pub fn width(&self) -> f64 {
        extent(self.joints.iter().map(|p| p[0]))
    }

    pub fn height(&self) -> f64 {
        extent(self.joints.iter().map(|p| p[1]))
    }

    /// Joint-major flattening: `x0, y0, x1, y1, ...`.
    pub fn flatten(&self) -> Vec<f64> {
        self.joints.iter().flat_map(|p| [p[0], p[1]]).collect()
    }
}

pub(crate) fn extent(vals: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    hi - lo
}
