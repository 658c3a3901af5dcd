//! Pitch geometry: 1v1 detection, the goalkeeper engagement metric and
//! shot-context features.
//!
//! Coordinates are in yards on a 120 x 80 pitch, attacking toward the goal
//! line at `x = 120` with the goal mouth between `y = 36` and `y = 44`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PITCH_LENGTH: f64 = 120.0;
pub const PITCH_WIDTH: f64 = 80.0;
pub const GOAL_CENTER: PitchPoint = PitchPoint { x: 120.0, y: 40.0 };
pub const LOW_POST: PitchPoint = PitchPoint { x: 120.0, y: 36.0 };
pub const HIGH_POST: PitchPoint = PitchPoint { x: 120.0, y: 44.0 };

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("triangle vertices are collinear")]
    DegenerateTriangle,
    #[error("shot {shot_id} has no goalkeeper location")]
    MissingKeeperLocation { shot_id: String },
    #[error("striker is at the goal centre")]
    StrikerAtGoalCenter,
    #[error("shot location x={x} is not in front of the goal line")]
    BehindGoalLine { x: f64 },
    #[error("point ({x}, {y}) is outside the pitch")]
    OffPitch { x: f64, y: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PitchPoint {
    pub x: f64,
    pub y: f64,
}

impl PitchPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        PitchPoint { x, y }
    }

    /// Constructs a point, rejecting anything off the pitch.
    pub fn on_pitch(x: f64, y: f64) -> Result<Self, GeometryError> {
        let inside = (0.0..=PITCH_LENGTH).contains(&x) && (0.0..=PITCH_WIDTH).contains(&y);
        if inside {
            Ok(PitchPoint { x, y })
        } else {
            Err(GeometryError::OffPitch { x, y })
        }
    }

    pub fn distance(self, other: PitchPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyPart {
    Foot,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Goal,
    Saved,
    OffTarget,
    Blocked,
}

impl Outcome {
    pub fn on_target(self) -> bool {
        matches!(self, Outcome::Goal | Outcome::Saved)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotEvent {
    pub shot_id: String,
    pub match_id: String,
    pub goalkeeper_name: String,
    pub striker_location: PitchPoint,
    /// Absent for penalties.
    pub gk_location: Option<PitchPoint>,
    /// Outfield defenders only.
    pub defender_locations: Vec<PitchPoint>,
    pub body_part: BodyPart,
    pub outcome: Outcome,
    pub under_pressure: bool,
    pub is_penalty: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotContext {
    /// Yards to the goal centre.
    pub distance: f64,
    /// Goal-mouth angle subtended at the shot location, radians.
    pub angle: f64,
    pub under_pressure: bool,
}

fn cross(o: PitchPoint, a: PitchPoint, b: PitchPoint) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Inside-or-on-boundary test for triangle `abc`.
pub fn point_in_triangle(
    p: PitchPoint,
    a: PitchPoint,
    b: PitchPoint,
    c: PitchPoint,
) -> Result<bool, GeometryError> {
    let area2 = cross(a, b, c);
    let scale = a.distance(b).max(b.distance(c)).max(c.distance(a));
    if area2.abs() <= 1e-12 * scale * scale {
        return Err(GeometryError::DegenerateTriangle);
    }
    let d1 = cross(a, b, p);
    let d2 = cross(b, c, p);
    let d3 = cross(c, a, p);
    let has_neg = d1 < 0.0 || d2 < 0.0 || d3 < 0.0;
    let has_pos = d1 > 0.0 || d2 > 0.0 || d3 > 0.0;
    Ok(!(has_neg && has_pos))
}

/// A 1v1: no defender in the shot-to-posts triangle, striker beyond every
/// defender, and a shot with the foot.
pub fn is_one_v_one(shot: &ShotEvent) -> Result<bool, GeometryError> {
    if shot.gk_location.is_none() {
        return Err(GeometryError::MissingKeeperLocation {
            shot_id: shot.shot_id.clone(),
        });
    }
    let s = shot.striker_location;
    for &d in &shot.defender_locations {
        if point_in_triangle(d, s, LOW_POST, HIGH_POST)? {
            return Ok(false);
        }
    }
    // evaluated after the triangle test so a degenerate shot location
    // always surfaces as an error
    let beyond_defence = shot.defender_locations.iter().all(|d| s.x > d.x);
    Ok(beyond_defence && shot.body_part == BodyPart::Foot)
}

/// Goalkeeper engagement: `|striker - gk| / |striker - goal_center|`.
pub fn gkem(
    striker: PitchPoint,
    gk: PitchPoint,
    goal_center: PitchPoint,
) -> Result<f64, GeometryError> {
    let denom = striker.distance(goal_center);
    if denom == 0.0 {
        return Err(GeometryError::StrikerAtGoalCenter);
    }
    Ok(striker.distance(gk) / denom)
}

pub fn shot_context(striker: PitchPoint, under_pressure: bool) -> Result<ShotContext, GeometryError> {
    if !(striker.x < PITCH_LENGTH) {
        return Err(GeometryError::BehindGoalLine { x: striker.x });
    }
    let a = striker.distance(LOW_POST);
    let b = striker.distance(HIGH_POST);
    let mouth = LOW_POST.distance(HIGH_POST);
    let cos = ((a * a + b * b - mouth * mouth) / (2.0 * a * b)).clamp(-1.0, 1.0);
    Ok(ShotContext {
        distance: striker.distance(GOAL_CENTER),
        angle: cos.acos(),
        under_pressure,
    })
}
