//! Seeded synthetic poses and shot events with known generating rules.
//! Used for fixtures, property tests and the `synth` subcommand.

use crate::geometry::{shot_context, BodyPart, Outcome, PitchPoint, ShotEvent, GOAL_CENTER};
use crate::io::PoseRecord;
use crate::pose::{BodyPose, NUM_JOINTS};
use crate::technique::TechniqueName;
use crate::view::rotate_y;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type Joints = [[f64; 3]; NUM_JOINTS];

// Joint order: RF RK RH LH LK LF pelvis thorax neck head RHand RElb RSh LSh LElb LHand.
// Right side at negative x, facing +z. Depth kept small so the frontal view
// is the clear width maximum, and the trunk leans differ so that no
// coordinate is noise-only after standardisation.

const SET: Joints = [
    [-0.25, -0.9, 0.0],
    [-0.22, -0.45, 0.1],
    [-0.15, 0.0, 0.0],
    [0.15, 0.0, 0.0],
    [0.22, -0.45, 0.1],
    [0.25, -0.9, 0.0],
    [0.0, 0.0, 0.0],
    [0.0, 0.3, 0.05],
    [0.0, 0.5, 0.05],
    [0.0, 0.7, 0.05],
    [-0.45, 0.0, 0.15],
    [-0.35, 0.2, 0.1],
    [-0.2, 0.45, 0.0],
    [0.2, 0.45, 0.0],
    [0.35, 0.2, 0.1],
    [0.45, 0.0, 0.15],
];

/// Set position while advancing: slightly deeper knee bend, hands lower.
const AGGRESSIVE_SET: Joints = [
    [-0.3, -0.75, 0.0],
    [-0.28, -0.35, 0.18],
    [-0.16, 0.0, 0.0],
    [0.16, 0.0, 0.0],
    [0.28, -0.35, 0.18],
    [0.3, -0.75, 0.0],
    [0.0, 0.0, 0.0],
    [0.0, 0.25, 0.1],
    [0.0, 0.42, 0.12],
    [0.0, 0.58, 0.14],
    [-0.55, -0.15, 0.15],
    [-0.42, 0.1, 0.1],
    [-0.22, 0.38, 0.04],
    [0.22, 0.38, 0.04],
    [0.42, 0.1, 0.1],
    [0.55, -0.15, 0.15],
];

const SPREAD: Joints = [
    [-0.7, -0.55, 0.05],
    [-0.45, -0.35, 0.1],
    [-0.18, -0.04, 0.0],
    [0.18, 0.03, 0.0],
    [0.4, -0.3, 0.12],
    [0.65, -0.5, 0.05],
    [0.0, 0.0, 0.0],
    [0.05, 0.25, 0.05],
    [0.08, 0.4, 0.08],
    [0.1, 0.55, 0.1],
    [-0.95, 0.05, 0.1],
    [-0.65, 0.2, 0.08],
    [-0.26, 0.35, 0.03],
    [0.26, 0.35, 0.03],
    [0.65, 0.2, 0.08],
    [0.95, 0.05, 0.1],
];

const SMOTHER: Joints = [
    [-0.2, -0.35, 0.0],
    [-0.26, -0.22, 0.1],
    [-0.1, 0.05, 0.0],
    [0.1, -0.04, 0.0],
    [0.26, -0.2, 0.12],
    [0.22, -0.35, 0.02],
    [0.0, 0.0, 0.0],
    [-0.06, 0.14, 0.1],
    [-0.1, 0.24, 0.14],
    [-0.14, 0.32, 0.18],
    [-0.32, -0.3, 0.2],
    [-0.28, -0.05, 0.16],
    [-0.17, 0.2, 0.1],
    [0.17, 0.2, 0.1],
    [0.28, -0.05, 0.16],
    [0.32, -0.3, 0.2],
];

fn jitter(base: &Joints, sigma: f64, rng: &mut ChaCha8Rng) -> Joints {
    let mut out = *base;
    if sigma > 0.0 {
        let n = Normal::new(0.0, sigma).expect("positive sigma");
        for p in out.iter_mut() {
            for v in p.iter_mut() {
                *v += n.sample(rng);
            }
        }
    }
    out
}

/// Frontal archetype pose for a technique, with Gaussian joint noise.
pub fn archetype_pose(t: TechniqueName, noise_sigma: f64, rng: &mut ChaCha8Rng) -> Joints {
    let base = match t {
        TechniqueName::PassiveSet => &SET,
        TechniqueName::AggressiveSet => &AGGRESSIVE_SET,
        TechniqueName::Spread => &SPREAD,
        TechniqueName::Smother => &SMOTHER,
    };
    jitter(base, noise_sigma, rng)
}

const UPPER_BODY: [usize; 9] = [7, 8, 9, 10, 11, 12, 13, 14, 15];

/// Penalty save pose with the upper body leaning `lean_deg` from vertical
/// towards +x and the far foot raised by `step_lift`; `forward_step` is the
/// depth gap between the feet.
pub fn penalty_pose(
    lean_deg: f64,
    step_lift: f64,
    forward_step: f64,
    noise_sigma: f64,
    rng: &mut ChaCha8Rng,
) -> Joints {
    let mut j = SET;
    let (s, c) = lean_deg.to_radians().sin_cos();
    for &k in &UPPER_BODY {
        let [x, y, z] = j[k];
        j[k] = [c * x + s * y, -s * x + c * y, z];
    }
    j[4][1] += step_lift * 0.5;
    j[5][1] += step_lift;
    j[5][0] += step_lift * 0.6;
    j[5][2] += forward_step;
    jitter(&j, noise_sigma, rng)
}

fn transform(raw: &Joints, yaw_deg: f64, offset: [f64; 3]) -> Joints {
    let pose = BodyPose::validate(raw).expect("archetypes are valid");
    let mut out = *rotate_y(&pose, yaw_deg).joints();
    for p in out.iter_mut() {
        for a in 0..3 {
            p[a] += offset[a];
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub one_v_ones: usize,
    pub penalties: usize,
    /// Shots that fail the 1v1 test (header or blocked lane).
    pub others: usize,
    pub keepers: Vec<String>,
    pub noise_sigma: f64,
    /// Extra camera views for every n-th 1v1 (0 disables).
    pub multi_view_every: usize,
    /// Mark every n-th extra view excluded (0 disables).
    pub exclude_every: usize,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            one_v_ones: 60,
            penalties: 120,
            others: 6,
            keepers: vec!["Keeper A".into(), "Keeper B".into(), "Keeper C".into()],
            noise_sigma: 0.015,
            multi_view_every: 7,
            exclude_every: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub poses: Vec<PoseRecord>,
    pub events: Vec<ShotEvent>,
    /// Generating technique per 1v1 shot id.
    pub techniques: Vec<(String, TechniqueName)>,
}

fn gkem_for(t: TechniqueName, rng: &mut ChaCha8Rng) -> f64 {
    let centre = match t {
        TechniqueName::PassiveSet => 0.8,
        TechniqueName::AggressiveSet => 0.55,
        TechniqueName::Spread => 0.35,
        TechniqueName::Smother => 0.15,
    };
    (centre + rng.random_range(-0.06..0.06f64)).max(0.02)
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Save probability of the generating model: better from range, and each
/// technique favoured in its own zone.
pub fn synthetic_save_probability(distance: f64, angle: f64, t: TechniqueName) -> f64 {
    let zone = match t {
        TechniqueName::PassiveSet if distance > 8.0 => 0.6,
        TechniqueName::PassiveSet => -0.4,
        TechniqueName::Spread if distance <= 8.0 && angle > 0.6 => 0.7,
        TechniqueName::Spread => -0.3,
        TechniqueName::AggressiveSet if angle < 0.45 => 0.5,
        TechniqueName::AggressiveSet => -0.2,
        TechniqueName::Smother => 0.0,
    };
    logistic(-0.4 + 0.3 * (distance - 9.0) + zone)
}

fn yaw_and_offset(rng: &mut ChaCha8Rng) -> (f64, [f64; 3]) {
    let yaw = rng.random_range(0.0..360.0);
    let offset = [
        rng.random_range(-3.0..3.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(2.0..6.0),
    ];
    (yaw, offset)
}

pub fn generate(seed: u64, opts: &SynthOptions) -> SyntheticDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut poses = Vec::new();
    let mut events = Vec::new();
    let mut techniques = Vec::new();
    let keeper = |i: usize| opts.keepers[i % opts.keepers.len().max(1)].clone();

    for i in 0..opts.one_v_ones {
        let id = format!("ovo-{i:04}");
        let t = TechniqueName::ALL[rng.random_range(0..4)];
        let striker = PitchPoint::new(rng.random_range(100.0..117.0), rng.random_range(28.0..52.0));
        let g = gkem_for(t, &mut rng);
        let gk = PitchPoint::new(
            striker.x + g * (GOAL_CENTER.x - striker.x),
            striker.y + g * (GOAL_CENTER.y - striker.y),
        );
        let defenders = (0..rng.random_range(0..3))
            .map(|_| {
                PitchPoint::new(
                    rng.random_range(80.0..striker.x - 1.0),
                    rng.random_range(10.0..70.0),
                )
            })
            .collect();
        let pressure = rng.random_bool(0.3);
        let ctx = shot_context(striker, pressure).expect("in front of goal");
        let outcome = if i % 15 == 14 {
            Outcome::OffTarget
        } else if rng.random_bool(synthetic_save_probability(ctx.distance, ctx.angle, t)) {
            Outcome::Saved
        } else {
            Outcome::Goal
        };
        events.push(ShotEvent {
            shot_id: id.clone(),
            match_id: format!("m{:02}", i / 10),
            goalkeeper_name: keeper(i),
            striker_location: striker,
            gk_location: Some(gk),
            defender_locations: defenders,
            body_part: BodyPart::Foot,
            outcome,
            under_pressure: pressure,
            is_penalty: false,
        });
        techniques.push((id.clone(), t));

        let raw = archetype_pose(t, opts.noise_sigma, &mut rng);
        let views = if opts.multi_view_every > 0 && i % opts.multi_view_every == 0 {
            2
        } else {
            1
        };
        for v in 0..views {
            let (yaw, offset) = yaw_and_offset(&mut rng);
            let excluded = v > 0 && opts.exclude_every > 0 && (i / opts.multi_view_every.max(1)) % opts.exclude_every == 0;
            poses.push(PoseRecord {
                shot_id: id.clone(),
                view: v,
                joints: transform(&raw, yaw, offset),
                excluded,
            });
        }
    }

    for i in 0..opts.penalties {
        let id = format!("pen-{i:04}");
        let dive = rng.random_range(0.0..1.0) < 0.37;
        let (lean, lift) = if dive {
            (rng.random_range(30.0..42.0), rng.random_range(0.25..0.4))
        } else {
            (rng.random_range(5.0..15.0), rng.random_range(0.0..0.08))
        };
        let step = rng.random_range(0.0..0.3);
        let mut raw = penalty_pose(lean, lift, step, opts.noise_sigma, &mut rng);
        if rng.random_bool(0.5) {
            for p in raw.iter_mut() {
                p[0] = -p[0];
            }
            // keep the right hand on the viewer's left after mirroring
            raw.swap(10, 15);
            raw.swap(11, 14);
            raw.swap(12, 13);
            raw.swap(0, 5);
            raw.swap(1, 4);
            raw.swap(2, 3);
        }
        let (yaw, offset) = yaw_and_offset(&mut rng);
        poses.push(PoseRecord {
            shot_id: id.clone(),
            view: 0,
            joints: transform(&raw, yaw, offset),
            excluded: i % 13 == 12,
        });
        let outcome = if i % 20 == 19 {
            Outcome::OffTarget
        } else if rng.random_bool(0.18) {
            Outcome::Saved
        } else {
            Outcome::Goal
        };
        events.push(ShotEvent {
            shot_id: id,
            match_id: format!("p{:02}", i / 10),
            goalkeeper_name: keeper(i + 1),
            striker_location: PitchPoint::new(108.0, 40.0),
            gk_location: None,
            defender_locations: vec![],
            body_part: BodyPart::Foot,
            outcome,
            under_pressure: false,
            is_penalty: true,
        });
    }

    for i in 0..opts.others {
        let striker = PitchPoint::new(rng.random_range(98.0..112.0), rng.random_range(30.0..50.0));
        let gk = PitchPoint::new(118.0, 40.0);
        let (body_part, defenders) = if i % 2 == 0 {
            (BodyPart::Other, vec![])
        } else {
            // a defender on the line between the striker and goal centre
            let d = PitchPoint::new((striker.x + 120.0) / 2.0, (striker.y + 40.0) / 2.0);
            (BodyPart::Foot, vec![d])
        };
        events.push(ShotEvent {
            shot_id: format!("oth-{i:04}"),
            match_id: "o00".into(),
            goalkeeper_name: keeper(i),
            striker_location: striker,
            gk_location: Some(gk),
            defender_locations: defenders,
            body_part,
            outcome: if i % 3 == 0 { Outcome::Saved } else { Outcome::Goal },
            under_pressure: false,
            is_penalty: false,
        });
    }

    SyntheticDataset {
        poses,
        events,
        techniques,
    }
}
