//! Acceptance checks, one printed line per criterion. Criteria 1-4 need the
//! published dataset converted to this crate's CSV layout; point
//! `KEEPER_LAB_DATASET` at a directory holding `poses.csv` and `events.csv`.

use keeper_lab::analytics::{
    all_xsaa_maps, map_optimal_technique, optimal_map, rank_keepers, xsaa, GridSpec, KeeperShot,
};
use keeper_lab::cluster::{
    conditional_affinities, kmeans_fit, kmeans_fit_traced, silhouette, tsne_embed_with,
    TsneOptions,
};
use keeper_lab::geometry::{gkem, shot_context, PitchPoint, ShotContext, ShotEvent, GOAL_CENTER};
use keeper_lab::inference::{gradient, log_likelihood, logistic_fit, penalty_study};
use keeper_lab::io::{read_events, read_poses, write_events, write_poses, NormalizedRecord};
use keeper_lab::pipeline::{
    cluster_penalty_records, detect_one_v_ones, fit_and_label, normalize_records,
    one_v_one_features, penalty_records, run_pipeline, shot_techniques, xs_training_shots, Dedup,
    DetectionRow, PipelineConfig, Seeds,
};
use keeper_lab::pose::{BodyPose, JointId, VerticalAxis, NUM_JOINTS};
use keeper_lab::synthetic::{generate, SynthOptions};
use keeper_lab::technique::TechniqueName;
use keeper_lab::view::{normalize_view, rotate_y, CANDIDATE_ANGLES};
use keeper_lab::xs::{
    platt_fit, smo_solve, train_xs, Kernel, KernelMatrix, SaveModel,
    SaveProbability, XsError, XsModel, XsTrainingShot,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

use Verdict::{Fail, Pass, Skip};

/// Collects sub-check failures so one criterion reports all of them.
#[derive(Default)]
struct Checks {
    failed: Vec<String>,
    notes: Vec<String>,
}

impl Checks {
    fn check(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failed.push(what.into());
        }
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    fn verdict(self) -> Verdict {
        if self.failed.is_empty() {
            Pass(self.notes.join("; "))
        } else {
            Fail(self.failed.join("; "))
        }
    }
}

fn within_budget(v: Verdict, elapsed: Duration, budget: Duration) -> Verdict {
    match v {
        Pass(s) if elapsed > budget => Fail(format!("{s}; runtime {elapsed:?} over {budget:?}")),
        v => v,
    }
}

// ---------------------------------------------------------------- dataset

struct Dataset {
    events: Vec<ShotEvent>,
    normalized: Vec<NormalizedRecord>,
    detections: Vec<DetectionRow>,
}

fn dataset_dir() -> Option<PathBuf> {
    std::env::var_os("KEEPER_LAB_DATASET").map(PathBuf::from)
}

fn load_dataset(dir: &Path) -> Result<Dataset, String> {
    let poses = read_poses(&dir.join("poses.csv")).map_err(|e| e.to_string())?;
    let events = read_events(&dir.join("events.csv")).map_err(|e| e.to_string())?;
    let normalized =
        normalize_records(&poses, VerticalAxis::YUp, Dedup::All).map_err(|e| e.to_string())?;
    let detections = detect_one_v_ones(&events).map_err(|e| e.to_string())?;
    Ok(Dataset {
        events,
        normalized,
        detections,
    })
}

fn with_dataset(f: impl FnOnce(&Dataset) -> Verdict) -> Verdict {
    let Some(dir) = dataset_dir() else {
        return Skip("KEEPER_LAB_DATASET not set".into());
    };
    match load_dataset(&dir) {
        Ok(d) => f(&d),
        Err(e) => Fail(format!("could not load dataset: {e}")),
    }
}

fn criterion_1(d: &Dataset) -> Verdict {
    let start = Instant::now();
    let mut features = match one_v_one_features(&d.normalized, &d.detections) {
        Ok(f) => f,
        Err(e) => return Fail(e.to_string()),
    };
    if let Err(e) = fit_and_label(&mut features, 0, true) {
        return Fail(e.to_string());
    }
    let shots = match xs_training_shots(&d.events, &d.detections, &shot_techniques(&features)) {
        Ok(s) => s,
        Err(e) => return Fail(e.to_string()),
    };
    let mut accs = Vec::new();
    let mut rbf_c1 = 0;
    for seed in 0..20 {
        match train_xs(&shots, seed) {
            Ok(t) => {
                accs.push(t.test_accuracy);
                rbf_c1 += usize::from(t.selected.rbf && t.selected.c == 1.0);
            }
            Err(e) => return Fail(format!("seed {seed}: {e}")),
        }
    }
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    let mut c = Checks::default();
    c.note(format!("{} on-target 1v1s, mean test accuracy {:.3}, rbf/C=1 in {rbf_c1}/20", shots.len(), mean));
    c.check((0.61..=0.76).contains(&mean), format!("mean accuracy {mean:.3} outside [0.61, 0.76]"));
    c.check(rbf_c1 > 10, format!("rbf/C=1 selected for {rbf_c1}/20 seeds"));
    within_budget(c.verdict(), start.elapsed(), Duration::from_secs(120))
}

fn criterion_2(d: &Dataset) -> Verdict {
    let start = Instant::now();
    let recs = match penalty_records(&d.normalized, &d.events) {
        Ok(r) => r,
        Err(e) => return Fail(e.to_string()),
    };
    let pc = match cluster_penalty_records(&recs, 0, true) {
        Ok(p) => p,
        Err(e) => return Fail(e.to_string()),
    };
    let mut c = Checks::default();
    c.check(pc.chosen_k == 2, format!("silhouette chose k={}", pc.chosen_k));
    let mut sizes = vec![0usize; pc.chosen_k];
    let mut torso = vec![0.0; pc.chosen_k];
    for r in &recs {
        let l = pc.label(&r.feature).expect("fitted");
        sizes[l] += 1;
        torso[l] += r.feature.torso_angle;
    }
    let means: Vec<f64> = torso.iter().zip(&sizes).map(|(t, &n)| t / n.max(1) as f64).collect();
    if pc.chosen_k == 2 {
        let gap = (means[0] - means[1]).abs();
        c.check(gap >= 15.0, format!("torso means differ by {gap:.1} deg"));
        let mut s = sizes.clone();
        s.sort_unstable();
        c.check(
            s[0].abs_diff(86) <= 15 && s[1].abs_diff(147) <= 15,
            format!("cluster sizes {s:?} vs [86, 147]"),
        );
    }
    c.note(format!("k={} sizes {sizes:?} torso means {means:.1?}", pc.chosen_k));
    within_budget(c.verdict(), start.elapsed(), Duration::from_secs(10))
}

fn criterion_3(d: &Dataset) -> Verdict {
    let start = Instant::now();
    let recs = match penalty_records(&d.normalized, &d.events) {
        Ok(r) => r,
        Err(e) => return Fail(e.to_string()),
    };
    let s = match penalty_study(&recs, 0, false) {
        Ok(s) => s,
        Err(e) => return Fail(e.to_string()),
    };
    let mut c = Checks::default();
    c.check(
        (s.n_train, s.n_test) == (157, 68),
        format!("split {}/{} vs 157/68", s.n_train, s.n_test),
    );
    for t in s.terms.iter().skip(1) {
        c.check(t.p_value >= 0.05, format!("{} significant (p={:.4})", t.term, t.p_value));
    }
    c.check(
        (0.14..=0.21).contains(&s.prob_mean),
        format!("mean predicted probability {:.3}", s.prob_mean),
    );
    c.note(format!(
        "n {}/{}, probability range [{:.3}, {:.3}] mean {:.3}",
        s.n_train, s.n_test, s.prob_min, s.prob_max, s.prob_mean
    ));
    within_budget(c.verdict(), start.elapsed(), Duration::from_secs(5))
}

fn criterion_4(d: &Dataset) -> Verdict {
    let start = Instant::now();
    let mut features = match one_v_one_features(&d.normalized, &d.detections) {
        Ok(f) => f,
        Err(e) => return Fail(e.to_string()),
    };
    if let Err(e) = fit_and_label(&mut features, 0, true) {
        return Fail(e.to_string());
    }
    let n = features.len() as f64;
    let mut count = [0usize; 4];
    let mut gk = [0.0; 4];
    for f in &features {
        let t = f.technique.expect("labelled").index();
        count[t] += 1;
        gk[t] += f.feature.gkem();
    }
    let largest = *count.iter().max().unwrap() as f64 / n;
    let smallest = *count.iter().min().unwrap() as f64 / n;
    let mean = |t: TechniqueName| gk[t.index()] / count[t.index()].max(1) as f64;
    let (passive, aggressive) = (mean(TechniqueName::PassiveSet), mean(TechniqueName::AggressiveSet));
    let mut c = Checks::default();
    c.check((0.35..=0.50).contains(&largest), format!("largest cluster {:.1}%", 100.0 * largest));
    c.check((0.03..=0.09).contains(&smallest), format!("smallest cluster {:.1}%", 100.0 * smallest));
    c.check(
        passive - aggressive >= 0.1,
        format!("set GKEMs passive {passive:.3} aggressive {aggressive:.3}"),
    );
    c.note(format!("sizes {count:?} of {n}, set GKEMs {passive:.3}/{aggressive:.3}"));
    within_budget(c.verdict(), start.elapsed(), Duration::from_secs(10))
}

// ---------------------------------------------------------------- 5 geometry

fn random_pose(rng: &mut ChaCha8Rng) -> BodyPose {
    let mut j = [[0.0; 3]; NUM_JOINTS];
    for p in j.iter_mut() {
        *p = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
    }
    BodyPose::validate(&j).expect("random pose is valid")
}

/// Independent `R_y` projection width.
fn oracle_width(pose: &BodyPose, deg: f64) -> f64 {
    let (s, c) = deg.to_radians().sin_cos();
    let xs: Vec<f64> = pose.joints().iter().map(|p| p[0] * c + p[2] * s).collect();
    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max) - xs.iter().copied().fold(f64::INFINITY, f64::min)
}

fn criterion_5() -> Verdict {
    let mut c = Checks::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);

    let mut basis = [[0.3, -0.2, 0.1]; NUM_JOINTS];
    basis[0] = [1.0, 0.0, 0.0];
    basis[1] = [0.0, 1.0, 0.0];
    basis[2] = [0.0, 0.0, 1.0];
    let basis = BodyPose::validate(&basis).unwrap();
    let mut worst_orth: f64 = 0.0;
    let mut worst_det: f64 = 0.0;
    for k in 0..72 {
        let theta = k as f64 * 5.0 + rng.random_range(0.0..5.0);
        let r = rotate_y(&basis, theta);
        // columns of R are the images of the unit vectors
        let m: Vec<[f64; 3]> = (0..3).map(|i| r.joints()[i]).collect();
        for a in 0..3 {
            for b in 0..3 {
                let dot: f64 = (0..3).map(|t| m[a][t] * m[b][t]).sum();
                worst_orth = worst_orth.max((dot - f64::from(u8::from(a == b))).abs());
            }
        }
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[1][0] * (m[0][1] * m[2][2] - m[0][2] * m[2][1])
            + m[2][0] * (m[0][1] * m[1][2] - m[0][2] * m[1][1]);
        worst_det = worst_det.max((det - 1.0).abs());
        let p = random_pose(&mut rng);
        let rp = rotate_y(&p, theta);
        for j in JointId::all() {
            c.check(rp.y(j) == p.y(j), format!("y changed at {theta} deg"));
        }
    }
    c.check(worst_orth < 1e-12, format!("R'R deviates by {worst_orth:e}"));
    c.check(worst_det < 1e-12, format!("det deviates by {worst_det:e}"));

    let mut argmax_ok = 0;
    for _ in 0..200 {
        let p = random_pose(&mut rng).centered();
        let n = normalize_view(&p).unwrap();
        let widths: Vec<f64> = CANDIDATE_ANGLES.iter().map(|&a| oracle_width(&p, f64::from(a))).collect();
        let wmax = widths.iter().copied().fold(0.0, f64::max);
        let first = CANDIDATE_ANGLES[widths.iter().position(|&w| w >= wmax * (1.0 - 1e-12)).unwrap()];
        if n.theta_star == first {
            argmax_ok += 1;
        }
        let total = f64::from(n.theta_star) + if n.flipped { 180.0 } else { 0.0 };
        let expect = rotate_y(&p, total);
        let dev = expect
            .joints()
            .iter()
            .flatten()
            .zip(n.pose.joints().iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        c.check(dev < 1e-12, format!("normalised pose is not R_y(theta*) of input ({dev:e})"));
        c.check(
            n.pose.x(JointId::RIGHT_HAND) <= n.pose.x(JointId::LEFT_HAND),
            "right hand right of left hand after flip",
        );
        let pre = rotate_y(&p, f64::from(n.theta_star));
        c.check(
            n.flipped == (pre.x(JointId::RIGHT_HAND) > pre.x(JointId::LEFT_HAND)),
            "flip flag disagrees with hand order",
        );
    }
    c.check(argmax_ok == 200, format!("width argmax matched {argmax_ok}/200"));

    let mut worst_gkem: f64 = 0.0;
    for _ in 0..500 {
        let s = PitchPoint::new(rng.random_range(80.0..119.0), rng.random_range(0.0..80.0));
        let g = PitchPoint::new(rng.random_range(100.0..120.0), rng.random_range(30.0..50.0));
        let base = gkem(s, g, GOAL_CENTER).unwrap();
        let (scale, phi) = (rng.random_range(0.1..10.0), rng.random_range(0.0..std::f64::consts::TAU));
        let (t1, t2) = (rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
        let tf = |p: PitchPoint| {
            let (sn, cs) = phi.sin_cos();
            PitchPoint::new(scale * (cs * p.x - sn * p.y) + t1, scale * (sn * p.x + cs * p.y) + t2)
        };
        let moved = gkem(tf(s), tf(g), tf(GOAL_CENTER)).unwrap();
        worst_gkem = worst_gkem.max((moved - base).abs() / base.max(1e-300));
        c.check(gkem(s, GOAL_CENTER, GOAL_CENTER).unwrap() == 1.0, "GKEM at goal centre != 1");
        c.check(gkem(s, s, GOAL_CENTER).unwrap() == 0.0, "GKEM at striker != 0");
    }
    c.check(worst_gkem < 1e-12, format!("GKEM similarity invariance off by {worst_gkem:e}"));

    let mut prev = 0.0;
    for i in 0..48 {
        let a = shot_context(PitchPoint::new(96.0 + 0.5 * i as f64, 40.0), false).unwrap().angle;
        c.check(a > prev, "angle not increasing towards goal");
        prev = a;
    }
    let mut prev = f64::INFINITY;
    for i in 0..=30 {
        let a = shot_context(PitchPoint::new(108.0, 40.0 + i as f64), false).unwrap().angle;
        c.check(a < prev, "angle not decreasing off the centre line");
        prev = a;
    }
    c.note(format!("max |R'R-I| {worst_orth:.1e}, width argmax {argmax_ok}/200, GKEM invariance {worst_gkem:.1e}"));
    c.verdict()
}

// ---------------------------------------------------------------- 6 clustering

fn brute_silhouette(points: &[Vec<f64>], labels: &[usize]) -> f64 {
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let k = labels.iter().max().unwrap() + 1;
    let mut total = 0.0;
    for i in 0..points.len() {
        let mut sum = vec![0.0; k];
        let mut cnt = vec![0usize; k];
        for j in 0..points.len() {
            if i != j {
                sum[labels[j]] += dist(&points[i], &points[j]);
                cnt[labels[j]] += 1;
            }
        }
        let own = labels[i];
        if cnt[own] == 0 {
            continue;
        }
        let a = sum[own] / cnt[own] as f64;
        let b = (0..k)
            .filter(|&l| l != own && cnt[l] > 0)
            .map(|l| sum[l] / cnt[l] as f64)
            .fold(f64::INFINITY, f64::min);
        total += (b - a) / a.max(b);
    }
    total / points.len() as f64
}

fn criterion_6() -> Verdict {
    let mut c = Checks::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let noise = Normal::new(0.0, 0.5).unwrap();
    let centres = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]];
    let mut points = Vec::new();
    let mut truth = Vec::new();
    for (l, ctr) in centres.iter().enumerate() {
        for _ in 0..30 {
            points.push(vec![ctr[0] + noise.sample(&mut rng), ctr[1] + noise.sample(&mut rng)]);
            truth.push(l);
        }
    }
    let mut recovered = 0;
    for seed in 0..10 {
        let (model, trace) = kmeans_fit_traced(&points, 3, seed).unwrap();
        c.check(
            trace.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs()),
            format!("inertia increased (seed {seed})"),
        );
        let labels = model.labels(&points).unwrap();
        let mut map = [usize::MAX; 3];
        let mut agree = true;
        for (&t, &l) in truth.iter().zip(&labels) {
            if map[t] == usize::MAX {
                map[t] = l;
            }
            agree &= map[t] == l;
        }
        let mut distinct = map.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        if agree && distinct.len() == 3 {
            recovered += 1;
        }
    }
    c.check(recovered == 10, format!("blobs recovered for {recovered}/10 seeds"));

    let mut worst_sil: f64 = 0.0;
    for trial in 0..20 {
        let n = rng.random_range(5..=50);
        let k = rng.random_range(2..=4usize.min(n - 1));
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| rng.random_range(-5.0..5.0)).collect())
            .collect();
        let mut labels: Vec<usize> = (0..n).map(|i| if i < k { i } else { rng.random_range(0..k) }).collect();
        labels.shuffle(&mut rng);
        let got = silhouette(&pts, &labels).unwrap();
        worst_sil = worst_sil.max((got - brute_silhouette(&pts, &labels)).abs());
        if trial == 0 {
            let km = kmeans_fit(&pts, k, 0).unwrap();
            let l = km.labels(&pts).unwrap();
            worst_sil = worst_sil.max((silhouette(&pts, &l).unwrap() - brute_silhouette(&pts, &l)).abs());
        }
    }
    c.check(worst_sil < 1e-9, format!("silhouette off by {worst_sil:e}"));

    let pts: Vec<Vec<f64>> = (0..40)
        .map(|i| (0..5).map(|_| rng.random_range(-1.0..1.0) + (i % 2) as f64 * 4.0).collect())
        .collect();
    let p = conditional_affinities(&pts, 10.0).unwrap();
    let worst_row = p.iter().map(|r| (r.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max);
    c.check(worst_row < 1e-9, format!("affinity rows off by {worst_row:e}"));
    let opts = TsneOptions {
        perplexity: 10.0,
        iterations: 0,
        ..TsneOptions::default()
    };
    let initial = tsne_embed_with(&pts, 1, &opts).unwrap().final_kl;
    let fin = tsne_embed_with(&pts, 1, &TsneOptions { iterations: 500, ..opts }).unwrap().final_kl;
    c.check(fin < initial, format!("t-SNE KL {fin:.4} not below initial {initial:.4}"));
    c.note(format!(
        "blobs {recovered}/10, silhouette err {worst_sil:.1e}, row-sum err {worst_row:.1e}, KL {initial:.3} -> {fin:.3}"
    ));
    c.verdict()
}

// ---------------------------------------------------------------- 7 svm

fn synthetic_shots(seed: u64, n: usize) -> Vec<XsTrainingShot> {
    let d = generate(
        seed,
        &SynthOptions {
            one_v_ones: n,
            penalties: 0,
            others: 0,
            ..SynthOptions::default()
        },
    );
    d.events
        .iter()
        .zip(&d.techniques)
        .filter(|(e, _)| e.outcome.on_target())
        .map(|(e, (_, t))| XsTrainingShot {
            shot_id: e.shot_id.clone(),
            location: e.striker_location,
            context: shot_context(e.striker_location, e.under_pressure).unwrap(),
            technique: *t,
            saved: e.outcome == keeper_lab::geometry::Outcome::Saved,
        })
        .collect()
}

fn criterion_7() -> Verdict {
    let mut c = Checks::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let tol = 1e-3;
    let mut worst_kkt: f64 = 0.0;
    for trial in 0..12 {
        let n = rng.random_range(10..=100);
        let d = rng.random_range(2..6);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let mut y: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        y[0] = 1.0;
        y[1] = -1.0;
        let kernel = if trial % 2 == 0 {
            Kernel::Rbf { gamma: rng.random_range(0.1..2.0) }
        } else {
            Kernel::Linear
        };
        let cc = [0.1, 1.0, 10.0][trial % 3];
        let k = kernel.matrix(&x);
        let sol = smo_solve(&k, &y, cc, tol).unwrap();
        let f = sol.decision_values(&k, &y);
        let eq: f64 = sol.alphas.iter().zip(&y).map(|(a, yi)| a * yi).sum();
        c.check(eq.abs() < 1e-9, format!("sum a_i y_i = {eq:e}"));
        for i in 0..n {
            let (a, m) = (sol.alphas[i], y[i] * f[i]);
            c.check((-1e-12..=cc + 1e-12).contains(&a), "alpha outside box");
            let viol = if a <= 1e-12 {
                (1.0 - m).max(0.0)
            } else if a >= cc - 1e-12 {
                (m - 1.0).max(0.0)
            } else {
                (m - 1.0).abs()
            };
            worst_kkt = worst_kkt.max(viol);
        }
    }
    c.check(worst_kkt <= tol, format!("KKT violation {worst_kkt:e} > {tol}"));

    let two = KernelMatrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
    let sol = smo_solve(&two, &[1.0, -1.0], 10.0, 1e-6).unwrap();
    c.check(
        (sol.alphas[0] - 0.5).abs() < 1e-12 && (sol.alphas[1] - 0.5).abs() < 1e-12 && sol.bias.abs() < 1e-12,
        format!("2-point dual gave {:?} b={}", sol.alphas, sol.bias),
    );

    let xor = vec![vec![1.0, 1.0], vec![-1.0, -1.0], vec![1.0, -1.0], vec![-1.0, 1.0]];
    let yx = [1.0, 1.0, -1.0, -1.0];
    let k = Kernel::Rbf { gamma: 1.0 }.matrix(&xor);
    let sol = smo_solve(&k, &yx, 10.0, 1e-3).unwrap();
    let hits = sol.decision_values(&k, &yx).iter().zip(&yx).filter(|(f, y)| *f * *y > 0.0).count();
    c.check(hits == 4, format!("XOR train accuracy {hits}/4"));

    let dec: Vec<f64> = (0..200).map(|_| rng.random_range(-3.0..3.0)).collect();
    let pos: Vec<bool> = dec.iter().map(|&f| rng.random::<f64>() < 1.0 / (1.0 + (-2.0 * f).exp())).collect();
    let platt = platt_fit(&dec, &pos).unwrap();
    let mut prev = 0.0;
    let mut mono = true;
    for i in -200..=200 {
        let p = platt.probability(i as f64 * 0.05);
        mono &= p > prev;
        prev = p;
    }
    c.check(mono && platt.a < 0.0, format!("Platt not increasing (A={})", platt.a));
    let extremes = [platt.probability(-1e9), platt.probability(1e9)];
    c.check(extremes.iter().all(|&p| p > 0.0 && p < 1.0), "Platt left the open interval");

    let shots = synthetic_shots(70, 90);
    let a = train_xs(&shots, 3).unwrap();
    let b = train_xs(&shots, 3).unwrap();
    c.check(
        serde_json::to_vec(&a).unwrap() == serde_json::to_vec(&b).unwrap(),
        "grid search not bit-identical",
    );
    c.note(format!("max KKT violation {worst_kkt:.1e}, XOR {hits}/4, Platt A {:.3}", platt.a));
    c.verdict()
}

// ---------------------------------------------------------------- 8 logistic

fn simulate(beta: &[f64], n: usize, rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<bool>) {
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| (1..beta.len()).map(|_| StandardNormal.sample(rng)).collect())
        .collect();
    let y = x
        .iter()
        .map(|r| {
            let eta = beta[0] + r.iter().zip(&beta[1..]).map(|(a, b)| a * b).sum::<f64>();
            rng.random::<f64>() < 1.0 / (1.0 + (-eta).exp())
        })
        .collect();
    (x, y)
}

fn criterion_8() -> Verdict {
    let mut c = Checks::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let beta = [-1.5, 0.3, 0.0, 0.5];

    let (x, y) = simulate(&beta, 300, &mut rng);
    let fit = logistic_fit(&x, &y).unwrap();
    let mut worst_fd: f64 = 0.0;
    let mut points = vec![fit.coefficients.clone()];
    points.extend((0..5).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>()));
    for b in &points {
        let g = gradient(&x, &y, b);
        for j in 0..b.len() {
            let h = 1e-5;
            let (mut up, mut dn) = (b.clone(), b.clone());
            up[j] += h;
            dn[j] -= h;
            let fd = (log_likelihood(&x, &y, &up) - log_likelihood(&x, &y, &dn)) / (2.0 * h);
            let scale = g[j].abs().max(fd.abs()).max(1.0);
            worst_fd = worst_fd.max((g[j] - fd).abs() / scale);
        }
    }
    c.check(worst_fd < 1e-6, format!("gradient vs FD {worst_fd:e}"));

    let y0: Vec<bool> = (0..1000).map(|i| i < 163).collect();
    let x0 = vec![Vec::new(); 1000];
    let m0 = logistic_fit(&x0, &y0).unwrap();
    let closed = (0.163f64 / 0.837).ln();
    let err0 = (m0.coefficients[0] - closed).abs();
    c.check(err0 < 1e-9, format!("intercept-only off by {err0:e}"));

    let mut covered = 0;
    let mut null_ok = 0;
    let mut worst_mean: f64 = 0.0;
    let seeds = 50;
    for seed in 0..seeds {
        let mut sim = ChaCha8Rng::seed_from_u64(seed as u64);
        let (x, y) = simulate(&beta, 2000, &mut sim);
        let m = logistic_fit(&x, &y).unwrap();
        for (j, &b) in beta.iter().enumerate() {
            covered += usize::from((m.coefficients[j] - b).abs() <= 2.0 * m.std_errors[j]);
        }
        null_ok += usize::from(m.terms(&["a", "b", "c"])[2].p_value > 0.05);
        let mean_p = x.iter().map(|r| m.predict(r)).sum::<f64>() / x.len() as f64;
        let rate = y.iter().filter(|&&v| v).count() as f64 / y.len() as f64;
        worst_mean = worst_mean.max((mean_p - rate).abs());
    }
    let coverage = covered as f64 / (4 * seeds) as f64;
    c.check(coverage >= 0.9, format!("2-SE coverage {coverage:.3}"));
    c.check(null_ok * 10 >= seeds * 9, format!("null p > 0.05 in {null_ok}/{seeds}"));
    c.check(worst_mean < 1e-8, format!("mean probability identity off by {worst_mean:e}"));

    let base_x: Vec<Vec<f64>> = (0..225)
        .map(|_| (0..5).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let mut base_y: Vec<bool> = (0..225).map(|i| i < 37).collect();
    let (mut rejects, mut tests) = (0, 0);
    for _ in 0..100 {
        base_y.shuffle(&mut rng);
        let m = logistic_fit(&base_x, &base_y).unwrap();
        for t in m.terms(&["a", "b", "c", "d", "e"]).iter().skip(1) {
            rejects += usize::from(t.p_value < 0.05);
            tests += 1;
        }
    }
    let rate = rejects as f64 / tests as f64;
    c.check((0.01..=0.09).contains(&rate), format!("permutation false-positive rate {rate:.3}"));
    c.note(format!(
        "FD {worst_fd:.1e}, intercept err {err0:.1e}, coverage {coverage:.3}, null kept {null_ok}/{seeds}, perm rate {rate:.3}"
    ));
    c.verdict()
}

// ---------------------------------------------------------------- 9 analytics

/// The same model with a strictly increasing transform of its decisions.
struct Warped<'a>(&'a XsModel);

fn warp(f: f64) -> f64 {
    0.5 * f + f.tanh() + 3.0
}

impl SaveModel for Warped<'_> {
    fn decision_value(&self, ctx: &ShotContext, t: TechniqueName) -> Result<f64, XsError> {
        Ok(warp(self.0.decision_value(ctx, t)?))
    }

    fn save_probability(&self, ctx: &ShotContext, t: TechniqueName) -> Result<SaveProbability, XsError> {
        let f = self.decision_value(ctx, t)?;
        Ok(SaveProbability::clamped(1.0 / (1.0 + (-f).exp())))
    }

    fn support_locations(&self) -> &[PitchPoint] {
        self.0.support_locations()
    }
}

fn criterion_9() -> Verdict {
    let mut c = Checks::default();
    let model = train_xs(&synthetic_shots(90, 120), 9).unwrap().model;
    let grid = GridSpec::default();

    let mut worst_sum: f64 = 0.0;
    for (ix, iy) in grid.cells() {
        for pressure in [false, true] {
            let q = xsaa(&model, &shot_context(grid.center(ix, iy), pressure).unwrap()).unwrap();
            worst_sum = worst_sum.max(q.xsaa.iter().sum::<f64>().abs());
        }
    }
    c.check(worst_sum <= 1e-12, format!("quartet sum {worst_sum:e}"));

    let maps = all_xsaa_maps(&model, &grid).unwrap();
    let mut worst_raster: f64 = 0.0;
    for family in maps.chunks(4) {
        for i in 0..family[0].cells.len() {
            let s: f64 = family.iter().map(|m| m.cells[i].value).sum();
            worst_raster = worst_raster.max(s.abs());
        }
    }
    c.check(worst_raster <= 1e-12, format!("raster sum {worst_raster:e}"));

    let warped = Warped(&model);
    let mut mismatches = 0;
    let mut raw_mismatches = 0;
    for pressure in [false, true] {
        let a = optimal_map(&model, pressure, &grid).unwrap();
        let b = optimal_map(&warped, pressure, &grid).unwrap();
        for (ca, cb) in a.cells.iter().zip(&b.cells) {
            mismatches += usize::from(ca.technique != cb.technique || ca.low_confidence != cb.low_confidence);
            let ctx = shot_context(PitchPoint::new(ca.x, ca.y), pressure).unwrap();
            let mut best = TechniqueName::ALL[0];
            let mut best_f = f64::NEG_INFINITY;
            for t in TechniqueName::ALL {
                let f = model.decision_value(&ctx, t).unwrap();
                if f > best_f {
                    best_f = f;
                    best = t;
                }
            }
            raw_mismatches += usize::from(best != ca.technique);
        }
    }
    c.check(mismatches == 0, format!("{mismatches} cells change under monotone rescaling"));
    c.check(raw_mismatches == 0, format!("{raw_mismatches} cells differ from raw-decision argmax"));

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut shots = Vec::new();
    for (name, n) in [("Always Optimal", 20), ("Fourteen", 14)] {
        for i in 0..n {
            let loc = PitchPoint::new(rng.random_range(100.0..119.0), rng.random_range(25.0..55.0));
            let pressure = rng.random_bool(0.3);
            let t = map_optimal_technique(&model, loc, pressure, &grid).unwrap();
            shots.push(KeeperShot {
                shot_id: format!("{name}-{i}"),
                goalkeeper: name.into(),
                location: loc,
                under_pressure: pressure,
                technique: t,
            });
        }
    }
    let r = rank_keepers(&model, &shots, 15, &grid).unwrap();
    c.check(
        r.rows.len() == 1 && r.rows[0].goalkeeper == "Always Optimal" && r.rows[0].optimal_technique_pct == 100.0,
        format!("ranking rows {:?}", r.rows),
    );
    c.note(format!("quartet {worst_sum:.1e}, raster {worst_raster:.1e}, rescaling mismatches {mismatches}"));
    c.verdict()
}

// ---------------------------------------------------------------- 10 pipeline

fn criterion_10() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(10, &SynthOptions::default());
    let poses = dir.path().join("poses.csv");
    let events = dir.path().join("events.csv");
    write_poses(&poses, &data.poses).unwrap();
    write_events(&events, &data.events).unwrap();
    let seeds = Seeds {
        split: 10,
        kmeans: 10,
        tsne: 10,
    };
    let a = PipelineConfig::new(poses.clone(), events.clone(), dir.path().join("a"), seeds);
    let b = PipelineConfig::new(poses, events, dir.path().join("b"), seeds);
    let (ra, rb) = match (run_pipeline(&a), run_pipeline(&b)) {
        (Ok(x), Ok(y)) => (x, y),
        (Err(e), _) | (_, Err(e)) => return Fail(e.to_string()),
    };
    let mut c = Checks::default();
    let mut compared = 0;
    for rel in ra.manifest.files.keys().map(String::as_str).chain(["manifest.json"]) {
        let x = std::fs::read(ra.output_dir.join(rel)).unwrap();
        let y = std::fs::read(rb.output_dir.join(rel)).unwrap();
        c.check(x == y, format!("{rel} differs"));
        compared += 1;
    }
    let maps = ra.manifest.files.keys().filter(|k| k.starts_with("maps/") && k.ends_with(".csv")).count();
    c.check(maps == 10, format!("{maps} map rasters"));
    c.note(format!("{compared} files byte-identical, {maps} map rasters"));
    c.verdict()
}

fn main() {
    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict>)> = vec![
        ("xS test accuracy", Box::new(|| with_dataset(criterion_1))),
        ("penalty clustering", Box::new(|| with_dataset(criterion_2))),
        ("penalty regression", Box::new(|| with_dataset(criterion_3))),
        ("1v1 clustering", Box::new(|| with_dataset(criterion_4))),
        ("geometry", Box::new(criterion_5)),
        ("clustering", Box::new(criterion_6)),
        ("svm", Box::new(criterion_7)),
        ("logistic regression", Box::new(criterion_8)),
        ("analytics", Box::new(criterion_9)),
        ("pipeline determinism", Box::new(criterion_10)),
    ];
    let suite = Instant::now();
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = f();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match v {
            Pass(d) => ("PASS", d),
            Fail(d) => {
                failures += 1;
                ("FAIL", d)
            }
            Skip(d) => ("SKIP", d),
        };
        println!("[{tag}] {:>2} {name:<21} {secs:>7.2}s  {detail}", i + 1);
    }
    let total = suite.elapsed();
    println!("{} criteria failed, total {:.2}s", failures, total.as_secs_f64());
    if failures > 0 {
        std::process::exit(1);
    }
}
