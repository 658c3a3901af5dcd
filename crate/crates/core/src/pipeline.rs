//! Stage functions and the end-to-end run that materialises every
//! intermediate artifact under one output directory.

use crate::analytics::{
    all_xsaa_maps, heatmap_svg, optimal_map, rank_keepers, technique_map_svg, GridSpec, KeeperShot,
    DEFAULT_MIN_FACED,
};
use crate::cluster::{tsne_embed, Embedding2D};
use crate::geometry::{gkem, is_one_v_one, shot_context, Outcome, ShotEvent, GOAL_CENTER};
use crate::inference::{penalty_study, PenaltyRecord, RegressionSummary};
use crate::io::{
    read_events, read_poses, write_csv_rows, write_features, write_json, write_normalized,
    FeatureRecord, NormalizedRecord, PoseRecord,
};
use crate::pose::{BodyPose, VerticalAxis};
use crate::technique::{
    build_1v1_feature, cluster_penalties, fit_technique_model, penalty_features,
    representative_saves, PenaltyClustering, TechniqueModel, TechniqueName,
};
use crate::view::{normalize_view, NormalizedPose};
use crate::xs::{train_xs, GridPoint, GridScore, XsTraining, XsTrainingShot};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

/// A failed stage, with the ids of the records that caused it.
#[derive(Debug, Error)]
#[error("[{stage}] {message}{}", records_suffix(.records))]
pub struct StageError {
    pub stage: &'static str,
    pub records: Vec<String>,
    pub message: String,
}

fn records_suffix(records: &[String]) -> String {
    const SHOWN: usize = 10;
    match records.len() {
        0 => String::new(),
        n if n <= SHOWN => format!(" (records: {})", records.join(", ")),
        n => format!(" (records: {}, ... {} more)", records[..SHOWN].join(", "), n - SHOWN),
    }
}

impl StageError {
    pub fn new(stage: &'static str, message: impl ToString) -> Self {
        StageError {
            stage,
            records: Vec::new(),
            message: message.to_string(),
        }
    }

    pub fn with_records(stage: &'static str, message: impl ToString, records: Vec<String>) -> Self {
        StageError {
            stage,
            records,
            message: message.to_string(),
        }
    }
}

/// Which views of a multi-view shot are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dedup {
    /// Only the first non-excluded view.
    First,
    #[default]
    All,
}

impl FromStr for Dedup {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "first" => Ok(Dedup::First),
            "all" => Ok(Dedup::All),
            _ => Err(format!("unknown dedup policy `{s}` (expected first|all)")),
        }
    }
}

impl fmt::Display for Dedup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dedup::First => "first",
            Dedup::All => "all",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub split: u64,
    pub kmeans: u64,
    pub tsne: u64,
}

fn default_true() -> bool {
    true
}

fn default_min_faced() -> usize {
    DEFAULT_MIN_FACED
}

fn default_perplexity() -> f64 {
    30.0
}

fn default_tsne_iterations() -> usize {
    1000
}

/// Run configuration. Seeds have no defaults and must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub poses: PathBuf,
    pub events: PathBuf,
    pub output_dir: PathBuf,
    pub seeds: Seeds,
    #[serde(default = "default_true")]
    pub scale: bool,
    #[serde(default)]
    pub dedup: Dedup,
    #[serde(default)]
    pub y_down: bool,
    #[serde(default = "default_min_faced")]
    pub min_faced: usize,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub all_data: bool,
    #[serde(default = "default_perplexity")]
    pub tsne_perplexity: f64,
    #[serde(default = "default_tsne_iterations")]
    pub tsne_iterations: usize,
}

impl PipelineConfig {
    pub fn new(poses: PathBuf, events: PathBuf, output_dir: PathBuf, seeds: Seeds) -> Self {
        PipelineConfig {
            poses,
            events,
            output_dir,
            seeds,
            scale: true,
            dedup: Dedup::All,
            y_down: false,
            min_faced: DEFAULT_MIN_FACED,
            grid: GridSpec::default(),
            all_data: false,
            tsne_perplexity: default_perplexity(),
            tsne_iterations: default_tsne_iterations(),
        }
    }

    /// Parses a TOML config; relative paths are taken from the config's
    /// own directory.
    pub fn load(path: &Path) -> Result<Self, StageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| StageError::new("config", format!("{}: {e}", path.display())))?;
        let mut cfg: PipelineConfig = toml::from_str(&text)
            .map_err(|e| StageError::new("config", format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.poses, &mut cfg.events, &mut cfg.output_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn axis(&self) -> VerticalAxis {
        if self.y_down {
            VerticalAxis::YDown
        } else {
            VerticalAxis::YUp
        }
    }

    pub fn validate(&self) -> Result<(), StageError> {
        for p in [&self.poses, &self.events] {
            if !p.is_file() {
                return Err(StageError::new(
                    "config",
                    format!("input file not found: {}", p.display()),
                ));
            }
        }
        self.grid
            .validate()
            .map_err(|e| StageError::new("config", e))?;
        if !(self.tsne_perplexity > 0.0) {
            return Err(StageError::new("config", "tsne_perplexity must be positive"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form with the output directory left
    /// out, so the same run reproduced elsewhere hashes identically.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        sha256_hex(&serde_json::to_vec(&c).expect("config serialises"))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

// ---------------------------------------------------------------- stages

/// Validates and view-normalises every non-excluded pose record. All
/// failing records are reported together.
pub fn normalize_records(
    records: &[PoseRecord],
    axis: VerticalAxis,
    dedup: Dedup,
) -> Result<Vec<NormalizedRecord>, StageError> {
    let mut out = Vec::new();
    let mut bad = Vec::new();
    let mut first_msg = None;
    let mut seen = BTreeSet::new();
    for r in records.iter().filter(|r| !r.excluded) {
        if dedup == Dedup::First && seen.contains(&r.shot_id) {
            continue;
        }
        let norm = BodyPose::validate_with(&r.joints, axis).and_then(|p| normalize_view(&p.centered()));
        match norm {
            Ok(n) => {
                seen.insert(r.shot_id.clone());
                out.push(NormalizedRecord {
                    shot_id: r.shot_id.clone(),
                    view: r.view,
                    theta_star: n.theta_star,
                    flipped: n.flipped,
                    joints: *n.pose.joints(),
                });
            }
            Err(e) => {
                first_msg.get_or_insert_with(|| e.to_string());
                bad.push(r.key());
            }
        }
    }
    if bad.is_empty() {
        Ok(out)
    } else {
        Err(StageError::with_records(
            "normalize",
            first_msg.unwrap_or_default(),
            bad,
        ))
    }
}

fn normalized_pose(r: &NormalizedRecord) -> Result<NormalizedPose, StageError> {
    let pose = BodyPose::validate(&r.joints).map_err(|e| {
        StageError::with_records("normalize", e, vec![format!("{}#{}", r.shot_id, r.view)])
    })?;
    Ok(NormalizedPose {
        pose,
        theta_star: r.theta_star,
        flipped: r.flipped,
    })
}

/// One row of `detect-1v1` output. Penalties are not listed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRow {
    pub shot_id: String,
    pub goalkeeper_name: String,
    pub is_one_v_one: bool,
    pub gkem: f64,
    pub distance: f64,
    pub angle: f64,
    pub under_pressure: bool,
    pub on_target: bool,
}

pub fn detect_one_v_ones(events: &[ShotEvent]) -> Result<Vec<DetectionRow>, StageError> {
    let mut rows = Vec::new();
    let mut bad = Vec::new();
    let mut first_msg = None;
    for e in events.iter().filter(|e| !e.is_penalty) {
        let row = (|| {
            let flag = is_one_v_one(e)?;
            let g = gkem(e.striker_location, e.gk_location.expect("checked"), GOAL_CENTER)?;
            let ctx = shot_context(e.striker_location, e.under_pressure)?;
            Ok::<_, crate::geometry::GeometryError>(DetectionRow {
                shot_id: e.shot_id.clone(),
                goalkeeper_name: e.goalkeeper_name.clone(),
                is_one_v_one: flag,
                gkem: g,
                distance: ctx.distance,
                angle: ctx.angle,
                under_pressure: e.under_pressure,
                on_target: e.outcome.on_target(),
            })
        })();
        match row {
            Ok(r) => rows.push(r),
            Err(err) => {
                first_msg.get_or_insert_with(|| err.to_string());
                bad.push(e.shot_id.clone());
            }
        }
    }
    if bad.is_empty() {
        Ok(rows)
    } else {
        Err(StageError::with_records(
            "detect-1v1",
            first_msg.unwrap_or_default(),
            bad,
        ))
    }
}

/// Raw 33-d features for every normalised record of a detected 1v1.
pub fn one_v_one_features(
    normalized: &[NormalizedRecord],
    detections: &[DetectionRow],
) -> Result<Vec<FeatureRecord>, StageError> {
    let gkems: BTreeMap<&str, f64> = detections
        .iter()
        .filter(|d| d.is_one_v_one)
        .map(|d| (d.shot_id.as_str(), d.gkem))
        .collect();
    let mut out = Vec::new();
    for r in normalized {
        let Some(&g) = gkems.get(r.shot_id.as_str()) else {
            continue;
        };
        let norm = normalized_pose(r)?;
        let feature = build_1v1_feature(&norm, g, None).map_err(|e| {
            StageError::with_records("cluster-1v1", e, vec![format!("{}#{}", r.shot_id, r.view)])
        })?;
        out.push(FeatureRecord {
            shot_id: r.shot_id.clone(),
            view: r.view,
            technique: None,
            feature,
        });
    }
    Ok(out)
}

pub fn fit_and_label(
    features: &mut [FeatureRecord],
    seed: u64,
    scale: bool,
) -> Result<TechniqueModel, StageError> {
    let raw: Vec<_> = features.iter().map(|f| f.feature.clone()).collect();
    let model = fit_technique_model(&raw, seed, scale)
        .map_err(|e| StageError::new("cluster-1v1", e))?;
    label_features(&model, features)?;
    Ok(model)
}

pub fn label_features(model: &TechniqueModel, features: &mut [FeatureRecord]) -> Result<(), StageError> {
    for f in features.iter_mut() {
        let t = model.classify(&f.feature).map_err(|e| {
            StageError::with_records("cluster-1v1", e, vec![format!("{}#{}", f.shot_id, f.view)])
        })?;
        f.technique = Some(t);
    }
    Ok(())
}

/// The record nearest each cluster centre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentativeRow {
    pub cluster: usize,
    pub technique: TechniqueName,
    pub shot_id: String,
    pub view: usize,
}

pub fn representatives(
    model: &TechniqueModel,
    features: &[FeatureRecord],
) -> Result<Vec<RepresentativeRow>, StageError> {
    let keyed: Vec<_> = features
        .iter()
        .map(|f| ((f.shot_id.clone(), f.view), f.feature.clone()))
        .collect();
    let keys = representative_saves(model, &keyed).map_err(|e| StageError::new("cluster-1v1", e))?;
    Ok(keys
        .into_iter()
        .enumerate()
        .map(|(cluster, (shot_id, view))| RepresentativeRow {
            cluster,
            technique: model.name_map[cluster],
            shot_id,
            view,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneRow {
    pub shot_id: String,
    pub view: usize,
    pub dim1: f64,
    pub dim2: f64,
    pub label: String,
}

/// Embeds the features in the model's clustering space.
pub fn embed_features(
    model: Option<&TechniqueModel>,
    features: &[FeatureRecord],
    perplexity: f64,
    seed: u64,
    iterations: usize,
) -> Result<(Vec<TsneRow>, Embedding2D), StageError> {
    let points: Vec<Vec<f64>> = features
        .iter()
        .map(|f| match model.and_then(|m| m.scaler.as_ref()) {
            Some(s) => s.transform(f.feature.values()),
            None => f.feature.values().to_vec(),
        })
        .collect();
    let emb = tsne_embed(&points, perplexity, seed, iterations)
        .map_err(|e| StageError::new("tsne", e))?;
    let rows = features
        .iter()
        .zip(&emb.points)
        .map(|(f, p)| TsneRow {
            shot_id: f.shot_id.clone(),
            view: f.view,
            dim1: p[0],
            dim2: p[1],
            label: f.technique.map(|t| t.as_str().to_string()).unwrap_or_default(),
        })
        .collect();
    Ok((rows, emb))
}

/// Technique label per 1v1 shot: that of its first labelled record.
pub fn shot_techniques(features: &[FeatureRecord]) -> BTreeMap<String, TechniqueName> {
    let mut out = BTreeMap::new();
    let mut first_view: BTreeMap<&str, usize> = BTreeMap::new();
    for f in features {
        let Some(t) = f.technique else { continue };
        let v = first_view.entry(&f.shot_id).or_insert(usize::MAX);
        if f.view < *v {
            *v = f.view;
            out.insert(f.shot_id.clone(), t);
        }
    }
    out
}

/// On-target 1v1s that carry a technique label, in event order.
pub fn xs_training_shots(
    events: &[ShotEvent],
    detections: &[DetectionRow],
    techniques: &BTreeMap<String, TechniqueName>,
) -> Result<Vec<XsTrainingShot>, StageError> {
    let one_v_one: BTreeSet<&str> = detections
        .iter()
        .filter(|d| d.is_one_v_one)
        .map(|d| d.shot_id.as_str())
        .collect();
    let mut out = Vec::new();
    for e in events {
        if !one_v_one.contains(e.shot_id.as_str()) || !e.outcome.on_target() {
            continue;
        }
        let Some(&technique) = techniques.get(&e.shot_id) else {
            continue;
        };
        let context = shot_context(e.striker_location, e.under_pressure)
            .map_err(|err| StageError::with_records("train-xs", err, vec![e.shot_id.clone()]))?;
        out.push(XsTrainingShot {
            shot_id: e.shot_id.clone(),
            location: e.striker_location,
            context,
            technique,
            saved: e.outcome == Outcome::Saved,
        });
    }
    Ok(out)
}

pub fn keeper_shots(events: &[ShotEvent], shots: &[XsTrainingShot]) -> Vec<KeeperShot> {
    let by_id: BTreeMap<&str, &ShotEvent> = events.iter().map(|e| (e.shot_id.as_str(), e)).collect();
    shots
        .iter()
        .filter_map(|s| {
            by_id.get(s.shot_id.as_str()).map(|e| KeeperShot {
                shot_id: s.shot_id.clone(),
                goalkeeper: e.goalkeeper_name.clone(),
                location: s.location,
                under_pressure: s.context.under_pressure,
                technique: s.technique,
            })
        })
        .collect()
}

/// On-target penalties joined to their first non-excluded normalised view.
pub fn penalty_records(
    normalized: &[NormalizedRecord],
    events: &[ShotEvent],
) -> Result<Vec<PenaltyRecord>, StageError> {
    let mut first: BTreeMap<&str, &NormalizedRecord> = BTreeMap::new();
    for r in normalized {
        first
            .entry(r.shot_id.as_str())
            .and_modify(|cur| {
                if r.view < cur.view {
                    *cur = r;
                }
            })
            .or_insert(r);
    }
    let mut out = Vec::new();
    let mut bad = Vec::new();
    let mut first_msg = None;
    for e in events.iter().filter(|e| e.is_penalty && e.outcome.on_target()) {
        let Some(r) = first.get(e.shot_id.as_str()) else {
            continue;
        };
        match normalized_pose(r).and_then(|n| {
            penalty_features(&n.pose).map_err(|err| StageError::new("cluster-penalty", err))
        }) {
            Ok(feature) => out.push(PenaltyRecord {
                shot_id: e.shot_id.clone(),
                feature,
                saved: e.outcome == Outcome::Saved,
            }),
            Err(err) => {
                first_msg.get_or_insert(err.message);
                bad.push(e.shot_id.clone());
            }
        }
    }
    if bad.is_empty() {
        Ok(out)
    } else {
        Err(StageError::with_records(
            "cluster-penalty",
            first_msg.unwrap_or_default(),
            bad,
        ))
    }
}

pub fn cluster_penalty_records(
    records: &[PenaltyRecord],
    seed: u64,
    scale: bool,
) -> Result<PenaltyClustering, StageError> {
    let feats: Vec<_> = records.iter().map(|r| r.feature).collect();
    cluster_penalties(&feats, seed, scale).map_err(|e| StageError::new("cluster-penalty", e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyRow {
    pub shot_id: String,
    pub torso_angle: f64,
    pub body_angle: f64,
    pub height: f64,
    pub forward_step: f64,
    pub hand_height: f64,
    pub saved: bool,
    pub cluster: usize,
}

pub fn penalty_rows(
    records: &[PenaltyRecord],
    clustering: &PenaltyClustering,
) -> Result<Vec<PenaltyRow>, StageError> {
    records
        .iter()
        .map(|r| {
            let cluster = clustering.label(&r.feature).map_err(|e| {
                StageError::with_records("cluster-penalty", e, vec![r.shot_id.clone()])
            })?;
            let f = r.feature;
            Ok(PenaltyRow {
                shot_id: r.shot_id.clone(),
                torso_angle: f.torso_angle,
                body_angle: f.body_angle,
                height: f.height,
                forward_step: f.forward_step,
                hand_height: f.hand_height,
                saved: r.saved,
                cluster,
            })
        })
        .collect()
}

/// Grid-search record stored next to the xS model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XsSummary {
    pub selected: GridPoint,
    pub grid: Vec<GridScore>,
    pub test_accuracy: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub train_save_rate: f64,
    pub seed: u64,
}

impl XsSummary {
    pub fn from_training(t: &XsTraining) -> Self {
        XsSummary {
            selected: t.selected,
            grid: t.grid.clone(),
            test_accuracy: t.test_accuracy,
            n_train: t.n_train,
            n_test: t.n_test,
            train_save_rate: t.train_save_rate,
            seed: t.model.seed,
        }
    }
}

pub fn map_file_stem(technique: Option<TechniqueName>, pressure: bool) -> String {
    let p = if pressure { "pressure" } else { "no_pressure" };
    match technique {
        Some(t) => format!("xsaa_{}_{p}", t.as_str()),
        None => format!("optimal_{p}"),
    }
}

// ---------------------------------------------------------------- run

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config_sha256: String,
    pub seeds: Seeds,
    pub inputs: BTreeMap<String, String>,
    pub counts: BTreeMap<String, usize>,
    /// Output path relative to the run directory, mapped to its SHA-256.
    pub files: BTreeMap<String, String>,
}

/// Summary handed back to callers; everything here is also on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub output_dir: PathBuf,
    pub manifest: Manifest,
    pub xs: XsSummary,
    pub regression: RegressionSummary,
}

struct Writer {
    root: PathBuf,
    files: BTreeMap<String, String>,
}

impl Writer {
    fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn record(&mut self, rel: &str) -> Result<(), StageError> {
        let p = self.path(rel);
        let bytes = std::fs::read(&p)
            .map_err(|e| StageError::new("write", format!("{}: {e}", p.display())))?;
        self.files.insert(rel.to_string(), sha256_hex(&bytes));
        Ok(())
    }

    fn io<T>(&mut self, rel: &str, f: impl FnOnce(&Path) -> Result<T, crate::io::IoError>) -> Result<T, StageError> {
        let p = self.path(rel);
        let v = f(&p).map_err(|e| StageError::new("write", e))?;
        self.record(rel)?;
        Ok(v)
    }

    fn text(&mut self, rel: &str, body: &str) -> Result<(), StageError> {
        let p = self.path(rel);
        std::fs::write(&p, body)
            .map_err(|e| StageError::new("write", format!("{}: {e}", p.display())))?;
        self.record(rel)
    }
}

fn file_hash(stage: &'static str, p: &Path) -> Result<String, StageError> {
    std::fs::read(p)
        .map(|b| sha256_hex(&b))
        .map_err(|e| StageError::new(stage, format!("{}: {e}", p.display())))
}

/// Runs every stage in order and writes its outputs, finishing with
/// `manifest.json`.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineRun, StageError> {
    config.validate()?;
    let root = config.output_dir.clone();
    std::fs::create_dir_all(root.join("maps"))
        .map_err(|e| StageError::new("write", format!("{}: {e}", root.display())))?;
    let mut w = Writer {
        root: root.clone(),
        files: BTreeMap::new(),
    };
    let mut counts = BTreeMap::new();

    let poses = read_poses(&config.poses).map_err(|e| StageError::new("load", e))?;
    let events = read_events(&config.events).map_err(|e| StageError::new("load", e))?;
    counts.insert("pose_records".into(), poses.len());
    counts.insert("excluded_pose_records".into(), poses.iter().filter(|p| p.excluded).count());
    counts.insert("events".into(), events.len());

    let normalized = normalize_records(&poses, config.axis(), config.dedup)?;
    w.io("normalized.csv", |p| write_normalized(p, &normalized))?;
    counts.insert("normalized_records".into(), normalized.len());

    let detections = detect_one_v_ones(&events)?;
    w.io("one_v_one.csv", |p| write_csv_rows(p, &detections))?;
    counts.insert("one_v_one_shots".into(), detections.iter().filter(|d| d.is_one_v_one).count());

    let mut features = one_v_one_features(&normalized, &detections)?;
    let technique_model = fit_and_label(&mut features, config.seeds.kmeans, config.scale)?;
    w.io("technique_model.json", |p| write_json(p, &technique_model))?;
    w.io("features_1v1.csv", |p| write_features(p, &features))?;
    let reps = representatives(&technique_model, &features)?;
    w.io("representatives.csv", |p| write_csv_rows(p, &reps))?;
    counts.insert("one_v_one_records".into(), features.len());
    for t in TechniqueName::ALL {
        let n = features.iter().filter(|f| f.technique == Some(t)).count();
        counts.insert(format!("technique_{}", t.as_str()), n);
    }

    let (tsne_rows, _) = embed_features(
        Some(&technique_model),
        &features,
        config.tsne_perplexity,
        config.seeds.tsne,
        config.tsne_iterations,
    )?;
    w.io("tsne.csv", |p| write_csv_rows(p, &tsne_rows))?;

    let techniques = shot_techniques(&features);
    let shots = xs_training_shots(&events, &detections, &techniques)?;
    let training = train_xs(&shots, config.seeds.split).map_err(|e| StageError::new("train-xs", e))?;
    let xs_summary = XsSummary::from_training(&training);
    w.io("xs_model.json", |p| write_json(p, &training.model))?;
    w.io("xs_summary.json", |p| write_json(p, &xs_summary))?;
    counts.insert("xs_training_shots".into(), shots.len());

    let model = &training.model;
    let heat = all_xsaa_maps(model, &config.grid).map_err(|e| StageError::new("maps", e))?;
    for m in &heat {
        let stem = map_file_stem(Some(m.technique), m.under_pressure);
        w.io(&format!("maps/{stem}.csv"), |p| write_csv_rows(p, &m.cells))?;
        w.text(&format!("maps/{stem}.svg"), &heatmap_svg(m))?;
    }
    for pressure in [false, true] {
        let m = optimal_map(model, pressure, &config.grid).map_err(|e| StageError::new("maps", e))?;
        let stem = map_file_stem(None, pressure);
        w.io(&format!("maps/{stem}.csv"), |p| write_csv_rows(p, &m.cells))?;
        w.text(&format!("maps/{stem}.svg"), &technique_map_svg(&m))?;
    }
    counts.insert("xsaa_maps".into(), heat.len());
    counts.insert("optimal_maps".into(), 2);

    let kshots = keeper_shots(&events, &shots);
    let ranking = rank_keepers(model, &kshots, config.min_faced, &config.grid)
        .map_err(|e| StageError::new("rank-keepers", e))?;
    w.io("ranking.csv", |p| write_csv_rows(p, &ranking.rows))?;
    counts.insert("ranked_keepers".into(), ranking.rows.len());

    let pens = penalty_records(&normalized, &events)?;
    let clustering = cluster_penalty_records(&pens, config.seeds.kmeans, config.scale)?;
    let prows = penalty_rows(&pens, &clustering)?;
    w.io("penalty_model.json", |p| write_json(p, &clustering))?;
    w.io("penalty_features.csv", |p| write_csv_rows(p, &prows))?;
    counts.insert("penalty_records".into(), pens.len());
    counts.insert("penalty_k".into(), clustering.chosen_k);

    let regression = penalty_study(&pens, config.seeds.split, config.all_data)
        .map_err(|e| StageError::new("penalty-regression", e))?;
    w.io("regression.json", |p| write_json(p, &regression))?;
    w.io("regression.csv", |p| write_csv_rows(p, &regression.terms))?;
    w.text("regression.txt", &regression.to_table())?;

    let mut inputs = BTreeMap::new();
    inputs.insert("poses".to_string(), file_hash("load", &config.poses)?);
    inputs.insert("events".to_string(), file_hash("load", &config.events)?);
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: config.hash(),
        seeds: config.seeds,
        inputs,
        counts,
        files: w.files.clone(),
    };
    write_json(&root.join("manifest.json"), &manifest).map_err(|e| StageError::new("write", e))?;

    Ok(PipelineRun {
        output_dir: root,
        manifest,
        xs: xs_summary,
        regression,
    })
}
