//! Flat-file readers and writers. CSV or JSON is chosen from the file
//! extension (`.json` means JSON, anything else CSV).

use crate::geometry::{BodyPart, Outcome, PitchPoint, ShotEvent};
use crate::pose::NUM_JOINTS;
use crate::technique::{OneVOneFeature, TechniqueName, FEATURE_LEN};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
    #[error("{}: record {record}: {msg}", path.display())]
    Record {
        path: PathBuf,
        record: String,
        msg: String,
    },
}

impl IoError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn format(path: &Path, msg: impl ToString) -> Self {
        IoError::Format {
            path: path.to_path_buf(),
            msg: msg.to_string(),
        }
    }

    fn record(path: &Path, record: impl ToString, msg: impl ToString) -> Self {
        IoError::Record {
            path: path.to_path_buf(),
            record: record.to_string(),
            msg: msg.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Csv,
    Json,
}

impl DataFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => DataFormat::Json,
            _ => DataFormat::Csv,
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, IoError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| IoError::io(parent, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| IoError::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>, IoError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| IoError::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| IoError::format(path, e))?;
    w.write_all(b"\n").map_err(|e| IoError::io(path, e))?;
    w.flush().map_err(|e| IoError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    serde_json::from_reader(open(path)?).map_err(|e| IoError::format(path, e))
}

/// Writes flat serde rows with a header line.
pub fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r).map_err(|e| IoError::format(path, e))?;
    }
    w.flush().map_err(|e| IoError::io(path, e))
}

pub fn read_csv_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, IoError> {
    let mut r = csv::Reader::from_reader(open(path)?);
    r.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| IoError::record(path, format!("line {}", i + 2), e)))
        .collect()
}

/// Rows as JSON arrays or CSV, by extension.
pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), IoError> {
    match DataFormat::from_path(path) {
        DataFormat::Json => write_json(path, rows),
        DataFormat::Csv => write_csv_rows(path, rows),
    }
}

pub fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, IoError> {
    match DataFormat::from_path(path) {
        DataFormat::Json => read_json(path),
        DataFormat::Csv => read_csv_rows(path),
    }
}

/// Header-indexed CSV table of raw strings.
struct Table {
    path: PathBuf,
    cols: HashMap<String, usize>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn read(path: &Path) -> Result<Self, IoError> {
        let mut r = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(open(path)?);
        let cols = r
            .headers()
            .map_err(|e| IoError::format(path, e))?
            .iter()
            .enumerate()
            .map(|(i, h)| (h.to_string(), i))
            .collect();
        let rows = r
            .records()
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| IoError::format(path, e))?;
        Ok(Table {
            path: path.to_path_buf(),
            cols,
            rows,
        })
    }

    fn col(&self, name: &str) -> Result<usize, IoError> {
        self.cols
            .get(name)
            .copied()
            .ok_or_else(|| IoError::format(&self.path, format!("missing column `{name}`")))
    }

    fn optional_col(&self, name: &str) -> Option<usize> {
        self.cols.get(name).copied()
    }
}

fn cell<'a>(rec: &'a csv::StringRecord, i: usize) -> &'a str {
    rec.get(i).unwrap_or("")
}

fn parse_f64(s: &str, what: &str) -> Result<f64, String> {
    s.parse::<f64>().map_err(|_| format!("bad {what} `{s}`"))
}

fn parse_flag(s: &str, what: &str) -> Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Ok(true),
        "0" | "false" | "no" | "" => Ok(false),
        _ => Err(format!("bad {what} `{s}`")),
    }
}

// ---------------------------------------------------------------- poses

/// One camera view of one shot: 16 raw keypoints as read from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseRecord {
    pub shot_id: String,
    /// 0-based view index within the shot.
    pub view: usize,
    pub joints: [[f64; 3]; NUM_JOINTS],
    pub excluded: bool,
}

impl PoseRecord {
    pub fn key(&self) -> String {
        format!("{}#{}", self.shot_id, self.view)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PoseRow {
    shot_id: String,
    joint: usize,
    x: f64,
    y: f64,
    z: f64,
    #[serde(deserialize_with = "flag_de", serialize_with = "flag_ser")]
    excluded: bool,
}

fn flag_de<'de, D: serde::Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Flag {
        B(bool),
        N(u8),
        S(String),
    }
    match Flag::deserialize(d)? {
        Flag::B(b) => Ok(b),
        Flag::N(n) => Ok(n != 0),
        Flag::S(s) => parse_flag(&s, "flag").map_err(serde::de::Error::custom),
    }
}

fn flag_ser<S: serde::Serializer>(b: &bool, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_u8(u8::from(*b))
}

/// Groups rows into records. A new record starts when the shot id changes
/// or a joint index repeats within the current record.
fn group_pose_rows(path: &Path, rows: Vec<PoseRow>) -> Result<Vec<PoseRecord>, IoError> {
    struct Partial {
        shot_id: String,
        joints: [Option<[f64; 3]>; NUM_JOINTS],
        excluded: bool,
    }
    let mut views: HashMap<String, usize> = HashMap::new();
    let mut out = Vec::new();
    let mut cur: Option<Partial> = None;

    let mut finish = |p: Partial, out: &mut Vec<PoseRecord>| -> Result<(), IoError> {
        let view = views.entry(p.shot_id.clone()).or_insert(0);
        let present = p.joints.iter().filter(|j| j.is_some()).count();
        if present != NUM_JOINTS {
            return Err(IoError::record(
                path,
                format!("{}#{}", p.shot_id, view),
                format!("has {present} of {NUM_JOINTS} joints"),
            ));
        }
        let mut joints = [[0.0; 3]; NUM_JOINTS];
        for (d, s) in joints.iter_mut().zip(p.joints) {
            *d = s.expect("checked");
        }
        out.push(PoseRecord {
            shot_id: p.shot_id,
            view: *view,
            joints,
            excluded: p.excluded,
        });
        *view += 1;
        Ok(())
    };

    for row in rows {
        if row.joint >= NUM_JOINTS {
            return Err(IoError::record(
                path,
                &row.shot_id,
                format!("joint index {} out of range 0..{}", row.joint, NUM_JOINTS - 1),
            ));
        }
        let restart = match &cur {
            None => true,
            Some(p) => p.shot_id != row.shot_id || p.joints[row.joint].is_some(),
        };
        if restart {
            if let Some(p) = cur.take() {
                finish(p, &mut out)?;
            }
            cur = Some(Partial {
                shot_id: row.shot_id.clone(),
                joints: [None; NUM_JOINTS],
                excluded: false,
            });
        }
        let p = cur.as_mut().expect("set above");
        p.joints[row.joint] = Some([row.x, row.y, row.z]);
        p.excluded |= row.excluded;
    }
    if let Some(p) = cur.take() {
        finish(p, &mut out)?;
    }
    Ok(out)
}

/// Reads `shot_id,joint,x,y,z,excluded` rows (CSV or JSON records).
pub fn read_poses(path: &Path) -> Result<Vec<PoseRecord>, IoError> {
    let rows: Vec<PoseRow> = match DataFormat::from_path(path) {
        DataFormat::Json => read_json(path)?,
        DataFormat::Csv => {
            let t = Table::read(path)?;
            let (s, j, x, y, z) = (
                t.col("shot_id")?,
                t.col("joint")?,
                t.col("x")?,
                t.col("y")?,
                t.col("z")?,
            );
            let e = t.optional_col("excluded");
            t.rows
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let line = || format!("line {}", i + 2);
                    let num = |c: usize, what: &str| {
                        parse_f64(cell(r, c), what).map_err(|m| IoError::record(path, line(), m))
                    };
                    Ok(PoseRow {
                        shot_id: cell(r, s).to_string(),
                        joint: cell(r, j).parse().map_err(|_| {
                            IoError::record(path, line(), format!("bad joint `{}`", cell(r, j)))
                        })?,
                        x: num(x, "x")?,
                        y: num(y, "y")?,
                        z: num(z, "z")?,
                        excluded: match e {
                            Some(c) => parse_flag(cell(r, c), "excluded")
                                .map_err(|m| IoError::record(path, line(), m))?,
                            None => false,
                        },
                    })
                })
                .collect::<Result<_, IoError>>()?
        }
    };
    group_pose_rows(path, rows)
}

pub fn write_poses(path: &Path, records: &[PoseRecord]) -> Result<(), IoError> {
    let rows: Vec<PoseRow> = records
        .iter()
        .flat_map(|r| {
            r.joints.iter().enumerate().map(|(j, p)| PoseRow {
                shot_id: r.shot_id.clone(),
                joint: j,
                x: p[0],
                y: p[1],
                z: p[2],
                excluded: r.excluded,
            })
        })
        .collect();
    write_rows(path, &rows)
}

// ---------------------------------------------------------------- events

const EVENT_COLUMNS: [&str; 12] = [
    "shot_id",
    "match_id",
    "goalkeeper_name",
    "striker_x",
    "striker_y",
    "gk_x",
    "gk_y",
    "defenders",
    "body_part",
    "outcome",
    "under_pressure",
    "is_penalty",
];

fn parse_body_part(s: &str) -> Result<BodyPart, String> {
    match s.to_ascii_lowercase().as_str() {
        "foot" | "right foot" | "left foot" | "right_foot" | "left_foot" => Ok(BodyPart::Foot),
        "other" | "head" | "header" => Ok(BodyPart::Other),
        _ => Err(format!("bad body_part `{s}`")),
    }
}

fn parse_outcome(s: &str) -> Result<Outcome, String> {
    match s.to_ascii_lowercase().replace(' ', "_").as_str() {
        "goal" => Ok(Outcome::Goal),
        "saved" => Ok(Outcome::Saved),
        "off_target" | "off_t" | "wayward" | "post" => Ok(Outcome::OffTarget),
        "blocked" => Ok(Outcome::Blocked),
        _ => Err(format!("bad outcome `{s}`")),
    }
}

fn outcome_str(o: Outcome) -> &'static str {
    match o {
        Outcome::Goal => "goal",
        Outcome::Saved => "saved",
        Outcome::OffTarget => "off_target",
        Outcome::Blocked => "blocked",
    }
}

/// `"x y;x y"` list of defender locations.
fn parse_defenders(s: &str) -> Result<Vec<PitchPoint>, String> {
    s.split(';')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            let mut it = p.split_whitespace();
            match (it.next(), it.next(), it.next()) {
                (Some(x), Some(y), None) => Ok(PitchPoint::new(
                    parse_f64(x, "defender x")?,
                    parse_f64(y, "defender y")?,
                )),
                _ => Err(format!("bad defender `{p}`")),
            }
        })
        .collect()
}

fn point_on_pitch(x: f64, y: f64) -> Result<PitchPoint, String> {
    PitchPoint::on_pitch(x, y).map_err(|e| e.to_string())
}

pub fn read_events(path: &Path) -> Result<Vec<ShotEvent>, IoError> {
    if DataFormat::from_path(path) == DataFormat::Json {
        return read_json(path);
    }
    let t = Table::read(path)?;
    let mut idx = [0usize; 12];
    for (slot, name) in idx.iter_mut().zip(EVENT_COLUMNS) {
        *slot = t.col(name)?;
    }
    let mut out = Vec::with_capacity(t.rows.len());
    for r in &t.rows {
        let g = |k: usize| cell(r, idx[k]);
        let id = g(0).to_string();
        let parsed = (|| -> Result<ShotEvent, String> {
            let striker = point_on_pitch(parse_f64(g(3), "striker_x")?, parse_f64(g(4), "striker_y")?)?;
            let gk = match (g(5), g(6)) {
                ("", "") => None,
                (x, y) => Some(point_on_pitch(parse_f64(x, "gk_x")?, parse_f64(y, "gk_y")?)?),
            };
            Ok(ShotEvent {
                shot_id: id.clone(),
                match_id: g(1).to_string(),
                goalkeeper_name: g(2).to_string(),
                striker_location: striker,
                gk_location: gk,
                defender_locations: parse_defenders(g(7))?,
                body_part: parse_body_part(g(8))?,
                outcome: parse_outcome(g(9))?,
                under_pressure: parse_flag(g(10), "under_pressure")?,
                is_penalty: parse_flag(g(11), "is_penalty")?,
            })
        })();
        out.push(parsed.map_err(|m| IoError::record(path, &id, m))?);
    }
    Ok(out)
}

pub fn write_events(path: &Path, events: &[ShotEvent]) -> Result<(), IoError> {
    if DataFormat::from_path(path) == DataFormat::Json {
        return write_json(path, events);
    }
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = |e: csv::Error| IoError::format(path, e);
    w.write_record(EVENT_COLUMNS).map_err(err)?;
    for e in events {
        let (gx, gy) = match e.gk_location {
            Some(p) => (p.x.to_string(), p.y.to_string()),
            None => (String::new(), String::new()),
        };
        let defenders = e
            .defender_locations
            .iter()
            .map(|d| format!("{} {}", d.x, d.y))
            .collect::<Vec<_>>()
            .join(";");
        w.write_record([
            e.shot_id.clone(),
            e.match_id.clone(),
            e.goalkeeper_name.clone(),
            e.striker_location.x.to_string(),
            e.striker_location.y.to_string(),
            gx,
            gy,
            defenders,
            match e.body_part {
                BodyPart::Foot => "foot".into(),
                BodyPart::Other => "other".into(),
            },
            outcome_str(e.outcome).into(),
            u8::from(e.under_pressure).to_string(),
            u8::from(e.is_penalty).to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| IoError::io(path, e))
}

// ---------------------------------------------------------------- wide tables

fn joint_headers() -> Vec<String> {
    (0..NUM_JOINTS)
        .flat_map(|j| ["x", "y", "z"].map(|a| format!("j{j}_{a}")))
        .collect()
}

/// A view-normalised pose as written by `normalize`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedRecord {
    pub shot_id: String,
    pub view: usize,
    pub theta_star: u16,
    pub flipped: bool,
    pub joints: [[f64; 3]; NUM_JOINTS],
}

pub fn write_normalized(path: &Path, recs: &[NormalizedRecord]) -> Result<(), IoError> {
    if DataFormat::from_path(path) == DataFormat::Json {
        return write_json(path, recs);
    }
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = |e: csv::Error| IoError::format(path, e);
    let mut header: Vec<String> = ["shot_id", "view", "theta_star", "flipped"]
        .map(String::from)
        .to_vec();
    header.extend(joint_headers());
    w.write_record(&header).map_err(err)?;
    for r in recs {
        let mut row = vec![
            r.shot_id.clone(),
            r.view.to_string(),
            r.theta_star.to_string(),
            u8::from(r.flipped).to_string(),
        ];
        row.extend(r.joints.iter().flatten().map(|v| v.to_string()));
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| IoError::io(path, e))
}

pub fn read_normalized(path: &Path) -> Result<Vec<NormalizedRecord>, IoError> {
    if DataFormat::from_path(path) == DataFormat::Json {
        return read_json(path);
    }
    let t = Table::read(path)?;
    let (s, v, th, fl) = (
        t.col("shot_id")?,
        t.col("view")?,
        t.col("theta_star")?,
        t.col("flipped")?,
    );
    let jc = joint_headers()
        .iter()
        .map(|h| t.col(h))
        .collect::<Result<Vec<_>, _>>()?;
    t.rows
        .iter()
        .map(|r| {
            let id = cell(r, s).to_string();
            let fail = |m: String| IoError::record(path, &id, m);
            let mut joints = [[0.0; 3]; NUM_JOINTS];
            for (k, &c) in jc.iter().enumerate() {
                joints[k / 3][k % 3] = parse_f64(cell(r, c), "coordinate").map_err(fail)?;
            }
            Ok(NormalizedRecord {
                view: cell(r, v).parse().map_err(|_| fail("bad view".into()))?,
                theta_star: cell(r, th).parse().map_err(|_| fail("bad theta_star".into()))?,
                flipped: parse_flag(cell(r, fl), "flipped").map_err(fail)?,
                joints,
                shot_id: id,
            })
        })
        .collect()
}

/// A 1v1 feature row, optionally carrying its assigned technique.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub shot_id: String,
    pub view: usize,
    pub technique: Option<TechniqueName>,
    pub feature: OneVOneFeature,
}

fn feature_headers() -> Vec<String> {
    (0..FEATURE_LEN).map(|i| format!("f{i}")).collect()
}

pub fn write_features(path: &Path, recs: &[FeatureRecord]) -> Result<(), IoError> {
    if DataFormat::from_path(path) == DataFormat::Json {
        return write_json(path, recs);
    }
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = |e: csv::Error| IoError::format(path, e);
    let mut header: Vec<String> = ["shot_id", "view", "technique"].map(String::from).to_vec();
    header.extend(feature_headers());
    w.write_record(&header).map_err(err)?;
    for r in recs {
        let mut row = vec![
            r.shot_id.clone(),
            r.view.to_string(),
            r.technique.map(|t| t.as_str().to_string()).unwrap_or_default(),
        ];
        row.extend(r.feature.values().iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| IoError::io(path, e))
}

pub fn read_features(path: &Path) -> Result<Vec<FeatureRecord>, IoError> {
    if DataFormat::from_path(path) == DataFormat::Json {
        return read_json(path);
    }
    let t = Table::read(path)?;
    let s = t.col("shot_id")?;
    let v = t.optional_col("view");
    let tc = t.optional_col("technique");
    let fc = feature_headers()
        .iter()
        .map(|h| t.col(h))
        .collect::<Result<Vec<_>, _>>()?;
    t.rows
        .iter()
        .map(|r| {
            let id = cell(r, s).to_string();
            let fail = |m: String| IoError::record(path, &id, m);
            let values = fc
                .iter()
                .map(|&c| parse_f64(cell(r, c), "feature"))
                .collect::<Result<Vec<_>, _>>()
                .map_err(fail)?;
            let technique = match tc.map(|c| cell(r, c)) {
                None | Some("") => None,
                Some(name) => Some(name.parse::<TechniqueName>().map_err(|_| {
                    fail(format!("bad technique `{name}`"))
                })?),
            };
            Ok(FeatureRecord {
                view: match v {
                    Some(c) => cell(r, c).parse().map_err(|_| fail("bad view".into()))?,
                    None => 0,
                },
                technique,
                feature: OneVOneFeature::new(values).map_err(|e| fail(e.to_string()))?,
                shot_id: id,
            })
        })
        .collect()
}

/// Counts of records per shot id, in id order.
pub fn records_per_shot<'a>(ids: impl IntoIterator<Item = &'a str>) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for id in ids {
        *m.entry(id.to_string()).or_insert(0) += 1;
    }
    m
}
