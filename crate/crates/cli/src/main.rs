use clap::{Args, Parser, Subcommand, ValueEnum};
use keeper_lab::analytics::{
    heatmap_svg, optimal_map, rank_keepers, save_report, technique_map_svg, xsaa_map, GridSpec,
    DEFAULT_MIN_FACED,
};
use keeper_lab::io::{
    read_events, read_features, read_json, read_poses, write_csv_rows, write_events,
    write_features, write_json, write_normalized, write_poses, FeatureRecord, IoError,
};
use keeper_lab::pipeline::{
    cluster_penalty_records, detect_one_v_ones, embed_features, fit_and_label, keeper_shots,
    label_features, normalize_records, one_v_one_features, penalty_records, penalty_rows,
    run_pipeline, shot_techniques, xs_training_shots, Dedup, DetectionRow, PipelineConfig, Seeds,
    StageError, XsSummary,
};
use keeper_lab::inference::penalty_study;
use keeper_lab::pose::VerticalAxis;
use keeper_lab::synthetic::{generate, SynthOptions};
use keeper_lab::technique::{TechniqueModel, TechniqueName};
use keeper_lab::xs::{train_xs, XsModel};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "keeper-lab", version, about = "Goalkeeper technique analysis from poses and shot events")]
struct Cli {
    /// Output format; inferred from the output extension when omitted.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DedupArg {
    First,
    All,
}

impl From<DedupArg> for Dedup {
    fn from(d: DedupArg) -> Self {
        match d {
            DedupArg::First => Dedup::First,
            DedupArg::All => Dedup::All,
        }
    }
}

#[derive(Args, Clone)]
struct PoseArgs {
    #[arg(long)]
    poses: PathBuf,
    /// Pose y axis points down (image convention).
    #[arg(long)]
    y_down: bool,
    #[arg(long, value_enum, default_value = "all")]
    dedup: DedupArg,
}

impl PoseArgs {
    fn axis(&self) -> VerticalAxis {
        if self.y_down {
            VerticalAxis::YDown
        } else {
            VerticalAxis::YUp
        }
    }
}

#[derive(Args, Clone, Copy)]
struct GridArgs {
    #[arg(long, default_value_t = 96.0)]
    x_min: f64,
    #[arg(long, default_value_t = 120.0)]
    x_max: f64,
    #[arg(long, default_value_t = 0.0)]
    y_min: f64,
    #[arg(long, default_value_t = 80.0)]
    y_max: f64,
    /// Cell size in yards.
    #[arg(long, default_value_t = 1.0)]
    cell: f64,
}

impl From<GridArgs> for GridSpec {
    fn from(g: GridArgs) -> Self {
        GridSpec {
            x_min: g.x_min,
            x_max: g.x_max,
            y_min: g.y_min,
            y_max: g.y_max,
            cell: g.cell,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// View-normalise pose records.
    Normalize {
        #[command(flatten)]
        poses: PoseArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Flag 1v1 shots and compute GKEM and shot context.
    #[command(name = "detect-1v1")]
    Detect1v1 {
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cluster 1v1 poses into the four techniques.
    #[command(name = "cluster-1v1")]
    Cluster1v1 {
        #[command(flatten)]
        poses: PoseArgs,
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        no_scale: bool,
        #[arg(long)]
        out: PathBuf,
        /// Also write the labelled feature table.
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Embed 1v1 features in two dimensions.
    Tsne {
        #[arg(long)]
        features: PathBuf,
        /// Embed in this model's clustering space instead of raw features.
        #[arg(long)]
        technique_model: Option<PathBuf>,
        #[arg(long, default_value_t = 30.0)]
        perplexity: f64,
        #[arg(long, default_value_t = 1000)]
        iterations: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cluster penalty saves with a silhouette sweep over k.
    #[command(name = "cluster-penalty")]
    ClusterPenalty {
        #[command(flatten)]
        poses: PoseArgs,
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        no_scale: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Train the expected-saves classifier.
    #[command(name = "train-xs")]
    TrainXs {
        #[command(flatten)]
        poses: PoseArgs,
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        technique_model: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Grid-search and test-accuracy summary.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// xSAA raster for one technique.
    #[command(name = "xsaa-map")]
    XsaaMap {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_parser = parse_technique)]
        technique: TechniqueName,
        #[arg(long)]
        pressure: bool,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Optimal-technique raster.
    #[command(name = "optimal-map")]
    OptimalMap {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        pressure: bool,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank keepers by how often they chose the optimal technique.
    #[command(name = "rank-keepers")]
    RankKeepers {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        technique_model: PathBuf,
        #[command(flatten)]
        poses: PoseArgs,
        #[arg(long)]
        events: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MIN_FACED)]
        min_faced: usize,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Logistic regression of penalty saves on the penalty features.
    #[command(name = "penalty-regression")]
    PenaltyRegression {
        #[command(flatten)]
        poses: PoseArgs,
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Fit and evaluate on every row instead of a 70/30 split.
        #[arg(long)]
        all_data: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-technique xS for one shot, with a verdict on the choice made.
    Report {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        shot_id: String,
        /// Technique used; otherwise classified from the shot's pose.
        #[arg(long, value_parser = parse_technique)]
        technique: Option<TechniqueName>,
        #[arg(long)]
        poses: Option<PathBuf>,
        #[arg(long)]
        technique_model: Option<PathBuf>,
        #[arg(long)]
        y_down: bool,
    },
    /// Run every stage from a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override all three seeds.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        all_data: bool,
        #[arg(long)]
        no_scale: bool,
    },
    /// Write a synthetic dataset and a matching config.
    Synth {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 60)]
        one_v_ones: usize,
        #[arg(long, default_value_t = 120)]
        penalties: usize,
    },
}

fn parse_technique(s: &str) -> Result<TechniqueName, String> {
    s.parse::<TechniqueName>().map_err(|e| e.to_string())
}

fn load(e: IoError) -> StageError {
    StageError::new("load", e)
}

fn write(e: IoError) -> StageError {
    StageError::new("write", e)
}

fn format_for(flag: Option<Format>, path: &Path) -> Format {
    flag.unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
        Some(e) if e.eq_ignore_ascii_case("svg") => Format::Svg,
        _ => Format::Csv,
    })
}

fn write_table<T: Serialize>(path: &Path, rows: &[T], fmt: Option<Format>) -> Result<(), StageError> {
    match format_for(fmt, path) {
        Format::Json => write_json(path, rows).map_err(write),
        Format::Csv => write_csv_rows(path, rows).map_err(write),
        Format::Svg => Err(StageError::new("write", "svg output is only available for maps")),
    }
}

fn write_text(path: &Path, body: &str) -> Result<(), StageError> {
    std::fs::write(path, body).map_err(|e| StageError::new("write", format!("{}: {e}", path.display())))
}

/// Events, detections and labelled 1v1 features for the commands that
/// need technique labels.
fn labelled_features(
    poses: &PoseArgs,
    events: &Path,
    model: &TechniqueModel,
) -> Result<(Vec<keeper_lab::geometry::ShotEvent>, Vec<DetectionRow>, Vec<FeatureRecord>), StageError> {
    let recs = read_poses(&poses.poses).map_err(load)?;
    let events = read_events(events).map_err(load)?;
    let normalized = normalize_records(&recs, poses.axis(), poses.dedup.into())?;
    let detections = detect_one_v_ones(&events)?;
    let mut features = one_v_one_features(&normalized, &detections)?;
    label_features(model, &mut features)?;
    Ok((events, detections, features))
}

fn execute(cli: Cli) -> Result<(), StageError> {
    let fmt = cli.format;
    match cli.command {
        Command::Normalize { poses, out } => {
            let recs = read_poses(&poses.poses).map_err(load)?;
            let normalized = normalize_records(&recs, poses.axis(), poses.dedup.into())?;
            match format_for(fmt, &out) {
                Format::Json => write_json(&out, &normalized).map_err(write)?,
                _ => write_normalized(&out, &normalized).map_err(write)?,
            }
            eprintln!("normalized {} of {} records", normalized.len(), recs.len());
        }
        Command::Detect1v1 { events, out } => {
            let events = read_events(&events).map_err(load)?;
            let rows = detect_one_v_ones(&events)?;
            write_table(&out, &rows, fmt)?;
            eprintln!(
                "{} of {} non-penalty shots are 1v1s",
                rows.iter().filter(|r| r.is_one_v_one).count(),
                rows.len()
            );
        }
        Command::Cluster1v1 {
            poses,
            events,
            seed,
            no_scale,
            out,
            features,
        } => {
            let recs = read_poses(&poses.poses).map_err(load)?;
            let events = read_events(&events).map_err(load)?;
            let normalized = normalize_records(&recs, poses.axis(), poses.dedup.into())?;
            let detections = detect_one_v_ones(&events)?;
            let mut feats = one_v_one_features(&normalized, &detections)?;
            let model = fit_and_label(&mut feats, seed, !no_scale)?;
            write_json(&out, &model).map_err(write)?;
            if let Some(p) = features {
                write_features(&p, &feats).map_err(write)?;
            }
            for t in TechniqueName::ALL {
                let n = feats.iter().filter(|f| f.technique == Some(t)).count();
                eprintln!("{:<16}{n}", t.as_str());
            }
        }
        Command::Tsne {
            features,
            technique_model,
            perplexity,
            iterations,
            seed,
            out,
        } => {
            let feats = read_features(&features).map_err(load)?;
            let model: Option<TechniqueModel> = technique_model
                .map(|p| read_json(&p).map_err(load))
                .transpose()?;
            let (rows, emb) = embed_features(model.as_ref(), &feats, perplexity, seed, iterations)?;
            write_table(&out, &rows, fmt)?;
            eprintln!("final KL {:.6}", emb.final_kl);
        }
        Command::ClusterPenalty {
            poses,
            events,
            seed,
            no_scale,
            out,
            features,
        } => {
            let recs = read_poses(&poses.poses).map_err(load)?;
            let events = read_events(&events).map_err(load)?;
            let normalized = normalize_records(&recs, poses.axis(), poses.dedup.into())?;
            let pens = penalty_records(&normalized, &events)?;
            let clustering = cluster_penalty_records(&pens, seed, !no_scale)?;
            write_json(&out, &clustering).map_err(write)?;
            if let Some(p) = features {
                write_table(&p, &penalty_rows(&pens, &clustering)?, None)?;
            }
            for (k, s) in &clustering.silhouettes {
                eprintln!("k={k} silhouette {s:.4}");
            }
            eprintln!("chosen k={}", clustering.chosen_k);
        }
        Command::TrainXs {
            poses,
            events,
            technique_model,
            seed,
            out,
            summary,
        } => {
            let model: TechniqueModel = read_json(&technique_model).map_err(load)?;
            let (events, detections, feats) = labelled_features(&poses, &events, &model)?;
            let shots = xs_training_shots(&events, &detections, &shot_techniques(&feats))?;
            let training = train_xs(&shots, seed).map_err(|e| StageError::new("train-xs", e))?;
            write_json(&out, &training.model).map_err(write)?;
            let s = XsSummary::from_training(&training);
            if let Some(p) = summary {
                write_json(&p, &s).map_err(write)?;
            }
            eprintln!(
                "selected {} C={} test accuracy {:.3} ({} train / {} test)",
                if s.selected.rbf { "rbf" } else { "linear" },
                s.selected.c,
                s.test_accuracy,
                s.n_train,
                s.n_test
            );
        }
        Command::XsaaMap {
            model,
            technique,
            pressure,
            grid,
            out,
        } => {
            let m: XsModel = read_json(&model).map_err(load)?;
            let map = xsaa_map(&m, technique, pressure, &grid.into())
                .map_err(|e| StageError::new("maps", e))?;
            match format_for(fmt, &out) {
                Format::Csv => write_csv_rows(&out, &map.cells).map_err(write)?,
                Format::Json => write_json(&out, &map).map_err(write)?,
                Format::Svg => write_text(&out, &heatmap_svg(&map))?,
            }
        }
        Command::OptimalMap {
            model,
            pressure,
            grid,
            out,
        } => {
            let m: XsModel = read_json(&model).map_err(load)?;
            let map = optimal_map(&m, pressure, &grid.into()).map_err(|e| StageError::new("maps", e))?;
            match format_for(fmt, &out) {
                Format::Csv => write_csv_rows(&out, &map.cells).map_err(write)?,
                Format::Json => write_json(&out, &map).map_err(write)?,
                Format::Svg => write_text(&out, &technique_map_svg(&map))?,
            }
        }
        Command::RankKeepers {
            model,
            technique_model,
            poses,
            events,
            min_faced,
            grid,
            out,
        } => {
            let xs: XsModel = read_json(&model).map_err(load)?;
            let tm: TechniqueModel = read_json(&technique_model).map_err(load)?;
            let (events, detections, feats) = labelled_features(&poses, &events, &tm)?;
            let shots = xs_training_shots(&events, &detections, &shot_techniques(&feats))?;
            let ranking = rank_keepers(&xs, &keeper_shots(&events, &shots), min_faced, &grid.into())
                .map_err(|e| StageError::new("rank-keepers", e))?;
            write_table(&out, &ranking.rows, fmt)?;
            for r in &ranking.rows {
                eprintln!("{:<24}{:>7.1}%{:>5}", r.goalkeeper, r.optimal_technique_pct, r.one_v_ones_faced);
            }
        }
        Command::PenaltyRegression {
            poses,
            events,
            seed,
            all_data,
            out,
        } => {
            let recs = read_poses(&poses.poses).map_err(load)?;
            let events = read_events(&events).map_err(load)?;
            let normalized = normalize_records(&recs, poses.axis(), poses.dedup.into())?;
            let pens = penalty_records(&normalized, &events)?;
            let summary = penalty_study(&pens, seed, all_data)
                .map_err(|e| StageError::new("penalty-regression", e))?;
            print!("{}", summary.to_table());
            if let Some(p) = out {
                match format_for(fmt, &p) {
                    Format::Json => write_json(&p, &summary).map_err(write)?,
                    _ => write_csv_rows(&p, &summary.terms).map_err(write)?,
                }
            }
        }
        Command::Report {
            model,
            events,
            shot_id,
            technique,
            poses,
            technique_model,
            y_down,
        } => {
            let xs: XsModel = read_json(&model).map_err(load)?;
            let evs = read_events(&events).map_err(load)?;
            let shot = evs
                .iter()
                .find(|e| e.shot_id == shot_id)
                .ok_or_else(|| StageError::with_records("report", "shot not found", vec![shot_id.clone()]))?;
            let chosen = match (technique, poses, technique_model) {
                (Some(t), _, _) => t,
                (None, Some(p), Some(m)) => {
                    let tm: TechniqueModel = read_json(&m).map_err(load)?;
                    let args = PoseArgs {
                        poses: p,
                        y_down,
                        dedup: DedupArg::All,
                    };
                    let (_, _, feats) = labelled_features(&args, &events, &tm)?;
                    *shot_techniques(&feats).get(&shot_id).ok_or_else(|| {
                        StageError::with_records("report", "no 1v1 pose for shot", vec![shot_id.clone()])
                    })?
                }
                _ => {
                    return Err(StageError::new(
                        "report",
                        "give --technique, or --poses with --technique-model",
                    ))
                }
            };
            let r = save_report(&xs, &shot.shot_id, shot.striker_location, shot.under_pressure, chosen)
                .map_err(|e| StageError::with_records("report", e, vec![shot_id.clone()]))?;
            match fmt {
                Some(Format::Json) => println!(
                    "{}",
                    serde_json::to_string_pretty(&r).expect("report serialises")
                ),
                _ => print!("{}", r.to_text()),
            }
        }
        Command::Run {
            config,
            out,
            seed,
            all_data,
            no_scale,
        } => {
            let mut cfg = PipelineConfig::load(&config)?;
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            if let Some(s) = seed {
                cfg.seeds = Seeds {
                    split: s,
                    kmeans: s,
                    tsne: s,
                };
            }
            cfg.all_data |= all_data;
            cfg.scale &= !no_scale;
            let run = run_pipeline(&cfg)?;
            eprintln!(
                "wrote {} files to {} (xS test accuracy {:.3})",
                run.manifest.files.len() + 1,
                run.output_dir.display(),
                run.xs.test_accuracy
            );
        }
        Command::Synth {
            seed,
            out,
            one_v_ones,
            penalties,
        } => {
            let opts = SynthOptions {
                one_v_ones,
                penalties,
                ..SynthOptions::default()
            };
            let data = generate(seed, &opts);
            std::fs::create_dir_all(&out)
                .map_err(|e| StageError::new("write", format!("{}: {e}", out.display())))?;
            write_poses(&out.join("poses.csv"), &data.poses).map_err(write)?;
            write_events(&out.join("events.csv"), &data.events).map_err(write)?;
            let cfg = PipelineConfig::new(
                "poses.csv".into(),
                "events.csv".into(),
                "run".into(),
                Seeds {
                    split: seed,
                    kmeans: seed,
                    tsne: seed,
                },
            );
            write_text(&out.join("config.toml"), &cfg.to_toml())?;
            eprintln!(
                "{} events, {} pose records in {}",
                data.events.len(),
                data.poses.len(),
                out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("keeper-lab: {e}");
            ExitCode::FAILURE
        }
    }
}
