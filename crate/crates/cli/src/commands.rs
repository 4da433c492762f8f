//! One function per subcommand. Each returns a JSON-serializable summary
//! that `main` prints to stdout.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Serialize;
use vidssm_core::media_io::{load_frame_sequence, write_raw_container, Region};
use vidssm_core::reduced_dynamics::{amplitude_map, backbone_curves, NormalFormModel, Observable, PolarPair};
use vidssm_core::ssm_geometry::ManifoldModel;
use vidssm_core::synthetic_oracle::{
    default_marker, dp_tip_position, fixtures, integrate, poses_to_series, render_marker_video, Background,
    DoublePendulumParams, Pose,
};
use vidssm_core::tracker::{track, Template};

use crate::config::{LoadedConfig, PipelineConfig};
use crate::document::{sha256_file, InputDigest, ModelDocument};
use crate::error::{CliError, Stage};
use crate::io::{named_rows, read_trajectory, write_columns, write_with};
use crate::pipeline::{fit_models, predict_series};

pub const TRACK_FILE: &str = "track.csv";
pub const MODEL_FILE: &str = "model.json";
pub const PREDICTION_FILE: &str = "prediction.csv";
pub const BACKBONE_FILE: &str = "backbone.csv";
pub const VIDEO_FILE: &str = "video.raw";
pub const TRUTH_FILE: &str = "truth.csv";
pub const RENDER_CONFIG_FILE: &str = "render.toml";

/// Shared state of one invocation.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: LoadedConfig,
    pub out: PathBuf,
}

impl Context {
    pub fn new(config: LoadedConfig, out: PathBuf) -> Result<Self, CliError> {
        std::fs::create_dir_all(&out).map_err(|e| CliError::file(Stage::Output, &out, e))?;
        Ok(Context { config, out })
    }

    fn cfg(&self) -> &PipelineConfig {
        &self.config.config
    }

    fn out_file(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn stage(s: Stage) -> impl FnOnce(vidssm_core::Error) -> CliError {
    move |source| CliError::Stage { stage: s, source }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrackSummary {
    pub output: PathBuf,
    pub frames: usize,
    pub mean_score: f64,
}

pub fn cmd_track(ctx: &Context) -> Result<TrackSummary, CliError> {
    let cfg = ctx.cfg();
    let video = cfg.video.as_deref().ok_or_else(|| CliError::Config("video is not set".into()))?;
    let video = ctx.config.existing(video)?;
    let region = cfg.template_region()?;
    let search = cfg.search();

    let seq = load_frame_sequence(&video, cfg.fps).map_err(stage(Stage::Track))?;
    let first = seq.frames().first().ok_or_else(|| CliError::Config("video has no frames".into()))?;
    let template = Template::from_region(first, &region).map_err(stage(Stage::Track))?;
    log::info!("tracking {} frames at {} fps", seq.len(), seq.frame_rate());
    let series = track(&seq, &template, &region, &search, cfg.exec()).map_err(stage(Stage::Track))?;

    let output = ctx.out_file(TRACK_FILE);
    write_with(&output, |w| series.write_csv(w))?;
    let mean_score = series.scores.iter().sum::<f64>() / series.len().max(1) as f64;
    Ok(TrackSummary { output, frames: series.len(), mean_score })
}

#[derive(Debug, Clone, Serialize)]
pub struct FitSummary {
    pub output: PathBuf,
    pub reproducibility_hash: String,
    pub training_ermse: f64,
    pub training_cnmte: f64,
    pub omega0: Vec<f64>,
    pub gamma0: Vec<f64>,
}

/// Fits all models to `train` (or the configured training files).
pub fn cmd_fit(ctx: &Context, train: &[PathBuf]) -> Result<FitSummary, CliError> {
    let mut snapshot = ctx.cfg().clone();
    if !train.is_empty() {
        snapshot.train = train.to_vec();
    }
    if snapshot.train.is_empty() {
        return Err(CliError::Config("no training trajectories given".into()));
    }
    let mut inputs = Vec::new();
    let mut trajectories = Vec::new();
    for p in &snapshot.train {
        let path = if train.is_empty() { ctx.config.existing(p)? } else { existing(p)? };
        inputs.push(InputDigest { path: p.display().to_string(), sha256: sha256_file(&path)? });
        trajectories.push(read_trajectory(&path, &snapshot.channels, Stage::Embed)?.series);
    }
    let models = fit_models(&trajectories, &snapshot.channels, &snapshot.fit_settings())?;
    let doc = ModelDocument::new(models, snapshot, inputs)?;
    let output = ctx.out_file(MODEL_FILE);
    doc.save(&output)?;
    let m = &doc.models;
    Ok(FitSummary {
        output,
        reproducibility_hash: doc.provenance.reproducibility_hash.clone(),
        training_ermse: m.training.ermse,
        training_cnmte: m.training.cnmte,
        omega0: m.polar.pairs.iter().map(|p| p.omega_at(0.0)).collect(),
        gamma0: m.polar.pairs.iter().map(|p| p.gamma_at(0.0)).collect(),
    })
}

fn existing(p: &Path) -> Result<PathBuf, CliError> {
    if p.exists() {
        Ok(p.to_path_buf())
    } else {
        Err(CliError::Config(format!("input path {} does not exist", p.display())))
    }
}

fn load_document(ctx: &Context, model: Option<&Path>) -> Result<ModelDocument, CliError> {
    let path = match model {
        Some(p) => existing(p)?,
        None => existing(&ctx.out_file(MODEL_FILE))?,
    };
    ModelDocument::load(&path)
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictSummary {
    pub output: PathBuf,
    pub samples: usize,
    pub cnmte: f64,
    pub extrapolated: bool,
}

/// Predicts the test trajectory from its first embedded sample.
pub fn cmd_predict(ctx: &Context, model: Option<&Path>, test: Option<&Path>) -> Result<PredictSummary, CliError> {
    let doc = load_document(ctx, model)?;
    let test = match test {
        Some(p) => existing(p)?,
        None => {
            let p = ctx.cfg().test.as_deref().ok_or_else(|| CliError::Config("test trajectory is not set".into()))?;
            ctx.config.existing(p)?
        }
    };
    let info = &doc.models.embedding;
    let traj = read_trajectory(&test, &info.channels, Stage::Predict)?;
    let steps = ctx.cfg().t_span.map(|t| (t / traj.series.dt()).round() as usize);
    let pred = predict_series(&doc.models, &traj.series, steps)?;

    let n = pred.times.len();
    let times = &traj.times[..n];
    let mut columns = named_rows(&pred.predicted, info.channels.iter().cloned());
    columns.extend(named_rows(&pred.measured, info.channels.iter().map(|c| format!("{c}_measured"))));
    let output = ctx.out_file(PREDICTION_FILE);
    write_columns(&output, times, &columns)?;
    Ok(PredictSummary { output, samples: n, cnmte: pred.cnmte, extrapolated: pred.extrapolated })
}

/// Coefficient sets that can be tabulated without a fitted model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Fixture {
    DoublePendulum,
    Sloshing,
    Flutter,
    Shimmy,
}

impl Fixture {
    pub fn pair(self) -> PolarPair {
        match self {
            Fixture::DoublePendulum => fixtures::double_pendulum(),
            Fixture::Sloshing => fixtures::sloshing(),
            Fixture::Flutter => fixtures::flutter(),
            Fixture::Shimmy => fixtures::shimmy(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BackboneSummary {
    pub output: PathBuf,
    pub rows: usize,
    pub extrapolated: bool,
    pub trained_max: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct BackboneArgs {
    pub model: Option<PathBuf>,
    pub fixture: Option<Fixture>,
    pub rho_max: Option<f64>,
    pub samples: Option<usize>,
    pub observable: Option<usize>,
}

/// Manifold whose parameterization is the identity on `R^d`.
fn identity_manifold(d: usize) -> Result<ManifoldModel, CliError> {
    ManifoldModel::from_parts(DMatrix::identity(d, d), &DMatrix::zeros(d, 0), 1).map_err(stage(Stage::Backbone))
}

pub fn cmd_backbone(ctx: &Context, args: &BackboneArgs) -> Result<BackboneSummary, CliError> {
    let cfg = ctx.cfg();
    let (manifold, nf, pair, trained_max): (ManifoldModel, NormalFormModel, PolarPair, Option<f64>) = match args.fixture {
        Some(f) => {
            let pair = f.pair();
            let nf = NormalFormModel::from_polar(&pair).map_err(stage(Stage::Backbone))?;
            (identity_manifold(2)?, nf, pair, None)
        }
        None => {
            let doc = load_document(ctx, args.model.as_deref())?;
            let m = doc.models;
            let pair = m
                .polar
                .pairs
                .first()
                .cloned()
                .ok_or_else(|| CliError::Config("model has no oscillatory mode".into()))?;
            let max = m.normal_form.max_amplitude;
            (m.manifold, m.normal_form, pair, max)
        }
    };
    let rho_max = args
        .rho_max
        .or(cfg.rho_max)
        .or(trained_max)
        .ok_or_else(|| CliError::Config("rho_max is required for fixtures".into()))?;
    if !(rho_max >= 0.0) {
        return Err(CliError::Config(format!("rho_max must be non-negative, got {rho_max}")));
    }
    let samples = args.samples.unwrap_or(cfg.samples);
    let g = Observable::Coordinate(args.observable.unwrap_or(cfg.observable));
    let curve = backbone_curves(&pair, |rho| amplitude_map(&manifold, &nf, pair.index, &g, rho), rho_max, samples, trained_max)
        .map_err(stage(Stage::Backbone))?;
    if curve.extrapolated {
        log::warn!("backbone extends beyond the trained amplitude {:.4e}", trained_max.unwrap_or(0.0));
    }
    let output = ctx.out_file(BACKBONE_FILE);
    write_with(&output, |w| curve.write_csv(w))?;
    Ok(BackboneSummary { output, rows: curve.rho.len(), extrapolated: curve.extrapolated, trained_max })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Scenario {
    /// Marker at rest in the middle of the canvas.
    Static,
    /// Marker on a damped elliptical path with damped rotation.
    DampedCosine,
    /// Marker following the lower-rod tip of the double pendulum.
    DoublePendulum,
}

#[derive(Debug, Clone, Default)]
pub struct RenderArgs {
    pub frames: Option<usize>,
    pub fps: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RenderSummary {
    pub video: PathBuf,
    pub truth: PathBuf,
    pub config: PathBuf,
    pub frames: usize,
    pub fps: f64,
    pub template: [usize; 4],
}

const MARKER_SIZE: usize = 15;

fn scenario_poses(s: Scenario, frames: usize, fps: f64) -> Result<(Vec<Pose>, (usize, usize)), CliError> {
    Ok(match s {
        Scenario::Static => (vec![Pose { x: 32.0, y: 32.0, theta: 0.0 }; frames], (64, 64)),
        Scenario::DampedCosine => {
            let poses = (0..frames)
                .map(|k| {
                    let t = k as f64 / fps;
                    let decay = (-0.25 * t).exp();
                    let phase = 2.0 * std::f64::consts::PI * 0.5 * t;
                    Pose {
                        x: 80.0 + 36.0 * decay * phase.cos(),
                        y: 48.0 + 12.0 * decay * phase.sin(),
                        theta: 20.0 * decay * phase.sin(),
                    }
                })
                .collect();
            (poses, (160, 96))
        }
        Scenario::DoublePendulum => {
            let p = DoublePendulumParams::default();
            let substeps = 4;
            let dt = 1.0 / (fps * substeps as f64);
            let states = integrate(|s| dp_derivatives_vec(s, &p), &[0.4, 0.6, 0.0, 0.0], dt, (frames - 1) * substeps)
                .map_err(stage(Stage::Render))?;
            // 250 px per meter, pivot near the top edge.
            let scale = 250.0;
            let reach = (p.l1 + p.l2) * scale;
            let (cw, ch) = ((2.0 * reach) as usize + 2 * MARKER_SIZE, reach as usize + 2 * MARKER_SIZE);
            let (px, py) = (cw as f64 / 2.0, MARKER_SIZE as f64);
            let poses = (0..frames)
                .map(|k| {
                    let s = states.column(k * substeps);
                    let (x, y) = dp_tip_position(s.as_slice(), &p);
                    Pose { x: px + scale * x, y: py - scale * y, theta: -s[1].to_degrees() }
                })
                .collect();
            (poses, (cw, ch))
        }
    })
}

fn dp_derivatives_vec(s: &[f64], p: &DoublePendulumParams) -> Vec<f64> {
    vidssm_core::synthetic_oracle::dp_derivatives(s, p).to_vec()
}

/// Renders a synthetic marker video, its ground-truth track (angles relative
/// to frame 0) and a config fragment (`video`, `fps`, `template`) that
/// `track` can consume directly.
pub fn cmd_render_synthetic(ctx: &Context, scenario: Scenario, args: &RenderArgs) -> Result<RenderSummary, CliError> {
    let (default_frames, default_fps) = match scenario {
        Scenario::Static => (20, 30.0),
        Scenario::DampedCosine => (200, 30.0),
        Scenario::DoublePendulum => (480, 240.0),
    };
    let frames = args.frames.unwrap_or(default_frames);
    let fps = args.fps.unwrap_or(default_fps);
    if frames == 0 || !(fps > 0.0) {
        return Err(CliError::Config(format!("frames must be positive and fps > 0 (got {frames}, {fps})")));
    }
    let (poses, canvas) = scenario_poses(scenario, frames, fps)?;
    let marker = default_marker(MARKER_SIZE, 1).map_err(stage(Stage::Render))?;
    let (seq, truth) = render_marker_video(&poses, &marker, canvas, &Background::Constant(0.05), fps, ctx.cfg().exec())
        .map_err(stage(Stage::Render))?;

    let video = ctx.out_file(VIDEO_FILE);
    write_raw_container(&seq, &video).map_err(stage(Stage::Output))?;
    // The template is cut from frame 0, so tracked angles are relative to it.
    let theta0 = truth[0].theta;
    let relative: Vec<Pose> = truth.iter().map(|p| Pose { theta: p.theta - theta0, ..*p }).collect();
    let truth_path = ctx.out_file(TRUTH_FILE);
    write_with(&truth_path, |w| poses_to_series(&relative, fps).write_csv(w))?;

    let half = MARKER_SIZE / 2;
    let region = Region::new(truth[0].x as usize - half, truth[0].y as usize - half, MARKER_SIZE, MARKER_SIZE);
    let template = [region.x0, region.y0, region.w, region.h];
    let fragment = RenderFragment { video: VIDEO_FILE.into(), fps, template };
    let text = toml::to_string(&fragment).map_err(|e| CliError::file(Stage::Output, RENDER_CONFIG_FILE, e))?;
    let config = ctx.out_file(RENDER_CONFIG_FILE);
    std::fs::write(&config, text).map_err(|e| CliError::file(Stage::Output, &config, e))?;
    Ok(RenderSummary { video, truth: truth_path, config, frames, fps, template })
}

#[derive(Serialize)]
struct RenderFragment {
    video: String,
    fps: f64,
    template: [usize; 4],
}
