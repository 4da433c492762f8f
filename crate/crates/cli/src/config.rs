//! Flat TOML pipeline configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vidssm_core::media_io::Region;
use vidssm_core::tracker::SearchConfig;
use vidssm_core::Exec;

use crate::error::CliError;
use crate::pipeline::{FitSettings, FixedPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecMode {
    Parallel,
    Sequential,
}

/// Every key is optional; relative paths are resolved against the directory
/// of the configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    // tracking
    pub video: Option<PathBuf>,
    pub fps: Option<f64>,
    /// `[x0, y0, w, h]` of the template in the first frame.
    pub template: Option<[usize; 4]>,
    pub search_scale: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub theta_interval: f64,
    pub score_thresh: f64,
    pub iou_thresh: f64,
    pub n_match: usize,
    pub background_removal: bool,
    pub d_thresh: f64,

    // embedding
    pub train: Vec<PathBuf>,
    pub test: Option<PathBuf>,
    pub channels: Vec<String>,
    pub p: usize,
    pub lag_steps: usize,
    pub fixed_point: FixedPoint,
    pub tail_window: usize,

    // geometry and dynamics
    pub d: usize,
    pub m: usize,
    pub r: usize,
    pub n_nf: usize,
    pub resonance_tol: f64,

    // prediction and backbone
    pub t_span: Option<f64>,
    pub rho_max: Option<f64>,
    pub samples: usize,
    /// Index into the embedded observable vector used for amplitudes.
    pub observable: usize,

    pub exec: ExecMode,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let s = SearchConfig::default();
        let f = FitSettings::default();
        PipelineConfig {
            video: None,
            fps: None,
            template: None,
            search_scale: s.search_scale,
            theta_min: s.theta_min,
            theta_max: s.theta_max,
            theta_interval: s.theta_interval,
            score_thresh: s.score_thresh,
            iou_thresh: s.iou_thresh,
            n_match: s.n_match,
            background_removal: s.background_removal,
            d_thresh: s.d_thresh,
            train: Vec::new(),
            test: None,
            channels: vec!["x".into(), "y".into()],
            p: f.p,
            lag_steps: f.lag_steps,
            fixed_point: f.fixed_point,
            tail_window: f.tail_window,
            d: f.d,
            m: f.m,
            r: f.r,
            n_nf: f.n_nf,
            resonance_tol: f.resonance_tol,
            t_span: None,
            rho_max: None,
            samples: 101,
            observable: 0,
            exec: ExecMode::Parallel,
        }
    }
}

/// A parsed configuration plus the directory its relative paths refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: PipelineConfig,
    pub base: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config = PipelineConfig::parse(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(LoadedConfig { config, base })
    }

    /// Defaults, resolved against the working directory.
    pub fn defaults() -> Self {
        LoadedConfig { config: PipelineConfig::default(), base: PathBuf::new() }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    /// Resolves `p` and checks that it exists.
    pub fn existing(&self, p: &Path) -> Result<PathBuf, CliError> {
        let full = self.resolve(p);
        if full.exists() {
            Ok(full)
        } else {
            Err(CliError::Config(format!("input path {} does not exist", full.display())))
        }
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.d == 0 {
            return bad("d must be at least 1".into());
        }
        if self.m == 0 || self.r == 0 || self.n_nf == 0 {
            return bad(format!("m, r and n_nf must be at least 1 (got {}, {}, {})", self.m, self.r, self.n_nf));
        }
        if self.p == 0 || self.lag_steps == 0 {
            return bad("p and lag_steps must be at least 1".into());
        }
        if self.channels.is_empty() {
            return bad("at least one observable channel is required".into());
        }
        if !(self.resonance_tol > 0.0) {
            return bad(format!("resonance_tol must be positive, got {}", self.resonance_tol));
        }
        if let Some(t) = self.t_span {
            if !(t > 0.0) {
                return bad(format!("t_span must be positive, got {t}"));
            }
        }
        self.search().validate().map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn search(&self) -> SearchConfig {
        SearchConfig {
            search_scale: self.search_scale,
            theta_min: self.theta_min,
            theta_max: self.theta_max,
            theta_interval: self.theta_interval,
            score_thresh: self.score_thresh,
            iou_thresh: self.iou_thresh,
            n_match: self.n_match,
            background_removal: self.background_removal,
            d_thresh: self.d_thresh,
        }
    }

    pub fn exec(&self) -> Exec {
        match self.exec {
            ExecMode::Parallel => Exec::Parallel,
            ExecMode::Sequential => Exec::Sequential,
        }
    }

    pub fn fit_settings(&self) -> FitSettings {
        FitSettings {
            p: self.p,
            lag_steps: self.lag_steps,
            d: self.d,
            m: self.m,
            r: self.r,
            n_nf: self.n_nf,
            resonance_tol: self.resonance_tol,
            fixed_point: self.fixed_point,
            tail_window: self.tail_window,
            exec: self.exec(),
        }
    }

    pub fn template_region(&self) -> Result<Region, CliError> {
        let [x0, y0, w, h] = self.template.ok_or_else(|| CliError::Config("template region is not set".into()))?;
        Ok(Region::new(x0, y0, w, h))
    }
}
