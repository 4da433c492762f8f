//! Stage orchestration on in-memory data: embed, fit, normal form, predict.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use vidssm_core::embedding::{center, delay_embed, estimate_derivative, EmbeddedSeries, TimeSeries};
use vidssm_core::metrics;
use vidssm_core::reduced_dynamics::{
    fit_reduced_dynamics, normal_form, predict_observable, to_polar, NormalFormModel, NormalFormOptions, PolarModel,
    ReducedModel,
};
use vidssm_core::ssm_geometry::{fit_manifold, FitOptions, ManifoldModel};
use vidssm_core::Exec;

use crate::error::{CliError, Stage};

/// How the fixed point of the observed motion is located.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPoint {
    /// The data are already centered.
    None,
    /// Mean of the last `tail_window` samples, averaged over the training trajectories.
    TailMean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitSettings {
    pub p: usize,
    pub lag_steps: usize,
    pub d: usize,
    pub m: usize,
    pub r: usize,
    pub n_nf: usize,
    pub resonance_tol: f64,
    pub fixed_point: FixedPoint,
    pub tail_window: usize,
    pub exec: Exec,
}

impl Default for FitSettings {
    fn default() -> Self {
        FitSettings {
            p: 5,
            lag_steps: 1,
            d: 2,
            m: 3,
            r: 5,
            n_nf: 5,
            resonance_tol: 0.1,
            fixed_point: FixedPoint::None,
            tail_window: 100,
            exec: Exec::default(),
        }
    }
}

/// What is needed to turn a raw observable series into embedded vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingInfo {
    pub channels: Vec<String>,
    pub p: usize,
    pub lag_steps: usize,
    pub dt: f64,
    pub origin_offset: Vec<f64>,
}

impl EmbeddingInfo {
    pub fn embed(&self, series: &TimeSeries) -> vidssm_core::Result<EmbeddedSeries> {
        let centered = center(series, &DVector::from_column_slice(&self.origin_offset))?;
        delay_embed(&centered, self.p, self.lag_steps, None)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetrics {
    /// Manifold reconstruction error, averaged over trajectories.
    pub ermse: f64,
    /// Prediction error of the full model on the training trajectories.
    pub cnmte: f64,
    pub reduced_residual_rms: f64,
    pub normal_form_residual_rms: f64,
    /// Largest relative error of `t(t⁻¹(ξ))` over the training samples.
    pub round_trip_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModels {
    pub embedding: EmbeddingInfo,
    pub manifold: ManifoldModel,
    pub reduced: ReducedModel,
    pub normal_form: NormalFormModel,
    pub polar: PolarModel,
    pub training: TrainingMetrics,
}

/// Model prediction of one test trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionOutput {
    pub times: Vec<f64>,
    /// Predicted observables in the original (uncentered) units, `q × N`.
    pub predicted: DMatrix<f64>,
    /// Measured observables over the same samples.
    pub measured: DMatrix<f64>,
    pub cnmte: f64,
    pub extrapolated: bool,
}

fn stage(s: Stage) -> impl FnOnce(vidssm_core::Error) -> CliError {
    move |source| CliError::Stage { stage: s, source }
}

/// Fits every model of the pipeline to the training trajectories.
pub fn fit_models(trajectories: &[TimeSeries], channels: &[String], s: &FitSettings) -> Result<FittedModels, CliError> {
    let first = trajectories.first().ok_or_else(|| CliError::Config("no training trajectories".into()))?;
    let dt = first.dt();
    if trajectories.iter().any(|t| (t.dt() - dt).abs() > 1e-9 * dt) {
        return Err(CliError::Config("training trajectories use different sampling intervals".into()));
    }
    let q = first.channels();
    let offset = match s.fixed_point {
        FixedPoint::None => DVector::zeros(q),
        FixedPoint::TailMean => {
            let mut acc = DVector::zeros(q);
            for t in trajectories {
                acc += t.tail_mean(s.tail_window.min(t.len())).map_err(stage(Stage::Embed))?;
            }
            acc / trajectories.len() as f64
        }
    };
    let embedding = EmbeddingInfo {
        channels: channels.to_vec(),
        p: s.p,
        lag_steps: s.lag_steps,
        dt,
        origin_offset: offset.as_slice().to_vec(),
    };
    let embedded = trajectories
        .iter()
        .map(|t| embedding.embed(t))
        .collect::<vidssm_core::Result<Vec<_>>>()
        .map_err(stage(Stage::Embed))?;
    if s.p < 2 * s.d + 1 && s.p > 1 {
        log::warn!("delay embedding with p={} is below 2d+1={}", s.p, 2 * s.d + 1);
    }

    let opts = FitOptions { exec: s.exec, ..Default::default() };
    let (manifold, trace) = fit_manifold(&embedded, s.d, s.m, &opts).map_err(stage(Stage::Geometry))?;
    log::info!("manifold fit: {} iterations, training ERMSE {:.3e}", trace.iterations, manifold.training_ermse);

    let mut xi_all = Vec::new();
    let mut xi_dot_all = Vec::new();
    for e in &embedded {
        let xi = manifold.v.transpose() * &e.vectors;
        let xi_dot = estimate_derivative(&xi, dt).map_err(stage(Stage::Dynamics))?;
        xi_all.push(xi);
        xi_dot_all.push(xi_dot);
    }
    let xi = hstack(&xi_all);
    let xi_dot = hstack(&xi_dot_all);
    let reduced = fit_reduced_dynamics(&xi, &xi_dot, s.r).map_err(stage(Stage::Dynamics))?;
    log::info!("reduced dynamics: residual RMS {:.3e}", reduced.residual_rms);

    let nf_opts = NormalFormOptions { resonance_tol: s.resonance_tol, exec: s.exec, ..Default::default() };
    let nf = normal_form(&reduced, &xi, s.n_nf, &nf_opts).map_err(stage(Stage::NormalForm))?;
    let polar = to_polar(&nf).map_err(stage(Stage::NormalForm))?;
    let round_trip_error = nf.round_trip_error(&xi);
    log::info!("normal form: residual RMS {:.3e}, round trip {:.3e}", nf.residual_rms, round_trip_error);

    let mut models = FittedModels {
        embedding,
        manifold,
        reduced,
        normal_form: nf,
        polar,
        training: TrainingMetrics {
            ermse: 0.0,
            cnmte: 0.0,
            reduced_residual_rms: 0.0,
            normal_form_residual_rms: 0.0,
            round_trip_error,
        },
    };
    models.training.ermse = models.manifold.training_ermse;
    models.training.reduced_residual_rms = models.reduced.residual_rms;
    models.training.normal_form_residual_rms = models.normal_form.residual_rms;
    let mut total = 0.0;
    for t in trajectories {
        total += predict_series(&models, t, None)?.cnmte;
    }
    models.training.cnmte = total / trajectories.len() as f64;
    Ok(models)
}

fn hstack(parts: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows = parts.first().map_or(0, |m| m.nrows());
    let cols = parts.iter().map(|m| m.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for m in parts {
        out.columns_mut(at, m.ncols()).copy_from(m);
        at += m.ncols();
    }
    out
}

/// Predicts `series` from its first embedded vector over `steps` samples
/// (default: the whole series) and scores it with CNMTE.
pub fn predict_series(models: &FittedModels, series: &TimeSeries, steps: Option<usize>) -> Result<PredictionOutput, CliError> {
    let info = &models.embedding;
    if series.channels() != info.origin_offset.len() {
        return Err(CliError::Stage {
            stage: Stage::Predict,
            source: vidssm_core::Error::Shape(format!(
                "test series has {} channels, model expects {}",
                series.channels(),
                info.origin_offset.len()
            )),
        });
    }
    if (series.dt() - info.dt).abs() > 1e-6 * info.dt {
        log::warn!("test sampling interval {} differs from training {}", series.dt(), info.dt);
    }
    let embedded = info.embed(series).map_err(stage(Stage::Predict))?;
    let available = embedded.len();
    let count = steps.map_or(available, |s| (s + 1).min(available));
    let pred = predict_observable(&models.manifold, &models.normal_form, embedded.vectors.column(0).as_slice(), series.dt(), count - 1)
        .map_err(stage(Stage::Predict))?;
    let rows = embedded.undelayed_rows();
    let offset = DVector::from_column_slice(&info.origin_offset);
    let mut predicted = pred.y.select_rows(&rows);
    let mut measured = embedded.vectors.columns(0, count).select_rows(&rows);
    for (mut p, mut m) in predicted.column_iter_mut().zip(measured.column_iter_mut()) {
        p += &offset;
        m += &offset;
    }
    let cnmte = metrics::cnmte(&measured, &predicted).map_err(stage(Stage::Predict))?;
    let times = (0..count).map(|k| k as f64 * series.dt()).collect();
    Ok(PredictionOutput { times, predicted, measured, cnmte, extrapolated: pred.extrapolated })
}
