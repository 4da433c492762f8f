//! Centering, delay embedding and numerical differentiation of observables.
//!
//! Series are stored as snapshot matrices: one column per sample.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Uniformly sampled vector time series.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    dt: f64,
    values: DMatrix<f64>,
    origin_offset: DVector<f64>,
}

impl TimeSeries {
    /// `values` is `q × N`.
    pub fn new(dt: f64, values: DMatrix<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Input(format!("time step must be positive, got {dt}")));
        }
        if values.ncols() < 2 || values.nrows() == 0 {
            return Err(Error::Input(format!(
                "time series needs at least one channel and two samples, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!(
                "non-finite value at sample {}, channel {}",
                k / values.nrows(),
                k % values.nrows()
            )));
        }
        let q = values.nrows();
        Ok(TimeSeries { dt, values, origin_offset: DVector::zeros(q) })
    }

    /// Builds a series from per-channel sample vectors.
    pub fn from_channels(dt: f64, channels: &[Vec<f64>]) -> Result<Self> {
        let n = channels.first().map_or(0, Vec::len);
        if channels.iter().any(|c| c.len() != n) {
            return Err(Error::Shape("channels have different lengths".into()));
        }
        TimeSeries::new(dt, DMatrix::from_fn(channels.len(), n, |r, c| channels[r][c]))
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn channels(&self) -> usize {
        self.values.nrows()
    }

    pub fn len(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.values.ncols() == 0
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Total offset removed so far; adding it back restores raw values.
    pub fn origin_offset(&self) -> &DVector<f64> {
        &self.origin_offset
    }

    /// Mean of the last `window` samples, an estimate of the resting point for decaying data.
    pub fn tail_mean(&self, window: usize) -> Result<DVector<f64>> {
        if window == 0 || window > self.len() {
            return Err(Error::Input(format!("tail window {window} not in 1..={}", self.len())));
        }
        let tail = self.values.columns(self.len() - window, window);
        Ok(tail.column_sum() / window as f64)
    }
}

/// Shifts every sample by `-offset` and records the shift.
pub fn center(series: &TimeSeries, offset: &DVector<f64>) -> Result<TimeSeries> {
    if offset.len() != series.channels() {
        return Err(Error::Shape(format!(
            "offset has {} entries for {} channels",
            offset.len(),
            series.channels()
        )));
    }
    if offset.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("offset must be finite".into()));
    }
    let mut values = series.values.clone();
    for mut col in values.column_iter_mut() {
        col -= offset;
    }
    Ok(TimeSeries { dt: series.dt, values, origin_offset: &series.origin_offset + offset })
}

/// Delay-embedded vectors `y(t)`, `(q·p) × (N − (p−1)·lag)`.
///
/// Row `c·p + j` holds channel `c` delayed by `j·lag` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedSeries {
    pub dt: f64,
    pub q: usize,
    pub p: usize,
    pub lag_steps: usize,
    pub vectors: DMatrix<f64>,
}

impl EmbeddedSeries {
    /// Wraps already embedded (or raw) snapshot vectors as a `p = 1` series.
    pub fn from_snapshots(dt: f64, vectors: DMatrix<f64>) -> Self {
        EmbeddedSeries { dt, q: vectors.nrows(), p: 1, lag_steps: 1, vectors }
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn len(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.ncols() == 0
    }

    /// Row index of channel `c` at delay `j`.
    pub fn row(&self, c: usize, j: usize) -> usize {
        c * self.p + j
    }

    /// Rows holding the undelayed channels.
    pub fn undelayed_rows(&self) -> Vec<usize> {
        (0..self.q).map(|c| self.row(c, 0)).collect()
    }

    /// The undelayed channels, `q × len()`.
    pub fn undelayed(&self) -> DMatrix<f64> {
        self.vectors.select_rows(&self.undelayed_rows())
    }
}

/// Stacks `p` copies of each channel shifted by multiples of `lag_steps`.
///
/// `target_dim`, when given, is the dimension of the manifold to be fitted; a
/// warning is logged if `p < 2·target_dim + 1`.
pub fn delay_embed(
    series: &TimeSeries,
    p: usize,
    lag_steps: usize,
    target_dim: Option<usize>,
) -> Result<EmbeddedSeries> {
    if p == 0 || lag_steps == 0 {
        return Err(Error::Input(format!("need p >= 1 and lag >= 1, got p={p}, lag={lag_steps}")));
    }
    let span = (p - 1) * lag_steps;
    let n = series.len();
    if n <= span {
        return Err(Error::Input(format!(
            "series of {n} samples is too short for p={p}, lag={lag_steps}"
        )));
    }
    if let Some(d) = target_dim {
        if p < 2 * d + 1 {
            log::warn!("delay embedding with p={p} is below 2d+1={} for d={d}", 2 * d + 1);
        }
    }
    let q = series.channels();
    let v = series.values();
    let vectors = DMatrix::from_fn(q * p, n - span, |r, k| v[(r / p, k + (r % p) * lag_steps)]);
    Ok(EmbeddedSeries { dt: series.dt(), q, p, lag_steps, vectors })
}

/// Time derivative of every row of `x` (`dim × N`, uniform spacing `dt`).
///
/// Fourth-order central differences inside, second-order one-sided
/// differences at the first and last two samples. Needs `N ≥ 5`.
pub fn estimate_derivative(x: &DMatrix<f64>, dt: f64) -> Result<DMatrix<f64>> {
    let n = x.ncols();
    if n < 5 {
        return Err(Error::Input(format!("derivative needs at least 5 samples, got {n}")));
    }
    if !(dt > 0.0) {
        return Err(Error::Input(format!("time step must be positive, got {dt}")));
    }
    let mut out = DMatrix::zeros(x.nrows(), n);
    for r in 0..x.nrows() {
        let f = |i: usize| x[(r, i)];
        for i in 0..2 {
            out[(r, i)] = (-3.0 * f(i) + 4.0 * f(i + 1) - f(i + 2)) / (2.0 * dt);
            let j = n - 1 - i;
            out[(r, j)] = (3.0 * f(j) - 4.0 * f(j - 1) + f(j - 2)) / (2.0 * dt);
        }
        for i in 2..n - 2 {
            out[(r, i)] = (-f(i + 2) + 8.0 * f(i + 1) - 8.0 * f(i - 1) + f(i - 2)) / (12.0 * dt);
        }
    }
    Ok(out)
}
