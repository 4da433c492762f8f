//! Rotation-aware template tracking.
//!
//! Each frame is (optionally) reduced to a foreground mask, a search window
//! around the previous match is cropped, the template is swept over a small
//! range of rotations and scored with masked NSSD, and overlapping candidates
//! are pruned with non-maximum suppression.

mod background;
mod nms;
mod nssd;
mod rotate;
mod track;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media_io::{Frame, Region};

pub use background::{difference_mask, frame_average};
pub use nms::{jaccard, nms};
pub use nssd::{match_sweep, nssd_map, Candidates, SimilarityMap};
pub use rotate::rotate_template;
pub use track::track;

/// Template image plus the tracked point and the pixels that take part in scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pixels: Frame,
    anchor: (f64, f64),
}

impl Template {
    /// Template with its anchor at the geometric center. A missing mask means all pixels are valid.
    pub fn new(pixels: Frame) -> Result<Self> {
        let pixels = match pixels.mask() {
            Some(_) => pixels,
            None => {
                let n = pixels.width() * pixels.height();
                pixels.with_mask(vec![true; n])?
            }
        };
        let t = Template {
            anchor: ((pixels.width() as f64 - 1.0) / 2.0, (pixels.height() as f64 - 1.0) / 2.0),
            pixels,
        };
        if t.valid_count() == 0 {
            return Err(Error::Input("template mask has no valid pixels".into()));
        }
        Ok(t)
    }

    /// Cuts a template out of `frame`.
    pub fn from_region(frame: &Frame, region: &Region) -> Result<Self> {
        Template::new(frame.crop(region)?)
    }

    /// Sets the offset from the template's top-left corner to the tracked point.
    pub fn with_anchor(mut self, dx: f64, dy: f64) -> Self {
        self.anchor = (dx, dy);
        self
    }

    pub fn pixels(&self) -> &Frame {
        &self.pixels
    }

    pub fn anchor(&self) -> (f64, f64) {
        self.anchor
    }

    pub fn width(&self) -> usize {
        self.pixels.width()
    }

    pub fn height(&self) -> usize {
        self.pixels.height()
    }

    pub fn valid_count(&self) -> usize {
        self.pixels.mask().map_or(0, |m| m.iter().filter(|&&v| v).count())
    }

    /// Same geometry and mask with replaced intensities.
    pub(crate) fn with_pixels(&self, data: Frame) -> Result<Self> {
        let mask = self.pixels.mask().map(<[bool]>::to_vec).unwrap_or_default();
        Ok(Template { pixels: data.without_mask().with_mask(mask)?, anchor: self.anchor })
    }
}

/// Parameters of the per-frame search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Search window size as a multiple of the template size.
    pub search_scale: f64,
    /// Sweep bounds in degrees, relative to the previous match.
    pub theta_min: f64,
    pub theta_max: f64,
    pub theta_interval: f64,
    /// Placements scoring strictly below this become candidates.
    pub score_thresh: f64,
    pub iou_thresh: f64,
    pub n_match: usize,
    pub background_removal: bool,
    pub d_thresh: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            search_scale: 2.0,
            theta_min: -15.0,
            theta_max: 15.0,
            theta_interval: 5.0,
            score_thresh: 0.5,
            iou_thresh: 0.3,
            n_match: 1,
            background_removal: false,
            d_thresh: 0.1,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Input(m));
        if !(self.search_scale > 0.0) {
            return bad(format!("search_scale must be positive, got {}", self.search_scale));
        }
        if !(self.theta_min <= self.theta_max) {
            return bad(format!("theta_min {} exceeds theta_max {}", self.theta_min, self.theta_max));
        }
        if !(self.theta_interval > 0.0) {
            return bad(format!("theta_interval must be positive, got {}", self.theta_interval));
        }
        if !(self.score_thresh > 0.0 && self.score_thresh <= 2.0) {
            return bad(format!("score_thresh must lie in (0, 2], got {}", self.score_thresh));
        }
        if !(0.0..=1.0).contains(&self.iou_thresh) {
            return bad(format!("iou_thresh must lie in [0, 1], got {}", self.iou_thresh));
        }
        if self.n_match == 0 {
            return bad("n_match must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.d_thresh) {
            return bad(format!("d_thresh must lie in [0, 1], got {}", self.d_thresh));
        }
        Ok(())
    }

    /// Relative sweep angles `theta_min, theta_min + interval, ...` up to `theta_max`.
    pub fn sweep_offsets(&self) -> Vec<f64> {
        let steps = ((self.theta_max - self.theta_min) / self.theta_interval + 1e-9).floor() as usize;
        (0..=steps).map(|k| self.theta_min + k as f64 * self.theta_interval).collect()
    }
}

/// One surviving match.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub region: Region,
    /// Absolute template rotation in degrees, in `(-180, 180]`.
    pub theta: f64,
    pub score: f64,
}

/// Wraps an angle in degrees into `(-180, 180]`.
pub fn normalize_angle(deg: f64) -> f64 {
    let r = deg.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

/// Per-frame tracker output.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrackSeries {
    pub times: Vec<f64>,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub thetas: Vec<f64>,
    pub scores: Vec<f64>,
}

impl TrackSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, t: f64, x: f64, y: f64, theta: f64, score: f64) {
        self.times.push(t);
        self.xs.push(x);
        self.ys.push(y);
        self.thetas.push(theta);
        self.scores.push(score);
    }

    /// Writes the `t,x,y,theta,score` CSV (times with 6 decimals, LF endings).
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,x,y,theta,score")?;
        for i in 0..self.len() {
            writeln!(
                out,
                "{:.6},{},{},{},{}",
                self.times[i], self.xs[i], self.ys[i], self.thetas[i], self.scores[i]
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_sweep_is_seven_angles() {
        let cfg = SearchConfig::default();
        assert_eq!(cfg.sweep_offsets(), vec![-15.0, -10.0, -5.0, 0.0, 5.0, 10.0, 15.0]);
        cfg.validate().unwrap();
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = SearchConfig { theta_min: 10.0, theta_max: -10.0, ..Default::default() };
        assert!(cfg.validate().is_err());
        cfg = SearchConfig { theta_interval: 0.0, ..Default::default() };
        assert!(cfg.validate().is_err());
        cfg = SearchConfig { n_match: 0, ..Default::default() };
        assert!(cfg.validate().is_err());
        cfg = SearchConfig { iou_thresh: 1.5, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn angles_wrap_into_half_open_interval() {
        assert_eq!(normalize_angle(180.0), 180.0);
        assert_eq!(normalize_angle(-180.0), 180.0);
        assert_eq!(normalize_angle(190.0), -170.0);
        assert_eq!(normalize_angle(-15.0), -15.0);
    }

    #[test]
    fn csv_has_header_and_six_decimal_times() {
        let mut s = TrackSeries::default();
        s.push(1.0 / 240.0, 12.0, 7.5, -5.0, 0.0);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,x,y,theta,score\n0.004167,12,7.5,-5,0\n");
    }
}
