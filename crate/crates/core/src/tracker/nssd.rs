use super::{normalize_angle, rotate_template, SearchConfig, Template};
use crate::error::{Error, Result};
use crate::media_io::{Frame, Region};
use crate::par::Exec;

/// NSSD score for every placement of a template inside a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMap {
    pub width: usize,
    pub height: usize,
    /// Row-major scores; degenerate placements hold `f64::INFINITY`.
    pub scores: Vec<f64>,
    pub degenerate: Vec<bool>,
}

impl SimilarityMap {
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.scores[y * self.width + x]
    }

    /// Lowest finite score and its placement, ties going to the first in row-major order.
    pub fn argmin(&self) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &s) in self.scores.iter().enumerate() {
            if s.is_finite() && best.is_none_or(|(_, b)| s < b) {
                best = Some((i, s));
            }
        }
        best.map(|(i, s)| (i % self.width, i / self.width, s))
    }
}

/// Masked normalized sum of squared differences of `t` against every
/// placement inside `s`. Sums run over valid template pixels and all channels.
pub fn nssd_map(t: &Template, s: &Frame, exec: Exec) -> Result<SimilarityMap> {
    let tp = t.pixels();
    if tp.width() >= s.width() || tp.height() >= s.height() {
        return Err(Error::Input(format!(
            "template {}x{} must be strictly smaller than the search image {}x{}",
            tp.width(),
            tp.height(),
            s.width(),
            s.height()
        )));
    }
    if tp.channels() != s.channels() {
        return Err(Error::Shape(format!(
            "template has {} channels, image has {}",
            tp.channels(),
            s.channels()
        )));
    }
    let ch = tp.channels();
    let mut taps = Vec::new();
    let mut values = Vec::new();
    for y in 0..tp.height() {
        for x in 0..tp.width() {
            if tp.is_valid(x, y) {
                taps.push((x, y));
                values.extend_from_slice(tp.pixel(x, y));
            }
        }
    }
    let tt: f64 = values.iter().map(|v| v * v).sum();
    let (gw, gh) = (s.width() - tp.width() + 1, s.height() - tp.height() + 1);

    let rows = exec.map(gh, |py| {
        let mut row = Vec::with_capacity(gw);
        for px in 0..gw {
            let (mut num, mut ii) = (0.0, 0.0);
            for (k, &(x, y)) in taps.iter().enumerate() {
                let patch = s.pixel(px + x, py + y);
                for c in 0..ch {
                    let (a, b) = (values[k * ch + c], patch[c]);
                    num += (a - b) * (a - b);
                    ii += b * b;
                }
            }
            let den = (tt * ii).sqrt();
            row.push(if den > 0.0 { num / den } else { f64::INFINITY });
        }
        row
    });
    let scores: Vec<f64> = rows.into_iter().flatten().collect();
    let degenerate: Vec<bool> = scores.iter().map(|v| v.is_infinite()).collect();
    if degenerate.iter().all(|&d| d) {
        return Err(Error::Match(format!(
            "all {} placements have a zero normalizer",
            scores.len()
        )));
    }
    Ok(SimilarityMap { width: gw, height: gh, scores, degenerate })
}

/// Aligned candidate lists: template-sized boxes, NSSD scores and absolute angles.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Candidates {
    pub boxes: Vec<Region>,
    pub scores: Vec<f64>,
    pub angles: Vec<f64>,
}

impl Candidates {
    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn push(&mut self, b: Region, score: f64, angle: f64) {
        self.boxes.push(b);
        self.scores.push(score);
        self.angles.push(angle);
    }
}

/// Scores the template at each sweep angle around `theta_ref` and keeps every
/// placement strictly below `cfg.score_thresh`. Boxes are in `s` coordinates.
pub fn match_sweep(
    t: &Template,
    s: &Frame,
    cfg: &SearchConfig,
    theta_ref: f64,
    exec: Exec,
) -> Result<Candidates> {
    let angles: Vec<f64> =
        cfg.sweep_offsets().into_iter().map(|d| normalize_angle(theta_ref + d)).collect();
    // Angles in parallel, placements sequential inside each map.
    let maps = exec.map(angles.len(), |k| {
        rotate_template(t, angles[k]).and_then(|r| nssd_map(&r, s, Exec::Sequential))
    });
    let mut out = Candidates::default();
    for (map, &angle) in maps.into_iter().zip(&angles) {
        let map = map?;
        for y in 0..map.height {
            for x in 0..map.width {
                let score = map.at(x, y);
                if score < cfg.score_thresh {
                    out.push(Region::new(x, y, t.width(), t.height()), score, angle);
                }
            }
        }
    }
    Ok(out)
}
