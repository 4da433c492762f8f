use std::cmp::Ordering;

use super::{normalize_angle, Candidates, Detection};
use crate::media_io::Region;

/// Intersection over union of two pixel boxes.
pub fn jaccard(a: &Region, b: &Region) -> f64 {
    let iw = a.right().min(b.right()).saturating_sub(a.x0.max(b.x0));
    let ih = a.bottom().min(b.bottom()).saturating_sub(a.y0.max(b.y0));
    let inter = (iw * ih) as f64;
    let union = (a.area() + b.area()) as f64 - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// Greedy non-maximum suppression on ascending score.
///
/// Ties on score go to the lower `y`, then lower `x`, then the angle closest to
/// `theta_ref`. A selected candidate removes every remaining one whose overlap
/// with it is at least `iou_thresh`.
pub fn nms(cands: &Candidates, iou_thresh: f64, n_match: usize, theta_ref: f64) -> Vec<Detection> {
    let dist = |a: f64| normalize_angle(a - theta_ref).abs();
    let mut order: Vec<usize> = (0..cands.len()).collect();
    order.sort_by(|&i, &j| {
        let (bi, bj) = (&cands.boxes[i], &cands.boxes[j]);
        cands.scores[i]
            .total_cmp(&cands.scores[j])
            .then(bi.y0.cmp(&bj.y0))
            .then(bi.x0.cmp(&bj.x0))
            .then(dist(cands.angles[i]).partial_cmp(&dist(cands.angles[j])).unwrap_or(Ordering::Equal))
    });
    let mut alive = vec![true; cands.len()];
    let mut kept = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        if kept.len() == n_match {
            break;
        }
        if !alive[pos] {
            continue;
        }
        kept.push(Detection { region: cands.boxes[i], theta: cands.angles[i], score: cands.scores[i] });
        for (later, &j) in order.iter().enumerate().skip(pos + 1) {
            if alive[later] && jaccard(&cands.boxes[i], &cands.boxes[j]) >= iou_thresh {
                alive[later] = false;
            }
        }
    }
    kept
}
