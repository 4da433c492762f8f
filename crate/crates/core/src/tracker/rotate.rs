use super::Template;
use crate::error::{Error, Result};
use crate::media_io::Frame;

const SNAP: f64 = 1e-9;

fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < SNAP {
        r
    } else {
        v
    }
}

/// Rotates `(dx, dy)` by `theta_deg` in pixel coordinates (x right, y down).
pub(crate) fn rotate_offset(dx: f64, dy: f64, theta_deg: f64) -> (f64, f64) {
    let (s, c) = theta_deg.to_radians().sin_cos();
    (c * dx - s * dy, s * dx + c * dy)
}

/// Rotates a template about its center by `theta_deg` degrees.
///
/// Output pixels are bilinear samples of the inverse-rotated source. A pixel
/// stays valid only when its source point lies inside the source grid and
/// every neighbor contributing to the sample is itself valid. The anchor is
/// carried along with the rotation. Positive angles turn +x toward +y.
pub fn rotate_template(t: &Template, theta_deg: f64) -> Result<Template> {
    if !(theta_deg.abs() <= 180.0) {
        return Err(Error::Input(format!("rotation {theta_deg} outside [-180, 180]")));
    }
    if theta_deg == 0.0 {
        return Ok(t.clone());
    }
    let src = t.pixels();
    let (w, h, ch) = (src.width(), src.height(), src.channels());
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let (xmax, ymax) = ((w - 1) as f64, (h - 1) as f64);

    let mut data = vec![0.0; w * h * ch];
    let mut mask = vec![false; w * h];
    let mut sample = vec![0.0; ch];
    for y in 0..h {
        for x in 0..w {
            let (rx, ry) = rotate_offset(x as f64 - cx, y as f64 - cy, -theta_deg);
            let (sx, sy) = (snap(cx + rx), snap(cy + ry));
            if !(0.0..=xmax).contains(&sx) || !(0.0..=ymax).contains(&sy) {
                continue;
            }
            if bilinear(src, sx, sy, &mut sample) {
                let o = (y * w + x) * ch;
                data[o..o + ch].copy_from_slice(&sample);
                mask[y * w + x] = true;
            }
        }
    }
    let (ax, ay) = t.anchor();
    let (rax, ray) = rotate_offset(ax - cx, ay - cy, theta_deg);
    let frame = Frame::new(w, h, ch, data)?.with_mask(mask)?;
    Ok(Template::new(frame)?.with_anchor(cx + rax, cy + ray))
}

/// Bilinear sample at `(sx, sy)` (inside the grid). Returns false when a
/// neighbor with nonzero weight is masked out.
pub(crate) fn bilinear(src: &Frame, sx: f64, sy: f64, out: &mut [f64]) -> bool {
    let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
    let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
    let x1 = (x0 + 1).min(src.width() - 1);
    let y1 = (y0 + 1).min(src.height() - 1);
    let taps = [
        (x0, y0, (1.0 - fx) * (1.0 - fy)),
        (x1, y0, fx * (1.0 - fy)),
        (x0, y1, (1.0 - fx) * fy),
        (x1, y1, fx * fy),
    ];
    out.iter_mut().for_each(|v| *v = 0.0);
    for &(px, py, wgt) in &taps {
        if wgt == 0.0 {
            continue;
        }
        if !src.is_valid(px, py) {
            return false;
        }
        for (c, o) in out.iter_mut().enumerate() {
            *o += wgt * src.get(px, py, c);
        }
    }
    for o in out.iter_mut() {
        *o = o.clamp(0.0, 1.0);
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corners() -> Template {
        // 4x4, distinct values in each 2x2 quadrant
        let f = Frame::from_fn(4, 4, 1, |x, y, _| match (x < 2, y < 2) {
            (true, true) => 0.1,
            (false, true) => 0.4,
            (false, false) => 0.7,
            (true, false) => 1.0,
        })
        .unwrap();
        Template::new(f).unwrap()
    }

    #[test]
    fn zero_rotation_is_identity() {
        let t = corners();
        assert_eq!(rotate_template(&t, 0.0).unwrap(), t);
    }

    #[test]
    fn quarter_turn_permutes_quadrants_exactly() {
        let t = corners();
        let r = rotate_template(&t, 90.0).unwrap();
        assert_eq!(r.valid_count(), 16);
        // +x turns toward +y: the top-left quadrant moves to the top-right
        let src = t.pixels();
        let dst = r.pixels();
        for y in 0..4 {
            for x in 0..4 {
                // out(x, y) = src(y, 3 - x)
                assert_eq!(dst.get(x, y, 0), src.get(y, 3 - x, 0), "at ({x},{y})");
            }
        }
        assert_eq!(dst.get(3, 0, 0), 0.1);
        assert_eq!(dst.get(3, 3, 0), 0.4);
        assert_eq!(dst.get(0, 3, 0), 0.7);
        assert_eq!(dst.get(0, 0, 0), 1.0);
    }

    #[test]
    fn forty_five_degrees_invalidates_corners() {
        let f = Frame::filled(9, 9, 1, 0.5).unwrap();
        let r = rotate_template(&Template::new(f).unwrap(), 45.0).unwrap();
        let m = r.pixels().mask().unwrap();
        for (x, y) in [(0, 0), (8, 0), (0, 8), (8, 8)] {
            assert!(!m[y * 9 + x]);
        }
        assert!(m[4 * 9 + 4]);
        assert!(r.valid_count() < 81);
    }

    #[test]
    fn masked_source_pixels_stay_invalid() {
        let mut mask = vec![true; 25];
        mask[0] = false;
        let f = Frame::filled(5, 5, 1, 0.3).unwrap().with_mask(mask).unwrap();
        let r = rotate_template(&Template::new(f).unwrap(), 90.0).unwrap();
        // source (0,0) lands at (4,0)
        assert!(!r.pixels().is_valid(4, 0));
        assert_eq!(r.valid_count(), 24);
    }

    #[test]
    fn anchor_rotates_with_template() {
        let t = Template::new(Frame::filled(5, 5, 1, 0.3).unwrap()).unwrap().with_anchor(4.0, 2.0);
        let r = rotate_template(&t, 90.0).unwrap();
        let (ax, ay) = r.anchor();
        assert!((ax - 2.0).abs() < 1e-12 && (ay - 4.0).abs() < 1e-12);
    }
}
