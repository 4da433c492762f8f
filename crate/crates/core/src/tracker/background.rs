use crate::error::{Error, Result};
use crate::media_io::{Frame, FrameSequence};

/// Per-pixel, per-channel mean over all frames of the sequence.
pub fn frame_average(seq: &FrameSequence) -> Result<Frame> {
    let first = seq
        .frames()
        .first()
        .ok_or_else(|| Error::Input("cannot average an empty sequence".into()))?;
    let mut sum = vec![0.0; first.data().len()];
    for f in seq.frames() {
        for (s, v) in sum.iter_mut().zip(f.data()) {
            *s += v;
        }
    }
    let n = seq.len() as f64;
    let mean = sum.into_iter().map(|s| (s / n).clamp(0.0, 1.0)).collect();
    Frame::new(first.width(), first.height(), first.channels(), mean)
}

/// Single-channel 0/1 foreground mask: 1 where the largest per-channel
/// absolute difference to `mean` is at least `d_thresh`.
pub fn difference_mask(frame: &Frame, mean: &Frame, d_thresh: f64) -> Result<Frame> {
    if !frame.same_shape(mean) {
        return Err(Error::Shape(format!(
            "frame {}x{}x{} vs mean {}x{}x{}",
            frame.width(),
            frame.height(),
            frame.channels(),
            mean.width(),
            mean.height(),
            mean.channels()
        )));
    }
    let c = frame.channels();
    let data = frame
        .data()
        .chunks_exact(c)
        .zip(mean.data().chunks_exact(c))
        .map(|(p, m)| {
            let d_max = p.iter().zip(m).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if d_thresh <= d_max {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    Frame::new(frame.width(), frame.height(), 1, data)
}
