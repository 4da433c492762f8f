use super::{
    difference_mask, frame_average, match_sweep, nms, Detection, SearchConfig, Template, TrackSeries,
};
use crate::error::{Error, Result};
use crate::media_io::{Frame, FrameSequence, Region};
use crate::par::Exec;

/// Search window of `scale` times the template size centered on `prev`,
/// shifted (not shrunk) to stay inside the frame.
fn search_window(prev: &Region, scale: f64, fw: usize, fh: usize) -> Region {
    let span = |t: usize, limit: usize| ((scale * t as f64).round() as usize).min(limit);
    let (w, h) = (span(prev.w, fw), span(prev.h, fh));
    let place = |start: usize, t: usize, win: usize, limit: usize| {
        let center = start as f64 + (t as f64 - 1.0) / 2.0;
        let origin = (center - (win as f64 - 1.0) / 2.0).round().max(0.0) as usize;
        origin.min(limit - win)
    };
    Region::new(place(prev.x0, prev.w, w, fw), place(prev.y0, prev.h, h, fh), w, h)
}

/// Runs the tracker over every frame of `seq`, starting from `init_region` in
/// frame 0 at zero rotation. Each frame's window and angle sweep are centered
/// on the previous frame's best match.
pub fn track(
    seq: &FrameSequence,
    template: &Template,
    init_region: &Region,
    cfg: &SearchConfig,
    exec: Exec,
) -> Result<TrackSeries> {
    cfg.validate()?;
    let first = seq.frames().first().ok_or_else(|| Error::Input("empty frame sequence".into()))?;
    let (fw, fh) = (first.width(), first.height());
    if !init_region.fits_in(fw, fh) {
        return Err(Error::Bounds(format!("initial region {init_region:?} outside {fw}x{fh} frame")));
    }
    if (init_region.w, init_region.h) != (template.width(), template.height()) {
        return Err(Error::Shape(format!(
            "initial region {}x{} does not match template {}x{}",
            init_region.w,
            init_region.h,
            template.width(),
            template.height()
        )));
    }
    let probe = search_window(init_region, cfg.search_scale, fw, fh);
    if template.width() >= probe.w || template.height() >= probe.h {
        return Err(Error::Input(format!(
            "template {}x{} is not smaller than the {}x{} search window",
            template.width(),
            template.height(),
            probe.w,
            probe.h
        )));
    }

    let mean = if cfg.background_removal { Some(frame_average(seq)?) } else { None };
    let prepare = |f: &Frame| -> Result<Frame> {
        match &mean {
            Some(m) => difference_mask(f, m, cfg.d_thresh),
            None => Ok(f.clone()),
        }
    };
    let template = match &mean {
        Some(_) => template.with_pixels(prepare(first)?.crop(init_region)?)?,
        None => template.clone(),
    };

    let mut series = TrackSeries::default();
    let (mut prev, mut theta) = (*init_region, 0.0);
    for (k, frame) in seq.frames().iter().enumerate() {
        let frame = prepare(frame)?;
        let window = search_window(&prev, cfg.search_scale, fw, fh);
        let lost = Error::TrackingLost { frame: k, score_thresh: cfg.score_thresh };
        let cands = match match_sweep(&template, &frame.crop(&window)?, cfg, theta, exec) {
            Ok(c) => c,
            Err(Error::Match(msg)) => {
                log::warn!("frame {k}: {msg}");
                return Err(lost);
            }
            Err(e) => return Err(e),
        };
        let Some(&Detection { region, theta: angle, score }) =
            nms(&cands, cfg.iou_thresh, cfg.n_match, theta).first()
        else {
            return Err(lost);
        };
        let region = window.compose(&region);
        let (ax, ay) = super::rotate_template(&template, angle)?.anchor();
        series.push(
            k as f64 / seq.frame_rate(),
            region.x0 as f64 + ax,
            region.y0 as f64 + ay,
            angle,
            score,
        );
        prev = region;
        theta = angle;
    }
    Ok(series)
}
