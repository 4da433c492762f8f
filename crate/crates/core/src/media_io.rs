//! Frames, frame sequences and the on-disk formats they are read from.
//!
//! Two inputs are supported: a directory of numbered binary PGM/PPM files
//! (`frame_000000.pgm`, ...) and a raw-planar container file with a text
//! sidecar header at `<container>.hdr`.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Dense image with intensities in `[0, 1]`, row-major and channel-interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
    mask: Option<Vec<bool>>,
}

/// Axis-aligned pixel rectangle; `(x0, y0)` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Region {
    pub x0: usize,
    pub y0: usize,
    pub w: usize,
    pub h: usize,
}

impl Region {
    pub fn new(x0: usize, y0: usize, w: usize, h: usize) -> Self {
        Region { x0, y0, w, h }
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    /// One past the last column.
    pub fn right(&self) -> usize {
        self.x0 + self.w
    }

    /// One past the last row.
    pub fn bottom(&self) -> usize {
        self.y0 + self.h
    }

    pub fn fits_in(&self, width: usize, height: usize) -> bool {
        self.w > 0 && self.h > 0 && self.right() <= width && self.bottom() <= height
    }

    /// Region `inner`, given relative to `self`, in the coordinates of `self`'s host.
    pub fn compose(&self, inner: &Region) -> Region {
        Region::new(self.x0 + inner.x0, self.y0 + inner.y0, inner.w, inner.h)
    }
}

impl Frame {
    /// Builds a frame after checking the grid size and the `[0, 1]` range.
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Shape(format!("empty frame {width}x{height}")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::Shape(format!("unsupported channel count {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::Shape(format!(
                "expected {} samples for {width}x{height}x{channels}, got {}",
                width * height * channels,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Input(format!("intensity {v} outside [0, 1]")));
        }
        Ok(Frame { width, height, channels, data, mask: None })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Frame::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Frame whose sample at `(x, y, c)` is `f(x, y, c)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Frame::new(width, height, channels, data)
    }

    /// Attaches a validity mask (row-major, `width * height` entries).
    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.width * self.height {
            return Err(Error::Shape(format!(
                "mask has {} entries, frame has {} pixels",
                mask.len(),
                self.width * self.height
            )));
        }
        self.mask = Some(mask);
        Ok(self)
    }

    pub fn without_mask(mut self) -> Self {
        self.mask = None;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    /// Whether the pixel participates in comparisons (true when no mask is set).
    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[y * self.width + x])
    }

    pub fn same_shape(&self, other: &Frame) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn full_region(&self) -> Region {
        Region::new(0, 0, self.width, self.height)
    }

    /// Copies the pixels (and mask) inside `region`.
    pub fn crop(&self, region: &Region) -> Result<Frame> {
        if !region.fits_in(self.width, self.height) {
            return Err(Error::Bounds(format!(
                "region {region:?} outside {}x{} frame",
                self.width, self.height
            )));
        }
        let c = self.channels;
        let mut data = Vec::with_capacity(region.area() * c);
        for y in region.y0..region.bottom() {
            let start = (y * self.width + region.x0) * c;
            data.extend_from_slice(&self.data[start..start + region.w * c]);
        }
        let mask = self.mask.as_ref().map(|m| {
            (region.y0..region.bottom())
                .flat_map(|y| {
                    let start = y * self.width + region.x0;
                    m[start..start + region.w].iter().copied()
                })
                .collect()
        });
        Ok(Frame { width: region.w, height: region.h, channels: c, data, mask })
    }

    /// Single-channel luma `0.299 R + 0.587 G + 0.114 B`; single-channel frames pass through.
    pub fn to_grayscale(&self) -> Frame {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]).clamp(0.0, 1.0))
            .collect();
        Frame {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
            mask: self.mask.clone(),
        }
    }
}

/// Ordered frames sharing one size and channel count.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: Vec<Frame>,
    frame_rate: f64,
}

impl FrameSequence {
    pub fn new(frames: Vec<Frame>, frame_rate: f64) -> Result<Self> {
        if !(frame_rate > 0.0 && frame_rate.is_finite()) {
            return Err(Error::Input(format!("frame rate must be positive, got {frame_rate}")));
        }
        if let Some(first) = frames.first() {
            if let Some((i, f)) = frames.iter().enumerate().find(|(_, f)| !f.same_shape(first)) {
                return Err(Error::Shape(format!(
                    "frame {i} is {}x{}x{}, frame 0 is {}x{}x{}",
                    f.width, f.height, f.channels, first.width, first.height, first.channels
                )));
            }
        }
        Ok(FrameSequence { frames, frame_rate })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Decodes a binary PGM (P5) or PPM (P6) image with maxval 255.
pub fn decode_pnm(bytes: &[u8]) -> std::result::Result<Frame, String> {
    let mut pos = 0usize;
    let mut token = || -> std::result::Result<String, String> {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err("truncated header".into()),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| !b.is_ascii_whitespace()) {
            pos += 1;
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let channels = match token()?.as_str() {
        "P5" => 1,
        "P6" => 3,
        other => return Err(format!("unsupported magic {other:?} (expected P5 or P6)")),
    };
    let mut number = |what: &str| -> std::result::Result<usize, String> {
        token()?.parse::<usize>().map_err(|e| format!("bad {what}: {e}"))
    };
    let width = number("width")?;
    let height = number("height")?;
    let maxval = number("maxval")?;
    if maxval != 255 {
        return Err(format!("maxval must be 255, got {maxval}"));
    }
    // exactly one whitespace byte separates the header from the raster
    let start = pos + 1;
    let need = width * height * channels;
    let raster = bytes
        .get(start..start + need)
        .ok_or_else(|| format!("raster truncated: need {need} bytes"))?;
    let data = raster.iter().map(|&b| f64::from(b) / 255.0).collect();
    Frame::new(width, height, channels, data).map_err(|e| e.to_string())
}

fn quantize(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Encodes a frame as P5 (one channel) or P6 (three channels).
pub fn encode_pnm(frame: &Frame) -> Vec<u8> {
    let magic = if frame.channels == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", frame.width, frame.height).into_bytes();
    out.extend(frame.data.iter().map(|&v| quantize(v)));
    out
}

fn frame_index(path: &Path) -> Option<usize> {
    let name = path.file_name()?.to_str()?;
    let stem = name.strip_prefix("frame_")?;
    let (digits, ext) = stem.split_once('.')?;
    if !(ext == "pgm" || ext == "ppm") || digits.is_empty() {
        return None;
    }
    digits.parse().ok()
}

/// Sidecar header path for a raw container.
pub fn header_path(container: &Path) -> PathBuf {
    let mut s = container.as_os_str().to_owned();
    s.push(".hdr");
    PathBuf::from(s)
}

/// Loads a frame directory or a raw container.
///
/// For directories `fps` is required. For containers the header's `fps`
/// is used unless `fps` overrides it.
pub fn load_frame_sequence(path: &Path, fps: Option<f64>) -> Result<FrameSequence> {
    if path.is_dir() {
        let fps = fps.ok_or_else(|| Error::Input("frame directory needs a frame rate".into()))?;
        let mut entries: Vec<(usize, PathBuf)> = fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter_map(|p| frame_index(&p).map(|i| (i, p)))
            .collect();
        entries.sort_by_key(|(i, _)| *i);
        if entries.is_empty() {
            return Err(Error::Input(format!("no frame_*.pgm/ppm files in {}", path.display())));
        }
        let frames = entries
            .iter()
            .enumerate()
            .map(|(k, (_, p))| {
                let bytes = fs::read(p).map_err(|e| Error::Decode { frame: k, message: e.to_string() })?;
                decode_pnm(&bytes).map_err(|message| Error::Decode { frame: k, message })
            })
            .collect::<Result<Vec<_>>>()?;
        FrameSequence::new(frames, fps)
    } else {
        load_raw_container(path, fps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct RawHeader {
    width: usize,
    height: usize,
    channels: usize,
    fps: f64,
    count: usize,
}

fn parse_raw_header(text: &str) -> Result<RawHeader> {
    let get = |key: &str| -> Result<String> {
        text.lines()
            .filter_map(|l| l.split_once('='))
            .find(|(k, _)| k.trim() == key)
            .map(|(_, v)| v.trim().to_string())
            .ok_or_else(|| Error::Input(format!("raw header missing key {key}")))
    };
    let int = |v: String, key: &str| {
        v.parse::<usize>().map_err(|e| Error::Input(format!("raw header {key}: {e}")))
    };
    let width = int(get("width")?, "width")?;
    let height = int(get("height")?, "height")?;
    let channels = int(get("channels")?, "channels")?;
    let count = int(get("count")?, "count")?;
    let fps = get("fps")?
        .parse::<f64>()
        .map_err(|e| Error::Input(format!("raw header fps: {e}")))?;
    Ok(RawHeader { width, height, channels, fps, count })
}

fn load_raw_container(path: &Path, fps: Option<f64>) -> Result<FrameSequence> {
    let header = parse_raw_header(&fs::read_to_string(header_path(path))?)?;
    let payload = fs::read(path)?;
    let per_frame = header.width * header.height * header.channels;
    let frames = (0..header.count)
        .map(|k| {
            let bytes = payload.get(k * per_frame..(k + 1) * per_frame).ok_or_else(|| Error::Decode {
                frame: k,
                message: format!("container truncated ({} bytes)", payload.len()),
            })?;
            let data = bytes.iter().map(|&b| f64::from(b) / 255.0).collect();
            Frame::new(header.width, header.height, header.channels, data)
                .map_err(|e| Error::Decode { frame: k, message: e.to_string() })
        })
        .collect::<Result<Vec<_>>>()?;
    FrameSequence::new(frames, fps.unwrap_or(header.fps))
}

/// Writes `frame_%06d.pgm|ppm` files into `dir` (created if missing).
pub fn write_frame_directory(seq: &FrameSequence, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (k, f) in seq.frames.iter().enumerate() {
        let ext = if f.channels == 1 { "pgm" } else { "ppm" };
        fs::write(dir.join(format!("frame_{k:06}.{ext}")), encode_pnm(f))?;
    }
    Ok(())
}

/// Writes the raw container at `path` and its header at `<path>.hdr`.
pub fn write_raw_container(seq: &FrameSequence, path: &Path) -> Result<()> {
    let first = seq
        .frames
        .first()
        .ok_or_else(|| Error::Input("cannot write an empty sequence".into()))?;
    let header = format!(
        "width={}\nheight={}\nchannels={}\nfps={}\ncount={}\n",
        first.width,
        first.height,
        first.channels,
        seq.frame_rate,
        seq.frames.len()
    );
    let payload: Vec<u8> = seq.frames.iter().flat_map(|f| f.data.iter().map(|&v| quantize(v))).collect();
    fs::write(path, payload)?;
    fs::write(header_path(path), header)?;
    Ok(())
}
