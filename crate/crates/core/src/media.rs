//! Frame sampling, frame directories and grid-marker rendering.
//!
//! Video files are decoded by an external command (ffmpeg by default) that
//! dumps numbered PNGs into a scratch directory; everything downstream works
//! on [`FrameSequence`] values.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;

use image::{ImageFormat, RgbImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::frame::{DecoderCommand, DEFAULT_DECODER_TEMPLATE};
use crate::frame::{Fps, FrameStamp, SequenceMeta};
use crate::grid::GridSpec;

pub const SIDECAR_NAME: &str = "frames.json";

#[derive(Debug, Error)]
pub enum MediaError {
    #[error("frame decoder `{0}` not found")]
    DecoderNotFound(String),
    #[error("failed to decode {path}: {reason}")]
    DecodeFailure { path: PathBuf, reason: String },
    #[error("{0} produced no frames")]
    EmptyVideo(PathBuf),
    #[error("frame {expected} is missing from {dir} (next file has index {found})")]
    MissingIndex { dir: PathBuf, expected: u32, found: u32 },
    #[error("frame index {index} appears more than once in {dir}")]
    DuplicateIndex { dir: PathBuf, index: u32 },
    #[error("unreadable image {path}: {reason}")]
    UnreadableImage { path: PathBuf, reason: String },
    #[error("frame of {width}x{height} is too small for a {grid} grid")]
    FrameTooSmall { width: u32, height: u32, grid: GridSpec },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One decoded RGB frame. Pixels are shared, so clones are cheap.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub index: u32,
    pub timestamp_s: f64,
    pixels: Arc<RgbImage>,
}

impl FrameRecord {
    pub fn new(index: u32, timestamp_s: f64, pixels: RgbImage) -> Self {
        assert!(pixels.width() >= 1 && pixels.height() >= 1, "empty frame");
        Self {
            index,
            timestamp_s,
            pixels: Arc::new(pixels),
        }
    }

    pub fn width(&self) -> u32 {
        self.pixels.width()
    }

    pub fn height(&self) -> u32 {
        self.pixels.height()
    }

    pub fn image(&self) -> &RgbImage {
        &self.pixels
    }

    /// Raw interleaved RGB bytes, row-major.
    pub fn raw(&self) -> &[u8] {
        self.pixels.as_raw()
    }

    pub fn stamp(&self) -> FrameStamp {
        FrameStamp {
            index: self.index,
            timestamp_s: self.timestamp_s,
        }
    }

    pub fn encode_png(&self) -> Result<Vec<u8>, MediaError> {
        let mut out = io::Cursor::new(Vec::new());
        self.pixels
            .write_to(&mut out, ImageFormat::Png)
            .map_err(|e| MediaError::Io(io::Error::other(e)))?;
        Ok(out.into_inner())
    }
}

/// Frames sampled from one video at a fixed rate, indexed from 0 with no gaps.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    source_id: String,
    fps: Fps,
    frames: Vec<FrameRecord>,
}

impl FrameSequence {
    /// Builds a sequence from frame rasters in order; indices and timestamps are assigned here.
    pub fn from_images(
        source_id: impl Into<String>,
        fps: Fps,
        images: impl IntoIterator<Item = RgbImage>,
    ) -> Self {
        let frames = images
            .into_iter()
            .enumerate()
            .map(|(i, img)| FrameRecord::new(i as u32, fps.timestamp(i as u32), img))
            .collect();
        Self {
            source_id: source_id.into(),
            fps,
            frames,
        }
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn fps(&self) -> Fps {
        self.fps
    }

    pub fn frames(&self) -> &[FrameRecord] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn meta(&self) -> SequenceMeta {
        SequenceMeta {
            source_id: self.source_id.clone(),
            fps: self.fps,
            frames: self.frames.iter().map(FrameRecord::stamp).collect(),
        }
    }
}

/// Contents of the `frames.json` sidecar written next to dumped frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSidecar {
    pub source_id: String,
    pub fps: Fps,
    pub count: u32,
    pub width: u32,
    pub height: u32,
}

/// Samples `video_path` at `fps` through the external decoder.
pub fn extract_frames(
    video_path: &Path,
    fps: Fps,
    decoder: &DecoderCommand,
) -> Result<FrameSequence, MediaError> {
    if !video_path.is_file() {
        return Err(MediaError::DecodeFailure {
            path: video_path.to_path_buf(),
            reason: "input file does not exist".into(),
        });
    }
    let scratch = tempfile::tempdir()?;
    let args = decoder.render(video_path, fps, scratch.path());
    tracing::debug!(program = %decoder.program, ?args, "running frame decoder");
    let output = Command::new(&decoder.program)
        .args(&args)
        .output()
        .map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => MediaError::DecoderNotFound(decoder.program.clone()),
            _ => MediaError::Io(e),
        })?;
    if !output.status.success() {
        return Err(MediaError::DecodeFailure {
            path: video_path.to_path_buf(),
            reason: format!(
                "decoder exited with {}: {}",
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            ),
        });
    }
    let source_id = video_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    match read_numbered_frames(scratch.path(), fps, source_id) {
        Err(MediaError::EmptyVideo(_)) => Err(MediaError::EmptyVideo(video_path.to_path_buf())),
        other => other,
    }
}

/// Loads pre-extracted frames named by zero-padded index (`000.png`, `000001.png`, ...).
pub fn load_frame_dir(dir: &Path, fps: Fps) -> Result<FrameSequence, MediaError> {
    let sidecar = dir.join(SIDECAR_NAME);
    let source_id = match fs::read(&sidecar) {
        Ok(bytes) => {
            serde_json::from_slice::<FrameSidecar>(&bytes)
                .map_err(|e| MediaError::UnreadableImage {
                    path: sidecar.clone(),
                    reason: e.to_string(),
                })?
                .source_id
        }
        Err(e) if e.kind() == io::ErrorKind::NotFound => dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        Err(e) => return Err(e.into()),
    };
    read_numbered_frames(dir, fps, source_id)
}

fn read_numbered_frames(
    dir: &Path,
    fps: Fps,
    source_id: String,
) -> Result<FrameSequence, MediaError> {
    let mut numbered = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let is_png = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
        if !is_png || stem.is_empty() || !stem.bytes().all(|b| b.is_ascii_digit()) {
            continue;
        }
        let index: u32 = stem.parse().map_err(|_| MediaError::UnreadableImage {
            path: path.clone(),
            reason: "frame number out of range".into(),
        })?;
        numbered.push((index, path));
    }
    if numbered.is_empty() {
        return Err(MediaError::EmptyVideo(dir.to_path_buf()));
    }
    numbered.sort();
    let mut images = Vec::with_capacity(numbered.len());
    for (expected, (index, path)) in numbered.into_iter().enumerate() {
        let expected = expected as u32;
        if index < expected {
            return Err(MediaError::DuplicateIndex {
                dir: dir.to_path_buf(),
                index,
            });
        }
        if index > expected {
            return Err(MediaError::MissingIndex {
                dir: dir.to_path_buf(),
                expected,
                found: index,
            });
        }
        let img = image::open(&path).map_err(|e| MediaError::UnreadableImage {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        images.push(img.into_rgb8());
    }
    Ok(FrameSequence::from_images(source_id, fps, images))
}

/// Writes `{index:06}.png` for every frame plus the `frames.json` sidecar.
pub fn dump_frames(seq: &FrameSequence, dir: &Path) -> Result<(), MediaError> {
    fs::create_dir_all(dir)?;
    for frame in seq.frames() {
        let path = dir.join(format!("{:06}.png", frame.index));
        frame
            .image()
            .save_with_format(&path, ImageFormat::Png)
            .map_err(|e| MediaError::Io(io::Error::other(e)))?;
    }
    let first = seq.frames().first();
    let sidecar = FrameSidecar {
        source_id: seq.source_id().to_string(),
        fps: seq.fps(),
        count: seq.len() as u32,
        width: first.map_or(0, FrameRecord::width),
        height: first.map_or(0, FrameRecord::height),
    };
    let json = serde_json::to_vec_pretty(&sidecar).map_err(io::Error::other)?;
    fs::write(dir.join(SIDECAR_NAME), json)?;
    Ok(())
}

/// Returns a copy of `frame` with the grid lines drawn in; the input is untouched.
pub fn overlay_grid(frame: &FrameRecord, grid: &GridSpec) -> Result<FrameRecord, MediaError> {
    let (width, height) = (frame.width(), frame.height());
    if width < grid.cols || height < grid.rows {
        return Err(MediaError::FrameTooSmall {
            width,
            height,
            grid: *grid,
        });
    }
    let mut out = frame.image().clone();
    let color = image::Rgb(grid.line_color);
    for x in grid.vertical_lines(width) {
        for px in grid.line_span(x, width) {
            for y in 0..height {
                out.put_pixel(px, y, color);
            }
        }
    }
    for y in grid.horizontal_lines(height) {
        for py in grid.line_span(y, height) {
            for x in 0..width {
                out.put_pixel(x, py, color);
            }
        }
    }
    Ok(FrameRecord {
        index: frame.index,
        timestamp_s: frame.timestamp_s,
        pixels: Arc::new(out),
    })
}
