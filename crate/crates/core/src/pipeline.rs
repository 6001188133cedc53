//! Transcription phase: caption every frame with the plain prompt, the grid
//! prompt, or both, then assemble the transcript.

use std::path::Path;

use futures::stream::{self, StreamExt, TryStreamExt};
use thiserror::Error;

use crate::config::Mode;
use crate::eval::MediaLocator;
use crate::frame::{DecoderCommand, Fps};
use crate::grid::GridSpec;
use crate::inference::{DecodingConfig, InferenceError, VisionModel};
use crate::media::{self, FrameRecord, FrameSequence, MediaError};
use crate::prompting::{self, PromptPair};
use crate::transcript::{Provenance, Transcript, TranscriptBuilder, TranscriptError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Media(#[from] MediaError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Transcript(#[from] TranscriptError),
    #[error("mode `{0}` needs a grid")]
    MissingGrid(Mode),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Global,
    Local,
}

/// Decodes or loads the frames behind a locator. Blocking; callers on an async
/// runtime should go through [`load_media_async`].
pub fn load_media(locator: &MediaLocator, fps: Fps, decoder: &DecoderCommand) -> Result<FrameSequence, MediaError> {
    match locator {
        MediaLocator::FrameDir(dir) => media::load_frame_dir(dir, fps),
        MediaLocator::VideoFile(path) => media::extract_frames(path, fps, decoder),
    }
}

pub async fn load_media_async(
    locator: MediaLocator,
    fps: Fps,
    decoder: DecoderCommand,
) -> Result<FrameSequence, MediaError> {
    tokio::task::spawn_blocking(move || load_media(&locator, fps, &decoder))
        .await
        .map_err(|e| MediaError::Io(std::io::Error::other(e)))?
}

/// Loads a frame directory or video file chosen by what `path` is.
pub fn load_path(path: &Path, fps: Fps, decoder: &DecoderCommand) -> Result<FrameSequence, MediaError> {
    let locator = MediaLocator::from_path(path).ok_or_else(|| MediaError::DecodeFailure {
        path: path.to_path_buf(),
        reason: "no such file or directory".into(),
    })?;
    load_media(&locator, fps, decoder)
}

/// Captions every frame of `seq` and returns the transcript.
///
/// Up to `parallelism` caption requests are in flight at once; completions
/// arrive in any order and are keyed back to their frame index. The grid is
/// required for `local` and `local+global`, ignored for `global`.
pub async fn transcribe_sequence(
    seq: &FrameSequence,
    mode: Mode,
    grid: Option<&GridSpec>,
    vlm: &dyn VisionModel,
    decoding: &DecodingConfig,
    parallelism: usize,
) -> Result<Transcript, PipelineError> {
    let grid = if mode.uses_grid() {
        Some(*grid.ok_or(PipelineError::MissingGrid(mode))?)
    } else {
        None
    };
    if seq.is_empty() {
        return Err(TranscriptError::EmptyTranscript.into());
    }
    // Overlay up front so a too-small frame fails before any model call.
    let gridded: Vec<FrameRecord> = match &grid {
        Some(g) => seq
            .frames()
            .iter()
            .map(|f| media::overlay_grid(f, g))
            .collect::<Result<_, _>>()?,
        None => Vec::new(),
    };
    let global_prompt = prompting::global_prompt();
    let local_prompt = grid.as_ref().map(prompting::local_prompt);

    let mut jobs: Vec<(Kind, usize)> = Vec::new();
    if mode.uses_global() {
        jobs.extend((0..seq.len()).map(|i| (Kind::Global, i)));
    }
    if local_prompt.is_some() {
        jobs.extend((0..gridded.len()).map(|i| (Kind::Local, i)));
    }

    let mut builder = TranscriptBuilder::new(seq.meta(), mode.uses_global(), grid);
    let (frames, gridded, global_prompt, local_prompt) = (seq.frames(), &gridded, &global_prompt, &local_prompt);
    let mut results = stream::iter(jobs)
        .map(|(kind, i)| {
            let (frame, prompts): (&FrameRecord, &PromptPair) = match (kind, local_prompt) {
                (Kind::Local, Some(lp)) => (&gridded[i], lp),
                _ => (&frames[i], global_prompt),
            };
            async move {
                let text = vlm.caption(frame, prompts, decoding).await?;
                Ok::<_, InferenceError>((kind, frame.index, text))
            }
        })
        .buffer_unordered(parallelism.max(1));
    while let Some((kind, index, text)) = results.try_next().await? {
        match kind {
            Kind::Global => builder.insert_global(index, text)?,
            Kind::Local => builder.insert_local(index, text)?,
        }
    }
    Ok(builder
        .finish()?
        .with_provenance(Provenance::now(vlm.model_id(), decoding)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::MockVlm;
    use image::{Rgb, RgbImage};

    fn seq(n: u32) -> FrameSequence {
        let images: Vec<RgbImage> = (0..n)
            .map(|i| RgbImage::from_pixel(60, 40, Rgb([i as u8 * 10, 100, 200])))
            .collect();
        FrameSequence::from_images("clip", Fps::ONE, images)
    }

    #[tokio::test]
    async fn modes_fill_the_right_fields() {
        let s = seq(3);
        let grid = GridSpec::default();
        let d = DecodingConfig::vlm_default();
        for mode in Mode::ALL {
            let t = transcribe_sequence(&s, mode, Some(&grid), &MockVlm, &d, 2).await.unwrap();
            assert_eq!(t.len(), 3);
            for (i, e) in t.entries.iter().enumerate() {
                assert_eq!(e.frame_index, i as u32);
                assert_eq!(e.global_caption.is_some(), mode.uses_global());
                assert_eq!(e.local_caption.is_some(), mode.uses_grid());
            }
            assert_eq!(t.grid.is_some(), mode.uses_grid());
            assert_eq!(t.provenance.vlm_model.as_deref(), Some("mock-vlm"));
        }
    }

    #[tokio::test]
    async fn local_captions_see_the_grid() {
        let s = seq(1);
        let grid = GridSpec::default();
        let d = DecodingConfig::vlm_default();
        let t = transcribe_sequence(&s, Mode::LocalGlobal, Some(&grid), &MockVlm, &d, 1)
            .await
            .unwrap();
        let e = &t.entries[0];
        assert!(e.global_caption.as_ref().unwrap().starts_with("global: frame 0 "));
        let local = e.local_caption.as_ref().unwrap();
        assert_eq!(local.lines().count(), 6);
        assert!(local.starts_with("Cell1(left, lower): token "));
    }

    #[tokio::test]
    async fn parallelism_does_not_change_output() {
        let s = seq(7);
        let grid = GridSpec::new(3, 3).unwrap();
        let d = DecodingConfig::vlm_default();
        let a = transcribe_sequence(&s, Mode::LocalGlobal, Some(&grid), &MockVlm, &d, 1).await.unwrap();
        let b = transcribe_sequence(&s, Mode::LocalGlobal, Some(&grid), &MockVlm, &d, 8).await.unwrap();
        assert_eq!(a.entries, b.entries);
    }

    #[tokio::test]
    async fn missing_grid_and_tiny_frames() {
        let s = seq(1);
        let d = DecodingConfig::vlm_default();
        let err = transcribe_sequence(&s, Mode::Local, None, &MockVlm, &d, 1).await.unwrap_err();
        assert!(matches!(err, PipelineError::MissingGrid(Mode::Local)));
        let huge = GridSpec::new(50, 3).unwrap();
        let err = transcribe_sequence(&s, Mode::Local, Some(&huge), &MockVlm, &d, 1).await.unwrap_err();
        assert!(matches!(err, PipelineError::Media(MediaError::FrameTooSmall { .. })));
    }
}
