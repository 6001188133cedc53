//! Video question answering through text transcripts.
//!
//! A vision-language model captions each sampled frame twice: once as is
//! (global caption) and once with an `n x m` grid drawn over it, describing
//! each numbered cell (local caption). The per-frame captions are joined into
//! a transcript, and a text-only language model answers multiple-choice
//! questions from that transcript alone. Pixels stay on the transcribing side.
//!
//! Without the default `media` feature the crate has no image codec and no
//! way to attach an image to a model request; that build is what the
//! question-answering service links.

pub mod config;
pub mod eval;
pub mod frame;
pub mod gateway;
pub mod grid;
pub mod inference;
#[cfg(feature = "media")]
pub mod media;
#[cfg(feature = "media")]
pub mod pipeline;
pub mod prompting;
pub mod qa;
#[cfg(feature = "media")]
pub mod synth;
pub mod transcript;

pub use config::{ConfigError, Mode, RunConfig};
pub use eval::{evaluate, load_dataset, Dataset, EvalError, EvalReport};
pub use frame::{DecoderCommand, Fps, FrameStamp, SequenceMeta};
pub use gateway::{privacy_gate, PrivacyVerdict, TranscriptManifest};
pub use grid::{GridError, GridSpec};
pub use inference::{DecodingConfig, HttpChatClient, HttpClientConfig, InferenceError, MockLlm, TextModel};
pub use prompting::{cell_labels, global_prompt, local_prompt, qa_prompt, PromptPair, SystemPrompt};
pub use qa::{answer, extract_answer, ExtractionMethod, Prediction, QAItem};
pub use transcript::{Transcript, TranscriptEntry, TranscriptError};

#[cfg(feature = "media")]
pub use eval::{run_benchmark, BenchmarkOutcome, Models};
#[cfg(feature = "media")]
pub use inference::{MockVlm, VisionModel};
#[cfg(feature = "media")]
pub use media::{FrameRecord, FrameSequence, MediaError};
#[cfg(feature = "media")]
pub use pipeline::transcribe_sequence;
