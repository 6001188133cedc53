use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{evaluate, Dataset, EvalError, EvalReport, MediaLocator};
use crate::config::{ConfigError, RunConfig};
use crate::frame::DecoderCommand;
use crate::inference::{HttpChatClient, InferenceError, MockLlm, MockVlm, TextModel, VisionModel};
use crate::pipeline::{load_media_async, transcribe_sequence, PipelineError};
use crate::qa::{self, Prediction, QAItem};
use crate::transcript::{write_atomic, Transcript, FILE_SUFFIX};

#[derive(Debug, Error)]
pub enum BenchmarkError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// The two models a run talks to.
#[derive(Clone)]
pub struct Models {
    pub vlm: Arc<dyn VisionModel>,
    pub llm: Arc<dyn TextModel>,
}

impl std::fmt::Debug for Models {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Models")
            .field("vlm", &self.vlm.model_id())
            .field("llm", &self.llm.model_id())
            .finish()
    }
}

impl Models {
    pub fn mock() -> Self {
        Self {
            vlm: Arc::new(MockVlm),
            llm: Arc::new(MockLlm),
        }
    }

    /// Mocks when `config.mock` is set, HTTP clients otherwise.
    pub fn from_config(config: &RunConfig) -> Result<Self, InferenceError> {
        if config.mock {
            return Ok(Self::mock());
        }
        Ok(Self {
            vlm: Arc::new(HttpChatClient::new(config.vlm.clone())?),
            llm: Arc::new(HttpChatClient::new(config.llm.clone())?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureStage {
    Decode,
    Transcribe,
    Answer,
}

/// A video or question that could not be processed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub stage: FailureStage,
    pub video_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub question_id: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct BenchmarkOutcome {
    pub report: EvalReport,
    /// In dataset order; failed questions have no prediction.
    pub predictions: Vec<Prediction>,
    pub failures: Vec<Failure>,
    /// Videos whose transcript came from the cache.
    pub cache_hits: usize,
}

impl BenchmarkOutcome {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Serialize)]
struct ReportFile<'a> {
    report: &'a EvalReport,
    config: RunConfig,
    failures: &'a [Failure],
    abstain_policy: &'static str,
    /// The only part of the file that changes between identical runs.
    provenance: RunProvenance,
}

#[derive(Serialize)]
struct RunProvenance {
    created_at: String,
    tool_version: &'static str,
}

struct VideoResult {
    video_id: String,
    predictions: Vec<Prediction>,
    failures: Vec<Failure>,
    cache_hit: bool,
}

fn cache_key(video_id: &str, locator: &MediaLocator, config: &RunConfig) -> String {
    let mut h = Sha256::new();
    h.update(video_id.as_bytes());
    h.update([0]);
    h.update(locator.path().to_string_lossy().as_bytes());
    h.update([0]);
    h.update(config.transcription_fingerprint().as_bytes());
    hex::encode(&h.finalize()[..8])
}

fn cache_path(dir: &Path, video_id: &str, key: &str) -> PathBuf {
    dir.join(format!("{video_id}-{key}{FILE_SUFFIX}"))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchmarkError + '_ {
    move |source| BenchmarkError::Io {
        path: path.to_path_buf(),
        source,
    }
}

async fn obtain_transcript(
    video_id: &str,
    locator: &MediaLocator,
    config: &RunConfig,
    models: &Models,
) -> Result<(Transcript, bool), Failure> {
    let fail = |stage, message: String| Failure {
        stage,
        video_id: video_id.to_string(),
        question_id: None,
        message,
    };
    let cached = config
        .cache_dir
        .as_ref()
        .map(|dir| cache_path(dir, video_id, &cache_key(video_id, locator, config)));
    if let Some(path) = &cached {
        match Transcript::load(path) {
            Ok(t) => {
                tracing::debug!(video_id, path = %path.display(), "transcript cache hit");
                return Ok((t, true));
            }
            Err(e) if path.exists() => tracing::warn!(video_id, error = %e, "ignoring unreadable cache entry"),
            Err(_) => {}
        }
    }
    let decoder = DecoderCommand::parse(&config.decoder).unwrap_or_default();
    let seq = load_media_async(locator.clone(), config.fps, decoder)
        .await
        .map_err(|e| fail(FailureStage::Decode, e.to_string()))?;
    let grid = config.effective_grid();
    let transcript = transcribe_sequence(
        &seq,
        config.mode,
        grid.as_ref(),
        models.vlm.as_ref(),
        &config.vlm_decoding,
        config.parallelism,
    )
    .await
    .map_err(|e| match e {
        PipelineError::Media(m) => fail(FailureStage::Decode, m.to_string()),
        other => fail(FailureStage::Transcribe, other.to_string()),
    })?;
    if let Some(path) = &cached {
        if let Err(e) = transcript.save(path) {
            tracing::warn!(video_id, error = %e, "could not write transcript cache");
        }
    }
    Ok((transcript, false))
}

async fn run_video(
    video_id: String,
    items: Vec<QAItem>,
    locator: MediaLocator,
    config: &RunConfig,
    models: &Models,
    transcripts_dir: &Path,
) -> VideoResult {
    let mut result = VideoResult {
        video_id: video_id.clone(),
        predictions: Vec::new(),
        failures: Vec::new(),
        cache_hit: false,
    };
    let transcript = match obtain_transcript(&video_id, &locator, config, models).await {
        Ok((t, hit)) => {
            result.cache_hit = hit;
            t
        }
        Err(f) => {
            result.failures.push(f);
            return result;
        }
    };
    let out = transcripts_dir.join(format!("{video_id}{FILE_SUFFIX}"));
    if let Err(e) = transcript.save(&out) {
        tracing::warn!(video_id, error = %e, "could not write transcript artifact");
    }
    tracing::info!(video_id, frames = transcript.len(), digest = %transcript.digest(), "transcribed");
    let transcript = &transcript;
    let answers: Vec<_> = stream::iter(items)
        .map(|item| async move {
            let r = qa::answer(transcript, &item, models.llm.as_ref(), &config.llm_decoding).await;
            (item.question_id, r)
        })
        .buffered(config.qa_parallelism.max(1))
        .collect()
        .await;
    for (question_id, r) in answers {
        match r {
            Ok(p) => result.predictions.push(p),
            Err(e) => result.failures.push(Failure {
                stage: FailureStage::Answer,
                video_id: video_id.clone(),
                question_id: Some(question_id),
                message: e.to_string(),
            }),
        }
    }
    result
}

/// Transcribes every video once, answers all of its questions, scores the
/// predictions and writes `report.json`, `report.txt`, `predictions.jsonl` and
/// `transcripts/<video_id>.glt.jsonl` under `out_dir`.
///
/// Failed videos or questions are listed in the outcome and the report; the
/// rest are still scored.
pub async fn run_benchmark(
    dataset: &Dataset,
    config: &RunConfig,
    models: &Models,
    out_dir: &Path,
) -> Result<BenchmarkOutcome, BenchmarkError> {
    config.validate()?;
    let transcripts_dir = out_dir.join("transcripts");
    std::fs::create_dir_all(&transcripts_dir).map_err(io_err(&transcripts_dir))?;
    if let Some(dir) = &config.cache_dir {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }

    let mut by_video: BTreeMap<&str, Vec<QAItem>> = BTreeMap::new();
    for item in &dataset.items {
        by_video.entry(item.video_id.as_str()).or_default().push(item.clone());
    }
    let jobs: Vec<_> = dataset
        .video_ids()
        .into_iter()
        .map(|vid| {
            let items = by_video.remove(vid).unwrap_or_default();
            let locator = dataset.video_index.get(vid).cloned();
            (vid.to_string(), items, locator)
        })
        .collect();
    let transcripts_dir = &transcripts_dir;
    let mut results: Vec<VideoResult> = stream::iter(jobs)
        .map(|(vid, items, locator)| async move {
            match locator {
                Some(loc) => run_video(vid, items, loc, config, models, transcripts_dir).await,
                None => VideoResult {
                    failures: vec![Failure {
                        stage: FailureStage::Decode,
                        video_id: vid.clone(),
                        question_id: None,
                        message: "video is not in the dataset's video index".into(),
                    }],
                    video_id: vid,
                    predictions: Vec::new(),
                    cache_hit: false,
                },
            }
        })
        .buffer_unordered(config.video_workers.max(1))
        .collect()
        .await;

    // Completion order is arbitrary; everything below is keyed to dataset order.
    let order: BTreeMap<&str, usize> = dataset
        .video_ids()
        .into_iter()
        .enumerate()
        .map(|(i, v)| (v, i))
        .collect();
    results.sort_by_key(|r| order.get(r.video_id.as_str()).copied().unwrap_or(usize::MAX));
    let cache_hits = results.iter().filter(|r| r.cache_hit).count();
    let mut predictions: Vec<Prediction> = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        predictions.extend(r.predictions);
        failures.extend(r.failures);
    }
    let item_order: BTreeMap<&str, usize> = dataset
        .items
        .iter()
        .enumerate()
        .map(|(i, it)| (it.question_id.as_str(), i))
        .collect();
    predictions.sort_by_key(|p| item_order.get(p.question_id.as_str()).copied().unwrap_or(usize::MAX));

    let report = evaluate(&predictions, dataset)?.with_fingerprint(config.fingerprint());
    write_artifacts(out_dir, &report, config, &predictions, &failures)?;
    Ok(BenchmarkOutcome {
        report,
        predictions,
        failures,
        cache_hits,
    })
}

fn write_artifacts(
    out_dir: &Path,
    report: &EvalReport,
    config: &RunConfig,
    predictions: &[Prediction],
    failures: &[Failure],
) -> Result<(), BenchmarkError> {
    let file = ReportFile {
        report,
        config: config.redacted(),
        failures,
        abstain_policy: "abstain counts as incorrect",
        provenance: RunProvenance {
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            tool_version: env!("CARGO_PKG_VERSION"),
        },
    };
    let mut json = serde_json::to_string_pretty(&file).expect("report serializes");
    json.push('\n');
    let path = out_dir.join("report.json");
    write_atomic(&path, json.as_bytes()).map_err(io_err(&path))?;

    let mut text = report.to_table(config.mode.as_str());
    if !failures.is_empty() {
        let _ = writeln!(text, "\n{} failure(s):", failures.len());
        for f in failures {
            let q = f.question_id.as_deref().map(|q| format!(" {q}")).unwrap_or_default();
            let _ = writeln!(text, "  [{:?}] {}{q}: {}", f.stage, f.video_id, f.message);
        }
    }
    let path = out_dir.join("report.txt");
    write_atomic(&path, text.as_bytes()).map_err(io_err(&path))?;

    let mut lines = String::new();
    for p in predictions {
        lines.push_str(&serde_json::to_string(p).expect("prediction serializes"));
        lines.push('\n');
    }
    let path = out_dir.join("predictions.jsonl");
    write_atomic(&path, lines.as_bytes()).map_err(io_err(&path))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Mode;
    use crate::synth::{self, SynthSpec};

    fn smoke(videos: u32) -> (tempfile::TempDir, Dataset) {
        let dir = tempfile::tempdir().unwrap();
        synth::write(&SynthSpec { videos, ..SynthSpec::default() }, dir.path()).unwrap();
        let ds = super::super::load_dataset(&dir.path().join("dataset.json")).unwrap();
        (dir, ds)
    }

    #[tokio::test]
    async fn mock_run_is_perfect_and_writes_artifacts() {
        let (dir, ds) = smoke(3);
        let out = dir.path().join("out");
        let cfg = RunConfig { mock: true, ..RunConfig::default() };
        let o = run_benchmark(&ds, &cfg, &Models::mock(), &out).await.unwrap();
        assert!(o.is_complete());
        assert_eq!(o.report.total, 15);
        assert_eq!(o.report.overall_accuracy, 1.0);
        for f in ["report.json", "report.txt", "predictions.jsonl", "transcripts/v00.glt.jsonl"] {
            assert!(out.join(f).is_file(), "{f}");
        }
        let lines = std::fs::read_to_string(out.join("predictions.jsonl")).unwrap();
        assert_eq!(lines.lines().count(), 15);
        assert!(lines.lines().next().unwrap().contains("\"v00-q0\""));
    }

    #[tokio::test]
    async fn broken_video_is_reported_and_rest_scored() {
        let (dir, ds) = smoke(3);
        std::fs::write(dir.path().join("videos/v01/000002.png"), b"not a png").unwrap();
        let cfg = RunConfig { mock: true, ..RunConfig::default() };
        let o = run_benchmark(&ds, &cfg, &Models::mock(), &dir.path().join("out")).await.unwrap();
        assert_eq!(o.failures.len(), 1);
        assert_eq!(o.failures[0].video_id, "v01");
        assert_eq!(o.failures[0].stage, FailureStage::Decode);
        assert_eq!(o.report.total, 10);
        assert_eq!(o.report.overall_accuracy, 1.0);
    }

    #[tokio::test]
    async fn cache_skips_transcription_and_reproduces_report() {
        let (dir, ds) = smoke(2);
        let cfg = RunConfig {
            mock: true,
            mode: Mode::Local,
            cache_dir: Some(dir.path().join("cache")),
            ..RunConfig::default()
        };
        let a = run_benchmark(&ds, &cfg, &Models::mock(), &dir.path().join("a")).await.unwrap();
        assert_eq!(a.cache_hits, 0);
        let b = run_benchmark(&ds, &cfg, &Models::mock(), &dir.path().join("b")).await.unwrap();
        assert_eq!(b.cache_hits, 2);
        assert_eq!(a.report, b.report);
        assert_eq!(a.predictions, b.predictions);
        // another mode must not reuse the entries
        let g = RunConfig { mode: Mode::Global, ..cfg };
        let c = run_benchmark(&ds, &g, &Models::mock(), &dir.path().join("c")).await.unwrap();
        assert_eq!(c.cache_hits, 0);
    }

    #[tokio::test]
    async fn api_keys_never_reach_the_report() {
        let (dir, ds) = smoke(1);
        let mut cfg = RunConfig { mock: true, ..RunConfig::default() };
        cfg.llm.api_key = Some("sk-hidden".into());
        run_benchmark(&ds, &cfg, &Models::mock(), &dir.path().join("out")).await.unwrap();
        let json = std::fs::read_to_string(dir.path().join("out/report.json")).unwrap();
        assert!(!json.contains("sk-hidden"));
    }
}
