//! `logat`: transcribe videos, answer questions from transcripts, run
//! benchmarks and start the edge/cloud services.
//!
//! Exit codes: 0 success, 1 other failure, 2 configuration error, 3 model
//! inference failure, 4 video decode failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use logat_core::eval::{self, FailureStage, Models};
use logat_core::frame::DecoderCommand;
use logat_core::gateway::TranscriptManifest;
use logat_core::pipeline::{self, PipelineError};
use logat_core::qa::{self, QaError};
use logat_core::synth::{self, SynthSpec};
use logat_core::transcript::FILE_SUFFIX;
use logat_core::{ConfigError, Fps, GridSpec, InferenceError, MediaError, QAItem, RunConfig, Transcript};
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "logat", version, about = "Grid-prompted video transcription and transcript-only question answering")]
struct Cli {
    /// Config file (TOML or JSON). Precedence: flag > LOGAT_* env > file > default.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Use the deterministic mock models; no network access.
    #[arg(long, global = true)]
    mock: bool,
    /// More log output on stderr (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Default, Args)]
struct Overrides {
    /// Transcript mode: global, local or local+global.
    #[arg(long)]
    mode: Option<String>,
    /// Grid layout as ROWSxCOLS, e.g. 2x3.
    #[arg(long)]
    grid: Option<String>,
    /// Frames sampled per second: integer, a/b or decimal.
    #[arg(long)]
    fps: Option<String>,
    #[arg(long)]
    vlm_url: Option<String>,
    #[arg(long)]
    vlm_model: Option<String>,
    #[arg(long)]
    llm_url: Option<String>,
    #[arg(long)]
    llm_model: Option<String>,
    /// Concurrent model requests per video.
    #[arg(long)]
    parallelism: Option<usize>,
    /// Retries per model request.
    #[arg(long)]
    retries: Option<u32>,
    /// Per-request timeout in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    /// Transcript cache directory.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// External decoder template with {input}, {fps} and {output}.
    #[arg(long)]
    decoder: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Caption a video file or frame directory into a .glt.jsonl transcript.
    Transcribe {
        input: PathBuf,
        /// Output file; defaults to `<input name>.glt.jsonl` in the current directory.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Answer one multiple-choice question from a transcript file.
    Ask {
        transcript: PathBuf,
        #[arg(short, long)]
        question: String,
        /// Answer options, comma separated or repeated.
        #[arg(short, long, value_delimiter = ',', required = true)]
        options: Vec<String>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run a dataset end to end and write report.json, report.txt,
    /// predictions.jsonl and transcripts/.
    Eval {
        /// dataset.json, or a directory containing one
        dataset: PathBuf,
        /// Output directory; defaults to `runs/<mode>`.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Start the edge transcription service.
    ServeEdge {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8780)]
        port: u16,
        /// Directory of `<video_id>/` frame dirs or `<video_id>.<ext>` files.
        #[arg(long)]
        video_root: PathBuf,
        /// Where transcripts are stored.
        #[arg(long, default_value = "edge-store")]
        store: PathBuf,
        #[arg(long, env = "LOGAT_TOKEN", hide_env_values = true)]
        token: Option<String>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Start the cloud question-answering service.
    ServeQa {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8790)]
        port: u16,
        #[arg(long, env = "LOGAT_EDGE_URL")]
        edge_url: Option<String>,
        #[arg(long, env = "LOGAT_EDGE_TOKEN", hide_env_values = true)]
        edge_token: Option<String>,
        #[arg(long, env = "LOGAT_TOKEN", hide_env_values = true)]
        token: Option<String>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Write the synthetic smoke dataset.
    Synth {
        output: PathBuf,
        #[arg(long, default_value_t = 10)]
        videos: u32,
        #[arg(long, default_value_t = 5)]
        frames: u32,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Inference(String),
    Decode(String),
    Other(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Other(_) => 1,
            CliError::Config(_) => 2,
            CliError::Inference(_) => 3,
            CliError::Decode(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Inference(m) | CliError::Decode(m) | CliError::Other(m) => m,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<InferenceError> for CliError {
    fn from(e: InferenceError) -> Self {
        match e {
            InferenceError::InvalidRequest(_) => CliError::Config(e.to_string()),
            other => CliError::Inference(other.to_string()),
        }
    }
}

impl From<MediaError> for CliError {
    fn from(e: MediaError) -> Self {
        CliError::Decode(e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Media(m) => m.into(),
            PipelineError::Inference(i) => i.into(),
            PipelineError::MissingGrid(_) => CliError::Config(e.to_string()),
            PipelineError::Transcript(t) => CliError::Other(t.to_string()),
        }
    }
}

impl From<QaError> for CliError {
    fn from(e: QaError) -> Self {
        match e {
            QaError::Inference(i) => i.into(),
            QaError::Prompt(p) => CliError::Config(p.to_string()),
            QaError::EmptyTranscript => CliError::Other(e.to_string()),
        }
    }
}

fn other(e: impl std::fmt::Display) -> CliError {
    CliError::Other(e.to_string())
}

/// Builds the effective config: defaults, file, environment, then flags.
fn resolve(cli: &Cli, o: &Overrides) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(m) = &o.mode {
        cfg.mode = m.parse()?;
    }
    if let Some(g) = &o.grid {
        cfg.grid = g
            .parse::<GridSpec>()
            .map_err(|e| CliError::Config(format!("invalid --grid `{g}`: {e}")))?;
        if !cfg.mode.uses_grid() {
            eprintln!("warning: --grid {g} is ignored in `global` mode");
        }
    }
    if let Some(f) = &o.fps {
        cfg.fps = f
            .parse::<Fps>()
            .map_err(|e| CliError::Config(format!("invalid field `fps`: {e}")))?;
    }
    if let Some(v) = &o.vlm_url {
        cfg.vlm.base_url = v.clone();
    }
    if let Some(v) = &o.vlm_model {
        cfg.vlm.model = v.clone();
    }
    if let Some(v) = &o.llm_url {
        cfg.llm.base_url = v.clone();
    }
    if let Some(v) = &o.llm_model {
        cfg.llm.model = v.clone();
    }
    if let Some(p) = o.parallelism {
        cfg.parallelism = p;
        cfg.vlm.parallelism = p;
        cfg.llm.parallelism = p;
    }
    if let Some(r) = o.retries {
        cfg.vlm.retries = r;
        cfg.llm.retries = r;
    }
    if let Some(t) = o.timeout {
        cfg.vlm.timeout_s = t;
        cfg.llm.timeout_s = t;
    }
    if let Some(d) = &o.cache_dir {
        cfg.cache_dir = Some(d.clone());
    }
    if let Some(d) = &o.decoder {
        cfg.decoder = d.clone();
    }
    cfg.mock |= cli.mock;
    cfg.validate()?;
    Ok(cfg)
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("json value serializes"));
}

fn default_output(input: &Path) -> PathBuf {
    let stem = input
        .file_stem()
        .or_else(|| input.file_name())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "transcript".into());
    PathBuf::from(format!("{stem}{FILE_SUFFIX}"))
}

async fn cmd_transcribe(cli: &Cli, input: &Path, output: Option<&Path>, o: &Overrides) -> Result<(), CliError> {
    let cfg = resolve(cli, o)?;
    let models = Models::from_config(&cfg)?;
    let decoder = DecoderCommand::parse(&cfg.decoder).unwrap_or_default();
    let (path, fps) = (input.to_path_buf(), cfg.fps);
    let seq = tokio::task::spawn_blocking(move || pipeline::load_path(&path, fps, &decoder))
        .await
        .map_err(other)??;
    tracing::info!(frames = seq.len(), source = seq.source_id(), "loaded frames");
    let grid = cfg.effective_grid();
    let transcript = pipeline::transcribe_sequence(
        &seq,
        cfg.mode,
        grid.as_ref(),
        models.vlm.as_ref(),
        &cfg.vlm_decoding,
        cfg.parallelism,
    )
    .await?;
    let out = output.map(Path::to_path_buf).unwrap_or_else(|| default_output(input));
    transcript.save(&out).map_err(other)?;
    let manifest = TranscriptManifest::of(&transcript);
    if cli.json {
        print_json(&json!({ "output": out, "manifest": manifest, "config": cfg.redacted() }));
    } else {
        println!("wrote {}", out.display());
        println!("  transcript_id {}", manifest.transcript_id);
        println!("  source_id     {}", manifest.source_id);
        println!("  entries       {}", manifest.entry_count);
        println!("  mode          {}", cfg.mode);
        if let Some(g) = manifest.grid {
            println!("  grid          {g}");
        }
        println!("  bytes         {}", manifest.byte_size);
    }
    Ok(())
}

async fn cmd_ask(cli: &Cli, path: &Path, question: &str, options: &[String], o: &Overrides) -> Result<(), CliError> {
    let cfg = resolve(cli, o)?;
    let transcript = Transcript::load(path).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))?;
    let models = Models::from_config(&cfg)?;
    let item = QAItem {
        question_id: "ask".into(),
        video_id: transcript.source_id.clone(),
        category: String::new(),
        question: question.to_string(),
        options: options.iter().map(|s| s.trim().to_string()).collect(),
        gold_index: None,
    };
    let prediction = qa::answer(&transcript, &item, models.llm.as_ref(), &cfg.llm_decoding).await?;
    if cli.json {
        print_json(&json!({ "prediction": prediction, "config": cfg.redacted() }));
    } else {
        match prediction.chosen_index {
            Some(i) => println!("{}) {}", logat_core::prompting::OPTION_LETTERS[i], item.options[i]),
            None => println!("ABSTAIN"),
        }
        println!("  method: {}", prediction.extraction_method);
        println!("  raw:    {}", prediction.raw_output.replace('\n', " "));
    }
    Ok(())
}

async fn cmd_eval(cli: &Cli, dataset: &Path, output: Option<&Path>, o: &Overrides) -> Result<(), CliError> {
    let cfg = resolve(cli, o)?;
    let ds = eval::load_dataset(dataset).map_err(|e| CliError::Config(e.to_string()))?;
    let models = Models::from_config(&cfg)?;
    let out = output
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("runs").join(cfg.mode.as_str()));
    let started = Instant::now();
    let outcome = eval::run_benchmark(&ds, &cfg, &models, &out).await.map_err(|e| match e {
        eval::BenchmarkError::Config(c) => c.into(),
        other => CliError::Other(other.to_string()),
    })?;
    let elapsed = started.elapsed();
    if cli.json {
        print_json(&json!({
            "output": out,
            "report": outcome.report,
            "failures": outcome.failures,
            "cache_hits": outcome.cache_hits,
            "elapsed_ms": elapsed.as_millis() as u64,
        }));
    } else {
        print!("{}", outcome.report.to_table(cfg.mode.as_str()));
        println!("artifacts in {} ({:.2}s)", out.display(), elapsed.as_secs_f64());
    }
    if outcome.failures.is_empty() {
        return Ok(());
    }
    for f in &outcome.failures {
        eprintln!("failed [{:?}] {} {}: {}", f.stage, f.video_id, f.question_id.as_deref().unwrap_or(""), f.message);
    }
    let msg = format!("{} video(s) or question(s) failed; see report.json", outcome.failures.len());
    if outcome.failures.iter().any(|f| f.stage != FailureStage::Decode) {
        Err(CliError::Inference(msg))
    } else {
        Err(CliError::Decode(msg))
    }
}

async fn bind(host: &str, port: u16) -> Result<tokio::net::TcpListener, CliError> {
    tokio::net::TcpListener::bind((host, port))
        .await
        .map_err(|e| CliError::Other(format!("cannot bind {host}:{port}: {e}")))
}

async fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Transcribe { input, output, overrides } => cmd_transcribe(cli, input, output.as_deref(), overrides).await,
        Command::Ask { transcript, question, options, overrides } => {
            cmd_ask(cli, transcript, question, options, overrides).await
        }
        Command::Eval { dataset, output, overrides } => cmd_eval(cli, dataset, output.as_deref(), overrides).await,
        Command::ServeEdge { host, port, video_root, store, token, overrides } => {
            let run = resolve(cli, overrides)?;
            let state = logat_edge::EdgeState::new(logat_edge::EdgeConfig {
                run,
                video_root: video_root.clone(),
                store_dir: store.clone(),
                token: token.clone(),
            })
            .map_err(|e| CliError::Config(e.to_string()))?;
            let listener = bind(host, *port).await?;
            eprintln!("edge service listening on http://{}", listener.local_addr().map_err(other)?);
            logat_edge::serve(listener, state).await.map_err(other)
        }
        Command::ServeQa { host, port, edge_url, edge_token, token, overrides } => {
            let run = resolve(cli, overrides)?;
            let mut config = logat_cloud::CloudConfig::from_run(&run);
            config.edge_url = edge_url.clone();
            config.edge_token = edge_token.clone();
            config.token = token.clone();
            let state = logat_cloud::CloudState::new(config)?;
            let listener = bind(host, *port).await?;
            eprintln!("question-answering service listening on http://{}", listener.local_addr().map_err(other)?);
            logat_cloud::serve(listener, state).await.map_err(other)
        }
        Command::Synth { output, videos, frames, seed } => {
            let spec = SynthSpec {
                videos: *videos,
                frames_per_video: *frames,
                seed: *seed,
                ..SynthSpec::default()
            };
            if spec.videos == 0 || spec.frames_per_video == 0 {
                return Err(CliError::Config("--videos and --frames must be at least 1".into()));
            }
            let ds = synth::write(&spec, output)?;
            if cli.json {
                print_json(&json!({ "output": output, "videos": spec.videos, "questions": ds.items.len() }));
            } else {
                println!(
                    "wrote {} videos and {} questions to {}",
                    spec.videos,
                    ds.items.len(),
                    output.display()
                );
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_env("LOGAT_LOG").unwrap_or_else(|_| level.into()))
        .with_writer(std::io::stderr)
        .init();
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: cannot start runtime: {e}");
            return ExitCode::FAILURE;
        }
    };
    match rt.block_on(run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if cli.json {
                // stdout may already hold a partial result; keep it one document
                eprintln!("{}", json!({ "error": e.message(), "exit_code": e.exit_code() }));
            } else {
                eprintln!("error: {}", e.message());
            }
            ExitCode::from(e.exit_code())
        }
    }
}
