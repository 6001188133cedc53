//! Run configuration.
//!
//! Precedence, lowest to highest: built-in defaults, config file (TOML or
//! JSON), `LOGAT_*` environment variables, command-line flags. The file and
//! environment layers are applied here; flags are applied by the caller.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::frame::Fps;
use crate::grid::GridSpec;
use crate::inference::mock::{MOCK_LLM_ID, MOCK_VLM_ID};
use crate::inference::{DecodingConfig, HttpClientConfig};
use crate::prompting;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

impl ConfigError {
    pub fn invalid(field: impl Into<String>, reason: impl fmt::Display) -> Self {
        ConfigError::Invalid {
            field: field.into(),
            reason: reason.to_string(),
        }
    }
}

/// Which captions go into the transcript.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "global")]
    Global,
    #[serde(rename = "local")]
    Local,
    #[serde(rename = "local+global")]
    LocalGlobal,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Global, Mode::Local, Mode::LocalGlobal];

    pub fn uses_grid(self) -> bool {
        matches!(self, Mode::Local | Mode::LocalGlobal)
    }

    pub fn uses_global(self) -> bool {
        matches!(self, Mode::Global | Mode::LocalGlobal)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Global => "global",
            Mode::Local => "local",
            Mode::LocalGlobal => "local+global",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "global" => Ok(Mode::Global),
            "local" => Ok(Mode::Local),
            "local+global" | "global+local" | "both" => Ok(Mode::LocalGlobal),
            other => Err(ConfigError::invalid(
                "mode",
                format!("`{other}` is not one of global, local, local+global"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    /// Ignored when `mode` is `global`.
    pub grid: GridSpec,
    pub fps: Fps,
    pub vlm: HttpClientConfig,
    pub llm: HttpClientConfig,
    pub vlm_decoding: DecodingConfig,
    pub llm_decoding: DecodingConfig,
    /// Caption requests in flight per video.
    pub parallelism: usize,
    /// Videos transcribed concurrently.
    pub video_workers: usize,
    /// Questions answered concurrently per video; 1 keeps them sequential.
    pub qa_parallelism: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    /// Replace both models with the deterministic mocks.
    pub mock: bool,
    /// External frame decoder, see [`crate::media::DecoderCommand`].
    pub decoder: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::LocalGlobal,
            grid: GridSpec::default(),
            fps: Fps::ONE,
            vlm: HttpClientConfig {
                base_url: "http://127.0.0.1:8000".into(),
                model: "llava-v1.6-7b".into(),
                ..HttpClientConfig::default()
            },
            llm: HttpClientConfig {
                base_url: "http://127.0.0.1:8001".into(),
                model: "llama-3.1-8b-instruct".into(),
                ..HttpClientConfig::default()
            },
            vlm_decoding: DecodingConfig::vlm_default(),
            llm_decoding: DecodingConfig::llm_default(),
            parallelism: 4,
            video_workers: 2,
            qa_parallelism: 1,
            cache_dir: None,
            mock: false,
            decoder: crate::frame::DEFAULT_DECODER_TEMPLATE.to_string(),
        }
    }
}

fn parse_env<T: FromStr>(field: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e| ConfigError::invalid(field, e))
}

fn parse_bool(field: &str, value: &str) -> Result<bool, ConfigError> {
    match value.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" | "" => Ok(false),
        other => Err(ConfigError::invalid(field, format!("`{other}` is not a boolean"))),
    }
}

impl RunConfig {
    /// Reads a TOML (`.toml`) or JSON (anything else) config file. Missing
    /// fields keep their defaults.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let parse_err = |message: String| ConfigError::Parse {
            path: path.to_path_buf(),
            message,
        };
        let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        if is_toml {
            toml::from_str(&text).map_err(|e| parse_err(e.to_string()))
        } else {
            serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))
        }
    }

    /// Defaults, then the optional file, then the process environment.
    pub fn load(file: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match file {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }

    /// Applies `LOGAT_*` overrides read through `get`.
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(v) = get("LOGAT_MODE") {
            self.mode = v.parse()?;
        }
        if let Some(v) = get("LOGAT_GRID") {
            self.grid = v.parse::<GridSpec>().map_err(|e| ConfigError::invalid("grid", e))?;
        }
        if let Some(v) = get("LOGAT_FPS") {
            self.fps = parse_env("fps", &v)?;
        }
        if let Some(v) = get("LOGAT_PARALLELISM") {
            self.parallelism = parse_env("parallelism", &v)?;
        }
        if let Some(v) = get("LOGAT_VIDEO_WORKERS") {
            self.video_workers = parse_env("video_workers", &v)?;
        }
        if let Some(v) = get("LOGAT_MOCK") {
            self.mock = parse_bool("mock", &v)?;
        }
        if let Some(v) = get("LOGAT_CACHE_DIR") {
            self.cache_dir = Some(PathBuf::from(v));
        }
        if let Some(v) = get("LOGAT_DECODER") {
            self.decoder = v;
        }
        if let Some(v) = get("LOGAT_VLM_URL") {
            self.vlm.base_url = v;
        }
        if let Some(v) = get("LOGAT_VLM_MODEL") {
            self.vlm.model = v;
        }
        if let Some(v) = get("LOGAT_LLM_URL") {
            self.llm.base_url = v;
        }
        if let Some(v) = get("LOGAT_LLM_MODEL") {
            self.llm.model = v;
        }
        if let Some(v) = get("LOGAT_API_KEY") {
            self.vlm.api_key = Some(v.clone());
            self.llm.api_key = Some(v);
        }
        if let Some(v) = get("LOGAT_TIMEOUT_S") {
            let t: f64 = parse_env("timeout_s", &v)?;
            self.vlm.timeout_s = t;
            self.llm.timeout_s = t;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.mode.uses_grid() {
            self.grid.validate().map_err(|e| match e {
                crate::grid::GridError::InvalidField { field, reason } => ConfigError::invalid(field, reason),
                other => ConfigError::invalid("grid", other),
            })?;
        }
        self.vlm_decoding
            .validate()
            .map_err(|e| ConfigError::invalid("vlm_decoding", e))?;
        self.llm_decoding
            .validate()
            .map_err(|e| ConfigError::invalid("llm_decoding", e))?;
        if self.parallelism == 0 {
            return Err(ConfigError::invalid("parallelism", "must be at least 1"));
        }
        if self.qa_parallelism == 0 {
            return Err(ConfigError::invalid("qa_parallelism", "must be at least 1"));
        }
        if self.video_workers == 0 {
            return Err(ConfigError::invalid("video_workers", "must be at least 1"));
        }
        if crate::frame::DecoderCommand::parse(&self.decoder).is_none() {
            return Err(ConfigError::invalid("decoder", "command template is empty"));
        }
        Ok(())
    }

    /// The grid actually drawn, or `None` in global mode.
    pub fn effective_grid(&self) -> Option<GridSpec> {
        self.mode.uses_grid().then_some(self.grid)
    }

    pub fn vlm_model_id(&self) -> &str {
        if self.mock {
            MOCK_VLM_ID
        } else {
            &self.vlm.model
        }
    }

    pub fn llm_model_id(&self) -> &str {
        if self.mock {
            MOCK_LLM_ID
        } else {
            &self.llm.model
        }
    }

    /// Copy safe to write into output artifacts: API keys are dropped.
    pub fn redacted(&self) -> Self {
        let mut c = self.clone();
        c.vlm.api_key = None;
        c.llm.api_key = None;
        c
    }

    /// Digest of everything that can change a transcript for a given video.
    pub fn transcription_fingerprint(&self) -> String {
        let local = self.effective_grid().map(|g| prompting::local_prompt(&g));
        let doc = serde_json::json!({
            "mode": self.mode,
            "grid": self.effective_grid(),
            "fps": self.fps,
            "vlm_model": self.vlm_model_id(),
            "vlm_decoding": self.vlm_decoding,
            "global_prompt": self.mode.uses_global().then(prompting::global_prompt),
            "local_prompt": local,
        });
        short_digest(&doc)
    }

    /// Digest of the full answering configuration; distinct per transcript mode.
    pub fn fingerprint(&self) -> String {
        let qa = prompting::qa_prompt("{transcript}", "{question}", &["{a}".into(), "{b}".into()])
            .expect("placeholder prompt is valid");
        let doc = serde_json::json!({
            "transcription": self.transcription_fingerprint(),
            "llm_model": self.llm_model_id(),
            "llm_decoding": self.llm_decoding,
            "qa_prompt": qa,
        });
        short_digest(&doc)
    }
}

pub(crate) fn short_digest(value: &serde_json::Value) -> String {
    let bytes = serde_json::to_vec(value).expect("json value serializes");
    hex::encode(&Sha256::digest(&bytes)[..8])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn env(pairs: &[(&str, &str)]) -> impl Fn(&str) -> Option<String> {
        let map: HashMap<String, String> = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        move |k| map.get(k).cloned()
    }

    #[test]
    fn defaults_are_valid() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!(c.mode, Mode::LocalGlobal);
        assert_eq!(c.effective_grid(), Some(GridSpec::default()));
        assert_eq!(c.vlm.timeout_s, 120.0);
        assert_eq!(c.vlm.retries, 3);
        assert_eq!(c.parallelism, 4);
    }

    #[test]
    fn env_overrides_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "mode = \"local\"\nmock = true\n[grid]\nrows = 3\ncols = 3\n").unwrap();
        let mut c = RunConfig::from_file(&path).unwrap();
        assert_eq!((c.mode, c.grid.rows, c.mock), (Mode::Local, 3, true));
        c.apply_env(env(&[("LOGAT_MODE", "global"), ("LOGAT_GRID", "2x2"), ("LOGAT_FPS", "2")]))
            .unwrap();
        assert_eq!(c.mode, Mode::Global);
        assert_eq!(c.grid.cols, 2);
        assert_eq!(c.fps, Fps::integer(2).unwrap());
        assert_eq!(c.effective_grid(), None);
    }

    #[test]
    fn json_file_and_unknown_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"fps": "1/2", "parallelism": 8}"#).unwrap();
        let c = RunConfig::from_file(&path).unwrap();
        assert_eq!(c.parallelism, 8);
        std::fs::write(&path, r#"{"colour": 1}"#).unwrap();
        assert!(matches!(RunConfig::from_file(&path), Err(ConfigError::Parse { .. })));
    }

    #[test]
    fn bad_env_names_field() {
        let mut c = RunConfig::default();
        let err = c.apply_env(env(&[("LOGAT_GRID", "0x3")])).unwrap_err();
        assert!(err.to_string().contains("grid"));
        let err = c.apply_env(env(&[("LOGAT_MOCK", "perhaps")])).unwrap_err();
        assert!(err.to_string().contains("mock"));
    }

    #[test]
    fn invalid_grid_only_matters_when_used() {
        let mut c = RunConfig::default();
        c.grid.rows = 0;
        assert!(matches!(c.validate(), Err(ConfigError::Invalid { field, .. }) if field == "grid.rows"));
        c.mode = Mode::Global;
        c.validate().unwrap();
    }

    #[test]
    fn fingerprints_differ_per_mode_and_are_stable() {
        let mut prints = std::collections::HashSet::new();
        for mode in Mode::ALL {
            let c = RunConfig { mode, mock: true, ..RunConfig::default() };
            assert_eq!(c.fingerprint(), c.clone().fingerprint());
            prints.insert(c.fingerprint());
        }
        assert_eq!(prints.len(), 3);
        let c = RunConfig::default();
        let g = RunConfig { grid: GridSpec::new(3, 3).unwrap(), ..c.clone() };
        assert_ne!(c.fingerprint(), g.fingerprint());
        // grid does not matter in global mode
        let a = RunConfig { mode: Mode::Global, ..c };
        let b = RunConfig { mode: Mode::Global, ..g };
        assert_eq!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn redaction_drops_keys() {
        let mut c = RunConfig::default();
        c.apply_env(env(&[("LOGAT_API_KEY", "secret")])).unwrap();
        assert_eq!(c.llm.api_key.as_deref(), Some("secret"));
        let text = serde_json::to_string(&c.redacted()).unwrap();
        assert!(!text.contains("secret"));
    }
}
