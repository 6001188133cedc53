//! Edge/cloud boundary: the privacy gate every outbound payload passes
//! through, the transcript manifest, and the JSON bodies both services speak.
//!
//! The gate is heuristic. It flags:
//!
//! - `data-uri`: a `data:image/...;base64,` URI whose payload decodes to
//!   bytes starting with an image signature, or is at least
//!   [`MIN_DATA_URI_PAYLOAD`] base64 characters long (truncated or unknown
//!   formats);
//! - `magic-bytes`: PNG, JPEG, GIF, BMP or WebP signatures anywhere in the raw
//!   body, in any JSON string (read as Latin-1, so `\u0089PNG` escapes count),
//!   or in a JSON array of byte-valued integers;
//! - `base64-image`: a run of 12 or more base64 characters that, at any of the
//!   four character alignments and in either the standard or URL-safe
//!   alphabet, decodes to bytes containing one of those signatures;
//! - `image-field`: an object key named `image`, `image_url`, `pixels` or
//!   `frame_data` in a JSON or JSON-lines body.
//!
//! Known false positives: text that literally spells `GIF87a`/`GIF89a`, or a
//! well-formed image data URI quoted inside a caption. Text that merely
//! mentions `data:image/png;base64,` without a payload passes.

use std::collections::BTreeSet;
use std::sync::LazyLock;

use base64::alphabet;
use base64::engine::general_purpose::{GeneralPurpose, GeneralPurposeConfig};
use base64::engine::DecodePaddingMode;
use base64::Engine as _;
use regex::bytes::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::Mode;
use crate::frame::Fps;
use crate::grid::GridSpec;
use crate::transcript::Transcript;

pub const RULESET_VERSION: &str = "privacy-gate/1";
pub const MIN_DATA_URI_PAYLOAD: usize = 64;
const MIN_BASE64_RUN: usize = 12;
const FORBIDDEN_KEYS: [&str; 4] = ["image", "image_url", "pixels", "frame_data"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rule {
    #[serde(rename = "data-uri")]
    DataUri,
    #[serde(rename = "magic-bytes")]
    MagicBytes,
    #[serde(rename = "base64-image")]
    Base64Image,
    #[serde(rename = "image-field")]
    ImageField,
}

impl Rule {
    pub fn id(self) -> &'static str {
        match self {
            Rule::DataUri => "data-uri",
            Rule::MagicBytes => "magic-bytes",
            Rule::Base64Image => "base64-image",
            Rule::ImageField => "image-field",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Violation {
    /// Where in the payload: a JSON path such as `$.entries[0]`, prefixed with
    /// `line N:` for JSON lines, or `body` for the raw bytes.
    pub path: String,
    pub rule_id: Rule,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrivacyVerdict {
    pub ok: bool,
    pub violations: Vec<Violation>,
    pub ruleset: String,
}

impl PrivacyVerdict {
    pub fn rules(&self) -> BTreeSet<Rule> {
        self.violations.iter().map(|v| v.rule_id).collect()
    }
}

/// Known image file signatures, as a searchable pattern.
static MAGIC_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?-u)\x89PNG\r\n\x1a\n|\xff\xd8\xff|GIF8[79]a|BM[\x00-\xff]{4}\x00\x00\x00\x00|RIFF[\x00-\xff]{4}WEBP",
    )
    .unwrap()
});
static DATA_URI_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)data:image/[a-z0-9.+-]+(?:;[a-z0-9.=-]+)*;base64,([A-Za-z0-9+/_-]*)").unwrap()
});
static BASE64_RUN_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[A-Za-z0-9+/_-]{12,}").unwrap());

const LENIENT: GeneralPurposeConfig = GeneralPurposeConfig::new()
    .with_decode_padding_mode(DecodePaddingMode::Indifferent)
    .with_decode_allow_trailing_bits(true);
const STD: GeneralPurpose = GeneralPurpose::new(&alphabet::STANDARD, LENIENT);
const URL: GeneralPurpose = GeneralPurpose::new(&alphabet::URL_SAFE, LENIENT);

pub fn has_image_magic(bytes: &[u8]) -> bool {
    MAGIC_RE.is_match(bytes)
}

/// Decodes `run` at every alignment and alphabet; true if any output holds an
/// image signature.
fn base64_hides_image(run: &[u8]) -> bool {
    (0..4).any(|skip| {
        let Some(tail) = run.get(skip..) else { return false };
        let usable = tail.len() - tail.len() % 4;
        let chunk = &tail[..usable];
        [STD, URL]
            .iter()
            .filter_map(|engine| engine.decode(chunk).ok())
            .any(|bytes| has_image_magic(&bytes))
    })
}

fn image_payload(payload: &[u8]) -> bool {
    let trimmed = &payload[..payload.len() - payload.len() % 4];
    [STD, URL].iter().filter_map(|e| e.decode(trimmed).ok()).any(|bytes| {
        trimmed.len() >= MIN_DATA_URI_PAYLOAD || MAGIC_RE.find(&bytes).is_some_and(|m| m.start() == 0)
    })
}

fn scan_text(bytes: &[u8], path: &str, out: &mut BTreeSet<Violation>) {
    let mut push = |rule_id| {
        out.insert(Violation {
            path: path.to_string(),
            rule_id,
        });
    };
    for caps in DATA_URI_RE.captures_iter(bytes) {
        if image_payload(&caps[1]) {
            push(Rule::DataUri);
        }
    }
    if BASE64_RUN_RE
        .find_iter(bytes)
        .any(|m| m.len() >= MIN_BASE64_RUN && base64_hides_image(m.as_bytes()))
    {
        push(Rule::Base64Image);
    }
}

fn latin1(s: &str) -> Vec<u8> {
    s.chars().filter_map(|c| u8::try_from(u32::from(c)).ok()).collect()
}

fn walk(value: &Value, path: &mut String, out: &mut BTreeSet<Violation>) {
    match value {
        Value::String(s) => {
            scan_text(s.as_bytes(), path, out);
            if has_image_magic(&latin1(s)) {
                out.insert(Violation {
                    path: path.clone(),
                    rule_id: Rule::MagicBytes,
                });
            }
        }
        Value::Array(items) => {
            let bytes: Option<Vec<u8>> = items
                .iter()
                .map(|v| v.as_u64().and_then(|n| u8::try_from(n).ok()))
                .collect();
            if let Some(bytes) = bytes.filter(|b| b.len() >= 3) {
                if has_image_magic(&bytes) {
                    out.insert(Violation {
                        path: path.clone(),
                        rule_id: Rule::MagicBytes,
                    });
                }
            }
            for (i, item) in items.iter().enumerate() {
                let len = path.len();
                path.push_str(&format!("[{i}]"));
                walk(item, path, out);
                path.truncate(len);
            }
        }
        Value::Object(map) => {
            for (key, item) in map {
                let len = path.len();
                path.push('.');
                path.push_str(key);
                if FORBIDDEN_KEYS.iter().any(|k| key.eq_ignore_ascii_case(k)) {
                    out.insert(Violation {
                        path: path.clone(),
                        rule_id: Rule::ImageField,
                    });
                }
                walk(item, path, out);
                path.truncate(len);
            }
        }
        Value::Null | Value::Bool(_) | Value::Number(_) => {}
    }
}

fn parse_json_lines(body: &[u8]) -> Option<Vec<(usize, Value)>> {
    let text = std::str::from_utf8(body).ok()?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).ok().map(|v| (i + 1, v)))
        .collect()
}

/// Checks an outbound payload. Never fails; a payload that is not valid JSON
/// is scanned as opaque bytes.
pub fn privacy_gate(body: &[u8], content_type: &str) -> PrivacyVerdict {
    let mut found = BTreeSet::new();
    if has_image_magic(body) {
        found.insert(Violation {
            path: "body".into(),
            rule_id: Rule::MagicBytes,
        });
    }
    let ct = content_type.to_ascii_lowercase();
    let lines_first = ct.contains("ndjson") || ct.contains("jsonl") || ct.contains("json-seq");
    let whole = || serde_json::from_slice::<Value>(body).ok().map(|v| vec![(0, v)]);
    let structured = if lines_first {
        parse_json_lines(body).or_else(whole)
    } else {
        whole().or_else(|| parse_json_lines(body))
    };
    match structured {
        Some(docs) if !docs.is_empty() => {
            for (line, doc) in docs {
                let mut path = if line == 0 { "$".to_string() } else { format!("line {line}: $") };
                walk(&doc, &mut path, &mut found);
            }
        }
        _ => scan_text(body, "body", &mut found),
    }
    let violations: Vec<Violation> = found.into_iter().collect();
    PrivacyVerdict {
        ok: violations.is_empty(),
        violations,
        ruleset: RULESET_VERSION.to_string(),
    }
}

/// What leaves the edge about a stored transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptManifest {
    /// SHA-256 of the canonical `.glt.jsonl` serialization.
    pub transcript_id: String,
    pub source_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<String>,
    pub entry_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    pub byte_size: u64,
}

impl TranscriptManifest {
    pub fn of(transcript: &Transcript) -> Self {
        Self {
            transcript_id: transcript.digest(),
            source_id: transcript.source_id.clone(),
            created_at: transcript.provenance.created_at.clone(),
            entry_count: transcript.len(),
            grid: transcript.grid,
            byte_size: transcript.to_jsonl().len() as u64,
        }
    }
}

/// Per-request overrides for `POST /v1/transcribe`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TranscribeOptions {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fps: Option<Fps>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscribeRequest {
    pub video_id: String,
    #[serde(default)]
    pub config: TranscribeOptions,
}

/// `POST /v1/ask`. Exactly one of `transcript_id` (pulled from the edge) or
/// `transcript` (an inline `.glt.jsonl` body) must be set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AskRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_id: Option<String>,
    pub question: String,
    pub options: Vec<String>,
}

/// Error body for every non-2xx response from either service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub code: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Violation>,
}

impl ErrorBody {
    pub fn new(code: &str, error: impl Into<String>) -> Self {
        Self {
            error: error.into(),
            code: code.to_string(),
            violations: Vec::new(),
        }
    }
}

/// Hex SHA-256 of a payload, for logs that must not contain the payload.
pub fn payload_digest(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}

/// Video ids are single path components made of word characters, dots and
/// dashes, and never start with a dot.
pub fn is_safe_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

#[cfg(test)]
mod tests {
    use super::*;

    // 1x1 transparent PNG
    const PNG_1X1_B64: &str =
        "iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAYAAAAfFcSJAAAADUlEQVR42mNkYPhfDwAChwGA60e6kgAAAABJRU5ErkJggg==";

    fn rules(body: &[u8], ct: &str) -> BTreeSet<Rule> {
        privacy_gate(body, ct).rules()
    }

    #[test]
    fn transcript_jsonl_passes() {
        let body = concat!(
            r#"{"schema_version":1,"source_id":"v00","fps":1,"grid":{"rows":2,"cols":3,"line_color":[0,0,0],"line_thickness_px":2},"entry_count":1,"provenance":{"created_at":"2026-10-16T09:30:00Z"}}"#,
            "\n",
            r#"{"frame_index":0,"timestamp_s":0.0,"global_caption":"A dog runs across the lawn.","local_caption":"Cell1(left, lower): grass"}"#,
            "\n"
        );
        let v = privacy_gate(body.as_bytes(), "application/x-ndjson");
        assert!(v.ok, "{v:?}");
        assert_eq!(v.ruleset, RULESET_VERSION);
    }

    #[test]
    fn data_uri_is_flagged() {
        let body = format!(r#"{{"caption":"see data:image/png;base64,{PNG_1X1_B64}"}}"#);
        let r = rules(body.as_bytes(), "application/json");
        assert!(r.contains(&Rule::DataUri));
        let v = privacy_gate(body.as_bytes(), "application/json");
        assert!(v.violations.iter().any(|x| x.path == "$.caption"));
    }

    #[test]
    fn base64_png_is_flagged_at_any_offset() {
        assert!(rules(PNG_1X1_B64.as_bytes(), "text/plain").contains(&Rule::Base64Image));
        for prefix in ["x", "xy", "xyz", "word"] {
            let body = format!("{prefix}{PNG_1X1_B64}");
            assert!(rules(body.as_bytes(), "text/plain").contains(&Rule::Base64Image), "{prefix}");
        }
        let url_safe = PNG_1X1_B64.replace('+', "-").replace('/', "_");
        assert!(rules(url_safe.as_bytes(), "text/plain").contains(&Rule::Base64Image));
    }

    #[test]
    fn raw_and_escaped_magic() {
        let mut raw = b"{\"a\":1}".to_vec();
        raw.extend_from_slice(b"\x89PNG\r\n\x1a\n");
        assert!(rules(&raw, "application/json").contains(&Rule::MagicBytes));
        let escaped = br#"{"caption":"\u0089PNG\r\n\u001a\n...."}"#;
        assert!(rules(escaped, "application/json").contains(&Rule::MagicBytes));
        let array = br#"{"blob":[255,216,255,224,0,16]}"#;
        assert!(rules(array, "application/json").contains(&Rule::MagicBytes));
        assert!(rules(b"\xff\xd8\xff\xe0 jfif", "application/octet-stream").contains(&Rule::MagicBytes));
        assert!(rules(b"RIFF\x10\x00\x00\x00WEBPVP8 ", "").contains(&Rule::MagicBytes));
        assert!(rules(b"BM\x3a\x00\x00\x00\x00\x00\x00\x00", "").contains(&Rule::MagicBytes));
    }

    #[test]
    fn forbidden_keys_anywhere() {
        let body = br#"{"entries":[{"frame_data":"abc"}],"Pixels":[1,2]}"#;
        let v = privacy_gate(body, "application/json");
        let paths: Vec<_> = v.violations.iter().filter(|x| x.rule_id == Rule::ImageField).map(|x| x.path.as_str()).collect();
        assert_eq!(paths, ["$.Pixels", "$.entries[0].frame_data"]);
    }

    #[test]
    fn mentions_without_payload_pass() {
        let body = br#"{"caption":"a slide that reads data:image/png;base64, and an image of a cat"}"#;
        assert!(privacy_gate(body, "application/json").ok);
        let body = br#"{"caption":"data:image/png;base64,notbase64!!"}"#;
        assert!(privacy_gate(body, "application/json").ok);
        // short but a real signature
        let body = br#"{"caption":"data:image/gif;base64,R0lGODlhAQABAAAAACw="}"#;
        assert!(rules(body, "application/json").contains(&Rule::DataUri));
    }

    #[test]
    fn manifest_matches_digest() {
        let meta = crate::frame::SequenceMeta::uniform("v", Fps::ONE, 2);
        let t = Transcript::global_only(&meta, vec!["a".into(), "b".into()]).unwrap();
        let m = TranscriptManifest::of(&t);
        assert_eq!(m.transcript_id, t.digest());
        assert_eq!(m.byte_size, t.to_jsonl().len() as u64);
        assert!(privacy_gate(serde_json::to_string(&m).unwrap().as_bytes(), "application/json").ok);
    }

    #[test]
    fn safe_ids() {
        assert!(is_safe_id("v01-clip_2.mp4"));
        for bad in ["", "..", "../x", "a/b", ".hidden", "a b"] {
            assert!(!is_safe_id(bad), "{bad}");
        }
    }
}
