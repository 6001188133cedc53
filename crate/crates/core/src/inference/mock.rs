//! Deterministic stand-ins for the vision and language models.
//!
//! Mock VLM output:
//! - plain-frame (model-default system) prompt: `global: frame <index> <hash8>`
//! - grid prompt: one `CellK(<col>, <row>): token <hash8 + K>` line per cell
//!   label found in the system prompt
//!
//! `hash8` is the high 32 bits of the FNV-1a 64-bit digest of the frame's raw
//! RGB bytes, printed as 8 lowercase hex digits; `hash8 + K` wraps at 2^32.
//!
//! A frame may also carry a text marker planted in its top pixel row (see
//! [`plant_marker`]); the mock VLM then appends a `marker: <text>` line.
//!
//! Mock LLM: answers `answer [L] answer` when the prompt contains a marker
//! `GOLD[<key>]=L` whose key appears as a token in the question (user) text,
//! otherwise the first unkeyed `GOLD=L`; otherwise a fixed sentence with no
//! option letter.

use std::sync::LazyLock;

use async_trait::async_trait;
use regex::Regex;

#[cfg(feature = "media")]
use super::VisionModel;
use super::{DecodingConfig, InferenceError, TextModel};
#[cfg(feature = "media")]
use crate::media::FrameRecord;
use crate::prompting::PromptPair;

pub const MOCK_VLM_ID: &str = "mock-vlm";
pub const MOCK_LLM_ID: &str = "mock-llm";
pub const DISTRACTOR: &str = "I am unable to determine the answer from the transcript.";

const MARKER_MAGIC: &[u8; 4] = b"GLT1";

static CELL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"Cell(\d+)\(([^,()]+), ([^,()]+)\)").unwrap());
static KEYED_GOLD_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"GOLD\[([A-Za-z0-9_.-]+)\]=([A-E])").unwrap());
static GOLD_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"GOLD=([A-E])").unwrap());

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

/// First 8 hex digits of the 64-bit digest, as a number.
pub fn hash8(bytes: &[u8]) -> u32 {
    (fnv1a64(bytes) >> 32) as u32
}

/// Writes `text` into the leftmost pixels of row 0 as `GLT1`, a length byte,
/// then the UTF-8 bytes, packed three bytes per pixel.
///
/// Returns `None` when the marker would not fit in the left quarter of the row
/// (minus two pixels), which keeps it clear of grid lines for grids of up to
/// four columns at the default line thickness.
pub fn marker_bytes(text: &str, width: u32) -> Option<Vec<u8>> {
    let payload = text.as_bytes();
    let len = u8::try_from(payload.len()).ok()?;
    let mut bytes = Vec::with_capacity(payload.len() + 5);
    bytes.extend_from_slice(MARKER_MAGIC);
    bytes.push(len);
    bytes.extend_from_slice(payload);
    let capacity = 3 * (width / 4).saturating_sub(2) as usize;
    (bytes.len() <= capacity).then_some(bytes)
}

/// Reads a marker from the start of a raw RGB buffer (row 0 comes first).
pub fn read_marker(raw: &[u8]) -> Option<String> {
    let rest = raw.strip_prefix(MARKER_MAGIC)?;
    let (&len, rest) = rest.split_first()?;
    let payload = rest.get(..usize::from(len))?;
    String::from_utf8(payload.to_vec()).ok()
}

#[cfg(feature = "media")]
pub fn plant_marker(img: &mut image::RgbImage, text: &str) -> bool {
    let Some(bytes) = marker_bytes(text, img.width()) else {
        return false;
    };
    img.as_mut()[..bytes.len()].copy_from_slice(&bytes);
    true
}

fn cell_lines(system: &str, hash: u32) -> Vec<String> {
    let mut seen = std::collections::BTreeSet::new();
    CELL_RE
        .captures_iter(system)
        .filter_map(|c| {
            let k: u32 = c[1].parse().ok()?;
            seen.insert(k).then(|| {
                format!("Cell{k}({}, {}): token {:08x}", &c[2], &c[3], hash.wrapping_add(k))
            })
        })
        .collect()
}

/// Caption text the mock VLM produces for a raw frame.
pub fn mock_caption(index: u32, raw: &[u8], prompts: &PromptPair) -> String {
    let hash = hash8(raw);
    let cells = prompts
        .system
        .as_text()
        .map(|s| cell_lines(s, hash))
        .unwrap_or_default();
    let mut out = if cells.is_empty() {
        format!("global: frame {index} {hash:08x}")
    } else {
        cells.join("\n")
    };
    if let Some(marker) = read_marker(raw) {
        out.push_str("\nmarker: ");
        out.push_str(&marker);
    }
    out
}

#[cfg(feature = "media")]
pub fn mock_vlm(frame: &FrameRecord, prompts: &PromptPair) -> String {
    mock_caption(frame.index, frame.raw(), prompts)
}

fn mentions_token(text: &str, key: &str) -> bool {
    text.split(|c: char| !(c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-')))
        .any(|tok| tok == key)
}

pub fn mock_llm(prompts: &PromptPair) -> String {
    let system = prompts.system.as_text().unwrap_or("");
    let haystack = format!("{system}\n{}", prompts.user);
    let keyed = KEYED_GOLD_RE
        .captures_iter(&haystack)
        .find(|c| mentions_token(&prompts.user, &c[1]))
        .map(|c| c[2].to_string());
    let letter = keyed.or_else(|| GOLD_RE.captures(&haystack).map(|c| c[1].to_string()));
    match letter {
        Some(l) => format!("answer [{l}] answer"),
        None => DISTRACTOR.to_string(),
    }
}

#[cfg(feature = "media")]
#[derive(Debug, Clone, Copy, Default)]
pub struct MockVlm;

#[cfg(feature = "media")]
#[async_trait]
impl VisionModel for MockVlm {
    fn model_id(&self) -> &str {
        MOCK_VLM_ID
    }

    async fn caption(
        &self,
        frame: &FrameRecord,
        prompts: &PromptPair,
        decoding: &DecodingConfig,
    ) -> Result<String, InferenceError> {
        super::ChatRequest::text(MOCK_VLM_ID, prompts, decoding).validate()?;
        Ok(mock_vlm(frame, prompts))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MockLlm;

#[async_trait]
impl TextModel for MockLlm {
    fn model_id(&self) -> &str {
        MOCK_LLM_ID
    }

    async fn complete(&self, prompts: &PromptPair, decoding: &DecodingConfig) -> Result<String, InferenceError> {
        super::ChatRequest::text(MOCK_LLM_ID, prompts, decoding).validate()?;
        Ok(mock_llm(prompts))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::prompting::{global_prompt, local_prompt, qa_prompt};

    #[test]
    fn fnv_reference_vectors() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
        assert_eq!(hash8(b"foobar"), 0x85944171);
    }

    #[test]
    fn global_caption_format() {
        let raw = [1u8, 2, 3];
        let h = hash8(&raw);
        assert_eq!(mock_caption(4, &raw, &global_prompt()), format!("global: frame 4 {h:08x}"));
    }

    #[test]
    fn local_caption_has_one_line_per_cell() {
        let raw = vec![7u8; 30];
        let h = hash8(&raw);
        let text = mock_caption(0, &raw, &local_prompt(&GridSpec::default()));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[0], format!("Cell1(left, lower): token {:08x}", h.wrapping_add(1)));
        assert_eq!(lines[5], format!("Cell6(right, upper): token {:08x}", h.wrapping_add(6)));
    }

    #[test]
    fn marker_round_trip_and_capacity() {
        let bytes = marker_bytes("GOLD=C", 64).unwrap();
        let mut raw = bytes.clone();
        raw.extend_from_slice(&[0; 10]);
        assert_eq!(read_marker(&raw).as_deref(), Some("GOLD=C"));
        assert!(marker_bytes("GOLD=C", 8).is_none());
        assert!(read_marker(&[0; 16]).is_none());
        let caption = mock_caption(1, &raw, &global_prompt());
        assert!(caption.ends_with("\nmarker: GOLD=C"));
    }

    #[test]
    fn llm_rules() {
        let opts: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let p = qa_prompt("frame text GOLD=C", "what?", &opts).unwrap();
        assert_eq!(mock_llm(&p), "answer [C] answer");
        let p = qa_prompt("marker: GOLD[q1]=A\nmarker: GOLD[q2]=B", "q2: which?", &opts).unwrap();
        assert_eq!(mock_llm(&p), "answer [B] answer");
        let p = qa_prompt("marker: GOLD[q12]=A", "q1: which?", &opts).unwrap();
        assert_eq!(mock_llm(&p), DISTRACTOR);
    }
}
