//! Per-frame transcripts: global captions, local (grid) captions, or both,
//! annotated with frame numbers and timestamps.
//!
//! On disk a transcript is JSON Lines (`.glt.jsonl`): a header record followed
//! by one record per frame. The schema has no field that can hold pixel data,
//! and unknown fields are rejected on load.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::frame::{Fps, FrameStamp, SequenceMeta};
use crate::grid::GridSpec;
use crate::inference::DecodingConfig;

pub const SCHEMA_VERSION: u32 = 1;
pub const FILE_SUFFIX: &str = ".glt.jsonl";

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("caption lists differ in length: {globals} global, {locals} local, {frames} frames")]
    LengthMismatch {
        globals: usize,
        locals: usize,
        frames: usize,
    },
    #[error("transcript is empty")]
    EmptyTranscript,
    #[error("unsupported transcript schema version {found} (expected {SCHEMA_VERSION})")]
    SchemaVersionMismatch { found: u64 },
    #[error("corrupt transcript record at line {line}: {reason}")]
    CorruptRecord { line: usize, reason: String },
    #[error("caption for frame {0} was never delivered")]
    Incomplete(u32),
    #[error("frame {0} is not part of this transcript")]
    UnknownFrame(u32),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptEntry {
    pub frame_index: u32,
    pub timestamp_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub global_caption: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_caption: Option<String>,
}

/// Which models and settings produced a transcript, and when.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vlm_model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vlm_decoding: Option<DecodingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_version: Option<String>,
}

impl Provenance {
    pub fn now(vlm_model: &str, decoding: &DecodingConfig) -> Self {
        Self {
            vlm_model: Some(vlm_model.to_string()),
            vlm_decoding: Some(decoding.clone()),
            created_at: Some(chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)),
            tool_version: Some(env!("CARGO_PKG_VERSION").to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    schema_version: u64,
    source_id: String,
    fps: Fps,
    #[serde(default)]
    grid: Option<GridSpec>,
    entry_count: usize,
    #[serde(default)]
    provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub source_id: String,
    pub fps: Fps,
    pub entries: Vec<TranscriptEntry>,
    pub grid: Option<GridSpec>,
    pub provenance: Provenance,
}

impl Transcript {
    fn from_parts(
        meta: &SequenceMeta,
        globals: Option<Vec<String>>,
        locals: Option<Vec<String>>,
        grid: Option<GridSpec>,
    ) -> Result<Self, TranscriptError> {
        let frames = meta.frames.len();
        let g_len = globals.as_ref().map_or(frames, Vec::len);
        let l_len = locals.as_ref().map_or(frames, Vec::len);
        if g_len != frames || l_len != frames {
            return Err(TranscriptError::LengthMismatch {
                globals: g_len,
                locals: l_len,
                frames,
            });
        }
        let mut globals = globals.map(Vec::into_iter);
        let mut locals = locals.map(Vec::into_iter);
        let entries = meta
            .frames
            .iter()
            .map(|stamp| TranscriptEntry {
                frame_index: stamp.index,
                timestamp_s: stamp.timestamp_s,
                global_caption: globals.as_mut().and_then(Iterator::next),
                local_caption: locals.as_mut().and_then(Iterator::next),
            })
            .collect();
        Ok(Self {
            source_id: meta.source_id.clone(),
            fps: meta.fps,
            entries,
            grid,
            provenance: Provenance::default(),
        })
    }

    /// Pairs the i-th global and local caption with the i-th frame.
    pub fn ensemble(
        meta: &SequenceMeta,
        globals: Vec<String>,
        locals: Vec<String>,
        grid: GridSpec,
    ) -> Result<Self, TranscriptError> {
        Self::from_parts(meta, Some(globals), Some(locals), Some(grid))
    }

    pub fn global_only(meta: &SequenceMeta, globals: Vec<String>) -> Result<Self, TranscriptError> {
        Self::from_parts(meta, Some(globals), None, None)
    }

    pub fn local_only(
        meta: &SequenceMeta,
        locals: Vec<String>,
        grid: GridSpec,
    ) -> Result<Self, TranscriptError> {
        Self::from_parts(meta, None, Some(locals), Some(grid))
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Text that fills the transcript slot of the question-answering prompt.
    pub fn render_text(&self) -> Result<String, TranscriptError> {
        if self.entries.is_empty() {
            return Err(TranscriptError::EmptyTranscript);
        }
        let blocks: Vec<String> = self
            .entries
            .iter()
            .map(|e| {
                let mut block = format!(
                    "Frame {} (t={}s):",
                    e.frame_index,
                    format_timestamp(e.timestamp_s, self.fps)
                );
                for caption in [&e.global_caption, &e.local_caption].into_iter().flatten() {
                    block.push('\n');
                    block.push_str(caption);
                }
                block
            })
            .collect();
        Ok(blocks.join("\n\n"))
    }

    fn header(&self) -> Header {
        Header {
            schema_version: u64::from(SCHEMA_VERSION),
            source_id: self.source_id.clone(),
            fps: self.fps,
            grid: self.grid,
            entry_count: self.entries.len(),
            provenance: self.provenance.clone(),
        }
    }

    /// Canonical `.glt.jsonl` bytes.
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header()).expect("header serializes");
        out.push('\n');
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("entry serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, TranscriptError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let corrupt = |line: usize, reason: String| TranscriptError::CorruptRecord {
            line: line + 1,
            reason,
        };
        let (n, first) = lines.next().ok_or(TranscriptError::CorruptRecord {
            line: 1,
            reason: "missing header".into(),
        })?;
        let raw: serde_json::Value =
            serde_json::from_str(first).map_err(|e| corrupt(n, e.to_string()))?;
        match raw.get("schema_version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == u64::from(SCHEMA_VERSION) => {}
            Some(v) => return Err(TranscriptError::SchemaVersionMismatch { found: v }),
            None => return Err(corrupt(n, "header has no schema_version".into())),
        }
        let header: Header = serde_json::from_value(raw).map_err(|e| corrupt(n, e.to_string()))?;
        let mut entries = Vec::with_capacity(header.entry_count);
        for (n, line) in lines {
            let entry: TranscriptEntry =
                serde_json::from_str(line).map_err(|e| corrupt(n, e.to_string()))?;
            if entry.frame_index as usize != entries.len() {
                return Err(corrupt(
                    n,
                    format!("expected frame {}, found {}", entries.len(), entry.frame_index),
                ));
            }
            if entry.global_caption.is_none() && entry.local_caption.is_none() {
                return Err(corrupt(n, "entry has no caption".into()));
            }
            if entry.local_caption.is_some() && header.grid.is_none() {
                return Err(corrupt(n, "local caption without a grid in the header".into()));
            }
            entries.push(entry);
        }
        if entries.len() != header.entry_count {
            return Err(TranscriptError::CorruptRecord {
                line: text.lines().count() + 1,
                reason: format!(
                    "header declares {} entries, found {}",
                    header.entry_count,
                    entries.len()
                ),
            });
        }
        Ok(Self {
            source_id: header.source_id,
            fps: header.fps,
            entries,
            grid: header.grid,
            provenance: header.provenance,
        })
    }

    /// Writes atomically: a temporary file in the same directory is renamed into place.
    pub fn save(&self, path: &Path) -> Result<(), TranscriptError> {
        write_atomic(path, self.to_jsonl().as_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, TranscriptError> {
        Self::from_jsonl(&fs::read_to_string(path)?)
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_jsonl().as_bytes()))
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Whole seconds when the rate is one frame per second, otherwise up to three
/// decimals with trailing zeros dropped.
pub fn format_timestamp(seconds: f64, fps: Fps) -> String {
    if fps.whole_seconds() {
        return format!("{}", seconds.round() as u64);
    }
    let s = format!("{seconds:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Collects captions that complete in any order and assembles the transcript
/// once every frame has the captions it needs.
#[derive(Debug)]
pub struct TranscriptBuilder {
    meta: SequenceMeta,
    grid: Option<GridSpec>,
    want_global: bool,
    want_local: bool,
    globals: BTreeMap<u32, String>,
    locals: BTreeMap<u32, String>,
}

impl TranscriptBuilder {
    /// `grid` must be set when local captions are wanted.
    pub fn new(meta: SequenceMeta, want_global: bool, grid: Option<GridSpec>) -> Self {
        Self {
            meta,
            want_local: grid.is_some(),
            grid,
            want_global,
            globals: BTreeMap::new(),
            locals: BTreeMap::new(),
        }
    }

    fn check(&self, index: u32) -> Result<(), TranscriptError> {
        self.meta
            .frames
            .iter()
            .any(|f| f.index == index)
            .then_some(())
            .ok_or(TranscriptError::UnknownFrame(index))
    }

    pub fn insert_global(&mut self, index: u32, caption: String) -> Result<(), TranscriptError> {
        self.check(index)?;
        self.globals.insert(index, caption);
        Ok(())
    }

    pub fn insert_local(&mut self, index: u32, caption: String) -> Result<(), TranscriptError> {
        self.check(index)?;
        self.locals.insert(index, caption);
        Ok(())
    }

    pub fn finish(mut self) -> Result<Transcript, TranscriptError> {
        if self.meta.is_empty() {
            return Err(TranscriptError::EmptyTranscript);
        }
        let take = |map: &mut BTreeMap<u32, String>| -> Result<Vec<String>, TranscriptError> {
            self.meta
                .frames
                .iter()
                .map(|FrameStamp { index, .. }| map.remove(index).ok_or(TranscriptError::Incomplete(*index)))
                .collect()
        };
        let globals = if self.want_global {
            Some(take(&mut self.globals)?)
        } else {
            None
        };
        let locals = if self.want_local {
            Some(take(&mut self.locals)?)
        } else {
            None
        };
        Transcript::from_parts(&self.meta, globals, locals, self.grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(n: u32) -> SequenceMeta {
        SequenceMeta::uniform("vid", Fps::ONE, n)
    }

    fn strings(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn ensemble_pairs_elementwise() {
        let t = Transcript::ensemble(&meta(2), strings("g", 2), strings("l", 2), GridSpec::default()).unwrap();
        let got: Vec<_> = t
            .entries
            .iter()
            .map(|e| (e.frame_index, e.global_caption.clone().unwrap(), e.local_caption.clone().unwrap()))
            .collect();
        assert_eq!(got, vec![(0, "g0".into(), "l0".into()), (1, "g1".into(), "l1".into())]);
    }

    #[test]
    fn ensemble_rejects_length_mismatch() {
        let err = Transcript::ensemble(&meta(2), strings("g", 1), strings("l", 2), GridSpec::default()).unwrap_err();
        assert!(matches!(err, TranscriptError::LengthMismatch { globals: 1, locals: 2, frames: 2 }));
    }

    #[test]
    fn global_only_has_no_local_side() {
        let t = Transcript::global_only(&meta(3), strings("g", 3)).unwrap();
        assert!(t.entries.iter().all(|e| e.local_caption.is_none()));
        assert!(t.grid.is_none());
    }

    #[test]
    fn render_single_entry() {
        let t = Transcript::ensemble(&meta(1), vec!["a dog".into()], vec!["Cell1: grass".into()], GridSpec::default())
            .unwrap();
        assert_eq!(t.render_text().unwrap(), "Frame 0 (t=0s):\na dog\nCell1: grass");
    }

    #[test]
    fn render_empty_fails() {
        let t = Transcript::global_only(&meta(0), vec![]).unwrap();
        assert!(matches!(t.render_text(), Err(TranscriptError::EmptyTranscript)));
    }

    #[test]
    fn timestamps_at_two_fps() {
        let m = SequenceMeta::uniform("v", Fps::integer(2).unwrap(), 3);
        let t = Transcript::global_only(&m, strings("g", 3)).unwrap();
        assert_eq!(
            t.render_text().unwrap(),
            "Frame 0 (t=0s):\ng0\n\nFrame 1 (t=0.5s):\ng1\n\nFrame 2 (t=1s):\ng2"
        );
        assert_eq!(format_timestamp(1.0 / 3.0, Fps::integer(3).unwrap()), "0.333");
    }

    #[test]
    fn jsonl_round_trip() {
        let t = Transcript::ensemble(&meta(3), strings("g", 3), strings("l", 3), GridSpec::default())
            .unwrap()
            .with_provenance(Provenance::now("mock-vlm", &DecodingConfig::vlm_default()));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.glt.jsonl");
        t.save(&path).unwrap();
        let back = Transcript::load(&path).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.render_text().unwrap(), t.render_text().unwrap());
        assert_eq!(back.digest(), t.digest());
    }

    #[test]
    fn unknown_schema_version() {
        let t = Transcript::global_only(&meta(1), strings("g", 1)).unwrap();
        let text = t.to_jsonl().replacen("\"schema_version\":1", "\"schema_version\":99", 1);
        assert!(matches!(
            Transcript::from_jsonl(&text),
            Err(TranscriptError::SchemaVersionMismatch { found: 99 })
        ));
    }

    #[test]
    fn truncation_is_corrupt() {
        let t = Transcript::global_only(&meta(3), strings("g", 3)).unwrap();
        let text = t.to_jsonl();
        let cut_mid = &text[..text.len() - 10];
        assert!(matches!(Transcript::from_jsonl(cut_mid), Err(TranscriptError::CorruptRecord { .. })));
        let lines: Vec<&str> = text.lines().collect();
        let cut_line = lines[..3].join("\n");
        assert!(matches!(Transcript::from_jsonl(&cut_line), Err(TranscriptError::CorruptRecord { .. })));
        assert!(matches!(Transcript::from_jsonl(""), Err(TranscriptError::CorruptRecord { line: 1, .. })));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let t = Transcript::global_only(&meta(1), strings("g", 1)).unwrap();
        let text = t.to_jsonl().replace("\"global_caption\"", "\"pixels\":[1,2,3],\"global_caption\"");
        assert!(matches!(Transcript::from_jsonl(&text), Err(TranscriptError::CorruptRecord { line: 2, .. })));
    }

    #[test]
    fn builder_accepts_out_of_order_completions() {
        let mut b = TranscriptBuilder::new(meta(3), true, Some(GridSpec::default()));
        for i in [2, 0, 1] {
            b.insert_local(i, format!("l{i}")).unwrap();
            b.insert_global(i, format!("g{i}")).unwrap();
        }
        assert!(matches!(b.insert_global(7, "x".into()), Err(TranscriptError::UnknownFrame(7))));
        let t = b.finish().unwrap();
        let expected = Transcript::ensemble(&meta(3), strings("g", 3), strings("l", 3), GridSpec::default()).unwrap();
        assert_eq!(t, expected);
    }

    #[test]
    fn builder_reports_missing_frames() {
        let mut b = TranscriptBuilder::new(meta(2), true, None);
        b.insert_global(1, "g1".into()).unwrap();
        assert!(matches!(b.finish(), Err(TranscriptError::Incomplete(0))));
    }
}
