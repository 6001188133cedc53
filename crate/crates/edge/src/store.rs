use std::io;
use std::path::{Path, PathBuf};

use logat_core::transcript::FILE_SUFFIX;
use logat_core::{Transcript, TranscriptManifest};

/// Transcripts on disk, one `<transcript_id>.glt.jsonl` file each. Writes go
/// through a temp file and a rename, so readers never see partial files.
#[derive(Debug, Clone)]
pub struct TranscriptStore {
    dir: PathBuf,
}

/// Transcript ids are lowercase hex SHA-256 digests.
pub fn is_transcript_id(id: &str) -> bool {
    id.len() == 64 && id.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

impl TranscriptStore {
    pub fn open(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}{FILE_SUFFIX}"))
    }

    pub fn put(&self, transcript: &Transcript) -> io::Result<TranscriptManifest> {
        let manifest = TranscriptManifest::of(transcript);
        let path = self.path(&manifest.transcript_id);
        transcript.save(&path).map_err(io::Error::other)?;
        Ok(manifest)
    }

    /// The stored `.glt.jsonl` body, or `None` for an unknown id.
    pub fn get(&self, id: &str) -> io::Result<Option<String>> {
        if !is_transcript_id(id) {
            return Ok(None);
        }
        match std::fs::read_to_string(self.path(id)) {
            Ok(body) => Ok(Some(body)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }
}
