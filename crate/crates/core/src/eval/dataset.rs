use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompting::{MAX_OPTIONS, MIN_OPTIONS};
use crate::qa::QAItem;

const VIDEO_EXTENSIONS: [&str; 6] = ["mp4", "mkv", "avi", "webm", "mov", "m4v"];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema error at line {line}, column {column}, field `{field}`: {message}")]
    Schema {
        line: usize,
        column: usize,
        field: String,
        message: String,
    },
    #[error("duplicate question_id `{0}`")]
    DuplicateQuestionId(String),
    #[error("video `{video_id}` not found (looked for {looked_for})")]
    UnresolvedVideo { video_id: String, looked_for: String },
}

/// Where a video's frames come from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "path", rename_all = "snake_case")]
pub enum MediaLocator {
    FrameDir(PathBuf),
    VideoFile(PathBuf),
}

impl MediaLocator {
    /// Classifies an existing path: directories hold frames, files are videos.
    pub fn from_path(path: &Path) -> Option<Self> {
        if path.is_dir() {
            Some(Self::FrameDir(path.to_path_buf()))
        } else if path.is_file() {
            Some(Self::VideoFile(path.to_path_buf()))
        } else {
            None
        }
    }

    pub fn path(&self) -> &Path {
        match self {
            Self::FrameDir(p) | Self::VideoFile(p) => p,
        }
    }
}

/// Canonical on-disk layout of a dataset file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFile {
    pub name: String,
    pub items: Vec<QAItem>,
    /// Optional explicit `video_id -> path` map, relative to the dataset file.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub videos: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub items: Vec<QAItem>,
    pub video_index: BTreeMap<String, MediaLocator>,
}

impl Dataset {
    pub fn item(&self, question_id: &str) -> Option<&QAItem> {
        self.items.iter().find(|i| i.question_id == question_id)
    }

    /// Video ids in first-appearance order.
    pub fn video_ids(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.items
            .iter()
            .map(|i| i.video_id.as_str())
            .filter(|v| seen.insert(*v))
            .collect()
    }
}

fn line_of(text: &str, needle: &str) -> usize {
    text.find(needle)
        .map_or(0, |pos| text[..pos].bytes().filter(|&b| b == b'\n').count() + 1)
}

fn validate_items(text: &str, items: &[QAItem]) -> Result<(), DatasetError> {
    let mut ids = HashSet::new();
    for (i, item) in items.iter().enumerate() {
        let schema = |field: &str, message: String| DatasetError::Schema {
            line: line_of(text, &serde_json::to_string(&item.question_id).unwrap_or_default()),
            column: 0,
            field: format!("items[{i}].{field}"),
            message,
        };
        if item.question_id.trim().is_empty() {
            return Err(schema("question_id", "must not be empty".into()));
        }
        if item.video_id.trim().is_empty() {
            return Err(schema("video_id", "must not be empty".into()));
        }
        if item.question.trim().is_empty() {
            return Err(schema("question", "must not be empty".into()));
        }
        if !(MIN_OPTIONS..=MAX_OPTIONS).contains(&item.options.len()) {
            return Err(schema(
                "options",
                format!("expected {MIN_OPTIONS} to {MAX_OPTIONS} options, got {}", item.options.len()),
            ));
        }
        if let Some(gold) = item.gold_index {
            if gold >= item.options.len() {
                return Err(schema(
                    "gold_index",
                    format!("{gold} is out of range for {} options", item.options.len()),
                ));
            }
        }
        if !ids.insert(item.question_id.as_str()) {
            return Err(DatasetError::DuplicateQuestionId(item.question_id.clone()));
        }
    }
    Ok(())
}

fn resolve_video(root: &Path, video_id: &str, explicit: Option<&PathBuf>) -> Result<MediaLocator, DatasetError> {
    let candidates: Vec<PathBuf> = match explicit {
        Some(p) => vec![root.join(p)],
        None => {
            let base = root.join("videos").join(video_id);
            std::iter::once(base.clone())
                .chain(VIDEO_EXTENSIONS.iter().map(|ext| base.with_extension(ext)))
                .collect()
        }
    };
    candidates
        .iter()
        .find_map(|p| MediaLocator::from_path(p))
        .ok_or_else(|| DatasetError::UnresolvedVideo {
            video_id: video_id.to_string(),
            looked_for: candidates[0].display().to_string(),
        })
}

/// Parses and validates a dataset in the canonical JSON schema.
///
/// Videos resolve through the `videos` map when present, otherwise to
/// `videos/<video_id>` (a frame directory) or `videos/<video_id>.<ext>` next
/// to the dataset file. A directory argument means its `dataset.json`.
pub fn load_dataset(path: &Path) -> Result<Dataset, DatasetError> {
    let joined;
    let path = if path.is_dir() {
        joined = path.join("dataset.json");
        joined.as_path()
    } else {
        path
    };
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let root = path.parent().unwrap_or(Path::new("."));
    parse_dataset(&text, root)
}

pub fn parse_dataset(text: &str, root: &Path) -> Result<Dataset, DatasetError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: DatasetFile = serde_path_to_error::deserialize(de).map_err(|e| DatasetError::Schema {
        line: e.inner().line(),
        column: e.inner().column(),
        field: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    validate_items(text, &file.items)?;
    let mut video_index = BTreeMap::new();
    for item in &file.items {
        if !video_index.contains_key(&item.video_id) {
            let locator = resolve_video(root, &item.video_id, file.videos.get(&item.video_id))?;
            video_index.insert(item.video_id.clone(), locator);
        }
    }
    Ok(Dataset {
        name: file.name,
        items: file.items,
        video_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(items: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        for v in ["v1", "v2"] {
            fs::create_dir_all(dir.path().join("videos").join(v)).unwrap();
        }
        fs::write(dir.path().join("videos").join("v3.mp4"), b"x").unwrap();
        let path = dir.path().join("ds.json");
        fs::write(&path, format!("{{\n\"name\": \"t\",\n\"items\": [\n{items}\n]\n}}")).unwrap();
        (dir, path)
    }

    fn item(qid: &str, vid: &str, gold: usize) -> String {
        format!(
            r#"{{"question_id": "{qid}", "video_id": "{vid}", "category": "causal", "question": "why?", "options": ["a","b","c","d","e"], "gold_index": {gold}}}"#
        )
    }

    #[test]
    fn valid_three_items() {
        let (_d, path) = setup(&[item("q1", "v1", 0), item("q2", "v2", 1), item("q3", "v3", 4)].join(",\n"));
        let ds = load_dataset(&path).unwrap();
        assert_eq!(ds.items.len(), 3);
        assert!(matches!(ds.video_index["v1"], MediaLocator::FrameDir(_)));
        assert!(matches!(ds.video_index["v3"], MediaLocator::VideoFile(_)));
        assert_eq!(ds.video_ids(), vec!["v1", "v2", "v3"]);
    }

    #[test]
    fn directory_means_its_dataset_json() {
        let (d, path) = setup(&item("q1", "v1", 0));
        fs::rename(&path, d.path().join("dataset.json")).unwrap();
        assert_eq!(load_dataset(d.path()).unwrap().items.len(), 1);
    }

    #[test]
    fn duplicate_question_id() {
        let (_d, path) = setup(&[item("q1", "v1", 0), item("q1", "v2", 1)].join(",\n"));
        assert!(matches!(load_dataset(&path), Err(DatasetError::DuplicateQuestionId(id)) if id == "q1"));
    }

    #[test]
    fn gold_out_of_bounds() {
        let (_d, path) = setup(&[item("q1", "v1", 0), item("q2", "v1", 7)].join(",\n"));
        match load_dataset(&path) {
            Err(DatasetError::Schema { line, field, .. }) => {
                assert_eq!(field, "items[1].gold_index");
                assert_eq!(line, 5);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unresolved_video() {
        let (_d, path) = setup(&item("q1", "nope", 0));
        assert!(matches!(load_dataset(&path), Err(DatasetError::UnresolvedVideo { video_id, .. }) if video_id == "nope"));
    }

    #[test]
    fn type_errors_carry_path_and_line() {
        let (_d, path) = setup(r#"{"question_id": "q1", "video_id": "v1", "question": "?", "options": "abc"}"#);
        match load_dataset(&path) {
            Err(DatasetError::Schema { line, field, .. }) => {
                assert_eq!(field, "items[0].options");
                assert_eq!(line, 4);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn explicit_video_map() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("clips/a")).unwrap();
        let text = r#"{"name":"m","items":[{"question_id":"q","video_id":"a","question":"?","options":["x","y"]}],"videos":{"a":"clips/a"}}"#;
        let ds = parse_dataset(text, dir.path()).unwrap();
        assert_eq!(ds.video_index["a"], MediaLocator::FrameDir(dir.path().join("clips/a")));
    }
}
