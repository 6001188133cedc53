//! Independent oracles and fixed corpora for the acceptance suite.
//!
//! Nothing here calls into the code under test except to build inputs; every
//! expected value is computed from first principles or written out by hand.

pub mod corpus;
pub mod oracle;

use std::path::PathBuf;

/// Workspace root, for the bundled data and prompt files.
pub fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// Collapses runs of spaces and trims each line; the convention the golden
/// prompt files are written in.
pub fn canonical_whitespace(text: &str) -> String {
    text.lines()
        .map(|l| l.split(' ').filter(|w| !w.is_empty()).collect::<Vec<_>>().join(" "))
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}
