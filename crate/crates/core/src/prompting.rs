//! Prompt texts for frame captioning and transcript-only question answering.
//!
//! Template files live under `prompts/templates/` at the repository root and
//! are compiled in verbatim.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::GridSpec;

const LOCAL_SYSTEM: &str = include_str!("../../../prompts/templates/local_system.txt");
const LOCAL_USER: &str = include_str!("../../../prompts/templates/local_user.txt");
const GLOBAL_USER: &str = include_str!("../../../prompts/templates/global_user.txt");
const QA_SYSTEM: &str = include_str!("../../../prompts/templates/qa_system.txt");
const QA_USER: &str = include_str!("../../../prompts/templates/qa_user.txt");

pub const OPTION_LETTERS: [char; 5] = ['A', 'B', 'C', 'D', 'E'];
pub const MIN_OPTIONS: usize = 2;
pub const MAX_OPTIONS: usize = OPTION_LETTERS.len();

/// Output-format separators of the original 2x3 prompt, which omits the comma
/// after the second and fifth entries.
const SEPARATORS_2X3: [&str; 5] = [", ", " ", ", ", ", ", " "];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("transcript is empty")]
    EmptyTranscript,
    #[error("question is empty")]
    EmptyQuestion,
    #[error("expected {MIN_OPTIONS} to {MAX_OPTIONS} options, got {0}")]
    TooFewOptions(usize),
}

/// System message slot. `ModelDefault` means no system message is sent and the
/// model's built-in one applies.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemPrompt {
    ModelDefault,
    Text(String),
}

impl SystemPrompt {
    pub fn as_text(&self) -> Option<&str> {
        match self {
            SystemPrompt::ModelDefault => None,
            SystemPrompt::Text(t) => Some(t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PromptPair {
    pub system: SystemPrompt,
    pub user: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellLabel {
    pub ordinal: u32,
    pub column_word: String,
    pub row_word: String,
    pub rendered: String,
}

fn column_word(col: u32, cols: u32) -> String {
    match (cols, col) {
        (3, 0) | (2, 0) => "left".into(),
        (3, 1) => "middle".into(),
        (3, 2) | (2, 1) => "right".into(),
        _ => format!("col-{}", col + 1),
    }
}

fn row_word(row_from_bottom: u32, rows: u32) -> String {
    match (rows, row_from_bottom) {
        (2, 0) => "lower".into(),
        (2, 1) => "upper".into(),
        _ => format!("row-{}", row_from_bottom + 1),
    }
}

/// Cell labels numbered row-major from the lower-left cell, bottom row first.
pub fn cell_labels(grid: &GridSpec) -> Vec<CellLabel> {
    let mut labels = Vec::with_capacity(grid.cell_count() as usize);
    for row in 0..grid.rows {
        for col in 0..grid.cols {
            let ordinal = row * grid.cols + col + 1;
            let column_word = column_word(col, grid.cols);
            let row_word = row_word(row, grid.rows);
            let rendered = format!("Cell{ordinal}({column_word}, {row_word})");
            labels.push(CellLabel {
                ordinal,
                column_word,
                row_word,
                rendered,
            });
        }
    }
    labels
}

pub fn color_name(rgb: [u8; 3]) -> String {
    match rgb {
        [0, 0, 0] => "black".into(),
        [255, 255, 255] => "white".into(),
        [255, 0, 0] => "red".into(),
        [0, 255, 0] => "green".into(),
        [0, 0, 255] => "blue".into(),
        [255, 255, 0] => "yellow".into(),
        [r, g, b] => format!("#{r:02x}{g:02x}{b:02x}"),
    }
}

/// Single-pass `{name}` substitution. Unknown placeholders are left as written,
/// and substituted values are never re-scanned.
fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let vars: HashMap<&str, &str> = vars.iter().copied().collect();
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if vars.contains_key(&after[..close]) => {
                out.push_str(vars[&after[..close]]);
                rest = &after[close + 1..];
            }
            _ => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Prompt for captioning a frame that carries the grid overlay.
pub fn local_prompt(grid: &GridSpec) -> PromptPair {
    let labels = cell_labels(grid);
    let cell_list = labels
        .iter()
        .map(|l| l.rendered.as_str())
        .collect::<Vec<_>>()
        .join(", ");
    let mut output_format = String::new();
    for (i, label) in labels.iter().enumerate() {
        if i > 0 {
            let sep = if (grid.rows, grid.cols) == (2, 3) {
                SEPARATORS_2X3[i - 1]
            } else {
                ", "
            };
            output_format.push_str(sep);
        }
        output_format.push_str(&format!("{}: Caption for Cell{}", label.rendered, label.ordinal));
    }
    let system = render(
        LOCAL_SYSTEM,
        &[
            ("grid", &grid.to_string()),
            ("color", &color_name(grid.line_color)),
            ("cell_count", &grid.cell_count().to_string()),
            ("cell_list", &cell_list),
            ("output_format", &output_format),
        ],
    );
    PromptPair {
        system: SystemPrompt::Text(system),
        user: LOCAL_USER.to_string(),
    }
}

/// Prompt for captioning a plain frame; relies on the model's default system prompt.
pub fn global_prompt() -> PromptPair {
    PromptPair {
        system: SystemPrompt::ModelDefault,
        user: GLOBAL_USER.to_string(),
    }
}

/// Question-answering prompt over a rendered transcript. Options are lettered
/// A.. in the order given.
pub fn qa_prompt(
    transcript_text: &str,
    question: &str,
    options: &[String],
) -> Result<PromptPair, PromptError> {
    if transcript_text.trim().is_empty() {
        return Err(PromptError::EmptyTranscript);
    }
    if question.trim().is_empty() {
        return Err(PromptError::EmptyQuestion);
    }
    if !(MIN_OPTIONS..=MAX_OPTIONS).contains(&options.len()) {
        return Err(PromptError::TooFewOptions(options.len()));
    }
    let rendered_options = options
        .iter()
        .zip(OPTION_LETTERS)
        .map(|(text, letter)| format!("{letter}. {text}"))
        .collect::<Vec<_>>()
        .join("\n");
    let letters = OPTION_LETTERS[..options.len()]
        .iter()
        .map(char::to_string)
        .collect::<Vec<_>>()
        .join(" or ");
    Ok(PromptPair {
        system: SystemPrompt::Text(render(QA_SYSTEM, &[("transcript", transcript_text)])),
        user: render(
            QA_USER,
            &[
                ("question", question),
                ("options", &rendered_options),
                ("letters", &letters),
            ],
        ),
    })
}
