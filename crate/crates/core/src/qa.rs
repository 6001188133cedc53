//! Multiple-choice answering from a transcript alone.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inference::{DecodingConfig, InferenceError, TextModel};
use crate::prompting::{self, PromptError, MAX_OPTIONS, MIN_OPTIONS, OPTION_LETTERS};
use crate::transcript::{Transcript, TranscriptError};

#[derive(Debug, Error)]
pub enum QaError {
    #[error("transcript is empty")]
    EmptyTranscript,
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

impl From<TranscriptError> for QaError {
    fn from(_: TranscriptError) -> Self {
        QaError::EmptyTranscript
    }
}

/// One multiple-choice question about a video.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QAItem {
    pub question_id: String,
    pub video_id: String,
    #[serde(default)]
    pub category: String,
    pub question: String,
    pub options: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_index: Option<usize>,
}

impl QAItem {
    /// Copy with the gold answer removed, for sending to a service.
    pub fn without_gold(&self) -> Self {
        Self {
            gold_index: None,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtractionMethod {
    Strict,
    Fallback,
    Abstain,
}

impl ExtractionMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            ExtractionMethod::Strict => "strict",
            ExtractionMethod::Fallback => "fallback",
            ExtractionMethod::Abstain => "abstain",
        }
    }
}

impl std::fmt::Display for ExtractionMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Extracted choice: an option index, or `None` for ABSTAIN.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Extraction {
    pub chosen_index: Option<usize>,
    pub method: ExtractionMethod,
}

/// Serialized one per line in `predictions.jsonl`; `chosen_index` is `null` for ABSTAIN.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub question_id: String,
    pub chosen_index: Option<usize>,
    pub extraction_method: ExtractionMethod,
    pub raw_output: String,
}

impl Prediction {
    pub fn is_abstain(&self) -> bool {
        self.chosen_index.is_none()
    }
}

static STRICT_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\banswer\s*[:=]?\s*[\[(]?\s*([a-e])\s*[\])]?\s*answer\b").unwrap()
});
static LETTER_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b([A-E])\b").unwrap());

/// Pulls the chosen option out of raw model output.
///
/// The strict pass looks for `answer [L] answer` in any case, with optional
/// brackets and loose whitespace. The fallback pass takes the first standalone
/// capital letter A-E. Letters past `num_options` are skipped in both passes.
pub fn extract_answer(raw: &str, num_options: usize) -> Extraction {
    let num_options = num_options.min(MAX_OPTIONS);
    let in_range = |letter: &str| -> Option<usize> {
        let c = letter.chars().next()?.to_ascii_uppercase();
        let idx = OPTION_LETTERS.iter().position(|&l| l == c)?;
        (idx < num_options).then_some(idx)
    };
    if let Some(idx) = STRICT_RE.captures_iter(raw).find_map(|c| in_range(&c[1])) {
        return Extraction {
            chosen_index: Some(idx),
            method: ExtractionMethod::Strict,
        };
    }
    if let Some(idx) = LETTER_RE.captures_iter(raw).find_map(|c| in_range(&c[1])) {
        return Extraction {
            chosen_index: Some(idx),
            method: ExtractionMethod::Fallback,
        };
    }
    Extraction {
        chosen_index: None,
        method: ExtractionMethod::Abstain,
    }
}

/// Answers `item` from the transcript text only.
pub async fn answer(
    transcript: &Transcript,
    item: &QAItem,
    llm: &dyn TextModel,
    decoding: &DecodingConfig,
) -> Result<Prediction, QaError> {
    if !(MIN_OPTIONS..=MAX_OPTIONS).contains(&item.options.len()) {
        return Err(PromptError::TooFewOptions(item.options.len()).into());
    }
    let text = transcript.render_text()?;
    let prompts = prompting::qa_prompt(&text, &item.question, &item.options)?;
    let raw_output = llm.complete(&prompts, decoding).await?;
    let extraction = extract_answer(&raw_output, item.options.len());
    Ok(Prediction {
        question_id: item.question_id.clone(),
        chosen_index: extraction.chosen_index,
        extraction_method: extraction.method,
        raw_output,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_examples() {
        assert_eq!(
            extract_answer("answer [B] answer", 5),
            Extraction { chosen_index: Some(1), method: ExtractionMethod::Strict }
        );
        assert_eq!(extract_answer("The best choice is answer [c] answer.", 5).chosen_index, Some(2));
        assert_eq!(extract_answer("ANSWER D ANSWER", 5).chosen_index, Some(3));
        assert_eq!(extract_answer("answer:[ a ]answer", 2).chosen_index, Some(0));
    }

    #[test]
    fn abstain_cases() {
        assert_eq!(extract_answer("", 5).method, ExtractionMethod::Abstain);
        assert_eq!(extract_answer("answer [E] answer", 4).chosen_index, None);
        assert_eq!(extract_answer("no idea", 5).chosen_index, None);
    }

    #[test]
    fn fallback_takes_first_letter_in_range() {
        let e = extract_answer("I think E, or maybe B.", 4);
        assert_eq!(e, Extraction { chosen_index: Some(1), method: ExtractionMethod::Fallback });
        // lowercase articles are not option letters
        assert_eq!(extract_answer("a dog and a cat", 5).chosen_index, None);
    }

    #[test]
    fn strict_wins_over_earlier_letters() {
        assert_eq!(extract_answer("A is wrong. answer [C] answer", 5).chosen_index, Some(2));
    }

    #[test]
    fn prediction_jsonl_shape() {
        let p = Prediction {
            question_id: "q1".into(),
            chosen_index: None,
            extraction_method: ExtractionMethod::Abstain,
            raw_output: "hm".into(),
        };
        assert_eq!(
            serde_json::to_string(&p).unwrap(),
            r#"{"question_id":"q1","chosen_index":null,"extraction_method":"abstain","raw_output":"hm"}"#
        );
    }
}
