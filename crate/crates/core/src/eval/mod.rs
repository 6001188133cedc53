//! Datasets, exact-match scoring and benchmark orchestration.

#[cfg(feature = "media")]
mod benchmark;
mod dataset;

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qa::Prediction;

#[cfg(feature = "media")]
pub use benchmark::{run_benchmark, BenchmarkError, BenchmarkOutcome, Failure, FailureStage, Models};
pub use dataset::{load_dataset, parse_dataset, Dataset, DatasetError, DatasetFile, MediaLocator};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("prediction for unknown question `{0}`")]
    UnknownQuestionId(String),
    #[error("question `{0}` has no gold answer")]
    MissingGold(String),
    #[error("question `{0}` has more than one prediction")]
    DuplicatePrediction(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub correct: u64,
    pub total: u64,
    pub accuracy: f64,
}

impl Tally {
    fn add(&mut self, correct: bool) {
        self.total += 1;
        self.correct += u64::from(correct);
        self.accuracy = self.correct as f64 / self.total as f64;
    }
}

/// Exact-match accuracy overall and per question category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall_accuracy: f64,
    pub correct: u64,
    pub total: u64,
    pub per_category: BTreeMap<String, Tally>,
    pub abstain_count: u64,
    pub config_fingerprint: String,
}

impl EvalReport {
    pub fn with_fingerprint(mut self, fingerprint: impl Into<String>) -> Self {
        self.config_fingerprint = fingerprint.into();
        self
    }

    /// Fixed-width text table: one column per category, then the average.
    pub fn to_table(&self, scenario: &str) -> String {
        let mut header = vec![format!("{:<16}", "Scenario")];
        let mut row = vec![format!("{scenario:<16}")];
        for (cat, tally) in &self.per_category {
            let width = cat.len().max(7);
            header.push(format!("{cat:>width$}"));
            row.push(format!("{:>width$.2}", tally.accuracy * 100.0));
        }
        header.push(format!("{:>8}", "Avg. Acc"));
        row.push(format!("{:>8.2}", self.overall_accuracy * 100.0));
        let mut out = String::new();
        let _ = writeln!(out, "{}", header.join(" | "));
        let _ = writeln!(out, "{}", "-".repeat(header.join(" | ").len()));
        let _ = writeln!(out, "{}", row.join(" | "));
        let _ = writeln!(
            out,
            "\n{} / {} correct, {} abstained (scored incorrect), config {}",
            self.correct, self.total, self.abstain_count, self.config_fingerprint
        );
        out
    }
}

/// Scores predictions against gold answers. ABSTAIN counts as incorrect; only
/// questions that have a prediction are counted.
pub fn evaluate(predictions: &[Prediction], dataset: &Dataset) -> Result<EvalReport, EvalError> {
    let items: BTreeMap<&str, _> = dataset.items.iter().map(|i| (i.question_id.as_str(), i)).collect();
    let mut seen = HashSet::new();
    let mut overall = Tally::default();
    let mut per_category: BTreeMap<String, Tally> = BTreeMap::new();
    let mut abstain_count = 0;
    for pred in predictions {
        let item = items
            .get(pred.question_id.as_str())
            .ok_or_else(|| EvalError::UnknownQuestionId(pred.question_id.clone()))?;
        let gold = item
            .gold_index
            .ok_or_else(|| EvalError::MissingGold(pred.question_id.clone()))?;
        if !seen.insert(pred.question_id.as_str()) {
            return Err(EvalError::DuplicatePrediction(pred.question_id.clone()));
        }
        let correct = pred.chosen_index == Some(gold);
        abstain_count += u64::from(pred.is_abstain());
        overall.add(correct);
        per_category.entry(item.category.clone()).or_default().add(correct);
    }
    Ok(EvalReport {
        overall_accuracy: overall.accuracy,
        correct: overall.correct,
        total: overall.total,
        per_category,
        abstain_count,
        config_fingerprint: String::new(),
    })
}
