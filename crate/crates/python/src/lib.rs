//! Python bindings: grid geometry, prompts, answer extraction, transcripts,
//! scoring, the privacy gate and the mock benchmark.

use std::path::PathBuf;

use logat_core::eval::{self, Models};
use logat_core::qa::ExtractionMethod;
use logat_core::synth::{self as synthetic, SynthSpec};
use logat_core::{self as core, Prediction, RunConfig, SystemPrompt};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Hands a serde value to Python as plain dicts and lists.
fn to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(value_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "GridSpec", frozen, eq, hash, from_py_object)]
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PyGridSpec(core::GridSpec);

#[pymethods]
impl PyGridSpec {
    #[new]
    #[pyo3(signature = (rows=2, cols=3, line_color=(0, 0, 0), line_thickness_px=2))]
    fn new(rows: u32, cols: u32, line_color: (u8, u8, u8), line_thickness_px: u32) -> PyResult<Self> {
        let (r, g, b) = line_color;
        core::GridSpec::new(rows, cols)
            .and_then(|s| s.with_line([r, g, b], line_thickness_px))
            .map(Self)
            .map_err(value_err)
    }

    /// Parses `"2x3"`.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        text.parse().map(Self).map_err(value_err)
    }

    #[getter]
    fn rows(&self) -> u32 {
        self.0.rows
    }

    #[getter]
    fn cols(&self) -> u32 {
        self.0.cols
    }

    #[getter]
    fn line_color(&self) -> (u8, u8, u8) {
        let [r, g, b] = self.0.line_color;
        (r, g, b)
    }

    #[getter]
    fn line_thickness_px(&self) -> u32 {
        self.0.line_thickness_px
    }

    fn cell_count(&self) -> u32 {
        self.0.cell_count()
    }

    /// Column positions of the vertical lines for a frame `width` pixels wide.
    fn vertical_lines(&self, width: u32) -> Vec<u32> {
        self.0.vertical_lines(width)
    }

    fn horizontal_lines(&self, height: u32) -> Vec<u32> {
        self.0.horizontal_lines(height)
    }

    fn cell_labels(&self) -> Vec<String> {
        core::cell_labels(&self.0).into_iter().map(|l| l.rendered).collect()
    }

    /// `(system, user)` prompt for captioning a gridded frame.
    fn local_prompt(&self) -> (Option<String>, String) {
        split(core::local_prompt(&self.0))
    }

    fn __repr__(&self) -> String {
        format!("GridSpec({})", self.0)
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }
}

fn split(p: core::PromptPair) -> (Option<String>, String) {
    let system = match p.system {
        SystemPrompt::Text(t) => Some(t),
        SystemPrompt::ModelDefault => None,
    };
    (system, p.user)
}

/// `(None, user)`: the global prompt keeps the model's own system prompt.
#[pyfunction]
fn global_prompt() -> (Option<String>, String) {
    split(core::global_prompt())
}

#[pyfunction]
fn qa_prompt(transcript_text: &str, question: &str, options: Vec<String>) -> PyResult<(Option<String>, String)> {
    core::qa_prompt(transcript_text, question, &options).map(split).map_err(value_err)
}

/// `(index or None, method)` for a raw model answer.
#[pyfunction]
fn extract_answer(raw: &str, num_options: usize) -> (Option<usize>, &'static str) {
    let e = core::extract_answer(raw, num_options);
    (e.chosen_index, e.method.as_str())
}

#[pyclass(name = "Transcript", frozen)]
pub struct PyTranscript(core::Transcript);

#[pymethods]
impl PyTranscript {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        core::Transcript::load(&path).map(Self).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn from_jsonl(text: &str) -> PyResult<Self> {
        core::Transcript::from_jsonl(text).map(Self).map_err(value_err)
    }

    fn to_jsonl(&self) -> String {
        self.0.to_jsonl()
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    /// The text block given to the question-answering model.
    fn render_text(&self) -> PyResult<String> {
        self.0.render_text().map_err(value_err)
    }

    /// SHA-256 of the serialized transcript; doubles as its id.
    fn digest(&self) -> String {
        self.0.digest()
    }

    #[getter]
    fn source_id(&self) -> &str {
        &self.0.source_id
    }

    #[getter]
    fn fps(&self) -> String {
        self.0.fps.to_string()
    }

    #[getter]
    fn grid(&self) -> Option<PyGridSpec> {
        self.0.grid.map(PyGridSpec)
    }

    fn entries<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.0.entries)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("Transcript(source_id={:?}, entries={})", self.0.source_id, self.0.len())
    }
}

/// Scores `(question_id, chosen_index or None)` pairs against a dataset file.
#[pyfunction]
fn evaluate<'py>(py: Python<'py>, predictions: Vec<(String, Option<usize>)>, dataset: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let ds = eval::load_dataset(&dataset).map_err(value_err)?;
    let preds: Vec<Prediction> = predictions
        .into_iter()
        .map(|(question_id, chosen_index)| Prediction {
            question_id,
            chosen_index,
            extraction_method: if chosen_index.is_some() {
                ExtractionMethod::Strict
            } else {
                ExtractionMethod::Abstain
            },
            raw_output: String::new(),
        })
        .collect();
    let report = core::evaluate(&preds, &ds).map_err(value_err)?;
    to_py(py, &report)
}

/// Runs the privacy gate over a payload; returns the verdict as a dict.
#[pyfunction]
#[pyo3(signature = (body, content_type="application/json"))]
fn privacy_gate<'py>(py: Python<'py>, body: &Bound<'py, PyAny>, content_type: &str) -> PyResult<Bound<'py, PyAny>> {
    let verdict = if let Ok(b) = body.cast::<PyBytes>() {
        core::privacy_gate(b.as_bytes(), content_type)
    } else {
        let s: String = body.extract()?;
        core::privacy_gate(s.as_bytes(), content_type)
    };
    to_py(py, &verdict)
}

/// Writes the synthetic dataset; returns the path of `dataset.json`.
#[pyfunction]
#[pyo3(signature = (out, videos=10, frames=5, seed=7))]
fn synth(out: PathBuf, videos: u32, frames: u32, seed: u64) -> PyResult<PathBuf> {
    let spec = SynthSpec {
        videos,
        frames_per_video: frames,
        seed,
        ..SynthSpec::default()
    };
    synthetic::write(&spec, &out).map_err(|e| PyIOError::new_err(e.to_string()))?;
    Ok(out.join("dataset.json"))
}

/// Runs a dataset end to end with the mock models and writes the artifacts
/// to `out_dir`. Returns `{report, failures, cache_hits}`.
#[pyfunction]
#[pyo3(signature = (dataset, out_dir, mode="local+global", grid="2x3"))]
fn run_mock_benchmark<'py>(
    py: Python<'py>,
    dataset: PathBuf,
    out_dir: PathBuf,
    mode: &str,
    grid: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let config = RunConfig {
        mode: mode.parse().map_err(value_err)?,
        grid: grid.parse().map_err(value_err)?,
        mock: true,
        ..RunConfig::default()
    };
    let ds = eval::load_dataset(&dataset).map_err(value_err)?;
    let outcome = py
        .detach(|| {
            tokio::runtime::Builder::new_current_thread()
                .build()
                .map_err(|e| e.to_string())?
                .block_on(eval::run_benchmark(&ds, &config, &Models::mock(), &out_dir))
                .map_err(|e| e.to_string())
        })
        .map_err(PyRuntimeError::new_err)?;
    to_py(
        py,
        &serde_json::json!({
            "report": outcome.report,
            "failures": outcome.failures,
            "cache_hits": outcome.cache_hits,
        }),
    )
}

#[pymodule]
fn logat(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGridSpec>()?;
    m.add_class::<PyTranscript>()?;
    m.add_function(wrap_pyfunction!(global_prompt, m)?)?;
    m.add_function(wrap_pyfunction!(qa_prompt, m)?)?;
    m.add_function(wrap_pyfunction!(extract_answer, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(privacy_gate, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(run_mock_benchmark, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
