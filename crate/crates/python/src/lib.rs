//! Python bindings for the corpus pipeline.
//!
//! Exposes the core operations in-process: line splitting and filtering,
//! classifiers, document identification, annotation, deduplication and the
//! carbon estimate. Structured results (processed records, pipeline
//! reports) come back as JSON strings for `json.loads`.

use std::path::{Path, PathBuf};

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use docpipe::annotate::{self, AdultMatch, AnnotateParams};
use docpipe::dedup;
use docpipe::filters;
use docpipe::langid::{self, IdParams, LineClassifier, StubClassifier};
use docpipe::model::{split_lines as split_lines_impl, Document, Line, RecordHeaders};
use docpipe::pipeline::{self, PipelineConfig};
use docpipe::schema;
use docpipe::stats;

fn to_value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_io_err(e: impl std::fmt::Display) -> PyErr {
    PyIOError::new_err(e.to_string())
}

fn lines_from_strings(texts: Vec<String>) -> Vec<Line> {
    texts
        .into_iter()
        .enumerate()
        .map(|(i, t)| Line::new(i, t))
        .collect()
}

/// Splits a record body into lines the way the pipeline does.
#[pyfunction]
fn split_lines(body: &str) -> Vec<String> {
    split_lines_impl(body).into_iter().map(|l| l.text).collect()
}

/// Removes runs of short lines from both ends; returns
/// (kept_lines, head_removed, tail_removed).
#[pyfunction]
#[pyo3(signature = (lines, short_chars = 100))]
fn strip_head_tail(lines: Vec<String>, short_chars: usize) -> (Vec<String>, usize, usize) {
    let lines = lines_from_strings(lines);
    let strip = filters::strip_head_tail(&lines, short_chars);
    let kept = lines[strip.kept.clone()]
        .iter()
        .map(|l| l.text.clone())
        .collect();
    (kept, strip.head_removed, strip.tail_removed)
}

/// True when the document survives the short-line bin filter.
#[pyfunction]
#[pyo3(signature = (lines, short_chars = 100))]
fn short_line_bin_keep(lines: Vec<String>, short_chars: usize) -> bool {
    filters::short_line_bin_keep(&lines_from_strings(lines), short_chars)
}

/// Ratio of letters and marks over non-whitespace characters.
#[pyfunction]
fn letter_ratio(text: &str) -> f64 {
    annotate::letter_ratio(text)
}

/// Length and noise annotations for a document body.
#[pyfunction]
#[pyo3(signature = (body, short_chars = 100))]
fn annotate_text(body: &str, short_chars: usize) -> Vec<String> {
    let params = AnnotateParams {
        short_line_chars: short_chars,
        ..AnnotateParams::default()
    };
    let lines = split_lines_impl(body);
    let mut labels: Vec<String> = annotate::annotate_length(&lines, &params)
        .into_iter()
        .map(|a| a.as_str().to_string())
        .collect();
    if annotate::is_noisy(body, &params) {
        labels.push("noisy".to_string());
    }
    labels
}

/// Energy in kWh for a generation run.
#[pyfunction]
#[pyo3(signature = (hours, cpus, cpu_watts, dram_watts, pue = stats::DEFAULT_PUE))]
fn power_consumption(
    hours: f64,
    cpus: u32,
    cpu_watts: f64,
    dram_watts: f64,
    pue: f64,
) -> PyResult<f64> {
    let mut params = stats::CarbonParams::new(hours, cpus, cpu_watts, dram_watts);
    params.pue = pue;
    stats::power_consumption(&params).map_err(to_value_err)
}

/// CO2-equivalent emissions in kg.
#[pyfunction]
#[pyo3(signature = (kwh, intensity = stats::DEFAULT_INTENSITY_KG_PER_KWH))]
fn co2e(kwh: f64, intensity: f64) -> PyResult<f64> {
    stats::co2e(kwh, intensity).map_err(to_value_err)
}

/// Deduplicates a line-oriented file; returns
/// (input_lines, kept_lines, removed_lines).
#[pyfunction]
#[pyo3(signature = (input, output, verify_bytes = false))]
fn dedup_file(input: &str, output: &str, verify_bytes: bool) -> PyResult<(u64, u64, u64)> {
    let report = dedup::dedup_corpus_file(input, output, verify_bytes).map_err(to_io_err)?;
    Ok((report.input_lines, report.kept_lines, report.removed_lines))
}

/// A line-level language classifier (fastText model or stub rules).
#[pyclass]
struct Classifier {
    inner: Box<dyn LineClassifier>,
}

#[pymethods]
impl Classifier {
    /// Loads a classifier from a path, sniffing fastText vs stub TSV.
    #[new]
    fn new(path: &str) -> PyResult<Self> {
        let inner = langid::load_classifier(Path::new(path)).map_err(to_value_err)?;
        Ok(Classifier { inner })
    }

    /// Builds a stub classifier from rules text
    /// (`regex<TAB>label<TAB>prob` per line).
    #[staticmethod]
    fn from_rules(rules: &str) -> PyResult<Self> {
        let stub = StubClassifier::from_reader(rules.as_bytes()).map_err(to_value_err)?;
        Ok(Classifier {
            inner: Box::new(stub),
        })
    }

    /// Candidate (label, confidence) pairs, best first.
    fn predict(&self, text: &str) -> PyResult<Vec<(String, f64)>> {
        let predictions = self.inner.predict(text).map_err(to_value_err)?;
        Ok(predictions
            .into_iter()
            .map(|p| (p.label.as_str().to_string(), p.confidence))
            .collect())
    }
}

/// A compiled adult blocklist (UT1 category directory).
#[pyclass]
struct Blocklist {
    inner: annotate::Blocklist,
}

#[pymethods]
impl Blocklist {
    #[new]
    fn new(dir: &str) -> PyResult<Self> {
        let inner = annotate::load_ut1(dir).map_err(to_value_err)?;
        Ok(Blocklist { inner })
    }

    fn matches(&self, uri: &str) -> PyResult<bool> {
        match self.inner.matches_uri(uri) {
            AdultMatch::Matched => Ok(true),
            AdultMatch::NotMatched => Ok(false),
            AdultMatch::UnparseableUri => Err(to_value_err(format!("unparseable uri: {uri}"))),
        }
    }

    fn domain_count(&self) -> usize {
        self.inner.domain_count()
    }

    fn url_count(&self) -> usize {
        self.inner.url_count()
    }
}

/// Runs one record through filter -> identify -> annotate. Returns a JSON
/// string: `{"status":"emitted","bucket":…,"record":{…}}` or
/// `{"status":"rejected","reason":…}`.
#[pyfunction]
#[pyo3(signature = (uri, body, classifier, blocklist = None, short_chars = 100,
                    line_threshold = 0.8, doc_threshold = 0.6))]
#[allow(clippy::too_many_arguments)]
fn process_record(
    uri: &str,
    body: &str,
    classifier: &Classifier,
    blocklist: Option<&Blocklist>,
    short_chars: usize,
    line_threshold: f64,
    doc_threshold: f64,
) -> PyResult<String> {
    let config = PipelineConfig {
        short_line_chars: short_chars,
        id_params: IdParams {
            line_conf_threshold: line_threshold,
            doc_conf_threshold: doc_threshold,
            ..IdParams::default()
        },
        ..PipelineConfig::default()
    };
    let record = docpipe::model::RawRecord {
        target_uri: uri.to_string(),
        record_id: "<urn:uuid:python-binding>".to_string(),
        date: "1970-01-01T00:00:00Z".to_string(),
        content_type: "text/plain".to_string(),
        body: body.to_string(),
    };
    let outcome = pipeline::process_record(
        &record,
        &classifier.inner,
        blocklist.map(|b| &b.inner),
        &config,
    );
    let value = match outcome.result {
        Ok(processed) => {
            let record = schema::corpus_record(&processed.document)
                .expect("emitted documents serialize");
            serde_json::json!({
                "status": "emitted",
                "bucket": processed.bucket,
                "record": record,
            })
        }
        Err(reason) => serde_json::json!({
            "status": "rejected",
            "reason": reason.as_str(),
        }),
    };
    Ok(value.to_string())
}

/// Identifies a raw body without filtering. Returns a JSON string:
/// monolingual, multilingual, or rejected with a reason.
#[pyfunction]
#[pyo3(signature = (body, classifier, line_threshold = 0.8, doc_threshold = 0.6))]
fn identify_text(
    body: &str,
    classifier: &Classifier,
    line_threshold: f64,
    doc_threshold: f64,
) -> PyResult<String> {
    use docpipe::model::DocumentIdentification;
    let params = IdParams {
        line_conf_threshold: line_threshold,
        doc_conf_threshold: doc_threshold,
        ..IdParams::default()
    };
    let mut doc = Document::new(
        split_lines_impl(body),
        RecordHeaders {
            target_uri: "py:///identify".to_string(),
            record_id: "<urn:uuid:python-binding>".to_string(),
            date: "1970-01-01T00:00:00Z".to_string(),
            content_type: "text/plain".to_string(),
        },
    );
    let ids = langid::classify_lines(&classifier.inner, doc.lines(), &params);
    doc.set_line_ids(ids);
    let value = match langid::identify_document(&doc, &params).map_err(to_value_err)? {
        DocumentIdentification::Monolingual {
            language,
            confidence,
        } => serde_json::json!({
            "type": "monolingual",
            "language": language.as_str(),
            "confidence": confidence,
        }),
        DocumentIdentification::Multilingual {
            languages,
            confidences,
        } => serde_json::json!({
            "type": "multilingual",
            "languages": languages.iter().map(|l| l.as_str()).collect::<Vec<_>>(),
            "confidences": confidences,
        }),
        DocumentIdentification::Rejected(reason) => serde_json::json!({
            "type": "rejected",
            "reason": reason.as_str(),
        }),
    };
    Ok(value.to_string())
}

/// Runs the whole pipeline; returns the report as a JSON string.
#[pyfunction]
#[pyo3(signature = (inputs, model, output, blocklist = None, workers = 1,
                    deterministic = false, keep_rejected = false))]
fn run_pipeline(
    inputs: Vec<String>,
    model: &str,
    output: &str,
    blocklist: Option<&str>,
    workers: usize,
    deterministic: bool,
    keep_rejected: bool,
) -> PyResult<String> {
    let config = PipelineConfig {
        inputs: inputs.into_iter().map(PathBuf::from).collect(),
        model_path: PathBuf::from(model),
        blocklist_root: blocklist.map(PathBuf::from),
        output_dir: PathBuf::from(output),
        workers,
        deterministic,
        keep_rejected,
        ..PipelineConfig::default()
    };
    let report = pipeline::run(&config).map_err(to_io_err)?;
    serde_json::to_string(&report).map_err(to_value_err)
}

#[pymodule]
fn docpipe_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Classifier>()?;
    m.add_class::<Blocklist>()?;
    m.add_function(wrap_pyfunction!(split_lines, m)?)?;
    m.add_function(wrap_pyfunction!(strip_head_tail, m)?)?;
    m.add_function(wrap_pyfunction!(short_line_bin_keep, m)?)?;
    m.add_function(wrap_pyfunction!(letter_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(annotate_text, m)?)?;
    m.add_function(wrap_pyfunction!(power_consumption, m)?)?;
    m.add_function(wrap_pyfunction!(co2e, m)?)?;
    m.add_function(wrap_pyfunction!(dedup_file, m)?)?;
    m.add_function(wrap_pyfunction!(process_record, m)?)?;
    m.add_function(wrap_pyfunction!(identify_text, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}
