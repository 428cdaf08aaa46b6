//! Line classifier abstraction, plus a deterministic rule-based stub so the
//! whole pipeline and its tests run without any model download.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

use crate::model::LanguageTag;

/// One candidate label with its confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: LanguageTag,
    pub confidence: f64,
}

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("classifier failure: {0}")]
    Failed(String),
}

/// A pretrained line-level language classifier.
///
/// Implementations must be deterministic for a fixed model and input, and
/// read-only after construction so one instance can be shared across workers.
pub trait LineClassifier: Send + Sync {
    /// Candidate languages for one line, sorted by descending confidence.
    /// An empty vector means the classifier has no opinion.
    fn predict(&self, text: &str) -> Result<Vec<Prediction>, ClassifierError>;
}

impl<T: LineClassifier + ?Sized> LineClassifier for Box<T> {
    fn predict(&self, text: &str) -> Result<Vec<Prediction>, ClassifierError> {
        (**self).predict(text)
    }
}

#[derive(Debug, Error)]
pub enum StubError {
    #[error("cannot read stub rules: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

struct StubRule {
    pattern: regex::Regex,
    label: LanguageTag,
    confidence: f64,
}

/// Deterministic stub classifier driven by a TSV of `regex<TAB>label<TAB>prob`
/// rules. Every rule whose pattern matches the line contributes a prediction;
/// `#` starts a comment and blank lines are skipped.
pub struct StubClassifier {
    rules: Vec<StubRule>,
}

impl StubClassifier {
    pub fn from_reader(reader: impl Read) -> Result<Self, StubError> {
        let mut rules = Vec::new();
        for (n, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let parse = |message: String| StubError::Parse {
                line: n + 1,
                message,
            };
            let mut parts = trimmed.splitn(3, '\t');
            let pattern = parts
                .next()
                .ok_or_else(|| parse("missing pattern".into()))?;
            let label = parts.next().ok_or_else(|| parse("missing label".into()))?;
            let prob = parts
                .next()
                .ok_or_else(|| parse("missing probability".into()))?;
            let pattern = regex::Regex::new(pattern)
                .map_err(|e| parse(format!("bad regex: {e}")))?;
            let label =
                LanguageTag::new(label).map_err(|e| parse(format!("bad label: {e}")))?;
            let confidence: f64 = prob
                .trim()
                .parse()
                .map_err(|e| parse(format!("bad probability: {e}")))?;
            if !(confidence > 0.0 && confidence <= 1.0) {
                return Err(parse(format!("probability {confidence} not in (0, 1]")));
            }
            rules.push(StubRule {
                pattern,
                label,
                confidence,
            });
        }
        Ok(StubClassifier { rules })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, StubError> {
        Self::from_reader(File::open(path)?)
    }
}

impl LineClassifier for StubClassifier {
    fn predict(&self, text: &str) -> Result<Vec<Prediction>, ClassifierError> {
        let mut predictions: Vec<Prediction> = self
            .rules
            .iter()
            .filter(|r| r.pattern.is_match(text))
            .map(|r| Prediction {
                label: r.label.clone(),
                confidence: r.confidence,
            })
            .collect();
        predictions.sort_by(|a, b| {
            b.confidence
                .partial_cmp(&a.confidence)
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        Ok(predictions)
    }
}

/// Wraps a classifier and counts failed predictions, so per-line classifier
/// errors surface in the pipeline report without aborting any document.
pub struct CountingClassifier<C> {
    inner: C,
    errors: AtomicU64,
}

impl<C: LineClassifier> CountingClassifier<C> {
    pub fn new(inner: C) -> Self {
        CountingClassifier {
            inner,
            errors: AtomicU64::new(0),
        }
    }

    pub fn errors(&self) -> u64 {
        self.errors.load(Ordering::Relaxed)
    }
}

impl<C: LineClassifier> LineClassifier for CountingClassifier<C> {
    fn predict(&self, text: &str) -> Result<Vec<Prediction>, ClassifierError> {
        let result = self.inner.predict(text);
        if result.is_err() {
            self.errors.fetch_add(1, Ordering::Relaxed);
        }
        result
    }
}
