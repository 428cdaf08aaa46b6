/*! Per-line classification and document-level language identification.

A line is identified only when the classifier's top confidence is strictly
above the line threshold; otherwise it carries the no-identification
sentinel with confidence 1. Document identification aggregates per-line
byte masses: a document is multilingual when it has enough lines, between
2 and 5 languages, every language holds at least 1/(m+1) of the bytes and
unidentified content holds at most 1/(m+1). Otherwise the largest language
wins if its byte-weighted confidence reaches the document threshold.
!*/

mod classifier;
pub mod fasttext;

use std::collections::HashMap;

use thiserror::Error;

pub use classifier::{
    ClassifierError, CountingClassifier, LineClassifier, Prediction, StubClassifier, StubError,
};

use crate::model::{
    Document, DocumentIdentification, LanguageAggregate, LanguageTag, Line, LineIdentification,
    RejectionReason,
};

/// Identification thresholds and multilingual gates.
#[derive(Debug, Clone, PartialEq)]
pub struct IdParams {
    /// A line is identified only when its top confidence is strictly above this.
    pub line_conf_threshold: f64,
    /// Minimum weighted confidence for a monolingual document (inclusive).
    pub doc_conf_threshold: f64,
    /// Minimum line count for the multilingual test.
    pub multiling_min_lines: usize,
    /// Maximum number of distinct identified languages for the multilingual test.
    pub multiling_max_langs: usize,
}

impl Default for IdParams {
    fn default() -> Self {
        IdParams {
            line_conf_threshold: 0.8,
            doc_conf_threshold: 0.6,
            multiling_min_lines: 5,
            multiling_max_langs: 5,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LangIdError {
    #[error("degenerate document: zero content bytes")]
    DegenerateDocument,
    #[error("document has no line identifications")]
    MissingLineIdentifications,
}

/// Classifies one line, applying the strict line confidence threshold.
/// Classifier failures map to the no-identification sentinel so a single
/// bad line never aborts its document.
pub fn classify_line(
    classifier: &dyn LineClassifier,
    line: &Line,
    params: &IdParams,
) -> LineIdentification {
    match classifier.predict(&line.text) {
        Ok(predictions) => match predictions.into_iter().next() {
            Some(top) if top.confidence > params.line_conf_threshold => {
                LineIdentification::identified(top.label, top.confidence.min(1.0))
            }
            _ => LineIdentification::unidentified(),
        },
        Err(e) => {
            log::warn!("line classifier failed, tagging line as unidentified: {e}");
            LineIdentification::unidentified()
        }
    }
}

/// Classifies every line of a document in order.
pub fn classify_lines(
    classifier: &dyn LineClassifier,
    lines: &[Line],
    params: &IdParams,
) -> Vec<LineIdentification> {
    lines
        .iter()
        .map(|line| classify_line(classifier, line, params))
        .collect()
}

/// Computes per-language aggregates over parallel lines and identifications:
/// byte size |g|, weighted confidence P = sum(size x confidence) / |D| and
/// proportion Pr = |g| / |D|.
///
/// The result is sorted by descending size (ties by descending confidence,
/// then label), with the unidentified entry ordered last among equals.
pub fn aggregate_lines(
    lines: &[Line],
    ids: &[LineIdentification],
) -> Result<Vec<LanguageAggregate>, LangIdError> {
    assert_eq!(lines.len(), ids.len(), "ids must parallel lines");
    let total: u64 = lines.iter().map(|l| l.byte_len as u64).sum();
    if total == 0 {
        return Err(LangIdError::DegenerateDocument);
    }
    let mut sizes: HashMap<Option<&LanguageTag>, (u64, f64)> = HashMap::new();
    for (line, id) in lines.iter().zip(ids) {
        let entry = sizes.entry(id.label()).or_insert((0, 0.0));
        entry.0 += line.byte_len as u64;
        entry.1 += line.byte_len as f64 * id.confidence();
    }
    let total_f = total as f64;
    let mut aggregates: Vec<LanguageAggregate> = sizes
        .into_iter()
        .map(|(label, (size_bytes, weighted_sum))| LanguageAggregate {
            label: label.cloned(),
            size_bytes,
            weighted_confidence: weighted_sum / total_f,
            proportion: size_bytes as f64 / total_f,
        })
        .collect();
    aggregates.sort_by(|a, b| {
        b.size_bytes
            .cmp(&a.size_bytes)
            .then_with(|| {
                b.weighted_confidence
                    .partial_cmp(&a.weighted_confidence)
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            // None (unidentified) sorts after any language.
            .then_with(|| match (&a.label, &b.label) {
                (Some(x), Some(y)) => x.cmp(y),
                (Some(_), None) => std::cmp::Ordering::Less,
                (None, Some(_)) => std::cmp::Ordering::Greater,
                (None, None) => std::cmp::Ordering::Equal,
            })
    });
    Ok(aggregates)
}

/// [`aggregate_lines`] over a document that already carries line identifications.
pub fn aggregate(doc: &Document) -> Result<Vec<LanguageAggregate>, LangIdError> {
    let ids = doc
        .line_ids()
        .ok_or(LangIdError::MissingLineIdentifications)?;
    aggregate_lines(doc.lines(), ids)
}

/// A positive multilingual decision: languages by descending byte size with
/// their weighted confidences.
#[derive(Debug, Clone, PartialEq)]
pub struct MultilingualId {
    pub languages: Vec<LanguageTag>,
    pub confidences: Vec<f64>,
}

/// The multilingual criterion over precomputed aggregates.
///
/// With m distinct identified languages, the document is multilingual iff it
/// has at least `multiling_min_lines` lines, 2 <= m <= `multiling_max_langs`,
/// every identified language holds at least |D|/(m+1) bytes, and unidentified
/// content holds at most |D|/(m+1) bytes. Comparisons are exact (integer).
pub fn multilingual_test(
    line_count: usize,
    aggregates: &[LanguageAggregate],
    params: &IdParams,
) -> Option<MultilingualId> {
    if line_count < params.multiling_min_lines {
        return None;
    }
    let m = aggregates.iter().filter(|a| a.label.is_some()).count();
    if m < 2 || m > params.multiling_max_langs {
        return None;
    }
    let total: u128 = aggregates.iter().map(|a| a.size_bytes as u128).sum();
    let scale = (m + 1) as u128;
    for agg in aggregates {
        let scaled = agg.size_bytes as u128 * scale;
        match &agg.label {
            Some(_) if scaled < total => return None,
            None if scaled > total => return None,
            _ => {}
        }
    }
    // aggregates are sorted by size already when produced by aggregate_lines,
    // but do not rely on it.
    let mut languages: Vec<&LanguageAggregate> =
        aggregates.iter().filter(|a| a.label.is_some()).collect();
    languages.sort_by(|a, b| {
        b.size_bytes
            .cmp(&a.size_bytes)
            .then_with(|| {
                b.weighted_confidence
                    .partial_cmp(&a.weighted_confidence)
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .then_with(|| a.label.cmp(&b.label))
    });
    Some(MultilingualId {
        languages: languages
            .iter()
            .map(|a| a.label.clone().expect("filtered on Some"))
            .collect(),
        confidences: languages.iter().map(|a| a.weighted_confidence).collect(),
    })
}

/// Document-level identification: the multilingual test first, then the
/// largest identified language kept iff its weighted confidence reaches the
/// (inclusive) document threshold.
pub fn identify_document(
    doc: &Document,
    params: &IdParams,
) -> Result<DocumentIdentification, LangIdError> {
    let aggregates = aggregate(doc)?;
    if let Some(multi) = multilingual_test(doc.line_count(), &aggregates, params) {
        return Ok(DocumentIdentification::Multilingual {
            languages: multi.languages,
            confidences: multi.confidences,
        });
    }
    // aggregates are sorted: the first identified entry is the largest
    // language (ties broken by confidence, then label).
    let best = aggregates.iter().find(|a| a.label.is_some());
    match best {
        None => Ok(DocumentIdentification::Rejected(RejectionReason::NoLanguage)),
        Some(agg) => {
            if agg.weighted_confidence >= params.doc_conf_threshold {
                Ok(DocumentIdentification::Monolingual {
                    language: agg.label.clone().expect("identified entry"),
                    confidence: agg.weighted_confidence,
                })
            } else {
                Ok(DocumentIdentification::Rejected(
                    RejectionReason::LowConfidence,
                ))
            }
        }
    }
}

/// Loads a classifier from a path, sniffing the format: files starting with
/// the fastText magic load as fastText models, anything else parses as stub
/// classifier TSV rules.
pub fn load_classifier(
    path: &std::path::Path,
) -> Result<Box<dyn LineClassifier>, ClassifierLoadError> {
    use std::io::Read;
    let mut file = std::fs::File::open(path)?;
    let mut magic = [0u8; 4];
    let n = file.read(&mut magic)?;
    if n == 4 && magic == fasttext::MAGIC.to_le_bytes() {
        Ok(Box::new(fasttext::FastTextModel::from_path(path)?))
    } else {
        Ok(Box::new(StubClassifier::from_path(path)?))
    }
}

#[derive(Debug, Error)]
pub enum ClassifierLoadError {
    #[error("cannot open classifier model: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    FastText(#[from] fasttext::FastTextError),
    #[error(transparent)]
    Stub(#[from] StubError),
}
