/*! Document data model.

Everything downstream (filters, identification, annotation, output) works on
[`Document`]s, which are ordered lists of [`Line`]s plus the WARC header
subset kept from ingestion. Line and document sizes are UTF-8 byte lengths of
the line text, excluding newline separators.
!*/

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lines shorter than this many Unicode scalars count as "short" everywhere
/// (head/tail stripping, the short-line bin filter and the length annotations).
pub const SHORT_LINE_CHARS: usize = 100;

/// A language label, e.g. `"en"` or `"als"`.
///
/// Tags double as output file name components, so they are restricted to
/// ASCII alphanumerics plus `-` and `_`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LanguageTag(String);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid language tag {0:?}")]
pub struct InvalidLanguageTag(pub String);

impl LanguageTag {
    pub fn new(tag: impl Into<String>) -> Result<Self, InvalidLanguageTag> {
        let tag = tag.into();
        let ok = !tag.is_empty()
            && tag
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
        if ok {
            Ok(LanguageTag(tag))
        } else {
            Err(InvalidLanguageTag(tag))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LanguageTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::str::FromStr for LanguageTag {
    type Err = InvalidLanguageTag;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LanguageTag::new(s)
    }
}

/// One line of a document: its position, text and cached lengths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Line {
    /// 0-based position in the document.
    pub index: usize,
    /// Line text without any newline character.
    pub text: String,
    /// UTF-8 encoded length of `text`.
    pub byte_len: usize,
    /// Number of Unicode scalars in `text`.
    pub char_len: usize,
}

impl Line {
    pub fn new(index: usize, text: impl Into<String>) -> Self {
        let text = text.into();
        debug_assert!(!text.contains('\n'), "line text must not contain newlines");
        let byte_len = text.len();
        let char_len = text.chars().count();
        Line {
            index,
            text,
            byte_len,
            char_len,
        }
    }

    pub fn is_short(&self, threshold: usize) -> bool {
        self.char_len < threshold
    }
}

/// Splits a record body into lines on `'\n'`.
///
/// A trailing empty segment after a final newline is dropped, and a `'\r'`
/// immediately preceding the separator is stripped (crawl data mixes line
/// conventions). Joining the resulting lines with `'\n'` reproduces the body
/// modulo one trailing newline (for bodies free of `'\r'`).
pub fn split_lines(body: &str) -> Vec<Line> {
    if body.is_empty() {
        return Vec::new();
    }
    let segments: Vec<&str> = body.split('\n').collect();
    // split() yields one empty trailing segment for "a\n"; drop it.
    let count = if body.ends_with('\n') {
        segments.len() - 1
    } else {
        segments.len()
    };
    (0..count)
        .map(|index| {
            let raw = segments[index];
            // Only a '\r' that preceded a separator is framing; a bare
            // final '\r' in an unterminated body is content.
            let text = if index < segments.len() - 1 {
                raw.strip_suffix('\r').unwrap_or(raw)
            } else {
                raw
            };
            Line::new(index, text)
        })
        .collect()
}

/// Document size |D|: the sum of line byte lengths, separators excluded.
pub fn document_size(lines: &[Line]) -> u64 {
    lines.iter().map(|l| l.byte_len as u64).sum()
}

/// Per-line identification: a language with the classifier confidence, or
/// the no-identification sentinel (carrying confidence 1).
#[derive(Debug, Clone, PartialEq)]
pub struct LineIdentification {
    label: Option<LanguageTag>,
    confidence: f64,
}

impl LineIdentification {
    /// A line identified as `label` with classifier confidence `confidence`.
    pub fn identified(label: LanguageTag, confidence: f64) -> Self {
        assert!(
            confidence > 0.0 && confidence <= 1.0,
            "confidence must be in (0, 1], got {confidence}"
        );
        LineIdentification {
            label: Some(label),
            confidence,
        }
    }

    /// The no-identification sentinel, by convention with confidence 1.
    pub fn unidentified() -> Self {
        LineIdentification {
            label: None,
            confidence: 1.0,
        }
    }

    pub fn label(&self) -> Option<&LanguageTag> {
        self.label.as_ref()
    }

    pub fn confidence(&self) -> f64 {
        self.confidence
    }

    pub fn is_identified(&self) -> bool {
        self.label.is_some()
    }
}

/// Per-language byte mass of one document: |g|, P and Pr.
#[derive(Debug, Clone, PartialEq)]
pub struct LanguageAggregate {
    /// `None` is the no-identification sentinel.
    pub label: Option<LanguageTag>,
    /// |g|: total bytes of the lines carrying this label.
    pub size_bytes: u64,
    /// P: sum of size x confidence over this label's lines, divided by |D|.
    pub weighted_confidence: f64,
    /// Pr: size_bytes / |D|.
    pub proportion: f64,
}

/// Why a document was dropped instead of emitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionReason {
    /// Head/tail stripping left no lines.
    EmptyAfterStrip,
    /// The short-lines bin outweighed the long-lines bin.
    ShortLineMajority,
    /// Every line carries the no-identification sentinel.
    NoLanguage,
    /// The dominant language's weighted confidence fell below the document threshold.
    LowConfidence,
    /// The document has zero content bytes.
    DegenerateDocument,
}

impl RejectionReason {
    /// True for rejections produced by the destructive filters; false for
    /// identification-stage rejections.
    pub fn is_filter_stage(&self) -> bool {
        matches!(
            self,
            RejectionReason::EmptyAfterStrip | RejectionReason::ShortLineMajority
        )
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            RejectionReason::EmptyAfterStrip => "empty_after_strip",
            RejectionReason::ShortLineMajority => "short_line_majority",
            RejectionReason::NoLanguage => "no_language",
            RejectionReason::LowConfidence => "low_confidence",
            RejectionReason::DegenerateDocument => "degenerate_document",
        }
    }
}

impl fmt::Display for RejectionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Document-level identification outcome.
#[derive(Debug, Clone, PartialEq)]
pub enum DocumentIdentification {
    Monolingual {
        language: LanguageTag,
        confidence: f64,
    },
    /// 2 to 5 languages, sorted by descending byte size, with their
    /// weighted confidences in the same order.
    Multilingual {
        languages: Vec<LanguageTag>,
        confidences: Vec<f64>,
    },
    Rejected(RejectionReason),
}

/// Quality annotations; a document with none is "clean".
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Annotation {
    Tiny,
    ShortSentences,
    Header,
    Footer,
    Noisy,
    Adult,
}

impl Annotation {
    pub const ALL: [Annotation; 6] = [
        Annotation::Tiny,
        Annotation::ShortSentences,
        Annotation::Header,
        Annotation::Footer,
        Annotation::Noisy,
        Annotation::Adult,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Annotation::Tiny => "tiny",
            Annotation::ShortSentences => "short_sentences",
            Annotation::Header => "header",
            Annotation::Footer => "footer",
            Annotation::Noisy => "noisy",
            Annotation::Adult => "adult",
        }
    }
}

impl fmt::Display for Annotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One crawled text record as ingested: the retained WARC headers plus the
/// UTF-8 body. Records with non-UTF-8 bodies are rejected at ingest and
/// never constructed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    pub target_uri: String,
    pub record_id: String,
    pub date: String,
    pub content_type: String,
    pub body: String,
}

/// The WARC header subset a document keeps after its body is split into lines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordHeaders {
    pub target_uri: String,
    pub record_id: String,
    pub date: String,
    pub content_type: String,
}

impl From<&RawRecord> for RecordHeaders {
    fn from(r: &RawRecord) -> Self {
        RecordHeaders {
            target_uri: r.target_uri.clone(),
            record_id: r.record_id.clone(),
            date: r.date.clone(),
            content_type: r.content_type.clone(),
        }
    }
}

/// The unit flowing through the pipeline. Immutable after each stage; stages
/// produce new documents (filtering) or fill the optional slots
/// (identification, annotations).
#[derive(Debug, Clone)]
pub struct Document {
    lines: Vec<Line>,
    headers: RecordHeaders,
    line_ids: Option<Vec<LineIdentification>>,
    identification: Option<DocumentIdentification>,
    annotations: BTreeSet<Annotation>,
}

impl Document {
    pub fn new(lines: Vec<Line>, headers: RecordHeaders) -> Self {
        Document {
            lines,
            headers,
            line_ids: None,
            identification: None,
            annotations: BTreeSet::new(),
        }
    }

    pub fn from_record(record: &RawRecord) -> Self {
        Document::new(split_lines(&record.body), RecordHeaders::from(record))
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn line_count(&self) -> usize {
        self.lines.len()
    }

    pub fn headers(&self) -> &RecordHeaders {
        &self.headers
    }

    /// |D| in bytes.
    pub fn size(&self) -> u64 {
        document_size(&self.lines)
    }

    /// Lines joined by `'\n'`.
    pub fn content(&self) -> String {
        let mut out = String::new();
        for (i, line) in self.lines.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push_str(&line.text);
        }
        out
    }

    /// Replaces the lines with a contiguous sub-range, re-indexing from 0.
    /// Any line identifications are discarded (they no longer parallel).
    pub fn retain_range(&mut self, range: std::ops::Range<usize>) {
        let mut lines: Vec<Line> = self.lines.drain(range).collect();
        for (i, line) in lines.iter_mut().enumerate() {
            line.index = i;
        }
        self.lines = lines;
        self.line_ids = None;
    }

    pub fn set_line_ids(&mut self, ids: Vec<LineIdentification>) {
        assert_eq!(
            ids.len(),
            self.lines.len(),
            "line identifications must parallel lines"
        );
        self.line_ids = Some(ids);
    }

    pub fn line_ids(&self) -> Option<&[LineIdentification]> {
        self.line_ids.as_deref()
    }

    pub fn set_identification(&mut self, id: DocumentIdentification) {
        self.identification = Some(id);
    }

    pub fn identification(&self) -> Option<&DocumentIdentification> {
        self.identification.as_ref()
    }

    pub fn annotations(&self) -> &BTreeSet<Annotation> {
        &self.annotations
    }

    pub fn add_annotation(&mut self, annotation: Annotation) {
        self.annotations.insert(annotation);
    }

    pub fn extend_annotations(&mut self, annotations: impl IntoIterator<Item = Annotation>) {
        self.annotations.extend(annotations);
    }

    pub fn is_clean(&self) -> bool {
        self.annotations.is_empty()
    }
}
