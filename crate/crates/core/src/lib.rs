/*! Document-oriented multilingual web corpus pipeline.

Converts crawled WET-style text records into per-language document corpora:
boilerplate filtering that keeps documents contiguous, per-line language
classification aggregated into a document-level identification, quality
annotations, per-language JSONL output, plus a line deduplication tool and
corpus audit reports.
!*/

pub mod annotate;
pub mod dedup;
pub mod ingest;
pub mod filters;
pub mod langid;
pub mod model;
pub mod pipeline;
pub mod schema;
pub mod stats;

pub use model::{
    Annotation, Document, DocumentIdentification, LanguageAggregate, LanguageTag, Line,
    LineIdentification, RawRecord, RecordHeaders, RejectionReason, SHORT_LINE_CHARS,
};
