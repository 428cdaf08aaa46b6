/*! On-disk corpus record schema.

One JSON object per line in `<lang>_meta.jsonl` files:

```json
{"content":"…","warc_headers":{"warc-target-uri":"…","warc-record-id":"…",
"warc-date":"…","content-type":"…"},"metadata":{"identification":
{"label":"…","prob":0.9},"annotation":["tiny"],"sentence_identifications":
[{"label":"…","prob":0.95},null]}}
```

`annotation` is `null` for clean documents; unidentified lines serialize as
`null` entries in `sentence_identifications`.
!*/

use serde::{Deserialize, Serialize};

use crate::model::{Document, DocumentIdentification};

/// Language tag used for the multilingual bucket and its top-level label.
pub const MULTILINGUAL_TAG: &str = "multi";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub content: String,
    pub warc_headers: WarcHeaderFields,
    pub metadata: RecordMetadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarcHeaderFields {
    #[serde(rename = "warc-target-uri")]
    pub target_uri: String,
    #[serde(rename = "warc-record-id")]
    pub record_id: String,
    #[serde(rename = "warc-date")]
    pub date: String,
    #[serde(rename = "content-type")]
    pub content_type: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationJson {
    pub label: String,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMetadata {
    pub identification: IdentificationJson,
    pub annotation: Option<Vec<String>>,
    pub sentence_identifications: Vec<Option<IdentificationJson>>,
}

/// Builds the output record for an identified document. Returns `None` for
/// rejected or not-yet-identified documents (those never reach the writers).
///
/// Multilingual documents carry the label `"multi"` with the summed member
/// confidences as `prob`; per-language detail stays recoverable from the
/// sentence identifications.
pub fn corpus_record(doc: &Document) -> Option<CorpusRecord> {
    let identification = match doc.identification()? {
        DocumentIdentification::Monolingual {
            language,
            confidence,
        } => IdentificationJson {
            label: language.as_str().to_string(),
            prob: *confidence,
        },
        DocumentIdentification::Multilingual { confidences, .. } => IdentificationJson {
            label: MULTILINGUAL_TAG.to_string(),
            prob: confidences.iter().sum::<f64>().clamp(0.0, 1.0),
        },
        DocumentIdentification::Rejected(_) => return None,
    };
    let annotation = if doc.annotations().is_empty() {
        None
    } else {
        Some(
            doc.annotations()
                .iter()
                .map(|a| a.as_str().to_string())
                .collect(),
        )
    };
    let sentence_identifications = doc
        .line_ids()
        .map(|ids| {
            ids.iter()
                .map(|id| {
                    id.label().map(|label| IdentificationJson {
                        label: label.as_str().to_string(),
                        prob: id.confidence(),
                    })
                })
                .collect()
        })
        .unwrap_or_default();
    let headers = doc.headers();
    Some(CorpusRecord {
        content: doc.content(),
        warc_headers: WarcHeaderFields {
            target_uri: headers.target_uri.clone(),
            record_id: headers.record_id.clone(),
            date: headers.date.clone(),
            content_type: headers.content_type.clone(),
        },
        metadata: RecordMetadata {
            identification,
            annotation,
            sentence_identifications,
        },
    })
}

/// The routing bucket for an identified document: its language tag, or
/// `"multi"` for multilingual documents.
pub fn bucket_tag(identification: &DocumentIdentification) -> Option<&str> {
    match identification {
        DocumentIdentification::Monolingual { language, .. } => Some(language.as_str()),
        DocumentIdentification::Multilingual { .. } => Some(MULTILINGUAL_TAG),
        DocumentIdentification::Rejected(_) => None,
    }
}
