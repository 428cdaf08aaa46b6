/*! Destructive document filters.

Two filters run before identification: head/tail stripping removes
contiguous runs of short lines at the document boundaries (menus,
copyright footers), and the short-line bin filter drops documents where
short lines outnumber long ones. Both only ever keep a contiguous slice
of the original lines, so surviving documents stay human readable.
!*/

use crate::model::{Document, Line, RejectionReason, SHORT_LINE_CHARS};

/// Result of removing short-line runs from both ends of a document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StripResult {
    /// Range of the kept lines within the input slice.
    pub kept: std::ops::Range<usize>,
    pub head_removed: usize,
    pub tail_removed: usize,
}

/// Removes the maximal run of lines shorter than `short_threshold` chars at
/// the head, then the maximal such run at the tail of what remains.
/// Interior short lines are untouched.
pub fn strip_head_tail(lines: &[Line], short_threshold: usize) -> StripResult {
    let head = lines
        .iter()
        .take_while(|l| l.is_short(short_threshold))
        .count();
    if head == lines.len() {
        return StripResult {
            kept: 0..0,
            head_removed: head,
            tail_removed: 0,
        };
    }
    let tail = lines[head..]
        .iter()
        .rev()
        .take_while(|l| l.is_short(short_threshold))
        .count();
    StripResult {
        kept: head..lines.len() - tail,
        head_removed: head,
        tail_removed: tail,
    }
}

/// Bins lines into short and long and keeps the document unless the short
/// bin is strictly bigger (by line count; ties keep). An empty document is
/// discarded.
pub fn short_line_bin_keep(lines: &[Line], short_threshold: usize) -> bool {
    if lines.is_empty() {
        return false;
    }
    let short = lines.iter().filter(|l| l.is_short(short_threshold)).count();
    let long = lines.len() - short;
    short <= long
}

/// Filtering outcome: the stripped document plus removal counts.
#[derive(Debug, Clone)]
pub struct FilteredDocument {
    pub document: Document,
    pub head_removed: usize,
    pub tail_removed: usize,
}

/// Applies head/tail stripping, then the short-line bin filter on the
/// stripped result.
pub fn filter_document(
    mut doc: Document,
    short_threshold: usize,
) -> Result<FilteredDocument, RejectionReason> {
    let strip = strip_head_tail(doc.lines(), short_threshold);
    if strip.kept.is_empty() {
        return Err(RejectionReason::EmptyAfterStrip);
    }
    doc.retain_range(strip.kept.clone());
    if !short_line_bin_keep(doc.lines(), short_threshold) {
        return Err(RejectionReason::ShortLineMajority);
    }
    Ok(FilteredDocument {
        document: doc,
        head_removed: strip.head_removed,
        tail_removed: strip.tail_removed,
    })
}

/// Convenience for the default 100-character short-line threshold.
pub fn filter_document_default(doc: Document) -> Result<FilteredDocument, RejectionReason> {
    filter_document(doc, SHORT_LINE_CHARS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{split_lines, RecordHeaders};

    fn long(text: &str) -> String {
        // Pad to 120 chars so the line lands firmly in the long bin.
        let mut s = String::from(text);
        while s.chars().count() < 120 {
            s.push('x');
        }
        s
    }

    fn lines_of(texts: &[String]) -> Vec<Line> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| Line::new(i, t.clone()))
            .collect()
    }

    /// The 11-line boilerplate example: 4 short head lines, 4 long body
    /// lines, 3 short tail lines. Only the body survives.
    pub(crate) fn boilerplate_fixture() -> Vec<String> {
        let lorem = long("Lorem Ipsum Dolor Sit Amet, consectetur adipiscing elit, sed do eiusmod tempor incididunt ut labore ");
        vec![
            "Home".to_string(),
            "Login".to_string(),
            "Sign Up".to_string(),
            "Welcome to my Website".to_string(),
            lorem.clone(),
            lorem.clone(),
            lorem.clone(),
            lorem,
            "Copyright Myself".to_string(),
            "Legal".to_string(),
            "Contact".to_string(),
        ]
    }

    #[test]
    fn strips_boilerplate_head_and_tail() {
        let texts = boilerplate_fixture();
        let lines = lines_of(&texts);
        let strip = strip_head_tail(&lines, SHORT_LINE_CHARS);
        assert_eq!(strip.kept, 4..8);
        assert_eq!(strip.head_removed, 4);
        assert_eq!(strip.tail_removed, 3);
        for line in &lines[strip.kept.clone()] {
            assert!(line.text.starts_with("Lorem Ipsum"));
        }
    }

    #[test]
    fn no_short_runs_means_no_removal() {
        let texts: Vec<String> = (0..4).map(|i| long(&format!("line {i} "))).collect();
        let lines = lines_of(&texts);
        let strip = strip_head_tail(&lines, SHORT_LINE_CHARS);
        assert_eq!(strip.kept, 0..4);
        assert_eq!((strip.head_removed, strip.tail_removed), (0, 0));
    }

    #[test]
    fn interior_short_lines_survive() {
        let texts = vec![
            "short".to_string(),
            long("alpha "),
            "short".to_string(),
            long("beta "),
            "short".to_string(),
        ];
        let lines = lines_of(&texts);
        let strip = strip_head_tail(&lines, SHORT_LINE_CHARS);
        assert_eq!(strip.kept, 1..4);
        assert_eq!(strip.head_removed, 1);
        assert_eq!(strip.tail_removed, 1);
        assert!(lines[strip.kept.clone()][1].is_short(SHORT_LINE_CHARS));
    }

    #[test]
    fn all_short_document_strips_to_nothing() {
        let texts: Vec<String> = (0..10).map(|i| format!("s{i}")).collect();
        let lines = lines_of(&texts);
        let strip = strip_head_tail(&lines, SHORT_LINE_CHARS);
        assert!(strip.kept.is_empty());
        assert_eq!(strip.head_removed, 10);
        assert_eq!(strip.tail_removed, 0);
    }

    #[test]
    fn strip_is_idempotent() {
        let texts = boilerplate_fixture();
        let lines = lines_of(&texts);
        let first = strip_head_tail(&lines, SHORT_LINE_CHARS);
        let kept: Vec<Line> = lines[first.kept.clone()].to_vec();
        let second = strip_head_tail(&kept, SHORT_LINE_CHARS);
        assert_eq!(second.kept, 0..kept.len());
        assert_eq!((second.head_removed, second.tail_removed), (0, 0));
    }

    #[test]
    fn bin_filter_counts() {
        let short = || "s".to_string();
        // 3 short + 2 long -> discard
        let texts = vec![short(), short(), short(), long("a "), long("b ")];
        assert!(!short_line_bin_keep(&lines_of(&texts), SHORT_LINE_CHARS));
        // 2 short + 3 long -> keep
        let texts = vec![short(), short(), long("a "), long("b "), long("c ")];
        assert!(short_line_bin_keep(&lines_of(&texts), SHORT_LINE_CHARS));
        // 2 short + 2 long -> tie keeps
        let texts = vec![short(), short(), long("a "), long("b ")];
        assert!(short_line_bin_keep(&lines_of(&texts), SHORT_LINE_CHARS));
        // empty -> discard
        assert!(!short_line_bin_keep(&[], SHORT_LINE_CHARS));
    }

    #[test]
    fn empty_lines_count_as_short() {
        let texts = vec![String::new(), String::new(), long("a ")];
        assert!(!short_line_bin_keep(&lines_of(&texts), SHORT_LINE_CHARS));
    }

    fn doc_of(texts: &[String]) -> Document {
        let body = texts.join("\n");
        Document::new(
            split_lines(&body),
            RecordHeaders {
                target_uri: "http://example.com/".into(),
                record_id: "<urn:uuid:t>".into(),
                date: "2021-11-01T00:00:00Z".into(),
                content_type: "text/plain".into(),
            },
        )
    }

    #[test]
    fn filter_keeps_boilerplate_body() {
        let doc = doc_of(&boilerplate_fixture());
        let filtered = filter_document_default(doc).unwrap();
        assert_eq!(filtered.document.line_count(), 4);
        assert_eq!(filtered.head_removed, 4);
        assert_eq!(filtered.tail_removed, 3);
        for line in filtered.document.lines() {
            assert!(line.text.starts_with("Lorem Ipsum"));
        }
    }

    #[test]
    fn filter_rejects_all_short_document() {
        let texts: Vec<String> = (0..10).map(|i| format!("s{i}")).collect();
        let err = filter_document_default(doc_of(&texts)).unwrap_err();
        assert_eq!(err, RejectionReason::EmptyAfterStrip);
    }

    #[test]
    fn filter_rejects_short_majority_interior() {
        // Stripped result: long, s, s, long, s, s, long -> 4 short vs 3 long.
        let texts = vec![
            long("a "),
            "s".to_string(),
            "s".to_string(),
            long("b "),
            "s".to_string(),
            "s".to_string(),
            long("c "),
        ];
        let err = filter_document_default(doc_of(&texts)).unwrap_err();
        assert_eq!(err, RejectionReason::ShortLineMajority);
    }

    #[test]
    fn kept_lines_are_contiguous_slice_of_input() {
        let texts = vec![
            "a".to_string(),
            long("one "),
            "b".to_string(),
            long("two "),
            "c".to_string(),
        ];
        let doc = doc_of(&texts);
        let original: Vec<String> = doc.lines().iter().map(|l| l.text.clone()).collect();
        let filtered = filter_document_default(doc).unwrap();
        let kept: Vec<String> = filtered
            .document
            .lines()
            .iter()
            .map(|l| l.text.clone())
            .collect();
        let found = original
            .windows(kept.len())
            .any(|w| w.iter().map(String::as_str).eq(kept.iter().map(String::as_str)));
        assert!(found, "kept lines must be a contiguous window of the input");
    }
}
