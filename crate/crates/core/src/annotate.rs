/*! Non-destructive quality annotations.

Annotations mark but never modify documents: length-based labels (tiny,
short_sentences, header, footer), a Unicode-category noise ratio, and
adult-content matching against UT1-style domain/URL blocklists. A document
with no annotations is "clean".
!*/

use std::collections::{BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use thiserror::Error;
use unicode_general_category::{get_general_category, GeneralCategory};

use crate::model::{Annotation, Document, Line, SHORT_LINE_CHARS};

/// Annotation thresholds. The defaults are the production values; every
/// knob stays overridable for experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotateParams {
    /// Documents with at most this many lines are `tiny`.
    pub tiny_max_lines: usize,
    /// Lines shorter than this many chars count as short.
    pub short_line_chars: usize,
    /// `short_sentences` when short lines reach this fraction of all lines.
    pub short_ratio: f64,
    /// Window size inspected at each end for `header` / `footer`.
    pub edge_window: usize,
    /// Short lines required within a full window to trigger the annotation;
    /// scaled up proportionally (ceiling) when the document is smaller than
    /// the window.
    pub edge_required: usize,
    /// `noisy` when the letter ratio falls strictly below this.
    pub noise_threshold: f64,
}

impl Default for AnnotateParams {
    fn default() -> Self {
        AnnotateParams {
            tiny_max_lines: 5,
            short_line_chars: SHORT_LINE_CHARS,
            short_ratio: 0.5,
            edge_window: 5,
            edge_required: 3,
            noise_threshold: 0.5,
        }
    }
}

/// Length-based annotations over the document lines.
pub fn annotate_length(lines: &[Line], params: &AnnotateParams) -> BTreeSet<Annotation> {
    let mut out = BTreeSet::new();
    let n = lines.len();
    if n <= params.tiny_max_lines {
        out.insert(Annotation::Tiny);
    }
    if n > 0 {
        let short = lines
            .iter()
            .filter(|l| l.is_short(params.short_line_chars))
            .count();
        if short as f64 >= params.short_ratio * n as f64 {
            out.insert(Annotation::ShortSentences);
        }
        let window = params.edge_window.min(n);
        // ceil(required * window / edge_window) keeps the same majority on
        // documents smaller than the window.
        let required = (params.edge_required * window).div_ceil(params.edge_window);
        let head_short = lines[..window]
            .iter()
            .filter(|l| l.is_short(params.short_line_chars))
            .count();
        if head_short >= required {
            out.insert(Annotation::Header);
        }
        let tail_short = lines[n - window..]
            .iter()
            .filter(|l| l.is_short(params.short_line_chars))
            .count();
        if tail_short >= required {
            out.insert(Annotation::Footer);
        }
    }
    out
}

fn is_letter_or_mark(c: char) -> bool {
    matches!(
        get_general_category(c),
        GeneralCategory::UppercaseLetter
            | GeneralCategory::LowercaseLetter
            | GeneralCategory::TitlecaseLetter
            | GeneralCategory::ModifierLetter
            | GeneralCategory::OtherLetter
            | GeneralCategory::NonspacingMark
            | GeneralCategory::SpacingMark
            | GeneralCategory::EnclosingMark
    )
}

/// Ratio of letters and combining marks (Lu, Ll, Lt, Lm, Lo, Mn, Mc, Me)
/// over all non-whitespace characters. Empty or all-whitespace text is 0.
pub fn letter_ratio(text: &str) -> f64 {
    let mut letters = 0u64;
    let mut non_whitespace = 0u64;
    for c in text.chars() {
        if c.is_whitespace() {
            continue;
        }
        non_whitespace += 1;
        if is_letter_or_mark(c) {
            letters += 1;
        }
    }
    if non_whitespace == 0 {
        return 0.0;
    }
    letters as f64 / non_whitespace as f64
}

/// True when the full document text is letter-poor (ratio strictly below
/// the threshold).
pub fn is_noisy(content: &str, params: &AnnotateParams) -> bool {
    letter_ratio(content) < params.noise_threshold
}

#[derive(Debug, Error)]
pub enum BlocklistError {
    #[error("cannot read blocklist: {0}")]
    Io(#[from] std::io::Error),
    #[error("blocklist directory {0} has neither a `domains` nor a `urls` file")]
    EmptyBlocklist(String),
}

/// Compiled domain and URL-prefix sets for one blocklist category.
///
/// Domains match hosts exactly or as a label-boundary suffix; URL prefixes
/// match the scheme-stripped, `www.`-stripped URI at a path boundary.
/// Matching is case-insensitive (entries and probes are lowercased).
#[derive(Debug, Default)]
pub struct Blocklist {
    category: String,
    domains: HashSet<String>,
    url_prefixes: HashSet<String>,
}

/// Outcome of matching a target URI against a blocklist.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdultMatch {
    Matched,
    NotMatched,
    UnparseableUri,
}

fn normalize_domain(entry: &str) -> Option<String> {
    let entry = entry.trim().trim_end_matches('.').to_lowercase();
    if entry.is_empty() {
        None
    } else {
        Some(entry)
    }
}

fn normalize_url_entry(entry: &str) -> Option<String> {
    let mut entry = entry.trim();
    if let Some(idx) = entry.find("://") {
        entry = &entry[idx + 3..];
    }
    let mut entry = entry.to_lowercase();
    if let Some(stripped) = entry.strip_prefix("www.") {
        entry = stripped.to_string();
    }
    let entry = entry.trim_end_matches('/').to_string();
    if entry.is_empty() {
        None
    } else {
        Some(entry)
    }
}

fn read_entries(
    path: &Path,
    normalize: impl Fn(&str) -> Option<String>,
) -> Result<HashSet<String>, BlocklistError> {
    let mut out = HashSet::new();
    let reader = BufReader::new(File::open(path)?);
    for line in reader.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(entry) = normalize(line) {
            out.insert(entry);
        }
    }
    Ok(out)
}

/// Loads one UT1-style category directory holding `domains` and/or `urls`
/// files (one entry per line, `#` comments allowed).
pub fn load_ut1(dir: impl AsRef<Path>) -> Result<Blocklist, BlocklistError> {
    let dir = dir.as_ref();
    let category = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "unknown".to_string());
    let domains_path = dir.join("domains");
    let urls_path = dir.join("urls");
    if !domains_path.is_file() && !urls_path.is_file() {
        return Err(BlocklistError::EmptyBlocklist(dir.display().to_string()));
    }
    let domains = if domains_path.is_file() {
        read_entries(&domains_path, normalize_domain)?
    } else {
        HashSet::new()
    };
    let url_prefixes = if urls_path.is_file() {
        read_entries(&urls_path, normalize_url_entry)?
    } else {
        HashSet::new()
    };
    Ok(Blocklist {
        category,
        domains,
        url_prefixes,
    })
}

impl Blocklist {
    pub fn category(&self) -> &str {
        &self.category
    }

    pub fn domain_count(&self) -> usize {
        self.domains.len()
    }

    pub fn url_count(&self) -> usize {
        self.url_prefixes.len()
    }

    /// Host match: exact, or a suffix at a dot boundary (so
    /// `m.example.com` matches entry `example.com` but
    /// `notexample.com` does not).
    fn matches_host(&self, host: &str) -> bool {
        if self.domains.is_empty() {
            return false;
        }
        if self.domains.contains(host) {
            return true;
        }
        let mut rest = host;
        while let Some(dot) = rest.find('.') {
            rest = &rest[dot + 1..];
            if self.domains.contains(rest) {
                return true;
            }
        }
        false
    }

    /// URL-prefix match at a path boundary: the probe is truncated at each
    /// `/`, `?` and `#`, and every truncation is looked up.
    fn matches_url(&self, probe: &str) -> bool {
        if self.url_prefixes.is_empty() {
            return false;
        }
        for (idx, c) in probe.char_indices() {
            if matches!(c, '/' | '?' | '#') && self.url_prefixes.contains(&probe[..idx]) {
                return true;
            }
        }
        self.url_prefixes.contains(probe.trim_end_matches('/'))
    }

    /// Matches a full target URI against both entry sets.
    pub fn matches_uri(&self, target_uri: &str) -> AdultMatch {
        let parsed = match url::Url::parse(target_uri) {
            Ok(u) => u,
            Err(_) => return AdultMatch::UnparseableUri,
        };
        let host = match parsed.host_str() {
            Some(h) => h.to_lowercase(),
            None => return AdultMatch::UnparseableUri,
        };
        if self.matches_host(&host) {
            return AdultMatch::Matched;
        }
        let host_stripped = host.strip_prefix("www.").unwrap_or(&host);
        let mut probe = String::with_capacity(target_uri.len());
        probe.push_str(host_stripped);
        probe.push_str(&parsed.path().to_lowercase());
        if let Some(query) = parsed.query() {
            probe.push('?');
            probe.push_str(&query.to_lowercase());
        }
        if self.matches_url(&probe) {
            AdultMatch::Matched
        } else {
            AdultMatch::NotMatched
        }
    }
}

/// Adult annotation for one target URI. Unparseable URIs yield no
/// annotation; the caller counts them.
pub fn annotate_adult(target_uri: &str, blocklist: &Blocklist) -> AdultMatch {
    blocklist.matches_uri(target_uri)
}

/// Per-document annotation outcome bookkeeping.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct AnnotateOutcome {
    pub unparseable_uri: bool,
}

/// Applies every annotator to the document: the union of the length,
/// noise and adult annotations. Content bytes are untouched.
pub fn annotate_document(
    doc: &mut Document,
    blocklist: Option<&Blocklist>,
    params: &AnnotateParams,
) -> AnnotateOutcome {
    let mut outcome = AnnotateOutcome::default();
    let length = annotate_length(doc.lines(), params);
    doc.extend_annotations(length);
    if is_noisy(&doc.content(), params) {
        doc.add_annotation(Annotation::Noisy);
    }
    if let Some(blocklist) = blocklist {
        match annotate_adult(&doc.headers().target_uri, blocklist) {
            AdultMatch::Matched => doc.add_annotation(Annotation::Adult),
            AdultMatch::NotMatched => {}
            AdultMatch::UnparseableUri => outcome.unparseable_uri = true,
        }
    }
    outcome
}
