/*! Corpus audit reports and the generation-cost estimator.

All reports read the output JSONL layout and reduce associatively, so
shard-parallel map+merge stays order-independent. "Words" are maximal runs
of non-whitespace; that is a good size proxy for Latin or Cyrillic scripts
and a knowingly misleading one for languages written without spaces.
!*/

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::schema::{CorpusRecord, MULTILINGUAL_TAG};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("cannot read corpus: {0}")]
    Io(#[from] std::io::Error),
    #[error("term must not be empty")]
    EmptyTerm,
    #[error("no multilingual corpus at {0}")]
    NoMultilingualCorpus(String),
    #[error("multilingual integrity violated: document {uri} has {languages} language(s)")]
    MultilingualIntegrity { uri: String, languages: usize },
    #[error("carbon parameters must be positive ({0})")]
    InvalidCarbonParams(&'static str),
    #[error("energy must be nonnegative")]
    NegativeEnergy,
}

/// Iterates records across one `.jsonl` file or every `*.jsonl` in a
/// directory (sorted); unparseable lines are skipped and counted.
pub struct CorpusReader {
    files: std::vec::IntoIter<PathBuf>,
    current: Option<BufReader<File>>,
    skipped: u64,
}

impl CorpusReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StatsError> {
        let path = path.as_ref();
        let mut files: Vec<PathBuf> = if path.is_dir() {
            std::fs::read_dir(path)?
                .filter_map(|e| e.ok())
                .map(|e| e.path())
                .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "jsonl"))
                .collect()
        } else {
            vec![path.to_path_buf()]
        };
        files.sort();
        Ok(CorpusReader {
            files: files.into_iter(),
            current: None,
            skipped: 0,
        })
    }

    /// Lines that failed to parse as corpus records.
    pub fn skipped(&self) -> u64 {
        self.skipped
    }
}

impl Iterator for CorpusReader {
    type Item = CorpusRecord;

    fn next(&mut self) -> Option<CorpusRecord> {
        loop {
            if self.current.is_none() {
                let path = self.files.next()?;
                match File::open(&path) {
                    Ok(f) => self.current = Some(BufReader::new(f)),
                    Err(e) => {
                        log::warn!("cannot open corpus file {}: {e}", path.display());
                        self.skipped += 1;
                        continue;
                    }
                }
            }
            let reader = self.current.as_mut().expect("reader set above");
            let mut line = String::new();
            match reader.read_line(&mut line) {
                Ok(0) => {
                    self.current = None;
                    continue;
                }
                Ok(_) => {
                    if line.trim().is_empty() {
                        continue;
                    }
                    match serde_json::from_str::<CorpusRecord>(&line) {
                        Ok(record) => return Some(record),
                        Err(_) => {
                            self.skipped += 1;
                            continue;
                        }
                    }
                }
                Err(e) => {
                    log::warn!("read error, dropping rest of file: {e}");
                    self.skipped += 1;
                    self.current = None;
                    continue;
                }
            }
        }
    }
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LanguageStats {
    pub size_bytes: u64,
    pub documents: u64,
    pub words: u64,
}

/// Per-language corpus totals over content only (metadata excluded).
#[derive(Debug, Default, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusStats {
    pub languages: BTreeMap<String, LanguageStats>,
    pub skipped_records: u64,
}

impl CorpusStats {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("language\tsize_bytes\tdocuments\twords\n");
        for (lang, s) in &self.languages {
            let _ = writeln!(out, "{lang}\t{}\t{}\t{}", s.size_bytes, s.documents, s.words);
        }
        out
    }
}

pub fn corpus_size_report(corpus: impl AsRef<Path>) -> Result<CorpusStats, StatsError> {
    let mut reader = CorpusReader::open(corpus)?;
    let mut stats = CorpusStats::default();
    for record in reader.by_ref() {
        let entry = stats
            .languages
            .entry(record.metadata.identification.label.clone())
            .or_default();
        entry.size_bytes += record.content.len() as u64;
        entry.documents += 1;
        entry.words += record.content.split_whitespace().count() as u64;
    }
    stats.skipped_records = reader.skipped();
    Ok(stats)
}

/// Documents per annotation label, plus totals. A document with k
/// annotations contributes to k labels; clean documents have none.
#[derive(Debug, Default, Clone, PartialEq, Eq, Serialize)]
pub struct AnnotationDistribution {
    pub counts: BTreeMap<String, u64>,
    pub clean: u64,
    pub total: u64,
    pub skipped_records: u64,
}

impl AnnotationDistribution {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("annotation\tdocuments\n");
        for (label, count) in &self.counts {
            let _ = writeln!(out, "{label}\t{count}");
        }
        let _ = writeln!(out, "clean\t{}", self.clean);
        let _ = writeln!(out, "total\t{}", self.total);
        out
    }
}

pub fn annotation_distribution(
    corpus: impl AsRef<Path>,
) -> Result<AnnotationDistribution, StatsError> {
    let mut reader = CorpusReader::open(corpus)?;
    let mut dist = AnnotationDistribution::default();
    for record in reader.by_ref() {
        dist.total += 1;
        match &record.metadata.annotation {
            None => dist.clean += 1,
            Some(labels) if labels.is_empty() => dist.clean += 1,
            Some(labels) => {
                for label in labels {
                    *dist.counts.entry(label.clone()).or_default() += 1;
                }
            }
        }
    }
    dist.skipped_records = reader.skipped();
    Ok(dist)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairCount {
    pub languages: (String, String),
    pub count: u64,
}

/// Unordered language-pair co-occurrence over the multilingual corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CooccurrenceReport {
    /// Pairs at or above the display threshold, sorted by descending count.
    pub pairs: Vec<PairCount>,
    pub display_threshold: u64,
    /// Sum over documents of C(k, 2), regardless of threshold.
    pub total_pair_increments: u64,
    pub documents: u64,
    pub skipped_records: u64,
}

impl CooccurrenceReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("language_1\tlanguage_2\tcount\n");
        for p in &self.pairs {
            let _ = writeln!(out, "{}\t{}\t{}", p.languages.0, p.languages.1, p.count);
        }
        out
    }
}

/// Distinct identified languages of one record, from its line identifications.
fn record_languages(record: &CorpusRecord) -> Vec<String> {
    let mut langs: Vec<String> = record
        .metadata
        .sentence_identifications
        .iter()
        .flatten()
        .map(|id| id.label.clone())
        .collect();
    langs.sort();
    langs.dedup();
    langs
}

/// Counts unordered language pairs over a multilingual corpus. `corpus` may
/// be the corpus directory (its `multi_meta.jsonl` is used) or a direct file
/// path. The display threshold only filters the report; full counts are
/// always computed.
pub fn language_cooccurrence(
    corpus: impl AsRef<Path>,
    display_threshold: u64,
) -> Result<CooccurrenceReport, StatsError> {
    let path = corpus.as_ref();
    let file = if path.is_dir() {
        let multi = path.join(format!("{MULTILINGUAL_TAG}_meta.jsonl"));
        if !multi.is_file() {
            return Err(StatsError::NoMultilingualCorpus(path.display().to_string()));
        }
        multi
    } else {
        path.to_path_buf()
    };
    let mut reader = CorpusReader::open(&file)?;
    let mut counts: BTreeMap<(String, String), u64> = BTreeMap::new();
    let mut documents = 0u64;
    let mut total_pair_increments = 0u64;
    for record in reader.by_ref() {
        documents += 1;
        let langs = record_languages(&record);
        if langs.len() < 2 {
            return Err(StatsError::MultilingualIntegrity {
                uri: record.warc_headers.target_uri.clone(),
                languages: langs.len(),
            });
        }
        for i in 0..langs.len() {
            for j in (i + 1)..langs.len() {
                *counts
                    .entry((langs[i].clone(), langs[j].clone()))
                    .or_default() += 1;
                total_pair_increments += 1;
            }
        }
    }
    let mut pairs: Vec<PairCount> = counts
        .into_iter()
        .filter(|(_, count)| *count >= display_threshold)
        .map(|(languages, count)| PairCount { languages, count })
        .collect();
    pairs.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.languages.cmp(&b.languages)));
    Ok(CooccurrenceReport {
        pairs,
        display_threshold,
        total_pair_increments,
        documents,
        skipped_records: reader.skipped(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TermCountReport {
    pub term: String,
    pub occurrences: u64,
    pub documents_searched: u64,
    pub skipped_records: u64,
}

impl TermCountReport {
    pub fn to_tsv(&self) -> String {
        format!("term\toccurrences\n{}\t{}\n", self.term, self.occurrences)
    }
}

/// Case-insensitive, non-overlapping occurrence count of `term` across all
/// content. Substring matching: no per-language word boundaries are
/// invented.
pub fn term_count(corpus: impl AsRef<Path>, term: &str) -> Result<TermCountReport, StatsError> {
    if term.is_empty() {
        return Err(StatsError::EmptyTerm);
    }
    let needle = term.to_lowercase();
    let mut reader = CorpusReader::open(corpus)?;
    let mut occurrences = 0u64;
    let mut documents_searched = 0u64;
    for record in reader.by_ref() {
        documents_searched += 1;
        occurrences += record.content.to_lowercase().matches(&needle).count() as u64;
    }
    Ok(TermCountReport {
        term: term.to_string(),
        occurrences,
        documents_searched,
        skipped_records: reader.skipped(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroupStats {
    pub documents: u64,
    pub mean: f64,
    pub stdev: f64,
    /// Statistics after dropping the top and bottom 5% by length.
    pub trimmed_mean: f64,
    pub trimmed_stdev: f64,
    pub trimmed_documents: u64,
}

/// Content-length statistics split by annotation presence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct CleanLengthStats {
    pub clean: Option<GroupStats>,
    pub annotated: Option<GroupStats>,
    pub skipped_records: u64,
}

impl CleanLengthStats {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(
            "group\tdocuments\tmean\tstdev\ttrimmed_mean\ttrimmed_stdev\ttrimmed_documents\n",
        );
        for (name, group) in [("clean", &self.clean), ("annotated", &self.annotated)] {
            if let Some(g) = group {
                let _ = writeln!(
                    out,
                    "{name}\t{}\t{}\t{}\t{}\t{}\t{}",
                    g.documents, g.mean, g.stdev, g.trimmed_mean, g.trimmed_stdev,
                    g.trimmed_documents
                );
            }
        }
        out
    }
}

fn mean_stdev(values: &[u64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = values
        .iter()
        .map(|&v| {
            let d = v as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    (mean, var.sqrt())
}

fn group_stats(mut lengths: Vec<u64>) -> Option<GroupStats> {
    if lengths.is_empty() {
        return None;
    }
    let (mean, stdev) = mean_stdev(&lengths);
    lengths.sort_unstable();
    let n = lengths.len();
    let k = (n as f64 * 0.05).floor() as usize;
    let trimmed = &lengths[k..n - k];
    let (trimmed_mean, trimmed_stdev) = mean_stdev(trimmed);
    Some(GroupStats {
        documents: n as u64,
        mean,
        stdev,
        trimmed_mean,
        trimmed_stdev,
        trimmed_documents: trimmed.len() as u64,
    })
}

/// Compares document content lengths (bytes) between clean and annotated
/// documents; the trimmed variants drop the top and bottom 5% of each group.
pub fn clean_length_stats(corpus: impl AsRef<Path>) -> Result<CleanLengthStats, StatsError> {
    let mut reader = CorpusReader::open(corpus)?;
    let mut clean: Vec<u64> = Vec::new();
    let mut annotated: Vec<u64> = Vec::new();
    for record in reader.by_ref() {
        let len = record.content.len() as u64;
        let is_clean = record
            .metadata
            .annotation
            .as_ref()
            .is_none_or(|a| a.is_empty());
        if is_clean {
            clean.push(len);
        } else {
            annotated.push(len);
        }
    }
    Ok(CleanLengthStats {
        clean: group_stats(clean),
        annotated: group_stats(annotated),
        skipped_records: reader.skipped(),
    })
}

/// Inputs of the generation-cost estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CarbonParams {
    pub runtime_hours: f64,
    pub cpu_count: u32,
    pub cpu_power_watts: f64,
    pub dram_power_watts: f64,
    /// Power Usage Effectiveness; 1.58 is the 2018 global datacenter average.
    pub pue: f64,
    /// Grid carbon intensity in kg CO2e per kWh.
    pub intensity_kg_per_kwh: f64,
}

pub const DEFAULT_PUE: f64 = 1.58;
pub const DEFAULT_INTENSITY_KG_PER_KWH: f64 = 0.03864;

impl CarbonParams {
    pub fn new(runtime_hours: f64, cpu_count: u32, cpu_power_watts: f64, dram_power_watts: f64) -> Self {
        CarbonParams {
            runtime_hours,
            cpu_count,
            cpu_power_watts,
            dram_power_watts,
            pue: DEFAULT_PUE,
            intensity_kg_per_kwh: DEFAULT_INTENSITY_KG_PER_KWH,
        }
    }

    fn validate(&self) -> Result<(), StatsError> {
        // NaN fails every check below.
        fn positive(v: f64) -> bool {
            v.is_finite() && v > 0.0
        }
        if !positive(self.runtime_hours) {
            return Err(StatsError::InvalidCarbonParams("runtime_hours"));
        }
        if self.cpu_count == 0 {
            return Err(StatsError::InvalidCarbonParams("cpu_count"));
        }
        if !positive(self.cpu_power_watts) {
            return Err(StatsError::InvalidCarbonParams("cpu_power_watts"));
        }
        if !positive(self.dram_power_watts) {
            return Err(StatsError::InvalidCarbonParams("dram_power_watts"));
        }
        if !(self.pue.is_finite() && self.pue >= 1.0) {
            return Err(StatsError::InvalidCarbonParams("pue"));
        }
        if !positive(self.intensity_kg_per_kwh) {
            return Err(StatsError::InvalidCarbonParams("intensity_kg_per_kwh"));
        }
        Ok(())
    }
}

/// Total power in kWh: PUE x t x (c x cpu_watts + dram_watts) / 1000.
pub fn power_consumption(params: &CarbonParams) -> Result<f64, StatsError> {
    params.validate()?;
    Ok(params.pue
        * params.runtime_hours
        * (params.cpu_count as f64 * params.cpu_power_watts + params.dram_power_watts)
        / 1000.0)
}

/// CO2-equivalent emissions in kg for `kwh` of consumption.
pub fn co2e(kwh: f64, intensity_kg_per_kwh: f64) -> Result<f64, StatsError> {
    if kwh < 0.0 || intensity_kg_per_kwh < 0.0 {
        return Err(StatsError::NegativeEnergy);
    }
    Ok(kwh * intensity_kg_per_kwh)
}
