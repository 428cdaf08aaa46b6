/*! Exact line-level deduplication.

Keeps the first occurrence of every distinct line, preserving order, for
line-oriented corpus exports. Document-structured corpora are NOT run
through this: removing repeated lines inside documents would destroy their
integrity, so the tool only targets one-line-per-record layouts.

Distinct lines are tracked by 128-bit content digest; `verify_bytes` keeps
the full line bytes instead, trading memory for immunity to digest
collisions.
!*/

use std::collections::HashSet;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use thiserror::Error;
use twox_hash::XxHash3_128;

#[derive(Debug, Error)]
pub enum DedupError {
    #[error("dedup i/o failed: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DedupReport {
    pub input_lines: u64,
    pub kept_lines: u64,
    pub removed_lines: u64,
}

enum SeenSet {
    Digests(HashSet<u128>),
    Bytes(HashSet<Vec<u8>>),
}

/// First-occurrence filter over exact line bytes.
pub struct LineDeduper {
    seen: SeenSet,
}

impl LineDeduper {
    pub fn new(verify_bytes: bool) -> Self {
        let seen = if verify_bytes {
            SeenSet::Bytes(HashSet::new())
        } else {
            SeenSet::Digests(HashSet::new())
        };
        LineDeduper { seen }
    }

    /// True exactly once per distinct line.
    pub fn is_first(&mut self, line: &[u8]) -> bool {
        match &mut self.seen {
            SeenSet::Digests(set) => set.insert(XxHash3_128::oneshot(line)),
            SeenSet::Bytes(set) => {
                if set.contains(line) {
                    false
                } else {
                    set.insert(line.to_vec());
                    true
                }
            }
        }
    }
}

/// Adapter keeping the first occurrence of each distinct line, in order.
pub fn dedup_lines<I, T>(lines: I) -> impl Iterator<Item = T>
where
    I: IntoIterator<Item = T>,
    T: AsRef<[u8]>,
{
    let mut deduper = LineDeduper::new(false);
    lines
        .into_iter()
        .filter(move |line| deduper.is_first(line.as_ref()))
}

/// Streams `input` to `output`, dropping duplicate lines. Line content is
/// the bytes up to (not including) the `\n` terminator; original bytes of
/// kept lines are written through unchanged.
pub fn dedup_stream(
    mut input: impl BufRead,
    mut output: impl Write,
    verify_bytes: bool,
) -> Result<DedupReport, DedupError> {
    let mut deduper = LineDeduper::new(verify_bytes);
    let mut report = DedupReport::default();
    let mut buf: Vec<u8> = Vec::new();
    loop {
        buf.clear();
        let n = input.read_until(b'\n', &mut buf)?;
        if n == 0 {
            break;
        }
        report.input_lines += 1;
        let content = match buf.last() {
            Some(b'\n') => &buf[..buf.len() - 1],
            _ => &buf[..],
        };
        if deduper.is_first(content) {
            report.kept_lines += 1;
            output.write_all(&buf)?;
        } else {
            report.removed_lines += 1;
        }
    }
    output.flush()?;
    Ok(report)
}

/// File-to-file deduplication. I/O errors are fatal and remove any partial
/// output.
pub fn dedup_corpus_file(
    in_path: impl AsRef<Path>,
    out_path: impl AsRef<Path>,
    verify_bytes: bool,
) -> Result<DedupReport, DedupError> {
    let in_path = in_path.as_ref();
    let out_path = out_path.as_ref();
    let run = || -> Result<DedupReport, DedupError> {
        let input = BufReader::new(std::fs::File::open(in_path)?);
        let output = BufWriter::new(std::fs::File::create(out_path)?);
        dedup_stream(input, output, verify_bytes)
    };
    match run() {
        Ok(report) => Ok(report),
        Err(e) => {
            let _ = std::fs::remove_file(out_path);
            Err(e)
        }
    }
}
