/*! Record ingestion.

Streams [`RawRecord`]s out of WARC/1.0-framed WET files ("conversion"
records, plain or gzip — detected by magic bytes, not extension) and out of
plain-text fixture directories. Per-record problems (malformed framing,
non-conversion types, invalid UTF-8 bodies) are counted and skipped;
only an unreadable source is fatal.
!*/

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::model::RawRecord;

/// Do not buffer absurd Content-Length claims from broken framing.
const MAX_RECORD_BYTES: u64 = 1 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Compression {
    None,
    Gzip,
}

/// A WET file on disk with its detected compression.
#[derive(Debug, Clone)]
pub struct WetSource {
    pub path: PathBuf,
    pub compression: Compression,
}

impl WetSource {
    /// Sniffs compression from the gzip magic bytes; mirrors are full of
    /// misnamed files, so the extension is ignored.
    pub fn detect(path: impl Into<PathBuf>) -> std::io::Result<Self> {
        let path = path.into();
        let mut magic = [0u8; 2];
        let n = File::open(&path)?.read(&mut magic)?;
        let compression = if n == 2 && magic == [0x1f, 0x8b] {
            Compression::Gzip
        } else {
            Compression::None
        };
        Ok(WetSource { path, compression })
    }
}

/// Per-source ingestion accounting. `yielded + skipped()` equals the number
/// of framed records encountered (malformed framing counts one per resync).
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IngestCounters {
    pub yielded: u64,
    /// Broken framing, unusable headers, or truncated payloads.
    pub malformed: u64,
    /// Records whose WARC-Type is not "conversion".
    pub non_conversion: u64,
    /// Conversion records whose body is not valid UTF-8.
    pub invalid_utf8: u64,
}

impl IngestCounters {
    pub fn skipped(&self) -> u64 {
        self.malformed + self.non_conversion + self.invalid_utf8
    }

    pub fn framed(&self) -> u64 {
        self.yielded + self.skipped()
    }

    pub fn merge(&mut self, other: &IngestCounters) {
        self.yielded += other.yielded;
        self.malformed += other.malformed;
        self.non_conversion += other.non_conversion;
        self.invalid_utf8 += other.invalid_utf8;
    }
}

enum StreamKind {
    Wet {
        reader: Box<dyn BufRead + Send>,
        resyncing: bool,
        done: bool,
    },
    Fixtures {
        files: std::vec::IntoIter<PathBuf>,
    },
}

/// An iterator of records from one source; problems are skipped and counted.
pub struct RecordStream {
    kind: StreamKind,
    counters: IngestCounters,
}

impl RecordStream {
    pub fn counters(&self) -> IngestCounters {
        self.counters
    }
}

/// Opens a WET source for streaming. Unreadable files fail here; everything
/// after is per-record accounting.
pub fn open_wet(source: &WetSource) -> std::io::Result<RecordStream> {
    let file = File::open(&source.path)?;
    let reader: Box<dyn BufRead + Send> = match source.compression {
        Compression::None => Box::new(BufReader::new(file)),
        Compression::Gzip => Box::new(BufReader::new(flate2::read::MultiGzDecoder::new(file))),
    };
    Ok(RecordStream {
        kind: StreamKind::Wet {
            reader,
            resyncing: false,
            done: false,
        },
        counters: IngestCounters::default(),
    })
}

/// Opens a directory of `*.txt` fixture files, one document body per file,
/// in lexicographic filename order. The target URI is synthesized as
/// `file:///<name>`.
pub fn open_fixture_dir(path: impl AsRef<Path>) -> std::io::Result<RecordStream> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "txt"))
        .collect();
    files.sort();
    Ok(RecordStream {
        kind: StreamKind::Fixtures {
            files: files.into_iter(),
        },
        counters: IngestCounters::default(),
    })
}

/// Opens either kind of source: directories stream fixtures, files stream
/// WET records.
pub fn open_auto(path: impl AsRef<Path>) -> std::io::Result<RecordStream> {
    let path = path.as_ref();
    if path.is_dir() {
        open_fixture_dir(path)
    } else {
        open_wet(&WetSource::detect(path)?)
    }
}

fn is_version_line(line: &str) -> bool {
    line.starts_with("WARC/1.")
}

fn read_line(reader: &mut dyn BufRead, buf: &mut Vec<u8>) -> std::io::Result<bool> {
    buf.clear();
    let n = reader.read_until(b'\n', buf)?;
    Ok(n > 0)
}

fn trim_crlf(buf: &[u8]) -> &[u8] {
    let mut end = buf.len();
    while end > 0 && (buf[end - 1] == b'\n' || buf[end - 1] == b'\r') {
        end -= 1;
    }
    &buf[..end]
}

struct FramedRecord {
    warc_type: String,
    target_uri: String,
    record_id: String,
    date: String,
    content_type: String,
    payload: Vec<u8>,
}

impl Iterator for RecordStream {
    type Item = RawRecord;

    fn next(&mut self) -> Option<RawRecord> {
        match &mut self.kind {
            StreamKind::Wet { .. } => self.next_wet(),
            StreamKind::Fixtures { .. } => self.next_fixture(),
        }
    }
}

impl RecordStream {
    fn next_wet(&mut self) -> Option<RawRecord> {
        loop {
            let framed = {
                let (reader, resyncing, done) = match &mut self.kind {
                    StreamKind::Wet {
                        reader,
                        resyncing,
                        done,
                    } => (reader.as_mut(), resyncing, done),
                    StreamKind::Fixtures { .. } => unreachable!(),
                };
                if *done {
                    return None;
                }
                match read_framed(reader, resyncing, &mut self.counters) {
                    Ok(Some(framed)) => framed,
                    Ok(None) => {
                        *done = true;
                        return None;
                    }
                    Err(e) => {
                        log::warn!("i/o error mid-stream, stopping source: {e}");
                        self.counters.malformed += 1;
                        *done = true;
                        return None;
                    }
                }
            };
            if !framed.warc_type.eq_ignore_ascii_case("conversion") {
                self.counters.non_conversion += 1;
                continue;
            }
            let body = match String::from_utf8(framed.payload) {
                Ok(b) => b,
                Err(_) => {
                    self.counters.invalid_utf8 += 1;
                    continue;
                }
            };
            if framed.target_uri.is_empty() {
                self.counters.malformed += 1;
                continue;
            }
            self.counters.yielded += 1;
            return Some(RawRecord {
                target_uri: framed.target_uri,
                record_id: framed.record_id,
                date: framed.date,
                content_type: framed.content_type,
                body,
            });
        }
    }

    fn next_fixture(&mut self) -> Option<RawRecord> {
        loop {
            let path = match &mut self.kind {
                StreamKind::Fixtures { files } => files.next()?,
                StreamKind::Wet { .. } => unreachable!(),
            };
            let name = path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            match std::fs::read(&path) {
                Ok(bytes) => match String::from_utf8(bytes) {
                    Ok(body) => {
                        self.counters.yielded += 1;
                        return Some(RawRecord {
                            target_uri: format!("file:///{name}"),
                            record_id: format!("<urn:fixture:{name}>"),
                            date: "1970-01-01T00:00:00Z".to_string(),
                            content_type: "text/plain".to_string(),
                            body,
                        });
                    }
                    Err(_) => {
                        self.counters.invalid_utf8 += 1;
                        continue;
                    }
                },
                Err(e) => {
                    log::warn!("cannot read fixture {}: {e}", path.display());
                    self.counters.malformed += 1;
                    continue;
                }
            }
        }
    }
}

/// Reads one framed record. On framing damage, counts one malformed episode,
/// scans forward to the next version line and keeps going.
fn read_framed(
    reader: &mut dyn BufRead,
    resyncing: &mut bool,
    counters: &mut IngestCounters,
) -> std::io::Result<Option<FramedRecord>> {
    let mut buf: Vec<u8> = Vec::new();
    'record: loop {
        // Find the version line.
        loop {
            if !read_line(reader, &mut buf)? {
                return Ok(None);
            }
            let line = trim_crlf(&buf);
            if line.is_empty() {
                continue;
            }
            if is_version_line(&String::from_utf8_lossy(line)) {
                *resyncing = false;
                break;
            }
            if !*resyncing {
                counters.malformed += 1;
                *resyncing = true;
            }
        }
        // Header block.
        let mut warc_type = String::new();
        let mut target_uri = String::new();
        let mut record_id = String::new();
        let mut date = String::new();
        let mut content_type = String::new();
        let mut content_length: Option<u64> = None;
        loop {
            if !read_line(reader, &mut buf)? {
                counters.malformed += 1;
                return Ok(None);
            }
            let line = trim_crlf(&buf);
            if line.is_empty() {
                break;
            }
            let line = String::from_utf8_lossy(line).into_owned();
            let Some((name, value)) = line.split_once(':') else {
                counters.malformed += 1;
                *resyncing = true;
                continue 'record;
            };
            let name = name.trim();
            let value = value.trim();
            if name.eq_ignore_ascii_case("WARC-Type") {
                warc_type = value.to_string();
            } else if name.eq_ignore_ascii_case("WARC-Target-URI") {
                target_uri = value.to_string();
            } else if name.eq_ignore_ascii_case("WARC-Record-ID") {
                record_id = value.to_string();
            } else if name.eq_ignore_ascii_case("WARC-Date") {
                date = value.to_string();
            } else if name.eq_ignore_ascii_case("Content-Type") {
                content_type = value.to_string();
            } else if name.eq_ignore_ascii_case("Content-Length") {
                content_length = value.parse().ok();
            }
            // All other headers are discarded.
        }
        let Some(length) = content_length.filter(|&l| l <= MAX_RECORD_BYTES) else {
            counters.malformed += 1;
            *resyncing = true;
            continue 'record;
        };
        let mut payload = vec![0u8; length as usize];
        if let Err(e) = reader.read_exact(&mut payload) {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                counters.malformed += 1;
                return Ok(None);
            }
            return Err(e);
        }
        // The record terminator is two CRLFs.
        let mut terminator = [0u8; 4];
        match reader.read_exact(&mut terminator) {
            Ok(()) if &terminator == b"\r\n\r\n" => {}
            Ok(()) => {
                counters.malformed += 1;
                *resyncing = true;
                continue 'record;
            }
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
                counters.malformed += 1;
                return Ok(None);
            }
            Err(e) => return Err(e),
        }
        return Ok(Some(FramedRecord {
            warc_type,
            target_uri,
            record_id,
            date,
            content_type,
            payload,
        }));
    }
}

/// Writes one WARC/1.0 record with canonical framing. Useful for building
/// WET fixtures and round-trip checks.
pub fn write_record(
    w: &mut impl Write,
    warc_type: &str,
    headers: &[(&str, &str)],
    payload: &[u8],
) -> std::io::Result<()> {
    write!(w, "WARC/1.0\r\n")?;
    write!(w, "WARC-Type: {warc_type}\r\n")?;
    for (name, value) in headers {
        write!(w, "{name}: {value}\r\n")?;
    }
    write!(w, "Content-Length: {}\r\n", payload.len())?;
    write!(w, "\r\n")?;
    w.write_all(payload)?;
    write!(w, "\r\n\r\n")
}

/// Writes one "conversion" record the way WET files frame them.
pub fn write_conversion_record(
    w: &mut impl Write,
    target_uri: &str,
    record_id: &str,
    date: &str,
    body: &[u8],
) -> std::io::Result<()> {
    write_record(
        w,
        "conversion",
        &[
            ("WARC-Target-URI", target_uri),
            ("WARC-Date", date),
            ("WARC-Record-ID", record_id),
            ("Content-Type", "text/plain"),
        ],
        body,
    )
}
