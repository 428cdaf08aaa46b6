/*! Reader and predictor for supervised fastText binary models.

Loads the dense (non-quantized) `.bin` format produced by fastText and
compatible with the publicly distributed 176-language line-identification
model: header with magic and version, args block, dictionary, then dense
input and output matrices. Prediction averages the input vectors of the
token ids (words, subword ngrams and word ngrams, exactly as the original
tokenizer builds them) and scores the labels according to the trained loss
(softmax, one-vs-all/negative sampling, or hierarchical softmax).

Quantized `.ftz` models are rejected at load time.
!*/

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use thiserror::Error;

use super::classifier::{ClassifierError, LineClassifier, Prediction};
use crate::model::LanguageTag;

pub const MAGIC: u32 = 793_712_314;
pub const MAX_VERSION: u32 = 12;

const EOS: &[u8] = b"</s>";
const BOW: u8 = b'<';
const EOW: u8 = b'>';
const LABEL_PREFIX: &[u8] = b"__label__";

#[derive(Debug, Error)]
pub enum FastTextError {
    #[error("i/o error reading model: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a fastText model (magic {0:#x})")]
    BadMagic(u32),
    #[error("unsupported model version {0}")]
    UnsupportedVersion(u32),
    #[error("quantized models are not supported; use the dense .bin form")]
    Quantized,
    #[error("model was not trained for supervised classification")]
    NotSupervised,
    #[error("malformed model: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Loss {
    NegativeSampling,
    HierarchicalSoftmax,
    Softmax,
    OneVsAll,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ModelKind {
    Cbow,
    Skipgram,
    Supervised,
}

#[derive(Debug, Clone)]
struct Args {
    dim: usize,
    word_ngrams: usize,
    loss: Loss,
    bucket: u64,
    minn: usize,
    maxn: usize,
}

struct Reader<R: Read> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn u8(&mut self) -> Result<u8, FastTextError> {
        let mut b = [0u8; 1];
        self.inner.read_exact(&mut b)?;
        Ok(b[0])
    }

    fn i32(&mut self) -> Result<i32, FastTextError> {
        let mut b = [0u8; 4];
        self.inner.read_exact(&mut b)?;
        Ok(i32::from_le_bytes(b))
    }

    fn u32(&mut self) -> Result<u32, FastTextError> {
        let mut b = [0u8; 4];
        self.inner.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    fn i64(&mut self) -> Result<i64, FastTextError> {
        let mut b = [0u8; 8];
        self.inner.read_exact(&mut b)?;
        Ok(i64::from_le_bytes(b))
    }

    fn f64(&mut self) -> Result<f64, FastTextError> {
        let mut b = [0u8; 8];
        self.inner.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }

    fn f32_vec(&mut self, n: usize) -> Result<Vec<f32>, FastTextError> {
        let mut bytes = vec![0u8; n * 4];
        self.inner.read_exact(&mut bytes)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    fn cstring(&mut self) -> Result<Vec<u8>, FastTextError> {
        let mut out = Vec::new();
        loop {
            let b = self.u8()?;
            if b == 0 {
                return Ok(out);
            }
            out.push(b);
        }
    }
}

/// fastText's FNV-1a variant: each byte is sign-extended before xor.
fn ft_hash(bytes: &[u8]) -> u32 {
    let mut h: u32 = 2_166_136_261;
    for &b in bytes {
        h ^= (b as i8) as u32;
        h = h.wrapping_mul(16_777_619);
    }
    h
}

struct Entry {
    word: Vec<u8>,
    count: i64,
    is_label: bool,
    /// Input matrix rows for this word (itself plus subword ngrams);
    /// only populated when maxn > 0.
    subwords: Vec<u32>,
}

struct Dictionary {
    entries: Vec<Entry>,
    word2id: HashMap<Vec<u8>, usize>,
    nwords: usize,
    nlabels: usize,
    pruneidx: HashMap<i32, i32>,
    pruneidx_size: i64,
}

impl Dictionary {
    fn read<R: Read>(r: &mut Reader<R>, args: &Args) -> Result<Self, FastTextError> {
        let size = r.i32()?;
        let nwords = r.i32()?;
        let nlabels = r.i32()?;
        let _ntokens = r.i64()?;
        let pruneidx_size = r.i64()?;
        if size < 0 || nwords < 0 || nlabels < 0 || nwords + nlabels != size {
            return Err(FastTextError::Malformed(format!(
                "inconsistent dictionary sizes ({size}, {nwords}, {nlabels})"
            )));
        }
        let mut entries = Vec::with_capacity(size as usize);
        let mut word2id = HashMap::with_capacity(size as usize);
        for i in 0..size as usize {
            let word = r.cstring()?;
            let count = r.i64()?;
            let etype = r.u8()?;
            word2id.insert(word.clone(), i);
            entries.push(Entry {
                word,
                count,
                is_label: etype == 1,
                subwords: Vec::new(),
            });
        }
        let mut pruneidx = HashMap::new();
        for _ in 0..pruneidx_size.max(0) {
            let first = r.i32()?;
            let second = r.i32()?;
            pruneidx.insert(first, second);
        }
        let mut dict = Dictionary {
            entries,
            word2id,
            nwords: nwords as usize,
            nlabels: nlabels as usize,
            pruneidx,
            pruneidx_size,
        };
        if args.maxn > 0 {
            dict.init_subwords(args);
        }
        Ok(dict)
    }

    fn init_subwords(&mut self, args: &Args) {
        for i in 0..self.nwords {
            let mut subwords = vec![i as u32];
            if self.entries[i].word != EOS {
                let mut bracketed = Vec::with_capacity(self.entries[i].word.len() + 2);
                bracketed.push(BOW);
                bracketed.extend_from_slice(&self.entries[i].word);
                bracketed.push(EOW);
                self.compute_subwords(&bracketed, args, &mut subwords);
            }
            self.entries[i].subwords = subwords;
        }
    }

    /// Character ngrams of a `<word>`-bracketed token, glued over UTF-8
    /// continuation bytes.
    fn compute_subwords(&self, word: &[u8], args: &Args, out: &mut Vec<u32>) {
        if args.bucket == 0 {
            return;
        }
        let len = word.len();
        for i in 0..len {
            if word[i] & 0xC0 == 0x80 {
                continue;
            }
            let mut ngram = Vec::new();
            let mut j = i;
            let mut n = 1;
            while j < len && n <= args.maxn {
                ngram.push(word[j]);
                j += 1;
                while j < len && word[j] & 0xC0 == 0x80 {
                    ngram.push(word[j]);
                    j += 1;
                }
                if n >= args.minn && !(n == 1 && (i == 0 || j == len)) {
                    let h = ft_hash(&ngram) as u64 % args.bucket;
                    self.push_hash(out, h);
                }
                n += 1;
            }
        }
    }

    fn push_hash(&self, out: &mut Vec<u32>, id: u64) {
        if self.pruneidx_size == 0 {
            return;
        }
        let mut id = id as i64;
        if self.pruneidx_size > 0 {
            match self.pruneidx.get(&(id as i32)) {
                Some(&mapped) => id = mapped as i64,
                None => return,
            }
        }
        out.push(self.nwords as u32 + id as u32);
    }

    fn label_name(&self, label_idx: usize) -> &[u8] {
        &self.entries[self.nwords + label_idx].word
    }

    fn label_counts(&self) -> Vec<i64> {
        self.entries[self.nwords..].iter().map(|e| e.count).collect()
    }
}

struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Matrix {
    fn read<R: Read>(r: &mut Reader<R>) -> Result<Self, FastTextError> {
        let rows = r.i64()?;
        let cols = r.i64()?;
        if rows < 0 || cols <= 0 {
            return Err(FastTextError::Malformed(format!(
                "bad matrix dimensions {rows}x{cols}"
            )));
        }
        let data = r.f32_vec(rows as usize * cols as usize)?;
        Ok(Matrix {
            rows: rows as usize,
            cols: cols as usize,
            data,
        })
    }

    fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    fn dot_row(&self, i: usize, v: &[f32]) -> f32 {
        self.row(i).iter().zip(v).map(|(a, b)| a * b).sum()
    }
}

/// One step up the Huffman tree: output-matrix row and whether the leaf lies
/// in the right subtree at that node.
type HsPath = Vec<(u32, bool)>;

fn build_hs_paths(counts: &[i64]) -> Vec<HsPath> {
    let osz = counts.len();
    if osz == 0 {
        return Vec::new();
    }
    if osz == 1 {
        return vec![Vec::new()];
    }
    #[derive(Clone)]
    struct Node {
        parent: i64,
        count: i64,
        binary: bool,
    }
    let mut tree = vec![
        Node {
            parent: -1,
            count: 1_000_000_000_000_000,
            binary: false,
        };
        2 * osz - 1
    ];
    for (i, &c) in counts.iter().enumerate() {
        tree[i].count = c;
    }
    let mut leaf = osz as i64 - 1;
    let mut node = osz;
    for i in osz..2 * osz - 1 {
        let mut mini = [0usize; 2];
        for m in mini.iter_mut() {
            if leaf >= 0 && tree[leaf as usize].count < tree[node].count {
                *m = leaf as usize;
                leaf -= 1;
            } else {
                *m = node;
                node += 1;
            }
        }
        tree[i].count = tree[mini[0]].count + tree[mini[1]].count;
        tree[mini[0]].parent = i as i64;
        tree[mini[1]].parent = i as i64;
        tree[mini[1]].binary = true;
    }
    (0..osz)
        .map(|i| {
            let mut path = Vec::new();
            let mut j = i;
            while tree[j].parent != -1 {
                let parent = tree[j].parent as usize;
                path.push(((parent - osz) as u32, tree[j].binary));
                j = parent;
            }
            path
        })
        .collect()
}

fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

/// A loaded supervised fastText model.
pub struct FastTextModel {
    args: Args,
    dict: Dictionary,
    input: Matrix,
    output: Matrix,
    hs_paths: Option<Vec<HsPath>>,
}

impl std::fmt::Debug for FastTextModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FastTextModel")
            .field("args", &self.args)
            .field("nwords", &self.dict.nwords)
            .field("nlabels", &self.dict.nlabels)
            .field("input", &format_args!("{}x{}", self.input.rows, self.input.cols))
            .field("output", &format_args!("{}x{}", self.output.rows, self.output.cols))
            .finish()
    }
}

impl FastTextModel {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, FastTextError> {
        Self::from_reader(BufReader::new(File::open(path)?))
    }

    pub fn from_reader(reader: impl Read) -> Result<Self, FastTextError> {
        let mut r = Reader { inner: reader };
        let magic = r.u32()?;
        if magic != MAGIC {
            return Err(FastTextError::BadMagic(magic));
        }
        let version = r.u32()?;
        if version > MAX_VERSION {
            return Err(FastTextError::UnsupportedVersion(version));
        }
        let dim = r.i32()?;
        let _ws = r.i32()?;
        let _epoch = r.i32()?;
        let _min_count = r.i32()?;
        let _neg = r.i32()?;
        let word_ngrams = r.i32()?;
        let loss = match r.i32()? {
            1 => Loss::NegativeSampling,
            2 => Loss::HierarchicalSoftmax,
            3 => Loss::Softmax,
            4 => Loss::OneVsAll,
            other => {
                return Err(FastTextError::Malformed(format!("unknown loss {other}")))
            }
        };
        let model = match r.i32()? {
            1 => ModelKind::Cbow,
            2 => ModelKind::Skipgram,
            3 => ModelKind::Supervised,
            other => {
                return Err(FastTextError::Malformed(format!("unknown model {other}")))
            }
        };
        let bucket = r.i32()?;
        let minn = r.i32()?;
        let mut maxn = r.i32()?;
        let _lr_update_rate = r.i32()?;
        let _t = r.f64()?;
        if model != ModelKind::Supervised {
            return Err(FastTextError::NotSupervised);
        }
        // Old supervised models predate char ngrams.
        if version == 11 {
            maxn = 0;
        }
        if dim <= 0 || bucket < 0 || minn < 0 || maxn < 0 || word_ngrams < 1 {
            return Err(FastTextError::Malformed("nonsensical args".into()));
        }
        let args = Args {
            dim: dim as usize,
            word_ngrams: word_ngrams as usize,
            loss,
            bucket: bucket as u64,
            minn: minn as usize,
            maxn: maxn as usize,
        };
        let dict = Dictionary::read(&mut r, &args)?;
        let quant_input = r.u8()?;
        if quant_input != 0 {
            return Err(FastTextError::Quantized);
        }
        if dict.pruneidx_size >= 0 {
            return Err(FastTextError::Malformed(
                "pruned vocabulary without quantization".into(),
            ));
        }
        let input = Matrix::read(&mut r)?;
        let qout = r.u8()?;
        if qout != 0 {
            return Err(FastTextError::Quantized);
        }
        let output = Matrix::read(&mut r)?;
        if input.cols != args.dim || output.cols != args.dim {
            return Err(FastTextError::Malformed(
                "matrix width does not match dim".into(),
            ));
        }
        // Every producible input id (word, subword or word ngram) indexes
        // rows [0, nwords + bucket).
        if input.rows != dict.nwords + args.bucket as usize {
            return Err(FastTextError::Malformed(format!(
                "input matrix has {} rows, expected nwords + bucket = {}",
                input.rows,
                dict.nwords + args.bucket as usize
            )));
        }
        let expected_out = match args.loss {
            Loss::HierarchicalSoftmax => dict.nlabels.saturating_sub(1),
            _ => dict.nlabels,
        };
        if output.rows != expected_out {
            return Err(FastTextError::Malformed(format!(
                "output matrix has {} rows, expected {expected_out}",
                output.rows
            )));
        }
        let hs_paths = match args.loss {
            Loss::HierarchicalSoftmax => Some(build_hs_paths(&dict.label_counts())),
            _ => None,
        };
        Ok(FastTextModel {
            args,
            dict,
            input,
            output,
            hs_paths,
        })
    }

    pub fn nlabels(&self) -> usize {
        self.dict.nlabels
    }

    /// Label name (with its `__label__` prefix) by label index.
    pub fn label(&self, idx: usize) -> String {
        String::from_utf8_lossy(self.dict.label_name(idx)).into_owned()
    }

    /// Splits on the exact delimiter set of the original tokenizer
    /// (space, tab, vertical tab, form feed, carriage return, newline, NUL).
    fn tokens(text: &[u8]) -> impl Iterator<Item = &[u8]> {
        text.split(|b| matches!(b, b' ' | b'\t' | b'\x0b' | b'\x0c' | b'\r' | b'\n' | b'\0'))
            .filter(|t| !t.is_empty())
    }

    /// Input-matrix row ids for one line of text, replicating the original
    /// line reader: known words (plus their subword ngrams when maxn > 0),
    /// subword ngrams of out-of-vocabulary words, an end-of-sentence token,
    /// and hashed word ngrams over all word tokens.
    fn input_ids(&self, text: &str) -> Vec<u32> {
        let mut ids: Vec<u32> = Vec::new();
        let mut word_hashes: Vec<u32> = Vec::new();
        let mut oov_subwords: Vec<u32> = Vec::new();
        for token in Self::tokens(text.as_bytes()).chain(std::iter::once(EOS)) {
            let wid = self.dict.word2id.get(token).copied();
            let is_label = match wid {
                Some(id) => self.dict.entries[id].is_label,
                None => token.starts_with(LABEL_PREFIX),
            };
            if is_label {
                continue;
            }
            match wid {
                None => {
                    if token != EOS && self.args.maxn > 0 {
                        let mut bracketed = Vec::with_capacity(token.len() + 2);
                        bracketed.push(BOW);
                        bracketed.extend_from_slice(token);
                        bracketed.push(EOW);
                        oov_subwords.clear();
                        self.dict
                            .compute_subwords(&bracketed, &self.args, &mut oov_subwords);
                        ids.extend_from_slice(&oov_subwords);
                    }
                }
                Some(id) => {
                    if self.args.maxn == 0 {
                        ids.push(id as u32);
                    } else {
                        ids.extend_from_slice(&self.dict.entries[id].subwords);
                    }
                }
            }
            word_hashes.push(ft_hash(token));
        }
        if self.args.word_ngrams > 1 && self.args.bucket > 0 {
            for (i, &first) in word_hashes.iter().enumerate() {
                // Sign-extension of the stored 32-bit hash matches the
                // original int32 -> uint64 conversion.
                let mut h = (first as i32) as i64 as u64;
                for &next in word_hashes[i + 1..].iter().take(self.args.word_ngrams - 1) {
                    h = h
                        .wrapping_mul(116_049_371)
                        .wrapping_add((next as i32) as i64 as u64);
                    self.dict.push_hash(&mut ids, h % self.args.bucket);
                }
            }
        }
        ids
    }

    /// Probability for every label, sorted by descending probability.
    pub fn predict(&self, text: &str) -> Vec<(String, f32)> {
        let ids = self.input_ids(text);
        if ids.is_empty() || self.dict.nlabels == 0 {
            return Vec::new();
        }
        let mut hidden = vec![0f32; self.args.dim];
        for &id in &ids {
            for (h, v) in hidden.iter_mut().zip(self.input.row(id as usize)) {
                *h += v;
            }
        }
        let inv = 1.0 / ids.len() as f32;
        for h in hidden.iter_mut() {
            *h *= inv;
        }
        let probs: Vec<f32> = match self.args.loss {
            Loss::Softmax => {
                let logits: Vec<f32> = (0..self.output.rows)
                    .map(|i| self.output.dot_row(i, &hidden))
                    .collect();
                let max = logits.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
                let exps: Vec<f32> = logits.iter().map(|&l| (l - max).exp()).collect();
                let sum: f32 = exps.iter().sum();
                exps.into_iter().map(|e| e / sum).collect()
            }
            Loss::NegativeSampling | Loss::OneVsAll => (0..self.output.rows)
                .map(|i| sigmoid(self.output.dot_row(i, &hidden)))
                .collect(),
            Loss::HierarchicalSoftmax => {
                let paths = self.hs_paths.as_ref().expect("paths built at load");
                paths
                    .iter()
                    .map(|path| {
                        path.iter()
                            .map(|&(row, right)| {
                                let f = sigmoid(self.output.dot_row(row as usize, &hidden));
                                if right {
                                    f
                                } else {
                                    1.0 - f
                                }
                            })
                            .product()
                    })
                    .collect()
            }
        };
        let mut out: Vec<(String, f32)> = probs
            .into_iter()
            .enumerate()
            .map(|(i, p)| (self.label(i), p))
            .collect();
        out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
        out
    }
}

impl LineClassifier for FastTextModel {
    fn predict(&self, text: &str) -> Result<Vec<Prediction>, ClassifierError> {
        Ok(FastTextModel::predict(self, text)
            .into_iter()
            .filter_map(|(label, prob)| {
                let stripped = label.strip_prefix("__label__").unwrap_or(&label);
                let confidence = f64::from(prob).clamp(0.0, 1.0);
                if confidence <= 0.0 {
                    return None;
                }
                LanguageTag::new(stripped).ok().map(|tag| Prediction {
                    label: tag,
                    confidence,
                })
            })
            .collect())
    }
}


#[cfg(test)]
// Expected values are frozen at full precision from the offline oracle.
#[allow(clippy::excessive_precision)]
mod tests {
    use super::test_model::{write_model, LossSpec, ModelSpec};
    use super::*;

    const TOL: f32 = 1e-6;

    /// dim=4 unigram softmax over words bonjour/le/monde.
    fn model_a() -> FastTextModel {
        let spec = ModelSpec {
            dim: 4,
            word_ngrams: 1,
            loss: LossSpec::Softmax,
            bucket: 0,
            minn: 0,
            maxn: 0,
            words: &[("bonjour", 10), ("le", 9), ("monde", 8), ("</s>", 7)],
            labels: &[("__label__fr", 5), ("__label__en", 3)],
            input_rows: vec![
                vec![1.0, 0.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0, 0.0],
                vec![0.0, 0.0, 1.0, 0.0],
                vec![0.0, 0.0, 0.0, 1.0],
            ],
            output_rows: vec![vec![8.0, 0.0, 0.0, 0.0], vec![0.0, 0.0, 4.0, 0.0]],
        };
        FastTextModel::from_reader(&write_model(&spec)[..]).unwrap()
    }

    #[test]
    fn softmax_prediction_matches_hand_computed_values() {
        let model = model_a();
        // Expected values computed offline from the plain softmax formula.
        let p = model.predict("bonjour le monde");
        assert_eq!(p[0].0, "__label__fr");
        assert!((p[0].1 - 0.7310585786).abs() < TOL, "got {}", p[0].1);
        assert!((p[1].1 - 0.2689414214).abs() < TOL);

        let p = model.predict("monde");
        assert_eq!(p[0].0, "__label__en");
        assert!((p[0].1 - 0.8807970780).abs() < TOL);
    }

    #[test]
    fn oov_only_text_scores_on_eos_vector() {
        let model = model_a();
        let p = model.predict("zzz");
        assert!((p[0].1 - 0.5).abs() < TOL);
        assert!((p[1].1 - 0.5).abs() < TOL);
    }

    #[test]
    fn classifier_trait_strips_label_prefix() {
        let model = model_a();
        let p = LineClassifier::predict(&model, "bonjour le monde").unwrap();
        assert_eq!(p[0].label.as_str(), "fr");
        assert!((p[0].confidence - 0.7310585786).abs() < 1e-6);
    }

    /// dim=2 bigram model with bucket 100; the bigram row ids (4 and 51)
    /// come from the hashed-ngram arithmetic computed offline.
    #[test]
    fn word_ngrams_hash_into_bucket_rows() {
        let mut input_rows = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]];
        input_rows.extend(std::iter::repeat_n(vec![0.0, 0.0], 100));
        input_rows[4] = vec![2.0, 2.0]; // hash("a") ^ hash("b") bigram slot
        let spec = ModelSpec {
            dim: 2,
            word_ngrams: 2,
            loss: LossSpec::Softmax,
            bucket: 100,
            minn: 0,
            maxn: 0,
            words: &[("a", 5), ("b", 4), ("</s>", 3)],
            labels: &[("__label__x", 2), ("__label__y", 1)],
            input_rows,
            output_rows: vec![vec![2.0, 0.0], vec![0.0, 1.0]],
        };
        let model = FastTextModel::from_reader(&write_model(&spec)[..]).unwrap();
        let ids = model.input_ids("a b");
        assert_eq!(ids, vec![0, 1, 2, 4, 51]);
        let p = model.predict("a b");
        assert_eq!(p[0].0, "__label__x");
        assert!((p[0].1 - 0.6456563062).abs() < TOL, "got {}", p[0].1);
        assert!((p[1].1 - 0.3543436938).abs() < TOL);
    }

    /// dim=2 subword model (minn=2, maxn=3, bucket=50); subword row ids for
    /// "hi" ([19, 4, 34, 8, 18]) and oov "yo" ([46, 17, 31, 3, 46]) computed
    /// offline from the bracketed-ngram hashing.
    #[test]
    fn subword_ngrams_for_known_and_oov_words() {
        let mut input_rows = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        input_rows.extend(std::iter::repeat_n(vec![0.5, 0.25], 50));
        let spec = ModelSpec {
            dim: 2,
            word_ngrams: 1,
            loss: LossSpec::Softmax,
            bucket: 50,
            minn: 2,
            maxn: 3,
            words: &[("hi", 3), ("</s>", 2)],
            labels: &[("__label__p", 2), ("__label__q", 1)],
            input_rows,
            output_rows: vec![vec![3.0, 0.0], vec![0.0, 3.0]],
        };
        let model = FastTextModel::from_reader(&write_model(&spec)[..]).unwrap();
        assert_eq!(model.input_ids("hi"), vec![0, 19, 4, 34, 8, 18, 1]);
        assert_eq!(model.input_ids("yo"), vec![46, 17, 31, 3, 46, 1]);
        let p = model.predict("hi");
        assert_eq!(p[0].0, "__label__p");
        assert!((p[0].1 - 0.6308148894).abs() < TOL, "got {}", p[0].1);
        let p = model.predict("yo");
        assert_eq!(p[0].0, "__label__p");
        assert!((p[0].1 - 0.5312093734).abs() < TOL, "got {}", p[0].1);
        assert!((p[1].1 - 0.4687906266).abs() < TOL);
    }

    /// Hierarchical softmax: 3 labels with counts [4, 3, 3] force the tree
    /// shape node(l0, node(l2, l1)); expected leaf probabilities computed
    /// offline from the sigmoid path products.
    #[test]
    fn hierarchical_softmax_paths() {
        let spec = ModelSpec {
            dim: 2,
            word_ngrams: 1,
            loss: LossSpec::Hs,
            bucket: 0,
            minn: 0,
            maxn: 0,
            words: &[("w", 2), ("</s>", 1)],
            labels: &[
                ("__label__d0", 4),
                ("__label__d1", 3),
                ("__label__d2", 3),
            ],
            input_rows: vec![vec![2.0, 0.0], vec![0.0, 2.0]],
            output_rows: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        };
        let model = FastTextModel::from_reader(&write_model(&spec)[..]).unwrap();
        let p = model.predict("w");
        let by_label: std::collections::HashMap<_, _> = p.into_iter().collect();
        assert!((by_label["__label__d0"] - 0.2689414214).abs() < TOL);
        assert!((by_label["__label__d1"] - 0.5344466454).abs() < TOL);
        assert!((by_label["__label__d2"] - 0.1966119332).abs() < TOL);
        let total: f32 = by_label.values().sum();
        assert!((total - 1.0).abs() < 1e-5);
    }

    #[test]
    fn one_vs_all_uses_independent_sigmoids() {
        let spec = ModelSpec {
            dim: 2,
            word_ngrams: 1,
            loss: LossSpec::Ova,
            bucket: 0,
            minn: 0,
            maxn: 0,
            words: &[("w", 2), ("</s>", 1)],
            labels: &[("__label__d0", 2), ("__label__d1", 1)],
            input_rows: vec![vec![2.0, 0.0], vec![0.0, 2.0]],
            output_rows: vec![vec![1.0, 1.0], vec![0.0, 0.0]],
        };
        let model = FastTextModel::from_reader(&write_model(&spec)[..]).unwrap();
        let p = model.predict("w");
        // hidden = [1, 1]; sigmoid(2) and sigmoid(0).
        assert!((p[0].1 - 0.880797078).abs() < TOL);
        assert!((p[1].1 - 0.5).abs() < TOL);
    }

    #[test]
    fn rejects_bad_magic_and_quantized() {
        let err = FastTextModel::from_reader(&b"NOTAMODELATALL"[..]).unwrap_err();
        assert!(matches!(err, FastTextError::BadMagic(_)));

        let spec = ModelSpec {
            dim: 2,
            word_ngrams: 1,
            loss: LossSpec::Softmax,
            bucket: 0,
            minn: 0,
            maxn: 0,
            words: &[("w", 2), ("</s>", 1)],
            labels: &[("__label__d0", 2), ("__label__d1", 1)],
            input_rows: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            output_rows: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        };
        let mut bytes = write_model(&spec);
        // Flip the input-matrix quantization flag; its offset is right after
        // the dictionary, so find it by rebuilding without matrices.
        let mut prefix = write_model(&ModelSpec {
            input_rows: vec![],
            output_rows: vec![],
            ..spec
        });
        prefix.truncate(prefix.len() - 2 - 32); // drop both matrix blocks and flags
        let flag_offset = prefix.len();
        assert_eq!(bytes[flag_offset], 0);
        bytes[flag_offset] = 1;
        let err = FastTextModel::from_reader(&bytes[..]).unwrap_err();
        assert!(matches!(err, FastTextError::Quantized));
    }

    #[test]
    fn rejects_future_version() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&MAGIC.to_le_bytes());
        bytes.extend_from_slice(&13u32.to_le_bytes());
        let err = FastTextModel::from_reader(&bytes[..]).unwrap_err();
        assert!(matches!(err, FastTextError::UnsupportedVersion(13)));
    }

    #[test]
    fn empty_prediction_for_unscorable_input() {
        // Model without EOS in vocabulary and no ngrams: an oov-only line
        // produces no input ids at all.
        let spec = ModelSpec {
            dim: 2,
            word_ngrams: 1,
            loss: LossSpec::Softmax,
            bucket: 0,
            minn: 0,
            maxn: 0,
            words: &[("w", 2)],
            labels: &[("__label__d0", 2), ("__label__d1", 1)],
            input_rows: vec![vec![1.0, 0.0]],
            output_rows: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        };
        let model = FastTextModel::from_reader(&write_model(&spec)[..]).unwrap();
        assert!(model.predict("zzz").is_empty());
    }
}
