//! Vocabularies and word embeddings.
//!
//! [`train_skipgram`] learns vectors with the skip-gram objective and
//! negative sampling; the resulting [`EmbeddingTable`] initializes the
//! classifiers' trainable embedding layers. Tables round-trip through the
//! word2vec text format.

mod skipgram;

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::corpus::{Document, PREDICT};
use crate::tensor::{dot, Rng, Tensor};

pub use skipgram::{sgns_pair_gradients, sgns_pair_loss, train_skipgram, SkipGram, SkipGramConfig};

/// Out-of-vocabulary stand-in.
pub const UNK: &str = "<unk>";
pub const PREDICT_INDEX: usize = 0;
pub const UNK_INDEX: usize = 1;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> EmbeddingError {
    EmbeddingError::Io { path: path.display().to_string(), source }
}

/// Token ↔ index map. [`PREDICT`] is always index 0 and [`UNK`] index 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for Vocab {
    fn default() -> Self {
        Self::from_tokens(Vec::<String>::new())
    }
}

impl Vocab {
    /// Specials first, then `tokens` in the given order (duplicates and
    /// specials in `tokens` are skipped).
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Vocab { tokens: vec![], index: HashMap::new() };
        v.push(PREDICT.to_string());
        v.push(UNK.to_string());
        for t in tokens {
            let t = t.into();
            if !v.index.contains_key(&t) {
                v.push(t);
            }
        }
        v
    }

    fn push(&mut self, t: String) {
        self.index.insert(t.clone(), self.tokens.len());
        self.tokens.push(t);
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    /// Always false: the specials are always present.
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Index of `token`, or of [`UNK`] when unknown.
    pub fn lookup(&self, token: &str) -> usize {
        self.get(token).unwrap_or(UNK_INDEX)
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.lookup(t.as_ref())).collect()
    }

    pub fn token(&self, index: usize) -> &str {
        &self.tokens[index]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// One token per line in index order.
    pub fn to_file_string(&self) -> String {
        let mut s = String::new();
        for t in &self.tokens {
            s.push_str(t);
            s.push('\n');
        }
        s
    }

    pub fn from_file_string(text: &str) -> Self {
        Self::from_tokens(text.lines().filter(|l| !l.is_empty()))
    }

    pub fn save(&self, path: &Path) -> Result<(), EmbeddingError> {
        std::fs::write(path, self.to_file_string()).map_err(|e| io_err(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, EmbeddingError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Ok(Self::from_file_string(&text))
    }
}

/// Corpus frequency of every token (specials excluded).
pub fn token_counts(documents: &[Document]) -> HashMap<String, usize> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for d in documents {
        for s in &d.sentences {
            for t in &s.tokens {
                if t.surface != PREDICT && t.surface != UNK {
                    *counts.entry(t.surface.clone()).or_default() += 1;
                }
            }
        }
    }
    counts
}

/// Tokens with frequency ≥ `min_count`, ordered by frequency descending
/// then token ascending, after the two specials.
pub fn build_vocab(documents: &[Document], min_count: usize) -> Vocab {
    vocab_from_counts(&token_counts(documents), min_count)
}

pub(crate) fn vocab_from_counts(counts: &HashMap<String, usize>, min_count: usize) -> Vocab {
    let mut entries: Vec<(&String, usize)> =
        counts.iter().filter(|(_, c)| **c >= min_count).map(|(t, c)| (t, *c)).collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Vocab::from_tokens(entries.into_iter().map(|(t, _)| t.clone()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    pub vocab: Vocab,
    /// `|V| × dim`, one row per vocabulary entry.
    pub vectors: Tensor,
    pub trainable: bool,
}

impl EmbeddingTable {
    pub fn new(vocab: Vocab, vectors: Tensor) -> Self {
        assert_eq!(vectors.rows(), vocab.len(), "one row per vocabulary entry");
        assert!(vectors.cols() > 0);
        EmbeddingTable { vocab, vectors, trainable: true }
    }

    /// Uniform `[-0.5/dim, 0.5/dim]` initialization.
    pub fn random(vocab: Vocab, dim: usize, rng: &mut Rng) -> Self {
        let r = 0.5 / dim as f64;
        let vectors = Tensor::uniform(&[vocab.len(), dim], r, rng);
        Self::new(vocab, vectors)
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn vector(&self, token: &str) -> Option<&[f64]> {
        self.vocab.get(token).map(|i| self.vectors.row(i))
    }

    /// Writes the word2vec text format: a `<count> <dim>` header, then one
    /// `<token> <v1> ... <vdim>` line per row, nine significant digits.
    pub fn write_word2vec<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.vocab.len(), self.dim())?;
        for (i, tok) in self.vocab.tokens().iter().enumerate() {
            out.write_all(tok.as_bytes())?;
            for v in self.vectors.row(i) {
                write!(out, " {v:.8e}")?;
            }
            out.write_all(b"\n")?;
        }
        out.flush()
    }

    pub fn save(&self, path: &Path) -> Result<(), EmbeddingError> {
        let f = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
        self.write_word2vec(std::io::BufWriter::new(f)).map_err(|e| io_err(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, EmbeddingError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::parse_word2vec(&text, &path.display().to_string())
    }

    /// Parses the word2vec text format. Missing specials are inserted at
    /// their reserved indices with zero vectors.
    pub fn parse_word2vec(text: &str, source: &str) -> Result<Self, EmbeddingError> {
        let err = |line: usize, message: String| EmbeddingError::Parse {
            path: source.to_string(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|x| x.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| err(1, format!("bad header `{header}`")))?;
        let [count, dim] = dims[..] else {
            return Err(err(1, "header must be `<count> <dim>`".into()));
        };
        if dim == 0 {
            return Err(err(1, "dimension must be positive".into()));
        }
        let mut words = Vec::with_capacity(count);
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(count);
        for (i, line) in lines {
            let mut fields = line.split_whitespace();
            let word = fields.next().unwrap().to_string();
            let vals: Vec<f64> = fields
                .map(|x| x.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| err(i + 1, "non-numeric vector entry".into()))?;
            if vals.len() != dim {
                return Err(err(i + 1, format!("vector has {} values, header says {dim}", vals.len())));
            }
            words.push(word);
            rows.push(vals);
        }
        if rows.len() != count {
            return Err(err(1, format!("header says {count} rows, file has {}", rows.len())));
        }
        let vocab = Vocab::from_tokens(words.iter().cloned());
        let mut vectors = Tensor::zeros(&[vocab.len(), dim]);
        for (w, r) in words.iter().zip(&rows) {
            vectors.row_mut(vocab.lookup(w)).copy_from_slice(r);
        }
        Ok(Self::new(vocab, vectors))
    }
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, EmbeddingError> {
    let nu = dot(u, u).sqrt();
    let nv = dot(v, v).sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(EmbeddingError::ZeroVector);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}
