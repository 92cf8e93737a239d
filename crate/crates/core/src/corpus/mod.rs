//! Corpus ingestion, die/dat masking, windowing, splits and batching.
//!
//! Input corpora are pre-tokenized. Two formats are read:
//!
//! * **plain**: one sentence per line, tokens separated by spaces; a blank
//!   line separates documents.
//! * **tagged**: one `surface<TAB>pos` pair per line; one blank line ends a
//!   sentence, two consecutive blank lines end a document.
//!
//! Every die/dat occurrence (case-insensitive) becomes one [`MaskedSample`]
//! in which only that occurrence is replaced by [`PREDICT`]. The sample's
//! token window is the full sentence, a radius around the mask within the
//! sentence, or the same radius over the document's token stream.

mod dataset;
pub mod synthetic;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::tensor::Rng;

pub use dataset::{read_dataset, write_dataset};

/// The mask token substituted for the occurrence to predict.
pub const PREDICT: &str = "PREDICT";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("window radius must be at least 1, got {0}")]
    Radius(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CorpusError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io { path: path.display().to_string(), source }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub pos: Option<String>,
}

impl Token {
    pub fn new(surface: impl Into<String>) -> Self {
        Token { surface: surface.into(), pos: None }
    }

    pub fn tagged(surface: impl Into<String>, pos: impl Into<String>) -> Self {
        Token { surface: surface.into(), pos: Some(pos.into()) }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn from_words(words: &[&str]) -> Self {
        Sentence { tokens: words.iter().map(|w| Token::new(*w)).collect() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Document {
    pub source_id: String,
    pub sentences: Vec<Sentence>,
}

impl Document {
    pub fn new(source_id: impl Into<String>, sentences: Vec<Sentence>) -> Self {
        Document { source_id: source_id.into(), sentences }
    }

    pub fn num_tokens(&self) -> usize {
        self.sentences.iter().map(|s| s.tokens.len()).sum()
    }
}

/// Binary target: 0 = dat, 1 = die.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DieDat {
    Dat = 0,
    Die = 1,
}

impl DieDat {
    /// Case-insensitive match on a surface form.
    pub fn from_surface(surface: &str) -> Option<Self> {
        match surface.to_lowercase().as_str() {
            "dat" => Some(DieDat::Dat),
            "die" => Some(DieDat::Die),
            _ => None,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(DieDat::Dat),
            1 => Some(DieDat::Die),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DieDat::Dat => "dat",
            DieDat::Die => "die",
        }
    }
}

/// Part-of-speech class of a die/dat token.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PosClass {
    SubordinatingConjunction = 0,
    RelativePronoun = 1,
    DemonstrativePronoun = 2,
}

impl PosClass {
    pub const ALL: [PosClass; 3] = [
        PosClass::SubordinatingConjunction,
        PosClass::RelativePronoun,
        PosClass::DemonstrativePronoun,
    ];

    /// Parses a POS tag; any tag outside the three classes yields `None`.
    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag.to_lowercase().as_str() {
            "subordinating_conjunction" | "sc" => Some(PosClass::SubordinatingConjunction),
            "relative_pronoun" | "rp" => Some(PosClass::RelativePronoun),
            "demonstrative_pronoun" | "dp" => Some(PosClass::DemonstrativePronoun),
            _ => None,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn tag(self) -> &'static str {
        match self {
            PosClass::SubordinatingConjunction => "subordinating_conjunction",
            PosClass::RelativePronoun => "relative_pronoun",
            PosClass::DemonstrativePronoun => "demonstrative_pronoun",
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            PosClass::SubordinatingConjunction => "sc",
            PosClass::RelativePronoun => "rp",
            PosClass::DemonstrativePronoun => "dp",
        }
    }
}

/// Where a masked occurrence came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Provenance {
    pub document: String,
    pub sentence: usize,
    pub token: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskedSample {
    /// Window tokens with exactly one [`PREDICT`].
    pub window_tokens: Vec<String>,
    pub target_label: DieDat,
    pub pos_label: Option<PosClass>,
    /// Absent for samples read back from a dataset file.
    pub provenance: Option<Provenance>,
}

impl MaskedSample {
    pub fn predict_index(&self) -> usize {
        self.window_tokens
            .iter()
            .position(|t| t == PREDICT)
            .expect("masked sample without PREDICT token")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowMode {
    Full,
    Windowed,
    WindowedNoBoundaries,
}

impl WindowMode {
    pub fn as_str(self) -> &'static str {
        match self {
            WindowMode::Full => "full",
            WindowMode::Windowed => "windowed",
            WindowMode::WindowedNoBoundaries => "windowed_no_boundaries",
        }
    }
}

impl fmt::Display for WindowMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WindowMode {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(WindowMode::Full),
            "windowed" => Ok(WindowMode::Windowed),
            "windowed_no_boundaries" | "no_boundaries" => Ok(WindowMode::WindowedNoBoundaries),
            other => Err(CorpusError::Config(format!("unknown window mode `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorpusFormat {
    Plain,
    Tagged,
}

impl FromStr for CorpusFormat {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plain" => Ok(CorpusFormat::Plain),
            "tagged" => Ok(CorpusFormat::Tagged),
            other => Err(CorpusError::Config(format!("unknown corpus format `{other}`"))),
        }
    }
}

pub fn ingest(path: &Path, format: CorpusFormat) -> Result<Vec<Document>, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    let name = path.display().to_string();
    match format {
        CorpusFormat::Plain => Ok(parse_plain(&text, &name)),
        CorpusFormat::Tagged => parse_tagged(&text, &name),
    }
}

pub fn parse_plain(text: &str, source: &str) -> Vec<Document> {
    let mut docs = Vec::new();
    let mut sentences = Vec::new();
    for line in text.lines() {
        let tokens: Vec<Token> = line.split_whitespace().map(Token::new).collect();
        if tokens.is_empty() {
            flush_document(&mut docs, &mut sentences, source);
        } else {
            sentences.push(Sentence { tokens });
        }
    }
    flush_document(&mut docs, &mut sentences, source);
    docs
}

pub fn parse_tagged(text: &str, source: &str) -> Result<Vec<Document>, CorpusError> {
    let mut docs = Vec::new();
    let mut sentences = Vec::new();
    let mut tokens = Vec::new();
    let mut blank_run = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            blank_run += 1;
            if !tokens.is_empty() {
                sentences.push(Sentence { tokens: std::mem::take(&mut tokens) });
            }
            if blank_run == 2 {
                flush_document(&mut docs, &mut sentences, source);
            }
            continue;
        }
        blank_run = 0;
        let parse_err = |message: String| CorpusError::Parse {
            path: source.to_string(),
            line: i + 1,
            message,
        };
        let tabs = line.matches('\t').count();
        if tabs != 1 {
            return Err(parse_err(format!("expected `surface<TAB>pos`, found {tabs} tabs")));
        }
        let (surface, pos) = line.split_once('\t').unwrap();
        let (surface, pos) = (surface.trim(), pos.trim());
        if surface.is_empty() {
            return Err(parse_err("empty token surface".into()));
        }
        tokens.push(Token {
            surface: surface.to_string(),
            pos: (!pos.is_empty()).then(|| pos.to_string()),
        });
    }
    if !tokens.is_empty() {
        sentences.push(Sentence { tokens });
    }
    flush_document(&mut docs, &mut sentences, source);
    Ok(docs)
}

fn flush_document(docs: &mut Vec<Document>, sentences: &mut Vec<Sentence>, source: &str) {
    if sentences.is_empty() {
        return;
    }
    let id = format!("{source}#{}", docs.len());
    docs.push(Document::new(id, std::mem::take(sentences)));
}

/// Renders documents in the plain format.
pub fn to_plain_string(docs: &[Document]) -> String {
    let mut out = String::new();
    for (d, doc) in docs.iter().enumerate() {
        if d > 0 {
            out.push('\n');
        }
        for s in &doc.sentences {
            let words: Vec<&str> = s.tokens.iter().map(|t| t.surface.as_str()).collect();
            out.push_str(&words.join(" "));
            out.push('\n');
        }
    }
    out
}

/// Renders documents in the tagged format. Tokens without a tag get `_`.
pub fn to_tagged_string(docs: &[Document]) -> String {
    let mut out = String::new();
    for doc in docs {
        for s in &doc.sentences {
            for t in &s.tokens {
                out.push_str(&t.surface);
                out.push('\t');
                out.push_str(t.pos.as_deref().unwrap_or("_"));
                out.push('\n');
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

/// Position of a token inside a document.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Site {
    pub sentence: usize,
    pub token: usize,
}

/// Every die/dat position of a document, in reading order.
pub fn occurrences(doc: &Document) -> Vec<Site> {
    let mut sites = Vec::new();
    for (si, s) in doc.sentences.iter().enumerate() {
        for (ti, t) in s.tokens.iter().enumerate() {
            if DieDat::from_surface(&t.surface).is_some() {
                sites.push(Site { sentence: si, token: ti });
            }
        }
    }
    sites
}

/// One full-sentence sample per die/dat occurrence.
pub fn mask_occurrences(doc: &Document) -> Vec<MaskedSample> {
    occurrences(doc)
        .into_iter()
        .map(|site| sample_at(doc, site, mask_window_full(doc, site)))
        .collect()
}

/// Masks every occurrence and windows it according to `mode`.
pub fn build_samples(
    doc: &Document,
    mode: WindowMode,
    radius: usize,
) -> Result<Vec<MaskedSample>, CorpusError> {
    occurrences(doc)
        .into_iter()
        .map(|site| Ok(sample_at(doc, site, window(doc, site, mode, radius)?)))
        .collect()
}

fn sample_at(doc: &Document, site: Site, window_tokens: Vec<String>) -> MaskedSample {
    let token = &doc.sentences[site.sentence].tokens[site.token];
    MaskedSample {
        window_tokens,
        target_label: DieDat::from_surface(&token.surface).expect("site is not a die/dat token"),
        pos_label: token.pos.as_deref().and_then(PosClass::from_tag),
        provenance: Some(Provenance {
            document: doc.source_id.clone(),
            sentence: site.sentence,
            token: site.token,
        }),
    }
}

fn mask_window_full(doc: &Document, site: Site) -> Vec<String> {
    doc.sentences[site.sentence]
        .tokens
        .iter()
        .enumerate()
        .map(|(i, t)| if i == site.token { PREDICT.to_string() } else { t.surface.clone() })
        .collect()
}

/// Token window around the occurrence at `site`, with that occurrence
/// replaced by [`PREDICT`].
///
/// `Windowed` keeps up to `radius` tokens on each side within the sentence;
/// `WindowedNoBoundaries` takes the same span over the concatenated
/// sentences of the document, never past its ends.
pub fn window(
    doc: &Document,
    site: Site,
    mode: WindowMode,
    radius: usize,
) -> Result<Vec<String>, CorpusError> {
    if radius < 1 {
        return Err(CorpusError::Radius(radius));
    }
    let sentence = &doc.sentences[site.sentence].tokens;
    assert!(site.token < sentence.len(), "site outside sentence");
    Ok(match mode {
        WindowMode::Full => mask_window_full(doc, site),
        WindowMode::Windowed => {
            let lo = site.token.saturating_sub(radius);
            let hi = (site.token + radius).min(sentence.len() - 1);
            (lo..=hi)
                .map(|i| {
                    if i == site.token {
                        PREDICT.to_string()
                    } else {
                        sentence[i].surface.clone()
                    }
                })
                .collect()
        }
        WindowMode::WindowedNoBoundaries => {
            let offset: usize =
                doc.sentences[..site.sentence].iter().map(|s| s.tokens.len()).sum();
            let center = offset + site.token;
            let stream: Vec<&str> = doc
                .sentences
                .iter()
                .flat_map(|s| s.tokens.iter().map(|t| t.surface.as_str()))
                .collect();
            let lo = center.saturating_sub(radius);
            let hi = (center + radius).min(stream.len() - 1);
            (lo..=hi)
                .map(|i| if i == center { PREDICT.to_string() } else { stream[i].to_string() })
                .collect()
        }
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSplit<T> {
    pub train: Vec<T>,
    pub validation: Vec<T>,
    pub test: Vec<T>,
    pub split_seed: u64,
}

/// Seeded 70/15/15 split: floor for train and validation, the remainder
/// goes to test.
pub fn split<T: Clone>(samples: &[T], seed: u64) -> DatasetSplit<T> {
    let n = samples.len();
    let mut order: Vec<usize> = (0..n).collect();
    Rng::new(seed).shuffle(&mut order);
    let n_train = n * 70 / 100;
    let n_val = n * 15 / 100;
    let pick = |idx: &[usize]| idx.iter().map(|&i| samples[i].clone()).collect::<Vec<_>>();
    DatasetSplit {
        train: pick(&order[..n_train]),
        validation: pick(&order[n_train..n_train + n_val]),
        test: pick(&order[n_train + n_val..]),
        split_seed: seed,
    }
}

/// Index batches for one epoch: a permutation keyed on `(base_seed, epoch)`
/// cut into chunks of `batch_size` (the last may be shorter).
pub fn batch_indices(n: usize, batch_size: usize, epoch: u64, base_seed: u64) -> Vec<Vec<usize>> {
    assert!(batch_size >= 1, "batch size must be at least 1");
    let mut order: Vec<usize> = (0..n).collect();
    Rng::derive(base_seed, &[epoch]).shuffle(&mut order);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

pub fn batches<T>(samples: &[T], batch_size: usize, epoch: u64, base_seed: u64) -> Vec<Vec<&T>> {
    batch_indices(samples.len(), batch_size, epoch, base_seed)
        .into_iter()
        .map(|b| b.into_iter().map(|i| &samples[i]).collect())
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LabelStats {
    pub samples: usize,
    pub dat: usize,
    pub die: usize,
    pub sc: usize,
    pub rp: usize,
    pub dp: usize,
    pub pos_missing: usize,
}

pub fn stats(samples: &[MaskedSample]) -> LabelStats {
    let mut s = LabelStats { samples: samples.len(), ..Default::default() };
    for sample in samples {
        match sample.target_label {
            DieDat::Dat => s.dat += 1,
            DieDat::Die => s.die += 1,
        }
        match sample.pos_label {
            Some(PosClass::SubordinatingConjunction) => s.sc += 1,
            Some(PosClass::RelativePronoun) => s.rp += 1,
            Some(PosClass::DemonstrativePronoun) => s.dp += 1,
            None => s.pos_missing += 1,
        }
    }
    s
}

impl fmt::Display for LabelStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "samples: {}", self.samples)?;
        writeln!(f, "dat: {}", self.dat)?;
        writeln!(f, "die: {}", self.die)?;
        writeln!(f, "subordinating_conjunction: {}", self.sc)?;
        writeln!(f, "relative_pronoun: {}", self.rp)?;
        writeln!(f, "demonstrative_pronoun: {}", self.dp)?;
        write!(f, "pos_missing: {}", self.pos_missing)
    }
}
