//! File-level pipeline steps behind the `diedat` command line: each takes
//! paths and options, writes its artifacts and returns a short summary for
//! the terminal.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::corpus::synthetic::{generate_synthetic, Lexicon, SynthConfig};
use crate::corpus::{
    build_samples, ingest, occurrences, read_dataset, split, stats, to_plain_string, to_tagged_string, window,
    write_dataset, CorpusError, CorpusFormat, DieDat, Document, MaskedSample, PosClass, WindowMode,
};
use crate::embedding::{train_skipgram, SkipGramConfig};
use crate::embedding::EmbeddingError;
use crate::eval::{evaluate, EvalError, Task};
use crate::model::{Arch, Checkpoint, CheckpointError};
use crate::tensor::argmax;
use crate::train::{train, write_outputs, TrainConfig, TrainData, TrainError};

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CommandError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|source| CommandError::Io { path: parent.into(), source })?;
    }
    std::fs::write(path, contents).map_err(|source| CommandError::Io { path: path.into(), source })
}

fn dataset_string(samples: &[MaskedSample]) -> String {
    let mut buf = Vec::new();
    write_dataset(samples, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("datasets are UTF-8")
}

/// Masked samples of every occurrence in `docs`, document by document.
pub fn samples_of(docs: &[Document], mode: WindowMode, radius: usize) -> Result<Vec<MaskedSample>, CorpusError> {
    let mut out = Vec::new();
    for doc in docs {
        out.extend(build_samples(doc, mode, radius)?);
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct PreprocessArgs {
    pub input: PathBuf,
    pub format: CorpusFormat,
    pub mode: WindowMode,
    pub radius: usize,
    pub out: PathBuf,
    /// Directory for `train.tsv`, `validation.tsv`, `test.tsv` and
    /// `stats.txt`.
    pub splits: Option<PathBuf>,
    pub seed: u64,
}

pub fn preprocess(args: &PreprocessArgs) -> Result<String, CommandError> {
    let docs = ingest(&args.input, args.format)?;
    let samples = samples_of(&docs, args.mode, args.radius)?;
    write_file(&args.out, dataset_string(&samples))?;
    let mut report = format!("mode: {}\nradius: {}\n{}\n", args.mode.as_str(), args.radius, stats(&samples));
    if let Some(dir) = &args.splits {
        let parts = split(&samples, args.seed);
        for (name, part) in [("train", &parts.train), ("validation", &parts.validation), ("test", &parts.test)] {
            write_file(&dir.join(format!("{name}.tsv")), dataset_string(part))?;
            let _ = writeln!(report, "{name}: {}", part.len());
        }
        let _ = writeln!(report, "split_seed: {}", args.seed);
        write_file(&dir.join("stats.txt"), &report)?;
    }
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct SynthArgs {
    pub n_sentences: usize,
    pub seed: u64,
    pub lexicon: Option<PathBuf>,
    pub cross_sentence_fraction: f64,
    pub format: CorpusFormat,
    pub out: PathBuf,
}

pub fn synth(args: &SynthArgs) -> Result<String, CommandError> {
    let lexicon = match &args.lexicon {
        Some(p) => Lexicon::load(p)?,
        None => Lexicon::default(),
    };
    let config = SynthConfig {
        cross_sentence_fraction: args.cross_sentence_fraction,
        ..SynthConfig::new(args.n_sentences, args.seed)
    };
    let corpus = generate_synthetic(&lexicon, &config)?;
    let text = match args.format {
        CorpusFormat::Plain => to_plain_string(&corpus.documents),
        CorpusFormat::Tagged => to_tagged_string(&corpus.documents),
    };
    write_file(&args.out, text)?;
    let cross = corpus.sites.iter().filter(|s| s.cross_sentence).count();
    Ok(format!(
        "documents: {}\nsentences: {}\noccurrences: {}\ncross_sentence: {cross}\n",
        corpus.documents.len(),
        corpus.documents.iter().map(|d| d.sentences.len()).sum::<usize>(),
        corpus.sites.len()
    ))
}

#[derive(Clone, Debug)]
pub struct EmbedArgs {
    pub input: PathBuf,
    pub format: CorpusFormat,
    pub out: PathBuf,
    pub config: SkipGramConfig,
}

pub fn embed(args: &EmbedArgs) -> Result<String, CommandError> {
    let docs = ingest(&args.input, args.format)?;
    let sg = train_skipgram(&docs, &args.config)?;
    sg.table.save(&args.out)?;
    let mut report = format!("vocabulary: {}\ndim: {}\n", sg.table.vocab.len(), sg.table.dim());
    for (i, l) in sg.epoch_losses.iter().enumerate() {
        let _ = writeln!(report, "epoch {}: loss {l:.6}", i + 1);
    }
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct TrainArgs {
    pub config: Option<PathBuf>,
    pub arch: Option<Arch>,
    pub overrides: Vec<(String, String)>,
    pub out: PathBuf,
}

pub fn train_command(args: &TrainArgs) -> Result<String, CommandError> {
    let text = match &args.config {
        Some(p) => Some(std::fs::read_to_string(p).map_err(|source| CommandError::Io { path: p.clone(), source })?),
        None => None,
    };
    let source = args.config.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
    let cfg = TrainConfig::resolve(text.as_deref().map(|t| (t, source.as_str())), args.arch, &args.overrides)?;
    let data = TrainData::load(&cfg)?;
    let outcome = train(&cfg, &data)?;
    write_outputs(&args.out, &cfg, &outcome)?;
    let last = outcome.history.epochs.last().expect("at least one epoch");
    let chosen = &outcome.history.epochs[outcome.history.selected_epoch - 1];
    Ok(format!(
        "architecture: {}\ntrain samples: {}\nvalidation samples: {}\nepochs: {}\nfinal die/dat loss: {:.6}\n\
         selected epoch: {} (validation balanced accuracy {:.2})\ncheckpoint: {}\n",
        cfg.arch,
        data.train.len(),
        data.validation.len(),
        outcome.history.epochs.len(),
        last.diedat_loss,
        chosen.epoch,
        100.0 * chosen.val_balanced_accuracy,
        args.out.display()
    ))
}

#[derive(Clone, Debug)]
pub struct EvalArgs {
    pub checkpoint: PathBuf,
    pub data: PathBuf,
    pub task: Task,
    /// Also write the report as TSV here.
    pub tsv: Option<PathBuf>,
}

pub fn eval_command(args: &EvalArgs) -> Result<String, CommandError> {
    let ck = Checkpoint::load(&args.checkpoint)?;
    let samples = read_dataset(&args.data)?;
    let e = evaluate(&ck.model, &samples, args.task)?;
    if let Some(p) = &args.tsv {
        write_file(p, e.to_tsv())?;
    }
    Ok(e.to_text())
}

#[derive(Clone, Debug)]
pub struct PredictArgs {
    pub checkpoint: PathBuf,
    /// Pre-tokenized text: whitespace-separated tokens, one sentence per
    /// line, blank lines between documents.
    pub input: PathBuf,
    pub out: Option<PathBuf>,
}

/// One die/dat occurrence with the model's choice.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionRow {
    /// 1-based document, sentence and token positions.
    pub location: (usize, usize, usize),
    pub written: String,
    pub predicted: String,
    /// Probability of the predicted form.
    pub probability: f64,
    pub pos: Option<PosClass>,
}

impl PredictionRow {
    pub fn is_correction(&self) -> bool {
        !self.written.eq_ignore_ascii_case(&self.predicted)
    }
}

/// Renders `form` with the capitalization of `like`.
fn match_case(form: &str, like: &str) -> String {
    if like.chars().all(|c| !c.is_lowercase()) && like.chars().any(char::is_uppercase) && like.len() > 1 {
        form.to_uppercase()
    } else if like.chars().next().is_some_and(char::is_uppercase) {
        let mut c = form.chars();
        c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
    } else {
        form.to_string()
    }
}

pub fn predict_documents(ck: &Checkpoint, docs: &[Document]) -> Result<Vec<PredictionRow>, CorpusError> {
    let mut rows = Vec::new();
    for (d, doc) in docs.iter().enumerate() {
        for site in occurrences(doc) {
            let tokens = window(doc, site, ck.window.mode, ck.window.radius)?;
            let pred = ck.model.predict(&tokens);
            let class = argmax(&pred.diedat);
            let written = doc.sentences[site.sentence].tokens[site.token].surface.clone();
            let form = DieDat::from_index(class).expect("binary output").as_str();
            rows.push(PredictionRow {
                location: (d + 1, site.sentence + 1, site.token + 1),
                predicted: match_case(form, &written),
                written,
                probability: pred.diedat[class],
                pos: pred.pos.map(|p| PosClass::from_index(argmax(&p)).expect("three POS classes")),
            });
        }
    }
    Ok(rows)
}

/// TSV report; the POS column is present only for multitask checkpoints.
pub fn render_predictions(rows: &[PredictionRow], with_pos: bool) -> String {
    let mut s = String::from("location\twritten\tpredicted\tprobability");
    if with_pos {
        s.push_str("\tpos");
    }
    s.push_str("\tcorrection\n");
    for r in rows {
        let (d, sn, t) = r.location;
        let _ = write!(s, "{d}:{sn}:{t}\t{}\t{}\t{:.4}", r.written, r.predicted, r.probability);
        if with_pos {
            let _ = write!(s, "\t{}", r.pos.map(PosClass::short).unwrap_or("-"));
        }
        let _ = writeln!(s, "\t{}", if r.is_correction() { "yes" } else { "no" });
    }
    s
}

/// Returns the report; it is also written to `args.out` when given.
pub fn predict_command(args: &PredictArgs) -> Result<String, CommandError> {
    let ck = Checkpoint::load(&args.checkpoint)?;
    let docs = ingest(&args.input, CorpusFormat::Plain)?;
    let rows = predict_documents(&ck, &docs)?;
    let report = render_predictions(&rows, ck.model.arch().is_multitask());
    if let Some(p) = &args.out {
        write_file(p, &report)?;
    }
    Ok(report)
}
