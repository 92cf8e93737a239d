//! Training: losses, optimizers, configuration and the binary and multitask
//! training loops.
//!
//! Both loops shuffle the training set per epoch, cut it into batches and
//! split each batch into fixed chunks of [`CHUNK`] samples. Chunks run in
//! parallel and their gradients are summed in chunk order, so a run is
//! bit-identical for any thread count. Each sample's dropout masks come
//! from a stream derived from `(dropout_seed, epoch, batch, position)`.
//!
//! After every epoch the die/dat balanced accuracy on the validation set is
//! computed; the parameters of the best epoch (earliest on ties) are
//! returned, rounded to 32-bit precision so the checkpoint on disk holds
//! exactly the returned model.

pub mod loss;
pub mod optim;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::read_dataset;
use crate::corpus::{batch_indices, split, CorpusError, MaskedSample, WindowMode};
use crate::embedding::{EmbeddingError, EmbeddingTable, Vocab};
use crate::eval::{confusion, metrics, MetricsReport};
use crate::model::{
    Arch, BinaryConfig, BinaryModel, Checkpoint, CheckpointError, EmbeddingInit, Model, ModelError, MultitaskConfig, MultitaskModel,
    Pass, WindowSpec,
};
use crate::tensor::{argmax, Grads, ParamId, ParamStore, Rng};

use loss::{bce, bce_grad, ce, ce_grad};
use optim::{Adam, AdamHyper, Sgd};

/// Samples per gradient chunk.
pub const CHUNK: usize = 8;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("{file}:{line}: {message}")]
    ConfigSyntax { file: String, line: usize, message: String },
    #[error(
        "the training data has no POS labels, which multitask training needs; \
         preprocess a tagged corpus (--format tagged) or set pos_phase = false"
    )]
    MissingPos,
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub arch: Arch,
    /// A full dataset, split with `split_seed` (its train and validation
    /// parts are used). Ignored when `train` is set.
    pub data: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub validation: Option<PathBuf>,
    /// Pretrained word2vec-format vectors; without them the vocabulary is
    /// built from the training windows and initialized randomly.
    pub embeddings: Option<PathBuf>,
    pub min_count: usize,
    /// Recorded in the checkpoint so prediction cuts windows the same way.
    pub window: WindowMode,
    pub radius: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub sgd_lr: f64,
    pub sgd_momentum: f64,
    pub adam_lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub prob_clamp_eps: f64,
    pub split_seed: u64,
    pub shuffle_seed: u64,
    pub init_seed: u64,
    pub dropout_seed: u64,
    pub emb_dim: usize,
    pub hidden: usize,
    /// Stacked BiLSTM layers of the binary model.
    pub layers: usize,
    pub emb_dropout: f64,
    pub out_dropout: f64,
    pub inter_dropout: f64,
    pub context_dropout: f64,
    /// Multitask only: run the POS phase. Off, the multitask trainer only
    /// optimizes the die/dat objective.
    pub pos_phase: bool,
}

impl TrainConfig {
    /// Defaults for an architecture: 24 epochs of 128 for the binary model,
    /// 35 epochs of 512 for the multitask ones.
    pub fn defaults(arch: Arch) -> Self {
        let bin = BinaryConfig::default();
        let mlt = MultitaskConfig::default();
        let multitask = arch.is_multitask();
        TrainConfig {
            arch,
            data: None,
            train: None,
            validation: None,
            embeddings: None,
            min_count: 1,
            window: WindowMode::WindowedNoBoundaries,
            radius: 5,
            batch_size: if multitask { 512 } else { 128 },
            epochs: if multitask { 35 } else { 24 },
            sgd_lr: 0.01,
            sgd_momentum: 0.9,
            adam_lr: 1e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            prob_clamp_eps: 1e-7,
            split_seed: 0,
            shuffle_seed: 0,
            init_seed: 0,
            dropout_seed: 0,
            emb_dim: if multitask { mlt.emb_dim } else { bin.emb_dim },
            hidden: bin.hidden,
            layers: bin.layers,
            emb_dropout: if multitask { mlt.emb_dropout } else { bin.emb_dropout },
            out_dropout: bin.out_dropout,
            inter_dropout: bin.inter_dropout,
            context_dropout: mlt.context_dropout,
            pos_phase: true,
        }
    }

    /// Reads `key = value` lines (`#` comments and blank lines skipped).
    /// The architecture comes from `arch_override`, else the text's `arch`
    /// key, else `binary`; its defaults are then overwritten by the text and
    /// finally by `overrides`.
    pub fn resolve(
        text: Option<(&str, &str)>,
        arch_override: Option<Arch>,
        overrides: &[(String, String)],
    ) -> Result<Self, TrainError> {
        let pairs = match text {
            Some((text, source)) => parse_pairs(text, source)?,
            None => Vec::new(),
        };
        let arch = match arch_override {
            Some(a) => a,
            None => match pairs.iter().rev().find(|(k, _)| k == "arch") {
                Some((_, v)) => v.parse()?,
                None => Arch::Binary,
            },
        };
        let mut cfg = Self::defaults(arch);
        for (k, v) in pairs.iter().chain(overrides) {
            if k != "arch" {
                cfg.set(k, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), TrainError> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, TrainError> {
            value.parse().map_err(|_| TrainError::Config(format!("`{key}`: cannot parse `{value}`")))
        }
        let path = || Some(PathBuf::from(value));
        match key {
            "arch" => self.arch = value.parse()?,
            "data" => self.data = path(),
            "train" => self.train = path(),
            "validation" => self.validation = path(),
            "embeddings" => self.embeddings = path(),
            "min_count" => self.min_count = num(key, value)?,
            "window" => self.window = value.parse()?,
            "radius" => self.radius = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "sgd_lr" => self.sgd_lr = num(key, value)?,
            "sgd_momentum" => self.sgd_momentum = num(key, value)?,
            "adam_lr" => self.adam_lr = num(key, value)?,
            "adam_beta1" => self.adam_beta1 = num(key, value)?,
            "adam_beta2" => self.adam_beta2 = num(key, value)?,
            "adam_eps" => self.adam_eps = num(key, value)?,
            "prob_clamp_eps" => self.prob_clamp_eps = num(key, value)?,
            "split_seed" => self.split_seed = num(key, value)?,
            "shuffle_seed" => self.shuffle_seed = num(key, value)?,
            "init_seed" => self.init_seed = num(key, value)?,
            "dropout_seed" => self.dropout_seed = num(key, value)?,
            "emb_dim" => self.emb_dim = num(key, value)?,
            "hidden" => self.hidden = num(key, value)?,
            "layers" => self.layers = num(key, value)?,
            "emb_dropout" => self.emb_dropout = num(key, value)?,
            "out_dropout" => self.out_dropout = num(key, value)?,
            "inter_dropout" => self.inter_dropout = num(key, value)?,
            "context_dropout" => self.context_dropout = num(key, value)?,
            "pos_phase" => self.pos_phase = num(key, value)?,
            _ => return Err(TrainError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let rates = [
            ("sgd_lr", self.sgd_lr),
            ("adam_lr", self.adam_lr),
            ("adam_eps", self.adam_eps),
            ("prob_clamp_eps", self.prob_clamp_eps),
        ];
        for (name, r) in rates {
            if r.is_nan() || r <= 0.0 {
                return Err(TrainError::Config(format!("{name} must be positive, got {r}")));
            }
        }
        for (name, r) in [("sgd_momentum", self.sgd_momentum), ("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&r) {
                return Err(TrainError::Config(format!("{name} must lie in [0, 1), got {r}")));
            }
        }
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(TrainError::Config("epochs must be at least 1".into()));
        }
        if self.prob_clamp_eps.is_nan() || self.prob_clamp_eps >= 0.5 {
            return Err(TrainError::Config("prob_clamp_eps must be below 0.5".into()));
        }
        Ok(())
    }

    /// The configuration as `key = value` lines that [`TrainConfig::resolve`]
    /// reads back.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("arch", self.arch.to_string());
        for (k, p) in [("data", &self.data), ("train", &self.train), ("validation", &self.validation), ("embeddings", &self.embeddings)] {
            if let Some(p) = p {
                kv(k, p.display().to_string());
            }
        }
        kv("min_count", self.min_count.to_string());
        kv("window", self.window.as_str().to_string());
        kv("radius", self.radius.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("epochs", self.epochs.to_string());
        kv("sgd_lr", self.sgd_lr.to_string());
        kv("sgd_momentum", self.sgd_momentum.to_string());
        kv("adam_lr", self.adam_lr.to_string());
        kv("adam_beta1", self.adam_beta1.to_string());
        kv("adam_beta2", self.adam_beta2.to_string());
        kv("adam_eps", self.adam_eps.to_string());
        kv("prob_clamp_eps", self.prob_clamp_eps.to_string());
        kv("split_seed", self.split_seed.to_string());
        kv("shuffle_seed", self.shuffle_seed.to_string());
        kv("init_seed", self.init_seed.to_string());
        kv("dropout_seed", self.dropout_seed.to_string());
        kv("emb_dim", self.emb_dim.to_string());
        kv("hidden", self.hidden.to_string());
        kv("layers", self.layers.to_string());
        kv("emb_dropout", self.emb_dropout.to_string());
        kv("out_dropout", self.out_dropout.to_string());
        kv("inter_dropout", self.inter_dropout.to_string());
        kv("context_dropout", self.context_dropout.to_string());
        kv("pos_phase", self.pos_phase.to_string());
        s
    }

    fn binary_config(&self) -> BinaryConfig {
        BinaryConfig {
            emb_dim: self.emb_dim,
            hidden: self.hidden,
            layers: self.layers,
            emb_dropout: self.emb_dropout,
            out_dropout: self.out_dropout,
            inter_dropout: self.inter_dropout,
        }
    }

    fn multitask_config(&self) -> MultitaskConfig {
        MultitaskConfig {
            emb_dim: self.emb_dim,
            hidden: self.hidden,
            context: self.arch.context_encoder().expect("multitask architecture"),
            emb_dropout: self.emb_dropout,
            inter_dropout: self.inter_dropout,
            context_dropout: self.context_dropout,
        }
    }

    fn adam(&self) -> AdamHyper {
        AdamHyper { lr: self.adam_lr, beta1: self.adam_beta1, beta2: self.adam_beta2, eps: self.adam_eps }
    }
}

fn parse_pairs(text: &str, source: &str) -> Result<Vec<(String, String)>, TrainError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| TrainError::ConfigSyntax {
            file: source.to_string(),
            line: i + 1,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// In-memory training inputs.
#[derive(Clone, Debug, Default)]
pub struct TrainData {
    pub train: Vec<MaskedSample>,
    pub validation: Vec<MaskedSample>,
    pub embeddings: Option<EmbeddingTable>,
}

impl TrainData {
    /// Reads the datasets and embeddings named by `cfg`.
    pub fn load(cfg: &TrainConfig) -> Result<Self, TrainError> {
        let (train, validation) = match (&cfg.train, &cfg.data) {
            (Some(t), _) => {
                let v = cfg
                    .validation
                    .as_ref()
                    .ok_or_else(|| TrainError::Config("`train` is set but `validation` is not".into()))?;
                (read_dataset(t)?, read_dataset(v)?)
            }
            (None, Some(d)) => {
                let parts = split(&read_dataset(d)?, cfg.split_seed);
                (parts.train, parts.validation)
            }
            (None, None) => return Err(TrainError::Config("no training data: set `data` or `train`".into())),
        };
        let embeddings = cfg.embeddings.as_deref().map(EmbeddingTable::load).transpose()?;
        Ok(TrainData { train, validation, embeddings })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean die/dat BCE over the epoch's training samples.
    pub diedat_loss: f64,
    /// Mean POS cross-entropy over labeled training samples (multitask).
    pub pos_loss: Option<f64>,
    pub val_accuracy: f64,
    pub val_balanced_accuracy: f64,
    /// Training samples left out of the POS phase for lack of a label.
    pub pos_excluded: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub selected_epoch: usize,
}

impl TrainHistory {
    pub fn to_tsv(&self) -> String {
        let mut s =
            String::from("epoch\tdiedat_loss\tpos_loss\tval_accuracy\tval_balanced_accuracy\tpos_excluded\tselected\n");
        for r in &self.epochs {
            let pos = r.pos_loss.map(|l| format!("{l:.6}")).unwrap_or_default();
            let _ = writeln!(
                s,
                "{}\t{:.6}\t{pos}\t{:.6}\t{:.6}\t{}\t{}",
                r.epoch,
                r.diedat_loss,
                r.val_accuracy,
                r.val_balanced_accuracy,
                r.pos_excluded,
                r.epoch == self.selected_epoch
            );
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub history: TrainHistory,
}

#[derive(Clone, Debug)]
struct Encoded {
    ids: Vec<usize>,
    label: usize,
    pos: Option<usize>,
}

fn encode(vocab: &Vocab, samples: &[MaskedSample]) -> Vec<Encoded> {
    samples
        .iter()
        .map(|s| Encoded {
            ids: vocab.encode(&s.window_tokens),
            label: s.target_label.index(),
            pos: s.pos_label.map(|p| p.index()),
        })
        .collect()
}

fn training_vocab(samples: &[MaskedSample], min_count: usize) -> Vocab {
    let mut counts = std::collections::HashMap::new();
    for s in samples {
        for t in &s.window_tokens {
            *counts.entry(t.clone()).or_insert(0usize) += 1;
        }
    }
    crate::embedding::vocab_from_counts(&counts, min_count.max(1))
}

fn init<'a>(cfg: &TrainConfig, data: &'a TrainData) -> Result<EmbeddingInit<'a>, TrainError> {
    if data.train.is_empty() {
        return Err(TrainError::Config("the training set is empty".into()));
    }
    if data.validation.is_empty() {
        return Err(TrainError::Config("the validation set is empty".into()));
    }
    Ok(match &data.embeddings {
        Some(t) => EmbeddingInit::Pretrained(t),
        None => EmbeddingInit::Random(training_vocab(&data.train, cfg.min_count)),
    })
}

fn validate_on(val: &[Encoded], predict: impl Fn(&[usize]) -> Vec<f64> + Sync) -> MetricsReport {
    let preds: Vec<usize> = val.par_iter().map(|s| argmax(&predict(&s.ids))).collect();
    let truths: Vec<usize> = val.iter().map(|s| s.label).collect();
    metrics(&confusion(&preds, &truths, 2))
}

/// Sums per-chunk results in chunk order.
fn reduce<T>(parts: Vec<(Grads, T)>, mut fold: impl FnMut(T)) -> Grads {
    let mut it = parts.into_iter();
    let (mut total, first) = it.next().expect("non-empty batch");
    fold(first);
    for (g, x) in it {
        total.accumulate(&g);
        fold(x);
    }
    total
}

fn trainable(store: &ParamStore, embedding: ParamId, embeddings_trainable: bool, skip: &[ParamId]) -> Vec<ParamId> {
    store.ids().filter(|id| !skip.contains(id) && (embeddings_trainable || *id != embedding)).collect()
}

/// Dispatches on `cfg.arch`.
pub fn train(cfg: &TrainConfig, data: &TrainData) -> Result<TrainOutcome, TrainError> {
    if cfg.arch.is_multitask() {
        train_multitask(cfg, data)
    } else {
        train_binary(cfg, data)
    }
}

/// Per-batch BCE and one SGD-with-momentum step on every parameter.
pub fn train_binary(cfg: &TrainConfig, data: &TrainData) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if cfg.arch != Arch::Binary {
        return Err(TrainError::Config(format!("train_binary called for `{}`", cfg.arch)));
    }
    let init = init(cfg, data)?;
    let mut model = BinaryModel::new(cfg.binary_config(), init, cfg.init_seed)?;
    let train = encode(&model.vocab, &data.train);
    let val = encode(&model.vocab, &data.validation);
    let emb_trainable = data.embeddings.as_ref().is_none_or(|t| t.trainable);
    let params = trainable(&model.store, model.embedding_param(), emb_trainable, &[]);
    let mut sgd = Sgd::new(&model.store, &params, cfg.sgd_lr, cfg.sgd_momentum);
    let eps = cfg.prob_clamp_eps;

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, ParamStore)> = None;
    for epoch in 0..cfg.epochs {
        let mut loss_sum = 0.0;
        for (b, batch) in batch_indices(train.len(), cfg.batch_size, epoch as u64, cfg.shuffle_seed).iter().enumerate() {
            let n = batch.len();
            let model_ref = &model;
            let parts: Vec<(Grads, f64)> = batch
                .par_chunks(CHUNK)
                .enumerate()
                .map(|(c, chunk)| {
                    let mut g = Grads::zeros_like(&model_ref.store);
                    let mut loss = 0.0;
                    for (j, &i) in chunk.iter().enumerate() {
                        let s = &train[i];
                        let path = [epoch as u64, b as u64, (c * CHUNK + j) as u64];
                        let mut rng = Rng::derive(cfg.dropout_seed, &path);
                        let trace = model_ref.forward(&s.ids, Pass::Train(&mut rng));
                        let p = trace.probs[1];
                        loss += bce(&[p], &[s.label], eps);
                        model_ref.backward(&trace, &[0.0, bce_grad(p, s.label, n, eps)], &mut g);
                    }
                    (g, loss)
                })
                .collect();
            let grads = reduce(parts, |l| loss_sum += l);
            sgd.step(&mut model.store, &grads);
        }
        let report = validate_on(&val, |ids| model.forward(ids, Pass::Eval).probs);
        history.push(EpochRecord {
            epoch: epoch + 1,
            diedat_loss: loss_sum / train.len() as f64,
            pos_loss: None,
            val_accuracy: report.accuracy,
            val_balanced_accuracy: report.balanced_accuracy,
            pos_excluded: 0,
        });
        if best.as_ref().is_none_or(|(score, _, _)| report.balanced_accuracy > *score) {
            best = Some((report.balanced_accuracy, epoch + 1, model.store.clone()));
        }
    }
    let (_, selected_epoch, store) = best.expect("at least one epoch");
    model.store = store;
    model.store.round_to_f32();
    Ok(TrainOutcome {
        checkpoint: Checkpoint { model: Model::Binary(model), window: WindowSpec { mode: cfg.window, radius: cfg.radius } },
        history: TrainHistory { epochs: history, selected_epoch },
    })
}

/// Two phases per batch from one forward pass per sample:
///
/// 1. the BCE gradient through the die/dat head and the shared trunk, applied
///    by SGD with momentum to everything except the POS head;
/// 2. the cross-entropy gradient of the POS-labeled samples through the POS
///    head and the shared trunk, applied by Adam to everything except the
///    die/dat head.
///
/// Both gradients are taken at the parameters before the batch's SGD step.
/// With `pos_phase` off only phase 1 runs.
pub fn train_multitask(cfg: &TrainConfig, data: &TrainData) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if !cfg.arch.is_multitask() {
        return Err(TrainError::Config(format!("train_multitask called for `{}`", cfg.arch)));
    }
    if cfg.pos_phase && data.train.iter().all(|s| s.pos_label.is_none()) {
        return Err(TrainError::MissingPos);
    }
    let init = init(cfg, data)?;
    let mut model = MultitaskModel::new(cfg.multitask_config(), init, cfg.init_seed)?;
    let train = encode(&model.vocab, &data.train);
    let val = encode(&model.vocab, &data.validation);
    let emb_trainable = data.embeddings.as_ref().is_none_or(|t| t.trainable);
    let emb = model.embedding_param();
    let sgd_params = trainable(&model.store, emb, emb_trainable, &model.pos_head_params());
    let adam_params = trainable(&model.store, emb, emb_trainable, &model.diedat_head_params());
    let mut sgd = Sgd::new(&model.store, &sgd_params, cfg.sgd_lr, cfg.sgd_momentum);
    let mut adam = Adam::new(&model.store, &adam_params, cfg.adam());
    let eps = cfg.prob_clamp_eps;
    let pos_excluded = train.iter().filter(|s| s.pos.is_none()).count();
    let labeled = train.len() - pos_excluded;

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, ParamStore)> = None;
    for epoch in 0..cfg.epochs {
        let (mut bce_sum, mut ce_sum) = (0.0, 0.0);
        for (b, batch) in batch_indices(train.len(), cfg.batch_size, epoch as u64, cfg.shuffle_seed).iter().enumerate() {
            let n = batch.len();
            let n_pos = batch.iter().filter(|&&i| train[i].pos.is_some()).count();
            let model_ref = &model;
            let parts: Vec<(Grads, (Grads, f64, f64))> = batch
                .par_chunks(CHUNK)
                .enumerate()
                .map(|(c, chunk)| {
                    let mut ga = Grads::zeros_like(&model_ref.store);
                    let mut gb = Grads::zeros_like(&model_ref.store);
                    let (mut la, mut lb) = (0.0, 0.0);
                    for (j, &i) in chunk.iter().enumerate() {
                        let s = &train[i];
                        let path = [epoch as u64, b as u64, (c * CHUNK + j) as u64];
                        let mut rng = Rng::derive(cfg.dropout_seed, &path);
                        let trace = model_ref.forward(&s.ids, Pass::Train(&mut rng));
                        let p = trace.diedat[1];
                        la += bce(&[p], &[s.label], eps);
                        let d_diedat = [0.0, bce_grad(p, s.label, n, eps)];
                        model_ref.backward(&trace, &d_diedat, &[0.0; 3], &mut ga);
                        if let Some(y) = s.pos {
                            lb += ce(std::slice::from_ref(&trace.pos), &[y], eps);
                            if cfg.pos_phase {
                                let d_pos = ce_grad(&trace.pos, y, n_pos, eps);
                                model_ref.backward(&trace, &[0.0; 2], &d_pos, &mut gb);
                            }
                        }
                    }
                    (ga, (gb, la, lb))
                })
                .collect();
            let mut pos_parts = Vec::with_capacity(parts.len());
            let ga = reduce(parts, |(gb, la, lb)| {
                bce_sum += la;
                ce_sum += lb;
                pos_parts.push((gb, ()));
            });
            sgd.step(&mut model.store, &ga);
            if cfg.pos_phase && n_pos > 0 {
                let gb = reduce(pos_parts, |_| {});
                adam.step(&mut model.store, &gb);
            }
        }
        let report = validate_on(&val, |ids| model.forward(ids, Pass::Eval).diedat);
        history.push(EpochRecord {
            epoch: epoch + 1,
            diedat_loss: bce_sum / train.len() as f64,
            pos_loss: (labeled > 0).then(|| ce_sum / labeled as f64),
            val_accuracy: report.accuracy,
            val_balanced_accuracy: report.balanced_accuracy,
            pos_excluded,
        });
        if best.as_ref().is_none_or(|(score, _, _)| report.balanced_accuracy > *score) {
            best = Some((report.balanced_accuracy, epoch + 1, model.store.clone()));
        }
    }
    let (_, selected_epoch, store) = best.expect("at least one epoch");
    model.store = store;
    model.store.round_to_f32();
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            model: Model::Multitask(model),
            window: WindowSpec { mode: cfg.window, radius: cfg.radius },
        },
        history: TrainHistory { epochs: history, selected_epoch },
    })
}

/// Writes the checkpoint files, `history.tsv` and `train_config.txt` into
/// `dir`.
pub fn write_outputs(dir: &Path, cfg: &TrainConfig, outcome: &TrainOutcome) -> Result<(), TrainError> {
    let io = |path: &Path, source: std::io::Error| TrainError::Io { path: path.to_path_buf(), source };
    outcome.checkpoint.save(dir)?;
    let path = dir.join("history.tsv");
    std::fs::write(&path, outcome.history.to_tsv()).map_err(|e| io(&path, e))?;
    let path = dir.join("train_config.txt");
    std::fs::write(&path, cfg.to_config_string()).map_err(|e| io(&path, e))
}

#[cfg(test)]
mod tests;
