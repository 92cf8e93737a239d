use serde::{Deserialize, Serialize};

use super::layers::{BiLstm, BiLstmTrace, Embedding, Linear};
use super::{embedding_init, EmbeddingInit, ModelError, Pass};
use crate::embedding::Vocab;
use crate::tensor::{dropout_mask, maxpool_over_time, mul, softmax, softmax_backward, Grads, ParamId, ParamStore, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinaryConfig {
    pub emb_dim: usize,
    /// Hidden units per direction; the BiLSTM output is twice this.
    pub hidden: usize,
    /// Stacked BiLSTM layers (1 in the base model).
    pub layers: usize,
    /// Dropout on the embedded tokens.
    pub emb_dropout: f64,
    /// Dropout on the pooled vector before the output layer.
    pub out_dropout: f64,
    /// Dropout between stacked BiLSTM layers.
    pub inter_dropout: f64,
}

impl Default for BinaryConfig {
    fn default() -> Self {
        BinaryConfig { emb_dim: 100, hidden: 32, layers: 1, emb_dropout: 0.5, out_dropout: 0.5, inter_dropout: 0.2 }
    }
}

/// Embedding → dropout → BiLSTM (× layers) → max-pool → dropout → linear →
/// softmax over (dat, die).
#[derive(Clone, Debug)]
pub struct BinaryModel {
    pub config: BinaryConfig,
    pub vocab: Vocab,
    pub store: ParamStore,
    embedding: Embedding,
    layers: Vec<BiLstm>,
    out: Linear,
}

/// Forward activations kept for the backward pass.
#[derive(Clone, Debug)]
pub struct BinaryTrace {
    ids: Vec<usize>,
    emb_masks: Vec<Vec<f64>>,
    layers: Vec<BiLstmTrace>,
    inter_masks: Vec<Vec<Vec<f64>>>,
    argmax: Vec<usize>,
    out_mask: Vec<f64>,
    pooled_dropped: Vec<f64>,
    /// `[p(dat), p(die)]`.
    pub probs: Vec<f64>,
}

impl BinaryModel {
    /// Builds a model; a pretrained table must have width `config.emb_dim`.
    pub fn new(config: BinaryConfig, init: EmbeddingInit<'_>, seed: u64) -> Result<Self, ModelError> {
        if config.layers == 0 || config.hidden == 0 || config.emb_dim == 0 {
            return Err(ModelError::Config("layers, hidden and emb_dim must be positive".into()));
        }
        for p in [config.emb_dropout, config.out_dropout, config.inter_dropout] {
            if !(0.0..1.0).contains(&p) {
                return Err(ModelError::Config(format!("dropout {p} outside [0, 1)")));
            }
        }
        let mut rng = Rng::new(seed);
        let (vocab, table) = embedding_init(init, config.emb_dim, &mut rng)?;
        let mut store = ParamStore::new();
        let embedding = Embedding::new(&mut store, "embedding", table);
        let mut layers = Vec::with_capacity(config.layers);
        let mut width = config.emb_dim;
        for l in 0..config.layers {
            let layer = BiLstm::new(&mut store, &format!("bilstm{l}"), width, config.hidden, &mut rng);
            width = layer.output_width();
            layers.push(layer);
        }
        let out = Linear::new(&mut store, "out", width, 2, &mut rng);
        Ok(BinaryModel { config, vocab, store, embedding, layers, out })
    }

    pub fn forward(&self, ids: &[usize], pass: Pass<'_>) -> BinaryTrace {
        self.forward_with(&self.store, ids, pass)
    }

    pub fn forward_with(&self, p: &ParamStore, ids: &[usize], mut pass: Pass<'_>) -> BinaryTrace {
        assert!(!ids.is_empty(), "empty window");
        let cfg = &self.config;
        let mut emb_masks = Vec::with_capacity(ids.len());
        let mut xs = Vec::with_capacity(ids.len());
        for &id in ids {
            let e = self.embedding.lookup(p, id);
            let mask = pass.mask(e.len(), cfg.emb_dropout);
            xs.push(mul(&e, &mask));
            emb_masks.push(mask);
        }
        let mut traces = Vec::with_capacity(self.layers.len());
        let mut inter_masks = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            if l > 0 {
                let prev: &BiLstmTrace = traces.last().unwrap();
                let masks: Vec<Vec<f64>> =
                    prev.outputs.iter().map(|o| pass.mask(o.len(), cfg.inter_dropout)).collect();
                xs = prev.outputs.iter().zip(&masks).map(|(o, m)| mul(o, m)).collect();
                inter_masks.push(masks);
            }
            traces.push(layer.run(p, std::mem::take(&mut xs)));
        }
        let (pooled, argmax) = maxpool_over_time(&traces.last().unwrap().outputs);
        let out_mask = pass.mask(pooled.len(), cfg.out_dropout);
        let pooled_dropped = mul(&pooled, &out_mask);
        let probs = softmax(&self.out.forward(p, &pooled_dropped));
        BinaryTrace {
            ids: ids.to_vec(),
            emb_masks,
            layers: traces,
            inter_masks,
            argmax,
            out_mask,
            pooled_dropped,
            probs,
        }
    }

    /// Accumulates into `grads` the gradient of a loss whose derivative with
    /// respect to the output distribution is `d_probs`.
    pub fn backward(&self, trace: &BinaryTrace, d_probs: &[f64], grads: &mut Grads) {
        self.backward_with(&self.store, trace, d_probs, grads)
    }

    pub fn backward_with(&self, p: &ParamStore, trace: &BinaryTrace, d_probs: &[f64], grads: &mut Grads) {
        assert_eq!(d_probs.len(), 2);
        let d_logits = softmax_backward(&trace.probs, d_probs);
        let d_pooled = mul(&self.out.backward(p, &trace.pooled_dropped, &d_logits, grads), &trace.out_mask);
        let last = trace.layers.last().unwrap();
        let width = last.outputs[0].len();
        let mut d_rows = vec![vec![0.0; width]; last.outputs.len()];
        for (j, &t) in trace.argmax.iter().enumerate() {
            d_rows[t][j] += d_pooled[j];
        }
        for l in (0..self.layers.len()).rev() {
            let dx = self.layers[l].backward(p, &trace.layers[l], &d_rows, grads);
            d_rows = if l > 0 {
                dx.iter().zip(&trace.inter_masks[l - 1]).map(|(d, m)| mul(d, m)).collect()
            } else {
                dx
            };
        }
        for ((&id, d), m) in trace.ids.iter().zip(&d_rows).zip(&trace.emb_masks) {
            self.embedding.backward(id, &mul(d, m), grads);
        }
    }

    /// Evaluation-mode distribution `[p(dat), p(die)]` for a token window;
    /// unknown tokens map to the UNK row.
    pub fn predict<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<f64> {
        self.forward(&self.vocab.encode(tokens), Pass::Eval).probs
    }

    pub fn embedding_param(&self) -> ParamId {
        self.embedding.table
    }
}

impl Pass<'_> {
    pub(crate) fn mask(&mut self, n: usize, p: f64) -> Vec<f64> {
        match self {
            Pass::Eval => vec![1.0; n],
            Pass::Train(rng) => dropout_mask(n, p, true, rng).expect("dropout validated at construction"),
        }
    }
}
