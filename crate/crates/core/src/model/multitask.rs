use serde::{Deserialize, Serialize};

use super::layers::{BiLstm, BiLstmTrace, Embedding, Linear};
use super::{embedding_init, EmbeddingInit, ModelError, Pass};
use crate::embedding::{Vocab, PREDICT_INDEX, UNK_INDEX};
use crate::tensor::{maxpool_over_time, mul, relu, softmax, softmax_backward, Grads, ParamStore, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextEncoderKind {
    None,
    /// The three context embeddings concatenated, one linear layer, ReLU.
    Feedforward,
    /// One BiLSTM layer over the context tokens, dropout, max-pool.
    Bilstm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultitaskConfig {
    pub emb_dim: usize,
    /// Hidden units per direction in every BiLSTM.
    pub hidden: usize,
    pub context: ContextEncoderKind,
    pub emb_dropout: f64,
    /// Dropout on the first sentence BiLSTM's outputs.
    pub inter_dropout: f64,
    /// Dropout on the context BiLSTM's outputs.
    pub context_dropout: f64,
}

impl Default for MultitaskConfig {
    fn default() -> Self {
        MultitaskConfig {
            emb_dim: 200,
            hidden: 32,
            context: ContextEncoderKind::None,
            emb_dropout: 0.0,
            inter_dropout: 0.2,
            context_dropout: 0.2,
        }
    }
}

#[derive(Clone, Debug)]
enum ContextEncoder {
    None,
    Feedforward(Linear),
    Bilstm(BiLstm),
}

/// Shared trunk (embedding, two stacked BiLSTMs, max-pool, optional context
/// encoder) feeding a die/dat head and a POS head.
#[derive(Clone, Debug)]
pub struct MultitaskModel {
    pub config: MultitaskConfig,
    pub vocab: Vocab,
    pub store: ParamStore,
    embedding: Embedding,
    sentence: [BiLstm; 2],
    context: ContextEncoder,
    head_diedat: Linear,
    head_pos: Linear,
}

#[derive(Clone, Debug)]
enum ContextTrace {
    None,
    Feedforward { input: Vec<f64>, pre: Vec<f64> },
    Bilstm { trace: BiLstmTrace, masks: Vec<Vec<f64>>, dropped: Vec<Vec<f64>>, argmax: Vec<usize> },
}

#[derive(Clone, Debug)]
pub struct MultitaskTrace {
    ids: Vec<usize>,
    context_ids: [usize; 3],
    emb_masks: Vec<Vec<f64>>,
    layer1: BiLstmTrace,
    inter_masks: Vec<Vec<f64>>,
    layer2: BiLstmTrace,
    argmax: Vec<usize>,
    context: ContextTrace,
    /// Input to both heads: the pooled sentence vector, followed by the
    /// context vector when a context encoder is present.
    pub features: Vec<f64>,
    /// `[p(dat), p(die)]`.
    pub diedat: Vec<f64>,
    /// `[p(sc), p(rp), p(dp)]`.
    pub pos: Vec<f64>,
}

/// The two tokens before and the one token after the mask, UNK-padded where
/// the window ends.
pub fn context_ids(window: &[usize]) -> [usize; 3] {
    let p = window
        .iter()
        .position(|&i| i == PREDICT_INDEX)
        .expect("window without PREDICT token");
    let at = |i: Option<usize>| i.and_then(|i| window.get(i).copied()).unwrap_or(UNK_INDEX);
    [at(p.checked_sub(2)), at(p.checked_sub(1)), at(Some(p + 1))]
}

impl MultitaskModel {
    pub fn new(config: MultitaskConfig, init: EmbeddingInit<'_>, seed: u64) -> Result<Self, ModelError> {
        if config.hidden == 0 || config.emb_dim == 0 {
            return Err(ModelError::Config("hidden and emb_dim must be positive".into()));
        }
        for p in [config.emb_dropout, config.inter_dropout, config.context_dropout] {
            if !(0.0..1.0).contains(&p) {
                return Err(ModelError::Config(format!("dropout {p} outside [0, 1)")));
            }
        }
        let mut rng = Rng::new(seed);
        let (vocab, table) = embedding_init(init, config.emb_dim, &mut rng)?;
        let mut store = ParamStore::new();
        let embedding = Embedding::new(&mut store, "embedding", table);
        let h = config.hidden;
        let l1 = BiLstm::new(&mut store, "sentence0", config.emb_dim, h, &mut rng);
        let l2 = BiLstm::new(&mut store, "sentence1", 2 * h, h, &mut rng);
        let context = match config.context {
            ContextEncoderKind::None => ContextEncoder::None,
            ContextEncoderKind::Feedforward => {
                ContextEncoder::Feedforward(Linear::new(&mut store, "context_ff", 3 * config.emb_dim, 2 * h, &mut rng))
            }
            ContextEncoderKind::Bilstm => {
                ContextEncoder::Bilstm(BiLstm::new(&mut store, "context_bilstm", config.emb_dim, h, &mut rng))
            }
        };
        let width = Self::feature_width_for(&config);
        let head_diedat = Linear::new(&mut store, "head_diedat", width, 2, &mut rng);
        let head_pos = Linear::new(&mut store, "head_pos", width, 3, &mut rng);
        Ok(MultitaskModel { config, vocab, store, embedding, sentence: [l1, l2], context, head_diedat, head_pos })
    }

    fn feature_width_for(config: &MultitaskConfig) -> usize {
        match config.context {
            ContextEncoderKind::None => 2 * config.hidden,
            _ => 4 * config.hidden,
        }
    }

    /// Width of the vector both heads consume.
    pub fn feature_width(&self) -> usize {
        Self::feature_width_for(&self.config)
    }

    pub fn forward(&self, ids: &[usize], pass: Pass<'_>) -> MultitaskTrace {
        self.forward_with(&self.store, ids, pass)
    }

    pub fn forward_with(&self, p: &ParamStore, ids: &[usize], mut pass: Pass<'_>) -> MultitaskTrace {
        assert!(!ids.is_empty(), "empty window");
        let cfg = &self.config;
        let context_ids = context_ids(ids);
        let mut emb_masks = Vec::with_capacity(ids.len());
        let mut xs = Vec::with_capacity(ids.len());
        for &id in ids {
            let e = self.embedding.lookup(p, id);
            let m = pass.mask(e.len(), cfg.emb_dropout);
            xs.push(mul(&e, &m));
            emb_masks.push(m);
        }
        let layer1 = self.sentence[0].run(p, xs);
        let inter_masks: Vec<Vec<f64>> =
            layer1.outputs.iter().map(|o| pass.mask(o.len(), cfg.inter_dropout)).collect();
        let xs2 = layer1.outputs.iter().zip(&inter_masks).map(|(o, m)| mul(o, m)).collect();
        let layer2 = self.sentence[1].run(p, xs2);
        let (mut features, argmax) = maxpool_over_time(&layer2.outputs);

        let context = match &self.context {
            ContextEncoder::None => ContextTrace::None,
            ContextEncoder::Feedforward(lin) => {
                let input: Vec<f64> =
                    context_ids.iter().flat_map(|&id| self.embedding.lookup(p, id)).collect();
                let pre = lin.forward(p, &input);
                features.extend(pre.iter().map(|&v| relu(v)));
                ContextTrace::Feedforward { input, pre }
            }
            ContextEncoder::Bilstm(bi) => {
                let cx = context_ids.iter().map(|&id| self.embedding.lookup(p, id)).collect();
                let trace = bi.run(p, cx);
                let masks: Vec<Vec<f64>> =
                    trace.outputs.iter().map(|o| pass.mask(o.len(), cfg.context_dropout)).collect();
                let dropped: Vec<Vec<f64>> =
                    trace.outputs.iter().zip(&masks).map(|(o, m)| mul(o, m)).collect();
                let (pooled, argmax) = maxpool_over_time(&dropped);
                features.extend(pooled);
                ContextTrace::Bilstm { trace, masks, dropped, argmax }
            }
        };
        let diedat = softmax(&self.head_diedat.forward(p, &features));
        let pos = softmax(&self.head_pos.forward(p, &features));
        MultitaskTrace {
            ids: ids.to_vec(),
            context_ids,
            emb_masks,
            layer1,
            inter_masks,
            layer2,
            argmax,
            context,
            features,
            diedat,
            pos,
        }
    }

    /// Accumulates the gradient of a loss with derivatives `d_diedat` and
    /// `d_pos` on the two output distributions. A head whose derivative is
    /// all zero contributes exactly nothing.
    pub fn backward(&self, trace: &MultitaskTrace, d_diedat: &[f64], d_pos: &[f64], grads: &mut Grads) {
        self.backward_with(&self.store, trace, d_diedat, d_pos, grads)
    }

    pub fn backward_with(
        &self,
        p: &ParamStore,
        trace: &MultitaskTrace,
        d_diedat: &[f64],
        d_pos: &[f64],
        grads: &mut Grads,
    ) {
        assert_eq!(d_diedat.len(), 2);
        assert_eq!(d_pos.len(), 3);
        let mut d_feat = vec![0.0; trace.features.len()];
        for (head, probs, d) in [
            (&self.head_diedat, &trace.diedat, d_diedat),
            (&self.head_pos, &trace.pos, d_pos),
        ] {
            if d.iter().all(|v| *v == 0.0) {
                continue;
            }
            let d_logits = softmax_backward(probs, d);
            let df = head.backward(p, &trace.features, &d_logits, grads);
            crate::tensor::add_assign(&mut d_feat, &df);
        }
        let h2 = 2 * self.config.hidden;
        let (d_sent, d_ctx) = d_feat.split_at(h2);

        match (&self.context, &trace.context) {
            (ContextEncoder::None, ContextTrace::None) => {}
            (ContextEncoder::Feedforward(lin), ContextTrace::Feedforward { input, pre }) => {
                let d_pre: Vec<f64> =
                    d_ctx.iter().zip(pre).map(|(d, &z)| if z > 0.0 { *d } else { 0.0 }).collect();
                let d_in = lin.backward(p, input, &d_pre, grads);
                for (k, &id) in trace.context_ids.iter().enumerate() {
                    let e = self.config.emb_dim;
                    self.embedding.backward(id, &d_in[k * e..(k + 1) * e], grads);
                }
            }
            (ContextEncoder::Bilstm(bi), ContextTrace::Bilstm { trace: t, masks, dropped, argmax }) => {
                let mut d_rows = vec![vec![0.0; h2]; dropped.len()];
                for (j, &r) in argmax.iter().enumerate() {
                    d_rows[r][j] += d_ctx[j];
                }
                let d_out: Vec<Vec<f64>> = d_rows.iter().zip(masks).map(|(d, m)| mul(d, m)).collect();
                let dx = bi.backward(p, t, &d_out, grads);
                for (&id, d) in trace.context_ids.iter().zip(&dx) {
                    self.embedding.backward(id, d, grads);
                }
            }
            _ => unreachable!("trace produced by a different architecture"),
        }

        let mut d_rows = vec![vec![0.0; h2]; trace.layer2.outputs.len()];
        for (j, &t) in trace.argmax.iter().enumerate() {
            d_rows[t][j] += d_sent[j];
        }
        let dx2 = self.sentence[1].backward(p, &trace.layer2, &d_rows, grads);
        let d1: Vec<Vec<f64>> = dx2.iter().zip(&trace.inter_masks).map(|(d, m)| mul(d, m)).collect();
        let dx1 = self.sentence[0].backward(p, &trace.layer1, &d1, grads);
        for ((&id, d), m) in trace.ids.iter().zip(&dx1).zip(&trace.emb_masks) {
            self.embedding.backward(id, &mul(d, m), grads);
        }
    }

    /// Evaluation-mode `([p(dat), p(die)], [p(sc), p(rp), p(dp)])`.
    pub fn predict<S: AsRef<str>>(&self, tokens: &[S]) -> (Vec<f64>, Vec<f64>) {
        let t = self.forward(&self.vocab.encode(tokens), Pass::Eval);
        (t.diedat, t.pos)
    }

    pub fn embedding_param(&self) -> crate::tensor::ParamId {
        self.embedding.table
    }

    /// Parameters of the POS head (weight, bias).
    pub fn pos_head_params(&self) -> [crate::tensor::ParamId; 2] {
        [self.head_pos.w, self.head_pos.b]
    }

    /// Parameters of the die/dat head (weight, bias).
    pub fn diedat_head_params(&self) -> [crate::tensor::ParamId; 2] {
        [self.head_diedat.w, self.head_diedat.b]
    }
}
