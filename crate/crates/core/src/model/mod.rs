//! The four classifier architectures and their checkpoints.
//!
//! | name            | trunk                                   | heads            |
//! |-----------------|-----------------------------------------|------------------|
//! | `binary`        | embedding, BiLSTM, max-pool             | die/dat          |
//! | `mlt_bilstm`    | embedding, 2 × BiLSTM, max-pool         | die/dat and POS  |
//! | `mlt_ffctx`     | as above + feedforward context encoder  | die/dat and POS  |
//! | `mlt_bilstmctx` | as above + BiLSTM context encoder       | die/dat and POS  |
//!
//! Forward passes return a trace; backward passes consume it together with
//! the loss derivative on the output distributions and accumulate into a
//! [`Grads`] laid out like the model's [`ParamStore`].

mod binary;
mod checkpoint;
pub mod layers;
mod multitask;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{EmbeddingTable, Vocab};
use crate::tensor::{ParamStore, Rng, Tensor};

pub use binary::{BinaryConfig, BinaryModel, BinaryTrace};
pub use checkpoint::{Checkpoint, CheckpointError, WindowSpec, FORMAT_VERSION};
pub use multitask::{context_ids, ContextEncoderKind, MultitaskConfig, MultitaskModel, MultitaskTrace};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    Config(String),
}

/// Whether a forward pass is training (dropout active, drawing from the
/// given stream) or evaluation (deterministic).
pub enum Pass<'a> {
    Eval,
    Train(&'a mut Rng),
}

/// How the embedding layer is initialized.
pub enum EmbeddingInit<'a> {
    /// Uniform `[-1/√dim, 1/√dim]` rows for the given vocabulary.
    Random(Vocab),
    /// Vocabulary and rows copied from a trained table.
    Pretrained(&'a EmbeddingTable),
}

pub(crate) fn embedding_init(
    init: EmbeddingInit<'_>,
    dim: usize,
    rng: &mut Rng,
) -> Result<(Vocab, Tensor), ModelError> {
    match init {
        EmbeddingInit::Random(vocab) => {
            let t = Tensor::uniform(&[vocab.len(), dim], 1.0 / (dim as f64).sqrt(), rng);
            Ok((vocab, t))
        }
        EmbeddingInit::Pretrained(table) => {
            if table.dim() != dim {
                return Err(ModelError::Config(format!(
                    "embedding table has dimension {}, model expects {dim}",
                    table.dim()
                )));
            }
            Ok((table.vocab.clone(), table.vectors.clone()))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    Binary,
    MltBilstm,
    MltFfctx,
    MltBilstmctx,
}

impl Arch {
    pub const ALL: [Arch; 4] = [Arch::Binary, Arch::MltBilstm, Arch::MltFfctx, Arch::MltBilstmctx];

    pub fn as_str(self) -> &'static str {
        match self {
            Arch::Binary => "binary",
            Arch::MltBilstm => "mlt_bilstm",
            Arch::MltFfctx => "mlt_ffctx",
            Arch::MltBilstmctx => "mlt_bilstmctx",
        }
    }

    pub fn is_multitask(self) -> bool {
        self != Arch::Binary
    }

    pub fn context_encoder(self) -> Option<ContextEncoderKind> {
        match self {
            Arch::Binary => None,
            Arch::MltBilstm => Some(ContextEncoderKind::None),
            Arch::MltFfctx => Some(ContextEncoderKind::Feedforward),
            Arch::MltBilstmctx => Some(ContextEncoderKind::Bilstm),
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Arch {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Arch::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| ModelError::Config(format!("unknown architecture `{s}`")))
    }
}

/// Output of an evaluation-mode forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    /// `[p(dat), p(die)]`.
    pub diedat: Vec<f64>,
    /// `[p(sc), p(rp), p(dp)]`, multitask models only.
    pub pos: Option<Vec<f64>>,
}

/// A trained model of any architecture. Held one at a time, so the size
/// difference between variants does not matter.
#[allow(clippy::large_enum_variant)]
#[derive(Clone, Debug)]
pub enum Model {
    Binary(BinaryModel),
    Multitask(MultitaskModel),
}

impl Model {
    pub fn arch(&self) -> Arch {
        match self {
            Model::Binary(_) => Arch::Binary,
            Model::Multitask(m) => match m.config.context {
                ContextEncoderKind::None => Arch::MltBilstm,
                ContextEncoderKind::Feedforward => Arch::MltFfctx,
                ContextEncoderKind::Bilstm => Arch::MltBilstmctx,
            },
        }
    }

    pub fn vocab(&self) -> &Vocab {
        match self {
            Model::Binary(m) => &m.vocab,
            Model::Multitask(m) => &m.vocab,
        }
    }

    pub fn store(&self) -> &ParamStore {
        match self {
            Model::Binary(m) => &m.store,
            Model::Multitask(m) => &m.store,
        }
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        match self {
            Model::Binary(m) => &mut m.store,
            Model::Multitask(m) => &mut m.store,
        }
    }

    pub fn predict_ids(&self, ids: &[usize]) -> Prediction {
        match self {
            Model::Binary(m) => Prediction { diedat: m.forward(ids, Pass::Eval).probs, pos: None },
            Model::Multitask(m) => {
                let t = m.forward(ids, Pass::Eval);
                Prediction { diedat: t.diedat, pos: Some(t.pos) }
            }
        }
    }

    pub fn predict<S: AsRef<str>>(&self, tokens: &[S]) -> Prediction {
        self.predict_ids(&self.vocab().encode(tokens))
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::corpus::PREDICT;
    use crate::tensor::{grad_check, Grads};

    pub(crate) fn zero_params(store: &mut ParamStore) {
        for id in store.ids().collect::<Vec<_>>() {
            store.get_mut(id).fill(0.0);
        }
    }

    /// Redraws every parameter from `U(-0.5, 0.5)`. The default init at these
    /// tiny sizes leaves some recurrent gradients near 1e-8, where central
    /// differences are dominated by rounding.
    pub(crate) fn spread_params(store: &mut ParamStore, seed: u64) {
        let mut rng = Rng::new(seed);
        for id in store.ids().collect::<Vec<_>>() {
            let shape = store.get(id).shape().to_vec();
            *store.get_mut(id) = Tensor::uniform(&shape, 0.5, &mut rng);
        }
    }

    fn vocab() -> Vocab {
        Vocab::from_tokens(["de", "man", "het", "huis", "ik", "zag"])
    }

    const WINDOW: [&str; 6] = ["ik", "zag", "de", "man", PREDICT, "huis"];

    #[test]
    fn arch_names_round_trip() {
        for a in Arch::ALL {
            assert_eq!(a.as_str().parse::<Arch>().unwrap(), a);
        }
        assert!("lstm".parse::<Arch>().is_err());
    }

    #[test]
    fn pretrained_dimension_must_match() {
        let table = EmbeddingTable::random(vocab(), 5, &mut Rng::new(0));
        let cfg = BinaryConfig { emb_dim: 4, ..Default::default() };
        assert!(BinaryModel::new(cfg, EmbeddingInit::Pretrained(&table), 0).is_err());
        let cfg = BinaryConfig { emb_dim: 5, ..Default::default() };
        let m = BinaryModel::new(cfg, EmbeddingInit::Pretrained(&table), 0).unwrap();
        assert_eq!(m.vocab, table.vocab);
    }

    /// Full-model checks use ε = 1e-4: a few coordinates have gradients
    /// around 1e-7, where the rounding error of ε = 1e-5 alone reaches 1e-4
    /// relative, while the O(ε²) truncation error stays far below it.
    const EPS: f64 = 1e-4;

    /// BCE-shaped objective on the die probability, differentiated by hand.
    fn bce_die(p: f64) -> (f64, f64) {
        (-p.ln(), -1.0 / p)
    }

    #[test]
    fn binary_model_gradients_pass_grad_check() {
        for layers in [1, 2] {
            let cfg = BinaryConfig { emb_dim: 5, hidden: 4, layers, ..Default::default() };
            let mut m = BinaryModel::new(cfg, EmbeddingInit::Random(vocab()), 7).unwrap();
            spread_params(&mut m.store, 11);
            let ids = m.vocab.encode(&WINDOW);
            let trace = m.forward(&ids, Pass::Train(&mut Rng::new(99)));
            let mut g = Grads::zeros_like(&m.store);
            m.backward(&trace, &[0.0, bce_die(trace.probs[1]).1], &mut g);
            let mut store = m.store.clone();
            let f = |p: &ParamStore| {
                bce_die(m.forward_with(p, &ids, Pass::Train(&mut Rng::new(99))).probs[1]).0
            };
            let r = grad_check(&mut store, &g, f, EPS).unwrap();
            assert!(r.max_rel_error < 1e-4, "layers {layers}: {r:?}");
        }
    }

    #[test]
    fn multitask_gradients_pass_grad_check() {
        for context in [ContextEncoderKind::None, ContextEncoderKind::Feedforward, ContextEncoderKind::Bilstm] {
            let cfg = MultitaskConfig { emb_dim: 5, hidden: 4, context, ..Default::default() };
            let mut m = MultitaskModel::new(cfg, EmbeddingInit::Random(vocab()), 3).unwrap();
            spread_params(&mut m.store, 12);
            let ids = m.vocab.encode(&WINDOW);
            let loss = |t: &MultitaskTrace| -t.diedat[0].ln() - t.pos[2].ln();
            let trace = m.forward(&ids, Pass::Train(&mut Rng::new(5)));
            let mut g = Grads::zeros_like(&m.store);
            m.backward(&trace, &[-1.0 / trace.diedat[0], 0.0], &[0.0, 0.0, -1.0 / trace.pos[2]], &mut g);
            let mut store = m.store.clone();
            let f = |p: &ParamStore| loss(&m.forward_with(p, &ids, Pass::Train(&mut Rng::new(5))));
            let r = grad_check(&mut store, &g, f, EPS).unwrap();
            assert!(r.max_rel_error < 1e-4, "{context:?}: {r:?}");
        }
    }
}
