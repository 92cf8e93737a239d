use crate::corpus::Document;
use crate::tensor::{dot, sigmoid, Rng, Tensor};

use super::{token_counts, vocab_from_counts, EmbeddingError, EmbeddingTable};

#[derive(Clone, Debug, PartialEq)]
pub struct SkipGramConfig {
    pub dim: usize,
    /// Maximum context distance; each center draws its effective window
    /// uniformly from `1..=window`.
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    /// Initial learning rate, decayed linearly to `1e-4 × lr`.
    pub lr: f64,
    pub min_count: usize,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig { dim: 100, window: 5, negatives: 5, epochs: 5, lr: 0.025, min_count: 1, seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct SkipGram {
    pub table: EmbeddingTable,
    /// Mean negative-sampling loss per (center, context) pair, per epoch.
    pub epoch_losses: Vec<f64>,
}

/// Negative-sampling loss of one (center, context) pair:
/// `-log σ(c·v) - Σ_k log σ(-n_k·v)`.
pub fn sgns_pair_loss(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> f64 {
    let mut loss = -log_sigmoid(dot(context, center));
    for n in negatives {
        loss -= log_sigmoid(-dot(n, center));
    }
    loss
}

/// Gradients of [`sgns_pair_loss`] with respect to the center vector, the
/// context vector and each negative vector.
pub fn sgns_pair_gradients(
    center: &[f64],
    context: &[f64],
    negatives: &[&[f64]],
) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let g = sigmoid(dot(context, center)) - 1.0;
    let mut d_center: Vec<f64> = context.iter().map(|c| g * c).collect();
    let d_context: Vec<f64> = center.iter().map(|v| g * v).collect();
    let mut d_neg = Vec::with_capacity(negatives.len());
    for n in negatives {
        let gn = sigmoid(dot(n, center));
        for (d, x) in d_center.iter_mut().zip(n.iter()) {
            *d += gn * x;
        }
        d_neg.push(center.iter().map(|v| gn * v).collect());
    }
    (d_center, d_context, d_neg)
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Trains skip-gram vectors with negative sampling on the sentences of
/// `documents`.
///
/// Negatives are drawn from the unigram distribution raised to 3/4. The
/// vocabulary is built from the same documents; the specials never occur in
/// raw text and keep their random initialization. Training is sequential and
/// fully determined by `config.seed`.
pub fn train_skipgram(documents: &[Document], config: &SkipGramConfig) -> Result<SkipGram, EmbeddingError> {
    if config.dim == 0 {
        return Err(EmbeddingError::Config("embedding dimension must be positive".into()));
    }
    if config.window == 0 {
        return Err(EmbeddingError::Config("window must be positive".into()));
    }
    if config.lr.is_nan() || config.lr <= 0.0 {
        return Err(EmbeddingError::Config("learning rate must be positive".into()));
    }
    let counts = token_counts(documents);
    let vocab = vocab_from_counts(&counts, config.min_count);
    let mut rng = Rng::new(config.seed);
    let mut table = EmbeddingTable::random(vocab, config.dim, &mut rng);
    let mut output = Tensor::zeros(&[table.vocab.len(), config.dim]);

    let mut cumulative = Vec::with_capacity(table.vocab.len());
    let mut acc = 0.0;
    for (i, tok) in table.vocab.tokens().iter().enumerate() {
        if i > super::UNK_INDEX {
            acc += (counts[tok] as f64).powf(0.75);
        }
        cumulative.push(acc);
    }
    let sentences: Vec<Vec<usize>> = documents
        .iter()
        .flat_map(|d| &d.sentences)
        .map(|s| s.tokens.iter().filter_map(|t| table.vocab.get(&t.surface)).collect())
        .filter(|s: &Vec<usize>| s.len() > 1)
        .collect();
    let total_steps = (config.epochs * sentences.iter().map(Vec::len).sum::<usize>()).max(1);
    let mut step = 0usize;
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let dim = config.dim;
    let mut d_center = vec![0.0; dim];
    let mut negs = Vec::with_capacity(config.negatives);

    for _ in 0..config.epochs {
        let mut loss_sum = 0.0;
        let mut pairs = 0usize;
        for sent in &sentences {
            for (pos, &center) in sent.iter().enumerate() {
                let lr = config.lr * (1.0 - step as f64 / total_steps as f64).max(1e-4);
                step += 1;
                let reach = config.window - rng.below(config.window);
                let lo = pos.saturating_sub(reach);
                let hi = (pos + reach).min(sent.len() - 1);
                for (j, &ctx) in sent.iter().enumerate().take(hi + 1).skip(lo) {
                    if j == pos {
                        continue;
                    }
                    negs.clear();
                    for _ in 0..config.negatives {
                        let r = rng.unit() * acc;
                        let n = cumulative.partition_point(|&c| c <= r).min(cumulative.len() - 1);
                        if n != ctx {
                            negs.push(n);
                        }
                    }
                    d_center.iter_mut().for_each(|v| *v = 0.0);
                    let v = table.vectors.row(center).to_vec();
                    for (k, &target) in std::iter::once(&ctx).chain(negs.iter()).enumerate() {
                        let label = if k == 0 { 1.0 } else { 0.0 };
                        let u = output.row_mut(target);
                        let s = dot(u, &v);
                        loss_sum -= if k == 0 { log_sigmoid(s) } else { log_sigmoid(-s) };
                        let g = sigmoid(s) - label;
                        for d in 0..dim {
                            d_center[d] += g * u[d];
                            u[d] -= lr * g * v[d];
                        }
                    }
                    let row = table.vectors.row_mut(center);
                    for d in 0..dim {
                        row[d] -= lr * d_center[d];
                    }
                    pairs += 1;
                }
            }
        }
        epoch_losses.push(if pairs > 0 { loss_sum / pairs as f64 } else { 0.0 });
    }
    Ok(SkipGram { table, epoch_losses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::synthetic::two_cluster_corpus;
    use crate::embedding::cosine;
    use crate::tensor::{grad_check, Grads, ParamStore};

    #[test]
    fn pair_gradient_passes_grad_check() {
        let mut rng = Rng::new(8);
        let mut store = ParamStore::new();
        let c = store.add("center", Tensor::uniform(&[6], 0.8, &mut rng));
        let o = store.add("context", Tensor::uniform(&[6], 0.8, &mut rng));
        let n1 = store.add("neg1", Tensor::uniform(&[6], 0.8, &mut rng));
        let n2 = store.add("neg2", Tensor::uniform(&[6], 0.8, &mut rng));
        let f = |s: &ParamStore| {
            sgns_pair_loss(
                s.get(c).as_slice(),
                s.get(o).as_slice(),
                &[s.get(n1).as_slice(), s.get(n2).as_slice()],
            )
        };
        let (dc, dctx, dn) = sgns_pair_gradients(
            store.get(c).as_slice(),
            store.get(o).as_slice(),
            &[store.get(n1).as_slice(), store.get(n2).as_slice()],
        );
        let mut g = Grads::zeros_like(&store);
        g.dense_mut(c).as_mut_slice().copy_from_slice(&dc);
        g.dense_mut(o).as_mut_slice().copy_from_slice(&dctx);
        g.dense_mut(n1).as_mut_slice().copy_from_slice(&dn[0]);
        g.dense_mut(n2).as_mut_slice().copy_from_slice(&dn[1]);
        let report = grad_check(&mut store, &g, f, 1e-5).unwrap();
        assert!(report.max_rel_error < 1e-4, "{report:?}");
    }

    #[test]
    fn config_errors() {
        let docs = two_cluster_corpus(4, 3, 4, 0).0;
        let bad_dim = SkipGramConfig { dim: 0, ..Default::default() };
        assert!(train_skipgram(&docs, &bad_dim).is_err());
        let bad_window = SkipGramConfig { window: 0, ..Default::default() };
        assert!(train_skipgram(&docs, &bad_window).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let docs = two_cluster_corpus(60, 5, 6, 1).0;
        let cfg = SkipGramConfig { dim: 8, epochs: 2, seed: 3, ..Default::default() };
        let a = train_skipgram(&docs, &cfg).unwrap();
        let b = train_skipgram(&docs, &cfg).unwrap();
        assert_eq!(a.table, b.table);
        assert_eq!(a.epoch_losses, b.epoch_losses);
        assert_eq!(a.table.dim(), 8);
    }

    #[test]
    fn clusters_separate_and_loss_drops() {
        let (docs, clusters) = two_cluster_corpus(400, 8, 8, 2);
        let cfg = SkipGramConfig { dim: 20, epochs: 5, seed: 1, ..Default::default() };
        let sg = train_skipgram(&docs, &cfg).unwrap();
        assert!(sg.epoch_losses[4] < sg.epoch_losses[0], "{:?}", sg.epoch_losses);
        let (intra, inter) = cluster_cosines(&sg.table, &clusters);
        assert!(intra > inter + 0.1, "intra {intra} inter {inter}");
    }

    pub(crate) fn cluster_cosines(table: &EmbeddingTable, clusters: &[Vec<String>; 2]) -> (f64, f64) {
        let (mut intra, mut n_intra, mut inter, mut n_inter) = (0.0, 0, 0.0, 0);
        let all: Vec<(usize, &String)> =
            clusters.iter().enumerate().flat_map(|(c, ws)| ws.iter().map(move |w| (c, w))).collect();
        for (i, (ca, a)) in all.iter().enumerate() {
            for (cb, b) in &all[i + 1..] {
                let s = cosine(table.vector(a).unwrap(), table.vector(b).unwrap()).unwrap();
                if ca == cb {
                    intra += s;
                    n_intra += 1;
                } else {
                    inter += s;
                    n_inter += 1;
                }
            }
        }
        (intra / n_intra as f64, inter / n_inter as f64)
    }
}
