use super::*;
use crate::corpus::synthetic::{generate_synthetic, Lexicon, SynthConfig};
use crate::corpus::{build_samples, PosClass};

fn samples(n_sentences: usize, seed: u64) -> Vec<MaskedSample> {
    let corpus = generate_synthetic(&Lexicon::default(), &SynthConfig::new(n_sentences, seed)).unwrap();
    let mut out = Vec::new();
    for doc in &corpus.documents {
        out.extend(build_samples(doc, WindowMode::WindowedNoBoundaries, 5).unwrap());
    }
    out
}

fn data(n_sentences: usize) -> TrainData {
    let all = samples(n_sentences, 1);
    let parts = split(&all, 0);
    TrainData { train: parts.train, validation: parts.validation, embeddings: None }
}

fn small(arch: Arch) -> TrainConfig {
    let mut cfg = TrainConfig::defaults(arch);
    cfg.emb_dim = 6;
    cfg.hidden = 4;
    cfg.epochs = 3;
    cfg.batch_size = 16;
    cfg
}

#[test]
fn defaults_per_architecture() {
    let b = TrainConfig::defaults(Arch::Binary);
    assert_eq!((b.epochs, b.batch_size, b.emb_dim), (24, 128, 100));
    assert_eq!((b.sgd_lr, b.sgd_momentum), (0.01, 0.9));
    for arch in [Arch::MltBilstm, Arch::MltFfctx, Arch::MltBilstmctx] {
        let m = TrainConfig::defaults(arch);
        assert_eq!((m.epochs, m.batch_size, m.emb_dim), (35, 512, 200));
        assert_eq!((m.adam_lr, m.adam_beta1, m.adam_beta2, m.adam_eps), (1e-4, 0.9, 0.999, 1e-8));
    }
}

#[test]
fn config_file_and_overrides() {
    let text = "# run\narch = mlt_ffctx\nepochs = 5\n\nbatch_size=516\nwindow = windowed\n";
    let cfg = TrainConfig::resolve(Some((text, "run.cfg")), None, &[]).unwrap();
    assert_eq!((cfg.arch, cfg.epochs, cfg.batch_size), (Arch::MltFfctx, 5, 516));
    assert_eq!(cfg.window, WindowMode::Windowed);
    assert_eq!(cfg.emb_dim, 200);

    let over = [("epochs".to_string(), "7".to_string())];
    let cfg = TrainConfig::resolve(Some((text, "run.cfg")), Some(Arch::Binary), &over).unwrap();
    assert_eq!((cfg.arch, cfg.epochs, cfg.batch_size, cfg.emb_dim), (Arch::Binary, 7, 516, 100));

    let back = TrainConfig::resolve(Some((&cfg.to_config_string(), "x")), None, &[]).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn config_errors() {
    let err = TrainConfig::resolve(Some(("epochs = 2\nnonsense\n", "c")), None, &[]).unwrap_err();
    assert!(matches!(err, TrainError::ConfigSyntax { line: 2, .. }), "{err}");
    assert!(TrainConfig::resolve(Some(("colour = red", "c")), None, &[]).is_err());
    assert!(TrainConfig::resolve(Some(("epochs = many", "c")), None, &[]).is_err());
    assert!(TrainConfig::resolve(Some(("sgd_lr = 0", "c")), None, &[]).is_err());
    assert!(TrainConfig::resolve(Some(("batch_size = 0", "c")), None, &[]).is_err());
    assert!(TrainConfig::resolve(Some(("arch = cnn", "c")), None, &[]).is_err());
}

#[test]
fn binary_training_is_deterministic_and_records_every_epoch() {
    let d = data(120);
    let cfg = small(Arch::Binary);
    let a = train(&cfg, &d).unwrap();
    let b = train(&cfg, &d).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.history.epochs.len(), 3);
    assert_eq!(a.history.to_tsv().lines().count(), 4);
    let (sa, sb) = (a.checkpoint.model.store(), b.checkpoint.model.store());
    assert!(sa.iter().zip(sb.iter()).all(|(x, y)| x.2 == y.2));
    let best = a.history.epochs.iter().map(|e| e.val_balanced_accuracy).fold(f64::MIN, f64::max);
    assert_eq!(a.history.epochs[a.history.selected_epoch - 1].val_balanced_accuracy, best);
}

#[test]
fn thread_count_does_not_change_results() {
    let d = data(80);
    let cfg = small(Arch::MltBilstm);
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| train(&cfg, &d).unwrap())
    };
    let (a, b) = (run(1), run(3));
    assert_eq!(a.history, b.history);
    assert!(a.checkpoint.model.store().iter().zip(b.checkpoint.model.store().iter()).all(|(x, y)| x.2 == y.2));
}

#[test]
fn returned_model_survives_a_checkpoint_round_trip() {
    let d = data(60);
    let out = train(&small(Arch::MltBilstmctx), &d).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_outputs(dir.path(), &small(Arch::MltBilstmctx), &out).unwrap();
    let back = Checkpoint::load(dir.path()).unwrap();
    for s in &d.validation {
        assert_eq!(back.model.predict(&s.window_tokens), out.checkpoint.model.predict(&s.window_tokens));
    }
    assert!(dir.path().join("history.tsv").exists());
}

#[test]
fn multitask_needs_pos_labels() {
    let mut d = data(40);
    for s in d.train.iter_mut() {
        s.pos_label = None;
    }
    let cfg = small(Arch::MltBilstm);
    let err = train(&cfg, &d).unwrap_err();
    assert!(matches!(err, TrainError::MissingPos));
    assert!(err.to_string().contains("tagged"));
    let cfg = TrainConfig { pos_phase: false, ..cfg };
    assert!(train(&cfg, &d).is_ok());
}

#[test]
fn unlabeled_samples_are_counted() {
    let mut d = data(60);
    for s in d.train.iter_mut().step_by(3) {
        s.pos_label = None;
    }
    let excluded = d.train.iter().filter(|s| s.pos_label.is_none()).count();
    let out = train(&small(Arch::MltFfctx), &d).unwrap();
    assert!(out.history.epochs.iter().all(|e| e.pos_excluded == excluded));
    assert!(out.history.epochs.iter().all(|e| e.pos_loss.is_some()));
}

#[test]
fn without_pos_phase_the_pos_head_is_untouched() {
    let d = data(60);
    let cfg = TrainConfig { pos_phase: false, ..small(Arch::MltBilstm) };
    let out = train(&cfg, &d).unwrap();
    let Model::Multitask(trained) = &out.checkpoint.model else { panic!() };
    let vocab = training_vocab(&d.train, 1);
    let mut fresh = MultitaskModel::new(cfg.multitask_config(), EmbeddingInit::Random(vocab), cfg.init_seed).unwrap();
    fresh.store.round_to_f32();
    for id in trained.pos_head_params() {
        assert_eq!(trained.store.get(id), fresh.store.get(id));
    }
    for id in trained.diedat_head_params() {
        assert_ne!(trained.store.get(id), fresh.store.get(id));
    }
}

#[test]
fn empty_sets_are_rejected() {
    let d = TrainData::default();
    assert!(matches!(train(&small(Arch::Binary), &d), Err(TrainError::Config(_))));
    let mut d = data(20);
    d.validation.clear();
    assert!(matches!(train(&small(Arch::Binary), &d), Err(TrainError::Config(_))));
}

#[test]
fn pretrained_embeddings_set_the_vocabulary() {
    let d = data(40);
    let vocab = training_vocab(&d.train, 1);
    let table = EmbeddingTable::random(vocab.clone(), 6, &mut Rng::new(3));
    let d = TrainData { embeddings: Some(table), ..d };
    let out = train(&small(Arch::Binary), &d).unwrap();
    assert_eq!(out.checkpoint.model.vocab(), &vocab);
    let wrong = TrainConfig { emb_dim: 8, ..small(Arch::Binary) };
    assert!(matches!(train(&wrong, &d), Err(TrainError::Model(_))));
}

#[test]
fn losses_fall_on_synthetic_data() {
    let d = data(300);
    for arch in [Arch::Binary, Arch::MltBilstm] {
        let mut cfg = small(arch);
        cfg.epochs = 5;
        cfg.emb_dim = 12;
        cfg.hidden = 8;
        let h = train(&cfg, &d).unwrap().history;
        assert!(h.epochs[4].diedat_loss < h.epochs[0].diedat_loss, "{arch}: {}", h.to_tsv());
        if arch.is_multitask() {
            assert!(h.epochs[4].pos_loss.unwrap() < h.epochs[0].pos_loss.unwrap(), "{}", h.to_tsv());
        }
    }
    assert!(d.train.iter().any(|s| s.pos_label == Some(PosClass::RelativePronoun)));
}
