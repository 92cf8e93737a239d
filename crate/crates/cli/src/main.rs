use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{Parser, Subcommand};

use diedat::commands::{
    embed, eval_command, predict_command, preprocess, synth, train_command, EmbedArgs, EvalArgs, PredictArgs,
    PreprocessArgs, SynthArgs, TrainArgs,
};
use diedat::corpus::{CorpusFormat, WindowMode};
use diedat::embedding::SkipGramConfig;
use diedat::eval::Task;
use diedat::model::Arch;

/// Die/dat prediction for Dutch: corpus preparation, embeddings, training,
/// evaluation and correction suggestions.
#[derive(Parser)]
#[command(name = "diedat", version)]
struct Cli {
    /// Worker threads for training and evaluation (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mask every die/dat occurrence and write the windowed dataset.
    Preprocess {
        /// Corpus file.
        #[arg(long = "in")]
        input: PathBuf,
        /// plain (one sentence per line) or tagged (token<TAB>tag per line).
        #[arg(long, default_value = "plain")]
        format: CorpusFormat,
        /// full, windowed or windowed_no_boundaries.
        #[arg(long, default_value = "windowed_no_boundaries")]
        mode: WindowMode,
        /// Tokens kept on each side of the mask.
        #[arg(long, default_value_t = 5)]
        radius: usize,
        /// Dataset TSV to write.
        #[arg(long)]
        out: PathBuf,
        /// Directory for the train/validation/test split files and stats.
        #[arg(long)]
        splits: Option<PathBuf>,
        /// Seed of the 70/15/15 split.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Generate a synthetic die/dat corpus with known labels.
    Synth {
        /// Number of sentences.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Lexicon file; the built-in lexicon is used when absent.
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Share of occurrences whose antecedent is in the previous sentence.
        #[arg(long, default_value_t = 0.3)]
        cross_sentence: f64,
        /// plain or tagged.
        #[arg(long, default_value = "tagged")]
        format: CorpusFormat,
        /// Corpus file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train skip-gram word vectors (word2vec text format).
    Embed {
        /// Corpus file.
        #[arg(long = "in")]
        input: PathBuf,
        /// plain or tagged.
        #[arg(long, default_value = "plain")]
        format: CorpusFormat,
        /// Vector width (100 for the binary model, 200 for multitask).
        #[arg(long, default_value_t = 100)]
        dim: usize,
        /// Vectors file to write.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Maximum context distance.
        #[arg(long, default_value_t = 5)]
        window: usize,
        /// Negative samples per pair.
        #[arg(long, default_value_t = 5)]
        negatives: usize,
        #[arg(long, default_value_t = 5)]
        epochs: usize,
        /// Initial learning rate.
        #[arg(long, default_value_t = 0.025)]
        lr: f64,
        /// Minimum token frequency.
        #[arg(long, default_value_t = 1)]
        min_count: usize,
    },
    /// Train a classifier and write its checkpoint directory.
    Train {
        /// Flat key = value configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// binary, mlt_bilstm, mlt_ffctx or mlt_bilstmctx.
        #[arg(long)]
        arch: Option<Arch>,
        /// Checkpoint directory to write.
        #[arg(long)]
        out: PathBuf,
        /// Full dataset, split with split_seed.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Training split.
        #[arg(long)]
        train: Option<PathBuf>,
        /// Validation split.
        #[arg(long)]
        validation: Option<PathBuf>,
        /// Pretrained vectors.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        /// Any configuration key, as key=value; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Evaluate a checkpoint on a dataset.
    Eval {
        /// Checkpoint directory.
        #[arg(long)]
        ckpt: PathBuf,
        /// Dataset TSV.
        #[arg(long)]
        data: PathBuf,
        /// diedat, pos or both.
        #[arg(long, default_value = "diedat")]
        task: Task,
        /// Also write the report as TSV.
        #[arg(long)]
        tsv: Option<PathBuf>,
    },
    /// Predict every die/dat in pre-tokenized text and flag suggested corrections.
    Predict {
        /// Checkpoint directory.
        #[arg(long)]
        ckpt: PathBuf,
        /// Whitespace-tokenized text, one sentence per line.
        #[arg(long = "in")]
        input: PathBuf,
        /// Report file; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn overrides(
    data: Option<PathBuf>,
    train: Option<PathBuf>,
    validation: Option<PathBuf>,
    embeddings: Option<PathBuf>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    set: Vec<String>,
) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let paths = [("data", data), ("train", train), ("validation", validation), ("embeddings", embeddings)];
    for (k, v) in paths {
        if let Some(v) = v {
            out.push((k.to_string(), v.display().to_string()));
        }
    }
    if let Some(e) = epochs {
        out.push(("epochs".into(), e.to_string()));
    }
    if let Some(b) = batch_size {
        out.push(("batch_size".into(), b.to_string()));
    }
    for kv in set {
        let (k, v) = kv.split_once('=').ok_or_else(|| anyhow!("--set expects KEY=VALUE, got `{kv}`"))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| anyhow!("cannot set up the thread pool: {e}"))?;
    }
    let report = match cli.command {
        Command::Preprocess { input, format, mode, radius, out, splits, seed } => {
            preprocess(&PreprocessArgs { input, format, mode, radius, out, splits, seed })?
        }
        Command::Synth { n, seed, lexicon, cross_sentence, format, out } => synth(&SynthArgs {
            n_sentences: n,
            seed,
            lexicon,
            cross_sentence_fraction: cross_sentence,
            format,
            out,
        })?,
        Command::Embed { input, format, dim, out, seed, window, negatives, epochs, lr, min_count } => {
            let config = SkipGramConfig { dim, window, negatives, epochs, lr, min_count, seed };
            embed(&EmbedArgs { input, format, out, config })?
        }
        Command::Train { config, arch, out, data, train, validation, embeddings, epochs, batch_size, set } => {
            let overrides = overrides(data, train, validation, embeddings, epochs, batch_size, set)?;
            train_command(&TrainArgs { config, arch, overrides, out })?
        }
        Command::Eval { ckpt, data, task, tsv } => eval_command(&EvalArgs { checkpoint: ckpt, data, task, tsv })?,
        Command::Predict { ckpt, input, out } => {
            let to_stdout = out.is_none();
            let report = predict_command(&PredictArgs { checkpoint: ckpt, input, out })?;
            if to_stdout {
                report
            } else {
                String::new()
            }
        }
    };
    print!("{report}");
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
