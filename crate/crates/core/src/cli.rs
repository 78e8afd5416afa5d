//! Command-line interface: `train`, `eval`, `vocab`, `inspect`, `bench`.
//!
//! File formats:
//! - corpus: UTF-8 text, tokens separated by whitespace, any number per line
//! - lexicon: `word<TAB>morpheme morpheme ...`, one word per line
//! - vectors: header `<count> <dim>`, then `word v1 ... vd` per line
//! - similarity: `word1<TAB>word2<TAB>score`
//! - analogy: `a b c d`, with optional `: section` lines
//! - categorization: `word<TAB>category`

use std::ffi::OsString;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::corpus::{Vocab, DEFAULT_TABLE_SIZE};
use crate::error::{Error, Result};
use crate::eval::{
    self, AnalogyDataset, CategorizationDataset, OovPolicy, SimilarityDataset, WordEmbeddings,
    DEFAULT_RESTARTS,
};
use crate::model::ContextMode;
use crate::persist;
use crate::subword::{
    NgramParams, Strategy, SubwordIndexer, DEFAULT_BUCKETS, DEFAULT_NGRAM_MAX, DEFAULT_NGRAM_MIN,
};
use crate::trainer::{self, TrainConfig, TrainReport};

pub const THREADS_ENV: &str = "MORPHOVEC_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "morphovec",
    version,
    about = "Skip-gram word embeddings with word, n-gram, or morpheme composition"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train embeddings and write a vector file.
    Train(TrainArgs),
    /// Score vectors on similarity, analogy, and categorization datasets.
    Eval(EvalArgs),
    /// Print the vocabulary as `word<TAB>count`, most frequent first.
    Vocab(VocabArgs),
    /// Show the slots a word is composed from.
    Inspect(InspectArgs),
    /// Train two strategies under identical settings and compare throughput.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Word,
    Ngram,
    Morpheme,
}

#[derive(Args, Debug, Clone)]
pub struct SubwordArgs {
    /// Morpheme lexicon (`word<TAB>morphemes`), required for morpheme mode.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Shortest character n-gram.
    #[arg(long, default_value_t = DEFAULT_NGRAM_MIN)]
    pub nmin: usize,
    /// Longest character n-gram.
    #[arg(long, default_value_t = DEFAULT_NGRAM_MAX)]
    pub nmax: usize,
    /// Hash buckets for n-grams.
    #[arg(long, default_value_t = DEFAULT_BUCKETS)]
    pub buckets: u32,
    /// Wrap words in `<` and `>` before extracting n-grams.
    #[arg(long)]
    pub boundary_markers: bool,
}

impl SubwordArgs {
    fn strategy(&self, mode: Mode) -> Result<Strategy> {
        Ok(match mode {
            Mode::Word => Strategy::WordOnly,
            Mode::Ngram => {
                let params = NgramParams {
                    n_min: self.nmin,
                    n_max: self.nmax,
                    buckets: self.buckets,
                    boundary_markers: self.boundary_markers,
                };
                params.validate()?;
                Strategy::CharNgram(params)
            }
            Mode::Morpheme => {
                let path = self
                    .lexicon
                    .as_deref()
                    .ok_or_else(|| Error::Config("morpheme mode needs --lexicon".into()))?;
                Strategy::Morpheme(persist::load_lexicon(path)?)
            }
        })
    }
}

#[derive(Args, Debug, Clone)]
pub struct TrainingArgs {
    /// Training corpus.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Embedding dimension.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
    pub dim: u32,
    #[arg(long, default_value_t = 20)]
    pub epochs: u32,
    /// Maximum context window.
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    /// Negative samples per positive pair.
    #[arg(long, default_value_t = 5)]
    pub negatives: usize,
    /// Initial learning rate, decayed linearly.
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 5)]
    pub min_count: u64,
    /// Subsampling threshold; 0 disables it.
    #[arg(long, default_value_t = 1e-4)]
    pub subsample: f64,
    #[arg(long, env = THREADS_ENV, default_value_t = 12)]
    pub threads: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Score with composed vectors on both sides of each pair.
    #[arg(long)]
    pub compose_both: bool,
    /// Use a precomputed sigmoid table instead of the exact function.
    #[arg(long)]
    pub sigmoid_table: bool,
    /// Negative-sampling table size.
    #[arg(long, default_value_t = DEFAULT_TABLE_SIZE)]
    pub table_size: usize,
    /// Tokens per thread between progress lines; 0 disables them.
    #[arg(long, default_value_t = 100_000)]
    pub progress: u64,
    #[command(flatten)]
    pub subword: SubwordArgs,
}

impl TrainingArgs {
    fn config(&self, mode: Mode) -> Result<TrainConfig> {
        let config = TrainConfig {
            dim: self.dim as usize,
            epochs: self.epochs,
            window: self.window,
            negatives: self.negatives,
            lr: self.lr,
            min_count: self.min_count,
            subsample: self.subsample,
            threads: self.threads,
            seed: self.seed,
            strategy: self.subword.strategy(mode)?,
            context_mode: if self.compose_both {
                ContextMode::Composed
            } else {
                ContextMode::Output
            },
            sigmoid_table: self.sigmoid_table,
            table_size: self.table_size,
            progress_interval: (self.progress > 0).then_some(self.progress),
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Vector file to write.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Word)]
    pub mode: Mode,
    /// Also write a binary checkpoint of the whole model.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Export raw word rows instead of composed word vectors.
    #[arg(long)]
    pub raw: bool,
    #[command(flatten)]
    pub training: TrainingArgs,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["vectors", "checkpoint"])))]
#[command(group(clap::ArgGroup::new("datasets").required(true).multiple(true)
    .args(["similarity", "analogy", "categorization"])))]
pub struct EvalArgs {
    /// Text vector file.
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    /// Binary checkpoint; out-of-vocabulary words are composed from subwords.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub similarity: Vec<PathBuf>,
    #[arg(long)]
    pub analogy: Vec<PathBuf>,
    #[arg(long)]
    pub categorization: Vec<PathBuf>,
    /// Similarity pairs with an unrepresentable word: drop them, or fail.
    #[arg(long, value_enum, default_value_t = Oov::Drop)]
    pub oov: Oov,
    /// k-means restarts for categorization.
    #[arg(long, default_value_t = DEFAULT_RESTARTS)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Oov {
    Drop,
    Error,
}

#[derive(Args, Debug)]
pub struct VocabArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub min_count: u64,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    #[arg(long)]
    pub word: String,
    #[arg(long, value_enum, default_value_t = Mode::Word)]
    pub mode: Mode,
    /// Take strategy and vocabulary from a checkpoint instead of flags.
    #[arg(long, conflicts_with = "mode")]
    pub checkpoint: Option<PathBuf>,
    #[command(flatten)]
    pub subword: SubwordArgs,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Strategy of the first arm.
    #[arg(long, value_enum, default_value_t = Mode::Ngram)]
    pub baseline: Mode,
    /// Strategy of the second arm.
    #[arg(long, value_enum, default_value_t = Mode::Morpheme)]
    pub candidate: Mode,
    #[command(flatten)]
    pub training: TrainingArgs,
}

/// Parse `args` and run; usage errors exit with 2, runtime errors with 1.
pub fn main_from<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    if let Err(msg) = check_usage(&cli) {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    let stdout = io::stdout();
    match run(cli, &mut stdout.lock()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

/// Cross-flag requirements that clap cannot express directly.
fn check_usage(cli: &Cli) -> std::result::Result<(), String> {
    let needs_lexicon = |modes: &[Mode], sub: &SubwordArgs| {
        if modes.contains(&Mode::Morpheme) && sub.lexicon.is_none() {
            Err("--lexicon is required with --mode morpheme".to_string())
        } else {
            Ok(())
        }
    };
    match &cli.command {
        Command::Train(a) => needs_lexicon(&[a.mode], &a.training.subword),
        Command::Inspect(a) if a.checkpoint.is_none() => needs_lexicon(&[a.mode], &a.subword),
        Command::Bench(a) => needs_lexicon(&[a.baseline, a.candidate], &a.training.subword),
        _ => Ok(()),
    }
}

/// Execute a parsed command, writing data to `out`. Returns the exit code.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<u8> {
    match cli.command {
        Command::Train(a) => cmd_train(&a, out),
        Command::Eval(a) => cmd_eval(&a, out),
        Command::Vocab(a) => cmd_vocab(&a, out),
        Command::Inspect(a) => cmd_inspect(&a, out),
        Command::Bench(a) => cmd_bench(&a, out),
    }
}

fn cmd_train(a: &TrainArgs, _out: &mut dyn Write) -> Result<u8> {
    let config = a.training.config(a.mode)?;
    let (model, report) = trainer::train(&a.training.corpus, &config)?;
    log_report(&config, &report);
    persist::save_vectors_text(&model, &a.output, !a.raw)?;
    if let Some(path) = &a.checkpoint {
        persist::save_checkpoint(&model, &config, path)?;
    }
    Ok(0)
}

fn log_report(config: &TrainConfig, r: &TrainReport) {
    eprintln!(
        "mode={} tokens={} pairs={} loss={:.6} tok/s={:.0} wall={:.3}s bag={:.3}",
        config.strategy.name(),
        r.tokens_processed,
        r.pairs,
        r.mean_loss,
        r.tokens_per_sec,
        r.elapsed.as_secs_f64(),
        r.mean_bag_len
    );
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<u8> {
    let emb: Box<dyn WordEmbeddings> = match (&a.vectors, &a.checkpoint) {
        (Some(p), _) => Box::new(persist::load_vectors_text(p)?),
        (None, Some(p)) => Box::new(persist::load_checkpoint(p)?.0),
        (None, None) => {
            return Err(Error::Config(
                "--vectors or --checkpoint is required".into(),
            ))
        }
    };
    let emb = emb.as_ref();
    let policy = match a.oov {
        Oov::Drop => OovPolicy::Drop,
        Oov::Error => OovPolicy::Error,
    };
    writeln!(out, "# dataset metric value coverage fraction; analogy excludes a b c; lookup exact then lowercase")?;
    let mut failed = false;
    let mut report = |path: &Path, line: Result<String>| -> io::Result<()> {
        match line {
            Ok(l) => writeln!(out, "{l}"),
            Err(e) => {
                failed = true;
                eprintln!("{}: {e}", dataset_name(path));
                Ok(())
            }
        }
    };
    for p in &a.similarity {
        let line = SimilarityDataset::load(p)
            .and_then(|ds| eval::eval_similarity(emb, &ds, policy))
            .map(|r| eval::report_line(&dataset_name(p), "spearman", r.rho, r.coverage()));
        report(p, line)?;
    }
    for p in &a.analogy {
        let line = AnalogyDataset::load(p)
            .and_then(|ds| eval::eval_analogy(emb, &ds))
            .map(|r| eval::report_line(&dataset_name(p), "accuracy", r.accuracy(), r.coverage()));
        report(p, line)?;
    }
    for p in &a.categorization {
        let line = CategorizationDataset::load(p)
            .and_then(|ds| eval::eval_categorization(emb, &ds, a.restarts, a.seed))
            .map(|r| eval::report_line(&dataset_name(p), "purity", r.purity, r.coverage()));
        report(p, line)?;
    }
    Ok(u8::from(failed))
}

fn cmd_vocab(a: &VocabArgs, out: &mut dyn Write) -> Result<u8> {
    let vocab = Vocab::from_corpus(&a.corpus, a.min_count, 0.0, 1)?;
    let mut w = io::BufWriter::new(out);
    for (word, count) in vocab.words().iter().zip(vocab.counts()) {
        writeln!(w, "{word}\t{count}")?;
    }
    w.flush()?;
    Ok(0)
}

fn cmd_inspect(a: &InspectArgs, out: &mut dyn Write) -> Result<u8> {
    let checkpoint;
    let standalone;
    let (indexer, word_id): (&SubwordIndexer, Option<u32>) = match &a.checkpoint {
        Some(p) => {
            checkpoint = persist::load_checkpoint(p)?.0;
            (checkpoint.indexer(), checkpoint.vocab().id(&a.word))
        }
        None => {
            // Without a vocabulary the word itself occupies slot 0.
            standalone = SubwordIndexer::new(a.subword.strategy(a.mode)?, 1)?;
            (&standalone, Some(0))
        }
    };
    let mut bag = Vec::new();
    match word_id {
        Some(id) => bag.push((a.word.clone(), id)),
        None => writeln!(out, "# {} is out of vocabulary", a.word)?,
    }
    let base = indexer.vocab_size() as u32;
    bag.extend(
        indexer
            .subword_tokens(&a.word)
            .into_iter()
            .map(|(tok, off)| (tok, base + off)),
    );
    for (tok, slot) in &bag {
        writeln!(out, "{tok}\t{slot}")?;
    }
    writeln!(out, "size\t{}", bag.len())?;
    Ok(0)
}

fn cmd_bench(a: &BenchArgs, out: &mut dyn Write) -> Result<u8> {
    writeln!(out, "# arm mode tokens tok/s wall_s mean_bag")?;
    let mut rates = Vec::new();
    for (arm, mode) in [("baseline", a.baseline), ("candidate", a.candidate)] {
        let config = a.training.config(mode)?;
        let (_, report) = trainer::train(&a.training.corpus, &config)?;
        log_report(&config, &report);
        writeln!(
            out,
            "{arm} {} {} {:.1} {:.3} {:.3}",
            config.strategy.name(),
            report.tokens_processed,
            report.tokens_per_sec,
            report.elapsed.as_secs_f64(),
            report.mean_bag_len
        )?;
        rates.push(report.tokens_per_sec);
    }
    writeln!(out, "ratio {:.4}", rates[1] / rates[0])?;
    Ok(0)
}
