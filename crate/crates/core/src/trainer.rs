//! Epoch driver for skip-gram training with negative sampling.
//!
//! The corpus file is split into one byte range per worker, aligned to line
//! starts. Workers stream their range once per epoch and update the shared
//! matrices without locks. The learning rate decays linearly with a global
//! token counter. With one worker, training is fully deterministic.

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use rand::{Rng, RngExt, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::corpus::{self, Vocab};
use crate::error::{Error, Result};
use crate::model::{sgns_step, ContextMode, EmbeddingModel, Sigmoid, StepScratch};
use crate::subword::{Strategy, SubwordIndexer};

/// Redraws allowed when a negative equals the positive word.
const MAX_REDRAWS: usize = 32;
const LR_FLOOR: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub epochs: u32,
    /// Maximum context window; the effective window is drawn per center.
    pub window: usize,
    pub negatives: usize,
    pub lr: f64,
    pub min_count: u64,
    /// Subsampling threshold; 0 disables subsampling.
    pub subsample: f64,
    pub threads: usize,
    pub seed: u64,
    pub strategy: Strategy,
    pub context_mode: ContextMode,
    pub sigmoid_table: bool,
    pub table_size: usize,
    /// Tokens per worker between progress lines on stderr.
    pub progress_interval: Option<u64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 100,
            epochs: 20,
            window: 5,
            negatives: 5,
            lr: 0.1,
            min_count: corpus::DEFAULT_MIN_COUNT,
            subsample: corpus::DEFAULT_SUBSAMPLE,
            threads: 12,
            seed: 1,
            strategy: Strategy::WordOnly,
            context_mode: ContextMode::Output,
            sigmoid_table: false,
            table_size: corpus::DEFAULT_TABLE_SIZE,
            progress_interval: Some(100_000),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.to_owned()));
        if self.dim < 1 {
            return fail("dimension must be at least 1");
        }
        if self.epochs < 1 {
            return fail("epochs must be at least 1");
        }
        if self.window < 1 {
            return fail("window must be at least 1");
        }
        if self.negatives < 1 {
            return fail("negatives must be at least 1");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail("learning rate must be positive");
        }
        if self.min_count < 1 {
            return fail("min_count must be at least 1");
        }
        if !(self.subsample >= 0.0 && self.subsample.is_finite()) {
            return fail("subsample threshold must be non-negative");
        }
        if self.threads < 1 {
            return fail("threads must be at least 1");
        }
        if let Strategy::CharNgram(p) = &self.strategy {
            p.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    /// In-vocabulary tokens read, before subsampling, over all epochs.
    pub tokens_processed: u64,
    /// Center positions that survived subsampling.
    pub centers: u64,
    pub pairs: u64,
    pub elapsed: Duration,
    pub tokens_per_sec: f64,
    /// Mean loss per (center, context) pair.
    pub mean_loss: f64,
    pub mean_bag_len: f64,
}

/// Build the vocabulary and indexer from `corpus`, then train a fresh model.
pub fn train(corpus: &Path, config: &TrainConfig) -> Result<(EmbeddingModel, TrainReport)> {
    config.validate()?;
    let vocab = Vocab::from_corpus(
        corpus,
        config.min_count,
        config.subsample,
        config.table_size,
    )?;
    let indexer = SubwordIndexer::new(config.strategy.clone(), vocab.len())?;
    let mut model =
        EmbeddingModel::new(vocab, indexer, config.dim, config.context_mode, config.seed)?;
    let report = train_model(&mut model, corpus, config)?;
    Ok((model, report))
}

/// Run `config.epochs` passes over `corpus`, updating `model` in place.
pub fn train_model(
    model: &mut EmbeddingModel,
    corpus: &Path,
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    let ranges = corpus::byte_ranges(corpus, config.threads)?;
    let sigmoid = if config.sigmoid_table {
        Sigmoid::table()
    } else {
        Sigmoid::Exact
    };
    let mean_bag_len = model.mean_bag_len();
    let dim = model.dim();
    let (input, output, bags, vocab, mode) = model.shared_parts();
    let planned = vocab.total_tokens() * u64::from(config.epochs);
    let counter = AtomicU64::new(0);

    let start = Instant::now();
    let results: Vec<Result<WorkerStats>> = std::thread::scope(|s| {
        let handles: Vec<_> = ranges
            .iter()
            .enumerate()
            .map(|(worker, &(lo, hi))| {
                let ctx = WorkerContext {
                    corpus,
                    range: (lo, hi),
                    config,
                    vocab,
                    planned,
                    counter: &counter,
                };
                let input = &input;
                let output = &output;
                let sigmoid = &sigmoid;
                s.spawn(move || {
                    let mut rng = worker_rng(config.seed, worker);
                    let mut scratch = StepScratch::new(dim);
                    ctx.run(&mut rng, |center, positive, negatives, lr| {
                        sgns_step(
                            input,
                            output,
                            bags,
                            mode,
                            sigmoid,
                            center,
                            positive,
                            negatives,
                            lr,
                            &mut scratch,
                        )
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("training worker panicked"))
            .collect()
    });
    let elapsed = start.elapsed();

    let mut total = WorkerStats::default();
    for r in results {
        total.merge(&r?);
    }
    let secs = elapsed.as_secs_f64().max(1e-9);
    Ok(TrainReport {
        tokens_processed: total.tokens,
        centers: total.centers,
        pairs: total.pairs,
        elapsed,
        tokens_per_sec: total.tokens as f64 / secs,
        mean_loss: if total.pairs > 0 {
            total.loss / total.pairs as f64
        } else {
            0.0
        },
        mean_bag_len,
    })
}

fn worker_rng(seed: u64, worker: usize) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed.wrapping_add(1 + worker as u64))
}

/// Half-width of the context window for one center, uniform in
/// `[1, max_window]`.
pub fn dynamic_window<R: Rng + ?Sized>(max_window: usize, rng: &mut R) -> usize {
    rng.random_range(1..=max_window.max(1))
}

/// Linearly decayed learning rate, never below `1e-4 * lr0`.
pub fn lr_at(tokens_processed: u64, total_planned: u64, lr0: f64) -> f64 {
    let progress = if total_planned == 0 {
        1.0
    } else {
        tokens_processed as f64 / total_planned as f64
    };
    lr0 * (1.0 - progress).max(LR_FLOOR)
}

/// Draw `k` negatives uniformly from `table`, redrawing any that equal
/// `positive` up to 32 times.
pub fn draw_negatives<R: Rng + ?Sized>(
    table: &[u32],
    k: usize,
    positive: u32,
    rng: &mut R,
) -> Vec<u32> {
    let mut out = Vec::with_capacity(k);
    fill_negatives(table, k, positive, rng, &mut out);
    out
}

fn fill_negatives<R: Rng + ?Sized>(
    table: &[u32],
    k: usize,
    positive: u32,
    rng: &mut R,
    out: &mut Vec<u32>,
) {
    out.clear();
    for _ in 0..k {
        let mut neg = table[rng.random_range(0..table.len())];
        let mut tries = 0;
        while neg == positive && tries < MAX_REDRAWS {
            neg = table[rng.random_range(0..table.len())];
            tries += 1;
        }
        if neg == positive {
            log::debug!("negative equals positive {positive} after {MAX_REDRAWS} redraws");
        }
        out.push(neg);
    }
}

/// Skip-gram pairs `(center position, context position)` of a sentence of
/// `len` tokens for a center at `i` and window half-width `w`.
pub fn context_positions(len: usize, i: usize, w: usize) -> impl Iterator<Item = usize> {
    let lo = i.saturating_sub(w);
    let hi = (i + w).min(len.saturating_sub(1));
    (lo..=hi).filter(move |&j| j != i)
}

#[derive(Clone, Debug, Default)]
struct WorkerStats {
    tokens: u64,
    centers: u64,
    pairs: u64,
    loss: f64,
}

impl WorkerStats {
    fn merge(&mut self, other: &WorkerStats) {
        self.tokens += other.tokens;
        self.centers += other.centers;
        self.pairs += other.pairs;
        self.loss += other.loss;
    }
}

struct WorkerContext<'a> {
    corpus: &'a Path,
    range: (u64, u64),
    config: &'a TrainConfig,
    vocab: &'a Vocab,
    planned: u64,
    counter: &'a AtomicU64,
}

impl WorkerContext<'_> {
    fn run<R, F>(&self, rng: &mut R, mut step: F) -> Result<WorkerStats>
    where
        R: Rng,
        F: FnMut(u32, u32, &[u32], f64) -> f64,
    {
        let cfg = self.config;
        let table = self.vocab.negative_table();
        let mut stats = WorkerStats::default();
        // (word id, index among in-vocabulary tokens of the line)
        let mut sentence: Vec<(u32, u64)> = Vec::new();
        let mut negatives = Vec::with_capacity(cfg.negatives);

        let started = Instant::now();
        let mut next_report = cfg.progress_interval.unwrap_or(u64::MAX);
        let mut interval_loss = 0.0;
        let mut interval_pairs = 0u64;

        for _ in 0..cfg.epochs {
            corpus::for_each_line(self.corpus, self.range.0, self.range.1, |line| {
                sentence.clear();
                let mut read = 0u64;
                for token in corpus::tokenize(line) {
                    if let Some(id) = self.vocab.id(token) {
                        if self.vocab.keep_token(id, rng) {
                            sentence.push((id, read));
                        }
                        read += 1;
                    }
                }
                if read == 0 {
                    return true;
                }
                let base = self.counter.fetch_add(read, Ordering::Relaxed);
                stats.tokens += read;
                stats.centers += sentence.len() as u64;

                for i in 0..sentence.len() {
                    let (center, offset) = sentence[i];
                    let lr = lr_at((base + offset).min(self.planned), self.planned, cfg.lr);
                    let w = dynamic_window(cfg.window, rng);
                    for j in context_positions(sentence.len(), i, w) {
                        let positive = sentence[j].0;
                        fill_negatives(table, cfg.negatives, positive, rng, &mut negatives);
                        let loss = step(center, positive, &negatives, lr);
                        stats.pairs += 1;
                        stats.loss += loss;
                        interval_pairs += 1;
                        interval_loss += loss;
                    }
                }

                if stats.tokens >= next_report {
                    let lr = lr_at((base + read).min(self.planned), self.planned, cfg.lr);
                    let secs = started.elapsed().as_secs_f64().max(1e-9);
                    eprintln!(
                        "tokens={} lr={:.6} loss={:.6} tok/s={:.1}",
                        stats.tokens,
                        lr,
                        interval_loss / interval_pairs.max(1) as f64,
                        stats.tokens as f64 / secs
                    );
                    interval_loss = 0.0;
                    interval_pairs = 0;
                    next_report = stats.tokens + cfg.progress_interval.unwrap_or(u64::MAX);
                }
                true
            })?;
        }
        Ok(stats)
    }
}
