#![allow(dead_code)]

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, RngExt, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use morphovec::model::{ContextMode, Matrix};
use morphovec::{EmbeddingModel, MorphemeLexicon, Strategy, SubwordIndexer, TrainConfig, Vocab};

pub fn rng(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

const ONSETS: &[&str] = &[
    "b", "c", "d", "f", "g", "l", "m", "n", "p", "r", "s", "t", "v", "br", "tr", "st", "pl", "gr",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou"];
const CODAS: &[&str] = &["", "", "", "n", "r", "s", "l", "m"];

fn syllable<R: Rng>(rng: &mut R) -> String {
    let pick = |xs: &[&str], rng: &mut R| xs[rng.random_range(0..xs.len())].to_string();
    pick(ONSETS, rng) + &pick(VOWELS, rng) + &pick(CODAS, rng)
}

/// Distinct made-up words of `syllables` syllables each, with their
/// syllable segmentation.
pub fn syllable_words<R: Rng>(
    n: usize,
    syllables: std::ops::RangeInclusive<usize>,
    rng: &mut R,
) -> Vec<(String, Vec<String>)> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    while out.len() < n {
        let k = rng.random_range(syllables.clone());
        let parts: Vec<String> = (0..k).map(|_| syllable(rng)).collect();
        let word = parts.concat();
        if seen.insert(word.clone()) {
            out.push((word, parts));
        }
    }
    out
}

/// Two disjoint word sets; every line draws its words from one set only.
pub struct TwoTopics {
    pub topics: [Vec<String>; 2],
    pub lexicon: MorphemeLexicon,
}

pub fn write_two_topic_corpus(
    path: &Path,
    tokens: usize,
    words_per_topic: usize,
    seed: u64,
) -> TwoTopics {
    let mut rng = rng(seed);
    let words = syllable_words(2 * words_per_topic, 2..=3, &mut rng);
    let lexicon: MorphemeLexicon = words.iter().cloned().collect();
    let names: Vec<String> = words.into_iter().map(|(w, _)| w).collect();
    let topics = [
        names[..words_per_topic].to_vec(),
        names[words_per_topic..].to_vec(),
    ];
    let mut out = BufWriter::new(File::create(path).unwrap());
    let mut written = 0;
    while written < tokens {
        let topic = &topics[rng.random_range(0..2)];
        let line: Vec<&str> = (0..12)
            .map(|_| topic[rng.random_range(0..topic.len())].as_str())
            .collect();
        writeln!(out, "{}", line.join(" ")).unwrap();
        written += line.len();
    }
    out.flush().unwrap();
    TwoTopics { topics, lexicon }
}

const FUNCTION_WORDS: &[&str] = &[
    "the", "of", "and", "a", "to", "in", "is", "was", "it", "for", "on", "as", "with", "by", "he",
    "at", "from", "his", "an", "be", "this", "had", "not", "are", "but", "or", "have", "they",
    "which", "one", "you", "were", "her", "all", "she", "there", "would", "their", "we", "him",
];
const PREFIXES: &[&str] = &["un", "re", "pre", "dis", "over", "co"];
const SUFFIXES: &[&str] = &[
    "s", "ed", "ing", "er", "ers", "ly", "ness", "able", "ation", "ations", "ment", "ments", "ist",
    "ists", "ity", "ful", "less", "ive",
];

/// A Zipfian pseudo-language: short frequent function words and content
/// words built as optional prefix + stem + optional suffix.
pub struct PseudoLanguage {
    pub function_words: Vec<String>,
    /// Content words in frequency-rank order.
    pub content: Vec<String>,
    /// Segmentation of every content word.
    pub lexicon: MorphemeLexicon,
    content_cdf: Vec<f64>,
    function_cdf: Vec<f64>,
}

fn zipf_cdf(n: usize, offset: f64, s: f64) -> Vec<f64> {
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = (0..n)
        .map(|r| {
            acc += 1.0 / (r as f64 + 1.0 + offset).powf(s);
            acc
        })
        .collect();
    let total = acc;
    cdf.iter_mut().for_each(|c| *c /= total);
    cdf
}

fn draw(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|&c| c < u).min(cdf.len() - 1)
}

impl PseudoLanguage {
    pub fn new(stems: usize, seed: u64) -> Self {
        let mut rng = rng(seed);
        let stems = syllable_words(stems, 2..=3, &mut rng);
        let mut lexicon = MorphemeLexicon::new();
        let mut content = Vec::new();
        for (stem, _) in &stems {
            let mut forms = vec![vec![stem.clone()]];
            for _ in 0..rng.random_range(1..=4) {
                let suffix = SUFFIXES[rng.random_range(0..SUFFIXES.len())].to_string();
                let mut parts = Vec::new();
                if rng.random::<f64>() < 0.2 {
                    parts.push(PREFIXES[rng.random_range(0..PREFIXES.len())].to_string());
                }
                parts.push(stem.clone());
                parts.push(suffix);
                forms.push(parts);
            }
            for parts in forms {
                let word = parts.concat();
                if lexicon.get(&word).is_none() && !FUNCTION_WORDS.contains(&word.as_str()) {
                    lexicon.insert(word.clone(), parts).unwrap();
                    content.push(word);
                }
            }
        }
        // Shuffle so frequency rank is independent of construction order.
        for i in (1..content.len()).rev() {
            let j = rng.random_range(0..=i);
            content.swap(i, j);
        }
        PseudoLanguage {
            function_words: FUNCTION_WORDS.iter().map(|w| w.to_string()).collect(),
            content_cdf: zipf_cdf(content.len(), 2.0, 1.0),
            function_cdf: zipf_cdf(FUNCTION_WORDS.len(), 1.0, 1.0),
            content,
            lexicon,
        }
    }

    pub fn mean_morphemes(&self) -> f64 {
        let total: usize = self.lexicon.iter().map(|(_, m)| m.len()).sum();
        total as f64 / self.lexicon.len() as f64
    }

    /// Write sentences until the file reaches `bytes`.
    pub fn write_corpus(&self, path: &Path, bytes: usize, seed: u64) {
        let mut rng = rng(seed);
        let mut out = BufWriter::new(File::create(path).unwrap());
        let mut written = 0;
        let mut line = String::new();
        while written < bytes {
            line.clear();
            for i in 0..rng.random_range(6..=20) {
                if i > 0 {
                    line.push(' ');
                }
                let u = rng.random::<f64>();
                if rng.random::<f64>() < 0.45 {
                    line.push_str(&self.function_words[draw(&self.function_cdf, u)]);
                } else {
                    line.push_str(&self.content[draw(&self.content_cdf, u)]);
                }
            }
            line.push('\n');
            out.write_all(line.as_bytes()).unwrap();
            written += line.len();
        }
        out.flush().unwrap();
    }

    pub fn write_lexicon(&self, path: &Path) {
        let mut out = BufWriter::new(File::create(path).unwrap());
        for (w, m) in self.lexicon.iter() {
            writeln!(out, "{w}\t{}", m.join(" ")).unwrap();
        }
        out.flush().unwrap();
    }
}

/// Single-threaded configuration without subsampling, for small tests.
pub fn small_config(strategy: Strategy, dim: usize, epochs: u32, seed: u64) -> TrainConfig {
    TrainConfig {
        dim,
        epochs,
        min_count: 1,
        subsample: 0.0,
        threads: 1,
        seed,
        strategy,
        table_size: 100_000,
        progress_interval: None,
        ..TrainConfig::default()
    }
}

pub fn cos(u: &[f64], v: &[f64]) -> f64 {
    let d: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    d / (nu * nv)
}

/// Mean pairwise cosine within topics minus mean cosine across topics.
pub fn topic_margin(model: &EmbeddingModel, topics: &[Vec<String>; 2]) -> f64 {
    let vecs: Vec<Vec<Vec<f64>>> = topics
        .iter()
        .map(|t| {
            t.iter()
                .map(|w| model.word_vector(model.vocab().id(w).unwrap()).unwrap())
                .collect()
        })
        .collect();
    let (mut within, mut nw, mut across, mut na) = (0.0, 0, 0.0, 0);
    for (ti, a) in vecs.iter().enumerate() {
        for (i, u) in a.iter().enumerate() {
            for v in &a[i + 1..] {
                within += cos(u, v);
                nw += 1;
            }
            for v in &vecs[1 - ti] {
                across += cos(u, v);
                na += 1;
            }
        }
    }
    within / nw as f64 - across / na as f64
}

/// Small model over words `w0..w{n}` with random parameters in `[-1, 1)` on
/// both sides.
pub fn random_model<R: Rng>(
    n_words: usize,
    dim: usize,
    lexicon: MorphemeLexicon,
    mode: ContextMode,
    rng: &mut R,
) -> EmbeddingModel {
    let counts = (0..n_words).map(|i| (format!("w{i}"), (n_words - i) as u64 + 1));
    let vocab = Vocab::from_counts(counts, 1, 0.0, 1000).unwrap();
    let indexer = SubwordIndexer::new(Strategy::Morpheme(lexicon), vocab.len()).unwrap();
    let mut fill = |rows: usize| {
        let data = (0..rows * dim)
            .map(|_| rng.random::<f32>() * 2.0 - 1.0)
            .collect();
        Matrix::from_vec(rows, dim, data).unwrap()
    };
    let input = fill(indexer.total_slots());
    let output = fill(vocab.len());
    EmbeddingModel::from_parts(vocab, indexer, input, output, mode).unwrap()
}

/// Plain skip-gram negative-sampling update on one word vector, written out
/// independently of the library. Parameters are f32, arithmetic is f64.
pub fn reference_sgns_step(
    input: &mut [Vec<f32>],
    output: &mut [Vec<f32>],
    center: usize,
    positive: usize,
    negatives: &[usize],
    lr: f64,
) {
    fn logistic(x: f64) -> f64 {
        if x >= 0.0 {
            1.0 / (1.0 + (-x).exp())
        } else {
            x.exp() / (1.0 + x.exp())
        }
    }
    let h: Vec<f64> = input[center].iter().map(|&x| x as f64).collect();
    let mut grad = vec![0.0f64; h.len()];
    let mut targets = vec![(positive, 1.0)];
    targets.extend(negatives.iter().map(|&n| (n, 0.0)));
    for (t, label) in targets {
        let mut s = 0.0;
        for i in 0..h.len() {
            s += h[i] * output[t][i] as f64;
        }
        let g = logistic(s) - label;
        for i in 0..h.len() {
            let r = output[t][i] as f64;
            grad[i] += g * r;
            output[t][i] = (r - lr * (g * h[i])) as f32;
        }
    }
    for i in 0..h.len() {
        input[center][i] = (input[center][i] as f64 - lr * grad[i]) as f32;
    }
}
