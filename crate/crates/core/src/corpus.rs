//! Corpus streaming and vocabulary construction.
//!
//! A corpus is UTF-8 text with one or more sentences per line. Tokens are
//! maximal runs of non-whitespace characters; no normalization is applied.
//! Lines are sentence boundaries: training windows never cross them.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Seek, SeekFrom};
use std::path::Path;

use rand::{Rng, RngExt};

use crate::error::{Error, Result};

pub const DEFAULT_MIN_COUNT: u64 = 5;
pub const DEFAULT_SUBSAMPLE: f64 = 1e-4;
pub const DEFAULT_TABLE_SIZE: usize = 10_000_000;
pub const NEGATIVE_POWER: f64 = 0.75;

/// Split a line into whitespace-delimited tokens.
pub fn tokenize(line: &str) -> impl Iterator<Item = &str> {
    line.split_whitespace()
}

/// Word inventory with frequency statistics and the noise distribution used
/// for negative sampling.
///
/// Ids are contiguous from 0 and ordered by descending count, ties broken by
/// byte-wise lexicographic order of the surface form.
#[derive(Clone, Debug)]
pub struct Vocab {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
    total_tokens: u64,
    min_count: u64,
    subsample_t: f64,
    keep_prob: Vec<f64>,
    neg_table: Vec<u32>,
}

impl Vocab {
    /// Count a token stream and build a vocabulary with the default
    /// negative-table size.
    pub fn build<I, S>(tokens: I, min_count: u64, subsample_t: f64) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self::build_with_table(tokens, min_count, subsample_t, DEFAULT_TABLE_SIZE)
    }

    pub fn build_with_table<I, S>(
        tokens: I,
        min_count: u64,
        subsample_t: f64,
        table_size: usize,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut counts: HashMap<String, u64> = HashMap::new();
        for token in tokens {
            let token = token.as_ref();
            match counts.get_mut(token) {
                Some(c) => *c += 1,
                None => {
                    counts.insert(token.to_owned(), 1);
                }
            }
        }
        if counts.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Self::from_counts(counts, min_count, subsample_t, table_size)
    }

    /// Build a vocabulary by streaming every line of a corpus file.
    pub fn from_corpus(
        path: &Path,
        min_count: u64,
        subsample_t: f64,
        table_size: usize,
    ) -> Result<Self> {
        let mut counts: HashMap<String, u64> = HashMap::new();
        for_each_line(path, 0, u64::MAX, |line| {
            for token in tokenize(line) {
                match counts.get_mut(token) {
                    Some(c) => *c += 1,
                    None => {
                        counts.insert(token.to_owned(), 1);
                    }
                }
            }
            true
        })?;
        if counts.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Self::from_counts(counts, min_count, subsample_t, table_size)
    }

    /// Build from raw (word, count) pairs. Words below `min_count` are
    /// dropped before ids are assigned.
    pub fn from_counts<I>(
        counts: I,
        min_count: u64,
        subsample_t: f64,
        table_size: usize,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = (String, u64)>,
    {
        if min_count < 1 {
            return Err(Error::Config("min_count must be at least 1".into()));
        }
        if !(subsample_t >= 0.0 && subsample_t.is_finite()) {
            return Err(Error::Config(format!(
                "subsample threshold must be finite and non-negative, got {subsample_t}"
            )));
        }

        let mut entries: Vec<(String, u64)> = counts
            .into_iter()
            .filter(|(_, c)| *c >= min_count)
            .collect();
        if entries.is_empty() {
            return Err(Error::EmptyVocab { min_count });
        }
        entries.sort_by(|(wa, ca), (wb, cb)| cb.cmp(ca).then_with(|| wa.cmp(wb)));

        let total_tokens: u64 = entries.iter().map(|(_, c)| c).sum();
        let mut words = Vec::with_capacity(entries.len());
        let mut counts = Vec::with_capacity(entries.len());
        let mut index = HashMap::with_capacity(entries.len());
        for (id, (word, count)) in entries.into_iter().enumerate() {
            index.insert(word.clone(), id as u32);
            words.push(word);
            counts.push(count);
        }

        let keep_prob = counts
            .iter()
            .map(|&c| keep_probability(c, total_tokens, subsample_t))
            .collect();
        let neg_table =
            build_negative_table(&counts, table_size.max(counts.len()), NEGATIVE_POWER)?;

        Ok(Vocab {
            words,
            counts,
            index,
            total_tokens,
            min_count,
            subsample_t,
            keep_prob,
            neg_table,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Occurrences of in-vocabulary words in the corpus.
    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn subsample_t(&self) -> f64 {
        self.subsample_t
    }

    pub fn keep_prob(&self, id: u32) -> f64 {
        self.keep_prob[id as usize]
    }

    pub fn negative_table(&self) -> &[u32] {
        &self.neg_table
    }

    /// Subsampling decision for one occurrence of `id`.
    pub fn keep_token<R: Rng + ?Sized>(&self, id: u32, rng: &mut R) -> bool {
        let p = self.keep_prob[id as usize];
        p >= 1.0 || rng.random::<f64>() < p
    }
}

/// `min(1, sqrt(t/f) + t/f)` with `f = count / total`. A threshold of zero
/// disables subsampling.
pub fn keep_probability(count: u64, total: u64, t: f64) -> f64 {
    if t <= 0.0 || count == 0 {
        return 1.0;
    }
    let ratio = t / (count as f64 / total as f64);
    (ratio.sqrt() + ratio).min(1.0)
}

/// Lay out a sampling table where word `i` owns a share of slots
/// proportional to `counts[i]^power`.
///
/// Shares are rounded with the largest-remainder method, so the table has
/// exactly `table_size` slots and no word deviates from its ideal share by a
/// full slot or more. Slots are stored as contiguous runs in id order.
pub fn build_negative_table(counts: &[u64], table_size: usize, power: f64) -> Result<Vec<u32>> {
    if counts.is_empty() {
        return Err(Error::Config(
            "negative table needs a non-empty vocabulary".into(),
        ));
    }
    if table_size < counts.len() {
        return Err(Error::Config(format!(
            "negative table size {table_size} is smaller than the vocabulary ({})",
            counts.len()
        )));
    }

    let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(power)).collect();
    let norm: f64 = weights.iter().sum();
    let ideal: Vec<f64> = weights
        .iter()
        .map(|w| w / norm * table_size as f64)
        .collect();
    let mut slots: Vec<usize> = ideal.iter().map(|x| x.floor() as usize).collect();

    let assigned: usize = slots.iter().sum();
    let mut remaining = table_size.saturating_sub(assigned);
    if remaining > 0 {
        let mut order: Vec<usize> = (0..counts.len()).collect();
        order.sort_by(|&a, &b| {
            let fa = ideal[a] - ideal[a].floor();
            let fb = ideal[b] - ideal[b].floor();
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        for &i in order.iter().cycle() {
            if remaining == 0 {
                break;
            }
            slots[i] += 1;
            remaining -= 1;
        }
    }

    let mut table = Vec::with_capacity(table_size);
    for (id, &n) in slots.iter().enumerate() {
        table.extend(std::iter::repeat_n(id as u32, n));
    }
    debug_assert_eq!(table.len(), table_size);
    Ok(table)
}

/// Call `f` for every line whose first byte lies in `[start, end)`.
///
/// Lines are decoded as UTF-8, replacing invalid sequences. A trailing
/// `\n` (and `\r`) is stripped. Returning `false` from `f` stops early.
pub fn for_each_line<F>(path: &Path, start: u64, end: u64, mut f: F) -> Result<()>
where
    F: FnMut(&str) -> bool,
{
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    let mut reader = BufReader::with_capacity(1 << 16, file);
    let mut pos = start;
    let mut buf = Vec::new();

    if start > 0 {
        // Skip the tail of a line that began before `start`.
        reader
            .seek(SeekFrom::Start(start - 1))
            .map_err(|e| Error::file(path, e))?;
        let n = reader
            .read_until(b'\n', &mut buf)
            .map_err(|e| Error::file(path, e))?;
        pos = start - 1 + n as u64;
    }

    while pos < end {
        buf.clear();
        let n = reader
            .read_until(b'\n', &mut buf)
            .map_err(|e| Error::file(path, e))?;
        if n == 0 {
            break;
        }
        pos += n as u64;
        while matches!(buf.last(), Some(b'\n' | b'\r')) {
            buf.pop();
        }
        let line = String::from_utf8_lossy(&buf);
        if !f(&line) {
            break;
        }
    }
    Ok(())
}

/// Split a file into `parts` byte ranges covering it. Each line belongs to
/// the range holding its first byte.
pub fn byte_ranges(path: &Path, parts: usize) -> Result<Vec<(u64, u64)>> {
    let len = std::fs::metadata(path)
        .map_err(|e| Error::file(path, e))?
        .len();
    let parts = parts.max(1) as u64;
    Ok((0..parts)
        .map(|i| (len * i / parts, len * (i + 1) / parts))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_xoshiro::Xoshiro256PlusPlus;
    use std::io::Write;

    fn toks(s: &str) -> Vec<&str> {
        tokenize(s).collect()
    }

    fn char_scan_tokens(s: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut cur = String::new();
        for ch in s.chars() {
            if ch.is_whitespace() {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            } else {
                cur.push(ch);
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
        out
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(toks("the cat sat"), ["the", "cat", "sat"]);
        assert!(toks("").is_empty());
        assert_eq!(toks("a  b\t c"), ["a", "b", "c"]);
        assert_eq!(toks("a  b\t c"), char_scan_tokens("a  b\t c"));
        assert_eq!(toks("Ação  x\u{3000}y"), ["Ação", "x", "y"]);
    }

    proptest! {
        #[test]
        fn tokenize_matches_char_scan(s in "[a-c \t\n\u{a0}\u{2003}é]{0,40}") {
            let got: Vec<String> = tokenize(&s).map(str::to_owned).collect();
            prop_assert_eq!(got, char_scan_tokens(&s));
        }
    }

    #[test]
    fn min_count_threshold() {
        let v = Vocab::build_with_table(toks("a a a b b c"), 2, 1e-4, 100).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v.id("a"), Some(0));
        assert_eq!(v.id("b"), Some(1));
        assert_eq!(v.id("c"), None);
        assert_eq!(v.count(0), 3);
        assert_eq!(v.total_tokens(), 5);
    }

    #[test]
    fn ties_are_lexicographic() {
        let v = Vocab::build_with_table(toks("y x"), 1, 1e-4, 10).unwrap();
        assert_eq!(v.id("x"), Some(0));
        assert_eq!(v.id("y"), Some(1));
    }

    #[test]
    fn empty_stream_is_an_error() {
        let err = Vocab::build(Vec::<&str>::new(), 1, 1e-4).unwrap_err();
        assert_eq!(err.to_string(), "empty corpus");
        let err = Vocab::build_with_table(toks("a b"), 2, 1e-4, 10).unwrap_err();
        assert!(matches!(err, Error::EmptyVocab { min_count: 2 }));
    }

    #[test]
    fn zipf_counts_match_brute_force() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(11);
        let weights: Vec<f64> = (1..=50).map(|r| 1.0 / r as f64).collect();
        let total: f64 = weights.iter().sum();
        let tokens: Vec<String> = (0..10_000)
            .map(|_| {
                let mut u = rng.random::<f64>() * total;
                let mut r = 0;
                while r < 49 && u >= weights[r] {
                    u -= weights[r];
                    r += 1;
                }
                format!("w{r}")
            })
            .collect();

        let v = Vocab::build_with_table(&tokens, 1, 1e-4, 1000).unwrap();
        for w in v.words() {
            let expected = tokens.iter().filter(|t| *t == w).count() as u64;
            assert_eq!(v.count(v.id(w).unwrap()), expected, "{w}");
        }
        let distinct: std::collections::BTreeSet<&String> = tokens.iter().collect();
        assert_eq!(v.len(), distinct.len());
        assert_eq!(v.total_tokens(), 10_000);

        let again = Vocab::build_with_table(&tokens, 1, 1e-4, 1000).unwrap();
        assert_eq!(v.words(), again.words());
        assert_eq!(v.negative_table(), again.negative_table());
    }

    #[test]
    fn ids_invert_index() {
        let v = Vocab::build_with_table(toks("d c c b b b a a a a e"), 1, 1e-3, 50).unwrap();
        for (id, w) in v.words().iter().enumerate() {
            assert_eq!(v.id(w), Some(id as u32));
        }
        assert!(v.counts().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn negative_table_examples() {
        assert_eq!(
            build_negative_table(&[1, 1], 10, 0.75).unwrap(),
            [0, 0, 0, 0, 0, 1, 1, 1, 1, 1]
        );
        let t = build_negative_table(&[16, 1], 9, 0.75).unwrap();
        assert_eq!(t.iter().filter(|&&x| x == 0).count(), 8);
        assert_eq!(t.iter().filter(|&&x| x == 1).count(), 1);
        assert_eq!(build_negative_table(&[1], 4, 0.75).unwrap(), [0, 0, 0, 0]);
        assert!(build_negative_table(&[1, 2, 3], 2, 0.75).is_err());
    }

    proptest! {
        #[test]
        fn negative_table_shares(counts in prop::collection::vec(1u64..10_000, 1..40), extra in 0usize..5000) {
            let size = counts.len() + extra;
            let table = build_negative_table(&counts, size, NEGATIVE_POWER).unwrap();
            prop_assert_eq!(table.len(), size);
            let norm: f64 = counts.iter().map(|&c| (c as f64).powf(0.75)).sum();
            for (id, &c) in counts.iter().enumerate() {
                let ideal = (c as f64).powf(0.75) / norm * size as f64;
                let got = table.iter().filter(|&&x| x == id as u32).count() as f64;
                prop_assert!((got - ideal).abs() < 1.0 + 1e-9, "id {} got {} ideal {}", id, got, ideal);
            }
        }

        #[test]
        fn min_count_preserves_relative_order(
            counts in prop::collection::btree_map("[a-f]{1,3}", 1u64..20, 1..30),
            min_count in 1u64..10,
        ) {
            let all = Vocab::from_counts(counts.clone(), 1, 1e-4, 1000).unwrap();
            if let Ok(kept) = Vocab::from_counts(counts, min_count, 1e-4, 1000) {
                let order: Vec<&String> = all.words().iter().filter(|w| kept.id(w).is_some()).collect();
                let kept_order: Vec<&String> = kept.words().iter().collect();
                prop_assert_eq!(order, kept_order);
            }
        }
    }

    #[test]
    fn negative_table_chi_squared() {
        // 50-type Zipf vocabulary, 10^6 uniform draws from the table.
        let counts: Vec<u64> = (1..=50u64).map(|r| 100_000 / r).collect();
        let table = build_negative_table(&counts, DEFAULT_TABLE_SIZE, NEGATIVE_POWER).unwrap();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(3);
        let draws = 1_000_000;
        let mut observed = vec![0u64; counts.len()];
        for _ in 0..draws {
            observed[table[rng.random_range(0..table.len())] as usize] += 1;
        }
        let norm: f64 = counts.iter().map(|&c| (c as f64).powf(0.75)).sum();
        let chi2: f64 = counts
            .iter()
            .zip(&observed)
            .map(|(&c, &o)| {
                let e = (c as f64).powf(0.75) / norm * draws as f64;
                (o as f64 - e).powi(2) / e
            })
            .sum();
        // Critical value of chi^2 with 49 degrees of freedom at p = 0.01.
        assert!(chi2 < 74.92, "chi2 = {chi2}");
    }

    #[test]
    fn keep_probability_formula() {
        assert_eq!(keep_probability(10, 100, 0.0), 1.0);
        assert_eq!(keep_probability(1, 1_000_000, 1e-4), 1.0);
        let p = keep_probability(500, 1000, 1e-4);
        let r: f64 = 1e-4 / 0.5;
        assert!((p - (r.sqrt() + r)).abs() < 1e-15);
    }

    #[test]
    fn keep_token_rates() {
        let mut v = Vocab::build_with_table(toks("a b"), 1, 1e-4, 10).unwrap();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(5);
        v.keep_prob = vec![1.0, 0.0];
        assert!((0..1000).all(|_| v.keep_token(0, &mut rng)));
        assert!((0..1000).all(|_| !v.keep_token(1, &mut rng)));
        v.keep_prob = vec![0.5, 0.5];
        let kept = (0..100_000).filter(|_| v.keep_token(0, &mut rng)).count();
        let rate = kept as f64 / 1e5;
        assert!((rate - 0.5).abs() <= 0.01, "{rate}");
    }

    #[test]
    fn byte_ranges_partition_lines() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        let lines: Vec<String> = (0..97)
            .map(|i| format!("line {i} {}", "x".repeat(i % 7)))
            .collect();
        for l in &lines {
            writeln!(f, "{l}").unwrap();
        }
        f.flush().unwrap();
        for parts in [1, 2, 3, 7, 50] {
            let mut seen = Vec::new();
            for (s, e) in byte_ranges(f.path(), parts).unwrap() {
                for_each_line(f.path(), s, e, |l| {
                    seen.push(l.to_owned());
                    true
                })
                .unwrap();
            }
            assert_eq!(seen, lines, "parts={parts}");
        }
    }
}
