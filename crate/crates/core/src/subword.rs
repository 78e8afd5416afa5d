//! Subword composition strategies.
//!
//! Every word is represented by a bag of input-matrix slots. Slots
//! `[0, |V|)` hold word vectors; slots `[|V|, |V| + S)` hold subword
//! vectors, where `S` is the bucket count for character n-grams or the number
//! of distinct morphemes in the lexicon. The word's own slot always comes
//! first in a bag.

use indexmap::IndexMap;

use crate::error::{Error, Result};

pub const DEFAULT_NGRAM_MIN: usize = 3;
pub const DEFAULT_NGRAM_MAX: usize = 6;
pub const DEFAULT_BUCKETS: u32 = 2_000_000;

const BOW: char = '<';
const EOW: char = '>';

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NgramParams {
    pub n_min: usize,
    pub n_max: usize,
    pub buckets: u32,
    /// Wrap the word in `<` and `>` before extracting n-grams.
    pub boundary_markers: bool,
}

impl Default for NgramParams {
    fn default() -> Self {
        NgramParams {
            n_min: DEFAULT_NGRAM_MIN,
            n_max: DEFAULT_NGRAM_MAX,
            buckets: DEFAULT_BUCKETS,
            boundary_markers: false,
        }
    }
}

impl NgramParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_min < 1 || self.n_min > self.n_max {
            return Err(Error::Config(format!(
                "n-gram range must satisfy 1 <= min <= max, got {}..{}",
                self.n_min, self.n_max
            )));
        }
        if self.buckets < 1 {
            return Err(Error::Config("bucket count must be at least 1".into()));
        }
        Ok(())
    }
}

/// Word segmentations produced by an external morphological analyzer.
///
/// Entries keep the order in which words were first inserted; re-inserting a
/// word replaces its morphemes in place.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MorphemeLexicon {
    entries: IndexMap<String, Vec<String>>,
}

impl MorphemeLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add or replace a segmentation, returning the previous one.
    pub fn insert(&mut self, word: String, morphemes: Vec<String>) -> Result<Option<Vec<String>>> {
        if morphemes.is_empty() {
            return Err(Error::Config(format!("word {word:?} has no morphemes")));
        }
        if morphemes.iter().any(String::is_empty) {
            return Err(Error::Config(format!(
                "word {word:?} has an empty morpheme"
            )));
        }
        Ok(self.entries.insert(word, morphemes))
    }

    pub fn get(&self, word: &str) -> Option<&[String]> {
        self.entries.get(word).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.entries.iter().map(|(w, m)| (w.as_str(), m.as_slice()))
    }
}

impl<W, M> FromIterator<(W, Vec<M>)> for MorphemeLexicon
where
    W: Into<String>,
    M: Into<String>,
{
    /// Panics on an empty segmentation; use [`MorphemeLexicon::insert`] for
    /// untrusted input.
    fn from_iter<T: IntoIterator<Item = (W, Vec<M>)>>(iter: T) -> Self {
        let mut lex = MorphemeLexicon::new();
        for (w, ms) in iter {
            lex.insert(w.into(), ms.into_iter().map(Into::into).collect())
                .expect("invalid lexicon entry");
        }
        lex
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Strategy {
    WordOnly,
    CharNgram(NgramParams),
    Morpheme(MorphemeLexicon),
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::WordOnly => "word",
            Strategy::CharNgram(_) => "ngram",
            Strategy::Morpheme(_) => "morpheme",
        }
    }
}

/// Maps words to bags of input slots under one composition strategy.
#[derive(Clone, Debug)]
pub struct SubwordIndexer {
    strategy: Strategy,
    vocab_size: usize,
    morpheme_index: IndexMap<String, u32>,
}

impl SubwordIndexer {
    pub fn new(strategy: Strategy, vocab_size: usize) -> Result<Self> {
        let mut morpheme_index = IndexMap::new();
        match &strategy {
            Strategy::WordOnly => {}
            Strategy::CharNgram(params) => params.validate()?,
            Strategy::Morpheme(lexicon) => {
                for (_, morphs) in lexicon.iter() {
                    for m in morphs {
                        let next = morpheme_index.len() as u32;
                        morpheme_index.entry(m.clone()).or_insert(next);
                    }
                }
            }
        }
        Ok(SubwordIndexer {
            strategy,
            vocab_size,
            morpheme_index,
        })
    }

    pub fn strategy(&self) -> &Strategy {
        &self.strategy
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    /// Number of subword slots `S`.
    pub fn subword_slots(&self) -> usize {
        match &self.strategy {
            Strategy::WordOnly => 0,
            Strategy::CharNgram(p) => p.buckets as usize,
            Strategy::Morpheme(_) => self.morpheme_index.len(),
        }
    }

    /// Rows of the input matrix: `|V| + S`.
    pub fn total_slots(&self) -> usize {
        self.vocab_size + self.subword_slots()
    }

    pub fn morpheme_slot(&self, morpheme: &str) -> Option<u32> {
        self.morpheme_index
            .get(morpheme)
            .map(|&i| (self.vocab_size as u32) + i)
    }

    /// Subword tokens of `word` with their offsets inside the subword slot
    /// space, in bag order.
    pub fn subword_tokens(&self, word: &str) -> Vec<(String, u32)> {
        match &self.strategy {
            Strategy::WordOnly => Vec::new(),
            Strategy::CharNgram(p) => char_ngrams(word, p.n_min, p.n_max, p.boundary_markers)
                .into_iter()
                .map(|g| {
                    let h = hash_ngram(&g, p.buckets);
                    (g, h)
                })
                .collect(),
            Strategy::Morpheme(lex) => morphemes(word, lex)
                .iter()
                .map(|m| (m.clone(), self.morpheme_index[m.as_str()]))
                .collect(),
        }
    }

    /// Absolute slots of the subword part of `word`'s bag. This is the whole
    /// bag for a word outside the vocabulary.
    pub fn subword_bag(&self, word: &str) -> Vec<u32> {
        let base = self.vocab_size as u32;
        let mut bag = Vec::new();
        self.extend_subwords(word, base, &mut bag);
        bag
    }

    /// Full bag of an in-vocabulary word: its own slot followed by its
    /// subword slots.
    pub fn compose_bag(&self, word_id: u32, word: &str) -> Vec<u32> {
        let mut bag = vec![word_id];
        self.extend_subwords(word, self.vocab_size as u32, &mut bag);
        bag
    }

    fn extend_subwords(&self, word: &str, base: u32, bag: &mut Vec<u32>) {
        match &self.strategy {
            Strategy::WordOnly => {}
            Strategy::CharNgram(p) => {
                for_each_ngram(word, p.n_min, p.n_max, p.boundary_markers, |g| {
                    bag.push(base + hash_ngram(g, p.buckets));
                });
            }
            Strategy::Morpheme(lex) => {
                bag.extend(
                    morphemes(word, lex)
                        .iter()
                        .map(|m| base + self.morpheme_index[m.as_str()]),
                );
            }
        }
    }
}

/// Contiguous character n-grams of `word` for every `n` in
/// `[n_min, n_max]`, all n-grams of one length before the next, each length
/// scanned left to right. The word itself is not included.
pub fn char_ngrams(word: &str, n_min: usize, n_max: usize, boundary_markers: bool) -> Vec<String> {
    let mut out = Vec::new();
    for_each_ngram(word, n_min, n_max, boundary_markers, |g| {
        out.push(g.to_owned())
    });
    out
}

fn for_each_ngram<F: FnMut(&str)>(
    word: &str,
    n_min: usize,
    n_max: usize,
    boundary_markers: bool,
    mut f: F,
) {
    let marked;
    let text = if boundary_markers {
        marked = format!("{BOW}{word}{EOW}");
        marked.as_str()
    } else {
        word
    };
    // Byte offsets of every char boundary, including the end.
    let bounds: Vec<usize> = text
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(text.len()))
        .collect();
    let chars = bounds.len() - 1;
    for n in n_min..=n_max {
        if n > chars {
            break;
        }
        for start in 0..=chars - n {
            f(&text[bounds[start]..bounds[start + n]]);
        }
    }
}

/// 32-bit FNV-1a over the bytes of `data`.
pub fn fnv1a32(data: &[u8]) -> u32 {
    let mut h: u32 = 0x811c_9dc5;
    for &b in data {
        h ^= u32::from(b);
        h = h.wrapping_mul(0x0100_0193);
    }
    h
}

/// Bucket of an n-gram: FNV-1a of its UTF-8 bytes modulo `buckets`.
pub fn hash_ngram(ngram: &str, buckets: u32) -> u32 {
    fnv1a32(ngram.as_bytes()) % buckets
}

/// Morphemes of `word`, or an empty slice if the lexicon has no entry.
pub fn morphemes<'a>(word: &str, lexicon: &'a MorphemeLexicon) -> &'a [String] {
    lexicon.get(word).unwrap_or(&[])
}
