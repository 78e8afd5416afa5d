//! Intrinsic evaluation: word similarity (Spearman's rho), word analogy
//! (3CosAdd accuracy), and concept categorization (k-means purity).

use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, RngExt, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};
use crate::model::{dot, EmbeddingModel};
use crate::persist::{read_lines, VectorTable};

pub const DEFAULT_RESTARTS: usize = 10;
const KMEANS_MAX_ITERS: usize = 300;

/// Anything that can produce a vector for a surface form.
pub trait WordEmbeddings {
    fn dim(&self) -> usize;

    /// Vector for `word`, if representable.
    fn vector(&self, word: &str) -> Option<Vec<f64>>;

    /// Words eligible as analogy answers, in a fixed order.
    fn candidates(&self) -> Vec<&str>;
}

impl WordEmbeddings for EmbeddingModel {
    fn dim(&self) -> usize {
        EmbeddingModel::dim(self)
    }

    /// Out-of-vocabulary words fall back to their subword slots.
    fn vector(&self, word: &str) -> Option<Vec<f64>> {
        self.lookup(word)
    }

    fn candidates(&self) -> Vec<&str> {
        self.vocab().words().iter().map(String::as_str).collect()
    }
}

impl WordEmbeddings for VectorTable {
    fn dim(&self) -> usize {
        VectorTable::dim(self)
    }

    fn vector(&self, word: &str) -> Option<Vec<f64>> {
        self.get(word)
            .map(|v| v.iter().map(|&x| x.into()).collect())
    }

    fn candidates(&self) -> Vec<&str> {
        self.iter().map(|(w, _)| w).collect()
    }
}

/// Exact lookup first, lowercased lookup second.
pub fn resolve<E: WordEmbeddings + ?Sized>(emb: &E, word: &str) -> Option<Vec<f64>> {
    emb.vector(word).or_else(|| {
        let lower = word.to_lowercase();
        if lower != word {
            emb.vector(&lower)
        } else {
            None
        }
    })
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

fn normalized(v: &[f64]) -> Option<Vec<f64>> {
    let n = norm(v);
    (n > 0.0).then(|| v.iter().map(|x| x / n).collect())
}

/// Fractional ranks (1-based), ties receiving their average rank.
pub fn fractional_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's rank correlation: Pearson correlation of fractional ranks.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Config(format!(
            "sequences differ in length ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::UndefinedCorrelation("fewer than two observations"));
    }
    let rx = fractional_ranks(x);
    let ry = fractional_ranks(y);
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant sequence"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityDataset {
    pub pairs: Vec<(String, String, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalogyDataset {
    /// `(a, b, c, d)`: a is to b as c is to d.
    pub quads: Vec<[String; 4]>,
    /// Section label of each quad, from the last `: name` header.
    pub sections: Vec<Option<String>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CategorizationDataset {
    pub items: Vec<(String, String)>,
}

fn data_lines(path: &Path) -> Result<impl Iterator<Item = (usize, String)>> {
    Ok(read_lines(path)?
        .into_iter()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#')))
}

/// Tab-separated fields if the line has a tab, whitespace-separated
/// otherwise.
fn fields(line: &str) -> Vec<&str> {
    if line.contains('\t') {
        line.split('\t').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

impl SimilarityDataset {
    /// `word1<TAB>word2<TAB>score` per line.
    pub fn load(path: &Path) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, line) in data_lines(path)? {
            match fields(&line).as_slice() {
                [a, b, s] if !a.is_empty() && !b.is_empty() => {
                    let score: f64 =
                        s.parse()
                            .ok()
                            .filter(|x: &f64| x.is_finite())
                            .ok_or_else(|| {
                                Error::parse(path, lineno, format!("invalid score {s:?}"))
                            })?;
                    pairs.push((a.to_string(), b.to_string(), score));
                }
                _ => {
                    return Err(Error::parse(
                        path,
                        lineno,
                        "expected `word1<TAB>word2<TAB>score`",
                    ))
                }
            }
        }
        if pairs.len() < 2 {
            return Err(Error::Format {
                path: path.into(),
                msg: "a similarity dataset needs at least two pairs".into(),
            });
        }
        Ok(SimilarityDataset { pairs })
    }
}

impl AnalogyDataset {
    /// `a b c d` per line, with optional `: section` headers.
    pub fn load(path: &Path) -> Result<Self> {
        let mut quads = Vec::new();
        let mut sections = Vec::new();
        let mut section = None;
        for (lineno, line) in data_lines(path)? {
            if let Some(name) = line.strip_prefix(':') {
                section = Some(name.trim().to_owned());
                continue;
            }
            match line.split_whitespace().collect::<Vec<_>>().as_slice() {
                [a, b, c, d] => {
                    quads.push([a, b, c, d].map(|s| s.to_string()));
                    sections.push(section.clone());
                }
                _ => return Err(Error::parse(path, lineno, "expected four words `a b c d`")),
            }
        }
        if quads.is_empty() {
            return Err(Error::Format {
                path: path.into(),
                msg: "no analogy questions".into(),
            });
        }
        Ok(AnalogyDataset { quads, sections })
    }
}

impl CategorizationDataset {
    /// `word<TAB>category` per line.
    pub fn load(path: &Path) -> Result<Self> {
        let mut items = Vec::new();
        for (lineno, line) in data_lines(path)? {
            match fields(&line).as_slice() {
                [w, c] if !w.is_empty() && !c.is_empty() => {
                    items.push((w.to_string(), c.to_string()))
                }
                _ => return Err(Error::parse(path, lineno, "expected `word<TAB>category`")),
            }
        }
        let mut cats: Vec<&str> = items.iter().map(|(_, c)| c.as_str()).collect();
        cats.sort_unstable();
        cats.dedup();
        if cats.len() < 2 {
            return Err(Error::Format {
                path: path.into(),
                msg: "a categorization dataset needs at least two categories".into(),
            });
        }
        Ok(CategorizationDataset { items })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OovPolicy {
    /// Skip pairs with an unrepresentable word and report coverage.
    #[default]
    Drop,
    /// Treat an unrepresentable word as a zero vector, which fails.
    Error,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityResult {
    pub rho: f64,
    pub scored: usize,
    pub total: usize,
}

impl SimilarityResult {
    pub fn coverage(&self) -> f64 {
        self.scored as f64 / self.total as f64
    }
}

/// Spearman correlation between gold scores and cosine similarities.
pub fn eval_similarity<E: WordEmbeddings + ?Sized>(
    emb: &E,
    dataset: &SimilarityDataset,
    policy: OovPolicy,
) -> Result<SimilarityResult> {
    let mut predicted = Vec::new();
    let mut gold = Vec::new();
    for (a, b, score) in &dataset.pairs {
        let sim = match (resolve(emb, a), resolve(emb, b)) {
            (Some(u), Some(v)) => cosine(&u, &v),
            _ => Err(Error::ZeroNorm),
        };
        match (sim, policy) {
            (Ok(s), _) => {
                predicted.push(s);
                gold.push(*score);
            }
            (Err(_), OovPolicy::Drop) => {}
            (Err(e), OovPolicy::Error) => return Err(e),
        }
    }
    if predicted.is_empty() {
        return Err(Error::EmptyEvaluation(
            "no similarity pair could be scored".into(),
        ));
    }
    Ok(SimilarityResult {
        rho: spearman_rho(&gold, &predicted)?,
        scored: predicted.len(),
        total: dataset.pairs.len(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalogyResult {
    pub correct: usize,
    pub evaluated: usize,
    pub total: usize,
}

impl AnalogyResult {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.evaluated as f64
    }

    pub fn coverage(&self) -> f64 {
        self.evaluated as f64 / self.total as f64
    }
}

/// Unit-normalized candidate vectors, row-major.
struct CandidateIndex<'a> {
    dim: usize,
    vectors: Vec<f64>,
    by_word: HashMap<&'a str, usize>,
}

impl<'a> CandidateIndex<'a> {
    fn new<E: WordEmbeddings + ?Sized>(emb: &'a E) -> Self {
        let dim = emb.dim();
        let mut words = Vec::new();
        let mut vectors = Vec::new();
        for w in emb.candidates() {
            if let Some(v) = emb.vector(w).as_deref().and_then(normalized) {
                words.push(w);
                vectors.extend(v);
            }
        }
        let by_word = words.iter().enumerate().map(|(i, &w)| (w, i)).collect();
        CandidateIndex {
            dim,
            vectors,
            by_word,
        }
    }

    fn find(&self, word: &str) -> Option<usize> {
        self.by_word
            .get(word)
            .or_else(|| self.by_word.get(word.to_lowercase().as_str()))
            .copied()
    }

    /// Index maximizing the dot product with `query`, skipping `exclude`.
    fn argmax(&self, query: &[f64], exclude: &[Option<usize>]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, row) in self.vectors.chunks_exact(self.dim).enumerate() {
            if exclude.contains(&Some(i)) {
                continue;
            }
            let s = dot(query, row);
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
        best.map(|(i, _)| i)
    }
}

/// 3CosAdd: the answer is the candidate closest to `b − a + c` (unit
/// vectors), excluding a, b, and c. Questions whose a, b, or c cannot be
/// represented, or whose d is not a candidate, are skipped.
pub fn eval_analogy<E: WordEmbeddings + ?Sized>(
    emb: &E,
    dataset: &AnalogyDataset,
) -> Result<AnalogyResult> {
    let index = CandidateIndex::new(emb);
    let mut correct = 0;
    let mut evaluated = 0;
    for [a, b, c, d] in &dataset.quads {
        let Some(expected) = index.find(d) else {
            continue;
        };
        let vs: Option<Vec<Vec<f64>>> = [a, b, c]
            .iter()
            .map(|w| resolve(emb, w).as_deref().and_then(normalized))
            .collect();
        let Some(vs) = vs else { continue };
        let query: Vec<f64> = (0..index.dim)
            .map(|i| vs[1][i] - vs[0][i] + vs[2][i])
            .collect();
        let exclude = [index.find(a), index.find(b), index.find(c)];
        evaluated += 1;
        if index.argmax(&query, &exclude) == Some(expected) {
            correct += 1;
        }
    }
    if evaluated == 0 {
        return Err(Error::EmptyEvaluation(
            "no analogy question could be evaluated".into(),
        ));
    }
    Ok(AnalogyResult {
        correct,
        evaluated,
        total: dataset.quads.len(),
    })
}

/// `(1/N) Σ_clusters max_category |cluster ∩ category|`.
pub fn purity<C: Eq + std::hash::Hash>(clusters: &[usize], labels: &[C]) -> f64 {
    assert_eq!(clusters.len(), labels.len());
    if clusters.is_empty() {
        return 0.0;
    }
    let mut table: HashMap<(usize, &C), usize> = HashMap::new();
    for (&k, l) in clusters.iter().zip(labels) {
        *table.entry((k, l)).or_default() += 1;
    }
    let mut best: HashMap<usize, usize> = HashMap::new();
    for ((k, _), n) in table {
        let b = best.entry(k).or_default();
        *b = (*b).max(n);
    }
    best.values().sum::<usize>() as f64 / clusters.len() as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct Clustering {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn kmeans_pp_init<R: Rng>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if u < d {
                    chosen = i;
                    break;
                }
                u -= d;
            }
            chosen
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[next].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Lloyd's algorithm from a k-means++ start; keeps the restart with the
/// lowest inertia. Empty clusters keep their previous centroid.
pub fn kmeans(points: &[Vec<f64>], k: usize, restarts: usize, seed: u64) -> Clustering {
    assert!(k >= 1 && k <= points.len(), "k must be in 1..=points");
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut best: Option<Clustering> = None;
    for _ in 0..restarts.max(1) {
        let mut centroids = kmeans_pp_init(points, k, &mut rng);
        let mut assignments = vec![usize::MAX; points.len()];
        for _ in 0..KMEANS_MAX_ITERS {
            let mut changed = false;
            for (a, p) in assignments.iter_mut().zip(points) {
                let (j, _) = nearest(p, &centroids);
                if *a != j {
                    *a = j;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
            let dim = points[0].len();
            let mut sums = vec![vec![0.0; dim]; k];
            let mut counts = vec![0usize; k];
            for (&a, p) in assignments.iter().zip(points) {
                counts[a] += 1;
                for (s, x) in sums[a].iter_mut().zip(p) {
                    *s += x;
                }
            }
            for j in 0..k {
                if counts[j] > 0 {
                    centroids[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
                }
            }
        }
        let inertia = points
            .iter()
            .zip(&assignments)
            .map(|(p, &a)| sq_dist(p, &centroids[a]))
            .sum();
        if best.as_ref().is_none_or(|b| inertia < b.inertia) {
            best = Some(Clustering {
                assignments,
                centroids,
                inertia,
            });
        }
    }
    best.expect("at least one restart")
}

#[derive(Clone, Debug, PartialEq)]
pub struct CategorizationResult {
    pub purity: f64,
    pub clustered: usize,
    pub total: usize,
}

impl CategorizationResult {
    pub fn coverage(&self) -> f64 {
        self.clustered as f64 / self.total as f64
    }
}

/// Cluster unit-normalized vectors into as many groups as there are gold
/// categories and score the clustering by purity. Unrepresentable words are
/// left out and reflected in the coverage.
pub fn eval_categorization<E: WordEmbeddings + ?Sized>(
    emb: &E,
    dataset: &CategorizationDataset,
    restarts: usize,
    seed: u64,
) -> Result<CategorizationResult> {
    let mut categories: Vec<&str> = dataset.items.iter().map(|(_, c)| c.as_str()).collect();
    categories.sort_unstable();
    categories.dedup();
    if categories.len() < 2 {
        return Err(Error::Config(
            "categorization needs at least two categories".into(),
        ));
    }
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (word, cat) in &dataset.items {
        if let Some(v) = resolve(emb, word).as_deref().and_then(normalized) {
            points.push(v);
            labels.push(cat.as_str());
        }
    }
    if points.len() < categories.len() {
        return Err(Error::EmptyEvaluation(format!(
            "{} resolvable words for {} categories",
            points.len(),
            categories.len()
        )));
    }
    let clustering = kmeans(&points, categories.len(), restarts, seed);
    Ok(CategorizationResult {
        purity: purity(&clustering.assignments, &labels),
        clustered: points.len(),
        total: dataset.items.len(),
    })
}

/// One `dataset metric value coverage fraction` report line.
pub fn report_line(name: &str, metric: &str, value: f64, coverage: f64) -> String {
    format!("{name} {metric} {value:.6} coverage {coverage:.4}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::fs;
    use tempfile::TempDir;

    fn table(entries: &[(&str, &[f32])]) -> VectorTable {
        let mut t = VectorTable::new(entries[0].1.len());
        for (w, v) in entries {
            t.insert(w.to_string(), v.to_vec()).unwrap();
        }
        t
    }

    #[test]
    fn cosine_examples() {
        let x = [0.3, -1.2, 4.0];
        assert!((cosine(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let expect = 32.0 / (14f64.sqrt() * 77f64.sqrt());
        assert!((cosine(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap() - expect).abs() < 1e-15);
        assert!((expect - 0.97463).abs() < 1e-5);
        assert_eq!(
            cosine(&[0.0, 0.0], &[1.0, 0.0]).unwrap_err().to_string(),
            "zero-norm vector"
        );
    }

    #[test]
    fn spearman_examples() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!((spearman_rho(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        let rev: Vec<f64> = x.iter().rev().copied().collect();
        assert!((spearman_rho(&x, &rev).unwrap() + 1.0).abs() < 1e-15);
        // Rank-difference closed form: 1 − 6·4/(5·24).
        let rho = spearman_rho(&x, &[2.0, 1.0, 4.0, 3.0, 5.0]).unwrap();
        assert!((rho - 0.8).abs() < 1e-12, "{rho}");
        assert!(matches!(
            spearman_rho(&x, &[1.0; 5]),
            Err(Error::UndefinedCorrelation(_))
        ));
        assert_eq!(
            fractional_ranks(&[3.0, 1.0, 3.0, 2.0]),
            [3.5, 1.0, 3.5, 2.0]
        );
    }

    proptest! {
        #[test]
        fn spearman_invariant_under_monotone_maps(
            pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..30)
        ) {
            let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            if let Ok(rho) = spearman_rho(&x, &y) {
                let fx: Vec<f64> = x.iter().map(|v| (v / 50.0).exp() + 3.0 * v).collect();
                let fy: Vec<f64> = y.iter().map(|v| v.powi(3)).collect();
                let rho2 = spearman_rho(&fx, &fy).unwrap();
                prop_assert!((rho - rho2).abs() < 1e-12);
            }
        }

        #[test]
        fn purity_invariant_under_relabeling(
            data in prop::collection::vec((0usize..4, 0usize..3), 1..40),
            perm_k in Just([2usize, 0, 3, 1]),
            perm_c in Just([1usize, 2, 0]),
        ) {
            let (k, c): (Vec<usize>, Vec<usize>) = data.into_iter().unzip();
            let p = purity(&k, &c);
            let k2: Vec<usize> = k.iter().map(|&x| perm_k[x]).collect();
            let c2: Vec<usize> = c.iter().map(|&x| perm_c[x]).collect();
            prop_assert_eq!(p, purity(&k2, &c2));
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn similarity_degenerate_and_monotone() {
        let t = table(&[
            ("a", &[1.0, 0.0]),
            ("b", &[0.0, 1.0]),
            ("c", &[1.0, 0.8]),
            ("d", &[1.0, 0.2]),
        ]);
        let same = SimilarityDataset {
            pairs: vec![("a".into(), "a".into(), 1.0), ("b".into(), "b".into(), 2.0)],
        };
        assert!(matches!(
            eval_similarity(&t, &same, OovPolicy::Drop),
            Err(Error::UndefinedCorrelation(_))
        ));

        // cos(a,b)=0 < cos(b,c) < cos(a,c) < cos(a,d)
        let mono = SimilarityDataset {
            pairs: vec![
                ("a".into(), "b".into(), 0.5),
                ("b".into(), "c".into(), 3.0),
                ("a".into(), "c".into(), 3.1),
                ("a".into(), "d".into(), 9.0),
            ],
        };
        let r = eval_similarity(&t, &mono, OovPolicy::Drop).unwrap();
        assert!((r.rho - 1.0).abs() < 1e-12);
        assert_eq!(r.coverage(), 1.0);
    }

    #[test]
    fn similarity_oov_policies() {
        let t = table(&[("a", &[1.0, 0.0]), ("Big", &[0.3, 1.0]), ("c", &[1.0, 1.0])]);
        let ds = SimilarityDataset {
            pairs: vec![
                ("a".into(), "big".into(), 1.0),
                ("a".into(), "c".into(), 2.0),
                ("Big".into(), "a".into(), 2.5),
                ("c".into(), "zzz".into(), 3.0),
                ("BIG".into(), "c".into(), 4.0),
            ],
        };
        // "BIG" lowercases to "big", which is absent; "Big" is only found exactly.
        let r = eval_similarity(&t, &ds, OovPolicy::Drop).unwrap();
        assert_eq!((r.scored, r.total), (2, 5));
        assert!(eval_similarity(&t, &ds, OovPolicy::Error).is_err());
    }

    #[test]
    fn analogy_planted_solution() {
        let t = table(&[
            ("man", &[1.0, 0.0, 0.0, 0.0]),
            ("woman", &[1.0, 1.0, 0.0, 0.0]),
            ("king", &[1.0, 0.0, 1.0, 0.0]),
            ("queen", &[1.0, 1.0, 1.0, 0.0]),
            ("far", &[0.0, 0.0, 0.0, 1.0]),
        ]);
        // With unit vectors, b̂ − â + ĉ points closest to queen.
        let ds = AnalogyDataset {
            quads: vec![["man", "woman", "king", "queen"].map(String::from)],
            sections: vec![None],
        };
        let r = eval_analogy(&t, &ds).unwrap();
        assert_eq!(r.accuracy(), 1.0);

        let scaled = table(&[
            ("man", &[3.0, 0.0, 0.0, 0.0]),
            ("woman", &[0.5, 0.5, 0.0, 0.0]),
            ("king", &[7.0, 0.0, 7.0, 0.0]),
            ("queen", &[0.1, 0.1, 0.1, 0.0]),
            ("far", &[0.0, 0.0, 0.0, 2.0]),
        ]);
        assert_eq!(eval_analogy(&scaled, &ds).unwrap().accuracy(), 1.0);
    }

    #[test]
    fn analogy_excludes_question_words() {
        // Query (a, a, c, ?) points exactly at c, which is excluded; the
        // planted distractor next to c must win.
        let t = table(&[
            ("a", &[0.0, 1.0, 0.0]),
            ("c", &[1.0, 0.0, 0.0]),
            ("near", &[0.9, 0.1, 0.0]),
            ("other", &[0.0, 0.0, 1.0]),
        ]);
        let hit = AnalogyDataset {
            quads: vec![["a", "a", "c", "near"].map(String::from)],
            sections: vec![None],
        };
        assert_eq!(eval_analogy(&t, &hit).unwrap().correct, 1);
        let miss = AnalogyDataset {
            quads: vec![["a", "a", "c", "c"].map(String::from)],
            sections: vec![None],
        };
        assert_eq!(eval_analogy(&t, &miss).unwrap().correct, 0);
        let oov = AnalogyDataset {
            quads: vec![["a", "x", "c", "near"].map(String::from)],
            sections: vec![None],
        };
        assert!(matches!(
            eval_analogy(&t, &oov),
            Err(Error::EmptyEvaluation(_))
        ));
    }

    #[test]
    fn categorization_examples() {
        let mut entries = Vec::new();
        let pos = [1.0f32, 0.0, 0.0];
        let neg = [-1.0f32, 0.0, 0.0];
        let names: Vec<String> = (0..10).map(|i| format!("w{i}")).collect();
        for (i, n) in names.iter().enumerate() {
            entries.push((n.as_str(), if i < 5 { &pos[..] } else { &neg[..] }));
        }
        let t = table(&entries);
        let ds = CategorizationDataset {
            items: names
                .iter()
                .enumerate()
                .map(|(i, n)| (n.clone(), if i < 5 { "p" } else { "n" }.to_string()))
                .collect(),
        };
        assert_eq!(eval_categorization(&t, &ds, 10, 0).unwrap().purity, 1.0);

        let flat: Vec<(&str, &[f32])> = names.iter().map(|n| (n.as_str(), &pos[..])).collect();
        let t = table(&flat);
        assert_eq!(eval_categorization(&t, &ds, 10, 0).unwrap().purity, 0.5);

        let few = CategorizationDataset {
            items: vec![("w0".into(), "p".into()), ("zz".into(), "n".into())],
        };
        assert!(matches!(
            eval_categorization(&t, &few, 3, 0),
            Err(Error::EmptyEvaluation(_))
        ));
    }

    #[test]
    fn dataset_loaders() {
        let dir = TempDir::new().unwrap();
        let p = dir.path().join("sim.txt");
        fs::write(&p, "# header\nold\tnew\t1.5\ncat dog 7\n").unwrap();
        let sim = SimilarityDataset::load(&p).unwrap();
        assert_eq!(sim.pairs[1], ("cat".into(), "dog".into(), 7.0));

        let p = dir.path().join("ana.txt");
        fs::write(
            &p,
            ": capital\nathens greece baghdad iraq\n: family\nboy girl brother sister\n",
        )
        .unwrap();
        let ana = AnalogyDataset::load(&p).unwrap();
        assert_eq!(ana.quads.len(), 2);
        assert_eq!(ana.sections[1].as_deref(), Some("family"));

        let p = dir.path().join("cat.txt");
        fs::write(&p, "apple\tfruit\ncar\tvehicle\n").unwrap();
        assert_eq!(CategorizationDataset::load(&p).unwrap().items.len(), 2);

        for (name, content) in [
            ("s1", "a\tb\n"),
            ("s2", "a\tb\tnan\nc\td\t1\n"),
            ("s3", "a\tb\t1\n"),
        ] {
            let p = dir.path().join(name);
            fs::write(&p, content).unwrap();
            assert!(SimilarityDataset::load(&p).is_err(), "{content:?}");
        }
        let p = dir.path().join("a1");
        fs::write(&p, "a b c\n").unwrap();
        assert!(AnalogyDataset::load(&p)
            .unwrap_err()
            .to_string()
            .contains(":1:"));
        let p = dir.path().join("c1");
        fs::write(&p, "a\tx\nb\tx\n").unwrap();
        assert!(CategorizationDataset::load(&p).is_err());
        let p = dir.path().join("bin");
        fs::write(&p, b"a\tb\t1\n\xff\xfe\t1\t2\n").unwrap();
        assert!(SimilarityDataset::load(&p)
            .unwrap_err()
            .to_string()
            .contains(":2:"));
    }
}
