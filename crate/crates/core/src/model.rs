//! Embedding matrices and the skip-gram negative-sampling objective.
//!
//! The input matrix has one row per slot (word slots followed by subword
//! slots); a word's composed vector is the unweighted sum of the rows in its
//! bag. The output matrix has one row per vocabulary word.
//!
//! Parameters are stored as `f32`. Scores, losses, and gradients are
//! computed in `f64` and rounded once when written back.

use std::collections::BTreeMap;
use std::marker::PhantomData;

use rand::{RngExt, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::corpus::Vocab;
use crate::error::{Error, Result};
use crate::subword::SubwordIndexer;

/// Dense row-major `f32` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Config(format!(
                "matrix data has {} values, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// A matrix shared by training workers without synchronization.
///
/// Workers read and write rows concurrently; overlapping writes race and the
/// lost updates are accepted as noise, as in asynchronous (Hogwild) SGD.
/// Borrows are kept short so no two views of a row coexist within a worker.
pub(crate) struct SharedMatrix<'a> {
    ptr: *mut f32,
    rows: usize,
    cols: usize,
    _marker: PhantomData<&'a mut [f32]>,
}

unsafe impl Send for SharedMatrix<'_> {}
unsafe impl Sync for SharedMatrix<'_> {}

impl<'a> SharedMatrix<'a> {
    pub(crate) fn new(m: &'a mut Matrix) -> Self {
        SharedMatrix {
            ptr: m.data.as_mut_ptr(),
            rows: m.rows,
            cols: m.cols,
            _marker: PhantomData,
        }
    }

    #[inline]
    fn row(&self, i: usize) -> &[f32] {
        assert!(i < self.rows);
        unsafe { std::slice::from_raw_parts(self.ptr.add(i * self.cols), self.cols) }
    }

    #[inline]
    #[allow(clippy::mut_from_ref)]
    fn row_mut(&self, i: usize) -> &mut [f32] {
        assert!(i < self.rows);
        unsafe { std::slice::from_raw_parts_mut(self.ptr.add(i * self.cols), self.cols) }
    }
}

/// How context and negative words are represented when scoring.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ContextMode {
    /// Plain output vectors; only the center word is composed.
    #[default]
    Output,
    /// Context and negatives are composed from the input matrix as well, so
    /// a pair is scored as the dot product of two composed vectors.
    Composed,
}

/// Logistic function used for gradient coefficients.
#[derive(Clone, Debug, Default)]
pub enum Sigmoid {
    #[default]
    Exact,
    /// Lookup table with 1000 bins over [-6, 6], saturating outside.
    Table(Box<[f64]>),
}

const SIGMOID_BINS: usize = 1000;
const SIGMOID_MAX: f64 = 6.0;

impl Sigmoid {
    pub fn table() -> Self {
        let t = (0..SIGMOID_BINS)
            .map(|i| {
                let x = ((i as f64 + 0.5) / SIGMOID_BINS as f64 * 2.0 - 1.0) * SIGMOID_MAX;
                sigmoid(x)
            })
            .collect();
        Sigmoid::Table(t)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Sigmoid::Exact => sigmoid(x),
            Sigmoid::Table(t) => {
                if x >= SIGMOID_MAX {
                    1.0
                } else if x <= -SIGMOID_MAX {
                    0.0
                } else {
                    let i =
                        ((x + SIGMOID_MAX) / (2.0 * SIGMOID_MAX) * SIGMOID_BINS as f64) as usize;
                    t[i.min(SIGMOID_BINS - 1)]
                }
            }
        }
    }
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)`, stable for large `|x|`; equals `-ln σ(-x)`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Bags of every vocabulary word, stored contiguously.
#[derive(Clone, Debug)]
pub(crate) struct BagTable {
    offsets: Vec<usize>,
    slots: Vec<u32>,
}

impl BagTable {
    fn new(vocab: &Vocab, indexer: &SubwordIndexer) -> Self {
        let mut offsets = Vec::with_capacity(vocab.len() + 1);
        let mut slots = Vec::new();
        offsets.push(0);
        for (id, word) in vocab.words().iter().enumerate() {
            slots.extend(indexer.compose_bag(id as u32, word));
            offsets.push(slots.len());
        }
        BagTable { offsets, slots }
    }

    #[inline]
    pub(crate) fn get(&self, id: u32) -> &[u32] {
        &self.slots[self.offsets[id as usize]..self.offsets[id as usize + 1]]
    }

    fn mean_len(&self) -> f64 {
        self.slots.len() as f64 / (self.offsets.len() - 1) as f64
    }
}

/// Identifies one parameter row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ParamRow {
    Input(u32),
    Output(u32),
}

/// Exact gradients of the negative-sampling loss for one center bag.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    /// Slots of the center bag; each receives the same `center` gradient.
    pub center_bag: Vec<u32>,
    pub center: Vec<f64>,
    /// Gradient with respect to each target's vector, positive first. In
    /// [`ContextMode::Composed`] it applies to every slot of the target's
    /// bag.
    pub targets: Vec<(u32, Vec<f64>)>,
    mode: ContextMode,
}

impl Gradients {
    /// Gradient per parameter row, summing repeated occurrences.
    pub fn per_row(&self, model: &EmbeddingModel) -> BTreeMap<ParamRow, Vec<f64>> {
        let mut rows: BTreeMap<ParamRow, Vec<f64>> = BTreeMap::new();
        let mut add = |row: ParamRow, g: &[f64]| {
            let acc = rows.entry(row).or_insert_with(|| vec![0.0; g.len()]);
            for (a, x) in acc.iter_mut().zip(g) {
                *a += x;
            }
        };
        for &slot in &self.center_bag {
            add(ParamRow::Input(slot), &self.center);
        }
        for (id, g) in &self.targets {
            match self.mode {
                ContextMode::Output => add(ParamRow::Output(*id), g),
                ContextMode::Composed => {
                    for &slot in model.bag(*id) {
                        add(ParamRow::Input(slot), g);
                    }
                }
            }
        }
        rows
    }
}

/// Reusable buffers for [`EmbeddingModel::train_step`].
#[derive(Clone, Debug, Default)]
pub(crate) struct StepScratch {
    hidden: Vec<f64>,
    grad: Vec<f64>,
    target: Vec<f64>,
}

impl StepScratch {
    pub(crate) fn new(dim: usize) -> Self {
        StepScratch {
            hidden: vec![0.0; dim],
            grad: vec![0.0; dim],
            target: vec![0.0; dim],
        }
    }
}

/// Input and output embeddings together with the vocabulary and subword
/// indexer that give the rows meaning.
#[derive(Clone, Debug)]
pub struct EmbeddingModel {
    dim: usize,
    vocab: Vocab,
    indexer: SubwordIndexer,
    input: Matrix,
    output: Matrix,
    bags: BagTable,
    mode: ContextMode,
}

impl EmbeddingModel {
    /// Fresh model: input rows uniform in `[-0.5/dim, 0.5/dim)`, output rows
    /// zero.
    pub fn new(
        vocab: Vocab,
        indexer: SubwordIndexer,
        dim: usize,
        mode: ContextMode,
        seed: u64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let rows = indexer.total_slots();
        let scale = 1.0 / dim as f32;
        let data = (0..rows * dim)
            .map(|_| (rng.random::<f32>() - 0.5) * scale)
            .collect();
        let input = Matrix::from_vec(rows, dim, data)?;
        let output = Matrix::zeros(vocab.len(), dim);
        Self::from_parts(vocab, indexer, input, output, mode)
    }

    pub fn from_parts(
        vocab: Vocab,
        indexer: SubwordIndexer,
        input: Matrix,
        output: Matrix,
        mode: ContextMode,
    ) -> Result<Self> {
        if indexer.vocab_size() != vocab.len() {
            return Err(Error::Config(format!(
                "indexer built for {} words, vocabulary has {}",
                indexer.vocab_size(),
                vocab.len()
            )));
        }
        if input.rows() != indexer.total_slots() || output.rows() != vocab.len() {
            return Err(Error::Config(format!(
                "matrix shapes {}x{} / {}x{} do not match {} slots / {} words",
                input.rows(),
                input.cols(),
                output.rows(),
                output.cols(),
                indexer.total_slots(),
                vocab.len()
            )));
        }
        if input.cols() != output.cols() || input.cols() == 0 {
            return Err(Error::Config("input and output dimensions differ".into()));
        }
        let bags = BagTable::new(&vocab, &indexer);
        Ok(EmbeddingModel {
            dim: input.cols(),
            vocab,
            indexer,
            input,
            output,
            bags,
            mode,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn indexer(&self) -> &SubwordIndexer {
        &self.indexer
    }

    pub fn input(&self) -> &Matrix {
        &self.input
    }

    pub fn output(&self) -> &Matrix {
        &self.output
    }

    pub fn input_mut(&mut self) -> &mut Matrix {
        &mut self.input
    }

    pub fn output_mut(&mut self) -> &mut Matrix {
        &mut self.output
    }

    pub fn context_mode(&self) -> ContextMode {
        self.mode
    }

    /// Precomputed bag of vocabulary word `id`.
    pub fn bag(&self, id: u32) -> &[u32] {
        self.bags.get(id)
    }

    pub fn mean_bag_len(&self) -> f64 {
        self.bags.mean_len()
    }

    pub fn is_finite(&self) -> bool {
        self.input.is_finite() && self.output.is_finite()
    }

    /// Sum of the input rows of `bag`.
    pub fn compose_vector(&self, bag: &[u32]) -> Result<Vec<f64>> {
        self.check_bag(bag)?;
        let mut v = vec![0.0; self.dim];
        for &slot in bag {
            for (a, &x) in v.iter_mut().zip(self.input.row(slot as usize)) {
                *a += f64::from(x);
            }
        }
        Ok(v)
    }

    /// Composed vector of a vocabulary word.
    pub fn word_vector(&self, id: u32) -> Result<Vec<f64>> {
        self.check_word(id)?;
        self.compose_vector(self.bag(id))
    }

    /// Composed vector for any surface form: the full bag for vocabulary
    /// words, the subword slots alone otherwise. `None` when the word has no
    /// representation under the current strategy.
    pub fn lookup(&self, word: &str) -> Option<Vec<f64>> {
        if let Some(id) = self.vocab.id(word) {
            return self.compose_vector(self.bag(id)).ok();
        }
        let bag = self.indexer.subword_bag(word);
        if bag.is_empty() {
            None
        } else {
            self.compose_vector(&bag).ok()
        }
    }

    /// Vector a word takes when it is the context of a pair.
    pub fn target_vector(&self, id: u32) -> Result<Vec<f64>> {
        self.check_word(id)?;
        Ok(match self.mode {
            ContextMode::Output => self
                .output
                .row(id as usize)
                .iter()
                .map(|&x| x.into())
                .collect(),
            ContextMode::Composed => self.compose_vector(self.bag(id))?,
        })
    }

    pub fn score(&self, center_bag: &[u32], context: u32) -> Result<f64> {
        let h = self.compose_vector(center_bag)?;
        let t = self.target_vector(context)?;
        Ok(dot(&h, &t))
    }

    /// `-[ln σ(s⁺) + Σᵢ ln σ(-sᵢ⁻)]` for one center bag.
    pub fn sgns_loss(&self, center_bag: &[u32], positive: u32, negatives: &[u32]) -> Result<f64> {
        let h = self.compose_vector(center_bag)?;
        let mut loss = 0.0;
        for (id, label) in targets(positive, negatives) {
            let s = dot(&h, &self.target_vector(id)?);
            loss += if label { softplus(-s) } else { softplus(s) };
        }
        Ok(loss)
    }

    /// Analytic gradients of [`sgns_loss`](Self::sgns_loss). With
    /// `g = σ(s) - label`, each target vector gets `g·h` and every center
    /// slot gets `Σ g·t`.
    pub fn sgns_gradients(
        &self,
        center_bag: &[u32],
        positive: u32,
        negatives: &[u32],
    ) -> Result<Gradients> {
        let h = self.compose_vector(center_bag)?;
        let mut center = vec![0.0; self.dim];
        let mut grads = Vec::with_capacity(negatives.len() + 1);
        for (id, label) in targets(positive, negatives) {
            let t = self.target_vector(id)?;
            let g = sigmoid(dot(&h, &t)) - if label { 1.0 } else { 0.0 };
            for (c, x) in center.iter_mut().zip(&t) {
                *c += g * x;
            }
            grads.push((id, h.iter().map(|x| g * x).collect()));
        }
        Ok(Gradients {
            center_bag: center_bag.to_vec(),
            center,
            targets: grads,
            mode: self.mode,
        })
    }

    /// `row ← row − lr·grad` for every row touched by `grads`.
    pub fn sgd_apply(&mut self, grads: &Gradients, lr: f64) {
        for (row, g) in grads.per_row(self) {
            let row = match row {
                ParamRow::Input(i) => self.input.row_mut(i as usize),
                ParamRow::Output(i) => self.output.row_mut(i as usize),
            };
            for (r, x) in row.iter_mut().zip(&g) {
                *r = (f64::from(*r) - lr * x) as f32;
            }
        }
    }

    /// One fused SGD update for a (center, positive, negatives) instance.
    /// Returns the loss before the update.
    pub fn train_step(
        &mut self,
        center: u32,
        positive: u32,
        negatives: &[u32],
        lr: f64,
        sigmoid: &Sigmoid,
    ) -> f64 {
        let mut scratch = StepScratch::new(self.dim);
        let mode = self.mode;
        let bags = &self.bags;
        let input = SharedMatrix::new(&mut self.input);
        let output = SharedMatrix::new(&mut self.output);
        sgns_step(
            &input,
            &output,
            bags,
            mode,
            sigmoid,
            center,
            positive,
            negatives,
            lr,
            &mut scratch,
        )
    }

    pub(crate) fn shared_parts(
        &mut self,
    ) -> (
        SharedMatrix<'_>,
        SharedMatrix<'_>,
        &BagTable,
        &Vocab,
        ContextMode,
    ) {
        (
            SharedMatrix::new(&mut self.input),
            SharedMatrix::new(&mut self.output),
            &self.bags,
            &self.vocab,
            self.mode,
        )
    }

    fn check_bag(&self, bag: &[u32]) -> Result<()> {
        match bag.iter().find(|&&s| s as usize >= self.input.rows()) {
            Some(&slot) => Err(Error::InvalidSlot {
                slot: slot as usize,
                rows: self.input.rows(),
            }),
            None => Ok(()),
        }
    }

    fn check_word(&self, id: u32) -> Result<()> {
        if (id as usize) < self.vocab.len() {
            Ok(())
        } else {
            Err(Error::InvalidWord {
                id: id as usize,
                len: self.vocab.len(),
            })
        }
    }
}

fn targets(positive: u32, negatives: &[u32]) -> impl Iterator<Item = (u32, bool)> + '_ {
    std::iter::once((positive, true)).chain(negatives.iter().map(|&n| (n, false)))
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn dot_f32(a: &[f64], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, &y)| x * f64::from(y)).sum()
}

/// Fused negative-sampling update. Target rows are updated as soon as their
/// coefficient is known; the center bag is updated last with the gradient
/// accumulated from the pre-update target vectors.
#[allow(clippy::too_many_arguments)]
#[inline]
pub(crate) fn sgns_step(
    input: &SharedMatrix<'_>,
    output: &SharedMatrix<'_>,
    bags: &BagTable,
    mode: ContextMode,
    sigmoid: &Sigmoid,
    center: u32,
    positive: u32,
    negatives: &[u32],
    lr: f64,
    scratch: &mut StepScratch,
) -> f64 {
    let StepScratch {
        hidden,
        grad,
        target,
    } = scratch;
    let center_bag = bags.get(center);

    hidden.iter_mut().for_each(|x| *x = 0.0);
    for &slot in center_bag {
        for (h, &x) in hidden.iter_mut().zip(input.row(slot as usize)) {
            *h += f64::from(x);
        }
    }
    grad.iter_mut().for_each(|x| *x = 0.0);

    let mut loss = 0.0;
    for (id, label) in targets(positive, negatives) {
        match mode {
            ContextMode::Output => {
                let s = dot_f32(hidden, output.row(id as usize));
                loss += if label { softplus(-s) } else { softplus(s) };
                let g = sigmoid.eval(s) - if label { 1.0 } else { 0.0 };
                if g == 0.0 {
                    continue;
                }
                let row = output.row_mut(id as usize);
                for ((c, r), h) in grad.iter_mut().zip(row.iter_mut()).zip(hidden.iter()) {
                    *c += g * f64::from(*r);
                    *r = (f64::from(*r) - lr * (g * h)) as f32;
                }
            }
            ContextMode::Composed => {
                let bag = bags.get(id);
                target.iter_mut().for_each(|x| *x = 0.0);
                for &slot in bag {
                    for (t, &x) in target.iter_mut().zip(input.row(slot as usize)) {
                        *t += f64::from(x);
                    }
                }
                let s = dot(hidden, target);
                loss += if label { softplus(-s) } else { softplus(s) };
                let g = sigmoid.eval(s) - if label { 1.0 } else { 0.0 };
                if g == 0.0 {
                    continue;
                }
                for (c, t) in grad.iter_mut().zip(target.iter()) {
                    *c += g * t;
                }
                for &slot in bag {
                    let row = input.row_mut(slot as usize);
                    for (r, h) in row.iter_mut().zip(hidden.iter()) {
                        *r = (f64::from(*r) - lr * (g * h)) as f32;
                    }
                }
            }
        }
    }

    for &slot in center_bag {
        let row = input.row_mut(slot as usize);
        for (r, g) in row.iter_mut().zip(grad.iter()) {
            *r = (f64::from(*r) - lr * g) as f32;
        }
    }
    loss
}
