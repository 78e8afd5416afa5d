//! Vector files, binary checkpoints, and morpheme lexicons.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use indexmap::IndexMap;

use crate::corpus::Vocab;
use crate::error::{Error, Result};
use crate::model::{ContextMode, EmbeddingModel, Matrix};
use crate::subword::{MorphemeLexicon, NgramParams, Strategy, SubwordIndexer};
use crate::trainer::TrainConfig;

const MAGIC: &[u8; 8] = b"MORPHVEC";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Format a real like C's `%g`: six significant digits, trailing zeros
/// removed, scientific notation for exponents below -4 or above 5.
pub fn format_g6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_owned();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-4..6).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    } else {
        let decimals = (5 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_owned()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Write `<words> <dim>` followed by one `word v1 ... vd` line per
/// vocabulary word. `composed` selects full composed vectors over the raw
/// word-slot rows.
pub fn save_vectors_text(model: &EmbeddingModel, path: &Path, composed: bool) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = BufWriter::new(file);
    write_vectors_text(model, &mut w, composed).map_err(|e| Error::file(path, e))?;
    w.flush().map_err(|e| Error::file(path, e))
}

pub fn write_vectors_text<W: Write>(
    model: &EmbeddingModel,
    w: &mut W,
    composed: bool,
) -> std::io::Result<()> {
    let vocab = model.vocab();
    writeln!(w, "{} {}", vocab.len(), model.dim())?;
    let mut line = String::new();
    for (id, word) in vocab.words().iter().enumerate() {
        line.clear();
        line.push_str(word);
        if composed {
            let v = model.word_vector(id as u32).expect("vocabulary word");
            for x in v {
                line.push(' ');
                line.push_str(&format_g6(x));
            }
        } else {
            for &x in model.input().row(id) {
                line.push(' ');
                line.push_str(&format_g6(f64::from(x)));
            }
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// Word vectors loaded from a text file, in file order.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorTable {
    dim: usize,
    vectors: IndexMap<String, Vec<f32>>,
}

impl VectorTable {
    pub fn new(dim: usize) -> Self {
        VectorTable {
            dim,
            vectors: IndexMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f32]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    pub fn insert(&mut self, word: String, vector: Vec<f32>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Config(format!(
                "vector for {word:?} has {} components, expected {}",
                vector.len(),
                self.dim
            )));
        }
        self.vectors.insert(word, vector);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.vectors.iter().map(|(w, v)| (w.as_str(), v.as_slice()))
    }
}

/// Read a text vector file. Every malformed line is reported with its
/// 1-based line number.
pub fn load_vectors_text(path: &Path) -> Result<VectorTable> {
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();

    let header = match lines.next() {
        Some((_, line)) => line.map_err(|e| Error::parse(path, 1, e.to_string()))?,
        None => {
            return Err(Error::parse(
                path,
                1,
                "empty file, expected `<words> <dim>` header",
            ))
        }
    };
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (count, dim) = match fields.as_slice() {
        [c, d] => match (c.parse::<usize>(), d.parse::<usize>()) {
            (Ok(c), Ok(d)) if d > 0 => (c, d),
            _ => return Err(Error::parse(path, 1, format!("invalid header {header:?}"))),
        },
        _ => return Err(Error::parse(path, 1, format!("invalid header {header:?}"))),
    };

    let mut table = VectorTable::new(dim);
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        if table.len() == count {
            return Err(Error::parse(
                path,
                lineno,
                format!("header declares {count} words but the file has more"),
            ));
        }
        let mut fields = line.split_whitespace();
        let word = fields
            .next()
            .ok_or_else(|| Error::parse(path, lineno, "empty line"))?;
        let mut vector = Vec::with_capacity(dim);
        for field in fields {
            let x: f32 = field
                .parse()
                .ok()
                .filter(|x: &f32| x.is_finite())
                .ok_or_else(|| Error::parse(path, lineno, format!("invalid number {field:?}")))?;
            vector.push(x);
        }
        if vector.len() != dim {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected {dim} components, found {}", vector.len()),
            ));
        }
        if table.get(word).is_some() {
            return Err(Error::parse(
                path,
                lineno,
                format!("duplicate word {word:?}"),
            ));
        }
        table.vectors.insert(word.to_owned(), vector);
    }
    if table.len() != count {
        return Err(Error::Format {
            path: path.into(),
            msg: format!(
                "header declares {count} words but the file has {}",
                table.len()
            ),
        });
    }
    Ok(table)
}

/// Parse a `word<TAB>morph1 morph2 ...` lexicon. `#` lines and blank lines
/// are skipped; a repeated word replaces the earlier entry with a warning.
pub fn load_lexicon(path: &Path) -> Result<MorphemeLexicon> {
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    let mut lexicon = MorphemeLexicon::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (word, morphs) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, lineno, "expected `word<TAB>morphemes`"))?;
        if word.is_empty() {
            return Err(Error::parse(path, lineno, "empty word"));
        }
        let morphs: Vec<String> = morphs.split(' ').map(str::to_owned).collect();
        if morphs.iter().any(String::is_empty) {
            return Err(Error::parse(path, lineno, "empty morpheme"));
        }
        let previous = lexicon
            .insert(word.to_owned(), morphs)
            .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        if previous.is_some() {
            log::warn!(
                "{}:{lineno}: duplicate entry for {word:?}, keeping the last one",
                path.display()
            );
        }
    }
    Ok(lexicon)
}

/// Write a full-fidelity binary checkpoint: configuration, vocabulary,
/// indexer parameters, and both matrices.
pub fn save_checkpoint(model: &EmbeddingModel, config: &TrainConfig, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = BufWriter::new(file);
    write_checkpoint(model, config, &mut w).map_err(|e| Error::file(path, e))?;
    w.flush().map_err(|e| Error::file(path, e))
}

pub fn write_checkpoint<W: Write>(
    model: &EmbeddingModel,
    config: &TrainConfig,
    w: &mut W,
) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(CHECKPOINT_VERSION)?;

    w.write_u64::<LittleEndian>(config.dim as u64)?;
    w.write_u32::<LittleEndian>(config.epochs)?;
    w.write_u64::<LittleEndian>(config.window as u64)?;
    w.write_u64::<LittleEndian>(config.negatives as u64)?;
    w.write_f64::<LittleEndian>(config.lr)?;
    w.write_u64::<LittleEndian>(config.threads as u64)?;
    w.write_u64::<LittleEndian>(config.seed)?;
    w.write_u8(config.sigmoid_table as u8)?;
    w.write_u64::<LittleEndian>(config.progress_interval.unwrap_or(0))?;
    w.write_u64::<LittleEndian>(config.min_count)?;
    w.write_f64::<LittleEndian>(config.subsample)?;
    w.write_u64::<LittleEndian>(config.table_size as u64)?;

    let vocab = model.vocab();
    w.write_u64::<LittleEndian>(vocab.min_count())?;
    w.write_f64::<LittleEndian>(vocab.subsample_t())?;
    w.write_u64::<LittleEndian>(vocab.negative_table().len() as u64)?;
    w.write_u64::<LittleEndian>(vocab.len() as u64)?;
    for (word, &count) in vocab.words().iter().zip(vocab.counts()) {
        write_str(w, word)?;
        w.write_u64::<LittleEndian>(count)?;
    }

    w.write_u8(match model.context_mode() {
        ContextMode::Output => 0,
        ContextMode::Composed => 1,
    })?;
    match model.indexer().strategy() {
        Strategy::WordOnly => w.write_u8(0)?,
        Strategy::CharNgram(p) => {
            w.write_u8(1)?;
            w.write_u32::<LittleEndian>(p.n_min as u32)?;
            w.write_u32::<LittleEndian>(p.n_max as u32)?;
            w.write_u32::<LittleEndian>(p.buckets)?;
            w.write_u8(p.boundary_markers as u8)?;
        }
        Strategy::Morpheme(lex) => {
            w.write_u8(2)?;
            w.write_u64::<LittleEndian>(lex.len() as u64)?;
            for (word, morphs) in lex.iter() {
                write_str(w, word)?;
                w.write_u32::<LittleEndian>(morphs.len() as u32)?;
                for m in morphs {
                    write_str(w, m)?;
                }
            }
        }
    }

    write_matrix(w, model.input())?;
    write_matrix(w, model.output())?;
    Ok(())
}

fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn write_matrix<W: Write>(w: &mut W, m: &Matrix) -> std::io::Result<()> {
    w.write_u64::<LittleEndian>(m.rows() as u64)?;
    w.write_u64::<LittleEndian>(m.cols() as u64)?;
    for &x in m.as_slice() {
        w.write_f32::<LittleEndian>(x)?;
    }
    Ok(())
}

/// Restore a model and its configuration from a checkpoint.
pub fn load_checkpoint(path: &Path) -> Result<(EmbeddingModel, TrainConfig)> {
    let bytes = fs::read(path).map_err(|e| Error::file(path, e))?;
    read_checkpoint(&bytes)
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<(EmbeddingModel, TrainConfig)> {
    let mut r = CheckpointReader { buf: bytes };

    let magic = r.take(MAGIC.len())?;
    if magic != MAGIC {
        return Err(Error::CorruptCheckpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::CheckpointVersion {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }

    let dim = r.usize()?;
    let epochs = r.u32()?;
    let window = r.usize()?;
    let negatives = r.usize()?;
    let lr = r.f64()?;
    let threads = r.usize()?;
    let seed = r.u64()?;
    let sigmoid_table = r.flag()?;
    let progress = r.u64()?;
    let min_count = r.u64()?;
    let subsample = r.f64()?;
    let table_size = r.usize()?;

    let vocab_min_count = r.u64()?;
    let vocab_subsample = r.f64()?;
    let vocab_table = r.usize()?;
    let n_words = r.len_prefix(12)?;
    let mut entries = Vec::with_capacity(n_words);
    for _ in 0..n_words {
        let word = r.string()?;
        let count = r.u64()?;
        entries.push((word, count));
    }

    let mode = match r.u8()? {
        0 => ContextMode::Output,
        1 => ContextMode::Composed,
        t => {
            return Err(Error::CorruptCheckpoint(format!(
                "unknown context mode {t}"
            )))
        }
    };
    let strategy = match r.u8()? {
        0 => Strategy::WordOnly,
        1 => Strategy::CharNgram(NgramParams {
            n_min: r.u32()? as usize,
            n_max: r.u32()? as usize,
            buckets: r.u32()?,
            boundary_markers: r.flag()?,
        }),
        2 => {
            let n = r.len_prefix(8)?;
            let mut lex = MorphemeLexicon::new();
            for _ in 0..n {
                let word = r.string()?;
                let k = r.u32()? as usize;
                let mut morphs = Vec::with_capacity(k.min(r.remaining()));
                for _ in 0..k {
                    morphs.push(r.string()?);
                }
                lex.insert(word, morphs)
                    .map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
            }
            Strategy::Morpheme(lex)
        }
        t => {
            return Err(Error::CorruptCheckpoint(format!(
                "unknown strategy tag {t}"
            )))
        }
    };

    let input = r.matrix()?;
    let output = r.matrix()?;
    if r.remaining() != 0 {
        return Err(Error::CorruptCheckpoint(format!(
            "{} trailing bytes",
            r.remaining()
        )));
    }

    let saved_order: Vec<String> = entries.iter().map(|(w, _)| w.clone()).collect();
    let vocab = Vocab::from_counts(entries, vocab_min_count, vocab_subsample, vocab_table)
        .map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
    if vocab.words() != saved_order.as_slice() {
        return Err(Error::CorruptCheckpoint(
            "vocabulary is not in canonical order".into(),
        ));
    }
    let indexer = SubwordIndexer::new(strategy.clone(), vocab.len())
        .map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
    let model = EmbeddingModel::from_parts(vocab, indexer, input, output, mode)
        .map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
    if dim != model.dim() {
        return Err(Error::CorruptCheckpoint(format!(
            "configured dimension {dim} differs from stored matrices ({})",
            model.dim()
        )));
    }

    let config = TrainConfig {
        dim,
        epochs,
        window,
        negatives,
        lr,
        min_count,
        subsample,
        threads,
        seed,
        strategy,
        context_mode: mode,
        sigmoid_table,
        table_size,
        progress_interval: (progress > 0).then_some(progress),
    };
    Ok((model, config))
}

struct CheckpointReader<'a> {
    buf: &'a [u8],
}

impl<'a> CheckpointReader<'a> {
    fn remaining(&self) -> usize {
        self.buf.len()
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.buf.len() {
            return Err(Error::TruncatedCheckpoint);
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn flag(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(Error::CorruptCheckpoint(format!("invalid flag byte {b}"))),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        let mut b = self.take(4)?;
        Ok(b.read_u32::<LittleEndian>()?)
    }

    fn u64(&mut self) -> Result<u64> {
        let mut b = self.take(8)?;
        Ok(b.read_u64::<LittleEndian>()?)
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::CorruptCheckpoint("length overflow".into()))
    }

    fn f64(&mut self) -> Result<f64> {
        let mut b = self.take(8)?;
        Ok(b.read_f64::<LittleEndian>()?)
    }

    /// Element count that must be backed by at least `min_elem` bytes per
    /// element.
    fn len_prefix(&mut self, min_elem: usize) -> Result<usize> {
        let n = self.usize()?;
        if n.checked_mul(min_elem).is_none_or(|b| b > self.remaining()) {
            return Err(Error::TruncatedCheckpoint);
        }
        Ok(n)
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| Error::CorruptCheckpoint("invalid UTF-8 string".into()))
    }

    fn matrix(&mut self) -> Result<Matrix> {
        let rows = self.usize()?;
        let cols = self.usize()?;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::CorruptCheckpoint("matrix size overflow".into()))?;
        let bytes = self.take(n.checked_mul(4).ok_or(Error::TruncatedCheckpoint)?)?;
        let mut data = vec![0f32; n];
        let mut cursor = bytes;
        cursor.read_f32_into::<LittleEndian>(&mut data)?;
        Matrix::from_vec(rows, cols, data)
    }
}

/// Read a whole file as UTF-8 lines, failing with the offending line number
/// on invalid encoding.
pub(crate) fn read_lines(path: &Path) -> Result<Vec<String>> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::file(path, e))?;
    bytes
        .split(|&b| b == b'\n')
        .enumerate()
        .map(|(i, l)| {
            let l = l.strip_suffix(b"\r").unwrap_or(l);
            String::from_utf8(l.to_vec()).map_err(|_| Error::parse(path, i + 1, "invalid UTF-8"))
        })
        .collect::<Result<Vec<_>>>()
        .map(|mut v| {
            if v.last().is_some_and(String::is_empty) {
                v.pop();
            }
            v
        })
}
