//! Observed data: sparse term-document counts, binary indicators and
//! nonnegative real matrices, plus the text formats they are read from.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{param, GbnError, Result};
use crate::scalar::Real;

/// Term list; line `i` of a vocabulary file names term `i` (1-based in the file).
#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
}

impl Vocabulary {
    pub fn new(terms: Vec<String>) -> Result<Self> {
        if terms.is_empty() {
            return Err(GbnError::DegenerateInput("empty vocabulary".into()));
        }
        let mut seen = HashSet::with_capacity(terms.len());
        for (i, t) in terms.iter().enumerate() {
            if !seen.insert(t.as_str()) {
                return Err(GbnError::Parse {
                    line: i + 1,
                    message: format!("duplicate term {t:?}"),
                });
            }
        }
        Ok(Self { terms })
    }

    /// Placeholder names `w1 .. wV`.
    pub fn numbered(size: usize) -> Self {
        Self {
            terms: (1..=size).map(|i| format!("w{i}")).collect(),
        }
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut terms = Vec::new();
        for line in reader.lines() {
            let line = line?;
            let t = line.trim();
            if !t.is_empty() {
                terms.push(t.to_string());
            }
        }
        Self::new(terms)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(BufReader::new(File::open(path)?))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn term(&self, id: usize) -> &str {
        &self.terms[id]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }
}

/// Sparse nonnegative integer matrix stored document-major: for each
/// document (column) the present terms (rows) in increasing order with
/// strictly positive counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseCountMatrix {
    n_terms: usize,
    doc_ptr: Vec<usize>,
    terms: Vec<u32>,
    counts: Vec<u32>,
}

impl SparseCountMatrix {
    pub fn empty(n_terms: usize, n_docs: usize) -> Self {
        Self {
            n_terms,
            doc_ptr: vec![0; n_docs + 1],
            terms: Vec::new(),
            counts: Vec::new(),
        }
    }

    /// Build from `(term, doc, count)` triples (0-based). Zero counts are
    /// dropped; duplicate cells and out-of-range indices are rejected.
    pub fn from_triplets<I>(n_terms: usize, n_docs: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, u32)>,
    {
        let mut cells: Vec<(usize, usize, u32)> = Vec::new();
        for (i, (v, j, c)) in triplets.into_iter().enumerate() {
            if v >= n_terms || j >= n_docs {
                return Err(GbnError::Parse {
                    line: i + 1,
                    message: format!("cell ({v}, {j}) outside {n_terms} x {n_docs}"),
                });
            }
            if c > 0 {
                cells.push((j, v, c));
            }
        }
        cells.sort_unstable_by_key(|&(j, v, _)| (j, v));
        if let Some(w) = cells.windows(2).find(|w| w[0].0 == w[1].0 && w[0].1 == w[1].1) {
            return Err(GbnError::DegenerateInput(format!(
                "duplicate cell (term {}, doc {})",
                w[0].1, w[0].0
            )));
        }
        Ok(Self::from_sorted_cells(n_terms, n_docs, &cells))
    }

    // cells sorted by (doc, term), no duplicates, positive counts
    fn from_sorted_cells(n_terms: usize, n_docs: usize, cells: &[(usize, usize, u32)]) -> Self {
        let mut doc_ptr = vec![0usize; n_docs + 1];
        for &(j, _, _) in cells {
            doc_ptr[j + 1] += 1;
        }
        for j in 0..n_docs {
            doc_ptr[j + 1] += doc_ptr[j];
        }
        Self {
            n_terms,
            doc_ptr,
            terms: cells.iter().map(|&(_, v, _)| v as u32).collect(),
            counts: cells.iter().map(|&(_, _, c)| c).collect(),
        }
    }

    /// Build from per-document `(term, count)` lists.
    pub fn from_docs(n_terms: usize, docs: &[Vec<(usize, u32)>]) -> Result<Self> {
        Self::from_triplets(
            n_terms,
            docs.len(),
            docs.iter()
                .enumerate()
                .flat_map(|(j, d)| d.iter().map(move |&(v, c)| (v, j, c))),
        )
    }

    pub fn n_terms(&self) -> usize {
        self.n_terms
    }

    pub fn n_docs(&self) -> usize {
        self.doc_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.terms.len()
    }

    pub fn doc_ptr(&self) -> &[usize] {
        &self.doc_ptr
    }

    /// Terms and counts of document `j`.
    pub fn doc(&self, j: usize) -> (&[u32], &[u32]) {
        let r = self.doc_ptr[j]..self.doc_ptr[j + 1];
        (&self.terms[r.clone()], &self.counts[r])
    }

    pub fn doc_total(&self, j: usize) -> u64 {
        self.doc(j).1.iter().map(|&c| c as u64).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    pub fn get(&self, v: usize, j: usize) -> u32 {
        let (terms, counts) = self.doc(j);
        terms
            .binary_search(&(v as u32))
            .map(|i| counts[i])
            .unwrap_or(0)
    }

    /// All `(term, doc, count)` entries in document-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        (0..self.n_docs()).flat_map(move |j| {
            let (t, c) = self.doc(j);
            t.iter().zip(c).map(move |(&v, &x)| (v as usize, j, x))
        })
    }

    pub fn terms(&self) -> &[u32] {
        &self.terms
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn is_binary(&self) -> bool {
        self.counts.iter().all(|&c| c == 1)
    }

    /// Term-document indicator matrix: 1 wherever the count is positive.
    pub fn binarize(&self) -> Self {
        Self {
            counts: vec![1; self.counts.len()],
            ..self.clone()
        }
    }

    /// Keep a subset of documents, in the given order.
    pub fn select_docs(&self, docs: &[usize]) -> Self {
        let mut doc_ptr = Vec::with_capacity(docs.len() + 1);
        doc_ptr.push(0);
        let mut terms = Vec::new();
        let mut counts = Vec::new();
        for &j in docs {
            let (t, c) = self.doc(j);
            terms.extend_from_slice(t);
            counts.extend_from_slice(c);
            doc_ptr.push(terms.len());
        }
        Self {
            n_terms: self.n_terms,
            doc_ptr,
            terms,
            counts,
        }
    }

    /// Parse the UCI bag-of-words layout: header lines `D`, `W`, `NNZ`,
    /// then `NNZ` lines `docID termID count` (1-based).
    pub fn read_uci<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate().filter_map(|(i, l)| match l {
            Ok(l) if l.trim().is_empty() => None,
            other => Some((i + 1, other)),
        });
        let mut header = [0usize; 3];
        for (slot, name) in header.iter_mut().zip(["D", "W", "NNZ"]) {
            let (ln, line) = lines.next().ok_or_else(|| GbnError::Parse {
                line: 0,
                message: format!("missing header line {name}"),
            })?;
            let line = line?;
            *slot = line.trim().parse().map_err(|_| GbnError::Parse {
                line: ln,
                message: format!("header {name}: expected a nonnegative integer, got {:?}", line.trim()),
            })?;
        }
        let [n_docs, n_terms, nnz] = header;
        let mut cells = Vec::with_capacity(nnz);
        for (ln, line) in lines {
            let line = line?;
            let mut it = line.split_whitespace();
            let mut field = |name: &str| -> Result<usize> {
                it.next()
                    .and_then(|s| s.parse::<usize>().ok())
                    .ok_or_else(|| GbnError::Parse {
                        line: ln,
                        message: format!("expected `docID termID count`, bad {name}"),
                    })
            };
            let (d, w, c) = (field("docID")?, field("termID")?, field("count")?);
            if d == 0 || d > n_docs || w == 0 || w > n_terms {
                return Err(GbnError::Parse {
                    line: ln,
                    message: format!("index (doc {d}, term {w}) outside {n_docs} docs x {n_terms} terms"),
                });
            }
            if c == 0 || c > u32::MAX as usize {
                return Err(GbnError::Parse {
                    line: ln,
                    message: format!("count {c} must be in 1..=2^32-1"),
                });
            }
            cells.push((d - 1, w - 1, c as u32, ln));
        }
        if cells.len() != nnz {
            return Err(GbnError::Parse {
                line: 3,
                message: format!("header announces {nnz} entries, file has {}", cells.len()),
            });
        }
        cells.sort_unstable_by_key(|&(j, v, _, _)| (j, v));
        if let Some(w) = cells.windows(2).find(|w| w[0].0 == w[1].0 && w[0].1 == w[1].1) {
            return Err(GbnError::Parse {
                line: w[0].3.max(w[1].3),
                message: format!("duplicate entry for doc {} term {}", w[0].0 + 1, w[0].1 + 1),
            });
        }
        let cells: Vec<_> = cells.into_iter().map(|(j, v, c, _)| (j, v, c)).collect();
        Ok(Self::from_sorted_cells(n_terms, n_docs, &cells))
    }

    pub fn write_uci<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}\n{}\n{}", self.n_docs(), self.n_terms, self.nnz())?;
        for (v, j, c) in self.entries() {
            writeln!(w, "{} {} {}", j + 1, v + 1, c)?;
        }
        Ok(())
    }
}

/// Load a UCI bag-of-words file and, when given, its vocabulary file.
pub fn load_uci_bow(path: impl AsRef<Path>, vocab: Option<&Path>) -> Result<(Vocabulary, SparseCountMatrix)> {
    let m = SparseCountMatrix::read_uci(BufReader::new(File::open(path)?))?;
    let vocab = match vocab {
        Some(p) => {
            let v = Vocabulary::load(p)?;
            if v.len() != m.n_terms() {
                return Err(GbnError::Shape(format!(
                    "vocabulary has {} terms, data has {}",
                    v.len(),
                    m.n_terms()
                )));
            }
            v
        }
        None => Vocabulary::numbered(m.n_terms()),
    };
    Ok((vocab, m))
}

/// Dense `V x J` matrix of nonnegative reals (column = sample).
#[derive(Clone, Debug, PartialEq)]
pub struct DenseNonnegMatrix<F> {
    n_rows: usize,
    n_cols: usize,
    data: Vec<F>,
}

impl<F: Real> DenseNonnegMatrix<F> {
    pub fn from_columns(n_rows: usize, columns: Vec<Vec<F>>) -> Result<Self> {
        let n_cols = columns.len();
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for (j, col) in columns.into_iter().enumerate() {
            if col.len() != n_rows {
                return Err(GbnError::Shape(format!("column {j} has {} rows, expected {n_rows}", col.len())));
            }
            data.extend(col);
        }
        if let Some(x) = data.iter().find(|x| !(x.f() >= 0.0 && x.f().is_finite())) {
            return Err(param("y", x.f(), "entries must be nonnegative and finite"));
        }
        Ok(Self { n_rows, n_cols, data })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn col(&self, j: usize) -> &[F] {
        &self.data[j * self.n_rows..(j + 1) * self.n_rows]
    }

    pub fn get(&self, v: usize, j: usize) -> F {
        self.data[j * self.n_rows + v]
    }

    /// Text layout: a first line `V J`, then `V` comma-separated rows of `J` values.
    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate().filter(|(_, l)| !matches!(l, Ok(s) if s.trim().is_empty()));
        let (_, header) = lines.next().ok_or_else(|| GbnError::Parse {
            line: 1,
            message: "missing `V J` header".into(),
        })?;
        let header = header?;
        let dims: Vec<usize> = header
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| GbnError::Parse {
                line: 1,
                message: format!("bad header {header:?}, expected `V J`"),
            })?;
        let [n_rows, n_cols] = dims[..] else {
            return Err(GbnError::Parse {
                line: 1,
                message: format!("bad header {header:?}, expected `V J`"),
            });
        };
        let mut data = vec![F::zero(); n_rows * n_cols];
        let mut row = 0;
        for (i, line) in lines {
            let line = line?;
            if row >= n_rows {
                return Err(GbnError::Parse {
                    line: i + 1,
                    message: format!("more than {n_rows} rows"),
                });
            }
            let mut n = 0;
            for (j, field) in line.split(',').enumerate() {
                let x: f64 = field.trim().parse().map_err(|_| GbnError::Parse {
                    line: i + 1,
                    message: format!("column {}: not a number: {:?}", j + 1, field.trim()),
                })?;
                if !(x >= 0.0 && x.is_finite()) || j >= n_cols {
                    return Err(GbnError::Parse {
                        line: i + 1,
                        message: format!("column {}: value {x} invalid or out of range", j + 1),
                    });
                }
                data[j * n_rows + row] = F::of(x);
                n += 1;
            }
            if n != n_cols {
                return Err(GbnError::Parse {
                    line: i + 1,
                    message: format!("expected {n_cols} values, found {n}"),
                });
            }
            row += 1;
        }
        if row != n_rows {
            return Err(GbnError::Parse {
                line: 0,
                message: format!("expected {n_rows} rows, found {row}"),
            });
        }
        Ok(Self { n_rows, n_cols, data })
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(BufReader::new(File::open(path)?))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.n_rows, self.n_cols)?;
        for v in 0..self.n_rows {
            let row: Vec<String> = (0..self.n_cols).map(|j| format!("{}", self.get(v, j))).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Observed matrix in one of the three supported modalities.
#[derive(Clone, Debug)]
pub enum Observations<F> {
    Counts(SparseCountMatrix),
    Binary(SparseCountMatrix),
    NonnegReal(DenseNonnegMatrix<F>),
}

impl<F: Real> Observations<F> {
    pub fn n_rows(&self) -> usize {
        match self {
            Observations::Counts(m) | Observations::Binary(m) => m.n_terms(),
            Observations::NonnegReal(m) => m.n_rows(),
        }
    }

    pub fn n_docs(&self) -> usize {
        match self {
            Observations::Counts(m) | Observations::Binary(m) => m.n_docs(),
            Observations::NonnegReal(m) => m.n_cols(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Observations::Counts(_) => "counts",
            Observations::Binary(_) => "binary",
            Observations::NonnegReal(_) => "nonnegative-real",
        }
    }
}

/// Token-level train / held-out split of a count matrix.
#[derive(Clone, Debug)]
pub struct HeldoutSplit {
    pub train: SparseCountMatrix,
    pub heldout: SparseCountMatrix,
    pub fraction: f64,
}

/// Number of a document's `total` tokens assigned to training.
pub fn train_size(total: u64, fraction: f64) -> u64 {
    ((fraction * total as f64 + 0.5).floor() as u64).min(total)
}

/// Per document, draw `round(fraction * tokens)` tokens without replacement
/// for training; the rest are held out.
pub fn split_tokens<R: Rng + ?Sized>(m: &SparseCountMatrix, fraction: f64, rng: &mut R) -> Result<HeldoutSplit> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(param("fraction", fraction, "must lie in (0, 1)"));
    }
    let mut train = Vec::new();
    let mut heldout = Vec::new();
    let mut tokens: Vec<u32> = Vec::new();
    for j in 0..m.n_docs() {
        let (terms, counts) = m.doc(j);
        tokens.clear();
        for (&v, &c) in terms.iter().zip(counts) {
            tokens.extend(std::iter::repeat_n(v, c as usize));
        }
        let n_train = train_size(tokens.len() as u64, fraction) as usize;
        let (picked, _) = tokens.partial_shuffle(rng, n_train);
        let mut picked_counts = vec![0u32; terms.len()];
        for &v in picked.iter() {
            let i = terms.binary_search(&v).expect("token term present in document");
            picked_counts[i] += 1;
        }
        for ((&v, &c), &t) in terms.iter().zip(counts).zip(&picked_counts) {
            train.push((v as usize, j, t));
            heldout.push((v as usize, j, c - t));
        }
    }
    Ok(HeldoutSplit {
        train: SparseCountMatrix::from_triplets(m.n_terms(), m.n_docs(), train)?,
        heldout: SparseCountMatrix::from_triplets(m.n_terms(), m.n_docs(), heldout)?,
        fraction,
    })
}
