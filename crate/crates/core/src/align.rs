//! IBM Model 1 word alignment and grow-diag-final-and symmetrization.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use crate::corpus::{read_lines, Bitext, Vocabulary, WordId};
use crate::error::{Error, Result};

/// Lexical translation probabilities t(f | e), one row per conditioning
/// word `e`, plus an optional NULL row.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslationTable {
    rows: Vec<BTreeMap<WordId, f64>>,
    null_row: Option<BTreeMap<WordId, f64>>,
}

impl TranslationTable {
    pub fn new(conditioning_vocab_size: usize, use_null: bool) -> Self {
        TranslationTable {
            rows: vec![BTreeMap::new(); conditioning_vocab_size],
            null_row: use_null.then(BTreeMap::new),
        }
    }

    pub fn prob(&self, e: WordId, f: WordId) -> f64 {
        self.rows
            .get(e.index())
            .and_then(|row| row.get(&f))
            .copied()
            .unwrap_or(0.0)
    }

    /// t(f | NULL), or `None` when the table has no NULL row.
    pub fn null_prob(&self, f: WordId) -> Option<f64> {
        self.null_row
            .as_ref()
            .map(|row| row.get(&f).copied().unwrap_or(0.0))
    }

    pub fn has_null(&self) -> bool {
        self.null_row.is_some()
    }

    pub fn set(&mut self, e: WordId, f: WordId, p: f64) {
        if e.index() >= self.rows.len() {
            self.rows.resize(e.index() + 1, BTreeMap::new());
        }
        self.rows[e.index()].insert(f, p);
    }

    pub fn set_null(&mut self, f: WordId, p: f64) {
        self.null_row.get_or_insert_with(BTreeMap::new).insert(f, p);
    }

    pub fn row(&self, e: WordId) -> Option<&BTreeMap<WordId, f64>> {
        self.rows.get(e.index())
    }

    pub fn null_row(&self) -> Option<&BTreeMap<WordId, f64>> {
        self.null_row.as_ref()
    }

    /// Non-empty conditioning rows.
    pub fn rows(&self) -> impl Iterator<Item = (WordId, &BTreeMap<WordId, f64>)> {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, r)| !r.is_empty())
            .map(|(i, r)| (WordId(i as u32), r))
    }

    /// Writes `e<TAB>f<TAB>prob` lines sorted by e, then by descending
    /// probability. The NULL row is written with e = `NULL`.
    pub fn write_dump<W: Write>(
        &self,
        mut out: W,
        cond_vocab: &Vocabulary,
        gen_vocab: &Vocabulary,
    ) -> Result<()> {
        let mut rows: Vec<(&str, &BTreeMap<WordId, f64>)> = self
            .rows()
            .map(|(e, r)| (cond_vocab.word(e).unwrap_or(crate::corpus::UNK), r))
            .collect();
        rows.sort_by(|a, b| a.0.cmp(b.0));
        if let Some(null) = &self.null_row {
            rows.insert(0, ("NULL", null));
        }
        for (e, row) in rows {
            let mut entries: Vec<(&str, f64)> = row
                .iter()
                .map(|(&f, &p)| (gen_vocab.word(f).unwrap_or(crate::corpus::UNK), p))
                .collect();
            entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
            for (f, p) in entries {
                writeln!(out, "{e}\t{f}\t{p}")?;
            }
        }
        Ok(())
    }

    /// Reads a dump written by [`TranslationTable::write_dump`], interning
    /// words into the given vocabularies.
    pub fn read_dump<R: BufRead>(
        reader: R,
        cond_vocab: &mut Vocabulary,
        gen_vocab: &mut Vocabulary,
    ) -> Result<TranslationTable> {
        let mut table = TranslationTable::new(cond_vocab.len(), false);
        for (n, line) in read_lines(reader)?.iter().enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let p = match fields.as_slice() {
                [_, _, p] => p.parse::<f64>().ok(),
                _ => None,
            };
            let Some(p) = p else {
                return Err(Error::Parse {
                    format: "translation table",
                    line: n + 1,
                    message: "expected e<TAB>f<TAB>prob".into(),
                });
            };
            let f = gen_vocab.intern(fields[1]);
            if fields[0] == "NULL" {
                table.set_null(f, p);
            } else {
                let e = cond_vocab.intern(fields[0]);
                table.set(e, f, p);
            }
        }
        Ok(table)
    }
}

/// Result of EM training.
#[derive(Debug, Clone)]
pub struct Model1Training {
    pub table: TranslationTable,
    /// Corpus log-likelihood before the first iteration and after each one.
    pub log_likelihoods: Vec<f64>,
}

/// Trains t(target | source) with EM from a uniform start.
pub fn train_model1(bitext: &Bitext, iterations: usize, use_null: bool) -> Result<Model1Training> {
    if bitext.is_empty() {
        return Err(Error::Empty("bitext for Model 1 training"));
    }
    let uniform = 1.0 / (bitext.target_vocab.len().saturating_sub(3).max(1)) as f64;
    let mut table = TranslationTable::new(bitext.source_vocab.len(), use_null);
    for pair in bitext.pairs() {
        for &f in &pair.target.ids {
            for &e in &pair.source.ids {
                table.set(e, f, uniform);
            }
            if use_null {
                table.set_null(f, uniform);
            }
        }
    }
    continue_model1(table, bitext, iterations)
}

/// Runs `iterations` more EM steps starting from `table`.
pub fn continue_model1(
    mut table: TranslationTable,
    bitext: &Bitext,
    iterations: usize,
) -> Result<Model1Training> {
    if bitext.is_empty() {
        return Err(Error::Empty("bitext for Model 1 training"));
    }
    if iterations == 0 {
        return Err(Error::InvalidArgument("iterations must be at least 1".into()));
    }
    let skipped = bitext
        .pairs()
        .iter()
        .filter(|p| p.source.is_empty() || p.target.is_empty())
        .count();
    if skipped > 0 {
        log::warn!("Model 1: skipping {skipped} sentence pairs with an empty side");
    }
    let mut log_likelihoods = Vec::with_capacity(iterations + 1);
    for _ in 0..iterations {
        let (ll, next) = em_step(&table, bitext);
        log_likelihoods.push(ll);
        table = next;
    }
    log_likelihoods.push(corpus_log_likelihood(&table, bitext));
    Ok(Model1Training {
        table,
        log_likelihoods,
    })
}

fn usable(pair: &crate::corpus::SentencePair) -> bool {
    !pair.source.is_empty() && !pair.target.is_empty()
}

fn denominator(table: &TranslationTable, source: &[WordId], f: WordId) -> f64 {
    let mut total: f64 = source.iter().map(|&e| table.prob(e, f)).sum();
    if let Some(p) = table.null_prob(f) {
        total += p;
    }
    total
}

/// Log-likelihood of the target sides given the source sides, up to terms
/// that do not depend on t.
pub fn corpus_log_likelihood(table: &TranslationTable, bitext: &Bitext) -> f64 {
    let null = usize::from(table.has_null());
    let mut ll = 0.0;
    for pair in bitext.pairs().iter().filter(|p| usable(p)) {
        let norm = ((pair.source.len() + null) as f64).ln();
        for &f in &pair.target.ids {
            ll += denominator(table, &pair.source.ids, f).ln() - norm;
        }
    }
    ll
}

fn em_step(table: &TranslationTable, bitext: &Bitext) -> (f64, TranslationTable) {
    let null = usize::from(table.has_null());
    let mut counts = TranslationTable::new(table.rows.len(), table.has_null());
    let mut ll = 0.0;
    for pair in bitext.pairs().iter().filter(|p| usable(p)) {
        let norm = ((pair.source.len() + null) as f64).ln();
        for &f in &pair.target.ids {
            let denom = denominator(table, &pair.source.ids, f);
            if denom <= 0.0 {
                continue;
            }
            ll += denom.ln() - norm;
            for &e in &pair.source.ids {
                let c = table.prob(e, f) / denom;
                *counts.rows[e.index()].entry(f).or_insert(0.0) += c;
            }
            if let (Some(p), Some(row)) = (table.null_prob(f), counts.null_row.as_mut()) {
                *row.entry(f).or_insert(0.0) += p / denom;
            }
        }
    }
    for row in counts.rows.iter_mut().chain(counts.null_row.iter_mut()) {
        let total: f64 = row.values().sum();
        if total > 0.0 {
            for v in row.values_mut() {
                *v /= total;
            }
        }
    }
    (ll, counts)
}

/// Set of word links between a source and a target sentence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AlignmentMatrix {
    source_len: usize,
    target_len: usize,
    grid: Vec<bool>,
}

impl AlignmentMatrix {
    pub fn new(source_len: usize, target_len: usize) -> Self {
        AlignmentMatrix {
            source_len,
            target_len,
            grid: vec![false; source_len * target_len],
        }
    }

    pub fn from_links(
        source_len: usize,
        target_len: usize,
        links: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut m = AlignmentMatrix::new(source_len, target_len);
        for (i, j) in links {
            if i >= source_len || j >= target_len {
                return Err(Error::InvalidArgument(format!(
                    "link {i}-{j} outside a {source_len}x{target_len} alignment"
                )));
            }
            m.insert(i, j);
        }
        Ok(m)
    }

    pub fn source_len(&self) -> usize {
        self.source_len
    }

    pub fn target_len(&self) -> usize {
        self.target_len
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.source_len, self.target_len)
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i < self.source_len && j < self.target_len && self.grid[i * self.target_len + j]
    }

    /// Panics if the link is out of bounds.
    pub fn insert(&mut self, i: usize, j: usize) {
        assert!(i < self.source_len && j < self.target_len, "link out of bounds");
        self.grid[i * self.target_len + j] = true;
    }

    /// Links in row-major order.
    pub fn links(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.source_len {
            for j in 0..self.target_len {
                if self.grid[i * self.target_len + j] {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.grid.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.grid.iter().any(|&b| b)
    }

    pub fn transpose(&self) -> AlignmentMatrix {
        let mut t = AlignmentMatrix::new(self.target_len, self.source_len);
        for (i, j) in self.links() {
            t.insert(j, i);
        }
        t
    }

    fn zip_with(&self, other: &AlignmentMatrix, op: impl Fn(bool, bool) -> bool) -> AlignmentMatrix {
        AlignmentMatrix {
            source_len: self.source_len,
            target_len: self.target_len,
            grid: self
                .grid
                .iter()
                .zip(&other.grid)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        }
    }

    /// Both matrices must share dimensions.
    pub fn intersection(&self, other: &AlignmentMatrix) -> AlignmentMatrix {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn union(&self, other: &AlignmentMatrix) -> AlignmentMatrix {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn is_subset_of(&self, other: &AlignmentMatrix) -> bool {
        self.dims() == other.dims() && self.grid.iter().zip(&other.grid).all(|(&a, &b)| !a || b)
    }

    /// Parses Moses `i-j` link notation.
    pub fn parse_moses(line: &str, source_len: usize, target_len: usize) -> Result<Self> {
        let mut links = Vec::new();
        for item in line.split_whitespace() {
            let parsed = item
                .split_once('-')
                .and_then(|(i, j)| Some((i.parse().ok()?, j.parse().ok()?)));
            match parsed {
                Some(link) => links.push(link),
                None => {
                    return Err(Error::InvalidArgument(format!("bad alignment link '{item}'")))
                }
            }
        }
        AlignmentMatrix::from_links(source_len, target_len, links)
    }
}

impl fmt::Display for AlignmentMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let links: Vec<String> = self.links().iter().map(|(i, j)| format!("{i}-{j}")).collect();
        f.write_str(&links.join(" "))
    }
}

/// Which side the translation table conditions on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Table holds t(target | source).
    Forward,
    /// Table holds t(source | target).
    Backward,
}

// Ties go to the smallest index.
fn argmax_link(table: &TranslationTable, conditioning: &[WordId], generated: WordId) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &e) in conditioning.iter().enumerate() {
        let p = table.prob(e, generated);
        if best.is_none_or(|(_, b)| p > b) {
            best = Some((i, p));
        }
    }
    let (i, p) = best?;
    match table.null_prob(generated) {
        Some(np) if np > p || p == 0.0 => None,
        Some(_) => Some(i),
        None => {
            if p == 0.0 {
                log::warn!("word id {} unknown to the translation table; linking to position 0", generated.0);
            }
            Some(i)
        }
    }
}

/// Links every generated word to its most probable conditioning word.
/// The result is always in the (source, target) frame of the pair.
pub fn viterbi_align(
    table: &TranslationTable,
    source: &[WordId],
    target: &[WordId],
    direction: Direction,
) -> AlignmentMatrix {
    let mut m = AlignmentMatrix::new(source.len(), target.len());
    match direction {
        Direction::Forward => {
            for (j, &f) in target.iter().enumerate() {
                if let Some(i) = argmax_link(table, source, f) {
                    m.insert(i, j);
                }
            }
        }
        Direction::Backward => {
            for (i, &e) in source.iter().enumerate() {
                if let Some(j) = argmax_link(table, target, e) {
                    m.insert(i, j);
                }
            }
        }
    }
    m
}

// Diagonal neighbours are tried before the horizontal and vertical ones.
const NEIGHBOURS: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 1),
    (1, -1),
    (1, 1),
    (-1, 0),
    (0, -1),
    (1, 0),
    (0, 1),
];

/// Grow-diag-final-and symmetrization of two alignments given in the same
/// (source, target) frame.
pub fn symmetrize_gdfa(
    forward: &AlignmentMatrix,
    backward: &AlignmentMatrix,
) -> Result<AlignmentMatrix> {
    if forward.dims() != backward.dims() {
        return Err(Error::DimensionMismatch {
            left: forward.dims(),
            right: backward.dims(),
        });
    }
    let (n, m) = forward.dims();
    let union = forward.union(backward);
    let mut result = forward.intersection(backward);
    let mut src_aligned = vec![false; n];
    let mut tgt_aligned = vec![false; m];
    for (i, j) in result.links() {
        src_aligned[i] = true;
        tgt_aligned[j] = true;
    }

    let mut added = true;
    while added {
        added = false;
        for i in 0..n {
            for j in 0..m {
                if !result.contains(i, j) {
                    continue;
                }
                for (di, dj) in NEIGHBOURS {
                    let (ni, nj) = (i as isize + di, j as isize + dj);
                    if ni < 0 || nj < 0 || ni as usize >= n || nj as usize >= m {
                        continue;
                    }
                    let (ni, nj) = (ni as usize, nj as usize);
                    if (!src_aligned[ni] || !tgt_aligned[nj])
                        && union.contains(ni, nj)
                        && !result.contains(ni, nj)
                    {
                        result.insert(ni, nj);
                        src_aligned[ni] = true;
                        tgt_aligned[nj] = true;
                        added = true;
                    }
                }
            }
        }
    }

    for directional in [forward, backward] {
        for (i, j) in directional.links() {
            if !src_aligned[i] && !tgt_aligned[j] {
                result.insert(i, j);
                src_aligned[i] = true;
                tgt_aligned[j] = true;
            }
        }
    }
    Ok(result)
}

/// Both directional tables and the symmetrized alignment of every pair.
#[derive(Debug, Clone)]
pub struct AlignedBitext {
    /// t(target | source).
    pub forward: TranslationTable,
    /// t(source | target).
    pub backward: TranslationTable,
    pub alignments: Vec<AlignmentMatrix>,
}

/// Trains Model 1 in both directions and symmetrizes the Viterbi alignments.
pub fn align_bitext(bitext: &Bitext, iterations: usize, use_null: bool) -> Result<AlignedBitext> {
    let forward = train_model1(bitext, iterations, use_null)?.table;
    let backward = train_model1(&bitext.swapped(), iterations, use_null)?.table;
    let alignments = bitext
        .pairs()
        .iter()
        .map(|p| {
            let f = viterbi_align(&forward, &p.source.ids, &p.target.ids, Direction::Forward);
            let b = viterbi_align(&backward, &p.source.ids, &p.target.ids, Direction::Backward);
            symmetrize_gdfa(&f, &b)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AlignedBitext {
        forward,
        backward,
        alignments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Provenance;

    fn bitext(pairs: &[(&str, &str)]) -> Bitext {
        let mut b = Bitext::new();
        for (s, t) in pairs {
            let s: Vec<&str> = s.split_whitespace().collect();
            let t: Vec<&str> = t.split_whitespace().collect();
            b.push_tokens(&s, &t, Provenance::Baseline);
        }
        b
    }

    fn m(n: usize, k: usize, links: &[(usize, usize)]) -> AlignmentMatrix {
        AlignmentMatrix::from_links(n, k, links.iter().copied()).unwrap()
    }

    #[test]
    fn forced_single_alignment() {
        let b = bitext(&[("a", "x")]);
        let t = train_model1(&b, 5, false).unwrap().table;
        let a = b.source_vocab.id_of("a").unwrap();
        let x = b.target_vocab.id_of("x").unwrap();
        assert_eq!(t.prob(a, x), 1.0);
        let al = viterbi_align(&t, &[a], &[x], Direction::Forward);
        assert_eq!(al.links(), [(0, 0)]);
    }

    #[test]
    fn rows_stay_stochastic_and_ll_monotone() {
        let b = bitext(&[
            ("das haus", "the house"),
            ("das buch", "the book"),
            ("ein buch", "a book"),
        ]);
        let run = train_model1(&b, 10, true).unwrap();
        for w in run.log_likelihoods.windows(2) {
            assert!(w[1] >= w[0] - 1e-9);
        }
        for (_, row) in run.table.rows() {
            let s: f64 = row.values().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
        let s: f64 = run.table.null_row().unwrap().values().sum();
        assert!((s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn resumed_training_matches_single_run() {
        let b = bitext(&[("das haus", "the house"), ("das buch", "the book")]);
        let once = train_model1(&b, 8, true).unwrap().table;
        let half = train_model1(&b, 4, true).unwrap().table;
        let twice = continue_model1(half, &b, 4).unwrap().table;
        for (e, row) in once.rows() {
            for (&f, &p) in row {
                assert!((p - twice.prob(e, f)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn empty_inputs() {
        assert!(matches!(train_model1(&Bitext::new(), 1, true), Err(Error::Empty(_))));
        let b = bitext(&[("a", "x")]);
        assert!(train_model1(&b, 0, true).is_err());
        let t = train_model1(&b, 1, false).unwrap().table;
        assert!(viterbi_align(&t, &[WordId(3)], &[], Direction::Forward).is_empty());
    }

    #[test]
    fn unknown_word_falls_back_to_first_position() {
        let b = bitext(&[("a b", "x")]);
        let t = train_model1(&b, 2, false).unwrap().table;
        let al = viterbi_align(&t, &[WordId(3), WordId(4)], &[WordId(99)], Direction::Forward);
        assert_eq!(al.links(), [(0, 0)]);
        let t = train_model1(&b, 2, true).unwrap().table;
        let al = viterbi_align(&t, &[WordId(3), WordId(4)], &[WordId(99)], Direction::Forward);
        assert!(al.is_empty());
    }

    #[test]
    fn backward_direction_is_in_forward_frame() {
        let b = bitext(&[("das haus", "the house"), ("das buch", "the book")]);
        let bwd = train_model1(&b.swapped(), 20, false).unwrap().table;
        let p = &b.pairs()[0];
        let al = viterbi_align(&bwd, &p.source.ids, &p.target.ids, Direction::Backward);
        assert_eq!(al.links(), [(0, 0), (1, 1)]);
    }

    #[test]
    fn gdfa_fixtures() {
        let a = m(2, 2, &[(0, 0), (1, 1)]);
        assert_eq!(symmetrize_gdfa(&a, &a).unwrap(), a);
        let f = m(2, 2, &[(0, 0), (1, 1)]);
        let b = m(2, 2, &[(0, 0), (1, 0)]);
        assert_eq!(symmetrize_gdfa(&f, &b).unwrap().links(), [(0, 0), (1, 1)]);
        let f = m(2, 2, &[(0, 0)]);
        let b = m(2, 2, &[(1, 1)]);
        assert_eq!(symmetrize_gdfa(&f, &b).unwrap().links(), [(0, 0), (1, 1)]);
        assert!(matches!(
            symmetrize_gdfa(&m(2, 2, &[]), &m(2, 3, &[])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn moses_link_format() {
        let a = AlignmentMatrix::parse_moses("0-0 1-2 2-1", 3, 3).unwrap();
        assert_eq!(a.to_string(), "0-0 1-2 2-1");
        assert!(AlignmentMatrix::parse_moses("0-5", 3, 3).is_err());
        assert!(AlignmentMatrix::parse_moses("0:1", 3, 3).is_err());
        assert_eq!(a.transpose().links(), [(0, 0), (1, 2), (2, 1)]);
    }

    #[test]
    fn dump_round_trip() {
        let b = bitext(&[("das haus", "the house"), ("das buch", "the book")]);
        let t = train_model1(&b, 3, true).unwrap().table;
        let mut buf = Vec::new();
        t.write_dump(&mut buf, &b.source_vocab, &b.target_vocab).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("NULL\t"));
        let mut sv = b.source_vocab.clone();
        let mut tv = b.target_vocab.clone();
        let back = TranslationTable::read_dump(&buf[..], &mut sv, &mut tv).unwrap();
        assert_eq!(back, t);
    }
}
