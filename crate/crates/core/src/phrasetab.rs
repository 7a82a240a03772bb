//! Consistent phrase-pair extraction, four-feature phrase scoring, pruning
//! and Moses-format phrase tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};

use crate::align::{AlignmentMatrix, TranslationTable};
use crate::corpus::{read_lines, Bitext, WordId};
use crate::error::{Error, Result};

/// Smallest score ever stored or serialized.
pub const SCORE_FLOOR: f64 = 1e-12;

pub type Phrase = Vec<String>;

/// The four standard phrase features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhraseScores {
    pub phi_tgt_given_src: f64,
    pub lex_tgt_given_src: f64,
    pub phi_src_given_tgt: f64,
    pub lex_src_given_tgt: f64,
}

impl PhraseScores {
    pub fn uniform(p: f64) -> Self {
        PhraseScores::from_array([p; 4])
    }

    /// Moses column order: phi(t|s) lex(t|s) phi(s|t) lex(s|t).
    pub fn to_array(self) -> [f64; 4] {
        [
            self.phi_tgt_given_src,
            self.lex_tgt_given_src,
            self.phi_src_given_tgt,
            self.lex_src_given_tgt,
        ]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        PhraseScores {
            phi_tgt_given_src: a[0],
            lex_tgt_given_src: a[1],
            phi_src_given_tgt: a[2],
            lex_src_given_tgt: a[3],
        }
    }

    /// Exchanges the forward and backward features.
    pub fn transposed(self) -> Self {
        PhraseScores {
            phi_tgt_given_src: self.phi_src_given_tgt,
            lex_tgt_given_src: self.lex_src_given_tgt,
            phi_src_given_tgt: self.phi_tgt_given_src,
            lex_src_given_tgt: self.lex_tgt_given_src,
        }
    }

    pub fn floored(self) -> Self {
        PhraseScores::from_array(self.to_array().map(|v| v.max(SCORE_FLOOR)))
    }
}

/// One row of a phrase table.
#[derive(Debug, Clone, PartialEq)]
pub struct PhraseEntry {
    pub source: Phrase,
    pub target: Phrase,
    pub scores: PhraseScores,
}

/// What a table stands for in a log-linear system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TableRole {
    Baseline,
    Triangulated,
    Transliteration,
    Synthetic,
    Other,
}

impl fmt::Display for TableRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TableRole::Baseline => "B",
            TableRole::Triangulated => "T_g",
            TableRole::Transliteration => "T_r",
            TableRole::Synthetic => "Syn",
            TableRole::Other => "other",
        })
    }
}

/// Source phrase to scored target phrases. Iteration order is sorted,
/// so serialization is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct PhraseTable {
    pub name: String,
    pub role: TableRole,
    pub source_lang: Option<String>,
    pub target_lang: Option<String>,
    entries: BTreeMap<Phrase, BTreeMap<Phrase, PhraseScores>>,
    len: usize,
}

impl PhraseTable {
    pub fn new(name: impl Into<String>, role: TableRole) -> Self {
        PhraseTable {
            name: name.into(),
            role,
            source_lang: None,
            target_lang: None,
            entries: BTreeMap::new(),
            len: 0,
        }
    }

    pub fn with_languages(mut self, source: &str, target: &str) -> Self {
        self.source_lang = Some(source.to_string());
        self.target_lang = Some(target.to_string());
        self
    }

    /// Empty table carrying this table's metadata.
    pub fn empty_like(&self) -> Self {
        PhraseTable {
            entries: BTreeMap::new(),
            len: 0,
            ..self.clone()
        }
    }

    /// Inserts or replaces an entry, returning the previous scores.
    pub fn insert(&mut self, source: Phrase, target: Phrase, scores: PhraseScores) -> Option<PhraseScores> {
        let old = self.entries.entry(source).or_default().insert(target, scores);
        if old.is_none() {
            self.len += 1;
        }
        old
    }

    pub fn candidates(&self, source: &[String]) -> Option<&BTreeMap<Phrase, PhraseScores>> {
        self.entries.get(source)
    }

    pub fn get(&self, source: &[String], target: &[String]) -> Option<PhraseScores> {
        self.entries.get(source)?.get(target).copied()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn source_count(&self) -> usize {
        self.entries.len()
    }

    pub fn sources(&self) -> impl Iterator<Item = (&Phrase, &BTreeMap<Phrase, PhraseScores>)> {
        self.entries.iter()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Phrase, &Phrase, PhraseScores)> {
        self.entries
            .iter()
            .flat_map(|(s, ts)| ts.iter().map(move |(t, sc)| (s, t, *sc)))
    }

    pub fn entries(&self) -> Vec<PhraseEntry> {
        self.iter()
            .map(|(s, t, scores)| PhraseEntry {
                source: s.clone(),
                target: t.clone(),
                scores,
            })
            .collect()
    }

    pub fn max_source_len(&self) -> usize {
        self.entries.keys().map(Vec::len).max().unwrap_or(0)
    }

    /// Source and target exchanged, forward and backward features swapped.
    pub fn transpose(&self) -> PhraseTable {
        let mut out = PhraseTable::new(self.name.clone(), self.role);
        out.source_lang = self.target_lang.clone();
        out.target_lang = self.source_lang.clone();
        for (s, t, sc) in self.iter() {
            out.insert(t.clone(), s.clone(), sc.transposed());
        }
        out
    }

    /// Sum of phi(t|s) over the targets of `source`.
    pub fn forward_mass(&self, source: &[String]) -> f64 {
        self.candidates(source)
            .map(|ts| ts.values().map(|s| s.phi_tgt_given_src).sum())
            .unwrap_or(0.0)
    }

    /// Checks the table invariants: non-empty phrases, scores in (0, 1]
    /// and forward mass at most one per source phrase.
    pub fn validate(&self) -> Result<()> {
        for (s, ts) in &self.entries {
            let mut mass = 0.0;
            for (t, sc) in ts {
                if s.is_empty() || t.is_empty() {
                    return Err(Error::InvalidArgument("empty phrase in table".into()));
                }
                if sc.to_array().iter().any(|&v| !(v > 0.0 && v <= 1.0)) {
                    return Err(Error::InvalidArgument(format!(
                        "score out of (0, 1] for '{} ||| {}'",
                        s.join(" "),
                        t.join(" ")
                    )));
                }
                mass += sc.phi_tgt_given_src;
            }
            if mass > 1.0 + 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "forward mass {mass} > 1 for '{}'",
                    s.join(" ")
                )));
            }
        }
        Ok(())
    }

    /// Writes `src ||| tgt ||| phi(t|s) lex(t|s) phi(s|t) lex(s|t)` lines.
    pub fn write_moses<W: Write>(&self, mut out: W) -> Result<()> {
        for (s, t, sc) in self.iter() {
            let [a, b, c, d] = sc.floored().to_array();
            writeln!(out, "{} ||| {} ||| {a} {b} {c} {d}", s.join(" "), t.join(" "))?;
        }
        Ok(())
    }

    pub fn read_moses<R: BufRead>(reader: R, name: &str, role: TableRole) -> Result<PhraseTable> {
        let mut table = PhraseTable::new(name, role);
        for (n, line) in read_lines(reader)?.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: &str| Error::Parse {
                format: "phrase table",
                line: n + 1,
                message: message.to_string(),
            };
            let fields: Vec<&str> = line.split("|||").map(str::trim).collect();
            if fields.len() < 3 {
                return Err(err("expected 'src ||| tgt ||| scores'"));
            }
            let source: Phrase = fields[0].split_whitespace().map(String::from).collect();
            let target: Phrase = fields[1].split_whitespace().map(String::from).collect();
            if source.is_empty() || target.is_empty() {
                return Err(err("empty phrase"));
            }
            let scores: Vec<f64> = fields[2]
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| err("unparsable score"))?;
            let scores: [f64; 4] = scores
                .try_into()
                .map_err(|_| err("expected exactly four scores"))?;
            if table
                .insert(source, target, PhraseScores::from_array(scores))
                .is_some()
            {
                return Err(err("duplicate phrase pair"));
            }
        }
        Ok(table)
    }
}

/// Inclusive source and target spans of an extracted phrase pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpanPair {
    pub source: (usize, usize),
    pub target: (usize, usize),
}

/// Consistent phrase pairs up to `max_len` words per side. The target span is
/// the tight hull of the links inside the source span; unaligned target
/// words at its edges are not added.
pub fn extract_phrases(alignment: &AlignmentMatrix, max_len: usize) -> BTreeSet<SpanPair> {
    let (n, m) = alignment.dims();
    let mut by_target: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut by_source: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j) in alignment.links() {
        by_source[i].push(j);
        by_target[j].push(i);
    }
    let mut out = BTreeSet::new();
    for s_start in 0..n {
        let mut t_min = usize::MAX;
        let mut t_max = 0;
        for (s_end, links) in by_source.iter().enumerate().take(n.min(s_start + max_len)).skip(s_start) {
            for &j in links {
                t_min = t_min.min(j);
                t_max = t_max.max(j);
            }
            if t_min == usize::MAX || t_max - t_min + 1 > max_len {
                continue;
            }
            let consistent = (t_min..=t_max)
                .all(|j| by_target[j].iter().all(|&i| (s_start..=s_end).contains(&i)));
            if consistent {
                out.insert(SpanPair {
                    source: (s_start, s_end),
                    target: (t_min, t_max),
                });
            }
        }
    }
    out
}

fn lexical_weight(
    table: &TranslationTable,
    conditioning: &[WordId],
    generated: &[WordId],
    links: &[(usize, usize)],
) -> f64 {
    let mut weight = 1.0;
    for (j, &g) in generated.iter().enumerate() {
        let linked: Vec<usize> = links.iter().filter(|l| l.1 == j).map(|l| l.0).collect();
        let w = if linked.is_empty() {
            table.null_prob(g).unwrap_or(1.0)
        } else {
            linked.iter().map(|&i| table.prob(conditioning[i], g)).sum::<f64>() / linked.len() as f64
        };
        weight *= w;
    }
    weight
}

/// Relative-frequency phrase table over all consistent phrase pairs.
///
/// `forward` holds t(target | source) and `backward` t(source | target).
/// When a phrase pair occurs with different internal alignments, the highest
/// lexical weight is kept.
pub fn score_phrase_table(
    bitext: &Bitext,
    alignments: &[AlignmentMatrix],
    forward: &TranslationTable,
    backward: &TranslationTable,
    max_len: usize,
) -> Result<PhraseTable> {
    if alignments.len() != bitext.len() {
        return Err(Error::InvalidArgument(format!(
            "{} alignments for {} sentence pairs",
            alignments.len(),
            bitext.len()
        )));
    }
    let mut joint: BTreeMap<(Phrase, Phrase), (f64, f64, f64)> = BTreeMap::new();
    for (idx, (pair, alignment)) in bitext.pairs().iter().zip(alignments).enumerate() {
        if alignment.dims() != (pair.source.len(), pair.target.len()) {
            return Err(Error::DimensionMismatch {
                left: alignment.dims(),
                right: (pair.source.len(), pair.target.len()),
            });
        }
        let src_words = bitext.source_tokens(idx);
        let tgt_words = bitext.target_tokens(idx);
        let all_links = alignment.links();
        for span in extract_phrases(alignment, max_len) {
            let (s0, s1) = span.source;
            let (t0, t1) = span.target;
            let local: Vec<(usize, usize)> = all_links
                .iter()
                .filter(|&&(i, j)| (s0..=s1).contains(&i) && (t0..=t1).contains(&j))
                .map(|&(i, j)| (i - s0, j - t0))
                .collect();
            let src_ids = &pair.source.ids[s0..=s1];
            let tgt_ids = &pair.target.ids[t0..=t1];
            let lex_ts = lexical_weight(forward, src_ids, tgt_ids, &local);
            let swapped: Vec<(usize, usize)> = local.iter().map(|&(i, j)| (j, i)).collect();
            let lex_st = lexical_weight(backward, tgt_ids, src_ids, &swapped);
            let key = (
                src_words[s0..=s1].iter().map(|w| w.to_string()).collect(),
                tgt_words[t0..=t1].iter().map(|w| w.to_string()).collect(),
            );
            let slot = joint.entry(key).or_insert((0.0, 0.0, 0.0));
            slot.0 += 1.0;
            slot.1 = slot.1.max(lex_ts);
            slot.2 = slot.2.max(lex_st);
        }
    }
    let mut src_count: BTreeMap<&Phrase, f64> = BTreeMap::new();
    let mut tgt_count: BTreeMap<&Phrase, f64> = BTreeMap::new();
    for ((s, t), (c, _, _)) in &joint {
        *src_count.entry(s).or_default() += c;
        *tgt_count.entry(t).or_default() += c;
    }
    let mut table = PhraseTable::new("baseline", TableRole::Baseline);
    for ((s, t), (c, lex_ts, lex_st)) in &joint {
        let scores = PhraseScores {
            phi_tgt_given_src: c / src_count[s],
            lex_tgt_given_src: *lex_ts,
            phi_src_given_tgt: c / tgt_count[t],
            lex_src_given_tgt: *lex_st,
        }
        .floored();
        table.insert(s.clone(), t.clone(), scores);
    }
    Ok(table)
}

/// Keeps the `top_k` targets with the highest phi(t|s) per source phrase;
/// ties go to the lexicographically smaller target phrase.
pub fn prune_table(table: &PhraseTable, top_k: usize) -> Result<PhraseTable> {
    if top_k == 0 {
        return Err(Error::InvalidArgument("top_k must be at least 1".into()));
    }
    let mut out = table.empty_like();
    for (s, ts) in table.sources() {
        let mut ranked: Vec<(&Phrase, &PhraseScores)> = ts.iter().collect();
        ranked.sort_by(|a, b| {
            b.1.phi_tgt_given_src
                .total_cmp(&a.1.phi_tgt_given_src)
                .then_with(|| a.0.cmp(b.0))
        });
        for (t, sc) in ranked.into_iter().take(top_k) {
            out.insert(s.clone(), t.clone(), *sc);
        }
    }
    Ok(out)
}
