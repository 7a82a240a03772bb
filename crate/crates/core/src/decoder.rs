//! Log-linear phrase-based stack decoding with a distance-based distortion
//! model, n-best extraction over the search lattice, and a coordinate-ascent
//! BLEU tuner.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::{read_lines, BOS, EOS};
use crate::error::{Error, Result};
use crate::evalkit::{BleuStats, DEFAULT_MAX_N};
use crate::ngramlm::LanguageModel;
use crate::phrasetab::{Phrase, SCORE_FLOOR};
use crate::pivot::DecodingTables;
use crate::translit::{transliterate, CharModel};

const TM_FEATURES: [&str; 4] = ["phi_ts", "lex_ts", "phi_st", "lex_st"];
const GLOBAL_FEATURES: [&str; 6] = [
    "lm",
    "word_penalty",
    "phrase_penalty",
    "distortion",
    "translit",
    "pass_through",
];

/// ln of the score an option gets in a table that does not contain it.
pub fn feature_floor() -> f64 {
    SCORE_FLOOR.ln()
}

/// Feature weights: four per phrase table, then the global features.
#[derive(Debug, Clone, PartialEq)]
pub struct LogLinearModel {
    tables: usize,
    names: Vec<String>,
    weights: Vec<f64>,
}

impl LogLinearModel {
    pub fn new(tables: usize) -> Result<Self> {
        if tables == 0 {
            return Err(Error::InvalidArgument("at least one phrase table is required".into()));
        }
        let mut names = Vec::new();
        let mut weights = Vec::new();
        for t in 0..tables {
            for f in TM_FEATURES {
                names.push(format!("tm{t}.{f}"));
                weights.push(0.2);
            }
        }
        for (f, w) in GLOBAL_FEATURES.iter().zip([0.5, -0.3, 0.2, 0.3, 0.5, 1.0]) {
            names.push((*f).to_string());
            weights.push(w);
        }
        Ok(LogLinearModel { tables, names, weights })
    }

    pub fn table_count(&self) -> usize {
        self.tables
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn tm_index(&self, table: usize, k: usize) -> usize {
        table * 4 + k
    }

    fn global(&self, k: usize) -> usize {
        self.tables * 4 + k
    }

    pub fn lm_index(&self) -> usize {
        self.global(0)
    }
    pub fn word_penalty_index(&self) -> usize {
        self.global(1)
    }
    pub fn phrase_penalty_index(&self) -> usize {
        self.global(2)
    }
    pub fn distortion_index(&self) -> usize {
        self.global(3)
    }
    pub fn translit_index(&self) -> usize {
        self.global(4)
    }
    pub fn pass_through_index(&self) -> usize {
        self.global(5)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.weights[i])
    }

    pub fn set(&mut self, name: &str, weight: f64) -> Result<()> {
        if !weight.is_finite() {
            return Err(Error::InvalidArgument(format!("weight for {name} is not finite")));
        }
        let i = self
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Config(format!("unknown feature '{name}'")))?;
        self.weights[i] = weight;
        Ok(())
    }

    pub fn set_weights(&mut self, weights: &[f64]) -> Result<()> {
        if weights.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                left: (weights.len(), 1),
                right: (self.weights.len(), 1),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument("non-finite weight".into()));
        }
        self.weights.copy_from_slice(weights);
        Ok(())
    }

    pub fn dot(&self, features: &[f64]) -> f64 {
        self.weights.iter().zip(features).map(|(w, f)| w * f).sum()
    }

    /// `name<TAB>weight` lines.
    pub fn write_weights<W: Write>(&self, mut out: W) -> Result<()> {
        for (n, w) in self.names.iter().zip(&self.weights) {
            writeln!(out, "{n}\t{w}")?;
        }
        Ok(())
    }

    /// Reads weights onto a model with `tables` tables; features not listed
    /// keep their defaults.
    pub fn read_weights<R: BufRead>(reader: R, tables: usize) -> Result<Self> {
        let mut model = LogLinearModel::new(tables)?;
        for (n, line) in read_lines(reader)?.iter().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let parsed = line
                .split_once('\t')
                .and_then(|(name, w)| Some((name.trim(), w.trim().parse::<f64>().ok()?)));
            let Some((name, w)) = parsed else {
                return Err(Error::Parse {
                    format: "weights",
                    line: n + 1,
                    message: "expected name<TAB>weight".into(),
                });
            };
            model.set(name, w)?;
        }
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OptionOrigin {
    /// Indices of the tables that contain the pair.
    Tables(Vec<usize>),
    Transliteration,
    PassThrough,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranslationOption {
    /// Covered source positions, `start..end`.
    pub start: usize,
    pub end: usize,
    pub target: Phrase,
    /// Full-length feature vector; LM and distortion entries are zero.
    pub features: Vec<f64>,
    pub origin: OptionOrigin,
}

impl TranslationOption {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// All translation options for one sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionLattice {
    pub source: Vec<String>,
    pub options: Vec<TranslationOption>,
}

impl OptionLattice {
    /// Builds a lattice from explicit options, checking spans and feature
    /// lengths.
    pub fn from_options(source: Vec<String>, options: Vec<TranslationOption>, model: &LogLinearModel) -> Result<Self> {
        for o in &options {
            if o.start >= o.end || o.end > source.len() {
                return Err(Error::InvalidArgument(format!("bad span {}..{}", o.start, o.end)));
            }
            if o.features.len() != model.len() || o.features.iter().any(|f| !f.is_finite()) {
                return Err(Error::InvalidArgument("bad option features".into()));
            }
        }
        Ok(OptionLattice { source, options })
    }

    pub fn covers_every_position(&self) -> bool {
        (0..self.source.len()).all(|i| self.options.iter().any(|o| o.start == i && o.end == i + 1))
    }
}

fn cmp_options(model: &LogLinearModel, a: &TranslationOption, b: &TranslationOption) -> Ordering {
    model
        .dot(&b.features)
        .total_cmp(&model.dot(&a.features))
        .then_with(|| a.target.cmp(&b.target))
}

/// Gathers options for every span from all tables, keeping the `limit` best
/// per span by weighted score, and adds transliterations or a pass-through
/// for words no table covers on their own.
pub fn collect_options(
    sentence: &[String],
    tables: &DecodingTables,
    translit: Option<(&CharModel, usize)>,
    model: &LogLinearModel,
    limit: usize,
) -> Result<OptionLattice> {
    if sentence.is_empty() {
        return Err(Error::Empty("sentence"));
    }
    if model.table_count() != tables.block_count() {
        return Err(Error::InvalidArgument(format!(
            "model has {} table blocks, {} tables registered",
            model.table_count(),
            tables.block_count()
        )));
    }
    let n = sentence.len();
    let max_len = tables.max_source_len().max(1);
    let base_tm = if tables.absent_at_floor { feature_floor() } else { 0.0 };
    let mut options = Vec::new();
    let mut single_covered = vec![false; n];
    for start in 0..n {
        for end in start + 1..=(start + max_len).min(n) {
            let phrase = &sentence[start..end];
            let mut merged: BTreeMap<&Phrase, (Vec<f64>, Vec<usize>)> = BTreeMap::new();
            for (t, table) in tables.tables.iter().enumerate() {
                let Some(cands) = table.candidates(phrase) else {
                    continue;
                };
                for (target, scores) in cands {
                    let slot = merged.entry(target).or_insert_with(|| {
                        let mut f = vec![0.0; model.len()];
                        for tt in 0..tables.block_count() {
                            for k in 0..4 {
                                f[model.tm_index(tt, k)] = base_tm;
                            }
                        }
                        f[model.word_penalty_index()] = -(target.len() as f64);
                        f[model.phrase_penalty_index()] = -1.0;
                        (f, Vec::new())
                    });
                    for (k, v) in scores.floored().to_array().iter().enumerate() {
                        slot.0[model.tm_index(t, k)] = v.ln();
                    }
                    slot.1.push(t);
                }
            }
            let mut span_opts: Vec<TranslationOption> = merged
                .into_iter()
                .map(|(target, (features, origin))| TranslationOption {
                    start,
                    end,
                    target: target.clone(),
                    features,
                    origin: OptionOrigin::Tables(origin),
                })
                .collect();
            span_opts.sort_by(|a, b| cmp_options(model, a, b));
            span_opts.truncate(limit.max(1));
            if end == start + 1 && !span_opts.is_empty() {
                single_covered[start] = true;
            }
            options.extend(span_opts);
        }
    }
    for (i, word) in sentence.iter().enumerate() {
        if single_covered[i] {
            continue;
        }
        let mut added = false;
        if let Some((char_model, k)) = translit {
            let result = transliterate(char_model, word, k.max(1))?;
            let cands: Vec<&(String, f64)> = result.candidates.iter().filter(|c| !c.0.is_empty()).collect();
            if !cands.is_empty() {
                let norm = cands
                    .iter()
                    .map(|c| c.1)
                    .fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = cands.iter().map(|c| (c.1 - norm).exp()).sum::<f64>().ln() + norm;
                for (target, score) in cands {
                    let mut f = vec![0.0; model.len()];
                    f[model.word_penalty_index()] = -1.0;
                    f[model.phrase_penalty_index()] = -1.0;
                    f[model.translit_index()] = (score - z).max(feature_floor());
                    options.push(TranslationOption {
                        start: i,
                        end: i + 1,
                        target: vec![target.clone()],
                        features: f,
                        origin: OptionOrigin::Transliteration,
                    });
                }
                added = true;
            }
        }
        if !added {
            let mut f = vec![0.0; model.len()];
            f[model.word_penalty_index()] = -1.0;
            f[model.phrase_penalty_index()] = -1.0;
            f[model.pass_through_index()] = -1.0;
            options.push(TranslationOption {
                start: i,
                end: i + 1,
                target: vec![word.clone()],
                features: f,
                origin: OptionOrigin::PassThrough,
            });
        }
    }
    Ok(OptionLattice {
        source: sentence.to_vec(),
        options,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecoderConfig {
    /// Maximum |start − previous end| for a new phrase.
    pub distortion_limit: usize,
    pub stack_size: usize,
    /// Options kept per source span.
    pub option_limit: usize,
    /// Transliteration candidates offered for an uncovered word.
    pub translit_k: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            distortion_limit: 6,
            stack_size: 200,
            option_limit: 100,
            translit_k: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Coverage(Vec<u64>);

impl Coverage {
    fn new(n: usize) -> Self {
        Coverage(vec![0; n.div_ceil(64).max(1)])
    }

    fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    fn any_in(&self, start: usize, end: usize) -> bool {
        (start..end).any(|i| self.get(i))
    }

    fn with(&self, start: usize, end: usize) -> Coverage {
        let mut c = self.clone();
        for i in start..end {
            c.0[i / 64] |= 1 << (i % 64);
        }
        c
    }
}

#[derive(Debug, Clone)]
struct Edge {
    pred: usize,
    option: Option<usize>,
    /// LM increment in natural-log units.
    lm: f64,
    distortion: f64,
    score: f64,
}

#[derive(Debug, Clone)]
struct Node {
    coverage: Coverage,
    lm_state: Vec<String>,
    last_end: usize,
    score: f64,
    future: f64,
    edges: Vec<Edge>,
}

/// One step of a derivation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Step {
    pub start: usize,
    pub end: usize,
    pub option: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Derivation {
    pub target: Vec<String>,
    pub score: f64,
    pub features: Vec<f64>,
    pub steps: Vec<Step>,
}

/// Search lattice of one decoded sentence.
#[derive(Debug, Clone)]
pub struct Decoding {
    lattice: OptionLattice,
    model: LogLinearModel,
    nodes: Vec<Node>,
    end: usize,
    /// Set when the reordering search found nothing and a monotone pass
    /// produced the result.
    pub monotone_fallback: bool,
}

const ROOT: usize = 0;

fn lm_increment(lm: &dyn LanguageModel, state: &[String], words: &[String]) -> (f64, Vec<String>) {
    let keep = lm.order().saturating_sub(1);
    let mut history: Vec<&str> = state.iter().map(String::as_str).collect();
    let mut total = 0.0;
    for w in words {
        total += lm.score(&history, w);
        history.push(w);
    }
    let start = history.len().saturating_sub(keep);
    let next = history[start..].iter().map(|s| s.to_string()).collect();
    (total * std::f64::consts::LN_10, next)
}

/// Best weighted score per span `fc[i][j]` for `i..j`, optimistic about
/// LM context and ignoring distortion.
fn future_costs(lattice: &OptionLattice, model: &LogLinearModel, lm: &dyn LanguageModel) -> Vec<Vec<f64>> {
    let n = lattice.source.len();
    let mut fc = vec![vec![f64::NEG_INFINITY; n + 1]; n + 1];
    let w_lm = model.weights()[model.lm_index()];
    for o in &lattice.options {
        let (lm_est, _) = lm_increment(lm, &[], &o.target);
        let s = model.dot(&o.features) + w_lm * lm_est;
        if s > fc[o.start][o.end] {
            fc[o.start][o.end] = s;
        }
    }
    for len in 2..=n {
        for i in 0..=n - len {
            let j = i + len;
            for k in i + 1..j {
                let s = fc[i][k] + fc[k][j];
                if s > fc[i][j] {
                    fc[i][j] = s;
                }
            }
        }
    }
    fc
}

fn future_of(coverage: &Coverage, n: usize, fc: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    let mut i = 0;
    while i < n {
        if coverage.get(i) {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < n && !coverage.get(j) {
            j += 1;
        }
        total += fc[i][j];
        i = j;
    }
    total
}

/// Coverage, LM state and last covered position.
type RecombinationKey = (Coverage, Vec<String>, usize);

/// Stack decoding over coverage-cardinality stacks. Hypotheses sharing
/// coverage, LM state and last source end are recombined; all incoming
/// edges are kept so the lattice can be enumerated afterwards.
pub fn decode(
    lattice: &OptionLattice,
    model: &LogLinearModel,
    lm: &dyn LanguageModel,
    distortion_limit: usize,
    stack_size: usize,
) -> Result<Decoding> {
    let n = lattice.source.len();
    if n == 0 {
        return Err(Error::Empty("sentence"));
    }
    if !lattice.covers_every_position() {
        return Err(Error::Decode("some source position has no single-word option".into()));
    }
    if stack_size == 0 {
        return Err(Error::InvalidArgument("stack size must be at least 1".into()));
    }
    if let Some(o) = lattice.options.first() {
        if o.features.len() != model.len() {
            return Err(Error::DimensionMismatch {
                left: (o.features.len(), 1),
                right: (model.len(), 1),
            });
        }
    }
    let fc = future_costs(lattice, model, lm);
    let option_scores: Vec<f64> = lattice.options.iter().map(|o| model.dot(&o.features)).collect();
    let w = model.weights();
    let (w_lm, w_d) = (w[model.lm_index()], w[model.distortion_index()]);
    let keep = lm.order().saturating_sub(1);
    let root_state: Vec<String> = if keep > 0 { vec![BOS.to_string()] } else { Vec::new() };

    let root_cov = Coverage::new(n);
    let mut nodes = vec![Node {
        future: future_of(&root_cov, n, &fc),
        coverage: root_cov,
        lm_state: root_state,
        last_end: 0,
        score: 0.0,
        edges: Vec::new(),
    }];
    let mut stacks: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
    let mut index: Vec<HashMap<RecombinationKey, usize>> = vec![HashMap::new(); n + 1];
    stacks[0].push(ROOT);

    for level in 0..n {
        let mut stack = std::mem::take(&mut stacks[level]);
        stack.sort_by(|&a, &b| {
            let (na, nb) = (&nodes[a], &nodes[b]);
            (nb.score + nb.future).total_cmp(&(na.score + na.future)).then(a.cmp(&b))
        });
        stack.truncate(stack_size);
        for &id in &stack {
            let (coverage, state, last_end, score) = {
                let node = &nodes[id];
                (node.coverage.clone(), node.lm_state.clone(), node.last_end, node.score)
            };
            for (oi, o) in lattice.options.iter().enumerate() {
                if coverage.any_in(o.start, o.end) || o.start.abs_diff(last_end) > distortion_limit {
                    continue;
                }
                let (lm_inc, next_state) = lm_increment(lm, &state, &o.target);
                let distortion = -(o.start.abs_diff(last_end) as f64);
                let delta = option_scores[oi] + w_lm * lm_inc + w_d * distortion;
                let edge = Edge {
                    pred: id,
                    option: Some(oi),
                    lm: lm_inc,
                    distortion,
                    score: delta,
                };
                let new_cov = coverage.with(o.start, o.end);
                let new_level = level + o.len();
                let key = (new_cov, next_state, o.end);
                match index[new_level].get(&key) {
                    Some(&existing) => {
                        let node = &mut nodes[existing];
                        if score + delta > node.score {
                            node.score = score + delta;
                        }
                        node.edges.push(edge);
                    }
                    None => {
                        let (cov, st, end) = key.clone();
                        let future = future_of(&cov, n, &fc);
                        nodes.push(Node {
                            coverage: cov,
                            lm_state: st,
                            last_end: end,
                            score: score + delta,
                            future,
                            edges: vec![edge],
                        });
                        let new_id = nodes.len() - 1;
                        index[new_level].insert(key, new_id);
                        stacks[new_level].push(new_id);
                    }
                }
            }
        }
        stacks[level] = stack;
    }

    if stacks[n].is_empty() {
        if distortion_limit == 0 {
            return Err(Error::Decode("no complete hypothesis".into()));
        }
        let mut d = decode(lattice, model, lm, 0, stack_size)?;
        d.monotone_fallback = true;
        return Ok(d);
    }
    let mut end_node = Node {
        coverage: Coverage::new(n),
        lm_state: Vec::new(),
        last_end: n,
        score: f64::NEG_INFINITY,
        future: 0.0,
        edges: Vec::new(),
    };
    for &id in &stacks[n] {
        let (lm_inc, _) = lm_increment(lm, &nodes[id].lm_state, &[EOS.to_string()]);
        let delta = w_lm * lm_inc;
        end_node.score = end_node.score.max(nodes[id].score + delta);
        end_node.edges.push(Edge {
            pred: id,
            option: None,
            lm: lm_inc,
            distortion: 0.0,
            score: delta,
        });
    }
    nodes.push(end_node);
    Ok(Decoding {
        lattice: lattice.clone(),
        model: model.clone(),
        end: nodes.len() - 1,
        nodes,
        monotone_fallback: false,
    })
}

#[derive(Debug, Clone)]
struct Partial {
    priority: f64,
    seq: usize,
    node: usize,
    suffix: f64,
    path: Vec<(usize, usize)>,
}

impl PartialEq for Partial {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Partial {}
impl PartialOrd for Partial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Partial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .total_cmp(&other.priority)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl Decoding {
    pub fn best_score(&self) -> f64 {
        self.nodes[self.end].score
    }

    pub fn lattice(&self) -> &OptionLattice {
        &self.lattice
    }

    fn derivation(&self, path: &[(usize, usize)]) -> Derivation {
        let mut features = vec![0.0; self.model.len()];
        let mut target = Vec::new();
        let mut steps = Vec::new();
        let mut score = 0.0;
        for &(node, e) in path {
            let edge = &self.nodes[node].edges[e];
            score += edge.score;
            features[self.model.lm_index()] += edge.lm;
            features[self.model.distortion_index()] += edge.distortion;
            if let Some(oi) = edge.option {
                let o = &self.lattice.options[oi];
                for (f, v) in features.iter_mut().zip(&o.features) {
                    *f += v;
                }
                target.extend(o.target.iter().cloned());
                steps.push(Step {
                    start: o.start,
                    end: o.end,
                    option: oi,
                });
            }
        }
        Derivation {
            target,
            score,
            features,
            steps,
        }
    }

    /// Highest-scoring derivation.
    pub fn best(&self) -> Derivation {
        let mut path = Vec::new();
        let mut node = self.end;
        while node != ROOT {
            let edges = &self.nodes[node].edges;
            let mut best = 0;
            for (k, e) in edges.iter().enumerate() {
                let s = self.nodes[e.pred].score + e.score;
                if s > self.nodes[edges[best].pred].score + edges[best].score {
                    best = k;
                }
            }
            path.push((node, best));
            node = edges[best].pred;
        }
        path.reverse();
        self.derivation(&path)
    }

    /// Up to `n` distinct target strings, best first, by best-first search
    /// backwards through the lattice. The forward Viterbi score of each node
    /// is an exact completion estimate, so paths come out in score order.
    pub fn nbest(&self, n: usize) -> Vec<Derivation> {
        let mut out: Vec<Derivation> = Vec::new();
        let mut seen: std::collections::HashSet<Vec<String>> = std::collections::HashSet::new();
        let mut heap = BinaryHeap::new();
        let mut seq = 0;
        heap.push(Partial {
            priority: self.nodes[self.end].score,
            seq,
            node: self.end,
            suffix: 0.0,
            path: Vec::new(),
        });
        let max_pops = n.saturating_mul(200).max(1000);
        let mut pops = 0;
        while let Some(p) = heap.pop() {
            if out.len() >= n || pops >= max_pops {
                break;
            }
            pops += 1;
            if p.node == ROOT {
                let mut path = p.path;
                path.reverse();
                let d = self.derivation(&path);
                if seen.insert(d.target.clone()) {
                    out.push(d);
                }
                continue;
            }
            for (k, e) in self.nodes[p.node].edges.iter().enumerate() {
                let suffix = p.suffix + e.score;
                let mut path = p.path.clone();
                path.push((p.node, k));
                seq += 1;
                heap.push(Partial {
                    priority: self.nodes[e.pred].score + suffix,
                    seq,
                    node: e.pred,
                    suffix,
                    path,
                });
            }
        }
        out
    }
}

/// `id ||| tokens ||| name=value ... ||| total`
pub fn format_nbest_line(id: usize, d: &Derivation, model: &LogLinearModel) -> String {
    let feats: Vec<String> = model
        .names()
        .iter()
        .zip(&d.features)
        .map(|(n, v)| format!("{n}={v}"))
        .collect();
    format!("{id} ||| {} ||| {} ||| {}", d.target.join(" "), feats.join(" "), d.score)
}

/// Everything needed to translate: tables, LM, optional transliteration
/// model, weights and search parameters.
#[derive(Clone)]
pub struct TranslationSystem {
    pub tables: Arc<DecodingTables>,
    pub lm: Arc<dyn LanguageModel>,
    pub translit: Option<Arc<CharModel>>,
    pub model: LogLinearModel,
    pub config: DecoderConfig,
}

impl TranslationSystem {
    pub fn new(tables: DecodingTables, lm: Arc<dyn LanguageModel>, config: DecoderConfig) -> Result<Self> {
        let model = LogLinearModel::new(tables.block_count())?;
        Ok(TranslationSystem {
            tables: Arc::new(tables),
            lm,
            translit: None,
            model,
            config,
        })
    }

    pub fn with_translit(mut self, model: CharModel) -> Self {
        self.translit = Some(Arc::new(model));
        self
    }

    pub fn options(&self, sentence: &[String]) -> Result<OptionLattice> {
        collect_options(
            sentence,
            &self.tables,
            self.translit.as_deref().map(|m| (m, self.config.translit_k)),
            &self.model,
            self.config.option_limit,
        )
    }

    pub fn decode(&self, sentence: &[String]) -> Result<Decoding> {
        let lattice = self.options(sentence)?;
        decode(
            &lattice,
            &self.model,
            &*self.lm,
            self.config.distortion_limit,
            self.config.stack_size,
        )
    }

    /// Best translation; an empty sentence translates to nothing.
    pub fn translate(&self, sentence: &[String]) -> Result<Vec<String>> {
        if sentence.is_empty() {
            return Ok(Vec::new());
        }
        Ok(self.decode(sentence)?.best().target)
    }

    /// Translates sentences in parallel, preserving order.
    pub fn translate_all(&self, sentences: &[Vec<String>]) -> Result<Vec<Vec<String>>> {
        sentences.par_iter().map(|s| self.translate(s)).collect()
    }

    pub fn nbest_all(&self, sentences: &[Vec<String>], n: usize) -> Result<Vec<Vec<Derivation>>> {
        sentences
            .par_iter()
            .map(|s| {
                if s.is_empty() {
                    return Ok(vec![Derivation {
                        target: Vec::new(),
                        score: 0.0,
                        features: vec![0.0; self.model.len()],
                        steps: Vec::new(),
                    }]);
                }
                Ok(self.decode(s)?.nbest(n))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuneConfig {
    /// Decode / optimize rounds.
    pub rounds: usize,
    pub nbest: usize,
    /// Coordinate sweeps per round.
    pub passes: usize,
    pub seed: u64,
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig {
            rounds: 3,
            nbest: 20,
            passes: 3,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneOutcome {
    pub model: LogLinearModel,
    pub initial_bleu: f64,
    pub bleu: f64,
    /// Dev BLEU of the decoded output after each round.
    pub history: Vec<f64>,
}

struct PoolEntry {
    features: Vec<f64>,
    stats: BleuStats,
}

fn pool_bleu(pool: &[Vec<PoolEntry>], weights: &[f64]) -> f64 {
    let mut total = BleuStats::zero(DEFAULT_MAX_N);
    for cands in pool {
        let mut best: Option<(f64, &PoolEntry)> = None;
        for c in cands {
            let s: f64 = weights.iter().zip(&c.features).map(|(w, f)| w * f).sum();
            if best.is_none_or(|(b, _)| s > b) {
                best = Some((s, c));
            }
        }
        if let Some((_, c)) = best {
            total.add(&c.stats);
        }
    }
    total.score()
}

fn add_to_pool(
    pool: &mut [Vec<PoolEntry>],
    seen: &mut [std::collections::HashSet<Vec<String>>],
    lists: Vec<Vec<Derivation>>,
    refs: &[Vec<String>],
) {
    for (k, list) in lists.into_iter().enumerate() {
        for d in list {
            if seen[k].insert(d.target.clone()) {
                pool[k].push(PoolEntry {
                    stats: BleuStats::sentence(&d.target, &refs[k], DEFAULT_MAX_N),
                    features: d.features,
                });
            }
        }
    }
}

fn one_best_bleu(lists: &[Vec<Derivation>], refs: &[Vec<String>]) -> f64 {
    let mut total = BleuStats::zero(DEFAULT_MAX_N);
    for (list, r) in lists.iter().zip(refs) {
        let hyp: &[String] = list.first().map(|d| d.target.as_slice()).unwrap_or(&[]);
        total.add(&BleuStats::sentence(hyp, r, DEFAULT_MAX_N));
    }
    total.score()
}

/// Coordinate ascent on corpus BLEU over an accumulated n-best pool,
/// re-decoding the dev set after every round. Returns the weights whose
/// actual decoding scored best.
pub fn tune_weights(
    system: &TranslationSystem,
    dev_source: &[Vec<String>],
    dev_reference: &[Vec<String>],
    config: &TuneConfig,
) -> Result<TuneOutcome> {
    if dev_source.is_empty() {
        return Err(Error::Empty("dev set"));
    }
    if dev_source.len() != dev_reference.len() {
        return Err(Error::LineCountMismatch {
            source_lines: dev_source.len(),
            target_lines: dev_reference.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut current = system.clone();
    let lists = current.nbest_all(dev_source, config.nbest)?;
    let initial = one_best_bleu(&lists, dev_reference);
    let mut outcome = TuneOutcome {
        model: system.model.clone(),
        initial_bleu: initial,
        bleu: initial,
        history: Vec::new(),
    };
    if initial >= 100.0 {
        return Ok(outcome);
    }
    let mut pool: Vec<Vec<PoolEntry>> = (0..dev_source.len()).map(|_| Vec::new()).collect();
    let mut seen = vec![std::collections::HashSet::new(); dev_source.len()];
    add_to_pool(&mut pool, &mut seen, lists, dev_reference);

    let dims = system.model.len();
    let steps = [-1.0, -0.5, -0.2, -0.05, 0.05, 0.2, 0.5, 1.0];
    for _ in 0..config.rounds {
        let mut w = current.model.weights().to_vec();
        let mut score = pool_bleu(&pool, &w);
        let mut order: Vec<usize> = (0..dims).collect();
        for _ in 0..config.passes {
            order.shuffle(&mut rng);
            let mut improved = false;
            for &i in &order {
                let scale = w[i].abs().max(0.1);
                let mut best = (score, w[i]);
                for s in steps {
                    let mut trial = w.clone();
                    trial[i] = w[i] + s * scale;
                    let b = pool_bleu(&pool, &trial);
                    if b > best.0 + 1e-9 {
                        best = (b, trial[i]);
                    }
                }
                if best.1 != w[i] {
                    w[i] = best.1;
                    score = best.0;
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        current.model.set_weights(&w)?;
        let lists = current.nbest_all(dev_source, config.nbest)?;
        let bleu = one_best_bleu(&lists, dev_reference);
        outcome.history.push(bleu);
        if bleu > outcome.bleu {
            outcome.bleu = bleu;
            outcome.model = current.model.clone();
        }
        add_to_pool(&mut pool, &mut seen, lists, dev_reference);
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ngramlm::train_kn;
    use crate::phrasetab::{PhraseScores, PhraseTable, TableRole};

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    struct Uniform;
    impl LanguageModel for Uniform {
        fn order(&self) -> usize {
            2
        }
        fn score(&self, _: &[&str], _: &str) -> f64 {
            -1.0
        }
    }

    fn table(rows: &[(&str, &str, f64)]) -> DecodingTables {
        let mut t = PhraseTable::new("t", TableRole::Baseline);
        for &(s, tg, p) in rows {
            t.insert(toks(s), toks(tg), PhraseScores::uniform(p));
        }
        DecodingTables::single(t)
    }

    #[test]
    fn single_word() {
        let sys = TranslationSystem::new(table(&[("a", "x", 1.0)]), Arc::new(Uniform), DecoderConfig::default()).unwrap();
        let lat = sys.options(&toks("a")).unwrap();
        assert_eq!(lat.options.len(), 1);
        assert_eq!(sys.translate(&toks("a")).unwrap(), toks("x"));
    }

    #[test]
    fn pass_through_for_unknown_word() {
        let sys = TranslationSystem::new(table(&[("a", "x", 1.0), ("c", "z", 1.0)]), Arc::new(Uniform), DecoderConfig::default())
            .unwrap();
        let lat = sys.options(&toks("q")).unwrap();
        assert_eq!(lat.options.len(), 1);
        assert_eq!(lat.options[0].origin, OptionOrigin::PassThrough);
        assert_eq!(sys.translate(&toks("a q c")).unwrap(), toks("x q z"));
    }

    #[test]
    fn features_add_up() {
        let lm = train_kn(&[toks("x y z"), toks("y x z")], 3).unwrap();
        let sys = TranslationSystem::new(
            table(&[("a", "x", 0.6), ("a", "y", 0.4), ("b", "y", 0.7), ("b", "x", 0.3), ("a b", "x y", 0.5)]),
            Arc::new(lm),
            DecoderConfig::default(),
        )
        .unwrap();
        let d = sys.decode(&toks("a b q")).unwrap();
        let list = d.nbest(10);
        assert_eq!(list[0], d.best());
        assert!((list[0].score - d.best_score()).abs() < 1e-9);
        for (k, item) in list.iter().enumerate() {
            assert!((sys.model.dot(&item.features) - item.score).abs() < 1e-9);
            if k > 0 {
                assert!(list[k - 1].score >= item.score);
                assert_ne!(list[k - 1].target, item.target);
            }
        }
    }

    #[test]
    fn weights_file_round_trip() {
        let mut m = LogLinearModel::new(2).unwrap();
        m.set("tm1.lex_st", 0.125).unwrap();
        let mut buf = Vec::new();
        m.write_weights(&mut buf).unwrap();
        assert_eq!(LogLinearModel::read_weights(&buf[..], 2).unwrap(), m);
        assert!(LogLinearModel::read_weights("nope\t1\n".as_bytes(), 2).is_err());
        assert!(LogLinearModel::new(0).is_err());
    }

    #[test]
    fn perfect_dev_keeps_weights() {
        let sys = TranslationSystem::new(table(&[("a", "x", 1.0), ("b", "y", 1.0)]), Arc::new(Uniform), DecoderConfig::default())
            .unwrap();
        let out = tune_weights(&sys, &[toks("a b")], &[toks("x y")], &TuneConfig::default()).unwrap();
        assert_eq!(out.bleu, 100.0);
        assert_eq!(out.model, sys.model);
    }
}
