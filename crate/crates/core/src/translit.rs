//! Unsupervised transliteration mining and character-level transliteration.
//!
//! Word pairs are modelled as a mixture of a transliteration component (a
//! monotone sequence of character-segment pairs, each side at most two
//! characters, one side possibly empty) and a non-transliteration component
//! (independent source and target character unigrams). EM fits the segment
//! distribution and the mixture prior; the posterior of the transliteration
//! component decides which pairs are mined.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use crate::align::AlignmentMatrix;
use crate::corpus::{read_lines, Bitext};
use crate::error::{Error, Result};
use crate::phrasetab::{PhraseScores, PhraseTable, TableRole};

/// Longest character segment on either side of an operation.
pub const MAX_SEGMENT: usize = 2;

/// Initial weight of a segment pair with a two-character side, relative to
/// single-character pairs.
const MULTI_CHAR_INIT: f64 = 1e-3;
/// ln score of copying a character the model has never seen.
pub const IDENTITY_FALLBACK_LOGPROB: f64 = -9.210_340_371_976_182; // ln(1e-4)
const LM_SMOOTHING: f64 = 0.1;
const BOW: char = '\u{2}';
const EOW: char = '\u{3}';

#[derive(Debug, Clone, PartialEq)]
pub struct WordPair {
    pub source: String,
    pub target: String,
    pub weight: f64,
}

/// Weighted word pairs to mine from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WordPairCorpus {
    pairs: Vec<WordPair>,
}

impl WordPairCorpus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, source: &str, target: &str, weight: f64) -> Result<()> {
        if source.is_empty() || target.is_empty() {
            return Err(Error::InvalidArgument("empty word in word pair".into()));
        }
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-positive weight {weight}")));
        }
        self.pairs.push(WordPair {
            source: source.to_string(),
            target: target.to_string(),
            weight,
        });
        Ok(())
    }

    pub fn pairs(&self) -> &[WordPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// One-word-to-one-word entries of a phrase table, weighted by phi(t|s).
    pub fn from_phrase_table(table: &PhraseTable) -> Self {
        let mut corpus = WordPairCorpus::new();
        for (s, t, sc) in table.iter() {
            if s.len() == 1 && t.len() == 1 && sc.phi_tgt_given_src > 0.0 {
                corpus
                    .push(&s[0], &t[0], sc.phi_tgt_given_src)
                    .expect("phrase table words are non-empty");
            }
        }
        corpus
    }

    /// Word pairs linked one-to-one in the alignments, weighted by how often
    /// they occur.
    pub fn from_alignments(bitext: &Bitext, alignments: &[AlignmentMatrix]) -> Self {
        let mut counts: BTreeMap<(String, String), f64> = BTreeMap::new();
        for (idx, alignment) in alignments.iter().enumerate().take(bitext.len()) {
            let src = bitext.source_tokens(idx);
            let tgt = bitext.target_tokens(idx);
            let links = alignment.links();
            let mut src_deg = vec![0usize; src.len()];
            let mut tgt_deg = vec![0usize; tgt.len()];
            for &(i, j) in &links {
                src_deg[i] += 1;
                tgt_deg[j] += 1;
            }
            for (i, j) in links {
                if src_deg[i] == 1 && tgt_deg[j] == 1 {
                    *counts.entry((src[i].to_string(), tgt[j].to_string())).or_default() += 1.0;
                }
            }
        }
        let mut corpus = WordPairCorpus::new();
        for ((s, t), w) in counts {
            corpus.push(&s, &t, w).expect("aligned words are non-empty");
        }
        corpus
    }

    pub fn extend(&mut self, other: &WordPairCorpus) {
        self.pairs.extend(other.pairs.iter().cloned());
    }
}

/// Add-0.1 smoothed character trigram model over target words.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CharTrigramLm {
    trigrams: HashMap<[char; 3], f64>,
    contexts: HashMap<[char; 2], f64>,
    alphabet_size: usize,
}

impl CharTrigramLm {
    pub fn train<'a>(words: impl IntoIterator<Item = (&'a str, f64)>) -> Self {
        let mut lm = CharTrigramLm::default();
        let mut alphabet = std::collections::BTreeSet::new();
        alphabet.insert(EOW);
        for (word, weight) in words {
            let mut padded = vec![BOW, BOW];
            padded.extend(word.chars());
            padded.push(EOW);
            alphabet.extend(word.chars());
            for w in padded.windows(3) {
                *lm.trigrams.entry([w[0], w[1], w[2]]).or_default() += weight;
                *lm.contexts.entry([w[0], w[1]]).or_default() += weight;
            }
        }
        lm.alphabet_size = alphabet.len();
        lm
    }

    /// ln p(c | two previous characters).
    pub fn logprob(&self, prev2: char, prev1: char, c: char) -> f64 {
        let num = self.trigrams.get(&[prev2, prev1, c]).copied().unwrap_or(0.0) + LM_SMOOTHING;
        let den = self.contexts.get(&[prev2, prev1]).copied().unwrap_or(0.0)
            + LM_SMOOTHING * self.alphabet_size.max(1) as f64;
        (num / den).ln()
    }

    fn extend(&self, history: &[char], appended: &str) -> f64 {
        let mut h: Vec<char> = history.to_vec();
        let mut total = 0.0;
        for c in appended.chars() {
            let n = h.len();
            total += self.logprob(h[n - 2], h[n - 1], c);
            h.push(c);
        }
        total
    }
}

/// Character transliteration model: p(target segment | source segment)
/// rows, the source-segment prior (so p(a, b) = p(a)·p(b | a)), the mixture
/// prior λ and a target character trigram model.
#[derive(Debug, Clone, PartialEq)]
pub struct CharModel {
    rows: BTreeMap<String, BTreeMap<String, f64>>,
    source_prior: BTreeMap<String, f64>,
    pub lambda: f64,
    target_lm: CharTrigramLm,
    lm_words: Vec<(String, f64)>,
    by_source: HashMap<String, Vec<(String, f64)>>,
}

impl CharModel {
    /// Builds a model from joint segment probabilities p(a, b) (renormalized
    /// to sum to one) and target words for the character model.
    pub fn from_joint<'a>(
        joint: impl IntoIterator<Item = (String, String, f64)>,
        lambda: f64,
        target_words: impl IntoIterator<Item = (&'a str, f64)>,
    ) -> Result<Self> {
        let joint: Vec<(String, String, f64)> = joint.into_iter().filter(|j| j.2 > 0.0).collect();
        let total: f64 = joint.iter().map(|j| j.2).sum();
        if total <= 0.0 {
            return Err(Error::Empty("segment distribution"));
        }
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidArgument(format!("lambda {lambda} outside [0, 1]")));
        }
        let mut source_prior: BTreeMap<String, f64> = BTreeMap::new();
        let mut rows: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
        let mut by_source: HashMap<String, Vec<(String, f64)>> = HashMap::new();
        for (a, b, p) in &joint {
            if a.chars().count() > MAX_SEGMENT || b.chars().count() > MAX_SEGMENT || (a.is_empty() && b.is_empty()) {
                return Err(Error::InvalidArgument(format!("invalid segment pair '{a}' → '{b}'")));
            }
            let p = p / total;
            *source_prior.entry(a.clone()).or_default() += p;
            rows.entry(a.clone()).or_default().insert(b.clone(), p);
            by_source.entry(a.clone()).or_default().push((b.clone(), p.ln()));
        }
        for (a, row) in rows.iter_mut() {
            let z = source_prior[a];
            for v in row.values_mut() {
                *v /= z;
            }
        }
        for opts in by_source.values_mut() {
            opts.sort_by(|x, y| y.1.total_cmp(&x.1).then_with(|| x.0.cmp(&y.0)));
        }
        let lm_words: Vec<(String, f64)> = target_words.into_iter().map(|(w, c)| (w.to_string(), c)).collect();
        Ok(CharModel {
            rows,
            source_prior,
            lambda,
            target_lm: CharTrigramLm::train(lm_words.iter().map(|(w, c)| (w.as_str(), *c))),
            lm_words,
            by_source,
        })
    }

    /// p(b | a); the empty string stands for insertion/deletion.
    pub fn conditional(&self, a: &str, b: &str) -> f64 {
        self.rows.get(a).and_then(|r| r.get(b)).copied().unwrap_or(0.0)
    }

    pub fn rows(&self) -> &BTreeMap<String, BTreeMap<String, f64>> {
        &self.rows
    }

    pub fn joint(&self, a: &str, b: &str) -> f64 {
        self.source_prior.get(a).copied().unwrap_or(0.0) * self.conditional(a, b)
    }

    pub fn target_lm(&self) -> &CharTrigramLm {
        &self.target_lm
    }

    /// Text form: a `lambda` line, `seg<TAB>a<TAB>b<TAB>p(a,b)` lines and
    /// `word<TAB>w<TAB>weight` lines for the character model.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "lambda\t{}", self.lambda)?;
        for (a, b, p) in self.joint_entries() {
            writeln!(out, "seg\t{a}\t{b}\t{p}")?;
        }
        for (w, c) in &self.lm_words {
            writeln!(out, "word\t{w}\t{c}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut lambda = None;
        let mut joint = Vec::new();
        let mut words = Vec::new();
        for (n, line) in read_lines(reader)?.iter().enumerate() {
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            let bad = || Error::Parse {
                format: "char model",
                line: n + 1,
                message: format!("unexpected line '{line}'"),
            };
            match f.as_slice() {
                ["lambda", v] => lambda = Some(v.parse::<f64>().map_err(|_| bad())?),
                ["seg", a, b, p] => joint.push((a.to_string(), b.to_string(), p.parse::<f64>().map_err(|_| bad())?)),
                ["word", w, c] => words.push((w.to_string(), c.parse::<f64>().map_err(|_| bad())?)),
                _ => return Err(bad()),
            }
        }
        let lambda = lambda.ok_or(Error::Parse {
            format: "char model",
            line: 0,
            message: "missing lambda line".into(),
        })?;
        CharModel::from_joint(joint, lambda, words.iter().map(|(w, c)| (w.as_str(), *c)))
    }

    /// All (a, b, p(a, b)) with positive probability.
    pub fn joint_entries(&self) -> Vec<(String, String, f64)> {
        self.rows
            .iter()
            .flat_map(|(a, row)| {
                let pa = self.source_prior[a];
                row.iter().map(move |(b, p)| (a.clone(), b.clone(), pa * p))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinedPair {
    pub source: String,
    pub target: String,
    pub posterior: f64,
}

#[derive(Debug, Clone)]
pub struct MiningResult {
    pub model: CharModel,
    /// Pairs whose posterior reaches the threshold, in corpus order.
    pub mined: Vec<MinedPair>,
    /// Posterior of every corpus pair, in corpus order.
    pub posteriors: Vec<f64>,
    /// Mixture log-likelihood, with the best alignment standing in for the
    /// transliteration component, before the first iteration and after each
    /// one.
    pub log_likelihoods: Vec<f64>,
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

// Lattice states are (i, j, last operation was a gap). Insertions and
// deletions may not follow one another, so a pair cannot be explained by
// interleaving a deletion of every source character with an insertion of
// every target character.
struct Transition {
    from: usize,
    to: usize,
    ty: usize,
}

struct PairLattice {
    transitions: Vec<Transition>,
    states: usize,
    /// The two states at (n, m).
    finals: [usize; 2],
    log_ntr: f64,
    weight: f64,
}

impl PairLattice {
    /// Best monotone path: its log score and the segment types it uses.
    /// Ties keep the earlier transition.
    fn viterbi(&self, logp: &[f64]) -> (f64, Vec<usize>) {
        let mut best = vec![f64::NEG_INFINITY; self.states];
        let mut back: Vec<Option<usize>> = vec![None; self.states];
        best[0] = 0.0;
        for (k, t) in self.transitions.iter().enumerate() {
            let s = best[t.from] + logp[t.ty];
            if s > best[t.to] {
                best[t.to] = s;
                back[t.to] = Some(k);
            }
        }
        let [f0, f1] = self.finals;
        let mut state = if best[f1] > best[f0] { f1 } else { f0 };
        let score = best[state];
        let mut path = Vec::new();
        if score > f64::NEG_INFINITY {
            while let Some(k) = back[state] {
                path.push(self.transitions[k].ty);
                state = self.transitions[k].from;
            }
        }
        (score, path)
    }
}

struct Lattices {
    pairs: Vec<PairLattice>,
    types: Vec<(String, String)>,
}

fn build_lattices(corpus: &WordPairCorpus) -> Lattices {
    let mut src_unigram: BTreeMap<char, f64> = BTreeMap::new();
    let mut tgt_unigram: BTreeMap<char, f64> = BTreeMap::new();
    for p in corpus.pairs() {
        for c in p.source.chars() {
            *src_unigram.entry(c).or_default() += p.weight;
        }
        for c in p.target.chars() {
            *tgt_unigram.entry(c).or_default() += p.weight;
        }
    }
    let src_total: f64 = src_unigram.values().sum();
    let tgt_total: f64 = tgt_unigram.values().sum();

    let mut type_ids: HashMap<(String, String), usize> = HashMap::new();
    let mut types = Vec::new();
    let mut pairs = Vec::with_capacity(corpus.len());
    for p in corpus.pairs() {
        let s: Vec<char> = p.source.chars().collect();
        let t: Vec<char> = p.target.chars().collect();
        let (n, m) = (s.len(), t.len());
        let state = |i: usize, j: usize, gap: bool| (i * (m + 1) + j) * 2 + usize::from(gap);
        let mut transitions = Vec::new();
        for i in 0..=n {
            for j in 0..=m {
                for da in 0..=MAX_SEGMENT {
                    for db in 0..=MAX_SEGMENT {
                        if (da == 0 && db == 0) || i + da > n || j + db > m {
                            continue;
                        }
                        let key: (String, String) =
                            (s[i..i + da].iter().collect(), t[j..j + db].iter().collect());
                        let ty = *type_ids.entry(key.clone()).or_insert_with(|| {
                            types.push(key);
                            types.len() - 1
                        });
                        let gap = da == 0 || db == 0;
                        let sources: &[bool] = if gap { &[false] } else { &[false, true] };
                        for &from_gap in sources {
                            transitions.push(Transition {
                                from: state(i, j, from_gap),
                                to: state(i + da, j + db, gap),
                                ty,
                            });
                        }
                    }
                }
            }
        }
        let log_ntr = s.iter().map(|c| (src_unigram[c] / src_total).ln()).sum::<f64>()
            + t.iter().map(|c| (tgt_unigram[c] / tgt_total).ln()).sum::<f64>();
        pairs.push(PairLattice {
            transitions,
            states: (n + 1) * (m + 1) * 2,
            finals: [state(n, m, false), state(n, m, true)],
            log_ntr,
            weight: p.weight,
        });
    }
    Lattices { pairs, types }
}

struct EStep {
    log_likelihood: f64,
    posteriors: Vec<f64>,
    counts: Vec<f64>,
    prior_mass: f64,
}

fn e_step(lattices: &Lattices, logp: &[f64], lambda: f64) -> EStep {
    let mut counts = vec![0.0; lattices.types.len()];
    let mut posteriors = Vec::with_capacity(lattices.pairs.len());
    let mut ll = 0.0;
    let mut prior_mass = 0.0;
    let (ln_l, ln_not_l) = (lambda.ln(), (1.0 - lambda).ln());
    for pair in &lattices.pairs {
        let (log_tr, path) = pair.viterbi(logp);
        let joint_tr = ln_l + log_tr;
        let joint_ntr = ln_not_l + pair.log_ntr;
        let total = log_add(joint_tr, joint_ntr);
        ll += pair.weight * total;
        let posterior = if joint_tr == f64::NEG_INFINITY {
            0.0
        } else {
            (joint_tr - total).exp()
        };
        posteriors.push(posterior);
        prior_mass += pair.weight * posterior;
        for ty in path {
            counts[ty] += pair.weight * posterior;
        }
    }
    EStep {
        log_likelihood: ll,
        posteriors,
        counts,
        prior_mass,
    }
}

fn initial_logp(types: &[(String, String)]) -> Vec<f64> {
    let w: Vec<f64> = types
        .iter()
        .map(|(a, b)| {
            let long = a.chars().count().max(b.chars().count());
            MULTI_CHAR_INIT.powi(long as i32 - 1)
        })
        .collect();
    let z: f64 = w.iter().sum();
    w.iter().map(|x| (x / z).ln()).collect()
}

/// Fits the mixture with `iterations` EM steps and returns the pairs whose
/// transliteration posterior is at least `threshold`.
///
/// The transliteration component scores a pair by its best monotone
/// segment alignment, as in edit distance, and segment counts are collected
/// along that alignment weighted by the pair's posterior. Summing over all
/// alignments instead lets the component absorb unrelated pairs through
/// the sheer number of paths.
pub fn mine_transliterations(
    corpus: &WordPairCorpus,
    iterations: usize,
    threshold: f64,
) -> Result<MiningResult> {
    if corpus.is_empty() {
        return Err(Error::Empty("word pair corpus"));
    }
    if iterations == 0 {
        return Err(Error::InvalidArgument("iterations must be at least 1".into()));
    }
    let lattices = build_lattices(corpus);
    let total_weight: f64 = corpus.pairs().iter().map(|p| p.weight).sum();
    let mut logp = initial_logp(&lattices.types);
    let mut lambda = 0.5;
    let mut log_likelihoods = Vec::with_capacity(iterations + 1);
    for _ in 0..iterations {
        let step = e_step(&lattices, &logp, lambda);
        log_likelihoods.push(step.log_likelihood);
        let mass: f64 = step.counts.iter().sum();
        if mass > 0.0 {
            logp = step.counts.iter().map(|c| (c / mass).ln()).collect();
        }
        lambda = step.prior_mass / total_weight;
    }
    let last = e_step(&lattices, &logp, lambda);
    log_likelihoods.push(last.log_likelihood);

    let mined: Vec<MinedPair> = corpus
        .pairs()
        .iter()
        .zip(&last.posteriors)
        .filter(|(_, &post)| post >= threshold)
        .map(|(p, &posterior)| MinedPair {
            source: p.source.clone(),
            target: p.target.clone(),
            posterior,
        })
        .collect();
    let lm_words: Vec<(&str, f64)> = if mined.is_empty() {
        corpus.pairs().iter().map(|p| (p.target.as_str(), p.weight)).collect()
    } else {
        corpus
            .pairs()
            .iter()
            .zip(&last.posteriors)
            .filter(|(_, &post)| post >= threshold)
            .map(|(p, _)| (p.target.as_str(), p.weight))
            .collect()
    };
    let joint = lattices
        .types
        .iter()
        .zip(&logp)
        .map(|((a, b), &lp)| (a.clone(), b.clone(), lp.exp()));
    let model = CharModel::from_joint(joint, lambda, lm_words)?;
    Ok(MiningResult {
        model,
        mined,
        posteriors: last.posteriors,
        log_likelihoods,
    })
}

/// k-best transliterations of one word.
#[derive(Debug, Clone, PartialEq)]
pub struct Transliterations {
    /// (target, ln score), best first.
    pub candidates: Vec<(String, f64)>,
    /// Set when a character without any model entry was copied through.
    pub used_identity_fallback: bool,
}

#[derive(Clone)]
struct Partial {
    out: String,
    tail: [char; 2],
    score: f64,
    after_gap: bool,
}

fn push_partial(stack: &mut HashMap<(String, bool), Partial>, p: Partial) {
    let key = (p.out.clone(), p.after_gap);
    match stack.get(&key) {
        Some(old) if old.score >= p.score => {}
        _ => {
            stack.insert(key, p);
        }
    }
}

fn ranked(stack: HashMap<(String, bool), Partial>, beam: usize) -> Vec<Partial> {
    let mut v: Vec<Partial> = stack.into_values().collect();
    v.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.out.cmp(&b.out))
            .then_with(|| a.after_gap.cmp(&b.after_gap))
    });
    v.truncate(beam);
    v
}

fn advance(model: &CharModel, p: &Partial, seg_out: &str, seg_logp: f64, after_gap: bool) -> Partial {
    let lm = model.target_lm.extend(&p.tail, seg_out);
    let mut out = p.out.clone();
    out.push_str(seg_out);
    let mut tail = p.tail;
    for c in seg_out.chars() {
        tail = [tail[1], c];
    }
    Partial {
        out,
        tail,
        score: p.score + seg_logp + lm,
        after_gap,
    }
}

/// Beam search over monotone segmentations of `word`, scoring segments
/// with the joint segment model plus the target character trigram model.
/// As in training, an insertion or deletion never directly follows another
/// insertion or deletion.
pub fn transliterate(model: &CharModel, word: &str, k: usize) -> Result<Transliterations> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let chars: Vec<char> = word.chars().collect();
    let n = chars.len();
    if n == 0 {
        return Ok(Transliterations {
            candidates: Vec::new(),
            used_identity_fallback: false,
        });
    }
    let beam = (4 * k).max(64);
    let mut used_fallback = false;
    let insertions = model.by_source.get("").cloned().unwrap_or_default();
    let mut stacks: Vec<HashMap<(String, bool), Partial>> = vec![HashMap::new(); n + 1];
    push_partial(
        &mut stacks[0],
        Partial {
            out: String::new(),
            tail: [BOW, BOW],
            score: 0.0,
            after_gap: false,
        },
    );
    let mut finals = Vec::new();
    for i in 0..=n {
        let current = std::mem::take(&mut stacks[i]);
        let mut with_insertions = current.clone();
        for p in current.values().filter(|p| !p.after_gap) {
            for (b, lp) in &insertions {
                push_partial(&mut with_insertions, advance(model, p, b, *lp, true));
            }
        }
        let hyps = ranked(with_insertions, beam);
        if i == n {
            finals = hyps;
            break;
        }
        for p in &hyps {
            for da in 1..=MAX_SEGMENT.min(n - i) {
                let a: String = chars[i..i + da].iter().collect();
                match model.by_source.get(&a) {
                    Some(opts) => {
                        for (b, lp) in opts {
                            let gap = b.is_empty();
                            if !(gap && p.after_gap) {
                                push_partial(&mut stacks[i + da], advance(model, p, b, *lp, gap));
                            }
                        }
                    }
                    None if da == 1 => {
                        used_fallback = true;
                        push_partial(
                            &mut stacks[i + 1],
                            advance(model, p, &a, IDENTITY_FALLBACK_LOGPROB, false),
                        );
                    }
                    None => {}
                }
            }
        }
    }
    let mut best: BTreeMap<String, f64> = BTreeMap::new();
    for p in finals {
        let score = p.score + model.target_lm.logprob(p.tail[0], p.tail[1], EOW);
        let slot = best.entry(p.out).or_insert(f64::NEG_INFINITY);
        if score > *slot {
            *slot = score;
        }
    }
    let mut candidates: Vec<(String, f64)> = best.into_iter().collect();
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    candidates.truncate(k);
    Ok(Transliterations {
        candidates,
        used_identity_fallback: used_fallback,
    })
}

/// Phrase table with up to `k` transliterations per word. All four features
/// carry the candidate's score normalized over the k-best list.
pub fn build_translit_table(model: &CharModel, words: &[String], k: usize) -> Result<PhraseTable> {
    let mut table = PhraseTable::new("translit", TableRole::Transliteration);
    let mut unique: Vec<&String> = words.iter().collect();
    unique.sort();
    unique.dedup();
    for word in unique {
        let result = transliterate(model, word, k)?;
        let cands: Vec<&(String, f64)> = result.candidates.iter().filter(|c| !c.0.is_empty()).collect();
        if cands.is_empty() {
            continue;
        }
        let norm = cands.iter().fold(f64::NEG_INFINITY, |acc, c| log_add(acc, c.1));
        for (target, score) in cands {
            let p = (score - norm).exp();
            table.insert(
                vec![word.clone()],
                vec![target.clone()],
                PhraseScores::uniform(p).floored(),
            );
        }
    }
    Ok(table)
}

/// Writes `src<TAB>tgt<TAB>posterior` lines.
pub fn write_mined_pairs<W: Write>(mut out: W, pairs: &[MinedPair]) -> Result<()> {
    for p in pairs {
        writeln!(out, "{}\t{}\t{}", p.source, p.target, p.posterior)?;
    }
    Ok(())
}

pub fn read_mined_pairs<R: BufRead>(reader: R) -> Result<Vec<MinedPair>> {
    let mut out = Vec::new();
    for (n, line) in read_lines(reader)?.iter().enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let posterior = match fields.as_slice() {
            [_, _, p] => p.parse::<f64>().ok().filter(|p| (0.0..=1.0).contains(p)),
            _ => None,
        };
        let Some(posterior) = posterior else {
            return Err(Error::Parse {
                format: "mined pairs",
                line: n + 1,
                message: "expected src<TAB>tgt<TAB>posterior".into(),
            });
        };
        out.push(MinedPair {
            source: fields[0].to_string(),
            target: fields[1].to_string(),
            posterior,
        });
    }
    Ok(out)
}

/// Word-pair corpus from mined-pairs TSV content, weighted by posterior.
pub fn corpus_from_mined(pairs: &[MinedPair]) -> Result<WordPairCorpus> {
    let mut corpus = WordPairCorpus::new();
    for p in pairs.iter().filter(|p| p.posterior > 0.0) {
        corpus.push(&p.source, &p.target, p.posterior)?;
    }
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn forced_ab() -> CharModel {
        CharModel::from_joint(
            [("a".to_string(), "A".to_string(), 0.5), ("b".to_string(), "B".to_string(), 0.5)],
            1.0,
            [("AB", 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn forced_mapping_is_monotone() {
        let m = forced_ab();
        let r = transliterate(&m, "ba", 1).unwrap();
        assert_eq!(r.candidates.len(), 1);
        assert_eq!(r.candidates[0].0, "BA");
        assert!(!r.used_identity_fallback);
    }

    #[test]
    fn k_above_candidate_space_returns_everything() {
        let m = CharModel::from_joint(
            [
                ("a".to_string(), "A".to_string(), 0.4),
                ("a".to_string(), "Á".to_string(), 0.1),
                ("b".to_string(), "B".to_string(), 0.5),
            ],
            1.0,
            [("AB", 1.0)],
        )
        .unwrap();
        let r = transliterate(&m, "ab", 50).unwrap();
        let outs: Vec<&str> = r.candidates.iter().map(|c| c.0.as_str()).collect();
        assert_eq!(outs, ["AB", "ÁB"]);
        assert!(r.candidates[0].1 >= r.candidates[1].1);
    }

    #[test]
    fn unseen_characters_are_copied_and_flagged() {
        let r = transliterate(&forced_ab(), "axb", 3).unwrap();
        assert_eq!(r.candidates[0].0, "AxB");
        assert!(r.used_identity_fallback);
    }

    #[test]
    fn conditional_rows_are_stochastic() {
        let m = CharModel::from_joint(
            [
                ("a".to_string(), "A".to_string(), 0.3),
                ("a".to_string(), "".to_string(), 0.1),
                ("".to_string(), "X".to_string(), 0.2),
                ("ab".to_string(), "B".to_string(), 0.4),
            ],
            0.5,
            [("AB", 1.0)],
        )
        .unwrap();
        for row in m.rows().values() {
            assert!((row.values().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!((m.joint("a", "A") - 0.3).abs() < 1e-12);
        assert!((m.conditional("a", "A") - 0.75).abs() < 1e-12);
    }

    #[test]
    fn identity_pair_is_mined() {
        let mut c = WordPairCorpus::new();
        c.push("ab", "ab", 1.0).unwrap();
        let r = mine_transliterations(&c, 10, 0.5).unwrap();
        assert!(r.posteriors[0] > 0.5);
        assert_eq!(r.mined.len(), 1);
    }

    #[test]
    fn corpus_validation_and_empty_inputs() {
        let mut c = WordPairCorpus::new();
        assert!(c.push("", "x", 1.0).is_err());
        assert!(c.push("a", "x", 0.0).is_err());
        assert!(matches!(mine_transliterations(&c, 3, 0.5), Err(Error::Empty(_))));
        let t = build_translit_table(&forced_ab(), &[], 5).unwrap();
        assert!(t.is_empty());
        assert!(transliterate(&forced_ab(), "ab", 0).is_err());
    }

    #[test]
    fn translit_table_is_normalized() {
        let m = CharModel::from_joint(
            [
                ("a".to_string(), "A".to_string(), 0.3),
                ("a".to_string(), "Á".to_string(), 0.2),
                ("b".to_string(), "B".to_string(), 0.5),
            ],
            1.0,
            [("AB", 1.0)],
        )
        .unwrap();
        let t = build_translit_table(&m, &["ab".to_string(), "ab".to_string()], 100).unwrap();
        assert_eq!(t.role, TableRole::Transliteration);
        assert_eq!(t.len(), 2);
        let mass = t.forward_mass(&["ab".to_string()]);
        assert!(mass <= 1.0 + 1e-9 && mass > 0.99);
        let sc = t.get(&["ab".to_string()], &["AB".to_string()]).unwrap();
        assert_eq!(sc.phi_tgt_given_src, sc.lex_src_given_tgt);
    }

    #[test]
    fn model_text_round_trip() {
        let m = CharModel::from_joint(
            [
                ("a".to_string(), "A".to_string(), 0.25),
                ("".to_string(), "X".to_string(), 0.25),
                ("bc".to_string(), "".to_string(), 0.5),
            ],
            0.75,
            [("AX", 2.0)],
        )
        .unwrap();
        let mut buf = Vec::new();
        m.write(&mut buf).unwrap();
        let back = CharModel::read(&buf[..]).unwrap();
        assert_eq!(back.rows(), m.rows());
        assert_eq!(back.lambda, 0.75);
        assert_eq!(back.target_lm(), m.target_lm());
        assert!(CharModel::read("seg\ta\n".as_bytes()).is_err());
    }

    #[test]
    fn mined_pairs_tsv() {
        let pairs = vec![MinedPair {
            source: "کتاب".into(),
            target: "किताब".into(),
            posterior: 0.875,
        }];
        let mut buf = Vec::new();
        write_mined_pairs(&mut buf, &pairs).unwrap();
        assert_eq!(read_mined_pairs(&buf[..]).unwrap(), pairs);
        assert!(read_mined_pairs("a\tb\t1.5\n".as_bytes()).is_err());
    }

    #[test]
    fn phrase_table_feed_uses_one_to_one_entries() {
        let mut t = PhraseTable::new("tg", TableRole::Triangulated);
        t.insert(vec!["ab".into()], vec!["AB".into()], PhraseScores::uniform(0.25));
        t.insert(vec!["ab".into(), "c".into()], vec!["ABC".into()], PhraseScores::uniform(0.5));
        let c = WordPairCorpus::from_phrase_table(&t);
        assert_eq!(c.len(), 1);
        assert_eq!(c.pairs()[0].weight, 0.25);
    }
}
