//! Independent reference implementations used by the integration tests and
//! the acceptance gate. None of them call into the code under test except to
//! read its inputs.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use pivotmt::decoder::{LogLinearModel, OptionLattice, OptionOrigin, TranslationOption};
use pivotmt::ngramlm::{train_kn, NGramModel};
use pivotmt::ngramlm::LanguageModel;
use pivotmt::phrasetab::{PhraseScores, PhraseTable, TableRole};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Corpus = Vec<(Vec<String>, Vec<String>)>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

// ---------------------------------------------------------------- Model 1

/// Random toy parallel corpus over small vocabularies.
pub fn random_corpus(rng: &mut ChaCha8Rng, pairs: usize, max_len: usize) -> Corpus {
    let src: Vec<String> = (0..6).map(|i| format!("s{i}")).collect();
    let tgt: Vec<String> = (0..6).map(|i| format!("t{i}")).collect();
    (0..pairs)
        .map(|_| {
            let n = rng.gen_range(1..=max_len);
            let m = rng.gen_range(1..=max_len);
            let s = (0..n).map(|_| src.choose(rng).unwrap().clone()).collect();
            let t = (0..m).map(|_| tgt.choose(rng).unwrap().clone()).collect();
            (s, t)
        })
        .collect()
}

/// t(f | e) keyed by (e, f); `None` is the NULL word.
pub type TTable = HashMap<(Option<String>, String), f64>;

/// Plain textbook Model 1 EM over strings.
pub fn brute_force_model1(corpus: &Corpus, iterations: usize, use_null: bool) -> TTable {
    let mut t: TTable = HashMap::new();
    for (s, f) in corpus {
        for fw in f {
            for e in s {
                t.insert((Some(e.clone()), fw.clone()), 1.0);
            }
            if use_null {
                t.insert((None, fw.clone()), 1.0);
            }
        }
    }
    for _ in 0..iterations {
        let mut count: TTable = HashMap::new();
        let mut total: HashMap<Option<String>, f64> = HashMap::new();
        for (s, f) in corpus {
            if s.is_empty() || f.is_empty() {
                continue;
            }
            let mut cond: Vec<Option<String>> = s.iter().cloned().map(Some).collect();
            if use_null {
                cond.push(None);
            }
            for fw in f {
                let z: f64 = cond.iter().map(|e| t[&(e.clone(), fw.clone())]).sum();
                for e in &cond {
                    let c = t[&(e.clone(), fw.clone())] / z;
                    *count.entry((e.clone(), fw.clone())).or_insert(0.0) += c;
                    *total.entry(e.clone()).or_insert(0.0) += c;
                }
            }
        }
        for (k, v) in t.iter_mut() {
            *v = count.get(k).copied().unwrap_or(0.0) / total[&k.0];
        }
    }
    t
}

// ---------------------------------------------------------------- GDFA / extraction

pub type Links = BTreeSet<(usize, usize)>;

pub fn random_links(rng: &mut ChaCha8Rng, n: usize, m: usize, density: f64) -> Links {
    let mut out = BTreeSet::new();
    for i in 0..n {
        for j in 0..m {
            if rng.gen_bool(density) {
                out.insert((i, j));
            }
        }
    }
    out
}

/// Every box whose links stay inside it, holding at least one link, with
/// both target edges aligned. Source edges may be unaligned.
pub fn brute_force_extract(links: &Links, n: usize, m: usize, max_len: usize) -> BTreeSet<((usize, usize), (usize, usize))> {
    let aligned_t: BTreeSet<usize> = links.iter().map(|l| l.1).collect();
    let mut out = BTreeSet::new();
    for s0 in 0..n {
        for s1 in s0..n {
            for t0 in 0..m {
                for t1 in t0..m {
                    if s1 - s0 + 1 > max_len || t1 - t0 + 1 > max_len {
                        continue;
                    }
                    if !aligned_t.contains(&t0) || !aligned_t.contains(&t1) {
                        continue;
                    }
                    let mut inside = 0;
                    let mut ok = true;
                    for &(i, j) in links {
                        let si = (s0..=s1).contains(&i);
                        let tj = (t0..=t1).contains(&j);
                        if si != tj {
                            ok = false;
                            break;
                        }
                        if si {
                            inside += 1;
                        }
                    }
                    if ok && inside > 0 {
                        out.insert(((s0, s1), (t0, t1)));
                    }
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------- Kneser-Ney

/// Interpolated Kneser-Ney written directly from the recursive definition.
pub struct KnOracle {
    order: usize,
    /// Adjusted counts per order (index n-1).
    counts: Vec<HashMap<Vec<String>, f64>>,
    discounts: Vec<f64>,
    vocab_size: f64,
}

impl KnOracle {
    pub fn train(corpus: &[Vec<String>], order: usize) -> KnOracle {
        let mut raw: Vec<HashMap<Vec<String>, f64>> = vec![HashMap::new(); order + 1];
        for s in corpus {
            let mut padded = vec!["<s>".to_string()];
            padded.extend(s.iter().cloned());
            padded.push("</s>".to_string());
            for n in 1..=order {
                for g in padded.windows(n) {
                    if g[n - 1] != "<s>" {
                        *raw[n - 1].entry(g.to_vec()).or_insert(0.0) += 1.0;
                    }
                }
            }
        }
        let mut counts = Vec::new();
        for n in 1..=order {
            if n == order {
                counts.push(raw[n - 1].clone());
                continue;
            }
            let mut adj = HashMap::new();
            for (g, &c) in &raw[n - 1] {
                let v = if g[0] == "<s>" {
                    c
                } else {
                    raw[n].keys().filter(|h| h[1..] == g[..]).count() as f64
                };
                adj.insert(g.clone(), v);
            }
            counts.push(adj);
        }
        let discounts = counts
            .iter()
            .map(|c| {
                let n1 = c.values().filter(|&&v| v == 1.0).count() as f64;
                let n2 = c.values().filter(|&&v| v == 2.0).count() as f64;
                if n1 == 0.0 || n2 == 0.0 {
                    0.5
                } else {
                    n1 / (n1 + 2.0 * n2)
                }
            })
            .collect();
        let types = counts[0].len() as f64;
        let unk_seen = counts[0].contains_key(&vec!["<unk>".to_string()]);
        KnOracle {
            order,
            counts,
            discounts,
            vocab_size: types + if unk_seen { 0.0 } else { 1.0 },
        }
    }

    fn p(&self, n: usize, ctx: &[String], w: &str) -> f64 {
        if n == 1 {
            let c = &self.counts[0];
            let total: f64 = c.values().sum();
            let d = self.discounts[0];
            let cw = c.get(&vec![w.to_string()]).copied().unwrap_or(0.0);
            let known = cw > 0.0;
            let own = if known { (cw - d) / total } else { 0.0 };
            return own + d * c.len() as f64 / total / self.vocab_size;
        }
        let h = &ctx[ctx.len() - (n - 1)..];
        let c = &self.counts[n - 1];
        let d = self.discounts[n - 1];
        let mut denom = 0.0;
        let mut types = 0.0;
        let mut cw = 0.0;
        for (g, &v) in c {
            if g[..n - 1] == *h {
                denom += v;
                types += 1.0;
                if g[n - 1] == w {
                    cw = v;
                }
            }
        }
        let lower = self.p(n - 1, ctx, w);
        if denom == 0.0 {
            return lower;
        }
        (cw - d).max(0.0) / denom + d * types / denom * lower
    }

    /// log10 p(w | context).
    pub fn logprob(&self, context: &[String], w: &str) -> f64 {
        let known = self.counts[0].contains_key(&vec![w.to_string()]);
        let w = if known { w } else { "<unk>" };
        let keep = context.len().min(self.order - 1);
        let ctx = &context[context.len() - keep..];
        self.p(keep + 1, ctx, w).log10()
    }

    pub fn sentence_logprob(&self, sentence: &[String]) -> f64 {
        let mut hist = vec!["<s>".to_string()];
        let mut total = 0.0;
        for w in sentence.iter().cloned().chain(std::iter::once("</s>".to_string())) {
            total += self.logprob(&hist, &w);
            hist.push(w);
        }
        total
    }
}

/// About 100 tokens over a ten-word vocabulary.
pub fn kn_fixture() -> Vec<Vec<String>> {
    let vocab = ["the", "cat", "dog", "sat", "ran", "on", "mat", "a", "rug", "fast"];
    let mut r = rng(100);
    let mut out = Vec::new();
    let mut tokens = 0;
    while tokens < 100 {
        let len = r.gen_range(3..=7).min(100 - tokens);
        let s: Vec<String> = (0..len).map(|_| vocab.choose(&mut r).unwrap().to_string()).collect();
        tokens += s.len();
        out.push(s);
    }
    out
}

// ---------------------------------------------------------------- triangulation

pub fn random_table(rng: &mut ChaCha8Rng, name: &str, src_alpha: &[&str], tgt_alpha: &[&str], max_entries: usize) -> PhraseTable {
    let phrase = |rng: &mut ChaCha8Rng, alpha: &[&str]| -> Vec<String> {
        (0..rng.gen_range(1..=2)).map(|_| alpha.choose(rng).unwrap().to_string()).collect()
    };
    let mut raw: BTreeMap<Vec<String>, BTreeMap<Vec<String>, [f64; 4]>> = BTreeMap::new();
    let entries = rng.gen_range(1..=max_entries);
    for _ in 0..entries {
        let s = phrase(rng, src_alpha);
        let t = phrase(rng, tgt_alpha);
        let f = [rng.gen_range(0.01..1.0), rng.gen_range(0.01..1.0), rng.gen_range(0.01..1.0), rng.gen_range(0.01..1.0)];
        raw.entry(s).or_default().insert(t, f);
    }
    let mut table = PhraseTable::new(name, TableRole::Other);
    for (s, targets) in raw {
        let mass: f64 = targets.values().map(|f| f[0]).sum();
        for (t, mut f) in targets {
            f[0] /= mass;
            table.insert(s.clone(), t, PhraseScores::from_array(f));
        }
    }
    table
}

/// Σ_p over every entry pair of the two tables, written as an explicit
/// double loop.
pub fn double_sum(a: &PhraseTable, b: &PhraseTable) -> BTreeMap<(Vec<String>, Vec<String>), [f64; 4]> {
    let mut out: BTreeMap<(Vec<String>, Vec<String>), [f64; 4]> = BTreeMap::new();
    for (s, p, f1) in a.iter() {
        for (p2, t, f2) in b.iter() {
            if p != p2 {
                continue;
            }
            let slot = out.entry((s.clone(), t.clone())).or_insert([0.0; 4]);
            let (x, y) = (f1.to_array(), f2.to_array());
            for k in 0..4 {
                slot[k] += x[k] * y[k];
            }
        }
    }
    out
}

// ---------------------------------------------------------------- decoder

/// One complete derivation found by enumeration.
#[derive(Debug, Clone)]
pub struct Enumerated {
    pub target: Vec<String>,
    pub score: f64,
    pub options: Vec<usize>,
}

/// Every ordered sequence of options that covers each source position once
/// with all jumps within `distortion_limit`, scored from scratch.
pub fn enumerate_derivations(
    lattice: &OptionLattice,
    model: &LogLinearModel,
    lm: &dyn LanguageModel,
    distortion_limit: usize,
) -> Vec<Enumerated> {
    let n = lattice.source.len();
    let mut out = Vec::new();
    let mut seq = Vec::new();
    let mut covered = vec![false; n];
    walk(lattice, distortion_limit, &mut covered, 0, &mut seq, &mut |seq: &[usize]| {
        out.push(score_sequence(lattice, model, lm, seq));
    });
    out
}

fn walk(
    lattice: &OptionLattice,
    limit: usize,
    covered: &mut Vec<bool>,
    last_end: usize,
    seq: &mut Vec<usize>,
    emit: &mut dyn FnMut(&[usize]),
) {
    if covered.iter().all(|&c| c) {
        emit(seq);
        return;
    }
    for (k, o) in lattice.options.iter().enumerate() {
        if (o.start..o.end).any(|i| covered[i]) || o.start.abs_diff(last_end) > limit {
            continue;
        }
        (o.start..o.end).for_each(|i| covered[i] = true);
        seq.push(k);
        walk(lattice, limit, covered, o.end, seq, emit);
        seq.pop();
        (o.start..o.end).for_each(|i| covered[i] = false);
    }
}

pub fn score_sequence(lattice: &OptionLattice, model: &LogLinearModel, lm: &dyn LanguageModel, seq: &[usize]) -> Enumerated {
    let w = model.weights();
    let mut score = 0.0;
    let mut target: Vec<String> = Vec::new();
    let mut last_end = 0usize;
    for &k in seq {
        let o = &lattice.options[k];
        score += o.features.iter().zip(w).map(|(f, w)| f * w).sum::<f64>();
        score -= w[model.distortion_index()] * o.start.abs_diff(last_end) as f64;
        last_end = o.end;
        target.extend(o.target.iter().cloned());
    }
    let mut hist: Vec<&str> = vec!["<s>"];
    let mut lm_total = 0.0;
    for word in target.iter().map(String::as_str).chain(std::iter::once("</s>")) {
        lm_total += lm.score(&hist, word);
        hist.push(word);
    }
    score += w[model.lm_index()] * lm_total * std::f64::consts::LN_10;
    Enumerated {
        target,
        score,
        options: seq.to_vec(),
    }
}

// ---------------------------------------------------------------- transliteration

pub struct TranslitFixture {
    /// (source, target, is_transliteration)
    pub pairs: Vec<(String, String, bool)>,
    pub held_out: Vec<(String, String)>,
    pub map: BTreeMap<char, char>,
}

/// 20-letter source alphabet mapped by a fixed random bijection onto a
/// 20-letter target alphabet, mixed with unrelated random pairs.
pub fn translit_fixture(seed: u64, true_pairs: usize, noise_pairs: usize, held_out: usize) -> TranslitFixture {
    let mut r = rng(seed);
    let src: Vec<char> = ('a'..='t').collect();
    let mut tgt: Vec<char> = ('\u{0430}'..='\u{0443}').collect();
    tgt.shuffle(&mut r);
    let map: BTreeMap<char, char> = src.iter().copied().zip(tgt.iter().copied()).collect();
    let word = |r: &mut ChaCha8Rng, alpha: &[char]| -> String {
        let len = r.gen_range(3..=7);
        (0..len).map(|_| *alpha.choose(r).unwrap()).collect()
    };
    let image = |w: &str| -> String { w.chars().map(|c| map[&c]).collect() };
    let mut seen = BTreeSet::new();
    let mut pairs = Vec::new();
    while pairs.len() < true_pairs {
        let w = word(&mut r, &src);
        if seen.insert(w.clone()) {
            pairs.push((w.clone(), image(&w), true));
        }
    }
    let mut noise = 0;
    while noise < noise_pairs {
        let w = word(&mut r, &src);
        if seen.insert(w.clone()) {
            pairs.push((w, word(&mut r, &tgt), false));
            noise += 1;
        }
    }
    pairs.shuffle(&mut r);
    let mut held = Vec::new();
    while held.len() < held_out {
        let w = word(&mut r, &src);
        if seen.insert(w.clone()) {
            held.push((w.clone(), image(&w)));
        }
    }
    TranslitFixture {
        pairs,
        held_out: held,
        map,
    }
}

// ---------------------------------------------------------------- decoder instances

/// Random decoding problem: at most 4 source words and 10 options.
const DECODER_TGT: [&str; 5] = ["x", "y", "z", "u", "v"];

pub struct Instance {
    pub lattice: OptionLattice,
    pub model: LogLinearModel,
    pub lm: NGramModel,
    pub limit: usize,
}

pub fn random_instance(r: &mut ChaCha8Rng) -> Instance {
    let n = r.gen_range(1..=4);
    let source: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
    let mut model = LogLinearModel::new(1).unwrap();
    let weights: Vec<f64> = (0..model.len())
        .map(|k| {
            if k == model.lm_index() || k == model.distortion_index() {
                r.gen_range(0.05..1.0)
            } else {
                r.gen_range(-1.0..1.0)
            }
        })
        .collect();
    model.set_weights(&weights).unwrap();

    let mut spans: Vec<(usize, usize)> = (0..n).map(|i| (i, i + 1)).collect();
    let extra = r.gen_range(0..=10 - n);
    for _ in 0..extra {
        let s = r.gen_range(0..n);
        let e = r.gen_range(s + 1..=n);
        spans.push((s, e));
    }
    let options = spans
        .into_iter()
        .map(|(start, end)| {
            let len = r.gen_range(1..=2);
            let target: Vec<String> = (0..len).map(|_| DECODER_TGT.choose(r).unwrap().to_string()).collect();
            let mut features = vec![0.0; model.len()];
            for k in 0..4 {
                features[model.tm_index(0, k)] = r.gen_range(-4.0..0.0);
            }
            features[model.word_penalty_index()] = -(target.len() as f64);
            features[model.phrase_penalty_index()] = -1.0;
            TranslationOption {
                start,
                end,
                target,
                features,
                origin: OptionOrigin::Tables(vec![0]),
            }
        })
        .collect();
    let lattice = OptionLattice::from_options(source, options, &model).unwrap();

    let corpus: Vec<Vec<String>> = (0..15)
        .map(|_| (0..r.gen_range(1..=5)).map(|_| DECODER_TGT.choose(r).unwrap().to_string()).collect())
        .collect();
    let lm = train_kn(&corpus, r.gen_range(1..=3)).unwrap();
    Instance {
        lattice,
        model,
        lm,
        limit: r.gen_range(0..=3),
    }
}
