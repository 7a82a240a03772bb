//! Interpolated Kneser-Ney n-gram language models, stored in backoff form
//! with ARPA import and export.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::corpus::{read_lines, Vocabulary, WordId, BOS, EOS, UNK};
use crate::error::{Error, Result};

/// log10 score ARPA files use for `<s>`, which is never predicted.
pub const NEVER_PREDICTED: f64 = -99.0;

/// Anything that scores a word given its history, in log10.
pub trait LanguageModel: Send + Sync {
    fn order(&self) -> usize;

    /// log10 p(word | context). Only the last `order - 1` context words
    /// matter.
    fn score(&self, context: &[&str], word: &str) -> f64;
}

impl<T: LanguageModel + ?Sized> LanguageModel for &T {
    fn order(&self) -> usize {
        (**self).order()
    }
    fn score(&self, context: &[&str], word: &str) -> f64 {
        (**self).score(context, word)
    }
}

impl<T: LanguageModel + ?Sized> LanguageModel for Arc<T> {
    fn order(&self) -> usize {
        (**self).order()
    }
    fn score(&self, context: &[&str], word: &str) -> f64 {
        (**self).score(context, word)
    }
}

impl<T: LanguageModel + ?Sized> LanguageModel for Box<T> {
    fn order(&self) -> usize {
        (**self).order()
    }
    fn score(&self, context: &[&str], word: &str) -> f64 {
        (**self).score(context, word)
    }
}

/// log10 probability of a whole sentence, `</s>` included.
pub fn sentence_logprob<L: LanguageModel + ?Sized, S: AsRef<str>>(lm: &L, tokens: &[S]) -> f64 {
    let mut history: Vec<&str> = vec![BOS];
    let mut total = 0.0;
    for w in tokens.iter().map(AsRef::as_ref).chain(std::iter::once(EOS)) {
        total += lm.score(&history, w);
        history.push(w);
    }
    total
}

/// Per-token perplexity over a corpus (`</s>` counted as a token).
pub fn perplexity<L: LanguageModel + ?Sized, S: AsRef<str>>(lm: &L, corpus: &[Vec<S>]) -> f64 {
    let mut total = 0.0;
    let mut tokens = 0usize;
    for s in corpus {
        total += sentence_logprob(lm, s);
        tokens += s.len() + 1;
    }
    10f64.powf(-total / tokens.max(1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    logprob: f64,
    backoff: Option<f64>,
}

/// Backoff n-gram model with log10 probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    order: usize,
    vocab: Vocabulary,
    /// `grams[n - 1]` holds the n-grams.
    grams: Vec<HashMap<Vec<WordId>, Entry>>,
}

type Counts = HashMap<Vec<WordId>, u64>;

fn discount(counts: &Counts) -> f64 {
    let n1 = counts.values().filter(|&&c| c == 1).count() as f64;
    let n2 = counts.values().filter(|&&c| c == 2).count() as f64;
    if n1 == 0.0 || n2 == 0.0 {
        0.5
    } else {
        n1 / (n1 + 2.0 * n2)
    }
}

/// Trains an interpolated Kneser-Ney model with one discount per order.
///
/// Counts below the top order are continuation counts, except for n-grams
/// starting with `<s>`, which keep their raw counts.
pub fn train_kn<S: AsRef<str>>(corpus: &[Vec<S>], order: usize) -> Result<NGramModel> {
    if corpus.is_empty() {
        return Err(Error::Empty("language model corpus"));
    }
    if order == 0 {
        return Err(Error::InvalidArgument("order must be at least 1".into()));
    }
    let mut vocab = Vocabulary::new();
    let mut raw: Vec<Counts> = vec![HashMap::new(); order];
    for sentence in corpus {
        let mut padded = vec![WordId::BOS];
        padded.extend(sentence.iter().map(|w| vocab.intern(w.as_ref())));
        padded.push(WordId::EOS);
        for n in 1..=order {
            for gram in padded.windows(n) {
                if gram[n - 1] != WordId::BOS {
                    *raw[n - 1].entry(gram.to_vec()).or_insert(0) += 1;
                }
            }
        }
    }

    let mut adjusted: Vec<Counts> = Vec::with_capacity(order);
    for n in 1..=order {
        if n == order {
            adjusted.push(raw[n - 1].clone());
            continue;
        }
        let mut left: HashMap<&[WordId], u64> = HashMap::new();
        for gram in raw[n].keys() {
            *left.entry(&gram[1..]).or_insert(0) += 1;
        }
        let counts = raw[n - 1]
            .iter()
            .map(|(g, &c)| {
                let a = if g[0] == WordId::BOS { c } else { left[g.as_slice()] };
                (g.clone(), a)
            })
            .collect();
        adjusted.push(counts);
    }

    let mut model = NGramModel {
        order,
        vocab,
        grams: vec![HashMap::new(); order],
    };

    // unigrams: discounted counts plus the freed mass spread uniformly over
    // the vocabulary including <unk>
    let d1 = discount(&adjusted[0]);
    let total: f64 = adjusted[0].values().map(|&c| c as f64).sum();
    let types = adjusted[0].len() as f64;
    let unk_seen = adjusted[0].contains_key(&vec![WordId::UNK]);
    let vocab_size = types + if unk_seen { 0.0 } else { 1.0 };
    let uniform = d1 * types / total / vocab_size;
    for (g, &c) in &adjusted[0] {
        let p = (c as f64 - d1) / total + uniform;
        model.grams[0].insert(g.clone(), Entry { logprob: p.log10(), backoff: None });
    }
    if !unk_seen {
        model.grams[0].insert(
            vec![WordId::UNK],
            Entry { logprob: uniform.log10(), backoff: None },
        );
    }
    model.grams[0].insert(
        vec![WordId::BOS],
        Entry { logprob: NEVER_PREDICTED, backoff: None },
    );

    for n in 2..=order {
        let counts = &adjusted[n - 1];
        let d = discount(counts);
        let mut context_total: HashMap<&[WordId], (f64, f64)> = HashMap::new();
        for (g, &c) in counts {
            let slot = context_total.entry(&g[..n - 1]).or_insert((0.0, 0.0));
            slot.0 += c as f64;
            slot.1 += 1.0;
        }
        let mut new_entries = HashMap::with_capacity(counts.len());
        for (g, &c) in counts {
            let (denom, types) = context_total[&g[..n - 1]];
            let gamma = d * types / denom;
            let lower = 10f64.powf(model.logprob_upto(&g[1..n - 1], g[n - 1], n - 1));
            let p = (c as f64 - d) / denom + gamma * lower;
            new_entries.insert(g.clone(), Entry { logprob: p.log10(), backoff: None });
        }
        for (h, (denom, types)) in &context_total {
            let gamma = d * types / denom;
            match model.grams[n - 2].get_mut(*h) {
                Some(e) => e.backoff = Some(gamma.log10()),
                None => unreachable!("context of a counted n-gram is itself counted"),
            }
        }
        model.grams[n - 1] = new_entries;
    }
    Ok(model)
}

impl NGramModel {
    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    /// log10 probability given to words outside the vocabulary.
    pub fn unk_logprob(&self) -> f64 {
        self.grams[0]
            .get(&vec![WordId::UNK])
            .map(|e| e.logprob)
            .unwrap_or(NEVER_PREDICTED)
    }

    /// Number of stored n-grams per order.
    pub fn counts(&self) -> Vec<usize> {
        self.grams.iter().map(HashMap::len).collect()
    }

    /// Words that can be predicted: every unigram except `<s>`.
    pub fn predictable_words(&self) -> Vec<&str> {
        let mut words: Vec<&str> = self.grams[0]
            .keys()
            .filter(|g| g[0] != WordId::BOS)
            .filter_map(|g| self.vocab.word(g[0]))
            .collect();
        words.sort_unstable();
        words
    }

    /// Stored log10 probability of an exact n-gram, if present.
    pub fn stored(&self, gram: &[&str]) -> Option<f64> {
        let ids: Option<Vec<WordId>> = gram.iter().map(|w| self.vocab.id_of(w)).collect();
        let ids = ids?;
        self.grams.get(ids.len().checked_sub(1)?)?.get(&ids).map(|e| e.logprob)
    }

    /// Stored log10 backoff weight of a context, if present.
    pub fn backoff(&self, context: &[&str]) -> Option<f64> {
        let ids: Option<Vec<WordId>> = context.iter().map(|w| self.vocab.id_of(w)).collect();
        let ids = ids?;
        self.grams.get(ids.len().checked_sub(1)?)?.get(&ids)?.backoff
    }

    /// Backoff query using n-grams of order at most `max_order`.
    fn logprob_upto(&self, context: &[WordId], word: WordId, max_order: usize) -> f64 {
        let keep = context.len().min(max_order - 1);
        let context = &context[context.len() - keep..];
        let mut acc = 0.0;
        let mut gram: Vec<WordId> = Vec::with_capacity(keep + 1);
        for start in 0..=keep {
            let h = &context[start..];
            gram.clear();
            gram.extend_from_slice(h);
            gram.push(word);
            if let Some(e) = self.grams[h.len()].get(&gram) {
                return acc + e.logprob;
            }
            if !h.is_empty() {
                if let Some(bo) = self.grams[h.len() - 1].get(h).and_then(|e| e.backoff) {
                    acc += bo;
                }
            }
        }
        acc + self.unk_logprob()
    }

    pub fn logprob_ids(&self, context: &[WordId], word: WordId) -> f64 {
        let word = if self.grams[0].contains_key(&vec![word]) {
            word
        } else {
            WordId::UNK
        };
        self.logprob_upto(context, word, self.order)
    }

    pub fn write_arpa<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out)?;
        writeln!(out, "\\data\\")?;
        for (n, grams) in self.grams.iter().enumerate() {
            writeln!(out, "ngram {}={}", n + 1, grams.len())?;
        }
        for (n, grams) in self.grams.iter().enumerate() {
            writeln!(out)?;
            writeln!(out, "\\{}-grams:", n + 1)?;
            let mut rows: Vec<(Vec<&str>, &Entry)> = grams
                .iter()
                .map(|(g, e)| {
                    let words = g.iter().map(|&id| self.vocab.word(id).unwrap_or(UNK)).collect();
                    (words, e)
                })
                .collect();
            rows.sort_by(|a, b| a.0.cmp(&b.0));
            for (words, e) in rows {
                match e.backoff {
                    Some(bo) => writeln!(out, "{:.7}\t{}\t{:.7}", e.logprob, words.join(" "), bo)?,
                    None => writeln!(out, "{:.7}\t{}", e.logprob, words.join(" "))?,
                }
            }
        }
        writeln!(out)?;
        writeln!(out, "\\end\\")?;
        Ok(())
    }

    pub fn read_arpa<R: BufRead>(reader: R) -> Result<NGramModel> {
        let lines = read_lines(reader)?;
        let err = |line: usize, message: String| Error::Parse {
            format: "ARPA",
            line,
            message,
        };
        let mut iter = lines.iter().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let mut declared: Vec<usize> = Vec::new();

        let mut saw_data = false;
        for (ln, line) in iter.by_ref() {
            if line.is_empty() {
                continue;
            }
            if line == "\\data\\" {
                saw_data = true;
                break;
            }
            return Err(err(ln, format!("expected \\data\\, found '{line}'")));
        }
        if !saw_data {
            return Err(err(lines.len(), "missing \\data\\ header".into()));
        }

        let mut vocab = Vocabulary::new();
        let mut grams: Vec<HashMap<Vec<WordId>, Entry>> = Vec::new();
        let mut current: Option<usize> = None;
        let mut finished = false;
        for (ln, line) in iter {
            if line.is_empty() {
                continue;
            }
            if finished {
                return Err(err(ln, "content after \\end\\".into()));
            }
            if let Some(spec) = line.strip_prefix("ngram ") {
                if current.is_some() {
                    return Err(err(ln, "ngram count inside a section".into()));
                }
                let parsed = spec
                    .split_once('=')
                    .and_then(|(n, c)| Some((n.trim().parse::<usize>().ok()?, c.trim().parse::<usize>().ok()?)));
                match parsed {
                    Some((n, c)) if n == declared.len() + 1 => declared.push(c),
                    _ => return Err(err(ln, format!("malformed count line '{line}'"))),
                }
                continue;
            }
            if line == "\\end\\" {
                if let Some(n) = current {
                    check_count(&grams, &declared, n, ln)?;
                }
                finished = true;
                continue;
            }
            if line.starts_with('\\') {
                let n = line
                    .strip_prefix('\\')
                    .and_then(|s| s.strip_suffix("-grams:"))
                    .and_then(|s| s.parse::<usize>().ok());
                let expected = current.map_or(1, |c| c + 1);
                match n {
                    Some(n) if n == expected && n <= declared.len() => {
                        if let Some(prev) = current {
                            check_count(&grams, &declared, prev, ln)?;
                        }
                        current = Some(n);
                        grams.push(HashMap::new());
                    }
                    _ => return Err(err(ln, format!("unexpected section header '{line}'"))),
                }
                continue;
            }
            let Some(n) = current else {
                return Err(err(ln, format!("entry outside any section: '{line}'")));
            };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() < 2 || fields.len() > 3 {
                return Err(err(ln, "expected logprob<TAB>ngram[<TAB>backoff]".into()));
            }
            let logprob: f64 = fields[0]
                .trim()
                .parse()
                .map_err(|_| err(ln, format!("bad log probability '{}'", fields[0])))?;
            let backoff = match fields.get(2) {
                Some(b) => Some(
                    b.trim()
                        .parse::<f64>()
                        .map_err(|_| err(ln, format!("bad backoff '{b}'")))?,
                ),
                None => None,
            };
            let ids: Vec<WordId> = fields[1].split_whitespace().map(|w| vocab.intern(w)).collect();
            if ids.len() != n {
                return Err(err(ln, format!("expected a {n}-gram, found '{}'", fields[1])));
            }
            grams[n - 1].insert(ids, Entry { logprob, backoff });
        }
        if !finished {
            return Err(err(lines.len(), "missing \\end\\".into()));
        }
        if grams.len() != declared.len() || grams.is_empty() {
            return Err(err(lines.len(), "section count does not match header".into()));
        }
        Ok(NGramModel {
            order: grams.len(),
            vocab,
            grams,
        })
    }
}

fn check_count(
    grams: &[HashMap<Vec<WordId>, Entry>],
    declared: &[usize],
    n: usize,
    line: usize,
) -> Result<()> {
    let found = grams[n - 1].len();
    if found != declared[n - 1] {
        return Err(Error::Parse {
            format: "ARPA",
            line,
            message: format!("{n}-gram count {found} differs from declared {}", declared[n - 1]),
        });
    }
    Ok(())
}

impl LanguageModel for NGramModel {
    fn order(&self) -> usize {
        self.order
    }

    fn score(&self, context: &[&str], word: &str) -> f64 {
        let keep = context.len().min(self.order - 1);
        let ids: Vec<WordId> = context[context.len() - keep..]
            .iter()
            .map(|w| self.vocab.id_or_unk(w))
            .collect();
        self.logprob_ids(&ids, self.vocab.id_or_unk(word))
    }
}

/// Query-time linear mixture λ·p_a + (1-λ)·p_b.
#[derive(Debug, Clone)]
pub struct MixtureLm<A, B> {
    a: A,
    b: B,
    lambda: f64,
}

pub fn interpolate_lms<A: LanguageModel, B: LanguageModel>(
    a: A,
    b: B,
    lambda: f64,
) -> Result<MixtureLm<A, B>> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!("mixture weight {lambda} outside [0, 1]")));
    }
    if a.order() != b.order() {
        return Err(Error::OrderMismatch(a.order(), b.order()));
    }
    Ok(MixtureLm { a, b, lambda })
}

impl<A: LanguageModel, B: LanguageModel> LanguageModel for MixtureLm<A, B> {
    fn order(&self) -> usize {
        self.a.order()
    }

    fn score(&self, context: &[&str], word: &str) -> f64 {
        if self.lambda == 1.0 {
            return self.a.score(context, word);
        }
        if self.lambda == 0.0 {
            return self.b.score(context, word);
        }
        let pa = 10f64.powf(self.a.score(context, word));
        let pb = 10f64.powf(self.b.score(context, word));
        (self.lambda * pa + (1.0 - self.lambda) * pb).log10()
    }
}

/// Picks the mixture weight from `grid` with the lowest perplexity on `dev`.
pub fn tune_mixture_weight<A, B, S>(a: &A, b: &B, dev: &[Vec<S>], grid: &[f64]) -> Result<f64>
where
    A: LanguageModel,
    B: LanguageModel,
    S: AsRef<str>,
{
    let mut best: Option<(f64, f64)> = None;
    for &lambda in grid {
        let mix = interpolate_lms(a, b, lambda)?;
        let ppl = perplexity(&mix, dev);
        if best.is_none_or(|(_, p)| ppl < p) {
            best = Some((lambda, ppl));
        }
    }
    best.map(|(l, _)| l).ok_or(Error::Empty("mixture weight grid"))
}

/// Distinct contexts (as words) stored in the model, for audits.
pub fn stored_contexts(model: &NGramModel) -> Vec<Vec<String>> {
    let mut out = BTreeSet::new();
    for grams in &model.grams[..model.order.saturating_sub(1)] {
        for (g, e) in grams {
            if e.backoff.is_some() {
                out.insert(
                    g.iter()
                        .map(|&id| model.vocab.word(id).unwrap_or(UNK).to_string())
                        .collect::<Vec<_>>(),
                );
            }
        }
    }
    out.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(lines: &[&str]) -> Vec<Vec<String>> {
        lines
            .iter()
            .map(|l| l.split_whitespace().map(String::from).collect())
            .collect()
    }

    fn total_mass(m: &NGramModel, ctx: &[&str]) -> f64 {
        m.predictable_words()
            .iter()
            .map(|w| 10f64.powf(m.score(ctx, w)))
            .sum()
    }

    #[test]
    fn single_word_language() {
        let m = train_kn(&corpus(&["a a a", "a a a"]), 1).unwrap();
        let pa = 10f64.powf(m.score(&[], "a"));
        let punk = 10f64.powf(m.score(&[], "zzz"));
        assert!(punk > 0.0);
        assert!(pa > 0.5);
        assert!((total_mass(&m, &[]) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn normalized_in_every_context() {
        let m = train_kn(
            &corpus(&["the cat sat", "the dog sat", "a cat ran", "the cat ran fast"]),
            3,
        )
        .unwrap();
        for ctx in [&[][..], &["the"], &["the", "cat"], &["<s>"], &["zzz", "cat"], &["dog", "dog"]] {
            assert!((total_mass(&m, ctx) - 1.0).abs() < 1e-9, "{ctx:?}");
        }
    }

    #[test]
    fn context_truncation() {
        let m = train_kn(&corpus(&["a b c d", "b c d a"]), 2).unwrap();
        assert_eq!(m.score(&["a", "b", "c"], "d"), m.score(&["c"], "d"));
        let stored = m.stored(&["c", "d"]).unwrap();
        assert_eq!(m.score(&["c"], "d"), stored);
    }

    #[test]
    fn errors() {
        let empty: Vec<Vec<String>> = vec![];
        assert!(train_kn(&empty, 3).is_err());
        assert!(train_kn(&corpus(&["a"]), 0).is_err());
        let a = train_kn(&corpus(&["a b"]), 2).unwrap();
        let b = train_kn(&corpus(&["a b"]), 3).unwrap();
        assert!(matches!(interpolate_lms(&a, &b, 0.5), Err(Error::OrderMismatch(2, 3))));
        assert!(interpolate_lms(&a, &a, 1.5).is_err());
    }

    #[test]
    fn order_above_sentence_length_is_allowed() {
        let m = train_kn(&corpus(&["a b", "b a"]), 5).unwrap();
        assert!((total_mass(&m, &["a", "b", "a", "b"]) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_mixtures() {
        let a = train_kn(&corpus(&["a b c", "c b a"]), 2).unwrap();
        let b = train_kn(&corpus(&["a a b", "b c c"]), 2).unwrap();
        let only_a = interpolate_lms(&a, &b, 1.0).unwrap();
        let same = interpolate_lms(&a, &a, 0.5).unwrap();
        for (ctx, w) in [(&["a"][..], "b"), (&["c"], "zz"), (&[], "c")] {
            assert_eq!(only_a.score(ctx, w), a.score(ctx, w));
            assert!((same.score(ctx, w) - a.score(ctx, w)).abs() < 1e-12);
        }
        let l = tune_mixture_weight(&a, &b, &corpus(&["c b a"]), &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(l, 1.0);
        let l = tune_mixture_weight(&a, &b, &corpus(&["b c c"]), &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(l, 0.0);
    }

    #[test]
    fn minimal_arpa() {
        let m = train_kn(&corpus(&["a"]), 1).unwrap();
        let mut buf = Vec::new();
        m.write_arpa(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("\\data\\\nngram 1=4\n"));
        assert!(text.trim_end().ends_with("\\end\\"));
        let back = NGramModel::read_arpa(&buf[..]).unwrap();
        assert_eq!(back.order(), 1);
        assert!((back.score(&[], "a") - m.score(&[], "a")).abs() < 1e-6);
    }

    #[test]
    fn hand_written_arpa() {
        let arpa = "\\data\\\nngram 1=4\nngram 2=2\n\n\\1-grams:\n-99\t<s>\t-0.5\n-0.7\ta\t-0.25\n\
                    -0.4\tb\n-1.5\t<unk>\n\n\\2-grams:\n-0.3\t<s> a\n-0.1\ta b\n\n\\end\\\n";
        let m = NGramModel::read_arpa(arpa.as_bytes()).unwrap();
        assert_eq!(m.score(&["<s>"], "a"), -0.3);
        assert_eq!(m.score(&["a"], "b"), -0.1);
        assert_eq!(m.score(&["a"], "a"), -0.25 + -0.7);
        assert_eq!(m.score(&["b"], "a"), -0.7);
        assert_eq!(m.score(&["a"], "qq"), -0.25 + -1.5);
    }

    #[test]
    fn malformed_arpa() {
        let missing_data = "ngram 1=1\n";
        assert!(matches!(
            NGramModel::read_arpa(missing_data.as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
        let count = "\\data\\\nngram 1=2\n\n\\1-grams:\n-0.1\ta\n\n\\end\\\n";
        assert!(matches!(
            NGramModel::read_arpa(count.as_bytes()),
            Err(Error::Parse { line: 7, .. })
        ));
        let header = "\\data\\\nngram 1=1\n\n\\2-grams:\n-0.1\ta b\n\\end\\\n";
        assert!(matches!(
            NGramModel::read_arpa(header.as_bytes()),
            Err(Error::Parse { line: 4, .. })
        ));
    }
}
