//! Text ingestion: tokenization, vocabularies, bitexts, bilingual
//! dictionaries and inter-language link extraction from wikitext.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use unicode_general_category::{get_general_category, GeneralCategory};

use crate::error::{Error, Result};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

/// Dense integer id of a word inside a [`Vocabulary`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WordId(pub u32);

impl WordId {
    pub const BOS: WordId = WordId(0);
    pub const EOS: WordId = WordId(1);
    pub const UNK: WordId = WordId(2);

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_reserved(self) -> bool {
        self.0 < 3
    }
}

/// Bijection between surface forms and [`WordId`]s. Ids 0..3 are reserved
/// for `<s>`, `</s>` and `<unk>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    ids: HashMap<String, WordId>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    pub fn new() -> Self {
        let mut vocab = Vocabulary {
            words: Vec::new(),
            ids: HashMap::new(),
        };
        for w in [BOS, EOS, UNK] {
            vocab.intern(w);
        }
        vocab
    }

    pub fn intern(&mut self, word: &str) -> WordId {
        if let Some(&id) = self.ids.get(word) {
            return id;
        }
        let id = WordId(self.words.len() as u32);
        self.words.push(word.to_string());
        self.ids.insert(word.to_string(), id);
        id
    }

    pub fn id_of(&self, word: &str) -> Option<WordId> {
        self.ids.get(word).copied()
    }

    /// Like [`Vocabulary::id_of`] but maps unknown words to `<unk>`.
    pub fn id_or_unk(&self, word: &str) -> WordId {
        self.id_of(word).unwrap_or(WordId::UNK)
    }

    pub fn word(&self, id: WordId) -> Option<&str> {
        self.words.get(id.index()).map(String::as_str)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.ids.contains_key(word)
    }

    /// Number of entries including the reserved ones.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.len() <= 3
    }

    /// Ordinary (non-reserved) words in id order.
    pub fn words(&self) -> impl Iterator<Item = (WordId, &str)> {
        self.words
            .iter()
            .enumerate()
            .skip(3)
            .map(|(i, w)| (WordId(i as u32), w.as_str()))
    }
}

/// Which characters are split off as standalone punctuation tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TokenizeScheme {
    /// Unicode general category P (all punctuation classes).
    #[default]
    Unicode,
    /// ASCII punctuation only.
    Ascii,
    /// Plain whitespace split.
    Whitespace,
}

impl FromStr for TokenizeScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unicode" => Ok(TokenizeScheme::Unicode),
            "ascii" => Ok(TokenizeScheme::Ascii),
            "whitespace" => Ok(TokenizeScheme::Whitespace),
            other => Err(Error::InvalidArgument(format!(
                "unknown tokenization scheme '{other}'"
            ))),
        }
    }
}

fn is_unicode_punctuation(c: char) -> bool {
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

impl TokenizeScheme {
    fn is_punct(self, c: char) -> bool {
        match self {
            TokenizeScheme::Unicode => is_unicode_punctuation(c),
            TokenizeScheme::Ascii => c.is_ascii_punctuation(),
            TokenizeScheme::Whitespace => false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Tokenizer {
    pub scheme: TokenizeScheme,
    pub lowercase: bool,
}

impl Tokenizer {
    pub fn new(scheme: TokenizeScheme) -> Self {
        Tokenizer {
            scheme,
            lowercase: false,
        }
    }

    pub fn tokenize(&self, line: &str) -> Vec<String> {
        let mut tokens = tokenize(line, self.scheme);
        if self.lowercase {
            for t in &mut tokens {
                *t = t.to_lowercase();
            }
        }
        tokens
    }
}

/// Splits `line` on whitespace after separating every punctuation character
/// (as selected by `scheme`) into its own token.
pub fn tokenize(line: &str, scheme: TokenizeScheme) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in line.chars() {
        if c.is_whitespace() {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
        } else if scheme.is_punct(c) {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            tokens.push(c.to_string());
        } else {
            current.push(c);
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Reads every line of `reader`, failing with the 1-based line number of the
/// first line that is not valid UTF-8. A trailing `\r` is stripped.
pub fn read_lines<R: BufRead>(mut reader: R) -> Result<Vec<String>> {
    let mut lines = Vec::new();
    let mut buf = Vec::new();
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        if buf.last() == Some(&b'\n') {
            buf.pop();
        }
        if buf.last() == Some(&b'\r') {
            buf.pop();
        }
        let line = String::from_utf8(buf.clone()).map_err(|_| Error::Encoding {
            line: lines.len() + 1,
        })?;
        lines.push(line);
    }
    Ok(lines)
}

/// Token ids plus the original surface line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub ids: Vec<WordId>,
    pub surface: String,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Where a sentence pair came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    Baseline,
    Synthetic,
    Dictionary,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Baseline => "baseline",
            Provenance::Synthetic => "synthetic",
            Provenance::Dictionary => "dictionary",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentencePair {
    pub source: Sentence,
    pub target: Sentence,
    pub provenance: Provenance,
}

/// Sentence-aligned parallel corpus with one vocabulary per side.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Bitext {
    pub source_vocab: Vocabulary,
    pub target_vocab: Vocabulary,
    pairs: Vec<SentencePair>,
}

impl Bitext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[SentencePair] {
        &self.pairs
    }

    /// Appends a pair of already tokenized sentences.
    pub fn push_tokens<S: AsRef<str>, T: AsRef<str>>(
        &mut self,
        source: &[S],
        target: &[T],
        provenance: Provenance,
    ) {
        let src_surface = join_tokens(source);
        let tgt_surface = join_tokens(target);
        self.push_with_surface(source, target, provenance, src_surface, tgt_surface);
    }

    fn push_with_surface<S: AsRef<str>, T: AsRef<str>>(
        &mut self,
        source: &[S],
        target: &[T],
        provenance: Provenance,
        src_surface: String,
        tgt_surface: String,
    ) {
        let src_ids = source
            .iter()
            .map(|w| self.source_vocab.intern(w.as_ref()))
            .collect();
        let tgt_ids = target
            .iter()
            .map(|w| self.target_vocab.intern(w.as_ref()))
            .collect();
        self.pairs.push(SentencePair {
            source: Sentence {
                ids: src_ids,
                surface: src_surface,
            },
            target: Sentence {
                ids: tgt_ids,
                surface: tgt_surface,
            },
            provenance,
        });
    }

    pub fn source_tokens(&self, index: usize) -> Vec<&str> {
        resolve(&self.source_vocab, &self.pairs[index].source)
    }

    pub fn target_tokens(&self, index: usize) -> Vec<&str> {
        resolve(&self.target_vocab, &self.pairs[index].target)
    }

    /// Source and target sides exchanged.
    pub fn swapped(&self) -> Bitext {
        Bitext {
            source_vocab: self.target_vocab.clone(),
            target_vocab: self.source_vocab.clone(),
            pairs: self
                .pairs
                .iter()
                .map(|p| SentencePair {
                    source: p.target.clone(),
                    target: p.source.clone(),
                    provenance: p.provenance,
                })
                .collect(),
        }
    }

    /// Source side as token strings, one sentence per entry.
    pub fn source_sentences(&self) -> Vec<Vec<String>> {
        (0..self.len())
            .map(|i| self.source_tokens(i).into_iter().map(str::to_string).collect())
            .collect()
    }

    pub fn target_sentences(&self) -> Vec<Vec<String>> {
        (0..self.len())
            .map(|i| self.target_tokens(i).into_iter().map(str::to_string).collect())
            .collect()
    }

    /// Builds a bitext from tokenized sentence lists of equal length.
    pub fn from_sentences(
        source: &[Vec<String>],
        target: &[Vec<String>],
        provenance: Provenance,
    ) -> Result<Bitext> {
        if source.len() != target.len() {
            return Err(Error::LineCountMismatch {
                source_lines: source.len(),
                target_lines: target.len(),
            });
        }
        let mut bitext = Bitext::new();
        for (s, t) in source.iter().zip(target) {
            bitext.push_tokens(s, t, provenance);
        }
        Ok(bitext)
    }
}

fn resolve<'a>(vocab: &'a Vocabulary, sentence: &Sentence) -> Vec<&'a str> {
    sentence
        .ids
        .iter()
        .map(|&id| vocab.word(id).unwrap_or(UNK))
        .collect()
}

fn join_tokens<S: AsRef<str>>(tokens: &[S]) -> String {
    tokens
        .iter()
        .map(AsRef::as_ref)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestReport {
    pub retained: usize,
    pub dropped: usize,
}

/// Pairs line `i` of `source_lines` with line `i` of `target_lines`, dropping
/// pairs where either side tokenizes to more than `max_len` tokens.
pub fn ingest_bitext<S: AsRef<str>, T: AsRef<str>>(
    source_lines: &[S],
    target_lines: &[T],
    max_len: usize,
    tokenizer: &Tokenizer,
) -> Result<(Bitext, IngestReport)> {
    if source_lines.len() != target_lines.len() {
        return Err(Error::LineCountMismatch {
            source_lines: source_lines.len(),
            target_lines: target_lines.len(),
        });
    }
    let mut bitext = Bitext::new();
    let mut dropped = 0;
    for (src, tgt) in source_lines.iter().zip(target_lines) {
        let (src, tgt) = (src.as_ref(), tgt.as_ref());
        let s = tokenizer.tokenize(src);
        let t = tokenizer.tokenize(tgt);
        if s.len() > max_len || t.len() > max_len {
            dropped += 1;
            continue;
        }
        bitext.push_with_surface(&s, &t, Provenance::Baseline, src.to_string(), tgt.to_string());
    }
    if dropped > 0 {
        log::info!("dropped {dropped} sentence pairs longer than {max_len} tokens");
    }
    let report = IngestReport {
        retained: bitext.len(),
        dropped,
    };
    Ok((bitext, report))
}

/// Reader-based variant of [`ingest_bitext`].
pub fn ingest_readers<R1: BufRead, R2: BufRead>(
    source: R1,
    target: R2,
    max_len: usize,
    tokenizer: &Tokenizer,
) -> Result<(Bitext, IngestReport)> {
    let src = read_lines(source)?;
    let tgt = read_lines(target)?;
    ingest_bitext(&src, &tgt, max_len, tokenizer)
}

/// Order-preserving concatenation. Vocabularies are merged into the first
/// part's vocabulary; provenance tags are kept.
pub fn concat_bitexts(parts: &[Bitext]) -> Bitext {
    let mut out = match parts.first() {
        Some(first) => first.clone(),
        None => return Bitext::new(),
    };
    for part in &parts[1..] {
        for (i, pair) in part.pairs.iter().enumerate() {
            let s = part.source_tokens(i);
            let t = part.target_tokens(i);
            out.push_with_surface(
                &s,
                &t,
                pair.provenance,
                pair.source.surface.clone(),
                pair.target.surface.clone(),
            );
        }
    }
    out
}

/// Declared dictionary sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DictSource {
    Wikipedia,
    Wiktionary,
    OmegaWiki,
    Mesh,
    BabelNet,
}

impl FromStr for DictSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wikipedia" => Ok(DictSource::Wikipedia),
            "wiktionary" => Ok(DictSource::Wiktionary),
            "omegawiki" => Ok(DictSource::OmegaWiki),
            "mesh" => Ok(DictSource::Mesh),
            "babelnet" => Ok(DictSource::BabelNet),
            _ => Err(Error::UnknownCategory(s.to_string())),
        }
    }
}

impl fmt::Display for DictSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DictSource::Wikipedia => "wikipedia",
            DictSource::Wiktionary => "wiktionary",
            DictSource::OmegaWiki => "omegawiki",
            DictSource::Mesh => "mesh",
            DictSource::BabelNet => "babelnet",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DictionaryEntry {
    pub source: Vec<String>,
    pub target: Vec<String>,
    pub provenance: DictSource,
}

impl DictionaryEntry {
    pub fn new(source: Vec<String>, target: Vec<String>, provenance: DictSource) -> Result<Self> {
        if source.is_empty() || target.is_empty() {
            return Err(Error::InvalidArgument(
                "dictionary entry with an empty side".into(),
            ));
        }
        Ok(DictionaryEntry {
            source,
            target,
            provenance,
        })
    }
}

/// Parses `source<TAB>target<TAB>provenance` lines. Blank lines are skipped.
pub fn read_dictionary_tsv<R: BufRead>(
    reader: R,
    tokenizer: &Tokenizer,
) -> Result<Vec<DictionaryEntry>> {
    let mut entries = Vec::new();
    for (n, line) in read_lines(reader)?.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let parse_err = |message: String| Error::Parse {
            format: "dictionary",
            line: n + 1,
            message,
        };
        if fields.len() != 3 {
            return Err(parse_err(format!("expected 3 fields, found {}", fields.len())));
        }
        let provenance: DictSource = fields[2]
            .trim()
            .parse()
            .map_err(|_| parse_err(format!("unknown provenance '{}'", fields[2])))?;
        let entry = DictionaryEntry::new(
            tokenizer.tokenize(fields[0]),
            tokenizer.tokenize(fields[1]),
            provenance,
        )
        .map_err(|e| parse_err(e.to_string()))?;
        entries.push(entry);
    }
    Ok(entries)
}

/// Each entry becomes one sentence pair with dictionary provenance.
pub fn dict_to_bitext(entries: &[DictionaryEntry]) -> Bitext {
    let mut bitext = Bitext::new();
    for e in entries {
        bitext.push_tokens(&e.source, &e.target, Provenance::Dictionary);
    }
    bitext
}

/// Number of tokens in `sentences` that `vocab` does not contain.
pub fn count_oov_tokens<S: AsRef<str>>(sentences: &[Vec<S>], vocab: &Vocabulary) -> usize {
    sentences
        .iter()
        .flatten()
        .filter(|w| !vocab.contains(w.as_ref()))
        .count()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WikiPage {
    pub title: String,
    pub text: String,
}

/// Splits the fixture format (`== <title>` header followed by page text)
/// into pages. Text before the first header is ignored.
pub fn parse_wiki_pages(input: &str) -> Vec<WikiPage> {
    let mut pages = Vec::new();
    let mut current: Option<WikiPage> = None;
    for line in input.lines() {
        if let Some(title) = line.strip_prefix("== ") {
            if let Some(page) = current.take() {
                pages.push(page);
            }
            current = Some(WikiPage {
                title: title.trim().to_string(),
                text: String::new(),
            });
        } else if let Some(page) = current.as_mut() {
            page.text.push_str(line);
            page.text.push('\n');
        }
    }
    pages.extend(current);
    pages
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LinkExtraction {
    pub entries: Vec<DictionaryEntry>,
    /// Link openers that could not be parsed.
    pub malformed: usize,
}

fn is_language_code(code: &str) -> bool {
    let mut parts = code.split('-');
    let head = parts.next().unwrap_or("");
    (2..=3).contains(&head.len())
        && head.bytes().all(|b| b.is_ascii_lowercase())
        && parts.all(|p| !p.is_empty() && p.bytes().all(|b| b.is_ascii_lowercase()))
}

/// Collects `[[<code>:<title>]]` inter-language links whose code equals
/// `target_lang`, as (page title, linked title) entries in first-seen order.
///
/// A `[[` with no `]]` on the same line (or another `[[` before it) is
/// malformed, as is a language link with an empty title or a title holding
/// `|`, `[` or `]`. Malformed links are counted and skipped.
pub fn extract_language_links(page: &WikiPage, target_lang: &str) -> LinkExtraction {
    let tokenizer = Tokenizer::default();
    let mut out = LinkExtraction::default();
    let mut seen = HashSet::new();
    for line in page.text.lines() {
        let mut rest = line;
        while let Some(open) = rest.find("[[") {
            let after = &rest[open + 2..];
            let close = after.find("]]");
            let reopen = after.find("[[");
            let close = match (close, reopen) {
                (Some(c), Some(r)) if r < c => None,
                (c, _) => c,
            };
            let Some(close) = close else {
                out.malformed += 1;
                rest = after;
                continue;
            };
            let inner = &after[..close];
            rest = &after[close + 2..];
            let Some((code, title)) = inner.split_once(':') else {
                continue;
            };
            if !is_language_code(code) {
                continue;
            }
            let title = title.trim();
            if title.is_empty() || title.contains(['|', '[', ']']) {
                out.malformed += 1;
                continue;
            }
            if code != target_lang || !seen.insert(title.to_string()) {
                continue;
            }
            let source = tokenizer.tokenize(&page.title);
            let target = tokenizer.tokenize(title);
            if let Ok(entry) = DictionaryEntry::new(source, target, DictSource::Wikipedia) {
                out.entries.push(entry);
            }
        }
    }
    if out.malformed > 0 {
        log::warn!(
            "page '{}': skipped {} malformed links",
            page.title,
            out.malformed
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s, TokenizeScheme::Unicode)
    }

    #[test]
    fn tokenize_examples() {
        assert!(toks("").is_empty());
        assert_eq!(toks("the cat."), ["the", "cat", "."]);
        assert_eq!(toks("घर।  (x)"), ["घर", "।", "(", "x", ")"]);
        assert_eq!(
            tokenize("a.b c", TokenizeScheme::Whitespace),
            ["a.b", "c"]
        );
        assert_eq!(tokenize("«a»", TokenizeScheme::Ascii), ["«a»"]);
    }

    #[test]
    fn lowercase_flag() {
        let t = Tokenizer {
            scheme: TokenizeScheme::Unicode,
            lowercase: true,
        };
        assert_eq!(t.tokenize("The Cat"), ["the", "cat"]);
    }

    #[test]
    fn vocabulary_reserved_ids() {
        let mut v = Vocabulary::new();
        assert_eq!(v.id_of(BOS), Some(WordId::BOS));
        assert_eq!(v.id_of(UNK), Some(WordId::UNK));
        let id = v.intern("house");
        assert!(!id.is_reserved());
        assert_eq!(v.word(id), Some("house"));
        assert_eq!(v.intern("house"), id);
        assert_eq!(v.id_or_unk("roof"), WordId::UNK);
    }

    #[test]
    fn read_lines_reports_bad_utf8() {
        let data: &[u8] = b"ok\nfine\n\xff\xfe\n";
        match read_lines(data) {
            Err(Error::Encoding { line }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ingest_examples() {
        let t = Tokenizer::default();
        let (b, r) = ingest_bitext(&["a b", "c", "d"], &["x", "y z", "w"], 80, &t).unwrap();
        assert_eq!(b.len(), 3);
        assert_eq!(r.dropped, 0);

        let long = vec!["w"; 81].join(" ");
        let (b, r) = ingest_bitext(&[long.as_str(), "a"], &["x", "y"], 80, &t).unwrap();
        assert_eq!((b.len(), r.dropped), (1, 1));

        match ingest_bitext(&["a", "b"], &["x", "y", "z"], 80, &t) {
            Err(Error::LineCountMismatch {
                source_lines,
                target_lines,
            }) => assert_eq!((source_lines, target_lines), (2, 3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn concat_preserves_order_and_provenance() {
        assert!(concat_bitexts(&[]).is_empty());
        let mut a = Bitext::new();
        for i in 0..10 {
            a.push_tokens(&[format!("s{i}")], &[format!("t{i}")], Provenance::Baseline);
        }
        let mut b = Bitext::new();
        for i in 0..5 {
            b.push_tokens(&[format!("u{i}")], &[format!("t{i}")], Provenance::Synthetic);
        }
        let c = concat_bitexts(&[a, b]);
        assert_eq!(c.len(), 15);
        assert_eq!(c.source_tokens(0), ["s0"]);
        assert_eq!(c.source_tokens(10), ["u0"]);
        assert_eq!(c.pairs()[12].provenance, Provenance::Synthetic);
        assert_eq!(c.target_tokens(14), ["t4"]);
    }

    #[test]
    fn dictionary_as_bitext() {
        assert!(dict_to_bitext(&[]).is_empty());
        let e = DictionaryEntry::new(vec!["house".into()], vec!["haus".into()], DictSource::Wiktionary)
            .unwrap();
        let b = dict_to_bitext(&[e]);
        assert_eq!(b.len(), 1);
        assert_eq!(b.source_tokens(0), ["house"]);
        assert_eq!(b.target_tokens(0), ["haus"]);
        assert_eq!(b.pairs()[0].provenance, Provenance::Dictionary);
    }

    #[test]
    fn table_one_sized_dictionary() {
        let mut entries = Vec::new();
        for (source, n) in [
            (DictSource::Wikipedia, 40_764),
            (DictSource::Wiktionary, 10_352),
            (DictSource::OmegaWiki, 3_476),
        ] {
            for i in 0..n {
                entries.push(
                    DictionaryEntry::new(vec![format!("e{i}")], vec![format!("h{i}")], source).unwrap(),
                );
            }
        }
        assert_eq!(dict_to_bitext(&entries).len(), 54_592);
    }

    #[test]
    fn dictionary_tsv() {
        let data = "house\tघर\twikipedia\n\nred cell\tलाल कोशिका\tmesh\n";
        let entries = read_dictionary_tsv(data.as_bytes(), &Tokenizer::default()).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[1].source, ["red", "cell"]);
        assert_eq!(entries[1].provenance, DictSource::Mesh);

        let bad = "house\tघर\tnewspaper\n";
        assert!(matches!(
            read_dictionary_tsv(bad.as_bytes(), &Tokenizer::default()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn language_links() {
        let page = WikiPage {
            title: "House".into(),
            text: "A house is a building. [[Roof]] [[hi:घर]] [[de:Haus]] [[hi:घर]]\n".into(),
        };
        let out = extract_language_links(&page, "hi");
        assert_eq!(out.entries.len(), 1);
        assert_eq!(out.entries[0].source, ["House"]);
        assert_eq!(out.entries[0].target, ["घर"]);
        assert_eq!(out.malformed, 0);

        let empty = WikiPage {
            title: "Empty".into(),
            text: "no links here\n".into(),
        };
        assert!(extract_language_links(&empty, "hi").entries.is_empty());

        let broken = WikiPage {
            title: "Broken".into(),
            text: "[[hi:घर [[hi:]] [[hi:a|b]] [[hi:ठीक]]\n".into(),
        };
        let out = extract_language_links(&broken, "hi");
        assert_eq!(out.entries.len(), 1);
        assert_eq!(out.malformed, 3);
    }

    #[test]
    fn wiki_page_parsing() {
        let pages = parse_wiki_pages("junk\n== House\n[[hi:घर]]\n== Cat\ntext\n");
        assert_eq!(pages.len(), 2);
        assert_eq!(pages[0].title, "House");
        assert_eq!(pages[1].text, "text\n");
    }

    #[test]
    fn oov_counter() {
        let mut v = Vocabulary::new();
        v.intern("a");
        let s = vec![vec!["a", "b"], vec!["c", "a"]];
        assert_eq!(count_oov_tokens(&s, &v), 2);
    }
}
