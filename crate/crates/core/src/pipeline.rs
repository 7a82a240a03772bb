//! End-to-end experiments: build a related-language→source system from a
//! triangulated and a transliteration table, synthesize a source–target
//! bitext with it, and compare B_0 / +Syn / +PT / +Dict systems in both
//! directions.
//!
//! Corpus roles in a config:
//! - `baseline`: source–target training bitext (e.g. hi–en)
//! - `related`: related-language–target bitext to synthesize from (ur–en)
//! - `bridge`: small related-language–source bitext (ur–hi)
//! - `dev`, `test`: source–target tuning and test sets
//! - `mono`: extra monolingual LM data per language
//! - `dictionary`: source–target term pairs

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::align::align_bitext;
use crate::corpus::{
    concat_bitexts, count_oov_tokens, dict_to_bitext, ingest_readers, read_dictionary_tsv, Bitext, DictSource,
    DictionaryEntry, Provenance, TokenizeScheme, Tokenizer,
};
use crate::decoder::{tune_weights, DecoderConfig, LogLinearModel, TranslationSystem, TuneConfig};
use crate::error::{Error, Result};
use crate::evalkit::{corpus_bleu, delta_report, format_delta, render_text_table, render_tsv, DEFAULT_MAX_N};
use crate::ngramlm::{train_kn, LanguageModel, NGramModel};
use crate::phrasetab::{score_phrase_table, PhraseTable};
use crate::pivot::{combine_tables, triangulate, CombineMode, TriangulationConfig};
use crate::translit::{build_translit_table, mine_transliterations, write_mined_pairs, WordPairCorpus};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthMode {
    Both,
    Concat,
    Separate,
    Off,
}

impl FromStr for SynthMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "both" => Ok(SynthMode::Both),
            "concat" => Ok(SynthMode::Concat),
            "separate" => Ok(SynthMode::Separate),
            "off" => Ok(SynthMode::Off),
            _ => Err(Error::Config(format!("use_synth must be both|concat|separate|off, got '{s}'"))),
        }
    }
}

fn parse_switch(key: &str, v: &str) -> Result<bool> {
    match v {
        "on" | "true" | "yes" => Ok(true),
        "off" | "false" | "no" => Ok(false),
        _ => Err(Error::Config(format!("{key} must be on|off, got '{v}'"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Directory relative paths are resolved against.
    pub base_dir: PathBuf,
    pub work_dir: PathBuf,
    pub seed: u64,
    pub source_lang: String,
    pub target_lang: String,
    pub related_lang: String,
    /// Corpus paths by key, e.g. `baseline.src`.
    pub paths: BTreeMap<String, PathBuf>,
    pub use_synth: SynthMode,
    pub use_dict: bool,
    pub retune: bool,
    pub max_sentence_len: usize,
    pub model1_iterations: usize,
    pub max_phrase_len: usize,
    pub lm_order: usize,
    pub decoder: DecoderConfig,
    pub translit_table_k: usize,
    pub mining_iterations: usize,
    pub mining_threshold: f64,
    pub triangulation: TriangulationConfig,
    pub tune_rounds: usize,
    pub tune_nbest: usize,
    /// Exact config text, hashed into the manifest.
    pub text: String,
}

const REQUIRED_PATHS: [&str; 6] = [
    "baseline.src",
    "baseline.tgt",
    "dev.src",
    "dev.tgt",
    "test.src",
    "test.tgt",
];
const SYNTH_PATHS: [&str; 4] = ["related.rel", "related.tgt", "bridge.rel", "bridge.src"];
const OPTIONAL_PATHS: [&str; 4] = ["mono.src", "mono.tgt", "bridge_dev.rel", "bridge_dev.src"];

impl ExperimentConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg = ExperimentConfig {
            base_dir: base_dir.to_path_buf(),
            work_dir: base_dir.join("work"),
            seed: 1,
            source_lang: "hi".into(),
            target_lang: "en".into(),
            related_lang: "ur".into(),
            paths: BTreeMap::new(),
            use_synth: SynthMode::Both,
            use_dict: true,
            retune: true,
            max_sentence_len: 80,
            model1_iterations: 5,
            max_phrase_len: 4,
            lm_order: 3,
            decoder: DecoderConfig {
                option_limit: 20,
                ..DecoderConfig::default()
            },
            translit_table_k: 10,
            mining_iterations: 10,
            mining_threshold: 0.5,
            triangulation: TriangulationConfig::default(),
            tune_rounds: 2,
            tune_nbest: 20,
            text: text.to_string(),
        };
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    format: "config",
                    line: n + 1,
                    message: format!("expected key = value, got '{line}'"),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            cfg.set(key, value).map_err(|e| Error::Parse {
                format: "config",
                line: n + 1,
                message: e.to_string(),
            })?;
        }
        cfg.triangulation.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingInput(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("bad value '{v}' for {key}")))
        }
        match key {
            "seed" => self.seed = num(key, value)?,
            "work_dir" => self.work_dir = self.base_dir.join(value),
            "lang.src" => self.source_lang = value.to_string(),
            "lang.tgt" => self.target_lang = value.to_string(),
            "lang.rel" => self.related_lang = value.to_string(),
            "use_synth" => self.use_synth = value.parse()?,
            "use_dict" => self.use_dict = parse_switch(key, value)?,
            "retune" => self.retune = parse_switch(key, value)?,
            "max_sentence_len" => self.max_sentence_len = num(key, value)?,
            "model1_iterations" => self.model1_iterations = num(key, value)?,
            "max_phrase_len" => self.max_phrase_len = num(key, value)?,
            "lm_order" => self.lm_order = num(key, value)?,
            "distortion_limit" => self.decoder.distortion_limit = num(key, value)?,
            "stack_size" => self.decoder.stack_size = num(key, value)?,
            "option_limit" => self.decoder.option_limit = num(key, value)?,
            "translit_k" => self.decoder.translit_k = num(key, value)?,
            "translit_table_k" => self.translit_table_k = num(key, value)?,
            "mining_iterations" => self.mining_iterations = num(key, value)?,
            "mining_threshold" => self.mining_threshold = num(key, value)?,
            "triangulation_min_score" => self.triangulation.min_score = num(key, value)?,
            "triangulation_top_k" => self.triangulation.top_k = num(key, value)?,
            "tune_rounds" => self.tune_rounds = num(key, value)?,
            "tune_nbest" => self.tune_nbest = num(key, value)?,
            k if REQUIRED_PATHS.contains(&k)
                || SYNTH_PATHS.contains(&k)
                || OPTIONAL_PATHS.contains(&k)
                || k == "dictionary" =>
            {
                self.paths.insert(k.to_string(), self.base_dir.join(value));
            }
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn path(&self, key: &str) -> Option<&Path> {
        self.paths.get(key).map(PathBuf::as_path)
    }

    /// Every input the configured modes need must be declared and exist.
    pub fn check_inputs(&self) -> Result<()> {
        let mut needed: Vec<&str> = REQUIRED_PATHS.to_vec();
        if self.use_synth != SynthMode::Off {
            needed.extend(SYNTH_PATHS);
        }
        if self.use_dict {
            needed.push("dictionary");
        }
        for key in needed {
            match self.path(key) {
                None => return Err(Error::Config(format!("missing path for '{key}'"))),
                Some(p) if !p.is_file() => return Err(Error::MissingInput(p.to_path_buf())),
                _ => {}
            }
        }
        for key in OPTIONAL_PATHS {
            if let Some(p) = self.path(key) {
                if !p.is_file() {
                    return Err(Error::MissingInput(p.to_path_buf()));
                }
            }
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.text.as_bytes()))
    }
}

fn tokenizer() -> Tokenizer {
    Tokenizer::new(TokenizeScheme::Unicode)
}

fn load_bitext(cfg: &ExperimentConfig, src_key: &str, tgt_key: &str) -> Result<Bitext> {
    let open = |key: &str| -> Result<BufReader<fs::File>> {
        let p = cfg.path(key).ok_or_else(|| Error::Config(format!("missing path for '{key}'")))?;
        Ok(BufReader::new(fs::File::open(p)?))
    };
    let (bitext, report) = ingest_readers(open(src_key)?, open(tgt_key)?, cfg.max_sentence_len, &tokenizer())?;
    if report.dropped > 0 {
        log::warn!("{src_key}: dropped {} over-long pairs", report.dropped);
    }
    Ok(bitext)
}

fn load_mono(cfg: &ExperimentConfig, key: &str) -> Result<Vec<Vec<String>>> {
    let Some(p) = cfg.path(key) else {
        return Ok(Vec::new());
    };
    let text = fs::read_to_string(p)?;
    let tok = tokenizer();
    Ok(text.lines().map(|l| tok.tokenize(l)).filter(|s| !s.is_empty()).collect())
}

/// Aligns a bitext and scores its phrase table.
pub fn train_table(bitext: &Bitext, iterations: usize, max_phrase_len: usize, name: &str) -> Result<PhraseTable> {
    let aligned = align_bitext(bitext, iterations, true)?;
    let mut table = score_phrase_table(
        bitext,
        &aligned.alignments,
        &aligned.forward,
        &aligned.backward,
        max_phrase_len,
    )?;
    table.name = name.to_string();
    Ok(table)
}

/// Replaces the source side of every pair with its translation. Pairs the
/// system fails on are dropped with a warning.
pub fn synthesize_bitext(related: &Bitext, system: &TranslationSystem) -> Result<Bitext> {
    let sources = related.source_sentences();
    let targets = related.target_sentences();
    let translated: Vec<Result<Vec<String>>> = {
        use rayon::prelude::*;
        sources.par_iter().map(|s| system.translate(s)).collect()
    };
    let mut out = Bitext::new();
    for (k, (hyp, tgt)) in translated.into_iter().zip(targets).enumerate() {
        match hyp {
            Ok(h) => out.push_tokens(&h, &tgt, Provenance::Synthetic),
            Err(e) => log::warn!("synthesis dropped pair {k}: {e}"),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Mode {
    Baseline,
    Syn,
    Pt,
    Dict,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Baseline => "B_0",
            Mode::Syn => "+Syn",
            Mode::Pt => "+PT",
            Mode::Dict => "+Dict",
        }
    }

    fn dir(self) -> &'static str {
        match self {
            Mode::Baseline => "b0",
            Mode::Syn => "syn",
            Mode::Pt => "pt",
            Mode::Dict => "dict",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeScore {
    /// e.g. `hi-en`.
    pub direction: String,
    pub mode: Mode,
    pub dev_bleu: f64,
    pub test_bleu: f64,
    /// Test-set source tokens unseen in the training data.
    pub oov_tokens: usize,
    /// For +Dict: the mode it was stacked on.
    pub base: Option<Mode>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub scores: Vec<ModeScore>,
    /// Dev BLEU of the related→source system, when one was built.
    pub pivot_dev_bleu: Option<f64>,
    pub synthetic_pairs: usize,
    pub manifest: String,
    pub work_dir: PathBuf,
}

impl ExperimentReport {
    pub fn score(&self, direction: &str, mode: Mode) -> Option<&ModeScore> {
        self.scores.iter().find(|s| s.direction == direction && s.mode == mode)
    }
}

struct Artifacts {
    root: PathBuf,
    hashes: BTreeMap<String, String>,
}

impl Artifacts {
    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        self.hashes.insert(rel.to_string(), hex::encode(Sha256::digest(bytes)));
        Ok(())
    }

    fn table(&mut self, rel: &str, table: &PhraseTable) -> Result<()> {
        let mut buf = Vec::new();
        table.write_moses(&mut buf)?;
        self.write(rel, &buf)
    }

    fn sentences(&mut self, rel: &str, sents: &[Vec<String>]) -> Result<()> {
        let text: String = sents.iter().map(|s| s.join(" ") + "\n").collect();
        self.write(rel, text.as_bytes())
    }
}

struct Direction<'a> {
    name: String,
    lm: Arc<dyn LanguageModel>,
    dev: (&'a [Vec<String>], &'a [Vec<String>]),
    test: (&'a [Vec<String>], &'a [Vec<String>]),
}

struct SystemOutcome {
    dev_bleu: f64,
    test_bleu: f64,
    model: LogLinearModel,
}

fn widen(model: &LogLinearModel, tables: usize) -> Result<LogLinearModel> {
    let mut out = LogLinearModel::new(tables)?;
    for (name, w) in model.names().iter().zip(model.weights()) {
        if out.get(name).is_some() {
            out.set(name, *w)?;
        }
    }
    for t in model.table_count()..tables {
        for k in 0..4 {
            let from = model.tm_index(model.table_count() - 1, k);
            let name = out.names()[out.tm_index(t, k)].clone();
            out.set(&name, model.weights()[from])?;
        }
    }
    Ok(out)
}

fn run_system(
    cfg: &ExperimentConfig,
    dir: &Direction,
    tables: Vec<PhraseTable>,
    frozen: Option<&LogLinearModel>,
    artifacts: &mut Artifacts,
    prefix: &str,
) -> Result<SystemOutcome> {
    for (k, t) in tables.iter().enumerate() {
        artifacts.table(&format!("{prefix}/table{k}.moses"), t)?;
    }
    let block_count = tables.len();
    let decoding = combine_tables(tables, CombineMode::SeparateFeatures)?;
    let mut system = TranslationSystem::new(decoding, dir.lm.clone(), cfg.decoder)?;
    match frozen {
        Some(m) => system.model = widen(m, block_count)?,
        None => {
            let tune = TuneConfig {
                rounds: cfg.tune_rounds,
                nbest: cfg.tune_nbest,
                passes: 3,
                seed: cfg.seed,
            };
            system.model = tune_weights(&system, dir.dev.0, dir.dev.1, &tune)?.model;
        }
    }
    let mut weights = Vec::new();
    system.model.write_weights(&mut weights)?;
    artifacts.write(&format!("{prefix}/weights.txt"), &weights)?;
    let dev_out = system.translate_all(dir.dev.0)?;
    let test_out = system.translate_all(dir.test.0)?;
    artifacts.sentences(&format!("{prefix}/test.out"), &test_out)?;
    Ok(SystemOutcome {
        dev_bleu: corpus_bleu(&dev_out, dir.dev.1, DEFAULT_MAX_N)?.0,
        test_bleu: corpus_bleu(&test_out, dir.test.1, DEFAULT_MAX_N)?.0,
        model: system.model,
    })
}

fn source_vocab(bitexts: &[&Bitext]) -> crate::corpus::Vocabulary {
    let mut v = crate::corpus::Vocabulary::new();
    for b in bitexts {
        for (_, w) in b.source_vocab.words() {
            v.intern(w);
        }
    }
    v
}

/// Builds the related→source system (bridge table, triangulated table,
/// transliteration table and OOV transliteration) and returns it with its
/// dev BLEU, if a bridge dev set is configured.
fn build_pivot_system(
    cfg: &ExperimentConfig,
    baseline: &Bitext,
    related: &Bitext,
    source_lm: Arc<dyn LanguageModel>,
    artifacts: &mut Artifacts,
) -> Result<(TranslationSystem, Option<f64>)> {
    let bridge = load_bitext(cfg, "bridge.rel", "bridge.src")?;
    let (rel, src, tgt) = (&cfg.related_lang, &cfg.source_lang, &cfg.target_lang);

    let bridge_aligned = align_bitext(&bridge, cfg.model1_iterations, true)?;
    let mut b_rs = score_phrase_table(
        &bridge,
        &bridge_aligned.alignments,
        &bridge_aligned.forward,
        &bridge_aligned.backward,
        cfg.max_phrase_len,
    )?
    .with_languages(rel, src);
    b_rs.name = format!("B_{rel},{src}");

    let rel_tgt = train_table(related, cfg.model1_iterations, cfg.max_phrase_len, "related")?.with_languages(rel, tgt);
    let tgt_src = train_table(baseline, cfg.model1_iterations, cfg.max_phrase_len, "baseline")?
        .with_languages(src, tgt)
        .transpose();
    let t_g = triangulate(&rel_tgt, &tgt_src, &cfg.triangulation)?;

    let mut words = WordPairCorpus::from_alignments(&bridge, &bridge_aligned.alignments);
    words.extend(&WordPairCorpus::from_phrase_table(&t_g));
    let mining = mine_transliterations(&words, cfg.mining_iterations, cfg.mining_threshold)?;
    let mut mined = Vec::new();
    write_mined_pairs(&mut mined, &mining.mined)?;
    artifacts.write("pivot/mined_pairs.tsv", &mined)?;

    let mut rel_words: BTreeSet<String> = BTreeSet::new();
    for (_, w) in related.source_vocab.words() {
        if !w.starts_with('<') {
            rel_words.insert(w.to_string());
        }
    }
    let rel_words: Vec<String> = rel_words.into_iter().collect();
    let t_r = build_translit_table(&mining.model, &rel_words, cfg.translit_table_k)?.with_languages(rel, src);

    artifacts.table("pivot/bridge.moses", &b_rs)?;
    artifacts.table("pivot/triangulated.moses", &t_g)?;
    artifacts.table("pivot/translit.moses", &t_r)?;

    let decoding = combine_tables(vec![b_rs, t_g, t_r], CombineMode::SeparateFeatures)?;
    let mut system = TranslationSystem::new(decoding, source_lm, cfg.decoder)?.with_translit(mining.model);
    let mut dev_bleu = None;
    if let (Some(_), Some(_)) = (cfg.path("bridge_dev.rel"), cfg.path("bridge_dev.src")) {
        let dev = load_bitext(cfg, "bridge_dev.rel", "bridge_dev.src")?;
        let (ds, dt) = (dev.source_sentences(), dev.target_sentences());
        if cfg.retune {
            let tune = TuneConfig {
                rounds: cfg.tune_rounds,
                nbest: cfg.tune_nbest,
                passes: 3,
                seed: cfg.seed,
            };
            system.model = tune_weights(&system, &ds, &dt, &tune)?.model;
        }
        let out = system.translate_all(&ds)?;
        dev_bleu = Some(corpus_bleu(&out, &dt, DEFAULT_MAX_N)?.0);
    }
    let mut weights = Vec::new();
    system.model.write_weights(&mut weights)?;
    artifacts.write("pivot/weights.txt", &weights)?;
    Ok((system, dev_bleu))
}

/// Runs the whole mode matrix and writes artifacts plus `manifest.txt`,
/// `scores.txt` and `scores.tsv` under `work_dir` (the config's when
/// `None`).
pub fn run_experiment(cfg: &ExperimentConfig, work_dir: Option<&Path>) -> Result<ExperimentReport> {
    cfg.check_inputs()?;
    let root = work_dir.map(Path::to_path_buf).unwrap_or_else(|| cfg.work_dir.clone());
    fs::create_dir_all(&root)?;
    let mut artifacts = Artifacts {
        root: root.clone(),
        hashes: BTreeMap::new(),
    };
    let (src, tgt) = (cfg.source_lang.clone(), cfg.target_lang.clone());

    let baseline = load_bitext(cfg, "baseline.src", "baseline.tgt")?;
    let dev = load_bitext(cfg, "dev.src", "dev.tgt")?;
    let test = load_bitext(cfg, "test.src", "test.tgt")?;
    let dict = match (cfg.use_dict, cfg.path("dictionary")) {
        (true, Some(p)) => Some(dict_to_bitext(&read_dictionary_tsv(
            BufReader::new(fs::File::open(p)?),
            &tokenizer(),
        )?)),
        _ => None,
    };

    let mut src_lm_data = load_mono(cfg, "mono.src")?;
    src_lm_data.extend(baseline.source_sentences());
    let mut tgt_lm_data = load_mono(cfg, "mono.tgt")?;
    tgt_lm_data.extend(baseline.target_sentences());
    let src_lm = train_kn(&src_lm_data, cfg.lm_order)?;
    let tgt_lm = train_kn(&tgt_lm_data, cfg.lm_order)?;
    for (lang, lm) in [(&src, &src_lm), (&tgt, &tgt_lm)] {
        let mut buf = Vec::new();
        lm.write_arpa(&mut buf)?;
        artifacts.write(&format!("lm.{lang}.arpa"), &buf)?;
    }
    let src_lm: Arc<dyn LanguageModel> = Arc::new(src_lm);
    let tgt_lm: Arc<dyn LanguageModel> = Arc::new(tgt_lm);

    let mut pivot_dev_bleu = None;
    let synthetic = if cfg.use_synth == SynthMode::Off {
        None
    } else {
        let related = load_bitext(cfg, "related.rel", "related.tgt")?;
        let (system, bleu) = build_pivot_system(cfg, &baseline, &related, src_lm.clone(), &mut artifacts)?;
        pivot_dev_bleu = bleu;
        let syn = synthesize_bitext(&related, &system)?;
        artifacts.sentences(&format!("synthetic.{src}"), &syn.source_sentences())?;
        artifacts.sentences(&format!("synthetic.{tgt}"), &syn.target_sentences())?;
        Some(syn)
    };
    let synthetic_pairs = synthetic.as_ref().map_or(0, Bitext::len);

    let (dev_s, dev_t) = (dev.source_sentences(), dev.target_sentences());
    let (test_s, test_t) = (test.source_sentences(), test.target_sentences());
    let directions = [
        (
            Direction {
                name: format!("{src}-{tgt}"),
                lm: tgt_lm.clone(),
                dev: (&dev_s, &dev_t),
                test: (&test_s, &test_t),
            },
            false,
        ),
        (
            Direction {
                name: format!("{tgt}-{src}"),
                lm: src_lm.clone(),
                dev: (&dev_t, &dev_s),
                test: (&test_t, &test_s),
            },
            true,
        ),
    ];

    let mut scores = Vec::new();
    for (dir, swap) in &directions {
        let orient = |b: &Bitext| if *swap { b.swapped() } else { b.clone() };
        let base = orient(&baseline);
        let syn = synthetic.as_ref().map(orient);
        let dict = dict.as_ref().map(orient);
        let train = |b: &Bitext, name: &str| train_table(b, cfg.model1_iterations, cfg.max_phrase_len, name);
        let test_src: &[Vec<String>] = dir.test.0;

        let b0 = run_system(cfg, dir, vec![train(&base, "baseline")?], None, &mut artifacts, &format!("{}/b0", dir.name))?;
        let frozen = if cfg.retune { None } else { Some(&b0.model) };
        scores.push(ModeScore {
            direction: dir.name.clone(),
            mode: Mode::Baseline,
            dev_bleu: b0.dev_bleu,
            test_bleu: b0.test_bleu,
            oov_tokens: count_oov_tokens(test_src, &source_vocab(&[&base])),
            base: None,
        });

        let mut candidates: Vec<(Mode, f64)> = vec![(Mode::Baseline, b0.dev_bleu)];
        if let Some(syn) = &syn {
            if matches!(cfg.use_synth, SynthMode::Both | SynthMode::Concat) {
                let data = concat_bitexts(&[base.clone(), syn.clone()]);
                let out = run_system(cfg, dir, vec![train(&data, "syn")?], frozen, &mut artifacts, &format!("{}/{}", dir.name, Mode::Syn.dir()))?;
                candidates.push((Mode::Syn, out.dev_bleu));
                scores.push(ModeScore {
                    direction: dir.name.clone(),
                    mode: Mode::Syn,
                    dev_bleu: out.dev_bleu,
                    test_bleu: out.test_bleu,
                    oov_tokens: count_oov_tokens(test_src, &source_vocab(&[&base, syn])),
                    base: None,
                });
            }
            if matches!(cfg.use_synth, SynthMode::Both | SynthMode::Separate) {
                let tables = vec![train(&base, "baseline")?, train(syn, "synthetic")?];
                let out = run_system(cfg, dir, tables, frozen, &mut artifacts, &format!("{}/{}", dir.name, Mode::Pt.dir()))?;
                candidates.push((Mode::Pt, out.dev_bleu));
                scores.push(ModeScore {
                    direction: dir.name.clone(),
                    mode: Mode::Pt,
                    dev_bleu: out.dev_bleu,
                    test_bleu: out.test_bleu,
                    oov_tokens: count_oov_tokens(test_src, &source_vocab(&[&base, syn])),
                    base: None,
                });
            }
        }
        if let Some(dict) = &dict {
            // Stack on the best system so far by dev BLEU; earlier modes win ties.
            let best = candidates
                .iter()
                .fold(candidates[0], |acc, &c| if c.1 > acc.1 { c } else { acc })
                .0;
            let (tables, vocab) = match (best, &syn) {
                (Mode::Syn, Some(syn)) => {
                    let data = concat_bitexts(&[base.clone(), syn.clone(), dict.clone()]);
                    let v = source_vocab(&[&base, syn, dict]);
                    (vec![train(&data, "dict")?], v)
                }
                (Mode::Pt, Some(syn)) => {
                    let data = concat_bitexts(&[base.clone(), dict.clone()]);
                    let v = source_vocab(&[&base, syn, dict]);
                    (vec![train(&data, "dict")?, train(syn, "synthetic")?], v)
                }
                _ => {
                    let data = concat_bitexts(&[base.clone(), dict.clone()]);
                    (vec![train(&data, "dict")?], source_vocab(&[&base, dict]))
                }
            };
            let out = run_system(cfg, dir, tables, frozen, &mut artifacts, &format!("{}/{}", dir.name, Mode::Dict.dir()))?;
            scores.push(ModeScore {
                direction: dir.name.clone(),
                mode: Mode::Dict,
                dev_bleu: out.dev_bleu,
                test_bleu: out.test_bleu,
                oov_tokens: count_oov_tokens(test_src, &vocab),
                base: Some(best),
            });
        }
    }

    let report_text = render_reports(&scores, pivot_dev_bleu);
    artifacts.write("scores.txt", report_text.as_bytes())?;
    artifacts.write("scores.tsv", render_scores_tsv(&scores).as_bytes())?;

    let mut manifest = String::new();
    writeln!(manifest, "config_sha256\t{}", cfg.hash()).unwrap();
    writeln!(manifest, "seed\t{}", cfg.seed).unwrap();
    writeln!(manifest, "synthetic_pairs\t{synthetic_pairs}").unwrap();
    writeln!(manifest, "\n[artifacts]").unwrap();
    for (path, hash) in &artifacts.hashes {
        writeln!(manifest, "{path}\t{hash}").unwrap();
    }
    writeln!(manifest, "\n[scores]").unwrap();
    manifest.push_str(&render_scores_tsv(&scores));
    fs::write(root.join("manifest.txt"), &manifest)?;

    Ok(ExperimentReport {
        scores,
        pivot_dev_bleu,
        synthetic_pairs,
        manifest,
        work_dir: root,
    })
}

fn render_scores_tsv(scores: &[ModeScore]) -> String {
    let rows: Vec<Vec<String>> = scores
        .iter()
        .map(|s| {
            vec![
                s.direction.clone(),
                s.mode.label().to_string(),
                format!("{:.2}", s.dev_bleu),
                format!("{:.2}", s.test_bleu),
                s.oov_tokens.to_string(),
                s.base.map_or("-".to_string(), |b| b.label().to_string()),
            ]
        })
        .collect();
    render_tsv(&["pair", "mode", "dev_bleu", "test_bleu", "oov_tokens", "base"], &rows)
}

/// Score tables laid out as `Pair | B_0 | +Syn | Δ | +PT | Δ` and
/// `Pair | B_0 | +Dict | Δ`, where the latter's B_0 is the system +Dict was
/// stacked on.
pub fn render_reports(scores: &[ModeScore], pivot_dev_bleu: Option<f64>) -> String {
    let mut directions: Vec<&str> = Vec::new();
    for s in scores {
        if !directions.contains(&s.direction.as_str()) {
            directions.push(&s.direction);
        }
    }
    let find = |d: &str, m: Mode| scores.iter().find(|s| s.direction == d && s.mode == m);
    let mut out = String::new();
    if let Some(b) = pivot_dev_bleu {
        writeln!(out, "Pivot system dev BLEU: {b:.2}\n").unwrap();
    }

    let mut rows3 = Vec::new();
    for d in &directions {
        let Some(b0) = find(d, Mode::Baseline) else { continue };
        let mut row = vec![d.to_string(), format!("{:.2}", b0.test_bleu)];
        for m in [Mode::Syn, Mode::Pt] {
            match find(d, m) {
                Some(s) => {
                    let r = delta_report(b0.test_bleu, s.test_bleu, d);
                    row.push(format!("{:.2}", s.test_bleu));
                    row.push(format_delta(r.delta));
                }
                None => row.extend(["-".to_string(), "-".to_string()]),
            }
        }
        rows3.push(row);
    }
    out.push_str(&render_text_table(&["Pair", "B_0", "+Syn", "Δ", "+PT", "Δ"], &rows3));

    let mut rows4 = Vec::new();
    for d in &directions {
        let Some(dict) = find(d, Mode::Dict) else { continue };
        let Some(base) = dict.base.and_then(|b| find(d, b)) else { continue };
        let r = delta_report(base.test_bleu, dict.test_bleu, d);
        rows4.push(vec![
            d.to_string(),
            format!("{:.2}", base.test_bleu),
            format!("{:.2}", dict.test_bleu),
            format_delta(r.delta),
            base.oov_tokens.to_string(),
            dict.oov_tokens.to_string(),
        ]);
    }
    if !rows4.is_empty() {
        out.push('\n');
        out.push_str(&render_text_table(&["Pair", "B_0", "+Dict", "Δ", "OOV B_0", "OOV +Dict"], &rows4));
    }
    out
}

/// Size knobs for the synthetic tri-lingual fixture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixtureSpec {
    pub baseline_pairs: usize,
    pub related_pairs: usize,
    pub bridge_pairs: usize,
    pub bridge_dev_pairs: usize,
    pub dev_pairs: usize,
    pub test_pairs: usize,
    pub mono_sentences: usize,
    /// Nouns seen in the baseline bitext.
    pub shared_nouns: usize,
    /// Nouns seen only in the related-language bitext.
    pub related_only_nouns: usize,
    /// Nouns seen only in the dictionary.
    pub dictionary_nouns: usize,
    pub verbs: usize,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            baseline_pairs: 2000,
            related_pairs: 2000,
            bridge_pairs: 300,
            bridge_dev_pairs: 40,
            dev_pairs: 100,
            test_pairs: 200,
            mono_sentences: 3000,
            shared_nouns: 22,
            related_only_nouns: 8,
            dictionary_nouns: 8,
            verbs: 10,
        }
    }
}

const SRC_CONSONANTS: [char; 16] = ['क', 'ख', 'ग', 'ज', 'ट', 'ड', 'त', 'द', 'न', 'प', 'ब', 'म', 'र', 'ल', 'व', 'स'];
const SRC_VOWELS: [char; 6] = ['अ', 'आ', 'इ', 'उ', 'ए', 'ओ'];
const REL_CONSONANTS: [char; 16] = ['ب', 'پ', 'ت', 'ٹ', 'د', 'ڈ', 'ر', 'ز', 'س', 'ش', 'ف', 'ک', 'گ', 'ل', 'م', 'ن'];
const REL_VOWELS: [char; 6] = ['ا', 'و', 'ی', 'ے', 'ع', 'ہ'];
const TGT_CONSONANTS: [char; 13] = ['b', 'd', 'f', 'g', 'k', 'l', 'm', 'n', 'p', 'r', 's', 't', 'v'];
const TGT_VOWELS: [char; 5] = ['a', 'e', 'i', 'o', 'u'];

/// Maps source-script characters to the related script.
pub fn fixture_char_map(c: char) -> Option<char> {
    SRC_CONSONANTS
        .iter()
        .position(|&x| x == c)
        .map(|i| REL_CONSONANTS[i])
        .or_else(|| SRC_VOWELS.iter().position(|&x| x == c).map(|i| REL_VOWELS[i]))
}

pub fn fixture_to_related(word: &str) -> String {
    word.chars().map(|c| fixture_char_map(c).unwrap_or(c)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NounGroup {
    Shared,
    RelatedOnly,
    DictionaryOnly,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Concept {
    pub source: String,
    pub target: String,
}

/// Tri-lingual toy world. Source (hi-like) and related (ur-like) words are
/// the same strings in two scripts; target (en-like) words are unrelated.
/// Source order is `n1 ne n2 ko v`, target order `the n1 v n2`.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub nouns: Vec<(Concept, NounGroup)>,
    pub verbs: Vec<Concept>,
    pub subject_marker: String,
    pub object_marker: String,
    pub article: String,
    pub baseline: Vec<(Vec<String>, Vec<String>)>,
    /// (related, target)
    pub related: Vec<(Vec<String>, Vec<String>)>,
    /// (related, source)
    pub bridge: Vec<(Vec<String>, Vec<String>)>,
    pub bridge_dev: Vec<(Vec<String>, Vec<String>)>,
    pub dev: Vec<(Vec<String>, Vec<String>)>,
    pub test: Vec<(Vec<String>, Vec<String>)>,
    pub mono_source: Vec<Vec<String>>,
    pub mono_target: Vec<Vec<String>>,
    pub dictionary: Vec<DictionaryEntry>,
}

fn random_word(rng: &mut ChaCha8Rng, consonants: &[char], vowels: &[char], syllables: usize) -> String {
    (0..syllables)
        .flat_map(|_| [consonants[rng.gen_range(0..consonants.len())], vowels[rng.gen_range(0..vowels.len())]])
        .collect()
}

fn fresh_words(
    rng: &mut ChaCha8Rng,
    consonants: &[char],
    vowels: &[char],
    count: usize,
    taken: &mut BTreeSet<String>,
) -> Vec<String> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let syllables = rng.gen_range(2..=3);
        let w = random_word(rng, consonants, vowels, syllables);
        if taken.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

impl Fixture {
    pub fn generate(seed: u64, spec: &FixtureSpec) -> Fixture {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noun_count = spec.shared_nouns + spec.related_only_nouns + spec.dictionary_nouns;
        let mut src_taken = BTreeSet::new();
        let mut tgt_taken = BTreeSet::new();
        let subject_marker: String = [SRC_CONSONANTS[8], SRC_VOWELS[4]].iter().collect();
        let object_marker: String = [SRC_CONSONANTS[0], SRC_VOWELS[5]].iter().collect();
        src_taken.insert(subject_marker.clone());
        src_taken.insert(object_marker.clone());
        tgt_taken.insert("the".to_string());

        // Every source character must occur in baseline vocabulary so a
        // character model can be learned from it.
        let (src_nouns, src_verbs) = loop {
            let mut taken = src_taken.clone();
            let nouns = fresh_words(&mut rng, &SRC_CONSONANTS, &SRC_VOWELS, noun_count, &mut taken);
            let verbs = fresh_words(&mut rng, &SRC_CONSONANTS, &SRC_VOWELS, spec.verbs, &mut taken);
            let seen: BTreeSet<char> = nouns[..spec.shared_nouns]
                .iter()
                .chain(&verbs)
                .flat_map(|w| w.chars())
                .collect();
            if seen.len() == SRC_CONSONANTS.len() + SRC_VOWELS.len() {
                break (nouns, verbs);
            }
        };
        let tgt_nouns = fresh_words(&mut rng, &TGT_CONSONANTS, &TGT_VOWELS, noun_count, &mut tgt_taken);
        let tgt_verbs = fresh_words(&mut rng, &TGT_CONSONANTS, &TGT_VOWELS, spec.verbs, &mut tgt_taken);

        let nouns: Vec<(Concept, NounGroup)> = src_nouns
            .into_iter()
            .zip(tgt_nouns)
            .enumerate()
            .map(|(k, (source, target))| {
                let group = if k < spec.shared_nouns {
                    NounGroup::Shared
                } else if k < spec.shared_nouns + spec.related_only_nouns {
                    NounGroup::RelatedOnly
                } else {
                    NounGroup::DictionaryOnly
                };
                (Concept { source, target }, group)
            })
            .collect();
        let verbs: Vec<Concept> = src_verbs
            .into_iter()
            .zip(tgt_verbs)
            .map(|(source, target)| Concept { source, target })
            .collect();

        let group_nouns = |groups: &[NounGroup]| -> Vec<usize> {
            (0..nouns.len()).filter(|&k| groups.contains(&nouns[k].1)).collect()
        };
        let shared = group_nouns(&[NounGroup::Shared]);
        let related_pool = group_nouns(&[NounGroup::Shared, NounGroup::RelatedOnly]);
        let related_only = group_nouns(&[NounGroup::RelatedOnly]);
        let dict_only = group_nouns(&[NounGroup::DictionaryOnly]);
        let all = group_nouns(&[NounGroup::Shared, NounGroup::RelatedOnly, NounGroup::DictionaryOnly]);

        let mut fx = Fixture {
            nouns,
            verbs,
            subject_marker,
            object_marker,
            article: "the".into(),
            baseline: Vec::new(),
            related: Vec::new(),
            bridge: Vec::new(),
            bridge_dev: Vec::new(),
            dev: Vec::new(),
            test: Vec::new(),
            mono_source: Vec::new(),
            mono_target: Vec::new(),
            dictionary: Vec::new(),
        };

        let pick_pair = |rng: &mut ChaCha8Rng, pool: &[usize]| -> (usize, usize) {
            let a = pool[rng.gen_range(0..pool.len())];
            loop {
                let b = pool[rng.gen_range(0..pool.len())];
                if b != a {
                    return (a, b);
                }
            }
        };
        // Held-out slots draw from shared nouns half the time, then from
        // related-only and dictionary-only nouns.
        let held_out_noun = |rng: &mut ChaCha8Rng| -> usize {
            let r: f64 = rng.gen();
            let pool = if r < 0.5 {
                &shared
            } else if r < 0.8 {
                &related_only
            } else {
                &dict_only
            };
            pool[rng.gen_range(0..pool.len())]
        };

        for _ in 0..spec.baseline_pairs {
            let (a, b) = pick_pair(&mut rng, &shared);
            let v = rng.gen_range(0..fx.verbs.len());
            fx.baseline.push((fx.source_sentence(a, b, v), fx.target_sentence(a, b, v)));
        }
        for _ in 0..spec.related_pairs {
            let (a, b) = pick_pair(&mut rng, &related_pool);
            let v = rng.gen_range(0..fx.verbs.len());
            let rel = fx.source_sentence(a, b, v).iter().map(|w| fixture_to_related(w)).collect();
            fx.related.push((rel, fx.target_sentence(a, b, v)));
        }
        for k in 0..spec.bridge_pairs + spec.bridge_dev_pairs {
            let (a, b) = pick_pair(&mut rng, &shared);
            let v = rng.gen_range(0..fx.verbs.len());
            let src = fx.source_sentence(a, b, v);
            let rel = src.iter().map(|w| fixture_to_related(w)).collect();
            if k < spec.bridge_pairs {
                fx.bridge.push((rel, src));
            } else {
                fx.bridge_dev.push((rel, src));
            }
        }
        for k in 0..spec.dev_pairs + spec.test_pairs {
            let a = held_out_noun(&mut rng);
            let b = loop {
                let b = held_out_noun(&mut rng);
                if b != a {
                    break b;
                }
            };
            let v = rng.gen_range(0..fx.verbs.len());
            let pair = (fx.source_sentence(a, b, v), fx.target_sentence(a, b, v));
            if k < spec.dev_pairs {
                fx.dev.push(pair);
            } else {
                fx.test.push(pair);
            }
        }
        for _ in 0..spec.mono_sentences {
            let (a, b) = pick_pair(&mut rng, &all);
            let v = rng.gen_range(0..fx.verbs.len());
            fx.mono_source.push(fx.source_sentence(a, b, v));
            let (a, b) = pick_pair(&mut rng, &all);
            let v = rng.gen_range(0..fx.verbs.len());
            fx.mono_target.push(fx.target_sentence(a, b, v));
        }
        let sources = [
            DictSource::Wikipedia,
            DictSource::Wiktionary,
            DictSource::OmegaWiki,
            DictSource::Mesh,
        ];
        let mut dict_nouns: Vec<usize> = dict_only.clone();
        let mut extra = shared.clone();
        extra.shuffle(&mut rng);
        dict_nouns.extend(extra.into_iter().take(spec.shared_nouns / 2));
        dict_nouns.sort_unstable();
        for k in dict_nouns {
            let c = &fx.nouns[k].0;
            let provenance = sources[rng.gen_range(0..sources.len())];
            fx.dictionary.push(
                DictionaryEntry::new(vec![c.source.clone()], vec![c.target.clone()], provenance)
                    .expect("fixture words are non-empty"),
            );
        }
        fx
    }

    fn source_sentence(&self, a: usize, b: usize, v: usize) -> Vec<String> {
        vec![
            self.nouns[a].0.source.clone(),
            self.subject_marker.clone(),
            self.nouns[b].0.source.clone(),
            self.object_marker.clone(),
            self.verbs[v].source.clone(),
        ]
    }

    fn target_sentence(&self, a: usize, b: usize, v: usize) -> Vec<String> {
        vec![
            self.article.clone(),
            self.nouns[a].0.target.clone(),
            self.verbs[v].target.clone(),
            self.nouns[b].0.target.clone(),
        ]
    }

    /// Writes all corpora and an `experiment.conf` into `dir`; returns the
    /// config path.
    pub fn write(&self, dir: &Path, seed: u64) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let lines = |sents: &mut dyn Iterator<Item = &Vec<String>>| -> String {
            sents.map(|s| s.join(" ") + "\n").collect()
        };
        let write_pairs = |name: &str, ext: (&str, &str), pairs: &[(Vec<String>, Vec<String>)]| -> Result<()> {
            fs::write(dir.join(format!("{name}.{}", ext.0)), lines(&mut pairs.iter().map(|p| &p.0)))?;
            fs::write(dir.join(format!("{name}.{}", ext.1)), lines(&mut pairs.iter().map(|p| &p.1)))?;
            Ok(())
        };
        write_pairs("baseline", ("hi", "en"), &self.baseline)?;
        write_pairs("related", ("ur", "en"), &self.related)?;
        write_pairs("bridge", ("ur", "hi"), &self.bridge)?;
        write_pairs("bridge_dev", ("ur", "hi"), &self.bridge_dev)?;
        write_pairs("dev", ("hi", "en"), &self.dev)?;
        write_pairs("test", ("hi", "en"), &self.test)?;
        fs::write(dir.join("mono.hi"), lines(&mut self.mono_source.iter()))?;
        fs::write(dir.join("mono.en"), lines(&mut self.mono_target.iter()))?;
        let dict: String = self
            .dictionary
            .iter()
            .map(|e| format!("{}\t{}\t{}\n", e.source.join(" "), e.target.join(" "), e.provenance))
            .collect();
        fs::write(dir.join("dict.tsv"), dict)?;
        let config = format!(
            "# toy tri-lingual experiment\n\
             seed = {seed}\n\
             work_dir = work\n\
             lang.src = hi\n\
             lang.tgt = en\n\
             lang.rel = ur\n\
             baseline.src = baseline.hi\n\
             baseline.tgt = baseline.en\n\
             related.rel = related.ur\n\
             related.tgt = related.en\n\
             bridge.rel = bridge.ur\n\
             bridge.src = bridge.hi\n\
             bridge_dev.rel = bridge_dev.ur\n\
             bridge_dev.src = bridge_dev.hi\n\
             dev.src = dev.hi\n\
             dev.tgt = dev.en\n\
             test.src = test.hi\n\
             test.tgt = test.en\n\
             mono.src = mono.hi\n\
             mono.tgt = mono.en\n\
             dictionary = dict.tsv\n\
             use_synth = both\n\
             use_dict = on\n\
             retune = on\n\
             lm_order = 3\n\
             distortion_limit = 6\n\
             stack_size = 200\n\
             option_limit = 20\n\
             translit_k = 5\n"
        );
        let path = dir.join("experiment.conf");
        fs::write(&path, config)?;
        Ok(path)
    }
}

/// Loads a trained LM from an ARPA file.
pub fn load_arpa(path: &Path) -> Result<NGramModel> {
    NGramModel::read_arpa(BufReader::new(fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing() {
        let cfg = ExperimentConfig::parse(
            "seed = 9 # comment\n\n baseline.src = a.hi\nuse_synth = concat\nuse_dict = off\n",
            Path::new("/tmp/x"),
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.use_synth, SynthMode::Concat);
        assert!(!cfg.use_dict);
        assert_eq!(cfg.path("baseline.src").unwrap(), Path::new("/tmp/x/a.hi"));
        assert!(ExperimentConfig::parse("bogus = 1\n", Path::new(".")).is_err());
        assert!(ExperimentConfig::parse("use_synth = maybe\n", Path::new(".")).is_err());
        let err = ExperimentConfig::parse("seed 3\n", Path::new(".")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn missing_inputs_fail_early() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::parse(
            "baseline.src = nope.hi\nbaseline.tgt = nope.en\ndev.src = d\ndev.tgt = d\ntest.src = t\ntest.tgt = t\nuse_synth = off\nuse_dict = off\n",
            dir.path(),
        )
        .unwrap();
        assert!(matches!(run_experiment(&cfg, None), Err(Error::MissingInput(_))));
        assert!(!dir.path().join("work").exists());
    }

    #[test]
    fn fixture_shape() {
        let spec = FixtureSpec::default();
        let fx = Fixture::generate(3, &spec);
        assert_eq!(fx.baseline.len(), 2000);
        assert_eq!(fx.test.len(), 200);
        let vocab: BTreeSet<&String> = fx.baseline.iter().flat_map(|p| &p.0).collect();
        assert_eq!(vocab.len(), spec.shared_nouns + spec.verbs + 2);
        let again = Fixture::generate(3, &spec);
        assert_eq!(fx.test, again.test);
        assert_eq!(fixture_to_related(&fx.subject_marker).chars().count(), 2);
    }

    #[test]
    fn empty_synthesis() {
        let mut t = PhraseTable::new("id", crate::phrasetab::TableRole::Baseline);
        t.insert(vec!["u".into()], vec!["u".into()], crate::phrasetab::PhraseScores::uniform(1.0));
        let lm = train_kn(&[vec!["u"]], 2).unwrap();
        let sys = TranslationSystem::new(crate::pivot::DecodingTables::single(t), Arc::new(lm), DecoderConfig::default())
            .unwrap();
        assert!(synthesize_bitext(&Bitext::new(), &sys).unwrap().is_empty());
        let mut b = Bitext::new();
        b.push_tokens(&["u", "u"], &["e"], Provenance::Baseline);
        let out = synthesize_bitext(&b, &sys).unwrap();
        assert_eq!(out.source_sentences(), vec![vec!["u".to_string(), "u".to_string()]]);
        assert_eq!(out.pairs()[0].provenance, Provenance::Synthetic);
    }
}
