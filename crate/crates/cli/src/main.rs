use std::fs;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use pivotmt::align::{align_bitext, AlignmentMatrix};
use pivotmt::corpus::{ingest_readers, read_lines, Bitext, Provenance, TokenizeScheme, Tokenizer};
use pivotmt::decoder::{format_nbest_line, tune_weights, DecoderConfig, LogLinearModel, TranslationSystem, TuneConfig};
use pivotmt::evalkit::{corpus_bleu, read_manual_labels, tally_manual};
use pivotmt::ngramlm::train_kn;
use pivotmt::phrasetab::{score_phrase_table, PhraseTable, TableRole};
use pivotmt::pipeline::{load_arpa, run_experiment, synthesize_bitext, ExperimentConfig, Fixture, FixtureSpec};
use pivotmt::pivot::{combine_tables, triangulate, CombineMode, TriangulationConfig};
use pivotmt::translit::{
    build_translit_table, mine_transliterations, write_mined_pairs, CharModel, WordPairCorpus,
};

#[derive(Parser)]
#[command(name = "pivotmt", version, about = "Phrase-based SMT with pivoting and transliteration mining")]
struct Cli {
    /// Experiment config (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tokenize lines from a file or stdin.
    Tokenize {
        input: Option<PathBuf>,
        #[arg(long, default_value = "unicode")]
        scheme: TokenizeScheme,
        #[arg(long)]
        lowercase: bool,
    },
    /// Tokenize and length-filter a parallel corpus.
    Ingest {
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        tgt: PathBuf,
        #[arg(long, default_value_t = 80)]
        max_len: usize,
        #[arg(long)]
        out_src: PathBuf,
        #[arg(long)]
        out_tgt: PathBuf,
    },
    /// Model 1 in both directions plus grow-diag-final-and.
    Align {
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        tgt: PathBuf,
        #[arg(long, default_value_t = 5)]
        iterations: usize,
        #[arg(long)]
        no_null: bool,
        /// Moses `i-j` alignment lines.
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract and score a Moses phrase table.
    Extract {
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        tgt: PathBuf,
        /// Precomputed alignments; computed when absent.
        #[arg(long)]
        alignment: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        iterations: usize,
        #[arg(long, default_value_t = 4)]
        max_phrase_len: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Induce a source→target table through a pivot.
    Triangulate {
        #[arg(long)]
        src_pivot: PathBuf,
        #[arg(long)]
        pivot_tgt: PathBuf,
        #[arg(long, default_value_t = 1e-7)]
        min_score: f64,
        #[arg(long, default_value_t = 20)]
        top_k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mine transliteration pairs and fit a character model.
    MineTranslit {
        /// `src<TAB>tgt[<TAB>weight]` word pairs.
        #[arg(long)]
        pairs: Option<PathBuf>,
        /// Moses table whose one-word entries are used, weighted by phi(t|s).
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        iterations: usize,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long)]
        out_pairs: PathBuf,
        #[arg(long)]
        out_model: PathBuf,
    },
    /// Build a k-best transliteration phrase table for every word of a text.
    TranslitTable {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 100)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train an interpolated Kneser-Ney LM.
    TrainLm {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 5)]
        order: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Translate the first side of a bitext to build a synthetic bitext.
    Synthesize {
        #[command(flatten)]
        system: SystemArgs,
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        tgt: PathBuf,
        #[arg(long)]
        out_src: PathBuf,
        #[arg(long)]
        out_tgt: PathBuf,
    },
    /// Tune feature weights on a dev set.
    Tune {
        #[command(flatten)]
        system: SystemArgs,
        #[arg(long)]
        dev_src: PathBuf,
        #[arg(long)]
        dev_ref: PathBuf,
        #[arg(long, default_value_t = 3)]
        rounds: usize,
        #[arg(long, default_value_t = 20)]
        nbest: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode a tokenized text.
    Decode {
        #[command(flatten)]
        system: SystemArgs,
        #[arg(long)]
        input: Option<PathBuf>,
        /// Write n-best lists instead of 1-best output.
        #[arg(long)]
        nbest: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Corpus BLEU, or manual-evaluation tallies from a labels CSV.
    Score {
        #[arg(long, required_unless_present = "labels")]
        hyp: Option<PathBuf>,
        #[arg(long, required_unless_present = "labels")]
        reference: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        max_n: usize,
        /// `sent_id,judge_id,category` rows.
        #[arg(long, conflicts_with_all = ["hyp", "reference"])]
        labels: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        decimals: u32,
    },
    /// Run the B_0 / +Syn / +PT / +Dict matrix from a config.
    Experiment {
        /// Write the seeded toy fixture and its config here, then run it.
        #[arg(long)]
        write_fixture: Option<PathBuf>,
        /// Output directory (default: the config's work_dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SystemArgs {
    /// Moses phrase tables, one feature block each.
    #[arg(long, required = true, num_args = 1..)]
    table: Vec<PathBuf>,
    #[arg(long)]
    lm: PathBuf,
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Character model for transliterating uncovered words.
    #[arg(long)]
    translit_model: Option<PathBuf>,
    #[arg(long, default_value_t = 6)]
    distortion_limit: usize,
    #[arg(long, default_value_t = 200)]
    stack_size: usize,
    #[arg(long, default_value_t = 100)]
    option_limit: usize,
    #[arg(long, default_value_t = 5)]
    translit_k: usize,
}

/// Error raised by bad input data (exit code 2).
#[derive(Debug)]
struct DataError(anyhow::Error);

fn open(path: &Path) -> anyhow::Result<BufReader<fs::File>> {
    Ok(BufReader::new(
        fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?,
    ))
}

fn create(path: &Path) -> anyhow::Result<BufWriter<fs::File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(
        fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

fn read_sentences(path: &Path) -> anyhow::Result<Vec<Vec<String>>> {
    Ok(read_lines(open(path)?)?
        .iter()
        .map(|l| l.split_whitespace().map(String::from).collect())
        .collect())
}

fn write_sentences(path: &Path, sents: &[Vec<String>]) -> anyhow::Result<()> {
    let mut out = create(path)?;
    for s in sents {
        writeln!(out, "{}", s.join(" "))?;
    }
    out.flush()?;
    Ok(())
}

fn load_bitext(src: &Path, tgt: &Path) -> anyhow::Result<Bitext> {
    let (b, report) = ingest_readers(open(src)?, open(tgt)?, usize::MAX, &Tokenizer::new(TokenizeScheme::Whitespace))?;
    debug_assert_eq!(report.dropped, 0);
    Ok(b)
}

fn load_table(path: &Path, role: TableRole) -> anyhow::Result<PhraseTable> {
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("table");
    Ok(PhraseTable::read_moses(open(path)?, name, role)?)
}

fn build_system(args: &SystemArgs) -> anyhow::Result<TranslationSystem> {
    let tables = args
        .table
        .iter()
        .map(|p| load_table(p, TableRole::Baseline))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let count = tables.len();
    let decoding = combine_tables(tables, CombineMode::SeparateFeatures)?;
    let lm = load_arpa(&args.lm)?;
    let config = DecoderConfig {
        distortion_limit: args.distortion_limit,
        stack_size: args.stack_size,
        option_limit: args.option_limit,
        translit_k: args.translit_k,
    };
    let mut system = TranslationSystem::new(decoding, Arc::new(lm), config)?;
    if let Some(w) = &args.weights {
        system.model = LogLinearModel::read_weights(open(w)?, count)?;
    }
    if let Some(m) = &args.translit_model {
        system = system.with_translit(CharModel::read(open(m)?)?);
    }
    Ok(system)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Tokenize {
            input,
            scheme,
            lowercase,
        } => {
            let tokenizer = Tokenizer { scheme, lowercase };
            let lines = match input {
                Some(p) => read_lines(open(&p)?)?,
                None => {
                    let mut buf = Vec::new();
                    io::stdin().read_to_end(&mut buf)?;
                    read_lines(&buf[..])?
                }
            };
            let mut out = BufWriter::new(io::stdout().lock());
            for l in lines {
                writeln!(out, "{}", tokenizer.tokenize(&l).join(" "))?;
            }
            out.flush()?;
        }
        Command::Ingest {
            src,
            tgt,
            max_len,
            out_src,
            out_tgt,
        } => {
            let (bitext, report) = ingest_readers(open(&src)?, open(&tgt)?, max_len, &Tokenizer::default())?;
            write_sentences(&out_src, &bitext.source_sentences())?;
            write_sentences(&out_tgt, &bitext.target_sentences())?;
            eprintln!("retained {} pairs, dropped {}", report.retained, report.dropped);
        }
        Command::Align {
            src,
            tgt,
            iterations,
            no_null,
            out,
        } => {
            let bitext = load_bitext(&src, &tgt)?;
            let aligned = align_bitext(&bitext, iterations, !no_null)?;
            let mut w = create(&out)?;
            for a in &aligned.alignments {
                writeln!(w, "{a}")?;
            }
            w.flush()?;
        }
        Command::Extract {
            src,
            tgt,
            alignment,
            iterations,
            max_phrase_len,
            out,
        } => {
            let bitext = load_bitext(&src, &tgt)?;
            let aligned = align_bitext(&bitext, iterations, true)?;
            let alignments = match alignment {
                Some(p) => {
                    let lines = read_lines(open(&p)?)?;
                    if lines.len() != bitext.len() {
                        bail!(DataError(anyhow::anyhow!(
                            "{} alignment lines for {} sentence pairs",
                            lines.len(),
                            bitext.len()
                        )));
                    }
                    lines
                        .iter()
                        .zip(bitext.pairs())
                        .map(|(l, p)| AlignmentMatrix::parse_moses(l, p.source.len(), p.target.len()))
                        .collect::<pivotmt::Result<Vec<_>>>()?
                }
                None => aligned.alignments,
            };
            let table = score_phrase_table(&bitext, &alignments, &aligned.forward, &aligned.backward, max_phrase_len)?;
            let mut w = create(&out)?;
            table.write_moses(&mut w)?;
            w.flush()?;
        }
        Command::Triangulate {
            src_pivot,
            pivot_tgt,
            min_score,
            top_k,
            out,
        } => {
            let a = load_table(&src_pivot, TableRole::Baseline)?;
            let b = load_table(&pivot_tgt, TableRole::Baseline)?;
            let table = triangulate(&a, &b, &TriangulationConfig { min_score, top_k })?;
            let mut w = create(&out)?;
            table.write_moses(&mut w)?;
            w.flush()?;
        }
        Command::MineTranslit {
            pairs,
            table,
            iterations,
            threshold,
            out_pairs,
            out_model,
        } => {
            let mut corpus = WordPairCorpus::new();
            if let Some(p) = pairs {
                for (n, line) in read_lines(open(&p)?)?.iter().enumerate() {
                    if line.trim().is_empty() {
                        continue;
                    }
                    let f: Vec<&str> = line.split('\t').collect();
                    let weight = match f.get(2) {
                        Some(w) => w.trim().parse::<f64>().ok(),
                        None => Some(1.0),
                    };
                    match (f.len(), weight) {
                        (2 | 3, Some(w)) => corpus.push(f[0].trim(), f[1].trim(), w)?,
                        _ => bail!(DataError(anyhow::anyhow!("{}:{}: expected src<TAB>tgt[<TAB>weight]", p.display(), n + 1))),
                    }
                }
            }
            if let Some(t) = table {
                corpus.extend(&WordPairCorpus::from_phrase_table(&load_table(&t, TableRole::Triangulated)?));
            }
            if corpus.is_empty() {
                bail!(DataError(anyhow::anyhow!("no word pairs given (use --pairs or --table)")));
            }
            let result = mine_transliterations(&corpus, iterations, threshold)?;
            let mut w = create(&out_pairs)?;
            write_mined_pairs(&mut w, &result.mined)?;
            w.flush()?;
            let mut w = create(&out_model)?;
            result.model.write(&mut w)?;
            w.flush()?;
            eprintln!("mined {} of {} pairs", result.mined.len(), corpus.len());
        }
        Command::TranslitTable { model, input, k, out } => {
            let model = CharModel::read(open(&model)?)?;
            let words: Vec<String> = read_sentences(&input)?.into_iter().flatten().collect();
            let table = build_translit_table(&model, &words, k)?;
            let mut w = create(&out)?;
            table.write_moses(&mut w)?;
            w.flush()?;
        }
        Command::TrainLm { input, order, out } => {
            let sents = read_sentences(&input)?;
            let lm = train_kn(&sents, order)?;
            let mut w = create(&out)?;
            lm.write_arpa(&mut w)?;
            w.flush()?;
        }
        Command::Synthesize {
            system,
            src,
            tgt,
            out_src,
            out_tgt,
        } => {
            let system = build_system(&system)?;
            let bitext = load_bitext(&src, &tgt)?;
            let syn = synthesize_bitext(&bitext, &system)?;
            debug_assert!(syn.pairs().iter().all(|p| p.provenance == Provenance::Synthetic));
            write_sentences(&out_src, &syn.source_sentences())?;
            write_sentences(&out_tgt, &syn.target_sentences())?;
        }
        Command::Tune {
            system,
            dev_src,
            dev_ref,
            rounds,
            nbest,
            out,
        } => {
            let system = build_system(&system)?;
            let src = read_sentences(&dev_src)?;
            let reference = read_sentences(&dev_ref)?;
            let config = TuneConfig {
                rounds,
                nbest,
                seed: seed.unwrap_or(1),
                ..TuneConfig::default()
            };
            let outcome = tune_weights(&system, &src, &reference, &config)?;
            let mut w = create(&out)?;
            outcome.model.write_weights(&mut w)?;
            w.flush()?;
            eprintln!("dev BLEU {:.2} -> {:.2}", outcome.initial_bleu, outcome.bleu);
        }
        Command::Decode {
            system,
            input,
            nbest,
            out,
        } => {
            let system = build_system(&system)?;
            let sents = match input {
                Some(p) => read_sentences(&p)?,
                None => {
                    let mut buf = Vec::new();
                    io::stdin().read_to_end(&mut buf)?;
                    read_lines(&buf[..])?
                        .iter()
                        .map(|l| l.split_whitespace().map(String::from).collect())
                        .collect()
                }
            };
            let mut w: Box<dyn Write> = match out {
                Some(p) => Box::new(create(&p)?),
                None => Box::new(BufWriter::new(io::stdout().lock())),
            };
            match nbest {
                Some(n) => {
                    for (id, list) in system.nbest_all(&sents, n)?.iter().enumerate() {
                        for d in list {
                            writeln!(w, "{}", format_nbest_line(id, d, &system.model))?;
                        }
                    }
                }
                None => {
                    for s in system.translate_all(&sents)? {
                        writeln!(w, "{}", s.join(" "))?;
                    }
                }
            }
            w.flush()?;
        }
        Command::Score {
            hyp,
            reference,
            max_n,
            labels,
            decimals,
        } => match labels {
            Some(p) => {
                let labels = read_manual_labels(open(&p)?)?;
                let tally = tally_manual(labels.iter().map(|l| (Some(l.judge_id.as_str()), l.category)));
                print!("{}", tally.render(decimals));
            }
            None => {
                let (h, r) = (hyp.expect("required by clap"), reference.expect("required by clap"));
                let (bleu, stats) = corpus_bleu(&read_sentences(&h)?, &read_sentences(&r)?, max_n)?;
                println!(
                    "BLEU = {bleu:.2} (hyp_len={}, ref_len={}, matches={:?}, totals={:?})",
                    stats.hyp_len, stats.ref_len, stats.matches, stats.totals
                );
            }
        },
        Command::Experiment { write_fixture, out } => {
            let config_path = match (write_fixture, cli.config) {
                (Some(dir), _) => {
                    let fx = Fixture::generate(seed.unwrap_or(1), &FixtureSpec::default());
                    fx.write(&dir, seed.unwrap_or(1))?
                }
                (None, Some(c)) => c,
                (None, None) => bail!(UsageError("experiment needs --config or --write-fixture".into())),
            };
            let mut cfg = ExperimentConfig::from_file(&config_path)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let report = run_experiment(&cfg, out.as_deref())?;
            let text = fs::read_to_string(report.work_dir.join("scores.txt"))?;
            print!("{text}");
            eprintln!("manifest: {}", report.work_dir.join("manifest.txt").display());
        }
    }
    Ok(())
}

#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}
impl std::error::Error for UsageError {}

impl std::fmt::Display for DataError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}
impl std::error::Error for DataError {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
