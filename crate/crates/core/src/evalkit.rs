//! Corpus BLEU, system deltas, manual-evaluation tallies and error profiles.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use crate::corpus::read_lines;
use crate::error::{Error, Result};

pub const DEFAULT_MAX_N: usize = 4;

/// Sufficient statistics for corpus BLEU. Additive across sentences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BleuStats {
    pub matches: Vec<u64>,
    pub totals: Vec<u64>,
    pub hyp_len: u64,
    pub ref_len: u64,
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts
                .entry(w.iter().map(AsRef::as_ref).collect::<Vec<&str>>())
                .or_default() += 1;
        }
    }
    counts
}

impl BleuStats {
    pub fn zero(max_n: usize) -> Self {
        BleuStats {
            matches: vec![0; max_n],
            totals: vec![0; max_n],
            hyp_len: 0,
            ref_len: 0,
        }
    }

    pub fn max_n(&self) -> usize {
        self.totals.len()
    }

    /// Clipped n-gram matches of one hypothesis against one reference.
    pub fn sentence<S: AsRef<str>, T: AsRef<str>>(hyp: &[S], reference: &[T], max_n: usize) -> Self {
        let mut stats = BleuStats::zero(max_n);
        stats.hyp_len = hyp.len() as u64;
        stats.ref_len = reference.len() as u64;
        for n in 1..=max_n {
            let h = ngram_counts(hyp, n);
            let r = ngram_counts(reference, n);
            stats.totals[n - 1] = hyp.len().saturating_sub(n - 1) as u64;
            stats.matches[n - 1] = h
                .iter()
                .map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0)))
                .sum();
        }
        stats
    }

    pub fn add(&mut self, other: &BleuStats) {
        for n in 0..self.max_n().min(other.max_n()) {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }

    /// BLEU on a 0-100 scale. Orders with no candidate n-grams at all are
    /// left out of the geometric mean; any zero precision gives 0.
    pub fn score(&self) -> f64 {
        if self.hyp_len == 0 {
            return if self.ref_len == 0 { 100.0 } else { 0.0 };
        }
        let mut log_sum = 0.0;
        let mut used = 0usize;
        for (&m, &t) in self.matches.iter().zip(&self.totals) {
            if t == 0 {
                continue;
            }
            if m == 0 {
                return 0.0;
            }
            log_sum += (m as f64 / t as f64).ln();
            used += 1;
        }
        let log_bp = (1.0 - self.ref_len as f64 / self.hyp_len as f64).min(0.0);
        let mean = if used == 0 { 0.0 } else { log_sum / used as f64 };
        100.0 * (mean + log_bp).exp()
    }
}

/// Corpus-level BLEU with one reference per hypothesis.
pub fn corpus_bleu<S: AsRef<str>, T: AsRef<str>>(
    hyps: &[Vec<S>],
    refs: &[Vec<T>],
    max_n: usize,
) -> Result<(f64, BleuStats)> {
    if hyps.len() != refs.len() {
        return Err(Error::LineCountMismatch {
            source_lines: hyps.len(),
            target_lines: refs.len(),
        });
    }
    if max_n == 0 {
        return Err(Error::InvalidArgument("max_n must be at least 1".into()));
    }
    let mut stats = BleuStats::zero(max_n);
    for (h, r) in hyps.iter().zip(refs) {
        stats.add(&BleuStats::sentence(h, r, max_n));
    }
    Ok((stats.score(), stats))
}

/// Rounds half away from zero at `decimals` places, absorbing binary
/// representation error just below the midpoint.
pub fn round_half_up(x: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    let v = x.abs() * scale;
    let r = (v + 0.5 + 1e-7).floor();
    x.signum() * r / scale
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaRow {
    pub label: String,
    pub baseline: f64,
    pub system: f64,
    /// system − baseline, rounded half-up to two decimals.
    pub delta: f64,
}

pub fn delta_report(baseline: f64, system: f64, label: &str) -> DeltaRow {
    DeltaRow {
        label: label.to_string(),
        baseline,
        system,
        delta: round_half_up(system - baseline, 2),
    }
}

pub fn format_delta(delta: f64) -> String {
    if delta == 0.0 {
        "0.00".to_string()
    } else {
        format!("{delta:+.2}")
    }
}

impl fmt::Display for DeltaRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} | {:.2} | {:.2} | {}",
            self.label,
            self.baseline,
            self.system,
            format_delta(self.delta)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ManualCategory {
    Helpful,
    Doubtful,
    Misleading,
}

impl ManualCategory {
    pub const ALL: [ManualCategory; 3] = [
        ManualCategory::Helpful,
        ManualCategory::Doubtful,
        ManualCategory::Misleading,
    ];
}

impl FromStr for ManualCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "helpful" => Ok(ManualCategory::Helpful),
            "doubtful" => Ok(ManualCategory::Doubtful),
            "misleading" => Ok(ManualCategory::Misleading),
            _ => Err(Error::UnknownCategory(s.trim().to_string())),
        }
    }
}

impl fmt::Display for ManualCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ManualCategory::Helpful => "Helpful",
            ManualCategory::Doubtful => "Doubtful",
            ManualCategory::Misleading => "Misleading",
        })
    }
}

/// Counts indexed in `ManualCategory::ALL` order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ManualTally {
    pub counts: [u64; 3],
    pub per_judge: BTreeMap<String, [u64; 3]>,
}

impl ManualTally {
    pub fn from_counts(helpful: u64, doubtful: u64, misleading: u64) -> Self {
        ManualTally {
            counts: [helpful, doubtful, misleading],
            per_judge: BTreeMap::new(),
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn count(&self, c: ManualCategory) -> u64 {
        self.counts[c as usize]
    }

    /// Percentages rounded half-up to `decimals` places; all zero when empty.
    pub fn percentages(&self, decimals: u32) -> [f64; 3] {
        let total = self.total();
        self.counts.map(|c| {
            if total == 0 {
                0.0
            } else {
                round_half_up(100.0 * c as f64 / total as f64, decimals)
            }
        })
    }

    pub fn render(&self, decimals: u32) -> String {
        let judges: Vec<&String> = self.per_judge.keys().collect();
        let mut out = String::from("Category");
        for j in &judges {
            out.push_str(&format!(" | {j}"));
        }
        out.push_str(" | Total | %\n");
        let pct = self.percentages(decimals);
        for (k, cat) in ManualCategory::ALL.iter().enumerate() {
            out.push_str(&cat.to_string());
            for j in &judges {
                out.push_str(&format!(" | {}", self.per_judge[*j][k]));
            }
            out.push_str(&format!(" | {} | {:.*}%\n", self.counts[k], decimals as usize, pct[k]));
        }
        out
    }
}

/// Tallies labels; judges are optional.
pub fn tally_manual<'a>(labels: impl IntoIterator<Item = (Option<&'a str>, ManualCategory)>) -> ManualTally {
    let mut tally = ManualTally::default();
    for (judge, cat) in labels {
        tally.counts[cat as usize] += 1;
        if let Some(j) = judge {
            tally.per_judge.entry(j.to_string()).or_default()[cat as usize] += 1;
        }
    }
    tally
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManualLabel {
    pub sent_id: String,
    pub judge_id: String,
    pub category: ManualCategory,
}

/// Reads `sent_id,judge_id,category` rows; a header row is skipped.
pub fn read_manual_labels<R: BufRead>(reader: R) -> Result<Vec<ManualLabel>> {
    let mut out = Vec::new();
    for (n, line) in read_lines(reader)?.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                format: "manual labels",
                line: n + 1,
                message: "expected sent_id,judge_id,category".into(),
            });
        }
        if n == 0 && fields[2].eq_ignore_ascii_case("category") {
            continue;
        }
        out.push(ManualLabel {
            sent_id: fields[0].to_string(),
            judge_id: fields[1].to_string(),
            category: fields[2].parse()?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ErrorCategory {
    MissingUntranslated,
    WronglyTranslated,
    WordOrder,
    Other,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 4] = [
        ErrorCategory::MissingUntranslated,
        ErrorCategory::WronglyTranslated,
        ErrorCategory::WordOrder,
        ErrorCategory::Other,
    ];
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorCategory::MissingUntranslated => "Missing/Untranslated words",
            ErrorCategory::WronglyTranslated => "Wrongly translated words",
            ErrorCategory::WordOrder => "Word order problems",
            ErrorCategory::Other => "Other",
        })
    }
}

/// Sentence counts per (non-exclusive) error category.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorProfile {
    pub counts: [u64; 4],
    pub sample_size: u64,
}

impl ErrorProfile {
    pub fn percentages(&self, decimals: u32) -> [f64; 4] {
        self.counts.map(|c| {
            if self.sample_size == 0 {
                0.0
            } else {
                round_half_up(100.0 * c as f64 / self.sample_size as f64, decimals)
            }
        })
    }

    pub fn render(&self) -> String {
        let pct = self.percentages(0);
        ErrorCategory::ALL
            .iter()
            .zip(pct)
            .map(|(c, p)| format!("{c} | {p:.0}%\n"))
            .collect()
    }
}

pub fn error_profile(flags: &[Vec<ErrorCategory>], sample_size: usize) -> Result<ErrorProfile> {
    if flags.len() != sample_size {
        return Err(Error::InvalidArgument(format!(
            "{} flag sets for a sample of {sample_size}",
            flags.len()
        )));
    }
    let mut counts = [0u64; 4];
    for set in flags {
        let mut seen = [false; 4];
        for &c in set {
            seen[c as usize] = true;
        }
        for (k, s) in seen.iter().enumerate() {
            counts[k] += u64::from(*s);
        }
    }
    Ok(ErrorProfile {
        counts,
        sample_size: sample_size as u64,
    })
}

/// Aligned plain-text table.
pub fn render_text_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (k, cell) in row.iter().enumerate() {
            if k < widths.len() {
                widths[k] = widths[k].max(cell.chars().count());
            }
        }
    }
    let line = |cells: Vec<&str>| -> String {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c:<w$}"))
            .collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
    out
}

pub fn render_tsv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join("\t") + "\n";
    for row in rows {
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn worked_example() {
        let (b, st) = corpus_bleu(&[toks("the cat is on the mat")], &[toks("the cat sat on the mat")], 2).unwrap();
        assert_eq!(st.matches, vec![5, 3]);
        assert_eq!(st.totals, vec![6, 5]);
        assert!((b - 70.71).abs() < 0.01);
    }

    #[test]
    fn clipping() {
        let (b, st) = corpus_bleu(&[toks("the the the")], &[toks("the cat")], 1).unwrap();
        assert_eq!(st.matches, vec![1]);
        assert!((b - 100.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn identity_and_edge_cases() {
        let c = vec![toks("a b c d e"), toks("x")];
        assert_eq!(corpus_bleu(&c, &c, 4).unwrap().0, 100.0);
        let empty: Vec<Vec<String>> = vec![vec![]];
        assert_eq!(corpus_bleu(&empty, &empty, 4).unwrap().0, 100.0);
        assert_eq!(corpus_bleu(&empty, &[toks("a")], 4).unwrap().0, 0.0);
        assert!(corpus_bleu(&c, &c[..1], 4).is_err());
        assert!(corpus_bleu(&c, &c, 0).is_err());
    }

    #[test]
    fn brevity_penalty() {
        let (b, _) = corpus_bleu(&[toks("a b")], &[toks("a b c d")], 1).unwrap();
        assert!((b - 100.0 * (1.0f64 - 2.0).exp()).abs() < 1e-9);
    }

    #[test]
    fn deltas() {
        assert_eq!(delta_report(22.52, 23.97, "en-hi +Syn").delta, 1.45);
        assert_eq!(delta_report(21.28, 22.67, "hi-en +Syn").delta, 1.39);
        let zero = delta_report(20.0, 20.0, "x");
        assert_eq!(zero.to_string(), "x | 20.00 | 20.00 | 0.00");
        assert_eq!(
            delta_report(22.52, 23.97, "en-hi").to_string(),
            "en-hi | 22.52 | 23.97 | +1.45"
        );
        assert_eq!(delta_report(23.97, 22.52, "x").delta, -1.45);
    }

    #[test]
    fn manual_tallies() {
        assert_eq!(ManualTally::from_counts(354, 377, 232).percentages(0), [37.0, 39.0, 24.0]);
        assert_eq!(ManualTally::from_counts(183, 111, 34).percentages(1), [55.8, 33.8, 10.4]);
        let t = tally_manual([(None, ManualCategory::Doubtful)]);
        assert_eq!(t.percentages(0), [0.0, 100.0, 0.0]);
        assert!(matches!("bad".parse::<ManualCategory>(), Err(Error::UnknownCategory(c)) if c == "bad"));
    }

    #[test]
    fn labels_csv() {
        let csv = "sent_id,judge_id,category\n1,j1,helpful\n1,j2,Misleading\n2,j1,doubtful\n";
        let labels = read_manual_labels(csv.as_bytes()).unwrap();
        assert_eq!(labels.len(), 3);
        let t = tally_manual(labels.iter().map(|l| (Some(l.judge_id.as_str()), l.category)));
        assert_eq!(t.per_judge["j1"], [1, 1, 0]);
        assert!(t.render(0).contains("Helpful | 1 | 0 | 1 | 33%"));
        assert!(read_manual_labels("1,j1,great\n".as_bytes()).is_err());
    }

    #[test]
    fn error_profiles() {
        use ErrorCategory::*;
        let mut flags = vec![Vec::new(); 100];
        for (k, set) in flags.iter_mut().enumerate() {
            if k < 45 {
                set.push(MissingUntranslated);
            }
            if k < 74 {
                set.push(WronglyTranslated);
            }
            if k < 84 {
                set.push(WordOrder);
            }
            if k >= 87 {
                set.push(Other);
            }
        }
        let p = error_profile(&flags, 100).unwrap();
        assert_eq!(p.percentages(0), [45.0, 74.0, 84.0, 13.0]);
        assert!(error_profile(&flags, 99).is_err());
    }

    #[test]
    fn text_tables() {
        let t = render_text_table(&["a", "bbb"], &[vec!["xx".into(), "y".into()]]);
        assert_eq!(t, "a   bbb\nxx  y\n");
        assert_eq!(render_tsv(&["a", "b"], &[vec!["1".into(), "2".into()]]), "a\tb\n1\t2\n");
    }
}
