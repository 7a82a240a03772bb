//! Phrase-table triangulation through a pivot language, and registration of
//! several tables for log-linear decoding.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::phrasetab::{prune_table, Phrase, PhraseScores, PhraseTable, TableRole};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangulationConfig {
    /// Entries whose phi(t|s) falls below this are dropped.
    pub min_score: f64,
    /// Targets kept per source phrase after thresholding.
    pub top_k: usize,
}

impl Default for TriangulationConfig {
    fn default() -> Self {
        TriangulationConfig {
            min_score: 1e-7,
            top_k: 20,
        }
    }
}

impl TriangulationConfig {
    /// No thresholding and no pruning.
    pub fn unpruned() -> Self {
        TriangulationConfig {
            min_score: 0.0,
            top_k: usize::MAX,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.min_score) {
            return Err(Error::InvalidArgument(format!(
                "min score {} outside [0, 1)",
                self.min_score
            )));
        }
        if self.top_k == 0 {
            return Err(Error::InvalidArgument("top_k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Induces a source→target table from source→pivot and pivot→target tables.
///
/// Every feature of an output pair (s, t) is the sum over shared pivot
/// phrases p of the product of the matching features: forward features
/// multiply forward features, e.g. phi(t|s) = Σ_p phi(p|s)·phi(t|p), and
/// backward ones multiply backward ones, phi(s|t) = Σ_p phi(s|p)·phi(p|t).
pub fn triangulate(
    src_pivot: &PhraseTable,
    pivot_tgt: &PhraseTable,
    config: &TriangulationConfig,
) -> Result<PhraseTable> {
    config.validate()?;
    if let (Some(left), Some(right)) = (&src_pivot.target_lang, &pivot_tgt.source_lang) {
        if left != right {
            return Err(Error::VocabularyMismatch {
                left: left.clone(),
                right: right.clone(),
            });
        }
    }
    let mut out = PhraseTable::new(
        format!("{}*{}", src_pivot.name, pivot_tgt.name),
        TableRole::Triangulated,
    );
    out.source_lang = src_pivot.source_lang.clone();
    out.target_lang = pivot_tgt.target_lang.clone();

    for (source, pivots) in src_pivot.sources() {
        let mut acc: BTreeMap<&Phrase, [f64; 4]> = BTreeMap::new();
        for (pivot, first) in pivots {
            let Some(targets) = pivot_tgt.candidates(pivot) else {
                continue;
            };
            let first = first.to_array();
            for (target, second) in targets {
                let second = second.to_array();
                let slot = acc.entry(target).or_insert([0.0; 4]);
                for k in 0..4 {
                    slot[k] += first[k] * second[k];
                }
            }
        }
        for (target, scores) in acc {
            if scores[0] >= config.min_score {
                out.insert(source.clone(), target.clone(), PhraseScores::from_array(scores));
            }
        }
    }
    if config.top_k == usize::MAX {
        return Ok(out);
    }
    prune_table(&out, config.top_k)
}

/// How several phrase tables enter a system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombineMode {
    /// Data are merged at the bitext level; the decoder sees one feature
    /// block.
    ConcatData,
    /// Each table contributes its own block of four features.
    SeparateFeatures,
}

impl FromStr for CombineMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "concat" | "concat-data" => Ok(CombineMode::ConcatData),
            "separate" | "separate-features" => Ok(CombineMode::SeparateFeatures),
            other => Err(Error::InvalidArgument(format!("unknown combine mode '{other}'"))),
        }
    }
}

/// Phrase tables registered for decoding, one feature block each.
#[derive(Debug, Clone)]
pub struct DecodingTables {
    pub mode: CombineMode,
    pub tables: Vec<PhraseTable>,
    /// When set, an option absent from a table scores that table's features
    /// at the floor; otherwise they contribute nothing.
    pub absent_at_floor: bool,
}

impl DecodingTables {
    pub fn single(table: PhraseTable) -> Self {
        DecodingTables {
            mode: CombineMode::SeparateFeatures,
            tables: vec![table],
            absent_at_floor: true,
        }
    }

    pub fn block_count(&self) -> usize {
        self.tables.len()
    }

    pub fn max_source_len(&self) -> usize {
        self.tables.iter().map(PhraseTable::max_source_len).max().unwrap_or(0)
    }
}

/// Registers tables for decoding. In concat-data mode the tables are merged
/// into a single block, first table winning on duplicate pairs.
pub fn combine_tables(tables: Vec<PhraseTable>, mode: CombineMode) -> Result<DecodingTables> {
    if tables.is_empty() {
        return Err(Error::Empty("phrase table list"));
    }
    let tables = match mode {
        CombineMode::SeparateFeatures => tables,
        CombineMode::ConcatData => {
            let mut iter = tables.into_iter();
            let mut merged = iter.next().expect("non-empty");
            for table in iter {
                for (s, t, sc) in table.iter() {
                    if merged.get(s, t).is_none() {
                        merged.insert(s.clone(), t.clone(), sc);
                    }
                }
            }
            vec![merged]
        }
    };
    Ok(DecodingTables {
        mode,
        tables,
        absent_at_floor: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Phrase {
        s.split_whitespace().map(String::from).collect()
    }

    fn table(name: &str, rows: &[(&str, &str, f64)]) -> PhraseTable {
        let mut t = PhraseTable::new(name, TableRole::Baseline);
        for &(s, tg, v) in rows {
            t.insert(p(s), p(tg), PhraseScores::uniform(v));
        }
        t
    }

    #[test]
    fn identity_chain() {
        let a = table("a", &[("u1", "e1", 1.0)]);
        let b = table("b", &[("e1", "h1", 1.0)]);
        let t = triangulate(&a, &b, &TriangulationConfig::default()).unwrap();
        assert_eq!(t.get(&p("u1"), &p("h1")).unwrap(), PhraseScores::uniform(1.0));
        assert_eq!(t.role, TableRole::Triangulated);
    }

    #[test]
    fn sum_over_two_pivots() {
        // backward features: p(u1|e1) = p(u1|e2) = 0.5, p(e1|h1) = 0.4, p(e2|h1) = 0.6
        let mut a = PhraseTable::new("ue", TableRole::Baseline);
        a.insert(p("u1"), p("e1"), PhraseScores::from_array([1.0, 1.0, 0.5, 0.5]));
        a.insert(p("u1"), p("e2"), PhraseScores::from_array([1.0, 1.0, 0.5, 0.5]));
        let mut b = PhraseTable::new("eh", TableRole::Baseline);
        b.insert(p("e1"), p("h1"), PhraseScores::from_array([1.0, 1.0, 0.4, 0.4]));
        b.insert(p("e2"), p("h1"), PhraseScores::from_array([1.0, 1.0, 0.6, 0.6]));
        let t = triangulate(&a, &b, &TriangulationConfig::unpruned()).unwrap();
        let sc = t.get(&p("u1"), &p("h1")).unwrap();
        assert!((sc.phi_src_given_tgt - 0.5).abs() < 1e-15);
        assert!((sc.phi_tgt_given_src - 2.0).abs() < 1e-15);
    }

    #[test]
    fn disjoint_pivots_give_empty_table() {
        let a = table("a", &[("u1", "e1", 1.0)]);
        let b = table("b", &[("e2", "h1", 1.0)]);
        assert!(triangulate(&a, &b, &TriangulationConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn pivot_language_must_match() {
        let a = table("a", &[("u1", "e1", 1.0)]).with_languages("ur", "en");
        let b = table("b", &[("e1", "h1", 1.0)]).with_languages("fr", "hi");
        assert!(matches!(
            triangulate(&a, &b, &TriangulationConfig::default()),
            Err(Error::VocabularyMismatch { .. })
        ));
        let b = b.with_languages("en", "hi");
        let t = triangulate(&a, &b, &TriangulationConfig::default()).unwrap();
        assert_eq!(t.source_lang.as_deref(), Some("ur"));
        assert_eq!(t.target_lang.as_deref(), Some("hi"));
    }

    #[test]
    fn threshold_and_top_k() {
        let a = table("a", &[("u", "e1", 0.5), ("u", "e2", 0.3), ("u", "e3", 0.2)]);
        let b = table("b", &[("e1", "h1", 1.0), ("e2", "h2", 1.0), ("e3", "h3", 1.0)]);
        let cfg = TriangulationConfig {
            min_score: 0.25,
            top_k: 10,
        };
        assert_eq!(triangulate(&a, &b, &cfg).unwrap().len(), 2);
        let cfg = TriangulationConfig {
            min_score: 0.0,
            top_k: 1,
        };
        let t = triangulate(&a, &b, &cfg).unwrap();
        assert_eq!(t.len(), 1);
        assert!(t.get(&p("u"), &p("h1")).is_some());
        assert!(TriangulationConfig { min_score: 1.0, top_k: 1 }.validate().is_err());
    }

    #[test]
    fn combining() {
        assert!(combine_tables(vec![], CombineMode::SeparateFeatures).is_err());
        let a = table("a", &[("x", "y", 1.0)]);
        let b = table("b", &[("z", "w", 1.0), ("x", "y", 0.5)]);
        let sep = combine_tables(vec![a.clone(), b.clone()], CombineMode::SeparateFeatures).unwrap();
        assert_eq!(sep.block_count(), 2);
        let cat = combine_tables(vec![a, b], CombineMode::ConcatData).unwrap();
        assert_eq!(cat.block_count(), 1);
        assert_eq!(cat.tables[0].len(), 2);
        assert_eq!(cat.tables[0].get(&p("x"), &p("y")).unwrap().phi_tgt_given_src, 1.0);
    }
}
