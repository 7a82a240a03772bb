mod common;

use std::collections::BTreeMap;
use std::sync::Arc;

use common::{enumerate_derivations, random_instance, rng};
use pivotmt::decoder::{decode, DecoderConfig, TranslationSystem};
use pivotmt::ngramlm::train_kn;
use pivotmt::phrasetab::{PhraseScores, PhraseTable, TableRole};
use pivotmt::pivot::DecodingTables;

#[test]
fn best_score_equals_exhaustive_search() {
    let mut r = rng(51);
    let stack = DecoderConfig::default().stack_size;
    for case in 0..200 {
        let inst = random_instance(&mut r);
        let all = enumerate_derivations(&inst.lattice, &inst.model, &inst.lm, inst.limit);
        let want = all.iter().map(|d| d.score).fold(f64::NEG_INFINITY, f64::max);
        let d = decode(&inst.lattice, &inst.model, &inst.lm, inst.limit, stack).unwrap();
        assert!(!d.monotone_fallback);
        assert!((d.best_score() - want).abs() < 1e-9, "case {case}: {} vs {want}", d.best_score());

        let best = d.best();
        assert!((best.score - want).abs() < 1e-9);
        assert!((inst.model.dot(&best.features) - best.score).abs() < 1e-9);
        let mut covered = vec![0; inst.lattice.source.len()];
        let mut last = 0;
        for s in &best.steps {
            assert!(s.start.abs_diff(last) <= inst.limit, "case {case}: jump over the limit");
            last = s.end;
            (s.start..s.end).for_each(|i| covered[i] += 1);
        }
        assert!(covered.iter().all(|&c| c == 1));
    }
}

#[test]
fn nbest_follows_enumeration_order() {
    let mut r = rng(52);
    for case in 0..100 {
        let inst = random_instance(&mut r);
        let mut by_string: BTreeMap<Vec<String>, f64> = BTreeMap::new();
        for e in enumerate_derivations(&inst.lattice, &inst.model, &inst.lm, inst.limit) {
            let slot = by_string.entry(e.target).or_insert(f64::NEG_INFINITY);
            *slot = slot.max(e.score);
        }
        let mut want: Vec<f64> = by_string.values().copied().collect();
        want.sort_by(|a, b| b.total_cmp(a));
        let d = decode(&inst.lattice, &inst.model, &inst.lm, inst.limit, 1000).unwrap();
        let got = d.nbest(5);
        assert_eq!(got.len(), want.len().min(5), "case {case}");
        for (g, w) in got.iter().zip(&want) {
            assert!((g.score - w).abs() < 1e-9, "case {case}: {} vs {w}", g.score);
            assert!((by_string[&g.target] - g.score).abs() < 1e-9);
        }
    }
}

#[test]
fn larger_stacks_never_score_lower() {
    let mut r = rng(53);
    for _ in 0..100 {
        let inst = random_instance(&mut r);
        let wide = decode(&inst.lattice, &inst.model, &inst.lm, inst.limit, 10_000).unwrap().best_score();
        for stack in [1, 2, 5] {
            let narrow = decode(&inst.lattice, &inst.model, &inst.lm, inst.limit, stack).unwrap().best_score();
            assert!(narrow <= wide + 1e-9);
        }
    }
}

#[test]
fn uncovered_words_are_transliterated_or_passed_through() {
    let mut t = PhraseTable::new("b", TableRole::Baseline);
    t.insert(vec!["a".into()], vec!["x".into()], PhraseScores::uniform(0.9));
    let lm = train_kn(&[vec!["x", "q"]], 2).unwrap();
    let sys = TranslationSystem::new(DecodingTables::single(t), Arc::new(lm), DecoderConfig::default()).unwrap();
    let out = sys.translate(&["a".into(), "q".into()]).unwrap();
    assert_eq!(out, ["x", "q"]);
    assert!(sys.translate(&[]).unwrap().is_empty());
}
