use std::collections::BTreeSet;

use gsit_core::maskgen::{iem, materialize, pattern_of, validate, Patterns, Validation};
use gsit_core::{BlockPattern, Modality, SegmentLayout, StructureName};

use Modality::{Audio as A, Text as T, Vision as V};

type Set = BTreeSet<(Modality, Modality)>;

fn set(pairs: &[(Modality, Modality)]) -> Set {
    pairs.iter().copied().collect()
}

fn allowed(p: &BlockPattern) -> Set {
    p.allowed().into_iter().collect()
}

/// Golden allow sets, row attends to column.
fn golden(s: StructureName) -> (Set, Option<Set>) {
    match s {
        StructureName::Original => (set(&[(T, V), (V, A), (A, T)]), Some(set(&[(T, A), (V, T), (A, V)]))),
        StructureName::Structure1 => (set(&[(T, A), (V, A), (A, T)]), Some(set(&[(T, V), (V, T), (A, T)]))),
        StructureName::Structure2 => (set(&[(T, V), (V, T), (A, V)]), Some(set(&[(T, A), (V, A), (A, T)]))),
        StructureName::Structure3 => (set(&[(T, V), (V, A), (A, V)]), Some(set(&[(T, A), (V, T), (A, T)]))),
        StructureName::SelfOnly => (set(&[(T, V), (T, A), (V, T), (V, A), (A, T), (A, V)]), None),
        StructureName::Iem => (set(&[(T, T), (V, V), (A, A)]), None),
    }
}

#[test]
fn structures_match_golden_allow_sets() {
    for s in StructureName::ALL {
        let (first, second) = golden(s);
        match (pattern_of(s), second) {
            (Patterns::Pair { forward, backward }, Some(b)) => {
                assert_eq!(allowed(&forward), first, "{s:?} forward");
                assert_eq!(allowed(&backward), b, "{s:?} backward");
            }
            (Patterns::Single(p), None) => assert_eq!(allowed(&p), first, "{s:?}"),
            (other, _) => panic!("{s:?}: unexpected shape {other:?}"),
        }
    }
    assert_eq!(allowed(&iem()), golden(StructureName::Iem).0);
}

#[test]
fn only_self_only_is_disorder_prone() {
    for s in StructureName::ALL {
        let (a, b) = pattern_of(s).streams();
        let safe = validate(&a).is_fusion_safe() && validate(&b).is_fusion_safe();
        assert_eq!(!safe, s == StructureName::SelfOnly, "{s:?}");
    }
    let (so, _) = pattern_of(StructureName::SelfOnly).streams();
    assert_eq!(validate(&so), Validation::Disorder(vec![T, V, A]));
}

#[test]
fn fusion_structures_cover_every_cross_pair() {
    let all: Set = Modality::ALL
        .into_iter()
        .flat_map(|i| Modality::ALL.into_iter().filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    for s in [
        StructureName::Original,
        StructureName::Structure2,
        StructureName::Structure3,
    ] {
        let (f, b) = pattern_of(s).streams();
        let (f, b) = (allowed(&f), allowed(&b));
        assert!(f.is_disjoint(&b), "{s:?}");
        assert_eq!(&f | &b, all, "{s:?}");
    }
    // Structure 1 repeats (a,t) and never lets audio rows read vision.
    let (f, b) = pattern_of(StructureName::Structure1).streams();
    let union = &allowed(&f) | &allowed(&b);
    assert_eq!(&all - &union, set(&[(A, V)]));
    assert_eq!(&allowed(&f) & &allowed(&b), set(&[(A, T)]));
}

#[test]
fn materialized_masks() {
    let (fwd, _) = pattern_of(StructureName::Original).streams();
    let m = materialize(&fwd, &SegmentLayout::new(1, 1, 1).unwrap());
    for r in 0..3 {
        for c in 0..3 {
            let open = matches!((r, c), (0, 1) | (1, 2) | (2, 0));
            assert_eq!(m[(r, c)], if open { 0.0 } else { f64::NEG_INFINITY });
        }
    }
    let m = materialize(&iem(), &SegmentLayout::new(2, 1, 1).unwrap());
    let blocks = [0, 0, 1, 2];
    for r in 0..4 {
        for c in 0..4 {
            let open = blocks[r] == blocks[c];
            assert_eq!(m[(r, c)], if open { 0.0 } else { f64::NEG_INFINITY });
        }
    }
    for s in StructureName::ALL {
        let (a, _) = pattern_of(s).streams();
        let m = materialize(&a, &SegmentLayout::new(1, 1, 1).unwrap());
        assert_eq!(m.data().iter().filter(|&&x| x == 0.0).count(), a.allow_count());
    }
}

#[test]
fn ascii_grid() {
    let (fwd, _) = pattern_of(StructureName::Original).streams();
    assert_eq!(fwd.to_ascii(), "  t v a\nt . # .\nv . . #\na # . .\n");
}
