mod common;

use std::collections::BTreeSet;

use common::*;
use geoel::closure::{compute_closure, ClosureMode};
use geoel::kb::{parse_normalized_str, ConceptId, NormalizedAxiom, Variant};
use geoel::normalize::{normalize, parse_input};
use geoel::reasoner::classify;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

fn engine_axioms(dc: &geoel::closure::DeductiveClosure) -> BTreeSet<NormalizedAxiom> {
    let mut out = BTreeSet::new();
    for v in Variant::GCIS {
        out.extend(dc.axioms(v).unwrap());
    }
    out
}

#[test]
fn saturation_matches_naive_fixpoint() {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(11);
    for _ in 0..300 {
        let t = random_theory(&mut rng, 6, 3, 15);
        let (s, _, links) = classify(&t);
        let naive = naive_saturation(&t);
        let n = t.signature.num_concepts();
        for a in 0..n {
            for b in 0..n {
                assert_eq!(
                    s.holds(ConceptId(a as u32), ConceptId(b as u32)),
                    naive.holds(a, b),
                    "S mismatch at ({a},{b}) for\n{}",
                    geoel::kb::serialize_theory(&t)
                );
            }
        }
        for r in t.signature.role_ids() {
            let ours: BTreeSet<_> = links.pairs(r).iter().map(|&(a, b)| (a.0, r.0, b.0)).collect();
            let theirs: BTreeSet<_> = naive.links.iter().copied().filter(|l| l.1 == r.0).collect();
            assert_eq!(ours, theirs);
        }
    }
}

#[test]
fn closure_matches_naive_and_modes_agree() {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(12);
    for _ in 0..200 {
        let t = random_theory(&mut rng, 6, 3, 15);
        let (s, rh, _) = classify(&t);
        let dc = compute_closure(&t, s, rh, ClosureMode::materialized()).unwrap();
        let ours = engine_axioms(&dc);
        let naive = naive_closure(&t).axioms();
        if ours != naive {
            let only_ours: Vec<String> = ours.difference(&naive).map(|a| a.to_line(&t.signature)).collect();
            let only_naive: Vec<String> = naive.difference(&ours).map(|a| a.to_line(&t.signature)).collect();
            panic!(
                "closure mismatch for\n{}\nonly engine: {:?}\nonly naive: {:?}",
                geoel::kb::serialize_theory(&t),
                &only_ours[..only_ours.len().min(10)],
                &only_naive[..only_naive.len().min(10)]
            );
        }
        for ax in all_gci_axioms(t.signature.num_concepts(), t.signature.num_roles()) {
            assert_eq!(dc.entails(&ax).unwrap(), dc.entails_by_rules(&ax).unwrap(), "{ax:?}");
        }
        for ax in t.axioms() {
            assert!(dc.entails(ax).unwrap());
        }
    }
}

#[test]
fn closure_sound_in_small_models() {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(13);
    for _ in 0..60 {
        let t = random_theory(&mut rng, 4, 1, 8);
        let (s, rh, _) = classify(&t);
        let dc = compute_closure(&t, s, rh, ClosureMode::materialized()).unwrap();
        let members: Vec<NormalizedAxiom> = engine_axioms(&dc).into_iter().collect();
        for d in 1..=2 {
            for_each_model(&t, d, |m| {
                for ax in &members {
                    assert!(m.satisfies(ax), "{ax:?} fails in a model of\n{}", geoel::kb::serialize_theory(&t));
                }
            });
        }
    }
}

#[test]
fn normalization_is_conservative_on_original_names() {
    let text = "sub(A, and(B, some(r, and(C, D))))\nsub(some(r, C), E)\nsub(and(E, B), F)\n";
    let mut sig = geoel::kb::Signature::new();
    let input = parse_input(text, &mut sig).unwrap();
    let (t, _) = normalize(&input, sig);
    let by_hand = parse_normalized_str(
        "GCI0 A B\nGCI0 A X\nGCI2 X r Y\nGCI0 Y C\nGCI0 Y D\nGCI3 r C E\nGCI1 E B F\n",
    )
    .unwrap();
    let (s1, _, _) = classify(&t);
    let (s2, _, _) = classify(&by_hand);
    for a in ["A", "B", "C", "D", "E", "F"] {
        for b in ["A", "B", "C", "D", "E", "F"] {
            let x = s1.holds(t.signature.concept(a).unwrap(), t.signature.concept(b).unwrap());
            let y = s2.holds(by_hand.signature.concept(a).unwrap(), by_hand.signature.concept(b).unwrap());
            assert_eq!(x, y, "{a} ⊑ {b}");
        }
    }
    assert!(s1.holds(t.signature.concept("A").unwrap(), t.signature.concept("F").unwrap()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn adding_axioms_is_monotone(seed in any::<u64>(), extra in 1usize..5) {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let t = random_theory(&mut rng, 5, 2, 10);
        let more = random_theory(&mut rng, 5, 2, extra);
        let mut joined = t.clone();
        for ax in more.axioms().iter().take(extra) {
            // both theories share the declared signature, so ids line up
            joined.push(*ax);
        }
        let (s1, _, _) = classify(&t);
        let (s2, _, _) = classify(&joined);
        for a in t.signature.concept_ids() {
            for b in s1.supers(a) {
                prop_assert!(s2.holds(a, b));
            }
        }
    }
}
