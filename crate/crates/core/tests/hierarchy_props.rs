mod common;

use std::thread;

use cps_hier::hierarchy::{
    check_coherence, finitely_terminal_at, parse_hierarchy, refine, refine_sequence,
    refine_to_fixpoint, serialize_hierarchy, terminal_over, unfold, HierarchyTable, Unfolder,
};
use cps_hier::structure::{disjoint_union, verify_type_morphism, MorphismVerdict, Player};
use cps_hier::testkit::{duplicate_expansion, random_structure, random_structure_on};
use proptest::prelude::*;
use rand::Rng;

use common::{rng, SHAPE};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unfold_is_coherent_and_prefix_closed(seed in any::<u64>()) {
        let mut r = rng(seed);
        let ts = random_structure(&mut r, SHAPE);
        for p in Player::BOTH {
            for t in ts.types(p).labels() {
                let deep = unfold(&ts, p, t, 4).unwrap();
                prop_assert!(check_coherence(&deep).is_valid());
                for n in 1..4 {
                    let shallow = unfold(&ts, p, t, n).unwrap();
                    prop_assert_eq!(&deep.truncate(n).unwrap(), &shallow);
                    prop_assert_eq!(deep.level(1), shallow.level(1));
                }
                let text = serialize_hierarchy(&deep);
                prop_assert_eq!(parse_hierarchy(&text).unwrap(), deep);
            }
        }
    }

    #[test]
    fn refinement_is_monotone_and_bounded(seed in any::<u64>()) {
        let mut r = rng(seed);
        let ts = random_structure(&mut r, SHAPE);
        let seq = refine_sequence(&ts, 8);
        for w in seq.windows(2) {
            prop_assert!(w[1].refines(&w[0]));
        }
        let (fix, depth) = refine_to_fixpoint(&ts);
        prop_assert!(depth < ts.types(Player::One).len() + ts.types(Player::Two).len());
        prop_assert_eq!(&refine(&ts, depth + 5), &fix);
        prop_assert_eq!(&seq[depth.min(8)], &refine(&ts, depth));
    }

    #[test]
    fn preserving_maps_preserve_hierarchies(seed in any::<u64>()) {
        let mut r = rng(seed);
        let dst = random_structure(&mut r, SHAPE);
        let copies = r.gen_range(1..=3);
        let (src, phi) = duplicate_expansion(&mut r, &dst, copies);
        prop_assert_eq!(verify_type_morphism(&src, &dst, &phi).unwrap(), MorphismVerdict::Preserving);
        for p in Player::BOTH {
            for (t, label) in src.types(p).labels().iter().enumerate() {
                let image = dst.types(p).label(phi.apply(p, t));
                for n in 1..=3 {
                    prop_assert_eq!(unfold(&src, p, label, n).unwrap(), unfold(&dst, p, image, n).unwrap());
                }
            }
        }
    }

    #[test]
    fn union_leaves_hierarchies_unchanged(seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = random_structure(&mut r, SHAPE);
        let families = Player::BOTH.map(|p| a.player(p).family().clone());
        let b = random_structure_on(&mut r, a.s(), families, SHAPE.max_types);
        let u = disjoint_union(&a, &b).unwrap();
        for (side, emb) in [(&a, &u.left), (&b, &u.right)] {
            prop_assert_eq!(
                verify_type_morphism(side, &u.structure, &emb.as_candidate(side, &u.structure)).unwrap(),
                MorphismVerdict::Preserving
            );
            for p in Player::BOTH {
                for (t, label) in side.types(p).labels().iter().enumerate() {
                    let tagged = u.structure.types(p).label(emb.apply(p, t));
                    for n in 1..=3 {
                        prop_assert_eq!(unfold(side, p, label, n).unwrap(), unfold(&u.structure, p, tagged, n).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn full_matches_imply_finite_matches(seed in any::<u64>()) {
        let mut r = rng(seed);
        let target = random_structure(&mut r, SHAPE);
        let families = Player::BOTH.map(|p| target.player(p).family().clone());
        let probe = random_structure_on(&mut r, target.s(), families, SHAPE.max_types);
        let full = terminal_over(&target, &probe).unwrap();
        for n in 0..=full.order + 2 {
            let finite = finitely_terminal_at(&target, &probe, n).unwrap();
            for (a, b) in full.rows.iter().zip(&finite.rows) {
                prop_assert_eq!((a.player, &a.probe_type), (b.player, &b.probe_type));
                if let cps_hier::hierarchy::Match::Matched(m) = &a.outcome {
                    match &b.outcome {
                        cps_hier::hierarchy::Match::Matched(mb) => {
                            prop_assert!(m.iter().all(|x| mb.contains(x)));
                            if n >= full.order {
                                prop_assert_eq!(m, mb);
                            }
                        }
                        other => prop_assert!(false, "matched at the fixpoint but {:?} at {}", other, n),
                    }
                }
            }
        }
        prop_assert!(terminal_over(&target, &target).unwrap().all_matched());
    }
}

#[test]
fn concurrent_unfolding_shares_one_table() {
    let mut r = rng(99);
    for _ in 0..20 {
        let ts = random_structure(&mut r, SHAPE);
        let reference = HierarchyTable::for_structure(&ts);
        let mut single = Unfolder::new(&reference, &ts).unwrap();
        for p in Player::BOTH {
            for t in 0..ts.types(p).len() {
                single.point(p, t, 5);
            }
        }
        let shared = HierarchyTable::for_structure(&ts);
        let results: Vec<Vec<_>> = thread::scope(|s| {
            let handles: Vec<_> = (0..8)
                .map(|k| {
                    let (ts, shared) = (&ts, &shared);
                    s.spawn(move || {
                        let mut u = Unfolder::new(shared, ts).unwrap();
                        let mut ids = Vec::new();
                        for n in 1..=5 {
                            for p in Player::BOTH {
                                // Threads walk the types in different orders.
                                let len = ts.types(p).len();
                                for i in 0..len {
                                    let t = (i + k) % len;
                                    ids.push((n, p, t, u.point(p, t, n)));
                                }
                            }
                        }
                        ids.sort();
                        ids
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        for w in results.windows(2) {
            assert_eq!(w[0], w[1], "every thread sees the same representatives");
        }
        assert_eq!(shared.len(), reference.len(), "no duplicate entries");
        for &(n, p, t, id) in &results[0] {
            assert_eq!(shared.export(id), reference.export(single.point(p, t, n)));
        }
    }
}
