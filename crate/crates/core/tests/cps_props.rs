mod common;

use std::sync::Arc;

use cps_hier::cps::{
    cps_from_prior, lift_family, marginal_cps, pushforward_cps, validate_cps, validate_cps_with,
    ChainRuleSearch,
};
use cps_hier::testkit::{labeled_space, random_array, random_cps, random_event, random_family};
use cps_hier::{AtomMap, Event, FiniteMeasure, FiniteSpace, Rational};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

use common::{brute_force_is_cps, rng};

fn random_measure(r: &mut impl Rng, space: &Arc<FiniteSpace>, full_support: bool) -> FiniteMeasure {
    let lo = i64::from(full_support);
    let mut w: Vec<i64> = (0..space.len()).map(|_| r.gen_range(lo..=4)).collect();
    if w.iter().all(|&x| x == 0) {
        w[0] = 1;
    }
    let total: i64 = w.iter().sum();
    FiniteMeasure::from_masses(space, w.iter().map(|&x| Rational::new(x, total)).collect()).unwrap()
}

fn random_map(r: &mut impl Rng, x: &Arc<FiniteSpace>, y: &Arc<FiniteSpace>) -> AtomMap {
    let img: Vec<usize> = (0..x.len()).map(|_| r.gen_range(0..y.len())).collect();
    AtomMap::from_fn(x, y, |a| img[a])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pushforward_conserves_mass_and_composes(seed in any::<u64>()) {
        let mut r = rng(seed);
        let x = labeled_space("x", r.gen_range(1..=6));
        let y = labeled_space("y", r.gen_range(1..=5));
        let z = labeled_space("z", r.gen_range(1..=4));
        let m = random_measure(&mut r, &x, false);
        let (f, g) = (random_map(&mut r, &x, &y), random_map(&mut r, &y, &z));
        let fm = m.pushforward(&f).unwrap();
        prop_assert!(fm.masses().iter().sum::<Rational>().is_one());
        for b in 0..y.len() {
            let pre = f.preimage(&Event::singleton(&y, b)).unwrap();
            prop_assert_eq!(fm.mass(b), &m.measure_of(&pre).unwrap());
        }
        prop_assert_eq!(fm.pushforward(&g).unwrap(), m.pushforward(&f.then(&g).unwrap()).unwrap());
    }

    #[test]
    fn measure_of_is_additive(seed in any::<u64>()) {
        let mut r = rng(seed);
        let x = labeled_space("x", r.gen_range(1..=8));
        let m = random_measure(&mut r, &x, false);
        let (e1, e2) = (random_event(&mut r, &x), random_event(&mut r, &x));
        let e2 = Event::from_indices(&x, e2.atoms().filter(|&a| !e1.contains(a)));
        prop_assert!(e1.is_disjoint(&e2));
        prop_assert_eq!(
            m.measure_of(&e1.union(&e2)).unwrap(),
            &m.measure_of(&e1).unwrap() + &m.measure_of(&e2).unwrap()
        );
        prop_assert!(m.measure_of(&Event::empty(&x)).unwrap().is_zero());
        prop_assert!(m.measure_of(&Event::full(&x)).unwrap().is_one());
    }

    #[test]
    fn bayes_conditioning_gives_a_cps(seed in any::<u64>()) {
        let mut r = rng(seed);
        let x = labeled_space("x", r.gen_range(1..=6));
        let prior = random_measure(&mut r, &x, true);
        let with_full = r.gen_bool(0.5);
        let family = random_family(&mut r, &x, 4, with_full);
        let cps = cps_from_prior(&prior, &family).unwrap();
        prop_assert!(brute_force_is_cps(&cps));
    }

    #[test]
    fn restricted_and_exhaustive_search_agree(seed in any::<u64>()) {
        let mut r = rng(seed);
        let array = random_array(&mut r, 8, 4);
        let full = validate_cps(&array);
        let restricted = validate_cps_with(&array, ChainRuleSearch::restricted());
        prop_assert_eq!(full.is_valid(), restricted.is_valid());
        prop_assert_eq!(full.is_valid(), brute_force_is_cps(&array));
    }

    #[test]
    fn marginal_sums_fibers_and_equals_projection_pushforward(seed in any::<u64>()) {
        let mut r = rng(seed);
        let x = labeled_space("x", r.gen_range(1..=3));
        let y = labeled_space("y", r.gen_range(1..=3));
        let base = random_family(&mut r, &x, 3, true);
        let lifted = lift_family(&base, &y);
        let cps = random_cps(&mut r, lifted.family());
        let marginal = marginal_cps(&cps).unwrap();
        prop_assert!(validate_cps(&marginal).is_valid());
        let prod = lifted.product_space();
        let proj = AtomMap::from_fn(prod, &x, |a| prod.split(a).0);
        prop_assert_eq!(&marginal, &pushforward_cps(&cps, &proj, &base).unwrap());
        for (m, joint) in marginal.conditionals().iter().zip(cps.conditionals()) {
            for xi in 0..x.len() {
                let fiber: Rational = (0..y.len()).map(|yi| joint.mass(prod.pair(xi, yi)).clone()).sum();
                prop_assert_eq!(m.mass(xi), &fiber);
            }
        }
    }

    #[test]
    fn pushforward_cps_is_functorial(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (cps, f, target) = cps_hier::testkit::random_admissible_pushforward(&mut r, 5, 4);
        let y = f.codomain().clone();
        // A relabelling of Y keeps the family admissible.
        let mut perm: Vec<usize> = (0..y.len()).collect();
        perm.shuffle(&mut r);
        let z = labeled_space("z", y.len());
        let g = AtomMap::from_fn(&y, &z, |a| perm[a]);
        let target_z = cps_hier::ConditioningFamily::new(
            &z,
            target.events().iter().map(|e| Event::from_indices(&z, e.atoms().map(|a| perm[a]))).collect(),
        )
        .unwrap();
        let once = pushforward_cps(&cps, &f, &target).unwrap();
        prop_assert!(brute_force_is_cps(&once));
        let twice = pushforward_cps(&once, &g, &target_z).unwrap();
        let direct = pushforward_cps(&cps, &f.then(&g).unwrap(), &target_z).unwrap();
        prop_assert_eq!(twice, direct);
    }
}

#[test]
fn collapsing_types_then_projecting_is_the_marginal() {
    let mut r = rng(7);
    for _ in 0..100 {
        let s = labeled_space("s", r.gen_range(1..=3));
        let t = labeled_space("t", 2);
        let one = labeled_space("o", 1);
        let base = random_family(&mut r, &s, 3, true);
        let src = lift_family(&base, &t);
        let mid = lift_family(&base, &one);
        let cps = random_cps(&mut r, src.family());
        let (sp, mp) = (src.product_space(), mid.product_space());
        let collapse = AtomMap::from_fn(sp, mp, |a| mp.pair(sp.split(a).0, 0));
        let pushed = pushforward_cps(&cps, &collapse, mid.family()).unwrap();
        assert!(brute_force_is_cps(&pushed));
        let proj = AtomMap::from_fn(mp, &s, |a| mp.split(a).0);
        let via = pushforward_cps(&pushed, &proj, &base).unwrap();
        assert_eq!(via, marginal_cps(&cps).unwrap());
    }
}

#[test]
fn mismatched_target_family_is_rejected() {
    let x = labeled_space("x", 3);
    let y = labeled_space("y", 2);
    let f = AtomMap::from_fn(&x, &y, |a| a.min(1));
    let family = cps_hier::ConditioningFamily::trivial(&x);
    let cps = random_cps(&mut rng(1), &family);
    let target =
        cps_hier::ConditioningFamily::new(&y, vec![Event::full(&y), Event::singleton(&y, 1)])
            .unwrap();
    assert!(matches!(
        pushforward_cps(&cps, &f, &target),
        Err(cps_hier::cps::CpsError::FamilyMismatch(_))
    ));
}
