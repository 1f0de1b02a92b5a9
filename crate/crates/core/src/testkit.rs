//! Fixtures and random generators for tests and fuzzing.
//!
//! Enabled with the `testkit` feature. Generated values are always exact and
//! use small denominators so that failures are readable.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::cps::{lift_family, ConditionalArray, ConditioningFamily, Cps};
use crate::measure::{AtomMap, Event, FiniteMeasure, FiniteSpace};
use crate::rational::Rational;
use crate::structure::{parse_structure, MorphismCandidate, Player, PlayerParts, TypeStructure};

/// `S = {s}`, one type per player, forced point-mass beliefs.
pub const DEGENERATE: &str = "\
cps-hier v1
S: s
player 1
B: {s}
T: u
belief u
  given {s}: (s,v)=1
player 2
B: {s}
T: v
belief v
  given {s}: (s,u)=1
";

/// Player 1's types share the S-marginal `{L:1}` but point at co-player
/// types with different first-order beliefs, so they split at order 2.
pub const ORDER_TWO_SPLIT: &str = "\
cps-hier v1
S: L R
player 1
B: {L,R}
T: u1 u2
belief u1
  given {L,R}: (L,v1)=1
belief u2
  given {L,R}: (L,v2)=1
player 2
B: {L,R}
T: v1 v2
belief v1
  given {L,R}: (L,u1)=1
belief v2
  given {L,R}: (R,u1)=1
";

/// One type per player with a zero-probability conditioning event.
pub const SINGLE: &str = "\
cps-hier v1
S: L R
player 1
B: {L,R} {R}
T: u
belief u
  given {L,R}: (L,v)=1/2 (R,v)=1/2
  given {R}: (R,v)=1
player 2
B: {L,R}
T: v
belief v
  given {L,R}: (L,u)=1
";

/// Two belief-equivalent copies of each type of [`SINGLE`]; collapsing
/// `u'`→`u` and `v'`→`v` is a type morphism.
pub const SINGLE_DUPLICATED: &str = "\
cps-hier v1
S: L R
player 1
B: {L,R} {R}
T: u u'
belief u
  given {L,R}: (L,v)=1/4 (L,v')=1/4 (R,v)=1/2
  given {R}: (R,v)=1
belief u'
  given {L,R}: (L,v')=1/2 (R,v')=1/2
  given {R}: (R,v')=1
player 2
B: {L,R}
T: v v'
belief v
  given {L,R}: (L,u)=1
belief v'
  given {L,R}: (L,u)=1/2 (L,u')=1/2
";

pub fn fixture(text: &str) -> TypeStructure {
    parse_structure(text).expect("fixture parses")
}

pub fn collapse_duplicates(src: &TypeStructure, dst: &TypeStructure) -> MorphismCandidate {
    MorphismCandidate::from_labels(
        src,
        dst,
        Player::BOTH.into_iter().flat_map(|p| {
            src.types(p)
                .labels()
                .iter()
                .map(move |t| (p, t.as_str(), t.trim_end_matches('\'')))
        }),
    )
    .expect("collapse map")
}

/// Random small positive integer weights normalized to a measure on the
/// given atoms (other atoms get 0).
fn random_weights(rng: &mut impl Rng, space: &Arc<FiniteSpace>, atoms: &[usize]) -> FiniteMeasure {
    let mut w: Vec<i64> = vec![0; space.len()];
    for &a in atoms {
        w[a] = rng.gen_range(1..=3);
    }
    // Occasionally zero out some atoms, keeping at least one.
    if atoms.len() > 1 && rng.gen_bool(0.3) {
        let keep = *atoms.choose(rng).unwrap();
        for &a in atoms {
            if a != keep && rng.gen_bool(0.5) {
                w[a] = 0;
            }
        }
    }
    let total: i64 = w.iter().sum();
    FiniteMeasure::from_masses(space, w.iter().map(|&x| Rational::new(x, total)).collect())
        .expect("normalized")
}

/// A random valid CPS generated from a lexicographic sequence of measures:
/// each condition is updated from the first measure that gives it positive
/// mass.
pub fn random_cps(rng: &mut impl Rng, family: &ConditioningFamily) -> Cps {
    let space = family.space();
    let levels = rng.gen_range(1..=space.len().min(3));
    let mut level_atoms: Vec<Vec<usize>> = vec![Vec::new(); levels];
    let mut order: Vec<usize> = (0..space.len()).collect();
    order.shuffle(rng);
    for (k, a) in order.into_iter().enumerate() {
        let l = if k < levels {
            k
        } else {
            rng.gen_range(0..levels)
        };
        level_atoms[l].push(a);
    }
    let mut measures: Vec<FiniteMeasure> = level_atoms
        .iter()
        .map(|atoms| random_weights(rng, space, atoms))
        .collect();
    // Weights may drop atoms; a full-support last resort keeps every
    // condition covered.
    measures.push(FiniteMeasure::uniform(space));
    let conditionals = family
        .events()
        .iter()
        .map(|b| {
            let m = measures
                .iter()
                .find(|m| m.measure_of(b).unwrap().is_positive())
                .expect("supports cover every atom of the space");
            let pb = m.measure_of(b).unwrap();
            let mass = (0..space.len())
                .map(|x| {
                    if b.contains(x) {
                        m.mass(x) / &pb
                    } else {
                        Rational::zero()
                    }
                })
                .collect();
            FiniteMeasure::from_masses(space, mass).unwrap()
        })
        .collect();
    Cps::new(ConditionalArray::new(family.clone(), conditionals).unwrap())
        .expect("lexicographic construction yields a CPS")
}

pub fn random_event(rng: &mut impl Rng, space: &Arc<FiniteSpace>) -> Event {
    loop {
        let e = Event::from_indices(space, (0..space.len()).filter(|_| rng.gen_bool(0.5)));
        if !e.is_empty() {
            return e;
        }
    }
}

/// Random family of at most `max_events` distinct non-empty events.
/// When `with_full` is set the whole space is always a member.
pub fn random_family(
    rng: &mut impl Rng,
    space: &Arc<FiniteSpace>,
    max_events: usize,
    with_full: bool,
) -> ConditioningFamily {
    let n = rng.gen_range(1..=max_events);
    let mut events: Vec<Event> = Vec::new();
    if with_full {
        events.push(space.full_event());
    }
    let mut attempts = 0;
    while events.len() < n && attempts < 20 {
        attempts += 1;
        let e = random_event(rng, space);
        if !events.contains(&e) {
            events.push(e);
        }
    }
    if events.is_empty() {
        events.push(random_event(rng, space));
    }
    ConditioningFamily::new(space, events).unwrap()
}

pub fn labeled_space(prefix: &str, n: usize) -> Arc<FiniteSpace> {
    FiniteSpace::new((0..n).map(|k| format!("{prefix}{k}"))).unwrap()
}

/// An arbitrary (possibly invalid) array of measures, mixing valid CPSs,
/// condition-certain arrays and unconstrained ones.
pub fn random_array(rng: &mut impl Rng, max_atoms: usize, max_events: usize) -> ConditionalArray {
    let space = labeled_space("x", rng.gen_range(1..=max_atoms));
    let with_full = rng.gen_bool(0.5);
    let family = random_family(rng, &space, max_events, with_full);
    match rng.gen_range(0..4) {
        0 => random_cps(rng, &family).into_array(),
        1 => {
            // Each conditional certain of its condition, otherwise free.
            let conds = family
                .events()
                .iter()
                .map(|b| random_weights(rng, &space, &b.atoms().collect::<Vec<_>>()))
                .collect();
            ConditionalArray::new(family, conds).unwrap()
        }
        2 => {
            let all: Vec<usize> = (0..space.len()).collect();
            let conds = family
                .events()
                .iter()
                .map(|_| random_weights(rng, &space, &all))
                .collect();
            ConditionalArray::new(family, conds).unwrap()
        }
        _ => {
            // A valid CPS with one conditional re-drawn inside its condition.
            let base = random_cps(rng, &family);
            let mut conds = base.conditionals().to_vec();
            let k = rng.gen_range(0..conds.len());
            let b = &family.events()[k];
            conds[k] = random_weights(rng, &space, &b.atoms().collect::<Vec<_>>());
            ConditionalArray::new(family, conds).unwrap()
        }
    }
}

/// A valid CPS together with a map `f` and a target family `B_Y` such that
/// `f⁻¹(B_Y) = B_X`.
pub fn random_admissible_pushforward(
    rng: &mut impl Rng,
    max_atoms: usize,
    max_events: usize,
) -> (Cps, AtomMap, ConditioningFamily) {
    let x = labeled_space("x", rng.gen_range(1..=max_atoms));
    let y = labeled_space("y", rng.gen_range(1..=max_atoms));
    let img: Vec<usize> = (0..x.len()).map(|_| rng.gen_range(0..y.len())).collect();
    let f = AtomMap::from_fn(&x, &y, |a| img[a]);
    loop {
        let n = rng.gen_range(1..=max_events);
        let mut target: Vec<Event> = Vec::new();
        let mut source: Vec<Event> = Vec::new();
        for _ in 0..n * 4 {
            if target.len() == n {
                break;
            }
            let e = random_event(rng, &y);
            let pre = f.preimage(&e).unwrap();
            if pre.is_empty() || target.contains(&e) {
                continue;
            }
            target.push(e);
            if !source.contains(&pre) {
                source.push(pre);
            }
        }
        if target.is_empty() {
            continue;
        }
        let source = ConditioningFamily::new(&x, source).unwrap();
        let target = ConditioningFamily::new(&y, target).unwrap();
        return (random_cps(rng, &source), f, target);
    }
}

/// Shape of generated structures.
#[derive(Debug, Clone, Copy)]
pub struct StructureShape {
    pub max_states: usize,
    pub max_types: usize,
    pub max_events: usize,
}

impl Default for StructureShape {
    fn default() -> Self {
        StructureShape {
            max_states: 3,
            max_types: 4,
            max_events: 3,
        }
    }
}

fn random_player_parts(
    rng: &mut impl Rng,
    family: ConditioningFamily,
    types: Arc<FiniteSpace>,
    co_types: &Arc<FiniteSpace>,
) -> PlayerParts {
    let lifted = lift_family(&family, co_types);
    let mut beliefs: Vec<ConditionalArray> = Vec::with_capacity(types.len());
    for _ in 0..types.len() {
        // Reuse an earlier belief now and then so that equivalent types occur.
        let belief = if !beliefs.is_empty() && rng.gen_bool(0.3) {
            beliefs.choose(rng).unwrap().clone()
        } else {
            random_cps(rng, lifted.family()).into_array()
        };
        beliefs.push(belief);
    }
    PlayerParts {
        family,
        types,
        beliefs,
    }
}

/// A random structure. Every family contains `S` itself (the root
/// hypothesis) plus up to `max_events - 1` further events.
pub fn random_structure(rng: &mut impl Rng, shape: StructureShape) -> TypeStructure {
    let s = labeled_space("s", rng.gen_range(1..=shape.max_states));
    let families = [
        random_family(rng, &s, shape.max_events, true),
        random_family(rng, &s, shape.max_events, true),
    ];
    random_structure_on(rng, &s, families, shape.max_types)
}

/// A random structure on a fixed base.
pub fn random_structure_on(
    rng: &mut impl Rng,
    s: &Arc<FiniteSpace>,
    families: [ConditioningFamily; 2],
    max_types: usize,
) -> TypeStructure {
    let t1 = labeled_space("u", rng.gen_range(1..=max_types));
    let t2 = labeled_space("v", rng.gen_range(1..=max_types));
    let [f1, f2] = families;
    let p1 = random_player_parts(rng, f1, t1.clone(), &t2);
    let p2 = random_player_parts(rng, f2, t2, &t1);
    TypeStructure::from_parts(s, [p1, p2]).expect("generated structure is valid")
}

/// Splits every type of `target` into `copies` belief-equivalent copies.
///
/// Each copy's belief spreads the mass on every co-player type across that
/// type's copies with random positive ratios, so collapsing copies onto
/// their original is a type morphism. Returns the expanded structure and
/// the collapse map.
pub fn duplicate_expansion(
    rng: &mut impl Rng,
    target: &TypeStructure,
    copies: usize,
) -> (TypeStructure, MorphismCandidate) {
    assert!(copies >= 1);
    let copy_label = |t: &str, c: usize| format!("{t}'{c}");
    let expanded_types: [Arc<FiniteSpace>; 2] = Player::BOTH.map(|p| {
        FiniteSpace::new(
            target
                .types(p)
                .labels()
                .iter()
                .flat_map(|t| (0..copies).map(move |c| copy_label(t, c))),
        )
        .unwrap()
    });
    let mut parts = Vec::with_capacity(2);
    for p in Player::BOTH {
        let q = p.other();
        let pd = target.player(p);
        let orig_space = pd.belief_space();
        let new_space = FiniteSpace::product(target.s(), &expanded_types[q.index()]);
        let lifted = crate::cps::lift_family_onto(pd.family(), &new_space);
        let mut beliefs = Vec::new();
        for t in 0..target.types(p).len() {
            for _ in 0..copies {
                // One split ratio per co-player type, shared by all
                // conditionals of this copy: keeps the chain rule intact.
                let splits: Vec<Vec<Rational>> = (0..target.types(q).len())
                    .map(|_| {
                        let w: Vec<i64> = (0..copies).map(|_| rng.gen_range(1..=3)).collect();
                        let total: i64 = w.iter().sum();
                        w.iter().map(|&x| Rational::new(x, total)).collect()
                    })
                    .collect();
                let conds = pd
                    .belief(t)
                    .conditionals()
                    .iter()
                    .map(|m| {
                        let mut mass = vec![Rational::zero(); new_space.len()];
                        for a in 0..orig_space.len() {
                            let (s, tj) = orig_space.split(a);
                            for (c, share) in splits[tj].iter().enumerate() {
                                mass[new_space.pair(s, tj * copies + c)] = m.mass(a) * share;
                            }
                        }
                        FiniteMeasure::from_masses(&new_space, mass).unwrap()
                    })
                    .collect();
                beliefs.push(ConditionalArray::new(lifted.family().clone(), conds).unwrap());
            }
        }
        parts.push(PlayerParts {
            family: pd.family().clone(),
            types: expanded_types[p.index()].clone(),
            beliefs,
        });
    }
    let parts: [PlayerParts; 2] = parts.try_into().ok().unwrap();
    let src = TypeStructure::from_parts(target.s(), parts).expect("expansion is valid");
    let pairs: Vec<(Player, String, String)> = Player::BOTH
        .into_iter()
        .flat_map(|p| {
            target
                .types(p)
                .labels()
                .iter()
                .flat_map(move |t| (0..copies).map(move |c| (p, copy_label(t, c), t.clone())))
        })
        .collect();
    let phi = MorphismCandidate::from_labels(
        &src,
        target,
        pairs.iter().map(|(p, a, b)| (*p, a.as_str(), b.as_str())),
    )
    .unwrap();
    (src, phi)
}
