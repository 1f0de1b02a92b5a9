//! Brute-force oracles shared by the integration tests. They work on raw
//! masses and atom indices only, without the library's validation,
//! pushforward or interning code.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

use cps_hier::structure::{Player, TypeStructure};
use cps_hier::testkit::{random_structure, StructureShape};
use cps_hier::{ConditionalArray, Rational};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The fuzz corpus: `|S| ≤ 3`, `|T_i| ≤ 4`, `|B_i| ≤ 3`.
pub const SHAPE: StructureShape = StructureShape {
    max_states: 3,
    max_types: 4,
    max_events: 3,
};

pub fn corpus(seed: u64, n: usize) -> Vec<TypeStructure> {
    let mut r = rng(seed);
    (0..n).map(|_| random_structure(&mut r, SHAPE)).collect()
}

fn mask_of(array: &ConditionalArray, k: usize) -> u64 {
    array.family().events()[k]
        .atoms()
        .fold(0u64, |m, a| m | (1 << a))
}

fn mass(array: &ConditionalArray, k: usize, set: u64) -> Rational {
    let m = &array.conditionals()[k];
    (0..array.space().len())
        .filter(|a| set >> a & 1 == 1)
        .map(|a| m.mass(a).clone())
        .sum()
}

/// Checks both axioms by enumerating every `A ⊆ B ⊆ C` with `B, C` in the
/// family and `A` any subset of `B`.
#[allow(clippy::needless_range_loop)]
pub fn brute_force_is_cps(array: &ConditionalArray) -> bool {
    let n = array.family().len();
    let masks: Vec<u64> = (0..n).map(|k| mask_of(array, k)).collect();
    for b in 0..n {
        if !mass(array, b, masks[b]).is_one() {
            return false;
        }
    }
    for b in 0..n {
        for c in 0..n {
            if masks[b] & !masks[c] != 0 {
                continue;
            }
            let b_given_c = mass(array, c, masks[b]);
            // Every subset of B, by the standard submask walk.
            let mut a = masks[b];
            loop {
                if &mass(array, b, a) * &b_given_c != mass(array, c, a) {
                    return false;
                }
                if a == 0 {
                    break;
                }
                a = (a - 1) & masks[b];
            }
        }
    }
    true
}

/// One conditional of one level, keyed by `(s, co-player tree)`.
pub type Level = BTreeMap<(usize, Option<Rc<Tree>>), Rational>;

/// A hierarchy as a literal nested value: per level, per conditioning event,
/// the positive masses keyed by `(s, co-player hierarchy one order down)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tree {
    pub levels: Vec<Vec<Level>>,
}

/// Naive recursive unfolding, memoized per `(player, type, order)`.
pub struct NaiveUnfold<'a> {
    ts: &'a TypeStructure,
    memo: HashMap<(Player, usize, usize), Rc<Tree>>,
}

impl<'a> NaiveUnfold<'a> {
    pub fn new(ts: &'a TypeStructure) -> Self {
        NaiveUnfold {
            ts,
            memo: HashMap::new(),
        }
    }

    pub fn tree(&mut self, p: Player, t: usize, n: usize) -> Rc<Tree> {
        assert!(n >= 1);
        if let Some(h) = self.memo.get(&(p, t, n)) {
            return h.clone();
        }
        let q = p.other();
        let mut levels = if n == 1 {
            Vec::new()
        } else {
            self.tree(p, t, n - 1).levels.clone()
        };
        let co: Option<Vec<Rc<Tree>>> = (n > 1).then(|| {
            (0..self.ts.types(q).len())
                .map(|tj| self.tree(q, tj, n - 1))
                .collect()
        });
        let belief = self.ts.belief(p, t);
        let space = belief.space();
        let nt = self.ts.types(q).len();
        let top = belief
            .conditionals()
            .iter()
            .map(|m| {
                let mut acc = Level::new();
                for a in 0..space.len() {
                    if m.mass(a).is_zero() {
                        continue;
                    }
                    let (s, tj) = (a / nt, a % nt);
                    let key = (s, co.as_ref().map(|c| c[tj].clone()));
                    let e = acc.entry(key).or_insert_with(Rational::zero);
                    *e = &*e + m.mass(a);
                }
                acc
            })
            .collect();
        levels.push(top);
        let h = Rc::new(Tree { levels });
        self.memo.insert((p, t, n), h.clone());
        h
    }
}

/// Class labels of types under a key function, per player.
pub fn classes<K: Eq + std::hash::Hash + Clone>(
    ts: &TypeStructure,
    mut key: impl FnMut(Player, usize) -> K,
) -> [Vec<K>; 2] {
    Player::BOTH.map(|p| (0..ts.types(p).len()).map(|t| key(p, t)).collect())
}
