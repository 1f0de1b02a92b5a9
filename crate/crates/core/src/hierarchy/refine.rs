//! Partition refinement on type sets and the terminality checks built on it.

use std::collections::HashMap;
use std::hash::Hash;

use crate::cps::{lift_family_onto, pushforward_cps};
use crate::measure::{AtomMap, FiniteSpace};
use crate::rational::Rational;
use crate::structure::{disjoint_union, Player, StructureError, TypeStructure};

/// Per-player grouping of types. Cells are numbered by their smallest
/// member, and since types are sorted that is also their label order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    cell_of: [Vec<usize>; 2],
}

fn number_by_first_appearance<K: Eq + Hash>(keys: impl IntoIterator<Item = K>) -> Vec<usize> {
    let mut ids = HashMap::new();
    keys.into_iter()
        .map(|k| {
            let next = ids.len();
            *ids.entry(k).or_insert(next)
        })
        .collect()
}

impl Partition {
    /// One cell per player.
    pub fn trivial(ts: &TypeStructure) -> Self {
        Partition {
            cell_of: Player::BOTH.map(|p| vec![0; ts.types(p).len()]),
        }
    }

    /// Builds a partition from arbitrary class labels per type.
    pub fn from_classes<K: Eq + Hash>(classes: [Vec<K>; 2]) -> Self {
        Partition {
            cell_of: classes.map(number_by_first_appearance),
        }
    }

    pub fn cell_of(&self, p: Player, type_index: usize) -> usize {
        self.cell_of[p.index()][type_index]
    }

    pub fn num_cells(&self, p: Player) -> usize {
        self.cell_of[p.index()].iter().max().map_or(0, |m| m + 1)
    }

    pub fn total_cells(&self) -> usize {
        Player::BOTH.iter().map(|&p| self.num_cells(p)).sum()
    }

    /// Type indices per cell, in cell order.
    pub fn cells(&self, p: Player) -> Vec<Vec<usize>> {
        let mut cells = vec![Vec::new(); self.num_cells(p)];
        for (t, &c) in self.cell_of[p.index()].iter().enumerate() {
            cells[c].push(t);
        }
        cells
    }

    pub fn labeled_cells(&self, ts: &TypeStructure, p: Player) -> Vec<Vec<String>> {
        self.cells(p)
            .into_iter()
            .map(|c| {
                c.into_iter()
                    .map(|t| ts.types(p).label(t).to_string())
                    .collect()
            })
            .collect()
    }

    /// True when every cell of `self` lies inside a cell of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        Player::BOTH.iter().all(|&p| {
            let (fine, coarse) = (&self.cell_of[p.index()], &coarser.cell_of[p.index()]);
            let mut owner: HashMap<usize, usize> = HashMap::new();
            fine.len() == coarse.len()
                && fine
                    .iter()
                    .zip(coarse)
                    .all(|(f, c)| *owner.entry(*f).or_insert(*c) == *c)
        })
    }
}

/// One refinement round: `t` and `t'` stay together when they already were
/// and their beliefs push forward to the same CPS on `S × cells(T_j)`.
pub fn refinement_step(ts: &TypeStructure, prev: &Partition) -> Partition {
    let classes = Player::BOTH.map(|p| {
        let co = p.other();
        let cells = FiniteSpace::new((0..prev.num_cells(co)).map(|c| format!("c{c}")))
            .expect("cell labels are valid");
        let prod = FiniteSpace::product(ts.s(), &cells);
        let data = ts.player(p);
        let bs = data.belief_space();
        let f = AtomMap::from_fn(bs, &prod, |a| {
            let (s, t) = bs.split(a);
            prod.pair(s, prev.cell_of(co, t))
        });
        let target = lift_family_onto(data.family(), &prod).into_family();
        data.beliefs()
            .iter()
            .enumerate()
            .map(|(t, b)| {
                let pushed = pushforward_cps(b, &f, &target).expect("cylinder preimages");
                let sig: Vec<Vec<Rational>> = pushed
                    .conditionals()
                    .iter()
                    .map(|m| m.masses().to_vec())
                    .collect();
                (prev.cell_of(p, t), sig)
            })
            .collect()
    });
    Partition::from_classes(classes)
}

/// Partitions `P⁰, …, Pⁿ`; types share a cell of `Pᵏ` exactly when their
/// order-`k` hierarchies coincide.
pub fn refine_sequence(ts: &TypeStructure, n: usize) -> Vec<Partition> {
    let mut seq = vec![Partition::trivial(ts)];
    for _ in 0..n {
        let next = refinement_step(ts, seq.last().unwrap());
        seq.push(next);
    }
    seq
}

pub fn refine(ts: &TypeStructure, n: usize) -> Partition {
    refine_sequence(ts, n).pop().unwrap()
}

/// The first `Pᵏ` with `Pᵏ⁺¹ = Pᵏ`, and `k`.
pub fn refine_to_fixpoint(ts: &TypeStructure) -> (Partition, usize) {
    let mut cur = Partition::trivial(ts);
    let mut depth = 0;
    loop {
        let next = refinement_step(ts, &cur);
        if next == cur {
            return (cur, depth);
        }
        cur = next;
        depth += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Match {
    /// Target types generating the same hierarchy, in label order.
    Matched(Vec<String>),
    /// No target type agrees with the probe type from this order on.
    Unmatched { order: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TerminalityRow {
    pub player: Player,
    pub probe_type: String,
    pub outcome: Match,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TerminalityReport {
    /// Order at which hierarchies were compared.
    pub order: usize,
    /// Whether `order` is the refinement fixpoint of the union, so that the
    /// comparison covers full hierarchies.
    pub fixpoint: bool,
    /// Probe types, player 1 first, each in label order.
    pub rows: Vec<TerminalityRow>,
}

impl TerminalityReport {
    pub fn all_matched(&self) -> bool {
        self.rows
            .iter()
            .all(|r| matches!(r.outcome, Match::Matched(_)))
    }

    pub fn row(&self, p: Player, probe_type: &str) -> Option<&TerminalityRow> {
        self.rows
            .iter()
            .find(|r| r.player == p && r.probe_type == probe_type)
    }
}

fn terminality(
    target: &TypeStructure,
    probe: &TypeStructure,
    order: Option<usize>,
) -> Result<TerminalityReport, StructureError> {
    let union = disjoint_union(target, probe)?;
    let u = &union.structure;
    let (seq, order, fixpoint) = match order {
        Some(n) => (refine_sequence(u, n), n, false),
        None => {
            let (_, depth) = refine_to_fixpoint(u);
            (refine_sequence(u, depth), depth, true)
        }
    };
    let mut rows = Vec::new();
    for p in Player::BOTH {
        let targets: Vec<usize> = (0..target.types(p).len())
            .map(|t| union.left.apply(p, t))
            .collect();
        for (t, label) in probe.types(p).labels().iter().enumerate() {
            let me = union.right.apply(p, t);
            let matched_at = |part: &Partition| -> Vec<usize> {
                (0..targets.len())
                    .filter(|&k| part.cell_of(p, targets[k]) == part.cell_of(p, me))
                    .collect()
            };
            let outcome = match seq.iter().position(|part| matched_at(part).is_empty()) {
                Some(k) => Match::Unmatched { order: k },
                None => Match::Matched(
                    matched_at(&seq[order])
                        .into_iter()
                        .map(|k| target.types(p).label(k).to_string())
                        .collect(),
                ),
            };
            rows.push(TerminalityRow {
                player: p,
                probe_type: label.clone(),
                outcome,
            });
        }
    }
    Ok(TerminalityReport {
        order,
        fixpoint,
        rows,
    })
}

/// For each probe type, the target types with the same order-`n` hierarchy.
pub fn finitely_terminal_at(
    target: &TypeStructure,
    probe: &TypeStructure,
    n: usize,
) -> Result<TerminalityReport, StructureError> {
    terminality(target, probe, Some(n))
}

/// For each probe type, the target types with the same full hierarchy,
/// decided at the refinement fixpoint of the union.
pub fn terminal_over(
    target: &TypeStructure,
    probe: &TypeStructure,
) -> Result<TerminalityReport, StructureError> {
    terminality(target, probe, None)
}
