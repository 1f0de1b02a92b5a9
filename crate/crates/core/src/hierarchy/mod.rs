//! Explicit hierarchies of conditional beliefs generated by finite structures.
//!
//! [`unfold`] computes the order-`n` hierarchy of a type as a finitely
//! supported [`HierarchyPoint`]. Points are hash-consed in a
//! [`HierarchyTable`], so two types generate the same hierarchy exactly when
//! they receive the same [`PointId`].
//!
//! [`refine`] and [`refine_to_fixpoint`] compute the same equivalence
//! classes by partition refinement without building the points, and the
//! terminality checks compare two structures through their disjoint union.

mod format;
mod intern;
mod refine;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::cps::{ConditioningFamily, Cps};
use crate::measure::{Event, FiniteSpace};
use crate::rational::Rational;
use crate::structure::{Player, StructureError, TypeStructure};

pub use format::{parse_hierarchy, serialize_hierarchy, HIERARCHY_HEADER};
pub use intern::{HierarchyTable, PointId, Unfolder};
pub use refine::{
    finitely_terminal_at, refine, refine_sequence, refine_to_fixpoint, refinement_step,
    terminal_over, Match, Partition, TerminalityReport, TerminalityRow,
};

#[derive(Debug, Error)]
pub enum HierarchyError {
    #[error("player {player} has no type `{label}`")]
    UnknownType { player: Player, label: String },
    #[error("the order must be at least 1")]
    NonPositiveOrder,
    #[error(transparent)]
    Structure(#[from] StructureError),
}

/// A point definition referenced from a [`HierarchyPoint`]: the top level
/// of an order-`order` hierarchy of `player`, plus the index of its
/// order-`order - 1` truncation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointDef {
    pub player: Player,
    pub order: usize,
    pub prefix: Option<usize>,
    pub top: Cps,
}

/// The order-`n` hierarchy `(μ¹, …, μⁿ)` of one type.
///
/// `μ¹` is a CPS on `S` with the player's family. For `k ≥ 2`, `μᵏ` lives on
/// `S × Q`, where `Q` lists the co-player's order-`k-1` points that get
/// positive mass; atom `(s,@m)` refers to `defs()[m]`. Definitions are
/// numbered canonically, so equal hierarchies are equal values.
#[derive(Clone, PartialEq, Eq)]
pub struct HierarchyPoint {
    player: Player,
    s: Arc<FiniteSpace>,
    families: [ConditioningFamily; 2],
    defs: Vec<PointDef>,
    levels: Vec<Cps>,
}

impl HierarchyPoint {
    pub fn player(&self) -> Player {
        self.player
    }

    pub fn order(&self) -> usize {
        self.levels.len()
    }

    pub fn s(&self) -> &Arc<FiniteSpace> {
        &self.s
    }

    pub fn family(&self, p: Player) -> &ConditioningFamily {
        &self.families[p.index()]
    }

    pub fn defs(&self) -> &[PointDef] {
        &self.defs
    }

    pub fn levels(&self) -> &[Cps] {
        &self.levels
    }

    /// `μᵏ`, counting from 1.
    pub fn level(&self, k: usize) -> &Cps {
        &self.levels[k - 1]
    }

    /// Definitions referenced by `μᵏ`, in atom order of its `Q` factor.
    pub fn support(&self, k: usize) -> Vec<usize> {
        match self.level(k).space().factors() {
            None => Vec::new(),
            Some((_, q)) => q.labels().iter().filter_map(|l| q_index(l)).collect(),
        }
    }

    /// The first `n` levels, renumbered canonically.
    pub fn truncate(&self, n: usize) -> Option<HierarchyPoint> {
        if n == 0 || n > self.order() {
            return None;
        }
        let table = HierarchyTable::new(self.s.clone(), self.families.clone());
        let id = table.import(self).expect("a point shares its own base");
        Some(table.export(table.truncate(id, n)?))
    }
}

impl fmt::Debug for HierarchyPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_hierarchy(self))
    }
}

impl fmt::Display for HierarchyPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_hierarchy(self))
    }
}

/// Parses `@m` into `m`.
pub(crate) fn q_index(label: &str) -> Option<usize> {
    label.strip_prefix('@')?.parse().ok()
}

/// Order-`n` hierarchy of type `type_label` of player `p`.
pub fn unfold(
    ts: &TypeStructure,
    p: Player,
    type_label: &str,
    n: usize,
) -> Result<HierarchyPoint, HierarchyError> {
    if n == 0 {
        return Err(HierarchyError::NonPositiveOrder);
    }
    let t = ts
        .type_index(p, type_label)
        .ok_or_else(|| HierarchyError::UnknownType {
            player: p,
            label: type_label.to_string(),
        })?;
    let table = HierarchyTable::for_structure(ts);
    let mut unfolder = Unfolder::new(&table, ts)?;
    let id = unfolder.point(p, t, n);
    Ok(table.export(id))
}

/// Level `level` does not marginalize onto level `level - 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoherenceViolation {
    pub level: usize,
    /// The conditioning event, as an event on `S`.
    pub condition: Event,
    /// Atom of level `level - 1`'s space, or of its would-be extension.
    pub atom: String,
    pub marginal: Rational,
    pub lower: Rational,
}

impl fmt::Display for CoherenceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "level {} given {}: marginal mass of {} is {}, level {} has {}",
            self.level,
            self.condition,
            self.atom,
            self.marginal,
            self.level - 1,
            self.lower
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CoherenceReport {
    pub violations: Vec<CoherenceViolation>,
}

impl CoherenceReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for CoherenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            return writeln!(f, "coherent");
        }
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks that each `μᵏ` projects onto `μᵏ⁻¹` when every co-player point
/// is truncated by one order.
pub fn check_coherence(hp: &HierarchyPoint) -> CoherenceReport {
    let mut violations = Vec::new();
    let base = hp.family(hp.player());
    for k in 2..=hp.order() {
        let (upper, lower) = (hp.level(k), hp.level(k - 1));
        let q = upper
            .space()
            .factors()
            .expect("higher levels are products")
            .1;
        let project = |a: usize| -> String {
            let (s, m) = upper.space().split(a);
            let s = hp.s().label(s);
            if k == 2 {
                return s.to_string();
            }
            let def = q_index(q.label(m)).expect("reference atom");
            match hp.defs()[def].prefix {
                Some(r) => format!("({s},@{r})"),
                None => format!("({s},?)"),
            }
        };
        for (c, (up, low)) in upper
            .conditionals()
            .iter()
            .zip(lower.conditionals())
            .enumerate()
        {
            let mut pushed: std::collections::BTreeMap<String, Rational> = Default::default();
            for a in up.support() {
                let e = pushed.entry(project(a)).or_insert_with(Rational::zero);
                *e = &*e + up.mass(a);
            }
            let condition = base.events()[c].clone();
            let mut report = |atom: String, marginal: Rational, lower: Rational| {
                violations.push(CoherenceViolation {
                    level: k,
                    condition: condition.clone(),
                    atom,
                    marginal,
                    lower,
                })
            };
            for (a, label) in lower.space().labels().iter().enumerate() {
                let m = pushed.remove(label).unwrap_or_else(Rational::zero);
                if &m != low.mass(a) {
                    report(label.clone(), m, low.mass(a).clone());
                }
            }
            for (label, m) in pushed {
                report(label, m, Rational::zero());
            }
        }
    }
    CoherenceReport { violations }
}

#[cfg(test)]
mod tests;
