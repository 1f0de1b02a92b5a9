//! Hash-consed hierarchy points and the memoizing unfolder.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex, PoisonError};

use crate::cps::{
    lift_family_onto, marginal_cps, pushforward_cps, ConditionalArray, ConditioningFamily, Cps,
};
use crate::measure::{AtomMap, FiniteMeasure, FiniteSpace};
use crate::rational::Rational;
use crate::structure::{Player, StructureError, TypeStructure};

use super::{q_index, HierarchyError, HierarchyPoint, PointDef};

/// Handle of an interned point. Only meaningful for the table that issued it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PointId(u32);

impl PointId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// `(s, co-player point, mass)`; the point is `None` at order 1.
type Entry = (usize, Option<PointId>, Rational);

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) struct Node {
    pub player: Player,
    pub order: usize,
    pub prefix: Option<PointId>,
    /// Positive-mass atoms of the top level, per conditioning event, sorted.
    pub top: Vec<Vec<Entry>>,
}

impl Node {
    fn refs(&self) -> impl Iterator<Item = PointId> + '_ {
        self.top.iter().flatten().filter_map(|e| e.1)
    }
}

#[derive(Default)]
struct Interner {
    nodes: Vec<Arc<Node>>,
    index: HashMap<Arc<Node>, PointId>,
}

/// Append-only table of interned hierarchy points over a fixed base
/// `(S, B_1, B_2)`. Structurally equal points get the same [`PointId`],
/// also under concurrent insertion.
pub struct HierarchyTable {
    s: Arc<FiniteSpace>,
    families: [ConditioningFamily; 2],
    inner: Mutex<Interner>,
}

impl HierarchyTable {
    pub fn new(s: Arc<FiniteSpace>, families: [ConditioningFamily; 2]) -> Self {
        HierarchyTable {
            s,
            families,
            inner: Mutex::default(),
        }
    }

    pub fn for_structure(ts: &TypeStructure) -> Self {
        Self::new(
            ts.s().clone(),
            Player::BOTH.map(|p| ts.player(p).family().clone()),
        )
    }

    pub fn len(&self) -> usize {
        self.lock().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn player(&self, id: PointId) -> Player {
        self.node(id).player
    }

    pub fn order(&self, id: PointId) -> usize {
        self.node(id).order
    }

    /// The order-`n-1` truncation of an order-`n` point.
    pub fn prefix(&self, id: PointId) -> Option<PointId> {
        self.node(id).prefix
    }

    /// Walks down the prefix chain to the given order.
    pub fn truncate(&self, id: PointId, order: usize) -> Option<PointId> {
        let mut cur = id;
        loop {
            let node = self.node(cur);
            if node.order == order {
                return Some(cur);
            }
            cur = node.prefix?;
        }
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Interner> {
        self.inner.lock().unwrap_or_else(PoisonError::into_inner)
    }

    pub(crate) fn intern(&self, node: Node) -> PointId {
        let mut g = self.lock();
        if let Some(&id) = g.index.get(&node) {
            return id;
        }
        let id = PointId(u32::try_from(g.nodes.len()).expect("table overflow"));
        let node = Arc::new(node);
        g.nodes.push(node.clone());
        g.index.insert(node, id);
        id
    }

    pub(crate) fn node(&self, id: PointId) -> Arc<Node> {
        self.lock().nodes[id.index()].clone()
    }

    fn check_base(
        &self,
        s: &FiniteSpace,
        families: [&ConditioningFamily; 2],
    ) -> Result<(), StructureError> {
        if self.s.labels() != s.labels() {
            return Err(StructureError::BaseMismatch(format!(
                "S differs: {:?} vs {:?}",
                self.s.labels(),
                s.labels()
            )));
        }
        for p in Player::BOTH {
            let (a, b) = (&self.families[p.index()], families[p.index()]);
            if a.events() != b.events() {
                return Err(StructureError::BaseMismatch(format!(
                    "B_{p} differs: {a:?} vs {b:?}"
                )));
            }
        }
        Ok(())
    }

    /// Materializes a point with its definitions renumbered canonically.
    pub fn export(&self, id: PointId) -> HierarchyPoint {
        let mut chain = Vec::new();
        let mut cur = Some(id);
        while let Some(c) = cur {
            let node = self.node(c);
            cur = node.prefix;
            chain.push(node);
        }
        chain.reverse();

        let mut seen = BTreeSet::new();
        let mut stack: Vec<PointId> = chain.iter().flat_map(|n| n.refs()).collect();
        while let Some(c) = stack.pop() {
            if seen.insert(c) {
                let node = self.node(c);
                stack.extend(node.prefix);
                stack.extend(node.refs());
            }
        }
        let mut by_order: BTreeMap<usize, Vec<(PointId, Arc<Node>)>> = BTreeMap::new();
        for c in seen {
            let node = self.node(c);
            by_order.entry(node.order).or_default().push((c, node));
        }

        // References always point one order down, so ranking order by order
        // only ever compares already-ranked ids.
        let mut rank: HashMap<PointId, usize> = HashMap::new();
        let mut defs = Vec::new();
        for (_, group) in by_order {
            let mut keyed: Vec<_> = group
                .into_iter()
                .map(|(c, node)| {
                    let key = (
                        node.player,
                        node.prefix.map(|p| rank[&p]),
                        ranked_top(&node, &rank),
                    );
                    (key, c, node)
                })
                .collect();
            keyed.sort_by(|a, b| a.0.cmp(&b.0));
            for ((player, prefix, top), c, node) in keyed {
                rank.insert(c, defs.len());
                defs.push(PointDef {
                    player,
                    order: node.order,
                    prefix,
                    top: self.materialize(player, &top),
                });
            }
        }
        let player = chain[0].player;
        let levels = chain
            .iter()
            .map(|n| self.materialize(player, &ranked_top(n, &rank)))
            .collect();
        HierarchyPoint {
            player,
            s: self.s.clone(),
            families: self.families.clone(),
            defs,
            levels,
        }
    }

    fn materialize(&self, player: Player, top: &[Vec<(usize, Option<usize>, Rational)>]) -> Cps {
        let family = &self.families[player.index()];
        let qs: BTreeSet<usize> = top.iter().flatten().filter_map(|e| e.1).collect();
        let (space, family) = if qs.is_empty() {
            (self.s.clone(), family.clone())
        } else {
            let q = FiniteSpace::new(qs.iter().map(|m| format!("@{m}")))
                .expect("reference labels are valid");
            let prod = FiniteSpace::product(&self.s, &q);
            let fam = lift_family_onto(family, &prod).into_family();
            (prod, fam)
        };
        let pos: HashMap<usize, usize> = qs.iter().enumerate().map(|(k, &m)| (m, k)).collect();
        let conditionals = top
            .iter()
            .map(|entries| {
                let mut mass = vec![Rational::zero(); space.len()];
                for (s, q, m) in entries {
                    let atom = match q {
                        Some(q) => space.pair(*s, pos[q]),
                        None => *s,
                    };
                    mass[atom] = m.clone();
                }
                FiniteMeasure::from_masses(&space, mass).expect("interned levels are normalized")
            })
            .collect();
        Cps::new_unchecked(
            ConditionalArray::new(family, conditionals).expect("family and measures agree"),
        )
    }

    /// Interns every definition and level of a point; returns the id of the
    /// point itself.
    pub fn import(&self, hp: &HierarchyPoint) -> Result<PointId, HierarchyError> {
        self.check_base(hp.s(), [hp.family(Player::One), hp.family(Player::Two)])?;
        let mut ids = Vec::with_capacity(hp.defs().len());
        for def in hp.defs() {
            let node = Node {
                player: def.player,
                order: def.order,
                prefix: def.prefix.map(|m| ids[m]),
                top: sparse(&def.top, &ids),
            };
            ids.push(self.intern(node));
        }
        let mut prev = None;
        for (k, level) in hp.levels().iter().enumerate() {
            let node = Node {
                player: hp.player(),
                order: k + 1,
                prefix: prev,
                top: sparse(level, &ids),
            };
            prev = Some(self.intern(node));
        }
        Ok(prev.expect("points have at least one level"))
    }
}

fn ranked_top(
    node: &Node,
    rank: &HashMap<PointId, usize>,
) -> Vec<Vec<(usize, Option<usize>, Rational)>> {
    node.top
        .iter()
        .map(|entries| {
            let mut v: Vec<_> = entries
                .iter()
                .map(|(s, q, m)| (*s, q.map(|q| rank[&q]), m.clone()))
                .collect();
            v.sort();
            v
        })
        .collect()
}

fn sparse(cps: &Cps, ids: &[PointId]) -> Vec<Vec<Entry>> {
    let space = cps.space();
    cps.conditionals()
        .iter()
        .map(|m| {
            let mut v: Vec<Entry> = m
                .support()
                .map(|a| match space.factors() {
                    None => (a, None, m.mass(a).clone()),
                    Some((_, q)) => {
                        let (s, k) = space.split(a);
                        let def = q_index(q.label(k)).expect("reference atom");
                        (s, Some(ids[def]), m.mass(a).clone())
                    }
                })
                .collect();
            v.sort();
            v
        })
        .collect()
}

/// Computes the hierarchy maps of one structure, memoized per order, and
/// interns the results in a shared table.
pub struct Unfolder<'a> {
    table: &'a HierarchyTable,
    ts: &'a TypeStructure,
    /// `layers[k - 1][i][t]` is the order-`k` point of type `t` of player `i`.
    layers: Vec<[Vec<PointId>; 2]>,
}

impl<'a> Unfolder<'a> {
    pub fn new(table: &'a HierarchyTable, ts: &'a TypeStructure) -> Result<Self, StructureError> {
        table.check_base(
            ts.s(),
            [
                ts.player(Player::One).family(),
                ts.player(Player::Two).family(),
            ],
        )?;
        Ok(Unfolder {
            table,
            ts,
            layers: Vec::new(),
        })
    }

    pub fn table(&self) -> &'a HierarchyTable {
        self.table
    }

    /// The interned order-`order` point of a type. `order` must be positive.
    pub fn point(&mut self, p: Player, type_index: usize, order: usize) -> PointId {
        self.layer(order)[p.index()][type_index]
    }

    pub fn layer(&mut self, order: usize) -> &[Vec<PointId>; 2] {
        assert!(order >= 1, "hierarchies start at order 1");
        while self.layers.len() < order {
            self.extend();
        }
        &self.layers[order - 1]
    }

    fn extend(&mut self) {
        let ts = self.ts;
        let k = self.layers.len();
        let layer = Player::BOTH.map(|p| {
            let data = ts.player(p);
            match self.layers.last() {
                None => data
                    .beliefs()
                    .iter()
                    .map(|b| {
                        let m = marginal_cps(b).expect("beliefs carry cylinder families");
                        self.table.intern(Node {
                            player: p,
                            order: 1,
                            prefix: None,
                            top: sparse(&m, &[]),
                        })
                    })
                    .collect(),
                Some(prev) => {
                    let co = &prev[p.other().index()];
                    let distinct: Vec<PointId> = co
                        .iter()
                        .copied()
                        .collect::<BTreeSet<_>>()
                        .into_iter()
                        .collect();
                    let q = FiniteSpace::new(distinct.iter().map(|id| format!("@{}", id.0)))
                        .expect("reference labels are valid");
                    let prod = FiniteSpace::product(ts.s(), &q);
                    let bs = data.belief_space();
                    let f = AtomMap::from_fn(bs, &prod, |a| {
                        let (s, t) = bs.split(a);
                        prod.pair(s, distinct.binary_search(&co[t]).unwrap())
                    });
                    let target = lift_family_onto(data.family(), &prod).into_family();
                    data.beliefs()
                        .iter()
                        .enumerate()
                        .map(|(t, b)| {
                            let pushed = pushforward_cps(b, &f, &target)
                                .expect("cylinder preimages are cylinders");
                            let top = pushed
                                .conditionals()
                                .iter()
                                .map(|m| {
                                    m.support()
                                        .map(|a| {
                                            let (s, q) = prod.split(a);
                                            (s, Some(distinct[q]), m.mass(a).clone())
                                        })
                                        .collect()
                                })
                                .collect();
                            self.table.intern(Node {
                                player: p,
                                order: k + 1,
                                prefix: Some(prev[p.index()][t]),
                                top,
                            })
                        })
                        .collect()
                }
            }
        });
        self.layers.push(layer);
    }
}
