//! Finite two-player conditional type structures.
//!
//! A structure fixes a primitive space `S` and, for each player `i`, a
//! conditioning family `B_i` on `S`, a finite type set `T_i`, and a belief
//! map sending every type to a CPS on `S × T_j` whose conditioning events
//! are the cylinders `B × T_j`.
//!
//! Structures are always held in canonical form: `S`, both type sets, and
//! both families are sorted, so two structures with the same content compare
//! equal and serialize byte-identically.

pub(crate) mod format;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::cps::{
    cps_from_prior, cylinder_base, lift_family_onto, pushforward_cps, validate_cps,
    ConditionalArray, ConditioningFamily, Cps, CpsError, CpsViolation,
};
use crate::measure::{AtomMap, Event, FiniteMeasure, FiniteSpace, MeasureError};
use crate::rational::Rational;

pub use format::{parse_cps, parse_structure, serialize_cps, serialize_structure, FORMAT_HEADER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Player {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl Player {
    pub const BOTH: [Player; 2] = [Player::One, Player::Two];

    pub fn other(self) -> Player {
        match self {
            Player::One => Player::Two,
            Player::Two => Player::One,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Player::One => 0,
            Player::Two => 1,
        }
    }

    pub fn from_label(label: &str) -> Option<Player> {
        match label {
            "1" => Some(Player::One),
            "2" => Some(Player::Two),
            _ => None,
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Player::One => "1",
            Player::Two => "2",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StructureError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("duplicate label `{label}` in {context}")]
    DuplicateLabel { label: String, context: String },
    #[error("invalid structure:\n{0}")]
    Validation(StructureReport),
    #[error("structures do not share a base: {0}")]
    BaseMismatch(String),
    #[error("invalid morphism candidate: {0}")]
    InvalidMorphism(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Problem {
    Measure(MeasureError),
    Cps(CpsError),
    Violation(CpsViolation),
    MissingBelief,
    MissingConditional(String),
    UnexpectedConditional(String),
    UnknownType(String),
    InvalidLabel(String),
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Problem::Measure(e) => write!(f, "{e}"),
            Problem::Cps(e) => write!(f, "{e}"),
            Problem::Violation(v) => write!(f, "{v}"),
            Problem::MissingBelief => write!(f, "type has no belief"),
            Problem::MissingConditional(b) => write!(f, "no conditional given {b}"),
            Problem::UnexpectedConditional(b) => {
                write!(
                    f,
                    "conditional given {b}, which is not a conditioning event"
                )
            }
            Problem::UnknownType(t) => write!(f, "belief for unknown type `{t}`"),
            Problem::InvalidLabel(l) => write!(f, "invalid label `{l}`"),
        }
    }
}

/// One validation failure and where it was found.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructureIssue {
    pub player: Option<Player>,
    pub type_label: Option<String>,
    pub line: Option<usize>,
    pub problem: Problem,
}

impl fmt::Display for StructureIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        if let Some(p) = self.player {
            write!(f, "player {p}")?;
            if let Some(t) = &self.type_label {
                write!(f, ", type {t}")?;
            }
            write!(f, ": ")?;
        }
        write!(f, "{}", self.problem)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StructureReport {
    pub issues: Vec<StructureIssue>,
}

impl StructureReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for StructureReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in &self.issues {
            writeln!(f, "  {i}")?;
        }
        Ok(())
    }
}

/// Label-level description of a structure, before validation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawStructure {
    pub s: Vec<String>,
    pub metadata: Vec<(String, String)>,
    pub players: [RawPlayer; 2],
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawPlayer {
    pub family: Vec<Vec<String>>,
    pub types: Vec<String>,
    pub beliefs: Vec<RawBelief>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawBelief {
    pub type_label: String,
    pub line: Option<usize>,
    pub conditionals: Vec<RawConditional>,
}

/// `given <condition>: (s,t)=p/q ...`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawConditional {
    pub condition: Vec<String>,
    pub line: Option<usize>,
    pub masses: Vec<((String, String), Rational)>,
}

#[derive(Clone, PartialEq, Eq)]
pub struct PlayerData {
    family: ConditioningFamily,
    types: Arc<FiniteSpace>,
    belief_space: Arc<FiniteSpace>,
    lifted: ConditioningFamily,
    beliefs: Vec<Cps>,
}

impl PlayerData {
    /// The conditioning family `B_i` on `S`.
    pub fn family(&self) -> &ConditioningFamily {
        &self.family
    }

    pub fn types(&self) -> &Arc<FiniteSpace> {
        &self.types
    }

    /// `S × T_j`.
    pub fn belief_space(&self) -> &Arc<FiniteSpace> {
        &self.belief_space
    }

    /// The cylinder family `{B × T_j}` shared by all beliefs.
    pub fn lifted_family(&self) -> &ConditioningFamily {
        &self.lifted
    }

    pub fn beliefs(&self) -> &[Cps] {
        &self.beliefs
    }

    pub fn belief(&self, type_index: usize) -> &Cps {
        &self.beliefs[type_index]
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct TypeStructure {
    s: Arc<FiniteSpace>,
    players: [PlayerData; 2],
    metadata: BTreeMap<String, String>,
}

impl fmt::Debug for TypeStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_structure(self))
    }
}

fn sorted_space(
    labels: &[String],
    context: &str,
    issues: &mut Vec<StructureIssue>,
    player: Option<Player>,
) -> Result<Option<Arc<FiniteSpace>>, StructureError> {
    let mut sorted = labels.to_vec();
    sorted.sort();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(StructureError::DuplicateLabel {
            label: w[0].clone(),
            context: context.to_string(),
        });
    }
    match FiniteSpace::new(sorted) {
        Ok(s) => Ok(Some(s)),
        Err(e) => {
            let problem = match e {
                MeasureError::InvalidLabel(l) => Problem::InvalidLabel(l),
                other => Problem::Measure(other),
            };
            issues.push(StructureIssue {
                player,
                type_label: None,
                line: None,
                problem,
            });
            Ok(None)
        }
    }
}

impl TypeStructure {
    /// Validates and canonicalizes a label-level description.
    ///
    /// Every belief-level problem is collected into one
    /// [`StructureError::Validation`] report.
    pub fn from_raw(raw: &RawStructure) -> Result<Self, StructureError> {
        let mut issues = Vec::new();
        let s = sorted_space(&raw.s, "S", &mut issues, None)?;
        let mut types = Vec::with_capacity(2);
        for p in Player::BOTH {
            let rp = &raw.players[p.index()];
            let t = sorted_space(&rp.types, &format!("T_{p}"), &mut issues, Some(p))?;
            if let Some(clash) = rp.types.iter().find(|t| raw.s.contains(t)) {
                return Err(StructureError::DuplicateLabel {
                    label: clash.clone(),
                    context: format!("T_{p} and S"),
                });
            }
            types.push(t);
        }
        let (Some(s), Some(t1), Some(t2)) = (s, types[0].clone(), types[1].clone()) else {
            return Err(StructureError::Validation(StructureReport { issues }));
        };
        let types = [t1, t2];

        let mut players = Vec::with_capacity(2);
        for p in Player::BOTH {
            let rp = &raw.players[p.index()];
            let own = &types[p.index()];
            let co = &types[p.other().index()];
            let issue = |type_label: Option<&str>, line, problem| StructureIssue {
                player: Some(p),
                type_label: type_label.map(str::to_string),
                line,
                problem,
            };

            let mut events = Vec::with_capacity(rp.family.len());
            for e in &rp.family {
                match Event::from_labels(&s, e) {
                    Ok(ev) => events.push(ev),
                    Err(err) => issues.push(issue(None, None, Problem::Measure(err))),
                }
            }
            events.sort();
            let family = match ConditioningFamily::new(&s, events) {
                Ok(f) => f,
                Err(err) => {
                    issues.push(issue(None, None, Problem::Cps(err)));
                    continue;
                }
            };
            let belief_space = FiniteSpace::product(&s, co);
            let lifted = lift_family_onto(&family, &belief_space).into_family();

            for b in &rp.beliefs {
                if own.index_of(&b.type_label).is_none() {
                    issues.push(issue(
                        Some(&b.type_label),
                        b.line,
                        Problem::UnknownType(b.type_label.clone()),
                    ));
                }
            }

            let mut beliefs = Vec::with_capacity(own.len());
            for t in own.labels() {
                let mut blocks = rp.beliefs.iter().filter(|b| &b.type_label == t);
                let Some(block) = blocks.next() else {
                    issues.push(issue(Some(t), None, Problem::MissingBelief));
                    continue;
                };
                if let Some(dup) = blocks.next() {
                    return Err(StructureError::DuplicateLabel {
                        label: t.clone(),
                        context: format!("beliefs of player {p} (line {:?})", dup.line),
                    });
                }
                match build_belief(&s, &family, &belief_space, &lifted, block) {
                    Ok(array) => {
                        let report = validate_cps(&array);
                        if report.is_valid() {
                            beliefs.push(Cps::new_unchecked(array));
                        } else {
                            for v in report.violations {
                                issues.push(issue(Some(t), block.line, Problem::Violation(v)));
                            }
                        }
                    }
                    Err(errs) => {
                        for (line, problem) in errs {
                            issues.push(issue(Some(t), line.or(block.line), problem));
                        }
                    }
                }
            }
            players.push(PlayerData {
                family,
                types: own.clone(),
                belief_space,
                lifted,
                beliefs,
            });
        }

        if !issues.is_empty() {
            return Err(StructureError::Validation(StructureReport { issues }));
        }
        let players: [PlayerData; 2] = players.try_into().ok().expect("two players");
        Ok(TypeStructure {
            s,
            players,
            metadata: raw.metadata.iter().cloned().collect(),
        })
    }

    /// Builds a structure from measure-level data. Each belief must live on
    /// a product space `S × T_j` (in any atom order); the result is
    /// canonicalized and fully validated.
    pub fn from_parts(
        s: &Arc<FiniteSpace>,
        players: [PlayerParts; 2],
    ) -> Result<Self, StructureError> {
        let mut raw = RawStructure {
            s: s.labels().to_vec(),
            ..Default::default()
        };
        for p in Player::BOTH {
            let parts = &players[p.index()];
            let rp = &mut raw.players[p.index()];
            rp.family = parts
                .family
                .events()
                .iter()
                .map(|e| e.labels().map(str::to_string).collect())
                .collect();
            rp.types = parts.types.labels().to_vec();
            if parts
                .beliefs
                .iter()
                .any(|a| cylinder_base(a.family()).is_none())
            {
                return Err(StructureError::Validation(StructureReport {
                    issues: vec![StructureIssue {
                        player: Some(p),
                        type_label: None,
                        line: None,
                        problem: Problem::Cps(CpsError::NotCylinderFamily),
                    }],
                }));
            }
            for (k, array) in parts.beliefs.iter().enumerate() {
                rp.beliefs.push(raw_belief(parts.types.label(k), array));
            }
        }
        Self::from_raw(&raw)
    }

    pub fn to_raw(&self) -> RawStructure {
        let mut raw = RawStructure {
            s: self.s.labels().to_vec(),
            metadata: self
                .metadata
                .iter()
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
            ..Default::default()
        };
        for p in Player::BOTH {
            let pd = self.player(p);
            let rp = &mut raw.players[p.index()];
            rp.family = pd
                .family
                .events()
                .iter()
                .map(|e| e.labels().map(str::to_string).collect())
                .collect();
            rp.types = pd.types.labels().to_vec();
            for (k, c) in pd.beliefs.iter().enumerate() {
                rp.beliefs.push(raw_belief(pd.types.label(k), c));
            }
        }
        raw
    }

    pub fn s(&self) -> &Arc<FiniteSpace> {
        &self.s
    }

    pub fn player(&self, p: Player) -> &PlayerData {
        &self.players[p.index()]
    }

    pub fn types(&self, p: Player) -> &Arc<FiniteSpace> {
        &self.players[p.index()].types
    }

    pub fn type_index(&self, p: Player, label: &str) -> Option<usize> {
        self.types(p).index_of(label)
    }

    pub fn belief(&self, p: Player, type_index: usize) -> &Cps {
        &self.players[p.index()].beliefs[type_index]
    }

    /// Optional `key=value` annotations (e.g. `compact=true`); carried
    /// through serialization but never interpreted.
    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn with_metadata(mut self, metadata: BTreeMap<String, String>) -> Self {
        self.metadata = metadata;
        self
    }

    /// Checks that both structures share `S`, `B_1` and `B_2`.
    pub fn check_same_base(&self, other: &TypeStructure) -> Result<(), StructureError> {
        if self.s.labels() != other.s.labels() {
            return Err(StructureError::BaseMismatch(format!(
                "S differs: {:?} vs {:?}",
                self.s.labels(),
                other.s.labels()
            )));
        }
        for p in Player::BOTH {
            let (a, b) = (self.player(p).family(), other.player(p).family());
            if !a.same_events(b) {
                return Err(StructureError::BaseMismatch(format!(
                    "B_{p} differs: {a:?} vs {b:?}"
                )));
            }
        }
        Ok(())
    }
}

/// Measure-level input for [`TypeStructure::from_parts`].
#[derive(Clone)]
pub struct PlayerParts {
    pub family: ConditioningFamily,
    pub types: Arc<FiniteSpace>,
    /// One array per type, in `types` order, on `S × T_j`.
    pub beliefs: Vec<ConditionalArray>,
}

fn raw_belief(type_label: &str, array: &ConditionalArray) -> RawBelief {
    let space = array.space();
    RawBelief {
        type_label: type_label.to_string(),
        line: None,
        conditionals: array
            .iter()
            .map(|(b, m)| {
                let (xs, _) = space.factors().expect("beliefs live on S × T_j");
                let condition: Vec<String> = {
                    let mut c: Vec<String> = b
                        .atoms()
                        .map(|a| xs.label(space.split(a).0).to_string())
                        .collect();
                    c.dedup();
                    c
                };
                let masses = m
                    .support()
                    .map(|a| {
                        let (x, y) = space.split(a);
                        let (xs, ys) = space.factors().unwrap();
                        (
                            (xs.label(x).to_string(), ys.label(y).to_string()),
                            m.mass(a).clone(),
                        )
                    })
                    .collect();
                RawConditional {
                    condition,
                    line: None,
                    masses,
                }
            })
            .collect(),
    }
}

type BeliefErrors = Vec<(Option<usize>, Problem)>;

fn build_belief(
    s: &Arc<FiniteSpace>,
    family: &ConditioningFamily,
    belief_space: &Arc<FiniteSpace>,
    lifted: &ConditioningFamily,
    block: &RawBelief,
) -> Result<ConditionalArray, BeliefErrors> {
    let (_, co) = belief_space.factors().unwrap();
    let mut errs = Vec::new();
    let mut slots: Vec<Option<FiniteMeasure>> = vec![None; family.len()];
    for rc in &block.conditionals {
        let cond = match Event::from_labels(s, &rc.condition) {
            Ok(e) => e,
            Err(e) => {
                errs.push((rc.line, Problem::Measure(e)));
                continue;
            }
        };
        let Some(k) = family.position(&cond) else {
            errs.push((rc.line, Problem::UnexpectedConditional(cond.to_string())));
            continue;
        };
        let mut mass = vec![Rational::zero(); belief_space.len()];
        let mut ok = true;
        for ((sl, tl), w) in &rc.masses {
            match (s.index_of(sl), co.index_of(tl)) {
                (Some(x), Some(y)) => {
                    let a = belief_space.pair(x, y);
                    mass[a] = &mass[a] + w;
                }
                (None, _) => {
                    errs.push((
                        rc.line,
                        Problem::Measure(MeasureError::UnknownAtom(sl.clone())),
                    ));
                    ok = false;
                }
                (_, None) => {
                    errs.push((
                        rc.line,
                        Problem::Measure(MeasureError::UnknownAtom(tl.clone())),
                    ));
                    ok = false;
                }
            }
        }
        if !ok {
            continue;
        }
        match FiniteMeasure::from_masses(belief_space, mass) {
            Ok(m) => {
                if slots[k].replace(m).is_some() {
                    errs.push((
                        rc.line,
                        Problem::Cps(CpsError::DuplicateEvent(family.events()[k].clone())),
                    ));
                }
            }
            Err(e) => errs.push((rc.line, Problem::Measure(e))),
        }
    }
    for (k, slot) in slots.iter().enumerate() {
        if slot.is_none() && !errs.iter().any(|(_, p)| matches!(p, Problem::Measure(_))) {
            errs.push((
                block.line,
                Problem::MissingConditional(family.events()[k].to_string()),
            ));
        }
    }
    if !errs.is_empty() {
        return Err(errs);
    }
    let conds = slots.into_iter().map(Option::unwrap).collect();
    ConditionalArray::new(lifted.clone(), conds).map_err(|e| vec![(block.line, Problem::Cps(e))])
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Completeness {
    Complete,
    /// `witness` is a CPS in `Δ^{B_i}(S × T_j)` that no type of `player`
    /// holds.
    Incomplete {
        player: Player,
        witness: Cps,
    },
}

/// Decides whether every belief map is surjective.
///
/// A finite type set can only cover `Δ^{B_i}(S × T_j)` when that set is a
/// single point, which happens exactly when every cylinder `B × T_j` is a
/// single atom (in particular whenever `|S × T_j| = 1`). Otherwise some
/// conditioning event has two atoms whose ratio can be varied freely.
pub fn completeness_status(ts: &TypeStructure) -> Completeness {
    for p in Player::BOTH {
        if let Some(witness) = incompleteness_witness(ts, p) {
            return Completeness::Incomplete { player: p, witness };
        }
    }
    Completeness::Complete
}

/// A CPS outside player `p`'s belief image, or `None` when the codomain is
/// a single point.
pub fn incompleteness_witness(ts: &TypeStructure, p: Player) -> Option<Cps> {
    let pd = ts.player(p);
    let space = pd.belief_space();
    let wide = pd.lifted_family().events().iter().find(|e| e.len() >= 2)?;
    let mut atoms = wide.atoms();
    let (a1, a2) = (atoms.next().unwrap(), atoms.next().unwrap());
    let n = space.len() as i64;
    // Full-support priors whose conditional on `wide` puts ratio m : 1 on
    // (a1, a2). Distinct m give distinct CPSs, so one of the first
    // |T_i| + 1 misses the image.
    for m in 1..=(pd.types().len() as i64 + 1) {
        let total = n - 1 + m;
        let mass = (0..space.len())
            .map(|a| Rational::new(if a == a1 { m } else { 1 }, total))
            .collect();
        let prior = FiniteMeasure::from_masses(space, mass).expect("positive weights sum to 1");
        let candidate = cps_from_prior(&prior, pd.lifted_family()).expect("full support");
        debug_assert!(a2 != a1);
        if !in_belief_image(ts, p, &candidate) {
            return Some(candidate);
        }
    }
    unreachable!("at most |T_i| candidates can be in the image")
}

pub fn in_belief_image(ts: &TypeStructure, p: Player, cps: &Cps) -> bool {
    ts.player(p).beliefs().iter().any(|b| b == cps)
}

/// Injective map from one structure's types into another's, per player.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Embedding {
    maps: [Vec<usize>; 2],
}

impl Embedding {
    pub fn apply(&self, p: Player, type_index: usize) -> usize {
        self.maps[p.index()][type_index]
    }

    pub fn as_candidate(&self, src: &TypeStructure, dst: &TypeStructure) -> MorphismCandidate {
        MorphismCandidate::from_indices(src, dst, self.maps.clone())
    }
}

pub struct DisjointUnion {
    pub structure: TypeStructure,
    pub left: Embedding,
    pub right: Embedding,
}

pub const LEFT_TAG: &str = "a.";
pub const RIGHT_TAG: &str = "b.";

/// Union of two structures over the same base.
///
/// Types are tagged `a.` (left) and `b.` (right); each belief is extended
/// by zero mass on the other side's co-player types.
pub fn disjoint_union(
    a: &TypeStructure,
    b: &TypeStructure,
) -> Result<DisjointUnion, StructureError> {
    a.check_same_base(b)?;
    let (ra, rb) = (a.to_raw(), b.to_raw());
    let mut raw = RawStructure {
        s: ra.s.clone(),
        metadata: Vec::new(),
        ..Default::default()
    };
    for p in Player::BOTH {
        let (pa, pb) = (&ra.players[p.index()], &rb.players[p.index()]);
        let rp = &mut raw.players[p.index()];
        rp.family = pa.family.clone();
        for (tag, side) in [(LEFT_TAG, pa), (RIGHT_TAG, pb)] {
            rp.types
                .extend(side.types.iter().map(|t| format!("{tag}{t}")));
            for belief in &side.beliefs {
                let mut belief = belief.clone();
                belief.type_label = format!("{tag}{}", belief.type_label);
                for c in &mut belief.conditionals {
                    for ((_, t), _) in &mut c.masses {
                        *t = format!("{tag}{t}");
                    }
                }
                rp.beliefs.push(belief);
            }
        }
    }
    let structure = TypeStructure::from_raw(&raw)?;
    let embed = |src: &TypeStructure, tag: &str| Embedding {
        maps: Player::BOTH.map(|p| {
            src.types(p)
                .labels()
                .iter()
                .map(|t| {
                    structure
                        .type_index(p, &format!("{tag}{t}"))
                        .expect("tagged type present")
                })
                .collect()
        }),
    };
    let left = embed(a, LEFT_TAG);
    let right = embed(b, RIGHT_TAG);
    Ok(DisjointUnion {
        structure,
        left,
        right,
    })
}

/// Candidate type maps `φ_i : T_i^src → T_i^dst`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MorphismCandidate {
    maps: [Vec<usize>; 2],
}

impl MorphismCandidate {
    /// Builds a candidate from label pairs; every source type must be mapped.
    pub fn from_labels<'a>(
        src: &TypeStructure,
        dst: &TypeStructure,
        pairs: impl IntoIterator<Item = (Player, &'a str, &'a str)>,
    ) -> Result<Self, StructureError> {
        let mut maps: [Vec<Option<usize>>; 2] =
            Player::BOTH.map(|p| vec![None; src.types(p).len()]);
        for (p, from, to) in pairs {
            let x = src.type_index(p, from).ok_or_else(|| {
                StructureError::InvalidMorphism(format!(
                    "unknown source type `{from}` of player {p}"
                ))
            })?;
            let y = dst.type_index(p, to).ok_or_else(|| {
                StructureError::InvalidMorphism(format!("unknown target type `{to}` of player {p}"))
            })?;
            if maps[p.index()][x].replace(y).is_some_and(|old| old != y) {
                return Err(StructureError::InvalidMorphism(format!(
                    "type `{from}` of player {p} mapped twice"
                )));
            }
        }
        let mut out: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        for p in Player::BOTH {
            for (x, y) in maps[p.index()].iter().enumerate() {
                let y = y.ok_or_else(|| {
                    StructureError::InvalidMorphism(format!(
                        "type `{}` of player {p} is not mapped",
                        src.types(p).label(x)
                    ))
                })?;
                out[p.index()].push(y);
            }
        }
        Ok(MorphismCandidate { maps: out })
    }

    fn from_indices(src: &TypeStructure, dst: &TypeStructure, maps: [Vec<usize>; 2]) -> Self {
        for p in Player::BOTH {
            assert_eq!(maps[p.index()].len(), src.types(p).len());
            assert!(maps[p.index()].iter().all(|&y| y < dst.types(p).len()));
        }
        MorphismCandidate { maps }
    }

    pub fn identity(ts: &TypeStructure) -> Self {
        MorphismCandidate {
            maps: Player::BOTH.map(|p| (0..ts.types(p).len()).collect()),
        }
    }

    pub fn apply(&self, p: Player, type_index: usize) -> usize {
        self.maps[p.index()][type_index]
    }

    /// `(player, source label, target label)` triples in canonical order.
    pub fn pairs<'a>(
        &'a self,
        src: &'a TypeStructure,
        dst: &'a TypeStructure,
    ) -> impl Iterator<Item = (Player, &'a str, &'a str)> + 'a {
        Player::BOTH.into_iter().flat_map(move |p| {
            self.maps[p.index()]
                .iter()
                .enumerate()
                .map(move |(x, &y)| (p, src.types(p).label(x), dst.types(p).label(y)))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MorphismVerdict {
    Preserving,
    Broken(MorphismWitness),
}

/// First place where `pushforward(β_i^src(t), (Id_S, φ_j))` and
/// `β_i^dst(φ_i(t))` disagree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MorphismWitness {
    pub player: Player,
    pub source_type: String,
    pub target_type: String,
    /// The conditioning event on `S`.
    pub condition: Event,
    /// A singleton event on `S × T_j^dst` whose masses differ.
    pub event: Event,
    pub pushed_mass: Rational,
    pub target_mass: Rational,
}

impl fmt::Display for MorphismWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "player {}, type {} -> {}: given {} the image belief puts {} on {} but the target type puts {}",
            self.player,
            self.source_type,
            self.target_type,
            self.condition,
            self.pushed_mass,
            self.event,
            self.target_mass
        )
    }
}

/// Checks that `φ` commutes with the belief maps:
/// `L̄_{(Id_S, φ_j)}(β_i^src(t)) = β_i^dst(φ_i(t))` for every player and
/// source type.
pub fn verify_type_morphism(
    src: &TypeStructure,
    dst: &TypeStructure,
    phi: &MorphismCandidate,
) -> Result<MorphismVerdict, StructureError> {
    src.check_same_base(dst)?;
    for p in Player::BOTH {
        let q = p.other();
        if phi.maps[p.index()].len() != src.types(p).len()
            || phi.maps[q.index()].len() != src.types(q).len()
        {
            return Err(StructureError::InvalidMorphism(
                "candidate does not match source".into(),
            ));
        }
        let (sp, dp) = (src.player(p), dst.player(p));
        let from = sp.belief_space();
        let to = dp.belief_space();
        let f = AtomMap::from_fn(from, to, |a| {
            let (s, t) = from.split(a);
            to.pair(s, phi.apply(q, t))
        });
        for (t, belief) in sp.beliefs().iter().enumerate() {
            let pushed = pushforward_cps(belief, &f, dp.lifted_family())
                .expect("shared base makes the cylinder preimage condition hold");
            let target_t = phi.apply(p, t);
            let target = dst.belief(p, target_t);
            for (k, (pm, tm)) in pushed
                .conditionals()
                .iter()
                .zip(target.conditionals())
                .enumerate()
            {
                if let Some(a) = (0..to.len()).find(|&a| pm.mass(a) != tm.mass(a)) {
                    return Ok(MorphismVerdict::Broken(MorphismWitness {
                        player: p,
                        source_type: src.types(p).label(t).to_string(),
                        target_type: dst.types(p).label(target_t).to_string(),
                        condition: dp.family().events()[k].clone(),
                        event: Event::singleton(to, a),
                        pushed_mass: pm.mass(a).clone(),
                        target_mass: tm.mass(a).clone(),
                    }));
                }
            }
        }
    }
    Ok(MorphismVerdict::Preserving)
}
