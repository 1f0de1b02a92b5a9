//! Conditional probability systems on finite spaces.
//!
//! A [`ConditionalArray`] is any array of measures indexed by a conditioning
//! family; a [`Cps`] is one that has passed [`validate_cps`], i.e. every
//! conditional is certain of its condition and the chain rule
//! `μ(A|B)·μ(B|C) = μ(A|C)` holds for all `A ⊆ B ⊆ C` with `B, C` in the
//! family.

use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use thiserror::Error;

use crate::measure::{same_space, AtomMap, Event, FiniteMeasure, FiniteSpace, MeasureError};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CpsError {
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("a conditioning family needs at least one event")]
    EmptyFamily,
    #[error("conditioning families may not contain the empty event")]
    EmptyConditioningEvent,
    #[error("duplicate conditioning event {0}")]
    DuplicateEvent(Event),
    #[error("event or measure lives on a different space than the family")]
    SpaceMismatch,
    #[error("expected {expected} conditionals, found {found}")]
    ConditionalCount { expected: usize, found: usize },
    #[error("not a conditional probability system:\n{0}")]
    Invalid(ValidationReport),
    #[error("conditioning event {0} has zero prior mass")]
    ZeroMassCondition(Event),
    #[error("preimage of the target family is not the source family: {0}")]
    FamilyMismatch(String),
    #[error("family is not a family of cylinders B × Y over a product space")]
    NotCylinderFamily,
}

/// A non-empty ordered list of distinct, non-empty events on one space.
#[derive(Clone, PartialEq, Eq)]
pub struct ConditioningFamily {
    space: Arc<FiniteSpace>,
    events: Vec<Event>,
}

impl ConditioningFamily {
    pub fn new(space: &Arc<FiniteSpace>, events: Vec<Event>) -> Result<Self, CpsError> {
        if events.is_empty() {
            return Err(CpsError::EmptyFamily);
        }
        for (k, e) in events.iter().enumerate() {
            if !same_space(space, e.space()) {
                return Err(CpsError::SpaceMismatch);
            }
            if e.is_empty() {
                return Err(CpsError::EmptyConditioningEvent);
            }
            if events[..k].contains(e) {
                return Err(CpsError::DuplicateEvent(e.clone()));
            }
        }
        Ok(ConditioningFamily {
            space: space.clone(),
            events,
        })
    }

    /// The family `{X}`.
    pub fn trivial(space: &Arc<FiniteSpace>) -> Self {
        ConditioningFamily {
            space: space.clone(),
            events: vec![space.full_event()],
        }
    }

    pub fn space(&self) -> &Arc<FiniteSpace> {
        &self.space
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn position(&self, event: &Event) -> Option<usize> {
        self.events.iter().position(|e| e == event)
    }

    /// Same events regardless of order.
    pub fn same_events(&self, other: &ConditioningFamily) -> bool {
        self.len() == other.len() && self.events.iter().all(|e| other.position(e).is_some())
    }
}

impl fmt::Debug for ConditioningFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.events).finish()
    }
}

/// The cylinder family `{B × Y : B ∈ base}` on `X × Y`, in base order.
#[derive(Clone, Debug)]
pub struct CylinderFamily {
    base: ConditioningFamily,
    y_space: Arc<FiniteSpace>,
    family: ConditioningFamily,
}

impl CylinderFamily {
    pub fn base(&self) -> &ConditioningFamily {
        &self.base
    }

    pub fn y_space(&self) -> &Arc<FiniteSpace> {
        &self.y_space
    }

    pub fn product_space(&self) -> &Arc<FiniteSpace> {
        self.family.space()
    }

    pub fn family(&self) -> &ConditioningFamily {
        &self.family
    }

    pub fn into_family(self) -> ConditioningFamily {
        self.family
    }
}

pub fn lift_family(base: &ConditioningFamily, y_space: &Arc<FiniteSpace>) -> CylinderFamily {
    lift_family_onto(base, &FiniteSpace::product(base.space(), y_space))
}

/// Lifts onto an existing product space whose first factor is the base space.
pub fn lift_family_onto(base: &ConditioningFamily, product: &Arc<FiniteSpace>) -> CylinderFamily {
    let (x, y) = product
        .factors()
        .expect("lift target must be a product space");
    assert!(
        same_space(x, base.space()),
        "product's first factor must be the base space"
    );
    let y_space = y.clone();
    let events = base.events().iter().map(|b| cylinder(b, product)).collect();
    CylinderFamily {
        base: base.clone(),
        y_space,
        family: ConditioningFamily {
            space: product.clone(),
            events,
        },
    }
}

fn cylinder(base_event: &Event, product: &Arc<FiniteSpace>) -> Event {
    let ny = product.factors().unwrap().1.len();
    Event::from_indices(
        product,
        base_event
            .atoms()
            .flat_map(|x| (0..ny).map(move |y| x * ny + y)),
    )
}

/// Recovers the base family when `family` consists of cylinders over a
/// product space.
pub fn cylinder_base(family: &ConditioningFamily) -> Option<ConditioningFamily> {
    let product = family.space();
    let (x, _) = product.factors()?;
    let mut base = Vec::with_capacity(family.len());
    for e in family.events() {
        let b = Event::from_indices(x, e.atoms().map(|a| product.split(a).0));
        if cylinder(&b, product) != *e {
            return None;
        }
        base.push(b);
    }
    ConditioningFamily::new(x, base).ok()
}

/// An array of measures indexed by a conditioning family, not yet checked
/// against the CPS axioms.
#[derive(Clone, PartialEq, Eq)]
pub struct ConditionalArray {
    family: ConditioningFamily,
    conditionals: Vec<FiniteMeasure>,
}

impl ConditionalArray {
    pub fn new(
        family: ConditioningFamily,
        conditionals: Vec<FiniteMeasure>,
    ) -> Result<Self, CpsError> {
        if family.len() != conditionals.len() {
            return Err(CpsError::ConditionalCount {
                expected: family.len(),
                found: conditionals.len(),
            });
        }
        if conditionals
            .iter()
            .any(|m| !same_space(m.space(), family.space()))
        {
            return Err(CpsError::SpaceMismatch);
        }
        Ok(ConditionalArray {
            family,
            conditionals,
        })
    }

    pub fn space(&self) -> &Arc<FiniteSpace> {
        self.family.space()
    }

    pub fn family(&self) -> &ConditioningFamily {
        &self.family
    }

    pub fn conditionals(&self) -> &[FiniteMeasure] {
        &self.conditionals
    }

    pub fn conditional(&self, condition: &Event) -> Option<&FiniteMeasure> {
        self.family
            .position(condition)
            .map(|k| &self.conditionals[k])
    }

    /// Iterates `(B, μ(·|B))` in family order.
    pub fn iter(&self) -> impl Iterator<Item = (&Event, &FiniteMeasure)> {
        self.family.events.iter().zip(&self.conditionals)
    }
}

impl fmt::Debug for ConditionalArray {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.iter()).finish()
    }
}

/// A validated conditional probability system.
#[derive(Clone, PartialEq, Eq)]
pub struct Cps(ConditionalArray);

impl Cps {
    /// Validates with the default search bound.
    pub fn new(array: ConditionalArray) -> Result<Self, CpsError> {
        let report = validate_cps(&array);
        if report.is_valid() {
            Ok(Cps(array))
        } else {
            Err(CpsError::Invalid(report))
        }
    }

    /// For arrays that satisfy the axioms by construction.
    pub(crate) fn new_unchecked(array: ConditionalArray) -> Self {
        debug_assert!(validate_cps_with(&array, ChainRuleSearch::restricted()).is_valid());
        Cps(array)
    }

    pub fn as_array(&self) -> &ConditionalArray {
        &self.0
    }

    pub fn into_array(self) -> ConditionalArray {
        self.0
    }
}

impl Deref for Cps {
    type Target = ConditionalArray;
    fn deref(&self) -> &ConditionalArray {
        &self.0
    }
}

impl fmt::Debug for Cps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CpsViolation {
    /// `μ(B|B) ≠ 1`.
    NotCertain { condition: Event, mass: Rational },
    /// `μ(A|B)·μ(B|C) ≠ μ(A|C)` for `A ⊆ B ⊆ C`.
    ChainRule {
        a: Event,
        b: Event,
        c: Event,
        lhs: Rational,
        rhs: Rational,
    },
}

impl fmt::Display for CpsViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CpsViolation::NotCertain { condition, mass } => {
                write!(f, "μ(B|B) = {mass} ≠ 1 at B = {condition}")
            }
            CpsViolation::ChainRule { a, b, c, lhs, rhs } => write!(
                f,
                "chain rule fails at A = {a}, B = {b}, C = {c}: μ(A|B)·μ(B|C) = {lhs} ≠ {rhs} = μ(A|C)"
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<CpsViolation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "  {v}")?;
        }
        Ok(())
    }
}

/// Controls which events `A` the chain-rule check ranges over.
///
/// On spaces with at most `exhaustive_max_atoms` atoms every subset `A ⊆ B`
/// is tried. On larger spaces only singletons of `B` and family members
/// inside `B` are tried. Both sides of the chain rule are additive in `A`, so
/// agreement on the singletons already forces agreement on every subset:
/// the restricted search finds a violation whenever one exists, it just
/// reports fewer witnesses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainRuleSearch {
    pub exhaustive_max_atoms: usize,
}

impl ChainRuleSearch {
    pub const DEFAULT_BOUND: usize = 12;

    pub fn restricted() -> Self {
        ChainRuleSearch {
            exhaustive_max_atoms: 0,
        }
    }
}

impl Default for ChainRuleSearch {
    fn default() -> Self {
        ChainRuleSearch {
            exhaustive_max_atoms: Self::DEFAULT_BOUND,
        }
    }
}

pub fn validate_cps(array: &ConditionalArray) -> ValidationReport {
    validate_cps_with(array, ChainRuleSearch::default())
}

pub fn validate_cps_with(array: &ConditionalArray, search: ChainRuleSearch) -> ValidationReport {
    let mut violations = Vec::new();
    let events = array.family.events();
    let conds = &array.conditionals;
    let prob = |m: &FiniteMeasure, e: &Event| -> Rational {
        m.measure_of(e)
            .expect("family events share the array's space")
    };

    for (b, m) in array.iter() {
        let mass = prob(m, b);
        if !mass.is_one() {
            violations.push(CpsViolation::NotCertain {
                condition: b.clone(),
                mass,
            });
        }
    }

    let exhaustive = array.space().len() <= search.exhaustive_max_atoms;
    for (bi, b) in events.iter().enumerate() {
        let candidates = || -> Vec<Event> {
            if exhaustive {
                b.subsets().collect()
            } else {
                b.atoms()
                    .map(|x| Event::singleton(b.space(), x))
                    .chain(events.iter().filter(|d| d.is_subset(b)).cloned())
                    .collect()
            }
        };
        for (ci, c) in events.iter().enumerate() {
            if !b.is_subset(c) {
                continue;
            }
            let b_given_c = prob(&conds[ci], b);
            // Both sides are additive in A: when they agree atom by atom
            // there is nothing to report.
            if b.atoms()
                .all(|x| &(conds[bi].mass(x) * &b_given_c) == conds[ci].mass(x))
            {
                continue;
            }
            for a in &candidates() {
                let lhs = &prob(&conds[bi], a) * &b_given_c;
                let rhs = prob(&conds[ci], a);
                if lhs != rhs {
                    violations.push(CpsViolation::ChainRule {
                        a: a.clone(),
                        b: b.clone(),
                        c: c.clone(),
                        lhs,
                        rhs,
                    });
                }
            }
        }
    }
    ValidationReport { violations }
}

/// Conditions a prior on every family member by Bayes' rule.
pub fn cps_from_prior(prior: &FiniteMeasure, family: &ConditioningFamily) -> Result<Cps, CpsError> {
    if !same_space(prior.space(), family.space()) {
        return Err(CpsError::SpaceMismatch);
    }
    let mut conditionals = Vec::with_capacity(family.len());
    for b in family.events() {
        let pb = prior.measure_of(b)?;
        if pb.is_zero() {
            return Err(CpsError::ZeroMassCondition(b.clone()));
        }
        let mass = (0..prior.space().len())
            .map(|x| {
                if b.contains(x) {
                    prior.mass(x) / &pb
                } else {
                    Rational::zero()
                }
            })
            .collect();
        conditionals.push(FiniteMeasure::from_masses(prior.space(), mass)?);
    }
    Ok(Cps::new_unchecked(ConditionalArray::new(
        family.clone(),
        conditionals,
    )?))
}

/// The pushforward CPS: `μ'(E|B) = μ(f⁻¹(E) | f⁻¹(B))`.
///
/// Requires `f⁻¹(target) = source family` as sets of events.
pub fn pushforward_cps(
    cps: &Cps,
    f: &AtomMap,
    target: &ConditioningFamily,
) -> Result<Cps, CpsError> {
    if !same_space(f.domain(), cps.space()) || !same_space(f.codomain(), target.space()) {
        return Err(CpsError::SpaceMismatch);
    }
    let source = cps.family();
    let mut conditionals = Vec::with_capacity(target.len());
    let mut hit = vec![false; source.len()];
    for b in target.events() {
        let pre = f.preimage(b)?;
        let k = source.position(&pre).ok_or_else(|| {
            CpsError::FamilyMismatch(format!(
                "preimage {pre} of target event {b} is not a source conditioning event"
            ))
        })?;
        hit[k] = true;
        conditionals.push(cps.conditionals()[k].pushforward(f)?);
    }
    if let Some(k) = hit.iter().position(|h| !h) {
        return Err(CpsError::FamilyMismatch(format!(
            "source conditioning event {} is not the preimage of any target event",
            source.events()[k]
        )));
    }
    Ok(Cps::new_unchecked(ConditionalArray::new(
        target.clone(),
        conditionals,
    )?))
}

/// Marginal on `X` of a CPS on `X × Y` with a cylinder family.
pub fn marginal_cps(cps: &Cps) -> Result<Cps, CpsError> {
    let base = cylinder_base(cps.family()).ok_or(CpsError::NotCylinderFamily)?;
    let product = cps.space();
    let x = base.space().clone();
    let proj = AtomMap::from_fn(product, &x, |a| product.split(a).0);
    pushforward_cps(cps, &proj, &base)
}
