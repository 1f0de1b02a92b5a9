//! Finite labeled spaces, events, exact probability measures and pushforwards.
//!
//! Every space is finite and its σ-algebra is the full power set, so an event
//! is just a subset of atoms. Spaces are shared behind [`Arc`] and never
//! mutated after construction.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use thiserror::Error;

use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MeasureError {
    #[error("a space needs at least one atom")]
    EmptySpace,
    #[error("duplicate atom label `{0}`")]
    DuplicateLabel(String),
    #[error("invalid atom label `{0}`")]
    InvalidLabel(String),
    #[error("unknown atom `{0}`")]
    UnknownAtom(String),
    #[error("negative mass {mass} at atom `{atom}`")]
    NegativeMass { atom: String, mass: Rational },
    #[error("masses sum to {0}, not 1")]
    NotNormalized(Rational),
    #[error("operands live on different spaces")]
    SpaceMismatch,
    #[error("map has no image for atom `{0}`")]
    PartialMap(String),
}

/// Characters allowed in user-supplied atom and type labels, besides
/// alphanumerics. Parentheses, commas, braces, `=`, `:`, `/`, `#` and
/// whitespace are reserved by the text formats.
const LABEL_PUNCT: &[char] = &['_', '.', '-', '\'', '@', '+', '~', '^', '!', '?', '*'];

pub fn is_valid_label(label: &str) -> bool {
    !label.is_empty()
        && label
            .chars()
            .all(|c| c.is_alphanumeric() || LABEL_PUNCT.contains(&c))
}

/// A non-empty finite set of uniquely labeled atoms, in declared order.
///
/// A space built by [`FiniteSpace::product`] remembers its two factors; atom
/// `(x, y)` sits at index `x * |Y| + y`.
pub struct FiniteSpace {
    labels: Vec<String>,
    index: HashMap<String, usize>,
    factors: Option<(Arc<FiniteSpace>, Arc<FiniteSpace>)>,
}

impl FiniteSpace {
    /// Builds a space whose declared order is the given order.
    pub fn new<I, S>(labels: I) -> Result<Arc<Self>, MeasureError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if let Some(bad) = labels.iter().find(|l| !is_valid_label(l)) {
            return Err(MeasureError::InvalidLabel(bad.clone()));
        }
        Self::from_labels_unchecked(labels, None)
    }

    /// Builds a space with atoms in lexicographic order.
    pub fn sorted<I, S>(labels: I) -> Result<Arc<Self>, MeasureError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        labels.sort();
        Self::new(labels)
    }

    /// Skips the label charset check; used for derived spaces whose labels
    /// carry reserved characters.
    pub(crate) fn from_labels_unchecked(
        labels: Vec<String>,
        factors: Option<(Arc<FiniteSpace>, Arc<FiniteSpace>)>,
    ) -> Result<Arc<Self>, MeasureError> {
        if labels.is_empty() {
            return Err(MeasureError::EmptySpace);
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(MeasureError::DuplicateLabel(l.clone()));
            }
        }
        Ok(Arc::new(FiniteSpace {
            labels,
            index,
            factors,
        }))
    }

    /// The product space `X × Y` with atoms labeled `(x,y)`, `x`-major.
    pub fn product(x: &Arc<FiniteSpace>, y: &Arc<FiniteSpace>) -> Arc<FiniteSpace> {
        let labels = x
            .labels
            .iter()
            .flat_map(|a| y.labels.iter().map(move |b| format!("({a},{b})")))
            .collect();
        Self::from_labels_unchecked(labels, Some((x.clone(), y.clone())))
            .expect("product of valid spaces is valid")
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, atom: usize) -> &str {
        &self.labels[atom]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn factors(&self) -> Option<(&Arc<FiniteSpace>, &Arc<FiniteSpace>)> {
        self.factors.as_ref().map(|(x, y)| (x, y))
    }

    /// Index of `(x, y)` in a product space.
    pub fn pair(&self, x: usize, y: usize) -> usize {
        let (_, ys) = self.factors.as_ref().expect("not a product space");
        x * ys.len() + y
    }

    /// Inverse of [`FiniteSpace::pair`].
    pub fn split(&self, atom: usize) -> (usize, usize) {
        let (_, ys) = self.factors.as_ref().expect("not a product space");
        (atom / ys.len(), atom % ys.len())
    }

    pub fn full_event(self: &Arc<Self>) -> Event {
        Event::full(self)
    }
}

impl PartialEq for FiniteSpace {
    fn eq(&self, other: &Self) -> bool {
        std::ptr::eq(self, other) || self.labels == other.labels
    }
}

impl Eq for FiniteSpace {}

impl fmt::Debug for FiniteSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.labels.iter()).finish()
    }
}

pub(crate) fn same_space(a: &Arc<FiniteSpace>, b: &Arc<FiniteSpace>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// Packed bit set over atom indices.
#[derive(Clone, PartialEq, Eq, Hash)]
struct Bits {
    words: Vec<u64>,
}

impl Bits {
    fn empty(n: usize) -> Self {
        Bits {
            words: vec![0; n.div_ceil(64).max(1)],
        }
    }

    fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    fn contains(&self, i: usize) -> bool {
        self.words[i / 64] & (1 << (i % 64)) != 0
    }

    fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(w, &word)| {
            (0..64)
                .filter(move |b| word & (1 << b) != 0)
                .map(move |b| w * 64 + b)
        })
    }
}

/// A subset of the atoms of a space.
#[derive(Clone)]
pub struct Event {
    space: Arc<FiniteSpace>,
    bits: Bits,
}

impl Event {
    pub fn empty(space: &Arc<FiniteSpace>) -> Self {
        Event {
            space: space.clone(),
            bits: Bits::empty(space.len()),
        }
    }

    pub fn full(space: &Arc<FiniteSpace>) -> Self {
        Self::from_indices(space, 0..space.len())
    }

    pub fn singleton(space: &Arc<FiniteSpace>, atom: usize) -> Self {
        Self::from_indices(space, [atom])
    }

    /// Panics if an index is out of range.
    pub fn from_indices(space: &Arc<FiniteSpace>, atoms: impl IntoIterator<Item = usize>) -> Self {
        let mut bits = Bits::empty(space.len());
        for a in atoms {
            assert!(a < space.len(), "atom index {a} out of range");
            bits.insert(a);
        }
        Event {
            space: space.clone(),
            bits,
        }
    }

    pub fn from_labels<I, S>(space: &Arc<FiniteSpace>, labels: I) -> Result<Self, MeasureError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut bits = Bits::empty(space.len());
        for l in labels {
            let l = l.as_ref();
            let i = space
                .index_of(l)
                .ok_or_else(|| MeasureError::UnknownAtom(l.to_string()))?;
            bits.insert(i);
        }
        Ok(Event {
            space: space.clone(),
            bits,
        })
    }

    pub fn space(&self) -> &Arc<FiniteSpace> {
        &self.space
    }

    pub fn contains(&self, atom: usize) -> bool {
        atom < self.space.len() && self.bits.contains(atom)
    }

    pub fn atoms(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter()
    }

    pub fn len(&self) -> usize {
        self.bits
            .words
            .iter()
            .map(|w| w.count_ones() as usize)
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.words.iter().all(|&w| w == 0)
    }

    pub fn is_subset(&self, other: &Event) -> bool {
        self.bits
            .words
            .iter()
            .zip(&other.bits.words)
            .all(|(a, b)| a & !b == 0)
    }

    pub fn union(&self, other: &Event) -> Event {
        let words = self
            .bits
            .words
            .iter()
            .zip(&other.bits.words)
            .map(|(a, b)| a | b)
            .collect();
        Event {
            space: self.space.clone(),
            bits: Bits { words },
        }
    }

    pub fn is_disjoint(&self, other: &Event) -> bool {
        self.bits
            .words
            .iter()
            .zip(&other.bits.words)
            .all(|(a, b)| a & b == 0)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> + '_ {
        self.atoms().map(|a| self.space.label(a))
    }

    /// All subsets of this event, including the empty set and itself.
    /// Only meant for small events.
    pub fn subsets(&self) -> impl Iterator<Item = Event> + '_ {
        let atoms: Vec<usize> = self.atoms().collect();
        assert!(
            atoms.len() < 64,
            "subset enumeration over {} atoms",
            atoms.len()
        );
        (0u64..(1u64 << atoms.len())).map(move |mask| {
            Event::from_indices(
                &self.space,
                atoms
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| mask & (1 << k) != 0)
                    .map(|(_, &a)| a),
            )
        })
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        same_space(&self.space, &other.space) && self.bits == other.bits
    }
}

impl Eq for Event {}

impl Hash for Event {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.bits.hash(state);
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Lexicographic on the sorted list of member indices.
impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.atoms().cmp(other.atoms())
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, l) in self.labels().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{l}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Debug for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// An exact probability measure on a finite space. Every atom carries an
/// explicit, possibly zero, mass.
#[derive(Clone)]
pub struct FiniteMeasure {
    space: Arc<FiniteSpace>,
    mass: Vec<Rational>,
}

impl FiniteMeasure {
    /// Builds a measure from label-keyed weights; unlisted atoms get 0.
    pub fn new<I, S>(space: &Arc<FiniteSpace>, weights: I) -> Result<Self, MeasureError>
    where
        I: IntoIterator<Item = (S, Rational)>,
        S: AsRef<str>,
    {
        let mut mass = vec![Rational::zero(); space.len()];
        let mut seen = vec![false; space.len()];
        for (label, w) in weights {
            let label = label.as_ref();
            let i = space
                .index_of(label)
                .ok_or_else(|| MeasureError::UnknownAtom(label.to_string()))?;
            if std::mem::replace(&mut seen[i], true) {
                return Err(MeasureError::DuplicateLabel(label.to_string()));
            }
            mass[i] = w;
        }
        Self::from_masses(space, mass)
    }

    /// Builds a measure from a dense mass vector in atom order.
    pub fn from_masses(
        space: &Arc<FiniteSpace>,
        mass: Vec<Rational>,
    ) -> Result<Self, MeasureError> {
        assert_eq!(mass.len(), space.len(), "mass vector length mismatch");
        if let Some((i, m)) = mass.iter().enumerate().find(|(_, m)| m.is_negative()) {
            return Err(MeasureError::NegativeMass {
                atom: space.label(i).to_string(),
                mass: m.clone(),
            });
        }
        let total: Rational = mass.iter().sum();
        if !total.is_one() {
            return Err(MeasureError::NotNormalized(total));
        }
        Ok(FiniteMeasure {
            space: space.clone(),
            mass,
        })
    }

    pub fn point_mass(space: &Arc<FiniteSpace>, atom: usize) -> Self {
        let mut mass = vec![Rational::zero(); space.len()];
        mass[atom] = Rational::one();
        FiniteMeasure {
            space: space.clone(),
            mass,
        }
    }

    pub fn uniform(space: &Arc<FiniteSpace>) -> Self {
        let w = Rational::new(1, space.len() as i64);
        FiniteMeasure {
            space: space.clone(),
            mass: vec![w; space.len()],
        }
    }

    pub fn space(&self) -> &Arc<FiniteSpace> {
        &self.space
    }

    pub fn mass(&self, atom: usize) -> &Rational {
        &self.mass[atom]
    }

    pub fn masses(&self) -> &[Rational] {
        &self.mass
    }

    pub fn mass_of(&self, label: &str) -> Option<&Rational> {
        self.space.index_of(label).map(|i| &self.mass[i])
    }

    /// Atoms with positive mass.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.mass
            .iter()
            .enumerate()
            .filter(|(_, m)| m.is_positive())
            .map(|(i, _)| i)
    }

    pub fn measure_of(&self, event: &Event) -> Result<Rational, MeasureError> {
        if !same_space(&self.space, event.space()) {
            return Err(MeasureError::SpaceMismatch);
        }
        Ok(event.atoms().map(|a| &self.mass[a]).sum())
    }

    /// Image measure: `mass'(y) = Σ_{f(x) = y} mass(x)`.
    pub fn pushforward(&self, f: &AtomMap) -> Result<FiniteMeasure, MeasureError> {
        if !same_space(&self.space, &f.domain) {
            return Err(MeasureError::SpaceMismatch);
        }
        let mut mass = vec![Rational::zero(); f.codomain.len()];
        for (x, m) in self.mass.iter().enumerate() {
            if !m.is_zero() {
                let y = f.image[x];
                mass[y] = &mass[y] + m;
            }
        }
        Ok(FiniteMeasure {
            space: f.codomain.clone(),
            mass,
        })
    }
}

impl PartialEq for FiniteMeasure {
    fn eq(&self, other: &Self) -> bool {
        same_space(&self.space, &other.space) && self.mass == other.mass
    }
}

impl Eq for FiniteMeasure {}

impl fmt::Debug for FiniteMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut m = f.debug_map();
        for i in self.support() {
            m.entry(&self.space.label(i), &self.mass[i]);
        }
        m.finish()
    }
}

/// A total map between the atoms of two finite spaces.
#[derive(Clone)]
pub struct AtomMap {
    domain: Arc<FiniteSpace>,
    codomain: Arc<FiniteSpace>,
    image: Vec<usize>,
}

impl AtomMap {
    /// Builds a map from label pairs. Every domain atom must be listed.
    pub fn new<I, A, B>(
        domain: &Arc<FiniteSpace>,
        codomain: &Arc<FiniteSpace>,
        pairs: I,
    ) -> Result<Self, MeasureError>
    where
        I: IntoIterator<Item = (A, B)>,
        A: AsRef<str>,
        B: AsRef<str>,
    {
        let mut image: Vec<Option<usize>> = vec![None; domain.len()];
        for (a, b) in pairs {
            let (a, b) = (a.as_ref(), b.as_ref());
            let x = domain
                .index_of(a)
                .ok_or_else(|| MeasureError::UnknownAtom(a.to_string()))?;
            let y = codomain
                .index_of(b)
                .ok_or_else(|| MeasureError::UnknownAtom(b.to_string()))?;
            image[x] = Some(y);
        }
        let image = image
            .into_iter()
            .enumerate()
            .map(|(x, y)| y.ok_or_else(|| MeasureError::PartialMap(domain.label(x).to_string())))
            .collect::<Result<_, _>>()?;
        Ok(AtomMap {
            domain: domain.clone(),
            codomain: codomain.clone(),
            image,
        })
    }

    /// Panics if `f` returns an index outside the codomain.
    pub fn from_fn(
        domain: &Arc<FiniteSpace>,
        codomain: &Arc<FiniteSpace>,
        f: impl Fn(usize) -> usize,
    ) -> Self {
        let image: Vec<usize> = (0..domain.len()).map(f).collect();
        assert!(
            image.iter().all(|&y| y < codomain.len()),
            "image out of range"
        );
        AtomMap {
            domain: domain.clone(),
            codomain: codomain.clone(),
            image,
        }
    }

    pub fn identity(space: &Arc<FiniteSpace>) -> Self {
        Self::from_fn(space, space, |x| x)
    }

    pub fn domain(&self) -> &Arc<FiniteSpace> {
        &self.domain
    }

    pub fn codomain(&self) -> &Arc<FiniteSpace> {
        &self.codomain
    }

    pub fn apply(&self, atom: usize) -> usize {
        self.image[atom]
    }

    /// `then ∘ self`.
    pub fn then(&self, then: &AtomMap) -> Result<AtomMap, MeasureError> {
        if !same_space(&self.codomain, &then.domain) {
            return Err(MeasureError::SpaceMismatch);
        }
        Ok(AtomMap {
            domain: self.domain.clone(),
            codomain: then.codomain.clone(),
            image: self.image.iter().map(|&y| then.image[y]).collect(),
        })
    }

    pub fn preimage(&self, event: &Event) -> Result<Event, MeasureError> {
        if !same_space(&self.codomain, event.space()) {
            return Err(MeasureError::SpaceMismatch);
        }
        Ok(Event::from_indices(
            &self.domain,
            (0..self.domain.len()).filter(|&x| event.contains(self.image[x])),
        ))
    }
}

impl fmt::Debug for AtomMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map()
            .entries(
                self.image
                    .iter()
                    .enumerate()
                    .map(|(x, &y)| (self.domain.label(x), self.codomain.label(y))),
            )
            .finish()
    }
}
