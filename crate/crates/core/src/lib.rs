//! Exact conditional probability systems, belief hierarchies and
//! terminality checks for finite two-player type structures.
//!
//! The crate is organised bottom-up:
//!
//! - [`rational`]: exact fractions, the carrier of every probability;
//! - [`measure`]: finite spaces, events, measures and pushforwards;
//! - [`cps`]: conditional probability systems, their validation, and the
//!   pushforward and marginal maps;
//! - [`structure`]: type structures, their text format, completeness,
//!   disjoint unions and type morphisms;
//! - [`hierarchy`]: unfolding types into finite-order belief hierarchies,
//!   coherence checks, partition refinement and terminality reports.

pub mod cps;
pub mod hierarchy;
pub mod measure;
pub mod rational;
pub mod structure;

#[cfg(any(test, feature = "testkit"))]
pub mod testkit;

pub use cps::{ConditionalArray, ConditioningFamily, Cps};
pub use measure::{AtomMap, Event, FiniteMeasure, FiniteSpace};
pub use rational::Rational;
pub use structure::{Player, TypeStructure};
