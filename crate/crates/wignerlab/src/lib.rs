//! Finite-dimensional quantum state-vector scenario engine.
//!
//! The crate models multi-agent nested-measurement experiments (Wigner's
//! friend and its extensions) over labeled tensor-product spaces. It computes
//! exact outcome distributions under competing collapse policies, quantifies
//! interference terms between superpositions and mixtures, and audits whether
//! collapsing early at an agent's record changes any later prediction.
//!
//! Module map:
//!
//! - [`qcore`] — states, bases, subspace decompositions, unitaries and
//!   entanglement tests over labeled tensor-factor layouts.
//! - [`measure`] — Born probabilities, collapse, observables, expectations.
//! - [`interference`] — superposition-vs-mixture expectations, interference
//!   terms, and the collapse-safety certificate.
//! - [`scenario`] — the declarative experiment model, the `.scn` text format,
//!   branch-enumeration evaluation, seeded sampling and the reasoning auditor.
//! - [`frlab`] — programmatic builders for the built-in experiments
//!   (Frauchiger–Renner, the single-friend basis paradox, the double slit).
//! - [`random`] — seeded random states/operators used by property tests.
//!
//! Inner products are conjugate-linear in the **first** argument throughout;
//! see [`qcore::inner`].

#![forbid(unsafe_code)]

pub mod frlab;
pub mod interference;
pub mod measure;
pub mod qcore;
pub mod random;
pub mod scenario;

pub use qcore::{Complex64, CoreError, SpaceLayout, StateVector};
pub use scenario::{Policy, RunResult, Scenario, ScenarioError};
