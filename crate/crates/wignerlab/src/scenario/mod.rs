//! Declarative multi-agent experiment model.
//!
//! A [`Scenario`] declares registers (plain systems and agent-record
//! registers) and an ordered list of steps. Evaluation enumerates collapse
//! branches exactly; [`Policy`] selects how agent-internal measurements are
//! treated:
//!
//! - [`Policy::UnitaryAgents`] — an agent's measurement is the entangling
//!   isometry `v_m ⊗ ready -> v_m ⊗ record_m` extended linearly; only
//!   external measurements collapse. This is the standard treatment of a
//!   sealed laboratory.
//! - [`Policy::CollapseOnRecord`] — the naive reading: the collapse rule is
//!   applied when the run's *first* agent record forms, and the branch is
//!   carried on from the collapsed state. Later agent measurements stay
//!   unitary. This reproduces the textbook shortcut of collapsing as soon as
//!   a macroscopic record exists, which is exactly the step the auditor can
//!   invalidate. Individual records can also be collapsed selectively via
//!   [`evaluate_with_resolutions`].
//!
//! The text format (`.scn`) is documented in [`parse`].

mod audit;
mod compile;
mod eval;
mod parse;
mod serialize;

pub use audit::{audit, audit_with_tol, conditional_probability, interference_audit, AuditEntry,
    AuditReport, ConditionalProbability, InterferencePair, Validity};
pub use compile::unitary_prestates;
pub use eval::{evaluate, evaluate_with_resolutions, sample, Branch, RecordValue, RunResult,
    SampleCounts, StepAnnotation};
pub use parse::{parse_scenario, parse_scenario_with, ParseOptions};
pub use serialize::serialize_scenario;

use num_complex::Complex64;
use thiserror::Error;

use crate::qcore::CoreError;

/// Branches lighter than this are dropped during evaluation; far below any
/// probability the engine is asked to report.
pub const BRANCH_PRUNE_THRESHOLD: f64 = 1e-15;

/// Prepared amplitude lists may be off unit norm by this much; they are
/// renormalized exactly when applied.
pub const PREPARE_NORM_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("parse error at line {line}, column {col}: {message}")]
    Parse { line: usize, col: usize, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("step {step} ({kind}): {source}")]
    Step {
        step: usize,
        kind: &'static str,
        #[source]
        source: CoreError,
    },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("unknown record `{0}`")]
    UnknownRecord(String),
    #[error("record `{record}` has no outcome `{outcome}`")]
    UnknownRecordOutcome { record: String, outcome: String },
    #[error("the conditioning event has probability zero")]
    ZeroProbabilityCondition,
}

pub type ScnResult<T> = Result<T, ScenarioError>;

/// How agent-internal measurements are treated during evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    /// Agents evolve unitarily; only external measurements collapse.
    UnitaryAgents,
    /// The naive reading: collapse at the first agent record, then continue.
    CollapseOnRecord,
}

impl Policy {
    pub fn as_str(self) -> &'static str {
        match self {
            Policy::UnitaryAgents => "unitary-agents",
            Policy::CollapseOnRecord => "collapse-on-record",
        }
    }
}

/// Register kinds: plain quantum systems and agent-record registers.
#[derive(Debug, Clone, PartialEq)]
pub enum RegisterKind {
    System,
    /// An agent-record register with its designated pre-measurement label.
    Agent { ready: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegisterDecl {
    pub name: String,
    pub labels: Vec<String>,
    pub kind: RegisterKind,
}

impl RegisterDecl {
    pub fn system(name: impl Into<String>, labels: &[&str]) -> Self {
        RegisterDecl {
            name: name.into(),
            labels: labels.iter().map(|s| s.to_string()).collect(),
            kind: RegisterKind::System,
        }
    }

    pub fn agent(name: impl Into<String>, ready: &str, labels: &[&str]) -> Self {
        RegisterDecl {
            name: name.into(),
            labels: labels.iter().map(|s| s.to_string()).collect(),
            kind: RegisterKind::Agent { ready: ready.to_string() },
        }
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn is_agent(&self) -> bool {
        matches!(self.kind, RegisterKind::Agent { .. })
    }
}

/// Raw measurement declaration over the sub-layout of the step's targets.
/// `Basis` entries carry exactly one vector per outcome; `Blocks` entries may
/// span multi-dimensional subspaces.
#[derive(Debug, Clone, PartialEq)]
pub enum SpecKind {
    Basis,
    Blocks,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpecDecl {
    pub kind: SpecKind,
    /// Outcome label plus its spanning vectors (amplitudes over the target
    /// sub-layout, in target declaration order).
    pub outcomes: Vec<(String, Vec<Vec<Complex64>>)>,
}

impl SpecDecl {
    pub fn basis(outcomes: Vec<(String, Vec<Complex64>)>) -> Self {
        SpecDecl {
            kind: SpecKind::Basis,
            outcomes: outcomes.into_iter().map(|(l, v)| (l, vec![v])).collect(),
        }
    }

    pub fn blocks(outcomes: Vec<(String, Vec<Vec<Complex64>>)>) -> Self {
        SpecDecl { kind: SpecKind::Blocks, outcomes }
    }

    pub fn labels(&self) -> Vec<&str> {
        self.outcomes.iter().map(|(l, _)| l.as_str()).collect()
    }
}

/// One step of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    /// Sets a register (still in its initial label and unentangled) to the
    /// given amplitudes.
    Prepare { register: String, amplitudes: Vec<Complex64> },
    /// Applies a unitary on the sub-layout of the listed registers.
    ApplyUnitary { registers: Vec<String>, matrix: Vec<Complex64> },
    /// The agent's internal measurement: entangles the targets with the
    /// agent-record register, writing `record`.
    AgentMeasure { agent: String, targets: Vec<String>, spec: SpecDecl, record: String },
    /// Prepares `target` (still in its initial label) conditionally on an
    /// agent's recorded outcome, as a controlled isometry.
    ControlledPrepare { control: String, cases: Vec<(String, Vec<Complex64>)>, target: String },
    /// Projective measurement from outside, with collapse and probability
    /// accounting; writes `record`.
    ExternalMeasure { targets: Vec<String>, spec: SpecDecl, record: String },
}

impl Step {
    pub fn kind(&self) -> &'static str {
        match self {
            Step::Prepare { .. } => "prepare",
            Step::ApplyUnitary { .. } => "unitary",
            Step::AgentMeasure { .. } => "ameasure",
            Step::ControlledPrepare { .. } => "cprepare",
            Step::ExternalMeasure { .. } => "xmeasure",
        }
    }

    pub fn record(&self) -> Option<&str> {
        match self {
            Step::AgentMeasure { record, .. } | Step::ExternalMeasure { record, .. } => {
                Some(record)
            }
            _ => None,
        }
    }
}

/// A declarative experiment: registers plus ordered steps.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub registers: Vec<RegisterDecl>,
    pub steps: Vec<Step>,
    /// Cap on the total layout dimension, checked at compile time. Not part
    /// of the scenario's identity.
    pub dim_cap: usize,
}

impl PartialEq for Scenario {
    fn eq(&self, other: &Self) -> bool {
        self.registers == other.registers && self.steps == other.steps
    }
}

impl Scenario {
    pub fn new(registers: Vec<RegisterDecl>, steps: Vec<Step>) -> Self {
        Scenario { registers, steps, dim_cap: crate::qcore::DEFAULT_DIM_CAP }
    }

    pub fn register(&self, name: &str) -> Option<&RegisterDecl> {
        self.registers.iter().find(|r| r.name == name)
    }

    /// Records in production order, with the producing step index.
    pub fn records(&self) -> Vec<(&str, usize)> {
        self.steps
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.record().map(|r| (r, i)))
            .collect()
    }

    /// Validates the scenario without evaluating it.
    pub fn validate(&self) -> ScnResult<()> {
        compile::compile(self).map(|_| ())
    }
}
