//! The reasoning auditor: collapse-safety of every agent measurement against
//! every later external measurement, and the validity logic for conditional
//! probabilities over records.

use std::collections::BTreeSet;

use crate::interference::{collapse_safety, SafetyReport, DEFAULT_SAFETY_TOL};
use crate::measure::MeasurementSpec;
use crate::qcore::{lift_decomposition, tensor, SpaceLayout, StateVector, SubspaceDecomposition};

use super::compile::{compile, unitary_prestates, CompiledStep};
use super::eval::{evaluate_with_resolutions, RunResult};
use super::{ScnResult, Scenario, ScenarioError};

/// Safety verdict for one (agent measurement, later external measurement)
/// pair.
#[derive(Debug)]
pub struct AuditEntry {
    pub agent_step: usize,
    pub agent_record: String,
    pub later_step: usize,
    pub later_record: String,
    pub safety: SafetyReport,
}

#[derive(Debug)]
pub struct AuditReport {
    pub entries: Vec<AuditEntry>,
    pub tol: f64,
}

impl AuditReport {
    pub fn all_safe(&self) -> bool {
        self.entries.iter().all(|e| e.safety.safe)
    }

    pub fn unsafe_entries(&self) -> impl Iterator<Item = &AuditEntry> {
        self.entries.iter().filter(|e| !e.safety.safe)
    }

    /// Earliest unsafe later-step index for the given agent record.
    pub fn first_unsafe_step(&self, agent_record: &str) -> Option<usize> {
        self.entries
            .iter()
            .filter(|e| e.agent_record == agent_record && !e.safety.safe)
            .map(|e| e.later_step)
            .min()
    }
}

/// The decomposition induced by an agent measurement: block `m` spans the
/// outcome-`m` target subspace tensored with the agent register reading
/// `m`, lifted to the full layout. Outcome sectors never populated by the
/// measurement (spurious target/record combinations) carry no block; states
/// produced by the scenario have no weight there.
fn induced_decomposition(
    layout: &SpaceLayout,
    agent: &str,
    sub_spec: &MeasurementSpec,
    outcome_record_labels: &[(String, String)],
) -> ScnResult<SubspaceDecomposition> {
    let agent_layout = layout.subset(&[agent])?;
    let mut blocks = Vec::with_capacity(outcome_record_labels.len());
    for (i, (outcome, record_label)) in outcome_record_labels.iter().enumerate() {
        let marker = StateVector::basis_state(agent_layout.clone(), &[record_label])
            .map_err(ScenarioError::Core)?;
        let vectors = sub_spec
            .outcome_vectors(i)
            .iter()
            .map(|v| tensor(v, &marker).map_err(ScenarioError::Core))
            .collect::<ScnResult<Vec<_>>>()?;
        blocks.push((outcome.clone(), vectors));
    }
    let local = SubspaceDecomposition::new(blocks).map_err(ScenarioError::Core)?;
    lift_decomposition(&local, layout).map_err(ScenarioError::Core)
}

/// Runs [`collapse_safety`] for every agent measurement against every later
/// external measurement.
///
/// The comparison state for a later measurement is the branch-free reference
/// evolution: all agent measurements applied unitarily and all external
/// measurements deferred (see [`unitary_prestates`]). This matches the frame
/// in which the "collapse early?" question is posed; it assumes that a
/// deferred external measurement acts as the identity on the registers later
/// steps touch, which holds for the built-in experiments by construction.
pub fn audit(scenario: &Scenario) -> ScnResult<AuditReport> {
    audit_with_tol(scenario, DEFAULT_SAFETY_TOL)
}

pub fn audit_with_tol(scenario: &Scenario, tol: f64) -> ScnResult<AuditReport> {
    let compiled = compile(scenario)?;
    let prestates = unitary_prestates(scenario)?;
    let mut entries = Vec::new();

    for (agent_idx, step) in compiled.steps.iter().enumerate() {
        let CompiledStep::AgentMeasure { record, agent, outcomes, sub_spec, .. } = step else {
            continue;
        };
        let outcome_record_labels: Vec<(String, String)> = outcomes
            .iter()
            .map(|o| {
                let register = scenario.register(agent).expect("validated");
                (o.label.clone(), register.labels[o.record_digit].clone())
            })
            .collect();
        let decomposition = induced_decomposition(
            &compiled.layout,
            agent,
            sub_spec,
            &outcome_record_labels,
        )?;

        for (later_idx, later) in compiled.steps.iter().enumerate().skip(agent_idx + 1) {
            let CompiledStep::ExternalMeasure { record: later_record, sub_spec: later_spec, .. } =
                later
            else {
                continue;
            };
            let lifted = later_spec.lift(&compiled.layout).map_err(ScenarioError::Core)?;
            let safety = collapse_safety(&prestates[later_idx], &decomposition, &lifted, tol)
                .map_err(ScenarioError::Core)?;
            entries.push(AuditEntry {
                agent_step: agent_idx,
                agent_record: record.clone(),
                later_step: later_idx,
                later_record: later_record.clone(),
                safety,
            });
        }
    }
    Ok(AuditReport { entries, tol })
}

/// One (agent measurement, later measurement) pair with both the
/// distribution-gap verdict and the term-level detail: the interference
/// report of every later outcome projector over the agent's branch states.
#[derive(Debug)]
pub struct InterferencePair {
    pub agent_step: usize,
    pub agent_record: String,
    pub later_step: usize,
    pub later_record: String,
    pub safety: SafetyReport,
    pub projector_reports: Vec<(String, crate::interference::InterferenceReport)>,
}

/// Term-level companion of [`audit`]: same pairs and the same comparison
/// states, with per-outcome projector interference reports attached.
pub fn interference_audit(scenario: &Scenario, tol: f64) -> ScnResult<Vec<InterferencePair>> {
    let report = audit_with_tol(scenario, tol)?;
    let compiled = compile(scenario)?;
    let prestates = unitary_prestates(scenario)?;
    let mut pairs = Vec::with_capacity(report.entries.len());
    for entry in report.entries {
        let CompiledStep::AgentMeasure { agent, outcomes, sub_spec, .. } =
            &compiled.steps[entry.agent_step]
        else {
            continue;
        };
        let outcome_record_labels: Vec<(String, String)> = outcomes
            .iter()
            .map(|o| {
                let register = scenario.register(agent).expect("validated");
                (o.label.clone(), register.labels[o.record_digit].clone())
            })
            .collect();
        let decomposition =
            induced_decomposition(&compiled.layout, agent, sub_spec, &outcome_record_labels)?;
        let CompiledStep::ExternalMeasure { sub_spec: later_spec, .. } =
            &compiled.steps[entry.later_step]
        else {
            continue;
        };
        let lifted = later_spec.lift(&compiled.layout).map_err(ScenarioError::Core)?;
        let projector_reports = crate::interference::projector_reports(
            &prestates[entry.later_step],
            &decomposition,
            &lifted,
            tol,
        )
        .map_err(ScenarioError::Core)?;
        pairs.push(InterferencePair {
            agent_step: entry.agent_step,
            agent_record: entry.agent_record,
            later_step: entry.later_step,
            later_record: entry.later_record,
            safety: entry.safety,
            projector_reports,
        });
    }
    Ok(pairs)
}

/// Validity of a conditional-probability query over records.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Validity {
    Valid,
    /// The query conditions through a record that standard quantum reasoning
    /// cannot assign a value to at the time it is needed.
    Invalid { reason: String },
}

#[derive(Debug, Clone)]
pub struct ConditionalProbability {
    pub validity: Validity,
    /// Present exactly when the query is valid.
    pub probability: Option<f64>,
}

fn check_query(
    result: &RunResult,
    query: &[(&str, &str)],
) -> ScnResult<()> {
    let records = result.scenario.records();
    for (record, outcome) in query {
        let Some((_, step_idx)) = records.iter().find(|(r, _)| r == record) else {
            return Err(ScenarioError::UnknownRecord(record.to_string()));
        };
        let known = match &result.scenario.steps[*step_idx] {
            super::Step::AgentMeasure { spec, .. } | super::Step::ExternalMeasure { spec, .. } => {
                spec.labels().contains(outcome)
            }
            _ => false,
        };
        if !known {
            return Err(ScenarioError::UnknownRecordOutcome {
                record: record.to_string(),
                outcome: outcome.to_string(),
            });
        }
    }
    Ok(())
}

/// Conditional probability `P(event | given)` over a run's records, with the
/// validity flag of the reasoning that produces it.
///
/// Both predicates are conjunctions of `(record, outcome)` pairs. When every
/// referenced record is resolved in the run, the value is the plain ratio
/// over the joint distribution. A referenced record that is unresolved (a
/// unitary agent record) is handled by the auditor:
///
/// - if every referenced record is produced before the first later
///   measurement that is collapse-unsafe for that agent's decomposition, the
///   record can be resolved diagnostically without disturbing anything the
///   query touches; the value is computed from a re-evaluation that collapses
///   exactly those records, and the query is VALID;
/// - otherwise some referenced record is only obtained after an experiment
///   that interferes with the conditioning record, the quantum formalism
///   assigns the conditional no value, and the query is INVALID.
///
/// Conditioning on an event of probability zero is an error, not an
/// invalidity.
pub fn conditional_probability(
    result: &RunResult,
    event: &[(&str, &str)],
    given: &[(&str, &str)],
) -> ScnResult<ConditionalProbability> {
    check_query(result, event)?;
    check_query(result, given)?;

    let mut referenced: Vec<&str> = Vec::new();
    for (r, _) in event.iter().chain(given) {
        if !referenced.contains(r) {
            referenced.push(r);
        }
    }
    let unresolved: Vec<&str> =
        referenced.iter().copied().filter(|r| !result.is_resolved(r)).collect();

    let records = result.scenario.records();
    let production_step = |name: &str| -> usize {
        records.iter().find(|(r, _)| *r == name).map(|(_, i)| *i).expect("checked above")
    };

    let (validity, value_result) = if unresolved.is_empty() {
        (Validity::Valid, result.clone())
    } else {
        let report = audit(&result.scenario)?;
        let mut invalid_reason = None;
        'outer: for agent_record in &unresolved {
            let Some(first_unsafe) = report.first_unsafe_step(agent_record) else {
                continue;
            };
            for name in &referenced {
                if production_step(name) >= first_unsafe {
                    invalid_reason = Some(format!(
                        "record `{name}` is only obtained at or after step {first_unsafe}, \
                         which has interference terms with respect to `{agent_record}`'s \
                         record decomposition"
                    ));
                    break 'outer;
                }
            }
        }
        if let Some(reason) = invalid_reason {
            return Ok(ConditionalProbability {
                validity: Validity::Invalid { reason },
                probability: None,
            });
        }
        let mut resolutions: BTreeSet<String> = result.resolutions.clone();
        resolutions.extend(unresolved.iter().map(|s| s.to_string()));
        let rerun = evaluate_with_resolutions(&result.scenario, result.policy, &resolutions)?;
        (Validity::Valid, rerun)
    };

    let p_given = if given.is_empty() { 1.0 } else { value_result.joint_probability(given) };
    if p_given <= super::BRANCH_PRUNE_THRESHOLD {
        return Err(ScenarioError::ZeroProbabilityCondition);
    }
    let mut both: Vec<(&str, &str)> = given.to_vec();
    both.extend_from_slice(event);
    let p_both = value_result.joint_probability(&both);
    Ok(ConditionalProbability { validity, probability: Some(p_both / p_given) })
}
