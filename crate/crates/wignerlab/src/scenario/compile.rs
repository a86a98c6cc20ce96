//! Validation and compilation of scenarios into an executable form.
//!
//! Compilation builds the full tensor layout from the register declarations,
//! checks every structural invariant, and precomputes the lifted block
//! vectors, digit positions and resolution rules that evaluation needs.

use num_complex::Complex64;

use crate::measure::MeasurementSpec;
use crate::qcore::{
    CoreError, OrthonormalBasis, SpaceLayout, StateVector, SubspaceDecomposition, UnitaryMap,
    Factor, STRUCTURAL_TOL,
};

use super::{
    RegisterKind, ScnResult, Scenario, ScenarioError, SpecDecl, SpecKind, Step, PREPARE_NORM_TOL,
};

pub(crate) struct AgentOutcome {
    pub label: String,
    /// Digit of the agent-record register that this outcome writes.
    pub record_digit: usize,
    /// Spanning vectors of the outcome's subspace, lifted to the full layout.
    pub vectors: Vec<StateVector>,
}

pub(crate) struct ExternalOutcome {
    pub label: String,
    pub vectors: Vec<StateVector>,
}

/// An external measurement whose blocks are each supported on a single digit
/// of an earlier agent's record register resolves that agent's record.
pub(crate) struct ResolveRule {
    pub record: String,
    pub register_pos: usize,
    /// Agent-register digit pinned by each outcome of the external spec.
    pub digit_per_outcome: Vec<usize>,
}

pub(crate) enum CompiledStep {
    Prepare {
        register_pos: usize,
        /// Renormalized exactly.
        amps: Vec<Complex64>,
    },
    Unitary {
        map: UnitaryMap,
    },
    AgentMeasure {
        record: String,
        agent: String,
        agent_pos: usize,
        ready_digit: usize,
        outcomes: Vec<AgentOutcome>,
        /// The declared spec on the targets sub-layout, for the auditor.
        sub_spec: MeasurementSpec,
    },
    ControlledPrepare {
        control_pos: usize,
        target_pos: usize,
        target_fid: usize,
        /// Case amplitudes indexed by the digit of the control register;
        /// `None` marks digits no case covers (must stay unpopulated).
        cases_by_digit: Vec<Option<Vec<Complex64>>>,
    },
    ExternalMeasure {
        record: String,
        outcomes: Vec<ExternalOutcome>,
        resolves: Vec<ResolveRule>,
        sub_spec: MeasurementSpec,
    },
}

impl CompiledStep {
    pub fn kind(&self) -> &'static str {
        match self {
            CompiledStep::Prepare { .. } => "prepare",
            CompiledStep::Unitary { .. } => "unitary",
            CompiledStep::AgentMeasure { .. } => "ameasure",
            CompiledStep::ControlledPrepare { .. } => "cprepare",
            CompiledStep::ExternalMeasure { .. } => "xmeasure",
        }
    }
}

pub(crate) struct CompiledScenario {
    pub layout: SpaceLayout,
    pub dims: Vec<usize>,
    pub strides: Vec<usize>,
    pub steps: Vec<CompiledStep>,
    pub first_agent_step: Option<usize>,
    /// Initial digit of every register: the first label for systems, the
    /// ready label for agents.
    pub initial_digits: Vec<usize>,
}

impl CompiledScenario {
    pub fn digit(&self, flat: usize, register_pos: usize) -> usize {
        (flat / self.strides[register_pos]) % self.dims[register_pos]
    }

    pub fn initial_state(&self) -> StateVector {
        let flat = self
            .initial_digits
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&d, &dim)| acc * dim + d);
        StateVector::from_flat(self.layout.clone(), flat).expect("initial index in range")
    }
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

fn step_err(step: usize, kind: &'static str) -> impl FnOnce(CoreError) -> ScenarioError {
    move |source| ScenarioError::Step { step, kind, source }
}

pub(crate) fn compile(scenario: &Scenario) -> ScnResult<CompiledScenario> {
    if scenario.registers.is_empty() {
        return Err(invalid("no registers declared"));
    }
    for (i, r) in scenario.registers.iter().enumerate() {
        if scenario.registers[..i].iter().any(|o| o.name == r.name) {
            return Err(invalid(format!("register `{}` declared twice", r.name)));
        }
        if let RegisterKind::Agent { ready } = &r.kind {
            if !r.labels.contains(ready) {
                return Err(invalid(format!(
                    "agent `{}` ready label `{}` is not among its labels",
                    r.name, ready
                )));
            }
        }
    }
    let factors: Vec<Factor> =
        scenario.registers.iter().map(|r| Factor::new(&r.name, r.labels.clone())).collect();
    let layout = SpaceLayout::with_cap(factors, scenario.dim_cap).map_err(ScenarioError::Core)?;
    let dims = layout.dims();
    let mut strides = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let initial_digits: Vec<usize> = scenario
        .registers
        .iter()
        .map(|r| match &r.kind {
            RegisterKind::System => 0,
            RegisterKind::Agent { ready } => {
                r.labels.iter().position(|l| l == ready).expect("validated above")
            }
        })
        .collect();

    let mut seen_records: Vec<&str> = Vec::new();
    let mut agents_used: Vec<&str> = Vec::new();
    // (record, agent register pos, agent step index, outcome labels)
    let mut agent_records: Vec<(String, usize, usize, Vec<String>)> = Vec::new();
    let mut steps = Vec::with_capacity(scenario.steps.len());
    let mut first_agent_step = None;

    for (idx, step) in scenario.steps.iter().enumerate() {
        if let Some(record) = step.record() {
            if seen_records.contains(&record) {
                return Err(invalid(format!("record `{record}` written twice")));
            }
            seen_records.push(record);
        }
        let compiled = match step {
            Step::Prepare { register, amplitudes } => {
                let pos = layout
                    .factor_position(register)
                    .ok_or_else(|| invalid(format!("unknown register `{register}`")))?;
                let amps =
                    normalized_amps(amplitudes, dims[pos], idx, "prepare", register)?;
                CompiledStep::Prepare { register_pos: pos, amps }
            }
            Step::ApplyUnitary { registers, matrix } => {
                let sub = sub_layout(&layout, registers)?;
                let map = UnitaryMap::new(sub, matrix.clone())
                    .map_err(step_err(idx, "unitary"))?
                    .lift(&layout)
                    .map_err(step_err(idx, "unitary"))?;
                CompiledStep::Unitary { map }
            }
            Step::AgentMeasure { agent, targets, spec, record } => {
                let agent_pos = layout
                    .factor_position(agent)
                    .ok_or_else(|| invalid(format!("unknown register `{agent}`")))?;
                let decl = &scenario.registers[agent_pos];
                let ready_digit = match &decl.kind {
                    RegisterKind::Agent { ready } => {
                        decl.labels.iter().position(|l| l == ready).expect("validated")
                    }
                    RegisterKind::System => {
                        return Err(invalid(format!(
                            "register `{agent}` is not an agent register"
                        )))
                    }
                };
                if agents_used.contains(&agent.as_str()) {
                    return Err(invalid(format!(
                        "agent register `{agent}` measured more than once"
                    )));
                }
                agents_used.push(agent);
                if targets.contains(agent) {
                    return Err(invalid(format!(
                        "agent register `{agent}` cannot be among its own targets"
                    )));
                }
                let sub = sub_layout(&layout, targets)?;
                let sub_spec = build_spec(spec, &sub, idx)?;
                let lifted = sub_spec.lift(&layout).map_err(step_err(idx, "ameasure"))?;
                let mut outcomes = Vec::with_capacity(spec.outcomes.len());
                for (i, (label, _)) in spec.outcomes.iter().enumerate() {
                    let record_digit = decl.labels.iter().position(|l| l == label).ok_or_else(
                        || {
                            invalid(format!(
                                "outcome `{label}` is not a label of agent register `{agent}`"
                            ))
                        },
                    )?;
                    outcomes.push(AgentOutcome {
                        label: label.clone(),
                        record_digit,
                        vectors: lifted.outcome_vectors(i).to_vec(),
                    });
                }
                agent_records.push((
                    record.clone(),
                    agent_pos,
                    idx,
                    spec.outcomes.iter().map(|(l, _)| l.clone()).collect(),
                ));
                first_agent_step.get_or_insert(idx);
                CompiledStep::AgentMeasure {
                    record: record.clone(),
                    agent: agent.clone(),
                    agent_pos,
                    ready_digit,
                    outcomes,
                    sub_spec,
                }
            }
            Step::ControlledPrepare { control, cases, target } => {
                let (_, control_pos, _, control_outcomes) = agent_records
                    .iter()
                    .find(|(r, ..)| r == control)
                    .ok_or_else(|| {
                        invalid(format!(
                            "cprepare control `{control}` is not a record of an earlier agent \
                             measurement"
                        ))
                    })?;
                let target_pos = layout
                    .factor_position(target)
                    .ok_or_else(|| invalid(format!("unknown register `{target}`")))?;
                if target_pos == *control_pos {
                    return Err(invalid(format!(
                        "cprepare target `{target}` is the control's own record register"
                    )));
                }
                let control_decl = &scenario.registers[*control_pos];
                for (label, _) in cases {
                    if !control_outcomes.contains(label) {
                        return Err(invalid(format!(
                            "cprepare case `{label}` is not an outcome of record `{control}`"
                        )));
                    }
                }
                for outcome in control_outcomes {
                    if !cases.iter().any(|(l, _)| l == outcome) {
                        return Err(invalid(format!(
                            "cprepare on `{control}` misses a case for outcome `{outcome}`"
                        )));
                    }
                }
                let mut cases_by_digit: Vec<Option<Vec<Complex64>>> =
                    vec![None; dims[*control_pos]];
                for (label, amps) in cases {
                    let digit = control_decl
                        .labels
                        .iter()
                        .position(|l| l == label)
                        .expect("outcome labels are agent labels");
                    let amps =
                        normalized_amps(amps, dims[target_pos], idx, "cprepare", target)?;
                    cases_by_digit[digit] = Some(amps);
                }
                CompiledStep::ControlledPrepare {
                    control_pos: *control_pos,
                    target_pos,
                    target_fid: initial_digits[target_pos],
                    cases_by_digit,
                }
            }
            Step::ExternalMeasure { targets, spec, record } => {
                let sub = sub_layout(&layout, targets)?;
                let sub_spec = build_spec(spec, &sub, idx)?;
                let lifted = sub_spec.lift(&layout).map_err(step_err(idx, "xmeasure"))?;
                let outcomes: Vec<ExternalOutcome> = (0..lifted.outcome_count())
                    .map(|i| ExternalOutcome {
                        label: spec.outcomes[i].0.clone(),
                        vectors: lifted.outcome_vectors(i).to_vec(),
                    })
                    .collect();
                let resolves =
                    resolution_rules(scenario, targets, spec, &sub, &agent_records);
                CompiledStep::ExternalMeasure {
                    record: record.clone(),
                    outcomes,
                    resolves,
                    sub_spec,
                }
            }
        };
        steps.push(compiled);
    }

    Ok(CompiledScenario { layout, dims, strides, steps, first_agent_step, initial_digits })
}

fn sub_layout(layout: &SpaceLayout, registers: &[String]) -> ScnResult<SpaceLayout> {
    if registers.is_empty() {
        return Err(invalid("step targets no registers"));
    }
    for (i, r) in registers.iter().enumerate() {
        if registers[..i].contains(r) {
            return Err(invalid(format!("register `{r}` listed twice in one step")));
        }
    }
    let names: Vec<&str> = registers.iter().map(String::as_str).collect();
    layout
        .subset(&names)
        .map_err(|e| invalid(format!("{e}")))
}

fn normalized_amps(
    amps: &[Complex64],
    want: usize,
    step: usize,
    kind: &'static str,
    register: &str,
) -> ScnResult<Vec<Complex64>> {
    if amps.len() != want {
        return Err(invalid(format!(
            "step {step} ({kind}): register `{register}` needs {want} amplitudes, got {}",
            amps.len()
        )));
    }
    if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
        return Err(invalid(format!(
            "step {step} ({kind}): non-finite amplitude for `{register}`"
        )));
    }
    let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > PREPARE_NORM_TOL {
        return Err(invalid(format!(
            "step {step} ({kind}): amplitudes for `{register}` have norm {norm}, more than 1e-6 \
             from 1"
        )));
    }
    Ok(amps.iter().map(|a| a / norm).collect())
}

fn build_spec(decl: &SpecDecl, sub: &SpaceLayout, step: usize) -> ScnResult<MeasurementSpec> {
    let dim = sub.total_dim();
    let mk_state = |amps: &Vec<Complex64>| -> ScnResult<StateVector> {
        StateVector::new(sub.clone(), amps.clone())
            .map_err(|e| invalid(format!("step {step}: {e}")))
    };
    match decl.kind {
        SpecKind::Basis => {
            let mut vectors = Vec::with_capacity(decl.outcomes.len());
            let mut labels = Vec::with_capacity(decl.outcomes.len());
            for (label, vecs) in &decl.outcomes {
                if vecs.len() != 1 {
                    return Err(invalid(format!(
                        "step {step}: basis outcome `{label}` must have exactly one vector"
                    )));
                }
                if vecs[0].len() != dim {
                    return Err(invalid(format!(
                        "step {step}: outcome `{label}` needs {dim} amplitudes, got {}",
                        vecs[0].len()
                    )));
                }
                vectors.push(mk_state(&vecs[0])?);
                labels.push(label.clone());
            }
            let basis = OrthonormalBasis::new(vectors, labels)
                .map_err(|e| invalid(format!("step {step}: {e}")))?;
            Ok(MeasurementSpec::Basis(basis))
        }
        SpecKind::Blocks => {
            let mut blocks = Vec::with_capacity(decl.outcomes.len());
            for (label, vecs) in &decl.outcomes {
                let mut states = Vec::with_capacity(vecs.len());
                for v in vecs {
                    if v.len() != dim {
                        return Err(invalid(format!(
                            "step {step}: outcome `{label}` needs {dim} amplitudes per vector, \
                             got {}",
                            v.len()
                        )));
                    }
                    states.push(mk_state(v)?);
                }
                blocks.push((label.clone(), states));
            }
            let decomposition = SubspaceDecomposition::new(blocks)
                .map_err(|e| invalid(format!("step {step}: {e}")))?;
            Ok(MeasurementSpec::Decomposition(decomposition))
        }
    }
}

/// Sector rule: an external measurement resolves an earlier agent record when
/// the agent's register is among the targets and every outcome block is
/// supported on a single digit of that register.
fn resolution_rules(
    scenario: &Scenario,
    targets: &[String],
    spec: &SpecDecl,
    sub: &SpaceLayout,
    agent_records: &[(String, usize, usize, Vec<String>)],
) -> Vec<ResolveRule> {
    let mut rules = Vec::new();
    for (record, register_pos, _, _) in agent_records {
        let name = &scenario.registers[*register_pos].name;
        let Some(sub_pos) = targets.iter().position(|t| t == name) else {
            continue;
        };
        let sub_dims = sub.dims();
        let stride: usize = sub_dims[sub_pos + 1..].iter().product();
        let dim = sub_dims[sub_pos];
        let mut digit_per_outcome = Vec::with_capacity(spec.outcomes.len());
        let mut uniform = true;
        'outcomes: for (_, vecs) in &spec.outcomes {
            let mut pinned: Option<usize> = None;
            for v in vecs {
                for (i, a) in v.iter().enumerate() {
                    if a.norm_sqr() > 1e-18 {
                        let d = (i / stride) % dim;
                        match pinned {
                            None => pinned = Some(d),
                            Some(p) if p != d => {
                                uniform = false;
                                break 'outcomes;
                            }
                            Some(_) => {}
                        }
                    }
                }
            }
            match pinned {
                Some(d) => digit_per_outcome.push(d),
                None => {
                    uniform = false;
                    break;
                }
            }
        }
        if uniform {
            rules.push(ResolveRule {
                record: record.clone(),
                register_pos: *register_pos,
                digit_per_outcome,
            });
        }
    }
    rules
}

/// The state just before each step (and the final state last) when every
/// agent measurement is applied unitarily and every external measurement is
/// deferred. This is the branch-free reference evolution the auditor and the
/// built-in analyses reason about.
pub fn unitary_prestates(scenario: &Scenario) -> ScnResult<Vec<StateVector>> {
    let compiled = compile(scenario)?;
    let mut states = Vec::with_capacity(compiled.steps.len() + 1);
    let mut state = compiled.initial_state();
    for (idx, step) in compiled.steps.iter().enumerate() {
        states.push(state.clone());
        state = match step {
            CompiledStep::ExternalMeasure { .. } => state,
            _ => super::eval::apply_deterministic(&compiled, idx, step, &state)?,
        };
    }
    states.push(state);
    Ok(states)
}

/// Checks that the total weight drift stays inside the structural tolerance.
pub(crate) fn check_weight(total: f64, step: usize, kind: &'static str) -> ScnResult<()> {
    if !(total.is_finite()) || (total - 1.0).abs() > STRUCTURAL_TOL {
        return Err(ScenarioError::Step {
            step,
            kind,
            source: CoreError::Internal(format!("branch weights sum to {total}, not 1")),
        });
    }
    Ok(())
}
