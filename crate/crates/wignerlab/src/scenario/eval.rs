//! Exact branch-enumeration evaluation and seeded trajectory sampling.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::qcore::{apply_unitary, inner, CoreError, StateVector, PROB_DUST, STRUCTURAL_TOL};

use super::compile::{check_weight, compile, CompiledScenario, CompiledStep};
use super::{Policy, ScnResult, Scenario, ScenarioError, Step, BRANCH_PRUNE_THRESHOLD};

/// Value of a record inside one branch.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum RecordValue {
    Outcome(String),
    /// Written by a unitary agent measurement and not (yet) resolved by any
    /// external measurement; the formalism assigns it no value.
    Unresolved,
}

impl RecordValue {
    pub fn as_outcome(&self) -> Option<&str> {
        match self {
            RecordValue::Outcome(s) => Some(s),
            RecordValue::Unresolved => None,
        }
    }
}

pub type RecordMap = BTreeMap<String, RecordValue>;

/// One collapsed-history record: outcome assignments, probability weight and
/// the residual state.
#[derive(Debug, Clone)]
pub struct Branch {
    pub records: RecordMap,
    pub weight: f64,
    pub state: StateVector,
}

/// Light per-step bookkeeping attached to a run.
#[derive(Debug, Clone)]
pub struct StepAnnotation {
    pub index: usize,
    pub kind: &'static str,
    pub branch_count: usize,
    pub total_weight: f64,
}

/// Outcome of [`evaluate`]: the exact joint distribution over record tuples,
/// final branches and per-step annotations.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub scenario: Scenario,
    pub policy: Policy,
    /// Agent records that were collapsed at their step regardless of policy.
    pub resolutions: BTreeSet<String>,
    pub branches: Vec<Branch>,
    pub joint: Vec<(RecordMap, f64)>,
    pub step_log: Vec<StepAnnotation>,
}

impl RunResult {
    /// Record names in production order.
    pub fn record_names(&self) -> Vec<&str> {
        self.scenario.records().into_iter().map(|(r, _)| r).collect()
    }

    /// Whether every final branch carries an outcome for this record.
    pub fn is_resolved(&self, record: &str) -> bool {
        !self.branches.is_empty()
            && self
                .branches
                .iter()
                .all(|b| matches!(b.records.get(record), Some(RecordValue::Outcome(_))))
    }

    /// Total probability of the record tuples matching every listed
    /// `(record, outcome)` pair.
    pub fn joint_probability(&self, assignment: &[(&str, &str)]) -> f64 {
        self.joint
            .iter()
            .filter(|(records, _)| {
                assignment.iter().all(|(r, o)| {
                    records.get(*r).and_then(RecordValue::as_outcome) == Some(*o)
                })
            })
            .map(|&(_, w)| w)
            .sum()
    }

    /// Joint distribution marginalized onto the given records, in their
    /// order. Aggregates tuples that agree on the kept records.
    pub fn marginal(&self, records: &[&str]) -> Vec<(Vec<RecordValue>, f64)> {
        let mut out: Vec<(Vec<RecordValue>, f64)> = Vec::new();
        for (tuple, w) in &self.joint {
            let key: Vec<RecordValue> = records
                .iter()
                .map(|r| tuple.get(*r).cloned().unwrap_or(RecordValue::Unresolved))
                .collect();
            match out.iter_mut().find(|(k, _)| *k == key) {
                Some((_, acc)) => *acc += w,
                None => out.push((key, *w)),
            }
        }
        out
    }
}

/// Swaps two digits of one register factor across the amplitude vector.
fn swap_digit(
    compiled: &CompiledScenario,
    state: &StateVector,
    pos: usize,
    d1: usize,
    d2: usize,
) -> StateVector {
    if d1 == d2 {
        return state.clone();
    }
    let offset = (d2 as isize - d1 as isize) * compiled.strides[pos] as isize;
    let mut amps = state.amps().to_vec();
    for flat in 0..amps.len() {
        if compiled.digit(flat, pos) == d1 {
            let partner = (flat as isize + offset) as usize;
            amps.swap(flat, partner);
        }
    }
    StateVector::new(state.layout().clone(), amps).expect("permutation keeps amplitudes finite")
}

/// Unnormalized projection onto the span of `vectors`.
fn project(state: &StateVector, vectors: &[StateVector]) -> StateVector {
    let mut out = StateVector::zero(state.layout().clone());
    for v in vectors {
        let a = inner(v, state).expect("same layout by construction");
        out = &out + &v.scaled(a);
    }
    out
}

/// Applies a non-branching step (or an agent measurement in unitary mode).
pub(crate) fn apply_deterministic(
    compiled: &CompiledScenario,
    idx: usize,
    step: &CompiledStep,
    state: &StateVector,
) -> ScnResult<StateVector> {
    let err = |source: CoreError| ScenarioError::Step { step: idx, kind: step.kind(), source };
    match step {
        CompiledStep::Prepare { register_pos, amps } => {
            apply_prepare(compiled, idx, *register_pos, compiled.initial_digits[*register_pos], amps, state)
        }
        CompiledStep::Unitary { map } => apply_unitary(map, state).map_err(err),
        CompiledStep::ControlledPrepare { control_pos, target_pos, target_fid, cases_by_digit } => {
            apply_controlled_prepare(
                compiled,
                idx,
                *control_pos,
                *target_pos,
                *target_fid,
                cases_by_digit,
                state,
            )
        }
        CompiledStep::AgentMeasure { agent_pos, ready_digit, outcomes, .. } => {
            let mut out = StateVector::zero(state.layout().clone());
            let mut covered = StateVector::zero(state.layout().clone());
            for o in outcomes {
                let proj = project(state, &o.vectors);
                covered = &covered + &proj;
                out = &out + &swap_digit(compiled, &proj, *agent_pos, *ready_digit, o.record_digit);
            }
            let residual = state - &covered;
            Ok(&out + &residual)
        }
        CompiledStep::ExternalMeasure { .. } => Err(ScenarioError::Step {
            step: idx,
            kind: "xmeasure",
            source: CoreError::Internal("external measurement is not deterministic".into()),
        }),
    }
}

fn apply_prepare(
    compiled: &CompiledScenario,
    idx: usize,
    pos: usize,
    fid: usize,
    amps: &[Complex64],
    state: &StateVector,
) -> ScnResult<StateVector> {
    let stride = compiled.strides[pos];
    let dim = compiled.dims[pos];
    let mut off_mass = 0.0;
    for (flat, a) in state.amps().iter().enumerate() {
        if compiled.digit(flat, pos) != fid {
            off_mass += a.norm_sqr();
        }
    }
    if off_mass > STRUCTURAL_TOL {
        return Err(ScenarioError::Step {
            step: idx,
            kind: "prepare",
            source: CoreError::InvalidArgument(format!(
                "register is not in its initial configuration (off-label weight {off_mass:.3e})"
            )),
        });
    }
    let mut out = vec![Complex64::new(0.0, 0.0); state.dim()];
    for (flat, a) in state.amps().iter().enumerate() {
        if a.norm_sqr() == 0.0 || compiled.digit(flat, pos) != fid {
            continue;
        }
        let base = flat - fid * stride;
        for (d, c) in amps.iter().enumerate().take(dim) {
            out[base + d * stride] += a * c;
        }
    }
    StateVector::new(state.layout().clone(), out)
        .map_err(|e| ScenarioError::Step { step: idx, kind: "prepare", source: e })?
        .normalized()
        .map_err(|e| ScenarioError::Step { step: idx, kind: "prepare", source: e })
}

fn apply_controlled_prepare(
    compiled: &CompiledScenario,
    idx: usize,
    control_pos: usize,
    target_pos: usize,
    target_fid: usize,
    cases_by_digit: &[Option<Vec<Complex64>>],
    state: &StateVector,
) -> ScnResult<StateVector> {
    let stride = compiled.strides[target_pos];
    let dim = compiled.dims[target_pos];
    let step_err = |source: CoreError| ScenarioError::Step { step: idx, kind: "cprepare", source };
    let mut off_mass = 0.0;
    let mut uncovered_mass = 0.0;
    for (flat, a) in state.amps().iter().enumerate() {
        if compiled.digit(flat, target_pos) != target_fid {
            off_mass += a.norm_sqr();
        } else if cases_by_digit[compiled.digit(flat, control_pos)].is_none() {
            uncovered_mass += a.norm_sqr();
        }
    }
    if off_mass > STRUCTURAL_TOL {
        return Err(step_err(CoreError::InvalidArgument(format!(
            "target register is not in its initial configuration (off-label weight {off_mass:.3e})"
        ))));
    }
    if uncovered_mass > STRUCTURAL_TOL {
        return Err(step_err(CoreError::InvalidArgument(format!(
            "control register carries weight {uncovered_mass:.3e} on outcomes without a case"
        ))));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); state.dim()];
    for (flat, a) in state.amps().iter().enumerate() {
        if a.norm_sqr() == 0.0 || compiled.digit(flat, target_pos) != target_fid {
            continue;
        }
        let Some(case) = &cases_by_digit[compiled.digit(flat, control_pos)] else {
            continue;
        };
        let base = flat - target_fid * stride;
        for (d, c) in case.iter().enumerate().take(dim) {
            out[base + d * stride] += a * c;
        }
    }
    StateVector::new(state.layout().clone(), out)
        .map_err(step_err)?
        .normalized()
        .map_err(step_err)
}

/// Whether an agent measurement collapses under the given policy and
/// per-record resolutions.
fn agent_collapses(
    policy: Policy,
    compiled: &CompiledScenario,
    idx: usize,
    record: &str,
    resolutions: &BTreeSet<String>,
) -> bool {
    resolutions.contains(record)
        || (policy == Policy::CollapseOnRecord && compiled.first_agent_step == Some(idx))
}

struct SplitOutcome<'a> {
    label: &'a str,
    /// Probability weight of this outcome at the parent state.
    probability: f64,
    /// Normalized post-outcome state.
    state: StateVector,
    /// Record digit written on the agent register, if any.
    agent_swap: Option<(usize, usize, usize)>,
}

/// Enumerates the outcomes of a branching step at a given state, checking
/// that no weight is left outside the measured subspace.
fn split_outcomes<'a>(
    idx: usize,
    kind: &'static str,
    state: &StateVector,
    outcomes: impl Iterator<Item = (&'a str, &'a [StateVector], Option<(usize, usize, usize)>)>,
) -> ScnResult<Vec<SplitOutcome<'a>>> {
    let mut out = Vec::new();
    let mut covered = 0.0;
    for (label, vectors, agent_swap) in outcomes {
        let proj = project(state, vectors);
        let p = proj.norm_sq();
        covered += p;
        if p < PROB_DUST {
            continue;
        }
        let normalized = proj
            .normalized()
            .map_err(|e| ScenarioError::Step { step: idx, kind, source: e })?;
        out.push(SplitOutcome { label, probability: p, state: normalized, agent_swap });
    }
    let residual = state.norm_sq() - covered;
    if residual > STRUCTURAL_TOL {
        return Err(ScenarioError::Step {
            step: idx,
            kind,
            source: CoreError::UnmeasuredSupport(residual),
        });
    }
    Ok(out)
}

/// Exact evaluation under a policy.
pub fn evaluate(scenario: &Scenario, policy: Policy) -> ScnResult<RunResult> {
    evaluate_with_resolutions(scenario, policy, &BTreeSet::new())
}

/// Exact evaluation where, additionally, the agent measurements producing the
/// listed records collapse and split branches (a diagnostic resolution of
/// those records). Under [`Policy::UnitaryAgents`] with an empty set this is
/// the plain unitary treatment.
pub fn evaluate_with_resolutions(
    scenario: &Scenario,
    policy: Policy,
    resolutions: &BTreeSet<String>,
) -> ScnResult<RunResult> {
    let compiled = compile(scenario)?;
    for record in resolutions {
        let known = scenario
            .steps
            .iter()
            .any(|s| matches!(s, Step::AgentMeasure { record: r, .. } if r == record));
        if !known {
            return Err(ScenarioError::UnknownRecord(record.clone()));
        }
    }

    let mut branches = vec![Branch {
        records: RecordMap::new(),
        weight: 1.0,
        state: compiled.initial_state(),
    }];
    let mut step_log = Vec::with_capacity(compiled.steps.len());

    for (idx, step) in compiled.steps.iter().enumerate() {
        let mut next: Vec<Branch> = Vec::with_capacity(branches.len());
        match step {
            CompiledStep::AgentMeasure { record, agent_pos, ready_digit, outcomes, .. } => {
                let collapse = agent_collapses(policy, &compiled, idx, record, resolutions);
                for branch in &branches {
                    if collapse {
                        let outcome_iter = outcomes.iter().map(|o| {
                            (
                                o.label.as_str(),
                                o.vectors.as_slice(),
                                Some((*agent_pos, *ready_digit, o.record_digit)),
                            )
                        });
                        for so in
                            split_outcomes(idx, "ameasure", &branch.state, outcome_iter)?
                        {
                            let weight = branch.weight * so.probability;
                            if weight < BRANCH_PRUNE_THRESHOLD {
                                continue;
                            }
                            let (pos, d1, d2) = so.agent_swap.expect("agent swap present");
                            let state = swap_digit(&compiled, &so.state, pos, d1, d2);
                            let mut records = branch.records.clone();
                            records
                                .insert(record.clone(), RecordValue::Outcome(so.label.into()));
                            next.push(Branch { records, weight, state });
                        }
                    } else {
                        let state = apply_deterministic(&compiled, idx, step, &branch.state)?;
                        let mut records = branch.records.clone();
                        records.insert(record.clone(), RecordValue::Unresolved);
                        next.push(Branch { records, weight: branch.weight, state });
                    }
                }
            }
            CompiledStep::ExternalMeasure { record, outcomes, resolves, .. } => {
                for branch in &branches {
                    let outcome_iter =
                        outcomes.iter().map(|o| (o.label.as_str(), o.vectors.as_slice(), None));
                    let splits =
                        split_outcomes(idx, "xmeasure", &branch.state, outcome_iter)?;
                    for so in splits {
                        let weight = branch.weight * so.probability;
                        if weight < BRANCH_PRUNE_THRESHOLD {
                            continue;
                        }
                        let mut records = branch.records.clone();
                        records.insert(record.clone(), RecordValue::Outcome(so.label.into()));
                        let outcome_index = outcomes
                            .iter()
                            .position(|o| o.label == so.label)
                            .expect("label from this spec");
                        for rule in resolves {
                            if records.get(&rule.record) == Some(&RecordValue::Unresolved) {
                                let digit = rule.digit_per_outcome[outcome_index];
                                let label = scenario.registers[rule.register_pos].labels[digit]
                                    .clone();
                                records.insert(rule.record.clone(), RecordValue::Outcome(label));
                            }
                        }
                        next.push(Branch { records, weight, state: so.state });
                    }
                }
            }
            _ => {
                for branch in &branches {
                    let state = apply_deterministic(&compiled, idx, step, &branch.state)?;
                    next.push(Branch { records: branch.records.clone(), weight: branch.weight, state });
                }
            }
        }
        branches = next;
        let total: f64 = branches.iter().map(|b| b.weight).sum();
        check_weight(total, idx, step.kind())?;
        step_log.push(StepAnnotation {
            index: idx,
            kind: step.kind(),
            branch_count: branches.len(),
            total_weight: total,
        });
    }

    let mut joint: Vec<(RecordMap, f64)> = Vec::new();
    for b in &branches {
        match joint.iter_mut().find(|(records, _)| *records == b.records) {
            Some((_, w)) => *w += b.weight,
            None => joint.push((b.records.clone(), b.weight)),
        }
    }

    Ok(RunResult {
        scenario: scenario.clone(),
        policy,
        resolutions: resolutions.clone(),
        branches,
        joint,
        step_log,
    })
}

/// Empirical counts per record tuple from independent trajectory runs.
#[derive(Debug, Clone)]
pub struct SampleCounts {
    pub n: u64,
    pub seed: u64,
    pub counts: Vec<(RecordMap, u64)>,
}

impl SampleCounts {
    pub fn frequency(&self, assignment: &[(&str, &str)]) -> f64 {
        let hits: u64 = self
            .counts
            .iter()
            .filter(|(records, _)| {
                assignment.iter().all(|(r, o)| {
                    records.get(*r).and_then(RecordValue::as_outcome) == Some(*o)
                })
            })
            .map(|&(_, c)| c)
            .sum();
        hits as f64 / self.n as f64
    }
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN_GAMMA);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-repetition generator: the ChaCha12 key is the first four outputs of a
/// splitmix64 stream seeded with `master_seed XOR ((rep + 1) * 0x9E3779B97F4A7C15)`,
/// laid out little-endian. Repetitions are therefore independent of each
/// other and of evaluation order.
pub(crate) fn repetition_rng(master_seed: u64, rep: u64) -> ChaCha12Rng {
    let mut state = master_seed ^ GOLDEN_GAMMA.wrapping_mul(rep.wrapping_add(1));
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}

/// Uniform draw in [0, 1) from the top 53 bits of the next keystream word.
fn unit_f64(rng: &mut ChaCha12Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Trajectory tree: every path from the root is one possible run, branching
/// exactly where a trajectory draws. The conditional outcome probabilities at
/// each node are the ones a single trajectory would compute from its state,
/// so walking the tree is draw-for-draw identical to simulating the run, at a
/// fraction of the cost.
enum TrajectoryNode {
    Leaf { records: RecordMap },
    Branch { probabilities: Vec<f64>, children: Vec<TrajectoryNode> },
}

fn build_trajectory_tree(
    compiled: &CompiledScenario,
    scenario: &Scenario,
    policy: Policy,
    resolutions: &BTreeSet<String>,
    mut records: RecordMap,
    mut state: StateVector,
    mut idx: usize,
) -> ScnResult<TrajectoryNode> {
    while let Some(step) = compiled.steps.get(idx) {
        match step {
            CompiledStep::AgentMeasure { record, agent_pos, ready_digit, outcomes, .. }
                if agent_collapses(policy, compiled, idx, record, resolutions) =>
            {
                let outcome_iter = outcomes.iter().map(|o| {
                    (
                        o.label.as_str(),
                        o.vectors.as_slice(),
                        Some((*agent_pos, *ready_digit, o.record_digit)),
                    )
                });
                let splits = split_outcomes(idx, "ameasure", &state, outcome_iter)?;
                let mut probabilities = Vec::with_capacity(splits.len());
                let mut children = Vec::with_capacity(splits.len());
                for so in &splits {
                    let (pos, d1, d2) = so.agent_swap.expect("agent swap present");
                    let child_state = swap_digit(compiled, &so.state, pos, d1, d2);
                    let mut child_records = records.clone();
                    child_records.insert(record.clone(), RecordValue::Outcome(so.label.into()));
                    probabilities.push(so.probability);
                    children.push(build_trajectory_tree(
                        compiled,
                        scenario,
                        policy,
                        resolutions,
                        child_records,
                        child_state,
                        idx + 1,
                    )?);
                }
                return Ok(TrajectoryNode::Branch { probabilities, children });
            }
            CompiledStep::AgentMeasure { record, .. } => {
                state = apply_deterministic(compiled, idx, step, &state)?;
                records.insert(record.clone(), RecordValue::Unresolved);
            }
            CompiledStep::ExternalMeasure { record, outcomes, resolves, .. } => {
                let outcome_iter =
                    outcomes.iter().map(|o| (o.label.as_str(), o.vectors.as_slice(), None));
                let splits = split_outcomes(idx, "xmeasure", &state, outcome_iter)?;
                let mut probabilities = Vec::with_capacity(splits.len());
                let mut children = Vec::with_capacity(splits.len());
                for so in &splits {
                    let outcome_index = outcomes
                        .iter()
                        .position(|o| o.label == so.label)
                        .expect("label from this spec");
                    let mut child_records = records.clone();
                    child_records.insert(record.clone(), RecordValue::Outcome(so.label.into()));
                    for rule in resolves {
                        if child_records.get(&rule.record) == Some(&RecordValue::Unresolved) {
                            let digit = rule.digit_per_outcome[outcome_index];
                            let label =
                                scenario.registers[rule.register_pos].labels[digit].clone();
                            child_records
                                .insert(rule.record.clone(), RecordValue::Outcome(label));
                        }
                    }
                    probabilities.push(so.probability);
                    children.push(build_trajectory_tree(
                        compiled,
                        scenario,
                        policy,
                        resolutions,
                        child_records,
                        so.state.clone(),
                        idx + 1,
                    )?);
                }
                return Ok(TrajectoryNode::Branch { probabilities, children });
            }
            _ => {
                state = apply_deterministic(compiled, idx, step, &state)?;
            }
        }
        idx += 1;
    }
    Ok(TrajectoryNode::Leaf { records })
}

/// Seeded Monte Carlo: `n` independent trajectory repetitions of the
/// scenario. Each branching step consumes exactly one uniform draw from the
/// repetition's own generator, in step order; outcomes are selected by
/// cumulative sum in spec order. Counts are reproducible bit-for-bit given
/// `(seed, n)`.
pub fn sample(scenario: &Scenario, policy: Policy, n: u64, seed: u64) -> ScnResult<SampleCounts> {
    if n == 0 {
        return Err(ScenarioError::Invalid("sample count must be at least 1".into()));
    }
    let compiled = compile(scenario)?;
    let tree = build_trajectory_tree(
        &compiled,
        scenario,
        policy,
        &BTreeSet::new(),
        RecordMap::new(),
        compiled.initial_state(),
        0,
    )?;

    let mut counts: Vec<(RecordMap, u64)> = Vec::new();
    for rep in 0..n {
        let mut rng = repetition_rng(seed, rep);
        let mut node = &tree;
        loop {
            match node {
                TrajectoryNode::Leaf { records } => {
                    match counts.iter_mut().find(|(r, _)| r == records) {
                        Some((_, c)) => *c += 1,
                        None => counts.push((records.clone(), 1)),
                    }
                    break;
                }
                TrajectoryNode::Branch { probabilities, children } => {
                    if children.is_empty() {
                        return Err(ScenarioError::Invalid(
                            "no outcome has positive probability".into(),
                        ));
                    }
                    let u = unit_f64(&mut rng);
                    let mut cum = 0.0;
                    let mut chosen = children.len() - 1;
                    for (i, p) in probabilities.iter().enumerate() {
                        cum += p;
                        if u < cum {
                            chosen = i;
                            break;
                        }
                    }
                    node = &children[chosen];
                }
            }
        }
    }

    Ok(SampleCounts { n, seed, counts })
}
