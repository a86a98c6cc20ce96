//! Built-in experiments: the extended Wigner's-friend (Frauchiger–Renner)
//! protocol, the single-friend basis paradox, and the double slit with and
//! without which-way detectors.
//!
//! Each laboratory is modeled by the two-dimensional span of its two possible
//! record configurations, so the friend registers are 2-level and the full
//! Frauchiger–Renner layout is `coin ⊗ fbar ⊗ spin ⊗ f` (16-dimensional).
//! Register and record names used throughout:
//!
//! | register | kind   | labels        | record |
//! |----------|--------|---------------|--------|
//! | `coin`   | system | `h`, `t`      |        |
//! | `fbar`   | agent  | `heads/tails` | `Fbar` |
//! | `spin`   | system | `u`, `d`      |        |
//! | `f`      | agent  | `up/down`     | `F`    |
//! |          |        |               | `Wbar`, `W` (outside measurements) |

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::interference::{interference_report, InterferenceReport, DEFAULT_SAFETY_TOL};
use crate::measure::{observable_from, MeasurementSpec};
use crate::qcore::{
    inner, lift_basis, tensor, OrthonormalBasis, SelfAdjointOperator, SpaceLayout, StateVector,
    SubspaceDecomposition,
};
use crate::scenario::{
    audit, conditional_probability, evaluate, Policy, RegisterDecl, ScnResult, Scenario, SpecDecl,
    Step, Validity,
};

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn amps(xs: &[f64]) -> Vec<Complex64> {
    xs.iter().map(|&x| re(x)).collect()
}

fn coin_layout() -> SpaceLayout {
    SpaceLayout::single("coin", ["h", "t"]).expect("valid layout")
}

fn fbar_layout() -> SpaceLayout {
    SpaceLayout::single("fbar", ["heads", "tails"]).expect("valid layout")
}

fn spin_layout() -> SpaceLayout {
    SpaceLayout::single("spin", ["u", "d"]).expect("valid layout")
}

fn f_layout() -> SpaceLayout {
    SpaceLayout::single("f", ["up", "down"]).expect("valid layout")
}

fn wbar_layout() -> SpaceLayout {
    SpaceLayout::single("wbar", ["ok", "fail"]).expect("valid layout")
}

/// The named states of the nested-lab experiment, over the layouts of the
/// built-in scenario.
///
/// The lab-level states live on two-register sub-layouts: `phi_h = psi_h ⊗
/// theta_h` on `coin ⊗ fbar`, `phi_u = psi_u ⊗ theta_u` on `spin ⊗ f`, the
/// observer bases `phi_obar/phi_fbar` and `phi_o/phi_f` are the Hadamard-type
/// combinations of those, `psi` is the 16-dimensional post-friends state and
/// `theta` the 32-dimensional state after the first outside observer is
/// itself modeled as an agent with record register `wbar`.
pub struct FrStates {
    pub psi_h: StateVector,
    pub psi_t: StateVector,
    pub psi_u: StateVector,
    pub psi_d: StateVector,
    pub theta_h: StateVector,
    pub theta_t: StateVector,
    pub theta_u: StateVector,
    pub theta_d: StateVector,
    pub phi_h: StateVector,
    pub phi_t: StateVector,
    pub phi_u: StateVector,
    pub phi_d: StateVector,
    pub phi_obar: StateVector,
    pub phi_fbar: StateVector,
    pub phi_o: StateVector,
    pub phi_f: StateVector,
    pub theta_obar: StateVector,
    pub theta_fbar: StateVector,
    /// Joint state of both labs after the second friend's measurement:
    /// `(phi_h⊗phi_d + phi_t⊗phi_u + phi_t⊗phi_d)/sqrt(3)`.
    pub psi: StateVector,
    /// State of labs plus the first outside observer's record after that
    /// observer measures unitarily.
    pub theta: StateVector,
}

impl FrStates {
    pub fn new() -> FrStates {
        let basis = |l: &SpaceLayout, label: &str| {
            StateVector::basis_state(l.clone(), &[label]).expect("label exists")
        };
        let coin = coin_layout();
        let fbar = fbar_layout();
        let spin = spin_layout();
        let f = f_layout();
        let wbar = wbar_layout();

        let psi_h = basis(&coin, "h");
        let psi_t = basis(&coin, "t");
        let psi_u = basis(&spin, "u");
        let psi_d = basis(&spin, "d");
        let theta_h = basis(&fbar, "heads");
        let theta_t = basis(&fbar, "tails");
        let theta_u = basis(&f, "up");
        let theta_d = basis(&f, "down");

        let phi_h = tensor(&psi_h, &theta_h).expect("disjoint factors");
        let phi_t = tensor(&psi_t, &theta_t).expect("disjoint factors");
        let phi_u = tensor(&psi_u, &theta_u).expect("disjoint factors");
        let phi_d = tensor(&psi_d, &theta_d).expect("disjoint factors");

        let phi_obar = (&phi_h - &phi_t).scaled_re(FRAC_1_SQRT_2);
        let phi_fbar = (&phi_h + &phi_t).scaled_re(FRAC_1_SQRT_2);
        let phi_o = (&phi_d - &phi_u).scaled_re(FRAC_1_SQRT_2);
        let phi_f = (&phi_d + &phi_u).scaled_re(FRAC_1_SQRT_2);

        let theta_obar = basis(&wbar, "ok");
        let theta_fbar = basis(&wbar, "fail");

        let hd = tensor(&phi_h, &phi_d).expect("disjoint factors");
        let tu = tensor(&phi_t, &phi_u).expect("disjoint factors");
        let td = tensor(&phi_t, &phi_d).expect("disjoint factors");
        let psi = (&(&hd + &tu) + &td).scaled_re(1.0 / 3.0_f64.sqrt());

        // theta = (P_okbar psi) ⊗ theta_obar + (P_failbar psi) ⊗ theta_fbar,
        // built directly from the wing projections of psi.
        let wings = lift_basis(
            &OrthonormalBasis::new(
                vec![phi_obar.clone(), phi_fbar.clone()],
                vec!["ok".into(), "fail".into()],
            )
            .expect("orthonormal pair"),
            psi.layout(),
        )
        .expect("factors exist");
        let p_ok = wings.project(&psi, 0).expect("block 0");
        let p_fail = wings.project(&psi, 1).expect("block 1");
        let theta = &tensor(&p_ok, &theta_obar).expect("disjoint factors")
            + &tensor(&p_fail, &theta_fbar).expect("disjoint factors");

        FrStates {
            psi_h,
            psi_t,
            psi_u,
            psi_d,
            theta_h,
            theta_t,
            theta_u,
            theta_d,
            phi_h,
            phi_t,
            phi_u,
            phi_d,
            phi_obar,
            phi_fbar,
            phi_o,
            phi_f,
            theta_obar,
            theta_fbar,
            psi,
            theta,
        }
    }

    /// The four record-product states `phi_x ⊗ phi_y` over the full layout,
    /// in the order (h,u), (h,d), (t,u), (t,d).
    pub fn record_product_states(&self) -> [StateVector; 4] {
        let t = |a: &StateVector, b: &StateVector| tensor(a, b).expect("disjoint factors");
        [
            t(&self.phi_h, &self.phi_u),
            t(&self.phi_h, &self.phi_d),
            t(&self.phi_t, &self.phi_u),
            t(&self.phi_t, &self.phi_d),
        ]
    }

    /// `theta_x ⊗ phi_ybar ⊗ phi_z` over the 32-dimensional layout, in the
    /// order (ok,ok,u), (ok,ok,d), (fail,fail,u), (fail,fail,d).
    pub fn observer_record_states(&self) -> [StateVector; 4] {
        let t3 = |wing: &StateVector, lab: &StateVector, rec: &StateVector| {
            tensor(&tensor(wing, lab).expect("disjoint"), rec).expect("disjoint")
        };
        [
            t3(&self.phi_obar, &self.phi_u, &self.theta_obar),
            t3(&self.phi_obar, &self.phi_d, &self.theta_obar),
            t3(&self.phi_fbar, &self.phi_u, &self.theta_fbar),
            t3(&self.phi_fbar, &self.phi_d, &self.theta_fbar),
        ]
    }
}

impl Default for FrStates {
    fn default() -> Self {
        FrStates::new()
    }
}

fn fr_registers() -> Vec<RegisterDecl> {
    vec![
        RegisterDecl::system("coin", &["h", "t"]),
        RegisterDecl::agent("fbar", "heads", &["heads", "tails"]),
        RegisterDecl::system("spin", &["u", "d"]),
        RegisterDecl::agent("f", "up", &["up", "down"]),
    ]
}

fn fr_prefix_steps() -> Vec<Step> {
    let s = FRAC_1_SQRT_2;
    vec![
        Step::Prepare {
            register: "coin".into(),
            amplitudes: amps(&[1.0 / 3.0_f64.sqrt(), 2.0_f64.sqrt() / 3.0_f64.sqrt()]),
        },
        Step::AgentMeasure {
            agent: "fbar".into(),
            targets: vec!["coin".into()],
            spec: SpecDecl::basis(vec![
                ("heads".into(), amps(&[1.0, 0.0])),
                ("tails".into(), amps(&[0.0, 1.0])),
            ]),
            record: "Fbar".into(),
        },
        Step::ControlledPrepare {
            control: "Fbar".into(),
            cases: vec![
                ("heads".into(), amps(&[0.0, 1.0])),
                ("tails".into(), amps(&[s, s])),
            ],
            target: "spin".into(),
        },
        Step::AgentMeasure {
            agent: "f".into(),
            targets: vec!["spin".into()],
            spec: SpecDecl::basis(vec![
                ("up".into(), amps(&[1.0, 0.0])),
                ("down".into(), amps(&[0.0, 1.0])),
            ]),
            record: "F".into(),
        },
    ]
}

fn wbar_step() -> Step {
    let s = FRAC_1_SQRT_2;
    Step::ExternalMeasure {
        targets: vec!["coin".into(), "fbar".into()],
        spec: SpecDecl::blocks(vec![
            ("ok".into(), vec![amps(&[s, 0.0, 0.0, -s])]),
            ("fail".into(), vec![amps(&[s, 0.0, 0.0, s])]),
        ]),
        record: "Wbar".into(),
    }
}

fn w_step() -> Step {
    let s = FRAC_1_SQRT_2;
    Step::ExternalMeasure {
        targets: vec!["spin".into(), "f".into()],
        spec: SpecDecl::blocks(vec![
            ("ok".into(), vec![amps(&[-s, 0.0, 0.0, s])]),
            ("fail".into(), vec![amps(&[s, 0.0, 0.0, s])]),
        ]),
        record: "W".into(),
    }
}

/// The full nested-lab protocol: coin preparation, the two friends'
/// measurements (the second lab prepared conditionally on the first record),
/// then the two outside observers measuring whole labs in their ok/fail
/// wings.
pub fn build_fr_scenario() -> Scenario {
    let mut steps = fr_prefix_steps();
    steps.push(wbar_step());
    steps.push(w_step());
    Scenario::new(fr_registers(), steps)
}

/// Same protocol with the two outside measurements in reversed order; the
/// conditional-reasoning audit is order-sensitive.
pub fn build_fr_scenario_reversed() -> Scenario {
    let mut steps = fr_prefix_steps();
    steps.push(w_step());
    steps.push(wbar_step());
    Scenario::new(fr_registers(), steps)
}

/// The friends' protocol followed by a diagnostic measurement in the product
/// basis of the two record configurations (`heads/tails ⊗ up/down`). Not part
/// of the actual protocol: inserting it destroys the superposition the
/// outside observers rely on. It is the calculational device that makes joint
/// record statements well-defined.
pub fn build_fr_record_diagnostic() -> Scenario {
    let states = FrStates::new();
    let [hu, hd, tu, td] = states.record_product_states();
    let mut steps = fr_prefix_steps();
    steps.push(Step::ExternalMeasure {
        targets: vec!["coin".into(), "fbar".into(), "spin".into(), "f".into()],
        spec: SpecDecl::basis(vec![
            ("heads_up".into(), hu.amps().to_vec()),
            ("heads_down".into(), hd.amps().to_vec()),
            ("tails_up".into(), tu.amps().to_vec()),
            ("tails_down".into(), td.amps().to_vec()),
        ]),
        record: "Diag".into(),
    });
    Scenario::new(fr_registers(), steps)
}

/// The friends' protocol with the first outside observer modeled as an agent
/// with its own 2-level record register `wbar`: evaluating this unitarily
/// yields the 32-dimensional state [`FrStates::theta`].
pub fn build_fr_theta_scenario() -> Scenario {
    let s = FRAC_1_SQRT_2;
    let mut registers = fr_registers();
    registers.push(RegisterDecl::agent("wbar", "ok", &["ok", "fail"]));
    let mut steps = fr_prefix_steps();
    steps.push(Step::AgentMeasure {
        agent: "wbar".into(),
        targets: vec!["coin".into(), "fbar".into()],
        spec: SpecDecl::basis(vec![
            ("ok".into(), amps(&[s, 0.0, 0.0, -s])),
            ("fail".into(), amps(&[s, 0.0, 0.0, s])),
        ]),
        record: "Wbar".into(),
    });
    Scenario::new(registers, steps)
}

/// The heads/tails wings of the first lab, lifted to the full layout: the
/// decomposition an early collapse after the first friend's measurement uses.
pub fn fr_heads_tails_decomposition() -> SubspaceDecomposition {
    let states = FrStates::new();
    let local = OrthonormalBasis::new(
        vec![states.phi_h.clone(), states.phi_t.clone()],
        vec!["heads".into(), "tails".into()],
    )
    .expect("orthonormal pair");
    lift_basis(&local, states.psi.layout()).expect("factors exist")
}

/// The four-outcome record-product decomposition of the full layout
/// (`heads/tails ⊗ up/down` wings).
pub fn fr_record_product_decomposition() -> SubspaceDecomposition {
    let states = FrStates::new();
    let [hu, hd, tu, td] = states.record_product_states();
    SubspaceDecomposition::new(vec![
        ("heads_up".into(), vec![hu]),
        ("heads_down".into(), vec![hd]),
        ("tails_up".into(), vec![tu]),
        ("tails_down".into(), vec![td]),
    ])
    .expect("orthonormal record products")
}

/// The record-product measurement as a spec on the full layout.
pub fn fr_record_product_spec() -> MeasurementSpec {
    MeasurementSpec::Decomposition(fr_record_product_decomposition())
}

/// The combined ok/fail measurement of both outside observers as one
/// four-outcome basis over the full layout, ordered (ok,ok), (ok,fail),
/// (fail,ok), (fail,fail).
pub fn fr_joint_ok_fail_spec() -> MeasurementSpec {
    let states = FrStates::new();
    let mut vectors = Vec::new();
    let mut labels = Vec::new();
    for (wing, wl) in [(&states.phi_obar, "ok"), (&states.phi_fbar, "fail")] {
        for (lab, ll) in [(&states.phi_o, "ok"), (&states.phi_f, "fail")] {
            vectors.push(tensor(wing, lab).expect("disjoint factors"));
            labels.push(format!("{wl},{ll}"));
        }
    }
    MeasurementSpec::Basis(OrthonormalBasis::new(vectors, labels).expect("orthonormal"))
}

/// Statement identifiers of the three-step reasoning chain under audit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatementId {
    /// "If the first friend saw tails, the second observer will see fail."
    A,
    /// "If the second friend saw up, the first friend saw tails."
    B,
    /// "If the first observer sees ok, the second friend saw up."
    C,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    /// The statement conditions through a record the formalism assigns no
    /// value to; the conditional probability behind it cannot be computed.
    InvalidQuery,
}

#[derive(Debug, Clone)]
pub struct StatementReport {
    pub id: StatementId,
    pub verdict: Verdict,
    /// Named supporting numbers: distribution gaps and zero-amplitude checks.
    pub numbers: Vec<(String, f64)>,
}

/// Audits the three statements of the nested-lab reasoning chain.
///
/// (a) conditions on the first friend's record across the first observer's
/// interfering measurement: the query is invalid and the distribution gap
/// that invalidates it is attached. (b) holds via the vanishing probability
/// of (heads, up) in the record-product diagnostic. (c) holds via the
/// vanishing coefficient of the ok-wing ⊗ down-record configuration in the
/// post-observer state.
pub fn statement_reports() -> ScnResult<[StatementReport; 3]> {
    let states = FrStates::new();

    // (a): P(W = fail | Fbar = tails) under the unitary treatment.
    let fr = evaluate(&build_fr_scenario(), Policy::UnitaryAgents)?;
    let a_query = conditional_probability(&fr, &[("W", "fail")], &[("Fbar", "tails")])?;
    let report = audit(&fr.scenario)?;
    let a_gap = report
        .unsafe_entries()
        .filter(|e| e.agent_record == "Fbar")
        .map(|e| e.safety.max_gap)
        .fold(0.0_f64, f64::max);
    let a = StatementReport {
        id: StatementId::A,
        verdict: match a_query.validity {
            Validity::Invalid { .. } => Verdict::InvalidQuery,
            Validity::Valid => Verdict::Holds,
        },
        numbers: vec![("collapse_safety_gap".into(), a_gap)],
    };

    // (b): P(heads and up) vanishes in the record-product diagnostic.
    let diag = evaluate(&build_fr_record_diagnostic(), Policy::UnitaryAgents)?;
    let p_heads_up = diag.joint_probability(&[("Diag", "heads_up")]);
    let [hu, ..] = states.record_product_states();
    let hu_amp = inner(&states.psi, &hu).map_err(crate::scenario::ScenarioError::Core)?.norm();
    let b = StatementReport {
        id: StatementId::B,
        verdict: if p_heads_up.abs() <= 1e-12 { Verdict::Holds } else { Verdict::InvalidQuery },
        numbers: vec![
            ("p_heads_up".into(), p_heads_up),
            ("amp_heads_up".into(), hu_amp),
        ],
    };

    // (c): the ok-wing ⊗ down-record coefficient of theta vanishes.
    let theta_run = evaluate(&build_fr_theta_scenario(), Policy::UnitaryAgents)?;
    assert_eq!(theta_run.branches.len(), 1, "theta scenario is branch-free");
    let theta = &theta_run.branches[0].state;
    let [okd_u, okd_d, fail_u, fail_d] = states.observer_record_states();
    let coeff = |v: &StateVector| {
        inner(theta, v).map(|z| z.norm()).map_err(crate::scenario::ScenarioError::Core)
    };
    let c_zero = coeff(&okd_d)?;
    let c = StatementReport {
        id: StatementId::C,
        verdict: if c_zero <= 1e-12 { Verdict::Holds } else { Verdict::InvalidQuery },
        numbers: vec![
            ("coeff_ok_wing_down".into(), c_zero),
            ("coeff_ok_wing_up".into(), coeff(&okd_u)?),
            ("coeff_fail_wing_up".into(), coeff(&fail_u)?),
            ("coeff_fail_wing_down".into(), coeff(&fail_d)?),
        ],
    };

    Ok([a, b, c])
}

/// The single-friend paradox: a friend measures an equal superposition, then
/// an outside observer measures the friend's whole lab in the basis
/// `{(s1⊗o1 ± s2⊗o2)/sqrt(2)}`. Unitary treatment gives the first outcome
/// with certainty; collapsing at the friend's record predicts 1/2.
pub fn build_footnote_paradox() -> Scenario {
    let s = FRAC_1_SQRT_2;
    Scenario::new(
        vec![
            RegisterDecl::system("sys", &["s1", "s2"]),
            RegisterDecl::agent("rec", "o1", &["o1", "o2"]),
        ],
        vec![
            Step::Prepare { register: "sys".into(), amplitudes: amps(&[s, s]) },
            Step::AgentMeasure {
                agent: "rec".into(),
                targets: vec!["sys".into()],
                spec: SpecDecl::basis(vec![
                    ("o1".into(), amps(&[1.0, 0.0])),
                    ("o2".into(), amps(&[0.0, 1.0])),
                ]),
                record: "F".into(),
            },
            Step::ExternalMeasure {
                targets: vec!["sys".into(), "rec".into()],
                spec: SpecDecl::basis(vec![
                    ("plus".into(), amps(&[s, 0.0, 0.0, s])),
                    ("minus".into(), amps(&[s, 0.0, 0.0, -s])),
                ]),
                record: "W".into(),
            },
        ],
    )
}

/// Probability that `n` independent repetitions of the single-friend
/// experiment all yield the first outcome, under the given policy. The
/// unitary treatment gives 1; the naive collapse reading gives `1/2^n`.
pub fn footnote_repetition_probability(n: u32, policy: Policy) -> ScnResult<f64> {
    let run = evaluate(&build_footnote_paradox(), policy)?;
    let single = run.joint_probability(&[("W", "plus")]);
    Ok(single.powi(n as i32))
}

/// The double-slit setup with which-way detectors: scenario plus the
/// interference bookkeeping of the detector-free superposition.
pub struct DoubleSlit {
    /// Prepare the equal superposition, entangle the slit detector, read the
    /// detector out, then measure the slit register in the screen basis.
    pub scenario: Scenario,
    /// Screen observable on the slit register: `observable_from` over the
    /// `(upper±lower)/sqrt(2)` basis with the caller's values.
    pub screen_observable: SelfAdjointOperator,
    pub screen_basis: OrthonormalBasis,
    pub slit_basis: OrthonormalBasis,
    /// Interference report of the screen observable at the bare superposition
    /// with respect to the slit basis: what the detectors destroy.
    pub no_detector_report: InterferenceReport,
}

/// Builds the double-slit scenario and the detector-free interference report
/// for a screen observable with the given eigenvalues on the
/// `(upper±lower)/sqrt(2)` screen basis.
pub fn build_double_slit(screen_values: [f64; 2]) -> DoubleSlit {
    let s = FRAC_1_SQRT_2;
    let slit = SpaceLayout::single("slit", ["upper", "lower"]).expect("valid layout");
    let slit_basis = OrthonormalBasis::computational(slit.clone());
    let screen_basis = OrthonormalBasis::new(
        vec![
            StateVector::new(slit.clone(), amps(&[s, s])).expect("finite"),
            StateVector::new(slit.clone(), amps(&[s, -s])).expect("finite"),
        ],
        vec!["bright".into(), "dark".into()],
    )
    .expect("orthonormal pair");
    let screen_observable =
        observable_from(&screen_basis, &screen_values).expect("matching lengths");
    let superposition = StateVector::new(slit, amps(&[s, s])).expect("finite");
    let no_detector_report = interference_report(
        &screen_observable,
        &slit_basis,
        &superposition,
        DEFAULT_SAFETY_TOL,
    )
    .expect("valid report");

    let scenario = Scenario::new(
        vec![
            RegisterDecl::system("slit", &["upper", "lower"]),
            RegisterDecl::agent("det", "upper", &["upper", "lower"]),
        ],
        vec![
            Step::Prepare { register: "slit".into(), amplitudes: amps(&[s, s]) },
            Step::AgentMeasure {
                agent: "det".into(),
                targets: vec!["slit".into()],
                spec: SpecDecl::basis(vec![
                    ("upper".into(), amps(&[1.0, 0.0])),
                    ("lower".into(), amps(&[0.0, 1.0])),
                ]),
                record: "which".into(),
            },
            Step::ExternalMeasure {
                targets: vec!["det".into()],
                spec: SpecDecl::basis(vec![
                    ("upper".into(), amps(&[1.0, 0.0])),
                    ("lower".into(), amps(&[0.0, 1.0])),
                ]),
                record: "readout".into(),
            },
            Step::ExternalMeasure {
                targets: vec!["slit".into()],
                spec: SpecDecl::basis(vec![
                    ("bright".into(), amps(&[s, s])),
                    ("dark".into(), amps(&[s, -s])),
                ]),
                record: "screen".into(),
            },
        ],
    );

    DoubleSlit { scenario, screen_observable, screen_basis, slit_basis, no_detector_report }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interference::collapse_safety;
    use crate::measure::{born_distribution, expectation};
    use crate::qcore::apply_unitary;
    use crate::scenario::{sample, unitary_prestates, RecordValue};

    const TOL: f64 = 1e-12;

    #[test]
    fn hadamard_type_relations_hold() {
        let s = FrStates::new();
        let half = FRAC_1_SQRT_2;
        for (combo, target) in [
            ((&s.phi_h - &s.phi_t).scaled_re(half), &s.phi_obar),
            ((&s.phi_h + &s.phi_t).scaled_re(half), &s.phi_fbar),
            ((&s.phi_d - &s.phi_u).scaled_re(half), &s.phi_o),
            ((&s.phi_d + &s.phi_u).scaled_re(half), &s.phi_f),
        ] {
            assert!(combo.max_amp_diff(target).unwrap() <= TOL);
        }
        assert!((s.psi.norm() - 1.0).abs() <= TOL);
        assert!((s.theta.norm() - 1.0).abs() <= TOL);
    }

    #[test]
    fn prefix_evolution_reaches_the_shared_state() {
        let states = FrStates::new();
        let prestates = unitary_prestates(&build_fr_scenario()).unwrap();
        // Index 4 = state before the first outside measurement.
        assert!(prestates[4].max_amp_diff(&states.psi).unwrap() <= TOL);
    }

    #[test]
    fn zero_amplitude_facts() {
        let states = FrStates::new();
        let hu = tensor(&states.phi_h, &states.phi_u).unwrap();
        assert!(inner(&states.psi, &hu).unwrap().norm() <= TOL);
        let obar_d = tensor(&states.phi_obar, &states.phi_d).unwrap();
        assert!(inner(&states.psi, &obar_d).unwrap().norm() <= TOL);
    }

    #[test]
    fn joint_distribution_under_unitary_agents() {
        let run = evaluate(&build_fr_scenario(), Policy::UnitaryAgents).unwrap();
        let want = [
            (("ok", "ok"), 1.0 / 12.0),
            (("ok", "fail"), 1.0 / 12.0),
            (("fail", "ok"), 1.0 / 12.0),
            (("fail", "fail"), 9.0 / 12.0),
        ];
        for ((wbar, w), p) in want {
            let got = run.joint_probability(&[("Wbar", wbar), ("W", w)]);
            assert!((got - p).abs() <= TOL, "({wbar},{w}): got {got}, want {p}");
        }
        // The friends' records stay unresolved.
        assert!(!run.is_resolved("Fbar"));
        assert!(!run.is_resolved("F"));
    }

    #[test]
    fn joint_distribution_under_naive_collapse() {
        let run = evaluate(&build_fr_scenario(), Policy::CollapseOnRecord).unwrap();
        let want = [
            (("ok", "ok"), 1.0 / 12.0),
            (("ok", "fail"), 5.0 / 12.0),
            (("fail", "ok"), 1.0 / 12.0),
            (("fail", "fail"), 5.0 / 12.0),
        ];
        for ((wbar, w), p) in want {
            let got = run.joint_probability(&[("Wbar", wbar), ("W", w)]);
            assert!((got - p).abs() <= TOL, "({wbar},{w}): got {got}, want {p}");
        }
        assert!(run.is_resolved("Fbar"));
    }

    #[test]
    fn audit_flags_exactly_the_two_interfering_pairs() {
        let report = audit(&build_fr_scenario()).unwrap();
        let mut unsafe_pairs: Vec<(String, String)> = report
            .unsafe_entries()
            .map(|e| (e.agent_record.clone(), e.later_record.clone()))
            .collect();
        unsafe_pairs.sort();
        assert_eq!(
            unsafe_pairs,
            vec![("F".to_string(), "W".to_string()), ("Fbar".to_string(), "Wbar".to_string())]
        );
        for e in report.unsafe_entries() {
            assert!((e.safety.max_gap - 1.0 / 3.0).abs() <= TOL);
        }
    }

    #[test]
    fn early_collapse_verdicts_match_the_worked_analysis() {
        let states = FrStates::new();
        let ht = fr_heads_tails_decomposition();
        // The record-product diagnostic is insensitive to the early collapse.
        let diag = fr_record_product_spec();
        let safe = collapse_safety(&states.psi, &ht, &diag, DEFAULT_SAFETY_TOL).unwrap();
        assert!(safe.safe, "gap {}", safe.max_gap);
        assert!(safe.max_gap <= TOL);
        // The joint ok/fail measurement is not.
        let joint = fr_joint_ok_fail_spec();
        let unsafe_report =
            collapse_safety(&states.psi, &ht, &joint, DEFAULT_SAFETY_TOL).unwrap();
        assert!(!unsafe_report.safe);
        assert!((unsafe_report.max_gap - 4.0 / 12.0).abs() <= TOL);
    }

    #[test]
    fn statement_reports_reproduce_the_analysis() {
        let [a, b, c] = statement_reports().unwrap();
        assert_eq!(a.verdict, Verdict::InvalidQuery);
        assert!((a.numbers[0].1 - 1.0 / 3.0).abs() <= TOL);
        assert_eq!(b.verdict, Verdict::Holds);
        assert!(b.numbers.iter().all(|(_, v)| v.is_finite()));
        assert!(b.numbers[0].1 <= TOL);
        assert!(b.numbers[1].1 <= TOL);
        assert_eq!(c.verdict, Verdict::Holds);
        assert!(c.numbers[0].1 <= TOL);
        // The remaining coefficients of theta: (1/sqrt6, 1/sqrt6, 2/sqrt6).
        let inv_sqrt6 = 1.0 / 6.0_f64.sqrt();
        assert!((c.numbers[1].1 - inv_sqrt6).abs() <= 1e-9);
        assert!((c.numbers[2].1 - inv_sqrt6).abs() <= 1e-9);
        assert!((c.numbers[3].1 - 2.0 * inv_sqrt6).abs() <= 1e-9);
    }

    #[test]
    fn theta_from_the_engine_matches_the_algebraic_construction() {
        let states = FrStates::new();
        let run = evaluate(&build_fr_theta_scenario(), Policy::UnitaryAgents).unwrap();
        assert_eq!(run.branches.len(), 1);
        assert!(run.branches[0].state.max_amp_diff(&states.theta).unwrap() <= TOL);
    }

    #[test]
    fn c_style_conditional_flips_with_the_observer_order() {
        let fr = evaluate(&build_fr_scenario(), Policy::UnitaryAgents).unwrap();
        let forward = conditional_probability(&fr, &[("F", "up")], &[("Wbar", "ok")]).unwrap();
        assert_eq!(forward.validity, Validity::Valid);
        assert!((forward.probability.unwrap() - 1.0).abs() <= TOL);

        let rev = evaluate(&build_fr_scenario_reversed(), Policy::UnitaryAgents).unwrap();
        let reversed = conditional_probability(&rev, &[("F", "up")], &[("Wbar", "ok")]).unwrap();
        assert!(matches!(reversed.validity, Validity::Invalid { .. }));
    }

    #[test]
    fn a_style_conditional_is_invalid_and_b_style_joint_vanishes() {
        let fr = evaluate(&build_fr_scenario(), Policy::UnitaryAgents).unwrap();
        let a = conditional_probability(&fr, &[("W", "fail")], &[("Fbar", "tails")]).unwrap();
        assert!(matches!(a.validity, Validity::Invalid { .. }));
        assert!(a.probability.is_none());

        // Both friend records can be resolved jointly before any outside
        // measurement interferes: the (heads, up) cell carries no weight.
        let b = conditional_probability(&fr, &[("Fbar", "heads"), ("F", "up")], &[]).unwrap();
        assert_eq!(b.validity, Validity::Valid);
        assert!(b.probability.unwrap() <= TOL);
    }

    #[test]
    fn footnote_outcomes_under_both_policies() {
        let unitary = evaluate(&build_footnote_paradox(), Policy::UnitaryAgents).unwrap();
        assert!((unitary.joint_probability(&[("W", "plus")]) - 1.0).abs() <= TOL);

        let naive = evaluate(&build_footnote_paradox(), Policy::CollapseOnRecord).unwrap();
        assert!((naive.joint_probability(&[("W", "plus")]) - 0.5).abs() <= TOL);
        assert!((naive.joint_probability(&[("W", "minus")]) - 0.5).abs() <= TOL);

        // n independent repetitions: all-first-outcome probability.
        assert!((footnote_repetition_probability(5, Policy::UnitaryAgents).unwrap() - 1.0).abs()
            <= TOL);
        assert!(
            (footnote_repetition_probability(5, Policy::CollapseOnRecord).unwrap() - 1.0 / 32.0)
                .abs()
                <= TOL
        );
    }

    #[test]
    fn footnote_audit_names_the_friend_observer_pair() {
        let report = audit(&build_footnote_paradox()).unwrap();
        let pairs: Vec<_> = report
            .unsafe_entries()
            .map(|e| (e.agent_record.clone(), e.later_record.clone()))
            .collect();
        assert_eq!(pairs, vec![("F".to_string(), "W".to_string())]);
    }

    #[test]
    fn double_slit_detector_destroys_the_pattern() {
        let ds = build_double_slit([1.0, -1.0]);

        // Without detectors the slit superposition has a nonzero interference
        // term equal to the direct formula: 2*Re(conj(a_u)a_l <S u, l>) = 1.
        assert!(!ds.no_detector_report.safe);
        assert!((ds.no_detector_report.terms[&(0, 1)] - 1.0).abs() <= TOL);
        assert!(
            (ds.no_detector_report.superposition_expectation
                - ds.no_detector_report.mixture_expectation
                - ds.no_detector_report.term_sum())
            .abs()
                <= 1e-9
        );

        // Diagonal screen observable: no interference.
        let slit = ds.slit_basis.layout().clone();
        let diag = crate::measure::observable_from(&ds.slit_basis, &[0.3, 0.9]).unwrap();
        let sup = StateVector::new(slit, amps(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2])).unwrap();
        let report =
            interference_report(&diag, &ds.slit_basis, &sup, DEFAULT_SAFETY_TOL).unwrap();
        assert!(report.safe);

        for policy in [Policy::UnitaryAgents, Policy::CollapseOnRecord] {
            let run = evaluate(&ds.scenario, policy).unwrap();
            // Slit readout is half/half.
            assert!((run.joint_probability(&[("readout", "upper")]) - 0.5).abs() <= TOL);
            assert!((run.joint_probability(&[("readout", "lower")]) - 0.5).abs() <= TOL);
            // The screen no longer sees the bright fringe with certainty: the
            // pattern has collapsed to the mixture prediction (1/2, 1/2).
            assert!((run.joint_probability(&[("screen", "bright")]) - 0.5).abs() <= TOL);
            // Expectation over the screen observable equals the mixture value.
            let mixture = crate::interference::mixture_expectation(
                &ds.screen_observable,
                &ds.slit_basis,
                &StateVector::new(
                    ds.slit_basis.layout().clone(),
                    amps(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]),
                )
                .unwrap(),
            )
            .unwrap();
            let per_branch: f64 = run
                .branches
                .iter()
                .map(|b| {
                    // Screen expectation on the slit register of each branch.
                    let lifted = ds
                        .screen_observable
                        .lift(b.state.layout())
                        .expect("slit factor exists");
                    b.weight * expectation(&lifted, &b.state).expect("normalized branch")
                })
                .sum();
            assert!((per_branch - mixture).abs() <= 1e-9, "policy {policy:?}");
        }

        // Without the detector the screen shows the bright fringe always.
        let bare = Scenario::new(
            vec![RegisterDecl::system("slit", &["upper", "lower"])],
            vec![
                Step::Prepare {
                    register: "slit".into(),
                    amplitudes: amps(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]),
                },
                Step::ExternalMeasure {
                    targets: vec!["slit".into()],
                    spec: SpecDecl::basis(vec![
                        ("bright".into(), amps(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2])),
                        ("dark".into(), amps(&[FRAC_1_SQRT_2, -FRAC_1_SQRT_2])),
                    ]),
                    record: "screen".into(),
                },
            ],
        );
        let run = evaluate(&bare, Policy::UnitaryAgents).unwrap();
        assert!((run.joint_probability(&[("screen", "bright")]) - 1.0).abs() <= TOL);
    }

    #[test]
    fn ok_ok_cell_is_policy_independent() {
        let unitary = evaluate(&build_fr_scenario(), Policy::UnitaryAgents).unwrap();
        let naive = evaluate(&build_fr_scenario(), Policy::CollapseOnRecord).unwrap();
        let q = [("Wbar", "ok"), ("W", "ok")];
        assert!((unitary.joint_probability(&q) - 1.0 / 12.0).abs() <= TOL);
        assert!((naive.joint_probability(&q) - 1.0 / 12.0).abs() <= TOL);
        let of = [("Wbar", "ok"), ("W", "fail")];
        let ff = [("Wbar", "fail"), ("W", "fail")];
        assert!(
            ((naive.joint_probability(&of) - unitary.joint_probability(&of)).abs() - 4.0 / 12.0)
                .abs()
                <= TOL
        );
        assert!(
            ((unitary.joint_probability(&ff) - naive.joint_probability(&ff)).abs() - 4.0 / 12.0)
                .abs()
                <= TOL
        );
    }

    #[test]
    fn sampling_the_fr_scenario_matches_the_exact_value() {
        // Single fixed seed; the acceptance suite runs the 20-seed version.
        let n = 120_000u64;
        let counts = sample(&build_fr_scenario(), Policy::UnitaryAgents, n, 42).unwrap();
        let p = 1.0 / 12.0;
        let bound = 3.0 * (p * (1.0 - p) / n as f64).sqrt();
        let freq = counts.frequency(&[("Wbar", "ok"), ("W", "ok")]);
        assert!((freq - p).abs() <= bound, "freq {freq}, bound {bound}");
        // Unresolved friend records show up as such in the tuples.
        assert!(counts
            .counts
            .iter()
            .all(|(r, _)| r.get("Fbar") == Some(&RecordValue::Unresolved)));
    }

    #[test]
    fn heads_tails_weights_of_the_shared_state() {
        let states = FrStates::new();
        let d = born_distribution(
            &states.psi,
            &MeasurementSpec::Decomposition(fr_heads_tails_decomposition()),
        )
        .unwrap();
        assert!((d.probability("heads").unwrap() - 1.0 / 3.0).abs() <= TOL);
        assert!((d.probability("tails").unwrap() - 2.0 / 3.0).abs() <= TOL);
        let id = crate::qcore::UnitaryMap::identity(states.psi.layout().clone());
        assert!(apply_unitary(&id, &states.psi)
            .unwrap()
            .max_amp_diff(&states.psi)
            .unwrap() <= TOL);
    }
}
