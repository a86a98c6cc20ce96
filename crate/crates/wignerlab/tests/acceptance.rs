//! Acceptance gate: one check per criterion, each printed as a PASS/FAIL
//! line. Run with `cargo test -p wignerlab --test acceptance -- --nocapture`
//! to see the lines on success.

mod common;

use common::random_scenario;

use wignerlab::frlab::{
    build_double_slit, build_footnote_paradox, build_fr_record_diagnostic, build_fr_scenario,
    build_fr_scenario_reversed, fr_heads_tails_decomposition, fr_joint_ok_fail_spec,
    fr_record_product_spec, statement_reports, FrStates, StatementId, Verdict,
};
use wignerlab::interference::{collapse_safety, interference_report, DEFAULT_SAFETY_TOL};
use wignerlab::measure::{born_distribution, expectation, MeasurementSpec};
use wignerlab::qcore::{inner, tensor, SpaceLayout, StateVector};
use wignerlab::random::{random_basis, random_hermitian, random_state, rng};
use wignerlab::scenario::{
    audit, conditional_probability, evaluate, parse_scenario, sample, serialize_scenario, Policy,
    Validity,
};

type CheckResult = Result<String, String>;

fn check(cond: bool, detail: String) -> CheckResult {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// 1. Exact joint distribution of the nested-lab protocol under the unitary
/// treatment: (1, 1, 1, 9)/12 over (ok,ok), (ok,fail), (fail,ok),
/// (fail,fail), each within 1e-12.
fn criterion_1() -> CheckResult {
    let run = evaluate(&build_fr_scenario(), Policy::UnitaryAgents).map_err(|e| e.to_string())?;
    let want = [
        ("ok", "ok", 1.0 / 12.0),
        ("ok", "fail", 1.0 / 12.0),
        ("fail", "ok", 1.0 / 12.0),
        ("fail", "fail", 9.0 / 12.0),
    ];
    let mut worst = 0.0_f64;
    for (wbar, w, p) in want {
        let got = run.joint_probability(&[("Wbar", wbar), ("W", w)]);
        worst = worst.max((got - p).abs());
    }
    check(worst <= 1e-12, format!("max deviation {worst:.2e} from (1,1,1,9)/12"))
}

/// 2. Zero-amplitude facts of the shared state.
fn criterion_2() -> CheckResult {
    let s = FrStates::new();
    let hu = tensor(&s.phi_h, &s.phi_u).map_err(|e| e.to_string())?;
    let od = tensor(&s.phi_obar, &s.phi_d).map_err(|e| e.to_string())?;
    let a = inner(&s.psi, &hu).map_err(|e| e.to_string())?.norm();
    let b = inner(&s.psi, &od).map_err(|e| e.to_string())?.norm();
    check(a <= 1e-12 && b <= 1e-12, format!("|<psi,hu>| = {a:.2e}, |<psi,obar_d>| = {b:.2e}"))
}

/// 3. Naive-policy joint distribution, recomputed against the two-branch
/// hand-enumeration oracle before trusting the golden values.
fn criterion_3() -> CheckResult {
    // Oracle: collapse at the first record splits heads (1/3, lab state
    // phi_h ⊗ phi_d) and tails (2/3, lab state phi_t ⊗ phi_f); measure the
    // joint ok/fail basis on each branch and mix.
    let states = FrStates::new();
    let joint = fr_joint_ok_fail_spec();
    let heads = tensor(&states.phi_h, &states.phi_d).map_err(|e| e.to_string())?;
    let tails = tensor(&states.phi_t, &states.phi_f).map_err(|e| e.to_string())?;
    let d_heads = born_distribution(&heads, &joint).map_err(|e| e.to_string())?;
    let d_tails = born_distribution(&tails, &joint).map_err(|e| e.to_string())?;
    let oracle: Vec<f64> = d_heads
        .probabilities()
        .iter()
        .zip(d_tails.probabilities())
        .map(|(h, t)| h / 3.0 + 2.0 * t / 3.0)
        .collect();

    let golden = [1.0 / 12.0, 5.0 / 12.0, 1.0 / 12.0, 5.0 / 12.0];
    let oracle_dev = oracle
        .iter()
        .zip(golden)
        .map(|(o, g)| (o - g).abs())
        .fold(0.0_f64, f64::max);

    let run =
        evaluate(&build_fr_scenario(), Policy::CollapseOnRecord).map_err(|e| e.to_string())?;
    let cells = [("ok", "ok"), ("ok", "fail"), ("fail", "ok"), ("fail", "fail")];
    let engine_dev = cells
        .iter()
        .zip(golden)
        .map(|((wbar, w), g)| (run.joint_probability(&[("Wbar", wbar), ("W", w)]) - g).abs())
        .fold(0.0_f64, f64::max);

    check(
        oracle_dev <= 1e-12 && engine_dev <= 1e-12,
        format!("oracle deviation {oracle_dev:.2e}, engine deviation {engine_dev:.2e}"),
    )
}

/// 4. Single-friend paradox: first outcome certain under the unitary
/// treatment, probability 1/2 under the naive collapse.
fn criterion_4() -> CheckResult {
    let scenario = build_footnote_paradox();
    let unitary = evaluate(&scenario, Policy::UnitaryAgents).map_err(|e| e.to_string())?;
    let naive = evaluate(&scenario, Policy::CollapseOnRecord).map_err(|e| e.to_string())?;
    let p1 = unitary.joint_probability(&[("W", "plus")]);
    let p2 = naive.joint_probability(&[("W", "plus")]);
    check(
        (p1 - 1.0).abs() <= 1e-12 && (p2 - 0.5).abs() <= 1e-12,
        format!("unitary {p1}, naive {p2}"),
    )
}

/// 5. Interference sum identity on 200 seeded random instances with
/// dimensions 2..=8.
fn criterion_5() -> CheckResult {
    let mut worst = 0.0_f64;
    for seed in 0..200u64 {
        let dim = 2 + (seed % 7) as usize;
        let labels: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
        let l = SpaceLayout::single("q", labels).map_err(|e| e.to_string())?;
        let mut r = rng(40_000 + seed);
        let s = random_hermitian(&l, &mut r);
        let basis = random_basis(&l, &mut r);
        let psi = random_state(&l, &mut r);
        let report =
            interference_report(&s, &basis, &psi, DEFAULT_SAFETY_TOL).map_err(|e| e.to_string())?;
        let direct = expectation(&s, &psi).map_err(|e| e.to_string())?;
        let dev = (direct - report.mixture_expectation - report.term_sum()).abs();
        worst = worst.max(dev);
    }
    check(worst <= 1e-9, format!("max identity deviation {worst:.2e} over 200 instances"))
}

/// 6. Collapse-safety golden cases: the record-product measurement tolerates
/// the early heads/tails collapse (gap <= 1e-12); the joint ok/fail
/// measurement does not (gap 4/12).
fn criterion_6() -> CheckResult {
    let states = FrStates::new();
    let ht = fr_heads_tails_decomposition();
    let safe = collapse_safety(&states.psi, &ht, &fr_record_product_spec(), DEFAULT_SAFETY_TOL)
        .map_err(|e| e.to_string())?;
    let unsafe_r = collapse_safety(&states.psi, &ht, &fr_joint_ok_fail_spec(), DEFAULT_SAFETY_TOL)
        .map_err(|e| e.to_string())?;
    let gap_dev = (unsafe_r.max_gap - 4.0 / 12.0).abs();
    check(
        safe.safe && safe.max_gap <= 1e-12 && !unsafe_r.safe && gap_dev <= 1e-12,
        format!(
            "record-product gap {:.2e} (safe: {}), ok/fail gap {} (unsafe: {})",
            safe.max_gap, safe.safe, unsafe_r.max_gap, !unsafe_r.safe
        ),
    )
}

/// 7. Policy agreement on audited-safe random scenarios: 50 seeds, joint
/// distributions over the external record within 1e-9 per outcome.
fn criterion_7() -> CheckResult {
    let mut all_safe = 0usize;
    let mut worst = 0.0_f64;
    for seed in 0..50u64 {
        let (scenario, _) = random_scenario(seed);
        let report = audit(&scenario).map_err(|e| e.to_string())?;
        if !report.all_safe() {
            continue;
        }
        all_safe += 1;
        let unitary = evaluate(&scenario, Policy::UnitaryAgents).map_err(|e| e.to_string())?;
        let naive = evaluate(&scenario, Policy::CollapseOnRecord).map_err(|e| e.to_string())?;
        for (key, p) in unitary.marginal(&["m"]) {
            let q: f64 = naive
                .marginal(&["m"])
                .iter()
                .filter(|(k, _)| *k == key)
                .map(|&(_, q)| q)
                .sum();
            worst = worst.max((p - q).abs());
        }
    }
    check(
        all_safe >= 15 && worst <= 1e-9,
        format!("{all_safe}/50 scenarios all-safe, max per-outcome gap {worst:.2e}"),
    )
}

/// 8. Sampling acceptance: the (ok,ok) frequency over n = 120000 lies within
/// four binomial standard deviations of 1/12 for 20 fixed seeds.
fn criterion_8() -> CheckResult {
    let scenario = build_fr_scenario();
    let n = 120_000u64;
    let p = 1.0 / 12.0;
    let bound = 4.0 * (p * (1.0 - p) / n as f64).sqrt();
    let mut worst = 0.0_f64;
    for seed in 1..=20u64 {
        let counts = sample(&scenario, Policy::UnitaryAgents, n, seed).map_err(|e| e.to_string())?;
        let freq = counts.frequency(&[("Wbar", "ok"), ("W", "ok")]);
        worst = worst.max((freq - p).abs());
    }
    check(worst <= bound, format!("max |freq - 1/12| = {worst:.2e}, bound {bound:.2e}"))
}

/// 9. Statement reports: (a) invalid query, (b) and (c) hold; reversing the
/// outside observers flips the validity of the (c)-style conditional.
fn criterion_9() -> CheckResult {
    let [a, b, c] = statement_reports().map_err(|e| e.to_string())?;
    let verdicts_ok = a.id == StatementId::A
        && a.verdict == Verdict::InvalidQuery
        && b.verdict == Verdict::Holds
        && c.verdict == Verdict::Holds;

    let fr = evaluate(&build_fr_scenario(), Policy::UnitaryAgents).map_err(|e| e.to_string())?;
    let forward = conditional_probability(&fr, &[("F", "up")], &[("Wbar", "ok")])
        .map_err(|e| e.to_string())?;
    let rev = evaluate(&build_fr_scenario_reversed(), Policy::UnitaryAgents)
        .map_err(|e| e.to_string())?;
    let reversed = conditional_probability(&rev, &[("F", "up")], &[("Wbar", "ok")])
        .map_err(|e| e.to_string())?;
    let flipped = forward.validity == Validity::Valid
        && matches!(reversed.validity, Validity::Invalid { .. });

    // The diagnostic-run numbers land in the record-product run too.
    let diag = evaluate(&build_fr_record_diagnostic(), Policy::UnitaryAgents)
        .map_err(|e| e.to_string())?;
    let p_hu = diag.joint_probability(&[("Diag", "heads_up")]);

    check(
        verdicts_ok && flipped && p_hu <= 1e-12,
        format!(
            "verdicts ({:?},{:?},{:?}), c-style forward {:?} / reversed invalid: {}, \
             P(heads,up) = {p_hu:.2e}",
            a.verdict,
            b.verdict,
            c.verdict,
            forward.validity,
            matches!(reversed.validity, Validity::Invalid { .. }),
        ),
    )
}

/// 10. The shipped scenario document round-trips and reproduces the builder.
fn criterion_10() -> CheckResult {
    let path =
        std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/fr.scn");
    let shipped = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let builder = build_fr_scenario();
    let parsed = parse_scenario(&shipped).map_err(|e| e.to_string())?;
    let byte_identical = shipped == serialize_scenario(&builder);
    let matches_builder = parsed == builder;
    let reparsed =
        parse_scenario(&serialize_scenario(&parsed)).map_err(|e| e.to_string())?;
    let fixed_point = reparsed == parsed;
    check(
        byte_identical && matches_builder && fixed_point,
        format!(
            "byte-identical: {byte_identical}, builder match: {matches_builder}, \
             fixed point: {fixed_point}"
        ),
    )
}

#[test]
fn acceptance() {
    // Keep the double-slit builder exercised from the gate as well: its
    // detector kills the bright fringe under both policies.
    let ds = build_double_slit([1.0, -1.0]);
    let ds_ok = [Policy::UnitaryAgents, Policy::CollapseOnRecord].iter().all(|&p| {
        let run = evaluate(&ds.scenario, p).expect("double slit evaluates");
        (run.joint_probability(&[("screen", "bright")]) - 0.5).abs() <= 1e-12
    });
    assert!(ds_ok, "double-slit detector does not reduce the pattern to the mixture");

    let checks: Vec<(&str, fn() -> CheckResult)> = vec![
        ("joint distribution under unitary agents is (1,1,1,9)/12", criterion_1),
        ("zero-amplitude facts of the shared state", criterion_2),
        ("naive-policy joint matches the two-branch oracle", criterion_3),
        ("single-friend paradox: certainty vs 1/2", criterion_4),
        ("interference sum identity on 200 seeded instances", criterion_5),
        ("collapse-safety golden cases (safe and 4/12-unsafe)", criterion_6),
        ("audited-safe scenarios are policy independent", criterion_7),
        ("sampled (ok,ok) frequency within 4 sigma for 20 seeds", criterion_8),
        ("statement verdicts and order-sensitivity of the c-style query", criterion_9),
        ("shipped document round-trips and matches the builder", criterion_10),
    ];

    let mut failures = Vec::new();
    let mut stopwatch_total = std::time::Instant::now().elapsed();
    for (i, (name, run)) in checks.iter().enumerate() {
        let start = std::time::Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        stopwatch_total += elapsed;
        match outcome {
            Ok(detail) => {
                println!("PASS criterion {:02} — {name} ({detail}) [{elapsed:.2?}]", i + 1);
            }
            Err(detail) => {
                println!("FAIL criterion {:02} — {name} ({detail}) [{elapsed:.2?}]", i + 1);
                failures.push(format!("criterion {:02}: {detail}", i + 1));
            }
        }
    }
    println!("acceptance total: {stopwatch_total:.2?}");
    assert!(failures.is_empty(), "failed criteria:\n{}", failures.join("\n"));
}
