//! Superposition-versus-mixture bookkeeping.
//!
//! For a state `psi = sum_j a_j v_j` over an orthonormal set and a
//! self-adjoint `S`, the exact expectation splits as
//!
//! ```text
//! <S psi, psi> = sum_j |a_j|^2 <S v_j, v_j>        (the mixture part)
//!              + sum_{j<k} 2 Re( conj(a_j) a_k <S v_j, v_k> )
//! ```
//!
//! The cross terms are the interference terms; they are what makes "being in
//! the state psi" observationally different from "being in v_j with
//! probability |a_j|^2". [`collapse_safety`] turns the same question into a
//! distribution-level certificate: collapsing early over a decomposition is
//! safe exactly when no later outcome probability changes.

use std::collections::BTreeMap;

use crate::measure::{born_distribution, collapse, MeasurementSpec, OutcomeDistribution};
use crate::qcore::{
    expand_in_basis, inner, CoreError, CoreResult, OrthonormalBasis, SelfAdjointOperator,
    StateVector, SubspaceDecomposition, PROB_DUST, STRUCTURAL_TOL,
};

/// Default tolerance for "no interference": the paper-level zero cases are
/// algebraically zero, so rounding dust is the only slack needed.
pub const DEFAULT_SAFETY_TOL: f64 = 1e-9;

/// Per-pair interference terms of one observable, basis and state.
#[derive(Debug, Clone)]
pub struct InterferenceReport {
    pub superposition_expectation: f64,
    pub mixture_expectation: f64,
    /// Cross terms keyed by index pairs `(j, k)` with `j < k`.
    pub terms: BTreeMap<(usize, usize), f64>,
    pub max_abs_term: f64,
    /// Whether `max_abs_term <= tol`.
    pub safe: bool,
    pub tol: f64,
}

impl InterferenceReport {
    pub fn term_sum(&self) -> f64 {
        self.terms.values().sum()
    }
}

fn expansion_coefficients(
    psi: &StateVector,
    basis: &OrthonormalBasis,
) -> CoreResult<Vec<num_complex::Complex64>> {
    if basis.is_complete() {
        return expand_in_basis(psi, basis);
    }
    // A partial orthonormal set is fine as long as psi lies in its span.
    let coeffs = basis
        .vectors()
        .iter()
        .map(|v| inner(v, psi))
        .collect::<CoreResult<Vec<_>>>()?;
    let covered: f64 = coeffs.iter().map(|a| a.norm_sqr()).sum();
    let residual = psi.norm_sq() - covered;
    if residual > STRUCTURAL_TOL {
        return Err(CoreError::UnmeasuredSupport(residual));
    }
    Ok(coeffs)
}

/// The weighted average `sum_j |a_j|^2 <S v_j, v_j>`: the expectation the
/// state would have if it were merely a probabilistic mixture of the basis
/// vectors.
pub fn mixture_expectation(
    op: &SelfAdjointOperator,
    basis: &OrthonormalBasis,
    psi: &StateVector,
) -> CoreResult<f64> {
    if psi.layout() != op.layout() || psi.layout() != basis.layout() {
        return Err(CoreError::LayoutMismatch("operator, basis and state layouts differ".into()));
    }
    if !psi.is_normalized() {
        return Err(CoreError::NotNormalized(psi.norm()));
    }
    let coeffs = expansion_coefficients(psi, basis)?;
    let mut acc = 0.0;
    for (a, v) in coeffs.iter().zip(basis.vectors()) {
        let diag = inner(&op.apply(v)?, v)?;
        acc += a.norm_sqr() * diag.re;
    }
    Ok(acc)
}

/// The single interference term `2 Re( conj(a_j) a_k <S v_j, v_k> )` for
/// `j < k`.
pub fn interference_term(
    op: &SelfAdjointOperator,
    basis: &OrthonormalBasis,
    psi: &StateVector,
    j: usize,
    k: usize,
) -> CoreResult<f64> {
    if j >= k {
        return Err(CoreError::InvalidArgument(format!("need j < k, got j={j}, k={k}")));
    }
    if k >= basis.len() {
        return Err(CoreError::IndexOutOfRange(k));
    }
    let coeffs = expansion_coefficients(psi, basis)?;
    let cross = inner(&op.apply(basis.vector(j))?, basis.vector(k))?;
    Ok(2.0 * (coeffs[j].conj() * coeffs[k] * cross).re)
}

/// Full decomposition of `<S psi, psi>` into mixture plus cross terms.
pub fn interference_report(
    op: &SelfAdjointOperator,
    basis: &OrthonormalBasis,
    psi: &StateVector,
    tol: f64,
) -> CoreResult<InterferenceReport> {
    if psi.layout() != op.layout() || psi.layout() != basis.layout() {
        return Err(CoreError::LayoutMismatch("operator, basis and state layouts differ".into()));
    }
    if !psi.is_normalized() {
        return Err(CoreError::NotNormalized(psi.norm()));
    }
    let coeffs = expansion_coefficients(psi, basis)?;
    let applied = basis
        .vectors()
        .iter()
        .map(|v| op.apply(v))
        .collect::<CoreResult<Vec<_>>>()?;

    let mut mixture = 0.0;
    for (a, (v, sv)) in coeffs.iter().zip(basis.vectors().iter().zip(&applied)) {
        mixture += a.norm_sqr() * inner(sv, v)?.re;
    }

    let mut terms = BTreeMap::new();
    let mut max_abs: f64 = 0.0;
    for j in 0..basis.len() {
        for k in (j + 1)..basis.len() {
            let cross = inner(&applied[j], basis.vector(k))?;
            let term = 2.0 * (coeffs[j].conj() * coeffs[k] * cross).re;
            max_abs = max_abs.max(term.abs());
            terms.insert((j, k), term);
        }
    }

    let superposition = crate::measure::expectation(op, psi)?;
    Ok(InterferenceReport {
        superposition_expectation: superposition,
        mixture_expectation: mixture,
        terms,
        max_abs_term: max_abs,
        safe: max_abs <= tol,
        tol,
    })
}

/// Interference report with the eigenprojector `P_r` of `op` in place of the
/// operator itself: quantifies superposition-versus-mixture for the
/// *probability* of finding eigenvalue `r` rather than for the expectation.
pub fn projector_interference(
    op: &SelfAdjointOperator,
    r: f64,
    basis: &OrthonormalBasis,
    psi: &StateVector,
    tol: f64,
) -> CoreResult<InterferenceReport> {
    let projector = crate::measure::eigenspace_projector(op, r)?;
    interference_report(&projector, basis, psi, tol)
}

/// Verdict of the distribution-level collapse-safety check.
#[derive(Debug, Clone)]
pub struct SafetyReport {
    /// Whether every later outcome keeps its probability within `tol`.
    pub safe: bool,
    /// Largest per-outcome probability change.
    pub max_gap: f64,
    /// Prediction from the uncollapsed state.
    pub superposition: OutcomeDistribution,
    /// Prediction after collapsing over the decomposition and averaging.
    pub mixture: OutcomeDistribution,
    pub tol: f64,
}

/// Compares the predictions of a later measurement with and without an early
/// collapse over `decomposition`:
///
/// 1. superposition: `born_distribution(psi, later)`;
/// 2. mixture: `sum_m p_m * born_distribution(collapse(psi, D, m), later)`
///    over the outcomes of the decomposition with `p_m > 0`.
///
/// The verdict is safe iff the largest per-outcome gap is at most `tol`.
/// Early collapse is justified exactly when this holds.
pub fn collapse_safety(
    psi: &StateVector,
    decomposition: &SubspaceDecomposition,
    later: &MeasurementSpec,
    tol: f64,
) -> CoreResult<SafetyReport> {
    if psi.layout() != decomposition.layout() || psi.layout() != later.layout() {
        return Err(CoreError::LayoutMismatch(
            "state, decomposition and later measurement layouts differ".into(),
        ));
    }
    let superposition = born_distribution(psi, later)?;
    let early = MeasurementSpec::Decomposition(decomposition.clone());
    let early_dist = born_distribution(psi, &early)?;

    let mut mixed = vec![0.0; later.outcome_count()];
    for (label, p) in early_dist.entries() {
        if *p < PROB_DUST {
            continue; // empty branch
        }
        let branch = collapse(psi, &early, label)?;
        let branch_dist = born_distribution(&branch, later)?;
        for (acc, (_, q)) in mixed.iter_mut().zip(branch_dist.entries()) {
            *acc += p * q;
        }
    }
    let mixture = OutcomeDistribution::new(
        later
            .outcome_labels()
            .into_iter()
            .map(String::from)
            .zip(mixed)
            .collect(),
    )?;
    let max_gap = superposition.max_abs_gap(&mixture)?;
    Ok(SafetyReport { safe: max_gap <= tol, max_gap, superposition, mixture, tol })
}

/// Term-level view of the same question: for each outcome of the later
/// measurement, the interference report of that outcome's projector over the
/// orthonormal set of collapsed branch states of `decomposition` at `psi`.
///
/// Branches with probability below 1e-12 are skipped.
pub fn projector_reports(
    psi: &StateVector,
    decomposition: &SubspaceDecomposition,
    later: &MeasurementSpec,
    tol: f64,
) -> CoreResult<Vec<(String, InterferenceReport)>> {
    if psi.layout() != decomposition.layout() || psi.layout() != later.layout() {
        return Err(CoreError::LayoutMismatch(
            "state, decomposition and later measurement layouts differ".into(),
        ));
    }
    let mut branch_vectors = Vec::new();
    let mut branch_labels = Vec::new();
    for i in 0..decomposition.block_count() {
        let projected = decomposition.project(psi, i)?;
        if projected.norm_sq() < PROB_DUST {
            continue;
        }
        branch_vectors.push(projected.normalized()?);
        branch_labels.push(decomposition.block(i).label().to_string());
    }
    let branch_basis = OrthonormalBasis::new(branch_vectors, branch_labels)?;

    let mut reports = Vec::with_capacity(later.outcome_count());
    let later_decomp = later.as_decomposition();
    for i in 0..later_decomp.block_count() {
        let projector = later_decomp.projector(i)?;
        let report = interference_report(&projector, &branch_basis, psi, tol)?;
        reports.push((later_decomp.block(i).label().to_string(), report));
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::observable_from;
    use crate::qcore::{tensor, Complex64, Factor, SpaceLayout};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn qubit(label: &str) -> SpaceLayout {
        SpaceLayout::single(label, ["0", "1"]).unwrap()
    }

    fn exchange(layout: &SpaceLayout) -> SelfAdjointOperator {
        SelfAdjointOperator::new(
            layout.clone(),
            vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
        )
        .unwrap()
    }

    #[test]
    fn mixture_of_single_branch_is_the_branch_expectation() {
        let l = qubit("q");
        let b = OrthonormalBasis::computational(l.clone());
        let s = exchange(&l);
        let psi = StateVector::basis_state(l, &["0"]).unwrap();
        let m = mixture_expectation(&s, &b, &psi).unwrap();
        // <S e0, e0> = 0 for the exchange matrix.
        assert!(m.abs() < 1e-12);
    }

    #[test]
    fn diagonal_operator_has_no_interference() {
        let l = qubit("q");
        let b = OrthonormalBasis::computational(l.clone());
        let s = SelfAdjointOperator::diagonal(l.clone(), &[0.3, -1.7]).unwrap();
        let psi = StateVector::new(l, vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        let m = mixture_expectation(&s, &b, &psi).unwrap();
        let e = crate::measure::expectation(&s, &psi).unwrap();
        assert!((m - e).abs() < 1e-12);
        let report = interference_report(&s, &b, &psi, DEFAULT_SAFETY_TOL).unwrap();
        assert!(report.safe);
        assert!(report.max_abs_term < 1e-15);
    }

    #[test]
    fn double_slit_mixture_is_average_of_single_slit_expectations() {
        // Direct two-term sum oracle.
        let l = qubit("slit");
        let b = OrthonormalBasis::computational(l.clone());
        let s = 0.5_f64.sqrt();
        let screen_basis = OrthonormalBasis::new(
            vec![
                StateVector::new(l.clone(), vec![c(s, 0.0), c(s, 0.0)]).unwrap(),
                StateVector::new(l.clone(), vec![c(s, 0.0), c(-s, 0.0)]).unwrap(),
            ],
            vec!["bright".into(), "dark".into()],
        )
        .unwrap();
        let screen = observable_from(&screen_basis, &[1.0, -1.0]).unwrap();
        let psi = StateVector::new(l, vec![c(s, 0.0), c(s, 0.0)]).unwrap();
        let m = mixture_expectation(&screen, &b, &psi).unwrap();
        let e0 = crate::measure::expectation(&screen, b.vector(0)).unwrap();
        let e1 = crate::measure::expectation(&screen, b.vector(1)).unwrap();
        assert!((m - 0.5 * (e0 + e1)).abs() < 1e-12);
    }

    #[test]
    fn zero_coefficient_nulls_the_term() {
        let l = qubit("q");
        let b = OrthonormalBasis::computational(l.clone());
        let s = exchange(&l);
        let psi = StateVector::basis_state(l, &["1"]).unwrap(); // a_0 = 0
        let t = interference_term(&s, &b, &psi, 0, 1).unwrap();
        assert!(t.abs() < 1e-15);
    }

    #[test]
    fn eigenvector_of_the_operator_nulls_its_terms() {
        let l = qubit("q");
        let b = OrthonormalBasis::computational(l.clone());
        let s = SelfAdjointOperator::diagonal(l.clone(), &[2.0, -1.0]).unwrap();
        let psi = StateVector::new(l, vec![c(0.6, 0.0), c(0.8, 0.0)]).unwrap();
        // e_0 is an eigenvector of s, so the (0, k) terms vanish.
        let t = interference_term(&s, &b, &psi, 0, 1).unwrap();
        assert!(t.abs() < 1e-10);
    }

    #[test]
    fn exchange_term_on_equal_superposition_is_one() {
        // 2*Re((1/sqrt2)(1/sqrt2) <S e0, e1>) with <S e0, e1> = 1.
        let l = qubit("q");
        let b = OrthonormalBasis::computational(l.clone());
        let s = exchange(&l);
        let sqrt_half = 0.5_f64.sqrt();
        let psi = StateVector::new(l, vec![c(sqrt_half, 0.0), c(sqrt_half, 0.0)]).unwrap();
        let t = interference_term(&s, &b, &psi, 0, 1).unwrap();
        assert!((t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn term_index_validation() {
        let l = qubit("q");
        let b = OrthonormalBasis::computational(l.clone());
        let s = exchange(&l);
        let psi = StateVector::basis_state(l, &["0"]).unwrap();
        assert!(matches!(
            interference_term(&s, &b, &psi, 1, 1),
            Err(CoreError::InvalidArgument(_))
        ));
        assert!(matches!(
            interference_term(&s, &b, &psi, 0, 5),
            Err(CoreError::IndexOutOfRange(5))
        ));
    }

    #[test]
    fn report_identity_superposition_equals_mixture_plus_terms() {
        let l = SpaceLayout::single("q", ["0", "1", "2"]).unwrap();
        let s = SelfAdjointOperator::new(
            l.clone(),
            vec![
                c(0.4, 0.0), c(0.3, -0.2), c(-0.1, 0.5),
                c(0.3, 0.2), c(-0.9, 0.0), c(0.2, 0.0),
                c(-0.1, -0.5), c(0.2, 0.0), c(1.3, 0.0),
            ],
        )
        .unwrap();
        let b = OrthonormalBasis::computational(l.clone());
        let psi = StateVector::new(l, vec![c(0.5, 0.2), c(-0.3, 0.6), c(0.1, -0.4)])
            .unwrap()
            .normalized()
            .unwrap();
        let report = interference_report(&s, &b, &psi, DEFAULT_SAFETY_TOL).unwrap();
        let rebuilt = report.mixture_expectation + report.term_sum();
        assert!((report.superposition_expectation - rebuilt).abs() < 1e-9);
    }

    #[test]
    fn projector_interference_two_level_cases() {
        let l = qubit("q");
        let b = OrthonormalBasis::computational(l.clone());
        let s = exchange(&l);
        let sqrt_half = 0.5_f64.sqrt();
        let psi = StateVector::new(l.clone(), vec![c(sqrt_half, 0.0), c(sqrt_half, 0.0)]).unwrap();
        // P_{+1} = |+><+|; term = 2*Re((1/2)*<P e0, e1>) = 2*(1/2)*(1/2) = 1/2.
        let report = projector_interference(&s, 1.0, &b, &psi, DEFAULT_SAFETY_TOL).unwrap();
        let t = report.terms[&(0, 1)];
        assert!((t.abs() - 0.5).abs() < 1e-12);

        // Diagonal operator: projector diagonal too, no interference.
        let d = SelfAdjointOperator::diagonal(l.clone(), &[1.0, -1.0]).unwrap();
        let report = projector_interference(&d, 1.0, &b, &psi, DEFAULT_SAFETY_TOL).unwrap();
        assert!(report.max_abs_term < 1e-12);

        // Full-space eigenprojector: terms reduce to overlaps of orthonormal
        // vectors, hence zero.
        let id = SelfAdjointOperator::identity(l);
        let report = projector_interference(&id, 1.0, &b, &psi, DEFAULT_SAFETY_TOL).unwrap();
        assert!(report.max_abs_term < 1e-12);
    }

    fn compact_fr() -> (SpaceLayout, StateVector, SubspaceDecomposition, MeasurementSpec) {
        // Two labs as single 2-level factors; the shared state
        // (h⊗d + t⊗u + t⊗d)/sqrt(3); the heads/tails decomposition; and the
        // joint ok/fail basis of the two outside observers.
        let l = SpaceLayout::new(vec![
            Factor::new("lab1", ["h", "t"]),
            Factor::new("lab2", ["u", "d"]),
        ])
        .unwrap();
        let a = 1.0 / 3.0_f64.sqrt();
        let psi =
            StateVector::new(l.clone(), vec![c(0.0, 0.0), c(a, 0.0), c(a, 0.0), c(a, 0.0)])
                .unwrap();
        let lab1 = SpaceLayout::single("lab1", ["h", "t"]).unwrap();
        let lab2 = SpaceLayout::single("lab2", ["u", "d"]).unwrap();
        let ht = crate::qcore::lift_basis(
            &OrthonormalBasis::computational(lab1.clone()),
            &l,
        )
        .unwrap();
        let s = 0.5_f64.sqrt();
        let mk = |layout: &SpaceLayout, a0: f64, a1: f64| {
            StateVector::new(layout.clone(), vec![c(a0, 0.0), c(a1, 0.0)]).unwrap()
        };
        let obar = mk(&lab1, s, -s);
        let fbar = mk(&lab1, s, s);
        let o = mk(&lab2, -s, s);
        let f = mk(&lab2, s, s);
        let mut vectors = Vec::new();
        let mut labels = Vec::new();
        for (lv, ll) in [(&obar, "ok_bar"), (&fbar, "fail_bar")] {
            for (rv, rl) in [(&o, "ok"), (&f, "fail")] {
                vectors.push(tensor(lv, rv).unwrap());
                labels.push(format!("{ll},{rl}"));
            }
        }
        let joint = MeasurementSpec::Basis(OrthonormalBasis::new(vectors, labels).unwrap());
        (l, psi, ht, joint)
    }

    #[test]
    fn early_heads_tails_collapse_is_unsafe_for_the_joint_measurement() {
        let (_, psi, ht, joint) = compact_fr();
        let report = collapse_safety(&psi, &ht, &joint, DEFAULT_SAFETY_TOL).unwrap();
        assert!(!report.safe);
        // Oracle by branch enumeration: heads branch (weight 1/3) is h⊗d,
        // uniform over the joint basis; tails branch (weight 2/3) is t⊗f,
        // giving (0, 1/2, 0, 1/2).
        let want_mixture = [1.0 / 12.0, 5.0 / 12.0, 1.0 / 12.0, 5.0 / 12.0];
        let want_superposition = [1.0 / 12.0, 1.0 / 12.0, 1.0 / 12.0, 9.0 / 12.0];
        for ((_, p), w) in report.mixture.entries().iter().zip(want_mixture) {
            assert!((p - w).abs() < 1e-12);
        }
        for ((_, p), w) in report.superposition.entries().iter().zip(want_superposition) {
            assert!((p - w).abs() < 1e-12);
        }
        assert!((report.max_gap - 4.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn collapse_is_safe_for_a_measurement_diagonal_in_the_decomposition() {
        let (l, psi, ht, _) = compact_fr();
        // Later measurement: the full computational basis refines heads/tails.
        let later = MeasurementSpec::Basis(OrthonormalBasis::computational(l));
        let report = collapse_safety(&psi, &ht, &later, DEFAULT_SAFETY_TOL).unwrap();
        assert!(report.safe);
        assert!(report.max_gap <= 1e-12);
    }

    #[test]
    fn collapse_safety_is_reflexively_safe() {
        let (_, psi, ht, _) = compact_fr();
        let later = MeasurementSpec::Decomposition(ht.clone());
        let report = collapse_safety(&psi, &ht, &later, DEFAULT_SAFETY_TOL).unwrap();
        assert!(report.safe);
        assert!(report.max_gap <= 1e-12);
    }

    #[test]
    fn projector_reports_flag_the_unsafe_pairing() {
        let (_, psi, ht, joint) = compact_fr();
        let reports = projector_reports(&psi, &ht, &joint, DEFAULT_SAFETY_TOL).unwrap();
        assert_eq!(reports.len(), 4);
        let max_term = reports
            .iter()
            .map(|(_, r)| r.max_abs_term)
            .fold(0.0_f64, f64::max);
        assert!(max_term > 0.1);
    }
}
