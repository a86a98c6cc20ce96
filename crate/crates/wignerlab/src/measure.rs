//! Measurement semantics: Born probabilities, collapse, observables built
//! from bases, expectation values and eigenspace probabilities.

use nalgebra::linalg::SymmetricEigen;
use num_complex::Complex64;

use crate::qcore::{
    inner, lift_basis, lift_decomposition, CoreError, CoreResult, OrthonormalBasis,
    SelfAdjointOperator, SpaceLayout, StateVector, SubspaceDecomposition, UnitaryMap,
    EIGEN_CLUSTER_TOL, PROB_DUST, STRUCTURAL_TOL,
};

/// What gets measured: a labeled orthonormal basis or a labeled orthogonal
/// subspace decomposition.
///
/// A spec whose vectors span only a subspace is accepted; measuring a state
/// with weight outside that subspace is an error
/// ([`CoreError::UnmeasuredSupport`]), which keeps partial specs usable
/// exactly when they are physically meaningful.
#[derive(Debug, Clone)]
pub enum MeasurementSpec {
    Basis(OrthonormalBasis),
    Decomposition(SubspaceDecomposition),
}

impl MeasurementSpec {
    pub fn layout(&self) -> &SpaceLayout {
        match self {
            MeasurementSpec::Basis(b) => b.layout(),
            MeasurementSpec::Decomposition(d) => d.layout(),
        }
    }

    pub fn outcome_count(&self) -> usize {
        match self {
            MeasurementSpec::Basis(b) => b.len(),
            MeasurementSpec::Decomposition(d) => d.block_count(),
        }
    }

    pub fn outcome_labels(&self) -> Vec<&str> {
        match self {
            MeasurementSpec::Basis(b) => b.labels().iter().map(String::as_str).collect(),
            MeasurementSpec::Decomposition(d) => d.labels(),
        }
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        match self {
            MeasurementSpec::Basis(b) => b.index_of(label),
            MeasurementSpec::Decomposition(d) => d.index_of(label),
        }
    }

    /// Spanning vectors of outcome `i`.
    pub fn outcome_vectors(&self, i: usize) -> &[StateVector] {
        match self {
            MeasurementSpec::Basis(b) => std::slice::from_ref(b.vector(i)),
            MeasurementSpec::Decomposition(d) => d.block(i).vectors(),
        }
    }

    /// Whether the outcome subspaces together span the whole layout.
    pub fn is_complete(&self) -> bool {
        match self {
            MeasurementSpec::Basis(b) => b.is_complete(),
            MeasurementSpec::Decomposition(d) => d.is_complete(),
        }
    }

    /// Lifts the spec from its own (sub-)layout to a larger layout.
    pub fn lift(&self, layout: &SpaceLayout) -> CoreResult<MeasurementSpec> {
        if self.layout() == layout {
            return Ok(self.clone());
        }
        let lifted = match self {
            MeasurementSpec::Basis(b) => lift_basis(b, layout)?,
            MeasurementSpec::Decomposition(d) => lift_decomposition(d, layout)?,
        };
        Ok(MeasurementSpec::Decomposition(lifted))
    }

    /// Underlying decomposition view (singleton blocks for a basis).
    pub fn as_decomposition(&self) -> SubspaceDecomposition {
        match self {
            MeasurementSpec::Basis(b) => SubspaceDecomposition::from_basis(b),
            MeasurementSpec::Decomposition(d) => d.clone(),
        }
    }

    /// Image of the spec under a unitary, keeping labels.
    pub fn transformed(&self, u: &UnitaryMap) -> CoreResult<MeasurementSpec> {
        Ok(match self {
            MeasurementSpec::Basis(b) => MeasurementSpec::Basis(b.transformed(u)?),
            MeasurementSpec::Decomposition(d) => {
                MeasurementSpec::Decomposition(d.transformed(u)?)
            }
        })
    }
}

/// Probabilities over outcome labels, in spec order.
#[derive(Debug, Clone)]
pub struct OutcomeDistribution {
    entries: Vec<(String, f64)>,
}

impl OutcomeDistribution {
    /// Validates the distribution invariants: entries finite, negatives above
    /// `-1e-12` clamped to zero, total within 1e-9 of one.
    pub fn new(entries: Vec<(String, f64)>) -> CoreResult<Self> {
        let mut clean = Vec::with_capacity(entries.len());
        let mut total = 0.0;
        for (label, p) in entries {
            if !p.is_finite() {
                return Err(CoreError::Internal(format!("probability of `{label}` not finite")));
            }
            if p < -PROB_DUST {
                return Err(CoreError::Internal(format!(
                    "probability of `{label}` is {p}, below -1e-12"
                )));
            }
            let p = p.max(0.0);
            total += p;
            clean.push((label, p));
        }
        if (total - 1.0).abs() > STRUCTURAL_TOL {
            return Err(CoreError::Internal(format!("probabilities sum to {total}, not 1")));
        }
        Ok(OutcomeDistribution { entries: clean })
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn probability(&self, label: &str) -> Option<f64> {
        self.entries.iter().find(|(l, _)| l == label).map(|&(_, p)| p)
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.entries.iter().map(|&(_, p)| p).collect()
    }

    /// Largest per-outcome probability difference. Labels must agree.
    pub fn max_abs_gap(&self, other: &OutcomeDistribution) -> CoreResult<f64> {
        if self.entries.len() != other.entries.len() {
            return Err(CoreError::LengthMismatch {
                got: other.entries.len(),
                want: self.entries.len(),
            });
        }
        let mut gap: f64 = 0.0;
        for (l, p) in &self.entries {
            let q = other
                .probability(l)
                .ok_or_else(|| CoreError::UnknownOutcome(l.clone()))?;
            gap = gap.max((p - q).abs());
        }
        Ok(gap)
    }
}

fn outcome_weights(psi: &StateVector, spec: &MeasurementSpec) -> CoreResult<Vec<f64>> {
    let mut weights = Vec::with_capacity(spec.outcome_count());
    let mut covered = 0.0;
    for i in 0..spec.outcome_count() {
        let mut p = 0.0;
        for v in spec.outcome_vectors(i) {
            p += inner(v, psi)?.norm_sqr();
        }
        covered += p;
        weights.push(p);
    }
    if !spec.is_complete() {
        let residual = psi.norm_sq() - covered;
        if residual > STRUCTURAL_TOL {
            return Err(CoreError::UnmeasuredSupport(residual));
        }
    }
    Ok(weights)
}

/// Born probabilities of a normalized state under a measurement spec:
/// `p_j = |<v_j, psi>|^2` for a basis, `p_j = |P_j psi|^2` for a
/// decomposition.
pub fn born_distribution(
    psi: &StateVector,
    spec: &MeasurementSpec,
) -> CoreResult<OutcomeDistribution> {
    if psi.layout() != spec.layout() {
        return Err(CoreError::LayoutMismatch("state and measurement layouts differ".into()));
    }
    if !psi.is_normalized() {
        return Err(CoreError::NotNormalized(psi.norm()));
    }
    let weights = outcome_weights(psi, spec)?;
    let labels = spec.outcome_labels();
    OutcomeDistribution::new(
        labels.into_iter().map(String::from).zip(weights).collect(),
    )
}

/// Normalized projection of `psi` onto the subspace of `outcome`.
///
/// Conditioning on an outcome of probability below 1e-12 is an error, not a
/// zero vector: that is exactly the reasoning pathology the auditor flags.
pub fn collapse(
    psi: &StateVector,
    spec: &MeasurementSpec,
    outcome: &str,
) -> CoreResult<StateVector> {
    if psi.layout() != spec.layout() {
        return Err(CoreError::LayoutMismatch("state and measurement layouts differ".into()));
    }
    let i = spec
        .index_of(outcome)
        .ok_or_else(|| CoreError::UnknownOutcome(outcome.to_string()))?;
    let mut projected = StateVector::zero(psi.layout().clone());
    for v in spec.outcome_vectors(i) {
        let a = inner(v, psi)?;
        projected = &projected + &v.scaled(a);
    }
    if projected.norm_sq() < PROB_DUST {
        return Err(CoreError::ZeroProbabilityOutcome(outcome.to_string()));
    }
    projected.normalized()
}

/// The operator with eigenvector `v_j` and eigenvalue `r_j` for every basis
/// vector: `sum_j r_j |v_j><v_j|`.
pub fn observable_from(
    basis: &OrthonormalBasis,
    values: &[f64],
) -> CoreResult<SelfAdjointOperator> {
    if values.len() != basis.len() {
        return Err(CoreError::LengthMismatch { got: values.len(), want: basis.len() });
    }
    let dim = basis.layout().total_dim();
    let mut elems = vec![Complex64::new(0.0, 0.0); dim * dim];
    for (v, &r) in basis.vectors().iter().zip(values) {
        for row in 0..dim {
            for col in 0..dim {
                elems[row * dim + col] += v.amp(row) * v.amp(col).conj() * r;
            }
        }
    }
    SelfAdjointOperator::new(basis.layout().clone(), elems)
}

/// Expectation value `<T(psi), psi>` of a self-adjoint operator at a
/// normalized state. The imaginary part of the raw inner product must be
/// rounding dust (at most 1e-9) and is discarded.
pub fn expectation(op: &SelfAdjointOperator, psi: &StateVector) -> CoreResult<f64> {
    if !psi.is_normalized() {
        return Err(CoreError::NotNormalized(psi.norm()));
    }
    let raw = inner(&op.apply(psi)?, psi)?;
    if raw.im.abs() > STRUCTURAL_TOL {
        return Err(CoreError::Internal(format!(
            "expectation has imaginary part {:.3e}",
            raw.im
        )));
    }
    Ok(raw.re)
}

/// Eigenvalues of `op` clustered at absolute gap 1e-6, with orthonormal
/// eigenvectors per cluster. Clusters are sorted by eigenvalue and each is
/// represented by the mean of its members.
pub fn eigen_clusters(op: &SelfAdjointOperator) -> CoreResult<Vec<(f64, Vec<StateVector>)>> {
    let dim = op.dim();
    let eig = SymmetricEigen::new(op.to_dmatrix());
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &i in &order {
        let value = eig.eigenvalues[i];
        match groups.last_mut() {
            Some(group)
                if value - eig.eigenvalues[*group.last().expect("non-empty group")]
                    <= EIGEN_CLUSTER_TOL =>
            {
                group.push(i);
            }
            _ => groups.push(vec![i]),
        }
    }

    groups
        .into_iter()
        .map(|group| {
            let mean =
                group.iter().map(|&i| eig.eigenvalues[i]).sum::<f64>() / group.len() as f64;
            let vectors = group
                .iter()
                .map(|&i| {
                    StateVector::new(
                        op.layout().clone(),
                        (0..dim).map(|r| eig.eigenvectors[(r, i)]).collect(),
                    )
                })
                .collect::<CoreResult<Vec<_>>>()?;
            Ok((mean, vectors))
        })
        .collect()
}

fn find_cluster(
    clusters: &[(f64, Vec<StateVector>)],
    r: f64,
) -> CoreResult<&(f64, Vec<StateVector>)> {
    clusters
        .iter()
        .filter(|(value, _)| (value - r).abs() <= EIGEN_CLUSTER_TOL)
        .min_by(|(a, _), (b, _)| (a - r).abs().total_cmp(&(b - r).abs()))
        .ok_or(CoreError::NoEigenvalueCluster { value: r, tol: EIGEN_CLUSTER_TOL })
}

/// Probability `|P_r psi|^2` of finding eigenvalue `r` in a measurement of
/// `op`, where `P_r` projects onto the eigenvalue cluster within 1e-6 of `r`.
pub fn eigen_probability(op: &SelfAdjointOperator, r: f64, psi: &StateVector) -> CoreResult<f64> {
    if psi.layout() != op.layout() {
        return Err(CoreError::LayoutMismatch("state and operator layouts differ".into()));
    }
    let clusters = eigen_clusters(op)?;
    let (_, vectors) = find_cluster(&clusters, r)?;
    let mut p = 0.0;
    for v in vectors {
        p += inner(v, psi)?.norm_sqr();
    }
    Ok(p)
}

/// Dense projector onto the eigenvalue cluster of `op` within 1e-6 of `r`.
pub fn eigenspace_projector(op: &SelfAdjointOperator, r: f64) -> CoreResult<SelfAdjointOperator> {
    let clusters = eigen_clusters(op)?;
    let (_, vectors) = find_cluster(&clusters, r)?;
    let dim = op.dim();
    let mut elems = vec![Complex64::new(0.0, 0.0); dim * dim];
    for v in vectors {
        for row in 0..dim {
            for col in 0..dim {
                elems[row * dim + col] += v.amp(row) * v.amp(col).conj();
            }
        }
    }
    SelfAdjointOperator::new(op.layout().clone(), elems)
}
