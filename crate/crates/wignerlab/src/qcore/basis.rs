//! Orthonormal bases, orthogonal subspace decompositions and lifts.

use num_complex::Complex64;

use super::operator::{SelfAdjointOperator, UnitaryMap};
use super::state::{check_same_layout, inner};
use super::{CoreError, CoreResult, SpaceLayout, StateVector, SubsetMap, STRUCTURAL_TOL};

/// An orthonormal set of vectors with one outcome label per vector.
///
/// The set is *complete* when it has as many vectors as the layout has
/// dimensions; operations that need a full basis check [`Self::is_complete`].
#[derive(Debug, Clone)]
pub struct OrthonormalBasis {
    layout: SpaceLayout,
    vectors: Vec<StateVector>,
    labels: Vec<String>,
}

impl OrthonormalBasis {
    pub fn new(vectors: Vec<StateVector>, labels: Vec<String>) -> CoreResult<Self> {
        if vectors.is_empty() {
            return Err(CoreError::InvalidArgument("basis needs at least one vector".into()));
        }
        if vectors.len() != labels.len() {
            return Err(CoreError::LengthMismatch { got: labels.len(), want: vectors.len() });
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(CoreError::DuplicateOutcome(l.clone()));
            }
        }
        let layout = vectors[0].layout().clone();
        if vectors.len() > layout.total_dim() {
            return Err(CoreError::LengthMismatch {
                got: vectors.len(),
                want: layout.total_dim(),
            });
        }
        for v in &vectors[1..] {
            check_same_layout(&vectors[0], v)?;
        }
        check_orthonormal(&vectors)?;
        Ok(OrthonormalBasis { layout, vectors, labels })
    }

    /// The computational basis of a layout, labeled by the joined outcome
    /// labels of each factor (single-factor layouts keep their plain labels).
    pub fn computational(layout: SpaceLayout) -> Self {
        let vectors: Vec<StateVector> = (0..layout.total_dim())
            .map(|i| StateVector::from_flat(layout.clone(), i).expect("index in range"))
            .collect();
        let labels: Vec<String> =
            (0..layout.total_dim()).map(|i| layout.basis_labels(i).join(",")).collect();
        OrthonormalBasis { layout, vectors, labels }
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.vectors.len() == self.layout.total_dim()
    }

    pub fn vectors(&self) -> &[StateVector] {
        &self.vectors
    }

    pub fn vector(&self, i: usize) -> &StateVector {
        &self.vectors[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Image of the basis under a unitary, keeping labels.
    pub fn transformed(&self, u: &UnitaryMap) -> CoreResult<OrthonormalBasis> {
        let vectors = self
            .vectors
            .iter()
            .map(|v| super::operator::apply_unitary(u, v))
            .collect::<CoreResult<Vec<_>>>()?;
        OrthonormalBasis::new(vectors, self.labels.clone())
    }
}

fn check_orthonormal(vectors: &[StateVector]) -> CoreResult<()> {
    for (j, vj) in vectors.iter().enumerate() {
        for (k, vk) in vectors.iter().enumerate().skip(j) {
            let ip = inner(vj, vk)?;
            let want = if j == k { 1.0 } else { 0.0 };
            let dev = (ip - Complex64::new(want, 0.0)).norm();
            if dev > STRUCTURAL_TOL {
                return Err(CoreError::NotOrthonormal(format!(
                    "|<v{j}, v{k}> - {want}| = {dev:.3e}"
                )));
            }
        }
    }
    Ok(())
}

/// Expansion coefficients of `psi` in a complete basis: `a_j = inner(v_j, psi)`.
pub fn expand_in_basis(psi: &StateVector, basis: &OrthonormalBasis) -> CoreResult<Vec<Complex64>> {
    check_same_layout(psi, &basis.vectors[0])?;
    if !basis.is_complete() {
        return Err(CoreError::IncompleteBasis {
            got: basis.len(),
            want: basis.layout.total_dim(),
        });
    }
    basis.vectors.iter().map(|v| inner(v, psi)).collect()
}

/// One labeled block of an orthogonal decomposition.
#[derive(Debug, Clone)]
pub struct DecompositionBlock {
    label: String,
    vectors: Vec<StateVector>,
}

impl DecompositionBlock {
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn vectors(&self) -> &[StateVector] {
        &self.vectors
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }
}

/// An orthogonal direct-sum decomposition given by orthonormal spanning sets.
///
/// The blocks may span a proper subspace; [`Self::is_complete`] tells whether
/// they exhaust the layout, and [`Self::completed_with_rest`] appends the
/// orthogonal complement as an explicit labeled block.
#[derive(Debug, Clone)]
pub struct SubspaceDecomposition {
    layout: SpaceLayout,
    blocks: Vec<DecompositionBlock>,
}

impl SubspaceDecomposition {
    pub fn new(blocks: Vec<(String, Vec<StateVector>)>) -> CoreResult<Self> {
        if blocks.is_empty() {
            return Err(CoreError::InvalidArgument("decomposition needs at least one block".into()));
        }
        let mut all: Vec<StateVector> = Vec::new();
        for (i, (label, vectors)) in blocks.iter().enumerate() {
            if blocks[..i].iter().any(|(l, _)| l == label) {
                return Err(CoreError::DuplicateOutcome(label.clone()));
            }
            if vectors.is_empty() {
                return Err(CoreError::InvalidArgument(format!("block `{label}` is empty")));
            }
            all.extend(vectors.iter().cloned());
        }
        let layout = all[0].layout().clone();
        for v in &all[1..] {
            check_same_layout(&all[0], v)?;
        }
        if all.len() > layout.total_dim() {
            return Err(CoreError::LengthMismatch { got: all.len(), want: layout.total_dim() });
        }
        check_orthonormal(&all)?;
        let blocks = blocks
            .into_iter()
            .map(|(label, vectors)| DecompositionBlock { label, vectors })
            .collect();
        Ok(SubspaceDecomposition { layout, blocks })
    }

    /// Singleton blocks, one per basis vector.
    pub fn from_basis(basis: &OrthonormalBasis) -> Self {
        let blocks = basis
            .vectors
            .iter()
            .zip(&basis.labels)
            .map(|(v, l)| DecompositionBlock { label: l.clone(), vectors: vec![v.clone()] })
            .collect();
        SubspaceDecomposition { layout: basis.layout.clone(), blocks }
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn blocks(&self) -> &[DecompositionBlock] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &DecompositionBlock {
        &self.blocks[i]
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.blocks.iter().map(|b| b.label.as_str()).collect()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.label == label)
    }

    pub fn total_block_dim(&self) -> usize {
        self.blocks.iter().map(DecompositionBlock::dim).sum()
    }

    /// Whether the blocks together span the whole layout.
    pub fn is_complete(&self) -> bool {
        self.total_block_dim() == self.layout.total_dim()
    }

    /// Unnormalized orthogonal projection of `psi` onto block `i`.
    pub fn project(&self, psi: &StateVector, i: usize) -> CoreResult<StateVector> {
        if i >= self.blocks.len() {
            return Err(CoreError::IndexOutOfRange(i));
        }
        let mut out = StateVector::zero(self.layout.clone());
        for v in &self.blocks[i].vectors {
            let a = inner(v, psi)?;
            out = &out + &v.scaled(a);
        }
        Ok(out)
    }

    /// Dense projector onto block `i`.
    pub fn projector(&self, i: usize) -> CoreResult<SelfAdjointOperator> {
        if i >= self.blocks.len() {
            return Err(CoreError::IndexOutOfRange(i));
        }
        let dim = self.layout.total_dim();
        let mut elems = vec![Complex64::new(0.0, 0.0); dim * dim];
        for v in &self.blocks[i].vectors {
            for r in 0..dim {
                for c in 0..dim {
                    elems[r * dim + c] += v.amp(r) * v.amp(c).conj();
                }
            }
        }
        SelfAdjointOperator::new(self.layout.clone(), elems)
    }

    /// Appends the orthogonal complement of the union of all blocks as one
    /// extra block, producing a complete decomposition. The complement basis
    /// comes from Gram-Schmidt over the computational basis, so it is
    /// deterministic.
    pub fn completed_with_rest(&self, rest_label: &str) -> CoreResult<SubspaceDecomposition> {
        if self.blocks.iter().any(|b| b.label == rest_label) {
            return Err(CoreError::DuplicateOutcome(rest_label.to_string()));
        }
        if self.is_complete() {
            return Err(CoreError::InvalidArgument(
                "decomposition already spans the whole space".into(),
            ));
        }
        let mut collected: Vec<StateVector> =
            self.blocks.iter().flat_map(|b| b.vectors.iter().cloned()).collect();
        let mut rest = Vec::new();
        for i in 0..self.layout.total_dim() {
            let mut v = StateVector::from_flat(self.layout.clone(), i)?;
            // Orthogonalize twice for numerical stability.
            for _ in 0..2 {
                for u in &collected {
                    let a = inner(u, &v)?;
                    v = &v - &u.scaled(a);
                }
            }
            if v.norm() > 1e-7 {
                let v = v.normalized()?;
                collected.push(v.clone());
                rest.push(v);
            }
        }
        let mut blocks: Vec<(String, Vec<StateVector>)> = self
            .blocks
            .iter()
            .map(|b| (b.label.clone(), b.vectors.clone()))
            .collect();
        blocks.push((rest_label.to_string(), rest));
        SubspaceDecomposition::new(blocks)
    }

    /// Image of the decomposition under a unitary, keeping labels.
    pub fn transformed(&self, u: &UnitaryMap) -> CoreResult<SubspaceDecomposition> {
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let vectors = b
                    .vectors
                    .iter()
                    .map(|v| super::operator::apply_unitary(u, v))
                    .collect::<CoreResult<Vec<_>>>()?;
                Ok((b.label.clone(), vectors))
            })
            .collect::<CoreResult<Vec<_>>>()?;
        SubspaceDecomposition::new(blocks)
    }
}

/// Lifts a decomposition living on a subset of `layout`'s factors to the full
/// layout: the block for outcome `m` spans `{v ⊗ e}` with `v` ranging over the
/// block and `e` over the computational basis of the complementary factors.
pub fn lift_decomposition(
    local: &SubspaceDecomposition,
    layout: &SpaceLayout,
) -> CoreResult<SubspaceDecomposition> {
    let sub_labels: Vec<&str> = local.layout.factors().iter().map(|f| f.label()).collect();
    for f in local.layout.factors() {
        let parent = layout.factor(f.label())?;
        if parent != f {
            return Err(CoreError::LayoutMismatch(format!(
                "factor `{}` differs between the local layout and the target layout",
                f.label()
            )));
        }
    }
    let map = SubsetMap::new(layout, &sub_labels)?;
    let comp_dim = map.comp_dim();
    let mut blocks = Vec::with_capacity(local.blocks.len());
    for b in &local.blocks {
        let mut vectors = Vec::with_capacity(b.vectors.len() * comp_dim);
        for v in &b.vectors {
            for c in 0..comp_dim {
                let mut amps = vec![Complex64::new(0.0, 0.0); layout.total_dim()];
                for (s, &amp) in v.amps().iter().enumerate() {
                    amps[map.join(s, c)] = amp;
                }
                vectors.push(StateVector::new(layout.clone(), amps)?);
            }
        }
        blocks.push((b.label.clone(), vectors));
    }
    SubspaceDecomposition::new(blocks)
}

/// Lifts an orthonormal set on a factor subset, one singleton block per
/// vector.
pub fn lift_basis(
    local: &OrthonormalBasis,
    layout: &SpaceLayout,
) -> CoreResult<SubspaceDecomposition> {
    lift_decomposition(&SubspaceDecomposition::from_basis(local), layout)
}
