//! Dense unitaries, self-adjoint operators and the product/entanglement test.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{CoreError, CoreResult, SpaceLayout, StateVector, SubsetMap, RANK_REL_TOL, STRUCTURAL_TOL};

/// A norm-preserving linear map, stored as a dense row-major matrix.
#[derive(Debug, Clone)]
pub struct UnitaryMap {
    layout: SpaceLayout,
    elems: Vec<Complex64>,
}

impl UnitaryMap {
    pub fn new(layout: SpaceLayout, elems: Vec<Complex64>) -> CoreResult<Self> {
        let dim = layout.total_dim();
        check_matrix(&elems, dim)?;
        let dev = unitarity_deviation(&elems, dim);
        if dev > STRUCTURAL_TOL {
            return Err(CoreError::NotUnitary(dev));
        }
        Ok(UnitaryMap { layout, elems })
    }

    pub fn identity(layout: SpaceLayout) -> Self {
        let dim = layout.total_dim();
        let mut elems = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            elems[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        UnitaryMap { layout, elems }
    }

    /// Permutation matrix mapping basis element `j` to `perm[j]`.
    pub fn permutation(layout: SpaceLayout, perm: &[usize]) -> CoreResult<Self> {
        let dim = layout.total_dim();
        if perm.len() != dim {
            return Err(CoreError::LengthMismatch { got: perm.len(), want: dim });
        }
        let mut seen = vec![false; dim];
        let mut elems = vec![Complex64::new(0.0, 0.0); dim * dim];
        for (j, &p) in perm.iter().enumerate() {
            if p >= dim || seen[p] {
                return Err(CoreError::InvalidArgument("not a permutation".into()));
            }
            seen[p] = true;
            elems[p * dim + j] = Complex64::new(1.0, 0.0);
        }
        Ok(UnitaryMap { layout, elems })
    }

    /// Unitary whose columns are the vectors of a complete orthonormal basis.
    pub fn from_basis_columns(basis: &super::OrthonormalBasis) -> CoreResult<Self> {
        let layout = basis.layout().clone();
        let dim = layout.total_dim();
        if !basis.is_complete() {
            return Err(CoreError::IncompleteBasis { got: basis.len(), want: dim });
        }
        let mut elems = vec![Complex64::new(0.0, 0.0); dim * dim];
        for (c, v) in basis.vectors().iter().enumerate() {
            for r in 0..dim {
                elems[r * dim + c] = v.amp(r);
            }
        }
        UnitaryMap::new(layout, elems)
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.total_dim()
    }

    pub fn elems(&self) -> &[Complex64] {
        &self.elems
    }

    pub fn entry(&self, r: usize, c: usize) -> Complex64 {
        self.elems[r * self.dim() + c]
    }

    pub fn adjoint(&self) -> UnitaryMap {
        let dim = self.dim();
        let mut elems = vec![Complex64::new(0.0, 0.0); dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                elems[c * dim + r] = self.elems[r * dim + c].conj();
            }
        }
        UnitaryMap { layout: self.layout.clone(), elems }
    }

    /// Embeds this unitary into a larger layout, acting as the identity on
    /// every factor outside its own.
    pub fn lift(&self, layout: &SpaceLayout) -> CoreResult<UnitaryMap> {
        if *layout == self.layout {
            return Ok(self.clone());
        }
        let sub_labels: Vec<&str> = self.layout.factors().iter().map(|f| f.label()).collect();
        for f in self.layout.factors() {
            if layout.factor(f.label())? != f {
                return Err(CoreError::LayoutMismatch(format!(
                    "factor `{}` differs between layouts",
                    f.label()
                )));
            }
        }
        let map = SubsetMap::new(layout, &sub_labels)?;
        let dim = layout.total_dim();
        let sub_dim = self.dim();
        let mut elems = vec![Complex64::new(0.0, 0.0); dim * dim];
        for sr in 0..sub_dim {
            for sc in 0..sub_dim {
                let e = self.elems[sr * sub_dim + sc];
                if e.norm_sqr() == 0.0 {
                    continue;
                }
                for comp in 0..map.comp_dim() {
                    let r = map.join(sr, comp);
                    let c = map.join(sc, comp);
                    elems[r * dim + c] = e;
                }
            }
        }
        Ok(UnitaryMap { layout: layout.clone(), elems })
    }
}

fn check_matrix(elems: &[Complex64], dim: usize) -> CoreResult<()> {
    if elems.len() != dim * dim {
        return Err(CoreError::LengthMismatch { got: elems.len(), want: dim * dim });
    }
    if let Some(i) = elems.iter().position(|a| !a.re.is_finite() || !a.im.is_finite()) {
        return Err(CoreError::NonFinite(i));
    }
    Ok(())
}

fn unitarity_deviation(elems: &[Complex64], dim: usize) -> f64 {
    // max-norm of U†U - I
    let mut dev: f64 = 0.0;
    for r in 0..dim {
        for c in 0..dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..dim {
                acc += elems[k * dim + r].conj() * elems[k * dim + c];
            }
            let want = if r == c { 1.0 } else { 0.0 };
            dev = dev.max((acc - Complex64::new(want, 0.0)).norm());
        }
    }
    dev
}

/// Applies a unitary to a state on the same layout.
pub fn apply_unitary(u: &UnitaryMap, psi: &StateVector) -> CoreResult<StateVector> {
    if *psi.layout() != u.layout {
        return Err(CoreError::LayoutMismatch("unitary and state layouts differ".into()));
    }
    let dim = u.dim();
    let mut amps = vec![Complex64::new(0.0, 0.0); dim];
    for r in 0..dim {
        let mut acc = Complex64::new(0.0, 0.0);
        for c in 0..dim {
            acc += u.elems[r * dim + c] * psi.amp(c);
        }
        amps[r] = acc;
    }
    StateVector::new(u.layout.clone(), amps)
}

/// A dense Hermitian matrix over a layout.
#[derive(Debug, Clone)]
pub struct SelfAdjointOperator {
    layout: SpaceLayout,
    elems: Vec<Complex64>,
}

impl SelfAdjointOperator {
    pub fn new(layout: SpaceLayout, elems: Vec<Complex64>) -> CoreResult<Self> {
        let dim = layout.total_dim();
        check_matrix(&elems, dim)?;
        let mut dev: f64 = 0.0;
        for r in 0..dim {
            for c in 0..dim {
                dev = dev.max((elems[r * dim + c] - elems[c * dim + r].conj()).norm());
            }
        }
        if dev > STRUCTURAL_TOL {
            return Err(CoreError::NotSelfAdjoint(dev));
        }
        Ok(SelfAdjointOperator { layout, elems })
    }

    pub fn identity(layout: SpaceLayout) -> Self {
        let dim = layout.total_dim();
        let mut elems = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            elems[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        SelfAdjointOperator { layout, elems }
    }

    pub fn diagonal(layout: SpaceLayout, values: &[f64]) -> CoreResult<Self> {
        let dim = layout.total_dim();
        if values.len() != dim {
            return Err(CoreError::LengthMismatch { got: values.len(), want: dim });
        }
        let mut elems = vec![Complex64::new(0.0, 0.0); dim * dim];
        for (i, &v) in values.iter().enumerate() {
            elems[i * dim + i] = Complex64::new(v, 0.0);
        }
        Ok(SelfAdjointOperator { layout, elems })
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.total_dim()
    }

    pub fn elems(&self) -> &[Complex64] {
        &self.elems
    }

    pub fn entry(&self, r: usize, c: usize) -> Complex64 {
        self.elems[r * self.dim() + c]
    }

    pub fn apply(&self, psi: &StateVector) -> CoreResult<StateVector> {
        if *psi.layout() != self.layout {
            return Err(CoreError::LayoutMismatch("operator and state layouts differ".into()));
        }
        let dim = self.dim();
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        for r in 0..dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for c in 0..dim {
                acc += self.elems[r * dim + c] * psi.amp(c);
            }
            amps[r] = acc;
        }
        StateVector::new(self.layout.clone(), amps)
    }

    /// Real linear combination `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &SelfAdjointOperator, b: f64) -> CoreResult<Self> {
        if self.layout != other.layout {
            return Err(CoreError::LayoutMismatch("operators live on different layouts".into()));
        }
        let elems = self
            .elems
            .iter()
            .zip(&other.elems)
            .map(|(x, y)| x * a + y * b)
            .collect();
        SelfAdjointOperator::new(self.layout.clone(), elems)
    }

    /// Embeds the operator into a larger layout (identity elsewhere).
    pub fn lift(&self, layout: &SpaceLayout) -> CoreResult<SelfAdjointOperator> {
        if *layout == self.layout {
            return Ok(self.clone());
        }
        let sub_labels: Vec<&str> = self.layout.factors().iter().map(|f| f.label()).collect();
        for f in self.layout.factors() {
            if layout.factor(f.label())? != f {
                return Err(CoreError::LayoutMismatch(format!(
                    "factor `{}` differs between layouts",
                    f.label()
                )));
            }
        }
        let map = SubsetMap::new(layout, &sub_labels)?;
        let dim = layout.total_dim();
        let sub_dim = self.dim();
        let mut elems = vec![Complex64::new(0.0, 0.0); dim * dim];
        for sr in 0..sub_dim {
            for sc in 0..sub_dim {
                let e = self.elems[sr * sub_dim + sc];
                if e.norm_sqr() == 0.0 {
                    continue;
                }
                for comp in 0..map.comp_dim() {
                    elems[map.join(sr, comp) * dim + map.join(sc, comp)] = e;
                }
            }
        }
        SelfAdjointOperator::new(layout.clone(), elems)
    }

    pub(crate) fn to_dmatrix(&self) -> DMatrix<Complex64> {
        let dim = self.dim();
        DMatrix::from_row_iterator(dim, dim, self.elems.iter().copied())
    }
}

/// Result of the numerical-rank product test across a bipartition.
#[derive(Debug, Clone)]
pub enum ProductCheck {
    /// The state factorizes as `left ⊗ right` (up to a global phase split
    /// between the two factors).
    Product { left: StateVector, right: StateVector },
    /// Numerical rank of the reshaped amplitude matrix exceeds one.
    Entangled { largest: f64, second: f64 },
}

impl ProductCheck {
    pub fn is_product(&self) -> bool {
        matches!(self, ProductCheck::Product { .. })
    }
}

/// Tests whether `psi` is a tensor product across the bipartition whose left
/// side is `left_labels` (the right side is the complement, in layout order).
///
/// Decides by singular values of the reshaped amplitude matrix: product iff
/// every singular value beyond the first is at most `1e-9` times the largest.
pub fn is_product(psi: &StateVector, left_labels: &[&str]) -> CoreResult<ProductCheck> {
    let layout = psi.layout();
    if left_labels.is_empty() || left_labels.len() == layout.factor_count() {
        return Err(CoreError::InvalidSplit(
            "both sides of the bipartition need at least one factor".into(),
        ));
    }
    let map = SubsetMap::new(layout, left_labels)?;
    let (ld, rd) = (map.sub_dim(), map.comp_dim());
    let mut m = DMatrix::from_element(ld, rd, Complex64::new(0.0, 0.0));
    for (flat, &a) in psi.amps().iter().enumerate() {
        let (s, c) = map.split(flat);
        m[(s, c)] = a;
    }
    let svd = m.svd(true, true);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let largest = svd.singular_values[order[0]];
    let second = if order.len() > 1 { svd.singular_values[order[1]] } else { 0.0 };
    if second > RANK_REL_TOL * largest {
        return Ok(ProductCheck::Entangled { largest, second });
    }

    let u = svd.u.ok_or_else(|| CoreError::Internal("svd did not return u".into()))?;
    let v_t = svd.v_t.ok_or_else(|| CoreError::Internal("svd did not return v_t".into()))?;
    let k = order[0];
    let left_layout = layout.subset(left_labels)?;
    let right_names: Vec<&str> = layout
        .factors()
        .iter()
        .map(|f| f.label())
        .filter(|l| !left_labels.contains(l))
        .collect();
    let right_layout = layout.subset(&right_names)?;
    let left_amps: Vec<Complex64> = (0..ld).map(|i| u[(i, k)]).collect();
    let right_amps: Vec<Complex64> =
        (0..rd).map(|j| v_t[(k, j)] * Complex64::new(largest, 0.0)).collect();
    Ok(ProductCheck::Product {
        left: StateVector::new(left_layout, left_amps)?,
        right: StateVector::new(right_layout, right_amps)?,
    })
}
