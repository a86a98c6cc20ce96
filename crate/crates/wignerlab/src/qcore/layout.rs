//! Labeled tensor-factor layouts and mixed-radix indexing.

use super::{CoreError, CoreResult};

/// Default cap on the total dimension of a layout. Protects the dense
/// amplitude representation from accidental blowup.
pub const DEFAULT_DIM_CAP: usize = 1 << 20;

/// One tensor factor: a label and its ordered outcome labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factor {
    label: String,
    outcomes: Vec<String>,
}

impl Factor {
    pub fn new(label: impl Into<String>, outcomes: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Factor {
            label: label.into(),
            outcomes: outcomes.into_iter().map(Into::into).collect(),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn outcomes(&self) -> &[String] {
        &self.outcomes
    }

    pub fn dim(&self) -> usize {
        self.outcomes.len()
    }

    pub fn outcome_index(&self, label: &str) -> Option<usize> {
        self.outcomes.iter().position(|o| o == label)
    }
}

/// Ordered sequence of labeled factors; the amplitude index is row-major
/// over factor order (first factor slowest).
#[derive(Debug, Clone)]
pub struct SpaceLayout {
    factors: Vec<Factor>,
    total_dim: usize,
    cap: usize,
}

impl PartialEq for SpaceLayout {
    fn eq(&self, other: &Self) -> bool {
        // The cap is a construction-time guard, not part of the identity.
        self.factors == other.factors
    }
}

impl SpaceLayout {
    pub fn new(factors: Vec<Factor>) -> CoreResult<Self> {
        Self::with_cap(factors, DEFAULT_DIM_CAP)
    }

    pub fn with_cap(factors: Vec<Factor>, cap: usize) -> CoreResult<Self> {
        if factors.is_empty() {
            return Err(CoreError::InvalidArgument("layout needs at least one factor".into()));
        }
        let mut total: usize = 1;
        for (i, f) in factors.iter().enumerate() {
            if f.outcomes.is_empty() {
                return Err(CoreError::InvalidArgument(format!(
                    "factor `{}` has no outcome labels",
                    f.label
                )));
            }
            if factors[..i].iter().any(|g| g.label == f.label) {
                return Err(CoreError::DuplicateFactor(f.label.clone()));
            }
            for (j, o) in f.outcomes.iter().enumerate() {
                if f.outcomes[..j].contains(o) {
                    return Err(CoreError::DuplicateOutcome(format!("{}:{}", f.label, o)));
                }
            }
            total = total
                .checked_mul(f.dim())
                .ok_or(CoreError::DimensionCap { dim: usize::MAX, cap })?;
            if total > cap {
                return Err(CoreError::DimensionCap { dim: total, cap });
            }
        }
        Ok(SpaceLayout { factors, total_dim: total, cap })
    }

    /// Single-factor layout.
    pub fn single(
        label: impl Into<String>,
        outcomes: impl IntoIterator<Item = impl Into<String>>,
    ) -> CoreResult<Self> {
        Self::new(vec![Factor::new(label, outcomes)])
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn factor_count(&self) -> usize {
        self.factors.len()
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(Factor::dim).collect()
    }

    pub fn factor_position(&self, label: &str) -> Option<usize> {
        self.factors.iter().position(|f| f.label == label)
    }

    pub fn factor(&self, label: &str) -> CoreResult<&Factor> {
        self.factors
            .iter()
            .find(|f| f.label == label)
            .ok_or_else(|| CoreError::UnknownFactor(label.to_string()))
    }

    /// Mixed-radix digits of a flat index, one per factor.
    pub fn digits(&self, flat: usize) -> Vec<usize> {
        let mut digits = vec![0; self.factors.len()];
        let mut rem = flat;
        for (i, f) in self.factors.iter().enumerate().rev() {
            digits[i] = rem % f.dim();
            rem /= f.dim();
        }
        digits
    }

    pub fn flat_index(&self, digits: &[usize]) -> usize {
        debug_assert_eq!(digits.len(), self.factors.len());
        let mut flat = 0;
        for (f, &d) in self.factors.iter().zip(digits) {
            debug_assert!(d < f.dim());
            flat = flat * f.dim() + d;
        }
        flat
    }

    /// Flat index of the basis element given one outcome label per factor.
    pub fn basis_index(&self, labels: &[&str]) -> CoreResult<usize> {
        if labels.len() != self.factors.len() {
            return Err(CoreError::LengthMismatch { got: labels.len(), want: self.factors.len() });
        }
        let mut digits = Vec::with_capacity(labels.len());
        for (f, &l) in self.factors.iter().zip(labels) {
            digits.push(
                f.outcome_index(l)
                    .ok_or_else(|| CoreError::UnknownOutcome(format!("{}:{}", f.label, l)))?,
            );
        }
        Ok(self.flat_index(&digits))
    }

    /// Outcome labels of the basis element at a flat index.
    pub fn basis_labels(&self, flat: usize) -> Vec<&str> {
        self.digits(flat)
            .iter()
            .zip(&self.factors)
            .map(|(&d, f)| f.outcomes[d].as_str())
            .collect()
    }

    /// Concatenation of two layouts; factor labels must stay unique.
    pub fn concat(&self, other: &SpaceLayout) -> CoreResult<SpaceLayout> {
        let mut factors = self.factors.clone();
        for f in &other.factors {
            if factors.iter().any(|g| g.label == f.label) {
                return Err(CoreError::DuplicateFactor(f.label.clone()));
            }
            factors.push(f.clone());
        }
        SpaceLayout::with_cap(factors, self.cap.max(other.cap))
    }

    /// Sub-layout over the given factor labels, in the given order.
    pub fn subset(&self, labels: &[&str]) -> CoreResult<SpaceLayout> {
        let mut factors = Vec::with_capacity(labels.len());
        for &l in labels {
            factors.push(self.factor(l)?.clone());
        }
        SpaceLayout::with_cap(factors, self.cap)
    }
}

/// Index bookkeeping for a subset of a layout's factors: splits a parent flat
/// index into (subset flat, complement flat) and joins them back. The subset
/// order is the caller's; the complement keeps parent order.
#[derive(Debug, Clone)]
pub(crate) struct SubsetMap {
    sub_positions: Vec<usize>,
    comp_positions: Vec<usize>,
    parent_dims: Vec<usize>,
}

impl SubsetMap {
    pub fn new(parent: &SpaceLayout, sub_labels: &[&str]) -> CoreResult<Self> {
        let mut sub_positions = Vec::with_capacity(sub_labels.len());
        for (i, &l) in sub_labels.iter().enumerate() {
            if sub_labels[..i].contains(&l) {
                return Err(CoreError::DuplicateFactor(l.to_string()));
            }
            sub_positions.push(
                parent
                    .factor_position(l)
                    .ok_or_else(|| CoreError::UnknownFactor(l.to_string()))?,
            );
        }
        let comp_positions = (0..parent.factor_count())
            .filter(|p| !sub_positions.contains(p))
            .collect();
        Ok(SubsetMap { sub_positions, comp_positions, parent_dims: parent.dims() })
    }

    pub fn sub_dim(&self) -> usize {
        self.sub_positions.iter().map(|&p| self.parent_dims[p]).product()
    }

    pub fn comp_dim(&self) -> usize {
        self.comp_positions.iter().map(|&p| self.parent_dims[p]).product()
    }

    fn digits(&self, parent_flat: usize) -> Vec<usize> {
        let mut digits = vec![0; self.parent_dims.len()];
        let mut rem = parent_flat;
        for i in (0..self.parent_dims.len()).rev() {
            digits[i] = rem % self.parent_dims[i];
            rem /= self.parent_dims[i];
        }
        digits
    }

    pub fn split(&self, parent_flat: usize) -> (usize, usize) {
        let digits = self.digits(parent_flat);
        let mut sub = 0;
        for &p in &self.sub_positions {
            sub = sub * self.parent_dims[p] + digits[p];
        }
        let mut comp = 0;
        for &p in &self.comp_positions {
            comp = comp * self.parent_dims[p] + digits[p];
        }
        (sub, comp)
    }

    pub fn join(&self, sub_flat: usize, comp_flat: usize) -> usize {
        let mut digits = vec![0; self.parent_dims.len()];
        let mut rem = sub_flat;
        for &p in self.sub_positions.iter().rev() {
            digits[p] = rem % self.parent_dims[p];
            rem /= self.parent_dims[p];
        }
        let mut rem = comp_flat;
        for &p in self.comp_positions.iter().rev() {
            digits[p] = rem % self.parent_dims[p];
            rem /= self.parent_dims[p];
        }
        let mut flat = 0;
        for (i, &d) in digits.iter().enumerate() {
            flat = flat * self.parent_dims[i] + d;
        }
        flat
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_factor() -> SpaceLayout {
        SpaceLayout::new(vec![
            Factor::new("a", ["a0", "a1"]),
            Factor::new("b", ["b0", "b1", "b2"]),
        ])
        .unwrap()
    }

    #[test]
    fn indexing_round_trip() {
        let l = two_factor();
        assert_eq!(l.total_dim(), 6);
        for flat in 0..6 {
            assert_eq!(l.flat_index(&l.digits(flat)), flat);
        }
        assert_eq!(l.basis_index(&["a1", "b2"]).unwrap(), 5);
        assert_eq!(l.basis_labels(5), vec!["a1", "b2"]);
    }

    #[test]
    fn rejects_duplicates_and_cap() {
        let dup = SpaceLayout::new(vec![Factor::new("a", ["x"]), Factor::new("a", ["y"])]);
        assert!(matches!(dup, Err(CoreError::DuplicateFactor(_))));

        let dup_outcome = SpaceLayout::single("a", ["x", "x"]);
        assert!(matches!(dup_outcome, Err(CoreError::DuplicateOutcome(_))));

        let capped = SpaceLayout::with_cap(
            vec![Factor::new("a", ["0", "1"]), Factor::new("b", ["0", "1"])],
            3,
        );
        assert!(matches!(capped, Err(CoreError::DimensionCap { dim: 4, cap: 3 })));
    }

    #[test]
    fn subset_map_split_join() {
        let l = two_factor();
        // Subset in reversed order relative to the parent.
        let m = SubsetMap::new(&l, &["b", "a"]).unwrap();
        assert_eq!(m.sub_dim(), 6);
        assert_eq!(m.comp_dim(), 1);
        for flat in 0..6 {
            let (s, c) = m.split(flat);
            assert_eq!(m.join(s, c), flat);
        }

        let m = SubsetMap::new(&l, &["b"]).unwrap();
        // Parent flat 5 = (a1, b2): sub digit 2, comp digit 1.
        assert_eq!(m.split(5), (2, 1));
        assert_eq!(m.join(2, 1), 5);
    }
}
