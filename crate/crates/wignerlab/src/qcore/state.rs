//! Dense state vectors, inner products and tensor products.

use std::ops::{Add, Sub};

use num_complex::Complex64;

use super::{CoreError, CoreResult, SpaceLayout, STRUCTURAL_TOL};

/// A dense complex vector over a [`SpaceLayout`].
///
/// The `normalized` flag is computed at construction and after every
/// norm-changing operation; it records whether the norm is within 1e-9 of one.
#[derive(Debug, Clone)]
pub struct StateVector {
    layout: SpaceLayout,
    amps: Vec<Complex64>,
    normalized: bool,
}

impl StateVector {
    pub fn new(layout: SpaceLayout, amps: Vec<Complex64>) -> CoreResult<Self> {
        if amps.len() != layout.total_dim() {
            return Err(CoreError::LengthMismatch { got: amps.len(), want: layout.total_dim() });
        }
        if let Some(i) = amps.iter().position(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(CoreError::NonFinite(i));
        }
        let normalized = {
            let n2: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
            (n2.sqrt() - 1.0).abs() <= STRUCTURAL_TOL
        };
        Ok(StateVector { layout, amps, normalized })
    }

    /// Computational basis element selected by one outcome label per factor.
    pub fn basis_state(layout: SpaceLayout, labels: &[&str]) -> CoreResult<Self> {
        let idx = layout.basis_index(labels)?;
        Self::from_flat(layout, idx)
    }

    /// Computational basis element at a flat index.
    pub fn from_flat(layout: SpaceLayout, flat: usize) -> CoreResult<Self> {
        if flat >= layout.total_dim() {
            return Err(CoreError::IndexOutOfRange(flat));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); layout.total_dim()];
        amps[flat] = Complex64::new(1.0, 0.0);
        Ok(StateVector { layout, amps, normalized: true })
    }

    /// The zero vector (not normalized); useful as an accumulator.
    pub fn zero(layout: SpaceLayout) -> Self {
        let amps = vec![Complex64::new(0.0, 0.0); layout.total_dim()];
        StateVector { layout, amps, normalized: false }
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amp(&self, i: usize) -> Complex64 {
        self.amps[i]
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm_sq(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Rescaled copy with unit norm.
    pub fn normalized(&self) -> CoreResult<StateVector> {
        let n = self.norm();
        if n < 1e-150 {
            return Err(CoreError::NotNormalized(n));
        }
        Ok(self.scaled(Complex64::new(1.0 / n, 0.0)))
    }

    pub fn scaled(&self, c: Complex64) -> StateVector {
        let amps: Vec<Complex64> = self.amps.iter().map(|a| a * c).collect();
        StateVector::new(self.layout.clone(), amps).expect("scaling a finite state stays finite")
    }

    pub fn scaled_re(&self, c: f64) -> StateVector {
        self.scaled(Complex64::new(c, 0.0))
    }

    /// Largest per-amplitude difference between two states on the same layout.
    pub fn max_amp_diff(&self, other: &StateVector) -> CoreResult<f64> {
        check_same_layout(self, other)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Largest per-amplitude difference after aligning the global phase of
    /// `other` to this state. The phase is taken from the overlap
    /// `inner(other, self)`; when the overlap vanishes, the entry of `other`
    /// with the largest magnitude fixes the phase instead.
    pub fn phase_aligned_diff(&self, other: &StateVector) -> CoreResult<f64> {
        check_same_layout(self, other)?;
        let overlap = inner(other, self)?;
        let phase = if overlap.norm() > 1e-12 {
            overlap / overlap.norm()
        } else {
            let (k, biggest) = other
                .amps
                .iter()
                .enumerate()
                .max_by(|(_, a), (_, b)| a.norm().total_cmp(&b.norm()))
                .expect("non-empty amplitude vector");
            if biggest.norm() > 1e-12 && self.amps[k].norm() > 1e-12 {
                let ratio = self.amps[k] / biggest;
                ratio / ratio.norm()
            } else {
                Complex64::new(1.0, 0.0)
            }
        };
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b * phase).norm())
            .fold(0.0, f64::max))
    }
}

pub(crate) fn check_same_layout(x: &StateVector, y: &StateVector) -> CoreResult<()> {
    if x.layout != y.layout {
        return Err(CoreError::LayoutMismatch("states live on different layouts".into()));
    }
    Ok(())
}

/// Inner product, conjugate-linear in the first argument:
/// `inner(a·x, b·y) = conj(a)·b·inner(x, y)`.
///
/// This is the convention under which the expansion coefficient of `psi` on a
/// basis vector `v` is `inner(v, psi)` and the expectation of an operator `S`
/// expands with the coefficient pattern `conj(a_j)·a_k`.
pub fn inner(x: &StateVector, y: &StateVector) -> CoreResult<Complex64> {
    check_same_layout(x, y)?;
    Ok(x.amps
        .iter()
        .zip(&y.amps)
        .fold(Complex64::new(0.0, 0.0), |acc, (a, b)| acc + a.conj() * b))
}

/// Kronecker product of two states over the concatenated layout.
pub fn tensor(x: &StateVector, y: &StateVector) -> CoreResult<StateVector> {
    let layout = x.layout.concat(&y.layout)?;
    let mut amps = Vec::with_capacity(x.amps.len() * y.amps.len());
    for a in &x.amps {
        for b in &y.amps {
            amps.push(a * b);
        }
    }
    StateVector::new(layout, amps)
}

impl Add for &StateVector {
    type Output = StateVector;

    fn add(self, other: &StateVector) -> StateVector {
        check_same_layout(self, other).expect("adding states on different layouts");
        let amps = self.amps.iter().zip(&other.amps).map(|(a, b)| a + b).collect();
        StateVector::new(self.layout.clone(), amps).expect("sum of finite states is finite")
    }
}

impl Sub for &StateVector {
    type Output = StateVector;

    fn sub(self, other: &StateVector) -> StateVector {
        check_same_layout(self, other).expect("subtracting states on different layouts");
        let amps = self.amps.iter().zip(&other.amps).map(|(a, b)| a - b).collect();
        StateVector::new(self.layout.clone(), amps).expect("difference of finite states is finite")
    }
}
