//! Seeded random fixtures: states, unitaries, Hermitian operators and bases.
//!
//! Everything here is deterministic given the seed (ChaCha12 keystream, own
//! uniform/normal mapping), so property tests can freeze failures.

use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::qcore::{
    inner, OrthonormalBasis, SelfAdjointOperator, SpaceLayout, StateVector, UnitaryMap,
};

pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Uniform draw in [0, 1) from the top 53 bits of the next word.
pub fn unit_f64(rng: &mut ChaCha12Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal via Box-Muller.
pub fn normal_f64(rng: &mut ChaCha12Rng) -> f64 {
    let u1 = (unit_f64(rng)).max(f64::MIN_POSITIVE);
    let u2 = unit_f64(rng);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn normal_c64(rng: &mut ChaCha12Rng) -> Complex64 {
    Complex64::new(normal_f64(rng), normal_f64(rng))
}

/// Random normalized state with complex Gaussian amplitudes.
pub fn random_state(layout: &SpaceLayout, rng: &mut ChaCha12Rng) -> StateVector {
    loop {
        let amps: Vec<Complex64> = (0..layout.total_dim()).map(|_| normal_c64(rng)).collect();
        let state = StateVector::new(layout.clone(), amps).expect("finite Gaussian amplitudes");
        if state.norm() > 1e-6 {
            return state.normalized().expect("nonzero norm");
        }
    }
}

/// Haar-ish random unitary from Gram-Schmidt over Gaussian columns.
pub fn random_unitary(layout: &SpaceLayout, rng: &mut ChaCha12Rng) -> UnitaryMap {
    let dim = layout.total_dim();
    let mut columns: Vec<StateVector> = Vec::with_capacity(dim);
    while columns.len() < dim {
        let mut v = random_state(layout, rng);
        // Orthogonalize twice against the columns found so far.
        for _ in 0..2 {
            for u in &columns {
                let a = inner(u, &v).expect("same layout");
                v = &v - &u.scaled(a);
            }
        }
        if v.norm() > 1e-6 {
            columns.push(v.normalized().expect("nonzero norm"));
        }
    }
    let mut elems = vec![Complex64::new(0.0, 0.0); dim * dim];
    for (c, v) in columns.iter().enumerate() {
        for r in 0..dim {
            elems[r * dim + c] = v.amp(r);
        }
    }
    UnitaryMap::new(layout.clone(), elems).expect("Gram-Schmidt output is unitary")
}

/// Random complete orthonormal basis: the columns of a random unitary,
/// labeled `o0, o1, ...`.
pub fn random_basis(layout: &SpaceLayout, rng: &mut ChaCha12Rng) -> OrthonormalBasis {
    let u = random_unitary(layout, rng);
    let dim = layout.total_dim();
    let vectors: Vec<StateVector> = (0..dim)
        .map(|c| {
            StateVector::new(layout.clone(), (0..dim).map(|r| u.entry(r, c)).collect())
                .expect("unitary columns are finite")
        })
        .collect();
    let labels = (0..dim).map(|i| format!("o{i}")).collect();
    OrthonormalBasis::new(vectors, labels).expect("unitary columns are orthonormal")
}

/// Random Hermitian operator `(A + A†)/2` with Gaussian entries.
pub fn random_hermitian(layout: &SpaceLayout, rng: &mut ChaCha12Rng) -> SelfAdjointOperator {
    let dim = layout.total_dim();
    let a: Vec<Complex64> = (0..dim * dim).map(|_| normal_c64(rng)).collect();
    let mut elems = vec![Complex64::new(0.0, 0.0); dim * dim];
    for r in 0..dim {
        for c in 0..dim {
            elems[r * dim + c] = (a[r * dim + c] + a[c * dim + r].conj()) * 0.5;
        }
    }
    SelfAdjointOperator::new(layout.clone(), elems).expect("symmetrized matrix is Hermitian")
}
