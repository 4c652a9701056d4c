//! Exact collective-spin algebra in the maximal-J Dicke manifold.
//!
//! Basis states are `|J = N/2, m⟩` ordered by ascending `m`, so index `k`
//! carries `m = k − N/2` and counts the number of atoms in `|↑⟩`. Everything
//! here is dense: the manifold has dimension `N + 1`, which keeps a few
//! hundred atoms cheap.

mod evolve;
mod moments;
mod state;

pub use evolve::{evolve_lindblad, evolve_unitary, LindbladOptions, LindbladOutcome, UnitaryPropagator};
pub use moments::{perpendicular_basis, spin_moments, squeezing_parameter, SpinMoments, SqueezingReport};
pub use state::DickeState;

use nalgebra::{DMatrix, DVector, Vector3};
use num_complex::Complex64;
use thiserror::Error;

use crate::couplings::XYZCouplings;

pub type C64 = Complex64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpinError {
    #[error("Dicke basis needs at least one atom")]
    DegenerateBasis,
    #[error("basis mismatch: operator has N = {operator}, state has N = {state}")]
    BasisMismatch { operator: usize, state: usize },
    #[error("state vector has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("pure state is not normalised (norm = {norm})")]
    NotNormalized { norm: f64 },
    #[error("density matrix is invalid: {reason}")]
    InvalidDensityMatrix { reason: String },
    #[error("operator is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("unitary evolution needs a pure state; use evolve_lindblad for density matrices")]
    MixedStateInput,
    #[error("jump operator {index} has negative rate {rate}")]
    NegativeRate { index: usize, rate: f64 },
    #[error("non-finite input: {what}")]
    NonFinite { what: &'static str },
    #[error("mean spin vanishes; no reference direction for squeezing")]
    ZeroMeanSpin,
    #[error("Lindblad step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
}

/// The `N + 1` dimensional symmetric subspace of `N` two-level atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DickeBasis {
    n_atoms: usize,
}

impl DickeBasis {
    pub fn new(n_atoms: usize) -> Result<Self, SpinError> {
        if n_atoms == 0 {
            return Err(SpinError::DegenerateBasis);
        }
        Ok(Self { n_atoms })
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn dimension(&self) -> usize {
        self.n_atoms + 1
    }

    /// Total spin `J = N/2`.
    pub fn spin_length(&self) -> f64 {
        self.n_atoms as f64 / 2.0
    }

    /// Magnetic quantum number of basis index `k`.
    pub fn m(&self, k: usize) -> f64 {
        k as f64 - self.spin_length()
    }

    /// `J(J+1)`, the Casimir eigenvalue on the whole manifold.
    pub fn casimir(&self) -> f64 {
        let j = self.spin_length();
        j * (j + 1.0)
    }
}

/// A dense operator acting on one Dicke manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct CollectiveOperator {
    basis: DickeBasis,
    matrix: DMatrix<C64>,
}

impl CollectiveOperator {
    pub fn from_matrix(basis: DickeBasis, matrix: DMatrix<C64>) -> Result<Self, SpinError> {
        let d = basis.dimension();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(SpinError::DimensionMismatch { expected: d, got: matrix.nrows() });
        }
        Ok(Self { basis, matrix })
    }

    pub fn zeros(basis: DickeBasis) -> Self {
        let d = basis.dimension();
        Self { basis, matrix: DMatrix::zeros(d, d) }
    }

    pub fn identity(basis: DickeBasis) -> Self {
        let d = basis.dimension();
        Self { basis, matrix: DMatrix::identity(d, d) }
    }

    pub fn basis(&self) -> DickeBasis {
        self.basis
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn adjoint(&self) -> Self {
        Self { basis: self.basis, matrix: self.matrix.adjoint() }
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self { basis: self.basis, matrix: &self.matrix * C64::new(factor, 0.0) }
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.basis, other.basis);
        Self { basis: self.basis, matrix: &self.matrix + &other.matrix }
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, other: &Self, factor: f64) {
        debug_assert_eq!(self.basis, other.basis);
        self.matrix.zip_apply(&other.matrix, |a, b| *a += b * factor);
    }

    pub fn compose(&self, other: &Self) -> Self {
        debug_assert_eq!(self.basis, other.basis);
        Self { basis: self.basis, matrix: &self.matrix * &other.matrix }
    }

    pub fn commutator(&self, other: &Self) -> Self {
        let ab = &self.matrix * &other.matrix;
        let ba = &other.matrix * &self.matrix;
        Self { basis: self.basis, matrix: ab - ba }
    }

    pub fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        &self.matrix * v
    }

    /// Largest entry of `|A − A†|`.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.matrix.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                let diff = (self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm();
                worst = worst.max(diff);
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    /// Max-entry norm.
    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// `Ĵx, Ĵy, Ĵz, Ĵ₊, Ĵ₋` on one manifold.
#[derive(Debug, Clone)]
pub struct CollectiveOps {
    pub jx: CollectiveOperator,
    pub jy: CollectiveOperator,
    pub jz: CollectiveOperator,
    pub jplus: CollectiveOperator,
    pub jminus: CollectiveOperator,
}

impl CollectiveOps {
    pub fn basis(&self) -> DickeBasis {
        self.jz.basis
    }

    /// `n·Ĵ` for a real 3-vector `n`.
    pub fn along(&self, n: &Vector3<f64>) -> CollectiveOperator {
        let mut op = self.jx.scale(n.x);
        op.add_scaled(&self.jy, n.y);
        op.add_scaled(&self.jz, n.z);
        op
    }

    /// `Ĵ·Ĵ`.
    pub fn casimir(&self) -> CollectiveOperator {
        let mut c = self.jx.compose(&self.jx);
        c = c.add(&self.jy.compose(&self.jy));
        c.add(&self.jz.compose(&self.jz))
    }

    pub fn components(&self) -> [&CollectiveOperator; 3] {
        [&self.jx, &self.jy, &self.jz]
    }
}

/// Collective spin operators with the standard ladder matrix elements
/// `⟨m+1|Ĵ₊|m⟩ = √(J(J+1) − m(m+1))`.
pub fn build_collective_ops(basis: DickeBasis) -> CollectiveOps {
    let d = basis.dimension();
    let j = basis.spin_length();
    let mut jz = DMatrix::<C64>::zeros(d, d);
    let mut jplus = DMatrix::<C64>::zeros(d, d);
    for k in 0..d {
        let m = basis.m(k);
        jz[(k, k)] = C64::new(m, 0.0);
        if k + 1 < d {
            let amp = (j * (j + 1.0) - m * (m + 1.0)).max(0.0).sqrt();
            jplus[(k + 1, k)] = C64::new(amp, 0.0);
        }
    }
    let jminus = jplus.adjoint();
    let half = C64::new(0.5, 0.0);
    let jx = (&jplus + &jminus) * half;
    // (Ĵ₊ − Ĵ₋)/(2i) = −i/2 (Ĵ₊ − Ĵ₋)
    let jy = (&jplus - &jminus) * C64::new(0.0, -0.5);
    let wrap = |matrix| CollectiveOperator { basis, matrix };
    CollectiveOps {
        jx: wrap(jx),
        jy: wrap(jy),
        jz: wrap(jz),
        jplus: wrap(jplus),
        jminus: wrap(jminus),
    }
}

/// `H = χx Ĵx² + χy Ĵy² + χz Ĵz²`, plus `ωz Ĵz` when `linear_z` is given.
pub fn build_xyz_hamiltonian(
    x: &XYZCouplings,
    basis: DickeBasis,
    linear_z: Option<f64>,
) -> Result<CollectiveOperator, SpinError> {
    if ![x.chi_x, x.chi_y, x.chi_z].iter().all(|c| c.is_finite()) {
        return Err(SpinError::NonFinite { what: "XYZ couplings" });
    }
    let ops = build_collective_ops(basis);
    let mut h = CollectiveOperator::zeros(basis);
    for (chi, op) in [x.chi_x, x.chi_y, x.chi_z].into_iter().zip(ops.components()) {
        if chi != 0.0 {
            h.add_scaled(&op.compose(op), chi);
        }
    }
    if let Some(omega) = linear_z {
        h.add_scaled(&ops.jz, omega);
    }
    Ok(h)
}

/// Linear term `d·Ĵ` (transverse drives, Zeeman-like shifts).
pub fn build_linear_term(basis: DickeBasis, field: &Vector3<f64>) -> CollectiveOperator {
    build_collective_ops(basis).along(field)
}
