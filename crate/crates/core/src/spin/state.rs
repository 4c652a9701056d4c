use nalgebra::{DMatrix, DVector};

use super::{DickeBasis, SpinError, C64};

const NORM_TOL: f64 = 1e-10;

/// Exact state in one Dicke manifold.
#[derive(Debug, Clone, PartialEq)]
pub enum DickeState {
    Pure { basis: DickeBasis, amplitudes: DVector<C64> },
    Mixed { basis: DickeBasis, rho: DMatrix<C64> },
}

impl DickeState {
    pub fn pure(basis: DickeBasis, amplitudes: DVector<C64>) -> Result<Self, SpinError> {
        if amplitudes.len() != basis.dimension() {
            return Err(SpinError::DimensionMismatch {
                expected: basis.dimension(),
                got: amplitudes.len(),
            });
        }
        let norm = amplitudes.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOL {
            return Err(SpinError::NotNormalized { norm });
        }
        Ok(Self::Pure { basis, amplitudes })
    }

    /// Normalises `amplitudes` before wrapping them.
    pub fn pure_normalized(basis: DickeBasis, amplitudes: DVector<C64>) -> Result<Self, SpinError> {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(SpinError::NotNormalized { norm });
        }
        Self::pure(basis, amplitudes / C64::new(norm, 0.0))
    }

    pub fn mixed(basis: DickeBasis, rho: DMatrix<C64>) -> Result<Self, SpinError> {
        let d = basis.dimension();
        if rho.nrows() != d || rho.ncols() != d {
            return Err(SpinError::DimensionMismatch { expected: d, got: rho.nrows() });
        }
        let trace = rho.trace();
        if (trace.re - 1.0).abs() > NORM_TOL || trace.im.abs() > NORM_TOL {
            return Err(SpinError::InvalidDensityMatrix { reason: format!("trace = {trace}") });
        }
        let herm = (&rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > NORM_TOL {
            return Err(SpinError::InvalidDensityMatrix {
                reason: format!("not Hermitian (deviation {herm:e})"),
            });
        }
        let state = Self::Mixed { basis, rho };
        let lowest = state.min_eigenvalue();
        if lowest < -1e-8 {
            return Err(SpinError::InvalidDensityMatrix {
                reason: format!("negative eigenvalue {lowest:e}"),
            });
        }
        Ok(state)
    }

    /// The Dicke state with basis index `k` (`m = k − N/2`).
    pub fn dicke(basis: DickeBasis, k: usize) -> Result<Self, SpinError> {
        let d = basis.dimension();
        if k >= d {
            return Err(SpinError::DimensionMismatch { expected: d, got: k + 1 });
        }
        let mut v = DVector::zeros(d);
        v[k] = C64::new(1.0, 0.0);
        Ok(Self::Pure { basis, amplitudes: v })
    }

    /// All atoms in `|↑⟩`, i.e. `m = +N/2`.
    pub fn all_up(basis: DickeBasis) -> Self {
        Self::dicke(basis, basis.n_atoms()).expect("top index is in range")
    }

    /// Spin-coherent state pointing along polar angle `theta`, azimuth `phi`.
    ///
    /// Product of `cos(θ/2)|↑⟩ + e^{iφ} sin(θ/2)|↓⟩`; amplitudes are built in
    /// log space so large `N` does not overflow the binomials.
    pub fn coherent(basis: DickeBasis, theta: f64, phi: f64) -> Self {
        let n = basis.n_atoms();
        let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        let ln_fact: Vec<f64> = std::iter::once(0.0)
            .chain((1..=n).scan(0.0, |acc, i| {
                *acc += (i as f64).ln();
                Some(*acc)
            }))
            .collect();
        let amplitudes = DVector::from_fn(basis.dimension(), |k, _| {
            let downs = n - k;
            let mag = if (k > 0 && c.abs() == 0.0) || (downs > 0 && s.abs() == 0.0) {
                0.0
            } else {
                let ln_binom = ln_fact[n] - ln_fact[k] - ln_fact[downs];
                let ln_c = if k > 0 { k as f64 * c.abs().ln() } else { 0.0 };
                let ln_s = if downs > 0 { downs as f64 * s.abs().ln() } else { 0.0 };
                let sign = c.signum().powi(k as i32) * s.signum().powi(downs as i32);
                sign * (0.5 * ln_binom + ln_c + ln_s).exp()
            };
            C64::from_polar(mag, downs as f64 * phi)
        });
        let norm = amplitudes.norm();
        Self::Pure { basis, amplitudes: amplitudes / C64::new(norm, 0.0) }
    }

    /// `ρ = 1/(N+1)` on the manifold.
    pub fn maximally_mixed(basis: DickeBasis) -> Self {
        let d = basis.dimension();
        Self::Mixed {
            basis,
            rho: DMatrix::identity(d, d) * C64::new(1.0 / d as f64, 0.0),
        }
    }

    pub fn basis(&self) -> DickeBasis {
        match self {
            Self::Pure { basis, .. } | Self::Mixed { basis, .. } => *basis,
        }
    }

    pub fn is_pure(&self) -> bool {
        matches!(self, Self::Pure { .. })
    }

    pub fn density_matrix(&self) -> DMatrix<C64> {
        match self {
            Self::Pure { amplitudes, .. } => amplitudes * amplitudes.adjoint(),
            Self::Mixed { rho, .. } => rho.clone(),
        }
    }

    pub fn to_mixed(&self) -> Self {
        Self::Mixed { basis: self.basis(), rho: self.density_matrix() }
    }

    /// `‖ψ‖` for pure states, `Tr ρ` for mixed ones.
    pub fn norm_or_trace(&self) -> f64 {
        match self {
            Self::Pure { amplitudes, .. } => amplitudes.norm(),
            Self::Mixed { rho, .. } => rho.trace().re,
        }
    }

    /// Occupation of each `m`, ascending.
    pub fn populations(&self) -> Vec<f64> {
        match self {
            Self::Pure { amplitudes, .. } => amplitudes.iter().map(|a| a.norm_sqr()).collect(),
            Self::Mixed { rho, .. } => (0..rho.nrows()).map(|k| rho[(k, k)].re).collect(),
        }
    }

    /// Smallest eigenvalue of the density matrix (`0` for a pure state).
    pub fn min_eigenvalue(&self) -> f64 {
        match self {
            Self::Pure { .. } => 0.0,
            Self::Mixed { rho, .. } => {
                let herm = (rho + rho.adjoint()) * C64::new(0.5, 0.0);
                herm.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// `|⟨a|b⟩|²` for pure states, `Tr(ρ_a ρ_b)` otherwise.
    pub fn overlap(&self, other: &Self) -> f64 {
        match (self, other) {
            (Self::Pure { amplitudes: a, .. }, Self::Pure { amplitudes: b, .. }) => {
                a.dotc(b).norm_sqr()
            }
            _ => (self.density_matrix() * other.density_matrix()).trace().re,
        }
    }
}
