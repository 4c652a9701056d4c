use log::warn;
use nalgebra::{DMatrix, DVector};

use super::{CollectiveOperator, DickeState, SpinError, C64};

const HERMITIAN_TOL: f64 = 1e-10;

/// Cached eigendecomposition `H = V diag(E) V†` for repeated propagation.
#[derive(Debug, Clone)]
pub struct UnitaryPropagator {
    basis: super::DickeBasis,
    energies: DVector<f64>,
    vectors: DMatrix<C64>,
}

impl UnitaryPropagator {
    pub fn new(h: &CollectiveOperator) -> Result<Self, SpinError> {
        let deviation = h.hermiticity_error();
        if deviation > HERMITIAN_TOL * (1.0 + h.max_abs()) {
            return Err(SpinError::NotHermitian { deviation });
        }
        if h.matrix().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(SpinError::NonFinite { what: "Hamiltonian" });
        }
        let sym = (h.matrix() + h.matrix().adjoint()) * C64::new(0.5, 0.0);
        let eig = sym.symmetric_eigen();
        Ok(Self { basis: h.basis(), energies: eig.eigenvalues, vectors: eig.eigenvectors })
    }

    pub fn energies(&self) -> &DVector<f64> {
        &self.energies
    }

    /// `exp(−iHt) ψ`.
    pub fn evolve(&self, psi0: &DickeState, t: f64) -> Result<DickeState, SpinError> {
        let amplitudes = match psi0 {
            DickeState::Pure { basis, amplitudes } => {
                if *basis != self.basis {
                    return Err(SpinError::BasisMismatch {
                        operator: self.basis.n_atoms(),
                        state: basis.n_atoms(),
                    });
                }
                amplitudes
            }
            DickeState::Mixed { .. } => return Err(SpinError::MixedStateInput),
        };
        if t == 0.0 {
            return Ok(psi0.clone());
        }
        let mut coeffs = self.vectors.adjoint() * amplitudes;
        for (c, e) in coeffs.iter_mut().zip(self.energies.iter()) {
            *c *= C64::from_polar(1.0, -e * t);
        }
        Ok(DickeState::Pure { basis: self.basis, amplitudes: &self.vectors * coeffs })
    }

    /// `exp(−iHt)` as a dense matrix.
    pub fn unitary(&self, t: f64) -> DMatrix<C64> {
        let mut scaled = self.vectors.clone();
        for (mut col, e) in scaled.column_iter_mut().zip(self.energies.iter()) {
            col *= C64::from_polar(1.0, -e * t);
        }
        scaled * self.vectors.adjoint()
    }
}

/// `ψ(t) = exp(−iHt) ψ0` by dense eigendecomposition.
pub fn evolve_unitary(h: &CollectiveOperator, psi0: &DickeState, t: f64) -> Result<DickeState, SpinError> {
    if !psi0.is_pure() {
        return Err(SpinError::MixedStateInput);
    }
    UnitaryPropagator::new(h)?.evolve(psi0, t)
}

#[derive(Debug, Clone, Copy)]
pub struct LindbladOptions {
    /// Upper bound on the RK4 step.
    pub dt_max: f64,
    /// Max-entry discrepancy between one full and two half steps.
    pub tol: f64,
    /// Eigenvalues of ρ below `−positivity_tol` trigger a warning.
    pub positivity_tol: f64,
}

impl Default for LindbladOptions {
    fn default() -> Self {
        Self { dt_max: f64::INFINITY, tol: 1e-11, positivity_tol: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct LindbladOutcome {
    pub state: DickeState,
    pub steps: usize,
    /// Smallest eigenvalue of the final ρ.
    pub min_eigenvalue: f64,
}

struct MasterEquation {
    /// `H − (i/2) Σ γ L†L`
    h_eff: DMatrix<C64>,
    jumps: Vec<(f64, DMatrix<C64>, DMatrix<C64>)>,
}

impl MasterEquation {
    fn rhs(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let minus_i = C64::new(0.0, -1.0);
        let a = &self.h_eff * rho;
        // −i(H_eff ρ − ρ H_eff†) = −i A + (−i A)†
        let mut out = &a * minus_i;
        out += (&a * minus_i).adjoint();
        for (rate, l, l_dag) in &self.jumps {
            out += (l * rho * l_dag) * C64::new(*rate, 0.0);
        }
        out
    }

    fn rk4(&self, rho: &DMatrix<C64>, h: f64) -> DMatrix<C64> {
        let half = C64::new(h / 2.0, 0.0);
        let full = C64::new(h, 0.0);
        let k1 = self.rhs(rho);
        let k2 = self.rhs(&(rho + &k1 * half));
        let k3 = self.rhs(&(rho + &k2 * half));
        let k4 = self.rhs(&(rho + &k3 * full));
        let sixth = C64::new(h / 6.0, 0.0);
        rho + (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * sixth
    }
}

/// Integrate `dρ/dt = −i[H,ρ] + Σ γ (LρL† − ½{L†L, ρ})` for time `t`.
///
/// Fixed-order RK4 with step halving: each step is compared against two half
/// steps and shrunk until the max-entry discrepancy is below `opts.tol`.
pub fn evolve_lindblad(
    h: &CollectiveOperator,
    jumps: &[(f64, CollectiveOperator)],
    rho0: &DickeState,
    t: f64,
    opts: LindbladOptions,
) -> Result<LindbladOutcome, SpinError> {
    let basis = h.basis();
    if rho0.basis() != basis {
        return Err(SpinError::BasisMismatch { operator: basis.n_atoms(), state: rho0.basis().n_atoms() });
    }
    for (index, (rate, op)) in jumps.iter().enumerate() {
        if *rate < 0.0 || !rate.is_finite() {
            return Err(SpinError::NegativeRate { index, rate: *rate });
        }
        if op.basis() != basis {
            return Err(SpinError::BasisMismatch { operator: op.basis().n_atoms(), state: basis.n_atoms() });
        }
    }
    let deviation = h.hermiticity_error();
    if deviation > HERMITIAN_TOL * (1.0 + h.max_abs()) {
        return Err(SpinError::NotHermitian { deviation });
    }

    let mut h_eff = h.matrix().clone();
    let mut eq_jumps = Vec::with_capacity(jumps.len());
    for (rate, op) in jumps.iter().filter(|(r, _)| *r > 0.0) {
        let l = op.matrix().clone();
        let l_dag = l.adjoint();
        h_eff -= (&l_dag * &l) * C64::new(0.0, 0.5 * rate);
        eq_jumps.push((*rate, l, l_dag));
    }
    let eq = MasterEquation { h_eff, jumps: eq_jumps };

    let mut rho = rho0.density_matrix();
    let mut elapsed = 0.0;
    let mut steps = 0usize;
    // Crude spectral bound to start near the RK4 stability edge.
    let scale = h.max_abs() * basis.dimension() as f64
        + jumps.iter().map(|(r, op)| r * op.max_abs().powi(2)).sum::<f64>() * basis.dimension() as f64;
    let mut dt = if scale > 0.0 { (0.5 / scale).min(opts.dt_max) } else { opts.dt_max };
    dt = dt.min(t.max(0.0));
    while elapsed < t {
        let step = dt.min(t - elapsed);
        if step <= t * 1e-14 {
            break;
        }
        let full = eq.rk4(&rho, step);
        let half = eq.rk4(&rho, step / 2.0);
        let two_half = eq.rk4(&half, step / 2.0);
        let err = (&full - &two_half).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if !err.is_finite() || err > opts.tol {
            dt = step / 2.0;
            if dt < t * 1e-12 {
                return Err(SpinError::StepUnderflow { t: elapsed });
            }
            continue;
        }
        rho = two_half;
        elapsed += step;
        steps += 1;
        if err < opts.tol / 64.0 {
            dt = (step * 2.0).min(opts.dt_max);
        }
    }
    // Keep ρ exactly Hermitian; the trace is left untouched so drift stays observable.
    let rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
    let state = DickeState::Mixed { basis, rho };
    let min_eigenvalue = state.min_eigenvalue();
    if min_eigenvalue < -opts.positivity_tol {
        warn!("Lindblad evolution lost positivity: min eigenvalue {min_eigenvalue:e}");
    }
    Ok(LindbladOutcome { state, steps, min_eigenvalue })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::couplings::XYZCouplings;
    use crate::spin::{build_collective_ops, build_xyz_hamiltonian, spin_moments, DickeBasis};

    #[test]
    fn zero_time_is_identity() {
        let b = DickeBasis::new(8).unwrap();
        let h = build_xyz_hamiltonian(&XYZCouplings::new(1.0, 0.4, -0.2), b, None).unwrap();
        let psi = DickeState::coherent(b, 0.4, 1.0);
        assert_eq!(evolve_unitary(&h, &psi, 0.0).unwrap(), psi);
    }

    #[test]
    fn mixed_input_rejected() {
        let b = DickeBasis::new(3).unwrap();
        let h = CollectiveOperator::zeros(b);
        let rho = DickeState::maximally_mixed(b);
        assert_eq!(evolve_unitary(&h, &rho, 1.0), Err(SpinError::MixedStateInput));
    }

    #[test]
    fn rigid_rotation_about_z() {
        let b = DickeBasis::new(15).unwrap();
        let omega = 0.8;
        let h = build_collective_ops(b).jz.scale(omega);
        let (theta, phi, t) = (0.9, 0.3, 1.7);
        let out = evolve_unitary(&h, &DickeState::coherent(b, theta, phi), t).unwrap();
        let target = DickeState::coherent(b, theta, phi + omega * t);
        assert!((out.overlap(&target) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn negative_rate_rejected() {
        let b = DickeBasis::new(3).unwrap();
        let ops = build_collective_ops(b);
        let err = evolve_lindblad(
            &CollectiveOperator::zeros(b),
            &[(0.1, ops.jz.clone()), (-1.0, ops.jminus)],
            &DickeState::all_up(b),
            0.1,
            LindbladOptions::default(),
        );
        assert!(matches!(err, Err(SpinError::NegativeRate { index: 1, .. })));
    }

    #[test]
    fn dephasing_keeps_jz_kills_jx() {
        let b = DickeBasis::new(10).unwrap();
        let ops = build_collective_ops(b);
        let rho0 = DickeState::coherent(b, 1.0, 0.0);
        let before = spin_moments(&rho0);
        let out = evolve_lindblad(
            &CollectiveOperator::zeros(b),
            &[(0.2, ops.jz.clone())],
            &rho0,
            2.0,
            LindbladOptions::default(),
        )
        .unwrap();
        let after = spin_moments(&out.state);
        assert!((after.mean.z - before.mean.z).abs() < 1e-9);
        assert!(after.mean.x < 0.9 * before.mean.x);
        assert!((out.state.norm_or_trace() - 1.0).abs() < 1e-10);
    }
}
