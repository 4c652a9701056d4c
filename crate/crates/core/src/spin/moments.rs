use nalgebra::{DVector, Matrix2, Matrix3, Vector3};

use super::{build_collective_ops, DickeState, SpinError, C64};

/// First and symmetrised second moments of `Ĵ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinMoments {
    pub mean: Vector3<f64>,
    /// `½⟨{Ĵi, Ĵj}⟩ − ⟨Ĵi⟩⟨Ĵj⟩`
    pub covariance: Matrix3<f64>,
}

impl SpinMoments {
    pub fn variance_along(&self, n: &Vector3<f64>) -> f64 {
        (n.transpose() * self.covariance * n)[(0, 0)]
    }
}

pub fn spin_moments(state: &DickeState) -> SpinMoments {
    let ops = build_collective_ops(state.basis());
    let comps = ops.components();
    let mut mean = Vector3::zeros();
    let mut second = Matrix3::zeros();
    match state {
        DickeState::Pure { amplitudes, .. } => {
            let applied: Vec<DVector<C64>> = comps.iter().map(|op| op.apply(amplitudes)).collect();
            for i in 0..3 {
                mean[i] = amplitudes.dotc(&applied[i]).re;
                for j in i..3 {
                    // ⟨ψ|Ji Jj|ψ⟩ = (Ji ψ)†(Jj ψ); its real part is the symmetrised product.
                    let v = applied[i].dotc(&applied[j]).re;
                    second[(i, j)] = v;
                    second[(j, i)] = v;
                }
            }
        }
        DickeState::Mixed { rho, .. } => {
            let applied: Vec<_> = comps.iter().map(|op| rho * op.matrix()).collect();
            for i in 0..3 {
                mean[i] = applied[i].trace().re;
                for j in i..3 {
                    let v = (&applied[i] * comps[j].matrix()).trace().re;
                    second[(i, j)] = v;
                    second[(j, i)] = v;
                }
            }
        }
    }
    let covariance = second - mean * mean.transpose();
    SpinMoments { mean, covariance }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezingReport {
    /// `4 Var_min / N`
    pub xi2_kitagawa: f64,
    /// `N Var_min / |⟨Ĵ⟩|²`
    pub xi2_wineland: f64,
    pub min_variance: f64,
    /// Direction perpendicular to the mean spin that attains `min_variance`.
    pub squeezed_axis: Vector3<f64>,
    pub mean_spin: Vector3<f64>,
}

/// Two orthonormal vectors spanning the plane perpendicular to unit `n`.
pub fn perpendicular_basis(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if n.z.abs() < 0.9 { Vector3::z() } else { Vector3::x() };
    let e1 = (helper - n * n.dot(&helper)).normalize();
    let e2 = n.cross(&e1);
    (e1, e2)
}

/// Kitagawa–Ueda and Wineland squeezing, minimised over directions
/// perpendicular to the mean spin.
pub fn squeezing_parameter(state: &DickeState) -> Result<SqueezingReport, SpinError> {
    let n_atoms = state.basis().n_atoms() as f64;
    let m = spin_moments(state);
    let length = m.mean.norm();
    if length < 1e-12 * n_atoms {
        return Err(SpinError::ZeroMeanSpin);
    }
    let n = m.mean / length;
    let (e1, e2) = perpendicular_basis(&n);
    let block = Matrix2::new(
        m.variance_along(&e1),
        (e1.transpose() * m.covariance * e2)[(0, 0)],
        (e2.transpose() * m.covariance * e1)[(0, 0)],
        m.variance_along(&e2),
    );
    let sym = (block + block.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let k = if eig.eigenvalues[0] <= eig.eigenvalues[1] { 0 } else { 1 };
    let min_variance = eig.eigenvalues[k];
    let v = eig.eigenvectors.column(k);
    let squeezed_axis = (e1 * v[0] + e2 * v[1]).normalize();
    Ok(SqueezingReport {
        xi2_kitagawa: 4.0 * min_variance / n_atoms,
        xi2_wineland: n_atoms * min_variance / (length * length),
        min_variance,
        squeezed_axis,
        mean_spin: m.mean,
    })
}
