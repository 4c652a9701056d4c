use nalgebra::{Matrix2, Vector2, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{jacobian, torque, BlochState, EomSpec, MeanFieldError};

type V3 = Vector3<f64>;

const FIXED_POINT_TOL: f64 = 1e-8;
const CLASSIFY_TOL: f64 = 1e-9;
const POLISH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    /// Purely imaginary conjugate pair.
    StableCenter,
    /// Real pair of opposite sign.
    Saddle,
    /// Both real parts negative (only with Γ ≠ 0).
    Sink,
    /// Both real parts positive (only with Γ ≠ 0).
    Source,
    /// Eigenvalues vanish within tolerance; typically a line of fixed points.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport {
    pub location: BlochState,
    pub classification: Classification,
    pub eigenvalues: [Complex64; 2],
    pub note: Option<String>,
}

/// Orthonormal tangent basis at unit `n` with `e1 × e2 = n`; `e1` points toward `+ẑ`
/// when defined, otherwise along `x̂`.
pub fn tangent_basis(n: &V3) -> (V3, V3) {
    let z = Vector3::z();
    let proj = z - n * n.dot(&z);
    let e1 = if proj.norm() > 1e-8 { proj.normalize() } else { (Vector3::x() - n * n.x).normalize() };
    let e2 = n.cross(&e1);
    (e1, e2)
}

fn tangent_jacobian(spec: &EomSpec, j: &V3) -> Result<Matrix2<f64>, MeanFieldError> {
    let n = j.normalize();
    let (e1, e2) = tangent_basis(&n);
    let m = jacobian(spec, j)?;
    let a = |u: &V3, v: &V3| u.dot(&(m * v));
    Ok(Matrix2::new(a(&e1, &e1), a(&e1, &e2), a(&e2, &e1), a(&e2, &e2)))
}

fn eigen2(a: &Matrix2<f64>) -> [Complex64; 2] {
    let half_tr = 0.5 * a.trace();
    let disc = Complex64::new(half_tr * half_tr - a.determinant(), 0.0).sqrt();
    let mean = Complex64::new(half_tr, 0.0);
    let (p, m) = (mean + disc, mean - disc);
    // real parts descending, then imaginary parts descending
    if p.re > m.re || (p.re == m.re && p.im >= m.im) {
        [p, m]
    } else {
        [m, p]
    }
}

/// Tangent-plane eigenvalues of the linearised flow at a fixed point, in rad/s at
/// the point's spin length.
pub fn jacobian_eigenvalues(spec: &EomSpec, point: &BlochState) -> Result<[Complex64; 2], MeanFieldError> {
    let j = point.vector();
    let residual = torque(spec, &j)?.norm();
    if residual > FIXED_POINT_TOL * spec.torque_scale(point.magnitude()) {
        return Err(MeanFieldError::NotFixedPoint { residual });
    }
    Ok(eigen2(&tangent_jacobian(spec, &j)?))
}

/// `λ²` at `±axis` (0 = x, 1 = y, 2 = z) for the undriven, non-dissipative XYZ model.
pub fn axis_eigenvalue_squared(chi: [f64; 3], axis: usize, j: f64) -> f64 {
    let [cx, cy, cz] = chi;
    let product = match axis {
        0 => (cz - cx) * (cx - cy),
        1 => (cy - cz) * (cx - cy),
        _ => (cy - cz) * (cz - cx),
    };
    4.0 * j * j * product
}

fn classify(eig: &[Complex64; 2], scale: f64) -> Classification {
    let tol = CLASSIFY_TOL * scale.max(f64::MIN_POSITIVE);
    let [a, b] = *eig;
    let tiny = |z: Complex64| z.norm() <= tol;
    if tiny(a) && tiny(b) {
        return Classification::Degenerate;
    }
    let real_pair = a.im.abs() <= tol && b.im.abs() <= tol;
    if real_pair && a.re > tol && b.re < -tol {
        return Classification::Saddle;
    }
    if a.re.abs() <= tol && b.re.abs() <= tol {
        return Classification::StableCenter;
    }
    if a.re < -tol && b.re < -tol {
        return Classification::Sink;
    }
    if a.re > tol && b.re > tol {
        return Classification::Source;
    }
    Classification::Degenerate
}

fn eigen_scale(spec: &EomSpec, j: f64) -> f64 {
    2.0 * j * spec.interaction_scale() + spec.drive.map(|d| d.vector().norm()).unwrap_or(0.0)
}

fn report(spec: &EomSpec, location: BlochState, note: Option<String>) -> Result<FixedPointReport, MeanFieldError> {
    let eigenvalues = eigen2(&tangent_jacobian(spec, &location.vector())?);
    let classification = classify(&eigenvalues, eigen_scale(spec, location.magnitude()));
    let note = note.or_else(|| {
        (classification == Classification::Degenerate)
            .then(|| "two couplings coincide: fixed points form a great circle through this point".to_string())
    });
    Ok(FixedPointReport { location, classification, eigenvalues, note })
}

const AXES: [(usize, f64); 6] = [(0, 1.0), (0, -1.0), (1, 1.0), (1, -1.0), (2, 1.0), (2, -1.0)];

fn axis_vector(axis: usize, sign: f64) -> V3 {
    let mut v = V3::zeros();
    v[axis] = sign;
    v
}

/// Fixed points of a resonant spec at spin length `j`.
///
/// Without drive and Γ the six axis points are returned with closed-form
/// eigenvalues. Otherwise roots of `T = 0` are located by damped Newton
/// iteration from axis, LMG and Fibonacci-lattice seeds and polished to
/// `‖T‖ < 10⁻¹²·scale`.
pub fn fixed_points(spec: &EomSpec, j: f64) -> Result<Vec<FixedPointReport>, MeanFieldError> {
    let xyz = spec.xyz().ok_or(MeanFieldError::TimeDependentSpec)?;
    if !(j > 0.0 && j.is_finite()) {
        return Err(MeanFieldError::InvalidState { reason: format!("spin length {j}") });
    }
    if spec.drive.is_none() && spec.gamma_sr == 0.0 {
        let chi = xyz.as_array();
        let scale = eigen_scale(spec, j);
        return AXES
            .iter()
            .map(|&(axis, sign)| {
                let location = BlochState::new(axis_vector(axis, sign), j)?;
                let l2 = axis_eigenvalue_squared(chi, axis, j);
                let root = l2.abs().sqrt();
                let eigenvalues = if l2 >= 0.0 {
                    [Complex64::new(root, 0.0), Complex64::new(-root, 0.0)]
                } else {
                    [Complex64::new(0.0, root), Complex64::new(0.0, -root)]
                };
                let classification = classify(&eigenvalues, scale);
                let note = (classification == Classification::Degenerate)
                    .then(|| "two couplings coincide: fixed points form a great circle through this point".to_string());
                Ok(FixedPointReport { location, classification, eigenvalues, note })
            })
            .collect();
    }
    numerical_fixed_points(spec, j)
}

fn seeds(spec: &EomSpec, j: f64) -> Vec<V3> {
    let mut out: Vec<V3> = AXES.iter().map(|&(a, s)| axis_vector(a, s)).collect();
    if let (Some(d), Some(x)) = (spec.drive, spec.xyz()) {
        // χ Ĵa² + δ Ĵb: off-axis candidates with n_b = δ/(2χJ)
        let dv = d.vector();
        let chi = x.as_array();
        for a in 0..3 {
            let diff = chi[a] - chi[(a + 1) % 3].min(chi[(a + 2) % 3]);
            if diff == 0.0 {
                continue;
            }
            for b in 0..3 {
                if b == a || dv[b] == 0.0 {
                    continue;
                }
                let nb = dv[b] / (2.0 * diff * j);
                if nb.abs() < 1.0 {
                    for s in [1.0, -1.0] {
                        let mut v = V3::zeros();
                        v[b] = nb;
                        v[a] = s * (1.0 - nb * nb).sqrt();
                        out.push(v);
                    }
                }
            }
        }
    }
    // Fibonacci lattice
    let count = 240;
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    for i in 0..count {
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
        let r = (1.0 - z * z).sqrt();
        let a = golden * i as f64;
        out.push(V3::new(r * a.cos(), r * a.sin(), z));
    }
    out
}

fn newton(spec: &EomSpec, j: f64, seed: V3) -> Option<V3> {
    let scale = spec.torque_scale(j);
    let mut n = seed.normalize();
    let residual = |n: &V3| spec.torque_at(0.0, &(n * j)).norm();
    let mut r = residual(&n);
    for _ in 0..100 {
        if r < POLISH_TOL * scale {
            return Some(n);
        }
        let jv = n * j;
        let (e1, e2) = tangent_basis(&n);
        let t = spec.torque_at(0.0, &jv);
        let m = jacobian(spec, &jv).ok()?;
        // T(n + a e1 + b e2) ≈ T + j M (a e1 + b e2); solve in the tangent plane
        let a = Matrix2::new(
            e1.dot(&(m * e1)) * j,
            e1.dot(&(m * e2)) * j,
            e2.dot(&(m * e1)) * j,
            e2.dot(&(m * e2)) * j,
        );
        let rhs = -Vector2::new(e1.dot(&t), e2.dot(&t));
        let step = a.lu().solve(&rhs)?;
        let mut damping = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial = (n + (e1 * step.x + e2 * step.y) * damping).normalize();
            let rt = residual(&trial);
            if rt < r {
                n = trial;
                r = rt;
                accepted = true;
                break;
            }
            damping *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (r < POLISH_TOL * scale).then_some(n)
}

fn numerical_fixed_points(spec: &EomSpec, j: f64) -> Result<Vec<FixedPointReport>, MeanFieldError> {
    let mut found: Vec<V3> = Vec::new();
    for seed in seeds(spec, j) {
        if let Some(n) = newton(spec, j, seed) {
            if !found.iter().any(|f| (f - n).norm() < 1e-6) {
                found.push(n);
            }
        }
    }
    found.sort_by(|a, b| {
        b.z.partial_cmp(&a.z)
            .unwrap()
            .then(b.y.partial_cmp(&a.y).unwrap())
            .then(b.x.partial_cmp(&a.x).unwrap())
    });
    found.into_iter().map(|n| report(spec, BlochState::new(n, j)?, None)).collect()
}

/// Normalisation of the Holstein–Primakoff quadratures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HpNormalization {
    /// `Ĵ₊′ ≈ √(2J) ĉ`, so that `[ĉ, ĉ†] = 1` is preserved.
    #[default]
    Canonical,
    /// Transverse components `√J (ĉ + ĉ†)` and `−i√J (ĉ − ĉ†)`.
    Quadrature,
}

/// `H ≈ c_da ĉ†ĉ + c_dd (ĉ†)² + c_aa ĉ²` about a saddle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HpCoefficients {
    pub c_dd: Complex64,
    pub c_aa: Complex64,
    pub c_da: f64,
    pub normalization: HpNormalization,
}

impl HpCoefficients {
    /// Bogoliubov growth rate `√(4|c_dd|² − c_da²)` (canonical normalisation).
    pub fn growth_rate(&self) -> f64 {
        (4.0 * self.c_dd.norm_sqr() - self.c_da * self.c_da).max(0.0).sqrt()
    }
}

/// Quadratic bosonic expansion about a saddle point.
///
/// With `n` the point direction and `e1 × e2 = n`,
/// `Ĵk ≈ nk (J − ĉ†ĉ) + s(β̄k ĉ + βk ĉ†)` where `β = e1 + i e2`.
pub fn hp_linearize(
    spec: &EomSpec,
    point: &BlochState,
    normalization: HpNormalization,
) -> Result<HpCoefficients, MeanFieldError> {
    let xyz = spec.xyz().ok_or(MeanFieldError::TimeDependentSpec)?;
    let eig = jacobian_eigenvalues(spec, point)?;
    let classification = classify(&eig, eigen_scale(spec, point.magnitude()));
    if classification != Classification::Saddle {
        return Err(MeanFieldError::NotSaddle { classification });
    }
    let j = point.magnitude();
    let n = point.direction();
    let (e1, e2) = tangent_basis(&n);
    let s2 = match normalization {
        HpNormalization::Canonical => j / 2.0,
        HpNormalization::Quadrature => j,
    };
    let chi = xyz.as_array();
    let mut c_dd = Complex64::new(0.0, 0.0);
    let mut c_da = 0.0;
    for k in 0..3 {
        let beta = Complex64::new(e1[k], e2[k]);
        c_dd += beta * beta * (chi[k] * s2);
        c_da += chi[k] * (2.0 * s2 * beta.norm_sqr() - 2.0 * j * n[k] * n[k]);
    }
    if let Some(d) = spec.drive {
        c_da -= d.vector().dot(&n);
    }
    Ok(HpCoefficients { c_dd, c_aa: c_dd.conj(), c_da, normalization })
}
