//! Mean-field Bloch-vector dynamics `dJ/dt = B(J) × J` plus superradiant drift.
//!
//! For the resonant XYZ model `B = ∇E` with `E = χx Jx² + χy Jy² + χz Jz² + d·J`,
//! which gives
//!
//! ```text
//! dJx/dt = 2(χy−χz) Jy Jz − Γ Jx Jz + (dy Jz − dz Jy)
//! dJy/dt = 2(χz−χx) Jx Jz − Γ Jy Jz + (dz Jx − dx Jz)
//! dJz/dt = 2(χx−χy) Jx Jy + Γ (Jx² + Jy²) + (dx Jy − dy Jx)
//! ```
//!
//! The superradiant part is tangent to the sphere, so `‖J‖` is conserved for any Γ.

mod fixed;
mod flow;
mod integrate;

pub use fixed::{
    axis_eigenvalue_squared, fixed_points, hp_linearize, jacobian_eigenvalues, Classification,
    FixedPointReport, HpCoefficients, HpNormalization,
};
pub use flow::{flow_map, saddle_slopes, superradiance_subtract, FlowGrid, FlowSample, Projection, SaddleSlopes};
pub use integrate::{integrate, integrate_time_dependent, Dopri5, Trajectory};
pub use fixed::tangent_basis;
pub(crate) use flow::check_short_time;
pub(crate) use integrate::integrate_any;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::couplings::{CouplingSet, XYZCouplings};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeanFieldError {
    #[error("time-dependent spec: use integrate_time_dependent")]
    TimeDependentSpec,
    #[error("spec is resonant; integrate_time_dependent needs (δ, φ_int)")]
    NotTimeDependent,
    #[error("tolerance {tol:e} outside [1e-13, 1e-6]")]
    ToleranceOutOfRange { tol: f64 },
    #[error("step size underflow at t = {t:e}; last good state {last:?}")]
    StepUnderflow { t: f64, last: [f64; 3] },
    #[error("point is not a fixed point: |T| = {residual:e}")]
    NotFixedPoint { residual: f64 },
    #[error("point is not a saddle ({classification:?})")]
    NotSaddle { classification: Classification },
    #[error("invalid Bloch state: {reason}")]
    InvalidState { reason: String },
    #[error("{what} is not finite")]
    NonFinite { what: &'static str },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
}

/// Collective spin direction and length `J = N/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochState {
    direction: Vector3<f64>,
    magnitude: f64,
}

impl BlochState {
    pub fn new(direction: Vector3<f64>, magnitude: f64) -> Result<Self, MeanFieldError> {
        let norm = direction.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(MeanFieldError::InvalidState { reason: format!("direction norm {norm}") });
        }
        if !(magnitude > 0.0 && magnitude.is_finite()) {
            return Err(MeanFieldError::InvalidState { reason: format!("magnitude {magnitude}") });
        }
        Ok(Self { direction: direction / norm, magnitude })
    }

    pub fn from_vector(j: &Vector3<f64>) -> Result<Self, MeanFieldError> {
        Self::new(*j, j.norm())
    }

    pub fn from_angles(theta: f64, phi: f64, magnitude: f64) -> Result<Self, MeanFieldError> {
        Self::new(unit_from_angles(theta, phi), magnitude)
    }

    /// Spin length for `n_atoms` two-level atoms.
    pub fn for_atoms(theta: f64, phi: f64, n_atoms: usize) -> Result<Self, MeanFieldError> {
        Self::from_angles(theta, phi, n_atoms as f64 / 2.0)
    }

    pub fn direction(&self) -> Vector3<f64> {
        self.direction
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    pub fn vector(&self) -> Vector3<f64> {
        self.direction * self.magnitude
    }

    pub fn theta(&self) -> f64 {
        polar_angle(&self.direction)
    }

    pub fn phi(&self) -> f64 {
        self.direction.y.atan2(self.direction.x)
    }
}

pub fn unit_from_angles(theta: f64, phi: f64) -> Vector3<f64> {
    Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
}

pub fn polar_angle(v: &Vector3<f64>) -> f64 {
    v.x.hypot(v.y).atan2(v.z)
}

pub fn azimuth(v: &Vector3<f64>) -> f64 {
    v.y.atan2(v.x)
}

/// Wraps an angle difference into `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Linear term `rate · axis·J` in the energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drive {
    pub axis: Vector3<f64>,
    pub rate: f64,
}

impl Drive {
    pub fn vector(&self) -> Vector3<f64> {
        self.axis * self.rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Interaction {
    Resonant(XYZCouplings),
    /// `χe(Jx²+Jy²) + χ_pair[(n·J)² − (n⊥·J)²]` with `n` at azimuth `−(φ_int + δt)/2`.
    TimeDependent { chi_e: f64, chi_pair: f64, delta: f64, phi_int: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EomSpec {
    pub interaction: Interaction,
    pub gamma_sr: f64,
    pub drive: Option<Drive>,
}

impl EomSpec {
    pub fn resonant(xyz: XYZCouplings) -> Self {
        Self { interaction: Interaction::Resonant(xyz), gamma_sr: 0.0, drive: None }
    }

    pub fn time_dependent(chi_e: f64, chi_pair: f64, delta: f64, phi_int: f64) -> Self {
        Self {
            interaction: Interaction::TimeDependent { chi_e, chi_pair, delta, phi_int },
            gamma_sr: 0.0,
            drive: None,
        }
    }

    /// `χ Ĵz² + δ Ĵy`.
    pub fn lmg(chi: f64, delta: f64) -> Self {
        Self::resonant(XYZCouplings::oat_z(chi)).with_drive(Vector3::y(), delta)
    }

    /// Resonant spec when `δ = 0` and the pair phase vanishes, time-dependent otherwise.
    pub fn from_couplings(c: &CouplingSet) -> Self {
        let spec = match crate::couplings::xyz_from_couplings(c, 0.0) {
            Ok(xyz) => Self::resonant(xyz),
            Err(_) => Self::time_dependent(c.chi_e, c.pair_magnitude(), c.delta, c.phi_int),
        };
        spec.with_gamma(c.gamma_sr)
    }

    pub fn with_gamma(mut self, gamma_sr: f64) -> Self {
        self.gamma_sr = gamma_sr;
        self
    }

    pub fn with_drive(mut self, axis: Vector3<f64>, rate: f64) -> Self {
        self.drive = Some(Drive { axis, rate });
        self
    }

    pub fn is_resonant(&self) -> bool {
        matches!(self.interaction, Interaction::Resonant(_))
    }

    pub fn xyz(&self) -> Option<XYZCouplings> {
        match self.interaction {
            Interaction::Resonant(x) => Some(x),
            Interaction::TimeDependent { .. } => None,
        }
    }

    fn drive_vector(&self) -> Vector3<f64> {
        self.drive.map(|d| d.vector()).unwrap_or_else(Vector3::zeros)
    }

    /// XYZ-equivalent couplings in the frame co-rotating with the twisting axis.
    fn interaction_scale_couplings(&self) -> XYZCouplings {
        match self.interaction {
            Interaction::Resonant(x) => x,
            Interaction::TimeDependent { chi_e, chi_pair, .. } => {
                XYZCouplings::new(chi_e + chi_pair, chi_e - chi_pair, 0.0)
            }
        }
    }

    /// Largest pairwise coupling difference, or `|Γ|` if larger. `χ` in `χNΔt`.
    pub fn interaction_scale(&self) -> f64 {
        self.interaction_scale_couplings().scale().max(self.gamma_sr.abs())
    }

    /// Typical torque magnitude at spin length `j`.
    pub fn torque_scale(&self, j: f64) -> f64 {
        let x = self.interaction_scale_couplings();
        let chi = x.as_array().iter().fold(0.0f64, |m, c| m.max(c.abs()));
        ((chi + self.gamma_sr.abs()) * j * j + self.drive_vector().norm() * j).max(f64::MIN_POSITIVE)
    }

    /// Energy `χx Jx² + χy Jy² + χz Jz² + d·J`; conserved for Γ = 0.
    pub fn energy(&self, j: &Vector3<f64>) -> Result<f64, MeanFieldError> {
        let x = self.xyz().ok_or(MeanFieldError::TimeDependentSpec)?;
        Ok(x.chi_x * j.x * j.x + x.chi_y * j.y * j.y + x.chi_z * j.z * j.z + self.drive_vector().dot(j))
    }

    /// `B(t, J) × J` plus superradiance, valid for either interaction kind.
    pub fn torque_at(&self, t: f64, j: &Vector3<f64>) -> Vector3<f64> {
        let b = match self.interaction {
            Interaction::Resonant(x) => {
                Vector3::new(2.0 * x.chi_x * j.x, 2.0 * x.chi_y * j.y, 2.0 * x.chi_z * j.z)
            }
            Interaction::TimeDependent { chi_e, chi_pair, delta, phi_int } => {
                let a = -(phi_int + delta * t) / 2.0;
                let n = Vector3::new(a.cos(), a.sin(), 0.0);
                let perp = Vector3::new(-a.sin(), a.cos(), 0.0);
                let exchange = Vector3::new(2.0 * chi_e * j.x, 2.0 * chi_e * j.y, 0.0);
                exchange + n * (2.0 * chi_pair * n.dot(j)) - perp * (2.0 * chi_pair * perp.dot(j))
            }
        } + self.drive_vector();
        let g = self.gamma_sr;
        b.cross(j) + Vector3::new(-g * j.x * j.z, -g * j.y * j.z, g * (j.x * j.x + j.y * j.y))
    }
}

/// Resonant torque `dJ/dt`.
pub fn torque(spec: &EomSpec, j: &Vector3<f64>) -> Result<Vector3<f64>, MeanFieldError> {
    if !spec.is_resonant() {
        return Err(MeanFieldError::TimeDependentSpec);
    }
    Ok(spec.torque_at(0.0, j))
}

/// Analytic `∂T/∂J` for a resonant spec.
pub fn jacobian(spec: &EomSpec, j: &Vector3<f64>) -> Result<Matrix3<f64>, MeanFieldError> {
    let x = spec.xyz().ok_or(MeanFieldError::TimeDependentSpec)?;
    let (cx, cy, cz) = (x.chi_x, x.chi_y, x.chi_z);
    let g = spec.gamma_sr;
    let d = spec.drive_vector();
    let (jx, jy, jz) = (j.x, j.y, j.z);
    Ok(Matrix3::new(
        -g * jz,
        2.0 * (cy - cz) * jz - d.z,
        2.0 * (cy - cz) * jy - g * jx + d.y,
        2.0 * (cz - cx) * jz + d.z,
        -g * jz,
        2.0 * (cz - cx) * jx - g * jy - d.x,
        2.0 * (cx - cy) * jy + 2.0 * g * jx - d.y,
        2.0 * (cx - cy) * jx + 2.0 * g * jy + d.x,
        0.0,
    ))
}
