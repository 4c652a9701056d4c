use std::f64::consts::PI;

use log::warn;
use nalgebra::{DMatrix, DVector, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{azimuth, polar_angle, unit_from_angles, wrap_angle, BlochState, EomSpec, MeanFieldError};

type V3 = Vector3<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Projection {
    /// Northern hemisphere, radius linear in θ (θ = 0 at the centre, π/2 at the rim).
    PolarNorth,
    /// Southern hemisphere, θ = π at the centre, π/2 at the rim.
    PolarSouth,
    /// Uniform cell-centred (θ, φ) grid over the whole sphere.
    Equirect,
    /// Square (θ, φ) window of half-width `half_width` about a centre point.
    SaddleWindow { center_theta: f64, center_phi: f64, half_width: f64 },
    /// Ring of constant θ, `φ ∈ [−π, π)`.
    Ring { theta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowGrid {
    pub projection: Projection,
    pub resolution: usize,
}

impl FlowGrid {
    /// 11×11 window of ±π/12 about `+ŷ`.
    pub fn saddle_window_y() -> Self {
        Self {
            projection: Projection::SaddleWindow { center_theta: PI / 2.0, center_phi: PI / 2.0, half_width: PI / 12.0 },
            resolution: 11,
        }
    }

    /// `(θ, φ)` of every node in output order.
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        let n = self.resolution.max(1);
        let lin = |lo: f64, hi: f64, i: usize| {
            if n == 1 {
                0.5 * (lo + hi)
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        };
        match self.projection {
            Projection::PolarNorth | Projection::PolarSouth => {
                let north = matches!(self.projection, Projection::PolarNorth);
                let mut out = Vec::new();
                for iy in 0..n {
                    for ix in 0..n {
                        let (x, y) = (lin(-1.0, 1.0, ix), lin(-1.0, 1.0, iy));
                        let r = x.hypot(y);
                        if r > 1.0 + 1e-12 {
                            continue;
                        }
                        let r = r.min(1.0);
                        let theta = if north { r * PI / 2.0 } else { PI - r * PI / 2.0 };
                        out.push((theta, y.atan2(x)));
                    }
                }
                out
            }
            Projection::Equirect => (0..n)
                .flat_map(|it| {
                    (0..n).map(move |ip| {
                        ((it as f64 + 0.5) * PI / n as f64, -PI + (ip as f64 + 0.5) * 2.0 * PI / n as f64)
                    })
                })
                .collect(),
            Projection::SaddleWindow { center_theta, center_phi, half_width } => (0..n)
                .flat_map(|it| {
                    (0..n).map(move |ip| {
                        (lin(center_theta - half_width, center_theta + half_width, it),
                         lin(center_phi - half_width, center_phi + half_width, ip))
                    })
                })
                .collect(),
            Projection::Ring { theta } => (0..n).map(|i| (theta, -PI + 2.0 * PI * i as f64 / n as f64)).collect(),
        }
    }
}

/// Flow measurement at one initial state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowSample {
    pub theta_i: f64,
    pub phi_i: f64,
    pub j_initial: V3,
    pub j_final: V3,
    /// Instantaneous `dJ/dt` at the initial state.
    pub torque: V3,
    pub dtheta: f64,
    pub dphi: f64,
}

impl FlowSample {
    pub fn displacement(&self) -> V3 {
        self.j_final - self.j_initial
    }

    pub(crate) fn from_endpoints(theta_i: f64, phi_i: f64, j_initial: V3, j_final: V3, torque: V3) -> Self {
        Self {
            theta_i,
            phi_i,
            j_initial,
            j_final,
            torque,
            dtheta: polar_angle(&j_final) - polar_angle(&j_initial),
            dphi: wrap_angle(azimuth(&j_final) - azimuth(&j_initial)),
        }
    }
}

pub(crate) fn check_short_time(spec: &EomSpec, n_atoms: usize, dt: f64) {
    let x = spec.interaction_scale() * n_atoms as f64 * dt.abs();
    if x > 0.5 {
        warn!("χNΔt = {x:.3} is far outside the short-time regime (< 0.5)");
    } else if x > 0.1 {
        warn!("χNΔt = {x:.3} exceeds 0.1; flow vectors are no longer local");
    }
}

/// Integrates every grid node for `dt` and records the displacement. Nodes are
/// processed in parallel; output follows [`FlowGrid::nodes`] order.
pub fn flow_map(
    spec: &EomSpec,
    grid: &FlowGrid,
    dt: f64,
    n_atoms: usize,
    tol: f64,
) -> Result<Vec<FlowSample>, MeanFieldError> {
    check_short_time(spec, n_atoms, dt);
    let j = n_atoms as f64 / 2.0;
    grid.nodes()
        .par_iter()
        .map(|&(theta, phi)| {
            let start = BlochState::from_angles(theta, phi, j)?;
            let traj = super::integrate::integrate_any(spec, &start, dt, tol)?;
            let j0 = j * unit_from_angles(theta, phi);
            Ok(FlowSample::from_endpoints(theta, phi, j0, traj.final_state(), spec.torque_at(0.0, &j0)))
        })
        .collect()
}

/// Removes the common `ẑ` displacement (averaged over all samples) from every
/// sample, the superradiant background in flow-map data.
pub fn superradiance_subtract(samples: &[FlowSample]) -> Result<Vec<FlowSample>, MeanFieldError> {
    if samples.len() < 2 {
        return Err(MeanFieldError::TooFewSamples { needed: 2, got: samples.len() });
    }
    let count = samples.len() as f64;
    let mean_dz = samples.iter().map(|s| s.displacement().z).sum::<f64>() / count;
    let mean_tz = samples.iter().map(|s| s.torque.z).sum::<f64>() / count;
    Ok(samples
        .iter()
        .map(|s| {
            let j_final = s.j_final - Vector3::z() * mean_dz;
            let torque = s.torque - Vector3::z() * mean_tz;
            FlowSample::from_endpoints(s.theta_i, s.phi_i, s.j_initial, j_final, torque)
        })
        .collect())
}

/// Linear-response slopes of a flow map about a saddle point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddleSlopes {
    /// Slope of `ΔJ·n̂+` against `dJ_i·n̂+` (growing direction).
    pub plus: f64,
    /// Slope of `ΔJ·n̂−` against `dJ_i·n̂−` (shrinking direction).
    pub minus: f64,
    /// Number of samples used for each fit.
    pub points: [usize; 2],
}

/// Fits `ΔJ·n̂` against `dJ_i·n̂` for each of `n_plus`, `n_minus`, where
/// `dJ_i = J_i − J·saddle`. Only samples lying on the line through the saddle
/// along `n̂` are used (transverse offset below 5% of the line's extent), and a
/// cubic is fitted so that curvature of the sphere does not bias the slope;
/// the linear coefficient is returned.
pub fn saddle_slopes(
    samples: &[FlowSample],
    saddle: &V3,
    n_plus: &V3,
    n_minus: &V3,
) -> Result<SaddleSlopes, MeanFieldError> {
    let fit = |n: &V3, other: &V3| -> Result<(f64, usize), MeanFieldError> {
        let rows: Vec<(f64, f64, f64)> = samples
            .iter()
            .map(|s| {
                let d = s.j_initial - saddle.normalize() * s.j_initial.norm();
                (d.dot(n), d.dot(other), s.displacement().dot(n))
            })
            .collect();
        let extent = rows.iter().fold(0.0f64, |m, r| m.max(r.0.abs()));
        let line: Vec<(f64, f64)> =
            rows.iter().filter(|r| r.1.abs() <= 0.05 * extent).map(|r| (r.0, r.2)).collect();
        if line.len() < 5 || extent == 0.0 {
            return Err(MeanFieldError::TooFewSamples { needed: 5, got: line.len() });
        }
        // scale abscissae to [−1, 1] for conditioning
        let a = DMatrix::from_fn(line.len(), 4, |i, k| (line[i].0 / extent).powi(k as i32));
        let b = DVector::from_iterator(line.len(), line.iter().map(|p| p.1));
        let coef = a
            .svd(true, true)
            .solve(&b, 1e-14)
            .map_err(|e| MeanFieldError::InvalidState { reason: e.to_string() })?;
        Ok((coef[1] / extent, line.len()))
    };
    let (plus, np) = fit(n_plus, n_minus)?;
    let (minus, nm) = fit(n_minus, n_plus)?;
    Ok(SaddleSlopes { plus, minus, points: [np, nm] })
}
