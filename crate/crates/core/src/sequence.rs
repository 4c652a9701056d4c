//! Bragg-pulse preparation, flow-vector readout sequences and parameter scans.
//!
//! Rotations are right-handed, `R(α, γ) = exp(−iγ (cos α Ĵx + sin α Ĵy))`, and
//! instantaneous. A coherent state at `(θ, φ)` is prepared from `|↑…↑⟩` by a
//! θ-pulse about axis phase `φ + π/2`.
//!
//! Readout after the interaction:
//!
//! | path | pulses | estimator |
//! |------|--------|-----------|
//! | `dθ` | π about `φi + π/2`, then `π/2 + θi` about `φi − π/2` | `−Jz / J` |
//! | `dφ` | π about `φi + π/2`, then π/2 about `φi + π` | `−Jz / (J sin θi)` |

use std::f64::consts::PI;

use nalgebra::{DMatrix, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::meanfield::{
    self, azimuth, polar_angle, wrap_angle, BlochState, EomSpec, FlowSample, MeanFieldError,
};
use crate::spin::{
    build_collective_ops, build_linear_term, build_xyz_hamiltonian, evolve_lindblad, spin_moments, DickeBasis,
    DickeState, LindbladOptions, SpinError, UnitaryPropagator, C64,
};

type V3 = Vector3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SequenceError {
    #[error(transparent)]
    MeanField(#[from] MeanFieldError),
    #[error(transparent)]
    Spin(#[from] SpinError),
    #[error("|sin θi| = {sin_theta:e} < 1e-6: azimuth undefined at the poles")]
    PolarAzimuth { sin_theta: f64 },
    #[error("pulse area {area} outside [0, 2π)")]
    PulseArea { area: f64 },
    #[error("exact backend supports resonant specs only")]
    ExactTimeDependent,
    #[error("scan values must be finite and non-empty")]
    EmptyScan,
    #[error("θ = {theta} outside [0, π]")]
    PolarRange { theta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub axis_phase: f64,
    pub area: f64,
    /// Informational only; pulses act instantaneously.
    pub duration: f64,
}

impl PulseSpec {
    /// 8.3 kHz Rabi frequency: a π pulse lasts 60 μs.
    pub const RABI_HZ: f64 = 8.3e3;

    pub fn new(axis_phase: f64, area: f64) -> Result<Self, SequenceError> {
        if !(0.0..2.0 * PI).contains(&area) {
            return Err(SequenceError::PulseArea { area });
        }
        Ok(Self { axis_phase, area, duration: area / (2.0 * PI * Self::RABI_HZ) })
    }
}

/// Mean-field or exact collective state.
#[derive(Debug, Clone, PartialEq)]
pub enum SpinState {
    MeanField(BlochState),
    Exact(DickeState),
}

impl SpinState {
    pub fn mean_spin(&self) -> V3 {
        match self {
            Self::MeanField(b) => b.vector(),
            Self::Exact(d) => spin_moments(d).mean,
        }
    }

    pub fn spin_length(&self) -> f64 {
        match self {
            Self::MeanField(b) => b.magnitude(),
            Self::Exact(d) => d.basis().spin_length(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    #[default]
    MeanField,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowMode {
    #[default]
    Direct,
    SequenceEmulated,
}

/// Single-shot `Jz` readouts drawn from the Dicke populations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectionNoise {
    pub seed: u64,
    pub shots: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureOptions {
    pub backend: Backend,
    pub tol: f64,
    pub projection_noise: Option<ProjectionNoise>,
}

impl Default for MeasureOptions {
    fn default() -> Self {
        Self { backend: Backend::MeanField, tol: 1e-10, projection_noise: None }
    }
}

/// Right-handed rotation of `v` by `angle` about `(cos α, sin α, 0)`.
pub fn rotate_vector(v: &V3, axis_phase: f64, angle: f64) -> V3 {
    let k = V3::new(axis_phase.cos(), axis_phase.sin(), 0.0);
    let (s, c) = angle.sin_cos();
    v * c + k.cross(v) * s + k * (k.dot(v) * (1.0 - c))
}

/// `exp(−iγ Ĵα)` on the Dicke manifold.
pub fn rotation_matrix(basis: DickeBasis, axis_phase: f64, angle: f64) -> Result<DMatrix<C64>, SpinError> {
    let axis = V3::new(axis_phase.cos(), axis_phase.sin(), 0.0);
    Ok(UnitaryPropagator::new(&build_linear_term(basis, &axis))?.unitary(angle))
}

fn rotate_dicke(state: &DickeState, axis_phase: f64, angle: f64) -> Result<DickeState, SpinError> {
    let u = rotation_matrix(state.basis(), axis_phase, angle)?;
    Ok(match state {
        DickeState::Pure { basis, amplitudes } => DickeState::Pure { basis: *basis, amplitudes: &u * amplitudes },
        DickeState::Mixed { basis, rho } => DickeState::Mixed { basis: *basis, rho: &u * rho * u.adjoint() },
    })
}

pub fn rotate(state: &SpinState, axis_phase: f64, angle: f64) -> Result<SpinState, SequenceError> {
    Ok(match state {
        SpinState::MeanField(b) => {
            SpinState::MeanField(BlochState::new(rotate_vector(&b.direction(), axis_phase, angle), b.magnitude())?)
        }
        SpinState::Exact(d) => SpinState::Exact(rotate_dicke(d, axis_phase, angle)?),
    })
}

pub fn apply_pulse(state: &SpinState, pulse: &PulseSpec) -> Result<SpinState, SequenceError> {
    rotate(state, pulse.axis_phase, pulse.area)
}

/// Coherent state at `(θ, φ)` prepared by one Bragg pulse from `|↑…↑⟩`.
pub fn prepare_coherent(theta: f64, phi: f64, n_atoms: usize, backend: Backend) -> Result<SpinState, SequenceError> {
    if !(0.0..=PI).contains(&theta) {
        return Err(SequenceError::PolarRange { theta });
    }
    let j = n_atoms as f64 / 2.0;
    let up = match backend {
        Backend::MeanField => SpinState::MeanField(BlochState::new(V3::z(), j)?),
        Backend::Exact => SpinState::Exact(DickeState::all_up(DickeBasis::new(n_atoms)?)),
    };
    rotate(&up, phi + PI / 2.0, theta)
}

/// Jump operators used for the exact backend: the net superradiant rate acts
/// through `Ĵ₊` when positive and `Ĵ₋` when negative.
fn exact_evolve(spec: &EomSpec, state: &DickeState, dt: f64) -> Result<DickeState, SequenceError> {
    let xyz = spec.xyz().ok_or(SequenceError::ExactTimeDependent)?;
    let basis = state.basis();
    let mut h = build_xyz_hamiltonian(&xyz, basis, None)?;
    if let Some(d) = spec.drive {
        h = h.add(&build_linear_term(basis, &d.vector()));
    }
    if spec.gamma_sr == 0.0 && state.is_pure() {
        return Ok(UnitaryPropagator::new(&h)?.evolve(state, dt)?);
    }
    let ops = build_collective_ops(basis);
    let jump = if spec.gamma_sr > 0.0 { ops.jplus } else { ops.jminus };
    let jumps = [(spec.gamma_sr.abs(), jump)];
    Ok(evolve_lindblad(&h, &jumps, state, dt, LindbladOptions::default())?.state)
}

/// Evolves either kind of state under `spec` for `dt`.
pub fn evolve_state(spec: &EomSpec, state: &SpinState, dt: f64, tol: f64) -> Result<SpinState, SequenceError> {
    Ok(match state {
        SpinState::MeanField(b) => {
            let end = meanfield::integrate_any(spec, b, dt, tol)?.final_state();
            SpinState::MeanField(BlochState::new(end, b.magnitude())?)
        }
        SpinState::Exact(d) => SpinState::Exact(exact_evolve(spec, d, dt)?),
    })
}

fn read_jz(state: &SpinState, noise: Option<ProjectionNoise>, rng: &mut ChaCha8Rng) -> f64 {
    match (state, noise) {
        (SpinState::Exact(d), Some(noise)) if noise.shots > 0 => {
            let pops = d.populations();
            let j = d.basis().spin_length();
            let total: f64 = pops.iter().sum();
            let mut acc = 0.0;
            for _ in 0..noise.shots {
                let u: f64 = rng.random::<f64>() * total;
                let mut cumulative = 0.0;
                let mut k = pops.len() - 1;
                for (i, p) in pops.iter().enumerate() {
                    cumulative += p;
                    if u < cumulative {
                        k = i;
                        break;
                    }
                }
                acc += k as f64 - j;
            }
            acc / noise.shots as f64
        }
        _ => state.mean_spin().z,
    }
}

/// Flow vector at `(θi, φi)` after an interaction of duration `dt`.
pub fn measure_flow(
    spec: &EomSpec,
    n_atoms: usize,
    theta_i: f64,
    phi_i: f64,
    dt: f64,
    mode: FlowMode,
    opts: &MeasureOptions,
) -> Result<FlowSample, SequenceError> {
    meanfield::check_short_time(spec, n_atoms, dt);
    let initial = prepare_coherent(theta_i, phi_i, n_atoms, opts.backend)?;
    let j_initial = initial.mean_spin();
    let torque = spec.torque_at(0.0, &j_initial);
    let evolved = evolve_state(spec, &initial, dt, opts.tol)?;
    let j_final = evolved.mean_spin();
    let mut sample = FlowSample::from_endpoints(theta_i, phi_i, j_initial, j_final, torque);
    if mode == FlowMode::Direct {
        return Ok(sample);
    }
    let sin_theta = theta_i.sin();
    if sin_theta.abs() < 1e-6 {
        return Err(SequenceError::PolarAzimuth { sin_theta });
    }
    let j = evolved.spin_length();
    let alpha = phi_i + PI / 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.projection_noise.map(|n| n.seed).unwrap_or(0));
    let echoed = rotate(&evolved, alpha, PI)?;
    let theta_path = rotate(&echoed, alpha + PI, PI / 2.0 + theta_i)?;
    let phi_path = rotate(&echoed, alpha + PI / 2.0, PI / 2.0)?;
    sample.dtheta = -read_jz(&theta_path, opts.projection_noise, &mut rng) / j;
    sample.dphi = -read_jz(&phi_path, opts.projection_noise, &mut rng) / (j * sin_theta);
    Ok(sample)
}

/// Observable recorded by [`four_photon_scan`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanObservable {
    DeltaPhi,
    DeltaJz,
}

/// Off-resonant interaction constants shared by every point of a δ scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectroscopyContext {
    pub chi_e: f64,
    /// `2|χp|`.
    pub chi_pair: f64,
    pub phi_int: f64,
    pub gamma_sr: f64,
    pub n_atoms: usize,
    pub dt: f64,
    pub tol: f64,
}

impl SpectroscopyContext {
    pub fn spec(&self, delta: f64) -> EomSpec {
        EomSpec::time_dependent(self.chi_e, self.chi_pair, delta, self.phi_int).with_gamma(self.gamma_sr)
    }
}

/// `(δ, observable change)` for each four-photon detuning.
pub fn four_photon_scan(
    ctx: &SpectroscopyContext,
    deltas: &[f64],
    theta_i: f64,
    phi_i: f64,
    observable: ScanObservable,
) -> Result<Vec<(f64, f64)>, SequenceError> {
    if deltas.is_empty() || deltas.iter().any(|d| !d.is_finite()) {
        return Err(SequenceError::EmptyScan);
    }
    let j = ctx.n_atoms as f64 / 2.0;
    let start = BlochState::from_angles(theta_i, phi_i, j)?;
    deltas
        .par_iter()
        .map(|&delta| {
            let end = meanfield::integrate_any(&ctx.spec(delta), &start, ctx.dt, ctx.tol)?.final_state();
            let value = match observable {
                ScanObservable::DeltaPhi => wrap_angle(azimuth(&end) - azimuth(&start.vector())),
                ScanObservable::DeltaJz => end.z - start.vector().z,
            };
            Ok((delta, value))
        })
        .collect()
}

/// Final mean spin for a ring of `n_points` initial states at polar angle `θi`.
pub fn ring_scan(
    spec: &EomSpec,
    theta_i: f64,
    dt: f64,
    n_points: usize,
    n_atoms: usize,
    tol: f64,
) -> Result<Vec<(f64, V3)>, SequenceError> {
    if n_points == 0 {
        return Err(SequenceError::EmptyScan);
    }
    meanfield::check_short_time(spec, n_atoms, dt);
    let j = n_atoms as f64 / 2.0;
    (0..n_points)
        .into_par_iter()
        .map(|i| {
            let phi = -PI + 2.0 * PI * i as f64 / n_points as f64;
            let start = BlochState::from_angles(theta_i, phi, j)?;
            Ok((phi, meanfield::integrate_any(spec, &start, dt, tol)?.final_state()))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanVariable {
    Delta,
    ThetaI,
    PhiI,
}

/// One-parameter scan around a fixed flow-measurement context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub variable: ScanVariable,
    pub values: Vec<f64>,
    pub spec: EomSpec,
    pub theta_i: f64,
    pub phi_i: f64,
    pub dt: f64,
    pub n_atoms: usize,
}

/// Runs a [`ScanSpec`]; for `Delta` the spec's time-dependent detuning is replaced.
pub fn run_scan(scan: &ScanSpec, mode: FlowMode, opts: &MeasureOptions) -> Result<Vec<FlowSample>, SequenceError> {
    if scan.values.is_empty() || scan.values.iter().any(|v| !v.is_finite()) {
        return Err(SequenceError::EmptyScan);
    }
    scan.values
        .par_iter()
        .map(|&v| {
            let (mut spec, mut theta, mut phi) = (scan.spec, scan.theta_i, scan.phi_i);
            match scan.variable {
                ScanVariable::Delta => {
                    if let meanfield::Interaction::TimeDependent { delta, .. } = &mut spec.interaction {
                        *delta = v;
                    } else if let Some(x) = spec.xyz() {
                        // resonant XYZ with χz gauge 0: χe = (χx+χy)/2, χP = (χx−χy)/2
                        let (chi_e, chi_pair) = (0.5 * (x.chi_x + x.chi_y), 0.5 * (x.chi_x - x.chi_y));
                        spec = EomSpec { interaction: meanfield::Interaction::TimeDependent { chi_e, chi_pair, delta: v, phi_int: 0.0 }, ..spec };
                    }
                }
                ScanVariable::ThetaI => theta = v,
                ScanVariable::PhiI => phi = v,
            }
            measure_flow(&spec, scan.n_atoms, theta, phi, scan.dt, mode, opts)
        })
        .collect()
}

/// Mean direction `(θ, φ)` of a state.
pub fn mean_angles(state: &SpinState) -> (f64, f64) {
    let m = state.mean_spin();
    (polar_angle(&m), azimuth(&m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::couplings::XYZCouplings;
    use crate::meanfield::unit_from_angles;

    #[test]
    fn quarter_pulse_about_x_lands_on_minus_y() {
        let n = 20;
        let s = rotate(&SpinState::Exact(DickeState::all_up(DickeBasis::new(n).unwrap())), 0.0, PI / 2.0).unwrap();
        let m = s.mean_spin();
        assert!((m - V3::new(0.0, -10.0, 0.0)).norm() < 1e-10);
        let b = rotate(&SpinState::MeanField(BlochState::new(V3::z(), 10.0).unwrap()), 0.0, PI / 2.0).unwrap();
        assert!((b.mean_spin() - V3::new(0.0, -10.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn full_turn_is_identity() {
        let b = BlochState::from_angles(1.0, 0.3, 4.0).unwrap();
        let s = rotate(&SpinState::MeanField(b), 0.7, 2.0 * PI).unwrap();
        assert!((s.mean_spin() - b.vector()).norm() < 1e-14);
        let d = DickeState::coherent(DickeBasis::new(7).unwrap(), 1.0, 0.3);
        if let SpinState::Exact(out) = rotate(&SpinState::Exact(d.clone()), 0.7, 2.0 * PI).unwrap() {
            assert!((out.overlap(&d) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn preparation_geometry() {
        let n = 30;
        for backend in [Backend::MeanField, Backend::Exact] {
            let s = prepare_coherent(PI / 2.0, PI / 2.0, n, backend).unwrap();
            assert!((s.mean_spin() - V3::new(0.0, 15.0, 0.0)).norm() < 1e-10);
            let s = prepare_coherent(PI / 4.0, 0.0, n, backend).unwrap();
            let expected = V3::new(15.0 * (PI / 4.0).sin(), 0.0, 15.0 * (PI / 4.0).cos());
            assert!((s.mean_spin() - expected).norm() < 1e-10);
            let s = prepare_coherent(0.0, 1.3, n, backend).unwrap();
            assert!((s.mean_spin() - V3::new(0.0, 0.0, 15.0)).norm() < 1e-10);
        }
        if let SpinState::Exact(d) = prepare_coherent(PI / 2.0, PI / 2.0, n, Backend::Exact).unwrap() {
            let m = spin_moments(&d);
            assert!((m.covariance[(0, 0)] - n as f64 / 4.0).abs() < 1e-9);
            assert!((m.covariance[(2, 2)] - n as f64 / 4.0).abs() < 1e-9);
        }
    }

    #[test]
    fn bad_inputs() {
        assert!(matches!(PulseSpec::new(0.0, 2.0 * PI), Err(SequenceError::PulseArea { .. })));
        let p = PulseSpec::new(0.0, PI).unwrap();
        assert!((p.duration - 60.24e-6).abs() < 1e-7);
        assert!(prepare_coherent(-0.1, 0.0, 4, Backend::MeanField).is_err());
        let spec = EomSpec::resonant(XYZCouplings::tact(1e-3));
        let err = measure_flow(&spec, 10, 0.0, 0.0, 1.0, FlowMode::SequenceEmulated, &MeasureOptions::default());
        assert!(matches!(err, Err(SequenceError::PolarAzimuth { .. })));
    }

    #[test]
    fn echo_with_no_interaction() {
        let spec = EomSpec::resonant(XYZCouplings::new(0.0, 0.0, 0.0));
        for backend in [Backend::MeanField, Backend::Exact] {
            let opts = MeasureOptions { backend, ..Default::default() };
            for (theta, phi) in [(0.4, 0.1), (PI / 2.0, -2.0), (2.9, 1.0)] {
                let s = measure_flow(&spec, 12, theta, phi, 1.0, FlowMode::SequenceEmulated, &opts).unwrap();
                assert!(s.dtheta.abs() < 1e-12 && s.dphi.abs() < 1e-12, "{backend:?} {theta} {phi}: {s:?}");
            }
        }
    }

    #[test]
    fn oat_equator_has_no_flow() {
        let chi = 1e-3;
        let spec = EomSpec::resonant(XYZCouplings::oat_z(chi));
        for mode in [FlowMode::Direct, FlowMode::SequenceEmulated] {
            let s = measure_flow(&spec, 100, PI / 2.0, 0.4, 0.5, mode, &MeasureOptions::default()).unwrap();
            assert!(s.dtheta.abs() < 1e-10 && s.dphi.abs() < 1e-10);
        }
    }

    #[test]
    fn sequence_tracks_direct_flow() {
        let spec = EomSpec::resonant(XYZCouplings::tact(1e-3));
        let n = 100;
        let dt = 0.05 / (spec.interaction_scale() * n as f64);
        for (theta, phi) in [(1.1, 0.6), (2.0, -1.3)] {
            let opts = MeasureOptions::default();
            let d = measure_flow(&spec, n, theta, phi, dt, FlowMode::Direct, &opts).unwrap();
            let s = measure_flow(&spec, n, theta, phi, dt, FlowMode::SequenceEmulated, &opts).unwrap();
            assert!((d.dtheta - s.dtheta).abs() < 2.5e-3, "{} {}", d.dtheta, s.dtheta);
            assert!((d.dphi - s.dphi).abs() < 2.5e-3, "{} {}", d.dphi, s.dphi);
        }
    }

    #[test]
    fn projection_noise_is_seeded() {
        let spec = EomSpec::resonant(XYZCouplings::tact(1e-2));
        let noise = Some(ProjectionNoise { seed: 7, shots: 5 });
        let opts = MeasureOptions { backend: Backend::Exact, projection_noise: noise, ..Default::default() };
        let a = measure_flow(&spec, 20, 1.0, 0.5, 0.1, FlowMode::SequenceEmulated, &opts).unwrap();
        let b = measure_flow(&spec, 20, 1.0, 0.5, 0.1, FlowMode::SequenceEmulated, &opts).unwrap();
        assert_eq!(a, b);
        let other = MeasureOptions { projection_noise: Some(ProjectionNoise { seed: 8, shots: 5 }), ..opts };
        let c = measure_flow(&spec, 20, 1.0, 0.5, 0.1, FlowMode::SequenceEmulated, &other).unwrap();
        assert_ne!(a.dtheta, c.dtheta);
    }

    #[test]
    fn ring_unchanged_without_interaction() {
        let spec = EomSpec::resonant(XYZCouplings::new(0.0, 0.0, 0.0));
        for (phi, end) in ring_scan(&spec, 0.3, 1.0, 8, 50, 1e-10).unwrap() {
            assert!((end - unit_from_angles(0.3, phi) * 25.0).norm() < 1e-12);
        }
    }

    #[test]
    fn equator_spectroscopy_at_resonance() {
        let ctx = SpectroscopyContext { chi_e: 1e-3, chi_pair: 1e-3, phi_int: 0.0, gamma_sr: 0.0, n_atoms: 100, dt: 0.25, tol: 1e-12 };
        let at = |phi| four_photon_scan(&ctx, &[0.0], PI / 2.0, phi, ScanObservable::DeltaJz).unwrap()[0].1;
        let (plus, zero, minus) = (at(PI / 4.0), at(0.0), at(-PI / 4.0));
        assert!(plus > 0.0 && minus < 0.0);
        assert!((plus + minus).abs() < 1e-9 * plus.abs());
        assert!(zero.abs() < 1e-10);
    }

    #[test]
    fn scan_over_theta() {
        let scan = ScanSpec {
            variable: ScanVariable::ThetaI,
            values: vec![0.5, 1.0, 1.5],
            spec: EomSpec::resonant(XYZCouplings::oat_z(1e-3)),
            theta_i: 0.0,
            phi_i: 0.2,
            dt: 0.1,
            n_atoms: 50,
        };
        let out = run_scan(&scan, FlowMode::Direct, &MeasureOptions::default()).unwrap();
        assert_eq!(out.iter().map(|s| s.theta_i).collect::<Vec<_>>(), vec![0.5, 1.0, 1.5]);
        assert!(run_scan(&ScanSpec { values: vec![], ..scan }, FlowMode::Direct, &MeasureOptions::default()).is_err());
    }
}
