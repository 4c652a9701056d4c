//! Commands and figure scenarios.
//!
//! Every entry point takes a resolved [`RunConfig`] and returns in-memory
//! [`Artifact`]s; writing them is left to the caller.

use std::f64::consts::PI;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{ConfigError, RunConfig};
use super::output::{flow_table, Artifact, Format, Table};
use crate::couplings::{CavityParams, CouplingError, CouplingOptions, CouplingSet, ToneSet, XYZCouplings};
use crate::meanfield::{
    self, fixed_points, flow_map, hp_linearize, jacobian_eigenvalues, saddle_slopes, superradiance_subtract,
    BlochState, Classification, EomSpec, FixedPointReport, FlowGrid, FlowSample, HpCoefficients, MeanFieldError,
    Projection, SaddleSlopes,
};
use crate::sequence::{
    evolve_state, four_photon_scan, measure_flow, prepare_coherent, ring_scan, Backend, FlowMode, MeasureOptions,
    ProjectionNoise, ScanObservable, SequenceError, SpectroscopyContext,
};
use crate::spin::{
    build_xyz_hamiltonian, squeezing_parameter, DickeBasis, DickeState, SpinError, UnitaryPropagator,
};

pub const SCENARIOS: [&str; 8] = super::config::PRESETS;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error(transparent)]
    MeanField(#[from] MeanFieldError),
    #[error(transparent)]
    Sequence(#[from] SequenceError),
    #[error(transparent)]
    Spin(#[from] SpinError),
    #[error("unknown scenario {0:?}; available: {list}", list = SCENARIOS.join(", "))]
    UnknownScenario(String),
    #[error("{0}")]
    Unsupported(String),
}

/// Settings that come from the command line rather than the config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    pub format: Format,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingsReport {
    pub units: String,
    pub preset: Option<String>,
    pub n_atoms: usize,
    pub cavity: CavityParams,
    pub tones: ToneSet,
    pub options: CouplingOptions,
    pub couplings: CouplingSet,
    /// `2 Re χp`.
    pub pair_coupling: f64,
    pub xyz: Option<XYZCouplings>,
    pub cancellation_ratio: Option<f64>,
    /// Spec actually integrated, after the superradiance policy.
    pub spec: EomSpec,
    /// `χ N Δt` with `χ` the largest pairwise coupling difference.
    pub chi_n_dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointsReport {
    pub spec: EomSpec,
    pub spin_length: f64,
    pub points: Vec<FixedPointReport>,
    /// Quadratic bosonic form about each saddle, keyed by index into `points`.
    pub saddle_expansions: Vec<(usize, HpCoefficients)>,
    pub counts: ClassCounts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassCounts {
    pub stable_center: usize,
    pub saddle: usize,
    pub sink: usize,
    pub source: usize,
    pub degenerate: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopesReport {
    pub slopes: SaddleSlopes,
    /// `±λΔt` with `λ` the saddle eigenvalue.
    pub expected_plus: f64,
    pub expected_minus: f64,
    pub chi_n_dt: f64,
    pub superradiance_subtracted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingSummary {
    pub theta_i: f64,
    /// Sign changes of `ΔJz` around the ring.
    pub djz_zero_crossings: usize,
    /// Azimuth of the major axis of the final ring's `(Jx, Jy)` projection, in `(−π/2, π/2]`.
    pub major_axis_angle: f64,
    /// Ratio of principal standard deviations, `≥ 1`.
    pub elongation: f64,
}

fn chi_n_dt(spec: &EomSpec, cfg: &RunConfig) -> f64 {
    spec.interaction_scale() * cfg.n_atoms as f64 * cfg.duration
}

pub fn couplings_report(cfg: &RunConfig) -> Result<CouplingsReport, RunError> {
    let couplings = cfg.couplings()?;
    let spec = cfg.eom_spec()?;
    Ok(CouplingsReport {
        units: "frequencies rad/s (angular); amplitudes sqrt(photons); phases rad".into(),
        preset: cfg.preset.clone(),
        n_atoms: cfg.n_atoms,
        cavity: cfg.cavity,
        tones: cfg.tones,
        options: cfg.options,
        couplings,
        pair_coupling: couplings.pair_coupling(),
        xyz: spec.xyz(),
        cancellation_ratio: cfg.cancellation_ratio,
        spec,
        chi_n_dt: chi_n_dt(&spec, cfg),
    })
}

pub fn fixed_points_report(spec: &EomSpec, n_atoms: usize, cfg: &RunConfig) -> Result<FixedPointsReport, RunError> {
    let j = n_atoms as f64 / 2.0;
    let points = fixed_points(spec, j)?;
    let mut counts = ClassCounts::default();
    let mut saddle_expansions = Vec::new();
    for (i, p) in points.iter().enumerate() {
        match p.classification {
            Classification::StableCenter => counts.stable_center += 1,
            Classification::Saddle => {
                counts.saddle += 1;
                if spec.gamma_sr == 0.0 {
                    saddle_expansions.push((i, hp_linearize(spec, &p.location, cfg.hp_normalization)?));
                }
            }
            Classification::Sink => counts.sink += 1,
            Classification::Source => counts.source += 1,
            Classification::Degenerate => counts.degenerate += 1,
        }
    }
    Ok(FixedPointsReport { spec: *spec, spin_length: j, points, saddle_expansions, counts })
}

/// Flow map over `grid`, honouring the configured backend and readout mode.
pub fn flow_samples(cfg: &RunConfig, spec: &EomSpec, grid: &FlowGrid, seed: u64) -> Result<Vec<FlowSample>, RunError> {
    if cfg.backend == Backend::MeanField && cfg.flow_mode == FlowMode::Direct {
        return Ok(flow_map(spec, grid, cfg.duration, cfg.n_atoms, cfg.tolerance)?);
    }
    let nodes = grid.nodes();
    let samples: Result<Vec<_>, SequenceError> = nodes
        .par_iter()
        .enumerate()
        .map(|(i, &(theta, phi))| {
            let opts = MeasureOptions {
                backend: cfg.backend,
                tol: cfg.tolerance,
                projection_noise: (cfg.projection_shots > 0)
                    .then(|| ProjectionNoise { seed: seed.wrapping_add(i as u64), shots: cfg.projection_shots }),
            };
            measure_flow(spec, cfg.n_atoms, theta, phi, cfg.duration, cfg.flow_mode, &opts)
        })
        .collect();
    Ok(samples?)
}

pub fn flowmap(cfg: &RunConfig, opts: RunOptions) -> Result<Vec<Artifact>, RunError> {
    let spec = cfg.eom_spec()?;
    let grid = FlowGrid { projection: cfg.grid, resolution: cfg.resolution };
    let samples = flow_samples(cfg, &spec, &grid, opts.seed)?;
    let mut out = vec![Artifact::table(&flow_table("flowmap", &samples), opts.format)];
    if spec.gamma_sr != 0.0 && samples.len() >= 2 {
        let cleaned = superradiance_subtract(&samples)?;
        out.push(Artifact::table(&flow_table("flowmap_subtracted", &cleaned), opts.format));
    }
    Ok(out)
}

fn spectroscopy_context(cfg: &RunConfig) -> Result<SpectroscopyContext, RunError> {
    let c = cfg.couplings()?;
    let spec = cfg.eom_spec()?;
    Ok(SpectroscopyContext {
        chi_e: c.chi_e,
        chi_pair: c.pair_magnitude(),
        phi_int: c.phi_int,
        gamma_sr: spec.gamma_sr,
        n_atoms: cfg.n_atoms,
        dt: cfg.duration,
        tol: cfg.tolerance,
    })
}

fn observable_name(o: ScanObservable) -> &'static str {
    match o {
        ScanObservable::DeltaPhi => "dphi",
        ScanObservable::DeltaJz => "djz",
    }
}

pub fn spectroscopy(cfg: &RunConfig, opts: RunOptions) -> Result<Vec<Artifact>, RunError> {
    let ctx = spectroscopy_context(cfg)?;
    let rows = four_photon_scan(&ctx, &cfg.deltas, cfg.theta_i, cfg.phi_i, cfg.observable)?;
    let mut t = Table::new("spectroscopy", &["delta", "delta_hz", observable_name(cfg.observable)]);
    for (d, v) in rows {
        t.push(vec![d, d / (2.0 * PI), v]);
    }
    Ok(vec![Artifact::table(&t, opts.format)])
}

/// Trajectory from `(θi, φi)` over the configured duration.
pub fn evolve(cfg: &RunConfig, opts: RunOptions) -> Result<Vec<Artifact>, RunError> {
    let spec = cfg.eom_spec()?;
    let times: Vec<f64> = (0..cfg.samples).map(|i| cfg.duration * i as f64 / (cfg.samples - 1) as f64).collect();
    let mut t = Table::new("evolve", &["t", "jx", "jy", "jz", "theta", "phi"]);
    let mut push = |time: f64, v: Vector3<f64>| {
        t.push(vec![time, v.x, v.y, v.z, meanfield::polar_angle(&v), meanfield::azimuth(&v)]);
    };
    match cfg.backend {
        Backend::MeanField => {
            let start = BlochState::from_angles(cfg.theta_i, cfg.phi_i, cfg.spin_length())?;
            let traj = meanfield::integrate_any(&spec, &start, cfg.duration, cfg.tolerance)?;
            for &time in &times {
                push(time, traj.at(time));
            }
        }
        Backend::Exact => {
            let mut state = prepare_coherent(cfg.theta_i, cfg.phi_i, cfg.n_atoms, Backend::Exact)?;
            push(0.0, state.mean_spin());
            for w in times.windows(2) {
                state = evolve_state(&spec, &state, w[1] - w[0], cfg.tolerance)?;
                push(w[1], state.mean_spin());
            }
        }
    }
    Ok(vec![Artifact::table(&t, opts.format)])
}

/// Kitagawa–Ueda `ξ²` along a unitary trajectory, `NaN` where the mean spin vanishes.
fn squeezing_trace(h: &XYZCouplings, start: &DickeState, times: &[f64]) -> Result<Vec<(f64, f64)>, RunError> {
    let prop = UnitaryPropagator::new(&build_xyz_hamiltonian(h, start.basis(), None)?)?;
    times
        .par_iter()
        .map(|&t| {
            let state = prop.evolve(start, t)?;
            Ok(match squeezing_parameter(&state) {
                Ok(r) => (r.xi2_kitagawa, r.xi2_wineland),
                Err(SpinError::ZeroMeanSpin) => (f64::NAN, f64::NAN),
                Err(e) => return Err(e.into()),
            })
        })
        .collect()
}

/// `ξ²(t)` for one-axis twisting `χĴz²` from `+x̂` and two-axis counter-twisting
/// `χ(Ĵx² − Ĵz²)` from `+ŷ`, sampled uniformly in `χNt ∈ [0, chi_n_t_max]`.
pub fn squeezing_curves(n_atoms: usize, chi: f64, chi_n_t_max: f64, samples: usize) -> Result<Table, RunError> {
    let basis = DickeBasis::new(n_atoms)?;
    let samples = samples.max(2);
    let chi_n = chi * n_atoms as f64;
    let times: Vec<f64> =
        (0..samples).map(|i| chi_n_t_max * i as f64 / (samples - 1) as f64 / chi_n).collect();
    let oat = squeezing_trace(&XYZCouplings::oat_z(chi), &DickeState::coherent(basis, PI / 2.0, 0.0), &times)?;
    let tact = squeezing_trace(
        &XYZCouplings::new(chi, 0.0, -chi),
        &DickeState::coherent(basis, PI / 2.0, PI / 2.0),
        &times,
    )?;
    let mut t = Table::new(
        "squeezing",
        &["t", "chi_n_t", "xi2_oat", "xi2_tact", "xi2_wineland_oat", "xi2_wineland_tact"],
    );
    for (i, &time) in times.iter().enumerate() {
        t.push(vec![time, time * chi_n, oat[i].0, tact[i].0, oat[i].1, tact[i].1]);
    }
    Ok(t)
}

/// Twisting strength used for the squeezing comparison: half the largest
/// pairwise coupling difference of the configured interaction.
fn squeeze_chi(cfg: &RunConfig) -> Result<f64, RunError> {
    let chi = cfg.eom_spec()?.interaction_scale() / 2.0;
    if chi > 0.0 && chi.is_finite() {
        Ok(chi)
    } else {
        Err(RunError::Unsupported("squeezing needs a non-zero interaction".into()))
    }
}

pub fn squeeze(cfg: &RunConfig, opts: RunOptions) -> Result<Vec<Artifact>, RunError> {
    if cfg.n_atoms > 400 {
        return Err(RunError::Unsupported(format!(
            "exact squeezing runs are dense in N + 1 = {}; use atoms.n ≤ 400",
            cfg.n_atoms + 1
        )));
    }
    let t = squeezing_curves(cfg.n_atoms, squeeze_chi(cfg)?, 12.0, cfg.samples)?;
    Ok(vec![Artifact::table(&t, opts.format)])
}

fn resonant_spec(cfg: &RunConfig, what: &str) -> Result<EomSpec, RunError> {
    let spec = cfg.eom_spec()?;
    if spec.is_resonant() {
        Ok(spec)
    } else {
        Err(RunError::Unsupported(format!(
            "{what} needs a resonant configuration (interaction.delta_hz = 0, zero pair phase)"
        )))
    }
}

fn fig1e(cfg: &RunConfig, opts: RunOptions) -> Result<Vec<Artifact>, RunError> {
    let ctx = spectroscopy_context(cfg)?;
    let upper = four_photon_scan(&ctx, &cfg.deltas, PI / 4.0, cfg.phi_i, ScanObservable::DeltaPhi)?;
    let lower = four_photon_scan(&ctx, &cfg.deltas, 3.0 * PI / 4.0, cfg.phi_i, ScanObservable::DeltaPhi)?;
    let mut scan = Table::new("fig1e_dphi", &["delta", "delta_hz", "dphi_theta_quarter", "dphi_theta_three_quarter"]);
    for (a, b) in upper.iter().zip(&lower) {
        scan.push(vec![a.0, a.0 / (2.0 * PI), a.1, b.1]);
    }
    let ring = ring_scan(&ctx.spec(0.0), PI / 2.0, ctx.dt, 16, ctx.n_atoms, ctx.tol)?;
    let mut equator = Table::new("fig1e_equator", &["phi_i", "djz"]);
    for (phi, end) in ring {
        equator.push(vec![phi, end.z]);
    }
    Ok(vec![Artifact::table(&scan, opts.format), Artifact::table(&equator, opts.format)])
}

fn fig2(name: &str, cfg: &RunConfig, opts: RunOptions) -> Result<Vec<Artifact>, RunError> {
    let spec = resonant_spec(cfg, name)?;
    let stem = name.replace('-', "_");
    let mut out = Vec::new();
    for (projection, half) in [(Projection::PolarSouth, "south"), (Projection::PolarNorth, "north")] {
        let grid = FlowGrid { projection, resolution: cfg.resolution };
        let samples = flow_samples(cfg, &spec, &grid, opts.seed)?;
        out.push(Artifact::table(&flow_table(&format!("{stem}_{half}"), &samples), opts.format));
    }
    let report = fixed_points_report(&spec, cfg.n_atoms, cfg)?;
    out.push(Artifact::report(&format!("{stem}_fixed_points"), &report));
    Ok(out)
}

/// `n̂±` for the saddle at `+ŷ` of a resonant XYZ interaction with `χx ≥ χy ≥ χz`.
fn saddle_axes(xyz: &XYZCouplings) -> (Vector3<f64>, Vector3<f64>) {
    // growth along (√(χy−χz) x̂ ± √(χx−χy) ẑ) directions of the linearised flow
    let a = (xyz.chi_y - xyz.chi_z).abs().sqrt();
    let b = (xyz.chi_x - xyz.chi_y).abs().sqrt();
    let plus = Vector3::new(a, 0.0, b).normalize();
    let minus = Vector3::new(a, 0.0, -b).normalize();
    (plus, minus)
}

pub fn saddle_report(cfg: &RunConfig, samples: &[FlowSample], spec: &EomSpec) -> Result<SlopesReport, RunError> {
    let xyz = spec.xyz().ok_or_else(|| RunError::Unsupported("saddle slopes need a resonant spec".into()))?;
    let j = cfg.spin_length();
    let eig = jacobian_eigenvalues(&EomSpec { gamma_sr: 0.0, ..*spec }, &BlochState::new(Vector3::y(), j)?)?;
    let lambda = eig[0].re;
    let (n_plus, n_minus) = saddle_axes(&xyz);
    let subtracted = spec.gamma_sr != 0.0;
    let used = if subtracted { superradiance_subtract(samples)? } else { samples.to_vec() };
    let slopes = saddle_slopes(&used, &Vector3::y(), &n_plus, &n_minus)?;
    Ok(SlopesReport {
        slopes,
        expected_plus: lambda * cfg.duration,
        expected_minus: -lambda * cfg.duration,
        chi_n_dt: chi_n_dt(spec, cfg),
        superradiance_subtracted: subtracted,
    })
}

fn fig3(cfg: &RunConfig, opts: RunOptions) -> Result<Vec<Artifact>, RunError> {
    let spec = resonant_spec(cfg, "fig3-saddle")?;
    let grid = FlowGrid { projection: cfg.grid, resolution: cfg.resolution };
    let samples = flow_samples(cfg, &spec, &grid, opts.seed)?;
    let report = saddle_report(cfg, &samples, &spec)?;
    Ok(vec![
        Artifact::table(&flow_table("fig3_saddle", &samples), opts.format),
        Artifact::report("fig3_slopes", &report),
    ])
}

/// Sign changes of a cyclic sequence, ignoring entries below `floor`.
pub fn cyclic_sign_changes(values: &[f64], floor: f64) -> usize {
    let signs: Vec<bool> = values.iter().filter(|v| v.abs() > floor).map(|v| *v > 0.0).collect();
    if signs.len() < 2 {
        return 0;
    }
    (0..signs.len()).filter(|&i| signs[i] != signs[(i + 1) % signs.len()]).count()
}

fn ring_summary(theta_i: f64, ring: &[(f64, Vector3<f64>)], j: f64, tol: f64) -> RingSummary {
    let djz: Vec<f64> = ring.iter().map(|(_, v)| v.z - j * theta_i.cos()).collect();
    let n = ring.len() as f64;
    let (mx, my) = ring.iter().fold((0.0, 0.0), |(a, b), (_, v)| (a + v.x / n, b + v.y / n));
    let (mut cxx, mut cyy, mut cxy) = (0.0, 0.0, 0.0);
    for (_, v) in ring {
        cxx += (v.x - mx).powi(2) / n;
        cyy += (v.y - my).powi(2) / n;
        cxy += (v.x - mx) * (v.y - my) / n;
    }
    let mean = 0.5 * (cxx + cyy);
    let spread = (0.25 * (cxx - cyy).powi(2) + cxy * cxy).sqrt();
    let mut angle = 0.5 * (2.0 * cxy).atan2(cxx - cyy);
    if angle <= -PI / 2.0 {
        angle += PI;
    }
    RingSummary {
        theta_i,
        djz_zero_crossings: cyclic_sign_changes(&djz, 100.0 * tol * j),
        major_axis_angle: angle,
        elongation: ((mean + spread) / (mean - spread).max(f64::MIN_POSITIVE)).sqrt(),
    }
}

fn fig4(cfg: &RunConfig, opts: RunOptions) -> Result<Vec<Artifact>, RunError> {
    let spec = resonant_spec(cfg, "fig4-hprime")?;
    let mut out = vec![Artifact::report("fig4_couplings", &couplings_report(cfg)?)];
    let n_points = 72;
    let mut summaries = Vec::new();
    for (label, frac) in [("0p1", 0.1), ("0p5", 0.5), ("0p9", 0.9)] {
        let theta = frac * PI;
        let ring = ring_scan(&spec, theta, cfg.duration, n_points, cfg.n_atoms, cfg.tolerance)?;
        let mut t = Table::new(&format!("fig4_ring_{label}"), &["phi_i", "jx_f", "jy_f", "jz_f", "djz"]);
        for (phi, v) in &ring {
            t.push(vec![*phi, v.x, v.y, v.z, v.z - cfg.spin_length() * theta.cos()]);
        }
        out.push(Artifact::table(&t, opts.format));
        summaries.push(ring_summary(theta, &ring, cfg.spin_length(), cfg.tolerance));
    }
    out.push(Artifact::report("fig4_rings", &summaries));
    let grid = FlowGrid { projection: Projection::Equirect, resolution: cfg.resolution };
    let samples = flow_samples(cfg, &spec, &grid, opts.seed)?;
    out.push(Artifact::table(&flow_table("fig4_equirect", &samples), opts.format));
    Ok(out)
}

/// Growth rate of the `±ŷ` saddle of `χĴz² + δĴy` over `δ/(χN) = step, 2·step, …`.
pub fn lmg_growth_table(chi: f64, n_atoms: usize, step: f64) -> Result<Table, RunError> {
    let j = n_atoms as f64 / 2.0;
    let chi_n = chi * n_atoms as f64;
    let count = (1.0 / step).round() as usize;
    let mut t = Table::new("lmg_growth", &["delta_over_chi_n", "growth_rate", "growth_over_chi_n"]);
    for i in 1..count {
        let ratio = i as f64 * step;
        let spec = EomSpec::lmg(chi, ratio * chi_n);
        let mut rate = 0.0f64;
        for dir in [Vector3::y(), -Vector3::y()] {
            let eig = jacobian_eigenvalues(&spec, &BlochState::new(dir, j)?)?;
            rate = rate.max(eig[0].re);
        }
        t.push(vec![ratio, rate, rate / chi_n]);
    }
    Ok(t)
}

fn stability(cfg: &RunConfig, opts: RunOptions) -> Result<Vec<Artifact>, RunError> {
    let spec = resonant_spec(cfg, "stability")?;
    let report = fixed_points_report(&spec, cfg.n_atoms, cfg)?;
    let chi = spec.interaction_scale();
    let table = lmg_growth_table(chi, cfg.n_atoms, 0.01)?;
    Ok(vec![Artifact::report("stability_fixed_points", &report), Artifact::table(&table, opts.format)])
}

/// Runs a named scenario against an already-resolved configuration.
pub fn run_scenario(name: &str, cfg: &RunConfig, opts: RunOptions) -> Result<Vec<Artifact>, RunError> {
    match name {
        "fig1e" => fig1e(cfg, opts),
        "fig2-oatz" | "fig2-tact" | "fig2-oatx" => fig2(name, cfg, opts),
        "fig3-saddle" => fig3(cfg, opts),
        "fig4-hprime" => fig4(cfg, opts),
        "stability" => stability(cfg, opts),
        "squeeze" => squeeze(cfg, opts),
        other => Err(RunError::UnknownScenario(other.to_string())),
    }
}
