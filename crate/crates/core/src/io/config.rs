//! JSON run configuration.
//!
//! Layers, lowest first: built-in defaults, an optional named preset, the
//! config file, then `CXYZ_`-prefixed environment variables. Environment keys
//! use `__` as the path separator and array indices as plain numbers, e.g.
//! `CXYZ_CAVITY__KAPPA_HZ=60e3` or `CXYZ_TONES__1__AMPLITUDE_SQRTPHOTONS=0.2`.
//! Values are parsed as JSON when possible and as strings otherwise.
//!
//! All frequencies in the file are plain Hz; they are converted to rad/s here
//! and nowhere else.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::couplings::{
    cancellation_ratio, coupling_strengths, tact_amplitude_ratio, CavityParams, CouplingError, CouplingOptions,
    CouplingSet, ToneSet, C64,
};
use crate::meanfield::{EomSpec, HpNormalization, Projection};
use crate::sequence::{Backend, FlowMode, ScanObservable};

pub const ENV_PREFIX: &str = "CXYZ_";

const TWO_PI: f64 = 2.0 * PI;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("config is not valid JSON (line {line}, column {column}): {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("unknown preset {name:?}; available: {available}")]
    UnknownPreset { name: String, available: String },
    #[error("environment override {var}: {message}")]
    Env { var: String, message: String },
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { path: path.into(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaPolicy {
    #[default]
    Computed,
    Zeroed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sidebands {
    #[default]
    Two,
    Three,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    PolarNorth,
    PolarSouth,
    Equirect,
    #[default]
    SaddleWindow,
    Ring,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AtomsSection {
    pub n: usize,
}

impl Default for AtomsSection {
    fn default() -> Self {
        Self { n: 700 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CavitySection {
    pub g0_hz: f64,
    pub kappa_hz: f64,
    pub delta_a_hz: f64,
    pub omega_z_hz: f64,
}

impl Default for CavitySection {
    fn default() -> Self {
        Self { g0_hz: 0.48e6, kappa_hz: 56e3, delta_a_hz: 500e6, omega_z_hz: 500e3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToneSection {
    /// `Δc1` for the first tone, `Δc2` for the second, at four-photon resonance.
    pub detuning_hz: f64,
    pub amplitude_sqrtphotons: f64,
    pub phase_rad: f64,
}

impl Default for ToneSection {
    fn default() -> Self {
        Self { detuning_hz: 200e3, amplitude_sqrtphotons: 1.5, phase_rad: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InteractionSection {
    /// Four-photon detuning, split symmetrically between the two tones.
    pub delta_hz: f64,
    pub phi_int_rad: f64,
    pub duration_s: f64,
}

impl Default for InteractionSection {
    fn default() -> Self {
        Self { delta_hz: 0.0, phi_int_rad: 0.0, duration_s: 50e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub backend: Backend,
    pub gamma_policy: GammaPolicy,
    pub sidebands: Sidebands,
    pub include_kappa: bool,
    /// Replace the second tone amplitude by the exchange-cancelling ratio.
    pub cancel_exchange: bool,
    pub tolerance: f64,
    pub hp_normalization: HpNormalization,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            backend: Backend::MeanField,
            gamma_policy: GammaPolicy::Computed,
            sidebands: Sidebands::Two,
            include_kappa: true,
            cancel_exchange: false,
            tolerance: 1e-10,
            hp_normalization: HpNormalization::Canonical,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    pub grid: GridKind,
    pub resolution: usize,
    pub center_theta_rad: f64,
    pub center_phi_rad: f64,
    pub half_width_rad: f64,
    pub ring_theta_rad: f64,
    pub theta_i_rad: f64,
    pub phi_i_rad: f64,
    pub delta_min_hz: f64,
    pub delta_max_hz: f64,
    pub delta_points: usize,
    pub observable: ScanObservable,
    /// Output samples along a single trajectory.
    pub samples: usize,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            grid: GridKind::SaddleWindow,
            resolution: 11,
            center_theta_rad: PI / 2.0,
            center_phi_rad: PI / 2.0,
            half_width_rad: PI / 12.0,
            ring_theta_rad: PI / 2.0,
            theta_i_rad: PI / 4.0,
            phi_i_rad: PI / 2.0,
            delta_min_hz: -60e3,
            delta_max_hz: 60e3,
            delta_points: 121,
            observable: ScanObservable::DeltaPhi,
            samples: 101,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SequenceSection {
    pub mode: FlowMode,
    /// Single-shot readouts per estimate (exact backend); 0 reads `⟨Ĵz⟩`.
    pub projection_shots: usize,
}

impl Default for SequenceSection {
    fn default() -> Self {
        Self { mode: FlowMode::Direct, projection_shots: 0 }
    }
}

/// On-disk schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub preset: Option<String>,
    pub atoms: AtomsSection,
    pub cavity: CavitySection,
    pub tones: [ToneSection; 2],
    pub interaction: InteractionSection,
    pub model: ModelSection,
    pub scan: ScanSection,
    pub sequence: SequenceSection,
}

/// Validated configuration in internal (angular) units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub n_atoms: usize,
    pub cavity: CavityParams,
    pub tones: ToneSet,
    pub options: CouplingOptions,
    pub duration: f64,
    pub backend: Backend,
    pub gamma_policy: GammaPolicy,
    pub tolerance: f64,
    pub hp_normalization: HpNormalization,
    /// `|α2/α1|` chosen by the exchange-cancellation solver, when requested.
    pub cancellation_ratio: Option<f64>,
    pub grid: Projection,
    pub resolution: usize,
    pub theta_i: f64,
    pub phi_i: f64,
    /// Four-photon detunings to scan, rad/s.
    pub deltas: Vec<f64>,
    pub observable: ScanObservable,
    pub samples: usize,
    pub flow_mode: FlowMode,
    pub projection_shots: usize,
}

impl RunConfig {
    pub fn spin_length(&self) -> f64 {
        self.n_atoms as f64 / 2.0
    }

    pub fn couplings(&self) -> Result<CouplingSet, CouplingError> {
        coupling_strengths(&self.cavity, &self.tones, self.options)
    }

    /// Mean-field spec with the configured superradiance policy.
    pub fn eom_spec(&self) -> Result<EomSpec, CouplingError> {
        let c = self.couplings()?;
        let spec = EomSpec::from_couplings(&c);
        Ok(match self.gamma_policy {
            GammaPolicy::Computed => spec,
            GammaPolicy::Zeroed => spec.with_gamma(0.0),
        })
    }
}

pub const PRESETS: [&str; 8] =
    ["fig1e", "fig2-oatz", "fig2-tact", "fig2-oatx", "fig3-saddle", "fig4-hprime", "stability", "squeeze"];

/// Overrides applied on top of the defaults for a named preset.
pub fn preset(name: &str) -> Result<Value, ConfigError> {
    let r = tact_amplitude_ratio();
    let tact_tones = json!([{ "amplitude_sqrtphotons": 1.5 }, { "amplitude_sqrtphotons": 1.5 * r }]);
    let v = match name {
        "fig1e" => json!({
            "tones": [{ "amplitude_sqrtphotons": 1.0 }, { "amplitude_sqrtphotons": 1.0 }],
            "scan": { "theta_i_rad": PI / 4.0, "phi_i_rad": PI / 2.0, "observable": "delta-phi" }
        }),
        "fig2-oatz" => json!({
            "tones": [{ "amplitude_sqrtphotons": 1.5 }, { "amplitude_sqrtphotons": 0.0 }],
            "model": { "gamma_policy": "zeroed" },
            "scan": { "grid": "polar-south", "resolution": 15 }
        }),
        "fig2-tact" => json!({
            "tones": tact_tones,
            "model": { "gamma_policy": "zeroed" },
            "scan": { "grid": "polar-south", "resolution": 15 }
        }),
        "fig2-oatx" => json!({
            "tones": [{ "amplitude_sqrtphotons": 1.0 }, { "amplitude_sqrtphotons": 1.0 }],
            "model": { "gamma_policy": "zeroed" },
            "scan": { "grid": "polar-south", "resolution": 15 }
        }),
        "fig3-saddle" => json!({
            "tones": tact_tones,
            "model": { "gamma_policy": "zeroed" },
            "scan": { "grid": "saddle-window", "resolution": 11, "half_width_rad": PI / 12.0 }
        }),
        "fig4-hprime" => json!({
            "tones": [
                { "detuning_hz": 700e3, "amplitude_sqrtphotons": 1.5 },
                { "detuning_hz": 700e3 }
            ],
            "model": { "sidebands": "three", "cancel_exchange": true, "gamma_policy": "zeroed" },
            "scan": { "grid": "equirect", "resolution": 24 }
        }),
        "stability" => json!({
            "tones": tact_tones,
            "model": { "gamma_policy": "zeroed" }
        }),
        "squeeze" => json!({
            "atoms": { "n": 100 },
            "tones": tact_tones,
            "model": { "backend": "exact", "gamma_policy": "zeroed" },
            "scan": { "samples": 201 }
        }),
        other => {
            return Err(ConfigError::UnknownPreset { name: other.to_string(), available: PRESETS.join(", ") })
        }
    };
    Ok(v)
}

/// Recursive merge; arrays merge element-wise, scalars are replaced.
fn merge(base: &mut Value, over: &Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (Value::Array(b), Value::Array(o)) => {
            for (i, v) in o.iter().enumerate() {
                if i < b.len() {
                    merge(&mut b[i], v);
                } else {
                    b.push(v.clone());
                }
            }
        }
        (slot, v) => *slot = v.clone(),
    }
}

fn apply_env(root: &mut Value, var: &str, raw: &str) -> Result<(), ConfigError> {
    let rest = &var[ENV_PREFIX.len()..];
    let segments: Vec<String> = rest.split("__").map(|s| s.to_ascii_lowercase()).collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(ConfigError::Env { var: var.to_string(), message: "empty path segment".into() });
    }
    let value = serde_json::from_str::<Value>(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        node = match node {
            Value::Array(items) => {
                let idx: usize = seg.parse().map_err(|_| ConfigError::Env {
                    var: var.to_string(),
                    message: format!("{seg:?} is not an array index"),
                })?;
                items.get_mut(idx).ok_or_else(|| ConfigError::Env {
                    var: var.to_string(),
                    message: format!("index {idx} out of range"),
                })?
            }
            Value::Object(map) => map.entry(seg.clone()).or_insert_with(|| {
                if last {
                    Value::Null
                } else {
                    Value::Object(Map::new())
                }
            }),
            _ => {
                return Err(ConfigError::Env { var: var.to_string(), message: format!("{seg:?} is not a section") })
            }
        };
    }
    *node = value;
    Ok(())
}

/// Parses configuration text without environment overrides.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_with_env(text, std::iter::empty::<(String, String)>())
}

/// Parses configuration text, applying `CXYZ_*` overrides from `env`.
pub fn parse_config_with_env<I>(text: &str, env: I) -> Result<RunConfig, ConfigError>
where
    I: IntoIterator<Item = (String, String)>,
{
    parse_layers(text, None, env)
}

/// As [`parse_config_with_env`], with `preset` replacing any preset named in the text.
pub fn parse_layers<I>(text: &str, preset_name: Option<&str>, env: I) -> Result<RunConfig, ConfigError>
where
    I: IntoIterator<Item = (String, String)>,
{
    let user: Value = if text.trim().is_empty() {
        Value::Object(Map::new())
    } else {
        serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?
    };
    if !user.is_object() {
        return Err(ConfigError::Schema { path: ".".into(), message: "top level must be an object".into() });
    }
    let mut env: Vec<(String, String)> = env.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    env.sort();

    let mut overrides = user;
    let env_preset = env.iter().find(|(k, _)| k == "CXYZ_PRESET").map(|(_, v)| Value::String(v.clone()));
    if let Some(name) = preset_name {
        overrides["preset"] = Value::String(name.to_string());
    } else if let Some(p) = env_preset {
        overrides["preset"] = p;
    }
    let mut merged = serde_json::to_value(ConfigFile::default()).expect("defaults serialise");
    if let Some(name) = overrides.get("preset").and_then(Value::as_str) {
        merge(&mut merged, &preset(name)?);
    } else if let Some(p) = overrides.get("preset").filter(|p| !p.is_null()) {
        return Err(ConfigError::Schema { path: "preset".into(), message: format!("expected a string, got {p}") });
    }
    merge(&mut merged, &overrides);
    for (k, v) in env.iter().filter(|(k, _)| k != "CXYZ_PRESET") {
        apply_env(&mut merged, k, v)?;
    }

    let file: ConfigFile = serde_path_to_error::deserialize(merged).map_err(|e| ConfigError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    resolve(&file)
}

/// Reads `path` (or nothing) and applies the process environment.
pub fn load_config(
    path: Option<&std::path::Path>,
    preset_name: Option<&str>,
) -> Result<RunConfig, Box<dyn std::error::Error + Send + Sync>> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?,
        None => String::new(),
    };
    Ok(parse_layers(&text, preset_name, std::env::vars())?)
}

fn finite(path: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(path, "must be finite"))
    }
}

fn positive(path: &str, v: f64) -> Result<f64, ConfigError> {
    if finite(path, v)? > 0.0 {
        Ok(v)
    } else {
        Err(invalid(path, format!("must be positive (got {v})")))
    }
}

fn resolve(f: &ConfigFile) -> Result<RunConfig, ConfigError> {
    if f.atoms.n == 0 {
        return Err(invalid("atoms.n", "must be at least 1"));
    }
    let cavity = CavityParams {
        g0: TWO_PI * positive("cavity.g0_hz", f.cavity.g0_hz)?,
        kappa: TWO_PI * positive("cavity.kappa_hz", f.cavity.kappa_hz)?,
        delta_a: TWO_PI * finite("cavity.delta_a_hz", f.cavity.delta_a_hz)?,
        omega_z: TWO_PI * positive("cavity.omega_z_hz", f.cavity.omega_z_hz)?,
        n_atoms: f.atoms.n,
    };
    if cavity.delta_a == 0.0 {
        return Err(invalid("cavity.delta_a_hz", "must be non-zero"));
    }
    for (i, t) in f.tones.iter().enumerate() {
        finite(&format!("tones[{i}].detuning_hz"), t.detuning_hz)?;
        finite(&format!("tones[{i}].phase_rad"), t.phase_rad)?;
        let amp = finite(&format!("tones[{i}].amplitude_sqrtphotons"), t.amplitude_sqrtphotons)?;
        if amp < 0.0 {
            return Err(invalid(format!("tones[{i}].amplitude_sqrtphotons"), "must be non-negative"));
        }
    }
    let delta = TWO_PI * finite("interaction.delta_hz", f.interaction.delta_hz)?;
    let phi_int = finite("interaction.phi_int_rad", f.interaction.phi_int_rad)?;
    let duration = positive("interaction.duration_s", f.interaction.duration_s)?;
    let tol = f.model.tolerance;
    if !(1e-13..=1e-6).contains(&tol) {
        return Err(invalid("model.tolerance", format!("must lie in [1e-13, 1e-6] (got {tol})")));
    }

    let (d1, d2) = (TWO_PI * f.tones[0].detuning_hz, TWO_PI * f.tones[1].detuning_hz);
    let amp1 = f.tones[0].amplitude_sqrtphotons;
    let (amp2, ratio) = if f.model.cancel_exchange {
        let r = cancellation_ratio(&cavity, d1, d2).map_err(|e| invalid("model.cancel_exchange", e.to_string()))?;
        (r * amp1, Some(r))
    } else {
        (f.tones[1].amplitude_sqrtphotons, None)
    };
    let tones = ToneSet {
        alpha1: C64::from_polar(amp1, f.tones[0].phase_rad),
        alpha2: C64::from_polar(amp2, f.tones[1].phase_rad),
        delta_c1: d1 - delta / 2.0,
        delta_c2: d2 + delta / 2.0,
        phi_int,
    };
    let options = CouplingOptions {
        include_kappa: f.model.include_kappa,
        include_extra_sidebands: f.model.sidebands == Sidebands::Three,
    };

    let s = &f.scan;
    if s.resolution == 0 {
        return Err(invalid("scan.resolution", "must be at least 1"));
    }
    for (path, v) in [
        ("scan.center_theta_rad", s.center_theta_rad),
        ("scan.center_phi_rad", s.center_phi_rad),
        ("scan.half_width_rad", s.half_width_rad),
        ("scan.ring_theta_rad", s.ring_theta_rad),
        ("scan.phi_i_rad", s.phi_i_rad),
        ("scan.delta_min_hz", s.delta_min_hz),
        ("scan.delta_max_hz", s.delta_max_hz),
    ] {
        finite(path, v)?;
    }
    if !(0.0..=PI).contains(&s.theta_i_rad) {
        return Err(invalid("scan.theta_i_rad", "must lie in [0, π]"));
    }
    if s.delta_points == 0 {
        return Err(invalid("scan.delta_points", "must be at least 1"));
    }
    if s.delta_max_hz < s.delta_min_hz {
        return Err(invalid("scan.delta_max_hz", "must not be below scan.delta_min_hz"));
    }
    let grid = match s.grid {
        GridKind::PolarNorth => Projection::PolarNorth,
        GridKind::PolarSouth => Projection::PolarSouth,
        GridKind::Equirect => Projection::Equirect,
        GridKind::SaddleWindow => Projection::SaddleWindow {
            center_theta: s.center_theta_rad,
            center_phi: s.center_phi_rad,
            half_width: s.half_width_rad,
        },
        GridKind::Ring => Projection::Ring { theta: s.ring_theta_rad },
    };
    let deltas = (0..s.delta_points)
        .map(|i| {
            let frac = if s.delta_points == 1 { 0.5 } else { i as f64 / (s.delta_points - 1) as f64 };
            TWO_PI * (s.delta_min_hz + (s.delta_max_hz - s.delta_min_hz) * frac)
        })
        .collect();

    Ok(RunConfig {
        preset: f.preset.clone(),
        n_atoms: f.atoms.n,
        cavity,
        tones,
        options,
        duration,
        backend: f.model.backend,
        gamma_policy: f.model.gamma_policy,
        tolerance: tol,
        hp_normalization: f.model.hp_normalization,
        cancellation_ratio: ratio,
        grid,
        resolution: s.resolution,
        theta_i: s.theta_i_rad,
        phi_i: s.phi_i_rad,
        deltas,
        observable: s.observable,
        samples: s.samples.max(2),
        flow_mode: f.sequence.mode,
        projection_shots: f.sequence.projection_shots,
    })
}
