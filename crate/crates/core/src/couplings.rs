//! Cavity and dressing-tone parameters to collective interaction constants.
//!
//! All frequencies are angular (rad/s). The cavity fields are eliminated in
//! second order, which leaves each tone acting through a Lorentzian-weighted
//! dispersive factor `(g0²/4Δa)²`:
//!
//! | quantity | formula |
//! |----------|---------|
//! | `χe` | `Ω [Δc1|α1|²/(Δc1²+κ²/4) + Δc2|α2|²/(Δc2²+κ²/4)]` (+ `Ω L(Δc1−2ωz)|α1|²` with the extra sideband) |
//! | `χp` | `Ω |α1α2| e^{iφ}/2 · [1/(Δc1+iκ/2) + 1/(Δc2−iκ/2)]` |
//! | `Γ`  | `κ Ω [|α1|²/(Δc1²+κ²/4) − |α2|²/(Δc2²+κ²/4)]` |
//! | `χP` | `2 Re χp`, so that `χx = χe + χP`, `χy = χe − χP` |
//!
//! with `Ω = (g0²/4Δa)²` and `L(Δ) = Δ/(Δ²+κ²/4)`. Without `include_kappa` the
//! Lorentzians collapse to `1/Δ`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type C64 = Complex64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CouplingError {
    #[error("{field} must be positive and finite (got {value})")]
    NonPositive { field: &'static str, value: f64 },
    #[error("{field} is not finite")]
    NonFinite { field: &'static str },
    #[error("detuning {pole} = {detuning:.6e} rad/s lies within κ/100 of the cavity pole; enable include_kappa")]
    PoleProximity { pole: &'static str, detuning: f64 },
    #[error("four-photon detuning δ = {delta:.6e} rad/s is non-zero; use the time-dependent integrator")]
    OffResonant { delta: f64 },
    #[error("pair phase φ_int = {phi} rad is non-zero; the rotated-axis form is only available in the time-dependent integrator")]
    NonZeroPhase { phi: f64 },
    #[error("no exchange-cancelling amplitude ratio in [0, {upper}]: residual is {low_sign} at r = 0 and {high_sign} at r = {upper}")]
    NoCancellationRoot { upper: f64, low_sign: &'static str, high_sign: &'static str },
    #[error("cancellation needs same-side detunings with mean detuning above ωz (Δc1 = {delta_c1:.4e}, Δc2 = {delta_c2:.4e}, ωz = {omega_z:.4e})")]
    CancellationGeometry { delta_c1: f64, delta_c2: f64, omega_z: f64 },
}

/// Atom–cavity constants. Angular frequencies throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    pub g0: f64,
    pub kappa: f64,
    /// `ωc − ωa`
    pub delta_a: f64,
    pub omega_z: f64,
    pub n_atoms: usize,
}

impl CavityParams {
    /// g0 = 2π·0.48 MHz, κ = 2π·56 kHz, Δa = 2π·500 MHz, ωz = 2π·500 kHz, 700 atoms.
    pub fn experiment() -> Self {
        Self {
            g0: 2.0 * PI * 0.48e6,
            kappa: 2.0 * PI * 56e3,
            delta_a: 2.0 * PI * 500e6,
            omega_z: 2.0 * PI * 500e3,
            n_atoms: 700,
        }
    }

    pub fn validate(&self) -> Result<(), CouplingError> {
        for (field, value) in [("g0", self.g0), ("kappa", self.kappa), ("omega_z", self.omega_z)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(CouplingError::NonPositive { field, value });
            }
        }
        if !self.delta_a.is_finite() || self.delta_a == 0.0 {
            return Err(CouplingError::NonFinite { field: "delta_a" });
        }
        if self.n_atoms == 0 {
            return Err(CouplingError::NonPositive { field: "n_atoms", value: 0.0 });
        }
        if self.delta_a.abs() < 100.0 * self.kappa {
            log::warn!("|Δa| = {:.3e} is not far above κ = {:.3e}", self.delta_a.abs(), self.kappa);
        }
        Ok(())
    }

    /// `(g0²/4Δa)²`; depends on Δa only through its square.
    pub fn dispersive_factor(&self) -> f64 {
        let shift = self.g0 * self.g0 / (4.0 * self.delta_a);
        shift * shift
    }

    /// Real and dissipative response `Δ/(Δ²+κ²/4)`.
    fn lorentz_real(&self, detuning: f64, include_kappa: bool) -> f64 {
        if include_kappa {
            detuning / (detuning * detuning + self.kappa * self.kappa / 4.0)
        } else {
            1.0 / detuning
        }
    }

    fn lorentz_weight(&self, detuning: f64) -> f64 {
        1.0 / (detuning * detuning + self.kappa * self.kappa / 4.0)
    }
}

/// The two dressing tones. `delta_c1 = (ω1−ωc)+ωz`, `delta_c2 = (ω2−ωc)−ωz`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToneSet {
    pub alpha1: C64,
    pub alpha2: C64,
    pub delta_c1: f64,
    pub delta_c2: f64,
    /// Pair phase offset on top of `arg(α2 α1*)`.
    pub phi_int: f64,
}

impl ToneSet {
    pub fn real(amp1: f64, amp2: f64, delta_c1: f64, delta_c2: f64) -> Self {
        Self {
            alpha1: C64::new(amp1, 0.0),
            alpha2: C64::new(amp2, 0.0),
            delta_c1,
            delta_c2,
            phi_int: 0.0,
        }
    }

    /// Both tones at `mean_detuning ∓ δ/2`.
    pub fn symmetric(amp1: f64, amp2: f64, mean_detuning: f64, delta: f64) -> Self {
        Self::real(amp1, amp2, mean_detuning - delta / 2.0, mean_detuning + delta / 2.0)
    }

    pub fn mean_detuning(&self) -> f64 {
        0.5 * (self.delta_c1 + self.delta_c2)
    }

    /// `δ = Δc2 − Δc1`.
    pub fn four_photon_detuning(&self) -> f64 {
        self.delta_c2 - self.delta_c1
    }

    pub fn pair_phase(&self) -> f64 {
        let raw = (self.alpha2 * self.alpha1.conj()).arg();
        let raw = if self.alpha1.norm() == 0.0 || self.alpha2.norm() == 0.0 { 0.0 } else { raw };
        raw + self.phi_int
    }

    pub fn amplitude_ratio(&self) -> f64 {
        self.alpha2.norm() / self.alpha1.norm()
    }

    fn validate(&self) -> Result<(), CouplingError> {
        let finite = [
            self.alpha1.re, self.alpha1.im, self.alpha2.re, self.alpha2.im,
            self.delta_c1, self.delta_c2, self.phi_int,
        ];
        if finite.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(CouplingError::NonFinite { field: "tones" })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CouplingOptions {
    pub include_kappa: bool,
    pub include_extra_sidebands: bool,
}

impl CouplingOptions {
    pub fn full() -> Self {
        Self { include_kappa: true, include_extra_sidebands: false }
    }
}

/// Interaction constants in the frame rotating at ωz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingSet {
    pub chi_e: f64,
    /// Coefficient of `Ĵ₊Ĵ₊ e^{iδt}`.
    pub chi_p: C64,
    /// Net mean-field superradiance `Γ₊ − Γ₋`.
    pub gamma_sr: f64,
    /// Collective `Ĵ₊` jump rate.
    pub gamma_raise: f64,
    /// Collective `Ĵ₋` jump rate.
    pub gamma_lower: f64,
    pub delta: f64,
    pub phi_int: f64,
}

impl CouplingSet {
    /// `χP = 2 Re χp`, the pair coupling entering `χx = χe + χP`.
    pub fn pair_coupling(&self) -> f64 {
        2.0 * self.chi_p.re
    }

    /// `2|χp|`, the pair coupling along the rotated twisting axis.
    pub fn pair_magnitude(&self) -> f64 {
        2.0 * self.chi_p.norm()
    }

    pub fn with_gamma_zeroed(mut self) -> Self {
        self.gamma_sr = 0.0;
        self.gamma_raise = 0.0;
        self.gamma_lower = 0.0;
        self
    }
}

/// Collective `H = χx Ĵx² + χy Ĵy² + χz Ĵz²`.
///
/// `casimir_gauge` records the multiple of `Ĵ·Ĵ` already folded into the three
/// coefficients; it does not change dynamics inside one Dicke manifold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XYZCouplings {
    pub chi_x: f64,
    pub chi_y: f64,
    pub chi_z: f64,
    pub casimir_gauge: f64,
}

impl XYZCouplings {
    pub fn new(chi_x: f64, chi_y: f64, chi_z: f64) -> Self {
        Self { chi_x, chi_y, chi_z, casimir_gauge: 0.0 }
    }

    /// `χ(2Ĵx² + Ĵy²)`: saddles at ±ŷ.
    pub fn tact(chi: f64) -> Self {
        Self::new(2.0 * chi, chi, 0.0)
    }

    /// `χ Ĵz²`.
    pub fn oat_z(chi: f64) -> Self {
        Self::new(0.0, 0.0, chi)
    }

    /// `χ(Ĵx² − Ĵy²)`: saddles at the poles.
    pub fn h_prime(chi: f64) -> Self {
        Self::new(chi, -chi, 0.0)
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.chi_x, self.chi_y, self.chi_z]
    }

    /// Add `g Ĵ·Ĵ`.
    pub fn with_gauge(&self, g: f64) -> Self {
        Self {
            chi_x: self.chi_x + g,
            chi_y: self.chi_y + g,
            chi_z: self.chi_z + g,
            casimir_gauge: self.casimir_gauge + g,
        }
    }

    /// Largest pairwise difference; the gauge-invariant interaction scale.
    pub fn scale(&self) -> f64 {
        let [a, b, c] = self.as_array();
        (a - b).abs().max((b - c).abs()).max((a - c).abs())
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }
}

/// Intracavity field `α = ε / (iκ/2 + Δ)` established by a drive detuned by Δ from the cavity.
pub fn classical_field(drive_amplitude: C64, detuning_from_cavity: f64, kappa: f64) -> C64 {
    drive_amplitude / C64::new(detuning_from_cavity, kappa / 2.0)
}

fn check_pole(cav: &CavityParams, pole: &'static str, detuning: f64) -> Result<(), CouplingError> {
    if detuning.abs() < cav.kappa / 100.0 {
        Err(CouplingError::PoleProximity { pole, detuning })
    } else {
        Ok(())
    }
}

/// Exchange, pair and superradiance constants for two dressing tones.
pub fn coupling_strengths(
    cav: &CavityParams,
    tones: &ToneSet,
    opts: CouplingOptions,
) -> Result<CouplingSet, CouplingError> {
    cav.validate()?;
    tones.validate()?;
    let (d1, d2) = (tones.delta_c1, tones.delta_c2);
    let lower_sideband = d1 - 2.0 * cav.omega_z;
    if !opts.include_kappa {
        check_pole(cav, "Δc1", d1)?;
        check_pole(cav, "Δc2", d2)?;
        if opts.include_extra_sidebands {
            check_pole(cav, "Δc1 − 2ωz", lower_sideband)?;
        }
    }
    let omega = cav.dispersive_factor();
    let (p1, p2) = (tones.alpha1.norm_sqr(), tones.alpha2.norm_sqr());
    let k = opts.include_kappa;

    let mut chi_e = omega * (cav.lorentz_real(d1, k) * p1 + cav.lorentz_real(d2, k) * p2);
    if opts.include_extra_sidebands {
        chi_e += omega * cav.lorentz_real(lower_sideband, k) * p1;
    }

    let half_kappa = if k { cav.kappa / 2.0 } else { 0.0 };
    let resonance = C64::new(1.0, 0.0) / C64::new(d1, half_kappa) + C64::new(1.0, 0.0) / C64::new(d2, -half_kappa);
    let phi = tones.pair_phase();
    let chi_p = C64::from_polar(omega * (p1 * p2).sqrt() / 2.0, phi) * resonance;

    let gamma_raise = cav.kappa * omega * p1 * cav.lorentz_weight(d1);
    let gamma_lower = cav.kappa * omega * p2 * cav.lorentz_weight(d2);
    Ok(CouplingSet {
        chi_e,
        chi_p,
        gamma_sr: gamma_raise - gamma_lower,
        gamma_raise,
        gamma_lower,
        delta: tones.four_photon_detuning(),
        phi_int: phi,
    })
}

/// Canonical XYZ form of the resonant Hamiltonian plus a `chi_z_gauge Ĵ·Ĵ` shift.
pub fn xyz_from_couplings(c: &CouplingSet, chi_z_gauge: f64) -> Result<XYZCouplings, CouplingError> {
    let scale = c.chi_e.abs().max(c.chi_p.norm()).max(1e-300);
    if c.delta != 0.0 && c.delta.abs() > 1e-12 * scale.max(1.0) {
        return Err(CouplingError::OffResonant { delta: c.delta });
    }
    let phase_tol = 1e-12;
    if c.phi_int.sin().abs() > phase_tol || c.phi_int.cos() < 0.0 {
        return Err(CouplingError::NonZeroPhase { phi: c.phi_int });
    }
    let pair = c.pair_coupling();
    Ok(XYZCouplings::new(c.chi_e + pair, c.chi_e - pair, 0.0).with_gauge(chi_z_gauge))
}

/// `|α2/α1|` that cancels exchange when the `Δc1 − 2ωz` sideband is kept.
///
/// Solves `L(Δc1) + r² L(Δc2) + L(Δc1 − 2ωz) = 0` by bisection on `r ∈ [0, 10³]`.
pub fn cancellation_ratio(cav: &CavityParams, delta_c1: f64, delta_c2: f64) -> Result<f64, CouplingError> {
    cav.validate()?;
    let mean = 0.5 * (delta_c1 + delta_c2);
    if delta_c1.signum() != delta_c2.signum() || mean.abs() <= cav.omega_z {
        return Err(CouplingError::CancellationGeometry { delta_c1, delta_c2, omega_z: cav.omega_z });
    }
    let l1 = cav.lorentz_real(delta_c1, true);
    let l2 = cav.lorentz_real(delta_c2, true);
    let ls = cav.lorentz_real(delta_c1 - 2.0 * cav.omega_z, true);
    let residual = |r: f64| l1 + r * r * l2 + ls;
    const UPPER: f64 = 1e3;
    let (mut lo, mut hi) = (0.0_f64, UPPER);
    let (f_lo, f_hi) = (residual(lo), residual(hi));
    let sign = |v: f64| if v > 0.0 { "positive" } else if v < 0.0 { "negative" } else { "zero" };
    if f_lo == 0.0 {
        return Ok(0.0);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(CouplingError::NoCancellationRoot { upper: UPPER, low_sign: sign(f_lo), high_sign: sign(f_hi) });
    }
    let lo_negative = f_lo < 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f = residual(mid);
        if f == 0.0 {
            return Ok(mid);
        }
        if (f < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r = if residual(lo).abs() <= residual(hi).abs() { lo } else { hi };
    Ok(r)
}

/// `ωz(t) = ωz0 + (dωz/dt) t`.
pub fn chirp_schedule(omega_z0: f64, d_omega_z_dt: f64, t: f64) -> f64 {
    omega_z0 + d_omega_z_dt * t
}

/// Tone separation must ramp at twice the Doppler-frequency rate.
pub fn tone_separation_rate(d_omega_z_dt: f64) -> f64 {
    2.0 * d_omega_z_dt
}

/// `|α2/α1| = (√2−1)/(√2+1)`, the ratio giving `χe = 3χP`.
pub fn tact_amplitude_ratio() -> f64 {
    let s = 2f64.sqrt();
    (s - 1.0) / (s + 1.0)
}
