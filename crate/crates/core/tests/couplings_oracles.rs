//! Coupling constants against hand-evaluated formulas and limits.

use std::f64::consts::PI;

use approx::assert_relative_eq;
use num_complex::Complex64;
use proptest::prelude::*;

use cavity_xyz::couplings::{
    cancellation_ratio, chirp_schedule, classical_field, coupling_strengths, tact_amplitude_ratio,
    tone_separation_rate, xyz_from_couplings, CavityParams, CouplingError, CouplingOptions, ToneSet,
    XYZCouplings,
};

const TWO_PI: f64 = 2.0 * PI;

fn cav() -> CavityParams {
    CavityParams::experiment()
}

fn opts(include_kappa: bool, include_extra_sidebands: bool) -> CouplingOptions {
    CouplingOptions { include_kappa, include_extra_sidebands }
}

/// `(g0²/4Δa)²` evaluated from the raw constants.
fn omega(c: &CavityParams) -> f64 {
    (c.g0 * c.g0 / (4.0 * c.delta_a)).powi(2)
}

#[test]
fn lorentzian_sums_match_direct_evaluation() {
    let c = cav();
    let (a1, a2) = (1.5, 0.7);
    let (d1, d2) = (TWO_PI * 190e3, TWO_PI * 215e3);
    let got = coupling_strengths(&c, &ToneSet::real(a1, a2, d1, d2), opts(true, false)).unwrap();
    let k2 = c.kappa * c.kappa / 4.0;
    let w = omega(&c);
    let chi_e = w * (a1 * a1 * d1 / (d1 * d1 + k2) + a2 * a2 * d2 / (d2 * d2 + k2));
    // 1/(d1 + iκ/2) + 1/(d2 − iκ/2) split into real and imaginary parts
    let re = d1 / (d1 * d1 + k2) + d2 / (d2 * d2 + k2);
    let im = -(c.kappa / 2.0) / (d1 * d1 + k2) + (c.kappa / 2.0) / (d2 * d2 + k2);
    let chi_p = Complex64::new(re, im) * (w * a1 * a2 / 2.0);
    let gamma = c.kappa * w * (a1 * a1 / (d1 * d1 + k2) - a2 * a2 / (d2 * d2 + k2));
    assert_relative_eq!(got.chi_e, chi_e, max_relative = 1e-13);
    assert!((got.chi_p - chi_p).norm() < 1e-13 * chi_p.norm());
    assert_relative_eq!(got.gamma_sr, gamma, max_relative = 1e-12);
    assert_relative_eq!(got.delta, d2 - d1, max_relative = 1e-13);
}

#[test]
fn narrow_cavity_limit_is_second_order() {
    let mut c = cav();
    let (a1, a2) = (1.2, 0.9);
    let d = TWO_PI * 200e3;
    for kappa in [TWO_PI * 20e3, TWO_PI * 10e3, TWO_PI * 5e3] {
        c.kappa = kappa;
        let tones = ToneSet::real(a1, a2, d, d);
        let with = coupling_strengths(&c, &tones, opts(true, false)).unwrap();
        let without = coupling_strengths(&c, &tones, opts(false, false)).unwrap();
        let eps = (kappa / (2.0 * d)).powi(2);
        assert!((with.chi_e / without.chi_e - 1.0).abs() <= 1.01 * eps);
        assert!((with.chi_p.re / without.chi_p.re - 1.0).abs() <= 1.01 * eps);
        // without κ the plain 1/Δ sums
        let w = omega(&c);
        assert_relative_eq!(without.chi_e, w * (a1 * a1 + a2 * a2) / d, max_relative = 1e-13);
        assert_relative_eq!(without.chi_p.re, w * a1 * a2 / d, max_relative = 1e-13);
        assert_eq!(without.chi_p.im, 0.0);
    }
}

#[test]
fn single_tone_has_no_pairs() {
    let c = cav();
    let d = TWO_PI * 200e3;
    let got = coupling_strengths(&c, &ToneSet::real(1.5, 0.0, d, d), opts(true, false)).unwrap();
    assert_eq!(got.chi_p.norm(), 0.0);
    assert!(got.gamma_sr > 0.0);
    let k2 = c.kappa * c.kappa / 4.0;
    assert_relative_eq!(got.chi_e, omega(&c) * 2.25 * d / (d * d + k2), max_relative = 1e-13);
    let xyz = xyz_from_couplings(&got, 0.0).unwrap();
    assert_eq!((xyz.chi_x, xyz.chi_y, xyz.chi_z), (got.chi_e, got.chi_e, 0.0));
}

#[test]
fn equal_amplitudes_give_single_axis() {
    let d = TWO_PI * 200e3;
    let got = coupling_strengths(&cav(), &ToneSet::real(1.0, 1.0, d, d), opts(false, false)).unwrap();
    assert_relative_eq!(got.chi_e, got.pair_coupling(), max_relative = 1e-14);
    assert_relative_eq!(got.chi_e, 2.0 * got.chi_p.re, max_relative = 1e-14);
    let xyz = xyz_from_couplings(&got, 0.0).unwrap();
    assert!(xyz.chi_y.abs() < 1e-14 * xyz.chi_x.abs());
    assert_eq!(got.gamma_sr, 0.0);
}

#[test]
fn tact_ratio_minimizes_axis_mismatch() {
    let d = TWO_PI * 200e3;
    let mismatch = |r: f64| {
        let c = coupling_strengths(&cav(), &ToneSet::real(1.5, 1.5 * r, d, d), opts(false, false)).unwrap();
        let x = xyz_from_couplings(&c, 0.0).unwrap();
        (x.chi_x - 2.0 * x.chi_y).abs() / x.chi_x.abs()
    };
    let best = (1..1000).map(|k| k as f64 * 1e-3).min_by(|a, b| mismatch(*a).total_cmp(&mismatch(*b))).unwrap();
    assert!((best - (3.0 - 2.0 * 2f64.sqrt())).abs() <= 1e-3, "{best}");
    assert!(mismatch(tact_amplitude_ratio()) < 1e-14);
}

#[test]
fn detuning_sign_flips_dispersive_terms() {
    let c = cav();
    let (d1, d2) = (TWO_PI * 180e3, TWO_PI * 230e3);
    let a = coupling_strengths(&c, &ToneSet::real(1.1, 0.8, d1, d2), opts(true, false)).unwrap();
    let b = coupling_strengths(&c, &ToneSet::real(1.1, 0.8, -d1, -d2), opts(true, false)).unwrap();
    assert_relative_eq!(b.chi_e, -a.chi_e, max_relative = 1e-14);
    assert_relative_eq!(b.chi_p.re, -a.chi_p.re, max_relative = 1e-14);
    assert_relative_eq!(b.chi_p.im, a.chi_p.im, max_relative = 1e-14);
    assert_relative_eq!(b.gamma_sr, a.gamma_sr, max_relative = 1e-14);
}

#[test]
fn balanced_lorentzian_weights_cancel_superradiance() {
    let c = cav();
    let (d1, d2) = (TWO_PI * 150e3, TWO_PI * 250e3);
    let k2 = c.kappa * c.kappa / 4.0;
    let a1 = 1.0;
    let a2 = a1 * ((d2 * d2 + k2) / (d1 * d1 + k2)).sqrt();
    let got = coupling_strengths(&c, &ToneSet::real(a1, a2, d1, d2), opts(true, false)).unwrap();
    assert!(got.gamma_sr.abs() < 1e-12 * got.gamma_raise);
    assert_relative_eq!(got.gamma_raise, got.gamma_lower, max_relative = 1e-12);
}

#[test]
fn field_at_one_linewidth_detuning() {
    let kappa = 2.5;
    let a = classical_field(Complex64::new(1.0, 0.0), kappa, kappa);
    // 1/(κ + iκ/2) = (κ − iκ/2)/(5κ²/4)
    assert_relative_eq!(a.re, 0.8 / kappa, max_relative = 1e-15);
    assert_relative_eq!(a.im, -0.4 / kappa, max_relative = 1e-15);
}

#[test]
fn cancellation_ratio_zeroes_exchange() {
    let mut c = cav();
    c.omega_z = TWO_PI * 500e3;
    let d = TWO_PI * 700e3;
    let r = cancellation_ratio(&c, d, d).unwrap();
    let chi = |ratio: f64| coupling_strengths(&c, &ToneSet::real(1.5, 1.5 * ratio, d, d), opts(true, true)).unwrap();
    let at_root = chi(r);
    assert!((at_root.chi_e / at_root.pair_coupling()).abs() < 1e-10);
    let mut last = 0.0;
    for k in 1..=5 {
        let step = 0.01 * k as f64;
        let up = chi(r * (1.0 + step)).chi_e.abs();
        let down = chi(r * (1.0 - step)).chi_e.abs();
        assert!(up > last && down > last, "step {step}");
        last = up.min(down);
    }
    let x = xyz_from_couplings(&at_root, 0.0).unwrap();
    let h_prime = XYZCouplings::h_prime(at_root.pair_coupling());
    assert!((x.chi_x - h_prime.chi_x).abs() < 1e-9 * x.chi_x.abs());
    assert!((x.chi_y - h_prime.chi_y).abs() < 1e-9 * x.chi_x.abs());
}

#[test]
fn narrow_cavity_cancellation_restates_root() {
    let mut c = cav();
    c.kappa = 1e-6;
    let (d1, d2) = (TWO_PI * 650e3, TWO_PI * 750e3);
    let r = cancellation_ratio(&c, d1, d2).unwrap();
    let ds = d1 - 2.0 * c.omega_z;
    assert!((1.0 / d1 + r * r / d2 + 1.0 / ds).abs() < 1e-12 / d1.abs());
}

#[test]
fn near_pole_without_kappa_names_pole() {
    let c = cav();
    let err = coupling_strengths(&c, &ToneSet::real(1.0, 1.0, 0.0, TWO_PI * 200e3), opts(false, false)).unwrap_err();
    assert!(matches!(err, CouplingError::PoleProximity { pole: "Δc1", .. }));
    assert!(err.to_string().contains("Δc1"));
}

#[test]
fn doppler_chirp() {
    let rate = TWO_PI * 25.11e3 / 1e-3;
    let w0 = TWO_PI * 500e3;
    assert_eq!(chirp_schedule(w0, rate, 0.0), w0);
    assert_relative_eq!(chirp_schedule(w0, rate, 1e-3), w0 + TWO_PI * 25.11e3, max_relative = 1e-14);
    assert_relative_eq!(tone_separation_rate(rate) * 2e-3, TWO_PI * 100.44e3, max_relative = 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn uniform_amplitude_scaling(a1 in 0.1f64..3.0, a2 in 0.1f64..3.0, s in 0.2f64..5.0,
                                 d1k in 100.0f64..400.0, d2k in 100.0f64..400.0) {
        let c = cav();
        let (d1, d2) = (TWO_PI * d1k * 1e3, TWO_PI * d2k * 1e3);
        let base = coupling_strengths(&c, &ToneSet::real(a1, a2, d1, d2), opts(true, false)).unwrap();
        let scaled = coupling_strengths(&c, &ToneSet::real(s * a1, s * a2, d1, d2), opts(true, false)).unwrap();
        let s2 = s * s;
        prop_assert!((scaled.chi_e / (s2 * base.chi_e) - 1.0).abs() < 1e-12);
        prop_assert!((scaled.chi_p - base.chi_p * s2).norm() < 1e-12 * scaled.chi_p.norm());
        prop_assert!((scaled.gamma_sr - s2 * base.gamma_sr).abs() < 1e-12 * scaled.gamma_raise.max(scaled.gamma_lower));
        prop_assert!((scaled.chi_e / scaled.chi_p.norm() - base.chi_e / base.chi_p.norm()).abs()
            < 1e-12 * base.chi_e / base.chi_p.norm());
    }

    #[test]
    fn exchange_dominates_pairs_on_resonance(a1 in 0.0f64..3.0, a2 in 0.0f64..3.0, dk in 50.0f64..800.0) {
        let d = TWO_PI * dk * 1e3;
        let c = coupling_strengths(&cav(), &ToneSet::real(a1, a2, d, d), opts(false, false)).unwrap();
        prop_assert!(c.chi_e >= 2.0 * c.chi_p.norm() * (1.0 - 1e-14));
    }
}
