//! Mean-field dynamics against brute-force integrators and closed forms.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use approx::assert_relative_eq;
use nalgebra::{Rotation3, Vector3};
use proptest::prelude::*;

use cavity_xyz::couplings::XYZCouplings;
use cavity_xyz::meanfield::{
    fixed_points, hp_linearize, integrate, integrate_time_dependent, BlochState, Classification, EomSpec,
    HpNormalization,
};

type V3 = Vector3<f64>;

const TOL: f64 = 1e-11;

/// Rotating-axis energy written in ladder form.
fn td_energy(chi_e: f64, chi_pair: f64, delta: f64, phi_int: f64, t: f64, j: &V3) -> f64 {
    let (re, im) = (j.x * j.x - j.y * j.y, 2.0 * j.x * j.y);
    let ph = phi_int + delta * t;
    chi_e * (j.x * j.x + j.y * j.y) + chi_pair * (re * ph.cos() - im * ph.sin())
}

fn numerical_gradient(f: impl Fn(&V3) -> f64, j: &V3) -> V3 {
    let h = 1e-4 * j.norm().max(1.0);
    let mut g = V3::zeros();
    for k in 0..3 {
        let mut p = *j;
        let mut m = *j;
        p[k] += h;
        m[k] -= h;
        // energy is quadratic, so the central difference is exact up to rounding
        g[k] = (f(&p) - f(&m)) / (2.0 * h);
    }
    g
}

fn rk4(f: impl Fn(f64, &V3) -> V3, y0: V3, t1: f64, steps: usize) -> V3 {
    let dt = t1 / steps as f64;
    let mut y = y0;
    for i in 0..steps {
        let t = i as f64 * dt;
        let k1 = f(t, &y);
        let k2 = f(t + dt / 2.0, &(y + k1 * (dt / 2.0)));
        let k3 = f(t + dt / 2.0, &(y + k2 * (dt / 2.0)));
        let k4 = f(t + dt, &(y + k3 * dt));
        y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    }
    y
}

fn final_state(spec: &EomSpec, j0: &BlochState, t: f64) -> V3 {
    integrate(spec, j0, t, TOL).unwrap().final_state()
}

#[test]
fn time_dependent_flow_matches_gradient_oracle() {
    let (chi_e, chi_pair, phi_int) = (0.3, 1.0, 0.4);
    let n = 20;
    let j = n as f64 / 2.0;
    let delta = 2.0 * chi_pair * n as f64;
    let spec = EomSpec::time_dependent(chi_e, chi_pair, delta, phi_int);
    let j0 = BlochState::for_atoms(FRAC_PI_4, FRAC_PI_2, n).unwrap();
    let t = 1.0 / (chi_pair * n as f64);
    let got = integrate_time_dependent(&spec, &j0, t, TOL).unwrap().final_state();
    let oracle = rk4(
        |s, y| numerical_gradient(|v| td_energy(chi_e, chi_pair, delta, phi_int, s, v), y).cross(y),
        j0.vector(),
        t,
        20_000,
    );
    assert!((got - oracle).norm() < 1e-7 * j, "gap {}", (got - oracle).norm());
}

#[test]
fn zero_detuning_matches_resonant_form() {
    let (chi_e, chi_pair) = (0.2, 0.7);
    let td = EomSpec::time_dependent(chi_e, chi_pair, 0.0, 0.0);
    let res = EomSpec::resonant(XYZCouplings::new(chi_e + chi_pair, chi_e - chi_pair, 0.0));
    let j0 = BlochState::from_angles(1.1, 0.3, 15.0).unwrap();
    let a = integrate_time_dependent(&td, &j0, 0.2, TOL).unwrap().final_state();
    let b = final_state(&res, &j0, 0.2);
    assert!((a - b).norm() < 1e-8);
}

#[test]
fn far_detuned_pairs_average_to_exchange() {
    let (chi_e, chi_pair, n) = (0.5, 1.0, 40usize);
    let chi_n = chi_pair * n as f64;
    let j0 = BlochState::for_atoms(FRAC_PI_4, 0.3, n).unwrap();
    let t = 2.0 / chi_n;
    let exchange = integrate(&EomSpec::resonant(XYZCouplings::new(chi_e, chi_e, 0.0)), &j0, t, TOL).unwrap();
    // worst deviation along the path; the end point alone oscillates with δt
    let gap = |ratio: f64| {
        let spec = EomSpec::time_dependent(chi_e, chi_pair, ratio * chi_n, 0.0);
        let traj = integrate_time_dependent(&spec, &j0, t, TOL).unwrap();
        (0..=400).map(|k| t * k as f64 / 400.0).map(|s| (traj.at(s) - exchange.at(s)).norm()).fold(0.0, f64::max)
    };
    let (g1, g2) = (gap(50.0), gap(100.0));
    assert!(g1 < 0.05 * n as f64, "{g1}");
    assert!((g1 / g2 - 2.0).abs() < 0.2, "ratio {}", g1 / g2);
}

#[test]
fn tact_reflection_reverses_time() {
    let spec = EomSpec::resonant(XYZCouplings::new(1.0, 0.0, -1.0));
    let ry = Rotation3::from_axis_angle(&Vector3::y_axis(), FRAC_PI_2);
    let j0 = BlochState::from_angles(1.0, 0.8, 10.0).unwrap();
    let t = 0.07;
    let forward = ry * final_state(&spec, &j0, t);
    let mirrored = BlochState::from_vector(&(ry * j0.vector())).unwrap();
    let backward = final_state(&spec, &mirrored, -t);
    assert!((forward - backward).norm() < 1e-8, "{}", (forward - backward).norm());
}

#[test]
fn oat_flow_commutes_with_z_rotations() {
    let spec = EomSpec::resonant(XYZCouplings::oat_z(0.9));
    let j0 = BlochState::from_angles(0.7, 0.2, 12.0).unwrap();
    let rz = Rotation3::from_axis_angle(&Vector3::z_axis(), 1.3);
    let a = rz * final_state(&spec, &j0, 0.3);
    let b = final_state(&spec, &BlochState::from_vector(&(rz * j0.vector())).unwrap(), 0.3);
    assert!((a - b).norm() < 1e-8);
}

#[test]
fn long_runs_conserve_length_and_energy() {
    let spec = EomSpec::resonant(XYZCouplings::new(0.8, -0.3, 0.1));
    let j0 = BlochState::from_angles(1.2, 2.0, 25.0).unwrap();
    let traj = integrate(&spec, &j0, 2.0, 1e-10).unwrap();
    let e0 = spec.energy(&j0.vector()).unwrap();
    let e_scale = 0.8 * 25.0f64 * 25.0;
    for s in &traj.states {
        assert!((s.norm() - 25.0).abs() < 1e-7 * 25.0);
        assert!((spec.energy(s).unwrap() - e0).abs() < 1e-7 * e_scale);
    }
}

#[test]
fn saddle_displacements_grow_and_shrink_exponentially() {
    let chi = 1.0;
    let j = 10.0;
    let spec = EomSpec::resonant(XYZCouplings::new(chi, 0.0, -chi));
    // Jacobian eigenvalue at +y for χ(Jx² − Jz²)
    let lambda = 2.0 * chi * j;
    let plus = V3::new(1.0, 0.0, 1.0).normalize();
    let minus = V3::new(1.0, 0.0, -1.0).normalize();
    let eps = 1e-5 * j;
    for (axis, sign) in [(plus, 1.0), (minus, -1.0)] {
        let j0 = BlochState::from_vector(&(V3::y() * j + axis * eps)).unwrap();
        let traj = integrate(&spec, &j0, 0.2 / lambda, TOL).unwrap();
        for k in 1..=10 {
            let t = 0.02 * k as f64 / lambda;
            let along = traj.at(t).dot(&axis);
            let along0 = j0.vector().dot(&axis);
            let expected = (sign * lambda * t).exp();
            assert!(((along / along0) / expected - 1.0).abs() < 0.01, "{sign} {t}");
        }
    }
}

#[test]
fn lmg_half_drive_fixed_points() {
    let (chi, n) = (1.0, 100usize);
    let j = n as f64 / 2.0;
    let spec = EomSpec::lmg(chi, 0.5 * chi * n as f64);
    let points = fixed_points(&spec, j).unwrap();
    let stable: Vec<V3> = points
        .iter()
        .filter(|p| p.classification == Classification::StableCenter)
        .map(|p| p.location.direction())
        .filter(|d| d.z.abs() > 0.1)
        .collect();
    assert_eq!(stable.len(), 2);
    let root3 = 3f64.sqrt() / 2.0;
    for d in &stable {
        assert!(d.x.abs() < 1e-9);
        assert_relative_eq!(d.y, 0.5, epsilon = 1e-9);
        assert_relative_eq!(d.z.abs(), root3, epsilon = 1e-9);
    }
    assert!(stable[0].z * stable[1].z < 0.0);
    let saddles: Vec<_> = points.iter().filter(|p| p.classification == Classification::Saddle).collect();
    assert_eq!(saddles.len(), 1);
    assert!((saddles[0].location.direction() - V3::y()).norm() < 1e-9);
}

#[test]
fn tact_quadratic_expansion_at_y() {
    let (chi, n) = (0.8, 60usize);
    let j = n as f64 / 2.0;
    let spec = EomSpec::resonant(XYZCouplings::new(chi, 0.0, -chi));
    let at_y = BlochState::new(V3::y(), j).unwrap();
    let quad = hp_linearize(&spec, &at_y, HpNormalization::Quadrature).unwrap();
    assert_relative_eq!(quad.c_dd.norm(), chi * n as f64, max_relative = 1e-12);
    assert!((quad.c_aa - quad.c_dd.conj()).norm() < 1e-12);
    assert!(quad.c_da.abs() < 1e-12);
    let canon = hp_linearize(&spec, &at_y, HpNormalization::Canonical).unwrap();
    // Bogoliubov rate equals the linear-flow rate 2χJ
    assert_relative_eq!(canon.growth_rate(), 2.0 * chi * j, max_relative = 1e-12);
    assert_relative_eq!(canon.growth_rate(), 2.0 * canon.c_dd.norm(), max_relative = 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn common_shift_leaves_flow_unchanged(
        cx in -2.0f64..2.0, cy in -2.0f64..2.0, cz in -2.0f64..2.0,
        g in -5.0f64..5.0, theta in 0.05f64..(PI - 0.05), phi in -PI..PI,
    ) {
        let j0 = BlochState::from_angles(theta, phi, 8.0).unwrap();
        let base = XYZCouplings::new(cx, cy, cz);
        let a = final_state(&EomSpec::resonant(base), &j0, 0.05);
        let b = final_state(&EomSpec::resonant(base.with_gauge(g)), &j0, 0.05);
        prop_assert!((a - b).norm() < 1e-7, "{}", (a - b).norm());
    }
}
