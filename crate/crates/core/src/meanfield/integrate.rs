use nalgebra::Vector3;

use super::{BlochState, EomSpec, Interaction, MeanFieldError};

type V3 = Vector3<f64>;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Dense-output polynomial for one accepted step.
#[derive(Debug, Clone, Copy)]
struct Segment {
    t0: f64,
    h: f64,
    r: [V3; 5],
}

impl Segment {
    fn eval(&self, t: f64) -> V3 {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        self.r[0] + (self.r[1] + (self.r[2] + (self.r[3] + self.r[4] * s1) * s) * s1) * s
    }
}

/// Accepted steps of an adaptive run, with continuous interpolation.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<V3>,
    pub rejected: usize,
    segments: Vec<Segment>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.segments.len()
    }

    pub fn final_state(&self) -> V3 {
        *self.states.last().expect("trajectory holds the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory holds the initial time")
    }

    /// Fifth-order dense output at any `t` inside the integrated span.
    pub fn at(&self, t: f64) -> V3 {
        if self.segments.is_empty() {
            return self.states[0];
        }
        let forward = self.segments[0].h > 0.0;
        let idx = self.segments.partition_point(|s| if forward { s.t0 + s.h < t } else { s.t0 + s.h > t });
        self.segments[idx.min(self.segments.len() - 1)].eval(t)
    }
}

/// Dormand–Prince 5(4) with embedded error estimate and per-component scaling.
#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Dopri5 {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, max_steps: 10_000_000 }
    }

    pub fn solve<F>(&self, f: F, y0: V3, t0: f64, t1: f64) -> Result<Trajectory, MeanFieldError>
    where
        F: Fn(f64, &V3) -> V3,
    {
        let mut traj = Trajectory { times: vec![t0], states: vec![y0], rejected: 0, segments: Vec::new() };
        let span = t1 - t0;
        if span == 0.0 {
            return Ok(traj);
        }
        let dir = span.signum();
        let (mut t, mut y) = (t0, y0);
        let mut k1 = f(t, &y);
        let mut h = dir * self.initial_step(&f, t, &y, &k1, span.abs(), dir);
        let h_min = 1e-14 * span.abs().max(t0.abs());
        for _ in 0..self.max_steps {
            if (t1 - t) * dir <= 0.0 {
                return Ok(traj);
            }
            if (t + h - t1) * dir > 0.0 {
                h = t1 - t;
            }
            let k2 = f(t + C2 * h, &(y + k1 * (h * A21)));
            let k3 = f(t + C3 * h, &(y + (k1 * A31 + k2 * A32) * h));
            let k4 = f(t + C4 * h, &(y + (k1 * A41 + k2 * A42 + k3 * A43) * h));
            let k5 = f(t + C5 * h, &(y + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h));
            let k6 = f(t + h, &(y + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h));
            let y1 = y + (k1 * A71 + k3 * A73 + k4 * A74 + k5 * A75 + k6 * A76) * h;
            let k7 = f(t + h, &y1);
            let err_vec = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * h;
            let mut err = 0.0;
            for i in 0..3 {
                let sc = self.atol + self.rtol * y[i].abs().max(y1[i].abs());
                err += (err_vec[i] / sc).powi(2);
            }
            let err = (err / 3.0).sqrt();
            if !err.is_finite() {
                h *= 0.2;
                traj.rejected += 1;
                if h.abs() < h_min {
                    return Err(underflow(t, &y));
                }
                continue;
            }
            let factor = (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
            if err <= 1.0 {
                let r2 = y1 - y;
                let r3 = k1 * h - r2;
                let r4 = r2 - k7 * h - r3;
                let r5 = (k1 * D1 + k3 * D3 + k4 * D4 + k5 * D5 + k6 * D6 + k7 * D7) * h;
                traj.segments.push(Segment { t0: t, h, r: [y, r2, r3, r4, r5] });
                t = if (t + h - t1) * dir >= 0.0 { t1 } else { t + h };
                y = y1;
                k1 = k7;
                traj.times.push(t);
                traj.states.push(y);
                h *= factor;
            } else {
                traj.rejected += 1;
                h *= factor.min(1.0);
            }
            if h.abs() < h_min && (t1 - t) * dir > h_min {
                return Err(underflow(t, &y));
            }
        }
        Err(underflow(t, &y))
    }

    fn initial_step<F>(&self, f: &F, t: f64, y: &V3, f0: &V3, span: f64, dir: f64) -> f64
    where
        F: Fn(f64, &V3) -> V3,
    {
        let sc = |i: usize| self.atol + self.rtol * y[i].abs();
        let norm = |v: &V3| ((0..3).map(|i| (v[i] / sc(i)).powi(2)).sum::<f64>() / 3.0).sqrt();
        let (d0, d1) = (norm(y), norm(f0));
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * span } else { 0.01 * d0 / d1 };
        let h0 = h0.min(span);
        let y1 = y + f0 * (dir * h0);
        let f1 = f(t + dir * h0, &y1);
        let d2 = norm(&(f1 - f0)) / h0;
        let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6 * span) } else { (0.01 / d1.max(d2)).powf(0.2) };
        (100.0 * h0).min(h1).min(span)
    }
}

fn underflow(t: f64, y: &V3) -> MeanFieldError {
    MeanFieldError::StepUnderflow { t, last: [y.x, y.y, y.z] }
}

fn check_tol(tol: f64) -> Result<(), MeanFieldError> {
    if (1e-13..=1e-6).contains(&tol) {
        Ok(())
    } else {
        Err(MeanFieldError::ToleranceOutOfRange { tol })
    }
}

fn run(spec: &EomSpec, j0: &BlochState, duration: f64, tol: f64) -> Result<Trajectory, MeanFieldError> {
    check_tol(tol)?;
    if !duration.is_finite() {
        return Err(MeanFieldError::NonFinite { what: "duration" });
    }
    let solver = Dopri5::new(tol, tol * j0.magnitude());
    solver.solve(|t, j| spec.torque_at(t, j), j0.vector(), 0.0, duration)
}

/// Either interaction kind.
pub(crate) fn integrate_any(
    spec: &EomSpec,
    j0: &BlochState,
    duration: f64,
    tol: f64,
) -> Result<Trajectory, MeanFieldError> {
    run(spec, j0, duration, tol)
}

/// Adaptive integration of the resonant mean-field equations. Negative
/// durations integrate backwards in time.
pub fn integrate(spec: &EomSpec, j0: &BlochState, duration: f64, tol: f64) -> Result<Trajectory, MeanFieldError> {
    if !spec.is_resonant() {
        return Err(MeanFieldError::TimeDependentSpec);
    }
    run(spec, j0, duration, tol)
}

/// Integration with the rotating twisting axis, starting at `t = 0`.
pub fn integrate_time_dependent(
    spec: &EomSpec,
    j0: &BlochState,
    duration: f64,
    tol: f64,
) -> Result<Trajectory, MeanFieldError> {
    match spec.interaction {
        Interaction::TimeDependent { .. } => run(spec, j0, duration, tol),
        Interaction::Resonant(_) => Err(MeanFieldError::NotTimeDependent),
    }
}
