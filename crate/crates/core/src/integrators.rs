//! Fixed-step integration on `SO(3) × ℝⁿ`.
//!
//! The attitude obeys `Ṙ = R Ω̂` with a body angular velocity supplied by the
//! right-hand side; the remaining variables live in a flat vector. The
//! fourth-order scheme is Runge–Kutta–Munthe-Kaas: stages are evaluated at
//! `R_n exp(θ_i)` and the stage velocities are pulled back through the exact
//! inverse of the SO(3) exponential's differential,
//!
//! ```text
//! θ̇ = Ω + ½ θ × Ω + k(|θ|) θ × (θ × Ω),   k(t) = (1 − (t/2) cot(t/2)) / t²
//! ```
//!
//! so every update is a group multiplication and the attitude stays on SO(3)
//! up to round-off.

use std::str::FromStr;

use nalgebra::{SVector, Vector3};

use crate::connection;
use crate::dynamics::{dynamic_rhs, kinematic_rhs, required_motor_torques, ControlRates, MotorTorques, ShapeAccel, StateDerivative};
use crate::error::{Error, Result};
use crate::liegroup::{exp_so3, Rotation};
use crate::model::{kinetic_energy, momentum_map, InertiaParams, ShapeState, SpatialMomentum, SystemState};

/// Orthonormality error above which a run is aborted.
pub const ABORT_ORTHONORMALITY: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    LieRk4,
    LieEuler,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::LieRk4 => "lie_rk4",
            Scheme::LieEuler => "lie_euler",
        }
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "lie_rk4" => Ok(Scheme::LieRk4),
            "lie_euler" => Ok(Scheme::LieEuler),
            other => Err(format!("unknown scheme `{other}` (expected lie_rk4 or lie_euler)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub steps: usize,
    pub scheme: Scheme,
    /// Reproject the attitude onto SO(3) every this many steps.
    pub reproject_every: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { dt: 1e-3, steps: 10_000, scheme: Scheme::LieRk4, reproject_every: 100 }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if self.steps == 0 {
            return Err(Error::InvalidConfig("steps must be at least 1".into()));
        }
        if self.reproject_every == 0 {
            return Err(Error::InvalidConfig("reproject_every must be at least 1".into()));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.steps as f64
    }
}

/// Inverse differential of exp, right-trivialized at `−θ`.
fn dexp_inv(theta: &Vector3<f64>, omega: &Vector3<f64>) -> Vector3<f64> {
    let t2 = theta.norm_squared();
    let t = t2.sqrt();
    let k = if t < 1e-4 {
        1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
    } else {
        (1.0 - 0.5 * t / (0.5 * t).tan()) / t2
    };
    let c = theta.cross(omega);
    omega + c * 0.5 + theta.cross(&c) * k
}

/// One step of `scheme` for `Ṙ = R hat(ω(t, R, y))`, `ẏ = g(t, R, y)`.
pub fn lie_step<const N: usize, F>(
    scheme: Scheme,
    t: f64,
    dt: f64,
    r: &Rotation,
    y: &SVector<f64, N>,
    f: &mut F,
) -> Result<(Rotation, SVector<f64, N>)>
where
    F: FnMut(f64, &Rotation, &SVector<f64, N>) -> Result<(Vector3<f64>, SVector<f64, N>)>,
{
    match scheme {
        Scheme::LieEuler => {
            let (w, dy) = f(t, r, y)?;
            Ok((*r * exp_so3(&(w * dt)), y + dy * dt))
        }
        Scheme::LieRk4 => {
            let h = dt;
            let (k1, l1) = f(t, r, y)?;

            let th2 = k1 * (0.5 * h);
            let (a2, l2) = f(t + 0.5 * h, &(*r * exp_so3(&th2)), &(y + l1 * (0.5 * h)))?;
            let k2 = dexp_inv(&th2, &a2);

            let th3 = k2 * (0.5 * h);
            let (a3, l3) = f(t + 0.5 * h, &(*r * exp_so3(&th3)), &(y + l2 * (0.5 * h)))?;
            let k3 = dexp_inv(&th3, &a3);

            let th4 = k3 * h;
            let (a4, l4) = f(t + h, &(*r * exp_so3(&th4)), &(y + l3 * h))?;
            let k4 = dexp_inv(&th4, &a4);

            let theta = (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            let y_next = y + (l1 + l2 * 2.0 + l3 * 2.0 + l4) * (h / 6.0);
            Ok((*r * exp_so3(&theta), y_next))
        }
    }
}

type Flat7 = SVector<f64, 7>;

fn pack(s: &SystemState) -> Flat7 {
    Flat7::from_column_slice(&[
        s.shape.beta,
        s.shape.gamma,
        s.omega.x,
        s.omega.y,
        s.omega.z,
        s.shape.beta_dot,
        s.shape.gamma_dot,
    ])
}

fn unpack(r: &Rotation, y: &Flat7) -> SystemState {
    SystemState {
        attitude: *r,
        shape: ShapeState { beta: y[0], gamma: y[1], beta_dot: y[5], gamma_dot: y[6] },
        omega: Vector3::new(y[2], y[3], y[4]),
    }
}

fn pack_derivative(d: &StateDerivative) -> (Vector3<f64>, Flat7) {
    let a = &d.acceleration;
    (
        d.velocity.omega,
        Flat7::from_column_slice(&[
            d.velocity.beta_dot,
            d.velocity.gamma_dot,
            a.omega_dot.x,
            a.omega_dot.y,
            a.omega_dot.z,
            a.shape.beta_ddot,
            a.shape.gamma_ddot,
        ]),
    )
}

/// One Lie–RK4 step of a full state under `rhs`.
pub fn step_lie_rk4<F>(s: &SystemState, t: f64, dt: f64, mut rhs: F) -> Result<SystemState>
where
    F: FnMut(f64, &SystemState) -> Result<StateDerivative>,
{
    step_state(Scheme::LieRk4, s, t, dt, &mut rhs)
}

pub fn step_state<F>(scheme: Scheme, s: &SystemState, t: f64, dt: f64, rhs: &mut F) -> Result<SystemState>
where
    F: FnMut(f64, &SystemState) -> Result<StateDerivative>,
{
    let mut f = |t: f64, r: &Rotation, y: &Flat7| rhs(t, &unpack(r, y)).map(|d| pack_derivative(&d));
    let (r, y) = lie_step(scheme, t, dt, &s.attitude, &pack(s), &mut f)?;
    Ok(unpack(&r, &y))
}

/// Sampled signal columns, interpolated by cubic Hermite splines with
/// finite-difference (Catmull–Rom) slopes.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    times: Vec<f64>,
    columns: Vec<Vec<f64>>,
}

impl Schedule {
    pub fn new(times: Vec<f64>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidConfig("schedule needs at least two samples".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidConfig("schedule times must be finite and strictly increasing".into()));
        }
        if columns.iter().any(|c| c.len() != times.len() || c.iter().any(|x| !x.is_finite())) {
            return Err(Error::InvalidConfig("schedule columns must match the time column and be finite".into()));
        }
        Ok(Self { times, columns })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn span(&self) -> (f64, f64) {
        (self.times[0], self.times[self.times.len() - 1])
    }

    fn slope(&self, col: &[f64], k: usize) -> f64 {
        let n = self.times.len();
        let (lo, hi) = match k {
            0 => (0, 1),
            k if k == n - 1 => (n - 2, n - 1),
            k => (k - 1, k + 1),
        };
        (col[hi] - col[lo]) / (self.times[hi] - self.times[lo])
    }

    /// Value of column `c` at `t`, clamped to the sampled range.
    pub fn value(&self, c: usize, t: f64) -> f64 {
        let col = &self.columns[c];
        let n = self.times.len();
        let t = t.clamp(self.times[0], self.times[n - 1]);
        let k = self.times.partition_point(|&x| x <= t).clamp(1, n - 1) - 1;
        let h = self.times[k + 1] - self.times[k];
        let s = (t - self.times[k]) / h;
        let (h00, h10, h01, h11) = hermite_basis(s);
        h00 * col[k] + h10 * h * self.slope(col, k) + h01 * col[k + 1] + h11 * h * self.slope(col, k + 1)
    }
}

fn hermite_basis(s: f64) -> (f64, f64, f64, f64) {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0, s3 - 2.0 * s2 + s, -2.0 * s3 + 3.0 * s2, s3 - s2)
}

fn hermite_basis_d1(s: f64) -> (f64, f64, f64, f64) {
    let s2 = s * s;
    (6.0 * s2 - 6.0 * s, 3.0 * s2 - 4.0 * s + 1.0, -6.0 * s2 + 6.0 * s, 3.0 * s2 - 2.0 * s)
}

fn hermite_basis_d2(s: f64) -> (f64, f64, f64, f64) {
    (12.0 * s - 6.0, 6.0 * s - 4.0, -12.0 * s + 6.0, 6.0 * s - 2.0)
}

/// Shape position, velocity and acceleration at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ShapeSample {
    pub beta: f64,
    pub gamma: f64,
    pub beta_dot: f64,
    pub gamma_dot: f64,
    pub beta_ddot: f64,
    pub gamma_ddot: f64,
}

impl ShapeSample {
    pub fn state(&self) -> ShapeState {
        ShapeState { beta: self.beta, gamma: self.gamma, beta_dot: self.beta_dot, gamma_dot: self.gamma_dot }
    }

    pub fn accel(&self) -> ShapeAccel {
        ShapeAccel::new(self.beta_ddot, self.gamma_ddot)
    }
}

/// A curve in shape space with two continuous derivatives (almost everywhere).
pub trait ShapePath: Sync {
    fn sample(&self, t: f64) -> ShapeSample;
    fn start(&self) -> f64;
    fn end(&self) -> f64;
}

/// Shape path given by a closure over `[start, end]`.
pub struct FnShapePath<F> {
    start: f64,
    end: f64,
    f: F,
}

impl<F: Fn(f64) -> ShapeSample + Sync> FnShapePath<F> {
    pub fn new(start: f64, end: f64, f: F) -> Self {
        Self { start, end, f }
    }
}

impl<F: Fn(f64) -> ShapeSample + Sync> ShapePath for FnShapePath<F> {
    fn sample(&self, t: f64) -> ShapeSample {
        (self.f)(t)
    }
    fn start(&self) -> f64 {
        self.start
    }
    fn end(&self) -> f64 {
        self.end
    }
}

/// Uniformly sampled shape path `(β, γ, β̇, γ̇)`, interpolated by cubic
/// Hermite splines that use the sampled rates as slopes.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledShapePath {
    t0: f64,
    step: f64,
    samples: Vec<ShapeState>,
}

impl SampledShapePath {
    /// Rejects fewer than two samples and spacings that deviate from uniform
    /// by more than `1e-9` relative.
    pub fn new(times: &[f64], samples: Vec<ShapeState>) -> Result<Self> {
        if times.len() != samples.len() || times.len() < 2 {
            return Err(Error::NonUniformSampling("need at least two samples with matching times".into()));
        }
        let step = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        if !(step > 0.0) {
            return Err(Error::NonUniformSampling("times must increase".into()));
        }
        for (k, t) in times.iter().enumerate() {
            let expected = times[0] + step * k as f64;
            if (t - expected).abs() > 1e-9 * step {
                return Err(Error::NonUniformSampling(format!("sample {k} at t={t}, expected {expected}")));
            }
        }
        Ok(Self { t0: times[0], step, samples })
    }

    /// Samples `path` at `n + 1` points `t0 + k step`.
    pub fn from_path(path: &dyn ShapePath, t0: f64, step: f64, n: usize) -> Self {
        let samples = (0..=n).map(|k| path.sample(t0 + step * k as f64).state()).collect();
        Self { t0, step, samples }
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn samples(&self) -> &[ShapeState] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples.len()).map(move |k| self.t0 + self.step * k as f64)
    }

    /// The same curve traversed backwards over the same time window.
    pub fn reversed(&self) -> Self {
        let samples = self
            .samples
            .iter()
            .rev()
            .map(|s| ShapeState { beta_dot: -s.beta_dot, gamma_dot: -s.gamma_dot, ..*s })
            .collect();
        Self { t0: self.t0, step: self.step, samples }
    }

    /// `self` followed by `other`; `other` must start where `self` ends and
    /// share its step.
    pub fn concat(&self, other: &SampledShapePath) -> Result<Self> {
        if (self.step - other.step).abs() > 1e-12 * self.step {
            return Err(Error::NonUniformSampling("paths have different steps".into()));
        }
        let mut samples = self.samples.clone();
        samples.extend_from_slice(&other.samples[1..]);
        Ok(Self { t0: self.t0, step: self.step, samples })
    }

    /// Largest endpoint mismatch in `(β, γ)`, measured on the circle.
    pub fn closure_gap(&self) -> f64 {
        let (a, b) = (self.samples[0], self.samples[self.samples.len() - 1]);
        let wrap = |d: f64| {
            let r = d.rem_euclid(std::f64::consts::TAU);
            r.min(std::f64::consts::TAU - r)
        };
        wrap(b.beta - a.beta).max(wrap(b.gamma - a.gamma))
    }
}

impl ShapePath for SampledShapePath {
    fn sample(&self, t: f64) -> ShapeSample {
        let n = self.samples.len();
        let x = ((t - self.t0) / self.step).clamp(0.0, (n - 1) as f64);
        let k = (x.floor() as usize).min(n - 2);
        let s = x - k as f64;
        let (a, b) = (self.samples[k], self.samples[k + 1]);
        let h = self.step;
        let eval = |p0: f64, v0: f64, p1: f64, v1: f64| {
            let (h00, h10, h01, h11) = hermite_basis(s);
            let (d00, d10, d01, d11) = hermite_basis_d1(s);
            let (e00, e10, e01, e11) = hermite_basis_d2(s);
            (
                h00 * p0 + h10 * h * v0 + h01 * p1 + h11 * h * v1,
                (d00 * p0 + d10 * h * v0 + d01 * p1 + d11 * h * v1) / h,
                (e00 * p0 + e10 * h * v0 + e01 * p1 + e11 * h * v1) / (h * h),
            )
        };
        let (beta, beta_dot, beta_ddot) = eval(a.beta, a.beta_dot, b.beta, b.beta_dot);
        let (gamma, gamma_dot, gamma_ddot) = eval(a.gamma, a.gamma_dot, b.gamma, b.gamma_dot);
        ShapeSample { beta, gamma, beta_dot, gamma_dot, beta_ddot, gamma_ddot }
    }

    fn start(&self) -> f64 {
        self.t0
    }

    fn end(&self) -> f64 {
        self.t0 + self.step * (self.samples.len() - 1) as f64
    }
}

/// Motor torque input for dynamic runs.
pub trait TorqueLaw: Sync {
    fn torques(&self, t: f64, s: &SystemState, p: &InertiaParams) -> Result<MotorTorques>;

    /// Time window on which the law is defined, if limited.
    fn span(&self) -> Option<(f64, f64)> {
        None
    }
}

/// No motor torques.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroTorque;

impl TorqueLaw for ZeroTorque {
    fn torques(&self, _: f64, _: &SystemState, _: &InertiaParams) -> Result<MotorTorques> {
        Ok(MotorTorques::default())
    }
}

/// Sampled `(tau_gimbal, tau_wheel)` columns.
impl TorqueLaw for Schedule {
    fn torques(&self, t: f64, _: &SystemState, _: &InertiaParams) -> Result<MotorTorques> {
        Ok(MotorTorques { gimbal: self.value(0, t), wheel: self.value(1, t) })
    }

    fn span(&self) -> Option<(f64, f64)> {
        Some(Schedule::span(self))
    }
}

/// Feed-forward torques that reproduce the reference shape acceleration,
/// computed with [`required_motor_torques`] at the current state.
pub struct TrackingTorques<'a> {
    pub reference: &'a dyn ShapePath,
}

impl TorqueLaw for TrackingTorques<'_> {
    fn torques(&self, t: f64, s: &SystemState, p: &InertiaParams) -> Result<MotorTorques> {
        required_motor_torques(s, &self.reference.sample(t).accel(), p).map(|(tau, _)| tau)
    }

    fn span(&self) -> Option<(f64, f64)> {
        Some((self.reference.start(), self.reference.end()))
    }
}

/// Shape-rate input for kinematic runs.
pub trait RateLaw: Sync {
    fn rates(&self, t: f64) -> ControlRates;

    fn span(&self) -> Option<(f64, f64)> {
        None
    }
}

/// Sampled `(u_beta, u_gamma)` columns.
impl RateLaw for Schedule {
    fn rates(&self, t: f64) -> ControlRates {
        ControlRates { u_beta: self.value(0, t), u_gamma: self.value(1, t) }
    }

    fn span(&self) -> Option<(f64, f64)> {
        Some(Schedule::span(self))
    }
}

/// Rates given by a closure of time.
pub struct FnRates<F>(pub F);

impl<F: Fn(f64) -> ControlRates + Sync> RateLaw for FnRates<F> {
    fn rates(&self, t: f64) -> ControlRates {
        (self.0)(t)
    }
}

/// Shape rates along a shape path.
impl<P: ShapePath> RateLaw for P {
    fn rates(&self, t: f64) -> ControlRates {
        let s = self.sample(t);
        ControlRates { u_beta: s.beta_dot, u_gamma: s.gamma_dot }
    }

    fn span(&self) -> Option<(f64, f64)> {
        Some((self.start(), self.end()))
    }
}

/// What moves the system during [`simulate`].
pub enum Driver<'a> {
    /// Full dynamics under motor torques.
    Dynamic(&'a dyn TorqueLaw),
    /// Momentum-level kinematics: shape rates are inputs, `μ` is fixed.
    Kinematic { rates: &'a dyn RateLaw, mu: SpatialMomentum },
    /// Attitude reconstruction along a prescribed shape path at fixed `μ`.
    Reconstruct { path: &'a dyn ShapePath, mu: SpatialMomentum },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleDiagnostics {
    pub mu: Vector3<f64>,
    pub kinetic_energy: f64,
    pub orthonormality_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SystemState>,
    pub diagnostics: Vec<SampleDiagnostics>,
}

fn max_relative_drift<const D: usize>(values: impl Iterator<Item = SVector<f64, D>>) -> f64 {
    let mut values = values.peekable();
    let Some(first) = values.peek().copied() else {
        return 0.0;
    };
    let scale = first.norm();
    let scale = if scale > 0.0 { scale } else { 1.0 };
    values.map(|v| (v - first).amax() / scale).fold(0.0, f64::max)
}

impl Trajectory {
    pub fn final_state(&self) -> &SystemState {
        self.states.last().expect("trajectory has at least the initial sample")
    }

    /// `max_k max_i |μ_i(t_k) − μ_i(t_0)| / ‖μ(t_0)‖` (absolute when `μ(t_0) = 0`).
    pub fn mu_drift_rel(&self) -> f64 {
        max_relative_drift(self.diagnostics.iter().map(|d| d.mu))
    }

    /// `max_k |KE(t_k) − KE(t_0)| / KE(t_0)` (absolute when `KE(t_0) = 0`).
    pub fn ke_drift_rel(&self) -> f64 {
        max_relative_drift(self.diagnostics.iter().map(|d| SVector::<f64, 1>::new(d.kinetic_energy)))
    }

    pub fn ortho_err_max(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.orthonormality_error).fold(0.0, f64::max)
    }
}

fn diagnose(s: &SystemState, p: &InertiaParams) -> SampleDiagnostics {
    SampleDiagnostics {
        mu: momentum_map(s, p).0,
        kinetic_energy: kinetic_energy(s, p),
        orthonormality_error: s.attitude.orthonormality_error(),
    }
}

fn check_span(span: Option<(f64, f64)>, start: f64, end: f64) -> Result<()> {
    if let Some((a, b)) = span {
        let tol = 1e-9 * (end - start).abs().max(1.0);
        if a > start + tol || b < end - tol {
            return Err(Error::ScheduleRange { start, end });
        }
    }
    Ok(())
}

struct Recorder<'p> {
    p: &'p InertiaParams,
    traj: Trajectory,
}

impl Recorder<'_> {
    fn push(&mut self, t: f64, s: SystemState) {
        self.traj.times.push(t);
        self.traj.diagnostics.push(diagnose(&s, self.p));
        self.traj.states.push(s);
    }
}

fn maintain(r: Rotation, step: usize, cfg: &IntegratorConfig) -> Result<Rotation> {
    let r = if step.is_multiple_of(cfg.reproject_every) { r.renormalized() } else { r };
    let err = r.orthonormality_error();
    if !(err <= ABORT_ORTHONORMALITY) {
        return Err(Error::NumericalAbort { step, orthonormality_error: err });
    }
    Ok(r)
}

/// Integrates from `initial` at `t = 0` for `cfg.steps` steps, recording
/// every sample with its momentum, energy and orthonormality error.
///
/// For the kinematic and reconstruction drivers the recorded `Ω` and shape
/// rates are the ones implied by the inputs; in reconstruction mode the shape
/// comes from the path and `initial` only supplies the attitude.
pub fn simulate(initial: &SystemState, driver: &Driver<'_>, cfg: &IntegratorConfig, p: &InertiaParams) -> Result<Trajectory> {
    cfg.validate()?;
    let end = cfg.duration();
    let time = |k: usize| cfg.dt * k as f64;
    let mut rec = Recorder {
        p,
        traj: Trajectory {
            times: Vec::with_capacity(cfg.steps + 1),
            states: Vec::with_capacity(cfg.steps + 1),
            diagnostics: Vec::with_capacity(cfg.steps + 1),
        },
    };

    match driver {
        Driver::Dynamic(law) => {
            check_span(law.span(), 0.0, end)?;
            let mut rhs = |t: f64, s: &SystemState| {
                let tau = law.torques(t, s, p)?;
                dynamic_rhs(s, &tau, p)
            };
            let mut s = *initial;
            rec.push(0.0, s);
            for k in 1..=cfg.steps {
                s = step_state(cfg.scheme, &s, time(k - 1), cfg.dt, &mut rhs)?;
                s.attitude = maintain(s.attitude, k, cfg)?;
                rec.push(time(k), s);
            }
        }
        Driver::Kinematic { rates, mu } => {
            check_span(rates.span(), 0.0, end)?;
            let state_at = |t: f64, r: &Rotation, y: &SVector<f64, 2>| {
                let u = rates.rates(t);
                let mut s = SystemState {
                    attitude: *r,
                    shape: ShapeState { beta: y[0], gamma: y[1], beta_dot: u.u_beta, gamma_dot: u.u_gamma },
                    omega: Vector3::zeros(),
                };
                s.omega = kinematic_rhs(&s, &u, mu, p).omega;
                s
            };
            let mut f = |t: f64, r: &Rotation, y: &SVector<f64, 2>| {
                let s = state_at(t, r, y);
                Ok((s.omega, SVector::<f64, 2>::new(s.shape.beta_dot, s.shape.gamma_dot)))
            };
            let mut r = initial.attitude;
            let mut y = SVector::<f64, 2>::new(initial.shape.beta, initial.shape.gamma);
            rec.push(0.0, state_at(0.0, &r, &y));
            for k in 1..=cfg.steps {
                let (r1, y1) = lie_step(cfg.scheme, time(k - 1), cfg.dt, &r, &y, &mut f)?;
                r = maintain(r1, k, cfg)?;
                y = y1;
                rec.push(time(k), state_at(time(k), &r, &y));
            }
        }
        Driver::Reconstruct { path, mu } => {
            check_span(Some((path.start(), path.end())), 0.0, end)?;
            let state_at = |t: f64, r: &Rotation| {
                let shape = path.sample(t).state();
                let mut s = SystemState { attitude: *r, shape, omega: Vector3::zeros() };
                s.omega = connection::reconstruction_velocity(&s, mu, p);
                s
            };
            let mut f = |t: f64, r: &Rotation, _: &SVector<f64, 0>| Ok((state_at(t, r).omega, SVector::<f64, 0>::zeros()));
            let mut r = initial.attitude;
            let empty = SVector::<f64, 0>::zeros();
            rec.push(0.0, state_at(0.0, &r));
            for k in 1..=cfg.steps {
                let (r1, _) = lie_step(cfg.scheme, time(k - 1), cfg.dt, &r, &empty, &mut f)?;
                r = maintain(r1, k, cfg)?;
                rec.push(time(k), state_at(time(k), &r));
            }
        }
    }
    Ok(rec.traj)
}
