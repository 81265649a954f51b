//! Kinematic and dynamic models of the spacecraft–gimbal system, and the
//! comparison against the Newtonian (Schaub–Rao–Junkins) form of the
//! equations of motion.
//!
//! # Kinematic model
//!
//! With the spatial momentum `μ` fixed, the attitude obeys
//! `Ẋ = f(X) + g_β(X) u_β + g_γ(X) u_γ` where the shape rates `u = (β̇, γ̇)` are
//! the inputs:
//!
//! ```text
//! f:   Ω = Ĩ(β)⁻¹ R_sᵀ μ,              (β̇, γ̇) = (0, 0)
//! g_β: Ω = −Ĩ(β)⁻¹ R_β I_gr i₂,        (β̇, γ̇) = (1, 0)
//! g_γ: Ω = −Ĩ(β)⁻¹ R_β I_gr i₃,        (β̇, γ̇) = (0, 1)
//! ```
//!
//! # Dynamic model
//!
//! The gimbal-rotor unit carries body-frame momentum `R_β u₁` with
//! `u₁ = I_gr (R_βᵀ Ω + (0, β̇, γ̇))`. Its rate of change in the body frame is
//! `τ_B = Ω̂ R_β u₁ + R_β u₂`. The spacecraft feels the reaction, so
//!
//! ```text
//! I_s Ω̇ + Ω × I_s Ω + τ_B = 0                      (rows 1–3)
//! (R_βᵀ τ_B)₂             = τ_gimbal               (row 4)
//! i₃ · d/dt u₁             = τ_wheel                (row 5)
//! ```
//!
//! Row 5 is the rate of the spin-axis momentum, the generalized force
//! conjugate to γ. It differs from `(R_βᵀ τ_B)₃` by
//! `(Ig − It) ω_t (ω_g + β̇)`; using the generalized force keeps
//! `d(KE)/dt = τ_gimbal β̇ + τ_wheel γ̇` exact.
//!
//! The system is linear in `(Ω̇, β̈, γ̈)` and its coefficient matrix is the
//! metric of [`crate::model::metric_matrix`].

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::liegroup::{hat, Rotation};
use crate::model::{
    gimbal_rotation, gimbal_rotor_inertia, locked_body_inertia, InertiaParams, Matrix5, SpatialMomentum,
    SystemState, TangentVector, Vector5,
};

/// Kinematic-level inputs `u = (u_β, u_γ)` in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlRates {
    pub u_beta: f64,
    pub u_gamma: f64,
}

/// Gimbal and wheel motor torques in N·m.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MotorTorques {
    pub gimbal: f64,
    pub wheel: f64,
}

/// Shape accelerations `(β̈, γ̈)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ShapeAccel {
    pub beta_ddot: f64,
    pub gamma_ddot: f64,
}

impl ShapeAccel {
    pub fn new(beta_ddot: f64, gamma_ddot: f64) -> Self {
        Self { beta_ddot, gamma_ddot }
    }

    fn vector(&self) -> Vector3<f64> {
        Vector3::new(0.0, self.beta_ddot, self.gamma_ddot)
    }
}

/// Second-order part of a state derivative.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Acceleration {
    pub omega_dot: Vector3<f64>,
    pub shape: ShapeAccel,
}

impl Acceleration {
    pub fn to_vector5(&self) -> Vector5 {
        Vector5::new(
            self.omega_dot.x,
            self.omega_dot.y,
            self.omega_dot.z,
            self.shape.beta_ddot,
            self.shape.gamma_ddot,
        )
    }

    pub fn from_vector5(v: &Vector5) -> Self {
        Self {
            omega_dot: Vector3::new(v[0], v[1], v[2]),
            shape: ShapeAccel::new(v[3], v[4]),
        }
    }
}

/// Time derivative of a [`SystemState`]. The attitude rate is
/// `R_s · hat(velocity.omega)`, see [`StateDerivative::rotation_rate`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateDerivative {
    pub velocity: TangentVector,
    pub acceleration: Acceleration,
}

impl StateDerivative {
    pub fn rotation_rate(&self, attitude: &Rotation) -> Matrix3<f64> {
        attitude.matrix() * hat(&self.velocity.omega).matrix()
    }
}

/// Outputs of [`cmg_external_torque`]: gimbal-frame vectors `u₁`, `u₂` and the
/// body-frame torque acting on the gimbal-rotor unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmgTorque {
    pub u1: Vector3<f64>,
    pub u2: Vector3<f64>,
    pub tau_body: Vector3<f64>,
}

/// Gimbal-frame angular velocity components and variables in the
/// Newtonian notation: gimbal angle is `β`, wheel speed is `γ̇`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrjState {
    pub omega_s: f64,
    pub omega_t: f64,
    pub omega_g: f64,
    pub gimbal_angle: f64,
    pub wheel_speed: f64,
}

impl SrjState {
    /// `(ω_t, ω_g, ω_s) = R_βᵀ Ω`.
    pub fn from_state(s: &SystemState) -> Self {
        let w = gimbal_rotation(s.shape.beta).transpose() * s.omega;
        Self {
            omega_t: w.x,
            omega_g: w.y,
            omega_s: w.z,
            gimbal_angle: s.shape.beta,
            wheel_speed: s.shape.gamma_dot,
        }
    }
}

/// Gimbal frame unit vectors in the body frame; `R_β = [ĝ_t ĝ_g ĝ_s]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GimbalFrame {
    pub spin: Vector3<f64>,
    pub transverse: Vector3<f64>,
    pub gimbal: Vector3<f64>,
}

impl GimbalFrame {
    pub fn new(beta: f64) -> Self {
        let r = gimbal_rotation(beta);
        Self {
            transverse: r.column(0),
            gimbal: r.column(1),
            spin: r.column(2),
        }
    }
}

/// One identity of the term-by-term expansion, evaluated in matrix form and in
/// the gimbal-frame basis.
#[derive(Debug, Clone, PartialEq)]
pub struct TermExpansion {
    pub label: &'static str,
    pub matrix_form: Vec<f64>,
    pub basis_form: Vec<f64>,
    pub residual: f64,
}

fn locked_inverse_apply(beta: f64, p: &InertiaParams, v: &Vector3<f64>) -> Vector3<f64> {
    locked_body_inertia(beta, p)
        .cholesky()
        .expect("locked inertia is SPD for valid parameters")
        .solve(v)
}

/// `𝒰 = î₂ I_gr − I_gr î₂`. Symmetric: only the (1,3) and (3,1) entries are
/// nonzero, both equal to `(Jz + Is) − (Jx + It)`.
pub fn commutator_u(p: &InertiaParams) -> Matrix3<f64> {
    let i2 = *hat(&Vector3::y()).matrix();
    let d = gimbal_rotor_inertia(p);
    i2 * d - d * i2
}

/// Drift field `f(X)`: attitude velocity `Ĩ⁻¹ R_sᵀ μ`, no shape motion.
/// The state's velocities are ignored.
pub fn drift_field(s: &SystemState, mu: &SpatialMomentum, p: &InertiaParams) -> TangentVector {
    let body = s.attitude.transpose() * mu.0;
    TangentVector::new(locked_inverse_apply(s.shape.beta, p, &body), 0.0, 0.0)
}

/// Control fields `(g_β, g_γ)`; both annihilate the momentum map.
pub fn control_fields(s: &SystemState, p: &InertiaParams) -> (TangentVector, TangentVector) {
    let rb = gimbal_rotation(s.shape.beta);
    let d = gimbal_rotor_inertia(p);
    let field = |axis: Vector3<f64>| -locked_inverse_apply(s.shape.beta, p, &(rb * (d * axis)));
    (
        TangentVector::new(field(Vector3::y()), 1.0, 0.0),
        TangentVector::new(field(Vector3::z()), 0.0, 1.0),
    )
}

/// `f(X) + g_β(X) u_β + g_γ(X) u_γ`.
pub fn kinematic_rhs(s: &SystemState, u: &ControlRates, mu: &SpatialMomentum, p: &InertiaParams) -> TangentVector {
    let (gb, gg) = control_fields(s, p);
    drift_field(s, mu, p) + gb.scaled(u.u_beta) + gg.scaled(u.u_gamma)
}

/// Torque external to the gimbal-rotor unit, i.e. the body-frame rate of
/// change of its angular momentum.
pub fn cmg_external_torque(s: &SystemState, accel: &Acceleration, p: &InertiaParams) -> CmgTorque {
    let rb = gimbal_rotation(s.shape.beta);
    let d = gimbal_rotor_inertia(p);
    let i2 = *hat(&Vector3::y()).matrix();
    let beta_dot = s.shape.beta_dot;
    let xdot = s.shape.rate_vector();
    let omega_g = rb.transpose() * s.omega;

    let u1 = d * (omega_g + xdot);
    let u2 = commutator_u(p) * omega_g * beta_dot
        + i2 * (d * xdot) * beta_dot
        + d * (accel.shape.vector() + rb.transpose() * accel.omega_dot);
    let tau_body = s.omega.cross(&(rb * u1)) + rb * u2;
    CmgTorque { u1, u2, tau_body }
}

/// Residual of the five equations of motion at the trial acceleration
/// `accel`; zero exactly on solutions.
pub fn dynamic_residual(s: &SystemState, accel: &Acceleration, tau: &MotorTorques, p: &InertiaParams) -> Vector5 {
    let sc = p.spacecraft();
    let cmg = cmg_external_torque(s, accel, p);
    let rb = gimbal_rotation(s.shape.beta);
    let d = gimbal_rotor_inertia(p);
    let i2 = *hat(&Vector3::y()).matrix();

    // spacecraft momentum rate plus the unit's: internal torques cancel
    let balance = sc * accel.omega_dot + s.omega.cross(&(sc * s.omega)) + cmg.tau_body;
    let gimbal = (rb.transpose() * cmg.tau_body).y - tau.gimbal;

    let omega_g = rb.transpose() * s.omega;
    let u1_dot = d * (-(i2 * omega_g) * s.shape.beta_dot + rb.transpose() * accel.omega_dot + accel.shape.vector());
    let wheel = u1_dot.z - tau.wheel;

    Vector5::new(balance.x, balance.y, balance.z, gimbal, wheel)
}

/// Linear system `M a = b` for the accelerations `a = (Ω̇, β̈, γ̈)`, assembled
/// by probing [`dynamic_residual`] (which is affine in `a`).
pub fn dynamic_system(s: &SystemState, tau: &MotorTorques, p: &InertiaParams) -> (Matrix5, Vector5) {
    let r0 = dynamic_residual(s, &Acceleration::default(), tau, p);
    let mut m = Matrix5::zeros();
    for j in 0..5 {
        let e = Acceleration::from_vector5(&Vector5::ith(j, 1.0));
        let col = dynamic_residual(s, &e, tau, p) - r0;
        m.set_column(j, &col);
    }
    (m, -r0)
}

/// Solves the equations of motion for the accelerations under the given
/// motor torques.
pub fn dynamic_rhs(s: &SystemState, tau: &MotorTorques, p: &InertiaParams) -> Result<StateDerivative> {
    let (m, b) = dynamic_system(s, tau, p);
    let sym = (m + m.transpose()) * 0.5;
    let chol = sym.cholesky().ok_or(Error::NotPositiveDefinite("dynamic mass matrix"))?;
    let a = chol.solve(&b);
    Ok(StateDerivative {
        velocity: s.velocity(),
        acceleration: Acceleration::from_vector5(&a),
    })
}

/// Motor torques that produce the shape acceleration `xddot`, together with
/// the resulting `Ω̇`.
pub fn required_motor_torques(
    s: &SystemState,
    xddot: &ShapeAccel,
    p: &InertiaParams,
) -> Result<(MotorTorques, Vector3<f64>)> {
    let free = MotorTorques::default();
    let trial = Acceleration { omega_dot: Vector3::zeros(), shape: *xddot };
    let r0 = dynamic_residual(s, &trial, &free, p);
    let chol = locked_body_inertia(s.shape.beta, p)
        .cholesky()
        .ok_or(Error::NotPositiveDefinite("locked inertia"))?;
    let omega_dot = chol.solve(&-r0.fixed_rows::<3>(0).into_owned());
    let r = dynamic_residual(s, &Acceleration { omega_dot, shape: *xddot }, &free, p);
    Ok((MotorTorques { gimbal: r[3], wheel: r[4] }, omega_dot))
}

/// Right-hand side of `Ĩ Ω̇ + Ω̂ Ĩ Ω = …` in matrix form:
/// `−Ω̂ R_β I_gr ẋ − β̇ R_β î₂ I_gr ẋ − β̇ R_β 𝒰 R_βᵀ Ω − R_β I_gr ẍ`.
pub fn geometric_rhs(s: &SystemState, xddot: &ShapeAccel, p: &InertiaParams) -> Vector3<f64> {
    let rb = gimbal_rotation(s.shape.beta);
    let d = gimbal_rotor_inertia(p);
    let i2 = *hat(&Vector3::y()).matrix();
    let bd = s.shape.beta_dot;
    let momentum = d * s.shape.rate_vector();
    -s.omega.cross(&(rb * momentum))
        - rb * (i2 * momentum) * bd
        - rb * (commutator_u(p) * (rb.transpose() * s.omega)) * bd
        - rb * (d * xddot.vector())
}

/// The same right-hand side written in the Newtonian form, in the gimbal
/// frame basis, with `J_s = Jz + Is`, `J_t = Jx + It`, `J_g = Jx + Ig`.
pub fn srj_rhs(s: &SystemState, xddot: &ShapeAccel, p: &InertiaParams) -> Vector3<f64> {
    let w = SrjState::from_state(s);
    let g = GimbalFrame::new(w.gimbal_angle);
    let (js, jt, jg) = (p.spin_inertia(), p.transverse_inertia(), p.gimbal_inertia());
    let bd = s.shape.beta_dot;
    let wheel = w.wheel_speed;

    let spin = js * (xddot.gamma_ddot + bd * w.omega_t) - (jt - jg) * w.omega_t * bd;
    let transverse = js * (wheel + w.omega_s) * bd - (jt + jg) * w.omega_s * bd + js * wheel * w.omega_g;
    let gimbal = jg * xddot.beta_ddot - js * wheel * w.omega_t;

    -g.spin * spin - g.transverse * transverse - g.gimbal * gimbal
}

fn residual(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn term(label: &'static str, matrix_form: Vec<f64>, basis_form: Vec<f64>) -> TermExpansion {
    let residual = residual(&matrix_form, &basis_form);
    TermExpansion { label, matrix_form, basis_form, residual }
}

/// The five expansion identities relating the matrix-form terms to the
/// gimbal-frame basis, each evaluated both ways.
pub fn expand_terms(s: &SystemState, xddot: &ShapeAccel, p: &InertiaParams) -> Vec<TermExpansion> {
    let rb = gimbal_rotation(s.shape.beta);
    let d = gimbal_rotor_inertia(p);
    let i2 = *hat(&Vector3::y()).matrix();
    let g = GimbalFrame::new(s.shape.beta);
    let w = SrjState::from_state(s);
    let (a, b, c) = (p.transverse_inertia(), p.gimbal_inertia(), p.spin_inertia());
    let (bd, gd) = (s.shape.beta_dot, s.shape.gamma_dot);
    let xdot = s.shape.rate_vector();
    let u = commutator_u(p);
    let vec = |v: Vector3<f64>| v.iter().copied().collect::<Vec<_>>();

    let t1 = term(
        "R_b I_gr [0, bdd, gdd]",
        vec(rb * (d * xddot.vector())),
        vec(g.gimbal * b * xddot.beta_ddot + g.spin * c * xddot.gamma_ddot),
    );
    let t2 = term(
        "R_b hat(i2) bd I_gr [0, bd, gd]",
        vec(rb * (i2 * (d * xdot)) * bd),
        vec(g.transverse * c * gd * bd),
    );
    let t3 = term(
        "hat(Omega) R_b I_gr [0, bd, gd]",
        vec(s.omega.cross(&(rb * (d * xdot)))),
        vec(g.spin * (b * bd * w.omega_t) + g.gimbal * (-c * gd * w.omega_t)
            + g.transverse * (-b * bd * w.omega_s + c * gd * w.omega_g)),
    );
    let mut u_basis = Matrix3::zeros();
    u_basis[(0, 2)] = c - a;
    u_basis[(2, 0)] = c - a;
    let t4 = term(
        "U = hat(i2) I_gr - I_gr hat(i2)",
        u.iter().copied().collect(),
        u_basis.iter().copied().collect(),
    );
    let t5 = term(
        "R_b U R_b^T Omega bd",
        vec(rb * (u * (rb.transpose() * s.omega)) * bd),
        vec((g.transverse * w.omega_s + g.spin * w.omega_t) * ((c - a) * bd)),
    );
    vec![t1, t2, t3, t4, t5]
}

/// Analytic `d(KE)/dt` along a state derivative, from the two-body energy.
pub fn kinetic_energy_rate(s: &SystemState, accel: &Acceleration, p: &InertiaParams) -> f64 {
    let rb = gimbal_rotation(s.shape.beta);
    let d = gimbal_rotor_inertia(p);
    let i2 = *hat(&Vector3::y()).matrix();
    let omega_g = rb.transpose() * s.omega;
    let w = omega_g + s.shape.rate_vector();
    let w_dot = -(i2 * omega_g) * s.shape.beta_dot + rb.transpose() * accel.omega_dot + accel.shape.vector();
    s.omega.dot(&(p.spacecraft() * accel.omega_dot)) + w.dot(&(d * w_dot))
}

/// Analytic `dμ/dt` along a state derivative, differentiating
/// `μ = R_s (Ĩ(β) Ω + R_β I_gr ẋ)` by the product rule.
pub fn momentum_rate(s: &SystemState, accel: &Acceleration, p: &InertiaParams) -> Vector3<f64> {
    let rb = gimbal_rotation(s.shape.beta);
    let d = gimbal_rotor_inertia(p);
    let i2 = *hat(&Vector3::y()).matrix();
    let bd = s.shape.beta_dot;
    let xdot = s.shape.rate_vector();
    let locked = locked_body_inertia(s.shape.beta, p);
    let body = locked * s.omega + rb * (d * xdot);
    let locked_rate = (rb.matrix() * commutator_u(p) * rb.matrix().transpose()) * bd;
    let body_rate = locked_rate * s.omega
        + locked * accel.omega_dot
        + rb * (i2 * (d * xdot)) * bd
        + rb * (d * accel.shape.vector());
    s.attitude * (s.omega.cross(&body) + body_rate)
}
