//! Inertia assembly, kinetic-energy metric and momentum map for a spacecraft
//! carrying one variable-speed control moment gyroscope.
//!
//! The configuration space is `SO(3) × S¹ × S¹` with coordinates
//! `(R_s, β, γ)`: spacecraft attitude, gimbal angle and rotor angle. The gimbal
//! rotates about the second body axis, `R_β = exp(β î₂)`, and the rotor spins
//! about the third gimbal axis. Velocities are left-trivialized: the attitude
//! rate is `Ṙ_s = R_s Ω̂_s` with `Ω_s` in the body frame.
//!
//! The gimbal and rotor are lumped into one gimbal-frame inertia
//!
//! ```text
//! I_gr = diag(Jx + It, Jx + Ig, Jz + Is)
//! ```
//!
//! whose gimbal-frame angular velocity is `R_βᵀ Ω_s + (0, β̇, γ̇)`.
//!
//! The metric 𝔾 is the un-halved mass matrix, `KE = ½ 𝔾(v, v)`, so the
//! momentum map `J` comes out as the ordinary spatial angular momentum.

use nalgebra::{Matrix3, Matrix3x2, SMatrix, SVector, Vector3};

use crate::error::{Error, Result};
use crate::liegroup::{exp_so3, Rotation};

pub type Matrix5 = SMatrix<f64, 5, 5>;
pub type Vector5 = SVector<f64, 5>;

/// Scalar inertias of the rotor and gimbal plus the spacecraft inertia.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InertiaParams {
    jx: f64,
    jz: f64,
    it: f64,
    ig: f64,
    is_g: f64,
    spacecraft: Matrix3<f64>,
}

impl InertiaParams {
    /// `jx`, `jz`: rotor transverse and spin moments. `it`, `ig`, `is_g`:
    /// gimbal-frame moments about the transverse, gimbal and spin axes.
    /// `spacecraft` must be symmetric positive definite.
    pub fn new(jx: f64, jz: f64, it: f64, ig: f64, is_g: f64, spacecraft: Matrix3<f64>) -> Result<Self> {
        for (name, value) in [("Jx", jx), ("Jz", jz), ("It", it), ("Ig", ig), ("Is", is_g)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be positive and finite, got {value}")));
            }
        }
        if !spacecraft.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidParams("spacecraft inertia has non-finite entries".into()));
        }
        let asym = (spacecraft - spacecraft.transpose()).amax();
        if asym > 1e-12 * spacecraft.amax().max(1.0) {
            return Err(Error::InvalidParams(format!("spacecraft inertia not symmetric (asymmetry {asym:e})")));
        }
        if spacecraft.cholesky().is_none() {
            return Err(Error::NotPositiveDefinite("spacecraft inertia"));
        }
        Ok(Self { jx, jz, it, ig, is_g, spacecraft })
    }

    pub fn jx(&self) -> f64 {
        self.jx
    }
    pub fn jz(&self) -> f64 {
        self.jz
    }
    pub fn it(&self) -> f64 {
        self.it
    }
    pub fn ig(&self) -> f64 {
        self.ig
    }
    pub fn is_g(&self) -> f64 {
        self.is_g
    }
    pub fn spacecraft(&self) -> &Matrix3<f64> {
        &self.spacecraft
    }

    /// `Jx + It`, lumped moment about the gimbal transverse axis.
    pub fn transverse_inertia(&self) -> f64 {
        self.jx + self.it
    }

    /// `Jx + Ig`, lumped moment about the gimbal axis.
    pub fn gimbal_inertia(&self) -> f64 {
        self.jx + self.ig
    }

    /// `Jz + Is`, lumped moment about the spin axis.
    pub fn spin_inertia(&self) -> f64 {
        self.jz + self.is_g
    }
}

/// Shape (base) coordinates and their rates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ShapeState {
    pub beta: f64,
    pub gamma: f64,
    pub beta_dot: f64,
    pub gamma_dot: f64,
}

impl ShapeState {
    /// `(0, β̇, γ̇)`, the shape rate as a gimbal-frame angular velocity.
    pub fn rate_vector(&self) -> Vector3<f64> {
        Vector3::new(0.0, self.beta_dot, self.gamma_dot)
    }
}

/// Full phase-space point: attitude, shape, body angular velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SystemState {
    pub attitude: Rotation,
    pub shape: ShapeState,
    pub omega: Vector3<f64>,
}

impl SystemState {
    pub fn velocity(&self) -> TangentVector {
        TangentVector {
            omega: self.omega,
            beta_dot: self.shape.beta_dot,
            gamma_dot: self.shape.gamma_dot,
        }
    }

    /// Same configuration, velocities replaced by `v`.
    pub fn with_velocity(&self, v: &TangentVector) -> SystemState {
        SystemState {
            attitude: self.attitude,
            shape: ShapeState {
                beta_dot: v.beta_dot,
                gamma_dot: v.gamma_dot,
                ..self.shape
            },
            omega: v.omega,
        }
    }

    /// Left action of the symmetry group: `(R_s, x) ↦ (M R_s, x)`.
    pub fn rotated(&self, m: &Rotation) -> SystemState {
        SystemState {
            attitude: *m * self.attitude,
            ..*self
        }
    }
}

/// Tangent vector at a configuration in left-trivialized coordinates
/// `(Ω, β̇, γ̇)`: the attitude part is `R_s Ω̂`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TangentVector {
    pub omega: Vector3<f64>,
    pub beta_dot: f64,
    pub gamma_dot: f64,
}

impl TangentVector {
    pub fn new(omega: Vector3<f64>, beta_dot: f64, gamma_dot: f64) -> Self {
        Self { omega, beta_dot, gamma_dot }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn to_vector5(&self) -> Vector5 {
        Vector5::new(self.omega.x, self.omega.y, self.omega.z, self.beta_dot, self.gamma_dot)
    }

    pub fn from_vector5(v: &Vector5) -> Self {
        Self::new(Vector3::new(v[0], v[1], v[2]), v[3], v[4])
    }

    pub fn shape_rates(&self) -> nalgebra::Vector2<f64> {
        nalgebra::Vector2::new(self.beta_dot, self.gamma_dot)
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self::new(self.omega * k, self.beta_dot * k, self.gamma_dot * k)
    }
}

impl std::ops::Add for TangentVector {
    type Output = TangentVector;

    fn add(self, rhs: TangentVector) -> TangentVector {
        TangentVector::new(self.omega + rhs.omega, self.beta_dot + rhs.beta_dot, self.gamma_dot + rhs.gamma_dot)
    }
}

impl std::ops::Sub for TangentVector {
    type Output = TangentVector;

    fn sub(self, rhs: TangentVector) -> TangentVector {
        TangentVector::new(self.omega - rhs.omega, self.beta_dot - rhs.beta_dot, self.gamma_dot - rhs.gamma_dot)
    }
}

/// Total spatial angular momentum, the value of the momentum map.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SpatialMomentum(pub Vector3<f64>);

impl SpatialMomentum {
    pub fn zero() -> Self {
        Self(Vector3::zeros())
    }
}

/// Mass matrix over `(Ω, β̇, γ̇)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricMatrix5(pub Matrix5);

impl MetricMatrix5 {
    pub fn matrix(&self) -> &Matrix5 {
        &self.0
    }

    /// `𝔾(a, b) = aᵀ M b`.
    pub fn inner(&self, a: &TangentVector, b: &TangentVector) -> f64 {
        a.to_vector5().dot(&(self.0 * b.to_vector5()))
    }

    pub fn quadratic_form(&self, v: &TangentVector) -> f64 {
        self.inner(v, v)
    }
}

pub fn gimbal_rotor_inertia(p: &InertiaParams) -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::new(p.transverse_inertia(), p.gimbal_inertia(), p.spin_inertia()))
}

/// `R_β = exp(β î₂)`, so that `Ṙ_β = R_β î₂ β̇`.
pub fn gimbal_rotation(beta: f64) -> Rotation {
    exp_so3(&Vector3::new(0.0, beta, 0.0))
}

/// Gimbal axis in the body frame, `R_β i₂ = i₂` for every β.
pub fn gimbal_axis() -> Vector3<f64> {
    Vector3::y()
}

/// Rotor spin axis in the body frame, `R_β i₃`.
pub fn spin_axis(beta: f64) -> Vector3<f64> {
    Vector3::new(beta.sin(), 0.0, beta.cos())
}

/// Gimbal transverse axis in the body frame, `R_β i₁`.
pub fn transverse_axis(beta: f64) -> Vector3<f64> {
    Vector3::new(beta.cos(), 0.0, -beta.sin())
}

/// `R_β I_gr R_βᵀ`.
pub fn reflected_inertia(beta: f64, p: &InertiaParams) -> Matrix3<f64> {
    let r = gimbal_rotation(beta);
    r.matrix() * gimbal_rotor_inertia(p) * r.matrix().transpose()
}

/// Body-frame locked inertia `Ĩ(β) = I_s + R_β I_gr R_βᵀ`.
pub fn locked_body_inertia(beta: f64, p: &InertiaParams) -> Matrix3<f64> {
    p.spacecraft + reflected_inertia(beta, p)
}

/// `[(Jx+Ig) g, (Jz+Is) s_β]`, the block coupling shape rates to attitude
/// momentum. Equal to `R_β I_gr [i₂ i₃]`.
pub fn coupling_matrix(beta: f64, p: &InertiaParams) -> Matrix3x2<f64> {
    Matrix3x2::from_columns(&[gimbal_axis() * p.gimbal_inertia(), spin_axis(beta) * p.spin_inertia()])
}

pub fn metric_matrix(beta: f64, p: &InertiaParams) -> MetricMatrix5 {
    let locked = locked_body_inertia(beta, p);
    let coupling = coupling_matrix(beta, p);
    let mut m = Matrix5::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&locked);
    m.fixed_view_mut::<3, 2>(0, 3).copy_from(&coupling);
    m.fixed_view_mut::<2, 3>(3, 0).copy_from(&coupling.transpose());
    m[(3, 3)] = p.gimbal_inertia();
    m[(4, 4)] = p.spin_inertia();
    MetricMatrix5(m)
}

/// Spacecraft plus gimbal-rotor kinetic energy, summed body by body.
pub fn kinetic_energy(s: &SystemState, p: &InertiaParams) -> f64 {
    let rb = gimbal_rotation(s.shape.beta);
    let w = rb.transpose() * s.omega + s.shape.rate_vector();
    0.5 * s.omega.dot(&(p.spacecraft * s.omega)) + 0.5 * w.dot(&(gimbal_rotor_inertia(p) * w))
}

/// Body-frame total angular momentum `Ĩ(β) Ω + R_β I_gr (0, β̇, γ̇)`.
pub fn body_momentum(s: &SystemState, p: &InertiaParams) -> Vector3<f64> {
    let rb = gimbal_rotation(s.shape.beta);
    locked_body_inertia(s.shape.beta, p) * s.omega + rb * (gimbal_rotor_inertia(p) * s.shape.rate_vector())
}

/// `μ = R_s [Ĩ(β) Ω + R_β I_gr (0, β̇, γ̇)]`.
pub fn momentum_map(s: &SystemState, p: &InertiaParams) -> SpatialMomentum {
    SpatialMomentum(s.attitude * body_momentum(s, p))
}

/// Spatial locked inertia tensor `𝕀(q) = R_s Ĩ(β) R_sᵀ`.
pub fn locked_inertia_tensor(s: &SystemState, p: &InertiaParams) -> Matrix3<f64> {
    let r = s.attitude.matrix();
    r * locked_body_inertia(s.shape.beta, p) * r.transpose()
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use nalgebra::SymmetricEigen;
    use proptest::prelude::*;

    use super::*;
    use crate::liegroup::hat;
    use crate::sampling::{random_params, random_rotation, random_state};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params_3_4_9() -> InertiaParams {
        // Jx=1, It=2, Ig=3, Jz=4, Is=5 → diag(3, 4, 9)
        InertiaParams::new(1.0, 4.0, 2.0, 3.0, 5.0, Matrix3::identity() * 10.0).unwrap()
    }

    fn sorted_eigs(m: &Matrix3<f64>) -> Vec<f64> {
        let mut e: Vec<f64> = SymmetricEigen::new(*m).eigenvalues.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        e
    }

    #[test]
    fn gimbal_rotor_inertia_examples() {
        assert_eq!(gimbal_rotor_inertia(&params_3_4_9()), Matrix3::from_diagonal(&Vector3::new(3.0, 4.0, 9.0)));
        let half = InertiaParams::new(0.5, 0.5, 0.5, 0.5, 0.5, Matrix3::identity()).unwrap();
        assert_eq!(gimbal_rotor_inertia(&half), Matrix3::identity());
        let other = InertiaParams::new(1.0, 4.0, 7.0, 11.0, 5.0, Matrix3::identity()).unwrap();
        assert_eq!(gimbal_rotor_inertia(&other)[(2, 2)], 9.0);
    }

    #[test]
    fn invalid_params_are_rejected() {
        assert!(InertiaParams::new(0.0, 1.0, 1.0, 1.0, 1.0, Matrix3::identity()).is_err());
        let mut bad = Matrix3::identity();
        bad[(1, 1)] = -2.0;
        let err = InertiaParams::new(1.0, 1.0, 1.0, 1.0, 1.0, bad).unwrap_err();
        assert_eq!(err.to_string(), "spacecraft inertia not positive definite");
        let mut asym = Matrix3::identity();
        asym[(0, 1)] = 0.1;
        assert!(InertiaParams::new(1.0, 1.0, 1.0, 1.0, 1.0, asym).is_err());
    }

    #[test]
    fn gimbal_rotation_examples() {
        assert_eq!(*gimbal_rotation(0.0).matrix(), Matrix3::identity());
        let r = gimbal_rotation(FRAC_PI_2);
        assert!((r * Vector3::z() - Vector3::x()).norm() < 1e-15);
        assert!((r * Vector3::x() + Vector3::z()).norm() < 1e-15);
        assert!((r * Vector3::y() - Vector3::y()).norm() < 1e-15);
    }

    #[test]
    fn gimbal_rotation_derivative_matches_finite_difference() {
        let h = 1e-6;
        for beta in [-2.0, -0.3, 0.0, 0.7, 2.9] {
            let fd = (gimbal_rotation(beta + h).matrix() - gimbal_rotation(beta).matrix()) / h;
            let analytic = gimbal_rotation(beta).matrix() * hat(&Vector3::y()).matrix();
            assert!((fd - analytic).amax() < 1e-5);
        }
    }

    #[test]
    fn axes_are_columns_of_gimbal_rotation() {
        for beta in [-1.0, 0.2, 2.5] {
            let r = gimbal_rotation(beta);
            assert!((r.column(0) - transverse_axis(beta)).amax() < 1e-15);
            assert!((r.column(1) - gimbal_axis()).amax() < 1e-15);
            assert!((r.column(2) - spin_axis(beta)).amax() < 1e-15);
        }
    }

    #[test]
    fn reflected_inertia_examples() {
        let p = params_3_4_9();
        assert_eq!(reflected_inertia(0.0, &p), gimbal_rotor_inertia(&p));
        assert!((reflected_inertia(1.234, &p).trace() - 16.0).abs() < 1e-13);
        // quarter turn about axis 2 swaps axes 1 and 3
        let quarter = reflected_inertia(FRAC_PI_2, &p);
        assert!((quarter - Matrix3::from_diagonal(&Vector3::new(9.0, 4.0, 3.0))).amax() < 1e-14);
    }

    #[test]
    fn locked_body_inertia_examples() {
        let p = params_3_4_9();
        assert_eq!(locked_body_inertia(0.0, &p), Matrix3::from_diagonal(&Vector3::new(13.0, 14.0, 19.0)));
        for beta in [-2.0, 0.4, 1.9] {
            let d = locked_body_inertia(beta, &p) - locked_body_inertia(0.0, &p);
            assert!(d[(1, 1)].abs() < 1e-14);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let p = random_params(&mut rng);
            let beta = rng.gen_range(-10.0..10.0);
            assert!(sorted_eigs(&locked_body_inertia(beta, &p))[0] > 0.0);
        }
    }

    #[test]
    fn metric_matrix_at_zero_gimbal_angle() {
        let p = params_3_4_9();
        let m = metric_matrix(0.0, &p);
        let col_b = m.0.fixed_view::<3, 1>(0, 3).into_owned();
        let col_g = m.0.fixed_view::<3, 1>(0, 4).into_owned();
        assert_eq!(col_b, Vector3::new(0.0, 4.0, 0.0));
        assert_eq!(col_g, Vector3::new(0.0, 0.0, 9.0));
        assert_eq!(m.0[(3, 4)], 0.0);
    }

    #[test]
    fn kinetic_energy_examples() {
        let p = params_3_4_9();
        let mut s = SystemState::default();
        assert_eq!(kinetic_energy(&s, &p), 0.0);
        s.shape.beta_dot = 1.0;
        assert!((kinetic_energy(&s, &p) - 0.5 * p.gimbal_inertia()).abs() < 1e-15);
    }

    #[test]
    fn momentum_examples() {
        let p = params_3_4_9();
        let mut s = SystemState::default();
        assert_eq!(momentum_map(&s, &p).0, Vector3::zeros());
        s.omega = Vector3::new(0.3, -0.2, 0.5);
        let expected = locked_body_inertia(0.0, &p) * s.omega;
        assert!((momentum_map(&s, &p).0 - expected).amax() < 1e-15);
        assert_eq!(body_momentum(&s, &p), momentum_map(&s, &p).0);
    }

    #[test]
    fn locked_inertia_tensor_at_identity_attitude() {
        let p = params_3_4_9();
        let s = SystemState { shape: ShapeState { beta: 0.8, ..Default::default() }, ..Default::default() };
        assert_eq!(locked_inertia_tensor(&s, &p), locked_body_inertia(0.8, &p));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn reflected_inertia_is_similarity(seed in any::<u64>(), beta in -20.0..20.0f64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_params(&mut rng);
            let got = sorted_eigs(&reflected_inertia(beta, &p));
            let mut want = vec![p.transverse_inertia(), p.gimbal_inertia(), p.spin_inertia()];
            want.sort_by(f64::total_cmp);
            for (g, w) in got.iter().zip(&want) {
                prop_assert!((g - w).abs() < 1e-10);
            }
        }

        #[test]
        fn metric_is_symmetric_and_matches_energy(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_params(&mut rng);
            let s = random_state(&mut rng, 1.0);
            let m = metric_matrix(s.shape.beta, &p);
            prop_assert!((m.0 - m.0.transpose()).amax() < 1e-15);
            prop_assert!(m.0.cholesky().is_some());
            let quad = m.quadratic_form(&s.velocity());
            prop_assert!((quad - 2.0 * kinetic_energy(&s, &p)).abs() < 1e-12);
        }

        #[test]
        fn kinetic_energy_is_left_invariant(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_params(&mut rng);
            let s = random_state(&mut rng, 1.0);
            let m = random_rotation(&mut rng);
            prop_assert!((kinetic_energy(&s.rotated(&m), &p) - kinetic_energy(&s, &p)).abs() < 1e-12);
        }

        #[test]
        fn momentum_splits_into_two_bodies(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_params(&mut rng);
            let s = random_state(&mut rng, 1.0);
            let r = s.attitude.matrix();
            let rb = gimbal_rotation(s.shape.beta);
            let spacecraft = r * (p.spacecraft() * s.omega);
            let unit = r * (rb.matrix() * (gimbal_rotor_inertia(&p) * (rb.transpose() * s.omega + s.shape.rate_vector())));
            prop_assert!((momentum_map(&s, &p).0 - (spacecraft + unit)).amax() < 1e-13);
        }

        #[test]
        fn momentum_is_equivariant(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_params(&mut rng);
            let s = random_state(&mut rng, 1.0);
            let m = random_rotation(&mut rng);
            let lhs = momentum_map(&s.rotated(&m), &p).0;
            let rhs = m * momentum_map(&s, &p).0;
            prop_assert!((lhs - rhs).amax() < 1e-13);
            prop_assert!((body_momentum(&s.rotated(&m), &p) - body_momentum(&s, &p)).amax() < 1e-13);
        }

        #[test]
        fn locked_tensor_is_the_vertical_metric(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_params(&mut rng);
            let s = random_state(&mut rng, 1.0);
            let eta = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let locked = locked_inertia_tensor(&s, &p);
            let vertical = s.with_velocity(&TangentVector::new(s.attitude.transpose() * eta, 0.0, 0.0));
            prop_assert!((eta.dot(&(locked * eta)) - 2.0 * kinetic_energy(&vertical, &p)).abs() < 1e-12);
            let e1 = sorted_eigs(&locked);
            let e0 = sorted_eigs(&locked_body_inertia(s.shape.beta, &p));
            for (a, b) in e1.iter().zip(&e0) {
                prop_assert!((a - b).abs() < 1e-11);
            }
        }
    }
}
