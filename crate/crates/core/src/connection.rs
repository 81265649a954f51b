//! Mechanical connection of the spacecraft–gimbal bundle `Q = SO(3) × S¹ × S¹`
//! over the shape space `(β, γ)`.
//!
//! Tangent vectors are left-trivialized: `v = (Ω, β̇, γ̇)` with `Ṙ_s = R_s Ω̂`.
//! The connection value is spatial,
//!
//! ```text
//! α(q, v) = 𝕀(q)⁻¹ μ(q, v) = R_s A(β) v,    A(β) = [ I₃ | Ĩ(β)⁻¹ B(β) ]
//! ```
//!
//! with `B(β) = [(Jx+Ig) g, (Jz+Is) s_β]`. Under the left action
//! `(M, (R_s, x)) ↦ (M R_s, x)` body velocities are unchanged and the value
//! rotates, `α ↦ M α`. The vertical space is `{(Ω, 0, 0)}`; the horizontal space
//! is the metric-orthogonal complement, equivalently the zero-momentum
//! velocities `(−Ĩ⁻¹ B ẋ, ẋ)`.

use nalgebra::{Matrix3, Matrix3x5, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::integrators::{simulate, Driver, IntegratorConfig, SampledShapePath, Scheme, ShapePath, Trajectory};
use crate::liegroup::{hat, log_so3, Rotation};
use crate::model::{
    coupling_matrix, locked_body_inertia, locked_inertia_tensor, momentum_map, reflected_inertia, transverse_axis,
    InertiaParams, ShapeState, SpatialMomentum, SystemState,
};

pub use crate::model::TangentVector;

/// Largest endpoint mismatch accepted by [`holonomy`].
pub const LOOP_CLOSURE_TOLERANCE: f64 = 1e-12;

/// The 3×5 local connection form `A(β)` acting on body velocities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalConnection(pub Matrix3x5<f64>);

impl LocalConnection {
    pub fn matrix(&self) -> &Matrix3x5<f64> {
        &self.0
    }

    pub fn apply(&self, v: &TangentVector) -> Vector3<f64> {
        self.0 * v.to_vector5()
    }
}

fn locked_inverse(beta: f64, p: &InertiaParams) -> Matrix3<f64> {
    locked_body_inertia(beta, p)
        .cholesky()
        .expect("locked inertia of a valid parameter set is positive definite")
        .inverse()
}

/// `α = 𝕀(q)⁻¹ μ(q, v)`, a spatial angular velocity. The velocities stored in
/// `s` are ignored; only its configuration is used.
pub fn mechanical_connection(s: &SystemState, v: &TangentVector, p: &InertiaParams) -> Vector3<f64> {
    let mu = momentum_map(&s.with_velocity(v), p);
    locked_inertia_tensor(s, p)
        .cholesky()
        .expect("locked inertia of a valid parameter set is positive definite")
        .solve(&mu.0)
}

pub fn local_connection_form(beta: f64, p: &InertiaParams) -> LocalConnection {
    let mut a = Matrix3x5::zeros();
    a.fixed_view_mut::<3, 3>(0, 0).copy_from(&Matrix3::identity());
    a.fixed_view_mut::<3, 2>(0, 3).copy_from(&(locked_inverse(beta, p) * coupling_matrix(beta, p)));
    LocalConnection(a)
}

/// `dA/dβ`, using `d(Ĩ⁻¹)/dβ = −Ĩ⁻¹ (dĨ/dβ) Ĩ⁻¹` and `dĨ/dβ = [ĝ, R_β I_gr R_βᵀ]`.
pub fn local_connection_form_derivative(beta: f64, p: &InertiaParams) -> LocalConnection {
    let inv = locked_inverse(beta, p);
    let g = *hat(&Vector3::y()).matrix();
    let reflected = reflected_inertia(beta, p);
    let d_locked = g * reflected - reflected * g;
    let coupling = coupling_matrix(beta, p);
    let mut d_coupling = nalgebra::Matrix3x2::zeros();
    d_coupling.set_column(1, &(transverse_axis(beta) * p.spin_inertia()));
    let block = -inv * d_locked * inv * coupling + inv * d_coupling;
    let mut a = Matrix3x5::zeros();
    a.fixed_view_mut::<3, 2>(0, 3).copy_from(&block);
    LocalConnection(a)
}

/// Zero-momentum velocity `(−Ĩ⁻¹ B ẋ, ẋ)` over the shape rates `ẋ`.
pub fn horizontal_lift(beta: f64, rates: (f64, f64), p: &InertiaParams) -> TangentVector {
    let x = Vector2::new(rates.0, rates.1);
    let omega = -(locked_inverse(beta, p) * (coupling_matrix(beta, p) * x));
    TangentVector::new(omega, rates.0, rates.1)
}

/// `v = vertical + horizontal`, with the vertical part `(A(β) v, 0, 0)`.
pub fn split(s: &SystemState, v: &TangentVector, p: &InertiaParams) -> (TangentVector, TangentVector) {
    let horizontal = horizontal_lift(s.shape.beta, (v.beta_dot, v.gamma_dot), p);
    let vertical = TangentVector::new(v.omega - horizontal.omega, 0.0, 0.0);
    (vertical, horizontal)
}

/// Body angular velocity `Ĩ⁻¹ R_sᵀ μ + lift(β, ẋ)` of the reconstruction
/// equation at the configuration and shape rates of `s`.
pub fn reconstruction_velocity(s: &SystemState, mu: &SpatialMomentum, p: &InertiaParams) -> Vector3<f64> {
    let inv = locked_inverse(s.shape.beta, p);
    let rates = Vector2::new(s.shape.beta_dot, s.shape.gamma_dot);
    inv * (s.attitude.transpose() * mu.0 - coupling_matrix(s.shape.beta, p) * rates)
}

/// Integrates the attitude along `path` from `r0` with the simulator's
/// integrator, returning the full trajectory.
pub fn reconstruct_path(
    path: &dyn ShapePath,
    mu: &SpatialMomentum,
    r0: &Rotation,
    cfg: &IntegratorConfig,
    p: &InertiaParams,
) -> Result<Trajectory> {
    let initial = SystemState { attitude: *r0, shape: path.sample(path.start()).state(), omega: Vector3::zeros() };
    simulate(&initial, &Driver::Reconstruct { path, mu: *mu }, cfg, p)
}

/// Attitudes at the path's sample times, stepping once per sample interval.
pub fn reconstruct(
    shape_path: &SampledShapePath,
    mu: &SpatialMomentum,
    r0: &Rotation,
    p: &InertiaParams,
) -> Result<Vec<Rotation>> {
    if shape_path.start() != 0.0 {
        let shifted = SampledShapePath::new(
            &shape_path.times().map(|t| t - shape_path.start()).collect::<Vec<_>>(),
            shape_path.samples().to_vec(),
        )?;
        return reconstruct(&shifted, mu, r0, p);
    }
    let cfg = IntegratorConfig {
        dt: shape_path.step(),
        steps: shape_path.len() - 1,
        scheme: Scheme::LieRk4,
        reproject_every: 100,
    };
    let traj = reconstruct_path(shape_path, mu, r0, &cfg, p)?;
    Ok(traj.states.into_iter().map(|s| s.attitude).collect())
}

/// Net zero-momentum rotation `log(R₀ᵀ R_end)` around a closed shape loop.
pub fn holonomy(shape_loop: &SampledShapePath, p: &InertiaParams) -> Result<Vector3<f64>> {
    let gap = shape_loop.closure_gap();
    if !(gap <= LOOP_CLOSURE_TOLERANCE) {
        return Err(Error::OpenLoop { gap });
    }
    let r = reconstruct(shape_loop, &SpatialMomentum::zero(), &Rotation::identity(), p)?;
    Ok(log_so3(r.last().expect("a sampled path has at least two samples")))
}

/// Shape state at rest at `(β, γ)`.
pub fn rest_shape(beta: f64, gamma: f64) -> ShapeState {
    ShapeState { beta, gamma, ..Default::default() }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{PI, TAU};

    use nalgebra::Vector3;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::integrators::{FnShapePath, ShapeSample};
    use crate::liegroup::exp_so3;
    use crate::model::metric_matrix;
    use crate::sampling::{random_params, random_rotation, random_state};

    fn params() -> InertiaParams {
        InertiaParams::new(0.4, 1.2, 0.3, 0.5, 0.2, Matrix3::new(12.0, 0.5, -0.3, 0.5, 9.0, 0.2, -0.3, 0.2, 15.0)).unwrap()
    }

    fn diag_params() -> InertiaParams {
        InertiaParams::new(0.4, 1.2, 0.3, 0.5, 0.2, Matrix3::from_diagonal(&Vector3::new(12.0, 9.0, 15.0))).unwrap()
    }

    // One side of the square: C² ramp from a to b over unit time.
    fn ramp(a: f64, b: f64, tau: f64, side_time: f64) -> (f64, f64, f64) {
        let s = tau - (TAU * tau).sin() / TAU;
        let sd = 1.0 - (TAU * tau).cos();
        let sdd = TAU * (TAU * tau).sin();
        (a + (b - a) * s, (b - a) * sd / side_time, (b - a) * sdd / (side_time * side_time))
    }

    fn square_loop(db: f64, dg: f64, side_time: f64) -> impl Fn(f64) -> ShapeSample + Sync {
        move |t: f64| {
            let side = ((t / side_time).floor() as i64).clamp(0, 3);
            let tau = (t / side_time - side as f64).clamp(0.0, 1.0);
            let mut out = ShapeSample::default();
            let corners = [(0.0, 0.0), (db, 0.0), (db, dg), (0.0, dg), (0.0, 0.0)];
            let (b0, g0) = corners[side as usize];
            let (b1, g1) = corners[side as usize + 1];
            let (b, bd, bdd) = ramp(b0, b1, tau, side_time);
            let (g, gd, gdd) = ramp(g0, g1, tau, side_time);
            out.beta = b;
            out.beta_dot = bd;
            out.beta_ddot = bdd;
            out.gamma = g;
            out.gamma_dot = gd;
            out.gamma_ddot = gdd;
            out
        }
    }

    fn sampled_square(db: f64, dg: f64, side_time: f64, step: f64) -> SampledShapePath {
        let f = square_loop(db, dg, side_time);
        let n = (4.0 * side_time / step).round() as usize;
        SampledShapePath::from_path(&FnShapePath::new(0.0, 4.0 * side_time, f), 0.0, step, n)
    }

    #[test]
    fn identity_block_and_lift_kernel() {
        let p = params();
        let a = local_connection_form(0.7, &p);
        let v = TangentVector::new(Vector3::new(1.0, -2.0, 0.5), 0.0, 0.0);
        assert_eq!(a.apply(&v), v.omega);
        let h = horizontal_lift(0.7, (0.3, -1.1), &p);
        assert!(a.apply(&h).amax() < 1e-13);
        assert_eq!(horizontal_lift(0.7, (0.0, 0.0), &p), TangentVector::zero());
    }

    #[test]
    fn lifts_are_independent() {
        let p = params();
        let m = nalgebra::Matrix5x2::from_columns(&[
            horizontal_lift(0.2, (1.0, 0.0), &p).to_vector5(),
            horizontal_lift(0.2, (0.0, 1.0), &p).to_vector5(),
        ]);
        assert_eq!(m.rank(1e-12), 2);
    }

    #[test]
    fn split_examples() {
        let p = params();
        let s = SystemState { shape: rest_shape(0.4, 1.0), ..Default::default() };
        let v = TangentVector::new(Vector3::new(0.3, 0.2, -0.1), 0.0, 0.0);
        let (ver, hor) = split(&s, &v, &p);
        assert_eq!(ver, v);
        assert_eq!(hor, TangentVector::zero());
        let h = horizontal_lift(0.4, (0.5, 2.0), &p);
        let (ver, hor) = split(&s, &h, &p);
        assert!(ver.to_vector5().amax() < 1e-15);
        assert_eq!(hor, h);
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let p = params();
        let h = 1e-6;
        for k in 0..50 {
            let beta = -PI + TAU * k as f64 / 50.0;
            let fd = (local_connection_form(beta + h, &p).0 - local_connection_form(beta - h, &p).0) / (2.0 * h);
            let an = local_connection_form_derivative(beta, &p).0;
            assert!((fd - an).amax() < 1e-5, "beta {beta}");
        }
    }

    #[test]
    fn constant_shape_zero_momentum_stays_put() {
        let p = params();
        let r0 = exp_so3(&Vector3::new(0.1, 0.2, 0.3));
        let times: Vec<f64> = (0..=100).map(|k| k as f64 * 0.01).collect();
        let path = SampledShapePath::new(&times, vec![rest_shape(0.3, 1.0); 101]).unwrap();
        let r = reconstruct(&path, &SpatialMomentum::zero(), &r0, &p).unwrap();
        assert_eq!(r.len(), 101);
        assert!(r.iter().all(|x| (x.matrix() - r0.matrix()).amax() < 1e-15));
    }

    #[test]
    fn constant_shape_spins_about_momentum_axis() {
        // β = 0: Ĩ is diagonal, so μ along x spins the body about x at |μ|/Ĩ₁₁
        let p = diag_params();
        let locked = locked_body_inertia(0.0, &p);
        let mu = SpatialMomentum(Vector3::new(3.0, 0.0, 0.0));
        let times: Vec<f64> = (0..=1000).map(|k| k as f64 * 1e-3).collect();
        let path = SampledShapePath::new(&times, vec![rest_shape(0.0, 0.0); 1001]).unwrap();
        let r = reconstruct(&path, &mu, &Rotation::identity(), &p).unwrap();
        let want = exp_so3(&Vector3::new(3.0 / locked[(0, 0)], 0.0, 0.0));
        assert!(r.last().unwrap().geodesic_distance(&want) < 1e-12);
    }

    #[test]
    fn reconstruct_rejects_nonuniform_sampling() {
        let err = SampledShapePath::new(&[0.0, 0.1, 0.3], vec![rest_shape(0.0, 0.0); 3]).unwrap_err();
        assert!(matches!(err, Error::NonUniformSampling(_)));
    }

    #[test]
    fn holonomy_rejects_open_paths() {
        let p = params();
        let path = sampled_square(0.5, 5.0, 1.0, 1e-2);
        let open = SampledShapePath::new(
            &path.times().take(150).collect::<Vec<_>>(),
            path.samples()[..150].to_vec(),
        )
        .unwrap();
        assert!(matches!(holonomy(&open, &p), Err(Error::OpenLoop { .. })));
    }

    #[test]
    fn square_loop_has_nontrivial_holonomy() {
        let p = params();
        let h = holonomy(&sampled_square(0.5, 5.0, 1.0, 1e-3), &p).unwrap();
        assert!(h.norm() > 1e-3, "{h}");
    }

    #[test]
    fn zero_area_loop_has_no_holonomy() {
        let p = params();
        let f = |t: f64| {
            let (b, bd, bdd) = if t < 1.0 { ramp(0.0, 0.8, t, 1.0) } else { ramp(0.8, 0.0, t - 1.0, 1.0) };
            ShapeSample { beta: b, beta_dot: bd, beta_ddot: bdd, gamma: 0.3, ..Default::default() }
        };
        let path = SampledShapePath::from_path(&FnShapePath::new(0.0, 2.0, f), 0.0, 1e-3, 2000);
        let h = holonomy(&path, &p).unwrap();
        assert!(h.norm() < 1e-10, "{h}");
    }

    #[test]
    fn loop_twice_and_reversed() {
        let p = params();
        let once = sampled_square(0.5, 5.0, 1.0, 1e-3);
        let h1 = exp_so3(&holonomy(&once, &p).unwrap());
        let h2 = exp_so3(&holonomy(&once.concat(&once).unwrap(), &p).unwrap());
        assert!(h2.geodesic_distance(&(h1 * h1)) < 1e-9);
        let back = exp_so3(&holonomy(&once.reversed(), &p).unwrap());
        assert!(back.geodesic_distance(&h1.transpose()) < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn generators_are_reproduced(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_params(&mut rng);
            let s = random_state(&mut rng, 1.0);
            let xi = Vector3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let v = TangentVector::new(s.attitude.transpose() * xi, 0.0, 0.0);
            prop_assert!((mechanical_connection(&s, &v, &p) - xi).amax() < 1e-12);
        }

        #[test]
        fn lifts_carry_no_momentum(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_params(&mut rng);
            let s = random_state(&mut rng, 1.0);
            let rates = (rng.gen_range(-5.0..5.0), rng.gen_range(-50.0..50.0));
            let h = horizontal_lift(s.shape.beta, rates, &p);
            prop_assert_eq!((h.beta_dot, h.gamma_dot), rates);
            prop_assert!(momentum_map(&s.with_velocity(&h), &p).0.amax() < 1e-12);
            prop_assert!(mechanical_connection(&s, &h, &p).amax() < 1e-12);
        }

        #[test]
        fn value_is_inverse_locked_inertia_of_momentum(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_params(&mut rng);
            let s = random_state(&mut rng, 2.0);
            let v = s.velocity();
            let alpha = mechanical_connection(&s, &v, &p);
            let mu = momentum_map(&s, &p).0;
            prop_assert!((locked_inertia_tensor(&s, &p) * alpha - mu).amax() < 1e-12 * mu.norm().max(1.0));
        }

        #[test]
        fn local_form_agrees_at_identity(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_params(&mut rng);
            let mut s = random_state(&mut rng, 2.0);
            s.attitude = Rotation::identity();
            let v = s.velocity();
            let a = local_connection_form(s.shape.beta, &p);
            prop_assert!((a.apply(&v) - mechanical_connection(&s, &v, &p)).amax() < 1e-12);
            // and the spatial value is R_s A v in general
            let r = random_rotation(&mut rng);
            let moved = SystemState { attitude: r, ..s };
            prop_assert!((r * a.apply(&v) - mechanical_connection(&moved, &v, &p)).amax() < 1e-12);
        }

        #[test]
        fn value_is_equivariant(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_params(&mut rng);
            let s = random_state(&mut rng, 2.0);
            let m = random_rotation(&mut rng);
            let v = s.velocity();
            let moved = s.rotated(&m);
            let lhs = mechanical_connection(&moved, &moved.velocity(), &p);
            prop_assert!((lhs - m * mechanical_connection(&s, &v, &p)).amax() < 1e-12);
        }

        #[test]
        fn split_is_orthogonal_and_idempotent(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_params(&mut rng);
            let s = random_state(&mut rng, 2.0);
            let v = s.velocity();
            let (ver, hor) = split(&s, &v, &p);
            prop_assert_eq!((ver.beta_dot, ver.gamma_dot), (0.0, 0.0));
            prop_assert!(((ver + hor).to_vector5() - v.to_vector5()).amax() < 1e-14);
            prop_assert!(metric_matrix(s.shape.beta, &p).inner(&ver, &hor).abs() < 1e-12);
            let (ver2, hor2) = split(&s, &ver, &p);
            prop_assert_eq!(ver2, ver);
            prop_assert_eq!(hor2, TangentVector::zero());
        }
    }
}
