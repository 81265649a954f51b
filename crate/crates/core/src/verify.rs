//! Seeded property and oracle checks over random parameters and states.
//!
//! Every check reports the worst residual seen over all trials together with
//! its tolerance, so a run reads as a table.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::connection::{horizontal_lift, local_connection_form, mechanical_connection, split};
use crate::dynamics::{
    control_fields, dynamic_rhs, dynamic_system, expand_terms, geometric_rhs, kinematic_rhs, kinetic_energy_rate,
    required_motor_torques, srj_rhs, MotorTorques, ShapeAccel,
};
use crate::liegroup::{exp_so3, hat, log_so3, Rotation};
use crate::model::{
    body_momentum, gimbal_rotation, gimbal_rotor_inertia, kinetic_energy, metric_matrix, momentum_map, InertiaParams,
    SpatialMomentum, SystemState,
};
use crate::sampling::{random_params, random_rotation, random_state, random_unit_vector};

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyRow {
    pub name: &'static str,
    pub residual: f64,
    pub tolerance: f64,
}

impl VerifyRow {
    pub fn passed(&self) -> bool {
        self.residual < self.tolerance
    }
}

struct Table(Vec<VerifyRow>);

impl Table {
    fn record(&mut self, name: &'static str, tolerance: f64, residual: f64) {
        match self.0.iter_mut().find(|r| r.name == name) {
            Some(row) => row.residual = row.residual.max(residual),
            None => self.0.push(VerifyRow { name, residual, tolerance }),
        }
    }
}

fn random_vector(rng: &mut ChaCha8Rng, scale: f64) -> Vector3<f64> {
    Vector3::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale), rng.gen_range(-scale..scale))
}

/// Runs every check `trials` times on states drawn from `seed`.
pub fn verify_suite(seed: u64, trials: usize) -> Vec<VerifyRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Table(Vec::new());
    for _ in 0..trials {
        let p = random_params(&mut rng);
        let s = random_state(&mut rng, 1.0);
        let v = s.velocity();
        let m = random_rotation(&mut rng);

        // rotations
        let angle = rng.gen_range(0.0..std::f64::consts::PI - 1e-3);
        let axis_angle = random_unit_vector(&mut rng) * angle;
        let r = exp_so3(&axis_angle);
        t.record("exp lands on SO(3)", 1e-13, r.orthonormality_error());
        t.record("log inverts exp", 1e-10, (log_so3(&r) - axis_angle).amax());
        let w = random_vector(&mut rng, 1.0);
        let conj = m.matrix() * hat(&w).matrix() * m.matrix().transpose();
        t.record("adjoint is conjugation", 1e-13, (conj - hat(&(m * w)).matrix()).amax());

        // metric and momentum
        let ke = kinetic_energy(&s, &p);
        let quad = metric_matrix(s.shape.beta, &p).quadratic_form(&v);
        t.record("metric quadratic form is 2 KE", 1e-12, (quad - 2.0 * ke).abs() / ke.max(1.0));
        let rb = gimbal_rotation(s.shape.beta);
        let two_body = s.attitude
            * (p.spacecraft() * s.omega
                + rb * (gimbal_rotor_inertia(&p) * (rb.transpose() * s.omega + s.shape.rate_vector())));
        t.record("momentum is the two-body sum", 1e-13, (momentum_map(&s, &p).0 - two_body).amax());
        let shifted = momentum_map(&s.rotated(&m), &p).0;
        t.record("momentum map is equivariant", 1e-12, (shifted - m * momentum_map(&s, &p).0).amax());

        // kinematic model
        let (gb, gg) = control_fields(&s, &p);
        let control = momentum_map(&s.with_velocity(&gb), &p).0.amax().max(momentum_map(&s.with_velocity(&gg), &p).0.amax());
        t.record("control fields carry no momentum", 1e-12, control);
        let mu = SpatialMomentum(random_vector(&mut rng, 3.0));
        let u = crate::dynamics::ControlRates { u_beta: rng.gen_range(-2.0..2.0), u_gamma: rng.gen_range(-50.0..50.0) };
        let kin = kinematic_rhs(&s, &u, &mu, &p);
        t.record("kinematic model reproduces mu", 1e-12, (momentum_map(&s.with_velocity(&kin), &p).0 - mu.0).amax());

        // dynamics
        let tau = MotorTorques { gimbal: rng.gen_range(-1.0..1.0), wheel: rng.gen_range(-1.0..1.0) };
        let (sys, _) = dynamic_system(&s, &tau, &p);
        t.record("system matrix is the metric", 1e-13, (sys - metric_matrix(s.shape.beta, &p).0).amax());
        match dynamic_rhs(&s, &tau, &p) {
            Ok(d) => {
                let power = tau.gimbal * s.shape.beta_dot + tau.wheel * s.shape.gamma_dot;
                t.record("power balance", 1e-10, (kinetic_energy_rate(&s, &d.acceleration, &p) - power).abs());
                match required_motor_torques(&s, &d.acceleration.shape, &p) {
                    Ok((back, omega_dot)) => {
                        let err = (back.gimbal - tau.gimbal)
                            .abs()
                            .max((back.wheel - tau.wheel).abs())
                            .max((omega_dot - d.acceleration.omega_dot).amax());
                        t.record("required torques invert dynamics", 1e-11, err);
                    }
                    Err(_) => t.record("required torques invert dynamics", 1e-11, f64::INFINITY),
                }
            }
            Err(_) => t.record("power balance", 1e-10, f64::INFINITY),
        }
        let acc = ShapeAccel::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        t.record("Newtonian form matches", 1e-10, (geometric_rhs(&s, &acc, &p) - srj_rhs(&s, &acc, &p)).amax());
        let terms = expand_terms(&s, &acc, &p).iter().map(|e| e.residual).fold(0.0, f64::max);
        t.record("term expansions agree", 1e-13, terms);

        // connection
        let xi = random_vector(&mut rng, 2.0);
        let generator = crate::model::TangentVector::new(s.attitude.transpose() * xi, 0.0, 0.0);
        t.record("connection returns generators", 1e-12, (mechanical_connection(&s, &generator, &p) - xi).amax());
        let lift = horizontal_lift(s.shape.beta, (rng.gen_range(-3.0..3.0), rng.gen_range(-30.0..30.0)), &p);
        t.record("horizontal lifts carry no momentum", 1e-12, momentum_map(&s.with_velocity(&lift), &p).0.norm());
        let (ver, hor) = split(&s, &v, &p);
        t.record("vertical and horizontal are orthogonal", 1e-12, metric_matrix(s.shape.beta, &p).inner(&ver, &hor).abs());
        let at_identity = SystemState { attitude: Rotation::identity(), ..s };
        let local = local_connection_form(s.shape.beta, &p).apply(&v);
        t.record("local form matches connection", 1e-12, (local - mechanical_connection(&at_identity, &v, &p)).amax());
        let moved = s.rotated(&m);
        let equi = mechanical_connection(&moved, &moved.velocity(), &p) - m * mechanical_connection(&s, &v, &p);
        t.record("connection is equivariant", 1e-12, equi.amax());
        let body = body_momentum(&s, &p);
        t.record("locked inertia maps connection to mu", 1e-12, {
            let alpha = mechanical_connection(&s, &v, &p);
            (crate::model::locked_inertia_tensor(&s, &p) * alpha - s.attitude * body).amax()
        });
    }
    t.0
}

/// Worst disagreement between the geometric and Newtonian right-hand sides,
/// and per-term expansion residuals, over random states.
#[derive(Debug, Clone, PartialEq)]
pub struct SrjComparison {
    pub rhs_residual_max: f64,
    pub terms: Vec<(&'static str, f64)>,
}

impl SrjComparison {
    pub fn term_residual_max(&self) -> f64 {
        self.terms.iter().map(|t| t.1).fold(0.0, f64::max)
    }
}

/// Samples `trials` states (with fresh parameters unless `params` is given)
/// and compares the two forms of the attitude equation.
pub fn compare_srj(params: Option<&InertiaParams>, seed: u64, trials: usize) -> SrjComparison {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SrjComparison { rhs_residual_max: 0.0, terms: Vec::new() };
    for _ in 0..trials {
        let p = match params {
            Some(p) => *p,
            None => random_params(&mut rng),
        };
        let speed = rng.gen_range(0.1..10.0);
        let s = random_state(&mut rng, speed);
        let acc = ShapeAccel::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let diff = (geometric_rhs(&s, &acc, &p) - srj_rhs(&s, &acc, &p)).amax();
        out.rhs_residual_max = out.rhs_residual_max.max(diff);
        for e in expand_terms(&s, &acc, &p) {
            match out.terms.iter_mut().find(|t| t.0 == e.label) {
                Some(t) => t.1 = t.1.max(e.residual),
                None => out.terms.push((e.label, e.residual)),
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_and_is_deterministic() {
        let a = verify_suite(3, 200);
        assert!(a.len() >= 15);
        for row in &a {
            assert!(row.passed(), "{row:?}");
        }
        assert_eq!(a, verify_suite(3, 200));
    }

    #[test]
    fn srj_comparison_meets_tolerances() {
        let c = compare_srj(None, 42, 2000);
        assert_eq!(c.terms.len(), 5);
        assert!(c.rhs_residual_max < 1e-10);
        assert!(c.term_residual_max() < 1e-13);
    }
}
