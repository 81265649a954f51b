//! Seeded generators of random parameters and states for property checks.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;

use crate::liegroup::Rotation;
use crate::model::{InertiaParams, ShapeState, SystemState};

/// Haar-uniform rotation (Shoemake's subgroup algorithm).
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Rotation {
    let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let (w, x, y, z) = (
        a * (2.0 * PI * u2).sin(),
        a * (2.0 * PI * u2).cos(),
        b * (2.0 * PI * u3).sin(),
        b * (2.0 * PI * u3).cos(),
    );
    let m = Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    );
    Rotation::from_matrix_unchecked(m).renormalized()
}

pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Spacecraft inertia with eigenvalues in `[5, 20]` and a random principal
/// frame; rotor and gimbal moments in `[0.1, 2]`.
pub fn random_params<R: Rng + ?Sized>(rng: &mut R) -> InertiaParams {
    let q = random_rotation(rng);
    let d = Matrix3::from_diagonal(&Vector3::new(rng.gen_range(5.0..20.0), rng.gen_range(5.0..20.0), rng.gen_range(5.0..20.0)));
    let sc = q.matrix() * d * q.matrix().transpose();
    let sc = (sc + sc.transpose()) * 0.5;
    let mut scalar = || rng.gen_range(0.1..2.0);
    InertiaParams::new(scalar(), scalar(), scalar(), scalar(), scalar(), sc).expect("sampled parameters are valid")
}

/// Random configuration with a velocity `(Ω, β̇, γ̇)` of Euclidean norm `speed`.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, speed: f64) -> SystemState {
    let attitude = random_rotation(rng);
    let mut v = [0.0; 5];
    loop {
        for x in v.iter_mut() {
            *x = rng.gen_range(-1.0..1.0);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 && n <= 1.0 {
            v.iter_mut().for_each(|x| *x *= speed / n);
            break;
        }
    }
    SystemState {
        attitude,
        shape: ShapeState {
            beta: rng.gen_range(-PI..PI),
            gamma: rng.gen_range(-PI..PI),
            beta_dot: v[3],
            gamma_dot: v[4],
        },
        omega: Vector3::new(v[0], v[1], v[2]),
    }
}
