//! SO(3) and so(3) primitives on plain 3×3 matrices.
//!
//! Rotations are stored as full matrices. The hat map sends `v` to the skew
//! matrix with `hat(v) * w == v × w`; `exp_so3`/`log_so3` are the Rodrigues
//! formula and its inverse, with series expansions below [`SMALL_ANGLE`].
//!
//! Momentum convention: the spatial momentum is `μ = R_s · Π` where `Π` is the
//! body momentum, so the coadjoint action that carries body vectors to spatial
//! ones is plain multiplication by `R_s`. [`adjoint`] implements exactly that.

use std::ops::Mul;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Below this angle the trigonometric coefficients switch to Taylor series.
pub const SMALL_ANGLE: f64 = 1e-5;

/// Tolerance used by [`Rotation::from_matrix`].
pub const ROTATION_TOLERANCE: f64 = 1e-12;

/// Largest symmetric part accepted by [`vee`].
pub const SKEW_TOLERANCE: f64 = 1e-9;

/// Skew-symmetric 3×3 matrix, the matrix form of an so(3) element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewMatrix(Matrix3<f64>);

impl SkewMatrix {
    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix3<f64> {
        self.0
    }

    pub fn vector(&self) -> Vector3<f64> {
        Vector3::new(self.0[(2, 1)], self.0[(0, 2)], self.0[(1, 0)])
    }
}

impl Mul<Vector3<f64>> for SkewMatrix {
    type Output = Vector3<f64>;

    fn mul(self, rhs: Vector3<f64>) -> Vector3<f64> {
        self.0 * rhs
    }
}

impl Mul<Matrix3<f64>> for SkewMatrix {
    type Output = Matrix3<f64>;

    fn mul(self, rhs: Matrix3<f64>) -> Matrix3<f64> {
        self.0 * rhs
    }
}

/// Element of SO(3) stored as a 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Accepts `m` if `‖mᵀm − I‖_F` and `|det m − 1|` are both within
    /// [`ROTATION_TOLERANCE`].
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        let err = orthonormality_error(&m);
        let det = m.determinant();
        if !m.iter().all(|x| x.is_finite())
            || err > ROTATION_TOLERANCE
            || (det - 1.0).abs() > ROTATION_TOLERANCE
        {
            return Err(Error::NotARotation {
                orthonormality_error: err,
                det,
            });
        }
        Ok(Rotation(m))
    }

    /// Wraps a matrix the caller already knows to be a rotation, e.g. the
    /// product of two rotations.
    pub(crate) fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Rotation(m)
    }

    /// Rotation about one of the coordinate axes (0, 1, 2).
    pub fn about_axis(axis: usize, angle: f64) -> Self {
        let mut v = Vector3::zeros();
        v[axis] = angle;
        exp_so3(&v)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Rotation {
        Rotation(self.0.transpose())
    }

    pub fn inverse(&self) -> Rotation {
        self.transpose()
    }

    pub fn column(&self, i: usize) -> Vector3<f64> {
        self.0.column(i).into_owned()
    }

    /// `‖RᵀR − I‖_F`.
    pub fn orthonormality_error(&self) -> f64 {
        orthonormality_error(&self.0)
    }

    /// Angle of `selfᵀ · other`, in `[0, π]`.
    pub fn geodesic_distance(&self, other: &Rotation) -> f64 {
        log_so3(&(self.transpose() * *other)).norm()
    }

    /// Snaps back onto SO(3) after round-off accumulation.
    pub fn renormalized(&self) -> Rotation {
        project_to_so3(&self.0).unwrap_or(*self)
    }
}

impl Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<Vector3<f64>> for Rotation {
    type Output = Vector3<f64>;

    fn mul(self, rhs: Vector3<f64>) -> Vector3<f64> {
        self.0 * rhs
    }
}

impl Mul<&Vector3<f64>> for &Rotation {
    type Output = Vector3<f64>;

    fn mul(self, rhs: &Vector3<f64>) -> Vector3<f64> {
        self.0 * rhs
    }
}

fn orthonormality_error(m: &Matrix3<f64>) -> f64 {
    (m.transpose() * m - Matrix3::identity()).norm()
}

pub fn hat(v: &Vector3<f64>) -> SkewMatrix {
    SkewMatrix(Matrix3::new(
        0.0, -v.z, v.y, //
        v.z, 0.0, -v.x, //
        -v.y, v.x, 0.0,
    ))
}

/// Inverse of [`hat`]. Rejects matrices whose symmetric part exceeds
/// [`SKEW_TOLERANCE`] (max-abs entry of `(S + Sᵀ)/2`).
pub fn vee(s: &Matrix3<f64>) -> Result<Vector3<f64>> {
    let asymmetry = ((s + s.transpose()) * 0.5).amax();
    if !(asymmetry <= SKEW_TOLERANCE) {
        return Err(Error::NotSkew { asymmetry });
    }
    let a = (s - s.transpose()) * 0.5;
    Ok(Vector3::new(a[(2, 1)], a[(0, 2)], a[(1, 0)]))
}

/// Rodrigues formula `I + sinθ/θ K + (1−cosθ)/θ² K²`.
pub fn exp_so3(v: &Vector3<f64>) -> Rotation {
    let theta2 = v.norm_squared();
    let theta = theta2.sqrt();
    let (a, b) = if theta < SMALL_ANGLE {
        (
            1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0,
            0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0,
        )
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    let k = hat(v).into_matrix();
    Rotation(Matrix3::identity() + k * a + k * k * b)
}

/// Principal logarithm; the result has norm in `[0, π]`.
pub fn log_so3(r: &Rotation) -> Vector3<f64> {
    let m = r.matrix();
    let axial = Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
    // axial = 2 sinθ n
    let cos = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let sin = (axial.norm() * 0.5).min(1.0);
    let theta = sin.atan2(cos);

    if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        return axial * (0.5 * (1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0));
    }
    if cos > -0.99 {
        return axial * (theta / (2.0 * sin));
    }

    // Near θ = π the axial part vanishes; recover the axis from the symmetric
    // part (R + Rᵀ)/2 = cosθ I + (1 − cosθ) n nᵀ using the largest diagonal pivot.
    let sym = (m + m.transpose()) * 0.5;
    let nnt = (sym - Matrix3::identity() * cos) / (1.0 - cos);
    let pivot = (0..3)
        .max_by(|&i, &j| nnt[(i, i)].total_cmp(&nnt[(j, j)]))
        .unwrap_or(0);
    let mut n: Vector3<f64> = nnt.column(pivot).into_owned() / nnt[(pivot, pivot)].max(0.0).sqrt();
    n.normalize_mut();
    if n.dot(&axial) < 0.0 {
        n = -n;
    }
    n * theta
}

/// Adjoint action `Ad_R v = R v`, equal to `vee(R hat(v) Rᵀ)`. With the
/// momentum convention of this crate this also carries a body-frame momentum
/// to the spatial frame.
pub fn adjoint(r: &Rotation, v: &Vector3<f64>) -> Vector3<f64> {
    r * v
}

/// Nearest rotation in Frobenius norm (orthogonal polar factor).
pub fn project_to_so3(m: &Matrix3<f64>) -> Result<Rotation> {
    let det = m.determinant();
    if !(det > 0.0) || !det.is_finite() {
        return Err(Error::NonPositiveDeterminant { det });
    }
    let svd = m.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::NonPositiveDeterminant { det }),
    };
    if svd.singular_values.min() <= f64::EPSILON * svd.singular_values.max() {
        return Err(Error::NonPositiveDeterminant { det });
    }
    let mut r = u * v_t;
    // One Newton polar step cleans up the last ulps left by the SVD.
    if let Some(inv) = r.try_inverse() {
        r = (r + inv.transpose()) * 0.5;
    }
    Ok(Rotation(r))
}
