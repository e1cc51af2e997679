//! Rotations, rigid transforms and the SO(3) exponential/logarithm.
//!
//! Rotation matrices are the only public rotation representation. Entry
//! `(i, j)` of a [`Rotation3`] is row `i`, column `j`; columns are the images
//! of the basis vectors, so `R * v` rotates `v`. Tangent vectors are
//! axis-angle vectors in R³ and increments are applied on the left:
//! `R ← exp(δ) · R`.

use nalgebra::{Matrix3, SymmetricEigen, SVD};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::ops::{Mul, Neg};
use thiserror::Error;

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Tolerance on orthonormality, unit norm and rotation round trips.
pub const ROTATION_TOL: f64 = 1e-9;

/// Below this angle the series expansions are used instead of closed forms.
const SMALL_ANGLE: f64 = 1e-6;

/// Below this |sin θ| a half turn is reported with the canonical axis sign.
const PI_SIGN_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("matrix is not a proper rotation (orthogonality error {ortho_err:e}, det {det})")]
    NotARotation { ortho_err: f64, det: f64 },
    #[error("vector has zero or non-finite length")]
    ZeroVector,
}

/// A unit-length direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct UnitVec3(Vec3);

impl UnitVec3 {
    pub const X: UnitVec3 = UnitVec3(Vec3::new(1.0, 0.0, 0.0));
    pub const Y: UnitVec3 = UnitVec3(Vec3::new(0.0, 1.0, 0.0));
    pub const Z: UnitVec3 = UnitVec3(Vec3::new(0.0, 0.0, 1.0));

    /// Normalizes `v`. Fails on zero or non-finite vectors.
    pub fn new_normalize(v: Vec3) -> Result<Self, GeometryError> {
        let n = v.norm();
        if !n.is_finite() || n < 1e-300 {
            return Err(GeometryError::ZeroVector);
        }
        Ok(UnitVec3(v / n))
    }

    /// Wraps `v` without normalizing. The caller guarantees `|v| = 1`.
    pub fn new_unchecked(v: Vec3) -> Self {
        debug_assert!((v.norm() - 1.0).abs() < 1e-6);
        UnitVec3(v)
    }

    pub fn into_inner(self) -> Vec3 {
        self.0
    }

    pub fn as_vec(&self) -> &Vec3 {
        &self.0
    }

    pub fn dot(&self, other: &UnitVec3) -> f64 {
        self.0.dot(&other.0)
    }

    /// Unsigned angle in `[0, π]`.
    pub fn angle_to(&self, other: &UnitVec3) -> f64 {
        let c = self.0.cross(&other.0).norm();
        let d = self.0.dot(&other.0);
        c.atan2(d)
    }
}

impl Neg for UnitVec3 {
    type Output = UnitVec3;
    fn neg(self) -> UnitVec3 {
        UnitVec3(-self.0)
    }
}

impl TryFrom<[f64; 3]> for UnitVec3 {
    type Error = GeometryError;
    fn try_from(a: [f64; 3]) -> Result<Self, Self::Error> {
        let v = Vec3::from(a);
        if (v.norm() - 1.0).abs() > 1e-6 {
            return UnitVec3::new_normalize(v);
        }
        Ok(UnitVec3(v))
    }
}

impl From<UnitVec3> for [f64; 3] {
    fn from(u: UnitVec3) -> [f64; 3] {
        u.0.into()
    }
}

/// A proper rotation matrix (RᵀR = I, det R = +1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation3(Mat3);

impl Rotation3 {
    pub fn identity() -> Self {
        Rotation3(Mat3::identity())
    }

    /// Validates orthonormality and orientation within [`ROTATION_TOL`].
    pub fn from_matrix(m: Mat3) -> Result<Self, GeometryError> {
        let ortho_err = (m.transpose() * m - Mat3::identity()).amax();
        let det = m.determinant();
        if !(ortho_err <= ROTATION_TOL && (det - 1.0).abs() <= ROTATION_TOL) {
            return Err(GeometryError::NotARotation { ortho_err, det });
        }
        Ok(Rotation3(m))
    }

    /// Accepts a nearly orthonormal matrix and projects it onto SO(3).
    pub fn from_matrix_projected(m: Mat3) -> Result<Self, GeometryError> {
        if !m.iter().all(|x| x.is_finite()) {
            return Err(GeometryError::NotARotation {
                ortho_err: f64::NAN,
                det: f64::NAN,
            });
        }
        Ok(Rotation3(project_to_so3(&m)))
    }

    /// Builds a rotation from its three column axes, which must already be a
    /// right-handed orthonormal triple.
    pub fn from_columns(x: &Vec3, y: &Vec3, z: &Vec3) -> Result<Self, GeometryError> {
        Rotation3::from_matrix(Mat3::from_columns(&[*x, *y, *z]))
    }

    /// Row-major construction, matching the on-disk layout.
    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self, GeometryError> {
        Rotation3::from_matrix(Mat3::new(
            rows[0][0], rows[0][1], rows[0][2], rows[1][0], rows[1][1], rows[1][2], rows[2][0],
            rows[2][1], rows[2][2],
        ))
    }

    pub fn to_rows(&self) -> [[f64; 3]; 3] {
        let m = &self.0;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn column(&self, i: usize) -> Vec3 {
        self.0.column(i).into_owned()
    }

    pub fn transpose(&self) -> Rotation3 {
        Rotation3(self.0.transpose())
    }

    pub fn inverse(&self) -> Rotation3 {
        self.transpose()
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// Geodesic angle in `[0, π]`.
    pub fn angle(&self) -> f64 {
        log_so3(self).norm()
    }

    /// Geodesic distance `‖log(self · otherᵀ)‖`.
    pub fn angle_to(&self, other: &Rotation3) -> f64 {
        log_so3(&(*self * other.transpose())).norm()
    }

    /// Largest entrywise deviation of RᵀR from I, and |det − 1|.
    pub fn orthonormality_error(&self) -> f64 {
        let e = (self.0.transpose() * self.0 - Mat3::identity()).amax();
        e.max((self.0.determinant() - 1.0).abs())
    }

    /// Re-orthonormalizes accumulated round-off.
    pub fn renormalized(&self) -> Rotation3 {
        Rotation3(project_to_so3(&self.0))
    }
}

impl Default for Rotation3 {
    fn default() -> Self {
        Rotation3::identity()
    }
}

impl Mul for Rotation3 {
    type Output = Rotation3;
    fn mul(self, rhs: Rotation3) -> Rotation3 {
        Rotation3(self.0 * rhs.0)
    }
}

impl Mul<Vec3> for Rotation3 {
    type Output = Vec3;
    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

impl Mul<&Vec3> for &Rotation3 {
    type Output = Vec3;
    fn mul(self, rhs: &Vec3) -> Vec3 {
        self.0 * rhs
    }
}

/// Rigid transform `p ↦ R p + t`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PoseSE3 {
    pub rotation: Rotation3,
    pub translation: Vec3,
}

impl PoseSE3 {
    pub fn new(rotation: Rotation3, translation: Vec3) -> Self {
        PoseSE3 {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        PoseSE3::default()
    }

    pub fn from_translation(t: Vec3) -> Self {
        PoseSE3::new(Rotation3::identity(), t)
    }

    pub fn from_rotation(r: Rotation3) -> Self {
        PoseSE3::new(r, Vec3::zeros())
    }

    /// Rotation by `r` about the fixed point `pivot`.
    pub fn rotation_about_point(r: Rotation3, pivot: &Vec3) -> Self {
        PoseSE3::new(r, pivot - r.rotate(pivot))
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.rotate(p) + self.translation
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation.rotate(v)
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &PoseSE3) -> PoseSE3 {
        PoseSE3::new(
            self.rotation * other.rotation,
            self.rotation.rotate(&other.translation) + self.translation,
        )
    }

    pub fn inverse(&self) -> PoseSE3 {
        let rt = self.rotation.transpose();
        PoseSE3::new(rt, -rt.rotate(&self.translation))
    }

    /// Translation distance and rotation angle between two poses.
    pub fn distance_to(&self, other: &PoseSE3) -> (f64, f64) {
        (
            (self.translation - other.translation).norm(),
            self.rotation.angle_to(&other.rotation),
        )
    }
}

impl Mul for PoseSE3 {
    type Output = PoseSE3;
    fn mul(self, rhs: PoseSE3) -> PoseSE3 {
        self.compose(&rhs)
    }
}

pub fn compose(a: &PoseSE3, b: &PoseSE3) -> PoseSE3 {
    a.compose(b)
}

pub fn invert(a: &PoseSE3) -> PoseSE3 {
    a.inverse()
}

pub fn transform_point(a: &PoseSE3, p: &Vec3) -> Vec3 {
    a.transform_point(p)
}

/// Skew-symmetric matrix with `hat(w) v = w × v`.
pub fn hat(w: &Vec3) -> Mat3 {
    Mat3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Rodrigues' formula.
pub fn exp_so3(omega: &Vec3) -> Rotation3 {
    let theta2 = omega.norm_squared();
    let theta = theta2.sqrt();
    let k = hat(omega);
    let (a, b) = if theta < SMALL_ANGLE {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    Rotation3(Mat3::identity() + k * a + k * k * b)
}

/// Axis-angle vector with norm in `[0, π]`.
///
/// For angles beyond 2π/3 the axis is read from the symmetric part of R,
/// using the column with the largest diagonal of `(R + Rᵀ)/2 − cosθ I`. At
/// exactly π (`trace(R) ≤ −1 + 1e-9` with a vanishing antisymmetric part) the
/// sign is fixed so that the first nonzero axis component is positive.
pub fn log_so3(r: &Rotation3) -> Vec3 {
    let m = &r.0;
    let cos_theta = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let vee = Vec3::new(
        m[(2, 1)] - m[(1, 2)],
        m[(0, 2)] - m[(2, 0)],
        m[(1, 0)] - m[(0, 1)],
    );

    if cos_theta > -0.5 {
        let sin_theta = 0.5 * vee.norm();
        let theta = sin_theta.atan2(cos_theta);
        if theta < SMALL_ANGLE {
            // θ / (2 sin θ) ≈ 1/2 + θ²/12
            return vee * (0.5 + theta * theta / 12.0);
        }
        return vee * (theta / (2.0 * sin_theta));
    }

    // R = cosθ I + sinθ [a]× + (1 − cosθ) a aᵀ
    let outer = ((m + m.transpose()) * 0.5 - Mat3::identity() * cos_theta) / (1.0 - cos_theta);
    let i = (0..3)
        .max_by(|&i, &j| outer[(i, i)].total_cmp(&outer[(j, j)]))
        .unwrap();
    let mut axis = outer.column(i).into_owned();
    axis.normalize_mut();
    if let Some(first) = axis.iter().copied().find(|c| c.abs() > 1e-12) {
        if first < 0.0 {
            axis = -axis;
        }
    }
    let mut sin_theta = 0.5 * axis.dot(&vee);
    if sin_theta.abs() <= PI_SIGN_TOL {
        // Round-off level: keep the canonical sign.
        return axis * sin_theta.abs().atan2(cos_theta);
    }
    if sin_theta < 0.0 {
        axis = -axis;
        sin_theta = -sin_theta;
    }
    axis * sin_theta.atan2(cos_theta)
}

/// Inverse of the left Jacobian of SO(3):
/// `log(exp(δ) R) ≈ log(R) + J_l⁻¹(log R) δ`.
pub fn left_jacobian_inverse(phi: &Vec3) -> Mat3 {
    let theta2 = phi.norm_squared();
    let theta = theta2.sqrt();
    let k = hat(phi);
    let c = if theta < 1e-4 {
        1.0 / 12.0 + theta2 / 720.0
    } else {
        let half = 0.5 * theta;
        (1.0 - half * half.cos() / half.sin()) / theta2
    };
    Mat3::identity() - k * 0.5 + k * k * c
}

/// `J_r⁻¹(φ) = J_l⁻¹(φ)ᵀ`, so `log(R exp(δ)) ≈ log(R) + J_r⁻¹(log R) δ`.
pub fn right_jacobian_inverse(phi: &Vec3) -> Mat3 {
    left_jacobian_inverse(phi).transpose()
}

/// Rodrigues rotation about a unit axis; leaves the axis fixed.
pub fn rotation_about_axis(axis: &UnitVec3, angle: f64) -> Rotation3 {
    exp_so3(&(axis.0 * angle))
}

/// Minimal rotation taking `a` onto `b`.
///
/// For antiparallel inputs the axis is `normalize(a × e)` where `e` is the
/// standard basis vector along the smallest-magnitude component of `a`.
/// Nearly antiparallel inputs use that half-turn followed by the small
/// rotation from `-a` to `b`, since `a × b` no longer fixes the axis well.
pub fn rotation_between(a: &UnitVec3, b: &UnitVec3) -> Rotation3 {
    let d = a.dot(b);
    if d <= -1.0 + ROTATION_TOL {
        let axis = UnitVec3(a.0.cross(&smallest_component_basis(&a.0)).normalize());
        let flip = rotation_about_axis(&axis, PI);
        return acute_rotation(&UnitVec3(-a.0), b) * flip;
    }
    acute_rotation(a, b)
}

fn acute_rotation(a: &UnitVec3, b: &UnitVec3) -> Rotation3 {
    let d = a.dot(b);
    let c = a.0.cross(&b.0);
    let s = c.norm();
    if s < 1e-300 {
        return Rotation3::identity();
    }
    let angle = s.atan2(d);
    rotation_about_axis(&UnitVec3(c / s), angle)
}

/// Standard basis vector along the smallest-|component| of `v`, lowest index
/// on ties.
pub fn smallest_component_basis(v: &Vec3) -> Vec3 {
    let mut idx = 0;
    for i in 1..3 {
        if v[i].abs() < v[idx].abs() {
            idx = i;
        }
    }
    let mut e = Vec3::zeros();
    e[idx] = 1.0;
    e
}

/// Nearest rotation in the Frobenius sense.
pub fn project_to_so3(m: &Mat3) -> Mat3 {
    let svd = SVD::new(*m, true, true);
    let u = svd.u.expect("svd u");
    let vt = svd.v_t.expect("svd v_t");
    let mut d = Mat3::identity();
    if (u * vt).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    u * d * vt
}

/// Least-squares rigid transform taking `src` onto `dst` (Kabsch with
/// determinant correction).
pub fn fit_rigid_transform(src: &[Vec3], dst: &[Vec3]) -> Result<PoseSE3, GeometryError> {
    if src.len() != dst.len() {
        return Err(GeometryError::DegenerateInput(format!(
            "point count mismatch: {} vs {}",
            src.len(),
            dst.len()
        )));
    }
    if src.len() < 3 {
        return Err(GeometryError::DegenerateInput(format!(
            "need at least 3 point pairs, got {}",
            src.len()
        )));
    }
    let n = src.len() as f64;
    let mu_s = src.iter().sum::<Vec3>() / n;
    let mu_d = dst.iter().sum::<Vec3>() / n;

    let mut h = Mat3::zeros();
    let mut cov_s = Mat3::zeros();
    for (s, d) in src.iter().zip(dst) {
        let sc = s - mu_s;
        let dc = d - mu_d;
        h += dc * sc.transpose();
        cov_s += sc * sc.transpose();
    }

    // Rank of the source scatter must be at least 2.
    let eig = SymmetricEigen::new(cov_s);
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
    if ev[0] <= 0.0 || ev[1] <= ev[0] * 1e-20 {
        return Err(GeometryError::DegenerateInput(
            "source points are collinear or coincident".into(),
        ));
    }

    let svd = SVD::new(h, true, true);
    let u = svd.u.expect("svd u");
    let vt = svd.v_t.expect("svd v_t");
    let mut d = Mat3::identity();
    if (u * vt).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let r = Rotation3(u * d * vt);
    Ok(PoseSE3::new(r, mu_d - r.rotate(&mu_s)))
}

/// Signed angle from `a` to `b` about `axis` after projecting both onto the
/// plane normal to `axis`. `None` if either projection is shorter than `eps`.
pub fn signed_angle_about(a: &Vec3, b: &Vec3, axis: &UnitVec3, eps: f64) -> Option<f64> {
    let n = axis.0;
    let pa = a - n * n.dot(a);
    let pb = b - n * n.dot(b);
    if pa.norm() < eps || pb.norm() < eps {
        return None;
    }
    Some(n.dot(&pa.cross(&pb)).atan2(pa.dot(&pb)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn rz(angle: f64) -> Rotation3 {
        let (s, c) = angle.sin_cos();
        Rotation3::from_matrix(Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)).unwrap()
    }

    fn rx(angle: f64) -> Rotation3 {
        let (s, c) = angle.sin_cos();
        Rotation3::from_matrix(Mat3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)).unwrap()
    }

    #[test]
    fn log_identity_is_zero() {
        assert_eq!(log_so3(&Rotation3::identity()), Vec3::zeros());
    }

    #[test]
    fn log_quarter_turn_about_z() {
        let w = log_so3(&rz(FRAC_PI_2));
        assert_relative_eq!(w, Vec3::new(0.0, 0.0, FRAC_PI_2), epsilon = 1e-12);
    }

    #[test]
    fn log_half_turn_about_x() {
        let w = log_so3(&rx(PI));
        assert_relative_eq!(w, Vec3::new(PI, 0.0, 0.0), epsilon = 1e-12);
        // The sign rule picks the same axis for the -x description of the turn.
        let w2 = log_so3(&exp_so3(&Vec3::new(-PI, 0.0, 0.0)));
        assert_relative_eq!(w2, Vec3::new(PI, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn exp_examples() {
        assert_eq!(exp_so3(&Vec3::zeros()), Rotation3::identity());
        let r = exp_so3(&Vec3::new(0.0, 0.0, FRAC_PI_2));
        assert_relative_eq!(r.column(0), Vec3::new(0.0, 1.0, 0.0), epsilon = 1e-15);
        let w = Vec3::new(0.3, -0.4, 1.2);
        let w2 = w * (1.0 + 2.0 * PI / w.norm());
        assert_relative_eq!(exp_so3(&w).matrix(), exp_so3(&w2).matrix(), epsilon = 1e-9);
    }

    #[test]
    fn log_near_pi_is_accurate() {
        for eps in [1e-3, 1e-6, 1e-9, 1e-11] {
            let w = Vec3::new(0.2, -0.9, 0.4).normalize() * (PI - eps);
            let back = log_so3(&exp_so3(&w));
            assert_relative_eq!(back, w, epsilon = 1e-8);
        }
    }

    #[test]
    fn rotation_between_examples() {
        let x = UnitVec3::X;
        let y = UnitVec3::Y;
        assert_relative_eq!(
            rotation_between(&x, &x).matrix(),
            &Mat3::identity(),
            epsilon = 1e-15
        );
        let r = rotation_between(&x, &y);
        assert_relative_eq!(log_so3(&r), Vec3::new(0.0, 0.0, FRAC_PI_2), epsilon = 1e-12);
        let r = rotation_between(&x, &-x);
        // smallest |component| of (1,0,0) is y (lowest index among ties), x × y = z
        assert_relative_eq!(log_so3(&r), Vec3::new(0.0, 0.0, PI), epsilon = 1e-12);
        assert_relative_eq!(r * *x.as_vec(), -*x.as_vec(), epsilon = 1e-12);
    }

    #[test]
    fn rotation_about_axis_examples() {
        let z = UnitVec3::Z;
        assert_eq!(rotation_about_axis(&z, 0.0), Rotation3::identity());
        let r = rotation_about_axis(&z, FRAC_PI_2);
        assert_relative_eq!(r * Vec3::x(), Vec3::y(), epsilon = 1e-15);
        assert_relative_eq!(r * Vec3::z(), Vec3::z(), epsilon = 1e-15);
    }

    fn tetra() -> Vec<Vec3> {
        vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 2.0, 0.0),
            Vec3::new(0.3, 0.1, 1.5),
        ]
    }

    #[test]
    fn fit_identity_and_known_transform() {
        let src = tetra();
        let p = fit_rigid_transform(&src, &src).unwrap();
        assert!(p.rotation.angle() < 1e-12 && p.translation.norm() < 1e-12);

        let truth = PoseSE3::new(rz(FRAC_PI_2), Vec3::new(1.0, 2.0, 3.0));
        let dst: Vec<_> = src.iter().map(|s| truth.transform_point(s)).collect();
        let p = fit_rigid_transform(&src, &dst).unwrap();
        assert_relative_eq!(p.rotation.matrix(), truth.rotation.matrix(), epsilon = 1e-9);
        assert_relative_eq!(p.translation, truth.translation, epsilon = 1e-9);
    }

    #[test]
    fn fit_reflection_returns_proper_rotation() {
        let src = tetra();
        let dst: Vec<_> = src.iter().map(|s| Vec3::new(-s.x, s.y, s.z)).collect();
        let p = fit_rigid_transform(&src, &dst).unwrap();
        assert_relative_eq!(p.rotation.matrix().determinant(), 1.0, epsilon = 1e-9);
        assert!(p.rotation.orthonormality_error() < 1e-9);
    }

    #[test]
    fn fit_rejects_degenerate() {
        let two = vec![Vec3::zeros(), Vec3::x()];
        assert!(matches!(
            fit_rigid_transform(&two, &two),
            Err(GeometryError::DegenerateInput(_))
        ));
        let line: Vec<_> = (0..5).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        assert!(matches!(
            fit_rigid_transform(&line, &line),
            Err(GeometryError::DegenerateInput(_))
        ));
    }

    #[test]
    fn pose_group_examples() {
        let b = PoseSE3::new(rx(0.3), Vec3::new(0.1, 0.2, 0.3));
        assert_eq!(compose(&PoseSE3::identity(), &b), b);
        let a = PoseSE3::new(rz(FRAC_PI_2), Vec3::new(1.0, 0.0, 0.0));
        assert_relative_eq!(
            transform_point(&a, &Vec3::x()),
            Vec3::new(1.0, 1.0, 0.0),
            epsilon = 1e-15
        );
        let e = compose(&a, &invert(&a));
        assert!(e.rotation.angle() < 1e-12 && e.translation.norm() < 1e-12);
    }

    #[test]
    fn signed_angle_examples() {
        let a = signed_angle_about(&Vec3::x(), &Vec3::y(), &UnitVec3::Z, 1e-9).unwrap();
        assert_relative_eq!(a, FRAC_PI_2, epsilon = 1e-15);
        assert!(signed_angle_about(&Vec3::z(), &Vec3::y(), &UnitVec3::Z, 1e-9).is_none());
    }

    fn vec3_strategy(r: f64) -> impl Strategy<Value = Vec3> {
        (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    proptest! {
        #[test]
        fn prop_invert_is_involution(w in vec3_strategy(3.0), t in vec3_strategy(5.0)) {
            let a = PoseSE3::new(exp_so3(&w), t);
            let aa = a.inverse().inverse();
            prop_assert!((aa.rotation.matrix() - a.rotation.matrix()).amax() < 1e-12);
            prop_assert!((aa.translation - a.translation).amax() < 1e-12);
        }

        #[test]
        fn prop_left_jacobian_inverse_matches_fd(w in vec3_strategy(2.5), d in vec3_strategy(1.0)) {
            let r = exp_so3(&w);
            let phi = log_so3(&r);
            let h = 1e-6;
            let plus = log_so3(&(exp_so3(&(d * h)) * r));
            let minus = log_so3(&(exp_so3(&(-d * h)) * r));
            let fd = (plus - minus) / (2.0 * h);
            let an = left_jacobian_inverse(&phi) * d;
            prop_assert!((fd - an).amax() < 1e-5, "fd {fd:?} an {an:?}");
        }

        #[test]
        fn prop_exp_yields_rotations(w in vec3_strategy(10.0)) {
            prop_assert!(exp_so3(&w).orthonormality_error() < 1e-12);
        }
    }
}
