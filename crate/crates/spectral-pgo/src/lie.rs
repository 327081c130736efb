//! Rigid-body transforms in the plane and in space, with the adjoint maps
//! used to re-express edge information matrices in the world frame.
//!
//! Twist ordering is fixed to (translation components, rotation components),
//! matching the information-matrix ordering of the pose-graph file format.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{
    DMatrix, DVector, Isometry3, Matrix2, Matrix3, Quaternion, Translation3, UnitQuaternion,
    Vector3,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spatial dimension of a pose graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dim {
    Two,
    Three,
}

impl Dim {
    /// Tangent-space dimension: 3 for planar poses, 6 for spatial ones.
    pub fn tangent_dim(self) -> usize {
        match self {
            Dim::Two => 3,
            Dim::Three => 6,
        }
    }
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dim::Two => write!(f, "2D"),
            Dim::Three => write!(f, "3D"),
        }
    }
}

/// Planar rigid transform stored as (x, y, heading angle).
///
/// The angle is kept wrapped into (-pi, pi]; the rotation matrix is
/// materialized on demand.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanarPose {
    pub x: f64,
    pub y: f64,
    theta: f64,
}

/// Wrap an angle into (-pi, pi].
fn wrap_angle(theta: f64) -> f64 {
    let w = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

impl PlanarPose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        PlanarPose {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn rotation(&self) -> Matrix2<f64> {
        let (s, c) = self.theta.sin_cos();
        Matrix2::new(c, -s, s, c)
    }
}

/// Rigid-body transform in SE(2) or SE(3).
#[derive(Clone, Debug, PartialEq)]
pub enum Pose {
    Se2(PlanarPose),
    Se3(Isometry3<f64>),
}

impl Pose {
    pub fn identity(dim: Dim) -> Self {
        match dim {
            Dim::Two => Pose::Se2(PlanarPose::new(0.0, 0.0, 0.0)),
            Dim::Three => Pose::Se3(Isometry3::identity()),
        }
    }

    pub fn se2(x: f64, y: f64, theta: f64) -> Self {
        Pose::Se2(PlanarPose::new(x, y, theta))
    }

    /// Build a spatial pose from a translation and a (w, x, y, z) quaternion.
    ///
    /// The quaternion is normalized unless it is already unit-length to
    /// within 1e-12 (keeping repeated parse/serialize cycles bit-stable).
    pub fn se3(translation: [f64; 3], quat_wxyz: [f64; 4]) -> Result<Self> {
        let [w, x, y, z] = quat_wxyz;
        let q = Quaternion::new(w, x, y, z);
        let n = q.norm();
        if !n.is_finite() || n < 1e-9 {
            return Err(Error::invalid(format!("quaternion norm {n} is not usable")));
        }
        let unit = if (n - 1.0).abs() <= 1e-12 {
            UnitQuaternion::new_unchecked(q)
        } else {
            UnitQuaternion::new_normalize(q)
        };
        Ok(Pose::Se3(Isometry3::from_parts(
            Translation3::new(translation[0], translation[1], translation[2]),
            unit,
        )))
    }

    pub fn dim(&self) -> Dim {
        match self {
            Pose::Se2(_) => Dim::Two,
            Pose::Se3(_) => Dim::Three,
        }
    }

    pub fn tangent_dim(&self) -> usize {
        self.dim().tangent_dim()
    }

    pub fn as_planar(&self) -> Option<&PlanarPose> {
        match self {
            Pose::Se2(p) => Some(p),
            Pose::Se3(_) => None,
        }
    }

    pub fn as_spatial(&self) -> Option<&Isometry3<f64>> {
        match self {
            Pose::Se2(_) => None,
            Pose::Se3(iso) => Some(iso),
        }
    }

    /// Translation components as a vector of length 2 or 3.
    pub fn translation(&self) -> DVector<f64> {
        match self {
            Pose::Se2(p) => DVector::from_vec(vec![p.x, p.y]),
            Pose::Se3(iso) => DVector::from_vec(vec![
                iso.translation.x,
                iso.translation.y,
                iso.translation.z,
            ]),
        }
    }

    /// Quaternion as (w, x, y, z) for spatial poses.
    pub fn quaternion_wxyz(&self) -> Option<[f64; 4]> {
        match self {
            Pose::Se2(_) => None,
            Pose::Se3(iso) => {
                let q = iso.rotation.quaternion();
                Some([q.w, q.i, q.j, q.k])
            }
        }
    }

    /// Group product `self * rhs`.
    pub fn compose(&self, rhs: &Pose) -> Result<Pose> {
        match (self, rhs) {
            (Pose::Se2(a), Pose::Se2(b)) => {
                let r = a.rotation();
                let t = r * nalgebra::Vector2::new(b.x, b.y);
                Ok(Pose::se2(a.x + t.x, a.y + t.y, a.theta + b.theta))
            }
            (Pose::Se3(a), Pose::Se3(b)) => Ok(Pose::Se3(a * b)),
            _ => Err(Error::DimensionMismatch(self.dim(), rhs.dim())),
        }
    }

    pub fn inverse(&self) -> Pose {
        match self {
            Pose::Se2(p) => {
                let (s, c) = p.theta.sin_cos();
                Pose::se2(-(c * p.x + s * p.y), s * p.x - c * p.y, -p.theta)
            }
            Pose::Se3(iso) => Pose::Se3(iso.inverse()),
        }
    }

    /// Adjoint matrix of this pose, acting on (translation, rotation) twists.
    pub fn adjoint(&self) -> AdjointMatrix {
        match self {
            Pose::Se2(p) => {
                let mut m = DMatrix::<f64>::zeros(3, 3);
                let r = p.rotation();
                m[(0, 0)] = r[(0, 0)];
                m[(0, 1)] = r[(0, 1)];
                m[(1, 0)] = r[(1, 0)];
                m[(1, 1)] = r[(1, 1)];
                m[(0, 2)] = p.y;
                m[(1, 2)] = -p.x;
                m[(2, 2)] = 1.0;
                AdjointMatrix { mat: m }
            }
            Pose::Se3(iso) => {
                let r = iso.rotation.to_rotation_matrix();
                let r = r.matrix();
                let t = iso.translation.vector;
                let tr = t.cross_matrix() * r;
                let mut m = DMatrix::<f64>::zeros(6, 6);
                for row in 0..3 {
                    for col in 0..3 {
                        m[(row, col)] = r[(row, col)];
                        m[(row, col + 3)] = tr[(row, col)];
                        m[(row + 3, col + 3)] = r[(row, col)];
                    }
                }
                AdjointMatrix { mat: m }
            }
        }
    }

    /// Exponential map from a (translation, rotation) tangent vector.
    pub fn exp(dim: Dim, v: &[f64]) -> Result<Pose> {
        if v.len() != dim.tangent_dim() {
            return Err(Error::invalid(format!(
                "tangent vector length {} does not match {} tangent dimension {}",
                v.len(),
                dim,
                dim.tangent_dim()
            )));
        }
        match dim {
            Dim::Two => {
                let w = v[2];
                let (a, b) = se2_exp_coeffs(w);
                Ok(Pose::se2(a * v[0] - b * v[1], b * v[0] + a * v[1], w))
            }
            Dim::Three => {
                let rho = Vector3::new(v[0], v[1], v[2]);
                let omega = Vector3::new(v[3], v[4], v[5]);
                let rot = UnitQuaternion::from_scaled_axis(omega);
                let t = se3_v_matrix(&omega) * rho;
                Ok(Pose::Se3(Isometry3::from_parts(
                    Translation3::from(t),
                    rot,
                )))
            }
        }
    }

    /// Logarithm map to a (translation, rotation) tangent vector.
    ///
    /// Rotations within 1e-6 of a half turn are rejected as ill-conditioned.
    pub fn log(&self) -> Result<DVector<f64>> {
        match self {
            Pose::Se2(p) => {
                let theta = p.theta;
                if (theta.abs() - PI).abs() < 1e-6 {
                    return Err(Error::LogNearPi);
                }
                let (a, b) = se2_exp_coeffs(theta);
                let det = a * a + b * b;
                let vx = (a * p.x + b * p.y) / det;
                let vy = (-b * p.x + a * p.y) / det;
                Ok(DVector::from_vec(vec![vx, vy, theta]))
            }
            Pose::Se3(iso) => {
                let omega = iso.rotation.scaled_axis();
                let theta = omega.norm();
                if (theta - PI).abs() < 1e-6 {
                    return Err(Error::LogNearPi);
                }
                let rho = se3_v_inverse(&omega) * iso.translation.vector;
                Ok(DVector::from_vec(vec![
                    rho.x, rho.y, rho.z, omega.x, omega.y, omega.z,
                ]))
            }
        }
    }
}

/// sin(w)/w and (1-cos(w))/w with Taylor fallbacks near zero.
fn se2_exp_coeffs(w: f64) -> (f64, f64) {
    if w.abs() < 1e-4 {
        let w2 = w * w;
        (1.0 - w2 / 6.0 + w2 * w2 / 120.0, w / 2.0 - w * w2 / 24.0)
    } else {
        (w.sin() / w, (1.0 - w.cos()) / w)
    }
}

/// Left Jacobian of SO(3) applied to the translation part of the SE(3) exp.
fn se3_v_matrix(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = omega.norm_squared();
    let hat = omega.cross_matrix();
    let (c1, c2) = if theta2 < 1e-8 {
        (0.5 - theta2 / 24.0, 1.0 / 6.0 - theta2 / 120.0)
    } else {
        let theta = theta2.sqrt();
        (
            (1.0 - theta.cos()) / theta2,
            (theta - theta.sin()) / (theta2 * theta),
        )
    };
    Matrix3::identity() + hat * c1 + hat * hat * c2
}

fn se3_v_inverse(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = omega.norm_squared();
    let hat = omega.cross_matrix();
    let k = if theta2 < 1e-8 {
        1.0 / 12.0 + theta2 / 720.0
    } else {
        let theta = theta2.sqrt();
        let half = theta / 2.0;
        (1.0 - half * half.cos() / half.sin()) / theta2
    };
    Matrix3::identity() - hat * 0.5 + hat * hat * k
}

/// Linear map carrying (translation, rotation) twists across a frame change.
///
/// For a pose `a` it satisfies `exp((Ad_a v)^) = a exp(v^) a^{-1}` and is
/// multiplicative under composition.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjointMatrix {
    mat: DMatrix<f64>,
}

impl AdjointMatrix {
    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.mat
    }

    /// Congruence transform `Ad^T M Ad`; preserves symmetry and positive
    /// definiteness.
    pub fn congruence(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        self.mat.transpose() * m * &self.mat
    }

    /// Apply to a tangent vector.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.mat * v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_pose(rng: &mut ChaCha8Rng, dim: Dim) -> Pose {
        match dim {
            Dim::Two => Pose::se2(
                rng.random_range(-10.0..10.0),
                rng.random_range(-10.0..10.0),
                rng.random_range(-PI..PI),
            ),
            Dim::Three => {
                let axis = Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                let angle: f64 = rng.random_range(-3.0..3.0);
                let omega = if axis.norm() < 1e-6 {
                    Vector3::zeros()
                } else {
                    axis.normalize() * angle
                };
                Pose::Se3(Isometry3::from_parts(
                    Translation3::new(
                        rng.random_range(-10.0..10.0),
                        rng.random_range(-10.0..10.0),
                        rng.random_range(-10.0..10.0),
                    ),
                    UnitQuaternion::from_scaled_axis(omega),
                ))
            }
        }
    }

    /// Max absolute difference between poses seen as homogeneous matrices.
    fn pose_distance(a: &Pose, b: &Pose) -> f64 {
        let ha = homogeneous(a);
        let hb = homogeneous(b);
        (ha - hb).abs().max()
    }

    /// Independent homogeneous-matrix representation used as an oracle.
    fn homogeneous(p: &Pose) -> DMatrix<f64> {
        match p {
            Pose::Se2(p) => {
                let (s, c) = p.theta().sin_cos();
                DMatrix::from_row_slice(3, 3, &[c, -s, p.x, s, c, p.y, 0.0, 0.0, 1.0])
            }
            Pose::Se3(iso) => {
                let mut h = DMatrix::<f64>::identity(4, 4);
                let r = iso.rotation.to_rotation_matrix();
                for i in 0..3 {
                    for j in 0..3 {
                        h[(i, j)] = r.matrix()[(i, j)];
                    }
                }
                h[(0, 3)] = iso.translation.x;
                h[(1, 3)] = iso.translation.y;
                h[(2, 3)] = iso.translation.z;
                h
            }
        }
    }

    #[test]
    fn compose_identity_is_neutral() {
        let p = Pose::se2(1.5, -2.0, 0.7);
        let id = Pose::identity(Dim::Two);
        assert_eq!(id.compose(&p).unwrap(), p);
        assert_eq!(p.compose(&id).unwrap(), p);
    }

    #[test]
    fn compose_pure_translations_add() {
        let a = Pose::se2(1.0, 0.0, 0.0);
        let b = Pose::se2(1.0, 0.0, 0.0);
        let c = a.compose(&b).unwrap();
        assert_eq!(pose_distance(&c, &Pose::se2(2.0, 0.0, 0.0)), 0.0);
    }

    #[test]
    fn compose_matches_homogeneous_oracle() {
        // Quarter turn then unit step: the step lands on the +y axis.
        let a = Pose::se2(0.0, 0.0, PI / 2.0);
        let b = Pose::se2(1.0, 0.0, 0.0);
        let c = a.compose(&b).unwrap();
        assert!(pose_distance(&c, &Pose::se2(0.0, 1.0, PI / 2.0)) < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for dim in [Dim::Two, Dim::Three] {
            for _ in 0..100 {
                let a = random_pose(&mut rng, dim);
                let b = random_pose(&mut rng, dim);
                let c = a.compose(&b).unwrap();
                let oracle = homogeneous(&a) * homogeneous(&b);
                assert!((homogeneous(&c) - oracle).abs().max() < 1e-12);
            }
        }
    }

    #[test]
    fn compose_dimension_mismatch_errors() {
        let a = Pose::identity(Dim::Two);
        let b = Pose::identity(Dim::Three);
        assert!(matches!(
            a.compose(&b),
            Err(Error::DimensionMismatch(Dim::Two, Dim::Three))
        ));
    }

    #[test]
    fn inverse_examples() {
        let id2 = Pose::identity(Dim::Two);
        assert_eq!(id2.inverse(), id2);
        assert_eq!(
            Pose::se2(1.0, 2.0, 0.0).inverse(),
            Pose::se2(-1.0, -2.0, 0.0)
        );

        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for dim in [Dim::Two, Dim::Three] {
            for _ in 0..100 {
                let p = random_pose(&mut rng, dim);
                let prod = p.compose(&p.inverse()).unwrap();
                assert!(pose_distance(&prod, &Pose::identity(dim)) < 1e-12);
            }
        }
    }

    #[test]
    fn adjoint_of_identity_is_identity() {
        for dim in [Dim::Two, Dim::Three] {
            let ad = Pose::identity(dim).adjoint();
            let ell = dim.tangent_dim();
            assert_eq!(ad.matrix(), &DMatrix::<f64>::identity(ell, ell));
        }
    }

    #[test]
    fn adjoint_is_multiplicative() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for dim in [Dim::Two, Dim::Three] {
            for _ in 0..100 {
                let a = random_pose(&mut rng, dim);
                let b = random_pose(&mut rng, dim);
                let lhs = a.compose(&b).unwrap().adjoint().into_matrix();
                let rhs = a.adjoint().matrix() * b.adjoint().matrix();
                assert!((lhs - rhs).abs().max() < 1e-9);
            }
        }
    }

    #[test]
    fn adjoint_satisfies_conjugation_identity() {
        // Numerical oracle: Ad_a v must equal log(a exp(v^) a^{-1}) on a
        // basis of small twists.
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for dim in [Dim::Two, Dim::Three] {
            let ell = dim.tangent_dim();
            for _ in 0..100 {
                let a = random_pose(&mut rng, dim);
                let ad = a.adjoint();
                for b in 0..ell {
                    let mut v = vec![0.0; ell];
                    v[b] = 0.1;
                    let conj = a
                        .compose(&Pose::exp(dim, &v).unwrap())
                        .unwrap()
                        .compose(&a.inverse())
                        .unwrap();
                    let expected = conj.log().unwrap();
                    let got = ad.apply(&DVector::from_vec(v));
                    assert!((got - expected).abs().max() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn adjoint_quarter_turn_layout() {
        let ad = Pose::se2(0.0, 0.0, PI / 2.0).adjoint();
        let expected =
            DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert!((ad.matrix() - expected).abs().max() < 1e-15);
    }

    #[test]
    fn congruence_preserves_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for dim in [Dim::Two, Dim::Three] {
            let ell = dim.tangent_dim();
            for _ in 0..100 {
                let a = random_pose(&mut rng, dim);
                let raw = DMatrix::<f64>::from_fn(ell, ell, |_, _| rng.random_range(-1.0..1.0));
                let spd = &raw * raw.transpose() + DMatrix::<f64>::identity(ell, ell) * 0.1;
                let out = a.adjoint().congruence(&spd);
                let asym = (&out - out.transpose()).abs().max();
                assert!(asym <= 1e-9 * out.abs().max());
                // symmetrize before factoring so roundoff cannot hide PDness
                let sym = (&out + out.transpose()) * 0.5;
                assert!(sym.cholesky().is_some());
            }
        }
    }

    #[test]
    fn exp_log_examples() {
        assert_eq!(
            Pose::exp(Dim::Two, &[0.0; 3]).unwrap(),
            Pose::identity(Dim::Two)
        );
        assert_eq!(
            Pose::exp(Dim::Three, &[0.0; 6]).unwrap(),
            Pose::identity(Dim::Three)
        );
        assert_eq!(
            Pose::exp(Dim::Two, &[1.0, 0.0, 0.0]).unwrap(),
            Pose::se2(1.0, 0.0, 0.0)
        );
    }

    #[test]
    fn exp_log_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for dim in [Dim::Two, Dim::Three] {
            let ell = dim.tangent_dim();
            for _ in 0..200 {
                let mut v: Vec<f64> = (0..ell).map(|_| rng.random_range(-1.0..1.0)).collect();
                let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 1.0 {
                    for x in &mut v {
                        *x /= norm;
                    }
                }
                let p = Pose::exp(dim, &v).unwrap();
                let back = p.log().unwrap();
                for (a, b) in v.iter().zip(back.iter()) {
                    assert_relative_eq!(a, b, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn log_rejects_half_turn() {
        assert!(matches!(
            Pose::se2(1.0, 0.0, PI - 1e-9).log(),
            Err(Error::LogNearPi)
        ));
        let spin = Pose::Se3(Isometry3::from_parts(
            Translation3::new(0.5, 0.0, 0.0),
            UnitQuaternion::from_scaled_axis(Vector3::new(0.0, 0.0, PI - 1e-9)),
        ));
        assert!(matches!(spin.log(), Err(Error::LogNearPi)));
    }

    #[test]
    fn theta_stays_wrapped() {
        let p = Pose::se2(0.0, 0.0, 3.0 * PI);
        assert_relative_eq!(p.as_planar().unwrap().theta(), PI, epsilon = 1e-12);
        let q = Pose::se2(0.0, 0.0, -PI);
        assert_eq!(q.as_planar().unwrap().theta(), PI);
    }

    proptest! {
        #[test]
        fn compose_is_associative(
            ax in -5.0..5.0f64, ay in -5.0..5.0f64, at in -3.0..3.0f64,
            bx in -5.0..5.0f64, by in -5.0..5.0f64, bt in -3.0..3.0f64,
            cx in -5.0..5.0f64, cy in -5.0..5.0f64, ct in -3.0..3.0f64,
        ) {
            let a = Pose::se2(ax, ay, at);
            let b = Pose::se2(bx, by, bt);
            let c = Pose::se2(cx, cy, ct);
            let lhs = a.compose(&b).unwrap().compose(&c).unwrap();
            let rhs = a.compose(&b.compose(&c).unwrap()).unwrap();
            prop_assert!(pose_distance(&lhs, &rhs) < 1e-9);
        }

        #[test]
        fn inverse_cancels(
            x in -5.0..5.0f64, y in -5.0..5.0f64, t in -3.0..3.0f64,
        ) {
            let p = Pose::se2(x, y, t);
            let prod = p.inverse().compose(&p).unwrap();
            prop_assert!(pose_distance(&prod, &Pose::identity(Dim::Two)) < 1e-9);
        }
    }
}
