use nalgebra::{Matrix3, Matrix4, Quaternion, UnitQuaternion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Point, PointCloud, Vector};

/// A rigid motion `p ↦ R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector) -> Self {
        Self { rotation, translation }
    }

    pub fn from_rotation(rotation: Matrix3<f64>) -> Self {
        Self::new(rotation, Vector::zeros())
    }

    pub fn from_translation(translation: Vector) -> Self {
        Self::new(Matrix3::identity(), translation)
    }

    pub fn apply_point(&self, p: &Point) -> Point {
        Point::from(self.rotation * p.coords + self.translation)
    }

    pub fn apply_vector(&self, v: &Vector) -> Vector {
        self.rotation * v
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self::new(rt, -(rt * self.translation))
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        Self::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Row-major 4×4 entries.
    pub fn to_row_major(&self) -> [f64; 16] {
        let m = self.to_matrix();
        let mut out = [0.0; 16];
        for r in 0..4 {
            for c in 0..4 {
                out[4 * r + c] = m[(r, c)];
            }
        }
        out
    }

    pub fn from_row_major(v: &[f64; 16]) -> Self {
        let rotation = Matrix3::new(v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10]);
        Self::new(rotation, Vector::new(v[3], v[7], v[11]))
    }

    /// Max deviation of `RᵀR` from identity and of `det R` from one.
    pub fn orthogonality_error(&self) -> f64 {
        let e = (self.rotation.transpose() * self.rotation - Matrix3::identity()).amax();
        e.max((self.rotation.determinant() - 1.0).abs())
    }

    /// Rotation angle in `[0, π]`.
    pub fn rotation_angle(&self) -> f64 {
        let c = ((self.rotation.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        c.acos()
    }
}

pub fn apply_rigid(cloud: &PointCloud, t: &RigidTransform) -> PointCloud {
    PointCloud {
        points: cloud.points.iter().map(|p| t.apply_point(p)).collect(),
        normals: cloud
            .normals
            .as_ref()
            .map(|ns| ns.iter().map(|n| t.apply_vector(n)).collect()),
    }
}

/// Uniformly distributed rotation (Haar measure on SO(3)), zero translation.
///
/// Normalizing a 4D standard Gaussian gives a uniform unit quaternion.
pub fn random_rotation(seed: u64) -> RigidTransform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
        let q = Quaternion::new(q[0], q[1], q[2], q[3]);
        if q.norm() > 1e-6 {
            let u = UnitQuaternion::from_quaternion(q);
            return RigidTransform::from_rotation(*u.to_rotation_matrix().matrix());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_2_PI, FRAC_PI_2};

    fn sample_cloud() -> PointCloud {
        let pts = (0..20)
            .map(|i| {
                let f = i as f64;
                Point::new(f.sin(), (2.0 * f).cos(), 0.1 * f)
            })
            .collect();
        let ns = (0..20).map(|i| Vector::new(1.0, i as f64, 2.0).normalize()).collect();
        PointCloud::with_normals(pts, ns).unwrap()
    }

    #[test]
    fn identity_is_bitwise() {
        let c = sample_cloud();
        assert_eq!(apply_rigid(&c, &RigidTransform::identity()), c);
    }

    #[test]
    fn translation_leaves_normals() {
        let c = sample_cloud();
        let moved = apply_rigid(&c, &RigidTransform::from_translation(Vector::new(1.0, 2.0, 3.0)));
        assert_eq!(moved.normals(), c.normals());
    }

    #[test]
    fn inverse_round_trip_and_distances() {
        let c = sample_cloud();
        let mut t = random_rotation(11);
        t.translation = Vector::new(0.3, -2.0, 5.0);
        let back = apply_rigid(&apply_rigid(&c, &t), &t.inverse());
        for (a, b) in back.points().iter().zip(c.points()) {
            assert!((a - b).amax() < 1e-9);
        }
        let moved = apply_rigid(&c, &t);
        for i in 0..c.len() {
            for j in 0..c.len() {
                let d0 = (c.points()[i] - c.points()[j]).norm();
                let d1 = (moved.points()[i] - moved.points()[j]).norm();
                assert!((d0 - d1).abs() < 1e-9);
            }
        }
        assert!(t
            .compose(&t.inverse())
            .to_matrix()
            .relative_eq(&Matrix4::identity(), 1e-9, 1e-9));
    }

    #[test]
    fn random_rotation_is_orthogonal_and_deterministic() {
        for seed in 0..100 {
            let r = random_rotation(seed);
            assert!(r.orthogonality_error() < 1e-9);
            assert_eq!(r, random_rotation(seed));
        }
        assert_ne!(random_rotation(1), random_rotation(2));
    }

    #[test]
    fn random_rotation_mean_angle() {
        // Haar measure on SO(3): angle density (1 − cos θ)/π, E[θ] = π/2 + 2/π.
        let expected = (FRAC_PI_2 + FRAC_2_PI).to_degrees();
        let n = 10_000;
        let mean = (0..n).map(|s| random_rotation(s).rotation_angle()).sum::<f64>() / n as f64;
        assert!((mean.to_degrees() - expected).abs() < 2.0, "{}", mean.to_degrees());
    }

    #[test]
    fn row_major_round_trip() {
        let mut t = random_rotation(4);
        t.translation = Vector::new(1.0, 2.0, 3.0);
        assert_eq!(RigidTransform::from_row_major(&t.to_row_major()), t);
        assert_eq!(t.to_row_major()[3], 1.0);
        assert_eq!(t.to_row_major()[15], 1.0);
    }
}
