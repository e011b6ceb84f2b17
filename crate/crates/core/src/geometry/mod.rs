//! Point clouds, spatial queries, normals and rigid motions.
//!
//! Everything here works in double precision and meters.

mod index;
mod io;
mod normals;
mod sampling;
mod transform;

pub use index::SpatialIndex;
pub use io::{load_cloud, save_cloud, CloudFormat};
pub use normals::{estimate_normals, NormalEstimation, NormalParams};
pub use sampling::{downsample_uniform, uniform_sample_indices};
pub use transform::{apply_rigid, random_rotation, RigidTransform};

use nalgebra::{Point3, Vector3};
use thiserror::Error;

pub type Point = Point3<f64>;
pub type Vector = Vector3<f64>;

/// Tolerance on `‖n‖ − 1` accepted for stored normals.
pub const UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("zero points")]
    ZeroPoints,
    #[error("format cannot hold normals")]
    FormatCannotHoldNormals,
    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("radius must be non-negative and finite, got {0}")]
    BadRadius(f64),
    #[error("voxel cell must be positive and finite, got {0}")]
    BadCell(f64),
    #[error("angle undefined for zero-length vector")]
    ZeroLength,
    #[error("cloud has {available} points, normal estimation needs at least {required}")]
    TooFewPoints { available: usize, required: usize },
}

/// A point decorated with a unit surface normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedPoint {
    pub position: Point,
    pub normal: Vector,
}

impl OrientedPoint {
    pub fn new(position: Point, normal: Vector) -> Self {
        Self { position, normal }
    }

    pub fn transformed(&self, t: &RigidTransform) -> Self {
        Self {
            position: t.apply_point(&self.position),
            normal: t.apply_vector(&self.normal),
        }
    }
}

/// An ordered set of points with optional parallel normals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<Point>,
    normals: Option<Vec<Vector>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Result<Self, GeometryError> {
        let cloud = Self { points, normals: None };
        cloud.validate()?;
        Ok(cloud)
    }

    pub fn with_normals(points: Vec<Point>, normals: Vec<Vector>) -> Result<Self, GeometryError> {
        let cloud = Self {
            points,
            normals: Some(normals),
        };
        cloud.validate()?;
        Ok(cloud)
    }

    fn validate(&self) -> Result<(), GeometryError> {
        if let Some(i) = self
            .points
            .iter()
            .position(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()))
        {
            return Err(GeometryError::InvalidCloud(format!(
                "non-finite coordinate at point {i}"
            )));
        }
        if let Some(normals) = &self.normals {
            if normals.len() != self.points.len() {
                return Err(GeometryError::InvalidCloud(format!(
                    "{} normals for {} points",
                    normals.len(),
                    self.points.len()
                )));
            }
            if let Some(i) = normals.iter().position(|n| !((n.norm() - 1.0).abs() <= UNIT_TOLERANCE)) {
                return Err(GeometryError::InvalidCloud(format!("normal {i} is not unit length")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[Vector]> {
        self.normals.as_deref()
    }

    pub fn has_normals(&self) -> bool {
        self.normals.is_some()
    }

    pub fn oriented(&self, i: usize) -> Option<OrientedPoint> {
        let n = self.normals.as_ref()?.get(i)?;
        Some(OrientedPoint::new(self.points[i], *n))
    }

    /// Keeps the given indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            normals: self.normals.as_ref().map(|n| indices.iter().map(|&i| n[i]).collect()),
        }
    }

    pub fn without_normals(&self) -> Self {
        Self {
            points: self.points.clone(),
            normals: None,
        }
    }
}

/// Angle between two vectors of arbitrary non-zero length, in `[0, π]`.
///
/// Uses `atan2(‖u×v‖, u·v)`, which stays accurate for nearly parallel inputs.
pub fn angle(u: &Vector, v: &Vector) -> Result<f64, GeometryError> {
    if u.norm_squared() == 0.0 || v.norm_squared() == 0.0 {
        return Err(GeometryError::ZeroLength);
    }
    Ok(u.cross(v).norm().atan2(u.dot(v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn angle_examples() {
        let x = Vector::new(1.0, 0.0, 0.0);
        assert!((angle(&x, &Vector::new(0.0, 1.0, 0.0)).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!((angle(&x, &Vector::new(-3.0, 0.0, 0.0)).unwrap() - PI).abs() < 1e-15);
        assert!(matches!(angle(&x, &Vector::zeros()), Err(GeometryError::ZeroLength)));
    }

    #[test]
    fn angle_matches_acos_and_is_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let u = Vector::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let v = Vector::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let oracle = (u.dot(&v) / (u.norm() * v.norm())).clamp(-1.0, 1.0).acos();
            let a = angle(&u, &v).unwrap();
            assert!((a - oracle).abs() <= 1e-9);
            let s = angle(&(u * rng.gen_range(0.1..10.0)), &(v * rng.gen_range(0.1..10.0))).unwrap();
            assert!((a - s).abs() <= 1e-12);
        }
    }

    #[test]
    fn cloud_rejects_bad_input() {
        assert!(PointCloud::new(vec![Point::new(f64::NAN, 0.0, 0.0)]).is_err());
        assert!(PointCloud::with_normals(vec![Point::origin()], vec![]).is_err());
        assert!(PointCloud::with_normals(vec![Point::origin()], vec![Vector::new(2.0, 0.0, 0.0)]).is_err());
    }
}
