use nalgebra::{Matrix3, SymmetricEigen};

use super::{GeometryError, Point, PointCloud, SpatialIndex, Vector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalParams {
    /// Neighborhood size, the query point included.
    pub k: usize,
    /// Normals are flipped to face this point.
    pub viewpoint: Point,
    /// Face away from the viewpoint instead.
    pub orient_away: bool,
}

impl Default for NormalParams {
    fn default() -> Self {
        Self {
            k: 17,
            viewpoint: Point::origin(),
            orient_away: false,
        }
    }
}

/// Output of [`estimate_normals`].
#[derive(Debug, Clone)]
pub struct NormalEstimation {
    /// The input points that received a valid normal, with those normals.
    pub cloud: PointCloud,
    /// Index into the input cloud of each retained point.
    pub kept: Vec<usize>,
    /// Input indices whose neighborhood was degenerate.
    pub rejected: Vec<usize>,
}

/// PCA normals over the `k` nearest neighbors of every point.
///
/// Points whose neighborhood does not span a plane (coincident or collinear
/// neighbors) are dropped and listed in `rejected`.
pub fn estimate_normals(cloud: &PointCloud, params: &NormalParams) -> Result<NormalEstimation, GeometryError> {
    if params.k == 0 {
        return Err(GeometryError::ZeroK);
    }
    if cloud.len() < params.k {
        return Err(GeometryError::TooFewPoints {
            available: cloud.len(),
            required: params.k,
        });
    }
    let index = SpatialIndex::build(cloud)?;
    let mut points = Vec::with_capacity(cloud.len());
    let mut normals = Vec::with_capacity(cloud.len());
    let mut kept = Vec::with_capacity(cloud.len());
    let mut rejected = Vec::new();
    for (i, p) in cloud.points().iter().enumerate() {
        let nbrs = index.knn(p, params.k)?;
        match plane_normal(cloud.points(), &nbrs) {
            Some(mut n) => {
                let facing = n.dot(&(params.viewpoint - p));
                if (facing < 0.0) != params.orient_away {
                    n = -n;
                }
                points.push(*p);
                normals.push(n);
                kept.push(i);
            }
            None => rejected.push(i),
        }
    }
    Ok(NormalEstimation {
        cloud: PointCloud::with_normals(points, normals)?,
        kept,
        rejected,
    })
}

fn plane_normal(points: &[Point], nbrs: &[usize]) -> Option<Vector> {
    let n = nbrs.len() as f64;
    let centroid = nbrs.iter().fold(Vector::zeros(), |acc, &i| acc + points[i].coords) / n;
    let mut cov = Matrix3::zeros();
    for &i in nbrs {
        let d = points[i].coords - centroid;
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (lo, mid, hi) = (
        eig.eigenvalues[order[0]],
        eig.eigenvalues[order[1]],
        eig.eigenvalues[order[2]],
    );
    if !(hi > 0.0) || mid <= hi * 1e-12 || !(mid - lo > 0.0) {
        return None;
    }
    let normal = eig.eigenvectors.column(order[0]).normalize();
    normal.iter().all(|c| c.is_finite()).then_some(normal)
}
