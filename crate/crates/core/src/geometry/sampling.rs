use std::collections::BTreeMap;

use super::{GeometryError, PointCloud, Vector};

type VoxelKey = (i64, i64, i64);

fn voxel_buckets(cloud: &PointCloud, cell: f64) -> Result<BTreeMap<VoxelKey, Vec<usize>>, GeometryError> {
    if !(cell > 0.0 && cell.is_finite()) {
        return Err(GeometryError::BadCell(cell));
    }
    let mut buckets: BTreeMap<VoxelKey, Vec<usize>> = BTreeMap::new();
    for (i, p) in cloud.points().iter().enumerate() {
        let key = (
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        );
        buckets.entry(key).or_default().push(i);
    }
    Ok(buckets)
}

/// One representative index per occupied voxel, in lexicographic voxel order.
///
/// The representative is the member closest to the centroid of the voxel's
/// members, ties to the lower index.
pub fn uniform_sample_indices(cloud: &PointCloud, cell: f64) -> Result<Vec<usize>, GeometryError> {
    let pts = cloud.points();
    Ok(voxel_buckets(cloud, cell)?
        .into_values()
        .map(|members| {
            let centroid = members.iter().fold(Vector::zeros(), |a, &i| a + pts[i].coords) / members.len() as f64;
            let mut best = members[0];
            let mut best_d = f64::INFINITY;
            for &i in &members {
                let d = (pts[i].coords - centroid).norm_squared();
                if d < best_d {
                    best = i;
                    best_d = d;
                }
            }
            best
        })
        .collect())
}

pub fn downsample_uniform(cloud: &PointCloud, cell: f64) -> Result<PointCloud, GeometryError> {
    Ok(cloud.select(&uniform_sample_indices(cloud, cell)?))
}
