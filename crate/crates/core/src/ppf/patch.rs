use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::PpfError;
use crate::geometry::{OrientedPoint, PointCloud, SpatialIndex};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchParams {
    /// Neighborhood radius in meters.
    pub radius: f64,
    /// Neighbors kept after random subsampling.
    pub n_samples: usize,
    /// Patches with fewer neighbors are rejected.
    pub min_neighbors: usize,
}

impl Default for PatchParams {
    fn default() -> Self {
        Self {
            radius: 0.3,
            n_samples: 2048,
            min_neighbors: 16,
        }
    }
}

/// A reference point and the oriented points around it (reference excluded).
#[derive(Debug, Clone, PartialEq)]
pub struct LocalPatch {
    pub reference: OrientedPoint,
    pub neighbors: Vec<OrientedPoint>,
    pub radius: f64,
}

impl LocalPatch {
    pub fn transformed(&self, t: &crate::geometry::RigidTransform) -> Self {
        Self {
            reference: self.reference.transformed(t),
            neighbors: self.neighbors.iter().map(|n| n.transformed(t)).collect(),
            radius: self.radius,
        }
    }
}

/// Gathers the neighbors of `cloud[center]` within `params.radius` and keeps a
/// seeded random subset of at most `params.n_samples`.
///
/// The candidate set is put in index order before sampling, so the selection
/// depends only on membership and the seed, not on distance rounding.
pub fn extract_patch(
    cloud: &PointCloud,
    index: &SpatialIndex,
    center: usize,
    params: &PatchParams,
    seed: u64,
) -> Result<LocalPatch, PpfError> {
    if center >= cloud.len() {
        return Err(PpfError::CenterOutOfRange {
            center,
            len: cloud.len(),
        });
    }
    if !(params.radius > 0.0) {
        return Err(PpfError::BadRadius(params.radius));
    }
    let normals = cloud.normals().ok_or(PpfError::MissingNormals)?;
    let reference = OrientedPoint::new(cloud.points()[center], normals[center]);
    let mut members = index.radius_search(&reference.position, params.radius)?;
    members.retain(|&i| i != center);
    members.sort_unstable();
    if members.len() < params.min_neighbors {
        return Err(PpfError::TooFewNeighbors {
            found: members.len(),
            required: params.min_neighbors,
        });
    }
    if members.len() > params.n_samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = sample(&mut rng, members.len(), params.n_samples).into_vec();
        picked.sort_unstable();
        members = picked.into_iter().map(|k| members[k]).collect();
    }
    Ok(LocalPatch {
        reference,
        neighbors: members
            .into_iter()
            .map(|i| OrientedPoint::new(cloud.points()[i], normals[i]))
            .collect(),
        radius: params.radius,
    })
}
