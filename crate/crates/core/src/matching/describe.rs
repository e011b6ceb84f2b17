use rayon::prelude::*;

use super::{Fragment, MatchingError};
use crate::geometry::{downsample_uniform, estimate_normals, NormalParams, Point, PointCloud, SpatialIndex};
use crate::network::{Codeword, Model};
use crate::ppf::{patch_features, PatchParams, PpfFormulation};
use crate::training::KeypointSelection;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescribeParams {
    /// Voxel size for downsampling raw clouds; 0 disables it.
    pub voxel: f64,
    pub normals: NormalParams,
    pub keypoints: KeypointSelection,
    pub patch: PatchParams,
    pub formulation: PpfFormulation,
    pub seed: u64,
}

impl Default for DescribeParams {
    fn default() -> Self {
        Self {
            voxel: 0.03,
            normals: NormalParams::default(),
            keypoints: KeypointSelection::Cell(0.1),
            patch: PatchParams::default(),
            formulation: PpfFormulation::Paper,
            seed: 0,
        }
    }
}

/// Codewords for the keypoints whose patch was usable, in keypoint order.
#[derive(Debug, Clone, PartialEq)]
pub struct FragmentFeatures {
    /// Index of each described keypoint in the fragment cloud.
    pub indices: Vec<usize>,
    pub keypoints: Vec<Point>,
    pub codewords: Vec<Codeword>,
    pub rejected: usize,
}

impl FragmentFeatures {
    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }
}

/// Downsamples a raw cloud, estimates normals and selects keypoints.
pub fn prepare_fragment(name: &str, raw: &PointCloud, params: &DescribeParams) -> Result<Fragment, MatchingError> {
    let cloud = if params.voxel > 0.0 {
        downsample_uniform(raw, params.voxel)?
    } else {
        raw.clone()
    };
    let cloud = estimate_normals(&cloud, &params.normals)?.cloud;
    let keypoints = params.keypoints.select(&cloud, params.seed)?;
    Ok(Fragment {
        name: name.to_string(),
        cloud,
        keypoints,
    })
}

pub fn describe_fragment(
    fragment: &Fragment,
    model: &Model,
    params: &DescribeParams,
) -> Result<FragmentFeatures, MatchingError> {
    let cloud = &fragment.cloud;
    if cloud.is_empty() || fragment.keypoints.is_empty() {
        return Err(MatchingError::NoFeatures { rejected: 0 });
    }
    let index = SpatialIndex::build(cloud)?;
    let results: Vec<Option<Codeword>> = fragment
        .keypoints
        .par_iter()
        .map(|&k| {
            let set = patch_features(cloud, &index, k, &params.patch, params.formulation, params.seed).ok()?;
            model.encode(&set).ok()
        })
        .collect();
    let mut out = FragmentFeatures {
        indices: Vec::new(),
        keypoints: Vec::new(),
        codewords: Vec::new(),
        rejected: 0,
    };
    for (&k, r) in fragment.keypoints.iter().zip(results) {
        match r {
            Some(code) => {
                out.indices.push(k);
                out.keypoints.push(cloud.points()[k]);
                out.codewords.push(code);
            }
            None => out.rejected += 1,
        }
    }
    if out.is_empty() {
        return Err(MatchingError::NoFeatures { rejected: out.rejected });
    }
    Ok(out)
}
