use std::io::Write;
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::TrainingError;
use crate::autodiff::Tensor2;
use crate::geometry::{
    downsample_uniform, estimate_normals, load_cloud, uniform_sample_indices, CloudFormat, GeometryError, NormalParams,
    Point, PointCloud, SpatialIndex,
};
use crate::network::ppf_tensor;
use crate::ppf::{
    decode_ppf_record, encode_normalized, patch_features, NormalizedPpfSet, PatchParams, PpfFormulation, PpfRecord,
};
use crate::seed::{derive_seed, str_salt};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KeypointSelection {
    /// One keypoint per occupied voxel of this size.
    Cell(f64),
    /// A seeded uniform subset of this many points.
    Count(usize),
}

impl KeypointSelection {
    /// Indices into `cloud`, ascending for `Count`, voxel order for `Cell`.
    pub fn select(&self, cloud: &PointCloud, seed: u64) -> Result<Vec<usize>, GeometryError> {
        match *self {
            KeypointSelection::Cell(cell) => uniform_sample_indices(cloud, cell),
            KeypointSelection::Count(n) => {
                if n >= cloud.len() {
                    return Ok((0..cloud.len()).collect());
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut picked = sample(&mut rng, cloud.len(), n).into_vec();
                picked.sort_unstable();
                Ok(picked)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetParams {
    /// Voxel size of the initial downsampling; 0 disables it.
    pub voxel: f64,
    pub normals: NormalParams,
    pub keypoints: KeypointSelection,
    pub patch: PatchParams,
    pub formulation: PpfFormulation,
    pub seed: u64,
    pub validation_fraction: f64,
}

impl Default for DatasetParams {
    fn default() -> Self {
        Self {
            voxel: 0.03,
            normals: NormalParams::default(),
            keypoints: KeypointSelection::Cell(0.3),
            patch: PatchParams::default(),
            formulation: PpfFormulation::Paper,
            seed: 0,
            validation_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
}

impl Split {
    /// Deterministic split of a source by the hash of its id.
    pub fn of_source(source: &str, validation_fraction: f64) -> Split {
        let h = Sha256::digest(source.as_bytes());
        let u = u64::from_le_bytes(h[..8].try_into().unwrap()) as f64 / 2f64.powi(64);
        if u < validation_fraction {
            Split::Validation
        } else {
            Split::Train
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchRecord {
    pub source: String,
    /// Index of the reference point in the processed cloud.
    pub keypoint: usize,
    pub position: Point,
    pub split: Split,
    pub ppfs: NormalizedPpfSet,
}

impl PatchRecord {
    pub fn input(&self) -> Tensor2 {
        ppf_tensor(&self.ppfs)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PatchDataset {
    pub records: Vec<PatchRecord>,
    /// Keypoints whose patch was rejected.
    pub rejected: usize,
}

const MAGIC: &[u8; 4] = b"PPFD";
const VERSION: u32 = 1;

impl PatchDataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.records.len())
            .filter(|&i| self.records[i].split == split)
            .collect()
    }

    /// Hex SHA-256 over the serialized dataset.
    pub fn digest(&self) -> String {
        Sha256::digest(self.to_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.rejected as u64).to_le_bytes());
        out.extend_from_slice(&(self.records.len() as u64).to_le_bytes());
        for r in &self.records {
            out.extend_from_slice(&(r.source.len() as u64).to_le_bytes());
            out.extend_from_slice(r.source.as_bytes());
            out.extend_from_slice(&(r.keypoint as u64).to_le_bytes());
            for c in r.position.coords.iter() {
                out.extend_from_slice(&c.to_le_bytes());
            }
            out.push(matches!(r.split, Split::Validation) as u8);
            let set = encode_normalized(&r.ppfs);
            out.extend_from_slice(&(set.len() as u64).to_le_bytes());
            out.extend_from_slice(&set);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TrainingError> {
        let bad = |m: String| TrainingError::Config(format!("corrupt dataset file: {m}"));
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8], TrainingError> {
            let end = pos
                .checked_add(n)
                .filter(|&e| e <= bytes.len())
                .ok_or_else(|| bad("truncated".into()))?;
            let s = &bytes[pos..end];
            pos = end;
            Ok(s)
        };
        if take(4)? != MAGIC {
            return Err(bad("missing PPFD header".into()));
        }
        let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
        if version != VERSION {
            return Err(bad(format!("version {version}, expected {VERSION}")));
        }
        let u64_of = |b: &[u8]| u64::from_le_bytes(b.try_into().unwrap());
        let rejected = u64_of(take(8)?) as usize;
        let count = u64_of(take(8)?) as usize;
        let mut records = Vec::new();
        for _ in 0..count {
            let n = u64_of(take(8)?) as usize;
            let source = String::from_utf8(take(n)?.to_vec()).map_err(|e| bad(e.to_string()))?;
            let keypoint = u64_of(take(8)?) as usize;
            let mut c = [0.0; 3];
            for v in &mut c {
                *v = f64::from_le_bytes(take(8)?.try_into().unwrap());
            }
            let split = match take(1)?[0] {
                0 => Split::Train,
                1 => Split::Validation,
                other => return Err(bad(format!("split tag {other}"))),
            };
            let n = u64_of(take(8)?) as usize;
            let ppfs = match decode_ppf_record(take(n)?).map_err(|e| bad(e.to_string()))? {
                PpfRecord::Normalized(s) => s,
                PpfRecord::Raw(_) => return Err(bad("raw feature set in dataset".into())),
            };
            records.push(PatchRecord {
                source,
                keypoint,
                position: Point::new(c[0], c[1], c[2]),
                split,
                ppfs,
            });
        }
        if pos != bytes.len() {
            return Err(bad("trailing bytes".into()));
        }
        Ok(Self { records, rejected })
    }

    pub fn save(&self, path: &Path) -> Result<(), TrainingError> {
        let io = |source| TrainingError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut f = std::fs::File::create(path).map_err(io)?;
        f.write_all(&self.to_bytes()).map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, TrainingError> {
        let bytes = std::fs::read(path).map_err(|source| TrainingError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }
}

/// Downsamples, estimates normals, picks keypoints and extracts normalized
/// patch features for every source. Rejected patches are counted and skipped.
pub fn build_dataset(sources: &[(String, PointCloud)], params: &DatasetParams) -> Result<PatchDataset, TrainingError> {
    let mut dataset = PatchDataset::default();
    for (source, raw) in sources {
        let salt = str_salt(source);
        let cloud = if params.voxel > 0.0 {
            downsample_uniform(raw, params.voxel)?
        } else {
            raw.clone()
        };
        let normals = match estimate_normals(&cloud, &params.normals) {
            Ok(n) => n.cloud,
            Err(GeometryError::TooFewPoints { .. }) => continue,
            Err(e) => return Err(e.into()),
        };
        if normals.is_empty() {
            continue;
        }
        let keypoints = params.keypoints.select(&normals, derive_seed(params.seed, salt))?;
        let index = SpatialIndex::build(&normals)?;
        let patch_seed = derive_seed(params.seed, salt.wrapping_add(1));
        let split = Split::of_source(source, params.validation_fraction);
        let features: Vec<_> = keypoints
            .par_iter()
            .map(|&k| patch_features(&normals, &index, k, &params.patch, params.formulation, patch_seed))
            .collect();
        for (&k, f) in keypoints.iter().zip(features) {
            match f {
                Ok(ppfs) => dataset.records.push(PatchRecord {
                    source: source.clone(),
                    keypoint: k,
                    position: normals.points()[k],
                    split,
                    ppfs,
                }),
                Err(_) => dataset.rejected += 1,
            }
        }
    }
    if dataset.is_empty() {
        return Err(TrainingError::NoPatches {
            rejected: dataset.rejected,
        });
    }
    Ok(dataset)
}

/// [`build_dataset`] over cloud files; the source id is the path as given.
pub fn build_dataset_from_paths(paths: &[&Path], params: &DatasetParams) -> Result<PatchDataset, TrainingError> {
    let mut sources = Vec::with_capacity(paths.len());
    for p in paths {
        let format = CloudFormat::from_path(p).unwrap_or(CloudFormat::Xyz);
        sources.push((p.display().to_string(), load_cloud(p, format)?));
    }
    build_dataset(&sources, params)
}
