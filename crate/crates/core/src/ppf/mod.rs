//! Point pair features of local patches.
//!
//! A patch around a reference point `x_r` is encoded as one 4-vector per
//! neighbor: three angles and a distance, all invariant to rigid motion.

mod patch;
mod reconstruct;
mod record;
mod signature;

pub use patch::{extract_patch, LocalPatch, PatchParams};
pub use reconstruct::{canonical_rotation, gram_matrix, reconstruct_pair, Reconstruction};
pub use record::{decode_ppf_record, encode_normalized, encode_ppf_set, read_ppf_set, write_ppf_set, PpfRecord};
pub use signature::{render_signature, SignatureImage};

use std::f64::consts::PI;

use thiserror::Error;

use crate::geometry::{angle, GeometryError, OrientedPoint};

/// Pairs closer than this are treated as coincident.
pub const MIN_PAIR_DISTANCE: f64 = 1e-9;

/// Eigenvalues of the Gram matrix below `-PSD_TOLERANCE` are inconsistent.
pub const PSD_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum PpfError {
    #[error("coincident points: pair distance {0:e}")]
    CoincidentPoints(f64),
    #[error("patch rejected: {found} neighbors, at least {required} required")]
    TooFewNeighbors { found: usize, required: usize },
    #[error("center index {center} out of range for {len} points")]
    CenterOutOfRange { center: usize, len: usize },
    #[error("cloud has no normals")]
    MissingNormals,
    #[error("every pair in the patch is degenerate")]
    AllPairsDegenerate,
    #[error("inconsistent feature: Gram matrix has eigenvalue {0:e}")]
    NotPositiveSemidefinite(f64),
    #[error("empty feature set")]
    Empty,
    #[error("malformed feature record: {0}")]
    Malformed(String),
    #[error("radius must be positive, got {0}")]
    BadRadius(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Which pair feature to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PpfFormulation {
    /// `(∠(n_r,d), ∠(n_i,d), ∠(n_r,n_i), ‖d‖)` with `d = p_r − p_i`.
    #[default]
    Paper,
    /// The Darboux-frame pair feature of FPFH: `(θ, α, φ, ‖d‖)` where `θ` is an
    /// angle in `[−π, π]` and `α`, `φ` are cosines in `[−1, 1]`.
    FpfhStyle,
}

impl PpfFormulation {
    pub fn code(self) -> u8 {
        match self {
            Self::Paper => 0,
            Self::FpfhStyle => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Self::Paper),
            1 => Some(Self::FpfhStyle),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Paper => "paper",
            Self::FpfhStyle => "fpfh",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "paper" | "ppf" => Some(Self::Paper),
            "fpfh" | "fpfh_style" | "ppfh" => Some(Self::FpfhStyle),
            _ => None,
        }
    }

    /// Per-component `(offset, scale)` so that `(v − offset) / scale ∈ [0, 1]`.
    /// The distance scale is given separately by the patch radius.
    fn angle_ranges(self) -> [(f64, f64); 3] {
        match self {
            Self::Paper => [(0.0, PI); 3],
            Self::FpfhStyle => [(-PI, 2.0 * PI), (-1.0, 2.0), (-1.0, 2.0)],
        }
    }
}

/// A single pair feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ppf(pub [f64; 4]);

impl Ppf {
    pub fn new(f1: f64, f2: f64, f3: f64, f4: f64) -> Self {
        Self([f1, f2, f3, f4])
    }
    /// `∠(n_r, d)`.
    pub fn f1(&self) -> f64 {
        self.0[0]
    }
    /// `∠(n_i, d)`.
    pub fn f2(&self) -> f64 {
        self.0[1]
    }
    /// `∠(n_r, n_i)`.
    pub fn f3(&self) -> f64 {
        self.0[2]
    }
    /// `‖d‖`.
    pub fn f4(&self) -> f64 {
        self.0[3]
    }

    pub fn max_abs_diff(&self, other: &Ppf) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn compute_ppf(
    reference: &OrientedPoint,
    other: &OrientedPoint,
    formulation: PpfFormulation,
) -> Result<Ppf, PpfError> {
    let d = reference.position - other.position;
    let dist = d.norm();
    if !(dist >= MIN_PAIR_DISTANCE) {
        return Err(PpfError::CoincidentPoints(dist));
    }
    match formulation {
        PpfFormulation::Paper => Ok(Ppf::new(
            angle(&reference.normal, &d)?,
            angle(&other.normal, &d)?,
            angle(&reference.normal, &other.normal)?,
            dist,
        )),
        PpfFormulation::FpfhStyle => Ok(fpfh_pair(reference, other, dist)),
    }
}

/// Pair feature of Rusu et al. as computed by PCL's `computePairFeatures`.
///
/// The source of the Darboux frame is whichever point's normal makes the
/// smaller angle with the connecting line.
fn fpfh_pair(reference: &OrientedPoint, other: &OrientedPoint, dist: f64) -> Ppf {
    let mut dp = other.position - reference.position;
    let (mut n1, mut n2) = (reference.normal, other.normal);
    let c1 = n1.dot(&dp) / dist;
    let c2 = n2.dot(&dp) / dist;
    let phi = if c1.abs().clamp(0.0, 1.0).acos() > c2.abs().clamp(0.0, 1.0).acos() {
        std::mem::swap(&mut n1, &mut n2);
        dp = -dp;
        -c2
    } else {
        c1
    };
    let v = dp.cross(&n1);
    let v_norm = v.norm();
    if v_norm == 0.0 {
        return Ppf::new(0.0, 0.0, 0.0, dist);
    }
    let v = v / v_norm;
    let w = n1.cross(&v);
    let alpha = v.dot(&n2);
    let theta = w.dot(&n2).atan2(n1.dot(&n2));
    Ppf::new(theta, alpha, phi, dist)
}

/// One feature per patch neighbor: `F_Ω = { f(x_r, x_i) }`.
#[derive(Debug, Clone, PartialEq)]
pub struct PpfSet {
    pub rows: Vec<Ppf>,
    /// Patch radius used for normalization.
    pub radius: f64,
    pub formulation: PpfFormulation,
    /// Neighbors dropped as coincident with the reference.
    pub dropped: usize,
}

impl PpfSet {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn max_abs_diff(&self, other: &PpfSet) -> f64 {
        assert_eq!(self.len(), other.len());
        self.rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }
}

pub fn compute_patch_ppfs(patch: &LocalPatch, formulation: PpfFormulation) -> Result<PpfSet, PpfError> {
    let mut rows = Vec::with_capacity(patch.neighbors.len());
    let mut dropped = 0;
    for nb in &patch.neighbors {
        match compute_ppf(&patch.reference, nb, formulation) {
            Ok(f) => rows.push(f),
            Err(PpfError::CoincidentPoints(_)) => dropped += 1,
            Err(e) => return Err(e),
        }
    }
    if rows.is_empty() {
        return Err(PpfError::AllPairsDegenerate);
    }
    Ok(PpfSet {
        rows,
        radius: patch.radius,
        formulation,
        dropped,
    })
}

/// Features scaled into `[0, 1]⁴`, the network's input domain.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedPpfSet {
    pub rows: Vec<[f64; 4]>,
    pub radius: f64,
    pub formulation: PpfFormulation,
}

impl NormalizedPpfSet {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Inverse of [`normalize_ppfs`] (clipped distances stay clipped).
    pub fn denormalize(&self) -> PpfSet {
        let ranges = self.formulation.angle_ranges();
        PpfSet {
            rows: self
                .rows
                .iter()
                .map(|r| {
                    Ppf([
                        r[0] * ranges[0].1 + ranges[0].0,
                        r[1] * ranges[1].1 + ranges[1].0,
                        r[2] * ranges[2].1 + ranges[2].0,
                        r[3] * self.radius,
                    ])
                })
                .collect(),
            radius: self.radius,
            formulation: self.formulation,
            dropped: 0,
        }
    }
}

/// Angles to `[0, 1]` by their range, distance divided by the radius and
/// clipped at 1.
pub fn normalize_ppfs(set: &PpfSet) -> Result<NormalizedPpfSet, PpfError> {
    if !(set.radius > 0.0) {
        return Err(PpfError::BadRadius(set.radius));
    }
    let ranges = set.formulation.angle_ranges();
    Ok(NormalizedPpfSet {
        rows: set
            .rows
            .iter()
            .map(|f| {
                [
                    ((f.0[0] - ranges[0].0) / ranges[0].1).clamp(0.0, 1.0),
                    ((f.0[1] - ranges[1].0) / ranges[1].1).clamp(0.0, 1.0),
                    ((f.0[2] - ranges[2].0) / ranges[2].1).clamp(0.0, 1.0),
                    (f.0[3] / set.radius).min(1.0),
                ]
            })
            .collect(),
        radius: set.radius,
        formulation: set.formulation,
    })
}

/// Patch around `cloud[center]`, its features and their normalization, with
/// the subsampling seed derived from `seed` and the center index.
pub fn patch_features(
    cloud: &crate::geometry::PointCloud,
    index: &crate::geometry::SpatialIndex,
    center: usize,
    params: &PatchParams,
    formulation: PpfFormulation,
    seed: u64,
) -> Result<NormalizedPpfSet, PpfError> {
    let patch = extract_patch(
        cloud,
        index,
        center,
        params,
        crate::seed::derive_seed(seed, center as u64),
    )?;
    normalize_ppfs(&compute_patch_ppfs(&patch, formulation)?)
}
