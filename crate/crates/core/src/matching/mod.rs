//! Descriptor matching between fragments and the fragment-recall protocol.

mod benchmark;
mod describe;

pub use benchmark::{
    evaluate_benchmark, make_rotated_benchmark, read_manifest, sparsify, sparsify_benchmark, sweep, sweep_csv,
    synthetic_benchmark, write_manifest, Benchmark, BenchmarkParams, DescribedBenchmark, Fragment, FragmentPair,
    SweepRow,
};
pub use describe::{describe_fragment, prepare_fragment, DescribeParams, FragmentFeatures};

use std::fmt::Write as _;

use thiserror::Error;

use crate::geometry::{GeometryError, PointCloud, RigidTransform, SpatialIndex};
use crate::network::{Codeword, NetworkError};
use crate::ppf::PpfError;

#[derive(Debug, Error)]
pub enum MatchingError {
    #[error("no keypoint produced a usable patch ({rejected} rejected)")]
    NoFeatures { rejected: usize },
    #[error("empty feature set")]
    EmptyFeatures,
    #[error("no fragment pairs to evaluate")]
    NoPairs,
    #[error("invalid evaluation config: {0}")]
    Config(String),
    #[error("manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },
    #[error("keep fraction must lie in (0, 1], got {0}")]
    KeepFraction(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Ppf(#[from] PpfError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    /// Inlier distance in meters.
    pub tau1: f64,
    /// Inlier-ratio threshold for a pair to count as matched.
    pub tau2: f64,
    pub overlap_min: f64,
    pub overlap_radius: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            tau1: 0.10,
            tau2: 0.05,
            overlap_min: 0.30,
            overlap_radius: 0.10,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), MatchingError> {
        if !(self.tau1 > 0.0 && self.overlap_radius > 0.0 && self.overlap_min > 0.0) {
            return Err(MatchingError::Config("thresholds must be positive".into()));
        }
        if !(self.tau2 > 0.0 && self.tau2 < 1.0) {
            return Err(MatchingError::Config(format!(
                "tau2 must lie in (0, 1), got {}",
                self.tau2
            )));
        }
        Ok(())
    }
}

/// Correspondences `(index into P, index into Q)`, ascending in P.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MatchSet {
    pub pairs: Vec<(usize, usize)>,
}

impl MatchSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn transposed(&self) -> MatchSet {
        let mut pairs: Vec<_> = self.pairs.iter().map(|&(i, j)| (j, i)).collect();
        pairs.sort_unstable();
        MatchSet { pairs }
    }
}

fn squared_distance(a: &Codeword, b: &Codeword) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Pairs that are each other's nearest neighbor in codeword space (L2,
/// ties to the lowest index).
pub fn mutual_matches(p: &[Codeword], q: &[Codeword]) -> Result<MatchSet, MatchingError> {
    if p.is_empty() || q.is_empty() {
        return Err(MatchingError::EmptyFeatures);
    }
    let d: Vec<Vec<f64>> = p
        .iter()
        .map(|a| q.iter().map(|b| squared_distance(a, b)).collect())
        .collect();
    let argmin = |it: &mut dyn Iterator<Item = f64>| {
        let mut best = (0, f64::INFINITY);
        for (k, v) in it.enumerate() {
            if v < best.1 {
                best = (k, v);
            }
        }
        best.0
    };
    let nn_q: Vec<usize> = d.iter().map(|row| argmin(&mut row.iter().copied())).collect();
    let nn_p: Vec<usize> = (0..q.len()).map(|j| argmin(&mut d.iter().map(|row| row[j]))).collect();
    Ok(MatchSet {
        pairs: nn_q
            .iter()
            .enumerate()
            .filter(|&(i, &j)| nn_p[j] == i)
            .map(|(i, &j)| (i, j))
            .collect(),
    })
}

/// Matches with `‖p − T·q‖ < tau1`.
pub fn ground_truth_matches(
    m: &MatchSet,
    p: &[crate::geometry::Point],
    q: &[crate::geometry::Point],
    t: &RigidTransform,
    tau1: f64,
) -> MatchSet {
    MatchSet {
        pairs: m
            .pairs
            .iter()
            .copied()
            .filter(|&(i, j)| (p[i] - t.apply_point(&q[j])).norm() < tau1)
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InlierRatio {
    pub value: f64,
    /// Set when there were no matches and the ratio was defined as 0.
    pub empty: bool,
}

pub fn inlier_ratio(m: &MatchSet, m_gnd: &MatchSet) -> InlierRatio {
    if m.is_empty() {
        InlierRatio {
            value: 0.0,
            empty: true,
        }
    } else {
        InlierRatio {
            value: m_gnd.len() as f64 / m.len() as f64,
            empty: false,
        }
    }
}

/// Fraction of inlier ratios strictly above `tau2`.
pub fn fragment_recall(ratios: &[f64], tau2: f64) -> Result<f64, MatchingError> {
    if ratios.is_empty() {
        return Err(MatchingError::NoPairs);
    }
    Ok(ratios.iter().filter(|&&r| r > tau2).count() as f64 / ratios.len() as f64)
}

/// The smaller of the two directed fractions of points with a counterpart
/// within `radius` once `q` is moved by `t`.
pub fn compute_overlap(p: &PointCloud, q: &PointCloud, t: &RigidTransform, radius: f64) -> Result<f64, MatchingError> {
    if p.is_empty() || q.is_empty() {
        return Err(GeometryError::ZeroPoints.into());
    }
    let moved: Vec<_> = q.points().iter().map(|x| t.apply_point(x)).collect();
    let directed = |from: &[crate::geometry::Point], to: Vec<crate::geometry::Point>| -> Result<f64, MatchingError> {
        let index = SpatialIndex::from_points(to)?;
        let r2 = radius * radius;
        let mut hits = 0usize;
        for x in from {
            if index.knn_with_distances(x, 1)?[0].1 <= r2 {
                hits += 1;
            }
        }
        Ok(hits as f64 / from.len() as f64)
    };
    let a = directed(p.points(), moved.clone())?;
    let b = directed(&moved, p.points().to_vec())?;
    Ok(a.min(b))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacEstimate {
    pub iterations: u64,
    pub unrounded: f64,
}

/// Iterations for `confidence` of drawing at least one all-inlier sample.
pub fn ransac_iterations(
    confidence: f64,
    inlier_ratio: f64,
    sample_size: u32,
) -> Result<RansacEstimate, MatchingError> {
    if !(confidence > 0.0 && confidence < 1.0 && inlier_ratio > 0.0 && inlier_ratio < 1.0) || sample_size == 0 {
        return Err(MatchingError::Config(
            "need 0 < confidence < 1, 0 < inlier_ratio < 1 and a positive sample size".into(),
        ));
    }
    let w = inlier_ratio.powi(sample_size as i32);
    let unrounded = (-confidence).ln_1p() / (-w).ln_1p();
    Ok(RansacEstimate {
        iterations: unrounded.ceil() as u64,
        unrounded,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairReport {
    pub id: usize,
    pub i: usize,
    pub j: usize,
    pub matches: usize,
    pub inliers: usize,
    pub inlier_ratio: f64,
    pub empty: bool,
    pub matched: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchReport {
    pub scene: String,
    pub pairs: Vec<PairReport>,
    pub recall: f64,
}

impl MatchReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("pair,i,j,matches,inliers,inlier_ratio,matched\n");
        for p in &self.pairs {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                p.id, p.i, p.j, p.matches, p.inliers, p.inlier_ratio, p.matched as u8
            );
        }
        s
    }

    pub fn summary_line(&self) -> String {
        let matched = self.pairs.iter().filter(|p| p.matched).count();
        format!(
            "scene {}: recall {} ({matched}/{} pairs)",
            self.scene,
            self.recall,
            self.pairs.len()
        )
    }
}

#[cfg(test)]
mod tests;
