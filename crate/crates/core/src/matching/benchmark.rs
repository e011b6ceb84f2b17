use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Rotation3, Unit};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{
    compute_overlap, describe_fragment, fragment_recall, ground_truth_matches, inlier_ratio, mutual_matches,
    prepare_fragment, DescribeParams, EvalConfig, FragmentFeatures, MatchReport, MatchSet, MatchingError, PairReport,
};
use crate::geometry::{
    apply_rigid, estimate_normals, load_cloud, random_rotation, save_cloud, CloudFormat, Point, PointCloud,
    RigidTransform, Vector,
};
use crate::network::Model;
use crate::seed::derive_seed;
use crate::training::{generate_scene_with, SceneKind, SceneParams};

/// A cloud with normals and the indices of its keypoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Fragment {
    pub name: String,
    pub cloud: PointCloud,
    pub keypoints: Vec<usize>,
}

/// `transform` maps fragment `j` into the frame of fragment `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct FragmentPair {
    pub i: usize,
    pub j: usize,
    pub transform: RigidTransform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub name: String,
    pub fragments: Vec<Fragment>,
    pub pairs: Vec<FragmentPair>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkParams {
    pub scene: SceneParams,
    /// Camera positions in the scene's x-y plane.
    pub cameras: Vec<[f64; 2]>,
    /// Half-width of each fragment's square footprint.
    pub window: f64,
    /// Maximum camera tilt from straight down, in degrees.
    pub max_tilt_deg: f64,
    pub max_pairs: usize,
    pub overlap_min: f64,
    pub overlap_radius: f64,
    /// Standard deviation of isotropic Gaussian noise added to every scan point.
    pub noise_sigma: f64,
}

impl Default for BenchmarkParams {
    fn default() -> Self {
        Self {
            scene: SceneParams::default(),
            cameras: vec![
                [-0.6, -0.3],
                [0.0, -0.3],
                [0.6, -0.3],
                [-0.6, 0.3],
                [0.0, 0.3],
                [0.6, 0.3],
            ],
            window: 0.9,
            max_tilt_deg: 15.0,
            max_pairs: 10,
            overlap_min: 0.3,
            overlap_radius: 0.1,
            noise_sigma: 0.002,
        }
    }
}

/// Fragments scanned independently from one heightfield scene, each in its
/// own camera frame, with every overlapping pair's ground truth.
///
/// Pairs are taken in `(i, j)` order among those whose overlap exceeds
/// `overlap_min`, up to `max_pairs`.
pub fn synthetic_benchmark(
    seed: u64,
    params: &BenchmarkParams,
    describe: &DescribeParams,
) -> Result<Benchmark, MatchingError> {
    let scene = generate_scene_with(seed, SceneKind::Heightfield, &params.scene);
    let mut poses = Vec::new();
    let mut fragments = Vec::new();
    for (k, c) in params.cameras.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1000 + k as u64));
        let yaw = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let tilt = rng.gen_range(0.0..params.max_tilt_deg.to_radians());
        let axis_angle = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
        let axis = Unit::new_normalize(Vector::new(axis_angle.cos(), axis_angle.sin(), 0.0));
        let rotation = Rotation3::from_axis_angle(&axis, tilt) * Rotation3::from_axis_angle(&Vector::z_axis(), yaw);
        let camera = Point::new(c[0], c[1], 0.0);
        let pose = RigidTransform::new(*rotation.matrix(), camera.coords);
        let footprint = (
            [c[0] - params.window, c[1] - params.window],
            [c[0] + params.window, c[1] + params.window],
        );
        let (points, _) = scene.surface.sample(footprint, params.scene.density, &camera, &mut rng);
        let to_camera = pose.inverse();
        let noise = Normal::new(0.0, params.noise_sigma.max(0.0)).map_err(|e| MatchingError::Config(e.to_string()))?;
        let local = PointCloud::new(
            points
                .iter()
                .map(|p| {
                    let jitter = Vector::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
                    to_camera.apply_point(&(p + jitter))
                })
                .collect(),
        )?;
        fragments.push(prepare_fragment(&format!("fragment_{k:03}"), &local, describe)?);
        poses.push(pose);
    }
    let mut pairs = Vec::new();
    'outer: for i in 0..fragments.len() {
        for j in i + 1..fragments.len() {
            let transform = poses[i].inverse().compose(&poses[j]);
            let overlap = compute_overlap(
                &fragments[i].cloud,
                &fragments[j].cloud,
                &transform,
                params.overlap_radius,
            )?;
            if overlap > params.overlap_min {
                pairs.push(FragmentPair { i, j, transform });
                if pairs.len() == params.max_pairs {
                    break 'outer;
                }
            }
        }
    }
    Ok(Benchmark {
        name: format!("synthetic-{seed}"),
        fragments,
        pairs,
    })
}

/// Rotates every fragment by its own random rotation, keeping keypoint
/// indices, and composes the ground truth to match.
pub fn make_rotated_benchmark(bench: &Benchmark, seed: u64) -> Benchmark {
    let rotations: Vec<RigidTransform> = (0..bench.fragments.len())
        .map(|k| random_rotation(derive_seed(seed, k as u64)))
        .collect();
    Benchmark {
        name: format!("{}-rotated", bench.name),
        fragments: bench
            .fragments
            .iter()
            .zip(&rotations)
            .map(|(f, r)| Fragment {
                name: f.name.clone(),
                cloud: apply_rigid(&f.cloud, r),
                keypoints: f.keypoints.clone(),
            })
            .collect(),
        pairs: bench
            .pairs
            .iter()
            .map(|p| FragmentPair {
                i: p.i,
                j: p.j,
                transform: rotations[p.i].compose(&p.transform).compose(&rotations[p.j].inverse()),
            })
            .collect(),
    }
}

/// Seeded uniform subsample without replacement, in index order.
pub fn sparsify(cloud: &PointCloud, keep_fraction: f64, seed: u64) -> Result<PointCloud, MatchingError> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(MatchingError::KeepFraction(keep_fraction));
    }
    if keep_fraction == 1.0 {
        return Ok(cloud.clone());
    }
    let n = ((cloud.len() as f64 * keep_fraction).round() as usize).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = sample(&mut rng, cloud.len(), n).into_vec();
    picked.sort_unstable();
    Ok(cloud.select(&picked))
}

/// Sparsifies every fragment, then re-estimates normals and re-selects
/// keypoints on what remains.
pub fn sparsify_benchmark(
    bench: &Benchmark,
    keep_fraction: f64,
    seed: u64,
    describe: &DescribeParams,
) -> Result<Benchmark, MatchingError> {
    let mut fragments = Vec::with_capacity(bench.fragments.len());
    for (k, f) in bench.fragments.iter().enumerate() {
        let sparse = sparsify(&f.cloud.without_normals(), keep_fraction, derive_seed(seed, k as u64))?;
        let cloud = estimate_normals(&sparse, &describe.normals)?.cloud;
        let keypoints = describe.keypoints.select(&cloud, describe.seed)?;
        fragments.push(Fragment {
            name: f.name.clone(),
            cloud,
            keypoints,
        });
    }
    Ok(Benchmark {
        name: format!("{}-keep{keep_fraction}", bench.name),
        fragments,
        pairs: bench.pairs.clone(),
    })
}

/// Features of every fragment and the mutual matches of every pair.
#[derive(Debug, Clone, PartialEq)]
pub struct DescribedBenchmark {
    pub features: Vec<FragmentFeatures>,
    pub matches: Vec<MatchSet>,
}

impl DescribedBenchmark {
    pub fn new(bench: &Benchmark, model: &Model, params: &DescribeParams) -> Result<Self, MatchingError> {
        if bench.pairs.is_empty() {
            return Err(MatchingError::NoPairs);
        }
        let features = bench
            .fragments
            .iter()
            .map(|f| describe_fragment(f, model, params))
            .collect::<Result<Vec<_>, _>>()?;
        let matches = bench
            .pairs
            .iter()
            .map(|p| mutual_matches(&features[p.i].codewords, &features[p.j].codewords))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { features, matches })
    }

    fn ratios(&self, bench: &Benchmark, tau1: f64) -> Vec<(usize, usize, f64, bool)> {
        bench
            .pairs
            .iter()
            .zip(&self.matches)
            .map(|(p, m)| {
                let gnd = ground_truth_matches(
                    m,
                    &self.features[p.i].keypoints,
                    &self.features[p.j].keypoints,
                    &p.transform,
                    tau1,
                );
                let r = inlier_ratio(m, &gnd);
                (m.len(), gnd.len(), r.value, r.empty)
            })
            .collect()
    }

    pub fn report(&self, bench: &Benchmark, eval: &EvalConfig) -> Result<MatchReport, MatchingError> {
        eval.validate()?;
        let ratios = self.ratios(bench, eval.tau1);
        let values: Vec<f64> = ratios.iter().map(|r| r.2).collect();
        let recall = fragment_recall(&values, eval.tau2)?;
        Ok(MatchReport {
            scene: bench.name.clone(),
            pairs: bench
                .pairs
                .iter()
                .zip(ratios)
                .enumerate()
                .map(|(id, (p, (matches, inliers, ratio, empty)))| PairReport {
                    id,
                    i: p.i,
                    j: p.j,
                    matches,
                    inliers,
                    inlier_ratio: ratio,
                    empty,
                    matched: ratio > eval.tau2,
                })
                .collect(),
            recall,
        })
    }
}

pub fn evaluate_benchmark(
    bench: &Benchmark,
    model: &Model,
    params: &DescribeParams,
    eval: &EvalConfig,
) -> Result<(MatchReport, DescribedBenchmark), MatchingError> {
    let described = DescribedBenchmark::new(bench, model, params)?;
    Ok((described.report(bench, eval)?, described))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// `tau1` or `tau2`.
    pub parameter: &'static str,
    pub threshold: f64,
    pub recall: f64,
}

/// Recall over a grid of each threshold with the other held at `eval`.
pub fn sweep(
    bench: &Benchmark,
    described: &DescribedBenchmark,
    eval: &EvalConfig,
    tau1s: &[f64],
    tau2s: &[f64],
) -> Result<Vec<SweepRow>, MatchingError> {
    let mut rows = Vec::new();
    for &t in tau1s {
        let values: Vec<f64> = described.ratios(bench, t).iter().map(|r| r.2).collect();
        rows.push(SweepRow {
            parameter: "tau1",
            threshold: t,
            recall: fragment_recall(&values, eval.tau2)?,
        });
    }
    let values: Vec<f64> = described.ratios(bench, eval.tau1).iter().map(|r| r.2).collect();
    for &t in tau2s {
        rows.push(SweepRow {
            parameter: "tau2",
            threshold: t,
            recall: fragment_recall(&values, t)?,
        });
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("parameter,threshold,recall\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{}", r.parameter, r.threshold, r.recall);
    }
    s
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> MatchingError + '_ {
    move |source| MatchingError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `<dir>/manifest.txt` with one PLY and one keypoint file per
/// fragment, and returns the manifest path.
pub fn write_manifest(bench: &Benchmark, dir: &Path) -> Result<std::path::PathBuf, MatchingError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut text = format!("# {}\n", bench.name);
    for (k, f) in bench.fragments.iter().enumerate() {
        let cloud_name = format!("{}.ply", f.name);
        save_cloud(&f.cloud, &dir.join(&cloud_name), CloudFormat::Ply)?;
        let kp_name = format!("{}.keypoints", f.name);
        let kp: String = f.keypoints.iter().map(|i| format!("{i}\n")).collect();
        let kp_path = dir.join(&kp_name);
        std::fs::write(&kp_path, kp).map_err(io_err(&kp_path))?;
        let _ = writeln!(text, "fragment {cloud_name}");
        let _ = writeln!(text, "keypoints {k} {kp_name}");
    }
    for p in &bench.pairs {
        let m: Vec<String> = p.transform.to_row_major().iter().map(|v| v.to_string()).collect();
        let _ = writeln!(text, "pair {} {} {}", p.i, p.j, m.join(" "));
    }
    let path = dir.join("manifest.txt");
    std::fs::write(&path, text).map_err(io_err(&path))?;
    Ok(path)
}

/// Reads a manifest of `fragment <path>`, `keypoints <k> <path>` and
/// `pair <i> <j> <16 numbers>` lines; paths are relative to the manifest.
///
/// Fragments without keypoints are prepared with `describe`; a fragment that
/// has normals keeps them and only gets keypoints selected.
pub fn read_manifest(path: &Path, describe: &DescribeParams) -> Result<Benchmark, MatchingError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut clouds: Vec<(String, PointCloud)> = Vec::new();
    let mut keypoints: Vec<Option<Vec<usize>>> = Vec::new();
    let mut pairs = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |reason: String| MatchingError::Manifest { line: n + 1, reason };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens[0] {
            "fragment" if tokens.len() == 2 => {
                let p = base.join(tokens[1]);
                let format = CloudFormat::from_path(&p).unwrap_or(CloudFormat::Xyz);
                let cloud = load_cloud(&p, format)?;
                let name = Path::new(tokens[1])
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| tokens[1].to_string());
                clouds.push((name, cloud));
                keypoints.push(None);
            }
            "keypoints" if tokens.len() == 3 => {
                let k: usize = tokens[1]
                    .parse()
                    .map_err(|_| bad(format!("bad fragment index {:?}", tokens[1])))?;
                if k >= clouds.len() {
                    return Err(bad(format!("keypoints for undeclared fragment {k}")));
                }
                let p = base.join(tokens[2]);
                let list = std::fs::read_to_string(&p).map_err(io_err(&p))?;
                let idx = list
                    .split_whitespace()
                    .map(|t| t.parse::<usize>().ok().filter(|&i| i < clouds[k].1.len()))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| bad(format!("bad keypoint index in {}", p.display())))?;
                keypoints[k] = Some(idx);
            }
            "pair" if tokens.len() == 19 => {
                let i: usize = tokens[1].parse().map_err(|_| bad("bad pair index".into()))?;
                let j: usize = tokens[2].parse().map_err(|_| bad("bad pair index".into()))?;
                let mut m = [0.0; 16];
                for (slot, t) in m.iter_mut().zip(&tokens[3..]) {
                    *slot = t.parse().map_err(|_| bad(format!("bad matrix entry {t:?}")))?;
                }
                pairs.push((n + 1, i, j, RigidTransform::from_row_major(&m)));
            }
            other => {
                return Err(bad(format!(
                    "unrecognized entry {other:?} with {} fields",
                    tokens.len()
                )))
            }
        }
    }
    let mut fragments = Vec::with_capacity(clouds.len());
    for ((name, cloud), kp) in clouds.into_iter().zip(keypoints) {
        fragments.push(match (kp, cloud.has_normals()) {
            (Some(keypoints), true) => Fragment { name, cloud, keypoints },
            (None, true) => {
                let keypoints = describe.keypoints.select(&cloud, describe.seed)?;
                Fragment { name, cloud, keypoints }
            }
            (_, false) => prepare_fragment(&name, &cloud, describe)?,
        });
    }
    let mut out = Vec::with_capacity(pairs.len());
    for (line, i, j, transform) in pairs {
        if i >= fragments.len() || j >= fragments.len() {
            return Err(MatchingError::Manifest {
                line,
                reason: format!("pair ({i}, {j}) refers to a missing fragment"),
            });
        }
        out.push(FragmentPair { i, j, transform });
    }
    let name = path
        .parent()
        .and_then(|p| p.file_name())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "manifest".into());
    Ok(Benchmark {
        name,
        fragments,
        pairs: out,
    })
}
