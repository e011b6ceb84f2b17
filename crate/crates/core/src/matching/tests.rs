use super::*;
use crate::geometry::{random_rotation, Point};
use crate::network::NetworkConfig;
use crate::ppf::PatchParams;
use crate::training::KeypointSelection;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn codes(values: &[&[f64]]) -> Vec<Codeword> {
    values.iter().map(|v| Codeword(v.to_vec())).collect()
}

fn random_codes(n: usize, dim: usize, rng: &mut impl Rng) -> Vec<Codeword> {
    (0..n)
        .map(|_| Codeword((0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()))
        .collect()
}

fn brute_mutual(p: &[Codeword], q: &[Codeword]) -> Vec<(usize, usize)> {
    let d = |a: &Codeword, b: &Codeword| a.distance(b);
    let nn = |x: &Codeword, set: &[Codeword]| {
        let mut best = 0;
        for k in 1..set.len() {
            if d(x, &set[k]) < d(x, &set[best]) {
                best = k;
            }
        }
        best
    };
    let mut out = Vec::new();
    for (i, a) in p.iter().enumerate() {
        let j = nn(a, q);
        if nn(&q[j], p) == i {
            out.push((i, j));
        }
    }
    out
}

#[test]
fn mutual_match_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = random_codes(30, 8, &mut rng);
    let m = mutual_matches(&p, &p).unwrap();
    assert_eq!(m.pairs, (0..30).map(|i| (i, i)).collect::<Vec<_>>());

    let m = mutual_matches(&codes(&[&[0.0], &[10.0]]), &codes(&[&[1.0], &[11.0]])).unwrap();
    assert_eq!(m.pairs, vec![(0, 0), (1, 1)]);

    assert!(mutual_matches(&[], &p).is_err());
}

#[test]
fn mutual_matches_equal_brute_force_and_are_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..3 {
        let p = random_codes(200, 16, &mut rng);
        let q = random_codes(200, 16, &mut rng);
        let m = mutual_matches(&p, &q).unwrap();
        assert_eq!(m.pairs, brute_mutual(&p, &q));
        assert_eq!(mutual_matches(&q, &p).unwrap(), m.transposed());
        let mut seen_q: Vec<usize> = m.pairs.iter().map(|x| x.1).collect();
        seen_q.sort_unstable();
        seen_q.dedup();
        assert_eq!(seen_q.len(), m.len());
    }
}

#[test]
fn mutual_match_ties_go_to_lowest_index() {
    let p = codes(&[&[0.0]]);
    let q = codes(&[&[1.0], &[-1.0]]);
    assert_eq!(mutual_matches(&p, &q).unwrap().pairs, vec![(0, 0)]);
}

#[test]
fn ground_truth_filter() {
    let pts: Vec<Point> = (0..5).map(|i| Point::new(i as f64, 0.0, 0.0)).collect();
    let all = MatchSet {
        pairs: (0..5).map(|i| (i, i)).collect(),
    };
    assert_eq!(
        ground_truth_matches(&all, &pts, &pts, &RigidTransform::identity(), 0.1),
        all
    );

    let p = vec![Point::origin()];
    let q = vec![Point::new(0.1, 0.0, 0.0)];
    let one = MatchSet { pairs: vec![(0, 0)] };
    assert!(ground_truth_matches(&one, &p, &q, &RigidTransform::identity(), 0.1).is_empty());

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let t = random_rotation(4).compose(&RigidTransform::from_translation(crate::geometry::Vector::new(
        0.3, -0.2, 0.1,
    )));
    let q: Vec<Point> = (0..100).map(|_| Point::new(rng.gen(), rng.gen(), rng.gen())).collect();
    let p: Vec<Point> = q
        .iter()
        .map(|x| t.apply_point(x) + crate::geometry::Vector::new(rng.gen_range(-0.08..0.08), 0.0, 0.0))
        .collect();
    let m = MatchSet {
        pairs: (0..100).map(|i| (i, (i * 7) % 100)).collect(),
    };
    let kept = ground_truth_matches(&m, &p, &q, &t, 0.05);
    let expected: Vec<_> = m
        .pairs
        .iter()
        .copied()
        .filter(|&(i, j)| {
            let d = t.apply_point(&q[j]) - p[i];
            (d.x * d.x + d.y * d.y + d.z * d.z).sqrt() < 0.05
        })
        .collect();
    assert_eq!(kept.pairs, expected);
}

#[test]
fn inlier_ratio_and_recall() {
    let m = MatchSet {
        pairs: vec![(0, 0), (1, 1), (2, 2), (3, 3)],
    };
    assert_eq!(inlier_ratio(&m, &m).value, 1.0);
    let g = MatchSet { pairs: vec![(1, 1)] };
    assert_eq!(inlier_ratio(&m, &g).value, 0.25);
    let e = inlier_ratio(&MatchSet::default(), &MatchSet::default());
    assert_eq!(
        e,
        InlierRatio {
            value: 0.0,
            empty: true
        }
    );

    assert_eq!(fragment_recall(&[0.06, 0.01], 0.05).unwrap(), 0.5);
    assert_eq!(fragment_recall(&[0.05], 0.05).unwrap(), 0.0);
    assert_eq!(fragment_recall(&[0.3, 0.9], 0.05).unwrap(), 1.0);
    assert!(fragment_recall(&[], 0.05).is_err());
}

fn slab(x0: f64, x1: f64) -> PointCloud {
    let mut pts = Vec::new();
    let mut x = x0;
    while x < x1 - 1e-9 {
        for k in 0..50 {
            pts.push(Point::new(x, k as f64 * 0.02, 0.0));
        }
        x += 0.02;
    }
    PointCloud::new(pts).unwrap()
}

#[test]
fn overlap_examples() {
    let a = slab(0.0, 1.0);
    let t = random_rotation(5);
    let moved = crate::geometry::apply_rigid(&a, &t.inverse());
    assert_eq!(compute_overlap(&a, &moved, &t, 0.001).unwrap(), 1.0);

    let far = crate::geometry::apply_rigid(
        &a,
        &RigidTransform::from_translation(crate::geometry::Vector::new(10.0, 0.0, 0.0)),
    );
    assert_eq!(
        compute_overlap(&a, &far, &RigidTransform::identity(), 0.1).unwrap(),
        0.0
    );

    let p = slab(0.0, 2.0);
    let q = slab(1.0, 3.0);
    let o = compute_overlap(&p, &q, &RigidTransform::identity(), 0.005).unwrap();
    assert!((o - 0.5).abs() < 0.05, "{o}");
}

#[test]
fn ransac_examples() {
    let r = ransac_iterations(0.999, 0.05, 3).unwrap();
    assert_eq!(r.iterations, 55259);
    assert!((r.unrounded - 55258.6).abs() < 0.1, "{}", r.unrounded);
    let half = ransac_iterations(0.999, 0.5, 3).unwrap();
    assert!((half.unrounded - 0.001f64.ln() / 0.875f64.ln()).abs() < 1e-9);
    assert_eq!(half.iterations, 52);
    assert!(ransac_iterations(1e-300, 0.5, 3).unwrap().unrounded < 1e-290);
    assert!(ransac_iterations(1.0, 0.5, 3).is_err());
    assert!(ransac_iterations(0.9, 0.0, 3).is_err());
    let mut prev = f64::INFINITY;
    for k in 1..99 {
        let u = ransac_iterations(0.99, k as f64 / 100.0, 3).unwrap().unrounded;
        assert!(u < prev);
        prev = u;
    }
    assert!(ransac_iterations(0.9, 0.1, 3).unwrap().unrounded < ransac_iterations(0.99, 0.1, 3).unwrap().unrounded);
}

#[test]
fn sparsify_examples() {
    let pts: Vec<Point> = (0..10_000).map(|i| Point::new(i as f64, 0.0, 0.0)).collect();
    let cloud = PointCloud::new(pts).unwrap();
    assert_eq!(sparsify(&cloud, 1.0, 1).unwrap(), cloud);
    let s = sparsify(&cloud, 0.0625, 1).unwrap();
    assert_eq!(s.len(), 625);
    assert_eq!(s, sparsify(&cloud, 0.0625, 1).unwrap());
    assert_ne!(s, sparsify(&cloud, 0.0625, 2).unwrap());
    assert!(sparsify(&cloud, 0.0, 1).is_err());
    assert!(sparsify(&cloud, 1.5, 1).is_err());
}

fn small_describe() -> DescribeParams {
    DescribeParams {
        keypoints: KeypointSelection::Cell(0.4),
        patch: PatchParams {
            n_samples: 64,
            ..PatchParams::default()
        },
        ..DescribeParams::default()
    }
}

fn small_bench_params() -> BenchmarkParams {
    BenchmarkParams {
        scene: crate::training::SceneParams {
            density: 800.0,
            ..Default::default()
        },
        cameras: vec![[-0.4, 0.0], [0.0, 0.0], [0.4, 0.0]],
        window: 0.6,
        ..BenchmarkParams::default()
    }
}

#[test]
fn synthetic_benchmark_ground_truth_aligns() {
    let bench = synthetic_benchmark(6, &small_bench_params(), &small_describe()).unwrap();
    assert_eq!(bench.fragments.len(), 3);
    assert_eq!(bench.pairs.len(), 3);
    assert_eq!(
        bench,
        synthetic_benchmark(6, &small_bench_params(), &small_describe()).unwrap()
    );
    for p in &bench.pairs {
        let o = compute_overlap(
            &bench.fragments[p.i].cloud,
            &bench.fragments[p.j].cloud,
            &p.transform,
            0.1,
        )
        .unwrap();
        assert!(o > 0.3);
    }

    let rotated = make_rotated_benchmark(&bench, 7);
    assert_eq!(rotated, make_rotated_benchmark(&bench, 7));
    for (p, pr) in bench.pairs.iter().zip(&rotated.pairs) {
        // Moving rotated fragment j by the composed transform must agree with
        // moving the original by the original transform, then rotating.
        let rot_i = &rotated.fragments[p.i].cloud;
        let orig_j = &bench.fragments[p.j].cloud;
        let rot_j = &rotated.fragments[p.j].cloud;
        let r_i = random_rotation(crate::seed::derive_seed(7, p.i as u64));
        let mut err = 0.0;
        for k in 0..rot_j.len() {
            let a = pr.transform.apply_point(&rot_j.points()[k]);
            let b = r_i.apply_point(&p.transform.apply_point(&orig_j.points()[k]));
            err += (a - b).norm();
        }
        assert!(err / (rot_j.len() as f64) < 1e-9);
        assert_eq!(rot_i.len(), bench.fragments[p.i].cloud.len());
    }
}

#[test]
fn rotated_fragment_gives_same_codewords() {
    let bench = synthetic_benchmark(8, &small_bench_params(), &small_describe()).unwrap();
    let rotated = make_rotated_benchmark(&bench, 9);
    let model = crate::network::Model::new(NetworkConfig::compact(), 1).unwrap();
    let params = small_describe();
    let a = describe_fragment(&bench.fragments[0], &model, &params).unwrap();
    let b = describe_fragment(&rotated.fragments[0], &model, &params).unwrap();
    assert_eq!(a.indices, b.indices);
    let mut worst: f64 = 0.0;
    for (x, y) in a.codewords.iter().zip(&b.codewords) {
        for (u, v) in x.values().iter().zip(y.values()) {
            worst = worst.max((u - v).abs());
        }
    }
    assert!(worst < 1e-6, "{worst}");
    assert_eq!(a, describe_fragment(&bench.fragments[0], &model, &params).unwrap());
}

#[test]
fn describe_empty_fragment_fails() {
    let model = crate::network::Model::new(NetworkConfig::compact(), 1).unwrap();
    let f = Fragment {
        name: "empty".into(),
        cloud: PointCloud::new(vec![]).unwrap(),
        keypoints: vec![],
    };
    assert!(describe_fragment(&f, &model, &small_describe()).is_err());
}

#[test]
fn manifest_round_trip_and_report() {
    let bench = synthetic_benchmark(10, &small_bench_params(), &small_describe()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = write_manifest(&bench, dir.path()).unwrap();
    let back = read_manifest(&path, &small_describe()).unwrap();
    assert_eq!(back.fragments.len(), bench.fragments.len());
    assert_eq!(back.pairs, bench.pairs);
    for (a, b) in back.fragments.iter().zip(&bench.fragments) {
        assert_eq!(a.keypoints, b.keypoints);
        assert_eq!(a.cloud.points(), b.cloud.points());
    }

    let model = crate::network::Model::new(NetworkConfig::compact(), 2).unwrap();
    let eval = EvalConfig::default();
    let (report, described) = evaluate_benchmark(&back, &model, &small_describe(), &eval).unwrap();
    assert_eq!(report.pairs.len(), 3);
    let csv = report.to_csv();
    assert!(csv.starts_with("pair,i,j,matches,inliers,inlier_ratio,matched\n"));
    assert_eq!(csv.lines().count(), 4);

    let tau1s = [0.02, 0.05, 0.1, 0.2, 0.4];
    let tau2s = [0.0, 0.01, 0.05, 0.1, 0.2];
    let rows = sweep(&back, &described, &eval, &tau1s, &tau2s).unwrap();
    let r1: Vec<f64> = rows
        .iter()
        .filter(|r| r.parameter == "tau1")
        .map(|r| r.recall)
        .collect();
    let r2: Vec<f64> = rows
        .iter()
        .filter(|r| r.parameter == "tau2")
        .map(|r| r.recall)
        .collect();
    assert!(r1.windows(2).all(|w| w[0] <= w[1]));
    assert!(r2.windows(2).all(|w| w[0] >= w[1]));
    for w in tau1s.windows(2) {
        for ((p, m), _) in back.pairs.iter().zip(&described.matches).zip(0..) {
            let f = &described.features;
            let a = ground_truth_matches(m, &f[p.i].keypoints, &f[p.j].keypoints, &p.transform, w[0]);
            let b = ground_truth_matches(m, &f[p.i].keypoints, &f[p.j].keypoints, &p.transform, w[1]);
            assert!(a.pairs.iter().all(|x| b.pairs.contains(x)));
        }
    }

    std::fs::write(dir.path().join("bad.txt"), "fragment a b c\n").unwrap();
    assert!(matches!(
        read_manifest(&dir.path().join("bad.txt"), &small_describe()),
        Err(MatchingError::Manifest { line: 1, .. })
    ));
}

#[test]
fn sparsified_benchmark_keeps_pairs() {
    let bench = synthetic_benchmark(11, &small_bench_params(), &small_describe()).unwrap();
    let sparse = sparsify_benchmark(&bench, 0.5, 3, &small_describe()).unwrap();
    assert_eq!(sparse.pairs, bench.pairs);
    for (a, b) in sparse.fragments.iter().zip(&bench.fragments) {
        assert!(a.cloud.len() <= b.cloud.len() / 2 + 1);
        assert!(a.cloud.has_normals());
        assert!(!a.keypoints.is_empty());
    }
}
