use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ppf_foldnet::geometry::{apply_rigid, load_cloud, random_rotation, save_cloud, CloudFormat};
use ppf_foldnet::matching::{evaluate_benchmark, read_manifest, DescribeParams, EvalConfig};
use ppf_foldnet::network::load_model;
use ppf_foldnet::ppf::PatchParams;

const BIN: &str = env!("CARGO_BIN_EXE_ppf-foldnet");

const TINY: &str = "\
pointwise_widths = 8,16,16
post_widths = 16,32
grid_side = 4
fold_widths = 16,8,4
n_samples = 64
batch_size = 16
";

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn ppm_size(bytes: &[u8]) -> (usize, usize) {
    let header = String::from_utf8_lossy(&bytes[..20]);
    let mut it = header.split_whitespace();
    assert_eq!(it.next(), Some("P6"));
    (it.next().unwrap().parse().unwrap(), it.next().unwrap().parse().unwrap())
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        ok(
            dir.path(),
            &["synth", "--seed", "7", "--kind", "heightfield", "--out", out],
        );
    }
    let a = fs::read(dir.path().join("a/scene-7.ply")).unwrap();
    let b = fs::read(dir.path().join("b/scene-7.ply")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn prints_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(
        dir.path(),
        &[
            "reconstruct-check",
            "--count",
            "10",
            "--seed",
            "5",
            "--tau1",
            "0.2",
            "--samples",
            "5000",
        ],
    );
    for line in [
        "# reconstruct-check",
        "seed = 5",
        "tau1 = 0.2",
        "tau2 = 0.05",
        "n_samples = 5000",
        "radius = 0.3",
    ] {
        assert!(stdout.lines().any(|l| l == line), "missing {line:?} in\n{stdout}");
    }
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["synth", "--bogus"][..],
        &["frobnicate"],
        &["gradcheck", "--samples", "100"],
        &["synth", "--kind", "cube"],
        &["evaluate", "--model", "m.bin"],
        &["synth", "--keep-fraction", "1.5"],
    ] {
        assert_eq!(run(dir.path(), args).status.code(), Some(2), "{args:?}");
    }
    let out = Command::new(BIN)
        .current_dir(dir.path())
        .env("PPF_THREADS", "zero")
        .args(["gradcheck"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn domain_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.cfg"), "bogus = 1\n").unwrap();
    for args in [
        &["visualize", "missing.ppfs"][..],
        &["evaluate", "--manifest", "missing.txt", "--model", "missing.bin"],
        &["dataset", "missing.ply"],
        &["synth", "--config", "bad.cfg"],
    ] {
        let out = run(dir.path(), args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));
    }
}

#[test]
fn gradcheck_passes() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(dir.path(), &["gradcheck", "--seed", "3"]);
    let line = stdout
        .lines()
        .find(|l| l.starts_with("end-to-end: max relative error"))
        .unwrap();
    let value: f64 = line.split_whitespace().nth(4).unwrap().parse().unwrap();
    assert!(value < 1e-4, "{line}");
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tiny.cfg"), TINY).unwrap();
    ok(dir.path(), &["synth", "--seed", "1", "--out", "s"]);
    ok(
        dir.path(),
        &["dataset", "s/scene-1.ply", "--config", "tiny.cfg", "--out", "d"],
    );
    for threads in ["1", "3"] {
        let out = Command::new(BIN)
            .current_dir(dir.path())
            .env("PPF_THREADS", threads)
            .args([
                "train",
                "--dataset",
                "d/dataset.ppfd",
                "--config",
                "tiny.cfg",
                "--epochs",
                "2",
                "--out",
                threads,
            ])
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    for f in ["model.bin", "losses.csv"] {
        assert_eq!(
            fs::read(dir.path().join("1").join(f)).unwrap(),
            fs::read(dir.path().join("3").join(f)).unwrap()
        );
    }
}

#[test]
fn pipeline_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("tiny.cfg"), TINY).unwrap();
    let cfg = ["--config", "tiny.cfg", "--seed", "2"];
    let with = |args: &[&'static str]| -> Vec<&str> { args.iter().copied().chain(cfg).collect() };
    ok(d, &with(&["synth", "--count", "2", "--out", "scenes"]));
    ok(
        d,
        &with(&["dataset", "scenes/scene-2.ply", "scenes/scene-3.ply", "--out", "data"]),
    );
    let stdout = ok(
        d,
        &with(&[
            "train",
            "--dataset",
            "data/dataset.ppfd",
            "--epochs",
            "2",
            "--checkpoint-every",
            "1",
            "--out",
            "model",
        ]),
    );
    assert!(stdout.contains("best epoch"));
    let losses = fs::read_to_string(d.join("model/losses.csv")).unwrap();
    assert!(losses.starts_with("step,epoch,tag,loss\n"));
    assert!(d.join("model/checkpoints/epoch-0002.bin").exists());

    ok(d, &with(&["synth", "--benchmark", "--out", "bench"]));
    let stdout = ok(
        d,
        &with(&[
            "evaluate",
            "--manifest",
            "bench/manifest.txt",
            "--model",
            "model/model.bin",
            "--tau1",
            "0.08",
            "--tau2",
            "0.1",
            "--out",
            "eval",
        ]),
    );
    assert!(stdout.contains("recall"));
    let csv = fs::read_to_string(d.join("eval/report.csv")).unwrap();

    let describe = DescribeParams {
        patch: PatchParams {
            n_samples: 64,
            ..PatchParams::default()
        },
        seed: 2,
        ..DescribeParams::default()
    };
    let bench = read_manifest(&d.join("bench/manifest.txt"), &describe).unwrap();
    let model = load_model(&d.join("model/model.bin")).unwrap();
    let eval = EvalConfig {
        tau1: 0.08,
        tau2: 0.1,
        ..EvalConfig::default()
    };
    let (report, _) = evaluate_benchmark(&bench, &model, &describe, &eval).unwrap();
    assert_eq!(csv, report.to_csv());

    ok(
        d,
        &with(&[
            "sweep",
            "--manifest",
            "bench/manifest.txt",
            "--model",
            "model/model.bin",
            "--tau1-values",
            "0.05,0.1",
            "--out",
            "sweep",
        ]),
    );
    let sweep = fs::read_to_string(d.join("sweep/sweep.csv")).unwrap();
    assert!(sweep.starts_with("parameter,threshold,recall\ntau1,0.05,"));
    assert_eq!(sweep.lines().count(), 1 + 2 + 11);

    ok(
        d,
        &with(&[
            "evaluate",
            "--manifest",
            "bench/manifest.txt",
            "--model",
            "model/model.bin",
            "--keep-fraction",
            "0.5",
            "--rotate",
            "4",
            "--out",
            "eval2",
        ]),
    );
    assert!(d.join("eval2/report.csv").exists());

    ok(
        d,
        &with(&[
            "describe",
            "--model",
            "model/model.bin",
            "bench/fragment_000.ply",
            "--out",
            "codes",
        ]),
    );
    assert!(d.join("codes/fragment_000.codewords").exists());
    assert!(d.join("codes/fragment_000.codewords.idx").exists());
    ok(
        d,
        &with(&[
            "match",
            "--model",
            "model/model.bin",
            "bench/fragment_000.ply",
            "bench/fragment_001.ply",
            "--out",
            "m",
        ]),
    );
    let matches = fs::read_to_string(d.join("m/matches.csv")).unwrap();
    assert!(matches.starts_with("first_point,second_point,distance\n"));
    assert!(matches.lines().count() > 1);

    let stdout = ok(
        d,
        &with(&[
            "visualize",
            "scenes/scene-2.ply",
            "--point",
            "300",
            "--resolution",
            "32",
            "--evolution",
            "model/checkpoints/epoch-0001.bin",
            "model/checkpoints/epoch-0002.bin",
            "--out",
            "evo",
        ]),
    );
    assert!(stdout.contains("3 panels"));
    assert_eq!(ppm_size(&fs::read(d.join("evo/evolution.ppm")).unwrap()), (96, 32));
}

#[test]
fn signatures_are_deterministic_and_rotation_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--seed", "4", "--kind", "heightfield", "--out", "s"]);
    let cloud = load_cloud(&d.join("s/scene-4.ply"), CloudFormat::Ply).unwrap();
    save_cloud(
        &apply_rigid(&cloud, &random_rotation(8)),
        &d.join("rotated.ply"),
        CloudFormat::Ply,
    )
    .unwrap();
    for (input, out) in [("s/scene-4.ply", "a"), ("s/scene-4.ply", "b"), ("rotated.ply", "r")] {
        ok(
            d,
            &[
                "visualize",
                input,
                "--point",
                "1234",
                "--samples",
                "2048",
                "--resolution",
                "48",
                "--out",
                out,
            ],
        );
    }
    let read = |o: &str| fs::read(d.join(o).join("signature.ppm")).unwrap();
    let a = read("a");
    assert_eq!(ppm_size(&a), (48, 48));
    assert_eq!(a, read("b"));
    assert_eq!(a, read("r"));
}
