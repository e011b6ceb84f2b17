use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use ppf_foldnet::autodiff::op_gradient_checks;
use ppf_foldnet::geometry::{
    estimate_normals, load_cloud, save_cloud, CloudFormat, OrientedPoint, Point, PointCloud, SpatialIndex, Vector,
};
use ppf_foldnet::matching::{
    describe_fragment, evaluate_benchmark, make_rotated_benchmark, mutual_matches, prepare_fragment, read_manifest,
    sparsify_benchmark, sweep, sweep_csv, synthetic_benchmark, write_manifest, BenchmarkParams, DescribeParams,
    DescribedBenchmark, EvalConfig,
};
use ppf_foldnet::network::{end_to_end_gradient_check, load_model, save_model, write_codewords, Model};
use ppf_foldnet::ppf::{
    compute_patch_ppfs, compute_ppf, extract_patch, normalize_ppfs, read_ppf_set, reconstruct_pair, render_signature,
    NormalizedPpfSet, PpfFormulation, PpfSet, SignatureImage,
};
use ppf_foldnet::seed::derive_seed;
use ppf_foldnet::training::{
    build_dataset_from_paths, generate_synthetic_scene, parse_config, train, DatasetParams, KeypointSelection,
    PatchDataset, SceneKind, TrainConfig,
};

const OP_TOLERANCE: f64 = 1e-6;
const END_TO_END_TOLERANCE: f64 = 1e-4;
const RECONSTRUCT_TOLERANCE: f64 = 1e-9;

#[derive(Parser)]
#[command(
    name = "ppf-foldnet",
    version,
    about = "Rotation-invariant local descriptors for 3D point clouds"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory that receives all outputs.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// File of `key = value` training and patch settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Inlier distance threshold in meters.
    #[arg(long, global = true)]
    tau1: Option<f64>,
    /// Inlier ratio threshold for a matched fragment pair.
    #[arg(long, global = true)]
    tau2: Option<f64>,
    /// Local patch radius in meters.
    #[arg(long, global = true)]
    radius: Option<f64>,
    /// Neighbors sampled per patch.
    #[arg(long, global = true, value_parser = parse_samples)]
    samples: Option<usize>,
    /// Side length of a signature image in pixels.
    #[arg(long, global = true, default_value_t = 64)]
    resolution: usize,
    /// Fraction of points kept when sparsifying fragments.
    #[arg(long, global = true)]
    keep_fraction: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic scenes, or a fragment benchmark with a manifest.
    Synth {
        #[arg(long, value_parser = parse_kind)]
        kind: Option<SceneKind>,
        /// Number of scenes, with consecutive seeds.
        #[arg(long, default_value_t = 1)]
        count: usize,
        /// Scan fragments from one scene instead and write a manifest.
        #[arg(long)]
        benchmark: bool,
    },
    /// Extract normalized patch features from point clouds.
    Dataset {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value_t = 0.03)]
        voxel: f64,
        #[arg(long, default_value_t = 0.3)]
        keypoint_cell: f64,
    },
    /// Train the auto-encoder on a patch dataset.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        /// Save the model every this many epochs; 0 disables checkpoints.
        #[arg(long, default_value_t = 0)]
        checkpoint_every: usize,
    },
    /// Compute codewords at the keypoints of point clouds.
    Describe {
        #[arg(long)]
        model: PathBuf,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value_t = 0.1)]
        keypoint_cell: f64,
    },
    /// Mutual nearest-neighbor matches between two point clouds.
    Match {
        #[arg(long)]
        model: PathBuf,
        first: PathBuf,
        second: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        keypoint_cell: f64,
    },
    /// Inlier ratios and fragment recall over a manifest.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Rotate every fragment by a random rotation drawn from this seed.
        #[arg(long)]
        rotate: Option<u64>,
    },
    /// Recall as a function of each threshold.
    Sweep {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [0.02, 0.04, 0.06, 0.08, 0.10, 0.12, 0.14, 0.16, 0.18, 0.20])]
        tau1_values: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.02, 0.04, 0.06, 0.08, 0.10, 0.12, 0.14, 0.16, 0.18, 0.20])]
        tau2_values: Vec<f64>,
    },
    /// Render a PPF signature image from a feature file or a cloud patch.
    Visualize {
        /// A `.ppfs` feature file, or a point cloud together with `--point`.
        input: PathBuf,
        /// Reference point index when the input is a point cloud.
        #[arg(long)]
        point: Option<usize>,
        /// Model checkpoints; renders the original and each reconstruction side by side.
        #[arg(long, num_args = 1..)]
        evolution: Vec<PathBuf>,
    },
    /// Finite-difference check of every operation and of the full model.
    Gradcheck {
        #[arg(long, default_value_t = 16)]
        rows: usize,
    },
    /// Rebuild random oriented pairs from their features and compare.
    ReconstructCheck {
        #[arg(long, default_value_t = 10_000)]
        count: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth { .. } => "synth",
            Command::Dataset { .. } => "dataset",
            Command::Train { .. } => "train",
            Command::Describe { .. } => "describe",
            Command::Match { .. } => "match",
            Command::Evaluate { .. } => "evaluate",
            Command::Sweep { .. } => "sweep",
            Command::Visualize { .. } => "visualize",
            Command::Gradcheck { .. } => "gradcheck",
            Command::ReconstructCheck { .. } => "reconstruct-check",
        }
    }
}

fn parse_samples(s: &str) -> Result<usize, String> {
    match s {
        "2048" => Ok(2048),
        "5000" => Ok(5000),
        _ => Err("expected 2048 or 5000".into()),
    }
}

fn parse_kind(s: &str) -> Result<SceneKind, String> {
    SceneKind::parse(s).ok_or_else(|| "expected plane, plane-spheres or heightfield".into())
}

/// A problem with the invocation rather than with the data.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Flags and config file merged; flags win.
struct Settings {
    out: PathBuf,
    train: TrainConfig,
    eval: EvalConfig,
    resolution: usize,
    keep_fraction: Option<f64>,
    threads: usize,
}

impl Settings {
    fn resolve(common: &Common) -> Result<Self> {
        let mut train = match &common.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                parse_config(&text, TrainConfig::default())?
            }
            None => TrainConfig::default(),
        };
        if let Some(seed) = common.seed {
            train.seed = seed;
        }
        if let Some(r) = common.radius {
            train.patch.radius = r;
        }
        if let Some(n) = common.samples {
            train.patch.n_samples = n;
        }
        train.validate()?;
        let mut eval = EvalConfig::default();
        if let Some(t) = common.tau1 {
            eval.tau1 = t;
        }
        if let Some(t) = common.tau2 {
            eval.tau2 = t;
        }
        eval.validate()?;
        if let Some(k) = common.keep_fraction {
            if !(k > 0.0 && k <= 1.0) {
                return Err(usage("--keep-fraction must lie in (0, 1]"));
            }
        }
        if common.resolution == 0 {
            return Err(usage("--resolution must be positive"));
        }
        Ok(Self {
            out: common.out.clone(),
            train,
            eval,
            resolution: common.resolution,
            keep_fraction: common.keep_fraction,
            threads: rayon::current_num_threads(),
        })
    }

    fn print(&self, command: &str) {
        println!("# {command}");
        println!("out = {}", self.out.display());
        println!("threads = {}", self.threads);
        println!("tau1 = {}", self.eval.tau1);
        println!("tau2 = {}", self.eval.tau2);
        println!("resolution = {}", self.resolution);
        match self.keep_fraction {
            Some(k) => println!("keep_fraction = {k}"),
            None => println!("keep_fraction = 1"),
        }
        print!("{}", self.train.to_key_values());
        println!("#");
    }

    fn describe(&self, keypoint_cell: f64) -> DescribeParams {
        DescribeParams {
            keypoints: KeypointSelection::Cell(keypoint_cell),
            patch: self.train.patch,
            seed: self.train.seed,
            ..DescribeParams::default()
        }
    }

    fn output(&self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(self.out.join(name))
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("PPF_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("PPF_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring the thread pool")?;
    Ok(())
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "input".into())
}

fn load_any_cloud(path: &Path) -> Result<PointCloud> {
    if !path.exists() {
        bail!("input {} does not exist", path.display());
    }
    let format = CloudFormat::from_path(path).unwrap_or(CloudFormat::Xyz);
    Ok(load_cloud(path, format)?)
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn cmd_synth(s: &Settings, kind: Option<SceneKind>, count: usize, benchmark: bool) -> Result<()> {
    let seed = s.train.seed;
    if benchmark {
        let bench = synthetic_benchmark(seed, &BenchmarkParams::default(), &s.describe(0.1))?;
        fs::create_dir_all(&s.out)?;
        let manifest = write_manifest(&bench, &s.out)?;
        println!(
            "{}: {} fragments, {} pairs -> {}",
            bench.name,
            bench.fragments.len(),
            bench.pairs.len(),
            manifest.display()
        );
        return Ok(());
    }
    for k in 0..count as u64 {
        let scene_seed = seed + k;
        let kind = kind.unwrap_or(if scene_seed % 2 == 0 {
            SceneKind::PlaneSpheres
        } else {
            SceneKind::Heightfield
        });
        let scene = generate_synthetic_scene(scene_seed, kind);
        let path = s.output(&format!("scene-{scene_seed}.ply"))?;
        save_cloud(&scene.cloud, &path, CloudFormat::Ply)?;
        println!(
            "{} scene, {} points -> {}",
            kind.name(),
            scene.cloud.len(),
            path.display()
        );
    }
    Ok(())
}

fn cmd_dataset(s: &Settings, inputs: &[PathBuf], voxel: f64, keypoint_cell: f64) -> Result<()> {
    for p in inputs {
        if !p.exists() {
            bail!("input {} does not exist", p.display());
        }
    }
    let params = DatasetParams {
        voxel,
        keypoints: KeypointSelection::Cell(keypoint_cell),
        patch: s.train.patch,
        seed: s.train.seed,
        validation_fraction: s.train.validation_fraction,
        ..DatasetParams::default()
    };
    let paths: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    let dataset = build_dataset_from_paths(&paths, &params)?;
    let path = s.output("dataset.ppfd")?;
    dataset.save(&path)?;
    println!(
        "{} patches ({} rejected), digest {} -> {}",
        dataset.len(),
        dataset.rejected,
        dataset.digest(),
        path.display()
    );
    Ok(())
}

fn cmd_train(s: &Settings, dataset: &Path, checkpoint_every: usize) -> Result<()> {
    let data = PatchDataset::load(dataset)?;
    let model = Model::new(s.train.network.clone(), s.train.seed)?;
    println!("network {}", model.config().describe());
    let ckpt_dir = s.out.join("checkpoints");
    if checkpoint_every > 0 {
        fs::create_dir_all(&ckpt_dir)?;
    }
    let mut on_epoch = |epoch: usize, m: &Model| -> Result<(), ppf_foldnet::training::TrainingError> {
        if checkpoint_every > 0 && epoch % checkpoint_every == 0 {
            save_model(m, &ckpt_dir.join(format!("epoch-{epoch:04}.bin")))?;
        }
        Ok(())
    };
    let outcome = train(model, &data, &s.train, &[], Some(&mut on_epoch))?;
    let model_path = s.output("model.bin")?;
    save_model(&outcome.best, &model_path)?;
    let log_path = s.output("losses.csv")?;
    outcome.log.write_csv(&log_path)?;
    println!(
        "{} steps, best epoch {} with {} loss {} -> {}",
        outcome.steps,
        outcome.best_epoch,
        if outcome.selected_on_validation {
            "validation"
        } else {
            "train"
        },
        outcome.best_loss,
        model_path.display()
    );
    Ok(())
}

fn cmd_describe(s: &Settings, model: &Path, inputs: &[PathBuf], keypoint_cell: f64) -> Result<()> {
    let model = load_model(model)?;
    let params = s.describe(keypoint_cell);
    for input in inputs {
        let name = stem(input);
        let fragment = prepare_fragment(&name, &load_any_cloud(input)?, &params)?;
        let features = describe_fragment(&fragment, &model, &params)?;
        let path = s.output(&format!("{name}.codewords"))?;
        write_codewords(&path, &features.codewords, &features.indices)?;
        println!(
            "{name}: {} codewords ({} rejected) -> {}",
            features.len(),
            features.rejected,
            path.display()
        );
    }
    Ok(())
}

fn cmd_match(s: &Settings, model: &Path, first: &Path, second: &Path, keypoint_cell: f64) -> Result<()> {
    let model = load_model(model)?;
    let params = s.describe(keypoint_cell);
    let describe = |path: &Path| -> Result<_> {
        let fragment = prepare_fragment(&stem(path), &load_any_cloud(path)?, &params)?;
        Ok(describe_fragment(&fragment, &model, &params)?)
    };
    let (p, q) = (describe(first)?, describe(second)?);
    let matches = mutual_matches(&p.codewords, &q.codewords)?;
    let mut csv = String::from("first_point,second_point,distance\n");
    for &(i, j) in &matches.pairs {
        csv.push_str(&format!(
            "{},{},{}\n",
            p.indices[i],
            q.indices[j],
            p.codewords[i].distance(&q.codewords[j])
        ));
    }
    let path = s.output("matches.csv")?;
    write_file(&path, csv)?;
    println!("{} mutual matches -> {}", matches.len(), path.display());
    Ok(())
}

fn load_benchmark(s: &Settings, manifest: &Path, rotate: Option<u64>) -> Result<ppf_foldnet::matching::Benchmark> {
    if !manifest.exists() {
        bail!("manifest {} does not exist", manifest.display());
    }
    let params = s.describe(0.1);
    let mut bench = read_manifest(manifest, &params)?;
    if let Some(seed) = rotate {
        bench = make_rotated_benchmark(&bench, seed);
    }
    if let Some(keep) = s.keep_fraction {
        bench = sparsify_benchmark(&bench, keep, s.train.seed, &params)?;
    }
    Ok(bench)
}

fn cmd_evaluate(s: &Settings, manifest: &Path, model: &Path, rotate: Option<u64>) -> Result<()> {
    let model = load_model(model)?;
    let bench = load_benchmark(s, manifest, rotate)?;
    let (report, _) = evaluate_benchmark(&bench, &model, &s.describe(0.1), &s.eval)?;
    let path = s.output("report.csv")?;
    write_file(&path, report.to_csv())?;
    println!("{} -> {}", report.summary_line(), path.display());
    Ok(())
}

fn cmd_sweep(s: &Settings, manifest: &Path, model: &Path, tau1s: &[f64], tau2s: &[f64]) -> Result<()> {
    let model = load_model(model)?;
    let bench = load_benchmark(s, manifest, None)?;
    let described = DescribedBenchmark::new(&bench, &model, &s.describe(0.1))?;
    let rows = sweep(&bench, &described, &s.eval, tau1s, tau2s)?;
    let path = s.output("sweep.csv")?;
    write_file(&path, sweep_csv(&rows))?;
    println!("{} thresholds -> {}", rows.len(), path.display());
    Ok(())
}

/// Raw features of the input, from a feature file or a cloud patch.
fn visual_input(s: &Settings, input: &Path, point: Option<usize>) -> Result<PpfSet> {
    if !input.exists() {
        bail!("input {} does not exist", input.display());
    }
    if input.extension().is_some_and(|e| e == "ppfs") {
        return Ok(read_ppf_set(input)?.into_raw());
    }
    let point = point.ok_or_else(|| usage("a point cloud input needs --point"))?;
    let mut cloud = load_any_cloud(input)?;
    let mut center = point;
    if point >= cloud.len() {
        bail!("--point {point} is out of range for {} points", cloud.len());
    }
    if !cloud.has_normals() {
        let est = estimate_normals(&cloud, &ppf_foldnet::geometry::NormalParams::default())?;
        center = est
            .kept
            .iter()
            .position(|&k| k == point)
            .with_context(|| format!("point {point} has no usable normal"))?;
        cloud = est.cloud;
    }
    let index = SpatialIndex::build(&cloud)?;
    let patch = extract_patch(
        &cloud,
        &index,
        center,
        &s.train.patch,
        derive_seed(s.train.seed, center as u64),
    )?;
    Ok(compute_patch_ppfs(&patch, PpfFormulation::Paper)?)
}

fn cmd_visualize(s: &Settings, input: &Path, point: Option<usize>, evolution: &[PathBuf]) -> Result<()> {
    let raw = visual_input(s, input, point)?;
    let original = render_signature(&raw, s.resolution)?;
    if evolution.is_empty() {
        let path = s.output("signature.ppm")?;
        original.write_ppm(&path)?;
        println!("{} features -> {}", raw.len(), path.display());
        return Ok(());
    }
    let normalized = normalize_ppfs(&raw)?;
    let mut panels = vec![original];
    for ckpt in evolution {
        let model = load_model(ckpt).with_context(|| format!("loading {}", ckpt.display()))?;
        let recon = model.decode(&model.encode(&normalized)?)?;
        let rows = (0..recon.rows())
            .map(|r| {
                let v = recon.row(r);
                [v[0], v[1], v[2], v[3]]
            })
            .collect();
        let decoded = NormalizedPpfSet {
            rows,
            radius: normalized.radius,
            formulation: normalized.formulation,
        };
        panels.push(render_signature(&decoded.denormalize(), s.resolution)?);
    }
    let image = SignatureImage::hstack(&panels);
    let path = s.output("evolution.ppm")?;
    image.write_ppm(&path)?;
    println!("{} panels -> {}", panels.len(), path.display());
    Ok(())
}

fn cmd_gradcheck(s: &Settings, rows: usize) -> Result<bool> {
    let mut ok = true;
    for (name, report) in op_gradient_checks(s.train.seed)? {
        let pass = report.max_rel_error < OP_TOLERANCE;
        ok &= pass;
        println!(
            "{name}: max relative error {:.3e} over {} coordinates{}",
            report.max_rel_error,
            report.coordinates,
            if pass { "" } else { " FAIL" }
        );
    }
    let report = end_to_end_gradient_check(s.train.seed, rows.max(1))?;
    let pass = report.max_rel_error <= END_TO_END_TOLERANCE;
    ok &= pass;
    println!(
        "end-to-end: max relative error {:.3e} over {} coordinates{}",
        report.max_rel_error,
        report.coordinates,
        if pass { "" } else { " FAIL" }
    );
    Ok(ok)
}

fn random_oriented(rng: &mut ChaCha8Rng) -> OrientedPoint {
    let n = Vector::new(
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    );
    let p = Point::new(
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    );
    OrientedPoint::new(p, n.normalize())
}

fn cmd_reconstruct_check(s: &Settings, count: usize) -> Result<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(s.train.seed);
    let (mut feature_err, mut gram_err) = (0.0f64, 0.0f64);
    let mut checked = 0;
    while checked < count {
        let (a, b) = (random_oriented(&mut rng), random_oriented(&mut rng));
        let Ok(f) = compute_ppf(&a, &b, PpfFormulation::Paper) else {
            continue;
        };
        let rec = reconstruct_pair(&f)?;
        let again = compute_ppf(&rec.reference(), &rec.second(), PpfFormulation::Paper)?;
        feature_err = feature_err.max(f.max_abs_diff(&again));
        gram_err = gram_err.max(rec.gram_residual);
        checked += 1;
    }
    let ok = feature_err <= RECONSTRUCT_TOLERANCE && gram_err <= RECONSTRUCT_TOLERANCE;
    println!("{checked} pairs: max feature error {feature_err:.3e}, max gram residual {gram_err:.3e}");
    Ok(ok)
}

fn run(cli: Cli) -> Result<bool> {
    configure_threads()?;
    let s = Settings::resolve(&cli.common)?;
    s.print(cli.command.name());
    match &cli.command {
        Command::Synth { kind, count, benchmark } => cmd_synth(&s, *kind, *count, *benchmark)?,
        Command::Dataset {
            inputs,
            voxel,
            keypoint_cell,
        } => cmd_dataset(&s, inputs, *voxel, *keypoint_cell)?,
        Command::Train {
            dataset,
            epochs,
            checkpoint_every,
        } => {
            let mut s = s;
            if let Some(e) = epochs {
                s.train.epochs = *e;
            }
            cmd_train(&s, dataset, *checkpoint_every)?
        }
        Command::Describe {
            model,
            inputs,
            keypoint_cell,
        } => cmd_describe(&s, model, inputs, *keypoint_cell)?,
        Command::Match {
            model,
            first,
            second,
            keypoint_cell,
        } => cmd_match(&s, model, first, second, *keypoint_cell)?,
        Command::Evaluate {
            manifest,
            model,
            rotate,
        } => cmd_evaluate(&s, manifest, model, *rotate)?,
        Command::Sweep {
            manifest,
            model,
            tau1_values,
            tau2_values,
        } => cmd_sweep(&s, manifest, model, tau1_values, tau2_values)?,
        Command::Visualize {
            input,
            point,
            evolution,
        } => cmd_visualize(&s, input, *point, evolution)?,
        Command::Gradcheck { rows } => return cmd_gradcheck(&s, *rows),
        Command::ReconstructCheck { count } => return cmd_reconstruct_check(&s, *count),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
