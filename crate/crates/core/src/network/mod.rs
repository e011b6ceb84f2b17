//! The folding auto-encoder over PPF sets.
//!
//! Layers that consume `[per-row features | replicated vector]` are stored as
//! two weight blocks, one per operand. `x·W_x + (g·W_g + b)` equals
//! `[x | g]·W + b` for `W = [W_x; W_g]`, but the replicated half is computed
//! once per set instead of once per row.

mod file;

pub use file::{load_model, load_model_expecting, read_codewords, save_model, write_codewords};

use thiserror::Error;

use crate::autodiff::{
    grad_check, xavier_init, AutodiffError, GradCheckOptions, GradCheckReport, ParamGrads, ParamStore, Tape, Tensor2,
    Var,
};
use crate::ppf::NormalizedPpfSet;

pub const PPF_DIM: usize = 4;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("invalid network config: {0}")]
    Config(String),
    #[error("empty PPF set")]
    EmptyInput,
    #[error("codeword has dimension {found}, model expects {expected}")]
    CodeDim { found: usize, expected: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error("model file version {found}, this build reads version {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("model config mismatch: file has {found}, expected {expected}")]
    ConfigMismatch { found: String, expected: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub pointwise_widths: Vec<usize>,
    /// The last entry is the codeword dimension.
    pub post_widths: Vec<usize>,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            pointwise_widths: vec![64, 128, 256],
            post_widths: vec![512, 512],
        }
    }
}

impl EncoderConfig {
    pub fn codeword_dim(&self) -> usize {
        *self.post_widths.last().expect("validated config")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderConfig {
    pub grid_side: usize,
    pub grid_extent: (f64, f64),
    /// Widths of each fold; the last must be [`PPF_DIM`].
    pub fold_widths: Vec<usize>,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            grid_side: 45,
            grid_extent: (-0.5, 0.5),
            fold_widths: vec![512, 512, 256, 128, 4],
        }
    }
}

impl DecoderConfig {
    pub fn grid_points(&self) -> usize {
        self.grid_side * self.grid_side
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NetworkConfig {
    pub encoder: EncoderConfig,
    pub decoder: DecoderConfig,
}

impl NetworkConfig {
    /// A narrower network that trains in minutes on one core.
    pub fn compact() -> Self {
        Self {
            encoder: EncoderConfig {
                pointwise_widths: vec![32, 64, 128],
                post_widths: vec![256, 512],
            },
            decoder: DecoderConfig {
                grid_side: 16,
                grid_extent: (-0.5, 0.5),
                fold_widths: vec![128, 128, 64, 32, 4],
            },
        }
    }

    /// A few units per layer, small enough to finite-difference every weight.
    pub fn reduced() -> Self {
        Self {
            encoder: EncoderConfig {
                pointwise_widths: vec![8, 8, 6],
                post_widths: vec![10, 7],
            },
            decoder: DecoderConfig {
                grid_side: 4,
                grid_extent: (-0.5, 0.5),
                fold_widths: vec![9, 8, 7, 6, 4],
            },
        }
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        let e = &self.encoder;
        let d = &self.decoder;
        let bad = |m: &str| Err(NetworkError::Config(m.to_string()));
        if e.pointwise_widths.is_empty() || e.post_widths.is_empty() {
            return bad("encoder needs at least one pointwise and one post layer");
        }
        if e.pointwise_widths
            .iter()
            .chain(&e.post_widths)
            .chain(&d.fold_widths)
            .any(|&w| w == 0)
        {
            return bad("layer widths must be positive");
        }
        if d.fold_widths.last() != Some(&PPF_DIM) {
            return bad("the last fold width must be 4");
        }
        if d.grid_side < 2 {
            return bad("grid side must be at least 2");
        }
        let (lo, hi) = d.grid_extent;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return bad("grid extent must be an increasing finite interval");
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        let join = |v: &[usize]| v.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(",");
        format!(
            "pointwise={} post={} grid={}x{} extent=[{},{}] fold={}",
            join(&self.encoder.pointwise_widths),
            join(&self.encoder.post_widths),
            self.decoder.grid_side,
            self.decoder.grid_side,
            self.decoder.grid_extent.0,
            self.decoder.grid_extent.1,
            join(&self.decoder.fold_widths),
        )
    }
}

/// Regular `side × side` lattice over the extent square, row-major.
pub fn make_grid(config: &DecoderConfig) -> Tensor2 {
    let side = config.grid_side;
    assert!(side >= 2, "grid side must be at least 2");
    let (lo, hi) = config.grid_extent;
    let coord = |i: usize| lo + (hi - lo) * i as f64 / (side - 1) as f64;
    let mut data = Vec::with_capacity(side * side * 2);
    for r in 0..side {
        for c in 0..side {
            data.push(coord(c));
            data.push(coord(r));
        }
    }
    Tensor2::from_vec(side * side, 2, data).expect("length matches shape")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codeword(pub Vec<f64>);

impl Codeword {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn distance(&self, other: &Codeword) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Layer whose input may include a replicated vector.
#[derive(Debug, Clone, Copy)]
struct Layer {
    w: usize,
    /// Block applied to the replicated operand, if any.
    wg: Option<usize>,
    b: usize,
}

#[derive(Debug, Clone)]
struct Layout {
    pointwise: Vec<Layer>,
    post: Vec<Layer>,
    folds: [Vec<Layer>; 2],
}

#[derive(Debug, Clone)]
pub struct Model {
    config: NetworkConfig,
    params: ParamStore,
    layout: Layout,
    grid: Tensor2,
}

/// Parameters bound to a tape.
struct Bound(Vec<Var>);

impl Model {
    /// Xavier-initialized weights, zero biases. Each layer draws from its own
    /// seed derived from `seed` and the layer position.
    pub fn new(config: NetworkConfig, seed: u64) -> Result<Self, NetworkError> {
        config.validate()?;
        let mut params = ParamStore::new();
        let mut layer_seed = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut add = |params: &mut ParamStore, name: String, fan_in: usize, split: usize, fan_out: usize| {
            layer_seed = layer_seed.wrapping_add(1);
            let full = xavier_init(fan_in + split, fan_out, layer_seed);
            let w = full.select_rows(&(0..fan_in).collect::<Vec<_>>());
            let w = params.insert(format!("{name}.w"), w);
            let wg = (split > 0).then(|| {
                let g = full.select_rows(&(fan_in..fan_in + split).collect::<Vec<_>>());
                params.insert(format!("{name}.wg"), g)
            });
            let b = params.insert(format!("{name}.b"), Tensor2::zeros(1, fan_out));
            Layer { w, wg, b }
        };

        let enc = &config.encoder;
        let mut pointwise = Vec::new();
        let mut width = PPF_DIM;
        for (i, &out) in enc.pointwise_widths.iter().enumerate() {
            pointwise.push(add(&mut params, format!("enc.pw.{i}"), width, 0, out));
            width = out;
        }
        let local = width;
        let mut post = Vec::new();
        for (i, &out) in enc.post_widths.iter().enumerate() {
            let split = if i == 0 { local } else { 0 };
            post.push(add(&mut params, format!("enc.post.{i}"), width, split, out));
            width = out;
        }
        let code = width;
        let mut folds: [Vec<Layer>; 2] = Default::default();
        for (f, fold) in folds.iter_mut().enumerate() {
            let mut width = if f == 0 { 2 } else { PPF_DIM };
            for (i, &out) in config.decoder.fold_widths.iter().enumerate() {
                let split = if i == 0 { code } else { 0 };
                fold.push(add(&mut params, format!("dec.fold{}.{i}", f + 1), width, split, out));
                width = out;
            }
        }
        let grid = make_grid(&config.decoder);
        Ok(Self {
            config,
            params,
            layout: Layout { pointwise, post, folds },
            grid,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn grid(&self) -> &Tensor2 {
        &self.grid
    }

    pub fn codeword_dim(&self) -> usize {
        self.config.encoder.codeword_dim()
    }

    /// Replaces the parameters, which must have the names and shapes of this
    /// model's own.
    pub fn with_params(mut self, params: ParamStore) -> Result<Self, NetworkError> {
        if params.len() != self.params.len() {
            return Err(NetworkError::Corrupt(format!(
                "{} parameters, expected {}",
                params.len(),
                self.params.len()
            )));
        }
        for i in 0..params.len() {
            if params.name(i) != self.params.name(i) || params.value(i).shape() != self.params.value(i).shape() {
                return Err(NetworkError::Corrupt(format!(
                    "parameter {} {:?} does not match {} {:?}",
                    params.name(i),
                    params.value(i).shape(),
                    self.params.name(i),
                    self.params.value(i).shape()
                )));
            }
        }
        self.params = params;
        Ok(self)
    }

    fn bind<'a>(&'a self, tape: &mut Tape<'a>, trainable: bool) -> Bound {
        Bound(
            self.params
                .values()
                .map(|t| {
                    if trainable {
                        tape.leaf_ref(t)
                    } else {
                        tape.constant_ref(t)
                    }
                })
                .collect(),
        )
    }

    fn apply(
        tape: &mut Tape<'_>,
        bound: &Bound,
        layer: &Layer,
        x: Var,
        replicated: Option<Var>,
        relu: bool,
    ) -> Result<Var, NetworkError> {
        let bias = match (layer.wg, replicated) {
            (Some(wg), Some(g)) => tape.linear(g, bound.0[wg], bound.0[layer.b])?,
            (None, None) => bound.0[layer.b],
            _ => unreachable!("layout and call site disagree"),
        };
        let y = tape.linear(x, bound.0[layer.w], bias)?;
        Ok(if relu { tape.relu(y) } else { y })
    }

    fn mlp(
        tape: &mut Tape<'_>,
        bound: &Bound,
        layers: &[Layer],
        x: Var,
        replicated: Var,
        relu_last: bool,
    ) -> Result<Var, NetworkError> {
        let mut h = x;
        for (i, layer) in layers.iter().enumerate() {
            let g = (i == 0).then_some(replicated);
            let last = i + 1 == layers.len();
            h = Self::apply(tape, bound, layer, h, g, !last || relu_last)?;
        }
        Ok(h)
    }

    fn encode_graph(&self, tape: &mut Tape<'_>, bound: &Bound, input: Var) -> Result<Var, NetworkError> {
        if tape.value(input).rows() == 0 {
            return Err(NetworkError::EmptyInput);
        }
        let mut h = input;
        for layer in &self.layout.pointwise {
            h = Self::apply(tape, bound, layer, h, None, true)?;
        }
        let global = tape.set_maxpool(h)?;
        let post = Self::mlp(tape, bound, &self.layout.post, h, global, false)?;
        Ok(tape.set_maxpool(post)?)
    }

    fn decode_graph<'a>(&'a self, tape: &mut Tape<'a>, bound: &Bound, code: Var) -> Result<Var, NetworkError> {
        let grid = tape.constant_ref(&self.grid);
        let fold1 = Self::mlp(tape, bound, &self.layout.folds[0], grid, code, false)?;
        Self::mlp(tape, bound, &self.layout.folds[1], fold1, code, false)
    }

    pub fn encode(&self, ppfs: &NormalizedPpfSet) -> Result<Codeword, NetworkError> {
        self.encode_tensor(&ppf_tensor(ppfs))
    }

    pub fn encode_tensor(&self, input: &Tensor2) -> Result<Codeword, NetworkError> {
        check_input(input)?;
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, false);
        let x = tape.constant_ref(input);
        let code = self.encode_graph(&mut tape, &bound, x)?;
        let out = tape.value(code).data().to_vec();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(NetworkError::NonFinite("codeword"));
        }
        Ok(Codeword(out))
    }

    pub fn decode(&self, code: &Codeword) -> Result<Tensor2, NetworkError> {
        if code.dim() != self.codeword_dim() {
            return Err(NetworkError::CodeDim {
                found: code.dim(),
                expected: self.codeword_dim(),
            });
        }
        if code.0.iter().any(|v| !v.is_finite()) {
            return Err(NetworkError::NonFinite("codeword"));
        }
        let c = Tensor2::from_vec(1, code.dim(), code.0.clone())?;
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, false);
        let c = tape.constant_ref(&c);
        let out = self.decode_graph(&mut tape, &bound, c)?;
        Ok(tape.value(out).clone())
    }

    /// Chamfer distance between the input and its reconstruction.
    pub fn reconstruct_loss(&self, ppfs: &NormalizedPpfSet) -> Result<f64, NetworkError> {
        self.loss_tensor(&ppf_tensor(ppfs))
    }

    pub fn loss_tensor(&self, input: &Tensor2) -> Result<f64, NetworkError> {
        check_input(input)?;
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, false);
        let loss = self.loss_graph(&mut tape, &bound, input)?;
        Ok(tape.value(loss).get(0, 0))
    }

    fn loss_graph<'a>(&'a self, tape: &mut Tape<'a>, bound: &Bound, input: &'a Tensor2) -> Result<Var, NetworkError> {
        let x = tape.constant_ref(input);
        let code = self.encode_graph(tape, bound, x)?;
        let recon = self.decode_graph(tape, bound, code)?;
        Ok(tape.chamfer(x, recon)?)
    }

    /// Loss and its gradient with respect to every parameter.
    pub fn loss_and_grads(&self, input: &Tensor2) -> Result<(f64, ParamGrads), NetworkError> {
        check_input(input)?;
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, true);
        let loss = self.loss_graph(&mut tape, &bound, input)?;
        let value = tape.value(loss).get(0, 0);
        if !value.is_finite() {
            return Err(NetworkError::NonFinite("loss"));
        }
        let mut grads = tape.backward(loss)?;
        let per_param = bound
            .0
            .iter()
            .zip(self.params.values())
            .map(|(&v, p)| grads.take(v).unwrap_or_else(|| Tensor2::zeros(p.rows(), p.cols())))
            .collect();
        Ok((value, self.params.grads_from(per_param)?))
    }

    /// Loss as a function of explicit parameter tensors, for gradient checks.
    pub fn loss_graph_with(&self, tape: &mut Tape<'_>, params: &[Var], input: Var) -> Result<Var, AutodiffError> {
        let bound = Bound(params.to_vec());
        let run = |tape: &mut Tape<'_>| -> Result<Var, NetworkError> {
            let code = self.encode_graph(tape, &bound, input)?;
            let grid = tape.constant(self.grid.clone());
            let fold1 = Self::mlp(tape, &bound, &self.layout.folds[0], grid, code, false)?;
            let recon = Self::mlp(tape, &bound, &self.layout.folds[1], fold1, code, false)?;
            Ok(tape.chamfer(input, recon)?)
        };
        run(tape).map_err(|e| match e {
            NetworkError::Autodiff(a) => a,
            other => AutodiffError::Corrupt(other.to_string()),
        })
    }
}

/// Finite-difference check of the full encoder, decoder and Chamfer loss with
/// respect to every parameter and input entry.
///
/// Uses the reduced network on `rows` random input rows. Biases are drawn at
/// random instead of zero so that every term contributes.
pub fn end_to_end_gradient_check(seed: u64, rows: usize) -> Result<GradCheckReport, NetworkError> {
    use rand::{Rng, SeedableRng};
    let mut model = Model::new(NetworkConfig::reduced(), seed)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(crate::seed::derive_seed(seed, 1));
    for i in 0..model.params().len() {
        if model.params().name(i).ends_with(".b") {
            for v in model.params_mut().value_mut(i).data_mut() {
                *v = rng.gen_range(-0.1..0.1);
            }
        }
    }
    let x = Tensor2::from_vec(
        rows,
        PPF_DIM,
        (0..rows * PPF_DIM).map(|_| rng.gen_range(0.0..1.0)).collect(),
    )?;
    let mut inputs: Vec<Tensor2> = model.params().values().cloned().collect();
    inputs.push(x);
    let n = model.params().len();
    Ok(grad_check(
        |tape, vars| model.loss_graph_with(tape, &vars[..n], vars[n]),
        &inputs,
        &GradCheckOptions::default(),
    )?)
}

fn check_input(input: &Tensor2) -> Result<(), NetworkError> {
    if input.rows() == 0 {
        return Err(NetworkError::EmptyInput);
    }
    if input.cols() != PPF_DIM {
        return Err(NetworkError::Config(format!(
            "input has {} columns, expected 4",
            input.cols()
        )));
    }
    if !input.is_finite() {
        return Err(NetworkError::NonFinite("input"));
    }
    Ok(())
}

pub fn ppf_tensor(ppfs: &NormalizedPpfSet) -> Tensor2 {
    Tensor2::from_rows(&ppfs.rows)
}
