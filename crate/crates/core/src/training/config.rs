use std::fmt::Write as _;

use super::TrainingError;
use crate::network::NetworkConfig;
use crate::ppf::PatchParams;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr_initial: f64,
    pub lr_decay_every_epochs: usize,
    pub lr_floor: f64,
    /// Multiplier applied every `lr_decay_every_epochs`.
    pub decay_factor: f64,
    pub epochs: usize,
    pub seed: u64,
    pub patch: PatchParams,
    /// Fraction of sources held out for validation.
    pub validation_fraction: f64,
    pub network: NetworkConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            lr_initial: 0.001,
            lr_decay_every_epochs: 10,
            lr_floor: 0.0001,
            decay_factor: 0.7079,
            epochs: 100,
            seed: 0,
            patch: PatchParams::default(),
            validation_fraction: 0.1,
            network: NetworkConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainingError> {
        let bad = |m: &str| Err(TrainingError::Config(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.lr_floor > 0.0 && self.lr_floor <= self.lr_initial && self.lr_initial.is_finite()) {
            return bad("need 0 < lr_floor <= lr_initial");
        }
        if self.lr_decay_every_epochs == 0 {
            return bad("lr_decay_every_epochs must be at least 1");
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return bad("decay_factor must lie in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation_fraction must lie in [0, 1)");
        }
        if !(self.patch.radius > 0.0) || self.patch.n_samples == 0 {
            return bad("patch radius and n_samples must be positive");
        }
        self.network
            .validate()
            .map_err(|e| TrainingError::Config(e.to_string()))
    }

    /// The config as `key = value` lines, readable by [`parse_config`].
    pub fn to_key_values(&self) -> String {
        let join = |v: &[usize]| v.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let n = &self.network;
        for (k, v) in [
            ("batch_size", self.batch_size.to_string()),
            ("lr_initial", self.lr_initial.to_string()),
            ("lr_decay_every_epochs", self.lr_decay_every_epochs.to_string()),
            ("lr_floor", self.lr_floor.to_string()),
            ("decay_factor", self.decay_factor.to_string()),
            ("epochs", self.epochs.to_string()),
            ("seed", self.seed.to_string()),
            ("radius", self.patch.radius.to_string()),
            ("n_samples", self.patch.n_samples.to_string()),
            ("min_neighbors", self.patch.min_neighbors.to_string()),
            ("validation_fraction", self.validation_fraction.to_string()),
            ("pointwise_widths", join(&n.encoder.pointwise_widths)),
            ("post_widths", join(&n.encoder.post_widths)),
            ("grid_side", n.decoder.grid_side.to_string()),
            ("fold_widths", join(&n.decoder.fold_widths)),
        ] {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

/// Reads `key = value` lines over the defaults. `#` starts a comment.
///
/// `network = default|compact` selects a preset; later width keys override it.
pub fn parse_config(text: &str, base: TrainConfig) -> Result<TrainConfig, TrainingError> {
    let mut c = base;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |reason: String| TrainingError::ConfigSyntax { line: i + 1, reason };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        fn num<T: std::str::FromStr>(v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("cannot parse {v:?}"))
        }
        fn list(v: &str) -> Result<Vec<usize>, String> {
            v.split(',').map(|x| num(x.trim())).collect()
        }
        let r: Result<(), String> = (|| {
            match key {
                "batch_size" => c.batch_size = num(value)?,
                "lr_initial" => c.lr_initial = num(value)?,
                "lr_decay_every_epochs" => c.lr_decay_every_epochs = num(value)?,
                "lr_floor" => c.lr_floor = num(value)?,
                "decay_factor" => c.decay_factor = num(value)?,
                "epochs" => c.epochs = num(value)?,
                "seed" => c.seed = num(value)?,
                "radius" => c.patch.radius = num(value)?,
                "n_samples" => c.patch.n_samples = num(value)?,
                "min_neighbors" => c.patch.min_neighbors = num(value)?,
                "validation_fraction" => c.validation_fraction = num(value)?,
                "network" => {
                    c.network = match value {
                        "default" => NetworkConfig::default(),
                        "compact" => NetworkConfig::compact(),
                        other => return Err(format!("unknown network preset {other:?}")),
                    }
                }
                "pointwise_widths" => c.network.encoder.pointwise_widths = list(value)?,
                "post_widths" => c.network.encoder.post_widths = list(value)?,
                "grid_side" => c.network.decoder.grid_side = num(value)?,
                "fold_widths" => c.network.decoder.fold_widths = list(value)?,
                other => return Err(format!("unknown key {other:?}")),
            }
            Ok(())
        })();
        r.map_err(err)?;
    }
    c.validate()?;
    Ok(c)
}
