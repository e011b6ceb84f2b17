use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Tensor2;

/// Uniform Xavier/Glorot initialization for a `fan_in × fan_out` weight.
pub fn xavier_init(fan_in: usize, fan_out: usize, seed: u64) -> Tensor2 {
    assert!(fan_in > 0 && fan_out > 0, "xavier_init needs positive dimensions");
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..fan_in * fan_out).map(|_| dist.sample(&mut rng)).collect();
    Tensor2::from_vec(fan_in, fan_out, data).expect("length matches shape")
}
