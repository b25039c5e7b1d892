//! Synthetic sinc data with input-dependent noise.

use advcert_core::model::{DataPoint, Dataset};
use advcert_core::rng::{stream, stream_rng};
use rand::Rng;
use rand_distr::StandardNormal;

/// `sin(u) / u`, with value 1 at 0.
pub fn sinc(u: f64) -> f64 {
    if u == 0.0 {
        1.0
    } else {
        u.sin() / u
    }
}

/// Noise standard deviation at `u`.
pub fn noise_sd(u: f64) -> f64 {
    0.05 + 0.1 * u.sin().abs()
}

/// Draws `n` points from substream `stream_id` of `seed`.
pub fn sinc_points(n: usize, seed: u64, stream_id: u64, noise_scale: f64) -> Vec<DataPoint> {
    let mut rng = stream_rng(seed, stream_id);
    (0..n)
        .map(|_| {
            let u: f64 = rng.random_range(-5.0..=5.0);
            let e: f64 = rng.sample(StandardNormal);
            DataPoint::new(vec![u], sinc(u) + noise_scale * noise_sd(u) * e)
        })
        .collect()
}

/// Training data: `u ~ U[-5, 5]`, `y = sinc(u) + (0.05 + 0.1 |sin u|) e`.
pub fn gen_sinc(n: usize, seed: u64) -> Dataset {
    gen_sinc_scaled(n, seed, 1.0)
}

/// [`gen_sinc`] with the noise multiplied by `noise_scale`.
pub fn gen_sinc_scaled(n: usize, seed: u64, noise_scale: f64) -> Dataset {
    Dataset::new(sinc_points(n, seed, stream::TRAIN_DATA, noise_scale)).expect("generated points are finite")
}
