//! Reproducible random streams.
//!
//! Every independent unit of work (a trial, a record, a Monte-Carlo draw)
//! gets its own ChaCha stream derived from the user seed, so results do not
//! depend on evaluation order or thread count.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Isotropic Gaussian vector with per-axis standard deviation `sigma`.
pub fn gaussian_vector(rng: &mut ChaCha8Rng, sigma: f64) -> Vector3<f64> {
    if sigma == 0.0 {
        return Vector3::zeros();
    }
    let n = Normal::new(0.0, sigma).expect("sigma is finite and non-negative");
    Vector3::new(n.sample(rng), n.sample(rng), n.sample(rng))
}
