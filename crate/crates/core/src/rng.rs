//! Seeded generators. Every stochastic routine takes a `&mut SimRng`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Generator for `seed`.
pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent generator for worker or sub-task `stream` under `seed`.
pub fn derived_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.wrapping_add(1));
    rng
}

/// Uniform draw from the ball `B_d(r)`.
pub fn uniform_in_ball<R: rand::Rng + ?Sized>(rng: &mut R, d: usize, r: f64) -> crate::linalg::Vector {
    use rand_distr::{Distribution, StandardNormal};
    let g = crate::linalg::Vector::from_fn(d, |_, _| StandardNormal.sample(rng));
    let n = g.norm();
    if n == 0.0 {
        return g;
    }
    let radius = r * rng.random::<f64>().powf(1.0 / d as f64);
    g * (radius / n)
}
