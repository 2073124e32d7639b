//! Deterministic random streams.
//!
//! Every trajectory draws from its own ChaCha stream selected by
//! `(seed, trajectory_index)`, so ensembles reproduce bit-for-bit regardless of
//! how trajectories are scheduled across threads.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type PathRng = ChaCha8Rng;

pub fn path_rng(seed: u64, trajectory_index: u64) -> PathRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trajectory_index);
    rng
}

#[inline]
pub fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Centered circular complex Gaussian with `E|z|² = variance` (real and
/// imaginary parts independent, each of variance `variance / 2`).
#[inline]
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (0.5 * variance).sqrt();
    Complex64::new(s * normal(rng), s * normal(rng))
}
