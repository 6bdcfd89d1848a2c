//! Seeded input generators shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tdf_core::{Codebook, DescriptorSet, FeatureSequence, GmmModel};

/// `n` uniform samples in `[-1, 1)`.
pub fn signal(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// `n` descriptors of dimension `d` with uniform entries in `[-1, 1)`.
pub fn descriptors(n: usize, d: usize, seed: u64) -> DescriptorSet {
    DescriptorSet::new(d, signal(n * d, seed)).expect("n * d values")
}

/// A video with `frames` frames of `d`-dimensional features.
pub fn sequence(frames: usize, d: usize, seed: u64) -> FeatureSequence {
    FeatureSequence::from_descriptors(format!("bench{seed}"), descriptors(frames, d, seed))
        .expect("non-empty sequence")
}

/// `k` random codewords.
pub fn codebook(k: usize, d: usize, seed: u64) -> Codebook {
    Codebook::new(descriptors(k, d, seed)).expect("non-empty codebook")
}

/// Equal-weight, unit-variance mixture with random means.
pub fn gmm(k: usize, d: usize, seed: u64) -> GmmModel {
    GmmModel::new(
        vec![1.0 / k as f64; k],
        signal(k * d, seed),
        vec![1.0; k * d],
        1e-9,
    )
    .expect("valid mixture")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_seeded() {
        assert_eq!(signal(7, 3), signal(7, 3));
        assert_ne!(signal(7, 3), signal(7, 4));
        assert_eq!(descriptors(5, 3, 1).len(), 5);
        assert_eq!(sequence(9, 2, 0).frames(), 9);
    }
}
