use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{squared_distance, Codebook};
use crate::error::{Error, Result};
use crate::tensorio::DescriptorSet;

/// Outcome of a k-means run.
#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub codebook: Codebook,
    /// Within-cluster sum of squares after each assignment step.
    pub objective_trace: Vec<f64>,
    /// Final assignment of every descriptor.
    pub assignments: Vec<usize>,
}

/// Lloyd's algorithm from a k-means++ start.
pub fn kmeans_fit(
    descriptors: &DescriptorSet,
    num_words: usize,
    seed: u64,
    max_iters: usize,
) -> Result<Codebook> {
    Ok(kmeans_fit_traced(descriptors, num_words, seed, max_iters)?.codebook)
}

pub fn kmeans_fit_traced(
    descriptors: &DescriptorSet,
    num_words: usize,
    seed: u64,
    max_iters: usize,
) -> Result<KMeansFit> {
    let m = descriptors.len();
    let dims = descriptors.dims();
    if num_words == 0 {
        return Err(Error::invalid("k-means needs at least one cluster"));
    }
    if m < num_words {
        return Err(Error::invalid(format!(
            "k-means with K = {num_words} needs at least {num_words} descriptors, got {m}"
        )));
    }
    if max_iters == 0 {
        return Err(Error::invalid("max_iters must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(descriptors, num_words, &mut rng)?;

    let mut trace = Vec::new();
    let mut assignments: Vec<usize> = Vec::new();
    for _ in 0..max_iters {
        let (next, dists) = assign_all(descriptors, &centroids, dims);
        trace.push(dists.iter().sum());
        if next == assignments {
            break;
        }
        assignments = next;
        update_centroids(descriptors, &assignments, &mut centroids, num_words);
    }
    let codebook = Codebook::new(DescriptorSet::new(dims, centroids)?)?;
    Ok(KMeansFit {
        codebook,
        objective_trace: trace,
        assignments,
    })
}

fn plus_plus_init(set: &DescriptorSet, k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let m = set.len();
    let mut centroids = Vec::with_capacity(k * set.dims());
    let first = rng.random_range(0..m);
    centroids.extend_from_slice(set.row(first));
    let mut nearest: Vec<f64> = set
        .rows()
        .map(|r| squared_distance(r, set.row(first)))
        .collect();
    for _ in 1..k {
        let total: f64 = nearest.iter().sum();
        if total <= 0.0 {
            return Err(Error::invalid(format!(
                "fewer than {k} distinct descriptors; cannot place {k} centroids"
            )));
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = None;
        for (i, &d) in nearest.iter().enumerate() {
            if d <= 0.0 {
                continue;
            }
            acc += d;
            chosen = Some(i);
            if acc > target {
                break;
            }
        }
        let chosen = chosen.expect("positive total implies a positive weight");
        let c = set.row(chosen).to_vec();
        for (slot, r) in nearest.iter_mut().zip(set.rows()) {
            *slot = slot.min(squared_distance(r, &c));
        }
        centroids.extend_from_slice(&c);
    }
    Ok(centroids)
}

fn assign_all(set: &DescriptorSet, centroids: &[f64], dims: usize) -> (Vec<usize>, Vec<f64>) {
    let rows: Vec<&[f64]> = set.rows().collect();
    rows.par_iter()
        .map(|r| nearest_centroid(r, centroids, dims))
        .unzip()
}

pub(super) fn nearest_centroid(x: &[f64], centroids: &[f64], dims: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centroids.chunks_exact(dims).enumerate() {
        let d = squared_distance(x, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

fn update_centroids(set: &DescriptorSet, assignments: &[usize], centroids: &mut [f64], k: usize) {
    let dims = set.dims();
    let mut sums = vec![0.0; k * dims];
    let mut counts = vec![0usize; k];
    for (row, &a) in set.rows().zip(assignments) {
        counts[a] += 1;
        for (s, &v) in sums[a * dims..(a + 1) * dims].iter_mut().zip(row) {
            *s += v;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            let n = counts[c] as f64;
            for (dst, &s) in centroids[c * dims..(c + 1) * dims]
                .iter_mut()
                .zip(&sums[c * dims..(c + 1) * dims])
            {
                *dst = s / n;
            }
        }
    }
    // Empty clusters move onto the descriptors farthest from their own centroid.
    let empty: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
    if empty.is_empty() {
        return;
    }
    let mut spread: Vec<(usize, f64)> = set
        .rows()
        .zip(assignments)
        .enumerate()
        .map(|(i, (row, &a))| {
            (
                i,
                squared_distance(row, &centroids[a * dims..(a + 1) * dims]),
            )
        })
        .collect();
    spread.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    for (c, (i, _)) in empty.into_iter().zip(spread) {
        centroids[c * dims..(c + 1) * dims].copy_from_slice(set.row(i));
    }
}
