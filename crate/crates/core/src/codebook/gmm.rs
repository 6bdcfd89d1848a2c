use std::f64::consts::PI;

use rayon::prelude::*;

use super::{kmeans, GmmModel};
use crate::error::{Error, Result};
use crate::tensorio::DescriptorSet;

/// Relative floor on component variances, scaled by the mean per-dimension data variance.
pub const VARIANCE_FLOOR_RATIO: f64 = 1e-6;
/// Absolute lower bound so the floor stays positive on constant data.
const MIN_VARIANCE_FLOOR: f64 = 1e-12;
/// Weight given to a component that lost all responsibility.
const MIN_WEIGHT: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct GmmFit {
    pub model: GmmModel,
    /// Average per-descriptor log-likelihood, starting with the initial model.
    pub log_likelihood_trace: Vec<f64>,
}

/// Diagonal-covariance EM started from a k-means partition.
pub fn gmm_fit(
    descriptors: &DescriptorSet,
    num_components: usize,
    seed: u64,
    max_iters: usize,
    tol: f64,
) -> Result<GmmModel> {
    Ok(gmm_fit_traced(descriptors, num_components, seed, max_iters, tol)?.model)
}

pub fn gmm_fit_traced(
    descriptors: &DescriptorSet,
    num_components: usize,
    seed: u64,
    max_iters: usize,
    tol: f64,
) -> Result<GmmFit> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::invalid("EM tolerance must be positive"));
    }
    let m = descriptors.len();
    let dims = descriptors.dims();
    let km = kmeans::kmeans_fit_traced(descriptors, num_components, seed, max_iters)?;
    let floor = variance_floor(descriptors);

    let global_var = per_dim_variance(descriptors.rows(), m);
    let mut counts = vec![0usize; num_components];
    let mut sq = vec![0.0; num_components * dims];
    for (row, &a) in descriptors.rows().zip(&km.assignments) {
        counts[a] += 1;
        let c = km.codebook.centroid(a);
        for j in 0..dims {
            sq[a * dims + j] += (row[j] - c[j]).powi(2);
        }
    }
    let means = km.codebook.centroids().as_slice().to_vec();
    let mut variances = vec![0.0; num_components * dims];
    for k in 0..num_components {
        for j in 0..dims {
            let v = if counts[k] > 1 {
                sq[k * dims + j] / counts[k] as f64
            } else {
                global_var[j]
            };
            variances[k * dims + j] = v.max(floor);
        }
    }
    let weights = normalized_weights(counts.iter().map(|&c| c as f64 / m as f64).collect());
    let mut model = GmmModel::new(weights, means, variances, floor)?;

    let (mut stats, mut ll) = e_step(&model, descriptors);
    let mut trace = vec![ll];
    for _ in 0..max_iters {
        model = m_step(&model, descriptors, &stats)?;
        let (next_stats, next_ll) = e_step(&model, descriptors);
        trace.push(next_ll);
        stats = next_stats;
        let improvement = next_ll - ll;
        ll = next_ll;
        if improvement < tol {
            break;
        }
    }
    Ok(GmmFit {
        model,
        log_likelihood_trace: trace,
    })
}

fn per_dim_variance<'a>(rows: impl Iterator<Item = &'a [f64]> + Clone, m: usize) -> Vec<f64> {
    let mut mean: Vec<f64> = Vec::new();
    for r in rows.clone() {
        if mean.is_empty() {
            mean = vec![0.0; r.len()];
        }
        for (a, &v) in mean.iter_mut().zip(r) {
            *a += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= m as f64);
    let mut var = vec![0.0; mean.len()];
    for r in rows {
        for ((a, &v), &mu) in var.iter_mut().zip(r).zip(&mean) {
            *a += (v - mu) * (v - mu);
        }
    }
    var.iter_mut().for_each(|v| *v /= m as f64);
    var
}

/// `1e-6` times the mean per-dimension variance of the data.
pub fn variance_floor(descriptors: &DescriptorSet) -> f64 {
    let var = per_dim_variance(descriptors.rows(), descriptors.len());
    let mean = var.iter().sum::<f64>() / var.len() as f64;
    (VARIANCE_FLOOR_RATIO * mean).max(MIN_VARIANCE_FLOOR)
}

fn normalized_weights(mut w: Vec<f64>) -> Vec<f64> {
    for v in &mut w {
        *v = v.max(MIN_WEIGHT);
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Responsibilities of every descriptor plus the average log-likelihood.
struct Responsibilities {
    /// `M x K`, row-major.
    q: Vec<f64>,
}

fn e_step(model: &GmmModel, set: &DescriptorSet) -> (Responsibilities, f64) {
    let rows: Vec<&[f64]> = set.rows().collect();
    let per_row: Vec<(Vec<f64>, f64)> = rows
        .par_iter()
        .map(|x| {
            let mut logp = model.component_log_densities(x);
            let lse = log_sum_exp(&logp);
            for v in &mut logp {
                *v = (*v - lse).exp();
            }
            (logp, lse)
        })
        .collect();
    let mut q = Vec::with_capacity(rows.len() * model.num_components());
    let mut total = 0.0;
    for (r, lse) in per_row {
        q.extend_from_slice(&r);
        total += lse;
    }
    (Responsibilities { q }, total / rows.len() as f64)
}

fn m_step(prev: &GmmModel, set: &DescriptorSet, stats: &Responsibilities) -> Result<GmmModel> {
    let k_count = prev.num_components();
    let dims = prev.dims();
    let m = set.len();
    let mut nk = vec![0.0; k_count];
    let mut sx = vec![0.0; k_count * dims];
    for (i, row) in set.rows().enumerate() {
        for k in 0..k_count {
            let q = stats.q[i * k_count + k];
            if q == 0.0 {
                continue;
            }
            nk[k] += q;
            for j in 0..dims {
                sx[k * dims + j] += q * row[j];
            }
        }
    }
    let mut means = prev.means().to_vec();
    for k in 0..k_count {
        if nk[k] > 0.0 {
            for j in 0..dims {
                means[k * dims + j] = sx[k * dims + j] / nk[k];
            }
        }
    }
    let mut sxx = vec![0.0; k_count * dims];
    for (i, row) in set.rows().enumerate() {
        for k in 0..k_count {
            let q = stats.q[i * k_count + k];
            if q == 0.0 {
                continue;
            }
            for j in 0..dims {
                let d = row[j] - means[k * dims + j];
                sxx[k * dims + j] += q * d * d;
            }
        }
    }
    let floor = prev.variance_floor();
    let mut variances = prev.variances().to_vec();
    for k in 0..k_count {
        if nk[k] > 0.0 {
            for j in 0..dims {
                variances[k * dims + j] = (sxx[k * dims + j] / nk[k]).max(floor);
            }
        }
    }
    let weights = normalized_weights(nk.iter().map(|&n| n / m as f64).collect());
    GmmModel::new(weights, means, variances, floor)
}

pub(super) fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub(super) fn log_normalizer(variances: &[f64]) -> f64 {
    -0.5 * variances
        .iter()
        .map(|&s2| (2.0 * PI * s2).ln())
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Normal, StandardNormal};

    #[test]
    fn single_component_is_sample_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<Vec<f64>> = (0..500)
            .map(|_| {
                vec![
                    rng.sample::<f64, _>(StandardNormal) * 2.0 + 1.0,
                    rng.random(),
                ]
            })
            .collect();
        let set = DescriptorSet::from_rows(&rows).unwrap();
        let model = gmm_fit(&set, 1, 0, 50, 1e-10).unwrap();
        let var = per_dim_variance(set.rows(), set.len());
        for j in 0..2 {
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / 500.0;
            assert!((model.means()[j] - mean).abs() < 1e-6);
            assert!((model.variances()[j] - var[j]).abs() < 1e-6);
        }
        assert_eq!(model.weights(), &[1.0]);
    }

    #[test]
    fn two_blobs_recover_proportions() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let left = Normal::new(-5.0, 1.0).unwrap();
        let right = Normal::new(5.0, 1.0).unwrap();
        let mut rows = Vec::new();
        for _ in 0..300 {
            rows.push(vec![rng.sample(left)]);
        }
        for _ in 0..700 {
            rows.push(vec![rng.sample(right)]);
        }
        let set = DescriptorSet::from_rows(&rows).unwrap();
        let model = gmm_fit(&set, 2, 3, 200, 1e-9).unwrap();
        let mut pairs: Vec<(f64, f64)> = (0..2)
            .map(|k| (model.means()[k], model.weights()[k]))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!((pairs[0].1 - 0.3).abs() < 0.02, "{pairs:?}");
        assert!((pairs[1].1 - 0.7).abs() < 0.02, "{pairs:?}");
    }

    #[test]
    fn log_likelihood_non_decreasing() {
        for seed in 0..6 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let rows: Vec<Vec<f64>> = (0..200)
                .map(|i| {
                    let shift = (i % 3) as f64 * 2.0;
                    (0..3)
                        .map(|_| rng.sample::<f64, _>(StandardNormal) + shift)
                        .collect()
                })
                .collect();
            let set = DescriptorSet::from_rows(&rows).unwrap();
            let fit = gmm_fit_traced(&set, 4, seed, 100, 1e-12).unwrap();
            for w in fit.log_likelihood_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-10, "{w:?}");
            }
        }
    }

    #[test]
    fn variances_respect_floor() {
        // one dimension is constant
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64, 3.0]).collect();
        let set = DescriptorSet::from_rows(&rows).unwrap();
        let model = gmm_fit(&set, 2, 1, 30, 1e-8).unwrap();
        assert!(model.variance_floor() > 0.0);
        assert!(model
            .variances()
            .iter()
            .all(|&v| v >= model.variance_floor()));
    }

    #[test]
    fn log_sum_exp_stable() {
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }
}
