//! Fisher vector encoding over a diagonal GMM.
//!
//! For component `k` with prior `pi_k`, mean `mu_k`, standard deviation
//! `sigma_k` and posteriors `q_ki`:
//!
//! ```text
//! u_k = 1 / (N sqrt(pi_k))   * sum_i q_ki (f_i - mu_k) / sigma_k
//! v_k = 1 / (N sqrt(2 pi_k)) * sum_i q_ki ((f_i - mu_k)^2 / sigma_k^2 - 1)
//! ```
//!
//! The output is `[u_1 .. u_K, v_1 .. v_K]`, dimension `2dK`.

use rayon::prelude::*;

use super::{EncodingMethod, Normalization, VideoVector};
use crate::codebook::GmmModel;
use crate::error::{Error, Result};
use crate::tensorio::DescriptorSet;

/// First- and second-order statistics before any post-processing.
pub fn fisher_statistics(model: &GmmModel, descriptors: &DescriptorSet) -> Result<Vec<f64>> {
    if descriptors.is_empty() {
        return Err(Error::invalid(
            "Fisher encoding needs at least one descriptor",
        ));
    }
    Error::check_dims(model.dims(), descriptors.dims())?;
    let k_count = model.num_components();
    let dims = model.dims();
    let rows: Vec<&[f64]> = descriptors.rows().collect();
    let posteriors: Vec<Vec<f64>> = rows
        .par_iter()
        .map(|x| model.posteriors(x))
        .collect::<Result<_>>()?;

    let mut first = vec![0.0; k_count * dims];
    let mut second = vec![0.0; k_count * dims];
    for (x, q) in rows.iter().zip(&posteriors) {
        for k in 0..k_count {
            let qk = q[k];
            if qk == 0.0 {
                continue;
            }
            let mu = model.mean(k);
            let var = model.variance(k);
            for j in 0..dims {
                let z = (x[j] - mu[j]) / var[j].sqrt();
                first[k * dims + j] += qk * z;
                second[k * dims + j] += qk * (z * z - 1.0);
            }
        }
    }
    let n = rows.len() as f64;
    for k in 0..k_count {
        let pi = model.weights()[k];
        let a = 1.0 / (n * pi.sqrt());
        let b = 1.0 / (n * (2.0 * pi).sqrt());
        first[k * dims..(k + 1) * dims]
            .iter_mut()
            .for_each(|v| *v *= a);
        second[k * dims..(k + 1) * dims]
            .iter_mut()
            .for_each(|v| *v *= b);
    }
    first.extend(second);
    Ok(first)
}

pub fn fisher_encode(
    model: &GmmModel,
    descriptors: &DescriptorSet,
    normalization: Normalization,
) -> Result<VideoVector> {
    let stats = fisher_statistics(model, descriptors)?;
    VideoVector::new(normalization.apply(stats), EncodingMethod::FisherVector)
}
