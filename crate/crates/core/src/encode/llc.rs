//! Locality-constrained linear coding with the k-nearest-codeword approximation.
//!
//! For a descriptor `x` and its `k` nearest codewords `B` (rows), the code
//! minimizes `||x - B^T c||^2 + lambda ||c||^2` subject to `sum(c) = 1`.
//! With `C = (B - 1 x^T)(B - 1 x^T)^T` the solution is `(C + lambda I)^-1 1`
//! rescaled to sum to one.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{EncodingMethod, VideoVector};
use crate::codebook::{squared_distance, Codebook};
use crate::error::{Error, Result};
use crate::tensorio::DescriptorSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LlcParams {
    /// Number of nearest codewords used per descriptor.
    pub neighbors: usize,
    /// Ridge regularizer on the code.
    pub lambda: f64,
}

impl Default for LlcParams {
    fn default() -> Self {
        LlcParams {
            neighbors: 5,
            lambda: 1e-4,
        }
    }
}

impl LlcParams {
    pub fn validate(&self, codebook_size: usize) -> Result<()> {
        if self.neighbors == 0 || self.neighbors > codebook_size {
            return Err(Error::invalid(format!(
                "LLC neighbors {} must be in 1..={codebook_size}",
                self.neighbors
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("LLC lambda must be non-negative"));
        }
        Ok(())
    }
}

/// Indices of the `k` codewords nearest to `x`, nearest first, ties by index.
pub(crate) fn nearest_words(codebook: &Codebook, x: &[f64], k: usize) -> Vec<usize> {
    let dists: Vec<f64> = (0..codebook.num_words())
        .map(|j| squared_distance(x, codebook.centroid(j)))
        .collect();
    let cmp = |a: &usize, b: &usize| dists[*a].total_cmp(&dists[*b]).then(a.cmp(b));
    let mut idx: Vec<usize> = (0..codebook.num_words()).collect();
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, cmp);
        idx.truncate(k);
    }
    idx.sort_by(cmp);
    idx
}

/// Dense length-`K` LLC code of `x`; entries outside the neighborhood are 0.
pub fn llc_encode(codebook: &Codebook, params: &LlcParams, x: &[f64]) -> Result<Vec<f64>> {
    Error::check_dims(codebook.dims(), x.len())?;
    params.validate(codebook.num_words())?;
    let k = params.neighbors;
    let words = nearest_words(codebook, x, k);
    let shifted = DMatrix::from_fn(k, x.len(), |i, j| codebook.centroid(words[i])[j] - x[j]);
    let mut gram = &shifted * shifted.transpose();
    for i in 0..k {
        gram[(i, i)] += params.lambda;
    }
    let ones = DVector::from_element(k, 1.0);
    let raw = match gram.clone().cholesky() {
        Some(chol) => chol.solve(&ones),
        None => gram
            .lu()
            .solve(&ones)
            .ok_or_else(|| Error::invalid("LLC system is singular; use lambda > 0"))?,
    };
    let total: f64 = raw.iter().sum();
    if total == 0.0 || !total.is_finite() {
        return Err(Error::invalid("LLC system is singular; use lambda > 0"));
    }
    let mut code = vec![0.0; codebook.num_words()];
    for (i, &w) in words.iter().enumerate() {
        code[w] = raw[i] / total;
    }
    Ok(code)
}

/// Element-wise maximum of the LLC codes of all descriptors.
pub fn llc_pool(
    codebook: &Codebook,
    params: &LlcParams,
    descriptors: &DescriptorSet,
) -> Result<VideoVector> {
    if descriptors.is_empty() {
        return Err(Error::invalid("LLC pooling needs at least one descriptor"));
    }
    Error::check_dims(codebook.dims(), descriptors.dims())?;
    let rows: Vec<&[f64]> = descriptors.rows().collect();
    let codes: Vec<Vec<f64>> = rows
        .par_iter()
        .map(|x| llc_encode(codebook, params, x))
        .collect::<Result<_>>()?;
    let mut pooled = vec![f64::NEG_INFINITY; codebook.num_words()];
    for code in &codes {
        for (p, &c) in pooled.iter_mut().zip(code) {
            *p = p.max(c);
        }
    }
    VideoVector::new(pooled, EncodingMethod::Llc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_codebook(rng: &mut ChaCha8Rng, k: usize, d: usize) -> Codebook {
        let data: Vec<f64> = (0..k * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        Codebook::new(DescriptorSet::new(d, data).unwrap()).unwrap()
    }

    #[test]
    fn codeword_itself_with_one_neighbor() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cb = random_codebook(&mut rng, 6, 3);
        let params = LlcParams {
            neighbors: 1,
            lambda: 1e-4,
        };
        let code = llc_encode(&cb, &params, cb.centroid(4)).unwrap();
        let mut want = vec![0.0; 6];
        want[4] = 1.0;
        assert_eq!(code, want);
    }

    #[test]
    fn codes_sum_to_one_and_are_sparse() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cb = random_codebook(&mut rng, 20, 4);
        let params = LlcParams::default();
        for _ in 0..50 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let code = llc_encode(&cb, &params, &x).unwrap();
            assert!((code.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(code.iter().filter(|&&c| c != 0.0).count() <= params.neighbors);
        }
    }

    #[test]
    fn neighbors_validated() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cb = random_codebook(&mut rng, 3, 2);
        let bad = LlcParams {
            neighbors: 4,
            lambda: 1e-4,
        };
        assert!(llc_encode(&cb, &bad, &[0.0, 0.0]).is_err());
        let zero = LlcParams {
            neighbors: 0,
            lambda: 1e-4,
        };
        assert!(llc_encode(&cb, &zero, &[0.0, 0.0]).is_err());
        assert!(llc_encode(&cb, &LlcParams::default().with_neighbors(2), &[0.0]).is_err());
    }

    #[test]
    fn pool_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cb = random_codebook(&mut rng, 10, 3);
        let params = LlcParams::default();
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let once = DescriptorSet::from_rows(std::slice::from_ref(&x)).unwrap();
        let twice = DescriptorSet::from_rows(&[x.clone(), x.clone()]).unwrap();
        let code = llc_encode(&cb, &params, &x).unwrap();
        assert_eq!(llc_pool(&cb, &params, &once).unwrap().values(), &code[..]);
        assert_eq!(
            llc_pool(&cb, &params, &twice).unwrap(),
            llc_pool(&cb, &params, &once).unwrap()
        );

        let rows: Vec<Vec<f64>> = (0..15)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let set = DescriptorSet::from_rows(&rows).unwrap();
        let pooled = llc_pool(&cb, &params, &set).unwrap();
        let codes: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| llc_encode(&cb, &params, r).unwrap())
            .collect();
        for j in 0..10 {
            let mut best = codes[0][j];
            for c in &codes[1..] {
                if c[j] > best {
                    best = c[j];
                }
            }
            assert_eq!(pooled.values()[j], best);
        }
        let mut reversed = rows.clone();
        reversed.reverse();
        let rev = llc_pool(&cb, &params, &DescriptorSet::from_rows(&reversed).unwrap()).unwrap();
        assert_eq!(rev, pooled);
    }

    impl LlcParams {
        fn with_neighbors(mut self, k: usize) -> Self {
            self.neighbors = k;
            self
        }
    }
}
