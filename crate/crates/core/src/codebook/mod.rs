//! Codebooks over descriptor space: k-means centroids (LLC and VLAD) and
//! diagonal Gaussian mixtures (Fisher vectors).
//!
//! On-disk formats, little-endian, after the usual magic and `u32` version:
//!
//! * `TDFC`: `K`, `d` as `u32`, then the `K x d` centroids as `f64`, row-major.
//! * `TDFG`: `K`, `d` as `u32`, then weights (`K`), means (`K x d`) and
//!   variances (`K x d`) as `f64`, followed by the variance floor as one
//!   trailing `f64`.

mod gmm;
mod kmeans;

use std::path::Path;

use crate::binio::{self, ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::tensorio::DescriptorSet;

pub use gmm::{gmm_fit, gmm_fit_traced, variance_floor, GmmFit, VARIANCE_FLOOR_RATIO};
pub use kmeans::{kmeans_fit, kmeans_fit_traced, KMeansFit};

const CODEBOOK_MAGIC: &[u8; 4] = b"TDFC";
const GMM_MAGIC: &[u8; 4] = b"TDFG";

/// Centroids closer than this in every coordinate count as duplicates.
const DUPLICATE_TOLERANCE: f64 = 1e-12;

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `K` distinct centroids of dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    centroids: DescriptorSet,
}

impl Codebook {
    pub fn new(centroids: DescriptorSet) -> Result<Self> {
        if centroids.is_empty() {
            return Err(Error::invalid("a codebook needs at least one centroid"));
        }
        if let Some((a, b)) = find_duplicate(&centroids) {
            return Err(Error::invalid(format!("centroids {a} and {b} coincide")));
        }
        Ok(Codebook { centroids })
    }

    pub fn num_words(&self) -> usize {
        self.centroids.len()
    }

    pub fn dims(&self) -> usize {
        self.centroids.dims()
    }

    pub fn centroid(&self, k: usize) -> &[f64] {
        self.centroids.row(k)
    }

    pub fn centroids(&self) -> &DescriptorSet {
        &self.centroids
    }

    /// Index of the nearest centroid; ties go to the lowest index.
    pub fn assign(&self, x: &[f64]) -> Result<usize> {
        Error::check_dims(self.dims(), x.len())?;
        Ok(kmeans::nearest_centroid(x, self.centroids.as_slice(), self.dims()).0)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = ByteWriter::with_header(CODEBOOK_MAGIC);
        w.u32(binio::dim_to_u32(self.num_words(), "codebook size")?);
        w.u32(binio::dim_to_u32(self.dims(), "dimension")?);
        w.f64s(self.centroids.as_slice());
        Ok(w.into_bytes())
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let mut r = ByteReader::open(bytes, CODEBOOK_MAGIC, origin)?;
        let k = r.u32()? as usize;
        let dims = r.u32()? as usize;
        if k == 0 || dims == 0 {
            return Err(r.corrupt(format!("empty codebook {k}x{dims}")));
        }
        let data = r.f64s(k.saturating_mul(dims))?;
        r.finish()?;
        DescriptorSet::new(dims, data)
            .and_then(Codebook::new)
            .map_err(|e| Error::CorruptFile {
                path: origin.to_path_buf(),
                reason: e.to_string(),
            })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        binio::write_file(path, &self.to_bytes()?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&binio::read_file(path)?, path)
    }
}

fn find_duplicate(set: &DescriptorSet) -> Option<(usize, usize)> {
    let mut order: Vec<usize> = (0..set.len()).collect();
    order.sort_by(|&a, &b| set.row(a)[0].total_cmp(&set.row(b)[0]));
    for (pos, &i) in order.iter().enumerate() {
        for &j in &order[pos + 1..] {
            if set.row(j)[0] - set.row(i)[0] > DUPLICATE_TOLERANCE {
                break;
            }
            let same = set
                .row(i)
                .iter()
                .zip(set.row(j))
                .all(|(a, b)| (a - b).abs() <= DUPLICATE_TOLERANCE);
            if same {
                return Some((i.min(j), i.max(j)));
            }
        }
    }
    None
}

/// Nearest codeword of `x`, ties to the lowest index.
pub fn assign_nearest(codebook: &Codebook, x: &[f64]) -> Result<usize> {
    codebook.assign(x)
}

/// Gaussian mixture with diagonal covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    weights: Vec<f64>,
    means: Vec<f64>,
    variances: Vec<f64>,
    variance_floor: f64,
    /// Per-component `-0.5 * sum log(2 pi sigma^2)`.
    log_norms: Vec<f64>,
}

impl GmmModel {
    pub fn new(
        weights: Vec<f64>,
        means: Vec<f64>,
        variances: Vec<f64>,
        variance_floor: f64,
    ) -> Result<Self> {
        let k = weights.len();
        if k == 0 {
            return Err(Error::invalid("a mixture needs at least one component"));
        }
        if means.is_empty() || !means.len().is_multiple_of(k) {
            return Err(Error::invalid("means do not form a K x d matrix"));
        }
        let dims = means.len() / k;
        Error::check_dims(k * dims, variances.len())?;
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::invalid("mixture weights must be positive"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::invalid(format!(
                "mixture weights sum to {total}, not 1"
            )));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(Error::invalid("mixture means must be finite"));
        }
        if !(variance_floor > 0.0 && variance_floor.is_finite()) {
            return Err(Error::invalid("variance floor must be positive"));
        }
        if variances
            .iter()
            .any(|&v| !v.is_finite() || v < variance_floor)
        {
            return Err(Error::invalid(
                "mixture variances must be finite and above the floor",
            ));
        }
        let log_norms = variances
            .chunks_exact(dims)
            .map(gmm::log_normalizer)
            .collect();
        Ok(GmmModel {
            weights,
            means,
            variances,
            variance_floor,
            log_norms,
        })
    }

    pub fn num_components(&self) -> usize {
        self.weights.len()
    }

    pub fn dims(&self) -> usize {
        self.means.len() / self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// All means, `K x d` row-major.
    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn mean(&self, k: usize) -> &[f64] {
        let d = self.dims();
        &self.means[k * d..(k + 1) * d]
    }

    pub fn variance(&self, k: usize) -> &[f64] {
        let d = self.dims();
        &self.variances[k * d..(k + 1) * d]
    }

    pub fn variance_floor(&self) -> f64 {
        self.variance_floor
    }

    /// `log pi_k + log N(x; mu_k, sigma_k^2)` for every component. `x` must have `dims()` entries.
    pub(crate) fn component_log_densities(&self, x: &[f64]) -> Vec<f64> {
        (0..self.num_components())
            .map(|k| {
                let quad: f64 = x
                    .iter()
                    .zip(self.mean(k))
                    .zip(self.variance(k))
                    .map(|((&v, &mu), &s2)| (v - mu) * (v - mu) / s2)
                    .sum();
                self.weights[k].ln() + self.log_norms[k] - 0.5 * quad
            })
            .collect()
    }

    /// Log-density of the mixture at `x`.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        Error::check_dims(self.dims(), x.len())?;
        Ok(gmm::log_sum_exp(&self.component_log_densities(x)))
    }

    /// Posterior component probabilities of `x`, computed in log space.
    pub fn posteriors(&self, x: &[f64]) -> Result<Vec<f64>> {
        Error::check_dims(self.dims(), x.len())?;
        let mut logp = self.component_log_densities(x);
        let lse = gmm::log_sum_exp(&logp);
        for v in &mut logp {
            *v = (*v - lse).exp();
        }
        Ok(logp)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = ByteWriter::with_header(GMM_MAGIC);
        w.u32(binio::dim_to_u32(self.num_components(), "component count")?);
        w.u32(binio::dim_to_u32(self.dims(), "dimension")?);
        w.f64s(&self.weights);
        w.f64s(&self.means);
        w.f64s(&self.variances);
        w.f64(self.variance_floor);
        Ok(w.into_bytes())
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let mut r = ByteReader::open(bytes, GMM_MAGIC, origin)?;
        let k = r.u32()? as usize;
        let dims = r.u32()? as usize;
        if k == 0 || dims == 0 {
            return Err(r.corrupt(format!("empty mixture {k}x{dims}")));
        }
        let weights = r.f64s(k)?;
        let means = r.f64s(k.saturating_mul(dims))?;
        let variances = r.f64s(k.saturating_mul(dims))?;
        let floor = r.f64s(1)?[0];
        r.finish()?;
        GmmModel::new(weights, means, variances, floor).map_err(|e| Error::CorruptFile {
            path: origin.to_path_buf(),
            reason: e.to_string(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        binio::write_file(path, &self.to_bytes()?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&binio::read_file(path)?, path)
    }
}

/// Posterior responsibilities of each component for `x`.
pub fn gmm_posteriors(model: &GmmModel, x: &[f64]) -> Result<Vec<f64>> {
    model.posteriors(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn codebook(rows: &[[f64; 2]]) -> Codebook {
        Codebook::new(DescriptorSet::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn assign_exact_and_ties() {
        let cb = codebook(&[[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [5.0, 5.0]]);
        assert_eq!(assign_nearest(&cb, &[5.0, 5.0]).unwrap(), 3);
        // equidistant to centroids 1 and 2
        assert_eq!(assign_nearest(&cb, &[1.0, 1.0]).unwrap(), 0);
        assert_eq!(assign_nearest(&cb, &[2.0, 2.0]).unwrap(), 1);
        assert!(matches!(
            assign_nearest(&cb, &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn duplicate_centroids_rejected() {
        let set = DescriptorSet::from_rows(&[[1.0, 2.0], [0.0, 0.0], [1.0, 2.0]]).unwrap();
        assert!(Codebook::new(set).is_err());
    }

    #[test]
    fn single_component_posterior() {
        let m = GmmModel::new(vec![1.0], vec![0.0, 0.0], vec![1.0, 2.0], 1e-6).unwrap();
        assert_eq!(gmm_posteriors(&m, &[3.0, -1.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn symmetric_components_split_evenly() {
        let m = GmmModel::new(vec![0.5, 0.5], vec![-1.0, 1.0], vec![0.5, 0.5], 1e-6).unwrap();
        let q = gmm_posteriors(&m, &[0.0]).unwrap();
        assert!((q[0] - 0.5).abs() < 1e-15 && (q[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(GmmModel::new(vec![0.5, 0.4], vec![0.0, 1.0], vec![1.0, 1.0], 1e-6).is_err());
        assert!(GmmModel::new(vec![1.0], vec![0.0], vec![1e-9], 1e-6).is_err());
        assert!(GmmModel::new(vec![1.0], vec![0.0], vec![1.0], 0.0).is_err());
    }

    #[test]
    fn formats_round_trip() {
        let cb = codebook(&[[0.0, 1.5], [2.0, -3.0]]);
        let bytes = cb.to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"TDFC");
        assert_eq!(bytes.len(), 16 + 4 * 8);
        assert_eq!(Codebook::from_bytes(&bytes, Path::new("c")).unwrap(), cb);

        let g = GmmModel::new(
            vec![0.25, 0.75],
            vec![0.0, 1.0, 2.0, 3.0],
            vec![1.0, 2.0, 3.0, 4.0],
            1e-3,
        )
        .unwrap();
        let bytes = g.to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"TDFG");
        assert_eq!(bytes.len(), 16 + 8 * (2 + 4 + 4 + 1));
        let back = GmmModel::from_bytes(&bytes, Path::new("g")).unwrap();
        assert_eq!(back.to_bytes().unwrap(), bytes);
        assert!(GmmModel::from_bytes(&bytes[..bytes.len() - 8], Path::new("g")).is_err());
        assert!(Codebook::from_bytes(&bytes, Path::new("g")).is_err());
    }

    fn direct_posteriors(m: &GmmModel, x: &[f64]) -> Vec<f64> {
        let dens: Vec<f64> = (0..m.num_components())
            .map(|k| {
                let mut p = m.weights()[k];
                for ((xj, s2), mu) in x.iter().zip(m.variance(k)).zip(m.mean(k)) {
                    let d = xj - mu;
                    p *= (-0.5 * d * d / s2).exp() / (2.0 * PI * s2).sqrt();
                }
                p
            })
            .collect();
        let total: f64 = dens.iter().sum();
        dens.iter().map(|p| p / total).collect()
    }

    proptest! {
        #[test]
        fn posteriors_on_simplex_and_match_direct(
            raw_w in proptest::collection::vec(0.1f64..1.0, 1..5),
            seedish in proptest::collection::vec(-2.0f64..2.0, 15),
            x in proptest::collection::vec(-2.0f64..2.0, 3),
        ) {
            let k = raw_w.len();
            let total: f64 = raw_w.iter().sum();
            let weights: Vec<f64> = raw_w.iter().map(|w| w / total).collect();
            let means: Vec<f64> = (0..k * 3).map(|i| seedish[i % 15]).collect();
            let variances: Vec<f64> = (0..k * 3).map(|i| 0.5 + seedish[(i + 7) % 15].abs()).collect();
            let m = GmmModel::new(weights, means, variances, 1e-6).unwrap();
            let q = m.posteriors(&x).unwrap();
            prop_assert!(q.iter().all(|&v| v >= 0.0));
            prop_assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let direct = direct_posteriors(&m, &x);
            for (a, b) in q.iter().zip(&direct) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }
    }
}
