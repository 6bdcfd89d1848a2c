//! Vector normalization, branch-norm scaling and PCA.

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use tracing::warn;

use crate::binio::{self, ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::tensorio::DescriptorSet;

const PCA_MAGIC: &[u8; 4] = b"TDFP";

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Scales `v` to unit length. The zero vector is returned unchanged.
pub fn l2_normalize(v: &[f64]) -> Vec<f64> {
    let norm = l2_norm(v);
    if norm > 0.0 {
        v.iter().map(|x| x / norm).collect()
    } else {
        v.to_vec()
    }
}

/// Rescales `v` so its l2 norm equals `target_norm`.
pub fn scale_to_norm(v: &[f64], target_norm: f64) -> Result<Vec<f64>> {
    if !(target_norm > 0.0 && target_norm.is_finite()) {
        return Err(Error::invalid(format!(
            "target norm {target_norm} must be positive"
        )));
    }
    let norm = l2_norm(v);
    if norm == 0.0 {
        return Err(Error::invalid("cannot scale zero vector"));
    }
    let factor = target_norm / norm;
    Ok(v.iter().map(|x| x * factor).collect())
}

/// A fitted linear projection onto the leading principal components.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    input_dims: usize,
    output_dims: usize,
    mean: Vec<f64>,
    /// `output_dims x input_dims`, row-major, rows orthonormal.
    components: Vec<f64>,
    explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn new(
        input_dims: usize,
        output_dims: usize,
        mean: Vec<f64>,
        components: Vec<f64>,
        explained_variance: Vec<f64>,
    ) -> Result<Self> {
        if input_dims == 0 || output_dims == 0 || output_dims > input_dims {
            return Err(Error::invalid(format!(
                "invalid PCA shape {input_dims} -> {output_dims}"
            )));
        }
        Error::check_dims(input_dims, mean.len())?;
        Error::check_dims(input_dims * output_dims, components.len())?;
        Error::check_dims(output_dims, explained_variance.len())?;
        if explained_variance.iter().any(|&v| v < 0.0)
            || explained_variance.windows(2).any(|w| w[1] > w[0])
        {
            return Err(Error::invalid(
                "explained variance must be non-negative and non-increasing",
            ));
        }
        let model = PcaModel {
            input_dims,
            output_dims,
            mean,
            components,
            explained_variance,
        };
        for i in 0..output_dims {
            for j in 0..=i {
                let dot: f64 = model
                    .component(i)
                    .iter()
                    .zip(model.component(j))
                    .map(|(a, b)| a * b)
                    .sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot - want).abs() > 1e-8 {
                    return Err(Error::invalid("PCA components are not orthonormal"));
                }
            }
        }
        Ok(model)
    }

    /// The identity projection on `dims` dimensions.
    pub fn identity(dims: usize) -> Result<Self> {
        let mut components = vec![0.0; dims * dims];
        for i in 0..dims {
            components[i * dims + i] = 1.0;
        }
        PcaModel::new(dims, dims, vec![0.0; dims], components, vec![0.0; dims])
    }

    pub fn input_dims(&self) -> usize {
        self.input_dims
    }

    pub fn output_dims(&self) -> usize {
        self.output_dims
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn component(&self, i: usize) -> &[f64] {
        &self.components[i * self.input_dims..(i + 1) * self.input_dims]
    }

    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    /// Projects `v` onto the components: `components * (v - mean)`.
    pub fn transform(&self, v: &[f64]) -> Result<Vec<f64>> {
        Error::check_dims(self.input_dims, v.len())?;
        let centered: Vec<f64> = v.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        Ok((0..self.output_dims)
            .map(|i| {
                self.component(i)
                    .iter()
                    .zip(&centered)
                    .map(|(c, x)| c * x)
                    .sum()
            })
            .collect())
    }

    /// Maps reduced coordinates back to input space.
    pub fn inverse_transform(&self, coords: &[f64]) -> Result<Vec<f64>> {
        Error::check_dims(self.output_dims, coords.len())?;
        let mut out = self.mean.clone();
        for (i, &c) in coords.iter().enumerate() {
            for (o, &w) in out.iter_mut().zip(self.component(i)) {
                *o += c * w;
            }
        }
        Ok(out)
    }

    pub fn transform_set(&self, set: &DescriptorSet) -> Result<DescriptorSet> {
        set.map_rows(self.output_dims, |row| self.transform(row))
    }

    /// `TDFP` v1: magic, version, `D`, `d` as `u32`, then mean, components
    /// (row-major) and explained variance as `f64`, all little-endian.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = ByteWriter::with_header(PCA_MAGIC);
        w.u32(binio::dim_to_u32(self.input_dims, "input dimension")?);
        w.u32(binio::dim_to_u32(self.output_dims, "output dimension")?);
        w.f64s(&self.mean);
        w.f64s(&self.components);
        w.f64s(&self.explained_variance);
        Ok(w.into_bytes())
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let mut r = ByteReader::open(bytes, PCA_MAGIC, origin)?;
        let input_dims = r.u32()? as usize;
        let output_dims = r.u32()? as usize;
        let mean = r.f64s(input_dims)?;
        let components = r.f64s(input_dims.saturating_mul(output_dims))?;
        let explained = r.f64s(output_dims)?;
        r.finish()?;
        PcaModel::new(input_dims, output_dims, mean, components, explained).map_err(|e| {
            Error::CorruptFile {
                path: origin.to_path_buf(),
                reason: e.to_string(),
            }
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        binio::write_file(path, &self.to_bytes()?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&binio::read_file(path)?, path)
    }
}

/// Fits PCA by eigendecomposition of the sample covariance.
///
/// `output_dims` above `min(D, M - 1)` is clipped with a warning. Each
/// component's largest-magnitude entry is made positive.
pub fn pca_fit(descriptors: &DescriptorSet, output_dims: usize) -> Result<PcaModel> {
    let m = descriptors.len();
    let dims = descriptors.dims();
    if m < 2 {
        return Err(Error::invalid(format!(
            "PCA needs at least 2 descriptors, got {m}"
        )));
    }
    if output_dims == 0 {
        return Err(Error::invalid("PCA output dimension must be at least 1"));
    }
    let bound = dims.min(m - 1);
    let out_dims = if output_dims > bound {
        warn!(
            requested = output_dims,
            used = bound,
            "clipping PCA output dimension"
        );
        bound
    } else {
        output_dims
    };

    let mut mean = vec![0.0; dims];
    for row in descriptors.rows() {
        for (acc, &v) in mean.iter_mut().zip(row) {
            *acc += v;
        }
    }
    for v in &mut mean {
        *v /= m as f64;
    }
    let centered = DMatrix::from_fn(m, dims, |i, j| descriptors.row(i)[j] - mean[j]);
    let cov = (centered.transpose() * &centered) / (m - 1) as f64;
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..dims).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let mut components = Vec::with_capacity(out_dims * dims);
    let mut explained = Vec::with_capacity(out_dims);
    for &idx in order.iter().take(out_dims) {
        let col = eig.eigenvectors.column(idx);
        let pivot = col
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (i, &v)| {
                if v.abs() > best.1 {
                    (i, v.abs())
                } else {
                    best
                }
            })
            .0;
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        let norm = col.norm();
        components.extend(col.iter().map(|&v| sign * v / norm));
        explained.push(eig.eigenvalues[idx].max(0.0));
    }
    PcaModel::new(dims, out_dims, mean, components, explained)
}

/// Projects `v` with a fitted model.
pub fn pca_transform(model: &PcaModel, v: &[f64]) -> Result<Vec<f64>> {
    model.transform(v)
}
