use super::{EncodingMethod, Normalization, VideoVector};
use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::tensorio::DescriptorSet;

/// Per-codeword sums of residuals to the nearest codeword, dimension `dK`.
pub fn vlad_residuals(codebook: &Codebook, descriptors: &DescriptorSet) -> Result<Vec<f64>> {
    if descriptors.is_empty() {
        return Err(Error::invalid(
            "VLAD encoding needs at least one descriptor",
        ));
    }
    Error::check_dims(codebook.dims(), descriptors.dims())?;
    let dims = codebook.dims();
    let mut out = vec![0.0; codebook.num_words() * dims];
    for x in descriptors.rows() {
        let k = codebook.assign(x)?;
        let c = codebook.centroid(k);
        for ((o, &xv), &cv) in out[k * dims..(k + 1) * dims].iter_mut().zip(x).zip(c) {
            *o += xv - cv;
        }
    }
    Ok(out)
}

pub fn vlad_encode(
    codebook: &Codebook,
    descriptors: &DescriptorSet,
    normalization: Normalization,
) -> Result<VideoVector> {
    let raw = vlad_residuals(codebook, descriptors)?;
    VideoVector::new(normalization.apply(raw), EncodingMethod::Vlad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::l2_norm;

    fn cb() -> Codebook {
        Codebook::new(DescriptorSet::from_rows(&[[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]]).unwrap())
            .unwrap()
    }

    #[test]
    fn descriptors_on_centroids_give_zero() {
        let set = DescriptorSet::from_rows(&[[4.0, 0.0], [0.0, 4.0], [4.0, 0.0]]).unwrap();
        assert!(vlad_residuals(&cb(), &set)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        // post-normalization keeps the zero vector
        let v = vlad_encode(&cb(), &set, Normalization::SignedSqrtL2).unwrap();
        assert!(v.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_descriptor_fills_one_block() {
        let set = DescriptorSet::from_rows(&[[3.5, 0.5]]).unwrap();
        let raw = vlad_residuals(&cb(), &set).unwrap();
        assert_eq!(raw, vec![0.0, 0.0, -0.5, 0.5, 0.0, 0.0]);
        let v = vlad_encode(&cb(), &set, Normalization::SignedSqrtL2).unwrap();
        assert_eq!(v.len(), 6);
        assert!((l2_norm(v.values()) - 1.0).abs() < 1e-12);
    }
}
