use super::{EncodingMethod, VideoVector};
use crate::error::{Error, Result};
use crate::tensorio::DescriptorSet;

/// Mean of the descriptors; same dimension as the input.
pub fn average_pool(descriptors: &DescriptorSet) -> Result<VideoVector> {
    if descriptors.is_empty() {
        return Err(Error::invalid(
            "average pooling needs at least one descriptor",
        ));
    }
    let mut acc = vec![0.0; descriptors.dims()];
    for row in descriptors.rows() {
        for (a, &v) in acc.iter_mut().zip(row) {
            *a += v;
        }
    }
    let n = descriptors.len() as f64;
    acc.iter_mut().for_each(|v| *v /= n);
    VideoVector::new(acc, EncodingMethod::Average)
}
