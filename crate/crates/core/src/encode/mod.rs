//! Aggregation of descriptor sets into fixed-length video vectors, and late
//! fusion of branch vectors.
//!
//! | method  | output dimension |
//! |---------|------------------|
//! | average | `d`              |
//! | LLC     | `K`              |
//! | Fisher  | `2dK`            |
//! | VLAD    | `dK`             |
//! | fused   | sum of branches  |

mod average;
mod fisher;
mod llc;
mod vlad;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::binio::{self, ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::preprocess::{l2_normalize, scale_to_norm};

pub use average::average_pool;
pub use fisher::{fisher_encode, fisher_statistics};
pub use llc::{llc_encode, llc_pool, LlcParams};
pub use vlad::{vlad_encode, vlad_residuals};

const VECTOR_MAGIC: &[u8; 4] = b"TDFV";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EncodingMethod {
    Average,
    Llc,
    FisherVector,
    Vlad,
    Fused,
}

impl EncodingMethod {
    fn tag(self) -> u8 {
        match self {
            EncodingMethod::Average => 0,
            EncodingMethod::Llc => 1,
            EncodingMethod::FisherVector => 2,
            EncodingMethod::Vlad => 3,
            EncodingMethod::Fused => 4,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => EncodingMethod::Average,
            1 => EncodingMethod::Llc,
            2 => EncodingMethod::FisherVector,
            3 => EncodingMethod::Vlad,
            4 => EncodingMethod::Fused,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            EncodingMethod::Average => "average",
            EncodingMethod::Llc => "llc",
            EncodingMethod::FisherVector => "fv",
            EncodingMethod::Vlad => "vlad",
            EncodingMethod::Fused => "fused",
        }
    }
}

impl fmt::Display for EncodingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EncodingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "average" => EncodingMethod::Average,
            "llc" => EncodingMethod::Llc,
            "fv" => EncodingMethod::FisherVector,
            "vlad" => EncodingMethod::Vlad,
            "fused" => EncodingMethod::Fused,
            other => return Err(Error::invalid(format!("unknown encoding method {other:?}"))),
        })
    }
}

/// Which descriptors a vector was aggregated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    /// Frame descriptors.
    Time,
    /// DFT features (spectrum columns).
    Dft,
    Fused,
}

impl Branch {
    fn tag(self) -> u8 {
        match self {
            Branch::Time => 0,
            Branch::Dft => 1,
            Branch::Fused => 2,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => Branch::Time,
            1 => Branch::Dft,
            2 => Branch::Fused,
            _ => return None,
        })
    }
}

/// Post-processing applied to Fisher and VLAD outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Raw statistics.
    None,
    /// Signed square root of every entry, then l2 normalization.
    #[default]
    SignedSqrtL2,
}

impl Normalization {
    pub fn apply(self, v: Vec<f64>) -> Vec<f64> {
        match self {
            Normalization::None => v,
            Normalization::SignedSqrtL2 => {
                let rooted: Vec<f64> = v.iter().map(|x| x.signum() * x.abs().sqrt()).collect();
                l2_normalize(&rooted)
            }
        }
    }
}

/// A fixed-length encoded video representation.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoVector {
    values: Vec<f64>,
    method: EncodingMethod,
    branch: Branch,
}

impl VideoVector {
    /// A time-branch vector; see [`VideoVector::with_branch`].
    pub fn new(values: Vec<f64>, method: EncodingMethod) -> Result<Self> {
        let branch = if method == EncodingMethod::Fused {
            Branch::Fused
        } else {
            Branch::Time
        };
        Self::with_parts(values, method, branch)
    }

    pub fn with_parts(values: Vec<f64>, method: EncodingMethod, branch: Branch) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("video vector is empty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("video vector contains non-finite values"));
        }
        Ok(VideoVector {
            values,
            method,
            branch,
        })
    }

    pub fn with_branch(mut self, branch: Branch) -> Self {
        self.branch = branch;
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn method(&self) -> EncodingMethod {
        self.method
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `TDFV` v1: magic, `u32` version, method tag byte, branch tag byte,
    /// `P` as `u32`, then `P` little-endian `f64` values.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = ByteWriter::with_header(VECTOR_MAGIC);
        w.u8(self.method.tag());
        w.u8(self.branch.tag());
        w.u32(binio::dim_to_u32(self.values.len(), "vector length")?);
        w.f64s(&self.values);
        Ok(w.into_bytes())
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let mut r = ByteReader::open(bytes, VECTOR_MAGIC, origin)?;
        let method_tag = r.u8()?;
        let method = EncodingMethod::from_tag(method_tag)
            .ok_or_else(|| r.corrupt(format!("unknown method tag {method_tag}")))?;
        let branch_tag = r.u8()?;
        let branch = Branch::from_tag(branch_tag)
            .ok_or_else(|| r.corrupt(format!("unknown branch tag {branch_tag}")))?;
        let len = r.u32()? as usize;
        if len == 0 {
            return Err(r.corrupt("empty vector"));
        }
        let values = r.f64s(len)?;
        r.finish()?;
        VideoVector::with_parts(values, method, branch)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        binio::write_file(path, &self.to_bytes()?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&binio::read_file(path)?, path)
    }
}

impl AsRef<[f64]> for VideoVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// Scales each branch to its target l2 norm and concatenates them in order.
pub fn fuse(branches: &[(VideoVector, f64)]) -> Result<VideoVector> {
    if branches.is_empty() {
        return Err(Error::invalid("fusion needs at least one branch"));
    }
    let mut values = Vec::with_capacity(branches.iter().map(|(v, _)| v.len()).sum());
    for (i, (v, norm)) in branches.iter().enumerate() {
        let scaled = scale_to_norm(v.values(), *norm)
            .map_err(|e| Error::invalid(format!("branch {i}: {e}")))?;
        values.extend(scaled);
    }
    VideoVector::with_parts(values, EncodingMethod::Fused, Branch::Fused)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::l2_norm;

    fn vv(values: &[f64]) -> VideoVector {
        VideoVector::new(values.to_vec(), EncodingMethod::Average).unwrap()
    }

    #[test]
    fn fused_norm_is_root_sum_of_squares() {
        let fused = fuse(&[(vv(&[1.0, 2.0, 3.0]), 0.6), (vv(&[-4.0, 0.5]), 0.4)]).unwrap();
        assert_eq!(fused.len(), 5);
        assert_eq!(fused.method(), EncodingMethod::Fused);
        assert_eq!(fused.branch(), Branch::Fused);
        assert!((l2_norm(fused.values()) - (0.36f64 + 0.16).sqrt()).abs() < 1e-12);
        assert!((l2_norm(&fused.values()[..3]) - 0.6).abs() < 1e-12);
        assert!((l2_norm(&fused.values()[3..]) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn single_branch_is_normalized() {
        let fused = fuse(&[(vv(&[3.0, 4.0]), 1.0)]).unwrap();
        assert!((fused.values()[0] - 0.6).abs() < 1e-15);
        assert!((fused.values()[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn zero_branch_rejected() {
        let err = fuse(&[(vv(&[1.0]), 0.6), (vv(&[0.0, 0.0]), 0.4)]).unwrap_err();
        assert!(err.to_string().contains("cannot scale zero vector"));
        assert!(fuse(&[]).is_err());
    }

    #[test]
    fn vector_format() {
        let v =
            VideoVector::with_parts(vec![1.5, -2.0], EncodingMethod::Vlad, Branch::Dft).unwrap();
        let bytes = v.to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"TDFV");
        assert_eq!(bytes[8], 3);
        assert_eq!(bytes[9], 1);
        assert_eq!(&bytes[10..14], &2u32.to_le_bytes());
        assert_eq!(bytes.len(), 14 + 16);
        let back = VideoVector::from_bytes(&bytes, Path::new("v")).unwrap();
        assert_eq!(back, v);
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(VideoVector::from_bytes(&bad, Path::new("v")).is_err());
    }

    #[test]
    fn normalization_keeps_zero() {
        assert_eq!(
            Normalization::SignedSqrtL2.apply(vec![0.0; 3]),
            vec![0.0; 3]
        );
        let v = Normalization::SignedSqrtL2.apply(vec![4.0, -9.0]);
        let n = 13f64.sqrt();
        assert!((v[0] - 2.0 / n).abs() < 1e-15 && (v[1] + 3.0 / n).abs() < 1e-15);
    }

    #[test]
    fn method_names_round_trip() {
        for m in [
            EncodingMethod::Average,
            EncodingMethod::Llc,
            EncodingMethod::FisherVector,
            EncodingMethod::Vlad,
            EncodingMethod::Fused,
        ] {
            assert_eq!(m.name().parse::<EncodingMethod>().unwrap(), m);
        }
        assert!("max".parse::<EncodingMethod>().is_err());
    }
}
