use std::fs;
use std::path::Path;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tdf_core::tensorio::{read_feature_sequence, write_feature_sequence};
use tdf_core::{
    fisher_encode, gmm_fit, kmeans_fit, pca_fit, train_linear_svm, Codebook, DescriptorSet,
    EncodingMethod, Error, FeatureSequence, GmmModel, LinearSvmModel, Normalization, PcaModel,
    SvmParams, VideoVector,
};

fn random_set(seed: u64, n: usize, d: usize) -> DescriptorSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DescriptorSet::new(d, (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap()
}

/// Writes `bytes`, then checks that `read` rejects them.
fn rejects<T: std::fmt::Debug>(
    dir: &Path,
    bytes: &[u8],
    read: impl Fn(&Path) -> tdf_core::Result<T>,
) -> Error {
    let path = dir.join("bad");
    fs::write(&path, bytes).unwrap();
    read(&path).unwrap_err()
}

#[test]
fn every_format_survives_a_disk_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let set = random_set(1, 80, 4);

    let seq = FeatureSequence::from_descriptors("clip", set.clone()).unwrap();
    write_feature_sequence(&seq, &d.join("clip.tdfe")).unwrap();
    let back = read_feature_sequence(&d.join("clip.tdfe")).unwrap();
    assert_eq!(back.video_id(), "clip");
    assert_eq!(back.frames(), 80);
    // the payload is f32
    for i in 0..80 {
        for k in 0..4 {
            assert_eq!(back.value(k, i), seq.value(k, i) as f32 as f64);
        }
    }

    let pca = pca_fit(&set, 2).unwrap();
    pca.write(&d.join("p")).unwrap();
    assert_eq!(PcaModel::read(&d.join("p")).unwrap(), pca);

    let cb = kmeans_fit(&set, 5, 2, 30).unwrap();
    cb.write(&d.join("c")).unwrap();
    assert_eq!(Codebook::read(&d.join("c")).unwrap(), cb);

    let gmm = gmm_fit(&set, 2, 2, 30, 1e-8).unwrap();
    gmm.write(&d.join("g")).unwrap();
    assert_eq!(GmmModel::read(&d.join("g")).unwrap(), gmm);

    let v = fisher_encode(&gmm, &set, Normalization::SignedSqrtL2).unwrap();
    v.write(&d.join("v")).unwrap();
    assert_eq!(VideoVector::read(&d.join("v")).unwrap(), v);

    let examples: Vec<(Vec<f64>, usize)> = set
        .rows()
        .enumerate()
        .map(|(i, r)| (r.to_vec(), i % 2))
        .collect();
    let svm = train_linear_svm(&examples, 2, &SvmParams::default()).unwrap();
    svm.write(&d.join("m")).unwrap();
    assert_eq!(LinearSvmModel::read(&d.join("m")).unwrap(), svm);
}

#[test]
fn damaged_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let v = VideoVector::new(vec![1.0, -2.0, 3.5], EncodingMethod::Vlad).unwrap();
    let good = v.to_bytes().unwrap();

    let mut wrong_magic = good.clone();
    wrong_magic[0] = b'X';
    assert!(matches!(
        rejects(d, &wrong_magic, VideoVector::read),
        Error::UnsupportedFormat { .. }
    ));

    let mut wrong_version = good.clone();
    wrong_version[4] = 9;
    assert!(matches!(
        rejects(d, &wrong_version, VideoVector::read),
        Error::UnsupportedFormat { .. } | Error::CorruptFile { .. }
    ));

    let truncated = &good[..good.len() - 3];
    assert!(matches!(
        rejects(d, truncated, VideoVector::read),
        Error::CorruptFile { .. }
    ));

    let mut trailing = good.clone();
    trailing.push(0);
    assert!(matches!(
        rejects(d, &trailing, VideoVector::read),
        Error::CorruptFile { .. }
    ));

    let mut nan = good.clone();
    let at = nan.len() - 8;
    nan[at..].copy_from_slice(&f64::NAN.to_le_bytes());
    assert!(matches!(
        rejects(d, &nan, VideoVector::read),
        Error::NonFinite { .. }
    ));

    // a codebook file is not a vector file
    let cb = Codebook::new(random_set(3, 2, 2)).unwrap();
    assert!(matches!(
        rejects(d, &cb.to_bytes().unwrap(), VideoVector::read),
        Error::UnsupportedFormat { .. }
    ));

    assert!(matches!(
        VideoVector::read(&d.join("missing")).unwrap_err(),
        Error::Io { .. }
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn vector_bytes_round_trip(values in prop::collection::vec(-1e6f64..1e6, 1..64)) {
        let v = VideoVector::new(values, EncodingMethod::Average).unwrap();
        let bytes = v.to_bytes().unwrap();
        let back = VideoVector::from_bytes(&bytes, Path::new("mem")).unwrap();
        prop_assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn sequence_bytes_round_trip(d in 1usize..6, n in 1usize..40, seed in any::<u64>()) {
        let seq = FeatureSequence::from_descriptors("s", random_set(seed, n, d)).unwrap();
        let bytes = seq.to_bytes().unwrap();
        let back = FeatureSequence::from_bytes(&bytes, "s", Path::new("mem")).unwrap();
        prop_assert_eq!(back.to_bytes().unwrap(), bytes);
    }
}
