//! Fixed-length video representations from frame-level descriptors.
//!
//! A video's frame descriptors are encoded twice: directly in the time
//! domain, and as the per-dimension DFT magnitude spectrum resampled to a
//! fixed number of frequency points. Each branch is aggregated (average
//! pooling, LLC, Fisher vector or VLAD), the branches are scaled to fixed
//! norms and concatenated, and a one-vs-rest linear SVM classifies the result.

mod binio;
pub mod codebook;
pub mod encode;
pub mod error;
pub mod pipeline;
pub mod preprocess;
pub mod signal;
pub mod svm;
pub mod tensorio;

pub use codebook::{assign_nearest, gmm_fit, gmm_posteriors, kmeans_fit, Codebook, GmmModel};
pub use encode::{
    average_pool, fisher_encode, fuse, llc_encode, llc_pool, vlad_encode, Branch, EncodingMethod,
    LlcParams, Normalization, VideoVector,
};
pub use error::{Error, Result};
pub use pipeline::{
    encode_video, evaluate, fit_models, generate_synthetic_dataset, run_repeated_experiment,
    EvaluationReport, ModelBundle, PipelineConfig, SyntheticSpec,
};
pub use preprocess::{l2_normalize, pca_fit, pca_transform, scale_to_norm, PcaModel};
pub use signal::{
    cubic_resample, dft_magnitude, naive_dft_reference, spectrum_of_sequence, Spectrum,
};
pub use svm::{hinge_objective, predict, train_linear_svm, LinearSvmModel, SvmParams};
pub use tensorio::{
    read_feature_sequence, read_manifest, split_train_test, write_feature_sequence, write_manifest,
    DatasetManifest, DescriptorSet, FeatureSequence, ManifestEntry,
};
