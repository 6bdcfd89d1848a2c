//! End-to-end flow: fit unsupervised models, encode both branches, fuse,
//! train the classifier and evaluate it.
//!
//! Per video, frames are l2-normalized and optionally projected by PCA. The
//! time branch encodes the projected frames; the DFT branch encodes the `L`
//! columns of their resampled magnitude spectrum. Codebooks and mixtures are
//! fitted separately per branch, on training videos only.

mod config;
mod report;
mod synth;

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::codebook::{gmm_fit, kmeans_fit, Codebook, GmmModel};
use crate::encode::{
    average_pool, fisher_encode, fuse, llc_pool, vlad_encode, Branch, EncodingMethod, VideoVector,
};
use crate::error::{Error, Result, StageExt};
use crate::preprocess::{l2_normalize, pca_fit, scale_to_norm, PcaModel};
use crate::signal::spectrum_of_sequence;
use crate::svm::{train_linear_svm, LinearSvmModel};
use crate::tensorio::{split_train_test, DatasetManifest, DescriptorSet, FeatureSequence};

pub use config::PipelineConfig;
pub use report::{EvaluationReport, ExperimentSummary};
pub use synth::{generate_synthetic_dataset, synthesize_video, SyntheticSpec, FRAME_RANGE};

const FIT_CONFIG_FILE: &str = "fit.cfg";
const PCA_FILE: &str = "pca.tdfp";

/// The unsupervised model a branch encoder needs.
#[derive(Debug, Clone, PartialEq)]
pub enum BranchModel {
    /// Average pooling needs no model.
    None,
    /// LLC and VLAD.
    Codebook(Codebook),
    /// Fisher vectors.
    Gmm(GmmModel),
}

impl BranchModel {
    fn file_name(&self, branch: &str) -> Option<String> {
        match self {
            BranchModel::None => None,
            BranchModel::Codebook(_) => Some(format!("{branch}.tdfc")),
            BranchModel::Gmm(_) => Some(format!("{branch}.tdfg")),
        }
    }

    fn write(&self, dir: &Path, branch: &str) -> Result<()> {
        match self {
            BranchModel::None => Ok(()),
            BranchModel::Codebook(c) => c.write(&dir.join(format!("{branch}.tdfc"))),
            BranchModel::Gmm(g) => g.write(&dir.join(format!("{branch}.tdfg"))),
        }
    }

    fn read(dir: &Path, branch: &str, method: EncodingMethod) -> Result<Self> {
        Ok(match method {
            EncodingMethod::Average => BranchModel::None,
            EncodingMethod::Llc | EncodingMethod::Vlad => {
                BranchModel::Codebook(Codebook::read(&dir.join(format!("{branch}.tdfc")))?)
            }
            EncodingMethod::FisherVector => {
                BranchModel::Gmm(GmmModel::read(&dir.join(format!("{branch}.tdfg")))?)
            }
            EncodingMethod::Fused => {
                return Err(Error::invalid("a branch cannot use the fused method"))
            }
        })
    }

    /// `(model dims, size)` when a model is present.
    fn shape(&self) -> Option<(usize, usize)> {
        match self {
            BranchModel::None => None,
            BranchModel::Codebook(c) => Some((c.dims(), c.num_words())),
            BranchModel::Gmm(g) => Some((g.dims(), g.num_components())),
        }
    }
}

/// Everything fitted before encoding: optional PCA and one model per
/// enabled branch, together with the configuration they were fitted under.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    fit_config: PipelineConfig,
    pca: Option<PcaModel>,
    time: Option<BranchModel>,
    dft: Option<BranchModel>,
}

impl ModelBundle {
    pub fn fit_config(&self) -> &PipelineConfig {
        &self.fit_config
    }

    pub fn pca(&self) -> Option<&PcaModel> {
        self.pca.as_ref()
    }

    pub fn time_model(&self) -> Option<&BranchModel> {
        self.time.as_ref()
    }

    pub fn dft_model(&self) -> Option<&BranchModel> {
        self.dft.as_ref()
    }

    /// Checks that `config` asks for exactly the models this bundle holds.
    pub fn check_compatible(&self, config: &PipelineConfig) -> Result<()> {
        let f = &self.fit_config;
        let differs: [(&str, bool); 11] = [
            ("pca_dims", f.pca_dims != config.pca_dims),
            ("pca_sample_cap", f.pca_sample_cap != config.pca_sample_cap),
            (
                "spectrum_length",
                f.spectrum_length != config.spectrum_length,
            ),
            ("time_encoder", f.time_encoder != config.time_encoder),
            ("dft_encoder", f.dft_encoder != config.dft_encoder),
            (
                "time_codebook_size",
                f.time_codebook_size != config.time_codebook_size,
            ),
            (
                "dft_codebook_size",
                f.dft_codebook_size != config.dft_codebook_size,
            ),
            (
                "use_time_branch",
                f.use_time_branch != config.use_time_branch,
            ),
            ("use_dft_branch", f.use_dft_branch != config.use_dft_branch),
            (
                "kmeans_max_iters / gmm_max_iters / gmm_tol",
                f.kmeans_max_iters != config.kmeans_max_iters
                    || f.gmm_max_iters != config.gmm_max_iters
                    || f.gmm_tol != config.gmm_tol,
            ),
            ("seed", f.seed != config.seed),
        ];
        match differs.iter().find(|(_, d)| *d) {
            Some((key, _)) => Err(Error::invalid(format!(
                "model bundle was fitted with a different {key}"
            ))),
            None => Ok(()),
        }
    }

    fn validate(&self) -> Result<()> {
        let cfg = &self.fit_config;
        if cfg.pca_dims.is_some() != self.pca.is_some() {
            return Err(Error::invalid(
                "bundle PCA presence does not match pca_dims",
            ));
        }
        if let (Some(pca), Some(d)) = (&self.pca, cfg.pca_dims) {
            if pca.output_dims() > d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: pca.output_dims(),
                });
            }
        }
        let descriptor_dims = self.pca.as_ref().map(PcaModel::output_dims);
        for (enabled, model, method, size) in [
            (
                cfg.use_time_branch,
                &self.time,
                cfg.time_encoder,
                cfg.time_codebook_size,
            ),
            (
                cfg.use_dft_branch,
                &self.dft,
                cfg.dft_encoder,
                cfg.dft_codebook_size,
            ),
        ] {
            if enabled != model.is_some() {
                return Err(Error::invalid(
                    "bundle branch models do not match branch flags",
                ));
            }
            let Some(model) = model else { continue };
            let kind_ok = matches!(
                (method, model),
                (EncodingMethod::Average, BranchModel::None)
                    | (
                        EncodingMethod::Llc | EncodingMethod::Vlad,
                        BranchModel::Codebook(_)
                    )
                    | (EncodingMethod::FisherVector, BranchModel::Gmm(_))
            );
            if !kind_ok {
                return Err(Error::invalid(format!(
                    "bundle model does not fit encoder {method}"
                )));
            }
            if let Some((dims, k)) = model.shape() {
                Error::check_dims(size.unwrap_or(0), k)?;
                if let Some(d) = descriptor_dims {
                    Error::check_dims(d, dims)?;
                }
            }
        }
        Ok(())
    }

    /// Writes `fit.cfg`, `pca.tdfp` and the `time.*` / `dft.*` model files.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
        let cfg_path = dir.join(FIT_CONFIG_FILE);
        fs::write(&cfg_path, self.fit_config.to_text()).map_err(|e| Error::Io {
            path: cfg_path,
            source: e,
        })?;
        if let Some(pca) = &self.pca {
            pca.write(&dir.join(PCA_FILE))?;
        }
        if let Some(m) = &self.time {
            m.write(dir, "time")?;
        }
        if let Some(m) = &self.dft {
            m.write(dir, "dft")?;
        }
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        let cfg_path = dir.join(FIT_CONFIG_FILE);
        let text = fs::read_to_string(&cfg_path).map_err(|e| Error::Io {
            path: cfg_path.clone(),
            source: e,
        })?;
        let fit_config =
            PipelineConfig::parse(&text, &cfg_path).map_err(|e| Error::CorruptFile {
                path: cfg_path.clone(),
                reason: e.to_string(),
            })?;
        let pca = match fit_config.pca_dims {
            Some(_) => Some(PcaModel::read(&dir.join(PCA_FILE))?),
            None => None,
        };
        let time = match fit_config.use_time_branch {
            true => Some(BranchModel::read(dir, "time", fit_config.time_encoder)?),
            false => None,
        };
        let dft = match fit_config.use_dft_branch {
            true => Some(BranchModel::read(dir, "dft", fit_config.dft_encoder)?),
            false => None,
        };
        let bundle = ModelBundle {
            fit_config,
            pca,
            time,
            dft,
        };
        bundle.validate().map_err(|e| Error::CorruptFile {
            path: dir.to_path_buf(),
            reason: e.to_string(),
        })?;
        Ok(bundle)
    }

    /// Files `write_dir` produces, in a fixed order.
    pub fn file_names(&self) -> Vec<String> {
        let mut names = vec![FIT_CONFIG_FILE.to_string()];
        if self.pca.is_some() {
            names.push(PCA_FILE.into());
        }
        names.extend(self.time.as_ref().and_then(|m| m.file_name("time")));
        names.extend(self.dft.as_ref().and_then(|m| m.file_name("dft")));
        names
    }
}

/// Loads every video of `manifest` in manifest order.
pub fn load_sequences(manifest: &DatasetManifest) -> Result<Vec<FeatureSequence>> {
    manifest
        .entries()
        .par_iter()
        .map(|e| e.load())
        .collect::<Result<Vec<_>>>()
        .stage("load")
}

/// l2-normalizes every frame, then projects with `pca` when given.
fn prepare(seq: &FeatureSequence, pca: Option<&PcaModel>) -> Result<FeatureSequence> {
    let normalized = seq
        .descriptors()
        .map_rows(seq.dims(), |f| Ok(l2_normalize(f)))?;
    let frames = match pca {
        Some(p) => p.transform_set(&normalized)?,
        None => normalized,
    };
    FeatureSequence::from_descriptors(seq.video_id(), frames)
}

fn concat_descriptors<'a>(
    sets: impl Iterator<Item = &'a DescriptorSet>,
    dims: usize,
) -> Result<DescriptorSet> {
    let mut all = DescriptorSet::empty(dims)?;
    for s in sets {
        all.extend(s)?;
    }
    Ok(all)
}

fn fit_branch_model(
    config: &PipelineConfig,
    method: EncodingMethod,
    size: Option<usize>,
    descriptors: &DescriptorSet,
    seed: u64,
) -> Result<BranchModel> {
    let k = || size.ok_or_else(|| Error::Config(format!("no codebook size for {method}")));
    Ok(match method {
        EncodingMethod::Average => BranchModel::None,
        EncodingMethod::Llc | EncodingMethod::Vlad => BranchModel::Codebook(kmeans_fit(
            descriptors,
            k()?,
            seed,
            config.kmeans_max_iters,
        )?),
        EncodingMethod::FisherVector => BranchModel::Gmm(gmm_fit(
            descriptors,
            k()?,
            seed,
            config.gmm_max_iters,
            config.gmm_tol,
        )?),
        EncodingMethod::Fused => return Err(Error::Config("a branch cannot use fused".into())),
    })
}

/// Uniform sample of at most `cap` rows, kept in their original order.
fn subsample(set: &DescriptorSet, cap: usize, seed: u64) -> Result<DescriptorSet> {
    if set.len() <= cap {
        return Ok(set.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, set.len(), cap).into_vec();
    picked.sort_unstable();
    let rows: Vec<&[f64]> = picked.iter().map(|&i| set.row(i)).collect();
    DescriptorSet::from_rows(&rows)
}

/// Fits PCA and the branch models on in-memory training videos.
///
/// PCA sees at most `pca_sample_cap` frames, drawn with `seed`. The time and
/// DFT models are fitted with `seed + 1` and `seed + 2`.
pub fn fit_models_on(config: &PipelineConfig, train: &[&FeatureSequence]) -> Result<ModelBundle> {
    config.validate()?;
    let dims = train
        .first()
        .map(|s| s.dims())
        .ok_or_else(|| Error::invalid("no training videos"))
        .stage("fit")?;
    for s in train {
        Error::check_dims(dims, s.dims()).stage("fit")?;
    }
    let normalized: Vec<FeatureSequence> = train
        .par_iter()
        .map(|s| prepare(s, None))
        .collect::<Result<_>>()
        .stage("fit")?;

    let pca = match config.pca_dims {
        Some(d) => {
            let frames = concat_descriptors(normalized.iter().map(|s| s.descriptors()), dims)?;
            let sample = subsample(&frames, config.pca_sample_cap, config.seed)?;
            Some(pca_fit(&sample, d).stage("fit pca")?)
        }
        None => None,
    };
    let prepared: Vec<FeatureSequence> = match &pca {
        Some(p) => normalized
            .par_iter()
            .map(|s| {
                FeatureSequence::from_descriptors(s.video_id(), p.transform_set(s.descriptors())?)
            })
            .collect::<Result<_>>()
            .stage("fit pca")?,
        None => normalized,
    };
    let d = prepared[0].dims();

    let time = if config.use_time_branch {
        let frames = concat_descriptors(prepared.iter().map(|s| s.descriptors()), d)?;
        Some(
            fit_branch_model(
                config,
                config.time_encoder,
                config.time_codebook_size,
                &frames,
                config.seed.wrapping_add(1),
            )
            .stage("fit time branch")?,
        )
    } else {
        None
    };
    let dft = if config.use_dft_branch {
        let model = if config.dft_encoder == EncodingMethod::Average {
            BranchModel::None
        } else {
            let spectra: Vec<DescriptorSet> = prepared
                .par_iter()
                .map(|s| Ok(spectrum_of_sequence(s, config.spectrum_length)?.into_columns()))
                .collect::<Result<_>>()
                .stage("fit dft branch")?;
            let columns = concat_descriptors(spectra.iter(), d)?;
            fit_branch_model(
                config,
                config.dft_encoder,
                config.dft_codebook_size,
                &columns,
                config.seed.wrapping_add(2),
            )
            .stage("fit dft branch")?
        };
        Some(model)
    } else {
        None
    };
    let bundle = ModelBundle {
        fit_config: config.clone(),
        pca,
        time,
        dft,
    };
    bundle.validate().stage("fit")?;
    Ok(bundle)
}

/// Loads the training videos of `manifest` and fits the model bundle.
pub fn fit_models(config: &PipelineConfig, manifest: &DatasetManifest) -> Result<ModelBundle> {
    let seqs = load_sequences(manifest)?;
    let refs: Vec<&FeatureSequence> = seqs.iter().collect();
    fit_models_on(config, &refs)
}

fn encode_branch(
    config: &PipelineConfig,
    method: EncodingMethod,
    model: &BranchModel,
    descriptors: &DescriptorSet,
    branch: Branch,
) -> Result<VideoVector> {
    let v = match (method, model) {
        (EncodingMethod::Average, BranchModel::None) => average_pool(descriptors)?,
        (EncodingMethod::Llc, BranchModel::Codebook(cb)) => {
            let params = config
                .llc
                .ok_or_else(|| Error::Config("llc parameters missing".into()))?;
            llc_pool(cb, &params, descriptors)?
        }
        (EncodingMethod::Vlad, BranchModel::Codebook(cb)) => {
            vlad_encode(cb, descriptors, config.normalization())?
        }
        (EncodingMethod::FisherVector, BranchModel::Gmm(g)) => {
            fisher_encode(g, descriptors, config.normalization())?
        }
        _ => {
            return Err(Error::invalid(format!(
                "bundle model does not fit encoder {method}"
            )))
        }
    };
    Ok(v.with_branch(branch))
}

/// Encodes one video into its fused (or single-branch) representation.
///
/// With one branch disabled the result is the other branch's vector scaled
/// to that branch's fusion norm, keeping its method and branch tags.
pub fn encode_video(
    config: &PipelineConfig,
    bundle: &ModelBundle,
    seq: &FeatureSequence,
) -> Result<VideoVector> {
    bundle.check_compatible(config).stage("encode")?;
    if let Some(p) = &bundle.pca {
        Error::check_dims(p.input_dims(), seq.dims()).stage("encode")?;
    }
    let prepared = prepare(seq, bundle.pca.as_ref()).stage("encode")?;
    let time = match &bundle.time {
        Some(m) => Some(
            encode_branch(
                config,
                config.time_encoder,
                m,
                prepared.descriptors(),
                Branch::Time,
            )
            .stage("encode time branch")?,
        ),
        None => None,
    };
    let dft = match &bundle.dft {
        Some(m) => {
            let columns = spectrum_of_sequence(&prepared, config.spectrum_length)
                .stage("encode dft branch")?
                .into_columns();
            Some(
                encode_branch(config, config.dft_encoder, m, &columns, Branch::Dft)
                    .stage("encode dft branch")?,
            )
        }
        None => None,
    };
    let single = |v: VideoVector, norm: f64| {
        let (method, branch) = (v.method(), v.branch());
        VideoVector::with_parts(scale_to_norm(v.values(), norm)?, method, branch)
    };
    match (time, dft) {
        (Some(t), Some(d)) => {
            fuse(&[(t, config.fusion_time_norm), (d, config.fusion_dft_norm)]).stage("fuse")
        }
        (Some(t), None) => single(t, config.fusion_time_norm).stage("fuse"),
        (None, Some(d)) => single(d, config.fusion_dft_norm).stage("fuse"),
        (None, None) => Err(Error::Config("both branches are disabled".into())),
    }
}

/// Encodes many videos concurrently; output order follows the input.
pub fn encode_videos(
    config: &PipelineConfig,
    bundle: &ModelBundle,
    seqs: &[&FeatureSequence],
) -> Result<Vec<VideoVector>> {
    bundle.check_compatible(config).stage("encode")?;
    seqs.par_iter()
        .map(|s| {
            encode_video(config, bundle, s)
                .map_err(|e| Error::invalid(format!("video {:?}: {e}", s.video_id())))
        })
        .collect()
}

/// Trains the one-vs-rest classifier with the configured SVM settings.
pub fn train_classifier(
    config: &PipelineConfig,
    examples: &[(VideoVector, usize)],
    num_classes: usize,
) -> Result<LinearSvmModel> {
    train_linear_svm(examples, num_classes, &config.svm_params()).stage("train")
}

/// Predicts every test vector and tallies the results.
pub fn evaluate(model: &LinearSvmModel, test: &[(VideoVector, usize)]) -> Result<EvaluationReport> {
    let pairs = test
        .iter()
        .map(|(v, label)| Ok((*label, model.predict(v.values())?.0)))
        .collect::<Result<Vec<_>>>()
        .stage("evaluate")?;
    EvaluationReport::from_predictions(model.num_classes(), &pairs).stage("evaluate")
}

/// One split-fit-encode-train-evaluate pass on already loaded videos.
/// `videos` is indexed like `manifest.entries()`.
fn run_once(
    config: &PipelineConfig,
    manifest: &DatasetManifest,
    videos: &[FeatureSequence],
    split_seed: u64,
) -> Result<EvaluationReport> {
    let (train, test) =
        split_train_test(manifest, config.train_fraction, split_seed).stage("split")?;
    let index: HashMap<&str, usize> = manifest
        .entries()
        .iter()
        .enumerate()
        .map(|(i, e)| (e.video_id.as_str(), i))
        .collect();
    let pick = |m: &DatasetManifest| -> Vec<&FeatureSequence> {
        m.entries()
            .iter()
            .map(|e| &videos[index[e.video_id.as_str()]])
            .collect()
    };
    let (train_seqs, test_seqs) = (pick(&train), pick(&test));
    let bundle = fit_models_on(config, &train_seqs)?;
    let labelled =
        |m: &DatasetManifest, seqs: &[&FeatureSequence]| -> Result<Vec<(VideoVector, usize)>> {
            Ok(encode_videos(config, &bundle, seqs)?
                .into_iter()
                .zip(m.labels())
                .collect())
        };
    let train_vectors = labelled(&train, &train_seqs)?;
    let test_vectors = labelled(&test, &test_seqs)?;
    let model = train_classifier(config, &train_vectors, manifest.num_classes())?;
    evaluate(&model, &test_vectors)
}

/// Runs `repetitions` independent experiments; run `r` (from 1) splits the
/// data with seed `config.seed + r`.
pub fn run_repeated_experiment(
    config: &PipelineConfig,
    manifest: &DatasetManifest,
    repetitions: usize,
) -> Result<ExperimentSummary> {
    config.validate()?;
    if repetitions == 0 {
        return Err(Error::Config("repetitions must be at least 1".into()));
    }
    let videos = load_sequences(manifest)?;
    let reports = (1..=repetitions)
        .map(|r| {
            run_once(
                config,
                manifest,
                &videos,
                config.seed.wrapping_add(r as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    ExperimentSummary::new(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::l2_norm;

    fn toy_config() -> PipelineConfig {
        PipelineConfig {
            spectrum_length: 16,
            ..PipelineConfig::default()
        }
    }

    fn sequences(n: usize, dims: usize, seed: u64) -> Vec<FeatureSequence> {
        let spec = SyntheticSpec {
            videos_per_class: n,
            dims,
            min_frames: 16,
            max_frames: 30,
            frequencies: vec![0.05, 0.3],
            noise: 0.2,
            seed,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..2 * n)
            .map(|i| synthesize_video(&spec, i % 2, &format!("v{i}"), &mut rng).unwrap())
            .collect()
    }

    #[test]
    fn constant_video_average_branches() {
        let config = PipelineConfig {
            spectrum_length: 8,
            ..PipelineConfig::default()
        };
        let frame = [3.0, 4.0];
        let seq = FeatureSequence::new("c", 2, 8, frame.repeat(8)).unwrap();
        let bundle = fit_models_on(&config, &[&seq]).unwrap();
        let v = encode_video(&config, &bundle, &seq).unwrap();
        assert_eq!(v.len(), 4);
        // time branch: the normalized frame, already at norm 1
        assert!((v.values()[0] - 0.6).abs() < 1e-12 && (v.values()[1] - 0.8).abs() < 1e-12);
        // dft branch: only the DC column is non-zero, so its average is DC / L
        let dft = &v.values()[2..];
        assert!((dft[0] / dft[1] - 0.75).abs() < 1e-12);
        assert!((l2_norm(dft) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disabled_branch_gives_scaled_branch_vector() {
        let seqs = sequences(2, 3, 1);
        let refs: Vec<&FeatureSequence> = seqs.iter().collect();
        let config = PipelineConfig {
            use_dft_branch: false,
            fusion_time_norm: 0.6,
            ..toy_config()
        };
        let bundle = fit_models_on(&config, &refs).unwrap();
        let v = encode_video(&config, &bundle, &seqs[0]).unwrap();
        assert_eq!(v.branch(), Branch::Time);
        assert_eq!(v.method(), EncodingMethod::Average);
        let pooled = average_pool(&prepare(&seqs[0], None).unwrap().descriptors().clone()).unwrap();
        let expected = scale_to_norm(pooled.values(), 0.6).unwrap();
        assert_eq!(v.values(), expected.as_slice());
    }

    #[test]
    fn fit_is_deterministic_and_round_trips() {
        let seqs = sequences(4, 6, 2);
        let refs: Vec<&FeatureSequence> = seqs.iter().collect();
        let config = PipelineConfig {
            pca_dims: Some(4),
            time_encoder: EncodingMethod::Vlad,
            time_codebook_size: Some(3),
            dft_encoder: EncodingMethod::FisherVector,
            dft_codebook_size: Some(2),
            ..toy_config()
        };
        let a = fit_models_on(&config, &refs).unwrap();
        let b = fit_models_on(&config, &refs).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            a.file_names(),
            ["fit.cfg", "pca.tdfp", "time.tdfc", "dft.tdfg"]
        );
        let dir = tempfile::tempdir().unwrap();
        a.write_dir(dir.path()).unwrap();
        let back = ModelBundle::read_dir(dir.path()).unwrap();
        assert_eq!(back, a);
        let v = encode_video(&config, &back, &seqs[0]).unwrap();
        assert_eq!(v.len(), 4 * 3 + 2 * 4 * 2);
        assert_eq!(v, encode_video(&config, &a, &seqs[0]).unwrap());
    }

    #[test]
    fn bundle_mismatch_names_the_stage() {
        let seqs = sequences(3, 6, 3);
        let refs: Vec<&FeatureSequence> = seqs.iter().collect();
        let config = PipelineConfig {
            pca_dims: Some(4),
            ..toy_config()
        };
        let bundle = fit_models_on(&config, &refs).unwrap();
        let other = PipelineConfig {
            pca_dims: Some(3),
            ..config.clone()
        };
        let err = encode_video(&other, &bundle, &seqs[0]).unwrap_err();
        assert!(err.to_string().starts_with("encode:"), "{err}");
        assert!(err.to_string().contains("pca_dims"));
        let narrow = FeatureSequence::new("n", 5, 4, vec![1.0; 20]).unwrap();
        assert!(matches!(
            encode_video(&config, &bundle, &narrow).unwrap_err().root(),
            Error::DimensionMismatch { .. }
        ));
    }

    #[test]
    fn insufficient_descriptors_for_codebook() {
        let seq = FeatureSequence::new("s", 2, 3, vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let config = PipelineConfig {
            time_encoder: EncodingMethod::Vlad,
            time_codebook_size: Some(8),
            ..toy_config()
        };
        let err = fit_models_on(&config, &[&seq]).unwrap_err();
        assert!(err.to_string().starts_with("fit time branch:"), "{err}");
    }

    #[test]
    fn repeated_experiment_mean() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SyntheticSpec {
            videos_per_class: 6,
            dims: 3,
            min_frames: 20,
            max_frames: 40,
            frequencies: vec![0.05, 0.3],
            noise: 0.1,
            seed: 4,
        };
        let manifest = generate_synthetic_dataset(&spec, dir.path()).unwrap();
        let config = toy_config();
        let summary = run_repeated_experiment(&config, &manifest, 3).unwrap();
        assert_eq!(summary.reports.len(), 3);
        let mean = summary
            .reports
            .iter()
            .map(|r| r.overall_accuracy)
            .sum::<f64>()
            / 3.0;
        assert!((summary.mean_accuracy - mean).abs() < 1e-12);
        for r in &summary.reports {
            assert_eq!(r.test_count(), 4);
        }
        assert_eq!(
            summary,
            run_repeated_experiment(&config, &manifest, 3).unwrap()
        );
        assert!(run_repeated_experiment(&config, &manifest, 0).is_err());
    }
}
