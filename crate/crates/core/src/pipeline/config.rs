//! Flat `key=value` experiment configuration.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::encode::{EncodingMethod, LlcParams, Normalization};
use crate::error::{Error, Result};
use crate::svm::SvmParams;

/// Every hyperparameter of a two-branch experiment.
///
/// Codebook sizes are set exactly for the branches whose encoder needs a
/// codebook or mixture, and `llc` exactly when some branch uses LLC.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Output dimension of PCA; `None` skips PCA.
    pub pca_dims: Option<usize>,
    /// Maximum number of frames PCA is fitted on.
    pub pca_sample_cap: usize,
    /// Frequency points `L` per spectrum.
    pub spectrum_length: usize,
    pub time_encoder: EncodingMethod,
    pub dft_encoder: EncodingMethod,
    pub time_codebook_size: Option<usize>,
    pub dft_codebook_size: Option<usize>,
    pub llc: Option<LlcParams>,
    pub fusion_time_norm: f64,
    pub fusion_dft_norm: f64,
    pub use_time_branch: bool,
    pub use_dft_branch: bool,
    /// Signed square root and l2 normalization of Fisher and VLAD vectors.
    pub power_normalize: bool,
    pub svm_c: f64,
    pub svm_max_epochs: usize,
    pub svm_tol: f64,
    pub kmeans_max_iters: usize,
    pub gmm_max_iters: usize,
    pub gmm_tol: f64,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            pca_dims: None,
            pca_sample_cap: 100_000,
            spectrum_length: 500,
            time_encoder: EncodingMethod::Average,
            dft_encoder: EncodingMethod::Average,
            time_codebook_size: None,
            dft_codebook_size: None,
            llc: None,
            fusion_time_norm: 1.0,
            fusion_dft_norm: 1.0,
            use_time_branch: true,
            use_dft_branch: true,
            power_normalize: true,
            svm_c: 1.0,
            svm_max_epochs: 1000,
            svm_tol: 1e-3,
            kmeans_max_iters: 100,
            gmm_max_iters: 100,
            gmm_tol: 1e-6,
            train_fraction: 2.0 / 3.0,
            seed: 0,
        }
    }
}

const KEYS: &[&str] = &[
    "pca_dims",
    "pca_sample_cap",
    "spectrum_length",
    "time_encoder",
    "dft_encoder",
    "time_codebook_size",
    "dft_codebook_size",
    "llc_neighbors",
    "llc_lambda",
    "fusion_time_norm",
    "fusion_dft_norm",
    "use_time_branch",
    "use_dft_branch",
    "power_normalize",
    "svm_c",
    "svm_max_epochs",
    "svm_tol",
    "kmeans_max_iters",
    "gmm_max_iters",
    "gmm_tol",
    "train_fraction",
    "seed",
];

fn needs_codebook(method: EncodingMethod) -> bool {
    method != EncodingMethod::Average
}

impl PipelineConfig {
    fn profile(
        time_encoder: EncodingMethod,
        dft_encoder: EncodingMethod,
        mixture_size: usize,
    ) -> Result<Self> {
        let size = |m: EncodingMethod| match m {
            EncodingMethod::Average => None,
            EncodingMethod::Llc => Some(1024),
            _ => Some(mixture_size),
        };
        let config = PipelineConfig {
            time_encoder,
            dft_encoder,
            time_codebook_size: size(time_encoder),
            dft_codebook_size: size(dft_encoder),
            llc: (time_encoder == EncodingMethod::Llc || dft_encoder == EncodingMethod::Llc)
                .then(LlcParams::default),
            ..PipelineConfig::default()
        };
        config.validate()?;
        Ok(config)
    }

    /// Emotion-recognition settings: `L = 500`, fusion norms 0.6 / 0.4,
    /// `C = 100`, PCA to 1024, LLC 1024 words, FV and VLAD 16 components.
    pub fn emotion(time_encoder: EncodingMethod, dft_encoder: EncodingMethod) -> Result<Self> {
        let mut c = Self::profile(time_encoder, dft_encoder, 16)?;
        c.spectrum_length = 500;
        c.fusion_time_norm = 0.6;
        c.fusion_dft_norm = 0.4;
        c.svm_c = 100.0;
        c.pca_dims = Some(1024);
        Ok(c)
    }

    /// Action-recognition settings: `L = 200`, equal fusion norms, `C = 1`,
    /// LLC 1024 words, FV and VLAD 32 components.
    pub fn action(time_encoder: EncodingMethod, dft_encoder: EncodingMethod) -> Result<Self> {
        let mut c = Self::profile(time_encoder, dft_encoder, 32)?;
        c.spectrum_length = 200;
        c.svm_c = 1.0;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.pca_dims == Some(0) {
            return fail("pca_dims must be positive".into());
        }
        if self.pca_sample_cap < 2 {
            return fail("pca_sample_cap must be at least 2".into());
        }
        if self.spectrum_length == 0 {
            return fail("spectrum_length must be positive".into());
        }
        for (name, method, size) in [
            ("time", self.time_encoder, self.time_codebook_size),
            ("dft", self.dft_encoder, self.dft_codebook_size),
        ] {
            if method == EncodingMethod::Fused {
                return fail(format!("{name}_encoder must be average, llc, fv or vlad"));
            }
            match (needs_codebook(method), size) {
                (true, None) => {
                    return fail(format!("{name}_codebook_size is required for {method}"))
                }
                (false, Some(_)) => {
                    return fail(format!(
                        "{name}_codebook_size is set but {name}_encoder is {method}"
                    ))
                }
                (true, Some(0)) => return fail(format!("{name}_codebook_size must be positive")),
                _ => {}
            }
            if method == EncodingMethod::Llc {
                match &self.llc {
                    None => return fail("llc parameters missing".into()),
                    Some(p) => p
                        .validate(size.unwrap_or(0))
                        .map_err(|e| Error::Config(format!("{name} branch: {e}")))?,
                }
            }
        }
        let uses_llc =
            self.time_encoder == EncodingMethod::Llc || self.dft_encoder == EncodingMethod::Llc;
        if self.llc.is_some() && !uses_llc {
            return fail("llc_neighbors / llc_lambda are set but no branch uses llc".into());
        }
        for (name, v) in [
            ("fusion_time_norm", self.fusion_time_norm),
            ("fusion_dft_norm", self.fusion_dft_norm),
            ("svm_c", self.svm_c),
            ("svm_tol", self.svm_tol),
            ("gmm_tol", self.gmm_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("{name} must be positive and finite"));
            }
        }
        if !self.use_time_branch && !self.use_dft_branch {
            return fail("at least one of use_time_branch and use_dft_branch must be true".into());
        }
        for (name, v) in [
            ("svm_max_epochs", self.svm_max_epochs),
            ("kmeans_max_iters", self.kmeans_max_iters),
            ("gmm_max_iters", self.gmm_max_iters),
        ] {
            if v == 0 {
                return fail(format!("{name} must be positive"));
            }
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return fail("train_fraction must lie strictly between 0 and 1".into());
        }
        Ok(())
    }

    pub fn normalization(&self) -> Normalization {
        if self.power_normalize {
            Normalization::SignedSqrtL2
        } else {
            Normalization::None
        }
    }

    pub fn svm_params(&self) -> SvmParams {
        SvmParams {
            penalty: self.svm_c,
            max_epochs: self.svm_max_epochs,
            tol: self.svm_tol,
            seed: self.seed,
        }
    }

    /// Parses configuration text. Blank lines and lines starting with `#`
    /// are ignored; unknown or repeated keys are errors.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut config = PipelineConfig::default();
        let mut seen = BTreeSet::new();
        let (mut llc_neighbors, mut llc_lambda) = (None, None);
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let at =
                |msg: String| Error::Config(format!("{}:{}: {msg}", origin.display(), idx + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at(format!("expected key=value, found {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(at(format!("unknown key {key:?}")));
            }
            if !seen.insert(key.to_string()) {
                return Err(at(format!("key {key:?} given twice")));
            }
            let bad = |e: String| at(format!("{key}: {e}"));
            match key {
                "pca_dims" => config.pca_dims = Some(parse_value(value).map_err(bad)?),
                "pca_sample_cap" => config.pca_sample_cap = parse_value(value).map_err(bad)?,
                "spectrum_length" => config.spectrum_length = parse_value(value).map_err(bad)?,
                "time_encoder" => config.time_encoder = parse_value(value).map_err(bad)?,
                "dft_encoder" => config.dft_encoder = parse_value(value).map_err(bad)?,
                "time_codebook_size" => {
                    config.time_codebook_size = Some(parse_value(value).map_err(bad)?)
                }
                "dft_codebook_size" => {
                    config.dft_codebook_size = Some(parse_value(value).map_err(bad)?)
                }
                "llc_neighbors" => llc_neighbors = Some(parse_value(value).map_err(bad)?),
                "llc_lambda" => llc_lambda = Some(parse_value(value).map_err(bad)?),
                "fusion_time_norm" => config.fusion_time_norm = parse_value(value).map_err(bad)?,
                "fusion_dft_norm" => config.fusion_dft_norm = parse_value(value).map_err(bad)?,
                "use_time_branch" => config.use_time_branch = parse_value(value).map_err(bad)?,
                "use_dft_branch" => config.use_dft_branch = parse_value(value).map_err(bad)?,
                "power_normalize" => config.power_normalize = parse_value(value).map_err(bad)?,
                "svm_c" => config.svm_c = parse_value(value).map_err(bad)?,
                "svm_max_epochs" => config.svm_max_epochs = parse_value(value).map_err(bad)?,
                "svm_tol" => config.svm_tol = parse_value(value).map_err(bad)?,
                "kmeans_max_iters" => config.kmeans_max_iters = parse_value(value).map_err(bad)?,
                "gmm_max_iters" => config.gmm_max_iters = parse_value(value).map_err(bad)?,
                "gmm_tol" => config.gmm_tol = parse_value(value).map_err(bad)?,
                "train_fraction" => config.train_fraction = parse_value(value).map_err(bad)?,
                "seed" => config.seed = parse_value(value).map_err(bad)?,
                _ => unreachable!("key list and match arms out of sync"),
            }
        }
        let uses_llc =
            config.time_encoder == EncodingMethod::Llc || config.dft_encoder == EncodingMethod::Llc;
        if uses_llc || llc_neighbors.is_some() || llc_lambda.is_some() {
            let defaults = LlcParams::default();
            config.llc = Some(LlcParams {
                neighbors: llc_neighbors.unwrap_or(defaults.neighbors),
                lambda: llc_lambda.unwrap_or(defaults.lambda),
            });
        }
        config.validate().map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", origin.display())),
            other => other,
        })?;
        Ok(config)
    }

    /// Reads a configuration file; a missing or unreadable file is a
    /// configuration error naming the path.
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    /// Canonical text form; parsing it yields an equal configuration.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        if let Some(d) = self.pca_dims {
            put("pca_dims", d.to_string());
        }
        put("pca_sample_cap", self.pca_sample_cap.to_string());
        put("spectrum_length", self.spectrum_length.to_string());
        put("time_encoder", self.time_encoder.to_string());
        put("dft_encoder", self.dft_encoder.to_string());
        if let Some(k) = self.time_codebook_size {
            put("time_codebook_size", k.to_string());
        }
        if let Some(k) = self.dft_codebook_size {
            put("dft_codebook_size", k.to_string());
        }
        if let Some(p) = &self.llc {
            put("llc_neighbors", p.neighbors.to_string());
            put("llc_lambda", p.lambda.to_string());
        }
        put("fusion_time_norm", self.fusion_time_norm.to_string());
        put("fusion_dft_norm", self.fusion_dft_norm.to_string());
        put("use_time_branch", self.use_time_branch.to_string());
        put("use_dft_branch", self.use_dft_branch.to_string());
        put("power_normalize", self.power_normalize.to_string());
        put("svm_c", self.svm_c.to_string());
        put("svm_max_epochs", self.svm_max_epochs.to_string());
        put("svm_tol", self.svm_tol.to_string());
        put("kmeans_max_iters", self.kmeans_max_iters.to_string());
        put("gmm_max_iters", self.gmm_max_iters.to_string());
        put("gmm_tol", self.gmm_tol.to_string());
        put("train_fraction", self.train_fraction.to_string());
        put("seed", self.seed.to_string());
        out
    }
}

fn parse_value<T: FromStr>(value: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e: T::Err| format!("invalid value {value:?} ({e})"))
}
