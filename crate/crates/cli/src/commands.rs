use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use tdf_core::pipeline::{
    encode_videos, evaluate as evaluate_report, fit_models_on, generate_synthetic_dataset,
    load_sequences, run_repeated_experiment, train_classifier, ExperimentSummary, ModelBundle,
    PipelineConfig, SyntheticSpec,
};
use tdf_core::tensorio::{
    read_manifest, split_train_test, write_manifest, DatasetManifest, FeatureSequence,
    ManifestEntry,
};
use tdf_core::{Error, LinearSvmModel, VideoVector};

const VECTORS_FILE: &str = "vectors.tsv";

/// A failed command: exit code 1 for usage and configuration problems,
/// 2 for invalid or mismatched data, 3 for I/O failures.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Io(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Io(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e.root() {
            Error::Config(_) => Failure::Usage(msg),
            Error::Io { .. } => Failure::Io(msg),
            _ => Failure::Data(msg),
        }
    }
}

type CmdResult = Result<(), Failure>;

/// Reading an upstream artifact: anything that goes wrong, a missing file
/// included, is a data error attributed to `stage`.
fn artifact<T>(stage: &'static str, r: tdf_core::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| match e.root() {
        Error::Config(_) => Failure::from(e),
        _ => Failure::Data(e.in_stage(stage).to_string()),
    })
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn create_dir(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))
}

/// Reads a manifest through its absolute path so that manifests derived
/// from it stay valid wherever they are written.
fn read_manifest_abs(path: &Path) -> tdf_core::Result<DatasetManifest> {
    let abs = fs::canonicalize(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    read_manifest(&abs)
}

fn print(text: &str) -> CmdResult {
    std::io::stdout()
        .lock()
        .write_all(text.as_bytes())
        .map_err(|e| Failure::Io(format!("stdout: {e}")))
}

pub fn synth(spec_path: &Path, out: &Path) -> CmdResult {
    let spec = SyntheticSpec::read(spec_path)?;
    generate_synthetic_dataset(&spec, out)?;
    print(&format!("{}\n", out.join("manifest.tsv").display()))
}

pub fn fit(config_path: &Path, manifest_path: &Path, out: &Path, split: Option<u64>) -> CmdResult {
    let config = PipelineConfig::read(config_path)?;
    let manifest = artifact("fit", read_manifest_abs(manifest_path))?;
    create_dir(out)?;
    let train = match split {
        Some(r) => {
            let (train, test) = split_train_test(
                &manifest,
                config.train_fraction,
                config.seed.wrapping_add(r),
            )?;
            write_manifest(&train, &out.join("train.tsv"))?;
            write_manifest(&test, &out.join("test.tsv"))?;
            train
        }
        None => manifest,
    };
    let videos = artifact("fit", load_sequences(&train))?;
    let refs: Vec<&FeatureSequence> = videos.iter().collect();
    let bundle = fit_models_on(&config, &refs)?;
    bundle.write_dir(out)?;
    print(&format!("{}\n", out.display()))
}

pub fn encode(
    config_path: &Path,
    bundle_dir: &Path,
    manifest_path: &Path,
    out: &Path,
) -> CmdResult {
    let config = PipelineConfig::read(config_path)?;
    let bundle = artifact("encode", ModelBundle::read_dir(bundle_dir))?;
    let manifest = artifact("encode", read_manifest_abs(manifest_path))?;
    let videos = artifact("encode", load_sequences(&manifest))?;
    let refs: Vec<&FeatureSequence> = videos.iter().collect();
    let vectors = encode_videos(&config, &bundle, &refs)?;
    create_dir(out)?;
    let mut entries = Vec::with_capacity(vectors.len());
    for (entry, vector) in manifest.entries().iter().zip(&vectors) {
        let file = PathBuf::from(format!("{}.tdfv", entry.video_id));
        vector.write(&out.join(&file))?;
        entries.push(ManifestEntry {
            video_id: entry.video_id.clone(),
            feature_path: file,
            label: entry.label,
        });
    }
    let index = DatasetManifest::with_num_classes(entries, manifest.num_classes())?;
    let index_path = out.join(VECTORS_FILE);
    write_manifest(&index, &index_path)?;
    print(&format!("{}\n", index_path.display()))
}

/// Loads the vectors listed in a `vectors.tsv` index.
fn load_vectors(
    stage: &'static str,
    index_path: &Path,
) -> Result<(DatasetManifest, Vec<(VideoVector, usize)>), Failure> {
    let index = artifact(stage, read_manifest(index_path))?;
    let vectors = index
        .entries()
        .iter()
        .map(|e| Ok((VideoVector::read(&e.feature_path)?, e.label)))
        .collect::<tdf_core::Result<Vec<_>>>();
    Ok((index, artifact(stage, vectors)?))
}

pub fn train(config_path: &Path, vectors_path: &Path, out: &Path) -> CmdResult {
    let config = PipelineConfig::read(config_path)?;
    let (index, vectors) = load_vectors("train", vectors_path)?;
    let model = train_classifier(&config, &vectors, index.num_classes())?;
    model.write(out)?;
    print(&format!("{}\n", out.display()))
}

pub fn predict(model_path: &Path, vectors_path: &Path) -> CmdResult {
    let model = artifact("predict", LinearSvmModel::read(model_path))?;
    let (index, vectors) = load_vectors("predict", vectors_path)?;
    let mut out = String::new();
    for (entry, (vector, _)) in index.entries().iter().zip(&vectors) {
        let (class, scores) = artifact("predict", model.predict(vector.values()))?;
        let _ = write!(out, "{}\t{class}", entry.video_id);
        for s in scores {
            let _ = write!(out, "\t{s}");
        }
        out.push('\n');
    }
    print(&out)
}

pub fn evaluate(model_path: &Path, vectors_path: &Path, out: Option<&Path>) -> CmdResult {
    let model = artifact("evaluate", LinearSvmModel::read(model_path))?;
    let (_, vectors) = load_vectors("evaluate", vectors_path)?;
    let report = artifact("evaluate", evaluate_report(&model, &vectors))?;
    let table = ExperimentSummary::new(vec![report])?.to_table();
    if let Some(path) = out {
        fs::write(path, &table).map_err(|e| io_failure(path, e))?;
    }
    print(&table)
}

pub fn run(config_path: &Path, manifest_path: &Path, repeat: usize) -> CmdResult {
    if repeat == 0 {
        return Err(Failure::Usage("--repeat must be at least 1".into()));
    }
    let config = PipelineConfig::read(config_path)?;
    let manifest = read_manifest_abs(manifest_path)?;
    let summary = run_repeated_experiment(&config, &manifest, repeat)?;
    print(&summary.to_table())
}
