//! Frame-feature data model, dataset manifests and the `TDFE` feature file format.
//!
//! A video is a sequence of `N` frame descriptors of dimension `D`. In memory
//! the descriptors are held frame-by-frame (column-major with respect to the
//! `D x N` feature matrix), which is also the on-disk payload order, so a
//! frame is always a contiguous slice.
//!
//! `TDFE` v1 layout (all little-endian):
//!
//! | offset | size      | field                          |
//! |--------|-----------|--------------------------------|
//! | 0      | 4         | magic `TDFE`                   |
//! | 4      | 4         | version, `u32` = 1             |
//! | 8      | 4         | `D`, `u32`                     |
//! | 12     | 4         | `N`, `u32`                     |
//! | 16     | `4*D*N`   | `f32` values, frame by frame   |

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::binio::{self, ByteReader, ByteWriter};
use crate::error::{Error, Result};

const FEATURE_MAGIC: &[u8; 4] = b"TDFE";

/// A dense set of equal-length descriptors stored row after row.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    dims: usize,
    data: Vec<f64>,
}

impl DescriptorSet {
    /// Builds a set from a flat buffer holding `data.len() / dims` descriptors.
    pub fn new(dims: usize, data: Vec<f64>) -> Result<Self> {
        if dims == 0 {
            return Err(Error::invalid("descriptor dimension must be at least 1"));
        }
        if !data.len().is_multiple_of(dims) {
            return Err(Error::invalid(format!(
                "buffer of {} values is not a whole number of {dims}-dimensional descriptors",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("descriptors contain non-finite values"));
        }
        Ok(DescriptorSet { dims, data })
    }

    pub fn empty(dims: usize) -> Result<Self> {
        Self::new(dims, Vec::new())
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dims = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or_else(|| Error::invalid("cannot infer dimension of an empty descriptor list"))?;
        let mut data = Vec::with_capacity(dims * rows.len());
        for r in rows {
            Error::check_dims(dims, r.as_ref().len())?;
            data.extend_from_slice(r.as_ref());
        }
        Self::new(dims, data)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Number of descriptors.
    pub fn len(&self) -> usize {
        self.data.len() / self.dims
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dims..(i + 1) * self.dims]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dims)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn push(&mut self, row: &[f64]) -> Result<()> {
        Error::check_dims(self.dims, row.len())?;
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("descriptors contain non-finite values"));
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    pub fn extend(&mut self, other: &DescriptorSet) -> Result<()> {
        Error::check_dims(self.dims, other.dims)?;
        self.data.extend_from_slice(&other.data);
        Ok(())
    }

    /// Applies `f` to every descriptor, producing a set of dimension `out_dims`.
    pub fn map_rows<F>(&self, out_dims: usize, mut f: F) -> Result<DescriptorSet>
    where
        F: FnMut(&[f64]) -> Result<Vec<f64>>,
    {
        let mut data = Vec::with_capacity(out_dims * self.len());
        for row in self.rows() {
            let mapped = f(row)?;
            Error::check_dims(out_dims, mapped.len())?;
            data.extend_from_slice(&mapped);
        }
        DescriptorSet::new(out_dims, data)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

/// The `D x N` frame-descriptor matrix of one video.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    video_id: String,
    frames: DescriptorSet,
}

impl FeatureSequence {
    /// `values` holds `dims * frames` numbers, frame after frame.
    pub fn new(
        video_id: impl Into<String>,
        dims: usize,
        frames: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        if frames == 0 {
            return Err(Error::invalid(
                "a feature sequence needs at least one frame",
            ));
        }
        let expected = dims
            .checked_mul(frames)
            .ok_or_else(|| Error::invalid("feature matrix too large"))?;
        if values.len() != expected {
            return Err(Error::invalid(format!(
                "expected {dims}x{frames} = {expected} values, got {}",
                values.len()
            )));
        }
        Ok(FeatureSequence {
            video_id: video_id.into(),
            frames: DescriptorSet::new(dims, values)?,
        })
    }

    pub fn from_descriptors(video_id: impl Into<String>, frames: DescriptorSet) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::invalid(
                "a feature sequence needs at least one frame",
            ));
        }
        Ok(FeatureSequence {
            video_id: video_id.into(),
            frames,
        })
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn with_video_id(mut self, video_id: impl Into<String>) -> Self {
        self.video_id = video_id.into();
        self
    }

    pub fn dims(&self) -> usize {
        self.frames.dims()
    }

    pub fn frames(&self) -> usize {
        self.frames.len()
    }

    /// Descriptor of frame `i` (0-based).
    pub fn frame(&self, i: usize) -> &[f64] {
        self.frames.row(i)
    }

    pub fn descriptors(&self) -> &DescriptorSet {
        &self.frames
    }

    /// The time signal of dimension `k` across all frames.
    pub fn dimension_signal(&self, k: usize) -> Vec<f64> {
        self.frames.rows().map(|f| f[k]).collect()
    }

    /// Value at dimension `k`, frame `i`.
    pub fn value(&self, k: usize, i: usize) -> f64 {
        self.frames.row(i)[k]
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = ByteWriter::with_header(FEATURE_MAGIC);
        w.u32(binio::dim_to_u32(self.dims(), "dimension")?);
        w.u32(binio::dim_to_u32(self.frames(), "frame count")?);
        for &v in self.frames.as_slice() {
            let narrow = v as f32;
            if !narrow.is_finite() {
                return Err(Error::invalid(format!(
                    "value {v} is not representable as a 32-bit float"
                )));
            }
            w.f32(narrow);
        }
        Ok(w.into_bytes())
    }

    /// Decodes a `TDFE` buffer; `origin` names the source in errors.
    pub fn from_bytes(bytes: &[u8], video_id: impl Into<String>, origin: &Path) -> Result<Self> {
        let mut r = ByteReader::open(bytes, FEATURE_MAGIC, origin)?;
        let dims = r.u32()? as usize;
        let frames = r.u32()? as usize;
        if dims == 0 || frames == 0 {
            return Err(r.corrupt(format!("empty matrix {dims}x{frames}")));
        }
        let count = dims
            .checked_mul(frames)
            .ok_or_else(|| r.corrupt("matrix size overflows"))?;
        r.require(count.saturating_mul(4))?;
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            let v = r.f32()?;
            if !v.is_finite() {
                return Err(r.non_finite());
            }
            values.push(f64::from(v));
        }
        r.finish()?;
        FeatureSequence::new(video_id, dims, frames, values)
    }
}

/// Writes `seq` as a `TDFE` v1 file.
pub fn write_feature_sequence(seq: &FeatureSequence, path: &Path) -> Result<()> {
    binio::write_file(path, &seq.to_bytes()?)
}

/// Reads a `TDFE` v1 file. The video id defaults to the file stem.
pub fn read_feature_sequence(path: &Path) -> Result<FeatureSequence> {
    let bytes = binio::read_file(path)?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    FeatureSequence::from_bytes(&bytes, id, path)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub video_id: String,
    pub feature_path: PathBuf,
    pub label: usize,
}

impl ManifestEntry {
    /// Loads the entry's feature file, tagging it with the manifest's video id.
    pub fn load(&self) -> Result<FeatureSequence> {
        Ok(read_feature_sequence(&self.feature_path)?.with_video_id(self.video_id.clone()))
    }
}

/// Labelled list of videos. Ids are unique and every class in
/// `0..num_classes` has at least one entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    entries: Vec<ManifestEntry>,
    num_classes: usize,
}

impl DatasetManifest {
    /// Builds a manifest with `num_classes = max label + 1`.
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self> {
        let num_classes = entries
            .iter()
            .map(|e| e.label + 1)
            .max()
            .ok_or_else(|| Error::invalid("manifest has no entries"))?;
        Self::with_num_classes(entries, num_classes)
    }

    pub fn with_num_classes(entries: Vec<ManifestEntry>, num_classes: usize) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut present = vec![false; num_classes];
        for e in &entries {
            if !seen.insert(e.video_id.as_str()) {
                return Err(Error::invalid(format!(
                    "duplicate video id {:?}",
                    e.video_id
                )));
            }
            if e.label >= num_classes {
                return Err(Error::invalid(format!(
                    "label {} of {:?} is not below num_classes {num_classes}",
                    e.label, e.video_id
                )));
            }
            present[e.label] = true;
        }
        if let Some(missing) = present.iter().position(|p| !p) {
            return Err(Error::invalid(format!("class {missing} has no entries")));
        }
        Ok(DatasetManifest {
            entries,
            num_classes,
        })
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn labels(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.label).collect()
    }

    /// Renders the TAB-separated text form with paths exactly as stored.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{}\t{}\t{}",
                e.video_id,
                e.feature_path.display(),
                e.label
            );
        }
        out
    }
}

/// Parses manifest text. Relative feature paths are joined onto `base_dir`.
pub fn parse_manifest(text: &str, base_dir: &Path, origin: &Path) -> Result<DatasetManifest> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut entries = Vec::new();
    let mut ids: BTreeMap<String, usize> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(parse_err(
                line_no,
                format!("expected 3 TAB-separated fields, found {}", fields.len()),
            ));
        }
        let (id, file, label) = (fields[0], fields[1], fields[2].trim());
        if id.is_empty() || file.is_empty() {
            return Err(parse_err(line_no, "empty video id or feature path".into()));
        }
        if label.starts_with('-') {
            return Err(parse_err(line_no, format!("negative label {label}")));
        }
        let label: usize = label
            .parse()
            .map_err(|_| parse_err(line_no, format!("malformed label {label:?}")))?;
        if let Some(first) = ids.insert(id.to_string(), line_no) {
            return Err(parse_err(
                line_no,
                format!("duplicate video id {id:?} (first seen at line {first})"),
            ));
        }
        entries.push(ManifestEntry {
            video_id: id.to_string(),
            feature_path: base_dir.join(file),
            label,
        });
    }
    DatasetManifest::new(entries).map_err(|e| parse_err(0, e.to_string()))
}

/// Reads a manifest file of `video_id<TAB>feature_path<TAB>label` lines.
pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    parse_manifest(&text, base, path)
}

pub fn write_manifest(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    binio::write_file(path, manifest.to_text().as_bytes())
}

/// Stratified random split. Each class sends `ceil(fraction * size)` entries
/// to train (capped so at least one stays in test). Entry order within each
/// half follows the input manifest.
pub fn split_train_test(
    manifest: &DatasetManifest,
    train_fraction: f64,
    seed: u64,
) -> Result<(DatasetManifest, DatasetManifest)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction {train_fraction} must lie strictly between 0 and 1"
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); manifest.num_classes];
    for (i, e) in manifest.entries.iter().enumerate() {
        by_class[e.label].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; manifest.len()];
    for (class, members) in by_class.iter_mut().enumerate() {
        if members.len() < 2 {
            return Err(Error::invalid(format!(
                "class {class} has {} entries; a split needs at least 2",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        let n = members.len();
        // 1e-9 absorbs representation error, e.g. (2.0 / 3.0) * 3.0.
        let wanted = (train_fraction * n as f64 - 1e-9).ceil() as usize;
        let n_train = wanted.clamp(1, n - 1);
        for &i in &members[..n_train] {
            in_train[i] = true;
        }
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (e, &t) in manifest.entries.iter().zip(&in_train) {
        if t {
            train.push(e.clone());
        } else {
            test.push(e.clone());
        }
    }
    Ok((
        DatasetManifest::with_num_classes(train, manifest.num_classes)?,
        DatasetManifest::with_num_classes(test, manifest.num_classes)?,
    ))
}
