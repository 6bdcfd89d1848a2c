//! Synthetic labelled videos whose classes differ only in temporal frequency.
//!
//! In every video dimension 0 is `1 + 0.5 sin(2 pi f_c n + phi)` plus noise,
//! with `f_c` fixed per class and the phase `phi` drawn per video. All other
//! dimensions are noise. Per-frame first moments are the same for every
//! class, so only the temporal structure separates them.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use tracing::warn;

use crate::error::{Error, Result};
use crate::tensorio::{
    read_manifest, write_feature_sequence, DatasetManifest, FeatureSequence, ManifestEntry,
};

/// Smallest and largest allowed frame counts.
pub const FRAME_RANGE: (usize, usize) = (16, 4096);

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub videos_per_class: usize,
    pub dims: usize,
    /// Inclusive frame-count range; counts are drawn uniformly.
    pub min_frames: usize,
    pub max_frames: usize,
    /// One frequency per class, in cycles per frame.
    pub frequencies: Vec<f64>,
    /// Standard deviation of the additive Gaussian noise.
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn num_classes(&self) -> usize {
        self.frequencies.len()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.frequencies.len() < 2 {
            return fail("at least two class frequencies are required".into());
        }
        if let Some(f) = self.frequencies.iter().find(|f| !(**f > 0.0 && **f < 0.5)) {
            return fail(format!(
                "frequency {f} is outside (0, 0.5) cycles per frame"
            ));
        }
        if self.videos_per_class == 0 || self.dims == 0 {
            return fail("videos_per_class and dims must be positive".into());
        }
        if self.min_frames > self.max_frames
            || self.min_frames < FRAME_RANGE.0
            || self.max_frames > FRAME_RANGE.1
        {
            return fail(format!(
                "frame range {}..={} must lie within {}..={}",
                self.min_frames, self.max_frames, FRAME_RANGE.0, FRAME_RANGE.1
            ));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return fail("noise must be a non-negative number".into());
        }
        Ok(())
    }

    /// Parses `key=value` lines with keys `videos_per_class`, `dims`,
    /// `min_frames`, `max_frames`, `frequencies` (comma-separated), `noise`
    /// and `seed`. All keys are required.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut fields: [(&str, Option<String>); 7] = [
            ("videos_per_class", None),
            ("dims", None),
            ("min_frames", None),
            ("max_frames", None),
            ("frequencies", None),
            ("noise", None),
            ("seed", None),
        ];
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
            let slot = fields
                .iter_mut()
                .find(|(k, _)| *k == key.trim())
                .ok_or_else(|| at(format!("unknown key {:?}", key.trim())))?;
            if slot.1.replace(value.trim().to_string()).is_some() {
                return Err(at(format!("key {:?} given twice", key.trim())));
            }
        }
        let get = |i: usize| -> Result<&str> {
            fields[i].1.as_deref().ok_or_else(|| {
                Error::Config(format!(
                    "{}: missing key {:?}",
                    origin.display(),
                    fields[i].0
                ))
            })
        };
        let num = |i: usize| -> Result<usize> {
            get(i)?.parse().map_err(|_| {
                Error::Config(format!(
                    "{}: {} must be a non-negative integer",
                    origin.display(),
                    fields[i].0
                ))
            })
        };
        let real = |s: &str, name: &str| -> Result<f64> {
            s.trim().parse().map_err(|_| {
                Error::Config(format!(
                    "{}: {name}: invalid number {s:?}",
                    origin.display()
                ))
            })
        };
        let spec = SyntheticSpec {
            videos_per_class: num(0)?,
            dims: num(1)?,
            min_frames: num(2)?,
            max_frames: num(3)?,
            frequencies: get(4)?
                .split(',')
                .map(|s| real(s, "frequencies"))
                .collect::<Result<_>>()?,
            noise: real(get(5)?, "noise")?,
            seed: get(6)?.parse().map_err(|_| {
                Error::Config(format!(
                    "{}: seed must be a non-negative integer",
                    origin.display()
                ))
            })?,
        };
        spec.validate().map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", origin.display())),
            other => other,
        })?;
        Ok(spec)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    pub fn to_text(&self) -> String {
        let freqs: Vec<String> = self.frequencies.iter().map(f64::to_string).collect();
        let mut out = String::new();
        let _ = write!(
            out,
            "videos_per_class={}\ndims={}\nmin_frames={}\nmax_frames={}\nfrequencies={}\nnoise={}\nseed={}\n",
            self.videos_per_class,
            self.dims,
            self.min_frames,
            self.max_frames,
            freqs.join(","),
            self.noise,
            self.seed
        );
        out
    }
}

/// Draws one video of class `class`.
pub fn synthesize_video(
    spec: &SyntheticSpec,
    class: usize,
    video_id: &str,
    rng: &mut ChaCha8Rng,
) -> Result<FeatureSequence> {
    let frames = rng.random_range(spec.min_frames..=spec.max_frames);
    let phase = rng.random_range(0.0..2.0 * PI);
    let noise = Normal::new(0.0, spec.noise).map_err(|e| Error::Config(e.to_string()))?;
    let freq = spec.frequencies[class];
    let mut values = Vec::with_capacity(frames * spec.dims);
    for n in 0..frames {
        values.push(1.0 + 0.5 * (2.0 * PI * freq * n as f64 + phase).sin() + noise.sample(rng));
        for _ in 1..spec.dims {
            values.push(noise.sample(rng));
        }
    }
    FeatureSequence::new(video_id, spec.dims, frames, values)
}

/// Writes `videos/<id>.tdfe` files and `manifest.tsv` under `out_dir` and
/// returns the manifest as read back from disk. Manifest paths are relative
/// to `out_dir`, so output is identical wherever it is generated.
pub fn generate_synthetic_dataset(spec: &SyntheticSpec, out_dir: &Path) -> Result<DatasetManifest> {
    spec.validate()?;
    let mut distinct = spec.frequencies.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < spec.frequencies.len() {
        warn!("classes share a frequency; the spectrum carries no signal between them");
    }
    let videos = out_dir.join("videos");
    fs::create_dir_all(&videos).map_err(|e| Error::Io {
        path: videos.clone(),
        source: e,
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut entries = Vec::new();
    for class in 0..spec.num_classes() {
        for v in 0..spec.videos_per_class {
            let id = format!("c{class}_{v:04}");
            let seq = synthesize_video(spec, class, &id, &mut rng)?;
            let rel = PathBuf::from("videos").join(format!("{id}.tdfe"));
            write_feature_sequence(&seq, &out_dir.join(&rel))?;
            entries.push(ManifestEntry {
                video_id: id,
                feature_path: rel,
                label: class,
            });
        }
    }
    let manifest = DatasetManifest::with_num_classes(entries, spec.num_classes())?;
    let path = out_dir.join("manifest.tsv");
    fs::write(&path, manifest.to_text()).map_err(|e| Error::Io {
        path: path.clone(),
        source: e,
    })?;
    read_manifest(&path)
}
