//! Per-dimension magnitude spectra of frame-feature signals, resampled to a
//! fixed number of frequency points.
//!
//! Each descriptor dimension `k` of a video is a real signal over its `N`
//! frames. Its full `N`-point DFT magnitude (including the mirrored upper
//! half) is resampled to `L` points on a normalized frequency axis `[0, 1]`,
//! where 1 is the sampling rate. Videos of any length therefore produce
//! spectra on the same grid.

mod fft;
mod resample;

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensorio::{DescriptorSet, FeatureSequence};

pub use fft::FftPlan;
pub use resample::{cubic_resample, keys_kernel};

fn check_signal(signal: &[f64]) -> Result<()> {
    if signal.is_empty() {
        return Err(Error::invalid("signal must have at least one sample"));
    }
    if signal.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("signal contains non-finite values"));
    }
    Ok(())
}

/// `|DFT(signal)|` computed with an FFT; output length equals input length.
pub fn dft_magnitude(signal: &[f64]) -> Result<Vec<f64>> {
    check_signal(signal)?;
    Ok(FftPlan::new(signal.len()).magnitude(signal))
}

/// Direct `O(N^2)` evaluation of the DFT magnitude, kept as a reference.
pub fn naive_dft_reference(signal: &[f64]) -> Result<Vec<f64>> {
    check_signal(signal)?;
    let n = signal.len();
    let out = (0..n)
        .map(|s| {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, &x) in signal.iter().enumerate() {
                let r = ((j as u128 * s as u128) % n as u128) as f64;
                let (sin, cos) = (-2.0 * PI * r / n as f64).sin_cos();
                re += x * cos;
                im += x * sin;
            }
            re.hypot(im)
        })
        .collect();
    Ok(out)
}

/// The `D x L` matrix of resampled DFT magnitudes of one video.
///
/// Column `s` (a "DFT feature") collects every dimension's magnitude at
/// normalized frequency `frequency_axis[s]`; columns are stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    columns: DescriptorSet,
    frequency_axis: Vec<f64>,
}

impl Spectrum {
    pub fn new(columns: DescriptorSet, frequency_axis: Vec<f64>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::invalid(
                "spectrum needs at least one frequency point",
            ));
        }
        Error::check_dims(columns.len(), frequency_axis.len())?;
        if columns.as_slice().iter().any(|&v| v < 0.0) {
            return Err(Error::invalid("spectrum magnitudes must be non-negative"));
        }
        if frequency_axis[0] != 0.0
            || frequency_axis.windows(2).any(|w| w[1] <= w[0])
            || frequency_axis.iter().any(|&f| !(0.0..=1.0).contains(&f))
        {
            return Err(Error::invalid(
                "frequency axis must start at 0 and increase strictly within [0, 1]",
            ));
        }
        Ok(Spectrum {
            columns,
            frequency_axis,
        })
    }

    pub fn dims(&self) -> usize {
        self.columns.dims()
    }

    pub fn length(&self) -> usize {
        self.columns.len()
    }

    /// The DFT feature at frequency index `s`.
    pub fn column(&self, s: usize) -> &[f64] {
        self.columns.row(s)
    }

    /// Magnitudes of dimension `k` across all frequency points.
    pub fn row(&self, k: usize) -> Vec<f64> {
        self.columns.rows().map(|c| c[k]).collect()
    }

    /// The DFT features as a descriptor set, one descriptor per frequency point.
    pub fn columns(&self) -> &DescriptorSet {
        &self.columns
    }

    pub fn frequency_axis(&self) -> &[f64] {
        &self.frequency_axis
    }

    pub fn into_columns(self) -> DescriptorSet {
        self.columns
    }
}

/// `L` evenly spaced points on `[0, 1]`; a single point sits at 0.
pub fn normalized_axis(length: usize) -> Vec<f64> {
    if length == 1 {
        return vec![0.0];
    }
    (0..length)
        .map(|s| s as f64 / (length - 1) as f64)
        .collect()
}

/// Resampled magnitude spectrum of every dimension of `seq`.
///
/// Interpolation undershoot below zero is clamped so the result stays a
/// valid magnitude matrix.
pub fn spectrum_of_sequence(seq: &FeatureSequence, target_length: usize) -> Result<Spectrum> {
    if target_length < 1 {
        return Err(Error::invalid("spectrum length must be at least 1"));
    }
    let dims = seq.dims();
    let plan = FftPlan::new(seq.frames());
    let rows: Vec<Vec<f64>> = (0..dims)
        .into_par_iter()
        .map(|k| {
            let mags = plan.magnitude(&seq.dimension_signal(k));
            let mut row = cubic_resample(&mags, target_length)?;
            for v in &mut row {
                *v = v.max(0.0);
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut data = vec![0.0; dims * target_length];
    for (k, row) in rows.iter().enumerate() {
        for (s, &v) in row.iter().enumerate() {
            data[s * dims + k] = v;
        }
    }
    Spectrum::new(
        DescriptorSet::new(dims, data)?,
        normalized_axis(target_length),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn constant_has_only_dc() {
        let m = dft_magnitude(&[2.0; 4]).unwrap();
        assert!(close(&m, &[8.0, 0.0, 0.0, 0.0], 1e-12));
        assert!(close(
            &naive_dft_reference(&[2.0; 4]).unwrap(),
            &[8.0, 0.0, 0.0, 0.0],
            1e-12
        ));
    }

    #[test]
    fn impulse_is_flat() {
        let m = dft_magnitude(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(close(&m, &[1.0; 4], 1e-12));
    }

    #[test]
    fn single_sample() {
        assert_eq!(naive_dft_reference(&[0.0]).unwrap(), vec![0.0]);
        assert_eq!(dft_magnitude(&[-3.0]).unwrap(), vec![3.0]);
    }

    #[test]
    fn length_seven_matches_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fast = dft_magnitude(&x).unwrap();
        let slow = naive_dft_reference(&x).unwrap();
        assert!(close(&fast, &slow, 1e-10));
    }

    #[test]
    fn non_finite_rejected() {
        assert!(dft_magnitude(&[1.0, f64::NAN]).is_err());
        assert!(naive_dft_reference(&[f64::INFINITY]).is_err());
        assert!(dft_magnitude(&[]).is_err());
    }

    #[test]
    fn constant_sequence_spectrum() {
        let c = 0.7;
        let seq = FeatureSequence::new("c", 1, 3, vec![c; 3]).unwrap();
        let spec = spectrum_of_sequence(&seq, 3).unwrap();
        let row = spec.row(0);
        assert!((row[0] - 3.0 * c).abs() < 1e-12);
        assert!(row[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn axis_independent_of_video_length() {
        let a = FeatureSequence::new("a", 2, 64, vec![0.1; 128]).unwrap();
        let b = FeatureSequence::new("b", 2, 128, vec![0.2; 256]).unwrap();
        let sa = spectrum_of_sequence(&a, 50).unwrap();
        let sb = spectrum_of_sequence(&b, 50).unwrap();
        assert_eq!(sa.frequency_axis(), sb.frequency_axis());
        assert_eq!(sa.frequency_axis().len(), 50);
        assert_eq!(sa.frequency_axis()[0], 0.0);
        assert_eq!(sa.frequency_axis()[49], 1.0);
    }

    #[test]
    fn sinusoid_peak_location() {
        let n = 64;
        let signal: Vec<f64> = (0..n)
            .map(|j| (2.0 * PI * 8.0 * j as f64 / n as f64).sin())
            .collect();
        let mags = dft_magnitude(&signal).unwrap();
        let peak_bin = mags[..n / 2]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(peak_bin, 8);

        let seq = FeatureSequence::new("s", 1, n, signal).unwrap();
        let spec = spectrum_of_sequence(&seq, 500).unwrap();
        let row = spec.row(0);
        let axis = spec.frequency_axis();
        let argmax = |range: std::ops::Range<usize>| {
            range.max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap()
        };
        let low = argmax(0..250);
        let high = argmax(250..500);
        // bins sit at s / (N - 1) on the normalized axis, so the peak lands within one bin of 8/64
        assert!((axis[low] - 0.125).abs() < 1.0 / 63.0, "{}", axis[low]);
        assert!((axis[high] - 0.875).abs() < 1.0 / 63.0, "{}", axis[high]);
    }

    #[test]
    fn spectrum_values_non_negative() {
        // sharp spectrum that makes cubic interpolation undershoot
        let mut values = vec![0.0; 40];
        values[0] = 1.0;
        let seq =
            FeatureSequence::new("u", 1, 40, values.iter().map(|v| v * 10.0).collect()).unwrap();
        let spec = spectrum_of_sequence(&seq, 97).unwrap();
        assert!(spec.columns().as_slice().iter().all(|&v| v >= 0.0));
    }

    proptest! {
        #[test]
        fn fft_agrees_with_reference(signal in proptest::collection::vec(-10.0f64..10.0, 1..300)) {
            let fast = dft_magnitude(&signal).unwrap();
            let slow = naive_dft_reference(&signal).unwrap();
            prop_assert!(close(&fast, &slow, 1e-9));
        }

        #[test]
        fn magnitude_bounded_by_l1(signal in proptest::collection::vec(-10.0f64..10.0, 1..200)) {
            let l1: f64 = signal.iter().map(|v| v.abs()).sum();
            let max = dft_magnitude(&signal).unwrap().into_iter().fold(0.0, f64::max);
            prop_assert!(max <= l1 * (1.0 + 1e-12) + 1e-12);
        }

        #[test]
        fn magnitude_shift_invariant(
            signal in proptest::collection::vec(-10.0f64..10.0, 1..200),
            shift in 0usize..200,
        ) {
            let mut rotated = signal.clone();
            let k = shift % signal.len();
            rotated.rotate_left(k);
            let a = dft_magnitude(&signal).unwrap();
            let b = dft_magnitude(&rotated).unwrap();
            prop_assert!(close(&a, &b, 1e-9));
        }

        #[test]
        fn resample_constant_and_identity(
            v in -5.0f64..5.0,
            n in 1usize..40,
            l in 1usize..80,
            signal in proptest::collection::vec(-10.0f64..10.0, 1..60),
        ) {
            let out = cubic_resample(&vec![v; n], l).unwrap();
            prop_assert!(out.iter().all(|x| (x - v).abs() <= 1e-12));
            let same = cubic_resample(&signal, signal.len()).unwrap();
            prop_assert!(close(&same, &signal, 1e-12));
        }
    }
}
