//! Cubic-convolution resampling onto a fixed number of points.

use crate::error::{Error, Result};

/// Keys' cubic convolution parameter.
const KEYS_A: f64 = -0.5;

/// The Keys cubic convolution kernel with `a = -1/2`.
pub fn keys_kernel(x: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        ((KEYS_A + 2.0) * x - (KEYS_A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((KEYS_A * x - 5.0 * KEYS_A) * x + 8.0 * KEYS_A) * x - 4.0 * KEYS_A
    } else {
        0.0
    }
}

/// Resamples `points` onto `target_length` evenly spaced positions.
///
/// Input sample `j` sits at `j / (N - 1)` on `[0, 1]` and output `m` is read at
/// `m / (L - 1)`. Taps that fall outside the input are linearly extrapolated
/// from the two edge samples. Inputs shorter than four samples use linear
/// interpolation (two or three samples) or replication (one sample).
pub fn cubic_resample(points: &[f64], target_length: usize) -> Result<Vec<f64>> {
    if target_length < 1 {
        return Err(Error::invalid("target length must be at least 1"));
    }
    let n = points.len();
    if n == 0 {
        return Err(Error::invalid("cannot resample an empty signal"));
    }
    if n == 1 {
        return Ok(vec![points[0]; target_length]);
    }
    let sample = |j: isize| -> f64 {
        let last = n as isize - 1;
        if j < 0 {
            points[0] + j as f64 * (points[1] - points[0])
        } else if j > last {
            points[n - 1] + (j - last) as f64 * (points[n - 1] - points[n - 2])
        } else {
            points[j as usize]
        }
    };
    let out = (0..target_length)
        .map(|m| {
            let u = if target_length == 1 {
                0.0
            } else {
                (m as u128 * (n as u128 - 1)) as f64 / (target_length - 1) as f64
            };
            let base = (u.floor() as usize).min(n - 2);
            let t = u - base as f64;
            let base = base as isize;
            if n < 4 {
                (1.0 - t) * sample(base) + t * sample(base + 1)
            } else {
                (-1..=2)
                    .map(|off| sample(base + off) * keys_kernel(t - off as f64))
                    .sum()
            }
        })
        .collect();
    Ok(out)
}
