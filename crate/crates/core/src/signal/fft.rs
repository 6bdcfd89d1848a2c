//! Complex FFT for arbitrary lengths.
//!
//! Power-of-two sizes run an iterative radix-2 decimation-in-time transform.
//! Every other size goes through Bluestein's chirp-z algorithm, which turns
//! the length-`n` DFT into a circular convolution evaluated with a radix-2
//! transform of size `m >= 2n - 1`.

use std::f64::consts::PI;

use num_complex::Complex64;

/// A precomputed forward transform for one length.
#[derive(Debug, Clone)]
pub struct FftPlan {
    len: usize,
    kind: PlanKind,
}

#[derive(Debug, Clone)]
enum PlanKind {
    Radix2(Radix2),
    Bluestein(Bluestein),
}

impl FftPlan {
    pub fn new(len: usize) -> Self {
        assert!(len >= 1, "FFT length must be at least 1");
        let kind = if len.is_power_of_two() {
            PlanKind::Radix2(Radix2::new(len))
        } else {
            PlanKind::Bluestein(Bluestein::new(len))
        };
        FftPlan { len, kind }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// In-place forward transform, `X[s] = sum_n x[n] exp(-2 pi i n s / len)`.
    pub fn forward(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.len, "buffer length does not match plan");
        match &self.kind {
            PlanKind::Radix2(p) => p.forward(buf),
            PlanKind::Bluestein(p) => p.forward(buf),
        }
    }

    /// Magnitude spectrum of a real signal.
    pub fn magnitude(&self, signal: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex64> = signal.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf.iter().map(|c| c.norm()).collect()
    }
}

#[derive(Debug, Clone)]
struct Radix2 {
    len: usize,
    /// `exp(-2 pi i k / len)` for `k < len / 2`.
    twiddles: Vec<Complex64>,
}

impl Radix2 {
    fn new(len: usize) -> Self {
        debug_assert!(len.is_power_of_two());
        let twiddles = (0..len / 2)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / len as f64))
            .collect();
        Radix2 { len, twiddles }
    }

    fn forward(&self, buf: &mut [Complex64]) {
        let n = self.len;
        if n < 2 {
            return;
        }
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if j > i {
                buf.swap(i, j);
            }
        }
        let mut size = 2;
        while size <= n {
            let half = size / 2;
            let stride = n / size;
            for start in (0..n).step_by(size) {
                for k in 0..half {
                    let w = self.twiddles[k * stride];
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            size *= 2;
        }
    }

    fn inverse(&self, buf: &mut [Complex64]) {
        for c in buf.iter_mut() {
            *c = c.conj();
        }
        self.forward(buf);
        let scale = 1.0 / self.len as f64;
        for c in buf.iter_mut() {
            *c = c.conj() * scale;
        }
    }
}

#[derive(Debug, Clone)]
struct Bluestein {
    len: usize,
    inner: Radix2,
    /// `exp(-i pi n^2 / len)`.
    chirp: Vec<Complex64>,
    /// Forward transform of the conjugate chirp, wrapped to the inner length.
    kernel: Vec<Complex64>,
}

impl Bluestein {
    fn new(len: usize) -> Self {
        let m = (2 * len - 1).next_power_of_two();
        let inner = Radix2::new(m);
        let two_n = 2 * len as u128;
        let chirp: Vec<Complex64> = (0..len)
            .map(|k| {
                // k^2 mod 2n keeps the phase argument small and exact
                let r = (k as u128 * k as u128) % two_n;
                Complex64::from_polar(1.0, -PI * r as f64 / len as f64)
            })
            .collect();
        let mut kernel = vec![Complex64::new(0.0, 0.0); m];
        kernel[0] = chirp[0].conj();
        for k in 1..len {
            kernel[k] = chirp[k].conj();
            kernel[m - k] = chirp[k].conj();
        }
        inner.forward(&mut kernel);
        Bluestein {
            len,
            inner,
            chirp,
            kernel,
        }
    }

    fn forward(&self, buf: &mut [Complex64]) {
        let m = self.inner.len;
        let mut work = vec![Complex64::new(0.0, 0.0); m];
        for ((w, &x), &c) in work.iter_mut().zip(buf.iter()).zip(&self.chirp) {
            *w = x * c;
        }
        self.inner.forward(&mut work);
        for (w, &k) in work.iter_mut().zip(&self.kernel) {
            *w *= k;
        }
        self.inner.inverse(&mut work);
        for ((out, &w), &c) in buf.iter_mut().zip(&work).zip(&self.chirp) {
            *out = w * c;
        }
        debug_assert_eq!(buf.len(), self.len);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|s| {
                x.iter()
                    .enumerate()
                    .map(|(j, &v)| {
                        let r = (j * s) % n;
                        v * Complex64::from_polar(1.0, -2.0 * PI * r as f64 / n as f64)
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn complex_transform_matches_naive() {
        for n in [1usize, 2, 3, 5, 8, 12, 17, 64, 100, 127] {
            let x: Vec<Complex64> = (0..n)
                .map(|j| Complex64::new((j as f64 * 0.37).sin(), (j as f64 * 1.1).cos()))
                .collect();
            let mut got = x.clone();
            FftPlan::new(n).forward(&mut got);
            for (a, b) in got.iter().zip(naive(&x)) {
                assert!((a - b).norm() < 1e-10, "n={n}");
            }
        }
    }

    #[test]
    fn radix2_round_trip() {
        let p = Radix2::new(16);
        let x: Vec<Complex64> = (0..16)
            .map(|j| Complex64::new(j as f64, -(j as f64)))
            .collect();
        let mut y = x.clone();
        p.forward(&mut y);
        p.inverse(&mut y);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
