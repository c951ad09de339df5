use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::{Error, Result};

const MIN_SEGMENT: usize = 8;

/// Two-sided power spectral density, frequencies ascending from `-fs/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub frequencies_hz: Vec<f64>,
    /// Power per hertz, in the square of the sample unit (W/Hz for sqrt(W) samples).
    pub density: Vec<f64>,
    pub segments: usize,
}

impl Spectrum {
    pub fn bin_width(&self) -> f64 {
        match self.frequencies_hz.as_slice() {
            [a, b, ..] => b - a,
            _ => 0.0,
        }
    }

    /// Integral of the density; equals the mean power of the input.
    pub fn total_power(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.bin_width()
    }

    pub fn peak_density(&self) -> f64 {
        self.density.iter().copied().fold(0.0, f64::max)
    }

    /// `(frequency, dB relative to the peak bin)` pairs.
    pub fn relative_db(&self) -> Vec<(f64, f64)> {
        let peak = self.peak_density();
        self.frequencies_hz
            .iter()
            .zip(&self.density)
            .map(|(&f, &p)| (f, 10.0 * (p.max(f64::MIN_POSITIVE) / peak).log10()))
            .collect()
    }
}

/// Averaged periodogram with a Hann taper and 50% overlap.
///
/// The segment length is the largest power of two that still gives
/// `n_segments` half-overlapping segments; every full segment that fits is
/// averaged, so at least `n_segments` contribute.
pub fn estimate_spectrum(samples: &[Complex64], sample_rate: f64, n_segments: usize) -> Result<Spectrum> {
    let n = samples.len();
    let target = 2 * n / (n_segments.max(1) + 1);
    let len = if target >= MIN_SEGMENT { 1usize << target.ilog2() } else { 0 };
    if len < MIN_SEGMENT || n < 2 * len {
        return Err(Error::TooShort { len: n, needed: 2 * MIN_SEGMENT.max(len) });
    }
    let window: Vec<f64> = (0..len)
        .map(|k| 0.5 - 0.5 * (2.0 * core::f64::consts::PI * k as f64 / len as f64).cos())
        .collect();
    let window_energy: f64 = window.iter().map(|w| w * w).sum();
    let hop = len / 2;
    let segments = (n - len) / hop + 1;

    let twiddles = Twiddles::new(len);
    let mut acc = vec![0.0; len];
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for s in 0..segments {
        let start = s * hop;
        for ((b, &x), &w) in buf.iter_mut().zip(&samples[start..start + len]).zip(&window) {
            *b = x * w;
        }
        twiddles.fft(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
    }
    let scale = 1.0 / (segments as f64 * sample_rate * window_energy);
    let half = len / 2;
    let frequencies_hz = (0..len).map(|i| (i as f64 - half as f64) * sample_rate / len as f64).collect();
    let density = (0..len).map(|i| acc[(i + half) % len] * scale).collect();
    Ok(Spectrum { frequencies_hz, density, segments })
}

/// In-place iterative radix-2 FFT for one power-of-two length.
struct Twiddles {
    len: usize,
    factors: Vec<Complex64>,
}

impl Twiddles {
    fn new(len: usize) -> Self {
        debug_assert!(len.is_power_of_two());
        let factors = (0..len / 2)
            .map(|k| Complex64::from_polar(1.0, -2.0 * core::f64::consts::PI * k as f64 / len as f64))
            .collect();
        Twiddles { len, factors }
    }

    fn fft(&self, data: &mut [Complex64]) {
        let n = self.len;
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if j > i {
                data.swap(i, j);
            }
        }
        let mut size = 2;
        while size <= n {
            let stride = n / size;
            for chunk in data.chunks_exact_mut(size) {
                let (lo, hi) = chunk.split_at_mut(size / 2);
                for (k, (a, b)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                    let t = *b * self.factors[k * stride];
                    *b = *a - t;
                    *a += t;
                }
            }
            size *= 2;
        }
    }
}
