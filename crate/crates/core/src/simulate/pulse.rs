use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

/// Transmit pulse applied to the symbol stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseShape {
    /// Sample-and-hold over one symbol.
    Rectangular,
    /// Sample-and-hold followed by a Gaussian low-pass whose 3 dB bandwidth
    /// is `bt` times the symbol rate.
    Gaussian { bt: f64 },
}

impl Default for PulseShape {
    fn default() -> Self {
        PulseShape::Gaussian { bt: 0.5 }
    }
}

/// Gaussian low-pass taps with unit DC gain, truncated at +/-4 sigma.
///
/// The tap grid is chosen so that the filter delay plus the hold delay
/// lands on a whole sample: half-sample offsets when `sps` is even, whole
/// offsets when odd. The taps are always symmetric.
pub fn gaussian_taps(bt: f64, sps: usize) -> Vec<f64> {
    // |H(f)| = exp(-f^2 ln2 / (2 B^2)) has its 3 dB point at f = B.
    let sigma = core::f64::consts::LN_2.sqrt() * sps as f64 / (2.0 * core::f64::consts::PI * bt);
    let reach = 4.0 * sigma;
    let offsets: Vec<f64> = if sps % 2 == 0 {
        let per_side = ((reach + 0.5).floor() as usize).max(1);
        (0..2 * per_side).map(|j| j as f64 - per_side as f64 + 0.5).collect()
    } else {
        let per_side = reach.floor() as usize;
        (0..=2 * per_side).map(|j| j as f64 - per_side as f64).collect()
    };
    let mut taps: Vec<f64> = offsets.iter().map(|&t| (-0.5 * (t / sigma).powi(2)).exp()).collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

/// Index of the symbol-centre sample within each symbol period.
pub fn symbol_offset(sps: usize) -> usize {
    sps / 2
}

/// Mean power of the shaped waveform for independent zero-mean symbols of
/// unit energy. One for rectangular pulses, below one once the filter
/// smooths transitions.
pub fn pulse_power(shape: PulseShape, sps: usize) -> f64 {
    match shape {
        PulseShape::Rectangular => 1.0,
        PulseShape::Gaussian { bt } => {
            let taps = gaussian_taps(bt, sps);
            // Single-symbol response: a run of `sps` ones through the taps.
            let energy: f64 = (0..sps + taps.len() - 1)
                .map(|k| {
                    let lo = k.saturating_sub(sps - 1);
                    let hi = k.min(taps.len() - 1);
                    taps[lo..=hi].iter().sum::<f64>().powi(2)
                })
                .sum();
            energy / sps as f64
        }
    }
}

/// Upsamples `symbols` by `sps` and applies the pulse. Output length is
/// `symbols.len() * sps` with the filter delay removed, so symbol `m` peaks
/// at sample `m * sps + symbol_offset(sps)`.
pub fn pulse_shape(symbols: &[Complex64], shape: PulseShape, sps: usize) -> Vec<Complex64> {
    let held: Vec<Complex64> = symbols.iter().flat_map(|&s| core::iter::repeat(s).take(sps)).collect();
    match shape {
        PulseShape::Rectangular => held,
        PulseShape::Gaussian { bt } => {
            let taps = gaussian_taps(bt, sps);
            let delay = (taps.len() - 1) / 2;
            let n = held.len();
            let mut out = vec![Complex64::new(0.0, 0.0); n];
            for (i, y) in out.iter_mut().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, &h) in taps.iter().enumerate() {
                    let k = i + delay;
                    if k >= j && k - j < n {
                        acc += held[k - j] * h;
                    }
                }
                *y = acc;
            }
            out
        }
    }
}
