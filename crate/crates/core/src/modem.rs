//! Square M-QAM with per-axis reflected Gray labels.
//!
//! A label of `N = log2(M)` bits is split into an in-phase half (high bits)
//! and a quadrature half (low bits). Each half is the Gray code of the level
//! index along its axis, so horizontally or vertically adjacent points always
//! differ in exactly one bit. Bits travel as `u8` values `0`/`1`, most
//! significant bit of each label first.

use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;

use crate::units::{db_to_linear, GainDb};
use crate::{Error, Result};

/// Supported square-QAM orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QamOrder {
    Qam4,
    Qam16,
    Qam64,
    Qam256,
}

impl QamOrder {
    pub const ALL: [QamOrder; 4] = [QamOrder::Qam4, QamOrder::Qam16, QamOrder::Qam64, QamOrder::Qam256];

    pub fn new(order: usize) -> Result<Self> {
        match order {
            4 => Ok(QamOrder::Qam4),
            16 => Ok(QamOrder::Qam16),
            64 => Ok(QamOrder::Qam64),
            256 => Ok(QamOrder::Qam256),
            other => Err(Error::UnsupportedOrder(other)),
        }
    }

    pub fn points(self) -> usize {
        1 << self.bits_per_symbol()
    }

    pub fn bits_per_symbol(self) -> u32 {
        match self {
            QamOrder::Qam4 => 2,
            QamOrder::Qam16 => 4,
            QamOrder::Qam64 => 6,
            QamOrder::Qam256 => 8,
        }
    }

    /// Levels per axis, `sqrt(M)`.
    pub fn side(self) -> usize {
        1 << (self.bits_per_symbol() / 2)
    }
}

impl TryFrom<usize> for QamOrder {
    type Error = Error;
    fn try_from(order: usize) -> Result<Self> {
        QamOrder::new(order)
    }
}

impl fmt::Display for QamOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-QAM", self.points())
    }
}

/// Energy-per-bit to noise density ratio in dB.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct EbN0(pub f64);

impl EbN0 {
    pub fn linear(self) -> f64 {
        db_to_linear(GainDb(self.0))
    }
}

fn gray(k: usize) -> usize {
    k ^ (k >> 1)
}

fn gray_inverse(mut g: usize) -> usize {
    let mut k = g;
    while g > 1 {
        g >>= 1;
        k ^= g;
    }
    k
}

/// Gray-labelled square constellation scaled to unit mean energy.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstellationMap {
    order: QamOrder,
    points: Vec<Complex64>,
    scale: f64,
}

impl ConstellationMap {
    pub fn new(order: QamOrder) -> Self {
        let side = order.side();
        let half = order.bits_per_symbol() / 2;
        let m = order.points() as f64;
        // Mean energy of the odd-integer grid is 2(M-1)/3.
        let scale = 1.0 / (2.0 * (m - 1.0) / 3.0).sqrt();
        let points = (0..order.points())
            .map(|label| {
                let ki = gray_inverse(label >> half);
                let kq = gray_inverse(label & (side - 1));
                Complex64::new(level(ki, side) * scale, level(kq, side) * scale)
            })
            .collect();
        ConstellationMap { order, points, scale }
    }

    pub fn order(&self) -> QamOrder {
        self.order
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.order.bits_per_symbol()
    }

    /// Points indexed by label.
    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, label: usize) -> Complex64 {
        self.points[label]
    }

    /// Distance between adjacent points.
    pub fn min_distance(&self) -> f64 {
        2.0 * self.scale
    }

    /// Label of the nearest point; ties go to the smaller label.
    pub fn nearest_label(&self, z: Complex64) -> usize {
        let side = self.order.side();
        let half = self.order.bits_per_symbol() / 2;
        let gi = slice_axis(z.re / self.scale, side);
        let gq = slice_axis(z.im / self.scale, side);
        (gi << half) | gq
    }
}

/// Odd-integer coordinate of level `k` on an axis with `side` levels.
fn level(k: usize, side: usize) -> f64 {
    (2 * k) as f64 - (side - 1) as f64
}

/// Gray code of the level nearest to `u` (in grid units), smaller code on ties.
fn slice_axis(u: f64, side: usize) -> usize {
    let pos = (u + (side - 1) as f64) / 2.0;
    let lo = if pos.is_nan() { 0 } else { (pos.floor().max(0.0) as usize).min(side - 2) };
    let hi = lo + 1;
    let d_lo = (u - level(lo, side)).abs();
    let d_hi = (u - level(hi, side)).abs();
    let tie = (d_lo - d_hi).abs() <= 4.0 * f64::EPSILON * (d_lo + d_hi);
    if tie {
        gray(lo).min(gray(hi))
    } else if d_lo < d_hi {
        gray(lo)
    } else {
        gray(hi)
    }
}

pub fn build_constellation(order: usize) -> Result<ConstellationMap> {
    Ok(ConstellationMap::new(QamOrder::new(order)?))
}

/// Maps bits to symbols, `N` bits per symbol, MSB first.
pub fn map_bits(bits: &[u8], map: &ConstellationMap) -> Result<Vec<Complex64>> {
    let n = map.bits_per_symbol() as usize;
    if bits.len() % n != 0 {
        return Err(Error::RaggedBits { len: bits.len(), bits_per_symbol: n as u32 });
    }
    Ok(bits
        .chunks_exact(n)
        .map(|chunk| map.point(chunk.iter().fold(0usize, |acc, &b| (acc << 1) | usize::from(b & 1))))
        .collect())
}

/// Nearest-point hard decisions, expanded back to bits.
pub fn demap_hard(symbols: &[Complex64], map: &ConstellationMap) -> Vec<u8> {
    let n = map.bits_per_symbol();
    let mut bits = Vec::with_capacity(symbols.len() * n as usize);
    for &z in symbols {
        let label = map.nearest_label(z);
        bits.extend((0..n).rev().map(|i| ((label >> i) & 1) as u8));
    }
    bits
}

/// Rate bookkeeping for a modulation: symbol rate and null-to-null bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthPlan {
    pub bit_rate: f64,
    pub symbol_rate: f64,
    pub null_to_null: f64,
}

pub fn bandwidth_plan(bit_rate: f64, order: QamOrder) -> Result<BandwidthPlan> {
    if !(bit_rate > 0.0) || !bit_rate.is_finite() {
        return Err(Error::domain("bit rate", bit_rate));
    }
    let symbol_rate = bit_rate / f64::from(order.bits_per_symbol());
    Ok(BandwidthPlan { bit_rate, symbol_rate, null_to_null: 2.0 * symbol_rate })
}

/// Gaussian tail probability `Q(x) = P(Z > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / core::f64::consts::SQRT_2)
}

/// Nearest-neighbour Gray approximation of the bit error rate of square
/// M-QAM on an AWGN channel:
/// `Pb = (4/N)(1 - 1/sqrt(M)) Q(sqrt(3N/(M-1) * Eb/N0))`.
pub fn theoretical_ber(order: QamOrder, ebn0: EbN0) -> f64 {
    let n = f64::from(order.bits_per_symbol());
    let m = order.points() as f64;
    let gamma = ebn0.linear();
    let arg = (3.0 * n / (m - 1.0) * gamma).sqrt();
    (4.0 / n) * (1.0 - 1.0 / m.sqrt()) * q_function(arg)
}

const EBN0_SEARCH_FLOOR_DB: f64 = -30.0;
const EBN0_SEARCH_CEIL_DB: f64 = 80.0;
const BISECTION_LIMIT: u32 = 200;

/// Eb/N0 at which [`theoretical_ber`] reaches `target_ber`, by bisection.
///
/// Targets above the formula's low-SNR ceiling clamp to the bottom of the
/// search range (-30 dB), so the result stays finite and non-increasing in
/// the target.
pub fn ebn0_for_ber(order: QamOrder, target_ber: f64) -> Result<EbN0> {
    if !(target_ber > 0.0 && target_ber < 0.5) {
        return Err(Error::domain("target BER", target_ber));
    }
    let ber = |db: f64| theoretical_ber(order, EbN0(db));
    let (mut lo, mut hi) = (EBN0_SEARCH_FLOOR_DB, EBN0_SEARCH_CEIL_DB);
    if ber(lo) <= target_ber {
        return Ok(EbN0(lo));
    }
    for _ in 0..BISECTION_LIMIT {
        let mid = 0.5 * (lo + hi);
        if ber(mid) > target_ber {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-9 {
            return Ok(EbN0(0.5 * (lo + hi)));
        }
    }
    Err(Error::NoConvergence(BISECTION_LIMIT))
}

/// Running sums from which the least-squares-normalised EVM follows.
///
/// With `a = argmin |a*m - r|^2`, the residual energy is
/// `sum|r|^2 - |sum conj(m) r|^2 / sum|m|^2`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvmAccumulator {
    pub count: u64,
    pub reference_energy: f64,
    pub measured_energy: f64,
    pub cross: Complex64,
}

impl EvmAccumulator {
    pub fn push(&mut self, reference: Complex64, measured: Complex64) {
        self.count += 1;
        self.reference_energy += reference.norm_sqr();
        self.measured_energy += measured.norm_sqr();
        self.cross += measured.conj() * reference;
    }

    pub fn extend(&mut self, reference: &[Complex64], measured: &[Complex64]) {
        for (&r, &m) in reference.iter().zip(measured) {
            self.push(r, m);
        }
    }

    pub fn merge(&mut self, other: &EvmAccumulator) {
        self.count += other.count;
        self.reference_energy += other.reference_energy;
        self.measured_energy += other.measured_energy;
        self.cross += other.cross;
    }

    /// RMS EVM in percent.
    pub fn percent(&self) -> Result<f64> {
        if self.reference_energy <= 0.0 {
            return Err(Error::ZeroReferencePower);
        }
        let residual = if self.measured_energy > 0.0 {
            self.reference_energy - self.cross.norm_sqr() / self.measured_energy
        } else {
            self.reference_energy
        };
        Ok(100.0 * (residual.max(0.0) / self.reference_energy).sqrt())
    }
}

/// RMS error vector magnitude in percent after removing the best-fit
/// complex gain from `measured`.
pub fn evm_rms(reference: &[Complex64], measured: &[Complex64]) -> Result<f64> {
    if reference.len() != measured.len() || reference.is_empty() {
        return Err(Error::LengthMismatch { reference: reference.len(), measured: measured.len() });
    }
    let mut acc = EvmAccumulator::default();
    acc.extend(reference, measured);
    acc.percent()
}

/// Least-squares complex gain `g` minimising `|measured - g*reference|^2`.
///
/// Unlike the EVM fit this estimate is unbiased under additive noise, which
/// is what the demapper needs.
pub fn gain_estimate(reference: &[Complex64], measured: &[Complex64]) -> Option<Complex64> {
    let mut num = Complex64::new(0.0, 0.0);
    let mut den = 0.0;
    for (&r, &m) in reference.iter().zip(measured) {
        num += r.conj() * m;
        den += r.norm_sqr();
    }
    (den > 0.0 && num.norm_sqr() > 0.0).then(|| num / den)
}
