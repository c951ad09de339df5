//! Free-space propagation, thermal noise floor and AWGN.

use alloc::vec::Vec;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::rfchain::complex_gaussian;
use crate::units::{noise_density_dbm_hz, wavelength, GainDb, PowerDbm, Watts, REFERENCE_TEMPERATURE_K, THERMAL_NOISE_DENSITY_DBM_HZ};
use crate::{Error, Result};

/// Line-of-sight path between two antennas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    pub frequency_hz: f64,
    pub distance_m: f64,
    pub tx_antenna_gain: GainDb,
    pub rx_antenna_gain: GainDb,
    pub noise_temperature_k: f64,
}

impl ChannelSpec {
    /// Isotropic antennas at the reference noise temperature.
    pub fn isotropic(frequency_hz: f64, distance_m: f64) -> Result<Self> {
        let spec = ChannelSpec {
            frequency_hz,
            distance_m,
            tx_antenna_gain: GainDb(0.0),
            rx_antenna_gain: GainDb(0.0),
            noise_temperature_k: REFERENCE_TEMPERATURE_K,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.frequency_hz) {
            return Err(Error::domain("frequency", self.frequency_hz));
        }
        if !positive(self.distance_m) {
            return Err(Error::domain("distance", self.distance_m));
        }
        if !positive(self.noise_temperature_k) {
            return Err(Error::domain("noise temperature", self.noise_temperature_k));
        }
        if !self.tx_antenna_gain.0.is_finite() || !self.rx_antenna_gain.0.is_finite() {
            return Err(Error::domain("antenna gain", f64::NAN));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        wavelength(self.frequency_hz).expect("validated frequency")
    }

    pub fn with_distance(mut self, distance_m: f64) -> Self {
        self.distance_m = distance_m;
        self
    }

    /// End-to-end gain including both antennas, `Gt + Gr + 20 log(lambda / 4 pi d)`.
    pub fn path_gain(&self) -> GainDb {
        let lambda = self.wavelength();
        if self.distance_m < 10.0 * lambda {
            log::warn!(
                "distance {} m is within 10 wavelengths; far-field Friis may not hold",
                self.distance_m
            );
        }
        let spreading = 20.0 * (lambda / (4.0 * core::f64::consts::PI * self.distance_m)).log10();
        self.tx_antenna_gain + self.rx_antenna_gain + GainDb(spreading)
    }

    /// Thermal noise density at the antenna, dBm/Hz.
    pub fn noise_density_dbm_hz(&self) -> f64 {
        noise_density_dbm_hz(self.noise_temperature_k)
    }
}

pub fn friis_received_power(p_tx: PowerDbm, spec: &ChannelSpec) -> PowerDbm {
    p_tx + spec.path_gain()
}

/// `-174 dBm/Hz + 10 log B + NF`.
pub fn noise_floor(bandwidth_hz: f64, nf_db: f64) -> PowerDbm {
    PowerDbm(THERMAL_NOISE_DENSITY_DBM_HZ + 10.0 * bandwidth_hz.log10() + nf_db)
}

/// Deterministic random stream `stream` of the run seeded by `seed`.
/// Distinct stream ids never overlap, so blocks can be generated in any
/// order or on any number of workers.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Adds complex AWGN of variance `signal_power / 10^(snr_db/10)` in place.
/// An infinite SNR leaves the samples untouched.
pub fn add_awgn_in_place<R: rand::Rng + ?Sized>(samples: &mut [Complex64], signal_power: Watts, snr_db: f64, rng: &mut R) {
    if snr_db == f64::INFINITY {
        return;
    }
    let variance = signal_power.0 / 10f64.powf(snr_db / 10.0);
    for x in samples.iter_mut() {
        *x += complex_gaussian(rng, variance);
    }
}

pub fn add_awgn(samples: &[Complex64], signal_power: Watts, snr_db: f64, seed: u64) -> Result<Vec<Complex64>> {
    if !(signal_power.0 > 0.0) {
        return Err(Error::domain("signal power", signal_power.0));
    }
    let mut out = samples.to_vec();
    add_awgn_in_place(&mut out, signal_power, snr_db, &mut rng_stream(seed, 0));
    Ok(out)
}
