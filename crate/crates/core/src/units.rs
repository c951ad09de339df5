//! Log/linear conversions for power and gain, and carrier wavelength.
//!
//! Power levels are [`PowerDbm`] or [`Watts`], gains and losses are
//! [`GainDb`]. Adding a gain to a power level gives a power level, and the
//! difference of two power levels is a gain, so budget arithmetic reads the
//! same way it is written on paper while mixing up dB and linear values
//! stays a type error.

use core::fmt;
use core::iter::Sum;
use core::ops::{Add, AddAssign, Neg, Sub};

use crate::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Thermal noise density at the 290 K reference temperature, dBm/Hz.
pub const THERMAL_NOISE_DENSITY_DBM_HZ: f64 = -174.0;

/// Reference noise temperature, kelvin.
pub const REFERENCE_TEMPERATURE_K: f64 = 290.0;

/// Absolute power level in dBm.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct PowerDbm(pub f64);

/// Gain in dB; negative values are losses.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct GainDb(pub f64);

/// Absolute power in watts.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Watts(pub f64);

impl PowerDbm {
    pub fn watts(self) -> Watts {
        dbm_to_watts(self)
    }
}

impl Watts {
    pub fn dbm(self) -> PowerDbm {
        watts_to_dbm(self)
    }
}

impl GainDb {
    pub fn linear(self) -> f64 {
        db_to_linear(self)
    }

    /// Voltage (amplitude) gain, the square root of the power ratio.
    pub fn amplitude(self) -> f64 {
        10f64.powf(self.0 / 20.0)
    }
}

impl Add<GainDb> for PowerDbm {
    type Output = PowerDbm;
    fn add(self, rhs: GainDb) -> PowerDbm {
        PowerDbm(self.0 + rhs.0)
    }
}

impl Sub<GainDb> for PowerDbm {
    type Output = PowerDbm;
    fn sub(self, rhs: GainDb) -> PowerDbm {
        PowerDbm(self.0 - rhs.0)
    }
}

impl Sub for PowerDbm {
    type Output = GainDb;
    fn sub(self, rhs: PowerDbm) -> GainDb {
        GainDb(self.0 - rhs.0)
    }
}

impl Add for GainDb {
    type Output = GainDb;
    fn add(self, rhs: GainDb) -> GainDb {
        GainDb(self.0 + rhs.0)
    }
}

impl AddAssign for GainDb {
    fn add_assign(&mut self, rhs: GainDb) {
        self.0 += rhs.0;
    }
}

impl Sub for GainDb {
    type Output = GainDb;
    fn sub(self, rhs: GainDb) -> GainDb {
        GainDb(self.0 - rhs.0)
    }
}

impl Neg for GainDb {
    type Output = GainDb;
    fn neg(self) -> GainDb {
        GainDb(-self.0)
    }
}

impl Sum for GainDb {
    fn sum<I: Iterator<Item = GainDb>>(iter: I) -> GainDb {
        iter.fold(GainDb(0.0), Add::add)
    }
}

impl fmt::Display for PowerDbm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} dBm", self.0)
    }
}

impl fmt::Display for GainDb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} dB", self.0)
    }
}

/// `10^(x/10)`.
pub fn db_to_linear(x: GainDb) -> f64 {
    10f64.powf(x.0 / 10.0)
}

pub fn linear_to_db(ratio: f64) -> GainDb {
    GainDb(10.0 * ratio.log10())
}

pub fn dbm_to_watts(p: PowerDbm) -> Watts {
    Watts(10f64.powf((p.0 - 30.0) / 10.0))
}

pub fn watts_to_dbm(p: Watts) -> PowerDbm {
    PowerDbm(10.0 * p.0.log10() + 30.0)
}

/// Free-space wavelength in metres for a carrier at `freq_hz`.
pub fn wavelength(freq_hz: f64) -> Result<f64> {
    if !(freq_hz > 0.0) || !freq_hz.is_finite() {
        return Err(Error::domain("frequency", freq_hz));
    }
    Ok(SPEED_OF_LIGHT / freq_hz)
}

/// Thermal noise density in dBm/Hz at `temperature_k`, anchored so that
/// 290 K gives exactly [`THERMAL_NOISE_DENSITY_DBM_HZ`].
pub fn noise_density_dbm_hz(temperature_k: f64) -> f64 {
    THERMAL_NOISE_DENSITY_DBM_HZ + 10.0 * (temperature_k / REFERENCE_TEMPERATURE_K).log10()
}
