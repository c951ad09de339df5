//! Closed-form link budget: Eb/N0 to SNR to sensitivity, received power,
//! margin, range and the UNII transmit-power check.


use crate::channel::{friis_received_power, ChannelSpec};
use crate::modem::{bandwidth_plan, ebn0_for_ber, EbN0, QamOrder};
use crate::rfchain::{cascade, ChainSpec};
use crate::units::{GainDb, PowerDbm, THERMAL_NOISE_DENSITY_DBM_HZ};
use crate::{Error, Result};

/// 250 mW expressed in dBm.
pub const FCC_UNII_LIMIT_DBM: f64 = 23.979_400_086_720_375;
/// The same limit as usually quoted.
pub const FCC_UNII_LIMIT_ROUNDED_DBM: f64 = 24.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LinkScenario {
    pub bit_rate: f64,
    pub order: QamOrder,
    pub target_ber: f64,
    /// Use this Eb/N0 instead of inverting the BER formula.
    pub ebn0_override: Option<EbN0>,
    /// Use this receiver noise figure instead of the chain cascade.
    pub nf_override_db: Option<f64>,
    pub tx_power: PowerDbm,
    pub channel: ChannelSpec,
    pub rx_chain: ChainSpec,
    /// Noise bandwidth for SNR and sensitivity; null-to-null when absent.
    pub occupied_bandwidth_hz: Option<f64>,
    pub fcc_limit: PowerDbm,
    /// Received power the range figure is solved for; sensitivity when absent.
    pub range_reference: Option<PowerDbm>,
}

impl LinkScenario {
    /// The 1 Gbps 256-QAM design: 23.31 dBm into isotropic antennas at
    /// 5 GHz over 1.79 m, BOM receiver, no overrides.
    pub fn reference() -> Self {
        LinkScenario {
            bit_rate: 1e9,
            order: QamOrder::Qam256,
            target_ber: 1e-5,
            ebn0_override: None,
            nf_override_db: None,
            tx_power: PowerDbm(23.31),
            channel: ChannelSpec::isotropic(5e9, 1.79).expect("valid channel"),
            rx_chain: ChainSpec::default_rx(),
            occupied_bandwidth_hz: None,
            fcc_limit: PowerDbm(FCC_UNII_LIMIT_DBM),
            range_reference: None,
        }
    }

    /// [`LinkScenario::reference`] pinned to the published system numbers:
    /// Eb/N0 23.39 dB, receiver NF 6.24 dB, range solved at -28.2 dBm.
    pub fn published() -> Self {
        LinkScenario {
            ebn0_override: Some(EbN0(23.39)),
            nf_override_db: Some(6.24),
            range_reference: Some(PowerDbm(-28.2)),
            ..LinkScenario::reference()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.bit_rate) {
            return Err(Error::domain("bit rate", self.bit_rate));
        }
        if !(self.target_ber > 0.0 && self.target_ber < 0.5) {
            return Err(Error::domain("target BER", self.target_ber));
        }
        if let Some(b) = self.occupied_bandwidth_hz {
            if !positive(b) {
                return Err(Error::domain("occupied bandwidth", b));
            }
        }
        if let Some(nf) = self.nf_override_db {
            if !(nf >= 0.0) || !nf.is_finite() {
                return Err(Error::domain("noise figure override", nf));
            }
        }
        if !self.tx_power.0.is_finite() {
            return Err(Error::domain("transmit power", self.tx_power.0));
        }
        self.channel.validate()
    }

    pub fn bandwidth_hz(&self) -> Result<f64> {
        match self.occupied_bandwidth_hz {
            Some(b) => Ok(b),
            None => Ok(bandwidth_plan(self.bit_rate, self.order)?.null_to_null),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FccVerdict {
    pub compliant: bool,
    pub tx_power: PowerDbm,
    pub limit: PowerDbm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkBudgetReport {
    pub bandwidth_hz: f64,
    pub symbol_rate: f64,
    pub required_ebn0_db: f64,
    pub required_snr_db: f64,
    pub rx_noise_figure_db: f64,
    pub noise_floor_dbm: f64,
    pub sensitivity_dbm: f64,
    pub tx_power_dbm: f64,
    pub path_gain_db: f64,
    pub rx_power_dbm: f64,
    pub link_margin_db: f64,
    pub range_reference_dbm: f64,
    pub max_distance_m: f64,
    pub max_distance_at_sensitivity_m: f64,
    pub fcc_compliant: bool,
    pub fcc_limit_dbm: f64,
    pub fcc_limit_rounded_dbm: f64,
}

/// `SNR = Eb/N0 + 10 log R - 10 log B`.
pub fn required_snr(ebn0: EbN0, bit_rate: f64, bandwidth_hz: f64) -> f64 {
    ebn0.0 + 10.0 * bit_rate.log10() - 10.0 * bandwidth_hz.log10()
}

/// `-174 dBm/Hz + NF + 10 log B + SNR`.
pub fn sensitivity(nf_db: f64, bandwidth_hz: f64, snr_db: f64) -> PowerDbm {
    PowerDbm(THERMAL_NOISE_DENSITY_DBM_HZ + nf_db + 10.0 * bandwidth_hz.log10() + snr_db)
}

/// Distance at which the Friis received power falls to `p_rx_min`.
pub fn max_distance(p_tx: PowerDbm, p_rx_min: PowerDbm, channel: &ChannelSpec) -> Result<f64> {
    // Path gain excluding spreading; the spreading term must absorb the rest.
    let antennas = channel.tx_antenna_gain + channel.rx_antenna_gain;
    let allowed = (p_tx + antennas) - p_rx_min;
    if !(allowed.0 >= 0.0) {
        return Err(Error::domain("received power floor above transmit power", p_rx_min.0));
    }
    let lambda = channel.wavelength();
    Ok(lambda / (4.0 * core::f64::consts::PI) * 10f64.powf(allowed.0 / 20.0))
}

pub fn fcc_check(p_tx: PowerDbm, limit: PowerDbm) -> FccVerdict {
    FccVerdict { compliant: p_tx.0 <= limit.0, tx_power: p_tx, limit }
}

pub fn analyze(scenario: &LinkScenario) -> Result<LinkBudgetReport> {
    scenario.validate()?;
    let plan = bandwidth_plan(scenario.bit_rate, scenario.order)?;
    let bandwidth_hz = scenario.bandwidth_hz()?;
    let ebn0 = match scenario.ebn0_override {
        Some(e) => e,
        None => ebn0_for_ber(scenario.order, scenario.target_ber)?,
    };
    let snr = required_snr(ebn0, scenario.bit_rate, bandwidth_hz);
    let nf = scenario.nf_override_db.unwrap_or_else(|| cascade(&scenario.rx_chain).total_nf_db);
    let sens = sensitivity(nf, bandwidth_hz, snr);
    let path_gain = scenario.channel.path_gain();
    let rx_power = friis_received_power(scenario.tx_power, &scenario.channel);
    let range_reference = scenario.range_reference.unwrap_or(sens);
    let max_distance_m = max_distance(scenario.tx_power, range_reference, &scenario.channel)?;
    let max_distance_at_sensitivity_m = max_distance(scenario.tx_power, sens, &scenario.channel)?;
    let fcc = fcc_check(scenario.tx_power, scenario.fcc_limit);
    Ok(LinkBudgetReport {
        bandwidth_hz,
        symbol_rate: plan.symbol_rate,
        required_ebn0_db: ebn0.0,
        required_snr_db: snr,
        rx_noise_figure_db: nf,
        noise_floor_dbm: THERMAL_NOISE_DENSITY_DBM_HZ + 10.0 * bandwidth_hz.log10() + nf,
        sensitivity_dbm: sens.0,
        tx_power_dbm: scenario.tx_power.0,
        path_gain_db: path_gain.0,
        rx_power_dbm: rx_power.0,
        link_margin_db: (rx_power - sens).0,
        range_reference_dbm: range_reference.0,
        max_distance_m,
        max_distance_at_sensitivity_m,
        fcc_compliant: fcc.compliant,
        fcc_limit_dbm: fcc.limit.0,
        fcc_limit_rounded_dbm: FCC_UNII_LIMIT_ROUNDED_DBM,
    })
}

/// Link margin in dB at a given distance, for range sweeps.
pub fn margin_at(scenario: &LinkScenario, distance_m: f64) -> Result<GainDb> {
    let mut s = scenario.clone();
    s.channel = s.channel.with_distance(distance_m);
    let r = analyze(&s)?;
    Ok(GainDb(r.link_margin_db))
}
