//! Complex-baseband Monte-Carlo simulation of the whole link.
//!
//! Bits are mapped to QAM symbols, pulse shaped at `samples_per_symbol`
//! samples per symbol, driven through the transmit chain (with the PA at its
//! configured output back-off), attenuated by the free-space path and
//! received by the receive chain. The receiver is symbol-synchronous: it
//! takes the symbol-centre sample, estimates the composite complex gain
//! against the transmitted symbols and makes hard decisions.
//!
//! Receiver noise is referred to the symbol-rate noise bandwidth, i.e. what
//! an ideal integrate-and-dump (matched to the rectangular hold) would pass,
//! and is added at the symbol instants. The carrier, the quadrature
//! modulator and the demodulator are identities at baseband.
//!
//! Work is split into fixed-size blocks of symbols. Each block draws its
//! bits and noise from its own random streams, so [`SimPlan::run_block`]
//! can be called in any order, on any thread, and [`SimPlan::finish`]
//! reduces the outcomes in block order for bit-identical results.

mod pulse;
mod spectrum;

pub use pulse::{gaussian_taps, pulse_power, pulse_shape, symbol_offset, PulseShape};
pub use spectrum::{estimate_spectrum, Spectrum};

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{add_awgn_in_place, rng_stream};
use crate::linkbudget::LinkScenario;
use crate::modem::{bandwidth_plan, demap_hard, gain_estimate, map_bits, ConstellationMap, EbN0, EvmAccumulator};
use crate::rfchain::{complex_gaussian, ChainProcessor, ChainSpec};
use crate::units::{db_to_linear, dbm_to_watts, GainDb, PowerDbm, Watts};
use crate::{Error, Result};

/// Constellation clouds are capped at this many points.
pub const MAX_CONSTELLATION_POINTS: usize = 4096;
/// Averaged segments in the transmit spectrum estimate.
pub const PSD_SEGMENTS: usize = 64;
/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// How noise enters the receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelMode {
    /// Thermal noise at the antenna plus the noise of every receive stage,
    /// at the received power the free-space path delivers.
    Link,
    /// AWGN at a fixed Eb/N0 relative to the nominal received power; the
    /// receive chain contributes gain only.
    FixedEbN0(EbN0),
    /// No noise anywhere.
    Noiseless,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub scenario: LinkScenario,
    pub tx_chain: ChainSpec,
    pub samples_per_symbol: usize,
    pub pulse: PulseShape,
    pub n_bits: u64,
    pub seed: u64,
    /// Output back-off of the mean transmit power from the PA's P1dB.
    pub pa_backoff_db: f64,
    pub channel_mode: ChannelMode,
    /// Replace every nonlinear stage, transmit and receive, with its
    /// small-signal gain.
    pub linear_pa: bool,
    pub block_symbols: usize,
}

impl SimConfig {
    /// The 256-QAM design point: Gaussian BT 0.5 shaping, PA backed off
    /// from its 32 dBm P1dB to the 23.31 dBm transmit power, link noise.
    pub fn reference() -> Self {
        let scenario = LinkScenario::reference();
        let tx_chain = ChainSpec::default_tx();
        let pa_backoff_db = default_backoff(&tx_chain, scenario.tx_power);
        SimConfig {
            scenario,
            tx_chain,
            samples_per_symbol: 8,
            pulse: PulseShape::default(),
            n_bits: 1_000_000,
            seed: 1,
            pa_backoff_db,
            channel_mode: ChannelMode::Link,
            linear_pa: false,
            block_symbols: 16_384,
        }
    }

    /// AWGN-only run with rectangular pulses and a linear PA, the setting in
    /// which measured BER should track [`crate::modem::theoretical_ber`].
    pub fn calibration(order: crate::modem::QamOrder, ebn0: EbN0, n_bits: u64, seed: u64) -> Self {
        let mut cfg = SimConfig::reference();
        cfg.scenario.order = order;
        cfg.pulse = PulseShape::Rectangular;
        cfg.linear_pa = true;
        cfg.channel_mode = ChannelMode::FixedEbN0(ebn0);
        let n = u64::from(order.bits_per_symbol());
        cfg.n_bits = n_bits / n * n;
        cfg.seed = seed;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        let n = u64::from(self.scenario.order.bits_per_symbol());
        if self.n_bits == 0 || self.n_bits % n != 0 {
            return Err(Error::Config(format!(
                "bit count {} must be a positive multiple of {n}",
                self.n_bits
            )));
        }
        if self.samples_per_symbol < 2 {
            return Err(Error::Config(format!(
                "samples per symbol must be at least 2, got {}",
                self.samples_per_symbol
            )));
        }
        if let PulseShape::Gaussian { bt } = self.pulse {
            if !(bt > 0.0) || !bt.is_finite() {
                return Err(Error::Config(format!("Gaussian BT must be positive, got {bt}")));
            }
        }
        if !self.pa_backoff_db.is_finite() {
            return Err(Error::Config("PA back-off must be finite".into()));
        }
        if self.block_symbols == 0 {
            return Err(Error::Config("block size must be positive".into()));
        }
        if let ChannelMode::FixedEbN0(e) = self.channel_mode {
            if e.0.is_nan() {
                return Err(Error::Config("Eb/N0 must be a number".into()));
            }
        }
        let first_block = (self.n_bits / n).min(self.block_symbols as u64) as usize;
        if first_block * self.samples_per_symbol < 4 * 8 {
            return Err(Error::Config("too few bits for a spectrum estimate".into()));
        }
        Ok(())
    }
}

/// P1dB of the first nonlinear transmit stage minus the transmit power.
pub fn default_backoff(tx_chain: &ChainSpec, tx_power: PowerDbm) -> f64 {
    tx_chain
        .stages()
        .iter()
        .find_map(|s| s.p1db_out)
        .map_or(0.0, |p1| p1.0 - tx_power.0)
}

/// Wilson score interval for `errors` out of `trials` at normal quantile `z`.
pub fn wilson_interval(errors: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if errors == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if errors == trials { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub measured_ber: f64,
    pub ber_confidence: (f64, f64),
    pub tx_evm_pct: f64,
    pub rx_evm_pct: f64,
    /// Transmit spectrum, dB relative to its peak.
    pub psd: Vec<(f64, f64)>,
    /// Same estimate in absolute density, for power checks.
    pub spectrum: Spectrum,
    pub tx_constellation: Vec<Complex64>,
    pub rx_constellation: Vec<Complex64>,
    pub n_bits_run: u64,
    pub n_bit_errors: u64,
    /// Mean power at the transmit antenna port.
    pub tx_power_dbm: f64,
    /// Eb/N0 seen by the demapper, referred to the receiver input.
    pub ebn0_db: f64,
}

/// Everything one block contributes to the final result.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockOutcome {
    pub index: usize,
    pub bits: u64,
    pub bit_errors: u64,
    pub tx_evm: EvmAccumulator,
    pub rx_evm: EvmAccumulator,
    pub tx_energy: f64,
    pub tx_samples: u64,
    pub tx_points: Vec<Complex64>,
    pub rx_points: Vec<Complex64>,
    pub spectrum: Option<Spectrum>,
}

/// Transmit output of one block.
#[derive(Debug, Clone)]
pub struct TxBlock {
    pub bits: Vec<u8>,
    pub symbols: Vec<Complex64>,
    /// Antenna-port waveform in sqrt(W).
    pub waveform: Vec<Complex64>,
}

/// A validated configuration with everything derived once up front.
#[derive(Debug, Clone)]
pub struct SimPlan {
    config: SimConfig,
    map: ConstellationMap,
    sample_rate: f64,
    symbol_rate: f64,
    n_symbols: u64,
    n_blocks: usize,
    drive: f64,
    tx: ChainProcessor,
    nominal_tx_power: f64,
    channel_amplitude: f64,
    rx: ChainProcessor,
    antenna_noise: f64,
    ebn0_db: f64,
}

impl SimPlan {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let scenario = &config.scenario;
        let map = ConstellationMap::new(scenario.order);
        let plan = bandwidth_plan(scenario.bit_rate, scenario.order)?;
        let sps = config.samples_per_symbol;
        let n_symbols = config.n_bits / u64::from(scenario.order.bits_per_symbol());
        let n_blocks = n_symbols.div_ceil(config.block_symbols as u64) as usize;

        // The shaped waveform is scaled so its mean small-signal power at
        // the first nonlinear stage's output sits `pa_backoff_db` below its
        // P1dB; without one, the chain output is set to the scenario's
        // transmit power.
        let stages = config.tx_chain.stages();
        let (target_out, gain_to_target) = match stages.iter().position(|s| s.p1db_out.is_some()) {
            Some(i) => (
                stages[i].p1db_out.unwrap() - GainDb(config.pa_backoff_db),
                stages[..=i].iter().map(|s| s.gain).sum::<GainDb>(),
            ),
            None => (scenario.tx_power, config.tx_chain.total_gain()),
        };
        let shaped = pulse_power(config.pulse, sps);
        let drive = ((target_out - gain_to_target).watts().0 / shaped).sqrt();
        let nominal_tx_power = drive * drive * shaped * config.tx_chain.total_gain().linear();

        let path = scenario.channel.path_gain();
        let channel_amplitude = path.amplitude();
        let rx_bandwidth = plan.symbol_rate;
        let rx = ChainProcessor::new(&scenario.rx_chain, rx_bandwidth, config.linear_pa);
        let density = dbm_to_watts(PowerDbm(scenario.channel.noise_density_dbm_hz())).0;
        let antenna_noise = density * rx_bandwidth;
        let nominal_rx = nominal_tx_power * path.linear();

        let ebn0_db = match config.channel_mode {
            ChannelMode::FixedEbN0(e) => e.0,
            ChannelMode::Noiseless => f64::INFINITY,
            ChannelMode::Link => {
                // Input-referred density: antenna noise plus kT0(F-1).
                let f = crate::rfchain::cascade(&scenario.rx_chain).total_nf_db;
                let kt0 = dbm_to_watts(PowerDbm(crate::units::THERMAL_NOISE_DENSITY_DBM_HZ)).0;
                let n0 = density + kt0 * (db_to_linear(GainDb(f)) - 1.0);
                10.0 * (nominal_rx / (n0 * scenario.bit_rate)).log10()
            }
        };

        Ok(SimPlan {
            tx: ChainProcessor::new(&config.tx_chain, plan.symbol_rate, config.linear_pa),
            sample_rate: plan.symbol_rate * sps as f64,
            symbol_rate: plan.symbol_rate,
            map,
            n_symbols,
            n_blocks,
            drive,
            nominal_tx_power,
            channel_amplitude,
            rx,
            antenna_noise,
            ebn0_db,
            config,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn symbol_rate(&self) -> f64 {
        self.symbol_rate
    }

    pub fn constellation(&self) -> &ConstellationMap {
        &self.map
    }

    /// Mean small-signal power at the transmit antenna port.
    pub fn nominal_tx_power(&self) -> Watts {
        Watts(self.nominal_tx_power)
    }

    fn block_len(&self, index: usize) -> usize {
        let start = index as u64 * self.config.block_symbols as u64;
        (self.n_symbols - start).min(self.config.block_symbols as u64) as usize
    }

    /// Bits, symbols and antenna waveform of block `index`.
    pub fn transmit_block(&self, index: usize) -> TxBlock {
        let n_sym = self.block_len(index);
        let n = self.map.bits_per_symbol() as usize;
        let mut bit_rng = rng_stream(self.config.seed, 2 * index as u64);
        let bits: Vec<u8> = (0..n_sym * n).map(|_| bit_rng.random::<bool>() as u8).collect();
        let symbols = map_bits(&bits, &self.map).expect("whole symbols per block");
        let mut waveform = pulse_shape(&symbols, self.config.pulse, self.config.samples_per_symbol);
        for x in &mut waveform {
            *x *= self.drive;
        }
        self.tx.process::<rand_chacha::ChaCha8Rng>(&mut waveform, None);
        TxBlock { bits, symbols, waveform }
    }

    /// PSD of one transmitted block.
    pub fn transmit_spectrum(&self, index: usize) -> Spectrum {
        self.spectrum_of(&self.transmit_block(index).waveform)
    }

    fn spectrum_of(&self, waveform: &[Complex64]) -> Spectrum {
        let segments = PSD_SEGMENTS.min((waveform.len() / 8).saturating_sub(1)).max(3);
        estimate_spectrum(waveform, self.sample_rate, segments).expect("validated length")
    }

    pub fn run_block(&self, index: usize) -> BlockOutcome {
        let TxBlock { bits, symbols, waveform } = self.transmit_block(index);
        let sps = self.config.samples_per_symbol;
        let offset = symbol_offset(sps);
        let tx_syms: Vec<Complex64> = waveform.iter().skip(offset).step_by(sps).copied().collect();

        let mut tx_evm = EvmAccumulator::default();
        tx_evm.extend(&symbols, &tx_syms);
        let tx_energy = waveform.iter().map(|x| x.norm_sqr()).sum();

        let mut noise_rng = rng_stream(self.config.seed, 2 * index as u64 + 1);
        let mut rx: Vec<Complex64> = tx_syms.iter().map(|&x| x * self.channel_amplitude).collect();
        match self.config.channel_mode {
            ChannelMode::Link => {
                for x in &mut rx {
                    *x += complex_gaussian(&mut noise_rng, self.antenna_noise);
                }
                self.rx.process(&mut rx, Some(&mut noise_rng));
            }
            ChannelMode::FixedEbN0(e) => {
                let n = f64::from(self.map.bits_per_symbol());
                let nominal = Watts(self.nominal_tx_power * self.channel_amplitude.powi(2));
                add_awgn_in_place(&mut rx, nominal, e.0 + 10.0 * n.log10(), &mut noise_rng);
                self.rx.process::<rand_chacha::ChaCha8Rng>(&mut rx, None);
            }
            ChannelMode::Noiseless => self.rx.process::<rand_chacha::ChaCha8Rng>(&mut rx, None),
        }

        let mut rx_evm = EvmAccumulator::default();
        rx_evm.extend(&symbols, &rx);

        let normalise = |samples: &[Complex64]| -> Vec<Complex64> {
            match gain_estimate(&symbols, samples) {
                Some(g) => samples.iter().map(|&x| x / g).collect(),
                None => samples.to_vec(),
            }
        };
        let rx_norm = normalise(&rx);
        let decided = demap_hard(&rx_norm, &self.map);
        let bit_errors = decided.iter().zip(&bits).filter(|(a, b)| a != b).count() as u64;

        let keep = MAX_CONSTELLATION_POINTS.min(symbols.len());
        let tx_points = normalise(&tx_syms)[..keep].to_vec();
        let rx_points = rx_norm[..keep].to_vec();

        let spectrum = (index == 0).then(|| self.spectrum_of(&waveform));

        BlockOutcome {
            index,
            bits: bits.len() as u64,
            bit_errors,
            tx_evm,
            rx_evm,
            tx_energy,
            tx_samples: waveform.len() as u64,
            tx_points,
            rx_points,
            spectrum,
        }
    }

    /// Reduces block outcomes. They may arrive in any order; the reduction
    /// always runs in block order.
    pub fn finish(&self, outcomes: impl IntoIterator<Item = BlockOutcome>) -> Result<SimResult> {
        let mut outcomes: Vec<BlockOutcome> = outcomes.into_iter().collect();
        outcomes.sort_by_key(|o| o.index);
        if outcomes.len() != self.n_blocks || outcomes.iter().enumerate().any(|(i, o)| o.index != i) {
            return Err(Error::Config(format!(
                "expected outcomes for blocks 0..{}, got {}",
                self.n_blocks,
                outcomes.len()
            )));
        }
        let mut bits = 0;
        let mut errors = 0;
        let mut tx_evm = EvmAccumulator::default();
        let mut rx_evm = EvmAccumulator::default();
        let mut tx_energy = 0.0;
        let mut tx_samples = 0;
        let mut tx_constellation = Vec::new();
        let mut rx_constellation = Vec::new();
        let mut spectrum = None;
        for o in outcomes {
            bits += o.bits;
            errors += o.bit_errors;
            tx_evm.merge(&o.tx_evm);
            rx_evm.merge(&o.rx_evm);
            tx_energy += o.tx_energy;
            tx_samples += o.tx_samples;
            let room = MAX_CONSTELLATION_POINTS - tx_constellation.len();
            tx_constellation.extend(o.tx_points.iter().take(room));
            rx_constellation.extend(o.rx_points.iter().take(room));
            if o.spectrum.is_some() {
                spectrum = o.spectrum;
            }
        }
        let spectrum = spectrum.ok_or_else(|| Error::Config("first block carried no spectrum".into()))?;
        Ok(SimResult {
            measured_ber: errors as f64 / bits as f64,
            ber_confidence: wilson_interval(errors, bits, Z_95),
            tx_evm_pct: tx_evm.percent()?,
            rx_evm_pct: rx_evm.percent()?,
            psd: spectrum.relative_db(),
            spectrum,
            tx_constellation,
            rx_constellation,
            n_bits_run: bits,
            n_bit_errors: errors,
            tx_power_dbm: Watts(tx_energy / tx_samples as f64).dbm().0,
            ebn0_db: self.ebn0_db,
        })
    }
}

/// Runs the whole simulation on the calling thread.
pub fn run_link_sim(config: SimConfig) -> Result<SimResult> {
    let plan = SimPlan::new(config)?;
    let outcomes: Vec<BlockOutcome> = (0..plan.n_blocks()).map(|i| plan.run_block(i)).collect();
    plan.finish(outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modem::{theoretical_ber, QamOrder};

    #[test]
    fn wilson_examples() {
        let (lo, hi) = wilson_interval(0, 1_000_000, Z_95);
        assert_eq!(lo, 0.0);
        assert!((hi - 3.84e-6).abs() < 0.01e-6);
        let (lo, hi) = wilson_interval(500, 1000, Z_95);
        assert!((lo - 0.4691).abs() < 1e-3 && (hi - 0.5309).abs() < 1e-3);
        let (lo, hi) = wilson_interval(37, 5000, Z_95);
        assert!(lo < 37.0 / 5000.0 && 37.0 / 5000.0 < hi);
    }

    #[test]
    fn noiseless_linear_rectangular_is_clean() {
        let mut cfg = SimConfig::reference();
        cfg.channel_mode = ChannelMode::Noiseless;
        cfg.linear_pa = true;
        cfg.pulse = PulseShape::Rectangular;
        cfg.n_bits = 80_000;
        let r = run_link_sim(cfg).unwrap();
        assert_eq!(r.n_bit_errors, 0);
        assert_eq!(r.measured_ber, 0.0);
        assert!(r.rx_evm_pct < 0.1);
        assert!(r.tx_evm_pct < 1e-6);
        // Mean symbol energy of random data is 1 only on average.
        assert!((r.tx_power_dbm - 23.31).abs() < 0.05);
    }

    #[test]
    fn invalid_configs_fail_before_running() {
        let mut cfg = SimConfig::reference();
        cfg.n_bits = 12;
        assert!(matches!(SimPlan::new(cfg), Err(Error::Config(_))));
        let mut cfg = SimConfig::reference();
        cfg.samples_per_symbol = 1;
        assert!(SimPlan::new(cfg).is_err());
        let mut cfg = SimConfig::reference();
        cfg.pulse = PulseShape::Gaussian { bt: 0.0 };
        assert!(SimPlan::new(cfg).is_err());
        let mut cfg = SimConfig::reference();
        cfg.n_bits = 8;
        assert!(SimPlan::new(cfg).is_err());
    }

    #[test]
    fn reference_backoff() {
        let cfg = SimConfig::reference();
        assert!((cfg.pa_backoff_db - 8.69).abs() < 1e-12);
    }

    #[test]
    fn qpsk_calibration_tracks_theory() {
        let ebn0 = EbN0(4.0);
        let r = run_link_sim(SimConfig::calibration(QamOrder::Qam4, ebn0, 400_000, 3)).unwrap();
        let theory = theoretical_ber(QamOrder::Qam4, ebn0);
        assert!((r.measured_ber / theory - 1.0).abs() < 0.1, "{} vs {theory}", r.measured_ber);
        let (lo, hi) = r.ber_confidence;
        assert!(lo <= r.measured_ber && r.measured_ber <= hi);
    }

    #[test]
    fn block_order_does_not_matter() {
        let mut cfg = SimConfig::reference();
        cfg.n_bits = 8 * 5000;
        cfg.block_symbols = 1000;
        let plan = SimPlan::new(cfg).unwrap();
        let forward: Vec<_> = (0..plan.n_blocks()).map(|i| plan.run_block(i)).collect();
        let backward: Vec<_> = (0..plan.n_blocks()).rev().map(|i| plan.run_block(i)).collect();
        assert_eq!(plan.finish(forward).unwrap(), plan.finish(backward).unwrap());
        assert!(plan.finish(Vec::new()).is_err());
    }
}
