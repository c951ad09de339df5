//! RF stage models and cascade analysis.
//!
//! A [`StageSpec`] is a memoryless two-port: gain, noise figure and,
//! optionally, an output 1 dB compression point and third-order intercept.
//! Stages with a compression point are driven through a cubic complex
//! envelope model; all others are pure gain.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::units::{db_to_linear, linear_to_db, GainDb, PowerDbm, Watts, THERMAL_NOISE_DENSITY_DBM_HZ};
use crate::{Error, Result};

/// Rule-of-thumb offset from output P1dB to output IP3, dB.
pub const OIP3_OVER_P1DB_DB: f64 = 10.6;

#[derive(Debug, Clone, PartialEq)]
pub struct StageSpec {
    pub name: String,
    pub gain: GainDb,
    pub nf_db: f64,
    pub p1db_out: Option<PowerDbm>,
    pub oip3: Option<PowerDbm>,
}

impl StageSpec {
    pub fn linear(name: impl ToString, gain: GainDb, nf_db: f64) -> Self {
        StageSpec { name: name.to_string(), gain, nf_db, p1db_out: None, oip3: None }
    }

    /// Matched attenuator: noise figure equals the loss.
    pub fn passive(name: impl ToString, loss: GainDb) -> Self {
        let gain = GainDb(-loss.0.abs());
        StageSpec::linear(name, gain, -gain.0)
    }

    pub fn with_p1db(mut self, p1db_out: PowerDbm) -> Self {
        self.p1db_out = Some(p1db_out);
        self
    }

    pub fn with_oip3(mut self, oip3: PowerDbm) -> Self {
        self.oip3 = Some(oip3);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.gain.0.is_finite() {
            return Err(Error::Config(alloc::format!("stage {}: gain must be finite", self.name)));
        }
        if !(self.nf_db >= 0.0) || !self.nf_db.is_finite() {
            return Err(Error::Config(alloc::format!("stage {}: noise figure must be >= 0 dB", self.name)));
        }
        if let (Some(p1), Some(ip3)) = (self.p1db_out, self.oip3) {
            if ip3.0 < p1.0 {
                return Err(Error::Config(alloc::format!(
                    "stage {}: OIP3 {} dBm below P1dB {} dBm",
                    self.name, ip3.0, p1.0
                )));
            }
        }
        Ok(())
    }

    pub fn is_nonlinear(&self) -> bool {
        self.p1db_out.is_some()
    }

    pub fn noise_factor(&self) -> f64 {
        db_to_linear(GainDb(self.nf_db))
    }
}

/// Ordered cascade of stages, signal flowing from index 0 onward.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    stages: Vec<StageSpec>,
}

impl ChainSpec {
    pub fn new(stages: Vec<StageSpec>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::Config("chain has no stages".into()));
        }
        for s in &stages {
            s.validate()?;
        }
        Ok(ChainSpec { stages })
    }

    pub fn stages(&self) -> &[StageSpec] {
        &self.stages
    }

    pub fn total_gain(&self) -> GainDb {
        self.stages.iter().map(|s| s.gain).sum()
    }

    /// Receiver from the bill of materials: band-pass filter, SKY65981 LNA,
    /// ADL5380 demodulator.
    pub fn default_rx() -> Self {
        ChainSpec {
            stages: alloc::vec![
                StageSpec::passive("bpf", GainDb(3.0)),
                StageSpec::linear("lna", GainDb(13.0), 1.5)
                    .with_p1db(PowerDbm(0.0))
                    .with_oip3(PowerDbm(7.0)),
                StageSpec::linear("demodulator", GainDb(7.0), 10.9),
            ],
        }
    }

    /// Transmitter from the bill of materials: ADL5375 modulator treated as
    /// unity gain, band-pass filter, SE5003L1 power amplifier.
    pub fn default_tx() -> Self {
        ChainSpec {
            stages: alloc::vec![
                StageSpec::linear("modulator", GainDb(0.0), 0.0),
                StageSpec::passive("bpf", GainDb(3.0)),
                StageSpec::linear("pa", GainDb(32.0), 0.0)
                    .with_p1db(PowerDbm(32.0))
                    .with_oip3(oip3_from_p1db(PowerDbm(32.0))),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeResult {
    pub total_gain: GainDb,
    pub total_nf_db: f64,
    /// (gain, NF) of each prefix of the chain.
    pub cumulative: Vec<(GainDb, f64)>,
}

/// Friis noise cascade: `F = F1 + (F2-1)/G1 + (F3-1)/(G1 G2) + ...`.
pub fn cascade(chain: &ChainSpec) -> CascadeResult {
    let mut factor = 0.0;
    let mut gain_before = 1.0;
    let mut gain_db = GainDb(0.0);
    let mut cumulative = Vec::with_capacity(chain.stages.len());
    for (i, stage) in chain.stages.iter().enumerate() {
        let f = stage.noise_factor();
        factor += if i == 0 { f } else { (f - 1.0) / gain_before };
        gain_before *= stage.gain.linear();
        gain_db += stage.gain;
        cumulative.push((gain_db, linear_to_db(factor).0));
    }
    let &(total_gain, total_nf_db) = cumulative.last().expect("chain is non-empty");
    CascadeResult { total_gain, total_nf_db, cumulative }
}

pub fn oip3_from_p1db(p1db_out: PowerDbm) -> PowerDbm {
    p1db_out + GainDb(OIP3_OVER_P1DB_DB)
}

/// Two-tone fundamental-to-IM3 ratio, `2 (OIP3 - Pout)`.
pub fn im3_delta(p_out: PowerDbm, oip3: PowerDbm) -> Result<GainDb> {
    if p_out.0 > oip3.0 {
        return Err(Error::BeyondIntercept { p_out_dbm: p_out.0, oip3_dbm: oip3.0 });
    }
    Ok(GainDb(2.0 * (oip3.0 - p_out.0)))
}

/// Memoryless envelope model of a stage.
///
/// Nonlinear stages use `y = a1 x - a3 |x|^2 x` up to the envelope peak at
/// `|x| = sqrt(a1 / 3 a3)` and clip flat beyond it. Sample magnitudes are in
/// sqrt(W), so `|x|^2` is instantaneous power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AmplifierModel {
    Linear { a1: f64 },
    Cubic { a1: f64, a3: f64, peak_in: f64, peak_out: f64 },
}

impl AmplifierModel {
    pub fn from_stage(spec: &StageSpec) -> Self {
        let a1 = spec.gain.amplitude();
        let Some(p1) = spec.p1db_out else {
            return AmplifierModel::Linear { a1 };
        };
        // At the 1 dB point the output amplitude is a1*r1*c with c = -1 dB,
        // so a3/a1 * r1^2 = 1 - c.
        let c = 10f64.powf(-1.0 / 20.0);
        let r1 = p1.watts().0.sqrt() / (a1 * c);
        let a3 = a1 * (1.0 - c) / (r1 * r1);
        let peak_in = (a1 / (3.0 * a3)).sqrt();
        let peak_out = 2.0 / 3.0 * a1 * peak_in;
        AmplifierModel::Cubic { a1, a3, peak_in, peak_out }
    }

    pub fn linearized(self) -> Self {
        match self {
            AmplifierModel::Cubic { a1, .. } => AmplifierModel::Linear { a1 },
            linear => linear,
        }
    }

    /// Input envelope at which the gain has compressed by 1 dB.
    pub fn p1db_input_amplitude(&self) -> Option<f64> {
        match *self {
            AmplifierModel::Linear { .. } => None,
            AmplifierModel::Cubic { a1, a3, .. } => {
                let c = 10f64.powf(-1.0 / 20.0);
                Some((a1 * (1.0 - c) / a3).sqrt())
            }
        }
    }

    #[inline]
    pub fn apply(&self, x: Complex64) -> Complex64 {
        match *self {
            AmplifierModel::Linear { a1 } => x * a1,
            AmplifierModel::Cubic { a1, a3, peak_in, peak_out } => {
                let r = x.norm();
                if r >= peak_in {
                    x * (peak_out / r)
                } else {
                    x * (a1 - a3 * r * r)
                }
            }
        }
    }
}

pub fn amplifier_transfer(x: Complex64, spec: &StageSpec) -> Complex64 {
    AmplifierModel::from_stage(spec).apply(x)
}

/// Noise power at a stage output: input noise amplified, plus the stage's
/// own contribution `kT0 B (F-1) G`.
pub fn stage_noise_power(spec: &StageSpec, bandwidth_hz: f64, input_noise: PowerDbm) -> PowerDbm {
    let g = spec.gain.linear();
    let added = thermal_noise(bandwidth_hz).0 * (spec.noise_factor() - 1.0) * g;
    Watts(input_noise.watts().0 * g + added).dbm()
}

/// `kT0 B` at the 290 K reference.
pub fn thermal_noise(bandwidth_hz: f64) -> Watts {
    PowerDbm(THERMAL_NOISE_DENSITY_DBM_HZ + 10.0 * bandwidth_hz.log10()).watts()
}

/// Draws circularly-symmetric complex Gaussian noise of total variance `variance`.
#[inline]
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let sigma = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * sigma, im * sigma)
}

/// Runs samples through a chain in place. When `noise` is given, each stage
/// adds its own output-referred noise over `noise_bandwidth_hz`.
#[derive(Debug, Clone)]
pub struct ChainProcessor {
    stages: Vec<(AmplifierModel, f64)>,
}

impl ChainProcessor {
    pub fn new(chain: &ChainSpec, noise_bandwidth_hz: f64, linear: bool) -> Self {
        let kt0b = thermal_noise(noise_bandwidth_hz).0;
        let stages = chain
            .stages
            .iter()
            .map(|s| {
                let model = AmplifierModel::from_stage(s);
                let model = if linear { model.linearized() } else { model };
                (model, kt0b * (s.noise_factor() - 1.0) * s.gain.linear())
            })
            .collect();
        ChainProcessor { stages }
    }

    pub fn process<R: Rng + ?Sized>(&self, samples: &mut [Complex64], mut noise: Option<&mut R>) {
        for &(model, added_variance) in &self.stages {
            for x in samples.iter_mut() {
                *x = model.apply(*x);
                if let Some(rng) = noise.as_deref_mut() {
                    if added_variance > 0.0 {
                        *x += complex_gaussian(rng, added_variance);
                    }
                }
            }
        }
    }
}
