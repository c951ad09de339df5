//! Scenario files: flat `key = value` lines, `#` comments, dotted keys.
//!
//! ```text
//! tx_power_dbm = 23.31
//! channel.distance_m = 1.79
//! rx_chain.1.gain_db = 13
//! sim.pulse = gaussian
//! ```
//!
//! Every key is optional and falls back to the reference design. Giving any
//! key of a chain (`tx_chain.*`, `rx_chain.*`) replaces that whole chain, so
//! its stages must be numbered from 0 without gaps. Unknown or repeated keys
//! are errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use qamlink_core::channel::ChannelSpec;
use qamlink_core::linkbudget::LinkScenario;
use qamlink_core::modem::{EbN0, QamOrder};
use qamlink_core::rfchain::{ChainSpec, StageSpec};
use qamlink_core::simulate::{default_backoff, ChannelMode, PulseShape, SimConfig};
use qamlink_core::units::{GainDb, PowerDbm};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: `{key}`: {message}")]
    Key { line: usize, key: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

/// Everything a subcommand needs: the link scenario, the transmitter chain
/// and the simulation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: LinkScenario,
    pub tx_chain: ChainSpec,
    pub samples_per_symbol: usize,
    pub pulse: PulseShape,
    pub n_bits: u64,
    pub seed: u64,
    /// Explicit PA back-off; derived from the PA P1dB and the transmit power
    /// when absent.
    pub pa_backoff_db: Option<f64>,
    pub block_symbols: usize,
    /// Transmit EVM a simulation report is judged against.
    pub evm_limit_pct: f64,
}

pub const DEFAULT_EVM_LIMIT_PCT: f64 = 2.0;

impl Default for RunConfig {
    fn default() -> Self {
        let sim = SimConfig::reference();
        RunConfig {
            scenario: LinkScenario::published(),
            tx_chain: sim.tx_chain,
            samples_per_symbol: sim.samples_per_symbol,
            pulse: sim.pulse,
            n_bits: sim.n_bits,
            seed: sim.seed,
            pa_backoff_db: None,
            block_symbols: sim.block_symbols,
            evm_limit_pct: DEFAULT_EVM_LIMIT_PCT,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        text.parse()
    }

    pub fn backoff_db(&self) -> f64 {
        self.pa_backoff_db
            .unwrap_or_else(|| default_backoff(&self.tx_chain, self.scenario.tx_power))
    }

    pub fn sim_config(&self, channel_mode: ChannelMode, linear_pa: bool) -> SimConfig {
        SimConfig {
            scenario: self.scenario.clone(),
            tx_chain: self.tx_chain.clone(),
            samples_per_symbol: self.samples_per_symbol,
            pulse: self.pulse,
            n_bits: self.n_bits,
            seed: self.seed,
            pa_backoff_db: self.backoff_db(),
            channel_mode,
            linear_pa,
            block_symbols: self.block_symbols,
        }
    }
}

impl FromStr for RunConfig {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, ConfigError> {
        let mut e = Entries::parse(text)?;
        let mut cfg = RunConfig::default();
        let s = &mut cfg.scenario;

        if let Some(v) = e.take("bit_rate_bps", positive)? {
            s.bit_rate = v;
        }
        if let Some(v) = e.take_with("modulation", |raw| {
            let m: usize = raw.parse().map_err(|_| "expected 4, 16, 64 or 256".to_string())?;
            QamOrder::new(m).map_err(|err| err.to_string())
        })? {
            s.order = v;
        }
        if let Some(v) = e.take("target_ber", |x| in_open(x, 0.0, 0.5))? {
            s.target_ber = v;
        }
        if let Some(v) = e.take_optional("ebn0_override_db", finite)? {
            s.ebn0_override = v.map(EbN0);
        }
        if let Some(v) = e.take_optional("nf_override_db", non_negative)? {
            s.nf_override_db = v;
        }
        if let Some(v) = e.take_optional("range_reference_dbm", finite)? {
            s.range_reference = v.map(PowerDbm);
        }
        if let Some(v) = e.take_optional("occupied_bandwidth_hz", positive)? {
            s.occupied_bandwidth_hz = v;
        }
        if let Some(v) = e.take("tx_power_dbm", finite)? {
            s.tx_power = PowerDbm(v);
        }
        if let Some(v) = e.take("fcc_limit_dbm", finite)? {
            s.fcc_limit = PowerDbm(v);
        }

        let c: &mut ChannelSpec = &mut s.channel;
        if let Some(v) = e.take("channel.frequency_hz", positive)? {
            c.frequency_hz = v;
        }
        if let Some(v) = e.take("channel.distance_m", positive)? {
            c.distance_m = v;
        }
        if let Some(v) = e.take("channel.tx_antenna_gain_db", finite)? {
            c.tx_antenna_gain = GainDb(v);
        }
        if let Some(v) = e.take("channel.rx_antenna_gain_db", finite)? {
            c.rx_antenna_gain = GainDb(v);
        }
        if let Some(v) = e.take("channel.noise_temperature_k", positive)? {
            c.noise_temperature_k = v;
        }

        if let Some(chain) = e.take_chain("rx_chain")? {
            s.rx_chain = chain;
        }
        if let Some(chain) = e.take_chain("tx_chain")? {
            cfg.tx_chain = chain;
        }

        if let Some(v) = e.take_with("sim.samples_per_symbol", |raw| {
            let n: usize = raw.parse().map_err(|_| "expected an integer".to_string())?;
            if n < 2 {
                return Err("must be at least 2".into());
            }
            Ok(n)
        })? {
            cfg.samples_per_symbol = v;
        }
        let bt = e.take("sim.bt", positive)?;
        let pulse = e.take_with("sim.pulse", |raw| match raw {
            "gaussian" | "rectangular" => Ok(raw.to_string()),
            _ => Err("expected `gaussian` or `rectangular`".into()),
        })?;
        cfg.pulse = match (pulse.as_deref(), bt) {
            (Some("rectangular"), _) => PulseShape::Rectangular,
            (_, Some(bt)) => PulseShape::Gaussian { bt },
            _ => cfg.pulse,
        };
        if let Some(v) = e.take_with("sim.bits", |raw| parse_count(raw))? {
            cfg.n_bits = v;
        }
        if let Some(v) = e.take_with("sim.seed", |raw| raw.parse::<u64>().map_err(|err| err.to_string()))? {
            cfg.seed = v;
        }
        if let Some(v) = e.take_optional("sim.pa_backoff_db", finite)? {
            cfg.pa_backoff_db = v;
        }
        if let Some(v) = e.take_with("sim.block_symbols", |raw| {
            let n = parse_count(raw)?;
            usize::try_from(n).map_err(|err| err.to_string())
        })? {
            cfg.block_symbols = v;
        }

        if let Some(v) = e.take("evm_limit_pct", positive)? {
            cfg.evm_limit_pct = v;
        }

        e.finish()?;
        cfg.scenario
            .validate()
            .map_err(|err| ConfigError::Invalid(format!("scenario: {err}")))?;
        let n = u64::from(cfg.scenario.order.bits_per_symbol());
        if cfg.n_bits % n != 0 {
            return Err(ConfigError::Invalid(format!(
                "sim.bits = {} is not a multiple of {n} bits per symbol",
                cfg.n_bits
            )));
        }
        Ok(cfg)
    }
}

struct Entry {
    line: usize,
    value: String,
}

struct Entries {
    map: BTreeMap<String, Entry>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax { line, message: format!("expected `key = value`, got `{content}`") });
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.') {
                return Err(ConfigError::Syntax { line, message: format!("malformed key `{key}`") });
            }
            if value.is_empty() {
                return Err(ConfigError::Key { line, key: key.into(), message: "missing value".into() });
            }
            if let Some(prev) = map.get(key).map(|e: &Entry| e.line) {
                return Err(ConfigError::Key {
                    line,
                    key: key.into(),
                    message: format!("already set on line {prev}"),
                });
            }
            map.insert(key.to_string(), Entry { line, value: value.to_string() });
        }
        Ok(Entries { map })
    }

    fn take_with<T>(
        &mut self,
        key: &str,
        convert: impl FnOnce(&str) -> Result<T, String>,
    ) -> Result<Option<T>, ConfigError> {
        let Some(entry) = self.map.remove(key) else {
            return Ok(None);
        };
        convert(&entry.value)
            .map(Some)
            .map_err(|message| ConfigError::Key { line: entry.line, key: key.into(), message })
    }

    fn take(&mut self, key: &str, check: fn(f64) -> Result<f64, String>) -> Result<Option<f64>, ConfigError> {
        self.take_with(key, |raw| check(parse_number(raw)?))
    }

    /// Like [`Entries::take`], but `none` clears the setting.
    fn take_optional(
        &mut self,
        key: &str,
        check: fn(f64) -> Result<f64, String>,
    ) -> Result<Option<Option<f64>>, ConfigError> {
        self.take_with(key, |raw| match raw {
            "none" => Ok(None),
            _ => check(parse_number(raw)?).map(Some),
        })
    }

    fn take_chain(&mut self, prefix: &str) -> Result<Option<ChainSpec>, ConfigError> {
        let dotted = format!("{prefix}.");
        let keys: Vec<String> = self.map.keys().filter(|k| k.starts_with(&dotted)).cloned().collect();
        if keys.is_empty() {
            return Ok(None);
        }
        let mut indices = BTreeMap::new();
        for key in &keys {
            let line = self.map[key].line;
            let rest = &key[dotted.len()..];
            let bad = || ConfigError::Key {
                line,
                key: key.clone(),
                message: format!("expected `{prefix}.<index>.<field>`"),
            };
            let (index, _) = rest.split_once('.').ok_or_else(bad)?;
            let index: usize = index.parse().map_err(|_| bad())?;
            let first = indices.entry(index).or_insert(line);
            *first = (*first).min(line);
        }
        let mut stages = Vec::new();
        for (expected, (&index, &line)) in indices.iter().enumerate() {
            if index != expected {
                return Err(ConfigError::Key {
                    line,
                    key: format!("{prefix}.{index}"),
                    message: format!("stage numbering skips {prefix}.{expected}"),
                });
            }
            let key = |field: &str| format!("{prefix}.{index}.{field}");
            let name = self
                .take_with(&key("name"), |raw| Ok(raw.to_string()))?
                .unwrap_or_else(|| format!("{prefix}.{index}"));
            let missing = |field: &str| ConfigError::Key { line, key: key(field), message: "required".into() };
            let gain = self.take(&key("gain_db"), finite)?.ok_or_else(|| missing("gain_db"))?;
            let nf = self.take(&key("nf_db"), non_negative)?.ok_or_else(|| missing("nf_db"))?;
            let mut stage = StageSpec::linear(name, GainDb(gain), nf);
            stage.p1db_out = self.take(&key("p1db_dbm"), finite)?.map(PowerDbm);
            stage.oip3 = self.take(&key("oip3_dbm"), finite)?.map(PowerDbm);
            stage
                .validate()
                .map_err(|err| ConfigError::Key { line, key: format!("{prefix}.{index}"), message: err.to_string() })?;
            stages.push(stage);
        }
        // Unrecognised fields of a numbered stage are left for `finish`.
        ChainSpec::new(stages).map(Some).map_err(|err| ConfigError::Invalid(format!("{prefix}: {err}")))
    }

    fn finish(self) -> Result<(), ConfigError> {
        match self.map.into_iter().min_by_key(|(_, e)| e.line) {
            Some((key, e)) => Err(ConfigError::Key { line: e.line, key, message: "unknown key".into() }),
            None => Ok(()),
        }
    }
}

fn parse_number(raw: &str) -> Result<f64, String> {
    raw.parse::<f64>().map_err(|_| format!("`{raw}` is not a number"))
}

/// Integer count; scientific notation such as `1e7` is accepted when exact.
fn parse_count(raw: &str) -> Result<u64, String> {
    if let Ok(n) = raw.parse::<u64>() {
        return Ok(n);
    }
    let x = parse_number(raw)?;
    if x >= 0.0 && x.fract() == 0.0 && x < u64::MAX as f64 {
        Ok(x as u64)
    } else {
        Err(format!("`{raw}` is not a non-negative integer"))
    }
}

fn finite(x: f64) -> Result<f64, String> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err("must be finite".into())
    }
}

fn positive(x: f64) -> Result<f64, String> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(format!("must be positive, got {x}"))
    }
}

fn non_negative(x: f64) -> Result<f64, String> {
    if x >= 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(format!("must be >= 0, got {x}"))
    }
}

fn in_open(x: f64, lo: f64, hi: f64) -> Result<f64, String> {
    if x > lo && x < hi {
        Ok(x)
    } else {
        Err(format!("must lie strictly between {lo} and {hi}, got {x}"))
    }
}
