//! Subcommands. Every command loads and checks its whole configuration
//! before it creates the output directory, so a bad config leaves nothing
//! behind.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use qamlink_core::linkbudget::analyze;
use qamlink_core::modem::{theoretical_ber, EbN0, QamOrder};
use qamlink_core::simulate::{ChannelMode, SimConfig};
use qamlink_core::units::PowerDbm;

use crate::config::RunConfig;
use crate::report::{self, SweepRow};
use crate::runner;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_NONCOMPLIANT: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "qamlink", version, about = "Link budget and Monte-Carlo simulation of a 256-QAM 5 GHz link")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form link budget; exits 2 when the transmit power breaks the FCC limit.
    Budget(Common),
    /// End-to-end simulation: BER, EVM, spectrum and constellations.
    Simulate(Common),
    /// BER against Eb/N0, closed form and optionally measured.
    BerSweep(SweepArgs),
    /// Spectrum of the transmitter output alone.
    Spectrum(Common),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Scenario file; the reference design when omitted.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    #[arg(long, value_name = "N")]
    pub bits: Option<u64>,
    /// Fixed Eb/N0 in dB instead of the link-derived noise.
    #[arg(long, value_name = "DB", allow_negative_numbers = true)]
    pub ebn0: Option<f64>,
    /// Noiseless channel.
    #[arg(long)]
    pub no_noise: bool,
    /// Drop every amplifier nonlinearity.
    #[arg(long)]
    pub linear_pa: bool,
    #[arg(long, value_name = "DBM", allow_negative_numbers = true)]
    pub tx_power: Option<f64>,
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// Constellation size; the config's modulation when omitted.
    #[arg(long, value_name = "M")]
    pub modulation: Option<usize>,
    #[arg(long, value_name = "DB", default_value_t = 0.0, allow_negative_numbers = true)]
    pub from: f64,
    #[arg(long, value_name = "DB", default_value_t = 30.0, allow_negative_numbers = true)]
    pub to: f64,
    #[arg(long, value_name = "DB", default_value_t = 1.0)]
    pub step: f64,
    /// Closed-form column only.
    #[arg(long)]
    pub theory_only: bool,
}

impl Common {
    fn load(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(bits) = self.bits {
            let n = u64::from(cfg.scenario.order.bits_per_symbol());
            if bits == 0 || bits % n != 0 {
                bail!("--bits {bits} must be a positive multiple of {n} bits per symbol");
            }
            cfg.n_bits = bits;
        }
        if let Some(p) = self.tx_power {
            if !p.is_finite() {
                bail!("--tx-power must be finite");
            }
            cfg.scenario.tx_power = PowerDbm(p);
        }
        if let Some(e) = self.ebn0 {
            if !e.is_finite() {
                bail!("--ebn0 must be finite");
            }
        }
        Ok(cfg)
    }

    fn channel_mode(&self) -> ChannelMode {
        match (self.no_noise, self.ebn0) {
            (true, _) => ChannelMode::Noiseless,
            (false, Some(e)) => ChannelMode::FixedEbN0(EbN0(e)),
            (false, None) => ChannelMode::Link,
        }
    }

    fn sim_config(&self) -> anyhow::Result<(SimConfig, RunConfig)> {
        let run = self.load()?;
        let cfg = run.sim_config(self.channel_mode(), self.linear_pa);
        cfg.validate()?;
        Ok((cfg, run))
    }
}

/// Runs one subcommand and returns the process exit code.
pub fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Budget(args) => budget(&args),
        Command::Simulate(args) => simulate(&args),
        Command::BerSweep(args) => ber_sweep(&args),
        Command::Spectrum(args) => spectrum(&args),
    }
}

fn create_out(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn budget(args: &Common) -> anyhow::Result<u8> {
    let mut cfg = args.load()?;
    if let Some(e) = args.ebn0 {
        cfg.scenario.ebn0_override = Some(EbN0(e));
    }
    let r = analyze(&cfg.scenario)?;
    create_out(&args.out)?;
    report::write_json(&args.out.join("budget.json"), &report::budget_json(&r))?;
    print!("{}", report::budget_text(&r));
    if r.fcc_compliant {
        Ok(EXIT_OK)
    } else {
        eprintln!(
            "transmit power {:.2} dBm exceeds the {:.2} dBm limit",
            r.tx_power_dbm, r.fcc_limit_dbm
        );
        Ok(EXIT_NONCOMPLIANT)
    }
}

fn simulate(args: &Common) -> anyhow::Result<u8> {
    let (cfg, run) = args.sim_config()?;
    let workers = runner::worker_count();
    let r = runner::run_simulation(cfg.clone(), workers)?;
    create_out(&args.out)?;
    let doc = report::simulation_json(&cfg, &r, run.evm_limit_pct);
    report::write_json(&args.out.join("simulation.json"), &doc)?;
    report::write_psd(&args.out.join("psd.csv"), &r.psd)?;
    report::write_constellation(&args.out.join("tx_constellation.csv"), &r.tx_constellation)?;
    report::write_constellation(&args.out.join("rx_constellation.csv"), &r.rx_constellation)?;
    println!("{}", report::simulation_summary(&r));
    Ok(EXIT_OK)
}

/// `from, from + step, ...` up to `to` inclusive, rounded to nano-dB so
/// accumulated steps print cleanly.
pub fn sweep_points(from: f64, to: f64, step: f64) -> anyhow::Result<Vec<f64>> {
    if !(from.is_finite() && to.is_finite() && step > 0.0 && step.is_finite()) {
        bail!("sweep needs finite --from/--to and a positive --step");
    }
    if to < from {
        bail!("--to {to} is below --from {from}");
    }
    let n = ((to - from) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| ((from + i as f64 * step) * 1e9).round() / 1e9).collect())
}

fn ber_sweep(args: &SweepArgs) -> anyhow::Result<u8> {
    let mut cfg = args.common.load()?;
    if let Some(m) = args.modulation {
        cfg.scenario.order = QamOrder::new(m)?;
    }
    let order = cfg.scenario.order;
    let points = sweep_points(args.from, args.to, args.step)?;
    let n = u64::from(order.bits_per_symbol());
    let bits = cfg.n_bits / n * n;
    if !args.theory_only && bits == 0 {
        bail!("too few bits for one {order} symbol");
    }
    let workers = runner::worker_count();
    let mut rows = Vec::with_capacity(points.len());
    for (i, &e) in points.iter().enumerate() {
        let ber_theory = theoretical_ber(order, EbN0(e));
        let measured = if args.theory_only {
            None
        } else {
            let mut sim = SimConfig::calibration(order, EbN0(e), bits, cfg.seed.wrapping_add(i as u64));
            sim.samples_per_symbol = cfg.samples_per_symbol;
            sim.block_symbols = cfg.block_symbols;
            let r = runner::run_simulation(sim, workers)?;
            log::info!("{e} dB: {}", report::simulation_summary(&r));
            Some((r.measured_ber, r.ber_confidence.0, r.ber_confidence.1))
        };
        rows.push(SweepRow { ebn0_db: e, ber_theory, measured });
    }
    create_out(&args.common.out)?;
    let path = args.common.out.join("waterfall.csv");
    report::write_waterfall(&path, &rows)?;
    println!("{} points for {order} written to {}", rows.len(), path.display());
    Ok(EXIT_OK)
}

fn spectrum(args: &Common) -> anyhow::Result<u8> {
    let (cfg, _) = args.sim_config()?;
    let s = runner::transmit_spectrum(cfg)?;
    let psd = s.relative_db();
    create_out(&args.out)?;
    report::write_psd(&args.out.join("psd.csv"), &psd)?;
    println!(
        "{} bins of {:.3} MHz, {} segments, mean power {:.2} dBm",
        psd.len(),
        s.bin_width() / 1e6,
        s.segments,
        10.0 * (s.total_power() * 1e3).log10()
    );
    Ok(EXIT_OK)
}
