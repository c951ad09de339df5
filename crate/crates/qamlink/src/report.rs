//! Text, JSON and CSV renderings of budgets, simulation results and sweeps.

use std::io;
use std::path::Path;

use num_complex::Complex64;
use serde_json::{json, Value};

use qamlink_core::linkbudget::LinkBudgetReport;
use qamlink_core::simulate::{ChannelMode, PulseShape, SimConfig, SimResult};

/// `key: value` lines; dB and dBm to two decimals, metres to three.
pub fn budget_text(r: &LinkBudgetReport) -> String {
    let rows = [
        ("bandwidth_hz", format!("{}", r.bandwidth_hz)),
        ("symbol_rate", format!("{}", r.symbol_rate)),
        ("required_ebn0_db", format!("{:.2}", r.required_ebn0_db)),
        ("required_snr_db", format!("{:.2}", r.required_snr_db)),
        ("rx_noise_figure_db", format!("{:.2}", r.rx_noise_figure_db)),
        ("noise_floor_dbm", format!("{:.2}", r.noise_floor_dbm)),
        ("sensitivity_dbm", format!("{:.2}", r.sensitivity_dbm)),
        ("tx_power_dbm", format!("{:.2}", r.tx_power_dbm)),
        ("path_gain_db", format!("{:.2}", r.path_gain_db)),
        ("rx_power_dbm", format!("{:.2}", r.rx_power_dbm)),
        ("link_margin_db", format!("{:.2}", r.link_margin_db)),
        ("range_reference_dbm", format!("{:.2}", r.range_reference_dbm)),
        ("max_distance_m", format!("{:.3}", r.max_distance_m)),
        ("max_distance_at_sensitivity_m", format!("{:.3}", r.max_distance_at_sensitivity_m)),
        ("fcc_limit_dbm", format!("{:.2}", r.fcc_limit_dbm)),
        ("fcc_compliant", r.fcc_compliant.to_string()),
    ];
    rows.iter().map(|(k, v)| format!("{k}: {v}\n")).collect()
}

pub fn budget_json(r: &LinkBudgetReport) -> Value {
    json!({
        "link_budget": {
            "bandwidth_hz": r.bandwidth_hz,
            "symbol_rate": r.symbol_rate,
            "required_ebn0_db": r.required_ebn0_db,
            "required_snr_db": r.required_snr_db,
            "rx_noise_figure_db": r.rx_noise_figure_db,
            "noise_floor_dbm": r.noise_floor_dbm,
            "sensitivity_dbm": r.sensitivity_dbm,
        },
        "link": {
            "tx_power_dbm": r.tx_power_dbm,
            "path_gain_db": r.path_gain_db,
            "rx_power_dbm": r.rx_power_dbm,
            "link_margin_db": r.link_margin_db,
        },
        "range": {
            "reference_dbm": r.range_reference_dbm,
            "max_distance_m": r.max_distance_m,
            "max_distance_at_sensitivity_m": r.max_distance_at_sensitivity_m,
        },
        "compliance": {
            "fcc_compliant": r.fcc_compliant,
            "fcc_limit_dbm": r.fcc_limit_dbm,
            "fcc_limit_rounded_dbm": r.fcc_limit_rounded_dbm,
        },
    })
}

/// Infinite or NaN values become `null`.
fn number(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

pub fn simulation_json(cfg: &SimConfig, r: &SimResult, evm_limit_pct: f64) -> Value {
    let pulse = match cfg.pulse {
        PulseShape::Rectangular => json!({ "shape": "rectangular" }),
        PulseShape::Gaussian { bt } => json!({ "shape": "gaussian", "bt": bt }),
    };
    let channel = match cfg.channel_mode {
        ChannelMode::Link => "link",
        ChannelMode::FixedEbN0(_) => "fixed_ebn0",
        ChannelMode::Noiseless => "noiseless",
    };
    let target = cfg.scenario.target_ber;
    json!({
        "config": {
            "modulation": cfg.scenario.order.points(),
            "bit_rate_bps": cfg.scenario.bit_rate,
            "samples_per_symbol": cfg.samples_per_symbol,
            "pulse": pulse,
            "pa_backoff_db": cfg.pa_backoff_db,
            "linear_pa": cfg.linear_pa,
            "channel": channel,
            "distance_m": cfg.scenario.channel.distance_m,
            "seed": cfg.seed,
            "n_bits": cfg.n_bits,
        },
        "ber": {
            "measured": r.measured_ber,
            "ci_low": r.ber_confidence.0,
            "ci_high": r.ber_confidence.1,
            "n_bits_run": r.n_bits_run,
            "n_bit_errors": r.n_bit_errors,
            "ebn0_db": number(r.ebn0_db),
            "target": target,
            "upper_bound_below_target": r.ber_confidence.1 < target,
        },
        "evm": {
            "tx_pct": r.tx_evm_pct,
            "rx_pct": r.rx_evm_pct,
            "limit_pct": evm_limit_pct,
            "tx_within_limit": r.tx_evm_pct <= evm_limit_pct,
        },
        "tx_power_dbm": r.tx_power_dbm,
        "spectrum": {
            "bins": r.spectrum.density.len(),
            "bin_width_hz": r.spectrum.bin_width(),
            "segments": r.spectrum.segments,
            "total_power_w": r.spectrum.total_power(),
        },
    })
}

/// Compact BER notation: `0` or three significant decimals.
pub fn format_ber(p: f64) -> String {
    if p == 0.0 {
        "0".into()
    } else {
        format!("{p:.3e}")
    }
}

pub fn simulation_summary(r: &SimResult) -> String {
    format!(
        "ber {} (95% CI {}..{}) tx_evm {:.2}% rx_evm {:.2}% bits {} errors {}",
        format_ber(r.measured_ber),
        format_ber(r.ber_confidence.0),
        format_ber(r.ber_confidence.1),
        r.tx_evm_pct,
        r.rx_evm_pct,
        r.n_bits_run,
        r.n_bit_errors,
    )
}

pub fn write_json(path: &Path, value: &Value) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> io::Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()
}

pub fn write_psd(path: &Path, psd: &[(f64, f64)]) -> io::Result<()> {
    write_rows(path, &["frequency_hz", "power_db"], psd.iter().map(|&(f, p)| [f.to_string(), p.to_string()]))
}

pub fn write_constellation(path: &Path, points: &[Complex64]) -> io::Result<()> {
    write_rows(path, &["i", "q"], points.iter().map(|z| [z.re.to_string(), z.im.to_string()]))
}

/// One waterfall point; the measured fields are absent for theory-only sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub ebn0_db: f64,
    pub ber_theory: f64,
    pub measured: Option<(f64, f64, f64)>,
}

pub fn write_waterfall(path: &Path, rows: &[SweepRow]) -> io::Result<()> {
    let header = ["ebn0_db", "ber_theory", "ber_measured", "ci_low", "ci_high"];
    write_rows(
        path,
        &header,
        rows.iter().map(|r| {
            let (m, lo, hi) = match r.measured {
                Some((m, lo, hi)) => (format!("{m:e}"), format!("{lo:e}"), format!("{hi:e}")),
                None => Default::default(),
            };
            [r.ebn0_db.to_string(), format!("{:e}", r.ber_theory), m, lo, hi]
        }),
    )
}
