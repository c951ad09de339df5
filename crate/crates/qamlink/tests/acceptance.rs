//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::Rng;

use qamlink::runner;
use qamlink::RunConfig;
use qamlink_core::channel::{friis_received_power, rng_stream, ChannelSpec};
use qamlink_core::linkbudget::max_distance;
use qamlink_core::modem::{
    demap_hard, ebn0_for_ber, map_bits, q_function, theoretical_ber, ConstellationMap, QamOrder,
};
use qamlink_core::rfchain::{cascade, oip3_from_p1db, ChainSpec, StageSpec};
use qamlink_core::simulate::{ChannelMode, PulseShape, SimConfig, SimPlan, Z_95};
use qamlink_core::units::{GainDb, PowerDbm};

type Verdict = (bool, String);

fn paper_cfg() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/paper.cfg")
}

fn paper() -> RunConfig {
    RunConfig::load(&paper_cfg()).expect("paper.cfg parses")
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn qamlink(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_qamlink"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "off")
        .output()
        .expect("spawn qamlink")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).expect("report written")).expect("valid JSON")
}

fn budget_reproduction() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let cfg = paper_cfg();
    let o = qamlink(&["budget", "--config", cfg.to_str().unwrap()], dir.path());
    let doc = json(&dir.path().join("budget.json"));
    let get = |section: &str, key: &str| doc[section][key].as_f64().unwrap();
    let snr = get("link_budget", "required_snr_db");
    let sens = get("link_budget", "sensitivity_dbm");
    let range = get("range", "max_distance_m");
    let rx = get("link", "rx_power_dbm");
    let fcc = doc["compliance"]["fcc_compliant"].as_bool().unwrap();
    let text = String::from_utf8_lossy(&o.stdout);
    let ok = o.status.code() == Some(0)
        && within(snr, 29.41, 0.01)
        && within(sens, -54.37, 0.01)
        && within(range, 1.79, 0.01)
        && within(rx, -28.2, 0.15)
        && fcc
        && text.lines().any(|l| l == "sensitivity_dbm: -54.37");
    (ok, format!("snr {snr:.3} dB, sensitivity {sens:.3} dBm, range {range:.4} m, rx {rx:.3} dBm, fcc {fcc}"))
}

fn oip3_arithmetic() -> Verdict {
    let a = oip3_from_p1db(PowerDbm(32.0)).0;
    let b = oip3_from_p1db(PowerDbm(30.946)).0;
    (a == 42.6 && b == 41.546, format!("{a} and {b} dBm"))
}

/// Noise power walked through the chain in watts per hertz, one stage at a
/// time, then compared with the noise the input alone would produce.
fn brute_force_nf(stages: &[(f64, f64)]) -> f64 {
    let kt0 = 1.380_649e-23 * 290.0;
    let mut noise = kt0;
    let mut gain = 1.0;
    for &(g_db, nf_db) in stages {
        let g = 10f64.powf(g_db / 10.0);
        let f = 10f64.powf(nf_db / 10.0);
        noise = (noise + kt0 * (f - 1.0)) * g;
        gain *= g;
    }
    10.0 * (noise / (kt0 * gain)).log10()
}

fn cascade_oracle() -> Verdict {
    let mut rng = rng_stream(2024, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(2..=5);
        let stages: Vec<(f64, f64)> =
            (0..n).map(|_| (rng.random_range(-20.0..40.0), rng.random_range(0.0..20.0))).collect();
        let chain =
            ChainSpec::new(stages.iter().map(|&(g, nf)| StageSpec::linear("s", GainDb(g), nf)).collect()).unwrap();
        worst = worst.max((cascade(&chain).total_nf_db - brute_force_nf(&stages)).abs());
    }
    let bom = cascade(&ChainSpec::default_rx()).total_nf_db;
    let ok = worst <= 1e-9 && (5.5..=6.5).contains(&bom) && bom <= 5.97 + 0.01 && bom < 6.24;
    (ok, format!("worst deviation {worst:.1e} dB over 1000 chains, BOM NF {bom:.3} dB"))
}

/// Exact bit error rate of Gray-labelled square QAM: each axis is an
/// L-level PAM whose decision regions are integrated one by one.
fn exact_gray_ber(order: QamOrder, ebn0_db: f64) -> f64 {
    let l = order.side();
    let bits_per_axis = l.trailing_zeros() as f64;
    let m = order.points() as f64;
    let eb = 2.0 * (m - 1.0) / 3.0 / (2.0 * bits_per_axis);
    let sigma = (eb / 10f64.powf(ebn0_db / 10.0) / 2.0).sqrt();
    let level = |j: usize| 2.0 * j as f64 - (l as f64 - 1.0);
    let tail = |x: f64| if x == f64::NEG_INFINITY { 1.0 } else if x == f64::INFINITY { 0.0 } else { q_function(x) };
    let mut flipped = 0.0;
    for sent in 0..l {
        for decided in (0..l).filter(|&r| r != sent) {
            let lo = if decided == 0 { f64::NEG_INFINITY } else { level(decided) - 1.0 };
            let hi = if decided == l - 1 { f64::INFINITY } else { level(decided) + 1.0 };
            let p = tail((lo - level(sent)) / sigma) - tail((hi - level(sent)) / sigma);
            flipped += p * f64::from(((sent ^ (sent >> 1)) ^ (decided ^ (decided >> 1))).count_ones());
        }
    }
    flipped / (l as f64 * bits_per_axis)
}

/// Wilson score interval for a success fraction `p` observed over `n` trials.
fn wilson_around(p: f64, n: f64) -> (f64, f64) {
    let z2 = Z_95 * Z_95;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = Z_95 / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    (centre - half, centre + half)
}

fn monte_carlo_ber() -> Verdict {
    const BITS: u64 = 2_000_000;
    let workers = runner::worker_count();
    let mut inside = 0;
    let mut inside_exact = 0;
    let mut cells = 0;
    let mut misses = Vec::new();
    for order in QamOrder::ALL {
        for k in 0..10 {
            let target = 10f64.powf(-1.0 - 3.0 * k as f64 / 9.0);
            let ebn0 = ebn0_for_ber(order, target).unwrap();
            let seed = 1000 + cells as u64;
            let r = runner::run_simulation(SimConfig::calibration(order, ebn0, BITS, seed), workers).unwrap();
            let (lo, hi) = wilson_around(theoretical_ber(order, ebn0), BITS as f64);
            let (elo, ehi) = wilson_around(exact_gray_ber(order, ebn0.0), BITS as f64);
            let ber = r.measured_ber;
            cells += 1;
            inside_exact += usize::from(elo <= ber && ber <= ehi);
            if lo <= ber && ber <= hi {
                inside += 1;
            } else {
                misses.push(format!("{order}@{:.2}dB {ber:.4e} not in [{lo:.4e}, {hi:.4e}]", ebn0.0));
            }
        }
    }
    let fraction = inside as f64 / cells as f64;
    let mut detail = format!(
        "{inside}/{cells} cells inside the 95% interval around the closed form (need 90%); \
         around the exact Gray BER instead: {inside_exact}/{cells}"
    );
    if !misses.is_empty() {
        detail += &format!(", outside: {}", misses.join(", "));
    }
    (fraction >= 0.9, detail)
}

fn design_target_ber() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let cfg = paper_cfg();
    let o = qamlink(&["simulate", "--config", cfg.to_str().unwrap(), "--bits", "10000000"], dir.path());
    let doc = json(&dir.path().join("simulation.json"));
    let ber = &doc["ber"];
    let recorded = ber["upper_bound_below_target"].as_bool();
    let upper = ber["ci_high"].as_f64().unwrap();
    let bits = ber["n_bits_run"].as_u64().unwrap();
    let ok = o.status.code() == Some(0) && bits == 10_000_000 && recorded == Some(upper < 1e-5);
    let verdict = if upper < 1e-5 { "target met" } else { "target NOT met" };
    (
        ok,
        format!(
            "comparison recorded: Wilson upper bound {upper:.3e} vs 1e-5 over {bits} bits, {verdict} \
             (measured {:.3e}, {} errors)",
            ber["measured"].as_f64().unwrap(),
            ber["n_bit_errors"]
        ),
    )
}

fn spectrum_nulls() -> Verdict {
    let mut run = paper();
    run.pulse = PulseShape::Rectangular;
    let s = runner::transmit_spectrum(run.sim_config(ChannelMode::Link, false)).unwrap();
    let rel = s.relative_db();
    let df = s.bin_width();
    let mut ok = true;
    let mut notes = Vec::new();
    for f0 in [-125e6, 125e6] {
        let (f_min, depth) = rel
            .iter()
            .filter(|(f, _)| (f - f0).abs() <= 10e6)
            .fold((f64::NAN, f64::INFINITY), |acc, &(f, p)| if p < acc.1 { (f, p) } else { acc });
        ok &= (f_min - f0).abs() <= df && depth <= -20.0;
        notes.push(format!("null at {:.3} MHz, {depth:.1} dB", f_min / 1e6));
    }
    (ok, format!("{} (bin {:.3} MHz)", notes.join("; "), df / 1e6))
}

fn evm_bracket() -> Verdict {
    let run = paper();
    let base = run.backoff_db();
    let evm_at = |extra: f64| {
        let mut cfg = run.sim_config(ChannelMode::Link, false);
        cfg.pa_backoff_db = base + extra;
        runner::run_simulation(cfg, runner::worker_count()).unwrap().tx_evm_pct
    };
    let evm: Vec<f64> = [0.0, 3.0, 6.0].into_iter().map(evm_at).collect();
    let ok = (0.5..=6.0).contains(&evm[0]) && evm[0] > evm[1] && evm[1] > evm[2];
    (
        ok,
        format!(
            "tx EVM {:.3}% at {base:.2} dB back-off, {:.3}% at +3 dB, {:.3}% at +6 dB ({:.3}% at +12 dB, linear-PA floor)",
            evm[0],
            evm[1],
            evm[2],
            evm_at(12.0)
        ),
    )
}

fn property_suites() -> Verdict {
    let mut failures = Vec::new();
    let mut rng = rng_stream(77, 0);

    for order in QamOrder::ALL {
        let map = ConstellationMap::new(order);
        let pts = map.points();
        let energy = pts.iter().map(|z| z.norm_sqr()).sum::<f64>() / pts.len() as f64;
        if (energy - 1.0).abs() > 1e-12 {
            failures.push(format!("{order} energy {energy}"));
        }
        let d = map.min_distance();
        for a in 0..pts.len() {
            for b in a + 1..pts.len() {
                if ((pts[a] - pts[b]).norm() - d).abs() < 1e-9 && (a ^ b).count_ones() != 1 {
                    failures.push(format!("{order} neighbours {a} {b}"));
                }
            }
        }
        let bits: Vec<u8> = (0..order.bits_per_symbol() as usize * 5000).map(|_| rng.random::<bool>() as u8).collect();
        let syms = map_bits(&bits, &map).unwrap();
        let rotated: Vec<Complex64> = syms.iter().map(|&z| z + Complex64::new(0.3 * d, -0.3 * d)).collect();
        if demap_hard(&syms, &map) != bits || demap_hard(&rotated, &map) != bits {
            failures.push(format!("{order} roundtrip"));
        }
    }

    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let mut ch = ChannelSpec::isotropic(rng.random_range(1e9..10e9), rng.random_range(0.5..1e4)).unwrap();
        ch.tx_antenna_gain = GainDb(rng.random_range(0.0..20.0));
        ch.rx_antenna_gain = GainDb(rng.random_range(0.0..20.0));
        let p_tx = PowerDbm(rng.random_range(-10.0..40.0));
        let back = max_distance(p_tx, friis_received_power(p_tx, &ch), &ch).unwrap();
        worst = worst.max((20.0 * (back / ch.distance_m).log10()).abs());
    }
    if worst > 1e-9 {
        failures.push(format!("friis inverse {worst:.1e} dB"));
    }

    let mut cfg = paper().sim_config(ChannelMode::Link, false);
    cfg.n_bits = 800_000;
    cfg.block_symbols = 5000;
    let plan = SimPlan::new(cfg).unwrap();
    let one = runner::run_plan(&plan, 1).unwrap();
    for workers in [2, 3, 8] {
        if runner::run_plan(&plan, workers).unwrap() != one {
            failures.push(format!("{workers} workers differ"));
        }
    }

    let ok = failures.is_empty();
    let detail = if ok {
        format!("Gray, energy, roundtrip over 4 orders; Friis inverse worst {worst:.1e} dB; {} blocks identical on 1/2/3/8 workers", plan.n_blocks())
    } else {
        failures.join(", ")
    };
    (ok, detail)
}

fn main() {
    let criteria: [(u8, &str, fn() -> Verdict, Duration); 8] = [
        (1, "link budget reproduction", budget_reproduction, Duration::from_secs(1)),
        (2, "OIP3 arithmetic", oip3_arithmetic, Duration::from_secs(1)),
        (3, "cascade oracle", cascade_oracle, Duration::from_secs(5)),
        (4, "Monte-Carlo BER vs theory", monte_carlo_ber, Duration::from_secs(300)),
        (5, "design-target BER comparison", design_target_ber, Duration::from_secs(900)),
        (6, "spectrum nulls", spectrum_nulls, Duration::from_secs(30)),
        (7, "EVM bracket", evm_bracket, Duration::from_secs(60)),
        (8, "property suites", property_suites, Duration::from_secs(60)),
    ];
    let mut all = true;
    for (id, name, check, limit) in criteria {
        let start = Instant::now();
        let (ok, detail) = match catch_unwind(AssertUnwindSafe(check)) {
            Ok(v) => v,
            Err(_) => (false, "panicked".into()),
        };
        let elapsed = start.elapsed();
        let in_time = elapsed <= limit;
        let pass = ok && in_time;
        all &= pass;
        println!(
            "{} {id} {name}: {detail} [{:.2} s, limit {} s{}]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { ", too slow" }
        );
    }
    if !all {
        std::process::exit(1);
    }
}
