//! Multi-threaded driver for the block-partitioned simulation.

use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;

use qamlink_core::simulate::{BlockOutcome, SimConfig, SimPlan, SimResult, Spectrum};

/// Caps the number of simulation workers.
pub const THREADS_ENV: &str = "QAMLINK_THREADS";

/// The available parallelism, capped by [`THREADS_ENV`] when that is set
/// to a positive integer.
pub fn worker_count() -> usize {
    let available = thread::available_parallelism().map_or(1, NonZeroUsize::get);
    match std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        Some(n) if n > 0 => n.min(available),
        _ => available,
    }
}

/// Runs every block of `plan` on up to `workers` threads. The result does
/// not depend on `workers`.
pub fn run_plan(plan: &SimPlan, workers: usize) -> qamlink_core::Result<SimResult> {
    let n_blocks = plan.n_blocks();
    let workers = workers.clamp(1, n_blocks.max(1));
    if workers == 1 {
        return plan.finish((0..n_blocks).map(|i| plan.run_block(i)));
    }
    let next = AtomicUsize::new(0);
    let outcomes: Vec<BlockOutcome> = thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                scope.spawn(|| {
                    let mut mine = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= n_blocks {
                            break mine;
                        }
                        mine.push(plan.run_block(i));
                    }
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("simulation worker panicked"))
            .collect()
    });
    plan.finish(outcomes)
}

pub fn run_simulation(config: SimConfig, workers: usize) -> qamlink_core::Result<SimResult> {
    let plan = SimPlan::new(config)?;
    log::debug!("{} blocks on {} workers", plan.n_blocks(), workers);
    run_plan(&plan, workers)
}

/// Transmit-only spectrum of the first block.
pub fn transmit_spectrum(config: SimConfig) -> qamlink_core::Result<Spectrum> {
    Ok(SimPlan::new(config)?.transmit_spectrum(0))
}
