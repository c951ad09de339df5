//! Link-budget analysis and complex-baseband Monte-Carlo simulation of a
//! 1 Gbps, 256-QAM, 5 GHz point-to-point wireless link.
//!
//! The crate is `no_std` (it needs `alloc`) and is organised bottom-up:
//!
//! - [`units`]: dB/linear power and gain conversions, wavelength
//! - [`modem`]: Gray-coded square QAM, hard demapping, EVM, closed-form BER
//! - [`rfchain`]: RF stage models, Friis noise cascade, cubic PA model
//! - [`channel`]: free-space path loss, thermal noise floor, AWGN
//! - [`linkbudget`]: required SNR, sensitivity, range and FCC power check
//! - [`simulate`]: pulse shaping, Welch PSD and the block-parallel link simulation
//!
//! IO, configuration files and threading live in the companion `qamlink` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod channel;
pub mod linkbudget;
pub mod modem;
pub mod rfchain;
pub mod simulate;
pub mod units;

mod error;

pub use error::{Error, Result};
