use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("unsupported modulation order {0} (expected 4, 16, 64 or 256)")]
    UnsupportedOrder(usize),

    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("bit count {len} is not a multiple of {bits_per_symbol} bits per symbol")]
    RaggedBits { len: usize, bits_per_symbol: u32 },

    #[error("sequence lengths differ or are empty (reference {reference}, measured {measured})")]
    LengthMismatch { reference: usize, measured: usize },

    #[error("reference sequence has zero power")]
    ZeroReferencePower,

    #[error("output power {p_out_dbm} dBm exceeds the intercept point {oip3_dbm} dBm")]
    BeyondIntercept { p_out_dbm: f64, oip3_dbm: f64 },

    #[error("bisection did not converge after {0} iterations")]
    NoConvergence(u32),

    #[error("input too short: {len} samples, need at least {needed}")]
    TooShort { len: usize, needed: usize },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64) -> Self {
        Error::Domain { what, value }
    }
}
