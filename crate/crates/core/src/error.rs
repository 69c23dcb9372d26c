use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{what} = {value} is outside [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed interval set: {0}")]
    MalformedIntervals(String),

    #[error("unbounded {0} ratio: price multiplier is zero under rate pressure")]
    Unbounded(&'static str),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("malformed parameter packet: {0}")]
    Packet(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_range(what: &'static str, value: f64, lo: f64, hi: f64) -> Result<()> {
    // Small slack so that bounds computed as `alpha - delta` round-trip.
    let slack = 1e-12 * (1.0 + hi.abs());
    if !value.is_finite() || value < lo - slack || value > hi + slack {
        return Err(Error::OutOfRange { what, value, lo, hi });
    }
    Ok(())
}
