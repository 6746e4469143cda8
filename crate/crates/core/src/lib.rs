//! Generalized fast-convolution (FC) filtered OFDM.
//!
//! The transmitter chain runs low-rate CP-OFDM modulators per subband and
//! feeds them through a windowed FC synthesis filter bank:
//!
//! ```text
//!  x_m --> [TD analysis win] --> FFT L_m --> [FD win d_m] --+
//!                                                           +--> IFFT N --> [TD synthesis win s] --> OLA --> z
//!  x_k --> [TD analysis win] --> FFT L_k --> [FD win d_k] --+
//! ```
//!
//! Receivers are plain CP-OFDM demodulators, either at the high output rate
//! or after decimation. The [`metrics`] module measures spectral confinement
//! and in-band error, and [`optimizer`] tunes all three window families
//! jointly.

pub mod baselines;
pub mod complexity;
mod dsp;
pub mod fcfb;
pub mod metrics;
pub mod numerology;
pub mod ofdm;
pub mod optimizer;
pub mod scenario;
pub mod windowing;

pub use num_complex::Complex64;

/// Errors raised across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("length mismatch in {what}: expected {expected}, got {got}")]
    Length {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("window construction: {0}")]
    Window(String),
    #[error("measurement: {0}")]
    Measurement(String),
    #[error("optimization: {0}")]
    Optimization(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
