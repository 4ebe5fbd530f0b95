//! Link-level simulator of a two-cell OFDM downlink.
//!
//! The desired and interfering base stations transmit QPSK/OFDM frames over
//! independent Doppler-faded multipath channels. The mobile receiver estimates
//! both channel transfer functions from orthogonal pilots, jointly detects the
//! desired and interfering symbols per subcarrier by exhaustive
//! maximum-likelihood search, and runs a one-bit closed-loop power control
//! protocol: when the estimated desired-to-interferer power ratio of a frame
//! drops below a threshold, the serving base station boosts the next frame by
//! 3 dB.
//!
//! Modules follow the signal path:
//!
//! - [`modem`] — bit/QPSK mapping, frame assembly, OFDM (I)FFT with guard
//!   interval, transmit power boost
//! - [`channel`] — Rayleigh fading with Doppler, multipath propagation,
//!   interferer scaling, calibrated AWGN
//! - [`estimator`] — pilot-based least-squares channel estimation
//! - [`detector`] — per-subcarrier joint ML detection over all symbol
//!   combinations
//! - [`power_control`] — power-ratio metric, threshold table, feedback loop
//! - [`analysis`] — closed-form BER reference, error counting, power-loss and
//!   gain bookkeeping
//! - [`harness`] — configuration, the per-trial simulation loop, parameter
//!   sweeps and CSV output

pub mod analysis;
pub mod channel;
pub mod detector;
pub mod estimator;
pub mod harness;
pub mod modem;
pub mod power_control;

pub use num_complex::Complex64;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input has the wrong length or shape.
    #[error("size mismatch: {0}")]
    Size(String),
    /// Invalid configuration value or combination.
    #[error("configuration error: {0}")]
    Config(String),
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Power ratio is undefined because the interferer estimate has zero energy.
    #[error("undefined power ratio: interferer estimate energy is zero")]
    UndefinedPowerRatio,
    /// A numerical result left its valid range at runtime.
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
