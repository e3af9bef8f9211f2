//! Discrete-gate Monte Carlo simulation of a polarization-encoded BB84 link
//! under bright-light detector-control ("blinding") attacks.
//!
//! The simulated channel is Alice -> (optional Eve) -> Bob, advanced one
//! detector gate at a time. Three receiver front-ends are modeled:
//!
//! * passive beam-splitter basis choice, four detectors,
//! * active PEM basis choice, two detectors, one random bit per gate,
//! * exclusive mirror basis choice, four detectors, one random bit per gate,
//!   with all incoming light steered into the selected basis.
//!
//! Eve's repertoire covers intercept-resend, full and partial CW blinding
//! with faked-state bright pulses, and direct control of a compromised
//! receiver RNG. The defense side estimates the coincident-detection
//! probability, calibrates its dark baseline, and turns the excess into an
//! upper bound on leaked key bits fed to privacy amplification.
//!
//! All photon-number and probability arithmetic is generic over a floating
//! scalar (see [`scalar::Scalar`]); `f64` aliases for the concrete types are
//! exported at the crate root and used by the command-line front-end.

pub mod alice;
pub mod config;
pub mod defense;
pub mod detector;
pub mod eve;
pub mod optics;
pub mod output;
pub mod protocol;
pub mod receiver;
pub mod rng;
pub mod scalar;

use thiserror::Error as ThisError;

/// Default floating precision for simulation runs.
pub type Real = f64;

/// Simulation configuration at default precision.
pub type Config = config::SimulationConfig<Real>;
/// Per-session security report at default precision.
pub type Report = defense::DefenseReport<Real>;
/// Session transcript at default precision.
pub type Transcript = protocol::SessionTranscript<Real>;

/// Errors surfaced by configuration, modeling, and output stages.
#[derive(Debug, ThisError)]
pub enum Error {
    /// A parameter is outside its allowed range or inconsistent with the run.
    #[error("invalid value for {field}: {message}")]
    InvalidParameter { field: String, message: String },

    /// Config file problems: missing file, malformed syntax, unknown key.
    #[error("config file {path}: {message}")]
    ConfigFile { path: String, message: String },

    /// Unknown preset name on the command line.
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),

    /// An operation tried to control a private random source.
    #[error("private source not controllable (stream '{0}')")]
    PrivateSource(String),

    /// Filesystem failures while writing results.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: &str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
