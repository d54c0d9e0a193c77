//! Desk-scale laboratory for calibrated multi-agent intrinsic curiosity.
//!
//! The crate is organized around a small set of numerical subsystems:
//!
//! * [`numerics`] — dense linear algebra, Gaussian calculus, and the
//!   vec/Kronecker/determinant identities everything else leans on.
//! * [`linear_mdp`] — Bayesian posterior over a linear transition model,
//!   the exact information-gain intrinsic reward, the LSVI-UCB bonus, and
//!   the numerical certification of their sandwich relation.
//! * [`robust`] — the log-ratio statistic, its closed-form moments, the
//!   moment ambiguity set, and the second-order-cone exploit losses.
//! * [`calibration`] — InfoNCE mutual-information surrogates, an exact
//!   discrete oracle, and the context-calibrated mean.
//! * [`memory`] — the graph intention memory, its pretraining losses, and
//!   a recurrent variant for ablations.
//! * [`model`] — the composed curiosity model: encoders, explore loss,
//!   total loss with analytic gradients, and the deployable reward.
//! * [`gridworld`] — a deterministic, partially observable multi-agent
//!   grid with sparse success-only rewards and noisy distractor cells.
//! * [`harness`] — episode loop, baselines, ablations, and metric logs.
//! * [`verify`] — the verification suites the CLI exposes.

pub mod calibration;
pub mod checkpoint;
pub mod config;
pub mod csvio;
pub mod gridworld;
pub mod harness;
pub mod linear_mdp;
pub mod memory;
pub mod model;
pub mod nn;
pub mod numerics;
pub mod rng;
pub mod robust;
pub mod stats;
pub mod verify;

use std::fmt;

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand shapes are inconsistent.
    DimensionMismatch { expected: usize, got: usize, what: &'static str },
    /// A variance or other strictly positive quantity was not positive.
    NonPositive { what: &'static str, value: f64 },
    /// A matrix that must be positive-definite is singular (or nearly so).
    SingularMatrix { what: &'static str },
    /// A probability table or parameter left its valid range.
    InvalidParameter { what: &'static str, detail: String },
    /// Configuration rejected before any work began.
    Config(String),
    /// I/O wrapper for checkpoint and CSV handling.
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, got, what } => {
                write!(f, "dimension mismatch in {what}: expected {expected}, got {got}")
            }
            Error::NonPositive { what, value } => {
                write!(f, "{what} must be strictly positive, got {value}")
            }
            Error::SingularMatrix { what } => write!(f, "singular matrix in {what}"),
            Error::InvalidParameter { what, detail } => write!(f, "invalid {what}: {detail}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Io(msg) => write!(f, "io error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
