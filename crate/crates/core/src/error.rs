use thiserror::Error;

/// Errors raised by the spectral, noise, stepping and study layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mode count {0}: must be even and at least 2")]
    InvalidModeCount(usize),
    #[error("grid of {grid} points cannot resolve {modes} modes")]
    GridTooSmall { grid: usize, modes: usize },
    #[error("mode sets differ: {left} vs {right} modes")]
    ModeMismatch { left: usize, right: usize },
    #[error("expected {expected} coefficients, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("rational symbol evaluated at its pole z = {0}")]
    Pole(num_complex::Complex64),
    #[error("noise is not commutative: Milstein term not implementable via the increment identity")]
    NonCommutativeNoise,
    #[error("increment tape does not match the time grid: {0}")]
    TapeMismatch(String),
    #[error("time grids do not match: {0}")]
    GridMismatch(String),
    #[error("malformed field data: {0}")]
    Malformed(String),
    #[error("study interrupted after {completed} of {requested} samples")]
    Interrupted { completed: usize, requested: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
