//! Crate-wide error type.

use alloc::string::String;
use core::fmt;

/// Errors raised by constructors, engines and solvers.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A word letter lies outside `1..=m`.
    LetterOutOfRange { letter: usize, alphabet: usize },
    /// Two tensor operands live over different alphabets.
    AlphabetMismatch { left: usize, right: usize },
    /// A functional word is longer than the truncation level of the series.
    WordTooLong { word_len: usize, level: usize },
    /// Path/kernel/operator dimensions are inconsistent.
    DimensionMismatch(String),
    /// Time grid is not strictly increasing, or counts disagree.
    InvalidGrid(String),
    /// A value was NaN or infinite where a finite number is required.
    NonFinite(String),
    /// Kernel evaluated at an argument where it is not defined.
    KernelDomain(String),
    /// `int_0^t |K(t,s)|^p ds` diverges for the requested kernel and `p`.
    DivergentNorm(String),
    /// Requested quadrature rule cannot handle the kernel's singularity.
    IncompatibleQuadrature(String),
    /// `(s, t, tau)` violates the simplex ordering or lies off the grid.
    InvalidInterval(String),
    /// Engine was handed a kernel outside its admissible family.
    UnsupportedKernel(String),
    /// Factorial-decay tail bound cannot be met at the requested truncation level.
    TailBound { requested: usize, required: usize },
    /// Empty or otherwise unusable input data.
    InvalidInput(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::LetterOutOfRange { letter, alphabet } => {
                write!(f, "letter {letter} outside alphabet 1..={alphabet}")
            }
            Error::AlphabetMismatch { left, right } => {
                write!(f, "alphabet mismatch: {left} vs {right}")
            }
            Error::WordTooLong { word_len, level } => {
                write!(
                    f,
                    "word of length {word_len} exceeds truncation level {level}"
                )
            }
            Error::DimensionMismatch(msg) => write!(f, "dimension mismatch: {msg}"),
            Error::InvalidGrid(msg) => write!(f, "invalid grid: {msg}"),
            Error::NonFinite(msg) => write!(f, "non-finite value: {msg}"),
            Error::KernelDomain(msg) => write!(f, "kernel domain: {msg}"),
            Error::DivergentNorm(msg) => write!(f, "divergent norm: {msg}"),
            Error::IncompatibleQuadrature(msg) => write!(f, "incompatible quadrature: {msg}"),
            Error::InvalidInterval(msg) => write!(f, "invalid interval: {msg}"),
            Error::UnsupportedKernel(msg) => write!(f, "unsupported kernel: {msg}"),
            Error::TailBound {
                requested,
                required,
            } => write!(
                f,
                "tail bound not met at level {requested}; level {required} required"
            ),
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
