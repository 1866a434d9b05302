//! Time-frequency analysis on the finite torus `Z_N^d`.
//!
//! The crate models functions on `R^d` by complex arrays on a cyclic grid and
//! provides:
//!
//! * [`grid`]: unitary DFT, translations, modulations, test signals;
//! * [`weights`]: polynomial/exponential weight families and empirical
//!   moderateness certificates;
//! * [`mixed_norms`]: iterated weighted mixed quasi-norms, Wiener amalgam
//!   norms and a brute-force reference evaluator;
//! * [`convolution`]: discrete and semi-discrete convolutions and numerical
//!   checkers for the associated norm estimates;
//! * [`gabor`]: STFT, Gabor analysis/synthesis/frame operators, frame bounds
//!   and canonical dual windows;
//! * [`modspace`]: modulation, amalgam and Fourier-Lebesgue norms plus the
//!   ensemble equivalence reports built on them.

#![forbid(unsafe_code)]

pub mod convolution;
pub mod error;
pub mod gabor;
pub mod grid;
pub mod mixed_norms;
pub mod modspace;
pub mod rng;
pub mod weights;

pub use error::{Error, Result};
pub use num_complex::Complex64;
