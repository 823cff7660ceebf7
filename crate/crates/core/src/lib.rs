//! Moran's index, the simplest spatial autoregressive model, and the exact
//! algebraic identities that link them.
//!
//! The typical flow mirrors [`report::analyze_data`]:
//!
//! 1. optionally log-transform the sizes and z-score them ([`spatial_data`]);
//! 2. build inverse-distance proximities and normalize them to sum to one;
//! 3. compute Moran's index and its inner-product regression ([`autocorr`]);
//! 4. fit `z = a·o + ρ·Wz + ε` by least squares ([`sar`]);
//! 5. check the spectral ranges ([`bounds`]) and run significance tests and
//!    residual diagnostics ([`inference`]).

pub mod autocorr;
pub mod bounds;
pub mod eigen;
pub mod error;
pub mod inference;
pub mod io;
pub mod matrix;
pub mod ols;
pub mod report;
pub mod sar;
pub mod simulate;
pub mod spatial_data;
pub mod svg;
pub mod verify;

pub use error::{Error, ErrorKind, Result};
pub use matrix::Matrix;
