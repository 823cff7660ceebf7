//! Synthetic fields from the SAR data-generating process
//! `(Id - ρW) x = a·o + η`, `η ~ N(0, σ²)` i.i.d.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::bounds::weight_spectrum;
use crate::error::{Error, Result};
use crate::spatial_data::{RawSizeVector, WeightMatrix};

/// `|1 - ρλ|` at or below this (for any eigenvalue λ of W) is singular.
pub const RESOLVENT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SarSimulation {
    pub a: f64,
    pub rho: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

pub fn simulate_sar(w: &WeightMatrix, params: &SarSimulation) -> Result<RawSizeVector> {
    let n = w.len();
    if !(params.noise_sd >= 0.0) || !params.noise_sd.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "noise_sd = {}",
            params.noise_sd
        )));
    }
    if params.a == 0.0 && params.noise_sd == 0.0 {
        return Err(Error::DegenerateZeroField);
    }
    let spectrum = weight_spectrum(w)?;
    if let Some(lambda) = spectrum
        .values
        .iter()
        .find(|l| (1.0 - params.rho * **l).abs() <= RESOLVENT_TOLERANCE)
    {
        return Err(Error::SingularResolvent {
            rho: params.rho,
            inverse_eigenvalue: 1.0 / lambda,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let noise = Normal::new(0.0, params.noise_sd)
        .map_err(|e| Error::InvalidConfig(format!("noise: {e}")))?;
    let rhs = DVector::from_iterator(n, (0..n).map(|_| params.a + noise.sample(&mut rng)));
    let m = w.matrix();
    let system = DMatrix::from_fn(n, n, |i, j| {
        let identity = if i == j { 1.0 } else { 0.0 };
        identity - params.rho * m[(i, j)]
    });
    let x = system.lu().solve(&rhs).ok_or(Error::SingularResolvent {
        rho: params.rho,
        inverse_eigenvalue: f64::NAN,
    })?;
    RawSizeVector::from_values(x.iter().copied().collect())
}
