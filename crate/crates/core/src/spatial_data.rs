//! Size vectors and spatial weight structures.
//!
//! The pipeline is: raw sizes (optionally log-transformed) are z-scored with
//! the population standard deviation so that `zᵀz = n`; a distance matrix is
//! turned into inverse-distance proximities `v_ij = 1/r_ij` with a zero
//! diagonal, and the proximities are divided by their total `V₀` so that the
//! weights sum to one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{mean, Matrix};

/// Relative asymmetry above which distance input is reported (auto mode) or
/// rejected (strict mode).
pub const ASYMMETRY_TOLERANCE: f64 = 1e-6;

/// Tolerance on `|ΣΣ w_ij - 1|` for a globally normalized weight matrix.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct RawSizeVector {
    ids: Vec<String>,
    values: Vec<f64>,
}

impl RawSizeVector {
    pub fn new(ids: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if ids.len() != values.len() {
            return Err(Error::LengthMismatch {
                ids: ids.len(),
                values: values.len(),
            });
        }
        if values.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(i));
        }
        Ok(RawSizeVector { ids, values })
    }

    /// Values with generated ids `1..=n`.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let ids = (1..=values.len()).map(|i| i.to_string()).collect();
        RawSizeVector::new(ids, values)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        RawSizeVector::new(
            self.ids.clone(),
            self.values.iter().map(|v| v * factor).collect(),
        )
    }
}

/// Z-scores with zero mean and unit population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizedVector {
    z: Vec<f64>,
}

impl StandardizedVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.z
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProximityMatrix {
    v: Matrix,
}

impl ProximityMatrix {
    pub fn matrix(&self) -> &Matrix {
        &self.v
    }

    pub fn len(&self) -> usize {
        self.v.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.v.rows() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    w: Matrix,
    v0: f64,
}

impl WeightMatrix {
    /// Wraps an already-normalized matrix: square, nonnegative, zero diagonal,
    /// entries summing to one. Symmetry is not required here; see
    /// [`WeightMatrix::is_symmetric`].
    pub fn new(w: Matrix) -> Result<Self> {
        if !w.is_square() {
            return Err(Error::NonSquare {
                rows: w.rows(),
                cols: w.cols(),
            });
        }
        for i in 0..w.rows() {
            if w[(i, i)] != 0.0 {
                return Err(Error::InvalidWeights(format!("nonzero diagonal at {i}")));
            }
            for j in 0..w.cols() {
                let x = w[(i, j)];
                if !x.is_finite() || x < 0.0 {
                    return Err(Error::InvalidWeights(format!("entry ({i}, {j}) = {x}")));
                }
            }
        }
        let total = w.sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::InvalidWeights(format!("entries sum to {total}")));
        }
        Ok(WeightMatrix { w, v0: 1.0 })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.w
    }

    /// The normalizing constant `V₀` used to build this matrix.
    pub fn v0(&self) -> f64 {
        self.v0
    }

    pub fn len(&self) -> usize {
        self.w.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.w.rows() == 0
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.len();
        (0..n).all(|i| (i + 1..n).all(|j| self.w[(i, j)] == self.w[(j, i)]))
    }

    /// `W v` for an arbitrary vector (not necessarily standardized).
    pub fn lag(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.w.mul_vec(v)
    }
}

/// The lag vector `Wz` together with `(Wz)ᵀo`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialLag {
    pub wz: Vec<f64>,
    pub wz_sum: f64,
}

impl SpatialLag {
    pub fn len(&self) -> usize {
        self.wz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wz.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.wz_sum / self.wz.len() as f64
    }

    /// `(Wz)ᵀ(Wz)`.
    pub fn inner(&self) -> f64 {
        self.wz.iter().map(|v| v * v).sum()
    }
}

/// How asymmetric distance input is handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymmetryPolicy {
    /// Average `(V + Vᵀ)/2`, warning when asymmetry exceeds [`ASYMMETRY_TOLERANCE`].
    #[default]
    Auto,
    /// Reject asymmetry above [`ASYMMETRY_TOLERANCE`].
    Strict,
}

pub fn log_transform(raw: &RawSizeVector) -> Result<RawSizeVector> {
    if let Some(i) = raw.values.iter().position(|&v| v <= 0.0) {
        return Err(Error::NonPositiveValue(i));
    }
    RawSizeVector::new(raw.ids.clone(), raw.values.iter().map(|v| v.ln()).collect())
}

pub fn standardize(raw: &RawSizeVector) -> Result<StandardizedVector> {
    standardize_values(&raw.values)
}

/// Population z-scores of an arbitrary slice (used for residuals as well).
pub fn standardize_values(values: &[f64]) -> Result<StandardizedVector> {
    let n = values.len();
    if n < 2 {
        return Err(Error::TooFewElements {
            required: 2,
            found: n,
        });
    }
    let rough = mean(values);
    // second pass corrects the mean for inputs with a large common offset
    let center = rough + values.iter().map(|v| v - rough).sum::<f64>() / n as f64;
    let deviations: Vec<f64> = values.iter().map(|v| v - center).collect();
    let sd = (deviations.iter().map(|d| d * d).sum::<f64>() / n as f64).sqrt();
    let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if sd == 0.0 || sd <= 1e-14 * scale {
        return Err(Error::ZeroVariance);
    }
    Ok(StandardizedVector {
        z: deviations.into_iter().map(|d| d / sd).collect(),
    })
}

/// `v_ij = 1/d_ij` off the diagonal, zero on it. The diagonal of `distances`
/// is never read.
pub fn inverse_distance_proximity(
    distances: &Matrix,
    policy: SymmetryPolicy,
) -> Result<ProximityMatrix> {
    if !distances.is_square() {
        return Err(Error::NonSquare {
            rows: distances.rows(),
            cols: distances.cols(),
        });
    }
    let n = distances.rows();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let d = distances[(i, j)];
            if d == 0.0 {
                return Err(Error::ZeroDistance {
                    i: i.min(j),
                    j: i.max(j),
                });
            }
            if !d.is_finite() || d < 0.0 {
                return Err(Error::InvalidDistance { i, j, value: d });
            }
        }
    }
    let mut off_diagonal = distances.clone();
    for i in 0..n {
        off_diagonal[(i, i)] = 0.0;
    }
    let (relative, i, j) = off_diagonal.max_relative_asymmetry();
    if relative > ASYMMETRY_TOLERANCE {
        match policy {
            SymmetryPolicy::Strict => return Err(Error::AsymmetricInput { i, j, relative }),
            SymmetryPolicy::Auto => log::warn!(
                "distance matrix asymmetric at ({i}, {j}), relative difference {relative:.3e}; averaging"
            ),
        }
    }
    let v = Matrix::from_fn(
        n,
        n,
        |i, j| if i == j { 0.0 } else { 1.0 / distances[(i, j)] },
    );
    if relative == 0.0 {
        Ok(ProximityMatrix { v })
    } else {
        Ok(symmetrize(&v))
    }
}

pub fn global_normalize(v: &ProximityMatrix) -> Result<WeightMatrix> {
    let v0 = v.v.sum();
    if !(v0 > 0.0) || !v0.is_finite() {
        return Err(Error::DegenerateMatrix);
    }
    Ok(WeightMatrix {
        w: v.v.scale(1.0 / v0),
        v0,
    })
}

/// `(V + Vᵀ)/2` with the diagonal forced to zero; the result is exactly symmetric.
pub fn symmetrize(v: &Matrix) -> ProximityMatrix {
    let n = v.rows();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let s = (v[(i, j)] + v[(j, i)]) / 2.0;
            out[(i, j)] = s;
            out[(j, i)] = s;
        }
    }
    ProximityMatrix { v: out }
}

/// Wraps a nonnegative square matrix as proximities after symmetrizing it.
pub fn proximity_from_matrix(v: &Matrix) -> Result<ProximityMatrix> {
    if !v.is_square() {
        return Err(Error::NonSquare {
            rows: v.rows(),
            cols: v.cols(),
        });
    }
    Ok(symmetrize(v))
}

pub fn spatial_lag(w: &WeightMatrix, z: &StandardizedVector) -> Result<SpatialLag> {
    let wz = w.lag(z.as_slice())?;
    let wz_sum = wz.iter().sum();
    Ok(SpatialLag { wz, wz_sum })
}
