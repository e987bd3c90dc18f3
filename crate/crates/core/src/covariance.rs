//! Covariance matrices and the split `R = Σ C Σ` into standard deviations and
//! correlations.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::specmat::{
    condition_number_of, psd_status, sym_eigendecompose, ConditionNumber, SpectralDecomposition,
    SymmetricMatrix, PSD_TOL,
};

/// A validated symmetric positive semi-definite matrix together with its
/// spectral decomposition.
///
/// Eigenvalues within the PSD tolerance below zero are stored clamped to zero.
#[derive(Clone, Debug)]
pub struct CovarianceMatrix {
    matrix: SymmetricMatrix,
    decomposition: SpectralDecomposition,
    clamped: bool,
}

impl CovarianceMatrix {
    pub fn new(matrix: SymmetricMatrix) -> Result<Self> {
        let decomposition = sym_eigendecompose(&matrix);
        Self::with_decomposition(matrix, decomposition)
    }

    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        Self::new(SymmetricMatrix::new(matrix)?)
    }

    /// Validates `matrix` against a spectrum that is already known for it
    /// (for example `V(Λ + δ)V^T` after a ridge shift).
    pub(crate) fn with_decomposition(
        matrix: SymmetricMatrix,
        mut decomposition: SpectralDecomposition,
    ) -> Result<Self> {
        if decomposition.dim() != matrix.dim() {
            return Err(Error::DimensionMismatch {
                expected: matrix.dim(),
                found: decomposition.dim(),
            });
        }
        let status = psd_status(&decomposition)?;
        let floor = -PSD_TOL * status.max_eigenvalue.max(0.0);
        if let Some((index, &value)) = matrix
            .diagonal()
            .iter()
            .enumerate()
            .find(|(_, &v)| v < floor)
        {
            return Err(Error::DegenerateVariance { index, value });
        }
        if status.clamped {
            decomposition.clamp_negative();
        }
        Ok(Self {
            matrix,
            decomposition,
            clamped: status.clamped,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &SymmetricMatrix {
        &self.matrix
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        self.matrix.as_matrix()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    pub fn decomposition(&self) -> &SpectralDecomposition {
        &self.decomposition
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.decomposition.smallest()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.decomposition.largest()
    }

    /// True when small negative eigenvalues were rounded to zero during validation.
    pub fn was_clamped(&self) -> bool {
        self.clamped
    }

    pub fn condition_number(&self) -> ConditionNumber {
        condition_number_of(&self.decomposition).expect("validated at construction")
    }

    pub fn variances(&self) -> DVector<f64> {
        self.matrix.diagonal()
    }

    /// Square roots of the diagonal; negative rounding noise maps to zero.
    pub fn std_devs(&self) -> DVector<f64> {
        self.matrix.diagonal().map(|v| v.max(0.0).sqrt())
    }
}

/// Correlation matrix with unit diagonal plus the per-variable standard deviations.
#[derive(Clone, Debug)]
pub struct CorrStdPair {
    correlations: SymmetricMatrix,
    std_devs: DVector<f64>,
}

impl CorrStdPair {
    pub fn new(correlations: SymmetricMatrix, std_devs: DVector<f64>) -> Result<Self> {
        let d = correlations.dim();
        if std_devs.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: std_devs.len(),
            });
        }
        if let Some((index, &value)) = std_devs.iter().enumerate().find(|(_, &s)| !(s > 0.0)) {
            return Err(Error::DegenerateVariance { index, value });
        }
        for i in 0..d {
            if correlations.get(i, i) != 1.0 {
                return Err(Error::InvalidParameter {
                    name: "correlation diagonal",
                    value: correlations.get(i, i),
                    reason: "must be exactly 1",
                });
            }
            for j in (i + 1)..d {
                let c = correlations.get(i, j);
                if c.abs() > 1.0 + 1e-12 {
                    return Err(Error::InvalidParameter {
                        name: "correlation",
                        value: c,
                        reason: "magnitude exceeds 1",
                    });
                }
            }
        }
        Ok(Self {
            correlations,
            std_devs,
        })
    }

    pub fn correlations(&self) -> &SymmetricMatrix {
        &self.correlations
    }

    pub fn std_devs(&self) -> &DVector<f64> {
        &self.std_devs
    }

    pub fn dim(&self) -> usize {
        self.std_devs.len()
    }
}

/// `Σ(i,i) = sqrt(R(i,i))`, `C(i,j) = R(i,j) / (Σ(i,i) Σ(j,j))`.
pub fn decompose_corr_std(r: &CovarianceMatrix) -> Result<CorrStdPair> {
    let d = r.dim();
    let variances = r.variances();
    if let Some((index, &value)) = variances.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(Error::DegenerateVariance { index, value });
    }
    let std_devs = variances.map(f64::sqrt);
    let correlations = SymmetricMatrix::from_fn(d, |i, j| {
        if i == j {
            1.0
        } else {
            r.get(i, j) / (std_devs[i] * std_devs[j])
        }
    });
    Ok(CorrStdPair {
        correlations,
        std_devs,
    })
}

/// `R = Σ C Σ`.
pub fn recompose(pair: &CorrStdPair) -> Result<CovarianceMatrix> {
    let s = &pair.std_devs;
    let m = SymmetricMatrix::from_fn(pair.dim(), |i, j| s[i] * pair.correlations.get(i, j) * s[j]);
    CovarianceMatrix::new(m)
}
