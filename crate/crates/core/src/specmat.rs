//! Dense symmetric spectral linear algebra.
//!
//! Eigendecompositions are computed with cyclic Jacobi sweeps, which are slow
//! compared with tridiagonal QR but accurate and dependency-free at the sizes
//! used here (d up to a few hundred). Circulant matrices additionally get a
//! DFT route, used as an independent cross-check.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};

/// Relative asymmetry tolerated by [`SymmetricMatrix::new`], scaled by the largest entry.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Negative eigenvalues down to `-PSD_TOL * lambda_1` are treated as rounding noise.
pub const PSD_TOL: f64 = 1e-10;
/// `lambda_d <= PD_TOL * lambda_1` counts as singular when an inverse is needed.
pub const PD_TOL: f64 = 1e-12;

const JACOBI_TOL: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 100;

/// A square real matrix that is symmetric to within [`SYMMETRY_TOL`].
///
/// Construction symmetrizes the input as `(S + S^T) / 2`, so exactly symmetric
/// inputs are stored bit-for-bit.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricMatrix(DMatrix<f64>);

impl SymmetricMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = matrix.shape();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        if rows == 0 {
            return Err(Error::EmptyMatrix);
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalBreakdown(
                "matrix contains non-finite entries".into(),
            ));
        }
        let scale = matrix.amax();
        let tolerance = SYMMETRY_TOL * scale;
        let mut out = matrix;
        for i in 0..rows {
            for j in (i + 1)..rows {
                let gap = (out[(i, j)] - out[(j, i)]).abs();
                if gap > tolerance {
                    return Err(Error::NotSymmetric {
                        row: i,
                        col: j,
                        gap,
                        tolerance,
                    });
                }
                let mean = 0.5 * (out[(i, j)] + out[(j, i)]);
                out[(i, j)] = mean;
                out[(j, i)] = mean;
            }
        }
        Ok(SymmetricMatrix(out))
    }

    pub fn identity(dim: usize) -> Self {
        SymmetricMatrix(DMatrix::identity(dim, dim))
    }

    pub fn from_diagonal(diagonal: &[f64]) -> Self {
        SymmetricMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(
            diagonal,
        )))
    }

    /// Builds the matrix from the upper triangle produced by `f(i, j)` with `i <= j`.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymmetricMatrix(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn diagonal(&self) -> DVector<f64> {
        self.0.diagonal()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        SymmetricMatrix(&self.0 * factor)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.0.amax()
    }

    pub(crate) fn from_symmetric_unchecked(matrix: DMatrix<f64>) -> Self {
        debug_assert!(matrix.is_square());
        SymmetricMatrix(matrix)
    }
}

/// Eigenvalues in descending order with matching orthonormal eigenvector columns.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralDecomposition {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    /// Wraps an existing eigenpair set. Eigenvalues must already be sorted
    /// descending and the columns orthonormal.
    pub fn from_parts(eigenvalues: DVector<f64>, eigenvectors: DMatrix<f64>) -> Result<Self> {
        let d = eigenvalues.len();
        if eigenvectors.shape() != (d, d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: eigenvectors.ncols(),
            });
        }
        if eigenvalues.as_slice().windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::NumericalBreakdown(
                "eigenvalues are not sorted in descending order".into(),
            ));
        }
        Ok(Self {
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn largest(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn smallest(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }

    /// `V f(Λ) V^T`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut scaled = self.eigenvectors.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.eigenvalues[k]);
        }
        let mut out = &scaled * self.eigenvectors.transpose();
        symmetrize(&mut out);
        out
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.reconstruct_with(|l| l)
    }

    /// Same eigenvectors, eigenvalues mapped through `f`. `f` must preserve
    /// the descending order.
    pub(crate) fn map_eigenvalues(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            eigenvalues: self.eigenvalues.map(f),
            eigenvectors: self.eigenvectors.clone(),
        }
    }

    pub(crate) fn clamp_negative(&mut self) {
        for v in self.eigenvalues.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    }
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let d = m.nrows();
    for i in 0..d {
        for j in (i + 1)..d {
            let mean = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = mean;
            m[(j, i)] = mean;
        }
    }
}

/// Cyclic Jacobi eigendecomposition.
///
/// Sweeps stop once the off-diagonal Frobenius norm drops below
/// `1e-13 * ||S||_F`, or after 100 sweeps. Equal eigenvalues keep the order in
/// which they appear on the converged diagonal.
pub fn sym_eigendecompose(s: &SymmetricMatrix) -> SpectralDecomposition {
    let d = s.dim();
    let mut a: Vec<f64> = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            a.push(s.get(i, j));
        }
    }
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }

    let frobenius = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let target = JACOBI_TOL * frobenius;

    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    off += a[i * d + j] * a[i * d + j];
                }
            }
        }
        if off.sqrt() <= target {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                rotate(&mut a, &mut v, d, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&x, &y| a[y * d + y].total_cmp(&a[x * d + x]));

    let eigenvalues = DVector::from_iterator(d, order.iter().map(|&k| a[k * d + k]));
    let eigenvectors = DMatrix::from_fn(d, d, |r, c| v[r * d + order[c]]);
    SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    }
}

/// One Jacobi rotation annihilating `a[p][q]`; `a` is row-major and kept fully symmetric.
fn rotate(a: &mut [f64], v: &mut [f64], d: usize, p: usize, q: usize) {
    let apq = a[p * d + q];
    if apq == 0.0 {
        return;
    }
    let app = a[p * d + p];
    let aqq = a[q * d + q];
    let g = 100.0 * apq.abs();
    if app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
        a[p * d + q] = 0.0;
        a[q * d + p] = 0.0;
        return;
    }

    let theta = (aqq - app) / (2.0 * apq);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let tau = s / (1.0 + c);

    a[p * d + p] = app - t * apq;
    a[q * d + q] = aqq + t * apq;
    a[p * d + q] = 0.0;
    a[q * d + p] = 0.0;
    for r in 0..d {
        if r == p || r == q {
            continue;
        }
        let arp = a[r * d + p];
        let arq = a[r * d + q];
        let new_rp = arp - s * (arq + arp * tau);
        let new_rq = arq + s * (arp - arq * tau);
        a[r * d + p] = new_rp;
        a[p * d + r] = new_rp;
        a[r * d + q] = new_rq;
        a[q * d + r] = new_rq;
    }
    for r in 0..d {
        let vrp = v[r * d + p];
        let vrq = v[r * d + q];
        v[r * d + p] = vrp - s * (vrq + vrp * tau);
        v[r * d + q] = vrq + s * (vrp - vrq * tau);
    }
}

/// Condition number of a symmetric positive semi-definite matrix; singular
/// matrices get the explicit `Infinite` value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConditionNumber {
    Finite(f64),
    Infinite,
}

impl ConditionNumber {
    pub fn is_finite(&self) -> bool {
        matches!(self, ConditionNumber::Finite(_))
    }

    pub fn value(&self) -> Option<f64> {
        match *self {
            ConditionNumber::Finite(v) => Some(v),
            ConditionNumber::Infinite => None,
        }
    }

    /// `self > x`, with `Infinite` exceeding every real.
    pub fn exceeds(&self, x: f64) -> bool {
        match *self {
            ConditionNumber::Finite(v) => v > x,
            ConditionNumber::Infinite => true,
        }
    }
}

impl fmt::Display for ConditionNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConditionNumber::Finite(v) => write!(f, "{v}"),
            ConditionNumber::Infinite => f.write_str("inf"),
        }
    }
}

/// Outcome of the positive semi-definiteness check on a spectrum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsdStatus {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// Small negative eigenvalues were rounded up to zero.
    pub clamped: bool,
}

pub fn psd_status(decomp: &SpectralDecomposition) -> Result<PsdStatus> {
    let max_eigenvalue = decomp.largest();
    let min_eigenvalue = decomp.smallest();
    let tolerance = PSD_TOL * max_eigenvalue.max(0.0);
    if min_eigenvalue < -tolerance {
        return Err(Error::NotPositiveSemiDefinite {
            min_eigenvalue,
            max_eigenvalue,
        });
    }
    Ok(PsdStatus {
        min_eigenvalue,
        max_eigenvalue,
        clamped: min_eigenvalue < 0.0,
    })
}

/// `lambda_1 / lambda_d` from a descending spectrum, after the PSD check.
pub fn condition_number_of(decomp: &SpectralDecomposition) -> Result<ConditionNumber> {
    let status = psd_status(decomp)?;
    if status.min_eigenvalue <= 0.0 {
        Ok(ConditionNumber::Infinite)
    } else {
        Ok(ConditionNumber::Finite(
            status.max_eigenvalue / status.min_eigenvalue,
        ))
    }
}

pub fn condition_number(s: &SymmetricMatrix) -> Result<ConditionNumber> {
    condition_number_of(&sym_eigendecompose(s))
}

/// Eigenvalues of the symmetric circulant matrix with the given first row,
/// sorted descending. These are the real parts of the row's DFT.
pub fn circulant_eigenvalues(first_row: &[f64]) -> Result<Vec<f64>> {
    let d = first_row.len();
    if d == 0 {
        return Err(Error::EmptyMatrix);
    }
    let scale = first_row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tolerance = SYMMETRY_TOL * scale;
    for k in 1..d {
        let gap = (first_row[k] - first_row[d - k]).abs();
        if gap > tolerance {
            return Err(Error::NotSymmetric {
                row: 0,
                col: k,
                gap,
                tolerance,
            });
        }
    }
    let mut buffer: Vec<Complex<f64>> = first_row.iter().map(|&x| Complex::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(d).process(&mut buffer);
    let mut eigenvalues: Vec<f64> = buffer.iter().map(|c| c.re).collect();
    eigenvalues.sort_by(|a, b| b.total_cmp(a));
    Ok(eigenvalues)
}

/// Cached inverse of a strictly positive definite matrix, applied through its
/// spectral decomposition.
#[derive(Clone, Debug)]
pub struct SpdInverse {
    eigenvectors: DMatrix<f64>,
    reciprocals: DVector<f64>,
}

impl SpdInverse {
    pub fn new(decomp: &SpectralDecomposition) -> Result<Self> {
        let max_eigenvalue = decomp.largest();
        let min_eigenvalue = decomp.smallest();
        if !(max_eigenvalue > 0.0) || min_eigenvalue <= PD_TOL * max_eigenvalue {
            return Err(Error::Singular {
                min_eigenvalue,
                max_eigenvalue,
            });
        }
        Ok(Self {
            eigenvectors: decomp.eigenvectors().clone(),
            reciprocals: decomp.eigenvalues().map(|l| 1.0 / l),
        })
    }

    pub fn dim(&self) -> usize {
        self.reciprocals.len()
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let coefficients = self.eigenvectors.tr_mul(v).component_mul(&self.reciprocals);
        &self.eigenvectors * coefficients
    }

    /// Dense `V Λ^{-1} V^T`.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let mut scaled = self.eigenvectors.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= self.reciprocals[k];
        }
        let mut out = &scaled * self.eigenvectors.transpose();
        symmetrize(&mut out);
        out
    }
}

/// Solves `S x = v` for strictly positive definite `S`.
pub fn spd_inverse_apply(s: &SymmetricMatrix, v: &DVector<f64>) -> Result<DVector<f64>> {
    if v.len() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            found: v.len(),
        });
    }
    let inverse = SpdInverse::new(&sym_eigendecompose(s))?;
    Ok(inverse.apply(v))
}
