//! Ridge regression (RR), minimum eigenvalue (ME) and multiplicative variance
//! inflation (MVI), with the standard-deviation updates each one induces and
//! the correction each one makes to `R^{-1}`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::covariance::{decompose_corr_std, CovarianceMatrix};
use crate::error::{Error, Result};
use crate::specmat::{ConditionNumber, SpectralDecomposition, SymmetricMatrix, PD_TOL};

/// Eigenvalues within this fraction of `lambda_1` above the ME threshold count as below it.
pub const THRESHOLD_TIE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    RidgeRegression,
    MinimumEigenvalue,
    VarianceInflation,
}

impl Method {
    pub fn code(&self) -> &'static str {
        match self {
            Method::RidgeRegression => "RR",
            Method::MinimumEigenvalue => "ME",
            Method::VarianceInflation => "MVI",
        }
    }

    /// Name of the method's scalar parameter.
    pub fn parameter_name(&self) -> &'static str {
        match self {
            Method::RidgeRegression => "delta",
            Method::MinimumEigenvalue => "threshold",
            Method::VarianceInflation => "alpha",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rr" | "ridge" => Ok(Method::RidgeRegression),
            "me" | "min-eig" => Ok(Method::MinimumEigenvalue),
            "mvi" | "inflation" => Ok(Method::VarianceInflation),
            other => Err(format!("unknown method '{other}' (expected rr, me or mvi)")),
        }
    }
}

/// Everything produced by one application of a modification method.
#[derive(Clone, Debug)]
pub struct ReconditionReport {
    pub method: Method,
    pub kappa_before: ConditionNumber,
    pub kappa_after: f64,
    /// δ for RR, the threshold T for ME, α for MVI.
    pub parameter: f64,
    /// Eigenvalue increments `max(T - λ_k, 0)`; all zero for RR and MVI.
    pub gamma: DVector<f64>,
    pub result: CovarianceMatrix,
    pub sigma_before: DVector<f64>,
    pub sigma_after: DVector<f64>,
    /// `(C - C_mod) ∘ sign(C)`.
    pub correlation_delta: DMatrix<f64>,
}

impl ReconditionReport {
    /// `sigma_after / sigma_before`, entrywise.
    pub fn inflation_factors(&self) -> DVector<f64> {
        self.sigma_after.component_div(&self.sigma_before)
    }
}

fn below_threshold(lambda: f64, threshold: f64, lambda_max: f64) -> bool {
    lambda <= threshold + THRESHOLD_TIE_TOL * lambda_max
}

fn check_target(kappa_max: f64, current: ConditionNumber) -> Result<()> {
    if !(kappa_max > 1.0) || !kappa_max.is_finite() {
        return Err(Error::InvalidTarget { kappa_max });
    }
    if !current.exceeds(kappa_max) {
        return Err(Error::NoOpRequest {
            kappa_max,
            current: current.to_string(),
        });
    }
    Ok(())
}

/// Shift δ with `(λ_1 + δ) / (λ_d + δ) = κ_max`.
pub fn rr_delta(lambda_1: f64, lambda_d: f64, kappa_max: f64) -> Result<f64> {
    if !(lambda_d >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "lambda_d",
            value: lambda_d,
            reason: "must be non-negative",
        });
    }
    if !(lambda_1 > lambda_d) {
        return Err(Error::AlreadyOptimal);
    }
    let current = if lambda_d > 0.0 {
        ConditionNumber::Finite(lambda_1 / lambda_d)
    } else {
        ConditionNumber::Infinite
    };
    check_target(kappa_max, current)?;
    Ok((lambda_1 - lambda_d * kappa_max) / (kappa_max - 1.0))
}

fn spectrum_bounds(decomp: &SpectralDecomposition) -> (f64, f64) {
    (decomp.largest(), decomp.smallest().max(0.0))
}

/// Standard deviations and correlations for reporting. Unlike
/// [`decompose_corr_std`], a zero variance is allowed: that variable's
/// correlations are reported as zero.
fn report_correlations(r: &CovarianceMatrix) -> (DVector<f64>, SymmetricMatrix) {
    if let Ok(pair) = decompose_corr_std(r) {
        return (pair.std_devs().clone(), pair.correlations().clone());
    }
    let sd = r.std_devs();
    let corr = SymmetricMatrix::from_fn(r.dim(), |i, j| {
        if i == j {
            1.0
        } else if sd[i] > 0.0 && sd[j] > 0.0 {
            r.get(i, j) / (sd[i] * sd[j])
        } else {
            0.0
        }
    });
    (sd, corr)
}

fn finish(
    method: Method,
    original: &CovarianceMatrix,
    result: CovarianceMatrix,
    parameter: f64,
    gamma: DVector<f64>,
    kappa_after: f64,
) -> Result<ReconditionReport> {
    let (sigma_before, corr_before) = report_correlations(original);
    let (sigma_after, corr_after) = report_correlations(&result);
    let correlation_delta = correlation_change_report(&corr_before, &corr_after)?;
    Ok(ReconditionReport {
        method,
        kappa_before: original.condition_number(),
        kappa_after,
        parameter,
        gamma,
        sigma_before,
        sigma_after,
        correlation_delta,
        result,
    })
}

/// `R_RR = R + δ I` with δ from [`rr_delta`].
pub fn ridge_regression(r: &CovarianceMatrix, kappa_max: f64) -> Result<ReconditionReport> {
    let (lambda_1, lambda_d) = spectrum_bounds(r.decomposition());
    let delta = rr_delta(lambda_1, lambda_d, kappa_max)?;
    let d = r.dim();
    let shifted = r.as_matrix() + DMatrix::identity(d, d) * delta;
    let decomposition = r.decomposition().map_eigenvalues(|l| l + delta);
    let result = CovarianceMatrix::with_decomposition(
        SymmetricMatrix::from_symmetric_unchecked(shifted),
        decomposition,
    )?;
    let kappa_after = (lambda_1 + delta) / (lambda_d + delta);
    finish(
        Method::RidgeRegression,
        r,
        result,
        delta,
        DVector::zeros(d),
        kappa_after,
    )
}

/// Minimum eigenvalue method using the decomposition cached on `r`.
pub fn min_eigenvalue(r: &CovarianceMatrix, kappa_max: f64) -> Result<ReconditionReport> {
    min_eigenvalue_with(r, r.decomposition(), kappa_max)
}

/// Minimum eigenvalue method with a caller-supplied eigendecomposition of `r`.
///
/// Eigenvalues at or below `T = λ_1 / κ_max` are raised to `T`; the result is
/// assembled as `R + V Γ V^T` so the untouched part of `R` is kept exactly.
pub fn min_eigenvalue_with(
    r: &CovarianceMatrix,
    decomp: &SpectralDecomposition,
    kappa_max: f64,
) -> Result<ReconditionReport> {
    let d = r.dim();
    if decomp.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: decomp.dim(),
        });
    }
    let (lambda_1, lambda_d) = spectrum_bounds(decomp);
    if !(lambda_1 > lambda_d) {
        return Err(Error::AlreadyOptimal);
    }
    let current = if lambda_d > 0.0 {
        ConditionNumber::Finite(lambda_1 / lambda_d)
    } else {
        ConditionNumber::Infinite
    };
    check_target(kappa_max, current)?;

    let threshold = lambda_1 / kappa_max;
    let gamma = DVector::from_iterator(
        d,
        decomp.eigenvalues().iter().map(|&l| {
            let l = l.max(0.0);
            if below_threshold(l, threshold, lambda_1) {
                (threshold - l).max(0.0)
            } else {
                0.0
            }
        }),
    );

    let mut update = r.as_matrix().clone();
    let v = decomp.eigenvectors();
    for (k, &g) in gamma.iter().enumerate() {
        if g > 0.0 {
            let col = v.column(k);
            update.ger(g, &col, &col, 1.0);
        }
    }
    crate::specmat::symmetrize(&mut update);

    let new_eigenvalues = DVector::from_iterator(
        d,
        decomp
            .eigenvalues()
            .iter()
            .zip(gamma.iter())
            .map(|(&l, &g)| if g > 0.0 { threshold } else { l.max(0.0) }),
    );
    let decomposition = SpectralDecomposition::from_parts(new_eigenvalues, v.clone())?;
    let kappa_after = decomposition.largest() / decomposition.smallest();
    let result = CovarianceMatrix::with_decomposition(
        SymmetricMatrix::from_symmetric_unchecked(update),
        decomposition,
    )?;
    finish(
        Method::MinimumEigenvalue,
        r,
        result,
        threshold,
        gamma,
        kappa_after,
    )
}

/// `R_MVI = α² R`. Only defined for invertible `R`.
pub fn mvi(r: &CovarianceMatrix, alpha: f64) -> Result<ReconditionReport> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter {
            name: "alpha",
            value: alpha,
            reason: "must be positive and finite",
        });
    }
    let (lambda_1, lambda_d) = spectrum_bounds(r.decomposition());
    if !(lambda_1 > 0.0) || lambda_d <= PD_TOL * lambda_1 {
        return Err(Error::Singular {
            min_eigenvalue: lambda_d,
            max_eigenvalue: lambda_1,
        });
    }
    let factor = alpha * alpha;
    let result = CovarianceMatrix::with_decomposition(
        r.matrix().scaled(factor),
        r.decomposition().map_eigenvalues(|l| l * factor),
    )?;
    let kappa_after = (lambda_1 * factor) / (lambda_d * factor);
    finish(
        Method::VarianceInflation,
        r,
        result,
        alpha,
        DVector::zeros(r.dim()),
        kappa_after,
    )
}

/// `Σ_RR = (Σ² + δ I)^{1/2}`.
pub fn rr_sigma_update(sigma: &DVector<f64>, delta: f64) -> Result<DVector<f64>> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "delta",
            value: delta,
            reason: "must be non-negative",
        });
    }
    Ok(sigma.map(|s| (s * s + delta).sqrt()))
}

/// `Σ_ME(i,i) = (R(i,i) + Σ_k V(i,k)² Γ(k,k))^{1/2}`.
pub fn me_sigma_update(
    r: &CovarianceMatrix,
    decomp: &SpectralDecomposition,
    gamma: &DVector<f64>,
) -> Result<DVector<f64>> {
    let d = r.dim();
    if decomp.dim() != d || gamma.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: if decomp.dim() != d {
                decomp.dim()
            } else {
                gamma.len()
            },
        });
    }
    let v = decomp.eigenvectors();
    Ok(DVector::from_fn(d, |i, _| {
        let increment: f64 = (0..d).map(|k| v[(i, k)] * v[(i, k)] * gamma[k]).sum();
        (r.get(i, i) + increment).sqrt()
    }))
}

/// Entrywise `σ_after / σ_before`: the inflation factor that would produce
/// the same standard deviations.
pub fn equivalent_inflation_factor(
    sigma_before: &DVector<f64>,
    sigma_after: &DVector<f64>,
) -> Result<DVector<f64>> {
    if sigma_before.len() != sigma_after.len() {
        return Err(Error::DimensionMismatch {
            expected: sigma_before.len(),
            found: sigma_after.len(),
        });
    }
    if let Some((index, &value)) = sigma_before
        .iter()
        .chain(sigma_after.iter())
        .enumerate()
        .find(|(_, &s)| !(s > 0.0))
    {
        return Err(Error::DegenerateVariance {
            index: index % sigma_before.len().max(1),
            value,
        });
    }
    Ok(sigma_after.component_div(sigma_before))
}

/// The single inflation factor when every ratio agrees to within `rel_tol`.
pub fn uniform_inflation_factor(
    sigma_before: &DVector<f64>,
    sigma_after: &DVector<f64>,
    rel_tol: f64,
) -> Result<Option<f64>> {
    let ratios = equivalent_inflation_factor(sigma_before, sigma_after)?;
    let mean = ratios.mean();
    let uniform = ratios.iter().all(|r| (r - mean).abs() <= rel_tol * mean);
    Ok(uniform.then_some(mean))
}

/// How a modification changes `R^{-1}`.
///
/// For RR and ME, `R_mod^{-1} = R^{-1} - V diag(diag_correction) V^T`;
/// for MVI, `R_mod^{-1} = uniform_factor * R^{-1}`.
#[derive(Clone, Debug)]
pub struct InverseCorrectionSpectrum {
    pub method: Method,
    pub diag_correction: DVector<f64>,
    pub uniform_factor: f64,
}

impl InverseCorrectionSpectrum {
    /// `R_mod^{-1}` rebuilt from the original decomposition and this correction.
    pub fn corrected_inverse(&self, decomp: &SpectralDecomposition) -> DMatrix<f64> {
        let factor = self.uniform_factor;
        let values: Vec<f64> = decomp
            .eigenvalues()
            .iter()
            .zip(self.diag_correction.iter())
            .map(|(&l, &c)| factor * (1.0 / l - c))
            .collect();
        let mut scaled = decomp.eigenvectors().clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= values[k];
        }
        let mut out = &scaled * decomp.eigenvectors().transpose();
        crate::specmat::symmetrize(&mut out);
        out
    }

    /// `v^T V diag(diag_correction) V^T v`.
    pub fn quadratic_form(&self, decomp: &SpectralDecomposition, v: &DVector<f64>) -> f64 {
        let projected = decomp.eigenvectors().tr_mul(v);
        projected
            .iter()
            .zip(self.diag_correction.iter())
            .map(|(p, c)| c * p * p)
            .sum()
    }
}

pub fn inverse_correction_spectrum(
    report: &ReconditionReport,
    decomp: &SpectralDecomposition,
) -> Result<InverseCorrectionSpectrum> {
    let d = decomp.dim();
    if report.result.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: report.result.dim(),
            found: d,
        });
    }
    let lambda_1 = decomp.largest();
    let lambda_d = decomp.smallest();
    if !(lambda_1 > 0.0) || lambda_d <= PD_TOL * lambda_1 {
        return Err(Error::Singular {
            min_eigenvalue: lambda_d,
            max_eigenvalue: lambda_1,
        });
    }
    let eigenvalues = decomp.eigenvalues();
    let spectrum = match report.method {
        Method::RidgeRegression => {
            let delta = report.parameter;
            InverseCorrectionSpectrum {
                method: report.method,
                diag_correction: eigenvalues.map(|l| delta / (l * (l + delta))),
                uniform_factor: 1.0,
            }
        }
        Method::MinimumEigenvalue => {
            let threshold = report.parameter;
            InverseCorrectionSpectrum {
                method: report.method,
                diag_correction: eigenvalues.map(|l| {
                    if below_threshold(l, threshold, lambda_1) {
                        ((threshold - l) / (threshold * l)).max(0.0)
                    } else {
                        0.0
                    }
                }),
                uniform_factor: 1.0,
            }
        }
        Method::VarianceInflation => InverseCorrectionSpectrum {
            method: report.method,
            diag_correction: DVector::zeros(d),
            uniform_factor: 1.0 / (report.parameter * report.parameter),
        },
    };
    Ok(spectrum)
}

/// `(C - C_mod) ∘ sign(C)`: positive where a correlation shrank in magnitude
/// without changing sign.
pub fn correlation_change_report(
    before: &SymmetricMatrix,
    after: &SymmetricMatrix,
) -> Result<DMatrix<f64>> {
    if before.dim() != after.dim() {
        return Err(Error::DimensionMismatch {
            expected: before.dim(),
            found: after.dim(),
        });
    }
    let d = before.dim();
    Ok(DMatrix::from_fn(d, d, |i, j| {
        let c = before.get(i, j);
        let sign = if c > 0.0 {
            1.0
        } else if c < 0.0 {
            -1.0
        } else {
            0.0
        };
        (c - after.get(i, j)) * sign
    }))
}
