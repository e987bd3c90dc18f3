//! Ky Fan p-k norms and the check that the minimum eigenvalue method solves
//! the nearest fixed-condition-number problem in the trace norm.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::covariance::CovarianceMatrix;
use crate::error::{Error, Result};
use crate::generators::NormalStream;
use crate::recondition::{min_eigenvalue, THRESHOLD_TIE_TOL};
use crate::specmat::{sym_eigendecompose, ConditionNumber, SymmetricMatrix};

/// Largest matrix dimension accepted by [`kyfan_minimizer_oracle`].
pub const ORACLE_MAX_DIM: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KyFanParams {
    p: f64,
    k: usize,
}

impl KyFanParams {
    pub fn new(p: f64, k: usize) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::InvalidParameter {
                name: "p",
                value: p,
                reason: "must be finite and at least 1",
            });
        }
        if k == 0 {
            return Err(Error::InvalidParameter {
                name: "k",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        Ok(Self { p, k })
    }

    /// The trace norm of a `d x d` matrix.
    pub fn trace(d: usize) -> Result<Self> {
        Self::new(1.0, d)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

/// `(Σ_{i≤k} γ_i^p)^{1/p}` over the `k` largest singular values, which for a
/// symmetric matrix are its eigenvalue magnitudes.
pub fn ky_fan_norm(x: &SymmetricMatrix, params: KyFanParams) -> Result<f64> {
    let d = x.dim();
    if params.k > d {
        return Err(Error::InvalidParameter {
            name: "k",
            value: params.k as f64,
            reason: "exceeds the matrix dimension",
        });
    }
    let mut singular: Vec<f64> = sym_eigendecompose(x)
        .eigenvalues()
        .iter()
        .map(|l| l.abs())
        .collect();
    singular.sort_by(|a, b| b.total_cmp(a));
    let top = &singular[..params.k];
    if params.p == 1.0 {
        return Ok(top.iter().sum());
    }
    Ok(top
        .iter()
        .map(|g| g.powf(params.p))
        .sum::<f64>()
        .powf(1.0 / params.p))
}

fn trace_norm_of_difference(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let mut diff = a - b;
    crate::specmat::symmetrize(&mut diff);
    sym_eigendecompose(&SymmetricMatrix::from_symmetric_unchecked(diff))
        .eigenvalues()
        .iter()
        .map(|l| l.abs())
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KyFanCondition {
    /// `μ* = λ_1 / κ_max`, the same threshold the minimum eigenvalue method uses.
    pub threshold: f64,
    /// 1-based index with `λ_l ≤ μ* < λ_{l-1}`.
    pub l: usize,
    /// `d - l + 1`, the number of eigenvalues at or below the threshold.
    pub bound: usize,
    /// `κ_max ≥ d - l + 1`.
    pub satisfied: bool,
    /// `κ_max > d - l + 1`.
    pub satisfied_strict: bool,
}

/// Evaluates the condition under which the minimum eigenvalue method is the
/// trace-norm nearest matrix with condition number `kappa_max`.
pub fn me_kyfan_condition(r: &CovarianceMatrix, kappa_max: f64) -> Result<KyFanCondition> {
    if !(kappa_max > 1.0) || !kappa_max.is_finite() {
        return Err(Error::InvalidTarget { kappa_max });
    }
    let current = r.condition_number();
    if !current.exceeds(kappa_max) {
        return Err(Error::NoOpRequest {
            kappa_max,
            current: current.to_string(),
        });
    }
    Ok(condition_from_eigenvalues(
        r.decomposition().eigenvalues(),
        kappa_max,
    ))
}

fn condition_from_eigenvalues(eigenvalues: &DVector<f64>, kappa_max: f64) -> KyFanCondition {
    let d = eigenvalues.len();
    let lambda_1 = eigenvalues[0];
    let threshold = lambda_1 / kappa_max;
    let tie = threshold + THRESHOLD_TIE_TOL * lambda_1;
    let l = eigenvalues
        .iter()
        .position(|&v| v.max(0.0) <= tie)
        .map_or(d + 1, |i| i + 1);
    let bound = d + 1 - l;
    KyFanCondition {
        threshold,
        l,
        bound,
        satisfied: kappa_max >= bound as f64,
        satisfied_strict: kappa_max > bound as f64,
    }
}

/// Smallest integer `κ_max` in `[2, κ(R))` for which the condition holds, if any.
pub fn minimal_satisfying_kappa(r: &CovarianceMatrix, strict: bool) -> Result<Option<u64>> {
    let eigenvalues = r.decomposition().eigenvalues();
    let upper = match r.condition_number() {
        ConditionNumber::Finite(k) => k,
        ConditionNumber::Infinite => f64::INFINITY,
    };
    // Once κ_max reaches d every bound is met, so the scan is short.
    let limit = (r.dim() as u64 + 2).max(2);
    for kappa in 2..=limit {
        let k = kappa as f64;
        if k >= upper {
            return Ok(None);
        }
        let c = condition_from_eigenvalues(eigenvalues, k);
        if (strict && c.satisfied_strict) || (!strict && c.satisfied) {
            return Ok(Some(kappa));
        }
    }
    Ok(None)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleResult {
    /// Smallest `‖R - X̂‖_{1,d}` over all candidates, `R_ME` included.
    pub best_norm: f64,
    /// `‖R - R_ME‖_{1,d}`.
    pub me_norm: f64,
    /// Best norm among the random candidates only.
    pub best_random_norm: f64,
    pub trials: usize,
}

impl OracleResult {
    /// How far the best random candidate undercuts `R_ME` (positive means it beat it).
    pub fn improvement_over_me(&self) -> f64 {
        self.me_norm - self.best_random_norm
    }
}

fn random_orthogonal(d: usize, stream: &mut NormalStream, scale: Option<f64>) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| stream.next_normal());
    let m = match scale {
        Some(eps) => DMatrix::identity(d, d) + g * eps,
        None => g,
    };
    m.qr().q()
}

/// Random spectrum with condition number exactly `kappa_max`, either spread
/// uniformly or scattered around the spectrum of `R_ME`.
fn random_spectrum(
    reference: &DVector<f64>,
    kappa_max: f64,
    stream: &mut NormalStream,
    local: bool,
) -> DVector<f64> {
    let d = reference.len();
    let lambda_1 = reference[0];
    let (top, spread) = if local {
        let eps = 10f64.powf(-1.0 - 5.0 * stream.next_uniform());
        (
            lambda_1 * (1.0 + eps * stream.next_normal()).abs().max(1e-3),
            Some(eps),
        )
    } else {
        (lambda_1 * (2.0 * stream.next_normal()).exp(), None)
    };
    let bottom = top / kappa_max;
    let mut mu = DVector::zeros(d);
    mu[0] = top;
    mu[d - 1] = bottom;
    for i in 1..d - 1 {
        mu[i] = match spread {
            Some(eps) => (reference[i] + eps * lambda_1 * stream.next_normal()).clamp(bottom, top),
            None => bottom + (top - bottom) * stream.next_uniform(),
        };
    }
    mu
}

/// Randomised search for a matrix with condition number `kappa_max` that is
/// closer to `R` than `R_ME` in the trace norm.
///
/// Candidates `Q diag(μ) Q^T` have `μ_max / μ_min = κ_max` exactly. Bases are
/// the eigenvectors of `R`, small random rotations of them, or uniformly random
/// orthogonal matrices; spectra are either global or local perturbations of the
/// `R_ME` spectrum. Trial `t` draws from substream `t` of `seed`.
pub fn kyfan_minimizer_oracle(
    r: &CovarianceMatrix,
    kappa_max: f64,
    trials: usize,
    seed: u64,
) -> Result<OracleResult> {
    let d = r.dim();
    if d > ORACLE_MAX_DIM {
        return Err(Error::InvalidParameter {
            name: "dimension",
            value: d as f64,
            reason: "oracle supports at most 4 variables",
        });
    }
    if d < 2 {
        return Err(Error::AlreadyOptimal);
    }
    let me = min_eigenvalue(r, kappa_max)?;
    let r_mat = r.as_matrix();
    let me_norm = trace_norm_of_difference(r_mat, me.result.as_matrix());
    let me_spectrum = me.result.decomposition().eigenvalues().clone();
    let basis = r.decomposition().eigenvectors();

    let best_random_norm = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut stream = NormalStream::with_stream(seed, t as u64);
            let local = t % 2 == 0;
            let q = match (t / 2) % 3 {
                0 => basis.clone(),
                1 => {
                    let eps = 10f64.powf(-1.0 - 4.0 * stream.next_uniform());
                    basis * random_orthogonal(d, &mut stream, Some(eps))
                }
                _ => random_orthogonal(d, &mut stream, None),
            };
            let mu = random_spectrum(&me_spectrum, kappa_max, &mut stream, local);
            let mut scaled = q.clone();
            for (k, mut col) in scaled.column_iter_mut().enumerate() {
                col *= mu[k];
            }
            let candidate = scaled * q.transpose();
            trace_norm_of_difference(r_mat, &candidate)
        })
        .reduce(|| f64::INFINITY, f64::min);

    Ok(OracleResult {
        best_norm: best_random_norm.min(me_norm),
        me_norm,
        best_random_norm,
        trials,
    })
}

/// `‖R - R_ME‖_{1,d}`.
pub fn me_trace_distance(r: &CovarianceMatrix, kappa_max: f64) -> Result<f64> {
    let me = min_eigenvalue(r, kappa_max)?;
    Ok(trace_norm_of_difference(
        r.as_matrix(),
        me.result.as_matrix(),
    ))
}
