//! A miniature 3D-Var harness: the objective function, its linearised
//! Hessian, unpreconditioned conjugate gradients, and the scale analysis of
//! the resulting solutions with a DFT.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};

use crate::covariance::CovarianceMatrix;
use crate::error::{Error, Result};
use crate::generators::{
    gaussian_samples, sample_covariance, soar_matrix, truth_signal, DistanceConvention, SoarSpec,
};
use crate::recondition::{
    inverse_correction_spectrum, min_eigenvalue, mvi, ridge_regression, InverseCorrectionSpectrum,
};
use crate::specmat::{ConditionNumber, SpdInverse, SpectralDecomposition};

/// A symmetric linear map applied matrix-free.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, v: &DVector<f64>) -> DVector<f64>;
}

impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        self * v
    }
}

/// Inputs of the 3D-Var objective with a linear observation operator.
#[derive(Clone, Debug)]
pub struct DAProblem {
    pub background_cov: CovarianceMatrix,
    pub observation_cov: CovarianceMatrix,
    /// `d x n` observation operator.
    pub operator: DMatrix<f64>,
    pub background: DVector<f64>,
    pub observations: DVector<f64>,
}

impl DAProblem {
    pub fn new(
        background_cov: CovarianceMatrix,
        observation_cov: CovarianceMatrix,
        operator: DMatrix<f64>,
        background: DVector<f64>,
        observations: DVector<f64>,
    ) -> Result<Self> {
        let n = background_cov.dim();
        let d = observation_cov.dim();
        let mismatch = |expected, found| Err(Error::DimensionMismatch { expected, found });
        if operator.nrows() != d {
            return mismatch(d, operator.nrows());
        }
        if operator.ncols() != n {
            return mismatch(n, operator.ncols());
        }
        if background.len() != n {
            return mismatch(n, background.len());
        }
        if observations.len() != d {
            return mismatch(d, observations.len());
        }
        Ok(Self {
            background_cov,
            observation_cov,
            operator,
            background,
            observations,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.background_cov.dim()
    }

    pub fn observation_dim(&self) -> usize {
        self.observation_cov.dim()
    }

    /// Same problem with a different observation error covariance.
    pub fn with_observation_cov(&self, observation_cov: CovarianceMatrix) -> Result<Self> {
        Self::new(
            self.background_cov.clone(),
            observation_cov,
            self.operator.clone(),
            self.background.clone(),
            self.observations.clone(),
        )
    }

    /// `y - H x`.
    pub fn innovation(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.state_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.state_dim(),
                found: x.len(),
            });
        }
        Ok(&self.observations - &self.operator * x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveValue {
    pub total: f64,
    pub background: f64,
    pub observation: f64,
}

/// The objective with both inverses prepared once.
pub struct Objective {
    problem: DAProblem,
    background_inverse: SpdInverse,
    observation_inverse: SpdInverse,
}

impl Objective {
    pub fn new(problem: &DAProblem) -> Result<Self> {
        Ok(Self {
            background_inverse: SpdInverse::new(problem.background_cov.decomposition())?,
            observation_inverse: SpdInverse::new(problem.observation_cov.decomposition())?,
            problem: problem.clone(),
        })
    }

    /// `J_b = ½ (x - x_b)^T B^{-1} (x - x_b)`, `J_o = ½ (y - Hx)^T R^{-1} (y - Hx)`.
    pub fn evaluate(&self, x: &DVector<f64>) -> Result<ObjectiveValue> {
        let innovation = self.problem.innovation(x)?;
        let departure = x - &self.problem.background;
        let background = 0.5 * departure.dot(&self.background_inverse.apply(&departure));
        let observation = 0.5 * innovation.dot(&self.observation_inverse.apply(&innovation));
        Ok(ObjectiveValue {
            total: background + observation,
            background,
            observation,
        })
    }
}

pub fn evaluate_objective(p: &DAProblem, x: &DVector<f64>) -> Result<ObjectiveValue> {
    Objective::new(p)?.evaluate(x)
}

/// Amount by which a modified observation covariance lowers `J` at `x`:
/// `½ (y - Hx)^T V diag(c) V^T (y - Hx)` for RR and ME, where `V` and the
/// spectrum `c` come from the unmodified `R`.
pub fn objective_correction(
    p: &DAProblem,
    spectrum: &InverseCorrectionSpectrum,
    decomp: &SpectralDecomposition,
    x: &DVector<f64>,
) -> Result<f64> {
    let innovation = p.innovation(x)?;
    Ok(0.5 * spectrum.quadratic_form(decomp, &innovation))
}

/// Dense linearised Hessian `S = B^{-1} + H^T R^{-1} H`.
#[derive(Clone, Debug)]
pub struct Hessian {
    matrix: DMatrix<f64>,
}

impl Hessian {
    pub fn from_inverses(
        background_inverse: &DMatrix<f64>,
        observation_inverse: &DMatrix<f64>,
        operator: Option<&DMatrix<f64>>,
    ) -> Self {
        let mut matrix = match operator {
            None => background_inverse + observation_inverse,
            Some(h) => background_inverse + h.transpose() * observation_inverse * h,
        };
        crate::specmat::symmetrize(&mut matrix);
        Self { matrix }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

impl LinearOperator for Hessian {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.matrix * v
    }
}

pub fn hessian_apply(p: &DAProblem) -> Result<Hessian> {
    let b_inv = SpdInverse::new(p.background_cov.decomposition())?.to_matrix();
    let r_inv = SpdInverse::new(p.observation_cov.decomposition())?.to_matrix();
    Ok(Hessian::from_inverses(&b_inv, &r_inv, Some(&p.operator)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgOptions {
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iter: 200,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CgResult {
    pub solution: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub final_relative_residual: f64,
    /// Relative residual after each iteration.
    pub residual_history: Vec<f64>,
}

/// Unpreconditioned conjugate gradients from a zero initial guess.
///
/// Stops when `||r_k|| / ||b|| < tol`. When the recurrence residual passes the
/// test, the true residual `b - S x` is checked too; if it has not converged
/// the recurrence is restarted from the true residual and iteration continues.
pub fn cg_solve(
    op: &impl LinearOperator,
    b: &DVector<f64>,
    options: CgOptions,
) -> Result<CgResult> {
    let n = op.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    let b_norm = b.norm();
    if !b_norm.is_finite() {
        return Err(Error::NumericalBreakdown(
            "right-hand side is not finite".into(),
        ));
    }
    let mut x = DVector::zeros(n);
    if b_norm == 0.0 {
        return Ok(CgResult {
            solution: x,
            iterations: 0,
            converged: true,
            final_relative_residual: 0.0,
            residual_history: Vec::new(),
        });
    }

    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = r.dot(&r);
    let mut history = Vec::with_capacity(options.max_iter);
    let mut relative = 1.0;

    for iteration in 1..=options.max_iter {
        let q = op.apply(&p);
        let curvature = p.dot(&q);
        if !curvature.is_finite() {
            return Err(Error::NumericalBreakdown(format!(
                "non-finite curvature at iteration {iteration}"
            )));
        }
        if curvature <= 0.0 {
            return Err(Error::NumericalBreakdown(format!(
                "non-positive curvature {curvature:e} at iteration {iteration}; operator is not positive definite"
            )));
        }
        let step = rr / curvature;
        x.axpy(step, &p, 1.0);
        r.axpy(-step, &q, 1.0);
        let mut rr_next = r.dot(&r);
        relative = rr_next.sqrt() / b_norm;
        if !relative.is_finite() {
            return Err(Error::NumericalBreakdown(format!(
                "non-finite residual at iteration {iteration}"
            )));
        }

        if relative < options.tolerance {
            let true_residual = b - op.apply(&x);
            let true_relative = true_residual.norm() / b_norm;
            if true_relative < options.tolerance {
                history.push(true_relative);
                return Ok(CgResult {
                    solution: x,
                    iterations: iteration,
                    converged: true,
                    final_relative_residual: true_relative,
                    residual_history: history,
                });
            }
            r = true_residual;
            rr_next = r.dot(&r);
            relative = true_relative;
        }
        history.push(relative);

        let beta = rr_next / rr;
        p = &r + &p * beta;
        rr = rr_next;
    }

    Ok(CgResult {
        solution: x,
        iterations: options.max_iter,
        converged: false,
        final_relative_residual: relative,
        residual_history: history,
    })
}

/// Imaginary parts of `X_f = Σ_k x_k exp(-2πi f k / n)`, `f = 0..n`.
pub fn dft_imag(x: &DVector<f64>) -> DVector<f64> {
    let n = x.len();
    if n == 0 {
        return DVector::zeros(0);
    }
    let mut buffer: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buffer);
    DVector::from_iterator(n, buffer.iter().map(|c| c.im))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    True,
    Estimated,
    RidgeRegression,
    MinimumEigenvalue,
    InflatedRr,
    InflatedMe,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::True,
        Variant::Estimated,
        Variant::RidgeRegression,
        Variant::MinimumEigenvalue,
        Variant::InflatedRr,
        Variant::InflatedMe,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Variant::True => "TRUE",
            Variant::Estimated => "EST",
            Variant::RidgeRegression => "RR",
            Variant::MinimumEigenvalue => "ME",
            Variant::InflatedRr => "INFL_RR",
            Variant::InflatedMe => "INFL_ME",
        }
    }

    /// Whether the variant depends on the target condition number.
    pub fn is_swept(&self) -> bool {
        !matches!(self, Variant::True | Variant::Estimated)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Debug)]
pub struct DaConfig {
    pub n: usize,
    pub m_samples: usize,
    pub seed: u64,
    pub kappa_max: Vec<f64>,
    /// Fixed inflation factors replacing the standard-deviation-matched ones.
    pub alpha_rr: Option<f64>,
    pub alpha_me: Option<f64>,
    pub background_lengthscale: f64,
    pub background_variance: f64,
    pub observation_lengthscale: f64,
    pub observation_variance: f64,
    pub distance_convention: DistanceConvention,
    pub cg: CgOptions,
    /// Use the true observation covariance in place of the sampled estimate.
    pub estimate_is_truth: bool,
}

impl Default for DaConfig {
    fn default() -> Self {
        Self {
            n: 200,
            m_samples: 250,
            seed: 42,
            kappa_max: vec![10000.0, 1000.0, 100.0, 50.0, 10.0],
            alpha_rr: None,
            alpha_me: None,
            background_lengthscale: 0.2,
            background_variance: 1.0,
            observation_lengthscale: 0.7,
            observation_variance: 1.0,
            distance_convention: DistanceConvention::Chord,
            cg: CgOptions::default(),
            estimate_is_truth: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct VariantRun {
    pub variant: Variant,
    pub kappa_max: Option<f64>,
    pub alpha: Option<f64>,
    /// Condition number of the observation covariance used.
    pub condition_number: ConditionNumber,
    pub cg: CgResult,
    /// `imag(DFT(solution))`.
    pub dft: DVector<f64>,
}

#[derive(Clone, Debug)]
pub struct KappaSweep {
    pub kappa_max: f64,
    /// `sqrt(R_RR(1,1)) / sqrt(R_est(1,1))`, or the configured override.
    pub alpha_rr: f64,
    /// `sqrt(R_ME(1,1)) / sqrt(R_est(1,1))`, or the configured override.
    pub alpha_me: f64,
    /// Mean over all variables of `sqrt(R_ME(i,i) / R_est(i,i))`.
    pub alpha_me_mean: f64,
    pub ridge: VariantRun,
    pub min_eig: VariantRun,
    pub inflated_rr: VariantRun,
    pub inflated_me: VariantRun,
}

impl KappaSweep {
    pub fn run(&self, variant: Variant) -> Option<&VariantRun> {
        match variant {
            Variant::RidgeRegression => Some(&self.ridge),
            Variant::MinimumEigenvalue => Some(&self.min_eig),
            Variant::InflatedRr => Some(&self.inflated_rr),
            Variant::InflatedMe => Some(&self.inflated_me),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DAExperimentResult {
    pub config: DaConfig,
    pub x_true: DVector<f64>,
    pub a_true: DVector<f64>,
    /// Right-hand side `S_true x_true` shared by every variant.
    pub rhs: DVector<f64>,
    pub estimate_std_range: (f64, f64),
    pub true_run: VariantRun,
    pub estimated_run: VariantRun,
    pub sweeps: Vec<KappaSweep>,
}

impl DAExperimentResult {
    /// The run for `variant`; swept variants need the matching `kappa_max`.
    pub fn run(&self, variant: Variant, kappa_max: Option<f64>) -> Option<&VariantRun> {
        match variant {
            Variant::True => Some(&self.true_run),
            Variant::Estimated => Some(&self.estimated_run),
            _ => self
                .sweeps
                .iter()
                .find(|s| Some(s.kappa_max) == kappa_max)
                .and_then(|s| s.run(variant)),
        }
    }

    pub fn iterations(&self, variant: Variant, kappa_max: Option<f64>) -> Option<usize> {
        self.run(variant, kappa_max).map(|r| r.cg.iterations)
    }

    /// Correction `|a_est - a_true| - |a_mod - a_true|` per frequency:
    /// positive where the modified solution is closer to the truth.
    pub fn correction(&self, run: &VariantRun) -> DVector<f64> {
        let est = &self.estimated_run.dft;
        DVector::from_fn(self.a_true.len(), |f, _| {
            (est[f] - self.a_true[f]).abs() - (run.dft[f] - self.a_true[f]).abs()
        })
    }
}

struct Shared<'a> {
    background_inverse: &'a DMatrix<f64>,
    rhs: &'a DVector<f64>,
    cg: CgOptions,
}

impl Shared<'_> {
    fn solve(
        &self,
        variant: Variant,
        observation_cov: &CovarianceMatrix,
        kappa_max: Option<f64>,
        alpha: Option<f64>,
    ) -> Result<VariantRun> {
        let r_inv = SpdInverse::new(observation_cov.decomposition())?.to_matrix();
        let hessian = Hessian::from_inverses(self.background_inverse, &r_inv, None);
        let cg = cg_solve(&hessian, self.rhs, self.cg)?;
        let dft = dft_imag(&cg.solution);
        Ok(VariantRun {
            variant,
            kappa_max,
            alpha,
            condition_number: observation_cov.condition_number(),
            cg,
            dft,
        })
    }
}

/// Runs the twin experiment: solve `S x = b` with `b = S_true x_true` for the
/// true, sampled, reconditioned and inflated observation covariances.
///
/// The observation operator is the identity. Variants for different target
/// condition numbers are solved in parallel; results do not depend on
/// scheduling.
pub fn run_da_experiment(config: &DaConfig) -> Result<DAExperimentResult> {
    let n = config.n;
    let background_cov = soar_matrix(
        &SoarSpec::new(n, config.background_lengthscale, config.background_variance)?
            .with_convention(config.distance_convention),
    )?;
    let true_cov = soar_matrix(
        &SoarSpec::new(
            n,
            config.observation_lengthscale,
            config.observation_variance,
        )?
        .with_convention(config.distance_convention),
    )?;

    let background_inverse = SpdInverse::new(background_cov.decomposition())?.to_matrix();
    let true_inverse = SpdInverse::new(true_cov.decomposition())?.to_matrix();
    let true_hessian = Hessian::from_inverses(&background_inverse, &true_inverse, None);
    let x_true = truth_signal(n);
    let rhs = true_hessian.apply(&x_true);

    let estimate = if config.estimate_is_truth {
        true_cov.clone()
    } else {
        sample_covariance(&gaussian_samples(&true_cov, config.m_samples, config.seed))?
    };
    let std_devs = estimate.std_devs();
    let estimate_std_range = (std_devs.min(), std_devs.max());

    let shared = Shared {
        background_inverse: &background_inverse,
        rhs: &rhs,
        cg: config.cg,
    };
    let true_run = shared.solve(Variant::True, &true_cov, None, None)?;
    let estimated_run = shared.solve(Variant::Estimated, &estimate, None, None)?;

    let sweeps = config
        .kappa_max
        .par_iter()
        .map(|&kappa_max| -> Result<KappaSweep> {
            let ridge = ridge_regression(&estimate, kappa_max)?;
            let min_eig = min_eigenvalue(&estimate, kappa_max)?;
            let base_sd = estimate.get(0, 0).sqrt();
            let alpha_rr = config
                .alpha_rr
                .unwrap_or_else(|| ridge.result.get(0, 0).sqrt() / base_sd);
            let alpha_me = config
                .alpha_me
                .unwrap_or_else(|| min_eig.result.get(0, 0).sqrt() / base_sd);
            let alpha_me_mean = min_eig.inflation_factors().mean();
            let inflated_rr = mvi(&estimate, alpha_rr)?;
            let inflated_me = mvi(&estimate, alpha_me)?;
            let k = Some(kappa_max);
            Ok(KappaSweep {
                kappa_max,
                alpha_rr,
                alpha_me,
                alpha_me_mean,
                ridge: shared.solve(Variant::RidgeRegression, &ridge.result, k, None)?,
                min_eig: shared.solve(Variant::MinimumEigenvalue, &min_eig.result, k, None)?,
                inflated_rr: shared.solve(
                    Variant::InflatedRr,
                    &inflated_rr.result,
                    k,
                    Some(alpha_rr),
                )?,
                inflated_me: shared.solve(
                    Variant::InflatedMe,
                    &inflated_me.result,
                    k,
                    Some(alpha_me),
                )?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(DAExperimentResult {
        config: config.clone(),
        a_true: dft_imag(&x_true),
        x_true,
        rhs,
        estimate_std_range,
        true_run,
        estimated_run,
        sweeps,
    })
}

/// Inverse-correction spectra of RR and ME applied to `r` at `kappa_max`,
/// as `(ridge, min_eig)`.
pub fn correction_spectra(
    r: &CovarianceMatrix,
    kappa_max: f64,
) -> Result<(InverseCorrectionSpectrum, InverseCorrectionSpectrum)> {
    let ridge = ridge_regression(r, kappa_max)?;
    let min_eig = min_eigenvalue(r, kappa_max)?;
    Ok((
        inverse_correction_spectrum(&ridge, r.decomposition())?,
        inverse_correction_spectrum(&min_eig, r.decomposition())?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specmat::SymmetricMatrix;
    use approx::assert_relative_eq;

    fn scalar_cov(v: f64) -> CovarianceMatrix {
        CovarianceMatrix::new(SymmetricMatrix::from_diagonal(&[v])).unwrap()
    }

    fn vec1(v: f64) -> DVector<f64> {
        DVector::from_vec(vec![v])
    }

    #[test]
    fn scalar_objective() {
        let p = DAProblem::new(
            scalar_cov(1.0),
            scalar_cov(1.0),
            DMatrix::identity(1, 1),
            vec1(0.0),
            vec1(2.0),
        )
        .unwrap();
        let j = evaluate_objective(&p, &vec1(1.0)).unwrap();
        assert_eq!(j.background, 0.5);
        assert_eq!(j.observation, 0.5);
        assert_eq!(j.total, 1.0);
    }

    #[test]
    fn zero_innovation_objective() {
        let b = CovarianceMatrix::new(SymmetricMatrix::from_diagonal(&[2.0, 3.0])).unwrap();
        let r = CovarianceMatrix::new(SymmetricMatrix::from_diagonal(&[1.0, 5.0])).unwrap();
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        let xb = DVector::from_vec(vec![0.3, -0.7]);
        let y = &h * &xb;
        let p = DAProblem::new(b, r, h, xb.clone(), y).unwrap();
        assert_eq!(evaluate_objective(&p, &xb).unwrap().total, 0.0);
    }

    #[test]
    fn objective_rejects_singular_and_bad_dims() {
        let p = DAProblem::new(
            scalar_cov(1.0),
            scalar_cov(0.0),
            DMatrix::identity(1, 1),
            vec1(0.0),
            vec1(1.0),
        )
        .unwrap();
        assert!(matches!(
            evaluate_objective(&p, &vec1(0.0)),
            Err(Error::Singular { .. })
        ));
        assert!(DAProblem::new(
            scalar_cov(1.0),
            scalar_cov(1.0),
            DMatrix::identity(2, 1),
            vec1(0.0),
            vec1(1.0),
        )
        .is_err());
    }

    #[test]
    fn hessian_small_cases() {
        let identity = CovarianceMatrix::new(SymmetricMatrix::identity(3)).unwrap();
        let p = DAProblem::new(
            identity.clone(),
            identity,
            DMatrix::identity(3, 3),
            DVector::zeros(3),
            DVector::zeros(3),
        )
        .unwrap();
        assert_eq!(
            hessian_apply(&p).unwrap().matrix(),
            &(DMatrix::identity(3, 3) * 2.0)
        );

        let p = DAProblem::new(
            scalar_cov(1.0),
            scalar_cov(0.5),
            DMatrix::identity(1, 1),
            vec1(0.0),
            vec1(0.0),
        )
        .unwrap();
        assert_eq!(hessian_apply(&p).unwrap().matrix()[(0, 0)], 3.0);
    }

    #[test]
    fn cg_small_cases() {
        let b = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let result = cg_solve(&DMatrix::<f64>::identity(3, 3), &b, CgOptions::default()).unwrap();
        assert_eq!(result.iterations, 1);
        assert!(result.converged);
        assert_eq!(result.solution, b);

        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let result =
            cg_solve(&s, &DVector::from_vec(vec![1.0, 2.0]), CgOptions::default()).unwrap();
        assert!(result.converged);
        assert!(result.iterations <= 2);
        assert_relative_eq!(result.solution[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(result.solution[1], 1.0, epsilon = 1e-12);

        let zero = cg_solve(&s, &DVector::zeros(2), CgOptions::default()).unwrap();
        assert_eq!(zero.iterations, 0);
        assert!(zero.converged);
    }

    #[test]
    fn cg_hits_iteration_cap() {
        let s = DMatrix::from_diagonal(&DVector::from_fn(50, |i, _| 1.0 + i as f64 * 1e3));
        let b = DVector::from_element(50, 1.0);
        let opts = CgOptions {
            tolerance: 1e-14,
            max_iter: 5,
        };
        let result = cg_solve(&s, &b, opts).unwrap();
        assert!(!result.converged);
        assert_eq!(result.iterations, 5);
        assert_eq!(result.residual_history.len(), 5);
    }

    #[test]
    fn cg_reports_breakdown() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let b = DVector::from_vec(vec![0.0, 1.0]);
        assert!(matches!(
            cg_solve(&s, &b, CgOptions::default()),
            Err(Error::NumericalBreakdown(_))
        ));
        let nan = DVector::from_vec(vec![f64::NAN, 1.0]);
        assert!(matches!(
            cg_solve(&DMatrix::<f64>::identity(2, 2), &nan, CgOptions::default()),
            Err(Error::NumericalBreakdown(_))
        ));
    }

    #[test]
    fn dft_of_constant_and_sine() {
        let c = dft_imag(&DVector::from_element(16, 3.0));
        assert!(c.iter().all(|v| v.abs() < 1e-12));

        let n = 200;
        let x = DVector::from_fn(n, |k, _| {
            4.0 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).sin()
        });
        let a = dft_imag(&x);
        assert_relative_eq!(a[1], -400.0, epsilon = 1e-9);
        assert_relative_eq!(a[199], 400.0, epsilon = 1e-9);
        for f in 2..199 {
            assert!(a[f].abs() < 1e-9);
        }
    }
}
