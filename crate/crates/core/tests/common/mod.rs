#![allow(dead_code)]

use covrecon::generators::NormalStream;
use covrecon::CovarianceMatrix;
use nalgebra::{DMatrix, DVector};

/// Random orthogonal matrix from the QR factorisation of a Gaussian matrix.
pub fn random_orthogonal(d: usize, stream: &mut NormalStream) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |_, _| stream.next_normal()).qr().q()
}

/// `Q diag(λ) Q^T` with log-uniform eigenvalues spanning `10^decades`.
pub fn random_spd(d: usize, decades: f64, seed: u64) -> CovarianceMatrix {
    let mut stream = NormalStream::new(seed);
    let q = random_orthogonal(d, &mut stream);
    let mut values: Vec<f64> = (0..d)
        .map(|i| {
            let u = if i == 0 {
                0.0
            } else if i == d - 1 {
                1.0
            } else {
                stream.next_uniform()
            };
            10f64.powf(-decades * u)
        })
        .collect();
    values.sort_by(|a, b| b.total_cmp(a));
    let lambda = DMatrix::from_diagonal(&DVector::from_vec(values));
    let m = &q * lambda * q.transpose();
    CovarianceMatrix::from_matrix((&m + m.transpose()) * 0.5).unwrap()
}

pub fn random_vector(d: usize, stream: &mut NormalStream) -> DVector<f64> {
    DVector::from_fn(d, |_, _| stream.next_normal())
}

/// Condition number from nalgebra's own symmetric eigensolver.
pub fn oracle_kappa(m: &DMatrix<f64>) -> f64 {
    let e = m.clone().symmetric_eigen().eigenvalues;
    e.max() / e.min()
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}
