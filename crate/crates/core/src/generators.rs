//! Test-matrix construction: SOAR covariances on the unit circle, seeded
//! Gaussian sampling, sample covariances, the five-scale truth signal, and CSV
//! matrix I/O.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::covariance::CovarianceMatrix;
use crate::error::{Error, Result};
use crate::specmat::SymmetricMatrix;

/// How the distance between two grid points on the unit circle is measured.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DistanceConvention {
    /// Great-circle (arc length) distance `θ`.
    Arc,
    /// Straight-line distance `2 sin(θ / 2)`. This reproduces the reference
    /// condition number 81121.71 for `n = 200`, `L = 0.2`.
    #[default]
    Chord,
}

impl fmt::Display for DistanceConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceConvention::Arc => "arc",
            DistanceConvention::Chord => "chord",
        })
    }
}

impl FromStr for DistanceConvention {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "arc" => Ok(DistanceConvention::Arc),
            "chord" => Ok(DistanceConvention::Chord),
            other => Err(format!(
                "unknown distance convention '{other}' (expected arc or chord)"
            )),
        }
    }
}

/// Parameters of a SOAR covariance matrix on `n` equally spaced points of the unit circle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SoarSpec {
    pub n: usize,
    pub lengthscale: f64,
    pub variance: f64,
    pub distance_convention: DistanceConvention,
}

impl Default for SoarSpec {
    fn default() -> Self {
        Self {
            n: 200,
            lengthscale: 0.2,
            variance: 5.0,
            distance_convention: DistanceConvention::Chord,
        }
    }
}

impl SoarSpec {
    pub fn new(n: usize, lengthscale: f64, variance: f64) -> Result<Self> {
        let spec = Self {
            n,
            lengthscale,
            variance,
            distance_convention: DistanceConvention::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_convention(mut self, convention: DistanceConvention) -> Self {
        self.distance_convention = convention;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter {
                name: "n",
                value: self.n as f64,
                reason: "need at least 2 grid points",
            });
        }
        if !(self.lengthscale > 0.0) {
            return Err(Error::InvalidParameter {
                name: "lengthscale",
                value: self.lengthscale,
                reason: "must be positive",
            });
        }
        if !(self.variance > 0.0) {
            return Err(Error::InvalidParameter {
                name: "variance",
                value: self.variance,
                reason: "must be positive",
            });
        }
        Ok(())
    }

    /// Distance between grid points separated by `offset` steps.
    pub fn distance(&self, offset: usize) -> f64 {
        let k = offset % self.n;
        let steps = k.min(self.n - k);
        let theta = 2.0 * PI * steps as f64 / self.n as f64;
        match self.distance_convention {
            DistanceConvention::Arc => theta,
            DistanceConvention::Chord => 2.0 * (0.5 * theta).sin(),
        }
    }
}

/// SOAR correlation `(1 + r/L) exp(-r/L)`.
pub fn soar_correlation(distance: f64, lengthscale: f64) -> f64 {
    let scaled = distance / lengthscale;
    (1.0 + scaled) * (-scaled).exp()
}

/// First row of the circulant SOAR covariance matrix.
pub fn soar_first_row(spec: &SoarSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    Ok((0..spec.n)
        .map(|k| spec.variance * soar_correlation(spec.distance(k), spec.lengthscale))
        .collect())
}

pub fn soar_matrix(spec: &SoarSpec) -> Result<CovarianceMatrix> {
    let row = soar_first_row(spec)?;
    let n = spec.n;
    let m = SymmetricMatrix::from_fn(n, |i, j| row[(j + n - i) % n]);
    CovarianceMatrix::new(m)
}

/// Standard normal deviates from ChaCha20 via the Box–Muller transform.
///
/// Each pair of 64-bit outputs `(a, b)` becomes uniforms
/// `u = ((x >> 11) + 1) * 2^-53` in `(0, 1]`, and then
/// `sqrt(-2 ln u1) cos(2π u2)` followed by `sqrt(-2 ln u1) sin(2π u2)`.
/// The generator is seeded with `ChaCha20Rng::seed_from_u64`.
pub struct NormalStream {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl NormalStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha20Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Independent substream `stream` of the generator for `seed`.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, spare: None }
    }

    pub fn next_uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.next_uniform();
        let u2 = self.next_uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * PI * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }
}

/// Rows are independent draws.
#[derive(Clone, Debug)]
pub struct SampleSet {
    pub samples: DMatrix<f64>,
    pub seed: u64,
    pub source_covariance: Option<CovarianceMatrix>,
}

impl SampleSet {
    pub fn count(&self) -> usize {
        self.samples.nrows()
    }

    pub fn dim(&self) -> usize {
        self.samples.ncols()
    }
}

/// `m` zero-mean draws with covariance `R`, generated as `R^{1/2} z` with the
/// symmetric square root `V Λ^{1/2} V^T`. Draw `i` consumes normals
/// `i*d .. (i+1)*d` of the stream.
pub fn gaussian_samples(r: &CovarianceMatrix, m: usize, seed: u64) -> SampleSet {
    let d = r.dim();
    let root = r.decomposition().reconstruct_with(|l| l.max(0.0).sqrt());
    let mut stream = NormalStream::new(seed);
    let mut samples = DMatrix::zeros(m, d);
    let mut z = DVector::zeros(d);
    for i in 0..m {
        for zj in z.iter_mut() {
            *zj = stream.next_normal();
        }
        let draw = &root * &z;
        samples.row_mut(i).copy_from(&draw.transpose());
    }
    SampleSet {
        samples,
        seed,
        source_covariance: Some(r.clone()),
    }
}

/// Unbiased sample covariance (normalised by `m - 1`) about the sample mean.
pub fn sample_covariance(set: &SampleSet) -> Result<CovarianceMatrix> {
    sample_covariance_of(&set.samples)
}

pub fn sample_covariance_of(samples: &DMatrix<f64>) -> Result<CovarianceMatrix> {
    let m = samples.nrows();
    if m < 2 {
        return Err(Error::InsufficientSamples { found: m });
    }
    let mean = samples.row_mean();
    let mut centred = samples.clone();
    for mut row in centred.row_iter_mut() {
        row -= &mean;
    }
    let cov = centred.tr_mul(&centred) / (m as f64 - 1.0);
    CovarianceMatrix::from_matrix(cov)
}

const TRUTH_TERMS: [(f64, f64); 5] = [
    (1.0, 4.0),
    (7.0, -5.1),
    (12.0, 1.5),
    (15.0, -3.0),
    (45.0, 0.75),
];

/// Five-scale test signal `Σ a_f sin(f k π / (n/2))` for `k = 0..n`, with
/// frequencies 1, 7, 12, 15, 45 and amplitudes 4, -5.1, 1.5, -3, 0.75.
pub fn truth_signal(n: usize) -> DVector<f64> {
    let half = n as f64 / 2.0;
    DVector::from_fn(n, |k, _| {
        TRUTH_TERMS
            .iter()
            .map(|&(f, a)| a * (f * k as f64 * PI / half).sin())
            .sum()
    })
}

/// Frequencies carried by [`truth_signal`].
pub fn truth_frequencies() -> [usize; 5] {
    [1, 7, 12, 15, 45]
}

/// Headerless CSV, one row per line, shortest round-trip decimal formatting.
pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn save_matrix_csv(m: &DMatrix<f64>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, matrix_to_csv(m)).map_err(|e| Error::io(path, e))
}

/// Parses a square headerless CSV matrix without any symmetry or PSD checks.
pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix_csv(&text, path)
}

fn parse_matrix_csv(text: &str, path: &Path) -> Result<DMatrix<f64>> {
    let parse_err = |line: usize, column: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message,
    };

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        last_line = line_no;
        let mut row = Vec::new();
        for (col, field) in line.split(',').enumerate() {
            let field = field.trim();
            let value: f64 = field.parse().map_err(|_| {
                parse_err(
                    line_no,
                    col + 1,
                    format!("cannot parse '{field}' as a number"),
                )
            })?;
            row.push(value);
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(parse_err(
                    line_no,
                    row.len().min(w) + 1,
                    format!("expected {w} columns, found {}", row.len()),
                ));
            }
            _ => {}
        }
        if rows.len() == row.len() {
            return Err(parse_err(
                line_no,
                1,
                format!("matrix is not square: more than {} rows", row.len()),
            ));
        }
        rows.push(row);
    }
    let Some(width) = width else {
        return Err(parse_err(1, 1, "file contains no data".into()));
    };
    if rows.len() != width {
        return Err(parse_err(
            last_line + 1,
            1,
            format!("matrix is not square: {} rows, {width} columns", rows.len()),
        ));
    }
    Ok(DMatrix::from_fn(width, width, |i, j| rows[i][j]))
}

/// Loads a CSV matrix and validates it as a covariance matrix.
pub fn load_matrix_csv(path: impl AsRef<Path>) -> Result<CovarianceMatrix> {
    CovarianceMatrix::from_matrix(read_matrix_csv(path)?)
}
