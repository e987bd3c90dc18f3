//! Reconditioning of ill-conditioned covariance matrices by ridge regression,
//! the minimum eigenvalue method and multiplicative variance inflation, with
//! the experiments used to compare them.

// Negated comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assimilation;
pub mod cli;
pub mod covariance;
pub mod error;
pub mod generators;
pub mod kyfan;
pub mod recondition;
pub mod specmat;

pub use covariance::{CorrStdPair, CovarianceMatrix};
pub use error::{Error, Result};
pub use recondition::{Method, ReconditionReport};
pub use specmat::{ConditionNumber, SpectralDecomposition, SymmetricMatrix};
