// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dual_solver;
pub mod engine;
pub mod env;
pub mod estimation;
pub mod harness;
pub mod error;
pub mod linalg;
pub mod oracle;
pub mod policy;
pub mod scalar;
pub mod trust_region;

pub use error::{Error, Result};

/// Concrete `f64` instantiations of the generic numerical types.
pub type GaussianPolicy = policy::GaussianPolicy<f64>;
pub type SoftmaxPolicy = policy::SoftmaxPolicy<f64>;
pub type PolicyParams = policy::PolicyParams<f64>;
pub type DenseMatrix = linalg::DenseMatrix<f64>;
pub type DualSolution = dual_solver::DualSolution<f64>;
pub type CanonicalSubproblem<O = DenseMatrix> = dual_solver::CanonicalSubproblem<f64, O>;
pub type KktReport = dual_solver::KktReport<f64>;
pub type CgSolution = trust_region::CgSolution<f64>;
