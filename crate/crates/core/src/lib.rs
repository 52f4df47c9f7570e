//! Hierarchical Bayesian MAP estimation for jointly sparse signals observed through
//! multiple measurement vectors.
//!
//! The crate provides the IAS and GSBL block-coordinate descent algorithms, their
//! joint-sparsity (MMV) counterparts, objective/Hessian diagnostics, conditional
//! posterior sampling and seeded drivers for the deblurring, sparse-recovery and
//! parallel-MRI experiments.

pub mod error;
pub mod experiments;
pub mod inference;
pub mod io;
pub mod model;
pub mod objective;
pub mod operators;
pub mod quad;
pub mod theta;
pub mod uq;

pub use error::{Error, Result};
pub use inference::{converged, least_squares_baseline, run, run_with_observer, AlgorithmSpec};
pub use model::{
    eta, validate, Coupling, HyperModelConfig, InnerSolver, IterationState, MmvProblem, RecoveryResult, SolverConfig,
    Variant,
};
pub use operators::{LinearMap, NoiseCovariance};
