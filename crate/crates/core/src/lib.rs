//! Random interlacements on Z^d restricted to finite windows: exact sampling,
//! quenched noise, percolation analytics, block renormalization, threshold
//! estimators and effective resistance.

pub mod error;
pub mod field;
pub mod lattice;
pub mod linalg;
pub mod noise;
pub mod parallel;
pub mod percolation;
pub mod potential;
pub mod renorm;
pub mod resistance;
pub mod sampler;
pub mod scalar;
pub mod seed;
pub mod stats;
pub mod thresholds;

pub use error::{Error, Result};
pub use field::{BondField, SiteField};
pub use lattice::{GreenFunction, LatticeWindow, Point};
pub use percolation::Configuration;
pub use potential::Potential;
pub use renorm::ScaleHierarchy;
pub use sampler::{InterlacementSample, SamplingMode, WindowSampler};
pub use scalar::Scalar;
pub use thresholds::ThresholdEstimator;

/// Default real type.
pub type Real = f64;

/// Resistor network over [`Real`].
pub type Network = resistance::ResistorNetwork<Real>;

/// Dense Cholesky factorization over [`Real`].
pub type Cholesky = linalg::Cholesky<Real>;

/// Conjugate-gradient solution over [`Real`].
pub type CgSolution = linalg::CgSolution<Real>;
