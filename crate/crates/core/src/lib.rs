//! Simulation and estimation toolkit for mixed semimartingales: a Brownian
//! martingale plus a (possibly correlated) fractional component.
//!
//! * [`fracgauss`]: fGn kernels, weight vectors and covariance matrices.
//! * [`simulate`]: exact and approximate path generation.
//! * [`estimate`]: lagged quadratic variations, Hurst and integrated
//!   (co)volatility estimators with feasible confidence intervals.
//! * [`lowerbound`]: Gaussian KL divergences along local perturbations.
//! * [`harness`]: seeded Monte Carlo experiments.

pub mod error;
pub mod estimate;
pub mod fracgauss;
pub mod harness;
pub mod lowerbound;
pub mod numeric;
pub mod simulate;

pub use error::{Error, Result};
pub use fracgauss::{Hurst, KernelTable, LagCovMatrix, ModelTheta};

pub use faer;
