//! Exact piecewise-linear simulation of randomly initialized 1D ReLU
//! networks, the infinite-width Gaussian-process theory of their
//! pre-activation zero crossings, and a region-based sparsity measure.

pub mod error;
pub mod gp_theory;
pub mod montecarlo;
pub mod network;
pub mod pwl;
pub mod rng;
pub mod sparsity;

pub use error::{Error, Result};
pub use pwl::{linear_combine, relu_pwl, sup_norm_diff, PwlFunction};
