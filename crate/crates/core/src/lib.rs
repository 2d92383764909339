//! Bayesian experimental design with regularized determinantal point
//! processes.
//!
//! Given `n` candidate rows `X` and a prior precision `A`, pick `k` rows
//! minimizing an optimality criterion of `(X_SᵀX_S + A)⁻¹`. The main entry
//! points are [`selector::select_uniform`] and [`selector::select_relaxed`];
//! [`rdpp`] holds the sampler they are built on.

pub mod baselines;
pub mod bench;
pub mod cli;
pub mod criteria;
pub mod dataset;
pub mod error;
pub mod numerics;
pub mod rdpp;
pub mod relax;
pub mod rng;
pub mod selector;

pub use criteria::{Criterion, CriterionKind};
pub use dataset::{DesignMatrix, Prior};
pub use error::{Error, Result};
pub use selector::{DesignResult, SelectOptions};
