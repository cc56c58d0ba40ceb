//! Relative mode weights for multimodal targets.
//!
//! Samples that have already been sorted into clusters (one cluster per mode) are
//! reweighted by minimizing the reverse Kullback-Leibler divergence
//! `KL(π(p) | μ)` of the mixture `π(p) = Σ_k p_k ν_k` with respect to the target
//! `μ ∝ exp(-U)`, where each `ν_k` is a density estimated from the samples of
//! cluster `k`. The minimization runs exponentiated gradient descent on the
//! probability simplex with a Monte Carlo gradient built from the samples and
//! their energies only.
//!
//! Module map:
//!
//! - [`data`]: sample sets, clusterings, simplex weights and the reweighted estimator.
//! - [`density`]: per-cluster density estimation (feature-block KDE times a
//!   conditional Gaussian on the remaining coordinates).
//! - [`reweight`]: mixture log-density, stochastic gradient, descent, no-overlap
//!   closed form, per-sample weights.
//! - [`oracles`]: quadrature ground truth for analytic mixtures in one or two dimensions.
//! - [`samplers`]: seedable generators for the benchmark problems.
//! - [`bench`]: experiment harness with bias/variance statistics and CSV output.

pub mod bench;
pub mod data;
pub mod density;
mod error;
pub mod numeric;
pub mod oracles;
pub mod reweight;
pub mod rng;
pub mod samplers;

pub use data::{Clustering, SampleSet, SimplexWeights};
pub use density::{BandwidthRule, ClusterDensity, LogDensity};
pub use error::{Error, Result};
pub use reweight::{DescentConfig, DescentTrace, Init};
