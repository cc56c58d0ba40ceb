//! Seedable generators for the benchmark mixtures, the double-well Langevin
//! sampler and the per-sample toy data.

mod benchmark;
mod langevin;
mod toy;

pub use benchmark::{
    benchmark_sigma_diagonal, k_modes_mixture, sample_benchmark, sample_k_modes, BenchmarkMixtureSpec, KModesSample,
    SIGMA_MAX2, SIGMA_MIN2,
};
pub use langevin::{
    double_well_curvature, double_well_energy, double_well_gradient, langevin_step, run_tempered_langevin,
    LangevinConfig, TemperedRun,
};
pub use toy::{
    normal_cdf, sample_individual_toy, toy_target_cdf, toy_target_ln_density, TOY_TARGET_MEANS, TOY_TARGET_VARIANCE,
};
