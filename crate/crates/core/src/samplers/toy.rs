//! One-dimensional data for the per-sample weights experiment.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::SampleSet;
use crate::numeric::{log_sum_exp, LN_SQRT_2PI};
use crate::{Error, Result};

/// Target means and variance: `½ N(1, 0.25) + ½ N(-1, 0.25)`.
pub const TOY_TARGET_MEANS: [f64; 2] = [1.0, -1.0];
pub const TOY_TARGET_VARIANCE: f64 = 0.25;

pub fn toy_target_ln_density(x: f64) -> f64 {
    let s = TOY_TARGET_VARIANCE.sqrt();
    log_sum_exp(TOY_TARGET_MEANS.iter().map(|m| {
        let z = (x - m) / s;
        0.5f64.ln() - 0.5 * z * z - s.ln() - LN_SQRT_2PI
    }))
}

pub fn toy_target_cdf(x: f64) -> f64 {
    let s = TOY_TARGET_VARIANCE.sqrt();
    TOY_TARGET_MEANS.iter().map(|m| 0.5 * normal_cdf((x - m) / s)).sum()
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// `n` i.i.d. copies of `Y + Z`, `Y ~ N(0, 1)`, `Z ~ U[-2, 4]`, with energies
/// `-ln` of the target density.
pub fn sample_individual_toy<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::invalid("at least one sample"));
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let y: f64 = rng.sample(StandardNormal);
            let z: f64 = rng.random_range(-2.0..4.0);
            vec![y + z]
        })
        .collect();
    let energies = rows.iter().map(|x| -toy_target_ln_density(x[0])).collect();
    SampleSet::from_rows(&rows, energies)
}
