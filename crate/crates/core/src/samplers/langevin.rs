//! Double-well potential and a tempered unadjusted Langevin sampler.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::data::SampleSet;
use crate::rng;
use crate::{Error, Result};

/// `m(x) = 1/10 + 3 / (1 + e^{2x})`.
pub fn double_well_curvature(x: f64) -> f64 {
    0.1 + 3.0 / (1.0 + (2.0 * x).exp())
}

fn curvature_derivative(x: f64) -> f64 {
    // -6 e^{2x} / (1 + e^{2x})², written to stay finite for large |x|.
    let e = (-2.0 * x.abs()).exp();
    -6.0 * e / ((1.0 + e) * (1.0 + e))
}

/// `U(x, y) = x⁴/4 - x²/2 + x³/5 + m(x) y²/2`.
pub fn double_well_energy(x: f64, y: f64) -> f64 {
    x.powi(4) / 4.0 - x * x / 2.0 + x.powi(3) / 5.0 + double_well_curvature(x) * y * y / 2.0
}

pub fn double_well_gradient(x: f64, y: f64) -> (f64, f64) {
    let m = double_well_curvature(x);
    (
        x.powi(3) - x + 3.0 * x * x / 5.0 + curvature_derivative(x) * y * y / 2.0,
        m * y,
    )
}

/// `Z' = Z - h ∇U(Z) + sqrt(2h/β) G`.
pub fn langevin_step<G>(z: (f64, f64), grad: G, h: f64, beta: f64, noise: (f64, f64)) -> (f64, f64)
where
    G: Fn(f64, f64) -> (f64, f64),
{
    let (gx, gy) = grad(z.0, z.1);
    let s = (2.0 * h / beta).sqrt();
    (z.0 - h * gx + s * noise.0, z.1 - h * gy + s * noise.1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LangevinConfig {
    pub step_size: f64,
    pub beta: f64,
    pub steps: usize,
    pub replicas: usize,
}

impl LangevinConfig {
    fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::invalid("Langevin step size must be positive"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid("beta must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemperedRun {
    pub phase0: Vec<[f64; 2]>,
    /// Phase-1 endpoints with energies `β₁ U`.
    pub phase1: SampleSet,
}

/// Runs every replica from `N(0, I₂)` through `hot.steps` steps at `hot.beta`,
/// then `cold.steps` steps at `cold.beta`. Replica `i` draws from the substream
/// `(seed, i)`, so the result does not depend on scheduling.
pub fn run_tempered_langevin(hot: &LangevinConfig, cold: &LangevinConfig, seed: u64) -> Result<TemperedRun> {
    hot.validate()?;
    cold.validate()?;
    if hot.replicas != cold.replicas {
        return Err(Error::invalid("both phases must use the same replicas"));
    }
    if hot.replicas == 0 {
        return Err(Error::invalid("at least one replica"));
    }
    let ends = (0..hot.replicas)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, &[i as u64]);
            let mut z = (r.sample::<f64, _>(StandardNormal), r.sample::<f64, _>(StandardNormal));
            let mut step_index = 0;
            let mut run = |z: &mut (f64, f64), cfg: &LangevinConfig, r: &mut rng::StreamRng| -> Result<()> {
                for _ in 0..cfg.steps {
                    let noise = (r.sample::<f64, _>(StandardNormal), r.sample::<f64, _>(StandardNormal));
                    *z = langevin_step(*z, double_well_gradient, cfg.step_size, cfg.beta, noise);
                    step_index += 1;
                    if !(z.0.is_finite() && z.1.is_finite()) {
                        return Err(Error::TrajectoryDiverged {
                            replica: i,
                            step: step_index,
                        });
                    }
                }
                Ok(())
            };
            run(&mut z, hot, &mut r)?;
            let mid = [z.0, z.1];
            run(&mut z, cold, &mut r)?;
            Ok((mid, [z.0, z.1]))
        })
        .collect::<Result<Vec<_>>>()?;
    let (phase0, finals): (Vec<[f64; 2]>, Vec<[f64; 2]>) = ends.into_iter().unzip();
    let rows: Vec<Vec<f64>> = finals.iter().map(|z| z.to_vec()).collect();
    let energies = finals.iter().map(|z| cold.beta * double_well_energy(z[0], z[1])).collect();
    Ok(TemperedRun {
        phase0,
        phase1: SampleSet::from_rows(&rows, energies)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn potential_values() {
        assert_eq!(double_well_energy(0.0, 0.0), 0.0);
        assert_relative_eq!(double_well_curvature(0.0), 1.6, epsilon = 1e-15);
        assert!(double_well_curvature(50.0) > 0.1 - 1e-15);
        assert!((double_well_curvature(-50.0) - 3.1).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut r = rng::stream(4, &[]);
        let h = 1e-6;
        for _ in 0..100 {
            let x: f64 = r.random_range(-3.0..3.0);
            let y: f64 = r.random_range(-3.0..3.0);
            let (gx, gy) = double_well_gradient(x, y);
            let fx = (double_well_energy(x + h, y) - double_well_energy(x - h, y)) / (2.0 * h);
            let fy = (double_well_energy(x, y + h) - double_well_energy(x, y - h)) / (2.0 * h);
            let scale = |a: f64| a.abs().max(1e-2);
            assert!((fx - gx).abs() / scale(gx) <= 1e-6, "x={x} y={y}: {fx} vs {gx}");
            assert!((fy - gy).abs() / scale(gy) <= 1e-6);
        }
    }

    #[test]
    fn step_examples() {
        assert_eq!(langevin_step((0.3, -0.2), |_, _| (0.0, 0.0), 0.1, 1.0, (0.0, 0.0)), (0.3, -0.2));
        let z = langevin_step((1.0, 0.0), |x, y| (x, y), 0.1, 1.0, (0.0, 0.0));
        assert_relative_eq!(z.0, 0.9, epsilon = 1e-15);
        assert_eq!(z.1, 0.0);
    }

    #[test]
    fn quadratic_stationary_variance() {
        let (h, beta) = (0.1, 2.0);
        let mut r = rng::stream(12, &[]);
        let mut z = (0.0, 0.0);
        let n = 100_000;
        let (mut sx, mut sxx) = (0.0, 0.0);
        for _ in 0..1000 {
            let g = (r.sample::<f64, _>(StandardNormal), r.sample::<f64, _>(StandardNormal));
            z = langevin_step(z, |x, y| (x, y), h, beta, g);
        }
        for _ in 0..n {
            let g = (r.sample::<f64, _>(StandardNormal), r.sample::<f64, _>(StandardNormal));
            z = langevin_step(z, |x, y| (x, y), h, beta, g);
            sx += z.0;
            sxx += z.0 * z.0;
        }
        let var = sxx / n as f64 - (sx / n as f64).powi(2);
        let exact = (1.0 / beta) / (1.0 - h / 2.0);
        assert!((var / exact - 1.0).abs() <= 0.05, "{var} vs {exact}");
    }

    #[test]
    fn noiseless_cold_dynamics_descend() {
        let mut r = rng::stream(13, &[]);
        for _ in 0..20 {
            let mut z: (f64, f64) = (r.random_range(-2.0..2.0), r.random_range(-2.0..2.0));
            let mut e = double_well_energy(z.0, z.1);
            for _ in 0..100 {
                z = langevin_step(z, double_well_gradient, 1e-3, 1e12, (0.0, 0.0));
                let next = double_well_energy(z.0, z.1);
                assert!(next <= e + 1e-15);
                e = next;
            }
        }
    }

    #[test]
    fn zero_steps_return_initial_draws() {
        let cfg = LangevinConfig {
            step_size: 1e-2,
            beta: 1.0,
            steps: 0,
            replicas: 5,
        };
        let cold = LangevinConfig { beta: 10.0, ..cfg.clone() };
        let run = run_tempered_langevin(&cfg, &cold, 77).unwrap();
        for i in 0..5 {
            let mut r = rng::stream(77, &[i as u64]);
            let z0: f64 = r.sample(StandardNormal);
            let z1: f64 = r.sample(StandardNormal);
            assert_eq!(run.phase1.point(i), &[z0, z1]);
            assert_eq!(run.phase0[i], [z0, z1]);
        }
    }

    #[test]
    fn divergence_is_reported() {
        let cfg = LangevinConfig {
            step_size: 5.0,
            beta: 1.0,
            steps: 200,
            replicas: 3,
        };
        assert!(matches!(
            run_tempered_langevin(&cfg, &cfg, 1),
            Err(Error::TrajectoryDiverged { .. })
        ));
    }
}
