//! Gaussian-mixture benchmarks with exactly known weights.

use rand::Rng;

use crate::data::{Clustering, SampleSet, SimplexWeights};
use crate::oracles::{AnalyticDensity, AnalyticMixture};
use crate::{Error, Result};

pub const SIGMA_MIN2: f64 = 0.01;
pub const SIGMA_MAX2: f64 = 0.2;

/// Diagonal of `Σ₁`: entry `i` (1-based) is
/// `((d-i)/(d-1)) σ_min² + ((i-1)/(d-1)) σ_max²`.
pub fn benchmark_sigma_diagonal(d: usize, sigma_min2: f64, sigma_max2: f64) -> Result<Vec<f64>> {
    if d < 2 {
        return Err(Error::invalid("the covariance profile needs d ≥ 2"));
    }
    if !(sigma_min2 > 0.0 && sigma_max2 > 0.0) {
        return Err(Error::invalid("variances must be positive"));
    }
    let span = (d - 1) as f64;
    Ok((1..=d)
        .map(|i| ((d - i) as f64 / span) * sigma_min2 + ((i - 1) as f64 / span) * sigma_max2)
        .collect())
}

/// Two-mode mixture `p N(a·1, Σ₁) + (1-p) N(-a·1, Σ₂)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkMixtureSpec {
    pub separation: f64,
    pub dimension: usize,
    pub true_weight: f64,
    pub sigma_min2: f64,
    pub sigma_max2: f64,
}

impl BenchmarkMixtureSpec {
    pub fn new(separation: f64, dimension: usize, true_weight: f64, sigma_min2: f64, sigma_max2: f64) -> Result<Self> {
        if !(true_weight > 0.0 && true_weight < 1.0) {
            return Err(Error::invalid("true weight must lie in (0, 1)"));
        }
        if !separation.is_finite() {
            return Err(Error::invalid("separation must be finite"));
        }
        if dimension == 1 {
            // The affine profile is undefined for d = 1; only an isotropic spec is meaningful.
            if sigma_min2 != sigma_max2 || !(sigma_min2 > 0.0) {
                return Err(Error::invalid("d = 1 needs sigma_min2 == sigma_max2 > 0"));
            }
        } else {
            benchmark_sigma_diagonal(dimension, sigma_min2, sigma_max2)?;
        }
        Ok(Self {
            separation,
            dimension,
            true_weight,
            sigma_min2,
            sigma_max2,
        })
    }

    /// `p*_true = 0.7`, `σ_min² = 0.01`, `σ_max² = 0.2`.
    pub fn standard(separation: f64, dimension: usize) -> Result<Self> {
        Self::new(separation, dimension, 0.7, SIGMA_MIN2, SIGMA_MAX2)
    }

    pub fn sigma1(&self) -> Vec<f64> {
        if self.dimension == 1 {
            return vec![self.sigma_min2];
        }
        benchmark_sigma_diagonal(self.dimension, self.sigma_min2, self.sigma_max2).expect("validated")
    }

    /// `Σ₁` with the diagonal reversed.
    pub fn sigma2(&self) -> Vec<f64> {
        let mut v = self.sigma1();
        v.reverse();
        v
    }

    pub fn true_weights(&self) -> SimplexWeights {
        SimplexWeights::new(vec![self.true_weight, 1.0 - self.true_weight]).expect("valid weight")
    }

    pub fn mixture(&self) -> AnalyticMixture {
        let d = self.dimension;
        let plus = AnalyticDensity::gaussian_diagonal(vec![self.separation; d], self.sigma1()).expect("valid");
        let minus = AnalyticDensity::gaussian_diagonal(vec![-self.separation; d], self.sigma2()).expect("valid");
        AnalyticMixture::new(vec![plus, minus], self.true_weights()).expect("two components")
    }

    /// `U(x) = -ln μ(x)`.
    pub fn energy(&self, x: &[f64]) -> f64 {
        -self.mixture().ln_density(x)
    }
}

/// `per_mode` draws from each mode; cluster 0 is the `+a` mode.
pub fn sample_benchmark<R: Rng + ?Sized>(
    spec: &BenchmarkMixtureSpec,
    per_mode: usize,
    rng: &mut R,
) -> Result<(SampleSet, Clustering)> {
    if per_mode == 0 {
        return Err(Error::invalid("at least one sample per mode"));
    }
    let mixture = spec.mixture();
    let mut rows = Vec::with_capacity(2 * per_mode);
    let mut labels = Vec::with_capacity(2 * per_mode);
    for (k, component) in mixture.components().iter().enumerate() {
        for _ in 0..per_mode {
            rows.push(component.sample(rng)?);
            labels.push(k as u64);
        }
    }
    let energies = rows.iter().map(|x| -mixture.ln_density(x)).collect();
    let samples = SampleSet::from_rows(&rows, energies)?;
    let clustering = Clustering::from_labels(&labels)?;
    Ok((samples, clustering))
}

/// A drawn `K`-mode instance.
#[derive(Debug, Clone)]
pub struct KModesSample {
    pub samples: SampleSet,
    pub clustering: Clustering,
    pub true_weights: SimplexWeights,
    pub mixture: AnalyticMixture,
}

/// Weights `(0.4, 0.3, 0.1, …)` with the remaining `K-3` uniform draws
/// rescaled to `0.2`, means `N(0, I_d)`, covariances alternating `Σ₁` / `Σ₂`
/// starting with `Σ₁` for the first cluster.
pub fn k_modes_mixture<R: Rng + ?Sized>(k: usize, d: usize, rng: &mut R) -> Result<AnalyticMixture> {
    if k < 4 {
        return Err(Error::invalid("the K-mode benchmark needs K ≥ 4"));
    }
    let tail: Vec<f64> = (0..k - 3).map(|_| rng.random::<f64>()).collect();
    let tail_sum: f64 = tail.iter().sum();
    let mut weights = vec![0.4, 0.3, 0.1];
    weights.extend(tail.iter().map(|u| 0.2 * u / tail_sum));
    let sigma1 = benchmark_sigma_diagonal(d, SIGMA_MIN2, SIGMA_MAX2)?;
    let mut sigma2 = sigma1.clone();
    sigma2.reverse();
    let components = (0..k)
        .map(|c| {
            let mean: Vec<f64> = (0..d).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
            let cov = if c % 2 == 0 { sigma1.clone() } else { sigma2.clone() };
            AnalyticDensity::gaussian_diagonal(mean, cov)
        })
        .collect::<Result<Vec<_>>>()?;
    AnalyticMixture::new(components, SimplexWeights::new(weights)?)
}

pub fn sample_k_modes<R: Rng + ?Sized>(k: usize, d: usize, per_mode: usize, rng: &mut R) -> Result<KModesSample> {
    if per_mode == 0 {
        return Err(Error::invalid("at least one sample per mode"));
    }
    let mixture = k_modes_mixture(k, d, rng)?;
    let mut rows = Vec::with_capacity(k * per_mode);
    let mut labels = Vec::with_capacity(k * per_mode);
    for (c, component) in mixture.components().iter().enumerate() {
        for _ in 0..per_mode {
            rows.push(component.sample(rng)?);
            labels.push(c as u64);
        }
    }
    let energies = rows.iter().map(|x| -mixture.ln_density(x)).collect();
    Ok(KModesSample {
        samples: SampleSet::from_rows(&rows, energies)?,
        clustering: Clustering::from_labels(&labels)?,
        true_weights: mixture.weights().clone(),
        mixture,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::LN_SQRT_2PI;
    use crate::rng;
    use approx::assert_relative_eq;

    #[test]
    fn sigma_profile_examples() {
        let v = benchmark_sigma_diagonal(4, SIGMA_MIN2, SIGMA_MAX2).unwrap();
        let expected = [0.01, 0.073_333_333_333_333_33, 0.136_666_666_666_666_67, 0.2];
        for (a, b) in v.iter().zip(expected) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
        let v = benchmark_sigma_diagonal(50, SIGMA_MIN2, SIGMA_MAX2).unwrap();
        assert_eq!(v[0], 0.01);
        assert_relative_eq!(v[49], 0.2, epsilon = 1e-16);
        let steps: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(steps.iter().all(|s| *s > 0.0 && (s - steps[0]).abs() < 1e-15));
        assert!(benchmark_sigma_diagonal(1, SIGMA_MIN2, SIGMA_MAX2).is_err());
    }

    #[test]
    fn one_dimensional_spec_must_be_isotropic() {
        assert_eq!(BenchmarkMixtureSpec::new(0.1, 1, 0.7, 0.2, 0.2).unwrap().sigma2(), vec![0.2]);
        assert!(BenchmarkMixtureSpec::new(0.1, 1, 0.7, 0.01, 0.2).is_err());
    }

    #[test]
    fn sigma2_reverses_sigma1() {
        let s = BenchmarkMixtureSpec::standard(1.0, 5).unwrap();
        let mut r = s.sigma2();
        r.reverse();
        assert_eq!(r, s.sigma1());
    }

    #[test]
    fn cluster_means_follow_the_clt() {
        let spec = BenchmarkMixtureSpec::standard(0.5, 4).unwrap();
        let n = 2000;
        let (s, c) = sample_benchmark(&spec, n, &mut rng::stream(8, &[])).unwrap();
        let bound = 4.0 * (spec.sigma1().iter().sum::<f64>() / n as f64).sqrt();
        for j in 0..4 {
            let m: f64 = c.members(0).iter().map(|&i| s.point(i)[j]).sum::<f64>() / n as f64;
            assert!((m - 0.5).abs() <= bound);
        }
    }

    #[test]
    fn energies_are_minimal_at_mode_centers() {
        let spec = BenchmarkMixtureSpec::standard(10.0, 4).unwrap();
        assert!(spec.energy(&[10.0; 4]) < spec.energy(&[0.0; 4]));
        assert!(spec.energy(&[-10.0; 4]) < spec.energy(&[0.0; 4]));
    }

    #[test]
    fn energies_match_independent_evaluation() {
        let spec = BenchmarkMixtureSpec::standard(0.5, 3).unwrap();
        let (s, _) = sample_benchmark(&spec, 500, &mut rng::stream(9, &[])).unwrap();
        let s1 = spec.sigma1();
        let s2 = spec.sigma2();
        let density = |x: &[f64], m: f64, v: &[f64]| -> f64 {
            let q: f64 = x.iter().zip(v).map(|(xi, vi)| (xi - m).powi(2) / vi).sum();
            (-0.5 * q - 3.0 * LN_SQRT_2PI - 0.5 * v.iter().map(|a| a.ln()).sum::<f64>()).exp()
        };
        for i in 0..s.count() {
            let x = s.point(i);
            let u = -(0.7 * density(x, 0.5, &s1) + 0.3 * density(x, -0.5, &s2)).ln();
            assert!((u - s.energies()[i]).abs() <= 1e-10 * u.abs().max(1.0));
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let spec = BenchmarkMixtureSpec::standard(0.5, 4).unwrap();
        let a = sample_benchmark(&spec, 50, &mut rng::stream(1, &[2])).unwrap();
        let b = sample_benchmark(&spec, 50, &mut rng::stream(1, &[2])).unwrap();
        assert_eq!(a.0, b.0);
    }

    #[test]
    fn k_mode_weights_and_covariances() {
        let inst = sample_k_modes(10, 6, 20, &mut rng::stream(3, &[])).unwrap();
        let w = inst.true_weights.as_slice();
        assert_eq!(&w[..3], &[0.4, 0.3, 0.1]);
        assert!((w[3..].iter().sum::<f64>() - 0.2).abs() <= 1e-12);
        let s1 = benchmark_sigma_diagonal(6, SIGMA_MIN2, SIGMA_MAX2).unwrap();
        for (c, comp) in inst.mixture.components().iter().enumerate() {
            let v = comp.variances().unwrap();
            if c % 2 == 0 {
                assert_eq!(v, s1);
            } else {
                assert_eq!(v.iter().rev().copied().collect::<Vec<_>>(), s1);
            }
        }
        assert_eq!(inst.clustering.sizes(), vec![20; 10]);
        assert!(sample_k_modes(3, 6, 20, &mut rng::stream(3, &[])).is_err());
    }
}
