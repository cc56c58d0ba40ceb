//! Densities known in closed form.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::quadrature::QuadratureGrid;
use crate::data::SimplexWeights;
use crate::density::LogDensity;
use crate::numeric::{log_sum_exp, LN_SQRT_2PI};
use crate::{Error, Result};

/// Half-width of the default support box, in standard deviations.
const BOX_SDS: f64 = 12.0;
const NORMALIZATION_TOL: f64 = 1e-8;

pub type LogDensityFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Diagonal {
        mean: Vec<f64>,
        variances: Vec<f64>,
        log_norm: f64,
    },
    Full {
        mean: DVector<f64>,
        covariance: DMatrix<f64>,
        cholesky: DMatrix<f64>,
        log_norm: f64,
    },
    Custom(LogDensityFn),
}

#[derive(Clone)]
pub struct AnalyticDensity {
    kind: Kind,
    support: Vec<(f64, f64)>,
}

impl fmt::Debug for AnalyticDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            Kind::Diagonal { .. } => "diagonal gaussian",
            Kind::Full { .. } => "gaussian",
            Kind::Custom(_) => "custom",
        };
        f.debug_struct("AnalyticDensity")
            .field("kind", &kind)
            .field("support", &self.support)
            .finish()
    }
}

impl AnalyticDensity {
    pub fn gaussian_diagonal(mean: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        if mean.is_empty() || mean.len() != variances.len() {
            return Err(Error::invalid("mean and variances must have equal positive length"));
        }
        if variances.iter().any(|v| !(v.is_finite() && *v > 0.0)) || mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::invalid("gaussian parameters must be finite with positive variances"));
        }
        let log_norm = -(mean.len() as f64) * LN_SQRT_2PI - 0.5 * variances.iter().map(|v| v.ln()).sum::<f64>();
        let support = mean
            .iter()
            .zip(&variances)
            .map(|(m, v)| (m - BOX_SDS * v.sqrt(), m + BOX_SDS * v.sqrt()))
            .collect();
        Ok(Self {
            kind: Kind::Diagonal {
                mean,
                variances,
                log_norm,
            },
            support,
        })
    }

    pub fn gaussian(mean: Vec<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 || covariance.nrows() != d || covariance.ncols() != d {
            return Err(Error::invalid("covariance must be d×d"));
        }
        if (&covariance - covariance.transpose()).amax() > 1e-12 * covariance.amax() {
            return Err(Error::invalid("covariance must be symmetric"));
        }
        let chol = covariance.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
        let l = chol.l();
        let log_det: f64 = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let support = (0..d)
            .map(|i| {
                let s = covariance[(i, i)].sqrt();
                (mean[i] - BOX_SDS * s, mean[i] + BOX_SDS * s)
            })
            .collect();
        Ok(Self {
            kind: Kind::Full {
                mean: DVector::from_vec(mean),
                covariance,
                cholesky: l,
                log_norm: -(d as f64) * LN_SQRT_2PI - 0.5 * log_det,
            },
            support,
        })
    }

    /// Arbitrary log-density on a box. For `d ≤ 2` the normalization is
    /// checked by quadrature on `points` nodes per dimension.
    pub fn custom(log_density: LogDensityFn, support: Vec<(f64, f64)>, points: usize) -> Result<Self> {
        let density = Self {
            kind: Kind::Custom(log_density),
            support,
        };
        if density.dim() <= 2 {
            let grid = QuadratureGrid::new(density.support.clone(), points)?;
            let mass = grid.integrate(|x| Ok(density.ln_density(x).exp()))?;
            if (mass - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::invalid(format!("custom density integrates to {mass}")));
            }
        }
        Ok(density)
    }

    pub fn dim(&self) -> usize {
        self.support.len()
    }

    pub fn support(&self) -> &[(f64, f64)] {
        &self.support
    }

    pub fn with_support(mut self, support: Vec<(f64, f64)>) -> Result<Self> {
        if support.len() != self.dim() {
            return Err(Error::invalid("support box has the wrong dimension"));
        }
        self.support = support;
        Ok(self)
    }

    pub fn mean(&self) -> Option<Vec<f64>> {
        match &self.kind {
            Kind::Diagonal { mean, .. } => Some(mean.clone()),
            Kind::Full { mean, .. } => Some(mean.iter().copied().collect()),
            Kind::Custom(_) => None,
        }
    }

    /// Covariance matrix when the density is Gaussian.
    pub fn covariance(&self) -> Option<DMatrix<f64>> {
        match &self.kind {
            Kind::Diagonal { variances, .. } => Some(DMatrix::from_diagonal(&DVector::from_column_slice(variances))),
            Kind::Full { covariance, .. } => Some(covariance.clone()),
            Kind::Custom(_) => None,
        }
    }

    pub fn variances(&self) -> Option<Vec<f64>> {
        self.covariance().map(|c| c.diagonal().iter().copied().collect())
    }

    pub fn ln_density(&self, x: &[f64]) -> f64 {
        match &self.kind {
            Kind::Diagonal {
                mean,
                variances,
                log_norm,
            } => {
                let q: f64 = x
                    .iter()
                    .zip(mean)
                    .zip(variances)
                    .map(|((xi, m), v)| (xi - m) * (xi - m) / v)
                    .sum();
                log_norm - 0.5 * q
            }
            Kind::Full {
                mean,
                cholesky,
                log_norm,
                ..
            } => {
                let r = DVector::from_iterator(x.len(), x.iter().zip(mean.iter()).map(|(a, b)| a - b));
                let z = cholesky.solve_lower_triangular(&r).expect("cholesky factor is invertible");
                log_norm - 0.5 * z.norm_squared()
            }
            Kind::Custom(f) => f(x),
        }
    }

    /// Draws a point; only Gaussians can be sampled.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        match &self.kind {
            Kind::Diagonal { mean, variances, .. } => Ok(mean
                .iter()
                .zip(variances)
                .map(|(m, v)| m + v.sqrt() * rng.sample::<f64, _>(StandardNormal))
                .collect()),
            Kind::Full { mean, cholesky, .. } => {
                let g = DVector::from_iterator(mean.len(), (0..mean.len()).map(|_| rng.sample::<f64, _>(StandardNormal)));
                Ok((mean + cholesky * g).iter().copied().collect())
            }
            Kind::Custom(_) => Err(Error::invalid("custom densities cannot be sampled")),
        }
    }
}

impl LogDensity for AnalyticDensity {
    fn ln_density(&self, x: &[f64]) -> f64 {
        AnalyticDensity::ln_density(self, x)
    }
}

/// `μ = Σ_k p*_k ν_k`.
#[derive(Debug, Clone)]
pub struct AnalyticMixture {
    components: Vec<AnalyticDensity>,
    weights: SimplexWeights,
}

impl AnalyticMixture {
    pub fn new(components: Vec<AnalyticDensity>, weights: SimplexWeights) -> Result<Self> {
        if components.is_empty() || components.len() != weights.len() {
            return Err(Error::invalid("one weight per component required"));
        }
        let d = components[0].dim();
        if components.iter().any(|c| c.dim() != d) {
            return Err(Error::invalid("components must share a dimension"));
        }
        Ok(Self { components, weights })
    }

    pub fn components(&self) -> &[AnalyticDensity] {
        &self.components
    }

    pub fn weights(&self) -> &SimplexWeights {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    /// Smallest box containing every component's support.
    pub fn support(&self) -> Vec<(f64, f64)> {
        (0..self.dim())
            .map(|i| {
                self.components.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
                    (lo.min(c.support[i].0), hi.max(c.support[i].1))
                })
            })
            .collect()
    }

    pub fn with_weights(&self, weights: SimplexWeights) -> Result<Self> {
        Self::new(self.components.clone(), weights)
    }

    pub fn ln_density(&self, x: &[f64]) -> f64 {
        log_sum_exp(
            self.components
                .iter()
                .zip(self.weights.as_slice())
                .filter(|(_, p)| **p > 0.0)
                .map(|(c, p)| p.ln() + c.ln_density(x)),
        )
    }

    /// Draws `(point, component)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(Vec<f64>, usize)> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut k = self.components.len() - 1;
        for (i, p) in self.weights.as_slice().iter().enumerate() {
            acc += p;
            if u < acc {
                k = i;
                break;
            }
        }
        Ok((self.components[k].sample(rng)?, k))
    }
}

impl LogDensity for AnalyticMixture {
    fn ln_density(&self, x: &[f64]) -> f64 {
        AnalyticMixture::ln_density(self, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn diagonal_and_full_gaussians_agree() {
        let a = AnalyticDensity::gaussian_diagonal(vec![0.5, -1.0], vec![0.3, 2.0]).unwrap();
        let b = AnalyticDensity::gaussian(vec![0.5, -1.0], DMatrix::from_diagonal(&DVector::from_vec(vec![0.3, 2.0])))
            .unwrap();
        for x in [[0.0, 0.0], [1.2, -3.0], [-2.0, 4.0]] {
            assert_relative_eq!(a.ln_density(&x), b.ln_density(&x), epsilon = 1e-12);
        }
    }

    #[test]
    fn correlated_gaussian_closed_form() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]);
        let g = AnalyticDensity::gaussian(vec![0.0, 0.0], cov).unwrap();
        // ln N(x; 0, Σ) at x = (1, 1): det = 1.75, Σ⁻¹ = [[2, -0.5], [-0.5, 1]] / 1.75.
        let q = (2.0 - 1.0 + 1.0) / 1.75;
        let expected = -(2.0 * std::f64::consts::PI).ln() - 0.5 * 1.75f64.ln() - 0.5 * q;
        assert_relative_eq!(g.ln_density(&[1.0, 1.0]), expected, epsilon = 1e-12);
    }

    #[test]
    fn custom_density_normalization_checked() {
        let f: LogDensityFn = Arc::new(|_| 0.0);
        assert!(AnalyticDensity::custom(f.clone(), vec![(0.0, 1.0)], 64).is_ok());
        assert!(AnalyticDensity::custom(f, vec![(0.0, 2.0)], 64).is_err());
    }

    #[test]
    fn mixture_sampling_matches_weights() {
        let c = vec![
            AnalyticDensity::gaussian_diagonal(vec![-3.0], vec![1.0]).unwrap(),
            AnalyticDensity::gaussian_diagonal(vec![3.0], vec![1.0]).unwrap(),
        ];
        let m = AnalyticMixture::new(c, SimplexWeights::new(vec![0.25, 0.75]).unwrap()).unwrap();
        let mut r = crate::rng::stream(1, &[]);
        let n = 20_000;
        let ones = (0..n).filter(|_| m.sample(&mut r).unwrap().1 == 1).count();
        let frac = ones as f64 / n as f64;
        assert!((frac - 0.75).abs() < 4.0 * (0.75f64 * 0.25 / n as f64).sqrt());
    }
}
