//! Per-cluster density estimation.
//!
//! A cluster density is a product of a Gaussian KDE on a block of feature
//! coordinates (the highest-variance ones) and a Gaussian for the remaining
//! coordinates conditioned affinely on the features. Selecting coordinates is a
//! permutation, so no Jacobian enters the log-density.

mod bandwidth;
mod conditional;
mod kde;

use nalgebra::DMatrix;
use ndarray::ArrayView2;

pub use bandwidth::{rule_bandwidths, sheather_jones_bandwidth, BandwidthRule};
pub use conditional::{fit_conditional_gaussian, ConditionalGaussian, COVARIANCE_REGULARIZATION};
pub use kde::{fit_kde, kde_log_density, KdeModel};

use crate::numeric::sample_variance;
use crate::{Error, Result};

/// Anything that can be evaluated as a log-density on `R^d`.
///
/// `-inf` is a legal value (outside the support).
pub trait LogDensity {
    fn ln_density(&self, x: &[f64]) -> f64;
}

impl<T: LogDensity + ?Sized> LogDensity for &T {
    fn ln_density(&self, x: &[f64]) -> f64 {
        (**self).ln_density(x)
    }
}

impl<T: LogDensity + ?Sized> LogDensity for Box<T> {
    fn ln_density(&self, x: &[f64]) -> f64 {
        (**self).ln_density(x)
    }
}

/// Split of the coordinates into a feature block and its complement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSelection {
    features: Vec<usize>,
    complement: Vec<usize>,
}

impl FeatureSelection {
    /// `features` must be distinct indices below `dim`; they are kept sorted.
    pub fn new(mut features: Vec<usize>, dim: usize) -> Result<Self> {
        features.sort_unstable();
        features.dedup();
        if features.is_empty() || features.len() > dim || features.iter().any(|&i| i >= dim) {
            return Err(Error::invalid(format!(
                "invalid feature indices {features:?} for dimension {dim}"
            )));
        }
        let complement = (0..dim).filter(|i| features.binary_search(i).is_err()).collect();
        Ok(Self {
            features,
            complement,
        })
    }

    pub fn features(&self) -> &[usize] {
        &self.features
    }

    pub fn complement(&self) -> &[usize] {
        &self.complement
    }

    pub fn dim(&self) -> usize {
        self.features.len() + self.complement.len()
    }

    fn split(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (
            self.features.iter().map(|&i| x[i]).collect(),
            self.complement.iter().map(|&i| x[i]).collect(),
        )
    }
}

/// The `ell` coordinates of largest empirical variance, sorted ascending.
/// Ties go to the smaller index.
pub fn select_top_variance_features(points: ArrayView2<'_, f64>, ell: usize) -> Result<FeatureSelection> {
    let (n, d) = points.dim();
    if ell == 0 || ell > d {
        return Err(Error::invalid(format!("cannot select {ell} features out of {d}")));
    }
    if n < 2 {
        return Err(Error::invalid("feature selection needs at least two samples"));
    }
    let variances: Vec<f64> = points
        .columns()
        .into_iter()
        .map(|c| sample_variance(&c.to_vec()))
        .collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| variances[b].total_cmp(&variances[a]).then(a.cmp(&b)));
    order.truncate(ell);
    FeatureSelection::new(order, d)
}

/// Estimated density `ν_k` of one cluster.
#[derive(Debug, Clone)]
pub struct ClusterDensity {
    selection: FeatureSelection,
    marginal: KdeModel,
    conditional: Option<ConditionalGaussian>,
}

impl ClusterDensity {
    pub fn new(
        selection: FeatureSelection,
        marginal: KdeModel,
        conditional: Option<ConditionalGaussian>,
    ) -> Result<Self> {
        if marginal.dim() != selection.features().len() {
            return Err(Error::invalid("KDE dimension does not match the feature block"));
        }
        match &conditional {
            None if !selection.complement().is_empty() => {
                return Err(Error::invalid("a conditional Gaussian is required when ℓ < d"))
            }
            Some(c) if c.complement_dim() != selection.complement().len() => {
                return Err(Error::invalid("conditional dimension does not match the complement"))
            }
            _ => {}
        }
        Ok(Self {
            selection,
            marginal,
            conditional,
        })
    }

    pub fn selection(&self) -> &FeatureSelection {
        &self.selection
    }

    pub fn marginal(&self) -> &KdeModel {
        &self.marginal
    }

    pub fn conditional(&self) -> Option<&ConditionalGaussian> {
        self.conditional.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.selection.dim()
    }

    pub fn log_density(&self, point: &[f64]) -> f64 {
        match &self.conditional {
            None => self.marginal.log_density(point),
            Some(cond) => {
                let (xi, z) = self.selection.split(point);
                self.marginal.log_density(&xi) + cond.log_density(&xi, &z)
            }
        }
    }
}

impl LogDensity for ClusterDensity {
    fn ln_density(&self, x: &[f64]) -> f64 {
        self.log_density(x)
    }
}

pub fn cluster_log_density(density: &ClusterDensity, point: &[f64]) -> f64 {
    density.log_density(point)
}

/// Fits `ν_k` on one cluster's points: top-variance feature block of size
/// `min(ell, d)`, KDE on it, conditional Gaussian on the rest.
pub fn fit_cluster_density(points: ArrayView2<'_, f64>, ell: usize, rule: BandwidthRule) -> Result<ClusterDensity> {
    let d = points.ncols();
    let ell = ell.clamp(1, d.max(1));
    let selection = if ell == d {
        FeatureSelection::new((0..d).collect(), d)?
    } else {
        select_top_variance_features(points, ell)?
    };
    let features = points.select(ndarray::Axis(1), selection.features());
    let marginal = fit_kde(features.view(), rule)?;
    let conditional = if selection.complement().is_empty() {
        None
    } else {
        Some(fit_conditional_gaussian(points, &selection)?)
    };
    ClusterDensity::new(selection, marginal, conditional)
}

/// Differential entropy `½ ln det(2πe Σ)` of a Gaussian with covariance `Σ`.
pub fn gaussian_entropy(covariance: &DMatrix<f64>) -> Result<f64> {
    let m = covariance.nrows();
    if m == 0 || covariance.ncols() != m {
        return Err(Error::invalid("covariance must be a nonempty square matrix"));
    }
    let scale = covariance.amax().max(f64::MIN_POSITIVE);
    if (covariance - covariance.transpose()).amax() > 1e-12 * scale {
        return Err(Error::NotPositiveDefinite);
    }
    let chol = covariance.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    if !log_det.is_finite() {
        return Err(Error::NotPositiveDefinite);
    }
    let two_pi_e = 2.0 * std::f64::consts::PI * std::f64::consts::E;
    Ok(0.5 * (m as f64 * two_pi_e.ln() + log_det))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_points(n: usize, sds: &[f64], seed: u64) -> Array2<f64> {
        let mut rng = stream(seed, &[]);
        Array2::from_shape_fn((n, sds.len()), |(_, j)| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * sds[j]
        })
    }

    #[test]
    fn top_variance_basic_and_ties() {
        let p = array![[0.0, 0.0], [0.0, 1.0]];
        assert_eq!(select_top_variance_features(p.view(), 1).unwrap().features(), &[1]);

        let p = array![[0.0, 0.0, 0.0], [1.0, 1.0, 1.0], [3.0, 3.0, 3.0]];
        let sel = select_top_variance_features(p.view(), 2).unwrap();
        assert_eq!(sel.features(), &[0, 1]);
        assert_eq!(sel.complement(), &[2]);

        assert!(select_top_variance_features(p.view(), 4).is_err());
    }

    #[test]
    fn top_variance_follows_increasing_diagonal() {
        let d = 16;
        let sds: Vec<f64> = crate::samplers::benchmark_sigma_diagonal(d, 0.01, 0.2)
            .unwrap()
            .iter()
            .map(|v| v.sqrt())
            .collect();
        let p = gaussian_points(20_000, &sds, 9);
        let sel = select_top_variance_features(p.view(), 4).unwrap();
        assert_eq!(sel.features(), &(d - 4..d).collect::<Vec<_>>()[..]);
    }

    #[test]
    fn full_feature_block_is_kde_only() {
        let p = gaussian_points(200, &[1.0, 2.0], 1);
        let dens = fit_cluster_density(p.view(), 5, BandwidthRule::Scott).unwrap();
        assert!(dens.conditional().is_none());
        let q = [0.3, -0.2];
        assert_eq!(dens.log_density(&q), dens.marginal().log_density(&q));
    }

    #[test]
    fn one_dimensional_data_clamps_ell() {
        let p = gaussian_points(100, &[1.0], 2);
        let dens = fit_cluster_density(p.view(), 10, BandwidthRule::Scott).unwrap();
        assert_eq!(dens.selection().features(), &[0]);
        assert!(dens.conditional().is_none());
    }

    #[test]
    fn scott_bandwidths_follow_standard_deviations() {
        let diag = crate::samplers::benchmark_sigma_diagonal(4, 0.01, 0.2).unwrap();
        let sds: Vec<f64> = diag.iter().map(|v| v.sqrt()).collect();
        let p = gaussian_points(1000, &sds, 3);
        let kde = fit_kde(p.view(), BandwidthRule::Scott).unwrap();
        let h = kde.bandwidths();
        assert!(h.windows(2).all(|w| w[0] < w[1]), "{h:?}");
        let factor = 1000f64.powf(-1.0 / 8.0);
        for j in 0..4 {
            let col: Vec<f64> = p.column(j).to_vec();
            let m = col.iter().sum::<f64>() / 1000.0;
            let sd = (col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 999.0).sqrt();
            assert_abs_diff_eq!(h[j], sd * factor, epsilon = 1e-12);
        }
    }

    #[test]
    fn independent_blocks_add_up() {
        // ξ = column 1 (larger variance), z = column 0 independent of it
        let p = gaussian_points(2000, &[0.5, 2.0], 4);
        let dens = fit_cluster_density(p.view(), 1, BandwidthRule::Scott).unwrap();
        assert_eq!(dens.selection().features(), &[1]);
        let cond = dens.conditional().unwrap();
        let q = [0.2, -1.1];
        let expected = dens.marginal().log_density(&[q[1]]) + cond.log_density(&[q[1]], &[q[0]]);
        assert_abs_diff_eq!(dens.log_density(&q), expected, epsilon = 1e-10);
    }

    #[test]
    fn bivariate_standard_normal_at_origin() {
        let p = gaussian_points(10_000, &[1.0, 1.0], 5);
        let dens = fit_cluster_density(p.view(), 1, BandwidthRule::Scott).unwrap();
        let v = dens.log_density(&[0.0, 0.0]);
        let exact = -(2.0 * std::f64::consts::PI).ln();
        assert!((v - exact).abs() <= 0.1, "{v} vs {exact}");
    }

    #[test]
    fn finite_at_all_fitting_samples_in_high_dimension() {
        let spec = crate::samplers::BenchmarkMixtureSpec::standard(0.5, 64).unwrap();
        let mut rng = stream(6, &[]);
        let (samples, clustering) = crate::samplers::sample_benchmark(&spec, 1000, &mut rng).unwrap();
        let pts = samples.select_points(clustering.members(0));
        let dens = fit_cluster_density(pts.view(), 10, BandwidthRule::Scott).unwrap();
        for row in pts.rows() {
            assert!(dens.log_density(row.as_slice().unwrap()).is_finite());
        }
    }

    #[test]
    fn disjoint_clusters_have_negligible_cross_density() {
        let spec = crate::samplers::BenchmarkMixtureSpec::standard(10.0, 4).unwrap();
        let mut rng = stream(7, &[]);
        let (samples, clustering) = crate::samplers::sample_benchmark(&spec, 1000, &mut rng).unwrap();
        let first = samples.select_points(clustering.members(0));
        let dens = fit_cluster_density(first.view(), 10, BandwidthRule::Scott).unwrap();
        for &j in clustering.members(1) {
            assert!(dens.log_density(samples.point(j)) <= -1e3);
        }
    }

    #[test]
    fn permuting_fitting_samples_keeps_density() {
        let p = gaussian_points(300, &[1.0, 0.3, 2.0], 8);
        let mut rev = p.clone();
        rev.invert_axis(ndarray::Axis(0));
        let a = fit_cluster_density(p.view(), 2, BandwidthRule::Scott).unwrap();
        let b = fit_cluster_density(rev.view(), 2, BandwidthRule::Scott).unwrap();
        for row in p.rows().into_iter().take(50) {
            let x = row.to_vec();
            let (va, vb) = (a.log_density(&x), b.log_density(&x));
            assert!(va.is_finite());
            assert!((va - vb).abs() <= 1e-9 * (1.0 + va.abs()));
        }
    }

    #[test]
    fn entropy_closed_forms() {
        let one = DMatrix::from_element(1, 1, 1.0);
        assert_abs_diff_eq!(gaussian_entropy(&one).unwrap(), 1.418_938_533_204_672_7, epsilon = 1e-14);
        let id = DMatrix::<f64>::identity(2, 2);
        assert_abs_diff_eq!(gaussian_entropy(&id).unwrap(), 2.837_877_066_409_345_5, epsilon = 1e-14);
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 0.5]);
        let c = 3.7;
        let diff = gaussian_entropy(&(&s * c)).unwrap() - gaussian_entropy(&s).unwrap();
        assert_abs_diff_eq!(diff, c.ln(), epsilon = 1e-13);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(gaussian_entropy(&bad).is_err());
    }
}
