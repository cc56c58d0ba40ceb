//! Product-Gaussian kernel density estimator.

use ndarray::{Array2, ArrayView2};

use super::bandwidth::{rule_bandwidths, BandwidthRule};
use super::LogDensity;
use crate::numeric::{log_sum_exp, LN_SQRT_2PI};
use crate::Result;

/// Gaussian KDE with one bandwidth per dimension.
#[derive(Debug, Clone)]
pub struct KdeModel {
    centers: Array2<f64>,
    bandwidths: Vec<f64>,
    /// Centers divided by their bandwidth, row-major.
    scaled: Vec<f64>,
    log_norm: f64,
}

impl KdeModel {
    /// Builds a model from explicit centers and bandwidths.
    pub fn new(centers: Array2<f64>, bandwidths: Vec<f64>) -> Result<Self> {
        let (n, dim) = centers.dim();
        if n == 0 || dim == 0 {
            return Err(crate::Error::invalid("KDE needs at least one center and one dimension"));
        }
        if bandwidths.len() != dim {
            return Err(crate::Error::invalid("one bandwidth per dimension required"));
        }
        if bandwidths.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(crate::Error::invalid("bandwidths must be positive and finite"));
        }
        if centers.iter().any(|c| !c.is_finite()) {
            return Err(crate::Error::invalid("KDE centers must be finite"));
        }
        let centers = centers.as_standard_layout().into_owned();
        let scaled = centers
            .rows()
            .into_iter()
            .flat_map(|row| row.iter().zip(&bandwidths).map(|(c, h)| c / h).collect::<Vec<_>>())
            .collect();
        let log_norm = -(n as f64).ln()
            - bandwidths.iter().map(|h| h.ln()).sum::<f64>()
            - dim as f64 * LN_SQRT_2PI;
        Ok(Self {
            centers,
            bandwidths,
            scaled,
            log_norm,
        })
    }

    pub fn centers(&self) -> ArrayView2<'_, f64> {
        self.centers.view()
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.bandwidths
    }

    pub fn dim(&self) -> usize {
        self.bandwidths.len()
    }

    /// `ln[(1/n) Σ_i Π_j φ((q_j - c_ij)/h_j)/h_j]`, accumulated in the log domain.
    pub fn log_density(&self, query: &[f64]) -> f64 {
        let dim = self.dim();
        let q: Vec<f64> = query.iter().zip(&self.bandwidths).map(|(x, h)| x / h).collect();
        let exponents = self.scaled.chunks_exact(dim).map(|c| {
            let mut s = 0.0;
            for (a, b) in c.iter().zip(&q) {
                let t = a - b;
                s += t * t;
            }
            -0.5 * s
        });
        self.log_norm + log_sum_exp(exponents)
    }
}

impl LogDensity for KdeModel {
    fn ln_density(&self, x: &[f64]) -> f64 {
        self.log_density(x)
    }
}

/// Fits a KDE on `features` (one row per sample) with bandwidths from `rule`.
pub fn fit_kde(features: ArrayView2<'_, f64>, rule: BandwidthRule) -> Result<KdeModel> {
    let bandwidths = rule_bandwidths(features, rule)?;
    KdeModel::new(features.to_owned(), bandwidths)
}

pub fn kde_log_density(model: &KdeModel, query: &[f64]) -> f64 {
    model.log_density(query)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn single_center_is_standard_normal() {
        let m = KdeModel::new(array![[0.0]], vec![1.0]).unwrap();
        assert_abs_diff_eq!(m.log_density(&[0.0]), -0.918_938_533_204_672_7, epsilon = 1e-14);
    }

    #[test]
    fn symmetric_pair_at_midpoint() {
        let m = KdeModel::new(array![[-1.0], [1.0]], vec![1.0]).unwrap();
        assert_abs_diff_eq!(m.log_density(&[0.0]), -1.418_938_533_204_672_7, epsilon = 1e-14);
    }

    #[test]
    fn fixed_rule_keeps_value() {
        let m = fit_kde(array![[3.0], [7.0], [-2.0]].view(), BandwidthRule::Fixed(1.0)).unwrap();
        assert_eq!(m.bandwidths(), &[1.0]);
    }

    #[test]
    fn translation_invariance() {
        let c = array![[0.3, -1.2], [1.7, 0.4], [-0.5, 2.2]];
        let t = [12.5, -7.25];
        let shifted = &c + &array![[t[0], t[1]]];
        let a = KdeModel::new(c, vec![0.7, 1.3]).unwrap();
        let b = KdeModel::new(shifted, vec![0.7, 1.3]).unwrap();
        let q = [0.1, 0.9];
        let qs = [q[0] + t[0], q[1] + t[1]];
        assert_abs_diff_eq!(a.log_density(&q), b.log_density(&qs), epsilon = 1e-12);
    }

    #[test]
    fn far_queries_stay_finite() {
        let m = KdeModel::new(array![[0.0; 256]], vec![0.05; 256]).unwrap();
        let v = m.log_density(&[10.0; 256]);
        assert!(v.is_finite() && v < -1e6);
    }

    #[test]
    fn rejects_bad_bandwidths() {
        assert!(KdeModel::new(array![[0.0]], vec![0.0]).is_err());
        assert!(KdeModel::new(array![[0.0]], vec![1.0, 1.0]).is_err());
    }
}
