//! Least-squares conditional Gaussian for the complement block given the features.

use nalgebra::{DMatrix, DVector};
use ndarray::ArrayView2;

use super::FeatureSelection;
use crate::numeric::LN_SQRT_2PI;
use crate::{Error, Result};

/// Relative covariance regularization, scaled by the mean diagonal.
pub const COVARIANCE_REGULARIZATION: f64 = 1e-10;

/// `z | ξ ~ N(intercept + slope · ξ, residual_covariance)`.
#[derive(Debug, Clone)]
pub struct ConditionalGaussian {
    intercept: DVector<f64>,
    slope: DMatrix<f64>,
    residual_covariance: DMatrix<f64>,
    regularization: f64,
    /// Lower Cholesky factor of the residual covariance, row-major.
    cholesky: Vec<f64>,
    log_normalizer: f64,
}

impl ConditionalGaussian {
    pub fn intercept(&self) -> &DVector<f64> {
        &self.intercept
    }

    /// `(d - ℓ) × ℓ` regression matrix.
    pub fn slope(&self) -> &DMatrix<f64> {
        &self.slope
    }

    /// Residual covariance including the regularization term.
    pub fn residual_covariance(&self) -> &DMatrix<f64> {
        &self.residual_covariance
    }

    /// Amount added to the diagonal of the residual covariance.
    pub fn regularization(&self) -> f64 {
        self.regularization
    }

    pub fn log_normalizer(&self) -> f64 {
        self.log_normalizer
    }

    pub fn complement_dim(&self) -> usize {
        self.intercept.len()
    }

    /// `ln N(z; intercept + slope ξ, Σ)`.
    pub fn log_density(&self, features: &[f64], complement: &[f64]) -> f64 {
        let m = self.complement_dim();
        let mut r: Vec<f64> = (0..m)
            .map(|i| {
                let mut mu = self.intercept[i];
                for (j, x) in features.iter().enumerate() {
                    mu += self.slope[(i, j)] * x;
                }
                complement[i] - mu
            })
            .collect();
        // forward substitution L y = r, in place
        let mut quad = 0.0;
        for i in 0..m {
            let row = &self.cholesky[i * m..i * m + i];
            let dot: f64 = row.iter().zip(&r[..i]).map(|(a, b)| a * b).sum();
            r[i] = (r[i] - dot) / self.cholesky[i * m + i];
            quad += r[i] * r[i];
        }
        self.log_normalizer - 0.5 * quad
    }
}

fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    let n = x.nrows() as f64;
    DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n))
}

fn centered(x: &DMatrix<f64>, means: &DVector<f64>) -> DMatrix<f64> {
    let mut c = x.clone();
    for (j, mut col) in c.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    c
}

/// Fits the conditional Gaussian of `points[:, complement]` given
/// `points[:, features]` by least squares.
///
/// The slope is `Σ_ξ⁻¹ C` with `C` the feature/complement cross-covariance and
/// the covariance is that of the regression residuals, plus
/// `1e-10 · (mean diagonal)` on the diagonal. The mean diagonal of the raw
/// complement covariance is used when the residuals vanish.
pub fn fit_conditional_gaussian(
    points: ArrayView2<'_, f64>,
    selection: &FeatureSelection,
) -> Result<ConditionalGaussian> {
    let (n, d) = points.dim();
    if selection.dim() != d {
        return Err(Error::invalid("feature selection does not match point dimension"));
    }
    let feat = selection.features();
    let comp = selection.complement();
    let (l, m) = (feat.len(), comp.len());
    if m == 0 {
        return Err(Error::invalid("conditional Gaussian needs a nonempty complement block"));
    }
    if n <= l + 1 {
        return Err(Error::invalid(format!(
            "conditional Gaussian needs more than {} samples, got {n}",
            l + 1
        )));
    }
    let xi = DMatrix::from_fn(n, l, |i, j| points[[i, feat[j]]]);
    let z = DMatrix::from_fn(n, m, |i, j| points[[i, comp[j]]]);
    let xi_mean = column_means(&xi);
    let z_mean = column_means(&z);
    let xi_c = centered(&xi, &xi_mean);
    let z_c = centered(&z, &z_mean);
    let denom = (n - 1) as f64;

    let sigma_xi = xi_c.tr_mul(&xi_c) / denom;
    let cross = xi_c.tr_mul(&z_c) / denom;
    let max_var = sigma_xi.diagonal().max();
    let chol_xi = sigma_xi.cholesky().ok_or(Error::RankDeficientFeatures)?;
    let min_pivot = chol_xi.l_dirty().diagonal().map(|v| v * v).min();
    if !(min_pivot > 1e-14 * max_var) {
        return Err(Error::RankDeficientFeatures);
    }
    let alpha = chol_xi.solve(&cross); // ℓ × m
    if alpha.iter().any(|a| !a.is_finite()) {
        return Err(Error::RankDeficientFeatures);
    }
    let slope = alpha.transpose();
    let intercept = &z_mean - &slope * &xi_mean;

    let mut residuals = z - &xi * &alpha;
    for (j, mut col) in residuals.column_iter_mut().enumerate() {
        col.add_scalar_mut(-intercept[j]);
    }
    let r_mean = column_means(&residuals);
    let r_c = centered(&residuals, &r_mean);
    let mut cov = r_c.tr_mul(&r_c) / denom;
    cov = (&cov + cov.transpose()) * 0.5;

    let residual_scale = cov.trace() / m as f64;
    let raw_scale = (z_c.tr_mul(&z_c) / denom).trace() / m as f64;
    let regularization = COVARIANCE_REGULARIZATION
        * if residual_scale > COVARIANCE_REGULARIZATION * raw_scale {
            residual_scale
        } else {
            raw_scale
        };
    for i in 0..m {
        cov[(i, i)] += regularization;
    }
    let chol = cov.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let lower = chol.l();
    let log_det: f64 = 2.0 * lower.diagonal().iter().map(|v| v.ln()).sum::<f64>();
    if !log_det.is_finite() {
        return Err(Error::NotPositiveDefinite);
    }
    let cholesky = (0..m).flat_map(|i| (0..m).map(move |j| (i, j))).map(|ij| lower[ij]).collect();
    Ok(ConditionalGaussian {
        intercept,
        slope,
        residual_covariance: cov,
        regularization,
        cholesky,
        log_normalizer: -(m as f64) * LN_SQRT_2PI - 0.5 * log_det,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use ndarray::Array2;
    use rand_distr::{Distribution, StandardNormal};

    fn two_column(f: impl Fn(f64, f64) -> f64, n: usize, seed: u64) -> Array2<f64> {
        let mut rng = stream(seed, &[]);
        let mut a = Array2::zeros((n, 2));
        for i in 0..n {
            let y: f64 = StandardNormal.sample(&mut rng);
            let e: f64 = StandardNormal.sample(&mut rng);
            a[[i, 0]] = y;
            a[[i, 1]] = f(y, e);
        }
        a
    }

    #[test]
    fn exact_affine_relation_is_recovered() {
        let pts = two_column(|y, _| 2.0 * y + 1.0, 200, 1);
        let sel = FeatureSelection::new(vec![0], 2).unwrap();
        let g = fit_conditional_gaussian(pts.view(), &sel).unwrap();
        assert!((g.slope()[(0, 0)] - 2.0).abs() < 1e-10);
        assert!((g.intercept()[0] - 1.0).abs() < 1e-10);
        let floor = g.regularization();
        assert!(floor > 0.0);
        assert!(g.residual_covariance()[(0, 0)] <= floor * (1.0 + 1e-3), "{}", g.residual_covariance()[(0, 0)]);
    }

    #[test]
    fn independent_blocks_have_insignificant_slope() {
        let n = 10_000;
        let pts = two_column(|_, e| 0.5 * e + 3.0, n, 2);
        let sel = FeatureSelection::new(vec![0], 2).unwrap();
        let g = fit_conditional_gaussian(pts.view(), &sel).unwrap();
        let y = pts.column(0);
        let var_y = y.var(1.0);
        let resid_var = g.residual_covariance()[(0, 0)];
        let se = (resid_var / ((n - 1) as f64 * var_y)).sqrt();
        assert!(g.slope()[(0, 0)].abs() <= 4.0 * se, "slope {} se {se}", g.slope()[(0, 0)]);
    }

    #[test]
    fn residuals_are_orthogonal_to_features() {
        let n = 500;
        let mut rng = stream(3, &[]);
        let mut pts = Array2::zeros((n, 5));
        for i in 0..n {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            let e: [f64; 3] = [0; 3].map(|_| StandardNormal.sample(&mut rng));
            pts.row_mut(i).assign(&ndarray::arr1(&[
                3.0 * a,
                a - b + 0.2 * e[0],
                2.0 * b,
                0.5 * a + b * b + e[1],
                e[2] - a,
            ]));
        }
        let sel = FeatureSelection::new(vec![0, 2], 5).unwrap();
        let g = fit_conditional_gaussian(pts.view(), &sel).unwrap();
        let scale = pts.iter().map(|v| v * v).sum::<f64>() / pts.len() as f64;
        let mut fmean = [0.0; 2];
        for i in 0..n {
            fmean[0] += pts[[i, 0]] / n as f64;
            fmean[1] += pts[[i, 2]] / n as f64;
        }
        for (ci, &c) in sel.complement().iter().enumerate() {
            for (fj, &f) in [0usize, 2].iter().enumerate() {
                let mut cross = 0.0;
                for i in 0..n {
                    let feats = [pts[[i, 0]], pts[[i, 2]]];
                    let mut r = pts[[i, c]] - g.intercept()[ci];
                    r -= g.slope()[(ci, 0)] * feats[0] + g.slope()[(ci, 1)] * feats[1];
                    cross += r * (pts[[i, f]] - fmean[fj]);
                }
                cross /= (n - 1) as f64;
                assert!(cross.abs() <= 1e-10 * scale, "cross {cross}");
            }
        }
    }

    #[test]
    fn normalizer_matches_log_det() {
        let pts = two_column(|y, e| y + 0.3 * e, 300, 4);
        let sel = FeatureSelection::new(vec![0], 2).unwrap();
        let g = fit_conditional_gaussian(pts.view(), &sel).unwrap();
        let det = g.residual_covariance().determinant();
        let expected = -0.5 * ((2.0 * std::f64::consts::PI).ln() + det.ln());
        assert!((g.log_normalizer() - expected).abs() <= 1e-10);
    }

    #[test]
    fn rank_deficient_features_error() {
        // two identical feature columns
        let mut rng = stream(5, &[]);
        let mut pts = Array2::zeros((50, 3));
        for i in 0..50 {
            let a: f64 = StandardNormal.sample(&mut rng);
            pts[[i, 0]] = a;
            pts[[i, 1]] = a;
            pts[[i, 2]] = StandardNormal.sample(&mut rng);
        }
        let sel = FeatureSelection::new(vec![0, 1], 3).unwrap();
        assert!(matches!(
            fit_conditional_gaussian(pts.view(), &sel),
            Err(Error::RankDeficientFeatures)
        ));
    }
}
