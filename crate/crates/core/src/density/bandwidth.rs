//! Bandwidth selection: normal-reference rules and the Sheather-Jones
//! solve-the-equation plug-in estimator.

use ndarray::ArrayView2;

use crate::numeric::sample_variance;
use crate::{Error, Result};

/// How kernel bandwidths are chosen for each feature dimension.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum BandwidthRule {
    /// `h_j = σ_j n^{-1/(ℓ+4)}`
    #[default]
    Scott,
    /// `h_j = σ_j (4/(ℓ+2))^{1/(ℓ+4)} n^{-1/(ℓ+4)}`
    Silverman,
    /// Plug-in bandwidth; one-dimensional features only.
    SheatherJones,
    Fixed(f64),
}

/// Per-dimension bandwidths of `features` (rows are samples) under `rule`.
pub fn rule_bandwidths(features: ArrayView2<'_, f64>, rule: BandwidthRule) -> Result<Vec<f64>> {
    let (n, dim) = features.dim();
    if let BandwidthRule::Fixed(h) = rule {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::invalid(format!("fixed bandwidth must be positive, got {h}")));
        }
        return Ok(vec![h; dim]);
    }
    if n < 2 {
        return Err(Error::invalid("data-driven bandwidths need at least two samples"));
    }
    let columns: Vec<Vec<f64>> = features.columns().into_iter().map(|c| c.to_vec()).collect();
    let sds = columns
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let sd = sample_variance(c).sqrt();
            if sd > 0.0 {
                Ok(sd)
            } else {
                Err(Error::DegenerateDimension(j))
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let l = dim as f64;
    let nf = n as f64;
    match rule {
        BandwidthRule::Scott => {
            let factor = nf.powf(-1.0 / (l + 4.0));
            Ok(sds.iter().map(|s| s * factor).collect())
        }
        BandwidthRule::Silverman => {
            let factor = (4.0 / (l + 2.0)).powf(1.0 / (l + 4.0)) * nf.powf(-1.0 / (l + 4.0));
            Ok(sds.iter().map(|s| s * factor).collect())
        }
        BandwidthRule::SheatherJones => {
            if dim != 1 {
                return Err(Error::invalid(
                    "the Sheather-Jones rule is only available for one-dimensional features",
                ));
            }
            Ok(vec![sheather_jones_bandwidth(&columns[0])?])
        }
        BandwidthRule::Fixed(_) => unreachable!(),
    }
}

const SJ_BINS: usize = 1000;
const SJ_BISECTION_STEPS: usize = 200;

/// Sheather-Jones solve-the-equation bandwidth for one-dimensional data.
///
/// Pairwise kernel sums run on binned data. The root of the fixed-point
/// equation is located by bisection on `[1e-3 σ, 10 σ]`; when the bracket
/// holds no sign change (or the pilot estimate of the sixth-order functional
/// is not positive) the Silverman bandwidth is returned and a warning logged.
pub fn sheather_jones_bandwidth(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 10 {
        return Err(Error::invalid("the Sheather-Jones bandwidth needs at least 10 samples"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in bandwidth data"));
    }
    let sd = sample_variance(values).sqrt();
    if !(sd > 0.0) {
        return Err(Error::DegenerateDimension(0));
    }
    let nf = n as f64;
    let silverman = sd * (4.0f64 / 3.0).powf(0.2) * nf.powf(-0.2);

    let pairs = BinnedPairs::new(values);
    let scale = sd.min(interquartile_range(values) / 1.349);
    let scale = if scale > 0.0 { scale } else { sd };
    let a = 1.24 * scale * nf.powf(-1.0 / 7.0);
    let b = 1.23 * scale * nf.powf(-1.0 / 9.0);
    let c1 = 1.0 / (2.0 * std::f64::consts::PI.sqrt() * nf);

    let td = -pairs.phi6(b);
    if !(td.is_finite() && td > 0.0) {
        log::warn!("Sheather-Jones pilot estimate is not positive; using the Silverman bandwidth");
        return Ok(silverman);
    }
    let alpha2 = 1.357 * (pairs.phi4(a) / td).powf(1.0 / 7.0);
    let equation = |h: f64| {
        let roughness = pairs.phi4(alpha2 * h.powf(5.0 / 7.0));
        if roughness > 0.0 {
            (c1 / roughness).powf(0.2) - h
        } else {
            -h
        }
    };

    let (mut lo, mut hi) = (1e-3 * sd, 10.0 * sd);
    let (f_lo, f_hi) = (equation(lo), equation(hi));
    if !(f_lo.is_finite() && f_hi.is_finite()) || f_lo.signum() == f_hi.signum() {
        log::warn!("no Sheather-Jones root in [1e-3 sd, 10 sd]; using the Silverman bandwidth");
        return Ok(silverman);
    }
    let lo_positive = f_lo > 0.0;
    for _ in 0..SJ_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if (equation(mid) > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Pair counts by bin separation, for the binned density-functional estimates.
struct BinnedPairs {
    n: f64,
    bin_width: f64,
    counts: Vec<f64>,
}

impl BinnedPairs {
    fn new(values: &[f64]) -> Self {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let bin_width = (hi - lo) * 1.01 / SJ_BINS as f64;
        let mut occupancy = vec![0.0f64; SJ_BINS];
        for v in values {
            let b = (((v - lo) / bin_width) as usize).min(SJ_BINS - 1);
            occupancy[b] += 1.0;
        }
        let mut counts = vec![0.0f64; SJ_BINS];
        for i in 0..SJ_BINS {
            let w = occupancy[i];
            if w == 0.0 {
                continue;
            }
            for j in 0..i {
                counts[i - j] += w * occupancy[j];
            }
            counts[0] += w * (w - 1.0) * 0.5;
        }
        Self {
            n: values.len() as f64,
            bin_width,
            counts,
        }
    }

    /// Estimate of `∫ f''²` with a Gaussian kernel of scale `h`.
    fn phi4(&self, h: f64) -> f64 {
        let sum: f64 = self
            .counts
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > 0.0)
            .map(|(k, c)| {
                let d = (k as f64 * self.bin_width / h).powi(2);
                c * (d * d - 6.0 * d + 3.0) * (-0.5 * d).exp()
            })
            .sum();
        (2.0 * sum + 3.0 * self.n) / (self.n * (self.n - 1.0) * h.powi(5) * SQRT_2PI)
    }

    /// Estimate of `-∫ f''' ²` with a Gaussian kernel of scale `h`.
    fn phi6(&self, h: f64) -> f64 {
        let sum: f64 = self
            .counts
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > 0.0)
            .map(|(k, c)| {
                let d = (k as f64 * self.bin_width / h).powi(2);
                c * (((d - 15.0) * d + 45.0) * d - 15.0) * (-0.5 * d).exp()
            })
            .sum();
        (2.0 * sum - 15.0 * self.n) / (self.n * (self.n - 1.0) * h.powi(7) * SQRT_2PI)
    }
}

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

fn interquartile_range(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25)
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}
