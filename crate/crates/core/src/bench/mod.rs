//! Experiment harness: benchmark sweeps, descent traces, the K-mode study, the
//! tempered Langevin study and per-sample weights, with bias/variance statistics.
//!
//! Every run draws from `rng::stream(master, [cell, run])`, where `cell` is a
//! hash of the cell parameters, so sub-grids reproduce their rows exactly.

mod experiments;
mod table;

pub use experiments::*;
pub use table::{fmt_f64, Table};

use rayon::prelude::*;

use crate::data::{Clustering, SampleSet, SimplexWeights};
use crate::density::{fit_cluster_density, BandwidthRule, ClusterDensity};
use crate::{Error, Result};

/// Bias and variance of `M` independent outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunStatistics {
    pub runs: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    /// `|p̄ - p*|`.
    pub bias_norm: f64,
    /// `(1/(M-1)) Σ_i |p^(i) - p̄|²`.
    pub variance: f64,
    /// `|p̄₁ - p*₁|`.
    pub scalar_bias: f64,
}

pub fn compute_statistics(runs: &[Vec<f64>], true_weights: &SimplexWeights) -> Result<RunStatistics> {
    let m = runs.len();
    if m < 2 {
        return Err(Error::invalid("variance needs at least two runs"));
    }
    let k = true_weights.len();
    if runs.iter().any(|r| r.len() != k) {
        return Err(Error::invalid("every run must have one entry per cluster"));
    }
    let mean: Vec<f64> = (0..k).map(|c| runs.iter().map(|r| r[c]).sum::<f64>() / m as f64).collect();
    let dist2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let bias_norm = dist2(&mean, true_weights.as_slice()).sqrt();
    let variance = runs.iter().map(|r| dist2(r, &mean)).sum::<f64>() / (m - 1) as f64;
    Ok(RunStatistics {
        runs: runs.to_vec(),
        scalar_bias: (mean[0] - true_weights[0]).abs(),
        mean,
        bias_norm,
        variance,
    })
}

/// Feature count and bandwidth rule for cluster densities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityOptions {
    /// `None` means `min(d, 10)`.
    pub ell: Option<usize>,
    pub rule: BandwidthRule,
}

impl Default for DensityOptions {
    fn default() -> Self {
        Self {
            ell: None,
            rule: BandwidthRule::Scott,
        }
    }
}

impl DensityOptions {
    pub fn ell_for(&self, d: usize) -> usize {
        self.ell.unwrap_or(d.min(10)).clamp(1, d)
    }
}

/// Fits one density per cluster, in cluster order.
pub fn fit_densities(samples: &SampleSet, clustering: &Clustering, options: &DensityOptions) -> Result<Vec<ClusterDensity>> {
    let ell = options.ell_for(samples.dim());
    clustering
        .member_lists()
        .par_iter()
        .map(|m| fit_cluster_density(samples.select_points(m).view(), ell, options.rule))
        .collect()
}

/// Stable 64-bit key of a parameter cell.
pub fn cell_key(parts: &[u64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for p in parts {
        for b in p.to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// `sup_x |F_w(x) - F(x)|` for the weighted empirical CDF of `(x_i, w_i)`.
pub fn kolmogorov_distance<F: Fn(f64) -> f64>(x: &[f64], weights: &[f64], cdf: F) -> f64 {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    let mut worst: f64 = 0.0;
    let mut i = 0;
    while i < order.len() {
        let xi = x[order[i]];
        let f = cdf(xi);
        worst = worst.max((acc - f).abs());
        while i < order.len() && x[order[i]] == xi {
            acc += weights[order[i]] / total;
            i += 1;
        }
        worst = worst.max((acc - f).abs());
    }
    worst
}

/// Weighted empirical CDF evaluated at `at`.
pub fn weighted_cdf(x: &[f64], weights: &[f64], at: f64) -> f64 {
    let total: f64 = weights.iter().sum();
    x.iter().zip(weights).filter(|(xi, _)| **xi <= at).map(|(_, w)| w).sum::<f64>() / total
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn pearson_correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}
