//! Per-sample weights: every sample is its own cluster with a Gaussian kernel.
//!
//! With `ν_i = N(x_i, σ²)` the mixture `π(p)` is the weighted empirical measure
//! smoothed by `N(0, σ²)`, and the single-member gradient is
//! `G_i = 1 + U(x_i) + ln π(p)(x_i)`. For large `N` the kernel sum at the
//! samples is evaluated by linear binning and an FFT convolution.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{exp_gradient_step, DescentConfig, Init};
use crate::data::{SampleSet, SimplexWeights};
use crate::density::sheather_jones_bandwidth;
use crate::numeric::{log_sum_exp, LN_SQRT_2PI};
use crate::{Error, Result};

const DIRECT_LIMIT: usize = 500;
/// Grid spacing of the binned route, in units of `σ`.
const BINS_PER_SIGMA: f64 = 512.0;
/// Kernel truncation radius of the binned route, in units of `σ`.
const KERNEL_RADIUS: f64 = 10.0;

/// How `Σ_j p_j φ_σ(x_i - x_j)` is evaluated at the samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelSum {
    /// Direct below a few hundred samples, binned above.
    #[default]
    Auto,
    Direct,
    Binned,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndividualConfig {
    pub descent: DescentConfig,
    pub kernel_sum: KernelSum,
}

impl Default for IndividualConfig {
    fn default() -> Self {
        Self {
            descent: DescentConfig {
                init: Init::Uniform,
                ..DescentConfig::default()
            },
            kernel_sum: KernelSum::Auto,
        }
    }
}

/// Summary row of one iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndividualTraceRow {
    pub iteration: usize,
    /// `N max_i p_i`.
    pub max_scaled: f64,
    /// `N min_i p_i`.
    pub min_scaled: f64,
    /// `1 / Σ p_i²`.
    pub effective_size: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndividualResult {
    pub weights: SimplexWeights,
    pub bandwidth: f64,
    pub trace: Vec<IndividualTraceRow>,
    /// Largest `|Σ p - 1|` seen over all iterates.
    pub max_simplex_defect: f64,
}

/// Runs the descent with `K = N`, fixed Sheather–Jones bandwidth, uniform start.
pub fn individual_reweight(samples: &SampleSet, config: &IndividualConfig) -> Result<IndividualResult> {
    if samples.dim() != 1 {
        return Err(Error::invalid("individual weights need one-dimensional samples"));
    }
    if samples.count() < 10 {
        return Err(Error::invalid("individual weights need at least 10 samples"));
    }
    let descent = &config.descent;
    if !(descent.step_size > 0.0 && descent.step_size.is_finite()) {
        return Err(Error::invalid("step size must be positive"));
    }
    let x: Vec<f64> = (0..samples.count()).map(|i| samples.point(i)[0]).collect();
    let sigma = sheather_jones_bandwidth(&x)?;
    let n = x.len();
    let mut weights = match &descent.init {
        Init::Uniform | Init::NoOverlap => SimplexWeights::uniform(n),
        Init::Custom(p) if p.len() == n => p.clone(),
        Init::Custom(_) => return Err(Error::invalid("custom initializer has the wrong length")),
    };

    let use_direct = match config.kernel_sum {
        KernelSum::Direct => true,
        KernelSum::Binned => false,
        KernelSum::Auto => n <= DIRECT_LIMIT,
    };
    let evaluator = if use_direct {
        KernelEvaluator::Direct
    } else {
        KernelEvaluator::Binned(BinnedKernel::new(&x, sigma))
    };

    let mut trace = vec![trace_row(0, &weights)];
    let mut max_defect = simplex_defect(&weights);
    for m in 0..descent.iterations {
        let ln_pi = evaluator.ln_mixture(&x, weights.as_slice(), sigma);
        let gradient: Vec<f64> = (0..n).map(|i| 1.0 + samples.energies()[i] + ln_pi[i]).collect();
        weights = exp_gradient_step(&weights, &gradient, descent.step_size).map_err(|e| Error::Descent {
            iteration: m,
            partial: Box::new(super::DescentTrace {
                iterates: vec![weights.clone()],
                no_overlap_weights: None,
                w_values: Vec::new(),
            }),
            source: Box::new(e),
        })?;
        max_defect = max_defect.max(simplex_defect(&weights));
        trace.push(trace_row(m + 1, &weights));
    }
    Ok(IndividualResult {
        weights,
        bandwidth: sigma,
        trace,
        max_simplex_defect: max_defect,
    })
}

fn simplex_defect(p: &SimplexWeights) -> f64 {
    (p.as_slice().iter().sum::<f64>() - 1.0).abs()
}

fn trace_row(iteration: usize, p: &SimplexWeights) -> IndividualTraceRow {
    let n = p.len() as f64;
    let s = p.as_slice();
    IndividualTraceRow {
        iteration,
        max_scaled: n * s.iter().copied().fold(0.0, f64::max),
        min_scaled: n * s.iter().copied().fold(f64::INFINITY, f64::min),
        effective_size: 1.0 / s.iter().map(|v| v * v).sum::<f64>(),
    }
}

enum KernelEvaluator {
    Direct,
    Binned(BinnedKernel),
}

impl KernelEvaluator {
    fn ln_mixture(&self, x: &[f64], p: &[f64], sigma: f64) -> Vec<f64> {
        match self {
            Self::Direct => direct_ln_mixture(x, p, sigma),
            Self::Binned(b) => b.ln_mixture(x, p),
        }
    }
}

/// `ln Σ_j p_j φ_σ(x_i - x_j)` for every `i` by direct summation.
pub fn direct_ln_mixture(x: &[f64], p: &[f64], sigma: f64) -> Vec<f64> {
    direct_ln_mixture_at(x, p, sigma, x)
}

/// `ln Σ_j p_j φ_σ(q - x_j)` at every query point `q`.
pub fn direct_ln_mixture_at(x: &[f64], p: &[f64], sigma: f64, queries: &[f64]) -> Vec<f64> {
    let ln_norm = -sigma.ln() - LN_SQRT_2PI;
    let lp: Vec<f64> = p.iter().map(|v| if *v > 0.0 { v.ln() } else { f64::NEG_INFINITY }).collect();
    queries
        .par_iter()
        .map(|&xi| {
            let inner = x.iter().zip(&lp).map(|(&xj, &l)| {
                let z = (xi - xj) / sigma;
                l - 0.5 * z * z
            });
            log_sum_exp(inner) + ln_norm
        })
        .collect()
}

/// `ln Σ_j p_j φ_σ(x_i - x_j)` by linear binning and FFT convolution.
pub fn binned_ln_mixture(x: &[f64], p: &[f64], sigma: f64) -> Vec<f64> {
    BinnedKernel::new(x, sigma).ln_mixture(x, p)
}

struct BinnedKernel {
    lo: f64,
    spacing: f64,
    bins: usize,
    half_width: usize,
    size: usize,
    kernel_hat: Vec<Complex<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    self_term: f64,
}

impl BinnedKernel {
    fn new(x: &[f64], sigma: f64) -> Self {
        let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let spacing = sigma / BINS_PER_SIGMA;
        let bins = ((hi - lo) / spacing).ceil() as usize + 2;
        let half_width = (KERNEL_RADIUS * BINS_PER_SIGMA).ceil() as usize;
        let size = (bins + 2 * half_width + 1).next_power_of_two();

        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);

        // Kernel stored with wrap-around so that output index == bin index.
        let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        let mut kernel_hat = vec![Complex::new(0.0, 0.0); size];
        for k in 0..=half_width {
            let z = k as f64 * spacing / sigma;
            let v = norm * (-0.5 * z * z).exp();
            kernel_hat[k] = Complex::new(v, 0.0);
            if k > 0 {
                kernel_hat[size - k] = Complex::new(v, 0.0);
            }
        }
        forward.process(&mut kernel_hat);
        Self {
            lo,
            spacing,
            bins,
            half_width,
            size,
            kernel_hat,
            forward,
            inverse,
            self_term: norm,
        }
    }

    fn locate(&self, xi: f64) -> (usize, f64) {
        let t = (xi - self.lo) / self.spacing;
        let b = (t.floor() as usize).min(self.bins - 2);
        (b, t - b as f64)
    }

    fn ln_mixture(&self, x: &[f64], p: &[f64]) -> Vec<f64> {
        debug_assert!(self.bins + 2 * self.half_width < self.size + 1);
        let mut grid = vec![Complex::new(0.0, 0.0); self.size];
        for (&xi, &pi) in x.iter().zip(p) {
            let (b, f) = self.locate(xi);
            grid[b].re += pi * (1.0 - f);
            grid[b + 1].re += pi * f;
        }
        self.forward.process(&mut grid);
        grid.iter_mut().zip(&self.kernel_hat).for_each(|(g, k)| *g *= k);
        self.inverse.process(&mut grid);
        let scale = 1.0 / self.size as f64;
        x.iter()
            .zip(p)
            .map(|(&xi, &pi)| {
                let (b, f) = self.locate(xi);
                let v = scale * (grid[b].re * (1.0 - f) + grid[b + 1].re * f);
                // The self term alone is a lower bound on the exact sum.
                v.max(pi * self.self_term).ln()
            })
            .collect()
    }
}
