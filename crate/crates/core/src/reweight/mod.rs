//! Reverse-KL reweighting of clusters by exponentiated gradient descent.
//!
//! The objective is `J(p) = KL(π(p) | μ)` with `π(p) = Σ_k p_k ν_k`. Its gradient
//! is estimated from the clustered samples as
//!
//! ```text
//! G_k(p) = 1 + V_k + (1/n_k) Σ_{j ∈ I_k} ln π(p)(x_j),    V_k = (1/n_k) Σ_{j ∈ I_k} U(x_j)
//! ```
//!
//! and the weights follow `p_k ← p_k exp(-δ G_k) / Σ_l p_l exp(-δ G_l)`.
//!
//! The densities never change during a descent, so `ln ν_k(x_j)` is evaluated
//! once into a [`LogDensityTable`] and every iteration only recombines it.
//! Reductions over clusters go through order-independent helpers, which makes
//! traces exactly equivariant under cluster relabeling.

mod individual;

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;

pub use individual::{
    binned_ln_mixture, direct_ln_mixture, direct_ln_mixture_at, individual_reweight, IndividualConfig,
    IndividualResult, IndividualTraceRow, KernelSum,
};

use crate::data::{cluster_energy_means, Clustering, SampleSet, SimplexWeights};
use crate::density::LogDensity;
use crate::numeric::{compensated_sum, log_sum_exp_sorted, softmax_neg};
use crate::rng::{self, DEFAULT_SEED};
use crate::{Error, Result};

/// Starting point of the descent.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Init {
    /// Closed-form weights `softmax(-W)`, exact for disjoint supports.
    #[default]
    NoOverlap,
    Uniform,
    /// Any simplex point; zero entries stay zero.
    Custom(SimplexWeights),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentConfig {
    pub step_size: f64,
    pub iterations: usize,
    pub init: Init,
    /// Per-cluster subsample size for the log-mixture mean, redrawn each iteration.
    pub subsample: Option<usize>,
    pub seed: u64,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self {
            step_size: 0.05,
            iterations: 1000,
            init: Init::NoOverlap,
            subsample: None,
            seed: DEFAULT_SEED,
        }
    }
}

/// Stochastic gradient `G_k` together with the energy means `V_k` it used.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport {
    pub values: Vec<f64>,
    pub energy_means: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentTrace {
    /// `p^0, …, p^{N_iter}`.
    pub iterates: Vec<SimplexWeights>,
    /// `None` when some `W_k` is not finite.
    pub no_overlap_weights: Option<SimplexWeights>,
    /// `W_k = V_k + mean_{j ∈ I_k} ln ν_k(x_j)`.
    pub w_values: Vec<f64>,
}

impl DescentTrace {
    pub fn final_weights(&self) -> &SimplexWeights {
        self.iterates.last().expect("trace holds at least the initializer")
    }

    pub fn initial_weights(&self) -> &SimplexWeights {
        &self.iterates[0]
    }

    /// Largest sup-norm move away from the initializer over the whole trace.
    pub fn max_excursion(&self) -> f64 {
        let start = self.initial_weights().as_slice();
        self.iterates.iter().map(|p| p.sup_distance(start)).fold(0.0, f64::max)
    }
}

/// `ln ν_k(x_j)` for every sample `j` (rows) and cluster density `k` (columns).
#[derive(Debug, Clone)]
pub struct LogDensityTable {
    values: Array2<f64>,
}

impl LogDensityTable {
    pub fn evaluate<D: LogDensity + Sync>(samples: &SampleSet, densities: &[D]) -> Self {
        let k = densities.len();
        let rows: Vec<f64> = (0..samples.count())
            .into_par_iter()
            .flat_map_iter(|j| {
                let x = samples.point(j);
                densities.iter().map(move |d| d.ln_density(x))
            })
            .collect();
        Self {
            values: Array2::from_shape_vec((samples.count(), k), rows).expect("row-major table"),
        }
    }

    pub fn from_array(values: Array2<f64>) -> Self {
        Self { values }
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let k = self.values.ncols();
        &self.values.as_slice().expect("standard layout")[j * k..(j + 1) * k]
    }

    pub fn cluster_count(&self) -> usize {
        self.values.ncols()
    }

    pub fn sample_count(&self) -> usize {
        self.values.nrows()
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.values[[j, k]]
    }
}

/// `ln Σ_k p_k exp(row_k)`, skipping `p_k = 0`.
fn mixture_log_from_row(row: &[f64], ln_weights: &[f64], scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    scratch.extend(
        row.iter()
            .zip(ln_weights)
            .filter(|(_, lw)| **lw != f64::NEG_INFINITY)
            .map(|(v, lw)| v + lw),
    );
    log_sum_exp_sorted(scratch)
}

fn ln_weights(weights: &SimplexWeights) -> Vec<f64> {
    weights.as_slice().iter().map(|p| if *p > 0.0 { p.ln() } else { f64::NEG_INFINITY }).collect()
}

/// `ln π(p)(x) = ln Σ_k p_k ν_k(x)`.
pub fn mixture_log_density<D: LogDensity>(densities: &[D], weights: &SimplexWeights, point: &[f64]) -> Result<f64> {
    if densities.len() != weights.len() {
        return Err(Error::invalid("one weight per density required"));
    }
    let row: Vec<f64> = densities
        .iter()
        .zip(weights.as_slice())
        .map(|(d, p)| if *p > 0.0 { d.ln_density(point) } else { f64::NEG_INFINITY })
        .collect();
    let v = mixture_log_from_row(&row, &ln_weights(weights), &mut Vec::new());
    if v == f64::NEG_INFINITY {
        Err(Error::ZeroMixtureDensity {
            sample: None,
            cluster: None,
        })
    } else {
        Ok(v)
    }
}

/// Everything a descent needs, with the density table precomputed.
#[derive(Debug, Clone)]
pub struct ReweightProblem {
    clustering: Clustering,
    energy_means: Vec<f64>,
    table: LogDensityTable,
    w_values: Vec<f64>,
}

impl ReweightProblem {
    pub fn new<D: LogDensity + Sync>(samples: &SampleSet, clustering: &Clustering, densities: &[D]) -> Result<Self> {
        if clustering.sample_count() != samples.count() {
            return Err(Error::invalid("clustering does not cover the sample set"));
        }
        if densities.len() != clustering.cluster_count() {
            return Err(Error::invalid(format!(
                "{} densities for {} clusters",
                densities.len(),
                clustering.cluster_count()
            )));
        }
        let table = LogDensityTable::evaluate(samples, densities);
        Self::from_table(samples, clustering, table)
    }

    pub fn from_table(samples: &SampleSet, clustering: &Clustering, table: LogDensityTable) -> Result<Self> {
        if table.sample_count() != samples.count() || table.cluster_count() != clustering.cluster_count() {
            return Err(Error::invalid("density table shape does not match the problem"));
        }
        let energy_means = cluster_energy_means(samples, clustering);
        let w_values = clustering
            .member_lists()
            .iter()
            .enumerate()
            .map(|(k, m)| energy_means[k] + compensated_sum(m.iter().map(|&j| table.get(j, k))) / m.len() as f64)
            .collect();
        Ok(Self {
            clustering: clustering.clone(),
            energy_means,
            table,
            w_values,
        })
    }

    pub fn clustering(&self) -> &Clustering {
        &self.clustering
    }

    pub fn energy_means(&self) -> &[f64] {
        &self.energy_means
    }

    pub fn table(&self) -> &LogDensityTable {
        &self.table
    }

    pub fn w_values(&self) -> &[f64] {
        &self.w_values
    }

    /// Closed-form no-overlap weights `softmax(-W)`.
    ///
    /// Fails when a cluster density vanishes on one of its own members.
    pub fn no_overlap_weights(&self) -> Result<SimplexWeights> {
        if let Some(k) = self.w_values.iter().position(|w| !w.is_finite()) {
            return Err(Error::ZeroMixtureDensity {
                sample: None,
                cluster: Some(k),
            });
        }
        SimplexWeights::from_unnormalized(softmax_neg(&self.w_values))
    }

    /// Stochastic gradient at `weights`; with `subsample = Some((m, rng))` the
    /// inner mean of each cluster runs over `m` members drawn without replacement.
    ///
    /// Entries of clusters with zero weight may be non-finite; the step ignores them.
    pub fn gradient<R: Rng>(
        &self,
        weights: &SimplexWeights,
        subsample: Option<(usize, &mut R)>,
    ) -> Result<GradientReport> {
        if weights.len() != self.clustering.cluster_count() {
            return Err(Error::invalid("weights length does not match cluster count"));
        }
        let lw = ln_weights(weights);
        let members: Vec<Vec<usize>> = match subsample {
            None => Vec::new(),
            Some((m, rng)) => self
                .clustering
                .member_lists()
                .iter()
                .map(|list| {
                    rand::seq::index::sample(rng, list.len(), m.min(list.len()))
                        .into_iter()
                        .map(|i| list[i])
                        .collect()
                })
                .collect(),
        };
        let lists: &[Vec<usize>] = if members.is_empty() {
            self.clustering.member_lists()
        } else {
            &members
        };
        let values = lists
            .par_iter()
            .enumerate()
            .map(|(k, list)| {
                let mut scratch = Vec::with_capacity(lw.len());
                let mut logs = Vec::with_capacity(list.len());
                for &j in list {
                    let v = mixture_log_from_row(self.table.row(j), &lw, &mut scratch);
                    if v == f64::NEG_INFINITY && weights[k] > 0.0 {
                        return Err(Error::ZeroMixtureDensity {
                            sample: Some(j),
                            cluster: Some(k),
                        });
                    }
                    logs.push(v);
                }
                Ok(1.0 + self.energy_means[k] + compensated_sum(logs) / list.len() as f64)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(GradientReport {
            values,
            energy_means: self.energy_means.clone(),
        })
    }

    /// Exponentiated gradient descent for `config.iterations` steps.
    pub fn descend(&self, config: &DescentConfig) -> Result<DescentTrace> {
        validate_config(config, &self.clustering)?;
        let no_overlap = self.no_overlap_weights().ok();
        let start = match &config.init {
            Init::NoOverlap => {
                let no_overlap = self.no_overlap_weights()?;
                if !no_overlap.is_strictly_positive() {
                    return Err(Error::invalid(
                        "no-overlap initializer has a zero entry; zero weights are absorbing",
                    ));
                }
                no_overlap
            }
            Init::Uniform => SimplexWeights::uniform(self.clustering.cluster_count()),
            Init::Custom(p) => {
                if p.len() != self.clustering.cluster_count() {
                    return Err(Error::invalid("custom initializer has the wrong length"));
                }
                p.clone()
            }
        };
        let mut rng = rng::stream(config.seed, &[]);
        let mut iterates = Vec::with_capacity(config.iterations + 1);
        iterates.push(start);
        for m in 0..config.iterations {
            let current = &iterates[m];
            let step = self
                .gradient(current, config.subsample.map(|s| (s, &mut rng)))
                .and_then(|g| exp_gradient_step(current, &g.values, config.step_size));
            match step {
                Ok(next) => iterates.push(next),
                Err(e) => {
                    return Err(Error::Descent {
                        iteration: m,
                        partial: Box::new(DescentTrace {
                            iterates,
                            no_overlap_weights: no_overlap,
                            w_values: self.w_values.clone(),
                        }),
                        source: Box::new(e),
                    })
                }
            }
        }
        Ok(DescentTrace {
            iterates,
            no_overlap_weights: no_overlap,
            w_values: self.w_values.clone(),
        })
    }
}

fn validate_config(config: &DescentConfig, clustering: &Clustering) -> Result<()> {
    if !(config.step_size > 0.0 && config.step_size.is_finite()) {
        return Err(Error::invalid("step size must be positive"));
    }
    if let Some(m) = config.subsample {
        let smallest = clustering.sizes().into_iter().min().unwrap_or(0);
        if m == 0 || m > smallest {
            return Err(Error::invalid(format!(
                "subsample size {m} must lie in 1..={smallest} (smallest cluster)"
            )));
        }
    }
    Ok(())
}

/// Stochastic gradient built directly from densities (evaluates them on the fly).
pub fn stochastic_gradient<D: LogDensity + Sync, R: Rng>(
    samples: &SampleSet,
    clustering: &Clustering,
    densities: &[D],
    weights: &SimplexWeights,
    energy_means: &[f64],
    subsample: Option<(usize, &mut R)>,
) -> Result<GradientReport> {
    let mut problem = ReweightProblem::new(samples, clustering, densities)?;
    if energy_means.len() != problem.energy_means.len() {
        return Err(Error::invalid("one energy mean per cluster required"));
    }
    problem.energy_means = energy_means.to_vec();
    problem.gradient(weights, subsample)
}

/// One multiplicative update `p_k ∝ p_k exp(-δ g_k)`, in the log domain.
/// Zero weights stay zero and their gradient entries are not read.
pub fn exp_gradient_step(weights: &SimplexWeights, gradient: &[f64], step_size: f64) -> Result<SimplexWeights> {
    if gradient.len() != weights.len() {
        return Err(Error::invalid("gradient length does not match weights"));
    }
    if !(step_size > 0.0) {
        return Err(Error::invalid("step size must be positive"));
    }
    let p = weights.as_slice();
    let mut logits = vec![f64::NEG_INFINITY; p.len()];
    for k in 0..p.len() {
        if p[k] > 0.0 {
            if !gradient[k].is_finite() {
                return Err(Error::invalid(format!("non-finite gradient entry {k}")));
            }
            logits[k] = p[k].ln() - step_size * gradient[k];
        }
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::invalid("all weights are zero"));
    }
    let unnorm: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    SimplexWeights::from_unnormalized(unnorm)
}

/// No-overlap weights `softmax(-W)` and the `W_k` values.
pub fn no_overlap_weights<D: LogDensity + Sync>(
    samples: &SampleSet,
    clustering: &Clustering,
    densities: &[D],
) -> Result<(SimplexWeights, Vec<f64>)> {
    let problem = ReweightProblem::new(samples, clustering, densities)?;
    Ok((problem.no_overlap_weights()?, problem.w_values))
}

/// Full pipeline: tabulate the densities, then descend.
pub fn run_descent<D: LogDensity + Sync>(
    samples: &SampleSet,
    clustering: &Clustering,
    densities: &[D],
    config: &DescentConfig,
) -> Result<DescentTrace> {
    ReweightProblem::new(samples, clustering, densities)?.descend(config)
}
