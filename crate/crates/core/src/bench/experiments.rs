use rayon::prelude::*;

use super::{
    cell_key, compute_statistics, fit_densities, fmt_f64, kolmogorov_distance, median, pearson_correlation,
    weighted_cdf, DensityOptions, RunStatistics, Table,
};
use crate::data::{cluster_by_threshold, SimplexWeights};
use crate::density::{sheather_jones_bandwidth, BandwidthRule};
use crate::oracles::{double_well_default_grid, double_well_reference, AnalyticMixture};
use crate::reweight::{
    direct_ln_mixture_at, individual_reweight, run_descent, DescentConfig, DescentTrace, IndividualConfig,
    IndividualResult, Init,
};
use crate::rng;
use crate::samplers::{
    k_modes_mixture, run_tempered_langevin, sample_benchmark, sample_individual_toy, toy_target_cdf,
    toy_target_ln_density, BenchmarkMixtureSpec, LangevinConfig,
};
use crate::Result;

fn descent_seed(master: u64, cell: u64, run: u64) -> u64 {
    cell_key(&[master, cell, run, 0x5eed])
}

/// One benchmark run: draw data, fit densities, descend; returns the trace.
pub fn benchmark_run(
    spec: &BenchmarkMixtureSpec,
    per_mode: usize,
    descent: &DescentConfig,
    density: &DensityOptions,
    master: u64,
    cell: u64,
    run: u64,
) -> Result<DescentTrace> {
    let mut r = rng::stream(master, &[cell, run]);
    let (samples, clustering) = sample_benchmark(spec, per_mode, &mut r)?;
    let densities = fit_densities(&samples, &clustering, density)?;
    let config = DescentConfig {
        seed: descent_seed(master, cell, run),
        ..descent.clone()
    };
    run_descent(&samples, &clustering, &densities, &config)
}

// ---------------------------------------------------------------------------
// Bias/variance sweep over (a, d)

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub cells: Vec<(f64, usize)>,
    pub per_mode: usize,
    pub runs: usize,
    pub true_weight: f64,
    pub descent: DescentConfig,
    pub density: DensityOptions,
    pub master_seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            cells: vec![(0.5, 4), (2.875, 16), (10.0, 64)],
            per_mode: 1000,
            runs: 16,
            true_weight: 0.7,
            descent: DescentConfig::default(),
            density: DensityOptions::default(),
            master_seed: rng::DEFAULT_SEED,
        }
    }
}

impl SweepConfig {
    /// The full 5 × 7 `(a, d)` grid.
    pub fn full_grid() -> Vec<(f64, usize)> {
        let a_values = [0.5, 2.875, 5.25, 7.625, 10.0];
        let d_values = [4, 8, 16, 32, 64, 128, 256];
        a_values.iter().flat_map(|&a| d_values.iter().map(move |&d| (a, d))).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub a: f64,
    pub d: usize,
    pub stats: Option<RunStatistics>,
    pub error: Option<String>,
}

fn sweep_cell_key(a: f64, d: usize, per_mode: usize) -> u64 {
    cell_key(&[a.to_bits(), d as u64, per_mode as u64])
}

pub fn run_bias_variance_sweep(config: &SweepConfig) -> Vec<SweepRow> {
    let jobs: Vec<(usize, usize)> = (0..config.cells.len())
        .flat_map(|c| (0..config.runs).map(move |r| (c, r)))
        .collect();
    let outputs: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let (a, d) = config.cells[c];
            let spec = BenchmarkMixtureSpec::new(a, d, config.true_weight, crate::samplers::SIGMA_MIN2, crate::samplers::SIGMA_MAX2)?;
            let key = sweep_cell_key(a, d, config.per_mode);
            let t = benchmark_run(&spec, config.per_mode, &config.descent, &config.density, config.master_seed, key, r as u64)?;
            Ok(t.final_weights()[0])
        })
        .collect();
    config
        .cells
        .iter()
        .enumerate()
        .map(|(c, &(a, d))| {
            let cell = &outputs[c * config.runs..(c + 1) * config.runs];
            let mut runs = Vec::with_capacity(cell.len());
            for o in cell {
                match o {
                    Ok(p) => runs.push(vec![*p, 1.0 - p]),
                    Err(e) => {
                        return SweepRow {
                            a,
                            d,
                            stats: None,
                            error: Some(e.to_string()),
                        }
                    }
                }
            }
            let truth = SimplexWeights::new(vec![config.true_weight, 1.0 - config.true_weight]).expect("valid");
            match compute_statistics(&runs, &truth) {
                Ok(s) => SweepRow {
                    a,
                    d,
                    stats: Some(s),
                    error: None,
                },
                Err(e) => SweepRow {
                    a,
                    d,
                    stats: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

pub fn sweep_table(rows: &[SweepRow], master_seed: u64) -> Table {
    let mut t = Table::new(["a", "d", "runs", "mean_p1", "scalar_bias", "bias_norm", "variance", "seed", "error"]);
    for r in rows {
        let (runs, mean, sb, bn, var) = match &r.stats {
            Some(s) => (
                s.runs.len().to_string(),
                fmt_f64(s.mean[0]),
                fmt_f64(s.scalar_bias),
                fmt_f64(s.bias_norm),
                fmt_f64(s.variance),
            ),
            None => Default::default(),
        };
        t.push(vec![
            r.a.to_string(),
            r.d.to_string(),
            runs,
            mean,
            sb,
            bn,
            var,
            master_seed.to_string(),
            r.error.clone().unwrap_or_default().replace(',', ";"),
        ]);
    }
    t
}

// ---------------------------------------------------------------------------
// Descent traces from two initializations

#[derive(Debug, Clone, PartialEq)]
pub struct TraceCase {
    pub a: f64,
    pub sigma_min2: f64,
    pub sigma_max2: f64,
    pub d: usize,
    pub iterations: usize,
}

impl TraceCase {
    pub fn standard_cases() -> Vec<TraceCase> {
        let c = |a, lo, hi, d, iterations| TraceCase {
            a,
            sigma_min2: lo,
            sigma_max2: hi,
            d,
            iterations,
        };
        vec![
            c(0.0, 0.2, 0.2, 100, 1000),
            c(0.0, 0.01, 0.2, 100, 1000),
            c(0.05, 0.15, 0.2, 100, 1000),
            c(0.1, 0.2, 0.2, 1, 2000),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceResult {
    pub case: TraceCase,
    pub from_no_overlap: Vec<f64>,
    pub from_half: Vec<f64>,
}

pub fn run_descent_trace_experiment(
    cases: &[TraceCase],
    per_mode: usize,
    step_size: f64,
    density: &DensityOptions,
    master_seed: u64,
) -> Result<Vec<TraceResult>> {
    cases
        .par_iter()
        .map(|case| {
            let spec = BenchmarkMixtureSpec::new(case.a, case.d, 0.7, case.sigma_min2, case.sigma_max2)?;
            let key = cell_key(&[
                case.a.to_bits(),
                case.sigma_min2.to_bits(),
                case.sigma_max2.to_bits(),
                case.d as u64,
                per_mode as u64,
            ]);
            let mut r = rng::stream(master_seed, &[key, 0]);
            let (samples, clustering) = sample_benchmark(&spec, per_mode, &mut r)?;
            let densities = fit_densities(&samples, &clustering, density)?;
            let base = DescentConfig {
                step_size,
                iterations: case.iterations,
                seed: descent_seed(master_seed, key, 0),
                ..DescentConfig::default()
            };
            let first = |t: DescentTrace| t.iterates.iter().map(|p| p[0]).collect::<Vec<f64>>();
            let a = run_descent(&samples, &clustering, &densities, &base)?;
            let b = run_descent(
                &samples,
                &clustering,
                &densities,
                &DescentConfig {
                    init: Init::Uniform,
                    ..base.clone()
                },
            )?;
            Ok(TraceResult {
                case: case.clone(),
                from_no_overlap: first(a),
                from_half: first(b),
            })
        })
        .collect()
}

pub fn trace_table(result: &TraceResult) -> Table {
    let mut t = Table::new(["iter", "p1_no_overlap", "p1_half"]);
    for (m, (a, b)) in result.from_no_overlap.iter().zip(&result.from_half).enumerate() {
        t.push(vec![m.to_string(), fmt_f64(*a), fmt_f64(*b)]);
    }
    t
}

// ---------------------------------------------------------------------------
// Sample-size sweep

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSizeRow {
    pub n: usize,
    pub stats: RunStatistics,
    /// Median over runs of `|p̂₁ - p*₁|`.
    pub median_abs_error: f64,
}

pub fn default_sample_sizes() -> Vec<usize> {
    vec![100, 250, 500, 750, 1000, 1500, 2000, 3000, 4000]
}

pub fn run_sample_size_sweep(
    sizes: &[usize],
    a: f64,
    d: usize,
    runs: usize,
    descent: &DescentConfig,
    density: &DensityOptions,
    master_seed: u64,
) -> Result<Vec<SampleSizeRow>> {
    let spec = BenchmarkMixtureSpec::standard(a, d)?;
    let jobs: Vec<(usize, usize)> = (0..sizes.len()).flat_map(|c| (0..runs).map(move |r| (c, r))).collect();
    let outputs = jobs
        .par_iter()
        .map(|&(c, r)| {
            let key = sweep_cell_key(a, d, sizes[c]);
            benchmark_run(&spec, sizes[c], descent, density, master_seed, key, r as u64).map(|t| t.final_weights()[0])
        })
        .collect::<Result<Vec<f64>>>()?;
    let truth = spec.true_weights();
    sizes
        .iter()
        .enumerate()
        .map(|(c, &n)| {
            let p1 = &outputs[c * runs..(c + 1) * runs];
            let rows: Vec<Vec<f64>> = p1.iter().map(|p| vec![*p, 1.0 - p]).collect();
            let errors: Vec<f64> = p1.iter().map(|p| (p - truth[0]).abs()).collect();
            Ok(SampleSizeRow {
                n,
                stats: compute_statistics(&rows, &truth)?,
                median_abs_error: median(&errors),
            })
        })
        .collect()
}

pub fn sample_size_table(rows: &[SampleSizeRow]) -> Table {
    let mut t = Table::new(["N", "scalar_bias", "variance", "median_abs_error"]);
    for r in rows {
        t.push(vec![
            r.n.to_string(),
            fmt_f64(r.stats.scalar_bias),
            fmt_f64(r.stats.variance),
            fmt_f64(r.median_abs_error),
        ]);
    }
    t
}

// ---------------------------------------------------------------------------
// K modes

#[derive(Debug, Clone, PartialEq)]
pub struct KModesConfig {
    pub k: usize,
    pub d: usize,
    pub per_mode: usize,
    pub runs: usize,
    pub descent: DescentConfig,
    pub density: DensityOptions,
    pub master_seed: u64,
}

#[derive(Debug, Clone)]
pub struct KModesResult {
    pub mixture: AnalyticMixture,
    /// Final weights from the no-overlap start, one row per run.
    pub no_overlap: RunStatistics,
    pub uniform: RunStatistics,
    /// Traces of the first run for both starts.
    pub first_traces: (DescentTrace, DescentTrace),
    /// Largest sup-norm excursion from the no-overlap start over all runs.
    pub max_no_overlap_excursion: f64,
    /// First-coordinate samples and cluster labels of the first run.
    pub first_coordinates: Vec<(usize, f64)>,
}

/// Means and weights are drawn once per `(k, d)` and kept for all runs.
pub fn run_k_modes_experiment(config: &KModesConfig) -> Result<KModesResult> {
    let instance_key = cell_key(&[config.k as u64, config.d as u64]);
    let mixture = k_modes_mixture(config.k, config.d, &mut rng::stream(config.master_seed, &[instance_key, u64::MAX]))?;
    let cell = cell_key(&[config.k as u64, config.d as u64, config.per_mode as u64]);
    let runs = (0..config.runs)
        .into_par_iter()
        .map(|r| {
            let mut g = rng::stream(config.master_seed, &[cell, r as u64]);
            let mut rows = Vec::with_capacity(config.k * config.per_mode);
            let mut labels = Vec::with_capacity(config.k * config.per_mode);
            for (c, comp) in mixture.components().iter().enumerate() {
                for _ in 0..config.per_mode {
                    rows.push(comp.sample(&mut g)?);
                    labels.push(c as u64);
                }
            }
            let energies = rows.iter().map(|x| -mixture.ln_density(x)).collect();
            let samples = crate::data::SampleSet::from_rows(&rows, energies)?;
            let clustering = crate::data::Clustering::from_labels(&labels)?;
            let densities = fit_densities(&samples, &clustering, &config.density)?;
            let problem = crate::reweight::ReweightProblem::new(&samples, &clustering, &densities)?;
            let base = DescentConfig {
                seed: descent_seed(config.master_seed, cell, r as u64),
                ..config.descent.clone()
            };
            let a = problem.descend(&DescentConfig {
                init: Init::NoOverlap,
                ..base.clone()
            })?;
            let b = problem.descend(&DescentConfig {
                init: Init::Uniform,
                ..base
            })?;
            let firsts = if r == 0 {
                (0..samples.count()).map(|i| (clustering.assignment()[i], samples.point(i)[0])).collect()
            } else {
                Vec::new()
            };
            Ok((a, b, firsts))
        })
        .collect::<Result<Vec<_>>>()?;
    let truth = mixture.weights().clone();
    let no_overlap_rows: Vec<Vec<f64>> = runs.iter().map(|(a, _, _)| a.final_weights().as_slice().to_vec()).collect();
    let uniform_rows: Vec<Vec<f64>> = runs.iter().map(|(_, b, _)| b.final_weights().as_slice().to_vec()).collect();
    let excursion = runs.iter().map(|(a, _, _)| a.max_excursion()).fold(0.0, f64::max);
    let stats = |rows: &[Vec<f64>]| -> Result<RunStatistics> {
        if rows.len() >= 2 {
            compute_statistics(rows, &truth)
        } else {
            // A single run still reports its bias; the variance is left undefined.
            let mut doubled = rows.to_vec();
            doubled.extend_from_slice(rows);
            let mut s = compute_statistics(&doubled, &truth)?;
            s.runs.truncate(rows.len());
            s.variance = f64::NAN;
            Ok(s)
        }
    };
    let mut runs = runs;
    let (a0, b0, firsts) = runs.swap_remove(0);
    Ok(KModesResult {
        no_overlap: stats(&no_overlap_rows)?,
        uniform: stats(&uniform_rows)?,
        first_traces: (a0, b0),
        max_no_overlap_excursion: excursion,
        first_coordinates: firsts,
        mixture,
    })
}

pub fn k_modes_tables(result: &KModesResult) -> (Table, Table, Table) {
    let k = result.mixture.components().len();
    let mut summary = Table::new(["cluster", "true_weight", "mean_no_overlap", "mean_uniform"]);
    for c in 0..k {
        summary.push(vec![
            (c + 1).to_string(),
            fmt_f64(result.mixture.weights()[c]),
            fmt_f64(result.no_overlap.mean[c]),
            fmt_f64(result.uniform.mean[c]),
        ]);
    }
    let mut header = vec!["iter".to_string()];
    header.extend((1..=k).map(|c| format!("no_overlap_p{c}")));
    header.extend((1..=k).map(|c| format!("uniform_p{c}")));
    let mut trace = Table::new(header);
    let (a, b) = &result.first_traces;
    for (m, (p, q)) in a.iterates.iter().zip(&b.iterates).enumerate() {
        let mut row = vec![m.to_string()];
        row.extend(p.as_slice().iter().map(|v| fmt_f64(*v)));
        row.extend(q.as_slice().iter().map(|v| fmt_f64(*v)));
        trace.push(row);
    }
    let mut hist = Table::new(["cluster", "x1", "true_weight"]);
    for (c, x) in &result.first_coordinates {
        hist.push(vec![(c + 1).to_string(), fmt_f64(*x), fmt_f64(result.mixture.weights()[*c])]);
    }
    (summary, trace, hist)
}

// ---------------------------------------------------------------------------
// Tempered Langevin on the double well

#[derive(Debug, Clone, PartialEq)]
pub struct LangevinExperimentConfig {
    pub step_size: f64,
    pub steps: usize,
    pub replicas: usize,
    pub beta0: f64,
    pub beta1: f64,
    pub descent: DescentConfig,
    pub rule: BandwidthRule,
    pub quadrature_points: usize,
    pub master_seed: u64,
}

impl Default for LangevinExperimentConfig {
    fn default() -> Self {
        Self {
            step_size: 1e-2,
            steps: 1000,
            replicas: 1000,
            beta0: 1.0,
            beta1: 10.0,
            descent: DescentConfig::default(),
            rule: BandwidthRule::Scott,
            quadrature_points: 512,
            master_seed: rng::DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LangevinResult {
    pub reference_beta0: f64,
    pub reference_beta1: f64,
    pub phase0: Vec<[f64; 2]>,
    pub phase1: Vec<[f64; 2]>,
    pub cluster_sizes: (usize, usize),
    pub from_no_overlap: DescentTrace,
    pub from_fractions: DescentTrace,
    /// `max ν₁` over cluster-2 samples divided by `max ν₁` over cluster-1 samples.
    pub cross_density_ratio: f64,
}

pub fn run_langevin_experiment(config: &LangevinExperimentConfig) -> Result<LangevinResult> {
    let grid = double_well_default_grid(config.quadrature_points)?;
    let reference_beta0 = double_well_reference(config.beta0, &grid)?;
    let reference_beta1 = double_well_reference(config.beta1, &grid)?;
    let hot = LangevinConfig {
        step_size: config.step_size,
        beta: config.beta0,
        steps: config.steps,
        replicas: config.replicas,
    };
    let cold = LangevinConfig {
        beta: config.beta1,
        ..hot.clone()
    };
    let run = run_tempered_langevin(&hot, &cold, config.master_seed)?;
    let samples = run.phase1;
    let clustering = cluster_by_threshold(&samples, 0, 0.0)?;
    let densities = fit_densities(
        &samples,
        &clustering,
        &DensityOptions {
            ell: Some(2),
            rule: config.rule,
        },
    )?;
    let problem = crate::reweight::ReweightProblem::new(&samples, &clustering, &densities)?;
    let sizes = clustering.sizes();
    let n = samples.count() as f64;
    let seed = descent_seed(config.master_seed, 0, 0);
    let from_no_overlap = problem.descend(&DescentConfig {
        init: Init::NoOverlap,
        seed,
        ..config.descent.clone()
    })?;
    let fractions = SimplexWeights::new(vec![sizes[0] as f64 / n, sizes[1] as f64 / n])?;
    let from_fractions = problem.descend(&DescentConfig {
        init: Init::Custom(fractions),
        seed,
        ..config.descent.clone()
    })?;
    let own = clustering.members(0).iter().map(|&j| problem.table().get(j, 0)).fold(f64::NEG_INFINITY, f64::max);
    let cross = clustering.members(1).iter().map(|&j| problem.table().get(j, 0)).fold(f64::NEG_INFINITY, f64::max);
    let phase1 = (0..samples.count()).map(|i| [samples.point(i)[0], samples.point(i)[1]]).collect();
    Ok(LangevinResult {
        reference_beta0,
        reference_beta1,
        phase0: run.phase0,
        phase1,
        cluster_sizes: (sizes[0], sizes[1]),
        from_no_overlap,
        from_fractions,
        cross_density_ratio: (cross - own).exp(),
    })
}

pub fn langevin_tables(result: &LangevinResult) -> (Table, Table, Table) {
    let mut summary = Table::new(["quantity", "value"]);
    let mut kv = |k: &str, v: String| summary.push(vec![k.to_string(), v]);
    kv("reference_beta0", fmt_f64(result.reference_beta0));
    kv("reference_beta1", fmt_f64(result.reference_beta1));
    kv("cluster1_size", result.cluster_sizes.0.to_string());
    kv("cluster2_size", result.cluster_sizes.1.to_string());
    kv("p1_no_overlap_initial", fmt_f64(result.from_no_overlap.initial_weights()[0]));
    kv("p1_no_overlap_final", fmt_f64(result.from_no_overlap.final_weights()[0]));
    kv("p1_fractions_initial", fmt_f64(result.from_fractions.initial_weights()[0]));
    kv("p1_fractions_final", fmt_f64(result.from_fractions.final_weights()[0]));
    kv("cross_density_ratio", fmt_f64(result.cross_density_ratio));
    let mut trace = Table::new(["iter", "p1_no_overlap", "p1_fractions"]);
    for (m, (a, b)) in result.from_no_overlap.iterates.iter().zip(&result.from_fractions.iterates).enumerate() {
        trace.push(vec![m.to_string(), fmt_f64(a[0]), fmt_f64(b[0])]);
    }
    let mut points = Table::new(["phase", "x", "y"]);
    for (phase, pts) in [(0, &result.phase0), (1, &result.phase1)] {
        for p in pts.iter() {
            points.push(vec![phase.to_string(), fmt_f64(p[0]), fmt_f64(p[1])]);
        }
    }
    (summary, trace, points)
}

// ---------------------------------------------------------------------------
// Per-sample weights

#[derive(Debug, Clone, PartialEq)]
pub struct IndividualExperimentResult {
    pub n: usize,
    pub x: Vec<f64>,
    pub result: IndividualResult,
    pub kolmogorov_unweighted: f64,
    pub kolmogorov_weighted: f64,
    /// Correlation between `p_i` and `μ(x_i) / ν̂(x_i)`.
    pub ratio_correlation: f64,
}

pub fn run_individual_experiment(
    sizes: &[usize],
    config: &IndividualConfig,
    master_seed: u64,
) -> Result<Vec<IndividualExperimentResult>> {
    sizes
        .iter()
        .map(|&n| {
            let mut r = rng::stream(master_seed, &[cell_key(&[n as u64]), 0]);
            let samples = sample_individual_toy(n, &mut r)?;
            let x: Vec<f64> = (0..n).map(|i| samples.point(i)[0]).collect();
            let result = individual_reweight(&samples, config)?;
            let uniform = vec![1.0; n];
            let sigma = sheather_jones_bandwidth(&x)?;
            let ln_nu = direct_ln_mixture_at(&x, &vec![1.0 / n as f64; n], sigma, &x);
            let ratio: Vec<f64> = x.iter().zip(&ln_nu).map(|(xi, l)| (toy_target_ln_density(*xi) - l).exp()).collect();
            Ok(IndividualExperimentResult {
                n,
                kolmogorov_unweighted: kolmogorov_distance(&x, &uniform, toy_target_cdf),
                kolmogorov_weighted: kolmogorov_distance(&x, result.weights.as_slice(), toy_target_cdf),
                ratio_correlation: pearson_correlation(result.weights.as_slice(), &ratio),
                x,
                result,
            })
        })
        .collect()
}

/// Scatter of `(x_i, p_i)`, CDF columns on a grid, and the iterate summary.
pub fn individual_tables(result: &IndividualExperimentResult) -> (Table, Table, Table) {
    let mut scatter = Table::new(["x", "p"]);
    for (x, p) in result.x.iter().zip(result.result.weights.as_slice()) {
        scatter.push(vec![fmt_f64(*x), fmt_f64(*p)]);
    }
    let lo = result.x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = result.x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let uniform = vec![1.0; result.x.len()];
    let mut cdf = Table::new(["x", "unweighted", "weighted", "target"]);
    let points = 400;
    for i in 0..points {
        let t = lo + (hi - lo) * i as f64 / (points - 1) as f64;
        cdf.push(vec![
            fmt_f64(t),
            fmt_f64(weighted_cdf(&result.x, &uniform, t)),
            fmt_f64(weighted_cdf(&result.x, result.result.weights.as_slice(), t)),
            fmt_f64(toy_target_cdf(t)),
        ]);
    }
    let mut trace = Table::new(["iter", "max_scaled_weight", "min_scaled_weight", "effective_size"]);
    for row in &result.result.trace {
        trace.push(vec![
            row.iteration.to_string(),
            fmt_f64(row.max_scaled),
            fmt_f64(row.min_scaled),
            fmt_f64(row.effective_size),
        ]);
    }
    (scatter, cdf, trace)
}
