use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};

use modeweight::bench::{
    fmt_f64, individual_tables, k_modes_tables, langevin_tables, default_sample_sizes, run_bias_variance_sweep,
    run_descent_trace_experiment, run_individual_experiment, run_k_modes_experiment, run_langevin_experiment,
    run_sample_size_sweep, sample_size_table, sweep_table, trace_table, KModesConfig, LangevinExperimentConfig,
    SweepConfig, Table, TraceCase,
};
use modeweight::reweight::IndividualConfig;
use modeweight::rng;
use modeweight::samplers::{sample_benchmark, BenchmarkMixtureSpec};

use crate::config::{ExperimentSpec, Resolved, RunArgs};
use crate::error::{CliError, CliResult};
use crate::io::write_samples;

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Output directory.
    #[arg(long, default_value = "bench-out", global = true)]
    pub out: PathBuf,
    #[command(subcommand)]
    pub experiment: Experiment,
}

#[derive(Debug, Subcommand)]
pub enum Experiment {
    /// Draw one two-mode benchmark data set and write it as a samples file.
    Mixture {
        #[arg(long, default_value_t = 10.0)]
        a: f64,
        #[arg(long, default_value_t = 4)]
        d: usize,
        /// Samples per mode.
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Bias and variance over an (a, d) grid.
    Sweep {
        #[arg(long, value_delimiter = ',')]
        a: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        d: Vec<usize>,
        /// Use the full 5 × 7 grid.
        #[arg(long)]
        full_grid: bool,
        #[arg(long)]
        runs: Option<usize>,
        /// Samples per mode.
        #[arg(long)]
        n: Option<usize>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// p₁ along the descent from both initializations, four cases.
    Trace {
        /// Samples per mode.
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Bias and variance as the per-mode sample size grows.
    Nsweep {
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        #[arg(long, default_value_t = 50)]
        d: usize,
        #[arg(long)]
        runs: Option<usize>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// K-mode Gaussian mixture with random weights.
    Modes {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 100)]
        d: usize,
        /// Samples per mode.
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long)]
        runs: Option<usize>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Tempered Langevin sampling of the double well.
    Langevin {
        #[arg(long, default_value_t = 1e-2)]
        h: f64,
        /// Steps per temperature phase.
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long, default_value_t = 1000)]
        replicas: usize,
        #[arg(long, default_value_t = 1.0)]
        beta0: f64,
        #[arg(long, default_value_t = 10.0)]
        beta1: f64,
        /// Quadrature points per axis for the references.
        #[arg(long, default_value_t = 512)]
        quadrature_points: usize,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Per-sample weights on the one-dimensional toy problem.
    Individual {
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        #[command(flatten)]
        run: RunArgs,
    },
}

impl Experiment {
    fn id(&self) -> &'static str {
        match self {
            Experiment::Mixture { .. } => "mixture",
            Experiment::Sweep { .. } => "sweep",
            Experiment::Trace { .. } => "trace",
            Experiment::Nsweep { .. } => "nsweep",
            Experiment::Modes { .. } => "modes",
            Experiment::Langevin { .. } => "langevin",
            Experiment::Individual { .. } => "individual",
        }
    }
}

fn resolve(run: &RunArgs, id: &str) -> CliResult<(Resolved, ExperimentSpec)> {
    let r = run.resolve()?;
    let spec = r.experiment.clone().unwrap_or_else(|| ExperimentSpec {
        id: id.to_string(),
        ..Default::default()
    });
    if spec.id != id {
        return Err(CliError::input(format!(
            "config experiment id `{}` does not match command `{id}`",
            spec.id
        )));
    }
    Ok((r, spec))
}

fn first_non_empty<T: Clone>(flag: &[T], file: Option<&Vec<T>>, default: impl FnOnce() -> Vec<T>) -> Vec<T> {
    if !flag.is_empty() {
        flag.to_vec()
    } else {
        file.cloned().unwrap_or_else(default)
    }
}

fn write(out: &Path, name: &str, table: &Table) -> CliResult<()> {
    table.write_csv(&out.join(name))?;
    Ok(())
}

pub fn run(args: &BenchArgs) -> CliResult<()> {
    let out = &args.out;
    std::fs::create_dir_all(out)?;
    let id = args.experiment.id();
    match &args.experiment {
        Experiment::Mixture { a, d, n, seed } => {
            let spec = BenchmarkMixtureSpec::standard(*a, *d)?;
            let seed = seed.unwrap_or(rng::DEFAULT_SEED);
            let (samples, clustering) = sample_benchmark(&spec, *n, &mut rng::stream(seed, &[]))?;
            let labels: Vec<u64> = clustering.assignment().iter().map(|&c| c as u64).collect();
            write_samples(&out.join("samples.csv"), &samples, Some(&labels))?;
            let mut t = Table::new(["cluster", "size", "true_weight"]);
            for (k, size) in clustering.sizes().iter().enumerate() {
                t.push(vec![k.to_string(), size.to_string(), fmt_f64(spec.true_weights()[k])]);
            }
            print!("{}", t.render());
        }
        Experiment::Sweep {
            a,
            d,
            full_grid,
            runs,
            n,
            run,
        } => {
            let (r, spec) = resolve(run, id)?;
            let defaults = SweepConfig::default();
            let cells = if *full_grid {
                SweepConfig::full_grid()
            } else {
                let a_values = first_non_empty(a, spec.a.as_ref(), Vec::new);
                let d_values = first_non_empty(d, spec.d.as_ref(), Vec::new);
                match (a_values.is_empty(), d_values.is_empty()) {
                    (true, true) => defaults.cells.clone(),
                    (false, false) => a_values.iter().flat_map(|&a| d_values.iter().map(move |&d| (a, d))).collect(),
                    _ => return Err(CliError::input("sweep needs both --a and --d, or neither")),
                }
            };
            for &(a, d) in &cells {
                BenchmarkMixtureSpec::standard(a, d)?;
            }
            let runs = runs.or(spec.runs).unwrap_or(defaults.runs);
            if runs < 2 {
                return Err(CliError::input("sweep needs at least two runs per cell"));
            }
            let per_mode = n.or(spec.n.as_ref().and_then(|v| v.first().copied())).unwrap_or(defaults.per_mode);
            let config = SweepConfig {
                cells,
                per_mode,
                runs,
                descent: r.descent,
                density: r.density,
                master_seed: r.seed,
                ..defaults
            };
            let rows = run_bias_variance_sweep(&config);
            let table = sweep_table(&rows, r.seed);
            write(out, "sweep.csv", &table)?;
            print!("{}", table.render());
        }
        Experiment::Trace { n, run } => {
            let (r, _) = resolve(run, id)?;
            let results = run_descent_trace_experiment(&TraceCase::standard_cases(), *n, r.descent.step_size, &r.density, r.seed)?;
            let mut summary = Table::new(["case", "a", "sigma_min2", "sigma_max2", "d", "iters", "p1_no_overlap", "p1_half"]);
            for (i, res) in results.iter().enumerate() {
                write(out, &format!("trace_case{}.csv", i + 1), &trace_table(res))?;
                let c = &res.case;
                summary.push(vec![
                    (i + 1).to_string(),
                    c.a.to_string(),
                    c.sigma_min2.to_string(),
                    c.sigma_max2.to_string(),
                    c.d.to_string(),
                    c.iterations.to_string(),
                    fmt_f64(*res.from_no_overlap.last().unwrap()),
                    fmt_f64(*res.from_half.last().unwrap()),
                ]);
            }
            write(out, "trace_summary.csv", &summary)?;
            print!("{}", summary.render());
        }
        Experiment::Nsweep { n, a, d, runs, run } => {
            let (r, spec) = resolve(run, id)?;
            let sizes = first_non_empty(n, spec.n.as_ref(), default_sample_sizes);
            if sizes.iter().any(|&s| s < 2) {
                return Err(CliError::input("every per-mode sample size must be at least 2"));
            }
            let runs = runs.or(spec.runs).unwrap_or(16);
            let rows = run_sample_size_sweep(&sizes, *a, *d, runs, &r.descent, &r.density, r.seed)?;
            let table = sample_size_table(&rows);
            write(out, "nsweep.csv", &table)?;
            print!("{}", table.render());
        }
        Experiment::Modes { k, d, n, runs, run } => {
            let (r, spec) = resolve(run, id)?;
            let config = KModesConfig {
                k: k.or(spec.k).unwrap_or(10),
                d: *d,
                per_mode: *n,
                runs: runs.or(spec.runs).unwrap_or(1),
                descent: r.descent,
                density: r.density,
                master_seed: r.seed,
            };
            if config.runs == 0 {
                return Err(CliError::input("runs must be at least 1"));
            }
            let result = run_k_modes_experiment(&config)?;
            let (summary, trace, hist) = k_modes_tables(&result);
            write(out, "modes_summary.csv", &summary)?;
            write(out, "modes_trace.csv", &trace)?;
            write(out, "modes_histogram.csv", &hist)?;
            print!("{}", summary.render());
            println!("bias_norm (no-overlap init): {}", fmt_f64(result.no_overlap.bias_norm));
            println!("variance (no-overlap init): {}", fmt_f64(result.no_overlap.variance));
            println!("max excursion from no-overlap init: {}", fmt_f64(result.max_no_overlap_excursion));
        }
        Experiment::Langevin {
            h,
            steps,
            replicas,
            beta0,
            beta1,
            quadrature_points,
            run,
        } => {
            let (r, _) = resolve(run, id)?;
            let config = LangevinExperimentConfig {
                step_size: *h,
                steps: *steps,
                replicas: *replicas,
                beta0: *beta0,
                beta1: *beta1,
                descent: r.descent,
                rule: r.density.rule,
                quadrature_points: *quadrature_points,
                master_seed: r.seed,
            };
            let result = run_langevin_experiment(&config)?;
            let (summary, trace, points) = langevin_tables(&result);
            write(out, "langevin_summary.csv", &summary)?;
            write(out, "langevin_trace.csv", &trace)?;
            write(out, "langevin_points.csv", &points)?;
            print!("{}", summary.render());
        }
        Experiment::Individual { n, run } => {
            let (r, spec) = resolve(run, id)?;
            let sizes = first_non_empty(n, spec.n.as_ref(), || vec![100, 10_000]);
            let config = IndividualConfig {
                descent: r.descent,
                ..Default::default()
            };
            let results = run_individual_experiment(&sizes, &config, r.seed)?;
            let mut summary = Table::new(["n", "bandwidth", "ks_unweighted", "ks_weighted", "ratio_correlation"]);
            for res in &results {
                let (scatter, cdf, trace) = individual_tables(res);
                write(out, &format!("individual_weights_n{}.csv", res.n), &scatter)?;
                write(out, &format!("individual_cdf_n{}.csv", res.n), &cdf)?;
                write(out, &format!("individual_trace_n{}.csv", res.n), &trace)?;
                summary.push(vec![
                    res.n.to_string(),
                    fmt_f64(res.result.bandwidth),
                    fmt_f64(res.kolmogorov_unweighted),
                    fmt_f64(res.kolmogorov_weighted),
                    fmt_f64(res.ratio_correlation),
                ]);
            }
            print!("{}", summary.render());
        }
    }
    Ok(())
}
