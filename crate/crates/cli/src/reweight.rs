use std::path::PathBuf;

use clap::Args;

use modeweight::bench::{fit_densities, fmt_f64, Table};
use modeweight::data::{cluster_by_labels, cluster_by_threshold};
use modeweight::reweight::ReweightProblem;

use crate::config::RunArgs;
use crate::error::{CliError, CliResult};
use crate::io::{read_samples, write_trace, write_weights};

#[derive(Debug, Args)]
pub struct ReweightArgs {
    /// Samples CSV with header `x1,…,xd,energy[,cluster]`.
    pub samples: PathBuf,
    /// Cluster by `x_<coord> > value` (coord is 1-based) instead of the cluster column.
    #[arg(long, num_args = 2, value_names = ["COORD", "VALUE"])]
    pub threshold_split: Option<Vec<String>>,
    /// Output directory for weights.csv and trace.csv.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[command(flatten)]
    pub run: RunArgs,
}

pub fn run(args: &ReweightArgs) -> CliResult<()> {
    let resolved = args.run.resolve()?;
    let file = read_samples(&args.samples)?;
    let samples = &file.samples;
    let (clustering, names) = match (&args.threshold_split, &file.labels) {
        (Some(split), _) => {
            let coord: usize = split[0]
                .parse()
                .ok()
                .filter(|c| (1..=samples.dim()).contains(c))
                .ok_or_else(|| CliError::input(format!("--threshold-split: coordinate `{}` is not in 1..={}", split[0], samples.dim())))?;
            let value: f64 = split[1]
                .parse()
                .map_err(|_| CliError::input(format!("--threshold-split: `{}` is not a number", split[1])))?;
            (cluster_by_threshold(samples, coord - 1, value)?, vec![0, 1])
        }
        (None, Some(labels)) => {
            let c = cluster_by_labels(samples, labels)?;
            let names = c.member_lists().iter().map(|m| labels[m[0]]).collect();
            (c, names)
        }
        (None, None) => {
            return Err(CliError::input(format!(
                "{}: missing column `cluster`; add it or pass --threshold-split <coord> <value>",
                args.samples.display()
            )))
        }
    };
    let densities = fit_densities(samples, &clustering, &resolved.density)?;
    let problem = ReweightProblem::new(samples, &clustering, &densities)?;
    let trace = problem.descend(&resolved.descent)?;
    std::fs::create_dir_all(&args.out)?;
    write_weights(&args.out.join("weights.csv"), &names, &trace, problem.energy_means())?;
    write_trace(&args.out.join("trace.csv"), &trace)?;

    let mut t = Table::new(["cluster", "size", "weight", "W_k"]);
    let sizes = clustering.sizes();
    for (k, name) in names.iter().enumerate() {
        t.push(vec![
            name.to_string(),
            sizes[k].to_string(),
            fmt_f64(trace.final_weights()[k]),
            fmt_f64(trace.w_values[k]),
        ]);
    }
    print!("{}", t.render());
    Ok(())
}
