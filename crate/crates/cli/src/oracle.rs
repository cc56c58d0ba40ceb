use clap::{Args, Subcommand};

use modeweight::bench::fmt_f64;
use modeweight::oracles::{
    double_well_default_grid, double_well_reference, exact_gradient, hessian_quadratic_form, quadrature_kl,
    AnalyticDensity, QuadratureGrid, WeightedComponents, REFINEMENT_TOL,
};
use modeweight::SimplexWeights;

use crate::config::parse_list;
use crate::error::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(subcommand)]
    pub quantity: Quantity,
}

/// One-dimensional Gaussian components `N(m_k, v_k)` shared by the model
/// mixture `π(p)` and the target `μ`.
#[derive(Debug, Clone, Args)]
pub struct MixtureArgs {
    #[arg(long, default_value = "-1,1")]
    pub means: String,
    #[arg(long, default_value = "0.25,0.25")]
    pub variances: String,
    /// Model weights `p`.
    #[arg(long, default_value = "0.3,0.7")]
    pub p: String,
    /// Target weights.
    #[arg(long, default_value = "0.5,0.5")]
    pub target: String,
    /// Quadrature points on the integration interval.
    #[arg(long, default_value_t = 512)]
    pub points: usize,
}

#[derive(Debug, Subcommand)]
pub enum Quantity {
    /// `KL(π(p) | μ)`.
    Kl {
        #[command(flatten)]
        mixture: MixtureArgs,
        /// Use `p` as the target weights.
        #[arg(long)]
        same: bool,
    },
    /// `∂_p KL(π(p) | μ)`.
    Gradient {
        #[command(flatten)]
        mixture: MixtureArgs,
        /// Use `p` as the target weights.
        #[arg(long)]
        at_optimum: bool,
    },
    /// Second derivative of the objective along `--direction`.
    Hessian {
        #[command(flatten)]
        mixture: MixtureArgs,
        #[arg(long, default_value = "1,-1")]
        direction: String,
    },
    /// `P(x > 0)` under the double-well Gibbs measure.
    Doublewell {
        #[arg(long, default_value_t = 10.0)]
        beta: f64,
        /// Points per axis.
        #[arg(long, default_value_t = 512)]
        points: usize,
    },
}

struct Setup {
    components: Vec<AnalyticDensity>,
    p: SimplexWeights,
    target: SimplexWeights,
    grid: QuadratureGrid,
}

fn floats(name: &str, s: &str) -> CliResult<Vec<f64>> {
    parse_list(s).map_err(|_| CliError::input(format!("--{name} `{s}`: expected comma-separated numbers")))
}

fn setup(m: &MixtureArgs) -> CliResult<Setup> {
    let means = floats("means", &m.means)?;
    let vars = floats("variances", &m.variances)?;
    let p = floats("p", &m.p)?;
    let target = floats("target", &m.target)?;
    let k = means.len();
    if vars.len() != k || p.len() != k || target.len() != k {
        return Err(CliError::input("--means, --variances, --p and --target need the same length"));
    }
    let components = means
        .iter()
        .zip(&vars)
        .map(|(&mu, &v)| AnalyticDensity::gaussian_diagonal(vec![mu], vec![v]))
        .collect::<Result<Vec<_>, _>>()?;
    let lo = means.iter().zip(&vars).map(|(m, v)| m - 12.0 * v.sqrt()).fold(f64::INFINITY, f64::min);
    let hi = means.iter().zip(&vars).map(|(m, v)| m + 12.0 * v.sqrt()).fold(f64::NEG_INFINITY, f64::max);
    Ok(Setup {
        components,
        p: SimplexWeights::new(p)?,
        target: SimplexWeights::new(target)?,
        grid: QuadratureGrid::interval(lo, hi, m.points)?,
    })
}

/// Absolute change under grid doubling; fails beyond the relative tolerance.
fn refinement(coarse: &[f64], fine: &[f64]) -> CliResult<f64> {
    let delta = coarse.iter().zip(fine).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let scale = fine.iter().map(|v| v.abs()).fold(1.0, f64::max);
    if delta > REFINEMENT_TOL * scale {
        return Err(CliError::Numerical(format!(
            "quadrature not converged: change {delta:e} under grid refinement"
        )));
    }
    Ok(delta)
}

fn print_result(name: &str, value: &[f64], delta: f64) {
    let v: Vec<String> = value.iter().map(|x| fmt_f64(*x)).collect();
    println!("{name}: {}", v.join(","));
    println!("refinement_delta: {}", fmt_f64(delta));
}

pub fn run(args: &OracleArgs) -> CliResult<()> {
    match &args.quantity {
        Quantity::Kl { mixture, same } => {
            let s = setup(mixture)?;
            let target = if *same { s.p.clone() } else { s.target.clone() };
            let rho = WeightedComponents {
                components: &s.components,
                weights: s.p.as_slice(),
            };
            let mu = WeightedComponents {
                components: &s.components,
                weights: target.as_slice(),
            };
            let coarse = quadrature_kl(&rho, &mu, &s.grid)?;
            let fine = quadrature_kl(&rho, &mu, &s.grid.refined())?;
            print_result("kl", &[coarse], refinement(&[coarse], &[fine])?);
        }
        Quantity::Gradient { mixture, at_optimum } => {
            let s = setup(mixture)?;
            let target = if *at_optimum { s.p.clone() } else { s.target.clone() };
            let mu = WeightedComponents {
                components: &s.components,
                weights: target.as_slice(),
            };
            let coarse = exact_gradient(&s.components, &mu, &s.p, &s.grid)?;
            let fine = exact_gradient(&s.components, &mu, &s.p, &s.grid.refined())?;
            print_result("gradient", &coarse, refinement(&coarse, &fine)?);
        }
        Quantity::Hessian { mixture, direction } => {
            let s = setup(mixture)?;
            let u = floats("direction", direction)?;
            let coarse = hessian_quadratic_form(&s.components, &s.p, &u, &s.grid)?;
            let fine = hessian_quadratic_form(&s.components, &s.p, &u, &s.grid.refined())?;
            print_result("hessian_form", &[coarse], refinement(&[coarse], &[fine])?);
        }
        Quantity::Doublewell { beta, points } => {
            let grid = double_well_default_grid(*points)?;
            let coarse = double_well_reference(*beta, &grid)?;
            let fine = double_well_reference(*beta, &grid.refined())?;
            print_result("p_x_positive", &[coarse], (fine - coarse).abs());
        }
    }
    Ok(())
}
