//! Quadrature ground truth for analytic mixtures in one or two dimensions.

mod analytic;
mod quadrature;

use rayon::prelude::*;

pub use analytic::{AnalyticDensity, AnalyticMixture, LogDensityFn};
pub use quadrature::{trapezoid_axis, QuadratureGrid, MIN_POINTS_PER_DIM, REFINEMENT_TOL};

use crate::data::SimplexWeights;
use crate::density::LogDensity;
use crate::numeric::{compensated_sum, log_sum_exp_sorted, softmax_neg};
use crate::reweight::{exp_gradient_step, DescentConfig, DescentTrace, Init};
use crate::samplers::double_well_energy;
use crate::{Error, Result};

/// Density values below this contribute nothing to an integral.
pub const DENSITY_FLOOR: f64 = 1e-300;
const LN_DENSITY_FLOOR: f64 = -690.775_527_898_213_7;

/// Asymptotic description of a clustering whose cluster densities have
/// pairwise disjoint supports `D_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisjointSupportTruth {
    /// `q*_k = μ(D_k) / Σ_l μ(D_l)`.
    pub conditional_weights: SimplexWeights,
    /// `r = 1 - Σ_l μ(D_l)`.
    pub missing_mass: f64,
    /// `KL(ν_k | μ_k)` with `μ_k` the restriction of `μ` to `D_k`.
    pub kl_per_cluster: Vec<f64>,
}

impl DisjointSupportTruth {
    pub fn new(conditional_weights: SimplexWeights, missing_mass: f64, kl_per_cluster: Vec<f64>) -> Result<Self> {
        if !(0.0..1.0).contains(&missing_mass) {
            return Err(Error::invalid("missing mass must lie in [0, 1)"));
        }
        if kl_per_cluster.len() != conditional_weights.len() {
            return Err(Error::invalid("one KL value per cluster required"));
        }
        Ok(Self {
            conditional_weights,
            missing_mass,
            kl_per_cluster,
        })
    }

    /// Builds the truth by quadrature; `region(x)` names the support containing `x`.
    pub fn from_quadrature<M, F>(mu: &M, components: &[AnalyticDensity], region: F, grid: &QuadratureGrid) -> Result<Self>
    where
        M: LogDensity + Sync,
        F: Fn(&[f64]) -> Option<usize> + Sync,
    {
        let k = components.len();
        let nodes = grid.nodes();
        let masses: Vec<f64> = (0..k)
            .map(|c| {
                compensated_sum(nodes.iter().filter(|(x, _)| region(x) == Some(c)).map(|(x, w)| w * mu.ln_density(x).exp()))
            })
            .collect();
        let total: f64 = masses.iter().sum();
        if total <= 0.0 {
            return Err(Error::invalid("the regions carry no target mass"));
        }
        let kl = (0..k)
            .map(|c| {
                let ln_mass = masses[c].ln();
                let terms = nodes
                    .iter()
                    .filter(|(x, _)| region(x) == Some(c))
                    .map(|(x, w)| {
                        let lv = components[c].ln_density(x);
                        if lv < LN_DENSITY_FLOOR {
                            return Ok(0.0);
                        }
                        let lm = mu.ln_density(x);
                        if lm == f64::NEG_INFINITY {
                            return Err(Error::AbsoluteContinuity { point: x.clone() });
                        }
                        Ok(w * lv.exp() * (lv - lm + ln_mass))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                Ok(compensated_sum(terms))
            })
            .collect::<Result<Vec<f64>>>()?;
        Self::new(
            SimplexWeights::from_unnormalized(masses)?,
            (1.0 - total).max(0.0),
            kl,
        )
    }
}

/// `∫ ρ ln(ρ/μ)` by the trapezoid rule; `ρ` need not be normalized.
pub fn quadrature_kl<R, M>(rho: &R, mu: &M, grid: &QuadratureGrid) -> Result<f64>
where
    R: LogDensity + Sync,
    M: LogDensity + Sync,
{
    grid.integrate(|x| {
        let lr = rho.ln_density(x);
        if lr < LN_DENSITY_FLOOR {
            return Ok(0.0);
        }
        let lm = mu.ln_density(x);
        if lm == f64::NEG_INFINITY {
            return Err(Error::AbsoluteContinuity { point: x.to_vec() });
        }
        Ok(lr.exp() * (lr - lm))
    })
}

/// `π(p) = Σ p_k ν_k` over analytic components, as a [`LogDensity`].
#[derive(Debug, Clone, Copy)]
pub struct WeightedComponents<'a> {
    pub components: &'a [AnalyticDensity],
    pub weights: &'a [f64],
}

impl LogDensity for WeightedComponents<'_> {
    fn ln_density(&self, x: &[f64]) -> f64 {
        let mut terms: Vec<f64> = self
            .components
            .iter()
            .zip(self.weights)
            .filter(|(_, p)| **p > 0.0)
            .map(|(c, p)| p.ln() + c.ln_density(x))
            .collect();
        log_sum_exp_sorted(&mut terms)
    }
}

/// `J(p) = KL(π(p) | μ)` for any nonnegative `p` (no normalization imposed).
pub fn objective<M: LogDensity + Sync>(
    components: &[AnalyticDensity],
    mu: &M,
    p: &[f64],
    grid: &QuadratureGrid,
) -> Result<f64> {
    quadrature_kl(&WeightedComponents { components, weights: p }, mu, grid)
}

/// Component and target log-densities tabulated on the grid nodes.
struct GridTable {
    weights: Vec<f64>,
    points: Vec<Vec<f64>>,
    /// Row per node, one column per component.
    ln_nu: Vec<Vec<f64>>,
    ln_mu: Vec<f64>,
}

impl GridTable {
    fn new<M: LogDensity + Sync>(components: &[AnalyticDensity], mu: &M, grid: &QuadratureGrid) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("no components"));
        }
        if components.iter().any(|c| c.dim() != grid.dimension()) {
            return Err(Error::invalid("component dimension differs from the grid"));
        }
        let nodes = grid.nodes();
        let rows: Vec<(Vec<f64>, f64)> = nodes
            .par_iter()
            .map(|(x, _)| (components.iter().map(|c| c.ln_density(x)).collect(), mu.ln_density(x)))
            .collect();
        let (ln_nu, ln_mu) = rows.into_iter().unzip();
        let (points, weights) = nodes.into_iter().unzip();
        Ok(Self {
            weights,
            points,
            ln_nu,
            ln_mu,
        })
    }

    fn ln_pi(&self, node: usize, ln_p: &[f64]) -> f64 {
        let mut terms: Vec<f64> = self.ln_nu[node]
            .iter()
            .zip(ln_p)
            .filter(|(_, lp)| **lp != f64::NEG_INFINITY)
            .map(|(v, lp)| v + lp)
            .collect();
        log_sum_exp_sorted(&mut terms)
    }

    fn gradient(&self, p: &[f64]) -> Result<Vec<f64>> {
        let k = p.len();
        let ln_p: Vec<f64> = p.iter().map(|v| if *v > 0.0 { v.ln() } else { f64::NEG_INFINITY }).collect();
        let per_node = (0..self.weights.len())
            .into_par_iter()
            .map(|i| {
                let mut out = vec![0.0; k];
                let active: Vec<usize> = (0..k).filter(|&c| self.ln_nu[i][c] >= LN_DENSITY_FLOOR).collect();
                if active.is_empty() {
                    return Ok(out);
                }
                if self.ln_mu[i] == f64::NEG_INFINITY {
                    return Err(Error::AbsoluteContinuity {
                        point: self.points[i].clone(),
                    });
                }
                let log_ratio = self.ln_pi(i, &ln_p) - self.ln_mu[i];
                for c in active {
                    out[c] = self.weights[i] * self.ln_nu[i][c].exp() * log_ratio;
                }
                Ok(out)
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Ok((0..k).map(|c| 1.0 + compensated_sum(per_node.iter().map(|r| r[c]))).collect())
    }

    /// `KL(ν_k | μ)` per component.
    fn component_kl(&self) -> Result<Vec<f64>> {
        let k = self.ln_nu[0].len();
        (0..k)
            .map(|c| {
                let terms = (0..self.weights.len())
                    .map(|i| {
                        let lv = self.ln_nu[i][c];
                        if lv < LN_DENSITY_FLOOR {
                            return Ok(0.0);
                        }
                        if self.ln_mu[i] == f64::NEG_INFINITY {
                            return Err(Error::AbsoluteContinuity {
                                point: self.points[i].clone(),
                            });
                        }
                        Ok(self.weights[i] * lv.exp() * (lv - self.ln_mu[i]))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                Ok(compensated_sum(terms))
            })
            .collect()
    }
}

/// `∂_{p_k} J(p) = 1 + ∫ (U + ln π(p)) ν_k` with `U = -ln μ`.
pub fn exact_gradient<M: LogDensity + Sync>(
    components: &[AnalyticDensity],
    mu: &M,
    p: &SimplexWeights,
    grid: &QuadratureGrid,
) -> Result<Vec<f64>> {
    if p.len() != components.len() {
        return Err(Error::invalid("one weight per component required"));
    }
    GridTable::new(components, mu, grid)?.gradient(p.as_slice())
}

/// `∫ (Σ u_i ν_i)² / (Σ p_i ν_i)`, the second derivative of `J` along `u`.
pub fn hessian_quadratic_form(
    components: &[AnalyticDensity],
    p: &SimplexWeights,
    u: &[f64],
    grid: &QuadratureGrid,
) -> Result<f64> {
    if p.len() != components.len() || u.len() != components.len() {
        return Err(Error::invalid("one weight and one direction entry per component required"));
    }
    if !p.is_strictly_positive() {
        return Err(Error::invalid("hessian form needs strictly positive weights"));
    }
    let pi = WeightedComponents {
        components,
        weights: p.as_slice(),
    };
    grid.integrate(|x| {
        let lp = pi.ln_density(x);
        if lp < LN_DENSITY_FLOOR {
            return Ok(0.0);
        }
        let s: f64 = components.iter().zip(u).map(|(c, ui)| ui * (c.ln_density(x) - lp).exp()).sum();
        Ok(s * s * lp.exp())
    })
}

/// Exponentiated gradient iterates driven by [`exact_gradient`].
pub fn exact_descent<M: LogDensity + Sync>(
    components: &[AnalyticDensity],
    mu: &M,
    config: &DescentConfig,
    grid: &QuadratureGrid,
) -> Result<DescentTrace> {
    if !(config.step_size > 0.0 && config.step_size.is_finite()) {
        return Err(Error::invalid("step size must be positive"));
    }
    let table = GridTable::new(components, mu, grid)?;
    let w_values = table.component_kl()?;
    let no_overlap = SimplexWeights::from_unnormalized(softmax_neg(&w_values))?;
    let start = match &config.init {
        Init::NoOverlap => no_overlap.clone(),
        Init::Uniform => SimplexWeights::uniform(components.len()),
        Init::Custom(p) if p.len() == components.len() => p.clone(),
        Init::Custom(_) => return Err(Error::invalid("custom initializer has the wrong length")),
    };
    let mut iterates = vec![start];
    for m in 0..config.iterations {
        let current = &iterates[m];
        match table
            .gradient(current.as_slice())
            .and_then(|g| exp_gradient_step(current, &g, config.step_size))
        {
            Ok(next) => iterates.push(next),
            Err(e) => {
                return Err(Error::Descent {
                    iteration: m,
                    partial: Box::new(DescentTrace {
                        iterates,
                        no_overlap_weights: Some(no_overlap.clone()),
                        w_values,
                    }),
                    source: Box::new(e),
                })
            }
        }
    }
    Ok(DescentTrace {
        iterates,
        no_overlap_weights: Some(no_overlap.clone()),
        w_values,
    })
}

/// Limit weights `p̄*_k ∝ q*_k exp(-KL(ν_k | μ_k))`.
pub fn disjoint_asymptotic_weights(truth: &DisjointSupportTruth) -> Result<SimplexWeights> {
    if truth.kl_per_cluster.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("KL values must be finite"));
    }
    let w: Vec<f64> = truth
        .conditional_weights
        .as_slice()
        .iter()
        .zip(&truth.kl_per_cluster)
        .map(|(q, kl)| if *q > 0.0 { kl - q.ln() } else { f64::INFINITY })
        .collect();
    SimplexWeights::from_unnormalized(softmax_neg(&w))
}

/// Default box for the double-well reference: wide in `y` because the
/// curvature `m(x)` drops to `0.1` for positive `x`.
pub fn double_well_default_grid(points: usize) -> Result<QuadratureGrid> {
    QuadratureGrid::rectangle((-4.0, 4.0), (-40.0, 40.0), points)
}

/// `P(x > 0)` under `e^{-βU}` for the double-well potential.
pub fn double_well_reference(beta: f64, grid: &QuadratureGrid) -> Result<f64> {
    split_probability(&double_well_energy, beta, grid)
}

/// `P(x > 0)` under `e^{-βV}` for any potential `V(x, y)` on the grid box.
///
/// The `x` axis is split at `0` into two trapezoid rules with endpoint
/// derivative corrections, so the indicator adds no first-order error. The
/// value is checked against the doubled grid.
pub fn split_probability<V>(potential: &V, beta: f64, grid: &QuadratureGrid) -> Result<f64>
where
    V: Fn(f64, f64) -> f64 + Sync,
{
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::invalid("beta must be positive"));
    }
    if grid.dimension() != 2 {
        return Err(Error::invalid("the double-well reference needs a two-dimensional grid"));
    }
    let (x, y) = (grid.bounds()[0], grid.bounds()[1]);
    if x.0 > -4.0 || x.1 < 4.0 || y.0 > -4.0 || y.1 < 4.0 {
        return Err(Error::invalid("the grid box must cover [-4, 4]²"));
    }
    let coarse = split_probability_once(potential, beta, grid);
    let fine = split_probability_once(potential, beta, &grid.refined());
    quadrature::check_refinement(coarse, fine)?;
    Ok(coarse)
}

fn split_probability_once<V>(potential: &V, beta: f64, grid: &QuadratureGrid) -> f64
where
    V: Fn(f64, f64) -> f64 + Sync,
{
    let n = grid.points_per_dim();
    let (xb, yb) = (grid.bounds()[0], grid.bounds()[1]);
    let ys = trapezoid_axis(yb.0, yb.1, n);
    let left = trapezoid_axis(xb.0, 0.0, n);
    let right = trapezoid_axis(0.0, xb.1, n);
    // Shift by the potential at the origin to keep exponents moderate.
    let shift = potential(0.0, 0.0);
    let marginal = |nodes: &[(f64, f64)]| -> Vec<f64> {
        nodes
            .par_iter()
            .map(|&(x, _)| compensated_sum(ys.iter().map(|&(y, wy)| wy * (-beta * (potential(x, y) - shift)).exp())))
            .collect()
    };
    let fl = marginal(&left);
    let fr = marginal(&right);
    let zl = corrected_trapezoid(&fl, (0.0 - xb.0) / (n - 1) as f64);
    let zr = corrected_trapezoid(&fr, xb.1 / (n - 1) as f64);
    zr / (zl + zr)
}

/// Trapezoid sum of equispaced values with the `h²/12 (f'(a) - f'(b))`
/// endpoint term, derivatives from second-order one-sided differences.
fn corrected_trapezoid(f: &[f64], h: f64) -> f64 {
    let n = f.len();
    let inner = compensated_sum(f[1..n - 1].iter().copied());
    let trap = h * (inner + 0.5 * (f[0] + f[n - 1]));
    let da = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    let db = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
    trap + h * h / 12.0 * (da - db)
}

/// Same probability with the Gaussian `y` integral done in closed form:
/// `∫ e^{-β U(x, 0)} sqrt(2π / (β m(x))) dx`, split at `x = 0`.
pub fn double_well_reference_1d(beta: f64, x_box: (f64, f64), points: usize) -> Result<f64> {
    if points < MIN_POINTS_PER_DIM {
        return Err(Error::invalid("too few quadrature points"));
    }
    let f = |x: f64| {
        let m = crate::samplers::double_well_curvature(x);
        (-beta * double_well_energy(x, 0.0)).exp() * (2.0 * std::f64::consts::PI / (beta * m)).sqrt()
    };
    let eval = |lo: f64, hi: f64| {
        let v: Vec<f64> = trapezoid_axis(lo, hi, points).iter().map(|&(x, _)| f(x)).collect();
        corrected_trapezoid(&v, (hi - lo) / (points - 1) as f64)
    };
    let zl = eval(x_box.0, 0.0);
    let zr = eval(0.0, x_box.1);
    Ok(zr / (zl + zr))
}

#[cfg(test)]
mod tests;
