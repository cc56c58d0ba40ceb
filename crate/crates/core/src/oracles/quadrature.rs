//! Composite trapezoid rule on 1-D and 2-D tensor grids.

use rayon::prelude::*;

use crate::numeric::compensated_sum;
use crate::{Error, Result};

pub const MIN_POINTS_PER_DIM: usize = 64;
/// Relative change tolerated when the grid is doubled.
pub const REFINEMENT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    bounds: Vec<(f64, f64)>,
    points_per_dim: usize,
}

impl QuadratureGrid {
    pub fn new(bounds: Vec<(f64, f64)>, points_per_dim: usize) -> Result<Self> {
        if bounds.is_empty() || bounds.len() > 2 {
            return Err(Error::invalid("quadrature grids are one- or two-dimensional"));
        }
        if points_per_dim < MIN_POINTS_PER_DIM {
            return Err(Error::invalid(format!("at least {MIN_POINTS_PER_DIM} points per dimension")));
        }
        if bounds.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi)) {
            return Err(Error::invalid("quadrature box must be finite and nonempty"));
        }
        Ok(Self { bounds, points_per_dim })
    }

    pub fn interval(lo: f64, hi: f64, points: usize) -> Result<Self> {
        Self::new(vec![(lo, hi)], points)
    }

    pub fn rectangle(x: (f64, f64), y: (f64, f64), points: usize) -> Result<Self> {
        Self::new(vec![x, y], points)
    }

    pub fn dimension(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn points_per_dim(&self) -> usize {
        self.points_per_dim
    }

    /// Same box with twice as many points per dimension.
    pub fn refined(&self) -> Self {
        Self {
            bounds: self.bounds.clone(),
            points_per_dim: 2 * self.points_per_dim,
        }
    }

    fn axis(&self, dim: usize) -> Vec<(f64, f64)> {
        trapezoid_axis(self.bounds[dim].0, self.bounds[dim].1, self.points_per_dim)
    }

    /// All `(node, weight)` pairs, first coordinate slowest.
    pub fn nodes(&self) -> Vec<(Vec<f64>, f64)> {
        match self.dimension() {
            1 => self.axis(0).into_iter().map(|(x, w)| (vec![x], w)).collect(),
            _ => {
                let ax = self.axis(0);
                let ay = self.axis(1);
                ax.iter()
                    .flat_map(|&(x, wx)| ay.iter().map(move |&(y, wy)| (vec![x, y], wx * wy)))
                    .collect()
            }
        }
    }

    /// `∫ f` over the box; `f` may fail at a node.
    pub fn integrate<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(&[f64]) -> Result<f64> + Sync,
    {
        let terms = self
            .nodes()
            .par_iter()
            .map(|(x, w)| f(x).map(|v| w * v))
            .collect::<Result<Vec<f64>>>()?;
        Ok(compensated_sum(terms))
    }

    /// Integrates on this grid and on its refinement; fails when they differ
    /// by more than [`REFINEMENT_TOL`] relative. Returns the refined value.
    pub fn integrate_checked<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(&[f64]) -> Result<f64> + Sync,
    {
        let coarse = self.integrate(&f)?;
        let fine = self.refined().integrate(&f)?;
        check_refinement(coarse, fine)?;
        Ok(fine)
    }
}

pub(crate) fn check_refinement(coarse: f64, fine: f64) -> Result<()> {
    let delta = (fine - coarse).abs() / fine.abs().max(f64::MIN_POSITIVE);
    if delta > REFINEMENT_TOL {
        Err(Error::QuadratureNotConverged { delta })
    } else {
        Ok(())
    }
}

/// Equispaced nodes on `[lo, hi]` with trapezoid weights.
pub fn trapezoid_axis(lo: f64, hi: f64, points: usize) -> Vec<(f64, f64)> {
    let h = (hi - lo) / (points - 1) as f64;
    (0..points)
        .map(|i| {
            let x = if i == points - 1 { hi } else { lo + i as f64 * h };
            let w = if i == 0 || i == points - 1 { 0.5 * h } else { h };
            (x, w)
        })
        .collect()
}
