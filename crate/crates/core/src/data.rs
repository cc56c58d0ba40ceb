//! Samples, clusterings, simplex weights and the reweighted Monte Carlo estimator.
//!
//! Energies are the negative unnormalized log-density of the target and are only
//! meaningful up to an additive constant; nothing downstream depends on it.

use std::collections::HashMap;

use ndarray::{Array2, ArrayView2};

use crate::numeric::compensated_sum;
use crate::{Error, Result};

/// Tolerance on `|Σ p - 1|` accepted by [`SimplexWeights::new`] before renormalizing.
const SIMPLEX_INPUT_TOL: f64 = 1e-9;

/// `N` points of `R^d` together with their energies `U(x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    points: Array2<f64>,
    energies: Vec<f64>,
}

impl SampleSet {
    pub fn new(points: Array2<f64>, energies: Vec<f64>) -> Result<Self> {
        let (n, d) = points.dim();
        if n == 0 {
            return Err(Error::EmptySampleSet);
        }
        if d == 0 {
            return Err(Error::invalid("points must have at least one coordinate"));
        }
        if energies.len() != n {
            return Err(Error::invalid(format!(
                "{} energies for {} points",
                energies.len(),
                n
            )));
        }
        if let Some(i) = points.iter().position(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("non-finite coordinate in sample {}", i / d)));
        }
        if let Some(i) = energies.iter().position(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("non-finite energy in sample {i}")));
        }
        Ok(Self {
            points: points.as_standard_layout().into_owned(),
            energies,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], energies: Vec<f64>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("rows have inconsistent lengths"));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let points = Array2::from_shape_vec((rows.len(), d), flat)
            .map_err(|e| Error::invalid(e.to_string()))?;
        Self::new(points, energies)
    }

    pub fn count(&self) -> usize {
        self.energies.len()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.points.as_slice().expect("standard layout")[i * d..(i + 1) * d]
    }

    pub fn points(&self) -> ArrayView2<'_, f64> {
        self.points.view()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Rows `indices` of the point matrix.
    pub fn select_points(&self, indices: &[usize]) -> Array2<f64> {
        self.points.select(ndarray::Axis(0), indices)
    }

    /// Same points, energies `U + c`.
    pub fn with_energy_shift(&self, c: f64) -> Self {
        Self {
            points: self.points.clone(),
            energies: self.energies.iter().map(|u| u + c).collect(),
        }
    }
}

/// Partition of the sample indices `0..N` into `K` nonempty clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clustering {
    assignment: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl Clustering {
    /// Groups equal labels; cluster ids follow the order of first appearance.
    pub fn from_labels(labels: &[u64]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptySampleSet);
        }
        let mut ids: HashMap<u64, usize> = HashMap::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        let assignment = labels
            .iter()
            .enumerate()
            .map(|(i, label)| {
                let next = ids.len();
                let id = *ids.entry(*label).or_insert(next);
                if id == members.len() {
                    members.push(Vec::new());
                }
                members[id].push(i);
                id
            })
            .collect();
        Ok(Self { assignment, members })
    }

    /// Builds a clustering from explicit member lists, which must partition `0..n`.
    pub fn from_members(members: Vec<Vec<usize>>) -> Result<Self> {
        let n: usize = members.iter().map(Vec::len).sum();
        if n == 0 {
            return Err(Error::EmptySampleSet);
        }
        let mut assignment = vec![usize::MAX; n];
        for (k, list) in members.iter().enumerate() {
            if list.is_empty() {
                return Err(Error::invalid(format!("cluster {k} is empty")));
            }
            for &i in list {
                if i >= n || assignment[i] != usize::MAX {
                    return Err(Error::invalid("member lists do not partition the samples"));
                }
                assignment[i] = k;
            }
        }
        Ok(Self { assignment, members })
    }

    /// Every sample in its own cluster.
    pub fn singletons(n: usize) -> Result<Self> {
        Self::from_members((0..n).map(|i| vec![i]).collect())
    }

    pub fn cluster_count(&self) -> usize {
        self.members.len()
    }

    pub fn sample_count(&self) -> usize {
        self.assignment.len()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn members(&self, k: usize) -> &[usize] {
        &self.members[k]
    }

    pub fn member_lists(&self) -> &[Vec<usize>] {
        &self.members
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    /// Relabels clusters so that old cluster `perm[k]` becomes cluster `k`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.cluster_count() {
            return Err(Error::invalid("permutation length does not match cluster count"));
        }
        Self::from_members(perm.iter().map(|&k| self.members[k].clone()).collect())
    }
}

/// Clusters from externally supplied labels (one per sample).
pub fn cluster_by_labels(samples: &SampleSet, labels: &[u64]) -> Result<Clustering> {
    if labels.len() != samples.count() {
        return Err(Error::invalid(format!(
            "{} labels for {} samples",
            labels.len(),
            samples.count()
        )));
    }
    Clustering::from_labels(labels)
}

/// Two clusters split on one coordinate: cluster 0 holds `x[coord] > threshold`.
pub fn cluster_by_threshold(samples: &SampleSet, coord: usize, threshold: f64) -> Result<Clustering> {
    if coord >= samples.dim() {
        return Err(Error::invalid(format!(
            "coordinate {coord} out of range for dimension {}",
            samples.dim()
        )));
    }
    let (above, below): (Vec<usize>, Vec<usize>) =
        (0..samples.count()).partition(|&i| samples.point(i)[coord] > threshold);
    if above.is_empty() || below.is_empty() {
        return Err(Error::DegenerateSplit);
    }
    Clustering::from_members(vec![above, below])
}

/// `V_k`: mean energy over each cluster.
pub fn cluster_energy_means(samples: &SampleSet, clustering: &Clustering) -> Vec<f64> {
    let u = samples.energies();
    clustering
        .member_lists()
        .iter()
        .map(|m| compensated_sum(m.iter().map(|&j| u[j])) / m.len() as f64)
        .collect()
}

/// Reweighted estimator `Σ_k (p_k / n_k) Σ_{j ∈ I_k} f(x_j)`.
pub fn weighted_expectation<F>(
    samples: &SampleSet,
    clustering: &Clustering,
    weights: &SimplexWeights,
    observable: F,
) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    if weights.len() != clustering.cluster_count() {
        return Err(Error::invalid("weights length does not match cluster count"));
    }
    let mut total = 0.0;
    for (k, members) in clustering.member_lists().iter().enumerate() {
        let mut cluster_sum = 0.0;
        for &j in members {
            let v = observable(samples.point(j));
            if !v.is_finite() {
                return Err(Error::NonFiniteObservable { index: j });
            }
            cluster_sum += v;
        }
        total += weights[k] * cluster_sum / members.len() as f64;
    }
    Ok(total)
}

/// A point of the probability simplex `Δ_K`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    /// Accepts nonnegative finite values summing to one (within `1e-9`) and
    /// renormalizes them exactly.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let sum = Self::check_entries(&values)?;
        if (sum - 1.0).abs() > SIMPLEX_INPUT_TOL {
            return Err(Error::invalid(format!("weights sum to {sum}, not 1")));
        }
        Ok(Self::normalized(values, sum))
    }

    /// Normalizes any nonnegative vector with a positive sum.
    pub fn from_unnormalized(values: Vec<f64>) -> Result<Self> {
        let sum = Self::check_entries(&values)?;
        if sum <= 0.0 {
            return Err(Error::invalid("weights sum to zero"));
        }
        Ok(Self::normalized(values, sum))
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    fn check_entries(values: &[f64]) -> Result<f64> {
        if values.is_empty() {
            return Err(Error::invalid("empty weight vector"));
        }
        if values.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        Ok(crate::numeric::sum_sorted(&mut values.to_vec()))
    }

    fn normalized(mut values: Vec<f64>, sum: f64) -> Self {
        values.iter_mut().for_each(|v| *v /= sum);
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.0.iter().all(|&p| p > 0.0)
    }

    /// Sup-norm distance to another weight vector of the same length.
    pub fn sup_distance(&self, other: &[f64]) -> f64 {
        self.0.iter().zip(other).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

impl std::ops::Index<usize> for SimplexWeights {
    type Output = f64;

    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    fn line(xs: &[f64]) -> SampleSet {
        let pts = Array2::from_shape_vec((xs.len(), 1), xs.to_vec()).unwrap();
        SampleSet::new(pts, vec![0.0; xs.len()]).unwrap()
    }

    #[test]
    fn sample_set_rejects_bad_shapes() {
        assert!(matches!(
            SampleSet::new(Array2::zeros((0, 2)), vec![]),
            Err(Error::EmptySampleSet)
        ));
        assert!(SampleSet::new(Array2::zeros((2, 2)), vec![0.0]).is_err());
        assert!(SampleSet::new(array![[f64::NAN]], vec![0.0]).is_err());
        assert!(SampleSet::new(array![[0.0]], vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn labels_group_by_first_appearance() {
        let c = Clustering::from_labels(&[0, 0, 1, 1]).unwrap();
        assert_eq!(c.member_lists(), &[vec![0, 1], vec![2, 3]]);

        let c = Clustering::from_labels(&[1, 0, 1]).unwrap();
        assert_eq!(c.cluster_count(), 2);
        assert_eq!(c.members(0), &[0, 2]);
        assert_eq!(c.members(1), &[1]);

        let c = Clustering::from_labels(&[0, 0, 0]).unwrap();
        assert_eq!(c.cluster_count(), 1);
        assert_eq!(c.sizes(), vec![3]);

        assert!(matches!(Clustering::from_labels(&[]), Err(Error::EmptySampleSet)));
    }

    #[test]
    fn label_count_must_match_samples() {
        let s = line(&[0.0, 1.0]);
        assert!(cluster_by_labels(&s, &[0]).is_err());
    }

    #[test]
    fn threshold_split() {
        let s = line(&[-1.0, 2.0, 3.0]);
        let c = cluster_by_threshold(&s, 0, 0.0).unwrap();
        assert_eq!(c.members(0), &[1, 2]);
        assert_eq!(c.members(1), &[0]);

        let s = line(&[-1.0, -2.0]);
        assert!(matches!(cluster_by_threshold(&s, 0, 0.0), Err(Error::DegenerateSplit)));
        assert!(cluster_by_threshold(&s, 1, 0.0).is_err());
    }

    #[test]
    fn energy_means() {
        let s = SampleSet::new(array![[0.0], [1.0]], vec![1.0, 3.0]).unwrap();
        let one = Clustering::from_labels(&[0, 0]).unwrap();
        assert_eq!(cluster_energy_means(&s, &one), vec![2.0]);

        let s = SampleSet::new(array![[0.0], [1.0]], vec![5.0, 7.0]).unwrap();
        let two = Clustering::from_labels(&[0, 1]).unwrap();
        assert_eq!(cluster_energy_means(&s, &two), vec![5.0, 7.0]);
    }

    #[test]
    fn weighted_expectation_cases() {
        let s = SampleSet::new(array![[1.0, 9.0], [3.0, 9.0], [10.0, 0.0]], vec![0.0; 3]).unwrap();
        let c = Clustering::from_labels(&[0, 0, 1]).unwrap();
        let p = SimplexWeights::new(vec![1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(weighted_expectation(&s, &c, &p, |x| x[0]).unwrap(), 2.0);

        let q = SimplexWeights::new(vec![0.3, 0.7]).unwrap();
        assert_abs_diff_eq!(weighted_expectation(&s, &c, &q, |_| 1.0).unwrap(), 1.0, epsilon = 1e-15);

        let err = weighted_expectation(&s, &c, &q, |x| if x[0] > 5.0 { f64::NAN } else { 0.0 });
        assert!(matches!(err, Err(Error::NonFiniteObservable { index: 2 })));
    }

    #[test]
    fn simplex_validation() {
        assert!(SimplexWeights::new(vec![0.5, 0.6]).is_err());
        assert!(SimplexWeights::new(vec![-0.1, 1.1]).is_err());
        assert!(SimplexWeights::from_unnormalized(vec![0.0, 0.0]).is_err());
        let p = SimplexWeights::from_unnormalized(vec![1.0, 3.0]).unwrap();
        assert_eq!(p.as_slice(), &[0.25, 0.75]);
    }

    fn arb_labels() -> impl Strategy<Value = Vec<u64>> {
        prop::collection::vec(0u64..12, 1..1000)
    }

    proptest! {
        #[test]
        fn labels_partition_indices(labels in arb_labels()) {
            let c = Clustering::from_labels(&labels).unwrap();
            let mut seen = vec![false; labels.len()];
            for (k, m) in c.member_lists().iter().enumerate() {
                prop_assert!(!m.is_empty());
                for &i in m {
                    prop_assert!(!seen[i]);
                    seen[i] = true;
                    prop_assert_eq!(c.assignment()[i], k);
                }
            }
            prop_assert!(seen.iter().all(|&s| s));
            // members with equal labels share a cluster
            for i in 0..labels.len() {
                for j in 0..labels.len().min(50) {
                    prop_assert_eq!(labels[i] == labels[j], c.assignment()[i] == c.assignment()[j]);
                }
            }
        }

        #[test]
        fn threshold_split_partitions(xs in prop::collection::vec(-5.0f64..5.0, 2..1000), t in -1.0f64..1.0) {
            let s = line(&xs);
            if let Ok(c) = cluster_by_threshold(&s, 0, t) {
                prop_assert_eq!(c.sizes().iter().sum::<usize>(), xs.len());
                prop_assert!(c.members(0).iter().all(|&i| xs[i] > t));
                prop_assert!(c.members(1).iter().all(|&i| xs[i] <= t));
            }
        }

        #[test]
        fn energy_means_commute_with_shift(us in prop::collection::vec(-100.0f64..100.0, 1..200), c in -1e3f64..1e3) {
            let n = us.len();
            let pts = Array2::zeros((n, 1));
            let s = SampleSet::new(pts, us).unwrap();
            let labels: Vec<u64> = (0..n as u64).map(|i| i % 3).collect();
            let cl = Clustering::from_labels(&labels).unwrap();
            let base = cluster_energy_means(&s, &cl);
            let shifted = cluster_energy_means(&s.with_energy_shift(c), &cl);
            for (a, b) in base.iter().zip(&shifted) {
                prop_assert!((b - a - c).abs() <= 1e-12, "{} vs {}", b - a, c);
            }
        }

        #[test]
        fn estimator_linear_and_relabel_invariant(
            xs in prop::collection::vec(-5.0f64..5.0, 6..60),
            a in 0.01f64..1.0, b in 0.01f64..1.0, c in 0.01f64..1.0,
        ) {
            let s = line(&xs);
            let labels: Vec<u64> = (0..xs.len() as u64).map(|i| i % 3).collect();
            let cl = Clustering::from_labels(&labels).unwrap();
            let p = SimplexWeights::from_unnormalized(vec![a, b, c]).unwrap();
            let q = SimplexWeights::from_unnormalized(vec![c, a, b]).unwrap();
            let mid = SimplexWeights::from_unnormalized(
                p.as_slice().iter().zip(q.as_slice()).map(|(x, y)| 0.5 * (x + y)).collect(),
            ).unwrap();
            let f = |x: &[f64]| x[0] * x[0];
            let ep = weighted_expectation(&s, &cl, &p, f).unwrap();
            let eq = weighted_expectation(&s, &cl, &q, f).unwrap();
            let em = weighted_expectation(&s, &cl, &mid, f).unwrap();
            prop_assert!((em - 0.5 * (ep + eq)).abs() <= 1e-12 * (1.0 + ep.abs()));

            let perm = [2, 0, 1];
            let cl2 = cl.permuted(&perm).unwrap();
            let p2 = SimplexWeights::new(perm.iter().map(|&k| p[k]).collect()).unwrap();
            let e2 = weighted_expectation(&s, &cl2, &p2, f).unwrap();
            prop_assert!((e2 - ep).abs() <= 1e-12 * (1.0 + ep.abs()));
        }
    }
}
