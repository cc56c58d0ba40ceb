//! Log-domain helpers shared by the density, descent and oracle code.

/// Streaming `ln Σ exp(v)`; `-inf` terms are skipped and an empty or all `-inf`
/// input yields `-inf`. Summation order follows the iterator.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for v in values {
        if v == f64::NEG_INFINITY {
            continue;
        }
        if v > max {
            sum = sum * (max - v).exp() + 1.0;
            max = v;
        } else {
            sum += (v - max).exp();
        }
    }
    if max == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        max + sum.ln()
    }
}

/// `ln Σ exp(v)` that depends only on the multiset of values: terms are
/// sorted in decreasing order before accumulation. Reorders `values`.
pub fn log_sum_exp_sorted(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(|a, b| b.total_cmp(a));
    let max = match values.first() {
        Some(&m) if m != f64::NEG_INFINITY => m,
        _ => return f64::NEG_INFINITY,
    };
    if max.is_nan() || max == f64::INFINITY {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Sum that does not depend on the order of `values` (sorted ascending first).
pub fn sum_sorted(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    values.iter().sum()
}

/// `exp(-w_k) / Σ_l exp(-w_l)` with max-subtraction.
pub fn softmax_neg(w: &[f64]) -> Vec<f64> {
    let lowest = w.iter().copied().fold(f64::INFINITY, f64::min);
    let mut out: Vec<f64> = w.iter().map(|&x| (lowest - x).exp()).collect();
    let total = sum_sorted(&mut out.clone());
    out.iter_mut().for_each(|x| *x /= total);
    out
}

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    if sum.is_finite() {
        sum + carry
    } else {
        // infinities poison the carry with NaN
        sum
    }
}

#[cfg(test)]
#[test]
fn compensated_sum_keeps_infinities() {
    assert_eq!(compensated_sum([1.0, f64::NEG_INFINITY, 2.0]), f64::NEG_INFINITY);
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance (divisor `n - 1`).
pub fn sample_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (values.len() as f64 - 1.0)
}

/// `ln φ(x)` for the standard normal density.
#[inline]
pub fn ln_std_normal(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lse_matches_naive_sum() {
        let v = [0.1, -2.0, 3.5, 1.25];
        let naive = v.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert_abs_diff_eq!(log_sum_exp(v), naive, epsilon = 1e-14);
    }

    #[test]
    fn lse_survives_underflow() {
        let v = [-2000.0, -2000.0];
        assert_abs_diff_eq!(log_sum_exp(v), -2000.0 + 2f64.ln(), epsilon = 1e-12);
        assert_eq!(log_sum_exp([f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp([]), f64::NEG_INFINITY);
    }

    #[test]
    fn sorted_reductions_ignore_order() {
        let mut a = [0.3, -1.0, 2.5, 1e-3, -7.0];
        let mut b = [2.5, 1e-3, -7.0, 0.3, -1.0];
        assert_eq!(log_sum_exp_sorted(&mut a).to_bits(), log_sum_exp_sorted(&mut b).to_bits());
        assert_eq!(sum_sorted(&mut a).to_bits(), sum_sorted(&mut b).to_bits());
        assert_eq!(log_sum_exp_sorted(&mut [f64::NEG_INFINITY; 2]), f64::NEG_INFINITY);
    }

    #[test]
    fn softmax_is_shift_invariant() {
        let a = softmax_neg(&[0.0, 3f64.ln()]);
        assert_abs_diff_eq!(a[0], 0.75, epsilon = 1e-15);
        let b = softmax_neg(&[500.0, 500.0 + 3f64.ln()]);
        assert_abs_diff_eq!(a[0], b[0], epsilon = 1e-13);
    }
}
