//! Order-fixed floating point reductions.
//!
//! Parallel stages always materialize per-item values in index order and
//! then reduce here, so results never depend on the worker count.

/// Neumaier-compensated sum in slice order.
pub fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

const PAIRWISE_BLOCK: usize = 128;

/// Pairwise (cascade) sum with compensated leaves. Deterministic for a given
/// slice regardless of how the slice was produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_BLOCK {
        return compensated_sum(values);
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Σ w_i f_i in fixed order.
pub fn weighted_sum(weights: &[f64], values: &[f64]) -> f64 {
    debug_assert_eq!(weights.len(), values.len());
    let prods: Vec<f64> = weights.iter().zip(values).map(|(w, v)| w * v).collect();
    pairwise_sum(&prods)
}

/// log Σ exp(x_i), stabilized by the maximum.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let shifted: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    max + pairwise_sum(&shifted).ln()
}

/// Median of a non-empty slice (mean of the two middle values for even length).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Ordinary least squares fit y = slope * x + intercept. Returns
/// (slope, intercept, slope standard error).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = compensated_sum(xs) / n;
    let my = compensated_sum(ys) / n;
    let sxx: Vec<f64> = xs.iter().map(|x| (x - mx) * (x - mx)).collect();
    let sxy: Vec<f64> = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .collect();
    let sxx = compensated_sum(&sxx);
    let slope = compensated_sum(&sxy) / sxx;
    let intercept = my - slope * mx;
    let stderr = if xs.len() > 2 {
        let res: Vec<f64> = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| {
                let r = y - (slope * x + intercept);
                r * r
            })
            .collect();
        (compensated_sum(&res) / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, intercept, stderr)
}
