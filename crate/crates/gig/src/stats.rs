//! Statistical machinery shared by the verification probes: KS tests,
//! distance covariance with permutation calibration, equal-count binning
//! with a flatness statistic, and a spacing-based entropy estimator.

use rand::Rng;

use crate::error::{GigError, Result};
use crate::seed::SeedPlan;

/// Outcome of a Kolmogorov–Smirnov test.
#[derive(Debug, Clone, Copy)]
pub struct KsTest {
    /// Supremum gap between the empirical and reference CDFs.
    pub statistic: f64,
    /// Asymptotic p-value (Kolmogorov tail with small-sample correction).
    pub p_value: f64,
    /// `n` for one-sample, `nm/(n+m)` for two-sample.
    pub n_effective: f64,
}

/// The 1% critical value of the one-sample KS statistic for large `n`.
pub fn ks_critical_1pct(n_effective: f64) -> f64 {
    1.63 / n_effective.sqrt()
}

/// Kolmogorov tail `Q(t) = 2 Σ_{k≥1} (-1)^{k-1} exp(-2 k² t²)`, switching to
/// the dual theta series below `t = 1.18` where the alternating form
/// converges too slowly.
fn kolmogorov_tail(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t < 1.18 {
        let factor = (2.0 * std::f64::consts::PI).sqrt() / t;
        let w = std::f64::consts::PI * std::f64::consts::PI / (8.0 * t * t);
        let mut cdf = 0.0;
        for k in 0u32..5 {
            let odd = (2 * k + 1) as f64;
            cdf += (-odd * odd * w).exp();
        }
        return (1.0 - factor * cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * t * t).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic p-value for a KS statistic, using the Stephens-corrected
/// effective argument `(√n + 0.12 + 0.11/√n) D`.
pub fn kolmogorov_p_value(statistic: f64, n_effective: f64) -> f64 {
    let root_n = n_effective.sqrt();
    kolmogorov_tail((root_n + 0.12 + 0.11 / root_n) * statistic)
}

/// KS statistic given the reference CDF already evaluated at the order
/// statistics (ascending).
pub fn ks_statistic_from_cdf(cdf_at_sorted: &[f64]) -> Result<f64> {
    let n = cdf_at_sorted.len();
    if n == 0 {
        return Err(GigError::Domain("KS test needs a nonempty sample".into()));
    }
    let n_f = n as f64;
    let mut d: f64 = 0.0;
    for (i, &u) in cdf_at_sorted.iter().enumerate() {
        if !(0.0..=1.0).contains(&u) {
            return Err(GigError::Domain(format!(
                "reference CDF value {u} outside [0, 1]"
            )));
        }
        d = d.max((i + 1) as f64 / n_f - u).max(u - i as f64 / n_f);
    }
    Ok(d)
}

/// One-sample KS test of `values` against the law whose CDF is `cdf`.
pub fn ks_one_sample<F>(values: &[f64], cdf: F) -> Result<KsTest>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let us = sorted.iter().map(|&x| cdf(x)).collect::<Result<Vec<_>>>()?;
    ks_from_sorted_cdf(&us)
}

/// One-sample KS test when the CDF values at the order statistics are
/// already available (e.g. from a batched CDF evaluation).
pub fn ks_from_sorted_cdf(cdf_at_sorted: &[f64]) -> Result<KsTest> {
    let statistic = ks_statistic_from_cdf(cdf_at_sorted)?;
    let n_effective = cdf_at_sorted.len() as f64;
    Ok(KsTest {
        statistic,
        p_value: kolmogorov_p_value(statistic, n_effective),
        n_effective,
    })
}

/// Two-sample KS test.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> Result<KsTest> {
    if xs.is_empty() || ys.is_empty() {
        return Err(GigError::Domain("KS test needs nonempty samples".into()));
    }
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let t = a[i].min(b[j]);
        while i < n && a[i] <= t {
            i += 1;
        }
        while j < m && b[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let n_effective = (n * m) as f64 / (n + m) as f64;
    Ok(KsTest {
        statistic: d,
        p_value: kolmogorov_p_value(d, n_effective),
        n_effective,
    })
}

/// Fenwick tree over ranks accumulating several running sums at once.
struct Fenwick {
    // Per node: count, Σx, Σy, Σxy.
    cells: Vec<[f64; 4]>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Self {
            cells: vec![[0.0; 4]; n + 1],
        }
    }

    /// Adds the point's contributions at 1-based `rank`.
    fn add(&mut self, rank: usize, x: f64, y: f64) {
        let mut i = rank;
        while i < self.cells.len() {
            let c = &mut self.cells[i];
            c[0] += 1.0;
            c[1] += x;
            c[2] += y;
            c[3] += x * y;
            i += i & i.wrapping_neg();
        }
    }

    /// Sums of the contributions over ranks `1..=rank`.
    fn prefix(&self, rank: usize) -> [f64; 4] {
        let mut acc = [0.0; 4];
        let mut i = rank;
        while i > 0 {
            for (slot, cell) in acc.iter_mut().zip(self.cells[i]) {
                *slot += cell;
            }
            i -= i & i.wrapping_neg();
        }
        acc
    }
}

/// Ranks of `values` (1-based, ties share the lower rank's order — any
/// consistent tie order works because tied pairs contribute zero).
fn dense_ranks(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0usize; values.len()];
    let mut rank = 0;
    for (pos, &idx) in order.iter().enumerate() {
        if pos == 0 || values[idx] > values[order[pos - 1]] {
            rank = pos + 1;
        }
        ranks[idx] = rank;
    }
    ranks
}

/// Row sums `Σ_j |x_i - x_j|` for all `i`, in O(n log n).
fn abs_distance_row_sums(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut prefix = 0.0;
    let mut sorted_prefix = vec![0.0; n + 1];
    for (k, &idx) in order.iter().enumerate() {
        prefix += values[idx];
        sorted_prefix[k + 1] = prefix;
    }
    let total = sorted_prefix[n];
    let mut sums = vec![0.0; n];
    for (k, &idx) in order.iter().enumerate() {
        let v = values[idx];
        let below = sorted_prefix[k];
        let above = total - sorted_prefix[k + 1];
        sums[idx] = (k as f64 * v - below) + (above - (n - k - 1) as f64 * v);
    }
    sums
}

/// `Σ_{i<j} |x_i - x_j| |y_i - y_j|` in O(n log n) via one Fenwick pass
/// over points sorted by `x`.
fn cross_distance_sum(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    let ranks = dense_ranks(ys);
    let max_rank = n;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let mut tree = Fenwick::new(max_rank);
    // Running totals over already-inserted points.
    let mut tot = [0.0f64; 4];
    let mut sum = 0.0;
    for &idx in &order {
        let (x, y) = (xs[idx], ys[idx]);
        let r = ranks[idx];
        // Points with y strictly below y_j (ties contribute zero either way).
        let lo = tree.prefix(r.saturating_sub(1));
        // Points with y at or below; the complement has y strictly above.
        let le = tree.prefix(r);
        let hi = [
            tot[0] - le[0],
            tot[1] - le[1],
            tot[2] - le[2],
            tot[3] - le[3],
        ];
        // i < j in x-order, so |x_j - x_i| = x - x_i up to ties (zero terms).
        // y_i < y: (x - x_i)(y - y_i) summed.
        sum += lo[0] * x * y - x * lo[2] - y * lo[1] + lo[3];
        // y_i > y: (x - x_i)(y_i - y) summed.
        sum += x * hi[2] - hi[0] * x * y + y * hi[1] - hi[3];
        tree.add(r, x, y);
        tot[0] += 1.0;
        tot[1] += x;
        tot[2] += y;
        tot[3] += x * y;
    }
    sum
}

/// Squared distance covariance (V-statistic) in O(n log n).
pub fn distance_covariance_sq(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let n = xs.len();
    if n != ys.len() {
        return Err(GigError::Domain(
            "distance covariance needs equal-length samples".into(),
        ));
    }
    if n < 2 {
        return Err(GigError::Domain(
            "distance covariance needs at least 2 points".into(),
        ));
    }
    let n_f = n as f64;
    let row_a = abs_distance_row_sums(xs);
    let row_b = abs_distance_row_sums(ys);
    let total_a: f64 = row_a.iter().sum();
    let total_b: f64 = row_b.iter().sum();
    let s1 = 2.0 * cross_distance_sum(xs, ys) / (n_f * n_f);
    let s2 = total_a * total_b / (n_f * n_f * n_f * n_f);
    let s3 = row_a
        .iter()
        .zip(&row_b)
        .map(|(&a, &b)| a * b)
        .sum::<f64>()
        / (n_f * n_f * n_f);
    Ok((s1 + s2 - 2.0 * s3).max(0.0))
}

/// Quadratic-time reference implementation of the same statistic, kept as
/// an oracle for the fast path.
pub fn distance_covariance_sq_naive(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let n = xs.len();
    if n != ys.len() || n < 2 {
        return Err(GigError::Domain(
            "distance covariance needs equal-length samples of size >= 2".into(),
        ));
    }
    let n_f = n as f64;
    let a: Vec<Vec<f64>> = xs
        .iter()
        .map(|&xi| xs.iter().map(|&xj| (xi - xj).abs()).collect())
        .collect();
    let b: Vec<Vec<f64>> = ys
        .iter()
        .map(|&yi| ys.iter().map(|&yj| (yi - yj).abs()).collect())
        .collect();
    let row_a: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    let row_b: Vec<f64> = b.iter().map(|r| r.iter().sum()).collect();
    let grand_a: f64 = row_a.iter().sum::<f64>() / (n_f * n_f);
    let grand_b: f64 = row_b.iter().sum::<f64>() / (n_f * n_f);
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let aij = a[i][j] - row_a[i] / n_f - row_a[j] / n_f + grand_a;
            let bij = b[i][j] - row_b[i] / n_f - row_b[j] / n_f + grand_b;
            acc += aij * bij;
        }
    }
    Ok((acc / (n_f * n_f)).max(0.0))
}

/// Result of a permutation test for independence.
#[derive(Debug, Clone, Copy)]
pub struct PermutationTest {
    /// Observed squared distance covariance.
    pub statistic: f64,
    /// `(1 + #{permuted >= observed}) / (1 + B)`.
    pub p_value: f64,
    pub n_permutations: usize,
}

/// Distance-covariance independence test with a permutation p-value.
///
/// Reshuffles `ys` against `xs` `n_permutations` times using RNG streams
/// derived from `plan`, so the verdict is a pure function of the inputs.
pub fn permutation_independence_test(
    xs: &[f64],
    ys: &[f64],
    n_permutations: usize,
    plan: &SeedPlan,
) -> Result<PermutationTest> {
    if n_permutations == 0 {
        return Err(GigError::Config(
            "permutation test needs at least one permutation".into(),
        ));
    }
    let observed = distance_covariance_sq(xs, ys)?;
    let mut extreme = 0usize;
    let mut shuffled = ys.to_vec();
    for k in 0..n_permutations {
        let mut rng = plan.replicate_rng(k as u64);
        // Fisher–Yates over the previous arrangement; any fixed scheme
        // yields exchangeable relabelings.
        for i in (1..shuffled.len()).rev() {
            let j = rng.gen_range(0..=i);
            shuffled.swap(i, j);
        }
        if distance_covariance_sq(xs, &shuffled)? >= observed {
            extreme += 1;
        }
    }
    Ok(PermutationTest {
        statistic: observed,
        p_value: (1.0 + extreme as f64) / (1.0 + n_permutations as f64),
        n_permutations,
    })
}

/// One bin of an equal-count conditional-mean table.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Bin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    /// Mean of the response within the bin.
    pub mean: f64,
    /// Standard error of that mean.
    pub se: f64,
    /// Mean of the conditioning variable within the bin.
    pub cond_mean: f64,
}

/// Default bin count for a sample of size `n`: `max(5, ⌊√n / 5⌋)`.
pub fn default_bin_count(n: usize) -> usize {
    ((n as f64).sqrt() / 5.0).floor().max(5.0) as usize
}

/// Splits pairs into `n_bins` equal-count bins along `cond` and reports
/// the response mean per bin. Errors when a bin would hold fewer than
/// `min_bin_count` points.
pub fn equal_count_bins(
    cond: &[f64],
    resp: &[f64],
    n_bins: usize,
    min_bin_count: usize,
) -> Result<Vec<Bin>> {
    if cond.len() != resp.len() {
        return Err(GigError::Domain(
            "conditioning and response sequences differ in length".into(),
        ));
    }
    let n = cond.len();
    if n_bins == 0 {
        return Err(GigError::Config("need at least one bin".into()));
    }
    if n < n_bins * min_bin_count {
        return Err(GigError::Config(format!(
            "{n} points cannot fill {n_bins} bins at >= {min_bin_count} each"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| cond[i].total_cmp(&cond[j]));
    let mut bins = Vec::with_capacity(n_bins);
    for k in 0..n_bins {
        let start = k * n / n_bins;
        let end = (k + 1) * n / n_bins;
        let members = &order[start..end];
        let count = members.len();
        if count < min_bin_count {
            return Err(GigError::Config(format!(
                "bin {k} holds {count} < {min_bin_count} points"
            )));
        }
        let mean = members.iter().map(|&i| resp[i]).sum::<f64>() / count as f64;
        let var = members
            .iter()
            .map(|&i| (resp[i] - mean) * (resp[i] - mean))
            .sum::<f64>()
            / (count.saturating_sub(1)).max(1) as f64;
        let cond_mean = members.iter().map(|&i| cond[i]).sum::<f64>() / count as f64;
        bins.push(Bin {
            lower: cond[members[0]],
            upper: cond[members[count - 1]],
            count,
            mean,
            se: (var / count as f64).sqrt(),
            cond_mean,
        });
    }
    Ok(bins)
}

/// Max standardized deviation of bin means from a known constant.
pub fn flatness_vs_constant(bins: &[Bin], constant: f64) -> f64 {
    bins.iter()
        .map(|b| if b.se > 0.0 { (b.mean - constant).abs() / b.se } else { f64::INFINITY })
        .fold(0.0, f64::max)
}

/// Max standardized deviation of bin means from their precision-weighted
/// grand mean — the flatness statistic for "E(resp | cond) is constant".
pub fn flatness_statistic(bins: &[Bin]) -> f64 {
    let mut weight_sum = 0.0;
    let mut weighted = 0.0;
    for b in bins {
        if b.se > 0.0 {
            let w = 1.0 / (b.se * b.se);
            weight_sum += w;
            weighted += w * b.mean;
        }
    }
    if weight_sum == 0.0 {
        return f64::INFINITY;
    }
    flatness_vs_constant(bins, weighted / weight_sum)
}

/// Vasicek `m`-spacing estimator of differential entropy:
/// `(1/n) Σ ln( n (x_(i+m) - x_(i-m)) / (2m) )` with edge clamping.
pub fn vasicek_entropy(values: &[f64], m: usize) -> Result<f64> {
    let n = values.len();
    if n < 4 || m == 0 || 2 * m >= n {
        return Err(GigError::Config(format!(
            "spacing estimator needs 0 < m < n/2, got m = {m}, n = {n}"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n_f = n as f64;
    let mut acc = 0.0;
    for i in 0..n {
        let hi = sorted[(i + m).min(n - 1)];
        let lo = sorted[i.saturating_sub(m)];
        let gap = hi - lo;
        if !(gap > 0.0) {
            return Err(GigError::Domain(
                "degenerate (tied) sample in spacing entropy estimator".into(),
            ));
        }
        acc += (n_f * gap / (2.0 * m as f64)).ln();
    }
    Ok(acc / n_f)
}

/// Spacing parameter `⌊√n + 0.5⌋` — the usual consistency-range default.
pub fn default_spacing(n: usize) -> usize {
    ((n as f64).sqrt() + 0.5).floor().max(1.0) as usize
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Upper `q`-quantile (type-7 interpolation) of a sample — used for
/// null-distribution thresholds.
pub fn sample_quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&q) {
        return Err(GigError::Domain(format!(
            "quantile of {} values at q = {q}",
            values.len()
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}
