//! Empirical verification probes: the Matsumoto–Yor transform and its
//! independence property, constant-regression checks, the sum-statistic
//! regression probe, entropy constraints, the Khatri statistic, and the
//! backward martingale.
//!
//! Probes never panic on characterization failures — a law that fails a
//! probe yields a `Fail` verdict, while malformed inputs yield errors.
//! Every probe is a pure function of its inputs and seed plan.

use rand_chacha::ChaCha8Rng;

use crate::dist;
use crate::error::{GigError, Result};
use crate::params::{Branch, GigParams};
use crate::report::{ProbeReport, Verdict};
use crate::sampling::{GigSampler, SampleBatch};
use crate::seed::{self, SeedPlan};
use crate::special::{self, BesselEvalConfig};
use crate::stats;

/// Default label-permutation budget for independence tests.
pub const DEFAULT_PERMUTATIONS: usize = 199;
/// Minimum observations per bin for conditional-mean tables.
pub const MIN_BIN_COUNT: usize = 50;
/// Bonferroni-style cap on standardized binwise deviations: a binned
/// conditional-mean probe passes when no bin deviates by more than this
/// many standard errors.
pub const FLATNESS_THRESHOLD: f64 = 4.0;

/// Transformed pairs `(U, V)` for the independence and regression probes.
#[derive(Debug, Clone)]
pub struct PairBatch {
    pub us: Vec<f64>,
    pub vs: Vec<f64>,
}

impl PairBatch {
    pub fn new(us: Vec<f64>, vs: Vec<f64>) -> Result<Self> {
        if us.len() != vs.len() {
            return Err(GigError::Domain(format!(
                "pair coordinates differ in length: {} vs {}",
                us.len(),
                vs.len()
            )));
        }
        if us.is_empty() {
            return Err(GigError::Domain("pair batch is empty".into()));
        }
        if us
            .iter()
            .chain(vs.iter())
            .any(|v| !(*v > 0.0) || !v.is_finite())
        {
            return Err(GigError::Domain(
                "pair batch entries must be positive and finite".into(),
            ));
        }
        Ok(Self { us, vs })
    }

    pub fn len(&self) -> usize {
        self.us.len()
    }

    pub fn is_empty(&self) -> bool {
        self.us.is_empty()
    }
}

/// `(U, V) = (1/(x+y), 1/x - 1/(x+y))`.
pub fn matsumoto_yor_transform(x: f64, y: f64) -> Result<(f64, f64)> {
    if !(x > 0.0) || !(y > 0.0) || !x.is_finite() || !y.is_finite() {
        return Err(GigError::Domain(format!(
            "transform needs x, y > 0, got x = {x}, y = {y}"
        )));
    }
    let u = 1.0 / (x + y);
    Ok((u, 1.0 / x - u))
}

/// Inverse of [`matsumoto_yor_transform`]: `(x, y) = (1/(u+v), 1/u - 1/(u+v))`.
pub fn matsumoto_yor_inverse(u: f64, v: f64) -> Result<(f64, f64)> {
    if !(u > 0.0) || !(v > 0.0) || !u.is_finite() || !v.is_finite() {
        return Err(GigError::Domain(format!(
            "inverse transform needs u, v > 0, got u = {u}, v = {v}"
        )));
    }
    let x = 1.0 / (u + v);
    Ok((x, 1.0 / u - x))
}

/// Applies the transform pairwise to two equal-length batches.
pub fn my_pair_batch(xs: &[f64], ys: &[f64]) -> Result<PairBatch> {
    if xs.len() != ys.len() {
        return Err(GigError::Domain(
            "x and y batches differ in length".into(),
        ));
    }
    let mut us = Vec::with_capacity(xs.len());
    let mut vs = Vec::with_capacity(xs.len());
    for (&x, &y) in xs.iter().zip(ys) {
        let (u, v) = matsumoto_yor_transform(x, y)?;
        us.push(u);
        vs.push(v);
    }
    PairBatch::new(us, vs)
}

fn is_constant(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[0] == w[1])
}

/// Sentinel plan stamped into reports of deterministic (seed-free) probes.
fn unused_plan() -> SeedPlan {
    SeedPlan::new(0, 0)
}

/// Distance-covariance independence test with a permutation p-value.
///
/// Null-calibrated by construction (permutation); passes when the p-value
/// exceeds 1%.
pub fn independence_test(
    pairs: &PairBatch,
    n_permutations: usize,
    plan: &SeedPlan,
) -> Result<ProbeReport> {
    if pairs.len() < 100 {
        return Err(GigError::Domain(format!(
            "independence test needs at least 100 pairs, got {}",
            pairs.len()
        )));
    }
    if n_permutations == 0 {
        return Err(GigError::Config(
            "independence test needs a positive permutation budget".into(),
        ));
    }
    if n_permutations < 99 {
        return Err(GigError::Config(format!(
            "need at least 99 permutations for a stable p-value, got {n_permutations}"
        )));
    }
    let mut report = ProbeReport::new(
        "independence",
        format!("pairs(n = {})", pairs.len()),
        *plan,
    );
    if is_constant(&pairs.us) || is_constant(&pairs.vs) {
        report.verdict = Verdict::Degenerate;
        report.note("degenerate input: a coordinate is constant");
        return Ok(report);
    }
    let test = stats::permutation_independence_test(&pairs.us, &pairs.vs, n_permutations, plan)?;
    report.stat("dcov_sq", test.statistic);
    report.stat("n_pairs", pairs.len() as f64);
    report.stat("n_permutations", n_permutations as f64);
    report.stat("alpha", 0.01);
    report.set_p_value(test.p_value)?;
    report.verdict = if test.p_value > 0.01 {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(report)
}

/// Which function of `V` a regression probe conditions on `U`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VTransform {
    /// `V` itself.
    V,
    /// `1/V`.
    ReciprocalV,
    /// `V^r` for integer `r`.
    Power(i32),
}

impl VTransform {
    fn apply(&self, v: f64) -> f64 {
        match self {
            VTransform::V => v,
            VTransform::ReciprocalV => 1.0 / v,
            VTransform::Power(r) => v.powi(*r),
        }
    }

    fn label(&self) -> String {
        match self {
            VTransform::V => "V".into(),
            VTransform::ReciprocalV => "1/V".into(),
            VTransform::Power(r) => format!("V^{r}"),
        }
    }
}

/// Binwise conditional means of a transform of `V` given `U`, the flatness
/// statistic, and the constant-regression parameter recovery
/// `p̂ = cd/(cd-1)`, `b̂ = 2d/(cd-1)` from the estimated constants
/// `c = E(V|U)` and `d = E(1/V|U)`.
///
/// The source theorem works with `Y ~ Γ(p, rate b)`; our pair batches come
/// from `Γ(p, rate b/2)` conventions, so the recovered `b` is doubled to
/// land in the same `GIG(p, a, b)` coordinates as the generating law (the
/// adapter is pinned by the `E(V|U) = 2p/b` constant).
pub fn regression_probe(
    pairs: &PairBatch,
    transform: VTransform,
    n_bins: usize,
) -> Result<ProbeReport> {
    let mut report = ProbeReport::new(
        "regression",
        format!("pairs(n = {}), transform = {}", pairs.len(), transform.label()),
        unused_plan(),
    );
    report.note("deterministic probe; seed plan unused");
    if is_constant(&pairs.us) || is_constant(&pairs.vs) {
        report.verdict = Verdict::Degenerate;
        report.note("degenerate input: a coordinate is constant");
        return Ok(report);
    }
    let resp: Vec<f64> = pairs.vs.iter().map(|&v| transform.apply(v)).collect();
    let bins = stats::equal_count_bins(&pairs.us, &resp, n_bins, MIN_BIN_COUNT)?;
    let flatness = stats::flatness_statistic(&bins);
    let (c_hat, c_se) = stats::mean_and_se(&pairs.vs);
    let inv: Vec<f64> = pairs.vs.iter().map(|&v| 1.0 / v).collect();
    let (d_hat, d_se) = stats::mean_and_se(&inv);
    let cd = c_hat * d_hat;
    report.stat("flatness", flatness);
    report.stat("flatness_threshold", FLATNESS_THRESHOLD);
    report.stat("c_hat", c_hat);
    report.stat("c_se", c_se);
    report.stat("d_hat", d_hat);
    report.stat("d_se", d_se);
    report.stat("cd", cd);
    let recovered = cd > 1.0;
    if recovered {
        report.stat("p_hat", cd / (cd - 1.0));
        report.stat("b_hat", 2.0 * d_hat / (cd - 1.0));
    } else {
        report.note("characterization failure: empirical cd <= 1, no admissible (p, b)");
    }
    report.bin_table = Some(bins);
    report.verdict = if flatness <= FLATNESS_THRESHOLD && recovered {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(report)
}

/// Binwise ratios `E(V^{r+1}|U) / E(V^r|U)` and the one order up, plus the
/// parameter recovery `p̂ = c_r/(c_{r+1} - c_r) - r`, `b̂ = 2/(c_{r+1} - c_r)`
/// (same rate-convention adapter as [`regression_probe`]).
pub fn chou_huang_probe(pairs: &PairBatch, r: i32, n_bins: usize) -> Result<ProbeReport> {
    let mut report = ProbeReport::new(
        "chou-huang",
        format!("pairs(n = {}), r = {r}", pairs.len()),
        unused_plan(),
    );
    report.note("deterministic probe; seed plan unused");
    if is_constant(&pairs.us) || is_constant(&pairs.vs) {
        report.verdict = Verdict::Degenerate;
        report.note("degenerate input: a coordinate is constant");
        return Ok(report);
    }
    // Tail diagnostic for the required moment E(V^{r+2}): flag when the top
    // percentile carries most of the empirical moment mass.
    let mut top = pairs.vs.clone();
    top.sort_by(f64::total_cmp);
    let power = |v: f64, k: i32| v.powi(k);
    let total: f64 = top.iter().map(|&v| power(v, r + 2)).sum();
    let tail_count = (top.len() / 100).max(1);
    let tail: f64 = top[top.len() - tail_count..]
        .iter()
        .map(|&v| power(v, r + 2))
        .sum();
    if total > 0.0 && tail / total > 0.5 {
        report.note(format!(
            "tail diagnostic: top 1% of V carries {:.0}% of the V^{} mass; required moments may diverge",
            100.0 * tail / total,
            r + 2
        ));
    }

    let ratio_bins = |num_order: i32, den_order: i32| -> Result<Vec<stats::Bin>> {
        // Per-bin ratio of means with a delta-method standard error.
        let numer: Vec<f64> = pairs.vs.iter().map(|&v| power(v, num_order)).collect();
        let denom: Vec<f64> = pairs.vs.iter().map(|&v| power(v, den_order)).collect();
        let nb = stats::equal_count_bins(&pairs.us, &numer, n_bins, MIN_BIN_COUNT)?;
        let db = stats::equal_count_bins(&pairs.us, &denom, n_bins, MIN_BIN_COUNT)?;
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.sort_by(|&i, &j| pairs.us[i].total_cmp(&pairs.us[j]));
        let mut out = Vec::with_capacity(n_bins);
        let mut start = 0usize;
        for (nbin, dbin) in nb.iter().zip(&db) {
            let members = &order[start..start + nbin.count];
            start += nbin.count;
            let ratio = nbin.mean / dbin.mean;
            // Var(A̅/B̅) ≈ Var(A - ratio·B) / (m·B̅²).
            let m = members.len() as f64;
            let var = members
                .iter()
                .map(|&i| {
                    let a = numer[i] - nbin.mean;
                    let b = denom[i] - dbin.mean;
                    let resid = a - ratio * b;
                    resid * resid
                })
                .sum::<f64>()
                / (m - 1.0).max(1.0);
            out.push(stats::Bin {
                lower: nbin.lower,
                upper: nbin.upper,
                count: nbin.count,
                mean: ratio,
                se: (var / m).sqrt() / dbin.mean.abs(),
                cond_mean: nbin.cond_mean,
            });
        }
        Ok(out)
    };

    let bins_r = ratio_bins(r + 1, r)?;
    let bins_r1 = ratio_bins(r + 2, r + 1)?;
    let constancy = stats::flatness_statistic(&bins_r).max(stats::flatness_statistic(&bins_r1));

    let global_ratio = |num_order: i32, den_order: i32| -> f64 {
        let num: f64 = pairs.vs.iter().map(|&v| power(v, num_order)).sum();
        let den: f64 = pairs.vs.iter().map(|&v| power(v, den_order)).sum();
        num / den
    };
    let c_r = global_ratio(r + 1, r);
    let c_r1 = global_ratio(r + 2, r + 1);
    report.stat("constancy", constancy);
    report.stat("flatness_threshold", FLATNESS_THRESHOLD);
    report.stat("c_r", c_r);
    report.stat("c_r_plus_1", c_r1);
    let admissible = c_r1 > c_r && c_r > 0.0;
    if admissible {
        let gap = c_r1 - c_r;
        report.stat("p_hat", c_r / gap - f64::from(r));
        report.stat("b_hat", 2.0 / gap);
    } else {
        report.note("characterization failure: need c_{r+1} > c_r > 0");
    }
    report.bin_table = Some(bins_r);
    report.verdict = if constancy <= FLATNESS_THRESHOLD && admissible {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(report)
}

/// How the sum-statistic theorem's overloaded symbol `p` is read when
/// deriving coefficients from a generating law.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PuszReading {
    /// The GIG index is `μ`; coefficients are `p = δ(μ-1)`, `q = δb/2`.
    /// Confirmed by brute-force simulation: these coefficients make
    /// `E(S|Λ)` constant with `c = δn(nμ-1)`.
    IndexIsMu,
    /// The literal reading that the GIG index equals the coefficient `p`.
    /// Rejected by the same simulation — kept so the falsification is
    /// reproducible.
    IndexIsPCoef,
}

/// Coefficients `(p, q)` of the sum statistic and the predicted regression
/// constant `c` for data from `params` arranged in `n_columns` columns.
pub fn pusz_coefficients(
    params: &GigParams,
    delta: f64,
    n_columns: usize,
    reading: PuszReading,
) -> Result<(f64, f64, f64)> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(GigError::Domain(format!("need delta > 0, got {delta}")));
    }
    if params.branch() != Branch::Full {
        return Err(GigError::InvalidParams(
            "sum-statistic coefficients need the full branch (a, b > 0)".into(),
        ));
    }
    let n = n_columns as f64;
    let q_coef = 0.5 * delta * params.b();
    match reading {
        PuszReading::IndexIsMu => {
            let mu = params.p();
            Ok((delta * (mu - 1.0), q_coef, delta * n * (n * mu - 1.0)))
        }
        PuszReading::IndexIsPCoef => {
            let p_coef = params.p();
            let mu = p_coef / delta + 1.0;
            Ok((p_coef, q_coef, delta * n * (n * mu - 1.0)))
        }
    }
}

/// Constant-regression probe for the sum statistic
/// `S = Λ(p Σ 1/X_i + q Σ 1/X_i²) - nq Σ 1/X_i` on `Λ = Σ X_i`.
///
/// Each row of `samples` is one i.i.d. sample `X_1..X_n`.
pub fn pusz_probe(
    samples: &[Vec<f64>],
    p_coef: f64,
    q_coef: f64,
    n_bins: usize,
) -> Result<ProbeReport> {
    if samples.is_empty() {
        return Err(GigError::Domain("no sample rows".into()));
    }
    let n_columns = samples[0].len();
    if n_columns < 2 {
        return Err(GigError::Domain(format!(
            "need at least 2 columns, got {n_columns}"
        )));
    }
    if !(q_coef > 0.0) || !q_coef.is_finite() || !p_coef.is_finite() {
        return Err(GigError::Domain(format!(
            "need finite p and q > 0, got p = {p_coef}, q = {q_coef}"
        )));
    }
    let mut inv1_sum = 0.0;
    let mut inv2_sum = 0.0;
    let mut count = 0usize;
    for row in samples {
        if row.len() != n_columns {
            return Err(GigError::Domain("ragged sample rows".into()));
        }
        for &x in row {
            if !(x > 0.0) || !x.is_finite() {
                return Err(GigError::Domain(format!(
                    "sample entries must be positive and finite, got {x}"
                )));
            }
            inv1_sum += 1.0 / x;
            inv2_sum += 1.0 / (x * x);
            count += 1;
        }
    }
    // Empirical version of the theorem's positivity precondition.
    let drift = p_coef * inv1_sum / count as f64 + q_coef * inv2_sum / count as f64;
    if !(drift > 0.0) {
        return Err(GigError::Domain(format!(
            "precondition p·E(1/X) + q·E(1/X²) > 0 fails empirically ({drift})"
        )));
    }

    let mut report = ProbeReport::new(
        "pusz",
        format!(
            "rows = {}, columns = {n_columns}, p = {p_coef}, q = {q_coef}",
            samples.len()
        ),
        unused_plan(),
    );
    report.note("deterministic probe; seed plan unused");

    let n = n_columns as f64;
    let mut lambdas = Vec::with_capacity(samples.len());
    let mut statistics = Vec::with_capacity(samples.len());
    for row in samples {
        let lambda: f64 = row.iter().sum();
        let inv1: f64 = row.iter().map(|&x| 1.0 / x).sum();
        let inv2: f64 = row.iter().map(|&x| 1.0 / (x * x)).sum();
        lambdas.push(lambda);
        statistics.push(lambda * (p_coef * inv1 + q_coef * inv2) - n * q_coef * inv1);
    }
    if is_constant(&lambdas) {
        report.verdict = Verdict::Degenerate;
        report.note("degenerate input: constant sums");
        return Ok(report);
    }
    let bins = stats::equal_count_bins(&lambdas, &statistics, n_bins, MIN_BIN_COUNT)?;
    let flatness = stats::flatness_statistic(&bins);
    // Precision-weighted constant estimate, matching the flatness referent.
    let mut w_sum = 0.0;
    let mut c_hat = 0.0;
    for b in &bins {
        if b.se > 0.0 {
            let w = 1.0 / (b.se * b.se);
            w_sum += w;
            c_hat += w * b.mean;
        }
    }
    c_hat /= w_sum;
    report.stat("n_columns", n);
    report.stat("p_coef", p_coef);
    report.stat("q_coef", q_coef);
    report.stat("c_hat", c_hat);
    report.stat("flatness", flatness);
    report.stat("flatness_threshold", FLATNESS_THRESHOLD);
    report.bin_table = Some(bins);
    report.verdict = if flatness <= FLATNESS_THRESHOLD {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(report)
}

/// Checks the two maximum-entropy constraint functionals
/// `E[log(X/η)] = ∂_p log K_p(θ)` and
/// `E[X/η + η/X] = (K_{p+1}(θ) + K_{p-1}(θ)) / K_p(θ)` on a batch.
///
/// At `p = -1/2` the second target is also evaluated through the closed
/// form `2 + 1/√(ab)`, and the two routes are reported side by side.
pub fn entropy_constraint_check(params: &GigParams, batch: &SampleBatch) -> Result<ProbeReport> {
    if params.branch() != Branch::Full {
        return Err(GigError::InvalidParams(
            "entropy constraints need the full branch (a, b > 0)".into(),
        ));
    }
    let p = params.p();
    let theta = params.theta();
    let eta = params.eta();
    let cfg = BesselEvalConfig::default();
    let target_log = special::bessel_k_dlog_dorder(p, theta, &cfg)?;
    let target_sum = special::bessel_k_ratio(p, theta)? + special::bessel_k_ratio(-p, theta)?;

    let logs: Vec<f64> = batch.values.iter().map(|&x| (x / eta).ln()).collect();
    let sums: Vec<f64> = batch.values.iter().map(|&x| x / eta + eta / x).collect();
    let (log_mean, log_se) = stats::mean_and_se(&logs);
    let (sum_mean, sum_se) = stats::mean_and_se(&sums);

    let mut report = ProbeReport::new(
        "entropy",
        format!("{params}, n = {}", batch.len()),
        batch.seed_plan,
    );
    if is_constant(&batch.values) {
        report.verdict = Verdict::Degenerate;
        report.note("degenerate input: constant batch");
        return Ok(report);
    }
    let z_log = (log_mean - target_log) / log_se;
    let z_sum = (sum_mean - target_sum) / sum_se;
    report.stat("log_constraint_target", target_log);
    report.stat("log_constraint_mean", log_mean);
    report.stat("log_constraint_se", log_se);
    report.stat("log_constraint_z", z_log);
    report.stat("sum_constraint_target", target_sum);
    report.stat("sum_constraint_mean", sum_mean);
    report.stat("sum_constraint_se", sum_se);
    report.stat("sum_constraint_z", z_sum);
    if (p + 0.5).abs() < 1e-12 {
        let closed_form = 2.0 + 1.0 / theta;
        report.stat("ig_closed_form_target", closed_form);
        report.stat(
            "ig_closed_form_vs_bessel_gap",
            (closed_form - target_sum).abs(),
        );
        report.note("p = -1/2: second target cross-checked against 2 + 1/sqrt(ab)");
    }
    report.verdict = if z_log.abs() <= FLATNESS_THRESHOLD && z_sum.abs() <= FLATNESS_THRESHOLD {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(report)
}

/// Checks the transformed maximum-entropy constraints for `Y = 1/√X`:
/// `E(Y^{-2}) = √(b/a)` and `E(Y²) = √(a/b) + 1/b`, and compares a spacing
/// entropy estimate of `Y` against the entropy of the reference maximizer
/// (`X ~ GIG(-1/2, a, b)`).
pub fn mudholkar_tian_check(batch: &SampleBatch, a: f64, b: f64) -> Result<ProbeReport> {
    if !(a > 0.0) || !(b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(GigError::Domain(format!(
            "need a, b > 0, got a = {a}, b = {b}"
        )));
    }
    let mut report = ProbeReport::new(
        "mudholkar-tian",
        format!("n = {}, a = {a}, b = {b}", batch.len()),
        batch.seed_plan,
    );
    if is_constant(&batch.values) {
        report.verdict = Verdict::Degenerate;
        report.note("degenerate input: constant batch");
        return Ok(report);
    }
    let ys: Vec<f64> = batch.values.iter().map(|&x| 1.0 / x.sqrt()).collect();
    // E(Y^{-2}) = E(X) and E(Y^2) = E(1/X).
    let target_inv_sq = (b / a).sqrt();
    let target_sq = (a / b).sqrt() + 1.0 / b;
    let (mean_x, se_x) = stats::mean_and_se(&batch.values);
    let inv: Vec<f64> = batch.values.iter().map(|&x| 1.0 / x).collect();
    let (mean_inv, se_inv) = stats::mean_and_se(&inv);
    let z1 = (mean_x - target_inv_sq) / se_x;
    let z2 = (mean_inv - target_sq) / se_inv;
    report.stat("y_inv_sq_target", target_inv_sq);
    report.stat("y_inv_sq_mean", mean_x);
    report.stat("y_inv_sq_z", z1);
    report.stat("y_sq_target", target_sq);
    report.stat("y_sq_mean", mean_inv);
    report.stat("y_sq_z", z2);

    // Entropy side: the maximizer under these constraints is Y = 1/sqrt(X)
    // with X ~ GIG(-1/2, a, b); H(Y) = H(X) - ln 2 - (3/2) E[ln X].
    let reference = GigParams::new(-0.5, a, b)?;
    let h_reference = dist::entropy(&reference)?
        - std::f64::consts::LN_2
        - 1.5 * dist::log_moment(&reference)?;
    let m = stats::default_spacing(ys.len());
    let h_estimate = stats::vasicek_entropy(&ys, m)?;
    let entropy_gap = h_estimate - h_reference;
    report.stat("entropy_estimate", h_estimate);
    report.stat("entropy_reference", h_reference);
    report.stat("entropy_gap", entropy_gap);
    // The reference attains the maximum: estimates may fall below but not
    // meaningfully above (0.05 covers estimator bias + Monte Carlo error).
    let entropy_ok = entropy_gap <= 0.05;
    report.verdict = if z1.abs() <= FLATNESS_THRESHOLD
        && z2.abs() <= FLATNESS_THRESHOLD
        && entropy_ok
    {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(report)
}

/// The per-replicate summary pair `(X̄, X̄₋₁ - 1/X̄)` with the second
/// coordinate clamped at zero (Jensen guarantees nonnegativity; only
/// floating error on near-constant samples can undershoot). Returns the
/// pairs and the clamp count.
pub fn khatri_pairs(samples: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    let mut means = Vec::with_capacity(samples.len());
    let mut spreads = Vec::with_capacity(samples.len());
    let mut clamped = 0usize;
    for row in samples {
        if row.len() < 2 {
            return Err(GigError::Domain(
                "each pseudo-sample needs at least 2 observations".into(),
            ));
        }
        if row.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(GigError::Domain(
                "pseudo-sample entries must be positive and finite".into(),
            ));
        }
        let n = row.len() as f64;
        let mean = row.iter().sum::<f64>() / n;
        let inv_mean = row.iter().map(|&x| 1.0 / x).sum::<f64>() / n;
        let mut spread = inv_mean - 1.0 / mean;
        if spread < 0.0 {
            spread = 0.0;
            clamped += 1;
        }
        means.push(mean);
        spreads.push(spread);
    }
    Ok((means, spreads, clamped))
}

/// Independence probe for `(X̄, X̄₋₁ - 1/X̄)` over seeded replicates of
/// `params`; the pair is independent exactly for the IG member.
pub fn khatri_probe(
    n_per_sample: usize,
    replicates: u64,
    params: &GigParams,
    plan: &SeedPlan,
) -> Result<ProbeReport> {
    if n_per_sample < 2 {
        return Err(GigError::Config(format!(
            "need n_per_sample >= 2, got {n_per_sample}"
        )));
    }
    if replicates < 100 {
        return Err(GigError::Config(format!(
            "need at least 100 replicates for an independence test, got {replicates}"
        )));
    }
    let sampler = GigSampler::new(*params)?;
    let rows: Vec<Vec<f64>> = seed::collect_replicates(&plan.child(1), replicates, None, |_, rng| {
        (0..n_per_sample).map(|_| sampler.sample(rng)).collect()
    });
    let (means, spreads, clamped) = khatri_pairs(&rows)?;
    let mut report = ProbeReport::new(
        "khatri",
        format!("{params}, n_per_sample = {n_per_sample}, replicates = {replicates}"),
        *plan,
    );
    if clamped > 0 {
        report.note(format!(
            "{clamped} second coordinates clamped at 0 (floating error on near-constant samples)"
        ));
    }
    if is_constant(&means) || is_constant(&spreads) {
        report.verdict = Verdict::Degenerate;
        report.note("degenerate pairs: a coordinate is constant");
        return Ok(report);
    }
    let test = stats::permutation_independence_test(
        &means,
        &spreads,
        DEFAULT_PERMUTATIONS,
        &plan.child(2),
    )?;
    report.stat("dcov_sq", test.statistic);
    report.stat("n_pairs", replicates as f64);
    report.stat("n_permutations", DEFAULT_PERMUTATIONS as f64);
    report.stat("clamped", clamped as f64);
    report.stat("alpha", 0.01);
    report.set_p_value(test.p_value)?;
    report.verdict = if test.p_value > 0.01 {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(report)
}

/// Backward-martingale probe with a custom positive-variate source; see
/// [`martingale_probe`] for the IG-data entry point.
///
/// Simulates `S_n` and `S_{n+1}` from `n + 1` i.i.d. draws, forms
/// `M_n = n/S_n - 1/(2b'n)`, and checks binwise on `S_{n+1}` that the mean
/// of `M_n` matches `M_{n+1} = (n+1)/S_{n+1} - 1/(2b'(n+1))`.
///
/// The source theorem's `b'` lives in the unhalved-exponent convention;
/// in our `GIG(-1/2, a, b)` coordinates `b' = b/2`, so the correction is
/// `1/(2b'n) = 1/(bn)`. This is fixed by the conditional expectation
/// `E[n/S_n | S_{n+1} = s] = (n+1)/s + 1/(b n (n+1))`, which follows from
/// `S_n | S_{n+1}` having a Bessel-`K_{1/2}` kernel, and telescopes only
/// against `β_n = 1/(bn)`.
pub fn martingale_probe_with_draws<F>(
    b: f64,
    n: u64,
    replicates: u64,
    n_bins: usize,
    plan: &SeedPlan,
    params_tag: &str,
    draw: F,
) -> Result<ProbeReport>
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync + Send,
{
    if !(b > 0.0) || !b.is_finite() {
        return Err(GigError::Domain(format!("need b > 0, got {b}")));
    }
    if n == 0 {
        return Err(GigError::Config("need n >= 1".into()));
    }
    if replicates < 10_000 {
        return Err(GigError::Config(format!(
            "need at least 10^4 replicates, got {replicates}"
        )));
    }
    let n_f = n as f64;
    let pairs: Vec<(f64, f64)> = seed::collect_replicates(plan, replicates, None, |_, rng| {
        let mut s_n = 0.0;
        for _ in 0..n {
            s_n += draw(rng);
        }
        let s_next = s_n + draw(rng);
        (s_n, s_next)
    });
    let diffs: Vec<f64> = pairs
        .iter()
        .map(|&(s_n, s_next)| {
            let m_n = n_f / s_n - 1.0 / (b * n_f);
            let m_next = (n_f + 1.0) / s_next - 1.0 / (b * (n_f + 1.0));
            m_n - m_next
        })
        .collect();
    let conditioners: Vec<f64> = pairs.iter().map(|&(_, s_next)| s_next).collect();
    let mut report = ProbeReport::new(
        "martingale",
        format!("{params_tag}, n = {n}, replicates = {replicates}"),
        *plan,
    );
    let bins = stats::equal_count_bins(&conditioners, &diffs, n_bins, MIN_BIN_COUNT)?;
    let flatness = stats::flatness_vs_constant(&bins, 0.0);
    report.stat("max_binwise_z", flatness);
    report.stat("flatness_threshold", FLATNESS_THRESHOLD);
    report.stat("n", n_f);
    report.bin_table = Some(bins);
    report.verdict = if flatness <= FLATNESS_THRESHOLD {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(report)
}

/// Backward-martingale probe on i.i.d. `IG(a, b) = GIG(-1/2, a, b)` data.
/// Note the argument order `(b, a)`: `b` is the parameter entering `M_n`.
pub fn martingale_probe(
    b: f64,
    a: f64,
    n: u64,
    replicates: u64,
    n_bins: usize,
    plan: &SeedPlan,
) -> Result<ProbeReport> {
    let params = GigParams::new(-0.5, a, b)?;
    let sampler = GigSampler::new(params)?;
    martingale_probe_with_draws(b, n, replicates, n_bins, plan, &params.to_string(), move |rng| {
        sampler.sample(rng)
    })
}
