//! Exact Gamma and GIG variate generation plus the continued-fraction
//! Markov chain whose stationary law is `GIG(-p, a, b)`.
//!
//! The GIG sampler is rejection-based (ratio of uniforms around the mode of
//! the standardized law), so samples are exact for every parameter set —
//! there is no asymptotic approximation anywhere in this module.

use rand::Rng;

use crate::error::{GigError, Result};
use crate::params::{Branch, GammaParams, GigParams};
use crate::seed::{self, SeedPlan};

/// Standard normal variate by the polar method.
pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.gen_range(-1.0..1.0);
        let v: f64 = rng.gen_range(-1.0..1.0);
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            return u * (-2.0 * s.ln() / s).sqrt();
        }
    }
}

/// Uniform on `(0, 1]` — strictly positive so logs and powers stay finite.
fn positive_uniform<R: Rng>(rng: &mut R) -> f64 {
    1.0 - rng.gen::<f64>()
}

/// Marsaglia–Tsang rejection sampler for Gamma(shape, rate); shapes below 1
/// are boosted through the `U^{1/shape}` trick.
#[derive(Debug, Clone, Copy)]
pub struct GammaSampler {
    params: GammaParams,
    d: f64,
    c: f64,
    /// `Some(1/shape)` when the boost is needed.
    boost: Option<f64>,
}

impl GammaSampler {
    pub fn new(params: GammaParams) -> Self {
        let shape = params.shape();
        let (effective, boost) = if shape < 1.0 {
            (shape + 1.0, Some(1.0 / shape))
        } else {
            (shape, None)
        };
        let d = effective - 1.0 / 3.0;
        Self {
            params,
            d,
            c: 1.0 / (9.0 * d).sqrt(),
            boost,
        }
    }

    pub fn params(&self) -> GammaParams {
        self.params
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        loop {
            let x = standard_normal(rng);
            let t = 1.0 + self.c * x;
            if t <= 0.0 {
                continue;
            }
            let v = t * t * t;
            let u = positive_uniform(rng);
            let x2 = x * x;
            // Squeeze step, then the exact log acceptance test.
            if u < 1.0 - 0.0331 * x2 * x2
                || u.ln() < 0.5 * x2 + self.d * (1.0 - v + v.ln())
            {
                let mut g = self.d * v / self.params.rate();
                if let Some(inv_shape) = self.boost {
                    g *= positive_uniform(rng).powf(inv_shape);
                }
                if g > 0.0 && g.is_finite() {
                    return g;
                }
                // Subnormal underflow at tiny shapes: redraw.
            }
        }
    }
}

/// Precomputed ratio-of-uniforms envelope for the standardized full-branch
/// law `GIG(p, θ, θ)` (unit scale). Draws `(u, v)` uniformly on
/// `(0, 1] × [v_lo, v_hi]` and accepts `x = v/u + m` when
/// `u² ≤ h(x)/h(m)`, where `h` is the density kernel and `m` its mode.
#[derive(Debug, Clone, Copy)]
struct RatioOfUniforms {
    p: f64,
    theta: f64,
    mode: f64,
    ln_h_mode: f64,
    v_lo: f64,
    v_hi: f64,
}

impl RatioOfUniforms {
    fn new(p: f64, theta: f64) -> Self {
        // Mode of x^{p-1} e^{-θ(x + 1/x)/2}: positive root of
        // θx² - 2(p-1)x - θ = 0.
        let mode = ((p - 1.0) + (p - 1.0).hypot(theta)) / theta;
        let ln_h = |x: f64| (p - 1.0) * x.ln() - 0.5 * theta * (x + 1.0 / x);
        let ln_h_mode = ln_h(mode);
        // Extrema of (x - m)·sqrt(h(x)) solve the cubic
        // -θ/2 x³ + (p + 1 + θm/2) x² + (θ/2 - m(p-1)) x - θm/2 = 0,
        // which has exactly one root on each side of the mode.
        let cubic = |x: f64| {
            -0.5 * theta * x * x * x
                + (p + 1.0 + 0.5 * theta * mode) * x * x
                + (0.5 * theta - mode * (p - 1.0)) * x
                - 0.5 * theta * mode
        };
        let x_lo = bisect_root(&cubic, 0.0, mode);
        let mut hi = 2.0 * mode.max(1.0);
        while cubic(hi) > 0.0 {
            hi *= 2.0;
        }
        let x_hi = bisect_root(&cubic, mode, hi);
        let v_at = |x: f64| (x - mode) * (0.5 * (ln_h(x) - ln_h_mode)).exp();
        Self {
            p,
            theta,
            mode,
            ln_h_mode,
            v_lo: v_at(x_lo),
            v_hi: v_at(x_hi),
        }
    }

    fn ln_h(&self, x: f64) -> f64 {
        (self.p - 1.0) * x.ln() - 0.5 * self.theta * (x + 1.0 / x)
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        loop {
            let u = positive_uniform(rng);
            let v = rng.gen_range(self.v_lo..self.v_hi);
            let x = v / u + self.mode;
            if x > 0.0 && 2.0 * u.ln() <= self.ln_h(x) - self.ln_h_mode {
                return x;
            }
        }
    }
}

/// Sign-change bisection on `[lo, hi]`, assuming `f(lo)` and `f(hi)` have
/// opposite signs (with `f(lo)` evaluated as a limit when `lo = 0`).
fn bisect_root(f: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) * f(hi) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Exact sampler for any `GigParams`: ratio of uniforms on the full branch,
/// Gamma rejection on the boundary branches (reciprocal-Gamma goes through
/// `1/X` of a Gamma draw).
#[derive(Debug, Clone, Copy)]
pub struct GigSampler {
    params: GigParams,
    kind: SamplerKind,
}

#[derive(Debug, Clone, Copy)]
enum SamplerKind {
    Full { rou: RatioOfUniforms, eta: f64 },
    Gamma(GammaSampler),
    ReciprocalGamma(GammaSampler),
}

impl GigSampler {
    pub fn new(params: GigParams) -> Result<Self> {
        let kind = match params.branch() {
            Branch::Full => SamplerKind::Full {
                rou: RatioOfUniforms::new(params.p(), params.theta()),
                eta: params.eta(),
            },
            Branch::Gamma => SamplerKind::Gamma(GammaSampler::new(GammaParams::new(
                params.p(),
                0.5 * params.a(),
            )?)),
            Branch::ReciprocalGamma => SamplerKind::ReciprocalGamma(GammaSampler::new(
                GammaParams::new(-params.p(), 0.5 * params.b())?,
            )),
        };
        Ok(Self { params, kind })
    }

    pub fn params(&self) -> GigParams {
        self.params
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            SamplerKind::Full { rou, eta } => eta * rou.sample(rng),
            SamplerKind::Gamma(g) => g.sample(rng),
            SamplerKind::ReciprocalGamma(g) => 1.0 / g.sample(rng),
        }
    }
}

/// A generated batch with its provenance.
#[derive(Debug, Clone)]
pub struct SampleBatch {
    pub values: Vec<f64>,
    /// Human-readable description of the generating law.
    pub params_tag: String,
    pub seed_plan: SeedPlan,
    /// Set when the batch is a known-degenerate construction (e.g. a chain
    /// advanced zero steps), so downstream tests can short-circuit.
    pub degenerate: bool,
}

impl SampleBatch {
    fn new(values: Vec<f64>, params_tag: String, seed_plan: SeedPlan) -> Result<Self> {
        if values.is_empty() {
            return Err(GigError::Sample("batch must hold at least one value".into()));
        }
        if let Some(bad) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(GigError::Sample(format!(
                "batch contains a non-positive or non-finite value {bad}"
            )));
        }
        Ok(Self {
            values,
            params_tag,
            seed_plan,
            degenerate: false,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `n` i.i.d. Gamma(shape, rate) draws. Each draw owns a replicate-keyed
/// RNG stream, so the batch is identical for every worker count.
pub fn sample_gamma(params: GammaParams, n: u64, plan: &SeedPlan) -> Result<SampleBatch> {
    sample_gamma_with_workers(params, n, plan, None)
}

/// As [`sample_gamma`] with an explicit rayon pool size.
pub fn sample_gamma_with_workers(
    params: GammaParams,
    n: u64,
    plan: &SeedPlan,
    workers: Option<usize>,
) -> Result<SampleBatch> {
    if n == 0 {
        return Err(GigError::Sample("need n >= 1".into()));
    }
    let sampler = GammaSampler::new(params);
    let values = seed::collect_replicates(plan, n, workers, |_, rng| sampler.sample(rng));
    SampleBatch::new(values, params.to_string(), *plan)
}

/// `n` exact i.i.d. GIG draws; see [`GigSampler`].
pub fn sample_gig(params: GigParams, n: u64, plan: &SeedPlan) -> Result<SampleBatch> {
    sample_gig_with_workers(params, n, plan, None)
}

/// As [`sample_gig`] with an explicit rayon pool size.
pub fn sample_gig_with_workers(
    params: GigParams,
    n: u64,
    plan: &SeedPlan,
    workers: Option<usize>,
) -> Result<SampleBatch> {
    if n == 0 {
        return Err(GigError::Sample("need n >= 1".into()));
    }
    let sampler = GigSampler::new(params)?;
    let values = seed::collect_replicates(plan, n, workers, |_, rng| sampler.sample(rng));
    SampleBatch::new(values, params.to_string(), *plan)
}

/// One iterate of the continued-fraction chain.
#[derive(Debug, Clone, Copy)]
pub struct ChainState {
    pub iterate_index: u64,
    pub value: f64,
}

/// The Markov chain `X_{m+1} = 1/(Y_{2m+1} + 1/(Y_{2m+2} + X_m))` with
/// `Y_odd ~ Γ(p, b/2)` and `Y_even ~ Γ(p, a/2)`; its unique stationary law
/// is `GIG(-p, a, b)`.
#[derive(Debug, Clone, Copy)]
pub struct ContinuedFractionChain {
    /// Sampler for the odd entries `Y_{2m+1} ~ Γ(p, b/2)`.
    outer: GammaSampler,
    /// Sampler for the even entries `Y_{2m+2} ~ Γ(p, a/2)`.
    inner: GammaSampler,
}

impl ContinuedFractionChain {
    pub fn new(p: f64, a: f64, b: f64) -> Result<Self> {
        if !(p > 0.0) || !(a > 0.0) || !(b > 0.0) {
            return Err(GigError::InvalidParams(format!(
                "the chain needs p, a, b > 0, got p = {p}, a = {a}, b = {b}"
            )));
        }
        Ok(Self {
            outer: GammaSampler::new(GammaParams::new(p, 0.5 * b)?),
            inner: GammaSampler::new(GammaParams::new(p, 0.5 * a)?),
        })
    }

    /// Advances one step, consuming exactly two Gamma variates in the
    /// displayed order (odd entry first).
    pub fn step<R: Rng>(&self, state: ChainState, rng: &mut R) -> ChainState {
        let y_odd = self.outer.sample(rng);
        let y_even = self.inner.sample(rng);
        ChainState {
            iterate_index: state.iterate_index + 1,
            value: 1.0 / (y_odd + 1.0 / (y_even + state.value)),
        }
    }
}

/// `n` independent chain replicates, each advanced `m` steps from `init`.
/// `m = 0` returns `n` copies of `init`, flagged degenerate.
pub fn chain_iterates(
    p: f64,
    a: f64,
    b: f64,
    m: u64,
    n: u64,
    plan: &SeedPlan,
    init: f64,
) -> Result<SampleBatch> {
    chain_iterates_with_workers(p, a, b, m, n, plan, init, None)
}

/// As [`chain_iterates`] with an explicit rayon pool size.
#[allow(clippy::too_many_arguments)]
pub fn chain_iterates_with_workers(
    p: f64,
    a: f64,
    b: f64,
    m: u64,
    n: u64,
    plan: &SeedPlan,
    init: f64,
    workers: Option<usize>,
) -> Result<SampleBatch> {
    if n == 0 {
        return Err(GigError::Sample("need n >= 1".into()));
    }
    if !(init > 0.0) || !init.is_finite() {
        return Err(GigError::InvalidParams(format!(
            "chain init must be positive and finite, got {init}"
        )));
    }
    let chain = ContinuedFractionChain::new(p, a, b)?;
    let values = seed::collect_replicates(plan, n, workers, |_, rng| {
        let mut state = ChainState {
            iterate_index: 0,
            value: init,
        };
        for _ in 0..m {
            state = chain.step(state, rng);
        }
        state.value
    });
    let mut batch = SampleBatch::new(
        values,
        format!("chain(p = {p}, a = {a}, b = {b}, m = {m}, init = {init})"),
        *plan,
    )?;
    batch.degenerate = m == 0;
    Ok(batch)
}

/// Default chain start: the scale `η = √(b/a)` of the stationary law.
pub fn default_chain_init(a: f64, b: f64) -> f64 {
    (b / a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist;
    use crate::special;
    use crate::stats;
    use approx::assert_abs_diff_eq;

    fn plan(stream: u64) -> SeedPlan {
        SeedPlan::new(0x00C0FFEE, stream)
    }

    fn gamma_cdf(shape: f64, rate: f64) -> impl Fn(f64) -> crate::Result<f64> {
        move |x| special::regularized_lower_gamma(shape, rate * x)
    }

    #[test]
    fn exponential_mean_within_four_se() {
        let n = 100_000;
        let batch =
            sample_gamma(GammaParams::new(1.0, 1.0).unwrap(), n, &plan(1)).unwrap();
        let (mean, se) = stats::mean_and_se(&batch.values);
        assert!((mean - 1.0).abs() < 4.0 * se, "mean = {mean}, se = {se}");
    }

    #[test]
    fn gamma_mean_matches_shape_over_rate() {
        for (shape, rate) in [(0.4, 1.5), (1.0, 2.0), (2.5, 0.5), (7.0, 3.0)] {
            let n = 40_000;
            let batch =
                sample_gamma(GammaParams::new(shape, rate).unwrap(), n, &plan(2)).unwrap();
            let (mean, se) = stats::mean_and_se(&batch.values);
            assert!(
                (mean - shape / rate).abs() < 4.0 * se,
                "shape = {shape}, rate = {rate}: mean = {mean}, se = {se}"
            );
        }
    }

    #[test]
    fn gamma_passes_ks_at_one_percent() {
        let n = 100_000u64;
        for (stream, shape, rate) in [(3, 1.0, 1.0), (4, 0.6, 2.0), (5, 3.5, 0.7)] {
            let batch =
                sample_gamma(GammaParams::new(shape, rate).unwrap(), n, &plan(stream)).unwrap();
            let t = stats::ks_one_sample(&batch.values, gamma_cdf(shape, rate)).unwrap();
            assert!(
                t.statistic < stats::ks_critical_1pct(n as f64),
                "shape = {shape}: D = {}",
                t.statistic
            );
        }
    }

    #[test]
    fn gig_sampler_matches_cdf_across_branches() {
        let n = 50_000u64;
        let cases = [
            GigParams::new(0.7, 2.0, 3.0).unwrap(),
            GigParams::new(-0.5, 1.0, 1.0).unwrap(),
            GigParams::new(-2.0, 0.5, 4.0).unwrap(),
            GigParams::new(0.0, 1.0, 1.0).unwrap(),
            GigParams::new(3.0, 1.0, 0.5).unwrap(),
            GigParams::new(2.0, 3.0, 0.0).unwrap(),
            GigParams::new(-1.5, 0.0, 2.0).unwrap(),
        ];
        for (i, params) in cases.into_iter().enumerate() {
            let batch = sample_gig(params, n, &plan(110 + i as u64)).unwrap();
            let mut sorted = batch.values.clone();
            sorted.sort_by(f64::total_cmp);
            let cdf_values = dist::cdf_sorted(&params, &sorted).unwrap();
            let t = stats::ks_from_sorted_cdf(&cdf_values).unwrap();
            assert!(
                t.statistic < stats::ks_critical_1pct(n as f64),
                "{params}: D = {} vs {}",
                t.statistic,
                stats::ks_critical_1pct(n as f64)
            );
        }
    }

    #[test]
    fn gig_mean_matches_bessel_moment() {
        let params = GigParams::new(0.7, 2.0, 3.0).unwrap();
        let batch = sample_gig(params, 100_000, &plan(20)).unwrap();
        let (mean, se) = stats::mean_and_se(&batch.values);
        let target = dist::mean(&params).unwrap();
        assert!((mean - target).abs() < 4.0 * se, "mean = {mean}, target = {target}");
    }

    #[test]
    fn ig_self_reciprocal_functional() {
        // IG(1,1): E[X + 1/X] = 2 + 1/sqrt(ab) + ... = 3 at a = b = 1.
        let params = GigParams::new(-0.5, 1.0, 1.0).unwrap();
        let batch = sample_gig(params, 100_000, &plan(21)).unwrap();
        let sums: Vec<f64> = batch.values.iter().map(|&x| x + 1.0 / x).collect();
        let (mean, se) = stats::mean_and_se(&sums);
        assert!((mean - 3.0).abs() < 4.0 * se, "mean = {mean}, se = {se}");
    }

    #[test]
    fn reciprocal_batch_matches_flipped_law() {
        let params = GigParams::new(0.7, 2.0, 3.0).unwrap();
        let flipped = params.reciprocal();
        let batch = sample_gig(params, 50_000, &plan(22)).unwrap();
        let mut recip: Vec<f64> = batch.values.iter().map(|x| 1.0 / x).collect();
        recip.sort_by(f64::total_cmp);
        let cdf_values = dist::cdf_sorted(&flipped, &recip).unwrap();
        let t = stats::ks_from_sorted_cdf(&cdf_values).unwrap();
        assert!(t.statistic < stats::ks_critical_1pct(50_000.0));
    }

    #[test]
    fn batches_are_reproducible_and_worker_independent() {
        let params = GigParams::new(0.7, 2.0, 3.0).unwrap();
        let a = sample_gig_with_workers(params, 5_000, &plan(30), Some(1)).unwrap();
        let b = sample_gig_with_workers(params, 5_000, &plan(30), Some(4)).unwrap();
        let c = sample_gig(params, 5_000, &plan(30)).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.values, c.values);
        let other = sample_gig(params, 5_000, &plan(31)).unwrap();
        assert_ne!(a.values, other.values);
    }

    #[test]
    fn chain_zero_steps_is_degenerate() {
        let batch = chain_iterates(1.0, 2.0, 3.0, 0, 100, &plan(40), 1.0).unwrap();
        assert!(batch.degenerate);
        assert!(batch.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn chain_preserves_stationary_law_when_a_equals_b() {
        // X₀ ~ GIG(-p, a, a); one step must leave the law unchanged.
        let (p, a) = (1.0, 2.0);
        let stationary = GigParams::new(-p, a, a).unwrap();
        let n = 50_000u64;
        let start = sample_gig(stationary, n, &plan(41)).unwrap();
        let chain = ContinuedFractionChain::new(p, a, a).unwrap();
        let moved = seed::collect_replicates(&plan(42), n, None, |i, rng| {
            chain
                .step(
                    ChainState {
                        iterate_index: 0,
                        value: start.values[i as usize],
                    },
                    rng,
                )
                .value
        });
        let mut sorted = moved;
        sorted.sort_by(f64::total_cmp);
        let cdf_values = dist::cdf_sorted(&stationary, &sorted).unwrap();
        let t = stats::ks_from_sorted_cdf(&cdf_values).unwrap();
        assert!(
            t.statistic < stats::ks_critical_1pct(n as f64),
            "D = {}",
            t.statistic
        );
    }

    #[test]
    fn chain_converges_to_gig_limit() {
        // Fifty steps from a deliberately bad start.
        let (p, a, b) = (1.0, 2.0, 3.0);
        let limit = GigParams::new(-p, a, b).unwrap();
        let n = 20_000u64;
        let batch = chain_iterates(p, a, b, 50, n, &plan(43), 25.0).unwrap();
        let mut sorted = batch.values.clone();
        sorted.sort_by(f64::total_cmp);
        let cdf_values = dist::cdf_sorted(&limit, &sorted).unwrap();
        let t = stats::ks_from_sorted_cdf(&cdf_values).unwrap();
        assert!(t.statistic < 0.01, "D = {}", t.statistic);
    }

    #[test]
    fn chain_rejects_bad_arguments() {
        assert!(chain_iterates(0.0, 2.0, 3.0, 5, 10, &plan(44), 1.0).is_err());
        assert!(chain_iterates(1.0, 2.0, 3.0, 5, 0, &plan(44), 1.0).is_err());
        assert!(chain_iterates(1.0, 2.0, 3.0, 5, 10, &plan(44), 0.0).is_err());
        assert!(chain_iterates(1.0, 2.0, 3.0, 5, 10, &plan(44), f64::NAN).is_err());
    }

    #[test]
    fn default_init_is_eta() {
        assert_abs_diff_eq!(default_chain_init(2.0, 3.0), (1.5f64).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn sample_batch_validation() {
        assert!(SampleBatch::new(vec![], "t".into(), plan(0)).is_err());
        assert!(SampleBatch::new(vec![1.0, -2.0], "t".into(), plan(0)).is_err());
        assert!(SampleBatch::new(vec![1.0, f64::NAN], "t".into(), plan(0)).is_err());
        let ok = SampleBatch::new(vec![1.0, 2.0], "t".into(), plan(0)).unwrap();
        assert_eq!(ok.len(), 2);
        assert!(!ok.degenerate);
    }
}

