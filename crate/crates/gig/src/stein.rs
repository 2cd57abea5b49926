//! The GIG Stein operator `𝓣h(x) = h′(x) + ((p-1)/x + b/(2x²) - a/2) h(x)`,
//! its tractable polynomial form, the Stein-equation solution `h_z`, a
//! bootstrap Stein-discrepancy goodness-of-fit test, and the convergence
//! experiment for the continued-fraction chain.

use serde::Serialize;

use crate::dist::{self, DensityFn};
use crate::error::{GigError, Result};
use crate::params::GigParams;
use crate::quad;
use crate::sampling::{self, GigSampler, SampleBatch};
use crate::seed::{self, SeedPlan};
use crate::stats;

/// A differentiable test function with declared growth exponents.
///
/// The exponents encode the limits `log|h(x)| / log x` as `x → 0` and
/// `x → ∞` (so `log x` has exponent 0 at both ends, and `f64::NEG_INFINITY`
/// at infinity declares exponential decay). The boundary certificate uses
/// strict inequalities on these exponents, so logarithmic corrections are
/// refused at exact ties — conservative, never unsound.
pub struct TestFunction {
    name: String,
    h: Box<dyn Fn(f64) -> f64 + Sync + Send>,
    dh: Box<dyn Fn(f64) -> f64 + Sync + Send>,
    order_at_zero: f64,
    order_at_infinity: f64,
}

impl std::fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TestFunction")
            .field("name", &self.name)
            .field("order_at_zero", &self.order_at_zero)
            .field("order_at_infinity", &self.order_at_infinity)
            .finish()
    }
}

/// Declared limits of `f_{p,a,b}(x) h(x)` at the two endpoints. Both must
/// vanish for the Stein identity `E[𝓣h(X)] = 0` to hold.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundaryCertificate {
    pub vanishes_at_zero: bool,
    pub vanishes_at_infinity: bool,
}

impl BoundaryCertificate {
    pub fn is_valid(&self) -> bool {
        self.vanishes_at_zero && self.vanishes_at_infinity
    }
}

impl TestFunction {
    pub fn new(
        name: impl Into<String>,
        h: impl Fn(f64) -> f64 + Sync + Send + 'static,
        dh: impl Fn(f64) -> f64 + Sync + Send + 'static,
        order_at_zero: f64,
        order_at_infinity: f64,
    ) -> Self {
        Self {
            name: name.into(),
            h: Box::new(h),
            dh: Box::new(dh),
            order_at_zero,
            order_at_infinity,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn h(&self, x: f64) -> f64 {
        (self.h)(x)
    }

    pub fn dh(&self, x: f64) -> f64 {
        (self.dh)(x)
    }

    /// Exponent bookkeeping on the density's boundary behavior:
    /// at 0 the density is `x^{p-1}` up to the damping `e^{-b/(2x)}`, so
    /// `f·h` vanishes iff `b > 0` or `p - 1 + order(h) > 0`; at `∞` the
    /// damping is `e^{-ax/2}`, so `f·h` vanishes iff `a > 0` or
    /// `p - 1 + order(h) < 0`. NaN orders fail both tests.
    pub fn boundary_certificate(&self, params: &GigParams) -> BoundaryCertificate {
        BoundaryCertificate {
            vanishes_at_zero: params.b() > 0.0
                || params.p() - 1.0 + self.order_at_zero > 0.0,
            vanishes_at_infinity: params.a() > 0.0
                || params.p() - 1.0 + self.order_at_infinity < 0.0,
        }
    }
}

/// The candidate test functions `{1, x, 1/x, log x, e^{-x}, x e^{-x}}`,
/// before any boundary-certificate filtering.
pub fn candidate_functions() -> Vec<TestFunction> {
    vec![
        TestFunction::new("1", |_| 1.0, |_| 0.0, 0.0, 0.0),
        TestFunction::new("x", |x| x, |_| 1.0, 1.0, 1.0),
        TestFunction::new("1/x", |x| 1.0 / x, |x| -1.0 / (x * x), -1.0, -1.0),
        TestFunction::new("log x", f64::ln, |x| 1.0 / x, 0.0, 0.0),
        TestFunction::new("exp(-x)", |x| (-x).exp(), |x| -(-x).exp(), 0.0, f64::NEG_INFINITY),
        TestFunction::new(
            "x exp(-x)",
            |x| x * (-x).exp(),
            |x| (1.0 - x) * (-x).exp(),
            1.0,
            f64::NEG_INFINITY,
        ),
    ]
}

/// The candidates whose boundary certificate is valid for `params`.
pub fn default_function_class(params: &GigParams) -> Vec<TestFunction> {
    candidate_functions()
        .into_iter()
        .filter(|h| h.boundary_certificate(params).is_valid())
        .collect()
}

/// Which algebraic form of the operator to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorForm {
    /// `𝓣h(x) = h′(x) + ((p-1)/x + b/(2x²) - a/2) h(x)`.
    Standard,
    /// `𝓣₂h(x) = x²h′(x) + (-x²a/2 + (p+1)x + b/2) h(x)`, which equals
    /// `𝓣(x²h)(x)` by the product rule.
    Tractable,
}

/// The density's score term `ψ(x) = (p-1)/x + b/(2x²) - a/2`.
pub fn stein_coefficient(params: &GigParams, x: f64) -> f64 {
    (params.p() - 1.0) / x + 0.5 * params.b() / (x * x) - 0.5 * params.a()
}

/// `𝓣(id)(x)`: the integrand of the first moment identity
/// `p + (b/2)E[1/X] - (a/2)E[X] = 0`. This is exactly the `h(x) = x`
/// specialization of [`stein_apply`] — the same expression, so the two
/// paths agree bitwise.
pub fn moment_identity_integrand(params: &GigParams, x: f64) -> f64 {
    1.0 + stein_coefficient(params, x) * x
}

/// Applies the Stein operator to `h` at a point.
pub fn stein_apply(params: &GigParams, h: &TestFunction, x: f64, form: OperatorForm) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(GigError::Domain(format!(
            "evaluation point x must be positive and finite, got {x}"
        )));
    }
    Ok(match form {
        OperatorForm::Standard => h.dh(x) + stein_coefficient(params, x) * h.h(x),
        OperatorForm::Tractable => {
            x * x * h.dh(x)
                + (-0.5 * params.a() * x * x + (params.p() + 1.0) * x + 0.5 * params.b()) * h.h(x)
        }
    })
}

fn require_positive_batch(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(GigError::Sample("batch must hold at least one value".into()));
    }
    if let Some(bad) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(GigError::Sample(format!(
            "batch contains a non-positive or non-finite value {bad}"
        )));
    }
    Ok(())
}

fn certify(params: &GigParams, h: &TestFunction) -> Result<()> {
    let cert = h.boundary_certificate(params);
    if !cert.vanishes_at_zero {
        return Err(GigError::Boundary(format!(
            "f·h for \"{}\" does not vanish at 0 under {params}",
            h.name
        )));
    }
    if !cert.vanishes_at_infinity {
        return Err(GigError::Boundary(format!(
            "f·h for \"{}\" does not vanish at infinity under {params}",
            h.name
        )));
    }
    Ok(())
}

/// Empirical mean of `𝓣h` with its standard error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SteinExpectation {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

/// `E_n[𝓣h]` over the batch; zero within noise when the batch is drawn
/// from `params` and the boundary certificate holds.
pub fn stein_expectation(
    params: &GigParams,
    h: &TestFunction,
    batch: &SampleBatch,
) -> Result<SteinExpectation> {
    require_positive_batch(&batch.values)?;
    certify(params, h)?;
    let evals: Vec<f64> = batch
        .values
        .iter()
        .map(|&x| h.dh(x) + stein_coefficient(params, x) * h.h(x))
        .collect();
    let (mean, se) = stats::mean_and_se(&evals);
    Ok(SteinExpectation {
        mean,
        se,
        n: batch.values.len(),
    })
}

/// Contribution of one test function to a Stein discrepancy.
#[derive(Debug, Clone, Serialize)]
pub struct FunctionContribution {
    pub name: String,
    pub mean: f64,
    pub se: f64,
    /// `|mean| / se`; infinite when the evaluations are constant nonzero.
    pub standardized: f64,
}

/// Standardized `𝓣h` means over a class, for pre-validated positive values.
fn class_contributions(
    values: &[f64],
    params: &GigParams,
    class: &[TestFunction],
) -> Vec<FunctionContribution> {
    let coeffs: Vec<f64> = values
        .iter()
        .map(|&x| stein_coefficient(params, x))
        .collect();
    class
        .iter()
        .map(|h| {
            let evals: Vec<f64> = values
                .iter()
                .zip(&coeffs)
                .map(|(&x, &c)| h.dh(x) + c * h.h(x))
                .collect();
            let (mean, se) = stats::mean_and_se(&evals);
            let standardized = if se > 0.0 {
                (mean / se).abs()
            } else if mean == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            FunctionContribution {
                name: h.name.clone(),
                mean,
                se,
                standardized,
            }
        })
        .collect()
}

fn max_standardized(contributions: &[FunctionContribution]) -> f64 {
    contributions
        .iter()
        .fold(0.0f64, |acc, c| acc.max(c.standardized))
}

/// Result of the Stein-discrepancy goodness-of-fit test.
#[derive(Debug, Clone, Serialize)]
pub struct SteinTestResult {
    /// `max_k |E_n[𝓣h_k]| / SE_k`.
    pub discrepancy: f64,
    pub per_function: Vec<FunctionContribution>,
    /// Parametric-bootstrap p-value `(1 + #{T_r ≥ T_obs}) / (B + 1)`.
    pub p_value: f64,
    pub n_bootstrap: u64,
}

/// Stein-discrepancy test of `batch` against `params`, calibrated by a
/// parametric bootstrap that redraws same-size batches from `params`.
pub fn stein_gof(
    batch: &SampleBatch,
    params: &GigParams,
    function_class: &[TestFunction],
    n_bootstrap: u64,
    plan: &SeedPlan,
) -> Result<SteinTestResult> {
    stein_gof_with_workers(batch, params, function_class, n_bootstrap, plan, None)
}

/// As [`stein_gof`] with an explicit rayon pool size.
pub fn stein_gof_with_workers(
    batch: &SampleBatch,
    params: &GigParams,
    function_class: &[TestFunction],
    n_bootstrap: u64,
    plan: &SeedPlan,
    workers: Option<usize>,
) -> Result<SteinTestResult> {
    if function_class.is_empty() {
        return Err(GigError::Config("empty test-function class".into()));
    }
    if n_bootstrap < 99 {
        return Err(GigError::Config(format!(
            "parametric bootstrap needs at least 99 replicates, got {n_bootstrap}"
        )));
    }
    require_positive_batch(&batch.values)?;
    for h in function_class {
        certify(params, h)?;
    }
    let per_function = class_contributions(&batch.values, params, function_class);
    let discrepancy = max_standardized(&per_function);

    let sampler = GigSampler::new(*params)?;
    let n = batch.values.len();
    let null_discrepancies = seed::collect_replicates(plan, n_bootstrap, workers, |_, rng| {
        let values: Vec<f64> = (0..n).map(|_| sampler.sample(rng)).collect();
        max_standardized(&class_contributions(&values, params, function_class))
    });
    let exceed = null_discrepancies
        .iter()
        .filter(|&&t| t >= discrepancy)
        .count();
    Ok(SteinTestResult {
        discrepancy,
        per_function,
        p_value: (1 + exceed) as f64 / (n_bootstrap + 1) as f64,
        n_bootstrap,
    })
}

/// Solves the Stein equation `𝓣h_z = 𝕀_{(0,z]} - F(z)` at each grid point:
/// `h_z(x) = (1/f(x)) ∫₀^x (𝕀_{(0,z]}(u) - F(z)) f(u) du`, which reduces to
/// `(1-F(z))·F(x)/f(x)` below `z` and `F(z)·S(x)/f(x)` above, with `S` the
/// survival function.
pub fn stein_solution(params: &GigParams, z: f64, x_grid: &[f64]) -> Result<Vec<f64>> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(GigError::Domain(format!("need z > 0, got {z}")));
    }
    if x_grid.is_empty() {
        return Err(GigError::Config("empty evaluation grid".into()));
    }
    if x_grid.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(GigError::Domain("grid points must be positive and finite".into()));
    }
    if x_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(GigError::Domain("grid must be sorted ascending".into()));
    }
    let f = DensityFn::new(params)?;
    let f_z = dist::cdf(params, z)?;
    x_grid
        .iter()
        .map(|&x| {
            let density = f.at(x);
            let integral = if x <= z {
                (1.0 - f_z) * dist::cdf(params, x)?
            } else {
                f_z * survival(params, &f, x)?
            };
            let h = integral / density;
            if !h.is_finite() {
                return Err(GigError::TailTruncation(format!(
                    "h_z not representable at x = {x}: density = {density}, \
                     signed mass = {integral}"
                )));
            }
            Ok(h)
        })
        .collect()
}

/// `P(X > x)`, integrating the upper tail directly on the full branch to
/// avoid the `1 - F` cancellation.
fn survival(params: &GigParams, f: &DensityFn, x: f64) -> Result<f64> {
    match params.branch() {
        crate::params::Branch::Full => {
            Ok(quad::integrate_upper_tail(|t| f.at(t), x, 1e-10, 1e-15, 400)?.value)
        }
        _ => Ok(1.0 - dist::cdf(params, x)?),
    }
}

/// Stein discrepancy of the `m`-step continued-fraction chain against its
/// stationary law `GIG(-p, a, b)`, for each `m` in an increasing list.
pub fn chain_convergence_experiment(
    p: f64,
    a: f64,
    b: f64,
    m_list: &[u64],
    n: u64,
    plan: &SeedPlan,
) -> Result<Vec<(u64, f64)>> {
    chain_convergence_experiment_with_workers(p, a, b, m_list, n, plan, None)
}

/// As [`chain_convergence_experiment`] with an explicit rayon pool size.
#[allow(clippy::too_many_arguments)]
pub fn chain_convergence_experiment_with_workers(
    p: f64,
    a: f64,
    b: f64,
    m_list: &[u64],
    n: u64,
    plan: &SeedPlan,
    workers: Option<usize>,
) -> Result<Vec<(u64, f64)>> {
    if m_list.is_empty() {
        return Err(GigError::Config("empty step list".into()));
    }
    if m_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(GigError::Config("step list must be strictly increasing".into()));
    }
    let target = GigParams::new(-p, a, b)?;
    let class = default_function_class(&target);
    if class.is_empty() {
        return Err(GigError::Config(format!(
            "no certified test functions for {target}"
        )));
    }
    let init = sampling::default_chain_init(a, b);
    m_list
        .iter()
        .map(|&m| {
            // One child plan per step count, keyed by m so each row is
            // reproducible independently of the rest of the list.
            let batch = sampling::chain_iterates_with_workers(
                p,
                a,
                b,
                m,
                n,
                &plan.child(m + 1),
                init,
                workers,
            )?;
            let contributions = class_contributions(&batch.values, &target, &class);
            Ok((m, max_standardized(&contributions)))
        })
        .collect()
}
