//! Maximum-likelihood estimation: the closed-form scale MLE, profile
//! likelihood over the scale, full numerical fits with the scale profiled
//! out, and the IG closed-form estimator pair.

use serde::Serialize;

use crate::error::{GigError, Result};
use crate::params::{Branch, GigParams};
use crate::sampling::SampleBatch;
use crate::special;

/// Gradient-norm target (per observation, in `(p, ln θ)` coordinates).
const GRAD_TOL: f64 = 1e-6;
/// Hard lower bound on `θ` during the search.
const THETA_FLOOR: f64 = 1e-8;
/// The sub-family wins when it comes within this much total
/// log-likelihood of the interior optimum (likelihood-ratio ~ 4).
const BOUNDARY_LL_MARGIN: f64 = 2.0;

/// A converged `θ̂` at or below this makes the fit a boundary candidate.
/// The Fisher information in `θ` vanishes like `θ²` at the boundary, so
/// under a `θ = 0` truth the interior maximizer wanders at the `n^{-1/4}`
/// rate; the trigger must scale the same way. The likelihood-ratio margin
/// then arbitrates, so an over-wide trigger costs nothing.
fn boundary_theta(n: usize) -> f64 {
    3.0 * (n as f64).powf(-0.25)
}
const MAX_ITERATIONS: u64 = 300;

/// Sufficient statistics of a positive sample for GIG likelihood work.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SummaryStats {
    mean: f64,
    inv_mean: f64,
    log_mean: f64,
    n: usize,
    constant: bool,
}

impl SummaryStats {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(GigError::Sample("empty sample".into()));
        }
        if values.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(GigError::Sample(
                "sample entries must be positive and finite".into(),
            ));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let inv_mean = values.iter().map(|&x| 1.0 / x).sum::<f64>() / n;
        let log_mean = values.iter().map(|&x| x.ln()).sum::<f64>() / n;
        // Arithmetic–harmonic inequality, up to roundoff on (near-)constant
        // samples.
        if mean * inv_mean < 1.0 - 1e-9 {
            return Err(GigError::Sample(format!(
                "mean · inverse-mean = {} < 1 violates the arithmetic-harmonic inequality",
                mean * inv_mean
            )));
        }
        let constant = values.windows(2).all(|w| w[0] == w[1]);
        Ok(Self {
            mean,
            inv_mean,
            log_mean,
            n: values.len(),
            constant,
        })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Mean of the reciprocals, `X̄₋₁`.
    pub fn inv_mean(&self) -> f64 {
        self.inv_mean
    }

    pub fn log_mean(&self) -> f64 {
        self.log_mean
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn is_constant(&self) -> bool {
        self.constant
    }
}

/// Scale MLE with a degeneracy flag for constant samples.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EtaEstimate {
    pub eta: f64,
    /// The sample was constant; the estimate is the formula's collapse
    /// value `c (√(p² + θ²) - p)/θ`, not a score root.
    pub degenerate: bool,
}

/// Closed-form scale MLE:
/// `η̂ = (√(p² + θ² X̄ X̄₋₁) - p) / (θ X̄₋₁)`,
/// the unique positive root of the profile score `Σ ψ(x_i/η) = 0`.
pub fn eta_mle(stats: &SummaryStats, p: f64, theta: f64) -> Result<EtaEstimate> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(GigError::Domain(format!("need theta > 0, got {theta}")));
    }
    if !p.is_finite() {
        return Err(GigError::Domain(format!("need finite p, got {p}")));
    }
    let product = stats.mean * stats.inv_mean;
    let eta = ((p * p + theta * theta * product).sqrt() - p) / (theta * stats.inv_mean);
    Ok(EtaEstimate {
        eta,
        degenerate: stats.constant,
    })
}

/// Per-observation log-likelihood of the `(p, θ, η)` form at the summary
/// statistics (total log-likelihood is `n` times this).
fn mean_log_likelihood(stats: &SummaryStats, p: f64, theta: f64, eta: f64) -> Result<f64> {
    let ln_k = special::ln_bessel_k(p, theta)?;
    Ok(-std::f64::consts::LN_2 - eta.ln() - ln_k + (p - 1.0) * (stats.log_mean - eta.ln())
        - 0.5 * theta * (stats.mean / eta + eta * stats.inv_mean))
}

/// Log-likelihood of the batch at each grid scale, for fixed `(p, θ)`.
pub fn profile_likelihood(
    batch: &SampleBatch,
    p: f64,
    theta: f64,
    eta_grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(GigError::Domain(format!("need theta > 0, got {theta}")));
    }
    if eta_grid.is_empty() {
        return Err(GigError::Config("empty eta grid".into()));
    }
    if eta_grid.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
        return Err(GigError::Config("eta grid must be positive".into()));
    }
    if eta_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(GigError::Config("eta grid must be strictly increasing".into()));
    }
    let stats = SummaryStats::from_values(&batch.values)?;
    let n = stats.n as f64;
    eta_grid
        .iter()
        .map(|&eta| Ok((eta, n * mean_log_likelihood(&stats, p, theta, eta)?)))
        .collect()
}

/// Which parameters a fit frees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitMode {
    /// Maximize over `(p, θ)` with `η` profiled out analytically.
    Full,
    /// Hold `p` fixed, maximize over `θ` (with `η` profiled out).
    FixedP(f64),
    /// Closed-form IG estimators `μ̂ = X̄`, `λ̂ = 1/(X̄₋₁ - 1/X̄)`.
    Ig,
}

/// Serializable `(p, a, b)` view with the derived coordinates.
#[derive(Debug, Clone, Serialize)]
pub struct ParamsView {
    pub p: f64,
    pub a: f64,
    pub b: f64,
    pub theta: f64,
    pub eta: f64,
    pub branch: &'static str,
}

impl From<&GigParams> for ParamsView {
    fn from(params: &GigParams) -> Self {
        Self {
            p: params.p(),
            a: params.a(),
            b: params.b(),
            theta: params.theta(),
            eta: params.eta(),
            branch: match params.branch() {
                Branch::Full => "full",
                Branch::Gamma => "gamma",
                Branch::ReciprocalGamma => "reciprocal_gamma",
            },
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConvergenceInfo {
    pub iterations: u64,
    /// Per-observation gradient norm in `(p, ln θ)` at the optimum
    /// (zero for closed-form fits).
    pub gradient_norm: f64,
}

/// A named standard error.
#[derive(Debug, Clone, Serialize)]
pub struct StandardError {
    pub name: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub params: ParamsView,
    pub log_likelihood: f64,
    pub convergence: ConvergenceInfo,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub standard_errors: Option<Vec<StandardError>>,
    /// Set when the optimizer hit the `θ → 0` boundary and the fit was
    /// redone on the named sub-family.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary: Option<String>,
}

impl FitResult {
    /// The fitted parameters as a validated `GigParams`.
    pub fn gig_params(&self) -> Result<GigParams> {
        GigParams::new(self.params.p, self.params.a, self.params.b)
    }
}

/// Maximum-likelihood fit of a batch.
pub fn fit_gig(batch: &SampleBatch, mode: FitMode) -> Result<FitResult> {
    let stats = SummaryStats::from_values(&batch.values)?;
    if stats.n < 3 {
        return Err(GigError::Sample(format!(
            "need at least 3 observations, got {}",
            stats.n
        )));
    }
    if stats.constant {
        return Err(GigError::Sample("constant sample has no interior MLE".into()));
    }
    match mode {
        FitMode::Ig => fit_ig(batch, &stats),
        FitMode::Full => fit_profiled(&stats, None),
        FitMode::FixedP(p) => {
            if !p.is_finite() {
                return Err(GigError::Domain(format!("need finite p, got {p}")));
            }
            fit_profiled(&stats, Some(p))
        }
    }
}

/// Closed-form IG fit with delta-method standard errors.
fn fit_ig(batch: &SampleBatch, stats: &SummaryStats) -> Result<FitResult> {
    let mu = stats.mean;
    let spread = stats.inv_mean - 1.0 / stats.mean;
    let lambda = 1.0 / spread;
    let params = GigParams::new(-0.5, lambda / (mu * mu), lambda)?;
    let n = stats.n as f64;
    let log_likelihood = n * mean_log_likelihood(stats, -0.5, lambda / mu, mu)?;

    // Sample covariance of (X̄, X̄₋₁) for the delta method.
    let mut s_xx = 0.0;
    let mut s_yy = 0.0;
    let mut s_xy = 0.0;
    for &x in &batch.values {
        let dx = x - stats.mean;
        let dy = 1.0 / x - stats.inv_mean;
        s_xx += dx * dx;
        s_yy += dy * dy;
        s_xy += dx * dy;
    }
    let denom = (n - 1.0).max(1.0) * n;
    let (var_x, var_y, cov) = (s_xx / denom, s_yy / denom, s_xy / denom);
    let g_x = -lambda * lambda / (mu * mu);
    let g_y = -lambda * lambda;
    let var_lambda = g_x * g_x * var_x + g_y * g_y * var_y + 2.0 * g_x * g_y * cov;
    Ok(FitResult {
        params: ParamsView::from(&params),
        log_likelihood,
        convergence: ConvergenceInfo {
            iterations: 0,
            gradient_norm: 0.0,
        },
        standard_errors: Some(vec![
            StandardError {
                name: "mu",
                value: var_x.sqrt(),
            },
            StandardError {
                name: "lambda",
                value: var_lambda.max(0.0).sqrt(),
            },
        ]),
        boundary: None,
    })
}

/// Profile objective: per-observation log-likelihood at `(p, θ)` with the
/// scale set to its closed-form MLE.
fn profile_objective(stats: &SummaryStats, p: f64, theta: f64) -> Result<f64> {
    let eta = eta_mle(stats, p, theta)?.eta;
    mean_log_likelihood(stats, p, theta, eta)
}

/// Search box in `(p, ln θ)`.
const P_BOUND: f64 = 60.0;
const LN_THETA_MAX: f64 = 11.0;

fn clamp_point(v: [f64; 2]) -> [f64; 2] {
    [
        v[0].clamp(-P_BOUND, P_BOUND),
        v[1].clamp(THETA_FLOOR.ln(), LN_THETA_MAX),
    ]
}

struct Optimum {
    point: [f64; 2],
    value: f64,
    iterations: u64,
    gradient_norm: f64,
}

/// Damped-Newton maximization of the profile likelihood over the free
/// coordinates of `(p, ln θ)`, with finite-difference derivatives.
fn maximize_profile(
    stats: &SummaryStats,
    start: [f64; 2],
    free: [bool; 2],
) -> Result<Optimum> {
    let eval = |v: [f64; 2]| -> f64 {
        profile_objective(stats, v[0], v[1].exp()).unwrap_or(f64::NEG_INFINITY)
    };
    let h = 1e-5;
    let mut point = clamp_point(start);
    let mut value = eval(point);
    if !value.is_finite() {
        return Err(GigError::NoConvergence(format!(
            "profile likelihood not finite at start (p = {}, ln theta = {})",
            point[0], point[1]
        )));
    }
    let mut gradient_norm = f64::INFINITY;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        // Central-difference gradient on free coordinates.
        let mut grad = [0.0f64; 2];
        for i in 0..2 {
            if free[i] {
                let mut up = point;
                let mut dn = point;
                up[i] += h;
                dn[i] -= h;
                grad[i] = (eval(up) - eval(dn)) / (2.0 * h);
            }
        }
        gradient_norm = (grad[0] * grad[0] + grad[1] * grad[1]).sqrt();
        if gradient_norm <= GRAD_TOL {
            break;
        }
        // Finite-difference Hessian (free block only).
        let mut hess = [[0.0f64; 2]; 2];
        for i in 0..2 {
            if !free[i] {
                // Masked coordinates get a harmless negative-definite
                // block so the Newton test sees only the free part.
                hess[i][i] = -1.0;
                continue;
            }
            let mut up = point;
            let mut dn = point;
            up[i] += h;
            dn[i] -= h;
            hess[i][i] = (eval(up) - 2.0 * value + eval(dn)) / (h * h);
        }
        if free[0] && free[1] {
            let shift = |sp: f64, st: f64| {
                let mut v = point;
                v[0] += sp * h;
                v[1] += st * h;
                eval(v)
            };
            let cross = (shift(1.0, 1.0) - shift(1.0, -1.0) - shift(-1.0, 1.0)
                + shift(-1.0, -1.0))
                / (4.0 * h * h);
            hess[0][1] = cross;
            hess[1][0] = cross;
        }
        // Newton step -H⁻¹ g; fall back to steepest ascent when H is not
        // negative definite (we are maximizing).
        let det = hess[0][0] * hess[1][1] - hess[0][1] * hess[1][0];
        let newton_ok = hess[0][0] < 0.0 && det > 0.0;
        let mut step = if newton_ok {
            [
                -(hess[1][1] * grad[0] - hess[0][1] * grad[1]) / det,
                -(hess[0][0] * grad[1] - hess[1][0] * grad[0]) / det,
            ]
        } else {
            // Unit-length ascent direction; the line search scales it.
            [grad[0] / gradient_norm, grad[1] / gradient_norm]
        };
        for i in 0..2 {
            if !free[i] {
                step[i] = 0.0;
            }
        }
        let step_norm = (step[0] * step[0] + step[1] * step[1]).sqrt();
        if step_norm > 5.0 {
            step = [step[0] * 5.0 / step_norm, step[1] * 5.0 / step_norm];
        }
        // Backtracking line search.
        let mut t = 1.0;
        let mut advanced = false;
        for _ in 0..40 {
            let cand = clamp_point([point[0] + t * step[0], point[1] + t * step[1]]);
            let cand_value = eval(cand);
            if cand_value > value {
                point = cand;
                value = cand_value;
                advanced = true;
                break;
            }
            t *= 0.5;
        }
        if !advanced {
            // No ascent direction at line-search resolution: converged as
            // far as the surface allows.
            break;
        }
    }
    Ok(Optimum {
        point,
        value,
        iterations,
        gradient_norm,
    })
}

/// Moment-matched and spread-out starting points.
fn starting_points(stats: &SummaryStats, fixed_p: Option<f64>) -> Vec<[f64; 2]> {
    // ln X̄ - mean log ≈ 1/(2k) for Gamma(k); X̄·X̄₋₁ - 1 ≈ 1/θ for IG.
    let jensen_gap = (stats.mean.ln() - stats.log_mean).max(1e-6);
    let p0 = (0.5 / jensen_gap).clamp(-20.0, 20.0);
    let spread = (stats.mean * stats.inv_mean - 1.0).max(1e-6);
    let theta0 = (1.0 / spread).clamp(1e-3, 1e3);
    let lt0 = theta0.ln();
    match fixed_p {
        Some(p) => vec![[p, lt0], [p, lt0 + 1.5], [p, lt0 - 1.5], [p, 0.0]],
        None => vec![
            [p0, lt0],
            [-p0, lt0],
            [0.5, 0.0],
            [-0.5, 0.0],
            [p0, lt0 + 1.5],
            [p0, lt0 - 1.5],
        ],
    }
}

fn fit_profiled(stats: &SummaryStats, fixed_p: Option<f64>) -> Result<FitResult> {
    let free = [fixed_p.is_none(), true];
    let mut best: Option<Optimum> = None;
    let mut total_iterations = 0;
    for start in starting_points(stats, fixed_p) {
        let opt = maximize_profile(stats, start, free)?;
        total_iterations += opt.iterations;
        let better = match &best {
            None => true,
            // Ties within 1e-10 keep the earlier (lower-index) candidate.
            Some(b) => opt.value > b.value + 1e-10,
        };
        if better {
            best = Some(opt);
        }
    }
    let best = best.expect("at least one starting point");
    let interior_ll = stats.n as f64 * best.value;
    if best.point[1].exp() <= boundary_theta(stats.n) {
        if let Ok(boundary_fit) = fit_boundary(stats, fixed_p, &best) {
            if boundary_fit.log_likelihood >= interior_ll - BOUNDARY_LL_MARGIN {
                return Ok(boundary_fit);
            }
        }
    }
    if best.gradient_norm > GRAD_TOL {
        return Err(GigError::NoConvergence(format!(
            "gradient norm {:.3e} above {GRAD_TOL:.0e} after {} iterations at (p = {}, ln theta = {})",
            best.gradient_norm, best.iterations, best.point[0], best.point[1]
        )));
    }
    let (p, theta) = (best.point[0], best.point[1].exp());
    let eta = eta_mle(stats, p, theta)?.eta;
    let params = GigParams::from_theta_eta(p, theta, eta)?;
    Ok(FitResult {
        params: ParamsView::from(&params),
        log_likelihood: interior_ll,
        convergence: ConvergenceInfo {
            iterations: total_iterations,
            gradient_norm: best.gradient_norm,
        },
        standard_errors: observed_information_ses(stats, p, theta, eta, fixed_p.is_some()),
        boundary: None,
    })
}

/// `θ → 0` limit: refit on the Gamma (p > 0) or reciprocal-Gamma (p < 0)
/// sub-family and label the branch.
fn fit_boundary(stats: &SummaryStats, fixed_p: Option<f64>, best: &Optimum) -> Result<FitResult> {
    let p_near_boundary = best.point[0];
    let n = stats.n as f64;
    if p_near_boundary > 0.0 {
        // Gamma branch: X ~ Γ(shape, rate), shape p, rate a/2.
        let shape = match fixed_p {
            Some(p) => p,
            None => gamma_shape_mle(stats.mean.ln() - stats.log_mean)?,
        };
        let rate = shape / stats.mean;
        let params = GigParams::new(shape, 2.0 * rate, 0.0)?;
        let log_likelihood = n
            * (shape * rate.ln() - special::ln_gamma(shape)?
                + (shape - 1.0) * stats.log_mean
                - rate * stats.mean);
        Ok(FitResult {
            params: ParamsView::from(&params),
            log_likelihood,
            convergence: ConvergenceInfo {
                iterations: best.iterations,
                gradient_norm: 0.0,
            },
            standard_errors: None,
            boundary: Some("theta at the zero boundary; refit on the Gamma branch".into()),
        })
    } else {
        // Reciprocal-Gamma branch: 1/X ~ Γ(-p, b/2).
        let shape = match fixed_p {
            Some(p) => -p,
            None => gamma_shape_mle(stats.inv_mean.ln() + stats.log_mean)?,
        };
        if !(shape > 0.0) {
            return Err(GigError::NoConvergence(
                "theta at the zero boundary with p of ambiguous sign".into(),
            ));
        }
        let rate = shape / stats.inv_mean;
        let params = GigParams::new(-shape, 0.0, 2.0 * rate)?;
        let log_likelihood = n
            * (shape * rate.ln() - special::ln_gamma(shape)?
                - (shape + 1.0) * stats.log_mean
                - rate * stats.inv_mean);
        Ok(FitResult {
            params: ParamsView::from(&params),
            log_likelihood,
            convergence: ConvergenceInfo {
                iterations: best.iterations,
                gradient_norm: 0.0,
            },
            standard_errors: None,
            boundary: Some("theta at the zero boundary; refit on the reciprocal-Gamma branch".into()),
        })
    }
}

/// Solves `ln k - ψ(k) = gap` for the Gamma shape by Newton iteration.
fn gamma_shape_mle(gap: f64) -> Result<f64> {
    if !(gap > 0.0) || !gap.is_finite() {
        return Err(GigError::Sample(format!(
            "Jensen gap must be positive for a Gamma fit, got {gap}"
        )));
    }
    // Classical initializer (Minka): accurate to a few percent already.
    let mut k = (3.0 - gap + ((gap - 3.0) * (gap - 3.0) + 24.0 * gap).sqrt()) / (12.0 * gap);
    for _ in 0..60 {
        let f = k.ln() - special::digamma(k)? - gap;
        // d/dk (ln k - ψ(k)) = 1/k - ψ'(k), via central difference on ψ.
        let h = (k * 1e-6).max(1e-9);
        let dpsi = (special::digamma(k + h)? - special::digamma(k - h)?) / (2.0 * h);
        let deriv = 1.0 / k - dpsi;
        let step = f / deriv;
        let next = (k - step).max(k * 0.1);
        if (next - k).abs() <= 1e-12 * k.abs() {
            return Ok(next);
        }
        k = next;
    }
    Err(GigError::NoConvergence("Gamma shape iteration stalled".into()))
}

/// Standard errors from the observed information in `(p, ln θ, ln η)`
/// coordinates (the fixed-`p` variant drops the `p` row).
fn observed_information_ses(
    stats: &SummaryStats,
    p: f64,
    theta: f64,
    eta: f64,
    fixed_p: bool,
) -> Option<Vec<StandardError>> {
    let n = stats.n as f64;
    let eval = |v: [f64; 3]| -> f64 {
        mean_log_likelihood(stats, v[0], v[1].exp(), v[2].exp())
            .map(|l| n * l)
            .unwrap_or(f64::NAN)
    };
    let center = [p, theta.ln(), eta.ln()];
    let names = ["p", "log_theta", "log_eta"];
    let idx: Vec<usize> = if fixed_p { vec![1, 2] } else { vec![0, 1, 2] };
    let h = 1e-4;
    let k = idx.len();
    let mut info = vec![vec![0.0; k]; k];
    let f0 = eval(center);
    for (r, &i) in idx.iter().enumerate() {
        for (c, &j) in idx.iter().enumerate() {
            let second = if i == j {
                let mut up = center;
                let mut dn = center;
                up[i] += h;
                dn[i] -= h;
                (eval(up) - 2.0 * f0 + eval(dn)) / (h * h)
            } else {
                let mut pp = center;
                let mut pm = center;
                let mut mp = center;
                let mut mm = center;
                pp[i] += h;
                pp[j] += h;
                pm[i] += h;
                pm[j] -= h;
                mp[i] -= h;
                mp[j] += h;
                mm[i] -= h;
                mm[j] -= h;
                (eval(pp) - eval(pm) - eval(mp) + eval(mm)) / (4.0 * h * h)
            };
            info[r][c] = -second;
        }
    }
    let cov = invert_spd(&info)?;
    Some(
        idx.iter()
            .enumerate()
            .filter_map(|(r, &i)| {
                let var = cov[r][r];
                (var > 0.0).then(|| StandardError {
                    name: names[i],
                    value: var.sqrt(),
                })
            })
            .collect(),
    )
}

/// Inverse of a small symmetric positive-definite matrix via Cholesky;
/// `None` when not positive definite.
fn invert_spd(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let k = m.len();
    let mut chol = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..=i {
            let mut sum = m[i][j];
            for l in 0..j {
                sum -= chol[i][l] * chol[j][l];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return None;
                }
                chol[i][j] = sum.sqrt();
            } else {
                chol[i][j] = sum / chol[j][j];
            }
        }
    }
    // Invert L, then A⁻¹ = L⁻ᵀ L⁻¹.
    let mut inv_l = vec![vec![0.0; k]; k];
    for i in 0..k {
        inv_l[i][i] = 1.0 / chol[i][i];
        for j in 0..i {
            let mut sum = 0.0;
            for l in j..i {
                sum -= chol[i][l] * inv_l[l][j];
            }
            inv_l[i][j] = sum / chol[i][i];
        }
    }
    let mut out = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            let mut sum = 0.0;
            for l in i.max(j)..k {
                sum += inv_l[l][i] * inv_l[l][j];
            }
            out[i][j] = sum;
        }
    }
    Some(out)
}
