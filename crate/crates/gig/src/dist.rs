//! Density, distribution function, quantiles, moments, entropy, and the
//! scale score of the GIG family, across all three branches.
//!
//! No closed-form CDF exists on the full branch; `cdf` integrates the
//! density adaptively, splitting at the mean so neither piece spans the
//! whole mass. The boundary branches delegate to regularized incomplete
//! gamma functions.

use crate::error::{GigError, Result};
use crate::params::{Branch, GigParams};
use crate::quad;
use crate::special::{self, BesselEvalConfig};

const CDF_REL_TOL: f64 = 1e-12;
const CDF_MAX_SUBDIV: usize = 4000;

/// Natural log of the normalizing integral
/// `∫_0^∞ x^{p-1} exp(-(a x + b/x)/2) dx`.
fn ln_norm(params: &GigParams) -> Result<f64> {
    match params.branch() {
        Branch::Full => Ok(std::f64::consts::LN_2
            + params.p() * params.eta().ln()
            + special::ln_bessel_k(params.p(), params.theta())?),
        Branch::Gamma => {
            let rate = 0.5 * params.a();
            Ok(special::ln_gamma(params.p())? - params.p() * rate.ln())
        }
        Branch::ReciprocalGamma => {
            let rate = 0.5 * params.b();
            Ok(special::ln_gamma(-params.p())? + params.p() * rate.ln())
        }
    }
}

/// Precomputed density evaluator for tight loops; the normalizing constant
/// is resolved once at construction.
#[derive(Debug, Clone, Copy)]
pub struct DensityFn {
    p: f64,
    a: f64,
    b: f64,
    ln_norm: f64,
}

impl DensityFn {
    pub fn new(params: &GigParams) -> Result<Self> {
        Ok(Self {
            p: params.p(),
            a: params.a(),
            b: params.b(),
            ln_norm: ln_norm(params)?,
        })
    }

    /// Log-density; `-inf` for `x <= 0`.
    pub fn ln_at(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        (self.p - 1.0) * x.ln() - 0.5 * (self.a * x + self.b / x) - self.ln_norm
    }

    /// Density; `0` for `x <= 0`.
    pub fn at(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        self.ln_at(x).exp()
    }
}

fn require_positive(x: f64, what: &str) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(GigError::Domain(format!(
            "{what} must be positive and finite, got {x}"
        )));
    }
    Ok(())
}

/// `f_{p,a,b}(x)`.
pub fn density(params: &GigParams, x: f64) -> Result<f64> {
    require_positive(x, "evaluation point x")?;
    Ok(DensityFn::new(params)?.at(x))
}

/// `ln f_{p,a,b}(x)`.
pub fn log_density(params: &GigParams, x: f64) -> Result<f64> {
    require_positive(x, "evaluation point x")?;
    Ok(DensityFn::new(params)?.ln_at(x))
}

/// The `(p, θ, η)` form of the density, computed literally from its own
/// formula `f(x) = (x/η)^{p-1} e^{-θ(x/η + η/x)/2} / (2 η K_p(θ))`.
pub fn density_theta_eta(p: f64, theta: f64, eta: f64, x: f64) -> Result<f64> {
    require_positive(x, "evaluation point x")?;
    GigParams::from_theta_eta(p, theta, eta)?; // parameter validation only
    let ln_k = special::ln_bessel_k(p, theta)?;
    let z = x / eta;
    let ln_f =
        -(2.0f64).ln() - eta.ln() - ln_k + (p - 1.0) * z.ln() - 0.5 * theta * (z + 1.0 / z);
    Ok(ln_f.exp())
}

/// `F_{p,a,b}(x) = P(X <= x)`.
pub fn cdf(params: &GigParams, x: f64) -> Result<f64> {
    require_positive(x, "evaluation point x")?;
    match params.branch() {
        Branch::Gamma => special::regularized_lower_gamma(params.p(), 0.5 * params.a() * x),
        Branch::ReciprocalGamma => Ok(1.0
            - special::regularized_lower_gamma(-params.p(), 0.5 * params.b() / x)?),
        Branch::Full => {
            let f = DensityFn::new(params)?;
            let split = mean(params)?;
            let value = if x <= split {
                quad::integrate(|t| f.at(t), 0.0, x, CDF_REL_TOL, 1e-15, CDF_MAX_SUBDIV)?.value
            } else {
                1.0 - quad::integrate_upper_tail(
                    |t| f.at(t),
                    x,
                    CDF_REL_TOL,
                    1e-15,
                    CDF_MAX_SUBDIV,
                )?
                .value
            };
            Ok(value.clamp(0.0, 1.0))
        }
    }
}

/// CDF at every point of an ascending positive sequence, integrating each
/// panel between consecutive points once instead of restarting from zero.
pub fn cdf_sorted(params: &GigParams, xs: &[f64]) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Ok(Vec::new());
    }
    if xs.windows(2).any(|w| w[0] > w[1]) {
        return Err(GigError::Domain("points must be sorted ascending".into()));
    }
    match params.branch() {
        Branch::Gamma | Branch::ReciprocalGamma => {
            xs.iter().map(|&x| cdf(params, x)).collect()
        }
        Branch::Full => {
            require_positive(xs[0], "evaluation point x")?;
            let f = DensityFn::new(params)?;
            let mut out = Vec::with_capacity(xs.len());
            let mut acc = cdf(params, xs[0])?;
            out.push(acc);
            for w in xs.windows(2) {
                if w[1] > w[0] {
                    acc += quad::integrate(|t| f.at(t), w[0], w[1], 1e-10, 1e-14, 400)?.value;
                }
                out.push(acc.clamp(0.0, 1.0));
            }
            Ok(out)
        }
    }
}

/// `F^{-1}(q)` for `q` strictly inside `(0, 1)`, by safeguarded
/// bisection/Newton on the CDF.
pub fn quantile(params: &GigParams, q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(GigError::Domain(format!(
            "quantile level must lie strictly in (0, 1), got {q}"
        )));
    }
    let f = DensityFn::new(params)?;
    // Bracket the root: cdf(0+) = 0 < q, expand upward until cdf >= q.
    let mut lo = 0.0;
    let mut hi = mode(params).max(1e-8);
    let mut expansions = 0;
    while cdf(params, hi)? < q {
        hi *= 4.0;
        expansions += 1;
        if expansions > 500 {
            return Err(GigError::TailTruncation(format!(
                "quantile bracket for q = {q} exceeded f64 range"
            )));
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let gap = cdf(params, x)? - q;
        if gap.abs() <= 1e-12 {
            break;
        }
        if gap > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let density_x = f.at(x);
        let newton = if density_x > 0.0 {
            x - gap / density_x
        } else {
            f64::NAN
        };
        x = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(x)
}

/// `E[X^r]` for real `r`; errors when the moment diverges on a boundary
/// branch.
pub fn moment(params: &GigParams, r: f64) -> Result<f64> {
    if !r.is_finite() {
        return Err(GigError::Domain(format!("moment order must be finite, got {r}")));
    }
    if r == 0.0 {
        return Ok(1.0);
    }
    match params.branch() {
        Branch::Full => {
            let theta = params.theta();
            let ln_ratio =
                special::ln_bessel_k(params.p() + r, theta)? - special::ln_bessel_k(params.p(), theta)?;
            Ok((r * params.eta().ln() + ln_ratio).exp())
        }
        Branch::Gamma => {
            let p = params.p();
            if r <= -p {
                return Err(GigError::NonfiniteMoment(format!(
                    "E[X^{r}] diverges for the Gamma branch with p = {p}"
                )));
            }
            let rate = 0.5 * params.a();
            Ok((special::ln_gamma(p + r)? - special::ln_gamma(p)? - r * rate.ln()).exp())
        }
        Branch::ReciprocalGamma => {
            let alpha = -params.p();
            if r >= alpha {
                return Err(GigError::NonfiniteMoment(format!(
                    "E[X^{r}] diverges for the reciprocal-Gamma branch with p = {}",
                    params.p()
                )));
            }
            let rate = 0.5 * params.b();
            Ok((special::ln_gamma(alpha - r)? - special::ln_gamma(alpha)? + r * rate.ln()).exp())
        }
    }
}

/// `E[X]`.
pub fn mean(params: &GigParams) -> Result<f64> {
    moment(params, 1.0)
}

/// `Var[X]`.
pub fn variance(params: &GigParams) -> Result<f64> {
    let m1 = moment(params, 1.0)?;
    let m2 = moment(params, 2.0)?;
    Ok(m2 - m1 * m1)
}

/// `E[ln X]`.
pub fn log_moment(params: &GigParams) -> Result<f64> {
    match params.branch() {
        Branch::Full => {
            let cfg = BesselEvalConfig::default();
            Ok(params.eta().ln()
                + special::bessel_k_dlog_dorder(params.p(), params.theta(), &cfg)?)
        }
        Branch::Gamma => Ok(special::digamma(params.p())? - (0.5 * params.a()).ln()),
        Branch::ReciprocalGamma => {
            Ok((0.5 * params.b()).ln() - special::digamma(-params.p())?)
        }
    }
}

/// Differential entropy `H(X) = -E[ln f(X)]`.
///
/// On the full branch this is the closed form obtained by integrating
/// `-ln f` against `f` using the two max-entropy constraint functionals:
/// `H = ln(2 η K_p(θ)) - (p-1) ∂_p ln K_p(θ) + (θ/2) (K_{p+1}+K_{p-1})/K_p`.
pub fn entropy(params: &GigParams) -> Result<f64> {
    match params.branch() {
        Branch::Full => {
            let p = params.p();
            let theta = params.theta();
            let cfg = BesselEvalConfig::default();
            let dlog = special::bessel_k_dlog_dorder(p, theta, &cfg)?;
            // K_{p+1}/K_p + K_{p-1}/K_p, the second via order symmetry.
            let ratio_sum =
                special::bessel_k_ratio(p, theta)? + special::bessel_k_ratio(-p, theta)?;
            let ln_2_eta_k = (2.0f64).ln() + params.eta().ln() + special::ln_bessel_k(p, theta)?;
            Ok(ln_2_eta_k - (p - 1.0) * dlog + 0.5 * theta * ratio_sum)
        }
        Branch::Gamma => {
            let p = params.p();
            let rate = 0.5 * params.a();
            Ok(p - rate.ln() + special::ln_gamma(p)? + (1.0 - p) * special::digamma(p)?)
        }
        Branch::ReciprocalGamma => {
            // X = 1/Y with Y ~ Gamma(alpha, rate): H(X) = H(Y) - 2 E[ln Y].
            let alpha = -params.p();
            let rate = 0.5 * params.b();
            Ok(alpha + rate.ln() + special::ln_gamma(alpha)?
                - (1.0 + alpha) * special::digamma(alpha)?)
        }
    }
}

/// The density's unique mode.
pub fn mode(params: &GigParams) -> f64 {
    let p = params.p();
    let a = params.a();
    let b = params.b();
    if a > 0.0 {
        // Root of (p-1) x - (a/2) x^2 + b/2 = 0; for b = 0 this collapses to
        // the Gamma mode max(0, (p-1)/(a/2)).
        (p - 1.0 + ((p - 1.0) * (p - 1.0) + a * b).sqrt()).max(0.0) / a
    } else {
        0.5 * b / (1.0 - p)
    }
}

/// Scale score `ψ(x) = p - (θ/2) x + θ/(2x)` of the standardized density;
/// strictly decreasing and onto the whole line.
pub fn scale_score(p: f64, theta: f64, x: f64) -> Result<f64> {
    require_positive(theta, "theta")?;
    require_positive(x, "evaluation point x")?;
    Ok(p - 0.5 * theta * x + 0.5 * theta / x)
}
