//! Special functions: modified Bessel function of the second kind with real
//! order, log-gamma, digamma, and the regularized incomplete gamma function.
//!
//! `K_p(z)` is evaluated by the classic two-regime scheme: a Temme series for
//! small arguments (`z <= 2`) and a Steed continued fraction for large ones,
//! both at a reduced order `|u| <= 1/2`, followed by upward recurrence in the
//! order. Upward recurrence is stable for `K` because `K_p` is the dominant
//! solution of the three-term recurrence as the order grows. Intermediate
//! magnitudes are carried as `(fraction, ln_scale)` pairs so the recurrence
//! never overflows; only the final packaging into an `f64` can fail.
//!
//! The [`oracle`] submodule evaluates the same function through an adaptive
//! quadrature of the integral representation
//! `K_p(z) = 2^{-p-1} z^p ∫_0^∞ x^{-p-1} exp(-x - z^2/(4x)) dx`,
//! sharing no code with the production path. Tests pin the two against each
//! other.

use std::f64::consts::PI;

use crate::error::{GigError, Result};

const MAX_ITER: usize = 2000;

/// Largest `ln K` representable before `exp` overflows an `f64`.
const LN_F64_MAX: f64 = 709.782712893384;
/// Smallest `ln K` representable before `exp` underflows to subnormals.
const LN_F64_MIN_NORMAL: f64 = -708.396418532264;

/// Rescaling threshold for the scaled recurrence.
const RESCALE: f64 = 1e280;

/// Tuning knobs for Bessel evaluation.
#[derive(Debug, Clone, Copy)]
pub struct BesselEvalConfig {
    /// Target relative error of the returned value.
    pub rel_tolerance: f64,
    /// Node budget for the integral-representation oracle; at least 64.
    pub quadrature_max_nodes: usize,
    /// Base step for the numerical order derivative, scaled by `max(1, |p|)`.
    pub order_derivative_step: f64,
}

impl Default for BesselEvalConfig {
    fn default() -> Self {
        Self {
            rel_tolerance: 1e-12,
            quadrature_max_nodes: 4000,
            order_derivative_step: 1e-5,
        }
    }
}

impl BesselEvalConfig {
    fn validate(&self) -> Result<()> {
        if !(self.rel_tolerance > 0.0) {
            return Err(GigError::Config(format!(
                "rel_tolerance must be positive, got {}",
                self.rel_tolerance
            )));
        }
        if self.quadrature_max_nodes < 64 {
            return Err(GigError::Config(format!(
                "quadrature_max_nodes must be at least 64, got {}",
                self.quadrature_max_nodes
            )));
        }
        if !(self.order_derivative_step > 0.0) {
            return Err(GigError::Config(format!(
                "order_derivative_step must be positive, got {}",
                self.order_derivative_step
            )));
        }
        Ok(())
    }
}

/// A Bessel evaluation together with its internal error estimate.
#[derive(Debug, Clone, Copy)]
pub struct BesselValue {
    /// Order `p` the value was requested at.
    pub order: f64,
    /// Argument `z > 0`.
    pub argument: f64,
    pub value: f64,
    /// Estimated absolute error of `value`.
    pub estimated_error: f64,
}

/// Clenshaw evaluation of a Chebyshev series on [-1, 1].
fn chebev(coeffs: &[f64], x: f64) -> f64 {
    let mut d = 0.0;
    let mut dd = 0.0;
    let x2 = 2.0 * x;
    for &c in coeffs.iter().skip(1).rev() {
        let sv = d;
        d = x2 * d - dd + c;
        dd = sv;
    }
    x * d - dd + 0.5 * coeffs[0]
}

/// Chebyshev fits of Temme's auxiliary functions
/// `Γ₁(u) = [1/Γ(1-u) - 1/Γ(1+u)]/(2u)` and `Γ₂(u) = [1/Γ(1-u) + 1/Γ(1+u)]/2`
/// for `|u| <= 1/2`, plus the reciprocal gammas recovered from them.
fn temme_gammas(u: f64) -> (f64, f64, f64, f64) {
    const C1: [f64; 7] = [
        -1.142022680371168,
        6.5165112670737e-3,
        3.087090173086e-4,
        -3.4706269649e-6,
        6.9437664e-9,
        3.67795e-11,
        -1.356e-13,
    ];
    const C2: [f64; 8] = [
        1.843740587300905,
        -7.68528408447867e-2,
        1.2719271366546e-3,
        -4.9717367042e-6,
        -3.31261198e-8,
        2.423096e-10,
        -1.702e-13,
        -1.49e-15,
    ];
    let xx = 8.0 * u * u - 1.0;
    let gam1 = chebev(&C1, xx);
    let gam2 = chebev(&C2, xx);
    let recip_gam_plus = gam2 - u * gam1; // 1/Γ(1+u)
    let recip_gam_minus = gam2 + u * gam1; // 1/Γ(1-u)
    (gam1, gam2, recip_gam_plus, recip_gam_minus)
}

/// Temme's series for `(K_u(x), K_{u+1}(x))`, valid for `|u| <= 1/2`, `x <= 2`.
fn temme_k(u: f64, x: f64) -> Result<(f64, f64)> {
    let half_x = 0.5 * x;
    let pi_u = PI * u;
    let fact = if pi_u.abs() < f64::EPSILON {
        1.0
    } else {
        pi_u / pi_u.sin()
    };
    let mut d = -half_x.ln();
    let e = u * d;
    let fact2 = if e.abs() < f64::EPSILON {
        1.0
    } else {
        e.sinh() / e
    };
    let (gam1, gam2, recip_gam_plus, recip_gam_minus) = temme_gammas(u);
    let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
    let mut sum = ff;
    let e_exp = e.exp();
    let mut p = 0.5 * e_exp / recip_gam_plus;
    let mut q = 0.5 / (e_exp * recip_gam_minus);
    let mut c = 1.0;
    d = half_x * half_x;
    let mut sum1 = p;
    for i in 1..=MAX_ITER {
        let fi = i as f64;
        ff = (fi * ff + p + q) / (fi * fi - u * u);
        c *= d / fi;
        p /= fi - u;
        q /= fi + u;
        let del = c * ff;
        sum += del;
        sum1 += c * (p - fi * ff);
        if del.abs() < sum.abs() * f64::EPSILON {
            return Ok((sum, sum1 * 2.0 / x));
        }
    }
    Err(GigError::NoConvergence(format!(
        "Temme series for K_u({x}) stalled at u = {u}"
    )))
}

/// Steed's continued fraction CF2 for `(K_u(x) e^x, K_{u+1}(x) e^x)`,
/// valid for `|u| <= 1/2`, `x > 2`.
fn cf2_k_scaled(u: f64, x: f64) -> Result<(f64, f64)> {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25 - u * u;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    let mut converged = false;
    for i in 2..=MAX_ITER {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (a * d + b);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() <= f64::EPSILON {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(GigError::NoConvergence(format!(
            "continued fraction for K_u({x}) stalled at u = {u}"
        )));
    }
    let h = a1 * h;
    let k_u = (PI / (2.0 * x)).sqrt() / s;
    let k_u1 = k_u * (u + x + 0.5 - h) / x;
    Ok((k_u, k_u1))
}

/// Scaled pair `(K_v(x), K_{v+1}(x))` for `v >= -1/2` as
/// `(fraction_lo, fraction_hi, ln_scale, recurrence_steps)` with
/// `K = fraction * exp(ln_scale)`.
fn kv_pair(v: f64, x: f64) -> Result<(f64, f64, f64, usize)> {
    debug_assert!(v >= -0.5);
    let steps = ((v + 0.5).floor() as i64).max(0) as usize;
    let u = v - steps as f64;
    let (mut f_lo, mut f_hi, mut ln_scale) = if x <= 2.0 {
        let (lo, hi) = temme_k(u, x)?;
        (lo, hi, 0.0)
    } else {
        let (lo, hi) = cf2_k_scaled(u, x)?;
        (lo, hi, -x)
    };
    let two_over_x = 2.0 / x;
    let mut mu = u;
    for _ in 0..steps {
        let next = f_lo + (mu + 1.0) * two_over_x * f_hi;
        f_lo = f_hi;
        f_hi = next;
        mu += 1.0;
        if f_hi > RESCALE {
            f_lo /= RESCALE;
            f_hi /= RESCALE;
            ln_scale += RESCALE.ln();
        }
    }
    Ok((f_lo, f_hi, ln_scale, steps))
}

fn validate_order_argument(order: f64, argument: f64) -> Result<()> {
    if !order.is_finite() {
        return Err(GigError::Domain(format!("Bessel order must be finite, got {order}")));
    }
    if !(argument > 0.0) || !argument.is_finite() {
        return Err(GigError::Domain(format!(
            "Bessel argument must be positive and finite, got {argument}"
        )));
    }
    Ok(())
}

/// `K_p(z)` with an error estimate.
///
/// `K_{-p} = K_p`, so only `|p|` matters. Fails with
/// [`GigError::ScaledRepr`] when the result overflows or underflows an
/// `f64`; use [`ln_bessel_k`] in that regime.
pub fn bessel_k(order: f64, argument: f64, config: &BesselEvalConfig) -> Result<BesselValue> {
    config.validate()?;
    validate_order_argument(order, argument)?;
    let (f_lo, _, ln_scale, steps) = kv_pair(order.abs(), argument)?;
    let ln_value = f_lo.ln() + ln_scale;
    if ln_value > LN_F64_MAX {
        return Err(GigError::ScaledRepr(format!(
            "K_{order}({argument}) overflows f64 (ln K = {ln_value:.3}); use ln_bessel_k"
        )));
    }
    if ln_value < LN_F64_MIN_NORMAL {
        return Err(GigError::ScaledRepr(format!(
            "K_{order}({argument}) underflows f64 (ln K = {ln_value:.3}); use ln_bessel_k"
        )));
    }
    let value = if ln_scale == 0.0 {
        f_lo
    } else {
        f_lo * ln_scale.exp()
    };
    let rel = f64::EPSILON * (8.0 + steps as f64);
    if rel > config.rel_tolerance {
        return Err(GigError::NoConvergence(format!(
            "cannot meet rel_tolerance {:.3e} for K_{order}({argument}); achievable ~{rel:.3e}",
            config.rel_tolerance
        )));
    }
    Ok(BesselValue {
        order,
        argument,
        value,
        estimated_error: value.abs() * rel,
    })
}

/// `ln K_p(z)`, finite wherever `K_p(z)` is defined.
pub fn ln_bessel_k(order: f64, argument: f64) -> Result<f64> {
    validate_order_argument(order, argument)?;
    let (f_lo, _, ln_scale, _) = kv_pair(order.abs(), argument)?;
    Ok(f_lo.ln() + ln_scale)
}

/// The ratio `K_{p+1}(z) / K_p(z)`, computed without forming either value,
/// so it stays finite across the representable range.
pub fn bessel_k_ratio(order: f64, argument: f64) -> Result<f64> {
    validate_order_argument(order, argument)?;
    if order >= -0.5 {
        let (f_lo, f_hi, _, _) = kv_pair(order, argument)?;
        Ok(f_hi / f_lo)
    } else {
        // K_{p+1}/K_p = K_{-p-1}/K_{-p} with -p-1 >= -1/2.
        let (f_lo, f_hi, _, _) = kv_pair(-order - 1.0, argument)?;
        Ok(f_lo / f_hi)
    }
}

/// `∂/∂p ln K_p(z)` by Richardson-extrapolated central differences.
///
/// The step is `config.order_derivative_step * max(1, |p|)`. Because the
/// evaluation depends on the order only through `|p|`, the result is exactly
/// antisymmetric in `p` and exactly zero at `p = 0`.
pub fn bessel_k_dlog_dorder(order: f64, argument: f64, config: &BesselEvalConfig) -> Result<f64> {
    config.validate()?;
    validate_order_argument(order, argument)?;
    let h = config.order_derivative_step * order.abs().max(1.0);
    if !(h > 0.0) || order + h == order || order - h == order {
        return Err(GigError::DerivativeStep(format!(
            "order-derivative step {h:.3e} vanishes at order {order}"
        )));
    }
    let diff = |step: f64| -> Result<f64> {
        let hi = ln_bessel_k(order + step, argument)?;
        let lo = ln_bessel_k(order - step, argument)?;
        Ok((hi - lo) / (2.0 * step))
    };
    let coarse = diff(h)?;
    let fine = diff(0.5 * h)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Independent evaluation of `K_p(z)` through its integral representation.
pub mod oracle {
    use super::*;
    use crate::quad;

    /// `ln K_p(z)` by adaptive quadrature of
    /// `K_p(z) = 2^{-p-1} z^p ∫_0^∞ x^{-p-1} exp(-x - z²/(4x)) dx`.
    ///
    /// The substitution `x = e^t` turns the integrand into
    /// `exp(g(t))` with `g(t) = -p t - e^t - (z²/4) e^{-t}`, a smooth
    /// single-peaked function on the whole line; the peak value is factored
    /// out before integrating so the quadrature works near unit scale.
    pub fn ln_bessel_k_integral(
        order: f64,
        argument: f64,
        config: &BesselEvalConfig,
    ) -> Result<f64> {
        config.validate()?;
        validate_order_argument(order, argument)?;
        let p = order;
        let z = argument;
        let q = 0.25 * z * z;
        // Stationary point of g: e^t = (-p + sqrt(p² + z²)) / 2.
        let y_star = 0.5 * (-p + p.hypot(z));
        let t_star = y_star.ln();
        let g = move |t: f64| -p * t - t.exp() - q * (-t).exp();
        let g_peak = g(t_star);
        let integrand = move |t: f64| (g(t) - g_peak).exp();
        // g decays at least exponentially on both sides; ±45 units around the
        // peak put the integrand far below f64 underflow.
        let half_width = 45.0 + p.abs().max(1.0).ln();
        let r = quad::integrate(
            integrand,
            t_star - half_width,
            t_star + half_width,
            config.rel_tolerance.max(1e-14),
            0.0,
            config.quadrature_max_nodes,
        )?;
        Ok(-(p + 1.0) * std::f64::consts::LN_2 + p * z.ln() + g_peak + r.value.ln())
    }

    /// `K_p(z)` by adaptive quadrature; errors on f64 overflow/underflow.
    pub fn bessel_k_integral(
        order: f64,
        argument: f64,
        config: &BesselEvalConfig,
    ) -> Result<BesselValue> {
        let ln_value = ln_bessel_k_integral(order, argument, config)?;
        if ln_value > LN_F64_MAX || ln_value < LN_F64_MIN_NORMAL {
            return Err(GigError::ScaledRepr(format!(
                "K_{order}({argument}) is not representable as f64 (ln K = {ln_value:.3})"
            )));
        }
        let value = ln_value.exp();
        Ok(BesselValue {
            order,
            argument,
            value,
            estimated_error: value * config.rel_tolerance,
        })
    }
}

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> Result<f64> {
    const COEFFS: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if !(x > 0.0) || !x.is_finite() {
        return Err(GigError::Domain(format!(
            "ln_gamma requires x > 0, got {x}"
        )));
    }
    if x < 0.5 {
        // Reflection keeps the Lanczos sum in its accurate range.
        return Ok((PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x)?);
    }
    let xm1 = x - 1.0;
    let mut acc = 0.99999999999980993;
    for (i, &c) in COEFFS.iter().enumerate() {
        acc += c / (xm1 + (i + 1) as f64);
    }
    let t = xm1 + 7.5;
    Ok(0.5 * (2.0 * PI).ln() + (xm1 + 0.5) * t.ln() - t + acc.ln())
}

/// Digamma `ψ(x)` for `x > 0`.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(GigError::Domain(format!("digamma requires x > 0, got {x}")));
    }
    let mut shift = 0.0;
    let mut y = x;
    while y < 10.0 {
        shift -= 1.0 / y;
        y += 1.0;
    }
    let inv = 1.0 / y;
    let inv2 = inv * inv;
    // Asymptotic expansion, accurate to ~1e-16 for y >= 10.
    let tail = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0))));
    Ok(shift + y.ln() - 0.5 * inv - tail)
}

/// Regularized lower incomplete gamma `P(s, x) = γ(s, x) / Γ(s)`.
pub fn regularized_lower_gamma(s: f64, x: f64) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(GigError::Domain(format!(
            "incomplete gamma requires shape > 0, got {s}"
        )));
    }
    if !(x >= 0.0) || !x.is_finite() {
        return Err(GigError::Domain(format!(
            "incomplete gamma requires x >= 0, got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let ln_prefactor = s * x.ln() - x - ln_gamma(s)?;
    if x < s + 1.0 {
        // Series for P.
        let mut ap = s;
        let mut term = 1.0 / s;
        let mut sum = term;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * f64::EPSILON {
                return Ok((sum * ln_prefactor.exp()).min(1.0));
            }
        }
        Err(GigError::NoConvergence(format!(
            "incomplete gamma series stalled at s = {s}, x = {x}"
        )))
    } else {
        // Lentz continued fraction for Q.
        const FPMIN: f64 = f64::MIN_POSITIVE / f64::EPSILON;
        let mut b = x + 1.0 - s;
        let mut c = 1.0 / FPMIN;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=MAX_ITER {
            let an = -(i as f64) * (i as f64 - s);
            b += 2.0;
            d = an * d + b;
            if d.abs() < FPMIN {
                d = FPMIN;
            }
            c = b + an / c;
            if c.abs() < FPMIN {
                c = FPMIN;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() <= f64::EPSILON {
                return Ok((1.0 - ln_prefactor.exp() * h).clamp(0.0, 1.0));
            }
        }
        Err(GigError::NoConvergence(format!(
            "incomplete gamma continued fraction stalled at s = {s}, x = {x}"
        )))
    }
}
