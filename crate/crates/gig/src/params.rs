//! Validated parameter sets for the three-parameter GIG family.

use std::fmt;

use crate::error::{GigError, Result};

/// Which member of the family a parameter set selects.
///
/// The full branch has both exponential-tilt parameters positive. Letting
/// `b -> 0` (with `p > 0`) degenerates to a Gamma law, `a -> 0` (with
/// `p < 0`) to a reciprocal Gamma law.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Full,
    Gamma,
    ReciprocalGamma,
}

/// Parameters `(p, a, b)` of `GIG(p, a, b)`, density proportional to
/// `x^{p-1} exp(-(a x + b / x) / 2)` on `(0, ∞)`.
///
/// Invariants enforced at construction: all finite, `a >= 0`, `b >= 0`,
/// `a + b > 0`, `p > 0` when `b = 0`, and `p < 0` when `a = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GigParams {
    p: f64,
    a: f64,
    b: f64,
}

impl GigParams {
    pub fn new(p: f64, a: f64, b: f64) -> Result<Self> {
        if !p.is_finite() || !a.is_finite() || !b.is_finite() {
            return Err(GigError::InvalidParams(format!(
                "parameters must be finite, got p = {p}, a = {a}, b = {b}"
            )));
        }
        if a < 0.0 || b < 0.0 {
            return Err(GigError::InvalidParams(format!(
                "need a >= 0 and b >= 0, got a = {a}, b = {b}"
            )));
        }
        if a == 0.0 && b == 0.0 {
            return Err(GigError::InvalidParams(
                "a and b cannot both be zero".into(),
            ));
        }
        if b == 0.0 && p <= 0.0 {
            return Err(GigError::InvalidParams(format!(
                "the Gamma branch (b = 0) requires p > 0, got p = {p}"
            )));
        }
        if a == 0.0 && p >= 0.0 {
            return Err(GigError::InvalidParams(format!(
                "the reciprocal-Gamma branch (a = 0) requires p < 0, got p = {p}"
            )));
        }
        Ok(Self { p, a, b })
    }

    /// Full-branch construction from the concentration/scale form:
    /// `theta = sqrt(a b)`, `eta = sqrt(b / a)`.
    pub fn from_theta_eta(p: f64, theta: f64, eta: f64) -> Result<Self> {
        if !(theta > 0.0) || !(eta > 0.0) || !theta.is_finite() || !eta.is_finite() {
            return Err(GigError::InvalidParams(format!(
                "need theta > 0 and eta > 0, got theta = {theta}, eta = {eta}"
            )));
        }
        Self::new(p, theta / eta, theta * eta)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn branch(&self) -> Branch {
        if self.b == 0.0 {
            Branch::Gamma
        } else if self.a == 0.0 {
            Branch::ReciprocalGamma
        } else {
            Branch::Full
        }
    }

    /// Concentration `theta = sqrt(a b)`; zero on the boundary branches.
    pub fn theta(&self) -> f64 {
        (self.a * self.b).sqrt()
    }

    /// Scale `eta = sqrt(b / a)`; `0` on the Gamma branch and `+inf` on the
    /// reciprocal-Gamma branch.
    pub fn eta(&self) -> f64 {
        (self.b / self.a).sqrt()
    }

    /// Parameters of `1/X` when `X` has these parameters:
    /// `GIG(p, a, b)` maps to `GIG(-p, b, a)`. Closed under all branches.
    pub fn reciprocal(&self) -> Self {
        Self {
            p: -self.p,
            a: self.b,
            b: self.a,
        }
    }

    /// Parameters of `c X` for `c > 0`: `GIG(p, a / c, b c)`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(GigError::InvalidParams(format!(
                "scale factor must be positive and finite, got {c}"
            )));
        }
        Self::new(self.p, self.a / c, self.b * c)
    }
}

impl fmt::Display for GigParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GIG(p = {}, a = {}, b = {})", self.p, self.a, self.b)
    }
}

/// Shape/rate parameters of a Gamma law, density proportional to
/// `x^{shape-1} exp(-rate x)`. The boundary notation `Γ(p, a/2) =
/// GIG(p, a, 0)` means shape `p`, rate `a/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaParams {
    shape: f64,
    rate: f64,
}

impl GammaParams {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0) || !shape.is_finite() || !(rate > 0.0) || !rate.is_finite() {
            return Err(GigError::InvalidParams(format!(
                "Gamma needs shape > 0 and rate > 0, got shape = {shape}, rate = {rate}"
            )));
        }
        Ok(Self { shape, rate })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }
}

impl fmt::Display for GammaParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Gamma(shape = {}, rate = {})", self.shape, self.rate)
    }
}

impl TryFrom<GigParams> for GammaParams {
    type Error = GigError;

    /// The Gamma-branch reading `GIG(p, a, 0) = Γ(p, a/2)`.
    fn try_from(params: GigParams) -> Result<Self> {
        if params.branch() != Branch::Gamma {
            return Err(GigError::InvalidParams(format!(
                "{params} is not on the Gamma branch"
            )));
        }
        Self::new(params.p(), 0.5 * params.a())
    }
}
