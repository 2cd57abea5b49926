//! Adaptive Gauss-Kronrod quadrature.
//!
//! A 15-point Kronrod rule with its embedded 7-point Gauss rule drives a
//! worst-interval-first bisection loop. Semi-infinite integrals are mapped
//! to (0,1) with the rational substitution `x = a + t/(1-t)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{GigError, Result};

/// Abscissae of the 15-point Kronrod rule on [-1, 1], positive half.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_2,
    0.949_107_912_342_758_524_5,
    0.864_864_423_359_769_072_8,
    0.741_531_185_599_394_439_9,
    0.586_087_235_467_691_130_3,
    0.405_845_151_377_397_166_9,
    0.207_784_955_007_898_467_6,
    0.0,
];

/// Kronrod weights matching [`XGK`].
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_96,
    0.063_092_092_629_978_553_29,
    0.104_790_010_322_250_183_8,
    0.140_653_259_715_525_918_7,
    0.169_004_726_639_267_902_8,
    0.190_350_578_064_785_409_9,
    0.204_432_940_075_298_892_4,
    0.209_482_141_084_727_828_0,
];

/// Weights of the embedded 7-point Gauss rule (odd Kronrod abscissae).
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_3,
    0.279_705_391_489_276_667_9,
    0.381_830_050_505_118_944_9,
    0.417_959_183_673_469_387_8,
];

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    /// Integral estimate.
    pub value: f64,
    /// Estimated absolute error.
    pub abs_error: f64,
    /// Number of integrand evaluations.
    pub evaluations: usize,
    /// Number of subintervals in the final partition.
    pub subdivisions: usize,
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// One Gauss-Kronrod 15/7 pass over [a, b]. Returns (estimate, error estimate).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let f_center = f(center);
    let mut kronrod = f_center * WGK[7];
    let mut gauss = f_center * WG[3];
    let mut res_abs = kronrod.abs();

    let mut fv = [0.0f64; 15];
    fv[7] = f_center;

    for j in 0..7 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv[j] = f1;
        fv[14 - j] = f2;
        let sum = f1 + f2;
        kronrod += WGK[j] * sum;
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * sum;
        }
    }

    let mean = kronrod * 0.5;
    let mut res_asc = WGK[7] * (f_center - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv[j] - mean).abs() + (fv[14 - j] - mean).abs());
    }

    let value = kronrod * half;
    res_abs *= half.abs();
    res_asc *= half.abs();

    // QUADPACK-style error rescaling.
    let mut err = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / res_asc).powf(1.5);
        err = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    let min_err = 50.0 * f64::EPSILON * res_abs;
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) && min_err > err {
        err = min_err;
    }

    (value, err)
}

/// Adaptively integrate `f` over the finite interval [a, b].
///
/// Stops once the summed error estimate drops below
/// `max(abs_tol, rel_tol * |integral|)` or the subdivision budget is spent.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_subdiv: usize,
) -> Result<QuadResult> {
    if !(a.is_finite() && b.is_finite()) || a >= b {
        return Err(GigError::Quadrature(format!(
            "invalid interval [{a}, {b}]"
        )));
    }

    let (v0, e0) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment {
        a,
        b,
        value: v0,
        error: e0,
    });
    let mut total_value = v0;
    let mut total_error = e0;
    let mut evals = 15usize;

    while total_error > abs_tol.max(rel_tol * total_value.abs()) {
        let worst = match heap.pop() {
            Some(s) => s,
            None => break,
        };
        if heap.len() + 1 >= max_subdiv {
            return Err(GigError::Quadrature(format!(
                "subdivision budget {max_subdiv} exhausted; error estimate {total_error:.3e}"
            )));
        }
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval narrower than machine precision; accept its estimate.
            total_error -= worst.error;
            continue;
        }
        let (vl, el) = gk15(&f, worst.a, mid);
        let (vr, er) = gk15(&f, mid, worst.b);
        evals += 30;
        total_value += vl + vr - worst.value;
        total_error += el + er - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: vl,
            error: el,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: vr,
            error: er,
        });
    }

    if !total_value.is_finite() {
        return Err(GigError::Quadrature(
            "integrand produced non-finite values".into(),
        ));
    }

    Ok(QuadResult {
        value: total_value,
        abs_error: total_error,
        evaluations: evals,
        subdivisions: heap.len().max(1),
    })
}

/// Adaptively integrate `f` over `[a, ∞)` via `x = a + t/(1-t)`.
pub fn integrate_upper_tail<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_subdiv: usize,
) -> Result<QuadResult> {
    let g = move |t: f64| {
        let u = 1.0 - t;
        let x = a + t / u;
        let w = 1.0 / (u * u);
        let fx = f(x);
        if fx == 0.0 {
            0.0
        } else {
            fx * w
        }
    };
    integrate(g, 0.0, 1.0, rel_tol, abs_tol, max_subdiv)
}

/// Adaptively integrate `f` over `(0, ∞)`, splitting at `split` (e.g. the
/// integrand's mode) so both pieces are well conditioned.
pub fn integrate_half_line<F: Fn(f64) -> f64 + Copy>(
    f: F,
    split: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_subdiv: usize,
) -> Result<QuadResult> {
    let split = if split.is_finite() && split > 0.0 {
        split
    } else {
        1.0
    };
    let lo = integrate(f, 0.0, split, rel_tol, abs_tol * 0.5, max_subdiv)?;
    let hi = integrate_upper_tail(f, split, rel_tol, abs_tol * 0.5, max_subdiv)?;
    Ok(QuadResult {
        value: lo.value + hi.value,
        abs_error: lo.abs_error + hi.abs_error,
        evaluations: lo.evaluations + hi.evaluations,
        subdivisions: lo.subdivisions + hi.subdivisions,
    })
}
