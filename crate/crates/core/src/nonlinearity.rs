//! Vorticity profiles `f`, their primitives `F`, the convex conjugates `J`, and
//! the penalized family `f_lambda = f + lambda * tau_+^s`.
//!
//! Every profile vanishes on `(-inf, 0]`, is positive and nondecreasing on
//! `(0, inf)`, and has supremum 1.

use std::io::Read;

use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::fields::VorticityField;

#[derive(Debug, Clone, PartialEq)]
pub enum Nonlinearity {
    /// `f = 1` on `(0, inf)`: the vortex-patch profile.
    Step,
    /// `f(tau) = tanh(tau / scale)` on `(0, inf)`.
    SmoothRamp { scale: f64 },
    /// Piecewise-linear interpolation of a breakpoint table.
    Tabulated(Table),
}

/// Breakpoints `(tau_k, f_k)` with `tau_0 = 0`, `f_0 = 0`, both columns
/// nondecreasing and `f` ending at 1. A repeated abscissa encodes a jump; the
/// profile takes the later value there (right-continuity), except at `tau = 0`
/// where it is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    taus: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Debug, Deserialize)]
struct TableRow {
    tau: f64,
    f: f64,
}

impl Table {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        let bad = |msg: String| Err(Error::Config(format!("tabulated profile: {msg}")));
        if points.len() < 2 {
            return bad("need at least two breakpoints".into());
        }
        if points[0] != (0.0, 0.0) {
            return bad(format!("first breakpoint must be (0, 0), got {:?}", points[0]));
        }
        for w in points.windows(2) {
            let ((t0, f0), (t1, f1)) = (w[0], w[1]);
            if !(t1 >= t0) || !(f1 >= f0) {
                return bad(format!("breakpoints must be nondecreasing: {:?} -> {:?}", w[0], w[1]));
            }
            if t1 > 0.0 && f1 <= 0.0 {
                return bad(format!("f must be positive for tau > 0, got f({t1}) = {f1}"));
            }
        }
        let last = points[points.len() - 1].1;
        if last != 1.0 {
            return bad(format!("supremum must be 1, table ends at {last}"));
        }
        let (taus, values) = points.into_iter().unzip();
        Ok(Self { taus, values })
    }

    /// Load a `tau,f` CSV.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut points = Vec::new();
        for row in rdr.deserialize() {
            let row: TableRow = row.map_err(|e| Error::Config(format!("tabulated profile: {e}")))?;
            points.push((row.tau, row.f));
        }
        Self::new(points)
    }

    fn eval(&self, tau: f64) -> f64 {
        // index of the last breakpoint with abscissa <= tau
        let k = self.taus.partition_point(|t| *t <= tau);
        if k == self.taus.len() {
            return self.values[k - 1];
        }
        let (t0, t1) = (self.taus[k - 1], self.taus[k]);
        let (f0, f1) = (self.values[k - 1], self.values[k]);
        f0 + (f1 - f0) * (tau - t0) / (t1 - t0)
    }

    fn primitive(&self, tau: f64) -> f64 {
        let mut sum = 0.0;
        for k in 1..self.taus.len() {
            let (t0, t1) = (self.taus[k - 1], self.taus[k]);
            if t0 >= tau {
                return sum;
            }
            let (f0, f1) = (self.values[k - 1], self.values[k]);
            let end = t1.min(tau);
            if end > t0 {
                let f_end = f0 + (f1 - f0) * (end - t0) / (t1 - t0);
                sum += 0.5 * (f0 + f_end) * (end - t0);
            }
        }
        let last = self.taus[self.taus.len() - 1];
        sum + (tau - last).max(0.0)
    }
}

impl Nonlinearity {
    pub fn smooth_ramp(scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Config(format!("ramp scale must be positive, got {scale}")));
        }
        Ok(Nonlinearity::SmoothRamp { scale })
    }

    /// Integral of `1 - f` over `(0, inf)` when `f` never reaches 1.
    fn saturation_deficit(&self) -> Option<f64> {
        match self {
            Nonlinearity::SmoothRamp { scale } => Some(scale * std::f64::consts::LN_2),
            _ => None,
        }
    }
}

pub fn eval_f(nl: &Nonlinearity, tau: f64) -> f64 {
    if !(tau > 0.0) {
        return 0.0;
    }
    match nl {
        Nonlinearity::Step => 1.0,
        Nonlinearity::SmoothRamp { scale } => (tau / scale).tanh(),
        Nonlinearity::Tabulated(t) => t.eval(tau),
    }
}

pub fn primitive_f(nl: &Nonlinearity, tau: f64) -> f64 {
    if !(tau > 0.0) {
        return 0.0;
    }
    match nl {
        Nonlinearity::Step => tau,
        Nonlinearity::SmoothRamp { scale } => {
            // scale * ln cosh(tau/scale), written to avoid overflow
            let x = tau / scale;
            scale * (x + (-2.0 * x).exp().ln_1p() - std::f64::consts::LN_2)
        }
        Nonlinearity::Tabulated(t) => t.primitive(tau),
    }
}

/// Smallest `t >= 0` with `g(t) >= target`, for nondecreasing `g` and `g(hi) >= target`.
fn lower_level_crossing(g: impl Fn(f64) -> f64, target: f64, mut hi: f64) -> f64 {
    let mut lo = 0.0;
    if g(lo) >= target {
        return 0.0;
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // a jump of f at the origin drives the bracket into the subnormals
    if hi < 1e-200 {
        0.0
    } else {
        hi
    }
}

/// `J(sigma) = sup_t [sigma t - F(t)]`, `+inf` outside `[0, sup f]`.
pub fn conjugate_j(nl: &Nonlinearity, sigma: f64) -> f64 {
    if !(0.0..=1.0).contains(&sigma) {
        return f64::INFINITY;
    }
    if sigma == 0.0 {
        return 0.0;
    }
    if sigma == 1.0 {
        if let Some(deficit) = nl.saturation_deficit() {
            return deficit;
        }
    }
    let mut hi = 1.0;
    while eval_f(nl, hi) < sigma {
        hi *= 2.0;
        if hi > 1e300 {
            return f64::INFINITY;
        }
    }
    let t = lower_level_crossing(|t| eval_f(nl, t), sigma, hi);
    sigma * t - primitive_f(nl, t)
}

/// `f(tau) + lambda * tau_+^s`.
pub fn eval_f_lambda(nl: &Nonlinearity, lambda: f64, s: f64, tau: f64) -> f64 {
    eval_f(nl, tau) + lambda * tau.max(0.0).powf(s)
}

pub fn primitive_f_lambda(nl: &Nonlinearity, lambda: f64, s: f64, tau: f64) -> f64 {
    primitive_f(nl, tau) + lambda * tau.max(0.0).powf(s + 1.0) / (s + 1.0)
}

/// The point `tau >= 0` where the graph of `f_lambda` reaches `w`; at a jump of
/// `f` covering `w` this is the jump abscissa.
pub fn inverse_f_lambda(nl: &Nonlinearity, lambda: f64, s: f64, w: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("penalty lambda must be positive, got {lambda}")));
    }
    if !(w >= 0.0) {
        return Err(Error::Domain(format!("cannot invert f_lambda at {w}")));
    }
    if w == 0.0 {
        return Ok(0.0);
    }
    // lambda tau^s <= f_lambda(tau) brackets the root
    let hi = (w / lambda).powf(1.0 / s);
    Ok(lower_level_crossing(|t| eval_f_lambda(nl, lambda, s, t), w, hi))
}

/// Conjugate of `F_lambda`; reduces to [`conjugate_j`] at `lambda = 0`.
pub fn conjugate_j_lambda(nl: &Nonlinearity, lambda: f64, s: f64, sigma: f64) -> f64 {
    if lambda == 0.0 {
        return conjugate_j(nl, sigma);
    }
    if sigma < 0.0 || sigma.is_nan() {
        return f64::INFINITY;
    }
    let t = inverse_f_lambda(nl, lambda, s, sigma).expect("arguments checked");
    sigma * t - primitive_f_lambda(nl, lambda, s, t)
}

/// `eps^{-2} * sum_cells J_lambda(eps^2 omega) * measure`; `+inf` once any cell leaves the domain of `J`.
pub fn penalty_integral(field: &VorticityField, nl: &Nonlinearity, lambda: f64, s: f64) -> f64 {
    let eps2 = field.epsilon * field.epsilon;
    let grid = &field.grid;
    let terms: Vec<f64> = field
        .values
        .par_iter()
        .enumerate()
        .map(|(k, v)| {
            if *v == 0.0 {
                0.0
            } else {
                conjugate_j_lambda(nl, lambda, s, eps2 * v) * grid.measure(k)
            }
        })
        .collect();
    // summed in cell order so that results do not depend on the thread count
    terms.iter().sum::<f64>() / eps2
}
