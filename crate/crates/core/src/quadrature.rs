//! Cell integrals of `|x - p|^{2s-2}` over Cartesian and polar coordinate rectangles.
//!
//! Well separated targets use a tensor Gauss-Legendre rule. A target inside or
//! just outside the cell is handled by splitting the cell into signed
//! rectangles that share a corner with the target, cutting each into two
//! triangles and collapsing the corner (Duffy). Along each ray from the corner
//! the integrand is `t^{2s-1}` times a smooth factor, which a Gauss-Jacobi rule
//! integrates exactly up to the smooth part.

use std::cell::RefCell;
use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::{FiniteAboveNegOneF64, GaussJacobi, GaussLegendre};

use crate::Point;

const ORDER: usize = 16;

/// Targets closer than this fraction of a cell side use the corner rule.
const CORNER_GAP: f64 = 0.25;

fn nodes() -> &'static [(f64, f64)] {
    static NODES: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    NODES.get_or_init(|| {
        let rule = GaussLegendre::new(NonZeroUsize::new(ORDER).unwrap());
        rule.iter().map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect()
    })
}

/// Nodes and weights on `[0, 1]` for the weight `t^{2s-1}`.
fn with_radial_nodes<R>(s: f64, f: impl FnOnce(&[(f64, f64)]) -> R) -> R {
    thread_local! {
        static CACHE: RefCell<Option<(f64, Vec<(f64, f64)>)>> = const { RefCell::new(None) };
    }
    CACHE.with(|cache| {
        let mut cache = cache.borrow_mut();
        if cache.as_ref().map(|(cached, _)| *cached) != Some(s) {
            let beta = 2.0 * s - 1.0;
            let rule = GaussJacobi::new(
                NonZeroUsize::new(ORDER).unwrap(),
                FiniteAboveNegOneF64::new(0.0).unwrap(),
                FiniteAboveNegOneF64::new(beta).expect("s lies in (0, 1]"),
            );
            let scale = 2f64.powf(-beta - 1.0);
            let rule = rule.iter().map(|(x, w)| (0.5 * (x + 1.0), w * scale)).collect();
            *cache = Some((s, rule));
        }
        f(&cache.as_ref().unwrap().1)
    })
}

/// A cell `[u0, u1] x [v0, v1]` in Cartesian `(x1, x2)` or polar `(r, theta)` coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Chart {
    pub u: (f64, f64),
    pub v: (f64, f64),
    pub polar: bool,
}

impl Chart {
    fn map(&self, u: f64, v: f64) -> Point {
        if self.polar {
            let (sin, cos) = v.sin_cos();
            Point::new(u * cos, u * sin)
        } else {
            Point::new(u, v)
        }
    }

    fn jacobian(&self, u: f64) -> f64 {
        if self.polar {
            u
        } else {
            1.0
        }
    }

    fn coords(&self, p: Point) -> (f64, f64) {
        if self.polar {
            (p.norm(), p.y.atan2(p.x))
        } else {
            (p.x, p.y)
        }
    }

    /// `int_cell |x - p|^{2s-2} dx`, without the kernel constant.
    pub fn kernel_integral(&self, s: f64, p: Point) -> f64 {
        let (pu, pv) = self.coords(p);
        let gap = |t: f64, (a, b): (f64, f64)| ((a - t).max(t - b)).max(0.0) / (b - a);
        if gap(pu, self.u).max(gap(pv, self.v)) > CORNER_GAP {
            self.tensor(s, p)
        } else {
            self.corners(s, p, pu, pv)
        }
    }

    fn tensor(&self, s: f64, p: Point) -> f64 {
        let e = s - 1.0;
        let (hu, hv) = (self.u.1 - self.u.0, self.v.1 - self.v.0);
        let mut sum = 0.0;
        for &(a, wa) in nodes() {
            let u = self.u.0 + a * hu;
            let ju = wa * self.jacobian(u);
            for &(b, wb) in nodes() {
                let x = self.map(u, self.v.0 + b * hv);
                sum += ju * wb * (x - p).norm_squared().powf(e);
            }
        }
        sum * hu * hv
    }

    fn corners(&self, s: f64, p: Point, pu: f64, pv: f64) -> f64 {
        let mut sum = 0.0;
        for (eu, su) in [(self.u.1, 1.0), (self.u.0, -1.0)] {
            for (ev, sv) in [(self.v.1, 1.0), (self.v.0, -1.0)] {
                let (a, b) = (eu - pu, ev - pv);
                if a != 0.0 && b != 0.0 {
                    sum += su * sv * a * b * self.corner(s, p, pu, pv, a, b);
                }
            }
        }
        sum
    }

    /// `int_{[0,1]^2} f(pu + a x, pv + b y) dx dy` for a corner at the target.
    fn corner(&self, s: f64, p: Point, pu: f64, pv: f64, a: f64, b: f64) -> f64 {
        let e = s - 1.0;
        with_radial_nodes(s, |radial| {
            let mut sum = 0.0;
            for &(t, wt) in radial {
                for &(w, ww) in nodes() {
                    for (x, y) in [(t, t * w), (t * w, t)] {
                        let u = pu + a * x;
                        let ratio = (self.map(u, pv + b * y) - p).norm_squared() / (t * t);
                        sum += wt * ww * self.jacobian(u) * ratio.powf(e);
                    }
                }
            }
            sum
        })
    }
}
