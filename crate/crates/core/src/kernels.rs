//! Riesz Green function of the fractional Laplacian in the plane and its
//! symmetry-reduced variants.
//!
//! All evaluators are exact closed forms. None of them regularizes the
//! diagonal: a coincident argument is reported as [`Error::Singular`] and it is
//! up to the quadrature layer (see [`crate::fields`]) to integrate the
//! singular cell.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::Point;

/// Which reduced kernel a potential is built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KernelMode {
    /// `G_s(x - x')` on the whole plane.
    FreePlane,
    /// `sum_k G_s(x - Q_{2k pi/N} x')`, for fields with N-fold rotational symmetry.
    NFold(usize),
    /// `G_s(x - x') - G_s(xbar - x')`, for fields odd in `x1`.
    HalfPlaneOdd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub s: f64,
    pub mode: KernelMode,
}

impl KernelSpec {
    pub fn new(s: f64, mode: KernelMode) -> Result<Self> {
        check_exponent(s)?;
        if let KernelMode::NFold(n) = mode {
            if n < 1 {
                return Err(Error::Domain(format!("fold count must be positive, got {n}")));
            }
        }
        Ok(Self { s, mode })
    }

    pub fn free_plane(s: f64) -> Result<Self> {
        Self::new(s, KernelMode::FreePlane)
    }

    pub fn n_fold(s: f64, n: usize) -> Result<Self> {
        Self::new(s, KernelMode::NFold(n))
    }

    pub fn half_plane(s: f64) -> Result<Self> {
        Self::new(s, KernelMode::HalfPlaneOdd)
    }

    /// Evaluate the kernel selected by `mode` between two points.
    pub fn eval(&self, x: Point, y: Point) -> Result<f64> {
        match self.mode {
            KernelMode::FreePlane => green_riesz(self.s, x - y),
            KernelMode::NFold(n) => nfold_kernel(self.s, n, x, y),
            KernelMode::HalfPlaneOdd => halfplane_kernel(self.s, x, y),
        }
    }
}

fn check_exponent(s: f64) -> Result<()> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("exponent s must lie in (0,1), got {s}")))
    }
}

/// Normalization `c_s = Gamma(1-s) / (2^{2s} pi Gamma(s))` of the Riesz Green function.
pub fn riesz_constant(s: f64) -> Result<f64> {
    check_exponent(s)?;
    Ok(gamma(1.0 - s) / (2f64.powf(2.0 * s) * PI * gamma(s)))
}

/// `c_s |z|^{2s-2}`.
pub fn green_riesz(s: f64, z: Point) -> Result<f64> {
    let c = riesz_constant(s)?;
    let r = z.norm();
    if r == 0.0 {
        return Err(Error::singular(z, Point::zeros()));
    }
    Ok(c * r.powf(2.0 * s - 2.0))
}

/// Gradient `c_s (2s-2) |z|^{2s-4} z` of the Green function.
pub fn green_riesz_gradient(s: f64, z: Point) -> Result<Point> {
    let c = riesz_constant(s)?;
    let r2 = z.norm_squared();
    if r2 == 0.0 {
        return Err(Error::singular(z, Point::zeros()));
    }
    Ok(z * (c * (2.0 * s - 2.0) * r2.powf(s - 2.0)))
}

/// Counterclockwise rotation by `phi`.
pub fn rotate(phi: f64, x: Point) -> Point {
    let (sin, cos) = phi.sin_cos();
    Point::new(cos * x.x - sin * x.y, sin * x.x + cos * x.y)
}

/// Sum of the Green function over the `n` rotated images of `y`.
pub fn nfold_kernel(s: f64, n: usize, x: Point, y: Point) -> Result<f64> {
    let c = riesz_constant(s)?;
    if n == 0 {
        return Err(Error::Domain("fold count must be positive".into()));
    }
    let mut sum = 0.0;
    for k in 0..n {
        let image = rotate(2.0 * PI * k as f64 / n as f64, y);
        let r = (x - image).norm();
        if r == 0.0 {
            return Err(Error::singular(x, image));
        }
        sum += r.powf(2.0 * s - 2.0);
    }
    Ok(c * sum)
}

/// `G_s(x - y) - G_s(xbar - y)` with `xbar = (-x1, x2)`.
pub fn halfplane_kernel(s: f64, x: Point, y: Point) -> Result<f64> {
    if x == y {
        return Err(Error::singular(x, y));
    }
    let reflected = Point::new(-x.x, x.y);
    let direct = green_riesz(s, x - y)?;
    let image = green_riesz(s, reflected - y)?;
    Ok(direct - image)
}

/// The N-fold kernel in polar form, `V_s(r, r', tau) = K_s((r,0), (r' cos tau, -r' sin tau))`.
///
/// Defined for radii in `(1/2, 3/2)` and `|tau| < pi/N`.
pub fn polar_kernel(s: f64, n: usize, r: f64, r_prime: f64, tau: f64) -> Result<f64> {
    let inside = |v: f64| v > 0.5 && v < 1.5;
    if !inside(r) || !inside(r_prime) {
        return Err(Error::Domain(format!(
            "radii must lie in (1/2, 3/2), got {r}, {r_prime}"
        )));
    }
    if n == 0 || tau.abs() >= PI / n as f64 {
        return Err(Error::Domain(format!("angle {tau} outside (-pi/N, pi/N)")));
    }
    let x = Point::new(r, 0.0);
    let y = rotate(-tau, Point::new(r_prime, 0.0));
    nfold_kernel(s, n, x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn constant_at_half_is_one_over_two_pi() {
        assert_relative_eq!(riesz_constant(0.5).unwrap(), 1.0 / (2.0 * PI), max_relative = 1e-14);
    }

    #[test]
    fn constant_three_quarters() {
        // Gamma(1/4) / (2^{3/2} pi Gamma(3/4)), Gamma values from mpmath at 30 digits.
        let g14 = 3.625_609_908_221_908_311_930_685_155_9;
        let g34 = 1.225_416_702_465_177_645_129_098_303_4;
        let expected = g14 / (2f64.powf(1.5) * PI * g34);
        let got = riesz_constant(0.75).unwrap();
        assert_relative_eq!(got, expected, max_relative = 1e-12);
        assert_relative_eq!(got, 0.332_967_935_501_700_24, max_relative = 1e-12);
    }

    #[test]
    fn constant_rejects_endpoints() {
        assert!(matches!(riesz_constant(1.0), Err(Error::Domain(_))));
        assert!(matches!(riesz_constant(0.0), Err(Error::Domain(_))));
        assert!(riesz_constant(-0.2).is_err());
    }

    #[test]
    fn green_values() {
        let c = 1.0 / (2.0 * PI);
        assert_relative_eq!(green_riesz(0.5, Point::new(1.0, 0.0)).unwrap(), c, max_relative = 1e-14);
        assert_relative_eq!(green_riesz(0.5, Point::new(0.0, 2.0)).unwrap(), c / 2.0, max_relative = 1e-14);
        for s in [0.3, 0.6, 0.9] {
            let unit = Point::new(0.6, 0.8);
            assert_relative_eq!(
                green_riesz(s, unit).unwrap(),
                riesz_constant(s).unwrap(),
                max_relative = 1e-14
            );
        }
        assert!(matches!(green_riesz(0.5, Point::zeros()), Err(Error::Singular { .. })));
    }

    #[test]
    fn rotation_examples() {
        let e1 = Point::new(1.0, 0.0);
        assert_eq!(rotate(0.0, e1), e1);
        let q = rotate(PI / 2.0, e1);
        assert!((q - Point::new(0.0, 1.0)).norm() < 1e-15);
        let t = rotate(2.0 * PI / 3.0, e1);
        assert!((t - Point::new(-0.5, 3f64.sqrt() / 2.0)).norm() < 1e-15);
    }

    #[test]
    fn nfold_examples() {
        let x = Point::new(0.3, -0.7);
        let y = Point::new(1.1, 0.2);
        assert_relative_eq!(
            nfold_kernel(0.6, 1, x, y).unwrap(),
            green_riesz(0.6, x - y).unwrap(),
            max_relative = 1e-15
        );
        let e1 = Point::new(1.0, 0.0);
        assert!(matches!(nfold_kernel(0.5, 2, e1, e1), Err(Error::Singular { .. })));
        let v = nfold_kernel(0.5, 2, e1, Point::new(0.9, 0.0)).unwrap();
        let expected = (1.0 / (2.0 * PI)) * (1.0 / 0.1 + 1.0 / 1.9);
        assert_relative_eq!(v, expected, max_relative = 1e-12);
    }

    #[test]
    fn halfplane_examples() {
        let v = halfplane_kernel(0.5, Point::new(1.0, 0.0), Point::new(2.0, 0.0)).unwrap();
        assert_relative_eq!(v, (1.0 / (2.0 * PI)) * (1.0 - 1.0 / 3.0), max_relative = 1e-14);

        let y = Point::new(0.8, 0.3);
        let mut prev = f64::INFINITY;
        for x1 in [1e-1, 1e-2, 1e-3, 1e-4, 1e-6] {
            let v = halfplane_kernel(0.5, Point::new(x1, 0.1), y).unwrap().abs();
            assert!(v < prev);
            prev = v;
        }
        assert!(prev < 1e-5);

        let x = Point::new(1.0, 1.0);
        let y = Point::new(1.0, -1.0);
        let expected = green_riesz(0.7, Point::new(0.0, 2.0)).unwrap()
            - green_riesz(0.7, Point::new(-2.0, 2.0)).unwrap();
        assert_relative_eq!(halfplane_kernel(0.7, x, y).unwrap(), expected, max_relative = 1e-14);
        assert!(halfplane_kernel(0.7, x, x).is_err());
    }

    #[test]
    fn polar_matches_nfold_at_aligned_angles() {
        let v = polar_kernel(0.5, 3, 1.1, 0.8, 0.0).unwrap();
        let k = nfold_kernel(0.5, 3, Point::new(1.1, 0.0), Point::new(0.8, 0.0)).unwrap();
        assert_relative_eq!(v, k, max_relative = 1e-15);
        assert!(polar_kernel(0.5, 3, 1.0, 1.0, 0.0).is_err());
        assert!(polar_kernel(0.5, 3, 1.0, 1.2, PI / 3.0).is_err());
        assert!(polar_kernel(0.5, 3, 0.4, 1.2, 0.1).is_err());
    }

    #[test]
    fn polar_even_and_decreasing_on_lattice() {
        for n in [2usize, 3, 5] {
            let half = PI / n as f64;
            for i in 0..10 {
                for j in 0..10 {
                    let r = 0.55 + 0.9 * i as f64 / 9.0;
                    let rp = 0.55 + 0.9 * j as f64 / 9.0;
                    for k in 0..10 {
                        let tau = half * (k as f64 + 0.5) / 10.0;
                        let plus = polar_kernel(0.5, n, r, rp, tau).unwrap();
                        let minus = polar_kernel(0.5, n, r, rp, -tau).unwrap();
                        assert!((plus - minus).abs() <= 1e-12 * plus.abs());
                        let dt = 1e-6 * half;
                        let d = (polar_kernel(0.5, n, r, rp, tau + dt).unwrap()
                            - polar_kernel(0.5, n, r, rp, tau - dt).unwrap())
                            / (2.0 * dt);
                        assert!(d < 0.0, "n={n} r={r} r'={rp} tau={tau} d={d}");
                    }
                }
            }
        }
    }

    fn point() -> impl Strategy<Value = Point> {
        (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(a, b)| Point::new(a, b))
    }

    proptest! {
        #[test]
        fn green_homogeneity(s in 0.05..0.95f64, z in point(), scale in 0.1..10.0f64) {
            prop_assume!(z.norm() > 1e-3);
            let lhs = green_riesz(s, z * scale).unwrap();
            let rhs = scale.powf(2.0 * s - 2.0) * green_riesz(s, z).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs());
        }

        #[test]
        fn nfold_joint_rotation_and_symmetry(
            s in 0.05..0.95f64, n in 2usize..7, x in point(), y in point()
        ) {
            let k = nfold_kernel(s, n, x, y);
            prop_assume!(k.is_ok());
            let k = k.unwrap();
            prop_assume!(k.is_finite() && k < 1e6);
            let phi = 2.0 * PI / n as f64;
            let rotated = nfold_kernel(s, n, rotate(phi, x), rotate(phi, y)).unwrap();
            prop_assert!((rotated - k).abs() <= 1e-10 * k);
            let swapped = nfold_kernel(s, n, y, x).unwrap();
            prop_assert!((swapped - k).abs() <= 1e-10 * k);
        }

        #[test]
        fn halfplane_positive(s in 0.05..0.95f64, a in 0.01..3.0f64, b in -3.0..3.0f64,
                              c in 0.01..3.0f64, d in -3.0..3.0f64) {
            let x = Point::new(a, b);
            let y = Point::new(c, d);
            prop_assume!((x - y).norm() > 1e-9);
            prop_assert!(halfplane_kernel(s, x, y).unwrap() > 0.0);
        }
    }
}
