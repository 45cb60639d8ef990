//! Checks of computed vortices: weak-form steadiness, concentration around the
//! point-vortex position, multiplier scaling across an epsilon sweep, and the
//! radial shape of the rescaled core.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{rescale, support_metrics, Grid, PotentialOperator, VorticityField};
use crate::kernels::KernelSpec;
use crate::pointvortex::thomson_angular_velocity;
use crate::solver::{Flow, Solution};
use crate::Point;

/// The non-kernel part of the stream function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Drift {
    None,
    /// `alpha |x|^2 / 2`.
    Rotation(f64),
    /// `-W x1`.
    Translation(f64),
}

impl Drift {
    fn gradient(self, x: Point) -> Point {
        match self {
            Drift::None => Point::zeros(),
            Drift::Rotation(alpha) => x * alpha,
            Drift::Translation(w) => Point::new(-w, 0.0),
        }
    }
}

const MONOMIALS: usize = 5;

/// `phi(x) = b(y) p(y)` with `y = (x - center) / radius`, `b = (1 - |y|^2)_+^3`,
/// and `p` one of `1, y1, y2, y1 y2, y1^2 - y2^2`.
#[derive(Debug, Clone, Copy)]
struct TestFunction {
    center: Point,
    radius: f64,
    monomial: usize,
}

impl TestFunction {
    fn gradient(&self, x: Point) -> Point {
        let y = (x - self.center) / self.radius;
        let q = 1.0 - y.norm_squared();
        if q <= 0.0 {
            return Point::zeros();
        }
        let b = q * q * q;
        let db = y * (-6.0 * q * q);
        let (p, dp) = match self.monomial {
            0 => (1.0, Point::zeros()),
            1 => (y.x, Point::new(1.0, 0.0)),
            2 => (y.y, Point::new(0.0, 1.0)),
            3 => (y.x * y.y, Point::new(y.y, y.x)),
            _ => (y.x * y.x - y.y * y.y, Point::new(2.0 * y.x, -2.0 * y.y)),
        };
        (db * p + dp * b) / self.radius
    }

    /// Sup norm of the gradient, sampled on a fine lattice over the support.
    fn gradient_sup(&self) -> f64 {
        let n = 200;
        let mut best: f64 = 0.0;
        for i in 0..=n {
            for j in 0..=n {
                let y = Point::new(-1.0 + 2.0 * i as f64 / n as f64, -1.0 + 2.0 * j as f64 / n as f64);
                best = best.max(self.gradient(self.center + y * self.radius).norm());
            }
        }
        best
    }
}

/// The first `count` test functions around a vortex at `center` of radius `size`.
///
/// Placements cycle through two concentric radii and four shifted centers; each
/// placement carries all five monomials.
fn catalogue(center: Point, size: f64, count: usize) -> Vec<TestFunction> {
    let placements = [
        (Point::zeros(), 1.5),
        (Point::zeros(), 2.5),
        (Point::new(0.5, 0.0), 2.0),
        (Point::new(0.0, 0.5), 2.0),
        (Point::new(-0.5, 0.0), 2.0),
        (Point::new(0.0, -0.5), 2.0),
    ];
    (0..count)
        .map(|k| {
            let (shift, scale) = placements[(k / MONOMIALS) % placements.len()];
            TestFunction {
                center: center + shift * size,
                radius: scale * size,
                monomial: k % MONOMIALS,
            }
        })
        .collect()
}

/// Centered-difference gradient of cell-center data (one-sided at the block edge).
fn grid_gradient(grid: &Grid, data: &[f64]) -> Result<Vec<Point>> {
    // fourth-order centered where two neighbours exist on each side, then
    // second-order centered, then one-sided
    let diff = |m2: Option<f64>, m1: Option<f64>, here: f64, p1: Option<f64>, p2: Option<f64>, step: f64| {
        match (m2, m1, p1, p2) {
            (Some(a), Some(b), Some(c), Some(d)) => (a - 8.0 * b + 8.0 * c - d) / (12.0 * step),
            (_, Some(b), Some(c), _) => (c - b) / (2.0 * step),
            (_, None, Some(c), _) => (c - here) / step,
            (_, Some(b), None, _) => (here - b) / step,
            _ => 0.0,
        }
    };
    match grid {
        Grid::Sector(g) => Ok((0..g.len())
            .map(|k| {
                let (i, j) = (k / g.n_theta, k % g.n_theta);
                let radial = |d: isize| {
                    let a = i as isize + d;
                    (a >= 0 && (a as usize) < g.n_r).then(|| data[g.index(a as usize, j)])
                };
                let angular = |d: isize| {
                    let b = j as isize + d;
                    (b >= 0 && (b as usize) < g.n_theta).then(|| data[g.index(i, b as usize)])
                };
                let d_r = diff(radial(-2), radial(-1), data[k], radial(1), radial(2), g.dr());
                let d_theta = diff(angular(-2), angular(-1), data[k], angular(1), angular(2), g.dtheta());
                let (r, theta) = (g.radius(i), g.angle(j));
                let (sin, cos) = theta.sin_cos();
                let e_r = Point::new(cos, sin);
                let e_theta = Point::new(-sin, cos);
                e_r * d_r + e_theta * (d_theta / r)
            })
            .collect()),
        Grid::Cartesian(g) => Ok((0..g.len())
            .map(|k| {
                let (i, j) = g.lattice(k);
                let at = |di: isize, dj: isize| {
                    let (a, b) = (i as isize + di, j as isize + dj);
                    if a < 0 || b < 0 {
                        None
                    } else {
                        g.cell_at(a as usize, b as usize).map(|m| data[m])
                    }
                };
                let d1 = diff(at(-2, 0), at(-1, 0), data[k], at(1, 0), at(2, 0), g.h());
                let d2 = diff(at(0, -2), at(0, -1), data[k], at(0, 1), at(0, 2), g.h());
                Point::new(d1, d2)
            })
            .collect()),
        Grid::Cloud(_) => Err(Error::Config("weak residual needs a structured grid".into())),
    }
}

/// Largest normalized weak-form defect `|int omega grad^perp psi . grad phi|`
/// over the first `test_count` test functions around `center`.
///
/// Each value is divided by `||omega||_1 ||grad phi||_inf`.
pub fn weak_residual_of(
    field: &VorticityField,
    spec: &KernelSpec,
    drift: Drift,
    center: Point,
    size: f64,
    test_count: usize,
) -> Result<f64> {
    if spec.s < 0.5 {
        return Err(Error::UnsupportedRegime(format!(
            "weak form is only set up for s in [1/2, 1), got {}",
            spec.s
        )));
    }
    let grid = &*field.grid;
    let potential = PotentialOperator::new(field.grid.clone(), *spec)?.apply(&field.values);
    let grad_p = grid_gradient(grid, &potential)?;
    let support: Vec<(Point, Point, f64)> = (0..grid.len())
        .filter(|&k| field.values[k] != 0.0)
        .map(|k| {
            let x = grid.center(k);
            let grad_psi = grad_p[k] + drift.gradient(x);
            (x, grad_psi, field.values[k] * grid.measure(k))
        })
        .collect();
    let l1: f64 = support.iter().map(|(_, _, w)| w.abs()).sum();
    if l1 == 0.0 {
        return Err(Error::EmptySupport { threshold: 0.0 });
    }
    let tests = catalogue(center, size, test_count);
    let values: Vec<f64> = tests
        .par_iter()
        .map(|phi| {
            let integral: f64 = support
                .iter()
                .map(|(x, g, w)| {
                    let dphi = phi.gradient(*x);
                    // grad^perp psi = (psi_2, -psi_1)
                    w * (g.y * dphi.x - g.x * dphi.y)
                })
                .sum();
            integral.abs() / (l1 * phi.gradient_sup())
        })
        .collect();
    Ok(values.into_iter().fold(0.0, f64::max))
}

fn drift_of(solution: &Solution) -> Drift {
    match solution.flow {
        Flow::Rotating { .. } => Drift::Rotation(solution.multipliers.alpha),
        Flow::Travelling { speed, .. } => Drift::Translation(speed),
    }
}

/// Centroid and a radius covering the support (at least two cells).
fn vortex_extent(field: &VorticityField) -> Result<(Point, f64)> {
    let metrics = support_metrics(field, 0.0)?;
    let size = (0.5 * metrics.diameter).max(2.0 * field.grid.spacing());
    Ok((metrics.centroid, size))
}

/// [`weak_residual_of`] for a solver output, with test functions placed on its support.
pub fn weak_residual(solution: &Solution, test_count: usize) -> Result<f64> {
    weak_residual_with_drift(solution, drift_of(solution), test_count)
}

/// As [`weak_residual`], with the drift term replaced (e.g. a perturbed `alpha`).
pub fn weak_residual_with_drift(solution: &Solution, drift: Drift, test_count: usize) -> Result<f64> {
    let (center, size) = vortex_extent(&solution.field)?;
    weak_residual_of(&solution.field, &solution.kernel(), drift, center, size, test_count)
}

/// Radii, in units of epsilon, of the balls reported by [`concentration_report`].
pub const CONCENTRATION_RADII: [f64; 4] = [1.0, 2.0, 4.0, 8.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationReport {
    /// `(R, mass fraction in the ball of radius R eps around the centroid)`.
    pub fractions: Vec<(f64, f64)>,
    pub centroid: [f64; 2],
    /// Distance from the centroid to `(1, 0)` (rotating) or `(d, 0)` (travelling).
    pub centroid_distance: f64,
}

pub fn concentration_report(solution: &Solution) -> Result<ConcentrationReport> {
    let metrics = support_metrics(&solution.field, 0.0)?;
    let eps = solution.config.epsilon;
    Ok(ConcentrationReport {
        fractions: CONCENTRATION_RADII
            .iter()
            .map(|r| (*r, metrics.mass_in_ball(r * eps)))
            .collect(),
        centroid: [metrics.centroid.x, metrics.centroid.y],
        centroid_distance: (metrics.centroid - solution.target()).norm(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub epsilon: f64,
    /// Rotating only.
    pub alpha: Option<f64>,
    /// `eps^{2-2s} mu`.
    pub scaled_mu: f64,
    pub diameter_over_epsilon: f64,
    pub weak_residual: f64,
    pub centroid_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// max / min of `eps^{2-2s} mu` (infinite unless all are positive).
    pub mu_ratio: f64,
    pub diameter_ratio: f64,
    /// `|alpha - thomson| / thomson` per row, in row order; rotating only.
    pub alpha_gaps: Option<Vec<f64>>,
}

fn max_min_ratio(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

/// Multiplier and size scaling over an epsilon sweep of one problem, rows in decreasing epsilon.
pub fn scaling_report(sweep: &[Solution]) -> Result<ScalingReport> {
    if sweep.len() < 3 {
        return Err(Error::Config(format!("scaling report needs at least 3 solutions, got {}", sweep.len())));
    }
    let eps: Vec<f64> = sweep.iter().map(|s| s.config.epsilon).collect();
    let (lo, hi) = eps.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), e| (lo.min(*e), hi.max(*e)));
    if hi < 4.0 * lo * (1.0 - 1e-12) {
        return Err(Error::Config(format!("epsilons must span a factor of 4, got [{lo}, {hi}]")));
    }
    let first = &sweep[0];
    if sweep
        .iter()
        .any(|s| s.flow != first.flow || s.config.s != first.config.s)
    {
        return Err(Error::Config("sweep mixes different problems".into()));
    }
    let mut ordered: Vec<&Solution> = sweep.iter().collect();
    ordered.sort_by(|a, b| b.config.epsilon.total_cmp(&a.config.epsilon));
    let rows: Vec<ScalingRow> = ordered
        .iter()
        .map(|sol| {
            let e = sol.config.epsilon;
            let alpha = match sol.flow {
                Flow::Rotating { .. } => Some(sol.multipliers.alpha),
                Flow::Travelling { .. } => None,
            };
            let centroid = Point::new(sol.report.centroid[0], sol.report.centroid[1]);
            ScalingRow {
                epsilon: e,
                alpha,
                scaled_mu: e.powf(2.0 - 2.0 * sol.config.s) * sol.multipliers.mu,
                diameter_over_epsilon: sol.report.support_diameter / e,
                weak_residual: sol.report.weak_residual,
                centroid_distance: (centroid - sol.target()).norm(),
            }
        })
        .collect();
    let alpha_gaps = match first.flow {
        Flow::Rotating { n_fold } => {
            let thomson = thomson_angular_velocity(n_fold, first.config.s)?;
            Some(
                rows.iter()
                    .map(|r| (r.alpha.unwrap_or(f64::NAN) - thomson).abs() / thomson)
                    .collect(),
            )
        }
        Flow::Travelling { .. } => None,
    };
    Ok(ScalingReport {
        mu_ratio: max_min_ratio(rows.iter().map(|r| r.scaled_mu)),
        diameter_ratio: max_min_ratio(rows.iter().map(|r| r.diameter_over_epsilon)),
        rows,
        alpha_gaps,
    })
}

impl ScalingReport {
    /// CSV with one row per epsilon.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(
            out,
            "epsilon,alpha,scaled_mu,diameter_over_epsilon,weak_residual,centroid_distance,alpha_gap"
        )?;
        for (k, r) in self.rows.iter().enumerate() {
            let alpha = r.alpha.map(|a| a.to_string()).unwrap_or_default();
            let gap = self
                .alpha_gaps
                .as_ref()
                .map(|g| g[k].to_string())
                .unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.epsilon, alpha, r.scaled_mu, r.diameter_over_epsilon, r.weak_residual, r.centroid_distance, gap
            )?;
        }
        Ok(())
    }
}

/// Monotonicity defect of the angular-average profile of the field rescaled about `center`.
///
/// Cells are binned by distance from `center` in shells of width `shell`
/// (unrescaled units); the result is `max_{r < r'} (rho(r') - rho(r))_+ / max rho`.
/// Rescaling multiplies every shell average by the same `eps^2`, which cancels.
pub fn radial_defect(field: &VorticityField, center: Point, shell: f64) -> Result<f64> {
    if !(shell > 0.0) {
        return Err(Error::Domain(format!("shell width must be positive, got {shell}")));
    }
    let zeta = rescale(field, center)?;
    let grid = &*zeta.grid;
    let width = shell / field.epsilon;
    let mut shells: Vec<(f64, f64)> = Vec::new();
    for k in 0..grid.len() {
        let b = (grid.center(k).norm() / width) as usize;
        if shells.len() <= b {
            shells.resize(b + 1, (0.0, 0.0));
        }
        let m = grid.measure(k);
        shells[b].0 += zeta.values[k] * m;
        shells[b].1 += m;
    }
    let profile: Vec<f64> = shells
        .iter()
        .filter(|(_, m)| *m > 0.0)
        .map(|(mass, m)| mass / m)
        .collect();
    let top = profile.iter().cloned().fold(0.0, f64::max);
    if top <= 0.0 {
        return Err(Error::EmptySupport { threshold: 0.0 });
    }
    let mut running_min = f64::INFINITY;
    let mut defect: f64 = 0.0;
    for rho in profile {
        defect = defect.max(rho - running_min);
        running_min = running_min.min(rho);
    }
    Ok(defect / top)
}

/// [`radial_defect`] about the solution's centroid, with shells one cell wide.
pub fn radial_shape_check(solution: &Solution) -> Result<f64> {
    let metrics = support_metrics(&solution.field, 0.0)?;
    radial_defect(&solution.field, metrics.centroid, solution.field.grid.spacing())
}
