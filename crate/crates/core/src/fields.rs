//! Discretized vorticity fields, their constraint functionals, and the
//! singular quadrature for Riesz-type potentials.
//!
//! Every grid is a list of cells with a center and a measure. On sector and
//! disk grids, cells within three index steps of the evaluation point are
//! integrated accurately over their true shape, including the singular one.
//! All other cells and all image terms use the midpoint value. On point clouds
//! the cell containing the evaluation point is replaced by the disk of equal
//! area centered on the point, over which `|x|^{2s-2}` integrates exactly to
//! `c_s (pi/s) R_eq^{2s}`.

use std::f64::consts::PI;
use std::io::{self, Write};
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{riesz_constant, rotate, KernelMode, KernelSpec};
use crate::quadrature::Chart;
use crate::Point;

/// Polar grid, uniform in `(r, theta)`, on a sector block around the positive `x1` axis.
///
/// The default block is `S = {1/2 <= r <= 3/2, |theta| <= pi/(2N)}`. A smaller
/// block inside `S` (still symmetric in `theta`) can be used to resolve a
/// concentrated field.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorGrid {
    pub n_fold: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub theta_half: f64,
    pub n_r: usize,
    pub n_theta: usize,
}

impl SectorGrid {
    /// Grid covering exactly `S`.
    pub fn new(n_fold: usize, n_r: usize, n_theta: usize) -> Result<Self> {
        if n_fold < 2 {
            return Err(Error::Config(format!("fold count must be at least 2, got {n_fold}")));
        }
        Self::window(n_fold, 0.5, 1.5, PI / (2.0 * n_fold as f64), n_r, n_theta)
    }

    /// Grid on the block `r_min <= r <= r_max, |theta| <= theta_half`, which must lie in `S`.
    pub fn window(
        n_fold: usize,
        r_min: f64,
        r_max: f64,
        theta_half: f64,
        n_r: usize,
        n_theta: usize,
    ) -> Result<Self> {
        if n_fold < 1 {
            return Err(Error::Config("fold count must be positive".into()));
        }
        if n_r == 0 || n_theta == 0 {
            return Err(Error::Config("grid needs at least one cell per direction".into()));
        }
        let tol = 1e-12;
        let sector_half = PI / (2.0 * n_fold as f64);
        if !(r_min >= 0.5 - tol && r_max <= 1.5 + tol && r_min < r_max) {
            return Err(Error::Config(format!(
                "radial window [{r_min}, {r_max}] must lie inside [1/2, 3/2]"
            )));
        }
        if !(theta_half > 0.0 && theta_half <= sector_half + tol) {
            return Err(Error::Config(format!(
                "angular half-width {theta_half} must lie in (0, pi/(2N)]"
            )));
        }
        Ok(Self {
            n_fold,
            r_min,
            r_max,
            theta_half,
            n_r,
            n_theta,
        })
    }

    pub fn dr(&self) -> f64 {
        (self.r_max - self.r_min) / self.n_r as f64
    }

    pub fn dtheta(&self) -> f64 {
        2.0 * self.theta_half / self.n_theta as f64
    }

    pub fn radius(&self, i: usize) -> f64 {
        self.r_min + (i as f64 + 0.5) * self.dr()
    }

    pub fn angle(&self, j: usize) -> f64 {
        -self.theta_half + (j as f64 + 0.5) * self.dtheta()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_theta + j
    }

    pub fn len(&self) -> usize {
        self.n_r * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ring_measure(&self, i: usize) -> f64 {
        self.radius(i) * self.dr() * self.dtheta()
    }

    fn center(&self, k: usize) -> Point {
        let (i, j) = (k / self.n_theta, k % self.n_theta);
        let (sin, cos) = self.angle(j).sin_cos();
        Point::new(self.radius(i) * cos, self.radius(i) * sin)
    }

    fn chart(&self, i: usize, j: usize) -> Chart {
        let (r, t) = (self.radius(i), self.angle(j));
        let (hr, ht) = (0.5 * self.dr(), 0.5 * self.dtheta());
        Chart {
            u: (r - hr, r + hr),
            v: (t - ht, t + ht),
            polar: true,
        }
    }

    /// Fractional lattice position of `p`; cell centers sit at integers.
    fn position(&self, p: Point) -> (f64, f64) {
        (
            (p.norm() - self.r_min) / self.dr() - 0.5,
            (p.y.atan2(p.x) + self.theta_half) / self.dtheta() - 0.5,
        )
    }

    fn locate(&self, p: Point) -> Option<usize> {
        let r = p.norm();
        let theta = p.y.atan2(p.x);
        if r < self.r_min || r > self.r_max || theta.abs() > self.theta_half {
            return None;
        }
        let i = (((r - self.r_min) / self.dr()) as usize).min(self.n_r - 1);
        let j = (((theta + self.theta_half) / self.dtheta()) as usize).min(self.n_theta - 1);
        Some(self.index(i, j))
    }
}

/// Square cells of side `h = 2 radius / n` whose centers lie in a closed disk.
///
/// Cells are listed row-major in the lattice index `(i, j)`, `i` along `x1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CartesianGrid {
    pub center: Point,
    pub radius: f64,
    pub n: usize,
    cells: Vec<(usize, usize)>,
    lookup: Vec<Option<usize>>,
}

impl CartesianGrid {
    pub fn new(center: Point, radius: f64, n: usize) -> Result<Self> {
        if !(radius > 0.0) || n == 0 {
            return Err(Error::Config(format!(
                "disk grid needs positive radius and cell count (radius {radius}, n {n})"
            )));
        }
        let h = 2.0 * radius / n as f64;
        let mut cells = Vec::new();
        let mut lookup = vec![None; n * n];
        for i in 0..n {
            for j in 0..n {
                let x1 = -radius + (i as f64 + 0.5) * h;
                let x2 = -radius + (j as f64 + 0.5) * h;
                if x1 * x1 + x2 * x2 <= radius * radius {
                    lookup[i * n + j] = Some(cells.len());
                    cells.push((i, j));
                }
            }
        }
        Ok(Self {
            center,
            radius,
            n,
            cells,
            lookup,
        })
    }

    /// Grid on the closed disk `B_{d/2}((d, 0))` used for the travelling pair.
    pub fn travelling(d: f64, n: usize) -> Result<Self> {
        Self::new(Point::new(d, 0.0), d / 2.0, n)
    }

    pub fn h(&self) -> f64 {
        2.0 * self.radius / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Lattice index `(i, j)` of cell `k`.
    pub fn lattice(&self, k: usize) -> (usize, usize) {
        self.cells[k]
    }

    /// Cell at lattice position `(i, j)`, if it lies in the disk.
    pub fn cell_at(&self, i: usize, j: usize) -> Option<usize> {
        if i < self.n && j < self.n {
            self.lookup[i * self.n + j]
        } else {
            None
        }
    }

    fn coordinate(&self, i: usize) -> f64 {
        -self.radius + (i as f64 + 0.5) * self.h()
    }

    fn center_of(&self, k: usize) -> Point {
        let (i, j) = self.cells[k];
        self.center + Point::new(self.coordinate(i), self.coordinate(j))
    }

    fn chart(&self, i: usize, j: usize) -> Chart {
        let h = self.h();
        let (x, y) = (self.center.x + self.coordinate(i), self.center.y + self.coordinate(j));
        Chart {
            u: (x - h / 2.0, x + h / 2.0),
            v: (y - h / 2.0, y + h / 2.0),
            polar: false,
        }
    }

    fn position(&self, p: Point) -> (f64, f64) {
        let q = p - self.center + Point::new(self.radius, self.radius);
        (q.x / self.h() - 0.5, q.y / self.h() - 0.5)
    }

    fn locate(&self, p: Point) -> Option<usize> {
        let q = p - self.center + Point::new(self.radius, self.radius);
        let h = self.h();
        if q.x < 0.0 || q.y < 0.0 {
            return None;
        }
        let (i, j) = ((q.x / h) as usize, (q.y / h) as usize);
        self.cell_at(i, j)
    }
}

/// Unstructured cells with explicit centers and measures.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub centers: Vec<Point>,
    pub measures: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    Sector(SectorGrid),
    Cartesian(CartesianGrid),
    Cloud(PointCloud),
}

impl Grid {
    pub fn len(&self) -> usize {
        match self {
            Grid::Sector(g) => g.len(),
            Grid::Cartesian(g) => g.len(),
            Grid::Cloud(g) => g.centers.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn center(&self, k: usize) -> Point {
        match self {
            Grid::Sector(g) => g.center(k),
            Grid::Cartesian(g) => g.center_of(k),
            Grid::Cloud(g) => g.centers[k],
        }
    }

    pub fn measure(&self, k: usize) -> f64 {
        match self {
            Grid::Sector(g) => g.ring_measure(k / g.n_theta),
            Grid::Cartesian(g) => g.h() * g.h(),
            Grid::Cloud(g) => g.measures[k],
        }
    }

    pub fn centers(&self) -> Vec<Point> {
        (0..self.len()).map(|k| self.center(k)).collect()
    }

    pub fn measures(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.measure(k)).collect()
    }

    /// Typical cell size.
    pub fn spacing(&self) -> f64 {
        match self {
            Grid::Sector(g) => g.dr().max(g.r_max * g.dtheta()),
            Grid::Cartesian(g) => g.h(),
            Grid::Cloud(g) => g
                .measures
                .iter()
                .cloned()
                .fold(0.0, f64::max)
                .sqrt(),
        }
    }

    /// Chart of cell `k` when it is integrated accurately at `p`.
    fn near_chart(&self, p: Point, k: usize) -> Option<Chart> {
        let near = |(x, y): (f64, f64), i: usize, j: usize| {
            (x - i as f64).abs() < NEAR_CELLS as f64 + 0.5 && (y - j as f64).abs() < NEAR_CELLS as f64 + 0.5
        };
        match self {
            Grid::Sector(g) => {
                let (i, j) = (k / g.n_theta, k % g.n_theta);
                near(g.position(p), i, j).then(|| g.chart(i, j))
            }
            Grid::Cartesian(g) => {
                let (i, j) = g.lattice(k);
                near(g.position(p), i, j).then(|| g.chart(i, j))
            }
            Grid::Cloud(_) => None,
        }
    }

    /// The cell whose closure contains `p` (first match on shared edges).
    pub fn locate(&self, p: Point) -> Option<usize> {
        match self {
            Grid::Sector(g) => g.locate(p),
            Grid::Cartesian(g) => g.locate(p),
            Grid::Cloud(g) => g.centers.iter().position(|c| *c == p),
        }
    }
}

/// Nonnegative cell values on a grid, at scale `epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct VorticityField {
    pub grid: Arc<Grid>,
    pub values: Vec<f64>,
    pub epsilon: f64,
}

impl VorticityField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>, epsilon: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Config(format!(
                "{} values for a grid of {} cells",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid,
            values,
            epsilon,
        })
    }

    pub fn zeros(grid: Arc<Grid>, epsilon: f64) -> Self {
        let values = vec![0.0; grid.len()];
        Self {
            grid,
            values,
            epsilon,
        }
    }

    /// Cell values of `g` evaluated at the cell centers.
    pub fn from_fn(grid: Arc<Grid>, epsilon: f64, g: impl Fn(Point) -> f64) -> Self {
        let values = (0..grid.len()).map(|k| g(grid.center(k))).collect();
        Self {
            grid,
            values,
            epsilon,
        }
    }

    pub fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            grid: self.grid.clone(),
            values,
            epsilon: self.epsilon,
        }
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Cell sum of `weight(x) * value * measure`.
    pub fn moment(&self, weight: impl Fn(Point) -> f64) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(k, v)| v * weight(self.grid.center(k)) * self.grid.measure(k))
            .sum()
    }

    /// Measure-weighted L1 distance to another field on the same grid.
    pub fn l1_distance(&self, other: &[f64]) -> f64 {
        self.values
            .iter()
            .zip(other)
            .enumerate()
            .map(|(k, (a, b))| (a - b).abs() * self.grid.measure(k))
            .sum()
    }

    /// CSV with header `r,theta,value` (sector grids) or `x1,x2,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        match &*self.grid {
            Grid::Sector(g) => {
                writeln!(out, "r,theta,value")?;
                for i in 0..g.n_r {
                    for j in 0..g.n_theta {
                        let v = self.values[g.index(i, j)];
                        writeln!(out, "{},{},{}", g.radius(i), g.angle(j), v)?;
                    }
                }
            }
            grid => {
                writeln!(out, "x1,x2,value")?;
                for (k, v) in self.values.iter().enumerate() {
                    let c = grid.center(k);
                    writeln!(out, "{},{},{}", c.x, c.y, v)?;
                }
            }
        }
        Ok(())
    }
}

pub fn total_vorticity(field: &VorticityField) -> f64 {
    field.moment(|_| 1.0)
}

pub fn angular_momentum(field: &VorticityField) -> f64 {
    field.moment(|x| x.norm_squared())
}

/// First moment in `x1` over the half-plane copy only.
pub fn impulse(field: &VorticityField) -> f64 {
    field.moment(|x| x.x)
}

/// Cells at Chebyshev index distance up to this many steps are integrated accurately.
const NEAR_CELLS: usize = 3;

/// Exact integral of `c_s |x|^{2s-2}` over the disk whose area equals `area`.
pub fn self_cell_coefficient(s: f64, area: f64) -> Result<f64> {
    let c = riesz_constant(s)?;
    let r_eq = (area / PI).sqrt();
    Ok(c * PI / s * r_eq.powf(2.0 * s))
}

fn check_mode(grid: &Grid, spec: &KernelSpec) -> Result<()> {
    let ok = match (grid, spec.mode) {
        (Grid::Sector(g), KernelMode::NFold(n)) => g.n_fold == n,
        (Grid::Sector(_), _) => false,
        (_, KernelMode::NFold(_)) => false,
        _ => true,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "kernel mode {:?} does not match the grid type",
            spec.mode
        )))
    }
}

/// Kernel integral of a single cell against an evaluation point.
///
/// `direct` replaces the midpoint value of the untransformed (k = 0) term;
/// image terms are always midpoint values.
fn cell_contribution(
    spec: &KernelSpec,
    c: f64,
    point: Point,
    center: Point,
    measure: f64,
    direct: Option<f64>,
) -> Result<f64> {
    let exponent = 2.0 * spec.s - 2.0;
    let g = |a: Point, b: Point| -> Result<f64> {
        let r = (a - b).norm();
        if r == 0.0 {
            Err(Error::singular(a, b))
        } else {
            Ok(c * r.powf(exponent))
        }
    };
    let direct = match direct {
        Some(v) => v,
        None => g(point, center)? * measure,
    };
    Ok(match spec.mode {
        KernelMode::FreePlane => direct,
        KernelMode::NFold(n) => {
            let mut sum = direct;
            for k in 1..n {
                let image = rotate(2.0 * PI * k as f64 / n as f64, center);
                sum += g(point, image)? * measure;
            }
            sum
        }
        KernelMode::HalfPlaneOdd => {
            let reflected = Point::new(-point.x, point.y);
            direct - g(reflected, center)? * measure
        }
    })
}

/// Direct term of cell `k` at `p` when the midpoint rule is not used.
fn direct_term(grid: &Grid, s: f64, c: f64, p: Point, k: usize, own: bool) -> Result<Option<f64>> {
    if let Some(chart) = grid.near_chart(p, k) {
        return Ok(Some(c * chart.kernel_integral(s, p)));
    }
    if own && matches!(grid, Grid::Cloud(_)) {
        return Ok(Some(self_cell_coefficient(s, grid.measure(k))?));
    }
    Ok(None)
}

/// Quadrature of the kernel integral of `field` at arbitrary points.
pub fn riesz_potential(
    field: &VorticityField,
    spec: &KernelSpec,
    points: &[Point],
) -> Result<Vec<f64>> {
    let grid = &*field.grid;
    check_mode(grid, spec)?;
    let c = riesz_constant(spec.s)?;
    let centers = grid.centers();
    let measures = grid.measures();
    points
        .par_iter()
        .map(|&p| {
            let own = grid.locate(p);
            let mut sum = 0.0;
            for (k, v) in field.values.iter().enumerate() {
                if *v == 0.0 {
                    continue;
                }
                let direct = direct_term(grid, spec.s, c, p, k, own == Some(k))?;
                sum += v * cell_contribution(spec, c, p, centers[k], measures[k], direct)?;
            }
            Ok(sum)
        })
        .collect()
}

/// Precomputed quadrature weights for potentials evaluated at the cell centers.
///
/// Produces the same sums as [`riesz_potential`] at the centers, organized to
/// exploit translation (Cartesian) or rotation (sector) invariance of the kernel.
#[derive(Debug, Clone)]
pub struct PotentialOperator {
    grid: Arc<Grid>,
    spec: KernelSpec,
    plan: Plan,
}

#[derive(Debug, Clone)]
enum Plan {
    /// `weights[(i * n_r + i') * (2 n_theta - 1) + (j - j' + n_theta - 1)]`
    Sector { weights: Vec<f64> },
    /// Direct weights by lattice offset, reflected weights by `(i + i', j - j')`.
    Cartesian {
        direct: Vec<f64>,
        reflected: Option<Vec<f64>>,
    },
    Dense,
}

impl PotentialOperator {
    pub fn new(grid: Arc<Grid>, spec: KernelSpec) -> Result<Self> {
        check_mode(&grid, &spec)?;
        let c = riesz_constant(spec.s)?;
        let plan = match &*grid {
            Grid::Sector(g) => {
                let width = 2 * g.n_theta - 1;
                let mut weights = vec![0.0; g.n_r * g.n_r * width];
                weights
                    .par_chunks_mut(width)
                    .enumerate()
                    .try_for_each(|(pair, row)| -> Result<()> {
                        let (i, ip) = (pair / g.n_r, pair % g.n_r);
                        let measure = g.ring_measure(ip);
                        let source = Point::new(g.radius(ip), 0.0);
                        let mut chart = g.chart(ip, 0);
                        chart.v = (-0.5 * g.dtheta(), 0.5 * g.dtheta());
                        for (slot, w) in row.iter_mut().enumerate() {
                            let offset = slot as isize - (g.n_theta as isize - 1);
                            let target =
                                rotate(offset as f64 * g.dtheta(), Point::new(g.radius(i), 0.0));
                            let near = i.abs_diff(ip) <= NEAR_CELLS && offset.unsigned_abs() <= NEAR_CELLS;
                            let direct = near.then(|| c * chart.kernel_integral(spec.s, target));
                            *w = cell_contribution(&spec, c, target, source, measure, direct)?;
                        }
                        Ok(())
                    })?;
                Plan::Sector { weights }
            }
            Grid::Cartesian(g) => {
                let n = g.n as isize;
                let width = 2 * g.n - 1;
                let h = g.h();
                let area = h * h;
                let exponent = 2.0 * spec.s - 2.0;
                let mut direct = vec![0.0; width * width];
                for di in -(n - 1)..n {
                    for dj in -(n - 1)..n {
                        let slot = (di + n - 1) as usize * width + (dj + n - 1) as usize;
                        let near = di.unsigned_abs() <= NEAR_CELLS && dj.unsigned_abs() <= NEAR_CELLS;
                        direct[slot] = if near {
                            let target = Point::new(di as f64 * h, dj as f64 * h);
                            let chart = Chart {
                                u: (-h / 2.0, h / 2.0),
                                v: (-h / 2.0, h / 2.0),
                                polar: false,
                            };
                            c * chart.kernel_integral(spec.s, target)
                        } else {
                            let r = h * ((di * di + dj * dj) as f64).sqrt();
                            c * r.powf(exponent) * area
                        };
                    }
                }
                let reflected = if spec.mode == KernelMode::HalfPlaneOdd {
                    // x1 + x1' = 2 (c1 - R) + (i + i' + 1) h
                    let base = 2.0 * (g.center.x - g.radius);
                    let mut table = vec![0.0; width * width];
                    for sum in 0..width {
                        let a = base + (sum as f64 + 1.0) * h;
                        for dj in -(n - 1)..n {
                            let b = dj as f64 * h;
                            let r = (a * a + b * b).sqrt();
                            if r == 0.0 {
                                return Err(Error::Singular {
                                    x: [a, b],
                                    y: [0.0, 0.0],
                                });
                            }
                            table[sum * width + (dj + n - 1) as usize] = c * r.powf(exponent) * area;
                        }
                    }
                    Some(table)
                } else {
                    None
                };
                Plan::Cartesian { direct, reflected }
            }
            Grid::Cloud(_) => Plan::Dense,
        };
        Ok(Self { grid, spec, plan })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    /// Potential at every cell center.
    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.grid.len(), "field does not live on this grid");
        match (&self.plan, &*self.grid) {
            (Plan::Sector { weights }, Grid::Sector(g)) => {
                let (nr, nt) = (g.n_r, g.n_theta);
                let width = 2 * nt - 1;
                let mut out = vec![0.0; nr * nt];
                let sources: Vec<Vec<(usize, f64)>> = (0..nr)
                    .map(|ip| {
                        (0..nt)
                            .map(|jp| (jp, values[ip * nt + jp]))
                            .filter(|(_, v)| *v != 0.0)
                            .collect()
                    })
                    .collect();
                out.par_chunks_mut(nt).enumerate().for_each(|(i, ring)| {
                    for (ip, source) in sources.iter().enumerate() {
                        if source.is_empty() {
                            continue;
                        }
                        let row = &weights[(i * nr + ip) * width..(i * nr + ip + 1) * width];
                        for (j, acc) in ring.iter_mut().enumerate() {
                            // slot = j - j' + nt - 1
                            let window = &row[j..j + nt];
                            let mut sum = 0.0;
                            for &(jp, v) in source {
                                sum += window[nt - 1 - jp] * v;
                            }
                            *acc += sum;
                        }
                    }
                });
                out
            }
            (Plan::Cartesian { direct, reflected }, Grid::Cartesian(g)) => {
                let n = g.n;
                let width = 2 * n - 1;
                let sources: Vec<(usize, usize, f64)> = values
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(k, v)| {
                        let (i, j) = g.lattice(k);
                        (i, j, *v)
                    })
                    .collect();
                (0..g.len())
                    .into_par_iter()
                    .map(|k| {
                        let (i, j) = g.lattice(k);
                        let mut sum = 0.0;
                        for &(ip, jp, v) in &sources {
                            let dj = j + n - 1 - jp;
                            sum += v * direct[(i + n - 1 - ip) * width + dj];
                            if let Some(refl) = reflected {
                                sum -= v * refl[(i + ip) * width + dj];
                            }
                        }
                        sum
                    })
                    .collect()
            }
            _ => {
                let c = riesz_constant(self.spec.s).expect("validated at construction");
                let centers = self.grid.centers();
                let measures = self.grid.measures();
                (0..centers.len())
                    .into_par_iter()
                    .map(|k| {
                        let mut sum = 0.0;
                        for (m, v) in values.iter().enumerate() {
                            if *v != 0.0 {
                                let direct = (k == m).then(|| {
                                    self_cell_coefficient(self.spec.s, measures[m]).unwrap_or(f64::NAN)
                                });
                                sum += v * cell_contribution(
                                    &self.spec,
                                    c,
                                    centers[k],
                                    centers[m],
                                    measures[m],
                                    direct,
                                )
                                .unwrap_or(f64::NAN);
                            }
                        }
                        sum
                    })
                    .collect()
            }
        }
    }
}

/// Prefactor convention of a quadratic interaction functional.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Functional {
    /// `1/2 * double integral`, the quadratic part of the penalized energies.
    Half,
    /// `N/2 * double integral` over one sector: the kinetic energy of the N-fold field.
    Kinetic,
    /// The bare double integral, e.g. the Riesz interaction of a rescaled field.
    Full,
}

impl Functional {
    fn factor(self, spec: &KernelSpec) -> f64 {
        match (self, spec.mode) {
            (Functional::Half, _) => 0.5,
            (Functional::Kinetic, KernelMode::NFold(n)) => 0.5 * n as f64,
            (Functional::Kinetic, _) => 0.5,
            (Functional::Full, _) => 1.0,
        }
    }
}

/// Cell sum of `value * potential * measure`, scaled by the functional's prefactor.
pub fn interaction_energy(
    field: &VorticityField,
    spec: &KernelSpec,
    functional: Functional,
) -> Result<f64> {
    let op = PotentialOperator::new(field.grid.clone(), *spec)?;
    Ok(energy_with(&op, field, functional))
}

/// [`interaction_energy`] reusing a prepared operator.
pub fn energy_with(op: &PotentialOperator, field: &VorticityField, functional: Functional) -> f64 {
    let potential = op.apply(&field.values);
    functional.factor(op.spec()) * pairing(field, &potential)
}

pub(crate) fn pairing(field: &VorticityField, potential: &[f64]) -> f64 {
    field
        .values
        .iter()
        .zip(potential)
        .enumerate()
        .map(|(k, (v, p))| v * p * field.grid.measure(k))
        .sum()
}

/// `zeta(x) = eps^2 * omega(center + eps * x)`, carried as a cloud of rescaled cells.
///
/// Disk grids stay disk grids; sector cells become an unstructured cloud.
pub fn rescale(field: &VorticityField, center: Point) -> Result<VorticityField> {
    let eps = field.epsilon;
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("epsilon must be positive, got {eps}")));
    }
    let values = field.values.iter().map(|v| v * eps * eps).collect();
    let grid = match &*field.grid {
        Grid::Cartesian(g) => Grid::Cartesian(CartesianGrid::new(
            (g.center - center) / eps,
            g.radius / eps,
            g.n,
        )?),
        grid => Grid::Cloud(PointCloud {
            centers: (0..grid.len()).map(|k| (grid.center(k) - center) / eps).collect(),
            measures: (0..grid.len()).map(|k| grid.measure(k) / (eps * eps)).collect(),
        }),
    };
    Ok(VorticityField {
        grid: Arc::new(grid),
        values,
        epsilon: 1.0,
    })
}

/// Geometry of a field's superlevel set and the mass distribution around its centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportMetrics {
    /// Largest distance between centers of cells above the threshold.
    pub diameter: f64,
    /// Mass-weighted centroid of the whole field.
    pub centroid: Point,
    /// `(distance to centroid, cell mass)`, sorted by distance.
    radial_masses: Vec<(f64, f64)>,
    total: f64,
}

impl SupportMetrics {
    /// Fraction of the total mass inside the open ball of radius `r` around the centroid.
    pub fn mass_in_ball(&self, r: f64) -> f64 {
        let inside: f64 = self
            .radial_masses
            .iter()
            .take_while(|(d, _)| *d < r)
            .map(|(_, m)| m)
            .sum();
        inside / self.total
    }
}

pub fn support_metrics(field: &VorticityField, threshold: f64) -> Result<SupportMetrics> {
    if !(threshold >= 0.0) {
        return Err(Error::Domain(format!("threshold must be nonnegative, got {threshold}")));
    }
    let grid = &*field.grid;
    let support: Vec<Point> = field
        .values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > threshold)
        .map(|(k, _)| grid.center(k))
        .collect();
    let total = total_vorticity(field);
    if support.is_empty() || total <= 0.0 {
        return Err(Error::EmptySupport { threshold });
    }
    let diameter = support
        .par_iter()
        .enumerate()
        .map(|(a, p)| {
            support[a + 1..]
                .iter()
                .map(|q| (p - q).norm())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    let centroid = Point::new(field.moment(|x| x.x), field.moment(|x| x.y)) / total;
    let mut radial_masses: Vec<(f64, f64)> = field
        .values
        .iter()
        .enumerate()
        .map(|(k, v)| ((grid.center(k) - centroid).norm(), v * grid.measure(k)))
        .collect();
    radial_masses.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(SupportMetrics {
        diameter,
        centroid,
        radial_masses,
        total,
    })
}
