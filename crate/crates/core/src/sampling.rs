//! Sub-cell samples of the stream function.
//!
//! The candidate value of a cell is the average of `f_lambda(psi)` over a
//! `q x q` lattice of points inside the cell, with `psi` reconstructed from
//! the cell-center potentials by a local quadratic in the grid coordinates.
//! The edge of the support can then move continuously instead of in whole
//! cells.

use crate::error::{Error, Result};
use crate::fields::Grid;
use crate::Point;

#[derive(Debug, Clone, Copy)]
struct Stencil {
    /// Neighbours at `-1` and `+1` along the first and the second grid direction.
    u: [Option<usize>; 2],
    v: [Option<usize>; 2],
    /// `(-,-), (-,+), (+,-), (+,+)` diagonal neighbours.
    diag: Option<[usize; 4]>,
}

#[derive(Debug, Clone)]
pub(crate) struct Samples {
    pub per_cell: usize,
    /// Weight of each sample within its cell; sums to 1 over a cell.
    pub share: Vec<f64>,
    /// Cell measure times share.
    pub mass: Vec<f64>,
    /// Squared radius of the owning cell center, so that the sampled moment
    /// matches the cell-center moment of the averaged field.
    pub cell_radius2: Vec<f64>,
    /// Squared radius of the sample point.
    pub radius2: Vec<f64>,
    /// First coordinate of the owning cell center and of the sample point.
    pub cell_x1: Vec<f64>,
    pub x1: Vec<f64>,
    /// Drift term of the stream function at the sample point.
    pub drift: Vec<f64>,
    offsets: Vec<(f64, f64)>,
    steps: (f64, f64),
    stencils: Vec<Stencil>,
}

impl Samples {
    pub fn new(grid: &Grid, per_side: usize, drift: impl Fn(Point) -> f64) -> Result<Self> {
        let q = per_side.max(1);
        let unit: Vec<f64> = (0..q).map(|a| (a as f64 + 0.5) / q as f64 - 0.5).collect();
        let n = grid.len();
        let mut stencils = Vec::with_capacity(n);
        let mut share = Vec::with_capacity(n * q * q);
        let mut mass = Vec::with_capacity(n * q * q);
        let mut cell_radius2 = Vec::with_capacity(n * q * q);
        let mut radius2 = Vec::with_capacity(n * q * q);
        let mut cell_x1 = Vec::with_capacity(n * q * q);
        let mut x1 = Vec::with_capacity(n * q * q);
        let mut drifts = Vec::with_capacity(n * q * q);
        let mut offsets = Vec::with_capacity(n * q * q);
        let steps = match grid {
            Grid::Sector(g) => (g.dr(), g.dtheta()),
            Grid::Cartesian(g) => (g.h(), g.h()),
            Grid::Cloud(_) => {
                return Err(Error::Config("sub-cell sampling needs a structured grid".into()))
            }
        };
        for k in 0..n {
            let center = grid.center(k);
            let lookup: Box<dyn Fn(isize, isize) -> Option<usize> + '_> = match grid {
                Grid::Sector(g) => {
                    let (i, j) = (k / g.n_theta, k % g.n_theta);
                    let look = move |di: isize, dj: isize| {
                        let (a, b) = (i as isize + di, j as isize + dj);
                        (a >= 0 && b >= 0 && (a as usize) < g.n_r && (b as usize) < g.n_theta)
                            .then(|| g.index(a as usize, b as usize))
                    };
                    Box::new(look)
                }
                Grid::Cartesian(g) => {
                    let (i, j) = g.lattice(k);
                    let look = move |di: isize, dj: isize| {
                        let (a, b) = (i as isize + di, j as isize + dj);
                        if a < 0 || b < 0 {
                            None
                        } else {
                            g.cell_at(a as usize, b as usize)
                        }
                    };
                    Box::new(look)
                }
                Grid::Cloud(_) => unreachable!(),
            };
            let corners = [lookup(-1, -1), lookup(-1, 1), lookup(1, -1), lookup(1, 1)];
            stencils.push(Stencil {
                u: [lookup(-1, 0), lookup(1, 0)],
                v: [lookup(0, -1), lookup(0, 1)],
                diag: match corners {
                    [Some(a), Some(b), Some(c), Some(d)] => Some([a, b, c, d]),
                    _ => None,
                },
            });
            let mut points = Vec::with_capacity(q * q);
            for &a in &unit {
                for &b in &unit {
                    let (du, dv) = (a * steps.0, b * steps.1);
                    let (x, jac) = match grid {
                        Grid::Sector(_) => {
                            let r = center.norm() + du;
                            let t = center.y.atan2(center.x) + dv;
                            (Point::new(r * t.cos(), r * t.sin()), r)
                        }
                        _ => (center + Point::new(du, dv), 1.0),
                    };
                    points.push((du, dv, x, jac));
                }
            }
            let total: f64 = points.iter().map(|p| p.3).sum();
            let measure = grid.measure(k);
            for (du, dv, x, jac) in points {
                let w = jac / total;
                share.push(w);
                mass.push(measure * w);
                cell_radius2.push(center.norm_squared());
                radius2.push(x.norm_squared());
                cell_x1.push(center.x);
                x1.push(x.x);
                drifts.push(drift(x));
                offsets.push((du, dv));
            }
        }
        Ok(Self {
            per_cell: q * q,
            share,
            mass,
            cell_radius2,
            radius2,
            cell_x1,
            x1,
            drift: drifts,
            offsets,
            steps,
            stencils,
        })
    }

    /// Reconstructed potential plus drift at every sample.
    pub fn base(&self, potential: &[f64]) -> Vec<f64> {
        let (hu, hv) = self.steps;
        let mut out = Vec::with_capacity(self.share.len());
        for (k, st) in self.stencils.iter().enumerate() {
            let p = potential[k];
            let derivs = |pair: [Option<usize>; 2], h: f64| match pair {
                [Some(m), Some(q)] => (
                    (potential[q] - potential[m]) / (2.0 * h),
                    (potential[q] - 2.0 * p + potential[m]) / (h * h),
                ),
                [Some(m), None] => ((p - potential[m]) / h, 0.0),
                [None, Some(q)] => ((potential[q] - p) / h, 0.0),
                [None, None] => (0.0, 0.0),
            };
            let (pu, puu) = derivs(st.u, hu);
            let (pv, pvv) = derivs(st.v, hv);
            let puv = st.diag.map_or(0.0, |[mm, mp, pm, pp]| {
                (potential[pp] - potential[pm] - potential[mp] + potential[mm]) / (4.0 * hu * hv)
            });
            for q in k * self.per_cell..(k + 1) * self.per_cell {
                let (du, dv) = self.offsets[q];
                let value = p
                    + pu * du
                    + pv * dv
                    + 0.5 * puu * du * du
                    + puv * du * dv
                    + 0.5 * pvv * dv * dv;
                out.push(value + self.drift[q]);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{CartesianGrid, SectorGrid};
    use approx::assert_relative_eq;

    #[test]
    fn shares_sum_to_one_and_mass_to_the_area() {
        let grid = Grid::Sector(SectorGrid::window(3, 0.9, 1.1, 0.1, 6, 5).unwrap());
        let samples = Samples::new(&grid, 4, |_| 0.0).unwrap();
        for k in 0..grid.len() {
            let range = k * 16..(k + 1) * 16;
            assert_relative_eq!(samples.share[range.clone()].iter().sum::<f64>(), 1.0, max_relative = 1e-14);
            assert_relative_eq!(samples.mass[range].iter().sum::<f64>(), grid.measure(k), max_relative = 1e-14);
        }
    }

    #[test]
    fn quadratics_are_reconstructed_exactly() {
        let grid = Grid::Cartesian(CartesianGrid::new(Point::new(1.0, 0.0), 0.5, 10).unwrap());
        let g = |x: Point| 1.0 + 2.0 * x.x - x.y + 0.5 * x.x * x.x + 3.0 * x.x * x.y - x.y * x.y;
        let potential: Vec<f64> = grid.centers().into_iter().map(g).collect();
        let samples = Samples::new(&grid, 3, |x| -0.25 * x.x).unwrap();
        let base = samples.base(&potential);
        let Grid::Cartesian(cart) = &grid else { unreachable!() };
        for k in 0..grid.len() {
            let (i, j) = cart.lattice(k);
            if i == 0 || j == 0 {
                continue;
            }
            let interior = [(0, 1), (2, 1), (1, 0), (1, 2), (0, 0), (0, 2), (2, 0), (2, 2)]
                .iter()
                .all(|&(a, b)| cart.cell_at(i + a - 1, j + b - 1).is_some());
            if !interior {
                continue;
            }
            for q in k * 9..(k + 1) * 9 {
                let (du, dv) = samples.offsets[q];
                let x = grid.center(k) + Point::new(du, dv);
                assert_relative_eq!(base[q], g(x) - 0.25 * x.x, max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn clouds_are_rejected() {
        let grid = Grid::Cloud(crate::fields::PointCloud {
            centers: vec![Point::zeros()],
            measures: vec![1.0],
        });
        assert!(Samples::new(&grid, 2, |_| 0.0).is_err());
    }
}
