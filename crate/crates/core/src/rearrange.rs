//! Discrete rearrangements: angular Steiner symmetrization on sector rings,
//! Steiner symmetrization in `x2` on disk-grid columns, the radially
//! decreasing rearrangement, and the bathtub fill.
//!
//! Within a fiber the values are sorted decreasingly (stable) and dealt out to
//! positions ordered by distance from the symmetry axis. Of two mirror
//! positions the nonnegative one comes first.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::{Grid, VorticityField};

/// Positions `0..n` of a symmetric 1-D lattice ordered by distance from its
/// middle, the upper (nonnegative) member of each mirror pair first.
fn symmetric_order(n: usize) -> Vec<usize> {
    let mut order = Vec::with_capacity(n);
    if n % 2 == 1 {
        let m = n / 2;
        order.push(m);
        for d in 1..=m {
            order.push(m + d);
            order.push(m - d);
        }
    } else {
        let m = n / 2;
        for d in 0..m {
            order.push(m + d);
            order.push(m - 1 - d);
        }
    }
    order
}

/// Rearrange `values[slots[k]]` so that the largest lands on `slots[order[0]]`, and so on.
fn deal(values: &mut [f64], slots: &[usize], order: &[usize]) {
    let mut fiber: Vec<f64> = slots.iter().map(|&k| values[k]).collect();
    fiber.sort_by(|a, b| b.total_cmp(a));
    for (v, &pos) in fiber.into_iter().zip(order) {
        values[slots[pos]] = v;
    }
}

/// Per radius ring, an even profile nonincreasing in `|theta|` with the ring's values.
pub fn angular_steiner(field: &VorticityField) -> Result<VorticityField> {
    let Grid::Sector(g) = &*field.grid else {
        return Err(Error::Config("angular Steiner symmetrization needs a sector grid".into()));
    };
    let order = symmetric_order(g.n_theta);
    let mut values = field.values.clone();
    for i in 0..g.n_r {
        let slots: Vec<usize> = (0..g.n_theta).map(|j| g.index(i, j)).collect();
        deal(&mut values, &slots, &order);
    }
    Ok(field.with_values(values))
}

/// Per `x1` column, an even profile nonincreasing in `|x2|` with the column's values.
pub fn steiner_x2(field: &VorticityField) -> Result<VorticityField> {
    let Grid::Cartesian(g) = &*field.grid else {
        return Err(Error::Config("Steiner symmetrization in x2 needs a disk grid".into()));
    };
    if g.center.y != 0.0 {
        return Err(Error::Config(format!(
            "disk grid is not symmetric about x2 = 0 (center x2 = {})",
            g.center.y
        )));
    }
    let mut values = field.values.clone();
    for i in 0..g.n {
        let slots: Vec<usize> = (0..g.n).filter_map(|j| g.cell_at(i, j)).collect();
        if slots.is_empty() {
            continue;
        }
        let order = symmetric_order(slots.len());
        deal(&mut values, &slots, &order);
    }
    Ok(field.with_values(values))
}

/// Values sorted decreasingly onto cells sorted by distance from the origin.
///
/// Needs equal cell measures, so that the rearrangement is a permutation.
pub fn radial_decreasing(field: &VorticityField) -> Result<VorticityField> {
    let grid = &*field.grid;
    if !matches!(grid, Grid::Cartesian(_)) {
        return Err(Error::Config("radial rearrangement needs equal cell measures".into()));
    }
    let mut cells: Vec<(f64, usize)> = (0..grid.len()).map(|k| (grid.center(k).norm(), k)).collect();
    cells.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut sorted = field.values.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut values = vec![0.0; grid.len()];
    for ((_, k), v) in cells.into_iter().zip(sorted) {
        values[k] = v;
    }
    Ok(field.with_values(values))
}

/// Maximizer of `sum u xi measure` over `0 <= xi <= 1` with `sum xi measure = beta`.
///
/// Cells are filled in decreasing order of `u`; the marginal cell is filled fractionally.
pub fn bathtub_fill(grid: &Arc<Grid>, weight: &[f64], beta: f64) -> Result<VorticityField> {
    if !(beta >= 0.0) {
        return Err(Error::Domain(format!("mass must be nonnegative, got {beta}")));
    }
    if weight.len() != grid.len() {
        return Err(Error::Config("weight does not match the grid".into()));
    }
    let capacity: f64 = grid.measures().iter().sum();
    if beta > capacity * (1.0 + 1e-12) {
        return Err(Error::Domain(format!("mass {beta} exceeds the grid capacity {capacity}")));
    }
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| weight[b].total_cmp(&weight[a]).then(a.cmp(&b)));
    let mut values = vec![0.0; grid.len()];
    let mut left = beta;
    for k in order {
        if left <= 0.0 {
            break;
        }
        let m = grid.measure(k);
        let xi = (left / m).min(1.0);
        values[k] = xi;
        left -= xi * m;
    }
    VorticityField::new(grid.clone(), values, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{
        angular_momentum, interaction_energy, total_vorticity, CartesianGrid, Functional,
        SectorGrid,
    };
    use crate::kernels::KernelSpec;
    use crate::Point;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn sector(n_fold: usize, n_r: usize, n_theta: usize) -> Arc<Grid> {
        Arc::new(Grid::Sector(SectorGrid::new(n_fold, n_r, n_theta).unwrap()))
    }

    fn disk(n: usize) -> Arc<Grid> {
        Arc::new(Grid::Cartesian(CartesianGrid::new(Point::zeros(), 1.0, n).unwrap()))
    }

    fn random_field(grid: Arc<Grid>, rng: &mut ChaCha8Rng) -> VorticityField {
        let values = (0..grid.len())
            .map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen::<f64>() })
            .collect();
        VorticityField::new(grid, values, 0.1).unwrap()
    }

    fn sorted(mut v: Vec<f64>) -> Vec<f64> {
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn order_puts_nonnegative_side_first() {
        assert_eq!(symmetric_order(3), vec![1, 2, 0]);
        assert_eq!(symmetric_order(4), vec![2, 1, 3, 0]);
        assert_eq!(symmetric_order(1), vec![0]);
    }

    #[test]
    fn ring_example() {
        let grid = sector(3, 1, 3);
        let field = VorticityField::new(grid, vec![0.0, 2.0, 1.0], 0.1).unwrap();
        assert_eq!(angular_steiner(&field).unwrap().values, vec![0.0, 2.0, 1.0]);
        let field = field.with_values(vec![1.0, 0.0, 2.0]);
        assert_eq!(angular_steiner(&field).unwrap().values, vec![0.0, 2.0, 1.0]);
        let symmetric = field.with_values(vec![1.0, 3.0, 1.0]);
        assert_eq!(angular_steiner(&symmetric).unwrap().values, symmetric.values);
    }

    #[test]
    fn column_example() {
        // a 3x3 lattice on a disk: the middle column has x2 = [-h, 0, h]
        let grid = Arc::new(Grid::Cartesian(CartesianGrid::new(Point::new(1.0, 0.0), 1.5, 3).unwrap()));
        let Grid::Cartesian(g) = &*grid else { unreachable!() };
        let mut values = vec![0.0; grid.len()];
        for (j, v) in [3.0, 1.0, 2.0].into_iter().enumerate() {
            values[g.cell_at(1, j).unwrap()] = v;
        }
        let out = steiner_x2(&VorticityField::new(grid.clone(), values, 0.1).unwrap()).unwrap();
        let column: Vec<f64> = (0..3).map(|j| out.values[g.cell_at(1, j).unwrap()]).collect();
        assert_eq!(column, vec![1.0, 3.0, 2.0]);

        let off = Arc::new(Grid::Cartesian(CartesianGrid::new(Point::new(1.0, 0.1), 0.5, 4).unwrap()));
        assert!(matches!(steiner_x2(&VorticityField::zeros(off, 0.1)), Err(Error::Config(_))));
    }

    #[test]
    fn fibers_keep_their_values_and_rearrangements_are_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let grid = sector(4, 5, 7);
        let Grid::Sector(g) = &*grid else { unreachable!() };
        for _ in 0..20 {
            let field = random_field(grid.clone(), &mut rng);
            let once = angular_steiner(&field).unwrap();
            for i in 0..g.n_r {
                let ring = |f: &VorticityField| sorted((0..g.n_theta).map(|j| f.values[g.index(i, j)]).collect());
                assert_eq!(ring(&field), ring(&once));
                let order = symmetric_order(g.n_theta);
                for w in order.windows(2) {
                    assert!(once.values[g.index(i, w[0])] >= once.values[g.index(i, w[1])]);
                }
            }
            assert_eq!(angular_steiner(&once).unwrap(), once);
        }
        let disk_grid = Arc::new(Grid::Cartesian(CartesianGrid::travelling(1.0, 15).unwrap()));
        let Grid::Cartesian(dg) = &*disk_grid else { unreachable!() };
        for _ in 0..20 {
            let field = random_field(disk_grid.clone(), &mut rng);
            let once = steiner_x2(&field).unwrap();
            for i in 0..dg.n {
                let col = |f: &VorticityField| sorted((0..dg.n).filter_map(|j| dg.cell_at(i, j)).map(|k| f.values[k]).collect());
                assert_eq!(col(&field), col(&once));
            }
            assert_eq!(steiner_x2(&once).unwrap(), once);
            let radial = radial_decreasing(&field).unwrap();
            assert_eq!(sorted(radial.values.clone()), sorted(field.values.clone()));
            assert_eq!(radial_decreasing(&radial).unwrap(), radial);
        }
    }

    #[test]
    fn radial_weights_are_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let grid = sector(3, 9, 11);
        for _ in 0..20 {
            let field = random_field(grid.clone(), &mut rng);
            let sym = angular_steiner(&field).unwrap();
            let (a, b, c) = (rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>());
            let weight = |x: Point| {
                let r = x.norm();
                a + b * r.powf(3.0 * c) + (5.0 * c * r).sin()
            };
            let before = field.moment(weight);
            let after = sym.moment(weight);
            assert!((before - after).abs() <= 1e-12 * before.abs().max(1.0));
        }
        let field = random_field(grid, &mut rng);
        let sym = angular_steiner(&field).unwrap();
        assert!((angular_momentum(&field) - angular_momentum(&sym)).abs() < 1e-12);
    }

    #[test]
    fn angular_steiner_increases_nfold_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for (n_fold, s) in [(3, 0.5), (2, 0.75), (5, 0.6)] {
            let grid = sector(n_fold, 10, 12);
            let spec = KernelSpec::n_fold(s, n_fold).unwrap();
            for _ in 0..30 {
                let field = random_field(grid.clone(), &mut rng);
                let e = interaction_energy(&field, &spec, Functional::Kinetic).unwrap();
                let sym = angular_steiner(&field).unwrap();
                let e_sym = interaction_energy(&sym, &spec, Functional::Kinetic).unwrap();
                assert!(e_sym >= e - 1e-9 * e.abs(), "{e_sym} < {e}");
            }
        }
    }

    #[test]
    fn steiner_x2_increases_travelling_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let grid = Arc::new(Grid::Cartesian(CartesianGrid::travelling(1.0, 16).unwrap()));
        let spec = KernelSpec::half_plane(0.5).unwrap();
        let speed = 0.04;
        let energy = |f: &VorticityField| {
            interaction_energy(f, &spec, Functional::Half).unwrap() - speed * crate::fields::impulse(f)
        };
        for _ in 0..30 {
            let field = random_field(grid.clone(), &mut rng);
            let sym = steiner_x2(&field).unwrap();
            let (e, e_sym) = (energy(&field), energy(&sym));
            assert!(e_sym >= e - 1e-9 * e.abs());
            assert!((crate::fields::impulse(&field) - crate::fields::impulse(&sym)).abs() < 1e-12);
        }
    }

    #[test]
    fn ball_is_its_own_radial_rearrangement() {
        let grid = disk(40);
        let ball = VorticityField::from_fn(grid.clone(), 1.0, |x| if x.norm() < 0.5 { 1.0 } else { 0.0 });
        assert_eq!(radial_decreasing(&ball).unwrap(), ball);
        let sector_field = VorticityField::zeros(sector(3, 2, 2), 1.0);
        assert!(radial_decreasing(&sector_field).is_err());
    }

    #[test]
    fn riesz_rearrangement_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let grid = disk(20);
        let spec = KernelSpec::free_plane(0.5).unwrap();
        for _ in 0..25 {
            let field = random_field(grid.clone(), &mut rng);
            let star = radial_decreasing(&field).unwrap();
            assert!((total_vorticity(&field) - total_vorticity(&star)).abs() < 1e-12);
            let i = interaction_energy(&field, &spec, Functional::Full).unwrap();
            let i_star = interaction_energy(&star, &spec, Functional::Full).unwrap();
            assert!(i <= i_star + 1e-6 * i_star.abs());
        }
    }

    #[test]
    fn bathtub_recovers_ball() {
        let grid = disk(64);
        let h = grid.spacing();
        let c = Point::new(0.1, -0.2);
        let r = 0.45;
        let u: Vec<f64> = grid.centers().iter().map(|x| -(x - c).norm()).collect();
        let xi = bathtub_fill(&grid, &u, PI * r * r).unwrap();
        assert!((total_vorticity(&xi) - PI * r * r).abs() < 1e-12);
        for (k, v) in xi.values.iter().enumerate() {
            let d = (grid.center(k) - c).norm();
            if d < r - h {
                assert_eq!(*v, 1.0);
            } else if d > r + h {
                assert_eq!(*v, 0.0);
            }
        }
        let empty = bathtub_fill(&grid, &u, 0.0).unwrap();
        assert!(empty.values.iter().all(|v| *v == 0.0));
        assert!(bathtub_fill(&grid, &u, -1.0).is_err());
        assert!(bathtub_fill(&grid, &u, 10.0).is_err());
    }

    #[test]
    fn bathtub_beats_random_competitors() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let grid = disk(24);
        let measures = grid.measures();
        let capacity: f64 = measures.iter().sum();
        let u: Vec<f64> = (0..grid.len()).map(|_| rng.gen::<f64>() - 0.3).collect();
        let beta = 0.3 * capacity;
        let best = bathtub_fill(&grid, &u, beta).unwrap();
        let objective = |xi: &[f64]| -> f64 { xi.iter().zip(&u).zip(&measures).map(|((x, w), m)| x * w * m).sum() };
        let target = objective(&best.values);
        for trial in 0..200 {
            let xi: Vec<f64> = if trial % 2 == 0 {
                let raw: Vec<f64> = (0..grid.len()).map(|_| rng.gen::<f64>()).collect();
                let mass: f64 = raw.iter().zip(&measures).map(|(x, m)| x * m).sum();
                raw.iter().map(|x| x * beta / mass).collect()
            } else {
                let mut order: Vec<usize> = (0..grid.len()).collect();
                for k in (1..order.len()).rev() {
                    order.swap(k, rng.gen_range(0..=k));
                }
                let mut xi = vec![0.0; grid.len()];
                let mut left = beta;
                for k in order {
                    let take = (left / measures[k]).clamp(0.0, 1.0);
                    xi[k] = take;
                    left -= take * measures[k];
                }
                xi
            };
            assert!(xi.iter().all(|x| (0.0..=1.0).contains(x)));
            assert!(objective(&xi) <= target + 1e-12);
        }
    }

    proptest! {
        #[test]
        fn angular_steiner_idempotent(values in proptest::collection::vec(0.0..5.0f64, 30)) {
            let field = VorticityField::new(sector(2, 5, 6), values, 0.1).unwrap();
            let once = angular_steiner(&field).unwrap();
            prop_assert_eq!(angular_steiner(&once).unwrap(), once);
        }
    }
}
