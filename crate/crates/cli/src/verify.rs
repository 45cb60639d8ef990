//! Randomized and lattice checks of the structural properties the solver relies on.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use gsqg_core::fields::{interaction_energy, total_vorticity, CartesianGrid, Functional, Grid, SectorGrid, VorticityField};
use gsqg_core::kernels::{polar_kernel, KernelSpec};
use gsqg_core::nonlinearity::{conjugate_j, conjugate_j_lambda, eval_f_lambda, inverse_f_lambda, Nonlinearity};
use gsqg_core::rearrange::{angular_steiner, bathtub_fill, radial_decreasing};
use gsqg_core::{Point, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value of the checked quantity, against `limit`.
    pub worst: f64,
    pub limit: f64,
    pub cases: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub checks: Vec<Check>,
    pub passed: bool,
}

pub const DEFAULT_SEED: u64 = 20240917;

fn timed(name: &'static str, limit: f64, run: impl FnOnce() -> Result<(f64, usize)>) -> Result<Check> {
    let start = Instant::now();
    let (worst, cases) = run()?;
    Ok(Check {
        name,
        passed: worst <= limit,
        worst,
        limit,
        cases,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn random_field(grid: &Arc<Grid>, rng: &mut ChaCha8Rng) -> Result<VorticityField> {
    let values = (0..grid.len())
        .map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen::<f64>() })
        .collect();
    VorticityField::new(grid.clone(), values, 0.1)
}

/// Relative asymmetry `|V(tau) - V(-tau)| / |V|` on the lattice; a nonnegative
/// tau-derivative anywhere makes the check fail outright.
fn polar_kernel_shape() -> Result<(f64, usize)> {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for s in [0.5, 0.75] {
        for n in [2usize, 3, 5] {
            let half = PI / n as f64;
            for i in 0..10 {
                for j in 0..10 {
                    let r = 0.55 + 0.9 * i as f64 / 9.0;
                    let rp = 0.55 + 0.9 * j as f64 / 9.0;
                    for k in 0..10 {
                        let tau = half * (k as f64 + 0.5) / 10.0;
                        let plus = polar_kernel(s, n, r, rp, tau)?;
                        let minus = polar_kernel(s, n, r, rp, -tau)?;
                        worst = worst.max((plus - minus).abs() / plus.abs());
                        let dt = 1e-6 * half;
                        let slope = polar_kernel(s, n, r, rp, tau + dt)? - polar_kernel(s, n, r, rp, tau - dt)?;
                        if slope >= 0.0 {
                            worst = f64::INFINITY;
                        }
                        cases += 1;
                    }
                }
            }
        }
    }
    Ok((worst, cases))
}

/// `(I(zeta) - I(zeta*))_+ / I(zeta*)` over random fields on a disk grid.
fn riesz_rearrangement(rng: &mut ChaCha8Rng) -> Result<(f64, usize)> {
    let grid = Arc::new(Grid::Cartesian(CartesianGrid::new(Point::zeros(), 1.0, 20)?));
    let spec = KernelSpec::free_plane(0.5)?;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let field = random_field(&grid, rng)?;
        let star = radial_decreasing(&field)?;
        let i = interaction_energy(&field, &spec, Functional::Full)?;
        let i_star = interaction_energy(&star, &spec, Functional::Full)?;
        worst = worst.max((i - i_star) / i_star.abs());
    }
    Ok((worst, 100))
}

/// `(E(omega) - E(omega#))_+ / |E|` over random sector fields.
fn steiner_energy(rng: &mut ChaCha8Rng) -> Result<(f64, usize)> {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for (n_fold, s) in [(3, 0.5), (2, 0.75), (5, 0.6), (4, 0.5)] {
        let grid = Arc::new(Grid::Sector(SectorGrid::new(n_fold, 10, 12)?));
        let spec = KernelSpec::n_fold(s, n_fold)?;
        for _ in 0..25 {
            let field = random_field(&grid, rng)?;
            let e = interaction_energy(&field, &spec, Functional::Kinetic)?;
            let e_sym = interaction_energy(&angular_steiner(&field)?, &spec, Functional::Kinetic)?;
            worst = worst.max((e - e_sym) / e.abs());
            cases += 1;
        }
    }
    Ok((worst, cases))
}

/// Relative change of `sum g(r) omega` under symmetrization.
fn radial_weights(rng: &mut ChaCha8Rng) -> Result<(f64, usize)> {
    let grid = Arc::new(Grid::Sector(SectorGrid::new(3, 9, 11)?));
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let field = random_field(&grid, rng)?;
        let sym = angular_steiner(&field)?;
        let (a, b, c) = (rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>());
        let weight = |x: Point| {
            let r = x.norm();
            a + b * r.powf(3.0 * c) + (5.0 * c * r).sin()
        };
        let before = field.moment(weight);
        let after = sym.moment(weight);
        worst = worst.max((before - after).abs() / before.abs().max(1.0));
    }
    Ok((worst, 20))
}

/// Largest gain of a random admissible competitor over the bathtub fill, plus
/// the number of misplaced cells more than one ring away from the ball.
fn bathtub(rng: &mut ChaCha8Rng) -> Result<(f64, usize)> {
    let grid = Arc::new(Grid::Cartesian(CartesianGrid::new(Point::zeros(), 1.0, 24)?));
    let measures = grid.measures();
    let capacity: f64 = measures.iter().sum();
    let u: Vec<f64> = (0..grid.len()).map(|_| rng.gen::<f64>() - 0.3).collect();
    let beta = 0.3 * capacity;
    let best = bathtub_fill(&grid, &u, beta)?;
    let objective = |xi: &[f64]| -> f64 { xi.iter().zip(&u).zip(&measures).map(|((x, w), m)| x * w * m).sum() };
    let target = objective(&best.values);
    let mut worst = f64::NEG_INFINITY;
    for trial in 0..200 {
        let xi: Vec<f64> = if trial % 2 == 0 {
            let raw: Vec<f64> = (0..grid.len()).map(|_| rng.gen::<f64>()).collect();
            let mass: f64 = raw.iter().zip(&measures).map(|(x, m)| x * m).sum();
            raw.iter().map(|x| (x * beta / mass).min(1.0)).collect()
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
        worst = worst.max(objective(&xi) - target);
    }

    let disk = Arc::new(Grid::Cartesian(CartesianGrid::new(Point::zeros(), 1.0, 64)?));
    let h = disk.spacing();
    let (c, r) = (Point::new(0.1, -0.2), 0.45);
    let weight: Vec<f64> = disk.centers().iter().map(|x| -(x - c).norm()).collect();
    let ball = bathtub_fill(&disk, &weight, PI * r * r)?;
    let misplaced = (0..disk.len())
        .filter(|&k| {
            let d = (disk.center(k) - c).norm();
            (d < r - h && ball.values[k] != 1.0) || (d > r + h && ball.values[k] != 0.0)
        })
        .count();
    let mass_gap = (total_vorticity(&ball) - PI * r * r).abs();
    if misplaced > 0 || mass_gap > 1e-12 {
        worst = f64::INFINITY;
    }
    Ok((worst.max(0.0), 201))
}

fn profiles() -> Result<Vec<Nonlinearity>> {
    Ok(vec![Nonlinearity::Step, Nonlinearity::smooth_ramp(1.0)?, Nonlinearity::smooth_ramp(5.0)?])
}

/// Largest violation of `(t-1)_+^p / (p lambda^{1/s}) <= J_lambda(t) <= t^p / (p lambda^{1/s})`,
/// relative to the upper bound.
fn conjugate_sandwich() -> Result<(f64, usize)> {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for nl in profiles()? {
        for s in [0.5f64, 0.75] {
            for lambda in [1e-1f64, 1e-2, 1e-3] {
                let p = 1.0 + 1.0 / s;
                let denom = p * lambda.powf(1.0 / s);
                for k in 0..1000 {
                    let t = k as f64 * 0.005;
                    let j = conjugate_j_lambda(&nl, lambda, s, t);
                    let lower = (t - 1.0).max(0.0).powf(p) / denom;
                    let upper = t.powf(p) / denom;
                    let scale = upper.max(1e-300);
                    worst = worst.max((lower - j) / scale).max((j - upper) / scale);
                    cases += 1;
                }
            }
        }
    }
    Ok((worst, cases))
}

/// `|f_lambda(f_lambda^{-1}(w)) - w| / max(w, 1)` for the continuous profiles.
fn inverse_round_trip() -> Result<(f64, usize)> {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for nl in profiles()?.into_iter().skip(1) {
        for s in [0.5f64, 0.75] {
            for lambda in [1e-1f64, 1e-2, 1e-3] {
                for k in 0..1000 {
                    let w = k as f64 * 0.02;
                    let t = inverse_f_lambda(&nl, lambda, s, w)?;
                    let back = eval_f_lambda(&nl, lambda, s, t);
                    worst = worst.max((back - w).abs() / w.max(1.0));
                    cases += 1;
                }
            }
        }
    }
    Ok((worst, cases))
}

/// Zero on `[0, 1]` and infinite outside; any other value counts as infinite violation.
fn step_conjugate() -> Result<(f64, usize)> {
    let mut worst: f64 = 0.0;
    for k in 0..=1000 {
        let sigma = k as f64 / 1000.0;
        worst = worst.max(conjugate_j(&Nonlinearity::Step, sigma).abs());
    }
    for sigma in [-1.0, -1e-9, 1.0 + 1e-9, 1.5, 10.0] {
        if conjugate_j(&Nonlinearity::Step, sigma) != f64::INFINITY {
            worst = f64::INFINITY;
        }
    }
    Ok((worst, 1006))
}

pub fn run_suite(seed: u64) -> Result<VerifyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let checks = vec![
        timed("polar_kernel_even_and_decreasing", 1e-12, polar_kernel_shape)?,
        timed("riesz_rearrangement_inequality", 1e-6, || riesz_rearrangement(&mut rng))?,
        timed("angular_steiner_energy_monotone", 1e-9, || steiner_energy(&mut rng))?,
        timed("radial_weight_invariance", 1e-12, || radial_weights(&mut rng))?,
        timed("bathtub_optimality", 1e-12, || bathtub(&mut rng))?,
        timed("conjugate_sandwich", 1e-12, conjugate_sandwich)?,
        timed("inverse_round_trip", 1e-10, inverse_round_trip)?,
        timed("step_conjugate", 0.0, step_conjugate)?,
    ];
    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport { seed, checks, passed })
}
