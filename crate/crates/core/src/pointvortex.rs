//! gSQG point vortices: induced velocities, the Thomson polygon and the
//! translating pair in closed form, and a fixed-step RK4 integrator.
//!
//! Velocities use `(a1, a2)^perp = (a2, -a1)`, so a positive vortex at `(d, 0)`
//! paired with a negative one at `(-d, 0)` moves in the `-x2` direction.

use std::f64::consts::PI;
use std::io::{self, Write};

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::kernels::{green_riesz, green_riesz_gradient, riesz_constant, rotate};
use crate::Point;

const COLLISION_DISTANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct PointVortexConfiguration {
    pub positions: Vec<Point>,
    pub circulations: Vec<f64>,
    pub s: f64,
}

fn perp(a: Point) -> Point {
    Point::new(a.y, -a.x)
}

impl PointVortexConfiguration {
    pub fn new(positions: Vec<Point>, circulations: Vec<f64>, s: f64) -> Result<Self> {
        riesz_constant(s)?;
        if positions.len() != circulations.len() {
            return Err(Error::Config(format!(
                "{} positions but {} circulations",
                positions.len(),
                circulations.len()
            )));
        }
        let config = Self {
            positions,
            circulations,
            s,
        };
        if let Some((j, k)) = config.closest_pair(0.0) {
            return Err(Error::singular(config.positions[j], config.positions[k]));
        }
        Ok(config)
    }

    /// Unit circulations at the vertices of the regular `n`-gon of radius 1, one vertex at `(1, 0)`.
    pub fn polygon(n: usize, s: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config(format!("polygon needs at least 2 vertices, got {n}")));
        }
        let positions = (0..n)
            .map(|k| rotate(2.0 * PI * k as f64 / n as f64, Point::new(1.0, 0.0)))
            .collect();
        Self::new(positions, vec![1.0; n], s)
    }

    /// Circulation `+1` at `(d, 0)` and `-1` at `(-d, 0)`.
    pub fn pair(d: f64, s: f64) -> Result<Self> {
        if !(d > 0.0) {
            return Err(Error::Domain(format!("pair half-distance must be positive, got {d}")));
        }
        Self::new(vec![Point::new(d, 0.0), Point::new(-d, 0.0)], vec![1.0, -1.0], s)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// First pair of vortices closer than `limit` (or coincident when `limit` is 0).
    fn closest_pair(&self, limit: f64) -> Option<(usize, usize)> {
        let n = self.len();
        (0..n)
            .flat_map(|j| (j + 1..n).map(move |k| (j, k)))
            .find(|&(j, k)| {
                let d = (self.positions[j] - self.positions[k]).norm();
                d <= limit
            })
    }

    pub fn total_circulation(&self) -> f64 {
        self.circulations.iter().sum()
    }

    pub fn linear_impulse(&self) -> Point {
        self.positions
            .iter()
            .zip(&self.circulations)
            .map(|(x, g)| x * *g)
            .sum()
    }

    pub fn angular_impulse(&self) -> f64 {
        self.positions
            .iter()
            .zip(&self.circulations)
            .map(|(x, g)| g * x.norm_squared())
            .sum()
    }

    /// `sum_{j<k} Gamma_j Gamma_k G_s(x_j - x_k)`.
    pub fn hamiltonian(&self) -> Result<f64> {
        let mut h = 0.0;
        for j in 0..self.len() {
            for k in j + 1..self.len() {
                let g = green_riesz(self.s, self.positions[j] - self.positions[k])?;
                h += self.circulations[j] * self.circulations[k] * g;
            }
        }
        Ok(h)
    }
}

/// Velocity of vortex `j` induced by all the others.
pub fn induced_velocity(config: &PointVortexConfiguration, j: usize) -> Result<Point> {
    if j >= config.len() {
        return Err(Error::Config(format!("vortex index {j} out of range")));
    }
    let xj = config.positions[j];
    let mut v = Point::zeros();
    for (k, (xk, g)) in config.positions.iter().zip(&config.circulations).enumerate() {
        if k != j {
            v += perp(green_riesz_gradient(config.s, xj - xk)?) * *g;
        }
    }
    Ok(v)
}

fn velocities(config: &PointVortexConfiguration) -> Result<Vec<Point>> {
    (0..config.len()).map(|j| induced_velocity(config, j)).collect()
}

/// Rigid angular velocity of the unit Thomson `n`-gon.
pub fn thomson_angular_velocity(n: usize, s: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::Config(format!("polygon needs at least 2 vertices, got {n}")));
    }
    let c = riesz_constant(s)?;
    let e1 = Point::new(1.0, 0.0);
    Ok((1..n)
        .map(|k| {
            let d = (e1 - rotate(2.0 * PI * k as f64 / n as f64, e1)).norm();
            c * (1.0 - s) / d.powf(2.0 - 2.0 * s)
        })
        .sum())
}

/// Speed of the pair at `(d, 0)`, `(-d, 0)`.
pub fn pair_speed(d: f64, s: f64) -> Result<f64> {
    riesz_constant(s)?;
    if !(d > 0.0) {
        return Err(Error::Domain(format!("pair half-distance must be positive, got {d}")));
    }
    Ok(gamma(2.0 - s) / (4.0 * PI * gamma(s) * d.powf(3.0 - 2.0 * s)))
}

/// Inverse of [`pair_speed`] in `d`.
pub fn pair_distance(w: f64, s: f64) -> Result<f64> {
    riesz_constant(s)?;
    if !(w > 0.0) {
        return Err(Error::Domain(format!("speed must be positive, got {w}")));
    }
    Ok((gamma(2.0 - s) / (4.0 * PI * w * gamma(s))).powf(1.0 / (3.0 - 2.0 * s)))
}

fn shifted(config: &PointVortexConfiguration, dir: &[Point], h: f64) -> PointVortexConfiguration {
    PointVortexConfiguration {
        positions: config
            .positions
            .iter()
            .zip(dir)
            .map(|(x, v)| x + v * h)
            .collect(),
        circulations: config.circulations.clone(),
        s: config.s,
    }
}

/// One classical RK4 step.
pub fn step_rk4(config: &PointVortexConfiguration, dt: f64) -> Result<PointVortexConfiguration> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("time step must be positive, got {dt}")));
    }
    let k1 = velocities(config)?;
    let k2 = velocities(&shifted(config, &k1, dt / 2.0))?;
    let k3 = velocities(&shifted(config, &k2, dt / 2.0))?;
    let k4 = velocities(&shifted(config, &k3, dt))?;
    let next = PointVortexConfiguration {
        positions: (0..config.len())
            .map(|j| config.positions[j] + (k1[j] + k2[j] * 2.0 + k3[j] * 2.0 + k4[j]) * (dt / 6.0))
            .collect(),
        circulations: config.circulations.clone(),
        s: config.s,
    };
    if let Some((j, k)) = next.closest_pair(COLLISION_DISTANCE) {
        return Err(Error::Collision(j, k));
    }
    Ok(next)
}

/// Positions at every step of a fixed-step run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub positions: Vec<Vec<Point>>,
}

impl Trajectory {
    /// CSV with header `t,k,x1,x2`, one row per vortex per step.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,k,x1,x2")?;
        for (t, xs) in self.times.iter().zip(&self.positions) {
            for (k, x) in xs.iter().enumerate() {
                writeln!(out, "{t},{k},{},{}", x.x, x.y)?;
            }
        }
        Ok(())
    }

    pub fn final_positions(&self) -> &[Point] {
        self.positions.last().map(|v| v.as_slice()).unwrap_or(&[])
    }

    /// Mean angular velocity of vortex `k` about the origin, with the polar angle unwrapped.
    pub fn angular_velocity(&self, k: usize) -> f64 {
        let mut total = 0.0;
        for w in self.positions.windows(2) {
            let (a, b) = (w[0][k], w[1][k]);
            total += (a.x * b.y - a.y * b.x).atan2(a.dot(&b));
        }
        let span = self.times.last().unwrap_or(&0.0) - self.times.first().unwrap_or(&0.0);
        total / span
    }

    /// Mean velocity of vortex `k`.
    pub fn mean_velocity(&self, k: usize) -> Point {
        let span = self.times.last().unwrap_or(&0.0) - self.times.first().unwrap_or(&0.0);
        (self.final_positions()[k] - self.positions[0][k]) / span
    }
}

/// RK4 from `t = 0` to `t = round(t_end / dt) * dt`.
pub fn simulate(config: &PointVortexConfiguration, t_end: f64, dt: f64) -> Result<Trajectory> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::Domain(format!("need dt > 0 and T >= 0, got dt = {dt}, T = {t_end}")));
    }
    let steps = (t_end / dt).round() as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut positions = Vec::with_capacity(steps + 1);
    let mut state = config.clone();
    times.push(0.0);
    positions.push(state.positions.clone());
    for n in 1..=steps {
        state = step_rk4(&state, dt)?;
        times.push(n as f64 * dt);
        positions.push(state.positions.clone());
    }
    Ok(Trajectory { times, positions })
}
