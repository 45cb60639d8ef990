//! Penalized fixed-point solver for the rotating and travelling problems.
//!
//! One iteration evaluates the potential, picks the multipliers that put the
//! candidate `eps^{-2} f_lambda(psi)` on the constraint set, mixes the
//! candidate into the current field, symmetrizes, and restores unit mass.
//! The penalty `lambda` is lowered geometrically with warm starts.
//!
//! The stream function is `psi = P + drift + alpha * lever - mu`, where `P` is
//! the kernel potential. Rotating: `drift = 0`, `lever = |x|^2 / 2`.
//! Travelling: `drift = -W x1`, no lever.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::diagnostics;
use crate::error::{Error, Result};
use crate::fields::{
    angular_momentum, impulse, interaction_energy, riesz_potential, support_metrics,
    total_vorticity, CartesianGrid, Functional, Grid, PointCloud, PotentialOperator, SectorGrid,
    VorticityField,
};
use crate::kernels::{rotate, KernelSpec};
use crate::nonlinearity::{eval_f, eval_f_lambda, penalty_integral, Nonlinearity, Table};
use crate::pointvortex::{pair_distance, thomson_angular_velocity};
use crate::rearrange::{angular_steiner, steiner_x2};
use crate::roots::find_root;
use crate::sampling::Samples;
use crate::Point;

pub const CONFIG_VERSION: u32 = 1;

/// Number of test functions used for the weak residual reported with a solution.
pub const REPORT_TEST_COUNT: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileConfig {
    Step,
    /// `tanh(tau / scale)`.
    SmoothRamp {
        #[serde(default = "default_scale")]
        scale: f64,
    },
    Tabulated { points: Vec<(f64, f64)> },
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig::SmoothRamp { scale: default_scale() }
    }
}

fn default_scale() -> f64 {
    5.0
}

impl ProfileConfig {
    pub fn build(&self) -> Result<Nonlinearity> {
        match self {
            ProfileConfig::Step => Ok(Nonlinearity::Step),
            ProfileConfig::SmoothRamp { scale } => Nonlinearity::smooth_ramp(*scale),
            ProfileConfig::Tabulated { points } => Ok(Nonlinearity::Tabulated(Table::new(points.clone())?)),
        }
    }
}

fn default_version() -> u32 {
    CONFIG_VERSION
}
fn default_resolution() -> usize {
    96
}
fn default_window() -> Option<f64> {
    Some(1.5)
}
fn default_lambda0() -> f64 {
    1e-1
}
fn default_kappa() -> f64 {
    0.5
}
fn default_lambda_min() -> f64 {
    1e-4
}
fn default_tol_fix() -> f64 {
    1e-8
}
fn default_tol_con() -> f64 {
    1e-10
}
fn default_max_iters() -> usize {
    500
}
fn default_delta() -> f64 {
    1.0
}

/// Solver input. Exactly one of `n_fold` (rotating) and `speed` (travelling) is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    pub s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_fold: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<f64>,
    pub epsilon: f64,
    #[serde(default)]
    pub profile: ProfileConfig,
    /// Cells per direction.
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    /// Half-width of the computational block in units of `epsilon`; `null` for
    /// the whole admissible block.
    #[serde(default = "default_window")]
    pub window: Option<f64>,
    #[serde(default = "default_lambda0")]
    pub lambda0: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_lambda_min")]
    pub lambda_min: f64,
    /// Mixing weight of the new candidate; defaults to 0.5, or 0.2 for the step profile.
    #[serde(default)]
    pub damping: Option<f64>,
    #[serde(default = "default_tol_fix")]
    pub tol_fix: f64,
    #[serde(default = "default_tol_con")]
    pub tol_con: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Density parameter of the initial disk.
    #[serde(default = "default_delta")]
    pub delta: f64,
}

/// Which problem a configuration poses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Flow {
    Rotating { n_fold: usize },
    /// Speed `W` and the point-vortex half-distance `d` it determines.
    Travelling { speed: f64, d: f64 },
}

impl SolverConfig {
    fn with_defaults(s: f64, n_fold: Option<usize>, speed: Option<f64>, epsilon: f64) -> Self {
        Self {
            version: CONFIG_VERSION,
            s,
            n_fold,
            speed,
            epsilon,
            profile: ProfileConfig::default(),
            resolution: default_resolution(),
            window: default_window(),
            lambda0: default_lambda0(),
            kappa: default_kappa(),
            lambda_min: default_lambda_min(),
            damping: None,
            tol_fix: default_tol_fix(),
            tol_con: default_tol_con(),
            max_iters: default_max_iters(),
            delta: default_delta(),
        }
    }

    pub fn rotating(s: f64, n_fold: usize, epsilon: f64) -> Self {
        Self::with_defaults(s, Some(n_fold), None, epsilon)
    }

    pub fn travelling(s: f64, speed: f64, epsilon: f64) -> Self {
        Self::with_defaults(s, None, Some(speed), epsilon)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Copy with every optional setting made explicit.
    pub fn resolved(&self) -> Self {
        let mut out = self.clone();
        out.damping = Some(self.damping_value());
        out
    }

    pub fn damping_value(&self) -> f64 {
        self.damping.unwrap_or(match self.profile {
            ProfileConfig::Step => 0.2,
            _ => 0.5,
        })
    }

    pub fn flow(&self) -> Result<Flow> {
        match (self.n_fold, self.speed) {
            (Some(n_fold), None) => {
                if n_fold < 2 {
                    return Err(Error::Config(format!("fold count must be at least 2, got {n_fold}")));
                }
                Ok(Flow::Rotating { n_fold })
            }
            (None, Some(speed)) => {
                if !(speed > 0.0 && speed.is_finite()) {
                    return Err(Error::Config(format!("speed must be positive, got {speed}")));
                }
                Ok(Flow::Travelling {
                    speed,
                    d: pair_distance(speed, self.s)?,
                })
            }
            _ => Err(Error::Config("set exactly one of n_fold (rotating) and speed (travelling)".into())),
        }
    }

    /// `lambda0 * kappa^j` while above `lambda_min`, then `lambda_min` itself.
    pub fn lambda_schedule(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut lambda = self.lambda0;
        while lambda > self.lambda_min * (1.0 + 1e-12) {
            out.push(lambda);
            lambda *= self.kappa;
        }
        out.push(self.lambda_min);
        out
    }

    /// `sin(pi/2N) / (6 sqrt(pi))`, the sector margin of the existence argument.
    pub fn rho0(n_fold: usize) -> f64 {
        (PI / (2.0 * n_fold as f64)).sin() / (6.0 * PI.sqrt())
    }

    /// Whether `epsilon` also satisfies the `rho0` bound (reported, not enforced).
    pub fn within_rho0(&self) -> bool {
        match self.n_fold {
            Some(n) => self.epsilon < Self::rho0(n),
            None => true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.version != CONFIG_VERSION {
            return bad(format!("unsupported config version {} (expected {CONFIG_VERSION})", self.version));
        }
        if !(self.s >= 0.5 && self.s < 1.0) {
            return bad(format!("s must lie in [1/2, 1), got {}", self.s));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.resolution < 4 {
            return bad(format!("resolution must be at least 4, got {}", self.resolution));
        }
        if let Some(w) = self.window {
            if !(w > 0.0 && w.is_finite()) {
                return bad(format!("window must be positive, got {w}"));
            }
        }
        if !(self.lambda0 > 0.0 && self.lambda_min > 0.0 && self.lambda_min <= self.lambda0) {
            return bad(format!(
                "need 0 < lambda_min <= lambda0, got {} and {}",
                self.lambda_min, self.lambda0
            ));
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return bad(format!("kappa must lie in (0, 1), got {}", self.kappa));
        }
        let theta = self.damping_value();
        if !(theta > 0.0 && theta <= 1.0) {
            return bad(format!("damping must lie in (0, 1], got {theta}"));
        }
        if !(self.tol_fix > 0.0 && self.tol_con > 0.0) || self.max_iters == 0 {
            return bad("tolerances and max_iters must be positive".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0 || self.delta == 1.0) {
            return bad(format!("delta must lie in (0, 1], got {}", self.delta));
        }
        let nl = self.profile.build()?;
        match self.flow()? {
            Flow::Rotating { n_fold } => {
                let bound = (7.0 * PI * eval_f(&nl, 1.0) / (72.0 * n_fold as f64)).sqrt();
                if self.epsilon >= bound {
                    return bad(format!("epsilon {} must be below {bound:.4} for N = {n_fold}", self.epsilon));
                }
            }
            Flow::Travelling { d, .. } => {
                let bound = PI.sqrt() * d / 2.0;
                if self.epsilon >= bound {
                    return bad(format!("epsilon {} must be below sqrt(pi) d / 2 = {bound:.4}", self.epsilon));
                }
            }
        }
        Ok(())
    }
}

/// Lagrange multipliers; `alpha` is zero for the travelling problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Multipliers {
    pub alpha: f64,
    pub mu: f64,
}

/// Mass multiplier `mu` with `eps^{-2} sum f_lambda(base - mu) measure = 1`.
///
/// `base` is the stream function before `mu` is subtracted. When the mass
/// jumps across 1 (a jump of `f`), `mu` is the jump location.
pub fn mass_multiplier(
    base: &[f64],
    measures: &[f64],
    epsilon: f64,
    nl: &Nonlinearity,
    lambda: f64,
    s: f64,
) -> Result<f64> {
    let weights = vec![0.0; base.len()];
    let share = vec![1.0; base.len()];
    let fill = Fill::new(base.to_vec(), measures, &weights, &share, 1, epsilon, nl, lambda, s);
    Ok(fill.solve(None)?.mu)
}

/// Superlevel sums of the candidate for one choice of `base`.
///
/// Entries are samples; `stride` consecutive samples make up one cell, and
/// `share` is the weight of a sample in its cell's value.
struct Fill<'a> {
    base: Vec<f64>,
    top: f64,
    measures: &'a [f64],
    moment: &'a [f64],
    share: &'a [f64],
    stride: usize,
    scale: f64,
    nl: &'a Nonlinearity,
    lambda: f64,
    s: f64,
}

/// A mass-1 candidate as a blend of the fills at two nearby `mu` values.
#[derive(Debug, Clone, Copy)]
struct FillSolution {
    mu: f64,
    mu_lo: f64,
    mu_hi: f64,
    t: f64,
    moment: f64,
}

impl<'a> Fill<'a> {
    #[allow(clippy::too_many_arguments)]
    fn new(
        base: Vec<f64>,
        measures: &'a [f64],
        moment: &'a [f64],
        share: &'a [f64],
        stride: usize,
        epsilon: f64,
        nl: &'a Nonlinearity,
        lambda: f64,
        s: f64,
    ) -> Self {
        let top = base.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Self {
            base,
            top,
            measures,
            moment,
            share,
            stride,
            scale: 1.0 / (epsilon * epsilon),
            nl,
            lambda,
            s,
        }
    }

    fn value(&self, k: usize, mu: f64) -> f64 {
        self.scale * eval_f_lambda(self.nl, self.lambda, self.s, self.base[k] - mu)
    }

    /// (mass, moment) of the fill at `mu`.
    fn sums(&self, mu: f64) -> (f64, f64) {
        let (mut mass, mut moment) = (0.0, 0.0);
        for (k, b) in self.base.iter().enumerate() {
            if *b > mu {
                let w = self.value(k, mu) * self.measures[k];
                mass += w;
                moment += w * self.moment[k];
            }
        }
        (mass, moment)
    }

    fn solve(&self, hint: Option<f64>) -> Result<FillSolution> {
        let failure = |mass: f64| Error::MultiplierFailure {
            iterations: 0,
            mass_residual: (mass - 1.0).abs(),
            momentum_residual: f64::NAN,
        };
        let top = self.top;
        if !top.is_finite() {
            return Err(failure(0.0));
        }
        // the mass vanishes at `top` and grows as `mu` decreases
        let empty = (0.0, 0.0);
        let (mut hi, mut above, mut step) = (top, empty, 1e-6 * top.abs().max(1.0));
        if let Some(h) = hint.filter(|h| h.is_finite() && *h < top) {
            step = 1e-4 * h.abs().max(1.0);
            let at = self.sums(h);
            if at.0 >= 1.0 {
                let (mut lo, mut below) = (h, at);
                loop {
                    let next = (lo + step).min(top);
                    let m = if next >= top { empty } else { self.sums(next) };
                    if m.0 < 1.0 {
                        return Ok(self.refine(lo, below, next, m));
                    }
                    (lo, below) = (next, m);
                    step *= 2.0;
                }
            }
            (hi, above) = (h, at);
        }
        let mut lo = hi - step;
        let mut below = self.sums(lo);
        let mut doublings = 0;
        while below.0 < 1.0 {
            (hi, above) = (lo, below);
            step *= 2.0;
            lo -= step;
            below = self.sums(lo);
            doublings += 1;
            if doublings > 200 || !lo.is_finite() {
                return Err(failure(below.0));
            }
        }
        Ok(self.refine(lo, below, hi, above))
    }

    /// Shrinks a bracket with `mass(lo) >= 1 > mass(hi)` and blends its two fills.
    fn refine(&self, mut lo: f64, mut below: (f64, f64), mut hi: f64, mut above: (f64, f64)) -> FillSolution {
        // Illinois on the mass, falling back to bisection when it stalls;
        // stops once the two fills agree or the bracket is two adjacent floats
        let (mut f_lo, mut f_hi) = (below.0 - 1.0, above.0 - 1.0);
        let mut side = 0;
        for round in 0.. {
            if below.0 - above.0 <= MASS_GAP {
                break;
            }
            let mut mid = if round % 8 == 7 {
                0.5 * (lo + hi)
            } else {
                (lo * f_hi - hi * f_lo) / (f_hi - f_lo)
            };
            if !(mid > lo && mid < hi) {
                mid = 0.5 * (lo + hi);
            }
            if mid <= lo || mid >= hi {
                break;
            }
            let at = self.sums(mid);
            if at.0 >= 1.0 {
                lo = mid;
                below = at;
                f_lo = at.0 - 1.0;
                if side == 1 {
                    f_hi *= 0.5;
                }
                side = 1;
            } else {
                hi = mid;
                above = at;
                f_hi = at.0 - 1.0;
                if side == -1 {
                    f_lo *= 0.5;
                }
                side = -1;
            }
        }
        let gap = below.0 - above.0;
        let t = if gap > 0.0 { (1.0 - above.0) / gap } else { 0.0 };
        FillSolution {
            mu: hi + t * (lo - hi),
            mu_lo: lo,
            mu_hi: hi,
            t,
            moment: above.1 + t * (below.1 - above.1),
        }
    }

    fn values(&self, sol: &FillSolution) -> Vec<f64> {
        let mut out = vec![0.0; self.base.len() / self.stride];
        for (k, b) in self.base.iter().enumerate() {
            if *b <= sol.mu_lo {
                continue;
            }
            let lo = self.value(k, sol.mu_lo);
            let hi = if *b > sol.mu_hi { self.value(k, sol.mu_hi) } else { 0.0 };
            out[k / self.stride] += self.share[k] * (hi + sol.t * (lo - hi));
        }
        out
    }
}

/// Mass difference below which the two fills of a bracket count as equal.
const MASS_GAP: f64 = 1e-14;

/// Current iterate of the penalized scheme.
#[derive(Debug, Clone)]
pub struct IterationState {
    pub field: VorticityField,
    pub multipliers: Multipliers,
    /// `||omega_new - omega_old||_1` of the last step (relative, since the mass is 1).
    pub residual: f64,
    /// Penalized energy of the field the last step started from.
    pub energy: f64,
    pub iterations: usize,
    /// Steps whose starting energy was at least the previous one.
    pub ascents: usize,
    /// Travelling only: the x1 moment held during a step, and its multiplier.
    /// The moment moves each step until the multiplier vanishes.
    pub position: Option<f64>,
    pub shift: f64,
    candidate: Vec<f64>,
    history: History,
}

/// Past iterates kept for Anderson mixing.
const DEPTH: usize = 5;

/// Mixing starts once the residual is below this.
const MIXING_START: f64 = 1e-3;

/// The history is dropped when the residual grows past this multiple of its best value.
const RESTART_GROWTH: f64 = 10.0;

/// Recent iterates and their steps `candidate - field`.
#[derive(Debug, Clone, Default)]
struct History {
    fields: VecDeque<Vec<f64>>,
    steps: VecDeque<Vec<f64>>,
    best: f64,
}

impl History {
    /// Record `(x, f)` and return the Anderson update `x + theta f - (dX + theta dF) gamma`,
    /// with `gamma` minimizing `|f - dF gamma|`.
    fn mix(&mut self, x: &[f64], f: &[f64], residual: f64, theta: f64) -> Vec<f64> {
        if residual > MIXING_START || residual > RESTART_GROWTH * self.best {
            self.fields.clear();
            self.steps.clear();
            self.best = f64::INFINITY;
        }
        self.best = self.best.min(residual);
        let mut out: Vec<f64> = x.iter().zip(f).map(|(a, b)| a + theta * b).collect();
        if residual <= MIXING_START && !self.steps.is_empty() {
            let (n, m) = (x.len(), self.steps.len());
            let df = DMatrix::from_fn(n, m, |i, j| f[i] - self.steps[j][i]);
            let rhs = DVector::from_column_slice(f);
            if let Ok(gamma) = df.clone().svd(true, true).solve(&rhs, 1e-12) {
                for j in 0..m {
                    let g = gamma[j];
                    for i in 0..n {
                        out[i] -= g * ((x[i] - self.fields[j][i]) + theta * df[(i, j)]);
                    }
                }
            }
        }
        if residual <= MIXING_START {
            if self.steps.len() == DEPTH {
                self.fields.pop_back();
                self.steps.pop_back();
            }
            self.fields.push_front(x.to_vec());
            self.steps.push_front(f.to_vec());
        }
        out
    }
}

impl IterationState {
    pub fn new(field: VorticityField, alpha: f64) -> Self {
        let candidate = field.values.clone();
        Self {
            field,
            multipliers: Multipliers { alpha, mu: 0.0 },
            residual: f64::INFINITY,
            energy: f64::NEG_INFINITY,
            iterations: 0,
            ascents: 0,
            position: None,
            shift: 0.0,
            candidate,
            history: History::default(),
        }
    }

    /// Last `mu`, once one has been computed.
    fn mu_hint(&self) -> Option<f64> {
        (self.iterations > 0).then_some(self.multipliers.mu)
    }
}

/// Multipliers reached at one level of the penalty schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelRecord {
    pub lambda: f64,
    pub alpha: f64,
    pub mu: f64,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct ContinuationResult {
    pub state: IterationState,
    pub trajectory: Vec<LevelRecord>,
}

/// Checks run on a converged field with a freshly evaluated potential.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub mass_residual: f64,
    /// `|L - 1|`; rotating only.
    pub momentum_residual: Option<f64>,
    /// `||omega - eps^{-2} f_lambda(psi)||_1` at the last penalty level.
    pub el_residual: f64,
    pub support_diameter: f64,
    pub centroid: [f64; 2],
    pub weak_residual: f64,
    /// Share of steps along which the penalized energy did not decrease.
    pub ascent_fraction: f64,
    /// No support cell on the outer layer of the computational block.
    pub support_inside_block: bool,
    pub within_rho0: bool,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub config: SolverConfig,
    pub flow: Flow,
    pub field: VorticityField,
    pub multipliers: Multipliers,
    /// Penalized energy at the last penalty level.
    pub energy: f64,
    pub iterations: usize,
    pub trajectory: Vec<LevelRecord>,
    pub report: SolveReport,
}

pub type RotatingSolution = Solution;
pub type TravellingSolution = Solution;

/// Grid, kernel and fixed terms of the stream function for one configuration.
pub struct Solver {
    config: SolverConfig,
    flow: Flow,
    nl: Nonlinearity,
    grid: Arc<Grid>,
    op: PotentialOperator,
    measures: Vec<f64>,
    drift: Vec<f64>,
    samples: Samples,
}

/// Sub-cell samples per cell side.
const SUBCELLS: usize = 4;

/// Moment held fixed while fitting the multipliers.
#[derive(Debug, Clone, Copy)]
enum Constraint {
    /// `int |x|^2 omega = 1`, multiplier `alpha`.
    Momentum,
    /// `int x1 omega` equal to the given value, with a multiplier on `x1`.
    Position(f64),
    /// Mass only.
    Free,
}

/// Moments on either side of the balanced one, with their multipliers.
struct Bracket {
    below: Option<(f64, f64)>,
    above: Option<(f64, f64)>,
    /// Newton steps double until the root is bracketed.
    reach: f64,
}

struct Fitted {
    multiplier: f64,
    mu: f64,
    candidate: Vec<f64>,
}

impl Solver {
    pub fn new(config: &SolverConfig) -> Result<Self> {
        config.validate()?;
        let config = config.resolved();
        let flow = config.flow()?;
        let nl = config.profile.build()?;
        let eps = config.epsilon;
        let res = config.resolution;
        let (grid, spec) = match flow {
            Flow::Rotating { n_fold } => {
                let sector = PI / (2.0 * n_fold as f64);
                let g = match config.window {
                    Some(w) => {
                        let half = w * eps;
                        SectorGrid::window(
                            n_fold,
                            (1.0 - half).max(0.5),
                            (1.0 + half).min(1.5),
                            half.min(sector),
                            res,
                            res,
                        )?
                    }
                    None => SectorGrid::new(n_fold, res, res)?,
                };
                (Grid::Sector(g), KernelSpec::n_fold(config.s, n_fold)?)
            }
            Flow::Travelling { d, .. } => {
                let radius = match config.window {
                    Some(w) => (w * eps).min(d / 2.0),
                    None => d / 2.0,
                };
                let g = CartesianGrid::new(Point::new(d, 0.0), radius, res)?;
                (Grid::Cartesian(g), KernelSpec::half_plane(config.s)?)
            }
        };
        let grid = Arc::new(grid);
        let op = PotentialOperator::new(grid.clone(), spec)?;
        let centers = grid.centers();
        let speed = match flow {
            Flow::Rotating { .. } => 0.0,
            Flow::Travelling { speed, .. } => speed,
        };
        let drift = centers.iter().map(|x| -speed * x.x).collect();
        let samples = Samples::new(&grid, SUBCELLS, |x| -speed * x.x)?;
        Ok(Self {
            measures: grid.measures(),
            config,
            flow,
            nl,
            grid,
            op,
            drift,
            samples,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn flow(&self) -> Flow {
        self.flow
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn operator(&self) -> &PotentialOperator {
        &self.op
    }

    /// The uniform disk of density `delta / eps^2` and unit mass, on the grid.
    pub fn initial_guess(&self, delta: f64) -> Result<VorticityField> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::Config(format!("delta must lie in (0, 1], got {delta}")));
        }
        let eps = self.config.epsilon;
        let radius = eps / (PI * delta).sqrt();
        let center = match self.flow {
            Flow::Rotating { .. } => {
                let a2 = 1.0 - eps * eps / (2.0 * delta * PI);
                if a2 <= 0.0 {
                    return Err(Error::Config(format!("initial disk for epsilon {eps} has no center")));
                }
                Point::new(a2.sqrt(), 0.0)
            }
            Flow::Travelling { d, .. } => Point::new(d, 0.0),
        };
        let fits = match &*self.grid {
            Grid::Sector(g) => {
                let a = center.x;
                radius < a
                    && a - radius >= g.r_min
                    && a + radius <= g.r_max
                    && (radius / a).asin() <= g.theta_half
            }
            Grid::Cartesian(g) => (center - g.center).norm() + radius <= g.radius,
            Grid::Cloud(_) => false,
        };
        if !fits {
            return Err(Error::Config(format!(
                "initial disk of radius {radius:.4} at {:.4} does not fit the computational block",
                center.x
            )));
        }
        let density = delta / (eps * eps);
        let field = VorticityField::from_fn(self.grid.clone(), eps, |x| {
            if (x - center).norm() < radius {
                density
            } else {
                0.0
            }
        });
        if field.max_value() == 0.0 {
            return Err(Error::Config(format!(
                "initial disk of radius {radius:.2e} covers no cell center; refine the grid"
            )));
        }
        Ok(field)
    }

    fn potential(&self, field: &VorticityField) -> Vec<f64> {
        self.op.apply(&field.values)
    }

    /// Multipliers and candidate field for a given potential.
    fn multipliers_for(
        &self,
        potential: &[f64],
        lambda: f64,
        guess: f64,
        mu_guess: Option<f64>,
        constraint: Constraint,
    ) -> Result<Fitted> {
        let eps = self.config.epsilon;
        let samples = &self.samples;
        let base0 = samples.base(potential);
        let (lever, weights, target): (Vec<f64>, &[f64], f64) = match constraint {
            Constraint::Momentum => (samples.radius2.iter().map(|r2| 0.5 * r2).collect(), &samples.cell_radius2, 1.0),
            Constraint::Position(x) => (samples.x1.clone(), &samples.cell_x1, x),
            Constraint::Free => (Vec::new(), &samples.cell_x1, 0.0),
        };
        let fill_at = |c: f64| {
            let base = if lever.is_empty() {
                base0.clone()
            } else {
                base0.iter().zip(&lever).map(|(b, l)| b + c * l).collect()
            };
            Fill::new(
                base,
                &samples.mass,
                weights,
                &samples.share,
                samples.per_cell,
                eps,
                &self.nl,
                lambda,
                self.config.s,
            )
        };
        if lever.is_empty() {
            let fill = fill_at(0.0);
            let sol = fill.solve(mu_guess)?;
            return Ok(Fitted {
                multiplier: 0.0,
                mu: sol.mu,
                candidate: fill.values(&sol),
            });
        }
        let tol = self.config.tol_con;
        let mut failure: Option<Error> = None;
        let mut hint = mu_guess;
        let step = 1e-3 * guess.abs().max(0.1);
        let found = find_root(
            |c| match fill_at(c).solve(hint) {
                Ok(sol) => {
                    hint = Some(sol.mu);
                    sol.moment - target
                }
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            },
            guess,
            step,
            0.1 * tol * target.abs().max(1.0),
            400,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        let multiplier = found.map_err(|no| Error::MultiplierFailure {
            iterations: no.evaluations,
            mass_residual: 0.0,
            momentum_residual: no.best,
        })?;
        let fill = fill_at(multiplier);
        let sol = fill.solve(hint)?;
        Ok(Fitted {
            multiplier,
            mu: sol.mu,
            candidate: fill.values(&sol),
        })
    }

    /// Multipliers of the candidate built on `field`'s potential.
    pub fn solve_multipliers(&self, field: &VorticityField, lambda: f64, alpha_guess: f64) -> Result<Multipliers> {
        let potential = self.potential(field);
        let constraint = match self.flow {
            Flow::Rotating { .. } => Constraint::Momentum,
            Flow::Travelling { .. } => Constraint::Free,
        };
        let fitted = self.multipliers_for(&potential, lambda, alpha_guess, None, constraint)?;
        Ok(match self.flow {
            Flow::Rotating { .. } => Multipliers {
                alpha: fitted.multiplier,
                mu: fitted.mu,
            },
            Flow::Travelling { .. } => Multipliers { alpha: 0.0, mu: fitted.mu },
        })
    }

    /// Penalized energy, given the field's potential.
    fn energy(&self, field: &VorticityField, potential: &[f64], lambda: f64) -> f64 {
        let quadratic = 0.5
            * field
                .values
                .iter()
                .zip(potential)
                .zip(&self.measures)
                .map(|((v, p), m)| v * p * m)
                .sum::<f64>();
        let drift: f64 = field
            .values
            .iter()
            .zip(&self.drift)
            .zip(&self.measures)
            .map(|((v, d), m)| v * d * m)
            .sum();
        quadratic + drift - penalty_integral(field, &self.nl, lambda, self.config.s)
    }

    fn symmetrize(&self, field: &VorticityField) -> Result<VorticityField> {
        match self.flow {
            Flow::Rotating { .. } => angular_steiner(field),
            Flow::Travelling { .. } => steiner_x2(field),
        }
    }

    fn normalized(&self, field: VorticityField) -> Result<VorticityField> {
        let mass = total_vorticity(&field);
        if !(mass > 0.0) {
            return Err(Error::EmptySupport { threshold: 0.0 });
        }
        let values = field.values.iter().map(|v| v / mass).collect();
        Ok(field.with_values(values))
    }

    /// One damped, symmetrized, mass-renormalized step.
    pub fn iterate(&self, state: &IterationState, lambda: f64) -> Result<IterationState> {
        let potential = self.potential(&state.field);
        let energy = self.energy(&state.field, &potential, lambda);
        let theta = self.config.damping_value();
        let (constraint, guess) = match self.flow {
            Flow::Rotating { .. } => (Constraint::Momentum, state.multipliers.alpha),
            Flow::Travelling { .. } => {
                let x = state.position.unwrap_or_else(|| impulse(&state.field) / total_vorticity(&state.field));
                (Constraint::Position(x), state.shift)
            }
        };
        let Fitted {
            multiplier,
            mu,
            candidate,
        } = self.multipliers_for(&potential, lambda, guess, state.mu_hint(), constraint)?;
        let (multipliers, position, shift) = match constraint {
            Constraint::Position(x) => (Multipliers { alpha: 0.0, mu }, Some(x), multiplier),
            _ => (Multipliers { alpha: multiplier, mu }, None, 0.0),
        };
        let residual = state.field.l1_distance(&candidate);
        let step: Vec<f64> = candidate.iter().zip(&state.field.values).map(|(c, o)| c - o).collect();
        let mut history = state.history.clone();
        let mut mixed = history.mix(&state.field.values, &step, residual, theta);
        mixed.iter_mut().for_each(|v| *v = v.max(0.0));
        let field = self.normalized(self.symmetrize(&state.field.with_values(mixed))?)?;
        Ok(IterationState {
            field,
            multipliers,
            residual,
            energy,
            iterations: state.iterations + 1,
            ascents: state.ascents + usize::from(energy >= state.energy),
            position,
            shift,
            candidate,
            history,
        })
    }

    /// Iterate at one penalty level until the step residual drops below `tol_fix`.
    ///
    /// On success the field is replaced by the (symmetrized) last candidate, which
    /// meets the constraints to `tol_con`.
    pub fn solve_level(&self, mut state: IterationState, lambda: f64) -> Result<IterationState> {
        let mut bracket = Bracket {
            below: None,
            above: None,
            reach: 0.5,
        };
        for _ in 0..self.config.max_iters {
            state = self.iterate(&state, lambda)?;
            if state.residual <= self.config.tol_fix && self.rebalance(&mut state, &mut bracket) {
                let candidate = state.field.with_values(state.candidate.clone());
                state.field = self.symmetrize(&candidate)?;
                return Ok(state);
            }
        }
        Err(Error::ContinuationFailure {
            lambda,
            iterations: self.config.max_iters,
            residual: state.residual,
            trajectory: Vec::new(),
        })
    }

    /// Travelling steps converge at a fixed x1 moment; the moment is then moved
    /// until its multiplier vanishes, first by Newton steps on the point-vortex
    /// balance and, once the root is bracketed, by regula falsi. Returns whether
    /// the state is balanced, i.e. the multiplier changes `psi` across the
    /// support by at most `tol_fix` relative to `mu`.
    fn rebalance(&self, state: &mut IterationState, bracket: &mut Bracket) -> bool {
        let (Flow::Travelling { speed, d }, Some(x)) = (self.flow, state.position) else {
            return true;
        };
        let shift = state.shift;
        if shift.abs() * self.config.epsilon <= self.config.tol_fix * state.multipliers.mu.abs().max(1.0) {
            return true;
        }
        if shift < 0.0 {
            bracket.below = Some((x, shift));
        } else {
            bracket.above = Some((x, shift));
        }
        let next = match (bracket.below, bracket.above) {
            (Some((x0, b0)), Some((x1, b1))) => {
                if (x1 - x0).abs() <= 4.0 * f64::EPSILON * x.abs() {
                    return true;
                }
                let t = (b0 / (b0 - b1)).clamp(0.1, 0.9);
                x0 + t * (x1 - x0)
            }
            _ => {
                // d shift / d x = W (3 - 2s) / d for a point vortex and its image
                bracket.reach *= 2.0;
                x - bracket.reach * shift * d / (speed * (3.0 - 2.0 * self.config.s))
            }
        };
        state.position = Some(next);
        state.history = History::default();
        false
    }

    pub fn continuation(&self) -> Result<ContinuationResult> {
        let field = self.normalized(self.initial_guess(self.config.delta)?)?;
        let alpha = match self.flow {
            Flow::Rotating { n_fold } => thomson_angular_velocity(n_fold, self.config.s)?,
            Flow::Travelling { .. } => 0.0,
        };
        let mut state = IterationState::new(field, alpha);
        let mut trajectory = Vec::new();
        for lambda in self.config.lambda_schedule() {
            let start = state.iterations;
            state = match self.solve_level(state, lambda) {
                Ok(s) => s,
                Err(Error::ContinuationFailure {
                    lambda,
                    iterations,
                    residual,
                    ..
                }) => {
                    return Err(Error::ContinuationFailure {
                        lambda,
                        iterations,
                        residual,
                        trajectory: trajectory.iter().map(|r: &LevelRecord| (r.lambda, r.alpha, r.mu)).collect(),
                    })
                }
                Err(e) => return Err(e),
            };
            trajectory.push(LevelRecord {
                lambda,
                alpha: state.multipliers.alpha,
                mu: state.multipliers.mu,
                iterations: state.iterations - start,
                residual: state.residual,
            });
        }
        Ok(ContinuationResult { state, trajectory })
    }

    /// Continuation followed by checks against an independently evaluated potential.
    pub fn solve(&self) -> Result<Solution> {
        let ContinuationResult { state, trajectory } = self.continuation()?;
        let lambda = self.config.lambda_min;
        let hint = state.mu_hint();
        let field = state.field;
        let fresh = riesz_potential(&field, self.op.spec(), &self.grid.centers())?;
        let constraint = match self.flow {
            Flow::Rotating { .. } => Constraint::Momentum,
            Flow::Travelling { .. } => Constraint::Free,
        };
        let fitted = self.multipliers_for(&fresh, lambda, state.multipliers.alpha, hint, constraint)?;
        let multipliers = match self.flow {
            Flow::Rotating { .. } => Multipliers {
                alpha: fitted.multiplier,
                mu: fitted.mu,
            },
            Flow::Travelling { .. } => Multipliers { alpha: 0.0, mu: fitted.mu },
        };
        let candidate = fitted.candidate;
        let el_residual = field.l1_distance(&candidate);
        let momentum_residual = match self.flow {
            Flow::Rotating { .. } => Some((angular_momentum(&field) - 1.0).abs()),
            Flow::Travelling { .. } => None,
        };
        let metrics = support_metrics(&field, 0.0)?;
        let energy = self.energy(&field, &fresh, lambda);
        let report = SolveReport {
            mass_residual: (total_vorticity(&field) - 1.0).abs(),
            momentum_residual,
            el_residual,
            support_diameter: metrics.diameter,
            centroid: [metrics.centroid.x, metrics.centroid.y],
            weak_residual: f64::NAN,
            ascent_fraction: state.ascents as f64 / state.iterations.max(1) as f64,
            support_inside_block: support_inside_block(&field),
            within_rho0: self.config.within_rho0(),
        };
        let mut solution = Solution {
            config: self.config.clone(),
            flow: self.flow,
            field,
            multipliers,
            energy,
            iterations: state.iterations,
            trajectory,
            report,
        };
        solution.report.weak_residual = diagnostics::weak_residual(&solution, REPORT_TEST_COUNT)?;
        Ok(solution)
    }
}

/// True when every positive cell has all its lattice neighbours inside the grid.
fn support_inside_block(field: &VorticityField) -> bool {
    let positive = |k: usize| field.values[k] > 0.0;
    match &*field.grid {
        Grid::Sector(g) => (0..g.len()).filter(|&k| positive(k)).all(|k| {
            let (i, j) = (k / g.n_theta, k % g.n_theta);
            i > 0 && j > 0 && i + 1 < g.n_r && j + 1 < g.n_theta
        }),
        Grid::Cartesian(g) => (0..g.len()).filter(|&k| positive(k)).all(|k| {
            let (i, j) = g.lattice(k);
            i > 0
                && j > 0
                && g.cell_at(i - 1, j).is_some()
                && g.cell_at(i + 1, j).is_some()
                && g.cell_at(i, j - 1).is_some()
                && g.cell_at(i, j + 1).is_some()
        }),
        Grid::Cloud(_) => true,
    }
}

pub fn initial_guess(config: &SolverConfig, delta: f64) -> Result<VorticityField> {
    Solver::new(config)?.initial_guess(delta)
}

/// Multipliers of the candidate on `field`, with the closed-form Thomson value as the first `alpha` guess.
pub fn solve_multipliers(field: &VorticityField, config: &SolverConfig, lambda: f64) -> Result<Multipliers> {
    let solver = Solver::new(config)?;
    let guess = match solver.flow {
        Flow::Rotating { n_fold } => thomson_angular_velocity(n_fold, config.s)?,
        Flow::Travelling { .. } => 0.0,
    };
    solver.solve_multipliers(field, lambda, guess)
}

pub fn penalized_iterate(state: &IterationState, config: &SolverConfig, lambda: f64) -> Result<IterationState> {
    Solver::new(config)?.iterate(state, lambda)
}

pub fn continuation(config: &SolverConfig) -> Result<ContinuationResult> {
    Solver::new(config)?.continuation()
}

pub fn solve_rotating(config: &SolverConfig) -> Result<RotatingSolution> {
    if config.n_fold.is_none() {
        return Err(Error::Config("rotating solve needs n_fold".into()));
    }
    Solver::new(config)?.solve()
}

pub fn solve_travelling(config: &SolverConfig) -> Result<TravellingSolution> {
    if config.speed.is_none() {
        return Err(Error::Config("travelling solve needs speed".into()));
    }
    Solver::new(config)?.solve()
}

/// The whole-plane vortex: `N` rotated copies, or the odd reflection across the `x2` axis.
///
/// The travelling assembly carries negative values on the left copy.
pub fn assemble_full_plane(solution: &Solution) -> VorticityField {
    let grid = &solution.field.grid;
    let n = grid.len();
    let mut centers = Vec::new();
    let mut measures = Vec::new();
    let mut values = Vec::new();
    match solution.flow {
        Flow::Rotating { n_fold } => {
            for k in 0..n_fold {
                let phi = 2.0 * PI * k as f64 / n_fold as f64;
                for m in 0..n {
                    centers.push(rotate(phi, grid.center(m)));
                    measures.push(grid.measure(m));
                    values.push(solution.field.values[m]);
                }
            }
        }
        Flow::Travelling { .. } => {
            for sign in [1.0, -1.0] {
                for m in 0..n {
                    let c = grid.center(m);
                    centers.push(Point::new(sign * c.x, c.y));
                    measures.push(grid.measure(m));
                    values.push(sign * solution.field.values[m]);
                }
            }
        }
    }
    VorticityField {
        grid: Arc::new(Grid::Cloud(PointCloud { centers, measures })),
        values,
        epsilon: solution.field.epsilon,
    }
}

/// JSON summary of a solution.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub s: f64,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub n_fold: Option<usize>,
    #[serde(rename = "W", skip_serializing_if = "Option::is_none")]
    pub speed: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    pub epsilon: f64,
    pub alpha: Option<f64>,
    pub mu: f64,
    pub energy: f64,
    pub support_diameter: f64,
    pub centroid: [f64; 2],
    pub weak_residual: f64,
    pub iterations: usize,
    pub lambda_trajectory: Vec<LevelRecord>,
    pub mass_residual: f64,
    pub momentum_residual: Option<f64>,
    pub el_residual: f64,
    pub ascent_fraction: f64,
    pub support_inside_block: bool,
    pub within_rho0: bool,
    pub seed: String,
    pub config: SolverConfig,
}

impl Solution {
    pub fn summary(&self) -> Summary {
        let (n_fold, speed, d, alpha) = match self.flow {
            Flow::Rotating { n_fold } => (Some(n_fold), None, None, Some(self.multipliers.alpha)),
            Flow::Travelling { speed, d } => (None, Some(speed), Some(d), None),
        };
        Summary {
            s: self.config.s,
            n_fold,
            speed,
            d,
            epsilon: self.config.epsilon,
            alpha,
            mu: self.multipliers.mu,
            energy: self.energy,
            support_diameter: self.report.support_diameter,
            centroid: self.report.centroid,
            weak_residual: self.report.weak_residual,
            iterations: self.iterations,
            lambda_trajectory: self.trajectory.clone(),
            mass_residual: self.report.mass_residual,
            momentum_residual: self.report.momentum_residual,
            el_residual: self.report.el_residual,
            ascent_fraction: self.report.ascent_fraction,
            support_inside_block: self.report.support_inside_block,
            within_rho0: self.report.within_rho0,
            seed: format!("uniform disk, delta = {}", self.config.delta),
            config: self.config.clone(),
        }
    }

    /// Kernel of the problem this solution solves.
    pub fn kernel(&self) -> KernelSpec {
        match self.flow {
            Flow::Rotating { n_fold } => KernelSpec::n_fold(self.config.s, n_fold).expect("validated config"),
            Flow::Travelling { .. } => KernelSpec::half_plane(self.config.s).expect("validated config"),
        }
    }

    /// Target point of the concentration: `(1, 0)` or `(d, 0)`.
    pub fn target(&self) -> Point {
        match self.flow {
            Flow::Rotating { .. } => Point::new(1.0, 0.0),
            Flow::Travelling { d, .. } => Point::new(d, 0.0),
        }
    }

    /// Interaction energy with the `N/2` prefactor of the kinetic energy.
    pub fn kinetic_energy(&self) -> Result<f64> {
        interaction_energy(&self.field, &self.kernel(), Functional::Kinetic)
    }
}
