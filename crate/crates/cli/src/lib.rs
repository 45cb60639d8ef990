//! Command-line driver: solver runs, point-vortex oracles, sweeps, the property
//! suite and gnuplot-ready exports.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use gsqg_core::diagnostics::scaling_report;
use gsqg_core::pointvortex::{
    pair_speed, simulate, thomson_angular_velocity, PointVortexConfiguration, Trajectory,
};
use gsqg_core::solver::{Flow, Solution, SolverConfig, Solver};
use gsqg_core::{Error, Point};
use serde::{Deserialize, Serialize};

pub mod plot;
pub mod verify;

#[derive(Debug, Parser)]
#[command(name = "gsqg", version, about = "Steady rotating and travelling gSQG vortices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve for an N-fold rotating vortex.
    Rotating(SolveArgs),
    /// Solve for a travelling vortex pair.
    Travelling(SolveArgs),
    /// Integrate a point-vortex system and compare with the closed forms.
    PointVortex {
        #[command(subcommand)]
        kind: PointVortexKind,
    },
    /// Solve one problem over several epsilons and report the scaling.
    Sweep(SweepArgs),
    /// Run the property suite.
    Verify(VerifyArgs),
    /// Convert run outputs into whitespace-separated columns.
    PlotData {
        #[command(subcommand)]
        kind: plot::PlotKind,
    },
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Base configuration; its epsilon is replaced by each sweep value.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    epsilons: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = verify::DEFAULT_SEED)]
    seed: u64,
    /// Directory for `verify.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Integration {
    #[arg(long = "t", default_value_t = 1.0)]
    t_end: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    /// Directory for `trajectory.csv` and `summary.json`; the summary is always printed.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum PointVortexKind {
    /// Unit vortices at the vertices of the regular N-gon of radius 1.
    Polygon {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        s: f64,
        #[command(flatten)]
        run: Integration,
    },
    /// +1 at (d, 0) and -1 at (-d, 0).
    Pair {
        #[arg(long, default_value_t = 1.0)]
        d: f64,
        #[arg(long)]
        s: f64,
        #[command(flatten)]
        run: Integration,
    },
    /// Positions and circulations from a JSON file.
    Custom {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        run: Integration,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CustomVortices {
    s: f64,
    positions: Vec<[f64; 2]>,
    circulations: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct PointVortexSummary {
    kind: &'static str,
    s: f64,
    t_end: f64,
    dt: f64,
    steps: usize,
    /// Polygon: measured angular velocity per vortex.
    #[serde(skip_serializing_if = "Option::is_none")]
    angular_velocity: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    thomson_angular_velocity: Option<f64>,
    /// Pair and custom: mean velocity per vortex.
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_velocity: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pair_speed: Option<f64>,
    /// Largest relative gap between measured and closed-form values.
    #[serde(skip_serializing_if = "Option::is_none")]
    relative_error: Option<f64>,
    final_positions: Vec<[f64; 2]>,
}

/// Failure of a command, split by exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad input: exit code 2.
    Config(String),
    /// The computation itself failed: exit code 1.
    Run(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Run(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) | Failure::Run(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Domain(_) | Error::UnsupportedRegime(_) => Failure::Config(e.to_string()),
            _ => Failure::Run(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Run(format!("i/o error: {e}"))
    }
}

type Outcome = std::result::Result<(), Failure>;

/// Worker count from `GSQG_THREADS`, if set.
fn configure_threads() -> Outcome {
    let Ok(raw) = std::env::var("GSQG_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Failure::Config(format!("GSQG_THREADS must be a positive integer, got {raw:?}")))?;
    // a second call in the same process (tests) keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parse `args` (program name first), run the command, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = configure_threads().and_then(|()| dispatch(cli.command));
    match outcome {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {f}");
            f.code()
        }
    }
}

fn dispatch(command: Command) -> Outcome {
    match command {
        Command::Rotating(args) => solve_command(&args, true),
        Command::Travelling(args) => solve_command(&args, false),
        Command::PointVortex { kind } => point_vortex(kind),
        Command::Sweep(args) => sweep(&args),
        Command::Verify(args) => run_verify(&args),
        Command::PlotData { kind } => plot::run(kind),
    }
}

fn read_config(path: &Path) -> std::result::Result<SolverConfig, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(SolverConfig::from_json(&text)?)
}

fn create(path: &Path) -> std::result::Result<BufWriter<File>, Failure> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Outcome {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Failure::Run(e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn write_solution(dir: &Path, solution: &Solution) -> Outcome {
    fs::create_dir_all(dir)?;
    let mut field = create(&dir.join("field.csv"))?;
    solution.field.write_csv(&mut field)?;
    field.flush()?;
    write_json(&dir.join("summary.json"), &solution.summary())
}

fn solve_command(args: &SolveArgs, rotating: bool) -> Outcome {
    let config = read_config(&args.config)?;
    let flow = config.flow()?;
    if rotating != matches!(flow, Flow::Rotating { .. }) {
        let wanted = if rotating { "n_fold" } else { "speed" };
        return Err(Failure::Config(format!("this subcommand needs a configuration with `{wanted}`")));
    }
    let solution = Solver::new(&config)?.solve()?;
    write_solution(&args.out, &solution)?;
    println!("{}", serde_json::to_string(&solution.summary()).map_err(|e| Failure::Run(e.to_string()))?);
    Ok(())
}

fn sweep(args: &SweepArgs) -> Outcome {
    let base = read_config(&args.config)?;
    let mut solutions = Vec::with_capacity(args.epsilons.len());
    for &eps in &args.epsilons {
        let mut config = base.clone();
        config.epsilon = eps;
        let solution = Solver::new(&config)?.solve()?;
        write_solution(&args.out.join(format!("eps_{eps}")), &solution)?;
        eprintln!("epsilon {eps}: mu {:.6e}, {} iterations", solution.multipliers.mu, solution.iterations);
        solutions.push(solution);
    }
    let report = scaling_report(&solutions)?;
    let mut csv = create(&args.out.join("scaling.csv"))?;
    report.write_csv(&mut csv)?;
    csv.flush()?;
    write_json(&args.out.join("scaling.json"), &report)
}

fn run_verify(args: &VerifyArgs) -> Outcome {
    let report = verify::run_suite(args.seed)?;
    for c in &report.checks {
        println!(
            "{} {:<34} worst {:.3e} limit {:.1e} ({} cases, {:.2} s)",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.worst,
            c.limit,
            c.cases,
            c.seconds
        );
    }
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        write_json(&dir.join("verify.json"), &report)?;
    }
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Run("property suite failed".into()))
    }
}

fn pairs(points: &[Point]) -> Vec<[f64; 2]> {
    points.iter().map(|p| [p.x, p.y]).collect()
}

fn point_vortex(kind: PointVortexKind) -> Outcome {
    let (kind_name, config, run) = match kind {
        PointVortexKind::Polygon { n, s, run } => ("polygon", PointVortexConfiguration::polygon(n, s)?, run),
        PointVortexKind::Pair { d, s, run } => ("pair", PointVortexConfiguration::pair(d, s)?, run),
        PointVortexKind::Custom { config, run } => {
            let text = fs::read_to_string(&config)
                .map_err(|e| Failure::Config(format!("cannot read {}: {e}", config.display())))?;
            let spec: CustomVortices =
                serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", config.display())))?;
            let positions = spec.positions.iter().map(|p| Point::new(p[0], p[1])).collect();
            ("custom", PointVortexConfiguration::new(positions, spec.circulations, spec.s)?, run)
        }
    };
    let trajectory = simulate(&config, run.t_end, run.dt)?;
    let summary = point_vortex_summary(kind_name, &config, &trajectory, &run)?;
    if let Some(dir) = &run.out {
        fs::create_dir_all(dir)?;
        let mut csv = create(&dir.join("trajectory.csv"))?;
        trajectory.write_csv(&mut csv)?;
        csv.flush()?;
        write_json(&dir.join("summary.json"), &summary)?;
    }
    println!("{}", serde_json::to_string_pretty(&summary).map_err(|e| Failure::Run(e.to_string()))?);
    Ok(())
}

fn point_vortex_summary(
    kind: &'static str,
    config: &PointVortexConfiguration,
    trajectory: &Trajectory,
    run: &Integration,
) -> std::result::Result<PointVortexSummary, Failure> {
    let n = config.len();
    if trajectory.times.len() < 2 {
        return Err(Failure::Config("integration horizon shorter than one step".into()));
    }
    let mut summary = PointVortexSummary {
        kind,
        s: config.s,
        t_end: *trajectory.times.last().expect("nonempty"),
        dt: run.dt,
        steps: trajectory.times.len() - 1,
        angular_velocity: None,
        thomson_angular_velocity: None,
        mean_velocity: None,
        pair_speed: None,
        relative_error: None,
        final_positions: pairs(trajectory.final_positions()),
    };
    match kind {
        "polygon" => {
            let measured: Vec<f64> = (0..n).map(|k| trajectory.angular_velocity(k)).collect();
            let exact = thomson_angular_velocity(n, config.s)?;
            summary.relative_error = Some(measured.iter().map(|w| (w - exact).abs() / exact).fold(0.0, f64::max));
            summary.angular_velocity = Some(measured);
            summary.thomson_angular_velocity = Some(exact);
        }
        _ => {
            let velocities: Vec<Point> = (0..n).map(|k| trajectory.mean_velocity(k)).collect();
            if kind == "pair" {
                let d = config.positions[0].x;
                let exact = pair_speed(d, config.s)?;
                // both vortices move along -x2 at the pair speed
                let expected = Point::new(0.0, -exact);
                summary.relative_error =
                    Some(velocities.iter().map(|v| (v - expected).norm() / exact).fold(0.0, f64::max));
                summary.pair_speed = Some(exact);
            }
            summary.mean_velocity = Some(pairs(&velocities));
        }
    }
    Ok(summary)
}
