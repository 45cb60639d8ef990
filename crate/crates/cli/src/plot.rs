//! Gnuplot-ready column files from the CSV outputs of the other commands.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Subcommand;

use crate::{Failure, Outcome};

#[derive(Debug, Subcommand)]
pub enum PlotKind {
    /// `x1 x2 value` over the whole plane, from a `field.csv`.
    Field {
        #[arg(long)]
        input: PathBuf,
        /// Rotating output: add the N rotated copies of the sector.
        #[arg(long, conflicts_with = "odd")]
        n_fold: Option<usize>,
        /// Travelling output: add the odd mirror image in x1.
        #[arg(long)]
        odd: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// One block per vortex (`t x1 x2`), blocks separated for gnuplot's `index`.
    Trajectory {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Any CSV table as whitespace-separated columns under a `#` header.
    Table {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_table(path: &Path) -> std::result::Result<Table, Failure> {
    let bad = |e: csv::Error| Failure::Config(format!("{}: {e}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(bad)?;
    let headers = reader.headers().map_err(bad)?.iter().map(str::to_owned).collect();
    let rows = reader
        .records()
        .map(|r| r.map(|r| r.iter().map(str::to_owned).collect()))
        .collect::<Result<_, _>>()
        .map_err(bad)?;
    Ok(Table { headers, rows })
}

fn column(table: &Table, name: &str) -> std::result::Result<usize, Failure> {
    table
        .headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Failure::Config(format!("missing column `{name}`")))
}

fn number(cell: &str) -> std::result::Result<f64, Failure> {
    cell.trim()
        .parse()
        .map_err(|_| Failure::Config(format!("not a number: {cell:?}")))
}

pub(crate) fn run(kind: PlotKind) -> Outcome {
    match kind {
        PlotKind::Field { input, n_fold, odd, out } => field(&input, n_fold, odd, &out),
        PlotKind::Trajectory { input, out } => trajectory(&input, &out),
        PlotKind::Table { input, out } => table(&input, &out),
    }
}

fn field(input: &Path, n_fold: Option<usize>, odd: bool, out: &Path) -> Outcome {
    let t = read_table(input)?;
    let value = column(&t, "value")?;
    let polar = t.headers.iter().any(|h| h == "r");
    let points: Vec<(f64, f64, f64)> = if polar {
        let (r, theta) = (column(&t, "r")?, column(&t, "theta")?);
        t.rows
            .iter()
            .map(|row| {
                let (r, th) = (number(&row[r])?, number(&row[theta])?);
                Ok((r * th.cos(), r * th.sin(), number(&row[value])?))
            })
            .collect::<Result<_, Failure>>()?
    } else {
        let (a, b) = (column(&t, "x1")?, column(&t, "x2")?);
        t.rows
            .iter()
            .map(|row| Ok((number(&row[a])?, number(&row[b])?, number(&row[value])?)))
            .collect::<Result<_, Failure>>()?
    };
    let mut w = BufWriter::new(File::create(out)?);
    writeln!(w, "# x1 x2 value")?;
    let copies = n_fold.unwrap_or(1).max(1);
    for k in 0..copies {
        let (sin, cos) = (2.0 * PI * k as f64 / copies as f64).sin_cos();
        for &(x, y, v) in &points {
            writeln!(w, "{} {} {}", cos * x - sin * y, sin * x + cos * y, v)?;
        }
    }
    if odd {
        for &(x, y, v) in &points {
            writeln!(w, "{} {} {}", -x, y, -v)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn trajectory(input: &Path, out: &Path) -> Outcome {
    let t = read_table(input)?;
    let (ct, ck, c1, c2) = (column(&t, "t")?, column(&t, "k")?, column(&t, "x1")?, column(&t, "x2")?);
    let mut blocks: Vec<Vec<&Vec<String>>> = Vec::new();
    for row in &t.rows {
        let k: usize = row[ck]
            .trim()
            .parse()
            .map_err(|_| Failure::Config(format!("bad vortex index {:?}", row[ck])))?;
        if blocks.len() <= k {
            blocks.resize(k + 1, Vec::new());
        }
        blocks[k].push(row);
    }
    let mut w = BufWriter::new(File::create(out)?);
    for (k, rows) in blocks.iter().enumerate() {
        if k > 0 {
            writeln!(w, "\n")?;
        }
        writeln!(w, "# vortex {k}: t x1 x2")?;
        for row in rows {
            writeln!(w, "{} {} {}", row[ct], row[c1], row[c2])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn table(input: &Path, out: &Path) -> Outcome {
    let t = read_table(input)?;
    let mut w = BufWriter::new(File::create(out)?);
    writeln!(w, "# {}", t.headers.join(" "))?;
    for row in &t.rows {
        let cells: Vec<&str> = row.iter().map(|c| if c.is_empty() { "NaN" } else { c.as_str() }).collect();
        writeln!(w, "{}", cells.join(" "))?;
    }
    w.flush()?;
    Ok(())
}
