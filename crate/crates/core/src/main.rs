use std::fs::File;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use torus_bie::geometry::{PatchGrid, TorusShape, Vec3};
use torus_bie::harness::{self, CsvSink, PaperCase, ProblemConfig};
use torus_bie::validation;
use torus_bie::Error;

#[derive(Parser)]
#[command(version, about = "Nyström solver for the interior Dirichlet Laplace problem on tori")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem and report the error at the tube centers.
    Solve {
        #[arg(long, allow_negative_numbers = true)]
        delta1: f64,
        #[arg(long)]
        delta2: f64,
        #[arg(long)]
        p1: usize,
        #[arg(long)]
        p2: usize,
        /// Expansion terms beyond the leading one.
        #[arg(long = "K", default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = torus_bie::linsolve::DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = 100)]
        eval_points: usize,
        /// Point sources as "x,y,z"; default to the paper case for the shape,
        /// otherwise to two points one unit outside the torus.
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        r1: Option<Vec3>,
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        r2: Option<Vec3>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convergence study for one of the three reference tori.
    Converge {
        #[arg(long, value_enum)]
        shape: ShapeArg,
        /// Inclusive range "LO:HI" of p1 values.
        #[arg(long, value_parser = parse_range)]
        p1_range: (usize, usize),
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the Gauss-identity and oracle suites.
    Check {
        /// Random configurations for the recursion oracle.
        #[arg(long, default_value_t = 50)]
        configs: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapeArg {
    A,
    B,
    C,
}

impl From<ShapeArg> for PaperCase {
    fn from(s: ShapeArg) -> Self {
        match s {
            ShapeArg::A => PaperCase::A,
            ShapeArg::B => PaperCase::B,
            ShapeArg::C => PaperCase::C,
        }
    }
}

fn parse_point(s: &str) -> Result<Vec3, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [x, y, z] => Ok(Vec3::new(x, y, z)),
        _ => Err("expected three comma-separated numbers".into()),
    }
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (lo, hi) = s.split_once(':').ok_or("expected LO:HI")?;
    let lo: usize = lo.parse().map_err(|e| format!("{lo:?}: {e}"))?;
    let hi: usize = hi.parse().map_err(|e| format!("{hi:?}: {e}"))?;
    if lo == 0 || lo > hi {
        return Err("need 1 <= LO <= HI".into());
    }
    Ok((lo, hi))
}

fn default_sources(shape: &TorusShape) -> (Vec3, Vec3) {
    for case in [PaperCase::A, PaperCase::B, PaperCase::C] {
        if case.shape() == *shape {
            return case.sources();
        }
    }
    let reach = 3.0 + shape.delta1().abs() + shape.delta2();
    (Vec3::new(reach, 0.0, 0.0), Vec3::new(0.0, reach, 0.0))
}

fn open_sink(out: &Option<PathBuf>) -> Result<CsvSink<Box<dyn Write>>, Error> {
    let inner: Box<dyn Write> = match out {
        Some(path) => Box::new(File::create(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?),
        None => Box::new(std::io::stdout()),
    };
    CsvSink::new(inner)
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Solve {
            delta1,
            delta2,
            p1,
            p2,
            k,
            tol,
            eval_points,
            r1,
            r2,
            out,
        } => {
            let shape = TorusShape::new(delta1, delta2)?;
            let (d1, d2) = default_sources(&shape);
            let mut cfg = ProblemConfig::new(shape, PatchGrid::new(p1, p2)?, r1.unwrap_or(d1), r2.unwrap_or(d2))?;
            cfg.order = k;
            cfg.tol = tol;
            cfg.eval_count = eval_points;
            cfg.validate()?;
            let (row, report) = harness::run_case(&cfg)?;
            let mut sink = open_sink(&out)?;
            sink.write(&row)?;
            eprintln!(
                "N = {}, GMRES {} iterations (converged: {}), relative L2 error {:.3e}",
                row.unknowns, report.iterations, report.converged, row.rel_l2_error
            );
            Ok(if report.converged { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Converge { shape, p1_range, out } => {
            let case = PaperCase::from(shape);
            let configs = (p1_range.0..=p1_range.1)
                .map(|p| case.config(p))
                .collect::<Result<Vec<_>, _>>()?;
            let mut sink = open_sink(&out)?;
            let mut write_err = None;
            let rows = harness::convergence_study(&configs, |row, _| {
                if let Err(e) = sink.write(row) {
                    write_err.get_or_insert(e);
                }
                eprintln!("p1 = {}, p2 = {}: relative L2 error {:.3e}", row.p1, row.p2, row.rel_l2_error);
            });
            if let Some(e) = write_err {
                return Err(e);
            }
            Ok(if rows.iter().any(|r| r.failed()) { ExitCode::from(1) } else { ExitCode::SUCCESS })
        }
        Command::Check { configs } => {
            let lines = validation::check_suite(configs)?;
            for line in &lines {
                println!("{line}");
            }
            Ok(if lines.iter().all(|l| l.passed) { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 1 } else { 2 })
        }
    }
}
