//! Experiment driver: boundary data, solve, interior evaluation and convergence tables.

use std::f64::consts::{PI, TAU};
use std::io::{Read, Write};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::geometry::{PatchGrid, TorusShape, Vec3};
use crate::linsolve::{gmres, SolveReport, DEFAULT_MAXITER, DEFAULT_TOL};
use crate::operator::DoubleLayerSystem;
use crate::quadrature::{TensorRules, COARSE_NODES};

/// The three torus cases of the convergence study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PaperCase {
    /// `δ = (0, 1)`, `p2 = p1`.
    A,
    /// `δ = (0.5, 1)`, `p2 = 2 p1`.
    B,
    /// `δ = (0, 0.25)`, `p2 = 4 p1`.
    C,
}

impl PaperCase {
    pub fn shape(self) -> TorusShape {
        let (d1, d2) = match self {
            PaperCase::A => (0.0, 1.0),
            PaperCase::B => (0.5, 1.0),
            PaperCase::C => (0.0, 0.25),
        };
        TorusShape::new(d1, d2).expect("fixed shapes are valid")
    }

    pub fn sources(self) -> (Vec3, Vec3) {
        match self {
            PaperCase::A => (Vec3::new(4.0, 0.0, 0.0), Vec3::new(0.0, 4.0, 0.0)),
            PaperCase::B => (Vec3::new(4.5, 0.0, 0.0), Vec3::new(0.0, 3.5, 0.0)),
            PaperCase::C => (Vec3::new(3.25, 0.0, 0.0), Vec3::new(0.0, 3.25, 0.0)),
        }
    }

    /// `p2 / p1`.
    pub fn aspect(self) -> usize {
        match self {
            PaperCase::A => 1,
            PaperCase::B => 2,
            PaperCase::C => 4,
        }
    }

    pub fn config(self, p1: usize) -> Result<ProblemConfig> {
        let (r1, r2) = self.sources();
        ProblemConfig::new(self.shape(), PatchGrid::new(p1, self.aspect() * p1)?, r1, r2)
    }
}

/// One Dirichlet problem: geometry, discretization and point sources.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    pub shape: TorusShape,
    pub grid: PatchGrid,
    /// Number of expansion terms kept beyond the leading one.
    pub order: usize,
    pub r1: Vec3,
    pub r2: Vec3,
    pub eval_count: usize,
    pub tol: f64,
    pub maxiter: usize,
}

impl ProblemConfig {
    /// Defaults: one extra expansion term, 100 evaluation points, GMRES to 1e-13.
    pub fn new(shape: TorusShape, grid: PatchGrid, r1: Vec3, r2: Vec3) -> Result<Self> {
        let cfg = Self {
            shape,
            grid,
            order: 1,
            r1,
            r2,
            eval_count: 100,
            tol: DEFAULT_TOL,
            maxiter: DEFAULT_MAXITER,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for r in [&self.r1, &self.r2] {
            if !(self.shape.tube_offset(r) > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "source ({}, {}, {}) must lie outside the closed torus",
                    r.x, r.y, r.z
                )));
            }
        }
        if self.eval_count == 0 {
            return Err(Error::InvalidInput("need at least one evaluation point".into()));
        }
        if !(self.tol > 0.0) || self.maxiter == 0 {
            return Err(Error::InvalidInput("GMRES tolerance and iteration cap must be positive".into()));
        }
        Ok(())
    }
}

/// `g(r) = 1/|r − r1| − 1/|r − r2|`.
pub fn boundary_data(cfg: &ProblemConfig, r: &Vec3) -> f64 {
    1.0 / (r - cfg.r1).norm() - 1.0 / (r - cfg.r2).norm()
}

/// The harmonic extension of `g`, which is the exact interior solution.
pub fn exact_interior(cfg: &ProblemConfig, r: &Vec3) -> f64 {
    boundary_data(cfg, r)
}

/// `n` equispaced points on the tube's center circle.
pub fn tube_center_points(shape: &TorusShape, n: usize) -> Vec<Vec3> {
    (0..n)
        .map(|k| {
            let s2 = TAU * k as f64 / n as f64;
            let rr = shape.ring_radius(s2);
            Vec3::new(rr * s2.cos(), rr * s2.sin(), 0.0)
        })
        .collect()
}

/// Coarse-node values of μ, patch-major with `quadrature` node order inside a patch.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerDensity {
    pub values: Vec<f64>,
}

impl LayerDensity {
    pub fn new(grid: &PatchGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != COARSE_NODES * grid.patch_count() {
            return Err(Error::InvalidInput(format!(
                "density has {} values, grid needs {}",
                values.len(),
                COARSE_NODES * grid.patch_count()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("density has non-finite entries".into()));
        }
        Ok(Self { values })
    }

    pub fn constant(grid: &PatchGrid, value: f64) -> Self {
        Self {
            values: vec![value; COARSE_NODES * grid.patch_count()],
        }
    }
}

/// `U(r) = (1/4π) ∬ J/|u|³ μ dt` with every patch on the 16×16 grid.
/// Intended for points well inside the tube.
pub fn eval_solution(system: &DoubleLayerSystem, mu: &LayerDensity, points: &[Vec3]) -> Vec<f64> {
    use rayon::prelude::*;
    let rules = TensorRules::standard();
    // Per fine node: weighted normal and density value.
    let sources: Vec<(Vec3, Vec3, f64)> = system
        .patches()
        .iter()
        .enumerate()
        .flat_map(|(pi, patch)| {
            let fine_mu = rules.interp_to_fine(&mu.values[pi * COARSE_NODES..(pi + 1) * COARSE_NODES]);
            patch
                .fine
                .iter()
                .zip(rules.fine_weights())
                .zip(fine_mu)
                .map(|((p, w), m)| (p.position, p.scaled_normal() * *w, m))
                .collect::<Vec<_>>()
        })
        .collect();
    points
        .par_iter()
        .map(|r| {
            let sum: f64 = sources
                .iter()
                .map(|(pos, wn, m)| {
                    let u = pos - r;
                    let n2 = u.norm_squared();
                    wn.dot(&u) / (n2 * n2.sqrt()) * m
                })
                .sum();
            sum / (4.0 * PI)
        })
        .collect()
}

/// A solved problem together with its discretization.
#[derive(Debug)]
pub struct Solution {
    pub system: DoubleLayerSystem,
    pub density: LayerDensity,
    pub report: SolveReport,
}

/// Solves `(I + D) μ = 2g` with `g` from the configured point sources.
pub fn solve_problem(cfg: &ProblemConfig) -> Result<Solution> {
    solve_with_data(cfg, |r| boundary_data(cfg, r))
}

/// As [`solve_problem`], with arbitrary boundary data.
pub fn solve_with_data(cfg: &ProblemConfig, g: impl Fn(&Vec3) -> f64) -> Result<Solution> {
    cfg.validate()?;
    let system = DoubleLayerSystem::new(cfg.shape, cfg.grid, cfg.order)?;
    let rhs: Vec<f64> = system.targets().iter().map(|r| 2.0 * g(r)).collect();
    let (values, report) = gmres(|v| system.apply(v), &rhs, cfg.tol, cfg.maxiter)?;
    let density = LayerDensity::new(&cfg.grid, values)?;
    Ok(Solution { system, density, report })
}

/// `sqrt(Σ|U − U_exact|² / Σ|U_exact|²)`.
pub fn relative_l2_error(computed: &[f64], exact: &[f64]) -> f64 {
    let num: f64 = computed.iter().zip(exact).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = exact.iter().map(|b| b * b).sum();
    (num / den).sqrt()
}

/// One mesh of a convergence study. Failed meshes carry NaN errors and timings.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub p1: usize,
    pub p2: usize,
    pub unknowns: usize,
    pub rel_l2_error: f64,
    pub gmres_iters: usize,
    pub near_seconds: f64,
    pub total_seconds: f64,
}

impl ConvergenceRow {
    pub fn failed(&self) -> bool {
        self.rel_l2_error.is_nan()
    }
}

/// Solves and evaluates at tube centers for one configuration.
pub fn run_case(cfg: &ProblemConfig) -> Result<(ConvergenceRow, SolveReport)> {
    let start = Instant::now();
    let sol = solve_problem(cfg)?;
    let points = tube_center_points(&cfg.shape, cfg.eval_count);
    let computed = eval_solution(&sol.system, &sol.density, &points);
    let exact: Vec<f64> = points.iter().map(|r| exact_interior(cfg, r)).collect();
    let row = ConvergenceRow {
        p1: cfg.grid.p1(),
        p2: cfg.grid.p2(),
        unknowns: sol.system.len(),
        rel_l2_error: relative_l2_error(&computed, &exact),
        gmres_iters: sol.report.iterations,
        near_seconds: sol.system.near_seconds(),
        total_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((row, sol.report))
}

/// Runs every configuration in order. A failing mesh yields a NaN row and the
/// study continues; `on_row` sees each row as soon as it is available.
pub fn convergence_study(
    configs: &[ProblemConfig],
    mut on_row: impl FnMut(&ConvergenceRow, Option<&SolveReport>),
) -> Vec<ConvergenceRow> {
    configs
        .iter()
        .map(|cfg| {
            let (row, report) = match run_case(cfg) {
                Ok((row, report)) => (row, Some(report)),
                Err(_) => (
                    ConvergenceRow {
                        p1: cfg.grid.p1(),
                        p2: cfg.grid.p2(),
                        unknowns: COARSE_NODES * cfg.grid.patch_count(),
                        rel_l2_error: f64::NAN,
                        gmres_iters: 0,
                        near_seconds: f64::NAN,
                        total_seconds: f64::NAN,
                    },
                    None,
                ),
            };
            on_row(&row, report.as_ref());
            row
        })
        .collect()
}

pub const CSV_HEADER: [&str; 7] = [
    "p1",
    "p2",
    "N",
    "rel_l2_error",
    "gmres_iters",
    "near_seconds",
    "total_seconds",
];

fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_error(e: impl std::fmt::Display) -> Error {
    Error::InvalidInput(format!("CSV: {e}"))
}

/// Streams rows to a CSV sink, header first.
pub struct CsvSink<W: Write> {
    writer: csv::Writer<W>,
}

impl<W: Write> CsvSink<W> {
    pub fn new(inner: W) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(inner);
        writer.write_record(CSV_HEADER).map_err(csv_error)?;
        writer.flush().map_err(csv_error)?;
        Ok(Self { writer })
    }

    pub fn write(&mut self, row: &ConvergenceRow) -> Result<()> {
        self.writer
            .write_record([
                row.p1.to_string(),
                row.p2.to_string(),
                row.unknowns.to_string(),
                fmt_real(row.rel_l2_error),
                row.gmres_iters.to_string(),
                fmt_real(row.near_seconds),
                fmt_real(row.total_seconds),
            ])
            .map_err(csv_error)?;
        self.writer.flush().map_err(csv_error)
    }
}

pub fn write_csv<W: Write>(inner: W, rows: &[ConvergenceRow]) -> Result<()> {
    let mut sink = CsvSink::new(inner)?;
    rows.iter().try_for_each(|r| sink.write(r))
}

pub fn read_csv<R: Read>(inner: R) -> Result<Vec<ConvergenceRow>> {
    let mut reader = csv::Reader::from_reader(inner);
    let header = reader.headers().map_err(csv_error)?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::InvalidInput("CSV: unexpected header".into()));
    }
    reader
        .records()
        .map(|rec| {
            let rec = rec.map_err(csv_error)?;
            let int = |i: usize| rec[i].parse::<usize>().map_err(csv_error);
            let real = |i: usize| rec[i].parse::<f64>().map_err(csv_error);
            Ok(ConvergenceRow {
                p1: int(0)?,
                p2: int(1)?,
                unknowns: int(2)?,
                rel_l2_error: real(3)?,
                gmres_iters: int(4)?,
                near_seconds: real(5)?,
                total_seconds: real(6)?,
            })
        })
        .collect()
}

/// Least-squares slope of `−log(error)` against `log(p1)`.
pub fn fitted_order(rows: &[ConvergenceRow]) -> f64 {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| ((r.p1 as f64).ln(), r.rel_l2_error.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    -sxy / sxx
}
