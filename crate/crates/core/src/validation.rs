//! Oracle-backed validation suites shared by the `check` subcommand and the
//! acceptance tests. Each suite returns measured errors; callers decide on pass/fail.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::harness::{eval_solution, tube_center_points, LayerDensity};
use crate::operator::{apply_far, apply_intermediate, apply_near, classify, DoubleLayerSystem, PatchData, TargetClass};
use crate::quadrature::TensorRules;
use crate::geometry::{surface_frame, PatchGrid, PatchIndex, TorusShape, Vec3};
use crate::fpintegrals::{box_moments_range, c_table, c_table_alternate, f_table, g_table, QuadFormParams};
use crate::oracle;

/// Highest monomial degree used by the near-field product integration.
pub const MOMENT_DEGREE: usize = 15;

/// Outcome of the recursion suite.
#[derive(Debug, Clone, Default)]
pub struct RecursionReport {
    pub configs: usize,
    /// Worst `|I − I_ref| / ∬|xᵐyⁿ|/d^{k+1/2}` over all configurations and entries.
    pub max_normalized_error: f64,
    /// Worst plain relative error `|I − I_ref| / |I_ref|` over all entries.
    pub max_relative_error: f64,
    /// Worst relative mismatch of first (F, G) and mixed (C) finite-difference derivatives.
    pub max_derivative_error: f64,
    /// Worst relative disagreement between the two diagonal recursions.
    pub max_branch_mismatch: f64,
}

/// Random box and exterior singular point: half-widths in [0.4, 1.2], `|c| ≤ 0.8`,
/// distance from the closed box between 0.5 and 1.0 times the smaller half-width.
pub fn random_exterior_config(rng: &mut ChaCha8Rng) -> QuadFormParams {
    let a: f64 = rng.random_range(0.4..1.2);
    let b = rng.random_range(0.4..1.2);
    let c = rng.random_range(-0.8..0.8);
    let h = a.min(b);
    loop {
        let x0: f64 = rng.random_range(-(a + h)..(a + h));
        let y0: f64 = rng.random_range(-(b + h)..(b + h));
        let dist = (x0.abs() - a).max(0.0).hypot((y0.abs() - b).max(0.0));
        if (0.5 * h..=h).contains(&dist) {
            return QuadFormParams { a, b, c, x0, y0 };
        }
    }
}

/// Box moments against brute-force quadrature on `configs` random exterior
/// configurations, plus derivative and branch cross-checks.
pub fn recursion_suite(configs: usize, seed: u64) -> Result<RecursionReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = RecursionReport {
        configs,
        ..Default::default()
    };
    let per_k = (MOMENT_DEGREE + 1) * (MOMENT_DEGREE + 1);
    for _ in 0..configs {
        let p = random_exterior_config(&mut rng);
        let tables = box_moments_range(&p, MOMENT_DEGREE, MOMENT_DEGREE, 1, 2)?;
        let (reference, l1) = oracle::exterior_box_moments(&p, MOMENT_DEGREE, MOMENT_DEGREE, &[1, 2], 1e-13);
        for (ki, table) in tables.iter().enumerate() {
            for j in 0..per_k {
                let err = (table.values()[j] - reference[ki][j]).abs();
                report.max_normalized_error = report.max_normalized_error.max(err / l1[ki][j]);
                report.max_relative_error = report.max_relative_error.max(err / reference[ki][j].abs());
            }
        }
        report.max_derivative_error = report.max_derivative_error.max(derivative_check(&p, &mut rng)?);
        report.max_branch_mismatch = report.max_branch_mismatch.max(branch_check(&p)?);
    }
    Ok(report)
}

fn density(p: &QuadFormParams, x: f64, y: f64, k: usize) -> f64 {
    p.form(x - p.x0, y - p.y0).abs().powf(-(k as f64 + 0.5))
}

/// Fourth-order central differences of F, G (first derivatives) and C (mixed
/// second derivative) against the integrand, at a point offset from the
/// singular point by 0.5–1.0 of the smaller half-width along both axes and
/// at least a quarter of it from the coordinate axes.
///
/// The antiderivatives are valid at any point off the two lines through the
/// singular point. Closer to those lines the tables grow like `1/|y − y0|^{2k}`
/// and rounding the tables to double swamps the difference quotients.
fn derivative_check(p: &QuadFormParams, rng: &mut ChaCha8Rng) -> Result<f64> {
    let ell = p.a.min(p.b);
    let mut offset = || {
        let s = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        s * rng.random_range(0.5..1.0) * ell
    };
    // Keep away from the axes too, where xᵐ yⁿ vanishes and relative errors are meaningless.
    let (x, y) = loop {
        let (x, y) = (p.x0 + offset(), p.y0 + offset());
        if x.abs() >= 0.25 * ell && y.abs() >= 0.25 * ell {
            break (x, y);
        }
    };
    let stencil = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];
    let mut worst: f64 = 0.0;

    let h = 1e-3 * ell;
    let (mut df, mut dg) = (vec![0.0; 7 * 4], vec![0.0; 7 * 4]);
    for &(s, w) in &stencil {
        let f = f_table(6, 3, x + s * h, y, p)?;
        let g = g_table(6, 3, x, y + s * h, p)?;
        for i in 0..7 * 4 {
            df[i] += w * f.values()[i] / (12.0 * h);
            dg[i] += w * g.values()[i] / (12.0 * h);
        }
    }
    for m in 0..7 {
        for k in 0..4 {
            let ef = x.powi(m as i32) * density(p, x, y, k);
            let eg = y.powi(m as i32) * density(p, x, y, k);
            worst = worst.max((df[m * 4 + k] - ef).abs() / ef.abs());
            worst = worst.max((dg[m * 4 + k] - eg).abs() / eg.abs());
        }
    }

    let h = 2e-3 * ell;
    for k in 1..=2 {
        let mut d2 = [0.0; 9];
        for &(si, wi) in &stencil {
            for &(sj, wj) in &stencil {
                let t = c_table(2, 2, k, x + si * h, y + sj * h, p)?;
                for (acc, v) in d2.iter_mut().zip(t.values()) {
                    *acc += wi * wj * v / (144.0 * h * h);
                }
            }
        }
        for m in 0..3 {
            for n in 0..3 {
                let e = x.powi(m as i32) * y.powi(n as i32) * density(p, x, y, k);
                worst = worst.max((d2[m * 3 + n] - e).abs() / e.abs());
            }
        }
    }
    Ok(worst)
}

/// Both diagonal recursions at every corner, for `k ≤ 3` and `m, n ≤ 15`.
fn branch_check(p: &QuadFormParams) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (x, y) in [(p.a, p.b), (-p.a, p.b), (p.a, -p.b), (-p.a, -p.b)] {
        for k in 1..=3 {
            let u = c_table(MOMENT_DEGREE, MOMENT_DEGREE, k, x, y, p)?;
            let v = c_table_alternate(MOMENT_DEGREE, MOMENT_DEGREE, k, x, y, p)?;
            for (a, b) in u.values().iter().zip(v.values()) {
                let scale = a.abs().max(b.abs());
                if scale > 0.0 {
                    worst = worst.max((a - b).abs() / scale);
                }
            }
        }
    }
    Ok(worst)
}

/// Adaptive reference for one patch contribution `(1/2π) ∬ J/|u|³ μ dt`,
/// where `t` is the target's parameter in this patch's map. Inside the patch
/// the weak singularity is removed by Duffy transforms; outside, the nearest
/// point of the patch is used as a breakpoint.
pub fn patch_contribution_oracle(
    shape: &TorusShape,
    grid: &PatchGrid,
    patch: PatchIndex,
    r: &Vec3,
    t: [f64; 2],
    mu: impl Fn([f64; 2]) -> f64,
    rel_tol: f64,
) -> f64 {
    let f = |x: f64, y: f64| {
        let src = surface_frame(shape, grid, patch, [x, y]);
        let u = src.position - r;
        let n2 = u.norm_squared();
        if n2 == 0.0 {
            return 0.0;
        }
        src.scaled_normal().dot(&u) / (n2 * n2.sqrt()) * mu([x, y])
    };
    let inside = t[0].abs() <= 1.0 && t[1].abs() <= 1.0;
    let value = if inside {
        oracle::integrate_square_singular(f, t, rel_tol)
    } else {
        let bx = [t[0].clamp(-1.0, 1.0)];
        let by = [t[1].clamp(-1.0, 1.0)];
        oracle::integrate_rect_l1(f, (-1.0, 1.0, &bx), (-1.0, 1.0, &by), rel_tol)
    };
    value / (2.0 * std::f64::consts::PI)
}

/// Worst errors of the on-surface and interior Gauss identities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussReport {
    /// `max |apply(1) − 2|` over all coarse nodes.
    pub surface_max_error: f64,
    /// `max |U(1) − 1|` over the tube-center points.
    pub interior_max_error: f64,
    pub seconds: f64,
}

/// Both Gauss identities on the circular torus `δ = (0, 1)` with `p × p` patches.
pub fn gauss_identities(p: usize, order: usize, eval_points: usize) -> Result<GaussReport> {
    let start = std::time::Instant::now();
    let shape = TorusShape::new(0.0, 1.0)?;
    let grid = PatchGrid::new(p, p)?;
    let system = DoubleLayerSystem::new(shape, grid, order)?;
    let out = system.apply(&vec![1.0; system.len()]);
    let surface_max_error = out.iter().map(|v| (v - 2.0).abs()).fold(0.0, f64::max);
    let points = tube_center_points(&shape, eval_points);
    let u = eval_solution(&system, &LayerDensity::constant(&grid, 1.0), &points);
    let interior_max_error = u.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    Ok(GaussReport {
        surface_max_error,
        interior_max_error,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// One near-rule evaluation compared against the adaptive reference.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleComparison {
    pub patch: PatchIndex,
    /// Target parameter in the patch's local coordinates.
    pub t: [f64; 2],
    pub class: TargetClass,
    pub value: f64,
    pub reference: f64,
}

impl OracleComparison {
    pub fn relative_error(&self) -> f64 {
        (self.value - self.reference).abs() / self.reference.abs()
    }
}

/// A smooth nonconstant test density, a tensor polynomial of degree 3 in each variable.
pub fn test_density(t: [f64; 2]) -> f64 {
    1.0 + 0.3 * t[0] - 0.2 * t[1] + 0.1 * t[0] * t[1] - 0.05 * t[0].powi(3) + 0.04 * t[1].powi(3)
}

fn coarse_samples(mu: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
    TensorRules::standard().coarse.tensor_nodes().into_iter().map(mu).collect()
}

fn rule_value(
    shape: &TorusShape,
    grid: &PatchGrid,
    patch: &PatchData,
    r: &Vec3,
    class: TargetClass,
    mu: &[f64],
    order: usize,
) -> Result<f64> {
    Ok(match class {
        TargetClass::Far { .. } => apply_far(patch, r, mu),
        TargetClass::Intermediate { .. } => apply_intermediate(patch, r, mu),
        TargetClass::Near { t } => apply_near(shape, grid, patch, r, t, mu, order)?,
    })
}

/// Self-interactions at `count` coarse nodes drawn uniformly over all patches of
/// the circular torus with `p × p` patches, against Duffy-transformed adaptive
/// quadrature run to `1e-9` relative to the integral of the absolute integrand.
pub fn self_interaction_suite(p: usize, count: usize, seed: u64) -> Result<Vec<OracleComparison>> {
    let shape = TorusShape::new(0.0, 1.0)?;
    let grid = PatchGrid::new(p, p)?;
    let nodes = TensorRules::standard().coarse.tensor_nodes();
    let mu = coarse_samples(test_density);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let index = PatchIndex::new(rng.random_range(0..p), rng.random_range(0..p));
            let t = nodes[rng.random_range(0..nodes.len())];
            let patch = PatchData::new(&shape, &grid, index);
            let r = surface_frame(&shape, &grid, index, t).position;
            let class = TargetClass::from_local(t);
            Ok(OracleComparison {
                patch: index,
                t,
                class,
                value: rule_value(&shape, &grid, &patch, &r, class, &mu, 1)?,
                reference: patch_contribution_oracle(&shape, &grid, index, &r, t, test_density, 1e-9),
            })
        })
        .collect()
}

/// Patch contributions for targets placed at `|t|` just below and just above
/// each regime threshold (1.99/2.01 and 3.49/3.51), along several directions,
/// each computed by the rule its classification selects.
pub fn regime_boundary_suite(p: usize) -> Result<Vec<OracleComparison>> {
    let shape = TorusShape::new(0.0, 1.0)?;
    let grid = PatchGrid::new(p, p)?;
    let index = PatchIndex::new(p / 2, p / 3);
    let patch = PatchData::new(&shape, &grid, index);
    let mu = coarse_samples(test_density);
    let mut out = Vec::new();
    for radius in [1.99, 2.01, 3.49, 3.51] {
        for k in 0..8 {
            let angle = std::f64::consts::PI * (0.1 + 0.25 * k as f64);
            let t = [radius * angle.cos(), radius * angle.sin()];
            let s = grid.patch_to_global(index, t);
            let r = shape.position(s);
            let class = classify(&grid, index, s);
            out.push(OracleComparison {
                patch: index,
                t,
                class,
                value: rule_value(&shape, &grid, &patch, &r, class, &mu, 1)?,
                reference: patch_contribution_oracle(&shape, &grid, index, &r, t, test_density, 1e-12),
            });
        }
    }
    Ok(out)
}

/// Pass/fail bounds shared by the `check` subcommand and the acceptance tests.
pub mod bounds {
    pub const GAUSS_SURFACE: f64 = 1e-8;
    pub const GAUSS_INTERIOR: f64 = 1e-9;
    pub const MOMENT_RELATIVE: f64 = 1e-9;
    pub const DERIVATIVE_RELATIVE: f64 = 1e-5;
    pub const BRANCH_AGREEMENT: f64 = 1e-10;
    pub const SELF_INTERACTION_RELATIVE: f64 = 1e-7;
    pub const REGIME_BOUNDARY_RELATIVE: f64 = 1e-8;
}

/// One line of a validation run.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for CheckLine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict}  {}: {}", self.name, self.detail)
    }
}

fn worst(comparisons: &[OracleComparison]) -> f64 {
    comparisons.iter().map(OracleComparison::relative_error).fold(0.0, f64::max)
}

/// Gauss identities, recursion oracles, self-interactions and regime boundaries.
pub fn check_suite(recursion_configs: usize) -> Result<Vec<CheckLine>> {
    let mut lines = Vec::new();

    let gauss = gauss_identities(8, 1, 100)?;
    lines.push(CheckLine {
        name: "surface Gauss identity",
        passed: gauss.surface_max_error <= bounds::GAUSS_SURFACE,
        detail: format!("max |apply(1) - 2| = {:.3e} (bound {:.0e})", gauss.surface_max_error, bounds::GAUSS_SURFACE),
    });
    lines.push(CheckLine {
        name: "interior Gauss identity",
        passed: gauss.interior_max_error <= bounds::GAUSS_INTERIOR,
        detail: format!("max |U(1) - 1| = {:.3e} (bound {:.0e})", gauss.interior_max_error, bounds::GAUSS_INTERIOR),
    });

    let rec = recursion_suite(recursion_configs, 2024)?;
    lines.push(CheckLine {
        name: "box moments vs quadrature",
        passed: rec.max_relative_error <= bounds::MOMENT_RELATIVE,
        detail: format!("{} configurations, max relative error {:.3e}", rec.configs, rec.max_relative_error),
    });
    lines.push(CheckLine {
        name: "antiderivative finite differences",
        passed: rec.max_derivative_error <= bounds::DERIVATIVE_RELATIVE,
        detail: format!("max relative error {:.3e}", rec.max_derivative_error),
    });
    lines.push(CheckLine {
        name: "diagonal recursion agreement",
        passed: rec.max_branch_mismatch <= bounds::BRANCH_AGREEMENT,
        detail: format!("max relative mismatch {:.3e}", rec.max_branch_mismatch),
    });

    let selfs = self_interaction_suite(8, 10, 11)?;
    lines.push(CheckLine {
        name: "near rule, self-interactions",
        passed: worst(&selfs) <= bounds::SELF_INTERACTION_RELATIVE,
        detail: format!("{} targets, max relative error {:.3e}", selfs.len(), worst(&selfs)),
    });

    let regimes = regime_boundary_suite(8)?;
    lines.push(CheckLine {
        name: "regime boundaries",
        passed: worst(&regimes) <= bounds::REGIME_BOUNDARY_RELATIVE,
        detail: format!("{} targets at |t| = 1.99, 2.01, 3.49, 3.51, max relative error {:.3e}", regimes.len(), worst(&regimes)),
    });
    Ok(lines)
}
