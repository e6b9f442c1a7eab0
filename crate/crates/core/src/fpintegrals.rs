//! Finite-part antiderivatives of `xᵐ yⁿ / |d_c(x − x0, y − y0)|^{k+1/2}` and the
//! box moments built from them.
//!
//! With `d_c(x, y) = x² + 2cxy + y²`, the tables are
//!
//! ```text
//! F_mk = ∫ xᵐ dx / |d_c|^{k+1/2}
//! G_nk = ∫ yⁿ dy / |d_c|^{k+1/2}
//! C_mnk = ∬ xᵐ yⁿ dx dy / |d_c|^{k+1/2}
//! ```
//!
//! all taken in the Hadamard finite-part sense and generated by upward
//! recursions in `m`, `n` and `k`. A definite integral over the box
//! `[-a, a] × [-b, b]` is the alternating sum of `C_mnk` over the four corners;
//! when `(x0, y0)` lies inside the box that sum is the finite part.
//!
//! Upward recursion loses accuracy geometrically in `m` and `n` when the
//! singular point is outside the box, so every table is evaluated in
//! double-double arithmetic and rounded once at the end.

use crate::dd::{self, Dd};
use crate::error::{Error, Result};

/// `|c|` beyond this is treated as a degenerate form.
const DEGENERACY_MARGIN: f64 = 1e-12;
/// Relative distance below which a corner is considered aligned with the singular point.
const ALIGNMENT_TOL: f64 = 1e-12;

/// Parameters of the scaled quadratic form and target.
///
/// The box is `[-a, a] × [-b, b]` and the singular point is `(x0, y0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadFormParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub x0: f64,
    pub y0: f64,
}

impl QuadFormParams {
    pub fn new(a: f64, b: f64, c: f64, x0: f64, y0: f64) -> Result<Self> {
        let p = Self { a, b, c, x0, y0 };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.b > 0.0) || !self.a.is_finite() || !self.b.is_finite() {
            return Err(Error::InvalidInput(format!(
                "box half-widths ({}, {}) must be positive",
                self.a, self.b
            )));
        }
        if !(self.c.abs() < 1.0 - DEGENERACY_MARGIN) {
            return Err(Error::DegenerateForm { c: self.c });
        }
        if !(self.x0.is_finite() && self.y0.is_finite()) {
            return Err(Error::InvalidInput("singular point must be finite".into()));
        }
        Ok(())
    }

    /// `β_k = 1 / ((1 − c²)(2k − 1))`.
    pub fn beta(&self, k: usize) -> f64 {
        1.0 / ((1.0 - self.c * self.c) * (2.0 * k as f64 - 1.0))
    }

    /// `d_c(x, y)`.
    pub fn form(&self, x: f64, y: f64) -> f64 {
        x * x + 2.0 * self.c * x * y + y * y
    }
}

/// Dense row-major table of `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Table {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        assert!(r < self.rows && c < self.cols, "({r}, {c}) outside {}x{}", self.rows, self.cols);
        self.values[r * self.cols + c]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn from_dd(rows: usize, cols: usize, values: &[Dd]) -> Self {
        Self {
            rows,
            cols,
            values: values.iter().copied().map(dd::to_f64).collect(),
        }
    }
}

/// Definite box moments `I_mn` for one `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable {
    pub k: usize,
    table: Table,
}

impl MomentTable {
    pub fn m_max(&self) -> usize {
        self.table.rows - 1
    }

    pub fn n_max(&self) -> usize {
        self.table.cols - 1
    }

    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.table.get(m, n)
    }

    pub fn values(&self) -> &[f64] {
        self.table.values()
    }
}

fn powers(x: f64, max: usize) -> Vec<Dd> {
    let mut out = Vec::with_capacity(max + 1);
    let mut acc = Dd::from(1.0);
    for _ in 0..=max {
        out.push(acc);
        acc = acc * x;
    }
    out
}

/// One-axis table `F_mk` (0 ≤ m ≤ m_max, 0 ≤ k ≤ k_max), stored `[m * (k_max + 1) + k]`.
///
/// `x` is the corner coordinate along the integrated axis, `x0` the target
/// coordinate on it, and `(dx, dy) = (x − x0, y − y0)`, formed exactly. Swapping the roles of
/// the two axes yields `G`.
fn axis_table(m_max: usize, k_max: usize, x: f64, x0: f64, dxd: Dd, dyd: Dd, c: f64) -> Vec<Dd> {
    let kw = k_max + 1;
    let mut f = vec![Dd::from(0.0); (m_max + 1) * kw];
    let cd = Dd::from(c);
    let d = dxd * dxd + cd * dxd * dyd * 2.0 + dyd * dyd;
    let sd = d.sqrt();
    let u = dxd + cd * dyd;
    let one_minus_c2 = Dd::from(1.0) - cd * cd;

    // sd + u vanishes along dy = 0, dx < 0; use (sd + u)(sd − u) = (1 − c²) dy².
    f[0] = if u.hi() >= 0.0 {
        dd::ln(sd + u)
    } else {
        dd::ln(dd::div(one_minus_c2 * dyd * dyd, sd - u))
    };
    // d^{k−1/2} for k = 1..k_max.
    let mut d_pow = sd;
    let inv_dy2 = dd::recip(dyd * dyd);
    for k in 1..=k_max {
        let beta = dd::recip(one_minus_c2 * (2.0 * k as f64 - 1.0));
        f[k] = beta * inv_dy2 * (dd::div(u, d_pow) + f[k - 1] * (2.0 * (k as f64 - 1.0)));
        d_pow = d_pow * d;
    }

    let xp = powers(x, m_max);
    let shift = Dd::from(x0) - cd * dyd;
    let x0d = Dd::from(x0);
    // d_c(−x0, y − y0): the form evaluated at x = 0.
    let d_origin = x0d * x0d - cd * x0d * dyd * 2.0 + dyd * dyd;
    for m in 1..=m_max {
        let mf = m as f64;
        let mut v = xp[m - 1] * sd + f[(m - 1) * kw] * shift * (2.0 * mf - 1.0);
        if m >= 2 {
            v -= d_origin * f[(m - 2) * kw] * (mf - 1.0);
        }
        f[m * kw] = v / mf;

        let mut d_pow = sd;
        for k in 1..=k_max {
            let mut inner = -dd::div(xp[m - 1], d_pow);
            if m >= 2 {
                inner += f[(m - 2) * kw + k - 1] * (mf - 1.0);
            }
            f[m * kw + k] = inner / (2.0 * k as f64 - 1.0) + shift * f[(m - 1) * kw + k];
            d_pow = d_pow * d;
        }
    }
    f
}

/// Which recursion fills `C_mnk` on the diagonal `m + n + 1 = 2k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DiagonalBranch {
    /// Recurse in `m` whenever `m ≥ 1`.
    AlongX,
    /// Recurse in `n` whenever `n ≥ 1`.
    AlongY,
}

/// All antiderivative tables at one corner.
struct CornerTables {
    m_max: usize,
    n_max: usize,
    k_max: usize,
    f: Vec<Dd>,
    g: Vec<Dd>,
    /// `c[k]` holds `C_mnk` at `[m * (n_max + 1) + n]`.
    c: Vec<Vec<Dd>>,
}

impl CornerTables {
    fn f(&self, m: usize, k: usize) -> Dd {
        self.f[m * (self.k_max + 1) + k]
    }

    fn g(&self, n: usize, k: usize) -> Dd {
        self.g[n * (self.k_max + 1) + k]
    }
}

/// `(x − x0, y − y0)` without rounding. Rounding them to double would make
/// them inconsistent with `x` and `x0`, and the recursions amplify that.
fn offsets(p: &QuadFormParams, x: f64, y: f64) -> (Dd, Dd) {
    (Dd::new_sub(x, p.x0), Dd::new_sub(y, p.y0))
}

fn check_corner(p: &QuadFormParams, x: f64, y: f64) -> Result<()> {
    let dx = x - p.x0;
    let dy = y - p.y0;
    if p.form(dx, dy).abs() < 1e-300
        || dx.abs() <= ALIGNMENT_TOL * p.a
        || dy.abs() <= ALIGNMENT_TOL * p.b
    {
        return Err(Error::CornerHit { x, y });
    }
    Ok(())
}

/// Builds `F`, `G` and `C_mnk` at corner `(x, y)`.
///
/// Levels `k ≥ full_from` are filled for every `(m, n)`; lower levels only for
/// `m + n ≤ 2k − 1`, which is all that the `m + n + 1 = 2k` branch of the next
/// level reads.
#[allow(clippy::too_many_arguments)]
fn corner_tables(
    p: &QuadFormParams,
    x: f64,
    y: f64,
    m_max: usize,
    n_max: usize,
    k_max: usize,
    full_from: usize,
    branch: DiagonalBranch,
) -> Result<CornerTables> {
    check_corner(p, x, y)?;
    let (dxd, dyd) = offsets(p, x, y);
    let axis_max = m_max.max(n_max);
    let f = axis_table(axis_max, k_max, x, p.x0, dxd, dyd, p.c);
    let g = axis_table(axis_max, k_max, y, p.y0, dyd, dxd, p.c);
    let mut tables = CornerTables {
        m_max: axis_max,
        n_max,
        k_max,
        f,
        g,
        c: Vec::with_capacity(k_max + 1),
    };
    let xp = powers(x, axis_max);
    let yp = powers(y, axis_max);
    let (x0, y0) = (Dd::from(p.x0), Dd::from(p.y0));
    let cd = Dd::from(p.c);
    let nw = n_max + 1;
    let zero = Dd::from(0.0);

    for k in 0..=k_max {
        let limit = if k >= full_from { m_max + n_max } else { (2 * k).saturating_sub(1) };
        if k < full_from && k == 0 {
            tables.c.push(Vec::new());
            continue;
        }
        let beta = if k >= 1 {
            dd::recip((Dd::from(1.0) - cd * cd) * (2.0 * k as f64 - 1.0))
        } else {
            zero
        };
        let mut level = vec![zero; (m_max + 1) * nw];
        for sum in 0..=limit {
            for m in 0..=sum.min(m_max) {
                let n = sum - m;
                if n > n_max {
                    continue;
                }
                let value = if m + n + 1 != 2 * k {
                    let mut v = dxd * xp[m] * tables.g(n, k) + dyd * yp[n] * tables.f(m, k);
                    if m > 0 {
                        v += x0 * level[(m - 1) * nw + n] * m as f64;
                    }
                    if n > 0 {
                        v += y0 * level[m * nw + n - 1] * n as f64;
                    }
                    v / (m as f64 + n as f64 + 1.0 - 2.0 * k as f64)
                } else {
                    let lower = &tables.c[k - 1];
                    let along_x = match branch {
                        DiagonalBranch::AlongX => m >= 1,
                        DiagonalBranch::AlongY => n == 0,
                    };
                    if along_x {
                        let mut t = -(xp[m - 1] * tables.g(n, k - 1)) + cd * yp[n] * tables.f(m - 1, k - 1);
                        if m >= 2 {
                            t += lower[(m - 2) * nw + n] * (m as f64 - 1.0);
                        }
                        if n >= 1 {
                            t -= cd * lower[(m - 1) * nw + n - 1] * n as f64;
                        }
                        x0 * level[(m - 1) * nw + n] + beta * t
                    } else {
                        let mut t = -(yp[n - 1] * tables.f(m, k - 1)) + cd * xp[m] * tables.g(n - 1, k - 1);
                        if n >= 2 {
                            t += lower[m * nw + n - 2] * (n as f64 - 1.0);
                        }
                        if m >= 1 {
                            t -= cd * lower[(m - 1) * nw + n - 1] * m as f64;
                        }
                        y0 * level[m * nw + n - 1] + beta * t
                    }
                };
                level[m * nw + n] = value;
            }
        }
        tables.c.push(level);
    }
    tables.m_max = m_max;
    Ok(tables)
}

/// `F_mk` at corner `(x, y)` for `0 ≤ m ≤ m_max`, `0 ≤ k ≤ k_max`.
pub fn f_table(m_max: usize, k_max: usize, x: f64, y: f64, p: &QuadFormParams) -> Result<Table> {
    p.validate()?;
    check_corner(p, x, y)?;
    let (dx, dy) = offsets(p, x, y);
    let f = axis_table(m_max, k_max, x, p.x0, dx, dy, p.c);
    Ok(Table::from_dd(m_max + 1, k_max + 1, &f))
}

/// `G_nk` at corner `(x, y)`; the mirror of [`f_table`] with the axes exchanged.
pub fn g_table(n_max: usize, k_max: usize, x: f64, y: f64, p: &QuadFormParams) -> Result<Table> {
    p.validate()?;
    check_corner(p, x, y)?;
    let (dx, dy) = offsets(p, x, y);
    let g = axis_table(n_max, k_max, y, p.y0, dy, dx, p.c);
    Ok(Table::from_dd(n_max + 1, k_max + 1, &g))
}

/// `C_mnk` at corner `(x, y)` for a fixed `k ≥ 0`.
pub fn c_table(m_max: usize, n_max: usize, k: usize, x: f64, y: f64, p: &QuadFormParams) -> Result<Table> {
    p.validate()?;
    let t = corner_tables(p, x, y, m_max, n_max, k, k, DiagonalBranch::AlongX)?;
    Ok(Table::from_dd(m_max + 1, n_max + 1, &t.c[k]))
}

/// [`c_table`] with the diagonal entries `m + n + 1 = 2k` produced by the
/// `n`-recursion wherever `n ≥ 1`. Both must agree; used for cross-checking.
pub fn c_table_alternate(
    m_max: usize,
    n_max: usize,
    k: usize,
    x: f64,
    y: f64,
    p: &QuadFormParams,
) -> Result<Table> {
    p.validate()?;
    let t = corner_tables(p, x, y, m_max, n_max, k, k, DiagonalBranch::AlongY)?;
    Ok(Table::from_dd(m_max + 1, n_max + 1, &t.c[k]))
}

/// Box moments `I_mn` for every `k` in `k_min..=k_max`, sharing the corner recursions.
pub fn box_moments_range(
    p: &QuadFormParams,
    m_max: usize,
    n_max: usize,
    k_min: usize,
    k_max: usize,
) -> Result<Vec<MomentTable>> {
    p.validate()?;
    if k_min == 0 || k_min > k_max {
        return Err(Error::InvalidInput(format!("moment levels {k_min}..={k_max} must start at 1")));
    }
    let nw = n_max + 1;
    let mut sums: Vec<Vec<Dd>> = vec![vec![Dd::from(0.0); (m_max + 1) * nw]; k_max - k_min + 1];
    for (x, sx) in [(p.a, 1.0), (-p.a, -1.0)] {
        for (y, sy) in [(p.b, 1.0), (-p.b, -1.0)] {
            let corner = corner_tables(p, x, y, m_max, n_max, k_max, k_min, DiagonalBranch::AlongX)?;
            let sign = sx * sy;
            for (level, acc) in corner.c[k_min..].iter().zip(sums.iter_mut()) {
                for (a, v) in acc.iter_mut().zip(level) {
                    *a += *v * sign;
                }
            }
            debug_assert_eq!(corner.n_max, n_max);
        }
    }
    Ok(sums
        .iter()
        .enumerate()
        .map(|(i, s)| MomentTable {
            k: k_min + i,
            table: Table::from_dd(m_max + 1, nw, s),
        })
        .collect())
}

/// `I_mn = ∬_{[-a,a]×[-b,b]} xᵐ yⁿ / |d_c(x − x0, y − y0)|^{k+1/2}` (finite part when the target is inside).
pub fn box_moments(p: &QuadFormParams, m_max: usize, n_max: usize, k: usize) -> Result<MomentTable> {
    Ok(box_moments_range(p, m_max, n_max, k, k)?.remove(0))
}
