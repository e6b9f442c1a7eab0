//! Independent reference integrators used by the validation suite.
//!
//! Nothing here is used by the solver itself. The routines are deliberately
//! brute force: adaptive Gauss–Kronrod on intervals, nested for rectangles,
//! and a Duffy transform for integrands with a `1/r` point singularity.

use std::collections::BinaryHeap;

use crate::fpintegrals::QuadFormParams;

/// Kronrod abscissae on [0, 1), largest first; the Gauss nodes are the odd entries.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Stopping rule for the vector integrator: component `i` is converged when its
/// error estimate is below `rel_tol · |I_{scale[i]}|` or `abs_tol`.
#[derive(Debug, Clone)]
pub struct Tolerance {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Component whose magnitude sets the scale of each component; `None` means itself.
    pub scale: Option<Vec<usize>>,
    pub max_segments: usize,
}

impl Tolerance {
    pub fn relative(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol: 0.0,
            scale: None,
            max_segments: 2000,
        }
    }
}

/// Value and error estimate of an adaptive integral.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub value: Vec<f64>,
    pub error: Vec<f64>,
    pub converged: bool,
}

struct Segment {
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: Vec<f64>,
    priority: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.priority == other.priority
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.priority.total_cmp(&other.priority)
    }
}

fn gk15<F: FnMut(f64, &mut [f64])>(f: &mut F, a: f64, b: f64, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut kron = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];
    let mut buf = vec![0.0; dim];
    f(mid, &mut buf);
    for i in 0..dim {
        kron[i] = WGK[7] * buf[i];
        gauss[i] = WG[3] * buf[i];
    }
    for j in 0..7 {
        let dx = half * XGK[j];
        for x in [mid - dx, mid + dx] {
            f(x, &mut buf);
            for i in 0..dim {
                kron[i] += WGK[j] * buf[i];
                if j % 2 == 1 {
                    gauss[i] += WG[j / 2] * buf[i];
                }
            }
        }
    }
    let value: Vec<f64> = kron.iter().map(|v| v * half).collect();
    let error = kron.iter().zip(&gauss).map(|(k, g)| ((k - g) * half).abs()).collect();
    (value, error)
}

/// Adaptive G7K15 integration of a vector-valued function over `[a, b]`,
/// optionally pre-split at interior `breaks`.
pub fn integrate_vec<F: FnMut(f64, &mut [f64])>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    dim: usize,
    tol: &Tolerance,
) -> Estimate {
    let mut points = vec![a];
    points.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    points.push(b);
    points.sort_by(f64::total_cmp);

    let threshold = |total: &[f64], i: usize| {
        let s = tol.scale.as_ref().map_or(i, |s| s[i]);
        (tol.rel_tol * total[s].abs()).max(tol.abs_tol)
    };
    let mut heap = BinaryHeap::new();
    let mut total = vec![0.0; dim];
    let mut err = vec![0.0; dim];
    let mut pending: Vec<(f64, f64, Vec<f64>, Vec<f64>)> = points
        .windows(2)
        .map(|w| {
            let (v, e) = gk15(&mut f, w[0], w[1], dim);
            (w[0], w[1], v, e)
        })
        .collect();
    let mut segments = pending.len();
    loop {
        for (_, _, v, e) in &pending {
            for i in 0..dim {
                total[i] += v[i];
                err[i] += e[i];
            }
        }
        for (sa, sb, v, e) in pending.drain(..) {
            let priority = (0..dim)
                .map(|i| e[i] / threshold(&total, i).max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max);
            heap.push(Segment { a: sa, b: sb, value: v, error: e, priority });
        }
        let converged = (0..dim).all(|i| err[i] <= threshold(&total, i));
        if converged || segments >= tol.max_segments {
            // Re-sum to shed accumulated cancellation from the running totals.
            let mut value = vec![0.0; dim];
            let mut error = vec![0.0; dim];
            for s in heap.iter() {
                for i in 0..dim {
                    value[i] += s.value[i];
                    error[i] += s.error[i];
                }
            }
            return Estimate { value, error, converged };
        }
        let worst = heap.pop().expect("at least one segment");
        for i in 0..dim {
            total[i] -= worst.value[i];
            err[i] -= worst.error[i];
        }
        let mid = 0.5 * (worst.a + worst.b);
        for (sa, sb) in [(worst.a, mid), (mid, worst.b)] {
            let (v, e) = gk15(&mut f, sa, sb, dim);
            pending.push((sa, sb, v, e));
        }
        segments += 1;
        // Priorities are stale once the totals move; rebuild occasionally.
        if segments % 64 == 0 {
            let items: Vec<Segment> = heap.drain().collect();
            for mut s in items {
                s.priority = (0..dim)
                    .map(|i| s.error[i] / threshold(&total, i).max(f64::MIN_POSITIVE))
                    .fold(0.0, f64::max);
                heap.push(s);
            }
        }
    }
}

/// Scalar adaptive integral over `[a, b]` to relative tolerance `rel_tol`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64], rel_tol: f64) -> f64 {
    let tol = Tolerance::relative(rel_tol);
    integrate_vec(|x, out| out[0] = f(x), a, b, breaks, 1, &tol).value[0]
}

/// Nested adaptive integral over `[ax, bx] × [ay, by]` of a vector-valued function.
pub fn integrate_rect_vec<F: Fn(f64, f64, &mut [f64])>(
    f: F,
    x_range: (f64, f64, &[f64]),
    y_range: (f64, f64, &[f64]),
    dim: usize,
    tol: &Tolerance,
) -> Estimate {
    let inner_tol = Tolerance {
        rel_tol: tol.rel_tol * 0.1,
        abs_tol: tol.abs_tol * 0.1,
        ..tol.clone()
    };
    let mut all_converged = true;
    let mut est = integrate_vec(
        |x, out| {
            let inner = integrate_vec(|y, o| f(x, y, o), y_range.0, y_range.1, y_range.2, dim, &inner_tol);
            all_converged &= inner.converged;
            out.copy_from_slice(&inner.value);
        },
        x_range.0,
        x_range.1,
        x_range.2,
        dim,
        tol,
    );
    est.converged &= all_converged;
    est
}

/// Scalar nested adaptive integral over a rectangle.
pub fn integrate_rect(f: impl Fn(f64, f64) -> f64, x: (f64, f64), y: (f64, f64), rel_tol: f64) -> f64 {
    integrate_rect_l1(f, (x.0, x.1, &[]), (y.0, y.1, &[]), rel_tol)
}

/// Scalar nested adaptive integral whose tolerance is `rel_tol` times `∬|f|`.
///
/// A cheap first pass estimates `∬|f|`; the accurate pass then uses it as an
/// absolute scale, so sign-changing integrands whose inner integrals nearly
/// cancel do not force endless subdivision.
pub fn integrate_rect_l1(
    f: impl Fn(f64, f64) -> f64,
    x: (f64, f64, &[f64]),
    y: (f64, f64, &[f64]),
    rel_tol: f64,
) -> f64 {
    let rough = integrate_rect_vec(|a, b, o| o[0] = f(a, b).abs(), x, y, 1, &Tolerance::relative(1e-3));
    let tol = Tolerance {
        abs_tol: rel_tol * rough.value[0],
        ..Tolerance::relative(rel_tol)
    };
    integrate_rect_vec(|a, b, o| o[0] = f(a, b), x, y, 1, &tol).value[0]
}

/// Integral over `[-1, 1]²` of a function with a `1/r` singularity at `s`
/// (inside or on the square): the square is cut into triangles with a vertex
/// at `s`, each mapped by a Duffy transform that cancels the singularity.
pub fn integrate_square_singular(f: impl Fn(f64, f64) -> f64, s: [f64; 2], rel_tol: f64) -> f64 {
    let corners = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
    let mut total = 0.0;
    for e in 0..4 {
        let p1 = corners[e];
        let p2 = corners[(e + 1) % 4];
        let e1 = [p1[0] - s[0], p1[1] - s[1]];
        let e2 = [p2[0] - p1[0], p2[1] - p1[1]];
        let det = (e1[0] * e2[1] - e1[1] * e2[0]).abs();
        if det < 1e-300 {
            continue;
        }
        total += integrate_rect(
            |u, v| {
                let x = s[0] + u * (e1[0] + v * e2[0]);
                let y = s[1] + u * (e1[1] + v * e2[1]);
                u * det * f(x, y)
            },
            (0.0, 1.0),
            (0.0, 1.0),
            rel_tol,
        );
    }
    total
}

/// Brute-force box moments for every `k` in `ks`, `m ≤ m_max`, `n ≤ n_max`.
///
/// Returns `(moments, l1)` with `moments[ki][(m, n)]` flattened as
/// `m * (n_max + 1) + n`, and `l1` the matching integrals of `|xᵐ yⁿ| / d^{k+1/2}`.
/// Intended for singular points outside the box.
pub fn exterior_box_moments(
    p: &QuadFormParams,
    m_max: usize,
    n_max: usize,
    ks: &[usize],
    rel_tol: f64,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let per_k = (m_max + 1) * (n_max + 1);
    let dim = 2 * per_k * ks.len();
    // Signed entries are judged against their absolute counterparts.
    let scale: Vec<usize> = (0..dim)
        .map(|i| {
            let (block, j) = (i / (2 * per_k), i % (2 * per_k));
            block * 2 * per_k + per_k + j % per_k
        })
        .collect();
    let tol = Tolerance {
        rel_tol,
        abs_tol: 0.0,
        scale: Some(scale),
        max_segments: 400,
    };
    let est = integrate_rect_vec(
        |x, y, out| {
            let dx = x - p.x0;
            let dy = y - p.y0;
            let d = p.form(dx, dy);
            let mut xp = [0.0; 32];
            let mut yp = [0.0; 32];
            xp[0] = 1.0;
            yp[0] = 1.0;
            for i in 1..=m_max {
                xp[i] = xp[i - 1] * x;
            }
            for i in 1..=n_max {
                yp[i] = yp[i - 1] * y;
            }
            for (b, &k) in ks.iter().enumerate() {
                let w = 1.0 / (d.powi(k as i32) * d.sqrt());
                let base = b * 2 * per_k;
                for m in 0..=m_max {
                    for n in 0..=n_max {
                        let v = xp[m] * yp[n] * w;
                        let j = m * (n_max + 1) + n;
                        out[base + j] = v;
                        out[base + per_k + j] = v.abs();
                    }
                }
            }
        },
        (-p.a, p.a, &[]),
        (-p.b, p.b, &[]),
        dim,
        &tol,
    );
    let mut signed = Vec::new();
    let mut l1 = Vec::new();
    for b in 0..ks.len() {
        let base = b * 2 * per_k;
        signed.push(est.value[base..base + per_k].to_vec());
        l1.push(est.value[base + per_k..base + 2 * per_k].to_vec());
    }
    (signed, l1)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Finite part of `∬ xᵐ yⁿ / (X² + Y²)^{3/2}` over `[-a, a] × [-b, b]` with
/// `X = x − x0`, `Y = y − y0` and `(x0, y0)` inside the box; `c = 0`, `k = 1`, `m ≤ 2`.
///
/// The inner `x` integral is done in closed form. Its `2x0ᵐ/Y²` blow-up, times
/// the Taylor terms of `yⁿ` up to first order, is removed analytically and
/// restored through the one-dimensional finite parts of `1/Y²` and `1/Y`; the
/// bounded remainder is integrated adaptively.
pub fn finite_part_moment_circular(a: f64, b: f64, x0: f64, y0: f64, m: usize, n: usize) -> f64 {
    assert!(m <= 2, "closed-form inner integral is implemented for m ≤ 2");
    assert!(x0.abs() < a && y0.abs() < b);
    let x1 = a - x0; // upper X, positive
    let x2 = a + x0; // |lower X|
    let lead = 2.0 * x0.powi(m as i32);
    let regular = |y: f64| {
        let yy = y - y0;
        let y2 = yy * yy;
        let r1 = (x1 * x1 + y2).sqrt();
        let r2 = (x2 * x2 + y2).sqrt();
        // ∫ dX / R³ minus its 2/Y² singular part.
        let s0 = -1.0 / (r1 * (r1 + x1)) - 1.0 / (r2 * (r2 + x2));
        let mut inner = x0.powi(m as i32) * s0;
        if m >= 1 {
            // ∫ X dX / R³ = −1/R
            inner += m as f64 * x0.powi(m as i32 - 1) * (1.0 / r2 - 1.0 / r1);
        }
        if m >= 2 {
            // ∫ X² dX / R³ = ln(X + R) − X/R, with ln(R − |X|) = ln(Y² / (R + |X|)).
            let logs = (x1 + r1).ln() - (y2 / (r2 + x2)).ln();
            inner += binomial(m, 2) * x0.powi(m as i32 - 2) * (logs - (x1 / r1 + x2 / r2));
        }
        let mut poly = 0.0;
        for i in 2..=n {
            poly += binomial(n, i) * y0.powi((n - i) as i32) * yy.powi(i as i32 - 2);
        }
        y.powi(n as i32) * inner + lead * poly
    };
    let body = integrate(regular, -b, b, &[y0], 1e-14);
    let coeff_2 = lead * y0.powi(n as i32);
    let coeff_1 = if n >= 1 { lead * n as f64 * y0.powi(n as i32 - 1) } else { 0.0 };
    let fp_inv_sq = -1.0 / (b - y0) - 1.0 / (b + y0);
    let fp_inv = ((b - y0) / (b + y0)).ln();
    body + coeff_2 * fp_inv_sq + coeff_1 * fp_inv
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn one_dimensional_references() {
        assert_relative_eq!(integrate(f64::exp, 0.0, 1.0, &[], 1e-14), 1f64.exp() - 1.0, max_relative = 1e-14);
        let v = integrate(|x| x.abs().sqrt(), -1.0, 1.0, &[0.0], 1e-12);
        assert_relative_eq!(v, 4.0 / 3.0, max_relative = 1e-11);
    }

    #[test]
    fn rectangle_reference() {
        let v = integrate_rect(|x, y| (x * y).cos(), (0.0, 1.0), (0.0, 2.0), 1e-13);
        // ∫₀¹ sin(2x)/x dx = Si(2)
        assert_relative_eq!(v, 1.605_412_976_802_694_8, max_relative = 1e-12);
    }

    #[test]
    fn duffy_handles_inverse_distance() {
        // ∬_{[-1,1]²} dA / r about the centre = 8 asinh(1).
        let v = integrate_square_singular(|x, y| 1.0 / x.hypot(y), [0.0, 0.0], 1e-12);
        assert_relative_eq!(v, 8.0 * 1f64.asinh(), max_relative = 1e-11);
        // Off-centre: sum over the four sub-rectangles of the corner formula.
        let s = [0.3, -0.55];
        let corner = |w: f64, h: f64| w * (h / w).asinh() + h * (w / h).asinh();
        let expect = corner(1.3, 0.45) + corner(0.7, 0.45) + corner(1.3, 1.55) + corner(0.7, 1.55);
        let v = integrate_square_singular(|x, y| 1.0 / (x - s[0]).hypot(y - s[1]), s, 1e-12);
        assert_relative_eq!(v, expect, max_relative = 1e-11);
    }
}
