//! Full (unrestarted) GMRES with modified Gram–Schmidt Arnoldi.

use crate::error::{Error, Result};

/// Default relative residual target.
pub const DEFAULT_TOL: f64 = 1e-13;
/// Default iteration cap.
pub const DEFAULT_MAXITER: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Relative residual `‖b − Ax_k‖/‖b‖` after each iteration, as tracked by the
    /// Givens-rotated least-squares problem.
    pub residual_history: Vec<f64>,
    pub converged: bool,
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Solves `A x = rhs` from a zero initial guess, stopping when the relative
/// residual reaches `tol` or after `maxiter` iterations.
pub fn gmres(apply: impl Fn(&[f64]) -> Vec<f64>, rhs: &[f64], tol: f64, maxiter: usize) -> Result<(Vec<f64>, SolveReport)> {
    let n = rhs.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty right-hand side".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    let beta = norm(rhs);
    let mut report = SolveReport {
        iterations: 0,
        residual_history: Vec::new(),
        converged: false,
    };
    if beta == 0.0 {
        report.converged = true;
        return Ok((vec![0.0; n], report));
    }

    let mut basis: Vec<Vec<f64>> = vec![rhs.iter().map(|v| v / beta).collect()];
    // Columns of the rotated Hessenberg matrix, i.e. the triangular factor R.
    let mut r_cols: Vec<Vec<f64>> = Vec::new();
    let mut cs: Vec<f64> = Vec::new();
    let mut sn: Vec<f64> = Vec::new();
    let mut g = vec![beta];

    for j in 0..maxiter.min(n) {
        let mut w = apply(&basis[j]);
        let mut h = vec![0.0; j + 2];
        for (i, v) in basis.iter().enumerate() {
            h[i] = dot(&w, v);
            for (wk, vk) in w.iter_mut().zip(v) {
                *wk -= h[i] * vk;
            }
        }
        h[j + 1] = norm(&w);

        for i in 0..j {
            let t = cs[i] * h[i] + sn[i] * h[i + 1];
            h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
            h[i] = t;
        }
        let denom = h[j].hypot(h[j + 1]);
        if denom == 0.0 {
            return Err(Error::Breakdown { iteration: j + 1 });
        }
        let (c, s) = (h[j] / denom, h[j + 1] / denom);
        let sub = h[j + 1];
        h[j] = denom;
        h[j + 1] = 0.0;
        cs.push(c);
        sn.push(s);
        g.push(-s * g[j]);
        g[j] *= c;
        h.truncate(j + 1);
        r_cols.push(h);

        let residual = g[j + 1].abs() / beta;
        report.iterations = j + 1;
        report.residual_history.push(residual);
        // A vanishing Arnoldi vector means the Krylov space is invariant: the
        // least-squares solution is exact.
        let lucky = sub <= f64::EPSILON * denom;
        if residual <= tol || lucky {
            report.converged = true;
            break;
        }
        basis.push(w.iter().map(|v| v / sub).collect());
    }

    // Back substitution R y = g.
    let k = r_cols.len();
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut acc = g[i];
        for (l, yl) in y.iter().enumerate().take(k).skip(i + 1) {
            acc -= r_cols[l][i] * yl;
        }
        y[i] = acc / r_cols[i][i];
    }
    let mut x = vec![0.0; n];
    for (yi, v) in y.iter().zip(&basis) {
        for (xk, vk) in x.iter_mut().zip(v) {
            *xk += yi * vk;
        }
    }
    Ok((x, report))
}
