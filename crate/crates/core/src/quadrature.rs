//! Gauss–Legendre rules and the per-patch tensor grids built on them.
//!
//! Grid values are stored row-major over the first local coordinate:
//! entry `a * n + b` belongs to node `(x_a, x_b)`.

use std::sync::OnceLock;

use nalgebra::{DMatrix, SMatrix};
use twofloat::TwoFloat;

use crate::dd;
use crate::error::{Error, Result};

/// Solution-grid order per axis.
pub const COARSE_ORDER: usize = 10;
/// Integration-grid order per axis.
pub const FINE_ORDER: usize = 16;
pub const COARSE_NODES: usize = COARSE_ORDER * COARSE_ORDER;
pub const FINE_NODES: usize = FINE_ORDER * FINE_ORDER;

pub type InterpMatrix = SMatrix<f64, FINE_ORDER, COARSE_ORDER>;
pub type FineMatrix = SMatrix<f64, FINE_ORDER, FINE_ORDER>;

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GlRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Strictly increasing.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Σ w_i f(x_i)` over `[-1, 1]`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Tensor-product weights in grid storage order.
    pub fn tensor_weights(&self) -> Vec<f64> {
        self.weights
            .iter()
            .flat_map(|&wa| self.weights.iter().map(move |&wb| wa * wb))
            .collect()
    }

    /// Tensor-product nodes in grid storage order.
    pub fn tensor_nodes(&self) -> Vec<[f64; 2]> {
        self.nodes
            .iter()
            .flat_map(|&xa| self.nodes.iter().map(move |&xb| [xa, xb]))
            .collect()
    }
}

/// `(P_n(x), P'_n(x))` by the three-term recurrence. Not valid at `x = ±1`.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// `[P_0(x), …, P_{n-1}(x)]`.
pub fn legendre_values(n: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let v = match k {
            0 => 1.0,
            1 => x,
            _ => {
                let kf = k as f64;
                ((2.0 * kf - 1.0) * x * out[k - 1] - (kf - 1.0) * out[k - 2]) / kf
            }
        };
        out.push(v);
    }
    out
}

/// `n`-point Gauss–Legendre rule by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> Result<GlRule> {
    if n == 0 {
        return Err(Error::InvalidInput("Gauss-Legendre order must be at least 1".into()));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        // Largest root first.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut converged = false;
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NodeIteration { order: n, index: i });
        }
        if 2 * i + 1 == n {
            x = 0.0;
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    Ok(GlRule { nodes, weights })
}

/// Maps values at the 10 Gauss–Legendre nodes to the degree-9 interpolant at the 16 nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpOperator {
    matrix: InterpMatrix,
}

impl InterpOperator {
    pub fn matrix(&self) -> &InterpMatrix {
        &self.matrix
    }

    pub fn apply(&self, coarse: &[f64]) -> Vec<f64> {
        assert_eq!(coarse.len(), COARSE_ORDER);
        (0..FINE_ORDER)
            .map(|p| (0..COARSE_ORDER).map(|q| self.matrix[(p, q)] * coarse[q]).sum())
            .collect()
    }
}

/// Builds `V16 · V10⁻¹` with both Vandermonde matrices in the Legendre basis.
pub fn build_interp(src: &GlRule, dst: &GlRule) -> Result<InterpOperator> {
    if src.order() != COARSE_ORDER || dst.order() != FINE_ORDER {
        return Err(Error::InvalidInput(format!(
            "interpolation is defined from {COARSE_ORDER} to {FINE_ORDER} nodes, got {} to {}",
            src.order(),
            dst.order()
        )));
    }
    let v_src = DMatrix::from_fn(COARSE_ORDER, COARSE_ORDER, |p, q| {
        legendre_values(COARSE_ORDER, src.nodes[p])[q]
    });
    let v_dst = DMatrix::from_fn(FINE_ORDER, COARSE_ORDER, |p, q| {
        legendre_values(COARSE_ORDER, dst.nodes[p])[q]
    });
    // M V_src = V_dst  ⇔  V_srcᵀ Mᵀ = V_dstᵀ
    let lu = v_src.transpose().lu();
    let mt = lu
        .solve(&v_dst.transpose())
        .ok_or(Error::SingularMatrix { rows: COARSE_ORDER })?;
    Ok(InterpOperator {
        matrix: InterpMatrix::from_fn(|p, q| mt[(q, p)]),
    })
}

/// Monomial coefficients `α_mn` of the bivariate interpolant on the 16×16 grid;
/// `m` is the power of `t1`, `n` the power of `t2`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialCoeffs {
    pub coeffs: FineMatrix,
}

impl MonomialCoeffs {
    pub fn evaluate(&self, t: [f64; 2]) -> f64 {
        // Horner in t2 inside Horner in t1.
        let mut acc = 0.0;
        for m in (0..FINE_ORDER).rev() {
            let mut row = 0.0;
            for n in (0..FINE_ORDER).rev() {
                row = row * t[1] + self.coeffs[(m, n)];
            }
            acc = acc * t[0] + row;
        }
        acc
    }
}

/// Monomial Vandermonde matrix `V[p][m] = x_p^m` at the 16 nodes, inverted once.
///
/// The inverse is built column by column with the Björck–Pereyra interpolation
/// algorithm in double-double arithmetic, then rounded. Gaussian elimination on
/// `V` leaves errors near 1e-10 in the low-order coefficients.
#[derive(Debug, Clone)]
pub struct MonomialBasis {
    inverse: FineMatrix,
}

/// Newton divided differences followed by conversion to monomial form.
fn bjorck_pereyra(nodes: &[f64], rhs: &mut [TwoFloat]) {
    let n = nodes.len();
    for k in 0..n - 1 {
        for i in (k + 1..n).rev() {
            rhs[i] = dd::div(rhs[i] - rhs[i - 1], TwoFloat::new_sub(nodes[i], nodes[i - k - 1]));
        }
    }
    for k in (0..n - 1).rev() {
        for i in k..n - 1 {
            rhs[i] = rhs[i] - rhs[i + 1] * nodes[k];
        }
    }
}

impl MonomialBasis {
    pub fn new(fine: &GlRule) -> Result<Self> {
        if fine.order() != FINE_ORDER {
            return Err(Error::InvalidInput(format!(
                "monomial basis needs the {FINE_ORDER}-point rule"
            )));
        }
        let mut inverse = FineMatrix::zeros();
        for j in 0..FINE_ORDER {
            let mut col = [TwoFloat::from(0.0); FINE_ORDER];
            col[j] = TwoFloat::from(1.0);
            bjorck_pereyra(&fine.nodes, &mut col);
            for (m, v) in col.iter().enumerate() {
                if !v.hi().is_finite() {
                    return Err(Error::SingularMatrix { rows: FINE_ORDER });
                }
                inverse[(m, j)] = v.hi() + v.lo();
            }
        }
        Ok(Self { inverse })
    }

    /// `V⁻¹`.
    pub fn inverse(&self) -> &FineMatrix {
        &self.inverse
    }

    /// Solves along `t1` for every `t2` column, then along `t2`, by applying `V⁻¹`.
    pub fn monomial_coeffs(&self, fine: &[f64]) -> MonomialCoeffs {
        assert_eq!(fine.len(), FINE_NODES);
        // Entries of V⁻¹ reach 1e3 with alternating signs; accumulate in double-double.
        let inv = &self.inverse;
        let mut half = [[TwoFloat::from(0.0); FINE_ORDER]; FINE_ORDER];
        for m in 0..FINE_ORDER {
            for q in 0..FINE_ORDER {
                let mut acc = TwoFloat::from(0.0);
                for p in 0..FINE_ORDER {
                    acc += TwoFloat::new_mul(inv[(m, p)], fine[p * FINE_ORDER + q]);
                }
                half[m][q] = acc;
            }
        }
        let coeffs = FineMatrix::from_fn(|m, n| {
            let mut acc = TwoFloat::from(0.0);
            for q in 0..FINE_ORDER {
                acc += half[m][q] * inv[(n, q)];
            }
            acc.hi() + acc.lo()
        });
        MonomialCoeffs { coeffs }
    }
}

/// The fixed rules and operators shared by every patch.
#[derive(Debug, Clone)]
pub struct TensorRules {
    pub coarse: GlRule,
    pub fine: GlRule,
    pub interp: InterpOperator,
    pub monomial: MonomialBasis,
    coarse_weights: Vec<f64>,
    fine_weights: Vec<f64>,
}

impl TensorRules {
    pub fn new() -> Result<Self> {
        let coarse = gauss_legendre(COARSE_ORDER)?;
        let fine = gauss_legendre(FINE_ORDER)?;
        let interp = build_interp(&coarse, &fine)?;
        let monomial = MonomialBasis::new(&fine)?;
        Ok(Self {
            coarse_weights: coarse.tensor_weights(),
            fine_weights: fine.tensor_weights(),
            coarse,
            fine,
            interp,
            monomial,
        })
    }

    /// Process-wide instance.
    pub fn standard() -> &'static TensorRules {
        static RULES: OnceLock<TensorRules> = OnceLock::new();
        RULES.get_or_init(|| TensorRules::new().expect("standard Gauss-Legendre rules"))
    }

    pub fn coarse_weights(&self) -> &[f64] {
        &self.coarse_weights
    }

    pub fn fine_weights(&self) -> &[f64] {
        &self.fine_weights
    }

    /// Tensor interpolation of one patch's 10×10 values onto its 16×16 grid.
    pub fn interp_to_fine(&self, coarse: &[f64]) -> Vec<f64> {
        assert_eq!(coarse.len(), COARSE_NODES);
        let c = SMatrix::<f64, COARSE_ORDER, COARSE_ORDER>::from_row_slice(coarse);
        let p = &self.interp.matrix;
        let fine = p * c * p.transpose();
        let mut out = Vec::with_capacity(FINE_NODES);
        for a in 0..FINE_ORDER {
            for b in 0..FINE_ORDER {
                out.push(fine[(a, b)]);
            }
        }
        out
    }

    /// Adjoint of [`TensorRules::interp_to_fine`]: pulls fine-grid weights back
    /// to coarse-grid weights, so that `w_fine · interp(μ) = pullback(w_fine) · μ`.
    pub fn pullback(&self, fine_weights: &[f64]) -> [f64; COARSE_NODES] {
        assert_eq!(fine_weights.len(), FINE_NODES);
        let w = FineMatrix::from_row_slice(fine_weights);
        let p = &self.interp.matrix;
        let c = p.transpose() * w * p;
        let mut out = [0.0; COARSE_NODES];
        for a in 0..COARSE_ORDER {
            for b in 0..COARSE_ORDER {
                out[a * COARSE_ORDER + b] = c[(a, b)];
            }
        }
        out
    }

    pub fn monomial_coeffs(&self, fine: &[f64]) -> MonomialCoeffs {
        self.monomial.monomial_coeffs(fine)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn low_order_rules() {
        let r1 = gauss_legendre(1).unwrap();
        assert_eq!(r1.nodes(), &[0.0]);
        assert_abs_diff_eq!(r1.weights()[0], 2.0, epsilon = 1e-15);
        let r2 = gauss_legendre(2).unwrap();
        assert_abs_diff_eq!(r2.nodes()[0], -0.577_350_269_189_625_8, epsilon = 1e-15);
        assert_abs_diff_eq!(r2.nodes()[1], 0.577_350_269_189_625_8, epsilon = 1e-15);
        assert_abs_diff_eq!(r2.weights()[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r2.weights()[1], 1.0, epsilon = 1e-15);
        assert!(gauss_legendre(0).is_err());
    }

    #[test]
    fn rule_invariants() {
        for n in [3, 7, 10, 16, 25, 40] {
            let r = gauss_legendre(n).unwrap();
            assert!(r.nodes().windows(2).all(|w| w[0] < w[1]));
            for i in 0..n {
                assert_abs_diff_eq!(r.nodes()[i], -r.nodes()[n - 1 - i], epsilon = 1e-15);
                assert!(r.weights()[i] > 0.0);
            }
            assert_abs_diff_eq!(r.weights().iter().sum::<f64>(), 2.0, epsilon = 1e-14);
            for d in 0..2 * n {
                let exact = if d % 2 == 1 { 0.0 } else { 2.0 / (d as f64 + 1.0) };
                assert_abs_diff_eq!(r.integrate(|x| x.powi(d as i32)), exact, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn ten_point_rule_integrates_degree_18() {
        let r = gauss_legendre(10).unwrap();
        assert_abs_diff_eq!(r.integrate(|x| x.powi(18)), 2.0 / 19.0, epsilon = 1e-14);
    }

    #[test]
    fn interp_examples() {
        let rules = TensorRules::standard();
        let ones = rules.interp.apply(&[1.0; COARSE_ORDER]);
        assert!(ones.iter().all(|v| (v - 1.0).abs() < 1e-13));
        let src: Vec<f64> = rules.coarse.nodes().iter().map(|x| x.powi(9)).collect();
        let out = rules.interp.apply(&src);
        for (v, x) in out.iter().zip(rules.fine.nodes()) {
            assert!((v - x.powi(9)).abs() < 1e-11);
        }
        let src: Vec<f64> = rules.coarse.nodes().iter().map(|x| x.sin()).collect();
        let out = rules.interp.apply(&src);
        for (v, x) in out.iter().zip(rules.fine.nodes()) {
            assert!((v - x.sin()).abs() < 1e-10);
        }
    }

    #[test]
    fn tensor_interp_examples() {
        let rules = TensorRules::standard();
        let sample = |f: &dyn Fn(f64, f64) -> f64, nodes: &[[f64; 2]]| -> Vec<f64> {
            nodes.iter().map(|t| f(t[0], t[1])).collect()
        };
        let cn = rules.coarse.tensor_nodes();
        let fnodes = rules.fine.tensor_nodes();
        let konst = rules.interp_to_fine(&[2.5; COARSE_NODES]);
        assert!(konst.iter().all(|v| (v - 2.5).abs() < 1e-13));

        let poly = |a: f64, b: f64| a.powi(3) * b * b;
        let out = rules.interp_to_fine(&sample(&poly, &cn));
        for (v, e) in out.iter().zip(sample(&poly, &fnodes)) {
            assert!((v - e).abs() < 1e-11);
        }
        let smooth = |a: f64, b: f64| (a + b).exp() / 4.0;
        let out = rules.interp_to_fine(&sample(&smooth, &cn));
        // Degree-9 interpolation of this function is itself off by 1.14e-9 at the
        // worst fine node, so that is the floor here.
        for (v, e) in out.iter().zip(sample(&smooth, &fnodes)) {
            assert!((v - e).abs() < 1.2e-9);
        }
    }

    #[test]
    fn fine_integration_of_interpolant_matches_coarse_rule() {
        let rules = TensorRules::standard();
        let f = |a: f64, b: f64| 1.0 + a.powi(9) * b.powi(4) - 0.5 * a.powi(2) * b.powi(9);
        let coarse: Vec<f64> = rules.coarse.tensor_nodes().iter().map(|t| f(t[0], t[1])).collect();
        let fine = rules.interp_to_fine(&coarse);
        let i10: f64 = coarse.iter().zip(rules.coarse_weights()).map(|(v, w)| v * w).sum();
        let i16: f64 = fine.iter().zip(rules.fine_weights()).map(|(v, w)| v * w).sum();
        assert_abs_diff_eq!(i10, i16, epsilon = 1e-12);
        // Adjoint identity.
        let pulled = rules.pullback(rules.fine_weights());
        let via_pullback: f64 = coarse.iter().zip(pulled.iter()).map(|(v, w)| v * w).sum();
        assert_abs_diff_eq!(via_pullback, i16, epsilon = 1e-13);
    }

    #[test]
    fn monomial_coeffs_examples() {
        let rules = TensorRules::standard();
        let fnodes = rules.fine.tensor_nodes();
        let ones = rules.monomial_coeffs(&[1.0; FINE_NODES]);
        for m in 0..FINE_ORDER {
            for n in 0..FINE_ORDER {
                let expect = if m == 0 && n == 0 { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(ones.coeffs[(m, n)], expect, epsilon = 1e-10);
            }
        }
        // Rounding the samples t1·t2 to double already moves the exact
        // coefficients by up to 2e-9 (max |V⁻¹| is 1.7e4), so that is the floor.
        let prod: Vec<f64> = fnodes.iter().map(|t| t[0] * t[1]).collect();
        let a = rules.monomial_coeffs(&prod);
        for m in 0..FINE_ORDER {
            for n in 0..FINE_ORDER {
                let expect = if m == 1 && n == 1 { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(a.coeffs[(m, n)], expect, epsilon = 5e-9);
            }
        }
    }

    #[test]
    fn monomial_coeffs_round_trip_random() {
        use rand::{Rng, SeedableRng};
        let rules = TensorRules::standard();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let alpha = MonomialCoeffs {
            coeffs: FineMatrix::from_fn(|_, _| rng.random_range(-1.0..1.0)),
        };
        let vals: Vec<f64> = rules.fine.tensor_nodes().iter().map(|t| alpha.evaluate(*t)).collect();
        let back = rules.monomial_coeffs(&vals);
        let err = (back.coeffs - alpha.coeffs).abs().max();
        assert!(err < 1e-6, "{err:e}");
    }

    #[test]
    fn monomial_coeffs_reproduce_nodal_values() {
        let rules = TensorRules::standard();
        let fnodes = rules.fine.tensor_nodes();
        let vals: Vec<f64> = fnodes.iter().map(|t| (0.7 * t[0] - 0.4 * t[1]).cos() * (1.0 + t[0] * t[1])).collect();
        let a = rules.monomial_coeffs(&vals);
        let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (t, v) in fnodes.iter().zip(&vals) {
            assert!((a.evaluate(*t) - v).abs() < 1e-9 * scale);
        }
    }
}
