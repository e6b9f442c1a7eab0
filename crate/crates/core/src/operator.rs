//! Nyström discretization of the double-layer operator on a patched torus.
//!
//! For a target `r` and a patch `Γ_ij` with local target coordinates `t`,
//! the contribution `(1/2π) ∬ J/|u|³ μ dt′` is computed by one of three rules:
//!
//! * far (`|t| > 3.5`): the 10×10 solution grid itself;
//! * intermediate (`2 < |t| ≤ 3.5`): μ interpolated to the 16×16 grid;
//! * near (`|t| < 2`): the kernel is split into `K + 1` terms of its expansion
//!   about `t`, integrated exactly against the monomial interpolant of the
//!   numerator, plus a smooth remainder on the 16×16 grid.
//!
//! Intermediate and near contributions are linear in the 100 coarse values of
//! the patch, so each is stored as a row of 100 weights.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fpintegrals::{box_moments_range, QuadFormParams};
use crate::geometry::{surface_frame, PatchGrid, PatchIndex, SurfacePoint, TorusShape, Vec3};
use crate::quadrature::{FineMatrix, TensorRules, COARSE_NODES, FINE_NODES, FINE_ORDER};
use crate::validation::MOMENT_DEGREE;

/// `|t|` at or below which a patch is integrated with the interpolated fine rule.
pub const FAR_THRESHOLD: f64 = 3.5;
/// `|t|` below which singularity subtraction is used.
pub const NEAR_THRESHOLD: f64 = 2.0;
/// Largest number of unknowns for which far-field blocks are cached densely.
pub const DENSE_FAR_LIMIT: usize = 6400;

const INV_2PI: f64 = 0.5 / PI;

/// Nodes and frames of one patch on both tensor grids.
#[derive(Debug, Clone)]
pub struct PatchData {
    pub index: PatchIndex,
    pub coarse: Vec<SurfacePoint>,
    pub fine: Vec<SurfacePoint>,
    /// `w_q (∂ρ/∂t2 × ∂ρ/∂t1) / 2π` at the coarse nodes.
    coarse_weighted_normals: Vec<Vec3>,
}

impl PatchData {
    pub fn new(shape: &TorusShape, grid: &PatchGrid, index: PatchIndex) -> Self {
        let rules = TensorRules::standard();
        let coarse: Vec<SurfacePoint> = rules
            .coarse
            .tensor_nodes()
            .into_iter()
            .map(|t| surface_frame(shape, grid, index, t))
            .collect();
        let fine = rules
            .fine
            .tensor_nodes()
            .into_iter()
            .map(|t| surface_frame(shape, grid, index, t))
            .collect();
        let coarse_weighted_normals = coarse
            .iter()
            .zip(rules.coarse_weights())
            .map(|(p, w)| p.scaled_normal() * (w * INV_2PI))
            .collect();
        Self {
            index,
            coarse,
            fine,
            coarse_weighted_normals,
        }
    }
}

/// Interaction regime of a (target, patch) pair, with the target's local coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetClass {
    Far { t: [f64; 2] },
    Intermediate { t: [f64; 2] },
    Near { t: [f64; 2] },
}

impl TargetClass {
    pub fn from_local(t: [f64; 2]) -> Self {
        let norm = t[0].hypot(t[1]);
        if norm > FAR_THRESHOLD {
            TargetClass::Far { t }
        } else if norm >= NEAR_THRESHOLD {
            TargetClass::Intermediate { t }
        } else {
            TargetClass::Near { t }
        }
    }

    pub fn local(&self) -> [f64; 2] {
        match *self {
            TargetClass::Far { t } | TargetClass::Intermediate { t } | TargetClass::Near { t } => t,
        }
    }
}

/// Classifies an on-surface target, given by its global parameters, against a patch.
pub fn classify(grid: &PatchGrid, patch: PatchIndex, target_s: [f64; 2]) -> TargetClass {
    TargetClass::from_local(grid.local_coords(patch, target_s))
}

/// `u = ρ(t′) − r` and `J = (∂ρ/∂t2 × ∂ρ/∂t1) · u`.
pub fn u_and_j(target: &Vec3, src: &SurfacePoint) -> (Vec3, f64) {
    let u = src.position - target;
    (u, src.scaled_normal().dot(&u))
}

/// `binom(−3/2, k)` by the running product.
pub fn binom(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, j| acc * (-1.5 - j as f64 + 1.0) / j as f64)
}

/// Linearization of a patch map about the target parameter `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionGeometry {
    pub t: [f64; 2],
    pub dt1: Vec3,
    pub dt2: Vec3,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub order: usize,
}

impl ExpansionGeometry {
    pub fn new(shape: &TorusShape, grid: &PatchGrid, patch: PatchIndex, t: [f64; 2], order: usize) -> Result<Self> {
        let frame = surface_frame(shape, grid, patch, t);
        let a = frame.dt1.norm();
        let b = frame.dt2.norm();
        let c = frame.dt1.dot(&frame.dt2) / (a * b);
        if !(c.abs() < 1.0 - 1e-12) {
            return Err(Error::DegenerateForm { c });
        }
        Ok(Self {
            t,
            dt1: frame.dt1,
            dt2: frame.dt2,
            a,
            b,
            c,
            order,
        })
    }

    /// `|v|² = a²h1² + 2abc h1h2 + b²h2²` with `h = t′ − t`.
    pub fn v_squared(&self, t_src: [f64; 2]) -> f64 {
        let h1 = t_src[0] - self.t[0];
        let h2 = t_src[1] - self.t[1];
        let (ah, bh) = (self.a * h1, self.b * h2);
        ah * ah + 2.0 * self.c * ah * bh + bh * bh
    }

    fn form_params(&self) -> Result<QuadFormParams> {
        QuadFormParams::new(self.a, self.b, self.c, self.a * self.t[0], self.b * self.t[1])
    }
}

/// `binom(−3/2, k) · J · Δᵏ / |v|^{3+2k}` with `Δ = |u|² − |v|²`.
pub fn expansion_kernel(k: usize, geo: &ExpansionGeometry, src: &SurfacePoint, t_src: [f64; 2], r: &Vec3) -> f64 {
    let (u, j) = u_and_j(r, src);
    let v2 = geo.v_squared(t_src);
    let delta = u.norm_squared() - v2;
    binom(k) * j * delta.powi(k as i32) / (v2.powi(k as i32 + 1) * v2.sqrt())
}

fn full_kernel(r: &Vec3, src: &SurfacePoint) -> f64 {
    let (u, j) = u_and_j(r, src);
    let n2 = u.norm_squared();
    j / (n2 * n2.sqrt())
}

/// Far rule: `(1/2π) Σ w J/|u|³ μ` on the 10×10 grid.
pub fn apply_far(patch: &PatchData, r: &Vec3, mu: &[f64]) -> f64 {
    assert_eq!(mu.len(), COARSE_NODES);
    patch
        .coarse
        .iter()
        .zip(&patch.coarse_weighted_normals)
        .zip(mu)
        .map(|((p, wn), m)| {
            let u = p.position - r;
            let n2 = u.norm_squared();
            wn.dot(&u) / (n2 * n2.sqrt()) * m
        })
        .sum()
}

/// Coarse weights of the intermediate rule.
pub fn intermediate_weights(patch: &PatchData, r: &Vec3) -> [f64; COARSE_NODES] {
    let rules = TensorRules::standard();
    let fine: Vec<f64> = patch
        .fine
        .iter()
        .zip(rules.fine_weights())
        .map(|(p, w)| w * INV_2PI * full_kernel(r, p))
        .collect();
    rules.pullback(&fine)
}

pub fn apply_intermediate(patch: &PatchData, r: &Vec3, mu: &[f64]) -> f64 {
    dot(&intermediate_weights(patch, r), mu)
}

/// Fine-grid weights of the near rule for a target at local coordinates `t`,
/// which must be the parameter of `r` in this patch's map.
pub fn near_fine_weights(
    shape: &TorusShape,
    grid: &PatchGrid,
    patch: &PatchData,
    r: &Vec3,
    t: [f64; 2],
    order: usize,
) -> Result<[f64; FINE_NODES]> {
    let rules = TensorRules::standard();
    let geo = ExpansionGeometry::new(shape, grid, patch.index, t, order)?;
    let moments = box_moments_range(&geo.form_params()?, MOMENT_DEGREE, MOMENT_DEGREE, 1, order + 1)?;
    let nodes = rules.fine.tensor_nodes();
    let vinv = rules.monomial.inverse();

    let mut jac = [0.0; FINE_NODES];
    let mut delta = [0.0; FINE_NODES];
    let mut weights = [0.0; FINE_NODES];
    let mut a_pow = [1.0; FINE_ORDER + 1];
    let mut b_pow = [1.0; FINE_ORDER + 1];
    for i in 1..=FINE_ORDER {
        a_pow[i] = a_pow[i - 1] * geo.a;
        b_pow[i] = b_pow[i - 1] * geo.b;
    }
    for (q, (src, w)) in patch.fine.iter().zip(rules.fine_weights()).enumerate() {
        let (u, j) = u_and_j(r, src);
        let u2 = u.norm_squared();
        let v2 = geo.v_squared(nodes[q]);
        jac[q] = j;
        delta[q] = u2 - v2;
        // Remainder: exact kernel minus the truncated expansion.
        let mut expansion = 0.0;
        let mut term = j / (v2 * v2.sqrt());
        for k in 0..=order {
            expansion += binom(k) * term;
            term *= delta[q] / v2;
        }
        weights[q] = w * INV_2PI * (j / (u2 * u2.sqrt()) - expansion);
    }

    for (k, table) in moments.iter().enumerate() {
        // Ω = V⁻ᵀ W V⁻¹ turns monomial moments into nodal weights.
        let w_mat = FineMatrix::from_fn(|m, n| table.get(m, n) / (a_pow[m + 1] * b_pow[n + 1]));
        let omega = vinv.transpose() * w_mat * vinv;
        let coeff = binom(k) * INV_2PI;
        for p in 0..FINE_ORDER {
            for q in 0..FINE_ORDER {
                let idx = p * FINE_ORDER + q;
                weights[idx] += coeff * omega[(p, q)] * jac[idx] * delta[idx].powi(k as i32);
            }
        }
    }
    Ok(weights)
}

/// Coarse weights of the near rule.
pub fn near_weights(
    shape: &TorusShape,
    grid: &PatchGrid,
    patch: &PatchData,
    r: &Vec3,
    t: [f64; 2],
    order: usize,
) -> Result<[f64; COARSE_NODES]> {
    let fine = near_fine_weights(shape, grid, patch, r, t, order)?;
    Ok(TensorRules::standard().pullback(&fine))
}

pub fn apply_near(
    shape: &TorusShape,
    grid: &PatchGrid,
    patch: &PatchData,
    r: &Vec3,
    t: [f64; 2],
    mu: &[f64],
    order: usize,
) -> Result<f64> {
    Ok(dot(&near_weights(shape, grid, patch, r, t, order)?, mu))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Precomputed weights of one non-far (target, patch) pair.
#[derive(Debug, Clone)]
struct LocalBlock {
    patch: usize,
    weights: [f64; COARSE_NODES],
}

/// The discretized map `μ ↦ μ + Σ_ij D_ij μ` at every coarse node.
#[derive(Debug)]
pub struct DoubleLayerSystem {
    shape: TorusShape,
    grid: PatchGrid,
    order: usize,
    patches: Vec<PatchData>,
    /// Target `n` is coarse node `n % 100` of patch `n / 100`.
    targets: Vec<Vec3>,
    target_params: Vec<[f64; 2]>,
    /// Near and intermediate blocks per target, sorted by patch.
    local: Vec<Vec<LocalBlock>>,
    far_dense: Option<DMatrix<f64>>,
    near_seconds: f64,
}

impl DoubleLayerSystem {
    /// Builds patch data and all near/intermediate weights; far blocks are
    /// cached densely when the system has at most [`DENSE_FAR_LIMIT`] unknowns.
    pub fn new(shape: TorusShape, grid: PatchGrid, order: usize) -> Result<Self> {
        let rules = TensorRules::standard();
        let patches: Vec<PatchData> = grid.patches().map(|p| PatchData::new(&shape, &grid, p)).collect();
        let coarse_nodes = rules.coarse.tensor_nodes();
        let mut targets = Vec::with_capacity(patches.len() * COARSE_NODES);
        let mut target_params = Vec::with_capacity(patches.len() * COARSE_NODES);
        for patch in &patches {
            for (node, frame) in coarse_nodes.iter().zip(&patch.coarse) {
                targets.push(frame.position);
                target_params.push(grid.patch_to_global(patch.index, *node));
            }
        }

        let start = Instant::now();
        let local: Vec<Vec<LocalBlock>> = targets
            .par_iter()
            .zip(target_params.par_iter())
            .map(|(r, s)| {
                let mut blocks = Vec::new();
                for (pi, patch) in patches.iter().enumerate() {
                    let weights = match classify(&grid, patch.index, *s) {
                        TargetClass::Far { .. } => continue,
                        TargetClass::Intermediate { .. } => intermediate_weights(patch, r),
                        TargetClass::Near { t } => near_weights(&shape, &grid, patch, r, t, order)?,
                    };
                    blocks.push(LocalBlock { patch: pi, weights });
                }
                Ok(blocks)
            })
            .collect::<Result<_>>()?;
        let near_seconds = start.elapsed().as_secs_f64();

        let mut system = Self {
            shape,
            grid,
            order,
            patches,
            targets,
            target_params,
            local,
            far_dense: None,
            near_seconds,
        };
        if system.len() <= DENSE_FAR_LIMIT {
            system.far_dense = Some(system.assemble_far());
        }
        Ok(system)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn shape(&self) -> &TorusShape {
        &self.shape
    }

    pub fn grid(&self) -> &PatchGrid {
        &self.grid
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn patches(&self) -> &[PatchData] {
        &self.patches
    }

    /// Coarse-node positions, patch-major.
    pub fn targets(&self) -> &[Vec3] {
        &self.targets
    }

    /// Global parameters of the coarse nodes.
    pub fn target_params(&self) -> &[[f64; 2]] {
        &self.target_params
    }

    /// Wall time spent on near and intermediate weights.
    pub fn near_seconds(&self) -> f64 {
        self.near_seconds
    }

    /// Number of stored near/intermediate (target, patch) blocks.
    pub fn local_block_count(&self) -> usize {
        self.local.iter().map(Vec::len).sum()
    }

    fn far_row(&self, target: usize, out: &mut [f64]) {
        let r = &self.targets[target];
        let blocks = &self.local[target];
        let mut next = 0;
        for (pi, patch) in self.patches.iter().enumerate() {
            let row = &mut out[pi * COARSE_NODES..(pi + 1) * COARSE_NODES];
            if next < blocks.len() && blocks[next].patch == pi {
                next += 1;
                row.fill(0.0);
                continue;
            }
            for ((p, wn), o) in patch.coarse.iter().zip(&patch.coarse_weighted_normals).zip(row.iter_mut()) {
                let u = p.position - r;
                let n2 = u.norm_squared();
                *o = wn.dot(&u) / (n2 * n2.sqrt());
            }
        }
    }

    fn assemble_far(&self) -> DMatrix<f64> {
        let n = self.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut row = vec![0.0; n];
                self.far_row(i, &mut row);
                row
            })
            .collect();
        DMatrix::from_fn(n, n, |i, j| rows[i][j])
    }

    /// `μ + Σ_ij D_ij μ` at every coarse node.
    pub fn apply(&self, mu: &[f64]) -> Vec<f64> {
        assert_eq!(mu.len(), self.len());
        let far: Vec<f64> = match &self.far_dense {
            Some(m) => (m * nalgebra::DVector::from_column_slice(mu)).as_slice().to_vec(),
            None => (0..self.len())
                .into_par_iter()
                .map(|i| {
                    let r = &self.targets[i];
                    let blocks = &self.local[i];
                    let mut next = 0;
                    let mut acc = 0.0;
                    for (pi, patch) in self.patches.iter().enumerate() {
                        if next < blocks.len() && blocks[next].patch == pi {
                            next += 1;
                            continue;
                        }
                        acc += apply_far(patch, r, &mu[pi * COARSE_NODES..(pi + 1) * COARSE_NODES]);
                    }
                    acc
                })
                .collect(),
        };
        far.into_par_iter()
            .zip(self.local.par_iter())
            .zip(mu.par_iter())
            .map(|((f, blocks), m)| {
                let near: f64 = blocks
                    .iter()
                    .map(|b| dot(&b.weights, &mu[b.patch * COARSE_NODES..(b.patch + 1) * COARSE_NODES]))
                    .sum();
                m + f + near
            })
            .collect()
    }
}
