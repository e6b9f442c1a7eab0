//! Torus surfaces, their patch decomposition, and surface frames.
//!
//! The surface is parameterized over `s ∈ [-π, π]²` by
//!
//! ```text
//! r(s) = [ϱ(s) cos s2, ϱ(s) sin s2, δ2 sin s1],   ϱ(s) = 2 + δ1 cos 2s2 + δ2 cos s1
//! ```
//!
//! and tiled by `p1 × p2` patches, each the image of the local square
//! `t ∈ [-1, 1]²` under an affine map into parameter space. Patch indices are
//! zero based: `i ∈ 0..p1`, `j ∈ 0..p2`.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Shape parameters `(δ1, δ2)` of the torus family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusShape {
    delta1: f64,
    delta2: f64,
}

impl TorusShape {
    /// Requires `δ2 > 0` and `δ2 + |δ1| < 2` so that `ϱ(s) > 0` everywhere.
    pub fn new(delta1: f64, delta2: f64) -> Result<Self> {
        if !(delta1.is_finite() && delta2.is_finite()) {
            return Err(Error::InvalidInput("shape parameters must be finite".into()));
        }
        if delta2 <= 0.0 {
            return Err(Error::InvalidInput(format!("delta2 = {delta2} must be positive")));
        }
        if delta2 + delta1.abs() >= 2.0 {
            return Err(Error::InvalidInput(format!(
                "delta2 + |delta1| = {} must be below 2",
                delta2 + delta1.abs()
            )));
        }
        Ok(Self { delta1, delta2 })
    }

    pub fn delta1(&self) -> f64 {
        self.delta1
    }

    pub fn delta2(&self) -> f64 {
        self.delta2
    }

    /// Distance of the tube's cross-section center from the z-axis at azimuth `s2`.
    pub fn ring_radius(&self, s2: f64) -> f64 {
        2.0 + self.delta1 * (2.0 * s2).cos()
    }

    /// `ϱ(s)`, the distance of `r(s)` from the z-axis.
    pub fn radial(&self, s: [f64; 2]) -> f64 {
        self.ring_radius(s[1]) + self.delta2 * s[0].cos()
    }

    pub fn position(&self, s: [f64; 2]) -> Vec3 {
        let rho = self.radial(s);
        let (sin2, cos2) = s[1].sin_cos();
        Vec3::new(rho * cos2, rho * sin2, self.delta2 * s[0].sin())
    }

    /// Analytic `(∂r/∂s1, ∂r/∂s2)`.
    pub fn partials(&self, s: [f64; 2]) -> (Vec3, Vec3) {
        let (sin1, cos1) = s[0].sin_cos();
        let (sin2, cos2) = s[1].sin_cos();
        let rho = self.radial(s);
        let drho1 = -self.delta2 * sin1;
        let drho2 = -2.0 * self.delta1 * (2.0 * s[1]).sin();
        let d1 = Vec3::new(drho1 * cos2, drho1 * sin2, self.delta2 * cos1);
        let d2 = Vec3::new(drho2 * cos2 - rho * sin2, drho2 * sin2 + rho * cos2, 0.0);
        (d1, d2)
    }

    /// Signed distance from the tube's center circle in the meridian half-plane
    /// through `r`, minus `δ2`. Negative strictly inside the solid torus.
    ///
    /// Every meridian cross-section is a disc of radius `δ2` centered at
    /// `(ring_radius(φ), 0)`, with `φ` the azimuth of `r`.
    pub fn tube_offset(&self, r: &Vec3) -> f64 {
        let phi = r.y.atan2(r.x);
        let cyl = r.x.hypot(r.y);
        (cyl - self.ring_radius(phi)).hypot(r.z) - self.delta2
    }

    /// `true` when `r` is strictly inside the solid torus.
    pub fn contains(&self, r: &Vec3) -> bool {
        self.tube_offset(r) < 0.0
    }
}

/// Position of a patch within the `p1 × p2` tiling (zero based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PatchIndex {
    pub i: usize,
    pub j: usize,
}

impl PatchIndex {
    pub fn new(i: usize, j: usize) -> Self {
        Self { i, j }
    }
}

/// Patch counts `(p1, p2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchGrid {
    p1: usize,
    p2: usize,
}

impl PatchGrid {
    pub fn new(p1: usize, p2: usize) -> Result<Self> {
        if p1 == 0 || p2 == 0 {
            return Err(Error::InvalidInput(format!("patch counts ({p1}, {p2}) must be positive")));
        }
        Ok(Self { p1, p2 })
    }

    pub fn p1(&self) -> usize {
        self.p1
    }

    pub fn p2(&self) -> usize {
        self.p2
    }

    pub fn patch_count(&self) -> usize {
        self.p1 * self.p2
    }

    /// Patches in storage order: `i` outer, `j` inner.
    pub fn patches(&self) -> impl Iterator<Item = PatchIndex> + '_ {
        (0..self.p1).flat_map(move |i| (0..self.p2).map(move |j| PatchIndex { i, j }))
    }

    /// Linear position of `patch` in [`PatchGrid::patches`] order.
    pub fn linear_index(&self, patch: PatchIndex) -> usize {
        patch.i * self.p2 + patch.j
    }

    /// `dt → ds` scale factors `(π/p1, π/p2)`.
    pub fn scale(&self) -> [f64; 2] {
        [PI / self.p1 as f64, PI / self.p2 as f64]
    }

    /// Parameter-space center of a patch.
    pub fn patch_center(&self, patch: PatchIndex) -> [f64; 2] {
        self.patch_to_global(patch, [0.0, 0.0])
    }

    /// `s_k = π (t_k + 2 idx_k + 1 − p_k) / p_k`. Defined for any `t`, not only `[-1, 1]²`.
    pub fn patch_to_global(&self, patch: PatchIndex, t: [f64; 2]) -> [f64; 2] {
        let map = |t: f64, idx: usize, p: usize| {
            PI * (t + 2.0 * idx as f64 + 1.0 - p as f64) / p as f64
        };
        [map(t[0], patch.i, self.p1), map(t[1], patch.j, self.p2)]
    }

    /// Inverse of [`PatchGrid::patch_to_global`] modulo 2π, returning the
    /// representative closest to the patch center in each coordinate.
    pub fn local_coords(&self, patch: PatchIndex, s: [f64; 2]) -> [f64; 2] {
        let center = self.patch_center(patch);
        [
            self.p1 as f64 / PI * wrap_angle(s[0] - center[0]),
            self.p2 as f64 / PI * wrap_angle(s[1] - center[1]),
        ]
    }
}

/// Maps an angle into `(-π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let w = x.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Position and first-order frame of a patch map at one local parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub position: Vec3,
    /// `∂ρ_ij/∂t1`
    pub dt1: Vec3,
    /// `∂ρ_ij/∂t2`
    pub dt2: Vec3,
    /// Exterior unit normal, along `dt2 × dt1`.
    pub normal: Vec3,
    /// `|dt1 × dt2|`
    pub area_jac: f64,
}

impl SurfacePoint {
    /// `dt2 × dt1`, the unnormalized exterior normal.
    pub fn scaled_normal(&self) -> Vec3 {
        self.normal * self.area_jac
    }
}

pub fn surface_frame(shape: &TorusShape, grid: &PatchGrid, patch: PatchIndex, t: [f64; 2]) -> SurfacePoint {
    let s = grid.patch_to_global(patch, t);
    let [h1, h2] = grid.scale();
    let (d1, d2) = shape.partials(s);
    let dt1 = d1 * h1;
    let dt2 = d2 * h2;
    let cross = dt2.cross(&dt1);
    let area_jac = cross.norm();
    SurfacePoint {
        position: shape.position(s),
        dt1,
        dt2,
        normal: cross / area_jac,
        area_jac,
    }
}
