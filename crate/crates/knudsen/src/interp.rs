//! Cubic tensor interpolation on the polar velocity grid.
//!
//! Fields produced by the kinetic operators are Maxwellian-weighted, so all
//! interpolation happens in the ratio variable `f / mu^{1/2}`: the smooth
//! polynomial-like part is interpolated and the exact Gaussian factor is
//! restored at the evaluation point. Beyond the truncation radius the ratio
//! is clamped to the outermost ring, which leaves the contribution weighted
//! by the exact Maxwellian factor of the target point.

use crate::velocity::VelocityGrid;

/// A 4x4 tensor stencil in (radius, angle) index space.
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    pub ring: [usize; 4],
    pub ring_w: [f64; 4],
    pub slot: [usize; 4],
    pub slot_w: [f64; 4],
    /// Radius fell beyond the truncation radius and was clamped.
    pub clamped: bool,
}

impl Stencil {
    /// Contract the stencil against a ratio field on grid nodes.
    #[inline]
    pub fn apply(&self, grid: &VelocityGrid, ratio: &[f64]) -> f64 {
        let mut acc = 0.0;
        for a in 0..4 {
            let base = self.ring[a] * grid.n_phi();
            let mut row = 0.0;
            for b in 0..4 {
                row += self.slot_w[b] * ratio[base + self.slot[b]];
            }
            acc += self.ring_w[a] * row;
        }
        acc
    }
}

/// Cubic Lagrange weights for arbitrary abscissae.
#[inline]
pub fn lagrange4(xs: [f64; 4], x: f64) -> [f64; 4] {
    let mut w = [0.0; 4];
    for i in 0..4 {
        let mut p = 1.0;
        for j in 0..4 {
            if i != j {
                p *= (x - xs[j]) / (xs[i] - xs[j]);
            }
        }
        w[i] = p;
    }
    w
}

/// Radial 4-point stencil around radius `rho`, one-sided at the ends.
pub fn radial_stencil(grid: &VelocityGrid, rho: f64) -> ([usize; 4], [f64; 4], bool) {
    let radii = grid.radii();
    let n = radii.len();
    let clamped = rho > grid.vmax();
    if clamped {
        // Clamp to the outermost ring value.
        return ([n - 4, n - 3, n - 2, n - 1], [0.0, 0.0, 0.0, 1.0], true);
    }
    // First ring with radius >= rho.
    let k = radii.partition_point(|&r| r < rho);
    let lo = k.saturating_sub(2).min(n - 4);
    let idx = [lo, lo + 1, lo + 2, lo + 3];
    let xs = [radii[lo], radii[lo + 1], radii[lo + 2], radii[lo + 3]];
    (idx, lagrange4(xs, rho), false)
}

/// Angular 4-point periodic stencil around angle `alpha` (any real value).
#[inline]
pub fn angular_stencil(grid: &VelocityGrid, alpha: f64) -> ([usize; 4], [f64; 4]) {
    let n = grid.n_phi();
    let dphi = grid.dphi();
    // Fractional slot position; slot j sits at (j + 1/2) dphi.
    let u = alpha / dphi - 0.5;
    let base = u.floor();
    let t = u - base;
    // Uniform-grid cubic Lagrange weights at offsets -1, 0, 1, 2.
    let w = [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ];
    let b = base as i64 - 1;
    let mut idx = [0usize; 4];
    for (j, slot) in idx.iter_mut().enumerate() {
        *slot = (b + j as i64).rem_euclid(n as i64) as usize;
    }
    (idx, w)
}

/// Full stencil for a Cartesian velocity point.
pub fn stencil(grid: &VelocityGrid, v: [f64; 2]) -> Stencil {
    let rho = (v[0] * v[0] + v[1] * v[1]).sqrt();
    let alpha = v[1].atan2(v[0]);
    let (ring, ring_w, clamped) = radial_stencil(grid, rho);
    let (slot, slot_w) = angular_stencil(grid, alpha);
    Stencil {
        ring,
        ring_w,
        slot,
        slot_w,
        clamped,
    }
}

/// Interpolate the ratio field (values `f_j / mu^{1/2}(v_j)`) at `v`.
pub fn eval_ratio(grid: &VelocityGrid, ratio: &[f64], v: [f64; 2]) -> f64 {
    stencil(grid, v).apply(grid, ratio)
}
