//! Truncated polar discretization of 2D velocity space.
//!
//! Nodes sit on a tensor grid of Gauss-Legendre radii mapped to `[0, vmax]`
//! and uniform midpoint angles. Midpoint angles keep every reflection the
//! solver needs exact on the node set: `v -> -v`, `(v1, v2) -> (v1, -v2)`
//! and their composition `(v1, v2) -> (-v1, v2)`, which the Milne far-end
//! condition uses node-for-node.

use crate::error::{Error, Result};
use crate::quad;

pub const SQRT_TWO_PI: f64 = 2.5066282746310002;

/// Global Maxwellian `mu(v) = (2 pi)^{-1/2} exp(-|v|^2 / 2)`.
pub fn maxwellian(v: [f64; 2]) -> f64 {
    (-(v[0] * v[0] + v[1] * v[1]) / 2.0).exp() / SQRT_TWO_PI
}

/// Square root of the global Maxwellian.
pub fn maxwellian_sqrt(v: [f64; 2]) -> f64 {
    (-(v[0] * v[0] + v[1] * v[1]) / 4.0).exp() / SQRT_TWO_PI.sqrt()
}

/// Truncated velocity grid with positive quadrature weights.
#[derive(Debug, Clone)]
pub struct VelocityGrid {
    vmax: f64,
    n_r: usize,
    n_phi: usize,
    radii: Vec<f64>,
    radial_weights: Vec<f64>,
    angles: Vec<f64>,
    nodes: Vec<[f64; 2]>,
    weights: Vec<f64>,
    mu_sqrt: Vec<f64>,
}

impl VelocityGrid {
    /// Build the tensor polar grid.
    ///
    /// Rejects odd `n_phi` (breaks the reflection symmetries) and `vmax < 5`
    /// (Maxwellian tail mass exceeds the quadrature tolerance).
    pub fn build(vmax: f64, n_r: usize, n_phi: usize) -> Result<Self> {
        if !(vmax >= 5.0) {
            return Err(Error::Grid(format!(
                "vmax = {vmax} too small; need vmax >= 5 to keep tail mass below tolerance"
            )));
        }
        if n_r < 8 {
            return Err(Error::Grid(format!("n_r = {n_r} too small; need n_r >= 8")));
        }
        if n_phi < 8 {
            return Err(Error::Grid(format!(
                "n_phi = {n_phi} too small; need n_phi >= 8"
            )));
        }
        if n_phi % 2 != 0 {
            return Err(Error::Grid(format!(
                "n_phi = {n_phi} is odd; reflection symmetry requires an even angular count"
            )));
        }
        let (radii, radial_weights) = quad::gauss_legendre_on(n_r, 0.0, vmax);
        let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
        let angles: Vec<f64> = (0..n_phi).map(|j| (j as f64 + 0.5) * dphi).collect();

        let mut nodes = Vec::with_capacity(n_r * n_phi);
        let mut weights = Vec::with_capacity(n_r * n_phi);
        for (i, (&r, &wr)) in radii.iter().zip(&radial_weights).enumerate() {
            let _ = i;
            for &phi in &angles {
                nodes.push([r * phi.cos(), r * phi.sin()]);
                weights.push(wr * r * dphi);
            }
        }
        let mu_sqrt = nodes.iter().map(|&v| maxwellian_sqrt(v)).collect();
        Ok(Self {
            vmax,
            n_r,
            n_phi,
            radii,
            radial_weights,
            angles,
            nodes,
            weights,
            mu_sqrt,
        })
    }

    pub fn vmax(&self) -> f64 {
        self.vmax
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn radial_weights(&self) -> &[f64] {
        &self.radial_weights
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn dphi(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.n_phi as f64
    }

    /// Flat index of the node on radial ring `i` at angle slot `j`.
    pub fn node_index(&self, i: usize, j: usize) -> usize {
        i * self.n_phi + j
    }

    /// Ring and angle slot of a flat node index.
    pub fn ring_angle(&self, k: usize) -> (usize, usize) {
        (k / self.n_phi, k % self.n_phi)
    }

    /// Node paired under `(v1, v2) -> (-v1, v2)`.
    pub fn reflect_first(&self, k: usize) -> usize {
        let (i, j) = self.ring_angle(k);
        let j2 = (self.n_phi + self.n_phi / 2 - 1).wrapping_sub(j) % self.n_phi;
        self.node_index(i, j2)
    }

    /// Node paired under `(v1, v2) -> (v1, -v2)`.
    pub fn reflect_second(&self, k: usize) -> usize {
        let (i, j) = self.ring_angle(k);
        self.node_index(i, self.n_phi - 1 - j)
    }

    /// Node paired under `v -> -v`.
    pub fn negate(&self, k: usize) -> usize {
        let (i, j) = self.ring_angle(k);
        self.node_index(i, (j + self.n_phi / 2) % self.n_phi)
    }

    /// `mu^{1/2}` sampled on the nodes.
    pub fn mu_sqrt(&self) -> &[f64] {
        &self.mu_sqrt
    }

    /// Quadrature of a node field.
    pub fn integrate(&self, field: &[f64]) -> Result<f64> {
        if field.len() != self.len() {
            return Err(Error::FieldLength {
                expected: self.len(),
                found: field.len(),
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(field)
            .map(|(&w, &f)| w * f)
            .sum())
    }

    /// Quadrature inner product of two node fields.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.len());
        debug_assert_eq!(g.len(), self.len());
        self.weights
            .iter()
            .zip(f.iter().zip(g))
            .map(|(&w, (&a, &b))| w * a * b)
            .sum()
    }

    /// Quadrature L2 norm of a node field.
    pub fn norm(&self, f: &[f64]) -> f64 {
        self.inner(f, f).sqrt()
    }

    /// Evaluate a closure on every node.
    pub fn field<F: Fn([f64; 2]) -> f64>(&self, f: F) -> Vec<f64> {
        self.nodes.iter().map(|&v| f(v)).collect()
    }

    /// The four collision-invariant fields
    /// `psi_0 = mu^{1/2}`, `psi_1 = mu^{1/2} v1`, `psi_2 = mu^{1/2} v2`,
    /// `psi_3 = mu^{1/2} (|v|^2 - 2)/2`.
    pub fn null_basis(&self) -> [Vec<f64>; 4] {
        [
            self.field(maxwellian_sqrt),
            self.field(|v| maxwellian_sqrt(v) * v[0]),
            self.field(|v| maxwellian_sqrt(v) * v[1]),
            self.field(|v| maxwellian_sqrt(v) * (v[0] * v[0] + v[1] * v[1] - 2.0) / 2.0),
        ]
    }

    /// Weighted sup norm `max <v>^theta e^{rho |v|^2} |f|`.
    pub fn weighted_sup(&self, f: &[f64], theta: f64, rho: f64) -> f64 {
        self.nodes
            .iter()
            .zip(f)
            .map(|(&v, &x)| {
                let s = v[0] * v[0] + v[1] * v[1];
                (1.0 + s).powf(theta / 2.0) * (rho * s).exp() * x.abs()
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_bad_parameters() {
        assert!(VelocityGrid::build(4.0, 24, 32).is_err());
        assert!(VelocityGrid::build(6.0, 24, 31).is_err());
        assert!(VelocityGrid::build(6.0, 4, 32).is_err());
        assert!(VelocityGrid::build(6.0, 24, 6).is_err());
    }

    #[test]
    fn maxwellian_mass_matches_closed_form() {
        let grid = VelocityGrid::build(6.0, 24, 32).unwrap();
        let mu = grid.field(maxwellian);
        let mass = grid.integrate(&mu).unwrap();
        assert!((mass - SQRT_TWO_PI).abs() < 1e-6, "mass = {mass}");
    }

    #[test]
    fn second_moment_matches_closed_form() {
        let grid = VelocityGrid::build(6.0, 24, 32).unwrap();
        let f = grid.field(|v| maxwellian(v) * (v[0] * v[0] + v[1] * v[1]));
        let m2 = grid.integrate(&f).unwrap();
        assert!((m2 - 2.0 * SQRT_TWO_PI).abs() < 1e-5, "m2 = {m2}");
    }

    #[test]
    fn odd_moment_vanishes() {
        let grid = VelocityGrid::build(6.0, 24, 32).unwrap();
        let f = grid.field(|v| maxwellian(v) * v[0]);
        assert!(grid.integrate(&f).unwrap().abs() < 1e-12);
    }

    #[test]
    fn weights_positive_nodes_inside() {
        let grid = VelocityGrid::build(5.0, 12, 16).unwrap();
        assert!(grid.weights().iter().all(|&w| w > 0.0));
        assert!(grid
            .nodes()
            .iter()
            .all(|&v| (v[0] * v[0] + v[1] * v[1]).sqrt() <= grid.vmax() + 1e-12));
    }

    #[test]
    fn reflection_maps_are_exact_involutions() {
        let grid = VelocityGrid::build(6.0, 10, 12).unwrap();
        for k in 0..grid.len() {
            let v = grid.nodes()[k];
            let kf = grid.reflect_first(k);
            let vf = grid.nodes()[kf];
            assert_relative_eq!(vf[0], -v[0], epsilon = 1e-12, max_relative = 1e-12);
            assert_relative_eq!(vf[1], v[1], epsilon = 1e-12, max_relative = 1e-12);
            assert_eq!(grid.reflect_first(kf), k);
            assert_relative_eq!(grid.weights()[kf], grid.weights()[k]);

            let ks = grid.reflect_second(k);
            let vs = grid.nodes()[ks];
            assert_relative_eq!(vs[0], v[0], epsilon = 1e-12, max_relative = 1e-12);
            assert_relative_eq!(vs[1], -v[1], epsilon = 1e-12, max_relative = 1e-12);

            let kn = grid.negate(k);
            let vn = grid.nodes()[kn];
            assert_relative_eq!(vn[0], -v[0], epsilon = 1e-12, max_relative = 1e-12);
            assert_relative_eq!(vn[1], -v[1], epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn refinement_shrinks_mass_defect() {
        // Start from a coarse grid where the quadrature error dominates the
        // truncation tail, so the factor-4 contraction is observable.
        let coarse = VelocityGrid::build(8.0, 8, 8).unwrap();
        let fine = VelocityGrid::build(8.0, 16, 16).unwrap();
        let ec = (coarse.integrate(&coarse.field(maxwellian)).unwrap() - SQRT_TWO_PI).abs();
        let ef = (fine.integrate(&fine.field(maxwellian)).unwrap() - SQRT_TWO_PI).abs();
        assert!(
            ec >= 4.0 * ef,
            "coarse defect {ec:.3e} not 4x the fine defect {ef:.3e}"
        );
    }

    #[test]
    fn integrate_is_linear() {
        let grid = VelocityGrid::build(5.0, 9, 10).unwrap();
        let f = grid.field(|v| (v[0] - 0.3 * v[1]).sin());
        let g = grid.field(|v| maxwellian(v) * v[1] * v[1]);
        let combo: Vec<f64> = f.iter().zip(&g).map(|(&a, &b)| 2.5 * a - 1.25 * b).collect();
        let lhs = grid.integrate(&combo).unwrap();
        let rhs = 2.5 * grid.integrate(&f).unwrap() - 1.25 * grid.integrate(&g).unwrap();
        assert_relative_eq!(lhs, rhs, epsilon = 1e-12, max_relative = 1e-12);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let grid = VelocityGrid::build(5.0, 8, 8).unwrap();
        assert!(grid.integrate(&vec![0.0; grid.len() + 1]).is_err());
    }
}
