//! Smooth convex boundary curves in polar form and the local coordinate
//! substitutions used by the boundary layer.
//!
//! The curve is `r(theta) > 0` as a truncated Fourier series, which gives
//! exact derivatives for the curvature formula
//! `kappa = (r^2 + 2 r'^2 - r r'') / (r^2 + r'^2)^{3/2}` and exact
//! periodicity. Points in the collar are addressed by `(n, theta)` through
//! `x = x0(theta) - n * normal(theta)`.

use crate::error::{Error, Result};

/// Convex boundary curve `r(theta) = a0 + sum a_k cos k theta + b_k sin k theta`.
#[derive(Debug, Clone)]
pub struct BoundaryCurve {
    cos_coeffs: Vec<f64>,
    sin_coeffs: Vec<f64>,
    r_min: f64,
    kappa_min: f64,
    r_kappa_min: f64,
}

/// Pointwise curve data at a boundary angle.
#[derive(Debug, Clone, Copy)]
pub struct CurvePoint {
    pub r: f64,
    pub dr: f64,
    pub ddr: f64,
    /// Boundary point in Cartesian coordinates.
    pub position: [f64; 2],
    /// Outward unit normal.
    pub normal: [f64; 2],
    /// Unit tangent paired with the normal in the velocity rotation.
    pub tangent: [f64; 2],
    pub kappa: f64,
    pub r_kappa: f64,
}

impl BoundaryCurve {
    /// Build from Fourier coefficients; `cos_coeffs[0]` is the mean radius.
    ///
    /// Rejects curves that fail `r > 0` or convexity (`kappa > 0`) on a dense
    /// angular sample.
    pub fn new(cos_coeffs: Vec<f64>, sin_coeffs: Vec<f64>) -> Result<Self> {
        if cos_coeffs.is_empty() {
            return Err(Error::Curve("need at least the mean radius term".into()));
        }
        let mut curve = Self {
            cos_coeffs,
            sin_coeffs,
            r_min: 0.0,
            kappa_min: 0.0,
            r_kappa_min: 0.0,
        };
        let samples = 4096;
        let mut r_min = f64::INFINITY;
        let mut kappa_min = f64::INFINITY;
        let mut r_kappa_min = f64::INFINITY;
        for i in 0..samples {
            let theta = 2.0 * std::f64::consts::PI * i as f64 / samples as f64;
            let (r, _, _) = curve.radius(theta);
            if r <= 0.0 {
                return Err(Error::Curve(format!("r({theta:.4}) = {r:.4} <= 0")));
            }
            let kappa = curve.curvature(theta)?.0;
            r_min = r_min.min(r);
            kappa_min = kappa_min.min(kappa);
            r_kappa_min = r_kappa_min.min(1.0 / kappa);
        }
        curve.r_min = r_min;
        curve.kappa_min = kappa_min;
        curve.r_kappa_min = r_kappa_min;
        Ok(curve)
    }

    /// Circle of the given radius.
    pub fn circle(radius: f64) -> Result<Self> {
        Self::new(vec![radius], vec![])
    }

    /// r, r', r'' at `theta`.
    pub fn radius(&self, theta: f64) -> (f64, f64, f64) {
        let mut r = self.cos_coeffs[0];
        let mut dr = 0.0;
        let mut ddr = 0.0;
        for (k, &a) in self.cos_coeffs.iter().enumerate().skip(1) {
            let kf = k as f64;
            let (s, c) = (kf * theta).sin_cos();
            r += a * c;
            dr -= a * kf * s;
            ddr -= a * kf * kf * c;
        }
        for (k, &b) in self.sin_coeffs.iter().enumerate() {
            if k == 0 {
                continue;
            }
            let kf = k as f64;
            let (s, c) = (kf * theta).sin_cos();
            r += b * s;
            dr += b * kf * c;
            ddr -= b * kf * kf * s;
        }
        (r, dr, ddr)
    }

    /// Curvature and radius of curvature at `theta`.
    pub fn curvature(&self, theta: f64) -> Result<(f64, f64)> {
        let (r, dr, ddr) = self.radius(theta);
        let kappa = (r * r + 2.0 * dr * dr - r * ddr) / (r * r + dr * dr).powf(1.5);
        if kappa <= 0.0 {
            return Err(Error::Curve(format!(
                "curvature {kappa:.4e} <= 0 at theta = {theta:.4}: curve is not convex"
            )));
        }
        Ok((kappa, 1.0 / kappa))
    }

    /// Derivative of the radius of curvature in `theta` (exact Fourier r''').
    pub fn r_kappa_derivative(&self, theta: f64) -> f64 {
        let (r, dr, ddr) = self.radius(theta);
        let mut dddr = 0.0;
        for (k, &a) in self.cos_coeffs.iter().enumerate().skip(1) {
            let kf = k as f64;
            dddr += a * kf * kf * kf * (kf * theta).sin();
        }
        for (k, &b) in self.sin_coeffs.iter().enumerate() {
            if k == 0 {
                continue;
            }
            let kf = k as f64;
            dddr -= b * kf * kf * kf * (kf * theta).cos();
        }
        let p2 = r * r + dr * dr;
        let num = p2.powf(1.5);
        let den = r * r + 2.0 * dr * dr - r * ddr;
        // d/dtheta of num/den.
        let dnum = 1.5 * p2.sqrt() * (2.0 * r * dr + 2.0 * dr * ddr);
        let dden = 2.0 * r * dr + 4.0 * dr * ddr - dr * ddr - r * dddr;
        (dnum * den - num * dden) / (den * den)
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    /// Minimum radius of curvature over the sampled boundary.
    pub fn r_kappa_min(&self) -> f64 {
        self.r_kappa_min
    }

    pub fn kappa_min(&self) -> f64 {
        self.kappa_min
    }

    /// Full pointwise data at `theta`.
    pub fn at(&self, theta: f64) -> CurvePoint {
        let (r, dr, ddr) = self.radius(theta);
        let p = (r * r + dr * dr).sqrt();
        let (s, c) = theta.sin_cos();
        let position = [r * c, r * s];
        let normal = [(r * c + dr * s) / p, (r * s - dr * c) / p];
        let tangent = [(-r * s + dr * c) / p, (r * c + dr * s) / p];
        let kappa = (r * r + 2.0 * dr * dr - r * ddr) / p.powi(3);
        CurvePoint {
            r,
            dr,
            ddr,
            position,
            normal,
            tangent,
            kappa,
            r_kappa: 1.0 / kappa,
        }
    }

    /// Map local collar coordinates `(n, theta)` to Cartesian `x`.
    pub fn from_local(&self, depth: f64, theta: f64) -> Result<[f64; 2]> {
        if !(0.0..self.r_kappa_min).contains(&depth) {
            return Err(Error::OutsideCollar(format!(
                "normal depth {depth:.4} not in [0, {:.4})",
                self.r_kappa_min
            )));
        }
        let p = self.at(theta);
        Ok([
            p.position[0] - depth * p.normal[0],
            p.position[1] - depth * p.normal[1],
        ])
    }

    /// Invert the collar chart by Newton iteration on the foot-of-normal
    /// condition `(x0(theta) - x) . tangent(theta) = 0`.
    pub fn to_local(&self, x: [f64; 2]) -> Result<(f64, f64)> {
        let mut theta = x[1].atan2(x[0]);
        let mut converged = false;
        for _ in 0..50 {
            let p = self.at(theta);
            let dx = [p.position[0] - x[0], p.position[1] - x[1]];
            // g(theta) = dx . c'(theta); c' = p * tangent.
            let cp = [p.tangent[0] * (p.r * p.r + p.dr * p.dr).sqrt(), {
                let pn = (p.r * p.r + p.dr * p.dr).sqrt();
                p.tangent[1] * pn
            }];
            let g = dx[0] * cp[0] + dx[1] * cp[1];
            // g'(theta) = |c'|^2 + dx . c''; approximate c'' by finite difference.
            let h = 1e-6;
            let pp = self.at(theta + h);
            let pm = self.at(theta - h);
            let pn = (p.r * p.r + p.dr * p.dr).sqrt();
            let cpp = [
                (pp.tangent[0] * (pp.r * pp.r + pp.dr * pp.dr).sqrt()
                    - pm.tangent[0] * (pm.r * pm.r + pm.dr * pm.dr).sqrt())
                    / (2.0 * h),
                (pp.tangent[1] * (pp.r * pp.r + pp.dr * pp.dr).sqrt()
                    - pm.tangent[1] * (pm.r * pm.r + pm.dr * pm.dr).sqrt())
                    / (2.0 * h),
            ];
            let dg = pn * pn + dx[0] * cpp[0] + dx[1] * cpp[1];
            let step = g / dg;
            theta -= step;
            if step.abs() < 1e-14 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::OutsideCollar(format!(
                "Newton inversion did not converge for x = ({:.4}, {:.4})",
                x[0], x[1]
            )));
        }
        let p = self.at(theta);
        let depth = (p.position[0] - x[0]) * p.normal[0] + (p.position[1] - x[1]) * p.normal[1];
        if !(0.0..self.r_kappa_min).contains(&depth) {
            // Allow boundary points themselves (depth == 0 within roundoff).
            if depth.abs() > 1e-12 {
                return Err(Error::OutsideCollar(format!(
                    "depth {depth:.4e} outside [0, {:.4})",
                    self.r_kappa_min
                )));
            }
        }
        Ok((depth.max(0.0), theta))
    }

    /// Rotate a Cartesian velocity into the local frame `(va, vb)` at `theta`;
    /// `va > 0` points into the domain.
    pub fn rotate_velocity(&self, theta: f64, w: [f64; 2]) -> [f64; 2] {
        let p = self.at(theta);
        [
            -(w[0] * p.normal[0] + w[1] * p.normal[1]),
            w[0] * p.tangent[0] + w[1] * p.tangent[1],
        ]
    }

    /// Inverse of `rotate_velocity`.
    pub fn rotate_velocity_back(&self, theta: f64, local: [f64; 2]) -> [f64; 2] {
        let p = self.at(theta);
        [
            -local[0] * p.normal[0] + local[1] * p.tangent[0],
            -local[0] * p.normal[1] + local[1] * p.tangent[1],
        ]
    }

    /// Whether `x` lies strictly inside the domain.
    pub fn contains(&self, x: [f64; 2]) -> bool {
        let theta = x[1].atan2(x[0]);
        let (r, _, _) = self.radius(theta);
        (x[0] * x[0] + x[1] * x[1]).sqrt() < r
    }
}
