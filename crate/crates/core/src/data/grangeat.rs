use alloc::vec::Vec;
use core::f64::consts::PI;

use super::{Cone, DataSource};
use crate::branches::{continue_root, AdmissibilityParams, RootBranch};
use crate::geometry::Geometry;
use crate::math::{angle_between, orthonormal_frame, smooth_unit_step};
use crate::{Error, Result, Vec3};

/// Discretization of the great-circle derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrangeatSettings {
    /// Trapezoid nodes on the full circle.
    pub n_c: usize,
    /// Tilt step of the central difference (radians).
    pub tau_h: f64,
}

impl Default for GrangeatSettings {
    fn default() -> Self {
        Self { n_c: 180, tau_h: 0.005 }
    }
}

/// Angular cutoff `φ` around the direction from the source to `x0`: one
/// up to `θ₁`, zero beyond `θ₀ = acos(1 - eps2)`, C∞ in between.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiCutoff {
    pub eps1: f64,
    pub eps2: f64,
    theta0: f64,
    theta1: f64,
}

impl PhiCutoff {
    /// Requires `eps1 < d_min · θ₀ / 2` so that `φ ≡ 1` for every ray
    /// through the `eps1`-ball about `x0`.
    pub fn new(eps1: f64, eps2: f64, d_min: f64) -> Result<Self> {
        if !(eps2 > 0.0) {
            return Err(Error::InvalidParameter { name: "phi.eps2", reason: "must be positive".into() });
        }
        if !(eps1 >= 0.0) {
            return Err(Error::InvalidParameter { name: "phi.eps1", reason: "must be nonnegative".into() });
        }
        let theta0 = libm::acos((1.0 - eps2).max(-1.0));
        if eps1 >= d_min * theta0 / 2.0 {
            return Err(Error::InvalidParameter {
                name: "phi.eps1",
                reason: alloc::format!("{eps1} must be below d_min * acos(1 - eps2) / 2 = {}", d_min * theta0 / 2.0),
            });
        }
        let theta1 = libm::asin((theta0 / 2.0).min(1.0));
        Ok(Self { eps1, eps2, theta0, theta1 })
    }

    /// `φ ≡ 1`.
    pub fn unit() -> Self {
        Self { eps1: 0.0, eps2: 2.0, theta0: PI, theta1: PI }
    }

    pub fn is_unit(&self) -> bool {
        self.eps2 >= 2.0
    }

    /// Opening angle beyond which `φ` vanishes.
    pub fn cutoff_angle(&self) -> f64 {
        self.theta0
    }

    pub fn profile(&self, angle: f64) -> f64 {
        if self.is_unit() || angle <= self.theta1 {
            return 1.0;
        }
        if angle >= self.theta0 {
            return 0.0;
        }
        let x = (angle - self.theta1) / (self.theta0 - self.theta1);
        1.0 - smooth_unit_step(x)
    }

    pub fn weight(&self, z: &Vec3, x0: &Vec3, beta: &Vec3) -> f64 {
        if self.is_unit() {
            return 1.0;
        }
        let axis = (x0 - z).normalize();
        self.profile(angle_between(beta, &axis))
    }
}

struct Circle {
    alpha: Vec3,
    e1: Vec3,
    e2: Vec3,
    cone: Cone,
    axis_perp: f64,
    axis_along: f64,
}

impl Circle {
    fn new(alpha_hat: &Vec3, cone: Cone) -> Self {
        let perp = cone.axis - alpha_hat * alpha_hat.dot(&cone.axis);
        let axis_perp = perp.norm();
        let e1 = if axis_perp > 1e-12 { perp / axis_perp } else { orthonormal_frame(alpha_hat).0 };
        let e2 = alpha_hat.cross(&e1);
        Self { alpha: *alpha_hat, e1, e2, cone, axis_perp, axis_along: alpha_hat.dot(&cone.axis) }
    }

    /// Quadrature nodes and weights for the part of the tilted circle
    /// `α·β = sin τ` inside the cone. A full circle uses the `n_c`-point
    /// trapezoid rule; an arc `|θ| < θ_c` uses `θ = θ_c sin φ` with the
    /// trapezoid rule in `φ`, which stays spectrally accurate when the data
    /// vanish like a square root at the cone boundary.
    fn nodes(&self, tau: f64, n_c: usize, out: &mut Vec<Vec3>, weights: &mut Vec<f64>) {
        out.clear();
        weights.clear();
        let (st, ct) = libm::sincos(tau);
        let point = |theta: f64| {
            let (sn, cs) = libm::sincos(theta);
            (self.e1 * cs + self.e2 * sn) * ct + self.alpha * st
        };
        let r = if self.axis_perp * ct <= 1e-14 { f64::NEG_INFINITY } else { (self.cone.cos_half - st * self.axis_along) / (ct * self.axis_perp) };
        if r >= 1.0 {
            return;
        }
        if r <= -1.0 {
            let dtheta = 2.0 * PI / n_c as f64;
            for k in 0..n_c {
                let beta = point(k as f64 * dtheta);
                if self.cone.contains(&beta) {
                    out.push(beta);
                    weights.push(dtheta);
                }
            }
            return;
        }
        let theta_c = libm::acos(r);
        let m = (libm::ceil(n_c as f64 * theta_c / PI) as usize).max(16);
        let dphi = PI / m as f64;
        for k in 1..m {
            let (sp, cp) = libm::sincos(-0.5 * PI + k as f64 * dphi);
            out.push(point(theta_c * sp));
            weights.push(theta_c * cp * dphi);
        }
    }
}

fn circle_integral<D: DataSource + ?Sized>(
    data: &D,
    s: f64,
    circle: &Circle,
    tau: f64,
    settings: &GrangeatSettings,
    weight: Option<&dyn Fn(&Vec3) -> f64>,
    scratch: &mut Scratch,
) -> Result<f64> {
    let Scratch { nodes, weights, values } = scratch;
    circle.nodes(tau, settings.n_c, nodes, weights);
    if let Some(wf) = weight {
        let mut k = 0;
        while k < nodes.len() {
            let w = wf(&nodes[k]);
            if w == 0.0 {
                nodes.swap_remove(k);
                weights.swap_remove(k);
            } else {
                weights[k] *= w;
                k += 1;
            }
        }
    }
    values.clear();
    values.resize(nodes.len(), 0.0);
    data.rays(s, nodes, values)?;
    Ok(values.iter().zip(weights.iter()).map(|(v, w)| v * w).sum())
}

#[derive(Default)]
struct Scratch {
    nodes: Vec<Vec3>,
    weights: Vec<f64>,
    values: Vec<f64>,
}

fn plane_derivative<D: DataSource + ?Sized>(data: &D, s: f64, alpha: &Vec3, settings: &GrangeatSettings, weight: Option<&dyn Fn(&Vec3) -> f64>) -> Result<f64> {
    let norm = alpha.norm();
    if !(norm > 0.0) {
        return Err(Error::InvalidParameter { name: "alpha", reason: "plane normal must be nonzero".into() });
    }
    let alpha_hat = alpha / norm;
    let circle = Circle::new(&alpha_hat, data.support_cone(s)?);
    let mut scratch = Scratch::default();
    let mut diff = |h: f64| -> Result<f64> {
        let p = circle_integral(data, s, &circle, h, settings, weight, &mut scratch)?;
        let m = circle_integral(data, s, &circle, -h, settings, weight, &mut scratch)?;
        Ok((p - m) / (2.0 * h))
    };
    let coarse = diff(settings.tau_h)?;
    let fine = diff(0.5 * settings.tau_h)?;
    Ok(-(4.0 * fine - coarse) / 3.0 / (norm * norm))
}

/// `∫_{S²} X(s, β) δ'(α·β) dβ` from the data at one source position.
pub fn grangeat_plane_derivative<D: DataSource + ?Sized>(data: &D, s: f64, alpha: &Vec3, settings: &GrangeatSettings) -> Result<f64> {
    plane_derivative(data, s, alpha, settings, None)
}

/// As [`grangeat_plane_derivative`] with the data multiplied by `weight(β)`.
pub fn grangeat_plane_derivative_weighted<D: DataSource + ?Sized>(
    data: &D,
    s: f64,
    alpha: &Vec3,
    settings: &GrangeatSettings,
    weight: &dyn Fn(&Vec3) -> f64,
) -> Result<f64> {
    plane_derivative(data, s, alpha, settings, Some(weight))
}

/// `Q_j(x0, Θ)`: plane derivative at `(s_j, α_j)` divided by `A(s_j, x0)`.
pub fn q_dynamic<D: DataSource + ?Sized>(data: &D, geom: &Geometry, x0: &Vec3, theta: &Vec3, s: f64, settings: &GrangeatSettings) -> Result<f64> {
    let alpha = crate::branches::alpha_from_theta(geom, x0, theta, s)?;
    let g = grangeat_plane_derivative(data, s, &alpha, settings)?;
    Ok(g / geom.attenuation.value(s, x0))
}

/// Static plane derivative with the localizing cutoff `φ(·; x0)`.
pub fn q_static_weighted<D: DataSource + ?Sized>(data: &D, x0: &Vec3, alpha: &Vec3, s: f64, phi: &PhiCutoff, settings: &GrangeatSettings) -> Result<f64> {
    let z = data.source_position(s)?;
    let off = alpha.dot(&(x0 - z));
    if off.abs() > 1e-9 * alpha.norm() * (x0 - z).norm() {
        return Err(Error::InvalidParameter { name: "s", reason: alloc::format!("plane through the source misses x0 by {off}") });
    }
    if phi.is_unit() {
        return grangeat_plane_derivative(data, s, alpha, settings);
    }
    let w = |b: &Vec3| phi.weight(&z, x0, b);
    grangeat_plane_derivative_weighted(data, s, alpha, settings, &w)
}

/// Which intermediate function is differentiated along `Θ`.
#[derive(Debug, Clone, Copy)]
pub enum QKind {
    Dynamic,
    StaticLocalized(PhiCutoff),
}

/// `d/dt Q_j(x0 + tΘ, Θ)` at `t = 0` by a central difference of step `h`,
/// following the root `s_j` by continuation. When the branch folds away
/// within the step, the step is halved (at most six times).
#[allow(clippy::too_many_arguments)]
pub fn q_t_derivative<D: DataSource + ?Sized>(
    data: &D,
    geom: &Geometry,
    x0: &Vec3,
    theta: &Vec3,
    root: &RootBranch,
    h: f64,
    kind: QKind,
    settings: &GrangeatSettings,
    params: &AdmissibilityParams,
) -> Result<f64> {
    let mut step = h;
    for attempt in 0..7 {
        match q_difference(data, geom, x0, theta, root, step, kind, settings, params) {
            Err(Error::Continuation { .. }) if attempt < 6 => step *= 0.5,
            other => return other,
        }
    }
    unreachable!()
}

#[allow(clippy::too_many_arguments)]
fn q_difference<D: DataSource + ?Sized>(
    data: &D,
    geom: &Geometry,
    x0: &Vec3,
    theta: &Vec3,
    root: &RootBranch,
    h: f64,
    kind: QKind,
    settings: &GrangeatSettings,
    params: &AdmissibilityParams,
) -> Result<f64> {
    let mut q = [0.0; 2];
    for (i, sign) in [1.0, -1.0].into_iter().enumerate() {
        let xt = x0 + theta * (sign * h);
        if !geom.roi.contains(&xt) {
            return Err(Error::OutsideRoi { point: [xt.x, xt.y, xt.z] });
        }
        let st = continue_root(geom, &xt, theta, root, params)?;
        q[i] = match kind {
            QKind::Dynamic => q_dynamic(data, geom, &xt, theta, st, settings)?,
            QKind::StaticLocalized(phi) => q_static_weighted(data, &xt, theta, st, &phi, settings)?,
        };
    }
    Ok((q[0] - q[1]) / (2.0 * h))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_profile_shape() {
        let phi = PhiCutoff::new(0.1, 0.3, 1.2).unwrap();
        let t0 = phi.cutoff_angle();
        assert!((t0 - libm::acos(0.7)).abs() < 1e-15);
        assert_eq!(phi.profile(0.0), 1.0);
        assert_eq!(phi.profile(t0), 0.0);
        let mut last = 1.0;
        for i in 0..=100 {
            let v = phi.profile(t0 * i as f64 / 100.0);
            assert!(v <= last && (0.0..=1.0).contains(&v));
            last = v;
        }
        assert!(PhiCutoff::new(0.5, 0.3, 1.2).is_err());
        assert!(PhiCutoff::new(0.1, 2.0, 1.2).unwrap().is_unit());
    }
}
