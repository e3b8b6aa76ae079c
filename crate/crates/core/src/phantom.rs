//! Analytic objects with closed-form line and plane integrals, and the
//! numerical ray integral through a moving object.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::geometry::{Geometry, Roi};
use crate::math::{adaptive_simpson, ray_ball_interval, SimpsonSettings};
use crate::{Error, Mat3, Result, Vec3};

/// Amplitude below which a Gaussian tail counts as outside the support.
pub const GAUSSIAN_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Primitive {
    /// `amplitude · exp(-|x - center|² / width²)`.
    Gaussian { center: Vec3, amplitude: f64, width: f64 },
    /// `amplitude` on `{x : |S⁻¹ Rᵀ (x - center)| ≤ 1}`, `S = diag(semi_axes)`.
    Ellipsoid { center: Vec3, semi_axes: Vec3, rotation: Mat3, amplitude: f64 },
}

impl Primitive {
    pub fn center(&self) -> Vec3 {
        match *self {
            Primitive::Gaussian { center, .. } | Primitive::Ellipsoid { center, .. } => center,
        }
    }

    /// Radius of a ball about `center` outside which the primitive is zero
    /// (Gaussians: below [`GAUSSIAN_CUTOFF`]).
    pub fn support_radius(&self) -> f64 {
        match *self {
            Primitive::Gaussian { amplitude, width, .. } => {
                let ratio = amplitude.abs() / GAUSSIAN_CUTOFF;
                if ratio <= 1.0 {
                    0.0
                } else {
                    width * libm::sqrt(libm::log(ratio))
                }
            }
            Primitive::Ellipsoid { semi_axes, .. } => semi_axes.max(),
        }
    }

    pub fn eval(&self, x: &Vec3) -> f64 {
        match *self {
            Primitive::Gaussian { center, amplitude, width } => amplitude * libm::exp(-(x - center).norm_squared() / (width * width)),
            Primitive::Ellipsoid { center, semi_axes, rotation, amplitude } => {
                let u = (rotation.transpose() * (x - center)).component_div(&semi_axes);
                if u.norm_squared() <= 1.0 {
                    amplitude
                } else {
                    0.0
                }
            }
        }
    }

    /// Level function that is negative inside an ellipsoid; `None` for
    /// smooth primitives.
    pub fn level(&self, x: &Vec3) -> Option<f64> {
        match *self {
            Primitive::Gaussian { .. } => None,
            Primitive::Ellipsoid { center, semi_axes, rotation, .. } => {
                Some((rotation.transpose() * (x - center)).component_div(&semi_axes).norm_squared() - 1.0)
            }
        }
    }

    /// Parameter interval of the chord `p + tω` through an ellipsoid.
    pub fn chord(&self, p: &Vec3, omega: &Vec3) -> Option<(f64, f64)> {
        match *self {
            Primitive::Gaussian { .. } => None,
            Primitive::Ellipsoid { center, semi_axes, rotation, .. } => {
                let u = (rotation.transpose() * (p - center)).component_div(&semi_axes);
                let v = (rotation.transpose() * omega).component_div(&semi_axes);
                let a = v.norm_squared();
                let b = u.dot(&v);
                let disc = b * b - a * (u.norm_squared() - 1.0);
                if disc <= 0.0 {
                    return None;
                }
                let r = libm::sqrt(disc);
                Some(((-b - r) / a, (-b + r) / a))
            }
        }
    }

    pub fn line_integral(&self, p: &Vec3, omega: &Vec3) -> f64 {
        match *self {
            Primitive::Gaussian { center, amplitude, width } => {
                let d = p - center;
                let along = d.dot(omega);
                let d2 = (d.norm_squared() - along * along).max(0.0);
                amplitude * width * libm::sqrt(PI) * libm::exp(-d2 / (width * width))
            }
            Primitive::Ellipsoid { amplitude, .. } => match self.chord(p, omega) {
                Some((t0, t1)) => amplitude * (t1 - t0),
                None => 0.0,
            },
        }
    }

    /// `(f̂, ∂_p f̂, ∂²_p f̂)` for the plane `α·x = p`, `|α| = 1`. The second
    /// derivative of an ellipsoid omits the delta terms at tangency.
    pub fn plane_integral_derivatives(&self, alpha: &Vec3, p: f64) -> [f64; 3] {
        match *self {
            Primitive::Gaussian { center, amplitude, width } => {
                let u = p - alpha.dot(&center);
                let w2 = width * width;
                let e = libm::exp(-u * u / w2);
                [amplitude * PI * w2 * e, -2.0 * PI * amplitude * u * e, -2.0 * PI * amplitude * e * (1.0 - 2.0 * u * u / w2)]
            }
            Primitive::Ellipsoid { center, semi_axes, rotation, amplitude } => {
                let sigma = (rotation.transpose() * alpha).component_mul(&semi_axes).norm();
                let q = (p - alpha.dot(&center)) / sigma;
                if q.abs() >= 1.0 {
                    return [0.0; 3];
                }
                let abc = amplitude * PI * semi_axes.x * semi_axes.y * semi_axes.z;
                [abc * (1.0 - q * q) / sigma, -2.0 * abc * q / (sigma * sigma), -2.0 * abc / (sigma * sigma * sigma)]
            }
        }
    }
}

/// Sum of primitives.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Phantom {
    pub components: Vec<Primitive>,
}

impl Phantom {
    pub fn new(components: Vec<Primitive>) -> Self {
        Self { components }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn gaussian(center: Vec3, amplitude: f64, width: f64) -> Self {
        Self::new(alloc::vec![Primitive::Gaussian { center, amplitude, width }])
    }

    pub fn ball(center: Vec3, radius: f64, amplitude: f64) -> Self {
        Self::new(alloc::vec![Primitive::Ellipsoid { center, semi_axes: Vec3::repeat(radius), rotation: Mat3::identity(), amplitude }])
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Radius of a ball about the origin holding every component's support.
    pub fn support_radius(&self) -> f64 {
        self.components.iter().map(|c| c.center().norm() + c.support_radius()).fold(0.0, f64::max)
    }

    /// Ball about the mean component center holding every support.
    pub fn support_ball(&self) -> Roi {
        if self.components.is_empty() {
            return Roi { center: Vec3::zeros(), radius: 0.0 };
        }
        let center = self.components.iter().map(|c| c.center()).sum::<Vec3>() / self.components.len() as f64;
        let radius = self.components.iter().map(|c| (c.center() - center).norm() + c.support_radius()).fold(0.0, f64::max);
        Roi { center, radius }
    }

    pub fn eval(&self, x: &Vec3) -> f64 {
        self.components.iter().map(|c| c.eval(x)).sum()
    }

    pub fn line_integral(&self, p: &Vec3, omega: &Vec3) -> f64 {
        self.components.iter().map(|c| c.line_integral(p, omega)).sum()
    }

    pub fn plane_integral(&self, alpha: &Vec3, p: f64) -> f64 {
        self.components.iter().map(|c| c.plane_integral_derivatives(alpha, p)[0]).sum()
    }

    /// `∂_p f̂(α, p)`.
    pub fn radon_p_derivative(&self, alpha: &Vec3, p: f64) -> f64 {
        self.components.iter().map(|c| c.plane_integral_derivatives(alpha, p)[1]).sum()
    }

    /// `∂²_p f̂(α, p)` (smooth part).
    pub fn radon_p_second_derivative(&self, alpha: &Vec3, p: f64) -> f64 {
        self.components.iter().map(|c| c.plane_integral_derivatives(alpha, p)[2]).sum()
    }

    /// The object moved by `x ↦ rotation·x + translation`.
    pub fn rigidly_moved(&self, rotation: &Mat3, translation: &Vec3) -> Self {
        let components = self
            .components
            .iter()
            .map(|c| match *c {
                Primitive::Gaussian { center, amplitude, width } => Primitive::Gaussian { center: rotation * center + translation, amplitude, width },
                Primitive::Ellipsoid { center, semi_axes, rotation: r, amplitude } => {
                    Primitive::Ellipsoid { center: rotation * center + translation, semi_axes, rotation: rotation * r, amplitude }
                }
            })
            .collect();
        Self { components }
    }
}

/// Ball holding the object at every time: the phantom's ball grown by the
/// largest motion, or `U` when that is smaller and holds the phantom.
pub fn moving_support(geom: &Geometry, phantom: &Phantom) -> Roi {
    let own = phantom.support_ball();
    let grown = if geom.deformation.is_identity() { own.radius } else { own.radius + geom.deformation.max_displacement().min(2.0 * geom.roi.radius) };
    let inside_roi = (own.center - geom.roi.center).norm() + own.radius <= geom.roi.radius;
    if geom.roi.radius < grown && inside_roi {
        geom.roi
    } else {
        Roi { center: own.center, radius: grown }
    }
}

/// `X_{f_s}(β) = ∫₀^∞ A(s, ν(y)) |det d_y ν(y)| f(ν(y)) dt`, `y = z(s) + tβ`,
/// by adaptive Simpson. Jumps of ellipsoids (seen through `ν`) are located
/// and used as panel breaks.
pub fn dynamic_ray_integral(geom: &Geometry, phantom: &Phantom, s: f64, beta: &Vec3, settings: &SimpsonSettings) -> Result<f64> {
    if phantom.is_empty() {
        return Ok(0.0);
    }
    let z = geom.source_point(s)?;
    let moving = !geom.deformation.is_identity();
    let support = moving_support(geom, phantom);
    let Some((t0, t1)) = ray_ball_interval(&z, beta, &support.center, support.radius) else {
        return Ok(0.0);
    };
    let mut breaks: Vec<f64> = Vec::new();
    for c in phantom.components.iter().filter(|c| c.level(&Vec3::zeros()).is_some()) {
        if !moving {
            if let Some((a, b)) = c.chord(&z, beta) {
                breaks.push(a);
                breaks.push(b);
            }
            continue;
        }
        let level = |t: f64| c.level(&geom.deformation.nu(s, &(z + beta * t))).unwrap_or(1.0);
        let n = 400;
        let h = (t1 - t0) / n as f64;
        let mut prev = level(t0);
        for k in 1..=n {
            let tb = t0 + k as f64 * h;
            let cur = level(tb);
            if (prev < 0.0) != (cur < 0.0) {
                let (mut lo, mut hi, mut flo) = (tb - h, tb, prev);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    let fm = level(mid);
                    if (fm < 0.0) == (flo < 0.0) {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                }
                breaks.push(0.5 * (lo + hi));
            }
            prev = cur;
        }
    }
    breaks.sort_by(f64::total_cmp);
    let integrand = |t: f64| {
        let y = z + beta * t;
        if !moving {
            return geom.attenuation.value(s, &y) * phantom.eval(&y);
        }
        let x = geom.deformation.nu(s, &y);
        let fx = phantom.eval(&x);
        if fx == 0.0 {
            return 0.0;
        }
        let det = 1.0 / geom.deformation.d_psi(s, &x).determinant();
        geom.attenuation.value(s, &x) * det * fx
    };
    let r = adaptive_simpson(integrand, t0, t1, &breaks, settings);
    if !r.converged {
        return Err(Error::Accuracy { s, estimate: r.value, error: r.error });
    }
    Ok(r.value)
}
