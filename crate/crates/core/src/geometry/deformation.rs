//! Deformation families `ψ(s, ·)` with inverses `ν(s, ·)`.
//!
//! Every deformation maps reference-time positions `x` to time-`s`
//! positions `y = ψ(s, x)`. Jacobians are closed form where the fixture
//! allows it; otherwise the trait defaults fall back to central differences.

use alloc::vec::Vec;

use crate::math::rotation_about;
use crate::{Mat3, Vec3};

/// Spatial step used by the finite-difference defaults.
pub const FD_STEP_X: f64 = 1e-5;
/// Temporal step used by the finite-difference defaults.
pub const FD_STEP_S: f64 = 1e-5;

pub trait Deformation: Send + Sync + core::fmt::Debug {
    fn psi(&self, s: f64, x: &Vec3) -> Vec3;
    fn nu(&self, s: f64, y: &Vec3) -> Vec3;

    /// `d_x ψ(s, x)`.
    fn d_psi(&self, s: f64, x: &Vec3) -> Mat3 {
        let mut m = Mat3::zeros();
        for k in 0..3 {
            let mut e = Vec3::zeros();
            e[k] = FD_STEP_X;
            let col = (self.psi(s, &(x + e)) - self.psi(s, &(x - e))) / (2.0 * FD_STEP_X);
            m.set_column(k, &col);
        }
        m
    }

    /// `∂_s ψ(s, x)`.
    fn d_psi_ds(&self, s: f64, x: &Vec3) -> Vec3 {
        (self.psi(s + FD_STEP_S, x) - self.psi(s - FD_STEP_S, x)) / (2.0 * FD_STEP_S)
    }

    /// `∂_s d_x ψ(s, x)` when available in closed form.
    fn d_psi_ds_jacobian(&self, _s: f64, _x: &Vec3) -> Option<Mat3> {
        None
    }

    /// True when `d_psi`, `d_psi_ds` and `d_psi_ds_jacobian` are closed form.
    fn is_analytic(&self) -> bool {
        false
    }

    fn is_identity(&self) -> bool {
        false
    }

    /// Upper bound on `|ψ(s, x) - x|`.
    fn max_displacement(&self) -> f64;
}

/// `ψ(s, x) = x`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Deformation for Identity {
    fn psi(&self, _s: f64, x: &Vec3) -> Vec3 {
        *x
    }
    fn nu(&self, _s: f64, y: &Vec3) -> Vec3 {
        *y
    }
    fn d_psi(&self, _s: f64, _x: &Vec3) -> Mat3 {
        Mat3::identity()
    }
    fn d_psi_ds(&self, _s: f64, _x: &Vec3) -> Vec3 {
        Vec3::zeros()
    }
    fn d_psi_ds_jacobian(&self, _s: f64, _x: &Vec3) -> Option<Mat3> {
        Some(Mat3::zeros())
    }
    fn is_analytic(&self) -> bool {
        true
    }
    fn is_identity(&self) -> bool {
        true
    }
    fn max_displacement(&self) -> f64 {
        0.0
    }
}

/// Time-independent linear map `ψ(s, x) = M x`. Not the identity outside
/// any bounded set, so only useful as a test fixture.
#[derive(Debug, Clone, Copy)]
pub struct Affine {
    m: Mat3,
    m_inv: Mat3,
}

impl Affine {
    pub fn new(m: Mat3) -> Option<Self> {
        m.try_inverse().map(|m_inv| Self { m, m_inv })
    }
}

impl Deformation for Affine {
    fn psi(&self, _s: f64, x: &Vec3) -> Vec3 {
        self.m * x
    }
    fn nu(&self, _s: f64, y: &Vec3) -> Vec3 {
        self.m_inv * y
    }
    fn d_psi(&self, _s: f64, _x: &Vec3) -> Mat3 {
        self.m
    }
    fn d_psi_ds(&self, _s: f64, _x: &Vec3) -> Vec3 {
        Vec3::zeros()
    }
    fn d_psi_ds_jacobian(&self, _s: f64, _x: &Vec3) -> Option<Mat3> {
        Some(Mat3::zeros())
    }
    fn is_analytic(&self) -> bool {
        true
    }
    fn max_displacement(&self) -> f64 {
        f64::INFINITY
    }
}

/// Temporal profile `a(s) = amplitude · sin(ω (s - s_ref))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Temporal {
    pub amplitude: f64,
    pub omega: f64,
    pub s_ref: f64,
}

impl Temporal {
    pub fn value(&self, s: f64) -> f64 {
        self.amplitude * libm::sin(self.omega * (s - self.s_ref))
    }
    pub fn derivative(&self, s: f64) -> f64 {
        self.amplitude * self.omega * libm::cos(self.omega * (s - self.s_ref))
    }
    pub fn max_abs(&self) -> f64 {
        self.amplitude.abs()
    }
}

/// C∞ bump `exp(1 - 1/(1 - r²))` for `r < 1`, zero otherwise; equals 1 at 0.
#[inline]
pub fn bump(r2: f64) -> f64 {
    if r2 >= 1.0 {
        0.0
    } else {
        libm::exp(1.0 - 1.0 / (1.0 - r2))
    }
}

/// d bump / d(r²).
#[inline]
fn bump_dr2(r2: f64) -> f64 {
    if r2 >= 1.0 {
        0.0
    } else {
        let q = 1.0 - r2;
        -bump(r2) / (q * q)
    }
}

/// Smooth localized bump field `w(x) = bump(|x - c|² / ρ²)` and its gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpField {
    pub center: Vec3,
    pub radius: f64,
}

impl BumpField {
    #[inline]
    pub fn value(&self, x: &Vec3) -> f64 {
        bump((x - self.center).norm_squared() / (self.radius * self.radius))
    }

    #[inline]
    pub fn value_and_gradient(&self, x: &Vec3) -> (f64, Vec3) {
        let r = x - self.center;
        let inv = 1.0 / (self.radius * self.radius);
        let r2 = r.norm_squared() * inv;
        if r2 >= 1.0 {
            return (0.0, Vec3::zeros());
        }
        (bump(r2), r * (2.0 * inv * bump_dr2(r2)))
    }

    /// `max |∇w|`, located by a dense radial scan of the profile.
    pub fn max_gradient(&self) -> f64 {
        let mut best: f64 = 0.0;
        for i in 1..4000 {
            let r = i as f64 / 4000.0;
            best = best.max((2.0 * r * bump_dr2(r * r)).abs());
        }
        best / self.radius
    }
}

/// Localized non-rigid flow `ψ(s, x) = x + a(s) w(x) d`.
///
/// A diffeomorphism as long as `|a| max|∇w · d| < 1`; the inverse solves a
/// scalar equation along `d` by Newton's method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpFlow {
    pub field: BumpField,
    pub direction: Vec3,
    pub temporal: Temporal,
}

impl BumpFlow {
    pub fn new(field: BumpField, direction: Vec3, temporal: Temporal) -> Result<Self, &'static str> {
        let flow = Self { field, direction, temporal };
        if flow.temporal.max_abs() * flow.field.max_gradient() * direction.norm() >= 0.9 {
            return Err("bump flow is too strong to stay a diffeomorphism");
        }
        Ok(flow)
    }
}

impl Deformation for BumpFlow {
    fn psi(&self, s: f64, x: &Vec3) -> Vec3 {
        x + self.direction * (self.temporal.value(s) * self.field.value(x))
    }

    fn nu(&self, s: f64, y: &Vec3) -> Vec3 {
        let a = self.temporal.value(s);
        if a == 0.0 {
            return *y;
        }
        // x = y - λ d with λ = a w(y - λ d).
        let mut lambda = a * self.field.value(y);
        for _ in 0..50 {
            let x = y - self.direction * lambda;
            let (w, g) = self.field.value_and_gradient(&x);
            let h = lambda - a * w;
            let dh = 1.0 + a * g.dot(&self.direction);
            let step = h / dh;
            lambda -= step;
            if step.abs() <= 1e-16 * (1.0 + lambda.abs()) {
                break;
            }
        }
        y - self.direction * lambda
    }

    fn d_psi(&self, s: f64, x: &Vec3) -> Mat3 {
        let (_, g) = self.field.value_and_gradient(x);
        Mat3::identity() + self.direction * g.transpose() * self.temporal.value(s)
    }

    fn d_psi_ds(&self, s: f64, x: &Vec3) -> Vec3 {
        self.direction * (self.temporal.derivative(s) * self.field.value(x))
    }

    fn d_psi_ds_jacobian(&self, s: f64, x: &Vec3) -> Option<Mat3> {
        let (_, g) = self.field.value_and_gradient(x);
        Some(self.direction * g.transpose() * self.temporal.derivative(s))
    }

    fn is_analytic(&self) -> bool {
        true
    }

    fn max_displacement(&self) -> f64 {
        self.temporal.max_abs() * self.direction.norm()
    }
}

/// Rotation about `axis` through `center` by the angle `a(s) w(|x - c|)`.
///
/// Volume preserving; the inverse is the opposite rotation because the
/// rotation leaves `|x - c|` unchanged. With `radius = ∞` the motion is a
/// rigid rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Twist {
    pub center: Vec3,
    pub axis: Vec3,
    /// Support radius of the angular profile; `f64::INFINITY` for rigid.
    pub radius: f64,
    pub temporal: Temporal,
}

impl Twist {
    pub fn rigid(center: Vec3, axis: Vec3, temporal: Temporal) -> Self {
        Self { center, axis: axis.normalize(), radius: f64::INFINITY, temporal }
    }

    fn profile(&self, r2: f64) -> (f64, f64) {
        if self.radius.is_infinite() {
            (1.0, 0.0)
        } else {
            let inv = 1.0 / (self.radius * self.radius);
            (bump(r2 * inv), bump_dr2(r2 * inv) * inv)
        }
    }

    fn cross_matrix(&self) -> Mat3 {
        let a = &self.axis;
        Mat3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0)
    }
}

impl Deformation for Twist {
    fn psi(&self, s: f64, x: &Vec3) -> Vec3 {
        let r = x - self.center;
        let (w, _) = self.profile(r.norm_squared());
        self.center + rotation_about(&self.axis, self.temporal.value(s) * w) * r
    }

    fn nu(&self, s: f64, y: &Vec3) -> Vec3 {
        let r = y - self.center;
        let (w, _) = self.profile(r.norm_squared());
        self.center + rotation_about(&self.axis, -self.temporal.value(s) * w) * r
    }

    fn d_psi(&self, s: f64, x: &Vec3) -> Mat3 {
        let r = x - self.center;
        let (w, dw) = self.profile(r.norm_squared());
        let a = self.temporal.value(s);
        let rot = rotation_about(&self.axis, a * w);
        // θ(x) = a w(|r|²); ∇θ = 2 a w' r.
        let grad_theta = r * (2.0 * a * dw);
        rot + self.cross_matrix() * rot * r * grad_theta.transpose()
    }

    fn d_psi_ds(&self, s: f64, x: &Vec3) -> Vec3 {
        let r = x - self.center;
        let (w, _) = self.profile(r.norm_squared());
        let rot = rotation_about(&self.axis, self.temporal.value(s) * w);
        self.cross_matrix() * rot * r * (self.temporal.derivative(s) * w)
    }

    fn d_psi_ds_jacobian(&self, s: f64, x: &Vec3) -> Option<Mat3> {
        let r = x - self.center;
        let (w, dw) = self.profile(r.norm_squared());
        let a = self.temporal.value(s);
        let da = self.temporal.derivative(s);
        let k = self.cross_matrix();
        let rot = rotation_about(&self.axis, a * w);
        let theta_s = da * w;
        let grad_theta = r * (2.0 * a * dw);
        let grad_theta_s = r * (2.0 * da * dw);
        let krx = k * rot * r;
        Some(k * rot * theta_s + (k * krx * theta_s) * grad_theta.transpose() + krx * grad_theta_s.transpose())
    }

    fn is_analytic(&self) -> bool {
        true
    }

    fn max_displacement(&self) -> f64 {
        if self.radius.is_infinite() {
            f64::INFINITY
        } else {
            // |R(θ) r - r| ≤ |θ| |r| ≤ max|a| ρ.
            self.temporal.max_abs().min(2.0) * self.radius
        }
    }
}

/// Displacement field sampled on a regular grid, trilinearly interpolated:
/// `ψ(s, x) = x + a(s) u(x)`. Jacobians come from central differences at the
/// grid spacing, so the map is only C⁰ in its first derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDisplacement {
    pub dims: [usize; 3],
    pub spacing: f64,
    pub origin: Vec3,
    /// x-fastest samples of the displacement vector.
    pub values: Vec<Vec3>,
    pub temporal: Temporal,
}

impl GridDisplacement {
    pub fn new(dims: [usize; 3], spacing: f64, origin: Vec3, values: Vec<Vec3>, temporal: Temporal) -> Result<Self, &'static str> {
        if dims.iter().any(|&d| d < 2) || spacing <= 0.0 {
            return Err("displacement grid needs at least two samples per axis and positive spacing");
        }
        if values.len() != dims[0] * dims[1] * dims[2] {
            return Err("displacement grid sample count does not match its dimensions");
        }
        if values.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err("displacement grid contains non-finite samples");
        }
        Ok(Self { dims, spacing, origin, values, temporal })
    }

    fn sample(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.values[i + self.dims[0] * (j + self.dims[1] * k)]
    }

    /// Trilinear displacement; zero outside the grid box.
    pub fn displacement(&self, x: &Vec3) -> Vec3 {
        let g = (x - self.origin) / self.spacing;
        let mut idx = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let n = self.dims[a];
            if !(g[a] >= 0.0 && g[a] <= (n - 1) as f64) {
                return Vec3::zeros();
            }
            let i = (libm::floor(g[a]) as usize).min(n - 2);
            idx[a] = i;
            frac[a] = g[a] - i as f64;
        }
        let mut out = Vec3::zeros();
        for dz in 0..2 {
            for dy in 0..2 {
                for dx in 0..2 {
                    let w = (if dx == 1 { frac[0] } else { 1.0 - frac[0] })
                        * (if dy == 1 { frac[1] } else { 1.0 - frac[1] })
                        * (if dz == 1 { frac[2] } else { 1.0 - frac[2] });
                    if w != 0.0 {
                        out += self.sample(idx[0] + dx, idx[1] + dy, idx[2] + dz) * w;
                    }
                }
            }
        }
        out
    }

    fn displacement_jacobian(&self, x: &Vec3) -> Mat3 {
        let h = 0.5 * self.spacing;
        let mut m = Mat3::zeros();
        for k in 0..3 {
            let mut e = Vec3::zeros();
            e[k] = h;
            m.set_column(k, &((self.displacement(&(x + e)) - self.displacement(&(x - e))) / (2.0 * h)));
        }
        m
    }
}

impl Deformation for GridDisplacement {
    fn psi(&self, s: f64, x: &Vec3) -> Vec3 {
        x + self.displacement(x) * self.temporal.value(s)
    }

    fn nu(&self, s: f64, y: &Vec3) -> Vec3 {
        let a = self.temporal.value(s);
        if a == 0.0 {
            return *y;
        }
        let mut x = *y - self.displacement(y) * a;
        for _ in 0..60 {
            let r = x + self.displacement(&x) * a - y;
            if r.norm() <= 1e-14 * (1.0 + y.norm()) {
                break;
            }
            let j = Mat3::identity() + self.displacement_jacobian(&x) * a;
            let step = j.try_inverse().map(|ji| ji * r).unwrap_or(r);
            x -= step;
        }
        x
    }

    fn d_psi(&self, s: f64, x: &Vec3) -> Mat3 {
        Mat3::identity() + self.displacement_jacobian(x) * self.temporal.value(s)
    }

    fn d_psi_ds(&self, s: f64, x: &Vec3) -> Vec3 {
        self.displacement(x) * self.temporal.derivative(s)
    }

    fn d_psi_ds_jacobian(&self, s: f64, x: &Vec3) -> Option<Mat3> {
        Some(self.displacement_jacobian(x) * self.temporal.derivative(s))
    }

    fn max_displacement(&self) -> f64 {
        self.temporal.max_abs() * self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_jacobian(d: &dyn Deformation, s: f64, x: &Vec3) -> Mat3 {
        let h = 1e-6;
        let mut m = Mat3::zeros();
        for k in 0..3 {
            let mut e = Vec3::zeros();
            e[k] = h;
            m.set_column(k, &((d.psi(s, &(x + e)) - d.psi(s, &(x - e))) / (2.0 * h)));
        }
        m
    }

    fn fd_s_jacobian(d: &dyn Deformation, s: f64, x: &Vec3) -> Mat3 {
        let h = 1e-5;
        (d.d_psi(s + h, x) - d.d_psi(s - h, x)) / (2.0 * h)
    }

    fn fixtures() -> Vec<alloc::boxed::Box<dyn Deformation>> {
        let t = Temporal { amplitude: 0.3, omega: 1.0, s_ref: 0.2 };
        alloc::vec![
            alloc::boxed::Box::new(BumpFlow::new(BumpField { center: Vec3::new(0.1, 0.0, -0.1), radius: 1.5 }, Vec3::new(0.6, 0.8, 0.0), t).unwrap())
                as alloc::boxed::Box<dyn Deformation>,
            alloc::boxed::Box::new(Twist { center: Vec3::new(0.0, 0.1, 0.0), axis: Vec3::new(0.0, 0.6, 0.8), radius: 1.8, temporal: t }),
        ]
    }

    #[test]
    fn analytic_jacobians_match_finite_differences() {
        let pts = [Vec3::new(0.3, -0.2, 0.5), Vec3::new(-0.7, 0.4, 0.1), Vec3::new(0.0, 0.9, -0.6)];
        for d in fixtures() {
            for (i, x) in pts.iter().enumerate() {
                let s = 0.4 + i as f64;
                let a = d.d_psi(s, x);
                let n = fd_jacobian(d.as_ref(), s, x);
                assert!((a - n).norm() < 1e-8, "{d:?}: {a} vs {n}");
                let ds = d.d_psi_ds(s, x);
                let nds = (d.psi(s + 1e-6, x) - d.psi(s - 1e-6, x)) / 2e-6;
                assert!((ds - nds).norm() < 1e-8);
                let dsj = d.d_psi_ds_jacobian(s, x).unwrap();
                let ndsj = fd_s_jacobian(d.as_ref(), s, x);
                assert!((dsj - ndsj).norm() < 1e-7, "{dsj} vs {ndsj}");
            }
        }
    }

    #[test]
    fn inverses_round_trip() {
        for d in fixtures() {
            for i in 0..50 {
                let f = i as f64;
                let x = Vec3::new(libm::sin(1.3 * f), libm::cos(0.7 * f), libm::sin(0.3 * f + 1.0)) * 1.2;
                let s = 0.1 * f;
                let back = d.nu(s, &d.psi(s, &x));
                assert!((back - x).norm() <= 1e-12 * (1.0 + x.norm()), "{d:?} {x} -> {back}");
            }
        }
    }

    #[test]
    fn identity_outside_support() {
        for d in fixtures() {
            let far = Vec3::new(2.5, 0.0, 0.0);
            assert_eq!(d.psi(0.7, &far), far);
            assert_eq!(d.nu(0.7, &far), far);
        }
    }

    #[test]
    fn twist_is_volume_preserving() {
        let d = Twist { center: Vec3::zeros(), axis: Vec3::z(), radius: 1.5, temporal: Temporal { amplitude: 0.8, omega: 1.0, s_ref: 0.0 } };
        for i in 0..20 {
            let x = Vec3::new(0.05 * i as f64, 0.3, -0.2);
            assert!((d.d_psi(1.0, &x).determinant() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn strong_bump_flow_rejected() {
        let t = Temporal { amplitude: 5.0, omega: 1.0, s_ref: 0.0 };
        assert!(BumpFlow::new(BumpField { center: Vec3::zeros(), radius: 1.0 }, Vec3::x(), t).is_err());
    }

    #[test]
    fn grid_displacement_round_trip() {
        let dims = [9, 9, 9];
        let origin = Vec3::new(-1.0, -1.0, -1.0);
        let spacing = 0.25;
        let mut values = Vec::new();
        for k in 0..9 {
            for j in 0..9 {
                for i in 0..9 {
                    let p = origin + Vec3::new(i as f64, j as f64, k as f64) * spacing;
                    let w = bump(p.norm_squared() / 0.9);
                    values.push(Vec3::new(0.1 * w, -0.05 * w, 0.0));
                }
            }
        }
        let g = GridDisplacement::new(dims, spacing, origin, values, Temporal { amplitude: 1.0, omega: 1.0, s_ref: 0.0 }).unwrap();
        let x = Vec3::new(0.2, -0.1, 0.3);
        let back = g.nu(1.0, &g.psi(1.0, &x));
        assert!((back - x).norm() < 1e-12);
        assert_eq!(g.psi(1.0, &Vec3::new(3.0, 0.0, 0.0)), Vec3::new(3.0, 0.0, 0.0));
    }
}
