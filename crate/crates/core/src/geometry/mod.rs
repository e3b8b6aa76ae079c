//! Source trajectories, deformations and the derived ray quantities
//! `β(s, x)` and `γ̇(s, x) = d_xψ⁻¹ β`.

mod attenuation;
mod deformation;
mod family;
mod trajectory;

use alloc::sync::Arc;

pub use attenuation::{Attenuation, BumpAttenuation, Unit};
pub use deformation::{bump, Affine, BumpField, BumpFlow, Deformation, GridDisplacement, Identity, Temporal, Twist, FD_STEP_S, FD_STEP_X};
pub use family::{EpsilonFamily, MotionShape};
pub use trajectory::{Curve, Segment, SourceState, Trajectory};

use crate::{Error, Mat3, Result, Vec3};

/// Ball-shaped region of interest `U`. The object, the motion support and
/// every reconstruction point live inside it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Roi {
    pub center: Vec3,
    pub radius: f64,
}

impl Roi {
    pub fn contains(&self, x: &Vec3) -> bool {
        (x - self.center).norm() <= self.radius
    }
}

/// Everything evaluated at one `(s, x)`: source, deformed point and ray.
#[derive(Debug, Clone, Copy)]
pub struct RayFrame {
    pub state: SourceState,
    /// `ψ(s, x)`.
    pub y: Vec3,
    /// `|ψ(s, x) - z(s)|`.
    pub length: f64,
    pub beta: Vec3,
    /// `d_xψ(s, x)`.
    pub jacobian: Mat3,
    pub jacobian_inv: Mat3,
}

/// Scanner geometry: trajectory, object motion, attenuation weight and `U`.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub trajectory: Trajectory,
    pub deformation: Arc<dyn Deformation>,
    pub attenuation: Arc<dyn Attenuation>,
    pub roi: Roi,
    d_min: f64,
}

impl Geometry {
    /// Validates source clearance from `U`, that the motion is the identity
    /// just outside `U`, and that `det d_xψ > 0` on samples inside `U`.
    pub fn new(trajectory: Trajectory, deformation: Arc<dyn Deformation>, attenuation: Arc<dyn Attenuation>, roi: Roi) -> Result<Self> {
        let g = Self::new_unchecked_support(trajectory, deformation, attenuation, roi)?;
        let samples = g.trajectory.sample_parameters(64);
        for (i, &s) in samples.iter().enumerate() {
            for k in 0..32 {
                let dir = fibonacci_direction(k + 32 * i, 32 * samples.len());
                let outside = roi.center + dir * (roi.radius * 1.001);
                if (g.deformation.psi(s, &outside) - outside).norm() > 1e-12 * (1.0 + outside.norm()) {
                    return Err(Error::InvalidDeformation(alloc::format!("motion is not the identity outside U at s = {s}")));
                }
                for frac in [0.2, 0.6, 0.95] {
                    let x = roi.center + dir * (roi.radius * frac);
                    if g.deformation.d_psi(s, &x).determinant() <= 0.0 {
                        return Err(Error::InvalidDeformation(alloc::format!("d_x psi is not orientation preserving at s = {s}")));
                    }
                }
            }
        }
        Ok(g)
    }

    /// Same as [`Geometry::new`] but skips the motion-support check. Needed
    /// for linear test motions that are not the identity anywhere.
    pub fn new_unchecked_support(trajectory: Trajectory, deformation: Arc<dyn Deformation>, attenuation: Arc<dyn Attenuation>, roi: Roi) -> Result<Self> {
        if !(roi.radius > 0.0 && roi.radius.is_finite()) {
            return Err(Error::InvalidGeometry("U must have positive radius".into()));
        }
        if attenuation.lower_bound() <= 0.0 {
            return Err(Error::InvalidGeometry("attenuation weight must be bounded away from zero".into()));
        }
        let mut d_min = f64::INFINITY;
        for s in trajectory.sample_parameters(10_000) {
            let z = trajectory.position(s)?;
            d_min = d_min.min((z - roi.center).norm() - roi.radius);
        }
        if d_min <= 0.0 {
            return Err(Error::InvalidGeometry(alloc::format!("trajectory enters U (clearance {d_min})")));
        }
        Ok(Self { trajectory, deformation, attenuation, roi, d_min })
    }

    /// Static geometry: `ψ = id`, `A ≡ 1`.
    pub fn stationary(trajectory: Trajectory, roi: Roi) -> Result<Self> {
        Self::new(trajectory, Arc::new(Identity), Arc::new(Unit), roi)
    }

    pub fn d_min(&self) -> f64 {
        self.d_min
    }

    pub fn is_static(&self) -> bool {
        self.deformation.is_identity() && self.attenuation.is_unit()
    }

    pub fn source_point(&self, s: f64) -> Result<Vec3> {
        self.trajectory.position(s)
    }

    pub fn frame(&self, s: f64, x: &Vec3) -> Result<RayFrame> {
        let state = self.trajectory.state(s)?;
        self.frame_at(state, x)
    }

    pub fn frame_at(&self, state: SourceState, x: &Vec3) -> Result<RayFrame> {
        let y = self.deformation.psi(state.s, x);
        let d = y - state.z;
        let length = d.norm();
        let jacobian = self.deformation.d_psi(state.s, x);
        let jacobian_inv = jacobian.try_inverse().ok_or_else(|| Error::InvalidDeformation(alloc::format!("singular d_x psi at s = {}", state.s)))?;
        Ok(RayFrame { state, y, length, beta: d / length, jacobian, jacobian_inv })
    }

    pub fn beta(&self, s: f64, x: &Vec3) -> Result<Vec3> {
        let z = self.trajectory.position(s)?;
        let d = self.deformation.psi(s, x) - z;
        Ok(d / d.norm())
    }

    pub fn gamma_dot(&self, s: f64, x: &Vec3) -> Result<Vec3> {
        let f = self.frame(s, x)?;
        Ok(f.jacobian_inv * f.beta)
    }

    /// `∂_s β(s, x)` at fixed `x`.
    pub fn beta_s_deriv_at(&self, frame: &RayFrame, x: &Vec3) -> Vec3 {
        let v = self.deformation.d_psi_ds(frame.state.s, x) - frame.state.zdot;
        (v - frame.beta * frame.beta.dot(&v)) / frame.length
    }

    /// `(γ̇, ∂_s γ̇)` at `(s, x)`.
    pub fn gamma_dot_pair(&self, state: SourceState, x: &Vec3) -> Result<(Vec3, Vec3)> {
        let f = self.frame_at(state, x)?;
        let gd = f.jacobian_inv * f.beta;
        let beta_s = self.beta_s_deriv_at(&f, x);
        match self.deformation.d_psi_ds_jacobian(state.s, x) {
            Some(js) => Ok((gd, f.jacobian_inv * (beta_s - js * gd))),
            None => {
                let seg = &self.trajectory.segments()[state.segment];
                let h = 1e-4 * seg.length();
                Ok((gd, self.gamma_dot_s_deriv_fd_on(state.segment, state.s, x, h)?))
            }
        }
    }

    pub fn gamma_dot_s_deriv(&self, s: f64, x: &Vec3) -> Result<Vec3> {
        let state = self.trajectory.state(s)?;
        Ok(self.gamma_dot_pair(state, x)?.1)
    }

    /// Central difference of `γ̇` in `s` with step `h`.
    pub fn gamma_dot_s_deriv_fd(&self, s: f64, x: &Vec3, h: f64) -> Result<Vec3> {
        let k = self.trajectory.segment_of(s)?;
        self.gamma_dot_s_deriv_fd_on(k, s, x, h)
    }

    fn gamma_dot_s_deriv_fd_on(&self, segment: usize, s: f64, x: &Vec3, h: f64) -> Result<Vec3> {
        let seg = &self.trajectory.segments()[segment];
        if seg.endpoint_distance(s) <= h {
            return Err(Error::InsufficientDomain { s, h });
        }
        let gp = self.frame_at(self.trajectory.state_on(segment, s + h), x)?;
        let gm = self.frame_at(self.trajectory.state_on(segment, s - h), x)?;
        Ok((gp.jacobian_inv * gp.beta - gm.jacobian_inv * gm.beta) / (2.0 * h))
    }

    /// `γ_{s,x}(t) = ν(s, z(s) + t (ψ(s, x) - z(s)))`.
    pub fn deformed_ray_point(&self, s: f64, x: &Vec3, t: f64) -> Result<Vec3> {
        let z = self.trajectory.position(s)?;
        let y = self.deformation.psi(s, x);
        Ok(self.deformation.nu(s, &(z + (y - z) * t)))
    }

    /// `|det d_y ν(s, y)|`.
    pub fn jacobian_det_nu(&self, s: f64, y: &Vec3) -> Result<f64> {
        if self.deformation.is_identity() {
            return Ok(1.0);
        }
        let x = self.deformation.nu(s, y);
        let det = self.deformation.d_psi(s, &x).determinant();
        if !(det > 0.0) {
            return Err(Error::InvalidDeformation(alloc::format!("det d_x psi = {det} at s = {s}")));
        }
        Ok(1.0 / det)
    }
}

/// Quasi-uniform direction `k` of `n` on the unit sphere.
pub fn fibonacci_direction(k: usize, n: usize) -> Vec3 {
    let golden = core::f64::consts::PI * (3.0 - libm::sqrt(5.0));
    let z = 1.0 - (2.0 * k as f64 + 1.0) / n as f64;
    let r = libm::sqrt((1.0 - z * z).max(0.0));
    let (sn, cs) = libm::sincos(golden * k as f64);
    Vec3::new(r * cs, r * sn, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn roi() -> Roi {
        Roi { center: Vec3::zeros(), radius: 1.8 }
    }

    fn bump_geometry() -> Geometry {
        let flow = BumpFlow::new(
            BumpField { center: Vec3::new(0.1, -0.1, 0.0), radius: 1.5 },
            Vec3::new(0.3, 0.2, 0.1),
            Temporal { amplitude: 0.5, omega: 1.0, s_ref: 0.4 },
        )
        .unwrap();
        Geometry::new(Trajectory::circle(3.0), Arc::new(flow), Arc::new(Unit), roi()).unwrap()
    }

    #[test]
    fn static_beta_and_derivative() {
        let g = Geometry::stationary(Trajectory::circle(3.0), roi()).unwrap();
        let b = g.beta(0.0, &Vec3::zeros()).unwrap();
        assert!((b - Vec3::new(-1.0, 0.0, 0.0)).norm() < 1e-15);
        let b = g.beta(PI / 2.0, &Vec3::zeros()).unwrap();
        assert!((b - Vec3::new(0.0, -1.0, 0.0)).norm() < 1e-15);
        assert_eq!(g.gamma_dot(0.3, &Vec3::zeros()).unwrap(), g.beta(0.3, &Vec3::zeros()).unwrap());
        let d = g.gamma_dot_s_deriv(PI / 2.0, &Vec3::zeros()).unwrap();
        assert!((d - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-14);
        for i in 0..16 {
            let s = 0.4 * i as f64;
            let d = g.gamma_dot_s_deriv(s, &Vec3::zeros()).unwrap();
            assert!((d - Vec3::new(libm::sin(s), -libm::cos(s), 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn clearance_enforced() {
        assert!(Geometry::stationary(Trajectory::circle(1.5), roi()).is_err());
        let g = Geometry::stationary(Trajectory::circle(3.0), roi()).unwrap();
        assert!((g.d_min() - 1.2).abs() < 1e-12);
    }

    #[test]
    fn motion_must_vanish_outside_roi() {
        let wide = BumpFlow::new(BumpField { center: Vec3::zeros(), radius: 2.5 }, Vec3::x(), Temporal { amplitude: 0.3, omega: 1.0, s_ref: 0.0 }).unwrap();
        assert!(Geometry::new(Trajectory::circle(3.0), Arc::new(wide), Arc::new(Unit), roi()).is_err());
    }

    #[test]
    fn affine_fixture() {
        let m = Affine::new(Mat3::from_diagonal(&Vec3::new(2.0, 1.0, 1.0))).unwrap();
        let line = Trajectory::new(alloc::vec![Segment {
            a: -1.0,
            b: 1.0,
            periodic: false,
            curve: Curve::Line { start: Vec3::new(3.0, -1.0, 0.0), velocity: Vec3::y() },
        }])
        .unwrap();
        let g = Geometry::new_unchecked_support(line, Arc::new(m), Arc::new(Unit), Roi { center: Vec3::zeros(), radius: 1.0 }).unwrap();
        // z(0) = (3, 0, 0); ψ(1, 0, 0) = (2, 0, 0).
        let b = g.beta(0.0, &Vec3::x()).unwrap();
        assert!((b - Vec3::new(-1.0, 0.0, 0.0)).norm() < 1e-15);
        assert!((g.jacobian_det_nu(0.0, &Vec3::new(0.3, 0.2, 0.1)).unwrap() - 0.5).abs() < 1e-15);
        // Source at (0, 3, 0) seen from x = (0, 0, 0) gives β = (0, -1, 0).
        let line2 = Trajectory::new(alloc::vec![Segment {
            a: -1.0,
            b: 1.0,
            periodic: false,
            curve: Curve::Line { start: Vec3::new(-1.0, 3.0, 0.0), velocity: Vec3::x() },
        }])
        .unwrap();
        let g2 = Geometry::new_unchecked_support(line2, Arc::new(m), Arc::new(Unit), Roi { center: Vec3::zeros(), radius: 1.0 }).unwrap();
        let gd = g2.gamma_dot(0.0, &Vec3::zeros()).unwrap();
        assert!((gd - Vec3::new(0.0, -1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn gamma_dot_is_ray_tangent() {
        let g = bump_geometry();
        for i in 0..20 {
            let s = 0.3 * i as f64;
            let x = Vec3::new(0.5 * libm::sin(i as f64), 0.4 * libm::cos(0.7 * i as f64), 0.2);
            let h = 1e-6;
            let fd = (g.deformed_ray_point(s, &x, 1.0 + h).unwrap() - g.deformed_ray_point(s, &x, 1.0 - h).unwrap()) / (2.0 * h);
            let gd = g.gamma_dot(s, &x).unwrap();
            let angle = crate::math::angle_between(&fd, &gd);
            assert!(angle < 1e-5, "angle {angle}");
            // Points on the same deformed ray share β.
            let p = g.deformed_ray_point(s, &x, 0.8).unwrap();
            assert!((g.beta(s, &p).unwrap() - g.beta(s, &x).unwrap()).norm() < 1e-9);
            assert!((g.deformed_ray_point(s, &x, 1.0).unwrap() - x).norm() < 1e-12);
        }
    }

    #[test]
    fn analytic_s_derivative_matches_richardson() {
        let g = bump_geometry();
        for i in 0..10 {
            let s = 0.55 * i as f64 + 0.1;
            let x = Vec3::new(0.3, -0.2 + 0.05 * i as f64, 0.1);
            let a = g.gamma_dot_s_deriv(s, &x).unwrap();
            let h = 1e-4 * 2.0 * PI;
            let f1 = g.gamma_dot_s_deriv_fd(s, &x, h).unwrap();
            let f2 = g.gamma_dot_s_deriv_fd(s, &x, h / 2.0).unwrap();
            assert!((f1 - f2).norm() <= 1e-6 * f2.norm());
            assert!((a - f2).norm() <= 1e-6 * a.norm());
        }
    }

    #[test]
    fn fd_near_endpoint_rejected() {
        let line = Trajectory::polyline(&[Vec3::new(3.0, -3.0, 0.0), Vec3::new(3.0, 3.0, 0.0)]).unwrap();
        let g = Geometry::stationary(line, roi()).unwrap();
        assert!(matches!(g.gamma_dot_s_deriv_fd(1e-5, &Vec3::zeros(), 1e-4), Err(Error::InsufficientDomain { .. })));
    }

    #[test]
    fn twist_preserves_volume() {
        let t = Twist { center: Vec3::zeros(), axis: Vec3::z(), radius: 1.5, temporal: Temporal { amplitude: 0.7, omega: 1.0, s_ref: 0.0 } };
        let g = Geometry::new(Trajectory::circle(3.0), Arc::new(t), Arc::new(Unit), roi()).unwrap();
        for i in 0..20 {
            let y = Vec3::new(0.05 * i as f64, -0.3, 0.2);
            assert!((g.jacobian_det_nu(1.3, &y).unwrap() - 1.0).abs() < 1e-10);
        }
        let id = Geometry::stationary(Trajectory::circle(3.0), roi()).unwrap();
        assert_eq!(id.jacobian_det_nu(0.2, &Vec3::x()).unwrap(), 1.0);
    }
}
