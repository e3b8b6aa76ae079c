#![allow(dead_code)]

use std::sync::Arc;

use dynct_core::geometry::{BumpAttenuation, BumpField, BumpFlow, Geometry, Roi, Temporal, Trajectory, Twist, Unit};
use dynct_core::Vec3;
use proptest::prelude::*;

pub fn roi() -> Roi {
    Roi { center: Vec3::zeros(), radius: 2.0 }
}

pub fn static_two_circles() -> Geometry {
    Geometry::stationary(Trajectory::two_orthogonal_circles(3.0), roi()).unwrap()
}

pub fn static_circle() -> Geometry {
    Geometry::stationary(Trajectory::circle(3.0), roi()).unwrap()
}

/// Smooth non-rigid motion with a time-dependent weight.
pub fn generic(amplitude: f64) -> Geometry {
    let flow =
        BumpFlow::new(BumpField { center: Vec3::new(0.1, -0.1, 0.05), radius: 1.8 }, Vec3::new(1.0, 0.5, 0.3), Temporal { amplitude, omega: 1.0, s_ref: 0.0 })
            .unwrap();
    let weight =
        BumpAttenuation::new(BumpField { center: Vec3::new(-0.2, 0.0, 0.1), radius: 1.5 }, Temporal { amplitude: 0.2, omega: 1.0, s_ref: 0.3 }).unwrap();
    Geometry::new(Trajectory::two_orthogonal_circles(3.0), Arc::new(flow), Arc::new(weight), roi()).unwrap()
}

/// Rigid rotation about `axis` through the origin by `amplitude · sin s`.
pub fn rigid(amplitude: f64, axis: Vec3) -> Geometry {
    let t = Twist::rigid(Vec3::zeros(), axis, Temporal { amplitude, omega: 1.0, s_ref: 0.0 });
    Geometry::new_unchecked_support(Trajectory::two_orthogonal_circles(3.0), Arc::new(t), Arc::new(Unit), roi()).unwrap()
}

/// Deterministic pseudo-random unit vectors and points.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn uniform(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn unit(&mut self) -> Vec3 {
        loop {
            let v = Vec3::new(2.0 * self.uniform() - 1.0, 2.0 * self.uniform() - 1.0, 2.0 * self.uniform() - 1.0);
            let n = v.norm();
            if n > 0.1 && n <= 1.0 {
                return v / n;
            }
        }
    }

    pub fn in_ball(&mut self, r: f64) -> Vec3 {
        self.unit() * (r * self.uniform().cbrt())
    }
}

pub fn arb_point(r: f64) -> impl Strategy<Value = Vec3> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z)).prop_filter("inside", move |p| p.norm() < r)
}

pub fn arb_unit() -> impl Strategy<Value = Vec3> {
    (-1.0..1.0f64, 0.0..std::f64::consts::TAU).prop_map(|(c, p): (f64, f64)| {
        let r = (1.0 - c * c).sqrt();
        Vec3::new(r * p.cos(), r * p.sin(), c)
    })
}
