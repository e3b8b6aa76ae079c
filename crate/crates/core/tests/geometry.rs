mod common;

use std::sync::Arc;

use common::{arb_point, arb_unit, generic, rigid, static_circle};
use dynct_core::branches::{alpha_from_theta, theta_crit};
use dynct_core::geometry::{Affine, Geometry, Trajectory, Unit};
use dynct_core::{Mat3, Vec3};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn deformed_ray_passes_through_x(s in 0.0..12.5f64, x in arb_point(1.9)) {
        let g = generic(0.2);
        let p = g.deformed_ray_point(s, &x, 1.0).unwrap();
        prop_assert!((p - x).norm() < 1e-9);
    }

    #[test]
    fn points_on_one_ray_share_beta(s in 0.0..12.5f64, x in arb_point(1.5), t in 0.5..1.3f64) {
        let g = generic(0.2);
        let y = g.deformed_ray_point(s, &x, t).unwrap();
        let d = (g.beta(s, &y).unwrap() - g.beta(s, &x).unwrap()).norm();
        prop_assert!(d < 1e-9, "{}", d);
    }

    #[test]
    fn gamma_dot_is_the_tangent_of_the_deformed_ray(s in 0.0..12.5f64, x in arb_point(1.5)) {
        let g = generic(0.2);
        let h = 1e-5;
        let fd = (g.deformed_ray_point(s, &x, 1.0 + h).unwrap() - g.deformed_ray_point(s, &x, 1.0 - h).unwrap()) / (2.0 * h);
        let gd = g.gamma_dot(s, &x).unwrap();
        let err = (fd.normalize() - gd.normalize()).norm();
        prop_assert!(err < 1e-5, "{}", err);
    }

    #[test]
    fn s_derivative_fd_converges(s in 0.2..6.0f64, x in arb_point(1.5)) {
        let g = generic(0.2);
        let a = g.gamma_dot_s_deriv_fd(s, &x, 1e-3).unwrap();
        let b = g.gamma_dot_s_deriv_fd(s, &x, 5e-4).unwrap();
        prop_assert!((a - b).norm() <= 1e-6 * b.norm().max(1e-3));
    }

    #[test]
    fn critical_direction_is_orthogonal(s in 0.0..12.5f64, x in arb_point(1.5)) {
        let g = generic(0.2);
        let c = theta_crit(&g, s, &x).unwrap();
        let gd = g.gamma_dot(s, &x).unwrap();
        let gds = g.gamma_dot_s_deriv(s, &x).unwrap();
        prop_assert!(c.dot(&gd).abs() <= 1e-10 * gd.norm());
        prop_assert!(c.dot(&gds).abs() <= 1e-10 * gds.norm());
    }

    #[test]
    fn rigid_motion_preserves_volume(s in 0.0..12.5f64, y in arb_point(1.9), axis in arb_unit()) {
        let g = rigid(0.4, axis);
        prop_assert!((g.jacobian_det_nu(s, &y).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn alpha_is_orthogonal_to_the_ray_at_a_root(x in arb_point(1.5), theta in arb_unit()) {
        let g = generic(0.2);
        // Any s solving Θ·γ̇ = 0 on the first circle, by bisection on a fine scan.
        let f = |s: f64| theta.dot(&g.gamma_dot(s, &x).unwrap());
        let n = 400;
        let h = std::f64::consts::TAU / n as f64;
        let Some(i) = (0..n).find(|&i| f(i as f64 * h).signum() != f((i + 1) as f64 * h).signum()) else { return Ok(()); };
        let (mut lo, mut hi) = (i as f64 * h, (i + 1) as f64 * h);
        for _ in 0..80 {
            let m = 0.5 * (lo + hi);
            if f(m).signum() == f(lo).signum() { lo = m } else { hi = m }
        }
        let s = 0.5 * (lo + hi);
        let a = alpha_from_theta(&g, &x, &theta, s).unwrap();
        let b = g.beta(s, &x).unwrap();
        prop_assert!(a.dot(&b).abs() <= 1e-9 * a.norm());
    }
}

#[test]
fn static_jacobian_is_one() {
    let g = static_circle();
    assert_eq!(g.jacobian_det_nu(0.3, &Vec3::new(0.1, 0.2, 0.3)).unwrap(), 1.0);
}

#[test]
fn affine_fixture_examples() {
    let m = Mat3::from_diagonal(&Vec3::new(2.0, 1.0, 1.0));
    let g = Geometry::new_unchecked_support(Trajectory::circle(3.0), Arc::new(Affine::new(m).unwrap()), Arc::new(Unit), common::roi()).unwrap();
    assert!((g.jacobian_det_nu(0.0, &Vec3::new(0.3, 0.0, 0.0)).unwrap() - 0.5).abs() < 1e-15);
    let b = g.beta(0.0, &Vec3::x()).unwrap();
    assert!((b - Vec3::new(-1.0, 0.0, 0.0)).norm() < 1e-15);
    let a = alpha_from_theta(&g, &Vec3::zeros(), &Vec3::x(), std::f64::consts::FRAC_PI_2).unwrap();
    assert!((a - Vec3::new(0.5, 0.0, 0.0)).norm() < 1e-15, "{a:?}");
}

#[test]
fn static_alpha_is_theta() {
    let g = static_circle();
    let t = Vec3::new(0.3, -0.4, 0.5).normalize();
    assert_eq!(alpha_from_theta(&g, &Vec3::new(0.1, 0.0, 0.0), &t, 1.0).unwrap(), t);
}
