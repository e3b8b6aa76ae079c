mod common;

use std::f64::consts::PI;

use common::{generic, rigid, static_circle, static_two_circles, Lcg};
use dynct_core::branches::{alpha_from_theta, find_admissible_roots, AdmissibilityParams};
use dynct_core::data::{
    grangeat_plane_derivative, q_dynamic, q_static_weighted, q_t_derivative, AnalyticSource, DataSource, GrangeatSettings, PhiCutoff, QKind,
};
use dynct_core::math::SimpsonSettings;
use dynct_core::phantom::{dynamic_ray_integral, Phantom};
use dynct_core::{Mat3, Vec3};

const G: GrangeatSettings = GrangeatSettings { n_c: 180, tau_h: 0.005 };

#[test]
fn dynamic_ray_reduces_to_line_integral_when_static() {
    let g = static_two_circles();
    let ph = Phantom::gaussian(Vec3::new(0.2, -0.1, 0.3), 1.5, 0.4);
    let mut rng = Lcg(7);
    for _ in 0..20 {
        let s = 4.0 * PI * rng.uniform();
        let z = g.source_point(s).unwrap();
        let beta = (rng.in_ball(0.8) - z).normalize();
        let a = dynamic_ray_integral(&g, &ph, s, &beta, &SimpsonSettings::default()).unwrap();
        let b = ph.line_integral(&z, &beta);
        assert!((a - b).abs() <= 1e-6 * b.abs().max(1e-12), "{a} {b}");
    }
    let zero = dynamic_ray_integral(&g, &Phantom::empty(), 0.3, &-Vec3::x(), &SimpsonSettings::default()).unwrap();
    assert_eq!(zero, 0.0);
}

/// `f(ν(s, ·))` for a rigid motion is the phantom moved by `ψ(s, ·)`, whose
/// rotation part is read off from `ψ` at the unit vectors.
fn transported(g: &dynct_core::geometry::Geometry, ph: &Phantom, s: f64) -> Phantom {
    let t = g.deformation.psi(s, &Vec3::zeros());
    let cols: Vec<Vec3> = [Vec3::x(), Vec3::y(), Vec3::z()].iter().map(|e| g.deformation.psi(s, e) - t).collect();
    ph.rigidly_moved(&Mat3::from_columns(&cols), &t)
}

#[test]
fn rigid_motion_ray_matches_rotated_phantom() {
    let g = rigid(0.5, Vec3::new(0.2, 0.3, 1.0).normalize());
    let ph = Phantom::gaussian(Vec3::new(0.4, -0.2, 0.1), 1.0, 0.3);
    let mut rng = Lcg(11);
    for _ in 0..20 {
        let s = 4.0 * PI * rng.uniform();
        let z = g.source_point(s).unwrap();
        let beta = (rng.in_ball(0.7) - z).normalize();
        let a = dynamic_ray_integral(&g, &ph, s, &beta, &SimpsonSettings::default()).unwrap();
        let b = transported(&g, &ph, s).line_integral(&z, &beta);
        assert!((a - b).abs() <= 1e-6 * b.abs().max(1e-6), "{a} {b}");
    }
}

#[test]
fn plane_derivative_closed_form_target() {
    let g = static_circle();
    let w = 0.35;
    let src = AnalyticSource::new(g.clone(), Phantom::gaussian(Vec3::zeros(), 1.0, w));
    // Plane integrals of exp(-|x|²/w²) are π w² exp(-p²/w²).
    let alpha = Vec3::new(0.1, 0.0, 0.99f64.sqrt());
    let p = alpha.dot(&g.source_point(0.0).unwrap());
    let v = grangeat_plane_derivative(&src, 0.0, &alpha, &G).unwrap();
    let target = 2.0 * PI * p * (-p * p / (w * w)).exp();
    assert!((v - target).abs() <= 1e-3 * target, "{v} {target}");
}

#[test]
fn plane_derivative_vanishes_through_center_of_symmetric_phantom() {
    let g = static_circle();
    let src = AnalyticSource::new(g, Phantom::ball(Vec3::zeros(), 0.8, 1.0));
    let data_max = src.ray(0.7, &-src.source_position(0.7).unwrap().normalize()).unwrap();
    let z = src.source_position(0.7).unwrap();
    let alpha = z.cross(&Vec3::new(0.3, 0.1, 1.0)).normalize();
    let v = grangeat_plane_derivative(&src, 0.7, &alpha, &G).unwrap();
    assert!(v.abs() <= 1e-6 * data_max, "{v}");
}

#[test]
fn plane_derivative_matches_transported_phantom_under_rigid_motion() {
    let g = rigid(0.3, Vec3::new(1.0, -0.5, 0.4).normalize());
    let ph = Phantom::gaussian(Vec3::new(0.3, 0.2, -0.2), 1.0, 0.5);
    let src = AnalyticSource::new(g.clone(), ph.clone());
    let mut rng = Lcg(5);
    for _ in 0..12 {
        let s = 4.0 * PI * rng.uniform();
        let z = g.source_point(s).unwrap();
        let alpha = rng.unit();
        let oracle = -transported(&g, &ph, s).radon_p_derivative(&alpha, alpha.dot(&z));
        if oracle.abs() < 1e-2 {
            continue;
        }
        let v = grangeat_plane_derivative(&src, s, &alpha, &G).unwrap();
        assert!((v - oracle).abs() <= 1e-3 * oracle.abs(), "{v} {oracle}");
    }
}

fn root_for(g: &dynct_core::geometry::Geometry, x0: &Vec3, theta: &Vec3) -> f64 {
    let adm = AdmissibilityParams::for_geometry(g).unwrap();
    find_admissible_roots(g, x0, theta, &adm).unwrap()[0].s
}

#[test]
fn static_q_closed_forms() {
    let g = static_circle();
    let w = 0.35;
    let src = AnalyticSource::new(g.clone(), Phantom::gaussian(Vec3::zeros(), 1.0, w));
    let theta = Vec3::new(0.6, 0.0, 0.8);
    let s = root_for(&g, &Vec3::zeros(), &theta);
    assert!(q_dynamic(&src, &g, &Vec3::zeros(), &theta, s, &G).unwrap().abs() < 1e-9);
    let x0 = Vec3::new(0.5, 0.0, 0.0);
    let s = root_for(&g, &x0, &Vec3::x());
    let q = q_dynamic(&src, &g, &x0, &Vec3::x(), s, &G).unwrap();
    assert!((g.source_point(s).unwrap().x - 0.5).abs() < 1e-9);
    let target = PI * (-0.25 / (w * w)).exp();
    assert!((q - target).abs() <= 1e-6 * target, "{q} {target}");
}

/// Brute-force `∫ A(s, x) f(x) δ'_σ(α·(ψ(s, x) - z)) dx` on a cubic grid,
/// with Richardson extrapolation in the mollifier width σ.
fn mollified_plane_derivative(g: &dynct_core::geometry::Geometry, ph: &Phantom, center: Vec3, half: f64, s: f64, alpha: &Vec3) -> f64 {
    let z = g.source_point(s).unwrap();
    let n = 200;
    let h = 2.0 * half / n as f64;
    let sigmas = [0.05, 0.1];
    let mut sums = [0.0; 2];
    for i in 0..=n {
        for j in 0..=n {
            for k in 0..=n {
                let x = center + Vec3::new(-half + i as f64 * h, -half + j as f64 * h, -half + k as f64 * h);
                let f = ph.eval(&x);
                if f < 1e-14 {
                    continue;
                }
                let p = alpha.dot(&(g.deformation.psi(s, &x) - z));
                let w = g.attenuation.value(s, &x) * f;
                for (acc, sig) in sums.iter_mut().zip(sigmas) {
                    // δ'_σ(p) = -p / (σ³ √(2π)) exp(-p² / 2σ²)
                    *acc += w * (-p / (sig * sig * sig * (2.0 * PI).sqrt())) * (-p * p / (2.0 * sig * sig)).exp();
                }
            }
        }
    }
    let (fine, coarse) = (sums[0] * h * h * h, sums[1] * h * h * h);
    (4.0 * fine - coarse) / 3.0
}

#[test]
fn q_matches_mollified_volume_integral_under_generic_motion() {
    let g = generic(0.2);
    let c = Vec3::new(0.1, 0.0, -0.1);
    let ph = Phantom::gaussian(c, 1.0, 0.5);
    let src = AnalyticSource::new(g.clone(), ph.clone());
    let x0 = Vec3::new(0.3, 0.2, -0.1);
    let theta = Vec3::new(0.4, -0.3, 0.8).normalize();
    let s = root_for(&g, &x0, &theta);
    let q = q_dynamic(&src, &g, &x0, &theta, s, &G).unwrap();
    let alpha = alpha_from_theta(&g, &x0, &theta, s).unwrap();
    let oracle = mollified_plane_derivative(&g, &ph, c, 2.6, s, &alpha) / g.attenuation.value(s, &x0);
    assert!((q - oracle).abs() <= 1e-2 * oracle.abs(), "{q} {oracle}");
}

#[test]
fn unit_phi_reduces_to_plain_plane_derivative() {
    let g = static_two_circles();
    let src = AnalyticSource::new(g.clone(), Phantom::gaussian(Vec3::new(0.1, 0.2, 0.0), 1.0, 0.5));
    let x0 = Vec3::new(0.2, -0.1, 0.1);
    let theta = Vec3::new(0.3, 0.5, 0.8).normalize();
    let s = root_for(&g, &x0, &theta);
    let a = q_static_weighted(&src, &x0, &theta, s, &PhiCutoff::unit(), &G).unwrap();
    let b = q_dynamic(&src, &g, &x0, &theta, s, &G).unwrap();
    assert_eq!(a, b);
}

#[test]
fn phi_localizes_the_plane_derivative() {
    let g = static_two_circles();
    let x0 = Vec3::new(0.2, -0.1, 0.1);
    let theta = Vec3::new(0.3, 0.5, 0.8).normalize();
    let s = root_for(&g, &x0, &theta);
    let z = g.source_point(s).unwrap();
    let narrow = PhiCutoff::new(0.0, 0.05, g.d_min()).unwrap();
    // A small ball well outside the narrow cone around the ray through x0.
    let axis = (x0 - z).normalize();
    let off = (axis.cross(&theta)).normalize();
    let far = Phantom::ball(x0 + off * 1.2, 0.2, 1.0);
    let src = AnalyticSource::new(g.clone(), far);
    let v = q_static_weighted(&src, &x0, &theta, s, &narrow, &G).unwrap();
    assert!(v.abs() <= 1e-8, "{v}");

    // A compact Gaussian inside both cones: φ ≡ 1 on it.
    let near = Phantom::gaussian(x0, 1.0, 0.08);
    let src = AnalyticSource::new(g.clone(), near);
    let unit = q_static_weighted(&src, &x0, &theta, s, &PhiCutoff::unit(), &G).unwrap();
    for eps2 in [0.5, 1.0] {
        let phi = PhiCutoff::new(0.0, eps2, g.d_min()).unwrap();
        let v = q_static_weighted(&src, &x0, &theta, s, &phi, &G).unwrap();
        assert!((v - unit).abs() <= 1e-3 * unit.abs().max(1e-6), "{eps2}: {v} {unit}");
    }
}

#[test]
fn q_t_derivative_of_static_gaussian_is_two_pi() {
    let g = static_two_circles();
    let src = AnalyticSource::new(g.clone(), Phantom::gaussian(Vec3::zeros(), 1.0, 0.35));
    let adm = AdmissibilityParams::for_geometry(&g).unwrap();
    let mut rng = Lcg(3);
    let mut checked = 0;
    while checked < 6 {
        let theta = rng.unit();
        let Ok(roots) = find_admissible_roots(&g, &Vec3::zeros(), &theta, &adm) else { continue };
        for r in roots {
            let v = q_t_derivative(&src, &g, &Vec3::zeros(), &theta, &r, 0.02, QKind::Dynamic, &G, &adm).unwrap();
            assert!((v - 2.0 * PI).abs() <= 2e-2 * 2.0 * PI, "{v}");
            checked += 1;
        }
    }
    let empty = AnalyticSource::new(g.clone(), Phantom::empty());
    let r = find_admissible_roots(&g, &Vec3::zeros(), &Vec3::x(), &adm).unwrap()[0];
    assert_eq!(q_t_derivative(&empty, &g, &Vec3::zeros(), &Vec3::x(), &r, 0.02, QKind::Dynamic, &G, &adm).unwrap(), 0.0);
}

#[test]
fn q_t_derivative_converges_in_the_step() {
    let g = generic(0.05);
    let src = AnalyticSource::new(g.clone(), Phantom::gaussian(Vec3::new(0.1, 0.0, 0.0), 1.0, 0.35));
    let adm = AdmissibilityParams::for_geometry(&g).unwrap();
    let x0 = Vec3::new(0.2, 0.1, -0.1);
    let theta = Vec3::new(0.5, -0.2, 0.7).normalize();
    let r = find_admissible_roots(&g, &x0, &theta, &adm).unwrap()[0];
    let q = |h: f64| q_t_derivative(&src, &g, &x0, &theta, &r, h, QKind::Dynamic, &G, &adm).unwrap();
    let (a, b, c) = (q(0.08), q(0.04), q(0.02));
    // Central differences: successive changes shrink by about four.
    let ratio = (a - b).abs() / (b - c).abs();
    assert!((3.0..5.0).contains(&ratio), "{a} {b} {c} {ratio}");
}
