//! Quick analytic invariant checks run by `dynct selftest`.

use std::path::Path;

use dynct_core::branches::{partition_weights, AdmissibilityParams};
use dynct_core::data::{grangeat_plane_derivative, synthesize_dataset, AnalyticSource, DetectorSpec, GrangeatSettings};
use dynct_core::exec::Sequential;
use dynct_core::geometry::{fibonacci_direction, Geometry, Roi, Trajectory};
use dynct_core::math::SimpsonSettings;
use dynct_core::phantom::Phantom;
use dynct_core::reconstruct::{reconstruct_dynamic, ReconParams, SphereQuadrature, VoxelGrid};
use dynct_core::Vec3;

use crate::error::{Error, Result};
use crate::formats::{dataset_bytes, parse_dataset, parse_volume, volume_bytes};
use crate::parallel::RayonExecutor;

type Check = fn() -> std::result::Result<String, String>;

fn fixture() -> Geometry {
    Geometry::stationary(Trajectory::two_orthogonal_circles(3.0), Roi { center: Vec3::zeros(), radius: 2.0 }).expect("static fixture")
}

fn quadrature() -> std::result::Result<String, String> {
    let q = SphereQuadrature::new(29).map_err(|e| e.to_string())?;
    let r = q.harmonic_residual(29);
    (r <= 1e-10).then(|| format!("residual {r:.1e}")).ok_or_else(|| format!("residual {r:.1e}"))
}

fn partition() -> std::result::Result<String, String> {
    let g = fixture();
    let adm = AdmissibilityParams::for_geometry(&g).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for k in 0..24 {
        let x0 = fibonacci_direction(k, 24) * 0.7;
        let theta = fibonacci_direction(5 * k + 3, 120);
        let p = partition_weights(&g, &x0, &theta, &adm).map_err(|e| e.to_string())?;
        let sum: f64 = p.roots.iter().map(|r| r.weight).sum();
        worst = worst.max((sum - 1.0).abs());
    }
    (worst <= 1e-12).then(|| format!("max |sum - 1| {worst:.1e}")).ok_or_else(|| format!("max |sum - 1| {worst:.1e}"))
}

fn grangeat() -> std::result::Result<String, String> {
    let g = fixture();
    let ph = Phantom::gaussian(Vec3::new(0.1, -0.2, 0.05), 1.0, 0.5);
    let src = AnalyticSource::new(g.clone(), ph.clone());
    let settings = GrangeatSettings { n_c: 180, tau_h: 0.005 };
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let s = 0.3 + 0.6 * k as f64;
        let z = g.source_point(s).map_err(|e| e.to_string())?;
        let a = fibonacci_direction(k, 20);
        let v = grangeat_plane_derivative(&src, s, &a, &settings).map_err(|e| e.to_string())?;
        let oracle = -ph.radon_p_derivative(&a, a.dot(&z));
        worst = worst.max((v - oracle).abs() / oracle.abs().max(1e-3));
    }
    (worst <= 1e-3).then(|| format!("max rel err {worst:.1e}")).ok_or_else(|| format!("max rel err {worst:.1e}"))
}

fn roundtrip() -> std::result::Result<String, String> {
    let p = Path::new("selftest");
    let v = VoxelGrid::cube(3, -0.5, 0.5).sampled(|x| x.x.sin() + x.y * x.z);
    let back = parse_volume(p, &volume_bytes(p, &v).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let g = Geometry::stationary(Trajectory::circle(3.0), Roi { center: Vec3::zeros(), radius: 1.0 }).map_err(|e| e.to_string())?;
    let spec = DetectorSpec { n_u: 4, n_v: 3, n_s: 5, margin: 0.05 };
    let set = synthesize_dataset(&g, &Phantom::ball(Vec3::zeros(), 0.5, 1.0), &spec, &SimpsonSettings::default(), &Sequential).map_err(|e| e.to_string())?;
    let set_back = parse_dataset(p, &dataset_bytes(p, &set).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let same_bits = |a: &[f64], b: &[f64]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits());
    (back == v && same_bits(&back.values, &v.values) && set_back == set && same_bits(&set_back.values, &set.values))
        .then(|| "volume and dataset bit-exact".to_string())
        .ok_or_else(|| "roundtrip changed the data".to_string())
}

fn reconstruction_and_threads() -> std::result::Result<String, String> {
    let g = fixture();
    let src = AnalyticSource::new(g.clone(), Phantom::gaussian(Vec3::zeros(), 1.0, 0.5));
    let quad = SphereQuadrature::new(29).map_err(|e| e.to_string())?;
    let params = ReconParams {
        admissibility: AdmissibilityParams::for_geometry(&g).map_err(|e| e.to_string())?,
        grangeat: GrangeatSettings { n_c: 120, tau_h: 0.005 },
        h: Some(0.05),
        allow_holes: false,
    };
    let grid = VoxelGrid::zeros([2, 1, 1], 0.1, Vec3::new(-0.05, 0.0, 0.0));
    let one = RayonExecutor::new(1).map_err(|e| e.to_string())?;
    let two = RayonExecutor::new(2).map_err(|e| e.to_string())?;
    let a = reconstruct_dynamic(&grid, &quad, &src, &g, &params, &one).map_err(|e| e.to_string())?;
    let b = reconstruct_dynamic(&grid, &quad, &src, &g, &params, &two).map_err(|e| e.to_string())?;
    let truth = (-0.05f64 * 0.05 / 0.25).exp();
    let err = a.volume.values.iter().map(|v| (v - truth).abs() / truth).fold(0.0, f64::max);
    let same = a.volume.values.iter().zip(&b.volume.values).all(|(x, y)| x.to_bits() == y.to_bits());
    if !same {
        return Err("1 and 2 threads disagree".into());
    }
    (err <= 0.02).then(|| format!("rel err {err:.1e}, thread-count invariant")).ok_or_else(|| format!("rel err {err:.1e}"))
}

pub const CHECKS: &[(&str, Check)] = &[
    ("quadrature-exactness", quadrature),
    ("partition-normalization", partition),
    ("grangeat-identity", grangeat),
    ("file-roundtrip", roundtrip),
    ("reconstruction-and-determinism", reconstruction_and_threads),
];

/// Runs every check, writing one line per check to `out`.
pub fn run(out: &mut dyn std::io::Write) -> Result<()> {
    let mut failed = Vec::new();
    for (name, check) in CHECKS {
        let (status, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed.push(*name);
                ("FAIL", d)
            }
        };
        writeln!(out, "{status} {name}: {detail}").map_err(|e| Error::io("stdout", e))?;
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Selftest(format!("failed checks: {}", failed.join(", "))))
    }
}
