//! The subcommands. Each writes its outputs under the configured output
//! directory and returns the written paths.

use std::path::{Path, PathBuf};

use dynct_core::branches::{arc_endpoint_limit, theta_crit, xi_crit_arc};
use dynct_core::data::{synthesize_dataset, AnalyticSource, DataSource, GriddedDataset};
use dynct_core::exec::Executor;
use dynct_core::geometry::Geometry;
use dynct_core::math::{angle_between, SimpsonSettings};
use dynct_core::reconstruct::{
    artifact_energy, convergence_sweep, error_metrics, reconstruct_dynamic, reconstruct_static_localized, risk_map, xstarx_reference, ArtifactEnergy,
    Reconstruction, SphereQuadrature, SweepData, VoxelGrid, XStarXInput,
};

use crate::config::{DataMode, ExperimentConfig, SweepMode};
use crate::error::{Error, Result};
use crate::export::{num, write_slices, Csv};
use crate::formats::{read_dataset, write_dataset, write_volume};
use crate::memo::MemoizedSource;

fn out_dir(cfg: &ExperimentConfig) -> Result<&Path> {
    let dir = cfg.output_dir.as_path();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(dir)
}

fn quadrature(cfg: &ExperimentConfig) -> Result<SphereQuadrature> {
    Ok(SphereQuadrature::new(cfg.quadrature_order)?)
}

fn load_dataset(cfg: &ExperimentConfig, geom: &Geometry, path: &Path) -> Result<GriddedDataset> {
    let set = read_dataset(path)?;
    if set.trajectory != geom.trajectory {
        return Err(Error::invalid("data.path", "dataset trajectory differs from the configured one"));
    }
    if set.roi != cfg.roi {
        return Err(Error::invalid("data.path", "dataset region of interest differs from the configured one"));
    }
    Ok(set)
}

/// Ray data as configured: analytic (optionally memoized) or read from file.
fn data_source(cfg: &ExperimentConfig, geom: &Geometry) -> Result<Box<dyn DataSource>> {
    Ok(match &cfg.data {
        DataMode::File(path) => Box::new(load_dataset(cfg, geom, path)?),
        DataMode::Analytic => {
            let src = AnalyticSource::new(geom.clone(), cfg.require_phantom()?.clone());
            if cfg.memoize {
                Box::new(MemoizedSource::new(src))
            } else {
                Box::new(src)
            }
        }
    })
}

fn run_reconstruction<E: Executor>(cfg: &ExperimentConfig, geom: &Geometry, data: &dyn DataSource, exec: &E) -> Result<Reconstruction> {
    let grid = cfg.voxel.grid();
    let quad = quadrature(cfg)?;
    let params = cfg.recon_params(geom)?;
    Ok(match cfg.phi(geom)? {
        None => reconstruct_dynamic(&grid, &quad, data, geom, &params, exec)?,
        Some(phi) => reconstruct_static_localized(&grid, &quad, data, geom, &phi, &params, exec)?,
    })
}

pub fn simulate<E: Executor>(cfg: &ExperimentConfig, exec: &E) -> Result<Vec<PathBuf>> {
    let geom = cfg.geometry()?;
    let set = synthesize_dataset(&geom, cfg.require_phantom()?, &cfg.detector, &SimpsonSettings::default(), exec)?;
    let path = out_dir(cfg)?.join("dataset.cbd");
    write_dataset(&path, &set)?;
    Ok(vec![path])
}

pub fn reconstruct<E: Executor>(cfg: &ExperimentConfig, exec: &E) -> Result<Vec<PathBuf>> {
    let geom = cfg.geometry()?;
    let data = data_source(cfg, &geom)?;
    let r = run_reconstruction(cfg, &geom, data.as_ref(), exec)?;
    let dir = out_dir(cfg)?;
    let vol = dir.join("recon.vol");
    write_volume(&vol, &r.volume)?;
    write_slices(dir, "recon", &r.volume)?;
    let mut csv = Csv::new(&["metric", "value"]);
    if !cfg.phantom.is_empty() {
        let truth = r.volume.sampled(|p| cfg.phantom.eval(p));
        let m = error_metrics(&r.volume, &truth)?;
        for (k, v) in [("rel_l2", m.rel_l2), ("max_abs", m.max_abs), ("interior_rel_l2", m.interior_rel_l2), ("interior_max_abs", m.interior_max_abs)] {
            csv.row(&[k.into(), num(v)]);
        }
    }
    csv.row(&["max_deficit".into(), num(r.max_deficit)]);
    csv.row(&["hole_voxels".into(), r.holes.to_string()]);
    let metrics = dir.join("recon_metrics.csv");
    csv.write(&metrics)?;
    Ok(vec![vol, dir.join("recon_xy.pgm"), dir.join("recon_xz.pgm"), dir.join("recon_yz.pgm"), metrics])
}

pub fn analyze_crit<E: Executor>(cfg: &ExperimentConfig, exec: &E) -> Result<Vec<PathBuf>> {
    let geom = cfg.geometry()?;
    let adm = cfg.admissibility(&geom)?;
    let risk = risk_map(&cfg.voxel.grid(), &quadrature(cfg)?, &geom, &adm, exec)?;
    let dir = out_dir(cfg)?;
    let vol = dir.join("risk.vol");
    write_volume(&vol, &risk)?;

    let mut arcs = Csv::new(&["point", "s", "sample", "t", "xi_x", "xi_y", "xi_z"]);
    let mut ends = Csv::new(&["point", "s", "crit_x", "crit_y", "crit_z", "limit_x", "limit_y", "limit_z", "angle", "diameter", "status"]);
    let times = geom.trajectory.sample_parameters(cfg.analyze_n_s);
    for (pi, x0) in cfg.analyze_points.iter().enumerate() {
        if !geom.roi.contains(x0) {
            return Err(Error::invalid("analyze.points", format!("point {pi} lies outside the region of interest")));
        }
        for &s in &times {
            let arc = xi_crit_arc(&geom, s, x0, adm.arc_samples)?;
            for (k, (t, xi)) in arc.ts.iter().zip(&arc.samples).enumerate() {
                arcs.row(&[pi.to_string(), num(s), k.to_string(), num(*t), num(xi.x), num(xi.y), num(xi.z)]);
            }
            let mut row = vec![pi.to_string(), num(s)];
            match (theta_crit(&geom, s, x0), arc_endpoint_limit(&geom, s, x0)) {
                (Ok(c), Ok(l)) => {
                    let ang = angle_between(&c, &l);
                    row.extend([c.x, c.y, c.z, l.x, l.y, l.z, ang.min(std::f64::consts::PI - ang), arc.diameter()].map(num));
                    row.push("ok".into());
                }
                (Err(e), _) | (_, Err(e)) => {
                    row.extend(std::iter::repeat_n(String::from("nan"), 8));
                    row.push(error_tag(&e).into());
                }
            }
            ends.row(&row);
        }
    }
    let arcs_path = dir.join("arcs.csv");
    let ends_path = dir.join("arc_endpoints.csv");
    arcs.write(&arcs_path)?;
    ends.write(&ends_path)?;
    Ok(vec![vol, arcs_path, ends_path])
}

fn error_tag(e: &dynct_core::Error) -> &'static str {
    match e {
        dynct_core::Error::DegenerateDirection => "degenerate-direction",
        dynct_core::Error::DegenerateLimit => "degenerate-limit",
        _ => "error",
    }
}

fn energy_row(csv: &mut Csv, name: &str, e: &ArtifactEnergy) {
    csv.row(&[name.into(), e.region_voxels.to_string(), e.shell_voxels.to_string(), num(e.region), num(e.shell), num(e.normalized)]);
}

pub fn compare_xstarx<E: Executor>(cfg: &ExperimentConfig, exec: &E) -> Result<Vec<PathBuf>> {
    let geom = cfg.geometry()?;
    let phantom = cfg.require_phantom()?;
    let grid = cfg.voxel.grid();
    let dataset;
    let input = match &cfg.data {
        DataMode::Analytic => XStarXInput::Phantom(phantom),
        DataMode::File(path) => {
            dataset = load_dataset(cfg, &geom, path)?;
            XStarXInput::Data(&dataset)
        }
    };
    let xx = xstarx_reference(&grid, input, &geom, &cfg.xstarx, exec)?;
    let dir = out_dir(cfg)?;
    let vol = dir.join("xstarx.vol");
    write_volume(&vol, &xx)?;

    let truth = grid.sampled(|p| phantom.eval(p));
    let peak = truth.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let distance = truth.jump_distance(0.1 * peak);
    let adm = cfg.admissibility(&geom)?;
    let risk = risk_map(&grid, &quadrature(cfg)?, &geom, &adm, exec)?;
    let region: Vec<bool> = risk.values.iter().map(|r| *r > cfg.risk_threshold).collect();

    let mut csv = Csv::new(&["volume", "region_voxels", "shell_voxels", "region_energy", "shell_energy", "normalized"]);
    let ex = artifact_energy(&xx.neg_laplacian(), &distance, &region)?;
    energy_row(&mut csv, "xstarx_neg_laplacian", &ex);
    if cfg.compare_reconstruct {
        let data = data_source(cfg, &geom)?;
        let r = run_reconstruction(cfg, &geom, data.as_ref(), exec)?;
        let eb = artifact_energy(&r.volume, &distance, &region)?;
        energy_row(&mut csv, "reconstruction", &eb);
        let ratio = if ex.normalized > 0.0 { eb.normalized / ex.normalized } else { f64::NAN };
        csv.row(&["ratio".into(), String::new(), String::new(), String::new(), String::new(), num(ratio)]);
    }
    let path = dir.join("artifact_energy.csv");
    csv.write(&path)?;
    Ok(vec![vol, path])
}

pub fn converge<E: Executor>(cfg: &ExperimentConfig, exec: &E) -> Result<Vec<PathBuf>> {
    let family = cfg.family().ok_or_else(|| Error::invalid("deformation.kind", "converge needs a bump or twist motion family"))?;
    let phantom = cfg.require_phantom()?;
    let trajectory = cfg.trajectory.build()?;
    let reference = cfg.geometry_at(0.0)?;
    let params = cfg.recon_params(&reference)?;
    let data = match cfg.sweep_mode {
        SweepMode::Analytic => SweepData::Analytic(SimpsonSettings::default()),
        SweepMode::Gridded => SweepData::Gridded(cfg.detector, SimpsonSettings::default()),
    };
    let grid: VoxelGrid = cfg.voxel.grid();
    let rows = convergence_sweep(&cfg.eps_list, &family, phantom, &trajectory, cfg.roi, &grid, &quadrature(cfg)?, &params, data, exec)?;
    let mut csv = Csv::new(&["eps", "rel_l2", "max_abs"]);
    for r in &rows {
        csv.row(&[num(r.eps), num(r.rel_l2), num(r.max_abs)]);
    }
    let path = out_dir(cfg)?.join("converge.csv");
    csv.write(&path)?;
    Ok(vec![path])
}
