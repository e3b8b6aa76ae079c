//! Backprojection of the differentiated intermediate functions, the
//! unfiltered comparator, artifact-risk maps and the `ε` sweep.

mod quadrature;
mod sweep;
mod volume;
mod xstarx;

use alloc::vec::Vec;
use core::f64::consts::PI;

pub use crate::data::PhiCutoff;
pub use quadrature::{real_harmonics, SphereQuadrature};
pub use sweep::{convergence_sweep, SweepData, SweepRow};
pub use volume::{artifact_energy, error_metrics, ArtifactEnergy, ErrorMetrics, VoxelGrid};
pub use xstarx::{xstarx_reference, SmoothCutoff, XStarXInput, XStarXSettings};

use crate::branches::{normalize_weights, windowed_roots, AdmissibilityParams, ScanTable};
use crate::data::{q_t_derivative, DataSource, GrangeatSettings, QKind};
use crate::exec::Executor;
use crate::geometry::Geometry;
use crate::math::CompensatedSum;
use crate::{Error, Result, Vec3};

/// Reconstruction controls.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReconParams {
    pub admissibility: AdmissibilityParams,
    pub grangeat: GrangeatSettings,
    /// Step of the derivative along `Θ`; half a voxel when `None`.
    pub h: Option<f64>,
    /// Skip directions without an admissible root instead of failing.
    pub allow_holes: bool,
}

/// Value at one point and the solid-angle fraction skipped as holes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointValue {
    pub value: f64,
    pub deficit: f64,
}

/// Reconstructed volume with its coverage report.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub volume: VoxelGrid,
    /// Largest per-voxel solid-angle fraction without admissible roots.
    pub max_deficit: f64,
    /// Voxels with a nonzero deficit.
    pub holes: usize,
}

/// `(1/8π²) Σ_i w_i Σ_j N_j(x0, Θ_i) ∂_t Q_j(x0 + tΘ_i, Θ_i)` over one node of
/// each antipodal pair (weights doubled), in node order.
#[allow(clippy::too_many_arguments)]
pub fn reconstruct_point<D: DataSource + ?Sized>(
    data: &D,
    geom: &Geometry,
    nodes: &[Vec3],
    weights: &[f64],
    x0: &Vec3,
    h: f64,
    kind: QKind,
    params: &ReconParams,
) -> Result<PointValue> {
    let adm = &params.admissibility;
    let table = ScanTable::new(geom, x0, adm)?;
    let mut acc = CompensatedSum::new();
    let mut missing = 0.0;
    let mut total = 0.0;
    for (theta, w) in nodes.iter().zip(weights) {
        total += w;
        let partition = match normalize_weights(x0, theta, windowed_roots(geom, &table, theta, adm)?) {
            Ok(p) => p,
            Err(e @ Error::NoAdmissibleRoot { .. }) => {
                if params.allow_holes {
                    missing += w;
                    continue;
                }
                return Err(e);
            }
            Err(e) => return Err(e),
        };
        let mut inner = 0.0;
        for r in &partition.roots {
            inner += r.weight * q_t_derivative(data, geom, x0, theta, &r.root, h, kind, &params.grangeat, adm)?;
        }
        acc.add(w * inner);
    }
    Ok(PointValue { value: acc.value() / (8.0 * PI * PI), deficit: missing / total })
}

fn check_grid(grid: &VoxelGrid, geom: &Geometry, h: f64) -> Result<()> {
    for idx in 0..grid.len() {
        let p = grid.point(idx);
        if (p - geom.roi.center).norm() + h > geom.roi.radius {
            return Err(Error::OutsideRoi { point: [p.x, p.y, p.z] });
        }
    }
    Ok(())
}

fn run<D: DataSource + ?Sized, E: Executor>(
    grid: &VoxelGrid,
    quad: &SphereQuadrature,
    data: &D,
    geom: &Geometry,
    kind: QKind,
    params: &ReconParams,
    exec: &E,
) -> Result<Reconstruction> {
    let h = params.h.unwrap_or(0.5 * grid.spacing);
    check_grid(grid, geom, h)?;
    let (nodes, weights) = quad.half();
    let results = exec.map(grid.len(), |idx| reconstruct_point(data, geom, &nodes, &weights, &grid.point(idx), h, kind, params));
    let mut values = Vec::with_capacity(grid.len());
    let mut max_deficit: f64 = 0.0;
    let mut holes = 0;
    for r in results {
        let p = r?;
        values.push(p.value);
        max_deficit = max_deficit.max(p.deficit);
        if p.deficit > 0.0 {
            holes += 1;
        }
    }
    Ok(Reconstruction { volume: VoxelGrid { values, ..grid.clone() }, max_deficit, holes })
}

/// Reconstruction of a moving object on the voxel centers of `grid`.
pub fn reconstruct_dynamic<D: DataSource + ?Sized, E: Executor>(
    grid: &VoxelGrid,
    quad: &SphereQuadrature,
    data: &D,
    geom: &Geometry,
    params: &ReconParams,
    exec: &E,
) -> Result<Reconstruction> {
    run(grid, quad, data, geom, QKind::Dynamic, params, exec)
}

/// Static reconstruction using only rays inside the `φ` cone of each point.
pub fn reconstruct_static_localized<D: DataSource + ?Sized, E: Executor>(
    grid: &VoxelGrid,
    quad: &SphereQuadrature,
    data: &D,
    geom: &Geometry,
    phi: &PhiCutoff,
    params: &ReconParams,
    exec: &E,
) -> Result<Reconstruction> {
    if !geom.is_static() {
        return Err(Error::InvalidGeometry("localized reconstruction needs a static geometry".into()));
    }
    run(grid, quad, data, geom, QKind::StaticLocalized(*phi), params, exec)
}

/// Per voxel, the solid-angle fraction of directions whose admissible roots
/// all sit inside the arc windows (`W_arc < 1`); directions with no
/// admissible root count as at risk.
pub fn risk_map<E: Executor>(grid: &VoxelGrid, quad: &SphereQuadrature, geom: &Geometry, params: &AdmissibilityParams, exec: &E) -> Result<VoxelGrid> {
    let (nodes, weights) = quad.half();
    let results = exec.map(grid.len(), |idx| -> Result<f64> {
        let x0 = grid.point(idx);
        let table = ScanTable::new(geom, &x0, params)?;
        let mut risk = 0.0;
        let mut total = 0.0;
        for (theta, w) in nodes.iter().zip(&weights) {
            total += w;
            let roots = windowed_roots(geom, &table, theta, params)?;
            if roots.iter().all(|r| r.arc_window < 1.0) {
                risk += w;
            }
        }
        Ok(risk / total)
    });
    let values = results.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(VoxelGrid { values, ..grid.clone() })
}
