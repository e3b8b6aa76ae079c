use alloc::vec::Vec;

use super::{error_metrics, reconstruct_dynamic, ReconParams, SphereQuadrature, VoxelGrid};
use crate::data::{synthesize_dataset, AnalyticSource, DetectorSpec};
use crate::exec::Executor;
use crate::geometry::{EpsilonFamily, Geometry, Roi, Trajectory};
use crate::math::SimpsonSettings;
use crate::phantom::Phantom;
use crate::Result;

/// How each sweep member obtains its data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepData {
    Analytic(SimpsonSettings),
    Gridded(DetectorSpec, SimpsonSettings),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub eps: f64,
    pub rel_l2: f64,
    pub max_abs: f64,
    pub recon: VoxelGrid,
}

/// Reconstructs `phantom` under every member of `family` listed in
/// `eps_list` and reports the error against the reference-time phantom.
#[allow(clippy::too_many_arguments)]
pub fn convergence_sweep<E: Executor>(
    eps_list: &[f64],
    family: &EpsilonFamily,
    phantom: &Phantom,
    trajectory: &Trajectory,
    roi: Roi,
    grid: &VoxelGrid,
    quad: &SphereQuadrature,
    params: &ReconParams,
    data: SweepData,
    exec: &E,
) -> Result<Vec<SweepRow>> {
    let truth = grid.sampled(|p| phantom.eval(p));
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let (deformation, attenuation) = family.at(eps)?;
        let geom = Geometry::new(trajectory.clone(), deformation, attenuation, roi)?;
        let recon = match data {
            SweepData::Analytic(simpson) => {
                let source = AnalyticSource::new(geom.clone(), phantom.clone()).with_simpson(simpson);
                reconstruct_dynamic(grid, quad, &source, &geom, params, exec)?
            }
            SweepData::Gridded(spec, simpson) => {
                let set = synthesize_dataset(&geom, phantom, &spec, &simpson, exec)?;
                reconstruct_dynamic(grid, quad, &set, &geom, params, exec)?
            }
        };
        let m = error_metrics(&recon.volume, &truth)?;
        rows.push(SweepRow { eps, rel_l2: m.rel_l2, max_abs: m.max_abs, recon: recon.volume });
    }
    Ok(rows)
}
