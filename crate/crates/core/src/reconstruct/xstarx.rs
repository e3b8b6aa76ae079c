use alloc::vec::Vec;

use super::VoxelGrid;
use crate::data::{moving_support, DataSource};
use crate::exec::Executor;
use crate::geometry::{Geometry, Segment};
use crate::math::{ray_ball_interval, smooth_unit_step, CompensatedSum};
use crate::phantom::Phantom;
use crate::{Result, Vec3};

/// Smooth compactly supported window on `[lo, hi]`, flat in the middle,
/// with C∞ ramps covering `ramp` of the interval at each end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothCutoff {
    pub ramp: f64,
}

impl SmoothCutoff {
    pub fn eval(&self, x: f64, lo: f64, hi: f64) -> f64 {
        if x <= lo || x >= hi {
            return 0.0;
        }
        let w = self.ramp * (hi - lo);
        if w <= 0.0 {
            return 1.0;
        }
        smooth_unit_step((x - lo) / w) * smooth_unit_step((hi - x) / w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XStarXSettings {
    /// Source nodes per segment.
    pub n_s: usize,
    /// Nodes along each ray.
    pub n_t: usize,
    /// `χ₁` on open segments; closed segments use `χ₁ ≡ 1`.
    pub chi1: SmoothCutoff,
    /// `χ₂` on the padded interval where the ray meets the object support.
    pub chi2: SmoothCutoff,
    /// Padding of the `χ₂` interval as a fraction of the chord.
    pub chi2_padding: f64,
}

impl Default for XStarXSettings {
    fn default() -> Self {
        Self { n_s: 256, n_t: 64, chi1: SmoothCutoff { ramp: 0.1 }, chi2: SmoothCutoff { ramp: 0.15 }, chi2_padding: 0.25 }
    }
}

/// What the comparator integrates along each ray.
#[derive(Clone, Copy)]
pub enum XStarXInput<'a> {
    /// `f(ν(s, ·))` sampled along the deformed ray.
    Phantom(&'a Phantom),
    /// The measured ray value, standing in for the whole inner integral.
    Data(&'a dyn DataSource),
}

fn source_nodes(seg: &Segment, settings: &XStarXSettings) -> Vec<(f64, f64)> {
    let len = seg.length();
    if seg.periodic {
        let n = settings.n_s.max(1);
        let h = len / n as f64;
        return (0..n).map(|i| (seg.a + i as f64 * h, h)).collect();
    }
    let n = settings.n_s.max(2);
    let h = len / n as f64;
    (1..n)
        .map(|i| {
            let s = seg.a + i as f64 * h;
            (s, h * settings.chi1.eval(s, seg.a, seg.b))
        })
        .filter(|&(_, w)| w > 0.0)
        .collect()
}

fn ray_integral(geom: &Geometry, phantom: &Phantom, support: &crate::geometry::Roi, s: f64, z: &Vec3, x0: &Vec3, settings: &XStarXSettings) -> Result<f64> {
    let y0 = geom.deformation.psi(s, x0);
    let dir = y0 - z;
    let len = dir.norm();
    let Some((t0, t1)) = ray_ball_interval(z, &(dir / len), &support.center, support.radius) else {
        return Ok(0.0);
    };
    let pad = settings.chi2_padding * (t1 - t0);
    let lo = ((t0 - pad) / len).max(0.5 * t0 / len);
    let hi = (t1 + pad) / len;
    let n = settings.n_t.max(2);
    let h = (hi - lo) / n as f64;
    let mut acc = 0.0;
    for i in 1..n {
        let t = lo + i as f64 * h;
        let w = settings.chi2.eval(t, lo, hi);
        if w == 0.0 {
            continue;
        }
        let y = z + dir * t;
        acc += w * phantom.eval(&geom.deformation.nu(s, &y));
    }
    Ok(acc * h)
}

/// Unfiltered backprojection of projections,
/// `∫∫ χ₁(s) χ₂(t) f(ν(s, z(s) + t(ψ(s, x0) − z(s)))) dt ds`,
/// by trapezoid sums in `s` and `t`.
pub fn xstarx_reference<E: Executor>(grid: &VoxelGrid, input: XStarXInput<'_>, geom: &Geometry, settings: &XStarXSettings, exec: &E) -> Result<VoxelGrid> {
    let mut nodes = Vec::new();
    for seg in geom.trajectory.segments() {
        nodes.extend(source_nodes(seg, settings));
    }
    let support = match input {
        XStarXInput::Phantom(p) => moving_support(geom, p),
        XStarXInput::Data(_) => geom.roi,
    };
    let results = exec.map(grid.len(), |idx| -> Result<f64> {
        let x0 = grid.point(idx);
        let mut acc = CompensatedSum::new();
        for &(s, w) in &nodes {
            let z = geom.source_point(s)?;
            let v = match input {
                XStarXInput::Phantom(p) => ray_integral(geom, p, &support, s, &z, &x0, settings)?,
                XStarXInput::Data(d) => d.ray(s, &geom.beta(s, &x0)?)?,
            };
            acc.add(w * v);
        }
        Ok(acc.value())
    });
    let values = results.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(VoxelGrid { values, ..grid.clone() })
}
