use alloc::vec::Vec;

use super::{moving_support, Cone, DataSource};
use crate::exec::Executor;
use crate::geometry::{Geometry, Roi, Trajectory};
use crate::math::{orthonormal_frame, SimpsonSettings};
use crate::phantom::{dynamic_ray_integral, Phantom};
use crate::{Error, Result, Vec3};

/// Sampling of the source parameter and of the direction sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorSpec {
    pub n_u: usize,
    pub n_v: usize,
    /// Source positions per segment.
    pub n_s: usize,
    /// Relative angular margin beyond the cone subtending `U`.
    pub margin: f64,
}

impl Default for DetectorSpec {
    fn default() -> Self {
        Self { n_u: 128, n_v: 128, n_s: 360, margin: 0.05 }
    }
}

/// Angular detector frame at one source position. Directions are
/// `β = cos v cos u β₀ + cos v sin u e₁ + sin v e₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub s: f64,
    pub z: Vec3,
    pub beta0: Vec3,
    pub e1: Vec3,
    pub e2: Vec3,
    pub u_max: f64,
    pub v_max: f64,
}

impl Frame {
    /// Frame covering the cone subtending `roi`, widened by the relative
    /// `margin` and by the absolute angle `pad`.
    pub fn new(trajectory: &Trajectory, segment: usize, s: f64, roi: &Roi, margin: f64, pad: f64) -> Self {
        let st = trajectory.state_on(segment, s);
        let d = roi.center - st.z;
        let beta0 = d.normalize();
        let tangential = st.zdot - beta0 * beta0.dot(&st.zdot);
        let e1 = if tangential.norm() > 1e-12 * st.zdot.norm().max(1.0) { tangential.normalize() } else { orthonormal_frame(&beta0).0 };
        let e2 = beta0.cross(&e1);
        let half = (libm::asin((roi.radius / d.norm()).min(1.0)) * (1.0 + margin) + pad).min(0.499 * core::f64::consts::PI);
        Self { s: st.s, z: st.z, beta0, e1, e2, u_max: half, v_max: half }
    }

    pub fn coordinates(&self, beta: &Vec3) -> (f64, f64) {
        let v = libm::asin(beta.dot(&self.e2).clamp(-1.0, 1.0));
        let u = libm::atan2(beta.dot(&self.e1), beta.dot(&self.beta0));
        (u, v)
    }

    pub fn direction(&self, u: f64, v: f64) -> Vec3 {
        let (su, cu) = libm::sincos(u);
        let (sv, cv) = libm::sincos(v);
        self.beta0 * (cv * cu) + self.e1 * (cv * su) + self.e2 * sv
    }
}

/// Ray values sampled on per-source angular grids; ordered
/// (segment, s, u, v) with `v` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GriddedDataset {
    pub trajectory: Trajectory,
    pub roi: Roi,
    pub n_u: usize,
    pub n_v: usize,
    pub frames: Vec<Vec<Frame>>,
    pub values: Vec<f64>,
}

struct Bracket {
    segment: usize,
    i0: usize,
    i1: usize,
    frac: f64,
}

impl GriddedDataset {
    /// Checks that the payload matches the declared grid and is finite.
    pub fn new(trajectory: Trajectory, roi: Roi, n_u: usize, n_v: usize, frames: Vec<Vec<Frame>>, values: Vec<f64>) -> Result<Self> {
        if n_u < 2 || n_v < 2 {
            return Err(Error::GridMismatch("detector needs at least 2 samples per axis".into()));
        }
        if frames.len() != trajectory.segments().len() {
            return Err(Error::GridMismatch("one frame list per segment required".into()));
        }
        for (k, f) in frames.iter().enumerate() {
            let min = if trajectory.segments()[k].periodic { 1 } else { 2 };
            if f.len() < min {
                return Err(Error::GridMismatch(alloc::format!("segment {k} has too few source positions")));
            }
        }
        let n_frames: usize = frames.iter().map(Vec::len).sum();
        if values.len() != n_frames * n_u * n_v {
            return Err(Error::GridMismatch(alloc::format!("expected {} values, found {}", n_frames * n_u * n_v, values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::GridMismatch("dataset contains non-finite values".into()));
        }
        Ok(Self { trajectory, roi, n_u, n_v, frames, values })
    }

    pub fn frame_count(&self) -> usize {
        self.frames.iter().map(Vec::len).sum()
    }

    /// Smallest angular grid step over all frames.
    pub fn angular_step(&self) -> f64 {
        self.frames.iter().flatten().map(|f| (2.0 * f.u_max / (self.n_u - 1) as f64).min(2.0 * f.v_max / (self.n_v - 1) as f64)).fold(f64::INFINITY, f64::min)
    }

    fn offset(&self, segment: usize, i: usize) -> usize {
        let before: usize = self.frames[..segment].iter().map(Vec::len).sum();
        (before + i) * self.n_u * self.n_v
    }

    fn bracket(&self, s: f64) -> Result<Bracket> {
        let segment = self.trajectory.segment_of(s)?;
        let seg = &self.trajectory.segments()[segment];
        let s = seg.wrap(s);
        let n = self.frames[segment].len();
        if seg.periodic {
            let x = (s - seg.a) / (seg.length() / n as f64);
            let i0 = (libm::floor(x) as usize).min(n - 1);
            Ok(Bracket { segment, i0, i1: (i0 + 1) % n, frac: x - i0 as f64 })
        } else {
            let x = (s - seg.a) / (seg.length() / (n - 1) as f64);
            let i0 = (libm::floor(x).max(0.0) as usize).min(n - 2);
            Ok(Bracket { segment, i0, i1: i0 + 1, frac: x - i0 as f64 })
        }
    }

    fn sample(&self, segment: usize, i: usize, s: f64, beta: &Vec3) -> Result<f64> {
        let f = &self.frames[segment][i];
        let (u, v) = f.coordinates(beta);
        let du = 2.0 * f.u_max / (self.n_u - 1) as f64;
        let dv = 2.0 * f.v_max / (self.n_v - 1) as f64;
        let gu = (u + f.u_max) / du;
        let gv = (v + f.v_max) / dv;
        let top_u = (self.n_u - 1) as f64;
        let top_v = (self.n_v - 1) as f64;
        if !(gu >= 0.0 && gu <= top_u && gv >= 0.0 && gv <= top_v) {
            return Err(Error::Coverage { s });
        }
        let iu = (libm::floor(gu) as usize).min(self.n_u - 2);
        let iv = (libm::floor(gv) as usize).min(self.n_v - 2);
        let fu = gu - iu as f64;
        let fv = gv - iv as f64;
        let base = self.offset(segment, i);
        let at = |a: usize, b: usize| self.values[base + a * self.n_v + b];
        Ok((1.0 - fu) * ((1.0 - fv) * at(iu, iv) + fv * at(iu, iv + 1)) + fu * ((1.0 - fv) * at(iu + 1, iv) + fv * at(iu + 1, iv + 1)))
    }

    fn interpolate(&self, br: &Bracket, s: f64, beta: &Vec3) -> Result<f64> {
        let a = self.sample(br.segment, br.i0, s, beta)?;
        if br.frac == 0.0 {
            return Ok(a);
        }
        let b = self.sample(br.segment, br.i1, s, beta)?;
        Ok((1.0 - br.frac) * a + br.frac * b)
    }
}

impl DataSource for GriddedDataset {
    fn ray(&self, s: f64, beta: &Vec3) -> Result<f64> {
        let br = self.bracket(s)?;
        self.interpolate(&br, s, beta)
    }

    fn rays(&self, s: f64, betas: &[Vec3], out: &mut [f64]) -> Result<()> {
        let br = self.bracket(s)?;
        for (b, o) in betas.iter().zip(out.iter_mut()) {
            *o = self.interpolate(&br, s, b)?;
        }
        Ok(())
    }

    fn source_position(&self, s: f64) -> Result<Vec3> {
        self.trajectory.position(s)
    }

    fn support_cone(&self, s: f64) -> Result<Cone> {
        let z = self.trajectory.position(s)?;
        Ok(Cone::subtending(&z, &self.roi.center, self.roi.radius))
    }
}

/// Source parameters of the frames on one segment.
pub fn frame_parameters(trajectory: &Trajectory, segment: usize, n_s: usize) -> Vec<f64> {
    let seg = &trajectory.segments()[segment];
    if seg.periodic {
        (0..n_s).map(|i| seg.a + i as f64 * seg.length() / n_s as f64).collect()
    } else {
        let n = n_s.max(2);
        (0..n).map(|i| seg.a + i as f64 * seg.length() / (n - 1) as f64).collect()
    }
}

/// Samples the transform of `phantom` through `geom` on the grid `spec`.
pub fn synthesize_dataset<E: Executor>(geom: &Geometry, phantom: &Phantom, spec: &DetectorSpec, simpson: &SimpsonSettings, exec: &E) -> Result<GriddedDataset> {
    if spec.n_u < 2 || spec.n_v < 2 || spec.n_s < 1 {
        return Err(Error::InvalidParameter { name: "detector", reason: "grid needs n_u, n_v >= 2 and n_s >= 1".into() });
    }
    let trajectory = &geom.trajectory;
    let mut frames: Vec<Vec<Frame>> = Vec::new();
    for k in 0..trajectory.segments().len() {
        let params = frame_parameters(trajectory, k, spec.n_s);
        let step = if params.len() > 1 { params[1] - params[0] } else { trajectory.segments()[k].length() };
        frames.push(
            params
                .into_iter()
                .map(|s| {
                    // Cover the cones seen from the neighbouring source positions.
                    let st = trajectory.state_on(k, s);
                    let gap = ((geom.roi.center - st.z).norm() - geom.roi.radius).max(1e-9);
                    let pad = st.zdot.norm() * step / gap;
                    Frame::new(trajectory, k, s, &geom.roi, spec.margin, pad)
                })
                .collect(),
        );
    }
    let flat: Vec<(usize, Frame)> = frames.iter().enumerate().flat_map(|(k, f)| f.iter().map(move |fr| (k, *fr))).collect();
    let support = moving_support(geom, phantom);
    let static_geom = geom.is_static();
    let per_frame = exec.map(flat.len(), |idx| -> Result<Vec<f64>> {
        let (_, fr) = flat[idx];
        let cone = Cone::subtending(&fr.z, &support.center, support.radius);
        let du = 2.0 * fr.u_max / (spec.n_u - 1) as f64;
        let dv = 2.0 * fr.v_max / (spec.n_v - 1) as f64;
        let mut out = Vec::with_capacity(spec.n_u * spec.n_v);
        for iu in 0..spec.n_u {
            let u = -fr.u_max + iu as f64 * du;
            for iv in 0..spec.n_v {
                let v = -fr.v_max + iv as f64 * dv;
                let beta = fr.direction(u, v);
                let val = if !cone.contains(&beta) || phantom.is_empty() {
                    0.0
                } else if static_geom {
                    phantom.line_integral(&fr.z, &beta)
                } else {
                    dynamic_ray_integral(geom, phantom, fr.s, &beta, simpson).map_err(|e| match e {
                        Error::Accuracy { s, estimate, error } => Error::DetectorAccuracy { s, u, v, estimate, error },
                        other => other,
                    })?
                };
                out.push(val);
            }
        }
        Ok(out)
    });
    let mut values = Vec::with_capacity(flat.len() * spec.n_u * spec.n_v);
    for r in per_frame {
        values.extend(r?);
    }
    GriddedDataset::new(trajectory.clone(), geom.roi, spec.n_u, spec.n_v, frames, values)
}
