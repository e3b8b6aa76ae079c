//! Cone-beam data: sources of ray values, gridded datasets and the
//! plane-derivative functionals extracted from one source position.

mod detector;
mod grangeat;

pub use detector::{synthesize_dataset, DetectorSpec, Frame, GriddedDataset};
pub use grangeat::{
    grangeat_plane_derivative, grangeat_plane_derivative_weighted, q_dynamic, q_static_weighted, q_t_derivative, GrangeatSettings, PhiCutoff, QKind,
};

use crate::geometry::{Geometry, Roi};
use crate::math::SimpsonSettings;
pub use crate::phantom::moving_support;
use crate::phantom::{dynamic_ray_integral, Phantom};
use crate::{Result, Vec3};

/// Circular cone of directions `{β : β·axis ≥ cos_half}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cone {
    pub axis: Vec3,
    pub cos_half: f64,
}

impl Cone {
    /// Cone from `apex` subtending the ball `(center, radius)`; the whole
    /// sphere when the apex is inside the ball.
    pub fn subtending(apex: &Vec3, center: &Vec3, radius: f64) -> Self {
        let d = center - apex;
        let dist = d.norm();
        if dist <= radius {
            return Self { axis: if dist > 0.0 { d / dist } else { Vec3::z() }, cos_half: -1.0 };
        }
        let sin_half = radius / dist;
        Self { axis: d / dist, cos_half: libm::sqrt(1.0 - sin_half * sin_half) }
    }

    pub fn contains(&self, beta: &Vec3) -> bool {
        beta.dot(&self.axis) >= self.cos_half
    }
}

/// Values `X_{f_s}(β)` of the cone-beam transform.
pub trait DataSource: Send + Sync {
    fn ray(&self, s: f64, beta: &Vec3) -> Result<f64>;

    /// Batch evaluation at a common source position.
    fn rays(&self, s: f64, betas: &[Vec3], out: &mut [f64]) -> Result<()> {
        for (b, o) in betas.iter().zip(out.iter_mut()) {
            *o = self.ray(s, b)?;
        }
        Ok(())
    }

    fn source_position(&self, s: f64) -> Result<Vec3>;

    /// Directions from `z(s)` outside of which the data vanish.
    fn support_cone(&self, s: f64) -> Result<Cone>;
}

impl<T: DataSource + ?Sized> DataSource for &T {
    fn ray(&self, s: f64, beta: &Vec3) -> Result<f64> {
        (**self).ray(s, beta)
    }
    fn rays(&self, s: f64, betas: &[Vec3], out: &mut [f64]) -> Result<()> {
        (**self).rays(s, betas, out)
    }
    fn source_position(&self, s: f64) -> Result<Vec3> {
        (**self).source_position(s)
    }
    fn support_cone(&self, s: f64) -> Result<Cone> {
        (**self).support_cone(s)
    }
}

/// Data computed on demand from an analytic phantom. Static geometries use
/// the closed-form line integral; moving ones integrate numerically.
#[derive(Debug, Clone)]
pub struct AnalyticSource {
    pub geometry: Geometry,
    pub phantom: Phantom,
    pub simpson: SimpsonSettings,
    support: Roi,
}

impl AnalyticSource {
    pub fn new(geometry: Geometry, phantom: Phantom) -> Self {
        let support = moving_support(&geometry, &phantom);
        Self { geometry, phantom, simpson: SimpsonSettings::default(), support }
    }

    pub fn with_simpson(mut self, simpson: SimpsonSettings) -> Self {
        self.simpson = simpson;
        self
    }
}

impl DataSource for AnalyticSource {
    fn ray(&self, s: f64, beta: &Vec3) -> Result<f64> {
        if self.geometry.is_static() {
            let z = self.geometry.source_point(s)?;
            return Ok(self.phantom.line_integral(&z, beta));
        }
        dynamic_ray_integral(&self.geometry, &self.phantom, s, beta, &self.simpson)
    }

    fn rays(&self, s: f64, betas: &[Vec3], out: &mut [f64]) -> Result<()> {
        if self.geometry.is_static() {
            let z = self.geometry.source_point(s)?;
            for (b, o) in betas.iter().zip(out.iter_mut()) {
                *o = self.phantom.line_integral(&z, b);
            }
            return Ok(());
        }
        for (b, o) in betas.iter().zip(out.iter_mut()) {
            *o = dynamic_ray_integral(&self.geometry, &self.phantom, s, b, &self.simpson)?;
        }
        Ok(())
    }

    fn source_position(&self, s: f64) -> Result<Vec3> {
        self.geometry.source_point(s)
    }

    fn support_cone(&self, s: f64) -> Result<Cone> {
        let z = self.geometry.source_point(s)?;
        Ok(Cone::subtending(&z, &self.support.center, self.support.radius))
    }
}
