use alloc::sync::Arc;

use super::attenuation::{Attenuation, BumpAttenuation, Unit};
use super::deformation::{BumpField, BumpFlow, Deformation, Identity, Temporal, Twist};
use crate::{Error, Result, Vec3};

/// Motion shape scaled by `ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MotionShape {
    /// Bump flow along `direction` with temporal amplitude `ε`.
    Bump { field: BumpField, direction: Vec3, omega: f64, s_ref: f64 },
    /// Localized twist with peak angle `ε` radians.
    Twist { center: Vec3, axis: Vec3, radius: f64, omega: f64, s_ref: f64 },
}

/// One-parameter family of motions and weights that reduces to the static
/// setting (`ψ = id`, `A ≡ 1`) at `ε = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonFamily {
    pub motion: MotionShape,
    /// Attenuation bump whose amplitude is `attenuation_scale · ε`.
    pub attenuation: Option<(BumpField, f64)>,
}

impl EpsilonFamily {
    pub fn at(&self, eps: f64) -> Result<(Arc<dyn Deformation>, Arc<dyn Attenuation>)> {
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(Error::InvalidParameter { name: "eps", reason: alloc::format!("{eps} is not a nonnegative number") });
        }
        if eps == 0.0 {
            return Ok((Arc::new(Identity), Arc::new(Unit)));
        }
        let deformation: Arc<dyn Deformation> = match self.motion {
            MotionShape::Bump { field, direction, omega, s_ref } => {
                Arc::new(BumpFlow::new(field, direction, Temporal { amplitude: eps, omega, s_ref }).map_err(|e| Error::InvalidDeformation(e.into()))?)
            }
            MotionShape::Twist { center, axis, radius, omega, s_ref } => {
                Arc::new(Twist { center, axis: axis.normalize(), radius, temporal: Temporal { amplitude: eps, omega, s_ref } })
            }
        };
        let attenuation: Arc<dyn Attenuation> = match self.attenuation {
            None => Arc::new(Unit),
            Some((field, scale)) => Arc::new(
                BumpAttenuation::new(field, Temporal { amplitude: scale * eps, omega: 1.0, s_ref: 0.0 })
                    .ok_or_else(|| Error::InvalidParameter { name: "attenuation", reason: "weight must stay positive".into() })?,
            ),
        };
        Ok((deformation, attenuation))
    }
}
