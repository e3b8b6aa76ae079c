use super::deformation::{BumpField, Temporal};
use crate::Vec3;

/// Known positive weight `A(s, x)` multiplying the moving object.
pub trait Attenuation: Send + Sync + core::fmt::Debug {
    fn value(&self, s: f64, x: &Vec3) -> f64;

    fn d_s(&self, s: f64, x: &Vec3) -> f64 {
        let h = 1e-5;
        (self.value(s + h, x) - self.value(s - h, x)) / (2.0 * h)
    }

    /// Lower bound of `A` over all `(s, x)`.
    fn lower_bound(&self) -> f64;

    fn is_unit(&self) -> bool {
        false
    }
}

/// `A ≡ 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Unit;

impl Attenuation for Unit {
    fn value(&self, _s: f64, _x: &Vec3) -> f64 {
        1.0
    }
    fn d_s(&self, _s: f64, _x: &Vec3) -> f64 {
        0.0
    }
    fn lower_bound(&self) -> f64 {
        1.0
    }
    fn is_unit(&self) -> bool {
        true
    }
}

/// `A(s, x) = 1 + a(s) w(x)` with a smooth bump `w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpAttenuation {
    pub field: BumpField,
    pub temporal: Temporal,
}

impl BumpAttenuation {
    pub fn new(field: BumpField, temporal: Temporal) -> Option<Self> {
        (temporal.max_abs() < 1.0).then_some(Self { field, temporal })
    }
}

impl Attenuation for BumpAttenuation {
    fn value(&self, s: f64, x: &Vec3) -> f64 {
        1.0 + self.temporal.value(s) * self.field.value(x)
    }
    fn d_s(&self, s: f64, x: &Vec3) -> f64 {
        self.temporal.derivative(s) * self.field.value(x)
    }
    fn lower_bound(&self) -> f64 {
        1.0 - self.temporal.max_abs()
    }
}
