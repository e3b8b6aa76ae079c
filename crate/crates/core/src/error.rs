use alloc::string::String;

/// Errors raised by the reconstruction kernels.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("s = {s} lies outside every trajectory segment (nearest segment {nearest})")]
    Domain { s: f64, nearest: usize },

    #[error("s = {s} is within the differencing step {h} of a segment endpoint")]
    InsufficientDomain { s: f64, h: f64 },

    #[error("invalid deformation: {0}")]
    InvalidDeformation(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("quadrature did not converge at s = {s} (estimate {estimate}, error bound {error})")]
    Accuracy { s: f64, estimate: f64, error: f64 },

    #[error("ray integral at s = {s}, (u, v) = ({u}, {v}) did not converge (estimate {estimate}, error bound {error})")]
    DetectorAccuracy { s: f64, u: f64, v: f64, estimate: f64, error: f64 },

    #[error("direction at s = {s} leaves the detector coverage")]
    Coverage { s: f64 },

    #[error("point {point:?} lies outside the region of interest")]
    OutsideRoi { point: [f64; 3] },

    #[error("root continuation from s = {seed} jumped branch (reached {reached})")]
    Continuation { seed: f64, reached: f64 },

    #[error("|Theta . d_s gamma_dot| = {margin} is below the criticality threshold")]
    Criticality { margin: f64 },

    #[error("gamma_dot and its s-derivative are parallel; every direction is critical")]
    DegenerateDirection,

    #[error("critical-arc endpoint extrapolation did not converge")]
    DegenerateLimit,

    #[error("no admissible root for x0 = {x0:?}, theta = {theta:?}")]
    NoAdmissibleRoot { x0: [f64; 3], theta: [f64; 3] },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),
}

pub type Result<T> = core::result::Result<T, Error>;
