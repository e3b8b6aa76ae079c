use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::{Error, Result, Vec3};

/// Shape of a single smooth piece of the source curve.
#[derive(Debug, Clone, PartialEq)]
pub enum Curve {
    /// `z(s) = center + radius (cos s · u + sin s · v)` with `u ⊥ v` unit.
    Circle { center: Vec3, radius: f64, u: Vec3, v: Vec3 },
    /// `z(s) = start + (s - a) · velocity`.
    Line { start: Vec3, velocity: Vec3 },
}

/// One parameter interval `(a, b)` of the trajectory.
///
/// A periodic segment is a closed curve: the parameter wraps modulo
/// `b - a` and there are no endpoints to avoid.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub a: f64,
    pub b: f64,
    pub periodic: bool,
    pub curve: Curve,
}

impl Segment {
    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    /// Wraps `s` into `[a, b)` for periodic segments.
    pub fn wrap(&self, s: f64) -> f64 {
        if self.periodic {
            let l = self.length();
            let mut r = libm::fmod(s - self.a, l);
            if r < 0.0 {
                r += l;
            }
            if r >= l {
                r = 0.0;
            }
            self.a + r
        } else {
            s
        }
    }

    fn contains(&self, s: f64) -> bool {
        if self.periodic {
            s >= self.a && s < self.b
        } else {
            s > self.a && s < self.b
        }
    }

    /// Parameter distance to the nearest endpoint (infinite when periodic).
    pub fn endpoint_distance(&self, s: f64) -> f64 {
        if self.periodic {
            f64::INFINITY
        } else {
            (s - self.a).min(self.b - s)
        }
    }

    fn position(&self, s: f64) -> Vec3 {
        match &self.curve {
            Curve::Circle { center, radius, u, v } => {
                let (sn, cs) = libm::sincos(s);
                center + (u * cs + v * sn) * *radius
            }
            Curve::Line { start, velocity } => start + velocity * (s - self.a),
        }
    }

    fn velocity(&self, s: f64) -> Vec3 {
        match &self.curve {
            Curve::Circle { radius, u, v, .. } => {
                let (sn, cs) = libm::sincos(s);
                (v * cs - u * sn) * *radius
            }
            Curve::Line { velocity, .. } => *velocity,
        }
    }
}

/// Piecewise smooth source trajectory `s ↦ z(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    segments: Vec<Segment>,
}

/// Position and velocity of the source at one parameter value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceState {
    pub s: f64,
    pub segment: usize,
    pub z: Vec3,
    pub zdot: Vec3,
}

impl Trajectory {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidGeometry("trajectory has no segments".into()));
        }
        for (k, seg) in segments.iter().enumerate() {
            if !(seg.a.is_finite() && seg.b.is_finite() && seg.a < seg.b) {
                return Err(Error::InvalidGeometry(alloc::format!("segment {k} has an empty or infinite interval")));
            }
            if let Curve::Circle { u, v, radius, .. } = &seg.curve {
                if *radius <= 0.0 || (u.norm() - 1.0).abs() > 1e-12 || (v.norm() - 1.0).abs() > 1e-12 || u.dot(v).abs() > 1e-12 {
                    return Err(Error::InvalidGeometry(alloc::format!("segment {k}: circle frame must be orthonormal")));
                }
                if seg.periodic && (seg.length() - 2.0 * PI).abs() > 1e-12 {
                    return Err(Error::InvalidGeometry(alloc::format!("segment {k}: periodic circle must span 2π")));
                }
            }
            if let Curve::Line { velocity, .. } = &seg.curve {
                if velocity.norm() == 0.0 || seg.periodic {
                    return Err(Error::InvalidGeometry(alloc::format!("segment {k}: line needs nonzero speed and cannot be periodic")));
                }
            }
        }
        let mut sorted: Vec<&Segment> = segments.iter().collect();
        sorted.sort_by(|a, b| a.a.total_cmp(&b.a));
        for w in sorted.windows(2) {
            if w[1].a < w[0].b {
                return Err(Error::InvalidGeometry("segment intervals overlap".into()));
            }
        }
        Ok(Self { segments })
    }

    /// Circle of radius `r` in the xy-plane, counter-clockwise, `s ∈ [0, 2π)`.
    pub fn circle(r: f64) -> Self {
        Self::new(alloc::vec![Segment {
            a: 0.0,
            b: 2.0 * PI,
            periodic: true,
            curve: Curve::Circle { center: Vec3::zeros(), radius: r, u: Vec3::x(), v: Vec3::y() },
        }])
        .expect("valid circle")
    }

    /// The same circle traversed clockwise.
    pub fn circle_reversed(r: f64) -> Self {
        Self::new(alloc::vec![Segment {
            a: 0.0,
            b: 2.0 * PI,
            periodic: true,
            curve: Curve::Circle { center: Vec3::zeros(), radius: r, u: Vec3::x(), v: -Vec3::y() },
        }])
        .expect("valid circle")
    }

    /// Circles of radius `r` in the xy-plane (`s ∈ [0, 2π)`) and the xz-plane
    /// (`s ∈ [2π, 4π)`).
    pub fn two_orthogonal_circles(r: f64) -> Self {
        Self::new(alloc::vec![
            Segment { a: 0.0, b: 2.0 * PI, periodic: true, curve: Curve::Circle { center: Vec3::zeros(), radius: r, u: Vec3::x(), v: Vec3::y() } },
            Segment { a: 2.0 * PI, b: 4.0 * PI, periodic: true, curve: Curve::Circle { center: Vec3::zeros(), radius: r, u: Vec3::x(), v: Vec3::z() } },
        ])
        .expect("valid circles")
    }

    /// Straight pieces between consecutive vertices; piece `k` occupies the
    /// open parameter interval `(k, k + 1)`.
    pub fn polyline(points: &[Vec3]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidGeometry("polyline needs at least two points".into()));
        }
        let segs = points
            .windows(2)
            .enumerate()
            .map(|(k, w)| Segment { a: k as f64, b: k as f64 + 1.0, periodic: false, curve: Curve::Line { start: w[0], velocity: w[1] - w[0] } })
            .collect();
        Self::new(segs)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Index of the segment containing `s` (periodic segments wrap only when
    /// `s` lies in their nominal interval).
    pub fn segment_of(&self, s: f64) -> Result<usize> {
        if let Some(k) = self.segments.iter().position(|seg| seg.contains(s)) {
            return Ok(k);
        }
        let nearest = self
            .segments
            .iter()
            .enumerate()
            .map(|(k, seg)| (k, (seg.a - s).abs().min((seg.b - s).abs())))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(k, _)| k)
            .unwrap_or(0);
        Err(Error::Domain { s, nearest })
    }

    /// Resolves `s` on a known segment, wrapping periodic parameters.
    pub fn state_on(&self, segment: usize, s: f64) -> SourceState {
        let seg = &self.segments[segment];
        let s = seg.wrap(s);
        SourceState { s, segment, z: seg.position(s), zdot: seg.velocity(s) }
    }

    pub fn state(&self, s: f64) -> Result<SourceState> {
        let k = self.segment_of(s)?;
        Ok(self.state_on(k, s))
    }

    pub fn position(&self, s: f64) -> Result<Vec3> {
        Ok(self.state(s)?.z)
    }

    pub fn velocity(&self, s: f64) -> Result<Vec3> {
        Ok(self.state(s)?.zdot)
    }

    /// `n` parameter values spread uniformly over all segments.
    pub fn sample_parameters(&self, n: usize) -> Vec<f64> {
        let total: f64 = self.segments.iter().map(Segment::length).sum();
        let mut out = Vec::with_capacity(n);
        for seg in &self.segments {
            let m = libm::round((n as f64) * seg.length() / total).max(1.0) as usize;
            for i in 0..m {
                out.push(seg.a + (i as f64 + 0.5) * seg.length() / m as f64);
            }
        }
        out
    }

    pub fn sup_speed(&self) -> f64 {
        self.sample_parameters(1024).into_iter().filter_map(|s| self.velocity(s).ok()).map(|v| v.norm()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_parametrization() {
        let c = Trajectory::circle(3.0);
        let p = c.position(0.0).unwrap();
        assert!((p - Vec3::new(3.0, 0.0, 0.0)).norm() < 1e-15);
        let p = c.position(PI / 2.0).unwrap();
        assert!((p - Vec3::new(0.0, 3.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn out_of_domain_names_nearest_segment() {
        let t = Trajectory::polyline(&[Vec3::new(3.0, 0.0, 0.0), Vec3::new(0.0, 3.0, 0.0), Vec3::new(-3.0, 0.0, 0.0)]).unwrap();
        assert_eq!(t.segment_of(2.4), Err(Error::Domain { s: 2.4, nearest: 1 }));
        assert_eq!(t.segment_of(-0.5), Err(Error::Domain { s: -0.5, nearest: 0 }));
        // Endpoints of open intervals are not part of the domain.
        assert!(t.segment_of(1.0).is_err());
        let c = Trajectory::circle(3.0);
        assert!(matches!(c.segment_of(7.0), Err(Error::Domain { nearest: 0, .. })));
    }

    #[test]
    fn overlapping_segments_rejected() {
        let seg = |a: f64, b: f64| Segment { a, b, periodic: false, curve: Curve::Line { start: Vec3::zeros(), velocity: Vec3::x() } };
        assert!(Trajectory::new(alloc::vec![seg(0.0, 1.0), seg(0.5, 2.0)]).is_err());
        assert!(Trajectory::new(alloc::vec![seg(0.0, 1.0), seg(1.0, 2.0)]).is_ok());
    }

    #[test]
    fn periodic_wrap() {
        let c = Trajectory::two_orthogonal_circles(3.0);
        let st = c.state_on(1, 5.0 * PI);
        assert!((st.s - 3.0 * PI).abs() < 1e-12);
        assert!((st.z - Vec3::new(-3.0, 0.0, 0.0)).norm() < 1e-12);
    }
}
