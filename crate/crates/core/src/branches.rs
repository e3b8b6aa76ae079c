//! Source times `s_j(x0, Θ)` solving `Θ·γ̇(s, x0) = 0`, their smooth
//! partition of unity, and the critical directions each root must avoid.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::geometry::{Geometry, SourceState};
use crate::math::{angle_between, bracketed_newton, ramp_window, ray_ball_interval};
use crate::{Error, Result, Vec3};

/// Thresholds of the admissibility windows. Each window ramps from 0 at `ε`
/// to 1 at `2ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibilityParams {
    /// Minimal `|Θ·∂_s γ̇|`.
    pub eps_margin: f64,
    /// Minimal distance to a segment endpoint, as a fraction of its length.
    pub eps_end_fraction: f64,
    /// Minimal angle (radians) between `Θ` and the critical arc.
    pub eps_arc: f64,
    /// Scan nodes per segment.
    pub scan_nodes: usize,
    /// Samples along the deformed ray when building a critical arc.
    pub arc_samples: usize,
    /// Largest root drift during continuation, in scan cells.
    pub branch_guard_cells: f64,
}

impl Default for AdmissibilityParams {
    fn default() -> Self {
        Self { eps_margin: 0.05, eps_end_fraction: 0.02, eps_arc: 3f64.to_radians(), scan_nodes: 512, arc_samples: 24, branch_guard_cells: 5.0 }
    }
}

impl AdmissibilityParams {
    /// Defaults with `eps_margin = 0.05 · median |∂_s γ̇|` over samples of
    /// source times and points of `U`.
    pub fn for_geometry(geom: &Geometry) -> Result<Self> {
        let mut mags = Vec::new();
        let offsets = [Vec3::zeros(), Vec3::x(), -Vec3::x(), Vec3::y(), -Vec3::y(), Vec3::z(), -Vec3::z()];
        for s in geom.trajectory.sample_parameters(128) {
            let st = geom.trajectory.state(s)?;
            for o in &offsets {
                let x = geom.roi.center + o * (0.5 * geom.roi.radius);
                mags.push(geom.gamma_dot_pair(st, &x)?.1.norm());
            }
        }
        mags.sort_by(f64::total_cmp);
        let median = mags[mags.len() / 2];
        Ok(Self { eps_margin: 0.05 * median, ..Self::default() })
    }

    fn guard(&self, segment_length: f64) -> f64 {
        self.branch_guard_cells * segment_length / self.scan_nodes as f64
    }
}

/// One admissible solution of `Θ·γ̇(s, x0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootBranch {
    pub s: f64,
    pub segment: usize,
    /// Position among the roots of its segment, in increasing `s`.
    pub ordinal: usize,
    /// `|Θ·∂_s γ̇(s, x0)|`.
    pub margin: f64,
    pub endpoint_distance: f64,
    pub margin_window: f64,
    pub end_window: f64,
}

/// `γ̇` and `∂_s γ̇` at the scan nodes for one reconstruction point; reused
/// for every direction `Θ`.
#[derive(Debug, Clone)]
pub struct ScanTable {
    pub x0: Vec3,
    segments: Vec<Vec<(f64, Vec3, Vec3)>>,
}

impl ScanTable {
    pub fn new(geom: &Geometry, x0: &Vec3, params: &AdmissibilityParams) -> Result<Self> {
        let mut segments = Vec::new();
        for (k, seg) in geom.trajectory.segments().iter().enumerate() {
            let n = params.scan_nodes;
            let mut nodes = Vec::with_capacity(n + 1);
            let count = if seg.periodic { n } else { n + 1 };
            for i in 0..count {
                let mut s = seg.a + i as f64 * seg.length() / n as f64;
                if !seg.periodic {
                    // Stay strictly inside the open interval.
                    s = s.clamp(seg.a + 1e-9 * seg.length(), seg.b - 1e-9 * seg.length());
                }
                let (gd, gds) = geom.gamma_dot_pair(geom.trajectory.state_on(k, s), x0)?;
                nodes.push((s, gd, gds));
            }
            segments.push(nodes);
        }
        Ok(Self { x0: *x0, segments })
    }
}

fn polish(geom: &Geometry, segment: usize, x0: &Vec3, theta: &Vec3, lo: f64, hi: f64) -> Option<f64> {
    bracketed_newton(
        |s| match geom.gamma_dot_pair(geom.trajectory.state_on(segment, s), x0) {
            Ok((gd, gds)) => (theta.dot(&gd), theta.dot(&gds)),
            Err(_) => (f64::NAN, f64::NAN),
        },
        lo,
        hi,
        1e-12,
        60,
    )
}

/// Roots found from a precomputed scan, with margin and endpoint windows.
/// Roots whose margin or endpoint window vanishes are dropped.
pub fn roots_from_scan(geom: &Geometry, table: &ScanTable, theta: &Vec3, params: &AdmissibilityParams) -> Vec<RootBranch> {
    let mut out = Vec::new();
    for (k, nodes) in table.segments.iter().enumerate() {
        let seg = &geom.trajectory.segments()[k];
        let n = nodes.len();
        let pairs = if seg.periodic { n } else { n - 1 };
        let mut ordinal = 0;
        for i in 0..pairs {
            let (s0, g0v, _) = nodes[i];
            let (s1, g1v, _) = nodes[(i + 1) % n];
            let s1 = if i + 1 == n { seg.b } else { s1 };
            let g0 = theta.dot(&g0v);
            let g1 = theta.dot(&g1v);
            if !(g0 == 0.0 || (g0 < 0.0) != (g1 < 0.0)) {
                continue;
            }
            if g0 != 0.0 && g1 == 0.0 {
                // Counted as the left end of the next bracket.
                continue;
            }
            let Some(s) = (if g0 == 0.0 { Some(s0) } else { polish(geom, k, &table.x0, theta, s0, s1) }) else {
                continue;
            };
            let s = seg.wrap(s);
            let Ok((gd, gds)) = geom.gamma_dot_pair(geom.trajectory.state_on(k, s), &table.x0) else {
                continue;
            };
            if theta.dot(&gd).abs() > 1e-10 {
                continue;
            }
            let margin = theta.dot(&gds).abs();
            let endpoint_distance = seg.endpoint_distance(s);
            let margin_window = ramp_window(margin, params.eps_margin);
            let end_window = if seg.periodic { 1.0 } else { ramp_window(endpoint_distance, params.eps_end_fraction * seg.length()) };
            let this = ordinal;
            ordinal += 1;
            if margin_window == 0.0 || end_window == 0.0 {
                continue;
            }
            out.push(RootBranch { s, segment: k, ordinal: this, margin, endpoint_distance, margin_window, end_window });
        }
    }
    out.sort_by(|a, b| a.s.total_cmp(&b.s));
    out
}

/// Admissible roots of `Θ·γ̇(s, x0) = 0`, sorted by `s`.
pub fn find_admissible_roots(geom: &Geometry, x0: &Vec3, theta: &Vec3, params: &AdmissibilityParams) -> Result<Vec<RootBranch>> {
    let table = ScanTable::new(geom, x0, params)?;
    Ok(roots_from_scan(geom, &table, theta, params))
}

/// Follows `root` to the nearby point `x` on the same segment: Newton's
/// method from the seed, then a local bracket search. The continued root
/// keeps the sign of `Θ·∂_s γ̇` and stays within the branch guard or three
/// times the linear prediction, whichever is larger.
pub fn continue_root(geom: &Geometry, x: &Vec3, theta: &Vec3, root: &RootBranch, params: &AdmissibilityParams) -> Result<f64> {
    let seg = &geom.trajectory.segments()[root.segment];
    let eval = |s: f64| -> Result<(f64, f64)> {
        let (gd, gds) = geom.gamma_dot_pair(geom.trajectory.state_on(root.segment, s), x)?;
        Ok((theta.dot(&gd), theta.dot(&gds)))
    };
    let inside = |s: f64| seg.periodic || (s > seg.a && s < seg.b);
    let (g0, d0) = eval(root.s)?;
    if d0 == 0.0 || !d0.is_finite() {
        return Err(Error::Continuation { seed: root.s, reached: root.s });
    }
    let orientation = d0 > 0.0;
    let radius = params.guard(seg.length()).max(3.0 * (g0 / d0).abs());
    let mut s = root.s;
    let (mut g, mut d) = (g0, d0);
    for _ in 0..50 {
        if d == 0.0 {
            break;
        }
        let step = g / d;
        s -= step;
        if (s - root.s).abs() > radius || !inside(s) {
            break;
        }
        (g, d) = eval(s)?;
        if g == 0.0 || step.abs() <= 1e-15 * (1.0 + s.abs()) {
            if (d > 0.0) == orientation && g.abs() <= 1e-10 {
                return Ok(seg.wrap(s));
            }
            break;
        }
    }
    let cell = seg.length() / (4 * params.scan_nodes) as f64;
    let steps = libm::ceil(radius / cell) as usize;
    let mut reached = root.s;
    for k in 1..=steps {
        for dir in [1.0, -1.0] {
            let a = root.s + dir * (k - 1) as f64 * cell;
            let b = root.s + dir * k as f64 * cell;
            if !inside(a) || !inside(b) {
                continue;
            }
            reached = b;
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let (glo, _) = eval(lo)?;
            let (ghi, _) = eval(hi)?;
            let rising = glo < 0.0 && ghi >= 0.0;
            let falling = glo > 0.0 && ghi <= 0.0;
            if (orientation && rising) || (!orientation && falling) {
                let found = bracketed_newton(|t| eval(t).unwrap_or((f64::NAN, f64::NAN)), lo, hi, 1e-12, 60);
                if let Some(r) = found {
                    return Ok(seg.wrap(r));
                }
            }
        }
    }
    Err(Error::Continuation { seed: root.s, reached })
}

/// `α = d_xψ(s, x0)^{-T} Θ`, the plane normal seen from the source.
pub fn alpha_from_theta(geom: &Geometry, x0: &Vec3, theta: &Vec3, s: f64) -> Result<Vec3> {
    if geom.deformation.is_identity() {
        return Ok(*theta);
    }
    let f = geom.frame(s, x0)?;
    Ok(f.jacobian_inv.transpose() * theta)
}

/// `(γ̇ × ∂_s γ̇) / |γ̇ × ∂_s γ̇|` at `(s, x0)`.
pub fn theta_crit(geom: &Geometry, s: f64, x0: &Vec3) -> Result<Vec3> {
    let st = geom.trajectory.state(s)?;
    theta_crit_at(geom, st, x0)
}

fn theta_crit_at(geom: &Geometry, st: SourceState, x0: &Vec3) -> Result<Vec3> {
    let (gd, gds) = geom.gamma_dot_pair(st, x0)?;
    let c = gd.cross(&gds);
    let n = c.norm();
    if !(n > 1e-12 * gd.norm() * gds.norm()) || n == 0.0 {
        return Err(Error::DegenerateDirection);
    }
    Ok(c / n)
}

/// Sampled arc of critical directions for the root `s` at `x0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalArc {
    pub s: f64,
    pub x0: Vec3,
    /// Ray parameters of the samples (`t = 1` is `x0`).
    pub ts: Vec<f64>,
    /// Unit directions, sign-aligned along the arc.
    pub samples: Vec<Vec3>,
    /// Every direction is critical.
    pub degenerate: bool,
}

impl CriticalArc {
    /// Largest angle between two samples, with `±ξ` identified.
    pub fn diameter(&self) -> f64 {
        if self.degenerate {
            return PI;
        }
        let mut d: f64 = 0.0;
        for (i, a) in self.samples.iter().enumerate() {
            for b in &self.samples[i + 1..] {
                let ang = angle_between(a, b);
                d = d.max(ang.min(PI - ang));
            }
        }
        d
    }

    /// Angular distance from `θ` (or `-θ`) to the polyline of great-circle
    /// pieces through the samples.
    pub fn distance(&self, theta: &Vec3) -> f64 {
        if self.degenerate {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for p in [*theta, -theta] {
            for (i, a) in self.samples.iter().enumerate() {
                best = best.min(angle_between(&p, a));
                if let Some(b) = self.samples.get(i + 1) {
                    best = best.min(great_circle_segment_distance(&p, a, b));
                }
            }
        }
        best
    }
}

fn great_circle_segment_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let n = a.cross(b);
    let nn = n.norm();
    if nn < 1e-15 {
        return angle_between(p, a);
    }
    let n = n / nn;
    let proj = p - n * n.dot(p);
    if proj.norm() < 1e-15 {
        return PI / 2.0;
    }
    // The foot point lies between a and b when it is on the same side of
    // both endpoints within the plane.
    if a.cross(&proj).dot(&n) >= 0.0 && proj.cross(b).dot(&n) >= 0.0 {
        libm::asin(n.dot(p).abs().min(1.0))
    } else {
        angle_between(p, a).min(angle_between(p, b))
    }
}

/// Unnormalized critical direction `d_xψ(s, x0)ᵀ [β₀ × ∂_s(β(x) - β₀)]`
/// for `x` at ray parameter `t`, plus the bracket and its scale.
fn xi_at(geom: &Geometry, st: SourceState, x0: &Vec3, t: f64) -> Result<(Vec3, f64, f64)> {
    let f0 = geom.frame_at(st, x0)?;
    let d0 = geom.beta_s_deriv_at(&f0, x0);
    let y = st.z + (f0.y - st.z) * t;
    let x = geom.deformation.nu(st.s, &y);
    let f = geom.frame_at(st, &x)?;
    let d = geom.beta_s_deriv_at(&f, &x);
    let bracket = f0.beta.cross(&(d - d0));
    let scale = (t - 1.0).abs() * d.norm().max(d0.norm());
    Ok((f0.jacobian.transpose() * bracket, bracket.norm(), scale))
}

fn align(v: Vec3, reference: &Vec3) -> Vec3 {
    if v.dot(reference) < 0.0 {
        -v
    } else {
        v
    }
}

/// Samples the arc of critical directions along the deformed ray through
/// `x0`, over the part of the ray inside `U`.
pub fn xi_crit_arc(geom: &Geometry, s: f64, x0: &Vec3, n_samples: usize) -> Result<CriticalArc> {
    let st = geom.trajectory.state(s)?;
    let f0 = geom.frame_at(st, x0)?;
    let (t_in, t_out) =
        ray_ball_interval(&st.z, &f0.beta, &geom.roi.center, geom.roi.radius).map(|(a, b)| (a / f0.length, b / f0.length)).unwrap_or((1.0, 1.0));
    let n = n_samples.max(2);
    let span = t_out - t_in;
    let mut ts = Vec::with_capacity(n + 1);
    for i in 0..n {
        let t = t_in + span * (i as f64 + 0.5) / n as f64;
        if (t - 1.0).abs() > 1e-6 * span.max(1e-12) {
            ts.push(t);
        }
    }
    let crit = theta_crit_at(geom, st, x0).ok();
    let mut entries: Vec<(f64, Vec3)> = Vec::with_capacity(ts.len() + 1);
    let mut degenerate = false;
    for &t in &ts {
        let (xi, bracket, scale) = xi_at(geom, st, x0, t)?;
        if !(bracket > 1e-12 * scale) || scale == 0.0 {
            degenerate = true;
            break;
        }
        entries.push((t, xi.normalize()));
    }
    if degenerate {
        return Ok(CriticalArc { s: st.s, x0: *x0, ts: Vec::new(), samples: Vec::new(), degenerate: true });
    }
    if let Some(c) = crit {
        entries.push((1.0, c));
    }
    entries.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Align outward from t = 1.
    let mid = entries.iter().position(|e| e.0 >= 1.0).unwrap_or(entries.len() - 1);
    for i in mid + 1..entries.len() {
        entries[i].1 = align(entries[i].1, &entries[i - 1].1);
    }
    for i in (0..mid).rev() {
        entries[i].1 = align(entries[i].1, &entries[i + 1].1);
    }
    Ok(CriticalArc { s: st.s, x0: *x0, ts: entries.iter().map(|e| e.0).collect(), samples: entries.iter().map(|e| e.1).collect(), degenerate: false })
}

/// Limit of the critical direction as the arc point approaches `x0`,
/// from symmetric averages at `t = 1 ± δ/L₀` and Richardson extrapolation.
pub fn arc_endpoint_limit(geom: &Geometry, s: f64, x0: &Vec3) -> Result<Vec3> {
    let st = geom.trajectory.state(s)?;
    let f0 = geom.frame_at(st, x0)?;
    let mut means: Vec<Vec3> = Vec::with_capacity(3);
    for delta in [1e-2, 1e-3, 1e-4] {
        let dt = delta / f0.length;
        let (p, bp, sp) = xi_at(geom, st, x0, 1.0 + dt)?;
        let (m, bm, sm) = xi_at(geom, st, x0, 1.0 - dt)?;
        if !(bp > 1e-12 * sp) || !(bm > 1e-12 * sm) {
            return Err(Error::DegenerateLimit);
        }
        let p = p.normalize();
        let m = align(m.normalize(), &p);
        let mut avg = (p + m).normalize();
        if let Some(first) = means.first() {
            avg = align(avg, first);
        }
        means.push(avg);
    }
    let d12 = (means[1] - means[0]).norm();
    let d23 = (means[2] - means[1]).norm();
    if !(d23 <= 0.5 * d12 + 1e-9) {
        return Err(Error::DegenerateLimit);
    }
    let limit = (means[2] + (means[2] - means[1]) / 99.0).normalize();
    Ok(match theta_crit_at(geom, st, x0) {
        Ok(c) => align(limit, &c),
        Err(_) => limit,
    })
}

/// `ds_j/dt` along `x0 + tΘ`: `-Θ·(d_xγ̇ Θ) / Θ·∂_s γ̇`.
pub fn ds_dt(geom: &Geometry, x0: &Vec3, theta: &Vec3, s: f64, params: &AdmissibilityParams) -> Result<f64> {
    let st = geom.trajectory.state(s)?;
    let (_, gds) = geom.gamma_dot_pair(st, x0)?;
    let denom = theta.dot(&gds);
    if denom.abs() < params.eps_margin {
        return Err(Error::Criticality { margin: denom.abs() });
    }
    let h = 1e-5 * (1.0 + x0.norm());
    let gp = geom.gamma_dot_pair(st, &(x0 + theta * h))?.0;
    let gm = geom.gamma_dot_pair(st, &(x0 - theta * h))?.0;
    Ok(-theta.dot(&((gp - gm) / (2.0 * h))) / denom)
}

/// A root with its normalized weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedRoot {
    pub root: RootBranch,
    pub arc_window: f64,
    pub weight: f64,
}

/// Normalized partition of unity over the roots of one `(x0, Θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionWeights {
    pub roots: Vec<WeightedRoot>,
    /// Sum of raw window products before normalization.
    pub total: f64,
}

/// Arc window of one root: 0 for a degenerate arc.
pub fn arc_window(geom: &Geometry, x0: &Vec3, theta: &Vec3, root: &RootBranch, params: &AdmissibilityParams) -> Result<f64> {
    let dist = if geom.deformation.is_identity() {
        match theta_crit_at(geom, geom.trajectory.state_on(root.segment, root.s), x0) {
            Ok(c) => {
                let a = angle_between(theta, &c);
                a.min(PI - a)
            }
            Err(_) => 0.0,
        }
    } else {
        xi_crit_arc(geom, root.s, x0, params.arc_samples)?.distance(theta)
    };
    Ok(ramp_window(dist, params.eps_arc))
}

/// Raw windows for every root of `(x0, Θ)` from a scan table.
pub fn windowed_roots(geom: &Geometry, table: &ScanTable, theta: &Vec3, params: &AdmissibilityParams) -> Result<Vec<WeightedRoot>> {
    let mut out = Vec::new();
    for root in roots_from_scan(geom, table, theta, params) {
        let aw = arc_window(geom, &table.x0, theta, &root, params)?;
        out.push(WeightedRoot { root, arc_window: aw, weight: root.margin_window * root.end_window * aw });
    }
    Ok(out)
}

/// Normalizes the windows; fails when every window vanishes.
pub fn normalize_weights(x0: &Vec3, theta: &Vec3, mut roots: Vec<WeightedRoot>) -> Result<PartitionWeights> {
    let total: f64 = roots.iter().map(|r| r.weight).sum();
    if !(total > 0.0) {
        return Err(Error::NoAdmissibleRoot { x0: [x0.x, x0.y, x0.z], theta: [theta.x, theta.y, theta.z] });
    }
    roots.retain(|r| r.weight > 0.0);
    let mut acc = 0.0;
    let last = roots.len() - 1;
    for (i, r) in roots.iter_mut().enumerate() {
        // The last weight absorbs the rounding so the sum is exactly one.
        r.weight = if i == last { 1.0 - acc } else { r.weight / total };
        acc += r.weight;
    }
    Ok(PartitionWeights { roots, total })
}

pub fn partition_weights_with(geom: &Geometry, table: &ScanTable, theta: &Vec3, params: &AdmissibilityParams) -> Result<PartitionWeights> {
    normalize_weights(&table.x0, theta, windowed_roots(geom, table, theta, params)?)
}

pub fn partition_weights(geom: &Geometry, x0: &Vec3, theta: &Vec3, params: &AdmissibilityParams) -> Result<PartitionWeights> {
    let table = ScanTable::new(geom, x0, params)?;
    partition_weights_with(geom, &table, theta, params)
}
