//! Small numerical building blocks shared by the kernels.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::{Mat3, Vec3};

/// C¹ smoothstep on [0, 1], clamped outside.
#[inline]
pub fn smoothstep(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        x * x * (3.0 - 2.0 * x)
    }
}

/// Window that is 0 below `eps`, 1 above `2 eps` and a smoothstep in between.
#[inline]
pub fn ramp_window(distance: f64, eps: f64) -> f64 {
    smoothstep((distance - eps) / eps)
}

/// C∞ step: 0 for `x ≤ 0`, 1 for `x ≥ 1`.
pub fn smooth_unit_step(x: f64) -> f64 {
    let e = |t: f64| if t <= 0.0 { 0.0 } else { libm::exp(-1.0 / t) };
    let a = e(x);
    if a == 0.0 {
        return 0.0;
    }
    a / (a + e(1.0 - x))
}

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl core::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1], ascending nodes.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = alloc::vec![0.0; n];
    let mut weights = alloc::vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = libm::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Settings for [`adaptive_simpson`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimpsonSettings {
    /// Initial panel length.
    pub initial_step: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_depth: u32,
}

impl Default for SimpsonSettings {
    fn default() -> Self {
        Self { initial_step: 0.05, rel_tol: 1e-7, abs_tol: 1e-12, max_depth: 40 }
    }
}

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

/// Adaptive composite Simpson over `[a, b]`, split first at `breaks`
/// (sorted, inside the interval) and then into panels of `initial_step`.
///
/// The per-panel acceptance threshold is not halved on bisection, so a
/// jump left in the integrand still terminates after `max_depth` levels.
pub fn adaptive_simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, breaks: &[f64], settings: &SimpsonSettings) -> Integral {
    if b <= a {
        return Integral { value: 0.0, error: 0.0, converged: true };
    }
    let mut pieces: Vec<(f64, f64)> = Vec::new();
    let mut left = a;
    for &bp in breaks {
        if bp > left && bp < b {
            pieces.push((left, bp));
            left = bp;
        }
    }
    pieces.push((left, b));

    // Coarse pass to obtain a magnitude for the relative tolerance.
    struct Panel {
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        depth: u32,
    }
    let mut stack: Vec<Panel> = Vec::new();
    let mut coarse = CompensatedSum::new();
    let mut abs_coarse = 0.0;
    for &(pa, pb) in &pieces {
        let n = libm::ceil((pb - pa) / settings.initial_step).max(1.0) as usize;
        let h = (pb - pa) / n as f64;
        // Piece edges are sampled just inside so a jump at a break is seen
        // from the correct side.
        let nudge = 1e-13 * (pb - pa);
        let mut x0 = pa;
        let mut f0 = f(pa + nudge);
        for k in 0..n {
            let x1 = if k + 1 == n { pb } else { pa + (k + 1) as f64 * h };
            let xm = 0.5 * (x0 + x1);
            let fm = f(xm);
            let f1 = if k + 1 == n { f(pb - nudge) } else { f(x1) };
            let whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
            coarse.add(whole);
            abs_coarse += whole.abs();
            stack.push(Panel { a: x0, b: x1, fa: f0, fm, fb: f1, whole, depth: 0 });
            x0 = x1;
            f0 = f1;
        }
    }
    let n_panels = stack.len() as f64;
    let scale = coarse.value().abs().max(abs_coarse * 1e-3);
    let tol_total = (settings.rel_tol * scale).max(settings.abs_tol);
    let panel_tol = tol_total / n_panels;

    let mut total = CompensatedSum::new();
    let mut err_total = 0.0;
    let mut converged = true;
    // Process panels in a fixed order so the result is reproducible.
    stack.reverse();
    while let Some(p) = stack.pop() {
        let m = 0.5 * (p.a + p.b);
        let lm = 0.5 * (p.a + m);
        let rm = 0.5 * (m + p.b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - p.a) / 6.0 * (p.fa + 4.0 * flm + p.fm);
        let right = (p.b - m) / 6.0 * (p.fm + 4.0 * frm + p.fb);
        let diff = left + right - p.whole;
        if diff.abs() <= 15.0 * panel_tol || p.depth >= settings.max_depth {
            if p.depth >= settings.max_depth && diff.abs() > 15.0 * panel_tol {
                converged = false;
            }
            total.add(left + right + diff / 15.0);
            err_total += diff.abs() / 15.0;
        } else {
            stack.push(Panel { a: m, b: p.b, fa: p.fm, fm: frm, fb: p.fb, whole: right, depth: p.depth + 1 });
            stack.push(Panel { a: p.a, b: m, fa: p.fa, fm: flm, fb: p.fm, whole: left, depth: p.depth + 1 });
        }
    }
    Integral { value: total.value(), error: err_total, converged }
}

/// Safeguarded Newton iteration on a bracket `[lo, hi]` with `g(lo)` and
/// `g(hi)` of opposite sign. `gd` returns `(g, g')`.
pub fn bracketed_newton<G: FnMut(f64) -> (f64, f64)>(mut gd: G, mut lo: f64, mut hi: f64, tol: f64, max_iter: usize) -> Option<f64> {
    let (mut glo, _) = gd(lo);
    let (ghi, _) = gd(hi);
    if glo == 0.0 {
        return Some(lo);
    }
    if ghi == 0.0 {
        return Some(hi);
    }
    if (glo < 0.0) == (ghi < 0.0) {
        return None;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..max_iter {
        let (g, d) = gd(x);
        if g.abs() <= tol {
            return Some(x);
        }
        if (g < 0.0) == (glo < 0.0) {
            lo = x;
            glo = g;
        } else {
            hi = x;
        }
        let mut next = if d != 0.0 { x - g / d } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if next == x {
            return Some(x);
        }
        x = next;
    }
    let (g, _) = gd(x);
    (g.abs() <= tol * 1e3).then_some(x)
}

/// Two unit vectors completing `v` (unit) to a right-handed orthonormal frame.
pub fn orthonormal_frame(v: &Vec3) -> (Vec3, Vec3) {
    let helper = if v.x.abs() < 0.6 {
        Vec3::x()
    } else if v.y.abs() < 0.6 {
        Vec3::y()
    } else {
        Vec3::z()
    };
    let e1 = (helper - v * v.dot(&helper)).normalize();
    let e2 = v.cross(&e1);
    (e1, e2)
}

/// Angle between two unit vectors, robust near 0 and π.
#[inline]
pub fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    libm::atan2(a.cross(b).norm(), a.dot(b))
}

/// Rotation matrix about a unit axis.
pub fn rotation_about(axis: &Vec3, angle: f64) -> Mat3 {
    let (s, c) = libm::sincos(angle);
    let k = Mat3::new(0.0, -axis.z, axis.y, axis.z, 0.0, -axis.x, -axis.y, axis.x, 0.0);
    Mat3::identity() + k * s + k * k * (1.0 - c)
}

/// Rotation built from z-y-x Euler angles (applied as Rz * Ry * Rx).
pub fn rotation_from_euler(angles: [f64; 3]) -> Mat3 {
    rotation_about(&Vec3::z(), angles[2]) * rotation_about(&Vec3::y(), angles[1]) * rotation_about(&Vec3::x(), angles[0])
}

/// Smallest non-negative `t` interval for which `p + t d` lies in the ball.
pub fn ray_ball_interval(p: &Vec3, d: &Vec3, center: &Vec3, radius: f64) -> Option<(f64, f64)> {
    let dd = d.norm_squared();
    let m = p - center;
    let b = m.dot(d);
    let c = m.norm_squared() - radius * radius;
    let disc = b * b - dd * c;
    if disc <= 0.0 {
        return None;
    }
    let sq = libm::sqrt(disc);
    let t0 = (-b - sq) / dd;
    let t1 = (-b + sq) / dd;
    if t1 <= 0.0 {
        return None;
    }
    Some((t0.max(0.0), t1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(7);
        for deg in 0..=13 {
            let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * libm::pow(*xi, deg as f64)).sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-14, "deg {deg}: {q} vs {exact}");
        }
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let mut acc = CompensatedSum::new();
        acc.add(1e16);
        for _ in 0..1000 {
            acc.add(1.0);
        }
        acc.add(-1e16);
        assert_eq!(acc.value(), 1000.0);
    }

    #[test]
    fn simpson_handles_smooth_and_jump() {
        let s = SimpsonSettings::default();
        let r = adaptive_simpson(|x| libm::exp(-x * x), -6.0, 6.0, &[], &s);
        assert!((r.value - libm::sqrt(PI)).abs() < 1e-9);
        // A jump at an unknown location still terminates with a small error.
        let r = adaptive_simpson(|x| if x < 0.3 { 1.0 } else { 0.0 }, 0.0, 1.0, &[], &s);
        assert!((r.value - 0.3).abs() < 1e-6, "{}", r.value);
        // With the break supplied the integral is exact.
        let r = adaptive_simpson(|x| if x < 0.3 { 1.0 } else { 0.0 }, 0.0, 1.0, &[0.3], &s);
        assert!((r.value - 0.3).abs() < 1e-14);
    }

    #[test]
    fn newton_polishes_bracketed_root() {
        let r = bracketed_newton(|x| (libm::cos(x), -libm::sin(x)), 1.0, 2.0, 1e-14, 50).unwrap();
        assert!((r - PI / 2.0).abs() < 1e-13);
    }

    #[test]
    fn smoothstep_is_clamped_and_monotone() {
        assert_eq!(smoothstep(-1.0), 0.0);
        assert_eq!(smoothstep(2.0), 1.0);
        assert_eq!(ramp_window(0.5, 1.0), 0.0);
        assert_eq!(ramp_window(3.0, 1.0), 1.0);
        assert!((ramp_window(1.5, 1.0) - 0.5).abs() < 1e-15);
    }
}
