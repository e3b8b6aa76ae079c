use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::math::gauss_legendre;
use crate::{Error, Result, Vec3};

/// Product rule on the sphere: Gauss–Legendre in `cos θ` times a uniform
/// rule in `φ`. Antipodally symmetric by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereQuadrature {
    pub nodes: Vec<Vec3>,
    pub weights: Vec<f64>,
    /// Harmonic degree integrated exactly.
    pub order: usize,
    /// Index of the antipode of each node.
    pub antipode: Vec<usize>,
}

impl SphereQuadrature {
    /// Rule exact for spherical harmonics up to degree `order`; validated
    /// at construction.
    pub fn new(order: usize) -> Result<Self> {
        let n = order / 2 + 1;
        let mut m = order + 1;
        if m % 2 == 1 {
            m += 1;
        }
        let (z, wz) = gauss_legendre(n);
        let mut nodes = Vec::with_capacity(n * m);
        let mut weights = Vec::with_capacity(n * m);
        let mut antipode = Vec::with_capacity(n * m);
        for i in 0..n {
            let r = libm::sqrt((1.0 - z[i] * z[i]).max(0.0));
            for k in 0..m {
                let (sp, cp) = libm::sincos(2.0 * PI * k as f64 / m as f64);
                nodes.push(Vec3::new(r * cp, r * sp, z[i]));
                weights.push(wz[i] * 2.0 * PI / m as f64);
                antipode.push((n - 1 - i) * m + (k + m / 2) % m);
            }
        }
        let q = Self { nodes, weights, order, antipode };
        let residual = q.harmonic_residual(order);
        if !(residual <= 1e-10) {
            return Err(Error::InvalidParameter { name: "quadrature.order", reason: alloc::format!("harmonic residual {residual:e}") });
        }
        Ok(q)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// One node of each antipodal pair with doubled weight, in a fixed order.
    pub fn half(&self) -> (Vec<Vec3>, Vec<f64>) {
        let mut nodes = Vec::with_capacity(self.len() / 2 + 1);
        let mut weights = Vec::with_capacity(self.len() / 2 + 1);
        for (i, &a) in self.antipode.iter().enumerate() {
            if i < a {
                nodes.push(self.nodes[i]);
                weights.push(2.0 * self.weights[i]);
            } else if i == a {
                nodes.push(self.nodes[i]);
                weights.push(self.weights[i]);
            }
        }
        (nodes, weights)
    }

    /// Largest deviation of `Σ w_i Y_lm(Θ_i)` from `√(4π) δ_{l0}` over all
    /// real orthonormal harmonics with `l ≤ degree`.
    pub fn harmonic_residual(&self, degree: usize) -> f64 {
        let count = (degree + 1) * (degree + 1);
        let mut sums = alloc::vec![0.0; count];
        let mut buf = alloc::vec![0.0; count];
        for (node, w) in self.nodes.iter().zip(&self.weights) {
            real_harmonics(degree, node, &mut buf);
            for (s, y) in sums.iter_mut().zip(&buf) {
                *s += w * y;
            }
        }
        let mut worst: f64 = 0.0;
        for (idx, s) in sums.iter().enumerate() {
            let expect = if idx == 0 { libm::sqrt(4.0 * PI) } else { 0.0 };
            worst = worst.max((s - expect).abs());
        }
        worst
    }
}

/// Orthonormal real spherical harmonics `Y_lm(v)`, `l ≤ degree`, stored at
/// index `l² + l + m`.
pub fn real_harmonics(degree: usize, v: &Vec3, out: &mut [f64]) {
    let x = v.z.clamp(-1.0, 1.0);
    let sx = libm::sqrt((1.0 - x * x).max(0.0));
    let phi = libm::atan2(v.y, v.x);
    let l_max = degree;
    // Normalized associated Legendre values P̄_l^m(x).
    let mut p = alloc::vec![0.0; (l_max + 1) * (l_max + 1)];
    let at = |l: usize, m: usize| l * (l_max + 1) + m;
    let mut pmm = libm::sqrt(1.0 / (4.0 * PI));
    for m in 0..=l_max {
        if m > 0 {
            pmm *= -libm::sqrt((2 * m + 1) as f64 / (2 * m) as f64) * sx;
        }
        p[at(m, m)] = pmm;
        if m < l_max {
            p[at(m + 1, m)] = x * libm::sqrt((2 * m + 3) as f64) * pmm;
        }
        for l in m + 2..=l_max {
            let lf = l as f64;
            let mf = m as f64;
            let a = libm::sqrt((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf));
            let b = libm::sqrt(((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0));
            p[at(l, m)] = a * (x * p[at(l - 1, m)] - b * p[at(l - 2, m)]);
        }
    }
    for l in 0..=l_max {
        let base = l * l + l;
        out[base] = p[at(l, 0)];
        for m in 1..=l {
            let (sn, cs) = libm::sincos(m as f64 * phi);
            let v = core::f64::consts::SQRT_2 * p[at(l, m)];
            out[base + m] = v * cs;
            out[base - m] = v * sn;
        }
    }
}
