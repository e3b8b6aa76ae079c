use alloc::vec::Vec;

use crate::math::CompensatedSum;
use crate::{Error, Result, Vec3};

/// Regular grid of voxel centers `origin + (i, j, k) · spacing`, values in
/// x-fastest order.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub dims: [usize; 3],
    pub spacing: f64,
    pub origin: Vec3,
    pub values: Vec<f64>,
}

impl VoxelGrid {
    pub fn zeros(dims: [usize; 3], spacing: f64, origin: Vec3) -> Self {
        Self { dims, spacing, origin, values: alloc::vec![0.0; dims[0] * dims[1] * dims[2]] }
    }

    /// `n³` voxels whose centers span the cube `[lo, hi]³`.
    pub fn cube(n: usize, lo: f64, hi: f64) -> Self {
        let spacing = if n > 1 { (hi - lo) / (n - 1) as f64 } else { hi - lo };
        Self::zeros([n, n, n], spacing, Vec3::repeat(lo))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let j = (idx / self.dims[0]) % self.dims[1];
        let k = idx / (self.dims[0] * self.dims[1]);
        [i, j, k]
    }

    pub fn point(&self, idx: usize) -> Vec3 {
        let [i, j, k] = self.coords(idx);
        self.origin + Vec3::new(i as f64, j as f64, k as f64) * self.spacing
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.dims == other.dims && self.spacing == other.spacing && self.origin == other.origin
    }

    /// Grid of the same shape filled by `f(point)`.
    pub fn sampled(&self, f: impl Fn(&Vec3) -> f64) -> Self {
        let values = (0..self.len()).map(|i| f(&self.point(i))).collect();
        Self { values, ..self.clone() }
    }

    /// Central-difference gradient magnitude (one-sided at the faces).
    pub fn gradient_magnitude(&self) -> Self {
        let mut out = Vec::with_capacity(self.len());
        for idx in 0..self.len() {
            let c = self.coords(idx);
            let mut g2 = 0.0;
            for a in 0..3 {
                if self.dims[a] < 2 {
                    continue;
                }
                let mut lo = c;
                let mut hi = c;
                if c[a] > 0 {
                    lo[a] -= 1;
                }
                if c[a] + 1 < self.dims[a] {
                    hi[a] += 1;
                }
                let d = (self.values[self.index(hi[0], hi[1], hi[2])] - self.values[self.index(lo[0], lo[1], lo[2])]) / ((hi[a] - lo[a]) as f64 * self.spacing);
                g2 += d * d;
            }
            out.push(libm::sqrt(g2));
        }
        Self { values: out, ..self.clone() }
    }

    /// Seven-point negative Laplacian with the boundary layer set to zero.
    pub fn neg_laplacian(&self) -> Self {
        let mut out = alloc::vec![0.0; self.len()];
        let h2 = self.spacing * self.spacing;
        for (idx, o) in out.iter_mut().enumerate() {
            let [i, j, k] = self.coords(idx);
            if (0..3).any(|a| [i, j, k][a] == 0 || [i, j, k][a] + 1 >= self.dims[a]) {
                continue;
            }
            let c = self.values[idx];
            let sum = self.values[self.index(i - 1, j, k)]
                + self.values[self.index(i + 1, j, k)]
                + self.values[self.index(i, j - 1, k)]
                + self.values[self.index(i, j + 1, k)]
                + self.values[self.index(i, j, k - 1)]
                + self.values[self.index(i, j, k + 1)];
            *o = (6.0 * c - sum) / h2;
        }
        Self { values: out, ..self.clone() }
    }

    /// Trilinear interpolation; `None` outside the box spanned by the centers.
    pub fn trilinear(&self, p: &Vec3) -> Option<f64> {
        let g = (p - self.origin) / self.spacing;
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let n = self.dims[a];
            if !(g[a] >= 0.0 && g[a] <= (n - 1) as f64) {
                return None;
            }
            let i = (libm::floor(g[a]) as usize).min(n.saturating_sub(2));
            base[a] = i;
            frac[a] = if n > 1 { g[a] - i as f64 } else { 0.0 };
        }
        let mut acc = 0.0;
        for corner in 0..8 {
            let mut w = 1.0;
            let mut c = base;
            for a in 0..3 {
                let hi = corner >> a & 1 == 1;
                if hi {
                    if self.dims[a] < 2 {
                        w = 0.0;
                        break;
                    }
                    c[a] += 1;
                    w *= frac[a];
                } else {
                    w *= 1.0 - frac[a];
                }
            }
            if w != 0.0 {
                acc += w * self.values[self.index(c[0], c[1], c[2])];
            }
        }
        Some(acc)
    }

    /// Distance in voxel units from each center to the nearest voxel that
    /// borders a jump of more than `tol` in `self`.
    pub fn jump_distance(&self, tol: f64) -> Vec<f64> {
        let mut marks = Vec::new();
        for idx in 0..self.len() {
            let c = self.coords(idx);
            let jump = (0..3).any(|a| {
                let mut n = c;
                if c[a] + 1 >= self.dims[a] {
                    return false;
                }
                n[a] += 1;
                (self.values[self.index(n[0], n[1], n[2])] - self.values[idx]).abs() > tol
            });
            if jump {
                marks.push(c);
            }
        }
        (0..self.len())
            .map(|idx| {
                let c = self.coords(idx);
                marks
                    .iter()
                    .map(|m| {
                        let d: f64 = (0..3).map(|a| (c[a] as f64 - m[a] as f64).powi(2)).sum();
                        libm::sqrt(d)
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    /// Voxels at least `layers` cells away from every face.
    pub fn interior_mask(&self, layers: usize) -> Vec<bool> {
        (0..self.len())
            .map(|idx| {
                let c = self.coords(idx);
                (0..3).all(|a| c[a] >= layers && c[a] + layers < self.dims[a])
            })
            .collect()
    }
}

/// Error norms of a reconstruction against the true volume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorMetrics {
    /// `‖r - t‖₂ / ‖t‖₂`, or `‖r - t‖₂` when `absolute`.
    pub rel_l2: f64,
    pub max_abs: f64,
    pub interior_rel_l2: f64,
    pub interior_max_abs: f64,
    /// The truth has zero norm; `rel_l2` values are absolute norms.
    pub absolute: bool,
}

/// Gradient energy off the boundary, normalized by the energy of the
/// boundary shell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArtifactEnergy {
    pub region_voxels: usize,
    pub shell_voxels: usize,
    /// `Σ |∇v|²` over the selected region.
    pub region: f64,
    /// `Σ |∇v|²` over the shell.
    pub shell: f64,
    /// `region / shell`; zero when the region is empty.
    pub normalized: f64,
}

/// `distance` is in voxel units. The shell is `distance ≤ 1`; the region is
/// the part of `select` with `distance > 3`.
pub fn artifact_energy(v: &VoxelGrid, distance: &[f64], select: &[bool]) -> Result<ArtifactEnergy> {
    if distance.len() != v.len() || select.len() != v.len() {
        return Err(Error::GridMismatch("masks and volume differ in length".into()));
    }
    let g = v.gradient_magnitude();
    let mut region = CompensatedSum::new();
    let mut shell = CompensatedSum::new();
    let (mut nr, mut ns) = (0, 0);
    for (i, e) in g.values.iter().map(|x| x * x).enumerate() {
        if distance[i] <= 1.0 {
            shell.add(e);
            ns += 1;
        } else if distance[i] > 3.0 && select[i] {
            region.add(e);
            nr += 1;
        }
    }
    let (region, shell) = (region.value(), shell.value());
    let normalized = if nr == 0 { 0.0 } else { region / shell };
    Ok(ArtifactEnergy { region_voxels: nr, shell_voxels: ns, region, shell, normalized })
}

pub fn error_metrics(recon: &VoxelGrid, truth: &VoxelGrid) -> Result<ErrorMetrics> {
    if !recon.same_shape(truth) || recon.len() != truth.len() {
        return Err(Error::GridMismatch("reconstruction and truth grids differ".into()));
    }
    let mask = truth.interior_mask(2);
    let mut diff = CompensatedSum::new();
    let mut norm = CompensatedSum::new();
    let mut idiff = CompensatedSum::new();
    let mut inorm = CompensatedSum::new();
    let mut max_abs: f64 = 0.0;
    let mut imax: f64 = 0.0;
    for (i, (r, t)) in recon.values.iter().zip(&truth.values).enumerate() {
        let d = r - t;
        diff.add(d * d);
        norm.add(t * t);
        max_abs = max_abs.max(d.abs());
        if mask[i] {
            idiff.add(d * d);
            inorm.add(t * t);
            imax = imax.max(d.abs());
        }
    }
    let absolute = norm.value() == 0.0;
    let ratio = |d: f64, n: f64| if n > 0.0 { libm::sqrt(d / n) } else { libm::sqrt(d) };
    Ok(ErrorMetrics {
        rel_l2: ratio(diff.value(), norm.value()),
        max_abs,
        interior_rel_l2: ratio(idiff.value(), inorm.value()),
        interior_max_abs: imax,
        absolute,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metrics_examples() {
        let t = VoxelGrid::cube(6, -1.0, 1.0).sampled(|p| 1.0 + p.x * p.x);
        let m = error_metrics(&t, &t).unwrap();
        assert_eq!((m.rel_l2, m.max_abs), (0.0, 0.0));
        let scaled = VoxelGrid { values: t.values.iter().map(|v| 1.1 * v).collect(), ..t.clone() };
        let m = error_metrics(&scaled, &t).unwrap();
        assert!((m.rel_l2 - 0.1).abs() < 1e-12);
        let zero = VoxelGrid::cube(6, -1.0, 1.0);
        let m = error_metrics(&t, &zero).unwrap();
        assert!(m.absolute);
        assert!(error_metrics(&t, &VoxelGrid::cube(5, -1.0, 1.0)).is_err());
    }

    #[test]
    fn grid_indexing() {
        let g = VoxelGrid::zeros([3, 4, 5], 0.5, Vec3::new(-1.0, 0.0, 1.0));
        let idx = g.index(2, 1, 3);
        assert_eq!(g.coords(idx), [2, 1, 3]);
        assert_eq!(g.point(idx), Vec3::new(0.0, 0.5, 2.5));
    }

    #[test]
    fn trilinear_reproduces_affine() {
        let g = VoxelGrid::cube(5, -1.0, 1.0).sampled(|p| 1.0 + 2.0 * p.x - p.y + 0.5 * p.z);
        let p = Vec3::new(0.13, -0.71, 0.4);
        assert!((g.trilinear(&p).unwrap() - (1.0 + 0.26 + 0.71 + 0.2)).abs() < 1e-12);
        assert!(g.trilinear(&Vec3::new(1.1, 0.0, 0.0)).is_none());
    }

    #[test]
    fn jump_distance_and_energy() {
        let g = VoxelGrid::cube(9, -1.0, 1.0).sampled(|p| if p.x < 0.1 { 1.0 } else { 0.0 });
        let d = g.jump_distance(0.5);
        assert_eq!(d[g.index(4, 0, 0)], 0.0);
        assert_eq!(d[g.index(0, 3, 3)], 4.0);
        let all = alloc::vec![true; g.len()];
        let e = artifact_energy(&g, &d, &all).unwrap();
        assert_eq!(e.region, 0.0);
        assert!(e.shell > 0.0);
        assert_eq!(e.region_voxels, 9 * 9 * 2);
    }

    #[test]
    fn laplacian_of_quadratic() {
        let g = VoxelGrid::cube(7, -1.0, 1.0).sampled(|p| p.norm_squared());
        let l = g.neg_laplacian();
        let c = l.index(3, 3, 3);
        assert!((l.values[c] + 6.0).abs() < 1e-9);
    }
}
