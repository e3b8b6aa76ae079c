//! Slice images and CSV tables.

use std::fmt::Write as _;
use std::path::Path;

use dynct_core::reconstruct::VoxelGrid;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plane {
    Xy,
    Xz,
    Yz,
}

impl Plane {
    pub fn name(self) -> &'static str {
        match self {
            Plane::Xy => "xy",
            Plane::Xz => "xz",
            Plane::Yz => "yz",
        }
    }
}

/// Central slice of `v` normal to `plane`, row-major with the first in-plane
/// axis fastest. Returns `(width, height, values)`.
pub fn central_slice(v: &VoxelGrid, plane: Plane) -> (usize, usize, Vec<f64>) {
    let [nx, ny, nz] = v.dims;
    let (w, h) = match plane {
        Plane::Xy => (nx, ny),
        Plane::Xz => (nx, nz),
        Plane::Yz => (ny, nz),
    };
    let mut out = Vec::with_capacity(w * h);
    for r in 0..h {
        for c in 0..w {
            let idx = match plane {
                Plane::Xy => v.index(c, r, nz / 2),
                Plane::Xz => v.index(c, ny / 2, r),
                Plane::Yz => v.index(nx / 2, c, r),
            };
            out.push(v.values[idx]);
        }
    }
    (w, h, out)
}

/// Binary 16-bit PGM. Values map linearly from `[lo, hi]` to `[0, 65535]`
/// (clamped); a degenerate window maps everything to 0.
pub fn pgm16_bytes(width: usize, height: usize, values: &[f64], lo: f64, hi: f64) -> Vec<u8> {
    assert_eq!(values.len(), width * height, "slice size");
    let mut buf = format!("P5\n{width} {height}\n65535\n").into_bytes();
    let span = hi - lo;
    for &v in values {
        let q = if span > 0.0 { ((v - lo) / span).clamp(0.0, 1.0) * 65535.0 } else { 0.0 };
        buf.extend_from_slice(&(q.round() as u16).to_be_bytes());
    }
    buf
}

/// Writes the three central slices as `<stem>_<plane>.pgm`, sharing the
/// volume's value range.
pub fn write_slices(dir: &Path, stem: &str, v: &VoxelGrid) -> Result<()> {
    let lo = v.values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for plane in [Plane::Xy, Plane::Xz, Plane::Yz] {
        let (w, h, s) = central_slice(v, plane);
        let path = dir.join(format!("{stem}_{}.pgm", plane.name()));
        std::fs::write(&path, pgm16_bytes(w, h, &s, lo, hi)).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Comma-separated table with a header row.
#[derive(Debug, Clone, Default)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self { text: header.join(",") + "\n" }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text += &cells.join(",");
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, &self.text).map_err(|e| Error::io(path, e))
    }
}

/// Shortest round-trip decimal form.
pub fn num(v: f64) -> String {
    let mut s = String::new();
    write!(s, "{v:?}").expect("writing to a String");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_header_and_scaling() {
        let b = pgm16_bytes(2, 1, &[0.0, 1.0], 0.0, 1.0);
        let head = b"P5\n2 1\n65535\n";
        assert_eq!(&b[..head.len()], head);
        assert_eq!(&b[head.len()..], &[0, 0, 255, 255]);
        let flat = pgm16_bytes(1, 1, &[3.0], 3.0, 3.0);
        assert_eq!(&flat[flat.len() - 2..], &[0, 0]);
    }

    #[test]
    fn slices_pick_the_center() {
        let v = VoxelGrid::zeros([3, 4, 5], 1.0, dynct_core::Vec3::zeros()).sampled(|p| p.x + 10.0 * p.y + 100.0 * p.z);
        let (w, h, s) = central_slice(&v, Plane::Xz);
        assert_eq!((w, h), (3, 5));
        assert_eq!(s[w + 1], 1.0 + 20.0 + 100.0);
    }

    #[test]
    fn csv_rows() {
        let mut c = Csv::new(&["a", "b"]);
        c.row(&[num(0.1), num(2.0)]);
        assert_eq!(c.as_str(), "a,b\n0.1,2.0\n");
    }
}
