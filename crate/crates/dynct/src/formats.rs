//! Binary volume (`DYNCT-VOL 1`) and dataset (`DYNCT-CBD 1`) files: a short
//! text header, then little-endian binary64 values.

use std::io::Write;
use std::path::Path;

use dynct_core::data::{Frame, GriddedDataset};
use dynct_core::geometry::{Curve, Roi, Segment, Trajectory};
use dynct_core::reconstruct::VoxelGrid;
use dynct_core::Vec3;

use crate::error::{Error, Result};

pub const VOLUME_MAGIC: &str = "DYNCT-VOL 1";
pub const DATASET_MAGIC: &str = "DYNCT-CBD 1";

struct Header<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Header<'a> {
    fn line(&mut self) -> Result<&'a str> {
        let rest = &self.bytes[self.pos..];
        let end = rest.iter().position(|&b| b == b'\n').ok_or_else(|| Error::format(self.path, "header ends before its last line"))?;
        self.pos += end + 1;
        std::str::from_utf8(&rest[..end]).map_err(|_| Error::format(self.path, "header is not text"))
    }

    /// Next line split into words, with the leading word checked.
    fn record(&mut self, tag: &str) -> Result<Vec<&'a str>> {
        let line = self.line()?;
        let mut words = line.split_ascii_whitespace();
        if words.next() != Some(tag) {
            return Err(Error::format(self.path, format!("expected `{tag}` line, found `{line}`")));
        }
        Ok(words.collect())
    }

    fn numbers(&mut self, tag: &str, n: usize) -> Result<Vec<f64>> {
        let w = self.record(tag)?;
        if w.len() != n {
            return Err(Error::format(self.path, format!("`{tag}` line needs {n} values")));
        }
        w.iter().map(|x| x.parse::<f64>().map_err(|_| Error::format(self.path, format!("bad number `{x}` in `{tag}` line")))).collect()
    }

    fn counts(&mut self, tag: &str, n: usize) -> Result<Vec<usize>> {
        let w = self.record(tag)?;
        if w.len() != n {
            return Err(Error::format(self.path, format!("`{tag}` line needs {n} values")));
        }
        w.iter().map(|x| x.parse::<usize>().map_err(|_| Error::format(self.path, format!("bad count `{x}` in `{tag}` line")))).collect()
    }

    fn payload(&self, expected: usize) -> Result<Vec<f64>> {
        let body = &self.bytes[self.pos..];
        if body.len() != 8 * expected {
            return Err(Error::format(self.path, format!("payload has {} bytes, header declares {}", body.len(), 8 * expected)));
        }
        Ok(body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect())
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingInput(format!("{} does not exist", path.display()))
        } else {
            Error::io(path, e)
        }
    })
}

fn check_magic(h: &mut Header<'_>, magic: &str) -> Result<()> {
    let first = h.line()?;
    if first != magic {
        return Err(Error::format(h.path, format!("magic `{first}` is not `{magic}`")));
    }
    Ok(())
}

fn append_payload(buf: &mut Vec<u8>, values: &[f64]) {
    buf.reserve(8 * values.len());
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

fn write_file(path: &Path, buf: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(buf).map_err(|e| Error::io(path, e))
}

fn refuse_non_finite(path: &Path, values: &[f64]) -> Result<()> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::format(path, format!("value {i} is not finite; refusing to write")));
    }
    Ok(())
}

pub fn volume_bytes(path: &Path, v: &VoxelGrid) -> Result<Vec<u8>> {
    refuse_non_finite(path, &v.values)?;
    if v.values.len() != v.dims.iter().product::<usize>() {
        return Err(Error::format(path, "value count does not match dims"));
    }
    let o = v.origin;
    let mut buf =
        format!("{VOLUME_MAGIC}\ndims {} {} {}\nspacing {:?}\norigin {:?} {:?} {:?}\n", v.dims[0], v.dims[1], v.dims[2], v.spacing, o.x, o.y, o.z).into_bytes();
    append_payload(&mut buf, &v.values);
    Ok(buf)
}

pub fn write_volume(path: &Path, v: &VoxelGrid) -> Result<()> {
    write_file(path, &volume_bytes(path, v)?)
}

pub fn parse_volume(path: &Path, bytes: &[u8]) -> Result<VoxelGrid> {
    let mut h = Header { path, bytes, pos: 0 };
    check_magic(&mut h, VOLUME_MAGIC)?;
    let d = h.counts("dims", 3)?;
    let spacing = h.numbers("spacing", 1)?[0];
    let o = h.numbers("origin", 3)?;
    if spacing.is_nan() || spacing <= 0.0 {
        return Err(Error::format(path, "spacing must be positive"));
    }
    let n = d[0].checked_mul(d[1]).and_then(|x| x.checked_mul(d[2])).ok_or_else(|| Error::format(path, "dims overflow"))?;
    let values = h.payload(n)?;
    Ok(VoxelGrid { dims: [d[0], d[1], d[2]], spacing, origin: Vec3::new(o[0], o[1], o[2]), values })
}

pub fn read_volume(path: &Path) -> Result<VoxelGrid> {
    parse_volume(path, &read_bytes(path)?)
}

fn fmt_vec(v: &Vec3) -> String {
    format!("{:?} {:?} {:?}", v.x, v.y, v.z)
}

pub fn dataset_bytes(path: &Path, d: &GriddedDataset) -> Result<Vec<u8>> {
    refuse_non_finite(path, &d.values)?;
    let mut s = format!(
        "{DATASET_MAGIC}\nroi {} {:?}\ndetector {} {}\nsegments {}\n",
        fmt_vec(&d.roi.center),
        d.roi.radius,
        d.n_u,
        d.n_v,
        d.trajectory.segments().len()
    );
    for seg in d.trajectory.segments() {
        let curve = match &seg.curve {
            Curve::Circle { center, radius, u, v } => format!("circle {} {:?} {} {}", fmt_vec(center), radius, fmt_vec(u), fmt_vec(v)),
            Curve::Line { start, velocity } => format!("line {} {}", fmt_vec(start), fmt_vec(velocity)),
        };
        s += &format!("segment {:?} {:?} {} {curve}\n", seg.a, seg.b, u8::from(seg.periodic));
    }
    for (k, frames) in d.frames.iter().enumerate() {
        s += &format!("frames {k} {}\n", frames.len());
        for f in frames {
            s += &format!("frame {:?} {} {} {} {} {:?} {:?}\n", f.s, fmt_vec(&f.z), fmt_vec(&f.beta0), fmt_vec(&f.e1), fmt_vec(&f.e2), f.u_max, f.v_max);
        }
    }
    let mut buf = s.into_bytes();
    append_payload(&mut buf, &d.values);
    Ok(buf)
}

pub fn write_dataset(path: &Path, d: &GriddedDataset) -> Result<()> {
    write_file(path, &dataset_bytes(path, d)?)
}

fn vec_at(v: &[f64], i: usize) -> Vec3 {
    Vec3::new(v[i], v[i + 1], v[i + 2])
}

pub fn parse_dataset(path: &Path, bytes: &[u8]) -> Result<GriddedDataset> {
    let mut h = Header { path, bytes, pos: 0 };
    check_magic(&mut h, DATASET_MAGIC)?;
    let r = h.numbers("roi", 4)?;
    let det = h.counts("detector", 2)?;
    let n_seg = h.counts("segments", 1)?[0];
    let bad = |msg: &str| Error::format(path, msg);
    let mut segments = Vec::with_capacity(n_seg);
    for _ in 0..n_seg {
        let w = h.record("segment")?;
        if w.len() < 4 {
            return Err(bad("short segment line"));
        }
        let num = |x: &str| x.parse::<f64>().map_err(|_| bad("bad number in segment line"));
        let (a, b) = (num(w[0])?, num(w[1])?);
        let periodic = match w[2] {
            "0" => false,
            "1" => true,
            _ => return Err(bad("segment periodic flag must be 0 or 1")),
        };
        let rest = w[4..].iter().map(|x| num(x)).collect::<Result<Vec<f64>>>()?;
        let curve = match (w[3], rest.len()) {
            ("circle", 10) => Curve::Circle { center: vec_at(&rest, 0), radius: rest[3], u: vec_at(&rest, 4), v: vec_at(&rest, 7) },
            ("line", 6) => Curve::Line { start: vec_at(&rest, 0), velocity: vec_at(&rest, 3) },
            _ => return Err(bad("unknown curve in segment line")),
        };
        segments.push(Segment { a, b, periodic, curve });
    }
    let trajectory = Trajectory::new(segments).map_err(|e| Error::format(path, e.to_string()))?;
    let mut frames = Vec::with_capacity(n_seg);
    for k in 0..n_seg {
        let c = h.counts("frames", 2)?;
        if c[0] != k {
            return Err(bad("frame lists out of order"));
        }
        let mut list = Vec::with_capacity(c[1]);
        for _ in 0..c[1] {
            let v = h.numbers("frame", 15)?;
            list.push(Frame { s: v[0], z: vec_at(&v, 1), beta0: vec_at(&v, 4), e1: vec_at(&v, 7), e2: vec_at(&v, 10), u_max: v[13], v_max: v[14] });
        }
        frames.push(list);
    }
    let n_frames: usize = frames.iter().map(Vec::len).sum();
    let values = h.payload(n_frames * det[0] * det[1])?;
    let roi = Roi { center: vec_at(&r, 0), radius: r[3] };
    GriddedDataset::new(trajectory, roi, det[0], det[1], frames, values).map_err(|e| Error::format(path, e.to_string()))
}

pub fn read_dataset(path: &Path) -> Result<GriddedDataset> {
    parse_dataset(path, &read_bytes(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_volume_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("z.vol");
        let v = VoxelGrid::cube(2, 0.0, 1.0);
        write_volume(&p, &v).unwrap();
        assert_eq!(read_volume(&p).unwrap(), v);
    }

    #[test]
    fn nan_volume_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("n.vol");
        let mut v = VoxelGrid::cube(2, 0.0, 1.0);
        v.values[3] = f64::NAN;
        assert_eq!(write_volume(&p, &v).unwrap_err().class(), "bad-format");
        assert!(!p.exists());
    }

    #[test]
    fn truncated_volume_reports_payload_length() {
        let v = VoxelGrid::cube(3, -1.0, 1.0).sampled(|p| p.x);
        let bytes = volume_bytes(Path::new("t.vol"), &v).unwrap();
        let e = parse_volume(Path::new("t.vol"), &bytes[..bytes.len() - 5]).unwrap_err();
        assert!(e.to_string().contains("payload"), "{e}");
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let v = VoxelGrid::cube(2, 0.0, 1.0);
        let mut bytes = volume_bytes(Path::new("m.vol"), &v).unwrap();
        bytes[6] = b'X';
        assert!(parse_volume(Path::new("m.vol"), &bytes).unwrap_err().to_string().contains("magic"));
        assert!(parse_dataset(Path::new("m.vol"), &volume_bytes(Path::new("m.vol"), &v).unwrap()).is_err());
    }
}
