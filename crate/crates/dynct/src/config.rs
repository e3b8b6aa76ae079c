//! Experiment configuration: one `section.key = value` per line, `#` starts
//! a comment. Relative paths resolve against the directory of the file.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use dynct_core::branches::AdmissibilityParams;
use dynct_core::data::{DetectorSpec, GrangeatSettings, PhiCutoff};
use dynct_core::geometry::{
    Attenuation, BumpAttenuation, BumpField, Deformation, EpsilonFamily, Geometry, GridDisplacement, Identity, MotionShape, Roi, Temporal, Trajectory, Twist,
    Unit,
};
use dynct_core::math::rotation_from_euler;
use dynct_core::phantom::{Phantom, Primitive};
use dynct_core::reconstruct::{ReconParams, SmoothCutoff, VoxelGrid, XStarXSettings};
use dynct_core::{Mat3, Vec3};

use crate::error::{Error, Result};
use crate::formats::read_volume;

/// Every accepted key. Phantom keys may repeat; all others appear at most once.
pub const KEYS: &[&str] = &[
    "trajectory.kind",
    "trajectory.radius",
    "trajectory.points",
    "roi.center",
    "roi.radius",
    "deformation.kind",
    "deformation.eps",
    "deformation.omega",
    "deformation.s_ref",
    "deformation.center",
    "deformation.radius",
    "deformation.direction",
    "deformation.axis",
    "deformation.grid_x",
    "deformation.grid_y",
    "deformation.grid_z",
    "attenuation.kind",
    "attenuation.center",
    "attenuation.radius",
    "attenuation.scale",
    "phantom.gaussian",
    "phantom.ball",
    "phantom.ellipsoid",
    "detector.n_u",
    "detector.n_v",
    "detector.n_s",
    "detector.margin",
    "voxel.dims",
    "voxel.spacing",
    "voxel.origin",
    "quadrature.order",
    "params.eps_margin",
    "params.eps_end",
    "params.eps_arc",
    "params.scan_nodes",
    "params.arc_samples",
    "params.h",
    "params.tau_h",
    "params.n_c",
    "params.allow_holes",
    "data.source",
    "data.path",
    "data.memoize",
    "recon.method",
    "phi.eps1",
    "phi.eps2",
    "converge.eps_list",
    "converge.data",
    "compare.risk_threshold",
    "compare.n_s",
    "compare.n_t",
    "compare.reconstruct",
    "analyze.points",
    "analyze.n_s",
    "output.dir",
];

const REPEATABLE: &[&str] = &["phantom.gaussian", "phantom.ball", "phantom.ellipsoid"];

#[derive(Debug, Clone, PartialEq)]
pub enum TrajectorySpec {
    Circle { radius: f64 },
    TwoCircles { radius: f64 },
    Polyline { points: Vec<Vec3> },
}

impl TrajectorySpec {
    pub fn build(&self) -> Result<Trajectory> {
        Ok(match self {
            TrajectorySpec::Circle { radius } => Trajectory::circle(*radius),
            TrajectorySpec::TwoCircles { radius } => Trajectory::two_orthogonal_circles(*radius),
            TrajectorySpec::Polyline { points } => Trajectory::polyline(points)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionKind {
    Identity,
    Bump,
    Twist,
    Rigid,
    Grid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeformationSpec {
    pub kind: MotionKind,
    pub eps: f64,
    pub omega: f64,
    pub s_ref: f64,
    pub center: Vec3,
    pub radius: f64,
    pub direction: Vec3,
    pub axis: Vec3,
    pub grid: Option<[PathBuf; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttenuationSpec {
    /// Bump weight with amplitude `scale · eps`; `None` for `A ≡ 1`.
    pub bump: Option<(BumpField, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoxelSpec {
    pub dims: [usize; 3],
    pub spacing: f64,
    pub origin: Vec3,
}

impl VoxelSpec {
    pub fn grid(&self) -> VoxelGrid {
        VoxelGrid::zeros(self.dims, self.spacing, self.origin)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamsSpec {
    /// `None` derives the threshold from the geometry.
    pub eps_margin: Option<f64>,
    pub eps_end: f64,
    pub eps_arc: f64,
    pub scan_nodes: usize,
    pub arc_samples: usize,
    pub h: Option<f64>,
    pub tau_h: f64,
    pub n_c: usize,
    pub allow_holes: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataMode {
    Analytic,
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Dynamic,
    StaticLocalized { eps1: f64, eps2: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    Analytic,
    Gridded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub trajectory: TrajectorySpec,
    pub roi: Roi,
    pub deformation: DeformationSpec,
    pub attenuation: AttenuationSpec,
    pub phantom: Phantom,
    pub detector: DetectorSpec,
    pub voxel: VoxelSpec,
    pub quadrature_order: usize,
    pub params: ParamsSpec,
    pub data: DataMode,
    pub memoize: bool,
    pub method: Method,
    pub eps_list: Vec<f64>,
    pub sweep_mode: SweepMode,
    pub risk_threshold: f64,
    pub xstarx: XStarXSettings,
    pub compare_reconstruct: bool,
    pub analyze_points: Vec<Vec3>,
    pub analyze_n_s: usize,
    pub output_dir: PathBuf,
}

struct Entry {
    key: String,
    value: String,
    line: usize,
}

struct Table {
    entries: Vec<Entry>,
}

fn parse_number(key: &str, line: usize, text: &str) -> Result<f64> {
    let v: f64 = text.trim().parse().map_err(|_| Error::invalid(key, format!("line {line}: `{}` is not a number", text.trim())))?;
    if !v.is_finite() {
        return Err(Error::invalid(key, format!("line {line}: value must be finite")));
    }
    Ok(v)
}

fn parse_numbers(key: &str, line: usize, text: &str) -> Result<Vec<f64>> {
    text.split(',').map(|t| parse_number(key, line, t)).collect()
}

fn parse_vec3(key: &str, line: usize, text: &str) -> Result<Vec3> {
    let v = parse_numbers(key, line, text)?;
    if v.len() != 3 {
        return Err(Error::invalid(key, format!("line {line}: expected three comma-separated numbers")));
    }
    Ok(Vec3::new(v[0], v[1], v[2]))
}

impl Table {
    fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut entries: Vec<Entry> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(Error::Syntax { path: path.into(), line, msg: "expected `section.key = value`".into() });
            };
            let key = key.trim();
            let value = value.trim();
            let well_formed = key.split_once('.').is_some_and(|(s, k)| {
                let ok = |t: &str| !t.is_empty() && t.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
                ok(s) && ok(k)
            });
            if !well_formed {
                return Err(Error::Syntax { path: path.into(), line, msg: format!("malformed key `{key}`") });
            }
            if value.is_empty() {
                return Err(Error::Syntax { path: path.into(), line, msg: format!("missing value for `{key}`") });
            }
            if !KEYS.contains(&key) {
                return Err(Error::UnknownKey { key: key.into(), line, hint: suggestion(key) });
            }
            if !REPEATABLE.contains(&key) {
                if let Some(prev) = entries.iter().find(|e| e.key == key) {
                    return Err(Error::Syntax { path: path.into(), line, msg: format!("`{key}` already set on line {}", prev.line) });
                }
            }
            entries.push(Entry { key: key.into(), value: value.into(), line });
        }
        Ok(Self { entries })
    }

    fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    fn all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a Entry> + 'a {
        self.entries.iter().filter(move |e| e.key == key)
    }

    fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.get(key).map_or(default, |e| e.value.as_str())
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        self.get(key).map_or(Ok(default), |e| parse_number(key, e.line, &e.value))
    }

    fn f64_opt(&self, key: &str) -> Result<Option<f64>> {
        self.get(key).map(|e| parse_number(key, e.line, &e.value)).transpose()
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        self.get(key)
            .map_or(Ok(default), |e| e.value.parse().map_err(|_| Error::invalid(key, format!("line {}: `{}` is not a nonnegative integer", e.line, e.value))))
    }

    fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        self.get(key).map_or(Ok(default), |e| match e.value.as_str() {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            other => Err(Error::invalid(key, format!("line {}: `{other}` is not a boolean", e.line))),
        })
    }

    fn vec3_or(&self, key: &str, default: Vec3) -> Result<Vec3> {
        self.get(key).map_or(Ok(default), |e| parse_vec3(key, e.line, &e.value))
    }

    fn points(&self, key: &str) -> Result<Option<Vec<Vec3>>> {
        self.get(key).map(|e| e.value.split(';').map(|p| parse_vec3(key, e.line, p)).collect()).transpose()
    }
}

fn suggestion(key: &str) -> String {
    let best = KEYS.iter().map(|k| (strsim::levenshtein(key, k), *k)).min();
    let section = key.split('.').next().unwrap_or(key);
    let best_section = KEYS
        .iter()
        .filter_map(|k| k.split('.').next())
        .map(|s| (strsim::levenshtein(section, s), s))
        .min()
        .filter(|(d, s)| *d > 0 && *d <= 3 && !key.starts_with(&format!("{s}.")));
    match (best, best_section) {
        (Some((d, k)), _) if d <= 4 => format!("; did you mean `{k}`?"),
        (_, Some((_, s))) => format!("; did you mean section `{s}`?"),
        _ => String::new(),
    }
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(Error::invalid(key, format!("must be positive (got {v})")))
    }
}

fn at_least(key: &str, v: usize, min: usize) -> Result<usize> {
    if v >= min {
        Ok(v)
    } else {
        Err(Error::invalid(key, format!("must be at least {min} (got {v})")))
    }
}

fn existing(key: &str, base: &Path, value: &str) -> Result<PathBuf> {
    let p = base.join(value);
    if !p.is_file() {
        return Err(Error::MissingInput(format!("`{key}` refers to {} which does not exist", p.display())));
    }
    Ok(p)
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingInput(format!("config file {} does not exist", path.display()))
            } else {
                Error::io(path, e)
            }
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, path, &base)
    }

    /// Parses `text`; `path` labels errors and `base` anchors relative paths.
    pub fn parse(text: &str, path: &Path, base: &Path) -> Result<Self> {
        let t = Table::parse(text, path)?;

        let radius = positive("trajectory.radius", t.f64_or("trajectory.radius", 3.0)?)?;
        let trajectory = match t.str_or("trajectory.kind", "two-circles") {
            "circle" => TrajectorySpec::Circle { radius },
            "two-circles" => TrajectorySpec::TwoCircles { radius },
            "polyline" => {
                let points = t.points("trajectory.points")?.ok_or_else(|| Error::invalid("trajectory.points", "required for a polyline"))?;
                if points.len() < 2 {
                    return Err(Error::invalid("trajectory.points", "a polyline needs at least two points"));
                }
                TrajectorySpec::Polyline { points }
            }
            other => return Err(Error::invalid("trajectory.kind", format!("`{other}` is not one of circle, two-circles, polyline"))),
        };
        let roi = Roi { center: t.vec3_or("roi.center", Vec3::zeros())?, radius: positive("roi.radius", t.f64_or("roi.radius", 2.0)?)? };

        let kind = match t.str_or("deformation.kind", "identity") {
            "identity" => MotionKind::Identity,
            "bump" => MotionKind::Bump,
            "twist" => MotionKind::Twist,
            "rigid" => MotionKind::Rigid,
            "grid" => MotionKind::Grid,
            other => return Err(Error::invalid("deformation.kind", format!("`{other}` is not one of identity, bump, twist, rigid, grid"))),
        };
        let eps = t.f64_or("deformation.eps", 0.0)?;
        if eps < 0.0 {
            return Err(Error::invalid("deformation.eps", "must be nonnegative"));
        }
        let nonzero = |key: &str, v: Vec3| if v.norm() > 0.0 { Ok(v) } else { Err(Error::invalid(key, "must be a nonzero vector")) };
        let grid = if kind == MotionKind::Grid {
            let mut files = Vec::new();
            for key in ["deformation.grid_x", "deformation.grid_y", "deformation.grid_z"] {
                let v = t.get(key).ok_or_else(|| Error::invalid(key, "required for a grid deformation"))?;
                files.push(existing(key, base, &v.value)?);
            }
            Some([files[0].clone(), files[1].clone(), files[2].clone()])
        } else {
            None
        };
        let deformation = DeformationSpec {
            kind,
            eps,
            omega: t.f64_or("deformation.omega", 1.0)?,
            s_ref: t.f64_or("deformation.s_ref", 0.0)?,
            center: t.vec3_or("deformation.center", roi.center)?,
            radius: positive("deformation.radius", t.f64_or("deformation.radius", 1.8)?)?,
            direction: nonzero("deformation.direction", t.vec3_or("deformation.direction", Vec3::x())?)?,
            axis: nonzero("deformation.axis", t.vec3_or("deformation.axis", Vec3::z())?)?,
            grid,
        };

        let attenuation = match t.str_or("attenuation.kind", "unit") {
            "unit" => AttenuationSpec { bump: None },
            "bump" => AttenuationSpec {
                bump: Some((
                    BumpField {
                        center: t.vec3_or("attenuation.center", roi.center)?,
                        radius: positive("attenuation.radius", t.f64_or("attenuation.radius", 1.5)?)?,
                    },
                    t.f64_or("attenuation.scale", 0.5)?,
                )),
            },
            other => return Err(Error::invalid("attenuation.kind", format!("`{other}` is not one of unit, bump"))),
        };

        let mut components = Vec::new();
        for e in t.all("phantom.gaussian") {
            let v = parse_numbers(&e.key, e.line, &e.value)?;
            if v.len() != 5 {
                return Err(Error::invalid("phantom.gaussian", format!("line {}: expected cx, cy, cz, amplitude, width", e.line)));
            }
            components.push(Primitive::Gaussian { center: Vec3::new(v[0], v[1], v[2]), amplitude: v[3], width: positive("phantom.gaussian", v[4])? });
        }
        for e in t.all("phantom.ball") {
            let v = parse_numbers(&e.key, e.line, &e.value)?;
            if v.len() != 5 {
                return Err(Error::invalid("phantom.ball", format!("line {}: expected cx, cy, cz, radius, amplitude", e.line)));
            }
            components.push(Primitive::Ellipsoid {
                center: Vec3::new(v[0], v[1], v[2]),
                semi_axes: Vec3::repeat(positive("phantom.ball", v[3])?),
                rotation: Mat3::identity(),
                amplitude: v[4],
            });
        }
        for e in t.all("phantom.ellipsoid") {
            let v = parse_numbers(&e.key, e.line, &e.value)?;
            if v.len() != 7 && v.len() != 10 {
                return Err(Error::invalid("phantom.ellipsoid", format!("line {}: expected cx, cy, cz, a, b, c, amplitude[, three angles]", e.line)));
            }
            if v[3..6].iter().any(|a| *a <= 0.0) {
                return Err(Error::invalid("phantom.ellipsoid", format!("line {}: semi-axes must be positive", e.line)));
            }
            let rotation = if v.len() == 10 { rotation_from_euler([v[7], v[8], v[9]]) } else { Mat3::identity() };
            components.push(Primitive::Ellipsoid { center: Vec3::new(v[0], v[1], v[2]), semi_axes: Vec3::new(v[3], v[4], v[5]), rotation, amplitude: v[6] });
        }

        let detector = DetectorSpec {
            n_u: at_least("detector.n_u", t.usize_or("detector.n_u", 128)?, 2)?,
            n_v: at_least("detector.n_v", t.usize_or("detector.n_v", 128)?, 2)?,
            n_s: at_least("detector.n_s", t.usize_or("detector.n_s", 360)?, 2)?,
            margin: t.f64_or("detector.margin", 0.05)?,
        };
        if detector.margin < 0.0 {
            return Err(Error::invalid("detector.margin", "must be nonnegative"));
        }

        let dims = match t.get("voxel.dims") {
            None => [16; 3],
            Some(e) => {
                let v: Vec<usize> = e
                    .value
                    .split(',')
                    .map(|x| x.trim().parse().map_err(|_| Error::invalid("voxel.dims", format!("line {}: `{}` is not a count", e.line, x.trim()))))
                    .collect::<Result<_>>()?;
                match v.as_slice() {
                    [n] => [*n; 3],
                    [a, b, c] => [*a, *b, *c],
                    _ => return Err(Error::invalid("voxel.dims", "expected one or three counts")),
                }
            }
        };
        if dims.contains(&0) {
            return Err(Error::invalid("voxel.dims", "counts must be positive"));
        }
        let spacing = positive("voxel.spacing", t.f64_or("voxel.spacing", 0.1)?)?;
        let half = Vec3::new((dims[0] - 1) as f64, (dims[1] - 1) as f64, (dims[2] - 1) as f64) * (0.5 * spacing);
        let origin = t.vec3_or("voxel.origin", roi.center - half)?;

        let defaults = AdmissibilityParams::default();
        let grangeat = GrangeatSettings::default();
        let params = ParamsSpec {
            eps_margin: t.f64_opt("params.eps_margin")?.map(|v| positive("params.eps_margin", v)).transpose()?,
            eps_end: positive("params.eps_end", t.f64_or("params.eps_end", defaults.eps_end_fraction)?)?,
            eps_arc: positive("params.eps_arc", t.f64_or("params.eps_arc", defaults.eps_arc)?)?,
            scan_nodes: at_least("params.scan_nodes", t.usize_or("params.scan_nodes", defaults.scan_nodes)?, 8)?,
            arc_samples: at_least("params.arc_samples", t.usize_or("params.arc_samples", defaults.arc_samples)?, 2)?,
            h: t.f64_opt("params.h")?.map(|v| positive("params.h", v)).transpose()?,
            tau_h: positive("params.tau_h", t.f64_or("params.tau_h", grangeat.tau_h)?)?,
            n_c: at_least("params.n_c", t.usize_or("params.n_c", grangeat.n_c)?, 8)?,
            allow_holes: t.bool_or("params.allow_holes", false)?,
        };

        let data = match t.str_or("data.source", "analytic") {
            "analytic" => DataMode::Analytic,
            "file" => {
                let e = t.get("data.path").ok_or_else(|| Error::MissingInput("`data.source = file` needs `data.path`".into()))?;
                DataMode::File(existing("data.path", base, &e.value)?)
            }
            other => return Err(Error::invalid("data.source", format!("`{other}` is not one of analytic, file"))),
        };

        let method = match t.str_or("recon.method", "dynamic") {
            "dynamic" => Method::Dynamic,
            "static-localized" => Method::StaticLocalized { eps1: t.f64_or("phi.eps1", 0.0)?, eps2: positive("phi.eps2", t.f64_or("phi.eps2", 0.3)?)? },
            other => return Err(Error::invalid("recon.method", format!("`{other}` is not one of dynamic, static-localized"))),
        };

        let eps_list = match t.get("converge.eps_list") {
            None => vec![0.2, 0.1, 0.05, 0.025, 0.0],
            Some(e) => parse_numbers("converge.eps_list", e.line, &e.value)?,
        };
        if eps_list.iter().any(|e| *e < 0.0) {
            return Err(Error::invalid("converge.eps_list", "values must be nonnegative"));
        }
        let sweep_mode = match t.str_or("converge.data", "analytic") {
            "analytic" => SweepMode::Analytic,
            "gridded" => SweepMode::Gridded,
            other => return Err(Error::invalid("converge.data", format!("`{other}` is not one of analytic, gridded"))),
        };

        let xdef = XStarXSettings::default();
        let xstarx = XStarXSettings {
            n_s: at_least("compare.n_s", t.usize_or("compare.n_s", xdef.n_s)?, 2)?,
            n_t: at_least("compare.n_t", t.usize_or("compare.n_t", xdef.n_t)?, 2)?,
            chi1: SmoothCutoff { ramp: xdef.chi1.ramp },
            ..xdef
        };

        Ok(Self {
            trajectory,
            roi,
            deformation,
            attenuation,
            phantom: Phantom::new(components),
            detector,
            voxel: VoxelSpec { dims, spacing, origin },
            quadrature_order: at_least("quadrature.order", t.usize_or("quadrature.order", 29)?, 1)?,
            params,
            data,
            memoize: t.bool_or("data.memoize", false)?,
            method,
            eps_list,
            sweep_mode,
            risk_threshold: t.f64_or("compare.risk_threshold", 0.5)?,
            xstarx,
            compare_reconstruct: t.bool_or("compare.reconstruct", true)?,
            analyze_points: t.points("analyze.points")?.unwrap_or_else(|| vec![roi.center]),
            analyze_n_s: at_least("analyze.n_s", t.usize_or("analyze.n_s", 8)?, 1)?,
            output_dir: base.join(t.str_or("output.dir", ".")),
        })
    }

    /// The `ε`-family behind bump and twist motions.
    pub fn family(&self) -> Option<EpsilonFamily> {
        let d = &self.deformation;
        let motion = match d.kind {
            MotionKind::Bump => {
                MotionShape::Bump { field: BumpField { center: d.center, radius: d.radius }, direction: d.direction, omega: d.omega, s_ref: d.s_ref }
            }
            MotionKind::Twist => MotionShape::Twist { center: d.center, axis: d.axis, radius: d.radius, omega: d.omega, s_ref: d.s_ref },
            _ => return None,
        };
        Some(EpsilonFamily { motion, attenuation: self.attenuation.bump })
    }

    /// Motion and weight at amplitude `eps`; both are trivial at `eps = 0`.
    pub fn motion_at(&self, eps: f64) -> Result<(Arc<dyn Deformation>, Arc<dyn Attenuation>)> {
        if let Some(f) = self.family() {
            return Ok(f.at(eps)?);
        }
        if eps == 0.0 {
            return Ok((Arc::new(Identity), Arc::new(Unit)));
        }
        let d = &self.deformation;
        let temporal = Temporal { amplitude: eps, omega: d.omega, s_ref: d.s_ref };
        let deformation: Arc<dyn Deformation> = match d.kind {
            MotionKind::Identity => Arc::new(Identity),
            MotionKind::Rigid => Arc::new(Twist::rigid(d.center, d.axis, temporal)),
            MotionKind::Grid => Arc::new(load_displacement(d.grid.as_ref().expect("grid files checked at parse"), temporal)?),
            MotionKind::Bump | MotionKind::Twist => unreachable!("handled by the family"),
        };
        let attenuation: Arc<dyn Attenuation> = match self.attenuation.bump {
            None => Arc::new(Unit),
            Some((field, scale)) => Arc::new(
                BumpAttenuation::new(field, Temporal { amplitude: scale * eps, omega: 1.0, s_ref: 0.0 })
                    .ok_or_else(|| Error::invalid("attenuation.scale", "scale * eps must stay below 1"))?,
            ),
        };
        Ok((deformation, attenuation))
    }

    pub fn geometry_at(&self, eps: f64) -> Result<Geometry> {
        let (d, a) = self.motion_at(eps)?;
        Ok(Geometry::new(self.trajectory.build()?, d, a, self.roi)?)
    }

    pub fn geometry(&self) -> Result<Geometry> {
        self.geometry_at(self.deformation.eps)
    }

    pub fn admissibility(&self, geom: &Geometry) -> Result<AdmissibilityParams> {
        let p = &self.params;
        let base = AdmissibilityParams::for_geometry(geom)?;
        Ok(AdmissibilityParams {
            eps_margin: p.eps_margin.unwrap_or(base.eps_margin),
            eps_end_fraction: p.eps_end,
            eps_arc: p.eps_arc,
            scan_nodes: p.scan_nodes,
            arc_samples: p.arc_samples,
            ..base
        })
    }

    pub fn recon_params(&self, geom: &Geometry) -> Result<ReconParams> {
        Ok(ReconParams {
            admissibility: self.admissibility(geom)?,
            grangeat: GrangeatSettings { n_c: self.params.n_c, tau_h: self.params.tau_h },
            h: self.params.h,
            allow_holes: self.params.allow_holes,
        })
    }

    pub fn phi(&self, geom: &Geometry) -> Result<Option<PhiCutoff>> {
        match self.method {
            Method::Dynamic => Ok(None),
            Method::StaticLocalized { eps1, eps2 } => Ok(Some(PhiCutoff::new(eps1, eps2, geom.d_min())?)),
        }
    }

    pub fn require_phantom(&self) -> Result<&Phantom> {
        if self.phantom.is_empty() {
            return Err(Error::invalid("phantom", "no primitives given (phantom.gaussian, phantom.ball or phantom.ellipsoid)"));
        }
        Ok(&self.phantom)
    }
}

fn load_displacement(files: &[PathBuf; 3], temporal: Temporal) -> Result<GridDisplacement> {
    let comps = files.iter().map(|p| read_volume(p)).collect::<Result<Vec<_>>>()?;
    if !comps.iter().all(|c| c.same_shape(&comps[0])) {
        return Err(Error::invalid("deformation.grid_x", "the three displacement components must share one grid"));
    }
    let values = (0..comps[0].len()).map(|i| Vec3::new(comps[0].values[i], comps[1].values[i], comps[2].values[i])).collect();
    GridDisplacement::new(comps[0].dims, comps[0].spacing, comps[0].origin, values, temporal).map_err(|e| Error::invalid("deformation.grid_x", e))
}
