//! KITTI-format ingestion and writing.
//!
//! On disk a frame is three files: a raw little-endian `f32 × 4` cloud
//! (`x y z intensity`), a label file in the KITTI object format, and a
//! calibration file holding `R0_rect` and `Tr_velo_to_cam`. Labels are stored
//! in rectified camera coordinates and converted to the sensor frame on load.
//!
//! Datasets that are not KITTI enter through the same layout with an identity
//! calibration, in which case label locations are read as sensor-frame
//! bottom centers.
//!
//! A dataset manifest lists one frame per line:
//! `<frame_id> <cloud_path> <label_path> <calib_path>`, with relative paths
//! resolved against the manifest's directory. Blank lines and lines starting
//! with `#` are ignored.

use std::collections::HashSet;
use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{normalize_yaw, Box3D, Point, PointCloud};
use crate::stats::{build_histogram, SizeDistribution};

type Mat3 = [[f64; 3]; 3];

/// Rectification and sensor-to-camera transform of one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub r0_rect: Mat3,
    /// `[R | t]`, sensor to (unrectified) camera.
    pub tr_velo_to_cam: [[f64; 4]; 3],
}

impl Default for Calibration {
    fn default() -> Self {
        Self::identity()
    }
}

fn mat_vec(m: &Mat3, v: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|r| m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2])
}

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            *cell = (0..3).map(|k| a[r][k] * b[k][c]).sum();
        }
    }
    out
}

fn transpose(m: &Mat3) -> Mat3 {
    let mut t = [[0.0; 3]; 3];
    for (r, row) in m.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            t[c][r] = *v;
        }
    }
    t
}

fn inverse(m: &Mat3) -> Option<Mat3> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if det.abs() < 1e-12 {
        return None;
    }
    let c = |r0: usize, c0: usize, r1: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let adj = [
        [c(1, 1, 2, 2), -c(0, 1, 2, 2), c(0, 1, 1, 2)],
        [-c(1, 0, 2, 2), c(0, 0, 2, 2), -c(0, 0, 1, 2)],
        [c(1, 0, 2, 1), -c(0, 0, 2, 1), c(0, 0, 1, 1)],
    ];
    Some(adj.map(|row| row.map(|v| v / det)))
}

fn orthonormality_error(m: &Mat3) -> f64 {
    let p = mat_mul(m, &transpose(m));
    let mut worst: f64 = 0.0;
    for (r, row) in p.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            let target = if r == c { 1.0 } else { 0.0 };
            worst = worst.max((v - target).abs());
        }
    }
    worst
}

impl Calibration {
    pub fn identity() -> Self {
        Self {
            r0_rect: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            tr_velo_to_cam: [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]],
        }
    }

    fn rotation(&self) -> Mat3 {
        self.tr_velo_to_cam.map(|row| [row[0], row[1], row[2]])
    }

    fn translation(&self) -> [f64; 3] {
        self.tr_velo_to_cam.map(|row| row[3])
    }

    /// Checks both rotation blocks are orthonormal within `1e-3`.
    pub fn validate(&self) -> Result<()> {
        for (name, m) in [("R0_rect", self.r0_rect), ("Tr_velo_to_cam", self.rotation())] {
            let err = orthonormality_error(&m);
            if err > 1e-3 {
                return Err(Error::InvalidArgument(format!(
                    "{name} rotation is not orthonormal (deviation {err:.2e})"
                )));
            }
        }
        Ok(())
    }

    /// Sensor frame to rectified camera frame.
    pub fn sensor_to_camera(&self, p: [f64; 3]) -> [f64; 3] {
        let r = self.rotation();
        let t = self.translation();
        let cam = mat_vec(&r, p);
        mat_vec(&self.r0_rect, [cam[0] + t[0], cam[1] + t[1], cam[2] + t[2]])
    }

    /// Rectified camera frame to sensor frame.
    pub fn camera_to_sensor(&self, p: [f64; 3]) -> [f64; 3] {
        let r0_inv = inverse(&self.r0_rect).expect("validated rectification is invertible");
        let r_inv = inverse(&self.rotation()).expect("validated rotation is invertible");
        let t = self.translation();
        let cam = mat_vec(&r0_inv, p);
        mat_vec(&r_inv, [cam[0] - t[0], cam[1] - t[1], cam[2] - t[2]])
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut r0: Option<Mat3> = None;
        let mut tr: Option<[[f64; 4]; 3]> = None;
        for (lineno, line) in text.lines().enumerate() {
            let Some((key, rest)) = line.split_once(':') else {
                continue;
            };
            let key = key.trim();
            if !matches!(key, "R0_rect" | "R_rect" | "Tr_velo_to_cam" | "Tr_velo_cam") {
                continue;
            }
            let vals = rest
                .split_whitespace()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(path, lineno + 1, format!("{key}: {e}")))?;
            match key {
                "R0_rect" | "R_rect" => {
                    if vals.len() != 9 {
                        return Err(Error::parse(
                            path,
                            lineno + 1,
                            format!("{key} needs 9 values, found {}", vals.len()),
                        ));
                    }
                    r0 = Some([0, 1, 2].map(|r| [vals[3 * r], vals[3 * r + 1], vals[3 * r + 2]]));
                }
                _ => {
                    if vals.len() != 12 {
                        return Err(Error::parse(
                            path,
                            lineno + 1,
                            format!("{key} needs 12 values, found {}", vals.len()),
                        ));
                    }
                    tr = Some([0, 1, 2].map(|r| [vals[4 * r], vals[4 * r + 1], vals[4 * r + 2], vals[4 * r + 3]]));
                }
            }
        }
        let lines = text.lines().count();
        let r0_rect = r0.ok_or_else(|| Error::parse(path, lines, "missing key R0_rect"))?;
        let tr_velo_to_cam = tr.ok_or_else(|| Error::parse(path, lines, "missing key Tr_velo_to_cam"))?;
        let calib = Self {
            r0_rect,
            tr_velo_to_cam,
        };
        calib.validate().map_err(|e| Error::parse(path, lines, e.to_string()))?;
        Ok(calib)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("R0_rect:");
        for row in &self.r0_rect {
            for v in row {
                let _ = write!(s, " {v:.12e}");
            }
        }
        s.push_str("\nTr_velo_to_cam:");
        for row in &self.tr_velo_to_cam {
            for v in row {
                let _ = write!(s, " {v:.12e}");
            }
        }
        s.push('\n');
        s
    }
}

/// Label columns that are carried through verbatim and never interpreted.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelPassthrough {
    pub truncated: String,
    pub occluded: String,
    pub alpha: String,
    pub bbox: [String; 4],
}

impl Default for LabelPassthrough {
    fn default() -> Self {
        Self {
            truncated: "0.00".into(),
            occluded: "0".into(),
            alpha: "-10".into(),
            bbox: ["0.00".into(), "0.00".into(), "0.00".into(), "0.00".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    /// Sensor-frame box.
    pub bbox: Box3D,
    pub class: String,
    /// Line position in the label file the annotation came from.
    pub source_index: usize,
    pub passthrough: LabelPassthrough,
}

impl Annotation {
    pub fn new(bbox: Box3D, class: impl Into<String>) -> Self {
        Self {
            bbox,
            class: class.into(),
            source_index: 0,
            passthrough: LabelPassthrough::default(),
        }
    }
}

/// One scan with its annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub id: String,
    pub cloud: PointCloud,
    pub annotations: Vec<Annotation>,
    pub calib: Calibration,
}

impl Frame {
    pub fn new(id: impl Into<String>, cloud: PointCloud, annotations: Vec<Annotation>) -> Self {
        Self {
            id: id.into(),
            cloud,
            annotations,
            calib: Calibration::identity(),
        }
    }
}

/// A parsed label line: the annotation plus the optional trailing score.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelRecord {
    pub annotation: Annotation,
    pub score: Option<f64>,
}

/// Converts a camera-frame KITTI box (bottom center, `rotation_y`) to the
/// sensor frame; heading follows the usual `yaw = -(ry + π/2)` relation.
pub fn camera_box_to_sensor(
    calib: &Calibration,
    location: [f64; 3],
    dims_hwl: [f64; 3],
    rotation_y: f64,
) -> Result<Box3D> {
    let [x, y, z] = calib.camera_to_sensor(location);
    let [h, w, l] = dims_hwl;
    Box3D::new(x, y, z, l, w, h, -(rotation_y + FRAC_PI_2))
}

/// Inverse of [`camera_box_to_sensor`]: `(location, [h, w, l], rotation_y)`.
pub fn sensor_box_to_camera(calib: &Calibration, b: &Box3D) -> ([f64; 3], [f64; 3], f64) {
    let loc = calib.sensor_to_camera([b.cx, b.cy, b.cz]);
    (loc, [b.h, b.w, b.l], normalize_yaw(-b.yaw - FRAC_PI_2))
}

/// Parses KITTI label text. `DontCare` lines are dropped; the kept
/// annotations remember their line index.
pub fn parse_labels(text: &str, calib: &Calibration, path: &Path) -> Result<Vec<LabelRecord>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 15 && fields.len() != 16 {
            return Err(Error::parse(
                path,
                lineno + 1,
                format!("expected 15 or 16 fields, found {}", fields.len()),
            ));
        }
        if fields[0] == "DontCare" {
            continue;
        }
        let num = |i: usize| -> Result<f64> {
            let v: f64 = fields[i]
                .parse()
                .map_err(|e| Error::parse(path, lineno + 1, format!("field {}: {e}", i + 1)))?;
            if !v.is_finite() {
                return Err(Error::parse(path, lineno + 1, format!("field {} is not finite", i + 1)));
            }
            Ok(v)
        };
        let dims = [num(8)?, num(9)?, num(10)?];
        let loc = [num(11)?, num(12)?, num(13)?];
        let ry = num(14)?;
        let score = if fields.len() == 16 { Some(num(15)?) } else { None };
        let bbox =
            camera_box_to_sensor(calib, loc, dims, ry).map_err(|e| Error::parse(path, lineno + 1, e.to_string()))?;
        out.push(LabelRecord {
            annotation: Annotation {
                bbox,
                class: fields[0].to_string(),
                source_index: lineno,
                passthrough: LabelPassthrough {
                    truncated: fields[1].into(),
                    occluded: fields[2].into(),
                    alpha: fields[3].into(),
                    bbox: [fields[4].into(), fields[5].into(), fields[6].into(), fields[7].into()],
                },
            },
            score,
        });
    }
    Ok(out)
}

/// Formats one KITTI label line (without newline).
pub fn format_label(ann: &Annotation, calib: &Calibration, score: Option<f64>) -> String {
    let (loc, hwl, ry) = sensor_box_to_camera(calib, &ann.bbox);
    let p = &ann.passthrough;
    let mut s = format!(
        "{} {} {} {} {} {} {} {} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6}",
        ann.class,
        p.truncated,
        p.occluded,
        p.alpha,
        p.bbox[0],
        p.bbox[1],
        p.bbox[2],
        p.bbox[3],
        hwl[0],
        hwl[1],
        hwl[2],
        loc[0],
        loc[1],
        loc[2],
        ry
    );
    if let Some(score) = score {
        let _ = write!(s, " {score:.6}");
    }
    s
}

pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_cloud(&bytes, path)
}

pub fn parse_cloud(bytes: &[u8], path: &Path) -> Result<PointCloud> {
    if !bytes.len().is_multiple_of(16) {
        return Err(Error::parse(
            path,
            0,
            format!("truncated cloud: {} bytes is not a multiple of 16", bytes.len()),
        ));
    }
    let f = |c: &[u8]| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64;
    let points = bytes
        .chunks_exact(16)
        .map(|c| Point::new(f(&c[0..4]), f(&c[4..8]), f(&c[8..12]), f(&c[12..16])))
        .collect();
    PointCloud::new(points).map_err(|e| Error::parse(path, 0, e.to_string()))
}

pub fn encode_cloud(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(cloud.len() * 16);
    for p in &cloud.points {
        for v in [p.x, p.y, p.z, p.intensity] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn write_cloud(cloud: &PointCloud, path: &Path) -> Result<()> {
    fs::write(path, encode_cloud(cloud)).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Loads one frame; its id is the cloud file stem.
pub fn load_frame(cloud_path: &Path, label_path: &Path, calib_path: &Path) -> Result<Frame> {
    let id = cloud_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    load_frame_with_id(id, cloud_path, label_path, calib_path)
}

pub fn load_frame_with_id(
    id: impl Into<String>,
    cloud_path: &Path,
    label_path: &Path,
    calib_path: &Path,
) -> Result<Frame> {
    let calib = Calibration::parse(&read_text(calib_path)?, calib_path)?;
    let cloud = read_cloud(cloud_path)?;
    let annotations = parse_labels(&read_text(label_path)?, &calib, label_path)?
        .into_iter()
        .map(|r| r.annotation)
        .collect();
    Ok(Frame {
        id: id.into(),
        cloud,
        annotations,
        calib,
    })
}

/// Paths of one frame on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct FramePaths {
    pub id: String,
    pub cloud: PathBuf,
    pub label: PathBuf,
    pub calib: PathBuf,
}

/// Writes `velodyne/<id>.bin`, `label_2/<id>.txt` and `calib/<id>.txt`
/// under `out_dir`.
pub fn write_frame(frame: &Frame, out_dir: &Path) -> Result<FramePaths> {
    let paths = FramePaths {
        id: frame.id.clone(),
        cloud: out_dir.join("velodyne").join(format!("{}.bin", frame.id)),
        label: out_dir.join("label_2").join(format!("{}.txt", frame.id)),
        calib: out_dir.join("calib").join(format!("{}.txt", frame.id)),
    };
    for p in [&paths.cloud, &paths.label, &paths.calib] {
        let dir = p.parent().expect("joined path has a parent");
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    write_cloud(&frame.cloud, &paths.cloud)?;
    let mut labels = String::new();
    for a in &frame.annotations {
        labels.push_str(&format_label(a, &frame.calib, None));
        labels.push('\n');
    }
    fs::write(&paths.label, labels).map_err(|e| Error::io(&paths.label, e))?;
    fs::write(&paths.calib, frame.calib.to_text()).map_err(|e| Error::io(&paths.calib, e))?;
    Ok(paths)
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn read_manifest(path: &Path) -> Result<Vec<FramePaths>> {
    let text = read_text(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 4 {
            return Err(Error::parse(
                path,
                lineno + 1,
                format!("expected `id cloud label calib`, found {} fields", f.len()),
            ));
        }
        if !seen.insert(f[0].to_string()) {
            return Err(Error::parse(path, lineno + 1, format!("duplicate frame id {}", f[0])));
        }
        out.push(FramePaths {
            id: f[0].to_string(),
            cloud: resolve(base, f[1]),
            label: resolve(base, f[2]),
            calib: resolve(base, f[3]),
        });
    }
    Ok(out)
}

/// Writes a manifest; paths under the manifest's directory are stored
/// relative to it.
pub fn write_manifest(path: &Path, frames: &[FramePaths]) -> Result<()> {
    let base = path.parent().unwrap_or(Path::new("."));
    let rel = |p: &Path| p.strip_prefix(base).unwrap_or(p).to_string_lossy().into_owned();
    let mut s = String::new();
    for f in frames {
        let _ = writeln!(s, "{} {} {} {}", f.id, rel(&f.cloud), rel(&f.label), rel(&f.calib));
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Loads every frame listed in a manifest, in manifest order.
pub fn load_dataset(manifest: &Path) -> Result<Vec<Frame>> {
    read_manifest(manifest)?
        .par_iter()
        .map(|p| load_frame_with_id(p.id.clone(), &p.cloud, &p.label, &p.calib))
        .collect()
}

/// Writes every frame under `out_dir` plus `out_dir/manifest.txt`.
pub fn write_dataset(frames: &[Frame], out_dir: &Path) -> Result<PathBuf> {
    let paths = frames
        .par_iter()
        .map(|f| write_frame(f, out_dir))
        .collect::<Result<Vec<_>>>()?;
    let manifest = out_dir.join("manifest.txt");
    write_manifest(&manifest, &paths)?;
    Ok(manifest)
}

/// Which annotation classes an operation considers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClassFilter {
    All,
    Only(Vec<String>),
}

impl Default for ClassFilter {
    fn default() -> Self {
        ClassFilter::Only(vec!["Car".into()])
    }
}

impl ClassFilter {
    pub fn matches(&self, class: &str) -> bool {
        match self {
            ClassFilter::All => true,
            ClassFilter::Only(names) => names.iter().any(|n| n == class),
        }
    }

    /// Parses `all` or a comma-separated class list.
    pub fn parse(s: &str) -> Self {
        if s.eq_ignore_ascii_case("all") {
            ClassFilter::All
        } else {
            ClassFilter::Only(
                s.split(',')
                    .map(|c| c.trim().to_string())
                    .filter(|c| !c.is_empty())
                    .collect(),
            )
        }
    }
}

impl std::fmt::Display for ClassFilter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ClassFilter::All => f.write_str("all"),
            ClassFilter::Only(n) => f.write_str(&n.join(",")),
        }
    }
}

/// Location of one annotation within a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceRef {
    pub frame_index: usize,
    pub frame_id: String,
    pub annotation_index: usize,
    pub volume: f64,
}

/// All annotations passing `filter`, in frame then annotation order.
pub fn collect_instances(frames: &[Frame], filter: &ClassFilter) -> Vec<InstanceRef> {
    frames
        .iter()
        .enumerate()
        .flat_map(|(fi, f)| {
            f.annotations
                .iter()
                .enumerate()
                .filter(|(_, a)| filter.matches(&a.class))
                .map(move |(ai, a)| InstanceRef {
                    frame_index: fi,
                    frame_id: f.id.clone(),
                    annotation_index: ai,
                    volume: a.bbox.volume(),
                })
        })
        .collect()
}

/// Histogram of box volumes over every matching annotation.
pub fn dataset_size_distribution(frames: &[Frame], filter: &ClassFilter, k: usize) -> Result<SizeDistribution> {
    let volumes: Vec<f64> = collect_instances(frames, filter).iter().map(|i| i.volume).collect();
    if volumes.is_empty() {
        return Err(Error::EmptyDataset(format!("no annotations of class {filter}")));
    }
    build_histogram(&volumes, k, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("test.txt")
    }

    #[test]
    fn sixteen_bytes_is_one_point() {
        let bytes: Vec<u8> = [1.0f32, 2.0, 3.0, 0.5].iter().flat_map(|v| v.to_le_bytes()).collect();
        let c = parse_cloud(&bytes, p()).unwrap();
        assert_eq!(c.points, vec![Point::new(1.0, 2.0, 3.0, 0.5)]);
    }

    #[test]
    fn truncated_cloud_is_rejected() {
        let err = parse_cloud(&[0u8; 20], Path::new("x.bin")).unwrap_err();
        assert!(err.to_string().contains("x.bin"));
    }

    #[test]
    fn identity_label_round_trip() {
        let calib = Calibration::identity();
        let line = "Car 0.00 0 -1.57 614.24 181.78 727.31 284.77 1.57 1.73 4.15 0.000000 0.000000 10.000000 0.000000";
        let recs = parse_labels(line, &calib, p()).unwrap();
        let b = recs[0].annotation.bbox;
        assert_eq!((b.cx, b.cy, b.cz), (0.0, 0.0, 10.0));
        assert_eq!((b.l, b.w, b.h), (4.15, 1.73, 1.57));
        let back = format_label(&recs[0].annotation, &calib, None);
        let a: Vec<f64> = line.split_whitespace().skip(8).map(|s| s.parse().unwrap()).collect();
        let c: Vec<f64> = back.split_whitespace().skip(8).map(|s| s.parse().unwrap()).collect();
        for (x, y) in a.iter().zip(&c) {
            assert!((x - y).abs() < 1e-6);
        }
        assert_eq!(
            line.split_whitespace().take(8).collect::<Vec<_>>(),
            back.split_whitespace().take(8).collect::<Vec<_>>()
        );
    }

    #[test]
    fn dontcare_only_gives_no_annotations() {
        let text = "DontCare -1 -1 -10 503.89 169.71 590.61 190.13 -1 -1 -1 -1000 -1000 -1000 -10\n\
                    DontCare -1 -1 -10 511.35 174.96 527.81 187.45 -1 -1 -1 -1000 -1000 -1000 -10\n";
        assert!(parse_labels(text, &Calibration::identity(), p()).unwrap().is_empty());
    }

    #[test]
    fn bad_field_count_names_line() {
        let text = "Car 0 0 0 0 0 0 0 1 1 1 0 0 5 0\nCar 0 0 0\n";
        match parse_labels(text, &Calibration::identity(), p()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_calib_key() {
        let text = "R0_rect: 1 0 0 0 1 0 0 0 1\n";
        let err = Calibration::parse(text, Path::new("calib.txt")).unwrap_err();
        assert!(err.to_string().contains("Tr_velo_to_cam"));
    }

    #[test]
    fn non_orthonormal_calib_is_rejected() {
        let text = "R0_rect: 2 0 0 0 1 0 0 0 1\nTr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1 0\n";
        assert!(Calibration::parse(text, p()).is_err());
    }

    #[test]
    fn kitti_calibration_inverse_pair() {
        // calib from KITTI training frame 000000
        let text = "R0_rect: 9.999239e-01 9.837760e-03 -7.445048e-03 -9.869795e-03 9.999421e-01 -4.278459e-03 7.402527e-03 4.351614e-03 9.999631e-01\n\
Tr_velo_to_cam: 7.533745e-03 -9.999714e-01 -6.166020e-04 -4.069766e-03 1.480249e-02 7.280733e-04 -9.998902e-01 -7.631618e-02 9.998621e-01 7.523790e-03 1.480755e-02 -2.717806e-01\n";
        let calib = Calibration::parse(text, p()).unwrap();
        for q in [[10.0, 2.0, -1.5], [-3.0, 40.0, 0.2]] {
            let back = calib.camera_to_sensor(calib.sensor_to_camera(q));
            for k in 0..3 {
                assert!((back[k] - q[k]).abs() < 1e-9);
            }
        }
        // camera z (forward) is roughly sensor x
        let fwd = calib.camera_to_sensor([0.0, 0.0, 10.0]);
        assert!(fwd[0] > 9.0);
    }

    #[test]
    fn class_filter_parsing() {
        assert_eq!(ClassFilter::parse("all"), ClassFilter::All);
        let f = ClassFilter::parse("Car, Van");
        assert!(f.matches("Van") && !f.matches("Pedestrian"));
    }
}
