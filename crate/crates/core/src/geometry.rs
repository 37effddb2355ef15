//! Oriented boxes, point membership, instance scaling and exact 3D IoU.
//!
//! All coordinates are in the sensor frame: `x` forward, `y` left, `z` up.
//! A box is anchored at the center of its bottom face.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Slack applied to half-extent comparisons so that points lying on a face
/// stay inside after a rotation round-off.
const MEMBERSHIP_EPS: f64 = 1e-9;

/// BEV intersections smaller than this (m²) are treated as empty.
const MIN_INTERSECTION_AREA: f64 = 1e-12;

/// Wraps an angle into `(-π, π]`.
pub fn normalize_yaw(yaw: f64) -> f64 {
    let mut a = yaw.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// One LiDAR return.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub intensity: f64,
}

impl Point {
    pub fn new(x: f64, y: f64, z: f64, intensity: f64) -> Self {
        Self { x, y, z, intensity }
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite() && self.intensity.is_finite()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point>,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        let cloud = Self { points };
        cloud.validate()?;
        Ok(cloud)
    }

    pub fn validate(&self) -> Result<()> {
        match self.points.iter().position(|p| !p.is_finite()) {
            Some(i) => Err(Error::InvalidArgument(format!("point {i} is not finite"))),
            None => Ok(()),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Upright oriented 3D box.
///
/// `(cx, cy, cz)` is the center of the bottom face, `l` runs along the
/// heading, `w` across it and `h` vertically. `yaw` is the heading angle
/// about `+z`, measured from `+x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box3D {
    pub cx: f64,
    pub cy: f64,
    pub cz: f64,
    pub l: f64,
    pub w: f64,
    pub h: f64,
    pub yaw: f64,
}

impl Box3D {
    /// Builds a validated box; the yaw is normalized into `(-π, π]`.
    pub fn new(cx: f64, cy: f64, cz: f64, l: f64, w: f64, h: f64, yaw: f64) -> Result<Self> {
        let b = Self {
            cx,
            cy,
            cz,
            l,
            w,
            h,
            yaw: normalize_yaw(yaw),
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.cx, self.cy, self.cz, self.l, self.w, self.h, self.yaw];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite box {self:?}")));
        }
        if self.l <= 0.0 || self.w <= 0.0 || self.h <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "box dimensions must be positive, got l={} w={} h={}",
                self.l, self.w, self.h
            )));
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        self.l * self.w * self.h
    }

    pub fn dims(&self) -> [f64; 3] {
        [self.l, self.w, self.h]
    }

    /// Same anchor and heading, every dimension multiplied by `scale`.
    pub fn scaled(&self, scale: f64) -> Self {
        Self {
            l: self.l * scale,
            w: self.w * scale,
            h: self.h * scale,
            ..*self
        }
    }

    /// Expresses a world point in box coordinates (origin at the anchor,
    /// `u` along the heading, `v` across, `dz` up).
    fn local_coords(&self, x: f64, y: f64, z: f64) -> (f64, f64, f64) {
        let (s, c) = self.yaw.sin_cos();
        let dx = x - self.cx;
        let dy = y - self.cy;
        (c * dx + s * dy, -s * dx + c * dy, z - self.cz)
    }

    /// Whether a point lies inside the box or on its boundary.
    pub fn contains(&self, p: &Point) -> bool {
        let (u, v, dz) = self.local_coords(p.x, p.y, p.z);
        u.abs() <= 0.5 * self.l + MEMBERSHIP_EPS
            && v.abs() <= 0.5 * self.w + MEMBERSHIP_EPS
            && dz >= -MEMBERSHIP_EPS
            && dz <= self.h + MEMBERSHIP_EPS
    }

    /// Bird's-eye-view footprint, counter-clockwise seen from above,
    /// starting at the front-left corner.
    pub fn footprint(&self) -> [[f64; 2]; 4] {
        let (s, c) = self.yaw.sin_cos();
        let hl = 0.5 * self.l;
        let hw = 0.5 * self.w;
        let local = [[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]];
        local.map(|[u, v]| [self.cx + c * u - s * v, self.cy + s * u + c * v])
    }

    /// The eight corners: bottom face counter-clockwise from above starting
    /// at the front-left corner, then the top face in the same order.
    pub fn corners(&self) -> [[f64; 3]; 8] {
        let fp = self.footprint();
        let mut out = [[0.0; 3]; 8];
        for (i, [x, y]) in fp.iter().enumerate() {
            out[i] = [*x, *y, self.cz];
            out[i + 4] = [*x, *y, self.cz + self.h];
        }
        out
    }

    /// Inverse of [`Box3D::corners`].
    pub fn from_corners(corners: &[[f64; 3]; 8]) -> Result<Self> {
        let bottom = &corners[..4];
        let cx = bottom.iter().map(|c| c[0]).sum::<f64>() / 4.0;
        let cy = bottom.iter().map(|c| c[1]).sum::<f64>() / 4.0;
        let cz = bottom.iter().map(|c| c[2]).sum::<f64>() / 4.0;
        let top_z = corners[4..].iter().map(|c| c[2]).sum::<f64>() / 4.0;
        let (fx, fy) = (corners[0][0] - corners[1][0], corners[0][1] - corners[1][1]);
        let (sx, sy) = (corners[1][0] - corners[2][0], corners[1][1] - corners[2][1]);
        Box3D::new(cx, cy, cz, fx.hypot(fy), sx.hypot(sy), top_z - cz, fy.atan2(fx))
    }

    /// Applies a rigid rotation about the vertical axis through the origin.
    pub fn rotated_about_origin(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            cx: c * self.cx - s * self.cy,
            cy: s * self.cx + c * self.cy,
            yaw: normalize_yaw(self.yaw + angle),
            ..*self
        }
    }
}

/// Indices of the points inside `bbox` (boundary included).
pub fn points_in_box(cloud: &PointCloud, bbox: &Box3D) -> Vec<usize> {
    cloud
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| bbox.contains(p))
        .map(|(i, _)| i)
        .collect()
}

fn scale_point(p: &Point, anchor: &Box3D, scale: f64) -> Point {
    Point {
        x: anchor.cx + scale * (p.x - anchor.cx),
        y: anchor.cy + scale * (p.y - anchor.cy),
        z: anchor.cz + scale * (p.z - anchor.cz),
        intensity: p.intensity,
    }
}

fn check_scale(scale: f64) -> Result<()> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "scale must be positive and finite, got {scale}"
        )));
    }
    Ok(())
}

/// Scales one instance about its bottom-center anchor.
///
/// Membership is evaluated against the original box before any point moves.
pub fn scale_instance(cloud: &PointCloud, bbox: &Box3D, scale: f64) -> Result<(PointCloud, Box3D)> {
    let scene = scale_instances(cloud, &[(*bbox, scale)])?;
    Ok((scene.cloud, scene.boxes[0]))
}

/// Result of scaling several instances of one scan at once.
#[derive(Debug, Clone)]
pub struct ScaledScene {
    pub cloud: PointCloud,
    pub boxes: Vec<Box3D>,
    /// Points that fell inside more than one box; each was scaled by the
    /// first box (in the given order) that contains it.
    pub overlap_points: usize,
}

/// Scales several instances of one scan.
///
/// Every point is assigned to the first box containing it, using the
/// unscaled boxes, and is then moved by that box's scale.
pub fn scale_instances(cloud: &PointCloud, instances: &[(Box3D, f64)]) -> Result<ScaledScene> {
    for (b, s) in instances {
        b.validate()?;
        check_scale(*s)?;
    }
    let mut overlap_points = 0;
    let mut points = cloud.points.clone();
    for p in points.iter_mut() {
        let mut owners = instances.iter().filter(|(b, _)| b.contains(p));
        if let Some((b, s)) = owners.next() {
            if owners.next().is_some() {
                overlap_points += 1;
            }
            if *s != 1.0 {
                *p = scale_point(p, b, *s);
            }
        }
    }
    if overlap_points > 0 {
        log::warn!("{overlap_points} points lie inside more than one instance box");
    }
    let boxes = instances
        .iter()
        .map(|(b, s)| if *s == 1.0 { *b } else { b.scaled(*s) })
        .collect();
    Ok(ScaledScene {
        cloud: PointCloud { points },
        boxes,
        overlap_points,
    })
}

fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let twice: f64 = (0..n)
        .map(|i| {
            let a = poly[i];
            let b = poly[(i + 1) % n];
            a[0] * b[1] - a[1] * b[0]
        })
        .sum();
    0.5 * twice.abs()
}

/// Clips a convex polygon against a convex counter-clockwise clip polygon.
fn clip_convex(subject: &[[f64; 2]], clip: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut output = subject.to_vec();
    let m = clip.len();
    for i in 0..m {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % m];
        let side = |p: [f64; 2]| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        let input = std::mem::take(&mut output);
        let n = input.len();
        for j in 0..n {
            let cur = input[j];
            let prev = input[(j + n - 1) % n];
            let (sc, sp) = (side(cur), side(prev));
            if sc >= 0.0 {
                if sp < 0.0 {
                    output.push(intersect(prev, cur, sp, sc));
                }
                output.push(cur);
            } else if sp >= 0.0 {
                output.push(intersect(prev, cur, sp, sc));
            }
        }
    }
    output
}

fn intersect(p: [f64; 2], q: [f64; 2], sp: f64, sq: f64) -> [f64; 2] {
    let t = sp / (sp - sq);
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

/// Area of the intersection of two BEV footprints.
pub fn bev_intersection_area(a: &Box3D, b: &Box3D) -> f64 {
    let area = polygon_area(&clip_convex(&a.footprint(), &b.footprint()));
    if area < MIN_INTERSECTION_AREA {
        0.0
    } else {
        area
    }
}

/// Exact intersection-over-union of two upright oriented boxes.
pub fn iou_3d(a: &Box3D, b: &Box3D) -> f64 {
    let dz = (a.cz + a.h).min(b.cz + b.h) - a.cz.max(b.cz);
    if dz <= 0.0 {
        return 0.0;
    }
    // Clipping the smaller footprint keeps the result symmetric in practice.
    let (p, q) = if (a.l * a.w, a.cx, a.cy) <= (b.l * b.w, b.cx, b.cy) {
        (a, b)
    } else {
        (b, a)
    };
    let inter = bev_intersection_area(p, q) * dz;
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.volume() + b.volume() - inter;
    (inter / union).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;
    use std::f64::consts::FRAC_PI_4;

    fn unit_cube(yaw: f64) -> Box3D {
        Box3D::new(0.0, 0.0, 0.0, 1.0, 1.0, 1.0, yaw).unwrap()
    }

    #[test]
    fn yaw_normalization() {
        assert!((normalize_yaw(3.0 * PI) - PI).abs() < 1e-12);
        assert!((normalize_yaw(-PI) - PI).abs() < 1e-12);
        assert!((normalize_yaw(0.5) - 0.5).abs() < 1e-15);
        assert!((normalize_yaw(-2.0 * PI - 0.25) + 0.25).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_boxes() {
        assert!(Box3D::new(0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0).is_err());
        assert!(Box3D::new(0.0, 0.0, 0.0, 1.0, -1.0, 1.0, 0.0).is_err());
        assert!(Box3D::new(f64::NAN, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn centroid_is_inside_for_any_yaw() {
        for k in 0..16 {
            let b = Box3D::new(3.0, -2.0, 0.5, 4.0, 1.7, 1.5, k as f64 * 0.4).unwrap();
            let c = Point::new(3.0, -2.0, 1.25, 0.0);
            assert!(b.contains(&c));
        }
    }

    #[test]
    fn rotated_cube_membership() {
        let b = unit_cube(FRAC_PI_4);
        let r = 2f64.sqrt() / 2.0;
        let cloud = PointCloud::new(vec![
            Point::new(0.99 * r, 0.0, 0.5, 0.0),
            Point::new(1.01 * r, 0.0, 0.5, 0.0),
        ])
        .unwrap();
        assert_eq!(points_in_box(&cloud, &b), vec![0]);
    }

    #[test]
    fn empty_cloud_has_no_members() {
        assert!(points_in_box(&PointCloud::default(), &unit_cube(0.3)).is_empty());
    }

    #[test]
    fn identity_scale_is_bit_identical() {
        let b = Box3D::new(1.0, 2.0, -1.5, 3.0, 2.0, 1.5, 0.7).unwrap();
        let cloud = PointCloud::new(vec![Point::new(1.1, 2.1, -1.0, 0.3), Point::new(9.0, 9.0, 9.0, 0.1)]).unwrap();
        let (c2, b2) = scale_instance(&cloud, &b, 1.0).unwrap();
        assert_eq!(c2, cloud);
        assert_eq!(b2, b);
    }

    #[test]
    fn top_face_point_scales_about_bottom_anchor() {
        let b = Box3D::new(0.0, 0.0, 0.0, 2.0, 2.0, 2.0, 0.0).unwrap();
        let cloud = PointCloud::new(vec![Point::new(0.5, 0.5, 2.0, 0.4), Point::new(5.0, 0.0, 1.0, 0.2)]).unwrap();
        let (c2, b2) = scale_instance(&cloud, &b, 2.0).unwrap();
        assert_eq!(c2.points[0], Point::new(1.0, 1.0, 4.0, 0.4));
        assert_eq!(c2.points[1], cloud.points[1]);
        assert_eq!(b2.h, 4.0);
        assert!((b2.volume() - 8.0 * b.volume()).abs() < 1e-12);
        assert_eq!((b2.cx, b2.cy, b2.cz, b2.yaw), (b.cx, b.cy, b.cz, b.yaw));
    }

    #[test]
    fn nonpositive_scale_is_rejected() {
        let b = unit_cube(0.0);
        assert!(scale_instance(&PointCloud::default(), &b, 0.0).is_err());
        assert!(scale_instance(&PointCloud::default(), &b, -1.0).is_err());
    }

    #[test]
    fn overlapping_point_goes_to_first_box() {
        let a = Box3D::new(0.0, 0.0, 0.0, 2.0, 2.0, 2.0, 0.0).unwrap();
        let b = Box3D::new(1.0, 0.0, 0.0, 2.0, 2.0, 2.0, 0.0).unwrap();
        let cloud = PointCloud::new(vec![Point::new(0.5, 0.0, 1.0, 0.0)]).unwrap();
        let scene = scale_instances(&cloud, &[(a, 2.0), (b, 0.5)]).unwrap();
        assert_eq!(scene.overlap_points, 1);
        assert_eq!(scene.cloud.points[0], Point::new(1.0, 0.0, 2.0, 0.0));
    }

    #[test]
    fn iou_of_self_is_one() {
        let b = Box3D::new(4.0, -1.0, 0.2, 4.2, 1.8, 1.6, -2.1).unwrap();
        assert!((iou_3d(&b, &b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nested_boxes_follow_cube_law() {
        let a = Box3D::new(1.0, 1.0, 0.0, 4.0, 2.0, 1.5, 0.6).unwrap();
        let b = a.scaled(0.8);
        assert!((iou_3d(&a, &b) - 0.512).abs() < 1e-9);
    }

    #[test]
    fn far_apart_boxes_do_not_overlap() {
        let a = unit_cube(0.2);
        let b = Box3D::new(10.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(iou_3d(&a, &b), 0.0);
        let above = Box3D::new(0.0, 0.0, 5.0, 1.0, 1.0, 1.0, 0.2).unwrap();
        assert_eq!(iou_3d(&a, &above), 0.0);
    }

    #[test]
    fn half_shifted_cube() {
        let a = unit_cube(0.0);
        let b = Box3D::new(0.5, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        // intersection 0.5, union 1.5
        assert!((iou_3d(&a, &b) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn unit_cube_corners() {
        let c = unit_cube(0.0).corners();
        let expected = [
            [0.5, 0.5, 0.0],
            [-0.5, 0.5, 0.0],
            [-0.5, -0.5, 0.0],
            [0.5, -0.5, 0.0],
            [0.5, 0.5, 1.0],
            [-0.5, 0.5, 1.0],
            [-0.5, -0.5, 1.0],
            [0.5, -0.5, 1.0],
        ];
        for (got, want) in c.iter().zip(expected.iter()) {
            for k in 0..3 {
                assert!((got[k] - want[k]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn quarter_turn_swaps_length_and_width_axes() {
        let b = Box3D::new(0.0, 0.0, 0.0, 4.0, 2.0, 1.0, FRAC_PI_2).unwrap();
        let c = b.corners();
        // front-left corner: local (2, 1) rotated by 90° -> (-1, 2)
        assert!((c[0][0] + 1.0).abs() < 1e-12 && (c[0][1] - 2.0).abs() < 1e-12);
        let xs: Vec<f64> = c.iter().map(|p| p[0]).collect();
        let ys: Vec<f64> = c.iter().map(|p| p[1]).collect();
        let span = |v: &[f64]| v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min);
        assert!((span(&xs) - 2.0).abs() < 1e-12);
        assert!((span(&ys) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn corners_round_trip() {
        let b = Box3D::new(-3.0, 7.5, -1.7, 3.9, 1.6, 1.5, -2.9).unwrap();
        let r = Box3D::from_corners(&b.corners()).unwrap();
        for (x, y) in [
            (r.cx, b.cx),
            (r.cy, b.cy),
            (r.cz, b.cz),
            (r.l, b.l),
            (r.w, b.w),
            (r.h, b.h),
            (r.yaw, b.yaw),
        ] {
            assert!((x - y).abs() < 1e-9);
        }
    }
}
