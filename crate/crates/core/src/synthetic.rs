//! Seeded synthetic scenes with Gaussian-distributed instance sizes.
//!
//! Boxes sit on a coarse grid so they never overlap; each carries a handful
//! of interior returns, and ground returns are scattered between them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{Annotation, Frame};
use crate::error::{Error, Result};
use crate::geometry::{Box3D, Point, PointCloud};

/// Typical KITTI car size `[l, w, h]` in meters.
pub const CAR_MEAN_DIMS: [f64; 3] = [3.89, 1.62, 1.53];

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub frames: usize,
    pub instances_per_frame: usize,
    pub class: String,
    pub mean_dims: [f64; 3],
    /// Relative standard deviation of each dimension.
    pub rel_std: f64,
    pub points_per_instance: usize,
    pub ground_points: usize,
    /// Sensor height above the ground plane (m); ground sits at `z = -height`.
    pub sensor_height: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            frames: 10,
            instances_per_frame: 4,
            class: "Car".into(),
            mean_dims: CAR_MEAN_DIMS,
            rel_std: 0.03,
            points_per_instance: 24,
            ground_points: 64,
            sensor_height: 1.73,
            seed: 0,
        }
    }
}

const CELL: f64 = 14.0;

/// Generates `cfg.frames` frames with ids `000000`, `000001`, ….
pub fn generate(cfg: &SyntheticConfig) -> Result<Vec<Frame>> {
    if !(cfg.rel_std >= 0.0 && cfg.rel_std < 0.3) {
        return Err(Error::InvalidArgument(format!(
            "rel_std {} outside [0, 0.3)",
            cfg.rel_std
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let jitter = Normal::new(1.0, cfg.rel_std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let per_row = (cfg.instances_per_frame as f64).sqrt().ceil().max(1.0) as usize;
    let ground = -cfg.sensor_height;
    (0..cfg.frames)
        .map(|fi| {
            let mut annotations = Vec::with_capacity(cfg.instances_per_frame);
            let mut points = Vec::new();
            for j in 0..cfg.instances_per_frame {
                let (row, col) = (j / per_row, j % per_row);
                let cx = 8.0 + CELL * row as f64 + rng.gen_range(-1.0..1.0);
                let cy = CELL * (col as f64 - 0.5 * (per_row - 1) as f64) + rng.gen_range(-1.0..1.0);
                let mut dims = [0.0; 3];
                for (d, m) in dims.iter_mut().zip(cfg.mean_dims) {
                    *d = m * jitter.sample(&mut rng).clamp(0.5, 1.5);
                }
                let yaw = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
                let b = Box3D::new(cx, cy, ground, dims[0], dims[1], dims[2], yaw)?;
                let (s, c) = yaw.sin_cos();
                for _ in 0..cfg.points_per_instance {
                    let u = rng.gen_range(-0.45..0.45) * b.l;
                    let v = rng.gen_range(-0.45..0.45) * b.w;
                    let z = ground + rng.gen_range(0.05..0.95) * b.h;
                    points.push(Point::new(
                        cx + c * u - s * v,
                        cy + s * u + c * v,
                        z,
                        rng.gen_range(0.0..1.0),
                    ));
                }
                annotations.push(Annotation {
                    source_index: j,
                    ..Annotation::new(b, cfg.class.clone())
                });
            }
            let mut placed = 0;
            while placed < cfg.ground_points {
                let p = Point::new(
                    rng.gen_range(0.0..8.0 + CELL * per_row as f64),
                    rng.gen_range(-CELL * per_row as f64..CELL * per_row as f64),
                    ground - 0.02,
                    rng.gen_range(0.0..0.2),
                );
                if annotations
                    .iter()
                    .all(|a| !a.bbox.scaled(1.6).contains(&Point { z: ground + 0.1, ..p }))
                {
                    points.push(p);
                    placed += 1;
                }
            }
            Ok(Frame::new(format!("{fi:06}"), PointCloud::new(points)?, annotations))
        })
        .collect()
}

/// Frames whose instances all have exactly the given dimensions.
pub fn uniform_size_frames(frames: usize, instances_per_frame: usize, dims: [f64; 3], seed: u64) -> Result<Vec<Frame>> {
    generate(&SyntheticConfig {
        frames,
        instances_per_frame,
        mean_dims: dims,
        rel_std: 0.0,
        seed,
        ..Default::default()
    })
}
