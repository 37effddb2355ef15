//! Uniform-size defense.
//!
//! Every annotation is replicated at `k` scales spread evenly over
//! `[1 − σ, 1 + σ]`. The pooled `k·n` volumes are then quantile-mapped onto
//! `Uniform((1 − σ)·ȳ, (1 + σ)·ȳ)`, with `ȳ` the mean annotation volume.
//! Replica `r` of a frame carries the factor of replica `r` for all of its
//! instances, so training sees `k` whole-frame copies with flattened sizes.

use std::path::{Path, PathBuf};

use crate::attacks::{apply_scale_plan, PlanEntry, ScalePlan};
use crate::dataset::{collect_instances, write_frame, write_manifest, ClassFilter, Frame, FramePaths};
use crate::detector::SizePriorDetector;
use crate::error::{Error, Result};
use crate::stats::{icdf_map_all, mean_std, EmpiricalCdf, QuantileTarget};

#[derive(Debug, Clone)]
pub struct DefenseConfig {
    /// Half-width of the relative size band, in `(0, 1)`.
    pub sigma: f64,
    pub k_scales: usize,
    pub seed: u64,
    /// Mean instance volume ȳ (m³); computed from the dataset when `None`.
    pub mean_size: Option<f64>,
    pub classes: ClassFilter,
}

impl Default for DefenseConfig {
    fn default() -> Self {
        Self {
            sigma: 0.4,
            k_scales: 5,
            seed: 0,
            mean_size: None,
            classes: ClassFilter::default(),
        }
    }
}

impl DefenseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "sigma must lie in (0, 1), got {}",
                self.sigma
            )));
        }
        if self.k_scales == 0 {
            return Err(Error::InvalidArgument("k_scales must be at least 1".into()));
        }
        if let Some(m) = self.mean_size {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::InvalidArgument(format!("mean size must be positive, got {m}")));
            }
        }
        Ok(())
    }

    /// Linear pre-scales `s_1..s_k`, evenly spaced over `[1 − σ, 1 + σ]`.
    pub fn pre_scales(&self) -> Vec<f64> {
        if self.k_scales == 1 {
            return vec![1.0];
        }
        let k = self.k_scales as f64 - 1.0;
        (0..self.k_scales)
            .map(|r| 1.0 - self.sigma + 2.0 * self.sigma * r as f64 / k)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct DefensePlan {
    /// One plan per dataset replica, in replica order.
    pub replicas: Vec<ScalePlan>,
    pub mean_size: f64,
    /// Pre-scaled pooled volumes, replica-major (`r·n + i`).
    pub pooled_volumes: Vec<f64>,
    /// Target volumes after the uniform mapping, aligned with `pooled_volumes`.
    pub mapped_volumes: Vec<f64>,
}

impl DefensePlan {
    pub fn uniform_bounds(&self, sigma: f64) -> (f64, f64) {
        ((1.0 - sigma) * self.mean_size, (1.0 + sigma) * self.mean_size)
    }

    pub fn entry_count(&self) -> usize {
        self.replicas.iter().map(|p| p.len()).sum()
    }
}

/// Builds the `k` replica plans.
pub fn scar_plan(frames: &[Frame], cfg: &DefenseConfig) -> Result<DefensePlan> {
    cfg.validate()?;
    let instances = collect_instances(frames, &cfg.classes);
    if instances.is_empty() {
        return Err(Error::EmptyDataset(format!("no annotations of class {}", cfg.classes)));
    }
    let volumes: Vec<f64> = instances.iter().map(|i| i.volume).collect();
    let n = volumes.len();
    let mean_size = cfg.mean_size.unwrap_or_else(|| mean_std(&volumes).0);
    let lo = (1.0 - cfg.sigma) * mean_size;
    let hi = (1.0 + cfg.sigma) * mean_size;

    let pre = cfg.pre_scales();
    let pooled: Vec<f64> = pre
        .iter()
        .flat_map(|s| volumes.iter().map(move |v| v * s.powi(3)))
        .collect();

    let degenerate = volumes.iter().all(|v| *v == volumes[0]);
    let mapped = if degenerate {
        log::warn!(
            "all annotations share volume {}; every instance maps to the mean size",
            volumes[0]
        );
        vec![mean_size; pooled.len()]
    } else {
        let cdf = EmpiricalCdf::new(&pooled)?;
        icdf_map_all(&pooled, &cdf, QuantileTarget::Uniform { lo, hi })
    };

    let mut replicas = Vec::with_capacity(pre.len());
    for (r, s) in pre.iter().enumerate() {
        let mut plan = ScalePlan::new("scar")
            .with_param("sigma", cfg.sigma)
            .with_param("k_scales", cfg.k_scales)
            .with_param("replica", r)
            .with_param("pre_scale", s)
            .with_param("mean_size", mean_size)
            .with_param("classes", &cfg.classes)
            .with_seed(cfg.seed);
        for (i, inst) in instances.iter().enumerate() {
            let scale = (mapped[r * n + i] / inst.volume).cbrt();
            plan.insert(
                &inst.frame_id,
                inst.annotation_index,
                PlanEntry { scale, attacked: true },
            )?;
        }
        replicas.push(plan);
    }
    Ok(DefensePlan {
        replicas,
        mean_size,
        pooled_volumes: pooled,
        mapped_volumes: mapped,
    })
}

/// Frame id of replica `r` of `id`.
pub fn replica_id(id: &str, r: usize) -> String {
    format!("{id}_r{r}")
}

#[derive(Debug, Clone)]
pub struct MaterializedDataset {
    pub manifest: PathBuf,
    pub frames: Vec<FramePaths>,
}

/// Writes every replica of every frame under `out_dir`, the replica plans
/// under `out_dir/plans/` and a manifest at `out_dir/manifest.txt`.
pub fn scar_materialize(frames: &[Frame], plan: &DefensePlan, out_dir: &Path) -> Result<MaterializedDataset> {
    use rayon::prelude::*;
    let plan_dir = out_dir.join("plans");
    std::fs::create_dir_all(&plan_dir).map_err(|e| Error::io(&plan_dir, e))?;
    let mut written = Vec::with_capacity(frames.len() * plan.replicas.len());
    for (r, replica) in plan.replicas.iter().enumerate() {
        replica.write(&plan_dir.join(format!("replica_{r}.txt")))?;
        let scaled = apply_scale_plan(frames, replica)?;
        let paths = scaled
            .into_par_iter()
            .map(|mut f| {
                f.id = replica_id(&f.id, r);
                write_frame(&f, out_dir)
            })
            .collect::<Result<Vec<_>>>()?;
        written.extend(paths);
    }
    let manifest = out_dir.join("manifest.txt");
    write_manifest(&manifest, &written)?;
    Ok(MaterializedDataset {
        manifest,
        frames: written,
    })
}

/// Size-prior mock standing in for a detector trained on the defended data.
///
/// The training mean moves to the defended mean size and the pull toward it
/// shrinks by the ratio of size spreads (coefficient of variation) before and
/// after uniformization: a regressor that has seen a wider range of sizes
/// leans less on its prior.
pub fn defended_size_prior(
    vanilla: &SizePriorDetector,
    original_volumes: &[f64],
    sigma: f64,
) -> Result<SizePriorDetector> {
    if original_volumes.is_empty() {
        return Err(Error::EmptyDataset("no volumes".into()));
    }
    let (mean, std) = mean_std(original_volumes);
    let spread_before = std / mean;
    let spread_after = sigma / 3f64.sqrt();
    let lambda = vanilla.lambda() * (spread_before / spread_after).min(1.0);
    let rescale = (mean / vanilla.mean_volume()).cbrt();
    SizePriorDetector::new(lambda, vanilla.mean_dims().map(|d| d * rescale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Annotation;
    use crate::geometry::{Box3D, PointCloud};

    fn frames(sizes: &[f64]) -> Vec<Frame> {
        sizes
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let b = Box3D::new(8.0, 0.0, -1.7, 4.0 * s, 1.6 * s, 1.5 * s, 0.0).unwrap();
                Frame::new(
                    format!("{i:06}"),
                    PointCloud::default(),
                    vec![Annotation::new(b, "Car")],
                )
            })
            .collect()
    }

    #[test]
    fn pre_scales_are_evenly_spaced() {
        let cfg = DefenseConfig {
            sigma: 0.4,
            k_scales: 5,
            ..Default::default()
        };
        let s = cfg.pre_scales();
        let expected = [0.6, 0.8, 1.0, 1.2, 1.4];
        for (a, b) in s.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        let one = DefenseConfig { k_scales: 1, ..cfg };
        assert_eq!(one.pre_scales(), vec![1.0]);
    }

    #[test]
    fn cardinality_and_bounds() {
        let fs = frames(&[0.9, 0.95, 1.0, 1.02, 1.1, 1.2]);
        let cfg = DefenseConfig {
            sigma: 0.2,
            k_scales: 3,
            ..Default::default()
        };
        let plan = scar_plan(&fs, &cfg).unwrap();
        assert_eq!(plan.replicas.len(), 3);
        assert_eq!(plan.entry_count(), 18);
        let (lo, hi) = plan.uniform_bounds(0.2);
        assert!(plan.mapped_volumes.iter().all(|v| *v >= lo && *v <= hi));
    }

    #[test]
    fn degenerate_dataset_maps_to_mean() {
        let fs = frames(&[1.0, 1.0, 1.0]);
        let cfg = DefenseConfig {
            sigma: 0.3,
            k_scales: 2,
            ..Default::default()
        };
        let plan = scar_plan(&fs, &cfg).unwrap();
        assert!(plan.mapped_volumes.iter().all(|v| *v == plan.mean_size));
    }

    #[test]
    fn invalid_configs() {
        let fs = frames(&[1.0]);
        for cfg in [
            DefenseConfig {
                sigma: 0.0,
                ..Default::default()
            },
            DefenseConfig {
                sigma: 1.0,
                ..Default::default()
            },
            DefenseConfig {
                k_scales: 0,
                ..Default::default()
            },
        ] {
            assert!(scar_plan(&fs, &cfg).is_err());
        }
    }

    #[test]
    fn defended_prior_pulls_less() {
        let vanilla = SizePriorDetector::new(1.0, [4.0, 1.6, 1.5]).unwrap();
        let vols = [9.0, 9.5, 10.0, 10.5, 11.0];
        let d = defended_size_prior(&vanilla, &vols, 0.4).unwrap();
        assert!(d.lambda() < vanilla.lambda());
        assert!((d.mean_volume() - 10.0).abs() < 1e-9);
    }
}
