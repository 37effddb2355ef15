//! Scaling attacks: model-aware, distribution-aware and blind.
//!
//! Every attack produces a [`ScalePlan`] holding one linear factor `1 + σ`
//! per attacked annotation; [`apply_scale_plan`] turns it into scaled frames.

mod plan;
mod solver;

pub use plan::{apply_scale_plan, apply_scales, PlanEntry, ScalePlan};
pub use solver::{solve_bin_deviations, solve_mass_deviations, BinDeviation, DEFAULT_JS_TOL, MASS_EPS};

use rayon::prelude::*;

use crate::dataset::{collect_instances, Annotation, ClassFilter, Frame};
use crate::detector::{Detection, Detector};
use crate::error::{Error, Result};
use crate::geometry::{iou_3d, Box3D};
use crate::stats::{
    build_histogram, icdf_map_all, sample_from_histogram, EmpiricalCdf, QuantileTarget, SizeDistribution,
};

/// Default IoU threshold below which an instance counts as missed.
pub const DEFAULT_IOU_THRESHOLD: f64 = 0.7;

/// Zero-one attack loss: 1 when no prediction of the instance's class
/// reaches `thr` IoU with it.
pub fn attack_loss(predictions: &[Detection], gt: &Annotation, thr: f64) -> u8 {
    let best = predictions
        .iter()
        .filter(|d| d.class == gt.class)
        .map(|d| iou_3d(&d.bbox, &gt.bbox))
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
    match best {
        Some(iou) if iou >= thr => 0,
        _ => 1,
    }
}

/// Perturbations `σ` on the grid `[-σ_M, σ_M]` with spacing `step`, ordered
/// by increasing `|σ|` with the shrinking side first. Includes `σ = 0`.
pub fn scale_grid(sigma_m: f64, step: f64) -> Result<Vec<f64>> {
    if !(sigma_m > 0.0 && sigma_m < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "sigma_m must lie in (0, 1), got {sigma_m}"
        )));
    }
    if !(step > 0.0) || step > sigma_m {
        return Err(Error::InvalidArgument(format!(
            "step must lie in (0, sigma_m], got {step}"
        )));
    }
    let n = (sigma_m / step).round();
    if (n * step - sigma_m).abs() > 1e-9 * sigma_m.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "step {step} does not divide sigma_m {sigma_m}"
        )));
    }
    let n = n as usize;
    let mut grid = Vec::with_capacity(2 * n + 1);
    grid.push(0.0);
    for i in 1..=n {
        let s = i as f64 * step;
        grid.push(-s);
        grid.push(s);
    }
    Ok(grid)
}

#[derive(Debug, Clone)]
pub struct ModelAwareConfig {
    pub sigma_m: f64,
    pub step: f64,
    pub iou_threshold: f64,
    pub classes: ClassFilter,
    /// Candidate frames sent to the detector per request.
    pub batch_size: usize,
}

impl Default for ModelAwareConfig {
    fn default() -> Self {
        Self {
            sigma_m: 0.2,
            step: 0.01,
            iou_threshold: DEFAULT_IOU_THRESHOLD,
            classes: ClassFilter::default(),
            batch_size: 16,
        }
    }
}

fn check_threshold(thr: f64) -> Result<()> {
    if !(thr > 0.0 && thr < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "IoU threshold must lie in (0, 1), got {thr}"
        )));
    }
    Ok(())
}

/// Scales predictions lying on `scaled` back to the unscaled geometry.
fn unscale_predictions(preds: &mut [Detection], scaled: &Box3D, scale: f64) {
    if scale == 1.0 {
        return;
    }
    let (s, c) = scaled.yaw.sin_cos();
    for d in preds.iter_mut() {
        let (dx, dy) = (d.bbox.cx - scaled.cx, d.bbox.cy - scaled.cy);
        let (u, v) = (c * dx + s * dy, -s * dx + c * dy);
        if u.abs() > 0.5 * scaled.l || v.abs() > 0.5 * scaled.w {
            continue;
        }
        let inv = 1.0 / scale;
        d.bbox = Box3D {
            cx: scaled.cx + dx * inv,
            cy: scaled.cy + dy * inv,
            cz: scaled.cz + (d.bbox.cz - scaled.cz) * inv,
            l: d.bbox.l * inv,
            w: d.bbox.w * inv,
            h: d.bbox.h * inv,
            yaw: d.bbox.yaw,
        };
    }
}

/// Attack loss of one annotation at each candidate scale, scaling only that
/// instance and mapping the predictions back to the original size.
///
/// Stops early (returning a shorter vector) once a loss of 1 is seen when
/// `stop_at_success` is set.
pub fn instance_losses(
    frame: &Frame,
    annotation_index: usize,
    scales: &[f64],
    detector: &dyn Detector,
    thr: f64,
    batch_size: usize,
    stop_at_success: bool,
) -> Result<Vec<u8>> {
    let gt = &frame.annotations[annotation_index];
    let mut losses = Vec::with_capacity(scales.len());
    for (chunk_no, chunk) in scales.chunks(batch_size.max(1)).enumerate() {
        let candidates = chunk
            .iter()
            .enumerate()
            .map(|(j, &s)| {
                let mut per = vec![1.0; frame.annotations.len()];
                per[annotation_index] = s;
                let mut f = apply_scales(frame, &per)?;
                f.id = format!(
                    "{}_a{}_q{}",
                    frame.id,
                    annotation_index,
                    chunk_no * batch_size.max(1) + j
                );
                Ok(f)
            })
            .collect::<Result<Vec<_>>>()?;
        let outputs = detector.detect_batch(&candidates).map_err(|e| match e {
            Error::Detector { msg, .. } => Error::Detector {
                frame_id: frame.id.clone(),
                msg,
            },
            other => other,
        })?;
        for ((cand, mut preds), &s) in candidates.iter().zip(outputs).zip(chunk) {
            unscale_predictions(&mut preds, &cand.annotations[annotation_index].bbox, s);
            let loss = attack_loss(&preds, gt, thr);
            losses.push(loss);
            if stop_at_success && loss == 1 {
                return Ok(losses);
            }
        }
    }
    Ok(losses)
}

/// Searches, per instance, the smallest grid perturbation that makes the
/// detector miss it. Instances the grid cannot break keep scale 1 and are
/// flagged unattacked.
pub fn model_aware_attack(frames: &[Frame], detector: &dyn Detector, cfg: &ModelAwareConfig) -> Result<ScalePlan> {
    check_threshold(cfg.iou_threshold)?;
    let grid = scale_grid(cfg.sigma_m, cfg.step)?;
    let scales: Vec<f64> = grid.iter().map(|s| 1.0 + s).collect();
    let results: Vec<Vec<(String, usize, PlanEntry)>> = frames
        .par_iter()
        .map(|f| {
            f.annotations
                .iter()
                .enumerate()
                .filter(|(_, a)| cfg.classes.matches(&a.class))
                .map(|(ai, _)| {
                    let losses = instance_losses(f, ai, &scales, detector, cfg.iou_threshold, cfg.batch_size, true)?;
                    let entry = match losses.iter().position(|l| *l == 1) {
                        Some(j) => PlanEntry {
                            scale: scales[j],
                            attacked: true,
                        },
                        None => PlanEntry {
                            scale: 1.0,
                            attacked: false,
                        },
                    };
                    Ok((f.id.clone(), ai, entry))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut plan = ScalePlan::new("model-aware")
        .with_param("sigma_m", cfg.sigma_m)
        .with_param("step", cfg.step)
        .with_param("iou_threshold", cfg.iou_threshold)
        .with_param("classes", &cfg.classes)
        .with_param("detector", detector.name());
    for (f, a, e) in results.into_iter().flatten() {
        plan.insert(&f, a, e)?;
    }
    Ok(plan)
}

#[derive(Debug, Clone)]
pub struct DistributionAwareConfig {
    pub phi: f64,
    pub bins: usize,
    pub seed: u64,
    pub tol: f64,
    pub classes: ClassFilter,
}

impl Default for DistributionAwareConfig {
    fn default() -> Self {
        Self {
            phi: 0.2,
            bins: crate::stats::DEFAULT_BINS,
            seed: 0,
            tol: DEFAULT_JS_TOL,
            classes: ClassFilter::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DistributionAttack {
    pub plan: ScalePlan,
    pub original: SizeDistribution,
    pub adversarial: SizeDistribution,
    pub deviation: BinDeviation,
}

/// Perturbs the volume histogram to divergence `φ`, samples adversarial
/// volumes from it and transports every instance onto them by quantile
/// mapping. The linear scale is the cube root of the volume ratio.
pub fn distribution_aware_attack(frames: &[Frame], cfg: &DistributionAwareConfig) -> Result<DistributionAttack> {
    let instances = collect_instances(frames, &cfg.classes);
    if instances.is_empty() {
        return Err(Error::EmptyDataset(format!("no annotations of class {}", cfg.classes)));
    }
    let volumes: Vec<f64> = instances.iter().map(|i| i.volume).collect();
    let original = build_histogram(&volumes, cfg.bins, None)?;
    let deviation = solve_bin_deviations(&original, cfg.phi, cfg.tol)?;
    let adversarial = deviation.apply(&original)?;

    let mapped = if cfg.phi == 0.0 {
        volumes.clone()
    } else {
        let samples = sample_from_histogram(&adversarial, volumes.len(), cfg.seed);
        let source = EmpiricalCdf::new(&volumes)?;
        let target = EmpiricalCdf::new(&samples)?;
        icdf_map_all(&volumes, &source, QuantileTarget::Empirical(&target))
    };

    let mut plan = ScalePlan::new("distribution-aware")
        .with_param("phi", cfg.phi)
        .with_param("bins", cfg.bins)
        .with_param("achieved_js", deviation.achieved_js)
        .with_param("classes", &cfg.classes)
        .with_seed(cfg.seed);
    for (inst, (y, y_adv)) in instances.iter().zip(volumes.iter().zip(&mapped)) {
        let scale = if y == y_adv { 1.0 } else { (y_adv / y).cbrt() };
        plan.insert(
            &inst.frame_id,
            inst.annotation_index,
            PlanEntry { scale, attacked: true },
        )?;
    }
    Ok(DistributionAttack {
        plan,
        original,
        adversarial,
        deviation,
    })
}

/// Scales every matching instance by the same factor `1 + σ_B`.
pub fn blind_attack(frames: &[Frame], sigma_b: f64, classes: &ClassFilter) -> Result<ScalePlan> {
    if !(sigma_b > -1.0) || !sigma_b.is_finite() {
        return Err(Error::InvalidArgument(format!("sigma_b must exceed -1, got {sigma_b}")));
    }
    let mut plan = ScalePlan::new("blind")
        .with_param("sigma_b", sigma_b)
        .with_param("classes", classes);
    for inst in collect_instances(frames, classes) {
        plan.insert(
            &inst.frame_id,
            inst.annotation_index,
            PlanEntry {
                scale: 1.0 + sigma_b,
                attacked: true,
            },
        )?;
    }
    Ok(plan)
}

/// Outcome of re-checking a model-aware plan against a detector.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlanVerification {
    pub checked: usize,
    pub violations: Vec<String>,
}

impl PlanVerification {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Re-verifies a model-aware plan: attacked entries must still break the
/// detector and no grid scale with smaller `|σ|` may do so; unattacked
/// entries must survive every grid scale. At most `max_entries` entries are
/// checked (all when `None`).
pub fn verify_model_aware_plan(
    frames: &[Frame],
    detector: &dyn Detector,
    plan: &ScalePlan,
    cfg: &ModelAwareConfig,
    max_entries: Option<usize>,
) -> Result<PlanVerification> {
    check_threshold(cfg.iou_threshold)?;
    let grid = scale_grid(cfg.sigma_m, cfg.step)?;
    let by_id: std::collections::HashMap<&str, &Frame> = frames.iter().map(|f| (f.id.as_str(), f)).collect();
    let mut report = PlanVerification::default();
    for (fid, ai, entry) in plan.entries().take(max_entries.unwrap_or(usize::MAX)) {
        let frame = by_id
            .get(fid)
            .ok_or_else(|| Error::InvalidPlan(format!("frame '{fid}' is not in the dataset")))?;
        if ai >= frame.annotations.len() {
            return Err(Error::InvalidPlan(format!("frame '{fid}' has no annotation {ai}")));
        }
        report.checked += 1;
        let sigma = entry.sigma();
        let candidates: Vec<f64> = if entry.attacked {
            let pos = grid
                .iter()
                .position(|g| (g - sigma).abs() < 1e-9)
                .ok_or_else(|| Error::InvalidPlan(format!("{fid}/{ai}: σ={sigma} is not on the grid")))?;
            grid[..=pos].iter().map(|g| 1.0 + g).collect()
        } else {
            grid.iter().map(|g| 1.0 + g).collect()
        };
        let losses = instance_losses(
            frame,
            ai,
            &candidates,
            detector,
            cfg.iou_threshold,
            cfg.batch_size,
            false,
        )?;
        if entry.attacked {
            let (last, earlier) = losses.split_last().expect("grid is nonempty");
            if *last != 1 {
                report
                    .violations
                    .push(format!("{fid}/{ai}: σ={sigma} no longer breaks the detector"));
            }
            if let Some(j) = earlier.iter().position(|l| *l == 1) {
                report
                    .violations
                    .push(format!("{fid}/{ai}: smaller σ={} also succeeds", grid[j]));
            }
        } else if let Some(j) = losses.iter().position(|l| *l == 1) {
            report
                .violations
                .push(format!("{fid}/{ai}: flagged unattacked but σ={} succeeds", grid[j]));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::{OracleDetector, SizePriorDetector};
    use crate::geometry::PointCloud;

    const MEAN: [f64; 3] = [3.9, 1.6, 1.56];

    fn frames(n: usize) -> Vec<Frame> {
        (0..n)
            .map(|i| {
                let anns = (0..3)
                    .map(|j| {
                        let b =
                            Box3D::new(10.0 * j as f64, 5.0, -1.7, MEAN[0], MEAN[1], MEAN[2], 0.1 * j as f64).unwrap();
                        Annotation::new(b, "Car")
                    })
                    .collect();
                Frame::new(format!("{i:06}"), PointCloud::default(), anns)
            })
            .collect()
    }

    fn det(bbox: Box3D, score: f64) -> Detection {
        Detection::new(bbox, score, "Car").unwrap()
    }

    #[test]
    fn loss_threshold_is_strict() {
        let gt = Annotation::new(Box3D::new(0.0, 0.0, 0.0, 4.0, 2.0, 1.5, 0.0).unwrap(), "Car");
        // nested box with IoU exactly s³
        let at = |iou: f64| det(gt.bbox.scaled(iou.cbrt()), 1.0);
        assert_eq!(attack_loss(&[at(0.69)], &gt, 0.7), 1);
        assert_eq!(attack_loss(&[det(gt.bbox, 1.0)], &gt, 0.7), 0);
        assert_eq!(attack_loss(&[], &gt, 0.7), 1);
        let mut other = det(gt.bbox, 1.0);
        other.class = "Van".into();
        assert_eq!(attack_loss(&[other], &gt, 0.7), 1);
    }

    #[test]
    fn loss_at_exact_boundary_is_zero() {
        // unit cube vs. the same footprint 0.7 tall: IoU is exactly 0.7
        let gt = Annotation::new(Box3D::new(0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0).unwrap(), "Car");
        let pred = det(Box3D::new(0.0, 0.0, 0.0, 1.0, 1.0, 0.7, 0.0).unwrap(), 1.0);
        assert_eq!(iou_3d(&pred.bbox, &gt.bbox), 0.7);
        assert_eq!(attack_loss(&[pred], &gt, 0.7), 0);
    }

    #[test]
    fn grid_order_and_validation() {
        let g = scale_grid(0.03, 0.01).unwrap();
        assert_eq!(g.len(), 7);
        assert_eq!(g[0], 0.0);
        assert!(g[1] < 0.0 && (g[1] + g[2]).abs() < 1e-15);
        assert!(scale_grid(0.05, 0.03).is_err());
        assert!(scale_grid(0.0, 0.01).is_err());
    }

    #[test]
    fn oracle_cannot_be_attacked() {
        let cfg = ModelAwareConfig {
            sigma_m: 0.1,
            ..Default::default()
        };
        let plan = model_aware_attack(&frames(2), &OracleDetector, &cfg).unwrap();
        assert_eq!(plan.len(), 6);
        assert_eq!(plan.attacked_count(), 0);
        assert!(plan.entries().all(|(_, _, e)| e.scale == 1.0));
    }

    #[test]
    fn size_prior_boundary() {
        let sp = SizePriorDetector::new(1.0, MEAN).unwrap();
        let cfg = ModelAwareConfig {
            sigma_m: 0.4,
            step: 0.01,
            ..Default::default()
        };
        let plan = model_aware_attack(&frames(2), &sp, &cfg).unwrap();
        assert!(plan
            .entries()
            .all(|(_, _, e)| e.attacked && (e.sigma() + 0.12).abs() < 1e-12));
        let weak = ModelAwareConfig { sigma_m: 0.05, ..cfg };
        assert_eq!(model_aware_attack(&frames(2), &sp, &weak).unwrap().attacked_count(), 0);
    }

    #[test]
    fn blind_plan() {
        let p = blind_attack(&frames(2), 0.2, &ClassFilter::default()).unwrap();
        assert!(p.entries().all(|(_, _, e)| (e.scale - 1.2).abs() < 1e-15));
        let out = apply_scale_plan(&frames(2), &p).unwrap();
        let v0 = frames(1)[0].annotations[0].bbox.volume();
        assert!((out[0].annotations[0].bbox.volume() / v0 - 1.728).abs() < 1e-12);
        assert!(blind_attack(&frames(1), -1.0, &ClassFilter::default()).is_err());
        let id = blind_attack(&frames(1), 0.0, &ClassFilter::default()).unwrap();
        assert_eq!(apply_scale_plan(&frames(1), &id).unwrap(), frames(1));
    }

    #[test]
    fn distribution_attack_zero_phi_is_identity() {
        let mut fs = frames(4);
        for (i, f) in fs.iter_mut().enumerate() {
            for (j, a) in f.annotations.iter_mut().enumerate() {
                a.bbox = a.bbox.scaled(1.0 + 0.01 * (i * 3 + j) as f64);
            }
        }
        let cfg = DistributionAwareConfig {
            phi: 0.0,
            bins: 4,
            ..Default::default()
        };
        let atk = distribution_aware_attack(&fs, &cfg).unwrap();
        assert!(atk.plan.entries().all(|(_, _, e)| e.scale == 1.0));
    }
}
