//! Black-box detector interface and desk-scale mock detectors.
//!
//! Attacks only ever call [`Detector::detect`] / [`Detector::detect_batch`];
//! no gradients, logits or weights are visible.

mod external;

pub use external::{spawn_external_detector, ExternalDetector, REQUEST_ENV, WORKDIR_ENV};

use crate::dataset::Frame;
use crate::error::{Error, Result};
use crate::geometry::Box3D;

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub bbox: Box3D,
    pub score: f64,
    pub class: String,
}

impl Detection {
    pub fn new(bbox: Box3D, score: f64, class: impl Into<String>) -> Result<Self> {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::InvalidArgument(format!(
                "detection score {score} outside [0, 1]"
            )));
        }
        Ok(Self {
            bbox,
            score,
            class: class.into(),
        })
    }
}

/// Sorts by descending score; ties keep their original order.
pub fn sort_by_score(dets: &mut [Detection]) {
    dets.sort_by(|a, b| b.score.total_cmp(&a.score));
}

/// A 3D detector queried as a black box.
///
/// Implementations must be deterministic for a fixed configuration.
pub trait Detector: Send + Sync {
    fn name(&self) -> String;

    /// Predictions for one frame in the sensor frame, highest score first.
    fn detect(&self, frame: &Frame) -> Result<Vec<Detection>>;

    /// Predictions for several frames; adapters with per-call overhead
    /// override this to serve the whole batch in one round trip.
    fn detect_batch(&self, frames: &[Frame]) -> Result<Vec<Vec<Detection>>> {
        frames.iter().map(|f| self.detect(f)).collect()
    }
}

impl<D: Detector + ?Sized> Detector for Box<D> {
    fn name(&self) -> String {
        (**self).name()
    }

    fn detect(&self, frame: &Frame) -> Result<Vec<Detection>> {
        (**self).detect(frame)
    }

    fn detect_batch(&self, frames: &[Frame]) -> Result<Vec<Vec<Detection>>> {
        (**self).detect_batch(frames)
    }
}

/// Returns the ground truth of every frame with score 1.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleDetector;

impl Detector for OracleDetector {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn detect(&self, frame: &Frame) -> Result<Vec<Detection>> {
        Ok(frame
            .annotations
            .iter()
            .map(|a| Detection {
                bbox: a.bbox,
                score: 1.0,
                class: a.class.clone(),
            })
            .collect())
    }
}

/// Predicts the true pose of every instance but pulls its dimensions
/// toward a fixed training-mean size:
/// `dims = (1 − λ)·observed + λ·mean`.
///
/// With `λ = 1` the predicted size ignores the input entirely, which mimics
/// a regressor that has only ever seen one size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizePriorDetector {
    lambda: f64,
    mean_dims: [f64; 3],
}

impl SizePriorDetector {
    /// `mean_dims` is `[l, w, h]` in meters.
    pub fn new(lambda: f64, mean_dims: [f64; 3]) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidArgument(format!("lambda {lambda} outside [0, 1]")));
        }
        if mean_dims.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "mean dims must be positive: {mean_dims:?}"
            )));
        }
        Ok(Self { lambda, mean_dims })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mean_dims(&self) -> [f64; 3] {
        self.mean_dims
    }

    pub fn mean_volume(&self) -> f64 {
        self.mean_dims.iter().product()
    }
}

impl Detector for SizePriorDetector {
    fn name(&self) -> String {
        let [l, w, h] = self.mean_dims;
        format!("size-prior:lambda={},mean={l}x{w}x{h}", self.lambda)
    }

    fn detect(&self, frame: &Frame) -> Result<Vec<Detection>> {
        let pull = |obs: f64, mean: f64| (1.0 - self.lambda) * obs + self.lambda * mean;
        Ok(frame
            .annotations
            .iter()
            .map(|a| {
                let b = a.bbox;
                let [ml, mw, mh] = self.mean_dims;
                Detection {
                    bbox: Box3D {
                        l: pull(b.l, ml),
                        w: pull(b.w, mw),
                        h: pull(b.h, mh),
                        ..b
                    },
                    score: 1.0,
                    class: a.class.clone(),
                }
            })
            .collect())
    }
}

/// Builds a detector from a textual spec:
/// `oracle`, `size-prior:lambda=<λ>[,mean=<l>x<w>x<h>]` or
/// `external:<command line>` (split with shell quoting rules).
///
/// `default_mean` fills in a size-prior mean that the spec leaves out.
pub fn detector_from_spec(
    spec: &str,
    default_mean: Option<[f64; 3]>,
    workdir: &std::path::Path,
    timeout: std::time::Duration,
) -> Result<Box<dyn Detector>> {
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    match kind {
        "oracle" => Ok(Box::new(OracleDetector)),
        "size-prior" => {
            let mut lambda = 1.0;
            let mut mean = default_mean;
            for kv in rest.split(',').filter(|s| !s.is_empty()) {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| Error::InvalidArgument(format!("bad detector option '{kv}'")))?;
                match k {
                    "lambda" => {
                        lambda = v
                            .parse()
                            .map_err(|_| Error::InvalidArgument(format!("bad lambda '{v}'")))?
                    }
                    "mean" => {
                        let parts: Vec<f64> = v
                            .split('x')
                            .map(|s| s.parse::<f64>())
                            .collect::<std::result::Result<_, _>>()
                            .map_err(|_| Error::InvalidArgument(format!("bad mean '{v}'")))?;
                        if parts.len() != 3 {
                            return Err(Error::InvalidArgument(format!("mean needs lxwxh, got '{v}'")));
                        }
                        mean = Some([parts[0], parts[1], parts[2]]);
                    }
                    _ => return Err(Error::InvalidArgument(format!("unknown size-prior option '{k}'"))),
                }
            }
            let mean = mean.ok_or_else(|| Error::InvalidArgument("size-prior needs a mean size".into()))?;
            Ok(Box::new(SizePriorDetector::new(lambda, mean)?))
        }
        "external" => {
            let command = shlex::split(rest)
                .ok_or_else(|| Error::InvalidArgument(format!("cannot split detector command '{rest}'")))?;
            Ok(Box::new(
                spawn_external_detector(command, workdir)?.with_timeout(timeout),
            ))
        }
        _ => Err(Error::InvalidArgument(format!("unknown detector '{spec}'"))),
    }
}
