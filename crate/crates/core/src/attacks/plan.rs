//! Per-instance scale plans and their text format.
//!
//! ```text
//! # scar scale plan v1
//! # attack: model-aware
//! # param sigma_m: 0.4
//! # param step: 0.01
//! # seed: 0
//! # mean_abs_sigma: 0.12
//! # columns: frame_id annotation_index scale_factor flag
//! 000001 0 0.88 1
//! ```
//!
//! `flag` is 1 when the attack reached its goal for that instance (always 1
//! for attacks without a per-instance goal) and 0 otherwise.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::dataset::Frame;
use crate::error::{Error, Result};
use crate::geometry::scale_instances;

const HEADER: &str = "# scar scale plan v1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanEntry {
    /// Linear scale factor `1 + σ`.
    pub scale: f64,
    pub attacked: bool,
}

impl PlanEntry {
    pub fn sigma(&self) -> f64 {
        self.scale - 1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalePlan {
    pub attack: String,
    pub params: BTreeMap<String, String>,
    pub seed: Option<u64>,
    entries: BTreeMap<(String, usize), PlanEntry>,
}

impl ScalePlan {
    pub fn new(attack: impl Into<String>) -> Self {
        Self {
            attack: attack.into(),
            params: BTreeMap::new(),
            seed: None,
            entries: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.into(), value.to_string());
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn insert(&mut self, frame_id: &str, annotation_index: usize, entry: PlanEntry) -> Result<()> {
        if !(entry.scale > 0.0 && entry.scale.is_finite()) {
            return Err(Error::InvalidPlan(format!(
                "scale {} for {frame_id}/{annotation_index} is not positive",
                entry.scale
            )));
        }
        self.entries.insert((frame_id.to_string(), annotation_index), entry);
        Ok(())
    }

    pub fn get(&self, frame_id: &str, annotation_index: usize) -> Option<&PlanEntry> {
        self.entries.get(&(frame_id.to_string(), annotation_index))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, usize, &PlanEntry)> {
        self.entries.iter().map(|((f, a), e)| (f.as_str(), *a, e))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn attacked_count(&self) -> usize {
        self.entries.values().filter(|e| e.attacked).count()
    }

    /// Mean `|σ|` over every entry, attacked or not.
    pub fn mean_abs_sigma(&self) -> f64 {
        if self.entries.is_empty() {
            return 0.0;
        }
        self.entries.values().map(|e| e.sigma().abs()).sum::<f64>() / self.entries.len() as f64
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{HEADER}\n# attack: {}\n", self.attack);
        for (k, v) in &self.params {
            let _ = writeln!(s, "# param {k}: {v}");
        }
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "# seed: {seed}");
        }
        let _ = writeln!(s, "# mean_abs_sigma: {}", self.mean_abs_sigma());
        s.push_str("# columns: frame_id annotation_index scale_factor flag\n");
        for ((f, a), e) in &self.entries {
            let _ = writeln!(s, "{f} {a} {} {}", e.scale, u8::from(e.attacked));
        }
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut plan = ScalePlan::new("");
        let mut saw_header = false;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                let meta = meta.trim();
                if meta == HEADER.trim_start_matches("# ") {
                    saw_header = true;
                } else if let Some(v) = meta.strip_prefix("attack:") {
                    plan.attack = v.trim().to_string();
                } else if let Some(kv) = meta.strip_prefix("param ") {
                    let (k, v) = kv
                        .split_once(':')
                        .ok_or_else(|| Error::parse(path, lineno + 1, "malformed param line"))?;
                    plan.params.insert(k.trim().into(), v.trim().into());
                } else if let Some(v) = meta.strip_prefix("seed:") {
                    plan.seed = Some(
                        v.trim()
                            .parse()
                            .map_err(|e| Error::parse(path, lineno + 1, format!("seed: {e}")))?,
                    );
                }
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(Error::parse(
                    path,
                    lineno + 1,
                    format!("expected 4 columns, found {}", f.len()),
                ));
            }
            let idx: usize = f[1]
                .parse()
                .map_err(|e| Error::parse(path, lineno + 1, format!("annotation index: {e}")))?;
            let scale: f64 = f[2]
                .parse()
                .map_err(|e| Error::parse(path, lineno + 1, format!("scale: {e}")))?;
            let attacked = match f[3] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::parse(
                        path,
                        lineno + 1,
                        format!("flag must be 0 or 1, got {other}"),
                    ))
                }
            };
            plan.insert(f[0], idx, PlanEntry { scale, attacked })
                .map_err(|e| Error::parse(path, lineno + 1, e.to_string()))?;
        }
        if !saw_header {
            return Err(Error::parse(path, 1, "missing scale plan header"));
        }
        Ok(plan)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}

/// Scales every planned instance; annotations without an entry keep scale 1.
/// The input frames are left untouched.
pub fn apply_scale_plan(frames: &[Frame], plan: &ScalePlan) -> Result<Vec<Frame>> {
    let by_id: HashMap<&str, &Frame> = frames.iter().map(|f| (f.id.as_str(), f)).collect();
    let mut per_frame: HashMap<&str, Vec<(usize, f64)>> = HashMap::new();
    for (fid, idx, e) in plan.entries() {
        let frame = by_id
            .get(fid)
            .ok_or_else(|| Error::InvalidPlan(format!("frame '{fid}' is not in the dataset")))?;
        if idx >= frame.annotations.len() {
            return Err(Error::InvalidPlan(format!(
                "frame '{fid}' has {} annotations, plan references index {idx}",
                frame.annotations.len()
            )));
        }
        per_frame.entry(fid).or_default().push((idx, e.scale));
    }
    frames
        .par_iter()
        .map(|f| {
            let Some(entries) = per_frame.get(f.id.as_str()) else {
                return Ok(f.clone());
            };
            let mut scales = vec![1.0; f.annotations.len()];
            for (idx, s) in entries {
                scales[*idx] = *s;
            }
            apply_scales(f, &scales)
        })
        .collect()
}

/// Scales the annotations of one frame by the given per-annotation factors.
pub fn apply_scales(frame: &Frame, scales: &[f64]) -> Result<Frame> {
    debug_assert_eq!(scales.len(), frame.annotations.len());
    let instances: Vec<_> = frame
        .annotations
        .iter()
        .zip(scales)
        .map(|(a, s)| (a.bbox, *s))
        .collect();
    let scene = scale_instances(&frame.cloud, &instances)?;
    let mut out = frame.clone();
    out.cloud = scene.cloud;
    for (a, b) in out.annotations.iter_mut().zip(scene.boxes) {
        a.bbox = b;
    }
    Ok(out)
}
