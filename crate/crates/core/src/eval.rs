//! Detection matching and the ASR / Recall / AP metrics.

use std::fmt::Write as _;

use crate::dataset::{Annotation, ClassFilter, Frame};
use crate::detector::Detection;
use crate::error::{Error, Result};
use crate::geometry::iou_3d;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnotationMatch {
    pub matched: bool,
    /// Highest IoU reached by any same-class detection (0 when none).
    pub best_iou: f64,
    /// Score of the detection that claimed this annotation.
    pub score: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionOutcome {
    pub score: f64,
    pub true_positive: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub frame_id: String,
    pub annotations: Vec<AnnotationMatch>,
    /// In descending score order.
    pub detections: Vec<DetectionOutcome>,
}

impl MatchResult {
    pub fn matched_count(&self) -> usize {
        self.annotations.iter().filter(|a| a.matched).count()
    }
}

/// Greedy matching: detections in descending score order each claim the
/// unclaimed same-class annotation with the highest IoU `≥ iou_thr`.
pub fn match_frame(frame_id: &str, detections: &[Detection], annotations: &[Annotation], iou_thr: f64) -> MatchResult {
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| detections[b].score.total_cmp(&detections[a].score));

    let mut ann: Vec<AnnotationMatch> = annotations
        .iter()
        .map(|_| AnnotationMatch {
            matched: false,
            best_iou: 0.0,
            score: None,
        })
        .collect();
    let mut outcomes = Vec::with_capacity(detections.len());
    for &di in &order {
        let d = &detections[di];
        let mut claim: Option<(usize, f64)> = None;
        for (ai, a) in annotations.iter().enumerate() {
            if a.class != d.class {
                continue;
            }
            let iou = iou_3d(&d.bbox, &a.bbox);
            ann[ai].best_iou = ann[ai].best_iou.max(iou);
            if !ann[ai].matched && iou >= iou_thr && claim.is_none_or(|(_, best)| iou > best) {
                claim = Some((ai, iou));
            }
        }
        if let Some((ai, _)) = claim {
            ann[ai].matched = true;
            ann[ai].score = Some(d.score);
        }
        outcomes.push(DetectionOutcome {
            score: d.score,
            true_positive: claim.is_some(),
        });
    }
    MatchResult {
        frame_id: frame_id.to_string(),
        annotations: ann,
        detections: outcomes,
    }
}

/// Matches per-frame predictions against frames, keeping only classes
/// accepted by `classes` on both sides.
pub fn evaluate_frames(
    frames: &[Frame],
    predictions: &[Vec<Detection>],
    iou_thr: f64,
    classes: &ClassFilter,
) -> Result<Vec<MatchResult>> {
    if frames.len() != predictions.len() {
        return Err(Error::InvalidArgument(format!(
            "{} frames but {} prediction lists",
            frames.len(),
            predictions.len()
        )));
    }
    Ok(frames
        .iter()
        .zip(predictions)
        .map(|(f, preds)| {
            let anns: Vec<Annotation> = f
                .annotations
                .iter()
                .filter(|a| classes.matches(&a.class))
                .cloned()
                .collect();
            let dets: Vec<Detection> = preds.iter().filter(|d| classes.matches(&d.class)).cloned().collect();
            match_frame(&f.id, &dets, &anns, iou_thr)
        })
        .collect())
}

/// Which instances count in the ASR denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AsrDenominator {
    /// Instances detected before the attack; the numerator counts those
    /// that are missed afterwards.
    #[default]
    PreviouslyDetected,
    /// Every instance; the numerator counts every instance missed after
    /// the attack.
    AllInstances,
}

fn check_universe(before: &[MatchResult], after: &[MatchResult]) -> Result<()> {
    if before.len() != after.len() {
        return Err(Error::UniverseMismatch(format!(
            "{} vs {} frames",
            before.len(),
            after.len()
        )));
    }
    for (b, a) in before.iter().zip(after) {
        if b.frame_id != a.frame_id || b.annotations.len() != a.annotations.len() {
            return Err(Error::UniverseMismatch(format!(
                "frame {} ({} annotations) vs {} ({} annotations)",
                b.frame_id,
                b.annotations.len(),
                a.frame_id,
                a.annotations.len()
            )));
        }
    }
    Ok(())
}

/// Attack success rate in percent.
pub fn asr(before: &[MatchResult], after: &[MatchResult], denominator: AsrDenominator) -> Result<f64> {
    check_universe(before, after)?;
    let pairs = before
        .iter()
        .zip(after)
        .flat_map(|(b, a)| b.annotations.iter().zip(&a.annotations));
    let (mut hits, mut total) = (0usize, 0usize);
    for (b, a) in pairs {
        match denominator {
            AsrDenominator::PreviouslyDetected => {
                if b.matched {
                    total += 1;
                    hits += usize::from(!a.matched);
                }
            }
            AsrDenominator::AllInstances => {
                total += 1;
                hits += usize::from(!a.matched);
            }
        }
    }
    if total == 0 {
        return Err(Error::UndefinedMetric("ASR denominator is zero".into()));
    }
    Ok(100.0 * hits as f64 / total as f64)
}

/// Percentage of annotations matched.
pub fn recall(results: &[MatchResult]) -> Result<f64> {
    let total: usize = results.iter().map(|r| r.annotations.len()).sum();
    if total == 0 {
        return Err(Error::UndefinedMetric("recall over zero annotations".into()));
    }
    let matched: usize = results.iter().map(|r| r.matched_count()).sum();
    Ok(100.0 * matched as f64 / total as f64)
}

/// Recall sampling positions for interpolated AP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ApInterpolation {
    /// `1/40, 2/40, …, 1`.
    #[default]
    Forty,
    /// `0, 0.1, …, 1`.
    Eleven,
}

/// Interpolated average precision in percent.
pub fn average_precision(results: &[MatchResult], mode: ApInterpolation) -> Result<f64> {
    let total: usize = results.iter().map(|r| r.annotations.len()).sum();
    if total == 0 {
        return Err(Error::UndefinedMetric("AP over zero annotations".into()));
    }
    let mut dets: Vec<DetectionOutcome> = results.iter().flat_map(|r| r.detections.iter().copied()).collect();
    dets.sort_by(|a, b| b.score.total_cmp(&a.score));

    // (true positives so far, precision) at each cut of the ranking
    let mut curve = Vec::with_capacity(dets.len());
    let mut tp = 0usize;
    for (i, d) in dets.iter().enumerate() {
        tp += usize::from(d.true_positive);
        curve.push((tp, tp as f64 / (i + 1) as f64));
    }
    // suffix maximum of precision
    let mut best_after = vec![0.0f64; curve.len() + 1];
    for i in (0..curve.len()).rev() {
        best_after[i] = best_after[i + 1].max(curve[i].1);
    }

    let (positions, steps): (Vec<usize>, usize) = match mode {
        ApInterpolation::Forty => ((1..=40).collect(), 40),
        ApInterpolation::Eleven => ((0..=10).collect(), 10),
    };
    let mut sum = 0.0;
    for &m in &positions {
        // first cut whose recall tp/total reaches m/steps
        let first = curve.partition_point(|(tp, _)| tp * steps < m * total);
        sum += best_after[first];
    }
    Ok(100.0 * sum / positions.len() as f64)
}

/// Matches and computes 40-point AP in one call.
pub fn ap_40(frames: &[Frame], predictions: &[Vec<Detection>], iou_thr: f64, classes: &ClassFilter) -> Result<f64> {
    average_precision(
        &evaluate_frames(frames, predictions, iou_thr, classes)?,
        ApInterpolation::Forty,
    )
}

/// Named metric values plus the parameters that produced them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsReport {
    pub metrics: Vec<(String, f64)>,
    pub params: Vec<(String, String)>,
}

impl MetricsReport {
    pub fn metric(&mut self, name: &str, value: f64) -> &mut Self {
        self.metrics.push((name.into(), value));
        self
    }

    pub fn param(&mut self, name: &str, value: impl ToString) -> &mut Self {
        self.params.push((name.into(), value.to_string()));
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    /// Aligned two-column table.
    pub fn to_table(&self) -> String {
        let width = self.metrics.iter().map(|(k, _)| k.len()).max().unwrap_or(6).max(6);
        let mut s = format!("{:<width$}  {:>10}\n", "metric", "value");
        s.push_str(&"-".repeat(width + 12));
        s.push('\n');
        for (k, v) in &self.metrics {
            let _ = writeln!(s, "{k:<width$}  {v:>10.4}");
        }
        s
    }

    /// `metric <name> <value>` and `param <name> <value>` lines.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.metrics {
            let _ = writeln!(s, "metric {k} {v}");
        }
        for (k, v) in &self.params {
            let _ = writeln!(s, "param {k} {v}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Box3D;

    fn ann(x: f64) -> Annotation {
        Annotation::new(Box3D::new(x, 0.0, 0.0, 4.0, 2.0, 1.5, 0.0).unwrap(), "Car")
    }

    fn det(x: f64, score: f64) -> Detection {
        Detection::new(Box3D::new(x, 0.0, 0.0, 4.0, 2.0, 1.5, 0.0).unwrap(), score, "Car").unwrap()
    }

    fn result(id: &str, matched: &[bool]) -> MatchResult {
        MatchResult {
            frame_id: id.into(),
            annotations: matched
                .iter()
                .map(|m| AnnotationMatch {
                    matched: *m,
                    best_iou: 0.0,
                    score: None,
                })
                .collect(),
            detections: vec![],
        }
    }

    #[test]
    fn perfect_match() {
        let anns = [ann(0.0), ann(10.0)];
        let r = match_frame("f", &[det(0.0, 0.9), det(10.0, 0.8)], &anns, 0.7);
        assert_eq!(r.matched_count(), 2);
        assert!(r.annotations.iter().all(|a| (a.best_iou - 1.0).abs() < 1e-12));
    }

    #[test]
    fn no_detections_no_matches() {
        assert_eq!(match_frame("f", &[], &[ann(0.0)], 0.7).matched_count(), 0);
    }

    #[test]
    fn higher_score_wins_contested_annotation() {
        let r = match_frame("f", &[det(0.1, 0.6), det(0.0, 0.9)], &[ann(0.0)], 0.7);
        assert_eq!(r.annotations[0].score, Some(0.9));
        assert_eq!(
            r.detections,
            vec![
                DetectionOutcome {
                    score: 0.9,
                    true_positive: true
                },
                DetectionOutcome {
                    score: 0.6,
                    true_positive: false
                },
            ]
        );
    }

    #[test]
    fn asr_counts() {
        let before = [result("a", &[true, true]), result("b", &[true, true])];
        assert_eq!(asr(&before, &before, AsrDenominator::PreviouslyDetected).unwrap(), 0.0);
        let none = [result("a", &[false, false]), result("b", &[false, false])];
        assert_eq!(asr(&before, &none, AsrDenominator::PreviouslyDetected).unwrap(), 100.0);
        let half = [result("a", &[false, true]), result("b", &[true, false])];
        assert_eq!(asr(&before, &half, AsrDenominator::PreviouslyDetected).unwrap(), 50.0);
        assert!(matches!(
            asr(&none, &none, AsrDenominator::PreviouslyDetected),
            Err(Error::UndefinedMetric(_))
        ));
        assert!(asr(&before, &before[..1], AsrDenominator::PreviouslyDetected).is_err());
    }

    #[test]
    fn asr_all_instances_denominator() {
        let before = [result("a", &[true, false])];
        let after = [result("a", &[false, false])];
        assert_eq!(asr(&before, &after, AsrDenominator::AllInstances).unwrap(), 100.0);
        assert_eq!(asr(&before, &after, AsrDenominator::PreviouslyDetected).unwrap(), 100.0);
    }

    #[test]
    fn recall_counts() {
        assert_eq!(recall(&[result("a", &[true, true])]).unwrap(), 100.0);
        assert_eq!(recall(&[result("a", &[false, false])]).unwrap(), 0.0);
        assert_eq!(
            recall(&[result("a", &[true, true]), result("b", &[true, false])]).unwrap(),
            75.0
        );
        assert!(recall(&[result("a", &[])]).is_err());
    }

    #[test]
    fn ap_extremes() {
        let anns = [ann(0.0), ann(10.0)];
        let perfect = match_frame("f", &[det(0.0, 0.9), det(10.0, 0.8)], &anns, 0.7);
        assert_eq!(
            average_precision(std::slice::from_ref(&perfect), ApInterpolation::Forty).unwrap(),
            100.0
        );
        assert_eq!(average_precision(&[perfect], ApInterpolation::Eleven).unwrap(), 100.0);
        let empty = match_frame("f", &[], &anns, 0.7);
        assert_eq!(average_precision(&[empty], ApInterpolation::Forty).unwrap(), 0.0);
    }

    #[test]
    fn ap_one_hit_one_false_alarm() {
        // TP at 0.9, FP at 0.8, two annotations: recall reaches 0.5 at
        // precision 1, so 20 of 40 positions score 1
        let anns = [ann(0.0), ann(10.0)];
        let r = match_frame("f", &[det(0.0, 0.9), det(30.0, 0.8)], &anns, 0.7);
        assert_eq!(average_precision(&[r], ApInterpolation::Forty).unwrap(), 50.0);
    }

    #[test]
    fn report_formats() {
        let mut m = MetricsReport::default();
        m.metric("recall", 75.0).param("iou_threshold", 0.7);
        assert_eq!(m.to_kv(), "metric recall 75\nparam iou_threshold 0.7\n");
        assert!(m.to_table().contains("recall"));
    }
}
