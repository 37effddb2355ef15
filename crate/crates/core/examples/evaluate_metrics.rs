//! Matching, recall, interpolated AP and attack success rate on a small
//! hand-built scene.
//!
//! Run with `cargo run --example evaluate_metrics`.

use scar::dataset::Annotation;
use scar::detector::Detection;
use scar::eval::{asr, average_precision, match_frame, recall, ApInterpolation, AsrDenominator, MetricsReport};
use scar::geometry::Box3D;

pub fn run_example() -> scar::Result<MetricsReport> {
    let gt: Vec<Box3D> = (0..4)
        .map(|i| Box3D::new(8.0 + 9.0 * i as f64, 0.0, -1.7, 3.9, 1.6, 1.5, 0.1 * i as f64))
        .collect::<scar::Result<_>>()?;
    let anns: Vec<Annotation> = gt.iter().map(|b| Annotation::new(*b, "Car")).collect();
    let car = |b: Box3D, score: f64| Detection::new(b, score, "Car");

    let clean = vec![
        car(gt[0], 0.95)?,
        car(gt[1], 0.9)?,
        car(gt[2], 0.85)?,
        car(gt[3], 0.8)?,
        car(Box3D { cx: 60.0, ..gt[0] }, 0.7)?,
    ];
    // after the attack two cars are predicted at the wrong size
    let attacked = vec![
        car(gt[0], 0.95)?,
        car(gt[1].scaled(0.85), 0.9)?,
        car(gt[2], 0.85)?,
        car(gt[3].scaled(1.2), 0.8)?,
    ];
    let before = vec![match_frame("000000", &clean, &anns, 0.7)];
    let after = vec![match_frame("000000", &attacked, &anns, 0.7)];

    let mut report = MetricsReport::default();
    report
        .metric("recall_clean", recall(&before)?)
        .metric("ap40_clean", average_precision(&before, ApInterpolation::Forty)?)
        .metric("ap11_clean", average_precision(&before, ApInterpolation::Eleven)?)
        .metric("recall_attacked", recall(&after)?)
        .metric("ap40_attacked", average_precision(&after, ApInterpolation::Forty)?)
        .metric("asr", asr(&before, &after, AsrDenominator::PreviouslyDetected)?)
        .param("iou_threshold", 0.7);
    print!("{}", report.to_table());
    Ok(report)
}

#[allow(dead_code)]
fn main() -> scar::Result<()> {
    run_example().map(|_| ())
}
