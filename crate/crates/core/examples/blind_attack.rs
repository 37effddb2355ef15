//! Blind attack: one constant scale for every car, scored against a
//! size-biased mock.
//!
//! Run with `cargo run --example blind_attack`.

use scar::attacks::{apply_scale_plan, blind_attack};
use scar::dataset::ClassFilter;
use scar::detector::{Detector, SizePriorDetector};
use scar::eval::{asr, evaluate_frames, recall, AsrDenominator};
use scar::synthetic::{generate, SyntheticConfig, CAR_MEAN_DIMS};

pub fn run_example() -> scar::Result<Vec<(f64, f64)>> {
    let frames = generate(&SyntheticConfig {
        frames: 50,
        instances_per_frame: 4,
        ..Default::default()
    })?;
    let classes = ClassFilter::default();
    let detector = SizePriorDetector::new(0.8, CAR_MEAN_DIMS)?;
    let clean = evaluate_frames(&frames, &detector.detect_batch(&frames)?, 0.7, &classes)?;
    println!("clean recall {:.1}", recall(&clean)?);

    let mut rows = Vec::new();
    for sigma_b in [-0.2, -0.1, 0.1, 0.2] {
        let plan = blind_attack(&frames, sigma_b, &classes)?;
        let attacked = apply_scale_plan(&frames, &plan)?;
        let res = evaluate_frames(&attacked, &detector.detect_batch(&attacked)?, 0.7, &classes)?;
        let (r, a) = (recall(&res)?, asr(&clean, &res, AsrDenominator::PreviouslyDetected)?);
        println!("sigma_b {sigma_b:+.1}: recall {r:5.1}  ASR {a:5.1}");
        rows.push((r, a));
    }
    Ok(rows)
}

#[allow(dead_code)]
fn main() -> scar::Result<()> {
    run_example().map(|_| ())
}
