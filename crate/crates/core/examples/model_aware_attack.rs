//! Model-aware attack against a size-biased mock detector, then an
//! independent re-check of the plan.
//!
//! Run with `cargo run --example model_aware_attack`.

use scar::attacks::{model_aware_attack, verify_model_aware_plan, ModelAwareConfig};
use scar::detector::SizePriorDetector;
use scar::synthetic::{generate, SyntheticConfig, CAR_MEAN_DIMS};

pub fn run_example() -> scar::Result<Vec<f64>> {
    let frames = generate(&SyntheticConfig {
        frames: 8,
        instances_per_frame: 3,
        rel_std: 0.0,
        ..Default::default()
    })?;
    // a detector that always predicts the training-mean size
    let detector = SizePriorDetector::new(1.0, CAR_MEAN_DIMS)?;
    let cfg = ModelAwareConfig {
        sigma_m: 0.4,
        step: 0.01,
        ..Default::default()
    };
    let plan = model_aware_attack(&frames, &detector, &cfg)?;
    println!("{} instances broken out of {}", plan.attacked_count(), plan.len());
    let sigmas: Vec<f64> = plan.entries().map(|(_, _, e)| e.sigma()).collect();
    println!("first entries:");
    for (fid, idx, e) in plan.entries().take(3) {
        println!("  {fid} #{idx}: scale {} (sigma {:+.2})", e.scale, e.sigma());
    }

    let check = verify_model_aware_plan(&frames, &detector, &plan, &cfg, None)?;
    println!(
        "re-verified {} entries, {} violations",
        check.checked,
        check.violations.len()
    );

    let narrow = model_aware_attack(&frames, &detector, &ModelAwareConfig { sigma_m: 0.05, ..cfg })?;
    println!("with sigma_m = 0.05: {} instances broken", narrow.attacked_count());
    Ok(sigmas)
}

#[allow(dead_code)]
fn main() -> scar::Result<()> {
    run_example().map(|_| ())
}
