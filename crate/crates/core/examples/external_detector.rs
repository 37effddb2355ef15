//! Driving an out-of-process detector through the file protocol.
//!
//! The bundled `scripts/oracle_adapter.sh` answers each request with the
//! ground truth the adapter exposes, so its metrics match the in-process
//! oracle. A real integration replaces it with a wrapper around a trained
//! model that reads `$SCAR_REQUEST` and writes `$SCAR_WORKDIR/pred/<id>.txt`.
//!
//! Run with `cargo run --example external_detector`.

use std::path::PathBuf;
use std::time::Duration;

use scar::dataset::ClassFilter;
use scar::detector::{spawn_external_detector, Detector, OracleDetector};
use scar::eval::{ap_40, evaluate_frames, recall};
use scar::synthetic::{generate, SyntheticConfig};

pub fn run_example() -> scar::Result<(f64, f64)> {
    let frames = generate(&SyntheticConfig {
        frames: 10,
        instances_per_frame: 3,
        ..Default::default()
    })?;
    let script = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scripts/oracle_adapter.sh");
    let workdir = std::env::temp_dir().join("scar_external_example");
    let external = spawn_external_detector(vec![script.to_string_lossy().into_owned()], &workdir)?
        .with_ground_truth(true)
        .with_timeout(Duration::from_secs(60));

    let classes = ClassFilter::default();
    let preds = external.detect_batch(&frames)?;
    let ap_external = ap_40(&frames, &preds, 0.7, &classes)?;
    let ap_oracle = ap_40(&frames, &OracleDetector.detect_batch(&frames)?, 0.7, &classes)?;
    let r = recall(&evaluate_frames(&frames, &preds, 0.7, &classes)?)?;
    println!(
        "{}: recall {r:.1}, AP40 {ap_external:.2} (in-process oracle {ap_oracle:.2})",
        external.name()
    );
    println!("exchange files under {}", external.workdir().display());
    Ok((ap_external, ap_oracle))
}

#[allow(dead_code)]
fn main() -> scar::Result<()> {
    run_example().map(|_| ())
}
