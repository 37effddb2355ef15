//! Writing a dataset in the KITTI layout with a real calibration, reading it
//! back through its manifest and measuring coordinate drift.
//!
//! Run with `cargo run --example kitti_roundtrip`.

use std::path::Path;

use scar::dataset::{load_dataset, write_dataset, Calibration};
use scar::synthetic::{generate, SyntheticConfig};

const CALIB: &str = "R0_rect: 9.999239e-01 9.837760e-03 -7.445048e-03 -9.869795e-03 9.999421e-01 -4.278459e-03 7.402527e-03 4.351614e-03 9.999631e-01
Tr_velo_to_cam: 7.533745e-03 -9.999714e-01 -6.166020e-04 -4.069766e-03 1.480249e-02 7.280733e-04 -9.998902e-01 -7.631618e-02 9.998621e-01 7.523790e-03 1.480755e-02 -2.717806e-01
";

pub fn run_example() -> scar::Result<f64> {
    let calib = Calibration::parse(CALIB, Path::new("calib.txt"))?;
    let mut frames = generate(&SyntheticConfig {
        frames: 5,
        ..Default::default()
    })?;
    for f in &mut frames {
        f.calib = calib;
    }
    let dir = std::env::temp_dir().join("scar_kitti_roundtrip");
    let manifest = write_dataset(&frames, &dir)?;
    println!("wrote {}", manifest.display());
    let label = std::fs::read_to_string(dir.join("label_2/000000.txt")).unwrap_or_default();
    println!("label line: {}", label.lines().next().unwrap_or(""));

    let loaded = load_dataset(&manifest)?;
    let mut drift = 0.0f64;
    for (a, b) in frames.iter().zip(&loaded) {
        for (x, y) in a.annotations.iter().zip(&b.annotations) {
            drift = drift
                .max((x.bbox.cx - y.bbox.cx).abs())
                .max((x.bbox.cy - y.bbox.cy).abs())
                .max((x.bbox.cz - y.bbox.cz).abs());
        }
    }
    println!("{} frames reloaded, max box drift {drift:.2e} m", loaded.len());
    Ok(drift)
}

#[allow(dead_code)]
fn main() -> scar::Result<()> {
    run_example().map(|_| ())
}
