//! Size histogram of a dataset, JS divergence under uniform rescaling and
//! quantile mapping onto a uniform target.
//!
//! Run with `cargo run --example size_statistics`.

use scar::dataset::{collect_instances, ClassFilter};
use scar::plot::histogram_svg;
use scar::stats::{build_histogram, icdf_map_all, js_divergence, mean_std, EmpiricalCdf, QuantileTarget};
use scar::synthetic::{generate, SyntheticConfig};

pub fn run_example() -> scar::Result<Vec<f64>> {
    let frames = generate(&SyntheticConfig {
        frames: 200,
        instances_per_frame: 5,
        rel_std: 0.08,
        ..Default::default()
    })?;
    let volumes: Vec<f64> = collect_instances(&frames, &ClassFilter::default())
        .iter()
        .map(|i| i.volume)
        .collect();
    let (mean, std) = mean_std(&volumes);
    println!("{} cars, volume {mean:.2} +- {std:.2} m3", volumes.len());

    let scales = [0.8, 0.9, 1.1, 1.2];
    let lo = volumes.iter().cloned().fold(f64::INFINITY, f64::min) * 0.8f64.powi(3);
    let hi = volumes.iter().cloned().fold(0.0, f64::max) * 1.2f64.powi(3);
    let original = build_histogram(&volumes, 50, Some((lo, hi)))?;
    let mut js = Vec::new();
    for s in scales {
        let scaled: Vec<f64> = volumes.iter().map(|v| v * s * s * s).collect();
        let d = js_divergence(&original, &build_histogram(&scaled, 50, Some((lo, hi)))?)?;
        println!("JS(original, x{s}) = {d:.3}");
        js.push(d);
    }

    let cdf = EmpiricalCdf::new(&volumes)?;
    let flat = icdf_map_all(
        &volumes,
        &cdf,
        QuantileTarget::Uniform {
            lo: 0.8 * mean,
            hi: 1.2 * mean,
        },
    );
    let flat_hist = build_histogram(&flat, 50, Some((lo, hi)))?;
    let svg = histogram_svg(
        "car volume",
        "volume (m3)",
        original.edges(),
        &[("original", original.masses()), ("uniformized", flat_hist.masses())],
    );
    let path = std::env::temp_dir().join("scar_size_statistics.svg");
    std::fs::write(&path, svg).map_err(|e| scar::Error::Io {
        path: path.clone(),
        source: e,
    })?;
    println!("histogram written to {}", path.display());
    Ok(js)
}

#[allow(dead_code)]
fn main() -> scar::Result<()> {
    run_example().map(|_| ())
}
