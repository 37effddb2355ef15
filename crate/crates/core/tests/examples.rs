//! Runs every example and checks what it reports.

#[path = "../examples/blind_attack.rs"]
mod blind_attack;
#[path = "../examples/distribution_aware_attack.rs"]
mod distribution_aware_attack;
#[path = "../examples/evaluate_metrics.rs"]
mod evaluate_metrics;
#[path = "../examples/geometry_iou.rs"]
mod geometry_iou;
#[path = "../examples/kitti_roundtrip.rs"]
mod kitti_roundtrip;
#[path = "../examples/model_aware_attack.rs"]
mod model_aware_attack;
#[path = "../examples/scar_defense.rs"]
mod scar_defense;
#[path = "../examples/size_statistics.rs"]
mod size_statistics;

#[test]
fn geometry() {
    let iou = geometry_iou::run_example().unwrap();
    assert!((iou - 0.88f64.powi(3)).abs() < 1e-9);
}

#[test]
fn statistics() {
    let js = size_statistics::run_example().unwrap();
    assert!(js[0] > js[1] && js[3] > js[2]);
}

#[test]
fn model_aware() {
    let sigmas = model_aware_attack::run_example().unwrap();
    assert_eq!(sigmas.len(), 24);
    assert!(sigmas.iter().all(|s| *s == -0.12));
}

#[test]
fn distribution_aware() {
    let rows = distribution_aware_attack::run_example().unwrap();
    for ((js, _), phi) in rows.iter().zip([0.1, 0.3, 0.5]) {
        assert!((js - phi).abs() < 0.05, "{js} vs {phi}");
    }
    assert!(rows[0].1 < rows[1].1 && rows[1].1 < rows[2].1);
}

#[test]
fn blind() {
    let rows = blind_attack::run_example().unwrap();
    // larger perturbations hurt more on both sides
    assert!(rows[0].0 <= rows[1].0 && rows[3].0 <= rows[2].0);
}

#[test]
fn defense() {
    let (frames, vanilla, defended) = scar_defense::run_example().unwrap();
    assert_eq!(frames, 200);
    assert!(defended > vanilla);
}

#[test]
fn metrics() {
    let r = evaluate_metrics::run_example().unwrap();
    assert_eq!(r.get("recall_clean"), Some(100.0));
    assert_eq!(r.get("asr"), Some(50.0));
    assert_eq!(r.get("recall_attacked"), Some(50.0));
}

#[test]
fn kitti() {
    assert!(kitti_roundtrip::run_example().unwrap() < 1e-5);
}

#[test]
fn external() {
    let (ext, oracle) = external_detector::run_example().unwrap();
    assert_eq!(ext, oracle);
}
