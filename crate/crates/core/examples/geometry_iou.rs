//! Oriented box IoU and instance scaling about the bottom-center anchor.
//!
//! Run with `cargo run --example geometry_iou`.

use scar::geometry::{iou_3d, points_in_box, scale_instance, Box3D, Point, PointCloud};

pub fn run_example() -> scar::Result<f64> {
    let car = Box3D::new(12.0, -2.0, -1.73, 3.9, 1.6, 1.5, 0.4)?;
    let shifted = Box3D {
        cx: car.cx + 0.5,
        ..car
    };
    let turned = Box3D::new(car.cx, car.cy, car.cz, car.l, car.w, car.h, car.yaw + 0.3)?;
    println!("iou(car, shifted 0.5 m) = {:.4}", iou_3d(&car, &shifted));
    println!("iou(car, turned 0.3 rad) = {:.4}", iou_3d(&car, &turned));

    // scaling about the anchor nests the boxes, so iou = min(s, 1/s)^3
    for s in [0.88, 0.89, 1.12] {
        println!("s = {s}: iou = {:.4}", iou_3d(&car, &car.scaled(s)));
    }

    let cloud = PointCloud::new(vec![
        Point::new(12.0, -2.0, -1.0, 0.5),
        Point::new(13.0, -1.5, -0.5, 0.4),
        Point::new(30.0, 5.0, -1.7, 0.1),
    ])?;
    let (scaled, bigger) = scale_instance(&cloud, &car, 1.2)?;
    println!(
        "{} of {} points belong to the car; scaled volume {:.3} -> {:.3} m3",
        points_in_box(&cloud, &car).len(),
        cloud.len(),
        car.volume(),
        bigger.volume()
    );
    println!(
        "first point moved to ({:.3}, {:.3}, {:.3})",
        scaled.points[0].x, scaled.points[0].y, scaled.points[0].z
    );
    Ok(iou_3d(&car, &car.scaled(0.88)))
}

#[allow(dead_code)]
fn main() -> scar::Result<()> {
    run_example().map(|_| ())
}
