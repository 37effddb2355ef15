use std::f64::consts::PI;

use proptest::prelude::*;

use scar::attacks::{solve_mass_deviations, PlanEntry, ScalePlan};
use scar::geometry::{iou_3d, points_in_box, scale_instance, Box3D, Point, PointCloud};
use scar::stats::{build_histogram, js_masses, EmpiricalCdf};

fn arb_box() -> impl Strategy<Value = Box3D> {
    (
        -10.0..10.0f64,
        -10.0..10.0f64,
        -2.0..0.5f64,
        0.5..6.0f64,
        0.5..3.0f64,
        0.5..3.0f64,
        -PI..PI,
    )
        .prop_map(|(cx, cy, cz, l, w, h, yaw)| Box3D::new(cx, cy, cz, l, w, h, yaw).unwrap())
}

/// A box near `a`, so that pairs overlap often.
fn arb_pair() -> impl Strategy<Value = (Box3D, Box3D)> {
    (arb_box(), -1.5..1.5f64, -1.5..1.5f64, -0.5..0.5f64, arb_box()).prop_map(|(a, dx, dy, dz, b)| {
        let b = Box3D::new(a.cx + dx, a.cy + dy, a.cz + dz, b.l, b.w, b.h, b.yaw).unwrap();
        (a, b)
    })
}

fn arb_masses(max_bins: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01..1.0f64, 2..max_bins).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.iter().map(|x| x / s).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn iou_is_symmetric_and_bounded((a, b) in arb_pair()) {
        let ab = iou_3d(&a, &b);
        let ba = iou_3d(&b, &a);
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
        prop_assert!((iou_3d(&a, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn iou_is_invariant_under_joint_rotation((a, b) in arb_pair(), angle in -PI..PI) {
        let before = iou_3d(&a, &b);
        let after = iou_3d(&a.rotated_about_origin(angle), &b.rotated_about_origin(angle));
        prop_assert!((before - after).abs() < 1e-9, "{} vs {}", before, after);
    }

    #[test]
    fn nested_scaling_law(a in arb_box(), s in 0.3..3.0f64) {
        let expected = s.min(1.0 / s).powi(3);
        prop_assert!((iou_3d(&a, &a.scaled(s)) - expected).abs() < 1e-9);
    }

    #[test]
    fn scaling_then_inverse_is_identity(
        b in arb_box(),
        s in 0.5..1.5f64,
        raw in prop::collection::vec((-0.49..0.49f64, -0.49..0.49f64, 0.01..0.99f64), 1..40),
    ) {
        let (sn, cs) = b.yaw.sin_cos();
        let points: Vec<Point> = raw
            .iter()
            .map(|(u, v, t)| {
                let (u, v) = (u * b.l, v * b.w);
                Point::new(b.cx + cs * u - sn * v, b.cy + sn * u + cs * v, b.cz + t * b.h, 0.5)
            })
            .collect();
        let cloud = PointCloud::new(points).unwrap();
        let (scaled_cloud, scaled_box) = scale_instance(&cloud, &b, s).unwrap();
        prop_assert!((scaled_box.volume() - b.volume() * s.powi(3)).abs() < 1e-9 * b.volume().max(1.0));
        let (back, back_box) = scale_instance(&scaled_cloud, &scaled_box, 1.0 / s).unwrap();
        for (p, q) in cloud.points.iter().zip(&back.points) {
            prop_assert!((p.x - q.x).abs() < 1e-9 && (p.y - q.y).abs() < 1e-9 && (p.z - q.z).abs() < 1e-9);
        }
        prop_assert!((back_box.l - b.l).abs() < 1e-9 && (back_box.cz - b.cz).abs() < 1e-12);
    }

    #[test]
    fn js_properties(p in arb_masses(12), q in arb_masses(12)) {
        let n = p.len().min(q.len());
        let renorm = |v: &[f64]| {
            let s: f64 = v[..n].iter().sum();
            v[..n].iter().map(|x| x / s).collect::<Vec<_>>()
        };
        let (p, q) = (renorm(&p), renorm(&q));
        prop_assert_eq!(js_masses(&p, &p), 0.0);
        let (pq, qp) = (js_masses(&p, &q), js_masses(&q, &p));
        prop_assert!((pq - qp).abs() < 1e-15);
        prop_assert!((0.0..=1.0).contains(&pq));
    }

    #[test]
    fn histogram_masses_sum_to_one(values in prop::collection::vec(0.1..100.0f64, 1..200), k in 2usize..60) {
        let h = build_histogram(&values, k, None).unwrap();
        prop_assert_eq!(h.bins(), k);
        prop_assert!((h.masses().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn quantile_inverts_cdf(values in prop::collection::vec(0.1..100.0f64, 2..100)) {
        let cdf = EmpiricalCdf::new(&values).unwrap();
        for v in &values {
            let back = cdf.quantile(cdf.cdf(*v));
            prop_assert!((back - v).abs() < 1e-9 * v.max(1.0), "{} -> {}", v, back);
        }
    }

    #[test]
    fn solver_conserves_mass(b in arb_masses(20), phi in 0.005..0.3f64) {
        let dev = solve_mass_deviations(&b, phi, 1e-3).unwrap();
        prop_assert!(dev.deltas.iter().sum::<f64>().abs() < 1e-9);
        let moved: Vec<f64> = b.iter().zip(&dev.deltas).map(|(x, d)| x + d).collect();
        prop_assert!(moved.iter().all(|m| *m >= 0.0 && *m <= 1.0));
        prop_assert!((js_masses(&b, &moved) - phi).abs() <= 1e-3);
    }

    #[test]
    fn plan_text_round_trips(
        entries in prop::collection::btree_map((0u32..50, 0usize..6), (0.5..1.5f64, any::<bool>()), 0..30),
        seed in any::<u64>(),
    ) {
        let mut plan = ScalePlan::new("model-aware").with_param("sigma_m", 0.2).with_seed(seed);
        for ((f, i), (scale, attacked)) in &entries {
            plan.insert(&format!("{f:06}"), *i, PlanEntry { scale: *scale, attacked: *attacked }).unwrap();
        }
        let parsed = ScalePlan::parse(&plan.to_text(), std::path::Path::new("plan.txt")).unwrap();
        prop_assert_eq!(parsed, plan);
    }

    #[test]
    fn membership_is_yaw_equivariant(
        b in arb_box(),
        angle in -PI..PI,
        raw in prop::collection::vec((-12.0..12.0f64, -12.0..12.0f64, -2.5..3.0f64), 1..60),
    ) {
        let cloud = PointCloud::new(raw.iter().map(|(x, y, z)| Point::new(*x, *y, *z, 0.0)).collect()).unwrap();
        let (s, c) = angle.sin_cos();
        let rotated = PointCloud::new(
            cloud.points.iter().map(|p| Point::new(c * p.x - s * p.y, s * p.x + c * p.y, p.z, 0.0)).collect(),
        )
        .unwrap();
        prop_assert_eq!(points_in_box(&cloud, &b), points_in_box(&rotated, &b.rotated_about_origin(angle)));
    }
}
