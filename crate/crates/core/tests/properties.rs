use std::f64::consts::PI;

use hexapod_core::geometry::{compose, inverse, pose_to_transform, transform_to_pose, Point3, Pose6, Transform3D};
use hexapod_core::kinematics::{fgm, igm, leg_jacobian, HexapodGeometry, LegLengths};
use hexapod_core::metrology::{
    establish_relation, fit_sphere, frame_from_balls, rigid_fit, sphere_probe_pattern, BallPlateRelation, ProbePointSet,
};
use hexapod_core::thermal::{
    scale_deflection, scale_deflection_by_growth_ratio, scale_deflection_to_hot_lengths, thermal_expansion,
    LegDeflections, LegThermalModel,
};
use nalgebra::{Matrix3, Rotation3, Vector3};
use proptest::prelude::*;

fn any_pose(t: f64, r: f64) -> impl Strategy<Value = Pose6> {
    ([-t..t, -t..t, -t..t], [-r..r, -r..r, -r..r]).prop_map(|(a, b)| Pose6::new(a[0], a[1], a[2], b[0], b[1], b[2]))
}

fn workspace_pose() -> impl Strategy<Value = Pose6> {
    any_pose(20.0, 2f64.to_radians())
}

fn any_transform() -> impl Strategy<Value = Transform3D> {
    (any_pose(500.0, PI), -1.4..1.4f64).prop_map(|(mut p, ry)| {
        p.ry = ry;
        pose_to_transform(&p)
    })
}

proptest! {
    #![proptest_config(ProptestConfig {
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn pose_transform_roundtrip(p in any_pose(1000.0, PI), ry in -1.4..1.4f64) {
        let p = Pose6 { ry, ..p };
        let back = transform_to_pose(&pose_to_transform(&p)).unwrap();
        let d = back.delta(&p);
        prop_assert!(d.max_abs_translation() < 1e-10);
        prop_assert!(d.max_abs_rotation() < 1e-10);
    }

    #[test]
    fn compose_is_associative(a in any_transform(), b in any_transform(), c in any_transform()) {
        let l = compose(&compose(&a, &b), &c);
        let r = compose(&a, &compose(&b, &c));
        prop_assert!((l.rotation() - r.rotation()).amax() < 1e-12);
        prop_assert!((l.translation() - r.translation()).amax() < 1e-12 * 2000.0);
        prop_assert!(l.orthonormality_error() < 1e-12);
        prop_assert!(inverse(&a).compose(&a).orthonormality_error() < 1e-12);
    }

    #[test]
    fn jacobian_matches_central_differences(p in workspace_pose()) {
        let g = HexapodGeometry::default_synthetic();
        let j = leg_jacobian(&g, &p).unwrap();
        let h = 1e-6;
        for c in 0..6 {
            let mut a = p.to_array();
            let mut b = p.to_array();
            a[c] += h;
            b[c] -= h;
            let qa = igm(&g, &Pose6::from_array(a)).unwrap();
            let qb = igm(&g, &Pose6::from_array(b)).unwrap();
            for i in 0..6 {
                let fd = (qa[i] - qb[i]) / (2.0 * h);
                prop_assert!((fd - j[(i, c)]).abs() < 1e-6, "leg {} comp {}: {} vs {}", i, c, fd, j[(i, c)]);
            }
        }
    }

    #[test]
    fn fgm_inverts_igm(p in workspace_pose()) {
        let g = HexapodGeometry::default_synthetic();
        let back = fgm(&g, &igm(&g, &p).unwrap(), &Pose6::zero()).unwrap();
        let d = back.delta(&p);
        prop_assert!(d.max_abs_translation() < 1e-9 && d.max_abs_rotation() < 1e-11);
    }

    #[test]
    fn igm_translation_invariance(p in workspace_pose(), v in [-100.0..100.0f64, -100.0..100.0, -100.0..100.0]) {
        let g = HexapodGeometry::default_synthetic();
        let v = Vector3::from(v);
        let shifted = HexapodGeometry::with_base_offset(&g, v);
        let p2 = Pose6 { tx: p.tx + v.x, ty: p.ty + v.y, tz: p.tz + v.z, ..p };
        let q1 = igm(&g, &p).unwrap();
        let q2 = igm(&shifted, &p2).unwrap();
        prop_assert!(q1.max_abs_diff(&q2) < 1e-12);
    }

    #[test]
    fn threefold_symmetry_permutes_legs(p in workspace_pose(), k in 1..3usize) {
        let g = HexapodGeometry::default_synthetic();
        let s = pose_to_transform(&Pose6::new(0.0, 0.0, 0.0, 0.0, 0.0, k as f64 * 2.0 * PI / 3.0));
        let t = s.compose(&pose_to_transform(&p)).compose(&s.inverse());
        let p2 = transform_to_pose(&t).unwrap();
        let mut q1 = igm(&g, &p).unwrap().0;
        let mut q2 = igm(&g, &p2).unwrap().0;
        q1.sort_by(f64::total_cmp);
        q2.sort_by(f64::total_cmp);
        for i in 0..6 {
            prop_assert!((q1[i] - q2[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn scale_deflection_is_linear(dq in prop::array::uniform6(-0.05..0.05f64), c in -3.0..3.0f64,
                                  q in prop::array::uniform6(420.0..580.0f64), qm in prop::array::uniform6(420.0..580.0f64)) {
        let m = LegThermalModel::default_synthetic();
        let base = scale_deflection(&m, &LegDeflections(dq), &LegLengths(q), &LegLengths(qm)).unwrap();
        let scaled = scale_deflection(&m, &LegDeflections(dq.map(|v| v * c)), &LegLengths(q), &LegLengths(qm)).unwrap();
        let ratio = scale_deflection_by_growth_ratio(&m, &LegDeflections(dq), &LegLengths(q), &LegLengths(qm)).unwrap();
        for i in 0..6 {
            prop_assert!((scaled.0[i] - c * base.0[i]).abs() <= 1e-15 * base.0[i].abs().max(1e-300) * 4.0 + 1e-300);
            prop_assert!((ratio.0[i] - base.0[i]).abs() <= 1e-14 * base.0[i].abs());
        }
        let same = scale_deflection(&m, &LegDeflections(dq), &LegLengths(q), &LegLengths(q)).unwrap();
        prop_assert_eq!(same.0, dq);
    }

    #[test]
    fn scale_deflection_grows_with_steel_length(dq in 1e-4..0.05f64, q in 420.0..580.0f64, a in 420.0..580.0f64, gap in 1e-3..100.0f64) {
        let b = a + gap;
        let m = LegThermalModel::default_synthetic();
        let d = LegDeflections([dq; 6]);
        let sa = scale_deflection(&m, &d, &LegLengths([q; 6]), &LegLengths([a; 6])).unwrap();
        let sb = scale_deflection(&m, &d, &LegLengths([q; 6]), &LegLengths([b; 6])).unwrap();
        prop_assert!(sb.0[0] > sa.0[0]);
    }

    #[test]
    fn scaling_recovers_injected_expansion(dt in prop::array::uniform6(0.0..5.0f64), pr in workspace_pose(), ps in workspace_pose()) {
        // model-matched physics: cold lengths known, or recovered from hot ones
        let g = HexapodGeometry::default_synthetic();
        let m = LegThermalModel::default_synthetic();
        let qr = igm(&g, &pr).unwrap();
        let qs = igm(&g, &ps).unwrap();
        let dq_ref = LegDeflections(thermal_expansion(&m, &qr, &dt).unwrap());
        let truth = thermal_expansion(&m, &qs, &dt).unwrap();
        let from_cold = scale_deflection(&m, &dq_ref, &qr, &qs).unwrap();
        let hot = LegLengths(std::array::from_fn(|i| qs[i] + truth[i]));
        let from_hot = scale_deflection_to_hot_lengths(&m, &dq_ref, &qr, &hot).unwrap();
        for i in 0..6 {
            prop_assert!((from_cold.0[i] - truth[i]).abs() < 1e-12);
            prop_assert!((from_hot.0[i] - truth[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_fit_moves_with_rigid_motion(c in [-50.0..50.0f64, -50.0..50.0, -50.0..50.0], motion in any_transform(),
                                          noise in prop::collection::vec([-0.01..0.01f64, -0.01..0.01, -0.01..0.01], 12)) {
        let c = Point3::from(Vector3::from(c));
        let pts: Vec<Point3> = sphere_probe_pattern(&c, 12.7, 12, 2.0)
            .into_iter()
            .zip(&noise)
            .map(|(p, n)| p + Vector3::from(*n))
            .collect();
        let moved: Vec<Point3> = pts.iter().map(|p| motion.apply(p)).collect();
        let a = fit_sphere(&ProbePointSet::new(pts, None).unwrap()).unwrap();
        let b = fit_sphere(&ProbePointSet::new(moved, None).unwrap()).unwrap();
        prop_assert!((motion.apply(&a.center) - b.center).norm() < 1e-10, "{:e} r {}", (motion.apply(&a.center) - b.center).norm(), a.radius);
        prop_assert!((a.radius - b.radius).abs() < 1e-10);
    }

    #[test]
    fn frame_from_own_relation_is_exact(f in any_transform(), centres in prop::array::uniform3([-200.0..200.0f64, -200.0..200.0, -50.0..50.0])) {
        let c = centres.map(|v| Point3::from(Vector3::from(v)));
        let area = (c[1] - c[0]).cross(&(c[2] - c[0])).norm() / 2.0;
        prop_assume!(area > 100.0);
        let rel = establish_relation(&c, &f).unwrap();
        let back = frame_from_balls(&rel, &c).unwrap();
        prop_assert!(back.rotation_angle_to(&f) < 1e-12, "angle {:e} area {}", back.rotation_angle_to(&f), area);
        prop_assert!((back.translation() - f.translation()).amax() < 1e-12 * 1000.0);
    }

    #[test]
    fn procrustes_beats_rotation_grid(f in any_transform(), noise in prop::array::uniform3([-0.01..0.01f64, -0.01..0.01, -0.01..0.01])) {
        let rel = BallPlateRelation::equilateral(150.0, 25.0).unwrap();
        let from = *rel.balls();
        let to: Vec<Point3> = from.iter().zip(noise).map(|(b, n)| f.apply(b) + Vector3::from(n)).collect();
        let fit = rigid_fit(&from, &to);
        let centroid = |p: &[Point3]| p.iter().map(|v| v.coords).sum::<Vector3<f64>>() / p.len() as f64;
        let (ca, cb) = (centroid(&from), centroid(&to));
        let sse = |r: &Matrix3<f64>| -> f64 {
            from.iter().zip(&to).map(|(a, b)| (r * (a.coords - ca) - (b.coords - cb)).norm_squared()).sum()
        };
        let best = sse(fit.rotation());
        for step in [1e-6, 1e-4] {
            for i in -2..=2 {
                for j in -2..=2 {
                    for k in -2..=2 {
                        let d = Rotation3::new(Vector3::new(i as f64, j as f64, k as f64) * step);
                        prop_assert!(best <= sse(&(fit.rotation() * d.matrix())) + 1e-12);
                    }
                }
            }
        }
    }
}
