use hexapod_core::geometry::{pose_to_transform, Pose6, Transform3D};
use hexapod_core::kinematics::igm;
use hexapod_core::par::Execution;
use hexapod_core::pipeline::{
    conventional_pose, decoupled_pose, decoupled_pose_with, estimate_all, DecoupledOptions, MeasurementSession,
    RecordRole, SessionRecord, SteelLengthBasis,
};
use hexapod_core::simulator::{run_comparison, shifted, simulate_session, HeatingSchedule, ScenarioConfig, TrialPlan, TrialStep};
use hexapod_core::thermal::ALPHA_STEEL;
use nalgebra::Vector3;
use rand::Rng;

fn record(role: RecordRole, origin: &Transform3D, pose: Pose6, t: f64) -> SessionRecord {
    SessionRecord {
        role,
        frame_in_m: origin.compose(&pose_to_transform(&pose)),
        timestamp: t,
        commanded: pose,
        leg_temperatures: None,
    }
}

#[test]
fn identical_references_collapse_to_conventional() {
    let sc = ScenarioConfig::ten_trial(0);
    let mut rng = hexapod_core::rng::stream(1, 1);
    for _ in 0..100 {
        let mut r = || rng.random_range(-1.0..1.0);
        let origin = pose_to_transform(&Pose6::from_mm_deg(300.0 * r(), 300.0 * r(), 300.0 * r(), 10.0 * r(), 10.0 * r(), 180.0 * r()));
        let reference = Pose6::from_mm_deg(5.0 * r(), 5.0 * r(), -40.0 + 5.0 * r(), r(), r(), r());
        let target = Pose6::from_mm_deg(20.0 * r(), 20.0 * r(), 20.0 * r(), 2.0 * r(), 2.0 * r(), 2.0 * r());
        let mut after = record(RecordRole::RefAfter, &origin, target, 20.0);
        after.frame_in_m = origin.compose(&pose_to_transform(&reference));
        let s = MeasurementSession::new(
            origin,
            0.0,
            None,
            vec![
                record(RecordRole::RefBefore, &origin, reference, 1.0),
                record(RecordRole::Target, &origin, target, 10.0),
                after,
            ],
        )
        .unwrap();
        let c = conventional_pose(&s).unwrap().pose;
        let d = decoupled_pose(&sc.geometry, &sc.thermal, &s).unwrap().pose;
        for (a, b) in c.to_array().iter().zip(d.to_array()) {
            assert!((a - b).abs() < 1e-12, "{c:?} vs {d:?}");
        }
    }
}

#[test]
fn lone_reference_pairs_with_itself() {
    let sc = ScenarioConfig::ten_trial(0);
    let origin = sc.cmm_placement;
    let heated = Pose6::new(0.01, -0.02, 0.03, 1e-5, 0.0, 0.0);
    let s = MeasurementSession::new(
        origin,
        0.0,
        None,
        vec![
            record(RecordRole::RefBefore, &origin, Pose6::new(0.0, 0.0, -40.0, 0.0, 0.0, 0.0), 1.0),
            record(RecordRole::Target, &origin, heated, 2.0),
        ],
    )
    .unwrap();
    let d = decoupled_pose(&sc.geometry, &sc.thermal, &s).unwrap();
    assert_eq!(d.pose.delta(&conventional_pose(&s).unwrap().pose).max_abs_translation(), 0.0);
    assert!(d.diagnostics.unwrap().dq_ref.is_zero());
}

#[test]
fn hot_basis_differs_by_steel_growth_of_the_deflection() {
    // oracle: using the hot target length overstates each leg's steel share by
    // alpha_st * dT * growth, with growth the target leg's own deflection
    let mut c = ScenarioConfig::ten_trial(0);
    c.probe_noise_sigma = 0.0;
    c.trial_plan = TrialPlan {
        origin_time: 0.0,
        steps: vec![
            TrialStep { role: RecordRole::RefBefore, pose: Pose6::new(0.0, 0.0, -40.0, 0.0, 0.0, 0.0), time: 1.0 },
            TrialStep { role: RecordRole::Target, pose: Pose6::from_mm_deg(10.0, -5.0, 15.0, 1.0, 0.5, -1.0), time: 100.0 },
            TrialStep { role: RecordRole::RefAfter, pose: Pose6::new(0.0, 0.0, -40.0, 0.0, 0.0, 0.0), time: 101.0 },
        ],
    };
    let dt = [5.0, 4.0, 3.0, 2.0, 1.0, 4.5];
    c.heating_schedule = HeatingSchedule::step(dt, 50.0, 0.0, 101.0);
    let (s, truth) = simulate_session(&c).unwrap();
    let cold = decoupled_pose(&c.geometry, &c.thermal, &s).unwrap();
    let hot_opts = DecoupledOptions { basis: SteelLengthBasis::MeasuredHot, ..Default::default() };
    let hot = decoupled_pose_with(&c.geometry, &c.thermal, &s, &hot_opts).unwrap();
    let (dc, dh) = (cold.diagnostics.unwrap(), hot.diagnostics.unwrap());
    let t = &truth.records[1];
    for i in 0..6 {
        let growth = t.q_actual[i] - t.q_cold[i];
        let expected = ALPHA_STEEL * dt[i] * growth;
        assert!(((dh.dq_target.0[i] - dc.dq_target.0[i]) - expected).abs() < 1e-15, "leg {i}");
        assert!((dc.dq_target.0[i] - growth).abs() < 1e-12);
    }
    let q = igm(&c.geometry, &t.pose_t1).unwrap();
    assert!(igm(&c.geometry, &cold.pose).unwrap().max_abs_diff(&q) < 1e-11);
    assert!(igm(&c.geometry, &hot.pose).unwrap().max_abs_diff(&q) > 1e-7);
}

#[test]
fn estimates_do_not_depend_on_cmm_placement() {
    let c = ScenarioConfig::ten_trial(3);
    let moved = shifted(&c, Vector3::new(-250.0, 120.0, 75.0));
    let a = run_comparison(&c).unwrap();
    let b = run_comparison(&moved).unwrap();
    for (x, y) in a.rows.iter().zip(&b.rows) {
        // same noise draws, so only round-off differs
        assert!(x.decoupled.delta(&y.decoupled).max_abs_translation() < 1e-9);
        assert!(x.conventional.delta(&y.conventional).max_abs_rotation() < 1e-11);
    }
}

#[test]
fn temperatures_are_optional() {
    let c = ScenarioConfig::ten_trial(4);
    let (s, _) = simulate_session(&c).unwrap();
    let stripped: Vec<SessionRecord> = s
        .records()
        .iter()
        .cloned()
        .map(|mut r| {
            r.leg_temperatures = None;
            r
        })
        .collect();
    let s2 = MeasurementSession::new(*s.origin_frame(), s.origin_timestamp(), None, stripped).unwrap();
    let opts = DecoupledOptions::default();
    let a = estimate_all(&c.geometry, &c.thermal, &s, &opts, Execution::Sequential).unwrap();
    let b = estimate_all(&c.geometry, &c.thermal, &s2, &opts, Execution::Sequential).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.decoupled, y.decoupled);
        assert!(y.mean_leg_dt.is_none() && x.mean_leg_dt.is_some());
    }
}
