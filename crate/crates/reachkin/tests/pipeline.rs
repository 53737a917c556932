//! Cross-module integration: generator fixtures driven through alignment,
//! energetics, contact detection, and the task-confusion analysis.

mod common;

use reachkin::alignment::{
    joint_quaternion_series, series_similarity, similarity_cost, task_confusion, AlignOptions,
    QuaternionSeries, TaskTrialSet,
};
use reachkin::contact::{detect_contacts, force_from_impulse, ImpulseMode, ImpulseSeries};
use reachkin::energetics::{task_energy, EnergyParams};
use reachkin::ingest::synth::{synth_session, NoiseConfig, SynthConfig, TRIAL_CYCLE_S};
use reachkin::ingest::{Payload, RecordKind};
use reachkin::kinematics::{segment_reaches, JointSeries, SegmentOptions};
use reachkin::quat::Quaternion;
use reachkin::sessions::{Phase, System, TaskSpec, TrialRecord};

fn truth_joints(task: u8, seed: u64) -> JointSeries {
    let cfg = SynthConfig {
        seed,
        emit_raw_imu: false,
        ..SynthConfig::new(TaskSpec::by_id(task).unwrap())
    };
    synth_session(&cfg).unwrap().1.joints
}

#[test]
fn generator_trial_produces_three_reaches() {
    let cfg = SynthConfig {
        emit_raw_imu: false,
        ..SynthConfig::new(TaskSpec::by_id(1).unwrap())
    };
    let (_, truth) = synth_session(&cfg).unwrap();
    let endpoints = truth.joints.endpoints(&cfg.arm);
    let segs = segment_reaches(
        &truth.joints.timestamps,
        &endpoints,
        &SegmentOptions::default(),
    )
    .unwrap();
    // Reach, relocate, return.
    assert_eq!(segs.len(), 3, "segments: {segs:?}");
    for seg in &segs {
        assert!(seg.duration > 0.5 && seg.duration < 2.0);
        assert!(seg.path_length >= seg.net_displacement);
    }
}

#[test]
fn reach_and_return_energy_matches_hand_arithmetic() {
    let cfg = SynthConfig {
        emit_raw_imu: false,
        ..SynthConfig::new(TaskSpec::by_id(4).unwrap())
    };
    let (_, truth) = synth_session(&cfg).unwrap();
    let endpoints = truth.joints.endpoints(&cfg.arm);
    let segs = segment_reaches(
        &truth.joints.timestamps,
        &endpoints,
        &SegmentOptions::default(),
    )
    .unwrap();
    let mut trial = TrialRecord::new(
        "s1",
        TaskSpec::by_id(4).unwrap(),
        Phase::Training,
        1,
        System::HoloPham,
        TRIAL_CYCLE_S,
    )
    .unwrap();
    trial.reaches = segs.clone();

    let params = EnergyParams::default();
    let energy = task_energy(&trial, &params).unwrap();
    // Hand arithmetic straight from the model definition.
    let mut expect = 0.0;
    for seg in &segs {
        expect += params.a * params.mass * seg.duration
            + params.b * params.mass * seg.path_length.powf(1.1) / seg.duration.powi(2);
    }
    assert!((energy.total - expect).abs() < 1e-9);
    assert_eq!(energy.per_reach.len(), segs.len());
    // Additivity: duplicating the segments doubles the total.
    let mut doubled = trial.clone();
    doubled.reaches.extend(segs);
    let e2 = task_energy(&doubled, &params).unwrap();
    assert!((e2.total - 2.0 * energy.total).abs() < 1e-9);
}

#[test]
fn similarity_absorbs_sample_hold_time_dilation() {
    let joints = truth_joints(1, 3);
    let baseline = joint_quaternion_series(&joints);
    // Same rotation samples held twice as long.
    let dilated: Vec<QuaternionSeries> = baseline
        .iter()
        .map(|series| {
            let quats: Vec<Quaternion> = series
                .samples()
                .iter()
                .flat_map(|&(_, q)| [q, q])
                .collect();
            QuaternionSeries::from_quats(series.label(), 0.0, 0.05, quats)
        })
        .collect();
    let cost = series_similarity(&dilated, &baseline, &AlignOptions::default()).unwrap();
    assert!(cost.total < 0.05, "dilated cost {}", cost.total);

    // Identical series cost exactly zero.
    let same = similarity_cost(&joints, &joints, &AlignOptions::default()).unwrap();
    assert_eq!(same.total, 0.0);
    assert!(same.per_joint.iter().all(|(_, c)| *c == 0.0));
}

#[test]
fn similarity_grows_with_shoulder_offset() {
    let joints = truth_joints(1, 5);
    let baseline = &joints;
    let mut last = 0.0;
    for offset_deg in [10.0, 20.0, 30.0] {
        let offset = Quaternion::from_axis_angle([0.0, 0.0, 1.0], f64::to_radians(offset_deg));
        let mut shifted = joints.clone();
        for q in shifted.shoulder.iter_mut() {
            *q = offset.multiply(q);
        }
        let cost = similarity_cost(&shifted, baseline, &AlignOptions::default()).unwrap();
        assert!(
            cost.total > last,
            "offset {offset_deg} deg: cost {} not above {last}",
            cost.total
        );
        last = cost.total;
    }
}

fn trial_set(seeds: &[u64], noise: f64) -> TaskTrialSet {
    let mut set = TaskTrialSet::default();
    for task in [1u8, 2, 3, 4] {
        for (k, seed) in seeds.iter().enumerate() {
            let cfg = SynthConfig {
                seed: seed + 17 * task as u64 + k as u64,
                emit_raw_imu: false,
                noise: NoiseConfig {
                    orientation_std: noise,
                    ..NoiseConfig::default()
                },
                ..SynthConfig::new(TaskSpec::by_id(task).unwrap())
            };
            let (session, _) = synth_session(&cfg).unwrap();
            let joints = session.joint_series("chest", "upper", "forearm").unwrap();
            set.push_trial(task, joint_quaternion_series(&joints));
        }
    }
    set
}

#[test]
fn confusion_zero_diagonal_for_identical_sets() {
    let set = trial_set(&[11], 0.0);
    let matrix = task_confusion(&set, &set, &AlignOptions::default()).unwrap();
    for (i, row) in matrix.values.iter().enumerate() {
        assert_eq!(row[i], 0.0, "diagonal {i}");
    }
}

#[test]
fn confusion_diagonal_dominates_matched_dynamics() {
    let a = trial_set(&[21, 22], 0.005);
    let b = trial_set(&[31, 32], 0.005);
    let matrix = task_confusion(&a, &b, &AlignOptions::default()).unwrap();
    assert!(matrix.diagonal_dominant(), "matrix {:?}", matrix.values);
}

#[test]
fn confusion_permuted_labels_move_the_minimum() {
    let a = trial_set(&[41], 0.0);
    let mut b = trial_set(&[51], 0.0);
    // Swap tasks 1 and 3 in system B.
    let t1 = b.tasks.remove(&1).unwrap();
    let t3 = b.tasks.remove(&3).unwrap();
    b.tasks.insert(1, t3);
    b.tasks.insert(3, t1);
    let matrix = task_confusion(&a, &b, &AlignOptions::default()).unwrap();
    let row1 = &matrix.values[0];
    let min1 = row1
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.partial_cmp(y.1).unwrap())
        .unwrap()
        .0;
    assert_eq!(matrix.task_ids[min1], 3, "row 1 minimum at {row1:?}");
    let row3 = &matrix.values[2];
    let min3 = row3
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.partial_cmp(y.1).unwrap())
        .unwrap()
        .0;
    assert_eq!(matrix.task_ids[min3], 1, "row 3 minimum at {row3:?}");
}

#[test]
fn impulse_records_yield_grasp_contacts() {
    let cfg = SynthConfig {
        trials: 2,
        emit_raw_imu: false,
        ..SynthConfig::new(TaskSpec::by_id(2).unwrap())
    };
    let (session, truth) = synth_session(&cfg).unwrap();
    let recs = session.device_records(RecordKind::Impulse, "tips");
    assert!(!recs.is_empty());
    let dt = 1.0 / cfg.impulse_rate_hz;

    // One contact per trial per fingertip, spanning the hold.
    let tips = match &recs[0].payload {
        Payload::Impulse(v) => v.len(),
        _ => unreachable!(),
    };
    for tip in 0..tips {
        let mut timestamps = Vec::new();
        let mut values = Vec::new();
        for rec in &recs {
            if let Payload::Impulse(v) = &rec.payload {
                timestamps.push(rec.t_ms as f64 / 1000.0);
                values.push(v[tip]);
            }
        }
        let series = ImpulseSeries::new(
            format!("tip{tip}"),
            timestamps.clone(),
            values,
            ImpulseMode::Cumulative,
        )
        .unwrap();
        let forces = force_from_impulse(&series, dt).unwrap();
        let events = detect_contacts(&forces, 0.1, 2, dt, timestamps[0], &series.fingertip).unwrap();
        assert_eq!(events.len(), cfg.trials, "tip {tip}: {events:?}");
        for (trial, ev) in events.iter().enumerate() {
            let grasp = truth
                .phases
                .iter()
                .find(|p| p.trial == trial && p.label == "grasp")
                .unwrap();
            let release = truth
                .phases
                .iter()
                .find(|p| p.trial == trial && p.label == "release")
                .unwrap();
            assert!(
                (ev.onset - grasp.t0).abs() < 0.2,
                "tip {tip} trial {trial}: onset {} vs grasp {}",
                ev.onset,
                grasp.t0
            );
            assert!(ev.release > release.t0 - 0.2 && ev.release < release.t1 + 0.2);
        }
    }
}

#[test]
fn segmented_depth_statistics_track_target_distance() {
    // Reaches of known net displacement through the real segmentation path.
    let mut displacements = Vec::new();
    for seed in 0..5u64 {
        let cfg = SynthConfig {
            seed,
            emit_raw_imu: false,
            noise: NoiseConfig {
                orientation_std: 0.004,
                ..NoiseConfig::default()
            },
            ..SynthConfig::new(TaskSpec::by_id(4).unwrap())
        };
        let (session, _) = synth_session(&cfg).unwrap();
        let joints = session.joint_series("chest", "upper", "forearm").unwrap();
        let endpoints = joints.endpoints(&cfg.arm);
        let segs =
            segment_reaches(&joints.timestamps, &endpoints, &SegmentOptions::default()).unwrap();
        // First segment is the initial reach from rest to the target.
        displacements.push(segs[0].clone());
    }
    let expected = {
        let cfg = SynthConfig::new(TaskSpec::by_id(4).unwrap());
        let (target, _) = reachkin::ingest::synth::stations(
            &cfg.task,
            cfg.frame_distance,
            cfg.station_half_span,
        );
        let rest = [0.0, 0.0, -0.55];
        ((target[0] - rest[0]).powi(2)
            + (target[1] - rest[1]).powi(2)
            + (target[2] - rest[2]).powi(2))
        .sqrt()
    };
    let stats = reachkin::kinematics::depth_stats(&displacements, expected).unwrap();
    assert!(
        stats.error < 0.03,
        "mean {} vs target {expected}: error {}",
        stats.mu_phy,
        stats.error
    );
    assert!(stats.sigma_phy < 0.03);
}
