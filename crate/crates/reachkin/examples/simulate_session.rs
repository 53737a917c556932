//! Generate a synthetic task session, run the analysis pipeline on it, and
//! recover the task parameters it was built from.

use reachkin::emg::{extract_features, lda_train, DEFAULT_DEADZONE, DEFAULT_SHRINKAGE};
use reachkin::ingest::synth::{identify_task, synth_emg_training_set, synth_session, SynthConfig};
use reachkin::kinematics::{segment_reaches, SegmentOptions};
use reachkin::sessions::TaskSpec;

fn main() {
    // Calibration data trains the grip decoder the pipeline uses.
    let calibration: Vec<_> = synth_emg_training_set(7, 3.0, 1.0)
        .iter()
        .map(|(w, c)| (extract_features(w, DEFAULT_DEADZONE).unwrap().to_vec(), *c))
        .collect();
    let decoder = lda_train(&calibration, DEFAULT_SHRINKAGE).expect("separable calibration set");

    for task_id in 1..=4u8 {
        let cfg = SynthConfig {
            seed: 100 + task_id as u64,
            trials: 2,
            emit_raw_imu: false,
            ..SynthConfig::new(TaskSpec::by_id(task_id).unwrap())
        };
        let (session, truth) = synth_session(&cfg).expect("valid task");

        let joints = session
            .joint_series("chest", "upper", "forearm")
            .expect("three orientation streams");
        let endpoints = joints.endpoints(&cfg.arm);
        let reaches =
            segment_reaches(&joints.timestamps, &endpoints, &SegmentOptions::default()).unwrap();

        let recovered = identify_task(&session, &decoder).expect("recoverable session");
        println!(
            "task T{}: {} records, {} reaches over {} trials, ground-truth phases {}, recovered as T{} (dd={}, dtheta={})",
            task_id,
            session.records.len(),
            reaches.len(),
            cfg.trials,
            truth.phases.len(),
            recovered.id,
            recovered.delta_d,
            recovered.delta_theta
        );
    }
}
