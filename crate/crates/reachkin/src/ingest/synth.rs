//! Synthetic session generator and its analysis inverse.
//!
//! Generates minimum-jerk joint trajectories realizing one of the four
//! relocation tasks (reach, grasp, relocate with optional wrist rotation,
//! release, return), then renders them as a telemetry session: orientation
//! records for the three segment sensors, optionally raw IMU frames with
//! configurable noise, grip-phase-dependent EMG, fingertip impulse traces
//! during the hold, and phase/trial markers. The emitted ground truth makes
//! the generator the pipeline's oracle: fusing, joint extraction, and
//! decoding applied to a zero-noise session must reproduce it.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::emg::{EmgWindow, GripClass, EMG_RATE_HZ};
use crate::error::{Error, Result};
use crate::kinematics::{
    dist3, endpoint, min_jerk, segment_reaches, ArmModel, JointSeries, JointState,
    SegmentOptions, ELBOW_AXIS,
};
use crate::quat::Quaternion;
use crate::sessions::{Phase, System, TaskSpec};

use super::{assemble, Payload, RecordKind, SessionFile, SessionHeader, StreamRecord};

/// Sensor noise injected into raw-IMU and orientation records.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseConfig {
    /// Gyro white noise, rad/s std per sample.
    pub gyro_std: f64,
    /// Accelerometer white noise, g std per axis.
    pub accel_std: f64,
    /// Orientation-record angular noise, rad std.
    pub orientation_std: f64,
}

/// Generator configuration.
#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub task: TaskSpec,
    pub trials: usize,
    pub seed: u64,
    pub noise: NoiseConfig,
    /// Emit raw I records alongside the Q stream.
    pub emit_raw_imu: bool,
    pub imu_rate_hz: f64,
    pub quat_rate_hz: f64,
    pub impulse_rate_hz: f64,
    /// EMG envelope separation between classes; 1.0 is strongly separable.
    pub emg_separation: f64,
    pub arm: ArmModel,
    pub subject: String,
    pub phase: Phase,
    pub day: u32,
    pub system: System,
    /// Distance from the chest to the station plane, meters.
    pub frame_distance: f64,
    /// Station offset from the plane center, meters (the windowpane frame
    /// spans twice this).
    pub station_half_span: f64,
}

impl SynthConfig {
    pub fn new(task: TaskSpec) -> Self {
        Self {
            task,
            trials: 1,
            seed: 0,
            noise: NoiseConfig::default(),
            emit_raw_imu: true,
            imu_rate_hz: 100.0,
            quat_rate_hz: 20.0,
            impulse_rate_hz: 60.0,
            emg_separation: 1.0,
            arm: ArmModel::default(),
            subject: "synth".to_string(),
            phase: Phase::Training,
            day: 1,
            system: System::HoloPham,
            frame_distance: 0.40,
            station_half_span: 0.15,
        }
    }
}

/// Phase durations, seconds.
const REACH_S: f64 = 1.2;
const GRASP_S: f64 = 0.6;
const RELOCATE_S: f64 = 1.0;
const RELEASE_S: f64 = 0.6;
const RETURN_S: f64 = 1.2;
const REST_S: f64 = 0.8;
/// One trial's full cycle.
pub const TRIAL_CYCLE_S: f64 =
    REACH_S + GRASP_S + RELOCATE_S + RELEASE_S + RETURN_S + REST_S;

/// Ground-truth span of one movement phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpan {
    pub trial: usize,
    pub label: String,
    pub grip: GripClass,
    pub t0: f64,
    pub t1: f64,
}

/// What the generator knows that the pipeline must recover.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub task: TaskSpec,
    /// Noise-free joint states on the quaternion-record grid.
    pub joints: JointSeries,
    /// Endpoint trace of `joints` under the configured arm model.
    pub endpoints: Vec<[f64; 3]>,
    pub phases: Vec<PhaseSpan>,
    pub rest_endpoint: [f64; 3],
}

/// Target and goal stations in the chest frame for a task's relocation
/// geometry: diagonal moves change height and side, vertical moves change
/// height only, same-level moves change side only.
pub fn stations(task: &TaskSpec, frame_distance: f64, half_span: f64) -> ([f64; 3], [f64; 3]) {
    let x = frame_distance;
    let h = half_span;
    match task.delta_d {
        1 => ([x, -h, -h], [x, h, h]),
        -1 => ([x, h, -h], [x, h, h]),
        _ => ([x, -h, 0.0], [x, h, 0.0]),
    }
}

#[derive(Debug, Clone, Copy)]
struct Key {
    shoulder: Quaternion,
    elbow: f64,
}

const REST_KEY: Key = Key {
    shoulder: Quaternion::new(1.0, 0.0, 0.0, 0.0),
    elbow: 0.0,
};

/// Two-link configuration reaching chest-frame point `p`: elbow angle from
/// the chain-length relation, shoulder as the shortest arc taking the bent
/// arm's endpoint direction onto the target direction.
fn solve_arm(arm: &ArmModel, p: [f64; 3]) -> Result<Key> {
    let rel = [
        p[0] - arm.shoulder_offset[0],
        p[1] - arm.shoulder_offset[1],
        p[2] - arm.shoulder_offset[2],
    ];
    let r = (rel[0] * rel[0] + rel[1] * rel[1] + rel[2] * rel[2]).sqrt();
    if r > arm.reach() + 1e-9 {
        return Err(Error::domain(format!(
            "target at {r:.3} m exceeds arm reach {:.3} m",
            arm.reach()
        )));
    }
    let cos_elbow = ((r * r - arm.upper_arm.powi(2) - arm.forearm.powi(2))
        / (2.0 * arm.upper_arm * arm.forearm))
        .clamp(-1.0, 1.0);
    let elbow = cos_elbow.acos();
    let bent = [
        arm.forearm * elbow.sin(),
        0.0,
        -arm.upper_arm - arm.forearm * elbow.cos(),
    ];
    let shoulder = Quaternion::between(bent, rel);
    Ok(Key { shoulder, elbow })
}

#[derive(Debug, Clone)]
struct PlanSegment {
    t0: f64,
    t1: f64,
    from: Key,
    to: Key,
    wrist: (f64, f64),
    aperture: (f64, f64),
    grip: GripClass,
    label: &'static str,
    trial: usize,
}

fn build_plan(cfg: &SynthConfig) -> Result<Vec<PlanSegment>> {
    let (target, goal) = stations(&cfg.task, cfg.frame_distance, cfg.station_half_span);
    let at_target = solve_arm(&cfg.arm, target)?;
    let mut at_goal = solve_arm(&cfg.arm, goal)?;
    let rotate = cfg.task.delta_theta == 1;
    let wrist_end = if rotate { std::f64::consts::FRAC_PI_2 } else { 0.0 };
    if rotate {
        // Orienting the end effector to the goal's surface normal recruits
        // a different arm posture: swivel the elbow about the reach axis,
        // which leaves the endpoint in place but changes the joint path.
        let axis = [
            goal[0] - cfg.arm.shoulder_offset[0],
            goal[1] - cfg.arm.shoulder_offset[1],
            goal[2] - cfg.arm.shoulder_offset[2],
        ];
        at_goal.shoulder = Quaternion::from_axis_angle(axis, 25.0_f64.to_radians())
            .multiply(&at_goal.shoulder);
    }

    let mut plan = Vec::with_capacity(cfg.trials * 6);
    for trial in 0..cfg.trials {
        let base = trial as f64 * TRIAL_CYCLE_S;
        let mut t = base;
        let push = |dur: f64,
                        from: Key,
                        to: Key,
                        wrist: (f64, f64),
                        aperture: (f64, f64),
                        grip: GripClass,
                        label: &'static str,
                        t: &mut f64,
                        plan: &mut Vec<PlanSegment>| {
            plan.push(PlanSegment {
                t0: *t,
                t1: *t + dur,
                from,
                to,
                wrist,
                aperture,
                grip,
                label,
                trial,
            });
            *t += dur;
        };
        push(REACH_S, REST_KEY, at_target, (0.0, 0.0), (1.0, 1.0), GripClass::Rest, "reach", &mut t, &mut plan);
        push(GRASP_S, at_target, at_target, (0.0, 0.0), (1.0, 0.4), GripClass::HandClose, "grasp", &mut t, &mut plan);
        push(
            RELOCATE_S,
            at_target,
            at_goal,
            (0.0, wrist_end),
            (0.4, 0.4),
            if rotate { GripClass::WaveOut } else { GripClass::Rest },
            "relocate",
            &mut t,
            &mut plan,
        );
        push(RELEASE_S, at_goal, at_goal, (wrist_end, wrist_end), (0.4, 1.0), GripClass::HandOpen, "release", &mut t, &mut plan);
        push(RETURN_S, at_goal, REST_KEY, (wrist_end, 0.0), (1.0, 1.0), GripClass::Rest, "return", &mut t, &mut plan);
        push(REST_S, REST_KEY, REST_KEY, (0.0, 0.0), (1.0, 1.0), GripClass::Rest, "rest", &mut t, &mut plan);
    }
    Ok(plan)
}

fn segment_at(plan: &[PlanSegment], t: f64) -> &PlanSegment {
    let idx = plan.partition_point(|s| s.t1 <= t);
    &plan[idx.min(plan.len() - 1)]
}

fn state_at(plan: &[PlanSegment], t: f64) -> JointState {
    let seg = segment_at(plan, t);
    let tau = ((t - seg.t0) / (seg.t1 - seg.t0)).clamp(0.0, 1.0);
    let s = min_jerk(tau);
    JointState {
        shoulder: seg.from.shoulder.slerp(&seg.to.shoulder, s),
        elbow_flexion: seg.from.elbow + (seg.to.elbow - seg.from.elbow) * s,
        wrist_rotation: seg.wrist.0 + (seg.wrist.1 - seg.wrist.0) * s,
        hand_aperture: seg.aperture.0 + (seg.aperture.1 - seg.aperture.0) * s,
    }
}

fn device_orientation(state: &JointState, device: &str) -> Quaternion {
    match device {
        "chest" => Quaternion::identity(),
        "upper" => state.shoulder,
        _ => state
            .shoulder
            .multiply(&Quaternion::from_axis_angle(ELBOW_AXIS, state.elbow_flexion)),
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(1e-12..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn noisy_orientation(q: Quaternion, std: f64, rng: &mut ChaCha8Rng) -> Quaternion {
    if std <= 0.0 {
        return q;
    }
    let axis = [
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    ];
    q.multiply(&Quaternion::from_axis_angle(axis, gauss(rng) * std))
}

/// Band-limited EMG carrier: eight seeded sinusoids between 25 and 95 Hz
/// per channel.
struct EmgCarrier {
    phases: [[f64; 8]; 8],
}

// Non-commensurate frequencies: a common period would make fixed-length
// windows see identical content and collapse the feature variance.
const CARRIER_HZ: [f64; 8] = [23.0, 31.7, 41.3, 53.9, 61.7, 73.1, 83.9, 94.3];

impl EmgCarrier {
    fn new(rng: &mut ChaCha8Rng) -> Self {
        let mut phases = [[0.0; 8]; 8];
        for row in phases.iter_mut() {
            for p in row.iter_mut() {
                *p = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
            }
        }
        Self { phases }
    }

    fn sample(&self, channel: usize, t: f64) -> f64 {
        CARRIER_HZ
            .iter()
            .enumerate()
            .map(|(fi, f)| (2.0 * std::f64::consts::PI * f * t + self.phases[fi][channel]).sin())
            .sum::<f64>()
            / (CARRIER_HZ.len() as f64).sqrt()
    }
}

/// Per-channel activation envelope of a grip class. Class patterns sit on
/// distinct channel centers; rest is a flat floor.
pub fn emg_envelope(class: GripClass, separation: f64) -> [f64; 8] {
    let floor = 0.05;
    let center = match class {
        GripClass::Rest => return [floor; 8],
        GripClass::HandOpen => 0.5,
        GripClass::HandClose => 2.5,
        GripClass::WaveOut => 4.5,
        GripClass::WaveIn => 6.5,
    };
    std::array::from_fn(|ch| {
        floor + separation * (-(ch as f64 - center).powi(2) / (2.0 * 1.2 * 1.2)).exp()
    })
}

/// Generate one synthetic session plus its ground truth. Deterministic for
/// a fixed configuration.
pub fn synth_session(cfg: &SynthConfig) -> Result<(SessionFile, GroundTruth)> {
    if cfg.trials == 0 {
        return Err(Error::domain("at least one trial required"));
    }
    if !cfg.task.is_canonical() {
        return Err(Error::domain(format!(
            "task {} does not match the canonical table",
            cfg.task.id
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let carrier = EmgCarrier::new(&mut rng);
    let plan = build_plan(cfg)?;
    let total = plan.last().unwrap().t1;

    // Payloads are gathered per device and sequence-numbered afterwards: a
    // device that emits several record kinds (orientation plus raw frames)
    // still counts its packets with a single monotone sequence.
    let mut per_device: std::collections::BTreeMap<String, Vec<(u64, Payload)>> =
        std::collections::BTreeMap::new();
    let mut truth_joints = JointSeries::default();

    // Orientation records for the three segment sensors.
    let q_dt = 1.0 / cfg.quat_rate_hz;
    let q_steps = (total / q_dt).round() as usize;
    for k in 0..=q_steps {
        let t = k as f64 * q_dt;
        let state = state_at(&plan, t);
        truth_joints.push(t, state);
        for device in ["chest", "upper", "forearm"] {
            let q = noisy_orientation(
                device_orientation(&state, device),
                cfg.noise.orientation_std,
                &mut rng,
            );
            per_device
                .entry(device.to_string())
                .or_default()
                .push(((t * 1000.0).round() as u64, Payload::Quaternion(q)));
        }
    }

    // Raw IMU frames: gyro from the exact orientation increment, accel as
    // the gravity reaction in the sensor frame (quasi-static model).
    if cfg.emit_raw_imu {
        let dt = 1.0 / cfg.imu_rate_hz;
        let steps = (total / dt).round() as usize;
        for device in ["chest", "upper", "forearm"] {
            let mut prev = device_orientation(&state_at(&plan, 0.0), device);
            for k in 0..=steps {
                let t = k as f64 * dt;
                let q = device_orientation(&state_at(&plan, t), device);
                let gyro = if k == 0 {
                    [0.0; 3]
                } else {
                    let (axis, angle) = Quaternion::relative(&prev, &q).axis_angle();
                    [
                        axis[0] * angle / dt + gauss(&mut rng) * cfg.noise.gyro_std,
                        axis[1] * angle / dt + gauss(&mut rng) * cfg.noise.gyro_std,
                        axis[2] * angle / dt + gauss(&mut rng) * cfg.noise.gyro_std,
                    ]
                };
                let g = q.conjugate().rotate([0.0, 0.0, 1.0]);
                let accel = [
                    g[0] + gauss(&mut rng) * cfg.noise.accel_std,
                    g[1] + gauss(&mut rng) * cfg.noise.accel_std,
                    g[2] + gauss(&mut rng) * cfg.noise.accel_std,
                ];
                per_device.entry(device.to_string()).or_default().push((
                    (t * 1000.0).round() as u64,
                    Payload::RawImu {
                        gyro,
                        accel,
                        mag: None,
                        temperature: None,
                    },
                ));
                prev = q;
            }
        }
    }

    // EMG: envelope by grip phase, band-limited carrier.
    {
        let dt = 1.0 / EMG_RATE_HZ;
        let steps = (total / dt).round() as usize;
        for k in 0..=steps {
            let t = k as f64 * dt;
            let grip = segment_at(&plan, t).grip;
            let env = emg_envelope(grip, cfg.emg_separation);
            let mut sample = [0.0; 8];
            for (ch, out) in sample.iter_mut().enumerate() {
                *out = env[ch] * carrier.sample(ch, t);
            }
            per_device
                .entry("emg".to_string())
                .or_default()
                .push(((t * 1000.0).round() as u64, Payload::Emg(sample)));
        }
    }

    // Fingertip impulses: per-tip grip force held from grasp to release,
    // integrated into cumulative N*s.
    {
        let dt = 1.0 / cfg.impulse_rate_hz;
        let steps = (total / dt).round() as usize;
        let object_weight = 9.81 * cfg.arm_object_mass();
        let tip_force: Vec<f64> = (0..5)
            .map(|tip| object_weight / 5.0 + 0.05 * tip as f64)
            .collect();
        // Hold span per trial: grasp onset through the release midpoint.
        let holds: Vec<(f64, f64)> = (0..cfg.trials)
            .map(|trial| {
                let base = trial as f64 * TRIAL_CYCLE_S;
                (
                    base + REACH_S,
                    base + REACH_S + GRASP_S + RELOCATE_S + 0.3 * RELEASE_S,
                )
            })
            .collect();
        let ramp = 0.1;
        let mut cumulative = vec![0.0f64; 5];
        for k in 0..=steps {
            let t = k as f64 * dt;
            for (tip, c) in cumulative.iter_mut().enumerate() {
                let mut force = 0.0;
                for &(h0, h1) in &holds {
                    if t >= h0 && t <= h1 {
                        let rise = ((t - h0) / ramp).min(1.0);
                        let fall = ((h1 - t) / ramp).min(1.0);
                        force = tip_force[tip] * rise.min(fall).max(0.0);
                    }
                }
                *c += force * dt;
            }
            per_device
                .entry("tips".to_string())
                .or_default()
                .push(((t * 1000.0).round() as u64, Payload::Impulse(cumulative.clone())));
        }
    }

    // Phase and trial markers.
    let mut phases = Vec::with_capacity(plan.len());
    {
        let markers = per_device.entry("session".to_string()).or_default();
        let mark = |t: f64, tag: String, markers: &mut Vec<(u64, Payload)>| {
            markers.push(((t * 1000.0).round() as u64, Payload::Marker(tag)));
        };
        for trial in 0..cfg.trials {
            let base = trial as f64 * TRIAL_CYCLE_S;
            mark(base, format!("trial {trial} start"), markers);
            for seg in plan.iter().filter(|s| s.trial == trial) {
                mark(
                    seg.t0,
                    format!("trial {trial} phase {}", seg.label),
                    markers,
                );
                phases.push(PhaseSpan {
                    trial,
                    label: seg.label.to_string(),
                    grip: seg.grip,
                    t0: seg.t0,
                    t1: seg.t1,
                });
            }
            mark(
                base + TRIAL_CYCLE_S - REST_S,
                format!("trial {trial} end"),
                markers,
            );
        }
    }

    let mut records: Vec<StreamRecord> = Vec::new();
    for (device, mut payloads) in per_device {
        payloads.sort_by_key(|&(t_ms, _)| t_ms);
        for (seq, (t_ms, payload)) in payloads.into_iter().enumerate() {
            records.push(StreamRecord {
                device: device.clone(),
                seq: seq as u64,
                t_ms,
                payload,
            });
        }
    }

    let mut header = SessionHeader::default();
    header.subject = cfg.subject.clone();
    header.phase = Some(cfg.phase);
    header.day = Some(cfg.day);
    header.system = Some(cfg.system);
    header.task = Some(cfg.task.id);
    header.arm = cfg.arm;
    header.seed = Some(cfg.seed);

    let endpoints = truth_joints.endpoints(&cfg.arm);
    let truth = GroundTruth {
        task: cfg.task,
        joints: truth_joints,
        endpoints,
        phases,
        rest_endpoint: endpoint(&cfg.arm, &JointState::rest()),
    };
    Ok((assemble(header, records), truth))
}

impl SynthConfig {
    /// Manipulated-object mass implied by the session's mass convention.
    fn arm_object_mass(&self) -> f64 {
        // Header default: objects weigh one tenth of the limb.
        0.1 * 2.6
    }
}

/// Labeled EMG windows for decoder training/calibration: `seconds` of
/// signal per grip class, windowed with the standard parameters.
pub fn synth_emg_training_set(
    seed: u64,
    seconds_per_class: f64,
    separation: f64,
) -> Vec<(EmgWindow, GripClass)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let carrier = EmgCarrier::new(&mut rng);
    let mut out = Vec::new();
    let samples = (seconds_per_class * EMG_RATE_HZ) as usize;
    for class in GripClass::ALL {
        let env = emg_envelope(class, separation);
        let channels: [Vec<f64>; 8] = std::array::from_fn(|ch| {
            (0..samples)
                .map(|k| env[ch] * carrier.sample(ch, k as f64 / EMG_RATE_HZ))
                .collect()
        });
        for w in crate::emg::window_stream(
            &channels,
            0.0,
            EMG_RATE_HZ,
            crate::emg::DEFAULT_WINDOW_MS,
            crate::emg::DEFAULT_INCREMENT_MS,
        ) {
            out.push((w, class));
        }
    }
    out
}

/// Labeled EMG calibration session: one signal block per grip class,
/// delimited by `label <class>` markers, ready for decoder training.
pub fn synth_calibration_session(
    seed: u64,
    seconds_per_class: f64,
    separation: f64,
) -> SessionFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let carrier = EmgCarrier::new(&mut rng);
    let mut records = Vec::new();
    let samples = (seconds_per_class * EMG_RATE_HZ) as usize;
    let mut seq = 0u64;
    let mut marker_seq = 0u64;
    let mut t = 0.0_f64;
    for class in GripClass::ALL {
        records.push(StreamRecord {
            device: "session".to_string(),
            seq: marker_seq,
            t_ms: (t * 1000.0).round() as u64,
            payload: Payload::Marker(format!("label {}", class.name())),
        });
        marker_seq += 1;
        let env = emg_envelope(class, separation);
        for _ in 0..samples {
            let mut sample = [0.0; 8];
            for (ch, out) in sample.iter_mut().enumerate() {
                *out = env[ch] * carrier.sample(ch, t);
            }
            records.push(StreamRecord {
                device: "emg".to_string(),
                seq,
                t_ms: (t * 1000.0).round() as u64,
                payload: Payload::Emg(sample),
            });
            seq += 1;
            t += 1.0 / EMG_RATE_HZ;
        }
    }
    let mut header = SessionHeader::default();
    header.subject = "calibration".to_string();
    header.seed = Some(seed);
    header
        .extra
        .insert("calibration".to_string(), "true".to_string());
    assemble(header, records)
}

/// Trial spans from `trial <k> start` / `trial <k> end` markers; the whole
/// record span when no markers exist.
pub fn trial_spans(session: &SessionFile) -> Vec<(f64, f64)> {
    use std::collections::BTreeMap;
    let mut starts: BTreeMap<usize, f64> = BTreeMap::new();
    let mut ends: BTreeMap<usize, f64> = BTreeMap::new();
    for rec in &session.records {
        if let Payload::Marker(tag) = &rec.payload {
            let tokens: Vec<&str> = tag.split_whitespace().collect();
            if tokens.len() == 3 && tokens[0] == "trial" {
                if let Ok(k) = tokens[1].parse::<usize>() {
                    let t = rec.t_ms as f64 / 1000.0;
                    match tokens[2] {
                        "start" => {
                            starts.insert(k, t);
                        }
                        "end" => {
                            ends.insert(k, t);
                        }
                        _ => {}
                    }
                }
            }
        }
    }
    let mut spans: Vec<(f64, f64)> = starts
        .iter()
        .filter_map(|(k, &t0)| ends.get(k).map(|&t1| (t0, t1)))
        .collect();
    if spans.is_empty() {
        if let (Some(first), Some(last)) = (session.records.first(), session.records.last()) {
            spans.push((first.t_ms as f64 / 1000.0, last.t_ms as f64 / 1000.0));
        }
    }
    spans.sort_by(|a, b| a.0.total_cmp(&b.0));
    spans
}

/// Decode the session's EMG stream and report whether a sustained wrist
/// rotation (wave-out or wave-in) phase occurs: three consecutive decoded
/// windows.
pub fn decoded_wrist_activity(
    session: &SessionFile,
    model: &crate::emg::LdaModel,
) -> Result<bool> {
    let mut channels: [Vec<f64>; 8] = std::array::from_fn(|_| Vec::new());
    let mut start_time = None;
    for device in session.devices_with(RecordKind::Emg) {
        for rec in session.device_records(RecordKind::Emg, &device) {
            if let Payload::Emg(sample) = &rec.payload {
                if start_time.is_none() {
                    start_time = Some(rec.t_ms as f64 / 1000.0);
                }
                for (ch, v) in sample.iter().enumerate() {
                    channels[ch].push(*v);
                }
            }
        }
    }
    let Some(start) = start_time else {
        return Ok(false);
    };
    let windows = crate::emg::window_stream(
        &channels,
        start,
        EMG_RATE_HZ,
        crate::emg::DEFAULT_WINDOW_MS,
        crate::emg::DEFAULT_INCREMENT_MS,
    );
    let mut run = 0;
    for w in windows {
        let features = crate::emg::extract_features(&w, crate::emg::DEFAULT_DEADZONE)?;
        let (class, _) = model.predict(&features.to_vec())?;
        if matches!(class, GripClass::WaveOut | GripClass::WaveIn) {
            run += 1;
            if run >= 3 {
                return Ok(true);
            }
        } else {
            run = 0;
        }
    }
    Ok(false)
}

/// Recover the task parameters of a recorded session: the relocation
/// direction comes from the mid-trial reach segment's displacement, the
/// rotation feature from decoded wrist activity in the EMG stream.
pub fn identify_task(
    session: &SessionFile,
    model: &crate::emg::LdaModel,
) -> Result<TaskSpec> {
    let joints = session.joint_series("chest", "upper", "forearm")?;
    let endpoints = joints.endpoints(&session.header.arm);
    let segments = segment_reaches(&joints.timestamps, &endpoints, &SegmentOptions::default())?;
    if segments.is_empty() {
        return Err(Error::Empty {
            what: "reach segments",
        });
    }
    let rest = endpoints[0];

    let mut votes: Vec<i8> = Vec::new();
    for (t0, t1) in trial_spans(session) {
        let mut best: Option<(f64, [f64; 3])> = None;
        for seg in &segments {
            let ts = joints.timestamps[seg.start];
            let te = joints.timestamps[seg.end];
            if ts < t0 - 0.05 || te > t1 + 0.05 {
                continue;
            }
            let p0 = endpoints[seg.start];
            let p1 = endpoints[seg.end];
            // The relocation leg starts and ends away from the rest pose.
            if dist3(p0, rest) < 0.12 || dist3(p1, rest) < 0.12 {
                continue;
            }
            if best.map_or(true, |(net, _)| seg.net_displacement > net) {
                best = Some((
                    seg.net_displacement,
                    [p1[0] - p0[0], p1[1] - p0[1], p1[2] - p0[2]],
                ));
            }
        }
        if let Some((_, d)) = best {
            let vertical = d[2].abs() > 0.1;
            let lateral = d[1].abs() > 0.1;
            votes.push(match (vertical, lateral) {
                (true, true) => 1,
                (true, false) => -1,
                _ => 0,
            });
        }
    }
    if votes.is_empty() {
        return Err(Error::Empty {
            what: "relocation segments",
        });
    }
    let mut counts: std::collections::BTreeMap<i8, usize> = std::collections::BTreeMap::new();
    for v in &votes {
        *counts.entry(*v).or_default() += 1;
    }
    let delta_d = *counts.iter().max_by_key(|(_, &n)| n).unwrap().0;
    let delta_theta = u8::from(decoded_wrist_activity(session, model)?);

    crate::sessions::task_table()
        .into_iter()
        .find(|t| t.delta_d == delta_d && t.delta_theta == delta_theta)
        .ok_or_else(|| {
            Error::domain(format!(
                "no task matches delta_d={delta_d}, delta_theta={delta_theta}"
            ))
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn min_jerk_scalar_profile() {
        assert_eq!(min_jerk(0.0), 0.0);
        assert_abs_diff_eq!(min_jerk(0.5), 0.5, epsilon = 1e-12);
        assert_eq!(min_jerk(1.0), 1.0);
    }

    #[test]
    fn ik_reaches_all_stations() {
        let arm = ArmModel::default();
        for task in crate::sessions::task_table() {
            let (target, goal) = stations(&task, 0.40, 0.15);
            for p in [target, goal] {
                let key = solve_arm(&arm, p).unwrap();
                let state = JointState {
                    shoulder: key.shoulder,
                    elbow_flexion: key.elbow,
                    wrist_rotation: 0.0,
                    hand_aperture: 1.0,
                };
                let reached = endpoint(&arm, &state);
                for i in 0..3 {
                    assert_abs_diff_eq!(reached[i], p[i], epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn ik_rejects_unreachable() {
        let arm = ArmModel::default();
        assert!(solve_arm(&arm, [1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn synthesis_is_deterministic() {
        let cfg = SynthConfig {
            trials: 2,
            seed: 42,
            noise: NoiseConfig {
                gyro_std: 0.02,
                accel_std: 0.02,
                orientation_std: 0.01,
            },
            ..SynthConfig::new(TaskSpec::by_id(2).unwrap())
        };
        let (a, _) = synth_session(&cfg).unwrap();
        let (b, _) = synth_session(&cfg).unwrap();
        assert_eq!(a, b);
        let text_a = crate::ingest::format::session_to_string(&a);
        let text_b = crate::ingest::format::session_to_string(&b);
        assert_eq!(text_a, text_b);
    }

    #[test]
    fn quaternion_stream_holds_nominal_rate() {
        let cfg = SynthConfig::new(TaskSpec::by_id(1).unwrap());
        let (session, _) = synth_session(&cfg).unwrap();
        let recs = session.device_records(RecordKind::Quaternion, "upper");
        let mut intervals: Vec<i64> = recs
            .windows(2)
            .map(|w| w[1].t_ms as i64 - w[0].t_ms as i64)
            .collect();
        intervals.sort_unstable();
        let median = intervals[intervals.len() / 2];
        assert!((median - 50).abs() <= 1, "median interval {median} ms");
    }

    #[test]
    fn ground_truth_covers_phases_and_grips() {
        for task_id in [1u8, 2, 3, 4] {
            let cfg = SynthConfig::new(TaskSpec::by_id(task_id).unwrap());
            let (_, truth) = synth_session(&cfg).unwrap();
            let has_wave = truth
                .phases
                .iter()
                .any(|p| matches!(p.grip, GripClass::WaveOut | GripClass::WaveIn));
            assert_eq!(has_wave, task_id == 2, "task {task_id}");
            assert!(truth.phases.iter().any(|p| p.grip == GripClass::HandClose));
            assert!(truth.phases.iter().any(|p| p.grip == GripClass::HandOpen));
        }
    }

    #[test]
    fn truth_endpoints_touch_both_stations() {
        let cfg = SynthConfig::new(TaskSpec::by_id(3).unwrap());
        let (_, truth) = synth_session(&cfg).unwrap();
        let (target, goal) = stations(&truth.task, cfg.frame_distance, cfg.station_half_span);
        let near = |p: [f64; 3]| {
            truth
                .endpoints
                .iter()
                .any(|e| dist3(*e, p) < 0.01)
        };
        assert!(near(target));
        assert!(near(goal));
        assert!(near(truth.rest_endpoint));
    }

    #[test]
    fn zero_noise_session_joint_extraction_matches_truth() {
        let cfg = SynthConfig {
            emit_raw_imu: false,
            ..SynthConfig::new(TaskSpec::by_id(1).unwrap())
        };
        let (session, truth) = synth_session(&cfg).unwrap();
        let joints = session.joint_series("chest", "upper", "forearm").unwrap();
        assert_eq!(joints.len(), truth.joints.len());
        for k in 0..joints.len() {
            // geodesic_angle resolves no finer than ~3e-8 rad near zero.
            let err = Quaternion::geodesic_angle(&joints.shoulder[k], &truth.joints.shoulder[k]);
            assert!(err < 1e-6, "shoulder error {err} at {k}");
            assert_abs_diff_eq!(
                joints.elbow_flexion[k],
                truth.joints.elbow_flexion[k],
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn training_set_trains_accurate_decoder() {
        let data = synth_emg_training_set(7, 4.0, 1.0);
        let features: Vec<(Vec<f64>, GripClass)> = data
            .iter()
            .map(|(w, c)| {
                (
                    crate::emg::extract_features(w, crate::emg::DEFAULT_DEADZONE)
                        .unwrap()
                        .to_vec(),
                    *c,
                )
            })
            .collect();
        let split = features.len() / 2;
        // Interleave train/test for class balance.
        let train: Vec<_> = features.iter().step_by(2).cloned().collect();
        let test: Vec<_> = features.iter().skip(1).step_by(2).cloned().collect();
        assert!(train.len() >= split / 2);
        let model = crate::emg::lda_train(&train, crate::emg::DEFAULT_SHRINKAGE).unwrap();
        let conf = crate::emg::confusion_eval(&model, &test).unwrap();
        assert!(conf.accuracy > 0.95, "accuracy {}", conf.accuracy);
    }

    #[test]
    fn task_identity_recovered_for_all_tasks() {
        let calibration = synth_emg_training_set(99, 3.0, 1.0);
        let features: Vec<(Vec<f64>, GripClass)> = calibration
            .iter()
            .map(|(w, c)| {
                (
                    crate::emg::extract_features(w, crate::emg::DEFAULT_DEADZONE)
                        .unwrap()
                        .to_vec(),
                    *c,
                )
            })
            .collect();
        let model = crate::emg::lda_train(&features, crate::emg::DEFAULT_SHRINKAGE).unwrap();
        for task_id in [1u8, 2, 3, 4] {
            let cfg = SynthConfig {
                seed: 11 + task_id as u64,
                emit_raw_imu: false,
                ..SynthConfig::new(TaskSpec::by_id(task_id).unwrap())
            };
            let (session, _) = synth_session(&cfg).unwrap();
            let recovered = identify_task(&session, &model).unwrap();
            assert_eq!(recovered.id, task_id);
        }
    }
}
