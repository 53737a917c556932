//! Two-segment arm chain: joint angles from segment orientations, endpoint
//! position by compounding rotations along the chain, reach segmentation,
//! and depth-perception statistics.
//!
//! Frame convention: chest frame with x forward, y left, z up. The rest
//! pose hangs the arm along -z. The elbow is a pure hinge about -y in the
//! upper-arm frame, so positive flexion swings the forearm from -z toward
//! +x; residual non-hinge rotation at the elbow is reported as a quality
//! metric rather than folded into the angle.

use crate::error::{Error, Result};
use crate::quat::{EulerSequence, Quaternion};

/// Elbow hinge axis in the upper-arm frame.
pub const ELBOW_AXIS: [f64; 3] = [0.0, -1.0, 0.0];

/// Segment lengths and shoulder placement. Defaults are anthropometric
/// mid-range values; per-subject overrides come from session config.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmModel {
    /// Upper-arm length in meters.
    pub upper_arm: f64,
    /// Forearm-plus-hand length in meters.
    pub forearm: f64,
    /// Shoulder position in the chest frame, meters.
    pub shoulder_offset: [f64; 3],
}

impl Default for ArmModel {
    fn default() -> Self {
        Self {
            upper_arm: 0.30,
            forearm: 0.25,
            shoulder_offset: [0.0, 0.0, 0.0],
        }
    }
}

impl ArmModel {
    pub fn new(upper_arm: f64, forearm: f64, shoulder_offset: [f64; 3]) -> Result<Self> {
        if upper_arm <= 0.0 || forearm <= 0.0 {
            return Err(Error::domain(format!(
                "segment lengths must be positive, got {upper_arm} and {forearm}"
            )));
        }
        Ok(Self {
            upper_arm,
            forearm,
            shoulder_offset,
        })
    }

    pub fn reach(&self) -> f64 {
        self.upper_arm + self.forearm
    }
}

/// The six controlled degrees of freedom: three at the shoulder, elbow
/// flexion, wrist rotation, and hand aperture. Wrist and aperture are
/// driven by the myoelectric decoder, not the IMUs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointState {
    pub shoulder: Quaternion,
    /// Radians, in [0, pi]; 0 is the fully extended arm.
    pub elbow_flexion: f64,
    /// Radians; positive toward pronation.
    pub wrist_rotation: f64,
    /// Normalized [0, 1]; 1 is fully open.
    pub hand_aperture: f64,
}

impl JointState {
    pub fn rest() -> Self {
        Self {
            shoulder: Quaternion::identity(),
            elbow_flexion: 0.0,
            wrist_rotation: 0.0,
            hand_aperture: 1.0,
        }
    }
}

/// Data-quality companion to a [`JointState`] extraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointQuality {
    /// Rotation angle (radians) at the elbow that the hinge model cannot
    /// express.
    pub elbow_residual: f64,
    /// Shoulder display decomposition was near gimbal lock.
    pub gimbal_lock: bool,
}

/// Joint angles from the three segment orientations: the shoulder is the
/// chest-to-upper-arm relative rotation, elbow flexion is the hinge-axis
/// twist of the upper-arm-to-forearm relative rotation.
pub fn joint_angles(
    chest: &Quaternion,
    upper: &Quaternion,
    forearm: &Quaternion,
) -> (JointState, JointQuality) {
    let shoulder = Quaternion::relative(chest, upper);
    let elbow_rel = Quaternion::relative(upper, forearm);
    let (swing, _twist, angle) = elbow_rel.swing_twist(ELBOW_AXIS);
    let flexion = angle.clamp(0.0, std::f64::consts::PI);
    let state = JointState {
        shoulder,
        elbow_flexion: flexion,
        wrist_rotation: 0.0,
        hand_aperture: 1.0,
    };
    let quality = JointQuality {
        elbow_residual: swing.angle() + (angle - flexion).abs(),
        gimbal_lock: shoulder.to_euler(EulerSequence::Zxy).gimbal_lock,
    };
    (state, quality)
}

/// Chest-frame hand endpoint by compounding the shoulder rotation over the
/// upper-arm vector, then shoulder and elbow over the forearm vector.
pub fn endpoint(model: &ArmModel, js: &JointState) -> [f64; 3] {
    let upper_vec = [0.0, 0.0, -model.upper_arm];
    let fore_vec = [0.0, 0.0, -model.forearm];
    let elbow_rot = Quaternion::from_axis_angle(ELBOW_AXIS, js.elbow_flexion);
    let u = js.shoulder.rotate(upper_vec);
    let f = js.shoulder.multiply(&elbow_rot).rotate(fore_vec);
    [
        model.shoulder_offset[0] + u[0] + f[0],
        model.shoulder_offset[1] + u[1] + f[1],
        model.shoulder_offset[2] + u[2] + f[2],
    ]
}

/// Analytic bound on endpoint displacement under a single-joint angular
/// perturbation of `delta` radians: the chord swept by the full arm length,
/// `2 (L_u + L_f) sin(delta / 2)`.
pub fn endpoint_perturbation_bound(model: &ArmModel, delta: f64) -> f64 {
    2.0 * model.reach() * (delta.abs() / 2.0).sin()
}

/// Columnar joint-state trajectory.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct JointSeries {
    pub timestamps: Vec<f64>,
    pub shoulder: Vec<Quaternion>,
    pub elbow_flexion: Vec<f64>,
    pub wrist_rotation: Vec<f64>,
    pub hand_aperture: Vec<f64>,
}

impl JointSeries {
    pub fn push(&mut self, t: f64, state: JointState) {
        self.timestamps.push(t);
        self.shoulder.push(state.shoulder);
        self.elbow_flexion.push(state.elbow_flexion);
        self.wrist_rotation.push(state.wrist_rotation);
        self.hand_aperture.push(state.hand_aperture);
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn state(&self, k: usize) -> JointState {
        JointState {
            shoulder: self.shoulder[k],
            elbow_flexion: self.elbow_flexion[k],
            wrist_rotation: self.wrist_rotation[k],
            hand_aperture: self.hand_aperture[k],
        }
    }

    /// Endpoint trace of the whole series under `model`.
    pub fn endpoints(&self, model: &ArmModel) -> Vec<[f64; 3]> {
        (0..self.len()).map(|k| endpoint(model, &self.state(k))).collect()
    }
}

/// Joint-state series from three time-aligned segment-orientation streams.
/// Samples land on the chest stream's timestamps within the span common to
/// all three devices; upper-arm and forearm orientations interpolate along
/// the arc where their timestamps differ.
pub fn joint_series(
    chest: &crate::alignment::QuaternionSeries,
    upper: &crate::alignment::QuaternionSeries,
    forearm: &crate::alignment::QuaternionSeries,
) -> Result<JointSeries> {
    let mut out = JointSeries::default();
    for &(t, qc) in chest.samples() {
        let (Some(qu), Some(qf)) = (upper.sample_at(t), forearm.sample_at(t)) else {
            continue;
        };
        let (state, _) = joint_angles(&qc, &qu, &qf);
        out.push(t, state);
    }
    if out.is_empty() {
        return Err(Error::Empty {
            what: "overlapping joint samples",
        });
    }
    Ok(out)
}

/// One detected reach: sample span, duration, executed path length, net
/// displacement, and the endpoint trace across the span.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachSegment {
    pub start: usize,
    pub end: usize,
    pub duration: f64,
    pub path_length: f64,
    pub net_displacement: f64,
    pub trace: Vec<[f64; 3]>,
}

/// Reach segmentation parameters.
#[derive(Debug, Clone, Copy)]
pub struct SegmentOptions {
    /// Speed threshold as a fraction of each segment's peak speed.
    pub threshold_fraction: f64,
    /// Segments shorter than this are discarded as jitter (seconds).
    pub min_duration: f64,
    /// Segments covering less path than this are discarded (meters).
    pub min_path: f64,
}

impl Default for SegmentOptions {
    fn default() -> Self {
        Self {
            threshold_fraction: 0.05,
            min_duration: 0.15,
            min_path: 0.02,
        }
    }
}

pub(crate) fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Detect reaches in an endpoint trace. A segment is grown from each local
/// speed peak out to the fraction-of-peak threshold crossing, then refined
/// outward to the surrounding movement-rest points (while the speed profile
/// keeps decreasing), so the measured duration covers the whole reach
/// rather than only its above-threshold core. Static traces yield no
/// segments.
pub fn segment_reaches(
    timestamps: &[f64],
    positions: &[[f64; 3]],
    opts: &SegmentOptions,
) -> Result<Vec<ReachSegment>> {
    if timestamps.len() != positions.len() {
        return Err(Error::domain(format!(
            "timestamp/position length mismatch: {} vs {}",
            timestamps.len(),
            positions.len()
        )));
    }
    if timestamps.len() < 3 {
        return Err(Error::TooFewSamples {
            what: "endpoint series",
            need: 3,
            got: timestamps.len(),
        });
    }
    for k in 1..timestamps.len() {
        if timestamps[k] <= timestamps[k - 1] {
            return Err(Error::NonMonotonicTimestamp {
                index: k,
                t: timestamps[k],
                previous: timestamps[k - 1],
            });
        }
    }

    let n = timestamps.len();
    // Central-difference speed, one-sided at the ends.
    let mut speed = vec![0.0; n];
    speed[0] = dist3(positions[1], positions[0]) / (timestamps[1] - timestamps[0]);
    speed[n - 1] =
        dist3(positions[n - 1], positions[n - 2]) / (timestamps[n - 1] - timestamps[n - 2]);
    for k in 1..n - 1 {
        speed[k] = dist3(positions[k + 1], positions[k - 1]) / (timestamps[k + 1] - timestamps[k - 1]);
    }

    let mut spans: Vec<(usize, usize)> = Vec::new();
    extract_spans(&speed, 0, n - 1, opts.threshold_fraction, &mut spans);
    spans.sort_unstable();

    let mut segments = Vec::new();
    for (start, end) in spans {
        let duration = timestamps[end] - timestamps[start];
        let path_length: f64 = (start..end)
            .map(|k| dist3(positions[k + 1], positions[k]))
            .sum();
        if duration < opts.min_duration || path_length < opts.min_path {
            continue;
        }
        segments.push(ReachSegment {
            start,
            end,
            duration,
            path_length,
            net_displacement: dist3(positions[end], positions[start]),
            trace: positions[start..=end].to_vec(),
        });
    }
    Ok(segments)
}

/// Recursive peak extraction over `[lo, hi]` (inclusive).
fn extract_spans(
    speed: &[f64],
    lo: usize,
    hi: usize,
    fraction: f64,
    out: &mut Vec<(usize, usize)>,
) {
    if lo > hi {
        return;
    }
    let peak = (lo..=hi)
        .max_by(|&a, &b| speed[a].partial_cmp(&speed[b]).unwrap())
        .unwrap();
    if speed[peak] <= 1e-12 {
        return;
    }
    let threshold = fraction * speed[peak];
    let mut left = peak;
    while left > lo && speed[left - 1] >= threshold {
        left -= 1;
    }
    let mut right = peak;
    while right < hi && speed[right + 1] >= threshold {
        right += 1;
    }
    // Refine outward to the surrounding rest points.
    while left > lo && speed[left - 1] < speed[left] {
        left -= 1;
    }
    while right < hi && speed[right + 1] < speed[right] {
        right += 1;
    }
    out.push((left, right));
    if left > lo {
        extract_spans(speed, lo, left - 1, fraction, out);
    }
    if right < hi {
        extract_spans(speed, right + 1, hi, fraction, out);
    }
}

/// Depth-perception statistics for one virtual target distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthStats {
    /// Virtual target distance, meters.
    pub d_ar: f64,
    /// Mean physical net displacement across reaches.
    pub mu_phy: f64,
    /// Sample standard deviation (n-1 denominator; zero for one reach).
    pub sigma_phy: f64,
    /// Absolute error of the mean against the virtual distance.
    pub error: f64,
}

/// Aggregate reach displacements against a virtual depth target.
pub fn depth_stats(segments: &[ReachSegment], d_ar: f64) -> Result<DepthStats> {
    if segments.is_empty() {
        return Err(Error::Empty {
            what: "reach segments",
        });
    }
    let n = segments.len() as f64;
    let mu: f64 = segments.iter().map(|s| s.net_displacement).sum::<f64>() / n;
    let sigma = if segments.len() > 1 {
        let ss: f64 = segments
            .iter()
            .map(|s| (s.net_displacement - mu).powi(2))
            .sum();
        (ss / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(DepthStats {
        d_ar,
        mu_phy: mu,
        sigma_phy: sigma,
        error: (mu - d_ar).abs(),
    })
}

/// Minimum-jerk scalar profile: fraction of displacement completed at
/// normalized time `tau` in [0, 1].
pub fn min_jerk(tau: f64) -> f64 {
    let t = tau.clamp(0.0, 1.0);
    t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
}
