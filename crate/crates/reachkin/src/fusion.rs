//! Madgwick orientation filter: gyro rate integration with a normalized
//! gradient-descent correction from the accelerometer (and magnetometer
//! when present).
//!
//! Output quaternions map sensor-frame vectors to the world frame; at rest
//! the accelerometer is taken to read +1 g along the world z axis. The
//! 6-axis variant is the default; the full MARG correction activates only
//! on frames that carry a magnetometer sample.

use crate::alignment::QuaternionSeries;
use crate::error::{Error, Result};
use crate::quat::Quaternion;

/// Filter gain used when none is configured. The streams this crate
/// ingests never publish one.
pub const DEFAULT_BETA: f64 = 0.1;

/// Nominal time step assumed for the very first frame of a stream, where
/// no previous timestamp exists yet (20 Hz stream period).
pub const NOMINAL_DT: f64 = 0.05;

/// One raw 9-axis IMU sample. Gyro in rad/s, accelerometer in g,
/// magnetometer as a normalized field vector (optional).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuFrame {
    pub timestamp: f64,
    pub gyro: [f64; 3],
    pub accel: [f64; 3],
    pub mag: Option<[f64; 3]>,
}

/// Running filter state. Single-owner: one state per sensor stream,
/// advanced sequentially.
#[derive(Debug, Clone, Copy)]
pub struct FilterState {
    pub orientation: Quaternion,
    pub beta: f64,
    pub last_timestamp: Option<f64>,
    /// Set when the latest step had to skip the accelerometer correction
    /// (zero-norm reading with beta > 0).
    pub correction_skipped: bool,
}

impl FilterState {
    pub fn new(initial: Quaternion, beta: f64) -> Self {
        Self {
            orientation: initial.canonicalized(),
            beta,
            last_timestamp: None,
            correction_skipped: false,
        }
    }
}

/// Accelerometer-aligned initial orientation with zero yaw: the shortest
/// rotation taking the measured specific-force direction to world up.
pub fn initial_from_accel(accel: [f64; 3]) -> Quaternion {
    let n = (accel[0] * accel[0] + accel[1] * accel[1] + accel[2] * accel[2]).sqrt();
    if n < 1e-12 {
        return Quaternion::identity();
    }
    Quaternion::between([accel[0] / n, accel[1] / n, accel[2] / n], [0.0, 0.0, 1.0])
}

/// Measurement residual of the gradient-descent objective: predicted minus
/// measured gravity direction in the sensor frame, and, when a magnetometer
/// sample plus its world reference `(bx, bz)` are given, predicted minus
/// measured field. `accel` and `mag` must be pre-normalized.
///
/// The corrector direction is the analytic gradient of `0.5 * ||f||^2`
/// with the references held fixed.
pub fn objective(
    q: &Quaternion,
    accel: [f64; 3],
    mag: Option<([f64; 3], [f64; 2])>,
) -> Vec<f64> {
    let (w, x, y, z) = (q.w, q.x, q.y, q.z);
    let mut f = vec![
        2.0 * (x * z - w * y) - accel[0],
        2.0 * (w * x + y * z) - accel[1],
        2.0 * (0.5 - x * x - y * y) - accel[2],
    ];
    if let Some((m, [bx, bz])) = mag {
        f.push(2.0 * bx * (0.5 - y * y - z * z) + 2.0 * bz * (x * z - w * y) - m[0]);
        f.push(2.0 * bx * (x * y - w * z) + 2.0 * bz * (w * x + y * z) - m[1]);
        f.push(2.0 * bx * (x * z + w * y) + 2.0 * bz * (0.5 - x * x - y * y) - m[2]);
    }
    f
}

/// Analytic gradient of `0.5 * ||objective||^2` with respect to the four
/// quaternion components.
pub fn objective_gradient(
    q: &Quaternion,
    accel: [f64; 3],
    mag: Option<([f64; 3], [f64; 2])>,
) -> [f64; 4] {
    let (w, x, y, z) = (q.w, q.x, q.y, q.z);
    let f = objective(q, accel, mag);
    let (f1, f2, f3) = (f[0], f[1], f[2]);
    let mut s = [
        -2.0 * y * f1 + 2.0 * x * f2,
        2.0 * z * f1 + 2.0 * w * f2 - 4.0 * x * f3,
        -2.0 * w * f1 + 2.0 * z * f2 - 4.0 * y * f3,
        2.0 * x * f1 + 2.0 * y * f2,
    ];
    if let Some((_, [bx, bz])) = mag {
        let (f4, f5, f6) = (f[3], f[4], f[5]);
        s[0] += -2.0 * bz * y * f4 + (-2.0 * bx * z + 2.0 * bz * x) * f5 + 2.0 * bx * y * f6;
        s[1] += 2.0 * bz * z * f4
            + (2.0 * bx * y + 2.0 * bz * w) * f5
            + (2.0 * bx * z - 4.0 * bz * x) * f6;
        s[2] += (-4.0 * bx * y - 2.0 * bz * w) * f4
            + (2.0 * bx * x + 2.0 * bz * z) * f5
            + (2.0 * bx * w - 4.0 * bz * y) * f6;
        s[3] += (-4.0 * bx * z + 2.0 * bz * x) * f4
            + (-2.0 * bx * w + 2.0 * bz * y) * f5
            + 2.0 * bx * x * f6;
    }
    s
}

/// World-frame horizontal/vertical reference of the measured field: the
/// magnetometer reading rotated into the world by the current estimate,
/// with its horizontal components folded into a single bx.
fn field_reference(q: &Quaternion, mag_unit: [f64; 3]) -> [f64; 2] {
    let h = q.rotate(mag_unit);
    [(h[0] * h[0] + h[1] * h[1]).sqrt(), h[2]]
}

/// Advance the filter by one frame: gyro quaternion-rate predictor plus one
/// normalized gradient step scaled by beta.
///
/// The first frame of a stream has no previous timestamp, so there is no
/// interval to integrate the gyro over; it gets a corrector-only step over
/// the nominal stream period.
pub fn madgwick_step(state: &FilterState, frame: &ImuFrame) -> Result<FilterState> {
    let (dt, integrate_gyro) = match state.last_timestamp {
        None => (NOMINAL_DT, false),
        Some(prev) => {
            let dt = frame.timestamp - prev;
            if dt <= 0.0 {
                return Err(Error::NonMonotonicTimestamp {
                    index: 0,
                    t: frame.timestamp,
                    previous: prev,
                });
            }
            if dt > 1.0 {
                return Err(Error::TimestepTooLarge { index: 0, dt });
            }
            (dt, true)
        }
    };
    let q = state.orientation;
    let (w, x, y, z) = (q.w, q.x, q.y, q.z);
    let [gx, gy, gz] = if integrate_gyro {
        frame.gyro
    } else {
        [0.0; 3]
    };
    // Quaternion rate from body-frame angular velocity: 0.5 * q (x) (0, g).
    let mut rate = [
        0.5 * (-x * gx - y * gy - z * gz),
        0.5 * (w * gx + y * gz - z * gy),
        0.5 * (w * gy - x * gz + z * gx),
        0.5 * (w * gz + x * gy - y * gx),
    ];

    let mut skipped = false;
    if state.beta > 0.0 {
        let [ax, ay, az] = frame.accel;
        let an = (ax * ax + ay * ay + az * az).sqrt();
        if an < 1e-12 {
            skipped = true;
        } else {
            let accel = [ax / an, ay / an, az / an];
            let mag = frame.mag.and_then(|m| {
                let mn = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
                if mn < 1e-12 {
                    return None;
                }
                let mu = [m[0] / mn, m[1] / mn, m[2] / mn];
                Some((mu, field_reference(&q, mu)))
            });
            let s = objective_gradient(&q, accel, mag);
            let sn = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2] + s[3] * s[3]).sqrt();
            if sn > 1e-15 {
                rate[0] -= state.beta * s[0] / sn;
                rate[1] -= state.beta * s[1] / sn;
                rate[2] -= state.beta * s[2] / sn;
                rate[3] -= state.beta * s[3] / sn;
            }
        }
    }

    let next = Quaternion::new(
        w + rate[0] * dt,
        x + rate[1] * dt,
        y + rate[2] * dt,
        z + rate[3] * dt,
    )
    .normalize()?;

    Ok(FilterState {
        orientation: next,
        beta: state.beta,
        last_timestamp: Some(frame.timestamp),
        correction_skipped: skipped,
    })
}

/// Fuse a time-ordered frame sequence into an orientation series. Empty
/// input produces an empty series; an ordering violation reports the
/// offending frame index.
pub fn fuse_series(
    frames: &[ImuFrame],
    beta: f64,
    initial: Quaternion,
) -> Result<QuaternionSeries> {
    let mut state = FilterState::new(initial, beta);
    let mut series = QuaternionSeries::empty("fused");
    for (index, frame) in frames.iter().enumerate() {
        state = madgwick_step(&state, frame).map_err(|e| match e {
            Error::NonMonotonicTimestamp { t, previous, .. } => {
                Error::NonMonotonicTimestamp { index, t, previous }
            }
            Error::TimestepTooLarge { dt, .. } => Error::TimestepTooLarge { index, dt },
            other => other,
        })?;
        series.push(frame.timestamp, state.orientation)?;
    }
    Ok(series)
}

/// Fuse every raw-IMU device of a session into quaternion records: the
/// device's I records (and any prior Q records it carried) are replaced by
/// freshly fused Q records with sequence numbers restarted from zero; all
/// other records pass through. The gain comes from the session header
/// unless overridden.
pub fn fuse_session(
    session: &crate::ingest::SessionFile,
    beta: Option<f64>,
) -> Result<crate::ingest::SessionFile> {
    use crate::ingest::{Payload, RecordKind, StreamRecord};
    let beta = beta.unwrap_or(session.header.beta);
    let raw_devices = session.devices_with(RecordKind::RawImu);
    let mut records: Vec<StreamRecord> = session
        .records
        .iter()
        .filter(|r| {
            r.payload.kind() != RecordKind::RawImu
                && !(r.payload.kind() == RecordKind::Quaternion
                    && raw_devices.contains(&r.device))
        })
        .cloned()
        .collect();
    for device in raw_devices.clone() {
        let frames = session.imu_frames(&device);
        if frames.is_empty() {
            continue;
        }
        let initial = initial_from_accel(frames[0].accel);
        let fused = fuse_series(&frames, beta, initial)?;
        for (seq, &(t, q)) in fused.samples().iter().enumerate() {
            records.push(StreamRecord {
                device: device.clone(),
                seq: seq as u64,
                t_ms: (t * 1000.0).round() as u64,
                payload: Payload::Quaternion(q),
            });
        }
    }
    Ok(crate::ingest::assemble(session.header.clone(), records))
}
