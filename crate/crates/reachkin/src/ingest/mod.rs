//! Session data formats, streaming telemetry ingest, and the synthetic
//! session generator.
//!
//! The wire and file grammar is the `reachkin/1` text line protocol:
//! `#`-prefixed header key/value lines followed by one record per line,
//! `KIND device seq t_ms payload...`, ending with the literal terminator
//! line `M end session`. Quaternions stream in sensor-to-world convention,
//! scalar first. Field-by-field documentation lives in `docs/formats.md`.

pub mod format;
pub mod server;
pub mod synth;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::kinematics::ArmModel;
use crate::quat::Quaternion;
use crate::sessions::{Phase, System};

/// Format version written by this crate.
pub const FORMAT_VERSION: &str = "reachkin/1";
/// Major version this reader accepts.
pub const SUPPORTED_MAJOR: u32 = 1;
/// Terminator line closing a session on both the wire and in files.
pub const END_MARKER: &str = "M end session";

/// Record kinds carried by the line protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RecordKind {
    /// Absolute orientation quaternion.
    Quaternion,
    /// Raw 9-axis IMU frame.
    RawImu,
    /// 8-channel EMG sample.
    Emg,
    /// Per-fingertip impulse sample.
    Impulse,
    /// Marker / event tag.
    Marker,
}

impl RecordKind {
    pub fn tag(&self) -> char {
        match self {
            RecordKind::Quaternion => 'Q',
            RecordKind::RawImu => 'I',
            RecordKind::Emg => 'E',
            RecordKind::Impulse => 'J',
            RecordKind::Marker => 'M',
        }
    }

    pub fn from_tag(tag: &str) -> Option<RecordKind> {
        match tag {
            "Q" => Some(RecordKind::Quaternion),
            "I" => Some(RecordKind::RawImu),
            "E" => Some(RecordKind::Emg),
            "J" => Some(RecordKind::Impulse),
            "M" => Some(RecordKind::Marker),
            _ => None,
        }
    }
}

/// Per-kind record payload. Arities are fixed: Q carries 4 values, I
/// carries 9 (gyro, accel, mag) with an optional trailing temperature, E
/// carries 8, J one value per fingertip, M a free-form tag.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Quaternion(Quaternion),
    RawImu {
        /// rad/s.
        gyro: [f64; 3],
        /// g.
        accel: [f64; 3],
        /// Normalized field; an all-zero triple on the wire means absent.
        mag: Option<[f64; 3]>,
        /// Optional die temperature, degrees C; metadata only.
        temperature: Option<f64>,
    },
    Emg([f64; 8]),
    Impulse(Vec<f64>),
    Marker(String),
}

impl Payload {
    pub fn kind(&self) -> RecordKind {
        match self {
            Payload::Quaternion(_) => RecordKind::Quaternion,
            Payload::RawImu { .. } => RecordKind::RawImu,
            Payload::Emg(_) => RecordKind::Emg,
            Payload::Impulse(_) => RecordKind::Impulse,
            Payload::Marker(_) => RecordKind::Marker,
        }
    }
}

/// One telemetry record. Timestamps are sender-clock milliseconds; the
/// assembler never re-clocks, it only orders.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamRecord {
    pub device: String,
    /// Monotone per device, unique.
    pub seq: u64,
    pub t_ms: u64,
    pub payload: Payload,
}

/// Session metadata carried in the `#` header block.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionHeader {
    pub version: String,
    pub subject: String,
    pub phase: Option<Phase>,
    pub day: Option<u32>,
    pub system: Option<System>,
    pub task: Option<u8>,
    pub arm: ArmModel,
    /// Effective limb mass, kg.
    pub limb_mass: f64,
    /// Mass of manipulated objects relative to the virtual limb.
    pub object_mass_ratio: f64,
    /// Observed visual latency range of the display path, milliseconds.
    /// Metadata only.
    pub latency_ms: (u32, u32),
    /// Fusion gain used (or to be used) for this stream.
    pub beta: f64,
    pub seed: Option<u64>,
    /// Dummy-weight loading flag for the recording session.
    pub loaded: bool,
    /// Unrecognized header keys, preserved verbatim.
    pub extra: BTreeMap<String, String>,
}

impl Default for SessionHeader {
    fn default() -> Self {
        Self {
            version: FORMAT_VERSION.to_string(),
            subject: "anon".to_string(),
            phase: None,
            day: None,
            system: None,
            task: None,
            arm: ArmModel::default(),
            limb_mass: 2.6,
            object_mass_ratio: 0.1,
            latency_ms: (500, 800),
            beta: crate::fusion::DEFAULT_BETA,
            seed: None,
            loaded: false,
            extra: BTreeMap::new(),
        }
    }
}

/// A missing per-device sequence number discovered during assembly.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct GapRecord {
    pub device: String,
    pub seq: u64,
}

/// An assembled session: validated header, canonically ordered records,
/// and the per-device gap list.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionFile {
    pub header: SessionHeader,
    /// Sorted by (t_ms, device, seq); unique per (device, seq).
    pub records: Vec<StreamRecord>,
    pub gaps: Vec<GapRecord>,
    /// Records dropped because their (device, seq) was already present.
    pub duplicates: u64,
}

impl SessionFile {
    pub fn new(header: SessionHeader) -> Self {
        Self {
            header,
            records: Vec::new(),
            gaps: Vec::new(),
            duplicates: 0,
        }
    }

    /// Records of one kind for one device, in canonical order.
    pub fn device_records(&self, kind: RecordKind, device: &str) -> Vec<&StreamRecord> {
        self.records
            .iter()
            .filter(|r| r.payload.kind() == kind && r.device == device)
            .collect()
    }

    /// Devices that carry at least one record of `kind`, sorted.
    pub fn devices_with(&self, kind: RecordKind) -> Vec<String> {
        let mut names: Vec<String> = self
            .records
            .iter()
            .filter(|r| r.payload.kind() == kind)
            .map(|r| r.device.clone())
            .collect();
        names.sort();
        names.dedup();
        names
    }

    /// Quaternion series of one device, timestamps in seconds.
    pub fn quaternion_series(&self, device: &str) -> Result<crate::alignment::QuaternionSeries> {
        let mut series = crate::alignment::QuaternionSeries::empty(device);
        for rec in self.device_records(RecordKind::Quaternion, device) {
            if let Payload::Quaternion(q) = &rec.payload {
                series.push(rec.t_ms as f64 / 1000.0, *q)?;
            }
        }
        Ok(series)
    }

    /// Joint-state series from the three named orientation devices.
    pub fn joint_series(
        &self,
        chest: &str,
        upper: &str,
        forearm: &str,
    ) -> Result<crate::kinematics::JointSeries> {
        let qc = self.quaternion_series(chest)?;
        let qu = self.quaternion_series(upper)?;
        let qf = self.quaternion_series(forearm)?;
        crate::kinematics::joint_series(&qc, &qu, &qf)
    }

    /// Raw IMU frames of one device, timestamps in seconds.
    pub fn imu_frames(&self, device: &str) -> Vec<crate::fusion::ImuFrame> {
        self.device_records(RecordKind::RawImu, device)
            .into_iter()
            .filter_map(|rec| match &rec.payload {
                Payload::RawImu {
                    gyro, accel, mag, ..
                } => Some(crate::fusion::ImuFrame {
                    timestamp: rec.t_ms as f64 / 1000.0,
                    gyro: *gyro,
                    accel: *accel,
                    mag: *mag,
                }),
                _ => None,
            })
            .collect()
    }
}

/// Canonicalize a record multiset into a session: duplicate (device, seq)
/// pairs are dropped (first occurrence wins), records sort by
/// (t_ms, device, seq), and missing per-device sequence numbers become the
/// gap list. File and stream ingestion both funnel through here, which is
/// what makes them equivalent.
pub fn assemble(header: SessionHeader, records: Vec<StreamRecord>) -> SessionFile {
    let mut seen: BTreeMap<(String, u64), ()> = BTreeMap::new();
    let mut unique = Vec::with_capacity(records.len());
    let mut duplicates = 0u64;
    for rec in records {
        let key = (rec.device.clone(), rec.seq);
        if seen.contains_key(&key) {
            duplicates += 1;
            continue;
        }
        seen.insert(key, ());
        unique.push(rec);
    }
    unique.sort_by(|a, b| {
        (a.t_ms, &a.device, a.seq).cmp(&(b.t_ms, &b.device, b.seq))
    });

    let mut per_device: BTreeMap<&str, Vec<u64>> = BTreeMap::new();
    for rec in &unique {
        per_device.entry(&rec.device).or_default().push(rec.seq);
    }
    let mut gaps = Vec::new();
    for (device, mut seqs) in per_device {
        seqs.sort_unstable();
        for w in seqs.windows(2) {
            for missing in w[0] + 1..w[1] {
                gaps.push(GapRecord {
                    device: device.to_string(),
                    seq: missing,
                });
            }
        }
    }
    gaps.sort();

    SessionFile {
        header,
        records: unique,
        gaps,
        duplicates,
    }
}

/// Parse a `reachkin/<major>[.<minor>]` version string, accepting any minor
/// within the supported major.
pub fn check_version(version: &str) -> Result<()> {
    let unsupported = || Error::UnsupportedVersion {
        found: version.to_string(),
        supported: format!("reachkin/{SUPPORTED_MAJOR}.x"),
    };
    let rest = version.strip_prefix("reachkin/").ok_or_else(unsupported)?;
    let major_str = rest.split('.').next().unwrap_or(rest);
    let major: u32 = major_str.parse().map_err(|_| unsupported())?;
    if major != SUPPORTED_MAJOR {
        return Err(unsupported());
    }
    Ok(())
}
