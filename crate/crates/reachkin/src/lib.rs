//! Upper-limb reach assessment toolkit.
//!
//! A library for quantifying reach-and-grasp performance from wearable
//! telemetry: IMU orientation fusion, two-segment arm kinematics,
//! quaternion-series similarity scoring by dynamic time warping, reach
//! energetics, myoelectric grip decoding, fingertip contact detection, and
//! training-progression statistics, plus the session file format, a TCP
//! ingest endpoint, and a synthetic session generator that doubles as the
//! test oracle for the whole pipeline.
//!
//! Every capability has a runnable demonstration under `examples/`; the
//! thin `reachkin` binary exposes the same operations as subcommands over
//! session files.

pub mod alignment;
pub mod contact;
pub mod emg;
pub mod energetics;
pub mod error;
pub mod fusion;
pub mod ingest;
pub mod kinematics;
pub mod quat;
pub mod sessions;

pub use error::{Error, Result};
pub use quat::{EulerAngles, EulerSequence, Quaternion};
