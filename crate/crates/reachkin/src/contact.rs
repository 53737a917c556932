//! Fingertip impulse-to-force differentiation and contact event detection.
//!
//! Impulse logs arrive per fingertip, cumulative by default; differencing
//! over the simulation frame interval recovers force. A debounced threshold
//! detector turns the force trace into contact/release events, each
//! carrying its vibrate-on/off feedback commands. Actuation is out of
//! scope: commands are emitted as records, never driven to hardware.

use crate::error::{Error, Result};

/// Simulation frame rate the impulse logs default to, Hz.
pub const DEFAULT_FRAME_RATE: f64 = 60.0;
/// Contact force threshold, newtons.
pub const DEFAULT_THRESHOLD: f64 = 0.1;
/// Frames a crossing must persist before it counts.
pub const DEFAULT_DEBOUNCE: usize = 2;

/// Whether impulse samples accumulate over time or report per-frame
/// increments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ImpulseMode {
    #[default]
    Cumulative,
    Incremental,
}

/// Timestamped impulse log for one fingertip, N*s.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseSeries {
    pub fingertip: String,
    pub timestamps: Vec<f64>,
    pub values: Vec<f64>,
    pub mode: ImpulseMode,
}

impl ImpulseSeries {
    pub fn new(
        fingertip: impl Into<String>,
        timestamps: Vec<f64>,
        values: Vec<f64>,
        mode: ImpulseMode,
    ) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::domain(format!(
                "impulse series length mismatch: {} timestamps vs {} values",
                timestamps.len(),
                values.len()
            )));
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
        Ok(Self {
            fingertip: fingertip.into(),
            timestamps,
            values,
            mode,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Recover force from an impulse log over frame interval `dt`.
///
/// Cumulative mode differences consecutive samples, yielding one fewer
/// force value than input samples; incremental mode divides each per-frame
/// impulse by `dt`, preserving length.
pub fn force_from_impulse(series: &ImpulseSeries, dt: f64) -> Result<Vec<f64>> {
    if dt <= 0.0 {
        return Err(Error::domain(format!(
            "frame interval must be positive, got {dt}"
        )));
    }
    if series.len() < 2 {
        return Err(Error::TooFewSamples {
            what: "impulse series",
            need: 2,
            got: series.len(),
        });
    }
    Ok(match series.mode {
        ImpulseMode::Cumulative => series
            .values
            .windows(2)
            .map(|w| (w[1] - w[0]) / dt)
            .collect(),
        ImpulseMode::Incremental => series.values.iter().map(|j| j / dt).collect(),
    })
}

/// Feedback actuation command emitted at contact boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackCommand {
    pub time: f64,
    pub fingertip: String,
    pub vibrate: bool,
}

/// One detected contact: span, peak force, delivered impulse.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactEvent {
    pub fingertip: String,
    pub onset: f64,
    pub release: f64,
    pub peak_force: f64,
    /// Force integrated over the contact span, N*s.
    pub impulse: f64,
}

impl ContactEvent {
    /// Vibrate-on at onset, vibrate-off at release.
    pub fn feedback(&self) -> [FeedbackCommand; 2] {
        [
            FeedbackCommand {
                time: self.onset,
                fingertip: self.fingertip.clone(),
                vibrate: true,
            },
            FeedbackCommand {
                time: self.release,
                fingertip: self.fingertip.clone(),
                vibrate: false,
            },
        ]
    }
}

/// Streaming debounced threshold detector. Single-owner per fingertip;
/// distinct fingertips process independently.
#[derive(Debug, Clone)]
pub struct ContactDetector {
    fingertip: String,
    threshold: f64,
    debounce: usize,
    dt: f64,
    start_time: f64,
    frame: usize,
    above_run: usize,
    below_run: usize,
    /// Forces of the not-yet-confirmed onset run.
    onset_buffer: Vec<f64>,
    /// Impulse of the not-yet-confirmed release run; folded back in when
    /// the dip turns out to lie inside the contact.
    pending_release_impulse: f64,
    active: Option<ActiveContact>,
}

#[derive(Debug, Clone)]
struct ActiveContact {
    onset_frame: usize,
    peak: f64,
    impulse: f64,
}

impl ContactDetector {
    pub fn new(
        fingertip: impl Into<String>,
        threshold: f64,
        debounce: usize,
        dt: f64,
        start_time: f64,
    ) -> Result<Self> {
        if threshold <= 0.0 {
            return Err(Error::domain(format!(
                "contact threshold must be positive, got {threshold}"
            )));
        }
        if dt <= 0.0 {
            return Err(Error::domain(format!(
                "frame interval must be positive, got {dt}"
            )));
        }
        Ok(Self {
            fingertip: fingertip.into(),
            threshold,
            debounce: debounce.max(1),
            dt,
            start_time,
            frame: 0,
            above_run: 0,
            below_run: 0,
            onset_buffer: Vec::new(),
            pending_release_impulse: 0.0,
            active: None,
        })
    }

    fn time_of(&self, frame: usize) -> f64 {
        self.start_time + frame as f64 * self.dt
    }

    /// Feed one force frame; a completed event is returned on confirmed
    /// release.
    pub fn push(&mut self, force: f64) -> Option<ContactEvent> {
        let k = self.frame;
        self.frame += 1;
        if force >= self.threshold {
            self.above_run += 1;
            self.below_run = 0;
        } else {
            self.below_run += 1;
            self.above_run = 0;
        }

        if self.active.is_none() {
            if force >= self.threshold {
                self.onset_buffer.push(force);
                if self.above_run >= self.debounce {
                    let peak = self.onset_buffer.iter().cloned().fold(0.0, f64::max);
                    let impulse = self.onset_buffer.iter().sum::<f64>() * self.dt;
                    self.active = Some(ActiveContact {
                        onset_frame: k + 1 - self.debounce,
                        peak,
                        impulse,
                    });
                    self.onset_buffer.clear();
                }
            } else {
                self.onset_buffer.clear();
            }
            return None;
        }

        if force >= self.threshold {
            // A sub-debounce dip stayed inside the contact.
            let pending = std::mem::take(&mut self.pending_release_impulse);
            let active = self.active.as_mut().unwrap();
            active.impulse += pending + force * self.dt;
            active.peak = active.peak.max(force);
            None
        } else {
            self.pending_release_impulse += force * self.dt;
            if self.below_run >= self.debounce {
                let active = self.active.take().unwrap();
                self.pending_release_impulse = 0.0;
                let release_frame = k + 1 - self.debounce;
                Some(ContactEvent {
                    fingertip: self.fingertip.clone(),
                    onset: self.time_of(active.onset_frame),
                    release: self.time_of(release_frame),
                    peak_force: active.peak,
                    impulse: active.impulse,
                })
            } else {
                None
            }
        }
    }

    /// Close out a contact still active at end of stream; the span extends
    /// to the final frame.
    pub fn finish(&mut self) -> Option<ContactEvent> {
        let active = self.active.take()?;
        let impulse = active.impulse + self.pending_release_impulse;
        self.pending_release_impulse = 0.0;
        Some(ContactEvent {
            fingertip: self.fingertip.clone(),
            onset: self.time_of(active.onset_frame),
            release: self.time_of(self.frame),
            peak_force: active.peak,
            impulse,
        })
    }
}

/// Batch contact detection over a force trace starting at `start_time`.
/// Onset requires `debounce` consecutive frames at or above `threshold`;
/// release requires the same below it. Events are disjoint and ordered.
pub fn detect_contacts(
    forces: &[f64],
    threshold: f64,
    debounce: usize,
    dt: f64,
    start_time: f64,
    fingertip: &str,
) -> Result<Vec<ContactEvent>> {
    let mut detector = ContactDetector::new(fingertip, threshold, debounce, dt, start_time)?;
    let mut events = Vec::new();
    for &f in forces {
        if let Some(ev) = detector.push(f) {
            events.push(ev);
        }
    }
    if let Some(ev) = detector.finish() {
        events.push(ev);
    }
    Ok(events)
}
