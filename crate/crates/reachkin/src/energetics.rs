//! Metabolic cost of reaching: energy as a function of reach distance and
//! duration, the closed-form energy-optimal duration, and per-task energy
//! aggregation.
//!
//! The model is `e = a m T + b m d^i / T^(j-1)` with the reaching-task
//! constants a = 15, b = 77, i = 1.1, j = 3; energy comes out in joules for
//! mass in kg, distance in meters, and duration in seconds.

use crate::error::{Error, Result};
use crate::sessions::TrialRecord;

/// Reach-energy model constants plus the effective limb mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParams {
    /// Coefficient of the duration term, J/(kg s).
    pub a: f64,
    /// Coefficient of the distance term.
    pub b: f64,
    /// Exponent on reach distance.
    pub distance_exp: f64,
    /// Exponent on reach duration; the distance term divides by
    /// `T^(duration_exp - 1)`. Must exceed 1 so an interior optimum exists.
    pub duration_exp: f64,
    /// Effective limb mass, kg.
    pub mass: f64,
}

impl EnergyParams {
    /// Default effective limb mass when no per-subject value is configured.
    pub const DEFAULT_MASS: f64 = 2.6;

    /// Reaching-task constants with the given limb mass.
    pub fn reaching(mass: f64) -> Result<Self> {
        let p = Self {
            a: 15.0,
            b: 77.0,
            distance_exp: 1.1,
            duration_exp: 3.0,
            mass,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if self.a <= 0.0 || self.b <= 0.0 || self.mass <= 0.0 {
            return Err(Error::domain(format!(
                "energy coefficients and mass must be positive (a={}, b={}, m={})",
                self.a, self.b, self.mass
            )));
        }
        if self.duration_exp <= 1.0 {
            return Err(Error::domain(format!(
                "duration exponent must exceed 1, got {}",
                self.duration_exp
            )));
        }
        Ok(())
    }
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self::reaching(Self::DEFAULT_MASS).unwrap()
    }
}

/// Energy in joules expended to reach distance `d` meters in `T` seconds.
pub fn reach_energy(p: &EnergyParams, d: f64, duration: f64) -> Result<f64> {
    if duration <= 0.0 {
        return Err(Error::domain(format!(
            "reach duration must be positive, got {duration}"
        )));
    }
    if d < 0.0 {
        return Err(Error::domain(format!(
            "reach distance must be non-negative, got {d}"
        )));
    }
    Ok(p.a * p.mass * duration
        + p.b * p.mass * d.powf(p.distance_exp) / duration.powf(p.duration_exp - 1.0))
}

/// Duration minimizing the reach energy for distance `d`:
/// `T* = (b (j-1) d^i / a)^(1/j)`. Mass cancels.
pub fn optimal_duration(p: &EnergyParams, d: f64) -> Result<f64> {
    if d <= 0.0 {
        return Err(Error::domain(format!(
            "reach distance must be positive, got {d}"
        )));
    }
    let j = p.duration_exp;
    Ok((p.b * (j - 1.0) * d.powf(p.distance_exp) / p.a).powf(1.0 / j))
}

/// Per-reach energies of one trial and their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskEnergy {
    pub per_reach: Vec<f64>,
    pub total: f64,
}

/// Evaluate the energy model over every detected reach of a trial, using
/// executed path length for `d`.
pub fn task_energy(trial: &TrialRecord, p: &EnergyParams) -> Result<TaskEnergy> {
    if trial.reaches.is_empty() {
        return Err(Error::Empty {
            what: "trial reach segments",
        });
    }
    let mut per_reach = Vec::with_capacity(trial.reaches.len());
    for seg in &trial.reaches {
        per_reach.push(reach_energy(p, seg.path_length, seg.duration)?);
    }
    let total = per_reach.iter().sum();
    Ok(TaskEnergy { per_reach, total })
}

/// One row of the per-task average energy table.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskEnergyRow {
    pub task: u8,
    pub trials: usize,
    /// Mean per-trial total energy, joules.
    pub mean: f64,
    /// Standard error of the mean; `None` for a single trial.
    pub sem: Option<f64>,
}

/// Average per-trial total energy per task, with standard error of the
/// mean, over a set of trials.
pub fn energy_table(trials: &[TrialRecord], p: &EnergyParams) -> Result<Vec<TaskEnergyRow>> {
    use std::collections::BTreeMap;
    let mut by_task: BTreeMap<u8, Vec<f64>> = BTreeMap::new();
    for trial in trials {
        let e = task_energy(trial, p)?;
        by_task.entry(trial.task.id).or_default().push(e.total);
    }
    Ok(by_task
        .into_iter()
        .map(|(task, totals)| {
            let n = totals.len() as f64;
            let mean = totals.iter().sum::<f64>() / n;
            let sem = if totals.len() > 1 {
                let var = totals.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0);
                Some((var / n).sqrt())
            } else {
                None
            };
            TaskEnergyRow {
                task,
                trials: totals.len(),
                mean,
                sem,
            }
        })
        .collect())
}
