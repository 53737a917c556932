//! Task model, study-phase data model, completion-time scoring, paired
//! significance testing, and training/washout progression reports.

use std::collections::BTreeMap;

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::alignment::{similarity_cost, AlignOptions};
use crate::contact::ImpulseSeries;
use crate::error::{Error, Result};
use crate::kinematics::{JointSeries, ReachSegment};

/// Task parameterization: relative 2-D relocation direction and whether the
/// end effector must rotate. Diagonal relocation is +1, vertical -1, same
/// level 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaskSpec {
    /// Task number, 1 through 4.
    pub id: u8,
    pub delta_d: i8,
    pub delta_theta: u8,
}

/// The four canonical tasks: T1 (1, 0), T2 (1, 1), T3 (-1, 0), T4 (0, 0).
pub fn task_table() -> [TaskSpec; 4] {
    [
        TaskSpec { id: 1, delta_d: 1, delta_theta: 0 },
        TaskSpec { id: 2, delta_d: 1, delta_theta: 1 },
        TaskSpec { id: 3, delta_d: -1, delta_theta: 0 },
        TaskSpec { id: 4, delta_d: 0, delta_theta: 0 },
    ]
}

impl TaskSpec {
    pub fn by_id(id: u8) -> Result<TaskSpec> {
        task_table()
            .into_iter()
            .find(|t| t.id == id)
            .ok_or(Error::MissingTasks(vec![id]))
    }

    /// Whether this spec matches the canonical table entry for its id.
    pub fn is_canonical(&self) -> bool {
        TaskSpec::by_id(self.id).map(|t| t == *self).unwrap_or(false)
    }
}

/// Study phases, in protocol order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    InitialEval,
    Training,
    Testing,
    Washout,
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::InitialEval => "initial-eval",
            Phase::Training => "training",
            Phase::Testing => "testing",
            Phase::Washout => "washout",
        }
    }

    pub fn parse(s: &str) -> Option<Phase> {
        [
            Phase::InitialEval,
            Phase::Training,
            Phase::Testing,
            Phase::Washout,
        ]
        .into_iter()
        .find(|p| p.name() == s)
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Outcome-measure system a trial ran on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum System {
    Crt,
    Pham,
    HoloPham,
}

impl System {
    pub const ALL: [System; 3] = [System::Crt, System::Pham, System::HoloPham];

    pub fn name(&self) -> &'static str {
        match self {
            System::Crt => "CRT",
            System::Pham => "PHAM",
            System::HoloPham => "HoloPHAM",
        }
    }

    pub fn parse(s: &str) -> Option<System> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }
}

impl std::fmt::Display for System {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Raw EMG attached to a trial.
#[derive(Debug, Clone, PartialEq)]
pub struct EmgRecording {
    pub start_time: f64,
    pub rate_hz: f64,
    /// One amplitude sequence per channel.
    pub channels: Vec<Vec<f64>>,
}

/// One task execution.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub subject: String,
    pub task: TaskSpec,
    pub phase: Phase,
    /// Calendar day index from the first training session.
    pub day: u32,
    pub system: System,
    /// Seconds; must be positive.
    pub completion_time: f64,
    pub joints: JointSeries,
    pub reaches: Vec<ReachSegment>,
    pub emg: Option<EmgRecording>,
    pub impulses: Vec<ImpulseSeries>,
}

impl TrialRecord {
    pub fn new(
        subject: impl Into<String>,
        task: TaskSpec,
        phase: Phase,
        day: u32,
        system: System,
        completion_time: f64,
    ) -> Result<Self> {
        if completion_time <= 0.0 {
            return Err(Error::domain(format!(
                "completion time must be positive, got {completion_time}"
            )));
        }
        Ok(Self {
            subject: subject.into(),
            task,
            phase,
            day,
            system,
            completion_time,
            joints: JointSeries::default(),
            reaches: Vec::new(),
            emg: None,
            impulses: Vec::new(),
        })
    }
}

/// Protocol-consistency findings; informative, never fatal.
#[derive(Debug, Clone, PartialEq)]
pub enum ProtocolFlag {
    /// Training days span more than the 10-day protocol.
    TrainingSpanExceeded { span_days: u32 },
    /// More than a 2-day gap between consecutive training sessions.
    TrainingGap { from_day: u32, to_day: u32 },
    /// Washout measured fewer than 5 days after the last test day.
    WashoutTooEarly { gap_days: i64 },
}

/// Check training-day span, session gaps, and washout spacing.
pub fn validate_protocol(trials: &[TrialRecord]) -> Vec<ProtocolFlag> {
    let mut flags = Vec::new();
    let mut training_days: Vec<u32> = trials
        .iter()
        .filter(|t| t.phase == Phase::Training)
        .map(|t| t.day)
        .collect();
    training_days.sort_unstable();
    training_days.dedup();
    if let (Some(&first), Some(&last)) = (training_days.first(), training_days.last()) {
        let span = last - first + 1;
        if span > 10 {
            flags.push(ProtocolFlag::TrainingSpanExceeded { span_days: span });
        }
        for w in training_days.windows(2) {
            if w[1] - w[0] > 3 {
                // More than two idle days between sessions.
                flags.push(ProtocolFlag::TrainingGap {
                    from_day: w[0],
                    to_day: w[1],
                });
            }
        }
    }
    let last_test = trials
        .iter()
        .filter(|t| t.phase == Phase::Testing)
        .map(|t| t.day)
        .max();
    let first_washout = trials
        .iter()
        .filter(|t| t.phase == Phase::Washout)
        .map(|t| t.day)
        .min();
    if let (Some(test), Some(washout)) = (last_test, first_washout) {
        let gap = washout as i64 - test as i64;
        if gap < 5 {
            flags.push(ProtocolFlag::WashoutTooEarly { gap_days: gap });
        }
    }
    flags
}

/// Percentage reduction from `pre` to `post`: `100 (pre - post) / pre`.
/// Negative values represent regression.
pub fn percent_reduction(pre_mean: f64, post_mean: f64) -> Result<f64> {
    if pre_mean <= 0.0 {
        return Err(Error::domain(format!(
            "pre-phase mean must be positive, got {pre_mean}"
        )));
    }
    Ok(100.0 * (pre_mean - post_mean) / pre_mean)
}

/// Render a percentage with two decimals, trailing zeros trimmed, matching
/// the report convention (22.22, 23.5, 28.5).
pub fn format_percent(value: f64) -> String {
    let s = format!("{value:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// Paired t-test outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided p-value.
    pub p: f64,
    /// Zero-variance differences make the statistic degenerate.
    pub degenerate: bool,
}

impl TTest {
    /// Significance stars per the reporting convention: `**` at p < 0.01,
    /// `*` at p < 0.05, empty otherwise.
    pub fn stars(&self) -> &'static str {
        if self.p < 0.01 {
            "**"
        } else if self.p < 0.05 {
            "*"
        } else {
            ""
        }
    }
}

/// Two-sided paired Student's t-test on `pre - post` differences.
pub fn paired_ttest(pre: &[f64], post: &[f64]) -> Result<TTest> {
    if pre.len() != post.len() {
        return Err(Error::DimensionMismatch {
            expected: pre.len(),
            got: post.len(),
        });
    }
    if pre.len() < 2 {
        return Err(Error::TooFewSamples {
            what: "paired samples",
            need: 2,
            got: pre.len(),
        });
    }
    let n = pre.len() as f64;
    let diffs: Vec<f64> = pre.iter().zip(post).map(|(a, b)| a - b).collect();
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let df = n - 1.0;
    if var == 0.0 {
        // Identical differences: no dispersion to test against.
        return Ok(if mean == 0.0 {
            TTest {
                t: 0.0,
                df,
                p: 1.0,
                degenerate: true,
            }
        } else {
            TTest {
                t: f64::INFINITY.copysign(mean),
                df,
                p: 0.0,
                degenerate: true,
            }
        });
    }
    let t = mean / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(TTest {
        t,
        df,
        p,
        degenerate: false,
    })
}

/// Wilcoxon signed-rank outcome (advisory alternative to the t-test).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilcoxonTest {
    /// Smaller of the signed-rank sums.
    pub w: f64,
    /// Two-sided p-value (exact for up to 25 nonzero pairs).
    pub p: f64,
    /// Nonzero-difference pairs actually ranked.
    pub n: usize,
}

/// Exact two-sided Wilcoxon signed-rank test on `pre - post`, with zero
/// differences dropped and midranks for ties. Returns `None` when no
/// nonzero differences remain.
pub fn wilcoxon_signed_rank(pre: &[f64], post: &[f64]) -> Option<WilcoxonTest> {
    let mut diffs: Vec<f64> = pre
        .iter()
        .zip(post)
        .map(|(a, b)| a - b)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.is_empty() {
        return None;
    }
    let n = diffs.len();
    diffs.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    // Midranks, doubled so everything stays integral under ties at .5.
    let mut ranks2 = vec![0u64; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && diffs[j + 1].abs() == diffs[i].abs() {
            j += 1;
        }
        // ranks i+1 ..= j+1 averaged, times two.
        let sum2: u64 = ((i + 1 + j + 1) * (j - i + 1)) as u64;
        let mid2 = sum2 / (j - i + 1) as u64;
        for r in ranks2.iter_mut().take(j + 1).skip(i) {
            *r = mid2;
        }
        i = j + 1;
    }
    let w_plus2: u64 = diffs
        .iter()
        .zip(&ranks2)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, &r)| r)
        .sum();
    let total2: u64 = ranks2.iter().sum();
    let w_minus2 = total2 - w_plus2;
    let w2 = w_plus2.min(w_minus2);

    let p = if n <= 25 {
        // Exact null distribution of 2*W+ by dynamic programming over sign
        // assignments.
        let mut dist = vec![0.0f64; (total2 + 1) as usize];
        dist[0] = 1.0;
        let mut upper = 0usize;
        for &r in &ranks2 {
            let r = r as usize;
            upper += r;
            for s in (0..=upper).rev() {
                if s >= r {
                    dist[s] = (dist[s] + dist[s - r]) / 2.0;
                } else {
                    dist[s] /= 2.0;
                }
            }
        }
        let low: f64 = dist.iter().take(w2 as usize + 1).sum();
        let high: f64 = dist.iter().skip((total2 - w2) as usize).sum();
        (low + high).min(1.0)
    } else {
        // Normal approximation with continuity correction.
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let sd = (nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0).sqrt();
        let w = w2 as f64 / 2.0;
        let z = (w - mean + 0.5) / sd;
        let normal = statrs::distribution::Normal::new(0.0, 1.0).unwrap();
        (2.0 * normal.cdf(z)).min(1.0)
    };

    Some(WilcoxonTest {
        w: w2 as f64 / 2.0,
        p,
        n,
    })
}

/// Mean / SEM summary of one phase's completion times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseStats {
    pub n: usize,
    pub mean: f64,
    /// Standard error of the mean; `None` for a single trial.
    pub sem: Option<f64>,
}

fn phase_stats(mut times: Vec<f64>) -> PhaseStats {
    times.sort_by(f64::total_cmp);
    let n = times.len();
    let mean = times.iter().sum::<f64>() / n as f64;
    let sem = if n > 1 {
        let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        Some((var / n as f64).sqrt())
    } else {
        None
    };
    PhaseStats { n, mean, sem }
}

/// Pre/post completion-time outcome for one system.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemOutcome {
    pub system: System,
    pub pre: PhaseStats,
    pub post: PhaseStats,
    pub reduction_pct: f64,
    /// Paired t over per-(subject, task) phase means; absent when fewer
    /// than two pairs exist.
    pub ttest: Option<TTest>,
    /// Rank-based alternative, advisory, reported from six pairs up.
    pub wilcoxon: Option<WilcoxonTest>,
}

impl SystemOutcome {
    pub fn stars(&self) -> &'static str {
        self.ttest.map(|t| t.stars()).unwrap_or("")
    }
}

/// Completion-time section of a session report.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CompletionReport {
    pub systems: Vec<SystemOutcome>,
}

/// Score pre- vs post-training completion times per system. Pre is the
/// initial evaluation phase, post is the testing phase; the paired test
/// pairs phase means per (subject, task).
pub fn score_outcomes(trials: &[TrialRecord]) -> Result<CompletionReport> {
    let mut systems: Vec<System> = trials.iter().map(|t| t.system).collect();
    systems.sort();
    systems.dedup();
    if systems.is_empty() {
        return Err(Error::Empty { what: "trials" });
    }
    let mut outcomes = Vec::new();
    for system in systems {
        let pre_times: Vec<f64> = trials
            .iter()
            .filter(|t| t.system == system && t.phase == Phase::InitialEval)
            .map(|t| t.completion_time)
            .collect();
        let post_times: Vec<f64> = trials
            .iter()
            .filter(|t| t.system == system && t.phase == Phase::Testing)
            .map(|t| t.completion_time)
            .collect();
        if pre_times.is_empty() {
            return Err(Error::MissingPhase {
                system: system.name().to_string(),
                phase: Phase::InitialEval.name().to_string(),
            });
        }
        if post_times.is_empty() {
            return Err(Error::MissingPhase {
                system: system.name().to_string(),
                phase: Phase::Testing.name().to_string(),
            });
        }
        let pre = phase_stats(pre_times);
        let post = phase_stats(post_times);

        // Pair phase means per (subject, task).
        let mut cells: BTreeMap<(String, u8), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for t in trials.iter().filter(|t| t.system == system) {
            let cell = cells
                .entry((t.subject.clone(), t.task.id))
                .or_default();
            match t.phase {
                Phase::InitialEval => cell.0.push(t.completion_time),
                Phase::Testing => cell.1.push(t.completion_time),
                _ => {}
            }
        }
        let mut paired_pre = Vec::new();
        let mut paired_post = Vec::new();
        for (_, (a, b)) in cells {
            if !a.is_empty() && !b.is_empty() {
                paired_pre.push(phase_stats(a).mean);
                paired_post.push(phase_stats(b).mean);
            }
        }
        let ttest = if paired_pre.len() >= 2 {
            Some(paired_ttest(&paired_pre, &paired_post)?)
        } else {
            None
        };
        let wilcoxon = if paired_pre.len() >= 6 {
            wilcoxon_signed_rank(&paired_pre, &paired_post)
        } else {
            None
        };
        outcomes.push(SystemOutcome {
            system,
            pre,
            post,
            reduction_pct: percent_reduction(pre.mean, post.mean)?,
            ttest,
            wilcoxon,
        });
    }
    Ok(CompletionReport { systems: outcomes })
}

/// One day's (or the washout's) cost aggregate for a task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DayCost {
    pub day: u32,
    pub mean: f64,
    /// Sample variance of the per-trial costs (zero for one trial).
    pub variance: f64,
    pub n: usize,
}

fn day_cost(day: u32, mut costs: Vec<f64>) -> DayCost {
    costs.sort_by(f64::total_cmp);
    let n = costs.len();
    let mean = costs.iter().sum::<f64>() / n as f64;
    let variance = if n > 1 {
        costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)
    } else {
        0.0
    };
    DayCost {
        day,
        mean,
        variance,
        n,
    }
}

/// Training-phase similarity-cost trajectory of one task, with the washout
/// point appended.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskProgression {
    pub task: u8,
    pub daily: Vec<DayCost>,
    pub washout: Option<DayCost>,
    /// Motor retention: washout cost regressed above the best training
    /// cost but stayed below day one.
    pub retention: Option<bool>,
}

/// Progression section of a session report.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProgressionReport {
    pub tasks: Vec<TaskProgression>,
}

/// Per-day similarity cost of training trials against each task's baseline
/// joint dynamics, with the washout point and retention flag.
pub fn progression_report(
    trials: &[TrialRecord],
    baselines: &BTreeMap<u8, JointSeries>,
    opts: &AlignOptions,
) -> Result<ProgressionReport> {
    let mut tasks: Vec<u8> = trials.iter().map(|t| t.task.id).collect();
    tasks.sort_unstable();
    tasks.dedup();
    if tasks.is_empty() {
        return Err(Error::Empty { what: "trials" });
    }
    for task in &tasks {
        if !baselines.contains_key(task) {
            return Err(Error::MissingBaseline { task: *task });
        }
    }
    if !trials.iter().any(|t| t.phase == Phase::Training) {
        return Err(Error::MissingPhase {
            system: "(any)".to_string(),
            phase: Phase::Training.name().to_string(),
        });
    }

    let mut report = ProgressionReport::default();
    for task in tasks {
        let baseline = &baselines[&task];
        let mut by_day: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        let mut washout_costs: Vec<f64> = Vec::new();
        for t in trials.iter().filter(|t| t.task.id == task) {
            match t.phase {
                Phase::Training => {
                    let cost = similarity_cost(&t.joints, baseline, opts)?.total;
                    by_day.entry(t.day).or_default().push(cost);
                }
                Phase::Washout => {
                    washout_costs.push(similarity_cost(&t.joints, baseline, opts)?.total);
                }
                _ => {}
            }
        }
        let daily: Vec<DayCost> = by_day
            .into_iter()
            .map(|(day, costs)| day_cost(day, costs))
            .collect();
        let washout = if washout_costs.is_empty() {
            None
        } else {
            let day = trials
                .iter()
                .filter(|t| t.task.id == task && t.phase == Phase::Washout)
                .map(|t| t.day)
                .max()
                .unwrap_or(0);
            Some(day_cost(day, washout_costs))
        };
        let retention = match (&washout, daily.first()) {
            (Some(w), Some(first)) if !daily.is_empty() => {
                let best = daily
                    .iter()
                    .map(|d| d.mean)
                    .fold(f64::INFINITY, f64::min);
                Some(w.mean > best && w.mean < first.mean)
            }
            _ => None,
        };
        report.tasks.push(TaskProgression {
            task,
            daily,
            washout,
            retention,
        });
    }
    Ok(report)
}

/// Aggregated session statistics: completion-time outcomes and the
/// training-progression trajectories.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SessionReport {
    pub completion: Option<CompletionReport>,
    pub progression: Option<ProgressionReport>,
}
