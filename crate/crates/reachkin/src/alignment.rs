//! Dynamic time warping over quaternion series.
//!
//! Exact DTW (full dynamic program), a rolling cost-only variant for long
//! series, and the multiresolution FastDTW approximation with a radius-
//! limited search band. Warp-path cost is the sum of pointwise quaternion
//! distances along the path; lower cost means more similar joint dynamics,
//! and the cost of a series against itself is exactly zero.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::kinematics::{JointSeries, ELBOW_AXIS};
use crate::quat::Quaternion;

/// Timestamped unit-quaternion trajectory for one joint or segment.
#[derive(Debug, Clone, PartialEq)]
pub struct QuaternionSeries {
    label: String,
    samples: Vec<(f64, Quaternion)>,
}

impl QuaternionSeries {
    pub fn empty(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            samples: Vec::new(),
        }
    }

    /// Build from validated samples: strictly increasing timestamps, unit
    /// quaternions.
    pub fn new(label: impl Into<String>, samples: Vec<(f64, Quaternion)>) -> Result<Self> {
        let mut series = Self::empty(label);
        for (t, q) in samples {
            series.push(t, q)?;
        }
        Ok(series)
    }

    /// Uniformly sampled series starting at `t0` with period `dt`.
    pub fn from_quats(
        label: impl Into<String>,
        t0: f64,
        dt: f64,
        quats: impl IntoIterator<Item = Quaternion>,
    ) -> Self {
        let samples = quats
            .into_iter()
            .enumerate()
            .map(|(k, q)| (t0 + k as f64 * dt, q.canonicalized()))
            .collect();
        Self {
            label: label.into(),
            samples,
        }
    }

    pub fn push(&mut self, t: f64, q: Quaternion) -> Result<()> {
        if let Some(&(prev, _)) = self.samples.last() {
            if t <= prev {
                return Err(Error::NonMonotonicTimestamp {
                    index: self.samples.len(),
                    t,
                    previous: prev,
                });
            }
        }
        if !q.is_unit(1e-6) {
            return Err(Error::InvalidRotation { norm: q.norm() });
        }
        self.samples.push((t, q.canonicalized()));
        Ok(())
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[(f64, Quaternion)] {
        &self.samples
    }

    pub fn quats(&self) -> Vec<Quaternion> {
        self.samples.iter().map(|&(_, q)| q).collect()
    }

    /// Slerp lookup at an arbitrary time within the series span; `None`
    /// outside it.
    pub fn sample_at(&self, t: f64) -> Option<Quaternion> {
        let first = self.samples.first()?;
        let last = self.samples.last()?;
        if t < first.0 || t > last.0 {
            return None;
        }
        let idx = self
            .samples
            .partition_point(|&(ts, _)| ts <= t)
            .saturating_sub(1);
        let (ta, qa) = self.samples[idx];
        if idx + 1 >= self.samples.len() {
            return Some(qa);
        }
        let (tb, qb) = self.samples[idx + 1];
        let u = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
        Some(qa.slerp(&qb, u))
    }

    /// Slerp-resample onto a uniform grid over the series' own time span.
    /// Series with fewer than two samples are returned unchanged.
    pub fn resampled(&self, hz: f64) -> Self {
        if self.samples.len() < 2 || hz <= 0.0 {
            return self.clone();
        }
        let dt = 1.0 / hz;
        let t0 = self.samples[0].0;
        let t1 = self.samples[self.samples.len() - 1].0;
        let steps = ((t1 - t0) / dt).floor() as usize;
        let mut out = Vec::with_capacity(steps + 1);
        let mut cursor = 0usize;
        for k in 0..=steps {
            let t = t0 + k as f64 * dt;
            while cursor + 1 < self.samples.len() && self.samples[cursor + 1].0 < t {
                cursor += 1;
            }
            let (ta, qa) = self.samples[cursor];
            let q = if cursor + 1 < self.samples.len() {
                let (tb, qb) = self.samples[cursor + 1];
                let u = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
                qa.slerp(&qb, u)
            } else {
                qa
            };
            out.push((t, q));
        }
        Self {
            label: self.label.clone(),
            samples: out,
        }
    }
}

/// Pointwise distance between aligned samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistanceMetric {
    /// Sign-invariant Euclidean distance on the 4-vector representatives.
    #[default]
    SignInvariantEuclidean,
    /// Geodesic rotation angle in radians.
    GeodesicAngle,
}

impl DistanceMetric {
    pub fn eval(&self, a: &Quaternion, b: &Quaternion) -> f64 {
        match self {
            DistanceMetric::SignInvariantEuclidean => Quaternion::dist(a, b),
            DistanceMetric::GeodesicAngle => Quaternion::geodesic_angle(a, b),
        }
    }
}

/// Monotone index-pair alignment of two series with its summed cost.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpPath {
    /// 0-based `(i, j)` pairs from `(0, 0)` to `(n-1, m-1)`.
    pub pairs: Vec<(usize, usize)>,
    pub cost: f64,
}

impl WarpPath {
    /// Number of path elements K.
    pub fn k(&self) -> usize {
        self.pairs.len()
    }

    /// Boundary, monotonicity, and unit-step continuity against series
    /// lengths `n` and `m`.
    pub fn is_valid(&self, n: usize, m: usize) -> bool {
        if self.pairs.first() != Some(&(0, 0)) || self.pairs.last() != Some(&(n - 1, m - 1)) {
            return false;
        }
        self.pairs.windows(2).all(|w| {
            let (i0, j0) = w[0];
            let (i1, j1) = w[1];
            let di = i1 as i64 - i0 as i64;
            let dj = j1 as i64 - j0 as i64;
            (0..=1).contains(&di) && (0..=1).contains(&dj) && di + dj >= 1
        })
    }

    /// Re-evaluate the path cost under `metric`.
    pub fn evaluate(&self, a: &[Quaternion], b: &[Quaternion], metric: DistanceMetric) -> f64 {
        self.pairs
            .iter()
            .map(|&(i, j)| metric.eval(&a[i], &b[j]))
            .sum()
    }
}

/// Globally minimal warp path between two non-empty series under the
/// default sign-invariant metric. Ties break deterministically, preferring
/// the diagonal step, then the i-advance.
pub fn dtw(a: &QuaternionSeries, b: &QuaternionSeries) -> Result<WarpPath> {
    dtw_with(a, b, DistanceMetric::default())
}

pub fn dtw_with(
    a: &QuaternionSeries,
    b: &QuaternionSeries,
    metric: DistanceMetric,
) -> Result<WarpPath> {
    let qa = a.quats();
    let qb = b.quats();
    dtw_quats(&qa, &qb, metric)
}

fn check_nonempty(n: usize, m: usize) -> Result<()> {
    if n == 0 || m == 0 {
        return Err(Error::Empty {
            what: "DTW input series",
        });
    }
    Ok(())
}

pub(crate) fn dtw_quats(
    a: &[Quaternion],
    b: &[Quaternion],
    metric: DistanceMetric,
) -> Result<WarpPath> {
    check_nonempty(a.len(), b.len())?;
    let window: Vec<(usize, usize)> = (0..a.len()).map(|_| (0, b.len() - 1)).collect();
    dtw_banded(a, b, &window, metric)
}

/// Accumulated-cost dynamic program restricted to per-row inclusive column
/// ranges, with traceback. The window must contain both corners and allow a
/// monotone path.
fn dtw_banded(
    a: &[Quaternion],
    b: &[Quaternion],
    window: &[(usize, usize)],
    metric: DistanceMetric,
) -> Result<WarpPath> {
    let n = a.len();
    let m = b.len();
    debug_assert_eq!(window.len(), n);
    debug_assert!(window[0].0 == 0 && window[n - 1].1 == m - 1);

    let offsets: Vec<usize> = window
        .iter()
        .scan(0usize, |acc, &(lo, hi)| {
            let start = *acc;
            *acc += hi - lo + 1;
            Some(start)
        })
        .collect();
    let total: usize = offsets[n - 1] + (window[n - 1].1 - window[n - 1].0 + 1);
    let mut acc = vec![f64::INFINITY; total];

    let cell = |i: usize, j: usize, acc: &[f64]| -> f64 {
        let (lo, hi) = window[i];
        if j < lo || j > hi {
            f64::INFINITY
        } else {
            acc[offsets[i] + (j - lo)]
        }
    };

    for i in 0..n {
        let (lo, hi) = window[i];
        for j in lo..=hi {
            let d = metric.eval(&a[i], &b[j]);
            let prev = if i == 0 && j == 0 {
                0.0
            } else {
                let diag = if i > 0 && j > 0 {
                    cell(i - 1, j - 1, &acc)
                } else {
                    f64::INFINITY
                };
                let up = if i > 0 { cell(i - 1, j, &acc) } else { f64::INFINITY };
                let left = if j > 0 { cell(i, j - 1, &acc) } else { f64::INFINITY };
                diag.min(up).min(left)
            };
            acc[offsets[i] + (j - lo)] = d + prev;
        }
    }

    let final_cost = cell(n - 1, m - 1, &acc);
    if !final_cost.is_finite() {
        return Err(Error::domain("search window admits no valid warp path"));
    }

    // Traceback; on ties prefer the diagonal predecessor, then the i-advance.
    let mut pairs = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n - 1, m - 1);
    pairs.push((i, j));
    while i > 0 || j > 0 {
        let diag = if i > 0 && j > 0 {
            cell(i - 1, j - 1, &acc)
        } else {
            f64::INFINITY
        };
        let up = if i > 0 { cell(i - 1, j, &acc) } else { f64::INFINITY };
        let left = if j > 0 { cell(i, j - 1, &acc) } else { f64::INFINITY };
        let best = diag.min(up).min(left);
        if diag == best {
            i -= 1;
            j -= 1;
        } else if up == best {
            i -= 1;
        } else {
            j -= 1;
        }
        pairs.push((i, j));
    }
    pairs.reverse();
    Ok(WarpPath {
        pairs,
        cost: final_cost,
    })
}

/// Minimal warp-path cost without materializing the full matrix: two
/// rolling rows, O(min-length) memory. Use when only the cost is needed.
pub fn dtw_cost(
    a: &QuaternionSeries,
    b: &QuaternionSeries,
    metric: DistanceMetric,
) -> Result<f64> {
    check_nonempty(a.len(), b.len())?;
    let (qa, qb) = (a.quats(), b.quats());
    // Roll over the shorter dimension.
    let (rows, cols) = if qa.len() >= qb.len() {
        (&qa, &qb)
    } else {
        (&qb, &qa)
    };
    let m = cols.len();
    let mut prev = vec![f64::INFINITY; m];
    let mut curr = vec![f64::INFINITY; m];
    for (i, ra) in rows.iter().enumerate() {
        for j in 0..m {
            let d = metric.eval(ra, &cols[j]);
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let diag = if i > 0 && j > 0 { prev[j - 1] } else { f64::INFINITY };
                let up = if i > 0 { prev[j] } else { f64::INFINITY };
                let left = if j > 0 { curr[j - 1] } else { f64::INFINITY };
                diag.min(up).min(left)
            };
            curr[j] = d + best;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    Ok(prev[m - 1])
}

/// FastDTW: coarsen-project-refine multiresolution approximation. The
/// returned path is always valid and its cost is the exact evaluation of
/// that path, hence never below the optimal DTW cost. `radius` widens the
/// refinement search band; a radius at least the series length degenerates
/// to exact DTW.
pub fn fastdtw(a: &QuaternionSeries, b: &QuaternionSeries, radius: usize) -> Result<WarpPath> {
    fastdtw_with(a, b, radius, DistanceMetric::default())
}

pub fn fastdtw_with(
    a: &QuaternionSeries,
    b: &QuaternionSeries,
    radius: usize,
    metric: DistanceMetric,
) -> Result<WarpPath> {
    check_nonempty(a.len(), b.len())?;
    let qa = a.quats();
    let qb = b.quats();
    fastdtw_quats(&qa, &qb, radius, metric)
}

pub(crate) fn fastdtw_quats(
    a: &[Quaternion],
    b: &[Quaternion],
    radius: usize,
    metric: DistanceMetric,
) -> Result<WarpPath> {
    let min_size = radius + 2;
    if a.len() <= min_size || b.len() <= min_size {
        return dtw_quats(a, b, metric);
    }
    let ca = halve(a);
    let cb = halve(b);
    let coarse = fastdtw_quats(&ca, &cb, radius, metric)?;
    let window = expand_window(&coarse.pairs, a.len(), b.len(), radius);
    dtw_banded(a, b, &window, metric)
}

/// Halve resolution by averaging adjacent pairs (sign-aligned before the
/// mean); an odd trailing sample passes through.
fn halve(q: &[Quaternion]) -> Vec<Quaternion> {
    let mut out = Vec::with_capacity(q.len() / 2 + q.len() % 2);
    let mut k = 0;
    while k + 1 < q.len() {
        let a = q[k];
        let mut b = q[k + 1];
        if a.dot(&b) < 0.0 {
            b = b.negated();
        }
        let mean = Quaternion::new(a.w + b.w, a.x + b.x, a.y + b.y, a.z + b.z)
            .normalize()
            .unwrap_or(a);
        out.push(mean);
        k += 2;
    }
    if k < q.len() {
        out.push(q[k]);
    }
    out
}

/// Project a coarse path onto the fine grid, dilated by `radius` in coarse
/// cells, producing per-row inclusive column ranges that contain both
/// corners and a monotone corridor.
fn expand_window(
    coarse_path: &[(usize, usize)],
    n: usize,
    m: usize,
    radius: usize,
) -> Vec<(usize, usize)> {
    let r = radius as i64;
    let mut ranges: Vec<(usize, usize)> = vec![(usize::MAX, 0); n];
    let mut mark = |i: i64, jlo: i64, jhi: i64| {
        if i < 0 || i >= n as i64 {
            return;
        }
        let row = &mut ranges[i as usize];
        let lo = jlo.clamp(0, m as i64 - 1) as usize;
        let hi = jhi.clamp(0, m as i64 - 1) as usize;
        row.0 = row.0.min(lo);
        row.1 = row.1.max(hi);
    };
    for &(ci, cj) in coarse_path {
        let (ci, cj) = (ci as i64, cj as i64);
        for di in -r..=r {
            // Coarse cell (ci+di, cj-r ..= cj+r) projects to a 2x2 block.
            let fi = 2 * (ci + di);
            let fjlo = 2 * (cj - r);
            let fjhi = 2 * (cj + r) + 1;
            mark(fi, fjlo, fjhi);
            mark(fi + 1, fjlo, fjhi);
        }
    }
    // Rows can be skipped when n is odd and the coarse tail was a singleton;
    // also corners must be present and consecutive rows must admit a step.
    ranges[0].0 = 0;
    if ranges[0].1 == 0 && ranges[0].0 == usize::MAX {
        ranges[0] = (0, 0);
    }
    for i in 1..n {
        if ranges[i].0 == usize::MAX {
            ranges[i] = ranges[i - 1];
        }
        // A monotone path needs lo[i] <= hi[i-1] + 1.
        if ranges[i].0 > ranges[i - 1].1 + 1 {
            ranges[i].0 = ranges[i - 1].1 + 1;
        }
        // And never moves left.
        if ranges[i].1 < ranges[i - 1].1 {
            ranges[i].1 = ranges[i - 1].1;
        }
    }
    ranges[n - 1].1 = m - 1;
    ranges
}

/// Per-joint DTW costs and their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityCost {
    pub per_joint: Vec<(String, f64)>,
    pub total: f64,
}

/// Alignment configuration shared by the similarity operations.
#[derive(Debug, Clone, Copy)]
pub struct AlignOptions {
    pub metric: DistanceMetric,
    /// FastDTW search radius.
    pub radius: usize,
    /// Use the exact dynamic program instead of FastDTW.
    pub exact: bool,
    /// Resample both series onto this uniform rate before alignment;
    /// `None` aligns raw samples.
    pub resample_hz: Option<f64>,
    /// Divide each joint cost by its path length K. Off by default: the
    /// warp-path cost definition carries no normalization.
    pub normalize_by_length: bool,
}

impl Default for AlignOptions {
    fn default() -> Self {
        Self {
            metric: DistanceMetric::default(),
            radius: 1,
            exact: false,
            resample_hz: Some(20.0),
            normalize_by_length: false,
        }
    }
}

/// Align two per-joint series collections (matched by label) and sum the
/// per-joint warp costs.
pub fn series_similarity(
    trial: &[QuaternionSeries],
    baseline: &[QuaternionSeries],
    opts: &AlignOptions,
) -> Result<SimilarityCost> {
    let labels_a: Vec<&str> = trial.iter().map(|s| s.label()).collect();
    let labels_b: Vec<&str> = baseline.iter().map(|s| s.label()).collect();
    if labels_a != labels_b {
        return Err(Error::JointSetMismatch {
            detail: format!("trial joints {labels_a:?} vs baseline joints {labels_b:?}"),
        });
    }
    let mut per_joint = Vec::with_capacity(trial.len());
    let mut total = 0.0;
    for (sa, sb) in trial.iter().zip(baseline) {
        let (ra, rb) = match opts.resample_hz {
            Some(hz) => (sa.resampled(hz), sb.resampled(hz)),
            None => (sa.clone(), sb.clone()),
        };
        let path = if opts.exact {
            dtw_with(&ra, &rb, opts.metric)?
        } else {
            fastdtw_with(&ra, &rb, opts.radius, opts.metric)?
        };
        let cost = if opts.normalize_by_length {
            path.cost / path.k() as f64
        } else {
            path.cost
        };
        per_joint.push((sa.label().to_string(), cost));
        total += cost;
    }
    Ok(SimilarityCost { per_joint, total })
}

/// Joint-dynamics similarity between a trial and a baseline joint-state
/// series: shoulder aligns as a quaternion series, the elbow angle is
/// lifted to a rotation about the hinge axis, per-joint costs are summed.
pub fn similarity_cost(
    trial: &JointSeries,
    baseline: &JointSeries,
    opts: &AlignOptions,
) -> Result<SimilarityCost> {
    if trial.is_empty() || baseline.is_empty() {
        return Err(Error::Empty {
            what: "joint-state series",
        });
    }
    series_similarity(&joint_quaternion_series(trial), &joint_quaternion_series(baseline), opts)
}

/// Decompose a joint-state series into labeled per-joint quaternion series.
pub fn joint_quaternion_series(js: &JointSeries) -> Vec<QuaternionSeries> {
    let shoulder = QuaternionSeries {
        label: "shoulder".to_string(),
        samples: js
            .timestamps
            .iter()
            .zip(&js.shoulder)
            .map(|(&t, q)| (t, q.canonicalized()))
            .collect(),
    };
    let elbow = QuaternionSeries {
        label: "elbow".to_string(),
        samples: js
            .timestamps
            .iter()
            .zip(&js.elbow_flexion)
            .map(|(&t, &ang)| (t, Quaternion::from_axis_angle(ELBOW_AXIS, ang)))
            .collect(),
    };
    vec![shoulder, elbow]
}

/// Trials grouped by task id for one system.
#[derive(Debug, Clone, Default)]
pub struct TaskTrialSet {
    pub tasks: BTreeMap<u8, Vec<Vec<QuaternionSeries>>>,
}

impl TaskTrialSet {
    pub fn push_trial(&mut self, task: u8, joints: Vec<QuaternionSeries>) {
        self.tasks.entry(task).or_default().push(joints);
    }
}

/// Task-by-task similarity matrix between two systems.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskConfusion {
    pub task_ids: Vec<u8>,
    /// `values[i][j]`: mean cost of system-A task `task_ids[i]` trials
    /// against system-B task `task_ids[j]` trials, paired by repetition.
    pub values: Vec<Vec<f64>>,
}

impl TaskConfusion {
    /// True when every diagonal entry is the strict minimum of its row.
    pub fn diagonal_dominant(&self) -> bool {
        self.values.iter().enumerate().all(|(i, row)| {
            row.iter()
                .enumerate()
                .all(|(j, &v)| j == i || v > row[i])
        })
    }
}

/// Mean pairwise similarity cost between per-task trials of two systems.
/// Trials pair by repetition index, mirroring the repeated-trials protocol.
pub fn task_confusion(
    a: &TaskTrialSet,
    b: &TaskTrialSet,
    opts: &AlignOptions,
) -> Result<TaskConfusion> {
    let ids_a: Vec<u8> = a.tasks.keys().copied().collect();
    let ids_b: Vec<u8> = b.tasks.keys().copied().collect();
    let mut missing: Vec<u8> = ids_a
        .iter()
        .filter(|id| !b.tasks.contains_key(id))
        .copied()
        .collect();
    missing.extend(ids_b.iter().filter(|id| !a.tasks.contains_key(id)));
    if !missing.is_empty() || ids_a.is_empty() {
        missing.sort_unstable();
        missing.dedup();
        return Err(Error::MissingTasks(missing));
    }
    let ids = ids_a;
    let mut values = vec![vec![0.0; ids.len()]; ids.len()];
    for (i, ti) in ids.iter().enumerate() {
        for (j, tj) in ids.iter().enumerate() {
            let trials_a = &a.tasks[ti];
            let trials_b = &b.tasks[tj];
            let pairs = trials_a.len().min(trials_b.len());
            if pairs == 0 {
                return Err(Error::MissingTasks(vec![*ti.min(tj)]));
            }
            let mut sum = 0.0;
            for k in 0..pairs {
                sum += series_similarity(&trials_a[k], &trials_b[k], opts)?.total;
            }
            values[i][j] = sum / pairs as f64;
        }
    }
    Ok(TaskConfusion {
        task_ids: ids,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn series_of(quats: &[Quaternion]) -> QuaternionSeries {
        QuaternionSeries::from_quats("test", 0.0, 0.05, quats.iter().copied())
    }

    fn random_walk(rng: &mut ChaCha8Rng, len: usize, step: f64) -> Vec<Quaternion> {
        let mut q = Quaternion::identity();
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            let axis = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            q = q.multiply(&Quaternion::from_axis_angle(axis, rng.gen_range(0.0..step)));
            out.push(q);
        }
        out
    }

    /// Exhaustive warp-path enumeration oracle, feasible for tiny series.
    fn brute_force_cost(a: &[Quaternion], b: &[Quaternion], metric: DistanceMetric) -> f64 {
        fn recurse(
            a: &[Quaternion],
            b: &[Quaternion],
            i: usize,
            j: usize,
            acc: f64,
            metric: DistanceMetric,
            best: &mut f64,
        ) {
            let acc = acc + metric.eval(&a[i], &b[j]);
            if i == a.len() - 1 && j == b.len() - 1 {
                *best = best.min(acc);
                return;
            }
            if i + 1 < a.len() && j + 1 < b.len() {
                recurse(a, b, i + 1, j + 1, acc, metric, best);
            }
            if i + 1 < a.len() {
                recurse(a, b, i + 1, j, acc, metric, best);
            }
            if j + 1 < b.len() {
                recurse(a, b, i, j + 1, acc, metric, best);
            }
        }
        let mut best = f64::INFINITY;
        recurse(a, b, 0, 0, 0.0, metric, &mut best);
        best
    }

    #[test]
    fn identical_series_costs_zero_diagonal_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let q = random_walk(&mut rng, 12, 0.2);
        let s = series_of(&q);
        let path = dtw(&s, &s).unwrap();
        assert_eq!(path.cost, 0.0);
        assert_eq!(path.k(), 12);
        assert!(path.pairs.iter().enumerate().all(|(k, &(i, j))| i == k && j == k));
    }

    #[test]
    fn two_point_example_matches_enumeration() {
        // Q = [identity, x-flip], Qhat = [identity, identity]: the three
        // valid paths cost sqrt(2), sqrt(2), and 2*sqrt(2); minimum sqrt(2).
        let qa = vec![Quaternion::new(1.0, 0.0, 0.0, 0.0), Quaternion::new(0.0, 1.0, 0.0, 0.0)];
        let qb = vec![Quaternion::new(1.0, 0.0, 0.0, 0.0), Quaternion::new(1.0, 0.0, 0.0, 0.0)];
        let path = dtw(&series_of(&qa), &series_of(&qb)).unwrap();
        assert_abs_diff_eq!(path.cost, 2.0_f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(
            brute_force_cost(&qa, &qb, DistanceMetric::default()),
            path.cost,
            epsilon = 1e-12
        );
    }

    #[test]
    fn matches_brute_force_on_small_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let n = rng.gen_range(1..=6);
            let m = rng.gen_range(1..=6);
            let qa = random_walk(&mut rng, n, 0.5);
            let qb = random_walk(&mut rng, m, 0.5);
            let path = dtw(&series_of(&qa), &series_of(&qb)).unwrap();
            let oracle = brute_force_cost(&qa, &qb, DistanceMetric::default());
            assert_abs_diff_eq!(path.cost, oracle, epsilon = 1e-9);
            assert!(path.is_valid(n, m));
        }
    }

    #[test]
    fn cost_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..50 {
            let qa = random_walk(&mut rng, 20, 0.3);
            let qb = random_walk(&mut rng, 17, 0.3);
            let ab = dtw(&series_of(&qa), &series_of(&qb)).unwrap().cost;
            let ba = dtw(&series_of(&qb), &series_of(&qa)).unwrap().cost;
            assert_abs_diff_eq!(ab, ba, epsilon = 1e-12);
        }
    }

    #[test]
    fn path_cost_matches_pair_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let qa = random_walk(&mut rng, 25, 0.3);
        let qb = random_walk(&mut rng, 30, 0.3);
        let path = dtw(&series_of(&qa), &series_of(&qb)).unwrap();
        let summed = path.evaluate(&qa, &qb, DistanceMetric::default());
        assert_abs_diff_eq!(path.cost, summed, epsilon = 1e-12);
    }

    #[test]
    fn rolling_cost_equals_full_dtw() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        for _ in 0..20 {
            let n = rng.gen_range(1..40);
            let m = rng.gen_range(1..40);
            let qa = random_walk(&mut rng, n, 0.3);
            let qb = random_walk(&mut rng, m, 0.3);
            let full = dtw(&series_of(&qa), &series_of(&qb)).unwrap().cost;
            let rolled = dtw_cost(&series_of(&qa), &series_of(&qb), DistanceMetric::default())
                .unwrap();
            assert_abs_diff_eq!(full, rolled, epsilon = 1e-12);
        }
    }

    #[test]
    fn rolling_cost_handles_long_series() {
        // Cost-only formulation must not materialize the n*m matrix; at
        // length 10^4 that would be 10^8 cells.
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let qa = random_walk(&mut rng, 10_000, 0.05);
        let qb = random_walk(&mut rng, 10_000, 0.05);
        let cost = dtw_cost(&series_of(&qa), &series_of(&qb), DistanceMetric::default())
            .unwrap();
        assert!(cost.is_finite());
        assert!(cost >= 0.0);
    }

    #[test]
    fn empty_series_rejected() {
        let empty = QuaternionSeries::empty("e");
        let s = series_of(&[Quaternion::identity()]);
        assert!(matches!(dtw(&empty, &s), Err(Error::Empty { .. })));
        assert!(matches!(fastdtw(&s, &empty, 1), Err(Error::Empty { .. })));
    }

    #[test]
    fn fastdtw_identity_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        let q = random_walk(&mut rng, 40, 0.2);
        let s = series_of(&q);
        assert_eq!(fastdtw(&s, &s, 1).unwrap().cost, 0.0);
    }

    #[test]
    fn fastdtw_large_radius_equals_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..10 {
            let qa = random_walk(&mut rng, 33, 0.3);
            let qb = random_walk(&mut rng, 47, 0.3);
            let exact = dtw(&series_of(&qa), &series_of(&qb)).unwrap().cost;
            let fast = fastdtw(&series_of(&qa), &series_of(&qb), 47).unwrap().cost;
            assert_abs_diff_eq!(exact, fast, epsilon = 1e-12);
        }
    }

    #[test]
    fn fastdtw_paths_valid_and_bounded_below_by_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(38);
        for _ in 0..100 {
            let n = rng.gen_range(4..50);
            let m = rng.gen_range(4..50);
            let qa = random_walk(&mut rng, n, 0.3);
            let qb = random_walk(&mut rng, m, 0.3);
            for radius in [0usize, 1, 2] {
                let fast = fastdtw(&series_of(&qa), &series_of(&qb), radius).unwrap();
                assert!(fast.is_valid(n, m));
                let exact = dtw(&series_of(&qa), &series_of(&qb)).unwrap().cost;
                assert!(fast.cost >= exact - 1e-12);
                let evaluated = fast.evaluate(&qa, &qb, DistanceMetric::default());
                assert_abs_diff_eq!(fast.cost, evaluated, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn fastdtw_radius_one_near_exact_on_smooth_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(39);
        let mut within = 0;
        for _ in 0..100 {
            let qa = random_walk(&mut rng, 64, 0.12);
            let qb = random_walk(&mut rng, 64, 0.12);
            let exact = dtw(&series_of(&qa), &series_of(&qb)).unwrap().cost;
            let fast = fastdtw(&series_of(&qa), &series_of(&qb), 1).unwrap().cost;
            if fast <= exact * 1.05 + 1e-12 {
                within += 1;
            }
        }
        assert!(within >= 95, "only {within}/100 within 5% of exact");
    }

    #[test]
    fn geodesic_metric_switch() {
        let a = Quaternion::identity();
        let b = Quaternion::from_axis_angle([0.0, 0.0, 1.0], 1.0);
        let sa = series_of(&[a]);
        let sb = series_of(&[b]);
        let path = dtw_with(&sa, &sb, DistanceMetric::GeodesicAngle).unwrap();
        assert_abs_diff_eq!(path.cost, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn resample_preserves_endpoints_and_rate() {
        let quats: Vec<Quaternion> = (0..11)
            .map(|k| Quaternion::from_axis_angle([0.0, 0.0, 1.0], 0.05 * k as f64))
            .collect();
        // 10 Hz input over 1 s.
        let s = QuaternionSeries::from_quats("j", 0.0, 0.1, quats.iter().copied());
        let r = s.resampled(20.0);
        assert_eq!(r.len(), 21);
        assert!(Quaternion::dist(&r.samples()[0].1, &quats[0]) < 1e-12);
        assert!(Quaternion::dist(&r.samples()[20].1, &quats[10]) < 1e-9);
        // Midpoints interpolate along the arc.
        let mid = r.samples()[1].1;
        let expected = Quaternion::from_axis_angle([0.0, 0.0, 1.0], 0.025);
        assert!(Quaternion::dist(&mid, &expected) < 1e-9);
    }

    #[test]
    fn push_rejects_disorder_and_nonunit() {
        let mut s = QuaternionSeries::empty("j");
        s.push(0.0, Quaternion::identity()).unwrap();
        assert!(s.push(0.0, Quaternion::identity()).is_err());
        assert!(s.push(1.0, Quaternion::new(2.0, 0.0, 0.0, 0.0)).is_err());
    }
}
