//! Surface-EMG windowing, time-domain features, and LDA grip decoding.
//!
//! Eight channels at 200 Hz, 200 ms windows with 50 ms increments, and the
//! Hudgins time-domain feature set (MAV, WL, ZC, SSC) feeding a shrinkage-
//! regularized linear discriminant over five grip classes. Decoded wave-out
//! and wave-in drive wrist pronation/supination; open and close drive hand
//! aperture.

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const EMG_CHANNELS: usize = 8;
/// Stream rate of the armband's EMG channel, Hz.
pub const EMG_RATE_HZ: f64 = 200.0;
/// Analysis window length, milliseconds.
pub const DEFAULT_WINDOW_MS: f64 = 200.0;
/// Window increment, milliseconds.
pub const DEFAULT_INCREMENT_MS: f64 = 50.0;
/// Zero-crossing / slope-sign-change deadzone, fraction of full scale.
pub const DEFAULT_DEADZONE: f64 = 0.01;
/// Covariance shrinkage that keeps small training sets invertible.
pub const DEFAULT_SHRINKAGE: f64 = 0.01;

/// One multi-channel analysis window of normalized EMG amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct EmgWindow {
    pub timestamp: f64,
    channels: Vec<Vec<f64>>,
}

impl EmgWindow {
    /// All channels must be non-empty and equally long.
    pub fn new(timestamp: f64, channels: Vec<Vec<f64>>) -> Result<Self> {
        let len = channels.first().map(|c| c.len()).unwrap_or(0);
        if len == 0 {
            return Err(Error::Empty {
                what: "EMG window",
            });
        }
        if channels.iter().any(|c| c.len() != len) {
            return Err(Error::domain("EMG channels differ in sample count"));
        }
        Ok(Self {
            timestamp,
            channels,
        })
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn samples_per_channel(&self) -> usize {
        self.channels[0].len()
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }
}

/// The five decoded movement classes. Wave-out maps to wrist pronation and
/// wave-in to wrist supination on the virtual limb.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GripClass {
    Rest,
    HandOpen,
    HandClose,
    WaveOut,
    WaveIn,
}

impl GripClass {
    pub const ALL: [GripClass; 5] = [
        GripClass::Rest,
        GripClass::HandOpen,
        GripClass::HandClose,
        GripClass::WaveOut,
        GripClass::WaveIn,
    ];

    pub fn index(&self) -> usize {
        Self::ALL.iter().position(|c| c == self).unwrap()
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(&self) -> &'static str {
        match self {
            GripClass::Rest => "rest",
            GripClass::HandOpen => "hand-open",
            GripClass::HandClose => "hand-close",
            GripClass::WaveOut => "wave-out",
            GripClass::WaveIn => "wave-in",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().find(|c| c.name() == s).copied()
    }
}

impl std::fmt::Display for GripClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-channel time-domain features: 4 features x 8 channels = 32 reals.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub mav: [f64; EMG_CHANNELS],
    pub waveform_length: [f64; EMG_CHANNELS],
    pub zero_crossings: [u32; EMG_CHANNELS],
    pub slope_sign_changes: [u32; EMG_CHANNELS],
}

impl FeatureVector {
    /// Flatten in the fixed order MAV, WL, ZC, SSC (channel-major within
    /// each feature).
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(4 * EMG_CHANNELS);
        v.extend_from_slice(&self.mav);
        v.extend_from_slice(&self.waveform_length);
        v.extend(self.zero_crossings.iter().map(|&c| c as f64));
        v.extend(self.slope_sign_changes.iter().map(|&c| c as f64));
        v
    }

    pub const DIM: usize = 4 * EMG_CHANNELS;
}

/// Standard time-domain features over an 8-channel window. `deadzone`
/// suppresses noise-level crossings in ZC and SSC.
pub fn extract_features(window: &EmgWindow, deadzone: f64) -> Result<FeatureVector> {
    if window.channel_count() != EMG_CHANNELS {
        return Err(Error::ChannelCount {
            expected: EMG_CHANNELS,
            got: window.channel_count(),
        });
    }
    let mut out = FeatureVector {
        mav: [0.0; EMG_CHANNELS],
        waveform_length: [0.0; EMG_CHANNELS],
        zero_crossings: [0; EMG_CHANNELS],
        slope_sign_changes: [0; EMG_CHANNELS],
    };
    for (ch, data) in window.channels().iter().enumerate() {
        let n = data.len();
        out.mav[ch] = data.iter().map(|x| x.abs()).sum::<f64>() / n as f64;
        out.waveform_length[ch] = data.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        out.zero_crossings[ch] = data
            .windows(2)
            .filter(|w| w[0] * w[1] < 0.0 && (w[0] - w[1]).abs() >= deadzone)
            .count() as u32;
        out.slope_sign_changes[ch] = (1..n.saturating_sub(1))
            .filter(|&k| {
                let d_prev = data[k] - data[k - 1];
                let d_next = data[k + 1] - data[k];
                d_prev * d_next < 0.0 && (d_prev.abs() >= deadzone || d_next.abs() >= deadzone)
            })
            .count() as u32;
    }
    Ok(out)
}

/// Slice a continuous 8-channel recording into windows of `window_ms`
/// advancing by `increment_ms` at `rate_hz`.
pub fn window_stream(
    channels: &[Vec<f64>; EMG_CHANNELS],
    start_time: f64,
    rate_hz: f64,
    window_ms: f64,
    increment_ms: f64,
) -> Vec<EmgWindow> {
    let n = channels[0].len();
    let wlen = ((window_ms / 1000.0) * rate_hz).round() as usize;
    let step = (((increment_ms / 1000.0) * rate_hz).round() as usize).max(1);
    let mut out = Vec::new();
    if wlen == 0 || n < wlen {
        return out;
    }
    let mut start = 0usize;
    while start + wlen <= n {
        let slice: Vec<Vec<f64>> = channels
            .iter()
            .map(|c| c[start..start + wlen].to_vec())
            .collect();
        let t = start_time + (start + wlen) as f64 / rate_hz;
        out.push(EmgWindow::new(t, slice).expect("windows are well-formed by construction"));
        start += step;
    }
    out
}

/// Shrinkage-regularized linear discriminant model over grip classes.
#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    classes: Vec<GripClass>,
    dim: usize,
    means: Vec<Vec<f64>>,
    priors: Vec<f64>,
    /// Lower Cholesky factor of the shrunk pooled covariance.
    chol: Vec<Vec<f64>>,
    lambda: f64,
    // Precomputed discriminant: score_c(x) = weights_c . x + bias_c.
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

/// Train a pooled-covariance LDA with shrinkage
/// `(1 - lambda) S + lambda mean(diag(S)) I`.
pub fn lda_train(labeled: &[(Vec<f64>, GripClass)], lambda: f64) -> Result<LdaModel> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::domain(format!(
            "shrinkage lambda must lie in [0, 1], got {lambda}"
        )));
    }
    if labeled.is_empty() {
        return Err(Error::Empty {
            what: "training set",
        });
    }
    let dim = labeled[0].0.len();
    if labeled.iter().any(|(f, _)| f.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: labeled.iter().find(|(f, _)| f.len() != dim).unwrap().0.len(),
        });
    }

    let mut classes: Vec<GripClass> = labeled.iter().map(|&(_, c)| c).collect();
    classes.sort_by_key(|c| c.index());
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::TooFewSamples {
            what: "training classes",
            need: 2,
            got: classes.len(),
        });
    }

    let mut means = vec![vec![0.0; dim]; classes.len()];
    let mut counts = vec![0usize; classes.len()];
    for (f, c) in labeled {
        let ci = classes.iter().position(|k| k == c).unwrap();
        counts[ci] += 1;
        for (m, x) in means[ci].iter_mut().zip(f) {
            *m += x;
        }
    }
    for (ci, count) in counts.iter().enumerate() {
        if *count < 2 {
            return Err(Error::TooFewSamples {
                what: "samples per class",
                need: 2,
                got: *count,
            });
        }
        for m in means[ci].iter_mut() {
            *m /= *count as f64;
        }
    }

    // Pooled within-class covariance.
    let total: usize = counts.iter().sum();
    let mut cov = vec![vec![0.0; dim]; dim];
    for (f, c) in labeled {
        let ci = classes.iter().position(|k| k == c).unwrap();
        for i in 0..dim {
            let di = f[i] - means[ci][i];
            for j in 0..=i {
                cov[i][j] += di * (f[j] - means[ci][j]);
            }
        }
    }
    let denom = (total - classes.len()) as f64;
    for i in 0..dim {
        for j in 0..=i {
            cov[i][j] /= denom;
            cov[j][i] = cov[i][j];
        }
    }
    // Shrink toward the scaled identity.
    let diag_mean = (0..dim).map(|i| cov[i][i]).sum::<f64>() / dim as f64;
    for i in 0..dim {
        for j in 0..dim {
            cov[i][j] *= 1.0 - lambda;
        }
        cov[i][i] += lambda * diag_mean;
    }

    let chol = cholesky(&cov).ok_or(Error::SingularCovariance)?;
    let priors: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
    finish_model(classes, dim, means, priors, chol, lambda)
}

fn finish_model(
    classes: Vec<GripClass>,
    dim: usize,
    means: Vec<Vec<f64>>,
    priors: Vec<f64>,
    chol: Vec<Vec<f64>>,
    lambda: f64,
) -> Result<LdaModel> {
    let mut weights = Vec::with_capacity(classes.len());
    let mut biases = Vec::with_capacity(classes.len());
    for (mean, prior) in means.iter().zip(&priors) {
        let w = chol_solve(&chol, mean);
        let quad: f64 = mean.iter().zip(&w).map(|(m, wi)| m * wi).sum();
        biases.push(-0.5 * quad + prior.ln());
        weights.push(w);
    }
    Ok(LdaModel {
        classes,
        dim,
        means,
        priors,
        chol,
        lambda,
        weights,
        biases,
    })
}

impl LdaModel {
    pub fn classes(&self) -> &[GripClass] {
        &self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Shrunk pooled covariance reconstructed from its stored factor.
    pub fn covariance(&self) -> Vec<Vec<f64>> {
        let p = self.dim;
        let mut cov = vec![vec![0.0; p]; p];
        for i in 0..p {
            for j in 0..p {
                cov[i][j] = (0..=i.min(j)).map(|k| self.chol[i][k] * self.chol[j][k]).sum();
            }
        }
        cov
    }

    /// Rebuild the model with explicit class priors (normalized internally).
    pub fn with_priors(&self, priors: &[f64]) -> Result<LdaModel> {
        if priors.len() != self.classes.len() {
            return Err(Error::DimensionMismatch {
                expected: self.classes.len(),
                got: priors.len(),
            });
        }
        if priors.iter().any(|&p| p <= 0.0) {
            return Err(Error::domain("priors must be positive"));
        }
        let sum: f64 = priors.iter().sum();
        let normalized: Vec<f64> = priors.iter().map(|p| p / sum).collect();
        finish_model(
            self.classes.clone(),
            self.dim,
            self.means.clone(),
            normalized,
            self.chol.clone(),
            self.lambda,
        )
    }

    /// Linear discriminant scores per class.
    pub fn scores(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: features.len(),
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.iter().zip(features).map(|(wi, x)| wi * x).sum::<f64>() + b)
            .collect())
    }

    /// Most likely class and the posterior distribution over classes.
    pub fn predict(&self, features: &[f64]) -> Result<(GripClass, Vec<f64>)> {
        let scores = self.scores(features)?;
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut posts: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let z: f64 = posts.iter().sum();
        for p in posts.iter_mut() {
            *p /= z;
        }
        let best = scores
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        Ok((self.classes[best], posts))
    }
}

/// Row-per-truth confusion counts with overall accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct GripConfusion {
    pub classes: Vec<GripClass>,
    /// `counts[truth][predicted]`.
    pub counts: Vec<Vec<usize>>,
    pub accuracy: f64,
}

/// Evaluate a model over a labeled set.
pub fn confusion_eval(model: &LdaModel, labeled: &[(Vec<f64>, GripClass)]) -> Result<GripConfusion> {
    if labeled.is_empty() {
        return Err(Error::Empty {
            what: "evaluation set",
        });
    }
    let classes = model.classes().to_vec();
    let mut counts = vec![vec![0usize; classes.len()]; classes.len()];
    let mut correct = 0usize;
    for (f, truth) in labeled {
        let (pred, _) = model.predict(f)?;
        let ti = classes
            .iter()
            .position(|c| c == truth)
            .ok_or_else(|| Error::domain(format!("class {truth} not in model")))?;
        let pi = classes.iter().position(|c| *c == pred).unwrap();
        counts[ti][pi] += 1;
        if pred == *truth {
            correct += 1;
        }
    }
    Ok(GripConfusion {
        classes,
        counts,
        accuracy: correct as f64 / labeled.len() as f64,
    })
}

/// How a decoded class drives the wrist/hand degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DofCommand {
    Hold,
    /// Signed wrist rotation velocity, rad/s; positive pronates.
    WristVelocity(f64),
    /// Signed aperture velocity, 1/s; positive opens.
    ApertureVelocity(f64),
}

/// Class-to-DOF mapping table. Defaults follow the grip layout: open/close
/// drive aperture, wave-out/wave-in drive wrist rotation.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMapping {
    commands: [DofCommand; 5],
}

impl Default for DofMapping {
    fn default() -> Self {
        Self {
            commands: [
                DofCommand::Hold,
                DofCommand::ApertureVelocity(1.0),
                DofCommand::ApertureVelocity(-1.0),
                DofCommand::WristVelocity(1.0),
                DofCommand::WristVelocity(-1.0),
            ],
        }
    }
}

impl DofMapping {
    pub fn command(&self, class: GripClass) -> DofCommand {
        self.commands[class.index()]
    }

    pub fn set(&mut self, class: GripClass, command: DofCommand) {
        self.commands[class.index()] = command;
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite
/// matrix; `None` when a pivot degenerates.
fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if sum <= 1e-12 {
                    return None;
                }
                l[i][j] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    Some(l)
}

/// Solve `L L^T x = b` by forward and back substitution.
fn chol_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = l.len();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i][k] * y[k];
        }
        y[i] = sum / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in i + 1..n {
            sum -= l[k][i] * x[k];
        }
        x[i] = sum / l[i][i];
    }
    x
}

const MODEL_MAGIC: &[u8; 5] = b"RKLDA";
const MODEL_VERSION: u32 = 1;

/// Serialize a model: magic, version, shape, lambda, then per-class records
/// (class id, prior, mean) and the packed lower covariance factor. All
/// numbers little-endian; layout documented in `docs/formats.md`.
pub fn write_model<W: Write>(model: &LdaModel, mut w: W) -> std::io::Result<()> {
    w.write_all(MODEL_MAGIC)?;
    w.write_all(&MODEL_VERSION.to_le_bytes())?;
    w.write_all(&(model.classes.len() as u32).to_le_bytes())?;
    w.write_all(&(model.dim as u32).to_le_bytes())?;
    w.write_all(&model.lambda.to_le_bytes())?;
    for (ci, class) in model.classes.iter().enumerate() {
        w.write_all(&(class.index() as u32).to_le_bytes())?;
        w.write_all(&model.priors[ci].to_le_bytes())?;
        for v in &model.means[ci] {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    for i in 0..model.dim {
        for j in 0..=i {
            w.write_all(&model.chol[i][j].to_le_bytes())?;
        }
    }
    Ok(())
}

/// Deserialize a model written by [`write_model`].
pub fn read_model<R: Read>(mut r: R) -> Result<LdaModel> {
    let bad = |msg: &str| Error::Parse {
        path: "<model>".to_string(),
        line: 0,
        msg: msg.to_string(),
    };
    let io = |e: std::io::Error| Error::io("<model>", e);

    let mut magic = [0u8; 5];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MODEL_MAGIC {
        return Err(bad("bad magic"));
    }
    let mut u32buf = [0u8; 4];
    let mut f64buf = [0u8; 8];
    let mut read_u32 = |r: &mut R| -> Result<u32> {
        r.read_exact(&mut u32buf).map_err(io)?;
        Ok(u32::from_le_bytes(u32buf))
    };
    let version = read_u32(&mut r)?;
    if version != MODEL_VERSION {
        return Err(Error::UnsupportedVersion {
            found: format!("RKLDA v{version}"),
            supported: format!("RKLDA v{MODEL_VERSION}"),
        });
    }
    let n_classes = read_u32(&mut r)? as usize;
    let dim = read_u32(&mut r)? as usize;
    if n_classes == 0 || n_classes > GripClass::ALL.len() || dim == 0 || dim > 1 << 16 {
        return Err(bad("implausible model shape"));
    }
    let mut read_f64 = |r: &mut R| -> Result<f64> {
        r.read_exact(&mut f64buf).map_err(io)?;
        Ok(f64::from_le_bytes(f64buf))
    };
    let lambda = read_f64(&mut r)?;
    let mut classes = Vec::with_capacity(n_classes);
    let mut priors = Vec::with_capacity(n_classes);
    let mut means = Vec::with_capacity(n_classes);
    for _ in 0..n_classes {
        let mut idx = [0u8; 4];
        r.read_exact(&mut idx).map_err(io)?;
        let class = GripClass::from_index(u32::from_le_bytes(idx) as usize)
            .ok_or_else(|| bad("unknown class id"))?;
        classes.push(class);
        priors.push(read_f64(&mut r)?);
        let mut mean = Vec::with_capacity(dim);
        for _ in 0..dim {
            mean.push(read_f64(&mut r)?);
        }
        means.push(mean);
    }
    let mut chol = vec![vec![0.0; dim]; dim];
    for i in 0..dim {
        for j in 0..=i {
            chol[i][j] = read_f64(&mut r)?;
        }
    }
    finish_model(classes, dim, means, priors, chol, lambda)
}
