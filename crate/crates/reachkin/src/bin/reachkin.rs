//! Command-line front end: each subcommand is a thin wrapper over the
//! library. Exit codes: 0 success, 1 usage, 2 data error, 3 I/O error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use reachkin::alignment::{
    dtw_with, fastdtw_with, joint_quaternion_series, task_confusion, AlignOptions, DistanceMetric,
    TaskTrialSet,
};
use reachkin::contact::{detect_contacts, force_from_impulse, ImpulseMode, ImpulseSeries};
use reachkin::emg::{
    confusion_eval, extract_features, lda_train, window_stream, EmgWindow, GripClass, LdaModel,
    DEFAULT_DEADZONE, DEFAULT_INCREMENT_MS, DEFAULT_SHRINKAGE, DEFAULT_WINDOW_MS, EMG_CHANNELS,
    EMG_RATE_HZ,
};
use reachkin::energetics::{energy_table, reach_energy, EnergyParams};
use reachkin::error::Error;
use reachkin::ingest::format::{
    read_report, read_session, read_trials, write_plot_tables, write_report, write_session,
};
use reachkin::ingest::server::{IngestServer, ServerConfig};
use reachkin::ingest::synth::{synth_calibration_session, synth_session, SynthConfig};
use reachkin::ingest::{Payload, RecordKind, SessionFile, StreamRecord};
use reachkin::kinematics::{endpoint, segment_reaches, SegmentOptions};
use reachkin::sessions::{
    format_percent, progression_report, score_outcomes, SessionReport, TaskSpec, TrialRecord,
};

#[derive(Parser)]
#[command(
    name = "reachkin",
    version,
    about = "Reach kinematics and myoelectrics assessment toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fuse raw IMU records (I) into orientation records (Q).
    Fuse(FuseArgs),
    /// Joint angles and endpoint trace from a session's orientation records.
    Kin(KinArgs),
    /// Warp-path cost between the orientation series of two sessions.
    Dtw(DtwArgs),
    /// Task-by-task similarity matrix between two session sets.
    Confusion(ConfusionArgs),
    /// Reach-energy table from one or more sessions.
    Energy(EnergyArgs),
    /// Train the grip decoder from a labeled EMG session.
    DecodeTrain(DecodeTrainArgs),
    /// Evaluate a grip decoder against a labeled EMG session.
    DecodeEval(DecodeEvalArgs),
    /// Detect fingertip contact events from impulse records.
    Contacts(ContactsArgs),
    /// Completion-time outcome report from a trials table.
    Score(ScoreArgs),
    /// Training-progression report from trials and per-task baselines.
    Progress(ProgressArgs),
    /// Generate synthetic task sessions with ground truth.
    Simulate(SimulateArgs),
    /// Run the TCP ingest endpoint.
    Serve(ServeArgs),
}

/// Optional defaults file pointed to by REACHKIN_CONFIG: `key value` lines,
/// `#` comments. Flags win over the file; the file wins over built-ins.
struct ConfigDefaults {
    values: BTreeMap<String, String>,
}

impl ConfigDefaults {
    fn load() -> Result<Self, Error> {
        let mut values = BTreeMap::new();
        if let Ok(path) = std::env::var("REACHKIN_CONFIG") {
            let text = std::fs::read_to_string(&path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            for line in text.lines() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                if let Some((k, v)) = line.split_once(char::is_whitespace) {
                    values.insert(k.to_string(), v.trim().to_string());
                }
            }
        }
        Ok(Self { values })
    }

    fn f64(&self, key: &str, fallback: f64) -> f64 {
        self.values
            .get(key)
            .and_then(|v| v.parse().ok())
            .unwrap_or(fallback)
    }

    fn usize(&self, key: &str, fallback: usize) -> usize {
        self.values
            .get(key)
            .and_then(|v| v.parse().ok())
            .unwrap_or(fallback)
    }
}

#[derive(Args)]
struct FuseArgs {
    /// Input session file with I records.
    #[arg(long)]
    input: PathBuf,
    /// Output session file with fused Q records.
    #[arg(long)]
    output: PathBuf,
    /// Filter gain; defaults to the session header's value.
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Args)]
struct KinArgs {
    #[arg(long)]
    input: PathBuf,
    /// Output TSV; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value = "chest")]
    chest: String,
    #[arg(long, default_value = "upper")]
    upper: String,
    #[arg(long, default_value = "forearm")]
    forearm: String,
    /// Arm override "Lu Lf ox oy oz"; defaults to the session header.
    #[arg(long)]
    arm: Option<String>,
}

#[derive(Args)]
struct DtwArgs {
    /// First session file.
    #[arg(long)]
    a: PathBuf,
    /// Second session file.
    #[arg(long)]
    b: PathBuf,
    /// Device whose Q series aligns; defaults to the first Q device.
    #[arg(long)]
    device: Option<String>,
    /// Use the exact dynamic program instead of the multiresolution search.
    #[arg(long)]
    exact: bool,
    /// Search radius of the multiresolution pass.
    #[arg(long)]
    radius: Option<usize>,
    /// Pointwise metric: euclidean (sign-invariant) or geodesic.
    #[arg(long, default_value = "euclidean")]
    metric: String,
    /// Print the warp path pairs as well.
    #[arg(long)]
    path: bool,
}

#[derive(Args)]
struct ConfusionArgs {
    /// Directory of session files for system A (rows).
    #[arg(long)]
    a: PathBuf,
    /// Directory of session files for system B (columns).
    #[arg(long)]
    b: PathBuf,
    #[arg(long)]
    exact: bool,
    #[arg(long)]
    radius: Option<usize>,
    /// Output TSV; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EnergyArgs {
    /// Session files; one prints per-reach detail, several aggregate per task.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Effective limb mass, kg; defaults to the session header.
    #[arg(long)]
    mass: Option<f64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct DecodeTrainArgs {
    /// Labeled EMG session (M `label <class>` markers delimit spans).
    #[arg(long)]
    input: PathBuf,
    /// Output model file.
    #[arg(long)]
    output: PathBuf,
    /// Covariance shrinkage in [0, 1].
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Args)]
struct DecodeEvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// Labeled EMG session to evaluate on.
    #[arg(long)]
    input: PathBuf,
}

#[derive(Args)]
struct ContactsArgs {
    #[arg(long)]
    input: PathBuf,
    /// Contact force threshold, N.
    #[arg(long)]
    threshold: Option<f64>,
    /// Frames a crossing must persist.
    #[arg(long)]
    debounce: Option<usize>,
    /// Simulation frame rate the impulses were logged at, Hz.
    #[arg(long)]
    frame_rate: Option<f64>,
    /// Treat impulse values as per-frame increments instead of cumulative.
    #[arg(long)]
    incremental: bool,
    /// Write a session copy with feedback command markers appended.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    /// Trials table.
    #[arg(long)]
    trials: PathBuf,
    /// Structured report output path; stdout prints a summary either way.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Directory for plot-ready TSV tables.
    #[arg(long)]
    plots: Option<PathBuf>,
}

#[derive(Args)]
struct ProgressArgs {
    /// Trials table; rows must reference session files.
    #[arg(long)]
    trials: PathBuf,
    /// Directory of per-task baseline sessions (task id in the header).
    #[arg(long)]
    baselines: PathBuf,
    #[arg(long)]
    exact: bool,
    #[arg(long)]
    radius: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    plots: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Task number 1-4.
    #[arg(long)]
    task: u8,
    /// Trials per session.
    #[arg(long, default_value_t = 3)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Gyro noise, rad/s std.
    #[arg(long, default_value_t = 0.0)]
    noise_gyro: f64,
    /// Accelerometer noise, g std.
    #[arg(long, default_value_t = 0.0)]
    noise_accel: f64,
    /// Orientation-record noise, rad std.
    #[arg(long, default_value_t = 0.0)]
    noise_quat: f64,
    /// Skip raw I records.
    #[arg(long)]
    no_imu: bool,
    /// Also write an EMG calibration session.
    #[arg(long)]
    calibration: bool,
    /// EMG class-envelope separation.
    #[arg(long)]
    emg_separation: Option<f64>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 0)]
    port: u16,
    /// Directory completed sessions are written into.
    #[arg(long)]
    out: PathBuf,
    /// Stop after this many sessions (runs until killed when omitted).
    #[arg(long)]
    max_sessions: Option<usize>,
    #[arg(long, default_value_t = 16)]
    reorder_window: usize,
    #[arg(long, default_value_t = 30)]
    idle_timeout_s: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let defaults = match ConfigDefaults::load() {
        Ok(d) => d,
        Err(err) => {
            eprintln!("reachkin: {err}");
            return ExitCode::from(3);
        }
    };
    match run(cli, &defaults) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("reachkin: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn run(cli: Cli, defaults: &ConfigDefaults) -> Result<(), Error> {
    match cli.command {
        Command::Fuse(args) => cmd_fuse(args, defaults),
        Command::Kin(args) => cmd_kin(args),
        Command::Dtw(args) => cmd_dtw(args, defaults),
        Command::Confusion(args) => cmd_confusion(args, defaults),
        Command::Energy(args) => cmd_energy(args, defaults),
        Command::DecodeTrain(args) => cmd_decode_train(args, defaults),
        Command::DecodeEval(args) => cmd_decode_eval(args),
        Command::Contacts(args) => cmd_contacts(args, defaults),
        Command::Score(args) => cmd_score(args),
        Command::Progress(args) => cmd_progress(args, defaults),
        Command::Simulate(args) => cmd_simulate(args, defaults),
        Command::Serve(args) => cmd_serve(args),
    }
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), Error> {
    match output {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn align_options(exact: bool, radius: Option<usize>, defaults: &ConfigDefaults) -> AlignOptions {
    AlignOptions {
        exact,
        radius: radius.unwrap_or_else(|| defaults.usize("radius", 1)),
        ..AlignOptions::default()
    }
}

fn cmd_fuse(args: FuseArgs, defaults: &ConfigDefaults) -> Result<(), Error> {
    let session = read_session(&args.input)?;
    let beta = args
        .beta
        .or_else(|| defaults.values.get("beta").and_then(|v| v.parse().ok()));
    let fused = reachkin::fusion::fuse_session(&session, beta)?;
    write_session(&fused, &args.output)?;
    let n = fused
        .records
        .iter()
        .filter(|r| r.payload.kind() == RecordKind::Quaternion)
        .count();
    println!("fused {} orientation records -> {}", n, args.output.display());
    Ok(())
}

fn parse_arm(spec: &str) -> Result<reachkin::kinematics::ArmModel, Error> {
    let v: Vec<f64> = spec
        .split_whitespace()
        .filter_map(|t| t.parse().ok())
        .collect();
    if v.len() != 5 {
        return Err(Error::domain(format!(
            "arm override needs 5 numbers, got {spec:?}"
        )));
    }
    reachkin::kinematics::ArmModel::new(v[0], v[1], [v[2], v[3], v[4]])
}

fn cmd_kin(args: KinArgs) -> Result<(), Error> {
    let session = read_session(&args.input)?;
    let arm = match &args.arm {
        Some(spec) => parse_arm(spec)?,
        None => session.header.arm,
    };
    let joints = session.joint_series(&args.chest, &args.upper, &args.forearm)?;
    let mut out = String::from("t\tsh_w\tsh_x\tsh_y\tsh_z\telbow\twrist\taperture\tex\tey\tez\n");
    for k in 0..joints.len() {
        let state = joints.state(k);
        let p = endpoint(&arm, &state);
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            joints.timestamps[k],
            state.shoulder.w,
            state.shoulder.x,
            state.shoulder.y,
            state.shoulder.z,
            state.elbow_flexion,
            state.wrist_rotation,
            state.hand_aperture,
            p[0],
            p[1],
            p[2]
        ));
    }
    emit(args.output.as_deref(), &out)
}

fn first_quaternion_device(session: &SessionFile) -> Result<String, Error> {
    session
        .devices_with(RecordKind::Quaternion)
        .into_iter()
        .next()
        .ok_or(Error::Empty {
            what: "orientation records",
        })
}

fn cmd_dtw(args: DtwArgs, defaults: &ConfigDefaults) -> Result<(), Error> {
    let sa = read_session(&args.a)?;
    let sb = read_session(&args.b)?;
    let device = match &args.device {
        Some(d) => d.clone(),
        None => first_quaternion_device(&sa)?,
    };
    let qa = sa.quaternion_series(&device)?;
    let qb = sb.quaternion_series(&device)?;
    let metric = match args.metric.as_str() {
        "euclidean" => DistanceMetric::SignInvariantEuclidean,
        "geodesic" => DistanceMetric::GeodesicAngle,
        other => {
            return Err(Error::domain(format!(
                "unknown metric {other:?} (euclidean|geodesic)"
            )))
        }
    };
    let warp = if args.exact {
        dtw_with(&qa, &qb, metric)?
    } else {
        let radius = args.radius.unwrap_or_else(|| defaults.usize("radius", 1));
        fastdtw_with(&qa, &qb, radius, metric)?
    };
    println!("device {device}");
    println!("cost {}", warp.cost);
    println!("k {}", warp.k());
    if args.path {
        for (i, j) in &warp.pairs {
            println!("pair {i} {j}");
        }
    }
    Ok(())
}

fn session_files(dir: &Path) -> Result<Vec<PathBuf>, Error> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir.display().to_string(), e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|e| e == "txt").unwrap_or(false))
        .collect();
    files.sort();
    Ok(files)
}

fn trial_set_from_dir(dir: &Path) -> Result<TaskTrialSet, Error> {
    let mut set = TaskTrialSet::default();
    for path in session_files(dir)? {
        let session = read_session(&path)?;
        let task = session.header.task.ok_or_else(|| Error::Parse {
            path: path.display().to_string(),
            line: 0,
            msg: "session header lacks a task id".to_string(),
        })?;
        let joints = session.joint_series("chest", "upper", "forearm")?;
        set.push_trial(task, joint_quaternion_series(&joints));
    }
    Ok(set)
}

fn cmd_confusion(args: ConfusionArgs, defaults: &ConfigDefaults) -> Result<(), Error> {
    let set_a = trial_set_from_dir(&args.a)?;
    let set_b = trial_set_from_dir(&args.b)?;
    let opts = align_options(args.exact, args.radius, defaults);
    let matrix = task_confusion(&set_a, &set_b, &opts)?;
    let mut out = String::from("task");
    for id in &matrix.task_ids {
        out.push_str(&format!("\tT{id}"));
    }
    out.push('\n');
    for (i, id) in matrix.task_ids.iter().enumerate() {
        out.push_str(&format!("T{id}"));
        for v in &matrix.values[i] {
            out.push_str(&format!("\t{v:.4}"));
        }
        out.push('\n');
    }
    emit(args.output.as_deref(), &out)
}

/// Minimal trial record from a session: reaches from the endpoint trace,
/// completion time from the record span.
fn trial_from_session(session: &SessionFile, path: &Path) -> Result<TrialRecord, Error> {
    let task = session.header.task.ok_or_else(|| Error::Parse {
        path: path.display().to_string(),
        line: 0,
        msg: "session header lacks a task id".to_string(),
    })?;
    let joints = session.joint_series("chest", "upper", "forearm")?;
    let endpoints = joints.endpoints(&session.header.arm);
    let reaches = segment_reaches(&joints.timestamps, &endpoints, &SegmentOptions::default())?;
    let span = joints.timestamps.last().copied().unwrap_or(1.0).max(1e-9);
    let mut trial = TrialRecord::new(
        session.header.subject.clone(),
        TaskSpec::by_id(task)?,
        session
            .header
            .phase
            .unwrap_or(reachkin::sessions::Phase::Training),
        session.header.day.unwrap_or(0),
        session
            .header
            .system
            .unwrap_or(reachkin::sessions::System::HoloPham),
        span,
    )?;
    trial.joints = joints;
    trial.reaches = reaches;
    Ok(trial)
}

fn cmd_energy(args: EnergyArgs, defaults: &ConfigDefaults) -> Result<(), Error> {
    let mut trials = Vec::new();
    let mut limb_mass = None;
    for path in &args.inputs {
        let session = read_session(path)?;
        limb_mass.get_or_insert(session.header.limb_mass);
        trials.push(trial_from_session(&session, path)?);
    }
    let mass = args
        .mass
        .unwrap_or_else(|| defaults.f64("mass", limb_mass.unwrap_or(EnergyParams::DEFAULT_MASS)));
    let params = EnergyParams::reaching(mass)?;

    let mut out = String::new();
    if args.inputs.len() == 1 {
        let trial = &trials[0];
        out.push_str("reach\td_m\tT_s\te_J\n");
        let mut total = 0.0;
        for (k, seg) in trial.reaches.iter().enumerate() {
            let e = reach_energy(&params, seg.path_length, seg.duration)?;
            total += e;
            out.push_str(&format!(
                "{}\t{:.4}\t{:.3}\t{:.3}\n",
                k, seg.path_length, seg.duration, e
            ));
        }
        out.push_str(&format!("total\t\t\t{total:.3}\n"));
    } else {
        out.push_str("task\ttrials\tmean_J\tsem_J\n");
        for row in energy_table(&trials, &params)? {
            out.push_str(&format!(
                "T{}\t{}\t{:.3}\t{}\n",
                row.task,
                row.trials,
                row.mean,
                row.sem.map(|s| format!("{s:.3}")).unwrap_or("-".into())
            ));
        }
    }
    emit(args.output.as_deref(), &out)
}

/// Labeled EMG feature set from a session: `label <class>` markers open a
/// span for that class; spans close at the next label marker.
fn labeled_features(session: &SessionFile) -> Result<Vec<(Vec<f64>, GripClass)>, Error> {
    let mut labels: Vec<(f64, GripClass)> = Vec::new();
    for rec in &session.records {
        if let Payload::Marker(tag) = &rec.payload {
            if let Some(rest) = tag.strip_prefix("label ") {
                let class = GripClass::parse(rest.trim()).ok_or_else(|| {
                    Error::domain(format!("unknown grip class {rest:?} in label marker"))
                })?;
                labels.push((rec.t_ms as f64 / 1000.0, class));
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::Empty {
            what: "label markers",
        });
    }
    let mut times: Vec<f64> = Vec::new();
    let mut channels: [Vec<f64>; EMG_CHANNELS] = std::array::from_fn(|_| Vec::new());
    for device in session.devices_with(RecordKind::Emg) {
        for rec in session.device_records(RecordKind::Emg, &device) {
            if let Payload::Emg(sample) = &rec.payload {
                times.push(rec.t_ms as f64 / 1000.0);
                for (ch, v) in sample.iter().enumerate() {
                    channels[ch].push(*v);
                }
            }
        }
    }
    if times.is_empty() {
        return Err(Error::Empty {
            what: "EMG records",
        });
    }
    let mut out = Vec::new();
    for (idx, &(t0, class)) in labels.iter().enumerate() {
        let t1 = labels
            .get(idx + 1)
            .map(|&(t, _)| t)
            .unwrap_or(f64::INFINITY);
        let lo = times.partition_point(|&t| t < t0);
        let hi = times.partition_point(|&t| t < t1);
        if hi <= lo {
            continue;
        }
        let span: [Vec<f64>; EMG_CHANNELS] =
            std::array::from_fn(|ch| channels[ch][lo..hi].to_vec());
        for w in window_stream(
            &span,
            times[lo],
            EMG_RATE_HZ,
            DEFAULT_WINDOW_MS,
            DEFAULT_INCREMENT_MS,
        ) {
            out.push((feature_vec(&w)?, class));
        }
    }
    if out.is_empty() {
        return Err(Error::Empty {
            what: "labeled EMG windows",
        });
    }
    Ok(out)
}

fn feature_vec(w: &EmgWindow) -> Result<Vec<f64>, Error> {
    Ok(extract_features(w, DEFAULT_DEADZONE)?.to_vec())
}

fn cmd_decode_train(args: DecodeTrainArgs, defaults: &ConfigDefaults) -> Result<(), Error> {
    let session = read_session(&args.input)?;
    let data = labeled_features(&session)?;
    let lambda = args
        .lambda
        .unwrap_or_else(|| defaults.f64("lambda", DEFAULT_SHRINKAGE));
    let model = lda_train(&data, lambda)?;
    let file = std::fs::File::create(&args.output)
        .map_err(|e| Error::io(args.output.display().to_string(), e))?;
    reachkin::emg::write_model(&model, file)
        .map_err(|e| Error::io(args.output.display().to_string(), e))?;
    println!(
        "trained on {} windows across {} classes -> {}",
        data.len(),
        model.classes().len(),
        args.output.display()
    );
    Ok(())
}

fn cmd_decode_eval(args: DecodeEvalArgs) -> Result<(), Error> {
    let file = std::fs::File::open(&args.model)
        .map_err(|e| Error::io(args.model.display().to_string(), e))?;
    let model: LdaModel = reachkin::emg::read_model(file)?;
    let session = read_session(&args.input)?;
    let data = labeled_features(&session)?;
    let conf = confusion_eval(&model, &data)?;
    print!("truth\\pred");
    for c in &conf.classes {
        print!("\t{c}");
    }
    println!();
    for (i, c) in conf.classes.iter().enumerate() {
        print!("{c}");
        for v in &conf.counts[i] {
            print!("\t{v}");
        }
        println!();
    }
    println!("accuracy {:.4}", conf.accuracy);
    Ok(())
}

fn cmd_contacts(args: ContactsArgs, defaults: &ConfigDefaults) -> Result<(), Error> {
    let session = read_session(&args.input)?;
    let threshold = args
        .threshold
        .unwrap_or_else(|| defaults.f64("threshold", reachkin::contact::DEFAULT_THRESHOLD));
    let debounce = args
        .debounce
        .unwrap_or_else(|| defaults.usize("debounce", reachkin::contact::DEFAULT_DEBOUNCE));
    let frame_rate = args
        .frame_rate
        .unwrap_or_else(|| defaults.f64("frame_rate", reachkin::contact::DEFAULT_FRAME_RATE));
    let dt = 1.0 / frame_rate;
    let mode = if args.incremental {
        ImpulseMode::Incremental
    } else {
        ImpulseMode::Cumulative
    };

    let mut all_events = Vec::new();
    for device in session.devices_with(RecordKind::Impulse) {
        let recs = session.device_records(RecordKind::Impulse, &device);
        let Some(first) = recs.first() else { continue };
        let tips = match &first.payload {
            Payload::Impulse(v) => v.len(),
            _ => continue,
        };
        for tip in 0..tips {
            let mut timestamps = Vec::with_capacity(recs.len());
            let mut values = Vec::with_capacity(recs.len());
            for rec in &recs {
                if let Payload::Impulse(v) = &rec.payload {
                    timestamps.push(rec.t_ms as f64 / 1000.0);
                    values.push(v[tip]);
                }
            }
            let start = timestamps.first().copied().unwrap_or(0.0);
            let series =
                ImpulseSeries::new(format!("{device}:{tip}"), timestamps, values, mode)?;
            let forces = force_from_impulse(&series, dt)?;
            let events = detect_contacts(
                &forces,
                threshold,
                debounce,
                dt,
                start,
                &series.fingertip,
            )?;
            all_events.extend(events);
        }
    }
    all_events.sort_by(|a, b| a.onset.total_cmp(&b.onset).then(a.fingertip.cmp(&b.fingertip)));

    println!("fingertip\tonset_s\trelease_s\tpeak_N\timpulse_Ns");
    for ev in &all_events {
        println!(
            "{}\t{:.4}\t{:.4}\t{:.3}\t{:.4}",
            ev.fingertip, ev.onset, ev.release, ev.peak_force, ev.impulse
        );
    }

    if let Some(out) = &args.output {
        // Feedback commands ride along as marker records.
        let mut records = session.records.clone();
        let mut seq = 0u64;
        for ev in &all_events {
            for cmd in ev.feedback() {
                records.push(StreamRecord {
                    device: "feedback".to_string(),
                    seq,
                    t_ms: (cmd.time * 1000.0).round() as u64,
                    payload: Payload::Marker(format!(
                        "vibrate {} {}",
                        if cmd.vibrate { "on" } else { "off" },
                        cmd.fingertip
                    )),
                });
                seq += 1;
            }
        }
        let annotated = reachkin::ingest::assemble(session.header.clone(), records);
        write_session(&annotated, out)?;
    }
    Ok(())
}

fn cmd_score(args: ScoreArgs) -> Result<(), Error> {
    let rows = read_trials(&args.trials)?;
    let mut trials = Vec::with_capacity(rows.len());
    for row in &rows {
        trials.push(TrialRecord::new(
            row.subject.clone(),
            row.task,
            row.phase,
            row.day,
            row.system,
            row.completion_time,
        )?);
    }
    let completion = score_outcomes(&trials)?;
    let report = SessionReport {
        completion: Some(completion),
        progression: None,
    };
    finish_report(report, args.output.as_deref(), args.plots.as_deref())
}

fn finish_report(
    report: SessionReport,
    output: Option<&Path>,
    plots: Option<&Path>,
) -> Result<(), Error> {
    if let Some(completion) = &report.completion {
        for outcome in &completion.systems {
            let sig = outcome
                .ttest
                .map(|t| format!(" t={:.3} p={:.4} {}", t.t, t.p, outcome.stars()))
                .unwrap_or_default();
            println!(
                "{}: {} -> {} s, reduction {}%{}",
                outcome.system,
                format_percent(outcome.pre.mean),
                format_percent(outcome.post.mean),
                format_percent(outcome.reduction_pct),
                sig
            );
        }
    }
    if let Some(progression) = &report.progression {
        for task in &progression.tasks {
            let washout = task
                .washout
                .map(|w| format!(", washout {:.4}", w.mean))
                .unwrap_or_default();
            let retention = task
                .retention
                .map(|r| format!(", retention {r}"))
                .unwrap_or_default();
            println!(
                "task {}: {} training days{}{}",
                task.task,
                task.daily.len(),
                washout,
                retention
            );
        }
    }
    if let Some(path) = output {
        write_report(&report, path)?;
        // Read-back check keeps the written artifact trustworthy.
        let _ = read_report(path)?;
    }
    if let Some(dir) = plots {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        write_plot_tables(&report, dir)?;
    }
    Ok(())
}

fn cmd_progress(args: ProgressArgs, defaults: &ConfigDefaults) -> Result<(), Error> {
    let rows = read_trials(&args.trials)?;
    let base_dir = args
        .trials
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let mut trials = Vec::with_capacity(rows.len());
    for row in &rows {
        let mut trial = TrialRecord::new(
            row.subject.clone(),
            row.task,
            row.phase,
            row.day,
            row.system,
            row.completion_time,
        )?;
        let session_path = row.session_path.as_ref().ok_or_else(|| Error::Parse {
            path: args.trials.display().to_string(),
            line: 0,
            msg: format!(
                "trial for subject {} day {} lacks a session reference",
                row.subject, row.day
            ),
        })?;
        let resolved = if session_path.is_absolute() {
            session_path.clone()
        } else {
            base_dir.join(session_path)
        };
        let session = read_session(&resolved)?;
        trial.joints = session.joint_series("chest", "upper", "forearm")?;
        trials.push(trial);
    }

    let mut baselines = BTreeMap::new();
    for path in session_files(&args.baselines)? {
        let session = read_session(&path)?;
        let task = session.header.task.ok_or_else(|| Error::Parse {
            path: path.display().to_string(),
            line: 0,
            msg: "baseline session lacks a task id".to_string(),
        })?;
        baselines.insert(task, session.joint_series("chest", "upper", "forearm")?);
    }

    let opts = align_options(args.exact, args.radius, defaults);
    let progression = progression_report(&trials, &baselines, &opts)?;
    let report = SessionReport {
        completion: None,
        progression: Some(progression),
    };
    finish_report(report, args.output.as_deref(), args.plots.as_deref())
}

fn cmd_simulate(args: SimulateArgs, defaults: &ConfigDefaults) -> Result<(), Error> {
    std::fs::create_dir_all(&args.out)
        .map_err(|e| Error::io(args.out.display().to_string(), e))?;
    let separation = args
        .emg_separation
        .unwrap_or_else(|| defaults.f64("emg_separation", 1.0));
    let cfg = SynthConfig {
        trials: args.trials,
        seed: args.seed,
        noise: reachkin::ingest::synth::NoiseConfig {
            gyro_std: args.noise_gyro,
            accel_std: args.noise_accel,
            orientation_std: args.noise_quat,
        },
        emit_raw_imu: !args.no_imu,
        emg_separation: separation,
        ..SynthConfig::new(TaskSpec::by_id(args.task)?)
    };
    let (session, truth) = synth_session(&cfg)?;
    let name = format!("session_t{}_seed{}.txt", args.task, args.seed);
    let session_path = args.out.join(&name);
    write_session(&session, &session_path)?;

    // Ground-truth joint table alongside the session.
    let mut truth_text =
        String::from("t\tsh_w\tsh_x\tsh_y\tsh_z\telbow\twrist\taperture\tex\tey\tez\n");
    for k in 0..truth.joints.len() {
        let s = truth.joints.state(k);
        let p = truth.endpoints[k];
        truth_text.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            truth.joints.timestamps[k],
            s.shoulder.w,
            s.shoulder.x,
            s.shoulder.y,
            s.shoulder.z,
            s.elbow_flexion,
            s.wrist_rotation,
            s.hand_aperture,
            p[0],
            p[1],
            p[2]
        ));
    }
    let truth_path = args
        .out
        .join(format!("truth_t{}_seed{}.tsv", args.task, args.seed));
    std::fs::write(&truth_path, truth_text)
        .map_err(|e| Error::io(truth_path.display().to_string(), e))?;

    if args.calibration {
        let calibration = synth_calibration_session(args.seed, 4.0, separation);
        write_session(&calibration, &args.out.join("calibration.txt"))?;
    }
    println!("wrote {}", session_path.display());
    Ok(())
}

fn cmd_serve(args: ServeArgs) -> Result<(), Error> {
    std::fs::create_dir_all(&args.out)
        .map_err(|e| Error::io(args.out.display().to_string(), e))?;
    let (tx, rx) = std::sync::mpsc::channel();
    let config = ServerConfig {
        addr: format!("0.0.0.0:{}", args.port).parse().unwrap(),
        reorder_window: args.reorder_window,
        idle_timeout: std::time::Duration::from_secs(args.idle_timeout_s),
    };
    let server = IngestServer::spawn(config, tx)?;
    println!("listening on {}", server.local_addr());
    let mut count = 0usize;
    while args.max_sessions.map(|m| count < m).unwrap_or(true) {
        let Ok(ingested) = rx.recv() else { break };
        count += 1;
        let path = args.out.join(format!("ingest_{count:04}.txt"));
        write_session(&ingested.session, &path)?;
        println!(
            "session {} from {}: {} records, {} gaps, {} rejected lines, {} duplicates -> {}",
            count,
            ingested.peer,
            ingested.session.records.len(),
            ingested.session.gaps.len(),
            ingested.stats.rejected_lines,
            ingested.session.duplicates,
            path.display()
        );
    }
    server.shutdown();
    Ok(())
}
