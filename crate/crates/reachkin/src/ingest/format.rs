//! Text serialization: session files, report files, and trial tables.
//!
//! Floats are written in Rust's shortest round-trip form, which keeps
//! repeated writes byte-identical and read-write-read lossless.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::kinematics::ArmModel;
use crate::quat::Quaternion;
use crate::sessions::{
    CompletionReport, DayCost, Phase, PhaseStats, ProgressionReport, SessionReport, System,
    SystemOutcome, TTest, TaskProgression, TaskSpec, WilcoxonTest,
};

use super::{
    assemble, check_version, Payload, RecordKind, SessionFile, SessionHeader, StreamRecord,
    END_MARKER, FORMAT_VERSION,
};

fn parse_f64(tok: &str) -> std::result::Result<f64, String> {
    let v: f64 = tok.parse().map_err(|_| format!("bad number {tok:?}"))?;
    if !v.is_finite() {
        return Err(format!("non-finite number {tok:?}"));
    }
    Ok(v)
}

fn parse_u64(tok: &str) -> std::result::Result<u64, String> {
    tok.parse().map_err(|_| format!("bad integer {tok:?}"))
}

/// Parse one record line (no comment lines here). Errors carry a message
/// only; callers attach path and line number.
pub fn parse_record_line(line: &str) -> std::result::Result<StreamRecord, String> {
    let mut tokens = line.split_whitespace();
    let kind_tok = tokens.next().ok_or("empty line")?;
    let kind = RecordKind::from_tag(kind_tok).ok_or(format!("unknown record kind {kind_tok:?}"))?;
    let device = tokens.next().ok_or("missing device")?.to_string();
    let seq = parse_u64(tokens.next().ok_or("missing sequence number")?)?;
    let t_ms = parse_u64(tokens.next().ok_or("missing timestamp")?)?;
    let rest: Vec<&str> = tokens.collect();

    let payload = match kind {
        RecordKind::Quaternion => {
            if rest.len() != 4 {
                return Err(format!("Q payload needs 4 values, got {}", rest.len()));
            }
            let v: Vec<f64> = rest.iter().map(|t| parse_f64(t)).collect::<std::result::Result<_, _>>()?;
            let q = Quaternion::new(v[0], v[1], v[2], v[3]);
            // Already-unit values pass through bit-exact so that write and
            // read round-trip; lower-precision senders get renormalized.
            let q = if q.is_unit(1e-9) {
                q.canonicalized()
            } else if q.is_unit(1e-3) {
                q.normalize().map_err(|e| e.to_string())?
            } else {
                return Err(format!("quaternion norm {} too far from 1", q.norm()));
            };
            Payload::Quaternion(q)
        }
        RecordKind::RawImu => {
            if rest.len() != 9 && rest.len() != 10 {
                return Err(format!("I payload needs 9 or 10 values, got {}", rest.len()));
            }
            let v: Vec<f64> = rest.iter().map(|t| parse_f64(t)).collect::<std::result::Result<_, _>>()?;
            let mag = if v[6] == 0.0 && v[7] == 0.0 && v[8] == 0.0 {
                None
            } else {
                Some([v[6], v[7], v[8]])
            };
            Payload::RawImu {
                gyro: [v[0], v[1], v[2]],
                accel: [v[3], v[4], v[5]],
                mag,
                temperature: v.get(9).copied(),
            }
        }
        RecordKind::Emg => {
            if rest.len() != 8 {
                return Err(format!("E payload needs 8 values, got {}", rest.len()));
            }
            let v: Vec<f64> = rest.iter().map(|t| parse_f64(t)).collect::<std::result::Result<_, _>>()?;
            let mut ch = [0.0; 8];
            ch.copy_from_slice(&v);
            Payload::Emg(ch)
        }
        RecordKind::Impulse => {
            if rest.is_empty() {
                return Err("J payload needs at least one fingertip value".to_string());
            }
            let v: Vec<f64> = rest.iter().map(|t| parse_f64(t)).collect::<std::result::Result<_, _>>()?;
            Payload::Impulse(v)
        }
        RecordKind::Marker => Payload::Marker(rest.join(" ")),
    };
    Ok(StreamRecord {
        device,
        seq,
        t_ms,
        payload,
    })
}

/// Render one record in the line grammar.
pub fn record_line(rec: &StreamRecord) -> String {
    let mut line = format!(
        "{} {} {} {}",
        rec.payload.kind().tag(),
        rec.device,
        rec.seq,
        rec.t_ms
    );
    match &rec.payload {
        Payload::Quaternion(q) => {
            write!(line, " {} {} {} {}", q.w, q.x, q.y, q.z).unwrap();
        }
        Payload::RawImu {
            gyro,
            accel,
            mag,
            temperature,
        } => {
            let m = mag.unwrap_or([0.0, 0.0, 0.0]);
            write!(
                line,
                " {} {} {} {} {} {} {} {} {}",
                gyro[0], gyro[1], gyro[2], accel[0], accel[1], accel[2], m[0], m[1], m[2]
            )
            .unwrap();
            if let Some(t) = temperature {
                write!(line, " {t}").unwrap();
            }
        }
        Payload::Emg(ch) => {
            for v in ch {
                write!(line, " {v}").unwrap();
            }
        }
        Payload::Impulse(v) => {
            for j in v {
                write!(line, " {j}").unwrap();
            }
        }
        Payload::Marker(tag) => {
            write!(line, " {tag}").unwrap();
        }
    }
    line
}

/// Apply a header `key value` pair. Unknown keys land in `extra`.
pub fn apply_header(
    header: &mut SessionHeader,
    key: &str,
    value: &str,
) -> std::result::Result<(), String> {
    match key {
        "format" => {
            header.version = value.to_string();
        }
        "subject" => header.subject = value.to_string(),
        "phase" => {
            header.phase = Some(Phase::parse(value).ok_or(format!("unknown phase {value:?}"))?)
        }
        "day" => header.day = Some(parse_u64(value)? as u32),
        "system" => {
            header.system = Some(System::parse(value).ok_or(format!("unknown system {value:?}"))?)
        }
        "task" => header.task = Some(parse_u64(value)? as u8),
        "arm" => {
            let v: Vec<f64> = value
                .split_whitespace()
                .map(parse_f64)
                .collect::<std::result::Result<_, _>>()?;
            if v.len() != 5 {
                return Err(format!("arm needs 5 values, got {}", v.len()));
            }
            header.arm = ArmModel::new(v[0], v[1], [v[2], v[3], v[4]]).map_err(|e| e.to_string())?;
        }
        "limb_mass" => header.limb_mass = parse_f64(value)?,
        "object_mass_ratio" => header.object_mass_ratio = parse_f64(value)?,
        "latency_ms" => {
            let v: Vec<u64> = value
                .split_whitespace()
                .map(parse_u64)
                .collect::<std::result::Result<_, _>>()?;
            if v.len() != 2 {
                return Err("latency_ms needs 2 values".to_string());
            }
            header.latency_ms = (v[0] as u32, v[1] as u32);
        }
        "beta" => header.beta = parse_f64(value)?,
        "seed" => header.seed = Some(parse_u64(value)?),
        "loaded" => {
            header.loaded = match value {
                "true" => true,
                "false" => false,
                other => return Err(format!("loaded must be true/false, got {other:?}")),
            }
        }
        other => {
            header.extra.insert(other.to_string(), value.to_string());
        }
    }
    Ok(())
}

/// Canonical header block, one `# key value` line each.
pub fn header_lines(header: &SessionHeader) -> Vec<String> {
    let mut lines = vec![
        format!("# format {}", header.version),
        format!("# subject {}", header.subject),
    ];
    if let Some(phase) = header.phase {
        lines.push(format!("# phase {phase}"));
    }
    if let Some(day) = header.day {
        lines.push(format!("# day {day}"));
    }
    if let Some(system) = header.system {
        lines.push(format!("# system {system}"));
    }
    if let Some(task) = header.task {
        lines.push(format!("# task {task}"));
    }
    lines.push(format!(
        "# arm {} {} {} {} {}",
        header.arm.upper_arm,
        header.arm.forearm,
        header.arm.shoulder_offset[0],
        header.arm.shoulder_offset[1],
        header.arm.shoulder_offset[2]
    ));
    lines.push(format!("# limb_mass {}", header.limb_mass));
    lines.push(format!("# object_mass_ratio {}", header.object_mass_ratio));
    lines.push(format!(
        "# latency_ms {} {}",
        header.latency_ms.0, header.latency_ms.1
    ));
    lines.push(format!("# beta {}", header.beta));
    if let Some(seed) = header.seed {
        lines.push(format!("# seed {seed}"));
    }
    lines.push(format!("# loaded {}", header.loaded));
    for (k, v) in &header.extra {
        lines.push(format!("# {k} {v}"));
    }
    lines
}

/// Parse a whole session from a reader. `label` names the source in
/// errors.
pub fn read_session_from<R: Read>(reader: R, label: &str) -> Result<SessionFile> {
    let mut header = SessionHeader::default();
    let mut saw_version = false;
    let mut records: Vec<StreamRecord> = Vec::new();
    let mut impulse_arity: BTreeMap<String, usize> = BTreeMap::new();

    let buf = BufReader::new(reader);
    for (idx, line) in buf.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(label, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            path: label.to_string(),
            line: line_no,
            msg,
        };
        if let Some(rest) = trimmed.strip_prefix('#') {
            let rest = rest.trim();
            if rest.is_empty() {
                continue;
            }
            let (key, value) = rest.split_once(' ').unwrap_or((rest, ""));
            if key == "format" {
                check_version(value)?;
                saw_version = true;
            }
            apply_header(&mut header, key, value.trim()).map_err(parse_err)?;
            continue;
        }
        if trimmed == END_MARKER {
            break;
        }
        let record = parse_record_line(trimmed).map_err(parse_err)?;
        if !saw_version {
            return Err(Error::UnsupportedVersion {
                found: "(missing format header)".to_string(),
                supported: FORMAT_VERSION.to_string(),
            });
        }
        if let Payload::Impulse(values) = &record.payload {
            let arity = impulse_arity
                .entry(record.device.clone())
                .or_insert(values.len());
            if *arity != values.len() {
                return Err(parse_err(format!(
                    "J arity changed for device {:?}: {} then {}",
                    record.device,
                    arity,
                    values.len()
                )));
            }
        }
        records.push(record);
    }
    if !saw_version {
        return Err(Error::UnsupportedVersion {
            found: "(missing format header)".to_string(),
            supported: FORMAT_VERSION.to_string(),
        });
    }
    Ok(assemble(header, records))
}

pub fn read_session(path: impl AsRef<Path>) -> Result<SessionFile> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    read_session_from(file, &path.display().to_string())
}

/// Render a session in canonical text form, terminator included.
pub fn session_to_string(session: &SessionFile) -> String {
    let mut out = String::new();
    for line in header_lines(&session.header) {
        out.push_str(&line);
        out.push('\n');
    }
    for rec in &session.records {
        out.push_str(&record_line(rec));
        out.push('\n');
    }
    out.push_str(END_MARKER);
    out.push('\n');
    out
}

pub fn write_session(session: &SessionFile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, session_to_string(session))
        .map_err(|e| Error::io(path.display().to_string(), e))
}

// ---------------------------------------------------------------------
// Report files
// ---------------------------------------------------------------------

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v}"),
        None => "-".to_string(),
    }
}

fn parse_opt(tok: &str) -> std::result::Result<Option<f64>, String> {
    if tok == "-" {
        Ok(None)
    } else {
        Ok(Some(
            tok.parse().map_err(|_| format!("bad number {tok:?}"))?,
        ))
    }
}

/// Structured key/value + table-block report text.
pub fn report_to_string(report: &SessionReport) -> String {
    let mut out = String::new();
    writeln!(out, "report {FORMAT_VERSION}").unwrap();
    if let Some(completion) = &report.completion {
        for outcome in &completion.systems {
            writeln!(out, "[completion {}]", outcome.system).unwrap();
            writeln!(out, "pre_n {}", outcome.pre.n).unwrap();
            writeln!(out, "pre_mean {}", outcome.pre.mean).unwrap();
            writeln!(out, "pre_sem {}", fmt_opt(outcome.pre.sem)).unwrap();
            writeln!(out, "post_n {}", outcome.post.n).unwrap();
            writeln!(out, "post_mean {}", outcome.post.mean).unwrap();
            writeln!(out, "post_sem {}", fmt_opt(outcome.post.sem)).unwrap();
            writeln!(out, "reduction_pct {}", outcome.reduction_pct).unwrap();
            if let Some(t) = &outcome.ttest {
                writeln!(out, "t {}", t.t).unwrap();
                writeln!(out, "df {}", t.df).unwrap();
                writeln!(out, "p {}", t.p).unwrap();
                writeln!(out, "degenerate {}", t.degenerate).unwrap();
                writeln!(out, "stars {:?}", t.stars()).unwrap();
            }
            if let Some(w) = &outcome.wilcoxon {
                writeln!(out, "wilcoxon_n {}", w.n).unwrap();
                writeln!(out, "wilcoxon_w {}", w.w).unwrap();
                writeln!(out, "wilcoxon_p {}", w.p).unwrap();
            }
        }
    }
    if let Some(progression) = &report.progression {
        for task in &progression.tasks {
            writeln!(out, "[progression {}]", task.task).unwrap();
            for d in &task.daily {
                writeln!(out, "day {} {} {} {}", d.day, d.mean, d.variance, d.n).unwrap();
            }
            if let Some(w) = &task.washout {
                writeln!(out, "washout {} {} {} {}", w.day, w.mean, w.variance, w.n).unwrap();
            }
            if let Some(r) = task.retention {
                writeln!(out, "retention {r}").unwrap();
            }
        }
    }
    out
}

/// Parse a report produced by [`report_to_string`].
pub fn report_from_string(text: &str, label: &str) -> Result<SessionReport> {
    enum Section {
        None,
        Completion(System),
        Progression,
    }

    let mut report = SessionReport::default();
    let mut completion = CompletionReport::default();
    let mut progression = ProgressionReport::default();
    let mut section = Section::None;
    let mut saw_header = false;

    // Scratch for the current completion section.
    let mut kv: BTreeMap<String, String> = BTreeMap::new();
    let mut current_task: Option<TaskProgression> = None;

    let finish_completion = |kv: &mut BTreeMap<String, String>,
                             system: System,
                             completion: &mut CompletionReport,
                             label: &str|
     -> Result<()> {
        let get = |key: &str| -> Result<String> {
            kv.get(key).cloned().ok_or_else(|| Error::Parse {
                path: label.to_string(),
                line: 0,
                msg: format!("missing {key} in completion section"),
            })
        };
        let bad = |msg: String| Error::Parse {
            path: label.to_string(),
            line: 0,
            msg,
        };
        let pre = PhaseStats {
            n: get("pre_n")?.parse().map_err(|_| bad("bad pre_n".into()))?,
            mean: get("pre_mean")?.parse().map_err(|_| bad("bad pre_mean".into()))?,
            sem: parse_opt(&get("pre_sem")?).map_err(bad)?,
        };
        let post = PhaseStats {
            n: get("post_n")?.parse().map_err(|_| bad("bad post_n".into()))?,
            mean: get("post_mean")?.parse().map_err(|_| bad("bad post_mean".into()))?,
            sem: parse_opt(&get("post_sem")?).map_err(bad)?,
        };
        let ttest = if kv.contains_key("t") {
            Some(TTest {
                t: get("t")?.parse().map_err(|_| bad("bad t".into()))?,
                df: get("df")?.parse().map_err(|_| bad("bad df".into()))?,
                p: get("p")?.parse().map_err(|_| bad("bad p".into()))?,
                degenerate: get("degenerate")? == "true",
            })
        } else {
            None
        };
        let wilcoxon = if kv.contains_key("wilcoxon_n") {
            Some(WilcoxonTest {
                n: get("wilcoxon_n")?.parse().map_err(|_| bad("bad wilcoxon_n".into()))?,
                w: get("wilcoxon_w")?.parse().map_err(|_| bad("bad wilcoxon_w".into()))?,
                p: get("wilcoxon_p")?.parse().map_err(|_| bad("bad wilcoxon_p".into()))?,
            })
        } else {
            None
        };
        completion.systems.push(SystemOutcome {
            system,
            pre,
            post,
            reduction_pct: get("reduction_pct")?
                .parse()
                .map_err(|_| bad("bad reduction_pct".into()))?,
            ttest,
            wilcoxon,
        });
        kv.clear();
        Ok(())
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            path: label.to_string(),
            line: line_no,
            msg,
        };
        if !saw_header {
            let rest = line
                .strip_prefix("report ")
                .ok_or_else(|| parse_err("expected `report <version>` header".to_string()))?;
            check_version(rest.trim())?;
            saw_header = true;
            continue;
        }
        if let Some(inner) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            // Close the open section first.
            match std::mem::replace(&mut section, Section::None) {
                Section::Completion(system) => {
                    finish_completion(&mut kv, system, &mut completion, label)?
                }
                Section::Progression => {
                    if let Some(task) = current_task.take() {
                        progression.tasks.push(task);
                    }
                }
                Section::None => {}
            }
            let mut parts = inner.split_whitespace();
            match parts.next() {
                Some("completion") => {
                    let name = parts.next().ok_or_else(|| parse_err("missing system".into()))?;
                    let system = System::parse(name)
                        .ok_or_else(|| parse_err(format!("unknown system {name:?}")))?;
                    section = Section::Completion(system);
                }
                Some("progression") => {
                    let id: u8 = parts
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| parse_err("missing task id".into()))?;
                    section = Section::Progression;
                    current_task = Some(TaskProgression {
                        task: id,
                        daily: Vec::new(),
                        washout: None,
                        retention: None,
                    });
                }
                other => return Err(parse_err(format!("unknown section {other:?}"))),
            }
            continue;
        }
        match &mut section {
            Section::None => return Err(parse_err("content outside any section".to_string())),
            Section::Completion(_) => {
                let (k, v) = line
                    .split_once(' ')
                    .ok_or_else(|| parse_err("expected `key value`".to_string()))?;
                kv.insert(k.to_string(), v.trim().trim_matches('"').to_string());
            }
            Section::Progression => {
                let task = current_task.as_mut().unwrap();
                let tokens: Vec<&str> = line.split_whitespace().collect();
                match tokens[0] {
                    "day" | "washout" if tokens.len() == 5 => {
                        let cost = DayCost {
                            day: tokens[1].parse().map_err(|_| parse_err("bad day".into()))?,
                            mean: tokens[2].parse().map_err(|_| parse_err("bad mean".into()))?,
                            variance: tokens[3]
                                .parse()
                                .map_err(|_| parse_err("bad variance".into()))?,
                            n: tokens[4].parse().map_err(|_| parse_err("bad n".into()))?,
                        };
                        if tokens[0] == "day" {
                            task.daily.push(cost);
                        } else {
                            task.washout = Some(cost);
                        }
                    }
                    "retention" if tokens.len() == 2 => {
                        task.retention = Some(tokens[1] == "true");
                    }
                    _ => return Err(parse_err(format!("bad progression line {line:?}"))),
                }
            }
        }
    }
    match section {
        Section::Completion(system) => finish_completion(&mut kv, system, &mut completion, label)?,
        Section::Progression => {
            if let Some(task) = current_task.take() {
                progression.tasks.push(task);
            }
        }
        Section::None => {}
    }
    if !saw_header {
        return Err(Error::UnsupportedVersion {
            found: "(empty report)".to_string(),
            supported: FORMAT_VERSION.to_string(),
        });
    }
    if !completion.systems.is_empty() {
        report.completion = Some(completion);
    }
    if !progression.tasks.is_empty() {
        report.progression = Some(progression);
    }
    Ok(report)
}

pub fn write_report(report: &SessionReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, report_to_string(report))
        .map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_report(path: impl AsRef<Path>) -> Result<SessionReport> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    report_from_string(&text, &path.display().to_string())
}

/// Tab-delimited plot tables: task completion times and day-by-day costs.
pub fn write_plot_tables(report: &SessionReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut written = Vec::new();
    if let Some(completion) = &report.completion {
        let mut out = String::from("system\tpre_mean\tpre_sem\tpost_mean\tpost_sem\treduction_pct\tstars\n");
        for o in &completion.systems {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                o.system,
                o.pre.mean,
                fmt_opt(o.pre.sem),
                o.post.mean,
                fmt_opt(o.post.sem),
                o.reduction_pct,
                o.stars()
            )
            .unwrap();
        }
        let path = dir.join("task_times.tsv");
        std::fs::write(&path, out).map_err(|e| Error::io(path.display().to_string(), e))?;
        written.push(path);
    }
    if let Some(progression) = &report.progression {
        let mut out = String::from("task\tpoint\tday\tmean\tvariance\tn\n");
        for task in &progression.tasks {
            for d in &task.daily {
                writeln!(
                    out,
                    "{}\ttraining\t{}\t{}\t{}\t{}",
                    task.task, d.day, d.mean, d.variance, d.n
                )
                .unwrap();
            }
            if let Some(w) = &task.washout {
                writeln!(
                    out,
                    "{}\twashout\t{}\t{}\t{}\t{}",
                    task.task, w.day, w.mean, w.variance, w.n
                )
                .unwrap();
            }
        }
        let path = dir.join("day_cost.tsv");
        std::fs::write(&path, out).map_err(|e| Error::io(path.display().to_string(), e))?;
        written.push(path);
    }
    Ok(written)
}

// ---------------------------------------------------------------------
// Trial tables
// ---------------------------------------------------------------------

/// One row of a trials table: completion-time record plus an optional
/// session file reference for joint-dynamics analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub subject: String,
    pub task: TaskSpec,
    pub phase: Phase,
    pub day: u32,
    pub system: System,
    pub completion_time: f64,
    pub session_path: Option<PathBuf>,
}

/// Read a whitespace-delimited trials table:
/// `subject task phase day system completion_s session`.
pub fn read_trials(path: impl AsRef<Path>) -> Result<Vec<TrialRow>> {
    let path = path.as_ref();
    let label = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(&label, e))?;
    let mut rows = Vec::new();
    let mut saw_version = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            path: label.clone(),
            line: line_no,
            msg,
        };
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(version) = rest.strip_prefix("trials ") {
                check_version(version.trim())?;
                saw_version = true;
            }
            continue;
        }
        if !saw_version {
            return Err(Error::UnsupportedVersion {
                found: "(missing `# trials <version>` header)".to_string(),
                supported: FORMAT_VERSION.to_string(),
            });
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 7 {
            return Err(parse_err(format!("expected 7 columns, got {}", tokens.len())));
        }
        let task_id: u8 = tokens[1]
            .parse()
            .map_err(|_| parse_err(format!("bad task id {:?}", tokens[1])))?;
        rows.push(TrialRow {
            subject: tokens[0].to_string(),
            task: TaskSpec::by_id(task_id)?,
            phase: Phase::parse(tokens[2])
                .ok_or_else(|| parse_err(format!("unknown phase {:?}", tokens[2])))?,
            day: tokens[3]
                .parse()
                .map_err(|_| parse_err(format!("bad day {:?}", tokens[3])))?,
            system: System::parse(tokens[4])
                .ok_or_else(|| parse_err(format!("unknown system {:?}", tokens[4])))?,
            completion_time: parse_f64(tokens[5]).map_err(parse_err)?,
            session_path: match tokens[6] {
                "-" => None,
                p => Some(PathBuf::from(p)),
            },
        });
    }
    if !saw_version {
        return Err(Error::UnsupportedVersion {
            found: "(missing `# trials <version>` header)".to_string(),
            supported: FORMAT_VERSION.to_string(),
        });
    }
    Ok(rows)
}

pub fn write_trials(rows: &[TrialRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    writeln!(out, "# trials {FORMAT_VERSION}").unwrap();
    writeln!(out, "# columns subject task phase day system completion_s session").unwrap();
    for r in rows {
        writeln!(
            out,
            "{} {} {} {} {} {} {}",
            r.subject,
            r.task.id,
            r.phase,
            r.day,
            r.system,
            r.completion_time,
            r.session_path
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_else(|| "-".to_string())
        )
        .unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}
