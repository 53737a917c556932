//! Line-protocol TCP ingest endpoint.
//!
//! One session per connection: header lines, records in any near-order,
//! and the `M end session` terminator. Each connection gets its own handler
//! thread feeding a per-device reorder buffer; a single assembler owns the
//! session state and the completed session goes to the sink channel. The
//! assembled result is identical to reading the same records from a file.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::Sender;
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use crate::error::{Error, Result};

use super::format::{apply_header, parse_record_line};
use super::{assemble, check_version, SessionFile, SessionHeader, StreamRecord, END_MARKER};

/// Ingest endpoint configuration.
#[derive(Debug, Clone)]
pub struct ServerConfig {
    /// Bind address; port 0 picks an ephemeral port.
    pub addr: SocketAddr,
    /// Per-device reorder window: records buffered awaiting their sequence
    /// slot before the earliest is force-released.
    pub reorder_window: usize,
    /// Read timeout; a quiet connection past this is finalized as-is.
    pub idle_timeout: Duration,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            addr: "127.0.0.1:0".parse().unwrap(),
            reorder_window: 16,
            idle_timeout: Duration::from_secs(30),
        }
    }
}

/// Per-connection ingest counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IngestStats {
    /// Malformed lines rejected (connection kept).
    pub rejected_lines: u64,
    /// Records force-released past the reorder window.
    pub forced_releases: u64,
    /// Terminator seen before the connection closed.
    pub completed: bool,
}

/// A completed (or connection-terminated) session with its counters.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestedSession {
    pub session: SessionFile,
    pub stats: IngestStats,
    pub peer: SocketAddr,
}

/// Per-device sequence reorder buffer. Releases records in sequence order;
/// overflow past the window force-releases the earliest buffered record.
struct ReorderBuffer {
    window: usize,
    pending: BTreeMap<u64, StreamRecord>,
    next: Option<u64>,
    forced: u64,
}

impl ReorderBuffer {
    fn new(window: usize) -> Self {
        Self {
            window: window.max(1),
            pending: BTreeMap::new(),
            next: None,
            forced: 0,
        }
    }

    fn push(&mut self, record: StreamRecord, out: &mut Vec<StreamRecord>) {
        if let Some(next) = self.next {
            if record.seq < next {
                // Late arrival below the release horizon; pass it straight
                // through, deduplication happens at assembly.
                out.push(record);
                return;
            }
        }
        if self.pending.contains_key(&record.seq) {
            // Duplicate of a buffered record; let assembly count it.
            out.push(record);
            return;
        }
        self.pending.insert(record.seq, record);
        self.drain(out);
        while self.pending.len() > self.window {
            // Give up waiting for anything below the earliest buffered
            // sequence. That counts as forced only when an expected
            // sequence number is being skipped.
            let (&seq, _) = self.pending.iter().next().unwrap();
            if matches!(self.next, Some(next) if seq > next) {
                self.forced += 1;
            }
            let rec = self.pending.remove(&seq).unwrap();
            out.push(rec);
            self.next = Some(seq + 1);
            self.drain(out);
        }
    }

    fn drain(&mut self, out: &mut Vec<StreamRecord>) {
        while let Some(next) = self.next {
            match self.pending.remove(&next) {
                Some(rec) => {
                    out.push(rec);
                    self.next = Some(next + 1);
                }
                None => break,
            }
        }
    }

    fn flush(&mut self, out: &mut Vec<StreamRecord>) {
        for (_, rec) in std::mem::take(&mut self.pending) {
            out.push(rec);
        }
    }
}

/// Read one connection's session off the socket.
fn handle_connection(
    stream: TcpStream,
    peer: SocketAddr,
    config: &ServerConfig,
    sink: &Sender<IngestedSession>,
) {
    let _ = stream.set_read_timeout(Some(config.idle_timeout));
    let reader = BufReader::new(stream);
    let mut header = SessionHeader::default();
    let mut saw_version = false;
    let mut buffers: BTreeMap<String, ReorderBuffer> = BTreeMap::new();
    let mut ordered: Vec<StreamRecord> = Vec::new();
    let mut stats = IngestStats::default();

    for line in reader.lines() {
        let line = match line {
            Ok(line) => line,
            // Timeout or reset: finalize whatever arrived.
            Err(_) => break,
        };
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            let rest = rest.trim();
            if rest.is_empty() {
                continue;
            }
            let (key, value) = rest.split_once(' ').unwrap_or((rest, ""));
            if key == "format" {
                if check_version(value.trim()).is_err() {
                    stats.rejected_lines += 1;
                    continue;
                }
                saw_version = true;
            }
            if apply_header(&mut header, key, value.trim()).is_err() {
                stats.rejected_lines += 1;
            }
            continue;
        }
        if trimmed == END_MARKER {
            stats.completed = true;
            break;
        }
        match parse_record_line(trimmed) {
            Ok(record) => {
                let _ = saw_version;
                buffers
                    .entry(record.device.clone())
                    .or_insert_with(|| ReorderBuffer::new(config.reorder_window))
                    .push(record, &mut ordered);
            }
            Err(_) => {
                stats.rejected_lines += 1;
            }
        }
    }
    for buffer in buffers.values_mut() {
        buffer.flush(&mut ordered);
        stats.forced_releases += buffer.forced;
    }
    if ordered.is_empty() && !saw_version && !stats.completed {
        // Nothing useful arrived on this connection.
        return;
    }
    let session = assemble(header, ordered);
    let _ = sink.send(IngestedSession {
        session,
        stats,
        peer,
    });
}

/// Running ingest endpoint. Dropping the handle leaves the listener
/// running; call [`IngestServer::shutdown`] to stop accepting.
pub struct IngestServer {
    local_addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accept_thread: Option<JoinHandle<()>>,
}

impl IngestServer {
    /// Bind and start accepting. Completed sessions are delivered to
    /// `sink` in arrival order.
    pub fn spawn(config: ServerConfig, sink: Sender<IngestedSession>) -> Result<IngestServer> {
        let listener = TcpListener::bind(config.addr)
            .map_err(|e| Error::io(config.addr.to_string(), e))?;
        let local_addr = listener
            .local_addr()
            .map_err(|e| Error::io(config.addr.to_string(), e))?;
        listener
            .set_nonblocking(true)
            .map_err(|e| Error::io(local_addr.to_string(), e))?;
        let stop = Arc::new(AtomicBool::new(false));
        let stop_flag = stop.clone();
        let accept_thread = std::thread::spawn(move || {
            let mut handlers: Vec<JoinHandle<()>> = Vec::new();
            while !stop_flag.load(Ordering::Relaxed) {
                match listener.accept() {
                    Ok((stream, peer)) => {
                        let _ = stream.set_nonblocking(false);
                        let sink = sink.clone();
                        let config = config.clone();
                        handlers.push(std::thread::spawn(move || {
                            handle_connection(stream, peer, &config, &sink);
                        }));
                    }
                    Err(ref e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                        std::thread::sleep(Duration::from_millis(5));
                    }
                    Err(_) => break,
                }
            }
            for handle in handlers {
                let _ = handle.join();
            }
        });
        Ok(IngestServer {
            local_addr,
            stop,
            accept_thread: Some(accept_thread),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    /// Stop accepting and join the accept loop (open connections finish
    /// first).
    pub fn shutdown(mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(handle) = self.accept_thread.take() {
            let _ = handle.join();
        }
    }
}

impl Drop for IngestServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(handle) = self.accept_thread.take() {
            let _ = handle.join();
        }
    }
}
