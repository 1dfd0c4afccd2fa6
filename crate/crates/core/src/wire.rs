//! Device-to-host streaming protocol.
//!
//! Every record is a 32-bit carrier written as unsigned ASCII decimal and terminated by
//! a comma. Bit 31 marks a time record (milliseconds since session start); a clear bit
//! 31 marks a sensor sample. The device sends a time record before every tenth sample.

use std::io::{self, ErrorKind, Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{write_recording, RecordingMeta};
use crate::recording::{Activity, Recording, Sample};
use crate::synth::{generate_recording, ScenarioSpec, MAX_SENSOR_VALUE};

pub const TIME_BIT: u32 = 1 << 31;
pub const VALUE_MASK: u32 = TIME_BIT - 1;
/// Sensor samples per time record.
pub const TIME_BEACON_INTERVAL: usize = 10;
pub const DEFAULT_SESSION_LIMIT_S: f64 = 60.0;
/// Longest valid token: the ten digits of `u32::MAX`.
const MAX_TOKEN_LEN: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RecordKind {
    Time,
    Sensor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WireRecord {
    pub kind: RecordKind,
    pub value: u32,
}

impl WireRecord {
    pub fn new(kind: RecordKind, value: u32) -> Result<WireRecord> {
        if value > VALUE_MASK {
            return Err(Error::invalid(format!("wire value {value} does not fit in 31 bits")));
        }
        Ok(WireRecord { kind, value })
    }

    pub fn sensor(value: u32) -> Result<WireRecord> {
        WireRecord::new(RecordKind::Sensor, value)
    }

    pub fn time(ms: u32) -> Result<WireRecord> {
        WireRecord::new(RecordKind::Time, ms)
    }

    pub fn carrier(self) -> u32 {
        match self.kind {
            RecordKind::Time => self.value | TIME_BIT,
            RecordKind::Sensor => self.value,
        }
    }

    pub fn from_carrier(carrier: u32) -> WireRecord {
        let kind = if carrier & TIME_BIT != 0 { RecordKind::Time } else { RecordKind::Sensor };
        WireRecord {
            kind,
            value: carrier & VALUE_MASK,
        }
    }
}

/// Appends the framed bytes of `rec` to `out`.
pub fn encode_into(rec: &WireRecord, out: &mut Vec<u8>) -> Result<()> {
    let checked = WireRecord::new(rec.kind, rec.value)?;
    out.extend_from_slice(checked.carrier().to_string().as_bytes());
    out.push(b',');
    Ok(())
}

pub fn encode(rec: &WireRecord) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(MAX_TOKEN_LEN + 1);
    encode_into(rec, &mut out)?;
    Ok(out)
}

/// Incremental decoder for a comma-framed stream split at arbitrary byte boundaries.
///
/// Tokens that are empty, contain non-digits or exceed `u32` are dropped and counted;
/// decoding resumes after the next comma.
#[derive(Debug, Clone, Default)]
pub struct Decoder {
    token: Vec<u8>,
    overflowed: bool,
    malformed: u64,
}

impl Decoder {
    pub fn new() -> Decoder {
        Decoder::default()
    }

    pub fn malformed(&self) -> u64 {
        self.malformed
    }

    /// Bytes of an unfinished token held over from earlier chunks.
    pub fn pending(&self) -> usize {
        self.token.len() + usize::from(self.overflowed)
    }

    pub fn feed(&mut self, chunk: &[u8], out: &mut Vec<WireRecord>) {
        for &b in chunk {
            if b == b',' {
                match self.finish_token() {
                    Some(c) => out.push(WireRecord::from_carrier(c)),
                    None => self.malformed += 1,
                }
                self.token.clear();
                self.overflowed = false;
            } else if self.token.len() < MAX_TOKEN_LEN {
                self.token.push(b);
            } else {
                self.overflowed = true;
            }
        }
    }

    fn finish_token(&self) -> Option<u32> {
        if self.overflowed || self.token.is_empty() || !self.token.iter().all(u8::is_ascii_digit) {
            return None;
        }
        std::str::from_utf8(&self.token).ok()?.parse().ok()
    }
}

/// Decodes a complete sequence of chunks; returns the records and the malformed count.
pub fn decode_stream<I, C>(chunks: I) -> (Vec<WireRecord>, u64)
where
    I: IntoIterator<Item = C>,
    C: AsRef<[u8]>,
{
    let mut d = Decoder::new();
    let mut out = Vec::new();
    for c in chunks {
        d.feed(c.as_ref(), &mut out);
    }
    (out, d.malformed())
}

/// Copies `from` to `to` in writes of at most `chunk` bytes, flushing after each.
/// Used to exercise receivers against fragmented delivery.
pub fn relay(mut from: impl Read, mut to: impl Write, chunk: usize) -> io::Result<u64> {
    let mut buf = vec![0u8; 4096];
    let mut total = 0;
    loop {
        let n = match from.read(&mut buf) {
            Ok(0) => break,
            Ok(n) => n,
            Err(e) if e.kind() == ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        };
        for piece in buf[..n].chunks(chunk.max(1)) {
            to.write_all(piece)?;
            to.flush()?;
        }
        total += n as u64;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SampleSource {
    Scenario(ScenarioSpec),
    Replay(Vec<i64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    /// Seconds of signal per session.
    pub session_limit: f64,
    pub sample_rate: f64,
    pub source: SampleSource,
    /// Playback speed relative to real time.
    pub speed: f64,
}

impl SessionConfig {
    pub fn new(source: SampleSource, sample_rate: f64) -> SessionConfig {
        SessionConfig {
            session_limit: DEFAULT_SESSION_LIMIT_S,
            sample_rate,
            source,
            speed: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.session_limit > 0.0 && self.session_limit.is_finite()) {
            return Err(Error::invalid("session limit must be positive"));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if !(self.speed > 0.0 && self.speed.is_finite()) {
            return Err(Error::invalid("speed must be positive"));
        }
        Ok(())
    }

    /// Sensor values for one session, clamped to the 31-bit range.
    pub fn session_values(&self) -> Result<Vec<u32>> {
        let max = (self.session_limit * self.sample_rate).round() as usize;
        let values: Vec<i64> = match &self.source {
            SampleSource::Scenario(spec) => {
                // Generate the whole scenario and cut it at the limit, so a short
                // session still sees the movement where the scenario puts it.
                let spec = ScenarioSpec {
                    sample_rate: self.sample_rate,
                    ..spec.clone()
                };
                generate_recording(&spec)?.0.samples.iter().map(|s| s.value).collect()
            }
            SampleSource::Replay(v) => v.clone(),
        };
        Ok(values
            .into_iter()
            .take(max)
            .map(|v| v.clamp(0, MAX_SENSOR_VALUE) as u32)
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SessionEnd {
    LimitReached,
    SourceExhausted,
    ClientDisconnected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionOutcome {
    pub sensor_records: usize,
    pub time_records: usize,
    pub end: SessionEnd,
    pub wall_seconds: f64,
}

/// Streams one session to a connected client, pacing samples at `sample_rate * speed`.
pub fn serve_session(mut stream: TcpStream, cfg: &SessionConfig) -> Result<SessionOutcome> {
    cfg.validate()?;
    let values = cfg.session_values()?;
    let limit_samples = (cfg.session_limit * cfg.sample_rate).round() as usize;
    stream.set_nodelay(true)?;
    let start = Instant::now();
    let mut buf = Vec::with_capacity(1024);
    let mut outcome = SessionOutcome {
        sensor_records: 0,
        time_records: 0,
        end: if values.len() < limit_samples { SessionEnd::SourceExhausted } else { SessionEnd::LimitReached },
        wall_seconds: 0.0,
    };
    let batch = TIME_BEACON_INTERVAL;
    for (chunk_no, chunk) in values.chunks(batch).enumerate() {
        let first = chunk_no * batch;
        let due = Duration::from_secs_f64(first as f64 / cfg.sample_rate / cfg.speed);
        if let Some(wait) = due.checked_sub(start.elapsed()) {
            std::thread::sleep(wait);
        }
        buf.clear();
        let ms = (first as f64 * 1000.0 / cfg.sample_rate).round() as u32;
        encode_into(&WireRecord::time(ms.min(VALUE_MASK))?, &mut buf)?;
        for &v in chunk {
            encode_into(&WireRecord::sensor(v)?, &mut buf)?;
        }
        if let Err(e) = stream.write_all(&buf) {
            log::info!("client went away after {} samples: {e}", outcome.sensor_records);
            outcome.end = SessionEnd::ClientDisconnected;
            break;
        }
        outcome.time_records += 1;
        outcome.sensor_records += chunk.len();
    }
    let _ = stream.flush();
    let _ = stream.shutdown(std::net::Shutdown::Both);
    outcome.wall_seconds = start.elapsed().as_secs_f64();
    Ok(outcome)
}

/// Accepts clients one at a time and streams a session to each. Stops after
/// `max_sessions` sessions when given, otherwise runs until accept fails.
pub fn run_device(listener: &TcpListener, cfg: &SessionConfig, max_sessions: Option<usize>) -> Result<Vec<SessionOutcome>> {
    cfg.validate()?;
    let mut outcomes = Vec::new();
    while max_sessions.is_none_or(|m| outcomes.len() < m) {
        let (stream, peer) = listener.accept()?;
        log::info!("session {} with {peer}", outcomes.len() + 1);
        let o = serve_session(stream, cfg)?;
        log::info!("session ended: {:?}, {} samples", o.end, o.sensor_records);
        outcomes.push(o);
    }
    Ok(outcomes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceiverConfig {
    pub sample_rate: f64,
    pub source_id: String,
    pub label: Activity,
    pub movement_onset: Option<f64>,
    /// Session length the device promised; a shorter stream is marked truncated.
    pub expected_duration: Option<f64>,
}

impl ReceiverConfig {
    pub fn new(sample_rate: f64, source_id: impl Into<String>) -> ReceiverConfig {
        ReceiverConfig {
            sample_rate,
            source_id: source_id.into(),
            label: Activity::Stationary,
            movement_onset: None,
            expected_duration: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedSession {
    pub recording: Recording,
    pub meta: RecordingMeta,
    pub time_records: usize,
}

/// Timestamps sensor records: each takes the latest time record plus `k / sample_rate`
/// for the `k`-th sample after it.
pub fn pair_records(records: &[WireRecord], sample_rate: f64) -> Vec<Sample> {
    let mut base = 0.0;
    let mut k = 0usize;
    let mut out = Vec::new();
    for r in records {
        match r.kind {
            RecordKind::Time => {
                base = r.value as f64 / 1000.0;
                k = 0;
            }
            RecordKind::Sensor => {
                out.push(Sample {
                    time: base + k as f64 / sample_rate,
                    value: r.value as i64,
                });
                k += 1;
            }
        }
    }
    out
}

/// Reads a session from `stream` until the remote end closes it.
pub fn receive(mut stream: impl Read, cfg: &ReceiverConfig) -> Result<ReceivedSession> {
    if !(cfg.sample_rate > 0.0) {
        return Err(Error::invalid("sample rate must be positive"));
    }
    let mut decoder = Decoder::new();
    let mut records = Vec::new();
    let mut buf = vec![0u8; 8192];
    let mut broken = false;
    loop {
        match stream.read(&mut buf) {
            Ok(0) => break,
            Ok(n) => decoder.feed(&buf[..n], &mut records),
            Err(e) if e.kind() == ErrorKind::Interrupted => continue,
            Err(e) => {
                log::warn!("connection lost: {e}");
                broken = true;
                break;
            }
        }
    }
    let time_records = records.iter().filter(|r| r.kind == RecordKind::Time).count();
    let samples = pair_records(&records, cfg.sample_rate);
    if samples.is_empty() {
        return Err(Error::insufficient("no sensor records received"));
    }
    let mut recording = Recording::new(samples, cfg.sample_rate, cfg.label, cfg.source_id.clone())?;
    recording.movement_onset = cfg.movement_onset;
    let duration = recording.duration();
    let short = cfg
        .expected_duration
        .is_some_and(|d| duration + TIME_BEACON_INTERVAL as f64 / cfg.sample_rate <= d);
    let truncated = broken || decoder.pending() > 0 || short;
    let meta = RecordingMeta {
        malformed_count: decoder.malformed(),
        truncated,
        ..RecordingMeta::of(&recording)
    };
    Ok(ReceivedSession {
        recording,
        meta,
        time_records,
    })
}

/// Connects to a device, receives one session and writes it to `out`.
pub fn run_receiver(addr: impl ToSocketAddrs, cfg: &ReceiverConfig, out: &Path) -> Result<ReceivedSession> {
    let stream = TcpStream::connect(addr)?;
    let session = receive(stream, cfg)?;
    write_recording(out, &session.recording, &session.meta)?;
    Ok(session)
}
