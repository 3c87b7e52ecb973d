//! Lifetime registry and trace logger.
//!
//! Every profiled object has a registry entry holding its creation tick, its
//! most recent use tick and a survival flag. The collector drives the flag
//! protocol (`reset_flags` → `mark_survivor`* → `flush_unflagged`); entries
//! left unflagged are finalized into the trace log with the collection tick.
//! At termination `finalize` emits everything still registered as censored.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use thiserror::Error;

use crate::heap::{ObjId, ObjKind};

/// Logical time: one tick per allocation or use event.
pub type Tick = u64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProfilerError {
    #[error("object {0} registered twice")]
    DuplicateId(ObjId),
    #[error("object {0} is not registered")]
    UnknownId(ObjId),
    #[error("protocol violation: {0}")]
    ProtocolViolation(&'static str),
}

/// A finalized (or in-flight) lifetime record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LifetimeRecord {
    pub id: ObjId,
    pub kind: ObjKind,
    pub size_slots: usize,
    pub create_tick: Tick,
    /// `None` until the first use. Serialized as `-1`.
    pub last_use_tick: Option<Tick>,
    pub survived: bool,
    pub collect_tick: Tick,
    /// Still reachable when the program ended.
    pub censored: bool,
}

#[derive(Debug, Clone)]
struct Entry {
    record: LifetimeRecord,
    address: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Mutating,
    Flagging,
    Finalized,
}

/// Run metadata written as the first log line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogHeader {
    pub gc_interval: u64,
    pub heap_slots: usize,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceLog {
    pub header: LogHeader,
    pub records: Vec<LifetimeRecord>,
    pub end_tick: Tick,
}

#[derive(Debug)]
pub struct Profiler {
    clock: Tick,
    registry: HashMap<ObjId, Entry>,
    finished: Vec<LifetimeRecord>,
    phase: Phase,
    header: LogHeader,
}

impl Profiler {
    pub fn new(header: LogHeader) -> Self {
        Profiler {
            clock: 0,
            registry: HashMap::new(),
            finished: Vec::new(),
            phase: Phase::Mutating,
            header,
        }
    }

    pub fn now(&self) -> Tick {
        self.clock
    }

    /// The tick the next event will be stamped with.
    pub fn next_tick(&self) -> Tick {
        self.clock + 1
    }

    pub fn registered(&self) -> usize {
        self.registry.len()
    }

    pub fn record(&self, id: ObjId) -> Option<&LifetimeRecord> {
        self.registry.get(&id).map(|e| &e.record)
    }

    /// Last known address of a registered object.
    pub fn address(&self, id: ObjId) -> Option<usize> {
        self.registry.get(&id).map(|e| e.address)
    }

    fn expect_phase(&self, phase: Phase, what: &'static str) -> Result<(), ProfilerError> {
        if self.phase == phase {
            Ok(())
        } else {
            Err(ProfilerError::ProtocolViolation(what))
        }
    }

    pub fn record_creation(
        &mut self,
        id: ObjId,
        kind: ObjKind,
        size_slots: usize,
        address: usize,
    ) -> Result<Tick, ProfilerError> {
        self.expect_phase(Phase::Mutating, "creation outside mutator phase")?;
        if self.registry.contains_key(&id) {
            return Err(ProfilerError::DuplicateId(id));
        }
        self.clock += 1;
        let record = LifetimeRecord {
            id,
            kind,
            size_slots,
            create_tick: self.clock,
            last_use_tick: None,
            survived: false,
            collect_tick: 0,
            censored: false,
        };
        self.registry.insert(id, Entry { record, address });
        Ok(self.clock)
    }

    pub fn record_use(&mut self, id: ObjId) -> Result<Tick, ProfilerError> {
        self.expect_phase(Phase::Mutating, "use outside mutator phase")?;
        let entry = self
            .registry
            .get_mut(&id)
            .ok_or(ProfilerError::UnknownId(id))?;
        self.clock += 1;
        entry.record.last_use_tick = Some(self.clock);
        Ok(self.clock)
    }

    pub fn reset_flags(&mut self) -> Result<(), ProfilerError> {
        self.expect_phase(Phase::Mutating, "reset_flags while already flagging")?;
        for entry in self.registry.values_mut() {
            entry.record.survived = false;
        }
        self.phase = Phase::Flagging;
        Ok(())
    }

    pub fn mark_survivor(&mut self, id: ObjId, new_address: usize) -> Result<(), ProfilerError> {
        self.expect_phase(Phase::Flagging, "mark_survivor before reset_flags")?;
        let entry = self
            .registry
            .get_mut(&id)
            .ok_or(ProfilerError::UnknownId(id))?;
        entry.record.survived = true;
        entry.address = new_address;
        Ok(())
    }

    /// Finalizes and removes every unflagged entry, stamped with `clock`.
    /// Returned records are ordered by id.
    pub fn flush_unflagged(&mut self, clock: Tick) -> Result<Vec<LifetimeRecord>, ProfilerError> {
        self.expect_phase(Phase::Flagging, "flush_unflagged before reset_flags")?;
        let mut flushed = Vec::new();
        self.registry.retain(|_, entry| {
            if entry.record.survived {
                true
            } else {
                let mut record = entry.record.clone();
                record.collect_tick = clock;
                record.censored = false;
                flushed.push(record);
                false
            }
        });
        flushed.sort_by_key(|r| r.id);
        self.finished.extend(flushed.iter().cloned());
        self.phase = Phase::Mutating;
        Ok(flushed)
    }

    /// Closes the run: every still-registered object is emitted as censored
    /// with `collect_tick = end_tick`.
    pub fn finalize(&mut self, end_tick: Tick) -> Result<TraceLog, ProfilerError> {
        self.expect_phase(Phase::Mutating, "finalize called twice or mid-collection")?;
        if end_tick < self.clock {
            return Err(ProfilerError::ProtocolViolation("end tick precedes clock"));
        }
        self.phase = Phase::Finalized;
        let mut records = std::mem::take(&mut self.finished);
        records.extend(self.registry.drain().map(|(_, entry)| {
            let mut record = entry.record;
            record.collect_tick = end_tick;
            record.censored = true;
            record.survived = false;
            record
        }));
        records.sort_by_key(|r| (r.collect_tick, r.id));
        Ok(TraceLog {
            header: self.header.clone(),
            records,
            end_tick,
        })
    }
}

impl TraceLog {
    /// Renders the log in DRAGLOG v1 text form.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(64 + self.records.len() * 32);
        writeln!(out, "{}", self.header).unwrap();
        for r in &self.records {
            let last_use = match r.last_use_tick {
                Some(t) => t as i64,
                None => -1,
            };
            writeln!(
                out,
                "OBJ {} {} {} {} {} {} {}",
                r.id,
                r.kind.tag(),
                r.size_slots,
                r.create_tick,
                last_use,
                r.collect_tick,
                if r.censored { 'C' } else { 'F' }
            )
            .unwrap();
        }
        writeln!(out, "END {}", self.end_tick).unwrap();
        out
    }

    pub fn censored_count(&self) -> usize {
        self.records.iter().filter(|r| r.censored).count()
    }
}

impl fmt::Display for LogHeader {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "DRAGLOG 1 gc_interval={} heap_slots={} source={}",
            self.gc_interval, self.heap_slots, self.source
        )
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct LogParseError {
    pub line: usize,
    pub message: String,
}

fn bad(line: usize, message: impl Into<String>) -> LogParseError {
    LogParseError {
        line,
        message: message.into(),
    }
}

fn field<T: FromStr>(line: usize, name: &str, raw: Option<&str>) -> Result<T, LogParseError> {
    let raw = raw.ok_or_else(|| bad(line, format!("missing field {name}")))?;
    raw.parse()
        .map_err(|_| bad(line, format!("bad {name}: {raw:?}")))
}

fn parse_header(text: &str) -> Result<LogHeader, LogParseError> {
    let rest = text
        .strip_prefix("DRAGLOG 1 ")
        .ok_or_else(|| bad(1, "expected `DRAGLOG 1` header"))?;
    let rest = rest
        .strip_prefix("gc_interval=")
        .ok_or_else(|| bad(1, "missing gc_interval"))?;
    let (k, rest) = rest
        .split_once(' ')
        .ok_or_else(|| bad(1, "missing heap_slots"))?;
    let rest = rest
        .strip_prefix("heap_slots=")
        .ok_or_else(|| bad(1, "missing heap_slots"))?;
    let (c, rest) = rest
        .split_once(' ')
        .ok_or_else(|| bad(1, "missing source"))?;
    let source = rest
        .strip_prefix("source=")
        .ok_or_else(|| bad(1, "missing source"))?;
    Ok(LogHeader {
        gc_interval: field(1, "gc_interval", Some(k))?,
        heap_slots: field(1, "heap_slots", Some(c))?,
        source: source.to_string(),
    })
}

impl FromStr for TraceLog {
    type Err = LogParseError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, first) = lines.next().ok_or_else(|| bad(1, "empty log"))?;
        let header = parse_header(first)?;
        let mut records = Vec::new();
        let mut seen = std::collections::HashSet::new();
        let mut end_tick = None;
        let mut last_line = 1;
        for (no, line) in lines {
            last_line = no;
            if end_tick.is_some() {
                if line.trim().is_empty() {
                    continue;
                }
                return Err(bad(no, "content after END"));
            }
            let mut parts = line.split_ascii_whitespace();
            match parts.next() {
                Some("OBJ") => {
                    let id = ObjId(field(no, "id", parts.next())?);
                    let kind_raw = parts.next().unwrap_or("");
                    let kind = ObjKind::from_tag(kind_raw)
                        .ok_or_else(|| bad(no, format!("bad kind {kind_raw:?}")))?;
                    let size_slots = field(no, "size", parts.next())?;
                    let create_tick: Tick = field(no, "create", parts.next())?;
                    let last_use: i64 = field(no, "last_use", parts.next())?;
                    let collect_tick: Tick = field(no, "collect", parts.next())?;
                    let censored = match parts.next() {
                        Some("C") => true,
                        Some("F") => false,
                        other => return Err(bad(no, format!("bad censor flag {other:?}"))),
                    };
                    if parts.next().is_some() {
                        return Err(bad(no, "trailing fields"));
                    }
                    let last_use_tick = match last_use {
                        -1 => None,
                        t if t >= 0 => Some(t as Tick),
                        t => return Err(bad(no, format!("bad last_use {t}"))),
                    };
                    if create_tick > collect_tick {
                        return Err(bad(no, "collected before creation"));
                    }
                    if let Some(u) = last_use_tick {
                        if u < create_tick || u > collect_tick {
                            return Err(bad(no, "last use outside lifetime"));
                        }
                    }
                    if !seen.insert(id) {
                        return Err(bad(no, format!("duplicate object {id}")));
                    }
                    records.push(LifetimeRecord {
                        id,
                        kind,
                        size_slots,
                        create_tick,
                        last_use_tick,
                        survived: false,
                        collect_tick,
                        censored,
                    });
                }
                Some("END") => {
                    let t: Tick = field(no, "end tick", parts.next())?;
                    if parts.next().is_some() {
                        return Err(bad(no, "trailing fields"));
                    }
                    if let Some(r) = records.iter().find(|r| r.collect_tick > t) {
                        return Err(bad(no, format!("object {} collected after END", r.id)));
                    }
                    end_tick = Some(t);
                }
                _ => return Err(bad(no, format!("unrecognized line {line:?}"))),
            }
        }
        let end_tick = end_tick.ok_or_else(|| bad(last_line, "truncated log: missing END"))?;
        Ok(TraceLog {
            header,
            records,
            end_tick,
        })
    }
}
