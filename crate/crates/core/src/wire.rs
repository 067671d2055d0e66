//! Line-delimited JSON files for event streams and outcome streams.
//!
//! Line 1 is a header naming the format, its version and the embedding
//! dimension. Every following non-blank line holds one record. Floats are
//! written in shortest round-trip form so a file parses back bit-exactly.

use std::io::{self, BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::orchestrator::AssignmentOutcome;
use crate::types::DetectionEvent;

pub const EVENTS_FORMAT: &str = "osreid-events";
pub const OUTCOMES_FORMAT: &str = "osreid-outcomes";
pub const WIRE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamHeader {
    pub format: String,
    pub version: u32,
    pub d: usize,
}

impl StreamHeader {
    pub fn events(d: usize) -> Self {
        Self { format: EVENTS_FORMAT.into(), version: WIRE_VERSION, d }
    }

    pub fn outcomes(d: usize) -> Self {
        Self { format: OUTCOMES_FORMAT.into(), version: WIRE_VERSION, d }
    }
}

#[derive(Debug, Error)]
pub enum WireError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line 1: missing header")]
    MissingHeader,
    #[error("line 1: bad header: {0}")]
    Header(String),
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: embedding has {actual} values, header says d = {expected}")]
    Dimension { line: usize, expected: usize, actual: usize },
}

impl WireError {
    /// 1-based line number of the offending record, if any.
    pub fn line(&self) -> Option<usize> {
        match self {
            WireError::MissingHeader | WireError::Header(_) => Some(1),
            WireError::Parse { line, .. } | WireError::Dimension { line, .. } => Some(*line),
            WireError::Io(_) => None,
        }
    }
}

fn write_line<W: Write, T: Serialize>(w: &mut W, value: &T) -> io::Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n")
}

pub fn write_events<W: Write>(mut w: W, d: usize, events: &[DetectionEvent]) -> io::Result<()> {
    write_line(&mut w, &StreamHeader::events(d))?;
    for e in events {
        write_line(&mut w, e)?;
    }
    w.flush()
}

pub fn write_outcomes<W: Write>(mut w: W, d: usize, outcomes: &[AssignmentOutcome]) -> io::Result<()> {
    write_line(&mut w, &StreamHeader::outcomes(d))?;
    for o in outcomes {
        write_line(&mut w, o)?;
    }
    w.flush()
}

/// Streaming reader over the records of a line-delimited file.
///
/// The header is consumed by [`RecordReader::open`]; iteration yields one
/// record per non-blank line, tagged with errors that cite the line number.
pub struct RecordReader<R, T> {
    lines: io::Lines<R>,
    header: StreamHeader,
    line: usize,
    _record: std::marker::PhantomData<T>,
}

pub type EventReader<R> = RecordReader<R, DetectionEvent>;
pub type OutcomeReader<R> = RecordReader<R, AssignmentOutcome>;

impl<R: BufRead, T> RecordReader<R, T> {
    pub fn open(reader: R, format: &str) -> Result<Self, WireError> {
        let mut lines = reader.lines();
        let first = lines.next().ok_or(WireError::MissingHeader)??;
        let header: StreamHeader =
            serde_json::from_str(&first).map_err(|e| WireError::Header(e.to_string()))?;
        if header.format != format {
            return Err(WireError::Header(format!(
                "expected format {format:?}, found {:?}",
                header.format
            )));
        }
        if header.version != WIRE_VERSION {
            return Err(WireError::Header(format!("unsupported version {}", header.version)));
        }
        if header.d == 0 {
            return Err(WireError::Header("d must be ≥ 1".into()));
        }
        Ok(Self { lines, header, line: 1, _record: std::marker::PhantomData })
    }

    pub fn header(&self) -> &StreamHeader {
        &self.header
    }
}

impl<R: BufRead> EventReader<R> {
    pub fn events(reader: R) -> Result<Self, WireError> {
        Self::open(reader, EVENTS_FORMAT)
    }
}

impl<R: BufRead> OutcomeReader<R> {
    pub fn outcomes(reader: R) -> Result<Self, WireError> {
        Self::open(reader, OUTCOMES_FORMAT)
    }
}

/// Per-record check applied after parsing.
pub trait WireRecord: DeserializeOwned {
    fn check(&self, _d: usize, _line: usize) -> Result<(), WireError> {
        Ok(())
    }
}

impl WireRecord for DetectionEvent {
    fn check(&self, d: usize, line: usize) -> Result<(), WireError> {
        match &self.embedding {
            Some(e) if e.dim() != d => Err(WireError::Dimension { line, expected: d, actual: e.dim() }),
            _ => Ok(()),
        }
    }
}

impl WireRecord for AssignmentOutcome {}

impl<R: BufRead, T: WireRecord> Iterator for RecordReader<R, T> {
    type Item = Result<T, WireError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let raw = match self.lines.next()? {
                Ok(raw) => raw,
                Err(e) => return Some(Err(e.into())),
            };
            self.line += 1;
            if raw.trim().is_empty() {
                continue;
            }
            let line = self.line;
            let parsed = serde_json::from_str::<T>(&raw)
                .map_err(|source| WireError::Parse { line, source })
                .and_then(|rec| rec.check(self.header.d, line).map(|()| rec));
            return Some(parsed);
        }
    }
}

pub fn read_events<R: BufRead>(reader: R) -> Result<(StreamHeader, Vec<DetectionEvent>), WireError> {
    let r = EventReader::events(reader)?;
    let header = r.header().clone();
    Ok((header, r.collect::<Result<_, _>>()?))
}

pub fn read_outcomes<R: BufRead>(
    reader: R,
) -> Result<(StreamHeader, Vec<AssignmentOutcome>), WireError> {
    let r = OutcomeReader::outcomes(reader)?;
    let header = r.header().clone();
    Ok((header, r.collect::<Result<_, _>>()?))
}
