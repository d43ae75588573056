//! Time-tag file formats.
//!
//! Binary: one JSON metadata line terminated by `\n`, then 9-byte records
//! `(u8 detector, u64 little-endian timestamp in ps)`.
//!
//! Text: `# <metadata json>` on the first line, then one `detector<TAB>timestamp`
//! record per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Event, EventSink, StreamMetadata, TimetagStream};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimetagFormat {
    #[default]
    Binary,
    Text,
}

pub struct TimetagWriter<W: Write> {
    out: BufWriter<W>,
    format: TimetagFormat,
}

impl<W: Write> TimetagWriter<W> {
    pub fn new(inner: W, meta: &StreamMetadata, format: TimetagFormat) -> Result<Self> {
        let mut out = BufWriter::new(inner);
        let header = serde_json::to_string(meta)?;
        match format {
            TimetagFormat::Binary => writeln!(out, "{header}")?,
            TimetagFormat::Text => writeln!(out, "# {header}")?,
        }
        Ok(Self { out, format })
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        self.out.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

impl<W: Write> EventSink for TimetagWriter<W> {
    fn push(&mut self, e: Event) -> Result<()> {
        match self.format {
            TimetagFormat::Binary => {
                self.out.write_all(&[e.detector])?;
                self.out.write_all(&e.timestamp.to_le_bytes())?;
            }
            TimetagFormat::Text => writeln!(self.out, "{}\t{}", e.detector, e.timestamp)?,
        }
        Ok(())
    }
}

pub fn write_binary<W: Write>(out: W, stream: &TimetagStream) -> Result<()> {
    write_with(out, stream, TimetagFormat::Binary)
}

pub fn write_text<W: Write>(out: W, stream: &TimetagStream) -> Result<()> {
    write_with(out, stream, TimetagFormat::Text)
}

fn write_with<W: Write>(out: W, stream: &TimetagStream, format: TimetagFormat) -> Result<()> {
    let mut w = TimetagWriter::new(out, &stream.metadata, format)?;
    for &e in &stream.events {
        w.push(e)?;
    }
    w.finish()?;
    Ok(())
}

/// Streaming reader; the format is detected from the first byte.
pub struct TimetagReader<R: BufRead> {
    input: R,
    format: TimetagFormat,
    metadata: StreamMetadata,
    line: u64,
    buf: String,
}

impl TimetagReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        Self::new(BufReader::new(File::open(path)?))
    }
}

impl<R: BufRead> TimetagReader<R> {
    pub fn new(mut input: R) -> Result<Self> {
        let mut header = String::new();
        input.read_line(&mut header)?;
        let (format, json) = match header.strip_prefix('#') {
            Some(rest) => (TimetagFormat::Text, rest.trim()),
            None => (TimetagFormat::Binary, header.trim()),
        };
        let metadata: StreamMetadata = serde_json::from_str(json).map_err(|e| Error::Parse {
            line: 1,
            message: format!("bad metadata header: {e}"),
        })?;
        metadata.validate()?;
        Ok(Self {
            input,
            format,
            metadata,
            line: 1,
            buf: String::new(),
        })
    }

    pub fn metadata(&self) -> &StreamMetadata {
        &self.metadata
    }

    pub fn format(&self) -> TimetagFormat {
        self.format
    }

    fn next_binary(&mut self) -> Option<Result<Event>> {
        let mut rec = [0u8; 9];
        let mut filled = 0;
        while filled < rec.len() {
            match self.input.read(&mut rec[filled..]) {
                Ok(0) if filled == 0 => return None,
                Ok(0) => {
                    return Some(Err(Error::Parse {
                        line: self.line,
                        message: format!("truncated record after {filled} bytes"),
                    }))
                }
                Ok(n) => filled += n,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Some(Err(e.into())),
            }
        }
        self.line += 1;
        let mut ts = [0u8; 8];
        ts.copy_from_slice(&rec[1..]);
        Some(Ok(Event {
            detector: rec[0],
            timestamp: u64::from_le_bytes(ts),
        }))
    }

    fn next_text(&mut self) -> Option<Result<Event>> {
        loop {
            self.buf.clear();
            match self.input.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            self.line += 1;
            let l = self.buf.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            let line = self.line;
            let parse = |s: Option<&str>, what: &str| -> Result<u64> {
                s.and_then(|v| v.trim().parse().ok()).ok_or_else(|| Error::Parse {
                    line,
                    message: format!("expected integer {what}"),
                })
            };
            let mut parts = l.split('\t');
            let rec = parse(parts.next(), "detector id").and_then(|id| {
                let ts = parse(parts.next(), "timestamp")?;
                let id = u8::try_from(id).map_err(|_| Error::Parse {
                    line,
                    message: format!("detector id {id} out of range"),
                })?;
                Ok(Event {
                    detector: id,
                    timestamp: ts,
                })
            });
            return Some(rec);
        }
    }
}

impl<R: BufRead> Iterator for TimetagReader<R> {
    type Item = Result<Event>;

    fn next(&mut self) -> Option<Self::Item> {
        match self.format {
            TimetagFormat::Binary => self.next_binary(),
            TimetagFormat::Text => self.next_text(),
        }
    }
}

/// Reads a whole stream into memory.
pub fn read_stream<R: BufRead>(input: R) -> Result<TimetagStream> {
    let reader = TimetagReader::new(input)?;
    let metadata = reader.metadata().clone();
    let events = reader.collect::<Result<Vec<_>>>()?;
    TimetagStream::new(metadata, events)
}
