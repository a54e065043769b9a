//! Line-oriented text formats for scenarios and traces.
//!
//! Both formats start with a version line. Every other line is a record:
//! a keyword followed by `key=value` fields (scenario) or positional
//! columns (trace events). `#` starts a comment. Durations in scenario
//! files take an optional `us`, `ms` or `s` suffix; traces use raw
//! microseconds.

mod scenario;
mod trace;

pub use scenario::{parse_scenario, write_scenario, SCENARIO_MAGIC, SCENARIO_VERSION};
pub use trace::{parse_trace, write_trace, TraceFile, TRACE_MAGIC, TRACE_VERSION};

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{MajorFrame, Micros, MinorFrame, PartitionId, PartitionSpec, MICROS_PER_MS, MICROS_PER_SEC};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}, field `{field}`: {message}")]
    Field {
        line: usize,
        field: String,
        message: String,
    },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("unsupported {what} version `{found}` (expected {expected})")]
    UnsupportedVersion {
        what: &'static str,
        found: String,
        expected: u32,
    },
}

impl ParseError {
    pub fn line(&self) -> Option<usize> {
        match self {
            ParseError::Field { line, .. } | ParseError::Line { line, .. } => Some(*line),
            ParseError::UnsupportedVersion { .. } => None,
        }
    }
}

pub fn format_duration(us: Micros) -> String {
    if us != 0 && us.is_multiple_of(MICROS_PER_SEC) {
        format!("{}s", us / MICROS_PER_SEC)
    } else if us != 0 && us.is_multiple_of(MICROS_PER_MS) {
        format!("{}ms", us / MICROS_PER_MS)
    } else if us == 0 {
        "0".into()
    } else {
        format!("{us}us")
    }
}

pub fn parse_duration(s: &str) -> Result<Micros, String> {
    let (digits, scale) = if let Some(d) = s.strip_suffix("us") {
        (d, 1)
    } else if let Some(d) = s.strip_suffix("ms") {
        (d, MICROS_PER_MS)
    } else if let Some(d) = s.strip_suffix('s') {
        (d, MICROS_PER_SEC)
    } else {
        (s, 1)
    };
    let n: Micros = digits.parse().map_err(|_| format!("bad duration `{s}`"))?;
    n.checked_mul(scale).ok_or_else(|| format!("duration `{s}` overflows"))
}

/// `key=value` fields of one record, in order of appearance.
#[derive(Debug)]
pub(crate) struct Fields<'a> {
    line: usize,
    map: BTreeMap<&'a str, &'a str>,
}

impl<'a> Fields<'a> {
    pub(crate) fn parse(line: usize, tokens: impl Iterator<Item = &'a str>) -> Result<Self, ParseError> {
        let mut map = BTreeMap::new();
        for tok in tokens {
            let (k, v) = tok.split_once('=').ok_or_else(|| ParseError::Line {
                line,
                message: format!("expected key=value, found `{tok}`"),
            })?;
            if map.insert(k, v).is_some() {
                return Err(ParseError::Field {
                    line,
                    field: k.into(),
                    message: "repeated".into(),
                });
            }
        }
        Ok(Fields { line, map })
    }

    pub(crate) fn err(&self, field: &str, message: impl Into<String>) -> ParseError {
        ParseError::Field {
            line: self.line,
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn opt(&mut self, key: &str) -> Option<&'a str> {
        self.map.remove(key)
    }

    pub(crate) fn req(&mut self, key: &str) -> Result<&'a str, ParseError> {
        self.map.remove(key).ok_or_else(|| self.err(key, "missing"))
    }

    pub(crate) fn parse_req<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, ParseError>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.req(key)?;
        raw.parse().map_err(|e: T::Err| self.err(key, e.to_string()))
    }

    pub(crate) fn parse_opt<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>, ParseError>
    where
        T::Err: std::fmt::Display,
    {
        match self.opt(key) {
            None => Ok(None),
            Some(raw) => raw.parse().map(Some).map_err(|e: T::Err| self.err(key, e.to_string())),
        }
    }

    pub(crate) fn duration_req(&mut self, key: &str) -> Result<Micros, ParseError> {
        let raw = self.req(key)?;
        parse_duration(raw).map_err(|m| self.err(key, m))
    }

    pub(crate) fn duration_opt(&mut self, key: &str) -> Result<Option<Micros>, ParseError> {
        match self.opt(key) {
            None => Ok(None),
            Some(raw) => parse_duration(raw).map(Some).map_err(|m| self.err(key, m)),
        }
    }

    pub(crate) fn switch_opt(&mut self, key: &str) -> Result<Option<bool>, ParseError> {
        match self.opt(key) {
            None => Ok(None),
            Some("on" | "true" | "yes") => Ok(Some(true)),
            Some("off" | "false" | "no") => Ok(Some(false)),
            Some(other) => Err(self.err(key, format!("expected on/off, found `{other}`"))),
        }
    }

    /// Fails on any field nobody asked for.
    pub(crate) fn finish(self) -> Result<(), ParseError> {
        match self.map.keys().next() {
            Some(k) => Err(self.err(k, "unknown field")),
            None => Ok(()),
        }
    }
}

/// Compact, whitespace-free encoding of a major frame:
/// `H|P1:period:duration[:name],...|P1@offset+duration,...` in microseconds.
/// The name is written only when it differs from the partition id.
pub fn encode_frame(frame: &MajorFrame) -> String {
    let mut out = format!("{}|", frame.hyperperiod);
    for (i, p) in frame.partitions.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{}:{}:{}", p.id, p.period, p.duration);
        if p.name != p.id.to_string() {
            let _ = write!(out, ":{}", p.name);
        }
    }
    out.push('|');
    for (i, m) in frame.minors.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{}@{}+{}", m.partition, m.offset, m.duration);
    }
    out
}

pub fn decode_frame(s: &str) -> Result<MajorFrame, String> {
    let bad = || format!("malformed frame token `{s}`");
    let mut parts = s.split('|');
    let (Some(h), Some(ps), Some(ms), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
        return Err(bad());
    };
    let hyperperiod: Micros = h.parse().map_err(|_| bad())?;
    let mut partitions = Vec::new();
    for item in ps.split(',').filter(|x| !x.is_empty()) {
        let f: Vec<&str> = item.split(':').collect();
        let (id, period, duration, name) = match f[..] {
            [id, period, duration] => (id, period, duration, None),
            [id, period, duration, name] if !name.is_empty() => (id, period, duration, Some(name)),
            _ => return Err(bad()),
        };
        let id: PartitionId = id.parse()?;
        partitions.push(PartitionSpec {
            id,
            period: period.parse().map_err(|_| bad())?,
            duration: duration.parse().map_err(|_| bad())?,
            name: name.map_or_else(|| id.to_string(), str::to_string),
        });
    }
    let mut minors = Vec::new();
    for item in ms.split(',').filter(|x| !x.is_empty()) {
        let (p, rest) = item.split_once('@').ok_or_else(bad)?;
        let (off, dur) = rest.split_once('+').ok_or_else(bad)?;
        minors.push(MinorFrame::new(
            p.parse()?,
            off.parse().map_err(|_| bad())?,
            dur.parse().map_err(|_| bad())?,
        ));
    }
    Ok(MajorFrame {
        hyperperiod,
        minors,
        partitions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::four_partition_example;

    #[test]
    fn durations() {
        assert_eq!(parse_duration("250ms"), Ok(250_000));
        assert_eq!(parse_duration("2s"), Ok(2_000_000));
        assert_eq!(parse_duration("17us"), Ok(17));
        assert_eq!(parse_duration("17"), Ok(17));
        assert!(parse_duration("x1ms").is_err());
        assert!(parse_duration("-5ms").is_err());
        for us in [0, 1, 999, 1_000, 1_500, 1_000_000, 2_250_000] {
            assert_eq!(parse_duration(&format_duration(us)), Ok(us));
        }
    }

    #[test]
    fn frame_token_keeps_names() {
        let mut frame = four_partition_example();
        frame.partitions[2].name = "IPA_A".into();
        let tok = encode_frame(&frame);
        assert!(tok.contains("P3:4000000:1000000:IPA_A,"), "{tok}");
        assert_eq!(decode_frame(&tok), Ok(frame));
        assert!(decode_frame("10|P1:10:5:|P1@0+5").is_err());
    }

    #[test]
    fn frame_token_round_trip() {
        let mut f = four_partition_example();
        for p in &mut f.partitions {
            p.name = p.id.to_string();
        }
        let tok = encode_frame(&f);
        assert!(!tok.contains(char::is_whitespace));
        assert_eq!(decode_frame(&tok).unwrap(), f);
        assert!(decode_frame("10|P1:10:5").is_err());
    }
}
