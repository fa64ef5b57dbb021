use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::population::Mode;
use crate::time::Time;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    ActEnd,
    Departure,
    LinkLeave,
    LinkEnter,
    Arrival,
    ActStart,
    Stuck,
    PtBoard,
    PtAlight,
    DrtRequest,
    DrtPickup,
    DrtDropoff,
    DrtRejected,
}

impl EventKind {
    pub const ALL: [EventKind; 13] = [
        EventKind::ActEnd,
        EventKind::Departure,
        EventKind::LinkLeave,
        EventKind::LinkEnter,
        EventKind::Arrival,
        EventKind::ActStart,
        EventKind::Stuck,
        EventKind::PtBoard,
        EventKind::PtAlight,
        EventKind::DrtRequest,
        EventKind::DrtPickup,
        EventKind::DrtDropoff,
        EventKind::DrtRejected,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::ActEnd => "act_end",
            EventKind::Departure => "departure",
            EventKind::LinkLeave => "link_leave",
            EventKind::LinkEnter => "link_enter",
            EventKind::Arrival => "arrival",
            EventKind::ActStart => "act_start",
            EventKind::Stuck => "stuck",
            EventKind::PtBoard => "pt_board",
            EventKind::PtAlight => "pt_alight",
            EventKind::DrtRequest => "drt_request",
            EventKind::DrtPickup => "drt_pickup",
            EventKind::DrtDropoff => "drt_dropoff",
            EventKind::DrtRejected => "drt_rejected",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown event kind '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: Time,
    pub kind: EventKind,
    pub person: Option<String>,
    pub vehicle: Option<String>,
    pub link: Option<String>,
    pub mode: Option<Mode>,
}

const NONE: &str = "-";
const HEADER: &str = "time\tkind\tperson\tvehicle\tlink\tmode";

/// Tab-separated, one event per line, `-` for absent fields.
pub fn write_events(events: &[Event], mut sink: impl Write) -> std::io::Result<()> {
    writeln!(sink, "{HEADER}")?;
    for e in events {
        writeln!(
            sink,
            "{}\t{}\t{}\t{}\t{}\t{}",
            e.time,
            e.kind,
            e.person.as_deref().unwrap_or(NONE),
            e.vehicle.as_deref().unwrap_or(NONE),
            e.link.as_deref().unwrap_or(NONE),
            e.mode.map_or(NONE, Mode::as_str),
        )?;
    }
    Ok(())
}

#[derive(Debug, thiserror::Error)]
#[error("events line {line}: {message}")]
pub struct EventsError {
    pub line: usize,
    pub message: String,
}

pub fn read_events(source: impl BufRead) -> Result<Vec<Event>, EventsError> {
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let err = |message: String| EventsError { line: i + 1, message };
        let line = line.map_err(|e| err(e.to_string()))?;
        if i == 0 && line == HEADER || line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 6 {
            return Err(err(format!("expected 6 fields, found {}", f.len())));
        }
        let opt = |s: &str| (s != NONE).then(|| s.to_string());
        out.push(Event {
            time: f[0].parse().map_err(|_| err(format!("bad time '{}'", f[0])))?,
            kind: f[1].parse().map_err(err)?,
            person: opt(f[2]),
            vehicle: opt(f[3]),
            link: opt(f[4]),
            mode: if f[5] == NONE { None } else { Some(f[5].parse().map_err(|e| err(format!("{e}")))?) },
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let events = vec![
            Event { time: 0, kind: EventKind::ActEnd, person: Some("p".into()), vehicle: None, link: Some("l1".into()), mode: None },
            Event { time: 5, kind: EventKind::LinkEnter, person: None, vehicle: Some("bus".into()), link: Some("l2".into()), mode: Some(Mode::Pt) },
        ];
        let mut buf = Vec::new();
        write_events(&events, &mut buf).unwrap();
        assert_eq!(read_events(buf.as_slice()).unwrap(), events);
        assert!(read_events("1\tnope\t-\t-\t-\t-\n".as_bytes()).is_err());
    }
}
