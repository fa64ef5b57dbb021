//! Seconds-after-midnight clock values and `HH:MM:SS` conversion.

/// Simulation time in whole seconds after midnight.
pub type Time = u32;

pub const DAY: Time = 86_400;

/// Hard stop for draining the simulation (36 h).
pub const DRAIN_END: Time = 129_600;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid clock time {0:?}, expected HH:MM:SS")]
pub struct TimeParseError(pub String);

/// Parses `HH:MM:SS` (or `HH:MM`). Hours may exceed 23, as GTFS allows.
pub fn parse_hms(raw: &str) -> Result<Time, TimeParseError> {
    let err = || TimeParseError(raw.to_string());
    let trimmed = raw.trim();
    let mut parts = trimmed.split(':');
    let h: u32 = parts.next().ok_or_else(err)?.parse().map_err(|_| err())?;
    let m: u32 = parts.next().ok_or_else(err)?.parse().map_err(|_| err())?;
    let s: u32 = match parts.next() {
        Some(p) => p.parse().map_err(|_| err())?,
        None => 0,
    };
    if parts.next().is_some() || m > 59 || s > 59 {
        return Err(err());
    }
    Ok(h * 3600 + m * 60 + s)
}

pub fn format_hms(t: Time) -> String {
    format!("{:02}:{:02}:{:02}", t / 3600, (t / 60) % 60, t % 60)
}
