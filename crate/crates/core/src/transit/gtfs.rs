use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use serde::Deserialize;

use super::{
    Departure, RouteStop, TransitError, TransitLine, TransitRoute, TransitSchedule, TransitStopFacility,
    TransitVehicles, VehicleType,
};
use crate::time::{parse_hms, Time};

pub const BUS_TYPE: &str = "bus";

#[derive(Debug, Clone, PartialEq)]
pub struct GtfsStop {
    pub id: String,
    pub name: Option<String>,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GtfsRoute {
    pub id: String,
    pub short_name: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GtfsTrip {
    pub id: String,
    pub route_id: String,
    pub service_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GtfsStopTime {
    pub sequence: u32,
    pub arrival: Time,
    pub departure: Time,
    pub stop_id: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ServiceCalendar {
    /// Monday first
    pub weekdays: [bool; 7],
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
    pub added: BTreeSet<NaiveDate>,
    pub removed: BTreeSet<NaiveDate>,
}

impl ServiceCalendar {
    pub fn is_active(&self, date: NaiveDate) -> bool {
        if self.removed.contains(&date) {
            return false;
        }
        if self.added.contains(&date) {
            return true;
        }
        match (self.start, self.end) {
            (Some(s), Some(e)) => s <= date && date <= e && self.weekdays[date.weekday().num_days_from_monday() as usize],
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GtfsFeed {
    pub stops: BTreeMap<String, GtfsStop>,
    pub routes: BTreeMap<String, GtfsRoute>,
    pub trips: BTreeMap<String, GtfsTrip>,
    /// trip id → stop times in sequence order
    pub stop_times: BTreeMap<String, Vec<GtfsStopTime>>,
    pub calendar: BTreeMap<String, ServiceCalendar>,
}

#[derive(Deserialize)]
struct StopRow {
    stop_id: String,
    #[serde(default)]
    stop_name: Option<String>,
    #[serde(default)]
    stop_x: Option<f64>,
    #[serde(default)]
    stop_y: Option<f64>,
    #[serde(default)]
    stop_lon: Option<f64>,
    #[serde(default)]
    stop_lat: Option<f64>,
}

#[derive(Deserialize)]
struct RouteRow {
    route_id: String,
    #[serde(default)]
    route_short_name: Option<String>,
}

#[derive(Deserialize)]
struct TripRow {
    route_id: String,
    service_id: String,
    trip_id: String,
}

#[derive(Deserialize)]
struct StopTimeRow {
    trip_id: String,
    #[serde(default)]
    arrival_time: String,
    #[serde(default)]
    departure_time: String,
    stop_id: String,
    stop_sequence: u32,
}

#[derive(Deserialize)]
struct CalendarRow {
    service_id: String,
    monday: u8,
    tuesday: u8,
    wednesday: u8,
    thursday: u8,
    friday: u8,
    saturday: u8,
    sunday: u8,
    start_date: String,
    end_date: String,
}

#[derive(Deserialize)]
struct CalendarDateRow {
    service_id: String,
    date: String,
    exception_type: u8,
}

fn gtfs_err(path: &Path, message: impl Into<String>) -> TransitError {
    TransitError::Gtfs {
        path: path.display().to_string(),
        message: message.into(),
    }
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, TransitError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| gtfs_err(path, e.to_string()))?;
    reader
        .deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| gtfs_err(path, format!("row {}: {e}", i + 2))))
        .collect()
}

fn parse_date(path: &Path, raw: &str) -> Result<NaiveDate, TransitError> {
    NaiveDate::parse_from_str(raw, "%Y%m%d").map_err(|_| gtfs_err(path, format!("bad date {raw:?}")))
}

/// Reads a feed whose stops carry planar `stop_x`/`stop_y` columns, or
/// `stop_lon`/`stop_lat` passed through unchanged.
pub fn read_gtfs(dir: &Path) -> Result<GtfsFeed, TransitError> {
    read_gtfs_with(dir, &|x, y| (x, y))
}

/// Reads a feed, passing `stop_lon`/`stop_lat` through `project` when the
/// planar columns are absent.
pub fn read_gtfs_with(dir: &Path, project: &dyn Fn(f64, f64) -> (f64, f64)) -> Result<GtfsFeed, TransitError> {
    let mut feed = GtfsFeed::default();

    let path = dir.join("stops.txt");
    for row in read_rows::<StopRow>(&path)? {
        let (x, y) = match (row.stop_x, row.stop_y, row.stop_lon, row.stop_lat) {
            (Some(x), Some(y), _, _) => (x, y),
            (_, _, Some(lon), Some(lat)) => project(lon, lat),
            _ => return Err(gtfs_err(&path, format!("stop '{}' has no coordinates", row.stop_id))),
        };
        let stop = GtfsStop {
            id: row.stop_id,
            name: row.stop_name.filter(|n| !n.is_empty()),
            x,
            y,
        };
        feed.stops.insert(stop.id.clone(), stop);
    }

    let path = dir.join("routes.txt");
    for row in read_rows::<RouteRow>(&path)? {
        feed.routes.insert(
            row.route_id.clone(),
            GtfsRoute {
                id: row.route_id,
                short_name: row.route_short_name.filter(|n| !n.is_empty()),
            },
        );
    }

    let path = dir.join("trips.txt");
    for row in read_rows::<TripRow>(&path)? {
        if !feed.routes.contains_key(&row.route_id) {
            return Err(gtfs_err(&path, format!("trip '{}' references unknown route '{}'", row.trip_id, row.route_id)));
        }
        feed.trips.insert(
            row.trip_id.clone(),
            GtfsTrip {
                id: row.trip_id,
                route_id: row.route_id,
                service_id: row.service_id,
            },
        );
    }

    let path = dir.join("stop_times.txt");
    for row in read_rows::<StopTimeRow>(&path)? {
        if !feed.trips.contains_key(&row.trip_id) {
            return Err(gtfs_err(&path, format!("unknown trip '{}'", row.trip_id)));
        }
        if !feed.stops.contains_key(&row.stop_id) {
            return Err(gtfs_err(&path, format!("unknown stop '{}'", row.stop_id)));
        }
        let parse = |raw: &str| parse_hms(raw).map_err(|e| gtfs_err(&path, format!("trip '{}': {e}", row.trip_id)));
        let (arrival, departure) = match (row.arrival_time.is_empty(), row.departure_time.is_empty()) {
            (false, false) => (parse(&row.arrival_time)?, parse(&row.departure_time)?),
            (false, true) => {
                let t = parse(&row.arrival_time)?;
                (t, t)
            }
            (true, false) => {
                let t = parse(&row.departure_time)?;
                (t, t)
            }
            (true, true) => return Err(gtfs_err(&path, format!("trip '{}' has an untimed stop", row.trip_id))),
        };
        let times = feed.stop_times.entry(row.trip_id.clone()).or_default();
        if let Some(prev) = times.last() {
            if row.stop_sequence <= prev.sequence {
                return Err(gtfs_err(
                    &path,
                    format!("trip '{}': stop_sequence {} follows {}", row.trip_id, row.stop_sequence, prev.sequence),
                ));
            }
            if arrival < prev.departure {
                return Err(gtfs_err(&path, format!("trip '{}': times decrease", row.trip_id)));
            }
        }
        if departure < arrival {
            return Err(gtfs_err(&path, format!("trip '{}': departure before arrival", row.trip_id)));
        }
        times.push(GtfsStopTime {
            sequence: row.stop_sequence,
            arrival,
            departure,
            stop_id: row.stop_id,
        });
    }

    let path = dir.join("calendar.txt");
    for row in read_rows::<CalendarRow>(&path)? {
        let cal = feed.calendar.entry(row.service_id.clone()).or_default();
        cal.weekdays = [
            row.monday == 1,
            row.tuesday == 1,
            row.wednesday == 1,
            row.thursday == 1,
            row.friday == 1,
            row.saturday == 1,
            row.sunday == 1,
        ];
        cal.start = Some(parse_date(&path, &row.start_date)?);
        cal.end = Some(parse_date(&path, &row.end_date)?);
    }

    let path = dir.join("calendar_dates.txt");
    if path.exists() {
        for row in read_rows::<CalendarDateRow>(&path)? {
            let date = parse_date(&path, &row.date)?;
            let cal = feed.calendar.entry(row.service_id.clone()).or_default();
            match row.exception_type {
                1 => cal.added.insert(date),
                2 => cal.removed.insert(date),
                other => return Err(gtfs_err(&path, format!("exception_type {other}"))),
            };
        }
    }
    Ok(feed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConversionResult {
    pub schedule: TransitSchedule,
    pub vehicles: TransitVehicles,
    /// Non-fatal findings, e.g. a date without service.
    pub warnings: Vec<String>,
}

impl ConversionResult {
    pub fn is_empty(&self) -> bool {
        self.schedule.departure_count() == 0
    }
}

type Profile = Vec<(String, Time, Time)>;

/// Extracts the service of one day as an unmapped schedule. Trips of the
/// same GTFS route with identical stop/offset profiles share one transit
/// route. Each departure gets its own vehicle.
pub fn gtfs_to_schedule(
    feed: &GtfsFeed,
    date: NaiveDate,
    route_filter: Option<&BTreeSet<String>>,
) -> ConversionResult {
    let mut schedule = TransitSchedule::new();
    let mut vehicles = TransitVehicles::default();
    let mut warnings = Vec::new();
    vehicles.types.insert(BUS_TYPE.into(), VehicleType::bus(BUS_TYPE));
    for stop in feed.stops.values() {
        schedule.stops.insert(
            stop.id.clone(),
            TransitStopFacility {
                id: stop.id.clone(),
                name: stop.name.clone(),
                x: stop.x,
                y: stop.y,
                link: None,
            },
        );
    }

    // gtfs route id → (profile, departures) in order of first appearance
    let mut grouped: BTreeMap<&str, Vec<(Profile, Vec<(Time, &str)>)>> = BTreeMap::new();
    let mut active: Vec<(&GtfsTrip, &[GtfsStopTime])> = feed
        .trips
        .values()
        .filter(|t| route_filter.map_or(true, |f| f.contains(&t.route_id)))
        .filter(|t| feed.calendar.get(&t.service_id).is_some_and(|c| c.is_active(date)))
        .filter_map(|t| {
            let times = feed.stop_times.get(&t.id)?;
            if times.len() < 2 {
                warnings.push(format!("trip '{}' has fewer than two stops and was skipped", t.id));
                return None;
            }
            Some((t, times.as_slice()))
        })
        .collect();
    active.sort_by(|a, b| a.1[0].arrival.cmp(&b.1[0].arrival).then(a.0.id.cmp(&b.0.id)));
    for (trip, times) in active {
        let start = times[0].arrival;
        let profile: Profile = times
            .iter()
            .map(|st| (st.stop_id.clone(), st.arrival - start, st.departure - start))
            .collect();
        let groups = grouped.entry(trip.route_id.as_str()).or_default();
        match groups.iter_mut().find(|(p, _)| *p == profile) {
            Some((_, deps)) => deps.push((start, &trip.id)),
            None => groups.push((profile, vec![(start, &trip.id)])),
        }
    }
    for (route_id, groups) in grouped {
        let mut line = TransitLine {
            id: route_id.to_string(),
            routes: BTreeMap::new(),
        };
        for (k, (profile, deps)) in groups.into_iter().enumerate() {
            let id = format!("{route_id}_{}", k + 1);
            let departures = deps
                .into_iter()
                .map(|(time, trip)| {
                    let vehicle = format!("veh_{trip}");
                    vehicles.vehicles.insert(vehicle.clone(), BUS_TYPE.into());
                    Departure {
                        id: trip.to_string(),
                        time,
                        vehicle,
                    }
                })
                .collect();
            let stops = profile
                .into_iter()
                .map(|(stop, arrival_offset, departure_offset)| RouteStop {
                    stop,
                    arrival_offset,
                    departure_offset,
                })
                .collect();
            line.routes.insert(
                id.clone(),
                TransitRoute {
                    id,
                    vehicle_type: BUS_TYPE.into(),
                    stops,
                    network_route: Vec::new(),
                    departures,
                },
            );
        }
        schedule.lines.insert(line.id.clone(), line);
    }
    if schedule.departure_count() == 0 {
        warnings.push(format!("no trips are active on {date}; the schedule is empty"));
    }
    ConversionResult {
        schedule,
        vehicles,
        warnings,
    }
}
