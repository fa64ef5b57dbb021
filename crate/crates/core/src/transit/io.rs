use std::io::{Read, Write};

use super::{
    Departure, RouteStop, TransitError, TransitLine, TransitRoute, TransitSchedule, TransitStopFacility,
    TransitVehicles, VehicleType,
};
use crate::time::{format_hms, parse_hms, Time};
use crate::xml::{self, Element, XmlError};

fn slurp(mut source: impl Read) -> Result<String, XmlError> {
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|e| XmlError::new(0, e.to_string()))?;
    Ok(text)
}

fn req_hms(el: &Element, key: &str) -> Result<Time, XmlError> {
    parse_hms(el.req(key)?).map_err(|e| XmlError::new(el.line, format!("'{key}': {e}")))
}

pub fn read_schedule(source: impl Read) -> Result<TransitSchedule, TransitError> {
    let root = xml::parse(&slurp(source)?)?;
    let mut schedule = TransitSchedule::new();
    if let Some(stops) = root.child("transitStops") {
        for s in stops.children_named("stopFacility") {
            let stop = TransitStopFacility {
                id: s.req("id")?.to_string(),
                name: s.attr("name").map(str::to_string),
                x: s.req_f64("x")?,
                y: s.req_f64("y")?,
                link: s.attr("linkRefId").map(str::to_string),
            };
            schedule.stops.insert(stop.id.clone(), stop);
        }
    }
    for l in root.children_named("transitLine") {
        let mut line = TransitLine {
            id: l.req("id")?.to_string(),
            routes: Default::default(),
        };
        for r in l.children_named("transitRoute") {
            let mut route = TransitRoute {
                id: r.req("id")?.to_string(),
                vehicle_type: r.attr("vehicleType").unwrap_or("bus").to_string(),
                stops: Vec::new(),
                network_route: Vec::new(),
                departures: Vec::new(),
            };
            if let Some(profile) = r.child("routeProfile") {
                for s in profile.children_named("stop") {
                    route.stops.push(RouteStop {
                        stop: s.req("refId")?.to_string(),
                        arrival_offset: req_hms(s, "arrivalOffset")?,
                        departure_offset: req_hms(s, "departureOffset")?,
                    });
                }
            }
            if let Some(links) = r.child("route") {
                for link in links.children_named("link") {
                    route.network_route.push(link.req("refId")?.to_string());
                }
            }
            if let Some(deps) = r.child("departures") {
                for d in deps.children_named("departure") {
                    route.departures.push(Departure {
                        id: d.req("id")?.to_string(),
                        time: req_hms(d, "departureTime")?,
                        vehicle: d.req("vehicleRefId")?.to_string(),
                    });
                }
            }
            line.routes.insert(route.id.clone(), route);
        }
        schedule.lines.insert(line.id.clone(), line);
    }
    schedule.validate()?;
    Ok(schedule)
}

pub fn write_schedule(schedule: &TransitSchedule, mut sink: impl Write) -> std::io::Result<()> {
    let mut out = String::from(xml::HEADER);
    xml::open_tag(&mut out, 0, "transitSchedule", &[]);
    xml::open_tag(&mut out, 1, "transitStops", &[]);
    for s in schedule.stops.values() {
        let mut attrs = vec![("id", s.id.clone()), ("x", format!("{}", s.x)), ("y", format!("{}", s.y))];
        if let Some(name) = &s.name {
            attrs.push(("name", name.clone()));
        }
        if let Some(link) = &s.link {
            attrs.push(("linkRefId", link.clone()));
        }
        xml::empty_tag(&mut out, 2, "stopFacility", &attrs);
    }
    xml::close_tag(&mut out, 1, "transitStops");
    for line in schedule.lines.values() {
        xml::open_tag(&mut out, 1, "transitLine", &[("id", line.id.clone())]);
        for r in line.routes.values() {
            xml::open_tag(
                &mut out,
                2,
                "transitRoute",
                &[("id", r.id.clone()), ("vehicleType", r.vehicle_type.clone())],
            );
            xml::open_tag(&mut out, 3, "routeProfile", &[]);
            for s in &r.stops {
                xml::empty_tag(
                    &mut out,
                    4,
                    "stop",
                    &[
                        ("refId", s.stop.clone()),
                        ("arrivalOffset", format_hms(s.arrival_offset)),
                        ("departureOffset", format_hms(s.departure_offset)),
                    ],
                );
            }
            xml::close_tag(&mut out, 3, "routeProfile");
            if !r.network_route.is_empty() {
                xml::open_tag(&mut out, 3, "route", &[]);
                for link in &r.network_route {
                    xml::empty_tag(&mut out, 4, "link", &[("refId", link.clone())]);
                }
                xml::close_tag(&mut out, 3, "route");
            }
            xml::open_tag(&mut out, 3, "departures", &[]);
            for d in &r.departures {
                xml::empty_tag(
                    &mut out,
                    4,
                    "departure",
                    &[
                        ("id", d.id.clone()),
                        ("departureTime", format_hms(d.time)),
                        ("vehicleRefId", d.vehicle.clone()),
                    ],
                );
            }
            xml::close_tag(&mut out, 3, "departures");
            xml::close_tag(&mut out, 2, "transitRoute");
        }
        xml::close_tag(&mut out, 1, "transitLine");
    }
    xml::close_tag(&mut out, 0, "transitSchedule");
    sink.write_all(out.as_bytes())
}

pub fn read_vehicles(source: impl Read) -> Result<TransitVehicles, TransitError> {
    let root = xml::parse(&slurp(source)?)?;
    let mut v = TransitVehicles::default();
    for t in root.children_named("vehicleType") {
        let count = |key: &str| -> Result<u32, XmlError> {
            let raw = t.req(key)?;
            raw.parse()
                .map_err(|_| XmlError::new(t.line, format!("'{key}' is not a count: {raw:?}")))
        };
        let vt = VehicleType {
            id: t.req("id")?.to_string(),
            seats: count("seats")?,
            standing_room: count("standingRoom")?,
            access_time: t.opt_f64("accessTime")?.unwrap_or(2.0),
            egress_time: t.opt_f64("egressTime")?.unwrap_or(1.0),
        };
        v.types.insert(vt.id.clone(), vt);
    }
    for veh in root.children_named("vehicle") {
        v.vehicles
            .insert(veh.req("id")?.to_string(), veh.req("type")?.to_string());
    }
    for (vehicle, vehicle_type) in &v.vehicles {
        if !v.types.contains_key(vehicle_type) {
            return Err(TransitError::UnknownVehicleType {
                vehicle: vehicle.clone(),
                vehicle_type: vehicle_type.clone(),
            });
        }
    }
    Ok(v)
}

pub fn write_vehicles(vehicles: &TransitVehicles, mut sink: impl Write) -> std::io::Result<()> {
    let mut out = String::from(xml::HEADER);
    xml::open_tag(&mut out, 0, "vehicleDefinitions", &[]);
    for t in vehicles.types.values() {
        xml::empty_tag(
            &mut out,
            1,
            "vehicleType",
            &[
                ("id", t.id.clone()),
                ("seats", t.seats.to_string()),
                ("standingRoom", t.standing_room.to_string()),
                ("accessTime", format!("{}", t.access_time)),
                ("egressTime", format!("{}", t.egress_time)),
            ],
        );
    }
    for (id, t) in &vehicles.vehicles {
        xml::empty_tag(&mut out, 1, "vehicle", &[("id", id.clone()), ("type", t.clone())]);
    }
    xml::close_tag(&mut out, 0, "vehicleDefinitions");
    sink.write_all(out.as_bytes())
}
