//! Public transport supply: GTFS conversion, schedule-to-network mapping,
//! plausibility checks and schedule-based passenger routing.

mod gtfs;
mod io;
mod mapping;
mod plausibility;
mod router;

use std::collections::BTreeMap;

pub use gtfs::{
    gtfs_to_schedule, read_gtfs, read_gtfs_with, ConversionResult, GtfsFeed, GtfsRoute, GtfsStop,
    GtfsStopTime, GtfsTrip, ServiceCalendar,
};
pub use io::{read_schedule, read_vehicles, write_schedule, write_vehicles};
pub use mapping::{candidate_links, map_schedule, CostMetric, LinkCandidate, MapperParams, MappingResult};
pub use plausibility::{check_plausibility, PlausibilityWarning, WarningKind};
pub use router::{Itinerary, PtRouterParams, Ride, TransitRouter};

use crate::network::NetworkError;
use crate::time::Time;
use crate::xml::XmlError;

#[derive(Debug, thiserror::Error)]
pub enum TransitError {
    #[error(transparent)]
    Xml(#[from] XmlError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("{path}: {message}")]
    Gtfs { path: String, message: String },
    #[error("transit route '{route}' has fewer than two stops")]
    TooFewStops { route: String },
    #[error("transit route '{route}' references unknown stop '{stop}'")]
    UnknownStop { route: String, stop: String },
    #[error("departure '{departure}' uses unknown vehicle '{vehicle}'")]
    UnknownVehicle { departure: String, vehicle: String },
    #[error("vehicle '{vehicle}' has unknown type '{vehicle_type}'")]
    UnknownVehicleType { vehicle: String, vehicle_type: String },
    #[error("stop facility '{0}' is not mapped to a network link")]
    Unmapped(String),
    #[error("no path between the candidates of stops '{from}' and '{to}' on route '{route}'")]
    Disconnected { route: String, from: String, to: String },
    #[error("stop facility '{stop}' has no link candidate and artificial links are disabled")]
    NoCandidate { stop: String },
    #[error("route '{route}' has decreasing stop offsets")]
    DecreasingOffsets { route: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitStopFacility {
    pub id: String,
    pub name: Option<String>,
    pub x: f64,
    pub y: f64,
    /// `None` while the schedule is unmapped.
    pub link: Option<String>,
}

impl TransitStopFacility {
    pub fn coord(&self) -> (f64, f64) {
        (self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteStop {
    pub stop: String,
    /// seconds after the route start
    pub arrival_offset: Time,
    pub departure_offset: Time,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Departure {
    pub id: String,
    pub time: Time,
    pub vehicle: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitRoute {
    pub id: String,
    pub vehicle_type: String,
    pub stops: Vec<RouteStop>,
    /// Empty until the schedule is mapped.
    pub network_route: Vec<String>,
    pub departures: Vec<Departure>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TransitLine {
    pub id: String,
    pub routes: BTreeMap<String, TransitRoute>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TransitSchedule {
    pub stops: BTreeMap<String, TransitStopFacility>,
    pub lines: BTreeMap<String, TransitLine>,
}

impl TransitSchedule {
    pub fn new() -> Self {
        Self::default()
    }

    /// All routes in (line id, route id) order.
    pub fn routes(&self) -> impl Iterator<Item = (&TransitLine, &TransitRoute)> {
        self.lines
            .values()
            .flat_map(|line| line.routes.values().map(move |r| (line, r)))
    }

    pub fn departure_count(&self) -> usize {
        self.routes().map(|(_, r)| r.departures.len()).sum()
    }

    pub fn is_mapped(&self) -> bool {
        self.stops.values().all(|s| s.link.is_some()) && self.routes().all(|(_, r)| !r.network_route.is_empty())
    }

    /// Checks that routes reference known stops and carry nondecreasing offsets.
    pub fn validate(&self) -> Result<(), TransitError> {
        for (_, route) in self.routes() {
            let mut last = 0;
            for rs in &route.stops {
                if !self.stops.contains_key(&rs.stop) {
                    return Err(TransitError::UnknownStop {
                        route: route.id.clone(),
                        stop: rs.stop.clone(),
                    });
                }
                if rs.arrival_offset < last || rs.departure_offset < rs.arrival_offset {
                    return Err(TransitError::DecreasingOffsets { route: route.id.clone() });
                }
                last = rs.departure_offset;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleType {
    pub id: String,
    pub seats: u32,
    pub standing_room: u32,
    /// seconds per boarding passenger
    pub access_time: f64,
    /// seconds per alighting passenger
    pub egress_time: f64,
}

impl VehicleType {
    pub fn bus(id: impl Into<String>) -> Self {
        VehicleType {
            id: id.into(),
            seats: 40,
            standing_room: 40,
            access_time: 2.0,
            egress_time: 1.0,
        }
    }

    pub fn capacity(&self) -> u32 {
        self.seats + self.standing_room
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TransitVehicles {
    pub types: BTreeMap<String, VehicleType>,
    /// vehicle id → vehicle type id
    pub vehicles: BTreeMap<String, String>,
}

impl TransitVehicles {
    pub fn vehicle_type(&self, vehicle: &str) -> Option<&VehicleType> {
        self.vehicles.get(vehicle).and_then(|t| self.types.get(t))
    }

    /// Every departure's vehicle must exist with a known type.
    pub fn check_against(&self, schedule: &TransitSchedule) -> Result<(), TransitError> {
        for (vehicle, vehicle_type) in &self.vehicles {
            if !self.types.contains_key(vehicle_type) {
                return Err(TransitError::UnknownVehicleType {
                    vehicle: vehicle.clone(),
                    vehicle_type: vehicle_type.clone(),
                });
            }
        }
        for (_, route) in schedule.routes() {
            for dep in &route.departures {
                if !self.vehicles.contains_key(&dep.vehicle) {
                    return Err(TransitError::UnknownVehicle {
                        departure: dep.id.clone(),
                        vehicle: dep.vehicle.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}
