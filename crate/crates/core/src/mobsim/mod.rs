//! Time-stepped queue simulation of one day.
//!
//! Cars, buses and demand-responsive vehicles share the link queues. Walk
//! legs, as well as walks to and from stops, are teleported.

mod engine;
mod events;

use std::collections::BTreeSet;

pub use engine::run;
pub use events::{read_events, write_events, Event, EventKind, EventsError};

use crate::drt::{DrtConstraints, DrtVehicle};
use crate::network::{euclidean, Link, Network};
use crate::population::Population;
use crate::time::{Time, DRAIN_END};
use crate::transit::{TransitSchedule, TransitVehicles, VehicleType};

/// Length of road one vehicle occupies in a queue, meters.
pub const CELL_LENGTH: f64 = 7.5;

/// Whole seconds to traverse a link at free speed, never below one.
pub fn freeflow_time(link: &Link) -> Time {
    (link.freeflow_secs().ceil() as Time).max(1)
}

/// Number of vehicles a link holds at once.
pub fn storage_capacity(link: &Link) -> usize {
    ((link.length * link.lanes / CELL_LENGTH).floor() as usize).max(1)
}

pub fn teleport_distance(from: (f64, f64), to: (f64, f64), beeline_factor: f64) -> f64 {
    euclidean(from, to) * beeline_factor
}

/// Seconds for a teleported leg, rounded up.
pub fn teleport_leg(from: (f64, f64), to: (f64, f64), speed: f64, beeline_factor: f64) -> Time {
    (teleport_distance(from, to, beeline_factor) / speed).ceil() as Time
}

/// Bus dwell time: boarding and alighting run in sequence through one door.
pub fn transit_dwell(boarding: usize, alighting: usize, vt: &VehicleType, min_dwell: Time) -> Time {
    let busy = boarding as f64 * vt.access_time + alighting as f64 * vt.egress_time;
    (busy.ceil() as Time).max(min_dwell)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MobsimConfig {
    pub seed: u64,
    /// Agents still travelling at this time are reported stuck.
    pub end_time: Time,
    pub min_dwell: Time,
    pub walk_speed: f64,
    pub beeline_factor: f64,
    pub drt: DrtConstraints,
}

impl Default for MobsimConfig {
    fn default() -> Self {
        MobsimConfig {
            seed: 1,
            end_time: DRAIN_END,
            min_dwell: 10,
            walk_speed: 1.34,
            beeline_factor: 1.3,
            drt: DrtConstraints::default(),
        }
    }
}

pub struct MobsimInput<'a> {
    pub network: &'a Network,
    pub population: &'a Population,
    pub transit: Option<(&'a TransitSchedule, &'a TransitVehicles)>,
    pub fleet: &'a [DrtVehicle],
}

#[derive(Debug, Clone, Default)]
pub struct MobsimOutput {
    pub events: Vec<Event>,
    pub stuck: BTreeSet<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum MobsimError {
    #[error("person '{person}': activity has no link")]
    MissingActivityLink { person: String },
    #[error("person '{person}': unknown link '{link}'")]
    UnknownLink { person: String, link: String },
    #[error("transit route '{route}' is not mapped onto the network")]
    UnmappedRoute { route: String },
    #[error("transit route '{route}' refers to unknown link '{link}'")]
    UnknownRouteLink { route: String, link: String },
    #[error("drt vehicle '{vehicle}' starts on '{link}', which is not a car link")]
    BadDrtStart { vehicle: String, link: String },
}
