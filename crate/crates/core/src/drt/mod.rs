//! Door-to-door demand-responsive transport: fleet file, request model and
//! greedy best-insertion dispatch.

mod insertion;
mod travel;

use std::io::{Read, Write};

pub use insertion::{
    dispatch, feasible_insertions, Assignment, Insertion, PlannedStop, Stopper, TravelTime, VehicleSchedule,
};
pub use travel::NetworkTravelTimes;

use crate::time::Time;
use crate::xml::{self, XmlError};

#[derive(Debug, thiserror::Error)]
pub enum DrtError {
    #[error(transparent)]
    Xml(#[from] XmlError),
    #[error("line {line}: vehicle '{id}' needs capacity >= 1")]
    Capacity { line: usize, id: String },
    #[error("line {line}: vehicle '{id}' has service end {t1} not after start {t0}")]
    Window { line: usize, id: String, t0: f64, t1: f64 },
    #[error("duplicate vehicle id '{0}'")]
    Duplicate(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrtVehicle {
    pub id: String,
    /// opaque link id
    pub start_link: String,
    pub t0: Time,
    pub t1: Time,
    pub capacity: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrtConstraints {
    /// seconds
    pub max_wait: f64,
    /// detour factor on the direct ride time
    pub alpha: f64,
    /// seconds added to the detour bound
    pub beta: f64,
    /// seconds
    pub stop_duration: f64,
}

impl Default for DrtConstraints {
    fn default() -> Self {
        DrtConstraints {
            max_wait: 600.0,
            alpha: 1.5,
            beta: 300.0,
            stop_duration: 60.0,
        }
    }
}

impl DrtConstraints {
    pub fn stop_secs(&self) -> Time {
        self.stop_duration.round() as Time
    }
}

/// A passenger request. Links are indices into the simulation graph.
#[derive(Debug, Clone, PartialEq)]
pub struct DrtRequest {
    pub id: usize,
    pub person: String,
    pub origin: usize,
    pub destination: usize,
    pub submission: Time,
    /// free-flow origin to destination ride time
    pub direct_time: Time,
}

impl DrtRequest {
    pub fn pickup_deadline(&self, c: &DrtConstraints) -> Time {
        self.submission + c.max_wait.floor() as Time
    }

    pub fn dropoff_deadline(&self, c: &DrtConstraints) -> Time {
        self.submission + (c.alpha * self.direct_time as f64 + c.beta).floor() as Time
    }
}

fn secs(el: &xml::Element, key: &str) -> Result<f64, XmlError> {
    el.req_f64(key)
}

pub fn read_fleet(mut source: impl Read) -> Result<Vec<DrtVehicle>, DrtError> {
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|e| XmlError::new(0, e.to_string()))?;
    let root = xml::parse(&text)?;
    let mut fleet: Vec<DrtVehicle> = Vec::new();
    for v in root.children_named("vehicle") {
        let id = v.req("id")?.to_string();
        let (t0, t1) = (secs(v, "t_0")?, secs(v, "t_1")?);
        let capacity = v.req_f64("capacity")?;
        if capacity < 1.0 {
            return Err(DrtError::Capacity { line: v.line, id });
        }
        if !(t0 >= 0.0 && t1 > t0) {
            return Err(DrtError::Window { line: v.line, id, t0, t1 });
        }
        if fleet.iter().any(|f| f.id == id) {
            return Err(DrtError::Duplicate(id));
        }
        fleet.push(DrtVehicle {
            id,
            start_link: v.req("start_link")?.to_string(),
            t0: t0.round() as Time,
            t1: t1.round() as Time,
            capacity: capacity as u32,
        });
    }
    Ok(fleet)
}

pub fn write_fleet(fleet: &[DrtVehicle], mut sink: impl Write) -> std::io::Result<()> {
    let mut out = String::from(xml::HEADER);
    xml::open_tag(&mut out, 0, "vehicles", &[]);
    for v in fleet {
        xml::empty_tag(
            &mut out,
            1,
            "vehicle",
            &[
                ("id", v.id.clone()),
                ("start_link", v.start_link.clone()),
                ("t_0", format!("{:.1}", v.t0 as f64)),
                ("t_1", format!("{:.1}", v.t1 as f64)),
                ("capacity", v.capacity.to_string()),
            ],
        );
    }
    xml::close_tag(&mut out, 0, "vehicles");
    sink.write_all(out.as_bytes())
}
