//! Agents, their daily plans, demand synthesis and the population file.

mod demand;
mod io;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

pub use demand::{apportion, assign_activity_links, build_commuter_demand, CommuterDemand, Rect};
pub use io::{read_population, write_population};

use crate::network::Path;
use crate::time::{Time, DAY};
use crate::transit::Itinerary;
use crate::xml::XmlError;

pub const DEFAULT_MEMORY_SIZE: usize = 5;

#[derive(Debug, thiserror::Error)]
pub enum PopulationError {
    #[error(transparent)]
    Xml(#[from] XmlError),
    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<PopulationError>,
    },
    #[error("plan elements must alternate activity/leg and start and end with an activity")]
    Alternation,
    #[error("end_time {0} is outside [00:00:00, 24:00:00)")]
    EndTimeOutOfRange(Time),
    #[error("activity end times decrease along the plan")]
    DecreasingEndTimes,
    #[error("only the final activity may omit end_time")]
    MissingEndTime,
    #[error("the final activity must not carry an end_time")]
    FinalEndTime,
    #[error("unknown mode '{0}'")]
    UnknownMode(String),
    #[error("duplicate person id '{0}'")]
    DuplicatePerson(String),
    #[error("person '{0}' has no plans")]
    NoPlans(String),
    #[error("{0}")]
    InvalidRoute(String),
    #[error("invalid demand request: {0}")]
    InvalidDemand(String),
    #[error("the network has no car link to attach activities to")]
    NoCarLink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    Car,
    Drt,
    Pt,
    Walk,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Car, Mode::Drt, Mode::Pt, Mode::Walk];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Car => "car",
            Mode::Drt => "drt",
            Mode::Pt => "pt",
            Mode::Walk => "walk",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = PopulationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| PopulationError::UnknownMode(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Activity {
    pub kind: String,
    pub x: f64,
    pub y: f64,
    pub end_time: Option<Time>,
    pub link: Option<String>,
}

impl Activity {
    pub fn coord(&self) -> (f64, f64) {
        (self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarRoute {
    pub path: Path,
    /// meters, excluding the departure link
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrtRoute {
    /// free-flow origin to destination time
    pub direct_time: Time,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TeleportRoute {
    pub travel_time: Time,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Route {
    Car(CarRoute),
    Pt(Itinerary),
    Drt(DrtRoute),
    Walk(TeleportRoute),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Leg {
    pub mode: Mode,
    pub route: Option<Route>,
}

impl Leg {
    pub fn new(mode: Mode) -> Self {
        Leg { mode, route: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanElement {
    Activity(Activity),
    Leg(Leg),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Plan {
    pub elements: Vec<PlanElement>,
    pub score: Option<f64>,
}

impl Plan {
    pub fn activities(&self) -> impl Iterator<Item = &Activity> {
        self.elements.iter().filter_map(|e| match e {
            PlanElement::Activity(a) => Some(a),
            PlanElement::Leg(_) => None,
        })
    }

    pub fn activities_mut(&mut self) -> impl Iterator<Item = &mut Activity> {
        self.elements.iter_mut().filter_map(|e| match e {
            PlanElement::Activity(a) => Some(a),
            PlanElement::Leg(_) => None,
        })
    }

    pub fn legs(&self) -> impl Iterator<Item = &Leg> {
        self.elements.iter().filter_map(|e| match e {
            PlanElement::Leg(l) => Some(l),
            PlanElement::Activity(_) => None,
        })
    }

    pub fn legs_mut(&mut self) -> impl Iterator<Item = &mut Leg> {
        self.elements.iter_mut().filter_map(|e| match e {
            PlanElement::Leg(l) => Some(l),
            PlanElement::Activity(_) => None,
        })
    }

    /// The activity before and after leg number `k`.
    pub fn leg_context(&self, k: usize) -> Option<(&Activity, &Leg, &Activity)> {
        let i = 2 * k + 1;
        match (self.elements.get(i - 1), self.elements.get(i), self.elements.get(i + 1)) {
            (
                Some(PlanElement::Activity(a)),
                Some(PlanElement::Leg(l)),
                Some(PlanElement::Activity(b)),
            ) => Some((a, l, b)),
            _ => None,
        }
    }

    /// The single mode shared by every leg, `None` for legless plans.
    /// `Err(())` signals a mixed-mode plan.
    pub fn main_mode(&self) -> Result<Option<Mode>, ()> {
        let mut modes = self.legs().map(|l| l.mode);
        let Some(first) = modes.next() else {
            return Ok(None);
        };
        if modes.all(|m| m == first) {
            Ok(Some(first))
        } else {
            Err(())
        }
    }

    /// Checks alternation and the activity time invariants.
    pub fn validate(&self) -> Result<(), PopulationError> {
        let n = self.elements.len();
        if n == 0 || n % 2 == 0 {
            return Err(PopulationError::Alternation);
        }
        let mut last_end = 0;
        for (i, el) in self.elements.iter().enumerate() {
            match (i % 2 == 0, el) {
                (true, PlanElement::Activity(a)) => match (a.end_time, i + 1 == n) {
                    (Some(_), true) => return Err(PopulationError::FinalEndTime),
                    (None, false) => return Err(PopulationError::MissingEndTime),
                    (Some(t), false) => {
                        if t >= DAY {
                            return Err(PopulationError::EndTimeOutOfRange(t));
                        }
                        if t < last_end {
                            return Err(PopulationError::DecreasingEndTimes);
                        }
                        last_end = t;
                    }
                    (None, true) => {}
                },
                (false, PlanElement::Leg(_)) => {}
                _ => return Err(PopulationError::Alternation),
            }
        }
        Ok(())
    }

    pub fn clear_routes(&mut self) {
        for leg in self.legs_mut() {
            leg.route = None;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Person {
    pub id: String,
    pub plans: Vec<Plan>,
    pub selected: usize,
}

impl Person {
    pub fn new(id: impl Into<String>, plan: Plan) -> Self {
        Person {
            id: id.into(),
            plans: vec![plan],
            selected: 0,
        }
    }

    pub fn selected_plan(&self) -> &Plan {
        &self.plans[self.selected]
    }

    pub fn selected_plan_mut(&mut self) -> &mut Plan {
        &mut self.plans[self.selected]
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Population {
    pub persons: BTreeMap<String, Person>,
}

impl Population {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, person: Person) -> Result<(), PopulationError> {
        if self.persons.contains_key(&person.id) {
            return Err(PopulationError::DuplicatePerson(person.id));
        }
        self.persons.insert(person.id.clone(), person);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.persons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.persons.is_empty()
    }
}

/// Builds a home-work-home plan.
pub fn commute_plan(
    home: (f64, f64),
    work: (f64, f64),
    leave_home: Time,
    leave_work: Time,
    mode: Mode,
) -> Plan {
    let act = |kind: &str, (x, y): (f64, f64), end_time| {
        PlanElement::Activity(Activity {
            kind: kind.to_string(),
            x,
            y,
            end_time,
            link: None,
        })
    };
    Plan {
        elements: vec![
            act("h", home, Some(leave_home)),
            PlanElement::Leg(Leg::new(mode)),
            act("w", work, Some(leave_work)),
            PlanElement::Leg(Leg::new(mode)),
            act("h", home, None),
        ],
        score: None,
    }
}
