//! Directed road graph: nodes, capacitated links with per-mode permissions,
//! and the operations needed to make a raw graph simulation-ready.

mod clean;
mod graph;
mod io;
mod routing;
mod simplify;

use std::collections::{BTreeMap, BTreeSet};

pub use clean::clean;
pub use graph::Graph;
pub use io::{read_network, write_network};
pub use routing::{least_cost_path, LeastCostTree, Path};
pub use simplify::{simplify, simplify_protecting};

use crate::xml::XmlError;

pub const CAR: &str = "car";
pub const PT: &str = "pt";

#[derive(Debug, thiserror::Error)]
pub enum NetworkError {
    #[error(transparent)]
    Xml(#[from] XmlError),
    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<NetworkError>,
    },
    #[error("link '{link}' references unknown node '{node}'")]
    DanglingEndpoint { link: String, node: String },
    #[error("link '{link}' has non-positive {attribute} ({value})")]
    NonPositive {
        link: String,
        attribute: &'static str,
        value: f64,
    },
    #[error("link '{0}' starts and ends at the same node but is not flagged as a loop link")]
    SelfLoop(String),
    #[error("node '{0}' has a non-finite coordinate")]
    NonFiniteCoordinate(String),
    #[error("duplicate node id '{0}'")]
    DuplicateNode(String),
    #[error("duplicate link id '{0}'")]
    DuplicateLink(String),
    #[error("unknown node '{0}'")]
    UnknownNode(String),
    #[error("no link permits mode '{0}'")]
    NoLinksForMode(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub id: String,
    pub from: String,
    pub to: String,
    /// meters
    pub length: f64,
    /// meters per second
    pub freespeed: f64,
    /// vehicles per hour
    pub capacity: f64,
    pub lanes: f64,
    pub modes: BTreeSet<String>,
    /// Loop links (from == to) are only legal when flagged, e.g. the
    /// artificial stop links created while mapping a transit schedule.
    pub is_loop: bool,
}

impl Link {
    pub fn allows(&self, mode: &str) -> bool {
        self.modes.contains(mode)
    }

    /// Real-valued free-flow traversal time in seconds.
    pub fn freeflow_secs(&self) -> f64 {
        self.length / self.freespeed
    }

    fn validate(&self) -> Result<(), NetworkError> {
        for (attribute, value) in [
            ("length", self.length),
            ("freespeed", self.freespeed),
            ("capacity", self.capacity),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(NetworkError::NonPositive {
                    link: self.id.clone(),
                    attribute,
                    value,
                });
            }
        }
        if !(self.lanes >= 1.0) || !self.lanes.is_finite() {
            return Err(NetworkError::NonPositive {
                link: self.id.clone(),
                attribute: "permlanes",
                value: self.lanes,
            });
        }
        if self.from == self.to && !self.is_loop {
            return Err(NetworkError::SelfLoop(self.id.clone()));
        }
        Ok(())
    }
}

/// Parses a comma separated mode list, ignoring blanks.
pub fn parse_modes(raw: &str) -> BTreeSet<String> {
    raw.split(',')
        .map(str::trim)
        .filter(|m| !m.is_empty())
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Network {
    pub nodes: BTreeMap<String, Node>,
    pub links: BTreeMap<String, Link>,
}

impl Network {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, id: impl Into<String>, x: f64, y: f64) -> Result<(), NetworkError> {
        let id = id.into();
        if !x.is_finite() || !y.is_finite() {
            return Err(NetworkError::NonFiniteCoordinate(id));
        }
        if self.nodes.contains_key(&id) {
            return Err(NetworkError::DuplicateNode(id));
        }
        self.nodes.insert(id.clone(), Node { id, x, y });
        Ok(())
    }

    pub fn add_link(&mut self, link: Link) -> Result<(), NetworkError> {
        link.validate()?;
        for node in [&link.from, &link.to] {
            if !self.nodes.contains_key(node) {
                return Err(NetworkError::DanglingEndpoint {
                    link: link.id.clone(),
                    node: node.clone(),
                });
            }
        }
        if self.links.contains_key(&link.id) {
            return Err(NetworkError::DuplicateLink(link.id));
        }
        self.links.insert(link.id.clone(), link);
        Ok(())
    }

    /// Convenience constructor used heavily by scenario builders and tests.
    #[allow(clippy::too_many_arguments)]
    pub fn add_simple_link(
        &mut self,
        id: &str,
        from: &str,
        to: &str,
        length: f64,
        freespeed: f64,
        capacity: f64,
        lanes: f64,
        modes: &str,
    ) -> Result<(), NetworkError> {
        self.add_link(Link {
            id: id.to_string(),
            from: from.to_string(),
            to: to.to_string(),
            length,
            freespeed,
            capacity,
            lanes,
            modes: parse_modes(modes),
            is_loop: from == to,
        })
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn link(&self, id: &str) -> Option<&Link> {
        self.links.get(id)
    }

    /// Checks every invariant; used after bulk edits.
    pub fn validate(&self) -> Result<(), NetworkError> {
        for node in self.nodes.values() {
            if !node.x.is_finite() || !node.y.is_finite() {
                return Err(NetworkError::NonFiniteCoordinate(node.id.clone()));
            }
        }
        for link in self.links.values() {
            link.validate()?;
            for node in [&link.from, &link.to] {
                if !self.nodes.contains_key(node) {
                    return Err(NetworkError::DanglingEndpoint {
                        link: link.id.clone(),
                        node: node.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Midpoint of a link's straight-line geometry.
    pub fn link_midpoint(&self, link: &Link) -> (f64, f64) {
        let a = &self.nodes[&link.from];
        let b = &self.nodes[&link.to];
        ((a.x + b.x) / 2.0, (a.y + b.y) / 2.0)
    }

    /// Euclidean distance from a point to the link's straight segment.
    pub fn distance_to_link(&self, link: &Link, x: f64, y: f64) -> f64 {
        let a = &self.nodes[&link.from];
        let b = &self.nodes[&link.to];
        point_segment_distance((x, y), (a.x, a.y), (b.x, b.y))
    }
}

pub fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

pub fn euclidean(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}
