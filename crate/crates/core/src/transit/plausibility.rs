use std::collections::BTreeSet;
use std::fmt;

use super::{TransitError, TransitSchedule};
use crate::network::Network;

#[derive(Debug, Clone, PartialEq)]
pub enum WarningKind {
    /// The network route passes `node` more than once.
    Loop { node: String },
    /// Free-flow time between two stops exceeds the scheduled time.
    TravelTime {
        from_stop: String,
        to_stop: String,
        freeflow: f64,
        scheduled: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlausibilityWarning {
    pub line: String,
    pub route: String,
    pub kind: WarningKind,
}

impl PlausibilityWarning {
    pub fn kind_label(&self) -> &'static str {
        match self.kind {
            WarningKind::Loop { .. } => "loop",
            WarningKind::TravelTime { .. } => "travel_time",
        }
    }

    pub fn location(&self) -> String {
        match &self.kind {
            WarningKind::Loop { node } => node.clone(),
            WarningKind::TravelTime { from_stop, to_stop, .. } => format!("{from_stop}->{to_stop}"),
        }
    }
}

impl fmt::Display for PlausibilityWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}: {} at {}", self.line, self.route, self.kind_label(), self.location())?;
        if let WarningKind::TravelTime { freeflow, scheduled, .. } = self.kind {
            write!(f, " (free-flow {freeflow:.1} s, scheduled {scheduled:.1} s)")?;
        }
        Ok(())
    }
}

/// Checks mapped routes for node revisits and for scheduled stop-to-stop
/// times that free-flow driving cannot meet within `speed_tolerance`.
/// Artificial loop links do not count as revisits.
pub fn check_plausibility(
    schedule: &TransitSchedule,
    net: &Network,
    speed_tolerance: f64,
) -> Result<Vec<PlausibilityWarning>, TransitError> {
    let mut report = Vec::new();
    for (line, route) in schedule.routes() {
        if route.network_route.is_empty() {
            return Err(TransitError::Unmapped(route.id.clone()));
        }
        let links = route
            .network_route
            .iter()
            .map(|id| net.link(id).ok_or_else(|| TransitError::Unmapped(id.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        let warn = |kind| PlausibilityWarning {
            line: line.id.clone(),
            route: route.id.clone(),
            kind,
        };

        let mut seen = BTreeSet::new();
        let mut reported = BTreeSet::new();
        let mut first = true;
        for link in links.iter().filter(|l| !l.is_loop) {
            if first {
                seen.insert(link.from.as_str());
                first = false;
            }
            if !seen.insert(link.to.as_str()) && reported.insert(link.to.as_str()) {
                report.push(warn(WarningKind::Loop { node: link.to.clone() }));
            }
        }

        let mut positions = Vec::with_capacity(route.stops.len());
        let mut pos = 0;
        for rs in &route.stops {
            let stop_link = schedule.stops[&rs.stop]
                .link
                .as_ref()
                .ok_or_else(|| TransitError::Unmapped(rs.stop.clone()))?;
            let offset = route.network_route[pos..]
                .iter()
                .position(|l| l == stop_link)
                .ok_or_else(|| TransitError::Unmapped(rs.stop.clone()))?;
            pos += offset;
            positions.push(pos);
        }
        for k in 1..route.stops.len() {
            let freeflow: f64 = links[positions[k - 1] + 1..=positions[k]]
                .iter()
                .map(|l| l.freeflow_secs())
                .sum();
            let scheduled = route.stops[k].arrival_offset as f64 - route.stops[k - 1].departure_offset as f64;
            if freeflow > scheduled * (1.0 + speed_tolerance) {
                report.push(warn(WarningKind::TravelTime {
                    from_stop: route.stops[k - 1].stop.clone(),
                    to_stop: route.stops[k].stop.clone(),
                    freeflow,
                    scheduled,
                }));
            }
        }
    }
    Ok(report)
}
