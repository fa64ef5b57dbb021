use crate::mobsim::{freeflow_time, teleport_distance, teleport_leg};
use crate::network::{Graph, LeastCostTree, Network, Path, CAR};
use crate::population::{Activity, CarRoute, DrtRoute, Leg, Mode, Plan, PlanElement, Route, TeleportRoute};
use crate::time::Time;
use crate::transit::{PtRouterParams, TransitRouter, TransitSchedule};

/// Computes routes for every leg mode on a fixed network and schedule.
pub struct LegRouter {
    graph: Graph,
    car_secs: Vec<Option<f64>>,
    pt: Option<TransitRouter>,
    walk_speed: f64,
    beeline_factor: f64,
}

impl LegRouter {
    pub fn new(net: &Network, schedule: Option<&TransitSchedule>, pt_params: PtRouterParams) -> Self {
        let graph = Graph::new(net);
        let car_secs = graph
            .links
            .iter()
            .map(|l| l.allows(CAR).then(|| l.freeflow_secs()))
            .collect();
        LegRouter {
            walk_speed: pt_params.walk_speed,
            beeline_factor: pt_params.beeline_factor,
            pt: schedule.map(|s| TransitRouter::new(s, Some(net), pt_params)),
            graph,
            car_secs,
        }
    }

    /// Least free-flow-time car path between two links, both included.
    /// Returns the link indices.
    fn car_links(&self, from: usize, to: usize) -> Option<Vec<usize>> {
        if from == to {
            return Some(vec![from]);
        }
        self.car_secs[from]?;
        self.car_secs[to]?;
        let tree = LeastCostTree::build(&self.graph, self.graph.link_to[from], |l| self.car_secs[l]);
        let mut links = vec![from];
        links.extend(tree.links_to(&self.graph, self.graph.link_from[to])?);
        links.push(to);
        Some(links)
    }

    pub fn car_route(&self, from: &str, to: &str) -> Option<CarRoute> {
        let links = self.car_links(self.graph.link_idx(from)?, self.graph.link_idx(to)?)?;
        let rest = &links[1..];
        Some(CarRoute {
            path: Path {
                links: links.iter().map(|&l| self.graph.link(l).id.clone()).collect(),
                travel_cost: rest.iter().map(|&l| self.car_secs[l].unwrap_or(0.0)).sum(),
            },
            distance: rest.iter().map(|&l| self.graph.link(l).length).sum(),
        })
    }

    /// Direct free-flow ride in whole seconds, as the DRT dispatcher sees it.
    pub fn drt_route(&self, from: &str, to: &str) -> Option<DrtRoute> {
        let links = self.car_links(self.graph.link_idx(from)?, self.graph.link_idx(to)?)?;
        let rest = &links[1..];
        Some(DrtRoute {
            direct_time: rest.iter().map(|&l| freeflow_time(self.graph.link(l))).sum(),
            distance: rest.iter().map(|&l| self.graph.link(l).length).sum(),
        })
    }

    pub fn walk_route(&self, from: (f64, f64), to: (f64, f64)) -> TeleportRoute {
        TeleportRoute {
            travel_time: teleport_leg(from, to, self.walk_speed, self.beeline_factor),
            distance: teleport_distance(from, to, self.beeline_factor),
        }
    }

    pub fn route_leg(&self, from: &Activity, leg: &Leg, to: &Activity, departure: Time) -> Option<Route> {
        let links = || Some((from.link.as_deref()?, to.link.as_deref()?));
        match leg.mode {
            Mode::Car => links().and_then(|(a, b)| self.car_route(a, b)).map(Route::Car),
            Mode::Drt => links().and_then(|(a, b)| self.drt_route(a, b)).map(Route::Drt),
            Mode::Pt => self
                .pt
                .as_ref()
                .and_then(|r| r.route(from.coord(), to.coord(), departure))
                .map(Route::Pt),
            Mode::Walk => Some(Route::Walk(self.walk_route(from.coord(), to.coord()))),
        }
    }

    /// Routes every leg; with `only_missing`, legs that already carry a route
    /// are kept. Unroutable legs are left without a route.
    pub fn route_plan(&self, plan: &mut Plan, only_missing: bool) {
        let mut departure = 0;
        for i in 0..plan.elements.len() {
            if let PlanElement::Activity(a) = &plan.elements[i] {
                departure = a.end_time.unwrap_or(departure);
                continue;
            }
            let (PlanElement::Activity(from), PlanElement::Leg(leg), PlanElement::Activity(to)) =
                (&plan.elements[i - 1], &plan.elements[i], &plan.elements[i + 1])
            else {
                continue;
            };
            if only_missing && leg.route.is_some() {
                continue;
            }
            let route = self.route_leg(from, leg, to, departure);
            if let PlanElement::Leg(leg) = &mut plan.elements[i] {
                leg.route = route;
            }
        }
    }
}
