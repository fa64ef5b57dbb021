use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;

use super::{TransitError, TransitSchedule, TransitStopFacility};
use crate::network::{euclidean, Graph, LeastCostTree, Link, Network, PT};

pub const ARTIFICIAL_LENGTH: f64 = 5.0;
pub const ARTIFICIAL_SPEED: f64 = 10.0;
pub const ARTIFICIAL_CAPACITY: f64 = 9999.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostMetric {
    TravelTime,
    Length,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapperParams {
    pub n_candidates: usize,
    /// meters
    pub max_candidate_distance: f64,
    pub cost: CostMetric,
    /// Weight on the network path between two consecutive candidates.
    pub candidate_multiplier: f64,
    pub pt_mode: String,
    /// Create artificial loop links and connectors instead of failing.
    pub artificial_links: bool,
}

impl Default for MapperParams {
    fn default() -> Self {
        MapperParams {
            n_candidates: 6,
            max_candidate_distance: 50.0,
            cost: CostMetric::TravelTime,
            candidate_multiplier: 4.0,
            pt_mode: PT.to_string(),
            artificial_links: true,
        }
    }
}

impl MapperParams {
    fn link_cost(&self, link: &Link) -> f64 {
        match self.cost {
            CostMetric::TravelTime => link.freeflow_secs(),
            CostMetric::Length => link.length,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkCandidate {
    pub stop: String,
    pub link: String,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MappingResult {
    pub schedule: TransitSchedule,
    pub network: Network,
    /// Ids of links added to the network, in insertion order.
    pub artificial_links: Vec<String>,
}

/// The nearest `n_candidates` pt links within the maximum distance,
/// ordered by (distance, link id).
pub fn candidate_links(net: &Network, stop: &TransitStopFacility, params: &MapperParams) -> Vec<LinkCandidate> {
    let mut found: Vec<LinkCandidate> = net
        .links
        .values()
        .filter(|l| l.allows(&params.pt_mode))
        .map(|l| LinkCandidate {
            stop: stop.id.clone(),
            link: l.id.clone(),
            distance: net.distance_to_link(l, stop.x, stop.y),
        })
        .filter(|c| c.distance <= params.max_candidate_distance)
        .collect();
    found.sort_by(|a, b| a.distance.total_cmp(&b.distance).then_with(|| a.link.cmp(&b.link)));
    found.truncate(params.n_candidates);
    found
}

fn artificial_link(id: String, from: &str, to: &str, length: f64, pt_mode: &str) -> Link {
    Link {
        id,
        from: from.to_string(),
        to: to.to_string(),
        length,
        freespeed: ARTIFICIAL_SPEED,
        capacity: ARTIFICIAL_CAPACITY,
        lanes: 1.0,
        modes: BTreeSet::from([pt_mode.to_string()]),
        is_loop: from == to,
    }
}

struct RouteMapping {
    stop_links: Vec<usize>,
    /// each hop is either a real link index or a connector between nodes
    hops: Vec<Hop>,
}

#[derive(Clone, Copy)]
enum Hop {
    Link(usize),
    Connector(usize, usize),
}

/// Maps every transit route onto the network.
///
/// Each stop gets a candidate set of nearby pt links. A layered graph over
/// the candidates is solved for least cost, where moving from candidate A
/// to candidate B costs `multiplier * path(A, B) + c(A)/2 + c(B)/2`. When
/// A and B are the same link, the path between them is that link itself.
/// Stops without candidates get an artificial loop link at their
/// coordinate; candidate pairs without a connecting path are joined by an
/// artificial straight connector.
pub fn map_schedule(
    schedule: &TransitSchedule,
    net: &Network,
    params: &MapperParams,
) -> Result<MappingResult, TransitError> {
    schedule.validate()?;
    let mut network = net.clone();
    let mut artificial = Vec::new();
    let mut candidates: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for stop in schedule.stops.values() {
        let mut set: Vec<String> = candidate_links(net, stop, params).into_iter().map(|c| c.link).collect();
        if set.is_empty() {
            if !params.artificial_links {
                return Err(TransitError::NoCandidate { stop: stop.id.clone() });
            }
            let id = format!("pt_{}", stop.id);
            network.add_node(id.clone(), stop.x, stop.y)?;
            network.add_link(artificial_link(id.clone(), &id, &id, ARTIFICIAL_LENGTH, &params.pt_mode))?;
            artificial.push(id.clone());
            set.push(id);
        }
        candidates.insert(stop.id.clone(), set);
    }

    let graph = Graph::new(&network);
    let costs: Vec<f64> = graph.links.iter().map(|l| params.link_cost(l)).collect();
    let usable: Vec<bool> = graph.links.iter().map(|l| l.allows(&params.pt_mode)).collect();
    let connector_cost = |a: usize, b: usize| -> f64 {
        let len = euclidean(
            (graph.nodes[a].x, graph.nodes[a].y),
            (graph.nodes[b].x, graph.nodes[b].y),
        )
        .max(1.0);
        match params.cost {
            CostMetric::TravelTime => len / ARTIFICIAL_SPEED,
            CostMetric::Length => len,
        }
    };

    let routes: Vec<(&str, &str)> = schedule.routes().map(|(l, r)| (l.id.as_str(), r.id.as_str())).collect();
    let mapped: Vec<Result<RouteMapping, TransitError>> = routes
        .par_iter()
        .map(|&(line, route_id)| {
            let route = &schedule.lines[line].routes[route_id];
            if route.stops.len() < 2 {
                return Err(TransitError::TooFewStops { route: route.id.clone() });
            }
            let layers: Vec<Vec<usize>> = route
                .stops
                .iter()
                .map(|rs| {
                    candidates[&rs.stop]
                        .iter()
                        .map(|id| graph.link_idx(id).expect("candidate exists"))
                        .collect()
                })
                .collect();
            let mut trees: HashMap<usize, LeastCostTree> = HashMap::new();
            let mut tree_from = |node: usize| -> LeastCostTree {
                trees
                    .entry(node)
                    .or_insert_with(|| LeastCostTree::build(&graph, node, |l| usable[l].then_some(costs[l])))
                    .clone()
            };
            let mult = params.candidate_multiplier;
            let edge = |tree: &LeastCostTree, a: usize, b: usize| -> Option<(f64, Hop2)> {
                if a == b {
                    return Some((mult * costs[a] + costs[a], Hop2::Same));
                }
                let (from, to) = (graph.link_to[a], graph.link_from[b]);
                let half = 0.5 * costs[a] + 0.5 * costs[b];
                if tree.reaches(to) {
                    Some((mult * tree.cost[to] + half, Hop2::Path))
                } else if params.artificial_links {
                    Some((mult * connector_cost(from, to) + half, Hop2::Connector))
                } else {
                    None
                }
            };
            let mut best: Vec<Vec<f64>> = vec![vec![0.0; layers[0].len()]];
            let mut back: Vec<Vec<usize>> = vec![vec![0; layers[0].len()]];
            for i in 1..layers.len() {
                let mut row = vec![f64::INFINITY; layers[i].len()];
                let mut arg = vec![usize::MAX; layers[i].len()];
                for (ai, &a) in layers[i - 1].iter().enumerate() {
                    if !best[i - 1][ai].is_finite() {
                        continue;
                    }
                    let tree = tree_from(graph.link_to[a]);
                    for (bi, &b) in layers[i].iter().enumerate() {
                        if let Some((c, _)) = edge(&tree, a, b) {
                            let total = best[i - 1][ai] + c;
                            if total < row[bi] {
                                row[bi] = total;
                                arg[bi] = ai;
                            }
                        }
                    }
                }
                if row.iter().all(|c| !c.is_finite()) {
                    return Err(TransitError::Disconnected {
                        route: route.id.clone(),
                        from: route.stops[i - 1].stop.clone(),
                        to: route.stops[i].stop.clone(),
                    });
                }
                best.push(row);
                back.push(arg);
            }
            let last = best.len() - 1;
            let mut pick = 0;
            for (bi, c) in best[last].iter().enumerate() {
                if *c < best[last][pick] {
                    pick = bi;
                }
            }
            let mut chosen = vec![0usize; layers.len()];
            for i in (0..layers.len()).rev() {
                chosen[i] = pick;
                pick = back[i][pick];
            }
            let stop_links: Vec<usize> = chosen.iter().enumerate().map(|(i, &c)| layers[i][c]).collect();
            let mut hops = vec![Hop::Link(stop_links[0])];
            for w in stop_links.windows(2) {
                let (a, b) = (w[0], w[1]);
                let tree = tree_from(graph.link_to[a]);
                match edge(&tree, a, b).expect("chosen edge exists").1 {
                    Hop2::Same => continue,
                    Hop2::Path => {
                        let links = tree.links_to(&graph, graph.link_from[b]).expect("reachable");
                        hops.extend(links.into_iter().map(Hop::Link));
                    }
                    Hop2::Connector => hops.push(Hop::Connector(graph.link_to[a], graph.link_from[b])),
                }
                hops.push(Hop::Link(b));
            }
            Ok(RouteMapping { stop_links, hops })
        })
        .collect();

    // merge: connectors and facility assignments in deterministic order
    let mut out = schedule.clone();
    let mut assigned: BTreeMap<String, String> = BTreeMap::new();
    let mut children: BTreeMap<String, TransitStopFacility> = BTreeMap::new();
    for (&(line, route_id), result) in routes.iter().zip(mapped) {
        let m = result?;
        let mut links = Vec::with_capacity(m.hops.len());
        for hop in m.hops {
            match hop {
                Hop::Link(l) => links.push(graph.links[l].id.clone()),
                Hop::Connector(a, b) => {
                    let (from, to) = (&graph.nodes[a].id, &graph.nodes[b].id);
                    let id = format!("pt_{from}_{to}");
                    if !network.links.contains_key(&id) {
                        let len = euclidean(
                            (graph.nodes[a].x, graph.nodes[a].y),
                            (graph.nodes[b].x, graph.nodes[b].y),
                        )
                        .max(1.0);
                        network.add_link(artificial_link(id.clone(), from, to, len, &params.pt_mode))?;
                        artificial.push(id.clone());
                    }
                    links.push(id);
                }
            }
        }
        let route = out.lines.get_mut(line).unwrap().routes.get_mut(route_id).unwrap();
        route.network_route = links;
        for (rs, &l) in route.stops.iter_mut().zip(&m.stop_links) {
            let link = &graph.links[l].id;
            match assigned.get(&rs.stop) {
                None => {
                    assigned.insert(rs.stop.clone(), link.clone());
                }
                Some(existing) if existing == link => {}
                Some(_) => {
                    // the same stop was placed on another link by an earlier route
                    let child_id = format!("{}.link:{}", rs.stop, link);
                    let mut child = schedule.stops[&rs.stop].clone();
                    child.id = child_id.clone();
                    child.link = Some(link.clone());
                    children.insert(child_id.clone(), child);
                    rs.stop = child_id;
                }
            }
        }
    }
    for (stop, link) in assigned {
        out.stops.get_mut(&stop).unwrap().link = Some(link);
    }
    out.stops.extend(children);
    // stops no route uses still need a link for the simulation
    for (id, stop) in out.stops.iter_mut() {
        if stop.link.is_none() {
            stop.link = candidates.get(id).and_then(|c| c.first().cloned());
        }
    }
    Ok(MappingResult {
        schedule: out,
        network,
        artificial_links: artificial,
    })
}

#[derive(Clone, Copy)]
enum Hop2 {
    Same,
    Path,
    Connector,
}
