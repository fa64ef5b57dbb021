use std::collections::HashMap;

use super::TransitSchedule;
use crate::mobsim::{teleport_distance, teleport_leg};
use crate::network::{euclidean, Network};
use crate::time::Time;

#[derive(Debug, Clone, PartialEq)]
pub struct PtRouterParams {
    /// Maximum beeline distance walked to the first and from the last stop.
    pub access_radius: f64,
    /// Maximum beeline distance walked between two rides.
    pub transfer_radius: f64,
    pub walk_speed: f64,
    pub beeline_factor: f64,
    pub max_rides: usize,
}

impl Default for PtRouterParams {
    fn default() -> Self {
        PtRouterParams {
            access_radius: 1000.0,
            transfer_radius: 100.0,
            walk_speed: 1.34,
            beeline_factor: 1.3,
            max_rides: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ride {
    pub line: String,
    pub route: String,
    pub board_stop: String,
    pub alight_stop: String,
    pub board_time: Time,
    pub alight_time: Time,
    /// in-vehicle meters
    pub distance: f64,
}

/// A planned door-to-door public transport trip.
#[derive(Debug, Clone, PartialEq)]
pub struct Itinerary {
    pub departure: Time,
    pub arrival: Time,
    pub access_walk: Time,
    pub egress_walk: Time,
    pub access_distance: f64,
    pub egress_distance: f64,
    pub rides: Vec<Ride>,
}

impl Itinerary {
    pub fn walk_secs(&self) -> Time {
        self.access_walk + self.egress_walk
    }

    pub fn ride_distance(&self) -> f64 {
        self.rides.iter().map(|r| r.distance).sum()
    }
}

struct Pattern {
    line: String,
    route: String,
    stops: Vec<usize>,
    arrival: Vec<Time>,
    departure: Vec<Time>,
    starts: Vec<Time>,
    cum_distance: Vec<f64>,
}

#[derive(Clone, Copy)]
struct RideLabel {
    pattern: usize,
    start: Time,
    board: usize,
    alight: usize,
}

const NEVER: Time = Time::MAX;

/// Earliest-arrival router over a transit schedule with walk access,
/// walk transfers and walk egress.
pub struct TransitRouter {
    params: PtRouterParams,
    stop_ids: Vec<String>,
    coords: Vec<(f64, f64)>,
    patterns: Vec<Pattern>,
}

impl TransitRouter {
    /// `net` supplies ride distances along mapped network routes. Without
    /// it, or for unmapped routes, beeline distances between stops are used.
    pub fn new(schedule: &TransitSchedule, net: Option<&Network>, params: PtRouterParams) -> Self {
        let stop_ids: Vec<String> = schedule.stops.keys().cloned().collect();
        let index: HashMap<&str, usize> = stop_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let coords: Vec<(f64, f64)> = schedule.stops.values().map(|s| s.coord()).collect();
        let mut patterns = Vec::new();
        for (line, route) in schedule.routes() {
            let stops: Vec<usize> = route.stops.iter().map(|rs| index[rs.stop.as_str()]).collect();
            let mut starts: Vec<Time> = route.departures.iter().map(|d| d.time).collect();
            starts.sort_unstable();
            let cum_distance = net
                .and_then(|n| network_distances(schedule, route, n))
                .unwrap_or_else(|| {
                    let mut acc = 0.0;
                    let mut out = vec![0.0];
                    for w in stops.windows(2) {
                        acc += euclidean(coords[w[0]], coords[w[1]]);
                        out.push(acc);
                    }
                    out
                });
            patterns.push(Pattern {
                line: line.id.clone(),
                route: route.id.clone(),
                stops,
                arrival: route.stops.iter().map(|s| s.arrival_offset).collect(),
                departure: route.stops.iter().map(|s| s.departure_offset).collect(),
                starts,
                cum_distance,
            });
        }
        TransitRouter {
            params,
            stop_ids,
            coords,
            patterns,
        }
    }

    pub fn params(&self) -> &PtRouterParams {
        &self.params
    }

    fn walk(&self, a: (f64, f64), b: (f64, f64)) -> Time {
        teleport_leg(a, b, self.params.walk_speed, self.params.beeline_factor)
    }

    /// Earliest-arrival itinerary leaving `from` at `departure`. Equal
    /// arrivals prefer fewer rides, then the earlier first boarding, then
    /// the smaller (line, route) ids. `None` when no stop lies within the
    /// access radius at either end or no service connects them.
    pub fn route(&self, from: (f64, f64), to: (f64, f64), departure: Time) -> Option<Itinerary> {
        let n = self.stop_ids.len();
        let p = &self.params;
        let mut tau = vec![NEVER; n];
        for s in 0..n {
            if euclidean(from, self.coords[s]) <= p.access_radius {
                tau[s] = departure + self.walk(from, self.coords[s]);
            }
        }
        let egress: Vec<Option<Time>> = (0..n)
            .map(|s| (euclidean(self.coords[s], to) <= p.access_radius).then(|| self.walk(self.coords[s], to)))
            .collect();

        let mut rides: Vec<Vec<Option<RideLabel>>> = Vec::new();
        let mut transfers: Vec<Vec<Option<usize>>> = Vec::new();
        let mut best: Option<(Time, usize, Time, usize, usize)> = None; // arrival, rides, first board, round, stop
        for round in 0..p.max_rides {
            let mut reach = vec![NEVER; n];
            let mut label: Vec<Option<RideLabel>> = vec![None; n];
            let mut board_time = vec![NEVER; n];
            for (pi, pat) in self.patterns.iter().enumerate() {
                for i in 0..pat.stops.len() {
                    let ready = tau[pat.stops[i]];
                    if ready == NEVER {
                        continue;
                    }
                    let k = pat
                        .starts
                        .partition_point(|&st| st + pat.departure[i] < ready);
                    let Some(&start) = pat.starts.get(k) else { continue };
                    let boards = start + pat.departure[i];
                    for j in i + 1..pat.stops.len() {
                        let s = pat.stops[j];
                        let arr = start + pat.arrival[j];
                        let better = arr < reach[s] || (arr == reach[s] && boards < board_time[s]);
                        if better {
                            reach[s] = arr;
                            board_time[s] = boards;
                            label[s] = Some(RideLabel { pattern: pi, start, board: i, alight: j });
                        }
                    }
                }
            }
            let mut next = vec![NEVER; n];
            let mut via: Vec<Option<usize>> = vec![None; n];
            for s in 0..n {
                if reach[s] == NEVER {
                    continue;
                }
                for t in 0..n {
                    let d = euclidean(self.coords[s], self.coords[t]);
                    if d > p.transfer_radius {
                        continue;
                    }
                    let at = reach[s] + self.walk(self.coords[s], self.coords[t]);
                    if at < next[t] {
                        next[t] = at;
                        via[t] = Some(s);
                    }
                }
            }
            rides.push(label);
            transfers.push(via);
            for s in 0..n {
                if let (Some(w), true) = (egress[s], reach[s] != NEVER) {
                    let arrival = reach[s] + w;
                    let first = self.first_boarding(&rides, &transfers, round, s);
                    let cand = (arrival, round + 1, first, round, s);
                    let take = match best {
                        None => true,
                        Some(b) => {
                            (cand.0, cand.1, cand.2).cmp(&(b.0, b.1, b.2)).then_with(|| {
                                self.first_route_key(&rides, &transfers, cand.3, cand.4)
                                    .cmp(&self.first_route_key(&rides, &transfers, b.3, b.4))
                            }) == std::cmp::Ordering::Less
                        }
                    };
                    if take {
                        best = Some(cand);
                    }
                }
            }
            if next.iter().all(|t| *t == NEVER) {
                break;
            }
            tau = next;
        }

        let (arrival, _, _, round, stop) = best?;
        let mut legs = Vec::new();
        let (mut r, mut s) = (round, stop);
        loop {
            let lab = rides[r][s].expect("labelled stop");
            legs.push(lab);
            let board_stop = self.patterns[lab.pattern].stops[lab.board];
            if r == 0 {
                break;
            }
            s = transfers[r - 1][board_stop].expect("transfer label");
            r -= 1;
        }
        legs.reverse();
        let first_stop = self.patterns[legs[0].pattern].stops[legs[0].board];
        let last = legs.last().unwrap();
        let last_stop = self.patterns[last.pattern].stops[last.alight];
        let rides = legs
            .iter()
            .map(|lab| {
                let pat = &self.patterns[lab.pattern];
                Ride {
                    line: pat.line.clone(),
                    route: pat.route.clone(),
                    board_stop: self.stop_ids[pat.stops[lab.board]].clone(),
                    alight_stop: self.stop_ids[pat.stops[lab.alight]].clone(),
                    board_time: lab.start + pat.departure[lab.board],
                    alight_time: lab.start + pat.arrival[lab.alight],
                    distance: pat.cum_distance[lab.alight] - pat.cum_distance[lab.board],
                }
            })
            .collect();
        let bf = p.beeline_factor;
        Some(Itinerary {
            departure,
            arrival,
            access_walk: self.walk(from, self.coords[first_stop]),
            egress_walk: self.walk(self.coords[last_stop], to),
            access_distance: teleport_distance(from, self.coords[first_stop], bf),
            egress_distance: teleport_distance(self.coords[last_stop], to, bf),
            rides,
        })
    }

    fn trace_first(&self, rides: &[Vec<Option<RideLabel>>], transfers: &[Vec<Option<usize>>], mut r: usize, mut s: usize) -> RideLabel {
        loop {
            let lab = rides[r][s].expect("labelled stop");
            if r == 0 {
                return lab;
            }
            s = transfers[r - 1][self.patterns[lab.pattern].stops[lab.board]].expect("transfer label");
            r -= 1;
        }
    }

    fn first_boarding(&self, rides: &[Vec<Option<RideLabel>>], transfers: &[Vec<Option<usize>>], r: usize, s: usize) -> Time {
        let lab = self.trace_first(rides, transfers, r, s);
        lab.start + self.patterns[lab.pattern].departure[lab.board]
    }

    fn first_route_key(&self, rides: &[Vec<Option<RideLabel>>], transfers: &[Vec<Option<usize>>], r: usize, s: usize) -> (&str, &str) {
        let lab = self.trace_first(rides, transfers, r, s);
        let pat = &self.patterns[lab.pattern];
        (pat.line.as_str(), pat.route.as_str())
    }
}

/// Cumulative meters from the end of the first route link to each stop's
/// link end, following the mapped network route.
fn network_distances(schedule: &TransitSchedule, route: &super::TransitRoute, net: &Network) -> Option<Vec<f64>> {
    if route.network_route.is_empty() {
        return None;
    }
    let lengths: Vec<f64> = route
        .network_route
        .iter()
        .map(|id| net.link(id).map(|l| l.length))
        .collect::<Option<_>>()?;
    let mut out = Vec::with_capacity(route.stops.len());
    let mut pos = 0;
    let mut acc = 0.0;
    for rs in &route.stops {
        let link = schedule.stops.get(&rs.stop)?.link.as_ref()?;
        let offset = route.network_route[pos..].iter().position(|l| l == link)?;
        for len in &lengths[pos + 1..=pos + offset] {
            acc += len;
        }
        pos += offset;
        out.push(acc);
    }
    Some(out)
}
