//! Fixtures shared by the integration test targets.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use minimatsim::mobsim::{Event, EventKind};
use minimatsim::network::{Network, Path};
use minimatsim::population::{Activity, CarRoute, Leg, Mode, Person, Plan, PlanElement, Route};
use minimatsim::time::Time;
use minimatsim::transit::{Departure, RouteStop, TransitLine, TransitRoute, TransitSchedule, TransitStopFacility};
use rand::Rng;

pub fn node_id(i: usize, j: usize) -> String {
    format!("n{i}_{j}")
}

/// Square grid of `n`×`n` nodes with links in both directions at 10 m/s.
pub fn grid(n: usize, spacing: f64, modes: &str) -> Network {
    let mut net = Network::new();
    for i in 0..n {
        for j in 0..n {
            net.add_node(node_id(i, j), i as f64 * spacing, j as f64 * spacing).unwrap();
        }
    }
    let add = |net: &mut Network, a: String, b: String| {
        net.add_simple_link(&format!("{a}-{b}"), &a, &b, spacing, 10.0, 1000.0, 1.0, modes).unwrap();
    };
    for i in 0..n {
        for j in 0..n {
            if i + 1 < n {
                add(&mut net, node_id(i, j), node_id(i + 1, j));
                add(&mut net, node_id(i + 1, j), node_id(i, j));
            }
            if j + 1 < n {
                add(&mut net, node_id(i, j), node_id(i, j + 1));
                add(&mut net, node_id(i, j + 1), node_id(i, j));
            }
        }
    }
    net
}

/// Unmapped single-route schedule with stops at the given points, two
/// minutes apart.
pub fn schedule_with(stops: &[(f64, f64)]) -> TransitSchedule {
    let mut s = TransitSchedule::new();
    let mut route = TransitRoute {
        id: "r".into(),
        vehicle_type: "bus".into(),
        stops: Vec::new(),
        network_route: Vec::new(),
        departures: vec![Departure {
            id: "d".into(),
            time: 8 * 3600,
            vehicle: "v".into(),
        }],
    };
    for (i, &(x, y)) in stops.iter().enumerate() {
        let id = format!("s{i:02}");
        s.stops.insert(
            id.clone(),
            TransitStopFacility {
                id: id.clone(),
                name: None,
                x,
                y,
                link: None,
            },
        );
        let t = 120 * i as Time;
        route.stops.push(RouteStop {
            stop: id,
            arrival_offset: t,
            departure_offset: t,
        });
    }
    s.lines.insert(
        "L".into(),
        TransitLine {
            id: "L".into(),
            routes: BTreeMap::from([("r".into(), route)]),
        },
    );
    s
}

/// A bus path drawn as a self-avoiding walk on a grid, with stops placed
/// part-way along its links. Returns the network, the unmapped schedule and
/// the true link sequence. A link without a stop only ever sits inside a
/// straight run, so the true path is the unique shortest one between stops.
pub fn ground_truth_instance(rng: &mut impl Rng, n: usize, spacing: f64) -> (Network, TransitSchedule, Vec<String>) {
    let net = grid(n, spacing, "car,pt");
    let mut at = (rng.gen_range(0..n), rng.gen_range(0..n));
    let mut visited = BTreeSet::from([at]);
    let mut path = Vec::new();
    for _ in 0..rng.gen_range(4..10) {
        let (i, j) = at;
        let mut options = Vec::new();
        if i + 1 < n {
            options.push((i + 1, j));
        }
        if i > 0 {
            options.push((i - 1, j));
        }
        if j + 1 < n {
            options.push((i, j + 1));
        }
        if j > 0 {
            options.push((i, j - 1));
        }
        options.retain(|o| !visited.contains(o));
        if options.is_empty() {
            break;
        }
        let next = options[rng.gen_range(0..options.len())];
        path.push((at, next));
        visited.insert(next);
        at = next;
    }
    let truth = path
        .iter()
        .map(|&(a, b): &((usize, usize), (usize, usize))| format!("{}-{}", node_id(a.0, a.1), node_id(b.0, b.1)))
        .collect();
    let heading = |k: usize| {
        let (a, b) = path[k];
        (b.0 as i64 - a.0 as i64, b.1 as i64 - a.1 as i64)
    };
    let mut stops = Vec::new();
    for k in 0..path.len() {
        let straight = k > 0 && k + 1 < path.len() && heading(k - 1) == heading(k) && heading(k) == heading(k + 1);
        if straight && rng.gen_bool(0.5) {
            continue;
        }
        let f = rng.gen_range(0.3..0.7);
        let (a, b) = path[k];
        stops.push((
            (a.0 as f64 + f * (b.0 as f64 - a.0 as f64)) * spacing,
            (a.1 as f64 + f * (b.1 as f64 - a.1 as f64)) * spacing,
        ));
    }
    (net, schedule_with(&stops), truth)
}

/// Straight road `n0 -> n1 -> ...` at 10 m/s; link `l{i}` ends at
/// `n{i+1}`. Entries are (length, capacity, lanes).
pub fn chain(specs: &[(f64, f64, f64)]) -> Network {
    let mut net = Network::new();
    let mut x = 0.0;
    net.add_node("n0", 0.0, 0.0).unwrap();
    for (i, &(len, cap, lanes)) in specs.iter().enumerate() {
        x += len;
        net.add_node(format!("n{}", i + 1), x, 0.0).unwrap();
        net.add_simple_link(&format!("l{i}"), &format!("n{i}"), &format!("n{}", i + 1), len, 10.0, cap, lanes, "car")
            .unwrap();
    }
    net
}

fn activity(kind: &str, link: &str, end_time: Option<Time>) -> PlanElement {
    PlanElement::Activity(Activity {
        kind: kind.into(),
        x: 0.0,
        y: 0.0,
        end_time,
        link: Some(link.into()),
    })
}

/// One home-to-work trip. Car trips follow `links` when given.
pub fn trip(id: &str, from: &str, to: &str, leave: Time, mode: Mode, links: Option<&[&str]>) -> Person {
    let route = links.map(|links| {
        Route::Car(CarRoute {
            path: Path {
                links: links.iter().map(|s| s.to_string()).collect(),
                travel_cost: 0.0,
            },
            distance: 0.0,
        })
    });
    Person::new(
        id,
        Plan {
            elements: vec![
                activity("h", from, Some(leave)),
                PlanElement::Leg(Leg { mode, route }),
                activity("w", to, None),
            ],
            score: None,
        },
    )
}

/// Highest number of vehicles present on each link at once, replayed from
/// link enter and leave events.
pub fn peak_occupancy(events: &[Event]) -> HashMap<String, usize> {
    let mut current: HashMap<String, i64> = HashMap::new();
    let mut peak: HashMap<String, usize> = HashMap::new();
    let mut position: HashMap<String, String> = HashMap::new();
    for e in events {
        let (Some(vehicle), Some(link)) = (&e.vehicle, &e.link) else { continue };
        match e.kind {
            EventKind::LinkEnter => {
                position.insert(vehicle.clone(), link.clone());
                let c = current.entry(link.clone()).or_default();
                *c += 1;
                let p = peak.entry(link.clone()).or_default();
                *p = (*p).max(*c as usize);
            }
            EventKind::LinkLeave | EventKind::Arrival => {
                if position.get(vehicle) == Some(link) {
                    position.remove(vehicle);
                    *current.entry(link.clone()).or_default() -= 1;
                }
            }
            _ => {}
        }
    }
    peak
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    assert!(!xs.is_empty());
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}
