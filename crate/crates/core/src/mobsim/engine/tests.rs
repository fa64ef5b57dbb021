use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::drt::{DrtVehicle, NetworkTravelTimes};
use crate::mobsim::{run, storage_capacity, Event, EventKind, MobsimConfig, MobsimInput, MobsimOutput};
use crate::network::testutil::random_network;
use crate::network::{Graph, Network, Path};
use crate::population::{Activity, CarRoute, Leg, Mode, Person, Plan, PlanElement, Population, Route};
use crate::time::Time;
use crate::transit::{
    Departure, PtRouterParams, RouteStop, TransitLine, TransitRoute, TransitRouter, TransitSchedule,
    TransitStopFacility, TransitVehicles, VehicleType,
};

/// `n0 -> n1 -> ...` with link `l{i}` from `n{i}` to `n{i+1}`, all at 10 m/s.
/// Each entry is (length, capacity, lanes).
fn chain(specs: &[(f64, f64, f64)], modes: &str) -> Network {
    let mut net = Network::new();
    let mut x = 0.0;
    net.add_node("n0", 0.0, 0.0).unwrap();
    for (i, &(len, cap, lanes)) in specs.iter().enumerate() {
        x += len;
        net.add_node(format!("n{}", i + 1), x, 0.0).unwrap();
        net.add_simple_link(&format!("l{i}"), &format!("n{i}"), &format!("n{}", i + 1), len, 10.0, cap, lanes, modes)
            .unwrap();
    }
    net
}

fn act(kind: &str, link: &str, x: f64, end: Option<Time>) -> PlanElement {
    PlanElement::Activity(Activity {
        kind: kind.into(),
        x,
        y: 0.0,
        end_time: end,
        link: Some(link.into()),
    })
}

fn trip(id: &str, from: &str, to: &str, leave: Time, mode: Mode, route: Option<Route>) -> Person {
    let plan = Plan {
        elements: vec![
            act("h", from, 0.0, Some(leave)),
            PlanElement::Leg(Leg { mode, route }),
            act("w", to, 0.0, None),
        ],
        score: None,
    };
    Person::new(id, plan)
}

fn car(links: &[&str]) -> Option<Route> {
    Some(Route::Car(CarRoute {
        path: Path {
            links: links.iter().map(|s| s.to_string()).collect(),
            travel_cost: 0.0,
        },
        distance: 0.0,
    }))
}

fn simulate(net: &Network, pop: &Population, seed: u64) -> MobsimOutput {
    let cfg = MobsimConfig { seed, ..MobsimConfig::default() };
    run(&MobsimInput { network: net, population: pop, transit: None, fleet: &[] }, &cfg).unwrap()
}

fn brief(events: &[Event]) -> Vec<(Time, EventKind, String)> {
    events
        .iter()
        .map(|e| (e.time, e.kind, e.link.clone().unwrap_or_default()))
        .collect()
}

/// Replays link events and returns the peak occupancy of every link.
fn peak_occupancy(events: &[Event]) -> HashMap<String, usize> {
    let mut occ: HashMap<String, i64> = HashMap::new();
    let mut peak: HashMap<String, usize> = HashMap::new();
    let mut on_link: HashMap<&str, &str> = HashMap::new();
    for e in events {
        let (Some(link), Some(veh)) = (&e.link, &e.vehicle) else { continue };
        let d = match e.kind {
            EventKind::LinkEnter => {
                on_link.insert(veh, link);
                1
            }
            EventKind::LinkLeave | EventKind::Arrival if on_link.get(veh.as_str()) == Some(&link.as_str()) => {
                on_link.remove(veh.as_str());
                -1
            }
            _ => continue,
        };
        let o = occ.entry(link.clone()).or_default();
        *o += d;
        assert!(*o >= 0, "negative occupancy on {link}");
        let p = peak.entry(link.clone()).or_default();
        *p = (*p).max(*o as usize);
    }
    peak
}

#[test]
fn free_flow_trip_timing() {
    let net = chain(&[(100.0, 3600.0, 1.0), (100.0, 3600.0, 1.0), (95.0, 3600.0, 1.0)], "car");
    let mut pop = Population::new();
    pop.insert(trip("p", "l0", "l2", 100, Mode::Car, car(&["l0", "l1", "l2"]))).unwrap();
    let out = simulate(&net, &pop, 1);
    let s = |k, t, l: &str| (t, k, l.to_string());
    assert_eq!(
        brief(&out.events),
        vec![
            s(EventKind::ActEnd, 100, "l0"),
            s(EventKind::Departure, 100, "l0"),
            s(EventKind::LinkLeave, 100, "l0"),
            s(EventKind::LinkEnter, 100, "l1"),
            s(EventKind::LinkLeave, 110, "l1"),
            s(EventKind::LinkEnter, 110, "l2"),
            s(EventKind::Arrival, 120, "l2"),
            s(EventKind::ActStart, 120, "l2"),
        ]
    );
    assert!(out.stuck.is_empty());
}

#[test]
fn same_link_trip_arrives_at_once() {
    let net = chain(&[(100.0, 3600.0, 1.0)], "car");
    let mut pop = Population::new();
    pop.insert(trip("p", "l0", "l0", 50, Mode::Car, car(&["l0"]))).unwrap();
    let out = simulate(&net, &pop, 1);
    assert_eq!(out.events.iter().find(|e| e.kind == EventKind::Arrival).unwrap().time, 50);
}

#[test]
fn outflow_respects_capacity() {
    let net = chain(&[(1000.0, 360_000.0, 10.0), (10_000.0, 600.0, 1.0), (10_000.0, 360_000.0, 1000.0)], "car");
    let mut pop = Population::new();
    for i in 0..1000 {
        pop.insert(trip(&format!("p{i:04}"), "l0", "l2", 0, Mode::Car, car(&["l0", "l1", "l2"]))).unwrap();
    }
    let out = simulate(&net, &pop, 3);
    let leaves: Vec<Time> = out
        .events
        .iter()
        .filter(|e| e.kind == EventKind::LinkLeave && e.link.as_deref() == Some("l1"))
        .map(|e| e.time)
        .collect();
    assert_eq!(leaves.len(), 1000);
    for (i, &t) in leaves.iter().enumerate() {
        let in_hour = leaves[i..].iter().take_while(|&&u| u < t + 3600).count();
        assert!(in_hour <= 601, "{in_hour} vehicles left within an hour of {t}");
    }
    let first_hour = leaves.iter().filter(|&&t| t < leaves[0] + 3600).count();
    assert!(first_hour >= 595, "{first_hour}");
}

#[test]
fn bottleneck_spills_back_upstream() {
    // l1 holds 10 vehicles, l2 holds 2 and lets one through every 10 s
    let net = chain(
        &[(100.0, 360_000.0, 1.0), (75.0, 360_000.0, 1.0), (15.0, 360.0, 1.0), (10_000.0, 360_000.0, 5.0)],
        "car",
    );
    let mut pop = Population::new();
    for i in 0..40 {
        pop.insert(trip(&format!("p{i:02}"), "l0", "l3", 0, Mode::Car, car(&["l0", "l1", "l2", "l3"]))).unwrap();
    }
    let out = simulate(&net, &pop, 5);
    let peak = peak_occupancy(&out.events);
    assert_eq!(peak["l1"], storage_capacity(net.link("l1").unwrap()));
    assert_eq!(peak["l2"], 2);
    let arrivals = out.events.iter().filter(|e| e.kind == EventKind::Arrival).count();
    assert_eq!(arrivals, 40);
    let last = out.events.last().unwrap().time;
    assert!(last >= 390, "bottleneck should take about 400 s, finished at {last}");
}

fn random_instance(rng: &mut ChaCha8Rng) -> (Network, Population) {
    let net = random_network(rng, 8, 0.35, &["car"]);
    let g = Graph::new(&net);
    let mut tt = NetworkTravelTimes::new(&g);
    let mut pop = Population::new();
    if g.link_count() == 0 {
        return (net, pop);
    }
    for i in 0..rng.gen_range(5..60) {
        let (a, b) = (rng.gen_range(0..g.link_count()), rng.gen_range(0..g.link_count()));
        let Some(route) = tt.route(a, b) else { continue };
        let ids: Vec<&str> = route.iter().map(|&l| g.link(l).id.as_str()).collect();
        let leave = rng.gen_range(0..600);
        pop.insert(trip(&format!("p{i:02}"), ids[0], ids[ids.len() - 1], leave, Mode::Car, car(&ids))).unwrap();
    }
    (net, pop)
}

#[test]
fn random_networks_keep_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..60 {
        let (net, pop) = random_instance(&mut rng);
        let seed = rng.gen();
        let out = simulate(&net, &pop, seed);
        assert_eq!(out.events, simulate(&net, &pop, seed).events);
        assert!(out.events.windows(2).all(|w| w[0].time <= w[1].time));
        for (link, peak) in peak_occupancy(&out.events) {
            assert!(peak <= storage_capacity(net.link(&link).unwrap()), "{link}: {peak}");
        }
        let mut per_person: BTreeMap<&str, Vec<EventKind>> = BTreeMap::new();
        for e in &out.events {
            if let Some(p) = &e.person {
                per_person.entry(p).or_default().push(e.kind);
            }
        }
        for id in pop.persons.keys() {
            let kinds: Vec<EventKind> = per_person[id.as_str()]
                .iter()
                .copied()
                .filter(|k| matches!(k, EventKind::Departure | EventKind::Arrival | EventKind::Stuck))
                .collect();
            let expected_end = if out.stuck.contains(id) { EventKind::Stuck } else { EventKind::Arrival };
            assert_eq!(kinds, vec![EventKind::Departure, expected_end], "{id}");
        }
    }
}

fn bus_scenario() -> (Network, TransitSchedule, TransitVehicles) {
    let net = chain(&[(100.0, 3600.0, 1.0); 4], "car,pt");
    let mut sched = TransitSchedule::new();
    for (id, link, x) in [("A", "l0", 100.0), ("B", "l2", 300.0)] {
        sched.stops.insert(
            id.into(),
            TransitStopFacility { id: id.into(), name: None, x, y: 0.0, link: Some(link.into()) },
        );
    }
    let route = TransitRoute {
        id: "r".into(),
        vehicle_type: "bus".into(),
        stops: vec![
            RouteStop { stop: "A".into(), arrival_offset: 0, departure_offset: 0 },
            RouteStop { stop: "B".into(), arrival_offset: 100, departure_offset: 100 },
        ],
        network_route: ["l0", "l1", "l2", "l3"].iter().map(|s| s.to_string()).collect(),
        departures: [1000, 1600]
            .iter()
            .enumerate()
            .map(|(i, &t)| Departure { id: format!("d{i}"), time: t, vehicle: format!("bus{i}") })
            .collect(),
    };
    sched.lines.insert("L".into(), TransitLine { id: "L".into(), routes: BTreeMap::from([("r".into(), route)]) });
    let mut vehicles = TransitVehicles::default();
    vehicles.types.insert("bus".into(), VehicleType::bus("bus"));
    vehicles.vehicles.insert("bus0".into(), "bus".into());
    vehicles.vehicles.insert("bus1".into(), "bus".into());
    (net, sched, vehicles)
}

#[test]
fn bus_carries_passenger_and_keeps_schedule() {
    let (net, sched, vehicles) = bus_scenario();
    let router = TransitRouter::new(&sched, Some(&net), PtRouterParams::default());
    let it = router.route((90.0, 0.0), (310.0, 0.0), 900).unwrap();
    let mut pop = Population::new();
    let mut p = trip("p", "l0", "l2", 900, Mode::Pt, Some(Route::Pt(it.clone())));
    if let PlanElement::Activity(a) = &mut p.plans[0].elements[0] {
        a.x = 90.0;
    }
    pop.insert(p).unwrap();
    // keeps the day running past the bus schedule
    let mut walker = trip("w", "l0", "l3", 900, Mode::Walk, None);
    if let PlanElement::Activity(a) = &mut walker.plans[0].elements[2] {
        a.x = 5000.0;
    }
    pop.insert(walker).unwrap();
    let cfg = MobsimConfig::default();
    let out = run(
        &MobsimInput { network: &net, population: &pop, transit: Some((&sched, &vehicles)), fleet: &[] },
        &cfg,
    )
    .unwrap();
    let find = |k: EventKind| out.events.iter().find(|e| e.kind == k && e.person.as_deref() == Some("p")).unwrap();
    let board = find(EventKind::PtBoard);
    assert_eq!((board.time, board.vehicle.as_deref()), (1000, Some("bus0")));
    let alight = find(EventKind::PtAlight);
    assert_eq!(alight.link.as_deref(), Some("l2"));
    // 10 s dwell at A, 20 s to the end of l2
    assert_eq!(alight.time, 1030);
    assert_eq!(find(EventKind::Arrival).time, 1030 + it.egress_walk);
    let bus_leaves_b = out
        .events
        .iter()
        .find(|e| e.kind == EventKind::LinkLeave && e.vehicle.as_deref() == Some("bus0") && e.link.as_deref() == Some("l2"))
        .unwrap();
    assert_eq!(bus_leaves_b.time, 1100);
}

fn loop_network() -> Network {
    let mut net = Network::new();
    for (id, x, y) in [("a", 0.0, 0.0), ("b", 100.0, 0.0), ("c", 100.0, 100.0), ("d", 0.0, 100.0)] {
        net.add_node(id, x, y).unwrap();
    }
    for (id, f, t) in [("l0", "a", "b"), ("l1", "b", "c"), ("l2", "c", "d"), ("l3", "d", "a")] {
        net.add_simple_link(id, f, t, 100.0, 10.0, 3600.0, 1.0, "car").unwrap();
    }
    net
}

fn drt_run(fleet: &[DrtVehicle]) -> MobsimOutput {
    let net = loop_network();
    let mut pop = Population::new();
    pop.insert(trip("p", "l1", "l3", 100, Mode::Drt, None)).unwrap();
    let cfg = MobsimConfig::default();
    run(&MobsimInput { network: &net, population: &pop, transit: None, fleet }, &cfg).unwrap()
}

#[test]
fn drt_vehicle_picks_up_and_drops_off() {
    let fleet = [DrtVehicle { id: "drt0".into(), start_link: "l0".into(), t0: 0, t1: 86_400, capacity: 4 }];
    let out = drt_run(&fleet);
    let times: Vec<(EventKind, Time)> = out
        .events
        .iter()
        .filter(|e| e.person.as_deref() == Some("p"))
        .map(|e| (e.kind, e.time))
        .collect();
    assert_eq!(
        times,
        vec![
            (EventKind::ActEnd, 100),
            (EventKind::Departure, 100),
            (EventKind::DrtRequest, 100),
            (EventKind::DrtPickup, 170),
            (EventKind::DrtDropoff, 250),
            (EventKind::Arrival, 250),
            (EventKind::ActStart, 250),
        ]
    );
}

#[test]
fn empty_fleet_rejects_and_walks() {
    let out = drt_run(&[]);
    let kinds: Vec<EventKind> = out.events.iter().map(|e| e.kind).collect();
    assert!(kinds.contains(&EventKind::DrtRejected));
    let arrival = out.events.iter().find(|e| e.kind == EventKind::Arrival).unwrap();
    assert_eq!(arrival.mode, Some(Mode::Drt));
    assert!(out.stuck.is_empty());
}
