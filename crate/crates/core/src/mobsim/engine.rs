use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    freeflow_time, storage_capacity, teleport_leg, transit_dwell, Event, EventKind, MobsimConfig, MobsimError,
    MobsimInput, MobsimOutput,
};
use crate::drt::{dispatch, DrtRequest, NetworkTravelTimes, PlannedStop, TravelTime, VehicleSchedule};
use crate::network::{Graph, CAR};
use crate::population::{Mode, PlanElement, Route};
use crate::time::Time;
use crate::transit::{Itinerary, VehicleType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Action {
    Wake(usize),
    BusStart(usize),
    BusStopEnd(usize),
    DrtStopEnd(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AgentState {
    Activity,
    Teleport,
    AccessWalk,
    TransferWalk,
    EgressWalk,
    WaitingAtStop,
    OnBus,
    DrtWaiting,
    DrtRiding,
    InCar,
    Done,
}

struct Agent {
    person: String,
    elements: Vec<PlanElement>,
    /// links of the activities, in plan order
    act_links: Vec<usize>,
    /// index into `elements`
    idx: usize,
    state: AgentState,
    link: usize,
    ride: usize,
    pt_pattern: usize,
    pt_alight: usize,
}

impl Agent {
    fn leg_mode(&self) -> Mode {
        match &self.elements[self.idx] {
            PlanElement::Leg(l) => l.mode,
            PlanElement::Activity(_) => unreachable!("agent is not on a leg"),
        }
    }

    fn itinerary(&self) -> &Itinerary {
        match &self.elements[self.idx] {
            PlanElement::Leg(l) => match &l.route {
                Some(Route::Pt(it)) => it,
                _ => unreachable!("pt leg without itinerary"),
            },
            PlanElement::Activity(_) => unreachable!("agent is not on a leg"),
        }
    }

    /// Activity links before and after the current leg.
    fn leg_ends(&self) -> (usize, usize) {
        let k = self.idx / 2;
        (self.act_links[k], self.act_links[k + 1])
    }
}

#[derive(Clone, Copy)]
enum VehKind {
    Car(usize),
    Bus(usize),
    Drt(usize),
}

struct Vehicle {
    id: String,
    kind: VehKind,
    route: Vec<usize>,
    pos: usize,
    holds_storage: bool,
    exit: Time,
}

impl Vehicle {
    fn link(&self) -> usize {
        self.route[self.pos]
    }

    fn at_route_end(&self) -> bool {
        self.pos + 1 == self.route.len()
    }
}

#[derive(Default)]
struct LinkState {
    queue: VecDeque<(usize, Time)>,
    ready: VecDeque<usize>,
    storage_used: usize,
    credit: f64,
    refilled: Time,
}

struct Pattern {
    links: Vec<usize>,
    stops: Vec<usize>,
    stop_pos: Vec<usize>,
    departure_offsets: Vec<Time>,
}

struct Bus {
    pattern: usize,
    vehicle: usize,
    start: Time,
    next_stop: usize,
    passengers: Vec<usize>,
    vtype: VehicleType,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum DrtStatus {
    Idle,
    Driving,
    Stopping,
}

struct DrtCar {
    vehicle: usize,
    status: DrtStatus,
    current: Option<PlannedStop>,
}

struct Sim<'a> {
    cfg: &'a MobsimConfig,
    g: &'a Graph,
    now: Time,
    rng: ChaCha8Rng,
    events: Vec<Event>,
    agenda: BinaryHeap<Reverse<(Time, u64, Action)>>,
    seq: u64,

    ff: Vec<Time>,
    storage: Vec<usize>,
    rate: Vec<f64>,
    max_credit: Vec<f64>,
    links: Vec<LinkState>,
    active: BTreeSet<usize>,
    vehicles: Vec<Vehicle>,

    agents: Vec<Agent>,
    done: usize,
    stuck: BTreeSet<String>,

    stop_coords: Vec<(f64, f64)>,
    stop_links: Vec<usize>,
    stop_index: HashMap<String, usize>,
    pattern_index: HashMap<(String, String), usize>,
    patterns: Vec<Pattern>,
    buses: Vec<Bus>,
    waiting: Vec<Vec<usize>>,

    tt: NetworkTravelTimes<'a>,
    drt: Vec<DrtCar>,
    schedules: Vec<VehicleSchedule>,
    requests: Vec<usize>,
}

/// Runs the queue simulation for the selected plan of every person.
///
/// Activity links must be assigned and car legs routed. Legs that cannot be
/// executed, such as a pt leg without an itinerary, leave the agent stuck.
pub fn run(input: &MobsimInput, cfg: &MobsimConfig) -> Result<MobsimOutput, MobsimError> {
    let graph = Graph::new(input.network);
    let mut sim = Sim::new(&graph, cfg);
    sim.load_agents(input)?;
    sim.load_transit(input)?;
    sim.load_fleet(input)?;
    sim.run();
    Ok(MobsimOutput {
        events: sim.events,
        stuck: sim.stuck,
    })
}

impl<'a> Sim<'a> {
    fn new(g: &'a Graph, cfg: &'a MobsimConfig) -> Self {
        let ff = g.links.iter().map(freeflow_time).collect();
        let storage = g.links.iter().map(storage_capacity).collect();
        let rate: Vec<f64> = g.links.iter().map(|l| l.capacity / 3600.0).collect();
        let max_credit = rate.iter().map(|r| r.max(1.0)).collect();
        let links = (0..g.link_count())
            .map(|_| LinkState {
                credit: 1.0,
                ..LinkState::default()
            })
            .collect();
        Sim {
            cfg,
            g,
            now: 0,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            events: Vec::new(),
            agenda: BinaryHeap::new(),
            seq: 0,
            ff,
            storage,
            rate,
            max_credit,
            links,
            active: BTreeSet::new(),
            vehicles: Vec::new(),
            agents: Vec::new(),
            done: 0,
            stuck: BTreeSet::new(),
            stop_coords: Vec::new(),
            stop_links: Vec::new(),
            stop_index: HashMap::new(),
            pattern_index: HashMap::new(),
            patterns: Vec::new(),
            buses: Vec::new(),
            waiting: Vec::new(),
            tt: NetworkTravelTimes::new(g),
            drt: Vec::new(),
            schedules: Vec::new(),
            requests: Vec::new(),
        }
    }

    fn load_agents(&mut self, input: &MobsimInput) -> Result<(), MobsimError> {
        for person in input.population.persons.values() {
            let plan = person.selected_plan();
            let mut act_links = Vec::new();
            for act in plan.activities() {
                let id = act.link.as_ref().ok_or_else(|| MobsimError::MissingActivityLink {
                    person: person.id.clone(),
                })?;
                let idx = self.g.link_idx(id).ok_or_else(|| MobsimError::UnknownLink {
                    person: person.id.clone(),
                    link: id.clone(),
                })?;
                act_links.push(idx);
            }
            let a = self.agents.len();
            let first_end = plan.activities().next().and_then(|act| act.end_time);
            self.agents.push(Agent {
                person: person.id.clone(),
                elements: plan.elements.clone(),
                link: act_links.first().copied().unwrap_or(0),
                act_links,
                idx: 0,
                state: AgentState::Activity,
                ride: 0,
                pt_pattern: 0,
                pt_alight: 0,
            });
            match first_end {
                Some(t) if plan.elements.len() > 1 => self.schedule(t, Action::Wake(a)),
                _ => self.finish_agent(a),
            }
        }
        Ok(())
    }

    fn load_transit(&mut self, input: &MobsimInput) -> Result<(), MobsimError> {
        let Some((schedule, vehicles)) = input.transit else {
            return Ok(());
        };
        for (i, stop) in schedule.stops.values().enumerate() {
            self.stop_index.insert(stop.id.clone(), i);
            self.stop_coords.push(stop.coord());
            let link = stop.link.as_deref().and_then(|l| self.g.link_idx(l)).unwrap_or(usize::MAX);
            self.stop_links.push(link);
            self.waiting.push(Vec::new());
        }
        for (line, route) in schedule.routes() {
            if route.network_route.is_empty() {
                return Err(MobsimError::UnmappedRoute { route: route.id.clone() });
            }
            let links = route
                .network_route
                .iter()
                .map(|l| {
                    self.g.link_idx(l).ok_or_else(|| MobsimError::UnknownRouteLink {
                        route: route.id.clone(),
                        link: l.clone(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let mut stops = Vec::new();
            let mut stop_pos = Vec::new();
            let mut pos = 0;
            for rs in &route.stops {
                let s = self.stop_index[&rs.stop];
                let found = links[pos..].iter().position(|&l| l == self.stop_links[s]);
                let Some(off) = found else {
                    return Err(MobsimError::UnmappedRoute { route: route.id.clone() });
                };
                pos += off;
                stops.push(s);
                stop_pos.push(pos);
            }
            let p = self.patterns.len();
            self.pattern_index.insert((line.id.clone(), route.id.clone()), p);
            self.patterns.push(Pattern {
                links,
                stops,
                stop_pos,
                departure_offsets: route.stops.iter().map(|s| s.departure_offset).collect(),
            });
            for dep in &route.departures {
                let vtype = vehicles
                    .vehicle_type(&dep.vehicle)
                    .cloned()
                    .unwrap_or_else(|| VehicleType::bus(route.vehicle_type.clone()));
                let b = self.buses.len();
                let v = self.vehicles.len();
                self.vehicles.push(Vehicle {
                    id: dep.vehicle.clone(),
                    kind: VehKind::Bus(b),
                    route: Vec::new(),
                    pos: 0,
                    holds_storage: false,
                    exit: 0,
                });
                self.buses.push(Bus {
                    pattern: p,
                    vehicle: v,
                    start: dep.time,
                    next_stop: 0,
                    passengers: Vec::new(),
                    vtype,
                });
                self.schedule(dep.time, Action::BusStart(b));
            }
        }
        Ok(())
    }

    fn load_fleet(&mut self, input: &MobsimInput) -> Result<(), MobsimError> {
        for v in input.fleet {
            let link = self
                .g
                .link_idx(&v.start_link)
                .filter(|&l| self.g.link(l).allows(CAR))
                .ok_or_else(|| MobsimError::BadDrtStart {
                    vehicle: v.id.clone(),
                    link: v.start_link.clone(),
                })?;
            let d = self.drt.len();
            let veh = self.vehicles.len();
            self.vehicles.push(Vehicle {
                id: v.id.clone(),
                kind: VehKind::Drt(d),
                route: vec![link],
                pos: 0,
                holds_storage: false,
                exit: 0,
            });
            self.drt.push(DrtCar {
                vehicle: veh,
                status: DrtStatus::Idle,
                current: None,
            });
            self.schedules.push(VehicleSchedule::idle(v.clone(), link, v.t0));
        }
        Ok(())
    }

    fn schedule(&mut self, t: Time, action: Action) {
        self.seq += 1;
        self.agenda.push(Reverse((t, self.seq, action)));
    }

    fn emit(&mut self, kind: EventKind, person: Option<usize>, vehicle: Option<usize>, link: usize, mode: Option<Mode>) {
        self.events.push(Event {
            time: self.now,
            kind,
            person: person.map(|a| self.agents[a].person.clone()),
            vehicle: vehicle.map(|v| self.vehicles[v].id.clone()),
            link: Some(self.g.link(link).id.clone()),
            mode,
        });
    }

    fn run(&mut self) {
        let Some(Reverse((mut now, _, _))) = self.agenda.peek().copied() else {
            return;
        };
        let mut order: Vec<usize> = Vec::new();
        while now <= self.cfg.end_time && self.done < self.agents.len() {
            self.now = now;
            while let Some(&Reverse((t, _, action))) = self.agenda.peek() {
                if t > now {
                    break;
                }
                self.agenda.pop();
                self.handle(action);
            }

            order.clear();
            order.extend(self.active.iter().map(|&l| self.g.link_to[l]).collect::<BTreeSet<_>>());
            order.shuffle(&mut self.rng);
            for &node in &order {
                for k in 0..self.g.in_links[node].len() {
                    let l = self.g.in_links[node][k];
                    if self.active.contains(&l) {
                        self.move_link(l);
                    }
                }
            }

            let mut next = self.agenda.peek().map(|r| r.0 .0);
            for &l in &self.active {
                let ls = &self.links[l];
                let due = if !ls.ready.is_empty() {
                    now + 1
                } else {
                    ls.queue.front().map_or(Time::MAX, |&(_, exit)| exit.max(now + 1))
                };
                next = Some(next.map_or(due, |n: Time| n.min(due)));
            }
            match next {
                Some(t) => now = t,
                None => break,
            }
        }
        self.now = self.now.max(now.min(self.cfg.end_time));
        for a in 0..self.agents.len() {
            if self.agents[a].state != AgentState::Done {
                self.make_stuck(a);
            }
        }
    }

    fn handle(&mut self, action: Action) {
        match action {
            Action::Wake(a) => self.wake(a),
            Action::BusStart(b) => self.bus_start(b),
            Action::BusStopEnd(b) => self.bus_stop_end(b),
            Action::DrtStopEnd(d) => self.drt_stop_end(d),
        }
    }

    // ---- agents ----------------------------------------------------------

    fn finish_agent(&mut self, a: usize) {
        self.agents[a].state = AgentState::Done;
        self.done += 1;
    }

    fn make_stuck(&mut self, a: usize) {
        let mode = match &self.agents[a].elements[self.agents[a].idx] {
            PlanElement::Leg(l) => Some(l.mode),
            PlanElement::Activity(_) => None,
        };
        let link = self.agents[a].link;
        self.emit(EventKind::Stuck, Some(a), None, link, mode);
        self.stuck.insert(self.agents[a].person.clone());
        self.finish_agent(a);
    }

    fn wake(&mut self, a: usize) {
        match self.agents[a].state {
            AgentState::Activity => {
                let link = self.agents[a].link;
                self.emit(EventKind::ActEnd, Some(a), None, link, None);
                self.agents[a].idx += 1;
                self.start_leg(a);
            }
            AgentState::Teleport | AgentState::EgressWalk => self.arrive(a, None),
            AgentState::AccessWalk | AgentState::TransferWalk => self.begin_wait(a),
            _ => {}
        }
    }

    fn start_leg(&mut self, a: usize) {
        let (origin, dest) = self.agents[a].leg_ends();
        let mode = self.agents[a].leg_mode();
        self.emit(EventKind::Departure, Some(a), None, origin, Some(mode));
        let route = match &self.agents[a].elements[self.agents[a].idx] {
            PlanElement::Leg(l) => l.route.clone(),
            PlanElement::Activity(_) => unreachable!(),
        };
        match (mode, route) {
            (Mode::Car, Some(Route::Car(r))) => {
                let links: Option<Vec<usize>> = r.path.links.iter().map(|l| self.g.link_idx(l)).collect();
                let links = match links {
                    Some(ls) if ls.first() == Some(&origin) && ls.last() == Some(&dest) => ls,
                    _ => return self.make_stuck(a),
                };
                if links.len() == 1 {
                    return self.arrive(a, None);
                }
                let v = self.vehicles.len();
                self.vehicles.push(Vehicle {
                    id: self.agents[a].person.clone(),
                    kind: VehKind::Car(a),
                    route: links,
                    pos: 0,
                    holds_storage: false,
                    exit: self.now,
                });
                self.agents[a].state = AgentState::InCar;
                self.links[origin].ready.push_back(v);
                self.active.insert(origin);
            }
            (Mode::Walk, route) => {
                let secs = match route {
                    Some(Route::Walk(r)) => r.travel_time,
                    _ => self.walk_between_activities(a),
                };
                self.agents[a].state = AgentState::Teleport;
                self.schedule(self.now + secs, Action::Wake(a));
            }
            (Mode::Pt, Some(Route::Pt(it))) => {
                self.agents[a].ride = 0;
                if it.rides.is_empty() {
                    self.agents[a].state = AgentState::Teleport;
                    self.schedule(self.now + it.walk_secs(), Action::Wake(a));
                } else {
                    self.agents[a].state = AgentState::AccessWalk;
                    self.schedule(self.now + it.access_walk, Action::Wake(a));
                }
            }
            (Mode::Drt, _) => self.request_drt(a, origin, dest),
            _ => self.make_stuck(a),
        }
    }

    fn walk_between_activities(&self, a: usize) -> Time {
        let agent = &self.agents[a];
        let coord = |i: usize| match &agent.elements[i] {
            PlanElement::Activity(act) => act.coord(),
            PlanElement::Leg(_) => unreachable!(),
        };
        teleport_leg(
            coord(agent.idx - 1),
            coord(agent.idx + 1),
            self.cfg.walk_speed,
            self.cfg.beeline_factor,
        )
    }

    fn arrive(&mut self, a: usize, vehicle: Option<usize>) {
        let (_, dest) = self.agents[a].leg_ends();
        let mode = self.agents[a].leg_mode();
        self.emit(EventKind::Arrival, Some(a), vehicle, dest, Some(mode));
        let agent = &mut self.agents[a];
        agent.idx += 1;
        agent.link = dest;
        agent.state = AgentState::Activity;
        self.emit(EventKind::ActStart, Some(a), None, dest, None);
        let agent = &self.agents[a];
        let end = match &agent.elements[agent.idx] {
            PlanElement::Activity(act) => act.end_time,
            PlanElement::Leg(_) => unreachable!(),
        };
        match end {
            Some(t) if agent.idx + 1 < agent.elements.len() => self.schedule(t.max(self.now), Action::Wake(a)),
            _ => self.finish_agent(a),
        }
    }

    // ---- public transport ------------------------------------------------

    fn begin_wait(&mut self, a: usize) {
        let ride = {
            let agent = &self.agents[a];
            agent.itinerary().rides[agent.ride].clone()
        };
        let key = (ride.line.clone(), ride.route.clone());
        let (Some(&board), Some(&alight), Some(&pattern)) = (
            self.stop_index.get(&ride.board_stop),
            self.stop_index.get(&ride.alight_stop),
            self.pattern_index.get(&key),
        ) else {
            return self.make_stuck(a);
        };
        let agent = &mut self.agents[a];
        agent.pt_pattern = pattern;
        agent.pt_alight = alight;
        agent.state = AgentState::WaitingAtStop;
        if self.stop_links[board] != usize::MAX {
            agent.link = self.stop_links[board];
        }
        self.waiting[board].push(a);
    }

    fn after_alight(&mut self, a: usize) {
        self.agents[a].ride += 1;
        let agent = &self.agents[a];
        let it = agent.itinerary();
        let (state, secs) = if agent.ride < it.rides.len() {
            let coord = |s: &String| self.stop_index.get(s).map(|&i| self.stop_coords[i]);
            let from = coord(&it.rides[agent.ride - 1].alight_stop);
            let to = coord(&it.rides[agent.ride].board_stop);
            let secs = match (from, to) {
                (Some(f), Some(t)) => teleport_leg(f, t, self.cfg.walk_speed, self.cfg.beeline_factor),
                _ => 0,
            };
            (AgentState::TransferWalk, secs)
        } else {
            (AgentState::EgressWalk, it.egress_walk)
        };
        self.agents[a].state = state;
        self.schedule(self.now + secs, Action::Wake(a));
    }

    fn bus_start(&mut self, b: usize) {
        let v = self.buses[b].vehicle;
        let p = self.buses[b].pattern;
        self.vehicles[v].route = self.patterns[p].links.clone();
        self.vehicles[v].pos = 0;
        if self.patterns[p].stop_pos[0] == 0 {
            self.serve_stop(b);
        } else {
            let l = self.vehicles[v].link();
            self.links[l].ready.push_back(v);
            self.active.insert(l);
        }
    }

    /// Returns the number boarded.
    fn board(&mut self, b: usize, stop: usize) -> usize {
        let bus = &self.buses[b];
        let free = (bus.vtype.capacity() as usize).saturating_sub(bus.passengers.len());
        let pattern = bus.pattern;
        let mut boarding = Vec::new();
        self.waiting[stop].retain(|&a| {
            if boarding.len() < free && self.agents[a].pt_pattern == pattern {
                boarding.push(a);
                false
            } else {
                true
            }
        });
        let v = self.buses[b].vehicle;
        let link = self.vehicles[v].link();
        for &a in &boarding {
            self.emit(EventKind::PtBoard, Some(a), Some(v), link, Some(Mode::Pt));
            self.agents[a].state = AgentState::OnBus;
            self.buses[b].passengers.push(a);
        }
        boarding.len()
    }

    fn serve_stop(&mut self, b: usize) {
        let p = self.buses[b].pattern;
        let ns = self.buses[b].next_stop;
        let stop = self.patterns[p].stops[ns];
        let v = self.buses[b].vehicle;
        let link = self.vehicles[v].link();
        let (leaving, staying): (Vec<usize>, Vec<usize>) = self.buses[b]
            .passengers
            .iter()
            .partition(|&&a| self.agents[a].pt_alight == stop);
        self.buses[b].passengers = staying;
        for &a in &leaving {
            self.emit(EventKind::PtAlight, Some(a), Some(v), link, Some(Mode::Pt));
            self.agents[a].link = link;
            self.after_alight(a);
        }
        let boarded = self.board(b, stop);
        let dwell = transit_dwell(boarded, leaving.len(), &self.buses[b].vtype, self.cfg.min_dwell);
        let ready = (self.now + dwell).max(self.buses[b].start + self.patterns[p].departure_offsets[ns]);
        self.schedule(ready, Action::BusStopEnd(b));
    }

    fn bus_stop_end(&mut self, b: usize) {
        let p = self.buses[b].pattern;
        let stop = self.patterns[p].stops[self.buses[b].next_stop];
        self.board(b, stop);
        self.buses[b].next_stop += 1;
        let ns = self.buses[b].next_stop;
        let v = self.buses[b].vehicle;
        let pos = self.vehicles[v].pos;
        if ns < self.patterns[p].stops.len() && self.patterns[p].stop_pos[ns] == pos {
            self.serve_stop(b);
        } else if self.vehicles[v].at_route_end() {
            self.finish_bus(b);
        } else {
            let l = self.vehicles[v].link();
            self.links[l].ready.push_back(v);
            self.active.insert(l);
        }
    }

    fn finish_bus(&mut self, b: usize) {
        let v = self.buses[b].vehicle;
        let l = self.vehicles[v].link();
        if self.release(v) {
            self.emit(EventKind::Arrival, None, Some(v), l, Some(Mode::Pt));
        }
        for a in std::mem::take(&mut self.buses[b].passengers) {
            self.make_stuck(a);
        }
    }

    // ---- demand-responsive transport --------------------------------------

    fn request_drt(&mut self, a: usize, origin: usize, dest: usize) {
        if origin == dest {
            return self.arrive(a, None);
        }
        self.emit(EventKind::DrtRequest, Some(a), None, origin, Some(Mode::Drt));
        let direct = self.tt.time(origin, dest);
        let assignment = direct.and_then(|direct_time| {
            let req = DrtRequest {
                id: self.requests.len(),
                person: self.agents[a].person.clone(),
                origin,
                destination: dest,
                submission: self.now,
                direct_time,
            };
            self.sync_drt_starts();
            dispatch(&req, &self.schedules, &self.cfg.drt, &mut self.tt, self.now).map(|asg| (req, asg))
        });
        match assignment {
            Some((req, asg)) => {
                self.requests.push(a);
                self.schedules[asg.vehicle].insert(&req, &asg.insertion, &self.cfg.drt);
                self.agents[a].state = AgentState::DrtWaiting;
                self.drt_replan(asg.vehicle);
            }
            None => {
                self.emit(EventKind::DrtRejected, Some(a), None, origin, Some(Mode::Drt));
                let secs = self.walk_between_activities(a);
                self.agents[a].state = AgentState::Teleport;
                self.schedule(self.now + secs, Action::Wake(a));
            }
        }
    }

    /// Moves each schedule's start to where its vehicle can next change plan.
    fn sync_drt_starts(&mut self) {
        for d in 0..self.drt.len() {
            let v = &self.vehicles[self.drt[d].vehicle];
            let s = &mut self.schedules[d];
            match self.drt[d].status {
                DrtStatus::Idle => {
                    s.start_link = v.link();
                    s.start_time = self.now.max(s.vehicle.t0);
                }
                DrtStatus::Driving => {
                    s.start_link = v.link();
                    s.start_time = self.now.max(v.exit);
                }
                DrtStatus::Stopping => {}
            }
        }
    }

    fn drt_replan(&mut self, d: usize) {
        let status = self.drt[d].status;
        if status == DrtStatus::Stopping {
            return;
        }
        let Some(target) = self.schedules[d].stops.first().map(|s| s.link) else {
            return;
        };
        let v = self.drt[d].vehicle;
        let cur = self.vehicles[v].link();
        if status == DrtStatus::Idle && target == cur {
            return self.start_drt_stop(d);
        }
        let Some(route) = self.tt.route(cur, target) else {
            return;
        };
        self.vehicles[v].route = route;
        self.vehicles[v].pos = 0;
        if status == DrtStatus::Idle {
            self.drt[d].status = DrtStatus::Driving;
            self.links[cur].ready.push_back(v);
            self.active.insert(cur);
        }
    }

    fn start_drt_stop(&mut self, d: usize) {
        let stop = self.schedules[d].stops.remove(0);
        let end = self.now + self.cfg.drt.stop_secs();
        let s = &mut self.schedules[d];
        s.start_link = stop.link;
        s.start_time = end;
        s.onboard = s.onboard + stop.pickups.len() as u32 - stop.dropoffs.len() as u32;
        self.drt[d].status = DrtStatus::Stopping;
        self.drt[d].current = Some(stop);
        self.schedule(end, Action::DrtStopEnd(d));
    }

    fn drt_stop_end(&mut self, d: usize) {
        let stop = self.drt[d].current.take().expect("stop in progress");
        let v = self.drt[d].vehicle;
        for s in &stop.dropoffs {
            let a = self.requests[s.request];
            self.emit(EventKind::DrtDropoff, Some(a), Some(v), stop.link, Some(Mode::Drt));
            self.arrive(a, Some(v));
        }
        for s in &stop.pickups {
            let a = self.requests[s.request];
            self.emit(EventKind::DrtPickup, Some(a), Some(v), stop.link, Some(Mode::Drt));
            self.agents[a].state = AgentState::DrtRiding;
        }
        match self.schedules[d].stops.first().map(|s| s.link) {
            Some(next) if next == stop.link => self.start_drt_stop(d),
            Some(next) => {
                let cur = self.vehicles[v].link();
                match self.tt.route(cur, next) {
                    Some(route) => {
                        self.vehicles[v].route = route;
                        self.vehicles[v].pos = 0;
                        self.drt[d].status = DrtStatus::Driving;
                        self.links[cur].ready.push_back(v);
                        self.active.insert(cur);
                    }
                    None => self.park_drt(d),
                }
            }
            None => self.park_drt(d),
        }
    }

    fn park_drt(&mut self, d: usize) {
        let v = self.drt[d].vehicle;
        let l = self.vehicles[v].link();
        if self.release(v) {
            self.emit(EventKind::Arrival, None, Some(v), l, Some(Mode::Drt));
        }
        self.vehicles[v].route = vec![l];
        self.vehicles[v].pos = 0;
        self.drt[d].status = DrtStatus::Idle;
    }

    // ---- queues ----------------------------------------------------------

    /// Frees the vehicle's storage on its current link. Returns whether it held any.
    fn release(&mut self, v: usize) -> bool {
        let veh = &mut self.vehicles[v];
        if veh.holds_storage {
            veh.holds_storage = false;
            self.links[veh.route[veh.pos]].storage_used -= 1;
            true
        } else {
            false
        }
    }

    fn ends_here(&self, v: usize) -> bool {
        let veh = &self.vehicles[v];
        match veh.kind {
            VehKind::Car(_) | VehKind::Drt(_) => veh.at_route_end(),
            VehKind::Bus(b) => {
                let bus = &self.buses[b];
                let p = &self.patterns[bus.pattern];
                veh.at_route_end() || (bus.next_stop < p.stops.len() && p.stop_pos[bus.next_stop] == veh.pos)
            }
        }
    }

    fn at_link_end(&mut self, v: usize) {
        match self.vehicles[v].kind {
            VehKind::Car(a) => {
                self.release(v);
                self.arrive(a, Some(v));
            }
            VehKind::Bus(b) => {
                let bus = &self.buses[b];
                let p = &self.patterns[bus.pattern];
                if bus.next_stop < p.stops.len() && p.stop_pos[bus.next_stop] == self.vehicles[v].pos {
                    self.serve_stop(b);
                } else {
                    self.finish_bus(b);
                }
            }
            VehKind::Drt(d) => {
                let here = self.vehicles[v].link();
                if self.schedules[d].stops.first().map(|s| s.link) == Some(here) {
                    self.start_drt_stop(d);
                } else {
                    self.park_drt(d);
                }
            }
        }
    }

    fn move_link(&mut self, l: usize) {
        let now = self.now;
        loop {
            let ls = &self.links[l];
            let (v, from_queue) = match ls.queue.front() {
                Some(&(v, exit)) if exit <= now => (v, true),
                _ => match ls.ready.front() {
                    Some(&v) => (v, false),
                    None => break,
                },
            };
            if self.ends_here(v) {
                self.pop(l, from_queue);
                self.at_link_end(v);
                continue;
            }

            let ls = &mut self.links[l];
            ls.credit = (ls.credit + self.rate[l] * (now - ls.refilled) as f64).min(self.max_credit[l]);
            ls.refilled = now;
            if ls.credit < 1.0 - 1e-9 {
                break;
            }
            let next = self.vehicles[v].route[self.vehicles[v].pos + 1];
            if self.links[next].storage_used >= self.storage[next] {
                break;
            }
            self.pop(l, from_queue);
            self.links[l].credit -= 1.0;
            self.release(v);
            let exit = now + self.ff[next];
            let veh = &mut self.vehicles[v];
            veh.pos += 1;
            veh.holds_storage = true;
            veh.exit = exit;
            self.links[next].storage_used += 1;
            self.links[next].queue.push_back((v, exit));
            self.active.insert(next);

            let (person, mode) = match self.vehicles[v].kind {
                VehKind::Car(a) => {
                    self.agents[a].link = next;
                    (Some(a), Mode::Car)
                }
                VehKind::Bus(_) => (None, Mode::Pt),
                VehKind::Drt(_) => (None, Mode::Drt),
            };
            self.emit(EventKind::LinkLeave, person, Some(v), l, Some(mode));
            self.emit(EventKind::LinkEnter, person, Some(v), next, Some(mode));
        }
        let ls = &self.links[l];
        if ls.queue.is_empty() && ls.ready.is_empty() {
            self.active.remove(&l);
        }
    }

    fn pop(&mut self, l: usize, from_queue: bool) {
        let ls = &mut self.links[l];
        if from_queue {
            ls.queue.pop_front();
        } else {
            ls.ready.pop_front();
        }
    }
}

#[cfg(test)]
mod tests;
