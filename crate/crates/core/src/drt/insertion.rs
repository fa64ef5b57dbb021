use super::{DrtConstraints, DrtRequest, DrtVehicle};
use crate::time::Time;

/// Link-to-link travel time in whole seconds, `None` when unreachable.
pub trait TravelTime {
    fn time(&mut self, from: usize, to: usize) -> Option<Time>;
}

/// A passenger served at a stop, with the latest time that stop may end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stopper {
    pub request: usize,
    pub deadline: Time,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlannedStop {
    pub link: usize,
    pub pickups: Vec<Stopper>,
    pub dropoffs: Vec<Stopper>,
}

impl PlannedStop {
    fn tightest(&self) -> Option<Time> {
        self.pickups.iter().chain(&self.dropoffs).map(|s| s.deadline).min()
    }
}

/// Remaining plan of one vehicle. The vehicle is free to head to its first
/// stop from the end of `start_link` at `start_time`, carrying `onboard`
/// passengers whose dropoffs are among `stops`.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleSchedule {
    pub vehicle: DrtVehicle,
    pub start_link: usize,
    pub start_time: Time,
    pub onboard: u32,
    pub stops: Vec<PlannedStop>,
}

/// Pickup goes in front of old stop `pickup_idx`, dropoff in front of old
/// stop `dropoff_idx` (after the pickup). Both range over `0..=stops.len()`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Insertion {
    pub pickup_idx: usize,
    pub dropoff_idx: usize,
    /// added driving seconds
    pub cost: i64,
    /// end of the pickup stop
    pub pickup_time: Time,
    /// end of the dropoff stop
    pub dropoff_time: Time,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Assignment {
    /// position in the schedule slice given to [`dispatch`]
    pub vehicle: usize,
    pub insertion: Insertion,
}

struct Timeline {
    arrive: Vec<i64>,
    end: Vec<i64>,
    load_before: Vec<i64>,
    /// min over stops `k..` of the slack to deadlines and the service end
    suffix_slack: Vec<i64>,
}

impl VehicleSchedule {
    pub fn idle(vehicle: DrtVehicle, link: usize, time: Time) -> Self {
        VehicleSchedule {
            vehicle,
            start_link: link,
            start_time: time,
            onboard: 0,
            stops: Vec::new(),
        }
    }

    /// Arrival and end time of every planned stop.
    pub fn stop_times(&self, c: &DrtConstraints, tt: &mut dyn TravelTime) -> Option<Vec<(Time, Time)>> {
        let t = self.timeline(c, tt)?;
        Some(t.arrive.iter().zip(&t.end).map(|(&a, &e)| (a as Time, e as Time)).collect())
    }

    fn timeline(&self, c: &DrtConstraints, tt: &mut dyn TravelTime) -> Option<Timeline> {
        let sd = c.stop_secs() as i64;
        let n = self.stops.len();
        let (mut arrive, mut end, mut load_before) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n + 1));
        let (mut link, mut time, mut load) = (self.start_link, self.start_time as i64, self.onboard as i64);
        for s in &self.stops {
            let a = time + tt.time(link, s.link)? as i64;
            load_before.push(load);
            arrive.push(a);
            end.push(a + sd);
            load += s.pickups.len() as i64 - s.dropoffs.len() as i64;
            link = s.link;
            time = a + sd;
        }
        load_before.push(load);
        let mut suffix_slack = vec![i64::MAX; n + 1];
        for k in (0..n).rev() {
            let mut slack = self.vehicle.t1 as i64 - end[k];
            if let Some(d) = self.stops[k].tightest() {
                slack = slack.min(d as i64 - end[k]);
            }
            suffix_slack[k] = slack.min(suffix_slack[k + 1]);
        }
        Some(Timeline {
            arrive,
            end,
            load_before,
            suffix_slack,
        })
    }

    /// Applies an insertion returned by [`feasible_insertions`] for `request`.
    pub fn insert(&mut self, request: &DrtRequest, ins: &Insertion, c: &DrtConstraints) {
        let pickup = PlannedStop {
            link: request.origin,
            pickups: vec![Stopper {
                request: request.id,
                deadline: request.pickup_deadline(c),
            }],
            dropoffs: Vec::new(),
        };
        let dropoff = PlannedStop {
            link: request.destination,
            pickups: Vec::new(),
            dropoffs: vec![Stopper {
                request: request.id,
                deadline: request.dropoff_deadline(c),
            }],
        };
        self.stops.insert(ins.dropoff_idx, dropoff);
        self.stops.insert(ins.pickup_idx, pickup);
    }
}

/// Every feasible way to add `request` to `schedule` at time `now`, in
/// (pickup index, dropoff index) order. Feasible means: the vehicle is in
/// service now, no stop ends after its service end, load never exceeds
/// capacity, the new pickup and dropoff meet their deadlines and every
/// existing pickup and dropoff still meets its own.
pub fn feasible_insertions(
    request: &DrtRequest,
    schedule: &VehicleSchedule,
    c: &DrtConstraints,
    tt: &mut dyn TravelTime,
    now: Time,
) -> Vec<Insertion> {
    let mut out = Vec::new();
    let v = &schedule.vehicle;
    if !(v.t0 <= now && now < v.t1) {
        return out;
    }
    let Some(tl) = schedule.timeline(c, tt) else {
        return out;
    };
    let sd = c.stop_secs() as i64;
    let cap = v.capacity as i64;
    let t1 = v.t1 as i64;
    let pd = request.pickup_deadline(c) as i64;
    let dd = request.dropoff_deadline(c) as i64;
    let (o, d) = (request.origin, request.destination);
    let stops = &schedule.stops;
    let n = stops.len();
    let Some(t_od) = tt.time(o, d) else {
        return out;
    };
    let t_od = t_od as i64;

    for i in 0..=n {
        if tl.load_before[i] + 1 > cap {
            continue;
        }
        let (prev_link, prev_end) = if i == 0 {
            (schedule.start_link, schedule.start_time as i64)
        } else {
            (stops[i - 1].link, tl.end[i - 1])
        };
        let Some(t_po) = tt.time(prev_link, o) else { continue };
        let t_po = t_po as i64;
        let pickup_end = prev_end + t_po + sd;
        if pickup_end > pd || pickup_end > t1 {
            continue;
        }
        let mut push = |j: usize, cost: i64, drop_end: i64| {
            out.push(Insertion {
                pickup_idx: i,
                dropoff_idx: j,
                cost,
                pickup_time: pickup_end as Time,
                dropoff_time: drop_end as Time,
            })
        };

        let drop_end = pickup_end + t_od + sd;
        if drop_end <= dd && drop_end <= t1 {
            if i < n {
                if let Some(t_dn) = tt.time(d, stops[i].link) {
                    let delay = drop_end + t_dn as i64 - tl.arrive[i];
                    if delay <= tl.suffix_slack[i] {
                        let old_leg = tl.arrive[i] - prev_end;
                        push(i, t_po + t_od + t_dn as i64 - old_leg, drop_end);
                    }
                }
            } else {
                push(i, t_po + t_od, drop_end);
            }
        }

        if i == n {
            continue;
        }
        let Some(t_on) = tt.time(o, stops[i].link) else { continue };
        let delay1 = pickup_end + t_on as i64 - tl.arrive[i];
        let pickup_cost = t_po + t_on as i64 - (tl.arrive[i] - prev_end);
        for j in i + 1..=n {
            let k = j - 1;
            let slack_k = {
                let mut s = t1 - tl.end[k];
                if let Some(dl) = stops[k].tightest() {
                    s = s.min(dl as i64 - tl.end[k]);
                }
                s
            };
            if tl.load_before[k + 1] + 1 > cap || delay1 > slack_k {
                break;
            }
            let Some(t_kd) = tt.time(stops[k].link, d) else { continue };
            let drop_end = tl.end[k] + delay1 + t_kd as i64 + sd;
            if drop_end > dd || drop_end > t1 {
                continue;
            }
            if j < n {
                let Some(t_dn) = tt.time(d, stops[j].link) else { continue };
                let delay2 = drop_end + t_dn as i64 - tl.arrive[j];
                if delay2 > tl.suffix_slack[j] {
                    continue;
                }
                let old_leg = tl.arrive[j] - tl.end[k];
                push(j, pickup_cost + t_kd as i64 + t_dn as i64 - old_leg, drop_end);
            } else {
                push(j, pickup_cost + t_kd as i64, drop_end);
            }
        }
    }
    out
}

/// Cheapest feasible insertion over all vehicles. Ties go to the smaller
/// vehicle id, then to the earlier (pickup, dropoff) position.
pub fn dispatch(
    request: &DrtRequest,
    schedules: &[VehicleSchedule],
    c: &DrtConstraints,
    tt: &mut dyn TravelTime,
    now: Time,
) -> Option<Assignment> {
    let mut order: Vec<usize> = (0..schedules.len()).collect();
    order.sort_by(|&a, &b| schedules[a].vehicle.id.cmp(&schedules[b].vehicle.id));
    let mut best: Option<Assignment> = None;
    for v in order {
        for ins in feasible_insertions(request, &schedules[v], c, tt, now) {
            if best.map_or(true, |b| ins.cost < b.insertion.cost) {
                best = Some(Assignment { vehicle: v, insertion: ins });
            }
        }
    }
    best
}
