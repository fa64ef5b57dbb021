//! Plan scoring: logarithmic activity utility, linear leg disutility and
//! penalties, evaluated on the events a person produced in the mobsim.

use std::collections::BTreeMap;

use crate::mobsim::{Event, EventKind};
use crate::population::{Mode, Plan, Route};
use crate::time::{Time, DAY};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ScoringError {
    #[error("no typical duration for activity type '{0}'")]
    UnknownActivity(String),
    #[error("no scoring parameters for mode '{0}'")]
    UnknownMode(Mode),
    #[error("person '{person}': {message}")]
    Malformed { person: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeParams {
    /// utils per hour, not positive
    pub travel_rate: f64,
    /// utils per meter, not positive
    pub dist_rate: f64,
    /// money per meter, not positive
    pub monetary_distance_rate: f64,
    pub constant: f64,
}

impl ModeParams {
    pub const fn with_travel_rate(travel_rate: f64) -> Self {
        ModeParams {
            travel_rate,
            dist_rate: 0.0,
            monetary_distance_rate: 0.0,
            constant: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoringParams {
    /// utils per hour
    pub perform_rate: f64,
    /// utils per hour late, not positive
    pub late_penalty: f64,
    pub marginal_utility_of_money: f64,
    pub modes: BTreeMap<Mode, ModeParams>,
    /// hours
    pub typical_duration: BTreeMap<String, f64>,
    /// seconds after midnight; arriving later costs `late_penalty`
    pub latest_arrival: BTreeMap<String, Time>,
    pub stuck_penalty: f64,
}

impl Default for ScoringParams {
    fn default() -> Self {
        ScoringParams {
            perform_rate: 6.0,
            late_penalty: 0.0,
            marginal_utility_of_money: 1.0,
            modes: Mode::ALL.into_iter().map(|m| (m, ModeParams::with_travel_rate(-6.0))).collect(),
            typical_duration: [("h".to_string(), 12.0), ("w".to_string(), 8.0)].into(),
            latest_arrival: BTreeMap::new(),
            stuck_penalty: -100.0,
        }
    }
}

impl ScoringParams {
    pub fn mode(&self, mode: Mode) -> Result<&ModeParams, ScoringError> {
        self.modes.get(&mode).ok_or(ScoringError::UnknownMode(mode))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScoreBreakdown {
    pub activity: f64,
    pub travel: f64,
    pub money: f64,
    pub penalty: f64,
    pub total: f64,
}

impl ScoreBreakdown {
    fn finish(mut self) -> Self {
        self.total = self.activity + self.travel + self.money + self.penalty;
        self
    }
}

/// Shortest duration the logarithm is evaluated at, seconds.
const MIN_DURATION: f64 = 1.0;

/// Utility of performing an activity of `kind` for `duration` seconds.
/// Zero at or below `typ · e^(-10/12)`.
pub fn activity_utility(duration: f64, kind: &str, p: &ScoringParams) -> Result<f64, ScoringError> {
    let typ = *p
        .typical_duration
        .get(kind)
        .ok_or_else(|| ScoringError::UnknownActivity(kind.to_string()))?;
    let zero = typ * (-10.0f64 / 12.0).exp();
    let hours = duration.max(MIN_DURATION) / 3600.0;
    Ok((p.perform_rate * typ * (hours / zero).ln()).max(0.0))
}

/// Travel and money utilities of one leg.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegUtility {
    pub travel: f64,
    pub money: f64,
}

impl LegUtility {
    pub fn total(&self) -> f64 {
        self.travel + self.money
    }
}

pub fn leg_disutility(mode: Mode, travel_time: f64, distance: f64, p: &ScoringParams) -> Result<LegUtility, ScoringError> {
    let m = p.mode(mode)?;
    Ok(LegUtility {
        travel: m.constant + m.travel_rate * travel_time / 3600.0 + m.dist_rate * distance,
        money: p.marginal_utility_of_money * m.monetary_distance_rate * distance,
    })
}

#[derive(Default)]
struct Trace {
    act_ends: Vec<Time>,
    act_starts: Vec<Time>,
    departures: Vec<Time>,
    arrivals: Vec<Time>,
    rejected: Vec<bool>,
    stuck: Option<Time>,
}

fn trace(person: &str, events: &[&Event]) -> Result<Trace, ScoringError> {
    let bad = |message: &str| ScoringError::Malformed {
        person: person.to_string(),
        message: message.to_string(),
    };
    let mut t = Trace::default();
    for e in events {
        match e.kind {
            EventKind::ActEnd => t.act_ends.push(e.time),
            EventKind::ActStart => t.act_starts.push(e.time),
            EventKind::Departure => {
                if t.departures.len() != t.arrivals.len() {
                    return Err(bad("departure while travelling"));
                }
                t.departures.push(e.time);
                t.rejected.push(false);
            }
            EventKind::Arrival => {
                if t.departures.len() != t.arrivals.len() + 1 {
                    return Err(bad("arrival without departure"));
                }
                t.arrivals.push(e.time);
            }
            EventKind::DrtRejected => match t.rejected.last_mut() {
                Some(r) if t.departures.len() > t.arrivals.len() => *r = true,
                _ => return Err(bad("rejection outside a leg")),
            },
            EventKind::Stuck => t.stuck = Some(e.time),
            _ => {}
        }
    }
    Ok(t)
}

/// Scores a plan from the events of the person who executed it.
///
/// The first and last activity are one overnight activity when they share a
/// type. Legs use their planned distances; pt walking is charged at the walk
/// rate. A stuck person or a rejected DRT request adds the stuck penalty.
pub fn score_plan(person: &str, plan: &Plan, events: &[&Event], p: &ScoringParams) -> Result<ScoreBreakdown, ScoringError> {
    let t = trace(person, events)?;
    let acts: Vec<_> = plan.activities().collect();
    let legs: Vec<_> = plan.legs().collect();
    let mut s = ScoreBreakdown::default();
    if t.departures.len() > legs.len() || t.act_ends.len() > acts.len() {
        return Err(ScoringError::Malformed {
            person: person.to_string(),
            message: "more events than plan elements".into(),
        });
    }

    let n = acts.len();
    let completed = t.stuck.is_none() && t.act_starts.len() + 1 == n;
    let start_of = |i: usize| if i == 0 { Some(0) } else { t.act_starts.get(i - 1).copied() };
    let wrap = completed && n > 1 && acts[0].kind == acts[n - 1].kind;
    for i in 0..n {
        if wrap && i == n - 1 {
            break;
        }
        let Some(start) = start_of(i) else { break };
        let end = match t.act_ends.get(i) {
            Some(&e) => e,
            None if i == n - 1 && completed => DAY.max(start),
            None if n == 1 => DAY,
            None => break,
        };
        let mut duration = end as f64 - start as f64;
        if wrap && i == 0 {
            let last_start = start_of(n - 1).expect("completed plan");
            duration += DAY as f64 - last_start as f64;
        }
        s.activity += activity_utility(duration, &acts[i].kind, p)?;
        if let (Some(&latest), true) = (p.latest_arrival.get(&acts[i].kind), i > 0) {
            if start > latest {
                s.penalty += p.late_penalty * (start - latest) as f64 / 3600.0;
            }
        }
    }

    for (j, &dep) in t.departures.iter().enumerate() {
        let end = match (t.arrivals.get(j), t.stuck) {
            (Some(&a), _) => a,
            (None, Some(stuck)) => stuck,
            (None, None) => continue,
        };
        let secs = (end - dep) as f64;
        let leg = legs[j];
        let u = match (&leg.route, leg.mode, t.rejected[j]) {
            (Some(Route::Pt(it)), Mode::Pt, _) => {
                let walk = (it.walk_secs() as f64).min(secs);
                let ride = leg_disutility(Mode::Pt, secs - walk, it.ride_distance(), p)?;
                let on_foot = leg_disutility(Mode::Walk, walk, it.access_distance + it.egress_distance, p)?;
                LegUtility {
                    travel: ride.travel + on_foot.travel - p.mode(Mode::Walk)?.constant,
                    money: ride.money + on_foot.money,
                }
            }
            (route, mode, rejected) => {
                let distance = match route {
                    Some(Route::Car(r)) => r.distance,
                    Some(Route::Drt(r)) => r.distance,
                    Some(Route::Walk(r)) => r.distance,
                    _ => 0.0,
                };
                if rejected {
                    s.penalty += p.stuck_penalty;
                    leg_disutility(Mode::Walk, secs, distance, p)?
                } else {
                    leg_disutility(mode, secs, distance, p)?
                }
            }
        };
        s.travel += u.travel;
        s.money += u.money;
    }
    if t.stuck.is_some() {
        s.penalty += p.stuck_penalty;
    }
    Ok(s.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Path;
    use crate::population::{commute_plan, CarRoute};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ev(time: Time, kind: EventKind) -> Event {
        Event { time, kind, person: Some("p".into()), vehicle: None, link: None, mode: None }
    }

    fn car_plan(distance: f64) -> Plan {
        let mut plan = commute_plan((0.0, 0.0), (1.0, 0.0), 8 * 3600, 16 * 3600 + 1800, Mode::Car);
        for leg in plan.legs_mut() {
            leg.route = Some(Route::Car(CarRoute { path: Path::empty(), distance }));
        }
        plan
    }

    /// home until 08:00, 30 min drive, work 08:30-16:30, 30 min drive home
    fn commute_events(leg_secs: Time) -> Vec<Event> {
        let (leave, work_end) = (8 * 3600, 16 * 3600 + 1800);
        vec![
            ev(leave, EventKind::ActEnd),
            ev(leave, EventKind::Departure),
            ev(leave + leg_secs, EventKind::Arrival),
            ev(leave + leg_secs, EventKind::ActStart),
            ev(work_end, EventKind::ActEnd),
            ev(work_end, EventKind::Departure),
            ev(work_end + leg_secs, EventKind::Arrival),
            ev(work_end + leg_secs, EventKind::ActStart),
        ]
    }

    fn score(plan: &Plan, events: &[Event], p: &ScoringParams) -> ScoreBreakdown {
        let refs: Vec<&Event> = events.iter().collect();
        score_plan("p", plan, &refs, p).unwrap()
    }

    #[test]
    fn zero_crossing_and_typical_duration() {
        let p = ScoringParams::default();
        let zero = 8.0 * 3600.0 * (-10.0f64 / 12.0).exp();
        assert!(activity_utility(zero, "w", &p).unwrap().abs() < 1e-9);
        assert_relative_eq!(activity_utility(8.0 * 3600.0, "w", &p).unwrap(), 40.0, epsilon = 1e-9);
        assert_eq!(activity_utility(60.0, "w", &p).unwrap(), 0.0);
        assert_eq!(activity_utility(3600.0, "x", &p), Err(ScoringError::UnknownActivity("x".into())));
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let p = ScoringParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let d: f64 = rng.gen_range(6.0 * 3600.0..20.0 * 3600.0);
            // d/dd of rate·typ·ln(d/zero) is rate·typ/d with d in hours
            let analytic = 6.0 * 12.0 / (d / 3600.0) / 3600.0;
            let h = 1.0;
            let fd = (activity_utility(d + h, "h", &p).unwrap() - activity_utility(d - h, "h", &p).unwrap()) / (2.0 * h);
            assert!(((fd - analytic) / analytic).abs() < 1e-4, "{fd} vs {analytic}");
        }
    }

    #[test]
    fn leg_arithmetic() {
        let mut p = ScoringParams::default();
        p.modes.insert(Mode::Car, ModeParams::with_travel_rate(0.0));
        assert_eq!(leg_disutility(Mode::Car, 0.0, 0.0, &p).unwrap().total(), 0.0);
        let free = leg_disutility(Mode::Car, 600.0, 3000.0, &p).unwrap().total();
        p.modes.get_mut(&Mode::Car).unwrap().monetary_distance_rate = -0.2;
        let charged = leg_disutility(Mode::Car, 600.0, 3000.0, &p).unwrap().total();
        assert_relative_eq!(charged - free, -600.0, epsilon = 1e-9);

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let m = ModeParams {
                travel_rate: -rng.gen_range(0.0..20.0),
                dist_rate: -rng.gen_range(0.0..0.01),
                monetary_distance_rate: -rng.gen_range(0.0..0.5),
                constant: rng.gen_range(-2.0..2.0),
            };
            p.modes.insert(Mode::Pt, m);
            p.marginal_utility_of_money = rng.gen_range(0.0..2.0);
            let (t, d) = (rng.gen_range(0.0..7200.0), rng.gen_range(0.0..20_000.0));
            let expected = m.constant + m.travel_rate * t / 3600.0 + m.dist_rate * d + p.marginal_utility_of_money * m.monetary_distance_rate * d;
            assert_relative_eq!(leg_disutility(Mode::Pt, t, d, &p).unwrap().total(), expected, epsilon = 1e-9);
        }
    }

    #[test]
    fn stay_home_all_day() {
        let p = ScoringParams::default();
        let plan = Plan { elements: vec![commute_plan((0.0, 0.0), (0.0, 0.0), 0, 0, Mode::Car).elements[0].clone()], score: None };
        let s = score(&plan, &[], &p);
        assert_relative_eq!(s.total, 72.0 * (2.0f64.ln() + 10.0 / 12.0), epsilon = 1e-9);
        assert_eq!(s.travel, 0.0);
    }

    #[test]
    fn hand_computed_commute() {
        let p = ScoringParams::default();
        let s = score(&car_plan(3000.0), &commute_events(1800), &p);
        // home 15 h wrapped: 72·(ln(15/12) + 10/12); work 8 h: 40; legs 2 · (−6 · 0.5)
        let expected = 72.0 * ((15.0f64 / 12.0).ln() + 10.0 / 12.0) + 40.0 - 6.0;
        assert_relative_eq!(s.total, expected, epsilon = 1e-9);
        assert_relative_eq!(s.total, 110.066, epsilon = 1e-3);
        assert_relative_eq!(s.activity + s.travel + s.money + s.penalty, s.total, epsilon = 1e-9);
        assert_eq!(s, score(&car_plan(3000.0), &commute_events(1800), &p));
    }

    #[test]
    fn slower_legs_never_score_higher() {
        let p = ScoringParams::default();
        let mut last = f64::INFINITY;
        for secs in (60..7200).step_by(300) {
            let s = score(&car_plan(3000.0), &commute_events(secs), &p).total;
            assert!(s <= last);
            last = s;
        }
    }

    #[test]
    fn money_rate_only_hits_that_mode() {
        let mut p = ScoringParams::default();
        let car = score(&car_plan(3000.0), &commute_events(1800), &p).total;
        let mut walk_plan = car_plan(3000.0);
        for leg in walk_plan.legs_mut() {
            leg.mode = Mode::Walk;
            leg.route = None;
        }
        let walk = score(&walk_plan, &commute_events(1800), &p).total;
        p.modes.get_mut(&Mode::Car).unwrap().monetary_distance_rate = -0.002;
        assert!(score(&car_plan(3000.0), &commute_events(1800), &p).total < car);
        assert_eq!(score(&walk_plan, &commute_events(1800), &p).total, walk);
    }

    #[test]
    fn wrapping_beats_splitting_overnight_home() {
        let p = ScoringParams::default();
        let wrapped = score(&car_plan(0.0), &commute_events(1800), &p).activity;
        let split = activity_utility(8.0 * 3600.0, "h", &p).unwrap()
            + activity_utility(7.0 * 3600.0, "h", &p).unwrap()
            + activity_utility(8.0 * 3600.0, "w", &p).unwrap();
        assert!(wrapped >= split);
    }

    #[test]
    fn stuck_and_malformed() {
        let p = ScoringParams::default();
        let mut events = commute_events(1800);
        events.truncate(6);
        events.push(ev(129_600, EventKind::Stuck));
        let s = score(&car_plan(0.0), &events, &p);
        assert_eq!(s.penalty, -100.0);
        let mut bad = commute_events(1800);
        bad.swap(1, 2);
        let refs: Vec<&Event> = bad.iter().collect();
        assert!(matches!(score_plan("p", &car_plan(0.0), &refs, &p), Err(ScoringError::Malformed { .. })));
    }
}
