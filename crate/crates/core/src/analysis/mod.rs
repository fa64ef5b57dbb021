//! Aggregate statistics per iteration and the CSV tables written at the end
//! of a run.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::path::Path;

use crate::drt::NetworkTravelTimes;
use crate::drt::TravelTime;
use crate::mobsim::{Event, EventKind};
use crate::network::{Graph, Network};
use crate::population::{Mode, Population};
use crate::time::Time;

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("person '{0}' selects a plan mixing several modes")]
    MixedModes(String),
    #[error("{kind} at {time} for person '{person}' without a matching earlier event")]
    Integrity { kind: EventKind, time: Time, person: String },
    #[error("event {kind} at {time} has no person")]
    MissingPerson { kind: EventKind, time: Time },
    #[error("bad table '{file}': {message}")]
    Table { file: String, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Fraction of persons per main mode of their selected plan. Persons whose
/// plan has no legs are left out.
pub fn mode_shares(pop: &Population) -> Result<BTreeMap<Mode, f64>, AnalysisError> {
    let mut counts: BTreeMap<Mode, usize> = BTreeMap::new();
    for person in pop.persons.values() {
        match person.selected_plan().main_mode() {
            Ok(Some(m)) => *counts.entry(m).or_default() += 1,
            Ok(None) => {}
            Err(()) => return Err(AnalysisError::MixedModes(person.id.clone())),
        }
    }
    let total: usize = counts.values().sum();
    Ok(counts
        .into_iter()
        .map(|(m, c)| (m, c as f64 / total as f64))
        .collect())
}

/// Distinct private cars that entered at least one link.
pub fn vehicles_on_network(events: &[Event]) -> usize {
    events
        .iter()
        .filter(|e| e.kind == EventKind::LinkEnter && e.mode == Some(Mode::Car))
        .filter_map(|e| e.vehicle.as_deref())
        .collect::<BTreeSet<_>>()
        .len()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DrtServiceStats {
    pub requests: usize,
    pub served: usize,
    /// Rejected at submission, plus requests still waiting when the day ended.
    pub rejected: usize,
    /// Mean seconds from request to pickup over served passengers.
    pub mean_wait: f64,
    /// Mean ratio of in-vehicle time to the direct free-flow time.
    pub mean_detour: f64,
}

/// Audits the demand-responsive part of an event stream. With a network,
/// the detour ratio is measured against the free-flow route between the
/// request and drop-off links; without one it stays zero.
pub fn drt_service_stats(events: &[Event], net: Option<&Network>) -> Result<DrtServiceStats, AnalysisError> {
    let graph = net.map(Graph::new);
    let mut tt = graph.as_ref().map(NetworkTravelTimes::new);

    let mut waiting: HashMap<&str, VecDeque<(Time, Option<&str>)>> = HashMap::new();
    let mut riding: HashMap<&str, VecDeque<(Time, Option<&str>)>> = HashMap::new();
    let mut stats = DrtServiceStats::default();
    let (mut wait_sum, mut detour_sum, mut detour_n) = (0.0, 0.0, 0usize);

    for e in events {
        let person = || {
            e.person.as_deref().ok_or(AnalysisError::MissingPerson { kind: e.kind, time: e.time })
        };
        let integrity = |p: &str| AnalysisError::Integrity {
            kind: e.kind,
            time: e.time,
            person: p.to_string(),
        };
        match e.kind {
            EventKind::DrtRequest => {
                stats.requests += 1;
                waiting.entry(person()?).or_default().push_back((e.time, e.link.as_deref()));
            }
            EventKind::DrtRejected => {
                let p = person()?;
                waiting.get_mut(p).and_then(VecDeque::pop_back).ok_or_else(|| integrity(p))?;
                stats.rejected += 1;
            }
            EventKind::DrtPickup => {
                let p = person()?;
                let (requested, origin) = waiting.get_mut(p).and_then(VecDeque::pop_front).ok_or_else(|| integrity(p))?;
                stats.served += 1;
                wait_sum += (e.time - requested) as f64;
                riding.entry(p).or_default().push_back((e.time, origin));
            }
            EventKind::DrtDropoff => {
                let p = person()?;
                let (picked, origin) = riding.get_mut(p).and_then(VecDeque::pop_front).ok_or_else(|| integrity(p))?;
                let direct = match (&graph, &mut tt, origin, e.link.as_deref()) {
                    (Some(g), Some(tt), Some(o), Some(d)) => match (g.link_idx(o), g.link_idx(d)) {
                        (Some(o), Some(d)) => tt.time(o, d),
                        _ => None,
                    },
                    _ => None,
                };
                if let Some(direct) = direct.filter(|&d| d > 0) {
                    detour_sum += (e.time - picked) as f64 / direct as f64;
                    detour_n += 1;
                }
            }
            _ => {}
        }
    }
    stats.rejected += waiting.values().map(VecDeque::len).sum::<usize>();
    if stats.served > 0 {
        stats.mean_wait = wait_sum / stats.served as f64;
    }
    if detour_n > 0 {
        stats.mean_detour = detour_sum / detour_n as f64;
    }
    Ok(stats)
}

/// Mean scores over persons that hold at least one scored plan.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScoreStats {
    pub executed: f64,
    pub best: f64,
    pub worst: f64,
}

pub fn score_stats(pop: &Population) -> ScoreStats {
    let mut sums = ScoreStats::default();
    let mut n = 0usize;
    for person in pop.persons.values() {
        let scores: Vec<f64> = person.plans.iter().filter_map(|p| p.score).collect();
        let Some(executed) = person.selected_plan().score else {
            continue;
        };
        n += 1;
        sums.executed += executed;
        sums.best += scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        sums.worst += scores.iter().copied().fold(f64::INFINITY, f64::min);
    }
    if n == 0 {
        return sums;
    }
    let n = n as f64;
    ScoreStats {
        executed: sums.executed / n,
        best: sums.best / n,
        worst: sums.worst / n,
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IterationReport {
    pub iteration: u32,
    pub mode_shares: BTreeMap<Mode, f64>,
    pub scores: ScoreStats,
    pub drt: DrtServiceStats,
    pub cars_on_network: usize,
}

impl IterationReport {
    pub fn share(&self, mode: Mode) -> f64 {
        self.mode_shares.get(&mode).copied().unwrap_or(0.0)
    }
}

pub const MODESTATS: &str = "modestats.csv";
pub const SCORESTATS: &str = "scorestats.csv";
pub const DRTSTATS: &str = "drtstats.csv";

/// Modes appearing in any report, in canonical order.
pub fn table_modes(reports: &[IterationReport]) -> Vec<Mode> {
    let set: BTreeSet<Mode> = reports.iter().flat_map(|r| r.mode_shares.keys().copied()).collect();
    set.into_iter().collect()
}

/// Writes the mode, score and DRT tables into `outdir`. Mode shares are
/// percentages with one decimal.
pub fn write_tables(reports: &[IterationReport], outdir: &Path) -> Result<(), AnalysisError> {
    let modes = table_modes(reports);

    let mut w = csv::Writer::from_path(outdir.join(MODESTATS))?;
    let mut header = vec!["iteration".to_string()];
    header.extend(modes.iter().map(|m| m.as_str().to_string()));
    w.write_record(&header)?;
    for r in reports {
        let mut row = vec![r.iteration.to_string()];
        row.extend(modes.iter().map(|&m| format!("{:.1}", 100.0 * r.share(m))));
        w.write_record(&row)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(outdir.join(SCORESTATS))?;
    w.write_record(["iteration", "avg_executed", "avg_best", "avg_worst"])?;
    for r in reports {
        w.write_record([
            r.iteration.to_string(),
            format!("{:.6}", r.scores.executed),
            format!("{:.6}", r.scores.best),
            format!("{:.6}", r.scores.worst),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(outdir.join(DRTSTATS))?;
    w.write_record(["iteration", "requests", "served", "rejected", "mean_wait", "mean_detour", "cars_on_network"])?;
    for r in reports {
        w.write_record([
            r.iteration.to_string(),
            r.drt.requests.to_string(),
            r.drt.served.to_string(),
            r.drt.rejected.to_string(),
            format!("{:.2}", r.drt.mean_wait),
            format!("{:.4}", r.drt.mean_detour),
            r.cars_on_network.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row of a mode statistics table: iteration and percent per mode.
pub type ModeStatsRow = (u32, BTreeMap<Mode, f64>);

pub fn read_modestats(path: &Path) -> Result<Vec<ModeStatsRow>, AnalysisError> {
    let file = path.display().to_string();
    let bad = |message: String| AnalysisError::Table { file: file.clone(), message };
    let mut r = csv::Reader::from_path(path)?;
    let modes: Vec<Mode> = r
        .headers()?
        .iter()
        .skip(1)
        .map(|h| h.parse().map_err(|_| bad(format!("unknown mode column '{h}'"))))
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let iteration = rec[0].parse().map_err(|_| bad(format!("bad iteration '{}'", &rec[0])))?;
        let mut shares = BTreeMap::new();
        for (m, v) in modes.iter().zip(rec.iter().skip(1)) {
            shares.insert(*m, v.parse().map_err(|_| bad(format!("bad share '{v}'")))?);
        }
        rows.push((iteration, shares));
    }
    Ok(rows)
}
