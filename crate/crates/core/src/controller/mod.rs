//! The iteration loop: execute the selected plans, score them, and vary
//! them for the next round.

mod scenario;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use scenario::{CommuterScenario, WORK};

use crate::analysis::{self, AnalysisError, IterationReport};
use crate::config::RunConfig;
use crate::drt::{read_fleet, DrtVehicle};
use crate::mobsim::{self, write_events, Event, MobsimConfig, MobsimError, MobsimInput};
use crate::network::{read_network, Network};
use crate::population::{assign_activity_links, read_population, write_population, Population};
use crate::replanning::{evolve, LegRouter, ReplanningError};
use crate::scoring::{score_plan, ScoringError};
use crate::transit::{read_schedule, read_vehicles, TransitSchedule, TransitVehicles};

#[derive(Debug, thiserror::Error)]
pub enum ControllerError {
    #[error("iteration {iteration}: {source}")]
    Mobsim { iteration: u32, source: MobsimError },
    #[error("iteration {iteration}: {source}")]
    Scoring { iteration: u32, source: ScoringError },
    #[error("iteration {iteration}: {source}")]
    Replanning { iteration: u32, source: ReplanningError },
    #[error("iteration {iteration}: {source}")]
    Analysis { iteration: u32, source: AnalysisError },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("{0}")]
    Input(String),
}

/// Everything a run operates on besides its settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub network: Network,
    pub population: Population,
    pub schedule: Option<TransitSchedule>,
    pub vehicles: TransitVehicles,
    pub fleet: Vec<DrtVehicle>,
}

fn open(path: &Path) -> Result<BufReader<File>, ControllerError> {
    File::open(path).map(BufReader::new).map_err(|source| ControllerError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_err(path: &Path, e: impl std::fmt::Display) -> ControllerError {
    ControllerError::Read {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

impl Scenario {
    /// Reads the input files named in the config. Activities without a link
    /// are attached to the nearest car link.
    pub fn load(cfg: &RunConfig) -> Result<Self, ControllerError> {
        let need = |p: &Option<PathBuf>, what: &str| {
            p.clone().ok_or_else(|| ControllerError::Input(format!("the config names no {what} file")))
        };
        let net_path = need(&cfg.network_file, "network")?;
        let network = read_network(open(&net_path)?).map_err(|e| read_err(&net_path, e))?;
        let plans_path = need(&cfg.plans_file, "plans")?;
        let mut population = read_population(open(&plans_path)?).map_err(|e| read_err(&plans_path, e))?;
        let unlinked = population
            .persons
            .values()
            .flat_map(|p| &p.plans)
            .flat_map(|p| p.activities())
            .any(|a| a.link.is_none());
        if unlinked {
            population = assign_activity_links(&population, &network).map_err(|e| read_err(&plans_path, e))?;
        }
        let schedule = match &cfg.schedule_file {
            Some(p) => Some(read_schedule(open(p)?).map_err(|e| read_err(p, e))?),
            None => None,
        };
        let vehicles = match &cfg.vehicles_file {
            Some(p) => read_vehicles(open(p)?).map_err(|e| read_err(p, e))?,
            None => TransitVehicles::default(),
        };
        let fleet = match cfg.drt.as_ref().and_then(|d| d.vehicles_file.as_ref()) {
            Some(p) => read_fleet(open(p)?).map_err(|e| read_err(p, e))?,
            None => Vec::new(),
        };
        Ok(Scenario {
            network,
            population,
            schedule,
            vehicles,
            fleet,
        })
    }
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so a failed write never leaves a partial file behind.
pub fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), ControllerError> {
    let io = |source| ControllerError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w).map_err(io)?;
        w.flush().map_err(io)?;
    }
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn mobsim_seed(seed: u64, iteration: u32) -> u64 {
    seed ^ (iteration as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Runs iterations `0..=cfg.iterations`. Iteration 0 executes the initial
/// plans; later iterations replan first. With `outdir`, each iteration
/// writes `it.N/events.txt` and `it.N/population.xml` and the summary
/// tables are refreshed. `progress` sees every report as it is made.
pub fn run(
    scenario: &mut Scenario,
    cfg: &RunConfig,
    outdir: Option<&Path>,
    mut progress: impl FnMut(&IterationReport),
) -> Result<Vec<IterationReport>, ControllerError> {
    let router = LegRouter::new(&scenario.network, scenario.schedule.as_ref(), cfg.pt_router.clone());
    let transit = scenario.schedule.as_ref().map(|s| (s, &scenario.vehicles));
    let mut reports = Vec::new();

    for iteration in 0..=cfg.iterations {
        let pop = &mut scenario.population;
        if iteration > 0 {
            evolve(pop, &cfg.strategy, &router, cfg.seed, iteration)
                .map_err(|source| ControllerError::Replanning { iteration, source })?;
        }
        pop.persons
            .par_iter_mut()
            .for_each(|(_, p)| router.route_plan(p.selected_plan_mut(), true));

        let analysis_err = |source| ControllerError::Analysis { iteration, source };
        let mut mode_shares = analysis::mode_shares(pop).map_err(analysis_err)?;
        for &m in &cfg.strategy.modes {
            mode_shares.entry(m).or_insert(0.0);
        }

        let mobsim_cfg = MobsimConfig {
            seed: mobsim_seed(cfg.mobsim.seed, iteration),
            ..cfg.mobsim.clone()
        };
        let input = MobsimInput {
            network: &scenario.network,
            population: pop,
            transit,
            fleet: &scenario.fleet,
        };
        let output = mobsim::run(&input, &mobsim_cfg).map_err(|source| ControllerError::Mobsim { iteration, source })?;

        score_all(pop, &output.events, cfg).map_err(|source| ControllerError::Scoring { iteration, source })?;

        let report = IterationReport {
            iteration,
            mode_shares,
            scores: analysis::score_stats(pop),
            drt: analysis::drt_service_stats(&output.events, Some(&scenario.network)).map_err(analysis_err)?,
            cars_on_network: analysis::vehicles_on_network(&output.events),
        };
        progress(&report);
        reports.push(report);

        if let Some(dir) = outdir {
            write_iteration(dir, iteration, &output.events, pop)?;
            analysis::write_tables(&reports, dir).map_err(analysis_err)?;
        }
    }
    Ok(reports)
}

fn score_all(pop: &mut Population, events: &[Event], cfg: &RunConfig) -> Result<(), ScoringError> {
    let mut by_person: HashMap<&str, Vec<&Event>> = HashMap::new();
    for e in events {
        if let Some(p) = &e.person {
            by_person.entry(p.as_str()).or_default().push(e);
        }
    }
    pop.persons.par_iter_mut().try_for_each(|(id, person)| {
        let evs = by_person.get(id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
        let score = score_plan(id, person.selected_plan(), evs, &cfg.scoring)?;
        person.selected_plan_mut().score = Some(score.total);
        Ok(())
    })
}

fn write_iteration(dir: &Path, iteration: u32, events: &[Event], pop: &Population) -> Result<(), ControllerError> {
    let it_dir = dir.join(format!("it.{iteration}"));
    std::fs::create_dir_all(&it_dir).map_err(|source| ControllerError::Io {
        path: it_dir.clone(),
        source,
    })?;
    write_atomic(&it_dir.join("events.txt"), |w| write_events(events, w))?;
    write_atomic(&it_dir.join("population.xml"), |w| write_population(pop, w))?;
    Ok(())
}
