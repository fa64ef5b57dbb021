use std::collections::{BTreeMap, BTreeSet};
use std::error::Error;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Parser, Subcommand};

use minimatsim::analysis::IterationReport;
use minimatsim::config::{MapperConfig, RunConfig};
use minimatsim::controller::{self, write_atomic, CommuterScenario, Scenario};
use minimatsim::drt::write_fleet;
use minimatsim::network::{read_network, write_network};
use minimatsim::population::{write_population, Mode};
use minimatsim::transit::{
    check_plausibility, gtfs_to_schedule, map_schedule, read_gtfs, read_schedule, write_schedule, write_vehicles,
};

type Result<T> = std::result::Result<T, Box<dyn Error>>;

const THREADS_VAR: &str = "MINIMATSIM_THREADS";

#[derive(Parser)]
#[command(name = "minimatsim", version, about = "Agent-based multimodal transport microsimulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the iteration loop described by a config document.
    Run {
        config: PathBuf,
        /// Overrides the output directory named in the config.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Convert one service day of a GTFS feed into an unmapped schedule.
    Gtfs2schedule {
        gtfs_dir: PathBuf,
        /// Service date, YYYY-MM-DD.
        date: String,
        schedule_out: PathBuf,
        vehicles_out: PathBuf,
        /// Keep only these GTFS route ids (comma separated).
        #[arg(long, value_delimiter = ',')]
        routes: Vec<String>,
    },
    /// Map a schedule onto a network as set up in a mapper config.
    MapSchedule { config: PathBuf },
    /// Report loops and infeasible stop offsets of a mapped schedule.
    CheckPlausibility {
        schedule: PathBuf,
        network: PathBuf,
        outdir: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        speed_tolerance: f64,
    },
    /// Write the built-in commuter scenario with a config to run it.
    BuildDemand {
        outdir: PathBuf,
        #[arg(long, default_value_t = 169)]
        agents: usize,
        /// Initial mode split, e.g. car=0.65,pt=0.35.
        #[arg(long, default_value = "car=0.65,pt=0.35", value_parser = parse_split)]
        split: BTreeMap<Mode, f64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        iterations: u32,
        /// Add the demand-responsive fleet and offer it as a mode.
        #[arg(long)]
        with_drt: bool,
    },
    /// Write a mapper config with every parameter at its default.
    DefaultMapperConfig { path: PathBuf },
}

fn parse_split(raw: &str) -> std::result::Result<BTreeMap<Mode, f64>, String> {
    let mut out = BTreeMap::new();
    for part in raw.split(',').filter(|s| !s.trim().is_empty()) {
        let (mode, share) = part.split_once('=').ok_or_else(|| format!("expected mode=share, got '{part}'"))?;
        let mode: Mode = mode.trim().parse().map_err(|_| format!("unknown mode '{mode}'"))?;
        let share: f64 = share.trim().parse().map_err(|_| format!("bad share '{share}'"))?;
        out.insert(mode, share);
    }
    Ok(out)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| format!("{}: {e}", path.display()).into())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn share_line(r: &IterationReport) -> String {
    let shares: Vec<String> = r
        .mode_shares
        .iter()
        .map(|(m, s)| format!("{} {:.1}%", m.as_str(), 100.0 * s))
        .collect();
    format!("iteration {}: {}", r.iteration, shares.join(" "))
}

fn run(config: &Path, output: Option<PathBuf>) -> Result<()> {
    let mut cfg = RunConfig::parse(&read_text(config)?).map_err(|e| format!("{}: {e}", config.display()))?;
    cfg.resolve_paths(config.parent().unwrap_or(Path::new(".")));
    if output.is_some() {
        cfg.output_dir = output;
    }
    let mut scenario = Scenario::load(&cfg)?;
    if let Some(dir) = &cfg.output_dir {
        create_dir(dir)?;
    }
    controller::run(&mut scenario, &cfg, cfg.output_dir.as_deref(), |r| println!("{}", share_line(r)))?;
    Ok(())
}

fn gtfs2schedule(dir: &Path, date: &str, schedule_out: &Path, vehicles_out: &Path, routes: Vec<String>) -> Result<()> {
    let date = NaiveDate::parse_from_str(date, "%Y-%m-%d").map_err(|e| format!("bad date '{date}': {e}"))?;
    let feed = read_gtfs(dir)?;
    let filter: BTreeSet<String> = routes.into_iter().collect();
    let result = gtfs_to_schedule(&feed, date, (!filter.is_empty()).then_some(&filter));
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    write_atomic(schedule_out, |w| write_schedule(&result.schedule, w))?;
    write_atomic(vehicles_out, |w| write_vehicles(&result.vehicles, w))?;
    println!(
        "{} stops, {} departures",
        result.schedule.stops.len(),
        result.schedule.departure_count()
    );
    Ok(())
}

fn map(config: &Path) -> Result<()> {
    let mut cfg = MapperConfig::parse(&read_text(config)?).map_err(|e| format!("{}: {e}", config.display()))?;
    let base = config.parent().unwrap_or(Path::new("."));
    for p in [
        &mut cfg.input_schedule,
        &mut cfg.input_network,
        &mut cfg.output_schedule,
        &mut cfg.output_network,
    ] {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    let schedule = read_schedule(open(&cfg.input_schedule)?).map_err(|e| format!("{}: {e}", cfg.input_schedule.display()))?;
    let network = read_network(open(&cfg.input_network)?).map_err(|e| format!("{}: {e}", cfg.input_network.display()))?;
    let result = map_schedule(&schedule, &network, &cfg.params)?;
    write_atomic(&cfg.output_schedule, |w| write_schedule(&result.schedule, w))?;
    write_atomic(&cfg.output_network, |w| write_network(&result.network, w))?;
    println!("mapped; {} artificial links added", result.artificial_links.len());
    Ok(())
}

fn plausibility(schedule: &Path, network: &Path, outdir: &Path, tolerance: f64) -> Result<()> {
    let sched = read_schedule(open(schedule)?).map_err(|e| format!("{}: {e}", schedule.display()))?;
    let net = read_network(open(network)?).map_err(|e| format!("{}: {e}", network.display()))?;
    let warnings = check_plausibility(&sched, &net, tolerance)?;
    create_dir(outdir)?;
    write_atomic(&outdir.join("plausibility_warnings.csv"), |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["line", "route", "kind", "location", "message"])?;
        for warn in &warnings {
            let message = warn.to_string();
            out.write_record([
                warn.line.as_str(),
                warn.route.as_str(),
                warn.kind_label(),
                warn.location().as_str(),
                message.as_str(),
            ])?;
        }
        out.flush()
    })?;
    println!("{} warnings", warnings.len());
    Ok(())
}

fn build_demand(outdir: &Path, scenario: CommuterScenario, iterations: u32) -> Result<()> {
    let built = scenario.build()?;
    create_dir(outdir)?;
    let mut cfg = scenario.run_config(iterations, scenario.seed);
    cfg.network_file = Some("network.xml".into());
    cfg.plans_file = Some("population.xml".into());
    cfg.schedule_file = Some("schedule.xml".into());
    cfg.vehicles_file = Some("vehicles.xml".into());
    cfg.output_dir = Some("output".into());
    write_atomic(&outdir.join("network.xml"), |w| write_network(&built.network, w))?;
    write_atomic(&outdir.join("population.xml"), |w| write_population(&built.population, w))?;
    if let Some(schedule) = &built.schedule {
        write_atomic(&outdir.join("schedule.xml"), |w| write_schedule(schedule, w))?;
    }
    write_atomic(&outdir.join("vehicles.xml"), |w| write_vehicles(&built.vehicles, w))?;
    if let Some(drt) = &mut cfg.drt {
        drt.vehicles_file = Some("drt_vehicles.xml".into());
        write_atomic(&outdir.join("drt_vehicles.xml"), |w| write_fleet(&built.fleet, w))?;
    }
    let xml = cfg.to_document().to_xml();
    write_atomic(&outdir.join("config.xml"), |w| w.write_all(xml.as_bytes()))?;
    println!("{} agents written to {}", built.population.len(), outdir.display());
    Ok(())
}

fn default_mapper_config(path: &Path) -> Result<()> {
    let xml = MapperConfig::default().to_xml();
    write_atomic(path, |w| w.write_all(xml.as_bytes()))?;
    Ok(())
}

fn configure_threads() -> Result<()> {
    if let Ok(raw) = std::env::var(THREADS_VAR) {
        let n: usize = raw
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| format!("{THREADS_VAR} must be a positive whole number, got '{raw}'"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn execute(command: Command) -> Result<()> {
    configure_threads()?;
    match command {
        Command::Run { config, output } => run(&config, output),
        Command::Gtfs2schedule {
            gtfs_dir,
            date,
            schedule_out,
            vehicles_out,
            routes,
        } => gtfs2schedule(&gtfs_dir, &date, &schedule_out, &vehicles_out, routes),
        Command::MapSchedule { config } => map(&config),
        Command::CheckPlausibility {
            schedule,
            network,
            outdir,
            speed_tolerance,
        } => plausibility(&schedule, &network, &outdir, speed_tolerance),
        Command::BuildDemand {
            outdir,
            agents,
            split,
            seed,
            iterations,
            with_drt,
        } => {
            let scenario = CommuterScenario {
                agents,
                mode_split: split,
                with_drt,
                seed,
            };
            build_demand(&outdir, scenario, iterations)
        }
        Command::DefaultMapperConfig { path } => default_mapper_config(&path),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
