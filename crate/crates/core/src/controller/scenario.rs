//! Built-in commuter scenario: a small residential grid joined to a work
//! location by a fast car road and by a separate bus road with a line
//! running every ten minutes.

use std::collections::BTreeMap;

use crate::config::{DrtConfig, RunConfig};
use crate::drt::{DrtConstraints, DrtVehicle};
use crate::mobsim::freeflow_time;
use crate::network::Network;
use crate::population::{assign_activity_links, build_commuter_demand, CommuterDemand, Mode, Rect};
use crate::time::Time;
use crate::transit::{Departure, RouteStop, TransitLine, TransitRoute, TransitSchedule, TransitStopFacility, TransitVehicles, VehicleType};

use super::{ControllerError, Scenario};

const GRID: usize = 5;
const SPACING: f64 = 250.0;
const GRID_SPEED: f64 = 8.33;
const CAR_ROAD_SPEED: f64 = 16.67;
const BUS_ROAD_SPEED: f64 = 11.11;
pub const WORK: (f64, f64) = (2550.0, 1250.0);
const HEADWAY: Time = 600;
const FIRST_BUS: Time = 5 * 3600;
const LAST_BUS: Time = 22 * 3600;
const BUS_TYPE: &str = "bus";
/// Extra seconds per stop in the timetable beyond free-flow driving.
const STOP_ALLOWANCE: Time = 20;

fn g(i: usize, j: usize) -> String {
    format!("g{i}_{j}")
}

fn link_id(a: &str, b: &str) -> String {
    format!("{a}-{b}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommuterScenario {
    pub agents: usize,
    pub mode_split: BTreeMap<Mode, f64>,
    /// Adds a five-vehicle, eight-seat door-to-door fleet.
    pub with_drt: bool,
    pub seed: u64,
}

impl Default for CommuterScenario {
    fn default() -> Self {
        CommuterScenario {
            agents: 169,
            mode_split: [(Mode::Car, 0.65), (Mode::Pt, 0.35)].into(),
            with_drt: false,
            seed: 1,
        }
    }
}

impl CommuterScenario {
    pub fn network() -> Network {
        let mut net = Network::new();
        for i in 0..GRID {
            for j in 0..GRID {
                net.add_node(g(i, j), i as f64 * SPACING, j as f64 * SPACING).expect("fresh node");
            }
        }
        for (id, x, y) in [("BC", 1750.0, 500.0), ("W", 2500.0, 1250.0), ("WX", 2600.0, 1250.0)] {
            net.add_node(id, x, y).expect("fresh node");
        }
        let both = |net: &mut Network, a: &str, b: &str, speed: f64, cap: f64, lanes: f64, modes: &str| {
            let (pa, pb) = (net.node(a).expect("node").clone(), net.node(b).expect("node").clone());
            let len = ((pa.x - pb.x).powi(2) + (pa.y - pb.y).powi(2)).sqrt();
            for (f, t) in [(a, b), (b, a)] {
                net.add_simple_link(&link_id(f, t), f, t, len, speed, cap, lanes, modes)
                    .expect("fresh link");
            }
        };
        for i in 0..GRID {
            for j in 0..GRID {
                if i + 1 < GRID {
                    both(&mut net, &g(i, j), &g(i + 1, j), GRID_SPEED, 600.0, 1.0, "car,pt");
                }
                if j + 1 < GRID {
                    both(&mut net, &g(i, j), &g(i, j + 1), GRID_SPEED, 600.0, 1.0, "car,pt");
                }
            }
        }
        both(&mut net, &g(4, 3), "W", CAR_ROAD_SPEED, 2000.0, 2.0, "car");
        both(&mut net, &g(4, 2), "BC", BUS_ROAD_SPEED, 1000.0, 1.0, "pt");
        both(&mut net, "BC", "W", BUS_ROAD_SPEED, 1000.0, 1.0, "pt");
        both(&mut net, "W", "WX", GRID_SPEED, 1000.0, 1.0, "car,pt");
        net
    }

    /// Outbound and return route of the single bus line. Each stop sits at
    /// the end of the link listed with it.
    fn line_paths() -> [(&'static str, Vec<&'static str>, Vec<(usize, &'static str)>); 2] {
        [
            (
                "out",
                vec!["g0_2", "g1_2", "g2_2", "g3_2", "g4_2", "BC", "W"],
                vec![(1, "s_g1"), (3, "s_g3"), (5, "s_bc"), (6, "s_w")],
            ),
            (
                "back",
                vec!["WX", "W", "BC", "g4_2", "g3_2", "g2_2", "g1_2"],
                vec![(1, "s_w_back"), (2, "s_bc_back"), (4, "s_g3_back"), (6, "s_g1_back")],
            ),
        ]
    }

    pub fn transit(net: &Network) -> (TransitSchedule, TransitVehicles) {
        let mut schedule = TransitSchedule::new();
        let mut vehicles = TransitVehicles::default();
        vehicles.types.insert(BUS_TYPE.into(), VehicleType::bus(BUS_TYPE));
        let mut line = TransitLine {
            id: "bus".into(),
            ..Default::default()
        };
        for (route_id, nodes, stops) in Self::line_paths() {
            let links: Vec<String> = nodes.windows(2).map(|w| link_id(w[0], w[1])).collect();
            // seconds from the start of the first link to the end of link n - 1
            let reach = |n: usize| -> Time { links[..n].iter().map(|l| freeflow_time(net.link(l).expect("line link"))).sum() };
            let base = reach(stops[0].0);
            let mut route_stops = Vec::new();
            for (k, &(end_node, stop_id)) in stops.iter().enumerate() {
                let node = net.node(nodes[end_node]).expect("stop node");
                schedule.stops.insert(
                    stop_id.into(),
                    TransitStopFacility {
                        id: stop_id.into(),
                        name: None,
                        x: node.x,
                        y: node.y,
                        link: Some(links[end_node - 1].clone()),
                    },
                );
                let arrival = reach(end_node) - base + k as Time * STOP_ALLOWANCE;
                route_stops.push(RouteStop {
                    stop: stop_id.into(),
                    arrival_offset: arrival,
                    departure_offset: arrival + STOP_ALLOWANCE,
                });
            }
            let mut departures = Vec::new();
            for (k, time) in (FIRST_BUS..=LAST_BUS).step_by(HEADWAY as usize).enumerate() {
                let vehicle = format!("bus_{route_id}_{k}");
                vehicles.vehicles.insert(vehicle.clone(), BUS_TYPE.into());
                departures.push(Departure {
                    id: format!("{route_id}_{k}"),
                    time,
                    vehicle,
                });
            }
            line.routes.insert(
                route_id.into(),
                TransitRoute {
                    id: route_id.into(),
                    vehicle_type: BUS_TYPE.into(),
                    stops: route_stops,
                    network_route: links,
                    departures,
                },
            );
        }
        schedule.lines.insert(line.id.clone(), line);
        (schedule, vehicles)
    }

    /// Five vehicles with eight seats each, spread over the residential grid.
    pub fn fleet() -> Vec<DrtVehicle> {
        [(0, 1, 1, 1), (1, 3, 2, 3), (2, 2, 3, 2), (3, 1, 3, 2), (3, 3, 4, 3)]
            .iter()
            .enumerate()
            .map(|(k, &(i, j, i2, j2))| DrtVehicle {
                id: format!("drt{k}"),
                start_link: link_id(&g(i, j), &g(i2, j2)),
                t0: 0,
                t1: 86_400,
                capacity: 8,
            })
            .collect()
    }

    pub fn build(&self) -> Result<Scenario, ControllerError> {
        let network = Self::network();
        let demand = CommuterDemand::new(
            self.agents as i64,
            Rect {
                min_x: 0.0,
                min_y: 250.0,
                max_x: 1000.0,
                max_y: 750.0,
            },
            WORK,
            self.mode_split.clone(),
            self.seed,
        );
        let pop = build_commuter_demand(&demand).map_err(|e| ControllerError::Input(e.to_string()))?;
        let population = assign_activity_links(&pop, &network).map_err(|e| ControllerError::Input(e.to_string()))?;
        let (schedule, vehicles) = Self::transit(&network);
        Ok(Scenario {
            network,
            population,
            schedule: Some(schedule),
            vehicles,
            fleet: if self.with_drt { Self::fleet() } else { Vec::new() },
        })
    }

    /// Default run settings for this scenario, offering DRT when the fleet is
    /// part of it.
    pub fn run_config(&self, iterations: u32, seed: u64) -> RunConfig {
        let mut cfg = RunConfig {
            iterations,
            seed,
            ..Default::default()
        };
        cfg.mobsim.seed = seed;
        if self.with_drt {
            cfg.drt = Some(DrtConfig {
                constraints: DrtConstraints::default(),
                vehicles_file: None,
            });
            cfg.strategy.modes = vec![Mode::Car, Mode::Drt, Mode::Pt];
        }
        cfg
    }
}
