mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use minimatsim::network::{read_network, write_network};
use minimatsim::transit::{read_schedule, read_vehicles};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_minimatsim"))
        .args(args)
        .env_remove("MINIMATSIM_THREADS")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Two stops 1 km apart on the x axis, one Monday trip at 08:00.
fn write_feed(dir: &Path) {
    fs::create_dir_all(dir).unwrap();
    let files = [
        ("stops.txt", "stop_id,stop_name,stop_x,stop_y\nA,Alpha,0,0\nB,Beta,400,0\n"),
        ("routes.txt", "route_id,route_short_name\n21,21\n22,22\n"),
        ("trips.txt", "route_id,service_id,trip_id\n21,mon,t1\n22,mon,t2\n"),
        (
            "stop_times.txt",
            "trip_id,arrival_time,departure_time,stop_id,stop_sequence\n\
             t1,08:00:00,08:00:00,A,1\nt1,08:05:00,08:05:00,B,2\n\
             t2,09:00:00,09:00:00,B,1\nt2,09:05:00,09:05:00,A,2\n",
        ),
        (
            "calendar.txt",
            "service_id,monday,tuesday,wednesday,thursday,friday,saturday,sunday,start_date,end_date\n\
             mon,1,0,0,0,0,0,0,20190101,20191231\n",
        ),
    ];
    for (name, body) in files {
        fs::write(dir.join(name), body).unwrap();
    }
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = cli(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("Usage"), "{}", stderr(&out));
    assert_eq!(cli(&[]).status.code(), Some(2));
}

#[test]
fn missing_config_fails_with_message() {
    let out = cli(&["run", "definitely-missing.xml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("definitely-missing.xml"), "{}", stderr(&out));
}

#[test]
fn bad_thread_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("m.xml");
    let out = Command::new(env!("CARGO_BIN_EXE_minimatsim"))
        .args(["default-mapper-config", s(&target)])
        .env("MINIMATSIM_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("MINIMATSIM_THREADS"));
    assert!(!target.exists());
}

#[test]
fn gtfs_conversion_writes_schedule_and_vehicles() {
    let dir = tempfile::tempdir().unwrap();
    let feed = dir.path().join("feed");
    write_feed(&feed);
    let (sched, veh) = (dir.path().join("sched.xml"), dir.path().join("veh.xml"));
    let out = cli(&["gtfs2schedule", s(&feed), "2019-05-06", s(&sched), s(&veh)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let schedule = read_schedule(fs::File::open(&sched).unwrap()).unwrap();
    assert_eq!(schedule.departure_count(), 2);
    let vehicles = read_vehicles(fs::File::open(&veh).unwrap()).unwrap();
    vehicles.check_against(&schedule).unwrap();

    let out = cli(&["gtfs2schedule", s(&feed), "2019-05-06", s(&sched), s(&veh), "--routes", "22"]);
    assert!(out.status.success());
    let schedule = read_schedule(fs::File::open(&sched).unwrap()).unwrap();
    assert_eq!(schedule.departure_count(), 1);
}

#[test]
fn failed_conversion_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let (sched, veh) = (dir.path().join("sched.xml"), dir.path().join("veh.xml"));
    let out = cli(&["gtfs2schedule", s(&dir.path().join("nofeed")), "2019-05-06", s(&sched), s(&veh)]);
    assert_eq!(out.status.code(), Some(1));
    let out = cli(&["gtfs2schedule", s(&dir.path().join("nofeed")), "not-a-date", s(&sched), s(&veh)]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn map_then_check_plausibility() {
    let dir = tempfile::tempdir().unwrap();
    let feed = dir.path().join("feed");
    write_feed(&feed);
    let out = cli(&[
        "gtfs2schedule",
        s(&feed),
        "2019-05-06",
        s(&dir.path().join("schedule.xml")),
        s(&dir.path().join("vehicles.xml")),
    ]);
    assert!(out.status.success());
    let net = common::grid(3, 200.0, "car,pt");
    write_network(&net, fs::File::create(dir.path().join("network.xml")).unwrap()).unwrap();

    let config = dir.path().join("mapper.xml");
    assert!(cli(&["default-mapper-config", s(&config)]).status.success());
    let out = cli(&["map-schedule", s(&config)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let mapped = read_schedule(fs::File::open(dir.path().join("schedule_mapped.xml")).unwrap()).unwrap();
    assert!(mapped.is_mapped());
    let mapped_net = read_network(fs::File::open(dir.path().join("network_mapped.xml")).unwrap()).unwrap();
    mapped_net.validate().unwrap();

    let report = dir.path().join("report");
    let out = cli(&[
        "check-plausibility",
        s(&dir.path().join("schedule_mapped.xml")),
        s(&dir.path().join("network_mapped.xml")),
        s(&report),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(report.join("plausibility_warnings.csv")).unwrap();
    assert!(csv.starts_with("line,route,kind,location,message"));
    assert_eq!(stdout(&out).trim(), format!("{} warnings", csv.lines().count() - 1));
}

#[test]
fn build_demand_then_run_prints_shares() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("sc");
    let out = cli(&["build-demand", s(&sc), "--agents", "30", "--iterations", "2", "--split", "car=0.5,pt=0.5"]);
    assert!(out.status.success(), "{}", stderr(&out));
    for f in ["network.xml", "population.xml", "schedule.xml", "vehicles.xml", "config.xml"] {
        assert!(sc.join(f).is_file(), "{f}");
    }
    assert!(!sc.join("drt_vehicles.xml").exists());

    let out = cli(&["run", s(&sc.join("config.xml"))]);
    assert!(out.status.success(), "{}", stderr(&out));
    let lines: Vec<String> = stdout(&out).lines().map(String::from).collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0], "iteration 0: car 50.0% pt 50.0%");
    assert!(sc.join("output/modestats.csv").is_file());
    assert!(sc.join("output/it.2/events.txt").is_file());
}

#[test]
fn bad_split_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&["build-demand", s(&dir.path().join("x")), "--split", "car=lots"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("x").exists());
}
