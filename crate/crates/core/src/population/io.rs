use std::io::{Read, Write};

use super::{
    Activity, CarRoute, DrtRoute, Leg, Mode, Person, Plan, PlanElement, Population, PopulationError, Route,
    TeleportRoute,
};
use crate::network::Path;
use crate::time::{format_hms, parse_hms, Time};
use crate::transit::{Itinerary, Ride};
use crate::xml::{self, Element, XmlError};

fn at(line: usize) -> impl Fn(PopulationError) -> PopulationError {
    move |e| match e {
        PopulationError::AtLine { .. } => e,
        other => PopulationError::AtLine {
            line,
            source: Box::new(other),
        },
    }
}

fn req_time(el: &Element, key: &str) -> Result<Time, PopulationError> {
    let raw = el.req(key)?;
    raw.trim()
        .parse::<Time>()
        .map_err(|_| XmlError::new(el.line, format!("'{key}' is not a whole number of seconds: {raw:?}")).into())
}

fn read_route(el: &Element) -> Result<Route, PopulationError> {
    let kind = el.req("type")?;
    Ok(match kind {
        "car" => Route::Car(CarRoute {
            path: Path {
                links: el.text.split_whitespace().map(str::to_string).collect(),
                travel_cost: el.req_f64("cost")?,
            },
            distance: el.req_f64("distance")?,
        }),
        "pt" => {
            let mut rides = Vec::new();
            for r in el.children_named("ride") {
                rides.push(Ride {
                    line: r.req("line")?.to_string(),
                    route: r.req("route")?.to_string(),
                    board_stop: r.req("board")?.to_string(),
                    alight_stop: r.req("alight")?.to_string(),
                    board_time: req_time(r, "board_time")?,
                    alight_time: req_time(r, "alight_time")?,
                    distance: r.req_f64("distance")?,
                });
            }
            Route::Pt(Itinerary {
                access_walk: req_time(el, "access_walk")?,
                egress_walk: req_time(el, "egress_walk")?,
                access_distance: el.req_f64("access_distance")?,
                egress_distance: el.req_f64("egress_distance")?,
                departure: req_time(el, "departure")?,
                arrival: req_time(el, "arrival")?,
                rides,
            })
        }
        "drt" => Route::Drt(DrtRoute {
            direct_time: req_time(el, "direct_time")?,
            distance: el.req_f64("distance")?,
        }),
        "walk" => Route::Walk(TeleportRoute {
            travel_time: req_time(el, "travel_time")?,
            distance: el.req_f64("distance")?,
        }),
        other => return Err(PopulationError::InvalidRoute(format!("unknown route type '{other}'"))),
    })
}

fn read_plan(el: &Element) -> Result<Plan, PopulationError> {
    let mut elements = Vec::new();
    for child in &el.children {
        match child.name.as_str() {
            "activity" | "act" => {
                let end_time = match child.attr("end_time") {
                    Some(raw) => Some(parse_hms(raw).map_err(|e| XmlError::new(child.line, e.to_string()))?),
                    None => None,
                };
                elements.push(PlanElement::Activity(Activity {
                    kind: child.req("type")?.to_string(),
                    x: child.req_f64("x")?,
                    y: child.req_f64("y")?,
                    end_time,
                    link: child.attr("link").map(str::to_string),
                }));
            }
            "leg" => {
                let mode: Mode = child.req("mode")?.parse().map_err(at(child.line))?;
                let route = match child.child("route") {
                    Some(r) => Some(read_route(r).map_err(at(r.line))?),
                    None => None,
                };
                elements.push(PlanElement::Leg(Leg { mode, route }));
            }
            _ => {}
        }
    }
    let score = el.opt_f64("score")?;
    let plan = Plan { elements, score };
    plan.validate().map_err(at(el.line))?;
    Ok(plan)
}

fn read_person(el: &Element) -> Result<Person, PopulationError> {
    let id = el.req("id")?.to_string();
    let mut plans = Vec::new();
    let mut selected = 0;
    for p in el.children_named("plan") {
        if p.attr("selected") == Some("yes") {
            selected = plans.len();
        }
        plans.push(read_plan(p)?);
    }
    if plans.is_empty() {
        return Err(PopulationError::NoPlans(id));
    }
    Ok(Person { id, plans, selected })
}

/// Reads a population document. Bare `<person>` fragments are accepted
/// when wrapped in any root element.
pub fn read_population(mut source: impl Read) -> Result<Population, PopulationError> {
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|e| XmlError::new(0, e.to_string()))?;
    let root = xml::parse(&text)?;
    let mut pop = Population::new();
    let persons: Vec<&Element> = if root.name == "person" {
        vec![&root]
    } else {
        root.children_named("person").collect()
    };
    for el in persons {
        let person = read_person(el).map_err(at(el.line))?;
        pop.insert(person).map_err(at(el.line))?;
    }
    Ok(pop)
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn write_route(out: &mut String, route: &Route) {
    match route {
        Route::Car(r) => {
            let ids = r.path.links.join(" ");
            out.push_str(&format!(
                "        <route type=\"car\" cost=\"{}\" distance=\"{}\">{}</route>\n",
                num(r.path.travel_cost),
                num(r.distance),
                xml::escape(&ids)
            ));
        }
        Route::Pt(it) => {
            let attrs = [
                ("type", "pt".to_string()),
                ("departure", it.departure.to_string()),
                ("arrival", it.arrival.to_string()),
                ("access_walk", it.access_walk.to_string()),
                ("egress_walk", it.egress_walk.to_string()),
                ("access_distance", num(it.access_distance)),
                ("egress_distance", num(it.egress_distance)),
            ];
            xml::open_tag(out, 4, "route", &attrs);
            for ride in &it.rides {
                xml::empty_tag(
                    out,
                    5,
                    "ride",
                    &[
                        ("line", ride.line.clone()),
                        ("route", ride.route.clone()),
                        ("board", ride.board_stop.clone()),
                        ("alight", ride.alight_stop.clone()),
                        ("board_time", ride.board_time.to_string()),
                        ("alight_time", ride.alight_time.to_string()),
                        ("distance", num(ride.distance)),
                    ],
                );
            }
            xml::close_tag(out, 4, "route");
        }
        Route::Drt(r) => xml::empty_tag(
            out,
            4,
            "route",
            &[
                ("type", "drt".to_string()),
                ("direct_time", r.direct_time.to_string()),
                ("distance", num(r.distance)),
            ],
        ),
        Route::Walk(r) => xml::empty_tag(
            out,
            4,
            "route",
            &[
                ("type", "walk".to_string()),
                ("travel_time", r.travel_time.to_string()),
                ("distance", num(r.distance)),
            ],
        ),
    }
}

pub fn write_population(pop: &Population, mut sink: impl Write) -> std::io::Result<()> {
    let mut out = String::from(xml::HEADER);
    xml::open_tag(&mut out, 0, "population", &[]);
    for person in pop.persons.values() {
        xml::open_tag(&mut out, 1, "person", &[("id", person.id.clone())]);
        for (i, plan) in person.plans.iter().enumerate() {
            let mut attrs = vec![("selected", if i == person.selected { "yes" } else { "no" }.to_string())];
            if let Some(score) = plan.score {
                attrs.push(("score", num(score)));
            }
            xml::open_tag(&mut out, 2, "plan", &attrs);
            for el in &plan.elements {
                match el {
                    PlanElement::Activity(a) => {
                        let mut attrs = vec![("type", a.kind.clone()), ("x", num(a.x)), ("y", num(a.y))];
                        if let Some(link) = &a.link {
                            attrs.push(("link", link.clone()));
                        }
                        if let Some(t) = a.end_time {
                            attrs.push(("end_time", format_hms(t)));
                        }
                        xml::empty_tag(&mut out, 3, "activity", &attrs);
                    }
                    PlanElement::Leg(leg) => match &leg.route {
                        None => xml::empty_tag(&mut out, 3, "leg", &[("mode", leg.mode.to_string())]),
                        Some(route) => {
                            xml::open_tag(&mut out, 3, "leg", &[("mode", leg.mode.to_string())]);
                            write_route(&mut out, route);
                            xml::close_tag(&mut out, 3, "leg");
                        }
                    },
                }
            }
            xml::close_tag(&mut out, 2, "plan");
        }
        xml::close_tag(&mut out, 1, "person");
    }
    xml::close_tag(&mut out, 0, "population");
    sink.write_all(out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const LISTING: &str = r#"<population>
<person id="pers_0">
	<plan selected="yes">
		<activity type="h" x="3565270.0"
		y="5711985.0" end_time="08:02:45" >
		</activity>
		<leg mode="car">
		</leg>
		<activity type="w" x="3567092.2910817387"
		y="5714427.227577877" end_time="17:22:48" >
		</activity>
		<leg mode="car">
		</leg>
		<activity type="h" x="3565270.0" y="5711985.0" >
		</activity>
	</plan>
</person>

<person id="pers_101">
	<plan selected="yes">
		<activity type="h" x="3565219.0"
		y="5711797.0" end_time="08:43:50" >
		</activity>
		<leg mode="pt">
		</leg>
		<activity type="w" x="3567092.2910817387"
		y="5714427.227577877" end_time="17:24:05" >
		</activity>
		<leg mode="pt">
		</leg>
		<activity type="h" x="3565219.0" y="5711797.0" >
		</activity>
	</plan>
</person>
</population>
"#;

    #[test]
    fn reads_commuter_listing() {
        let pop = read_population(LISTING.as_bytes()).unwrap();
        assert_eq!(pop.len(), 2);
        let car = pop.persons["pers_0"].selected_plan();
        let pt = pop.persons["pers_101"].selected_plan();
        assert_eq!(car.main_mode(), Ok(Some(Mode::Car)));
        assert_eq!(pt.main_mode(), Ok(Some(Mode::Pt)));
        let work_end = |p: &Plan| p.activities().nth(1).unwrap().end_time.unwrap();
        assert_eq!(format_hms(work_end(car)), "17:22:48");
        assert_eq!(format_hms(work_end(pt)), "17:24:05");
        assert_eq!(format_hms(car.activities().next().unwrap().end_time.unwrap()), "08:02:45");
    }

    #[test]
    fn consecutive_legs_rejected() {
        let doc = LISTING.replacen(
            "<leg mode=\"car\">\n\t\t</leg>",
            "<leg mode=\"car\">\n\t\t</leg><leg mode=\"car\"/>",
            1,
        );
        let err = read_population(doc.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("alternate"), "{err}");
    }

    #[test]
    fn unknown_mode_and_bad_time_rejected() {
        let doc = LISTING.replacen("mode=\"car\"", "mode=\"bike\"", 1);
        assert!(read_population(doc.as_bytes()).unwrap_err().to_string().contains("bike"));
        let doc = LISTING.replacen("08:02:45", "24:00:00", 1);
        assert!(read_population(doc.as_bytes()).is_err());
    }

    fn arb_route(mode: Mode) -> BoxedStrategy<Option<Route>> {
        let car = (proptest::collection::vec("[a-z0-9_-]{1,6}", 0..5), 0.0..1e4f64, 0.0..1e5f64)
            .prop_map(|(links, cost, distance)| {
                Route::Car(CarRoute {
                    path: Path { links, travel_cost: cost },
                    distance,
                })
            })
            .boxed();
        let pt = (
            proptest::collection::vec(("[a-z]{1,3}", "[a-z]{1,3}", 0u32..90_000, 0.0..5e3f64), 1..3),
            0u32..600,
            0.0..900f64,
        )
            .prop_map(|(rides, walk, d)| {
                Route::Pt(Itinerary {
                    departure: 100,
                    arrival: 9000,
                    access_walk: walk,
                    egress_walk: walk / 2,
                    access_distance: d,
                    egress_distance: d / 2.0,
                    rides: rides
                        .into_iter()
                        .map(|(a, b, t, dist)| Ride {
                            line: "L".into(),
                            route: format!("{a}{b}"),
                            board_stop: a,
                            alight_stop: b,
                            board_time: t,
                            alight_time: t + 60,
                            distance: dist,
                        })
                        .collect(),
                })
            })
            .boxed();
        let drt = (0u32..5000, 0.0..1e4f64)
            .prop_map(|(t, d)| Route::Drt(DrtRoute { direct_time: t, distance: d }))
            .boxed();
        let walk = (0u32..5000, 0.0..1e4f64)
            .prop_map(|(t, d)| Route::Walk(TeleportRoute { travel_time: t, distance: d }))
            .boxed();
        let some = match mode {
            Mode::Car => car,
            Mode::Pt => pt,
            Mode::Drt => drt,
            Mode::Walk => walk,
        };
        prop_oneof![Just(None), some.prop_map(Some)].boxed()
    }

    fn arb_plan() -> impl Strategy<Value = Plan> {
        (
            proptest::sample::select(Mode::ALL.to_vec()),
            0u32..40_000,
            0u32..40_000,
            proptest::option::of(-200.0..200f64),
            -1e6..1e6f64,
            -1e6..1e6f64,
        )
            .prop_flat_map(|(mode, a, b, score, x, y)| {
                (arb_route(mode), arb_route(mode)).prop_map(move |(r1, r2)| {
                    let mut plan = super::super::commute_plan((x, y), (y, x), a, a + b, mode);
                    plan.score = score;
                    {
                        let mut legs = plan.legs_mut();
                        legs.next().unwrap().route = r1.clone();
                        legs.next().unwrap().route = r2;
                    }
                    for (i, act) in plan.activities_mut().enumerate() {
                        if i == 1 {
                            act.link = Some("w_link".into());
                        }
                    }
                    plan
                })
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn population_round_trip(plans in proptest::collection::vec(proptest::collection::vec(arb_plan(), 1..4), 0..6), sel in 0usize..3) {
            let mut pop = Population::new();
            for (i, plans) in plans.into_iter().enumerate() {
                let selected = sel.min(plans.len() - 1);
                pop.insert(Person { id: format!("p{i}"), plans, selected }).unwrap();
            }
            let mut buf = Vec::new();
            write_population(&pop, &mut buf).unwrap();
            let back = read_population(buf.as_slice()).unwrap();
            prop_assert_eq!(back, pop);
        }
    }
}
