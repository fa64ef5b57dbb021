use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{commute_plan, Mode, Person, Population, PopulationError};
use crate::network::{Network, CAR};
use crate::time::{Time, DAY};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

/// Parameters of the built-in home-work-home commuter generator.
#[derive(Debug, Clone, PartialEq)]
pub struct CommuterDemand {
    pub n: i64,
    pub home_region: Rect,
    pub work: (f64, f64),
    pub mode_split: BTreeMap<Mode, f64>,
    pub depart_window: (Time, Time),
    pub return_window: (Time, Time),
    pub seed: u64,
}

impl CommuterDemand {
    pub fn new(n: i64, home_region: Rect, work: (f64, f64), mode_split: BTreeMap<Mode, f64>, seed: u64) -> Self {
        CommuterDemand {
            n,
            home_region,
            work,
            mode_split,
            depart_window: (7 * 3600 + 1800, 9 * 3600),
            return_window: (16 * 3600 + 1800, 18 * 3600),
            seed,
        }
    }
}

/// Largest-remainder apportionment of `n` seats over `shares` (in key
/// order). Remainder ties go to the earlier key.
pub fn apportion(n: usize, shares: &BTreeMap<Mode, f64>) -> BTreeMap<Mode, usize> {
    let mut counts: Vec<(Mode, usize, f64)> = shares
        .iter()
        .map(|(&m, &f)| {
            let quota = n as f64 * f;
            let floor = quota.floor();
            (m, floor as usize, quota - floor)
        })
        .collect();
    let assigned: usize = counts.iter().map(|c| c.1).sum();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| counts[b].2.total_cmp(&counts[a].2).then(a.cmp(&b)));
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i].1 += 1;
    }
    counts.into_iter().map(|(m, c, _)| (m, c)).collect()
}

pub fn build_commuter_demand(demand: &CommuterDemand) -> Result<Population, PopulationError> {
    if demand.n < 0 {
        return Err(PopulationError::InvalidDemand(format!("negative person count {}", demand.n)));
    }
    let total: f64 = demand.mode_split.values().sum();
    if (total - 1.0).abs() > 1e-9 || demand.mode_split.values().any(|f| *f < 0.0) {
        return Err(PopulationError::InvalidDemand(format!("mode split sums to {total}, not 1")));
    }
    for (a, b) in [demand.depart_window, demand.return_window] {
        if a > b || b >= DAY {
            return Err(PopulationError::InvalidDemand(format!("window [{a}, {b}] is not within one day")));
        }
    }
    if demand.depart_window.1 > demand.return_window.0 {
        return Err(PopulationError::InvalidDemand("departure window overlaps return window".into()));
    }
    let n = demand.n as usize;
    let mut modes: Vec<Mode> = apportion(n, &demand.mode_split)
        .into_iter()
        .flat_map(|(m, c)| std::iter::repeat(m).take(c))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(demand.seed);
    modes.shuffle(&mut rng);
    let r = demand.home_region;
    let mut pop = Population::new();
    for (i, mode) in modes.into_iter().enumerate() {
        let home = (rng.gen_range(r.min_x..=r.max_x), rng.gen_range(r.min_y..=r.max_y));
        let leave_home = rng.gen_range(demand.depart_window.0..=demand.depart_window.1);
        let leave_work = rng.gen_range(demand.return_window.0..=demand.return_window.1);
        let plan = commute_plan(home, demand.work, leave_home, leave_work, mode);
        pop.insert(Person::new(format!("pers_{i}"), plan))?;
    }
    Ok(pop)
}

/// Attaches every activity to the car link whose midpoint is nearest.
/// Distance ties go to the smallest link id.
pub fn assign_activity_links(pop: &Population, net: &Network) -> Result<Population, PopulationError> {
    let candidates: Vec<(&str, (f64, f64))> = net
        .links
        .values()
        .filter(|l| l.allows(CAR))
        .map(|l| (l.id.as_str(), net.link_midpoint(l)))
        .collect();
    if candidates.is_empty() {
        return Err(PopulationError::NoCarLink);
    }
    let nearest = |x: f64, y: f64| -> String {
        let mut best = (f64::INFINITY, "");
        for &(id, (mx, my)) in &candidates {
            let d = (mx - x).powi(2) + (my - y).powi(2);
            // candidates iterate in id order; strict < keeps the smallest id on ties
            if d < best.0 {
                best = (d, id);
            }
        }
        best.1.to_string()
    };
    let mut out = pop.clone();
    for person in out.persons.values_mut() {
        for plan in &mut person.plans {
            for act in plan.activities_mut() {
                act.link = Some(nearest(act.x, act.y));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert_eq, proptest};

    fn region() -> Rect {
        Rect {
            min_x: 0.0,
            min_y: 0.0,
            max_x: 1000.0,
            max_y: 1000.0,
        }
    }

    fn split(pairs: &[(Mode, f64)]) -> BTreeMap<Mode, f64> {
        pairs.iter().copied().collect()
    }

    fn count(pop: &Population) -> BTreeMap<Mode, usize> {
        let mut out = BTreeMap::new();
        for p in pop.persons.values() {
            *out.entry(p.selected_plan().main_mode().unwrap().unwrap()).or_default() += 1;
        }
        out
    }

    #[test]
    fn commuter_split_169() {
        let demand = CommuterDemand::new(169, region(), (3000.0, 2000.0), split(&[(Mode::Car, 0.65), (Mode::Pt, 0.35)]), 1);
        let pop = build_commuter_demand(&demand).unwrap();
        let c = count(&pop);
        assert_eq!(c[&Mode::Car], 110);
        assert_eq!(c[&Mode::Pt], 59);
        for p in pop.persons.values() {
            let plan = p.selected_plan();
            plan.validate().unwrap();
            let acts: Vec<_> = plan.activities().collect();
            assert_eq!(acts.len(), 3);
            let t0 = acts[0].end_time.unwrap();
            let t1 = acts[1].end_time.unwrap();
            assert!((27_000..=32_400).contains(&t0));
            assert!((59_400..=64_800).contains(&t1));
        }
    }

    #[test]
    fn single_car_commuter() {
        let demand = CommuterDemand::new(1, region(), (0.0, 0.0), split(&[(Mode::Car, 1.0)]), 9);
        let pop = build_commuter_demand(&demand).unwrap();
        assert_eq!(count(&pop), BTreeMap::from([(Mode::Car, 1)]));
    }

    #[test]
    fn zero_allowed_negative_rejected() {
        let mut demand = CommuterDemand::new(0, region(), (0.0, 0.0), split(&[(Mode::Car, 1.0)]), 9);
        assert!(build_commuter_demand(&demand).unwrap().is_empty());
        demand.n = -1;
        assert!(build_commuter_demand(&demand).is_err());
    }

    #[test]
    fn seeds_control_times_not_counts() {
        let s = split(&[(Mode::Car, 0.65), (Mode::Pt, 0.35)]);
        let a = build_commuter_demand(&CommuterDemand::new(50, region(), (0.0, 0.0), s.clone(), 1)).unwrap();
        let b = build_commuter_demand(&CommuterDemand::new(50, region(), (0.0, 0.0), s.clone(), 1)).unwrap();
        let c = build_commuter_demand(&CommuterDemand::new(50, region(), (0.0, 0.0), s, 2)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(count(&a), count(&c));
    }

    /// Reference apportionment: hand the remaining seats one at a time to
    /// the largest outstanding fractional remainder.
    fn oracle(n: usize, shares: &[(Mode, f64)]) -> Vec<usize> {
        let quotas: Vec<f64> = shares.iter().map(|(_, f)| n as f64 * f).collect();
        let mut seats: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
        let mut rems: Vec<f64> = quotas.iter().map(|q| q - q.floor()).collect();
        while seats.iter().sum::<usize>() < n {
            let mut best = 0;
            for i in 1..rems.len() {
                if rems[i] > rems[best] {
                    best = i;
                }
            }
            seats[best] += 1;
            rems[best] = -1.0;
        }
        seats
    }

    proptest! {
        #[test]
        fn apportionment_is_largest_remainder(n in 0usize..10_000, w in proptest::collection::vec(1u32..1000, 3)) {
            let total: u32 = w.iter().sum();
            let shares: Vec<(Mode, f64)> = [Mode::Car, Mode::Drt, Mode::Pt]
                .into_iter()
                .zip(w.iter().map(|x| *x as f64 / total as f64))
                .collect();
            let got = apportion(n, &shares.iter().copied().collect());
            let want = oracle(n, &shares);
            prop_assert_eq!(got.values().copied().collect::<Vec<_>>(), want);
            prop_assert_eq!(got.values().sum::<usize>(), n);
        }
    }

    fn grid() -> Network {
        let mut net = Network::new();
        net.add_node("0", 0.0, 0.0).unwrap();
        net.add_node("1", 100.0, 0.0).unwrap();
        net.add_node("2", 0.0, 100.0).unwrap();
        net.add_simple_link("a", "0", "1", 100.0, 10.0, 600.0, 1.0, "car").unwrap();
        net.add_simple_link("b", "0", "2", 100.0, 10.0, 600.0, 1.0, "car").unwrap();
        net.add_simple_link("c", "1", "2", 141.0, 10.0, 600.0, 1.0, "pt").unwrap();
        net
    }

    fn single(x: f64, y: f64) -> Population {
        let mut pop = Population::new();
        pop.insert(Person::new("p", commute_plan((x, y), (x, y), 10, 20, Mode::Car))).unwrap();
        pop
    }

    fn first_link(pop: &Population) -> String {
        pop.persons["p"].plans[0].activities().next().unwrap().link.clone().unwrap()
    }

    #[test]
    fn activity_on_midpoint_and_tie() {
        let net = grid();
        assert_eq!(first_link(&assign_activity_links(&single(50.0, 0.0), &net).unwrap()), "a");
        assert_eq!(first_link(&assign_activity_links(&single(0.0, 50.0), &net).unwrap()), "b");
        // equidistant from the midpoints of a and b; pt-only c is ignored
        assert_eq!(first_link(&assign_activity_links(&single(50.0, 50.0), &net).unwrap()), "a");
    }

    #[test]
    fn nearest_link_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let net = crate::network::testutil::random_network(&mut rng, 15, 0.15, &["car", "pt"]);
        for _ in 0..200 {
            let (x, y) = (rng.gen_range(-100.0..1100.0), rng.gen_range(-100.0..1100.0));
            let got = first_link(&assign_activity_links(&single(x, y), &net).unwrap());
            let want = net
                .links
                .values()
                .filter(|l| l.allows("car"))
                .map(|l| {
                    let (mx, my) = net.link_midpoint(l);
                    (((mx - x).powi(2) + (my - y).powi(2)).sqrt(), l.id.clone())
                })
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .unwrap()
                .1;
            assert_eq!(got, want);
        }
    }
}
