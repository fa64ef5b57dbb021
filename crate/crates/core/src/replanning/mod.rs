//! Plan variation and score-based selection between iterations.

mod routing;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use routing::LegRouter;

use crate::population::{Mode, Person, Plan, Population, Route};
use crate::time::{Time, DAY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    ChangeMode,
    MutateTimes,
    Reroute,
    SelectByScore,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::ChangeMode,
        Strategy::MutateTimes,
        Strategy::Reroute,
        Strategy::SelectByScore,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::ChangeMode => "ChangeMode",
            Strategy::MutateTimes => "MutateTimes",
            Strategy::Reroute => "Reroute",
            Strategy::SelectByScore => "SelectByScore",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = ReplanningError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| ReplanningError::UnknownStrategy(s.to_string()))
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ReplanningError {
    #[error("person has no plans")]
    EmptyMemory,
    #[error("mode change needs at least two modes")]
    SingleMode,
    #[error("plan has no legs")]
    NoLegs,
    #[error("unknown strategy '{0}'")]
    UnknownStrategy(String),
    #[error("strategy weights must be nonnegative and sum to 1, got {0}")]
    BadWeights(f64),
    #[error("mutation range must be positive")]
    BadMutationRange,
    #[error("plan memory must hold at least one plan")]
    BadMemorySize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyConfig {
    /// Probability of each strategy, indexed like [`Strategy::ALL`].
    pub weights: [f64; 4],
    pub mutation_range: Time,
    pub selection_beta: f64,
    pub memory_size: usize,
    /// Modes a mode change may switch to.
    pub modes: Vec<Mode>,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            weights: [0.1, 0.1, 0.1, 0.7],
            mutation_range: 1800,
            selection_beta: 1.0,
            memory_size: crate::population::DEFAULT_MEMORY_SIZE,
            modes: vec![Mode::Car, Mode::Pt],
        }
    }
}

impl StrategyConfig {
    pub fn weight(&self, s: Strategy) -> f64 {
        self.weights[s as usize]
    }

    pub fn set_weight(&mut self, s: Strategy, w: f64) {
        self.weights[s as usize] = w;
    }

    pub fn validate(&self) -> Result<(), ReplanningError> {
        let sum: f64 = self.weights.iter().sum();
        if self.weights.iter().any(|w| !(*w >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(ReplanningError::BadWeights(sum));
        }
        if self.mutation_range == 0 {
            return Err(ReplanningError::BadMutationRange);
        }
        if self.memory_size == 0 {
            return Err(ReplanningError::BadMemorySize);
        }
        Ok(())
    }
}

/// Reproducible random stream for one person in one iteration.
pub fn person_rng(seed: u64, person: &str, iteration: u32) -> ChaCha8Rng {
    // FNV-1a over the three inputs
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let bytes = seed
        .to_le_bytes()
        .into_iter()
        .chain(person.bytes())
        .chain([0xff])
        .chain(iteration.to_le_bytes());
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    ChaCha8Rng::seed_from_u64(h)
}

/// Picks a plan: the first unscored plan if any, otherwise a logit draw
/// with probability proportional to `exp(beta * score)`.
pub fn select_plan(person: &Person, beta: f64, rng: &mut impl Rng) -> Result<usize, ReplanningError> {
    if person.plans.is_empty() {
        return Err(ReplanningError::EmptyMemory);
    }
    if let Some(i) = person.plans.iter().position(|p| p.score.is_none()) {
        return Ok(i);
    }
    let scores: Vec<f64> = person.plans.iter().map(|p| p.score.unwrap_or(0.0)).collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = scores.iter().map(|s| (beta * (s - max)).exp()).collect();
    match WeightedIndex::new(&weights) {
        Ok(dist) => Ok(dist.sample(rng)),
        // every weight underflowed or is NaN; fall back to the best plan
        Err(_) => Ok(argmax(&scores)),
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Switches every leg to one uniformly drawn mode other than the current
/// one and drops all routes.
pub fn change_mode(plan: &mut Plan, modes: &[Mode], rng: &mut impl Rng) -> Result<(), ReplanningError> {
    let current = plan.legs().next().ok_or(ReplanningError::NoLegs)?.mode;
    let choices: Vec<Mode> = modes.iter().copied().filter(|&m| m != current).collect();
    if choices.is_empty() {
        return Err(ReplanningError::SingleMode);
    }
    let mode = choices[rng.gen_range(0..choices.len())];
    for leg in plan.legs_mut() {
        leg.mode = mode;
        leg.route = None;
    }
    plan.score = None;
    Ok(())
}

/// Shifts each activity end time by a uniform draw in `[-range, range]`.
/// Times are kept nondecreasing and within the day. Transit itineraries are
/// dropped since they depend on departure time.
pub fn mutate_times(plan: &mut Plan, range: Time, rng: &mut impl Rng) {
    let range = range as i64;
    let mut floor = 0i64;
    for act in plan.activities_mut() {
        if let Some(t) = act.end_time {
            let shifted = t as i64 + rng.gen_range(-range..=range);
            let t = shifted.clamp(floor, DAY as i64 - 1);
            act.end_time = Some(t as Time);
            floor = t;
        }
    }
    for leg in plan.legs_mut() {
        if matches!(leg.route, Some(Route::Pt(_))) {
            leg.route = None;
        }
    }
    plan.score = None;
}

/// Recomputes every route of the plan.
pub fn reroute(plan: &mut Plan, router: &LegRouter) {
    router.route_plan(plan, false);
    plan.score = None;
}

/// Drops the worst-scored plans other than the selected one until the
/// memory fits. Unscored plans are kept in preference to scored ones.
pub fn trim_memory(person: &mut Person, memory_size: usize) {
    while person.plans.len() > memory_size.max(1) {
        let mut worst: Option<usize> = None;
        for (i, p) in person.plans.iter().enumerate() {
            if i == person.selected {
                continue;
            }
            let score = p.score.unwrap_or(f64::INFINITY);
            let better = match worst {
                None => true,
                Some(w) => score < person.plans[w].score.unwrap_or(f64::INFINITY),
            };
            if better {
                worst = Some(i);
            }
        }
        let Some(w) = worst else { break };
        person.plans.remove(w);
        if w < person.selected {
            person.selected -= 1;
        }
    }
}

/// Applies one replanning step to a single person.
pub fn evolve_person(
    person: &mut Person,
    cfg: &StrategyConfig,
    router: &LegRouter,
    rng: &mut impl Rng,
) -> Result<(), ReplanningError> {
    if person.plans.is_empty() {
        return Err(ReplanningError::EmptyMemory);
    }
    let dist = WeightedIndex::new(cfg.weights).map_err(|_| ReplanningError::BadWeights(cfg.weights.iter().sum()))?;
    let mut strategy = Strategy::ALL[dist.sample(rng)];
    let has_legs = person.selected_plan().legs().next().is_some();
    let can_change_mode = has_legs && cfg.modes.len() > 1;
    if !has_legs || (strategy == Strategy::ChangeMode && !can_change_mode) {
        strategy = Strategy::SelectByScore;
    }
    if strategy == Strategy::SelectByScore {
        person.selected = select_plan(person, cfg.selection_beta, rng)?;
    } else {
        let mut copy = person.selected_plan().clone();
        match strategy {
            Strategy::ChangeMode => change_mode(&mut copy, &cfg.modes, rng)?,
            Strategy::MutateTimes => mutate_times(&mut copy, cfg.mutation_range, rng),
            Strategy::Reroute => copy.clear_routes(),
            Strategy::SelectByScore => unreachable!(),
        }
        reroute(&mut copy, router);
        person.plans.push(copy);
        person.selected = person.plans.len() - 1;
    }
    trim_memory(person, cfg.memory_size);
    Ok(())
}

/// One replanning pass over the population. Each person draws from their
/// own random stream, so the result does not depend on thread scheduling.
pub fn evolve(
    pop: &mut Population,
    cfg: &StrategyConfig,
    router: &LegRouter,
    seed: u64,
    iteration: u32,
) -> Result<(), ReplanningError> {
    cfg.validate()?;
    pop.persons.par_iter_mut().try_for_each(|(id, person)| {
        let mut rng = person_rng(seed, id, iteration);
        evolve_person(person, cfg, router, &mut rng)
    })
}
