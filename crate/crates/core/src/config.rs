//! Run configuration in the `<module name><param name value/></module>`
//! markup. A document parses to [`ConfigDocument`], a plain two-level
//! string map, and is then typed into [`RunConfig`] or [`MapperConfig`].

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use crate::drt::DrtConstraints;
use crate::mobsim::MobsimConfig;
use crate::population::Mode;
use crate::replanning::{Strategy, StrategyConfig};
use crate::scoring::{ModeParams, ScoringParams};
use crate::time::{format_hms, parse_hms, Time};
use crate::transit::{CostMetric, MapperParams, PtRouterParams};
use crate::xml::{self, XmlError};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error(transparent)]
    Xml(#[from] XmlError),
    #[error("unknown module '{name}'{}", hint(suggestion))]
    UnknownModule { name: String, suggestion: Option<String> },
    #[error("module '{module}': unknown param '{name}'{}", hint(suggestion))]
    UnknownParam {
        module: String,
        name: String,
        suggestion: Option<String>,
    },
    #[error("module '{module}', param '{param}': cannot read '{value}' as {expected}")]
    Type {
        module: String,
        param: String,
        value: String,
        expected: &'static str,
    },
    #[error("module '{module}', param '{param}': {message}")]
    Invalid { module: String, param: String, message: String },
    #[error("module '{module}': param '{param}' given twice")]
    Duplicate { module: String, param: String },
    #[error("module '{0}' given twice")]
    DuplicateModule(String),
    #[error("module '{module}': missing required param '{param}'")]
    Missing { module: String, param: String },
}

fn hint(s: &Option<String>) -> String {
    s.as_ref().map(|s| format!(" (did you mean '{s}'?)")).unwrap_or_default()
}

fn suggest<'a>(name: &str, known: impl IntoIterator<Item = &'a str>) -> Option<String> {
    known
        .into_iter()
        .map(|k| (strsim::levenshtein(&name.to_lowercase(), &k.to_lowercase()), k))
        .filter(|&(d, k)| d <= 3.max(k.len() / 3))
        .min()
        .map(|(_, k)| k.to_string())
}

/// Untyped module → param → value map.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigDocument {
    pub modules: BTreeMap<String, BTreeMap<String, String>>,
}

impl ConfigDocument {
    /// Accepts a `<config>` root holding modules, or a lone `<module>`.
    pub fn parse(src: &str) -> Result<Self, ConfigError> {
        let root = xml::parse(src)?;
        let modules: Vec<&xml::Element> = match root.name.as_str() {
            "module" => vec![&root],
            "config" => root.children_named("module").collect(),
            other => return Err(XmlError::new(root.line, format!("expected <config>, found <{other}>")).into()),
        };
        let mut doc = ConfigDocument::default();
        for m in modules {
            let name = m.req("name")?.to_string();
            if doc.modules.contains_key(&name) {
                return Err(ConfigError::DuplicateModule(name));
            }
            let mut params = BTreeMap::new();
            for p in m.children_named("param") {
                let key = p.req("name")?.to_string();
                let value = p.req("value")?.trim().to_string();
                if params.insert(key.clone(), value).is_some() {
                    return Err(ConfigError::Duplicate { module: name, param: key });
                }
            }
            doc.modules.insert(name, params);
        }
        Ok(doc)
    }

    pub fn to_xml(&self) -> String {
        let mut out = String::from(xml::HEADER);
        xml::open_tag(&mut out, 0, "config", &[]);
        for (name, params) in &self.modules {
            xml::open_tag(&mut out, 1, "module", &[("name", name.clone())]);
            for (k, v) in params {
                xml::empty_tag(&mut out, 2, "param", &[("name", k.clone()), ("value", v.clone())]);
            }
            xml::close_tag(&mut out, 1, "module");
        }
        xml::close_tag(&mut out, 0, "config");
        out
    }

    fn set(&mut self, module: &str, param: &str, value: impl ToString) {
        self.modules
            .entry(module.to_string())
            .or_default()
            .insert(param.to_string(), value.to_string());
    }
}

/// Typed access to one module's params; remembers which were read so the
/// rest can be reported as unknown.
struct Params<'a> {
    module: &'a str,
    values: Option<&'a BTreeMap<String, String>>,
    known: BTreeSet<String>,
}

impl<'a> Params<'a> {
    fn new(doc: &'a ConfigDocument, module: &'a str) -> Self {
        Params {
            module,
            values: doc.modules.get(module),
            known: BTreeSet::new(),
        }
    }

    fn raw(&mut self, name: &str) -> Option<&'a str> {
        self.known.insert(name.to_string());
        self.values?.get(name).map(String::as_str)
    }

    fn type_err(&self, name: &str, value: &str, expected: &'static str) -> ConfigError {
        ConfigError::Type {
            module: self.module.to_string(),
            param: name.to_string(),
            value: value.to_string(),
            expected,
        }
    }

    fn invalid(&self, name: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::Invalid {
            module: self.module.to_string(),
            param: name.to_string(),
            message: message.into(),
        }
    }

    fn parsed<T: std::str::FromStr>(&mut self, name: &str, expected: &'static str) -> Result<Option<T>, ConfigError> {
        match self.raw(name) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| self.type_err(name, v, expected)),
        }
    }

    fn f64(&mut self, name: &str, default: f64) -> Result<f64, ConfigError> {
        let v = self.parsed::<f64>(name, "a number")?.unwrap_or(default);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.invalid(name, "must be finite"))
        }
    }

    fn nonneg(&mut self, name: &str, default: f64) -> Result<f64, ConfigError> {
        let v = self.f64(name, default)?;
        if v < 0.0 {
            return Err(self.invalid(name, "must not be negative"));
        }
        Ok(v)
    }

    fn path(&mut self, name: &str) -> Option<PathBuf> {
        self.raw(name).filter(|v| !v.is_empty()).map(PathBuf::from)
    }

    /// Accepts `hh:mm:ss` or whole seconds.
    fn time(&mut self, name: &str, default: Time) -> Result<Time, ConfigError> {
        match self.raw(name) {
            None => Ok(default),
            Some(v) if v.contains(':') => parse_hms(v).map_err(|_| self.type_err(name, v, "a time of day")),
            Some(v) => v.parse().map_err(|_| self.type_err(name, v, "a time of day")),
        }
    }

    /// Params of the form `<prefix>_<suffix>`, marked as known.
    fn with_prefix(&mut self, prefix: &str) -> Vec<(String, &'a str)> {
        let Some(values) = self.values else { return Vec::new() };
        let head = format!("{prefix}_");
        let found: Vec<(String, &'a str)> = values
            .iter()
            .filter_map(|(k, v)| k.strip_prefix(&head).map(|s| (s.to_string(), v.as_str())))
            .collect();
        for (s, _) in &found {
            self.known.insert(format!("{head}{s}"));
        }
        found
    }

    fn finish(self, templates: &[&str]) -> Result<(), ConfigError> {
        let Some(values) = self.values else { return Ok(()) };
        for name in values.keys() {
            if !self.known.contains(name) {
                let candidates = self.known.iter().map(String::as_str).chain(templates.iter().copied());
                return Err(ConfigError::UnknownParam {
                    module: self.module.to_string(),
                    name: name.clone(),
                    suggestion: suggest(name, candidates),
                });
            }
        }
        Ok(())
    }
}

fn check_modules(doc: &ConfigDocument, known: &[&str]) -> Result<(), ConfigError> {
    for name in doc.modules.keys() {
        if !known.contains(&name.as_str()) {
            return Err(ConfigError::UnknownModule {
                name: name.clone(),
                suggestion: suggest(name, known.iter().copied()),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrtConfig {
    pub constraints: DrtConstraints,
    pub vehicles_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub iterations: u32,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub network_file: Option<PathBuf>,
    pub plans_file: Option<PathBuf>,
    pub schedule_file: Option<PathBuf>,
    pub vehicles_file: Option<PathBuf>,
    pub scoring: ScoringParams,
    pub strategy: StrategyConfig,
    pub pt_router: PtRouterParams,
    pub mobsim: MobsimConfig,
    /// Absent when the document has no `drt` module; DRT is then not offered.
    pub drt: Option<DrtConfig>,
}

const DEFAULT_SEED: u64 = 4711;

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            iterations: 10,
            seed: DEFAULT_SEED,
            output_dir: None,
            network_file: None,
            plans_file: None,
            schedule_file: None,
            vehicles_file: None,
            scoring: ScoringParams::default(),
            strategy: StrategyConfig::default(),
            pt_router: PtRouterParams::default(),
            mobsim: MobsimConfig {
                seed: DEFAULT_SEED,
                ..Default::default()
            },
            drt: None,
        }
    }
}

pub const RUN_MODULES: [&str; 8] = ["controller", "network", "plans", "transit", "planCalcScore", "strategy", "qsim", "drt"];

const DOOR_TO_DOOR: &str = "door2door";

fn mode_list(p: &Params, name: &str, raw: &str) -> Result<Vec<Mode>, ConfigError> {
    let mut modes = Vec::new();
    for token in raw.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let m: Mode = token.parse().map_err(|_| p.type_err(name, token, "a list of modes"))?;
        if !modes.contains(&m) {
            modes.push(m);
        }
    }
    Ok(modes)
}

impl RunConfig {
    pub fn parse(src: &str) -> Result<Self, ConfigError> {
        Self::from_document(&ConfigDocument::parse(src)?)
    }

    pub fn from_document(doc: &ConfigDocument) -> Result<Self, ConfigError> {
        check_modules(doc, &RUN_MODULES)?;
        let d = RunConfig::default();

        let mut p = Params::new(doc, "controller");
        let iterations = p.parsed("iterations", "a whole number")?.unwrap_or(d.iterations);
        let seed = p.parsed("randomSeed", "a whole number")?.unwrap_or(d.seed);
        let output_dir = p.path("outputDirectory");
        p.finish(&[])?;

        let mut p = Params::new(doc, "network");
        let network_file = p.path("inputNetworkFile");
        p.finish(&[])?;

        let mut p = Params::new(doc, "plans");
        let plans_file = p.path("inputPlansFile");
        p.finish(&[])?;

        let mut p = Params::new(doc, "transit");
        let schedule_file = p.path("transitScheduleFile");
        let vehicles_file = p.path("vehiclesFile");
        let pr = &d.pt_router;
        let pt_router = PtRouterParams {
            access_radius: p.nonneg("accessRadius", pr.access_radius)?,
            transfer_radius: p.nonneg("transferRadius", pr.transfer_radius)?,
            max_rides: p.parsed("maxRides", "a whole number")?.unwrap_or(pr.max_rides),
            ..pr.clone()
        };
        p.finish(&[])?;

        let scoring = Self::scoring(doc, &d.scoring)?;

        let mut p = Params::new(doc, "qsim");
        let dm = &d.mobsim;
        let walk_speed = p.f64("walkSpeed", dm.walk_speed)?;
        if walk_speed <= 0.0 {
            return Err(p.invalid("walkSpeed", "must be positive"));
        }
        let beeline_factor = p.f64("beelineFactor", dm.beeline_factor)?;
        if beeline_factor < 1.0 {
            return Err(p.invalid("beelineFactor", "must be at least 1"));
        }
        let min_dwell = p.time("minDwell", dm.min_dwell)?;
        let end_time = p.time("endTime", dm.end_time)?;
        p.finish(&[])?;

        let drt = match doc.modules.contains_key("drt") {
            false => None,
            true => {
                let mut p = Params::new(doc, "drt");
                let scheme = p.raw("operationalScheme").unwrap_or(DOOR_TO_DOOR);
                if scheme != DOOR_TO_DOOR {
                    return Err(p.invalid("operationalScheme", format!("only '{DOOR_TO_DOOR}' is supported, got '{scheme}'")));
                }
                let dc = DrtConstraints::default();
                let constraints = DrtConstraints {
                    stop_duration: p.nonneg("stopDuration", dc.stop_duration)?,
                    max_wait: p.nonneg("maxWaitTime", dc.max_wait)?,
                    alpha: p.nonneg("maxTravelTimeAlpha", dc.alpha)?,
                    beta: p.nonneg("maxTravelTimeBeta", dc.beta)?,
                };
                let vehicles_file = p.path("vehiclesFile");
                p.finish(&[])?;
                Some(DrtConfig { constraints, vehicles_file })
            }
        };

        let mut p = Params::new(doc, "strategy");
        let ds = &d.strategy;
        let mut weights = ds.weights;
        for s in Strategy::ALL {
            let name = format!("weight_{}", s.as_str());
            weights[s as usize] = p.nonneg(&name, ds.weight(s))?;
        }
        let mutation_range = p.time("mutationRange", ds.mutation_range)?;
        let selection_beta = p.f64("selectionBeta", ds.selection_beta)?;
        let memory_size = p.parsed("maxAgentPlanMemorySize", "a whole number")?.unwrap_or(ds.memory_size);
        let modes = match p.raw("modes") {
            Some(raw) => mode_list(&p, "modes", raw)?,
            None => {
                let mut m = ds.modes.clone();
                if drt.is_some() {
                    m.push(Mode::Drt);
                }
                m
            }
        };
        if modes.contains(&Mode::Drt) && drt.is_none() {
            return Err(p.invalid("modes", "drt is listed but there is no drt module"));
        }
        let strategy = StrategyConfig {
            weights,
            mutation_range,
            selection_beta,
            memory_size,
            modes,
        };
        strategy.validate().map_err(|e| p.invalid("weight_*", e.to_string()))?;
        p.finish(&[])?;

        let mobsim = MobsimConfig {
            seed,
            end_time,
            min_dwell,
            walk_speed,
            beeline_factor,
            drt: drt.as_ref().map_or(dm.drt, |c| c.constraints),
        };
        let pt_router = PtRouterParams {
            walk_speed,
            beeline_factor,
            ..pt_router
        };

        Ok(RunConfig {
            iterations,
            seed,
            output_dir,
            network_file,
            plans_file,
            schedule_file,
            vehicles_file,
            scoring,
            strategy,
            pt_router,
            mobsim,
            drt,
        })
    }

    fn scoring(doc: &ConfigDocument, d: &ScoringParams) -> Result<ScoringParams, ConfigError> {
        let mut p = Params::new(doc, "planCalcScore");
        let mut s = ScoringParams {
            perform_rate: p.f64("performing", d.perform_rate)?,
            late_penalty: p.f64("lateArrival", d.late_penalty)?,
            marginal_utility_of_money: p.f64("marginalUtilityOfMoney", d.marginal_utility_of_money)?,
            stuck_penalty: p.f64("stuckPenalty", d.stuck_penalty)?,
            ..d.clone()
        };
        for (kind, v) in p.with_prefix("typicalDuration") {
            let name = format!("typicalDuration_{kind}");
            let hours = parse_hours(v).ok_or_else(|| p.type_err(&name, v, "a duration"))?;
            if hours <= 0.0 {
                return Err(p.invalid(&name, "must be positive"));
            }
            s.typical_duration.insert(kind, hours);
        }
        for (kind, v) in p.with_prefix("latestArrival") {
            let name = format!("latestArrival_{kind}");
            let t = parse_hms(v).map_err(|_| p.type_err(&name, v, "a time of day"))?;
            s.latest_arrival.insert(kind, t);
        }
        for mode in Mode::ALL {
            let m = *d.mode(mode).unwrap_or(&ModeParams::with_travel_rate(0.0));
            let key = |prefix: &str| format!("{prefix}_{}", mode.as_str());
            s.modes.insert(
                mode,
                ModeParams {
                    travel_rate: p.f64(&key("marginalUtilityOfTraveling"), m.travel_rate)?,
                    dist_rate: p.f64(&key("marginalUtilityOfDistance"), m.dist_rate)?,
                    monetary_distance_rate: p.f64(&key("monetaryDistanceRate"), m.monetary_distance_rate)?,
                    constant: p.f64(&key("constant"), m.constant)?,
                },
            );
        }
        p.finish(&["typicalDuration_h", "latestArrival_w"])?;
        Ok(s)
    }

    /// Every param written out explicitly, so parsing the result gives back
    /// this config.
    pub fn to_document(&self) -> ConfigDocument {
        let mut doc = ConfigDocument::default();
        doc.set("controller", "iterations", self.iterations);
        doc.set("controller", "randomSeed", self.seed);
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        doc.set("controller", "outputDirectory", path(&self.output_dir));
        doc.set("network", "inputNetworkFile", path(&self.network_file));
        doc.set("plans", "inputPlansFile", path(&self.plans_file));
        doc.set("transit", "transitScheduleFile", path(&self.schedule_file));
        doc.set("transit", "vehiclesFile", path(&self.vehicles_file));
        doc.set("transit", "accessRadius", self.pt_router.access_radius);
        doc.set("transit", "transferRadius", self.pt_router.transfer_radius);
        doc.set("transit", "maxRides", self.pt_router.max_rides);

        let s = &self.scoring;
        let m = "planCalcScore";
        doc.set(m, "performing", s.perform_rate);
        doc.set(m, "lateArrival", s.late_penalty);
        doc.set(m, "marginalUtilityOfMoney", s.marginal_utility_of_money);
        doc.set(m, "stuckPenalty", s.stuck_penalty);
        for (kind, h) in &s.typical_duration {
            doc.set(m, &format!("typicalDuration_{kind}"), h);
        }
        for (kind, t) in &s.latest_arrival {
            doc.set(m, &format!("latestArrival_{kind}"), format_hms(*t));
        }
        for (mode, mp) in &s.modes {
            let k = mode.as_str();
            doc.set(m, &format!("marginalUtilityOfTraveling_{k}"), mp.travel_rate);
            doc.set(m, &format!("marginalUtilityOfDistance_{k}"), mp.dist_rate);
            doc.set(m, &format!("monetaryDistanceRate_{k}"), mp.monetary_distance_rate);
            doc.set(m, &format!("constant_{k}"), mp.constant);
        }

        let st = &self.strategy;
        for s in Strategy::ALL {
            doc.set("strategy", &format!("weight_{}", s.as_str()), st.weight(s));
        }
        doc.set("strategy", "mutationRange", st.mutation_range);
        doc.set("strategy", "selectionBeta", st.selection_beta);
        doc.set("strategy", "maxAgentPlanMemorySize", st.memory_size);
        let modes: Vec<&str> = st.modes.iter().map(|m| m.as_str()).collect();
        doc.set("strategy", "modes", modes.join(","));

        let q = &self.mobsim;
        doc.set("qsim", "walkSpeed", q.walk_speed);
        doc.set("qsim", "beelineFactor", q.beeline_factor);
        doc.set("qsim", "minDwell", q.min_dwell);
        doc.set("qsim", "endTime", format_hms(q.end_time));

        if let Some(drt) = &self.drt {
            let c = &drt.constraints;
            doc.set("drt", "operationalScheme", DOOR_TO_DOOR);
            doc.set("drt", "stopDuration", c.stop_duration);
            doc.set("drt", "maxWaitTime", c.max_wait);
            doc.set("drt", "maxTravelTimeAlpha", c.alpha);
            doc.set("drt", "maxTravelTimeBeta", c.beta);
            doc.set("drt", "vehiclesFile", path(&drt.vehicles_file));
        }
        doc
    }

    /// Makes relative file paths relative to `base`, the directory of the
    /// config document.
    pub fn resolve_paths(&mut self, base: &std::path::Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.output_dir);
        fix(&mut self.network_file);
        fix(&mut self.plans_file);
        fix(&mut self.schedule_file);
        fix(&mut self.vehicles_file);
        if let Some(drt) = &mut self.drt {
            fix(&mut drt.vehicles_file);
        }
    }
}

/// Hours as a plain number or `hh:mm:ss`.
fn parse_hours(v: &str) -> Option<f64> {
    if v.contains(':') {
        parse_hms(v).ok().map(|s| s as f64 / 3600.0)
    } else {
        v.parse().ok().filter(|h: &f64| h.is_finite())
    }
}

pub const MAPPER_MODULE: &str = "PublicTransitMapper";

/// Settings of the `map-schedule` command.
#[derive(Debug, Clone, PartialEq)]
pub struct MapperConfig {
    pub input_schedule: PathBuf,
    pub input_network: PathBuf,
    pub output_schedule: PathBuf,
    pub output_network: PathBuf,
    pub params: MapperParams,
}

impl Default for MapperConfig {
    fn default() -> Self {
        MapperConfig {
            input_schedule: "schedule.xml".into(),
            input_network: "network.xml".into(),
            output_schedule: "schedule_mapped.xml".into(),
            output_network: "network_mapped.xml".into(),
            params: MapperParams::default(),
        }
    }
}

impl MapperConfig {
    pub fn parse(src: &str) -> Result<Self, ConfigError> {
        let doc = ConfigDocument::parse(src)?;
        check_modules(&doc, &[MAPPER_MODULE])?;
        let mut p = Params::new(&doc, MAPPER_MODULE);
        let mut req = |name: &str| {
            p.path(name).ok_or_else(|| ConfigError::Missing {
                module: MAPPER_MODULE.into(),
                param: name.into(),
            })
        };
        let input_schedule = req("inputScheduleFile")?;
        let input_network = req("inputNetworkFile")?;
        let output_schedule = req("outputScheduleFile")?;
        let output_network = req("outputNetworkFile")?;
        let d = MapperParams::default();
        let cost = match p.raw("travelCostType") {
            None => d.cost,
            Some("travelTime") => CostMetric::TravelTime,
            Some("linkLength") => CostMetric::Length,
            Some(v) => return Err(p.type_err("travelCostType", v, "'travelTime' or 'linkLength'")),
        };
        let n_candidates = p.parsed("nLinkThreshold", "a whole number")?.unwrap_or(d.n_candidates);
        if n_candidates == 0 {
            return Err(p.invalid("nLinkThreshold", "must be at least 1"));
        }
        let params = MapperParams {
            n_candidates,
            max_candidate_distance: p.nonneg("maxLinkCandidateDistance", d.max_candidate_distance)?,
            cost,
            candidate_multiplier: p.nonneg("candidateCostMultiplier", d.candidate_multiplier)?,
            pt_mode: p.raw("modeToMap").unwrap_or(&d.pt_mode).to_string(),
            artificial_links: p.parsed("createArtificialLinks", "true or false")?.unwrap_or(d.artificial_links),
        };
        p.finish(&[])?;
        Ok(MapperConfig {
            input_schedule,
            input_network,
            output_schedule,
            output_network,
            params,
        })
    }

    pub fn to_xml(&self) -> String {
        let m = MAPPER_MODULE;
        let mut doc = ConfigDocument::default();
        doc.set(m, "inputScheduleFile", self.input_schedule.display());
        doc.set(m, "inputNetworkFile", self.input_network.display());
        doc.set(m, "outputScheduleFile", self.output_schedule.display());
        doc.set(m, "outputNetworkFile", self.output_network.display());
        let p = &self.params;
        doc.set(m, "nLinkThreshold", p.n_candidates);
        doc.set(m, "maxLinkCandidateDistance", p.max_candidate_distance);
        let cost = match p.cost {
            CostMetric::TravelTime => "travelTime",
            CostMetric::Length => "linkLength",
        };
        doc.set(m, "travelCostType", cost);
        doc.set(m, "candidateCostMultiplier", p.candidate_multiplier);
        doc.set(m, "modeToMap", &p.pt_mode);
        doc.set(m, "createArtificialLinks", p.artificial_links);
        doc.to_xml()
    }
}
