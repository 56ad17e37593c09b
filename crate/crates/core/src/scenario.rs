//! Scenario files: a JSON document describing the network, demand,
//! parameters, catalogs and design grid, with explicit units on every
//! physical quantity.
//!
//! Loading collects every violation it can find rather than stopping at the
//! first, and reports each with its JSON path and source line.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::design::{SubwayCatalog, VehicleCatalog, VehicleRow};
use crate::engine::{CodesignProblem, DesignGrid};
use crate::network::{
    Arc, ArcKind, DriveCycle, Layer, MultilayerGraph, Node, ScenarioParams, TravelRequest,
    DEFAULT_SECONDS_PER_MONTH, DEFAULT_WALKING_SPEED,
};
use crate::units::{parse_number, parse_quantity, Dimension};

/// One problem found in a scenario file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub line: Option<usize>,
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.path.is_empty()) {
            (Some(l), false) => write!(f, "line {l}: {}: {}", self.path, self.message),
            (Some(l), true) => write!(f, "line {l}: {}", self.message),
            (None, false) => write!(f, "{}: {}", self.path, self.message),
            (None, true) => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{} violation(s):\n{}", .0.len(), .0.iter().map(|v| format!("  {v}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Violation>),
    #[error("unknown vehicle case `{0}`")]
    UnknownCase(String),
}

impl ScenarioError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            ScenarioError::Invalid(v) => v,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RawQuantity {
    Number(f64),
    Text(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default)]
    name: Option<String>,
    graph: RawGraph,
    demand: Vec<RawRequest>,
    params: RawParams,
    catalogs: RawCatalogs,
    grid: RawGrid,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGraph {
    nodes: Vec<RawNode>,
    arcs: Vec<RawArc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNode {
    id: String,
    layer: Layer,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawArc {
    Road {
        from: String,
        to: String,
        length: RawQuantity,
        speed_limit: RawQuantity,
        capacity: RawQuantity,
        /// A rate, or a percentage of capacity.
        baseline_usage: RawQuantity,
        #[serde(default)]
        bidirectional: bool,
    },
    Walk {
        from: String,
        to: String,
        length: RawQuantity,
        #[serde(default)]
        bidirectional: bool,
    },
    Transit {
        from: String,
        to: String,
        time: RawQuantity,
        #[serde(default)]
        length: Option<RawQuantity>,
        #[serde(default)]
        bidirectional: bool,
    },
    WalkToRoad {
        from: String,
        to: String,
    },
    RoadToWalk {
        from: String,
        to: String,
    },
    WalkToStation {
        from: String,
        to: String,
        frequency: RawQuantity,
    },
    StationToWalk {
        from: String,
        to: String,
    },
    /// Walk-to-road and road-to-walk switches between a pair of nodes.
    RoadAccess {
        walk: String,
        road: String,
    },
    /// Walk-to-station and station-to-walk switches between a pair of nodes.
    StationAccess {
        walk: String,
        station: String,
        frequency: RawQuantity,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRequest {
    origin: String,
    destination: String,
    rate: RawQuantity,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    speed_limit_fraction: RawQuantity,
    #[serde(default)]
    walking_speed: Option<RawQuantity>,
    walk_to_road_time: RawQuantity,
    road_to_walk_time: RawQuantity,
    walk_to_station_time: RawQuantity,
    #[serde(default)]
    station_to_walk_time: Option<RawQuantity>,
    co2_per_energy: RawQuantity,
    drive_cycle: Vec<RawCyclePoint>,
    #[serde(default)]
    seconds_per_month: Option<RawQuantity>,
    monetization_rate: RawQuantity,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCyclePoint {
    speed: RawQuantity,
    energy: RawQuantity,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCatalogs {
    vehicle_case: String,
    vehicle_cases: Vec<RawVehicleCatalog>,
    subway: RawSubway,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVehicleCatalog {
    name: String,
    vehicle_life: RawQuantity,
    #[serde(default)]
    vehicle_cost: Option<RawQuantity>,
    #[serde(default)]
    operational_cost: Option<RawQuantity>,
    rows: Vec<RawVehicleRow>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVehicleRow {
    speed: RawQuantity,
    automation_cost: RawQuantity,
    #[serde(default)]
    vehicle_cost: Option<RawQuantity>,
    #[serde(default)]
    operational_cost: Option<RawQuantity>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSubway {
    baseline_trains: u32,
    train_cost: RawQuantity,
    train_life: RawQuantity,
    emissions_per_train: RawQuantity,
    operational_costs: Vec<RawSubwayCost>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSubwayCost {
    factor: RawQuantity,
    cost: RawQuantity,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    #[serde(default)]
    speeds: Option<Vec<RawQuantity>>,
    fleet_sizes: RawFleetSizes,
    #[serde(default)]
    train_factors: Option<Vec<RawQuantity>>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawFleetSizes {
    List(Vec<u32>),
    Range { start: u32, stop: u32, step: u32 },
}

/// A validated scenario in SI units.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub graph: MultilayerGraph,
    pub requests: Vec<TravelRequest>,
    pub params: ScenarioParams,
    /// USD per kg CO2.
    pub monetization_rate: f64,
    pub vehicle_cases: Vec<(String, VehicleCatalog)>,
    pub default_case: String,
    pub subway: SubwayCatalog,
    grid_speeds: Option<Vec<f64>>,
    fleet_sizes: Vec<u32>,
    train_factors: Option<Vec<f64>>,
    /// SHA-256 over the graph, demand and parameter sections.
    pub network_hash: String,
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Scenario::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        let lines = locate::value_lines(text);
        let raw: RawScenario = serde_json::from_str(text).map_err(|e| {
            ScenarioError::Invalid(vec![Violation {
                line: Some(e.line()),
                path: String::new(),
                message: e.to_string(),
            }])
        })?;
        let hash = network_hash(text);
        let mut ctx = Ctx {
            lines: &lines,
            violations: Vec::new(),
        };
        let scenario = ctx.convert(raw, hash);
        match scenario {
            Some(s) if ctx.violations.is_empty() => Ok(s),
            _ => Err(ScenarioError::Invalid(ctx.violations)),
        }
    }

    pub fn vehicle_catalog(&self, case: Option<&str>) -> Result<(&str, &VehicleCatalog), ScenarioError> {
        let name = case.unwrap_or(&self.default_case);
        self.vehicle_cases
            .iter()
            .find(|(n, _)| n == name)
            .map(|(n, c)| (n.as_str(), c))
            .ok_or_else(|| ScenarioError::UnknownCase(name.to_string()))
    }

    /// The co-design problem using vehicle case `case` (default when `None`).
    pub fn problem(&self, case: Option<&str>) -> Result<CodesignProblem, ScenarioError> {
        let (_, vehicles) = self.vehicle_catalog(case)?;
        Ok(CodesignProblem {
            graph: self.graph.clone(),
            requests: self.requests.clone(),
            params: self.params.clone(),
            vehicles: vehicles.clone(),
            subway: self.subway.clone(),
        })
    }

    /// The design grid; omitted axes default to the catalogs' menus.
    pub fn grid(&self, case: Option<&str>) -> Result<DesignGrid, ScenarioError> {
        let (_, vehicles) = self.vehicle_catalog(case)?;
        let speeds = self.grid_speeds.clone().unwrap_or_else(|| vehicles.speeds());
        let factors = self.train_factors.clone().unwrap_or_else(|| self.subway.factors());
        DesignGrid::new(speeds, self.fleet_sizes.clone(), factors).map_err(|e| {
            ScenarioError::Invalid(vec![Violation {
                line: None,
                path: "grid".into(),
                message: e.to_string(),
            }])
        })
    }
}

fn network_hash(text: &str) -> String {
    let value: serde_json::Value = serde_json::from_str(text).unwrap_or(serde_json::Value::Null);
    let mut hasher = Sha256::new();
    for section in ["graph", "demand", "params"] {
        let canonical = serde_json::to_string(&value[section]).unwrap_or_default();
        hasher.update(section.as_bytes());
        hasher.update(canonical.as_bytes());
    }
    hex::encode(hasher.finalize())
}

struct Ctx<'a> {
    lines: &'a HashMap<String, usize>,
    violations: Vec<Violation>,
}

impl Ctx<'_> {
    fn line_of(&self, path: &str) -> Option<usize> {
        let mut p = path;
        loop {
            if let Some(&l) = self.lines.get(p) {
                return Some(l);
            }
            match p.rfind(['.', '[']) {
                Some(i) => p = &p[..i],
                None => return self.lines.get("").copied(),
            }
        }
    }

    fn err(&mut self, path: &str, message: impl Into<String>) {
        self.violations.push(Violation {
            line: self.line_of(path),
            path: path.to_string(),
            message: message.into(),
        });
    }

    fn quantity(&mut self, raw: &RawQuantity, dim: Dimension, path: &str) -> Option<f64> {
        let parsed = match raw {
            RawQuantity::Number(v) if dim == Dimension::Dimensionless => Ok(*v),
            RawQuantity::Number(v) => parse_quantity(&v.to_string(), dim),
            RawQuantity::Text(s) => parse_quantity(s, dim),
        };
        match parsed {
            Ok(v) => Some(v),
            Err(e) => {
                self.err(path, e.to_string());
                None
            }
        }
    }

    fn positive(&mut self, raw: &RawQuantity, dim: Dimension, path: &str) -> Option<f64> {
        let v = self.quantity(raw, dim, path)?;
        if v > 0.0 {
            Some(v)
        } else {
            self.err(path, format!("must be positive, got {v}"));
            None
        }
    }

    fn non_negative(&mut self, raw: &RawQuantity, dim: Dimension, path: &str) -> Option<f64> {
        let v = self.quantity(raw, dim, path)?;
        if v >= 0.0 {
            Some(v)
        } else {
            self.err(path, format!("must be non-negative, got {v}"));
            None
        }
    }

    fn node(&mut self, index: &HashMap<&str, usize>, id: &str, path: &str) -> Option<usize> {
        let found = index.get(id).copied();
        if found.is_none() {
            self.err(path, format!("unknown node `{id}`"));
        }
        found
    }

    fn convert(&mut self, raw: RawScenario, network_hash: String) -> Option<Scenario> {
        let graph = self.graph(&raw.graph);
        let requests = graph.as_ref().map(|g| self.requests(&raw.demand, g));
        let params = self.params(&raw.params);
        let monetization_rate = self.non_negative(
            &raw.params.monetization_rate,
            Dimension::MoneyPerMass,
            "params.monetization_rate",
        );
        let (cases, default_case, subway) = self.catalogs(&raw.catalogs);
        let (grid_speeds, fleet_sizes, train_factors) = self.grid(&raw.grid);

        let scenario = Scenario {
            name: raw.name.unwrap_or_else(|| "scenario".into()),
            graph: graph?,
            requests: requests?,
            params: params?,
            monetization_rate: monetization_rate?,
            vehicle_cases: cases?,
            default_case: default_case?,
            subway: subway?,
            grid_speeds,
            fleet_sizes,
            train_factors,
            network_hash,
        };
        for (name, _) in &scenario.vehicle_cases {
            match scenario.grid(Some(name)) {
                Ok(grid) => {
                    if let Err(e) = grid.check_catalogs(scenario.vehicle_catalog(Some(name)).ok()?.1, &scenario.subway) {
                        self.err("grid", format!("vehicle case `{name}`: {e}"));
                    }
                }
                Err(e) => self.violations.extend(e.violations().iter().cloned()),
            }
        }
        Some(scenario)
    }

    fn graph(&mut self, raw: &RawGraph) -> Option<MultilayerGraph> {
        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut nodes = Vec::with_capacity(raw.nodes.len());
        for (i, n) in raw.nodes.iter().enumerate() {
            if index.insert(n.id.as_str(), i).is_some() {
                self.err(&format!("graph.nodes[{i}].id"), format!("duplicate node id `{}`", n.id));
            }
            nodes.push(Node {
                id: n.id.clone(),
                layer: n.layer,
            });
        }
        let before = self.violations.len();
        let mut arcs = Vec::new();
        let mut arc_paths = Vec::new();
        for (i, raw_arc) in raw.arcs.iter().enumerate() {
            let path = format!("graph.arcs[{i}]");
            for arc in self.arc(raw_arc, &index, &path) {
                arcs.push(arc);
                arc_paths.push(path.clone());
            }
        }
        if self.violations.len() > before {
            return None;
        }
        let graph = match MultilayerGraph::unchecked(nodes, arcs) {
            Ok(g) => g,
            Err(e) => {
                self.err("graph.nodes", e.to_string());
                return None;
            }
        };
        let arc_errors = graph.arc_errors();
        for (i, e) in &arc_errors {
            self.err(&arc_paths[*i], e.to_string());
        }
        if !arc_errors.is_empty() {
            return None;
        }
        if let Err(e) = graph.check_strongly_connected() {
            self.err("graph", e.to_string());
            return None;
        }
        Some(graph)
    }

    fn arc(&mut self, raw: &RawArc, index: &HashMap<&str, usize>, path: &str) -> Vec<Arc> {
        let mut out = Vec::new();
        let mut push = |from: Option<usize>, to: Option<usize>, length: Option<f64>, kind: Option<ArcKind>, both: bool| {
            if let (Some(from), Some(to), Some(length), Some(kind)) = (from, to, length, kind) {
                out.push(Arc { from, to, length, kind });
                if both {
                    out.push(Arc { from: to, to: from, length, kind });
                }
            }
        };
        let ends = |ctx: &mut Self, from: &str, to: &str| {
            (
                ctx.node(index, from, &format!("{path}.from")),
                ctx.node(index, to, &format!("{path}.to")),
            )
        };
        match raw {
            RawArc::Road {
                from,
                to,
                length,
                speed_limit,
                capacity,
                baseline_usage,
                bidirectional,
            } => {
                let (f, t) = ends(self, from, to);
                let length = self.non_negative(length, Dimension::Length, &format!("{path}.length"));
                let speed_limit = self.positive(speed_limit, Dimension::Speed, &format!("{path}.speed_limit"));
                let capacity = self.non_negative(capacity, Dimension::PerTime, &format!("{path}.capacity"));
                let usage_path = format!("{path}.baseline_usage");
                let usage = match (baseline_usage, capacity) {
                    (RawQuantity::Text(s), Some(c)) if s.trim_end().ends_with('%') => {
                        self.non_negative(baseline_usage, Dimension::Dimensionless, &usage_path).map(|frac| frac * c)
                    }
                    _ => self.non_negative(baseline_usage, Dimension::PerTime, &usage_path),
                };
                let kind = match (speed_limit, capacity, usage) {
                    (Some(speed_limit), Some(capacity), Some(baseline_usage)) => Some(ArcKind::Road {
                        speed_limit,
                        capacity,
                        baseline_usage,
                    }),
                    _ => None,
                };
                push(f, t, length, kind, *bidirectional);
            }
            RawArc::Walk {
                from,
                to,
                length,
                bidirectional,
            } => {
                let (f, t) = ends(self, from, to);
                let length = self.non_negative(length, Dimension::Length, &format!("{path}.length"));
                push(f, t, length, Some(ArcKind::Walk), *bidirectional);
            }
            RawArc::Transit {
                from,
                to,
                time,
                length,
                bidirectional,
            } => {
                let (f, t) = ends(self, from, to);
                let time = self.non_negative(time, Dimension::Time, &format!("{path}.time"));
                let length = match length {
                    Some(l) => self.non_negative(l, Dimension::Length, &format!("{path}.length")),
                    None => Some(0.0),
                };
                push(f, t, length, time.map(|scheduled_time| ArcKind::TransitLine { scheduled_time }), *bidirectional);
            }
            RawArc::WalkToRoad { from, to } => {
                let (f, t) = ends(self, from, to);
                push(f, t, Some(0.0), Some(ArcKind::WalkToRoad), false);
            }
            RawArc::RoadToWalk { from, to } => {
                let (f, t) = ends(self, from, to);
                push(f, t, Some(0.0), Some(ArcKind::RoadToWalk), false);
            }
            RawArc::WalkToStation { from, to, frequency } => {
                let (f, t) = ends(self, from, to);
                let freq = self.positive(frequency, Dimension::PerTime, &format!("{path}.frequency"));
                push(f, t, Some(0.0), freq.map(|baseline_frequency| ArcKind::WalkToStation { baseline_frequency }), false);
            }
            RawArc::StationToWalk { from, to } => {
                let (f, t) = ends(self, from, to);
                push(f, t, Some(0.0), Some(ArcKind::StationToWalk), false);
            }
            RawArc::RoadAccess { walk, road } => {
                let w = self.node(index, walk, &format!("{path}.walk"));
                let r = self.node(index, road, &format!("{path}.road"));
                push(w, r, Some(0.0), Some(ArcKind::WalkToRoad), false);
                push(r, w, Some(0.0), Some(ArcKind::RoadToWalk), false);
            }
            RawArc::StationAccess {
                walk,
                station,
                frequency,
            } => {
                let w = self.node(index, walk, &format!("{path}.walk"));
                let s = self.node(index, station, &format!("{path}.station"));
                let freq = self.positive(frequency, Dimension::PerTime, &format!("{path}.frequency"));
                push(w, s, Some(0.0), freq.map(|baseline_frequency| ArcKind::WalkToStation { baseline_frequency }), false);
                push(s, w, Some(0.0), Some(ArcKind::StationToWalk), false);
            }
        }
        out
    }

    fn requests(&mut self, raw: &[RawRequest], g: &MultilayerGraph) -> Vec<TravelRequest> {
        if raw.is_empty() {
            self.err("demand", "demand is empty");
        }
        let mut out = Vec::new();
        for (i, r) in raw.iter().enumerate() {
            let path = format!("demand[{i}]");
            let endpoint = |ctx: &mut Self, id: &str, field: &str| {
                let p = format!("{path}.{field}");
                match g.node_index(id) {
                    None => {
                        ctx.err(&p, format!("unknown node `{id}`"));
                        None
                    }
                    Some(n) if g.nodes()[n].layer != Layer::Walk => {
                        ctx.err(&p, format!("node `{id}` is not on the walking layer"));
                        None
                    }
                    Some(n) => Some(n),
                }
            };
            let origin = endpoint(self, &r.origin, "origin");
            let destination = endpoint(self, &r.destination, "destination");
            let rate = self.positive(&r.rate, Dimension::PerTime, &format!("{path}.rate"));
            if let (Some(o), Some(d)) = (origin, destination) {
                if o == d {
                    self.err(&path, "origin equals destination");
                    continue;
                }
            }
            if let (Some(origin), Some(destination), Some(rate)) = (origin, destination, rate) {
                out.push(TravelRequest {
                    origin,
                    destination,
                    rate,
                });
            }
        }
        out
    }

    fn params(&mut self, raw: &RawParams) -> Option<ScenarioParams> {
        let beta = self.positive(&raw.speed_limit_fraction, Dimension::Dimensionless, "params.speed_limit_fraction");
        if let Some(b) = beta {
            if b > 1.0 {
                self.err("params.speed_limit_fraction", format!("must not exceed 1, got {b}"));
            }
        }
        let walking_speed = match &raw.walking_speed {
            Some(q) => self.positive(q, Dimension::Speed, "params.walking_speed"),
            None => Some(DEFAULT_WALKING_SPEED),
        };
        let t_wr = self.positive(&raw.walk_to_road_time, Dimension::Time, "params.walk_to_road_time");
        let t_rw = self.positive(&raw.road_to_walk_time, Dimension::Time, "params.road_to_walk_time");
        let t_ws = self.positive(&raw.walk_to_station_time, Dimension::Time, "params.walk_to_station_time");
        let t_sw = match &raw.station_to_walk_time {
            Some(q) => self.positive(q, Dimension::Time, "params.station_to_walk_time"),
            None => t_ws,
        };
        let gamma = self.positive(&raw.co2_per_energy, Dimension::MassPerEnergy, "params.co2_per_energy");
        let mut points = Vec::new();
        for (i, p) in raw.drive_cycle.iter().enumerate() {
            let speed = self.non_negative(&p.speed, Dimension::Speed, &format!("params.drive_cycle[{i}].speed"));
            let energy = self.non_negative(&p.energy, Dimension::EnergyPerLength, &format!("params.drive_cycle[{i}].energy"));
            if let (Some(s), Some(e)) = (speed, energy) {
                points.push((s, e));
            }
        }
        let cycle = if points.len() == raw.drive_cycle.len() {
            match DriveCycle::new(points) {
                Ok(c) => Some(c),
                Err(e) => {
                    self.err("params.drive_cycle", e.to_string());
                    None
                }
            }
        } else {
            None
        };
        let seconds_per_month = match &raw.seconds_per_month {
            Some(q) => self.positive(q, Dimension::Time, "params.seconds_per_month"),
            None => Some(DEFAULT_SECONDS_PER_MONTH),
        };
        Some(ScenarioParams {
            speed_limit_fraction: beta.filter(|b| *b <= 1.0)?,
            walking_speed: walking_speed?,
            walk_to_road_time: t_wr?,
            road_to_walk_time: t_rw?,
            walk_to_station_time: t_ws?,
            station_to_walk_time: t_sw?,
            co2_per_joule: gamma?,
            drive_cycle: cycle?,
            seconds_per_month: seconds_per_month?,
        })
    }

    #[allow(clippy::type_complexity)]
    fn catalogs(
        &mut self,
        raw: &RawCatalogs,
    ) -> (Option<Vec<(String, VehicleCatalog)>>, Option<String>, Option<SubwayCatalog>) {
        let mut cases = Vec::new();
        let mut ok = true;
        for (i, c) in raw.vehicle_cases.iter().enumerate() {
            let path = format!("catalogs.vehicle_cases[{i}]");
            if cases.iter().any(|(n, _): &(String, VehicleCatalog)| n == &c.name) {
                self.err(&format!("{path}.name"), format!("duplicate vehicle case `{}`", c.name));
                ok = false;
                continue;
            }
            let life = self.positive(&c.vehicle_life, Dimension::Years, &format!("{path}.vehicle_life"));
            let default_vehicle = c
                .vehicle_cost
                .as_ref()
                .map(|q| self.non_negative(q, Dimension::Money, &format!("{path}.vehicle_cost")));
            let default_op = c
                .operational_cost
                .as_ref()
                .map(|q| self.non_negative(q, Dimension::MoneyPerLength, &format!("{path}.operational_cost")));
            let mut rows = Vec::new();
            for (j, r) in c.rows.iter().enumerate() {
                let rp = format!("{path}.rows[{j}]");
                let speed = self.positive(&r.speed, Dimension::Speed, &format!("{rp}.speed"));
                let automation = self.non_negative(&r.automation_cost, Dimension::Money, &format!("{rp}.automation_cost"));
                let vehicle = match &r.vehicle_cost {
                    Some(q) => self.non_negative(q, Dimension::Money, &format!("{rp}.vehicle_cost")),
                    None => default_vehicle.flatten().or_else(|| {
                        if default_vehicle.is_none() {
                            self.err(&rp, "vehicle_cost missing on row and catalog");
                        }
                        None
                    }),
                };
                let op = match &r.operational_cost {
                    Some(q) => self.non_negative(q, Dimension::MoneyPerLength, &format!("{rp}.operational_cost")),
                    None => default_op.flatten().or_else(|| {
                        if default_op.is_none() {
                            self.err(&rp, "operational_cost missing on row and catalog");
                        }
                        None
                    }),
                };
                match (speed, automation, vehicle, op) {
                    (Some(speed), Some(automation_cost), Some(vehicle_cost), Some(operational_cost)) => {
                        rows.push(VehicleRow {
                            speed,
                            vehicle_cost,
                            automation_cost,
                            operational_cost,
                        })
                    }
                    _ => ok = false,
                }
            }
            let Some(life) = life else {
                ok = false;
                continue;
            };
            if !ok {
                continue;
            }
            match VehicleCatalog::new(rows, life) {
                Ok(cat) => cases.push((c.name.clone(), cat)),
                Err(e) => {
                    self.err(&path, e.to_string());
                    ok = false;
                }
            }
        }
        if raw.vehicle_cases.is_empty() {
            self.err("catalogs.vehicle_cases", "at least one vehicle case is required");
            ok = false;
        }
        let default_case = if raw.vehicle_cases.iter().any(|c| c.name == raw.vehicle_case) {
            Some(raw.vehicle_case.clone())
        } else {
            self.err("catalogs.vehicle_case", format!("unknown vehicle case `{}`", raw.vehicle_case));
            None
        };

        let s = &raw.subway;
        let train_cost = self.non_negative(&s.train_cost, Dimension::Money, "catalogs.subway.train_cost");
        let train_life = self.positive(&s.train_life, Dimension::Years, "catalogs.subway.train_life");
        let emissions = self.non_negative(&s.emissions_per_train, Dimension::MassPerYear, "catalogs.subway.emissions_per_train");
        let mut table = Vec::new();
        for (i, row) in s.operational_costs.iter().enumerate() {
            let p = format!("catalogs.subway.operational_costs[{i}]");
            let factor = self.factor(&row.factor, &format!("{p}.factor"));
            let cost = self.non_negative(&row.cost, Dimension::MoneyPerYear, &format!("{p}.cost"));
            if let (Some(f), Some(c)) = (factor, cost) {
                table.push((f, c));
            }
        }
        let subway = match (train_cost, train_life, emissions) {
            (Some(tc), Some(tl), Some(em)) if table.len() == s.operational_costs.len() => {
                match SubwayCatalog::new(s.baseline_trains, tc, tl, em, table) {
                    Ok(cat) => Some(cat),
                    Err(e) => {
                        self.err("catalogs.subway", e.to_string());
                        None
                    }
                }
            }
            _ => None,
        };
        (ok.then_some(cases), default_case, subway)
    }

    fn factor(&mut self, raw: &RawQuantity, path: &str) -> Option<f64> {
        let v = match raw {
            RawQuantity::Number(v) => Ok(*v),
            RawQuantity::Text(s) => parse_number(s),
        };
        match v {
            Ok(f) if f >= 1.0 => Some(f),
            Ok(f) => {
                self.err(path, format!("train factor must be at least 1, got {f}"));
                None
            }
            Err(e) => {
                self.err(path, e.to_string());
                None
            }
        }
    }

    fn grid(&mut self, raw: &RawGrid) -> (Option<Vec<f64>>, Vec<u32>, Option<Vec<f64>>) {
        let speeds = raw.speeds.as_ref().map(|list| {
            list.iter()
                .enumerate()
                .filter_map(|(i, q)| self.positive(q, Dimension::Speed, &format!("grid.speeds[{i}]")))
                .collect()
        });
        let fleet = match &raw.fleet_sizes {
            RawFleetSizes::List(v) => v.clone(),
            RawFleetSizes::Range { start, stop, step } => {
                if *step == 0 || stop < start {
                    self.err("grid.fleet_sizes", "range needs step > 0 and stop >= start");
                    Vec::new()
                } else {
                    (*start..=*stop).step_by(*step as usize).collect()
                }
            }
        };
        let factors = raw.train_factors.as_ref().map(|list| {
            list.iter()
                .enumerate()
                .filter_map(|(i, q)| self.factor(q, &format!("grid.train_factors[{i}]")))
                .collect()
        });
        (speeds, fleet, factors)
    }
}

/// Maps JSON value paths (`a.b[2].c`) to the 1-based line where each value
/// starts. Tolerant: stops quietly on malformed input.
mod locate {
    use std::collections::HashMap;

    pub fn value_lines(text: &str) -> HashMap<String, usize> {
        let mut s = Scanner {
            bytes: text.as_bytes(),
            pos: 0,
            line: 1,
            out: HashMap::new(),
        };
        s.value(String::new());
        s.out
    }

    struct Scanner<'a> {
        bytes: &'a [u8],
        pos: usize,
        line: usize,
        out: HashMap<String, usize>,
    }

    impl Scanner<'_> {
        fn peek(&self) -> Option<u8> {
            self.bytes.get(self.pos).copied()
        }

        fn skip_ws(&mut self) {
            while let Some(b) = self.peek() {
                match b {
                    b'\n' => self.line += 1,
                    b' ' | b'\t' | b'\r' => {}
                    _ => break,
                }
                self.pos += 1;
            }
        }

        fn string(&mut self) -> Option<String> {
            if self.peek()? != b'"' {
                return None;
            }
            self.pos += 1;
            let mut buf = Vec::new();
            loop {
                let b = self.peek()?;
                self.pos += 1;
                match b {
                    b'"' => return Some(String::from_utf8_lossy(&buf).into_owned()),
                    b'\\' => {
                        buf.push(self.peek()?);
                        self.pos += 1;
                    }
                    b'\n' => {
                        self.line += 1;
                        buf.push(b);
                    }
                    _ => buf.push(b),
                }
            }
        }

        fn value(&mut self, path: String) -> Option<()> {
            self.skip_ws();
            self.out.insert(path.clone(), self.line);
            match self.peek()? {
                b'{' => {
                    self.pos += 1;
                    loop {
                        self.skip_ws();
                        if self.peek()? == b'}' {
                            self.pos += 1;
                            return Some(());
                        }
                        let key = self.string()?;
                        self.skip_ws();
                        if self.peek()? != b':' {
                            return None;
                        }
                        self.pos += 1;
                        let child = if path.is_empty() { key } else { format!("{path}.{key}") };
                        self.value(child)?;
                        self.skip_ws();
                        match self.peek()? {
                            b',' => self.pos += 1,
                            b'}' => {
                                self.pos += 1;
                                return Some(());
                            }
                            _ => return None,
                        }
                    }
                }
                b'[' => {
                    self.pos += 1;
                    let mut i = 0;
                    loop {
                        self.skip_ws();
                        if self.peek()? == b']' {
                            self.pos += 1;
                            return Some(());
                        }
                        self.value(format!("{path}[{i}]"))?;
                        i += 1;
                        self.skip_ws();
                        match self.peek()? {
                            b',' => self.pos += 1,
                            b']' => {
                                self.pos += 1;
                                return Some(());
                            }
                            _ => return None,
                        }
                    }
                }
                b'"' => self.string().map(|_| ()),
                _ => {
                    while let Some(b) = self.peek() {
                        if matches!(b, b',' | b']' | b'}' | b' ' | b'\t' | b'\r' | b'\n') {
                            break;
                        }
                        self.pos += 1;
                    }
                    Some(())
                }
            }
        }
    }

}
