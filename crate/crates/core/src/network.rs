//! The multilayer intermodal graph: road, walking and transit layers joined
//! by mode-switching arcs.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("arc {index}: node index {node} out of range")]
    UnknownNode { index: usize, node: usize },
    #[error("arc {index}: {kind:?} arc cannot connect a {from:?} node to a {to:?} node")]
    LayerMismatch {
        index: usize,
        kind: ArcKindTag,
        from: Layer,
        to: Layer,
    },
    #[error("arc {index}: {message}")]
    InvalidArc { index: usize, message: String },
    #[error("graph is not strongly connected: node `{0}` cannot reach or be reached from every node")]
    NotStronglyConnected(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    Road,
    Walk,
    Transit,
}

/// Arc kind without its payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArcKindTag {
    Road,
    Walk,
    TransitLine,
    WalkToRoad,
    RoadToWalk,
    WalkToStation,
    StationToWalk,
}

impl ArcKindTag {
    fn endpoints(self) -> (Layer, Layer) {
        match self {
            ArcKindTag::Road => (Layer::Road, Layer::Road),
            ArcKindTag::Walk => (Layer::Walk, Layer::Walk),
            ArcKindTag::TransitLine => (Layer::Transit, Layer::Transit),
            ArcKindTag::WalkToRoad => (Layer::Walk, Layer::Road),
            ArcKindTag::RoadToWalk => (Layer::Road, Layer::Walk),
            ArcKindTag::WalkToStation => (Layer::Walk, Layer::Transit),
            ArcKindTag::StationToWalk => (Layer::Transit, Layer::Walk),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArcKind {
    /// Speed limit (m/s), capacity and exogenous baseline usage (veh/s).
    Road {
        speed_limit: f64,
        capacity: f64,
        baseline_usage: f64,
    },
    Walk,
    /// Scheduled in-vehicle time (s).
    TransitLine { scheduled_time: f64 },
    WalkToRoad,
    RoadToWalk,
    /// Baseline service frequency at the station (1/s).
    WalkToStation { baseline_frequency: f64 },
    StationToWalk,
}

impl ArcKind {
    pub fn tag(&self) -> ArcKindTag {
        match self {
            ArcKind::Road { .. } => ArcKindTag::Road,
            ArcKind::Walk => ArcKindTag::Walk,
            ArcKind::TransitLine { .. } => ArcKindTag::TransitLine,
            ArcKind::WalkToRoad => ArcKindTag::WalkToRoad,
            ArcKind::RoadToWalk => ArcKindTag::RoadToWalk,
            ArcKind::WalkToStation { .. } => ArcKindTag::WalkToStation,
            ArcKind::StationToWalk => ArcKindTag::StationToWalk,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub layer: Layer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arc {
    pub from: usize,
    pub to: usize,
    /// Meters.
    pub length: f64,
    pub kind: ArcKind,
}

impl Arc {
    pub fn is_road(&self) -> bool {
        matches!(self.kind, ArcKind::Road { .. })
    }

    pub fn speed_limit(&self) -> Option<f64> {
        match self.kind {
            ArcKind::Road { speed_limit, .. } => Some(speed_limit),
            _ => None,
        }
    }
}

/// Road, walking and transit nodes with typed arcs.
///
/// Arcs remember their index in the graph they were originally loaded into,
/// so flows on a pruned graph can be reported against the full network.
#[derive(Debug, Clone, PartialEq)]
pub struct MultilayerGraph {
    nodes: Vec<Node>,
    arcs: Vec<Arc>,
    source_ids: Vec<usize>,
    index: HashMap<String, usize>,
}

impl MultilayerGraph {
    /// Builds a graph and checks layer typing, arc attributes and strong
    /// connectivity.
    pub fn new(nodes: Vec<Node>, arcs: Vec<Arc>) -> Result<Self, NetworkError> {
        let g = Self::unchecked(nodes, arcs)?;
        g.check_arcs()?;
        g.check_strongly_connected()?;
        Ok(g)
    }

    /// Builds a graph checking only node-id uniqueness.
    pub fn unchecked(nodes: Vec<Node>, arcs: Vec<Arc>) -> Result<Self, NetworkError> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.id.clone(), i).is_some() {
                return Err(NetworkError::DuplicateNode(n.id.clone()));
            }
        }
        let source_ids = (0..arcs.len()).collect();
        Ok(MultilayerGraph {
            nodes,
            arcs,
            source_ids,
            index,
        })
    }

    /// Per-arc structural checks, in arc order.
    pub fn check_arcs(&self) -> Result<(), NetworkError> {
        for (i, arc) in self.arcs.iter().enumerate() {
            self.check_arc(i, arc)?;
        }
        Ok(())
    }

    /// Every per-arc violation, paired with the arc index.
    pub fn arc_errors(&self) -> Vec<(usize, NetworkError)> {
        self.arcs
            .iter()
            .enumerate()
            .filter_map(|(i, arc)| self.check_arc(i, arc).err().map(|e| (i, e)))
            .collect()
    }

    fn check_arc(&self, index: usize, arc: &Arc) -> Result<(), NetworkError> {
        for node in [arc.from, arc.to] {
            if node >= self.nodes.len() {
                return Err(NetworkError::UnknownNode { index, node });
            }
        }
        let tag = arc.kind.tag();
        let (from, to) = (self.nodes[arc.from].layer, self.nodes[arc.to].layer);
        if (from, to) != tag.endpoints() {
            return Err(NetworkError::LayerMismatch {
                index,
                kind: tag,
                from,
                to,
            });
        }
        let invalid = |message: String| Err(NetworkError::InvalidArc { index, message });
        if !(arc.length.is_finite() && arc.length >= 0.0) {
            return invalid(format!("length must be finite and non-negative, got {}", arc.length));
        }
        match arc.kind {
            ArcKind::Road {
                speed_limit,
                capacity,
                baseline_usage,
            } => {
                if !(speed_limit.is_finite() && speed_limit > 0.0) {
                    return invalid(format!("speed limit must be positive, got {speed_limit}"));
                }
                if !(capacity.is_finite() && capacity >= 0.0) {
                    return invalid(format!("capacity must be non-negative, got {capacity}"));
                }
                if !(baseline_usage.is_finite() && baseline_usage >= 0.0) {
                    return invalid(format!("baseline usage must be non-negative, got {baseline_usage}"));
                }
                if baseline_usage > capacity {
                    return invalid(format!(
                        "baseline usage {baseline_usage} exceeds capacity {capacity}"
                    ));
                }
            }
            ArcKind::TransitLine { scheduled_time } => {
                if !(scheduled_time.is_finite() && scheduled_time >= 0.0) {
                    return invalid(format!("scheduled time must be non-negative, got {scheduled_time}"));
                }
            }
            ArcKind::WalkToStation { baseline_frequency } => {
                if !(baseline_frequency.is_finite() && baseline_frequency > 0.0) {
                    return invalid(format!("station frequency must be positive, got {baseline_frequency}"));
                }
            }
            ArcKind::Walk | ArcKind::WalkToRoad | ArcKind::RoadToWalk | ArcKind::StationToWalk => {}
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    /// Index of arc `i` in the originally loaded graph.
    pub fn source_id(&self, i: usize) -> usize {
        self.source_ids[i]
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn num_road_arcs(&self) -> usize {
        self.arcs.iter().filter(|a| a.is_road()).count()
    }

    fn reach(&self, start: usize, forward: bool) -> Vec<bool> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for a in &self.arcs {
            if forward {
                adj[a.from].push(a.to);
            } else {
                adj[a.to].push(a.from);
            }
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }

    pub fn check_strongly_connected(&self) -> Result<(), NetworkError> {
        if self.nodes.is_empty() {
            return Ok(());
        }
        let fwd = self.reach(0, true);
        let bwd = self.reach(0, false);
        match (0..self.nodes.len()).find(|&i| !fwd[i] || !bwd[i]) {
            Some(i) => Err(NetworkError::NotStronglyConnected(self.nodes[i].id.clone())),
            None => Ok(()),
        }
    }

    pub fn is_strongly_connected(&self) -> bool {
        self.check_strongly_connected().is_ok()
    }

    /// Whether `to` can be reached from `from`.
    pub fn reachable(&self, from: usize, to: usize) -> bool {
        self.reach(from, true)[to]
    }
}

/// An origin-destination pair on the walking layer with a rate in customers/s.
#[derive(Debug, Clone, PartialEq)]
pub struct TravelRequest {
    pub origin: usize,
    pub destination: usize,
    pub rate: f64,
}

impl TravelRequest {
    pub fn validate(&self, g: &MultilayerGraph) -> Result<(), NetworkError> {
        let bad = |m: String| Err(NetworkError::InvalidParameter(m));
        for node in [self.origin, self.destination] {
            match g.nodes().get(node) {
                None => return bad(format!("request endpoint {node} does not exist")),
                Some(n) if n.layer != Layer::Walk => {
                    return bad(format!("request endpoint `{}` is not on the walking layer", n.id))
                }
                Some(_) => {}
            }
        }
        if self.origin == self.destination {
            return bad("request origin equals destination".into());
        }
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return bad(format!("request rate must be positive, got {}", self.rate));
        }
        Ok(())
    }
}

/// Speed-indexed energy table: (average speed m/s, energy J/m), linearly
/// interpolated and clamped at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveCycle {
    breakpoints: Vec<(f64, f64)>,
}

impl DriveCycle {
    pub fn new(breakpoints: Vec<(f64, f64)>) -> Result<Self, NetworkError> {
        if breakpoints.len() < 2 {
            return Err(NetworkError::InvalidParameter(
                "drive cycle needs at least two breakpoints".into(),
            ));
        }
        for w in breakpoints.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(NetworkError::InvalidParameter(format!(
                    "drive cycle speeds must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        if breakpoints
            .iter()
            .any(|&(v, e)| !v.is_finite() || !e.is_finite() || e < 0.0 || v < 0.0)
        {
            return Err(NetworkError::InvalidParameter(
                "drive cycle entries must be finite and non-negative".into(),
            ));
        }
        Ok(DriveCycle { breakpoints })
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    /// Energy per meter (J/m) at average speed `v`.
    pub fn energy_per_meter(&self, v: f64) -> f64 {
        let bp = &self.breakpoints;
        let (first, last) = (bp[0], bp[bp.len() - 1]);
        if v <= first.0 {
            return first.1;
        }
        if v >= last.0 {
            return last.1;
        }
        let k = bp.partition_point(|&(s, _)| s <= v);
        let (v0, e0) = bp[k - 1];
        let (v1, e1) = bp[k];
        e0 + (e1 - e0) * (v - v0) / (v1 - v0)
    }
}

/// Scenario-wide physical parameters, SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioParams {
    /// Fraction of the speed limit an AV must reach for an arc to be kept.
    pub speed_limit_fraction: f64,
    pub walking_speed: f64,
    /// Wait for an AMoD pickup when entering the road layer.
    pub walk_to_road_time: f64,
    pub road_to_walk_time: f64,
    /// Sidewalk-to-platform time, excluding the headway wait.
    pub walk_to_station_time: f64,
    pub station_to_walk_time: f64,
    /// kg CO2 per Joule.
    pub co2_per_joule: f64,
    pub drive_cycle: DriveCycle,
    pub seconds_per_month: f64,
}

pub const DEFAULT_SECONDS_PER_MONTH: f64 = 365.25 * 86_400.0 / 12.0;
pub const DEFAULT_WALKING_SPEED: f64 = 1.4;

impl ScenarioParams {
    pub fn validate(&self) -> Result<(), NetworkError> {
        let beta = self.speed_limit_fraction;
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(NetworkError::InvalidParameter(format!(
                "speed limit fraction must lie in (0, 1], got {beta}"
            )));
        }
        let positive = [
            ("walking speed", self.walking_speed),
            ("walk-to-road time", self.walk_to_road_time),
            ("road-to-walk time", self.road_to_walk_time),
            ("walk-to-station time", self.walk_to_station_time),
            ("station-to-walk time", self.station_to_walk_time),
            ("CO2 per Joule", self.co2_per_joule),
            ("seconds per month", self.seconds_per_month),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(NetworkError::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// One cell of the design grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    /// AV achievable speed, m/s.
    pub speed: f64,
    pub fleet_size: u32,
    /// Multiplier on the baseline train fleet and station frequencies.
    pub train_factor: f64,
}

/// Relative slack on the pruning comparison, so that boundary cases such as
/// `(1/1.3) * 65 mph == 50 mph` survive unit conversion round-off.
pub const PRUNE_REL_TOL: f64 = 1e-12;

/// Keeps road arcs with `v_a >= beta * v_L` (boundary kept); every other arc
/// is untouched. The result may lose strong connectivity.
pub fn prune_arcs(g: &MultilayerGraph, speed: f64, speed_limit_fraction: f64) -> MultilayerGraph {
    let mut arcs = Vec::with_capacity(g.arcs.len());
    let mut source_ids = Vec::with_capacity(g.arcs.len());
    for (i, arc) in g.arcs.iter().enumerate() {
        let keep = match arc.kind {
            ArcKind::Road { speed_limit, .. } => {
                speed >= speed_limit_fraction * speed_limit * (1.0 - PRUNE_REL_TOL)
            }
            _ => true,
        };
        if keep {
            arcs.push(arc.clone());
            source_ids.push(g.source_ids[i]);
        }
    }
    MultilayerGraph {
        nodes: g.nodes.clone(),
        arcs,
        source_ids,
        index: g.index.clone(),
    }
}

/// Station frequency per walk-to-station arc index: `factor * baseline`.
pub fn scale_frequencies(g: &MultilayerGraph, train_factor: f64) -> BTreeMap<usize, f64> {
    g.arcs
        .iter()
        .enumerate()
        .filter_map(|(i, a)| match a.kind {
            ArcKind::WalkToStation { baseline_frequency } => Some((i, train_factor * baseline_frequency)),
            _ => None,
        })
        .collect()
}

/// Effective AV speed on a road arc.
pub fn road_speed(arc: &Arc, speed: f64) -> Option<f64> {
    arc.speed_limit().map(|limit| speed.min(limit))
}

/// Traversal time in seconds, including the expected headway wait on
/// station entries.
pub fn arc_travel_time(
    arc: &Arc,
    speed: f64,
    frequency: Option<f64>,
    params: &ScenarioParams,
) -> Result<f64, NetworkError> {
    let t = match arc.kind {
        ArcKind::Road { speed_limit, .. } => arc.length / speed.min(speed_limit),
        ArcKind::Walk => arc.length / params.walking_speed,
        ArcKind::TransitLine { scheduled_time } => scheduled_time,
        ArcKind::WalkToStation { .. } => match frequency {
            Some(phi) if phi > 0.0 && phi.is_finite() => params.walk_to_station_time + 1.0 / (2.0 * phi),
            other => {
                return Err(NetworkError::InvalidParameter(format!(
                    "station frequency must be positive, got {other:?}"
                )))
            }
        },
        ArcKind::StationToWalk => params.station_to_walk_time,
        ArcKind::WalkToRoad => params.walk_to_road_time,
        ArcKind::RoadToWalk => params.road_to_walk_time,
    };
    Ok(t)
}

/// AV energy in Joules to traverse a road arc.
pub fn arc_energy(arc: &Arc, speed: f64, cycle: &DriveCycle) -> Result<f64, NetworkError> {
    let v = road_speed(arc, speed).ok_or_else(|| {
        NetworkError::InvalidArgument(format!("energy is defined for road arcs only, got {:?}", arc.kind.tag()))
    })?;
    Ok(cycle.energy_per_meter(v) * arc.length)
}
