//! The intermodal AMoD flow problem for one design point.
//!
//! Customer flows are one commodity per travel request over every arc;
//! rebalancing (empty vehicle) flow lives on road arcs only. The problem
//! minimizes average travel time subject to customer conservation, vehicle
//! conservation on road nodes, the road capacity threshold and the fleet
//! size. Ties in travel time are broken towards the lowest AV mileage by a
//! second solve.

use thiserror::Error;

use crate::lp::{solve_lp, LinearProgram, LpError, LpStatus};
use crate::network::{
    arc_energy, arc_travel_time, prune_arcs, scale_frequencies, ArcKind, DesignPoint,
    MultilayerGraph, NetworkError, ScenarioParams, TravelRequest,
};

/// Relative and absolute slack on the optimal travel time in the mileage stage.
pub const TIE_BREAK_REL_TOL: f64 = 1e-9;
pub const TIE_BREAK_ABS_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("demand is empty: average travel time is undefined")]
    EmptyDemand,
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("LP solver failed: {0}")]
    Solver(#[from] LpError),
    #[error("travel-time LP reported unbounded, which non-negative times rule out")]
    Unbounded,
}

/// A design point applied to the network: pruned arcs plus per-arc times
/// and energies.
#[derive(Debug, Clone)]
pub struct DesignNetwork {
    pub graph: MultilayerGraph,
    pub design: DesignPoint,
    /// Seconds, indexed like `graph.arcs()`.
    pub times: Vec<f64>,
    /// Joules on road arcs, zero elsewhere.
    pub energies: Vec<f64>,
}

impl DesignNetwork {
    pub fn build(
        base: &MultilayerGraph,
        design: &DesignPoint,
        params: &ScenarioParams,
    ) -> Result<Self, FlowError> {
        if !(design.speed.is_finite() && design.speed > 0.0) {
            return Err(NetworkError::InvalidParameter(format!(
                "AV speed must be positive, got {}",
                design.speed
            ))
            .into());
        }
        let graph = prune_arcs(base, design.speed, params.speed_limit_fraction);
        let freqs = scale_frequencies(&graph, design.train_factor);
        let mut times = Vec::with_capacity(graph.arcs().len());
        let mut energies = Vec::with_capacity(graph.arcs().len());
        for (i, arc) in graph.arcs().iter().enumerate() {
            times.push(arc_travel_time(arc, design.speed, freqs.get(&i).copied(), params)?);
            energies.push(if arc.is_road() {
                arc_energy(arc, design.speed, &params.drive_cycle)?
            } else {
                0.0
            });
        }
        Ok(DesignNetwork {
            graph,
            design: *design,
            times,
            energies,
        })
    }

    pub fn road_arcs(&self) -> Vec<usize> {
        (0..self.graph.arcs().len())
            .filter(|&i| self.graph.arcs()[i].is_road())
            .collect()
    }
}

/// The assembled LP together with its variable layout.
#[derive(Debug, Clone)]
pub struct IamodLp {
    pub lp: LinearProgram,
    pub num_arcs: usize,
    pub num_requests: usize,
    /// Arc index of each rebalancing variable.
    pub road_arcs: Vec<usize>,
    pub total_rate: f64,
}

impl IamodLp {
    pub fn customer_var(&self, request: usize, arc: usize) -> usize {
        request * self.num_arcs + arc
    }

    pub fn rebalancing_var(&self, k: usize) -> usize {
        self.num_requests * self.num_arcs + k
    }

    pub fn num_vars(&self) -> usize {
        self.num_requests * self.num_arcs + self.road_arcs.len()
    }

    /// Vehicles on road arc `arc`: coefficient vector of rebalancing plus
    /// every customer flow.
    fn add_road_total(&self, row: &mut [f64], k: usize, arc: usize, coeff: f64) {
        for m in 0..self.num_requests {
            row[self.customer_var(m, arc)] += coeff;
        }
        row[self.rebalancing_var(k)] += coeff;
    }

    /// Coefficients of the average-travel-time objective.
    fn travel_time_row(&self, net: &DesignNetwork) -> Vec<f64> {
        let mut c = vec![0.0; self.num_vars()];
        for m in 0..self.num_requests {
            for a in 0..self.num_arcs {
                c[self.customer_var(m, a)] = net.times[a] / self.total_rate;
            }
        }
        c
    }

    /// Coefficients of the AV mileage rate.
    fn mileage_row(&self, net: &DesignNetwork) -> Vec<f64> {
        let mut c = vec![0.0; self.num_vars()];
        for (k, &a) in self.road_arcs.iter().enumerate() {
            self.add_road_total(&mut c, k, a, net.graph.arcs()[a].length);
        }
        c
    }
}

fn total_rate(requests: &[TravelRequest]) -> Result<f64, FlowError> {
    if requests.is_empty() {
        return Err(FlowError::EmptyDemand);
    }
    Ok(requests.iter().map(|r| r.rate).sum())
}

/// Builds the travel-time LP: customer conservation per request and node,
/// vehicle conservation per road node, capacity per road arc, fleet size.
pub fn assemble_lp(net: &DesignNetwork, requests: &[TravelRequest]) -> Result<IamodLp, FlowError> {
    let total_rate = total_rate(requests)?;
    let g = &net.graph;
    let road_arcs = net.road_arcs();
    let mut out = IamodLp {
        lp: LinearProgram::default(),
        num_arcs: g.arcs().len(),
        num_requests: requests.len(),
        road_arcs,
        total_rate,
    };
    let n = out.num_vars();
    out.lp.objective = out.travel_time_row(net);

    for (m, req) in requests.iter().enumerate() {
        for j in 0..g.nodes().len() {
            let mut row = vec![0.0; n];
            for (a, arc) in g.arcs().iter().enumerate() {
                if arc.to == j {
                    row[out.customer_var(m, a)] += 1.0;
                }
                if arc.from == j {
                    row[out.customer_var(m, a)] -= 1.0;
                }
            }
            let mut rhs = 0.0;
            if j == req.destination {
                rhs += req.rate;
            }
            if j == req.origin {
                rhs -= req.rate;
            }
            out.lp.add_eq(row, rhs);
        }
    }

    let road_nodes: Vec<usize> = (0..g.nodes().len())
        .filter(|&j| g.nodes()[j].layer == crate::network::Layer::Road)
        .collect();
    for j in road_nodes {
        let mut row = vec![0.0; n];
        for (k, &a) in out.road_arcs.iter().enumerate() {
            let arc = &g.arcs()[a];
            if arc.to == j {
                out.add_road_total(&mut row, k, a, 1.0);
            }
            if arc.from == j {
                out.add_road_total(&mut row, k, a, -1.0);
            }
        }
        out.lp.add_eq(row, 0.0);
    }

    for (k, &a) in out.road_arcs.iter().enumerate() {
        let ArcKind::Road {
            capacity,
            baseline_usage,
            ..
        } = g.arcs()[a].kind
        else {
            unreachable!("road_arcs holds road arcs only")
        };
        let mut row = vec![0.0; n];
        out.add_road_total(&mut row, k, a, 1.0);
        out.lp.add_ub(row, capacity - baseline_usage);
    }

    let mut fleet = vec![0.0; n];
    for (k, &a) in out.road_arcs.iter().enumerate() {
        out.add_road_total(&mut fleet, k, a, net.times[a]);
    }
    out.lp.add_ub(fleet, f64::from(net.design.fleet_size));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowStatus {
    Optimal,
    Infeasible,
}

/// Quantities derived from a flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowMetrics {
    /// Average travel time, s.
    pub travel_time: f64,
    /// Vehicles on the road (flow times travel time).
    pub vehicles_employed: f64,
    /// AV distance per unit time, m/s.
    pub mileage_rate: f64,
    /// AV CO2 emissions, kg/s.
    pub emission_rate: f64,
}

impl FlowMetrics {
    pub const INFEASIBLE: FlowMetrics = FlowMetrics {
        travel_time: f64::INFINITY,
        vehicles_employed: f64::INFINITY,
        mileage_rate: f64::INFINITY,
        emission_rate: f64::INFINITY,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSolution {
    pub status: FlowStatus,
    /// `customer_flows[m][a]`, customers/s, indexed by the pruned graph's arcs.
    pub customer_flows: Vec<Vec<f64>>,
    /// Empty-vehicle flow per arc, veh/s; zero off the road layer.
    pub rebalancing_flows: Vec<f64>,
    pub metrics: FlowMetrics,
    /// Optimal average travel time from the first stage.
    pub optimal_travel_time: f64,
    /// Mileage rate of the first-stage solution.
    pub first_stage_mileage: f64,
}

impl FlowSolution {
    fn infeasible() -> Self {
        FlowSolution {
            status: FlowStatus::Infeasible,
            customer_flows: Vec::new(),
            rebalancing_flows: Vec::new(),
            metrics: FlowMetrics::INFEASIBLE,
            optimal_travel_time: f64::INFINITY,
            first_stage_mileage: f64::INFINITY,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == FlowStatus::Optimal
    }
}

fn split_flows(layout: &IamodLp, x: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let customers = (0..layout.num_requests)
        .map(|m| (0..layout.num_arcs).map(|a| x[layout.customer_var(m, a)]).collect())
        .collect();
    let mut rebalancing = vec![0.0; layout.num_arcs];
    for (k, &a) in layout.road_arcs.iter().enumerate() {
        rebalancing[a] = x[layout.rebalancing_var(k)];
    }
    (customers, rebalancing)
}

/// Solves the travel-time problem, then re-solves for minimum mileage with the
/// travel time held at its optimum.
pub fn solve_iamod(
    net: &DesignNetwork,
    requests: &[TravelRequest],
    params: &ScenarioParams,
) -> Result<FlowSolution, FlowError> {
    let layout = assemble_lp(net, requests)?;
    let first = solve_lp(&layout.lp)?;
    match first.status {
        LpStatus::Infeasible => return Ok(FlowSolution::infeasible()),
        LpStatus::Unbounded => return Err(FlowError::Unbounded),
        LpStatus::Optimal => {}
    }
    let t_star = first.objective_value;
    let mileage = layout.mileage_row(net);
    let first_stage_mileage: f64 = mileage.iter().zip(&first.x).map(|(c, v)| c * v).sum();

    let mut second_lp = layout.lp.clone();
    second_lp.add_ub(
        layout.lp.objective.clone(),
        t_star * (1.0 + TIE_BREAK_REL_TOL) + TIE_BREAK_ABS_TOL,
    );
    second_lp.objective = mileage;
    let second = solve_lp(&second_lp)?;
    // The first-stage point satisfies the second stage, so anything but
    // Optimal here is round-off; keep the first-stage flows in that case.
    let x = if second.is_optimal() { second.x } else { first.x };

    let (customer_flows, rebalancing_flows) = split_flows(&layout, &x);
    let metrics = derive_metrics(&customer_flows, &rebalancing_flows, net, requests, params)?;
    Ok(FlowSolution {
        status: FlowStatus::Optimal,
        customer_flows,
        rebalancing_flows,
        metrics,
        optimal_travel_time: t_star,
        first_stage_mileage,
    })
}

/// Average travel time, employed vehicles, mileage rate and AV emission rate
/// of a flow.
pub fn derive_metrics(
    customer_flows: &[Vec<f64>],
    rebalancing_flows: &[f64],
    net: &DesignNetwork,
    requests: &[TravelRequest],
    params: &ScenarioParams,
) -> Result<FlowMetrics, FlowError> {
    let total_rate = total_rate(requests)?;
    let arcs = net.graph.arcs();
    let travel: f64 = customer_flows
        .iter()
        .map(|f| f.iter().zip(&net.times).map(|(x, t)| x * t).sum::<f64>())
        .sum();
    let mut vehicles = 0.0;
    let mut mileage = 0.0;
    let mut energy = 0.0;
    for (a, arc) in arcs.iter().enumerate() {
        if !arc.is_road() {
            continue;
        }
        let total = rebalancing_flows[a] + customer_flows.iter().map(|f| f[a]).sum::<f64>();
        vehicles += total * net.times[a];
        mileage += total * arc.length;
        energy += total * net.energies[a];
    }
    Ok(FlowMetrics {
        travel_time: travel / total_rate,
        vehicles_employed: vehicles,
        mileage_rate: mileage,
        emission_rate: params.co2_per_joule * energy,
    })
}

/// Constraint residuals of a flow, computed from the graph directly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowResiduals {
    /// Largest customer conservation violation over requests and nodes.
    pub customer_conservation: f64,
    /// Largest vehicle conservation violation over road nodes.
    pub vehicle_conservation: f64,
    /// Smallest `c - u - total flow` over road arcs (negative means violated).
    pub capacity_slack: f64,
    /// `fleet_size - vehicles_employed`.
    pub fleet_slack: f64,
    /// Most negative flow value (zero if none).
    pub min_flow: f64,
}

pub fn flow_residuals(
    sol: &FlowSolution,
    net: &DesignNetwork,
    requests: &[TravelRequest],
) -> FlowResiduals {
    let g = &net.graph;
    let nn = g.nodes().len();
    let mut customer = 0.0f64;
    for (m, req) in requests.iter().enumerate() {
        let mut balance = vec![0.0; nn];
        for (a, arc) in g.arcs().iter().enumerate() {
            balance[arc.to] += sol.customer_flows[m][a];
            balance[arc.from] -= sol.customer_flows[m][a];
        }
        balance[req.origin] += req.rate;
        balance[req.destination] -= req.rate;
        customer = balance.iter().fold(customer, |acc, b| acc.max(b.abs()));
    }
    let mut vehicle_balance = vec![0.0; nn];
    let mut capacity_slack = f64::INFINITY;
    let mut vehicles = 0.0;
    for (a, arc) in g.arcs().iter().enumerate() {
        if let ArcKind::Road {
            capacity,
            baseline_usage,
            ..
        } = arc.kind
        {
            let total = sol.rebalancing_flows[a] + sol.customer_flows.iter().map(|f| f[a]).sum::<f64>();
            vehicle_balance[arc.to] += total;
            vehicle_balance[arc.from] -= total;
            capacity_slack = capacity_slack.min(capacity - baseline_usage - total);
            vehicles += total * net.times[a];
        }
    }
    let min_flow = sol
        .customer_flows
        .iter()
        .flatten()
        .chain(&sol.rebalancing_flows)
        .fold(0.0f64, |m, &v| m.min(v));
    FlowResiduals {
        customer_conservation: customer,
        vehicle_conservation: vehicle_balance.iter().fold(0.0f64, |m, b| m.max(b.abs())),
        capacity_slack,
        fleet_slack: f64::from(net.design.fleet_size) - vehicles,
        min_flow,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Arc, DriveCycle, Layer, Node, DEFAULT_SECONDS_PER_MONTH};

    fn params() -> ScenarioParams {
        ScenarioParams {
            speed_limit_fraction: 1.0,
            walking_speed: 1.0,
            walk_to_road_time: 10.0,
            road_to_walk_time: 10.0,
            walk_to_station_time: 60.0,
            station_to_walk_time: 60.0,
            co2_per_joule: 1.4e-7,
            drive_cycle: DriveCycle::new(vec![(1.0, 500.0), (50.0, 500.0)]).unwrap(),
            seconds_per_month: DEFAULT_SECONDS_PER_MONTH,
        }
    }

    fn node(id: &str, layer: Layer) -> Node {
        Node { id: id.into(), layer }
    }

    fn arc(from: usize, to: usize, length: f64, kind: ArcKind) -> Arc {
        Arc { from, to, length, kind }
    }

    fn road(capacity: f64) -> ArcKind {
        ArcKind::Road { speed_limit: 10.0, capacity, baseline_usage: 0.0 }
    }

    /// Walk A <-> B (1000 m each way at 1 m/s) and a road shortcut
    /// A -> rA -> rB -> B of 2000 m at 10 m/s plus 10 s switches each end.
    fn corridor(capacity: f64) -> MultilayerGraph {
        let nodes = vec![
            node("A", Layer::Walk),
            node("B", Layer::Walk),
            node("rA", Layer::Road),
            node("rB", Layer::Road),
        ];
        let arcs = vec![
            arc(0, 1, 1000.0, ArcKind::Walk),
            arc(1, 0, 1000.0, ArcKind::Walk),
            arc(0, 2, 0.0, ArcKind::WalkToRoad),
            arc(2, 3, 2000.0, road(capacity)),
            arc(3, 2, 2000.0, road(capacity)),
            arc(3, 1, 0.0, ArcKind::RoadToWalk),
            arc(1, 3, 0.0, ArcKind::WalkToRoad),
            arc(2, 0, 0.0, ArcKind::RoadToWalk),
        ];
        MultilayerGraph::new(nodes, arcs).unwrap()
    }

    fn design(fleet: u32) -> DesignPoint {
        DesignPoint { speed: 10.0, fleet_size: fleet, train_factor: 1.0 }
    }

    #[test]
    fn variable_count() {
        let g = corridor(1.0);
        let p = params();
        let net = DesignNetwork::build(&g, &design(10), &p).unwrap();
        let reqs = vec![
            TravelRequest { origin: 0, destination: 1, rate: 0.1 },
            TravelRequest { origin: 1, destination: 0, rate: 0.1 },
        ];
        let lp = assemble_lp(&net, &reqs).unwrap();
        assert_eq!(lp.num_vars(), 2 * 8 + 2);
        assert_eq!(lp.lp.eq_matrix.len(), 2 * 4 + 2);
        assert_eq!(lp.lp.ub_matrix.len(), 2 + 1);
    }

    #[test]
    fn empty_demand_is_an_error() {
        let g = corridor(1.0);
        let p = params();
        let net = DesignNetwork::build(&g, &design(10), &p).unwrap();
        assert_eq!(assemble_lp(&net, &[]).unwrap_err(), FlowError::EmptyDemand);
        assert_eq!(solve_iamod(&net, &[], &p).unwrap_err(), FlowError::EmptyDemand);
    }

    #[test]
    fn zero_fleet_walks() {
        let g = corridor(1.0);
        let p = params();
        let net = DesignNetwork::build(&g, &design(0), &p).unwrap();
        let reqs = vec![TravelRequest { origin: 0, destination: 1, rate: 0.1 }];
        let sol = solve_iamod(&net, &reqs, &p).unwrap();
        assert!(sol.is_optimal());
        assert!((sol.metrics.travel_time - 1000.0).abs() < 1e-9);
        assert!(sol.metrics.mileage_rate.abs() < 1e-12);
        assert!(sol.metrics.vehicles_employed.abs() < 1e-12);
    }

    #[test]
    fn capacity_splits_between_road_and_walk() {
        // Road trip takes 10 + 200 + 10 = 220 s against 1000 s on foot.
        // With 0.04 veh/s of road capacity and 0.1 customers/s, 0.04 ride and
        // 0.06 walk: t_avg = (0.04 * 220 + 0.06 * 1000) / 0.1 = 688 s.
        let g = corridor(0.04);
        let p = params();
        let net = DesignNetwork::build(&g, &design(1000), &p).unwrap();
        let reqs = vec![TravelRequest { origin: 0, destination: 1, rate: 0.1 }];
        let sol = solve_iamod(&net, &reqs, &p).unwrap();
        assert!((sol.metrics.travel_time - 688.0).abs() < 1e-6);
        // Rebalancing returns the 0.04 veh/s: 0.08 veh/s on 2000 m.
        assert!((sol.metrics.mileage_rate - 160.0).abs() < 1e-6);
        let r = flow_residuals(&sol, &net, &reqs);
        assert!(r.customer_conservation < 1e-9 && r.vehicle_conservation < 1e-9);
        assert!(r.capacity_slack > -1e-9);
    }

    #[test]
    fn symmetric_demand_needs_no_rebalancing() {
        let g = corridor(1.0);
        let p = params();
        let net = DesignNetwork::build(&g, &design(1000), &p).unwrap();
        let reqs = vec![
            TravelRequest { origin: 0, destination: 1, rate: 0.1 },
            TravelRequest { origin: 1, destination: 0, rate: 0.1 },
        ];
        let sol = solve_iamod(&net, &reqs, &p).unwrap();
        assert!((sol.metrics.travel_time - 220.0).abs() < 1e-6);
        assert!(sol.rebalancing_flows.iter().all(|f| f.abs() < 1e-9));
        assert!((sol.metrics.mileage_rate - 400.0).abs() < 1e-6);
    }

    #[test]
    fn fleet_limit_binds() {
        // Each customer on the road needs 200 s of vehicle time plus 200 s of
        // rebalancing: 400 vehicles per unit flow. 20 vehicles carry 0.05/s.
        let g = corridor(1.0);
        let p = params();
        let net = DesignNetwork::build(&g, &design(20), &p).unwrap();
        let reqs = vec![TravelRequest { origin: 0, destination: 1, rate: 0.1 }];
        let sol = solve_iamod(&net, &reqs, &p).unwrap();
        assert!((sol.metrics.vehicles_employed - 20.0).abs() < 1e-6);
        assert!((sol.metrics.travel_time - (0.05 * 220.0 + 0.05 * 1000.0) / 0.1).abs() < 1e-6);
    }

    #[test]
    fn metrics_product_rules() {
        let g = corridor(1.0);
        let p = params();
        let mut net = DesignNetwork::build(&g, &design(100), &p).unwrap();
        // One road arc carrying 0.1 veh/s with t = 100 s and e = 500 kJ.
        net.times[3] = 100.0;
        net.energies[3] = 500_000.0;
        let reqs = vec![TravelRequest { origin: 0, destination: 1, rate: 0.1 }];
        let mut customers = vec![vec![0.0; 8]];
        customers[0][3] = 0.1;
        let rebal = vec![0.0; 8];
        let m = derive_metrics(&customers, &rebal, &net, &reqs, &p).unwrap();
        assert!((m.vehicles_employed - 10.0).abs() < 1e-12);
        // 0.1 * 500 kJ * 0.14 g/kJ = 7 g/s.
        assert!((m.emission_rate - 0.007).abs() < 1e-15);

        let zero = derive_metrics(&[vec![0.0; 8]], &rebal, &net, &reqs, &p).unwrap();
        assert_eq!((zero.mileage_rate, zero.emission_rate, zero.vehicles_employed), (0.0, 0.0, 0.0));
    }

    #[test]
    fn unreachable_destination_is_infeasible() {
        // Walk B is reachable only by road; with no fleet it cannot be served.
        let nodes = vec![node("A", Layer::Walk), node("B", Layer::Walk), node("rA", Layer::Road), node("rB", Layer::Road)];
        let arcs = vec![
            arc(0, 2, 0.0, ArcKind::WalkToRoad),
            arc(2, 0, 0.0, ArcKind::RoadToWalk),
            arc(1, 3, 0.0, ArcKind::WalkToRoad),
            arc(3, 1, 0.0, ArcKind::RoadToWalk),
            arc(2, 3, 100.0, road(1.0)),
            arc(3, 2, 100.0, road(1.0)),
        ];
        let g = MultilayerGraph::new(nodes, arcs).unwrap();
        let p = params();
        let reqs = vec![TravelRequest { origin: 0, destination: 1, rate: 0.1 }];
        let net = DesignNetwork::build(&g, &design(0), &p).unwrap();
        let sol = solve_iamod(&net, &reqs, &p).unwrap();
        assert_eq!(sol.status, FlowStatus::Infeasible);
        assert_eq!(sol.metrics, FlowMetrics::INFEASIBLE);

        let net = DesignNetwork::build(&g, &design(50), &p).unwrap();
        assert!(solve_iamod(&net, &reqs, &p).unwrap().is_optimal());
    }
}
