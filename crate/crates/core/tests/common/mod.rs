//! Independent reference implementations used by the integration tests.
//!
//! Nothing here calls the simplex solver or the arc-based flow model: LPs are
//! solved by enumerating vertices, flows by enumerating routes.

#![allow(dead_code)]

use std::path::PathBuf;

use iamod_codesign::flow::{DesignNetwork, FlowSolution};
use iamod_codesign::lp::LinearProgram;
use iamod_codesign::network::{
    Arc, ArcKind, DriveCycle, Layer, MultilayerGraph, Node, ScenarioParams, TravelRequest,
    DEFAULT_SECONDS_PER_MONTH,
};
use iamod_codesign::poset::{ProductOrder, ResourceVector};
use iamod_codesign::scenario::Scenario;
use rand::Rng;

pub fn mini_city_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/mini-city/scenario.json")
}

pub fn mini_city() -> Scenario {
    Scenario::load(mini_city_path()).expect("mini-city scenario loads")
}

// ---------------------------------------------------------------------------
// Linear algebra

/// Solves the square system `a x = b` by Gaussian elimination with partial
/// pivoting. `None` when the matrix is (numerically) singular.
pub fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[p][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, p);
        b.swap(col, p);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Keeps a maximal linearly independent subset of the equality rows.
/// `Err(())` when a dependent row contradicts the others.
fn independent_equalities(rows: &[Vec<f64>], rhs: &[f64]) -> Result<Vec<usize>, ()> {
    let n = rows.first().map_or(0, Vec::len);
    // Reduced copies of kept rows with their pivot columns.
    let mut basis: Vec<(Vec<f64>, f64, usize)> = Vec::new();
    let mut kept = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let mut r = row.clone();
        let mut b = rhs[i];
        for (br, bb, pc) in &basis {
            let f = r[*pc] / br[*pc];
            if f != 0.0 {
                for c in 0..n {
                    r[c] -= f * br[c];
                }
                b -= f * bb;
            }
        }
        let scale = row.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        match (0..n).max_by(|&a, &c| r[a].abs().total_cmp(&r[c].abs())) {
            Some(pc) if r[pc].abs() > 1e-9 * scale => {
                basis.push((r, b, pc));
                kept.push(i);
            }
            _ if b.abs() > 1e-7 * (1.0 + rhs[i].abs()) => return Err(()),
            _ => {}
        }
    }
    Ok(kept)
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Every vertex of `{x >= 0 : A_eq x = b_eq, A_ub x <= b_ub}`, possibly with
/// repeats. `None` when the equalities are inconsistent.
pub fn vertices(lp: &LinearProgram) -> Option<Vec<Vec<f64>>> {
    let n = lp.num_vars();
    let eq = independent_equalities(&lp.eq_matrix, &lp.eq_rhs).ok()?;
    if eq.len() > n {
        return Some(Vec::new());
    }
    // Inequalities: the ub rows, then x_j >= 0 written as -x_j <= 0.
    let mut ineq: Vec<(Vec<f64>, f64)> = lp
        .ub_matrix
        .iter()
        .cloned()
        .zip(lp.ub_rhs.iter().copied())
        .collect();
    for j in 0..n {
        let mut row = vec![0.0; n];
        row[j] = -1.0;
        ineq.push((row, 0.0));
    }
    let k = n - eq.len();
    let scale = lp.eq_rhs.iter().chain(&lp.ub_rhs).fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-9 * scale;
    let feasible = |x: &[f64]| {
        let dot = |r: &[f64]| r.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        x.iter().all(|&v| v >= -tol)
            && lp.eq_matrix.iter().zip(&lp.eq_rhs).all(|(r, b)| (dot(r) - b).abs() <= tol)
            && lp.ub_matrix.iter().zip(&lp.ub_rhs).all(|(r, b)| dot(r) <= b + tol)
    };
    let mut out = Vec::new();
    if k > ineq.len() {
        return Some(out);
    }
    let mut comb: Vec<usize> = (0..k).collect();
    loop {
        let mut a: Vec<Vec<f64>> = eq.iter().map(|&i| lp.eq_matrix[i].clone()).collect();
        let mut b: Vec<f64> = eq.iter().map(|&i| lp.eq_rhs[i]).collect();
        for &c in &comb {
            a.push(ineq[c].0.clone());
            b.push(ineq[c].1);
        }
        if let Some(x) = solve_square(a, b) {
            if feasible(&x) {
                out.push(x);
            }
        }
        if k == 0 || !next_combination(&mut comb, ineq.len()) {
            break;
        }
    }
    Some(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleOutcome {
    Optimal { value: f64, x: Vec<f64> },
    Infeasible,
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimum of a bounded LP by vertex enumeration.
pub fn lp_oracle(lp: &LinearProgram) -> OracleOutcome {
    let verts = vertices(lp).unwrap_or_default();
    verts
        .into_iter()
        .map(|x| (dot(&lp.objective, &x), x))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map_or(OracleOutcome::Infeasible, |(value, x)| OracleOutcome::Optimal { value, x })
}

/// A random LP with at most six variables and six constraints, bounded by a
/// row `sum x <= B`. Small integer data makes degenerate vertices common.
pub fn random_bounded_lp(rng: &mut impl Rng) -> LinearProgram {
    let n = rng.random_range(1..=6);
    let mut lp = LinearProgram::new((0..n).map(|_| rng.random_range(-5..=5) as f64).collect());
    lp.add_ub(vec![1.0; n], rng.random_range(1..=20) as f64);
    let extra = rng.random_range(0..=5);
    for _ in 0..extra {
        let row: Vec<f64> = (0..n).map(|_| rng.random_range(-4..=4) as f64).collect();
        let rhs = rng.random_range(-6..=12) as f64;
        if rng.random_bool(0.25) {
            lp.add_eq(row, rhs);
        } else {
            lp.add_ub(row, rhs);
        }
    }
    lp
}

// ---------------------------------------------------------------------------
// Antichains

/// Minimal elements by pairwise comparison, as a sorted duplicate-free list.
pub fn brute_force_front(points: &[ResourceVector]) -> Vec<ResourceVector> {
    let mut front: Vec<ResourceVector> = points
        .iter()
        .filter(|p| !p.is_top())
        .filter(|p| !points.iter().any(|q| q.leq(p) && !p.leq(q)))
        .copied()
        .collect();
    sort_dedup(&mut front);
    front
}

pub fn sort_dedup(v: &mut Vec<ResourceVector>) {
    v.sort_by(|a, b| {
        a.cost
            .total_cmp(&b.cost)
            .then(a.time.total_cmp(&b.time))
            .then(a.emissions.total_cmp(&b.emissions))
    });
    v.dedup();
}

/// Points on a coarse lattice so that ties and dominance both occur often.
pub fn random_points(rng: &mut impl Rng, max_len: usize) -> Vec<ResourceVector> {
    let len = rng.random_range(0..=max_len);
    let levels = rng.random_range(2..=12);
    (0..len)
        .map(|_| {
            ResourceVector::new(
                rng.random_range(0..levels) as f64,
                rng.random_range(0..levels) as f64,
                rng.random_range(0..levels) as f64,
            )
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Flows

pub fn test_params(beta: f64) -> ScenarioParams {
    ScenarioParams {
        speed_limit_fraction: beta,
        walking_speed: 1.4,
        walk_to_road_time: 300.0,
        road_to_walk_time: 60.0,
        walk_to_station_time: 60.0,
        station_to_walk_time: 60.0,
        co2_per_joule: 1.4e-7,
        drive_cycle: DriveCycle::new(vec![(5.0, 450.0), (30.0, 650.0)]).unwrap(),
        seconds_per_month: DEFAULT_SECONDS_PER_MONTH,
    }
}

/// A random graph with three walking and three road nodes and at most eight
/// arcs. Always contains one way in to and out of the road layer.
pub fn random_micro_graph(rng: &mut impl Rng) -> MultilayerGraph {
    let mut nodes = Vec::new();
    for i in 0..3 {
        nodes.push(Node {
            id: format!("w{i}"),
            layer: Layer::Walk,
        });
    }
    for i in 0..3 {
        nodes.push(Node {
            id: format!("r{i}"),
            layer: Layer::Road,
        });
    }
    let road = |rng: &mut dyn rand::RngCore, from: usize, to: usize| Arc {
        from,
        to,
        length: rng.random_range(100..=600) as f64,
        kind: ArcKind::Road {
            speed_limit: [8.0, 12.0, 20.0, 30.0][rng.random_range(0..4)],
            capacity: rng.random_range(2..=10) as f64 * 0.1,
            baseline_usage: rng.random_range(0..=3) as f64 * 0.05,
        },
    };
    let mut arcs = vec![
        Arc { from: 0, to: 3, length: 0.0, kind: ArcKind::WalkToRoad },
        Arc { from: 4, to: 1, length: 0.0, kind: ArcKind::RoadToWalk },
        road(rng, 3, 4),
        road(rng, 4, 3),
    ];
    // A slow walking loop keeps most instances feasible.
    if rng.random_bool(0.7) {
        for (a, b) in [(0, 1), (1, 2), (2, 0)] {
            arcs.push(Arc {
                from: a,
                to: b,
                length: rng.random_range(2000..=3000) as f64,
                kind: ArcKind::Walk,
            });
        }
    }
    let target = rng.random_range(arcs.len()..=8);
    while arcs.len() < target {
        let pick = rng.random_range(0..4);
        let (a, b) = (rng.random_range(0..3), rng.random_range(0..3));
        let arc = match pick {
            0 if a != b => Arc {
                from: a,
                to: b,
                length: rng.random_range(200..=1500) as f64,
                kind: ArcKind::Walk,
            },
            1 if a != b => road(rng, 3 + a, 3 + b),
            2 => Arc { from: a, to: 3 + b, length: 0.0, kind: ArcKind::WalkToRoad },
            3 => Arc { from: 3 + a, to: b, length: 0.0, kind: ArcKind::RoadToWalk },
            _ => continue,
        };
        if a != b || pick >= 2 {
            if !arcs.iter().any(|x| x.from == arc.from && x.to == arc.to) {
                arcs.push(arc);
            }
        }
    }
    MultilayerGraph::unchecked(nodes, arcs).unwrap()
}

pub fn random_requests(rng: &mut impl Rng) -> Vec<TravelRequest> {
    let mut reqs = vec![TravelRequest {
        origin: 0,
        destination: 1,
        rate: rng.random_range(1..=8) as f64 * 0.05,
    }];
    if rng.random_bool(0.6) {
        let o = rng.random_range(0..3);
        let d = (o + rng.random_range(1..3)) % 3;
        reqs.push(TravelRequest {
            origin: o,
            destination: d,
            rate: rng.random_range(1..=10) as f64 * 0.05,
        });
    }
    reqs
}

/// Arc traversal time computed from first principles.
pub fn oracle_arc_time(arc: &Arc, speed: f64, p: &ScenarioParams) -> f64 {
    match arc.kind {
        ArcKind::Road { speed_limit, .. } => arc.length / speed.min(speed_limit),
        ArcKind::Walk => arc.length / p.walking_speed,
        ArcKind::WalkToRoad => p.walk_to_road_time,
        ArcKind::RoadToWalk => p.road_to_walk_time,
        ArcKind::StationToWalk => p.station_to_walk_time,
        ArcKind::TransitLine { scheduled_time } => scheduled_time,
        ArcKind::WalkToStation { .. } => panic!("micro-graphs have no stations"),
    }
}

fn simple_paths(arcs: &[(usize, usize)], from: usize, to: usize, n: usize) -> Vec<Vec<usize>> {
    fn go(
        arcs: &[(usize, usize)],
        at: usize,
        to: usize,
        seen: &mut Vec<bool>,
        path: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if at == to {
            out.push(path.clone());
            return;
        }
        for (i, &(a, b)) in arcs.iter().enumerate() {
            if a == at && !seen[b] {
                seen[b] = true;
                path.push(i);
                go(arcs, b, to, seen, path, out);
                path.pop();
                seen[b] = false;
            }
        }
    }
    let mut seen = vec![false; n];
    seen[from] = true;
    let mut out = Vec::new();
    go(arcs, from, to, &mut seen, &mut Vec::new(), &mut out);
    out
}

/// The flow problem restated over routes: one variable per simple customer
/// route and per simple empty-vehicle road route.
pub struct RouteLp {
    pub lp: LinearProgram,
    /// Objective of the second stage (mileage, m/s) per variable.
    pub mileage: Vec<f64>,
    pub num_vars: usize,
}

/// Builds the route formulation for `base` at AV speed `speed` and fleet
/// size `fleet`, applying the speed-limit pruning rule independently.
pub fn route_lp(
    base: &MultilayerGraph,
    speed: f64,
    fleet: f64,
    requests: &[TravelRequest],
    p: &ScenarioParams,
) -> RouteLp {
    let arcs: Vec<&Arc> = base
        .arcs()
        .iter()
        .filter(|a| match a.kind {
            ArcKind::Road { speed_limit, .. } => p.speed_limit_fraction * speed_limit <= speed,
            _ => true,
        })
        .collect();
    let n = base.nodes().len();
    let ends: Vec<(usize, usize)> = arcs.iter().map(|a| (a.from, a.to)).collect();
    let road_ends: Vec<(usize, usize)> = arcs
        .iter()
        .map(|a| if a.is_road() { (a.from, a.to) } else { (usize::MAX, usize::MAX) })
        .collect();
    let times: Vec<f64> = arcs.iter().map(|a| oracle_arc_time(a, speed, p)).collect();
    let road_nodes: Vec<usize> = (0..n).filter(|&v| base.nodes()[v].layer == Layer::Road).collect();

    // Columns: (arc multiset as arc indices, customer request or None).
    let mut cols: Vec<(Vec<usize>, Option<usize>)> = Vec::new();
    for (m, r) in requests.iter().enumerate() {
        for path in simple_paths(&ends, r.origin, r.destination, n) {
            cols.push((path, Some(m)));
        }
    }
    for &u in &road_nodes {
        for &v in &road_nodes {
            if u != v {
                for path in simple_paths(&road_ends, u, v, n) {
                    cols.push((path, None));
                }
            }
        }
    }
    let nv = cols.len();
    let alpha: f64 = requests.iter().map(|r| r.rate).sum();
    let objective: Vec<f64> = cols
        .iter()
        .map(|(path, m)| match m {
            Some(_) => path.iter().map(|&a| times[a]).sum::<f64>() / alpha,
            None => 0.0,
        })
        .collect();
    let mileage: Vec<f64> = cols
        .iter()
        .map(|(path, _)| path.iter().filter(|&&a| arcs[a].is_road()).map(|&a| arcs[a].length).sum())
        .collect();
    let mut lp = LinearProgram::new(objective);
    for (m, r) in requests.iter().enumerate() {
        lp.add_eq(cols.iter().map(|(_, c)| if *c == Some(m) { 1.0 } else { 0.0 }).collect(), r.rate);
    }
    for &v in &road_nodes {
        let row = cols
            .iter()
            .map(|(path, _)| {
                path.iter()
                    .filter(|&&a| arcs[a].is_road())
                    .map(|&a| (arcs[a].to == v) as i32 as f64 - (arcs[a].from == v) as i32 as f64)
                    .sum()
            })
            .collect();
        lp.add_eq(row, 0.0);
    }
    for (a, arc) in arcs.iter().enumerate() {
        if let ArcKind::Road { capacity, baseline_usage, .. } = arc.kind {
            let row = cols.iter().map(|(path, _)| path.iter().filter(|&&b| b == a).count() as f64).collect();
            lp.add_ub(row, capacity - baseline_usage);
        }
    }
    let fleet_row = cols
        .iter()
        .map(|(path, _)| path.iter().filter(|&&a| arcs[a].is_road()).map(|&a| times[a]).sum())
        .collect();
    lp.add_ub(fleet_row, fleet);
    RouteLp { lp, mileage, num_vars: nv }
}

/// Work needed to enumerate the route LP's vertices.
pub fn route_lp_combinations(r: &RouteLp) -> f64 {
    let n = r.num_vars;
    let m_ub = r.lp.ub_matrix.len();
    let m_eq = r.lp.eq_matrix.len();
    binomial(n + m_ub + 1, n.saturating_sub(m_eq.saturating_sub(1)))
}

/// Optimal average travel time, and the least mileage among route mixes
/// whose travel time is within the second-stage allowance of that optimum.
/// `None` when no mix is feasible.
pub fn flow_oracle(r: &RouteLp) -> Option<(f64, f64)> {
    let verts = vertices(&r.lp)?;
    let t_star = verts
        .iter()
        .map(|x| dot(&r.lp.objective, x))
        .min_by(|a, b| a.total_cmp(b))?;
    let mut stage2 = r.lp.clone();
    stage2.objective = r.mileage.clone();
    stage2.add_ub(r.lp.objective.clone(), t_star * (1.0 + 1e-9) + 1e-9);
    let mileage = vertices(&stage2)?
        .iter()
        .map(|x| dot(&r.mileage, x))
        .min_by(|a, b| a.total_cmp(b))?;
    Some((t_star, mileage))
}

// ---------------------------------------------------------------------------
// Flow residuals

#[derive(Debug, Clone, Copy)]
pub struct Residuals {
    /// Worst violation of customer conservation.
    pub customer: f64,
    /// Worst violation of vehicle conservation on road nodes.
    pub vehicle: f64,
    /// Least slack of a road-capacity constraint.
    pub capacity_slack: f64,
    /// Slack of the fleet constraint.
    pub fleet_slack: f64,
    /// Most negative flow.
    pub min_flow: f64,
}

/// Checks a flow against the model constraints using only the graph data.
pub fn residuals(sol: &FlowSolution, net: &DesignNetwork, requests: &[TravelRequest], p: &ScenarioParams) -> Residuals {
    let g = &net.graph;
    let n = g.nodes().len();
    let mut customer = 0.0f64;
    let mut min_flow = 0.0f64;
    for (m, r) in requests.iter().enumerate() {
        let mut net_in = vec![0.0; n];
        for (a, arc) in g.arcs().iter().enumerate() {
            let f = sol.customer_flows[m][a];
            min_flow = min_flow.min(f);
            net_in[arc.to] += f;
            net_in[arc.from] -= f;
        }
        for v in 0..n {
            let expected = if v == r.destination {
                r.rate
            } else if v == r.origin {
                -r.rate
            } else {
                0.0
            };
            customer = customer.max((net_in[v] - expected).abs());
        }
    }
    let mut vehicles = vec![0.0; n];
    let mut capacity_slack = f64::INFINITY;
    let mut used_time = 0.0;
    for (a, arc) in g.arcs().iter().enumerate() {
        if let ArcKind::Road { capacity, baseline_usage, .. } = arc.kind {
            let f0 = sol.rebalancing_flows[a];
            min_flow = min_flow.min(f0);
            let total = f0 + (0..requests.len()).map(|m| sol.customer_flows[m][a]).sum::<f64>();
            vehicles[arc.to] += total;
            vehicles[arc.from] -= total;
            capacity_slack = capacity_slack.min(capacity - baseline_usage - total);
            used_time += oracle_arc_time(arc, net.design.speed, p) * total;
        }
    }
    let vehicle = (0..n)
        .filter(|&v| g.nodes()[v].layer == Layer::Road)
        .map(|v| vehicles[v].abs())
        .fold(0.0, f64::max);
    Residuals {
        customer,
        vehicle,
        capacity_slack,
        fleet_slack: f64::from(net.design.fleet_size) - used_time,
        min_flow,
    }
}
