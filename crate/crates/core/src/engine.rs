//! Exhaustive evaluation of the design grid and classification of outcomes.
//!
//! Every cell runs the chain prune -> scale frequencies -> flow solve ->
//! aggregate. Cells are independent and may be evaluated in parallel; the
//! antichain is built by a sequential pass over the grid order, so the
//! output does not depend on scheduling.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::{aggregate_resources, monetize, subway_dp, DesignError, SubwayCatalog, VehicleCatalog};
use crate::flow::{solve_iamod, DesignNetwork, FlowError, FlowMetrics};
use crate::network::{DesignPoint, MultilayerGraph, ScenarioParams, TravelRequest};
use crate::poset::{minimal_elements, Antichain, CostTime, LabeledPoint, ProductOrder, ResourceVector};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid design grid: {0}")]
    InvalidGrid(String),
    #[error("design (speed {} m/s, fleet {}, train factor {}): {source}", .design.speed, .design.fleet_size, .design.train_factor)]
    Flow {
        design: DesignPoint,
        #[source]
        source: FlowError,
    },
    #[error("design (speed {} m/s, fleet {}, train factor {}): {source}", .design.speed, .design.fleet_size, .design.train_factor)]
    Design {
        design: DesignPoint,
        #[source]
        source: DesignError,
    },
}

/// Everything needed to evaluate a design: network, demand, parameters and
/// catalogs.
#[derive(Debug, Clone)]
pub struct CodesignProblem {
    pub graph: MultilayerGraph,
    pub requests: Vec<TravelRequest>,
    pub params: ScenarioParams,
    pub vehicles: VehicleCatalog,
    pub subway: SubwayCatalog,
}

impl CodesignProblem {
    pub fn total_rate(&self) -> f64 {
        self.requests.iter().map(|r| r.rate).sum()
    }

    /// The same problem with every request rate multiplied by `factor`.
    pub fn with_demand_scale(&self, factor: f64) -> CodesignProblem {
        let mut scaled = self.clone();
        for r in &mut scaled.requests {
            r.rate *= factor;
        }
        scaled
    }
}

/// The finite menu of designs. Axes are kept sorted and free of duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignGrid {
    speeds: Vec<f64>,
    fleet_sizes: Vec<u32>,
    train_factors: Vec<f64>,
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

impl DesignGrid {
    pub fn new(speeds: Vec<f64>, mut fleet_sizes: Vec<u32>, train_factors: Vec<f64>) -> Result<Self, EngineError> {
        fleet_sizes.sort_unstable();
        fleet_sizes.dedup();
        let grid = DesignGrid {
            speeds: sorted_unique(speeds),
            fleet_sizes,
            train_factors: sorted_unique(train_factors),
        };
        if grid.speeds.is_empty() || grid.fleet_sizes.is_empty() || grid.train_factors.is_empty() {
            return Err(EngineError::InvalidGrid("every axis needs at least one value".into()));
        }
        if grid.speeds.iter().chain(&grid.train_factors).any(|v| !v.is_finite()) {
            return Err(EngineError::InvalidGrid("non-finite axis value".into()));
        }
        Ok(grid)
    }

    /// Checks that every speed and train factor has a catalog entry.
    pub fn check_catalogs(&self, vehicles: &VehicleCatalog, subway: &SubwayCatalog) -> Result<(), EngineError> {
        let speeds = vehicles.speeds();
        if let Some(s) = self.speeds.iter().find(|s| !speeds.contains(s)) {
            return Err(EngineError::InvalidGrid(format!("speed {s} m/s is not in the vehicle catalog")));
        }
        let factors = subway.factors();
        if let Some(f) = self.train_factors.iter().find(|f| !factors.contains(f)) {
            return Err(EngineError::InvalidGrid(format!("train factor {f} is not in the subway catalog")));
        }
        Ok(())
    }

    pub fn speeds(&self) -> &[f64] {
        &self.speeds
    }

    pub fn fleet_sizes(&self) -> &[u32] {
        &self.fleet_sizes
    }

    pub fn train_factors(&self) -> &[f64] {
        &self.train_factors
    }

    pub fn len(&self) -> usize {
        self.speeds.len() * self.fleet_sizes.len() * self.train_factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cells in lexicographic order: speed, then fleet size, then train factor.
    pub fn cells(&self) -> Vec<DesignPoint> {
        let mut out = Vec::with_capacity(self.len());
        for &speed in &self.speeds {
            for &fleet_size in &self.fleet_sizes {
                for &train_factor in &self.train_factors {
                    out.push(DesignPoint {
                        speed,
                        fleet_size,
                        train_factor,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Pareto,
    FeasibleIrrational,
    Infeasible,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Pareto => "pareto",
            Classification::FeasibleIrrational => "feasible_irrational",
            Classification::Infeasible => "infeasible",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatedPoint {
    pub design: DesignPoint,
    pub resources: ResourceVector,
    pub classification: Classification,
    pub trains: u32,
    pub metrics: FlowMetrics,
}

impl EvaluatedPoint {
    pub fn is_feasible(&self) -> bool {
        !self.resources.is_top()
    }
}

/// Runs one design through the full chain. The classification is provisional
/// (`FeasibleIrrational` or `Infeasible`) until [`pareto_front`] runs.
pub fn evaluate_design(problem: &CodesignProblem, design: &DesignPoint) -> Result<EvaluatedPoint, EngineError> {
    let flow_err = |source| EngineError::Flow { design: *design, source };
    let design_err = |source| EngineError::Design { design: *design, source };
    let net = DesignNetwork::build(&problem.graph, design, &problem.params).map_err(flow_err)?;
    let flow = solve_iamod(&net, &problem.requests, &problem.params).map_err(flow_err)?;
    let resources = aggregate_resources(&flow, design, &problem.vehicles, &problem.subway, &problem.params)
        .map_err(design_err)?;
    let trains = subway_dp(design.train_factor, &problem.subway).map_err(design_err)?.trains;
    Ok(EvaluatedPoint {
        design: *design,
        resources,
        classification: if resources.is_top() {
            Classification::Infeasible
        } else {
            Classification::FeasibleIrrational
        },
        trains,
        metrics: flow.metrics,
    })
}

/// Evaluates every grid cell, in grid order, and classifies the results.
/// Uses the current rayon pool when `parallel` is set.
pub fn evaluate_grid(
    problem: &CodesignProblem,
    grid: &DesignGrid,
    parallel: bool,
) -> Result<Vec<EvaluatedPoint>, EngineError> {
    if problem.requests.is_empty() {
        return Err(EngineError::Flow {
            design: grid.cells()[0],
            source: FlowError::EmptyDemand,
        });
    }
    grid.check_catalogs(&problem.vehicles, &problem.subway)?;
    let cells = grid.cells();
    let results: Vec<Result<EvaluatedPoint, EngineError>> = if parallel {
        cells.par_iter().map(|d| evaluate_design(problem, d)).collect()
    } else {
        cells.iter().map(|d| evaluate_design(problem, d)).collect()
    };
    let mut points = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    pareto_front(&mut points);
    Ok(points)
}

/// Minimal feasible resources, labeled by index into `points`. Updates every
/// point's classification to match.
pub fn pareto_front(points: &mut [EvaluatedPoint]) -> Antichain<ResourceVector, usize> {
    let front = minimal_elements(
        points
            .iter()
            .enumerate()
            .filter(|(_, p)| p.is_feasible())
            .map(|(i, p)| LabeledPoint::new(p.resources, i)),
    );
    let mut on_front = vec![false; points.len()];
    for e in front.iter() {
        on_front[e.label] = true;
    }
    for (p, &pareto) in points.iter_mut().zip(&on_front) {
        p.classification = match (p.is_feasible(), pareto) {
            (false, _) => Classification::Infeasible,
            (true, true) => Classification::Pareto,
            (true, false) => Classification::FeasibleIrrational,
        };
    }
    front
}

/// The front element fitting under `budget` with the least travel time
/// (ties: cost, then emissions).
pub fn query_budget<'a, L>(
    front: &'a Antichain<ResourceVector, L>,
    budget: &ResourceVector,
) -> Option<&'a LabeledPoint<ResourceVector, L>> {
    front
        .iter()
        .filter(|p| p.resources.leq(budget))
        .min_by(|a, b| {
            let (ra, rb) = (&a.resources, &b.resources);
            ra.time
                .total_cmp(&rb.time)
                .then(ra.cost.total_cmp(&rb.cost))
                .then(ra.emissions.total_cmp(&rb.emissions))
        })
}

/// The two-dimensional front of the monetized images of `front`.
pub fn monetized_front<L: Clone>(front: &Antichain<ResourceVector, L>, rate: f64) -> Antichain<CostTime, L> {
    minimal_elements(
        front
            .iter()
            .map(|p| LabeledPoint::new(monetize(&p.resources, rate), p.label.clone())),
    )
}

/// Points of a front sorted by ascending cost.
pub fn sorted_by_cost<P: Copy + ProductOrder, L: Clone>(
    front: &Antichain<P, L>,
    cost: impl Fn(&P) -> f64,
) -> Vec<LabeledPoint<P, L>> {
    let mut v: Vec<_> = front.iter().cloned().collect();
    v.sort_by(|a, b| cost(&a.resources).total_cmp(&cost(&b.resources)));
    v
}

/// `true` iff every point of `b` is weakly dominated by some point of `a`.
pub fn front_dominates(a: &[CostTime], b: &[CostTime]) -> bool {
    b.iter().all(|q| a.iter().any(|p| p.leq(q)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontSeries<L> {
    pub name: String,
    /// Monetized front sorted by ascending cost.
    pub points: Vec<LabeledPoint<CostTime, L>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityReport<L> {
    pub series: Vec<FrontSeries<L>>,
    /// `dominance[i][j]`: series `i` weakly dominates every point of series `j`.
    pub dominance: Vec<Vec<bool>>,
}

/// Monetizes each named front and compares them pairwise.
pub fn sensitivity_compare<L: Clone>(
    fronts: &[(String, Antichain<ResourceVector, L>)],
    rate: f64,
) -> SensitivityReport<L> {
    let series: Vec<FrontSeries<L>> = fronts
        .iter()
        .map(|(name, front)| FrontSeries {
            name: name.clone(),
            points: sorted_by_cost(&monetized_front(front, rate), |p| p.cost),
        })
        .collect();
    let plain: Vec<Vec<CostTime>> = series
        .iter()
        .map(|s| s.points.iter().map(|p| p.resources).collect())
        .collect();
    let dominance = plain
        .iter()
        .map(|a| plain.iter().map(|b| front_dominates(a, b)).collect())
        .collect();
    SensitivityReport { series, dominance }
}
