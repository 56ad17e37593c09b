//! Vehicle and subway design problems, and the aggregation of flow metrics and
//! design choices into (cost, time, emissions).

use thiserror::Error;

use crate::flow::FlowSolution;
use crate::network::{DesignPoint, ScenarioParams};
use crate::poset::{CostTime, ProductOrder, ResourceVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignError {
    #[error("unknown design: {0}")]
    UnknownDesign(String),
    #[error("invalid catalog: {0}")]
    InvalidCatalog(String),
}

/// Costs of one AV configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleRow {
    /// Achievable speed, m/s.
    pub speed: f64,
    /// Base vehicle price, USD.
    pub vehicle_cost: f64,
    /// Automation package price, USD.
    pub automation_cost: f64,
    /// Mileage-dependent operating cost, USD/m.
    pub operational_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleCatalog {
    rows: Vec<VehicleRow>,
    /// Vehicle life, years.
    pub vehicle_life: f64,
}

impl VehicleCatalog {
    /// Sorts rows by speed and rejects catalogs whose fixed or operating cost
    /// decreases with speed.
    pub fn new(mut rows: Vec<VehicleRow>, vehicle_life: f64) -> Result<Self, DesignError> {
        let invalid = |m: String| Err(DesignError::InvalidCatalog(m));
        if rows.is_empty() {
            return invalid("vehicle catalog has no rows".into());
        }
        if !(vehicle_life.is_finite() && vehicle_life > 0.0) {
            return invalid(format!("vehicle life must be positive, got {vehicle_life}"));
        }
        for r in &rows {
            let values = [r.speed, r.vehicle_cost, r.automation_cost, r.operational_cost];
            if values.iter().any(|v| !v.is_finite() || *v < 0.0) || r.speed == 0.0 {
                return invalid(format!("vehicle row at {} m/s has invalid values", r.speed));
            }
        }
        rows.sort_by(|a, b| a.speed.total_cmp(&b.speed));
        for w in rows.windows(2) {
            let (lo, hi) = (&w[0], &w[1]);
            if lo.speed == hi.speed {
                return invalid(format!("duplicate vehicle row at {} m/s", lo.speed));
            }
            let (f_lo, f_hi) = (lo.vehicle_cost + lo.automation_cost, hi.vehicle_cost + hi.automation_cost);
            if f_hi < f_lo {
                return invalid(format!(
                    "fixed cost decreases with speed: {f_lo} USD at {} m/s but {f_hi} USD at {} m/s",
                    lo.speed, hi.speed
                ));
            }
            if hi.operational_cost < lo.operational_cost {
                return invalid(format!(
                    "operational cost decreases with speed between {} m/s and {} m/s",
                    lo.speed, hi.speed
                ));
            }
        }
        Ok(VehicleCatalog { rows, vehicle_life })
    }

    pub fn rows(&self) -> &[VehicleRow] {
        &self.rows
    }

    pub fn speeds(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.speed).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleCosts {
    /// Vehicle plus automation, USD per vehicle.
    pub fixed: f64,
    /// USD/m.
    pub operational: f64,
}

/// Exact catalog lookup; speeds between rows are not interpolated.
pub fn vehicle_dp(speed: f64, cat: &VehicleCatalog) -> Result<VehicleCosts, DesignError> {
    cat.rows
        .iter()
        .find(|r| r.speed == speed)
        .map(|r| VehicleCosts {
            fixed: r.vehicle_cost + r.automation_cost,
            operational: r.operational_cost,
        })
        .ok_or_else(|| DesignError::UnknownDesign(format!("no vehicle catalog row at {speed} m/s")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubwayCatalog {
    pub baseline_trains: u32,
    /// Acquisition cost per train, USD.
    pub train_cost: f64,
    /// Train life, years.
    pub train_life: f64,
    /// kg CO2 per train and year.
    pub emissions_per_train: f64,
    /// (train factor, operating cost USD/year), sorted by factor.
    operational_costs: Vec<(f64, f64)>,
}

impl SubwayCatalog {
    pub fn new(
        baseline_trains: u32,
        train_cost: f64,
        train_life: f64,
        emissions_per_train: f64,
        mut operational_costs: Vec<(f64, f64)>,
    ) -> Result<Self, DesignError> {
        let invalid = |m: String| Err(DesignError::InvalidCatalog(m));
        if baseline_trains == 0 {
            return invalid("baseline train fleet must be positive".into());
        }
        if !(train_life.is_finite() && train_life > 0.0) {
            return invalid(format!("train life must be positive, got {train_life}"));
        }
        for (name, v) in [("train cost", train_cost), ("train emissions", emissions_per_train)] {
            if !(v.is_finite() && v >= 0.0) {
                return invalid(format!("{name} must be non-negative, got {v}"));
            }
        }
        if operational_costs.is_empty() {
            return invalid("subway operating cost table is empty".into());
        }
        for &(factor, cost) in &operational_costs {
            if !(factor.is_finite() && factor >= 1.0) {
                return invalid(format!("train factor must be at least 1, got {factor}"));
            }
            if !(cost.is_finite() && cost >= 0.0) {
                return invalid(format!("operating cost must be non-negative, got {cost}"));
            }
        }
        operational_costs.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in operational_costs.windows(2) {
            if w[0].0 == w[1].0 {
                return invalid(format!("duplicate train factor {}", w[0].0));
            }
            if w[1].1 < w[0].1 {
                return invalid(format!(
                    "operating cost decreases from factor {} to factor {}",
                    w[0].0, w[1].0
                ));
            }
        }
        Ok(SubwayCatalog {
            baseline_trains,
            train_cost,
            train_life,
            emissions_per_train,
            operational_costs,
        })
    }

    pub fn factors(&self) -> Vec<f64> {
        self.operational_costs.iter().map(|&(f, _)| f).collect()
    }

    pub fn operational_costs(&self) -> &[(f64, f64)] {
        &self.operational_costs
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubwayPlan {
    pub trains: u32,
    pub acquired_trains: u32,
    /// Acquisition cost spread over the train life, USD/year.
    pub acquisition_per_year: f64,
    /// USD/year.
    pub operational_per_year: f64,
}

/// Trains are `round(factor * baseline)`, halves rounded up.
pub fn subway_dp(train_factor: f64, cat: &SubwayCatalog) -> Result<SubwayPlan, DesignError> {
    let &(_, operational_per_year) = cat
        .operational_costs
        .iter()
        .find(|&&(f, _)| f == train_factor)
        .ok_or_else(|| DesignError::UnknownDesign(format!("train factor {train_factor} is not on the menu")))?;
    let trains = (train_factor * f64::from(cat.baseline_trains) + 0.5).floor() as u32;
    let acquired_trains = trains.saturating_sub(cat.baseline_trains);
    Ok(SubwayPlan {
        trains,
        acquired_trains,
        acquisition_per_year: cat.train_cost * f64::from(acquired_trains) / cat.train_life,
        operational_per_year,
    })
}

/// Granularity resources are snapped to, so that designs whose flow problems
/// share an optimum compare equal despite solver round-off: 1 ms of travel
/// time, 1 cent and 1 g per month.
pub const TIME_RESOLUTION: f64 = 1e-3;
pub const COST_RESOLUTION: f64 = 1e-2;
pub const EMISSIONS_RESOLUTION: f64 = 1e-3;

fn snap(v: f64, step: f64) -> f64 {
    (v / step).round() * step
}

/// Fixed and operating costs broken down, USD/month.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostBreakdown {
    pub vehicle_fixed: f64,
    pub vehicle_operational: f64,
    pub subway_acquisition: f64,
    pub subway_operational: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.vehicle_fixed + self.vehicle_operational + self.subway_acquisition + self.subway_operational
    }
}

/// Monthly cost of a design and its flows.
pub fn cost_breakdown(
    flow: &FlowSolution,
    design: &DesignPoint,
    vcat: &VehicleCatalog,
    scat: &SubwayCatalog,
    params: &ScenarioParams,
) -> Result<CostBreakdown, DesignError> {
    let vehicle = vehicle_dp(design.speed, vcat)?;
    let subway = subway_dp(design.train_factor, scat)?;
    Ok(CostBreakdown {
        vehicle_fixed: vehicle.fixed / vcat.vehicle_life * f64::from(design.fleet_size) / 12.0,
        vehicle_operational: vehicle.operational * flow.metrics.mileage_rate * params.seconds_per_month,
        subway_acquisition: subway.acquisition_per_year / 12.0,
        subway_operational: subway.operational_per_year / 12.0,
    })
}

/// Cost (USD/month), average travel time (s) and emissions (kg/month).
/// Infeasible flows map to Top.
pub fn aggregate_resources(
    flow: &FlowSolution,
    design: &DesignPoint,
    vcat: &VehicleCatalog,
    scat: &SubwayCatalog,
    params: &ScenarioParams,
) -> Result<ResourceVector, DesignError> {
    let costs = cost_breakdown(flow, design, vcat, scat, params)?;
    if !flow.is_optimal() {
        return Ok(ResourceVector::TOP);
    }
    let subway = subway_dp(design.train_factor, scat)?;
    let emissions = flow.metrics.emission_rate * params.seconds_per_month
        + scat.emissions_per_train * f64::from(subway.trains) / 12.0;
    Ok(ResourceVector::new(
        snap(costs.total(), COST_RESOLUTION),
        snap(flow.metrics.travel_time, TIME_RESOLUTION),
        snap(emissions, EMISSIONS_RESOLUTION),
    ))
}

/// Folds emissions into cost at `rate` USD/kg. Dominance in three components
/// implies dominance of the images.
pub fn monetize(r: &ResourceVector, rate: f64) -> CostTime {
    if r.is_top() {
        return CostTime::TOP;
    }
    CostTime {
        cost: r.cost + rate * r.emissions,
        time: r.time,
    }
}
