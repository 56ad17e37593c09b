//! Result tables for a solved scenario and overlays of several runs.
//!
//! Reported units are USD/month, minutes and kg/month; infeasible resources
//! are written as empty CSV fields and JSON `null`. Floats are written with
//! the shortest decimal form that parses back to the same double.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{
    evaluate_grid, front_dominates, monetized_front, pareto_front, query_budget, sorted_by_cost, Classification,
    EngineError, EvaluatedPoint,
};
use crate::poset::{CostTime, ResourceVector};
use crate::scenario::{Scenario, ScenarioError};
use crate::units::mps_to_mph;

/// Design speeds are catalog values in mph; rounding undoes the m/s round
/// trip (20 mph would otherwise print as 19.999999999999996).
fn speed_mph(speed: f64) -> f64 {
    (mps_to_mph(speed) * 1e9).round() / 1e9
}

pub const POINTS_STEM: &str = "points";
pub const FRONT_STEM: &str = "front";
pub const MONETIZED_FILE: &str = "front_monetized.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const COMPARISON_FILE: &str = "comparison.csv";
pub const DOMINANCE_FILE: &str = "dominance.csv";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("missing run artifact {0}")]
    MissingArtifact(PathBuf),
    #[error("scenario hash mismatch: {first} has {first_hash}, {other} has {other_hash}")]
    HashMismatch {
        first: PathBuf,
        first_hash: String,
        other: PathBuf,
        other_hash: String,
    },
    #[error("runs use different monetization rates ({0} and {1} USD/kg)")]
    RateMismatch(f64, f64),
    #[error("compare needs at least two runs")]
    TooFewRuns,
    #[error("invalid budget `{0}`: expected cost,time,emissions in USD/month, minutes, kg/month")]
    InvalidBudget(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format `{s}` (expected csv or json)")),
        }
    }
}

/// Upper bounds for a budget query, in reporting units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    #[serde(with = "open_bound")]
    pub cost_usd_per_month: f64,
    #[serde(with = "open_bound")]
    pub time_min: f64,
    #[serde(with = "open_bound")]
    pub emissions_kg_per_month: f64,
}

/// JSON has no infinity; an open bound is written as null.
mod open_bound {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl Budget {
    fn resources(&self) -> ResourceVector {
        ResourceVector::new(self.cost_usd_per_month, self.time_min * 60.0, self.emissions_kg_per_month)
    }
}

impl FromStr for Budget {
    type Err = ReportError;

    /// `cost,time,emissions`; `inf` leaves a component unbounded.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ReportError::InvalidBudget(s.to_string());
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        match parts[..] {
            [c, t, e] if [c, t, e].iter().all(|v| !v.is_nan() && *v != f64::NEG_INFINITY) => Ok(Budget {
                cost_usd_per_month: c,
                time_min: t,
                emissions_kg_per_month: e,
            }),
            _ => Err(bad()),
        }
    }
}

/// One evaluated design. Resource fields are `None` for infeasible designs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub speed_mph: f64,
    pub fleet_size: u32,
    pub train_factor: f64,
    pub trains: u32,
    pub cost_usd_per_month: Option<f64>,
    pub time_min: Option<f64>,
    pub emissions_kg_per_month: Option<f64>,
    pub classification: Classification,
}

impl PointRecord {
    pub fn from_point(p: &EvaluatedPoint) -> PointRecord {
        let finite = |v: f64| v.is_finite().then_some(v);
        PointRecord {
            speed_mph: speed_mph(p.design.speed),
            fleet_size: p.design.fleet_size,
            train_factor: p.design.train_factor,
            trains: p.trains,
            cost_usd_per_month: finite(p.resources.cost),
            time_min: finite(p.resources.time / 60.0),
            emissions_kg_per_month: finite(p.resources.emissions),
            classification: p.classification,
        }
    }
}

/// One element of the cost-time front after folding emissions into cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonetizedRecord {
    pub speed_mph: f64,
    pub fleet_size: u32,
    pub train_factor: f64,
    pub cost_usd_per_month: f64,
    pub time_min: f64,
}

impl MonetizedRecord {
    pub fn cost_time(&self) -> CostTime {
        CostTime {
            cost: self.cost_usd_per_month,
            time: self.time_min,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub pareto: usize,
    pub feasible_irrational: usize,
    pub infeasible: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetSelection {
    pub budget: Budget,
    pub selection: Option<PointRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub network_hash: String,
    pub vehicle_case: String,
    /// Total request rate, customers per hour.
    pub total_demand_per_hour: f64,
    pub grid_size: usize,
    pub counts: ClassCounts,
    pub front_size: usize,
    pub monetization_rate_usd_per_kg: f64,
    pub budget: Option<BudgetSelection>,
    pub wall_time_s: f64,
}

/// Everything `solve` writes.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub points: Vec<PointRecord>,
    pub front: Vec<PointRecord>,
    pub monetized: Vec<MonetizedRecord>,
    pub summary: Summary,
    /// Evaluated points in grid order, with final classifications.
    pub evaluated: Vec<EvaluatedPoint>,
}

/// Evaluates the grid of `case` and assembles the report tables.
/// Parallelism follows the ambient rayon pool.
pub fn solve_scenario(
    scenario: &Scenario,
    case: Option<&str>,
    parallel: bool,
    budget: Option<Budget>,
) -> Result<RunReport, ReportError> {
    let started = Instant::now();
    let (case_name, _) = scenario.vehicle_catalog(case)?;
    let problem = scenario.problem(case)?;
    let grid = scenario.grid(case)?;
    let mut evaluated = evaluate_grid(&problem, &grid, parallel)?;
    let front = pareto_front(&mut evaluated);

    let points: Vec<PointRecord> = evaluated.iter().map(PointRecord::from_point).collect();
    let front_sorted = sorted_by_cost(&front, |r| r.cost);
    let front_records = front_sorted.iter().map(|p| points[p.label].clone()).collect();
    let rate = scenario.monetization_rate;
    let monetized = sorted_by_cost(&monetized_front(&front, rate), |r| r.cost)
        .iter()
        .map(|p| {
            let design = &evaluated[p.label].design;
            MonetizedRecord {
                speed_mph: speed_mph(design.speed),
                fleet_size: design.fleet_size,
                train_factor: design.train_factor,
                cost_usd_per_month: p.resources.cost,
                time_min: p.resources.time / 60.0,
            }
        })
        .collect();
    let count = |c| evaluated.iter().filter(|p| p.classification == c).count();
    let budget = budget.map(|b| BudgetSelection {
        budget: b,
        selection: query_budget(&front, &b.resources()).map(|p| points[p.label].clone()),
    });
    let summary = Summary {
        scenario: scenario.name.clone(),
        network_hash: scenario.network_hash.clone(),
        vehicle_case: case_name.to_string(),
        total_demand_per_hour: problem.total_rate() * 3600.0,
        grid_size: grid.len(),
        counts: ClassCounts {
            pareto: count(Classification::Pareto),
            feasible_irrational: count(Classification::FeasibleIrrational),
            infeasible: count(Classification::Infeasible),
        },
        front_size: front.len(),
        monetization_rate_usd_per_kg: rate,
        budget,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    Ok(RunReport {
        points,
        front: front_records,
        monetized,
        summary,
        evaluated,
    })
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), ReportError> {
    let format_err = |e: csv::Error| ReportError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(format_err)?;
    if rows.is_empty() {
        // Headers come from the first record, so an empty table is an empty
        // file.
        drop(w);
        return fs::write(path, "").map_err(io_err(path));
    }
    for r in rows {
        w.serialize(r).map_err(format_err)?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, ReportError> {
    if !path.exists() {
        return Err(ReportError::MissingArtifact(path.to_path_buf()));
    }
    let format_err = |e: csv::Error| ReportError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut r = csv::Reader::from_path(path).map_err(format_err)?;
    r.deserialize().collect::<Result<Vec<T>, _>>().map_err(format_err)
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), ReportError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| ReportError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ReportError> {
    if !path.exists() {
        return Err(ReportError::MissingArtifact(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| ReportError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn write_table<T: Serialize>(dir: &Path, stem: &str, format: Format, rows: &[T]) -> Result<(), ReportError> {
    let path = dir.join(format!("{stem}.{}", format.extension()));
    match format {
        Format::Csv => write_csv(&path, rows),
        Format::Json => write_json(&path, rows),
    }
}

/// Reads `points` or `front` back from a run directory, whichever format is
/// present (CSV preferred).
pub fn read_table(dir: &Path, stem: &str) -> Result<Vec<PointRecord>, ReportError> {
    let csv_path = dir.join(format!("{stem}.csv"));
    if csv_path.exists() {
        return read_csv(&csv_path);
    }
    read_json(&dir.join(format!("{stem}.json")))
}

pub fn write_run(dir: &Path, report: &RunReport, format: Format) -> Result<(), ReportError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_table(dir, POINTS_STEM, format, &report.points)?;
    write_table(dir, FRONT_STEM, format, &report.front)?;
    write_csv(&dir.join(MONETIZED_FILE), &report.monetized)?;
    write_json(&dir.join(SUMMARY_FILE), &report.summary)
}

/// A completed run read back from disk.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub summary: Summary,
    pub monetized: Vec<MonetizedRecord>,
}

impl RunArtifacts {
    pub fn load(dir: &Path) -> Result<RunArtifacts, ReportError> {
        Ok(RunArtifacts {
            dir: dir.to_path_buf(),
            summary: read_json(&dir.join(SUMMARY_FILE))?,
            monetized: read_csv(&dir.join(MONETIZED_FILE))?,
        })
    }

    /// Series name: the run directory's last component.
    pub fn name(&self) -> String {
        self.dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.dir.display().to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub series: String,
    pub vehicle_case: String,
    pub rank: usize,
    pub speed_mph: f64,
    pub fleet_size: u32,
    pub train_factor: f64,
    pub cost_usd_per_month: f64,
    pub time_min: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub names: Vec<String>,
    pub rows: Vec<ComparisonRow>,
    /// `dominance[i][j]`: every point of series j is weakly dominated by
    /// some point of series i.
    pub dominance: Vec<Vec<bool>>,
}

/// Aligns the monetized fronts of several runs over the same network.
pub fn compare_runs(runs: &[RunArtifacts]) -> Result<Comparison, ReportError> {
    if runs.len() < 2 {
        return Err(ReportError::TooFewRuns);
    }
    let first = &runs[0];
    for other in &runs[1..] {
        if other.summary.network_hash != first.summary.network_hash {
            return Err(ReportError::HashMismatch {
                first: first.dir.clone(),
                first_hash: first.summary.network_hash.clone(),
                other: other.dir.clone(),
                other_hash: other.summary.network_hash.clone(),
            });
        }
        let (a, b) = (
            first.summary.monetization_rate_usd_per_kg,
            other.summary.monetization_rate_usd_per_kg,
        );
        if a != b {
            return Err(ReportError::RateMismatch(a, b));
        }
    }
    let mut names: Vec<String> = runs.iter().map(RunArtifacts::name).collect();
    for i in 0..names.len() {
        if names[..i].contains(&names[i]) {
            names[i] = format!("{}#{}", names[i], i + 1);
        }
    }
    let rows = runs
        .iter()
        .zip(&names)
        .flat_map(|(run, name)| {
            run.monetized.iter().enumerate().map(move |(rank, m)| ComparisonRow {
                series: name.clone(),
                vehicle_case: run.summary.vehicle_case.clone(),
                rank,
                speed_mph: m.speed_mph,
                fleet_size: m.fleet_size,
                train_factor: m.train_factor,
                cost_usd_per_month: m.cost_usd_per_month,
                time_min: m.time_min,
            })
        })
        .collect();
    let fronts: Vec<Vec<CostTime>> = runs
        .iter()
        .map(|r| r.monetized.iter().map(MonetizedRecord::cost_time).collect())
        .collect();
    let dominance = fronts
        .iter()
        .map(|a| fronts.iter().map(|b| front_dominates(a, b)).collect())
        .collect();
    Ok(Comparison { names, rows, dominance })
}

#[derive(Serialize)]
struct DominanceRow<'a> {
    series: &'a str,
    dominates: &'a str,
    holds: bool,
}

pub fn write_comparison(dir: &Path, cmp: &Comparison) -> Result<(), ReportError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_csv(&dir.join(COMPARISON_FILE), &cmp.rows)?;
    let mut rows = Vec::new();
    for (i, a) in cmp.names.iter().enumerate() {
        for (j, b) in cmp.names.iter().enumerate() {
            if i != j {
                rows.push(DominanceRow {
                    series: a,
                    dominates: b,
                    holds: cmp.dominance[i][j],
                });
            }
        }
    }
    write_csv(&dir.join(DOMINANCE_FILE), &rows)
}
