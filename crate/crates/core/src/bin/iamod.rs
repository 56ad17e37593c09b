use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use iamod_codesign::report::{compare_runs, solve_scenario, write_comparison, write_run, Budget, Format, RunArtifacts};
use iamod_codesign::scenario::{Scenario, ScenarioError};

/// Co-design of intermodal mobility systems with automated vehicles.
#[derive(Parser)]
#[command(name = "iamod", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file and list every violation found.
    Validate { scenario: PathBuf },
    /// Evaluate the design grid and write points, front and summary tables.
    Solve {
        scenario: PathBuf,
        /// Output directory.
        #[arg(long, short)]
        out: PathBuf,
        /// Worker threads for grid evaluation.
        #[arg(long, env = "IAMOD_THREADS", default_value_t = 1)]
        threads: usize,
        #[arg(long, default_value = "csv")]
        format: Format,
        /// Budget query `cost,time,emissions` in USD/month, minutes,
        /// kg/month; `inf` leaves a component open.
        #[arg(long, allow_hyphen_values = true)]
        budget: Option<String>,
        /// Vehicle case from the scenario catalogs (default: the scenario's).
        #[arg(long)]
        case: Option<String>,
    },
    /// Overlay the monetized fronts of completed runs.
    Compare {
        #[arg(required = true, num_args = 2..)]
        runs: Vec<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Validate { scenario } => match Scenario::load(&scenario) {
            Ok(s) => {
                println!(
                    "{}: ok ({} nodes, {} arcs, {} requests, {} vehicle case(s))",
                    scenario.display(),
                    s.graph.nodes().len(),
                    s.graph.arcs().len(),
                    s.requests.len(),
                    s.vehicle_cases.len()
                );
                Ok(ExitCode::SUCCESS)
            }
            Err(ScenarioError::Invalid(violations)) => {
                for v in &violations {
                    println!("{}: {v}", scenario.display());
                }
                println!("{} violation(s)", violations.len());
                Ok(ExitCode::FAILURE)
            }
            Err(e) => Err(e.into()),
        },
        Command::Solve {
            scenario,
            out,
            threads,
            format,
            budget,
            case,
        } => {
            let s = Scenario::load(&scenario)?;
            let budget = budget.map(|b| b.parse::<Budget>()).transpose()?;
            let threads = threads.max(1);
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .context("cannot start worker threads")?;
            let report = pool.install(|| solve_scenario(&s, case.as_deref(), threads > 1, budget))?;
            write_run(&out, &report, format)?;
            let c = &report.summary.counts;
            println!(
                "{} designs: {} pareto, {} feasible irrational, {} infeasible ({:.1} s) -> {}",
                report.summary.grid_size,
                c.pareto,
                c.feasible_irrational,
                c.infeasible,
                report.summary.wall_time_s,
                out.display()
            );
            if let Some(sel) = &report.summary.budget {
                match &sel.selection {
                    Some(p) => println!(
                        "budget selection: {} mph, {} vehicles, train factor {}",
                        p.speed_mph, p.fleet_size, p.train_factor
                    ),
                    None => println!("budget selection: no front element fits the budget"),
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare { runs, out } => {
            let artifacts = runs
                .iter()
                .map(|d| RunArtifacts::load(d))
                .collect::<Result<Vec<_>, _>>()?;
            let cmp = compare_runs(&artifacts)?;
            write_comparison(&out, &cmp)?;
            for (i, a) in cmp.names.iter().enumerate() {
                for (j, b) in cmp.names.iter().enumerate() {
                    if i != j && cmp.dominance[i][j] {
                        println!("{a} dominates {b}");
                    }
                }
            }
            println!("wrote {}", out.join(iamod_codesign::report::COMPARISON_FILE).display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
