mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use oos_core::horizon::{compare_architectures, first_plan, ExternalSolver};
use oos_core::scenario::{load_scenario, Scenario};
use oos_core::schedule::{check_schedule, gantt, itinerary, plan_once, reaccount};
use oos_core::solve::mps::{write_mps, NameMap};
use oos_core::solve::{SolveRequest, SolverConfig};

use report::{write_csv, write_demand, write_json, write_run, SolverHeader, TradeRow};

#[derive(Parser)]
#[command(name = "oosplan", version, about = "Plan on-orbit servicing operations in GEO")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one planning horizon and write the itinerary, costs and plot data.
    Schedule {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the rolling horizon for every architecture and seed and compare values.
    Trade {
        #[command(flatten)]
        common: Common,
        /// Inclusive seed range `N..M`, or a single seed; defaults to the seeds of the
        /// first scenario.
        #[arg(long, value_parser = parse_seeds)]
        seeds: Option<Seeds>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Check scenario files and list the defaults they rely on.
    Validate {
        #[arg(long = "scenario", required = true)]
        scenarios: Vec<PathBuf>,
    },
    /// Write the model of the first planning horizon as MPS without solving it.
    ExportMps {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario file; repeat for several architectures in `trade`.
    #[arg(long = "scenario", required = true)]
    scenarios: Vec<PathBuf>,
    /// Relative optimality gap at which the solver may stop.
    #[arg(long, default_value_t = SolveRequest::default().gap)]
    gap: f64,
    /// Time limit per solve, seconds.
    #[arg(long, default_value_t = SolveRequest::default().time_limit_s)]
    time_limit: f64,
    /// Solver command template with {model}, {solution}, {gap}, {time_limit}, {seed}
    /// and {adapter} placeholders.
    #[arg(long)]
    solver_cmd: Option<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl Common {
    fn solver(&self) -> ExternalSolver {
        let config = match &self.solver_cmd {
            Some(cmd) => SolverConfig::with_command(cmd.clone()),
            None => SolverConfig::default(),
        };
        ExternalSolver { config, gap: self.gap, time_limit_s: self.time_limit }
    }

    fn header(&self, gaps: Vec<Option<f64>>) -> SolverHeader {
        let s = self.solver();
        SolverHeader { command: s.config.command, gap_requested: s.gap, time_limit_s: s.time_limit_s, gaps_reached: gaps }
    }
}

#[derive(Debug, Clone)]
struct Seeds(Vec<u64>);

fn parse_seeds(text: &str) -> Result<Seeds, String> {
    let num = |s: &str| s.trim().parse::<u64>().map_err(|e| format!("bad seed {s:?}: {e}"));
    match text.split_once("..") {
        Some((a, b)) => Ok(Seeds((num(a)?..=num(b)?).collect())),
        None => Ok(Seeds(vec![num(text)?])),
    }
}

fn load(path: &Path) -> Result<Scenario> {
    load_scenario(path).with_context(|| format!("loading {}", path.display()))
}

fn schedule(common: &Common, seed: u64) -> Result<()> {
    let [path] = common.scenarios.as_slice() else { bail!("schedule takes exactly one --scenario") };
    let s = load(path)?;
    let needs = s.needs(seed);
    let out = plan_once(&s, &needs, seed, &common.solver())?;
    fs::create_dir_all(&common.out)?;
    let dir = &common.out;
    write_csv(&dir.join("itinerary.csv"), &itinerary(&out.actions, &needs))?;
    write_json(&dir.join("gantt.json"), &gantt(&out.actions, &needs))?;
    write_demand(&dir.join("demand.csv"), &out.history)?;
    fs::write(dir.join("edges.tsv"), out.model.network.edge_list())?;
    let violations = check_schedule(&s.problem, &out.actions, &needs, &s.initial_state);
    let reaccounted = reaccount(&s.problem, &out.actions, &needs);
    let summary = serde_json::json!({
        "scenario": s.file.name,
        "seed": seed,
        "solver": common.header(vec![out.solution.gap]),
        "status": format!("{:?}", out.solution.status),
        "objective_usd": out.solution.objective,
        "wall_time_s": out.solution.wall_time_s,
        "breakdown": out.breakdown,
        "reaccounted": reaccounted,
        "profit_usd": out.breakdown.profit(),
        "served": out.history.iter().filter(|h| matches!(h.status, oos_core::horizon::NeedStatus::Served { .. })).count(),
        "declined": out.history.iter().filter(|h| h.status == oos_core::horizon::NeedStatus::Declined).count(),
        "violations": violations,
    });
    write_json(&dir.join("summary.json"), &summary)?;
    println!(
        "{}: {:?}, profit {:.0} USD (revenue {:.0}, cost {:.0}) in {:.2} s; files in {}",
        s.file.name,
        out.solution.status,
        out.breakdown.profit(),
        out.breakdown.revenue,
        out.breakdown.cost(),
        out.solution.wall_time_s,
        dir.display()
    );
    if !violations.is_empty() {
        bail!("schedule failed validation:\n  {}", violations.join("\n  "));
    }
    Ok(())
}

fn trade(common: &Common, seeds: Option<Vec<u64>>, workers: usize) -> Result<()> {
    let archs: Vec<Scenario> = common.scenarios.iter().map(|p| load(p)).collect::<Result<_>>()?;
    let seeds = seeds.unwrap_or_else(|| archs[0].seeds());
    fs::create_dir_all(&common.out)?;
    if seeds.is_empty() {
        log::warn!("no seeds given; writing an empty report");
        write_csv::<TradeRow>(&common.out.join("trade.csv"), &[])?;
        return Ok(());
    }
    let solver = common.solver();
    let runs = compare_architectures(&archs, &seeds, &solver, workers)?;
    let mut rows = Vec::new();
    let mut failures = 0;
    for r in &runs {
        let arch = archs.iter().find(|a| a.file.name == r.architecture).expect("known architecture");
        let dir = common.out.join(&r.architecture).join(format!("seed-{}", r.seed));
        match &r.result {
            Ok(res) => {
                let gaps = res.log.replans.iter().map(|p| p.gap).collect();
                write_run(&dir, res, &arch.needs(r.seed), common.header(gaps))?;
                let b = res.log.realized();
                rows.push(TradeRow {
                    architecture: r.architecture.clone(),
                    seed: r.seed,
                    status: "ok".into(),
                    initial_investment_usd: Some(res.initial_investment_usd),
                    final_value_usd: Some(res.final_value()),
                    revenue_usd: Some(b.revenue),
                    cost_usd: Some(b.cost()),
                    served: Some(res.served()),
                    declined: Some(res.declined()),
                    payback_day: res.payback_day(),
                });
            }
            Err(e) => {
                failures += 1;
                log::error!("{} seed {}: {e}", r.architecture, r.seed);
                rows.push(TradeRow {
                    architecture: r.architecture.clone(),
                    seed: r.seed,
                    status: format!("failed: {e}"),
                    initial_investment_usd: None,
                    final_value_usd: None,
                    revenue_usd: None,
                    cost_usd: None,
                    served: None,
                    declined: None,
                    payback_day: None,
                });
            }
        }
    }
    write_csv(&common.out.join("trade.csv"), &rows)?;
    for r in &rows {
        match r.final_value_usd {
            Some(v) => println!(
                "{:<24} seed {:>4}: final value {:>16.0} USD, payback {}",
                r.architecture,
                r.seed,
                v,
                r.payback_day.map_or("never".to_string(), |d| format!("day {d}"))
            ),
            None => println!("{:<24} seed {:>4}: {}", r.architecture, r.seed, r.status),
        }
    }
    if failures > 0 {
        log::warn!("{failures} of {} runs failed", rows.len());
    }
    Ok(())
}

fn validate(paths: &[PathBuf]) -> Result<()> {
    let mut bad = 0;
    for p in paths {
        match load_scenario(p) {
            Ok(s) => {
                println!(
                    "{}: ok ({} satellites, {} servicers, {} depots)",
                    p.display(),
                    s.problem.satellites.len(),
                    s.problem.fleet.servicers.len(),
                    s.problem.fleet.depots.len()
                );
                for d in &s.defaults_applied {
                    println!("  default: {d}");
                }
            }
            Err(e) => {
                bad += 1;
                println!("{}: {e}", p.display());
            }
        }
    }
    if bad > 0 {
        bail!("{bad} invalid scenario(s)");
    }
    Ok(())
}

fn export_mps(path: &Path, seed: u64, out: &Path) -> Result<()> {
    let s = load(path)?;
    let model = first_plan(&s, &s.needs(seed))?;
    fs::create_dir_all(out)?;
    fs::write(out.join("model.mps"), write_mps(&model.milp)?)?;
    write_json(&out.join("names.json"), &NameMap::of(&model.milp))?;
    fs::write(out.join("edges.tsv"), model.network.edge_list())?;
    println!("{}: {} written to {}", s.file.name, model.milp, out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Schedule { common, seed } => schedule(common, *seed),
        Command::Trade { common, seeds, workers } => trade(common, seeds.clone().map(|s| s.0), *workers),
        Command::Validate { scenarios } => validate(scenarios),
        Command::ExportMps { scenario, seed, out } => export_mps(scenario, *seed, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
