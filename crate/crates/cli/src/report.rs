//! Files written by the command-line verbs.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use oos_core::demand::ServiceNeed;
use oos_core::horizon::{NeedOutcome, NeedStatus, RunResult, SeriesPoint};
use oos_core::model::ObjectiveBreakdown;
use oos_core::schedule::{gantt, itinerary};

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct DemandRow<'a> {
    need: u32,
    satellite: &'a str,
    service: String,
    occurrence_day: i64,
    random: bool,
    chosen_day: String,
    servicer: &'a str,
    revenue_usd: f64,
    delay_penalty_usd: f64,
}

pub fn write_demand(path: &Path, history: &[NeedOutcome]) -> Result<()> {
    let rows: Vec<DemandRow> = history
        .iter()
        .map(|h| {
            let (chosen_day, servicer) = match &h.status {
                NeedStatus::Served { tau, servicer } => (tau.to_string(), servicer.as_str()),
                NeedStatus::Declined => ("declined".to_string(), ""),
                NeedStatus::Pending => ("pending".to_string(), ""),
            };
            DemandRow {
                need: h.need.id.0,
                satellite: &h.need.satellite,
                service: h.need.kind.to_string(),
                occurrence_day: h.need.occurrence_day,
                random: h.need.random,
                chosen_day,
                servicer,
                revenue_usd: h.revenue_usd,
                delay_penalty_usd: h.delay_penalty_usd,
            }
        })
        .collect();
    write_csv(path, &rows)
}

pub fn write_series(path: &Path, series: &[SeriesPoint]) -> Result<()> {
    write_csv(path, series)
}

#[derive(Serialize)]
pub struct SolverHeader {
    pub command: String,
    pub gap_requested: f64,
    pub time_limit_s: f64,
    /// Gaps reached per solve; the solver may return different optimal plans
    /// on ties, so reports are reproducible only given these.
    pub gaps_reached: Vec<Option<f64>>,
}

#[derive(Serialize)]
pub struct RunSummary<'a> {
    pub scenario: &'a str,
    pub seed: u64,
    pub solver: SolverHeader,
    pub initial_investment_usd: f64,
    pub final_value_usd: f64,
    pub revenue_usd: f64,
    pub cost_usd: f64,
    pub breakdown: ObjectiveBreakdown,
    pub served: usize,
    pub declined: usize,
    pub replans: usize,
    pub payback_day: Option<i64>,
}

/// Writes the files of one rolling-horizon run into `dir`.
pub fn write_run(dir: &Path, result: &RunResult, needs: &[ServiceNeed], solver: SolverHeader) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let breakdown = result.log.realized();
    let summary = RunSummary {
        scenario: &result.scenario,
        seed: result.seed,
        solver,
        initial_investment_usd: result.initial_investment_usd,
        final_value_usd: result.final_value(),
        revenue_usd: breakdown.revenue,
        cost_usd: breakdown.cost(),
        breakdown,
        served: result.served(),
        declined: result.declined(),
        replans: result.log.replans.len(),
        payback_day: result.payback_day(),
    };
    write_json(&dir.join("summary.json"), &summary)?;
    write_series(&dir.join("series.csv"), &result.series)?;
    write_demand(&dir.join("demand.csv"), &result.history)?;
    write_csv(&dir.join("itinerary.csv"), &itinerary(&result.log.actions, needs))?;
    write_json(&dir.join("gantt.json"), &gantt(&result.log.actions, needs))?;
    write_csv(&dir.join("replans.csv"), &result.log.replans.iter().map(ReplanRow::from).collect::<Vec<_>>())?;
    Ok(())
}

#[derive(Serialize)]
struct ReplanRow {
    day: i64,
    committed_until: i64,
    trigger: String,
    pending_needs: usize,
    columns: usize,
    rows: usize,
    objective: f64,
    gap: Option<f64>,
    wall_time_s: f64,
}

impl From<&oos_core::horizon::ReplanRecord> for ReplanRow {
    fn from(r: &oos_core::horizon::ReplanRecord) -> Self {
        use oos_core::horizon::Trigger;
        let trigger = match &r.trigger {
            Trigger::Start => "start".to_string(),
            Trigger::QuietTimer => "control horizon".to_string(),
            Trigger::RandomNeeds(ids) => {
                format!("random needs {}", ids.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" "))
            }
        };
        Self {
            day: r.day,
            committed_until: r.committed_until,
            trigger,
            pending_needs: r.pending_needs,
            columns: r.columns,
            rows: r.rows,
            objective: r.objective,
            gap: r.gap,
            wall_time_s: r.wall_time_s,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TradeRow {
    pub architecture: String,
    pub seed: u64,
    pub status: String,
    pub initial_investment_usd: Option<f64>,
    pub final_value_usd: Option<f64>,
    pub revenue_usd: Option<f64>,
    pub cost_usd: Option<f64>,
    pub served: Option<usize>,
    pub declined: Option<usize>,
    pub payback_day: Option<i64>,
}
