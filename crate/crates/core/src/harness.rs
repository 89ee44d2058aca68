//! Benchmark sweeps over instances and solver configurations, and
//! Dolan-More performance profiles of the results.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bnb::{solve, BnbConfig, SolveStatus, WarmstartRule};
use crate::error::{Error, Result};
use crate::fw::FwConfig;
use crate::model::{MeanRiskInstance, RiskWeighting};

/// Risk function as written in grid files and on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RiskSpec {
    /// Linear weighting from a confidence level.
    Linear { epsilon: f64 },
    #[serde(rename = "quad")]
    Quadratic { omega: f64 },
    Exp { gamma: f64 },
}

impl RiskSpec {
    pub fn weighting(&self) -> Result<RiskWeighting> {
        let h = match *self {
            RiskSpec::Linear { epsilon } => RiskWeighting::linear_from_confidence(epsilon)?,
            RiskSpec::Quadratic { omega } => RiskWeighting::Quadratic { omega },
            RiskSpec::Exp { gamma } => RiskWeighting::ExpThreshold { gamma },
        };
        h.validate()?;
        Ok(h)
    }

    pub fn name(&self) -> &'static str {
        match self {
            RiskSpec::Linear { .. } => "linear",
            RiskSpec::Quadratic { .. } => "quad",
            RiskSpec::Exp { .. } => "exp",
        }
    }

    pub fn param(&self) -> f64 {
        match *self {
            RiskSpec::Linear { epsilon } => epsilon,
            RiskSpec::Quadratic { omega } => omega,
            RiskSpec::Exp { gamma } => gamma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSpec {
    pub warmstart: WarmstartRule,
    #[serde(default)]
    pub monotone: bool,
}

impl SolverSpec {
    pub fn label(&self) -> String {
        format!("{}/{}", self.warmstart, if self.monotone { "mono" } else { "nm" })
    }
}

fn default_solvers() -> Vec<SolverSpec> {
    vec![SolverSpec {
        warmstart: WarmstartRule::XOrProj,
        monotone: false,
    }]
}

fn default_time_limit() -> f64 {
    3600.0
}

/// Configuration grid. Budgets are given as multiples of `sum(a)`; an empty
/// list keeps each instance's own budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchGrid {
    pub risks: Vec<RiskSpec>,
    #[serde(default)]
    pub budget_multipliers: Vec<f64>,
    #[serde(default = "default_solvers")]
    pub solvers: Vec<SolverSpec>,
    #[serde(default = "default_time_limit")]
    pub time_limit: f64,
}

impl BenchGrid {
    pub fn validate(&self) -> Result<()> {
        if self.risks.is_empty() {
            return Err(Error::InvalidConfig("grid needs at least one risk function".into()));
        }
        if self.solvers.is_empty() {
            return Err(Error::InvalidConfig("grid needs at least one solver".into()));
        }
        for r in &self.risks {
            r.weighting()?;
        }
        if let Some(m) = self.budget_multipliers.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
            return Err(Error::InvalidConfig(format!("budget multiplier {m} must be positive")));
        }
        Ok(())
    }

    /// Number of cells per instance.
    pub fn cells_per_instance(&self) -> usize {
        self.risks.len() * self.budget_multipliers.len().max(1) * self.solvers.len()
    }
}

/// One row of the records CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub instance: String,
    pub config: String,
    pub risk: String,
    pub risk_param: f64,
    pub warmstart: String,
    pub monotone: bool,
    pub budget_multiplier: Option<f64>,
    /// `Optimal`, `TimeLimit`, or `Error: ...`.
    pub status: String,
    pub wall_time: Option<f64>,
    pub nodes: Option<usize>,
    pub fw_iters: Option<usize>,
    pub objective_max: Option<f64>,
    pub return_term: Option<f64>,
    pub nnz: Option<usize>,
    pub max_entry: Option<f64>,
}

impl BenchRecord {
    pub fn solved(&self) -> bool {
        self.status == "Optimal"
    }

    /// Key of the problem a cell solves, shared across solver configurations.
    pub fn problem_key(&self) -> (String, String, String) {
        (
            self.instance.clone(),
            format!("{}={}", self.risk, self.risk_param),
            self.budget_multiplier.map_or_else(|| "-".into(), |m| m.to_string()),
        )
    }
}

/// Fixed column order of the records CSV.
pub const RECORD_HEADER: [&str; 15] = [
    "instance",
    "config",
    "risk",
    "risk_param",
    "warmstart",
    "monotone",
    "budget_multiplier",
    "status",
    "wall_time",
    "nodes",
    "fw_iters",
    "objective_max",
    "return_term",
    "nnz",
    "max_entry",
];

struct Cell<'a> {
    name: &'a str,
    inst: &'a MeanRiskInstance,
    risk: RiskSpec,
    budget: Option<f64>,
    solver: SolverSpec,
}

fn run_cell(cell: &Cell<'_>, time_limit: f64) -> BenchRecord {
    let mut rec = BenchRecord {
        instance: cell.name.to_string(),
        config: cell.solver.label(),
        risk: cell.risk.name().to_string(),
        risk_param: cell.risk.param(),
        warmstart: cell.solver.warmstart.to_string(),
        monotone: cell.solver.monotone,
        budget_multiplier: cell.budget,
        status: String::new(),
        wall_time: None,
        nodes: None,
        fw_iters: None,
        objective_max: None,
        return_term: None,
        nnz: None,
        max_entry: None,
    };
    let outcome = (|| -> Result<_> {
        let h = cell.risk.weighting()?;
        let inst = match cell.budget {
            Some(mult) => cell.inst.with_budget(mult * cell.inst.a().sum())?,
            None => cell.inst.clone(),
        };
        let cfg = BnbConfig {
            fw: FwConfig {
                p_nm: if cell.solver.monotone { 0 } else { FwConfig::default().p_nm },
                ..FwConfig::default()
            },
            warmstart: cell.solver.warmstart,
            time_limit,
            ..BnbConfig::default()
        };
        // the timer covers the solve only
        let start = Instant::now();
        let rep = solve(&inst, &h, &cfg)?;
        Ok((rep, start.elapsed().as_secs_f64()))
    })();
    match outcome {
        Ok((rep, secs)) => {
            rec.status = match rep.status {
                SolveStatus::Optimal => "Optimal".into(),
                SolveStatus::TimeLimit => "TimeLimit".into(),
            };
            rec.wall_time = Some(secs);
            rec.nodes = Some(rep.nodes);
            rec.fw_iters = Some(rep.fw_iters_total);
            rec.objective_max = Some(rep.objective_max);
            rec.return_term = Some(rep.return_term);
            rec.nnz = Some(rep.nnz);
            rec.max_entry = Some(rep.max_entry);
        }
        Err(e) => rec.status = format!("Error: {e}"),
    }
    rec
}

/// Runs every (instance, risk, budget, solver) cell. Cells run on a pool of
/// `jobs` threads; records come back in grid order regardless.
pub fn run_bench(instances: &[(String, MeanRiskInstance)], grid: &BenchGrid, jobs: usize) -> Result<Vec<BenchRecord>> {
    grid.validate()?;
    let budgets: Vec<Option<f64>> = if grid.budget_multipliers.is_empty() {
        vec![None]
    } else {
        grid.budget_multipliers.iter().map(|&m| Some(m)).collect()
    };
    let mut cells = Vec::new();
    for (name, inst) in instances {
        for &risk in &grid.risks {
            for &budget in &budgets {
                for &solver in &grid.solvers {
                    cells.push(Cell {
                        name,
                        inst,
                        risk,
                        budget,
                        solver,
                    });
                }
            }
        }
    }
    info!("running {} cells on {jobs} threads", cells.len());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(pool.install(|| cells.par_iter().map(|c| run_cell(c, grid.time_limit)).collect()))
}

/// Writes the header even when there are no records.
pub fn write_records_csv<W: Write>(writer: W, records: &[BenchRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    let csv_err = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(RECORD_HEADER).map_err(csv_err)?;
    for r in records {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}

pub fn read_records_csv<R: std::io::Read>(reader: R) -> Result<Vec<BenchRecord>> {
    let mut rd = csv::Reader::from_reader(reader);
    rd.deserialize()
        .collect::<std::result::Result<Vec<BenchRecord>, _>>()
        .map_err(|e| Error::Format(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub solver_config: String,
    pub tau: f64,
    pub fraction_solved: f64,
}

/// Performance profile: for each configuration and each ratio `tau`, the
/// fraction of problems the configuration solves within `tau` times the
/// best time on that problem. Unsolved cells never count as solved and do
/// not enter the best time.
pub fn performance_profile(records: &[BenchRecord]) -> Vec<ProfilePoint> {
    let mut configs: Vec<String> = Vec::new();
    for r in records {
        if !configs.contains(&r.config) {
            configs.push(r.config.clone());
        }
    }
    let mut best: BTreeMap<(String, String, String), f64> = BTreeMap::new();
    let mut problems: BTreeMap<(String, String, String), ()> = BTreeMap::new();
    for r in records {
        problems.insert(r.problem_key(), ());
        if let (true, Some(t)) = (r.solved(), r.wall_time) {
            let e = best.entry(r.problem_key()).or_insert(f64::INFINITY);
            *e = e.min(t);
        }
    }
    let total = problems.len();
    if total == 0 {
        return Vec::new();
    }
    let ratio = |r: &BenchRecord| -> Option<f64> {
        let t = r.wall_time?;
        if !r.solved() {
            return None;
        }
        let b = best[&r.problem_key()];
        Some(if b > 0.0 { t / b } else if t > 0.0 { f64::INFINITY } else { 1.0 })
    };
    let mut taus: Vec<f64> = records.iter().filter_map(ratio).filter(|t| t.is_finite()).collect();
    taus.push(1.0);
    taus.sort_by(f64::total_cmp);
    taus.dedup();

    let mut out = Vec::new();
    for cfg in &configs {
        let ratios: Vec<f64> = records.iter().filter(|r| &r.config == cfg).filter_map(ratio).collect();
        for &tau in &taus {
            let solved = ratios.iter().filter(|&&q| q <= tau).count();
            out.push(ProfilePoint {
                solver_config: cfg.clone(),
                tau,
                fraction_solved: solved as f64 / total as f64,
            });
        }
    }
    out
}

pub fn write_profile_csv<W: Write>(writer: W, points: &[ProfilePoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for p in points {
        w.serialize(p).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}
