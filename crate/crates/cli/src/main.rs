use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fwbb::bnb::{solve, BnbConfig, SolveReport, SolveStatus, WarmstartRule};
use fwbb::fw::FwConfig;
use fwbb::harness::{performance_profile, run_bench, write_profile_csv, write_records_csv, BenchGrid, RiskSpec};
use fwbb::io::{generated_file, read_instance, write_instance};
use fwbb::model::{MeanRiskInstance, RiskWeighting};
use fwbb::oracle::oracle_solve;
use log::info;
use serde::Serialize;

/// Mean-risk portfolio optimization by Frank-Wolfe branch-and-bound.
#[derive(Parser)]
#[command(name = "fwbb", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance to optimality.
    Solve(SolveArgs),
    /// Write a synthetic instance.
    Generate(GenerateArgs),
    /// Run a configuration grid over a set of instances.
    Bench(BenchArgs),
    /// Solve a small instance by exhaustive enumeration.
    Oracle(OracleArgs),
    /// Audit a finished solve against its instance.
    Check(CheckArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum RiskKind {
    Linear,
    Quad,
    Exp,
}

#[derive(Args)]
struct RiskArgs {
    #[arg(long, value_enum)]
    risk: RiskKind,
    /// Confidence level of the linear weighting.
    #[arg(long, default_value_t = 0.95)]
    epsilon: f64,
    #[arg(long, default_value_t = 1.0)]
    omega: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
}

impl RiskArgs {
    fn weighting(&self) -> Result<RiskWeighting> {
        let spec = match self.risk {
            RiskKind::Linear => RiskSpec::Linear { epsilon: self.epsilon },
            RiskKind::Quad => RiskSpec::Quadratic { omega: self.omega },
            RiskKind::Exp => RiskSpec::Exp { gamma: self.gamma },
        };
        Ok(spec.weighting()?)
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Instance JSON; read from stdin when absent.
    #[arg(long)]
    instance: Option<PathBuf>,
    #[command(flatten)]
    risk: RiskArgs,
    #[arg(long, default_value = "x-proj")]
    warmstart: WarmstartRule,
    /// Monotone line search.
    #[arg(long)]
    monotone: bool,
    /// Pruning tolerance and Frank-Wolfe gap tolerance.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 3600.0)]
    time_limit: f64,
    /// Include relaxation audit data in the report.
    #[arg(long)]
    audit: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.5)]
    int_frac: f64,
    #[arg(long, default_value_t = 1.0)]
    budget_mult: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Glob pattern of instance files.
    #[arg(long)]
    instances: String,
    #[arg(long)]
    grid: PathBuf,
    #[arg(long)]
    out_records: PathBuf,
    #[arg(long)]
    out_profile: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    instance: Option<PathBuf>,
    #[command(flatten)]
    risk: RiskArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Report written by `solve`.
    #[arg(long)]
    report: PathBuf,
    /// Time limit of the audited re-solve.
    #[arg(long, default_value_t = 3600.0)]
    time_limit: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_instance(path: Option<&Path>) -> Result<(String, MeanRiskInstance)> {
    let (file, inst) = match path {
        Some(p) => {
            let f = File::open(p).with_context(|| format!("cannot open {}", p.display()))?;
            read_instance(BufReader::new(f)).with_context(|| format!("invalid instance {}", p.display()))?
        }
        None => {
            let mut buf = Vec::new();
            io::stdin().read_to_end(&mut buf).context("cannot read stdin")?;
            read_instance(buf.as_slice()).context("invalid instance on stdin")?
        }
    };
    let name = file
        .name
        .clone()
        .or_else(|| path.and_then(|p| p.file_stem()).map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "stdin".into());
    Ok((name, inst))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut w = output(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn cmd_solve(args: &SolveArgs) -> Result<ExitCode> {
    let h = args.risk.weighting()?;
    let (name, inst) = load_instance(args.instance.as_deref())?;
    let defaults = FwConfig::default();
    let cfg = BnbConfig {
        fw: FwConfig {
            p_nm: if args.monotone { 0 } else { defaults.p_nm },
            gap_tol: args.tol,
            ..defaults
        },
        warmstart: args.warmstart,
        time_limit: args.time_limit,
        abs_tol: args.tol,
        audit: args.audit,
        ..BnbConfig::default()
    };
    info!("solving {name} (n = {}) with {}", inst.n(), h.label());
    let report = solve(&inst, &h, &cfg)?;
    emit_json(args.out.as_deref(), &report)?;
    Ok(match report.status {
        SolveStatus::Optimal => ExitCode::SUCCESS,
        SolveStatus::TimeLimit => ExitCode::from(2),
    })
}

fn cmd_generate(args: &GenerateArgs) -> Result<ExitCode> {
    let file = generated_file(args.n, args.int_frac, args.budget_mult, args.seed)?;
    let mut w = output(args.out.as_deref())?;
    write_instance(&mut w, &file)?;
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench(args: &BenchArgs) -> Result<ExitCode> {
    let grid: BenchGrid = serde_json::from_reader(BufReader::new(
        File::open(&args.grid).with_context(|| format!("cannot open {}", args.grid.display()))?,
    ))
    .context("invalid grid file")?;
    grid.validate()?;
    let mut paths: Vec<PathBuf> = glob::glob(&args.instances)
        .context("invalid instance pattern")?
        .collect::<std::result::Result<_, _>>()?;
    paths.sort();
    if paths.is_empty() {
        bail!("no instance matches {}", args.instances);
    }
    let instances = paths
        .iter()
        .map(|p| load_instance(Some(p)))
        .collect::<Result<Vec<_>>>()?;
    let records = run_bench(&instances, &grid, args.jobs)?;
    write_records_csv(output(Some(&args.out_records))?, &records)?;
    write_profile_csv(output(Some(&args.out_profile))?, &performance_profile(&records))?;
    let solved = records.iter().filter(|r| r.solved()).count();
    info!("{solved} of {} cells solved", records.len());
    Ok(ExitCode::SUCCESS)
}

fn cmd_oracle(args: &OracleArgs) -> Result<ExitCode> {
    let h = args.risk.weighting()?;
    let (_, inst) = load_instance(args.instance.as_deref())?;
    emit_json(args.out.as_deref(), &oracle_solve(&inst, &h)?)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct CheckItem {
    name: &'static str,
    pass: bool,
    detail: String,
}

#[derive(Serialize)]
struct CheckReport {
    pass: bool,
    checks: Vec<CheckItem>,
}

fn rel_diff(x: f64, y: f64) -> f64 {
    (x - y).abs() / x.abs().max(y.abs()).max(1.0)
}

fn cmd_check(args: &CheckArgs) -> Result<ExitCode> {
    let (_, inst) = load_instance(Some(&args.instance))?;
    let report: SolveReport = serde_json::from_reader(BufReader::new(
        File::open(&args.report).with_context(|| format!("cannot open {}", args.report.display()))?,
    ))
    .context("invalid report")?;
    if report.y.len() != inst.n() {
        bail!("report has {} entries, instance has n = {}", report.y.len(), inst.n());
    }
    let mut checks = Vec::new();
    let mut add = |name, pass, detail: String| checks.push(CheckItem { name, pass, detail });

    let y = &report.y;
    let spent: f64 = y.iter().zip(inst.a().iter()).map(|(v, a)| v * a).sum();
    add("feasible", inst.is_feasible(y, 1e-9), format!("a'y = {spent}, b = {}", inst.b()));
    let frac = inst
        .integer_set()
        .iter()
        .map(|&i| (y[i] - y[i].round()).abs())
        .fold(0.0, f64::max);
    add("integral", frac <= 1e-9, format!("max fractionality {frac:e}"));
    let obj = 0.0 - inst.objective(&report.risk, y);
    let d = rel_diff(obj, report.objective_max);
    add("objective", d <= 1e-9, format!("recomputed {obj}, reported {}, rel diff {d:e}", report.objective_max));

    let cfg = BnbConfig {
        warmstart: report.warmstart,
        time_limit: args.time_limit,
        audit: true,
        ..BnbConfig::default()
    };
    let again = solve(&inst, &report.risk, &cfg)?;
    let d = rel_diff(again.objective_max, report.objective_max);
    add("resolve", d <= 1e-6, format!("re-solved {}, rel diff {d:e}", again.objective_max));
    let audit = again.audit.expect("audit requested").relaxations;
    add(
        "line_search",
        audit.acceptance_violations == 0 && audit.max_backtracks <= 200,
        format!("{} violations, max {} backtracks", audit.acceptance_violations, audit.max_backtracks),
    );
    add("reference_value", audit.f_bar_increases == 0, format!("{} increases", audit.f_bar_increases));
    add(
        "weak_duality",
        audit.max_dual_excess <= 1e-10,
        format!("max dual excess {:e}", audit.max_dual_excess),
    );
    add("cache", audit.max_cache_drift <= 1e-9, format!("max drift {:e}", audit.max_cache_drift));

    let pass = checks.iter().all(|c| c.pass);
    emit_json(args.out.as_deref(), &CheckReport { pass, checks })?;
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Generate(a) => cmd_generate(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Check(a) => cmd_check(a),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
